//! The half-step knife simplex and its Kuhn triangulation.
//!
//! A configuration of `n - 1` knives over a path of `m` items is a vector of
//! half-integer positions `1/2 <= x^1 <= ... <= x^{n-1} <= m + 1/2`. Positions
//! are stored doubled, so every coordinate is an integer in `1..=2m+1` and a
//! half-step is `+1`. Odd doubled positions sit between items; an even doubled
//! position `2y` hides item `y`.
//!
//! Bundle indices are zero-based here: bundle `b` lies between knife `b` and
//! knife `b + 1`, where knife `0` is the left sentinel (doubled `1`) and knife
//! `n` is the right sentinel (doubled `2m + 1`).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::Interval;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GeometryError {
    #[error("need at least one item")]
    NoItems,
    #[error("need at least one bundle")]
    NoParts,
    #[error("knife vector has {found} coordinates, expected {expected}")]
    Dimension { found: usize, expected: usize },
    #[error("knife vector {0:?} is not a non-decreasing vector in [1, 2m+1]")]
    OutOfSimplex(Vec<u32>),
    #[error("expected {expected} vertices, got {found}")]
    VertexCount { found: usize, expected: usize },
    #[error("vertices do not form a balanced half-step chain: {0}")]
    NotAChain(String),
}

/// Knife positions in doubled coordinates.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct KnifeVector(Vec<u32>);

impl KnifeVector {
    pub fn from_doubled(doubled: Vec<u32>) -> KnifeVector {
        KnifeVector(doubled)
    }

    /// Doubled positions, `2x^1, ..., 2x^{n-1}`.
    pub fn doubled(&self) -> &[u32] {
        &self.0
    }

    pub fn knives(&self) -> usize {
        self.0.len()
    }

    pub fn doubled_sum(&self) -> u64 {
        self.0.iter().map(|&v| u64::from(v)).sum()
    }

    pub(crate) fn bump(&self, knife: usize, delta: i64) -> KnifeVector {
        let mut next = self.0.clone();
        next[knife] = (i64::from(next[knife]) + delta) as u32;
        KnifeVector(next)
    }
}

/// The bundles of fully visible items induced by a knife vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartialDivision {
    pub bundles: Vec<Interval>,
    pub hidden: Vec<usize>,
}

/// `n` knife vectors forming a balanced chain, stored in chain order:
/// `vertices[t + 1] = vertices[t]` with knife `steps[t]` moved right by a half-step.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct ElementarySimplex {
    vertices: Vec<KnifeVector>,
    #[serde(skip)]
    steps: Vec<usize>,
}

impl ElementarySimplex {
    pub fn vertices(&self) -> &[KnifeVector] {
        &self.vertices
    }

    /// The knife moved at each step of the chain.
    pub fn steps(&self) -> &[usize] {
        &self.steps
    }

    pub fn base(&self) -> &KnifeVector {
        &self.vertices[0]
    }
}

/// Items contested between neighbouring bundles across a simplex.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimplexDecomposition {
    /// Items visible in bundle `b` at every vertex.
    pub cores: Vec<Interval>,
    /// For each knife, the item it hides at one of its two positions.
    pub contested: Vec<usize>,
}

/// The vertex set and triangulation of the knife simplex for `items` items
/// and `parts` bundles.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HalfGrid {
    items: usize,
    parts: usize,
}

impl HalfGrid {
    pub fn new(items: usize, parts: usize) -> Result<HalfGrid, GeometryError> {
        if items == 0 {
            return Err(GeometryError::NoItems);
        }
        if parts == 0 {
            return Err(GeometryError::NoParts);
        }
        Ok(HalfGrid { items, parts })
    }

    pub fn items(&self) -> usize {
        self.items
    }

    pub fn parts(&self) -> usize {
        self.parts
    }

    pub fn knives(&self) -> usize {
        self.parts - 1
    }

    /// Largest doubled coordinate, `2m + 1`.
    pub fn top(&self) -> u32 {
        (2 * self.items + 1) as u32
    }

    pub fn contains(&self, x: &KnifeVector) -> bool {
        let v = x.doubled();
        v.len() == self.knives()
            && v.first().is_none_or(|&first| first >= 1)
            && v.last().is_none_or(|&last| last <= self.top())
            && v.windows(2).all(|w| w[0] <= w[1])
    }

    pub fn check(&self, x: &KnifeVector) -> Result<(), GeometryError> {
        if x.knives() != self.knives() {
            return Err(GeometryError::Dimension { found: x.knives(), expected: self.knives() });
        }
        if !self.contains(x) {
            return Err(GeometryError::OutOfSimplex(x.doubled().to_vec()));
        }
        Ok(())
    }

    /// Doubled position of knife `k` with sentinels at `k = 0` and `k = parts`.
    fn knife(&self, x: &KnifeVector, k: usize) -> u32 {
        if k == 0 {
            1
        } else if k == self.parts {
            self.top()
        } else {
            x.doubled()[k - 1]
        }
    }

    /// Items strictly between the knives around bundle `b`.
    pub fn bundle(&self, x: &KnifeVector, b: usize) -> Interval {
        let left = self.knife(x, b) as usize;
        let right = self.knife(x, b + 1) as usize;
        Interval::new(left / 2 + 1, right.div_ceil(2) - 1)
    }

    pub fn partial_division(&self, x: &KnifeVector) -> PartialDivision {
        let bundles = (0..self.parts).map(|b| self.bundle(x, b)).collect();
        let mut hidden: Vec<usize> = x.doubled().iter().filter(|&&v| v % 2 == 0).map(|&v| (v / 2) as usize).collect();
        // coinciding knives hide the same item
        hidden.dedup();
        PartialDivision { bundles, hidden }
    }

    pub fn try_partial_division(&self, x: &KnifeVector) -> Result<PartialDivision, GeometryError> {
        self.check(x)?;
        Ok(self.partial_division(x))
    }

    /// `(ℓ, r)`: `floor(x^{b-1} + 1/2)` and `ceil(x^b - 1/2)` in one-based item numbers.
    pub fn boundary_items(&self, x: &KnifeVector, b: usize) -> (usize, usize) {
        let left = self.knife(x, b) as usize;
        let right = self.knife(x, b + 1) as usize;
        (left.div_ceil(2), right / 2)
    }

    /// Owner label (zero-based agent): the doubled coordinate sum modulo the
    /// number of bundles. Consecutive chain vertices differ by one in the sum,
    /// so a simplex sees every residue once.
    pub fn owner_label(&self, x: &KnifeVector) -> usize {
        (x.doubled_sum() % self.parts as u64) as usize
    }

    /// Every vertex, in lexicographic order.
    pub fn vertices(&self) -> Vertices {
        Vertices { top: self.top(), next: Some(vec![1; self.knives()]) }
    }

    /// `C(2m + n - 1, n - 1)`.
    pub fn vertex_count(&self) -> u128 {
        binomial((2 * self.items + self.knives()) as u128, self.knives() as u128)
    }

    /// `(2m)^(n-1)`: the simplex has volume `m^d / d!` and each cell `(1/2)^d / d!`.
    pub fn simplex_count(&self) -> u128 {
        (2 * self.items as u128).pow(self.knives() as u32)
    }

    /// Every elementary simplex once, ordered by base vertex and then by the
    /// lexicographic order of the knife-step sequence.
    pub fn simplices(&self) -> impl Iterator<Item = ElementarySimplex> + '_ {
        self.vertices().flat_map(move |base| self.simplices_at(&base))
    }

    /// All elementary simplices whose chain starts at `base`, in step order.
    pub fn simplices_at(&self, base: &KnifeVector) -> Vec<ElementarySimplex> {
        let mut out = Vec::new();
        let d = self.knives();
        let mut used = vec![false; d];
        let mut chain = vec![base.clone()];
        let mut steps = Vec::with_capacity(d);
        self.extend_chains(&mut used, &mut chain, &mut steps, &mut out);
        out
    }

    fn extend_chains(
        &self,
        used: &mut [bool],
        chain: &mut Vec<KnifeVector>,
        steps: &mut Vec<usize>,
        out: &mut Vec<ElementarySimplex>,
    ) {
        let d = self.knives();
        if steps.len() == d {
            out.push(ElementarySimplex { vertices: chain.clone(), steps: steps.clone() });
            return;
        }
        for k in 0..d {
            if used[k] {
                continue;
            }
            let cur = chain.last().expect("chain is never empty").doubled();
            let ceiling = if k + 1 < d { cur[k + 1] } else { self.top() };
            if cur[k] + 1 > ceiling {
                continue;
            }
            let next = chain.last().unwrap().bump(k, 1);
            used[k] = true;
            chain.push(next);
            steps.push(k);
            self.extend_chains(used, chain, steps, out);
            steps.pop();
            chain.pop();
            used[k] = false;
        }
    }

    /// The chain from `base` moving knives in the order `steps`, if it stays in the simplex.
    pub fn simplex_from_steps(&self, base: KnifeVector, steps: Vec<usize>) -> Result<ElementarySimplex, GeometryError> {
        self.check(&base)?;
        let d = self.knives();
        let mut seen = vec![false; d];
        if steps.len() != d || steps.iter().any(|&k| k >= d || std::mem::replace(&mut seen[k], true)) {
            return Err(GeometryError::NotAChain(format!("steps {steps:?} are not a permutation of 0..{d}")));
        }
        let mut vertices = vec![base];
        for &k in &steps {
            let next = vertices.last().unwrap().bump(k, 1);
            if !self.contains(&next) {
                return Err(GeometryError::OutOfSimplex(next.doubled().to_vec()));
            }
            vertices.push(next);
        }
        Ok(ElementarySimplex { vertices, steps })
    }

    /// Recovers the chain order of `n` vertices given in any order.
    pub fn simplex_from_vertices(&self, mut vertices: Vec<KnifeVector>) -> Result<ElementarySimplex, GeometryError> {
        if vertices.len() != self.parts {
            return Err(GeometryError::VertexCount { found: vertices.len(), expected: self.parts });
        }
        for v in &vertices {
            self.check(v)?;
        }
        vertices.sort_by_key(|v| v.doubled_sum());
        let mut steps = Vec::with_capacity(self.knives());
        for pair in vertices.windows(2) {
            let moved: Vec<usize> =
                (0..self.knives()).filter(|&k| pair[0].doubled()[k] != pair[1].doubled()[k]).collect();
            match moved.as_slice() {
                [k] if pair[1].doubled()[*k] == pair[0].doubled()[*k] + 1 => steps.push(*k),
                _ => {
                    return Err(GeometryError::NotAChain(format!(
                        "{:?} -> {:?} is not a single half-step",
                        pair[0].doubled(),
                        pair[1].doubled()
                    )))
                }
            }
        }
        let base = vertices[0].clone();
        self.simplex_from_steps(base, steps)
    }

    /// Cores `B_b` and contested items `y^k` of a simplex.
    pub fn decompose(&self, s: &ElementarySimplex) -> Result<SimplexDecomposition, GeometryError> {
        let d = self.knives();
        if s.vertices.len() != self.parts || s.steps.len() != d {
            return Err(GeometryError::VertexCount { found: s.vertices.len(), expected: self.parts });
        }
        let cores = (0..self.parts)
            .map(|b| {
                s.vertices.iter().map(|x| self.bundle(x, b)).reduce(|a, c| a.intersect(&c)).expect("n >= 1 vertices")
            })
            .collect();
        let (base, last) = (s.base().doubled(), s.vertices.last().unwrap().doubled());
        let mut contested = Vec::with_capacity(d);
        for k in 0..d {
            if last[k] != base[k] + 1 {
                return Err(GeometryError::NotAChain(format!("knife {k} does not move exactly once")));
            }
            let even = if base[k] % 2 == 0 { base[k] } else { last[k] };
            contested.push((even / 2) as usize);
        }
        if contested.windows(2).any(|w| w[0] > w[1]) {
            return Err(GeometryError::NotAChain(format!("contested items {contested:?} are not ordered")));
        }
        Ok(SimplexDecomposition { cores, contested })
    }
}

/// Lexicographic walk over the non-decreasing vectors in `[1, top]^d`.
pub struct Vertices {
    top: u32,
    next: Option<Vec<u32>>,
}

impl Iterator for Vertices {
    type Item = KnifeVector;

    fn next(&mut self) -> Option<KnifeVector> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        if let Some(pos) = succ.iter().rposition(|&v| v < self.top) {
            let bumped = succ[pos] + 1;
            succ[pos..].iter_mut().for_each(|v| *v = bumped);
            self.next = Some(succ);
        }
        Some(KnifeVector(current))
    }
}

fn binomial(n: u128, k: u128) -> u128 {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kv(v: &[u32]) -> KnifeVector {
        KnifeVector::from_doubled(v.to_vec())
    }

    fn iv(lo: usize, hi: usize) -> Interval {
        Interval::new(lo, hi)
    }

    /// The five vertices of the worked 12-item, 5-bundle example, in chain order.
    fn worked_chain() -> Vec<KnifeVector> {
        vec![
            kv(&[6, 9, 16, 21]),
            kv(&[6, 10, 16, 21]),
            kv(&[6, 10, 17, 21]),
            kv(&[6, 10, 17, 22]),
            kv(&[7, 10, 17, 22]),
        ]
    }

    #[test]
    fn partial_division_example() {
        let g = HalfGrid::new(12, 5).unwrap();
        let pd = g.partial_division(&kv(&[6, 9, 16, 21]));
        assert_eq!(pd.bundles, vec![iv(1, 2), iv(4, 4), iv(5, 7), iv(9, 10), iv(11, 12)]);
        assert_eq!(pd.hidden, vec![3, 8]);

        let g2 = HalfGrid::new(3, 2).unwrap();
        assert_eq!(g2.partial_division(&kv(&[1])).bundles, vec![Interval::EMPTY, iv(1, 3)]);
        assert!(g2.try_partial_division(&kv(&[8])).is_err());
        assert!(g2.try_partial_division(&kv(&[1, 2])).is_err());
    }

    #[test]
    fn boundary_items_example() {
        let g = HalfGrid::new(12, 5).unwrap();
        let x = kv(&[6, 9, 16, 21]);
        assert_eq!(g.boundary_items(&x, 1), (3, 4));
        assert_eq!(g.boundary_items(&x, 2), (5, 8));
        assert_eq!(g.boundary_items(&x, 4), (11, 12));
        assert_eq!(g.boundary_items(&x, 0), (1, 3));
    }

    #[test]
    fn owner_label_example() {
        let g = HalfGrid::new(4, 3).unwrap();
        assert_eq!(g.owner_label(&kv(&[1, 1])), 2);
    }

    #[test]
    fn small_simplex_lists() {
        let g = HalfGrid::new(1, 2).unwrap();
        let all: Vec<_> = g.simplices().map(|s| s.vertices().to_vec()).collect();
        assert_eq!(all, vec![vec![kv(&[1]), kv(&[2])], vec![kv(&[2]), kv(&[3])]]);

        let g = HalfGrid::new(2, 2).unwrap();
        let bases: Vec<_> = g.simplices().map(|s| s.base().doubled()[0]).collect();
        assert_eq!(bases, vec![1, 2, 3, 4]);
    }

    #[test]
    fn single_bundle_has_one_point_simplex() {
        let g = HalfGrid::new(3, 1).unwrap();
        let all: Vec<_> = g.simplices().collect();
        assert_eq!(all.len(), 1);
        assert_eq!(all[0].vertices(), &[kv(&[])]);
        assert_eq!(g.partial_division(&kv(&[])).bundles, vec![iv(1, 3)]);
    }

    #[test]
    fn decompose_worked_example() {
        let g = HalfGrid::new(12, 5).unwrap();
        let s = g.simplex_from_vertices(worked_chain()).unwrap();
        assert_eq!(s.steps(), &[1, 2, 3, 0]);
        let d = g.decompose(&s).unwrap();
        assert_eq!(d.cores, vec![iv(1, 2), iv(4, 4), iv(6, 7), iv(9, 10), iv(12, 12)]);
        assert_eq!(d.contested, vec![3, 5, 8, 11]);
    }

    #[test]
    fn decompose_two_vertex_chain() {
        let g = HalfGrid::new(1, 2).unwrap();
        let s = g.simplex_from_vertices(vec![kv(&[2]), kv(&[1])]).unwrap();
        let d = g.decompose(&s).unwrap();
        assert_eq!(d.cores, vec![Interval::EMPTY, Interval::EMPTY]);
        assert_eq!(d.contested, vec![1]);
    }

    #[test]
    fn equal_contested_items_leave_empty_core() {
        let g = HalfGrid::new(4, 3).unwrap();
        // knives 1 and 2 straddle item 2: positions 3->4 and 4->5
        let s = g.simplex_from_steps(kv(&[3, 4]), vec![1, 0]).unwrap();
        let d = g.decompose(&s).unwrap();
        assert_eq!(d.contested, vec![2, 2]);
        assert_eq!(d.cores[1], Interval::EMPTY);
    }

    #[test]
    fn rejects_broken_chains() {
        let g = HalfGrid::new(12, 5).unwrap();
        let mut bad = worked_chain();
        bad[4] = kv(&[8, 10, 17, 22]);
        assert!(g.simplex_from_vertices(bad).is_err());
        assert!(g.simplex_from_vertices(worked_chain()[..4].to_vec()).is_err());
        assert!(g.simplex_from_steps(kv(&[6, 9, 16, 21]), vec![1, 1, 2, 3]).is_err());
        let tight = HalfGrid::new(2, 3).unwrap();
        assert!(tight.simplex_from_steps(kv(&[2, 2]), vec![0, 1]).is_err());
        assert!(tight.simplex_from_steps(kv(&[2, 2]), vec![1, 0]).is_ok());
    }
}

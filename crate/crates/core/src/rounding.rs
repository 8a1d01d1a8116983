//! Rounding an elementary simplex into a full connected division.
//!
//! The chain of partial divisions splits the path into cores `B_1, ..., B_n`
//! and contested items `y^1 <= ... <= y^{n-1}`. Each contested item is offered
//! to the bundle on its left first. Bundle `j` takes `y^j` when `y^j` is visible
//! in bundle `j` somewhere on the chain, or when its left neighbour already owns
//! `y^{j-1}` and no vertex has knife `j-1` just right of `y^{j-1}` together with
//! knife `j` just left of `y^j`.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::coloring::{virtual_value_with, EmptyBundleRule};
use crate::instance::{Instance, Interval};
use crate::simplex::{ElementarySimplex, GeometryError, HalfGrid, SimplexDecomposition};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DivisionError {
    #[error("need at least one item")]
    NoItems,
    #[error("need at least one bundle")]
    NoParts,
    #[error("the trivial division needs fewer items ({items}) than bundles ({parts})")]
    NotTrivial { items: usize, parts: usize },
    #[error("division has {found} bundles, expected {expected}")]
    BundleCount { found: usize, expected: usize },
    #[error("bundles are not an ordered partition of 1..={items}: {detail}")]
    NotAPartition { items: usize, detail: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// `n` connected, possibly empty bundles covering the path left to right.
#[derive(Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct Division {
    bundles: Vec<Interval>,
}

impl Division {
    pub fn new(bundles: Vec<Interval>, items: usize) -> Result<Division, DivisionError> {
        if items == 0 {
            return Err(DivisionError::NoItems);
        }
        if bundles.is_empty() {
            return Err(DivisionError::NoParts);
        }
        let mut next = 1;
        for (b, bundle) in bundles.iter().enumerate() {
            if let Some((lo, hi)) = bundle.bounds() {
                if lo != next {
                    return Err(DivisionError::NotAPartition {
                        items,
                        detail: format!("bundle {} starts at {lo}, expected {next}", b + 1),
                    });
                }
                next = hi + 1;
            }
        }
        if next != items + 1 {
            return Err(DivisionError::NotAPartition {
                items,
                detail: format!("items {next}..={items} are unassigned"),
            });
        }
        Ok(Division { bundles })
    }

    /// Parses the JSON list form and checks it against the expected shape.
    pub fn from_json_value(value: serde_json::Value, items: usize, parts: usize) -> Result<Division, DivisionError> {
        let bundles: Vec<Interval> =
            serde_json::from_value(value).map_err(|e| DivisionError::NotAPartition { items, detail: e.to_string() })?;
        if bundles.len() != parts {
            return Err(DivisionError::BundleCount { found: bundles.len(), expected: parts });
        }
        Division::new(bundles, items)
    }

    pub fn bundles(&self) -> &[Interval] {
        &self.bundles
    }

    pub fn parts(&self) -> usize {
        self.bundles.len()
    }

    pub fn whole(items: usize) -> Division {
        Division { bundles: vec![Interval::new(1, items)] }
    }
}

impl fmt::Debug for Division {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Division").field(&self.bundles).finish()
    }
}

/// Singletons `{1}, ..., {m}` followed by `n - m` empty bundles.
pub fn round_trivial(parts: usize, items: usize) -> Result<Division, DivisionError> {
    if items == 0 {
        return Err(DivisionError::NoItems);
    }
    if items >= parts {
        return Err(DivisionError::NotTrivial { items, parts });
    }
    let bundles = (1..=parts).map(|b| if b <= items { Interval::singleton(b) } else { Interval::EMPTY }).collect();
    Division::new(bundles, items)
}

/// Rounds an elementary simplex of `grid` into a division.
pub fn round(grid: &HalfGrid, simplex: &ElementarySimplex) -> Result<Division, DivisionError> {
    round_with(grid, simplex, BoundaryRule::Verbatim)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum BoundaryRule {
    Verbatim,
    /// Second condition reduced to "the previous contested item is taken".
    #[cfg(test)]
    DropKnifeClause,
    /// Second condition never fires.
    #[cfg(test)]
    SkipSecondCondition,
}

fn round_with(grid: &HalfGrid, simplex: &ElementarySimplex, rule: BoundaryRule) -> Result<Division, DivisionError> {
    let items = grid.items();
    let parts = grid.parts();
    if parts == 1 {
        return Ok(Division::whole(items));
    }
    let SimplexDecomposition { cores, contested: y } = grid.decompose(simplex)?;
    let vertices = simplex.vertices();
    let visible_in = |item: usize, b: usize| vertices.iter().any(|x| grid.bundle(x, b).contains(item));

    let mut bundles = cores;
    let mut taken = vec![false; items + 1];

    if visible_in(y[0], 0) {
        bundles[0] = bundles[0].hull_with(y[0]);
        taken[y[0]] = true;
    }
    for b in 1..parts - 1 {
        let (prev, cur) = (y[b - 1], y[b]);
        let prev_taken_left = taken[prev];
        if !prev_taken_left {
            bundles[b] = bundles[b].hull_with(prev);
            taken[prev] = true;
        }
        if prev == cur {
            continue;
        }
        let second = prev_taken_left
            && match rule {
                BoundaryRule::Verbatim => !vertices.iter().any(|x| {
                    let k = x.doubled();
                    k[b - 1] as usize == 2 * prev + 1 && k[b] as usize == 2 * cur - 1
                }),
                #[cfg(test)]
                BoundaryRule::DropKnifeClause => true,
                #[cfg(test)]
                BoundaryRule::SkipSecondCondition => false,
            };
        if visible_in(cur, b) || second {
            bundles[b] = bundles[b].hull_with(cur);
            taken[cur] = true;
        }
    }
    let last = y[parts - 2];
    if !taken[last] {
        bundles[parts - 1] = bundles[parts - 1].hull_with(last);
    }
    Division::new(bundles, items)
}

/// Which branch of the sandwich argument covers bundle `b` (numbered 1 to 7).
///
/// 1: left exterior, 2: right exterior; interior bundles with distinct
/// neighbouring contested items: 3 core only, 4 core plus left item, 5 core
/// plus right item, 6 both items; 7: interior with equal contested items.
pub fn sandwich_case(decomposition: &SimplexDecomposition, b: usize, rounded: &Interval) -> u8 {
    let parts = decomposition.cores.len();
    if b == 0 {
        return 1;
    }
    if b == parts - 1 {
        return 2;
    }
    let (prev, cur) = (decomposition.contested[b - 1], decomposition.contested[b]);
    if prev == cur {
        return 7;
    }
    match (rounded.contains(prev), rounded.contains(cur)) {
        (false, false) => 3,
        (true, false) => 4,
        (false, true) => 5,
        (true, true) => 6,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    /// `v(I*_j) >= v̂(x_k, j)` failed.
    Upper,
    /// `v̂(x_k, j) >= v^-(I*_j)` failed.
    Lower,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SandwichViolation {
    pub agent: usize,
    pub bundle: usize,
    pub vertex: usize,
    pub case: u8,
    pub bound: Bound,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SandwichReport {
    pub checks: usize,
    pub violations: Vec<SandwichViolation>,
}

impl SandwichReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks `v_i(I*_j) >= v̂_i(x_k, j) >= v_i^-(I*_j)` for every agent, bundle and vertex.
pub fn lemma1_check(
    inst: &Instance,
    grid: &HalfGrid,
    simplex: &ElementarySimplex,
    rounded: &Division,
) -> Result<SandwichReport, DivisionError> {
    lemma1_check_with(EmptyBundleRule::default(), inst, grid, simplex, rounded)
}

pub fn lemma1_check_with(
    rule: EmptyBundleRule,
    inst: &Instance,
    grid: &HalfGrid,
    simplex: &ElementarySimplex,
    rounded: &Division,
) -> Result<SandwichReport, DivisionError> {
    let mut report = SandwichReport::default();
    if grid.parts() == 1 {
        return Ok(report);
    }
    let decomposition = grid.decompose(simplex)?;
    for agent in 0..inst.agents() {
        for (b, bundle) in rounded.bundles().iter().enumerate() {
            let full = inst.value(agent, *bundle);
            let reduced = inst.up_to_one_value(agent, *bundle);
            for (k, x) in simplex.vertices().iter().enumerate() {
                report.checks += 1;
                let virt = virtual_value_with(rule, inst, grid, agent, x, b);
                let failed = if full < virt {
                    Some(Bound::Upper)
                } else if virt < reduced {
                    Some(Bound::Lower)
                } else {
                    None
                };
                if let Some(bound) = failed {
                    let case = sandwich_case(&decomposition, b, bundle);
                    report.violations.push(SandwichViolation { agent, bundle: b, vertex: k, case, bound });
                }
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simplex::KnifeVector;

    fn kv(v: &[u32]) -> KnifeVector {
        KnifeVector::from_doubled(v.to_vec())
    }

    fn iv(lo: usize, hi: usize) -> Interval {
        Interval::new(lo, hi)
    }

    fn worked_simplex(g: &HalfGrid) -> ElementarySimplex {
        g.simplex_from_vertices(vec![
            kv(&[6, 9, 16, 21]),
            kv(&[6, 10, 16, 21]),
            kv(&[6, 10, 17, 21]),
            kv(&[6, 10, 17, 22]),
            kv(&[7, 10, 17, 22]),
        ])
        .unwrap()
    }

    #[test]
    fn worked_example_rounds_to_expected_division() {
        let g = HalfGrid::new(12, 5).unwrap();
        let d = round(&g, &worked_simplex(&g)).unwrap();
        assert_eq!(d.bundles(), &[iv(1, 3), iv(4, 5), iv(6, 8), iv(9, 10), iv(11, 12)]);
    }

    #[test]
    fn two_vertex_chain_on_one_item() {
        let g = HalfGrid::new(1, 2).unwrap();
        let s = g.simplex_from_vertices(vec![kv(&[1]), kv(&[2])]).unwrap();
        assert_eq!(round(&g, &s).unwrap().bundles(), &[Interval::EMPTY, iv(1, 1)]);
        let s = g.simplex_from_vertices(vec![kv(&[2]), kv(&[3])]).unwrap();
        assert_eq!(round(&g, &s).unwrap().bundles(), &[iv(1, 1), Interval::EMPTY]);
    }

    #[test]
    fn trivial_division() {
        assert_eq!(round_trivial(3, 2).unwrap().bundles(), &[iv(1, 1), iv(2, 2), Interval::EMPTY]);
        assert_eq!(round_trivial(5, 0), Err(DivisionError::NoItems));
        assert_eq!(round_trivial(2, 2), Err(DivisionError::NotTrivial { items: 2, parts: 2 }));
    }

    #[test]
    fn division_shape_checks() {
        assert!(Division::new(vec![iv(1, 2), Interval::EMPTY, iv(3, 3)], 3).is_ok());
        assert!(Division::new(vec![iv(2, 3), iv(1, 1)], 3).is_err());
        assert!(Division::new(vec![iv(1, 1), iv(3, 3)], 3).is_err());
        assert!(Division::new(vec![iv(1, 2)], 3).is_err());
        let v = serde_json::json!([{"lo": 1, "hi": 1}, null]);
        assert_eq!(Division::from_json_value(v.clone(), 1, 2).unwrap().bundles(), &[iv(1, 1), Interval::EMPTY]);
        assert!(matches!(Division::from_json_value(v, 1, 3), Err(DivisionError::BundleCount { .. })));
    }

    #[test]
    fn worked_example_sandwich_for_several_valuations() {
        let g = HalfGrid::new(12, 5).unwrap();
        let s = worked_simplex(&g);
        let d = round(&g, &s).unwrap();
        let rows = vec![
            (0..12).map(|k| 1 << k).collect::<Vec<i64>>(),
            (0..12).map(|k| 1 << (11 - k)).collect(),
            vec![1; 12],
            vec![0, 0, 7, 0, 3, 0, 0, 9, 0, 0, 4, 1],
            vec![0; 12],
        ];
        let inst = Instance::additive_ints(&rows).unwrap();
        let report = lemma1_check(&inst, &g, &s, &d).unwrap();
        assert_eq!(report.checks, 5 * 5 * 5);
        assert!(report.holds(), "{:?}", report.violations);
    }

    /// Lower-bound failure at a vertex whose interior bundle is empty because
    /// its two knives sit on the neighbouring contested items, which both went
    /// to that bundle.
    fn is_hidden_pair_gap(g: &HalfGrid, s: &ElementarySimplex, d: &Division, v: &SandwichViolation) -> bool {
        let y = g.decompose(s).unwrap().contested;
        let x = s.vertices()[v.vertex].doubled();
        let b = v.bundle;
        v.bound == Bound::Lower
            && v.case == 6
            && y[b] == y[b - 1] + 1
            && x[b - 1] as usize == 2 * y[b - 1]
            && x[b] as usize == 2 * y[b]
            && d.bundles()[b] == Interval::new(y[b - 1], y[b])
    }

    /// Every simplex of every grid up to `max_items`, and every additive
    /// instance with item values in {0, 1, 3} (one agent; the sandwich is per
    /// agent). Returns the first violation not excused by `excused`.
    fn first_violation(
        rule: BoundaryRule,
        empty: EmptyBundleRule,
        parts: usize,
        max_items: usize,
        excused: impl Fn(&HalfGrid, &ElementarySimplex, &Division, &SandwichViolation) -> bool,
    ) -> Option<(Vec<i64>, ElementarySimplex)> {
        for items in parts..=max_items {
            let g = HalfGrid::new(items, parts).unwrap();
            let simplices: Vec<_> = g.simplices().collect();
            for code in 0..3usize.pow(items as u32) {
                let row: Vec<i64> = (0..items).map(|k| [0, 1, 3][(code / 3usize.pow(k as u32)) % 3]).collect();
                let inst = Instance::additive_ints(std::slice::from_ref(&row)).unwrap();
                for s in &simplices {
                    let d = round_with(&g, s, rule).unwrap();
                    let report = lemma1_check_with(empty, &inst, &g, s, &d).unwrap();
                    if report.violations.iter().any(|v| !excused(&g, s, &d, v)) {
                        return Some((row, s.clone()));
                    }
                }
            }
        }
        None
    }

    #[test]
    fn no_small_counterexample() {
        for parts in [2, 3, 4] {
            let found =
                first_violation(BoundaryRule::Verbatim, EmptyBundleRule::HiddenPair, parts, 5, |_, _, _, _| false);
            assert_eq!(found, None, "{parts} bundles");
        }
    }

    #[test]
    fn zero_rule_fails_only_at_hidden_pairs() {
        let found = first_violation(BoundaryRule::Verbatim, EmptyBundleRule::Zero, 3, 5, |_, _, _, _| false);
        assert!(found.is_some());
        for parts in [2, 3, 4] {
            let found = first_violation(BoundaryRule::Verbatim, EmptyBundleRule::Zero, parts, 5, is_hidden_pair_gap);
            assert_eq!(found, None, "{parts} bundles");
        }
    }

    #[test]
    fn zero_rule_counterexample() {
        let g = HalfGrid::new(3, 3).unwrap();
        let s = g.simplex_from_vertices(vec![kv(&[1, 4]), kv(&[2, 4]), kv(&[2, 5])]).unwrap();
        let d = round(&g, &s).unwrap();
        assert_eq!(d.bundles(), &[Interval::EMPTY, iv(1, 2), iv(3, 3)]);
        let inst = Instance::additive_ints(&[vec![1, 1, 0]]).unwrap();
        let report = lemma1_check_with(EmptyBundleRule::Zero, &inst, &g, &s, &d).unwrap();
        assert_eq!(
            report.violations,
            vec![SandwichViolation { agent: 0, bundle: 1, vertex: 1, case: 6, bound: Bound::Lower }]
        );
        assert!(is_hidden_pair_gap(&g, &s, &d, &report.violations[0]));
        assert!(lemma1_check(&inst, &g, &s, &d).unwrap().holds());
    }

    fn sandwich_holds(rule: BoundaryRule, row: Vec<i64>, vertices: &[&[u32]]) -> bool {
        let g = HalfGrid::new(row.len(), vertices[0].len() + 1).unwrap();
        let s = g.simplex_from_vertices(vertices.iter().map(|v| kv(v)).collect()).unwrap();
        let inst = Instance::additive_ints(&[row]).unwrap();
        lemma1_check(&inst, &g, &s, &round_with(&g, &s, rule).unwrap()).unwrap().holds()
    }

    #[test]
    fn dropping_the_knife_clause_breaks_the_sandwich() {
        let chain: &[&[u32]] = &[&[2, 5], &[3, 5], &[3, 6]];
        assert!(sandwich_holds(BoundaryRule::Verbatim, vec![0, 1, 1], chain));
        assert!(!sandwich_holds(BoundaryRule::DropKnifeClause, vec![0, 1, 1], chain));
    }

    #[test]
    fn skipping_the_second_condition_breaks_the_sandwich() {
        let chain: &[&[u32]] = &[&[2, 5], &[2, 6], &[3, 6]];
        assert!(sandwich_holds(BoundaryRule::Verbatim, vec![1, 0, 1], chain));
        assert!(!sandwich_holds(BoundaryRule::SkipSecondCondition, vec![1, 0, 1], chain));
    }
}

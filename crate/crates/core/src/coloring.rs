//! Virtual valuations and the colorings they induce on the knife simplex.
//!
//! Agents judge a bundle of a partial division pessimistically on its left
//! boundary item and optimistically on its right one. The left exterior bundle
//! counts exactly its visible items, the right exterior bundle never counts
//! its left boundary item.

use std::collections::HashMap;
use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::instance::{Instance, Interval};
use crate::rational::Value;
use crate::simplex::{HalfGrid, KnifeVector};

/// Largest number of bundles a [`ColorSet`] can index.
pub const MAX_PARTS: usize = 64;

/// A set of bundle indices (zero-based).
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct ColorSet(u64);

impl ColorSet {
    pub const EMPTY: ColorSet = ColorSet(0);

    pub fn from_bits(bits: u64) -> ColorSet {
        ColorSet(bits)
    }

    pub fn bits(&self) -> u64 {
        self.0
    }

    pub fn insert(&mut self, color: usize) {
        self.0 |= 1 << color;
    }

    pub fn contains(&self, color: usize) -> bool {
        color < MAX_PARTS && self.0 & (1 << color) != 0
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    /// Smallest color in the set.
    pub fn first(&self) -> Option<usize> {
        (self.0 != 0).then(|| self.0.trailing_zeros() as usize)
    }

    pub fn union(self, other: ColorSet) -> ColorSet {
        ColorSet(self.0 | other.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..MAX_PARTS).filter(|&c| self.contains(c))
    }
}

impl FromIterator<usize> for ColorSet {
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> ColorSet {
        let mut set = ColorSet::EMPTY;
        iter.into_iter().for_each(|c| set.insert(c));
        set
    }
}

impl fmt::Debug for ColorSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl Serialize for ColorSet {
    /// One-based bundle numbers.
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.iter().map(|c| c + 1))
    }
}

/// How an interior bundle that is empty at a vertex is valued and colored.
///
/// Interior bundles vanish from a partial division for two reasons: the
/// knives are at most half a step apart, or they sit exactly on two adjacent
/// items. In the second case rounding may still hand the bundle both hidden
/// items.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum EmptyBundleRule {
    /// Every empty bundle is worth 0 and is never chosen.
    Zero,
    /// A bundle emptied by two adjacent hidden items is worth `v^-` of that
    /// pair and may be chosen. Other empty bundles are treated as in `Zero`.
    #[default]
    HiddenPair,
}

/// The two items hidden by the knives around an empty interior bundle, if
/// the knives are one full step apart.
pub fn hidden_pair(grid: &HalfGrid, x: &KnifeVector, b: usize) -> Option<Interval> {
    if b == 0 || b + 1 >= grid.parts() || !grid.bundle(x, b).is_empty() {
        return None;
    }
    let (left, right) = grid.boundary_items(x, b);
    (left < right).then(|| Interval::new(left, right))
}

/// Agent `agent`'s virtual value of bundle `b` at vertex `x`, under the default rule.
pub fn virtual_value<'a>(inst: &'a Instance, grid: &HalfGrid, agent: usize, x: &KnifeVector, b: usize) -> &'a Value {
    virtual_value_with(EmptyBundleRule::default(), inst, grid, agent, x, b)
}

pub fn virtual_value_with<'a>(
    rule: EmptyBundleRule,
    inst: &'a Instance,
    grid: &HalfGrid,
    agent: usize,
    x: &KnifeVector,
    b: usize,
) -> &'a Value {
    let parts = grid.parts();
    let bundle = grid.bundle(x, b);
    if b == 0 {
        return inst.value(agent, bundle);
    }
    if bundle.is_empty() {
        return match (rule, hidden_pair(grid, x, b)) {
            (EmptyBundleRule::HiddenPair, Some(pair)) => inst.up_to_one_value(agent, pair),
            _ => inst.value(agent, bundle),
        };
    }
    let (left, right) = grid.boundary_items(x, b);
    if b == parts - 1 {
        return inst.value(agent, bundle.without_end(left));
    }
    match (bundle.contains(left), bundle.contains(right)) {
        (false, false) => inst.up_to_one_value(agent, bundle.hull_with(left).hull_with(right)),
        (true, true) => inst.value(agent, bundle.without_end(left)),
        (true, false) => inst.up_to_one_value(agent, bundle.hull_with(right)),
        (false, true) => inst.value(agent, bundle),
    }
}

/// Bundles an agent may choose at `x`.
fn choosable(rule: EmptyBundleRule, grid: &HalfGrid, x: &KnifeVector, b: usize) -> bool {
    !grid.bundle(x, b).is_empty() || (rule == EmptyBundleRule::HiddenPair && hidden_pair(grid, x, b).is_some())
}

/// The choosable bundles of maximum virtual value at `x`, under the default rule.
///
/// Empty only if every bundle at `x` is empty, which needs fewer items than bundles.
pub fn agent_coloring(inst: &Instance, grid: &HalfGrid, agent: usize, x: &KnifeVector) -> ColorSet {
    agent_coloring_with(EmptyBundleRule::default(), inst, grid, agent, x)
}

pub fn agent_coloring_with(
    rule: EmptyBundleRule,
    inst: &Instance,
    grid: &HalfGrid,
    agent: usize,
    x: &KnifeVector,
) -> ColorSet {
    let mut best: Option<&Value> = None;
    let mut colors = ColorSet::EMPTY;
    for b in (0..grid.parts()).filter(|&b| choosable(rule, grid, x, b)) {
        let v = virtual_value_with(rule, inst, grid, agent, x, b);
        match best {
            Some(cur) if v < cur => {}
            Some(cur) if v == cur => colors.insert(b),
            _ => {
                best = Some(v);
                colors = ColorSet::EMPTY;
                colors.insert(b);
            }
        }
    }
    colors
}

/// The owner's coloring at `x`, reduced to its smallest bundle index.
pub fn aggregated_color(inst: &Instance, grid: &HalfGrid, x: &KnifeVector) -> Option<usize> {
    aggregated_color_with(EmptyBundleRule::default(), inst, grid, x)
}

pub fn aggregated_color_with(
    rule: EmptyBundleRule,
    inst: &Instance,
    grid: &HalfGrid,
    x: &KnifeVector,
) -> Option<usize> {
    agent_coloring_with(rule, inst, grid, grid.owner_label(x), x).first()
}

/// Colorings of a fixed set of agents at every vertex of the triangulation.
pub struct ColorTable {
    agents: Vec<usize>,
    slot_of: Vec<Option<usize>>,
    rows: HashMap<KnifeVector, Vec<ColorSet>>,
}

impl ColorTable {
    /// Only the listed agents' valuations are ever read.
    pub fn build(
        inst: &Instance,
        grid: &HalfGrid,
        agents: &[usize],
        rule: EmptyBundleRule,
        parallel: bool,
    ) -> ColorTable {
        let vertices: Vec<KnifeVector> = grid.vertices().collect();
        let row =
            |x: &KnifeVector| agents.iter().map(|&a| agent_coloring_with(rule, inst, grid, a, x)).collect::<Vec<_>>();
        let rows: Vec<Vec<ColorSet>> =
            if parallel { vertices.par_iter().map(row).collect() } else { vertices.iter().map(row).collect() };
        let mut slot_of = vec![None; inst.agents()];
        for (slot, &a) in agents.iter().enumerate() {
            slot_of[a] = Some(slot);
        }
        ColorTable { agents: agents.to_vec(), slot_of, rows: vertices.into_iter().zip(rows).collect() }
    }

    pub fn agents(&self) -> &[usize] {
        &self.agents
    }

    /// Panics if `agent` was not part of the table or `x` is not a vertex.
    pub fn get(&self, agent: usize, x: &KnifeVector) -> ColorSet {
        let slot = self.slot_of[agent].expect("agent not colored in this table");
        self.rows[x][slot]
    }
}

/// What a coloring must avoid at a vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Properness {
    /// A bundle with no fully visible item.
    EmptyBundle,
    /// A bundle whose two knives coincide.
    ZeroLength,
}

impl Properness {
    fn forbids(&self, grid: &HalfGrid, x: &KnifeVector, b: usize) -> bool {
        match self {
            Properness::EmptyBundle => grid.bundle(x, b).is_empty(),
            Properness::ZeroLength => {
                let k = x.doubled();
                let left = if b == 0 { 1 } else { k[b - 1] };
                let right = if b + 1 == grid.parts() { grid.top() } else { k[b] };
                left == right
            }
        }
    }
}

/// A color naming a bundle the properness notion forbids at the vertex.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PropernessViolation {
    pub vertex: KnifeVector,
    pub agent: usize,
    pub color: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct PropernessReport {
    pub vertices_checked: usize,
    pub violations: Vec<PropernessViolation>,
}

impl PropernessReport {
    pub fn is_proper(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Sweeps every vertex and agent.
pub fn check_properness(
    inst: &Instance,
    grid: &HalfGrid,
    rule: EmptyBundleRule,
    notion: Properness,
) -> PropernessReport {
    check_properness_with(grid, inst.agents(), notion, |agent, x| agent_coloring_with(rule, inst, grid, agent, x))
}

/// [`check_properness`] for an arbitrary coloring.
pub fn check_properness_with<F>(grid: &HalfGrid, agents: usize, notion: Properness, coloring: F) -> PropernessReport
where
    F: Fn(usize, &KnifeVector) -> ColorSet,
{
    let mut report = PropernessReport::default();
    for x in grid.vertices() {
        report.vertices_checked += 1;
        for agent in 0..agents {
            for color in coloring(agent, &x).iter() {
                if color >= grid.parts() || notion.forbids(grid, &x, color) {
                    report.violations.push(PropernessViolation { vertex: x.clone(), agent, color });
                }
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::Interval;
    use crate::rational::int;

    fn kv(v: &[u32]) -> KnifeVector {
        KnifeVector::from_doubled(v.to_vec())
    }

    fn worked() -> (Instance, HalfGrid, KnifeVector) {
        // distinct powers of two make every bundle value identify its item set
        let row: Vec<i64> = (0..12).map(|k| 1 << k).collect();
        (Instance::additive_ints(&[row]).unwrap(), HalfGrid::new(12, 5).unwrap(), kv(&[6, 9, 16, 21]))
    }

    #[test]
    fn case_table_on_worked_vertex() {
        let (inst, g, x) = worked();
        // bundle 3 = {5,6,7}, left item 5 visible, right boundary 8 hidden
        let expect3 = inst.up_to_one_value(0, Interval::new(5, 8)).clone();
        assert_eq!(virtual_value(&inst, &g, 0, &x, 2), &expect3);
        // last bundle {11,12} drops its left item 11
        assert_eq!(virtual_value(&inst, &g, 0, &x, 4), inst.value(0, Interval::singleton(12)));
        assert_eq!(virtual_value(&inst, &g, 0, &x, 0), inst.value(0, Interval::new(1, 2)));
        // bundle 2 = {4}: left boundary 3 hidden, right boundary 4 visible
        assert_eq!(virtual_value(&inst, &g, 0, &x, 1), inst.value(0, Interval::singleton(4)));
        // bundle 4 = {9,10}: left boundary 8 hidden, right boundary 10 visible
        assert_eq!(virtual_value(&inst, &g, 0, &x, 3), inst.value(0, Interval::new(9, 10)));
    }

    #[test]
    fn remaining_interior_cases() {
        let row: Vec<i64> = (0..6).map(|k| 1 << k).collect();
        let inst = Instance::additive_ints(&[row]).unwrap();
        let g = HalfGrid::new(6, 3).unwrap();
        // knives 2 and 5: bundle 2 = {3,4}, both boundaries hidden -> v^-({2..5})
        let x = kv(&[4, 10]);
        assert_eq!(g.bundle(&x, 1), Interval::new(3, 4));
        assert_eq!(virtual_value(&inst, &g, 0, &x, 1), inst.up_to_one_value(0, Interval::new(2, 5)));
        // knives 3/2 and 9/2: bundle 2 = {2,3,4}, both boundaries visible -> v({3,4})
        let x = kv(&[3, 9]);
        assert_eq!(virtual_value(&inst, &g, 0, &x, 1), inst.value(0, Interval::new(3, 4)));
        // empty interior bundle, knives half a step apart
        let x = kv(&[4, 5]);
        assert_eq!(virtual_value(&inst, &g, 0, &x, 1), &int(0));
        assert_eq!(virtual_value_with(EmptyBundleRule::Zero, &inst, &g, 0, &x, 1), &int(0));
    }

    #[test]
    fn empty_bundle_between_two_hidden_items() {
        let inst = Instance::additive_ints(&[vec![0, 1, 1]]).unwrap();
        let g = HalfGrid::new(3, 3).unwrap();
        // knives on items 1 and 2
        let x = kv(&[2, 4]);
        assert_eq!(g.bundle(&x, 1), Interval::EMPTY);
        assert_eq!(hidden_pair(&g, &x, 1), Some(Interval::new(1, 2)));
        assert_eq!(virtual_value_with(EmptyBundleRule::Zero, &inst, &g, 0, &x, 1), &int(0));
        assert_eq!(virtual_value(&inst, &g, 0, &x, 1), &int(0));
        let inst = Instance::additive_ints(&[vec![2, 3, 1]]).unwrap();
        assert_eq!(virtual_value(&inst, &g, 0, &x, 1), &int(2));
        // bundle 3 = {3} keeps item 3 since its left boundary item is 2; bundle 1 is empty
        assert_eq!(agent_coloring(&inst, &g, 0, &x), [1].into_iter().collect());
        assert_eq!(agent_coloring_with(EmptyBundleRule::Zero, &inst, &g, 0, &x), [2].into_iter().collect());
        assert_eq!(hidden_pair(&g, &kv(&[2, 3]), 1), None);
        assert_eq!(hidden_pair(&g, &kv(&[3, 5]), 1), None);
    }

    #[test]
    fn all_zero_agent_colors_every_nonempty_bundle() {
        let inst = Instance::additive_ints(&[vec![0; 4], vec![0; 4], vec![0; 4]]).unwrap();
        let g = HalfGrid::new(4, 3).unwrap();
        let x = kv(&[1, 6]);
        assert_eq!(agent_coloring(&inst, &g, 0, &x), [1, 2].into_iter().collect());
        let x = kv(&[3, 6]);
        assert_eq!(aggregated_color(&inst, &g, &x), Some(0));
    }

    #[test]
    fn two_agent_small_coloring() {
        let inst = Instance::additive_ints(&[vec![1, 1], vec![1, 1]]).unwrap();
        let g = HalfGrid::new(2, 2).unwrap();
        assert_eq!(agent_coloring(&inst, &g, 0, &kv(&[1])), [1].into_iter().collect());
    }

    #[test]
    fn injected_bad_coloring_is_caught() {
        let inst = Instance::additive_ints(&[vec![2, 1]]).unwrap();
        let g = HalfGrid::new(2, 2).unwrap();
        assert!(check_properness(&inst, &g, EmptyBundleRule::default(), Properness::EmptyBundle).is_proper());
        let faulty = |agent: usize, x: &KnifeVector| {
            if x == &kv(&[1]) {
                [0].into_iter().collect()
            } else {
                agent_coloring(&inst, &g, agent, x)
            }
        };
        let report = check_properness_with(&g, 1, Properness::EmptyBundle, faulty);
        assert_eq!(report.violations, vec![PropernessViolation { vertex: kv(&[1]), agent: 0, color: 0 }]);
        assert_eq!(report.vertices_checked, 5);
    }

    #[test]
    fn color_table_matches_direct_evaluation() {
        let inst = Instance::additive_ints(&[vec![3, 0, 2, 1], vec![1, 1, 1, 1], vec![0, 5, 0, 0]]).unwrap();
        let g = HalfGrid::new(4, 3).unwrap();
        let table = ColorTable::build(&inst, &g, &[0, 2], EmptyBundleRule::default(), true);
        for x in g.vertices() {
            assert_eq!(table.get(0, &x), agent_coloring(&inst, &g, 0, &x));
            assert_eq!(table.get(2, &x), agent_coloring(&inst, &g, 2, &x));
        }
    }
}

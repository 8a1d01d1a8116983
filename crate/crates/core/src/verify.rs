//! Certificates for EF1_outer divisions and a brute-force oracle.
//!
//! Agent `i` is happy with bundle `b` when `v_i(I_b) >= max_j v_i^-(I_j)`, so
//! every question here reduces to a perfect matching in the agent/bundle
//! graph of happy pairs, possibly with one agent or one bundle removed.

use std::fmt;

use rayon::prelude::*;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::instance::{Instance, Interval};
use crate::matching::{max_bipartite_matching, BipartiteGraph};
use crate::rational::Value;
use crate::rounding::Division;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Plain,
    /// The agent whose valuation is never consulted.
    Secretive(usize),
    /// One agent more than there are bundles.
    Extra,
}

impl Mode {
    /// Bundles a division must have for an instance with `agents` agents.
    pub fn parts(&self, agents: usize) -> usize {
        match self {
            Mode::Extra => agents.saturating_sub(1),
            _ => agents,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Mode::Plain => "plain",
            Mode::Secretive(_) => "secretive",
            Mode::Extra => "extra",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Secretive(a) => write!(f, "secretive (agent {})", a + 1),
            m => f.write_str(m.name()),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VerifyError {
    #[error("{mode} mode needs a division into {expected} bundles, got {found}")]
    BundleCount { mode: Mode, expected: usize, found: usize },
    #[error("division covers {found} items but the instance has {expected}")]
    ItemCount { expected: usize, found: usize },
    #[error("agent {agent} is out of range for {agents} agents")]
    AgentOutOfRange { agent: usize, agents: usize },
    #[error("extra mode needs at least two agents")]
    TooFewAgents,
    #[error("no division at all satisfies {mode}; the existence theorem is contradicted")]
    NoFeasibleDivision { mode: Mode },
}

/// Partial map from agents to bundles. Agents left out map to `None`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Assignment {
    bundle_of: Vec<Option<usize>>,
}

impl Assignment {
    pub fn new(bundle_of: Vec<Option<usize>>) -> Assignment {
        Assignment { bundle_of }
    }

    /// Every agent assigned, agent `i` to `bundles[i]`.
    pub fn total(bundles: Vec<usize>) -> Assignment {
        Assignment { bundle_of: bundles.into_iter().map(Some).collect() }
    }

    pub fn identity(agents: usize) -> Assignment {
        Assignment::total((0..agents).collect())
    }

    pub fn bundle_of(&self, agent: usize) -> Option<usize> {
        self.bundle_of.get(agent).copied().flatten()
    }

    pub fn agents(&self) -> usize {
        self.bundle_of.len()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.bundle_of.iter().enumerate().filter_map(|(a, b)| b.map(|b| (a, b)))
    }

    /// True when exactly the agents outside `absent_agent` are assigned, to
    /// pairwise distinct bundles below `parts` other than `absent_bundle`.
    pub fn is_bijection(&self, parts: usize, absent_agent: Option<usize>, absent_bundle: Option<usize>) -> bool {
        let mut used = vec![false; parts];
        for (agent, slot) in self.bundle_of.iter().enumerate() {
            match (*slot, Some(agent) == absent_agent) {
                (None, true) => {}
                (Some(b), false) if b < parts && Some(b) != absent_bundle && !used[b] => used[b] = true,
                _ => return false,
            }
        }
        let expected = parts - usize::from(absent_bundle.is_some_and(|b| b < parts));
        used.iter().filter(|&&u| u).count() == expected
    }
}

impl fmt::Debug for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.bundle_of.iter().map(|b| b.map(|b| b + 1))).finish()
    }
}

impl Serialize for Assignment {
    /// One-based bundle per agent, `null` for agents left out.
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.bundle_of.iter().map(|b| b.map(|b| b + 1)))
    }
}

fn check_shape(inst: &Instance, div: &Division, mode: Mode) -> Result<(), VerifyError> {
    if mode == Mode::Extra && inst.agents() < 2 {
        return Err(VerifyError::TooFewAgents);
    }
    if let Mode::Secretive(agent) = mode {
        if agent >= inst.agents() {
            return Err(VerifyError::AgentOutOfRange { agent, agents: inst.agents() });
        }
    }
    let expected = mode.parts(inst.agents());
    if div.parts() != expected {
        return Err(VerifyError::BundleCount { mode, expected, found: div.parts() });
    }
    let found = div.bundles().iter().filter_map(Interval::bounds).map(|(_, hi)| hi).max().unwrap_or(0);
    if found != inst.items() {
        return Err(VerifyError::ItemCount { expected: inst.items(), found });
    }
    Ok(())
}

/// `max_j v^-(I_j)`: the value agent `agent` must reach to envy nobody up to one item.
pub fn threshold<'a>(inst: &'a Instance, div: &Division, agent: usize) -> &'a Value {
    div.bundles().iter().map(|&b| inst.up_to_one_value(agent, b)).max().expect("a division has at least one bundle")
}

/// Agent/bundle graph of happy pairs, over the listed agents only.
fn happy_graph(inst: &Instance, div: &Division, agents: &[usize]) -> BipartiteGraph {
    let mut g = BipartiteGraph::new(inst.agents(), div.parts());
    for &agent in agents {
        let t = threshold(inst, div, agent);
        for (b, &bundle) in div.bundles().iter().enumerate() {
            if inst.value(agent, bundle) >= t {
                g.add_edge(agent, b);
            }
        }
    }
    g
}

/// `v_i(I_{π(i)}) >= v_i^-(I_{π(j)})` for all agents `i, j`.
pub fn is_ef1_outer(inst: &Instance, div: &Division, pi: &Assignment) -> Result<bool, VerifyError> {
    check_shape(inst, div, Mode::Plain)?;
    Ok(pi.agents() == inst.agents() && pi.is_bijection(div.parts(), None, None) && all_happy(inst, div, pi))
}

fn all_happy(inst: &Instance, div: &Division, pi: &Assignment) -> bool {
    pi.pairs().all(|(agent, b)| inst.value(agent, div.bundles()[b]) >= threshold(inst, div, agent))
}

fn perfect_assignment(
    inst: &Instance,
    div: &Division,
    absent_agent: Option<usize>,
    absent_bundle: Option<usize>,
) -> Option<Assignment> {
    let agents: Vec<usize> = (0..inst.agents()).filter(|&a| Some(a) != absent_agent).collect();
    let g = happy_graph(inst, div, &agents).restrict(|_| true, |b| Some(b) != absent_bundle);
    let m = max_bipartite_matching(&g);
    let wanted = div.parts() - usize::from(absent_bundle.is_some());
    (m.size() == agents.len() && m.size() == wanted).then(|| Assignment::new(m.partner))
}

/// An EF1_outer permutation for `div`, if one exists.
pub fn find_ef1_outer_assignment(inst: &Instance, div: &Division) -> Result<Option<Assignment>, VerifyError> {
    check_shape(inst, div, Mode::Plain)?;
    Ok(perfect_assignment(inst, div, None, None))
}

/// Tries all `n!` permutations. Only for cross-checking at small `n`.
pub fn find_ef1_outer_assignment_by_permutations(
    inst: &Instance,
    div: &Division,
) -> Result<Option<Assignment>, VerifyError> {
    check_shape(inst, div, Mode::Plain)?;
    let n = inst.agents();
    let mut perm: Vec<usize> = (0..n).collect();
    let ok = |perm: &[usize]| {
        (0..n).all(|i| {
            let mine = inst.value(i, div.bundles()[perm[i]]);
            (0..n).all(|j| mine >= inst.up_to_one_value(i, div.bundles()[perm[j]]))
        })
    };
    Ok(first_permutation(&mut perm, 0, &ok).then(|| Assignment::total(perm)))
}

fn first_permutation(perm: &mut [usize], k: usize, ok: &impl Fn(&[usize]) -> bool) -> bool {
    if k == perm.len() {
        return ok(perm);
    }
    for i in k..perm.len() {
        perm.swap(k, i);
        if first_permutation(perm, k + 1, ok) {
            return true;
        }
        perm.swap(k, i);
    }
    false
}

/// One assignment per possible pick of the secretive agent, indexed by that pick.
pub fn secretive_witness(
    inst: &Instance,
    div: &Division,
    secret: usize,
) -> Result<Option<Vec<Assignment>>, VerifyError> {
    check_shape(inst, div, Mode::Secretive(secret))?;
    Ok((0..div.parts()).map(|pick| perfect_assignment(inst, div, Some(secret), Some(pick))).collect())
}

pub fn is_secretive_division(inst: &Instance, div: &Division, secret: usize) -> Result<bool, VerifyError> {
    secretive_witness(inst, div, secret).map(|w| w.is_some())
}

/// One assignment per agent who may leave, indexed by that agent.
pub fn extra_witness(inst: &Instance, div: &Division) -> Result<Option<Vec<Assignment>>, VerifyError> {
    check_shape(inst, div, Mode::Extra)?;
    Ok((0..inst.agents()).map(|gone| perfect_assignment(inst, div, Some(gone), None)).collect())
}

pub fn is_extra_division(inst: &Instance, div: &Division) -> Result<bool, VerifyError> {
    extra_witness(inst, div).map(|w| w.is_some())
}

/// Checks a family of assignments produced elsewhere, one per removed bundle
/// (secretive) or removed agent (extra), or a single permutation (plain).
pub fn check_witness(inst: &Instance, div: &Division, mode: Mode, witness: &[Assignment]) -> Result<bool, VerifyError> {
    check_shape(inst, div, mode)?;
    let parts = div.parts();
    let fits = |pi: &Assignment, agent: Option<usize>, bundle: Option<usize>| {
        pi.agents() == inst.agents() && pi.is_bijection(parts, agent, bundle) && all_happy(inst, div, pi)
    };
    Ok(match mode {
        Mode::Plain => witness.len() == 1 && fits(&witness[0], None, None),
        Mode::Secretive(secret) => {
            witness.len() == parts && witness.iter().enumerate().all(|(pick, pi)| fits(pi, Some(secret), Some(pick)))
        }
        Mode::Extra => {
            witness.len() == inst.agents() && witness.iter().enumerate().all(|(gone, pi)| fits(pi, Some(gone), None))
        }
    })
}

/// Whether `div` qualifies under `mode`, with the witnesses if so.
pub fn certify(inst: &Instance, div: &Division, mode: Mode) -> Result<Option<Vec<Assignment>>, VerifyError> {
    match mode {
        Mode::Plain => find_ef1_outer_assignment(inst, div).map(|a| a.map(|a| vec![a])),
        Mode::Secretive(secret) => secretive_witness(inst, div, secret),
        Mode::Extra => extra_witness(inst, div),
    }
}

/// All ordered partitions of `1..=items` into `parts` possibly empty
/// intervals, ordered lexicographically by bundle sizes.
pub fn enumerate_divisions(parts: usize, items: usize) -> impl Iterator<Item = Division> {
    let mut sizes = if parts == 0 || items == 0 {
        None
    } else {
        let mut first = vec![0; parts];
        first[parts - 1] = items;
        Some(first)
    };
    std::iter::from_fn(move || {
        let current = sizes.take()?;
        sizes = next_composition(&current);
        let mut lo = 1;
        let bundles = current
            .iter()
            .map(|&len| {
                let bundle = Interval::new(lo, lo + len - 1);
                lo += len;
                bundle
            })
            .collect();
        Some(Division::new(bundles, items).expect("compositions are partitions"))
    })
}

/// The next composition in lexicographic order, keeping the total.
fn next_composition(sizes: &[usize]) -> Option<Vec<usize>> {
    let last = sizes.len() - 1;
    // rightmost position before the tail that can grow by borrowing from the tail
    let k = (0..last).rev().find(|&k| sizes[k + 1..].iter().any(|&s| s > 0))?;
    let mut next = sizes.to_vec();
    let tail: usize = sizes[k + 1..].iter().sum();
    next[k] += 1;
    next[k + 1..].iter_mut().for_each(|s| *s = 0);
    next[last] = tail - 1;
    Some(next)
}

/// `C(m+n-1, n-1)`.
pub fn division_count(parts: usize, items: usize) -> u128 {
    if parts == 0 {
        return 0;
    }
    let k = (parts - 1) as u128;
    let top = (items + parts - 1) as u128;
    (0..k).fold(1u128, |acc, i| acc * (top - i) / (i + 1))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OracleSummary {
    pub mode: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub secretive_agent: Option<usize>,
    pub divisions: usize,
    pub feasible: usize,
    pub first: Division,
    #[serde(skip)]
    pub feasible_set: Vec<Division>,
}

/// Checks every division. An empty feasible set is reported as an error.
pub fn oracle(inst: &Instance, mode: Mode) -> Result<OracleSummary, VerifyError> {
    let parts = mode.parts(inst.agents());
    let all: Vec<Division> = enumerate_divisions(parts, inst.items()).collect();
    if let Some(d) = all.first() {
        check_shape(inst, d, mode)?;
    }
    let verdicts: Vec<bool> =
        all.par_iter().map(|d| certify(inst, d, mode).map(|w| w.is_some())).collect::<Result<_, _>>()?;
    let feasible_set: Vec<Division> = all.iter().zip(&verdicts).filter(|(_, &ok)| ok).map(|(d, _)| d.clone()).collect();
    let first = feasible_set.first().cloned().ok_or(VerifyError::NoFeasibleDivision { mode })?;
    Ok(OracleSummary {
        mode: mode.name(),
        secretive_agent: match mode {
            Mode::Secretive(a) => Some(a + 1),
            _ => None,
        },
        divisions: all.len(),
        feasible: feasible_set.len(),
        first,
        feasible_set,
    })
}

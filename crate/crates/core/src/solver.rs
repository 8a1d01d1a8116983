//! Searching the triangulation for a simplex that certifies a division.
//!
//! The exhaustive engine walks simplices in canonical order (base vertex, then
//! step sequence) and returns the first one accepted, so results do not depend
//! on the thread count. The path-following engine applies to the plain mode
//! only. It climbs through the faces where the last knives rest at the right
//! end of the path, entering and leaving simplices through facets that carry
//! every color of the current face.

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::coloring::{agent_coloring_with, ColorSet, ColorTable, EmptyBundleRule};
use crate::instance::Instance;
use crate::matching::{max_bipartite_matching, BipartiteGraph};
use crate::simplex::{ElementarySimplex, GeometryError, HalfGrid, KnifeVector};
use crate::verify::{Assignment, Mode};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Engine {
    #[default]
    Exhaustive,
    Pathfollow,
}

/// Receives trace events; called from one thread at a time.
pub type Tracer = Arc<dyn Fn(&TraceEvent) + Send + Sync>;

#[derive(Clone, Default)]
pub struct SearchOptions {
    pub engine: Engine,
    /// `None` uses rayon's global pool, `Some(1)` runs on the calling thread.
    pub threads: Option<usize>,
    pub rule: EmptyBundleRule,
    pub trace_simplices: Option<Tracer>,
    pub trace_colors: Option<Tracer>,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    Simplex {
        index: u64,
        vertices: Vec<KnifeVector>,
        accepted: bool,
    },
    /// Plain mode: the owner's coloring and the color kept.
    Color {
        vertex: KnifeVector,
        owner: usize,
        colors: ColorSet,
        chosen: usize,
    },
    /// Matching modes: one agent's full coloring.
    Coloring {
        vertex: KnifeVector,
        agent: usize,
        colors: ColorSet,
    },
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("the search needs at least as many items ({items}) as bundles ({parts})")]
    TooFewItems { items: usize, parts: usize },
    #[error("extra mode needs at least two agents")]
    TooFewAgents,
    #[error("secretive agent {agent} is out of range for {agents} agents")]
    AgentOutOfRange { agent: usize, agents: usize },
    #[error("the path-following engine supports the plain mode only")]
    EngineUnsupported,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("thread pool: {0}")]
    ThreadPool(String),
    #[error("{mode} search found no acceptable simplex; the existence theorem is contradicted")]
    TheoremViolation { mode: Mode, dump: String },
    #[error("internal error: {0}")]
    Internal(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum Witness {
    /// Agent to bundle, via the owners of the simplex's vertices.
    Plain(Assignment),
    /// Entry `j` assigns everyone but the secretive agent, avoiding bundle `j`.
    Secretive(Vec<Assignment>),
    /// Entry `i` assigns everyone but agent `i`.
    Extra(Vec<Assignment>),
}

impl Witness {
    pub fn assignments(&self) -> &[Assignment] {
        match self {
            Witness::Plain(a) => std::slice::from_ref(a),
            Witness::Secretive(v) | Witness::Extra(v) => v,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub simplex: ElementarySimplex,
    pub witness: Witness,
    /// Simplices examined: canonical position plus one for the exhaustive
    /// engine, rooms visited for path following.
    pub scanned: u64,
    /// Position in canonical order, exhaustive engine only.
    pub index: Option<u64>,
}

/// The grid a search for `mode` runs on.
pub fn grid_for(inst: &Instance, mode: Mode) -> Result<HalfGrid, SolveError> {
    let parts = match mode {
        Mode::Extra if inst.agents() < 2 => return Err(SolveError::TooFewAgents),
        Mode::Secretive(agent) if agent >= inst.agents() => {
            return Err(SolveError::AgentOutOfRange { agent, agents: inst.agents() })
        }
        m => m.parts(inst.agents()),
    };
    if inst.items() < parts {
        return Err(SolveError::TooFewItems { items: inst.items(), parts });
    }
    Ok(HalfGrid::new(inst.items(), parts)?)
}

pub fn search(inst: &Instance, mode: Mode, opts: &SearchOptions) -> Result<SearchOutcome, SolveError> {
    let grid = grid_for(inst, mode)?;
    if opts.engine == Engine::Pathfollow && mode != Mode::Plain {
        return Err(SolveError::EngineUnsupported);
    }
    let run = || match opts.engine {
        Engine::Exhaustive => exhaustive(inst, &grid, mode, opts),
        Engine::Pathfollow => pathfollow(inst, &grid, opts),
    };
    match opts.threads {
        Some(t) if t > 1 => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| SolveError::ThreadPool(e.to_string()))?
            .install(run),
        _ => run(),
    }
}

pub fn find_plain(inst: &Instance) -> Result<SearchOutcome, SolveError> {
    search(inst, Mode::Plain, &SearchOptions::default())
}

/// Never reads the valuation of `secret`.
pub fn find_secretive(inst: &Instance, secret: usize) -> Result<SearchOutcome, SolveError> {
    search(inst, Mode::Secretive(secret), &SearchOptions::default())
}

/// `inst` has one agent more than the number of bundles.
pub fn find_extra(inst: &Instance) -> Result<SearchOutcome, SolveError> {
    search(inst, Mode::Extra, &SearchOptions::default())
}

fn colored_agents(inst: &Instance, mode: Mode) -> Vec<usize> {
    (0..inst.agents()).filter(|&a| mode != Mode::Secretive(a)).collect()
}

fn exhaustive(inst: &Instance, grid: &HalfGrid, mode: Mode, opts: &SearchOptions) -> Result<SearchOutcome, SolveError> {
    let parallel = opts.threads != Some(1) && opts.trace_simplices.is_none();
    let agents = colored_agents(inst, mode);
    let table = ColorTable::build(inst, grid, &agents, opts.rule, parallel);
    if let Some(trace) = &opts.trace_colors {
        trace_table(grid, &table, mode, trace);
    }
    let accept = |s: &ElementarySimplex| match mode {
        Mode::Plain => plain_witness(grid, &table, s),
        Mode::Secretive(secret) => secretive_witness(grid, &table, s, secret),
        Mode::Extra => extra_witness(&table, s),
    };
    let bases: Vec<KnifeVector> = grid.vertices().collect();
    let mut offset = 0u64;
    for chunk in bases.chunks(if parallel { 64 } else { 1 }) {
        let scan_base = |base: &KnifeVector| {
            let list = grid.simplices_at(base);
            let len = list.len() as u64;
            let hit = list.into_iter().enumerate().find_map(|(pos, s)| {
                let w = accept(&s);
                if let Some(trace) = &opts.trace_simplices {
                    let index = offset + pos as u64;
                    trace(&TraceEvent::Simplex { index, vertices: s.vertices().to_vec(), accepted: w.is_some() });
                }
                w.map(|w| (pos as u64, s, w))
            });
            (len, hit)
        };
        let results: Vec<_> =
            if parallel { chunk.par_iter().map(scan_base).collect() } else { chunk.iter().map(scan_base).collect() };
        for (len, hit) in results {
            if let Some((pos, simplex, witness)) = hit {
                let index = offset + pos;
                check_against_graph(&table, &simplex, &witness, mode)?;
                return Ok(SearchOutcome { simplex, witness, scanned: index + 1, index: Some(index) });
            }
            offset += len;
        }
    }
    Err(SolveError::TheoremViolation { mode, dump: dump(inst, grid, &table) })
}

fn trace_table(grid: &HalfGrid, table: &ColorTable, mode: Mode, trace: &Tracer) {
    for x in grid.vertices() {
        if mode == Mode::Plain {
            let owner = grid.owner_label(&x);
            let colors = table.get(owner, &x);
            if let Some(chosen) = colors.first() {
                trace(&TraceEvent::Color { vertex: x.clone(), owner, colors, chosen });
            }
        } else {
            for &agent in table.agents() {
                trace(&TraceEvent::Coloring { vertex: x.clone(), agent, colors: table.get(agent, &x) });
            }
        }
    }
}

fn plain_witness(grid: &HalfGrid, table: &ColorTable, s: &ElementarySimplex) -> Option<Witness> {
    let n = grid.parts();
    let mut bundle_of = vec![None; n];
    let mut used = ColorSet::EMPTY;
    for x in s.vertices() {
        let owner = grid.owner_label(x);
        let color = table.get(owner, x).first()?;
        if used.contains(color) || bundle_of[owner].is_some() {
            return None;
        }
        used.insert(color);
        bundle_of[owner] = Some(color);
    }
    Some(Witness::Plain(Assignment::new(bundle_of)))
}

/// Union of each agent's colorings over the vertices of `s`, indexed by agent.
fn color_graph(table: &ColorTable, s: &ElementarySimplex, agents: usize, parts: usize) -> BipartiteGraph {
    let mut g = BipartiteGraph::new(agents, parts);
    for &agent in table.agents() {
        let union = s.vertices().iter().fold(ColorSet::EMPTY, |acc, x| acc.union(table.get(agent, x)));
        for c in union.iter() {
            g.add_edge(agent, c);
        }
    }
    g
}

fn secretive_witness(grid: &HalfGrid, table: &ColorTable, s: &ElementarySimplex, secret: usize) -> Option<Witness> {
    let n = grid.parts();
    let g = color_graph(table, s, n, n);
    // some agent whose only colors are j cannot be placed once j is gone
    let stuck = |j: usize| table.agents().iter().any(|&a| g.neighbours(a).iter().all(|&c| c == j));
    let mut family = Vec::with_capacity(n);
    for j in 0..n {
        if stuck(j) {
            return None;
        }
        let m = max_bipartite_matching(&g.restrict(|a| a != secret, |c| c != j));
        if m.size() != n - 1 {
            return None;
        }
        family.push(Assignment::new(m.partner));
    }
    Some(Witness::Secretive(family))
}

fn extra_witness(table: &ColorTable, s: &ElementarySimplex) -> Option<Witness> {
    let agents = table.agents().len();
    let parts = agents - 1;
    let g = color_graph(table, s, agents, parts);
    let mut single = vec![0usize; parts];
    for a in 0..agents {
        if let [c] = g.neighbours(a) {
            single[*c] += 1;
        }
    }
    // three agents pinned to one color leave a clash whoever departs
    if single.iter().any(|&k| k > 2) {
        return None;
    }
    let mut family = Vec::with_capacity(agents);
    for gone in 0..agents {
        let m = max_bipartite_matching(&g.restrict(|a| a != gone, |_| true));
        if m.size() != parts {
            return None;
        }
        family.push(Assignment::new(m.partner));
    }
    Some(Witness::Extra(family))
}

/// Every assigned pair must be an edge of the color graph of `s`.
fn check_against_graph(table: &ColorTable, s: &ElementarySimplex, w: &Witness, mode: Mode) -> Result<(), SolveError> {
    let parts = s.vertices().len();
    let g = color_graph(table, s, table.agents().len() + usize::from(matches!(mode, Mode::Secretive(_))), parts);
    for (k, pi) in w.assignments().iter().enumerate() {
        let (absent_agent, absent_bundle) = match mode {
            Mode::Plain => (None, None),
            Mode::Secretive(secret) => (Some(secret), Some(k)),
            Mode::Extra => (Some(k), None),
        };
        if !pi.is_bijection(parts, absent_agent, absent_bundle) || pi.pairs().any(|(a, c)| !g.has_edge(a, c)) {
            return Err(SolveError::Internal(format!("witness {k} {pi:?} does not fit the color graph")));
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct Dump<'a> {
    instance: serde_json::Value,
    colorings: Vec<DumpRow<'a>>,
}

#[derive(Serialize)]
struct DumpRow<'a> {
    vertex: &'a KnifeVector,
    agents: Vec<ColorSet>,
}

fn dump(inst: &Instance, grid: &HalfGrid, table: &ColorTable) -> String {
    let vertices: Vec<KnifeVector> = grid.vertices().collect();
    let colorings = vertices
        .iter()
        .map(|x| DumpRow { vertex: x, agents: table.agents().iter().map(|&a| table.get(a, x)).collect() })
        .collect();
    let instance = serde_json::from_str(&inst.to_json()).unwrap_or(serde_json::Value::Null);
    serde_json::to_string(&Dump { instance, colorings }).unwrap_or_default()
}

/// A simplex of the face where knives `level..` rest at the right end: a base
/// and an order of the first `level` knives.
#[derive(Clone, Debug)]
struct Room {
    base: Vec<u32>,
    perm: Vec<usize>,
}

impl Room {
    fn vertex(&self, t: usize) -> Vec<u32> {
        let mut v = self.base.clone();
        for &k in &self.perm[..t] {
            v[k] += 1;
        }
        v
    }

    fn level(&self) -> usize {
        self.perm.len()
    }
}

fn pathfollow(inst: &Instance, grid: &HalfGrid, opts: &SearchOptions) -> Result<SearchOutcome, SolveError> {
    let knives = grid.knives();
    let top = grid.top();
    let mut memo: HashMap<Vec<u32>, usize> = HashMap::new();
    let mut color = |v: &[u32]| -> Result<usize, SolveError> {
        if let Some(&c) = memo.get(v) {
            return Ok(c);
        }
        let x = KnifeVector::from_doubled(v.to_vec());
        let owner = grid.owner_label(&x);
        let colors = agent_coloring_with(opts.rule, inst, grid, owner, &x);
        let c = colors.first().ok_or_else(|| SolveError::Internal(format!("no color at {v:?}")))?;
        if let Some(trace) = &opts.trace_colors {
            trace(&TraceEvent::Color { vertex: x, owner, colors, chosen: c });
        }
        memo.insert(v.to_vec(), c);
        Ok(c)
    };
    let inside = |v: &[u32]| {
        v.first().is_none_or(|&f| f >= 1) && v.windows(2).all(|w| w[0] <= w[1]) && v.iter().all(|&c| c <= top)
    };

    let limit: u64 = (0..=knives as u32).map(|k| (2 * grid.items() as u64).pow(k)).sum::<u64>() * 2 + 4;
    let mut room = Room { base: vec![top; knives], perm: Vec::new() };
    // vertex of `room` opposite the facet we came in through, or `None` right after a descent
    let mut entered: Option<usize> = Some(0);
    let mut visited = 0u64;
    loop {
        visited += 1;
        if visited > limit {
            return Err(SolveError::Internal("path following did not terminate".into()));
        }
        let level = room.level();
        let colors: Vec<usize> = (0..=level).map(|t| color(&room.vertex(t))).collect::<Result<_, _>>()?;
        if let Some(trace) = &opts.trace_simplices {
            let vertices = (0..=level).map(|t| KnifeVector::from_doubled(room.vertex(t))).collect();
            let accepted = level == knives && is_rainbow(&colors);
            trace(&TraceEvent::Simplex { index: visited - 1, vertices, accepted });
        }
        let out = match entered {
            None => colors.iter().position(|&c| c == level),
            Some(_) if is_rainbow(&colors) => {
                if level == knives {
                    let simplex =
                        grid.simplex_from_steps(KnifeVector::from_doubled(room.base.clone()), room.perm.clone())?;
                    let bundle_of =
                        simplex.vertices().iter().zip(&colors).map(|(x, &c)| (grid.owner_label(x), c)).fold(
                            vec![None; grid.parts()],
                            |mut acc, (o, c)| {
                                acc[o] = Some(c);
                                acc
                            },
                        );
                    return Ok(SearchOutcome {
                        simplex,
                        witness: Witness::Plain(Assignment::new(bundle_of)),
                        scanned: visited,
                        index: None,
                    });
                }
                room.base[level] = top - 1;
                room.perm.insert(0, level);
                entered = Some(0);
                continue;
            }
            Some(e) => (0..=level).find(|&t| t != e && colors[t] == colors[e]),
        };
        let t = out.ok_or_else(|| SolveError::Internal(format!("no exit door at level {level}")))?;
        match pivot(&room, t, &inside) {
            Some((next, new_vertex)) => {
                room = next;
                entered = Some(new_vertex);
            }
            None => {
                if level <= 1 || t != 0 || room.perm[0] != level - 1 {
                    return Err(SolveError::Internal(format!("left the face at level {level} through vertex {t}")));
                }
                room.base[level - 1] += 1;
                room.perm.remove(0);
                entered = None;
            }
        }
    }
}

fn is_rainbow(colors: &[usize]) -> bool {
    let set: ColorSet = colors.iter().copied().collect();
    set.len() == colors.len() && colors.iter().all(|&c| c < colors.len())
}

/// The neighbour of `room` across the facet opposite vertex `t`, and the
/// index of its new vertex, unless that facet lies on the face boundary.
fn pivot(room: &Room, t: usize, inside: &impl Fn(&[u32]) -> bool) -> Option<(Room, usize)> {
    let d = room.level();
    let mut next = room.clone();
    let new_vertex = if t == 0 {
        let k = next.perm.remove(0);
        next.base[k] += 1;
        next.perm.push(k);
        d
    } else if t == d {
        let k = next.perm.pop().expect("level is positive");
        next.base[k] = next.base[k].checked_sub(1)?;
        next.perm.insert(0, k);
        0
    } else {
        next.perm.swap(t - 1, t);
        t
    };
    inside(&next.vertex(new_vertex)).then_some((next, new_vertex))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rounding::round;
    use crate::verify::{check_witness, is_ef1_outer};
    use proptest::prelude::*;

    fn sequential() -> SearchOptions {
        SearchOptions { threads: Some(1), ..SearchOptions::default() }
    }

    #[test]
    fn two_agents_two_items() {
        let inst = Instance::additive_ints(&[vec![1, 1], vec![1, 1]]).unwrap();
        let out = search(&inst, Mode::Plain, &sequential()).unwrap();
        let grid = grid_for(&inst, Mode::Plain).unwrap();
        // brute force over the 4 simplices: the first whose owners see both bundles
        let first = grid
            .simplices()
            .position(|s| {
                let colors: ColorSet =
                    s.vertices().iter().filter_map(|x| crate::coloring::aggregated_color(&inst, &grid, x)).collect();
                colors.len() == 2
            })
            .unwrap();
        assert_eq!(grid.simplex_count(), 4);
        assert_eq!(out.index, Some(first as u64));
        let d = round(&grid, &out.simplex).unwrap();
        let Witness::Plain(pi) = &out.witness else { panic!() };
        assert!(is_ef1_outer(&inst, &d, pi).unwrap());
    }

    #[test]
    fn single_agent_takes_everything() {
        let inst = Instance::additive_ints(&[vec![3, 1, 4]]).unwrap();
        let out = find_plain(&inst).unwrap();
        assert_eq!(out.simplex.vertices().len(), 1);
        assert_eq!(out.witness, Witness::Plain(Assignment::identity(1)));
    }

    #[test]
    fn shape_errors() {
        let inst = Instance::additive_ints(&[vec![1], vec![1]]).unwrap();
        assert!(matches!(find_plain(&inst), Err(SolveError::TooFewItems { .. })));
        assert!(matches!(find_secretive(&inst, 2), Err(SolveError::AgentOutOfRange { .. })));
        let inst = Instance::additive_ints(&[vec![1]]).unwrap();
        assert!(matches!(find_extra(&inst), Err(SolveError::TooFewAgents)));
        let opts = SearchOptions { engine: Engine::Pathfollow, ..sequential() };
        let inst = Instance::additive_ints(&[vec![1, 1], vec![1, 1]]).unwrap();
        assert!(matches!(search(&inst, Mode::Extra, &opts), Err(SolveError::EngineUnsupported)));
    }

    #[test]
    fn cut_and_choose() {
        let inst = Instance::additive_ints(&[vec![3, 1, 1, 2], vec![5, 0, 0, 1]]).unwrap();
        let out = find_secretive(&inst, 1).unwrap();
        let grid = grid_for(&inst, Mode::Secretive(1)).unwrap();
        let d = round(&grid, &out.simplex).unwrap();
        assert!(check_witness(&inst, &d, Mode::Secretive(1), out.witness.assignments()).unwrap());
    }

    #[test]
    fn three_identical_agents_two_bundles() {
        let inst = Instance::additive_ints(&[vec![1, 1, 1], vec![1, 1, 1], vec![1, 1, 1]]).unwrap();
        let out = find_extra(&inst).unwrap();
        let grid = grid_for(&inst, Mode::Extra).unwrap();
        let d = round(&grid, &out.simplex).unwrap();
        assert!(check_witness(&inst, &d, Mode::Extra, out.witness.assignments()).unwrap());
    }

    #[test]
    fn two_agents_one_bundle() {
        let inst = Instance::additive_ints(&[vec![1, 2], vec![0, 5]]).unwrap();
        let out = find_extra(&inst).unwrap();
        assert_eq!(
            out.witness,
            Witness::Extra(vec![Assignment::new(vec![None, Some(0)]), Assignment::new(vec![Some(0), None])])
        );
    }

    #[test]
    fn secretive_search_never_reads_the_secret_row() {
        let base = Instance::additive_ints(&[vec![4, 0, 2, 1, 3], vec![1, 1, 1, 1, 1], vec![0, 3, 0, 0, 2]]).unwrap();
        for secret in 0..3 {
            let a = find_secretive(&base, secret).unwrap();
            let mutated = base.with_additive_row(secret, vec![crate::rational::int(7); 5]).unwrap();
            let b = find_secretive(&mutated, secret).unwrap();
            assert_eq!(a.simplex, b.simplex);
            assert_eq!(a.witness, b.witness);
        }
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let inst =
            Instance::additive_ints(&[vec![4, 0, 2, 1, 3, 0, 1], vec![1, 1, 1, 1, 1, 1, 1], vec![0, 3, 0, 0, 2, 5, 0]])
                .unwrap();
        for mode in [Mode::Plain, Mode::Secretive(0), Mode::Extra] {
            let one = search(&inst, mode, &sequential()).unwrap();
            let many = search(&inst, mode, &SearchOptions { threads: Some(4), ..SearchOptions::default() }).unwrap();
            assert_eq!(one.index, many.index);
            assert_eq!(one.simplex, many.simplex);
            assert_eq!(one.witness, many.witness);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn pathfollow_finds_a_fully_colored_simplex(
            rows in (1usize..=4).prop_flat_map(|n| (n..=7).prop_flat_map(move |m| proptest::collection::vec(proptest::collection::vec(0i64..=10, m), n))),
        ) {
            let inst = Instance::additive_ints(&rows).unwrap();
            let grid = grid_for(&inst, Mode::Plain).unwrap();
            let opts = SearchOptions { engine: Engine::Pathfollow, ..sequential() };
            let out = search(&inst, Mode::Plain, &opts).unwrap();
            let table = ColorTable::build(&inst, &grid, &colored_agents(&inst, Mode::Plain), EmptyBundleRule::default(), false);
            prop_assert_eq!(plain_witness(&grid, &table, &out.simplex), Some(out.witness.clone()));
        }
    }
}

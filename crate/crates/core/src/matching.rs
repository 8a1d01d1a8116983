//! Maximum bipartite matching by augmenting paths.
//!
//! Graphs here have at most a few dozen vertices per side, so the simple
//! `O(V·E)` method is plenty. Left vertices are tried in index order and
//! neighbours in ascending order, which makes the result deterministic.

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BipartiteGraph {
    right: usize,
    adj: Vec<Vec<usize>>,
}

impl BipartiteGraph {
    pub fn new(left: usize, right: usize) -> BipartiteGraph {
        BipartiteGraph { right, adj: vec![Vec::new(); left] }
    }

    pub fn left(&self) -> usize {
        self.adj.len()
    }

    pub fn right(&self) -> usize {
        self.right
    }

    pub fn add_edge(&mut self, l: usize, r: usize) {
        assert!(r < self.right, "right vertex {r} out of range");
        if let Err(pos) = self.adj[l].binary_search(&r) {
            self.adj[l].insert(pos, r);
        }
    }

    pub fn has_edge(&self, l: usize, r: usize) -> bool {
        self.adj.get(l).is_some_and(|a| a.binary_search(&r).is_ok())
    }

    pub fn neighbours(&self, l: usize) -> &[usize] {
        &self.adj[l]
    }

    /// Copy keeping only edges whose endpoints pass both filters.
    pub fn restrict(&self, keep_left: impl Fn(usize) -> bool, keep_right: impl Fn(usize) -> bool) -> BipartiteGraph {
        let adj = self
            .adj
            .iter()
            .enumerate()
            .map(
                |(l, a)| if keep_left(l) { a.iter().copied().filter(|&r| keep_right(r)).collect() } else { Vec::new() },
            )
            .collect();
        BipartiteGraph { right: self.right, adj }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Matching {
    /// `partner[l]` is the right vertex matched to left vertex `l`.
    pub partner: Vec<Option<usize>>,
}

impl Matching {
    pub fn size(&self) -> usize {
        self.partner.iter().flatten().count()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.partner.iter().enumerate().filter_map(|(l, r)| r.map(|r| (l, r)))
    }
}

pub fn max_bipartite_matching(g: &BipartiteGraph) -> Matching {
    let mut owner: Vec<Option<usize>> = vec![None; g.right];
    let mut seen = vec![false; g.right];
    for l in 0..g.left() {
        seen.iter_mut().for_each(|s| *s = false);
        augment(g, l, &mut owner, &mut seen);
    }
    let mut partner = vec![None; g.left()];
    for (r, l) in owner.iter().enumerate() {
        if let Some(l) = l {
            partner[*l] = Some(r);
        }
    }
    Matching { partner }
}

fn augment(g: &BipartiteGraph, l: usize, owner: &mut [Option<usize>], seen: &mut [bool]) -> bool {
    for &r in &g.adj[l] {
        if seen[r] {
            continue;
        }
        seen[r] = true;
        if owner[r].is_none_or(|other| augment(g, other, owner, seen)) {
            owner[r] = Some(l);
            return true;
        }
    }
    false
}

//! Multigraphs addressed by edge id, vertex sets as bitmasks.

use serde::{Deserialize, Serialize};

pub type EdgeId = usize;

/// Vertex set over at most 64 vertices.
pub type VSet = u64;

/// Largest vertex count handled by the bitmask representation.
pub const MAX_VERTICES: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
}

impl Edge {
    pub fn new(u: usize, v: usize) -> Self {
        Edge { u, v }
    }

    pub fn other(&self, w: usize) -> usize {
        if self.u == w {
            self.v
        } else {
            self.u
        }
    }

    pub fn is_loop(&self) -> bool {
        self.u == self.v
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    n: usize,
    edges: Vec<Edge>,
}

pub fn bit(v: usize) -> VSet {
    1u64 << v
}

pub fn full_set(n: usize) -> VSet {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

pub fn set_members(s: VSet) -> Vec<usize> {
    let mut out = Vec::with_capacity(s.count_ones() as usize);
    let mut rest = s;
    while rest != 0 {
        let v = rest.trailing_zeros() as usize;
        out.push(v);
        rest &= rest - 1;
    }
    out
}

pub fn set_of(vs: &[usize]) -> VSet {
    vs.iter().fold(0, |acc, &v| acc | bit(v))
}

/// Two sets cross when all four regions are nonempty.
pub fn crosses(a: VSet, b: VSet, universe: VSet) -> bool {
    a & b != 0 && a & !b != 0 && b & !a != 0 && universe & !(a | b) != 0
}

impl Graph {
    pub fn new(n: usize, edges: Vec<Edge>) -> Self {
        assert!(n <= MAX_VERTICES, "graph too large for bitmask vertex sets");
        for e in &edges {
            assert!(e.u < n && e.v < n, "edge endpoint out of range");
        }
        Graph { n, edges }
    }

    pub fn from_pairs(n: usize, pairs: &[(usize, usize)]) -> Self {
        Graph::new(n, pairs.iter().map(|&(u, v)| Edge::new(u, v)).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn edge(&self, e: EdgeId) -> Edge {
        self.edges[e]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn vertex_set(&self) -> VSet {
        full_set(self.n)
    }

    pub fn incident(&self, v: usize) -> Vec<EdgeId> {
        (0..self.m())
            .filter(|&e| {
                let ed = self.edges[e];
                !ed.is_loop() && (ed.u == v || ed.v == v)
            })
            .collect()
    }

    /// Edges with exactly one endpoint in `s`.
    pub fn delta(&self, s: VSet) -> Vec<EdgeId> {
        (0..self.m())
            .filter(|&e| {
                let ed = self.edges[e];
                ((s >> ed.u) & 1) != ((s >> ed.v) & 1)
            })
            .collect()
    }

    /// Edges with both endpoints in `s`.
    pub fn inside(&self, s: VSet) -> Vec<EdgeId> {
        (0..self.m())
            .filter(|&e| {
                let ed = self.edges[e];
                (s >> ed.u) & 1 == 1 && (s >> ed.v) & 1 == 1
            })
            .collect()
    }

    /// Edges with one endpoint in `a` and the other in `b` (disjoint sets).
    pub fn between(&self, a: VSet, b: VSet) -> Vec<EdgeId> {
        (0..self.m())
            .filter(|&e| {
                let ed = self.edges[e];
                let (iu, iv) = ((a >> ed.u) & 1 == 1, (a >> ed.v) & 1 == 1);
                let (ju, jv) = ((b >> ed.u) & 1 == 1, (b >> ed.v) & 1 == 1);
                (iu && jv) || (iv && ju)
            })
            .collect()
    }

    pub fn weight(x: &[f64], ids: &[EdgeId]) -> f64 {
        ids.iter().map(|&e| x[e]).sum()
    }

    pub fn cut_value(&self, x: &[f64], s: VSet) -> f64 {
        Graph::weight(x, &self.delta(s))
    }

    /// Connectivity using only the edges for which `keep` is true.
    pub fn connected_with(&self, keep: impl Fn(EdgeId) -> bool) -> bool {
        if self.n <= 1 {
            return true;
        }
        let mut dsu = Dsu::new(self.n);
        let mut comps = self.n;
        for (id, e) in self.edges.iter().enumerate() {
            if keep(id) && dsu.union(e.u, e.v) {
                comps -= 1;
            }
        }
        comps == 1
    }

    pub fn is_connected(&self) -> bool {
        self.connected_with(|_| true)
    }

    /// Graph obtained by identifying the vertices in each class of `labels`;
    /// `labels[v]` must be a dense relabelling into `0..k`.
    pub fn quotient(&self, labels: &[usize], k: usize) -> Graph {
        Graph::new(
            k,
            self.edges
                .iter()
                .map(|e| Edge::new(labels[e.u], labels[e.v]))
                .collect(),
        )
    }

    /// Is `ids` a spanning tree of this graph?
    pub fn is_spanning_tree(&self, ids: &[EdgeId]) -> bool {
        if ids.len() + 1 != self.n {
            return false;
        }
        let mut dsu = Dsu::new(self.n);
        ids.iter().all(|&e| {
            let ed = self.edges[e];
            dsu.union(ed.u, ed.v)
        })
    }

    /// Graphic-matroid rank of an edge subset.
    pub fn rank(&self, ids: &[EdgeId]) -> usize {
        let mut dsu = Dsu::new(self.n);
        ids.iter()
            .filter(|&&e| {
                let ed = self.edges[e];
                dsu.union(ed.u, ed.v)
            })
            .count()
    }
}

#[derive(Clone, Debug)]
pub struct Dsu {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl Dsu {
    pub fn new(n: usize) -> Self {
        Dsu {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    pub fn find(&mut self, v: usize) -> usize {
        let mut r = v;
        while self.parent[r] != r {
            r = self.parent[r];
        }
        let mut c = v;
        while self.parent[c] != r {
            let next = self.parent[c];
            self.parent[c] = r;
            c = next;
        }
        r
    }

    /// Returns false when `a` and `b` were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }

    /// Dense labels `0..k` for the classes, ordered by smallest member.
    pub fn labels(&mut self) -> (Vec<usize>, usize) {
        let n = self.parent.len();
        let mut map = vec![usize::MAX; n];
        let mut labels = vec![0; n];
        let mut k = 0;
        for v in 0..n {
            let r = self.find(v);
            if map[r] == usize::MAX {
                map[r] = k;
                k += 1;
            }
            labels[v] = map[r];
        }
        (labels, k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_and_inside_partition_edges() {
        let g = Graph::from_pairs(4, &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)]);
        let s = set_of(&[0, 1]);
        let d = g.delta(s);
        let i = g.inside(s);
        assert_eq!(d, vec![1, 3, 4]);
        assert_eq!(i, vec![0]);
        assert_eq!(g.between(s, set_of(&[2])), vec![1, 4]);
    }

    #[test]
    fn crossing_requires_all_four_regions() {
        let u = full_set(6);
        assert!(crosses(set_of(&[1, 2]), set_of(&[2, 3]), u));
        assert!(!crosses(set_of(&[1, 2]), set_of(&[1, 2, 3]), u));
        assert!(!crosses(set_of(&[0, 1, 2]), set_of(&[2, 3, 4, 5]), u));
    }

    #[test]
    fn spanning_tree_and_rank() {
        let g = Graph::from_pairs(3, &[(0, 1), (1, 2), (0, 2)]);
        assert!(g.is_spanning_tree(&[0, 1]));
        assert!(!g.is_spanning_tree(&[0]));
        assert_eq!(g.rank(&[0, 1, 2]), 2);
    }

    #[test]
    fn dsu_labels_are_dense() {
        let mut d = Dsu::new(5);
        d.union(3, 4);
        d.union(0, 2);
        let (labels, k) = d.labels();
        assert_eq!(k, 3);
        assert_eq!(labels, vec![0, 1, 0, 2, 2]);
    }
}

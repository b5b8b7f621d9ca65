//! Undirected simple graphs in compressed adjacency form.
//!
//! Every undirected edge `{u, v}` owns two directed slots, one in the
//! adjacency of each endpoint. The simulator keys its shared registers by
//! slot, so `slot(u, k)` is the register node `u` writes for its `k`-th
//! neighbour and `reverse_slot` is the register that neighbour writes back.

mod generate;
mod metrics;
mod parse;

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

pub use generate::{erdos_renyi, preferential_attachment, randomize_degree_preserving, SwapStats};
pub use metrics::{
    clustering_coefficient, diameter, eccentricity, metrics, GraphMetrics, PathStats,
};
pub use parse::{EdgeListParser, LoadStats};

/// Sentinel distance for unreachable nodes.
pub const UNREACHABLE: u32 = u32::MAX;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<usize>,
    targets: Vec<u32>,
    reverse: Vec<usize>,
}

/// Counts of input edges that were not kept when building a simple graph.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BuildStats {
    pub self_loops: usize,
    pub duplicates: usize,
}

impl Graph {
    /// Builds a simple graph on `n` nodes, dropping self-loops and duplicate edges.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<(Graph, BuildStats)>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut stats = BuildStats::default();
        let mut pairs: Vec<(u32, u32)> = Vec::new();
        for (u, v) in edges {
            for x in [u, v] {
                if x >= n {
                    return Err(Error::NodeOutOfRange { node: x, nodes: n });
                }
            }
            if u == v {
                stats.self_loops += 1;
                continue;
            }
            pairs.push((u as u32, v as u32));
            pairs.push((v as u32, u as u32));
        }
        pairs.sort_unstable();
        let before = pairs.len();
        pairs.dedup();
        stats.duplicates = (before - pairs.len()) / 2;

        let mut offsets = vec![0usize; n + 1];
        for &(u, _) in &pairs {
            offsets[u as usize + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let targets: Vec<u32> = pairs.iter().map(|&(_, v)| v).collect();
        let mut graph = Graph {
            offsets,
            targets,
            reverse: Vec::new(),
        };
        graph.reverse = graph.compute_reverse();
        Ok((graph, stats))
    }

    fn compute_reverse(&self) -> Vec<usize> {
        let mut reverse = vec![0usize; self.targets.len()];
        for u in 0..self.node_count() {
            for (k, &v) in self.neighbors(u).iter().enumerate() {
                let back = self
                    .neighbor_index(v as usize, u)
                    .expect("adjacency is symmetric");
                reverse[self.offsets[u] + k] = self.offsets[v as usize] + back;
            }
        }
        reverse
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len() / 2
    }

    pub fn degree(&self, u: usize) -> usize {
        self.offsets[u + 1] - self.offsets[u]
    }

    /// Sorted neighbour list of `u`.
    pub fn neighbors(&self, u: usize) -> &[u32] {
        &self.targets[self.offsets[u]..self.offsets[u + 1]]
    }

    pub fn neighbor(&self, u: usize, k: usize) -> usize {
        self.neighbors(u)[k] as usize
    }

    /// Position of `v` in the neighbour list of `u`.
    pub fn neighbor_index(&self, u: usize, v: usize) -> Option<usize> {
        self.neighbors(u).binary_search(&(v as u32)).ok()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.node_count() && v < self.node_count() && self.neighbor_index(u, v).is_some()
    }

    /// Total number of directed slots, twice the edge count.
    pub fn slot_count(&self) -> usize {
        self.targets.len()
    }

    pub fn slot(&self, u: usize, k: usize) -> usize {
        debug_assert!(k < self.degree(u));
        self.offsets[u] + k
    }

    /// The slot of the opposite direction of `slot`.
    pub fn reverse_slot(&self, slot: usize) -> usize {
        self.reverse[slot]
    }

    /// Edges as `(u, v)` with `u < v`, in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.node_count()).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .filter(move |&&v| (v as usize) > u)
                .map(move |&v| (u, v as usize))
        })
    }

    /// Copy of the graph with one extra node attached to `neighbors`.
    pub fn with_extra_node(&self, neighbors: &[usize]) -> Result<Graph> {
        let n = self.node_count();
        let extra = neighbors.iter().map(|&v| (n, v));
        Graph::from_edges(n + 1, self.edges().chain(extra)).map(|(g, _)| g)
    }

    /// Subgraph induced by the nodes `0..count`.
    pub fn induced_prefix(&self, count: usize) -> Graph {
        let edges = self.edges().filter(|&(u, v)| u < count && v < count);
        Graph::from_edges(count, edges)
            .map(|(g, _)| g)
            .expect("prefix edges are in range")
    }

    /// Connected component labels, numbered in order of first appearance.
    pub fn components(&self) -> Vec<usize> {
        let n = self.node_count();
        let mut label = vec![usize::MAX; n];
        let mut next = 0;
        let mut queue = VecDeque::new();
        for s in 0..n {
            if label[s] != usize::MAX {
                continue;
            }
            label[s] = next;
            queue.push_back(s);
            while let Some(u) = queue.pop_front() {
                for &v in self.neighbors(u) {
                    if label[v as usize] == usize::MAX {
                        label[v as usize] = next;
                        queue.push_back(v as usize);
                    }
                }
            }
            next += 1;
        }
        label
    }

    /// Largest connected component, re-indexed densely in original order.
    /// The second value maps new indices to original ones.
    pub fn largest_component(&self) -> (Graph, Vec<usize>) {
        let label = self.components();
        let count = label.iter().copied().max().map_or(0, |m| m + 1);
        let mut sizes = vec![0usize; count];
        for &l in &label {
            sizes[l] += 1;
        }
        // Ties go to the component seen first.
        let best = (0..count).fold(0, |best, c| if sizes[c] > sizes[best] { c } else { best });
        let keep: Vec<usize> = (0..self.node_count())
            .filter(|&u| label[u] == best)
            .collect();
        let mut index = vec![usize::MAX; self.node_count()];
        for (new, &old) in keep.iter().enumerate() {
            index[old] = new;
        }
        let edges = self
            .edges()
            .filter(|&(u, _)| label[u] == best)
            .map(|(u, v)| (index[u], index[v]));
        let (g, _) = Graph::from_edges(keep.len(), edges).expect("component edges are in range");
        (g, keep)
    }

    pub fn is_connected(&self) -> bool {
        self.components().iter().all(|&l| l == 0)
    }
}

/// Breadth-first hop distances from the nearest of `sources`.
pub fn bfs_distances(graph: &Graph, sources: &[usize]) -> Result<Vec<u32>> {
    bfs_inner(graph, sources, &[])
}

/// Hop distances from `source` on paths that never enter a `forbidden` node.
/// Forbidden nodes themselves get [`UNREACHABLE`].
pub fn bfs_distances_avoiding(
    graph: &Graph,
    source: usize,
    forbidden: &[usize],
) -> Result<Vec<u32>> {
    bfs_inner(graph, &[source], forbidden)
}

fn bfs_inner(graph: &Graph, sources: &[usize], forbidden: &[usize]) -> Result<Vec<u32>> {
    let n = graph.node_count();
    if sources.is_empty() {
        return Err(Error::NoSources);
    }
    let mut dist = vec![UNREACHABLE; n];
    let mut blocked = vec![false; n];
    for &f in forbidden {
        if f >= n {
            return Err(Error::NodeOutOfRange { node: f, nodes: n });
        }
        blocked[f] = true;
    }
    let mut queue = VecDeque::with_capacity(n);
    for &s in sources {
        if s >= n {
            return Err(Error::NodeOutOfRange { node: s, nodes: n });
        }
        if blocked[s] {
            return Err(Error::ForbiddenSource(s));
        }
        if dist[s] == UNREACHABLE {
            dist[s] = 0;
            queue.push_back(s);
        }
    }
    while let Some(u) = queue.pop_front() {
        let next = dist[u] + 1;
        for &v in graph.neighbors(u) {
            let v = v as usize;
            if !blocked[v] && dist[v] == UNREACHABLE {
                dist[v] = next;
                queue.push_back(v);
            }
        }
    }
    Ok(dist)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> Graph {
        Graph::from_edges(n, (1..n).map(|i| (i - 1, i))).unwrap().0
    }

    #[test]
    fn build_drops_loops_and_duplicates() {
        let (g, stats) = Graph::from_edges(3, [(0, 1), (1, 0), (1, 1), (1, 2), (0, 1)]).unwrap();
        assert_eq!(g.edge_count(), 2);
        assert_eq!(
            stats,
            BuildStats {
                self_loops: 1,
                duplicates: 2
            }
        );
        assert_eq!(g.neighbors(1), &[0, 2]);
    }

    #[test]
    fn reverse_slots_pair_up() {
        let (g, _) = Graph::from_edges(4, [(0, 1), (0, 2), (2, 3), (1, 3), (0, 3)]).unwrap();
        for u in 0..g.node_count() {
            for k in 0..g.degree(u) {
                let s = g.slot(u, k);
                let r = g.reverse_slot(s);
                assert_eq!(g.reverse_slot(r), s);
                let v = g.neighbor(u, k);
                assert_eq!(g.neighbor(v, r - g.slot(v, 0)), u);
            }
        }
    }

    #[test]
    fn bfs_on_path() {
        let g = path(5);
        assert_eq!(bfs_distances(&g, &[0]).unwrap(), vec![0, 1, 2, 3, 4]);
        assert_eq!(bfs_distances(&g, &[0, 4]).unwrap(), vec![0, 1, 2, 1, 0]);
    }

    #[test]
    fn bfs_avoiding_cuts_paths() {
        let g = path(4);
        let d = bfs_distances_avoiding(&g, 0, &[2]).unwrap();
        assert_eq!(d, vec![0, 1, UNREACHABLE, UNREACHABLE]);
        assert_eq!(
            bfs_distances_avoiding(&g, 2, &[2]),
            Err(Error::ForbiddenSource(2))
        );
        assert_eq!(bfs_distances(&g, &[]), Err(Error::NoSources));
    }

    #[test]
    fn largest_component_reindexes() {
        let (g, _) = Graph::from_edges(6, [(0, 1), (2, 3), (3, 4), (4, 2)]).unwrap();
        let (lcc, map) = g.largest_component();
        assert_eq!(map, vec![2, 3, 4]);
        assert_eq!(lcc.edge_count(), 3);
        assert!(lcc.is_connected());
        assert!(!g.is_connected());
    }

    #[test]
    fn extra_node_and_prefix_round_trip() {
        let g = path(3);
        let s = g.with_extra_node(&[0, 2]).unwrap();
        assert_eq!(s.node_count(), 4);
        assert_eq!(s.neighbors(3), &[0, 2]);
        assert_eq!(s.induced_prefix(3), g);
    }
}

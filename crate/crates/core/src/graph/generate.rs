use alloc::vec::Vec;

use hashbrown::HashSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Graph;
use crate::{Error, Result};

fn edge_key(u: usize, v: usize) -> u64 {
    let (a, b) = if u < v { (u, v) } else { (v, u) };
    ((a as u64) << 32) | b as u64
}

/// Uniform random graph with exactly `m` edges on `n` nodes, G(n, M).
///
/// Sparse targets are drawn by rejection; when more than half of all pairs
/// are requested the complement is drawn instead.
pub fn erdos_renyi(n: usize, m: u64, seed: u64) -> Result<Graph> {
    let max = (n as u64) * (n as u64).saturating_sub(1) / 2;
    if m > max || n > u32::MAX as usize {
        return Err(Error::TooManyEdges { nodes: n, edges: m });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let complement = m > max / 2;
    let want = if complement { max - m } else { m };
    let mut chosen: HashSet<u64> = HashSet::with_capacity(want as usize);
    let mut order: Vec<(usize, usize)> = Vec::with_capacity(want as usize);
    while (chosen.len() as u64) < want {
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        if u != v && chosen.insert(edge_key(u, v)) {
            order.push((u.min(v), u.max(v)));
        }
    }
    let graph = if complement {
        let edges = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v)));
        let kept: Vec<(usize, usize)> = edges
            .filter(|&(u, v)| !chosen.contains(&edge_key(u, v)))
            .collect();
        Graph::from_edges(n, kept)?.0
    } else {
        Graph::from_edges(n, order)?.0
    };
    Ok(graph)
}

/// Degree-skewed graph by preferential attachment: a clique on `k + 1` seed
/// nodes, then every new node links to `k` distinct existing nodes chosen
/// proportionally to degree.
pub fn preferential_attachment(n: usize, k: usize, seed: u64) -> Result<Graph> {
    if k == 0 || n < k + 1 {
        return Err(Error::InvalidParameter(
            "preferential attachment needs n > k >= 1",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    let mut endpoints = Vec::new();
    for u in 0..=k {
        for v in u + 1..=k {
            edges.push((u, v));
            endpoints.push(u);
            endpoints.push(v);
        }
    }
    let mut picked = Vec::with_capacity(k);
    for u in k + 1..n {
        picked.clear();
        while picked.len() < k {
            let v = endpoints[rng.random_range(0..endpoints.len())];
            if !picked.contains(&v) {
                picked.push(v);
            }
        }
        for &v in &picked {
            edges.push((u, v));
            endpoints.push(u);
            endpoints.push(v);
        }
    }
    Ok(Graph::from_edges(n, edges)?.0)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SwapStats {
    pub attempted: u64,
    pub accepted: u64,
}

/// Degree-preserving randomisation by double edge swaps.
///
/// `swap_factor * |E|` swaps are attempted; a swap of `(a, b), (c, d)` into
/// `(a, d), (c, b)` is rejected if it would create a self-loop or a parallel
/// edge.
pub fn randomize_degree_preserving(
    graph: &Graph,
    seed: u64,
    swap_factor: u64,
) -> Result<(Graph, SwapStats)> {
    let mut edges: Vec<(usize, usize)> = graph.edges().collect();
    let mut present: HashSet<u64> = edges.iter().map(|&(u, v)| edge_key(u, v)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = SwapStats::default();
    if edges.len() >= 2 {
        stats.attempted = swap_factor * edges.len() as u64;
        for _ in 0..stats.attempted {
            let i = rng.random_range(0..edges.len());
            let j = rng.random_range(0..edges.len());
            if i == j {
                continue;
            }
            let (a, b) = edges[i];
            let (mut c, mut d) = edges[j];
            if rng.random_bool(0.5) {
                core::mem::swap(&mut c, &mut d);
            }
            if a == d
                || c == b
                || present.contains(&edge_key(a, d))
                || present.contains(&edge_key(c, b))
            {
                continue;
            }
            present.remove(&edge_key(a, b));
            present.remove(&edge_key(c, d));
            present.insert(edge_key(a, d));
            present.insert(edge_key(c, b));
            edges[i] = (a, d);
            edges[j] = (c, b);
            stats.accepted += 1;
        }
    }
    Ok((Graph::from_edges(graph.node_count(), edges)?.0, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erdos_renyi_exact_counts() {
        let g = erdos_renyi(100, 300, 1).unwrap();
        assert_eq!((g.node_count(), g.edge_count()), (100, 300));
        let dense = erdos_renyi(10, 40, 2).unwrap();
        assert_eq!(dense.edge_count(), 40);
        let full = erdos_renyi(5, 10, 3).unwrap();
        assert_eq!(full.edge_count(), 10);
        assert!(erdos_renyi(5, 11, 3).is_err());
    }

    #[test]
    fn erdos_renyi_is_seeded() {
        assert_eq!(
            erdos_renyi(50, 100, 9).unwrap(),
            erdos_renyi(50, 100, 9).unwrap()
        );
        assert_ne!(
            erdos_renyi(50, 100, 9).unwrap(),
            erdos_renyi(50, 100, 10).unwrap()
        );
    }

    #[test]
    fn preferential_attachment_shape() {
        let g = preferential_attachment(200, 3, 4).unwrap();
        assert_eq!(g.edge_count(), 6 + 3 * (200 - 4));
        assert!(g.is_connected());
        let max = (0..200).map(|u| g.degree(u)).max().unwrap();
        assert!(max > 15, "expected a hub, max degree {max}");
    }

    #[test]
    fn swaps_keep_degrees() {
        let g = erdos_renyi(60, 200, 5).unwrap();
        let (r, stats) = randomize_degree_preserving(&g, 6, 10).unwrap();
        assert!(stats.accepted > 0);
        assert_eq!(r.edge_count(), g.edge_count());
        for u in 0..60 {
            assert_eq!(r.degree(u), g.degree(u));
        }
        assert_ne!(r, g);
    }
}

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{bfs_distances, Graph, UNREACHABLE};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GraphMetrics {
    pub nodes: usize,
    pub edges: usize,
    pub cpl: f64,
    pub clustering: f64,
    /// Exact diameter, or the largest eccentricity seen when sampling.
    pub diameter: u32,
    /// Whether all nodes were used as BFS sources.
    pub exact: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathStats {
    pub cpl: f64,
    pub max_distance: u32,
    pub sources: usize,
}

/// Mean local clustering coefficient; nodes of degree below two count as zero.
pub fn clustering_coefficient(graph: &Graph) -> f64 {
    let n = graph.node_count();
    if n == 0 {
        return 0.0;
    }
    let mut mark = vec![false; n];
    let mut total = 0.0;
    for u in 0..n {
        let k = graph.degree(u);
        if k < 2 {
            continue;
        }
        for &v in graph.neighbors(u) {
            mark[v as usize] = true;
        }
        let mut links = 0u64;
        for &v in graph.neighbors(u) {
            for &w in graph.neighbors(v as usize) {
                if w > v && mark[w as usize] {
                    links += 1;
                }
            }
        }
        for &v in graph.neighbors(u) {
            mark[v as usize] = false;
        }
        total += 2.0 * links as f64 / (k as f64 * (k - 1) as f64);
    }
    total / n as f64
}

/// Characteristic path length over reachable ordered pairs, from the given sources.
fn path_stats(graph: &Graph, sources: &[usize]) -> PathStats {
    let mut sum = 0u64;
    let mut pairs = 0u64;
    let mut max_distance = 0;
    for &s in sources {
        let dist = bfs_distances(graph, &[s]).expect("source in range");
        for (v, &d) in dist.iter().enumerate() {
            if v != s && d != UNREACHABLE {
                sum += d as u64;
                pairs += 1;
                max_distance = max_distance.max(d);
            }
        }
    }
    let cpl = if pairs == 0 {
        0.0
    } else {
        sum as f64 / pairs as f64
    };
    PathStats {
        cpl,
        max_distance,
        sources: sources.len(),
    }
}

/// Largest finite distance from `u`.
pub fn eccentricity(graph: &Graph, u: usize) -> u32 {
    let dist = bfs_distances(graph, &[u]).expect("node in range");
    dist.into_iter()
        .filter(|&d| d != UNREACHABLE)
        .max()
        .unwrap_or(0)
}

/// Exact diameter (largest finite distance over all pairs).
pub fn diameter(graph: &Graph) -> u32 {
    (0..graph.node_count())
        .map(|u| eccentricity(graph, u))
        .max()
        .unwrap_or(0)
}

/// Graph statistics. With `sample_sources = Some(k)` and `k` below the node
/// count, path statistics come from `k` uniformly sampled BFS sources.
pub fn metrics(graph: &Graph, sample_sources: Option<usize>, seed: u64) -> GraphMetrics {
    let n = graph.node_count();
    let sources: Vec<usize> = match sample_sources {
        Some(k) if k < n => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut picked = sample(&mut rng, n, k).into_vec();
            picked.sort_unstable();
            picked
        }
        _ => (0..n).collect(),
    };
    let exact = sources.len() == n;
    let paths = path_stats(graph, &sources);
    GraphMetrics {
        nodes: n,
        edges: graph.edge_count(),
        cpl: paths.cpl,
        clustering: clustering_coefficient(graph),
        diameter: paths.max_distance,
        exact,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn star_metrics() {
        let (g, _) = Graph::from_edges(4, [(0, 1), (0, 2), (0, 3)]).unwrap();
        let m = metrics(&g, None, 0);
        assert!((m.cpl - 1.5).abs() < 1e-12);
        assert_eq!(m.clustering, 0.0);
        assert_eq!(m.diameter, 2);
        assert!(m.exact);
    }

    #[test]
    fn triangle_with_tail() {
        // Triangle 0-1-2 plus pendant 3 on node 2.
        let (g, _) = Graph::from_edges(4, [(0, 1), (1, 2), (0, 2), (2, 3)]).unwrap();
        // Local values 1, 1, 1/3, 0.
        let expected = (1.0 + 1.0 + 1.0 / 3.0) / 4.0;
        assert!((clustering_coefficient(&g) - expected).abs() < 1e-12);
        assert_eq!(diameter(&g), 2);
        assert_eq!(eccentricity(&g, 3), 2);
    }

    #[test]
    fn sampling_is_marked_inexact() {
        let (g, _) = Graph::from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4)]).unwrap();
        let m = metrics(&g, Some(2), 1);
        assert!(!m.exact);
        assert!(m.diameter <= 4);
        assert_eq!(metrics(&g, Some(10), 1), metrics(&g, None, 1));
    }
}

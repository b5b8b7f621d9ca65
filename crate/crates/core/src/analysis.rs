//! Closed-form containment analysis.
//!
//! With `d` the hop distance in the full graph, `d_h` the distance avoiding
//! the malicious node `m`, and `d_min = d(r, m)`, the lowest level `m` can
//! back towards an honest node `u` through relaying makes `u` see an offer
//! of effective length `d_min + d(m, u) - 1`. Nodes where that is at most
//! `d(r, u)` may be captured (`s_b`); nodes where it is strictly below
//! `d_h(r, u)` are captured by a cheating adversary (`s_l`).

use alloc::vec::Vec;

use crate::adversary::Behavior;
use crate::graph::{bfs_distances, bfs_distances_avoiding, Graph, UNREACHABLE};
use crate::protocol::ProtocolKind;
use crate::sim::{Direction, RoundRecord, Trace};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContainmentReport {
    pub root: usize,
    pub adversary: usize,
    /// Honest nodes are `0..honest`.
    pub honest: usize,
    pub d_min: u32,
    /// `d(r, u)` in the full graph.
    pub dist_root: Vec<u32>,
    /// `d(m, u)` in the full graph.
    pub dist_adv: Vec<u32>,
    /// `d_h(r, u)`, avoiding the malicious node.
    pub dist_root_honest: Vec<u32>,
    /// Boundary set: `d_min + d(m,u) - 1 <= d(r,u)`.
    pub s_b: Vec<bool>,
    /// Lost set: `d_min + d(m,u) - 1 < d_h(r,u)`.
    pub s_l: Vec<bool>,
    /// Boundary set for an adversary that advertises its true level:
    /// `d_min + d(m,u) <= d(r,u)`.
    pub s_b_plain: Vec<bool>,
    /// Lost set for the same adversary: `d_min + d(m,u) < d_h(r,u)`.
    pub s_l_plain: Vec<bool>,
    /// Baseline lost set: strictly closer to `m` than to the root.
    pub baseline_lost: Vec<bool>,
    /// Baseline ties: equally close to both.
    pub baseline_ties: Vec<bool>,
    /// Sum of degrees over `s_b \ s_l`.
    pub deg_sum: u64,
}

fn count(set: &[bool]) -> usize {
    set.iter().filter(|&&b| b).count()
}

impl ContainmentReport {
    /// `s_b \ s_l`.
    pub fn ties(&self) -> Vec<bool> {
        self.s_b
            .iter()
            .zip(&self.s_l)
            .map(|(&b, &l)| b && !l)
            .collect()
    }

    /// Maximum number of disturbances after the boundary set has settled.
    pub fn disturbance_budget(&self) -> u64 {
        2 * self.deg_sum - count(&self.ties()) as u64
    }

    /// Effective level of the adversary towards `u` when it cheats.
    pub fn adversary_level(&self, u: usize) -> u32 {
        (self.d_min + self.dist_adv[u]).saturating_sub(1)
    }

    /// The lost set predicted for a protocol and behaviour.
    pub fn predicted_lost(&self, protocol: ProtocolKind, behavior: Behavior) -> &[bool] {
        match (protocol, behavior) {
            (ProtocolKind::Attested, Behavior::Disturb) => &self.s_l,
            (ProtocolKind::Attested, Behavior::CheatMinLevel) => &self.s_b,
            (ProtocolKind::Baseline, Behavior::Disturb | Behavior::CheatMinLevel) => {
                &self.baseline_lost
            }
            (_, Behavior::HonestMinLevel) => &self.s_b_plain,
        }
    }

    /// Nodes that tie under the given protocol.
    pub fn tie_count(&self, protocol: ProtocolKind) -> usize {
        match protocol {
            ProtocolKind::Attested => count(&self.ties()),
            ProtocolKind::Baseline => count(&self.baseline_ties),
        }
    }
}

/// Computes all containment sets for root `root` and malicious node
/// `adversary`, which must be the last node of `graph`.
pub fn containment_sets(graph: &Graph, adversary: usize, root: usize) -> Result<ContainmentReport> {
    let n = graph.node_count();
    if adversary + 1 != n {
        return Err(Error::AdversaryNotLast);
    }
    let honest = adversary;
    if honest == 0 {
        return Err(Error::NoHonestNodes);
    }
    if root >= honest {
        return Err(Error::InvalidRoot(root));
    }
    let mut dist_root = bfs_distances(graph, &[root])?;
    let mut dist_adv = bfs_distances(graph, &[adversary])?;
    let mut dist_root_honest = bfs_distances_avoiding(graph, root, &[adversary])?;
    if let Some(u) = (0..honest).find(|&u| dist_root[u] == UNREACHABLE) {
        return Err(Error::Unreachable(u));
    }
    let d_min = dist_root[adversary];
    dist_root.truncate(honest);
    dist_adv.truncate(honest);
    dist_root_honest.truncate(honest);

    // Widen to u64 so that unreachable distances compare as infinity.
    let sum = |a: u32, b: u32| a as u64 + b as u64;
    let mut report = ContainmentReport {
        root,
        adversary,
        honest,
        d_min,
        s_b: Vec::with_capacity(honest),
        s_l: Vec::with_capacity(honest),
        s_b_plain: Vec::with_capacity(honest),
        s_l_plain: Vec::with_capacity(honest),
        baseline_lost: Vec::with_capacity(honest),
        baseline_ties: Vec::with_capacity(honest),
        deg_sum: 0,
        dist_root,
        dist_adv,
        dist_root_honest,
    };
    for u in 0..honest {
        let reach = sum(d_min, report.dist_adv[u]);
        let (dr, dh, dm) = (
            report.dist_root[u] as u64,
            report.dist_root_honest[u] as u64,
            report.dist_adv[u] as u64,
        );
        let cheat = reach.saturating_sub(1);
        report.s_b.push(cheat <= dr && u != root);
        report.s_l.push(cheat < dh && u != root);
        report.s_b_plain.push(reach <= dr && u != root);
        report.s_l_plain.push(reach < dh && u != root);
        report.baseline_lost.push(dm < dr);
        report.baseline_ties.push(dm == dr && u != root);
    }
    report.deg_sum = report
        .ties()
        .iter()
        .enumerate()
        .filter(|(_, &t)| t)
        .map(|(u, _)| graph.degree(u) as u64)
        .sum();
    Ok(report)
}

/// Ratio of lost nodes; `lost` is indexed by honest node.
pub fn rln(lost: &[bool]) -> Result<f64> {
    if lost.is_empty() {
        return Err(Error::NoHonestNodes);
    }
    Ok(count(lost) as f64 / lost.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistanceDiagnostics {
    /// Mean distance of honest nodes to the root.
    pub mean_dist_root: f64,
    /// Mean distance of honest nodes to the malicious node.
    pub mean_dist_adv: f64,
    /// `mean_dist_adv + d(m, r) - 1`.
    pub effective_adv_dist: f64,
    pub d_m_r: u32,
}

pub fn distance_diagnostics(report: &ContainmentReport) -> DistanceDiagnostics {
    let mean = |d: &[u32]| {
        let (s, c) = d
            .iter()
            .filter(|&&x| x != UNREACHABLE)
            .fold((0u64, 0u64), |(s, c), &x| (s + x as u64, c + 1));
        if c == 0 {
            0.0
        } else {
            s as f64 / c as f64
        }
    };
    let mean_dist_adv = mean(&report.dist_adv);
    DistanceDiagnostics {
        mean_dist_root: mean(&report.dist_root),
        mean_dist_adv,
        effective_adv_dist: mean_dist_adv + report.d_min as f64 - 1.0,
        d_m_r: report.d_min,
    }
}

/// Nodes whose parent chain ends at the malicious node.
pub fn ill_directed_set(record: &RoundRecord) -> Vec<bool> {
    record
        .direction
        .iter()
        .map(|&d| d == Direction::Ill)
        .collect()
}

/// Honest nodes that, in the last `window` records, were ever not
/// well-directed or changed their level or parent. The window must lie
/// after record `from`.
pub fn simulated_lost_set(trace: &Trace, from: usize, window: usize) -> Result<Vec<bool>> {
    let available = trace.len().saturating_sub(from + 1);
    if window == 0 || available < window {
        return Err(Error::TraceTooShort {
            from,
            needed: window,
            available,
        });
    }
    let start = trace.len() - window;
    let n = trace.last().node_count();
    Ok((0..n)
        .map(|u| {
            (start..trace.len()).any(|k| {
                trace.records[k].direction[u] != Direction::Well
                    || (k > start && trace.changed(k, u))
            })
        })
        .collect())
}

/// First record from which every node outside `lost` is legitimate and
/// never changes again.
pub fn convergence_round(trace: &Trace, lost: &[bool]) -> Option<usize> {
    let keep: Vec<bool> = lost.iter().map(|&l| !l).collect();
    trace.settled_from(&keep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(n: usize, edges: &[(usize, usize)]) -> Graph {
        Graph::from_edges(n, edges.iter().copied()).unwrap().0
    }

    #[test]
    fn path_with_adversary_at_the_end() {
        // r=0 - x=1 - y=2 - m=3
        let g = graph(4, &[(0, 1), (1, 2), (2, 3)]);
        let r = containment_sets(&g, 3, 0).unwrap();
        assert_eq!(r.d_min, 3);
        assert!(r.s_b.iter().all(|&b| !b));
        assert_eq!(r.baseline_lost, vec![false, false, true]);
        assert_eq!(r.baseline_ties, vec![false, false, false]);
    }

    #[test]
    fn shortcut_through_adversary() {
        // r=0 - a=1 - b=2, m=3 adjacent to r and b.
        let g = graph(4, &[(0, 1), (1, 2), (3, 0), (3, 2)]);
        let r = containment_sets(&g, 3, 0).unwrap();
        assert_eq!(r.d_min, 1);
        assert_eq!(r.s_b, vec![false, false, true]);
        // d_h(r, b) = 2 and the cheating level is 1 + 1 - 1 = 1.
        assert_eq!(r.s_l, vec![false, false, true]);
        assert_eq!(r.deg_sum, 0);
        assert_eq!(r.disturbance_budget(), 0);
        assert_eq!(r.adversary_level(2), 1);
    }

    #[test]
    fn ties_feed_the_budget() {
        // r=0 - a=1 - c=3, r - b=2 - m=4 - c.
        let g = graph(5, &[(0, 1), (1, 3), (0, 2), (2, 4), (4, 3)]);
        let r = containment_sets(&g, 4, 0).unwrap();
        // d_min = 2; c: 2 + 1 - 1 = 2 = d(r, c), a tie.
        assert_eq!(r.s_b, vec![false, false, false, true]);
        assert_eq!(r.s_l, vec![false, false, false, false]);
        assert_eq!(r.deg_sum, 2);
        assert_eq!(r.disturbance_budget(), 3);
        assert_eq!(r.tie_count(ProtocolKind::Attested), 1);
    }

    #[test]
    fn diagnostics_on_path() {
        // r=0 - a=1 - m=2
        let g = graph(3, &[(0, 1), (1, 2)]);
        let r = containment_sets(&g, 2, 0).unwrap();
        let d = distance_diagnostics(&r);
        assert_eq!(d.mean_dist_root, 0.5);
        assert_eq!(d.mean_dist_adv, 1.5);
        assert_eq!(d.effective_adv_dist, 2.5);
        assert_eq!(d.d_m_r, 2);
    }

    #[test]
    fn argument_errors() {
        let g = graph(3, &[(0, 1), (1, 2)]);
        assert_eq!(containment_sets(&g, 1, 0), Err(Error::AdversaryNotLast));
        assert_eq!(containment_sets(&g, 2, 2), Err(Error::InvalidRoot(2)));
        let split = graph(4, &[(0, 1), (2, 3)]);
        assert_eq!(containment_sets(&split, 3, 0), Err(Error::Unreachable(2)));
        assert_eq!(rln(&[true, false, false, true]), Ok(0.5));
        assert_eq!(rln(&[true, false, false]), Ok(1.0 / 3.0));
        assert_eq!(rln(&[]), Err(Error::NoHonestNodes));
    }
}

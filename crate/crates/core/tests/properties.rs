use attestree_core::adversary::Behavior;
use attestree_core::analysis::{containment_sets, ill_directed_set};
use attestree_core::attestation::{
    extend, is_valid_att, LevelAttestation, Nid, Timing, ValidityContext,
};
use attestree_core::crypto::{digest, hash_chain_distance, HashChain, KeyPair, Scheme};
use attestree_core::graph::{
    bfs_distances, bfs_distances_avoiding, erdos_renyi, metrics, randomize_degree_preserving,
    Graph, UNREACHABLE,
};
use attestree_core::protocol::{prec, ProtocolKind};
use attestree_core::sim::{run, InitKind, RunConfig};
use proptest::prelude::*;

/// A connected graph on `n` nodes: a random spanning tree plus extra edges.
fn connected_graph() -> impl Strategy<Value = Graph> {
    (4usize..40).prop_flat_map(|n| {
        let parents = (1..n).map(|i| 0..i).collect::<Vec<_>>();
        let extra = proptest::collection::vec((0..n, 0..n), 0..2 * n);
        (Just(n), parents, extra).prop_map(|(n, parents, extra)| {
            let tree = parents.into_iter().enumerate().map(|(i, p)| (i + 1, p));
            Graph::from_edges(n, tree.chain(extra)).unwrap().0
        })
    })
}

/// A connected honest graph, a set of attack-edge endpoints, and a root.
fn placement() -> impl Strategy<Value = (Graph, Vec<usize>, usize)> {
    connected_graph().prop_flat_map(|g| {
        let n = g.node_count();
        let targets = proptest::sample::subsequence((0..n).collect::<Vec<_>>(), 1..=n.min(8));
        (Just(g), targets, 0..n)
    })
}

fn sorted_degrees(g: &Graph) -> Vec<usize> {
    let mut d: Vec<usize> = (0..g.node_count()).map(|u| g.degree(u)).collect();
    d.sort_unstable();
    d
}

#[test]
fn prec_is_a_strict_total_order() {
    for deg in 1..=8usize {
        for start in 0..deg {
            for a in 0..deg {
                assert!(prec(a, a, start).is_err());
                for b in 0..deg {
                    if a == b {
                        continue;
                    }
                    let ab = prec(a, b, start).unwrap();
                    assert_ne!(
                        ab,
                        prec(b, a, start).unwrap(),
                        "antisymmetry {a} {b} {start}"
                    );
                    for c in 0..deg {
                        if c == a || c == b {
                            continue;
                        }
                        if ab && prec(b, c, start).unwrap() {
                            assert!(
                                prec(a, c, start).unwrap(),
                                "transitivity {a} {b} {c} {start}"
                            );
                        }
                    }
                }
                // The start index precedes every other index.
                if a != start {
                    assert!(prec(start, a, start).unwrap());
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn graphs_are_symmetric(g in connected_graph()) {
        for (u, v) in g.edges() {
            prop_assert!(g.has_edge(v, u));
            prop_assert_ne!(u, v);
        }
        for u in 0..g.node_count() {
            prop_assert!(g.neighbors(u).windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn bfs_step_property(g in connected_graph(), s in 0usize..4) {
        let d = bfs_distances(&g, &[s]).unwrap();
        prop_assert_eq!(d[s], 0);
        for (u, v) in g.edges() {
            prop_assert!(d[u].abs_diff(d[v]) <= 1);
        }
        prop_assert_eq!(bfs_distances_avoiding(&g, s, &[]).unwrap(), d);
    }

    #[test]
    fn avoiding_never_shortens(g in connected_graph(), f in 1usize..4) {
        let d = bfs_distances(&g, &[0]).unwrap();
        let h = bfs_distances_avoiding(&g, 0, &[f]).unwrap();
        for u in 0..g.node_count() {
            prop_assert!(h[u] >= d[u]);
        }
        prop_assert_eq!(h[f], UNREACHABLE);
    }

    #[test]
    fn randomization_preserves_degrees(g in connected_graph(), seed: u64) {
        let (r, stats) = randomize_degree_preserving(&g, seed, 5).unwrap();
        prop_assert_eq!(sorted_degrees(&r), sorted_degrees(&g));
        prop_assert_eq!(r.edge_count(), g.edge_count());
        prop_assert!(stats.accepted <= stats.attempted);
        let (again, _) = randomize_degree_preserving(&g, seed, 5).unwrap();
        prop_assert_eq!(again, r);
    }

    #[test]
    fn erdos_renyi_is_exact_and_deterministic(n in 2usize..60, frac in 0.0f64..1.0, seed: u64) {
        let max = (n * (n - 1) / 2) as u64;
        let m = (max as f64 * frac) as u64;
        let g = erdos_renyi(n, m, seed).unwrap();
        prop_assert_eq!(g.edge_count() as u64, m);
        prop_assert_eq!(erdos_renyi(n, m, seed).unwrap(), g);
        prop_assert!(erdos_renyi(n, max + 1, seed).is_err());
    }

    #[test]
    fn metric_ranges(g in connected_graph()) {
        let m = metrics(&g, None, 0);
        prop_assert!((0.0..=1.0).contains(&m.clustering));
        prop_assert!(m.cpl >= 1.0 && m.diameter as f64 >= m.cpl);
    }

    #[test]
    fn lost_set_within_boundary((g, targets, root) in placement()) {
        let s = g.with_extra_node(&targets).unwrap();
        let m = g.node_count();
        let r = containment_sets(&s, m, root).unwrap();
        for u in 0..m {
            prop_assert!(!r.s_l[u] || r.s_b[u]);
            prop_assert!(!r.s_l_plain[u] || r.s_b_plain[u]);
            prop_assert!(!r.s_b_plain[u] || r.s_b[u]);
            prop_assert!(!r.s_l_plain[u] || r.s_l[u]);
            prop_assert!(!(r.baseline_lost[u] && r.baseline_ties[u]));
        }
        prop_assert!(!r.s_b[root] && !r.baseline_lost[root]);
    }

    #[test]
    fn more_attack_edges_never_shrink_the_boundary((g, targets, root) in placement(), extra in proptest::collection::vec(any::<proptest::sample::Index>(), 1..5)) {
        let n = g.node_count();
        let mut bigger = targets.clone();
        for i in extra {
            let v = i.index(n);
            if !bigger.contains(&v) {
                bigger.push(v);
            }
        }
        bigger.sort_unstable();
        let small = containment_sets(&g.with_extra_node(&targets).unwrap(), n, root).unwrap();
        let large = containment_sets(&g.with_extra_node(&bigger).unwrap(), n, root).unwrap();
        for u in 0..n {
            prop_assert!(!small.s_b[u] || large.s_b[u], "node {} left the boundary set", u);
            prop_assert!(!small.s_l[u] || large.s_l[u], "node {} left the lost set", u);
        }
    }

    #[test]
    fn hash_chain_distances(seed in proptest::collection::vec(any::<u8>(), 0..16), diam in 1u32..12, junk in proptest::collection::vec(any::<u8>(), 1..40)) {
        let c = HashChain::build(&seed, diam).unwrap();
        for k in 1..=diam {
            prop_assert_eq!(hash_chain_distance(&c.link(k).unwrap().0, &c.anchor(), diam), Some(k));
        }
        prop_assert_eq!(hash_chain_distance(&c.anchor().0, &c.anchor(), diam), Some(diam));
        prop_assert_eq!(hash_chain_distance(&junk, &c.anchor(), diam), None);
        prop_assume!(junk != seed);
        let mut longer = junk.clone();
        longer.push(b'a');
        prop_assert_ne!(digest(&junk), digest(&longer));
    }

    #[test]
    fn expiry_is_monotone(len in 1usize..6, late in 0u64..40, delta_c in 0u64..5) {
        let keys: Vec<KeyPair> = (0..=len as u64).map(|i| KeyPair::generate(Scheme::Model, i)).collect();
        let timing = Timing { delta_c, ..Timing::default() };
        let mut att = LevelAttestation::nil();
        for i in 0..len {
            att = extend(&att, &keys[i], keys[i + 1].public(), &Nid::default(), 100 + i as u64 * timing.round()).0;
        }
        let reader = keys[len].public();
        let ctx = |now| ValidityContext { root_id: *keys[0].public(), now, timing };
        let mut expired = false;
        for now in 100..100 + late + 30 {
            let ok = is_valid_att(&att, reader, &ctx(now), len);
            prop_assert!(!(expired && ok), "valid again at {}", now);
            expired |= !ok;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn baseline_capture_matches_distance_formula((g, targets, root) in placement(), seed: u64) {
        let s = g.with_extra_node(&targets).unwrap();
        let m = g.node_count();
        let report = containment_sets(&s, m, root).unwrap();
        let mut cfg = RunConfig::new(ProtocolKind::Baseline, Some(Behavior::CheatMinLevel), root);
        cfg.seed = seed;
        cfg.max_rounds = 3 * m as u32 + 10;
        let out = run(&s, Some(m), cfg).unwrap();
        let ill = ill_directed_set(out.trace.last());
        for (u, &captured) in ill.iter().enumerate().take(m) {
            if report.baseline_lost[u] {
                prop_assert!(captured, "strictly closer node {} not captured", u);
            }
            if captured {
                prop_assert!(report.baseline_lost[u] || report.baseline_ties[u], "node {} captured outside ties", u);
            }
        }
    }

    #[test]
    fn adversary_free_runs_converge_in_eccentricity_plus_one(g in connected_graph(), root in 0usize..4, seed: u64, baseline: bool) {
        let protocol = if baseline { ProtocolKind::Baseline } else { ProtocolKind::Attested };
        let mut cfg = RunConfig::new(protocol, None, root);
        cfg.seed = seed;
        cfg.stop_when_stable = false;
        let ecc = *bfs_distances(&g, &[root]).unwrap().iter().max().unwrap() as usize;
        cfg.max_rounds = ecc as u32 + 4;
        let out = run(&g, None, cfg).unwrap();
        for k in ecc + 1..out.trace.len() {
            prop_assert!(out.trace.records[k].legitimate.iter().all(|&l| l), "round {}", k);
        }
        prop_assert!(!out.trace.records[ecc].legitimate.iter().all(|&l| l) || ecc == 0);
    }

    #[test]
    fn runs_are_deterministic((g, targets, root) in placement(), seed: u64, b in 0usize..3, adversarial: bool) {
        let s = g.with_extra_node(&targets).unwrap();
        let m = g.node_count();
        let mut cfg = RunConfig::new(ProtocolKind::Attested, Some(Behavior::ALL[b]), root);
        cfg.seed = seed;
        cfg.max_rounds = 2 * m as u32 + 5;
        if adversarial {
            cfg.init = InitKind::Adversarial;
        }
        let a = run(&s, Some(m), cfg.clone()).unwrap();
        let b = run(&s, Some(m), cfg).unwrap();
        prop_assert_eq!(a, b);
    }
}

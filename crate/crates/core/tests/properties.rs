//! Cross-module invariants checked on generated inputs.

use msnlab::backbone::{
    comm_distance, naive_greedy, optimal_exhaustive, random_instance, reverse_greedy, total_load, LoadEvaluator, Placement,
};
use msnlab::calendar::DayRange;
use msnlab::cascade::{random_ic_graph, sigma_exact, IcGraph, NodeId, RandomGraphSpec};
use msnlab::geo::{dpm_fit, DpmConfig};
use msnlab::influence::{greedy_select, ExactEvaluator};
use proptest::prelude::*;

const DAY0: DayRange = DayRange { first: 0, last: 0 };

fn small_graph(nodes: usize, edges: usize, seed: u64) -> IcGraph {
    random_ic_graph(RandomGraphSpec { nodes, edges, p_min: 0.05, p_max: 0.95 }, seed)
}

fn ids(mask: u32, n: usize) -> Vec<NodeId> {
    (0..n as u32).filter(|i| mask & (1 << i) != 0).map(NodeId).collect()
}

/// Plain greedy: recompute every marginal gain each round, ties to the
/// smallest node id, gains compared with a relative tolerance.
fn naive_greedy_oracle(g: &IcGraph, k: usize) -> Vec<NodeId> {
    let mut chosen: Vec<NodeId> = Vec::new();
    for _ in 0..k {
        let mut best: Option<(NodeId, f64)> = None;
        for v in g.node_ids() {
            if chosen.contains(&v) {
                continue;
            }
            let mut with = chosen.clone();
            with.push(v);
            let s = sigma_exact(g, &with).unwrap();
            let better = match best {
                None => true,
                Some((_, b)) => s > b + 1e-9 * b.abs().max(1.0),
            };
            if better {
                best = Some((v, s));
            }
        }
        chosen.push(best.unwrap().0);
    }
    chosen.sort();
    chosen
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn spread_is_monotone_and_submodular(seed in any::<u64>(), a in 0u32..64, b in 0u32..64, v in 0u32..6) {
        let g = small_graph(6, 10, seed);
        let (s, t) = (a & b, a | b); // s is a subset of t
        prop_assume!(t & (1 << v) == 0);
        let f = |m: u32| sigma_exact(&g, &ids(m, 6)).unwrap();
        prop_assert!(f(s) <= f(t) + 1e-12);
        let gain_s = f(s | 1 << v) - f(s);
        let gain_t = f(t | 1 << v) - f(t);
        prop_assert!(gain_s + 1e-12 >= gain_t);
    }

    #[test]
    fn lazy_greedy_matches_plain_greedy(seed in any::<u64>(), nodes in 2usize..=6, k in 1usize..=3) {
        let g = small_graph(nodes, nodes * 2, seed);
        let k = k.min(nodes);
        let mut got = greedy_select(&g, k, &ExactEvaluator).unwrap();
        got.sort();
        prop_assert_eq!(got, naive_greedy_oracle(&g, k));
    }

    #[test]
    fn relay_distance_bounds_shortest_path(seed in any::<u64>(), mask in 1u32..256) {
        let (g, _) = random_instance(8, seed);
        let p = Placement::new((0..8).filter(|i| mask & (1 << i) != 0).collect());
        for a in 0..8 {
            for b in 0..8 {
                let c = comm_distance(a, b, &p, &g).unwrap();
                prop_assert!(c >= g.distance(a, b));
                let on_path = p.servers.iter().any(|&s| g.distance(a, s) + g.distance(s, b) == g.distance(a, b));
                prop_assert_eq!(c == g.distance(a, b), on_path);
            }
        }
    }

    #[test]
    fn more_servers_never_hurt(seed in any::<u64>(), mask in 1u32..512, extra in 0usize..9) {
        let (g, dm) = random_instance(9, seed);
        let base: Vec<usize> = (0..9).filter(|i| mask & (1 << i) != 0).collect();
        let mut sup = base.clone();
        sup.push(extra);
        let (lo, hi) = (Placement::new(sup), Placement::new(base));
        prop_assert!(total_load(&dm, &lo, &g, DAY0).unwrap() <= total_load(&dm, &hi, &g, DAY0).unwrap());
    }

    #[test]
    fn exhaustive_bounds_both_heuristics(seed in any::<u64>(), k in 1usize..=7) {
        let (g, dm) = random_instance(8, seed);
        let eval = LoadEvaluator::new(&g, &dm, DAY0).unwrap();
        let opt = eval.load(&optimal_exhaustive(&g, &dm, k, DAY0).unwrap().servers);
        let rev = reverse_greedy(&g, &dm, k, DAY0).unwrap();
        let fwd = naive_greedy(&g, &dm, k, DAY0).unwrap();
        prop_assert!(opt <= eval.load(&rev.servers));
        prop_assert!(opt <= eval.load(&fwd.servers));
        prop_assert!(opt >= eval.lower_bound());
        prop_assert_eq!(rev, reverse_greedy(&g, &dm, k, DAY0).unwrap());
        prop_assert_eq!(fwd, naive_greedy(&g, &dm, k, DAY0).unwrap());
    }

    #[test]
    fn dpm_masses_cover_observations(
        obs in proptest::collection::vec(proptest::collection::vec(0u64..4, 5), 1..40),
        seed in any::<u64>(),
    ) {
        let cfg = DpmConfig { iterations: 5, seed, ..DpmConfig::default() };
        let fit = dpm_fit(&obs, &cfg).unwrap();
        prop_assert_eq!(fit.masses.iter().sum::<usize>(), obs.len());
        prop_assert!(fit.assignments.iter().all(|&k| k < fit.component_count()));
        prop_assert_eq!(fit.clone(), dpm_fit(&obs, &cfg).unwrap());
    }
}

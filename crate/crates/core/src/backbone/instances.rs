//! Bundled topologies and generated placement instances.

use super::{BackboneGraph, DemandMatrix};
use crate::records::region_code;
use crate::rng::seeded;
use rand::Rng as _;

/// Five clusters of one hub and four members; hubs sit on a long-haul ring.
pub const FIVE_CLUSTER_TOPOLOGY: &str = include_str!("../../data/five_cluster.txt");

/// 34-node province-level mesh with regions `R00..R33`.
pub const PROVINCE_MESH_TOPOLOGY: &str = include_str!("../../data/province_mesh.txt");

pub fn five_cluster_topology() -> BackboneGraph {
    BackboneGraph::parse(FIVE_CLUSTER_TOPOLOGY).expect("bundled topology is valid")
}

pub fn province_mesh_topology() -> BackboneGraph {
    BackboneGraph::parse(PROVINCE_MESH_TOPOLOGY).expect("bundled topology is valid")
}

/// Day-0 demand for [`five_cluster_topology`]: 10 messages between every
/// ordered pair inside a cluster, 1 between every ordered pair of hubs.
pub fn five_cluster_demand() -> DemandMatrix {
    let cluster = |c: usize| -> Vec<String> {
        std::iter::once(format!("C{c}H")).chain((0..4).map(|m| format!("C{c}M{m}"))).collect()
    };
    let mut regions: Vec<String> = (0..5).flat_map(cluster).collect();
    regions.sort();
    let mut m = DemandMatrix::new(regions);
    let idx = |m: &DemandMatrix, code: &str| m.region_index(code).expect("declared region");
    for c in 0..5 {
        let members = cluster(c);
        for a in &members {
            for b in &members {
                if a != b {
                    let (i, j) = (idx(&m, a), idx(&m, b));
                    m.add(i, j, 0, 10);
                }
            }
        }
        for d in 0..5 {
            if c != d {
                let (i, j) = (idx(&m, &format!("C{c}H")), idx(&m, &format!("C{d}H")));
                m.add(i, j, 0, 1);
            }
        }
    }
    m
}

/// Unit-distance ring `N00 - N01 - ... - N00`; node `Nxx` represents
/// region `Rxx`.
pub fn ring_topology(n: usize) -> BackboneGraph {
    let nodes = (0..n).map(|i| (format!("N{i:02}"), Some(region_code(i)))).collect();
    let edges = (0..n)
        .filter(|&i| n > 2 || i + 1 < n)
        .map(|i| (format!("N{i:02}"), format!("N{:02}", (i + 1) % n), 1.0))
        .collect();
    BackboneGraph::new(nodes, edges, None).expect("ring is connected")
}

/// Instance on which forward greedy is myopic.
///
/// Two disjoint demand clusters `{A1, A2}` and `{B1, B2}` each have a local
/// site (`SA`, `SB`) at distance 1, and a mid-point site `M` sits at distance
/// 5 from everyone. `M` is the best single site, but no good pair contains
/// it: forward greedy reaches load 12 at `k = 2` while `{SA, SB}` costs 4.
pub fn trap_instance() -> (BackboneGraph, DemandMatrix) {
    let text = "\
N,A1,A1\nN,A2,A2\nN,B1,B1\nN,B2,B2\nN,M,-\nN,SA,-\nN,SB,-
E,A1,SA,1\nE,A2,SA,1\nE,B1,SB,1\nE,B2,SB,1
E,A1,M,5\nE,A2,M,5\nE,B1,M,5\nE,B2,M,5
C,M\nC,SA\nC,SB\n";
    let g = BackboneGraph::parse(text).expect("trap instance is valid");
    let mut m = DemandMatrix::new(vec!["A1".into(), "A2".into(), "B1".into(), "B2".into()]);
    m.add(0, 1, 0, 1);
    m.add(2, 3, 0, 1);
    (g, m)
}

/// Random connected instance with `n` sites, integer distances in `1..=10`
/// and random day-0 demand between ordered pairs.
///
/// Nodes are `S00..`, each the representative of region `Rxx` and each a
/// candidate site. The graph is a random spanning tree plus `n / 2` chords.
pub fn random_instance(n: usize, seed: u64) -> (BackboneGraph, DemandMatrix) {
    let mut rng = seeded(seed);
    let name = |i: usize| format!("S{i:02}");
    let nodes = (0..n).map(|i| (name(i), Some(region_code(i)))).collect();
    let mut edges = Vec::new();
    for i in 1..n {
        let j = rng.random_range(0..i);
        edges.push((name(i), name(j), rng.random_range(1..=10) as f64));
    }
    if n > 2 {
        for _ in 0..n / 2 {
            let a = rng.random_range(0..n);
            let b = (a + rng.random_range(1..n)) % n;
            edges.push((name(a), name(b), rng.random_range(1..=10) as f64));
        }
    }
    let g = BackboneGraph::new(nodes, edges, None).expect("spanning tree connects every node");
    let mut m = DemandMatrix::new((0..n).map(region_code).collect());
    for a in 0..n {
        for b in 0..n {
            if a != b && rng.random_bool(0.5) {
                let c = rng.random_range(1..=20);
                m.add(a, b, 0, c);
            }
        }
    }
    (g, m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_instances_are_reproducible() {
        let (g1, m1) = random_instance(12, 4);
        let (g2, m2) = random_instance(12, 4);
        assert_eq!(g1, g2);
        assert_eq!(m1, m2);
        assert_eq!(g1.candidates().len(), 12);
        assert_ne!(random_instance(12, 5).1, m1);
    }

    #[test]
    fn five_cluster_demand_maps_onto_topology() {
        let g = five_cluster_topology();
        let m = five_cluster_demand();
        assert!(m.regions.iter().all(|r| g.representative(r).is_some()));
        assert_eq!(m.total(), 5 * 20 * 10 + 20);
    }

    #[test]
    fn ring_shapes() {
        assert_eq!(ring_topology(1).node_count(), 1);
        let r2 = ring_topology(2);
        assert_eq!(r2.distance(0, 1), 1.0);
        let r5 = ring_topology(5);
        assert_eq!(r5.distance(0, 2), 2.0);
        assert_eq!(r5.distance(0, 4), 1.0);
    }
}

//! Backbone traffic: region-pair demand, day-type traffic prediction and
//! server placement under a single-relay routing model.
//!
//! Traffic between two regions is routed through exactly one server, so its
//! communication distance under placement `P` is `min_{s in P} d(a, s) + d(s, b)`
//! with `d` the shortest-path distance between the regions' representative
//! nodes. The load of a placement is demand-weighted distance.

mod demand;
mod instances;
mod placement;
mod traffic;

pub use demand::{derive_demand, DemandMatrix};
pub use instances::{
    five_cluster_demand, five_cluster_topology, province_mesh_topology, random_instance, ring_topology,
    trap_instance, FIVE_CLUSTER_TOPOLOGY, PROVINCE_MESH_TOPOLOGY,
};
pub use placement::{
    comm_distance, cost_curve, naive_greedy, optimal_exhaustive, reverse_greedy, total_load, LoadEvaluator,
    Placement, Strategy, MAX_ENUMERATION,
};
pub use traffic::{evaluate_prediction, fit_traffic_model, PredictionError, TrafficModel, DEFAULT_LAMBDA};

use std::collections::{BTreeMap, HashMap};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackboneError {
    #[error("line {0}: {1}")]
    Parse(usize, String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("duplicate node `{0}`")]
    DuplicateNode(String),
    #[error("edge {0}-{1} must have a positive finite distance")]
    BadDistance(String, String),
    #[error("node `{0}` is disconnected from the rest of the graph")]
    DisconnectedNode(String),
    #[error("no candidate sites")]
    NoCandidates,
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("placement is empty")]
    EmptyPlacement,
    #[error("region `{0}` has demand but no representative node")]
    UnmappedRegion(String),
    #[error("k = {k} is outside 1..={candidates}")]
    KTooLarge { k: usize, candidates: usize },
    #[error("{0} placements exceed the enumeration limit")]
    EnumerationTooLarge(u128),
    #[error("train window is empty or has no demand days")]
    EmptyTrainWindow,
    #[error("test window is empty")]
    EmptyTestWindow,
    #[error("train and test windows overlap")]
    WindowOverlap,
    #[error("smoothing weight {0} outside [0, 1]")]
    InvalidLambda(f64),
    #[error("demand file line {0}: {1}")]
    DemandParse(usize, String),
}

/// Location graph with additive distances. Nodes are kept in ascending id
/// order, so index order is lexicographic id order.
#[derive(Debug, Clone, PartialEq)]
pub struct BackboneGraph {
    ids: Vec<String>,
    region: Vec<Option<String>>,
    adjacent: Vec<Vec<(usize, f64)>>,
    candidates: Vec<usize>,
    reps: BTreeMap<String, usize>,
    dist: Vec<f64>,
}

impl BackboneGraph {
    /// Builds a graph from `(id, region)` nodes, `(a, b, distance)`
    /// undirected edges and an optional candidate list (default: every
    /// node). The first node declared for a region represents it.
    pub fn new(
        nodes: Vec<(String, Option<String>)>,
        edges: Vec<(String, String, f64)>,
        candidates: Option<Vec<String>>,
    ) -> Result<Self, BackboneError> {
        if nodes.is_empty() {
            return Err(BackboneError::EmptyGraph);
        }
        let mut reps_by_name: BTreeMap<String, String> = BTreeMap::new();
        for (id, region) in &nodes {
            if let Some(r) = region {
                reps_by_name.entry(r.clone()).or_insert_with(|| id.clone());
            }
        }
        let mut sorted = nodes;
        sorted.sort_by(|a, b| a.0.cmp(&b.0));
        if let Some(w) = sorted.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(BackboneError::DuplicateNode(w[0].0.clone()));
        }
        let ids: Vec<String> = sorted.iter().map(|(i, _)| i.clone()).collect();
        let region: Vec<Option<String>> = sorted.into_iter().map(|(_, r)| r).collect();
        let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let lookup = |s: &str| index.get(s).copied().ok_or_else(|| BackboneError::UnknownNode(s.to_string()));

        let n = ids.len();
        let mut adjacent = vec![Vec::new(); n];
        let mut dist = vec![f64::INFINITY; n * n];
        for i in 0..n {
            dist[i * n + i] = 0.0;
        }
        for (a, b, d) in &edges {
            let (i, j) = (lookup(a)?, lookup(b)?);
            if !(d.is_finite() && *d > 0.0) || i == j {
                return Err(BackboneError::BadDistance(a.clone(), b.clone()));
            }
            adjacent[i].push((j, *d));
            adjacent[j].push((i, *d));
            if *d < dist[i * n + j] {
                dist[i * n + j] = *d;
                dist[j * n + i] = *d;
            }
        }
        for a in adjacent.iter_mut() {
            a.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)));
        }
        // Floyd-Warshall.
        for k in 0..n {
            for i in 0..n {
                let dik = dist[i * n + k];
                if !dik.is_finite() {
                    continue;
                }
                for j in 0..n {
                    let cand = dik + dist[k * n + j];
                    if cand < dist[i * n + j] {
                        dist[i * n + j] = cand;
                    }
                }
            }
        }
        if let Some(j) = (0..n).find(|&j| !dist[j].is_finite()) {
            return Err(BackboneError::DisconnectedNode(ids[j].clone()));
        }
        let mut candidates = match candidates {
            None => (0..n).collect(),
            Some(cs) => cs.iter().map(|c| lookup(c)).collect::<Result<Vec<_>, _>>()?,
        };
        candidates.sort_unstable();
        candidates.dedup();
        if candidates.is_empty() {
            return Err(BackboneError::NoCandidates);
        }
        let reps = reps_by_name
            .into_iter()
            .map(|(r, id)| (r, index[id.as_str()]))
            .collect();
        Ok(BackboneGraph { ids, region, adjacent, candidates, reps, dist })
    }

    /// Parses `N,node_id,region_code` / `E,node_a,node_b,distance` lines, with
    /// optional `C,node_id` lines restricting the candidate sites. A region
    /// code of `-` leaves a node untagged; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self, BackboneError> {
        let mut nodes = Vec::new();
        let mut edges = Vec::new();
        let mut cands = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = |m: &str| BackboneError::Parse(i + 1, format!("{m}: `{line}`"));
            match f.as_slice() {
                ["N", id, region] if !id.is_empty() && !region.is_empty() => {
                    let r = (*region != "-").then(|| region.to_string());
                    nodes.push((id.to_string(), r));
                }
                ["E", a, b, d] => {
                    let d: f64 = d.parse().map_err(|_| bad("bad distance"))?;
                    edges.push((a.to_string(), b.to_string(), d));
                }
                ["C", id] if !id.is_empty() => cands.push(id.to_string()),
                _ => return Err(bad("expected N,id,region | E,a,b,distance | C,id")),
            }
        }
        BackboneGraph::new(nodes, edges, (!cands.is_empty()).then_some(cands))
    }

    /// Renders the graph in the text format read by [`BackboneGraph::parse`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        // Representatives first so a re-parse keeps them.
        let mut order: Vec<usize> = self.reps.values().copied().collect();
        order.sort_unstable();
        order.dedup();
        order.extend((0..self.ids.len()).filter(|i| !self.reps.values().any(|r| r == i)));
        for i in order {
            s.push_str(&format!("N,{},{}\n", self.ids[i], self.region[i].as_deref().unwrap_or("-")));
        }
        for (i, adj) in self.adjacent.iter().enumerate() {
            for &(j, d) in adj {
                if i < j {
                    s.push_str(&format!("E,{},{},{}\n", self.ids[i], self.ids[j], d));
                }
            }
        }
        if self.candidates.len() != self.ids.len() {
            for &c in &self.candidates {
                s.push_str(&format!("C,{}\n", self.ids[c]));
            }
        }
        s
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn index(&self, id: &str) -> Option<usize> {
        self.ids.binary_search_by(|s| s.as_str().cmp(id)).ok()
    }

    pub fn region_of(&self, i: usize) -> Option<&str> {
        self.region[i].as_deref()
    }

    pub fn candidates(&self) -> &[usize] {
        &self.candidates
    }

    /// Representative node of a region code.
    pub fn representative(&self, region: &str) -> Option<usize> {
        self.reps.get(region).copied()
    }

    pub fn representatives(&self) -> &BTreeMap<String, usize> {
        &self.reps
    }

    /// Shortest-path distance.
    #[inline]
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        self.dist[a * self.ids.len() + b]
    }

    pub fn are_adjacent(&self, a: usize, b: usize) -> bool {
        self.adjacent[a].iter().any(|&(j, _)| j == b)
    }

    pub fn neighbours(&self, a: usize) -> impl Iterator<Item = usize> + '_ {
        let adj = &self.adjacent[a];
        adj.iter()
            .enumerate()
            .filter(move |&(i, &(j, _))| i == 0 || adj[i - 1].0 != j)
            .map(|(_, &(j, _))| j)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn four_cycle() -> BackboneGraph {
        BackboneGraph::parse("N,A,RA\nN,B,RB\nN,C,RC\nN,D,RD\nE,A,B,1\nE,B,C,1\nE,C,D,1\nE,D,A,1\n").unwrap()
    }

    #[test]
    fn parses_and_computes_distances() {
        let g = four_cycle();
        assert_eq!(g.node_count(), 4);
        let (a, c, d) = (g.index("A").unwrap(), g.index("C").unwrap(), g.index("D").unwrap());
        assert_eq!(g.distance(a, c), 2.0);
        assert_eq!(g.distance(d, a), 1.0);
        assert_eq!(g.representative("RC"), Some(c));
        assert_eq!(g.candidates().len(), 4);
        assert!(g.are_adjacent(a, d));
        assert_eq!(BackboneGraph::parse(&g.to_text()).unwrap(), g);
    }

    #[test]
    fn rejects_bad_graphs() {
        assert!(matches!(BackboneGraph::parse("N,A,R\nN,B,R\n"), Err(BackboneError::DisconnectedNode(_))));
        assert!(matches!(BackboneGraph::parse("N,A,R\nN,B,R\nE,A,B,0\n"), Err(BackboneError::BadDistance(..))));
        assert!(matches!(BackboneGraph::parse("N,A,R\nE,A,Z,1\n"), Err(BackboneError::UnknownNode(_))));
        assert!(matches!(BackboneGraph::parse("X,1\n"), Err(BackboneError::Parse(1, _))));
        assert!(matches!(BackboneGraph::parse("N,A,R\nN,A,S\n"), Err(BackboneError::DuplicateNode(_))));
        assert!(matches!(BackboneGraph::parse("# nothing\n"), Err(BackboneError::EmptyGraph)));
    }

    #[test]
    fn candidate_lines_restrict_sites_and_first_node_represents() {
        let g = BackboneGraph::parse("N,Z,R1\nN,A,R1\nN,B,-\nE,Z,A,2\nE,A,B,2\nC,B\n").unwrap();
        assert_eq!(g.candidates(), &[g.index("B").unwrap()]);
        assert_eq!(g.representative("R1"), g.index("Z"));
        assert_eq!(g.region_of(g.index("B").unwrap()), None);
        assert_eq!(BackboneGraph::parse(&g.to_text()).unwrap(), g);
    }

    #[test]
    fn bundled_topologies_load() {
        let g = five_cluster_topology();
        assert_eq!(g.node_count(), 25);
        let p = province_mesh_topology();
        assert_eq!(p.node_count(), 34);
        assert_eq!(p.representatives().len(), 34);
    }
}

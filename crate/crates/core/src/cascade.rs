//! Independent Cascade model: graph, edge-probability estimation from
//! records, cascade simulation and spread estimation.

use crate::records::PostViewRecord;
use crate::rng::{seeded, unit_rng, Rng};
use rand::Rng as _;
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use thiserror::Error;

/// Largest number of uncertain edges `sigma_exact` will enumerate.
pub const MAX_EXACT_EDGES: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CascadeError {
    #[error("unknown seed node `{0}`")]
    UnknownSeedNode(String),
    #[error("self-loop on `{0}`")]
    SelfLoop(String),
    #[error("edge {0} -> {1} has probability {2} outside [0, 1]")]
    InvalidProbability(String, String, f64),
    #[error("duplicate edge {0} -> {1}")]
    DuplicateEdge(String, String),
    #[error("{0} uncertain edges exceed the enumeration limit of {MAX_EXACT_EDGES}")]
    TooManyEdges(usize),
    #[error("n_sims must be at least 1")]
    NoSimulations,
    #[error("line {0}: {1}")]
    Parse(usize, String),
}

/// Dense node handle; ids follow ascending user-id order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Directed influence graph with per-edge activation probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct IcGraph {
    names: Vec<String>,
    out: Vec<Vec<(NodeId, f64)>>,
    edge_count: usize,
}

impl IcGraph {
    /// Builds a graph from node names and `(u, v, p)` edges. Edge endpoints
    /// are added as nodes implicitly.
    pub fn from_edges<N, E, S>(nodes: N, edges: E) -> Result<IcGraph, CascadeError>
    where
        N: IntoIterator<Item = S>,
        E: IntoIterator<Item = (S, S, f64)>,
        S: AsRef<str>,
    {
        let edges: Vec<(String, String, f64)> = edges
            .into_iter()
            .map(|(u, v, p)| (u.as_ref().to_string(), v.as_ref().to_string(), p))
            .collect();
        let mut set: BTreeSet<String> = nodes.into_iter().map(|s| s.as_ref().to_string()).collect();
        for (u, v, _) in &edges {
            set.insert(u.clone());
            set.insert(v.clone());
        }
        let names: Vec<String> = set.into_iter().collect();
        let index: HashMap<&str, u32> = names.iter().enumerate().map(|(i, s)| (s.as_str(), i as u32)).collect();
        let mut out = vec![Vec::new(); names.len()];
        for (u, v, p) in &edges {
            if u == v {
                return Err(CascadeError::SelfLoop(u.clone()));
            }
            if !(0.0..=1.0).contains(p) {
                return Err(CascadeError::InvalidProbability(u.clone(), v.clone(), *p));
            }
            out[index[u.as_str()] as usize].push((NodeId(index[v.as_str()]), *p));
        }
        for (i, adj) in out.iter_mut().enumerate() {
            adj.sort_by_key(|&(v, _)| v);
            if let Some(w) = adj.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(CascadeError::DuplicateEdge(names[i].clone(), names[w[0].0.index()].clone()));
            }
        }
        Ok(IcGraph { names, out, edge_count: edges.len() })
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, id: NodeId) -> &str {
        &self.names[id.index()]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn id(&self, name: &str) -> Option<NodeId> {
        self.names
            .binary_search_by(|n| n.as_str().cmp(name))
            .ok()
            .map(|i| NodeId(i as u32))
    }

    /// Resolves user ids to node handles.
    pub fn resolve<S: AsRef<str>>(&self, users: &[S]) -> Result<Vec<NodeId>, CascadeError> {
        users
            .iter()
            .map(|u| self.id(u.as_ref()).ok_or_else(|| CascadeError::UnknownSeedNode(u.as_ref().to_string())))
            .collect()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.names.len() as u32).map(NodeId)
    }

    pub fn out_edges(&self, u: NodeId) -> &[(NodeId, f64)] {
        &self.out[u.index()]
    }

    pub fn probability(&self, u: NodeId, v: NodeId) -> Option<f64> {
        self.out[u.index()]
            .binary_search_by_key(&v, |&(w, _)| w)
            .ok()
            .map(|i| self.out[u.index()][i].1)
    }

    /// All edges in `(u, v)` order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId, f64)> + '_ {
        self.out
            .iter()
            .enumerate()
            .flat_map(|(u, adj)| adj.iter().map(move |&(v, p)| (NodeId(u as u32), v, p)))
    }

    /// TSV `u  v  p`, one edge per line.
    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        for (u, v, p) in self.edges() {
            s.push_str(&format!("{}\t{}\t{}\n", self.name(u), self.name(v), p));
        }
        s
    }

    /// Reads the TSV written by [`IcGraph::to_tsv`]; `#` lines are comments.
    pub fn from_tsv(text: &str) -> Result<IcGraph, CascadeError> {
        let mut edges = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split('\t').map(str::trim).collect();
            if f.len() != 3 || f[0].is_empty() || f[1].is_empty() {
                return Err(CascadeError::Parse(i + 1, format!("expected `u<TAB>v<TAB>p`, got `{line}`")));
            }
            let p: f64 = f[2]
                .parse()
                .map_err(|_| CascadeError::Parse(i + 1, format!("bad probability `{}`", f[2])))?;
            edges.push((f[0].to_string(), f[1].to_string(), p));
        }
        IcGraph::from_edges(Vec::<String>::new(), edges)
    }
}

/// Fits `p(u, v)` as the share of pages `v` viewed from `u` that `v` then
/// reposted (it owns a later view of the same page).
///
/// With `laplace = Some(a)` the ratio becomes `(reposts + a) / (views + 2a)`.
pub fn estimate_edge_probabilities(records: &[PostViewRecord], laplace: Option<f64>) -> IcGraph {
    // (pid, viewer, owner) -> earliest view time
    let mut first_view: BTreeMap<(&str, &str, &str), u64> = BTreeMap::new();
    // (pid, owner) -> latest time someone viewed from owner
    let mut last_as_owner: HashMap<(&str, &str), u64> = HashMap::new();
    let mut nodes: BTreeSet<&str> = BTreeSet::new();
    for r in records {
        nodes.insert(&r.u1);
        nodes.insert(&r.u2);
        let e = last_as_owner.entry((&r.pid, &r.u1)).or_insert(r.t);
        *e = (*e).max(r.t);
        if r.is_self_view() {
            continue;
        }
        let e = first_view.entry((&r.pid, &r.u2, &r.u1)).or_insert(r.t);
        *e = (*e).min(r.t);
    }
    let mut counts: BTreeMap<(&str, &str), (u64, u64)> = BTreeMap::new();
    for (&(pid, viewer, owner), &t) in &first_view {
        let reposted = last_as_owner.get(&(pid, viewer)).is_some_and(|&last| last > t);
        let c = counts.entry((owner, viewer)).or_insert((0, 0));
        c.0 += 1;
        c.1 += u64::from(reposted);
    }
    let edges = counts.into_iter().map(|((u, v), (views, reposts))| {
        let p = match laplace {
            Some(a) => (reposts as f64 + a) / (views as f64 + 2.0 * a),
            None => reposts as f64 / views as f64,
        };
        (u, v, p)
    });
    IcGraph::from_edges(nodes, edges).expect("estimated graph is well formed")
}

/// Reusable buffers for repeated cascades on one graph.
pub(crate) struct CascadeScratch {
    stamp: Vec<u32>,
    epoch: u32,
    queue: Vec<NodeId>,
}

impl CascadeScratch {
    pub(crate) fn new(n: usize) -> Self {
        CascadeScratch { stamp: vec![0; n], epoch: 0, queue: Vec::new() }
    }

    fn next_epoch(&mut self) {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
        self.queue.clear();
    }

    /// Runs one cascade and leaves the activation order in `self.queue`.
    pub(crate) fn run(&mut self, graph: &IcGraph, seeds: &[NodeId], rng: &mut Rng) -> usize {
        self.next_epoch();
        for &s in seeds {
            if self.stamp[s.index()] != self.epoch {
                self.stamp[s.index()] = self.epoch;
                self.queue.push(s);
            }
        }
        let mut head = 0;
        while head < self.queue.len() {
            let u = self.queue[head];
            head += 1;
            for &(v, p) in graph.out_edges(u) {
                if self.stamp[v.index()] == self.epoch {
                    continue;
                }
                if rng.random::<f64>() < p {
                    self.stamp[v.index()] = self.epoch;
                    self.queue.push(v);
                }
            }
        }
        self.queue.len()
    }
}

fn check_seeds(graph: &IcGraph, seeds: &[NodeId]) -> Result<Vec<NodeId>, CascadeError> {
    let n = graph.node_count();
    if let Some(bad) = seeds.iter().find(|s| s.index() >= n) {
        return Err(CascadeError::UnknownSeedNode(format!("#{}", bad.0)));
    }
    let mut s = seeds.to_vec();
    s.sort_unstable();
    s.dedup();
    Ok(s)
}

/// One IC run. Seeds activate first in ascending id order; activation then
/// proceeds breadth-first, each newly active node flipping one coin per
/// inactive out-neighbour in ascending id order.
pub fn simulate_cascade(graph: &IcGraph, seeds: &[NodeId], rng_seed: u64) -> Result<BTreeSet<NodeId>, CascadeError> {
    let seeds = check_seeds(graph, seeds)?;
    let mut scratch = CascadeScratch::new(graph.node_count());
    scratch.run(graph, &seeds, &mut seeded(rng_seed));
    Ok(scratch.queue.iter().copied().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpreadEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_sims: u64,
}

const SIGMA_CHUNK: u64 = 2048;

/// Monte Carlo estimate of the expected spread of `seeds`.
///
/// Run `i` uses the generator `unit_rng(seed, i)`; per-chunk integer sums
/// are combined by addition, so the result does not depend on scheduling.
pub fn sigma(graph: &IcGraph, seeds: &[NodeId], n_sims: u64, seed: u64) -> Result<SpreadEstimate, CascadeError> {
    if n_sims == 0 {
        return Err(CascadeError::NoSimulations);
    }
    let seeds = check_seeds(graph, seeds)?;
    let chunks = n_sims.div_ceil(SIGMA_CHUNK) as usize;
    let partial = crate::par::map_range(chunks, |c| {
        let mut scratch = CascadeScratch::new(graph.node_count());
        let lo = c as u64 * SIGMA_CHUNK;
        let hi = (lo + SIGMA_CHUNK).min(n_sims);
        let (mut s, mut s2) = (0u128, 0u128);
        for i in lo..hi {
            let k = scratch.run(graph, &seeds, &mut unit_rng(seed, i)) as u128;
            s += k;
            s2 += k * k;
        }
        (s, s2)
    });
    let (sum, sum_sq) = partial.into_iter().fold((0u128, 0u128), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok(summarize(sum, sum_sq, n_sims))
}

pub(crate) fn summarize(sum: u128, sum_sq: u128, n: u64) -> SpreadEstimate {
    let nf = n as f64;
    let mean = sum as f64 / nf;
    let stderr = if n > 1 {
        // n * sum_sq - sum^2 is exact in integers.
        let num = (n as u128 * sum_sq).saturating_sub(sum * sum) as f64;
        (num / (nf * (nf - 1.0)) / nf).sqrt()
    } else {
        0.0
    };
    SpreadEstimate { mean, stderr, n_sims: n }
}

/// Exact expected spread by enumerating live-edge realizations.
///
/// Edges with `p = 0` or `p = 1` are fixed; the remaining edges whose tail
/// can be reached from `seeds` are enumerated, which must number at most
/// [`MAX_EXACT_EDGES`].
pub fn sigma_exact(graph: &IcGraph, seeds: &[NodeId]) -> Result<f64, CascadeError> {
    let seeds = check_seeds(graph, seeds)?;
    let n = graph.node_count();
    // Nodes reachable from the seeds when every edge with p > 0 is live.
    let mut reach = vec![false; n];
    let mut stack: Vec<NodeId> = seeds.clone();
    for s in &seeds {
        reach[s.index()] = true;
    }
    while let Some(u) = stack.pop() {
        for &(v, p) in graph.out_edges(u) {
            if p > 0.0 && !reach[v.index()] {
                reach[v.index()] = true;
                stack.push(v);
            }
        }
    }
    // Per-node adjacency split into fixed-live edges and enumerated edges.
    let mut uncertain: Vec<(NodeId, NodeId, f64)> = Vec::new();
    let mut live: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    let mut slot: Vec<Vec<(usize, NodeId)>> = vec![Vec::new(); n];
    for (u, v, p) in graph.edges() {
        if !reach[u.index()] || p == 0.0 {
            continue;
        }
        if p == 1.0 {
            live[u.index()].push(v);
        } else {
            slot[u.index()].push((uncertain.len(), v));
            uncertain.push((u, v, p));
        }
    }
    let m = uncertain.len();
    if m > MAX_EXACT_EDGES {
        return Err(CascadeError::TooManyEdges(m));
    }
    let mut seen = vec![0u32; n];
    let mut total = 0.0;
    let mut queue: Vec<NodeId> = Vec::with_capacity(n);
    for mask in 0u32..(1u32 << m) {
        let mut prob = 1.0;
        for (i, &(_, _, p)) in uncertain.iter().enumerate() {
            prob *= if mask >> i & 1 == 1 { p } else { 1.0 - p };
        }
        let stamp = mask + 1;
        queue.clear();
        for &s in &seeds {
            seen[s.index()] = stamp;
            queue.push(s);
        }
        let mut head = 0;
        while head < queue.len() {
            let u = queue[head];
            head += 1;
            for &v in &live[u.index()] {
                if seen[v.index()] != stamp {
                    seen[v.index()] = stamp;
                    queue.push(v);
                }
            }
            for &(i, v) in &slot[u.index()] {
                if mask >> i & 1 == 1 && seen[v.index()] != stamp {
                    seen[v.index()] = stamp;
                    queue.push(v);
                }
            }
        }
        total += prob * queue.len() as f64;
    }
    Ok(total)
}

/// Shape of a seeded random test graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomGraphSpec {
    pub nodes: usize,
    pub edges: usize,
    pub p_min: f64,
    pub p_max: f64,
}

/// Random directed graph without self-loops or parallel edges, probabilities
/// uniform in `[p_min, p_max]`. Nodes are named `n00`, `n01`, ...
pub fn random_ic_graph(spec: RandomGraphSpec, seed: u64) -> IcGraph {
    let mut rng = seeded(seed);
    let n = spec.nodes;
    let width = n.saturating_sub(1).to_string().len().max(2);
    let names: Vec<String> = (0..n).map(|i| format!("n{i:0width$}")).collect();
    let max_edges = n * n.saturating_sub(1);
    let target = spec.edges.min(max_edges);
    let mut chosen: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut edges = Vec::with_capacity(target);
    while chosen.len() < target {
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        if u != v && chosen.insert((u, v)) {
            let p = spec.p_min + (spec.p_max - spec.p_min) * rng.random::<f64>();
            edges.push((names[u].clone(), names[v].clone(), p));
        }
    }
    IcGraph::from_edges(names.clone(), edges).expect("random graph is well formed")
}

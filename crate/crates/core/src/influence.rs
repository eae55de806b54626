//! Key-user selection under the IC model.
//!
//! Three selectors share one graph type:
//!
//! * [`voting_select`]: sample `r1` live-edge diffusion trees, cast `r2`
//!   votes in each (a uniformly drawn node votes for every proper ancestor),
//!   and return the `k` most-voted users, or pick them one at a time with
//!   already-reached voters withdrawn ([`SelectionRule`]).
//! * [`greedy_select`]: lazy-evaluation (CELF) greedy over a pluggable
//!   [`SpreadEvaluator`].
//! * [`optimal_select`]: exhaustive search, for small instances.
//!
//! Trees are sampled independently from live-edge realizations; the tree
//! root is drawn with probability proportional to its reachable-set size in
//! the realization, which favours the large trees that dominate diffusion.

use crate::cascade::{sigma, sigma_exact, CascadeError, IcGraph, NodeId};
use crate::diffusion::DiffusionForest;
use crate::rng::{mix_seed, seeded, unit_rng, Rng};
use petgraph::graph::DiGraph;
use rand::Rng as _;
use serde::Serialize;
use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use thiserror::Error;

/// Reported stable region of the tree count (`R1 > 200`).
pub const R1_STABLE_REFERENCE: u64 = 200;
/// Reported stable region of the vote count (`log10(R2) > 4`).
pub const LOG10_R2_STABLE_REFERENCE: f64 = 4.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InfluenceError {
    #[error("k = {k} exceeds the {nodes} available nodes")]
    KTooLarge { k: usize, nodes: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Cascade(#[from] CascadeError),
}

/// How a sampled tree's root is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RootMode {
    /// Proportional to reachable-set size in the realization.
    ReachWeighted,
    /// Uniform over nodes; ablation mode.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VotingParams {
    pub k: usize,
    pub r1: u64,
    pub r2: u64,
    pub seed: u64,
    pub root_mode: RootMode,
    pub selection: SelectionRule,
}

impl Default for VotingParams {
    fn default() -> Self {
        VotingParams {
            k: 100,
            r1: 500,
            r2: 100_000,
            seed: crate::rng::DEFAULT_SEED,
            root_mode: RootMode::ReachWeighted,
            selection: SelectionRule::TopTally,
        }
    }
}

impl VotingParams {
    fn validate(&self) -> Result<(), InfluenceError> {
        if self.k == 0 || self.r1 == 0 || self.r2 == 0 {
            return Err(InfluenceError::InvalidParams("k, r1 and r2 must all be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct VoteTally {
    pub votes: BTreeMap<String, u64>,
    pub trees_sampled: u64,
}

impl VoteTally {
    pub fn get(&self, user: &str) -> u64 {
        self.votes.get(user).copied().unwrap_or(0)
    }
}

/// A tree in topological layout: `order[0]` is the root and every node's
/// parent appears before it.
#[derive(Debug, Clone)]
struct TreeLayout {
    order: Vec<NodeId>,
    /// Position of each node's parent in `order`; `u32::MAX` for the root.
    parent: Vec<u32>,
}

const NO_PARENT: u32 = u32::MAX;

/// Draws `r2` uniform node positions and returns, per position, the number
/// of draws that landed strictly below it.
fn cast_votes(parent: &[u32], r2: u64, rng: &mut Rng) -> Vec<u64> {
    tally_from_hits(parent, &cast_hits(parent.len(), r2, rng))
}

/// `tally[x]` = hits in the proper subtree of `x`.
fn tally_from_hits(parent: &[u32], hits: &[u64]) -> Vec<u64> {
    let mut sub = hits.to_vec();
    for i in (1..parent.len()).rev() {
        let p = parent[i];
        if p != NO_PARENT {
            sub[p as usize] += sub[i];
        }
    }
    sub.iter().zip(hits).map(|(s, h)| s - h).collect()
}

/// Live-edge realization in CSR form.
struct Realization {
    start: Vec<usize>,
    targets: Vec<u32>,
}

impl Realization {
    fn sample(graph: &IcGraph, rng: &mut Rng) -> Self {
        let mut start = Vec::with_capacity(graph.node_count() + 1);
        let mut targets = Vec::new();
        start.push(0);
        for u in graph.node_ids() {
            for &(v, p) in graph.out_edges(u) {
                if rng.random::<f64>() < p {
                    targets.push(v.0);
                }
            }
            start.push(targets.len());
        }
        Realization { start, targets }
    }

    fn out(&self, u: usize) -> &[u32] {
        &self.targets[self.start[u]..self.start[u + 1]]
    }

    /// Reachable-set size (including the node itself) of every node.
    fn reach_sizes(&self) -> Vec<u64> {
        let n = self.start.len() - 1;
        let mut g = DiGraph::<(), ()>::with_capacity(n, self.targets.len());
        for _ in 0..n {
            g.add_node(());
        }
        for u in 0..n {
            for &v in self.out(u) {
                g.add_edge((u as u32).into(), v.into(), ());
            }
        }
        // Components come back in reverse topological order, so successors
        // of a component are finished before the component itself.
        let sccs = petgraph::algo::tarjan_scc(&g);
        let words = n.div_ceil(64);
        let mut comp_of = vec![0usize; n];
        for (c, scc) in sccs.iter().enumerate() {
            for v in scc {
                comp_of[v.index()] = c;
            }
        }
        let mut bits = vec![0u64; sccs.len() * words];
        let mut size = vec![0u64; sccs.len()];
        for (c, scc) in sccs.iter().enumerate() {
            let (done, rest) = bits.split_at_mut(c * words);
            let mine = &mut rest[..words];
            for v in scc {
                mine[v.index() / 64] |= 1 << (v.index() % 64);
            }
            for v in scc {
                for &w in self.out(v.index()) {
                    let d = comp_of[w as usize];
                    if d != c {
                        let theirs = &done[d * words..(d + 1) * words];
                        for (a, b) in mine.iter_mut().zip(theirs) {
                            *a |= *b;
                        }
                    }
                }
            }
            size[c] = mine.iter().map(|w| w.count_ones() as u64).sum();
        }
        (0..n).map(|v| size[comp_of[v]]).collect()
    }

    fn bfs_tree(&self, root: usize) -> TreeLayout {
        let n = self.start.len() - 1;
        let mut pos = vec![NO_PARENT; n];
        let mut order = vec![NodeId(root as u32)];
        let mut parent = vec![NO_PARENT];
        pos[root] = 0;
        let mut head = 0;
        while head < order.len() {
            let u = order[head].index();
            let mut next: Vec<u32> = self.out(u).iter().copied().filter(|&v| pos[v as usize] == NO_PARENT).collect();
            next.sort_unstable();
            for v in next {
                if pos[v as usize] == NO_PARENT {
                    pos[v as usize] = order.len() as u32;
                    order.push(NodeId(v));
                    parent.push(head as u32);
                }
            }
            head += 1;
        }
        TreeLayout { order, parent }
    }
}

fn sample_layout(graph: &IcGraph, mode: RootMode, rng: &mut Rng) -> TreeLayout {
    let real = Realization::sample(graph, rng);
    let n = graph.node_count();
    let root = match mode {
        RootMode::Uniform => rng.random_range(0..n),
        RootMode::ReachWeighted => {
            let sizes = real.reach_sizes();
            let total: u64 = sizes.iter().sum();
            let mut r = rng.random_range(0..total);
            sizes
                .iter()
                .position(|&s| {
                    if r < s {
                        true
                    } else {
                        r -= s;
                        false
                    }
                })
                .expect("draw below total")
        }
    };
    real.bfs_tree(root)
}

fn layout_to_forest(graph: &IcGraph, layout: &TreeLayout, pid: &str) -> DiffusionForest {
    let mut f = DiffusionForest { pid: pid.to_string(), ..DiffusionForest::default() };
    for (i, &node) in layout.order.iter().enumerate() {
        let name = graph.name(node).to_string();
        match layout.parent[i] {
            NO_PARENT => {
                f.roots.insert(name);
            }
            p => {
                f.parent.insert(name, graph.name(layout.order[p as usize]).to_string());
            }
        }
    }
    f
}

/// Samples one diffusion tree: a live-edge realization, a root (by
/// `mode`), and the breadth-first tree from that root inside the
/// realization. Panics on an empty graph.
pub fn sample_diffusion_tree(graph: &IcGraph, seed: u64, mode: RootMode) -> DiffusionForest {
    assert!(!graph.is_empty(), "cannot sample a tree from an empty graph");
    let layout = sample_layout(graph, mode, &mut seeded(seed));
    layout_to_forest(graph, &layout, "sampled")
}

fn forest_layout(tree: &DiffusionForest) -> (Vec<&str>, Vec<u32>) {
    let children = tree.children();
    let mut order: Vec<&str> = Vec::with_capacity(tree.node_count());
    let mut parent: Vec<u32> = Vec::with_capacity(tree.node_count());
    for r in &tree.roots {
        order.push(r);
        parent.push(NO_PARENT);
    }
    let mut head = 0;
    while head < order.len() {
        if let Some(cs) = children.get(order[head]) {
            for c in cs {
                order.push(c);
                parent.push(head as u32);
            }
        }
        head += 1;
    }
    (order, parent)
}

/// Tallies the votes cast by an explicit sequence of drawn voters.
pub fn tally_draws(tree: &DiffusionForest, draws: &[&str]) -> VoteTally {
    let (order, parent) = forest_layout(tree);
    let pos: BTreeMap<&str, usize> = order.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    let mut hits = vec![0u64; order.len()];
    for d in draws {
        hits[pos[d]] += 1;
    }
    let tally = tally_from_hits(&parent, &hits);
    VoteTally {
        votes: order.iter().zip(tally).map(|(s, v)| (s.to_string(), v)).collect(),
        trees_sampled: 1,
    }
}

/// Casts `r2` votes on `tree`: each vote draws a node uniformly and credits
/// every proper ancestor of it.
pub fn vote_on_tree(tree: &DiffusionForest, r2: u64, seed: u64) -> VoteTally {
    let (order, parent) = forest_layout(tree);
    if order.is_empty() {
        return VoteTally { votes: BTreeMap::new(), trees_sampled: 1 };
    }
    let tally = cast_votes(&parent, r2, &mut seeded(seed));
    VoteTally {
        votes: order.iter().zip(tally).map(|(s, v)| (s.to_string(), v)).collect(),
        trees_sampled: 1,
    }
}

/// How the `k` users are read off the vote tallies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionRule {
    /// The `k` highest raw tallies. Neighbouring users in the same trees
    /// collect nearly the same votes, so the set tends to be redundant.
    #[default]
    TopTally,
    /// Picks one user at a time; after each pick, draws that landed in the
    /// picked user's subtrees are withdrawn, so later picks are credited only
    /// for voters not yet reached.
    Discounted,
}

/// Sums votes over `r1` sampled trees and returns `k` users chosen by
/// `params.selection` (ties by ascending user id) with the full raw tally.
///
/// Tree `i` draws everything from `unit_rng(params.seed, i)`.
pub fn voting_select(graph: &IcGraph, params: &VotingParams) -> Result<(Vec<NodeId>, VoteTally), InfluenceError> {
    params.validate()?;
    let n = graph.node_count();
    if params.k > n {
        return Err(InfluenceError::KTooLarge { k: params.k, nodes: n });
    }
    let mut trees = crate::par::map_range(params.r1 as usize, |i| {
        let mut rng = unit_rng(params.seed, i as u64);
        let layout = sample_layout(graph, params.root_mode, &mut rng);
        let hits = cast_hits(layout.order.len(), params.r2, &mut rng);
        (layout, hits)
    });
    let votes = sum_tallies(&trees, n);
    let tally = VoteTally {
        votes: graph
            .node_ids()
            .filter(|v| votes[v.index()] > 0)
            .map(|v| (graph.name(v).to_string(), votes[v.index()]))
            .collect(),
        trees_sampled: params.r1,
    };
    let by_votes = |votes: &[u64], a: &NodeId, b: &NodeId| votes[b.index()].cmp(&votes[a.index()]).then(a.cmp(b));
    let selected = match params.selection {
        SelectionRule::TopTally => {
            let mut ranked: Vec<NodeId> = graph.node_ids().collect();
            ranked.sort_by(|a, b| by_votes(&votes, a, b));
            ranked.truncate(params.k);
            ranked
        }
        SelectionRule::Discounted => {
            let mut chosen = vec![false; n];
            let mut selected = Vec::with_capacity(params.k);
            let mut current = votes.clone();
            for _ in 0..params.k {
                // Residual votes first, then raw votes once every draw is covered.
                let pick = graph
                    .node_ids()
                    .filter(|v| !chosen[v.index()])
                    .min_by(|a, b| by_votes(&current, a, b).then_with(|| by_votes(&votes, a, b)))
                    .expect("k <= node count");
                chosen[pick.index()] = true;
                selected.push(pick);
                crate::par::for_each_mut(&mut trees, |(layout, hits)| cover_subtree(layout, hits, pick));
                current = sum_tallies(&trees, n);
            }
            selected
        }
    };
    Ok((selected, tally))
}

fn cast_hits(len: usize, r2: u64, rng: &mut Rng) -> Vec<u64> {
    let mut hits = vec![0u64; len];
    for _ in 0..r2 {
        hits[rng.random_range(0..len)] += 1;
    }
    hits
}

/// Per-node vote totals over all trees, by integer addition.
fn sum_tallies(trees: &[(TreeLayout, Vec<u64>)], n: usize) -> Vec<u64> {
    let per_tree = crate::par::map_slice(trees, |(layout, hits)| tally_from_hits(&layout.parent, hits));
    let mut votes = vec![0u64; n];
    for ((layout, _), tally) in trees.iter().zip(per_tree) {
        for (node, v) in layout.order.iter().zip(tally) {
            votes[node.index()] += v;
        }
    }
    votes
}

/// Clears the hits of `node` and everything below it in this tree.
fn cover_subtree(layout: &TreeLayout, hits: &mut [u64], node: NodeId) {
    let Some(q) = layout.order.iter().position(|&v| v == node) else { return };
    let mut covered = vec![false; layout.order.len()];
    covered[q] = true;
    hits[q] = 0;
    // Parents precede children, so one forward pass marks the subtree.
    for i in q + 1..layout.order.len() {
        let p = layout.parent[i];
        if p != NO_PARENT && covered[p as usize] {
            covered[i] = true;
            hits[i] = 0;
        }
    }
}

/// Spread oracle used by the greedy and exhaustive selectors.
pub trait SpreadEvaluator: Sync {
    fn spread(&self, graph: &IcGraph, seeds: &[NodeId]) -> Result<f64, CascadeError>;
}

/// Exact enumeration through [`sigma_exact`].
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactEvaluator;

impl SpreadEvaluator for ExactEvaluator {
    fn spread(&self, graph: &IcGraph, seeds: &[NodeId]) -> Result<f64, CascadeError> {
        sigma_exact(graph, seeds)
    }
}

/// Monte Carlo through [`sigma`]. Every set is evaluated with the same seed
/// (common random numbers), so comparisons between sets are paired.
#[derive(Debug, Clone, Copy)]
pub struct MonteCarloEvaluator {
    pub n_sims: u64,
    pub seed: u64,
}

impl SpreadEvaluator for MonteCarloEvaluator {
    fn spread(&self, graph: &IcGraph, seeds: &[NodeId]) -> Result<f64, CascadeError> {
        Ok(sigma(graph, seeds, self.n_sims, self.seed)?.mean)
    }
}

/// Gains closer than this (relative) are treated as ties.
fn tie_tolerance(best: f64) -> f64 {
    1e-9 * best.abs().max(1.0)
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    gain: f64,
    value: f64,
    node: NodeId,
    round: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    // Max-heap: larger gain first, then smaller node id.
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain.total_cmp(&other.gain).then_with(|| other.node.cmp(&self.node))
    }
}

/// CELF lazy greedy. Each round re-evaluates stale queue heads until the
/// head is current, then settles near-ties (within a relative 1e-9) by
/// ascending node id, which reproduces plain greedy exactly whenever the
/// evaluator is submodular.
pub fn greedy_select(graph: &IcGraph, k: usize, evaluator: &dyn SpreadEvaluator) -> Result<Vec<NodeId>, InfluenceError> {
    let n = graph.node_count();
    if k > n {
        return Err(InfluenceError::KTooLarge { k, nodes: n });
    }
    let nodes: Vec<NodeId> = graph.node_ids().collect();
    let initial = crate::par::map_slice(&nodes, |&v| evaluator.spread(graph, &[v]));
    let mut heap = BinaryHeap::with_capacity(n);
    for (&v, value) in nodes.iter().zip(initial) {
        let value = value?;
        heap.push(Candidate { gain: value, value, node: v, round: 0 });
    }
    let mut chosen: Vec<NodeId> = Vec::with_capacity(k);
    let mut current = 0.0;
    let evaluate = |chosen: &[NodeId], v: NodeId, current: f64, round: usize| -> Result<Candidate, CascadeError> {
        let mut set = chosen.to_vec();
        set.push(v);
        let value = evaluator.spread(graph, &set)?;
        Ok(Candidate { gain: value - current, value, node: v, round })
    };
    for round in 0..k {
        // Lazy phase: make the head current.
        loop {
            let top = *heap.peek().expect("candidates remain while round < k <= n");
            if top.round == round {
                break;
            }
            heap.pop();
            heap.push(evaluate(&chosen, top.node, current, round)?);
        }
        // Tie phase: every entry that could be within tolerance of the best
        // must be current before choosing.
        let mut near: Vec<Candidate> = Vec::new();
        loop {
            let best = near
                .iter()
                .chain(heap.peek())
                .filter(|c| c.round == round)
                .map(|c| c.gain)
                .fold(f64::NEG_INFINITY, f64::max);
            let tol = tie_tolerance(best);
            let mut changed = false;
            while let Some(&top) = heap.peek() {
                if top.gain < best - tol {
                    break;
                }
                heap.pop();
                if top.round == round {
                    near.push(top);
                } else {
                    heap.push(evaluate(&chosen, top.node, current, round)?);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let best = near.iter().map(|c| c.gain).fold(f64::NEG_INFINITY, f64::max);
        let tol = tie_tolerance(best);
        let pick = *near
            .iter()
            .filter(|c| c.gain >= best - tol)
            .min_by_key(|c| c.node)
            .expect("best candidate is in the near set");
        for c in near {
            if c.node != pick.node {
                heap.push(c);
            }
        }
        chosen.push(pick.node);
        current = pick.value;
    }
    Ok(chosen)
}

/// Exhaustive search over all `k`-subsets; ties go to the
/// lexicographically smallest subset. Returns the set and its spread.
pub fn optimal_select(graph: &IcGraph, k: usize, evaluator: &dyn SpreadEvaluator) -> Result<(Vec<NodeId>, f64), InfluenceError> {
    let n = graph.node_count();
    if k > n {
        return Err(InfluenceError::KTooLarge { k, nodes: n });
    }
    let mut subsets = Vec::new();
    let mut comb: Vec<u32> = (0..k as u32).collect();
    loop {
        subsets.push(comb.iter().map(|&i| NodeId(i)).collect::<Vec<_>>());
        if !next_combination(&mut comb, n as u32) {
            break;
        }
    }
    let values = crate::par::map_slice(&subsets, |s| evaluator.spread(graph, s));
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.into_iter().enumerate() {
        let v = v?;
        if best.is_none_or(|(_, b)| v > b + tie_tolerance(b)) {
            best = Some((i, v));
        }
    }
    let (i, v) = best.expect("at least one subset");
    Ok((subsets.swap_remove(i), v))
}

/// Advances `comb` to the next k-combination of `0..n` in lexicographic order.
pub(crate) fn next_combination(comb: &mut [u32], n: u32) -> bool {
    let k = comb.len();
    if k == 0 {
        return false;
    }
    let mut i = k;
    while i > 0 {
        i -= 1;
        if comb[i] < n - (k - i) as u32 {
            comb[i] += 1;
            for j in i + 1..k {
                comb[j] = comb[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    R1,
    R2,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub grid: Vec<u64>,
    /// Parameters for everything not swept; `base.seed` is the master seed.
    pub base: VotingParams,
    pub repetitions: usize,
    /// Monte Carlo runs used to score each selected set.
    pub eval_sims: u64,
    pub eval_seed: u64,
}

impl SweepConfig {
    pub fn new(axis: SweepAxis, grid: Vec<u64>, base: VotingParams) -> Self {
        SweepConfig { axis, grid, base, repetitions: 10, eval_sims: 10_000, eval_seed: base.seed ^ 0x5157 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: u64,
    pub sigma_mean: f64,
    /// Sample variance over repetitions.
    pub sigma_var: f64,
}

/// Runs the voting selector `repetitions` times per grid value (repetition
/// `t` uses seed `mix_seed(base.seed, t)` at every grid value) and scores
/// each selected set with common-random-number Monte Carlo.
pub fn stability_sweep(graph: &IcGraph, cfg: &SweepConfig) -> Result<Vec<SweepRow>, InfluenceError> {
    if cfg.grid.is_empty() || cfg.repetitions == 0 {
        return Err(InfluenceError::InvalidParams("sweep needs a grid value and a repetition".into()));
    }
    let reps = cfg.repetitions;
    let runs = crate::par::map_range(cfg.grid.len() * reps, |i| -> Result<f64, InfluenceError> {
        let (g, t) = (i / reps, i % reps);
        let mut params = cfg.base;
        match cfg.axis {
            SweepAxis::R1 => params.r1 = cfg.grid[g],
            SweepAxis::R2 => params.r2 = cfg.grid[g],
        }
        params.seed = mix_seed(cfg.base.seed, t as u64);
        let (set, _) = voting_select(graph, &params)?;
        Ok(sigma(graph, &set, cfg.eval_sims, cfg.eval_seed)?.mean)
    });
    let runs: Vec<f64> = runs.into_iter().collect::<Result<_, _>>()?;
    Ok(cfg
        .grid
        .iter()
        .zip(runs.chunks(reps))
        .map(|(&value, xs)| {
            let (mean, var) = mean_and_variance(xs);
            SweepRow { value, sigma_mean: mean, sigma_var: var }
        })
        .collect())
}

pub(crate) fn mean_and_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var)
}

/// First grid value from which every later row has a mean within
/// `rel_tol` of the final row's mean and a relative standard deviation at
/// most `rel_tol`.
pub fn stable_from(rows: &[SweepRow], rel_tol: f64) -> Option<u64> {
    let last = rows.last()?.sigma_mean;
    let ok = |r: &SweepRow| {
        let scale = last.abs().max(f64::MIN_POSITIVE);
        (r.sigma_mean - last).abs() / scale <= rel_tol && r.sigma_var.sqrt() / scale <= rel_tol
    };
    let mut first = None;
    for r in rows.iter().rev() {
        if ok(r) {
            first = Some(r.value);
        } else {
            break;
        }
    }
    first
}

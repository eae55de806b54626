//! Browser demo bindings. Every entry point takes plain numbers and returns
//! a JSON string. Seeds and counts are `u32` so JavaScript can pass plain
//! numbers rather than BigInts.

use msnlab::backbone::{cost_curve, five_cluster_demand, five_cluster_topology, Strategy};
use msnlab::calendar::DayRange;
use msnlab::cascade::{random_ic_graph, sigma, RandomGraphSpec};
use msnlab::geo::{baseline_matrix, build_region_matrix, homophily_index, RegionMap};
use msnlab::influence::{greedy_select, voting_select, MonteCarloEvaluator, SelectionRule, VotingParams};
use msnlab::records::{generate_synthetic, SynthConfig};
use msnlab::rng::mix_seed;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Tree counts plotted on the voting curve.
pub const R1_GRID: [u64; 7] = [5, 10, 20, 50, 100, 200, 500];
/// Exhaustive placement is only offered up to this many servers.
pub const OPTIMAL_MAX_K: usize = 6;
const SCORE_SIMS: u64 = 2000;

fn render(v: Result<Value, String>) -> String {
    match v {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

/// Spread of the voting set at each R1 in [`R1_GRID`] against the CELF
/// greedy set, all scored with the same Monte Carlo stream.
#[wasm_bindgen]
pub fn voting_curve(nodes: usize, edges: usize, p_max: f64, k: usize, r2: u32, seed: u32) -> String {
    render(voting_curve_value(nodes, edges, p_max, k, r2.into(), seed.into()))
}

fn voting_curve_value(nodes: usize, edges: usize, p_max: f64, k: usize, r2: u64, seed: u64) -> Result<Value, String> {
    if !(2..=2000).contains(&nodes) || !(0.0..=1.0).contains(&p_max) || k == 0 || k > nodes || r2 == 0 {
        return Err("need 2..=2000 nodes, p_max in [0, 1], 1 <= k <= nodes and r2 >= 1".into());
    }
    let graph = random_ic_graph(RandomGraphSpec { nodes, edges, p_min: 0.0, p_max }, mix_seed(seed, 0));
    let score_seed = mix_seed(seed, 1);
    let score = |set: &[_]| sigma(&graph, set, SCORE_SIMS, score_seed).map(|s| s.mean).map_err(|e| e.to_string());
    let mut rows = Vec::new();
    for (i, &r1) in R1_GRID.iter().enumerate() {
        let mut row = json!({ "r1": r1 });
        for (key, selection) in [("top_tally", SelectionRule::TopTally), ("discounted", SelectionRule::Discounted)] {
            let params = VotingParams { k, r1, r2, seed: mix_seed(seed, 10 + i as u64), selection, ..VotingParams::default() };
            let (set, _) = voting_select(&graph, &params).map_err(|e| e.to_string())?;
            row[key] = json!(score(&set)?);
        }
        rows.push(row);
    }
    let evaluator = MonteCarloEvaluator { n_sims: 500, seed: mix_seed(seed, 2) };
    let greedy = greedy_select(&graph, k, &evaluator).map_err(|e| e.to_string())?;
    Ok(json!({
        "nodes": graph.node_count(),
        "edges": graph.edge_count(),
        "rows": rows,
        "greedy": score(&greedy)?,
    }))
}

/// Load against server count on the bundled five-cluster backbone.
#[wasm_bindgen]
pub fn placement_curve(max_k: usize) -> String {
    render(placement_curve_value(max_k))
}

fn placement_curve_value(max_k: usize) -> Result<Value, String> {
    let graph = five_cluster_topology();
    let demand = five_cluster_demand();
    let max_k = max_k.clamp(1, graph.candidates().len());
    let window = DayRange::new(0, 0);
    let ks: Vec<usize> = (1..=max_k).collect();
    let curve = |strategy, ks: &[usize]| -> Result<Value, String> {
        let c = cost_curve(&graph, &demand, ks, strategy, window).map_err(|e| e.to_string())?;
        Ok(json!(c.iter().map(|&(k, load)| json!({ "k": k, "load": load })).collect::<Vec<_>>()))
    };
    let optimal_ks: Vec<usize> = ks.iter().copied().filter(|&k| k <= OPTIMAL_MAX_K).collect();
    Ok(json!({
        "reverse_greedy": curve(Strategy::ReverseGreedy, &ks)?,
        "greedy": curve(Strategy::Greedy, &ks)?,
        "optimal": curve(Strategy::Optimal, &optimal_ks)?,
    }))
}

/// Homophily of a fresh synthetic corpus at `p_in`, with its random-region
/// baseline and the row-normalised region matrix.
#[wasm_bindgen]
pub fn homophily(p_in: f64, users: usize, regions: usize, seed: u32) -> String {
    render(homophily_value(p_in, users, regions, seed.into()))
}

fn homophily_value(p_in: f64, users: usize, regions: usize, seed: u64) -> Result<Value, String> {
    if !(1..=64).contains(&regions) || users > 20_000 {
        return Err("need 1..=64 regions and at most 20000 users".into());
    }
    let cfg = SynthConfig { n_users: users, n_regions: regions, p_in, n_pages: (users / 10).max(1), seed, ..SynthConfig::default() };
    let corpus = generate_synthetic(&cfg).map_err(|e| e.to_string())?;
    let map = RegionMap::synthetic(regions);
    let m = build_region_matrix(&corpus.records, &map, None);
    let index = homophily_index(&m).map_err(|e| e.to_string())?;
    let baseline = homophily_index(&baseline_matrix(&corpus.records, &map, seed, None)).map_err(|e| e.to_string())?;
    let shares: Vec<Vec<f64>> = (0..m.size())
        .map(|r| {
            let total = m.row_total(r).max(1) as f64;
            (0..m.size()).map(|c| m.get(r, c) as f64 / total).collect()
        })
        .collect();
    Ok(json!({ "index": index, "baseline": baseline, "records": corpus.records.len(), "codes": m.codes, "shares": shares }))
}

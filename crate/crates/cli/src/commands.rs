use crate::args::*;
use crate::report::{num, Report};
use crate::CliError;
use msnlab::backbone::{
    self, cost_curve, derive_demand, evaluate_prediction, fit_traffic_model, five_cluster_demand, five_cluster_topology,
    naive_greedy, optimal_exhaustive, province_mesh_topology, reverse_greedy, total_load, BackboneGraph, DemandMatrix,
    LoadEvaluator,
};
use msnlab::calendar::{day_of, DayRange};
use msnlab::cascade::{estimate_edge_probabilities, sigma, sigma_exact, IcGraph};
use msnlab::diffusion::build_forest;
use msnlab::geo::{
    baseline_matrix, build_region_matrix, correlate_census, estimate_fp, homophily_index, page_view_distribution,
    per_region_homophily, DpmConfig, FpEstimate, RegionDiffusionMatrix, RegionMap,
};
use msnlab::influence::{
    greedy_select, optimal_select, stability_sweep, stable_from, voting_select, ExactEvaluator, MonteCarloEvaluator,
    RootMode, SelectionRule, SpreadEvaluator, SweepAxis, SweepConfig, VotingParams,
};
use msnlab::records::{
    compute_stats, generate_demand_scenario, generate_synthetic, parse_records, write_records, DemandScenario,
    MigrationFlow, PostViewRecord, SynthConfig,
};
use msnlab::rng::mix_seed;
use serde::Serialize;
use serde_json::{json, Map, Value};
use std::io::Read;
use std::path::Path;

/// Stream indices under the master seed, one per independent use.
const STREAM_EVALUATOR: u64 = 1;
const STREAM_SCORE: u64 = 2;
const STREAM_SWEEP_EVAL: u64 = 3;

pub enum Output {
    Report(Report),
    /// Written verbatim regardless of `--format`.
    Raw(String),
}

pub fn dispatch(cli: &Cli) -> Result<Output, CliError> {
    let g = &cli.global;
    match &cli.command {
        Command::Generate(a) => generate(a, g),
        Command::Stats(a) => stats(a, g),
        Command::Forest(a) => forest(a, g),
        Command::IcGraph(a) => ic_graph(a, g),
        Command::Kol(a) => kol(a, g),
        Command::Sweep(a) => sweep(a, g),
        Command::Sigma(a) => sigma_cmd(a, g),
        Command::Demand(a) => demand(a, g),
        Command::TrafficFit(a) => traffic_fit(a, g),
        Command::TrafficEval(a) => traffic_eval(a, g),
        Command::Place(a) => place(a, g),
        Command::CostCurve(a) => cost_curve_cmd(a, g),
        Command::GeoMatrix(a) => geo_matrix(a, g),
        Command::GeoHomophily(a) => geo_homophily(a, g),
        Command::GeoPage(a) => geo_page(a, g),
        Command::GeoFp(a) => geo_fp(a, g),
    }
}

/// Effective configuration: the global seed and format, then every
/// subcommand flag including defaults.
fn config<A: Serialize>(args: &A, g: &Global) -> Value {
    let mut m = Map::new();
    m.insert("seed".into(), json!(g.seed));
    m.insert("format".into(), json!(g.format));
    if let Value::Object(fields) = serde_json::to_value(args).expect("arguments serialize") {
        m.extend(fields);
    }
    Value::Object(m)
}

fn read_text(path: &Path) -> Result<String, CliError> {
    if path == Path::new("-") {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        return Ok(s);
    }
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn read_records(path: &Path) -> Result<Vec<PostViewRecord>, CliError> {
    Ok(parse_records(&read_text(path)?)?)
}

fn region_map(path: Option<&Path>, regions: usize) -> Result<RegionMap, CliError> {
    match path {
        Some(p) => Ok(RegionMap::parse(&read_text(p)?)?),
        None if regions == 0 || regions > 256 => Err(CliError::Input("--regions must be in 1..=256".into())),
        None => Ok(RegionMap::synthetic(regions)),
    }
}

/// Days spanned by the records, or an empty range for none.
fn record_days(records: &[PostViewRecord]) -> DayRange {
    let days = records.iter().map(|r| day_of(r.t));
    match (days.clone().min(), days.max()) {
        (Some(a), Some(b)) => DayRange::new(a, b),
        _ => DayRange::new(0, -1),
    }
}

fn demand_days(m: &DemandMatrix) -> DayRange {
    let days = m.days();
    match (days.first(), days.last()) {
        (Some(&a), Some(&b)) => DayRange::new(a, b),
        _ => DayRange::new(0, -1),
    }
}

fn generate(a: &GenerateArgs, g: &Global) -> Result<Output, CliError> {
    let corpus = match a.scenario {
        Scenario::Cascade => generate_synthetic(&SynthConfig {
            n_users: a.users,
            n_pages: a.pages,
            n_regions: a.regions,
            p_in: a.p_in,
            day_count: a.days,
            seed: g.seed,
            min_cascade: a.min_cascade,
            max_cascade: a.max_cascade,
            repost_prob: a.repost_prob,
            holiday: a.holiday,
            migration: a.migration.iter().map(|&(from, to, fraction)| MigrationFlow { from, to, fraction }).collect(),
            migration_window: a.migration_window,
            ..SynthConfig::default()
        })?,
        Scenario::Demand => generate_demand_scenario(&DemandScenario {
            n_regions: a.regions,
            users_per_region: a.users_per_region,
            day_count: a.days,
            weekday_rate: a.weekday_rate,
            weekend_rate: a.weekend_rate,
            holiday_rate: a.holiday_rate,
            pair_spread: a.pair_spread,
            noise: a.noise,
            seed: g.seed,
            ..DemandScenario::default()
        })?,
    };
    let truth = &corpus.truth;
    if let Some(path) = &a.census_out {
        let cells = truth
            .floating_population(true)
            .into_iter()
            .map(|((h, r), n)| ((truth.region_codes[h].clone(), truth.region_codes[r].clone()), n))
            .collect();
        std::fs::write(path, FpEstimate::from_cells(cells).to_census_text())?;
    }
    if let Some(path) = &a.demand_out {
        let mut m = DemandMatrix::new(truth.region_codes.clone());
        for (&(h, v, d), &n) in &truth.demand {
            m.add(h, v, d, n);
        }
        std::fs::write(path, m.to_tsv())?;
    }
    Ok(Output::Raw(write_records(&corpus.records)))
}

fn stats(a: &RecordsIn, g: &Global) -> Result<Output, CliError> {
    let s = compute_stats(&read_records(&a.records)?);
    let table = format!(
        "records\t{}\nusers\t{}\npages\t{}\nself_views\t{}\n",
        s.record_count, s.user_count, s.page_count, s.self_view_count
    );
    Ok(Output::Report(Report::new("stats", config(a, g), json!(s), table)))
}

fn forest(a: &ForestArgs, g: &Global) -> Result<Output, CliError> {
    let records = read_records(&a.input.records)?;
    if !records.iter().any(|r| r.pid == a.pid) {
        return Err(CliError::Input(format!("unknown page `{}`", a.pid)));
    }
    let f = build_forest(&records, &a.pid);
    let edges: Vec<Value> = f
        .view_time
        .iter()
        .map(|(u, t)| json!({"user": u, "parent": f.parent.get(u), "view_time": t}))
        .collect();
    let result = json!({"pid": f.pid, "node_count": f.node_count(), "roots": f.roots, "nodes": edges});
    Ok(Output::Report(Report::new("forest", config(a, g), result, f.to_tsv())))
}

fn ic_graph_json(graph: &IcGraph) -> Value {
    let edges: Vec<Value> = graph
        .edges()
        .map(|(u, v, p)| json!({"u": graph.name(u), "v": graph.name(v), "p": p}))
        .collect();
    json!({"node_count": graph.node_count(), "edge_count": graph.edge_count(), "edges": edges})
}

fn ic_graph(a: &IcGraphArgs, g: &Global) -> Result<Output, CliError> {
    let graph = estimate_edge_probabilities(&read_records(&a.input.records)?, a.laplace);
    Ok(Output::Report(Report::new("ic-graph", config(a, g), ic_graph_json(&graph), graph.to_tsv())))
}

fn load_ic(input: &IcIn) -> Result<IcGraph, CliError> {
    match (&input.graph, &input.records) {
        (Some(p), _) => Ok(IcGraph::from_tsv(&read_text(p)?)?),
        (None, Some(p)) => Ok(estimate_edge_probabilities(&read_records(p)?, input.laplace)),
        (None, None) => Err(CliError::Input("need --graph or --records".into())),
    }
}

fn voting_params(v: &VotingArgs, seed: u64) -> VotingParams {
    VotingParams {
        k: v.k,
        r1: v.r1,
        r2: v.r2,
        seed,
        root_mode: match v.root_mode {
            RootModeArg::ReachWeighted => RootMode::ReachWeighted,
            RootModeArg::Uniform => RootMode::Uniform,
        },
        selection: match v.selection {
            SelectionArg::TopTally => SelectionRule::TopTally,
            SelectionArg::Discounted => SelectionRule::Discounted,
        },
    }
}

fn kol(a: &KolArgs, g: &Global) -> Result<Output, CliError> {
    let graph = load_ic(&a.input)?;
    let k = a.voting.k;
    let mc = MonteCarloEvaluator { n_sims: a.eval_sims, seed: mix_seed(g.seed, STREAM_EVALUATOR) };
    let evaluator: &dyn SpreadEvaluator = match a.evaluator {
        EvaluatorKind::Exact => &ExactEvaluator,
        EvaluatorKind::MonteCarlo => &mc,
    };
    let (set, tally) = match a.strategy {
        KolStrategy::Voting => {
            let (set, tally) = voting_select(&graph, &voting_params(&a.voting, g.seed))?;
            (set, Some(tally))
        }
        KolStrategy::Greedy => (greedy_select(&graph, k, evaluator)?, None),
        KolStrategy::Optimal => (optimal_select(&graph, k, evaluator)?.0, None),
    };
    let score = sigma(&graph, &set, a.eval_sims, mix_seed(g.seed, STREAM_SCORE))?;
    let mut table = String::from("rank\tuser\tvotes\n");
    let mut seeds = Vec::new();
    for (i, &id) in set.iter().enumerate() {
        let name = graph.name(id);
        let votes = tally.as_ref().map(|t| t.get(name));
        table.push_str(&format!("{}\t{}\t{}\n", i + 1, name, votes.map_or("-".into(), |v| v.to_string())));
        seeds.push(json!({"user": name, "votes": votes}));
    }
    let result = json!({
        "strategy": a.strategy,
        "K": k,
        "R1": a.voting.r1,
        "R2": a.voting.r2,
        "seed": g.seed,
        "selected_users": seeds,
        "trees_sampled": tally.as_ref().map(|t| t.trees_sampled),
        "sigma_mean": score.mean,
        "sigma_stderr": score.stderr,
        "sigma_sims": score.n_sims,
    });
    Ok(Output::Report(Report::new("kol", config(a, g), result, table)))
}

fn sweep(a: &SweepArgs, g: &Global) -> Result<Output, CliError> {
    let graph = load_ic(&a.input)?;
    let axis = match a.axis {
        AxisArg::R1 => SweepAxis::R1,
        AxisArg::R2 => SweepAxis::R2,
    };
    let mut cfg = SweepConfig::new(axis, a.grid.0.clone(), voting_params(&a.voting, g.seed));
    cfg.repetitions = a.repetitions;
    cfg.eval_sims = a.eval_sims;
    cfg.eval_seed = mix_seed(g.seed, STREAM_SWEEP_EVAL);
    let rows = stability_sweep(&graph, &cfg)?;
    let mut table = String::from("grid_value\tsigma_mean\tsigma_var\n");
    for r in &rows {
        table.push_str(&format!("{}\t{}\t{}\n", r.value, num(r.sigma_mean), num(r.sigma_var)));
    }
    let result = json!({"rows": rows, "stable_from_5pct": stable_from(&rows, 0.05)});
    Ok(Output::Report(Report::new("sweep", config(a, g), result, table)))
}

fn sigma_cmd(a: &SigmaArgs, g: &Global) -> Result<Output, CliError> {
    let graph = load_ic(&a.input)?;
    let seeds = graph.resolve(&a.seeds)?;
    let mc = sigma(&graph, &seeds, a.sims, g.seed)?;
    let exact = if a.exact { Some(sigma_exact(&graph, &seeds)?) } else { None };
    let mut table = format!("monte_carlo\t{}\nstderr\t{}\n", num(mc.mean), num(mc.stderr));
    if let Some(x) = exact {
        table.push_str(&format!("exact\t{}\n", num(x)));
    }
    let result = json!({"seeds": a.seeds, "monte_carlo": mc, "exact": exact});
    Ok(Output::Report(Report::new("sigma", config(a, g), result, table)))
}

fn demand_json(m: &DemandMatrix, window: DayRange) -> Value {
    let cells: Vec<Value> = m
        .counts
        .iter()
        .map(|(&(a, b, d), &c)| json!({"day": d, "region_a": m.regions[a], "region_b": m.regions[b], "count": c}))
        .collect();
    json!({"regions": m.regions, "window": window, "total": m.total(), "excluded": m.excluded, "cells": cells})
}

fn demand(a: &DemandArgs, g: &Global) -> Result<Output, CliError> {
    let records = read_records(&a.geo.records)?;
    let map = region_map(a.geo.region_map.as_deref(), a.geo.regions)?;
    let window = a.window.unwrap_or_else(|| record_days(&records));
    let m = derive_demand(&records, &map, window);
    Ok(Output::Report(Report::new("demand", config(a, g), demand_json(&m, window), m.to_tsv())))
}

fn load_demand(d: &DemandIn) -> Result<Option<DemandMatrix>, CliError> {
    match (&d.demand, &d.records) {
        (Some(p), _) => Ok(Some(DemandMatrix::from_tsv(&read_text(p)?)?)),
        (None, Some(p)) => {
            let records = read_records(p)?;
            let map = region_map(d.region_map.as_deref(), d.regions)?;
            Ok(Some(derive_demand(&records, &map, record_days(&records))))
        }
        (None, None) => Ok(None),
    }
}

fn load_topology(t: &TopologyIn, default: Bundled) -> Result<(BackboneGraph, Option<Bundled>), CliError> {
    if let Some(p) = &t.topology {
        return Ok((BackboneGraph::parse(&read_text(p)?)?, None));
    }
    let which = t.bundled.unwrap_or(default);
    let g = match which {
        Bundled::FiveCluster => five_cluster_topology(),
        Bundled::ProvinceMesh => province_mesh_topology(),
    };
    Ok((g, Some(which)))
}

/// Topology and demand for placement; the bundled five-cluster topology
/// comes with its own demand.
fn placement_inputs(t: &TopologyIn, d: &DemandIn) -> Result<(BackboneGraph, DemandMatrix), CliError> {
    let (graph, bundled) = load_topology(t, Bundled::FiveCluster)?;
    let demand = match (load_demand(d)?, bundled) {
        (Some(m), _) => m,
        (None, Some(Bundled::FiveCluster)) => five_cluster_demand(),
        (None, _) => return Err(CliError::Input("need --demand or --records for this topology".into())),
    };
    Ok((graph, demand))
}

fn traffic_inputs(a: &TrafficArgs) -> Result<(BackboneGraph, DemandMatrix), CliError> {
    let (graph, _) = load_topology(&a.topology, Bundled::ProvinceMesh)?;
    let demand = load_demand(&a.demand)?.ok_or_else(|| CliError::Input("need --demand or --records".into()))?;
    Ok((graph, demand))
}

fn fit(a: &TrafficArgs) -> Result<(backbone::TrafficModel, DemandMatrix), CliError> {
    let (graph, demand) = traffic_inputs(a)?;
    let model = fit_traffic_model(&demand, &graph, a.train, a.lambda, &a.calendar())?;
    Ok((model, demand))
}

fn traffic_fit(a: &TrafficArgs, g: &Global) -> Result<Output, CliError> {
    let (model, _) = fit(a)?;
    let rates: Vec<Value> = model
        .base_rate
        .iter()
        .map(|(&(x, y), r)| {
            json!({"region_a": model.regions[x], "region_b": model.regions[y], "weekday": r[0], "weekend": r[1], "holiday": r[2]})
        })
        .collect();
    let result = json!({"lambda": model.lambda, "train": model.train_window, "pairs": rates.len(), "rates": rates});
    Ok(Output::Report(Report::new("traffic-fit", config(a, g), result, model.to_tsv())))
}

fn traffic_eval(a: &TrafficEvalArgs, g: &Global) -> Result<Output, CliError> {
    let (model, demand) = fit(&a.fit)?;
    let e = evaluate_prediction(&model, &demand, a.test)?;
    let table = format!(
        "error_rate\t{}\ncells\t{}\nzero_cells\t{}\nzero_cell_abs_error\t{}\n",
        num(e.error_rate),
        e.cells,
        e.zero_cells,
        num(e.zero_cell_abs_error)
    );
    Ok(Output::Report(Report::new("traffic-eval", config(a, g), json!(e), table)))
}

fn place(a: &PlaceArgs, g: &Global) -> Result<Output, CliError> {
    let (graph, demand) = placement_inputs(&a.topology, &a.demand)?;
    let window = a.window.unwrap_or_else(|| demand_days(&demand));
    let p = match a.strategy {
        PlaceStrategy::ReverseGreedy => reverse_greedy(&graph, &demand, a.k, window)?,
        PlaceStrategy::Greedy => naive_greedy(&graph, &demand, a.k, window)?,
        PlaceStrategy::Optimal => optimal_exhaustive(&graph, &demand, a.k, window)?,
    };
    let load = total_load(&demand, &p, &graph, window)?;
    let lower = LoadEvaluator::new(&graph, &demand, window)?.lower_bound();
    let servers = p.names(&graph);
    let table = format!("strategy\tk\tload\tservers\n{}\t{}\t{}\t{}\n", msnlab::backbone::Strategy::from(a.strategy).name(), a.k, num(load), servers.join(","));
    let result = json!({"strategy": a.strategy, "k": a.k, "servers": servers, "load": load, "relay_free_bound": lower});
    Ok(Output::Report(Report::new("place", config(a, g), result, table)))
}

fn cost_curve_cmd(a: &CostCurveArgs, g: &Global) -> Result<Output, CliError> {
    let (graph, demand) = placement_inputs(&a.topology, &a.demand)?;
    let window = a.window.unwrap_or_else(|| demand_days(&demand));
    let ks: Vec<usize> = a.ks.0.iter().map(|&k| k as usize).collect();
    let curve = cost_curve(&graph, &demand, &ks, a.strategy.into(), window)?;
    let mut table = String::from("k\tload\n");
    for &(k, l) in &curve {
        table.push_str(&format!("{k}\t{}\n", num(l)));
    }
    let rows: Vec<Value> = curve.iter().map(|&(k, l)| json!({"k": k, "load": l})).collect();
    let result = json!({"strategy": a.strategy, "rows": rows});
    Ok(Output::Report(Report::new("cost-curve", config(a, g), result, table)))
}

fn matrix_json(m: &RegionDiffusionMatrix) -> Value {
    let rows: Vec<Vec<u64>> = (0..m.size()).map(|r| (0..m.size()).map(|c| m.get(r, c)).collect()).collect();
    json!({
        "codes": m.codes,
        "period": m.period,
        "total": m.total(),
        "trace": m.trace(),
        "spill": m.spill,
        "self_views": m.self_views,
        "rows": rows,
    })
}

fn geo_matrix(a: &GeoMatrixArgs, g: &Global) -> Result<Output, CliError> {
    let records = read_records(&a.period.geo.records)?;
    let map = region_map(a.period.geo.region_map.as_deref(), a.period.geo.regions)?;
    let m = if a.baseline {
        baseline_matrix(&records, &map, g.seed, a.period.period)
    } else {
        build_region_matrix(&records, &map, a.period.period)
    };
    Ok(Output::Report(Report::new("geo-matrix", config(a, g), matrix_json(&m), m.to_tsv())))
}

fn geo_homophily(a: &GeoPeriodArgs, g: &Global) -> Result<Output, CliError> {
    let records = read_records(&a.geo.records)?;
    let map = region_map(a.geo.region_map.as_deref(), a.geo.regions)?;
    let m = build_region_matrix(&records, &map, a.period);
    let index = homophily_index(&m)?;
    let baseline = homophily_index(&baseline_matrix(&records, &map, g.seed, a.period))?;
    let per = per_region_homophily(&m);
    let mut table = format!("region\tindex\nALL\t{}\nBASELINE\t{}\n", num(index), num(baseline));
    let mut per_json = Map::new();
    for (code, v) in m.codes.iter().zip(&per) {
        table.push_str(&format!("{code}\t{}\n", v.map_or("-".into(), num)));
        per_json.insert(code.clone(), json!(v));
    }
    let result = json!({
        "index": index,
        "baseline_index": baseline,
        "total": m.total(),
        "spill": m.spill,
        "per_region": per_json,
    });
    Ok(Output::Report(Report::new("geo-homophily", config(a, g), result, table)))
}

fn geo_page(a: &GeoPageArgs, g: &Global) -> Result<Output, CliError> {
    let records = read_records(&a.geo.records)?;
    let map = region_map(a.geo.region_map.as_deref(), a.geo.regions)?;
    let d = page_view_distribution(&records, &a.pid, &map)?;
    let mut table = String::from("region\tviews\n");
    let mut counts = Map::new();
    for (code, &c) in map.codes().iter().zip(&d.counts) {
        table.push_str(&format!("{code}\t{c}\n"));
        counts.insert(code.clone(), json!(c));
    }
    let result = json!({
        "pid": d.pid,
        "origin": d.origin,
        "peak": d.peak(&map),
        "unresolved": d.unresolved,
        "counts": counts,
    });
    Ok(Output::Report(Report::new("geo-page", config(a, g), result, table)))
}

fn geo_fp(a: &GeoFpArgs, g: &Global) -> Result<Output, CliError> {
    let records = read_records(&a.geo.records)?;
    let map = region_map(a.geo.region_map.as_deref(), a.geo.regions)?;
    let cfg = DpmConfig { alpha: a.alpha, truncation: a.truncation, iterations: a.iterations, seed: g.seed };
    let est = estimate_fp(&records, &map, a.home_window, a.holiday_window, &cfg)?;
    let pearson = match &a.census {
        Some(p) => Some(correlate_census(&est, &FpEstimate::parse_census(&read_text(p)?)?)?),
        None => None,
    };
    let mut table = String::from("home\tremote\tcount\n");
    let cells: Vec<Value> = est
        .cells
        .iter()
        .map(|((h, r), &n)| {
            table.push_str(&format!("{h}\t{r}\t{n}\n"));
            json!({"home": h, "remote": r, "count": n})
        })
        .collect();
    let result = json!({
        "period_home": est.period_home,
        "period_holiday": est.period_holiday,
        "cells": cells,
        "pearson_r": pearson,
    });
    Ok(Output::Report(Report::new("geo-fp", config(a, g), result, table)))
}

use clap::{Args, Parser, Subcommand, ValueEnum};
use msnlab::calendar::{spring_festival_week, DayRange};
use msnlab::rng::DEFAULT_SEED;
use serde::Serialize;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "msnlab", version, about = "Diffusion, traffic and geo analytics over post-view records")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Master seed for every random draw.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Worker threads (falls back to MSNLAB_THREADS, then all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Fill `runtime_ms` in reports (makes output run-dependent).
    #[arg(long, global = true)]
    pub timing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Tsv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic record corpus.
    Generate(GenerateArgs),
    /// Corpus size statistics.
    Stats(RecordsIn),
    /// Attribution forest of one page.
    Forest(ForestArgs),
    /// Estimate an IC graph from records.
    IcGraph(IcGraphArgs),
    /// Select key users.
    Kol(KolArgs),
    /// Variance of the voting selector's spread across R1 or R2.
    Sweep(SweepArgs),
    /// Spread of a seed set.
    Sigma(SigmaArgs),
    /// Region-pair demand per day.
    Demand(DemandArgs),
    /// Fit the day-type traffic model.
    TrafficFit(TrafficArgs),
    /// Fit on the train window and score on the test window.
    TrafficEval(TrafficEvalArgs),
    /// Place servers.
    Place(PlaceArgs),
    /// Load as a function of the number of servers.
    CostCurve(CostCurveArgs),
    /// Region diffusion matrix.
    GeoMatrix(GeoMatrixArgs),
    /// Diagonal share of the diffusion matrix.
    GeoHomophily(GeoPeriodArgs),
    /// Viewer regions of one page.
    GeoPage(GeoPageArgs),
    /// Floating population between home and holiday windows.
    GeoFp(GeoFpArgs),
}

pub fn parse_range(s: &str) -> Result<DayRange, String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected FIRST:LAST, got `{s}`"))?;
    let first = a.trim().parse::<i64>().map_err(|e| format!("bad day `{a}`: {e}"))?;
    let last = b.trim().parse::<i64>().map_err(|e| format!("bad day `{b}`: {e}"))?;
    if last < first {
        return Err(format!("empty range `{s}`"));
    }
    Ok(DayRange::new(first, last))
}

/// Integer list given as `a,b,c` or `FIRST:LAST`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct List(pub Vec<u64>);

pub fn parse_list(s: &str) -> Result<List, String> {
    if let Ok(r) = parse_range(s) {
        if r.first >= 0 {
            return Ok(List(r.days().map(|d| d as u64).collect()));
        }
    }
    s.split(',')
        .map(|x| x.trim().parse::<u64>().map_err(|e| format!("bad value `{x}`: {e}")))
        .collect::<Result<_, _>>()
        .map(List)
}

fn parse_flow(s: &str) -> Result<(usize, usize, f64), String> {
    let f: Vec<&str> = s.split(':').collect();
    let [from, to, frac] = f.as_slice() else {
        return Err(format!("expected FROM:TO:FRACTION, got `{s}`"));
    };
    Ok((
        from.parse().map_err(|_| format!("bad region `{from}`"))?,
        to.parse().map_err(|_| format!("bad region `{to}`"))?,
        frac.parse().map_err(|_| format!("bad fraction `{frac}`"))?,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// Page cascades over a region-structured friendship graph.
    Cascade,
    /// Exact planted region-pair demand from day-type rates.
    Demand,
}

#[derive(Debug, Args, Serialize)]
pub struct GenerateArgs {
    #[arg(long, value_enum, default_value_t = Scenario::Cascade)]
    pub scenario: Scenario,
    #[arg(long, default_value_t = 2000)]
    pub users: usize,
    #[arg(long, default_value_t = 200)]
    pub pages: usize,
    #[arg(long, default_value_t = 34)]
    pub regions: usize,
    #[arg(long, default_value_t = 0.9)]
    pub p_in: f64,
    #[arg(long, default_value_t = 45)]
    pub days: usize,
    #[arg(long, default_value_t = 2)]
    pub min_cascade: usize,
    #[arg(long, default_value_t = 500)]
    pub max_cascade: usize,
    #[arg(long, default_value_t = 0.5)]
    pub repost_prob: f64,
    /// Thin cross-region views on these days.
    #[arg(long, value_parser = parse_range)]
    pub holiday: Option<DayRange>,
    /// Planted move `FROM:TO:FRACTION` during the migration window (repeatable).
    #[arg(long = "migration", value_parser = parse_flow)]
    pub migration: Vec<(usize, usize, f64)>,
    #[arg(long, value_parser = parse_range, default_value = "24:30")]
    pub migration_window: DayRange,
    /// Demand scenario: users per region.
    #[arg(long, default_value_t = 5)]
    pub users_per_region: usize,
    #[arg(long, default_value_t = 100.0)]
    pub weekday_rate: f64,
    #[arg(long, default_value_t = 40.0)]
    pub weekend_rate: f64,
    #[arg(long, default_value_t = 60.0)]
    pub holiday_rate: f64,
    /// Demand scenario: multiplicative noise half-width.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0.0)]
    pub pair_spread: f64,
    /// Also write the planted floating population as a census file.
    #[arg(long)]
    pub census_out: Option<PathBuf>,
    /// Also write the planted demand as TSV.
    #[arg(long)]
    pub demand_out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct RecordsIn {
    /// Record file (`u1,u2,pid,ip,t` lines); `-` reads stdin.
    #[arg(long)]
    pub records: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ForestArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: RecordsIn,
    #[arg(long)]
    pub pid: String,
}

#[derive(Debug, Args, Serialize)]
pub struct IcGraphArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: RecordsIn,
    /// Additive smoothing of the repost ratio.
    #[arg(long)]
    pub laplace: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct IcIn {
    /// IC graph TSV (`u  v  p`).
    #[arg(long, conflicts_with = "records", required_unless_present = "records")]
    pub graph: Option<PathBuf>,
    /// Estimate the IC graph from this record file instead.
    #[arg(long)]
    pub records: Option<PathBuf>,
    #[arg(long, requires = "records")]
    pub laplace: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KolStrategy {
    Voting,
    Greedy,
    Optimal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvaluatorKind {
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RootModeArg {
    ReachWeighted,
    Uniform,
}

#[derive(Debug, Args, Serialize)]
pub struct VotingArgs {
    #[arg(long, default_value_t = 100)]
    pub k: usize,
    /// Sampled diffusion trees.
    #[arg(long, default_value_t = 500)]
    pub r1: u64,
    /// Votes per tree.
    #[arg(long, default_value_t = 100_000)]
    pub r2: u64,
    #[arg(long, value_enum, default_value_t = RootModeArg::ReachWeighted)]
    pub root_mode: RootModeArg,
    /// How users are read off the tally: the highest raw tallies, or one at
    /// a time with already-reached voters withdrawn.
    #[arg(long, value_enum, default_value_t = SelectionArg::TopTally)]
    pub selection: SelectionArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionArg {
    TopTally,
    Discounted,
}

#[derive(Debug, Args, Serialize)]
pub struct KolArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: IcIn,
    #[arg(long, value_enum, default_value_t = KolStrategy::Voting)]
    pub strategy: KolStrategy,
    #[command(flatten)]
    #[serde(flatten)]
    pub voting: VotingArgs,
    /// Spread oracle for greedy and optimal.
    #[arg(long, value_enum, default_value_t = EvaluatorKind::MonteCarlo)]
    pub evaluator: EvaluatorKind,
    /// Monte Carlo runs per spread evaluation and for scoring the result.
    #[arg(long, default_value_t = 10_000)]
    pub eval_sims: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisArg {
    R1,
    R2,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: IcIn,
    #[arg(long, value_enum, default_value_t = AxisArg::R1)]
    pub axis: AxisArg,
    /// Grid values, comma-separated or FIRST:LAST.
    #[arg(long, value_parser = parse_list, default_value = "50,100,200,500")]
    pub grid: List,
    #[arg(long, default_value_t = 10)]
    pub repetitions: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub voting: VotingArgs,
    #[arg(long, default_value_t = 10_000)]
    pub eval_sims: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct SigmaArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: IcIn,
    /// Comma-separated seed users.
    #[arg(long, value_delimiter = ',', required = true)]
    pub seeds: Vec<String>,
    #[arg(long, default_value_t = 10_000)]
    pub sims: u64,
    /// Also enumerate the exact spread (small graphs only).
    #[arg(long)]
    pub exact: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct GeoIn {
    /// Record file (`u1,u2,pid,ip,t` lines); `-` reads stdin.
    #[arg(long)]
    pub records: PathBuf,
    /// Region map (`cidr,region_code` lines). Default: the synthetic map.
    #[arg(long)]
    pub region_map: Option<PathBuf>,
    /// Size of the synthetic map when no region map is given.
    #[arg(long, default_value_t = 34)]
    pub regions: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct DemandArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub geo: GeoIn,
    /// Days to count; default: every day present.
    #[arg(long, value_parser = parse_range)]
    pub window: Option<DayRange>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bundled {
    FiveCluster,
    ProvinceMesh,
}

#[derive(Debug, Args, Serialize)]
pub struct TopologyIn {
    /// Backbone graph file (`N,id,region` / `E,a,b,distance` / `C,id`).
    #[arg(long, conflicts_with = "bundled")]
    pub topology: Option<PathBuf>,
    /// Bundled topology used when no file is given.
    #[arg(long, value_enum)]
    pub bundled: Option<Bundled>,
}

#[derive(Debug, Args, Serialize)]
pub struct DemandIn {
    /// Demand TSV (`day  region_a  region_b  count`).
    #[arg(long, conflicts_with = "records")]
    pub demand: Option<PathBuf>,
    /// Derive demand from this record file instead.
    #[arg(long)]
    pub records: Option<PathBuf>,
    #[arg(long, requires = "records")]
    pub region_map: Option<PathBuf>,
    #[arg(long, default_value_t = 34)]
    pub regions: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct TrafficArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub demand: DemandIn,
    #[command(flatten)]
    #[serde(flatten)]
    pub topology: TopologyIn,
    #[arg(long, value_parser = parse_range, default_value = "0:18")]
    pub train: DayRange,
    /// Spatial smoothing weight.
    #[arg(long, default_value_t = msnlab::backbone::DEFAULT_LAMBDA)]
    pub lambda: f64,
    /// Holiday days (repeatable); default: the Spring Festival week.
    #[arg(long = "holiday", value_parser = parse_range)]
    pub holidays: Vec<DayRange>,
    #[arg(long, conflicts_with = "holidays")]
    pub no_holidays: bool,
}

impl TrafficArgs {
    pub fn calendar(&self) -> msnlab::calendar::Calendar {
        if self.no_holidays {
            msnlab::calendar::Calendar::without_holidays()
        } else if self.holidays.is_empty() {
            msnlab::calendar::Calendar { holidays: vec![spring_festival_week()] }
        } else {
            msnlab::calendar::Calendar { holidays: self.holidays.clone() }
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct TrafficEvalArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub fit: TrafficArgs,
    #[arg(long, value_parser = parse_range, default_value = "19:23")]
    pub test: DayRange,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlaceStrategy {
    ReverseGreedy,
    Greedy,
    Optimal,
}

impl From<PlaceStrategy> for msnlab::backbone::Strategy {
    fn from(s: PlaceStrategy) -> Self {
        match s {
            PlaceStrategy::ReverseGreedy => msnlab::backbone::Strategy::ReverseGreedy,
            PlaceStrategy::Greedy => msnlab::backbone::Strategy::Greedy,
            PlaceStrategy::Optimal => msnlab::backbone::Strategy::Optimal,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct PlaceArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub topology: TopologyIn,
    #[command(flatten)]
    #[serde(flatten)]
    pub demand: DemandIn,
    #[arg(long, value_enum, default_value_t = PlaceStrategy::ReverseGreedy)]
    pub strategy: PlaceStrategy,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// Demand days to load; default: every day present.
    #[arg(long, value_parser = parse_range)]
    pub window: Option<DayRange>,
}

#[derive(Debug, Args, Serialize)]
pub struct CostCurveArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub topology: TopologyIn,
    #[command(flatten)]
    #[serde(flatten)]
    pub demand: DemandIn,
    #[arg(long, value_enum, default_value_t = PlaceStrategy::ReverseGreedy)]
    pub strategy: PlaceStrategy,
    /// Server counts, comma-separated or FIRST:LAST.
    #[arg(long, value_parser = parse_list, default_value = "1:10")]
    pub ks: List,
    #[arg(long, value_parser = parse_range)]
    pub window: Option<DayRange>,
}

#[derive(Debug, Args, Serialize)]
pub struct GeoPeriodArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub geo: GeoIn,
    /// Days to count; default: all.
    #[arg(long, value_parser = parse_range)]
    pub period: Option<DayRange>,
}

#[derive(Debug, Args, Serialize)]
pub struct GeoMatrixArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub period: GeoPeriodArgs,
    /// Emit the random-region null model instead.
    #[arg(long)]
    pub baseline: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct GeoPageArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub geo: GeoIn,
    #[arg(long)]
    pub pid: String,
}

#[derive(Debug, Args, Serialize)]
pub struct GeoFpArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub geo: GeoIn,
    #[arg(long, value_parser = parse_range, default_value = "0:17")]
    pub home_window: DayRange,
    #[arg(long, value_parser = parse_range, default_value = "24:30")]
    pub holiday_window: DayRange,
    /// Census file (`home_region,remote_region,count`) to correlate against.
    #[arg(long)]
    pub census: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 50)]
    pub truncation: usize,
    #[arg(long, default_value_t = 200)]
    pub iterations: usize,
}

//! Synthetic corpora standing in for the released dataset.
//!
//! Two generators are provided:
//!
//! * [`generate_synthetic`] grows page cascades over a region-structured
//!   friendship graph. Users are split into `n_regions` home regions; region
//!   `r` owns `10.r.0.0/16`. An optional holiday window suppresses
//!   cross-region views and optional migration flows relocate a fraction of
//!   a region's users for a window.
//! * [`generate_demand_scenario`] plants exact per-day region-pair view
//!   counts from day-type rates, for traffic model tests.
//!
//! Both keep what they planted in [`PlantedTruth`].

use super::{PostViewRecord, RecordError};
use crate::calendar::{day_of, spring_festival_week, Calendar, DayRange, DayType, EPOCH_START, SECONDS_PER_DAY};
use crate::rng::seeded;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;
use std::collections::{BTreeMap, HashSet, VecDeque};
use std::net::Ipv4Addr;

/// Region code used by synthetic corpora: `R00`, `R01`, ...
pub fn region_code(region: usize) -> String {
    format!("R{region:02}")
}

/// Address of the `slot`-th host in synthetic region `region` (`10.region.x.y`).
pub fn region_ip(region: usize, slot: usize) -> Ipv4Addr {
    Ipv4Addr::new(10, region as u8, ((slot >> 8) & 0xff) as u8, (slot & 0xff) as u8)
}

fn id_width(n: usize) -> usize {
    n.saturating_sub(1).to_string().len().max(6)
}

/// A planted move of `fraction` of `from`'s users to `to`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MigrationFlow {
    pub from: usize,
    pub to: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthConfig {
    pub n_users: usize,
    pub n_pages: usize,
    pub n_regions: usize,
    /// Probability that a friendship edge stays inside the home region.
    pub p_in: f64,
    /// Power-law exponent of the planned cascade sizes.
    pub cascade_size_exponent: f64,
    pub day_count: usize,
    pub seed: u64,
    pub mean_degree: f64,
    pub repost_prob: f64,
    pub min_cascade: usize,
    pub max_cascade: usize,
    /// Days on which cross-region views are thinned.
    pub holiday: Option<DayRange>,
    /// Probability that a cross-region view survives on a holiday day.
    pub holiday_cross_keep: f64,
    pub migration: Vec<MigrationFlow>,
    pub migration_window: DayRange,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_users: 2000,
            n_pages: 200,
            n_regions: 34,
            p_in: 0.9,
            cascade_size_exponent: 2.5,
            day_count: 45,
            seed: crate::rng::DEFAULT_SEED,
            mean_degree: 8.0,
            repost_prob: 0.5,
            min_cascade: 2,
            max_cascade: 500,
            holiday: None,
            holiday_cross_keep: 0.3,
            migration: Vec::new(),
            migration_window: spring_festival_week(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), RecordError> {
        let bad = |m: &str| Err(RecordError::InvalidConfig(m.to_string()));
        if self.n_users == 0 {
            return bad("n_users must be positive");
        }
        if self.n_regions == 0 || self.n_regions > 256 {
            return bad("n_regions must be in 1..=256");
        }
        if self.n_users.div_ceil(self.n_regions) > 65_536 {
            return bad("more than 65536 users per region do not fit a /16 block");
        }
        if self.day_count == 0 {
            return bad("day_count must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.p_in) {
            return bad("p_in must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.repost_prob) || !(0.0..=1.0).contains(&self.holiday_cross_keep) {
            return bad("probabilities must lie in [0, 1]");
        }
        if self.cascade_size_exponent.is_nan() || self.cascade_size_exponent <= 1.0 {
            return bad("cascade_size_exponent must exceed 1");
        }
        if self.min_cascade == 0 || self.max_cascade < self.min_cascade {
            return bad("need 1 <= min_cascade <= max_cascade");
        }
        if self.mean_degree.is_nan() || self.mean_degree < 0.0 {
            return bad("mean_degree must be non-negative");
        }
        for f in &self.migration {
            if f.from >= self.n_regions || f.to >= self.n_regions || f.from == f.to {
                return bad("migration flow regions out of range or equal");
            }
            if !(0.0..=1.0).contains(&f.fraction) {
                return bad("migration fraction must lie in [0, 1]");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mover {
    pub user: String,
    pub from: usize,
    pub to: usize,
    /// Views generated inside the migration window.
    pub window_views: u64,
    /// Views generated outside it.
    pub other_views: u64,
}

/// What a generator planted, for checking analyses against.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PlantedTruth {
    pub region_codes: Vec<String>,
    /// Home region index per user id.
    pub home: BTreeMap<String, usize>,
    /// Exact counts by (owner home region, viewer location region, day).
    pub demand: BTreeMap<(usize, usize, i64), u64>,
    pub movers: Vec<Mover>,
}

impl PlantedTruth {
    /// Planted movers by (home, remote). With `observed_only`, only movers
    /// with views both inside and outside the migration window count, since
    /// nobody else leaves a trace of the move in the records.
    pub fn floating_population(&self, observed_only: bool) -> BTreeMap<(usize, usize), u64> {
        let mut out = BTreeMap::new();
        for m in &self.movers {
            if observed_only && (m.window_views == 0 || m.other_views == 0) {
                continue;
            }
            *out.entry((m.from, m.to)).or_insert(0) += 1;
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub records: Vec<PostViewRecord>,
    pub truth: PlantedTruth,
}

struct Population {
    ids: Vec<String>,
    home: Vec<usize>,
    slot: Vec<usize>,
    members: Vec<Vec<usize>>,
}

impl Population {
    fn new(n_users: usize, n_regions: usize) -> Self {
        let w = id_width(n_users);
        let mut members = vec![Vec::new(); n_regions];
        let mut home = Vec::with_capacity(n_users);
        let mut slot = Vec::with_capacity(n_users);
        for i in 0..n_users {
            let r = i % n_regions;
            slot.push(members[r].len());
            members[r].push(i);
            home.push(r);
        }
        let ids = (0..n_users).map(|i| format!("u{i:0w$}")).collect();
        Population { ids, home, slot, members }
    }
}

fn friendship_graph(cfg: &SynthConfig, pop: &Population, rng: &mut crate::rng::Rng) -> Vec<Vec<usize>> {
    let n = cfg.n_users;
    let mut adj = vec![Vec::new(); n];
    if n < 2 {
        return adj;
    }
    let target = (n as f64 * cfg.mean_degree / 2.0).round() as usize;
    let mut seen = HashSet::with_capacity(target * 2);
    let mut attempts = 0usize;
    while seen.len() < target && attempts < target * 20 {
        attempts += 1;
        let u = rng.random_range(0..n);
        let ru = pop.home[u];
        let within = cfg.n_regions == 1 || rng.random::<f64>() < cfg.p_in;
        let v = if within {
            let m = &pop.members[ru];
            if m.len() < 2 {
                continue;
            }
            m[rng.random_range(0..m.len())]
        } else {
            let mut r = rng.random_range(0..cfg.n_regions - 1);
            if r >= ru {
                r += 1;
            }
            let m = &pop.members[r];
            if m.is_empty() {
                continue;
            }
            m[rng.random_range(0..m.len())]
        };
        if u == v {
            continue;
        }
        let key = (u.min(v), u.max(v));
        if seen.insert(key) {
            adj[u].push(v);
            adj[v].push(u);
        }
    }
    for a in &mut adj {
        a.sort_unstable();
    }
    adj
}

fn planned_size(cfg: &SynthConfig, rng: &mut crate::rng::Rng) -> usize {
    let u: f64 = 1.0 - rng.random::<f64>();
    let x = cfg.min_cascade as f64 * u.powf(-1.0 / (cfg.cascade_size_exponent - 1.0));
    (x.floor() as usize).clamp(cfg.min_cascade, cfg.max_cascade)
}

/// Generates a cascade corpus. Output is a pure function of `cfg`.
///
/// Every page starts with a self-view by its root (so that every post owner
/// has at least one located view) and grows breadth-first over friendships:
/// each infectious user exposes friends who have not seen the page yet, in a
/// random order, until the page's planned size is reached. A viewer reposts
/// with probability `repost_prob`.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<SynthCorpus, RecordError> {
    cfg.validate()?;
    let mut rng = seeded(cfg.seed);
    let pop = Population::new(cfg.n_users, cfg.n_regions);
    let adj = friendship_graph(cfg, &pop, &mut rng);

    // Movers: user index -> destination region.
    let mut dest: Vec<Option<usize>> = vec![None; cfg.n_users];
    for flow in &cfg.migration {
        let mut pool: Vec<usize> = pop.members[flow.from].iter().copied().filter(|&u| dest[u].is_none()).collect();
        pool.shuffle(&mut rng);
        let take = ((flow.fraction * pop.members[flow.from].len() as f64).round() as usize).min(pool.len());
        for &u in &pool[..take] {
            dest[u] = Some(flow.to);
        }
    }
    let location = |u: usize, day: i64| -> usize {
        match dest[u] {
            Some(to) if cfg.migration_window.contains(day) => to,
            _ => pop.home[u],
        }
    };

    let end = EPOCH_START + cfg.day_count as u64 * SECONDS_PER_DAY;
    let pw = id_width(cfg.n_pages);
    let mut records = Vec::new();
    let mut viewed = vec![false; cfg.n_users];
    let mut touched: Vec<usize> = Vec::new();
    for p in 0..cfg.n_pages {
        let pid = format!("p{p:0pw$}");
        let root = rng.random_range(0..cfg.n_users);
        let day0 = rng.random_range(0..cfg.day_count) as u64;
        let t0 = EPOCH_START + day0 * SECONDS_PER_DAY + rng.random_range(0..SECONDS_PER_DAY);
        let target = planned_size(cfg, &mut rng);

        for &u in &touched {
            viewed[u] = false;
        }
        touched.clear();
        viewed[root] = true;
        touched.push(root);
        let root_loc = location(root, day_of(t0));
        records.push(PostViewRecord::new(
            pop.ids[root].clone(),
            pop.ids[root].clone(),
            pid.clone(),
            region_ip(root_loc, pop.slot[root]),
            t0,
        ));

        let mut views = 0usize;
        let mut queue = VecDeque::from([(root, t0)]);
        let mut friends = Vec::new();
        while let Some((u, tu)) = queue.pop_front() {
            if views >= target {
                break;
            }
            friends.clear();
            friends.extend_from_slice(&adj[u]);
            friends.shuffle(&mut rng);
            for &v in &friends {
                if views >= target {
                    break;
                }
                if viewed[v] {
                    continue;
                }
                let tv = tu + rng.random_range(60..=7200u64);
                if tv >= end {
                    continue;
                }
                let day = day_of(tv);
                let cross = pop.home[u] != pop.home[v];
                if cross && cfg.holiday.is_some_and(|h| h.contains(day)) && rng.random::<f64>() >= cfg.holiday_cross_keep {
                    continue;
                }
                viewed[v] = true;
                touched.push(v);
                views += 1;
                records.push(PostViewRecord::new(
                    pop.ids[u].clone(),
                    pop.ids[v].clone(),
                    pid.clone(),
                    region_ip(location(v, day), pop.slot[v]),
                    tv,
                ));
                if rng.random::<f64>() < cfg.repost_prob {
                    queue.push_back((v, tv));
                }
            }
        }
    }
    records.sort_by(|a, b| (a.t, &a.pid, &a.u1, &a.u2).cmp(&(b.t, &b.pid, &b.u1, &b.u2)));

    let index: BTreeMap<&str, usize> = pop.ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut demand = BTreeMap::new();
    let mut window_views = vec![0u64; cfg.n_users];
    let mut other_views = vec![0u64; cfg.n_users];
    for r in &records {
        let owner = index[r.u1.as_str()];
        let viewer = index[r.u2.as_str()];
        let day = day_of(r.t);
        let loc = r.ip.octets()[1] as usize;
        *demand.entry((pop.home[owner], loc, day)).or_insert(0) += 1;
        if cfg.migration_window.contains(day) {
            window_views[viewer] += 1;
        } else {
            other_views[viewer] += 1;
        }
    }
    let movers = (0..cfg.n_users)
        .filter_map(|u| {
            dest[u].map(|to| Mover {
                user: pop.ids[u].clone(),
                from: pop.home[u],
                to,
                window_views: window_views[u],
                other_views: other_views[u],
            })
        })
        .collect();

    Ok(SynthCorpus {
        records,
        truth: PlantedTruth {
            region_codes: (0..cfg.n_regions).map(region_code).collect(),
            home: pop.ids.iter().cloned().zip(pop.home.iter().copied()).collect(),
            demand,
            movers,
        },
    })
}

/// Planted day-type demand between every ordered region pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemandScenario {
    pub n_regions: usize,
    pub users_per_region: usize,
    pub day_count: usize,
    pub weekday_rate: f64,
    pub weekend_rate: f64,
    pub holiday_rate: f64,
    /// Pair factors are drawn uniformly from `[1 - pair_spread, 1 + pair_spread]`.
    pub pair_spread: f64,
    /// Daily counts are multiplied by a factor drawn uniformly from `[1 - noise, 1 + noise]`.
    pub noise: f64,
    pub calendar: Calendar,
    pub seed: u64,
}

impl Default for DemandScenario {
    fn default() -> Self {
        DemandScenario {
            n_regions: 8,
            users_per_region: 5,
            day_count: 24,
            weekday_rate: 100.0,
            weekend_rate: 40.0,
            holiday_rate: 60.0,
            pair_spread: 0.0,
            noise: 0.0,
            calendar: Calendar::default(),
            seed: crate::rng::DEFAULT_SEED,
        }
    }
}

impl DemandScenario {
    pub fn rate(&self, t: DayType) -> f64 {
        match t {
            DayType::Weekday => self.weekday_rate,
            DayType::Weekend => self.weekend_rate,
            DayType::Holiday => self.holiday_rate,
        }
    }
}

/// Generates records whose per-day region-pair counts are planted exactly.
///
/// Owners and viewers are taken round-robin from each region's user pool and
/// always view from their home block, so home-region inference is exact as
/// long as every diagonal count covers the pool.
pub fn generate_demand_scenario(sc: &DemandScenario) -> Result<SynthCorpus, RecordError> {
    if sc.n_regions == 0 || sc.n_regions > 256 || sc.users_per_region < 2 || sc.day_count == 0 {
        return Err(RecordError::InvalidConfig(
            "need 1..=256 regions, at least 2 users per region and 1 day".into(),
        ));
    }
    if !(0.0..1.0).contains(&sc.pair_spread) || !(0.0..1.0).contains(&sc.noise) {
        return Err(RecordError::InvalidConfig("pair_spread and noise must lie in [0, 1)".into()));
    }
    let mut rng = seeded(sc.seed);
    let n_users = sc.n_regions * sc.users_per_region;
    let pop = Population::new(n_users, sc.n_regions);
    let mut factor = vec![vec![1.0; sc.n_regions]; sc.n_regions];
    for row in factor.iter_mut() {
        for f in row.iter_mut() {
            *f = 1.0 + sc.pair_spread * (2.0 * rng.random::<f64>() - 1.0);
        }
    }
    let mut records = Vec::new();
    let mut demand = BTreeMap::new();
    for day in 0..sc.day_count as i64 {
        let rate = sc.rate(sc.calendar.day_type(day));
        for (a, row) in factor.iter().enumerate() {
            let pid = format!("d{day:03}r{a:03}");
            for (b, &f) in row.iter().enumerate() {
                let eps = sc.noise * (2.0 * rng.random::<f64>() - 1.0);
                let count = (rate * f * (1.0 + eps)).round().max(0.0) as u64;
                if count == 0 {
                    continue;
                }
                demand.insert((a, b, day), count);
                let base = EPOCH_START + day as u64 * SECONDS_PER_DAY;
                for k in 0..count as usize {
                    let owner = pop.members[a][k % sc.users_per_region];
                    let shift = usize::from(a == b);
                    let viewer = pop.members[b][(k + shift) % sc.users_per_region];
                    let t = base + (k as u64 * SECONDS_PER_DAY) / count;
                    records.push(PostViewRecord::new(
                        pop.ids[owner].clone(),
                        pop.ids[viewer].clone(),
                        pid.clone(),
                        region_ip(b, pop.slot[viewer]),
                        t,
                    ));
                }
            }
        }
    }
    records.sort_by(|a, b| (a.t, &a.pid, &a.u1, &a.u2).cmp(&(b.t, &b.pid, &b.u1, &b.u2)));
    Ok(SynthCorpus {
        records,
        truth: PlantedTruth {
            region_codes: (0..sc.n_regions).map(region_code).collect(),
            home: pop.ids.iter().cloned().zip(pop.home.iter().copied()).collect(),
            demand,
            movers: Vec::new(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::records::{parse_records, write_records};

    fn small() -> SynthConfig {
        SynthConfig { n_users: 100, n_pages: 5, seed: 42, ..SynthConfig::default() }
    }

    #[test]
    fn deterministic_bytes() {
        let a = write_records(&generate_synthetic(&small()).unwrap().records);
        let b = write_records(&generate_synthetic(&small()).unwrap().records);
        assert_eq!(a, b);
        let c = write_records(&generate_synthetic(&SynthConfig { seed: 43, ..small() }).unwrap().records);
        assert_ne!(a, c);
    }

    #[test]
    fn exact_page_count_and_parseable() {
        let corpus = generate_synthetic(&small()).unwrap();
        let pids: HashSet<_> = corpus.records.iter().map(|r| r.pid.clone()).collect();
        assert_eq!(pids.len(), 5);
        let reparsed = parse_records(&write_records(&corpus.records)).unwrap();
        assert_eq!(reparsed, corpus.records);
    }

    #[test]
    fn timestamps_inside_day_span() {
        let cfg = SynthConfig { n_users: 300, n_pages: 40, day_count: 3, ..SynthConfig::default() };
        let corpus = generate_synthetic(&cfg).unwrap();
        for r in &corpus.records {
            assert!(r.t >= EPOCH_START && r.t < EPOCH_START + 3 * SECONDS_PER_DAY);
        }
    }

    #[test]
    fn rejects_bad_configs() {
        for cfg in [
            SynthConfig { p_in: 1.5, ..small() },
            SynthConfig { n_regions: 0, ..small() },
            SynthConfig { day_count: 0, ..small() },
            SynthConfig { n_regions: 300, ..small() },
            SynthConfig { migration: vec![MigrationFlow { from: 1, to: 1, fraction: 0.1 }], ..small() },
        ] {
            assert!(matches!(generate_synthetic(&cfg), Err(RecordError::InvalidConfig(_))));
        }
    }

    #[test]
    fn migration_moves_planned_fraction() {
        let cfg = SynthConfig {
            n_users: 680,
            migration: vec![MigrationFlow { from: 1, to: 2, fraction: 0.1 }],
            ..SynthConfig::default()
        };
        let corpus = generate_synthetic(&cfg).unwrap();
        assert_eq!(corpus.truth.movers.len(), 2);
        assert!(corpus.truth.movers.iter().all(|m| m.from == 1 && m.to == 2));
    }

    #[test]
    fn demand_scenario_counts_match_records() {
        let sc = DemandScenario { n_regions: 3, day_count: 4, noise: 0.05, pair_spread: 0.1, ..DemandScenario::default() };
        let corpus = generate_demand_scenario(&sc).unwrap();
        let total: u64 = corpus.truth.demand.values().sum();
        assert_eq!(total as usize, corpus.records.len());
        assert!(corpus.records.iter().all(|r| !r.is_self_view()));
    }
}

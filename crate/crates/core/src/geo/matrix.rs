use super::{GeoError, HomeIndex, RegionMap};
use crate::calendar::DayRange;
use crate::diffusion::build_forest;
use crate::records::PostViewRecord;
use crate::rng::seeded;
use rand::Rng as _;
use serde::Serialize;
use std::collections::{BTreeSet, HashMap};

/// Square count matrix over a map's regions: `D[home(u1)][region(ip)]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RegionDiffusionMatrix {
    pub codes: Vec<String>,
    /// Row-major, `codes.len()` squared entries.
    pub counts: Vec<u64>,
    pub period: Option<DayRange>,
    /// Records in the period with an unresolved endpoint.
    pub spill: u64,
    /// Self-views in the period; they carry no diffusion and are not counted.
    pub self_views: u64,
}

impl RegionDiffusionMatrix {
    pub fn zeros(codes: Vec<String>, period: Option<DayRange>) -> Self {
        let n = codes.len();
        RegionDiffusionMatrix { codes, counts: vec![0; n * n], period, spill: 0, self_views: 0 }
    }

    pub fn size(&self) -> usize {
        self.codes.len()
    }

    pub fn get(&self, row: usize, col: usize) -> u64 {
        self.counts[row * self.size() + col]
    }

    fn bump(&mut self, row: usize, col: usize) {
        let n = self.size();
        self.counts[row * n + col] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.size()).map(|i| self.get(i, i)).sum()
    }

    pub fn row_total(&self, row: usize) -> u64 {
        let n = self.size();
        self.counts[row * n..(row + 1) * n].iter().sum()
    }

    /// TSV with a header row of column codes and the row code leading each row.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("home\\view");
        for c in &self.codes {
            s.push('\t');
            s.push_str(c);
        }
        s.push('\n');
        for (i, code) in self.codes.iter().enumerate() {
            s.push_str(code);
            for j in 0..self.size() {
                s.push_str(&format!("\t{}", self.get(i, j)));
            }
            s.push('\n');
        }
        s
    }
}

fn in_period(r: &PostViewRecord, period: Option<DayRange>) -> bool {
    period.is_none_or(|w| w.contains_time(r.t))
}

/// Homes come from every view in `records`; only non-self views in `period`
/// are counted, so `total + spill + self_views` is the period's record count.
pub fn build_region_matrix(records: &[PostViewRecord], map: &RegionMap, period: Option<DayRange>) -> RegionDiffusionMatrix {
    let homes = HomeIndex::build(records, map, None);
    let n = map.region_count();
    let chunks: Vec<&[PostViewRecord]> = records.chunks(8192).collect();
    let parts = crate::par::map_slice(&chunks, |chunk| {
        let mut m = RegionDiffusionMatrix::zeros(Vec::new(), period);
        m.counts = vec![0; n * n];
        for r in chunk.iter().filter(|r| in_period(r, period)) {
            if r.is_self_view() {
                m.self_views += 1;
                continue;
            }
            match (homes.home(&r.u1), map.resolve(r.ip)) {
                (Some(h), Some(v)) => m.counts[h.index() * n + v.index()] += 1,
                _ => m.spill += 1,
            }
        }
        m
    });
    let mut out = RegionDiffusionMatrix::zeros(map.codes().to_vec(), period);
    for p in parts {
        for (a, b) in out.counts.iter_mut().zip(&p.counts) {
            *a += b;
        }
        out.spill += p.spill;
        out.self_views += p.self_views;
    }
    out
}

/// Diagonal share `trace(D) / sum(D)`.
pub fn homophily_index(m: &RegionDiffusionMatrix) -> Result<f64, GeoError> {
    match m.total() {
        0 => Err(GeoError::EmptyMatrix),
        t => Ok(m.trace() as f64 / t as f64),
    }
}

/// `D[r][r] / sum_s D[r][s]` per region; `None` for empty rows.
pub fn per_region_homophily(m: &RegionDiffusionMatrix) -> Vec<Option<f64>> {
    (0..m.size())
        .map(|r| match m.row_total(r) {
            0 => None,
            t => Some(m.get(r, r) as f64 / t as f64),
        })
        .collect()
}

/// Null model: every user, taken in ascending id order, is given a
/// uniformly random region, and each non-self view in `period` is counted at
/// `D[region(u1)][region(u2)]`.
pub fn baseline_matrix(records: &[PostViewRecord], map: &RegionMap, seed: u64, period: Option<DayRange>) -> RegionDiffusionMatrix {
    let mut out = RegionDiffusionMatrix::zeros(map.codes().to_vec(), period);
    let n = map.region_count();
    let counted: Vec<&PostViewRecord> = records.iter().filter(|r| in_period(r, period)).collect();
    out.self_views = counted.iter().filter(|r| r.is_self_view()).count() as u64;
    if n == 0 {
        out.spill = counted.len() as u64 - out.self_views;
        return out;
    }
    let users: BTreeSet<&str> = records.iter().flat_map(|r| [r.u1.as_str(), r.u2.as_str()]).collect();
    let mut rng = seeded(seed);
    let region: HashMap<&str, usize> = users.into_iter().map(|u| (u, rng.random_range(0..n))).collect();
    for r in counted.into_iter().filter(|r| !r.is_self_view()) {
        out.bump(region[r.u1.as_str()], region[r.u2.as_str()]);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PageViewDistribution {
    pub pid: String,
    /// Home region of the forest's smallest root, if located.
    pub origin: Option<String>,
    /// Views by other users, per viewer region (map order).
    pub counts: Vec<u64>,
    pub unresolved: u64,
}

impl PageViewDistribution {
    /// Region holding the most views, ties to the smallest code.
    pub fn peak(&self, map: &RegionMap) -> Option<String> {
        super::plurality(&self.counts).map(|r| map.code(r).to_string())
    }
}

/// Per-region view counts of one page. Home regions come from all of
/// `records`; self-views are not counted as views.
pub fn page_view_distribution(records: &[PostViewRecord], pid: &str, map: &RegionMap) -> Result<PageViewDistribution, GeoError> {
    let page: Vec<PostViewRecord> = records.iter().filter(|r| r.pid == pid).cloned().collect();
    if page.is_empty() {
        return Err(GeoError::UnknownPage(pid.to_string()));
    }
    let mut counts = vec![0u64; map.region_count()];
    let mut unresolved = 0;
    for r in page.iter().filter(|r| !r.is_self_view()) {
        match map.resolve(r.ip) {
            Some(id) => counts[id.index()] += 1,
            None => unresolved += 1,
        }
    }
    let forest = build_forest(&page, pid);
    let homes = HomeIndex::build(records, map, None);
    let origin = forest
        .roots
        .iter()
        .next()
        .and_then(|root| homes.home(root))
        .map(|h| map.code(h).to_string());
    Ok(PageViewDistribution { pid: pid.to_string(), origin, counts, unresolved })
}

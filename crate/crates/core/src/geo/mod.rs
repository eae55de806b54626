//! Region resolution, region diffusion matrices, geo-homophily and
//! floating-population projection.
//!
//! Matrices are oriented with rows indexed by the post owner's home region
//! and columns by the region the viewer's address resolves to.

mod dpm;
mod fp;
mod matrix;

pub use dpm::{dpm_fit, DpmConfig, DpmFit};
pub use fp::{correlate_census, estimate_fp, holiday_observations, FpEstimate};
pub use matrix::{
    baseline_matrix, build_region_matrix, homophily_index, page_view_distribution, per_region_homophily,
    PageViewDistribution, RegionDiffusionMatrix,
};

use crate::calendar::DayRange;
use crate::records::{region_code, PostViewRecord};
use serde::Serialize;
use std::collections::{BTreeMap, HashMap};
use std::net::Ipv4Addr;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("line {0}: {1}")]
    Parse(usize, String),
    #[error("invalid CIDR prefix `{0}`")]
    InvalidCidr(String),
    #[error("prefix {0} is mapped to two regions")]
    DuplicatePrefix(String),
    #[error("user `{0}` has no resolvable records")]
    NoResolvableRecords(String),
    #[error("matrix has no counts")]
    EmptyMatrix,
    #[error("unknown page `{0}`")]
    UnknownPage(String),
    #[error("no observations")]
    EmptyInput,
    #[error("observation {index} has {len} regions, expected {expected}")]
    DimensionMismatch { index: usize, len: usize, expected: usize },
    #[error("invalid DPM config: {0}")]
    InvalidConfig(String),
    #[error("window {0} is empty")]
    EmptyWindow(&'static str),
    #[error("only {0} shared cells, need at least 3")]
    InsufficientCells(usize),
    #[error("correlation undefined: a series is constant over the shared cells")]
    ZeroVariance,
}

/// Index into [`RegionMap::codes`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct RegionId(pub u16);

impl RegionId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// CIDR prefixes mapped to region codes, resolved by longest-prefix match.
///
/// Region codes are kept sorted, so [`RegionId`] order is code order.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMap {
    codes: Vec<String>,
    entries: Vec<(u32, u8, RegionId)>,
    /// Per prefix length, longest first: masked network -> region.
    tables: Vec<(u8, HashMap<u32, RegionId>)>,
}

fn mask(len: u8) -> u32 {
    if len == 0 { 0 } else { u32::MAX << (32 - len) }
}

fn parse_cidr(s: &str) -> Result<(u32, u8), GeoError> {
    let bad = || GeoError::InvalidCidr(s.to_string());
    let (addr, len) = s.split_once('/').ok_or_else(bad)?;
    let addr: Ipv4Addr = addr.parse().map_err(|_| bad())?;
    let len: u8 = len.parse().map_err(|_| bad())?;
    if len > 32 {
        return Err(bad());
    }
    let net = u32::from(addr);
    if net & !mask(len) != 0 {
        return Err(bad());
    }
    Ok((net, len))
}

impl RegionMap {
    /// Builds a map from `(cidr, region_code)` pairs.
    pub fn new<S: AsRef<str>>(entries: &[(S, S)]) -> Result<Self, GeoError> {
        let mut parsed = Vec::with_capacity(entries.len());
        for (cidr, code) in entries {
            let (net, len) = parse_cidr(cidr.as_ref().trim())?;
            parsed.push((net, len, code.as_ref().trim().to_string()));
        }
        Self::from_parsed(parsed)
    }

    fn from_parsed(parsed: Vec<(u32, u8, String)>) -> Result<Self, GeoError> {
        let mut codes: Vec<String> = parsed.iter().map(|p| p.2.clone()).collect();
        codes.sort();
        codes.dedup();
        let id = |c: &str| RegionId(codes.binary_search_by(|x| x.as_str().cmp(c)).expect("collected") as u16);
        let mut by_len: BTreeMap<u8, HashMap<u32, RegionId>> = BTreeMap::new();
        let mut entries = Vec::with_capacity(parsed.len());
        for (net, len, code) in &parsed {
            let rid = id(code);
            let table = by_len.entry(*len).or_default();
            match table.insert(*net, rid) {
                Some(prev) if prev != rid => {
                    return Err(GeoError::DuplicatePrefix(format!("{}/{}", Ipv4Addr::from(*net), len)));
                }
                Some(_) => {}
                None => entries.push((*net, *len, rid)),
            }
        }
        let tables = by_len.into_iter().rev().collect();
        Ok(RegionMap { codes, entries, tables })
    }

    /// Parses `cidr,region_code` lines; blank and `#` lines are skipped.
    pub fn parse(text: &str) -> Result<Self, GeoError> {
        let mut parsed = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((cidr, code)) = line.split_once(',') else {
                return Err(GeoError::Parse(i + 1, format!("expected cidr,region_code: `{line}`")));
            };
            let code = code.trim();
            if code.is_empty() || code.contains(',') {
                return Err(GeoError::Parse(i + 1, format!("bad region code: `{line}`")));
            }
            let (net, len) = parse_cidr(cidr.trim()).map_err(|e| GeoError::Parse(i + 1, e.to_string()))?;
            parsed.push((net, len, code.to_string()));
        }
        Self::from_parsed(parsed)
    }

    /// The map matching synthetic corpora: `10.r.0.0/16 -> Rrr`.
    pub fn synthetic(n_regions: usize) -> Self {
        let parsed = (0..n_regions).map(|r| (u32::from(Ipv4Addr::new(10, r as u8, 0, 0)), 16, region_code(r))).collect();
        Self::from_parsed(parsed).expect("distinct prefixes")
    }

    /// Longest-prefix match; `None` means unresolved.
    pub fn resolve(&self, ip: Ipv4Addr) -> Option<RegionId> {
        let x = u32::from(ip);
        self.tables.iter().find_map(|(len, t)| t.get(&(x & mask(*len))).copied())
    }

    pub fn codes(&self) -> &[String] {
        &self.codes
    }

    pub fn code(&self, id: RegionId) -> &str {
        &self.codes[id.index()]
    }

    pub fn region_id(&self, code: &str) -> Option<RegionId> {
        self.codes.binary_search_by(|x| x.as_str().cmp(code)).ok().map(|i| RegionId(i as u16))
    }

    pub fn region_count(&self) -> usize {
        self.codes.len()
    }

    pub fn to_text(&self) -> String {
        self.entries
            .iter()
            .map(|&(net, len, r)| format!("{}/{},{}\n", Ipv4Addr::from(net), len, self.code(r)))
            .collect()
    }
}

/// Region code of `ip`, or `None` when no prefix matches.
pub fn resolve_region(ip: Ipv4Addr, map: &RegionMap) -> Option<&str> {
    map.resolve(ip).map(|r| map.code(r))
}

/// Plurality region over one user's records, ties to the smallest code.
pub fn assign_home_region(user: &str, records: &[PostViewRecord], map: &RegionMap) -> Result<RegionId, GeoError> {
    let mut counts = vec![0u64; map.region_count()];
    for r in records {
        if let Some(id) = map.resolve(r.ip) {
            counts[id.index()] += 1;
        }
    }
    plurality(&counts).ok_or_else(|| GeoError::NoResolvableRecords(user.to_string()))
}

/// Index of the largest count, ties to the smallest index; `None` if all zero.
pub(crate) fn plurality(counts: &[u64]) -> Option<RegionId> {
    let (best, &max) = counts.iter().enumerate().rev().max_by_key(|&(_, c)| c)?;
    (max > 0).then_some(RegionId(best as u16))
}

/// Home region of every user with at least one resolvable view.
///
/// A user's views are the records where they are the viewer (`u2`).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HomeIndex {
    homes: HashMap<String, RegionId>,
}

impl HomeIndex {
    /// Plurality over views inside `window` (all views when `None`).
    pub fn build(records: &[PostViewRecord], map: &RegionMap, window: Option<DayRange>) -> Self {
        let counts = view_counts(records, map, window);
        let homes = counts
            .into_iter()
            .filter_map(|(u, c)| plurality(&c).map(|h| (u.to_string(), h)))
            .collect();
        HomeIndex { homes }
    }

    pub fn home(&self, user: &str) -> Option<RegionId> {
        self.homes.get(user).copied()
    }

    pub fn len(&self) -> usize {
        self.homes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.homes.is_empty()
    }

    /// Users in ascending id order.
    pub fn sorted(&self) -> Vec<(&str, RegionId)> {
        let mut v: Vec<(&str, RegionId)> = self.homes.iter().map(|(u, &r)| (u.as_str(), r)).collect();
        v.sort_unstable();
        v
    }
}

const CHUNK: usize = 8192;

/// Resolved view counts per viewer, keyed by user id.
pub(crate) fn view_counts<'a>(records: &'a [PostViewRecord], map: &RegionMap, window: Option<DayRange>) -> BTreeMap<&'a str, Vec<u64>> {
    let n = map.region_count();
    let chunks: Vec<&[PostViewRecord]> = records.chunks(CHUNK).collect();
    let parts = crate::par::map_slice(&chunks, |chunk| {
        let mut m: HashMap<&'a str, Vec<u64>> = HashMap::new();
        for r in chunk.iter() {
            if window.is_some_and(|w| !w.contains_time(r.t)) {
                continue;
            }
            if let Some(id) = map.resolve(r.ip) {
                m.entry(r.u2.as_str()).or_insert_with(|| vec![0; n])[id.index()] += 1;
            }
        }
        m
    });
    let mut out: BTreeMap<&str, Vec<u64>> = BTreeMap::new();
    for part in parts {
        for (u, c) in part {
            let e = out.entry(u).or_insert_with(|| vec![0; n]);
            for (a, b) in e.iter_mut().zip(c) {
                *a += b;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(u: &str, ip: [u8; 4]) -> PostViewRecord {
        PostViewRecord::new("o", u, "p", Ipv4Addr::from(ip), crate::calendar::EPOCH_START)
    }

    #[test]
    fn longest_prefix_wins() {
        let m = RegionMap::parse("10.0.0.0/8,RA\n10.3.0.0/16,R3\n").unwrap();
        assert_eq!(resolve_region(Ipv4Addr::new(10, 3, 0, 7), &m), Some("R3"));
        assert_eq!(resolve_region(Ipv4Addr::new(10, 3, 9, 9), &m), Some("R3"));
        assert_eq!(resolve_region(Ipv4Addr::new(10, 4, 9, 9), &m), Some("RA"));
        assert_eq!(resolve_region(Ipv4Addr::new(192, 168, 1, 1), &m), None);
        let all = RegionMap::parse("0.0.0.0/0,ANY\n").unwrap();
        assert_eq!(resolve_region(Ipv4Addr::new(1, 2, 3, 4), &all), Some("ANY"));
        assert_eq!(RegionMap::parse(&m.to_text()).unwrap(), m);
    }

    #[test]
    fn rejects_bad_entries() {
        assert!(matches!(RegionMap::parse("10.0.0.1/8,RA\n"), Err(GeoError::Parse(1, _))));
        assert!(matches!(RegionMap::parse("10.0.0.0/33,RA\n"), Err(GeoError::Parse(1, _))));
        assert!(matches!(RegionMap::parse("10.0.0.0,RA\n"), Err(GeoError::Parse(1, _))));
        assert!(matches!(RegionMap::parse("nonsense\n"), Err(GeoError::Parse(1, _))));
        assert!(matches!(RegionMap::parse("10.0.0.0/8,RA\n10.0.0.0/8,RB\n"), Err(GeoError::DuplicatePrefix(_))));
        assert!(RegionMap::parse("10.0.0.0/8,RA\n10.0.0.0/8,RA\n").is_ok());
    }

    #[test]
    fn synthetic_map_matches_generator_blocks() {
        let m = RegionMap::synthetic(34);
        assert_eq!(m.region_count(), 34);
        assert_eq!(resolve_region(crate::records::region_ip(17, 300), &m), Some("R17"));
        assert_eq!(m.region_id("R05"), Some(RegionId(5)));
    }

    #[test]
    fn home_plurality_and_ties() {
        let m = RegionMap::parse("10.1.0.0/16,BJ\n10.2.0.0/16,GD\n").unwrap();
        let bj = [10, 1, 0, 1];
        let gd = [10, 2, 0, 1];
        let u = |ips: &[[u8; 4]]| ips.iter().map(|ip| rec("u", *ip)).collect::<Vec<_>>();
        assert_eq!(assign_home_region("u", &u(&[bj, bj, bj, gd]), &m), Ok(m.region_id("BJ").unwrap()));
        assert_eq!(assign_home_region("u", &u(&[gd, bj, gd, bj]), &m), Ok(m.region_id("BJ").unwrap()));
        assert_eq!(
            assign_home_region("u", &u(&[[192, 168, 0, 1]]), &m),
            Err(GeoError::NoResolvableRecords("u".into()))
        );
        let rs = vec![rec("a", gd), rec("a", gd), rec("b", bj), rec("c", [1, 1, 1, 1])];
        let idx = HomeIndex::build(&rs, &m, None);
        assert_eq!(idx.home("a"), m.region_id("GD"));
        assert_eq!(idx.home("b"), m.region_id("BJ"));
        assert_eq!(idx.home("c"), None);
        assert_eq!(idx.home("o"), None);
        assert!(HomeIndex::build(&rs, &m, Some(DayRange::new(1, 3))).is_empty());
    }

    proptest! {
        #[test]
        fn shorter_prefix_never_changes_existing_answers(
            nets in proptest::collection::vec((any::<u32>(), 8u8..=30), 1..12),
            extra in (any::<u32>(), 0u8..8),
            queries in proptest::collection::vec(any::<u32>(), 1..40),
        ) {
            let entry = |(n, l): (u32, u8)| (format!("{}/{}", Ipv4Addr::from(n & mask(l)), l), format!("R{l}"));
            let mut base: Vec<(String, String)> = Vec::new();
            for e in nets { let x = entry(e); if !base.iter().any(|b| b.0 == x.0) { base.push(x); } }
            let before = RegionMap::new(&base).unwrap();
            let mut more = base.clone();
            let x = entry(extra);
            prop_assume!(!more.iter().any(|b| b.0 == x.0));
            more.push(x);
            let after = RegionMap::new(&more).unwrap();
            for q in queries {
                let ip = Ipv4Addr::from(q);
                if let Some(code) = resolve_region(ip, &before) {
                    prop_assert_eq!(resolve_region(ip, &after), Some(code));
                }
            }
        }

        #[test]
        fn resolve_is_the_longest_matching_entry(
            nets in proptest::collection::vec((any::<u32>(), 0u8..=32), 1..12),
            q in any::<u32>(),
        ) {
            let mut base: Vec<(String, String)> = Vec::new();
            for (n, l) in nets {
                let c = format!("{}/{}", Ipv4Addr::from(n & mask(l)), l);
                if !base.iter().any(|b| b.0 == c) { base.push((c, format!("L{l}"))); }
            }
            let m = RegionMap::new(&base).unwrap();
            let oracle = base.iter()
                .filter_map(|(c, code)| {
                    let (net, len) = parse_cidr(c).unwrap();
                    (q & mask(len) == net).then_some((len, code.as_str()))
                })
                .max_by_key(|x| x.0)
                .map(|x| x.1);
            prop_assert_eq!(resolve_region(Ipv4Addr::from(q), &m), oracle);
        }
    }
}

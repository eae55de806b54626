use super::BackboneError;
use crate::calendar::{day_of, DayRange};
use crate::geo::{HomeIndex, RegionMap};
use crate::records::PostViewRecord;
use std::collections::{BTreeMap, BTreeSet};

/// Message counts by (owner region, viewer region, day).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DemandMatrix {
    /// Region codes; pair keys index into this list.
    pub regions: Vec<String>,
    pub counts: BTreeMap<(usize, usize, i64), u64>,
    /// Records left out because an endpoint could not be located.
    pub excluded: u64,
}

impl DemandMatrix {
    pub fn new(regions: Vec<String>) -> Self {
        DemandMatrix { regions, ..Default::default() }
    }

    pub fn region_index(&self, code: &str) -> Option<usize> {
        self.regions.iter().position(|r| r == code)
    }

    pub fn get(&self, a: usize, b: usize, day: i64) -> u64 {
        self.counts.get(&(a, b, day)).copied().unwrap_or(0)
    }

    pub fn add(&mut self, a: usize, b: usize, day: i64, count: u64) {
        if count > 0 {
            *self.counts.entry((a, b, day)).or_insert(0) += count;
        }
    }

    pub fn days(&self) -> BTreeSet<i64> {
        self.counts.keys().map(|k| k.2).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    /// Totals per ordered pair over `window`.
    pub fn pair_totals(&self, window: DayRange) -> BTreeMap<(usize, usize), u64> {
        let mut out = BTreeMap::new();
        for (&(a, b, d), &c) in &self.counts {
            if window.contains(d) {
                *out.entry((a, b)).or_insert(0) += c;
            }
        }
        out
    }

    /// Folds `f(a, b) + f(b, a)` onto the key with `a <= b`.
    pub fn symmetrized(&self) -> DemandMatrix {
        let mut out = DemandMatrix::new(self.regions.clone());
        out.excluded = self.excluded;
        for (&(a, b, d), &c) in &self.counts {
            out.add(a.min(b), a.max(b), d, c);
        }
        out
    }

    /// TSV `day  region_a  region_b  count`, one nonzero cell per line.
    pub fn to_tsv(&self) -> String {
        let mut rows: Vec<(i64, usize, usize, u64)> = self.counts.iter().map(|(&(a, b, d), &c)| (d, a, b, c)).collect();
        rows.sort_unstable();
        let mut s = String::new();
        for (d, a, b, c) in rows {
            s.push_str(&format!("{}\t{}\t{}\t{}\n", d, self.regions[a], self.regions[b], c));
        }
        s
    }

    /// Reads [`DemandMatrix::to_tsv`] output. Region codes are collected from
    /// the file and sorted.
    pub fn from_tsv(text: &str) -> Result<Self, BackboneError> {
        let mut rows = Vec::new();
        let mut codes = BTreeSet::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split('\t').map(str::trim).collect();
            let err = |m: &str| BackboneError::DemandParse(i + 1, format!("{m}: `{line}`"));
            if f.len() != 4 || f[1].is_empty() || f[2].is_empty() {
                return Err(err("expected day<TAB>region_a<TAB>region_b<TAB>count"));
            }
            let day: i64 = f[0].parse().map_err(|_| err("bad day"))?;
            let count: u64 = f[3].parse().map_err(|_| err("bad count"))?;
            codes.insert(f[1].to_string());
            codes.insert(f[2].to_string());
            rows.push((day, f[1].to_string(), f[2].to_string(), count));
        }
        let regions: Vec<String> = codes.into_iter().collect();
        let mut m = DemandMatrix::new(regions);
        for (d, a, b, c) in rows {
            let (ia, ib) = (m.region_index(&a).expect("collected"), m.region_index(&b).expect("collected"));
            m.add(ia, ib, d, c);
        }
        Ok(m)
    }
}

/// Counts, per day in `window`, records whose post owner's home region is
/// `a` and whose viewer was located in `b`. Homes are inferred from all of
/// `records`; records with an unlocatable endpoint are counted in
/// `excluded`.
pub fn derive_demand(records: &[PostViewRecord], map: &RegionMap, window: DayRange) -> DemandMatrix {
    let homes = HomeIndex::build(records, map, None);
    let mut m = DemandMatrix::new(map.codes().to_vec());
    for r in records {
        let day = day_of(r.t);
        if !window.contains(day) {
            continue;
        }
        match (homes.home(&r.u1), map.resolve(r.ip)) {
            (Some(a), Some(b)) => m.add(a.index(), b.index(), day, 1),
            _ => m.excluded += 1,
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calendar::EPOCH_START;
    use crate::records::region_ip;
    use std::net::Ipv4Addr;

    fn rec(u1: &str, u2: &str, region: usize, day: u64) -> PostViewRecord {
        PostViewRecord::new(u1, u2, "p", region_ip(region, 1), EPOCH_START + day * 86_400 + 5)
    }

    #[test]
    fn derive_counts_by_owner_home_and_viewer_location() {
        let map = RegionMap::synthetic(3);
        // Owner o lives in region 0 (its own views), viewers sit in region 1.
        let mut rs = vec![rec("x", "o", 0, 0)];
        for v in ["v1", "v2", "v3"] {
            rs.push(rec("o", v, 1, 2));
        }
        let m = derive_demand(&rs, &map, DayRange::new(0, 5));
        assert_eq!(m.get(0, 1, 2), 3);
        // x never viewed anything, so its page view by o has no owner home.
        assert_eq!(m.excluded, 1);
        assert_eq!(m.total(), 3);

        let none = derive_demand(&rs, &map, DayRange::new(10, 12));
        assert_eq!(none.total(), 0);
    }

    #[test]
    fn unresolved_viewers_are_excluded() {
        let map = RegionMap::synthetic(2);
        let rs = vec![
            rec("o", "o", 0, 0),
            PostViewRecord::new("o", "w", "p", Ipv4Addr::new(192, 168, 0, 1), EPOCH_START + 10),
        ];
        let m = derive_demand(&rs, &map, DayRange::new(0, 0));
        assert_eq!(m.total(), 1);
        assert_eq!(m.excluded, 1);
    }

    #[test]
    fn tsv_round_trip_and_symmetrize() {
        let mut m = DemandMatrix::new(vec!["A".into(), "B".into()]);
        m.add(0, 1, 3, 4);
        m.add(1, 0, 3, 6);
        m.add(1, 1, 4, 2);
        assert_eq!(DemandMatrix::from_tsv(&m.to_tsv()).unwrap(), m);
        let s = m.symmetrized();
        assert_eq!(s.get(0, 1, 3), 10);
        assert_eq!(s.get(1, 0, 3), 0);
        assert!(matches!(DemandMatrix::from_tsv("1\tA\tB\n"), Err(BackboneError::DemandParse(1, _))));
    }
}

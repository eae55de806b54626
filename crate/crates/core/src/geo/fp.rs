use super::{dpm_fit, view_counts, DpmConfig, GeoError, HomeIndex, RegionMap};
use crate::calendar::DayRange;
use crate::records::PostViewRecord;
use std::collections::BTreeMap;

/// Users by (home region, remote region) code, off-diagonal only.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FpEstimate {
    pub period_home: Option<DayRange>,
    pub period_holiday: Option<DayRange>,
    pub cells: BTreeMap<(String, String), u64>,
}

impl FpEstimate {
    pub fn from_cells(cells: BTreeMap<(String, String), u64>) -> Self {
        FpEstimate { cells, ..Default::default() }
    }

    pub fn get(&self, home: &str, remote: &str) -> u64 {
        self.cells.get(&(home.to_string(), remote.to_string())).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.cells.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Parses census lines `home_region,remote_region,count`.
    pub fn parse_census(text: &str) -> Result<Self, GeoError> {
        let mut cells = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |m: &str| GeoError::Parse(i + 1, format!("{m}: `{line}`"));
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            let [home, remote, count] = f.as_slice() else {
                return Err(bad("expected home_region,remote_region,count"));
            };
            if home.is_empty() || remote.is_empty() {
                return Err(bad("empty region code"));
            }
            if home == remote {
                return Err(bad("home and remote region must differ"));
            }
            let count: u64 = count.parse().map_err(|_| bad("bad count"))?;
            if cells.insert((home.to_string(), remote.to_string()), count).is_some() {
                return Err(bad("duplicate cell"));
            }
        }
        Ok(FpEstimate::from_cells(cells))
    }

    pub fn to_census_text(&self) -> String {
        self.cells.iter().map(|((h, r), c)| format!("{h},{r},{c}\n")).collect()
    }
}

/// Viewers with a resolvable view in `window`, ascending by id, with their
/// per-region view counts.
pub fn holiday_observations<'a>(records: &'a [PostViewRecord], map: &RegionMap, window: DayRange) -> (Vec<&'a str>, Vec<Vec<u64>>) {
    view_counts(records, map, Some(window)).into_iter().unzip()
}

/// Home regions come from `home_window`. Each user seen in both windows is
/// placed by the mixture fit on holiday-window counts, and their remote
/// region is the dominant region of their component's profile. Users whose
/// remote region equals their home are dropped.
pub fn estimate_fp(
    records: &[PostViewRecord],
    map: &RegionMap,
    home_window: DayRange,
    holiday_window: DayRange,
    config: &DpmConfig,
) -> Result<FpEstimate, GeoError> {
    if home_window.is_empty() {
        return Err(GeoError::EmptyWindow("home"));
    }
    if holiday_window.is_empty() {
        return Err(GeoError::EmptyWindow("holiday"));
    }
    config.validate()?;
    let homes = HomeIndex::build(records, map, Some(home_window));
    let (users, obs): (Vec<&str>, Vec<Vec<u64>>) = view_counts(records, map, Some(holiday_window))
        .into_iter()
        .filter(|(u, _)| homes.home(u).is_some())
        .unzip();
    let mut est = FpEstimate { period_home: Some(home_window), period_holiday: Some(holiday_window), cells: BTreeMap::new() };
    if obs.is_empty() {
        return Ok(est);
    }
    let fit = dpm_fit(&obs, config)?;
    let remote_of: Vec<usize> = (0..fit.component_count()).map(|k| fit.dominant_region(k)).collect();
    for (u, &k) in users.iter().zip(&fit.assignments) {
        let home = homes.home(u).expect("filtered").index();
        let remote = remote_of[k];
        if home != remote {
            *est.cells.entry((map.codes()[home].clone(), map.codes()[remote].clone())).or_insert(0) += 1;
        }
    }
    Ok(est)
}

/// Pearson correlation over cells present in both; census cells missing from
/// the estimate are ignored.
pub fn correlate_census(est: &FpEstimate, census: &FpEstimate) -> Result<f64, GeoError> {
    let pairs: Vec<(f64, f64)> = census
        .cells
        .iter()
        .filter_map(|(k, &c)| est.cells.get(k).map(|&e| (e as f64, c as f64)))
        .collect();
    if pairs.len() < 3 {
        return Err(GeoError::InsufficientCells(pairs.len()));
    }
    let n = pairs.len() as f64;
    let (mx, my) = (pairs.iter().map(|p| p.0).sum::<f64>() / n, pairs.iter().map(|p| p.1).sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in &pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(GeoError::ZeroVariance);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

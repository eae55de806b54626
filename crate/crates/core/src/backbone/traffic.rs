use super::{BackboneError, BackboneGraph, DemandMatrix};
use crate::calendar::{Calendar, DayRange, DayType};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};

pub const DEFAULT_LAMBDA: f64 = 0.2;

/// Per-pair day-type daily rates after one spatial smoothing step.
///
/// Rates are the mean daily count over the training days of each day type.
/// Smoothing then replaces every rate by `(1 - lambda) * rate + lambda *
/// mean(neighbour rates)`, where the neighbours of `(a, b)` are the modelled
/// pairs `(a, b')` and `(a', b)` with `b'` adjacent to `b` (resp. `a'` to `a`)
/// in the backbone graph. It is a first-order random-field smoother; pairs
/// with no modelled neighbour keep their own rate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrafficModel {
    pub regions: Vec<String>,
    pub base_rate: BTreeMap<(usize, usize), [f64; 3]>,
    pub lambda: f64,
    pub train_window: DayRange,
    #[serde(skip)]
    pub calendar: Calendar,
}

fn slot(t: DayType) -> usize {
    match t {
        DayType::Weekday => 0,
        DayType::Weekend => 1,
        DayType::Holiday => 2,
    }
}

impl TrafficModel {
    pub fn rate(&self, a: usize, b: usize, t: DayType) -> f64 {
        self.base_rate.get(&(a, b)).map_or(0.0, |r| r[slot(t)])
    }

    pub fn predict(&self, a: usize, b: usize, day: i64) -> f64 {
        self.rate(a, b, self.calendar.day_type(day))
    }

    /// TSV `region_a  region_b  weekday  weekend  holiday`.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("region_a\tregion_b\tweekday\tweekend\tholiday\n");
        for (&(a, b), r) in &self.base_rate {
            s.push_str(&format!("{}\t{}\t{}\t{}\t{}\n", self.regions[a], self.regions[b], r[0], r[1], r[2]));
        }
        s
    }
}

/// Fits day-type rates on `train_window` and smooths them over `graph`.
///
/// A day type with no training day falls back to the pair's mean over the
/// whole window.
pub fn fit_traffic_model(
    demand: &DemandMatrix,
    graph: &BackboneGraph,
    train_window: DayRange,
    lambda: f64,
    calendar: &Calendar,
) -> Result<TrafficModel, BackboneError> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(BackboneError::InvalidLambda(lambda));
    }
    let totals = demand.pair_totals(train_window);
    if train_window.is_empty() || totals.is_empty() {
        return Err(BackboneError::EmptyTrainWindow);
    }
    let mut days_of = [0usize; 3];
    for d in train_window.days() {
        days_of[slot(calendar.day_type(d))] += 1;
    }
    let n_days = train_window.len() as f64;

    let mut sums: BTreeMap<(usize, usize), [u64; 3]> = totals.keys().map(|&k| (k, [0; 3])).collect();
    for (&(a, b, d), &c) in &demand.counts {
        if train_window.contains(d) {
            sums.get_mut(&(a, b)).expect("pair has train demand")[slot(calendar.day_type(d))] += c;
        }
    }
    let raw: BTreeMap<(usize, usize), [f64; 3]> = sums
        .iter()
        .map(|(&k, s)| {
            let overall = totals[&k] as f64 / n_days;
            let r = std::array::from_fn(|i| if days_of[i] > 0 { s[i] as f64 / days_of[i] as f64 } else { overall });
            (k, r)
        })
        .collect();

    let node = |r: usize| graph.representative(&demand.regions[r]);
    let adjacent = |x: usize, y: usize| match (node(x), node(y)) {
        (Some(p), Some(q)) => graph.are_adjacent(p, q),
        _ => false,
    };
    let mut base_rate = BTreeMap::new();
    for (&(a, b), r) in &raw {
        let neigh: BTreeSet<(usize, usize)> = raw
            .keys()
            .copied()
            .filter(|&(x, y)| (x == a && y != b && adjacent(y, b)) || (y == b && x != a && adjacent(x, a)))
            .collect();
        let smoothed = if neigh.is_empty() || lambda == 0.0 {
            *r
        } else {
            let k = neigh.len() as f64;
            std::array::from_fn(|i| {
                let m = neigh.iter().map(|p| raw[p][i]).sum::<f64>() / k;
                (1.0 - lambda) * r[i] + lambda * m
            })
        };
        base_rate.insert((a, b), smoothed);
    }
    Ok(TrafficModel { regions: demand.regions.clone(), base_rate, lambda, train_window, calendar: calendar.clone() })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionError {
    /// Mean relative error over cells with positive actual count.
    pub error_rate: f64,
    pub cells: usize,
    pub zero_cells: usize,
    /// Sum of `|predicted|` over cells whose actual count is zero.
    pub zero_cell_abs_error: f64,
}

/// Scores `model` on every (pair, day) cell of `test_window` covering pairs
/// seen in training or testing.
pub fn evaluate_prediction(model: &TrafficModel, demand: &DemandMatrix, test_window: DayRange) -> Result<PredictionError, BackboneError> {
    if test_window.is_empty() {
        return Err(BackboneError::EmptyTestWindow);
    }
    if test_window.overlaps(&model.train_window) {
        return Err(BackboneError::WindowOverlap);
    }
    let mut pairs: BTreeSet<(usize, usize)> = model.base_rate.keys().copied().collect();
    pairs.extend(demand.pair_totals(test_window).into_keys());
    let (mut rel, mut cells, mut zero_cells, mut zero_mass) = (0.0, 0usize, 0usize, 0.0);
    for &(a, b) in &pairs {
        for d in test_window.days() {
            let actual = demand.get(a, b, d) as f64;
            let predicted = model.predict(a, b, d);
            if actual > 0.0 {
                rel += (predicted - actual).abs() / actual;
                cells += 1;
            } else {
                zero_mass += predicted.abs();
                zero_cells += 1;
            }
        }
    }
    if cells == 0 {
        return Err(BackboneError::EmptyTestWindow);
    }
    Ok(PredictionError { error_rate: rel / cells as f64, cells, zero_cells, zero_cell_abs_error: zero_mass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backbone::ring_topology;
    use crate::records::{generate_demand_scenario, DemandScenario};

    fn constant(regions: usize, days: i64, c: u64) -> DemandMatrix {
        let mut m = DemandMatrix::new((0..regions).map(crate::records::region_code).collect());
        for d in 0..days {
            for a in 0..regions {
                for b in 0..regions {
                    m.add(a, b, d, c);
                }
            }
        }
        m
    }

    #[test]
    fn constant_field_is_a_fixed_point() {
        let g = ring_topology(4);
        let m = constant(4, 10, 7);
        for lambda in [0.0, 0.2, 1.0] {
            let model = fit_traffic_model(&m, &g, DayRange::new(0, 9), lambda, &Calendar::default()).unwrap();
            for t in DayType::ALL {
                assert!((model.rate(1, 2, t) - 7.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lambda_zero_is_plain_means_and_smoothing_mixes_neighbours() {
        let g = ring_topology(4);
        let mut m = DemandMatrix::new((0..4).map(crate::records::region_code).collect());
        // Days 0..=1 are Thu/Fri, day 2 is Saturday.
        for (d, c) in [(0, 10), (1, 20), (2, 6)] {
            m.add(0, 0, d, c);
        }
        m.add(0, 1, 0, 40);
        let w = DayRange::new(0, 2);
        let plain = fit_traffic_model(&m, &g, w, 0.0, &Calendar::default()).unwrap();
        assert_eq!(plain.rate(0, 0, DayType::Weekday), 15.0);
        assert_eq!(plain.rate(0, 0, DayType::Weekend), 6.0);
        // No holiday in training: overall mean.
        assert_eq!(plain.rate(0, 0, DayType::Holiday), 12.0);
        assert_eq!(plain.rate(0, 1, DayType::Weekday), 20.0);
        // (0,0) and (0,1) are neighbours since R00 and R01 are adjacent.
        let smooth = fit_traffic_model(&m, &g, w, 0.5, &Calendar::default()).unwrap();
        assert_eq!(smooth.rate(0, 0, DayType::Weekday), 17.5);
        assert_eq!(smooth.rate(0, 1, DayType::Weekday), 17.5);
        assert!(matches!(fit_traffic_model(&m, &g, w, 1.5, &Calendar::default()), Err(BackboneError::InvalidLambda(_))));
        assert!(matches!(
            fit_traffic_model(&m, &g, DayRange::new(5, 9), 0.2, &Calendar::default()),
            Err(BackboneError::EmptyTrainWindow)
        ));
    }

    #[test]
    fn error_rate_cases() {
        let g = ring_topology(3);
        let m = constant(3, 10, 10);
        let model = fit_traffic_model(&m, &g, DayRange::new(0, 4), DEFAULT_LAMBDA, &Calendar::without_holidays()).unwrap();
        let e = evaluate_prediction(&model, &m, DayRange::new(5, 9)).unwrap();
        assert_eq!(e.error_rate, 0.0);
        assert_eq!(e.cells, 45);
        let mut scaled = model.clone();
        for r in scaled.base_rate.values_mut() {
            *r = r.map(|x| x * 1.1);
        }
        let e = evaluate_prediction(&scaled, &m, DayRange::new(5, 9)).unwrap();
        assert!((e.error_rate - 0.1).abs() < 1e-12);
        assert!(matches!(evaluate_prediction(&model, &m, DayRange::new(3, 6)), Err(BackboneError::WindowOverlap)));
        assert!(matches!(evaluate_prediction(&model, &m, DayRange::new(6, 5)), Err(BackboneError::EmptyTestWindow)));
    }

    #[test]
    fn planted_rates_are_recovered() {
        let sc = DemandScenario { n_regions: 4, day_count: 19, ..DemandScenario::default() };
        let corpus = generate_demand_scenario(&sc).unwrap();
        let map = crate::geo::RegionMap::synthetic(4);
        let dm = crate::backbone::derive_demand(&corpus.records, &map, DayRange::new(0, 18));
        let model = fit_traffic_model(&dm, &ring_topology(4), DayRange::new(0, 18), DEFAULT_LAMBDA, &sc.calendar).unwrap();
        assert_eq!(model.rate(2, 3, DayType::Weekday), 100.0);
        assert_eq!(model.rate(2, 3, DayType::Weekend), 40.0);
    }
}

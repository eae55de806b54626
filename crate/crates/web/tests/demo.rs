use msnlab_web::{homophily, placement_curve, voting_curve, OPTIMAL_MAX_K, R1_GRID};
use serde_json::Value;

fn parse(s: String) -> Value {
    let v: Value = serde_json::from_str(&s).unwrap();
    assert!(v.get("error").is_none(), "{v}");
    v
}

#[test]
fn voting_curve_covers_the_grid() {
    let v = parse(voting_curve(60, 150, 0.2, 3, 500, 7));
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), R1_GRID.len());
    for row in rows {
        assert!(row["top_tally"].as_f64().unwrap() >= 3.0);
        assert!(row["discounted"].as_f64().unwrap() >= 3.0);
    }
    assert!(v["greedy"].as_f64().unwrap() >= 3.0);
    assert_eq!(voting_curve(60, 150, 0.2, 3, 500, 7), voting_curve(60, 150, 0.2, 3, 500, 7));
}

#[test]
fn bad_arguments_report_an_error() {
    let v: Value = serde_json::from_str(&voting_curve(5, 10, 0.5, 9, 10, 1)).unwrap();
    assert!(v["error"].is_string());
    let v: Value = serde_json::from_str(&homophily(0.9, 100, 0, 1)).unwrap();
    assert!(v["error"].is_string());
}

#[test]
fn placement_curves_are_non_increasing_and_optimal_is_lowest() {
    let v = parse(placement_curve(8));
    let loads = |key: &str| -> Vec<f64> { v[key].as_array().unwrap().iter().map(|r| r["load"].as_f64().unwrap()).collect() };
    let (rg, g, opt) = (loads("reverse_greedy"), loads("greedy"), loads("optimal"));
    assert_eq!(rg.len(), 8);
    assert_eq!(opt.len(), OPTIMAL_MAX_K);
    assert!(rg.windows(2).all(|w| w[1] <= w[0]));
    for (i, o) in opt.iter().enumerate() {
        assert!(*o <= rg[i] && *o <= g[i]);
    }
}

#[test]
fn homophily_tracks_p_in() {
    let high = parse(homophily(0.95, 800, 10, 3));
    let low = parse(homophily(0.3, 800, 10, 3));
    assert!(high["index"].as_f64().unwrap() > low["index"].as_f64().unwrap());
    assert!(high["baseline"].as_f64().unwrap() < high["index"].as_f64().unwrap());
    let shares = high["shares"].as_array().unwrap();
    assert_eq!(shares.len(), 10);
}

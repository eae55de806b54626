use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn msnlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_msnlab"))
        .args(args)
        .env_remove("MSNLAB_THREADS")
        .output()
        .expect("binary runs")
}

fn report(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("report is JSON")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Ring of 15 sites, each its own region, with one chord, plus all-pairs demand.
fn fifteen_sites(dir: &Path) -> (String, String) {
    let mut topo = String::new();
    let mut demand = String::new();
    for i in 0..15 {
        topo.push_str(&format!("N,S{i:02},R{i:02}\nE,S{i:02},S{:02},{}\n", (i + 1) % 15, 1 + i % 4));
        for j in 0..15 {
            if i != j {
                demand.push_str(&format!("0\tR{i:02}\tR{j:02}\t{}\n", 1 + (i * j) % 7));
            }
        }
    }
    topo.push_str("E,S00,S07,3\n");
    let t = dir.join("topo.txt");
    let d = dir.join("demand.tsv");
    std::fs::write(&t, topo).unwrap();
    std::fs::write(&d, demand).unwrap();
    (path(&t).to_owned(), path(&d).to_owned())
}

#[test]
fn kol_accepts_default_voting_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let records = dir.path().join("r.tsv");
    let out = msnlab(&["--out", path(&records), "generate", "--users", "300", "--pages", "40"]);
    assert!(out.status.success());
    let out = msnlab(&[
        "kol", "--records", path(&records), "--strategy", "voting", "--k", "100", "--r1", "500", "--r2", "100000",
        "--eval-sims", "200",
    ]);
    let r = report(&out);
    assert_eq!(r["config"]["k"], 100);
    assert_eq!(r["config"]["r1"], 500);
    assert_eq!(r["config"]["r2"], 100000);
    assert_eq!(r["result"]["selected_users"].as_array().unwrap().len(), 100);
    assert_eq!(r["result"]["R2"], 100000);
    assert!(r["result"]["sigma_mean"].as_f64().unwrap() >= 100.0);
}

#[test]
fn optimal_placement_under_the_enumeration_guard() {
    let dir = tempfile::tempdir().unwrap();
    let (topo, demand) = fifteen_sites(dir.path());
    let r = report(&msnlab(&["place", "--strategy", "optimal", "--k", "12", "--topology", &topo, "--demand", &demand]));
    assert_eq!(r["result"]["servers"].as_array().unwrap().len(), 12);
    let rg = report(&msnlab(&["place", "--k", "12", "--topology", &topo, "--demand", &demand]));
    assert!(r["result"]["load"].as_f64().unwrap() <= rg["result"]["load"].as_f64().unwrap());
}

#[test]
fn stats_on_empty_file_reports_zero_counts() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.tsv");
    std::fs::write(&empty, "").unwrap();
    let out = msnlab(&["stats", "--records", path(&empty)]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["result"]["record_count"], 0);
    assert_eq!(r["result"]["user_count"], 0);
    assert_eq!(r["result"]["page_count"], 0);
}

#[test]
fn exit_codes_follow_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.tsv");
    assert_eq!(msnlab(&["stats", "--records", path(&missing)]).status.code(), Some(1));
    assert_eq!(msnlab(&["no-such-command"]).status.code(), Some(1));
    let bad = dir.path().join("bad.tsv");
    std::fs::write(&bad, "u1,u2,p,not-an-ip,5\n").unwrap();
    assert_eq!(msnlab(&["stats", "--records", path(&bad)]).status.code(), Some(1));

    // 40 choose 20 sites is past the enumeration limit.
    let mut topo = String::new();
    for i in 0..40 {
        topo.push_str(&format!("N,S{i:02},R{i:02}\nE,S{i:02},S{:02},1\n", (i + 1) % 40));
    }
    let t = dir.path().join("ring40.txt");
    std::fs::write(&t, topo).unwrap();
    let d = dir.path().join("d.tsv");
    std::fs::write(&d, "0\tR00\tR20\t5\n").unwrap();
    let out = msnlab(&["place", "--strategy", "optimal", "--k", "20", "--topology", path(&t), "--demand", path(&d)]);
    assert_eq!(out.status.code(), Some(2));
    let out = msnlab(&["place", "--k", "41", "--topology", path(&t), "--demand", path(&d)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn report_echoes_defaults_and_out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("curve.json");
    let out = msnlab(&["--out", path(&out_path), "cost-curve"]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(r["command"], "cost-curve");
    assert_eq!(r["config"]["seed"], 20160114);
    assert_eq!(r["config"]["strategy"], "reverse-greedy");
    assert!(r["runtime_ms"].is_null());
    let keys: Vec<&String> = r.as_object().unwrap().keys().collect();
    assert_eq!(keys, ["command", "config", "result", "runtime_ms"]);
    assert_eq!(r["result"]["rows"].as_array().unwrap().len(), 10);
}

#[test]
fn tsv_mode_emits_only_the_table() {
    let out = msnlab(&["--format", "tsv", "cost-curve", "--ks", "1,5"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "k\tload");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("1\t"));
}

#[test]
fn floats_are_rounded_to_six_significant_digits() {
    let dir = tempfile::tempdir().unwrap();
    let records = dir.path().join("r.tsv");
    assert!(msnlab(&["--out", path(&records), "generate"]).status.success());
    let r = report(&msnlab(&["geo-homophily", "--records", path(&records)]));
    let x = r["result"]["index"].as_f64().unwrap();
    let s = format!("{x:e}");
    let mantissa = s.split('e').next().unwrap().replace(['.', '-'], "");
    assert!(mantissa.len() <= 6, "{s}");
}

#[test]
fn generate_writes_census_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let records = dir.path().join("r.tsv");
    let census = dir.path().join("census.txt");
    let out = msnlab(&["--out", path(&records), "generate", "--migration", "1:2:0.3", "--census-out", path(&census)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&census).unwrap();
    assert!(!text.trim().is_empty());
    for line in text.lines().filter(|l| !l.starts_with('#')) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f.len(), 3, "{line}");
        assert_ne!(f[0], f[1]);
        f[2].parse::<u64>().unwrap();
    }
}

#[test]
fn derived_demand_matches_planted_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let records = dir.path().join("r.tsv");
    let planted = dir.path().join("planted.tsv");
    let out = msnlab(&[
        "--out", path(&records), "generate", "--scenario", "demand", "--regions", "8", "--days", "24", "--noise",
        "0.05", "--demand-out", path(&planted),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let derived = msnlab(&["--format", "tsv", "demand", "--records", path(&records), "--regions", "8"]);
    assert!(derived.status.success());
    assert_eq!(String::from_utf8(derived.stdout).unwrap(), std::fs::read_to_string(&planted).unwrap());

    let r = report(&msnlab(&["traffic-eval", "--demand", path(&planted), "--train", "0:18", "--test", "19:23"]));
    assert!(r["result"]["error_rate"].as_f64().unwrap() < 0.10);
}

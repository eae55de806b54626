//! Post-view records: the `u1,u2,pid,ip,t` interchange format.
//!
//! A record states that viewer `u2`, at address `ip` and time `t`, viewed
//! page `pid` on the page of post owner `u1`.

mod synth;

pub use synth::{
    generate_demand_scenario, generate_synthetic, region_code, region_ip, DemandScenario,
    MigrationFlow, PlantedTruth, SynthConfig, SynthCorpus,
};

use serde::Serialize;
use std::collections::HashSet;
use std::fmt;
use std::net::Ipv4Addr;
use std::str::FromStr;
use thiserror::Error;

pub const FIELD_SEPARATOR: char = ',';

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RecordError {
    #[error("malformed record: {0}")]
    MalformedRecord(String),
    #[error("invalid IPv4 address `{0}`")]
    InvalidIp(String),
    #[error("invalid timestamp `{0}`")]
    InvalidTimestamp(String),
    #[error("line {line}: {source}")]
    AtLine {
        line: usize,
        #[source]
        source: Box<RecordError>,
    },
    #[error("invalid synthetic config: {0}")]
    InvalidConfig(String),
}

/// One view event.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PostViewRecord {
    /// Owner of the viewed post.
    pub u1: String,
    /// Viewer.
    pub u2: String,
    pub pid: String,
    /// Viewer's address.
    pub ip: Ipv4Addr,
    /// Seconds since the Unix epoch, UTC.
    pub t: u64,
}

impl PostViewRecord {
    pub fn new(u1: impl Into<String>, u2: impl Into<String>, pid: impl Into<String>, ip: Ipv4Addr, t: u64) -> Self {
        PostViewRecord { u1: u1.into(), u2: u2.into(), pid: pid.into(), ip, t }
    }

    pub fn is_self_view(&self) -> bool {
        self.u1 == self.u2
    }

    /// Checks the token invariants that `new` cannot enforce.
    pub fn validate(&self) -> Result<(), RecordError> {
        for (name, tok) in [("u1", &self.u1), ("u2", &self.u2), ("pid", &self.pid)] {
            validate_token(name, tok)?;
        }
        Ok(())
    }
}

fn validate_token(name: &str, tok: &str) -> Result<(), RecordError> {
    if tok.is_empty() {
        return Err(RecordError::MalformedRecord(format!("empty {name}")));
    }
    if tok.contains(FIELD_SEPARATOR) || tok.chars().any(char::is_whitespace) || tok.starts_with('#') {
        return Err(RecordError::MalformedRecord(format!("{name} `{tok}` is not a plain token")));
    }
    Ok(())
}

impl fmt::Display for PostViewRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{},{}", self.u1, self.u2, self.pid, self.ip, self.t)
    }
}

impl FromStr for PostViewRecord {
    type Err = RecordError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_record(s)
    }
}

/// Parses one non-comment line.
pub fn parse_record(line: &str) -> Result<PostViewRecord, RecordError> {
    let fields: Vec<&str> = line.trim().split(FIELD_SEPARATOR).map(str::trim).collect();
    if fields.len() != 5 {
        return Err(RecordError::MalformedRecord(format!(
            "expected 5 fields, found {} in `{}`",
            fields.len(),
            line.trim()
        )));
    }
    for (name, tok) in [("u1", fields[0]), ("u2", fields[1]), ("pid", fields[2])] {
        validate_token(name, tok)?;
    }
    let ip = Ipv4Addr::from_str(fields[3]).map_err(|_| RecordError::InvalidIp(fields[3].to_string()))?;
    if !fields[4].bytes().all(|b| b.is_ascii_digit()) {
        return Err(RecordError::InvalidTimestamp(fields[4].to_string()));
    }
    let t = fields[4]
        .parse::<u64>()
        .map_err(|_| RecordError::InvalidTimestamp(fields[4].to_string()))?;
    Ok(PostViewRecord {
        u1: fields[0].to_string(),
        u2: fields[1].to_string(),
        pid: fields[2].to_string(),
        ip,
        t,
    })
}

pub fn format_record(r: &PostViewRecord) -> String {
    r.to_string()
}

/// Parses a whole records file. Blank lines and `#` comments are skipped;
/// the first bad line aborts with its 1-based line number.
pub fn parse_records(text: &str) -> Result<Vec<PostViewRecord>, RecordError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let rec = parse_record(trimmed)
            .map_err(|e| RecordError::AtLine { line: i + 1, source: Box::new(e) })?;
        out.push(rec);
    }
    Ok(out)
}

/// Renders records one per line, newline-terminated.
pub fn write_records(records: &[PostViewRecord]) -> String {
    let mut s = String::with_capacity(records.len() * 40);
    for r in records {
        s.push_str(&r.to_string());
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DatasetStats {
    pub record_count: u64,
    pub user_count: u64,
    pub page_count: u64,
    pub self_view_count: u64,
    /// `(min t, max t)`, `None` for an empty corpus.
    pub time_span: Option<(u64, u64)>,
}

/// Partial statistics over a chunk of records; merging is commutative and
/// associative, so chunks may be processed in any order.
#[derive(Debug, Clone, Default)]
pub struct StatsAccumulator {
    records: u64,
    self_views: u64,
    users: HashSet<String>,
    pages: HashSet<String>,
    span: Option<(u64, u64)>,
}

impl StatsAccumulator {
    pub fn push(&mut self, r: &PostViewRecord) {
        self.records += 1;
        if r.is_self_view() {
            self.self_views += 1;
        }
        if !self.users.contains(&r.u1) {
            self.users.insert(r.u1.clone());
        }
        if !self.users.contains(&r.u2) {
            self.users.insert(r.u2.clone());
        }
        if !self.pages.contains(&r.pid) {
            self.pages.insert(r.pid.clone());
        }
        self.span = Some(match self.span {
            None => (r.t, r.t),
            Some((lo, hi)) => (lo.min(r.t), hi.max(r.t)),
        });
    }

    pub fn merge(mut self, other: StatsAccumulator) -> StatsAccumulator {
        self.records += other.records;
        self.self_views += other.self_views;
        self.users.extend(other.users);
        self.pages.extend(other.pages);
        self.span = match (self.span, other.span) {
            (None, s) | (s, None) => s,
            (Some((a, b)), Some((c, d))) => Some((a.min(c), b.max(d))),
        };
        self
    }

    pub fn finish(self) -> DatasetStats {
        DatasetStats {
            record_count: self.records,
            user_count: self.users.len() as u64,
            page_count: self.pages.len() as u64,
            self_view_count: self.self_views,
            time_span: self.span,
        }
    }
}

pub fn compute_stats(records: &[PostViewRecord]) -> DatasetStats {
    const CHUNK: usize = 1 << 16;
    let chunks: Vec<&[PostViewRecord]> = records.chunks(CHUNK).collect();
    let partials = crate::par::map_slice(&chunks, |chunk| {
        let mut acc = StatsAccumulator::default();
        chunk.iter().for_each(|r| acc.push(r));
        acc
    });
    partials
        .into_iter()
        .fold(StatsAccumulator::default(), StatsAccumulator::merge)
        .finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(u1: &str, u2: &str, pid: &str, t: u64) -> PostViewRecord {
        PostViewRecord::new(u1, u2, pid, Ipv4Addr::new(1, 2, 3, 4), t)
    }

    #[test]
    fn parse_maps_fields_positionally() {
        let r = parse_record("u123,u456,p789,1.2.3.4,1452729600").unwrap();
        assert_eq!(r, PostViewRecord::new("u123", "u456", "p789", Ipv4Addr::new(1, 2, 3, 4), 1_452_729_600));
        let padded = parse_record("  u1 , u2 ,p, 10.0.0.1 , 7 ").unwrap();
        assert_eq!(padded.u1, "u1");
        assert_eq!(padded.t, 7);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(parse_record("a,b,c"), Err(RecordError::MalformedRecord(_))));
        assert!(matches!(parse_record("a,b,c,1.1.1.1,2,3"), Err(RecordError::MalformedRecord(_))));
        assert!(matches!(parse_record(",b,c,1.1.1.1,2"), Err(RecordError::MalformedRecord(_))));
        assert!(matches!(parse_record("u1,u2,p1,999.1.1.1,0"), Err(RecordError::InvalidIp(_))));
        assert!(matches!(parse_record("u1,u2,p1,1.1.1,0"), Err(RecordError::InvalidIp(_))));
        assert!(matches!(parse_record("u1,u2,p1,1.1.1.1,-5"), Err(RecordError::InvalidTimestamp(_))));
        assert!(matches!(parse_record("u1,u2,p1,1.1.1.1,+5"), Err(RecordError::InvalidTimestamp(_))));
        assert!(matches!(parse_record("u1,u2,p1,1.1.1.1,1e9"), Err(RecordError::InvalidTimestamp(_))));
    }

    #[test]
    fn file_parsing_skips_comments_and_reports_lines() {
        let text = "# header\n\na,b,p,1.1.1.1,1\n  # indented comment\nb,c,p,1.1.1.1,2\n";
        assert_eq!(parse_records(text).unwrap().len(), 2);
        let err = parse_records("a,b,p,1.1.1.1,1\nbroken\n").unwrap_err();
        assert!(matches!(err, RecordError::AtLine { line: 2, .. }));
    }

    #[test]
    fn stats_hand_count() {
        let empty = compute_stats(&[]);
        assert_eq!((empty.record_count, empty.user_count, empty.page_count), (0, 0, 0));
        assert_eq!(empty.time_span, None);

        let rs = vec![rec("a", "b", "p", 1), rec("b", "c", "p", 2), rec("a", "d", "q", 3)];
        let s = compute_stats(&rs);
        assert_eq!(s.record_count, 3);
        assert_eq!(s.user_count, 4);
        assert_eq!(s.page_count, 2);
        assert_eq!(s.self_view_count, 0);
        assert_eq!(s.time_span, Some((1, 3)));

        let s = compute_stats(&[rec("a", "a", "p", 5)]);
        assert_eq!((s.user_count, s.self_view_count), (1, 1));
    }

    #[test]
    fn duplicates_are_kept() {
        let rs = vec![rec("a", "b", "p", 1), rec("a", "b", "p", 1)];
        assert_eq!(compute_stats(&rs).record_count, 2);
    }

    fn arb_token() -> impl Strategy<Value = String> {
        "[a-zA-Z0-9_.:-]{1,8}"
    }

    fn arb_record() -> impl Strategy<Value = PostViewRecord> {
        (arb_token(), arb_token(), arb_token(), any::<u32>(), any::<u64>())
            .prop_map(|(u1, u2, pid, ip, t)| PostViewRecord::new(u1, u2, pid, Ipv4Addr::from(ip), t))
    }

    proptest! {
        #[test]
        fn format_parse_round_trip(r in arb_record()) {
            prop_assert_eq!(parse_record(&format_record(&r)).unwrap(), r);
        }

        #[test]
        fn stats_permutation_invariant(mut rs in proptest::collection::vec(arb_record(), 0..40), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let before = compute_stats(&rs);
            rs.shuffle(&mut crate::rng::seeded(seed));
            prop_assert_eq!(compute_stats(&rs), before);
        }
    }
}

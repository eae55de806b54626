//! Per-page diffusion forests and infected/infectious roles.

use crate::records::PostViewRecord;
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};

/// Users touched by one page.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct UserRoles {
    /// Viewed the page.
    pub infected: BTreeSet<String>,
    /// Had the page on their own page: reposted it, or posted it first.
    pub infectious: BTreeSet<String>,
    /// `false` when no record mentions the page at all.
    pub page_seen: bool,
}

/// Classifies users of page `pid`. Self-views are ignored.
pub fn classify_users(records: &[PostViewRecord], pid: &str) -> UserRoles {
    let mut roles = UserRoles::default();
    for r in records.iter().filter(|r| r.pid == pid) {
        roles.page_seen = true;
        roles.infectious.insert(r.u1.clone());
        if !r.is_self_view() {
            roles.infected.insert(r.u2.clone());
        }
    }
    roles
}

/// Attribution forest of one page: each viewer hangs under the owner of the
/// page they first viewed it from.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DiffusionForest {
    pub pid: String,
    /// child -> parent; absent for roots.
    pub parent: BTreeMap<String, String>,
    pub roots: BTreeSet<String>,
    /// Earliest non-self view per viewer. For roots it falls back to the
    /// earliest self-view, if any.
    pub view_time: BTreeMap<String, u64>,
}

impl DiffusionForest {
    pub fn node_count(&self) -> usize {
        self.parent.len() + self.roots.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = &String> {
        self.roots.iter().chain(self.parent.keys())
    }

    pub fn contains(&self, user: &str) -> bool {
        self.roots.contains(user) || self.parent.contains_key(user)
    }

    /// Proper ancestors, nearest first.
    pub fn ancestors<'a>(&'a self, user: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        let mut cur = self.parent.get(user).map(String::as_str);
        std::iter::from_fn(move || {
            let out = cur?;
            cur = self.parent.get(out).map(String::as_str);
            Some(out)
        })
    }

    pub fn depth(&self, user: &str) -> usize {
        self.ancestors(user).count()
    }

    /// Children lists keyed by parent.
    pub fn children(&self) -> BTreeMap<&str, Vec<&str>> {
        let mut out: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for (c, p) in &self.parent {
            out.entry(p.as_str()).or_default().push(c.as_str());
        }
        out
    }

    /// Number of proper descendants of every node.
    pub fn descendant_counts(&self) -> BTreeMap<&str, usize> {
        let mut out: BTreeMap<&str, usize> = self.nodes().map(|n| (n.as_str(), 0)).collect();
        for c in self.parent.keys() {
            for a in self.ancestors(c) {
                *out.get_mut(a).expect("ancestor is a node") += 1;
            }
        }
        out
    }

    /// TSV lines `pid  child  parent  view_time`; `-` marks absent fields.
    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        let mut rows: Vec<(&String, Option<&String>)> = self.roots.iter().map(|r| (r, None)).collect();
        rows.extend(self.parent.iter().map(|(c, p)| (c, Some(p))));
        rows.sort();
        for (child, parent) in rows {
            let t = self.view_time.get(child).map_or_else(|| "-".to_string(), u64::to_string);
            s.push_str(&format!("{}\t{}\t{}\t{}\n", self.pid, child, parent.map_or("-", String::as_str), t));
        }
        s
    }
}

/// Builds the attribution forest of page `pid`.
///
/// Earliest view wins; equal timestamps go to the lexicographically smallest
/// owner. Repeat views collapse. Any remaining cycle (only possible with
/// inconsistent timestamps) is cut by dropping the parent edge of its
/// lexicographically largest member, which becomes a root.
pub fn build_forest(records: &[PostViewRecord], pid: &str) -> DiffusionForest {
    let mut best: BTreeMap<&str, (u64, &str)> = BTreeMap::new();
    let mut owners: BTreeSet<&str> = BTreeSet::new();
    let mut self_view: BTreeMap<&str, u64> = BTreeMap::new();
    for r in records.iter().filter(|r| r.pid == pid) {
        owners.insert(&r.u1);
        if r.is_self_view() {
            let e = self_view.entry(&r.u1).or_insert(r.t);
            *e = (*e).min(r.t);
            continue;
        }
        let cand = (r.t, r.u1.as_str());
        best.entry(&r.u2).and_modify(|b| if cand < *b { *b = cand }).or_insert(cand);
    }

    let mut parent: BTreeMap<String, String> = best.iter().map(|(c, (_, p))| (c.to_string(), p.to_string())).collect();
    let mut view_time: BTreeMap<String, u64> = best.iter().map(|(c, (t, _))| (c.to_string(), *t)).collect();

    // Cycle breaking over the functional graph child -> parent.
    let mut state: BTreeMap<String, u8> = BTreeMap::new(); // 1 = on current path, 2 = done
    let starts: Vec<String> = parent.keys().cloned().collect();
    for start in starts {
        if state.contains_key(&start) {
            continue;
        }
        let mut path: Vec<String> = Vec::new();
        let mut cur = Some(start);
        while let Some(node) = cur {
            match state.get(&node) {
                Some(2) => break,
                Some(1) => {
                    let pos = path.iter().position(|n| *n == node).expect("node on path");
                    let cut = path[pos..].iter().max().expect("non-empty cycle").clone();
                    parent.remove(&cut);
                    break;
                }
                _ => {
                    state.insert(node.clone(), 1);
                    path.push(node.clone());
                    cur = parent.get(&node).cloned();
                }
            }
        }
        for n in path {
            state.insert(n, 2);
        }
    }

    let mut roots: BTreeSet<String> = BTreeSet::new();
    for o in &owners {
        if !parent.contains_key(*o) {
            roots.insert(o.to_string());
        }
    }
    for c in best.keys() {
        if !parent.contains_key(*c) {
            roots.insert(c.to_string());
        }
    }
    for (u, t) in self_view {
        if roots.contains(u) && !view_time.contains_key(u) {
            view_time.insert(u.to_string(), t);
        }
    }
    DiffusionForest { pid: pid.to_string(), parent, roots, view_time }
}

/// Forests of every page, keyed by page id.
pub fn build_all_forests(records: &[PostViewRecord]) -> BTreeMap<String, DiffusionForest> {
    let mut by_page: BTreeMap<&str, Vec<PostViewRecord>> = BTreeMap::new();
    for r in records {
        by_page.entry(&r.pid).or_default().push(r.clone());
    }
    let pages: Vec<(&str, Vec<PostViewRecord>)> = by_page.into_iter().collect();
    let forests = crate::par::map_slice(&pages, |(pid, rs)| build_forest(rs, pid));
    forests.into_iter().map(|f| (f.pid.clone(), f)).collect()
}

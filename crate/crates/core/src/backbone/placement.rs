use super::{BackboneError, BackboneGraph, DemandMatrix};
use crate::calendar::DayRange;
use crate::influence::next_combination;
use serde::Serialize;
use std::cmp::Ordering;

/// Largest number of placements `optimal_exhaustive` will enumerate.
pub const MAX_ENUMERATION: u128 = 10_000_000;

/// A set of server sites, as ascending node indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Placement {
    pub servers: Vec<usize>,
}

impl Placement {
    pub fn new(mut servers: Vec<usize>) -> Self {
        servers.sort_unstable();
        servers.dedup();
        Placement { servers }
    }

    pub fn from_ids(graph: &BackboneGraph, ids: &[&str]) -> Result<Self, BackboneError> {
        ids.iter()
            .map(|id| graph.index(id).ok_or_else(|| BackboneError::UnknownNode(id.to_string())))
            .collect::<Result<Vec<_>, _>>()
            .map(Placement::new)
    }

    pub fn names(&self, graph: &BackboneGraph) -> Vec<String> {
        self.servers.iter().map(|&s| graph.id(s).to_string()).collect()
    }

    pub fn len(&self) -> usize {
        self.servers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.servers.is_empty()
    }
}

#[inline]
fn relay_distance(graph: &BackboneGraph, a: usize, b: usize, servers: &[usize]) -> f64 {
    servers
        .iter()
        .map(|&s| graph.distance(a, s) + graph.distance(s, b))
        .fold(f64::INFINITY, f64::min)
}

/// `min over s in placement of d(a, s) + d(s, b)`.
pub fn comm_distance(a: usize, b: usize, placement: &Placement, graph: &BackboneGraph) -> Result<f64, BackboneError> {
    if placement.is_empty() {
        return Err(BackboneError::EmptyPlacement);
    }
    let n = graph.node_count();
    if let Some(&bad) = [a, b].iter().chain(&placement.servers).find(|&&x| x >= n) {
        return Err(BackboneError::UnknownNode(format!("#{bad}")));
    }
    Ok(relay_distance(graph, a, b, &placement.servers))
}

/// Demand over a window, pre-aggregated onto representative node pairs.
#[derive(Debug, Clone)]
pub struct LoadEvaluator<'g> {
    graph: &'g BackboneGraph,
    pairs: Vec<(usize, usize, f64)>,
}

impl<'g> LoadEvaluator<'g> {
    pub fn new(graph: &'g BackboneGraph, demand: &DemandMatrix, window: DayRange) -> Result<Self, BackboneError> {
        let mut pairs = Vec::new();
        for ((a, b), count) in demand.pair_totals(window) {
            let rep = |r: usize| {
                graph
                    .representative(&demand.regions[r])
                    .ok_or_else(|| BackboneError::UnmappedRegion(demand.regions[r].clone()))
            };
            pairs.push((rep(a)?, rep(b)?, count as f64));
        }
        Ok(LoadEvaluator { graph, pairs })
    }

    pub fn graph(&self) -> &BackboneGraph {
        self.graph
    }

    pub fn load(&self, servers: &[usize]) -> f64 {
        self.pairs
            .iter()
            .map(|&(a, b, w)| w * relay_distance(self.graph, a, b, servers))
            .sum()
    }

    /// Relay-free load `sum f(a, b) d(a, b)`; no placement does better.
    pub fn lower_bound(&self) -> f64 {
        self.pairs.iter().map(|&(a, b, w)| w * self.graph.distance(a, b)).sum()
    }
}

/// `sum over pairs and days in window of f(a, b, day) * comm_distance(rep a, rep b)`.
pub fn total_load(demand: &DemandMatrix, placement: &Placement, graph: &BackboneGraph, window: DayRange) -> Result<f64, BackboneError> {
    if placement.is_empty() {
        return Err(BackboneError::EmptyPlacement);
    }
    Ok(LoadEvaluator::new(graph, demand, window)?.load(&placement.servers))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    ReverseGreedy,
    Greedy,
    Optimal,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::ReverseGreedy => "reverse-greedy",
            Strategy::Greedy => "greedy",
            Strategy::Optimal => "optimal",
        }
    }
}

fn check_k(graph: &BackboneGraph, k: usize) -> Result<(), BackboneError> {
    let c = graph.candidates().len();
    if k == 0 || k > c {
        return Err(BackboneError::KTooLarge { k, candidates: c });
    }
    Ok(())
}

/// Placements from all candidates down to `min_k` sites, largest first.
fn reverse_sequence(eval: &LoadEvaluator, min_k: usize) -> Vec<Vec<usize>> {
    let mut current = eval.graph().candidates().to_vec();
    let mut out = vec![current.clone()];
    while current.len() > min_k {
        let loads = crate::par::map_range(current.len(), |i| {
            let rest: Vec<usize> = current.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &s)| s).collect();
            eval.load(&rest)
        });
        // Least increase; ties remove the lexicographically largest site.
        let mut drop = 0;
        for i in 1..current.len() {
            if loads[i].total_cmp(&loads[drop]) != Ordering::Greater {
                drop = i;
            }
        }
        current.remove(drop);
        out.push(current.clone());
    }
    out
}

/// Placements of 1..=max_k sites built greedily forward.
fn forward_sequence(eval: &LoadEvaluator, max_k: usize) -> Vec<Vec<usize>> {
    let cands = eval.graph().candidates();
    let mut current: Vec<usize> = Vec::new();
    let mut out = Vec::new();
    while current.len() < max_k {
        let pool: Vec<usize> = cands.iter().copied().filter(|c| !current.contains(c)).collect();
        let loads = crate::par::map_slice(&pool, |&s| {
            let mut with = current.clone();
            with.push(s);
            eval.load(&with)
        });
        // Largest reduction; ties add the lexicographically smallest site.
        let mut pick = 0;
        for i in 1..pool.len() {
            if loads[i].total_cmp(&loads[pick]) == Ordering::Less {
                pick = i;
            }
        }
        current.push(pool[pick]);
        current.sort_unstable();
        out.push(current.clone());
    }
    out
}

/// Starts from every candidate site and repeatedly removes the site whose
/// removal raises the load least, until `k` remain.
pub fn reverse_greedy(graph: &BackboneGraph, demand: &DemandMatrix, k: usize, window: DayRange) -> Result<Placement, BackboneError> {
    check_k(graph, k)?;
    let eval = LoadEvaluator::new(graph, demand, window)?;
    let seq = reverse_sequence(&eval, k);
    Ok(Placement::new(seq.last().expect("non-empty sequence").clone()))
}

/// Forward greedy: the first site minimizes the single-server load, each
/// later site gives the largest reduction.
pub fn naive_greedy(graph: &BackboneGraph, demand: &DemandMatrix, k: usize, window: DayRange) -> Result<Placement, BackboneError> {
    check_k(graph, k)?;
    let eval = LoadEvaluator::new(graph, demand, window)?;
    let seq = forward_sequence(&eval, k);
    Ok(Placement::new(seq.last().expect("k >= 1").clone()))
}

pub(crate) fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Lexicographic combination of rank `r` among k-subsets of `0..n`.
fn unrank(mut r: u128, n: usize, k: usize) -> Vec<u32> {
    let mut out = Vec::with_capacity(k);
    let mut c = 0usize;
    for i in 0..k {
        loop {
            let cnt = binomial(n - c - 1, k - i - 1);
            if r < cnt {
                out.push(c as u32);
                c += 1;
                break;
            }
            r -= cnt;
            c += 1;
        }
    }
    out
}

const ENUM_CHUNK: u128 = 4096;

/// Minimum-load `k`-subset of the candidate sites; ties go to the first
/// subset in lexicographic order.
pub fn optimal_exhaustive(graph: &BackboneGraph, demand: &DemandMatrix, k: usize, window: DayRange) -> Result<Placement, BackboneError> {
    check_k(graph, k)?;
    let cands = graph.candidates();
    let total = binomial(cands.len(), k);
    if total > MAX_ENUMERATION {
        return Err(BackboneError::EnumerationTooLarge(total));
    }
    let eval = LoadEvaluator::new(graph, demand, window)?;
    let chunks = total.div_ceil(ENUM_CHUNK) as usize;
    let bests = crate::par::map_range(chunks, |c| {
        let lo = c as u128 * ENUM_CHUNK;
        let hi = (lo + ENUM_CHUNK).min(total);
        let mut comb = unrank(lo, cands.len(), k);
        let mut servers: Vec<usize> = vec![0; k];
        let mut best: Option<(f64, u128, Vec<u32>)> = None;
        let mut rank = lo;
        loop {
            for (s, &i) in servers.iter_mut().zip(&comb) {
                *s = cands[i as usize];
            }
            let load = eval.load(&servers);
            if best.as_ref().is_none_or(|b| load < b.0) {
                best = Some((load, rank, comb.clone()));
            }
            rank += 1;
            if rank >= hi || !next_combination(&mut comb, cands.len() as u32) {
                break;
            }
        }
        best.expect("chunk is non-empty")
    });
    let (_, _, comb) = bests
        .into_iter()
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .expect("at least one placement");
    Ok(Placement::new(comb.iter().map(|&i| cands[i as usize]).collect()))
}

/// Load as a function of `k` for one strategy, in the order of `ks`.
pub fn cost_curve(
    graph: &BackboneGraph,
    demand: &DemandMatrix,
    ks: &[usize],
    strategy: Strategy,
    window: DayRange,
) -> Result<Vec<(usize, f64)>, BackboneError> {
    for &k in ks {
        check_k(graph, k)?;
    }
    let eval = LoadEvaluator::new(graph, demand, window)?;
    let Some(&min_k) = ks.iter().min() else { return Ok(Vec::new()) };
    let max_k = *ks.iter().max().expect("non-empty");
    match strategy {
        Strategy::ReverseGreedy => {
            let seq = reverse_sequence(&eval, min_k);
            let n = graph.candidates().len();
            Ok(ks.iter().map(|&k| (k, eval.load(&seq[n - k]))).collect())
        }
        Strategy::Greedy => {
            let seq = forward_sequence(&eval, max_k);
            Ok(ks.iter().map(|&k| (k, eval.load(&seq[k - 1]))).collect())
        }
        Strategy::Optimal => ks
            .iter()
            .map(|&k| Ok((k, eval.load(&optimal_exhaustive(graph, demand, k, window)?.servers))))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backbone::{random_instance, trap_instance};

    fn four_cycle() -> BackboneGraph {
        BackboneGraph::parse("N,A,RA\nN,B,RB\nN,C,RC\nN,D,RD\nE,A,B,1\nE,B,C,1\nE,C,D,1\nE,D,A,1\n").unwrap()
    }

    fn ab_demand(count: u64) -> DemandMatrix {
        let mut m = DemandMatrix::new(vec!["RA".into(), "RB".into(), "RC".into(), "RD".into()]);
        m.add(0, 1, 0, count);
        m
    }

    const DAY0: DayRange = DayRange { first: 0, last: 0 };

    #[test]
    fn relay_distances() {
        let g = four_cycle();
        let (a, b, d) = (g.index("A").unwrap(), g.index("B").unwrap(), g.index("D").unwrap());
        assert_eq!(comm_distance(a, a, &Placement::new(vec![a]), &g).unwrap(), 0.0);
        assert_eq!(comm_distance(a, b, &Placement::new(vec![d]), &g).unwrap(), 3.0);
        assert_eq!(comm_distance(a, b, &Placement::new(vec![a]), &g).unwrap(), 1.0);
        assert!(matches!(comm_distance(a, b, &Placement::new(vec![]), &g), Err(BackboneError::EmptyPlacement)));
    }

    #[test]
    fn min_of_sums() {
        // s1: 2 + 3, s2: 1 + 7 -> 5 via s1.
        let g = BackboneGraph::parse("N,a,-\nN,b,-\nN,s1,-\nN,s2,-\nE,a,s1,2\nE,s1,b,3\nE,a,s2,1\nE,s2,b,7\n").unwrap();
        let p = Placement::from_ids(&g, &["s1", "s2"]).unwrap();
        let (a, b) = (g.index("a").unwrap(), g.index("b").unwrap());
        assert_eq!(comm_distance(a, b, &p, &g).unwrap(), 5.0);
    }

    #[test]
    fn load_cases() {
        let g = four_cycle();
        let all = Placement::new(g.candidates().to_vec());
        let zero = DemandMatrix::new(vec!["RA".into()]);
        assert_eq!(total_load(&zero, &all, &g, DAY0).unwrap(), 0.0);
        // f = 10 at distance 3 via D alone would be 30; via A it is 10.
        let d = g.index("D").unwrap();
        assert_eq!(total_load(&ab_demand(10), &Placement::new(vec![d]), &g, DAY0).unwrap(), 30.0);
        let eval = LoadEvaluator::new(&g, &ab_demand(10), DAY0).unwrap();
        assert_eq!(eval.load(&all.servers), eval.lower_bound());
        let mut unmapped = DemandMatrix::new(vec!["ZZ".into()]);
        unmapped.add(0, 0, 0, 1);
        assert!(matches!(total_load(&unmapped, &all, &g, DAY0), Err(BackboneError::UnmappedRegion(_))));
        // Out-of-window demand contributes nothing.
        assert_eq!(total_load(&ab_demand(10), &all, &g, DayRange::new(1, 3)).unwrap(), 0.0);
    }

    #[test]
    fn four_cycle_single_site() {
        let g = four_cycle();
        let dm = ab_demand(1);
        let rg = reverse_greedy(&g, &dm, 1, DAY0).unwrap();
        let names = rg.names(&g);
        assert!(names == ["A"] || names == ["B"], "{names:?}");
        assert_eq!(total_load(&dm, &rg, &g, DAY0).unwrap(), 1.0);
        assert_eq!(optimal_exhaustive(&g, &dm, 1, DAY0).unwrap().names(&g), ["A"]);
        assert_eq!(naive_greedy(&g, &dm, 1, DAY0).unwrap().names(&g), ["A"]);
        // Reverse greedy removes the largest id on ties: D, C, then B.
        assert_eq!(names, ["A"]);
    }

    #[test]
    fn full_k_is_all_sites() {
        let g = four_cycle();
        let dm = ab_demand(3);
        let all = Placement::new(g.candidates().to_vec());
        assert_eq!(reverse_greedy(&g, &dm, 4, DAY0).unwrap(), all);
        assert_eq!(naive_greedy(&g, &dm, 4, DAY0).unwrap(), all);
        assert_eq!(optimal_exhaustive(&g, &dm, 4, DAY0).unwrap(), all);
        assert!(matches!(reverse_greedy(&g, &dm, 5, DAY0), Err(BackboneError::KTooLarge { .. })));
        assert!(matches!(naive_greedy(&g, &dm, 0, DAY0), Err(BackboneError::KTooLarge { .. })));
    }

    #[test]
    fn trap_separates_heuristics() {
        let (g, dm) = trap_instance();
        let w = DayRange::new(0, 0);
        let naive = total_load(&dm, &naive_greedy(&g, &dm, 2, w).unwrap(), &g, w).unwrap();
        let rev = total_load(&dm, &reverse_greedy(&g, &dm, 2, w).unwrap(), &g, w).unwrap();
        let opt = total_load(&dm, &optimal_exhaustive(&g, &dm, 2, w).unwrap(), &g, w).unwrap();
        assert!(naive > rev, "{naive} vs {rev}");
        assert_eq!(rev, opt);
    }

    #[test]
    fn unrank_matches_iteration() {
        let (n, k) = (7, 3);
        let mut c: Vec<u32> = (0..k as u32).collect();
        let mut r = 0u128;
        loop {
            assert_eq!(unrank(r, n, k), c);
            r += 1;
            if !next_combination(&mut c, n as u32) {
                break;
            }
        }
        assert_eq!(r, binomial(n, k));
        assert_eq!(binomial(15, 12), 455);
        assert_eq!(binomial(40, 20), 137_846_528_820);
    }

    #[test]
    fn enumeration_guard() {
        let (g, dm) = random_instance(40, 0);
        assert!(matches!(optimal_exhaustive(&g, &dm, 20, DAY0), Err(BackboneError::EnumerationTooLarge(_))));
    }

    #[test]
    fn cost_curves_agree_with_direct_runs() {
        let (g, dm) = random_instance(9, 3);
        let ks: Vec<usize> = (1..=9).collect();
        for strategy in [Strategy::ReverseGreedy, Strategy::Greedy, Strategy::Optimal] {
            let curve = cost_curve(&g, &dm, &ks, strategy, DAY0).unwrap();
            for &(k, load) in &curve {
                let p = match strategy {
                    Strategy::ReverseGreedy => reverse_greedy(&g, &dm, k, DAY0).unwrap(),
                    Strategy::Greedy => naive_greedy(&g, &dm, k, DAY0).unwrap(),
                    Strategy::Optimal => optimal_exhaustive(&g, &dm, k, DAY0).unwrap(),
                };
                assert_eq!(load, total_load(&dm, &p, &g, DAY0).unwrap());
            }
            if strategy == Strategy::Optimal {
                assert!(curve.windows(2).all(|w| w[1].1 <= w[0].1));
            }
        }
        assert_eq!(cost_curve(&g, &dm, &[1], Strategy::Greedy, DAY0).unwrap().len(), 1);
    }
}

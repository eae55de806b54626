//! Collapsed Gibbs sampling for a truncated stick-breaking mixture of
//! multinomials with a symmetric Dirichlet base measure.
//!
//! With `n_k` observations in component `k` and `n_{>k}` in later ones, the
//! collapsed prior of joining `k` is `E[V_k] * prod_{j<k} (1 - E[V_j])` with
//! `E[V_k] = (1 + n_k) / (1 + alpha + n_k + n_{>k})` and `V_{T-1} = 1`. The
//! likelihood of a count vector `x` under a component holding counts `c` is
//! the Dirichlet-multinomial predictive
//! `G(B b + C) / G(B b + C + N) * prod_r G(b + c_r + x_r) / G(b + c_r)`.

use super::GeoError;
use crate::rng::seeded;
use rand::Rng as _;
use serde::Serialize;
use std::collections::BTreeMap;

/// Symmetric Dirichlet parameter of the base measure, per region.
pub const BASE_CONCENTRATION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DpmConfig {
    pub alpha: f64,
    pub truncation: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for DpmConfig {
    fn default() -> Self {
        DpmConfig { alpha: 1.0, truncation: 50, iterations: 200, seed: crate::rng::DEFAULT_SEED }
    }
}

impl DpmConfig {
    pub fn validate(&self) -> Result<(), GeoError> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(GeoError::InvalidConfig(format!("alpha must be positive, got {}", self.alpha)));
        }
        if self.truncation == 0 || self.iterations == 0 {
            return Err(GeoError::InvalidConfig("truncation and iterations must be at least 1".into()));
        }
        Ok(())
    }
}

/// Final state of the sampler. Components are the non-empty truncation
/// slots, relabelled `0..` in slot order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DpmFit {
    pub assignments: Vec<usize>,
    /// Normalized pooled region counts per component.
    pub profiles: Vec<Vec<f64>>,
    pub masses: Vec<usize>,
}

impl DpmFit {
    pub fn component_count(&self) -> usize {
        self.masses.len()
    }

    /// Components holding at least `share` of the observations.
    pub fn dominant(&self, share: f64) -> Vec<usize> {
        let n = self.assignments.len() as f64;
        (0..self.masses.len()).filter(|&k| self.masses[k] as f64 >= share * n).collect()
    }

    /// Largest entry of a component's profile, ties to the smallest index.
    pub fn dominant_region(&self, component: usize) -> usize {
        let p = &self.profiles[component];
        (0..p.len()).rev().max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap_or(0)
    }
}

struct State<'a> {
    obs: &'a [Vec<u64>],
    sparse: Vec<Vec<(usize, f64)>>,
    sizes: Vec<f64>,
    dims: usize,
    t: usize,
    members: Vec<usize>,
    pooled: Vec<f64>,
    pooled_total: Vec<f64>,
    z: Vec<usize>,
}

impl State<'_> {
    fn apply(&mut self, i: usize, k: usize, sign: f64) {
        for &(r, x) in &self.sparse[i] {
            self.pooled[k * self.dims + r] += sign * x;
        }
        self.pooled_total[k] += sign * self.sizes[i];
        if sign > 0.0 {
            self.members[k] += 1;
        } else {
            self.members[k] -= 1;
        }
    }

    fn log_lik(&self, i: usize, k: usize) -> f64 {
        let bb = self.dims as f64 * BASE_CONCENTRATION;
        let c = self.pooled_total[k];
        let mut s = libm::lgamma(bb + c) - libm::lgamma(bb + c + self.sizes[i]);
        for &(r, x) in &self.sparse[i] {
            let ckr = self.pooled[k * self.dims + r];
            s += libm::lgamma(BASE_CONCENTRATION + ckr + x) - libm::lgamma(BASE_CONCENTRATION + ckr);
        }
        s
    }

    /// Draws a component for observation `i`, which must be unassigned.
    /// Without an rng, returns the most probable component instead.
    fn draw(&self, i: usize, alpha: f64, rng: Option<&mut crate::rng::Rng>, logp: &mut Vec<f64>) -> usize {
        logp.clear();
        let mut after: usize = self.members.iter().sum();
        let mut stick = 0.0;
        for k in 0..self.t {
            after -= self.members[k];
            let prior = if k + 1 == self.t {
                stick
            } else {
                let n_k = self.members[k] as f64;
                let ev = (1.0 + n_k) / (1.0 + alpha + n_k + after as f64);
                let p = stick + ev.ln();
                stick += (1.0 - ev).ln();
                p
            };
            logp.push(prior + self.log_lik(i, k));
        }
        let Some(rng) = rng else {
            return (0..self.t).rev().max_by(|&a, &b| logp[a].total_cmp(&logp[b])).expect("t >= 1");
        };
        let max = logp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in logp.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        let mut u = rng.random::<f64>() * total;
        for (k, &w) in logp.iter().enumerate() {
            if u < w {
                return k;
            }
            u -= w;
        }
        // Rounding left `u` past the end: take the last positive weight.
        logp.iter().rposition(|&w| w > 0.0).unwrap_or(0)
    }
}

/// Groups observations by their largest coordinate (ties to the smallest
/// index), largest group first; groups beyond the truncation share the last
/// slot.
///
/// Single-site Gibbs moves cannot split a component once two well-populated
/// regions share it, so starting from a sequential prior draw leaves merged
/// regions in place at realistic view counts. Starting split and letting
/// the sampler merge does not have that problem.
fn initial_partition(observations: &[Vec<u64>], t: usize) -> Vec<usize> {
    let key: Vec<usize> = observations
        .iter()
        .map(|o| (0..o.len()).rev().max_by_key(|&r| o[r]).filter(|&r| o[r] > 0).unwrap_or(o.len()))
        .collect();
    let mut sizes: BTreeMap<usize, usize> = BTreeMap::new();
    for &k in &key {
        *sizes.entry(k).or_insert(0) += 1;
    }
    let mut order: Vec<(usize, usize)> = sizes.into_iter().collect();
    order.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let slot: BTreeMap<usize, usize> = order.iter().enumerate().map(|(i, &(k, _))| (k, i.min(t - 1))).collect();
    key.iter().map(|k| slot[k]).collect()
}

/// Fits the mixture to per-user region-count vectors, scanned in the given
/// order for `config.iterations` Gibbs sweeps from [`initial_partition`],
/// followed by one sweep that moves each observation to its most probable
/// component. Bit-reproducible for a seed.
pub fn dpm_fit(observations: &[Vec<u64>], config: &DpmConfig) -> Result<DpmFit, GeoError> {
    config.validate()?;
    let Some(first) = observations.first() else { return Err(GeoError::EmptyInput) };
    let dims = first.len();
    if let Some((index, o)) = observations.iter().enumerate().find(|(_, o)| o.len() != dims) {
        return Err(GeoError::DimensionMismatch { index, len: o.len(), expected: dims });
    }
    let t = config.truncation;
    let sparse: Vec<Vec<(usize, f64)>> = observations
        .iter()
        .map(|o| o.iter().enumerate().filter(|&(_, &x)| x > 0).map(|(r, &x)| (r, x as f64)).collect())
        .collect();
    let sizes = observations.iter().map(|o| o.iter().sum::<u64>() as f64).collect();
    let mut st = State {
        obs: observations,
        sparse,
        sizes,
        dims,
        t,
        members: vec![0; t],
        pooled: vec![0.0; t * dims],
        pooled_total: vec![0.0; t],
        z: vec![0; observations.len()],
    };
    for (i, k) in initial_partition(observations, t).into_iter().enumerate() {
        st.z[i] = k;
        st.apply(i, k, 1.0);
    }
    let mut rng = seeded(config.seed);
    let mut scratch = Vec::with_capacity(t);
    for sweep in 0..=config.iterations {
        // The last pass is a greedy one, so single-sample noise does not leave
        // a few observations stranded in foreign components.
        let greedy = sweep == config.iterations;
        for i in 0..st.obs.len() {
            let old = st.z[i];
            st.apply(i, old, -1.0);
            let k = st.draw(i, config.alpha, (!greedy).then_some(&mut rng), &mut scratch);
            st.z[i] = k;
            st.apply(i, k, 1.0);
        }
    }

    let mut label = vec![usize::MAX; t];
    let mut masses = Vec::new();
    let mut profiles = Vec::new();
    for (k, &size) in st.members.iter().enumerate() {
        if size == 0 {
            continue;
        }
        label[k] = masses.len();
        masses.push(size);
        // Recompute pooled counts exactly rather than trusting float drift.
        let mut c = vec![0u64; dims];
        for (i, &zi) in st.z.iter().enumerate() {
            if zi == k {
                for (a, b) in c.iter_mut().zip(&st.obs[i]) {
                    *a += b;
                }
            }
        }
        let total: u64 = c.iter().sum();
        profiles.push(c.iter().map(|&x| if total > 0 { x as f64 / total as f64 } else { 0.0 }).collect());
    }
    let assignments = st.z.iter().map(|&k| label[k]).collect();
    Ok(DpmFit { assignments, profiles, masses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    /// Count vectors drawn from `clusters` disjoint blocks of `width` regions.
    pub(crate) fn planted(n: usize, clusters: usize, width: usize, views: usize, seed: u64) -> (Vec<Vec<u64>>, Vec<usize>) {
        let mut rng = seeded(seed);
        let mut obs = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let c = i % clusters;
            let mut v = vec![0u64; clusters * width];
            for _ in 0..views {
                v[c * width + rng.random_range(0..width)] += 1;
            }
            obs.push(v);
            labels.push(c);
        }
        (obs, labels)
    }

    /// Best accuracy over relabelings, via majority planted label per component.
    pub(crate) fn accuracy(fit: &DpmFit, labels: &[usize], clusters: usize) -> f64 {
        let mut hits = vec![vec![0usize; clusters]; fit.component_count()];
        for (&k, &l) in fit.assignments.iter().zip(labels) {
            hits[k][l] += 1;
        }
        // One-to-one matching of the largest components to planted labels.
        let mut used = vec![false; clusters];
        let mut order: Vec<usize> = (0..fit.component_count()).collect();
        order.sort_by_key(|&k| std::cmp::Reverse(fit.masses[k]));
        let mut correct = 0;
        for k in order {
            if let Some(l) = (0..clusters).filter(|&l| !used[l]).max_by_key(|&l| hits[k][l]) {
                used[l] = true;
                correct += hits[k][l];
            }
        }
        correct as f64 / labels.len() as f64
    }

    #[test]
    fn identical_observations_share_one_component() {
        let obs = vec![vec![3, 0, 1, 0]; 200];
        let fit = dpm_fit(&obs, &DpmConfig { iterations: 50, ..DpmConfig::default() }).unwrap();
        let top = *fit.masses.iter().max().unwrap();
        assert!(top as f64 >= 0.99 * 200.0, "{:?}", fit.masses);
        assert_eq!(fit.masses.iter().sum::<usize>(), 200);
    }

    #[test]
    fn recovers_disjoint_clusters() {
        let (obs, labels) = planted(300, 3, 4, 6, 11);
        let fit = dpm_fit(&obs, &DpmConfig { iterations: 100, ..DpmConfig::default() }).unwrap();
        assert_eq!(fit.dominant(0.2).len(), 3, "{:?}", fit.masses);
        assert!(accuracy(&fit, &labels, 3) >= 0.95);
    }

    #[test]
    fn reproducible_and_validated() {
        let (obs, _) = planted(60, 2, 3, 4, 2);
        let cfg = DpmConfig { iterations: 20, ..DpmConfig::default() };
        assert_eq!(dpm_fit(&obs, &cfg).unwrap(), dpm_fit(&obs, &cfg).unwrap());
        assert_eq!(dpm_fit(&[], &cfg), Err(GeoError::EmptyInput));
        assert!(matches!(dpm_fit(&[vec![1, 2], vec![1]], &cfg), Err(GeoError::DimensionMismatch { index: 1, .. })));
        assert!(matches!(dpm_fit(&obs, &DpmConfig { alpha: 0.0, ..cfg }), Err(GeoError::InvalidConfig(_))));
        assert!(matches!(dpm_fit(&obs, &DpmConfig { truncation: 0, ..cfg }), Err(GeoError::InvalidConfig(_))));
        let one = dpm_fit(&obs, &DpmConfig { truncation: 1, ..cfg }).unwrap();
        assert_eq!(one.masses, vec![60]);
    }

    #[test]
    fn small_alpha_uses_fewer_components() {
        // Overlapping supports leave the partition to the prior.
        let mut rng = seeded(9);
        let obs: Vec<Vec<u64>> = (0..150)
            .map(|_| {
                let mut v = vec![0u64; 6];
                for _ in 0..2 {
                    v[rng.random_range(0..6)] += 1;
                }
                v
            })
            .collect();
        let run = |alpha| {
            dpm_fit(&obs, &DpmConfig { alpha, iterations: 60, ..DpmConfig::default() }).unwrap().component_count()
        };
        let (small, unit) = (run(0.01), run(1.0));
        assert!(small < unit, "{small} vs {unit}");
    }
}

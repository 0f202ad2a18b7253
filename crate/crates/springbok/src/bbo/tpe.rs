//! Tree-structured Parzen Estimator suggestion step.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::history::OptimizationHistory;
use super::space::{SearchSpace, NUM_PARAMS};
use crate::cpg::CpgParams;

/// TPE hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TpeConfig {
    /// Trials drawn uniformly before the density model kicks in.
    pub n_startup: usize,
    /// Quantile of the objective that separates good from bad trials.
    pub gamma: f64,
    /// Candidates sampled from the good density per suggestion.
    pub n_candidates: usize,
}

impl Default for TpeConfig {
    fn default() -> Self {
        TpeConfig {
            n_startup: 20,
            gamma: 0.25,
            n_candidates: 24,
        }
    }
}

/// Standard normal density.
#[inline]
fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal CDF.
#[inline]
fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// One-dimensional mixture of truncated Gaussian kernels.
struct Kde {
    centers: Vec<f64>,
    bandwidths: Vec<f64>,
    lo: f64,
    hi: f64,
}

impl Kde {
    /// Fits kernels at the observed values (already in transformed space).
    ///
    /// Each kernel's bandwidth is the larger of its spacing to the nearest
    /// sorted neighbors and 1/20 of the range, so dense clusters stay sharp
    /// without collapsing to zero width.
    fn fit(values: &[f64], lo: f64, hi: f64) -> Self {
        assert!(!values.is_empty(), "KDE needs at least one observation");
        let range = hi - lo;
        let floor = range / 20.0;
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let mut bandwidths = Vec::with_capacity(n);
        for i in 0..n {
            let prev_gap = if i > 0 { sorted[i] - sorted[i - 1] } else { 0.0 };
            let next_gap = if i + 1 < n { sorted[i + 1] - sorted[i] } else { 0.0 };
            bandwidths.push(prev_gap.max(next_gap).max(floor));
        }
        Kde {
            centers: sorted,
            bandwidths,
            lo,
            hi,
        }
    }

    /// Log density at `x`, with the truncation renormalization.
    fn log_pdf(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for (&c, &bw) in self.centers.iter().zip(self.bandwidths.iter()) {
            let mass = normal_cdf((self.hi - c) / bw) - normal_cdf((self.lo - c) / bw);
            if mass > 0.0 {
                acc += normal_pdf((x - c) / bw) / (bw * mass);
            }
        }
        (acc / self.centers.len() as f64).max(f64::MIN_POSITIVE).ln()
    }

    /// Samples one point: pick a kernel uniformly, draw a truncated normal by
    /// rejection with a clamped fallback.
    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        use rand_distr::Distribution;
        let idx = rng.random_range(0..self.centers.len());
        let (c, bw) = (self.centers[idx], self.bandwidths[idx]);
        for _ in 0..100 {
            let z: f64 = rand_distr::StandardNormal.sample(rng);
            let x = c + bw * z;
            if x >= self.lo && x <= self.hi {
                return x;
            }
        }
        c.clamp(self.lo, self.hi)
    }
}

/// Suggests the next point to evaluate from raw (point, objective) pairs.
///
/// Below `n_startup` observations the suggestion is uniform. Otherwise the
/// observations are split at the γ-quantile of the objective, per-dimension
/// kernel densities are fitted to the good set `l` and bad set `g`, and the
/// sampled candidate maximizing `Σ_d log l_d − log g_d` wins.
pub fn suggest_vector(
    observations: &[([f64; NUM_PARAMS], f64)],
    space: &SearchSpace,
    config: &TpeConfig,
    rng: &mut ChaCha8Rng,
) -> [f64; NUM_PARAMS] {
    if observations.len() < config.n_startup.max(2) {
        return space.sample_uniform(rng);
    }

    let mut order: Vec<usize> = (0..observations.len()).collect();
    order.sort_by(|&a, &b| observations[a].1.total_cmp(&observations[b].1));
    let n_good = ((observations.len() as f64 * config.gamma).ceil() as usize)
        .clamp(1, observations.len() - 1);

    let good_kdes: Vec<Kde> = (0..NUM_PARAMS)
        .map(|dim| {
            let range = &space.ranges[dim];
            let (lo, hi) = range.transformed_bounds();
            let values: Vec<f64> = order[..n_good]
                .iter()
                .map(|&i| range.transform(observations[i].0[dim]))
                .collect();
            Kde::fit(&values, lo, hi)
        })
        .collect();
    let bad_kdes: Vec<Kde> = (0..NUM_PARAMS)
        .map(|dim| {
            let range = &space.ranges[dim];
            let (lo, hi) = range.transformed_bounds();
            let values: Vec<f64> = order[n_good..]
                .iter()
                .map(|&i| range.transform(observations[i].0[dim]))
                .collect();
            Kde::fit(&values, lo, hi)
        })
        .collect();

    let mut best_point = [0.0; NUM_PARAMS];
    let mut best_score = f64::NEG_INFINITY;
    for _ in 0..config.n_candidates.max(1) {
        let mut point_t = [0.0; NUM_PARAMS];
        let mut score = 0.0;
        for dim in 0..NUM_PARAMS {
            let x = good_kdes[dim].sample(rng);
            point_t[dim] = x;
            score += good_kdes[dim].log_pdf(x) - bad_kdes[dim].log_pdf(x);
        }
        if score > best_score {
            best_score = score;
            for dim in 0..NUM_PARAMS {
                best_point[dim] = space.ranges[dim]
                    .untransform(point_t[dim])
                    .clamp(space.ranges[dim].lower, space.ranges[dim].upper);
            }
        }
    }
    best_point
}

/// Suggests the next gait parameters from an optimization history.
///
/// Failed trials participate with their penalty objectives so the good/bad
/// split stays informative; if every trial failed so far the suggestion falls
/// back to uniform sampling.
pub fn tpe_suggest(
    history: &OptimizationHistory,
    space: &SearchSpace,
    config: &TpeConfig,
    rng: &mut ChaCha8Rng,
) -> CpgParams {
    if !history.is_empty() && history.successful().next().is_none() {
        return space.to_params(&space.sample_uniform(rng));
    }
    let observations: Vec<([f64; NUM_PARAMS], f64)> = history
        .trials()
        .iter()
        .map(|t| (space.from_params(&t.params), t.objective))
        .collect();
    let point = suggest_vector(&observations, space, config, rng);
    space.to_params(&point)
}

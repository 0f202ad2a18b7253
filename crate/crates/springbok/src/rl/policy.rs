//! Squashed-Gaussian policy head: sampling, log-probabilities and their
//! analytic gradients.
//!
//! The actor network emits `2A` values per state: `A` pre-squash means and
//! `A` raw log-std values. The raw log-std is mapped smoothly into
//! `[LOG_STD_MIN, LOG_STD_MAX]` so every derivative stays continuous. Actions
//! are `a = limit · tanh(mean + σ ε)` and therefore bounded by construction.

use nalgebra::DMatrix;

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

/// Smooth clamp of the raw log-std output into its range.
#[inline]
pub fn clamp_log_std(raw: f64) -> f64 {
    LOG_STD_MIN + 0.5 * (LOG_STD_MAX - LOG_STD_MIN) * (raw.tanh() + 1.0)
}

/// Derivative of [`clamp_log_std`] with respect to the raw value.
#[inline]
pub fn clamp_log_std_grad(raw: f64) -> f64 {
    let t = raw.tanh();
    0.5 * (LOG_STD_MAX - LOG_STD_MIN) * (1.0 - t * t)
}

/// Numerically stable `ln(1 − tanh²(u))`.
#[inline]
fn log_one_minus_tanh_sq(u: f64) -> f64 {
    // ln(1 − tanh²u) = 2 (ln 2 − u − softplus(−2u))
    2.0 * (std::f64::consts::LN_2 - u - softplus(-2.0 * u))
}

#[inline]
fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

/// One reparameterized batch sample with everything gradients need.
pub struct SquashedSample {
    /// Pre-squash draws `u = mean + σ ε`.
    pub u: DMatrix<f64>,
    /// `tanh(u)`.
    pub t: DMatrix<f64>,
    /// Bounded actions `limit · tanh(u)`.
    pub action: DMatrix<f64>,
    /// Per-sample log-probability of the action (summed over dimensions).
    pub log_prob: Vec<f64>,
    /// The noise used, kept for gradient formulas.
    pub eps: DMatrix<f64>,
    /// σ = exp(log_std).
    pub sigma: DMatrix<f64>,
    pub limit: f64,
}

/// Draws `a = limit·tanh(mean + σ ε)` and evaluates its log-density.
///
/// `mean` and `log_std` are `B×A`; `eps` is standard-normal noise of the same
/// shape (pass zeros for the deterministic mean action).
pub fn squash_sample(
    mean: &DMatrix<f64>,
    log_std: &DMatrix<f64>,
    eps: &DMatrix<f64>,
    limit: f64,
) -> SquashedSample {
    let sigma = log_std.map(f64::exp);
    let mut u = mean.clone();
    u.zip_zip_apply(&sigma, eps, |u, s, e| *u += s * e);
    let t = u.map(f64::tanh);
    let action = &t * limit;

    let (batch, dim) = (mean.nrows(), mean.ncols());
    let mut log_prob = vec![0.0; batch];
    for b in 0..batch {
        let mut acc = 0.0;
        for a in 0..dim {
            let gaussian = -0.5 * eps[(b, a)] * eps[(b, a)]
                - log_std[(b, a)]
                - 0.5 * (2.0 * std::f64::consts::PI).ln();
            let correction = log_one_minus_tanh_sq(u[(b, a)]) + limit.ln();
            acc += gaussian - correction;
        }
        log_prob[b] = acc;
    }

    SquashedSample {
        u,
        t,
        action,
        log_prob,
        eps: eps.clone(),
        sigma,
        limit,
    }
}

impl SquashedSample {
    /// ∂logπ/∂mean for each element.
    pub fn dlogp_dmean(&self) -> DMatrix<f64> {
        // Only the tanh correction depends on the mean: d/du[−ln(1−tanh²u)] = 2 tanh u.
        self.t.map(|t| 2.0 * t)
    }

    /// ∂logπ/∂log_std for each element.
    pub fn dlogp_dlogstd(&self) -> DMatrix<f64> {
        let mut out = self.t.clone();
        out.zip_zip_apply(&self.sigma, &self.eps, |t, s, e| *t = -1.0 + 2.0 * *t * s * e);
        out
    }

    /// ∂action/∂mean for each element.
    pub fn daction_dmean(&self) -> DMatrix<f64> {
        self.t.map(|t| self.limit * (1.0 - t * t))
    }

    /// ∂action/∂log_std for each element.
    pub fn daction_dlogstd(&self) -> DMatrix<f64> {
        let mut out = self.t.map(|t| self.limit * (1.0 - t * t));
        out.zip_zip_apply(&self.sigma, &self.eps, |d, s, e| *d *= s * e);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Toy three-parameter policy (mean = w·x + b, raw log-std = c) against a
    /// known differentiable value function. Analytic gradient of the actor
    /// loss versus central finite differences.
    #[test]
    fn actor_loss_gradient_matches_finite_differences() {
        let x = 0.37;
        let eps_val = 0.62;
        let alpha = 0.11;
        let limit = 0.8;
        let q = |a: f64| -> f64 { -(a - 0.3) * (a - 0.3) };
        let dq = |a: f64| -> f64 { -2.0 * (a - 0.3) };

        let loss = |w: f64, b: f64, c: f64| -> f64 {
            let mean = DMatrix::from_element(1, 1, w * x + b);
            let log_std = DMatrix::from_element(1, 1, clamp_log_std(c));
            let eps = DMatrix::from_element(1, 1, eps_val);
            let sample = squash_sample(&mean, &log_std, &eps, limit);
            alpha * sample.log_prob[0] - q(sample.action[(0, 0)])
        };

        let (w, b, c) = (0.5, -0.2, 0.1);
        let mean = DMatrix::from_element(1, 1, w * x + b);
        let log_std = DMatrix::from_element(1, 1, clamp_log_std(c));
        let eps = DMatrix::from_element(1, 1, eps_val);
        let sample = squash_sample(&mean, &log_std, &eps, limit);

        let dl_dmean =
            alpha * sample.dlogp_dmean()[(0, 0)] - dq(sample.action[(0, 0)]) * sample.daction_dmean()[(0, 0)];
        let dl_dlogstd = alpha * sample.dlogp_dlogstd()[(0, 0)]
            - dq(sample.action[(0, 0)]) * sample.daction_dlogstd()[(0, 0)];
        let analytic = [
            dl_dmean * x,                       // ∂/∂w
            dl_dmean,                           // ∂/∂b
            dl_dlogstd * clamp_log_std_grad(c), // ∂/∂c
        ];

        let h = 1e-6;
        let fd = [
            (loss(w + h, b, c) - loss(w - h, b, c)) / (2.0 * h),
            (loss(w, b + h, c) - loss(w, b - h, c)) / (2.0 * h),
            (loss(w, b, c + h) - loss(w, b, c - h)) / (2.0 * h),
        ];
        for (a, f) in analytic.iter().zip(fd.iter()) {
            let rel = (a - f).abs() / f.abs().max(1e-9);
            assert!(rel < 1e-4, "analytic {a} vs fd {f} (rel {rel})");
        }
    }

    #[test]
    fn actions_are_bounded_by_the_limit() {
        let mean = DMatrix::from_row_slice(2, 2, &[5.0, -7.0, 0.1, 100.0]);
        let log_std = DMatrix::from_element(2, 2, 0.5);
        let eps = DMatrix::from_row_slice(2, 2, &[3.0, -3.0, 0.0, 10.0]);
        let sample = squash_sample(&mean, &log_std, &eps, 0.02);
        for &a in sample.action.iter() {
            assert!(a.abs() <= 0.02);
        }
    }

    #[test]
    fn zero_mean_zero_noise_gives_zero_action() {
        let mean = DMatrix::zeros(1, 8);
        let log_std = DMatrix::from_element(1, 8, -1.0);
        let eps = DMatrix::zeros(1, 8);
        let sample = squash_sample(&mean, &log_std, &eps, 0.02);
        assert!(sample.action.iter().all(|&a| a == 0.0));
    }

    #[test]
    fn log_prob_matches_a_direct_evaluation() {
        // Compare against the naive formula at a benign point.
        let mean = DMatrix::from_element(1, 1, 0.3);
        let log_std = DMatrix::from_element(1, 1, -0.5);
        let eps = DMatrix::from_element(1, 1, 0.9);
        let limit = 1.5;
        let sample = squash_sample(&mean, &log_std, &eps, limit);
        let u = 0.3 + (-0.5f64).exp() * 0.9;
        let naive = -0.5 * 0.9f64 * 0.9 - (-0.5) - 0.5 * (2.0 * std::f64::consts::PI).ln()
            - ((1.0 - u.tanh() * u.tanh()) * limit).ln();
        assert_relative_eq!(sample.log_prob[0], naive, max_relative = 1e-12);
    }

    #[test]
    fn log_std_clamp_stays_in_range() {
        for raw in [-100.0, -1.0, 0.0, 2.5, 100.0] {
            let s = clamp_log_std(raw);
            assert!((LOG_STD_MIN..=LOG_STD_MAX).contains(&s));
        }
    }
}

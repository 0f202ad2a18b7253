//! Quantile regression pieces: Huber loss, its gradient, and the pooled-atom
//! truncation.

use nalgebra::DMatrix;

/// Quantile fractions τ_i = (2i+1)/(2m), strictly increasing in (0, 1).
pub fn quantile_fractions(m: usize) -> Vec<f64> {
    (0..m).map(|i| (2 * i + 1) as f64 / (2 * m) as f64).collect()
}

/// Pools per-critic atom rows, sorts them, and keeps everything but the top
/// `drop_per_critic` atoms per critic.
///
/// Input is a slice of `B×M` matrices (one per critic); output is `B×K` with
/// `K = n_critics · (M − drop_per_critic)`, each row sorted ascending.
pub fn truncate_pooled(atoms: &[&DMatrix<f64>], drop_per_critic: usize) -> DMatrix<f64> {
    assert!(!atoms.is_empty());
    let batch = atoms[0].nrows();
    let m = atoms[0].ncols();
    assert!(drop_per_critic < m, "cannot drop every quantile");
    let keep = atoms.len() * (m - drop_per_critic);
    let mut out = DMatrix::zeros(batch, keep);
    let mut pool: Vec<f64> = Vec::with_capacity(atoms.len() * m);
    for b in 0..batch {
        pool.clear();
        for critic in atoms {
            debug_assert_eq!(critic.nrows(), batch);
            debug_assert_eq!(critic.ncols(), m);
            pool.extend(critic.row(b).iter());
        }
        pool.sort_by(f64::total_cmp);
        for (k, &v) in pool[..keep].iter().enumerate() {
            out[(b, k)] = v;
        }
    }
    out
}

/// Like [`truncate_pooled`] but also reports, per batch row, which (critic,
/// quantile) produced each kept atom so gradients can flow back.
pub fn truncate_pooled_with_sources(
    atoms: &[&DMatrix<f64>],
    drop_per_critic: usize,
) -> (DMatrix<f64>, Vec<Vec<(usize, usize)>>) {
    assert!(!atoms.is_empty());
    let batch = atoms[0].nrows();
    let m = atoms[0].ncols();
    assert!(drop_per_critic < m, "cannot drop every quantile");
    let keep = atoms.len() * (m - drop_per_critic);
    let mut out = DMatrix::zeros(batch, keep);
    let mut sources = vec![Vec::with_capacity(keep); batch];
    let mut pool: Vec<(f64, usize, usize)> = Vec::with_capacity(atoms.len() * m);
    for b in 0..batch {
        pool.clear();
        for (c, critic) in atoms.iter().enumerate() {
            for (i, &v) in critic.row(b).iter().enumerate() {
                pool.push((v, c, i));
            }
        }
        pool.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (k, &(v, c, i)) in pool[..keep].iter().enumerate() {
            out[(b, k)] = v;
            sources[b].push((c, i));
        }
    }
    (out, sources)
}

/// Quantile Huber loss between predicted quantiles (`B×M`) and target atoms
/// (`B×K`), averaged over batch, quantiles and atoms.
///
/// Returns the loss and its gradient with respect to the predictions.
pub fn quantile_huber_loss(
    pred: &DMatrix<f64>,
    targets: &DMatrix<f64>,
    taus: &[f64],
    kappa: f64,
) -> (f64, DMatrix<f64>) {
    let batch = pred.nrows();
    let m = pred.ncols();
    let k = targets.ncols();
    assert_eq!(taus.len(), m);
    assert_eq!(targets.nrows(), batch);

    let normalizer = (batch * m * k) as f64;
    let mut loss = 0.0;
    let mut grad = DMatrix::zeros(batch, m);
    for b in 0..batch {
        for i in 0..m {
            let q = pred[(b, i)];
            let tau = taus[i];
            let mut g = 0.0;
            for j in 0..k {
                let u = targets[(b, j)] - q;
                let weight = if u < 0.0 { 1.0 - tau } else { tau };
                let (huber, dhuber) = if u.abs() <= kappa {
                    (0.5 * u * u, u)
                } else {
                    (kappa * (u.abs() - 0.5 * kappa), kappa * u.signum())
                };
                loss += weight * huber;
                // dL/dq = −weight · huber'(u)
                g -= weight * dhuber;
            }
            grad[(b, i)] = g / normalizer;
        }
    }
    (loss / normalizer, grad)
}

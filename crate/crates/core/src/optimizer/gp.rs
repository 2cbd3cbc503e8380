//! Gaussian-process surrogate with an ARD Matérn-5/2 kernel.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use super::simplex::nelder_mead;
use super::OptimizerError;

pub const LENGTH_SCALE_BOUNDS: (f64, f64) = (1e-2, 10.0);
pub const SIGNAL_VARIANCE_BOUNDS: (f64, f64) = (1e-2, 100.0);
pub const DEFAULT_JITTER: f64 = 1e-6;
const JITTER_CAP: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    /// Per-dimension length scales in unit-cube coordinates.
    pub length_scales: Vec<f64>,
    pub signal_variance: f64,
    /// Diagonal nugget actually used, in standardized units.
    pub jitter: f64,
}

pub fn matern52(r: f64) -> f64 {
    let s = 5f64.sqrt() * r;
    (1.0 + s + s * s / 3.0) * (-s).exp()
}

fn kernel(a: &[f64], b: &[f64], ls: &[f64], var: f64) -> f64 {
    let r2: f64 = a.iter().zip(b).zip(ls).map(|((x, y), l)| ((x - y) / l).powi(2)).sum();
    var * matern52(r2.sqrt())
}

fn gram(x: &[Vec<f64>], ls: &[f64], var: f64) -> DMatrix<f64> {
    let n = x.len();
    DMatrix::from_fn(n, n, |i, j| kernel(&x[i], &x[j], ls, var))
}

/// Cholesky of `k + j·I`, raising `j` tenfold until it succeeds or hits the cap.
fn factor(k: &DMatrix<f64>, jitter: f64) -> Option<(Cholesky<f64, Dyn>, f64)> {
    let mut j = jitter;
    while j <= JITTER_CAP {
        let mut m = k.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += j;
        }
        if let Some(c) = Cholesky::new(m) {
            return Some((c, j));
        }
        j = if j > 0.0 { 10.0 * j } else { 1e-10 };
    }
    None
}

#[derive(Debug, Clone)]
pub struct Surrogate {
    pub hyper: Hyperparameters,
    x: Vec<Vec<f64>>,
    y_mean: f64,
    y_scale: f64,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
}

fn standardize(y: &[f64]) -> (f64, f64, DVector<f64>) {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let scale = if sd > 1e-12 * mean.abs().max(1.0) { sd } else { 1.0 };
    (mean, scale, DVector::from_iterator(y.len(), y.iter().map(|v| (v - mean) / scale)))
}

/// Negative log marginal likelihood of standardized `y`.
fn nll(x: &[Vec<f64>], y: &DVector<f64>, ls: &[f64], var: f64, jitter: f64) -> Option<f64> {
    let (c, _) = factor(&gram(x, ls, var), jitter)?;
    let alpha = c.solve(y);
    let logdet: f64 = c.l().diagonal().iter().map(|d| d.ln()).sum();
    Some(0.5 * y.dot(&alpha) + logdet + 0.5 * y.len() as f64 * (2.0 * std::f64::consts::PI).ln())
}

fn unpack(theta: &[f64]) -> (Vec<f64>, f64) {
    let d = theta.len() - 1;
    let ls = theta[..d].iter().map(|t| t.exp().clamp(LENGTH_SCALE_BOUNDS.0, LENGTH_SCALE_BOUNDS.1)).collect();
    (ls, theta[d].exp().clamp(SIGNAL_VARIANCE_BOUNDS.0, SIGNAL_VARIANCE_BOUNDS.1))
}

impl Surrogate {
    /// Conditions a GP with fixed hyperparameters on unit-cube inputs.
    pub fn with_hyperparameters(x: &[Vec<f64>], y: &[f64], ls: &[f64], var: f64, jitter: f64) -> Result<Self, OptimizerError> {
        let (y_mean, y_scale, ys) = standardize(y);
        let (chol, j) = factor(&gram(x, ls, var), jitter).ok_or(OptimizerError::Degenerate)?;
        let alpha = chol.solve(&ys);
        Ok(Self {
            hyper: Hyperparameters { length_scales: ls.to_vec(), signal_variance: var, jitter: j },
            x: x.to_vec(),
            y_mean,
            y_scale,
            chol,
            alpha,
        })
    }

    /// Maximizes the marginal likelihood from a default start plus
    /// `restarts` random starts.
    pub fn fit(x: &[Vec<f64>], y: &[f64], jitter: f64, restarts: usize, rng: &mut impl Rng) -> Result<Self, OptimizerError> {
        if x.len() < 2 {
            return Err(OptimizerError::Settings(format!("surrogate needs at least 2 observations, got {}", x.len())));
        }
        let d = x[0].len();
        let (_, _, ys) = standardize(y);
        let objective = |theta: &[f64]| {
            let (ls, var) = unpack(theta);
            // Penalize leaving the box so the simplex is pulled back inside.
            let out: f64 = theta[..d]
                .iter()
                .map(|t| (LENGTH_SCALE_BOUNDS.0.ln() - t).max(0.0) + (t - LENGTH_SCALE_BOUNDS.1.ln()).max(0.0))
                .sum::<f64>()
                + (SIGNAL_VARIANCE_BOUNDS.0.ln() - theta[d]).max(0.0)
                + (theta[d] - SIGNAL_VARIANCE_BOUNDS.1.ln()).max(0.0);
            nll(x, &ys, &ls, var, jitter).map_or(1e300, |v| v + 1e3 * out)
        };
        let mut starts = vec![{
            let mut t = vec![0.3f64.ln(); d];
            t.push(0.0);
            t
        }];
        for _ in 0..restarts {
            let mut t: Vec<f64> =
                (0..d).map(|_| rng.random_range(LENGTH_SCALE_BOUNDS.0.ln()..LENGTH_SCALE_BOUNDS.1.ln().min(1.0))).collect();
            t.push(rng.random_range(-1.0..1.0));
            starts.push(t);
        }
        let mut best: Option<(Vec<f64>, f64)> = None;
        for s in starts {
            let (t, v) = nelder_mead(objective, &s, 0.5, 300 * (d + 1), 1e-9);
            if v < 1e300 && best.as_ref().map_or(true, |b| v < b.1) {
                best = Some((t, v));
            }
        }
        let (theta, _) = best.ok_or(OptimizerError::Degenerate)?;
        let (ls, var) = unpack(&theta);
        Self::with_hyperparameters(x, y, &ls, var, jitter)
    }

    /// Posterior mean and variance in objective units.
    pub fn predict(&self, u: &[f64]) -> (f64, f64) {
        let ls = &self.hyper.length_scales;
        let var = self.hyper.signal_variance;
        let k = DVector::from_iterator(self.x.len(), self.x.iter().map(|xi| kernel(u, xi, ls, var)));
        let mean = k.dot(&self.alpha);
        let v = self.chol.l().solve_lower_triangular(&k).expect("triangular factor is nonsingular");
        let variance = (var - v.norm_squared()).max(0.0);
        (self.y_mean + self.y_scale * mean, self.y_scale * self.y_scale * variance)
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        let ys = &self.alpha;
        let y = self.chol.l() * (self.chol.l().transpose() * ys);
        let logdet: f64 = self.chol.l().diagonal().iter().map(|d| d.ln()).sum();
        -(0.5 * y.dot(ys) + logdet + 0.5 * ys.len() as f64 * (2.0 * std::f64::consts::PI).ln())
    }

    pub fn scale(&self) -> f64 {
        self.y_scale
    }
}

/// `E[max(f(x) - best, 0)]` under the posterior.
pub fn expected_improvement(s: &Surrogate, u: &[f64], best: f64) -> f64 {
    let (mean, var) = s.predict(u);
    let sd = var.sqrt();
    let gain = mean - best;
    if sd < 1e-12 * s.scale() {
        return gain.max(0.0);
    }
    let z = gain / sd;
    let n = Normal::standard();
    (gain * n.cdf(z) + sd * n.pdf(z)).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matern_shape() {
        assert_eq!(matern52(0.0), 1.0);
        assert!(matern52(1.0) < matern52(0.5));
        assert!(matern52(10.0) < 1e-5);
    }

    #[test]
    fn constant_data_gives_flat_posterior() {
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 / 5.0, (i * 7 % 6) as f64 / 5.0]).collect();
        let y = vec![2.5; 6];
        let s = Surrogate::fit(&x, &y, DEFAULT_JITTER, 3, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        for p in &x {
            let (m, v) = s.predict(p);
            assert!((m - 2.5).abs() < 1e-9);
            assert!(v < 1e-5);
        }
        assert!((s.predict(&[0.33, 0.71]).0 - 2.5).abs() < 1e-9);
    }

    #[test]
    fn interpolates_observations() {
        let x: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 / 7.0]).collect();
        let y: Vec<f64> = x.iter().map(|p| (6.0 * p[0]).sin() * 3.0 + 1.0).collect();
        let s = Surrogate::fit(&x, &y, DEFAULT_JITTER, 3, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        for (p, v) in x.iter().zip(&y) {
            let (m, var) = s.predict(p);
            assert!((m - v).abs() < 1e-3 * s.scale(), "{m} vs {v}");
            assert!(var >= 0.0);
        }
    }

    #[test]
    fn variance_is_never_negative() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![(i as f64 * 0.37) % 1.0, (i as f64 * 0.61) % 1.0]).collect();
        let y: Vec<f64> = x.iter().map(|p| p[0] * p[1]).collect();
        let s = Surrogate::fit(&x, &y, DEFAULT_JITTER, 2, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        for i in 0..=20 {
            for j in 0..=20 {
                assert!(s.predict(&[i as f64 / 20.0, j as f64 / 20.0]).1 >= 0.0);
            }
        }
    }

    #[test]
    fn duplicate_points_escalate_jitter() {
        let x = vec![vec![0.5], vec![0.5], vec![0.5 + 1e-12]];
        let y = vec![1.0, 1.0, 1.0];
        let s = Surrogate::with_hyperparameters(&x, &y, &[0.3], 1.0, 0.0).unwrap();
        assert!(s.hyper.jitter > 0.0);
    }

    #[test]
    fn recovers_length_scale_of_a_gp_draw() {
        // Sample a draw with ℓ = 0.2 via the Cholesky factor of its covariance.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 60;
        let x: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random::<f64>()]).collect();
        let k = gram(&x, &[0.2], 1.0);
        let (c, _) = factor(&k, 1e-8).unwrap();
        let normal = standard_normal(&mut rng, n);
        let y: Vec<f64> = (c.l() * normal).iter().copied().collect();
        let s = Surrogate::fit(&x, &y, DEFAULT_JITTER, 5, &mut rng).unwrap();
        let l = s.hyper.length_scales[0];
        assert!(l > 0.1 && l < 0.4, "recovered {l}");
    }

    fn standard_normal(rng: &mut impl Rng, n: usize) -> DVector<f64> {
        DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)))
    }

    #[test]
    fn ei_is_nonnegative_and_vanishes_at_data() {
        let x: Vec<Vec<f64>> = [0.1, 0.35, 0.6, 0.9].iter().map(|&v| vec![v]).collect();
        let y: Vec<f64> = x.iter().map(|p| -(p[0] - 0.5f64).powi(2)).collect();
        let best = y.iter().cloned().fold(f64::MIN, f64::max);
        let s = Surrogate::fit(&x, &y, DEFAULT_JITTER, 3, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        for i in 0..=400 {
            assert!(expected_improvement(&s, &[i as f64 / 400.0], best) >= 0.0);
        }
        let tol = 2.0 * DEFAULT_JITTER.sqrt() * s.scale();
        for p in &x {
            assert!(expected_improvement(&s, p, best) < tol);
        }
    }
}

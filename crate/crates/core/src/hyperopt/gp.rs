//! Gaussian-process surrogate with an isotropic RBF kernel.

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{SearchSpace, Trial};
use crate::error::{invalid, Error, Result};
use crate::eval::{normal_cdf, normal_pdf};

/// Lowest BER fed to the log transform; a zero-error trial maps here.
pub const BER_FLOOR: f64 = 1e-7;

/// Box on `(ln l, ln s_f^2, ln s_n^2)`, applied as a barrier during the fit.
const LOG_BOUNDS: [(f64, f64); 3] = [(-4.6, 2.3), (-4.6, 4.6), (-18.4, 0.0)];

#[derive(Debug, Clone)]
pub struct GaussianProcess {
    x: Vec<Vec<f64>>,
    y_mean: f64,
    y_scale: f64,
    pub length_scale: f64,
    pub signal_var: f64,
    pub noise_var: f64,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

fn kernel_matrix(x: &[Vec<f64>], ell: f64, sf2: f64, sn2: f64) -> DMatrix<f64> {
    let n = x.len();
    DMatrix::from_fn(n, n, |i, j| {
        let k = sf2 * (-sq_dist(&x[i], &x[j]) / (2.0 * ell * ell)).exp();
        if i == j {
            k + sn2
        } else {
            k
        }
    })
}

struct NegLogLik<'a> {
    x: &'a [Vec<f64>],
    y: &'a DVector<f64>,
}

impl NegLogLik<'_> {
    fn eval(&self, p: &[f64]) -> f64 {
        if p.iter().zip(LOG_BOUNDS).any(|(v, (lo, hi))| !(lo..=hi).contains(v)) {
            return f64::INFINITY;
        }
        let k = kernel_matrix(self.x, p[0].exp(), p[1].exp(), p[2].exp());
        let Some(ch) = k.cholesky() else { return f64::INFINITY };
        let alpha = ch.solve(self.y);
        let logdet: f64 = ch.l_dirty().diagonal().iter().map(|d| d.ln()).sum();
        0.5 * self.y.dot(&alpha) + logdet + 0.5 * self.x.len() as f64 * (2.0 * std::f64::consts::PI).ln()
    }
}

impl CostFunction for NegLogLik<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.eval(p))
    }
}

impl GaussianProcess {
    /// Fits kernel hyperparameters by maximising the marginal likelihood with
    /// multi-start Nelder-Mead over log-parameters. Targets are standardised internally.
    pub fn fit(x: Vec<Vec<f64>>, y: &[f64]) -> Result<Self> {
        if x.len() != y.len() || x.len() < 2 {
            return Err(invalid(format!("GP needs at least 2 observations, got {}", y.len())));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(invalid("GP targets must be finite"));
        }
        let n = y.len() as f64;
        let y_mean = y.iter().sum::<f64>() / n;
        let sd = (y.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / n).sqrt();
        let y_scale = if sd > 1e-12 { sd } else { 1.0 };
        let ys = DVector::from_iterator(y.len(), y.iter().map(|v| (v - y_mean) / y_scale));
        let problem = NegLogLik { x: &x, y: &ys };

        let mut best = (f64::INFINITY, vec![0.0, 0.0, -9.2]);
        for ell0 in [0.1f64, 0.3, 1.0] {
            for sn0 in [1e-6f64, 1e-2] {
                let start = vec![ell0.ln(), 0.0, sn0.ln()];
                let mut simplex = vec![start.clone()];
                for d in 0..3 {
                    let mut v = start.clone();
                    v[d] += 0.7;
                    simplex.push(v);
                }
                let solver = NelderMead::new(simplex).with_sd_tolerance(1e-7).map_err(|e| invalid(e.to_string()))?;
                let res = Executor::new(NegLogLik { x: &x, y: &ys }, solver)
                    .configure(|s| s.max_iters(300))
                    .run()
                    .map_err(|e| invalid(format!("GP hyperparameter fit failed: {e}")))?;
                let state = res.state();
                if let Some(p) = state.get_best_param() {
                    let c = problem.eval(p);
                    if c < best.0 {
                        best = (c, p.clone());
                    }
                }
            }
        }
        let p = best.1;
        let (ell, sf2, sn2) = (p[0].exp(), p[1].exp(), p[2].exp());
        let chol = kernel_matrix(&x, ell, sf2, sn2)
            .cholesky()
            .ok_or_else(|| invalid("kernel matrix is not positive definite"))?;
        let alpha = chol.solve(&ys);
        Ok(Self { x, y_mean, y_scale, length_scale: ell, signal_var: sf2, noise_var: sn2, chol, alpha })
    }

    /// Posterior mean and variance of the latent function at `q`, in target units.
    pub fn predict(&self, q: &[f64]) -> (f64, f64) {
        let ell2 = 2.0 * self.length_scale * self.length_scale;
        let k = DVector::from_iterator(
            self.x.len(),
            self.x.iter().map(|xi| self.signal_var * (-sq_dist(xi, q) / ell2).exp()),
        );
        let mean = k.dot(&self.alpha);
        let v = self.chol.l().solve_lower_triangular(&k).unwrap_or_else(|| DVector::zeros(k.len()));
        let var = (self.signal_var - v.dot(&v)).max(0.0);
        (self.y_mean + self.y_scale * mean, var * self.y_scale * self.y_scale)
    }
}

/// Transformed objective `log10(max(BER, floor))` of an ok trial.
pub fn log_objective(ber: f64) -> f64 {
    ber.max(BER_FLOOR).log10()
}

/// Surrogate over the ok trials of a search.
pub fn gp_fit(space: &SearchSpace, trials: &[Trial]) -> Result<GaussianProcess> {
    let ok: Vec<&Trial> = trials.iter().filter(|t| t.objective.is_some()).collect();
    if ok.is_empty() && !trials.is_empty() {
        return Err(Error::AllTrialsDiverged { trials: trials.len() });
    }
    let x = ok.iter().map(|t| space.encode(&t.point)).collect();
    let y: Vec<f64> = ok.iter().map(|t| log_objective(t.objective.unwrap())).collect();
    GaussianProcess::fit(x, &y)
}

/// Closed-form expected improvement for minimisation.
pub fn expected_improvement(mean: f64, sigma: f64, best: f64) -> f64 {
    if sigma <= 0.0 || !sigma.is_finite() {
        return (best - mean).max(0.0);
    }
    let z = (best - mean) / sigma;
    ((best - mean) * normal_cdf(z) + sigma * normal_pdf(z)).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ei_limits() {
        assert_eq!(expected_improvement(1.0, 0.0, 1.0), 0.0);
        assert_eq!(expected_improvement(0.0, 0.0, 1.0), 1.0);
        assert!((expected_improvement(0.0, 1e-12, 1.0) - 1.0).abs() < 1e-9);
        assert!((expected_improvement(1.0, 1.0, 1.0) - 0.398_942_280_401_432_7).abs() < 1e-12);
        assert_eq!(expected_improvement(3.0, 0.0, 1.0), 0.0);
    }
}

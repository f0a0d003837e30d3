//! Classical least-squares baselines: ridge regression with an optional
//! spatial prior covariance, and anisotropic total-variation regularization.
//!
//! Ridge solves `(W W^T + mu * C^-1) f = W s` exactly via Cholesky. The
//! total-variation solver minimizes
//! `0.5 * ||s - W^T f||^2 + mu * sum_edges |f_i - f_j|`
//! by proximal gradient with an exact-enough proximal step (dual projected
//! gradient, warm-started) and a monotone safeguard: a step is only accepted
//! if it does not increase the objective, so the recorded objective trace is
//! non-increasing by construction.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::geometry::Grid;
use crate::synthesis::{LossField, MeasurementSet};

/// Prior field covariance used by the ridge baseline.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldCovariance {
    /// Identity covariance: plain Tikhonov regularization.
    Identity,
    /// Explicit symmetric positive definite covariance.
    Matrix(DMatrix<f64>),
}

/// Ridge baseline configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeConfig {
    /// Regularization weight; must be nonnegative.
    pub reg_weight: f64,
    pub covariance: FieldCovariance,
}

impl RidgeConfig {
    pub fn identity(reg_weight: f64) -> Self {
        RidgeConfig {
            reg_weight,
            covariance: FieldCovariance::Identity,
        }
    }
}

/// Exponential-decay spatial covariance over the grid points:
/// `C[i][j] = sigma2 * exp(-||x_i - x_j|| / kappa)`.
pub fn exp_kernel_covariance(grid: &Grid, sigma2: f64, kappa: f64) -> Result<DMatrix<f64>> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::InvalidHyperparameter(format!(
            "kernel variance must be positive and finite, got {sigma2}"
        )));
    }
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::InvalidHyperparameter(format!(
            "kernel length scale must be positive and finite, got {kappa}"
        )));
    }
    let n = grid.n_points();
    let points: Vec<_> = (0..n).map(|i| grid.point(i)).collect();
    let mut c = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = sigma2 * (-points[i].distance(&points[j]) / kappa).exp();
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    Ok(c)
}

/// Accumulates `W W^T` (sparse columns, dense result) and `W s`.
fn normal_equations(data: &MeasurementSet) -> (DMatrix<f64>, DVector<f64>) {
    let n = data.n_points();
    let mut a = DMatrix::zeros(n, n);
    let mut b = DVector::zeros(n);
    for (tau, col) in data.weights().columns().enumerate() {
        let entries: Vec<(usize, f64)> = col.iter().collect();
        for &(i, wi) in &entries {
            b[i] += wi * data.shadowing()[tau];
            for &(j, wj) in &entries {
                a[(i, j)] += wi * wj;
            }
        }
    }
    (a, b)
}

/// Ridge estimate: solves `(W W^T + mu * C^-1) f = W s` by Cholesky.
pub fn ridge_ls(data: &MeasurementSet, cfg: &RidgeConfig) -> Result<LossField> {
    if !(cfg.reg_weight >= 0.0) || !cfg.reg_weight.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "regularization weight must be nonnegative and finite, got {}",
            cfg.reg_weight
        )));
    }
    let n = data.n_points();
    let (mut a, b) = normal_equations(data);
    match &cfg.covariance {
        FieldCovariance::Identity => {
            for i in 0..n {
                a[(i, i)] += cfg.reg_weight;
            }
        }
        FieldCovariance::Matrix(c) => {
            if c.nrows() != n || c.ncols() != n {
                return Err(Error::dims(n, c.nrows(), "field covariance dimension"));
            }
            if cfg.reg_weight > 0.0 {
                let inv = Cholesky::new(c.clone())
                    .ok_or_else(|| {
                        Error::SingularSystem("field covariance is not positive definite".into())
                    })?
                    .inverse();
                a += inv * cfg.reg_weight;
            }
        }
    }
    let chol = Cholesky::new(a).ok_or_else(|| {
        Error::SingularSystem(
            "ridge normal equations are rank deficient; increase the regularization weight".into(),
        )
    })?;
    let f = chol.solve(&b);
    Ok(LossField::new(f.as_slice().to_vec()))
}

/// Total-variation baseline configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TvConfig {
    /// Regularization weight; must be nonnegative.
    pub reg_weight: f64,
    pub max_iters: usize,
    /// Stop when the objective's decrease falls to this fraction of its size.
    pub tol: f64,
}

impl Default for TvConfig {
    fn default() -> Self {
        TvConfig {
            reg_weight: 1e-2,
            max_iters: 500,
            tol: 1e-8,
        }
    }
}

/// Outcome of the total-variation solver.
#[derive(Debug, Clone, PartialEq)]
pub struct TvSolution {
    pub field: LossField,
    /// Objective after the initial point and each accepted step;
    /// non-increasing by construction.
    pub objectives: Vec<f64>,
    /// False when the iteration cap ended the run before the tolerance.
    pub converged: bool,
}

/// Data fidelity plus anisotropic total variation of a candidate field.
pub fn tv_objective(field: &[f64], data: &MeasurementSet, grid: &Grid, reg_weight: f64) -> f64 {
    let mut fit = 0.0;
    for (tau, col) in data.weights().columns().enumerate() {
        let r = data.shadowing()[tau] - col.dot(field);
        fit += r * r;
    }
    let tv: f64 = grid
        .edges()
        .iter()
        .map(|&(i, j)| (field[i] - field[j]).abs())
        .sum();
    0.5 * fit + reg_weight * tv
}

/// Largest eigenvalue of `W W^T` by power iteration (slightly inflated so a
/// `1/L` step is safe).
fn lipschitz_bound(data: &MeasurementSet) -> f64 {
    let n = data.n_points();
    let mut rng = ChaCha20Rng::seed_from_u64(0xBA5E);
    let mut x: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
    let mut lambda: f64 = 0.0;
    for _ in 0..80 {
        let mut y = vec![0.0; n];
        for col in data.weights().columns() {
            col.scatter_add(col.dot(&x), &mut y);
        }
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        lambda = norm;
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / norm;
        }
    }
    lambda * 1.01 + 1e-12
}

/// Proximal step of `alpha * TV` at `v` by dual projected gradient.
///
/// The dual variable `p` (one component per grid edge, clipped to [-1, 1])
/// is warm-started across calls.
fn tv_prox(v: &[f64], edges: &[(usize, usize)], alpha: f64, p: &mut [f64]) -> Vec<f64> {
    if alpha == 0.0 {
        return v.to_vec();
    }
    // u = v - alpha * D^T p, p <- clip(p + step * D u / alpha)
    let mut u = vec![0.0; v.len()];
    let step = 0.25; // 1/(8 alpha^2) * alpha^2 * 2: safe for the 4-neighbor difference operator
    for _ in 0..80 {
        u.copy_from_slice(v);
        for (e, &(i, j)) in edges.iter().enumerate() {
            u[i] -= alpha * p[e];
            u[j] += alpha * p[e];
        }
        let mut max_change: f64 = 0.0;
        for (e, &(i, j)) in edges.iter().enumerate() {
            let grad = u[i] - u[j];
            let updated = (p[e] + step * grad).clamp(-1.0, 1.0);
            max_change = max_change.max((updated - p[e]).abs());
            p[e] = updated;
        }
        if max_change < 1e-12 {
            break;
        }
    }
    u.copy_from_slice(v);
    for (e, &(i, j)) in edges.iter().enumerate() {
        u[i] -= alpha * p[e];
        u[j] += alpha * p[e];
    }
    u
}

/// Total-variation estimate by monotone proximal gradient from a zero field.
pub fn tv_ls(data: &MeasurementSet, grid: &Grid, cfg: &TvConfig) -> Result<TvSolution> {
    if !(cfg.reg_weight >= 0.0) || !cfg.reg_weight.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "regularization weight must be nonnegative and finite, got {}",
            cfg.reg_weight
        )));
    }
    if cfg.max_iters == 0 {
        return Err(Error::InvalidConfig("iteration cap must be positive".into()));
    }
    if data.n_points() != grid.n_points() {
        return Err(Error::dims(
            grid.n_points(),
            data.n_points(),
            "measurement grid size",
        ));
    }
    let n = grid.n_points();
    let edges = grid.edges();
    let lipschitz = lipschitz_bound(data);
    let mut f = vec![0.0; n];
    let mut objectives = vec![tv_objective(&f, data, grid, cfg.reg_weight)];
    if lipschitz == 0.0 {
        // No data: the zero field already minimizes the pure penalty.
        return Ok(TvSolution {
            field: LossField::new(f),
            objectives,
            converged: true,
        });
    }
    let mut dual = vec![0.0; edges.len()];
    let mut converged = false;

    for _ in 0..cfg.max_iters {
        // Gradient of the fidelity term: W (W^T f - s).
        let mut grad = vec![0.0; n];
        for (tau, col) in data.weights().columns().enumerate() {
            let r = col.dot(&f) - data.shadowing()[tau];
            col.scatter_add(r, &mut grad);
        }
        let current = *objectives.last().unwrap();
        let mut gamma = 1.0 / lipschitz;
        let mut accepted = None;
        for _ in 0..30 {
            let v: Vec<f64> = f
                .iter()
                .zip(&grad)
                .map(|(fi, gi)| fi - gamma * gi)
                .collect();
            let candidate = tv_prox(&v, &edges, gamma * cfg.reg_weight, &mut dual);
            let value = tv_objective(&candidate, data, grid, cfg.reg_weight);
            if value <= current {
                accepted = Some((candidate, value));
                break;
            }
            gamma *= 0.5;
        }
        let Some((candidate, value)) = accepted else {
            // No acceptable decrease at any step size: numerical optimum.
            converged = true;
            break;
        };
        f = candidate;
        objectives.push(value);
        if current - value <= cfg.tol * current.abs().max(1.0) {
            converged = true;
            break;
        }
    }

    Ok(TvSolution {
        field: LossField::new(f),
        objectives,
        converged,
    })
}

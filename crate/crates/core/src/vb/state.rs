//! Variational state and prior hyperparameters for the mean-field posterior.
//!
//! The posterior factorizes as `q(f, z, theta) = q(noise precision) *
//! prod_k q(class mean) q(class precision) * prod_i q(z_i) q(f_i | z_i)`,
//! with Gaussian field factors, categorical labels, gamma precision factors
//! (shape–scale parameterization: mean `shape * scale`), and Gaussian class
//! means. The state stores every factor's parameters plus two derived caches
//! that the coordinate updates reuse: the marginal site means and the
//! predicted shadowing per measurement.

use rand::Rng;
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::synthesis::MeasurementSet;

/// Prior hyperparameters: gamma prior on the noise precision, Gaussian priors
/// on the class means, and gamma priors on the class precisions.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperPriors {
    /// Shape of the gamma prior on the noise precision.
    pub noise_shape: f64,
    /// Scale of the gamma prior on the noise precision.
    pub noise_scale: f64,
    /// Location of the Gaussian prior on each class mean.
    pub mean_locs: Vec<f64>,
    /// Variance of the Gaussian prior on each class mean.
    pub mean_vars: Vec<f64>,
    /// Shape of the gamma prior on each class precision.
    pub prec_shapes: Vec<f64>,
    /// Scale of the gamma prior on each class precision.
    pub prec_scales: Vec<f64>,
}

impl HyperPriors {
    pub fn new(
        noise_shape: f64,
        noise_scale: f64,
        mean_locs: Vec<f64>,
        mean_vars: Vec<f64>,
        prec_shapes: Vec<f64>,
        prec_scales: Vec<f64>,
    ) -> Result<Self> {
        let k = mean_locs.len();
        if k == 0 {
            return Err(Error::InvalidHyperparameter(
                "at least one class is required".into(),
            ));
        }
        for (len, what) in [
            (mean_vars.len(), "class mean variances"),
            (prec_shapes.len(), "class precision shapes"),
            (prec_scales.len(), "class precision scales"),
        ] {
            if len != k {
                return Err(Error::dims(k, len, what));
            }
        }
        let positive = |v: f64, what: &str| -> Result<()> {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidHyperparameter(format!(
                    "{what} must be positive and finite, got {v}"
                )));
            }
            Ok(())
        };
        positive(noise_shape, "noise precision shape")?;
        positive(noise_scale, "noise precision scale")?;
        for (i, &m) in mean_locs.iter().enumerate() {
            if !m.is_finite() {
                return Err(Error::InvalidHyperparameter(format!(
                    "class {i} mean location must be finite, got {m}"
                )));
            }
        }
        for &(vals, what) in &[
            (&mean_vars, "class mean variance"),
            (&prec_shapes, "class precision shape"),
            (&prec_scales, "class precision scale"),
        ] {
            for (i, &v) in vals.iter().enumerate() {
                positive(v, &format!("{what} (class {i})"))?;
            }
        }
        Ok(HyperPriors {
            noise_shape,
            noise_scale,
            mean_locs,
            mean_vars,
            prec_shapes,
            prec_scales,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.mean_locs.len()
    }
}

/// All parameters of the factorized posterior, plus derived caches.
///
/// Per-site-per-class arrays are laid out site-major: entry
/// `[site * n_classes + class]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalState {
    pub n_sites: usize,
    pub n_classes: usize,
    /// Mean of the Gaussian factor on `f_i` conditional on `z_i = k`.
    pub field_mean: Vec<f64>,
    /// Variance of the Gaussian factor on `f_i` conditional on `z_i = k`.
    pub field_var: Vec<f64>,
    /// Class responsibilities per site; each site's row sums to 1.
    pub label_prob: Vec<f64>,
    /// Shape of the gamma factor on the noise precision.
    pub noise_shape: f64,
    /// Scale of the gamma factor on the noise precision.
    pub noise_scale: f64,
    /// Mean of the Gaussian factor on each class mean.
    pub mean_mean: Vec<f64>,
    /// Variance of the Gaussian factor on each class mean.
    pub mean_var: Vec<f64>,
    /// Shape of the gamma factor on each class precision.
    pub prec_shape: Vec<f64>,
    /// Scale of the gamma factor on each class precision.
    pub prec_scale: Vec<f64>,
    /// Cache: marginal posterior mean per site, `sum_k q_ik * field_mean_ik`.
    pub site_mean: Vec<f64>,
    /// Cache: predicted shadowing per measurement, `w_tau . site_mean`.
    pub predicted: Vec<f64>,
}

/// Draws from U(0,1) rejecting an exact zero, so positivity guards hold.
fn positive_unit(rng: &mut ChaCha20Rng) -> f64 {
    loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            return u;
        }
    }
}

impl VariationalState {
    /// Random initialization for a dataset of `data.len()` measurements.
    ///
    /// Draw order (all U(0,1), one deterministic stream): field means
    /// site-major, then the noise scale, then per-class mean variances,
    /// precision shapes, and precision scales. Class responsibilities start
    /// uniform, class mean estimates start at the prior locations, the noise
    /// shape is `prior shape + t/2`, and the field variances are derived by
    /// one variance update from the drawn quantities.
    pub fn init(
        priors: &HyperPriors,
        data: &MeasurementSet,
        rng: &mut ChaCha20Rng,
    ) -> Result<Self> {
        let n = data.n_points();
        let k = priors.n_classes();
        let t = data.len();

        let field_mean: Vec<f64> = (0..n * k).map(|_| positive_unit(rng)).collect();
        let noise_scale = positive_unit(rng);
        let mean_var: Vec<f64> = (0..k).map(|_| positive_unit(rng)).collect();
        let prec_shape: Vec<f64> = (0..k).map(|_| positive_unit(rng)).collect();
        let prec_scale: Vec<f64> = (0..k).map(|_| positive_unit(rng)).collect();

        let noise_shape = priors.noise_shape + t as f64 / 2.0;
        let noise_prec = noise_shape * noise_scale;
        let wsq = data.weights().row_sq_sums();
        let mut field_var = vec![0.0; n * k];
        for i in 0..n {
            for c in 0..k {
                let class_prec = prec_shape[c] * prec_scale[c];
                field_var[i * k + c] = 1.0 / (noise_prec * wsq[i] + class_prec);
            }
        }

        let mut state = VariationalState {
            n_sites: n,
            n_classes: k,
            field_mean,
            field_var,
            label_prob: vec![1.0 / k as f64; n * k],
            noise_shape,
            noise_scale,
            mean_mean: priors.mean_locs.clone(),
            mean_var,
            prec_shape,
            prec_scale,
            site_mean: vec![0.0; n],
            predicted: vec![0.0; t],
        };
        state.refresh_site_means();
        state.refresh_predicted(data);
        Ok(state)
    }

    /// Posterior mean of the noise precision.
    pub fn noise_prec_mean(&self) -> f64 {
        self.noise_shape * self.noise_scale
    }

    /// Posterior mean of class `k`'s precision.
    pub fn class_prec_mean(&self, k: usize) -> f64 {
        self.prec_shape[k] * self.prec_scale[k]
    }

    /// Recomputes the marginal site means from responsibilities and field
    /// means.
    pub fn refresh_site_means(&mut self) {
        let k = self.n_classes;
        for i in 0..self.n_sites {
            let mut m = 0.0;
            for c in 0..k {
                m += self.label_prob[i * k + c] * self.field_mean[i * k + c];
            }
            self.site_mean[i] = m;
        }
    }

    /// Recomputes the predicted shadowing from the weight columns.
    pub fn refresh_predicted(&mut self, data: &MeasurementSet) {
        self.predicted.clear();
        for col in data.weights().columns() {
            self.predicted.push(col.dot(&self.site_mean));
        }
    }

    /// Marginal variance of `f_i`: mixture of per-class variances plus the
    /// spread of per-class means around the site mean. Always nonnegative.
    pub fn site_mixture_var(&self, i: usize) -> f64 {
        let k = self.n_classes;
        let mu = self.site_mean[i];
        let mut v = 0.0;
        for c in 0..k {
            let d = self.field_mean[i * k + c] - mu;
            v += self.label_prob[i * k + c] * (self.field_var[i * k + c] + d * d);
        }
        v
    }

    /// Posterior expectation of the summed squared residuals,
    /// `sum_tau E[(s_tau - w_tau . f)^2]`, using the current caches.
    pub fn expected_residual_sq(&self, data: &MeasurementSet) -> f64 {
        let v: Vec<f64> = (0..self.n_sites).map(|i| self.site_mixture_var(i)).collect();
        let mut total = 0.0;
        for (tau, col) in data.weights().columns().enumerate() {
            let r = data.shadowing()[tau] - self.predicted[tau];
            total += r * r + col.map_sum(|i, w| w * w * v[i]);
        }
        total
    }

    /// Most probable class per site; ties resolve to the lowest class index.
    pub fn map_labels(&self) -> Vec<usize> {
        let k = self.n_classes;
        (0..self.n_sites)
            .map(|i| {
                let row = &self.label_prob[i * k..(i + 1) * k];
                let mut best = 0;
                for (c, &p) in row.iter().enumerate() {
                    if p > row[best] {
                        best = c;
                    }
                }
                best
            })
            .collect()
    }

    /// Checks the structural invariants: row-stochastic responsibilities,
    /// positive variances and gamma parameters, caches consistent with their
    /// definitions. Intended for tests and checkpoint loading.
    pub fn validate(&self, data: &MeasurementSet, tol: f64) -> Result<()> {
        let k = self.n_classes;
        if self.field_mean.len() != self.n_sites * k
            || self.field_var.len() != self.n_sites * k
            || self.label_prob.len() != self.n_sites * k
        {
            return Err(Error::CorruptState("per-site array length".into()));
        }
        for i in 0..self.n_sites {
            let row = &self.label_prob[i * k..(i + 1) * k];
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > tol || row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(Error::CorruptState(format!(
                    "responsibilities of site {i} are not a distribution (sum {sum})"
                )));
            }
        }
        let all_positive = |vals: &[f64], what: &str| -> Result<()> {
            if vals.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
                return Err(Error::CorruptState(format!("{what} must stay positive")));
            }
            Ok(())
        };
        all_positive(&self.field_var, "field variances")?;
        all_positive(&self.mean_var, "class mean variances")?;
        all_positive(&self.prec_shape, "class precision shapes")?;
        all_positive(&self.prec_scale, "class precision scales")?;
        all_positive(&[self.noise_shape, self.noise_scale], "noise parameters")?;

        let mut check = self.clone();
        check.refresh_site_means();
        check.refresh_predicted(data);
        for (a, b) in self.site_mean.iter().zip(&check.site_mean) {
            if (a - b).abs() > tol {
                return Err(Error::CorruptState("stale site mean cache".into()));
            }
        }
        for (a, b) in self.predicted.iter().zip(&check.predicted) {
            if (a - b).abs() > tol {
                return Err(Error::CorruptState("stale predicted shadowing cache".into()));
            }
        }
        Ok(())
    }
}

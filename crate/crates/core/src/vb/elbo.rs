//! Evidence lower bound of the factorized posterior.
//!
//! The bound decomposes into the expected log-likelihood of the shadowing
//! data, the expected log-priors of field, labels, and hyperparameters, and
//! the factor entropies. The intractable Potts normalizer is a constant in
//! the variational parameters and is dropped, so reported values are offset
//! from the true bound by that constant; differences across iterations are
//! unaffected, which is what convergence checks and monotonicity audits use.

use statrs::function::gamma::{digamma, ln_gamma};

use crate::vb::state::VariationalState;
use crate::vb::updates::VbModel;

const LN_2PI: f64 = 1.8378770664093453;

/// Entropy of a gamma distribution in shape–scale form.
fn gamma_entropy(shape: f64, scale: f64) -> f64 {
    shape + scale.ln() + ln_gamma(shape) + (1.0 - shape) * digamma(shape)
}

/// Expectation of a gamma log-density `ln G(phi; shape0, scale0)` under
/// `phi ~ G(shape, scale)`.
fn gamma_cross(shape: f64, scale: f64, shape0: f64, scale0: f64) -> f64 {
    -ln_gamma(shape0) - shape0 * scale0.ln() + (shape0 - 1.0) * (digamma(shape) + scale.ln())
        - shape * scale / scale0
}

/// Expectation of a Gaussian log-density `ln N(x; m0, var0)` under
/// `x ~ N(mean, var)`.
fn gaussian_cross(mean: f64, var: f64, m0: f64, var0: f64) -> f64 {
    let d = mean - m0;
    -0.5 * (LN_2PI + var0.ln()) - 0.5 * (var + d * d) / var0
}

/// Additive decomposition of the bound; `total` sums the parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElboTerms {
    /// Expected log-likelihood of the measurements.
    pub data: f64,
    /// Expected conditionally Gaussian log-prior of the field values.
    pub field_prior: f64,
    /// Spatial coupling reward (Potts log-prior without its normalizer).
    pub potts: f64,
    /// Expected log-prior of the noise precision.
    pub noise_prior: f64,
    /// Expected log-prior of the class means.
    pub mean_prior: f64,
    /// Expected log-prior of the class precisions.
    pub prec_prior: f64,
    /// Entropy of the conditional field factors.
    pub field_entropy: f64,
    /// Entropy of the label responsibilities.
    pub label_entropy: f64,
    /// Entropy of the noise precision factor.
    pub noise_entropy: f64,
    /// Entropy of the class mean factors.
    pub mean_entropy: f64,
    /// Entropy of the class precision factors.
    pub prec_entropy: f64,
}

impl ElboTerms {
    pub fn total(&self) -> f64 {
        self.data
            + self.field_prior
            + self.potts
            + self.noise_prior
            + self.mean_prior
            + self.prec_prior
            + self.field_entropy
            + self.label_entropy
            + self.noise_entropy
            + self.mean_entropy
            + self.prec_entropy
    }
}

/// Evaluates every term of the bound at the current state.
///
/// Requires the state's caches to be fresh (they are after any update step).
pub fn elbo_terms(model: &VbModel<'_>, st: &VariationalState) -> ElboTerms {
    let n = st.n_sites;
    let k = st.n_classes;
    let t = model.data.len() as f64;
    let priors = model.priors;

    let log_noise_prec = digamma(st.noise_shape) + st.noise_scale.ln();
    let data = 0.5 * t * (log_noise_prec - LN_2PI)
        - 0.5 * st.noise_prec_mean() * st.expected_residual_sq(model.data);

    let class_prec: Vec<f64> = (0..k).map(|c| st.class_prec_mean(c)).collect();
    let log_class_prec: Vec<f64> = (0..k)
        .map(|c| digamma(st.prec_shape[c]) + st.prec_scale[c].ln())
        .collect();

    let mut field_prior = 0.0;
    let mut field_entropy = 0.0;
    let mut label_entropy = 0.0;
    for i in 0..n {
        for c in 0..k {
            let q = st.label_prob[i * k + c];
            if q > 0.0 {
                let dm = st.field_mean[i * k + c] - st.mean_mean[c];
                let dev = st.field_var[i * k + c] + dm * dm + st.mean_var[c];
                field_prior += q * 0.5 * (log_class_prec[c] - LN_2PI - class_prec[c] * dev);
                field_entropy += q * 0.5 * (LN_2PI + 1.0 + st.field_var[i * k + c].ln());
                label_entropy -= q * q.ln();
            }
        }
    }

    let mut potts = 0.0;
    // Each unordered neighbor pair contributes once.
    for i in 0..n {
        for &j in model.adj.of(i) {
            if j > i {
                for c in 0..k {
                    potts += st.label_prob[i * k + c] * st.label_prob[j * k + c];
                }
            }
        }
    }
    potts *= model.potts.beta;

    let noise_prior = gamma_cross(
        st.noise_shape,
        st.noise_scale,
        priors.noise_shape,
        priors.noise_scale,
    );
    let noise_entropy = gamma_entropy(st.noise_shape, st.noise_scale);

    let mut mean_prior = 0.0;
    let mut mean_entropy = 0.0;
    let mut prec_prior = 0.0;
    let mut prec_entropy = 0.0;
    for c in 0..k {
        mean_prior += gaussian_cross(
            st.mean_mean[c],
            st.mean_var[c],
            priors.mean_locs[c],
            priors.mean_vars[c],
        );
        mean_entropy += 0.5 * (LN_2PI + 1.0 + st.mean_var[c].ln());
        prec_prior += gamma_cross(
            st.prec_shape[c],
            st.prec_scale[c],
            priors.prec_shapes[c],
            priors.prec_scales[c],
        );
        prec_entropy += gamma_entropy(st.prec_shape[c], st.prec_scale[c]);
    }

    ElboTerms {
        data,
        field_prior,
        potts,
        noise_prior,
        mean_prior,
        prec_prior,
        field_entropy,
        label_entropy,
        noise_entropy,
        mean_entropy,
        prec_entropy,
    }
}

/// Total bound value at the current state.
pub fn compute_elbo(model: &VbModel<'_>, st: &VariationalState) -> f64 {
    elbo_terms(model, st).total()
}

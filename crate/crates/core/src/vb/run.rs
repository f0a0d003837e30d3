//! Outer loop of the variational reconstruction.
//!
//! Each iteration applies the full update cycle and records the bound. The
//! loop stops when the bound's improvement drops to the tolerance or the
//! iteration cap is reached; a non-finite bound aborts with a divergence
//! error carrying the iteration index. Point estimates are read off the
//! final state: most-probable labels, the conditional field mean at those
//! labels, and the posterior means of the hyperparameters.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::geometry::Grid;
use crate::synthesis::{HyperParams, LabelField, LossField, MeasurementSet, PottsParams};
use crate::vb::elbo::compute_elbo;
use crate::vb::state::{HyperPriors, VariationalState};
use crate::vb::updates::VbModel;

/// Stopping rule and initialization seed for the outer loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VbSettings {
    /// Cap on the total number of update cycles.
    pub max_iters: usize,
    /// Stop once the bound improves by no more than this.
    pub tol: f64,
    /// Seed for the random initialization.
    pub seed: u64,
}

impl Default for VbSettings {
    fn default() -> Self {
        VbSettings {
            max_iters: 3000,
            tol: 1e-6,
            seed: 0,
        }
    }
}

/// Point estimates extracted from a converged (or stopped) state.
#[derive(Debug, Clone, PartialEq)]
pub struct VbEstimates {
    /// Most probable class per site (ties to the lowest class index).
    pub labels: LabelField,
    /// Conditional posterior mean of the loss at the estimated labels.
    pub field: LossField,
    /// Posterior means of noise precision, class means, class precisions.
    pub theta: HyperParams,
}

/// Outcome of a reconstruction run.
#[derive(Debug, Clone, PartialEq)]
pub struct VbRun {
    pub state: VariationalState,
    /// Bound values: entry 0 is the initial state, entry `l` is after cycle `l`.
    pub elbo_trace: Vec<f64>,
    /// Whether the tolerance criterion (rather than the cap) ended the run.
    pub converged: bool,
    pub estimates: VbEstimates,
}

impl VbRun {
    /// Number of update cycles performed.
    pub fn iterations(&self) -> usize {
        self.elbo_trace.len() - 1
    }
}

/// Runs the reconstruction from a fresh random initialization.
pub fn run_vb(
    data: &MeasurementSet,
    priors: &HyperPriors,
    potts: &PottsParams,
    grid: &Grid,
    settings: &VbSettings,
) -> Result<VbRun> {
    let adj = grid.adjacency();
    let model = VbModel::new(data, priors, potts, &adj)?;
    let mut rng = ChaCha20Rng::seed_from_u64(settings.seed);
    let state = VariationalState::init(priors, data, &mut rng)?;
    drive(&model, state, Vec::new(), settings)
}

/// Resumes the reconstruction from a saved state and bound trace.
///
/// The cap counts total cycles including those already in the trace, so a
/// checkpoint that already satisfies the stopping rule returns unchanged.
pub fn resume_vb(
    data: &MeasurementSet,
    priors: &HyperPriors,
    potts: &PottsParams,
    grid: &Grid,
    state: VariationalState,
    elbo_trace: Vec<f64>,
    settings: &VbSettings,
) -> Result<VbRun> {
    let adj = grid.adjacency();
    let model = VbModel::new(data, priors, potts, &adj)?;
    drive(&model, state, elbo_trace, settings)
}

fn drive(
    model: &VbModel<'_>,
    mut state: VariationalState,
    mut trace: Vec<f64>,
    settings: &VbSettings,
) -> Result<VbRun> {
    if trace.is_empty() {
        let e0 = compute_elbo(model, &state);
        if !e0.is_finite() {
            return Err(Error::Divergence {
                iteration: 0,
                message: format!("initial bound is {e0}"),
            });
        }
        trace.push(e0);
    }
    let improvement =
        |trace: &[f64]| -> f64 { trace[trace.len() - 1] - trace[trace.len() - 2] };
    let mut converged = trace.len() >= 2 && improvement(&trace) <= settings.tol;

    while !converged && trace.len() - 1 < settings.max_iters {
        let iteration = trace.len();
        model.iterate(&mut state)?;
        let e = compute_elbo(model, &state);
        if !e.is_finite() {
            return Err(Error::Divergence {
                iteration,
                message: format!("bound became {e}"),
            });
        }
        trace.push(e);
        converged = improvement(&trace) <= settings.tol;
    }

    let estimates = extract_estimates(&state)?;
    Ok(VbRun {
        state,
        elbo_trace: trace,
        converged,
        estimates,
    })
}

/// Point estimates from an arbitrary state.
pub fn extract_estimates(state: &VariationalState) -> Result<VbEstimates> {
    let labels = state.map_labels();
    let field = labels
        .iter()
        .enumerate()
        .map(|(i, &z)| state.field_mean[i * state.n_classes + z])
        .collect();
    let class_precisions = (0..state.n_classes)
        .map(|k| state.class_prec_mean(k))
        .collect();
    Ok(VbEstimates {
        labels: LabelField::new(labels, state.n_classes)?,
        field: LossField::new(field),
        theta: HyperParams::new(
            state.noise_prec_mean(),
            state.mean_mean.clone(),
            class_precisions,
        )?,
    })
}

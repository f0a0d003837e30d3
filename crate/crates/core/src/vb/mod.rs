//! Mean-field variational inference over the hidden-label loss field model.
//!
//! `state` holds the factor parameters and priors, `updates` the coordinate
//! ascent steps, `elbo` the evidence lower bound, `run` the outer loop with
//! point-estimate extraction, and `checkpoint` the on-disk state format.

pub mod checkpoint;
pub mod elbo;
pub mod run;
pub mod state;
pub mod updates;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use elbo::{compute_elbo, elbo_terms, ElboTerms};
pub use run::{extract_estimates, resume_vb, run_vb, VbEstimates, VbRun, VbSettings};
pub use state::{HyperPriors, VariationalState};
pub use updates::VbModel;

//! Reconstruction quality metrics and coverage-map rendering.
//!
//! Field accuracy is measured in the shadowing domain: random boundary pairs
//! are drawn on the scene perimeter and the normalized mean squared error is
//! computed between the shadowing each field predicts for those pairs. Label
//! accuracy is the plain mismatch fraction. A gain map renders the mean
//! received gain from every grid point to a fixed receiver under a calibrated
//! pathloss model. The Monte-Carlo harness repeats a seeded experiment,
//! collecting successes and recording failures without aborting the batch.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::geometry::{Grid, Point, Scene, WeightVector};
use crate::seeds::derive_seed;
use crate::synthesis::PathlossParams;

/// Fraction of sites whose estimated label differs from the truth.
pub fn labeling_error(estimate: &[usize], truth: &[usize]) -> Result<f64> {
    if estimate.len() != truth.len() {
        return Err(Error::dims(truth.len(), estimate.len(), "label count"));
    }
    if truth.is_empty() {
        return Err(Error::InvalidConfig(
            "labeling error needs at least one site".into(),
        ));
    }
    let mismatches = estimate
        .iter()
        .zip(truth)
        .filter(|(a, b)| a != b)
        .count();
    Ok(mismatches as f64 / truth.len() as f64)
}

/// Shadowing a loss field induces between two arbitrary points: the
/// ellipse-weighted line integral used by the measurement model.
pub fn shadow_between(
    grid: &Grid,
    lambda: f64,
    field: &[f64],
    tx: &Point,
    rx: &Point,
) -> Result<f64> {
    if field.len() != grid.n_points() {
        return Err(Error::dims(grid.n_points(), field.len(), "field length"));
    }
    let w = WeightVector::from_link(grid, tx, rx, lambda)?;
    Ok(w.dot(field))
}

/// Normalized mean squared error between the shadowing two fields predict
/// for `n_pairs` independent uniform boundary pairs.
///
/// Both fields are evaluated on the same seeded pairs, so identical fields
/// score exactly 0 and an all-zero estimate scores exactly 1.
pub fn nmse(
    scene: &Scene,
    truth: &[f64],
    estimate: &[f64],
    n_pairs: usize,
    seed: u64,
) -> Result<f64> {
    if truth.len() != scene.grid.n_points() {
        return Err(Error::dims(scene.grid.n_points(), truth.len(), "truth length"));
    }
    if estimate.len() != scene.grid.n_points() {
        return Err(Error::dims(
            scene.grid.n_points(),
            estimate.len(),
            "estimate length",
        ));
    }
    if n_pairs == 0 {
        return Err(Error::InvalidConfig("need at least one evaluation pair".into()));
    }
    let area = scene.grid.area();
    let perimeter = area.perimeter();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut num = 0.0;
    let mut den = 0.0;
    for _ in 0..n_pairs {
        let tx = area.boundary_point(rng.gen::<f64>() * perimeter);
        let rx = loop {
            let p = area.boundary_point(rng.gen::<f64>() * perimeter);
            if p != tx {
                break p;
            }
        };
        let w = WeightVector::from_link(&scene.grid, &tx, &rx, scene.lambda)?;
        let s_true = w.dot(truth);
        let s_est = w.dot(estimate);
        num += (s_est - s_true) * (s_est - s_true);
        den += s_true * s_true;
    }
    if den == 0.0 {
        return Err(Error::ZeroDenominator(
            "reference field predicts zero shadowing on every evaluation pair".into(),
        ));
    }
    Ok(num / den)
}

/// Mean received gain from every grid point to a fixed receiver.
///
/// Entries are `None` exactly where the transmitter position coincides with
/// the receiver (zero distance has no defined pathloss).
#[derive(Debug, Clone, PartialEq)]
pub struct GainMap {
    pub nx: usize,
    pub ny: usize,
    pub receiver: Point,
    pub values: Vec<Option<f64>>,
}

impl GainMap {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Renders the gain map `g(x) = g0 - 10 gamma log10 d(x, rx) - s(x, rx)`
/// for a transmitter at each grid point.
pub fn build_gain_map(
    grid: &Grid,
    lambda: f64,
    field: &[f64],
    pathloss: &PathlossParams,
    receiver: &Point,
) -> Result<GainMap> {
    if field.len() != grid.n_points() {
        return Err(Error::dims(grid.n_points(), field.len(), "field length"));
    }
    let mut values = Vec::with_capacity(grid.n_points());
    for i in 0..grid.n_points() {
        let tx = grid.point(i);
        let d = tx.distance(receiver);
        if d == 0.0 {
            values.push(None);
            continue;
        }
        let s = shadow_between(grid, lambda, field, &tx, receiver)?;
        values.push(Some(pathloss.mean_gain_db(d) - s));
    }
    Ok(GainMap {
        nx: grid.nx,
        ny: grid.ny,
        receiver: *receiver,
        values,
    })
}

/// Mean and sample standard deviation (zero for fewer than two values).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, 0.0);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        / (values.len() - 1) as f64;
    (mean, var.sqrt())
}

/// Column-wise mean and standard deviation over equal-length rows.
pub fn summarize_columns(rows: &[Vec<f64>]) -> Result<Vec<(f64, f64)>> {
    let Some(first) = rows.first() else {
        return Err(Error::InvalidConfig("no rows to summarize".into()));
    };
    let width = first.len();
    for row in rows {
        if row.len() != width {
            return Err(Error::dims(width, row.len(), "summary row width"));
        }
    }
    Ok((0..width)
        .map(|j| {
            let column: Vec<f64> = rows.iter().map(|row| row[j]).collect();
            mean_std(&column)
        })
        .collect())
}

/// Successful runs and recorded failures of a repeated experiment.
#[derive(Debug)]
pub struct McOutcome<T> {
    /// `(run index, result)` for every run that succeeded.
    pub runs: Vec<(usize, T)>,
    /// `(run index, error)` for every run that failed.
    pub failures: Vec<(usize, Error)>,
}

impl<T> McOutcome<T> {
    /// Results of the successful runs, discarding indices.
    pub fn values(&self) -> Vec<&T> {
        self.runs.iter().map(|(_, v)| v).collect()
    }
}

/// Runs a seeded experiment `n_runs` times with independent derived seeds.
///
/// A failing run is recorded and excluded; it does not abort the batch.
pub fn run_mc<T>(
    n_runs: usize,
    base_seed: u64,
    mut run: impl FnMut(usize, u64) -> Result<T>,
) -> McOutcome<T> {
    let mut outcome = McOutcome {
        runs: Vec::new(),
        failures: Vec::new(),
    };
    for r in 0..n_runs {
        match run(r, derive_seed(base_seed, r as u64)) {
            Ok(v) => outcome.runs.push((r, v)),
            Err(e) => outcome.failures.push((r, e)),
        }
    }
    outcome
}

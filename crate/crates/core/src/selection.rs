//! Adaptive sensor-pair scheduling by expected posterior-entropy reduction.
//!
//! A candidate link's score is the expected reduction of the field
//! posterior's differential entropy if that link were measured, taken under
//! the current label responsibilities:
//! `score(w) = sum_i sum_k q_ik * ln(1 + noise_prec * field_var_ik * w_i^2)`.
//! Scheduling greedily takes the top-scoring batch from a candidate pool.
//! The module also provides exact small-scale oracles for the underlying
//! determinant identities, and the slot loop that alternates reconstruction,
//! scoring, and acquisition.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::geometry::{Grid, Link, Scene, WeightVector};
use crate::seeds::derive_seed;
use crate::synthesis::{uniform_links, LossField, MeasurementSet, PottsParams};
use crate::vb::{run_vb, HyperPriors, VariationalState, VbEstimates, VbSettings};

/// One candidate measurement: the link and its weight column.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolEntry {
    pub link: Link,
    pub weights: WeightVector,
}

/// A scored candidate, remembering its position in the pool.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionScore {
    pub pool_index: usize,
    pub link: Link,
    pub score: f64,
}

/// Expected entropy reduction of measuring `w` under the current posterior.
///
/// The expectation over labels factorizes across sites, so the score is a
/// responsibility-weighted sum of per-site, per-class log terms. Sites
/// outside the link's support contribute zero.
pub fn score_pair(w: &WeightVector, state: &VariationalState) -> f64 {
    let k = state.n_classes;
    let noise_prec = state.noise_prec_mean();
    w.map_sum(|i, wi| {
        let mut s = 0.0;
        for c in 0..k {
            s += state.label_prob[i * k + c]
                * (noise_prec * state.field_var[i * k + c] * wi * wi).ln_1p();
        }
        s
    })
}

/// Scores every pool entry against the current posterior.
pub fn score_pool(pool: &[PoolEntry], state: &VariationalState) -> Vec<SelectionScore> {
    pool.iter()
        .enumerate()
        .map(|(idx, entry)| SelectionScore {
            pool_index: idx,
            link: entry.link,
            score: score_pair(&entry.weights, state),
        })
        .collect()
}

/// Best-first ranking of scored candidates, truncated to `batch`.
///
/// Order: descending score, then ascending `(tx, rx)`, then ascending pool
/// index, so rankings are reproducible even under exact ties.
pub fn rank_by_score(scores: &[SelectionScore], batch: usize) -> Vec<SelectionScore> {
    let mut ranked = scores.to_vec();
    ranked.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.link.cmp(&b.link))
            .then(a.pool_index.cmp(&b.pool_index))
    });
    ranked.truncate(batch);
    ranked
}

/// Selects the `batch` highest-scoring candidates from the pool.
pub fn select_batch(
    pool: &[PoolEntry],
    state: &VariationalState,
    batch: usize,
) -> Result<Vec<SelectionScore>> {
    if pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    if batch > pool.len() {
        return Err(Error::InvalidConfig(format!(
            "batch {batch} exceeds pool size {}",
            pool.len()
        )));
    }
    Ok(rank_by_score(&score_pool(pool, state), batch))
}

/// The two independent evaluation routes of an exact entropy reduction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyReduction {
    /// Log-determinant route.
    pub via_determinant: f64,
    /// Closed-form route exploiting the structure of the covariance.
    pub via_closed_form: f64,
}

/// Exact entropy reduction of measuring `w` at a fixed label configuration:
/// `0.5 * ln det(I + noise_prec * diag(w^2) * Sigma_z)` with
/// `Sigma_z = diag(field_var at each site's own label)`.
///
/// Returns both the dense determinant evaluation and the diagonal shortcut
/// `0.5 * sum_i ln(1 + noise_prec * var_i * w_i^2)`; this operation exists
/// as a validation oracle for the scheduler, so it is meant for small grids.
pub fn entropy_reduction_exact(
    w: &WeightVector,
    labels: &[usize],
    state: &VariationalState,
    noise_prec: f64,
) -> Result<EntropyReduction> {
    let n = state.n_sites;
    if w.dim() != n {
        return Err(Error::dims(n, w.dim(), "weight vector length"));
    }
    if labels.len() != n {
        return Err(Error::dims(n, labels.len(), "label configuration length"));
    }
    if !(noise_prec > 0.0) || !noise_prec.is_finite() {
        return Err(Error::InvalidHyperparameter(format!(
            "noise precision must be positive and finite, got {noise_prec}"
        )));
    }
    let k = state.n_classes;
    let mut var_z = vec![0.0; n];
    for (i, &z) in labels.iter().enumerate() {
        if z >= k {
            return Err(Error::InvalidConfig(format!(
                "label {z} out of range for {k} classes"
            )));
        }
        var_z[i] = state.field_var[i * k + z];
    }
    let dense = w.dense();
    let mut m = DMatrix::<f64>::identity(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] += noise_prec * dense[i] * dense[i] * if i == j { var_z[i] } else { 0.0 };
        }
    }
    let det = m.determinant();
    if !(det > 0.0) {
        return Err(Error::NumericalGuard(format!(
            "entropy-reduction determinant is {det}"
        )));
    }
    let closed = 0.5 * w.map_sum(|i, wi| (noise_prec * var_z[i] * wi * wi).ln_1p());
    Ok(EntropyReduction {
        via_determinant: 0.5 * det.ln(),
        via_closed_form: closed,
    })
}

/// Rank-one determinant identity for a dense field covariance:
/// `ln det(I + noise_prec * Sigma w w^T) = ln(1 + noise_prec * w^T Sigma w)`.
///
/// Returns the dense determinant on the left and the closed form on the
/// right; agreement validates the scheduler's rank-one update argument.
pub fn rank_one_entropy_identity(
    w: &[f64],
    cov: &DMatrix<f64>,
    noise_prec: f64,
) -> Result<EntropyReduction> {
    let n = w.len();
    if cov.nrows() != n || cov.ncols() != n {
        return Err(Error::dims(n, cov.nrows(), "covariance dimension"));
    }
    let wv = DVector::from_column_slice(w);
    let mut m = DMatrix::<f64>::identity(n, n);
    m += (cov * &wv) * wv.transpose() * noise_prec;
    let det = m.determinant();
    if !(det > 0.0) {
        return Err(Error::NumericalGuard(format!(
            "rank-one determinant is {det}"
        )));
    }
    let quad = (wv.transpose() * cov * &wv)[(0, 0)];
    Ok(EntropyReduction {
        via_determinant: det.ln(),
        via_closed_form: (noise_prec * quad).ln_1p(),
    })
}

/// Where new measurements come from during the slot loop.
pub trait MeasurementSource {
    /// Candidate pool for the next slot. May return fewer entries than
    /// requested (or none) when the source is running dry.
    fn draw_pool(&mut self, pool_size: usize) -> Result<Vec<PoolEntry>>;

    /// Shadowing value of entry `pool_index` of the most recent pool.
    /// Acquiring consumes the underlying measurement where that applies.
    fn acquire(&mut self, pool_index: usize) -> Result<f64>;
}

/// Synthesizes measurements on demand from a ground-truth loss field.
///
/// Pools are uniform random sensor pairs drawn with replacement. Each
/// entry's noise is drawn when the pool is formed, keyed to the entry, so a
/// link's measured value does not depend on which entries get selected or in
/// what order they are acquired.
pub struct SyntheticSource<'a> {
    scene: &'a Scene,
    field: &'a LossField,
    noise_sd: f64,
    rng: ChaCha20Rng,
    current: Vec<(PoolEntry, f64)>,
    /// Number of measurements synthesized so far (instrumentation).
    pub synth_count: usize,
}

impl<'a> SyntheticSource<'a> {
    pub fn new(scene: &'a Scene, field: &'a LossField, noise_precision: f64, seed: u64) -> Result<Self> {
        if field.len() != scene.grid.n_points() {
            return Err(Error::dims(
                scene.grid.n_points(),
                field.len(),
                "loss field length",
            ));
        }
        if !(noise_precision > 0.0) || !noise_precision.is_finite() {
            return Err(Error::InvalidHyperparameter(format!(
                "noise precision must be positive and finite, got {noise_precision}"
            )));
        }
        Ok(SyntheticSource {
            scene,
            field,
            noise_sd: 1.0 / noise_precision.sqrt(),
            rng: ChaCha20Rng::seed_from_u64(seed),
            current: Vec::new(),
            synth_count: 0,
        })
    }
}

impl MeasurementSource for SyntheticSource<'_> {
    fn draw_pool(&mut self, pool_size: usize) -> Result<Vec<PoolEntry>> {
        let links = uniform_links(self.scene.sensors.len(), pool_size, &mut self.rng)?;
        self.current.clear();
        for link in links {
            let weights = self.scene.link_weights(&link)?;
            let noise: f64 = rand_distr::Distribution::sample(
                &rand_distr::Normal::new(0.0, self.noise_sd).unwrap(),
                &mut self.rng,
            );
            let value = weights.dot(&self.field.values) + noise;
            self.synth_count += 1;
            self.current.push((PoolEntry { link, weights }, value));
        }
        Ok(self.current.iter().map(|(e, _)| e.clone()).collect())
    }

    fn acquire(&mut self, pool_index: usize) -> Result<f64> {
        self.current
            .get(pool_index)
            .map(|&(_, v)| v)
            .ok_or(Error::EmptyPool)
    }
}

/// Replays a recorded measurement log; never synthesizes anything.
///
/// Pools are sampled without replacement from the not-yet-acquired records;
/// acquiring a record consumes it permanently, while unselected pool entries
/// return to the unused set.
pub struct ReplaySource {
    records: Vec<(Link, WeightVector, f64)>,
    used: Vec<bool>,
    rng: ChaCha20Rng,
    current: Vec<usize>,
}

impl ReplaySource {
    /// Builds from log records, computing each link's weights on the scene.
    pub fn new(scene: &Scene, log: &[(Link, f64)], seed: u64) -> Result<Self> {
        let records = log
            .iter()
            .map(|&(link, value)| Ok((link, scene.link_weights(&link)?, value)))
            .collect::<Result<Vec<_>>>()?;
        let used = vec![false; records.len()];
        Ok(ReplaySource {
            records,
            used,
            rng: ChaCha20Rng::seed_from_u64(seed),
            current: Vec::new(),
        })
    }

    /// Number of records not yet acquired.
    pub fn remaining(&self) -> usize {
        self.used.iter().filter(|&&u| !u).count()
    }
}

impl MeasurementSource for ReplaySource {
    fn draw_pool(&mut self, pool_size: usize) -> Result<Vec<PoolEntry>> {
        let mut available: Vec<usize> = (0..self.records.len())
            .filter(|&r| !self.used[r])
            .collect();
        let take = pool_size.min(available.len());
        // Partial Fisher-Yates: the first `take` positions become the sample.
        for j in 0..take {
            let pick = j + self.rng.gen_range(0..available.len() - j);
            available.swap(j, pick);
        }
        self.current = available[..take].to_vec();
        Ok(self
            .current
            .iter()
            .map(|&r| PoolEntry {
                link: self.records[r].0,
                weights: self.records[r].1.clone(),
            })
            .collect())
    }

    fn acquire(&mut self, pool_index: usize) -> Result<f64> {
        let record = *self.current.get(pool_index).ok_or(Error::EmptyPool)?;
        if self.used[record] {
            return Err(Error::CorruptState(format!(
                "measurement record {record} acquired twice"
            )));
        }
        self.used[record] = true;
        Ok(self.records[record].2)
    }
}

/// How a slot's batch is chosen from the pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionMode {
    /// Highest entropy-reduction scores.
    Adaptive,
    /// Uniform subset, ignoring scores (baseline).
    Random,
}

/// Slot-loop schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveSchedule {
    /// Number of acquisition rounds. The loop reconstructs `slots + 1` times:
    /// once on the initial data and once after each acquisition.
    pub slots: usize,
    pub pool_size: usize,
    pub batch: usize,
    pub mode: SelectionMode,
    /// Base seed; per-slot reconstruction seeds and the random-mode
    /// selection stream derive from it.
    pub seed: u64,
}

impl AdaptiveSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.pool_size == 0 {
            return Err(Error::InvalidConfig("pool size must be positive".into()));
        }
        if self.batch == 0 || self.batch > self.pool_size {
            return Err(Error::InvalidConfig(format!(
                "batch {} must be in 1..={}",
                self.batch, self.pool_size
            )));
        }
        Ok(())
    }
}

/// Reconstruction snapshot and acquisition decisions of one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord {
    pub slot: usize,
    /// Measurements available to this slot's reconstruction.
    pub measurements: usize,
    /// Final bound value of this slot's reconstruction.
    pub elbo: f64,
    pub converged: bool,
    pub estimates: VbEstimates,
    /// Pairs selected for acquisition after this slot (empty for the last).
    pub selected: Vec<Link>,
}

/// Why the slot loop ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdaptiveStatus {
    Completed,
    /// The source ran out of candidates at the given slot.
    PoolExhausted { slot: usize },
}

/// Outcome of the full slot loop.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveRun {
    pub records: Vec<SlotRecord>,
    pub status: AdaptiveStatus,
    /// All measurements accumulated by the end.
    pub data: MeasurementSet,
}

/// Runs the acquisition loop: reconstruct, score, select, acquire, repeat.
///
/// Each slot reconstructs from scratch on the accumulated data with a
/// slot-derived initialization seed. Selected entries are acquired in
/// ascending pool order, so the resulting dataset is independent of the
/// selection ordering; with `batch = pool_size` both modes therefore append
/// the same measurements.
pub fn run_adaptive(
    initial: MeasurementSet,
    priors: &HyperPriors,
    potts: &PottsParams,
    grid: &Grid,
    schedule: &AdaptiveSchedule,
    vb: &VbSettings,
    source: &mut dyn MeasurementSource,
) -> Result<AdaptiveRun> {
    schedule.validate()?;
    let mut data = initial;
    let mut records = Vec::with_capacity(schedule.slots + 1);
    let mut status = AdaptiveStatus::Completed;
    let mut select_rng = ChaCha20Rng::seed_from_u64(derive_seed(schedule.seed, 1));

    for slot in 0..=schedule.slots {
        let settings = VbSettings {
            seed: derive_seed(schedule.seed, 100 + slot as u64),
            ..*vb
        };
        let measurements = data.len();
        let run = run_vb(&data, priors, potts, grid, &settings)?;
        let mut selected = Vec::new();

        if slot < schedule.slots {
            let pool = source.draw_pool(schedule.pool_size)?;
            if pool.is_empty() {
                status = AdaptiveStatus::PoolExhausted { slot };
                records.push(SlotRecord {
                    slot,
                    measurements,
                    elbo: *run.elbo_trace.last().unwrap(),
                    converged: run.converged,
                    estimates: run.estimates,
                    selected,
                });
                break;
            }
            let batch = schedule.batch.min(pool.len());
            let chosen: Vec<usize> = match schedule.mode {
                SelectionMode::Adaptive => select_batch(&pool, &run.state, batch)?
                    .iter()
                    .map(|s| s.pool_index)
                    .collect(),
                SelectionMode::Random => {
                    let mut idx: Vec<usize> = (0..pool.len()).collect();
                    for j in 0..batch {
                        let pick = j + select_rng.gen_range(0..idx.len() - j);
                        idx.swap(j, pick);
                    }
                    idx.truncate(batch);
                    idx
                }
            };
            selected = chosen.iter().map(|&i| pool[i].link).collect();
            let mut order = chosen;
            order.sort_unstable();
            for idx in order {
                let value = source.acquire(idx)?;
                data.append(pool[idx].link, pool[idx].weights.clone(), value)?;
            }
        }

        records.push(SlotRecord {
            slot,
            measurements,
            elbo: *run.elbo_trace.last().unwrap(),
            converged: run.converged,
            estimates: run.estimates,
            selected,
        });
    }

    Ok(AdaptiveRun {
        records,
        status,
        data,
    })
}

//! Synthetic scene generation and measurement calibration.
//!
//! Ground-truth scenes follow a hidden Potts label field on the grid with a
//! conditionally Gaussian loss value per site. Shadowing measurements are the
//! sparse line integrals of the loss field plus centered Gaussian noise. Real
//! deployments instead record raw channel gains; [`calibrate_pathloss`] and
//! [`calibrated_shadowing`] convert those into the same shadowing units.
//!
//! All sampling is driven by explicit seeds through a counter-based RNG, so
//! every artifact is reproducible bit for bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::{Adjacency, Grid, Link, Scene, WeightMatrix, WeightVector};

/// Potts prior parameters: coupling strength and number of classes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PottsParams {
    pub beta: f64,
    pub n_classes: usize,
}

impl PottsParams {
    pub fn new(beta: f64, n_classes: usize) -> Result<Self> {
        if n_classes < 2 {
            return Err(Error::InvalidConfig(format!(
                "Potts model needs at least 2 classes, got {n_classes}"
            )));
        }
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "Potts coupling must be finite and nonnegative, got {beta}"
            )));
        }
        Ok(PottsParams { beta, n_classes })
    }
}

/// Class labels over the grid, one of `n_classes` values per site.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelField {
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

impl LabelField {
    pub fn new(labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&z| z >= n_classes) {
            return Err(Error::InvalidConfig(format!(
                "label {bad} out of range for {n_classes} classes"
            )));
        }
        Ok(LabelField { labels, n_classes })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Fraction of 4-connected neighbor pairs sharing a label.
    pub fn same_label_fraction(&self, grid: &Grid) -> f64 {
        let edges = grid.edges();
        if edges.is_empty() {
            return 0.0;
        }
        let same = edges
            .iter()
            .filter(|&&(i, j)| self.labels[i] == self.labels[j])
            .count();
        same as f64 / edges.len() as f64
    }
}

/// Spatial loss field values, one per grid point (column-major site order).
#[derive(Debug, Clone, PartialEq)]
pub struct LossField {
    pub values: Vec<f64>,
}

impl LossField {
    pub fn new(values: Vec<f64>) -> Self {
        LossField { values }
    }

    pub fn zeros(n: usize) -> Self {
        LossField {
            values: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Ground-truth generative parameters: measurement noise precision plus the
/// per-class loss means and precisions.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HyperParams {
    pub noise_precision: f64,
    pub class_means: Vec<f64>,
    pub class_precisions: Vec<f64>,
}

impl HyperParams {
    pub fn new(
        noise_precision: f64,
        class_means: Vec<f64>,
        class_precisions: Vec<f64>,
    ) -> Result<Self> {
        if class_means.len() != class_precisions.len() {
            return Err(Error::dims(
                class_means.len(),
                class_precisions.len(),
                "class precision count",
            ));
        }
        if class_means.is_empty() {
            return Err(Error::InvalidHyperparameter(
                "at least one class is required".into(),
            ));
        }
        if !(noise_precision > 0.0) || !noise_precision.is_finite() {
            return Err(Error::InvalidHyperparameter(format!(
                "noise precision must be positive and finite, got {noise_precision}"
            )));
        }
        for (k, &m) in class_means.iter().enumerate() {
            if !m.is_finite() {
                return Err(Error::InvalidHyperparameter(format!(
                    "class {k} mean must be finite, got {m}"
                )));
            }
        }
        for (k, &p) in class_precisions.iter().enumerate() {
            if !(p > 0.0) || !p.is_finite() {
                return Err(Error::InvalidHyperparameter(format!(
                    "class {k} precision must be positive and finite, got {p}"
                )));
            }
        }
        Ok(HyperParams {
            noise_precision,
            class_means,
            class_precisions,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.class_means.len()
    }
}

/// Pathloss model `gain = g0 - gamma * 10 * log10(distance) - shadowing`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathlossParams {
    pub g0_db: f64,
    pub gamma: f64,
}

impl PathlossParams {
    pub fn new(g0_db: f64, gamma: f64) -> Result<Self> {
        if !g0_db.is_finite() {
            return Err(Error::InvalidHyperparameter(format!(
                "gain offset must be finite, got {g0_db}"
            )));
        }
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidHyperparameter(format!(
                "pathloss exponent must be finite and nonnegative, got {gamma}"
            )));
        }
        Ok(PathlossParams { g0_db, gamma })
    }

    /// Shadowing-free mean gain at a positive distance.
    pub fn mean_gain_db(&self, distance: f64) -> f64 {
        debug_assert!(distance > 0.0);
        self.g0_db - self.gamma * 10.0 * distance.log10()
    }
}

/// Conditional label distribution of one site given its neighbors' labels:
/// proportional to `exp(beta * same_label_neighbor_count)` per class.
pub fn potts_conditional(
    labels: &LabelField,
    site: usize,
    adj: &Adjacency,
    params: &PottsParams,
) -> Vec<f64> {
    let mut probs = vec![0.0; params.n_classes];
    conditional_into(&labels.labels, site, adj, params, &mut probs);
    probs
}

/// In-place version of the conditional used by the sampler's hot loop.
fn conditional_into(
    labels: &[usize],
    site: usize,
    adj: &Adjacency,
    params: &PottsParams,
    probs: &mut [f64],
) {
    probs.fill(0.0);
    for &j in adj.of(site) {
        probs[labels[j]] += 1.0;
    }
    let max = probs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for p in probs.iter_mut() {
        *p = (params.beta * (*p - max)).exp();
        total += *p;
    }
    for p in probs.iter_mut() {
        *p /= total;
    }
}

/// Gibbs sampler over Potts label fields with deterministic seeding.
///
/// The chain starts from an independent uniform label draw and advances by
/// raster-scan sweeps (site `0..n` in index order, one conditional draw each).
pub struct PottsSampler {
    labels: Vec<usize>,
    adj: Adjacency,
    params: PottsParams,
    rng: ChaCha20Rng,
    buf: Vec<f64>,
}

impl PottsSampler {
    pub fn new(grid: &Grid, params: PottsParams, seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let labels = (0..grid.n_points())
            .map(|_| rng.gen_range(0..params.n_classes))
            .collect();
        PottsSampler {
            labels,
            adj: grid.adjacency(),
            params,
            rng,
            buf: vec![0.0; params.n_classes],
        }
    }

    /// One full raster-scan sweep over all sites.
    pub fn sweep(&mut self) {
        for site in 0..self.labels.len() {
            conditional_into(&self.labels, site, &self.adj, &self.params, &mut self.buf);
            let u: f64 = self.rng.gen();
            let mut acc = 0.0;
            let mut drawn = self.params.n_classes - 1;
            for (k, &p) in self.buf.iter().enumerate() {
                acc += p;
                if u < acc {
                    drawn = k;
                    break;
                }
            }
            self.labels[site] = drawn;
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Consumes the sampler, returning the current state as a field.
    pub fn into_field(self) -> LabelField {
        LabelField {
            labels: self.labels,
            n_classes: self.params.n_classes,
        }
    }
}

/// Draws a label field by running the Gibbs chain for `sweeps` sweeps.
pub fn sample_potts(grid: &Grid, params: &PottsParams, sweeps: usize, seed: u64) -> LabelField {
    let mut sampler = PottsSampler::new(grid, *params, seed);
    for _ in 0..sweeps {
        sampler.sweep();
    }
    sampler.into_field()
}

/// Draws a loss field given labels: site `i` gets an independent draw from
/// `N(mean[z_i], 1/precision[z_i])`.
pub fn sample_slf(labels: &LabelField, hp: &HyperParams, seed: u64) -> Result<LossField> {
    if labels.n_classes != hp.n_classes() {
        return Err(Error::dims(
            hp.n_classes(),
            labels.n_classes,
            "label class count",
        ));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let values = labels
        .labels
        .iter()
        .map(|&z| {
            let sd = 1.0 / hp.class_precisions[z].sqrt();
            Normal::new(hp.class_means[z], sd).unwrap().sample(&mut rng)
        })
        .collect();
    Ok(LossField { values })
}

/// Shadowing measurements with their link bookkeeping and weight columns.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    shadowing: Vec<f64>,
    links: Vec<Link>,
    weights: WeightMatrix,
}

impl MeasurementSet {
    pub fn new(n_points: usize) -> Self {
        MeasurementSet {
            shadowing: Vec::new(),
            links: Vec::new(),
            weights: WeightMatrix::new(n_points),
        }
    }

    /// Appends one measurement; the weight column must match the grid size.
    pub fn append(&mut self, link: Link, weights: WeightVector, shadowing: f64) -> Result<()> {
        self.weights.append_column(weights)?;
        self.links.push(link);
        self.shadowing.push(shadowing);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.shadowing.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shadowing.is_empty()
    }

    pub fn n_points(&self) -> usize {
        self.weights.n_points()
    }

    pub fn shadowing(&self) -> &[f64] {
        &self.shadowing
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn weights(&self) -> &WeightMatrix {
        &self.weights
    }
}

/// Synthesizes measurements for the given links: the weighted line integral
/// of the loss field plus `N(0, 1/noise_precision)` noise per link.
pub fn synthesize_measurements(
    scene: &Scene,
    field: &LossField,
    links: &[Link],
    noise_precision: f64,
    seed: u64,
) -> Result<MeasurementSet> {
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
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0 / noise_precision.sqrt()).unwrap();
    let mut set = MeasurementSet::new(scene.grid.n_points());
    for link in links {
        let w = scene.link_weights(link)?;
        let s = w.dot(&field.values) + noise.sample(&mut rng);
        set.append(*link, w, s)?;
    }
    Ok(set)
}

/// Uniformly random sensor pairs (canonicalized `tx < rx`), drawn with
/// replacement so repeated pairs are possible.
pub fn uniform_links(n_sensors: usize, count: usize, rng: &mut ChaCha20Rng) -> Result<Vec<Link>> {
    if n_sensors < 2 {
        return Err(Error::InvalidConfig(format!(
            "need at least 2 sensors to form links, got {n_sensors}"
        )));
    }
    let mut links = Vec::with_capacity(count);
    for _ in 0..count {
        let a = rng.gen_range(0..n_sensors);
        let mut b = rng.gen_range(0..n_sensors - 1);
        if b >= a {
            b += 1;
        }
        links.push(Link {
            tx: a.min(b),
            rx: a.max(b),
        });
    }
    Ok(links)
}

/// Least-squares fit of `(g0, gamma)` from (distance, gain) samples.
///
/// Requires at least two samples at distinct distances; every distance must
/// be positive.
pub fn calibrate_pathloss(samples: &[(f64, f64)]) -> Result<PathlossParams> {
    if samples.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "pathloss calibration needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    let mut xs = Vec::with_capacity(samples.len());
    for &(d, _) in samples {
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "calibration distance must be positive and finite, got {d}"
            )));
        }
        xs.push(10.0 * d.log10());
    }
    let n = samples.len() as f64;
    let x_mean = xs.iter().sum::<f64>() / n;
    let g_mean = samples.iter().map(|&(_, g)| g).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxg = 0.0;
    for (x, &(_, g)) in xs.iter().zip(samples) {
        sxx += (x - x_mean) * (x - x_mean);
        sxg += (x - x_mean) * (g - g_mean);
    }
    if sxx == 0.0 {
        return Err(Error::SingularSystem(
            "all calibration samples share one distance".into(),
        ));
    }
    let gamma = -sxg / sxx;
    let g0 = g_mean + gamma * x_mean;
    PathlossParams::new(g0, gamma)
}

/// Shadowing implied by a raw gain measurement under a pathloss model:
/// `g0 - gamma * 10 * log10(distance) - gain`.
pub fn calibrated_shadowing(gain_db: f64, distance: f64, pl: &PathlossParams) -> Result<f64> {
    if !(distance > 0.0) || !distance.is_finite() {
        return Err(Error::InvalidLink(format!(
            "link distance must be positive and finite, got {distance}"
        )));
    }
    Ok(pl.mean_gain_db(distance) - gain_db)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SensorSet;
    use approx::assert_relative_eq;

    fn unit_grid(n: usize) -> Grid {
        Grid::new(n, n, 1.0, 1.0).unwrap()
    }

    #[test]
    fn conditional_with_unanimous_neighbors_matches_closed_form() {
        let grid = unit_grid(3);
        let adj = grid.adjacency();
        let params = PottsParams::new(1.5, 2).unwrap();
        // Center site of a 3x3 grid has 4 neighbors, all labeled 0.
        let labels = LabelField::new(vec![0; 9], 2).unwrap();
        let probs = potts_conditional(&labels, 4, &adj, &params);
        let expected = 6.0_f64.exp() / (6.0_f64.exp() + 1.0);
        assert_relative_eq!(probs[0], expected, max_relative = 1e-12);
        assert_relative_eq!(probs[0], 0.99753, max_relative = 1e-4);
        assert_relative_eq!(probs[0] + probs[1], 1.0, max_relative = 1e-12);
    }

    #[test]
    fn conditional_at_zero_coupling_is_uniform() {
        let grid = unit_grid(3);
        let adj = grid.adjacency();
        let params = PottsParams::new(0.0, 4).unwrap();
        let labels = LabelField::new(vec![1; 9], 4).unwrap();
        let probs = potts_conditional(&labels, 4, &adj, &params);
        for p in probs {
            assert_eq!(p, 0.25);
        }
    }

    #[test]
    fn conditional_is_monotone_in_neighbor_agreement() {
        let grid = unit_grid(3);
        let adj = grid.adjacency();
        let params = PottsParams::new(0.8, 3).unwrap();
        // Neighbors of the center: sites 1, 3, 5, 7.
        let mut labels = vec![2; 9];
        labels[1] = 0;
        labels[3] = 0;
        labels[5] = 1;
        labels[7] = 2;
        let probs = potts_conditional(&LabelField::new(labels, 3).unwrap(), 4, &adj, &params);
        assert!(probs[0] > probs[1]);
        assert_eq!(probs[1], probs[2]);
    }

    #[test]
    fn potts_sampling_is_deterministic_per_seed() {
        let grid = unit_grid(8);
        let params = PottsParams::new(0.9, 3).unwrap();
        let a = sample_potts(&grid, &params, 50, 11);
        let b = sample_potts(&grid, &params, 50, 11);
        let c = sample_potts(&grid, &params, 50, 12);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn supercritical_coupling_produces_clustered_labels() {
        let grid = unit_grid(60);
        let params = PottsParams::new(1.5, 4).unwrap();
        let field = sample_potts(&grid, &params, 500, 3);
        assert!(field.same_label_fraction(&grid) > 0.8);
    }

    #[test]
    fn loss_field_draws_follow_class_moments() {
        let grid = unit_grid(50);
        let labels = LabelField::new(
            (0..grid.n_points()).map(|i| i % 2).collect(),
            2,
        )
        .unwrap();
        let hp = HyperParams::new(20.0, vec![0.0, 5.5], vec![10.0, 2.0]).unwrap();
        let f = sample_slf(&labels, &hp, 21).unwrap();
        let mut sums = [0.0; 2];
        let mut sqs = [0.0; 2];
        let mut counts = [0usize; 2];
        for (z, v) in labels.labels.iter().zip(&f.values) {
            sums[*z] += v;
            sqs[*z] += v * v;
            counts[*z] += 1;
        }
        for k in 0..2 {
            let n = counts[k] as f64;
            let mean = sums[k] / n;
            let var = sqs[k] / n - mean * mean;
            assert_relative_eq!(mean, hp.class_means[k], epsilon = 0.1);
            assert_relative_eq!(var, 1.0 / hp.class_precisions[k], max_relative = 0.15);
        }
        assert_eq!(f, sample_slf(&labels, &hp, 21).unwrap());
    }

    #[test]
    fn class_count_mismatch_is_rejected() {
        let labels = LabelField::new(vec![0, 1, 2], 3).unwrap();
        let hp = HyperParams::new(1.0, vec![0.0, 1.0], vec![1.0, 1.0]).unwrap();
        assert!(matches!(
            sample_slf(&labels, &hp, 0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    fn small_scene() -> Scene {
        let grid = unit_grid(4);
        let sensors = SensorSet::on_boundary(&grid.area(), 12);
        Scene::new(grid, sensors, 0.39).unwrap()
    }

    #[test]
    fn zero_field_measurements_are_pure_noise() {
        let scene = small_scene();
        let field = LossField::zeros(scene.grid.n_points());
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let links = uniform_links(scene.sensors.len(), 4000, &mut rng).unwrap();
        let set = synthesize_measurements(&scene, &field, &links, 20.0, 17).unwrap();
        let n = set.len() as f64;
        let mean = set.shadowing().iter().sum::<f64>() / n;
        let var = set.shadowing().iter().map(|s| s * s).sum::<f64>() / n - mean * mean;
        // Noise is centered with variance 1/20; allow ~4 standard errors.
        assert!(mean.abs() < 4.0 * (0.05_f64 / n).sqrt());
        assert_relative_eq!(var, 0.05, max_relative = 0.15);
    }

    #[test]
    fn vanishing_noise_recovers_exact_line_integrals() {
        let scene = small_scene();
        let field = LossField::new((0..scene.grid.n_points()).map(|i| i as f64 * 0.1).collect());
        let links = vec![Link::new(0, 6).unwrap(), Link::new(2, 9).unwrap()];
        let set = synthesize_measurements(&scene, &field, &links, 1e18, 3).unwrap();
        for (tau, link) in links.iter().enumerate() {
            let w = scene.link_weights(link).unwrap();
            assert_relative_eq!(
                set.shadowing()[tau],
                w.dot(&field.values),
                epsilon = 1e-6
            );
        }
    }

    #[test]
    fn synthesis_is_deterministic_per_seed() {
        let scene = small_scene();
        let field = LossField::new(vec![1.0; scene.grid.n_points()]);
        let links = vec![Link::new(0, 3).unwrap(), Link::new(1, 7).unwrap()];
        let a = synthesize_measurements(&scene, &field, &links, 20.0, 9).unwrap();
        let b = synthesize_measurements(&scene, &field, &links, 20.0, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn uniform_links_are_canonical_and_in_range() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let links = uniform_links(10, 500, &mut rng).unwrap();
        assert_eq!(links.len(), 500);
        for l in &links {
            assert!(l.tx < l.rx && l.rx < 10);
        }
        assert!(uniform_links(1, 3, &mut rng).is_err());
    }

    #[test]
    fn noiseless_pathloss_fit_is_exact() {
        let truth = PathlossParams::new(54.6, 0.276).unwrap();
        let samples: Vec<(f64, f64)> = [1.0, 2.0, 5.0, 10.0, 20.0]
            .iter()
            .map(|&d| (d, truth.mean_gain_db(d)))
            .collect();
        let fit = calibrate_pathloss(&samples).unwrap();
        assert_relative_eq!(fit.g0_db, 54.6, max_relative = 1e-12);
        assert_relative_eq!(fit.gamma, 0.276, max_relative = 1e-10);
    }

    #[test]
    fn constant_gains_give_zero_exponent_exactly() {
        let fit = calibrate_pathloss(&[(1.0, 40.0), (10.0, 40.0), (100.0, 40.0)]).unwrap();
        assert_eq!(fit.gamma, 0.0);
        assert_eq!(fit.g0_db, 40.0);
    }

    #[test]
    fn degenerate_calibration_inputs_are_rejected() {
        assert!(matches!(
            calibrate_pathloss(&[(5.0, 40.0), (5.0, 41.0)]),
            Err(Error::SingularSystem(_))
        ));
        assert!(calibrate_pathloss(&[(5.0, 40.0)]).is_err());
        assert!(calibrate_pathloss(&[(0.0, 40.0), (5.0, 41.0)]).is_err());
    }

    #[test]
    fn noisy_fit_beats_nearby_parameter_pairs() {
        let truth = PathlossParams::new(54.6, 0.276).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(23);
        let noise = Normal::new(0.0, 0.5).unwrap();
        let samples: Vec<(f64, f64)> = (1..40)
            .map(|j| {
                let d = j as f64;
                (d, truth.mean_gain_db(d) + noise.sample(&mut rng))
            })
            .collect();
        let fit = calibrate_pathloss(&samples).unwrap();
        let residual = |g0: f64, gamma: f64| -> f64 {
            samples
                .iter()
                .map(|&(d, g)| {
                    let pred = g0 - gamma * 10.0 * d.log10();
                    (g - pred) * (g - pred)
                })
                .sum()
        };
        let best = residual(fit.g0_db, fit.gamma);
        for dg0 in -2..=2 {
            for dgam in -2..=2 {
                let g0 = fit.g0_db + dg0 as f64 * 0.05;
                let gamma = fit.gamma + dgam as f64 * 0.01;
                assert!(best <= residual(g0, gamma) + 1e-12);
            }
        }
    }

    #[test]
    fn shadowing_calibration_matches_hand_computation() {
        let pl = PathlossParams::new(54.6, 0.276).unwrap();
        let s = calibrated_shadowing(51.0, 10.0, &pl).unwrap();
        assert_relative_eq!(s, 0.84, max_relative = 1e-12);
        assert!(calibrated_shadowing(51.0, 0.0, &pl).is_err());
    }

    #[test]
    fn gain_synthesis_and_calibration_are_inverse() {
        let pl = PathlossParams::new(54.6, 0.276).unwrap();
        for &(d, s) in &[(3.0, 1.7), (12.5, 0.0), (40.0, -0.3)] {
            let gain = pl.mean_gain_db(d) - s;
            let back = calibrated_shadowing(gain, d, &pl).unwrap();
            assert_relative_eq!(back, s, epsilon = 1e-12);
        }
    }

    #[test]
    fn invalid_hyperparameters_are_rejected() {
        assert!(HyperParams::new(0.0, vec![0.0], vec![1.0]).is_err());
        assert!(HyperParams::new(1.0, vec![0.0], vec![0.0]).is_err());
        assert!(HyperParams::new(1.0, vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(HyperParams::new(1.0, vec![f64::NAN], vec![1.0]).is_err());
        assert!(PottsParams::new(1.0, 1).is_err());
        assert!(PottsParams::new(-0.1, 2).is_err());
        assert!(PathlossParams::new(54.6, -0.1).is_err());
    }
}

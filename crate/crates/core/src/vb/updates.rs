//! Coordinate-ascent updates of the mean-field posterior.
//!
//! One outer iteration applies, in order: the field factor update (variances
//! and means), the label responsibility update, the noise precision update,
//! the class mean update, and the class precision update. The field and
//! label steps sweep sites in index order and keep the site-mean and
//! prediction caches current as they go, so every site update is an exact
//! coordinate-ascent move and the bound cannot decrease across the step; the
//! remaining updates are exact conjugate coordinate updates on the freshly
//! refreshed caches. Every step leaves the derived caches consistent with
//! the parameters it changed.

use statrs::function::gamma::digamma;

use crate::error::{Error, Result};
use crate::geometry::Adjacency;
use crate::synthesis::{MeasurementSet, PottsParams};
use crate::vb::state::{HyperPriors, VariationalState};

/// A reconstruction problem: measurements, priors, spatial coupling, and the
/// grid neighborhood structure.
pub struct VbModel<'a> {
    pub data: &'a MeasurementSet,
    pub priors: &'a HyperPriors,
    pub potts: &'a PottsParams,
    pub adj: &'a Adjacency,
    /// Site-major view of the weights: `(measurement, weight)` pairs per
    /// site, for the sequential field sweep.
    site_offsets: Vec<usize>,
    site_entries: Vec<(usize, f64)>,
}

impl<'a> VbModel<'a> {
    pub fn new(
        data: &'a MeasurementSet,
        priors: &'a HyperPriors,
        potts: &'a PottsParams,
        adj: &'a Adjacency,
    ) -> Result<Self> {
        if priors.n_classes() != potts.n_classes {
            return Err(Error::dims(
                potts.n_classes,
                priors.n_classes(),
                "prior class count",
            ));
        }
        if data.n_points() != adj.len() {
            return Err(Error::dims(
                adj.len(),
                data.n_points(),
                "measurement grid size",
            ));
        }
        let n = data.n_points();
        let mut counts = vec![0usize; n];
        for col in data.weights().columns() {
            for (i, _) in col.iter() {
                counts[i] += 1;
            }
        }
        let mut site_offsets = Vec::with_capacity(n + 1);
        site_offsets.push(0);
        for &c in &counts {
            site_offsets.push(site_offsets.last().unwrap() + c);
        }
        let mut site_entries = vec![(0usize, 0.0); *site_offsets.last().unwrap()];
        let mut cursor = site_offsets[..n].to_vec();
        for (tau, col) in data.weights().columns().enumerate() {
            for (i, w) in col.iter() {
                site_entries[cursor[i]] = (tau, w);
                cursor[i] += 1;
            }
        }
        Ok(VbModel {
            data,
            priors,
            potts,
            adj,
            site_offsets,
            site_entries,
        })
    }

    /// Measurements touching one site, as `(measurement, weight)` pairs.
    fn site_row(&self, i: usize) -> &[(usize, f64)] {
        &self.site_entries[self.site_offsets[i]..self.site_offsets[i + 1]]
    }

    /// Posterior means of the class precisions, guarded against corruption.
    fn class_prec_means(&self, st: &VariationalState) -> Result<Vec<f64>> {
        (0..st.n_classes)
            .map(|k| {
                let p = st.class_prec_mean(k);
                if !(p > 0.0) || !p.is_finite() {
                    return Err(Error::CorruptState(format!(
                        "class {k} precision mean is {p}"
                    )));
                }
                Ok(p)
            })
            .collect()
    }

    /// Guarded posterior mean of the noise precision.
    fn noise_prec_mean(&self, st: &VariationalState) -> Result<f64> {
        let p = st.noise_prec_mean();
        if !(p > 0.0) || !p.is_finite() {
            return Err(Error::CorruptState(format!("noise precision mean is {p}")));
        }
        Ok(p)
    }

    /// Updates every Gaussian field factor (variance and mean) in a
    /// sequential site sweep, keeping the site-mean and prediction caches
    /// current so each site sees the latest values of every other site.
    pub fn update_field_factors(&self, st: &mut VariationalState) -> Result<()> {
        let n = st.n_sites;
        let k = st.n_classes;
        let noise_prec = self.noise_prec_mean(st)?;
        let class_prec = self.class_prec_means(st)?;
        let wsq = self.data.weights().row_sq_sums();
        let shadowing = self.data.shadowing();

        for i in 0..n {
            // Back-projected residual against the current predictions; the
            // site's own stale contribution is cancelled by the mean formula.
            let mut proj = 0.0;
            for &(tau, w) in self.site_row(i) {
                proj += w * (shadowing[tau] - st.predicted[tau]);
            }
            let site_mean = st.site_mean[i];
            for c in 0..k {
                let var = 1.0 / (noise_prec * wsq[i] + class_prec[c]);
                let mean = site_mean
                    + var
                        * ((st.mean_mean[c] - site_mean) * class_prec[c]
                            + noise_prec * proj);
                if !var.is_finite() || !mean.is_finite() {
                    return Err(Error::NumericalGuard(format!(
                        "field factor of site {i}, class {c} became non-finite"
                    )));
                }
                st.field_var[i * k + c] = var;
                st.field_mean[i * k + c] = mean;
            }
            let mut updated_mean = 0.0;
            for c in 0..k {
                updated_mean += st.label_prob[i * k + c] * st.field_mean[i * k + c];
            }
            let delta = updated_mean - site_mean;
            st.site_mean[i] = updated_mean;
            if delta != 0.0 {
                for &(tau, w) in self.site_row(i) {
                    st.predicted[tau] += w * delta;
                }
            }
        }
        // Full refresh clears the rounding drift of the incremental updates.
        st.refresh_site_means();
        st.refresh_predicted(self.data);
        Ok(())
    }

    /// Updates every site's class responsibilities in a sequential site
    /// sweep, keeping the site-mean and prediction caches current so each
    /// site conditions on the latest values of every other site.
    ///
    /// The per-class logit is the site's full conditional expectation of the
    /// joint log density under its class-`c` field factor: the data term
    /// (back-projected residual with the site's own share removed), the
    /// class-prior match, the expected class log precision, the factor's own
    /// entropy, and the neighbor coupling. Using the complete conditional and
    /// sweeping sequentially makes every site update an exact
    /// coordinate-ascent move, which the bound-monotonicity guarantee relies
    /// on.
    pub fn update_label_probs(&self, st: &mut VariationalState) -> Result<()> {
        let n = st.n_sites;
        let k = st.n_classes;
        let noise_prec = self.noise_prec_mean(st)?;
        let class_prec = self.class_prec_means(st)?;
        let half_log_prec: Vec<f64> = (0..k)
            .map(|c| 0.5 * (digamma(st.prec_shape[c]) + st.prec_scale[c].ln()))
            .collect();
        let wsq = self.data.weights().row_sq_sums();
        let shadowing = self.data.shadowing();
        let beta = self.potts.beta;
        let mut logits = vec![0.0; k];

        for i in 0..n {
            // Residual projection with the site's own predicted share put
            // back, so it conditions on the other sites only.
            let mut proj = 0.0;
            for &(tau, w) in self.site_row(i) {
                proj += w * (shadowing[tau] - st.predicted[tau]);
            }
            proj += wsq[i] * st.site_mean[i];
            for c in 0..k {
                let var = st.field_var[i * k + c];
                let mean = st.field_mean[i * k + c];
                let dm = mean - st.mean_mean[c];
                let dev = var + dm * dm + st.mean_var[c];
                let mut l = half_log_prec[c] - 0.5 * class_prec[c] * dev
                    - 0.5 * noise_prec * (wsq[i] * (var + mean * mean) - 2.0 * mean * proj)
                    + 0.5 * var.ln();
                for &j in self.adj.of(i) {
                    l += beta * st.label_prob[j * k + c];
                }
                logits[c] = l;
            }
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if !max.is_finite() {
                return Err(Error::NumericalGuard(format!(
                    "label logits of site {i} became non-finite"
                )));
            }
            let mut total = 0.0;
            for c in 0..k {
                let e = (logits[c] - max).exp();
                st.label_prob[i * k + c] = e;
                total += e;
            }
            let mut updated_mean = 0.0;
            for c in 0..k {
                st.label_prob[i * k + c] /= total;
                updated_mean += st.label_prob[i * k + c] * st.field_mean[i * k + c];
            }
            let delta = updated_mean - st.site_mean[i];
            st.site_mean[i] = updated_mean;
            if delta != 0.0 {
                for &(tau, w) in self.site_row(i) {
                    st.predicted[tau] += w * delta;
                }
            }
        }
        // Full refresh clears the rounding drift of the incremental updates.
        st.refresh_site_means();
        st.refresh_predicted(self.data);
        Ok(())
    }

    /// Updates the noise precision factor's scale from the expected squared
    /// residuals. The shape stays at `prior shape + t/2`.
    pub fn update_noise_precision(&self, st: &mut VariationalState) -> Result<()> {
        let rss = st.expected_residual_sq(self.data);
        let inv = 1.0 / self.priors.noise_scale + 0.5 * rss;
        if !(inv > 0.0) || !inv.is_finite() {
            return Err(Error::NumericalGuard(format!(
                "noise scale update produced inverse {inv}"
            )));
        }
        st.noise_scale = 1.0 / inv;
        Ok(())
    }

    /// Updates every class mean factor from the fresh responsibilities and
    /// field means; the class precision means are still last iteration's.
    pub fn update_class_means(&self, st: &mut VariationalState) -> Result<()> {
        let n = st.n_sites;
        let k = st.n_classes;
        let class_prec = self.class_prec_means(st)?;
        for c in 0..k {
            let mut resp_sum = 0.0;
            let mut weighted_mean = 0.0;
            for i in 0..n {
                let q = st.label_prob[i * k + c];
                resp_sum += q;
                weighted_mean += q * st.field_mean[i * k + c];
            }
            let prior_var = self.priors.mean_vars[c];
            let var = 1.0 / (1.0 / prior_var + class_prec[c] * resp_sum);
            let mean = var * (self.priors.mean_locs[c] / prior_var + class_prec[c] * weighted_mean);
            if !(var > 0.0) || !var.is_finite() || !mean.is_finite() {
                return Err(Error::NumericalGuard(format!(
                    "class {c} mean factor became degenerate (var {var}, mean {mean})"
                )));
            }
            st.mean_var[c] = var;
            st.mean_mean[c] = mean;
        }
        Ok(())
    }

    /// Updates every class precision factor from the fresh responsibilities,
    /// field factors, and class mean factors.
    pub fn update_class_precisions(&self, st: &mut VariationalState) -> Result<()> {
        let n = st.n_sites;
        let k = st.n_classes;
        for c in 0..k {
            let mut resp_sum = 0.0;
            let mut dev_sum = 0.0;
            for i in 0..n {
                let q = st.label_prob[i * k + c];
                let dm = st.field_mean[i * k + c] - st.mean_mean[c];
                resp_sum += q;
                dev_sum += q * (st.field_var[i * k + c] + dm * dm + st.mean_var[c]);
            }
            let shape = self.priors.prec_shapes[c] + 0.5 * resp_sum;
            let inv_scale = 1.0 / self.priors.prec_scales[c] + 0.5 * dev_sum;
            if !(inv_scale > 0.0) || !inv_scale.is_finite() || !shape.is_finite() {
                return Err(Error::NumericalGuard(format!(
                    "class {c} precision update produced shape {shape}, inverse scale {inv_scale}"
                )));
            }
            st.prec_shape[c] = shape;
            st.prec_scale[c] = 1.0 / inv_scale;
        }
        Ok(())
    }

    /// One full outer iteration in the fixed update order.
    pub fn iterate(&self, st: &mut VariationalState) -> Result<()> {
        self.update_field_factors(st)?;
        self.update_label_probs(st)?;
        self.update_noise_precision(st)?;
        self.update_class_means(st)?;
        self.update_class_precisions(st)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Grid, Link, WeightVector};
    use crate::synthesis::MeasurementSet;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    /// One site, one class, one measurement with weight 0.5.
    fn tiny_problem() -> (MeasurementSet, HyperPriors, PottsParams, Grid) {
        let grid = Grid::new(1, 1, 1.0, 0.0).unwrap();
        let mut data = MeasurementSet::new(1);
        let w = WeightVector::new(1, vec![(0, 0.5)]).unwrap();
        data.append(Link::new(0, 1).unwrap(), w, 1.0).unwrap();
        // Two identical classes keep the Potts minimum-class constraint while
        // behaving like a single class.
        let priors = HyperPriors::new(
            1.0,
            1.0,
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            vec![1.0, 1.0],
            vec![1.0, 1.0],
        )
        .unwrap();
        let potts = PottsParams::new(0.0, 2).unwrap();
        (data, priors, potts, grid)
    }

    #[test]
    fn field_variance_matches_hand_computation() {
        let (data, priors, potts, grid) = tiny_problem();
        let adj = grid.adjacency();
        let model = VbModel::new(&data, &priors, &potts, &adj).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let mut st = VariationalState::init(&priors, &data, &mut rng).unwrap();
        // Force the moments the hand computation assumes.
        st.noise_shape = 20.0;
        st.noise_scale = 1.0;
        st.prec_shape = vec![10.0, 10.0];
        st.prec_scale = vec![1.0, 1.0];
        model.update_field_factors(&mut st).unwrap();
        // 1 / (noise_prec * w^2 + class_prec) = 1 / (20 * 0.25 + 10) = 1/15.
        assert_relative_eq!(st.field_var[0], 1.0 / 15.0, max_relative = 1e-14);
        assert_relative_eq!(st.field_var[1], 1.0 / 15.0, max_relative = 1e-14);
    }

    #[test]
    fn field_mean_reduces_to_class_mean_without_data() {
        let grid = Grid::new(2, 2, 1.0, 0.0).unwrap();
        let data = MeasurementSet::new(4);
        let priors = HyperPriors::new(
            1.0,
            1.0,
            vec![-1.0, 3.0],
            vec![0.5, 0.5],
            vec![1.0, 1.0],
            vec![1.0, 1.0],
        )
        .unwrap();
        let potts = PottsParams::new(0.5, 2).unwrap();
        let adj = grid.adjacency();
        let model = VbModel::new(&data, &priors, &potts, &adj).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let mut st = VariationalState::init(&priors, &data, &mut rng).unwrap();
        st.mean_mean = vec![-1.0, 3.0];
        model.update_field_factors(&mut st).unwrap();
        for i in 0..4 {
            for c in 0..2 {
                assert_relative_eq!(
                    st.field_mean[i * 2 + c],
                    st.mean_mean[c],
                    max_relative = 1e-12
                );
                assert_relative_eq!(
                    st.field_var[i * 2 + c],
                    1.0 / st.class_prec_mean(c),
                    max_relative = 1e-12
                );
            }
        }
    }

    #[test]
    fn label_update_without_coupling_is_a_softmax() {
        let (data, priors, potts, grid) = tiny_problem();
        let adj = grid.adjacency();
        let model = VbModel::new(&data, &priors, &potts, &adj).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let mut st = VariationalState::init(&priors, &data, &mut rng).unwrap();
        model.update_label_probs(&mut st).unwrap();
        // Reproduce the exponent by hand for both classes. With a single
        // site, removing the site's own predicted share reduces the residual
        // projection to w * s = 0.5 * 1.
        let class_prec = [st.class_prec_mean(0), st.class_prec_mean(1)];
        let noise_prec = st.noise_shape * st.noise_scale;
        let (wsq, proj) = (0.25, 0.5);
        let mut expected = [0.0; 2];
        for c in 0..2 {
            let var = st.field_var[c];
            let mean = st.field_mean[c];
            let dm = mean - st.mean_mean[c];
            let dev = var + dm * dm + st.mean_var[c];
            expected[c] = 0.5 * (digamma(st.prec_shape[c]) + st.prec_scale[c].ln())
                - 0.5 * class_prec[c] * dev
                - 0.5 * noise_prec * (wsq * (var + mean * mean) - 2.0 * mean * proj)
                + 0.5 * var.ln();
        }
        let z = expected[0].exp() + expected[1].exp();
        assert_relative_eq!(st.label_prob[0], expected[0].exp() / z, max_relative = 1e-12);
        assert_relative_eq!(st.label_prob[0] + st.label_prob[1], 1.0, max_relative = 1e-14);
    }

    #[test]
    fn softmax_of_log_one_and_log_nine_is_one_tenth_nine_tenths() {
        // The responsibility normalizer is a plain softmax; check the
        // arithmetic on a bare two-class exponent pair.
        let (a, b) = (1.0_f64.ln(), 9.0_f64.ln());
        let max = a.max(b);
        let ea = (a - max).exp();
        let eb = (b - max).exp();
        let q = ea / (ea + eb);
        assert_relative_eq!(q, 0.1, max_relative = 1e-14);
        assert_relative_eq!(1.0 - q, 0.9, max_relative = 1e-14);
    }

    #[test]
    fn noise_update_from_unit_residual_matches_hand_computation() {
        let (data, priors, potts, grid) = tiny_problem();
        let adj = grid.adjacency();
        let model = VbModel::new(&data, &priors, &potts, &adj).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let mut st = VariationalState::init(&priors, &data, &mut rng).unwrap();
        // Zero predicted shadowing and zero field variability: the expected
        // squared residual is exactly s^2 = 1.
        st.field_mean = vec![0.0, 0.0];
        st.field_var = vec![1e-300, 1e-300];
        st.refresh_site_means();
        st.refresh_predicted(&data);
        model.update_noise_precision(&mut st).unwrap();
        // (1/b + 1/2)^-1 with b = 1.
        assert_relative_eq!(st.noise_scale, 1.0 / 1.5, max_relative = 1e-12);
    }

    #[test]
    fn perfect_fit_with_concentrated_labels_leaves_noise_scale_at_prior() {
        let (data, priors, potts, grid) = tiny_problem();
        let adj = grid.adjacency();
        let model = VbModel::new(&data, &priors, &potts, &adj).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let mut st = VariationalState::init(&priors, &data, &mut rng).unwrap();
        // One-hot responsibility, field mean reproducing s = 1 through w = 0.5.
        st.label_prob = vec![1.0, 0.0];
        st.field_mean = vec![2.0, 0.0];
        st.field_var = vec![0.0, 0.0];
        st.refresh_site_means();
        st.refresh_predicted(&data);
        model.update_noise_precision(&mut st).unwrap();
        assert_relative_eq!(st.noise_scale, priors.noise_scale, max_relative = 1e-14);
    }

    #[test]
    fn class_mean_update_matches_hand_computation() {
        let (data, _, potts, grid) = tiny_problem();
        let priors = HyperPriors::new(
            1.0,
            1.0,
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            vec![1.0, 1.0],
            vec![1.0, 1.0],
        )
        .unwrap();
        let adj = grid.adjacency();
        let model = VbModel::new(&data, &priors, &potts, &adj).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let mut st = VariationalState::init(&priors, &data, &mut rng).unwrap();
        st.label_prob = vec![1.0, 0.0];
        st.field_mean = vec![2.0, 0.0];
        st.prec_shape = vec![1.0, 1.0];
        st.prec_scale = vec![1.0, 1.0];
        st.refresh_site_means();
        st.refresh_predicted(&data);
        model.update_class_means(&mut st).unwrap();
        // var = 1/(1/1 + 1*1) = 0.5; mean = 0.5 * (0 + 1*1*2) = 1.
        assert_relative_eq!(st.mean_var[0], 0.5, max_relative = 1e-14);
        assert_relative_eq!(st.mean_mean[0], 1.0, max_relative = 1e-14);
    }

    #[test]
    fn class_precision_update_matches_hand_computation() {
        let (data, priors, potts, grid) = tiny_problem();
        let adj = grid.adjacency();
        let model = VbModel::new(&data, &priors, &potts, &adj).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let mut st = VariationalState::init(&priors, &data, &mut rng).unwrap();
        // One site with full responsibility and expected squared deviation 2:
        // field var 1 + (mean gap 0)^2 + class mean var 1.
        st.label_prob = vec![1.0, 0.0];
        st.field_mean = vec![0.5, 0.0];
        st.field_var = vec![1.0, 1.0];
        st.mean_mean = vec![0.5, 0.0];
        st.mean_var = vec![1.0, 1.0];
        st.refresh_site_means();
        st.refresh_predicted(&data);
        model.update_class_precisions(&mut st).unwrap();
        assert_relative_eq!(st.prec_shape[0], priors.prec_shapes[0] + 0.5, max_relative = 1e-14);
        assert_relative_eq!(st.prec_scale[0], 0.5, max_relative = 1e-14);
    }

    #[test]
    fn scale_never_exceeds_prior_scale() {
        // The expected squared deviation is nonnegative, so the updated scale
        // cannot exceed the prior scale.
        let (data, priors, potts, grid) = tiny_problem();
        let adj = grid.adjacency();
        let model = VbModel::new(&data, &priors, &potts, &adj).unwrap();
        for seed in 0..20 {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let mut st = VariationalState::init(&priors, &data, &mut rng).unwrap();
            model.iterate(&mut st).unwrap();
            for c in 0..2 {
                assert!(st.prec_scale[c] <= priors.prec_scales[c] + 1e-15);
            }
            assert!(st.noise_scale <= priors.noise_scale + 1e-15);
        }
    }

    #[test]
    fn corrupted_precision_is_detected() {
        let (data, priors, potts, grid) = tiny_problem();
        let adj = grid.adjacency();
        let model = VbModel::new(&data, &priors, &potts, &adj).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let mut st = VariationalState::init(&priors, &data, &mut rng).unwrap();
        st.prec_scale[1] = -1.0;
        assert!(matches!(
            model.update_field_factors(&mut st),
            Err(Error::CorruptState(_))
        ));
    }

    #[test]
    fn class_count_mismatch_is_rejected_at_model_construction() {
        let (data, priors, _, grid) = tiny_problem();
        let potts3 = PottsParams::new(0.5, 3).unwrap();
        let adj = grid.adjacency();
        assert!(matches!(
            VbModel::new(&data, &priors, &potts3, &adj),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}

//! Property-based and invariant tests: geometry laws, state invariants
//! across updates, fixed-point behavior, and sampler stationarity.

// Oracle code favors explicit index loops and inline function-pointer
// tables over the lint-preferred forms.
#![allow(clippy::needless_range_loop, clippy::type_complexity)]

mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use radiotomo_core::geometry::{ellipse_weight, Grid, Point, Scene, SensorSet, WeightVector};
use radiotomo_core::synthesis::{
    potts_conditional, sample_potts, sample_slf, synthesize_measurements, uniform_links,
    HyperParams, LabelField, PottsParams,
};
use radiotomo_core::vb::{run_vb, HyperPriors, VariationalState, VbModel, VbSettings};

proptest! {
    #[test]
    fn ellipse_weight_is_symmetric_in_the_endpoints(
        txx in -5.0..15.0, txy in -5.0..15.0,
        rxx in -5.0..15.0, rxy in -5.0..15.0,
        px in -5.0..15.0, py in -5.0..15.0,
        lambda in 0.05..2.0f64,
    ) {
        let tx = Point::new(txx, txy);
        let rx = Point::new(rxx, rxy);
        let p = Point::new(px, py);
        prop_assume!(tx.distance(&rx) > 1e-3);
        let forward = ellipse_weight(&tx, &rx, &p, lambda).unwrap();
        let reverse = ellipse_weight(&rx, &tx, &p, lambda).unwrap();
        prop_assert_eq!(forward, reverse);
    }

    #[test]
    fn widening_the_ellipse_never_drops_a_covered_point(
        txx in -5.0..15.0, txy in -5.0..15.0,
        rxx in -5.0..15.0, rxy in -5.0..15.0,
        px in -5.0..15.0, py in -5.0..15.0,
        lambda in 0.05..1.0f64, extra in 0.0..2.0f64,
    ) {
        let tx = Point::new(txx, txy);
        let rx = Point::new(rxx, rxy);
        let p = Point::new(px, py);
        prop_assume!(tx.distance(&rx) > 1e-3);
        let narrow = ellipse_weight(&tx, &rx, &p, lambda).unwrap();
        let wide = ellipse_weight(&tx, &rx, &p, lambda + extra).unwrap();
        if narrow > 0.0 {
            // Inside the support the weight depends only on the link length.
            prop_assert_eq!(narrow, wide);
        }
    }

    #[test]
    fn grid_flat_indexing_is_a_bijection(
        (nx, ny, i) in (1usize..24, 1usize..24)
            .prop_flat_map(|(nx, ny)| (Just(nx), Just(ny), 0..nx * ny)),
        spacing in 0.1..3.0f64,
        origin in -2.0..2.0f64,
    ) {
        let grid = Grid::new(nx, ny, spacing, origin).unwrap();
        let (ix, iy) = grid.coords(i);
        prop_assert!(ix < nx && iy < ny);
        prop_assert_eq!(grid.index(ix, iy), i);
        let p = grid.point(i);
        prop_assert_eq!(p.x, origin + ix as f64 * spacing);
        prop_assert_eq!(p.y, origin + iy as f64 * spacing);
    }

    #[test]
    fn sparse_weight_products_match_their_dense_forms(
        dim in 1usize..30,
        seed in 0u64..1000,
    ) {
        use rand::Rng;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let nnz = rng.gen_range(0..=dim.min(8));
        let mut idx: Vec<usize> = (0..dim).collect();
        for j in (1..dim).rev() {
            let swap = rng.gen_range(0..=j);
            idx.swap(j, swap);
        }
        let entries: Vec<(usize, f64)> = idx[..nnz]
            .iter()
            .map(|&i| (i, rng.gen_range(0.1..2.0)))
            .collect();
        let w = WeightVector::new(dim, entries).unwrap();
        let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let dense = w.dense();
        let expected: f64 = dense.iter().zip(&x).map(|(a, b)| a * b).sum();
        prop_assert!((w.dot(&x) - expected).abs() <= 1e-12 * expected.abs().max(1.0));
        let mut scattered = vec![0.0; dim];
        w.scatter_add(2.0, &mut scattered);
        for i in 0..dim {
            prop_assert_eq!(scattered[i], 2.0 * dense[i]);
        }
    }
}

/// Builds a small random reconstruction problem from a handful of knobs.
fn random_instance(
    nx: usize,
    ny: usize,
    k: usize,
    beta: f64,
    t: usize,
    seed: u64,
) -> (
    radiotomo_core::synthesis::MeasurementSet,
    HyperPriors,
    PottsParams,
    Grid,
) {
    let grid = Grid::new(nx, ny, 1.0, 1.0).unwrap();
    let sensors = SensorSet::on_boundary(&grid.area(), 12);
    let scene = Scene::new(grid.clone(), sensors, 0.39).unwrap();
    let potts = PottsParams::new(beta, k).unwrap();
    let labels = sample_potts(&grid, &potts, 60, seed);
    let means: Vec<f64> = (0..k).map(|c| 2.5 * c as f64).collect();
    let precs = vec![8.0; k];
    let hp = HyperParams::new(20.0, means.clone(), precs).unwrap();
    let field = sample_slf(&labels, &hp, seed ^ 0x5eed).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0xca11);
    let links = uniform_links(scene.sensors.len(), t, &mut rng).unwrap();
    let data = synthesize_measurements(&scene, &field, &links, 20.0, seed ^ 0xda7a).unwrap();
    let priors = HyperPriors::new(
        2.0,
        1.0,
        means.iter().map(|m| m - 0.1).collect(),
        vec![1.0; k],
        vec![0.8; k],
        vec![1.0; k],
    )
    .unwrap();
    (data, priors, potts, grid)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn every_update_preserves_state_invariants(
        nx in 3usize..6, ny in 3usize..6,
        k in 2usize..4,
        seed in 0u64..10_000,
    ) {
        let t = 2 * nx * ny;
        let (data, priors, potts, grid) = random_instance(nx, ny, k, 0.8, t, seed);
        let adj = grid.adjacency();
        let model = VbModel::new(&data, &priors, &potts, &adj).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut st = VariationalState::init(&priors, &data, &mut rng).unwrap();
        st.validate(&data, 1e-10).unwrap();
        for _ in 0..6 {
            model.update_field_factors(&mut st).unwrap();
            st.validate(&data, 1e-10).unwrap();
            model.update_label_probs(&mut st).unwrap();
            st.validate(&data, 1e-10).unwrap();
            for i in 0..st.n_sites {
                let row: f64 = (0..k).map(|c| st.label_prob[i * k + c]).sum();
                prop_assert!((row - 1.0).abs() <= 1e-12);
            }
            model.update_noise_precision(&mut st).unwrap();
            st.validate(&data, 1e-10).unwrap();
            model.update_class_means(&mut st).unwrap();
            st.validate(&data, 1e-10).unwrap();
            model.update_class_precisions(&mut st).unwrap();
            st.validate(&data, 1e-10).unwrap();
        }
    }
}

/// Largest relative change between two equal-length parameter vectors.
fn max_rel_change(before: &[f64], after: &[f64]) -> f64 {
    before
        .iter()
        .zip(after)
        .map(|(b, a)| (a - b).abs() / b.abs().max(1.0))
        .fold(0.0, f64::max)
}

#[test]
fn a_converged_run_is_a_fixed_point_of_every_update() {
    for seed in [3, 11] {
        let (data, priors, potts, grid) = random_instance(5, 4, 2, 0.8, 50, seed);
        let run = run_vb(
            &data,
            &priors,
            &potts,
            &grid,
            &VbSettings {
                max_iters: 4000,
                tol: 1e-12,
                seed,
            },
        )
        .unwrap();
        assert!(run.converged, "seed {seed} did not converge");
        let adj = grid.adjacency();
        let model = VbModel::new(&data, &priors, &potts, &adj).unwrap();

        let reference = run.state.clone();
        let mut st = run.state.clone();
        let steps: Vec<(&str, fn(&VbModel, &mut VariationalState) -> radiotomo_core::Result<()>)> = vec![
            ("field", |m, s| m.update_field_factors(s)),
            ("labels", |m, s| m.update_label_probs(s)),
            ("noise", |m, s| m.update_noise_precision(s)),
            ("class means", |m, s| m.update_class_means(s)),
            ("class precisions", |m, s| m.update_class_precisions(s)),
        ];
        for (name, step) in steps {
            step(&model, &mut st).unwrap();
            let drift = [
                max_rel_change(&reference.field_mean, &st.field_mean),
                max_rel_change(&reference.field_var, &st.field_var),
                max_rel_change(&reference.label_prob, &st.label_prob),
                max_rel_change(
                    &[reference.noise_scale, reference.noise_shape],
                    &[st.noise_scale, st.noise_shape],
                ),
                max_rel_change(&reference.mean_mean, &st.mean_mean),
                max_rel_change(&reference.mean_var, &st.mean_var),
                max_rel_change(&reference.prec_shape, &st.prec_shape),
                max_rel_change(&reference.prec_scale, &st.prec_scale),
            ]
            .into_iter()
            .fold(0.0, f64::max);
            assert!(
                drift < 1e-6,
                "seed {seed}: {name} update moved a converged state by {drift:.3e}"
            );
        }
    }
}

#[test]
fn with_no_data_and_symmetric_classes_the_posterior_recovers_the_prior() {
    let grid = Grid::new(4, 4, 1.0, 1.0).unwrap();
    let data = radiotomo_core::synthesis::MeasurementSet::new(grid.n_points());
    let priors = HyperPriors::new(
        2.0,
        1.5,
        vec![1.5, 1.5],
        vec![2.0, 2.0],
        vec![0.7, 0.7],
        vec![1.2, 1.2],
    )
    .unwrap();
    let potts = PottsParams::new(0.9, 2).unwrap();
    let adj = grid.adjacency();
    let model = VbModel::new(&data, &priors, &potts, &adj).unwrap();

    let mut rng = ChaCha20Rng::seed_from_u64(77);
    let mut st = VariationalState::init(&priors, &data, &mut rng).unwrap();
    // Symmetrize the random start so the two classes are exchangeable.
    for i in 0..st.n_sites {
        st.field_mean[2 * i + 1] = st.field_mean[2 * i];
        st.field_var[2 * i + 1] = st.field_var[2 * i];
    }
    st.mean_var[1] = st.mean_var[0];
    st.prec_shape[1] = st.prec_shape[0];
    st.prec_scale[1] = st.prec_scale[0];
    st.refresh_site_means();
    st.refresh_predicted(&data);
    st.validate(&data, 1e-10).unwrap();

    for _ in 0..40 {
        model.iterate(&mut st).unwrap();
    }

    let n = grid.n_points() as f64;
    for k in 0..2 {
        // Class means: the posterior location returns to the prior location.
        assert!(
            (st.mean_mean[k] - 1.5).abs() < 1e-9,
            "class {k} mean drifted to {}",
            st.mean_mean[k]
        );
        // Precision shape: prior shape plus half the (uniform) class mass.
        assert!(
            (st.prec_shape[k] - (0.7 + 0.5 * n / 2.0)).abs() < 1e-12,
            "class {k} shape is {}",
            st.prec_shape[k]
        );
    }
    for i in 0..st.n_sites {
        for k in 0..2 {
            assert!((st.label_prob[i * 2 + k] - 0.5).abs() < 1e-14);
        }
        // Field factors collapse onto the class-mean factor without data.
        assert!((st.field_mean[i * 2] - st.mean_mean[0]).abs() < 1e-9);
    }
}

#[test]
fn one_gibbs_sweep_preserves_the_exact_potts_distribution() {
    // Draw exactly from the enumerated distribution, apply one raster
    // conditional-resampling sweep, and check the state distribution is
    // unchanged: the transition kernel leaves its target invariant.
    let grid = Grid::new(2, 2, 1.0, 0.0).unwrap();
    let params = PottsParams::new(1.2, 2).unwrap();
    let exact = common::enumerate_potts(&grid, &params);
    let adj = grid.adjacency();
    let n = grid.n_points();
    let samples = 60_000;
    let mut rng = ChaCha20Rng::seed_from_u64(2024);
    let mut counts = vec![0usize; exact.len()];
    let mut z = vec![0usize; n];
    for _ in 0..samples {
        common::decode_labels(common::sample_index(&exact, &mut rng), 2, &mut z);
        for site in 0..n {
            let field = LabelField::new(z.clone(), 2).unwrap();
            let cond = potts_conditional(&field, site, &adj, &params);
            z[site] = common::sample_index(&cond, &mut rng);
        }
        counts[common::encode_labels(&z, 2)] += 1;
    }
    let empirical: Vec<f64> = counts
        .iter()
        .map(|&c| c as f64 / samples as f64)
        .collect();
    let tv = common::total_variation(&empirical, &exact);
    assert!(tv < 0.02, "total variation after one sweep: {tv}");
}

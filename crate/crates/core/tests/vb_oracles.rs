//! Independent numerical oracles for the inference core: exhaustive
//! enumeration of tiny Potts fields, a closed-form neighbor-coupling
//! response, and a brute-force evidence computation that the variational
//! bound must stay below.

// Oracle code favors explicit index loops over iterator chains.
#![allow(clippy::needless_range_loop)]

mod common;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use statrs::function::gamma::ln_gamma;

use radiotomo_core::geometry::{Grid, Link, WeightVector};
use radiotomo_core::synthesis::{potts_conditional, LabelField, MeasurementSet, PottsParams};
use radiotomo_core::vb::{run_vb, HyperPriors, VariationalState, VbModel, VbSettings};

#[test]
fn site_conditionals_match_exhaustive_enumeration() {
    // The conditional of one site given the rest, derived from the fully
    // enumerated joint, pins the edge-counting convention exactly.
    let cases = [
        (Grid::new(2, 2, 1.0, 0.0).unwrap(), 2, 0.8),
        (Grid::new(2, 3, 1.0, 0.0).unwrap(), 2, 1.4),
        (Grid::new(2, 2, 1.0, 0.0).unwrap(), 3, 0.6),
    ];
    for (grid, k, beta) in cases {
        let params = PottsParams::new(beta, k).unwrap();
        let joint = common::enumerate_potts(&grid, &params);
        let adj = grid.adjacency();
        let n = grid.n_points();
        let mut z = vec![0usize; n];
        for code in 0..joint.len() {
            common::decode_labels(code, k, &mut z);
            for site in 0..n {
                // Conditional from the joint: renormalize over this site's digit.
                let mut from_joint = vec![0.0; k];
                let mut alt = z.clone();
                for c in 0..k {
                    alt[site] = c;
                    from_joint[c] = joint[common::encode_labels(&alt, k)];
                }
                let total: f64 = from_joint.iter().sum();
                let field = LabelField::new(z.clone(), k).unwrap();
                let direct = potts_conditional(&field, site, &adj, &params);
                for c in 0..k {
                    assert!(
                        (direct[c] - from_joint[c] / total).abs() < 1e-13,
                        "grid {}x{} K={k} beta={beta} config {code} site {site} class {c}: \
                         {} vs {}",
                        grid.nx,
                        grid.ny,
                        direct[c],
                        from_joint[c] / total
                    );
                }
            }
        }
    }
}

#[test]
fn neighbor_coupling_shifts_responsibilities_by_the_closed_form() {
    // On a symmetric two-class state with no data, the only asymmetry is the
    // neighbor vote, so the first-updated site's responsibility is exactly
    // sigmoid(beta * (votes_for - votes_against)). The label sweep visits
    // sites in index order, so site 0 reads its neighbors' assigned
    // responsibilities untouched.
    let grid = Grid::new(2, 2, 1.0, 0.0).unwrap();
    let data = MeasurementSet::new(grid.n_points());
    let priors = HyperPriors::new(
        2.0,
        1.0,
        vec![0.5, 0.5],
        vec![1.0, 1.0],
        vec![0.9, 0.9],
        vec![1.0, 1.0],
    )
    .unwrap();
    let adj = grid.adjacency();
    let mut previous = 0.0;
    for beta in [0.0, 0.5, 1.5] {
        let potts = PottsParams::new(beta, 2).unwrap();
        let model = VbModel::new(&data, &priors, &potts, &adj).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let mut st = VariationalState::init(&priors, &data, &mut rng).unwrap();
        for i in 0..st.n_sites {
            st.field_mean[2 * i + 1] = st.field_mean[2 * i];
            st.field_var[2 * i + 1] = st.field_var[2 * i];
        }
        st.mean_var[1] = st.mean_var[0];
        st.prec_shape[1] = st.prec_shape[0];
        st.prec_scale[1] = st.prec_scale[0];
        // Both neighbors of site 0 vote for class 1.
        let neighbors = adj.of(0).to_vec();
        assert_eq!(neighbors.len(), 2);
        for &j in &neighbors {
            st.label_prob[2 * j] = 0.0;
            st.label_prob[2 * j + 1] = 1.0;
        }
        st.refresh_site_means();
        st.refresh_predicted(&data);

        model.update_label_probs(&mut st).unwrap();
        let got = st.label_prob[1];
        let expected = 1.0 / (1.0 + (-2.0 * beta).exp());
        assert!(
            (got - expected).abs() < 1e-12,
            "beta {beta}: responsibility {got} vs closed form {expected}"
        );
        assert!(got >= previous, "responsibility not monotone in beta");
        previous = got;
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            // Legendre polynomial and derivative by recurrence.
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let step = p1 / dp;
            x -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0, x);
        for j in 2..=n {
            let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Shape-scale gamma density.
fn gamma_pdf(x: f64, shape: f64, scale: f64) -> f64 {
    ((shape - 1.0) * x.ln() - x / scale - shape * scale.ln() - ln_gamma(shape)).exp()
}

#[test]
fn variational_bound_stays_below_the_brute_force_evidence() {
    // Two sites, one grid edge, three measurements: the model evidence is
    // computable by enumerating labels, integrating the field and class
    // means analytically, and integrating the three precisions numerically.
    let grid = Grid::new(2, 1, 1.0, 0.0).unwrap();
    let beta = 0.7;
    let potts = PottsParams::new(beta, 2).unwrap();
    let (a_nu, b_nu) = (2.0, 1.0);
    let (m, sig2) = (vec![0.0, 1.0], vec![0.5, 0.5]);
    let (a_k, b_k) = (vec![2.0, 2.0], vec![0.5, 0.5]);
    let priors = HyperPriors::new(
        a_nu,
        b_nu,
        m.clone(),
        sig2.clone(),
        a_k.clone(),
        b_k.clone(),
    )
    .unwrap();

    let w_cols = [[0.9, 0.2], [0.1, 0.7], [0.5, 0.5]];
    let s = [0.8, -0.3, 0.5];
    let mut data = MeasurementSet::new(2);
    for (j, (w, &sj)) in w_cols.iter().zip(&s).enumerate() {
        data.append(
            Link::new(j, j + 1).unwrap(),
            WeightVector::new(2, vec![(0, w[0]), (1, w[1])]).unwrap(),
            sj,
        )
        .unwrap();
    }

    // Numerical integration setup: substitute phi = exp(u) on each axis.
    let (lo, hi) = (1e-6_f64.ln(), 60.0_f64.ln());
    let (nodes, weights) = gauss_legendre(80);
    let scale = 0.5 * (hi - lo);
    let us: Vec<f64> = nodes.iter().map(|x| 0.5 * (hi + lo) + scale * x).collect();
    // Self-check: the rule integrates each gamma prior to 1.
    for (shape, sc) in [(a_nu, b_nu), (a_k[0], b_k[0])] {
        let total: f64 = us
            .iter()
            .zip(&weights)
            .map(|(&u, &wt)| {
                let phi = u.exp();
                wt * scale * phi * gamma_pdf(phi, shape, sc)
            })
            .sum();
        assert!(
            (total - 1.0).abs() < 1e-9,
            "quadrature misintegrates the prior: {total}"
        );
    }

    let w_mat = DMatrix::from_fn(2, 3, |i, j| w_cols[j][i]);
    let s_vec = DVector::from_row_slice(&s);
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();

    // Evidence: sum over the 4 label configurations, 3D quadrature over
    // (phi_nu, phi_1, phi_2).
    let mut evidence = 0.0;
    let mut prior_z = [0.0; 4];
    for code in 0..4 {
        let z = [code % 2, code / 2];
        prior_z[code] = (beta * f64::from(u8::from(z[0] == z[1]))).exp();
    }
    let prior_norm: f64 = prior_z.iter().sum();
    for code in 0..4 {
        let z = [code % 2, code / 2];
        // Mean of s and the class-mean covariance contribution.
        let mean = DVector::from_fn(3, |j, _| {
            w_cols[j][0] * m[z[0]] + w_cols[j][1] * m[z[1]]
        });
        // M S M^T: sigma^2 shared within a class couples equal labels.
        let mut msm = DMatrix::zeros(2, 2);
        for r in 0..2 {
            for c in 0..2 {
                if z[r] == z[c] {
                    msm[(r, c)] = sig2[z[r]];
                }
            }
        }
        let mut config_integral = 0.0;
        for (&u_nu, &wt_nu) in us.iter().zip(&weights) {
            let phi_nu = u_nu.exp();
            let f_nu = wt_nu * scale * phi_nu * gamma_pdf(phi_nu, a_nu, b_nu);
            for (&u_1, &wt_1) in us.iter().zip(&weights) {
                let phi_1 = u_1.exp();
                let f_1 = wt_1 * scale * phi_1 * gamma_pdf(phi_1, a_k[0], b_k[0]);
                for (&u_2, &wt_2) in us.iter().zip(&weights) {
                    let phi_2 = u_2.exp();
                    let f_2 = wt_2 * scale * phi_2 * gamma_pdf(phi_2, a_k[1], b_k[1]);
                    let phi = [phi_1, phi_2];
                    let mut d = msm.clone();
                    d[(0, 0)] += 1.0 / phi[z[0]];
                    d[(1, 1)] += 1.0 / phi[z[1]];
                    let mut cov = w_mat.transpose() * d * &w_mat;
                    for j in 0..3 {
                        cov[(j, j)] += 1.0 / phi_nu;
                    }
                    let chol = nalgebra::Cholesky::new(cov).expect("covariance is SPD");
                    let ln_det = 2.0 * (0..3).map(|j| chol.l()[(j, j)].ln()).sum::<f64>();
                    let r = &s_vec - &mean;
                    let sol = chol.solve(&r);
                    let quad = r.dot(&sol);
                    let density = (-0.5 * (quad + ln_det + 3.0 * ln_2pi)).exp();
                    config_integral += f_nu * f_1 * f_2 * density;
                }
            }
        }
        evidence += prior_z[code] / prior_norm * config_integral;
    }
    let ln_evidence = evidence.ln();

    let run = run_vb(
        &data,
        &priors,
        &potts,
        &grid,
        &VbSettings {
            max_iters: 5000,
            tol: 1e-12,
            seed: 3,
        },
    )
    .unwrap();
    // The computed bound omits -ln C(beta); restore it before comparing.
    let ln_c = (2.0 * beta.exp() + 2.0).ln();
    let bound = run.elbo_trace.last().unwrap() - ln_c;
    assert!(
        bound <= ln_evidence + 1e-3,
        "bound {bound} exceeds evidence {ln_evidence}"
    );
    assert!(
        ln_evidence - bound < 20.0,
        "bound {bound} is vacuously far below evidence {ln_evidence}"
    );
}

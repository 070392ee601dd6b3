use ndarray::Axis;
use proptest::prelude::*;
use rand_distr::{Distribution, StandardNormal};
use sarcca_core::lasso::{kkt_violation, lasso_fit};
use sarcca_core::linalg::{center_columns, correlation, l2_norm};
use sarcca_core::sar::{deflate, RankChoice};
use sarcca_core::{classical_cca, sar_fit, seeded_rng, Mat, SarConfig, Vector};

fn gaussian(rows: usize, cols: usize, seed: u64) -> Mat {
    let mut rng = seeded_rng(seed);
    Mat::from_shape_fn((rows, cols), |_| StandardNormal.sample(&mut rng))
}

// Y shares one latent direction with X so the leading pair is well separated.
fn linked(n: usize, p: usize, q: usize, seed: u64) -> (Mat, Mat) {
    let x = gaussian(n, p, seed);
    let mut y = gaussian(n, q, seed ^ 0x5eed);
    let signal = &x.column(0) + &x.column(1);
    y.column_mut(0).scaled_add(2.0, &signal);
    (x, y)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn cca_correlations_are_ordered_and_attained(seed in any::<u64>(), p in 2usize..5, q in 2usize..5) {
        let (x, y) = linked(60, p, q, seed);
        let r = p.min(q);
        let m = classical_cca(&x, &y, r).unwrap();
        let (xc, _) = center_columns(&x).unwrap();
        let (yc, _) = center_columns(&y).unwrap();
        for l in 0..r {
            prop_assert!(m.rho[l] >= -1e-12 && m.rho[l] <= 1.0 + 1e-12);
            if l > 0 {
                prop_assert!(m.rho[l] <= m.rho[l - 1] + 1e-12);
            }
            let u = xc.dot(&m.a.column(l));
            let v = yc.dot(&m.b.column(l));
            prop_assert!((correlation(u.view(), v.view()).abs() - m.rho[l]).abs() < 1e-8);
        }
    }

    #[test]
    fn cca_ignores_column_scale_and_shift(seed in any::<u64>(), scale in 0.1f64..10.0, shift in -5.0f64..5.0) {
        let (x, y) = linked(50, 3, 3, seed);
        let mut x2 = x.clone();
        x2.column_mut(1).mapv_inplace(|v| v * scale + shift);
        let (m1, m2) = (classical_cca(&x, &y, 2).unwrap(), classical_cca(&x2, &y, 2).unwrap());
        for l in 0..2 {
            prop_assert!((m1.rho[l] - m2.rho[l]).abs() < 1e-8);
        }
    }

    #[test]
    fn deflated_columns_are_orthogonal_to_the_variate(seed in any::<u64>(), cols in 1usize..6) {
        let m = gaussian(25, cols, seed);
        let w: Vector = gaussian(25, 1, seed ^ 1).column(0).to_owned();
        let d = deflate(&m, &w).unwrap();
        let scale = l2_norm(w.view()) * m.iter().map(|v| v * v).sum::<f64>().sqrt();
        for c in d.axis_iter(Axis(1)) {
            prop_assert!(c.dot(&w).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn lasso_solutions_satisfy_optimality(seed in any::<u64>(), p in 1usize..12, frac in 0.01f64..0.9) {
        let x = gaussian(30, p, seed);
        let y: Vector = gaussian(30, 1, seed ^ 2).column(0).to_owned();
        let lambda_max = 2.0 * x.t().dot(&y).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let lambda = frac * lambda_max;
        let fit = lasso_fit(&x, &y, lambda).unwrap();
        let grad = x.t().dot(&(&y - &x.dot(&fit.beta)));
        prop_assert!(kkt_violation(&fit.beta, &grad, lambda) <= 1e-6 * l2_norm(y.view()));
    }
}

#[test]
fn sar_leading_pair_has_unit_norm_and_repeats_exactly() {
    let (x, y) = linked(80, 8, 6, 17);
    let config = SarConfig { rank: RankChoice::Fixed(2), ..SarConfig::default() };
    let first = sar_fit(&x, &y, &config).unwrap();
    let second = sar_fit(&x, &y, &config).unwrap();
    assert_eq!(first, second);
    assert_eq!(first.rank(), 2);
    assert!((l2_norm(first.a.column(0)) - 1.0).abs() < 1e-12);
    assert!((l2_norm(first.b.column(0)) - 1.0).abs() < 1e-12);
    assert!(first.a.iter().chain(first.b.iter()).all(|v| v.is_finite()));
    let (x0, _) = center_columns(&x).unwrap();
    let (y0, _) = center_columns(&y).unwrap();
    assert_eq!(first.u, x0.dot(&first.a));
    assert_eq!(first.v, y0.dot(&first.b));
    assert!(first.rho_hat[0] > 0.7);
}

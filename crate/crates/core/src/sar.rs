//! Sparse alternating regression (SAR).
//!
//! Each canonical pair is found by alternating two lasso regressions: the
//! current `Y`-variate on `X`, then the resulting `X`-variate on `Y`, with
//! the coefficient vectors rescaled to unit norm after every step. Pairs
//! beyond the first are extracted from data deflated by the earlier
//! variates and then re-expressed as sparse combinations of the original
//! centered variables.

use ndarray::{Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::cca::{
    canonical_ridge, default_ridge_grid, leading_singular, ridge_cv, select_rank, CcaModel,
    RankSelection, RidgeParams,
};
use crate::error::{Error, Result};
use crate::lasso::{bic_argmin, LassoDesign, LassoSolution, DEFAULT_PATH_LENGTH};
use crate::linalg::{
    center_columns, correlation, l2_norm, projection_residual, sample_covariance, vector_angle,
    Mat, Vector,
};

/// Variates with a smaller Euclidean norm carry no usable signal.
pub const MIN_VARIATE_NORM: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankChoice {
    Fixed(usize),
    /// Maximum eigenvalue ratio on the canonical-ridge spectrum.
    Auto,
}

/// Where the first `B` iterate of each pair comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initialization {
    CanonicalRidge,
    /// Leading right singular vector of the (deflated) cross-covariance.
    CrossCovariance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SarConfig {
    /// Convergence threshold on successive-vector angles, in radians.
    pub epsilon: f64,
    pub max_iterations: usize,
    pub n_lambda: usize,
    pub rank: RankChoice,
    /// Fixed penalty per pair instead of BIC selection. A shorter list is
    /// padded with its last entry.
    pub lambda_overrides: Option<Vec<f64>>,
    /// Canonical-ridge penalties used for starting values; cross-validated
    /// when absent.
    pub ridge: Option<RidgeParams>,
    pub ridge_folds: usize,
    pub initialization: Initialization,
    pub seed: u64,
}

impl Default for SarConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            max_iterations: 500,
            n_lambda: DEFAULT_PATH_LENGTH,
            rank: RankChoice::Auto,
            lambda_overrides: None,
            ridge: None,
            ridge_folds: 5,
            initialization: Initialization::CanonicalRidge,
            seed: crate::DEFAULT_SEED,
        }
    }
}

impl SarConfig {
    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Contract(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.max_iterations == 0 {
            return Err(Error::Contract("max_iterations must be at least 1".into()));
        }
        if self.n_lambda < 2 {
            return Err(Error::Contract("n_lambda must be at least 2".into()));
        }
        if let Some(l) = &self.lambda_overrides {
            if l.is_empty() || l.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::Contract(
                    "lambda overrides must be a non-empty list of nonnegative values".into(),
                ));
            }
        }
        Ok(())
    }

    fn lambda_for(&self, pair: usize) -> Option<f64> {
        self.lambda_overrides
            .as_ref()
            .map(|l| l[pair.min(l.len() - 1)])
    }
}

/// Successive-iterate angles of one pair's alternation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub angles_a: Vec<f64>,
    pub angles_b: Vec<f64>,
}

/// Converged (or last) iterates of the inner alternation.
#[derive(Debug, Clone, PartialEq)]
pub struct PairFit {
    pub a: Vector,
    pub b: Vector,
    pub u: Vector,
    pub v: Vector,
    pub lambda_a: f64,
    pub lambda_b: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: ConvergenceTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSummary {
    pub iterations: usize,
    pub converged: bool,
    /// Penalties of the last inner regressions.
    pub lambda_a: f64,
    pub lambda_b: f64,
    /// Penalties of the re-expression regressions (pairs after the first).
    pub lambda_a_final: Option<f64>,
    pub lambda_b_final: Option<f64>,
    /// `max_j |uᵀ X'ⱼ| / (‖u‖ ‖X‖_F)` for the matrices deflated by this
    /// pair's variates; absent for the last pair.
    pub deflation_residual_x: Option<f64>,
    pub deflation_residual_y: Option<f64>,
    pub trace: ConvergenceTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SarModel {
    /// Sparse canonical vectors, one column per pair.
    pub a: Mat,
    pub b: Mat,
    /// `X₀ A` and `Y₀ B` on the centered training data.
    pub u: Mat,
    pub v: Mat,
    /// `corr(uₗ, vₗ)` per pair.
    pub rho_hat: Vector,
    pub pairs: Vec<PairSummary>,
    pub rank_selection: Option<RankSelection>,
    pub ridge_params: Option<RidgeParams>,
    pub initialization: Initialization,
    pub x_means: Vector,
    pub y_means: Vector,
}

impl SarModel {
    pub fn rank(&self) -> usize {
        self.a.ncols()
    }
}

/// True when both successive angles (sign ignored) are below `epsilon`.
pub fn convergence_check(
    a_prev: &Vector,
    a_cur: &Vector,
    b_prev: &Vector,
    b_cur: &Vector,
    epsilon: f64,
) -> bool {
    vector_angle(a_prev.view(), a_cur.view()) < epsilon
        && vector_angle(b_prev.view(), b_cur.view()) < epsilon
}

/// Residual of regressing every column of `m` on `w`: `M − w (wᵀw)⁻¹ wᵀ M`.
pub fn deflate(m: &Mat, w: &Vector) -> Result<Mat> {
    if m.nrows() != w.len() {
        return Err(Error::Shape(format!(
            "matrix has {} rows, variate has {}",
            m.nrows(),
            w.len()
        )));
    }
    let ww = w.dot(w);
    if ww < 1e-12 {
        return Err(Error::Degenerate(format!(
            "cannot deflate by a variate with squared norm {ww:e}"
        )));
    }
    let coef = m.t().dot(w) / ww;
    let mut out = m.clone();
    Zip::from(out.rows_mut()).and(w).for_each(|mut row, &wi| {
        row.scaled_add(-wi, &coef);
    });
    Ok(out)
}

fn deflation_residual(before: &Mat, after: &Mat, w: &Vector) -> f64 {
    let frob = before.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = l2_norm(w.view()) * frob;
    if scale == 0.0 {
        return 0.0;
    }
    after.t().dot(w).iter().fold(0.0_f64, |a, v| a.max(v.abs())) / scale
}

/// Lasso of `response` on the design, with BIC-selected penalty unless
/// `lambda` is given.
///
/// A zero solution is replaced by the fit at the largest path penalty that
/// gives a nonzero one; when none exists the response carries no
/// association with the design.
pub fn sparse_regression(
    design: &LassoDesign,
    response: &Vector,
    lambda: Option<f64>,
    n_lambda: usize,
) -> Result<LassoSolution> {
    if l2_norm(response.view()) < MIN_VARIATE_NORM {
        return Err(Error::ZeroAssociation("response variate vanished".into()));
    }
    let path = design.path(response, n_lambda)?;
    let chosen = match lambda {
        Some(l) => design.fit(response, l)?,
        None => {
            let fits = design.fit_path_truncated(response, &path)?;
            let best = bic_argmin(&fits, response);
            if !fits[best].is_zero() {
                return Ok(fits.into_iter().nth(best).expect("index in range"));
            }
            return fits.into_iter().find(|f| !f.is_zero()).ok_or_else(|| {
                Error::ZeroAssociation("every penalty on the path gives a zero fit".into())
            });
        }
    };
    if !chosen.is_zero() {
        return Ok(chosen);
    }
    design
        .fit_path_truncated(response, &path)?
        .into_iter()
        .find(|f| !f.is_zero())
        .ok_or_else(|| Error::ZeroAssociation("every penalty on the path gives a zero fit".into()))
}

fn unit(v: &Vector) -> Result<Vector> {
    let norm = l2_norm(v.view());
    if !(norm > 0.0) {
        return Err(Error::ZeroAssociation("zero coefficient vector".into()));
    }
    Ok(v / norm)
}

fn variate(m: &Mat, coef: &Vector) -> Result<Vector> {
    let out = m.dot(coef);
    if l2_norm(out.view()) < MIN_VARIATE_NORM {
        return Err(Error::ZeroAssociation("canonical variate has (near) zero norm".into()));
    }
    Ok(out)
}

/// Alternating lasso regressions for one pair on (possibly deflated) data.
pub fn sar_pair_inner(
    xd: &Mat,
    yd: &Mat,
    b_init: &Vector,
    config: &SarConfig,
    lambda: Option<f64>,
) -> Result<PairFit> {
    config.validate()?;
    if xd.nrows() != yd.nrows() {
        return Err(Error::Shape(format!(
            "X has {} rows, Y has {}",
            xd.nrows(),
            yd.nrows()
        )));
    }
    if b_init.len() != yd.ncols() {
        return Err(Error::Shape(format!(
            "starting vector has length {}, Y has {} columns",
            b_init.len(),
            yd.ncols()
        )));
    }
    let x_design = LassoDesign::new(xd)?;
    let y_design = LassoDesign::new(yd)?;

    let mut b = unit(b_init)?;
    let mut v = variate(yd, &b)?;
    let mut a_prev: Option<Vector> = None;
    let mut trace = ConvergenceTrace::default();
    let mut converged = false;
    let mut iterations = 0;
    let (mut a, mut u) = (Vector::zeros(xd.ncols()), Vector::zeros(xd.nrows()));
    let (mut lambda_a, mut lambda_b) = (0.0, 0.0);

    while iterations < config.max_iterations {
        iterations += 1;
        let fit_a = sparse_regression(&x_design, &v, lambda, config.n_lambda)?;
        lambda_a = fit_a.lambda;
        a = unit(&fit_a.beta)?;
        u = variate(xd, &a)?;

        let fit_b = sparse_regression(&y_design, &u, lambda, config.n_lambda)?;
        lambda_b = fit_b.lambda;
        let b_new = unit(&fit_b.beta)?;
        v = variate(yd, &b_new)?;

        // The first iteration has no previous `a`; record it as maximal.
        let angle_a = a_prev
            .as_ref()
            .map_or(std::f64::consts::FRAC_PI_2, |p| vector_angle(p.view(), a.view()));
        let angle_b = vector_angle(b.view(), b_new.view());
        trace.angles_a.push(angle_a);
        trace.angles_b.push(angle_b);
        let done = a_prev
            .as_ref()
            .is_some_and(|p| convergence_check(p, &a, &b, &b_new, config.epsilon));
        b = b_new;
        a_prev = Some(a.clone());
        if done {
            converged = true;
            break;
        }
    }

    Ok(PairFit {
        a,
        b,
        u,
        v,
        lambda_a,
        lambda_b,
        iterations,
        converged,
        trace,
    })
}

/// Sparse coefficients, on the original centered data, of a variate found
/// on deflated data.
#[derive(Debug, Clone, PartialEq)]
pub struct Expressed {
    pub coefficients: Vector,
    /// Penalty of the re-expression lasso; `None` for the first pair.
    pub lambda: Option<f64>,
}

/// Orthogonalises `target` against the earlier variates and lasso-regresses
/// the residual on `x0`. With no earlier variates the converged inner
/// vector is returned unchanged.
pub fn express_in_original(
    target: &Vector,
    converged: &Vector,
    prev_variates: &Mat,
    x0: &LassoDesign,
    lambda: Option<f64>,
    n_lambda: usize,
) -> Result<Expressed> {
    if prev_variates.ncols() == 0 {
        return Ok(Expressed {
            coefficients: converged.clone(),
            lambda: None,
        });
    }
    let resid = projection_residual(prev_variates, target)?;
    let fit = sparse_regression(x0, &resid, lambda, n_lambda)?;
    Ok(Expressed {
        lambda: Some(fit.lambda),
        coefficients: fit.beta,
    })
}

fn cross_covariance_start(xd: &Mat, yd: &Mat) -> Result<Vector> {
    let sxy = sample_covariance(xd, yd)?;
    let (_, s, v) = leading_singular(&sxy, 1)?;
    if !(s[0] > 0.0) {
        return Err(Error::ZeroAssociation("cross-covariance vanished".into()));
    }
    Ok(v.column(0).to_owned())
}

// Singular values of Σ̂xy, used for rank selection when the ridge is
// unavailable.
fn cross_covariance_spectrum(x0: &Mat, y0: &Mat, rmax: usize) -> Result<Vec<f64>> {
    let sxy = sample_covariance(x0, y0)?;
    let (_, s, _) = leading_singular(&sxy, rmax)?;
    Ok(s.to_vec())
}

/// Fits sparse canonical vectors to `x` (n×p) and `y` (n×q).
pub fn sar_fit(x: &Mat, y: &Mat, config: &SarConfig) -> Result<SarModel> {
    config.validate()?;
    let n = x.nrows();
    if y.nrows() != n {
        return Err(Error::Shape(format!("X has {n} rows, Y has {}", y.nrows())));
    }
    if n < 3 {
        return Err(Error::Degenerate(format!("SAR needs at least 3 observations, got {n}")));
    }
    let (x0, x_means) = center_columns(x)?;
    let (y0, y_means) = center_columns(y)?;
    let (p, q) = (x.ncols(), y.ncols());
    let rmax = p.min(q).min(n - 1);

    let wanted = match config.rank {
        RankChoice::Fixed(r) => {
            if r == 0 || r > p.min(q) {
                return Err(Error::Contract(format!("rank must lie in 1..={}, got {r}", p.min(q))));
            }
            r
        }
        RankChoice::Auto => rmax,
    };

    let need_ridge =
        config.initialization == Initialization::CanonicalRidge || config.rank == RankChoice::Auto;
    let mut ridge_params = None;
    let mut ridge_model: Option<CcaModel> = None;
    if need_ridge {
        let params = match config.ridge {
            Some(p) => Ok(p),
            None => {
                let grid = default_ridge_grid();
                ridge_cv(&x0, &y0, &grid, &grid, config.ridge_folds, config.seed)
            }
        };
        if let Ok(params) = params {
            ridge_params = Some(params);
            ridge_model = canonical_ridge(&x0, &y0, params, wanted.min(rmax).max(1)).ok();
        }
    }

    let (rank, rank_selection) = match config.rank {
        RankChoice::Fixed(r) => (r, None),
        RankChoice::Auto => {
            let spectrum = match &ridge_model {
                Some(m) => m.rho.to_vec(),
                None => cross_covariance_spectrum(&x0, &y0, rmax)?,
            };
            let sel = select_rank(&spectrum[..rmax.min(spectrum.len())])?;
            (sel.rank, Some(sel))
        }
    };

    let initialization = match (&ridge_model, config.initialization) {
        (Some(m), Initialization::CanonicalRidge) if m.b.ncols() >= rank => {
            Initialization::CanonicalRidge
        }
        _ => Initialization::CrossCovariance,
    };

    let x0_design = LassoDesign::new(&x0)?;
    let y0_design = LassoDesign::new(&y0)?;
    let mut a_cols: Vec<Vector> = Vec::with_capacity(rank);
    let mut b_cols: Vec<Vector> = Vec::with_capacity(rank);
    let mut u_cols: Vec<Vector> = Vec::with_capacity(rank);
    let mut v_cols: Vec<Vector> = Vec::with_capacity(rank);
    let mut pairs: Vec<PairSummary> = Vec::with_capacity(rank);
    let mut xd = x0.clone();
    let mut yd = y0.clone();

    for l in 0..rank {
        if l > 0 {
            let (u_prev, v_prev) = (&u_cols[l - 1], &v_cols[l - 1]);
            let x_next = deflate(&xd, u_prev)?;
            let y_next = deflate(&yd, v_prev)?;
            let last = pairs.last_mut().expect("previous pair");
            last.deflation_residual_x = Some(deflation_residual(&xd, &x_next, u_prev));
            last.deflation_residual_y = Some(deflation_residual(&yd, &y_next, v_prev));
            xd = x_next;
            yd = y_next;
        }

        let b_init = match (initialization, &ridge_model) {
            (Initialization::CanonicalRidge, Some(m)) => m.b.column(l).to_owned(),
            _ => cross_covariance_start(&xd, &yd)?,
        };
        let lambda = config.lambda_for(l);
        let fit = sar_pair_inner(&xd, &yd, &b_init, config, lambda)?;

        let prev_u = stack_columns(n, &u_cols);
        let prev_v = stack_columns(n, &v_cols);
        let ea = express_in_original(&fit.u, &fit.a, &prev_u, &x0_design, lambda, config.n_lambda)?;
        let eb = express_in_original(&fit.v, &fit.b, &prev_v, &y0_design, lambda, config.n_lambda)?;
        let u_l = variate(&x0, &ea.coefficients)?;
        let v_l = variate(&y0, &eb.coefficients)?;

        pairs.push(PairSummary {
            iterations: fit.iterations,
            converged: fit.converged,
            lambda_a: fit.lambda_a,
            lambda_b: fit.lambda_b,
            lambda_a_final: ea.lambda,
            lambda_b_final: eb.lambda,
            deflation_residual_x: None,
            deflation_residual_y: None,
            trace: fit.trace,
        });
        a_cols.push(ea.coefficients);
        b_cols.push(eb.coefficients);
        u_cols.push(u_l);
        v_cols.push(v_l);
    }

    let a = stack_columns(p, &a_cols);
    let b = stack_columns(q, &b_cols);
    let u = x0.dot(&a);
    let v = y0.dot(&b);
    let rho_hat = Vector::from_iter(
        u.axis_iter(Axis(1))
            .zip(v.axis_iter(Axis(1)))
            .map(|(ui, vi)| correlation(ui, vi)),
    );
    Ok(SarModel {
        a,
        b,
        u,
        v,
        rho_hat,
        pairs,
        rank_selection,
        ridge_params,
        initialization,
        x_means,
        y_means,
    })
}

fn stack_columns(rows: usize, cols: &[Vector]) -> Mat {
    let mut out = Mat::zeros((rows, cols.len()));
    for (j, c) in cols.iter().enumerate() {
        out.column_mut(j).assign(c);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cca::classical_cca;
    use crate::linalg::{least_squares, principal_subspace_angle};
    use crate::seeded_rng;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(rows: usize, cols: usize, seed: u64) -> Mat {
        let mut rng = seeded_rng(seed);
        Mat::from_shape_fn((rows, cols), |_| StandardNormal.sample(&mut rng))
    }

    fn coupled(n: usize, seed: u64) -> (Mat, Mat) {
        let x = gaussian(n, 4, seed);
        let mut y = gaussian(n, 6, seed + 1);
        for i in 0..n {
            y[[i, 0]] += 0.9 * x[[i, 0]];
            y[[i, 1]] += 0.6 * x[[i, 1]];
        }
        (x, y)
    }

    fn exact_config() -> SarConfig {
        SarConfig {
            epsilon: 1e-10,
            max_iterations: 5000,
            rank: RankChoice::Fixed(2),
            lambda_overrides: Some(vec![0.0]),
            ridge: Some(RidgeParams { k1: 0.1, k2: 0.1 }),
            ..SarConfig::default()
        }
    }

    #[test]
    fn convergence_check_examples() {
        let a = array![1.0, 2.0, -0.5];
        let b = array![0.3, 0.1];
        assert!(convergence_check(&a, &a, &b, &b, 1e-12));
        assert!(convergence_check(&a, &(-&a), &b, &(-&b), 1e-12));
        let e1 = array![1.0, 0.0];
        let e2 = array![0.0, 1.0];
        assert!(!convergence_check(&e1, &e2, &e1, &e1, 1e-3));
        assert!(!convergence_check(&e1, &e1, &e1, &e2, 1e-3));
    }

    #[test]
    fn deflation_examples() {
        let w = array![1.0, 1.0, 0.0, 0.0];
        let m = array![[1.0, 0.0], [-1.0, 0.0], [0.0, 2.0], [3.0, 1.0]];
        let mut orth = m.clone();
        orth[[3, 0]] = 0.0;
        orth[[3, 1]] = 0.0;
        let out = deflate(&orth, &w).unwrap();
        assert_eq!(out, orth);

        let self_col = w.clone().insert_axis(Axis(1));
        let out = deflate(&self_col, &w).unwrap();
        assert!(out.iter().all(|v| v.abs() < 1e-15));

        let m = gaussian(30, 5, 3);
        let w = gaussian(30, 1, 4).column(0).to_owned();
        let once = deflate(&m, &w).unwrap();
        let twice = deflate(&once, &w).unwrap();
        for (a, b) in once.iter().zip(twice.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
        let norm = m.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(once.t().dot(&w).iter().all(|v| v.abs() <= 1e-8 * norm));

        assert!(matches!(deflate(&m, &Vector::zeros(30)), Err(Error::Degenerate(_))));
    }

    #[test]
    fn express_base_case_and_unpenalised_limit() {
        let x = gaussian(40, 3, 5);
        let design = LassoDesign::new(&x).unwrap();
        let a_star = array![0.2, -0.4, 0.1];
        let out = express_in_original(&Vector::zeros(40), &a_star, &Mat::zeros((40, 0)), &design, None, 20).unwrap();
        assert_eq!(out.coefficients, a_star);
        assert_eq!(out.lambda, None);

        let prev = gaussian(40, 1, 6);
        let raw = gaussian(40, 1, 7).column(0).to_owned();
        let target = projection_residual(&prev, &raw).unwrap();
        let out = express_in_original(&target, &a_star, &prev, &design, Some(0.0), 20).unwrap();
        let ols = least_squares(&x, &target).unwrap();
        for (a, b) in out.coefficients.iter().zip(ols.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-8);
        }

        let dup = ndarray::concatenate![Axis(1), prev, prev];
        assert!(matches!(
            express_in_original(&target, &a_star, &dup, &design, None, 20),
            Err(Error::RankDeficient(_))
        ));
    }

    #[test]
    fn shared_column_is_found_immediately() {
        let x = gaussian(60, 4, 8);
        let mut y = gaussian(60, 5, 9);
        y.column_mut(0).assign(&x.column(0));
        let mut e1 = Vector::zeros(5);
        e1[0] = 1.0;
        let cfg = SarConfig::default();
        let fit = sar_pair_inner(&x, &y, &e1, &cfg, Some(0.0)).unwrap();
        assert!(fit.converged);
        assert!(fit.iterations <= 2);
        assert_abs_diff_eq!(fit.a[0].abs(), 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(fit.b[0].abs(), 1.0, epsilon = 1e-10);

        let b0 = Vector::from_elem(4, 0.5);
        let fit = sar_pair_inner(&x, &x, &b0, &cfg, Some(0.0)).unwrap();
        assert!(fit.converged && fit.iterations <= 2);
    }

    #[test]
    fn zero_penalty_first_pair_matches_classical() {
        let (x, y) = coupled(200, 10);
        let cca = classical_cca(&x, &y, 1).unwrap();
        let (x0, _) = center_columns(&x).unwrap();
        let (y0, _) = center_columns(&y).unwrap();
        let b0 = Vector::ones(6);
        let fit = sar_pair_inner(&x0, &y0, &b0, &exact_config(), Some(0.0)).unwrap();
        assert!(fit.converged);
        let ta = principal_subspace_angle(&fit.a.insert_axis(Axis(1)), &cca.a).unwrap();
        let tb = principal_subspace_angle(&fit.b.insert_axis(Axis(1)), &cca.b).unwrap();
        assert!(ta <= 1e-6 && tb <= 1e-6, "{ta} {tb}");
    }

    #[test]
    fn zero_penalty_fit_spans_classical_subspace() {
        let (x, y) = coupled(200, 11);
        let cca = classical_cca(&x, &y, 2).unwrap();
        let model = sar_fit(&x, &y, &exact_config()).unwrap();
        assert!(model.pairs.iter().all(|p| p.converged));
        let ta = principal_subspace_angle(&model.a, &cca.a).unwrap();
        let tb = principal_subspace_angle(&model.b, &cca.b).unwrap();
        assert!(ta <= 1e-6 && tb <= 1e-6, "{ta} {tb}");
    }

    #[test]
    fn bic_fit_is_sparse_and_well_formed() {
        let (x, y) = coupled(80, 12);
        let cfg = SarConfig {
            rank: RankChoice::Fixed(2),
            ..SarConfig::default()
        };
        let model = sar_fit(&x, &y, &cfg).unwrap();
        assert_eq!(model.a.dim(), (4, 2));
        assert_eq!(model.b.dim(), (6, 2));
        assert_abs_diff_eq!(l2_norm(model.a.column(0)), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(l2_norm(model.b.column(0)), 1.0, epsilon = 1e-12);
        assert!(model.b.iter().any(|v| *v == 0.0));
        let (x0, _) = center_columns(&x).unwrap();
        assert_eq!(model.u, x0.dot(&model.a));
        let first = &model.pairs[0];
        assert!(first.deflation_residual_x.unwrap() <= 1e-8);
        assert!(first.deflation_residual_y.unwrap() <= 1e-8);
        assert!(model.pairs[1].deflation_residual_x.is_none());
        assert!(model.rho_hat[0] > 0.5);
    }

    #[test]
    fn fits_are_deterministic() {
        let (x, y) = coupled(60, 13);
        let cfg = SarConfig::default();
        let a = sar_fit(&x, &y, &cfg).unwrap();
        let b = sar_fit(&x, &y, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.rank_selection.is_some());
    }

    #[test]
    fn fallback_initialisation_works() {
        let (x, y) = coupled(60, 14);
        let cfg = SarConfig {
            rank: RankChoice::Fixed(2),
            initialization: Initialization::CrossCovariance,
            ..SarConfig::default()
        };
        let model = sar_fit(&x, &y, &cfg).unwrap();
        assert_eq!(model.initialization, Initialization::CrossCovariance);
        assert!(model.ridge_params.is_none());
        assert_eq!(model.rank(), 2);
    }

    #[test]
    fn zero_response_aborts_with_zero_association() {
        let x = gaussian(20, 3, 15);
        let design = LassoDesign::new(&x).unwrap();
        assert!(matches!(
            sparse_regression(&design, &Vector::zeros(20), None, 10),
            Err(Error::ZeroAssociation(_))
        ));
        let y = Mat::zeros((20, 2));
        assert!(matches!(
            sar_pair_inner(&x, &y, &array![1.0, 0.0], &SarConfig::default(), None),
            Err(Error::ZeroAssociation(_))
        ));
    }

    #[test]
    fn penalty_above_lambda_max_recovers_nonzero_fit() {
        let x = gaussian(30, 4, 16);
        let y = gaussian(30, 1, 17).column(0).to_owned();
        let design = LassoDesign::new(&x).unwrap();
        let huge = design.lambda_max(&y) * 10.0;
        let fit = sparse_regression(&design, &y, Some(huge), 20).unwrap();
        assert!(!fit.is_zero());
        let path = design.path(&y, 20).unwrap();
        assert_eq!(fit.lambda, path.values()[1]);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let (x, y) = coupled(30, 18);
        for cfg in [
            SarConfig { epsilon: 0.0, ..SarConfig::default() },
            SarConfig { max_iterations: 0, ..SarConfig::default() },
            SarConfig { rank: RankChoice::Fixed(5), ..SarConfig::default() },
            SarConfig { lambda_overrides: Some(vec![]), ..SarConfig::default() },
        ] {
            assert!(matches!(sar_fit(&x, &y, &cfg), Err(Error::Contract(_))));
        }
        assert!(sar_fit(&x.slice(ndarray::s![..2, ..]).to_owned(), &y.slice(ndarray::s![..2, ..]).to_owned(), &SarConfig::default()).is_err());
    }
}

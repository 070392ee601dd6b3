//! L1-penalised least squares by cyclic coordinate descent.
//!
//! The objective is `‖y − Xβ‖² + λ Σ|βⱼ|` with no `1/n` or `1/2` factor, so
//! the soft threshold sits at `λ/2` and the smallest penalty giving the zero
//! solution is `λ_max = 2 maxⱼ |xⱼᵀy|`. Predictors are used as given (callers
//! centre them); no internal standardisation takes place.

use std::sync::OnceLock;

use ndarray::Axis;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, ensure_finite, qr_thin, symmetric_eigen, Mat, Vector};

/// Hard cap on coordinate-descent sweeps.
pub const MAX_SWEEPS: usize = 10_000;
/// Relative tolerance on the largest coefficient change within a sweep.
pub const CHANGE_TOLERANCE: f64 = 1e-7;
/// Default number of penalties on a path.
pub const DEFAULT_PATH_LENGTH: usize = 50;
/// Ratio between the last and first penalty of a path.
pub const PATH_FLOOR: f64 = 1e-3;
/// Fraction of `‖y‖²` explained at which [`LassoDesign::fit_path_truncated`]
/// stops.
pub const SATURATION_R2: f64 = 0.999;

// Tolerance (relative to ‖y‖) the final KKT verification enforces, kept
// below the 1e-6 that callers are promised.
const KKT_TOLERANCE: f64 = 2e-7;
// Relative size of an `R` diagonal entry (singular value) below which the
// zero-penalty solve treats the design as rank deficient.
const RANK_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoSolution {
    pub beta: Vector,
    pub lambda: f64,
    /// `‖y − Xβ‖²`.
    pub rss: f64,
    /// Number of nonzero coefficients.
    pub active_count: usize,
    pub sweeps: usize,
}

impl LassoSolution {
    pub fn is_zero(&self) -> bool {
        self.active_count == 0
    }
}

/// Strictly decreasing penalty grid, starting at `λ_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaPath {
    values: Vec<f64>,
}

impl LambdaPath {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Geometric grid from `lambda_max` down to `lambda_max * PATH_FLOOR`.
    pub fn geometric(lambda_max: f64, n_lambda: usize) -> Result<Self> {
        if n_lambda < 2 {
            return Err(Error::Contract(format!(
                "a penalty path needs at least 2 values, got {n_lambda}"
            )));
        }
        if !(lambda_max.is_finite() && lambda_max >= 0.0) {
            return Err(Error::Contract(format!("invalid lambda_max {lambda_max}")));
        }
        if lambda_max == 0.0 {
            return Ok(Self { values: vec![0.0] });
        }
        let step = PATH_FLOOR.ln() / (n_lambda - 1) as f64;
        let mut values: Vec<f64> = (0..n_lambda)
            .map(|i| lambda_max * (step * i as f64).exp())
            .collect();
        values[0] = lambda_max;
        values[n_lambda - 1] = lambda_max * PATH_FLOOR;
        Ok(Self { values })
    }

    /// Wraps an explicit grid; must be non-empty and strictly decreasing.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Contract("empty penalty path".into()));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0))
            || values.windows(2).any(|w| w[1] >= w[0])
        {
            return Err(Error::Contract(
                "penalty path must be finite, nonnegative and strictly decreasing".into(),
            ));
        }
        Ok(Self { values })
    }
}

/// A fixed design matrix with its Gram matrix, reusable across responses.
pub struct LassoDesign<'a> {
    x: &'a Mat,
    gram: Mat,
    qr: OnceLock<Option<(Mat, Mat)>>,
}

impl<'a> LassoDesign<'a> {
    pub fn new(x: &'a Mat) -> Result<Self> {
        ensure_finite(x, "lasso design")?;
        Ok(Self {
            x,
            gram: x.t().dot(x),
            qr: OnceLock::new(),
        })
    }

    pub fn x(&self) -> &Mat {
        self.x
    }

    fn check_response(&self, y: &Vector) -> Result<()> {
        if y.len() != self.x.nrows() {
            return Err(Error::Shape(format!(
                "design has {} rows, response has {}",
                self.x.nrows(),
                y.len()
            )));
        }
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::Contract("response contains non-finite entries".into()));
        }
        Ok(())
    }

    /// `2 maxⱼ |xⱼᵀy|`.
    pub fn lambda_max(&self, y: &Vector) -> f64 {
        let xty = self.x.t().dot(y);
        2.0 * xty.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
    }

    pub fn path(&self, y: &Vector, n_lambda: usize) -> Result<LambdaPath> {
        self.check_response(y)?;
        LambdaPath::geometric(self.lambda_max(y), n_lambda)
    }

    pub fn fit(&self, y: &Vector, lambda: f64) -> Result<LassoSolution> {
        self.fit_from(y, lambda, None)
    }

    /// Fits at `lambda`, warm-starting coordinate descent from `init`.
    pub fn fit_from(&self, y: &Vector, lambda: f64, init: Option<&Vector>) -> Result<LassoSolution> {
        self.check_response(y)?;
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::Contract(format!("penalty must be nonnegative, got {lambda}")));
        }
        let xty = self.x.t().dot(y);
        if lambda == 0.0 {
            if let Some(beta) = self.exact_least_squares(y) {
                return Ok(self.solution(y, beta, 0.0, 0));
            }
        }
        let mut beta = match init {
            Some(b) if b.len() == self.x.ncols() => b.clone(),
            _ => Vector::zeros(self.x.ncols()),
        };
        let sweeps = self.descend(&xty, y, lambda, &mut beta, None)?;
        Ok(self.solution(y, beta, lambda, sweeps))
    }

    /// Like [`fit_from`](Self::fit_from) but also returns the objective value
    /// after every full sweep.
    pub fn fit_traced(&self, y: &Vector, lambda: f64) -> Result<(LassoSolution, Vec<f64>)> {
        self.check_response(y)?;
        let xty = self.x.t().dot(y);
        let mut beta = Vector::zeros(self.x.ncols());
        let mut trace = vec![objective(self.x, y, &beta, lambda)];
        let sweeps = self.descend(&xty, y, lambda, &mut beta, Some(&mut trace))?;
        Ok((self.solution(y, beta, lambda, sweeps), trace))
    }

    /// Solutions along `path`, each warm-started from the previous one.
    pub fn fit_path(&self, y: &Vector, path: &LambdaPath) -> Result<Vec<LassoSolution>> {
        self.check_response(y)?;
        let mut out: Vec<LassoSolution> = Vec::with_capacity(path.len());
        for &lambda in path.values() {
            let init = out.last().map(|s| &s.beta);
            out.push(self.fit_from(y, lambda, init)?);
        }
        Ok(out)
    }

    /// Warm-started path that stops early once a fit explains at least
    /// [`SATURATION_R2`] of `‖y‖²`, uses `n − 1` or more predictors, or fails
    /// to converge. Fits past such a point interpolate the response and carry
    /// no information for model selection.
    pub fn fit_path_truncated(&self, y: &Vector, path: &LambdaPath) -> Result<Vec<LassoSolution>> {
        self.check_response(y)?;
        let n = self.x.nrows();
        let tss = y.dot(y);
        let mut out: Vec<LassoSolution> = Vec::with_capacity(path.len());
        for &lambda in path.values() {
            let init = out.last().map(|s| &s.beta);
            let fit = match self.fit_from(y, lambda, init) {
                Ok(f) => f,
                Err(Error::Convergence { .. }) if !out.is_empty() => break,
                Err(e) => return Err(e),
            };
            let saturated = fit.rss <= (1.0 - SATURATION_R2) * tss || fit.active_count + 1 >= n;
            out.push(fit);
            if saturated {
                break;
            }
        }
        Ok(out)
    }

    /// Path solution with minimal BIC.
    pub fn bic_select(&self, y: &Vector, path: &LambdaPath) -> Result<LassoSolution> {
        if path.is_empty() {
            return Err(Error::Contract("empty penalty path".into()));
        }
        let fits = self.fit_path(y, path)?;
        let best = bic_argmin(&fits, y);
        Ok(fits.into_iter().nth(best).expect("index from same list"))
    }

    fn exact_least_squares(&self, y: &Vector) -> Option<Vector> {
        let qr = self.qr.get_or_init(|| {
            if self.x.nrows() > self.x.ncols() {
                qr_thin(self.x).ok()
            } else {
                None
            }
        });
        if self.x.nrows() <= self.x.ncols() {
            return None;
        }
        let Some((q, r)) = qr.as_ref() else {
            return self.minimum_norm_least_squares(y);
        };
        let k = r.nrows();
        let diag = (0..k).map(|i| r[[i, i]].abs());
        let (lo, hi) = diag.fold((f64::INFINITY, 0.0_f64), |(lo, hi), d| (lo.min(d), hi.max(d)));
        if lo <= RANK_TOLERANCE * hi {
            return self.minimum_norm_least_squares(y);
        }
        let qty = q.t().dot(y);
        let mut beta = Vector::zeros(k);
        for i in (0..k).rev() {
            let mut acc = qty[i];
            for j in (i + 1)..k {
                acc -= r[[i, j]] * beta[j];
            }
            beta[i] = acc / r[[i, i]];
        }
        Some(beta)
    }

    // Least-squares solution orthogonal to the null space of `X`, from the
    // eigen decomposition of the Gram matrix.
    fn minimum_norm_least_squares(&self, y: &Vector) -> Option<Vector> {
        let eig = symmetric_eigen(&self.gram).ok()?;
        let top = eig.values.iter().fold(0.0_f64, |a, v| a.max(*v));
        let proj = eig.vectors.t().dot(&self.x.t().dot(y));
        let scaled = Vector::from_shape_fn(proj.len(), |i| {
            let l = eig.values[i];
            if l > 1e-12 * top {
                proj[i] / l
            } else {
                0.0
            }
        });
        Some(eig.vectors.dot(&scaled))
    }

    // Solves `G_SS z = (Xᵀy)_S − (λ/2) s` for a signed support.
    fn stationary_point(&self, xty: &Vector, lambda: f64, support: &[(usize, f64)]) -> Option<Vec<f64>> {
        let k = support.len();
        let g = Mat::from_shape_fn((k, k), |(a, b)| self.gram[[support[a].0, support[b].0]]);
        let l = cholesky(&g).ok()?;
        let mut z: Vec<f64> = support.iter().map(|&(j, s)| xty[j] - 0.5 * lambda * s).collect();
        for i in 0..k {
            for m in 0..i {
                z[i] -= l[[i, m]] * z[m];
            }
            z[i] /= l[[i, i]];
        }
        for i in (0..k).rev() {
            for m in (i + 1)..k {
                z[i] -= l[[m, i]] * z[m];
            }
            z[i] /= l[[i, i]];
        }
        z.iter().all(|v| v.is_finite()).then_some(z)
    }

    // Primal active-set iteration started from `start`: solve on the signed
    // support, step back to the first sign change when one occurs, otherwise
    // add the worst KKT violator. `None` if it stalls or the support grows
    // to `n` columns.
    fn active_set(&self, xty: &Vector, lambda: f64, start: &Vector, tol: f64) -> Option<Vector> {
        let p = start.len();
        let half = 0.5 * lambda;
        let mut beta = start.clone();
        let mut support: Vec<(usize, f64)> =
            (0..p).filter(|&j| beta[j] != 0.0).map(|j| (j, beta[j].signum())).collect();
        for _ in 0..(4 * p + 10) {
            if support.is_empty() {
                beta.fill(0.0);
            } else {
                if support.len() >= self.x.nrows() {
                    return None;
                }
                let z = self.stationary_point(xty, lambda, &support)?;
                // Largest step toward `z` that keeps every sign.
                let mut step = 1.0;
                let mut blocking = None;
                for (idx, (&(j, s), &zj)) in support.iter().zip(&z).enumerate() {
                    if zj * s <= 0.0 {
                        let t = beta[j] / (beta[j] - zj);
                        if t < step {
                            step = t.max(0.0);
                            blocking = Some(idx);
                        }
                    }
                }
                for (&(j, _), &zj) in support.iter().zip(&z) {
                    beta[j] += step * (zj - beta[j]);
                }
                if let Some(idx) = blocking {
                    beta[support[idx].0] = 0.0;
                    support.remove(idx);
                    continue;
                }
            }
            let grad = xty - &self.gram.dot(&beta);
            if kkt_violation(&beta, &grad, lambda) <= tol {
                return Some(beta);
            }
            let entering = (0..p)
                .filter(|&j| beta[j] == 0.0 && !support.iter().any(|&(i, _)| i == j))
                .map(|j| (j, grad[j].abs() - half))
                .filter(|&(_, v)| v > 0.0)
                .max_by(|a, b| a.1.total_cmp(&b.1))?;
            support.push((entering.0, grad[entering.0].signum()));
        }
        None
    }

    fn solution(&self, y: &Vector, beta: Vector, lambda: f64, sweeps: usize) -> LassoSolution {
        let resid = y - &self.x.dot(&beta);
        LassoSolution {
            active_count: beta.iter().filter(|b| **b != 0.0).count(),
            rss: resid.dot(&resid),
            beta,
            lambda,
            sweeps,
        }
    }

    // Cyclic coordinate descent with covariance updates. `grad` tracks
    // Xᵀ(y − Xβ). After a full sweep that changes something we iterate on
    // the active set alone until it settles, then sweep everything again.
    fn descend(
        &self,
        xty: &Vector,
        y: &Vector,
        lambda: f64,
        beta: &mut Vector,
        mut trace: Option<&mut Vec<f64>>,
    ) -> Result<usize> {
        let p = beta.len();
        let half = 0.5 * lambda;
        let mut grad = xty - &self.gram.dot(&*beta);
        let y_norm = y.dot(y).sqrt();
        let mut change_tol = CHANGE_TOLERANCE;
        let mut sweeps: usize = 0;
        let mut full_sweeps: usize = 0;
        let mut next_attempt: usize = 1;

        let update = |j: usize, beta: &mut Vector, grad: &mut Vector| -> f64 {
            let gjj = self.gram[[j, j]];
            if gjj <= 0.0 {
                return 0.0;
            }
            let old = beta[j];
            let z = grad[j] + gjj * old;
            let new = if z > half {
                (z - half) / gjj
            } else if z < -half {
                (z + half) / gjj
            } else {
                0.0
            };
            let delta = new - old;
            if delta != 0.0 {
                beta[j] = new;
                grad.scaled_add(-delta, &self.gram.column(j));
            }
            delta.abs()
        };

        loop {
            let mut max_change = 0.0_f64;
            for j in 0..p {
                max_change = max_change.max(update(j, beta, &mut grad));
            }
            sweeps += 1;
            if let Some(t) = trace.as_deref_mut() {
                t.push(objective(self.x, y, beta, lambda));
            }
            let scale = 1.0 + beta.iter().fold(0.0_f64, |a, v| a.max(v.abs()));

            // Periodically hand the current iterate to the exact
            // active-set solver; CD carries on if it fails.
            full_sweeps += 1;
            if max_change > change_tol * scale && full_sweeps >= next_attempt {
                next_attempt = 2 * full_sweeps;
                if let Some(candidate) = self.active_set(xty, lambda, beta, KKT_TOLERANCE * y_norm) {
                    *beta = candidate;
                    if let Some(t) = trace.as_deref_mut() {
                        t.push(objective(self.x, y, beta, lambda));
                    }
                    return Ok(sweeps);
                }
            }

            if max_change <= change_tol * scale {
                // Refresh the gradient to shed accumulated drift, then verify KKT.
                grad = xty - &self.gram.dot(&*beta);
                if kkt_violation(beta, &grad, lambda) <= KKT_TOLERANCE * y_norm {
                    return Ok(sweeps);
                }
                change_tol *= 0.1;
            } else {
                let active: Vec<usize> = (0..p).filter(|&j| beta[j] != 0.0).collect();
                loop {
                    if sweeps >= MAX_SWEEPS {
                        return Err(Error::Convergence { iterations: sweeps });
                    }
                    let mut inner = 0.0_f64;
                    for &j in &active {
                        inner = inner.max(update(j, beta, &mut grad));
                    }
                    sweeps += 1;
                    if let Some(t) = trace.as_deref_mut() {
                        t.push(objective(self.x, y, beta, lambda));
                    }
                    let scale = 1.0 + beta.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
                    if inner <= change_tol * scale {
                        break;
                    }
                }
            }
            if sweeps >= MAX_SWEEPS {
                return Err(Error::Convergence { iterations: sweeps });
            }
        }
    }
}

/// Largest violation of the lasso optimality conditions given
/// `grad = Xᵀ(y − Xβ)`.
pub fn kkt_violation(beta: &Vector, grad: &Vector, lambda: f64) -> f64 {
    beta.iter()
        .zip(grad.iter())
        .map(|(&b, &g)| {
            if b != 0.0 {
                (2.0 * g - lambda * b.signum()).abs()
            } else {
                ((2.0 * g).abs() - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// `‖y − Xβ‖² + λ‖β‖₁`.
pub fn objective(x: &Mat, y: &Vector, beta: &Vector, lambda: f64) -> f64 {
    let r = y - &x.dot(beta);
    r.dot(&r) + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
}

/// Gaussian profile BIC `n log(rss/n) + k log n`, with `rss` floored at
/// `1e-12 ‖y‖²`.
pub fn bic(rss: f64, active: usize, n: usize, y_sq_norm: f64) -> f64 {
    let n_f = n as f64;
    let floor = (1e-12 * y_sq_norm).max(f64::MIN_POSITIVE);
    n_f * (rss.max(floor) / n_f).ln() + active as f64 * n_f.ln()
}

/// Index of the BIC-minimal fit; ties go to the earlier (larger-penalty) fit.
pub fn bic_argmin(fits: &[LassoSolution], y: &Vector) -> usize {
    let n = y.len();
    let ysq = y.dot(y);
    let mut best = 0;
    let mut best_score = f64::INFINITY;
    for (i, s) in fits.iter().enumerate() {
        let score = bic(s.rss, s.active_count, n, ysq);
        if score < best_score {
            best = i;
            best_score = score;
        }
    }
    best
}

pub fn lasso_fit(x: &Mat, y: &Vector, lambda: f64) -> Result<LassoSolution> {
    LassoDesign::new(x)?.fit(y, lambda)
}

pub fn lambda_path(x: &Mat, y: &Vector, n_lambda: usize) -> Result<LambdaPath> {
    LassoDesign::new(x)?.path(y, n_lambda)
}

pub fn bic_select(x: &Mat, y: &Vector, path: &LambdaPath) -> Result<LassoSolution> {
    if x.nrows() < 2 {
        return Err(Error::Degenerate("BIC selection needs at least 2 observations".into()));
    }
    LassoDesign::new(x)?.bic_select(y, path)
}

/// Column-wise sums of squares, mostly useful for diagnostics.
pub fn column_sq_norms(x: &Mat) -> Vector {
    x.map_axis(Axis(0), |c| c.dot(&c))
}

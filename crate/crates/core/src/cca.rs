//! Classical canonical correlation analysis, its population counterpart and
//! the canonical ridge.
//!
//! All three share one construction: whiten each block by the inverse square
//! root of its (possibly ridge-shifted) covariance, take the leading singular
//! pairs of the whitened cross-covariance `K = Wx Σxy Wy`, and map them back
//! with `A = Wx U`, `B = Wy V`. The singular values of `K` are the canonical
//! correlations.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    center_columns, cholesky, correlation, sample_covariance, symmetric_eigen, symmetrize,
    EigenResult, Mat, Vector,
};
use crate::seeded_rng;

/// Eigenvalues at or below this fraction of the largest one make a
/// covariance block singular.
pub const SINGULAR_TOLERANCE: f64 = 1e-10;

/// Canonical vectors (as columns) and correlations, strongest pair first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcaModel {
    pub a: Mat,
    pub b: Mat,
    pub rho: Vector,
}

impl CcaModel {
    pub fn rank(&self) -> usize {
        self.rho.len()
    }
}

/// Diagonal loadings of the canonical ridge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RidgeParams {
    pub k1: f64,
    pub k2: f64,
}

impl RidgeParams {
    pub fn new(k1: f64, k2: f64) -> Result<Self> {
        if !(k1.is_finite() && k2.is_finite() && k1 >= 0.0 && k2 >= 0.0) {
            return Err(Error::Contract(format!(
                "ridge penalties must be finite and nonnegative, got ({k1}, {k2})"
            )));
        }
        Ok(Self { k1, k2 })
    }
}

/// Ten log-spaced values on `[1e-3, 1e1]`.
pub fn default_ridge_grid() -> Vec<f64> {
    (0..10).map(|i| 10f64.powf(-3.0 + 4.0 * i as f64 / 9.0)).collect()
}

fn inverse_sqrt(eig: &EigenResult, shift: f64, block: &str) -> Result<Mat> {
    let top = eig.values[0] + shift;
    let bottom = eig.values[eig.values.len() - 1] + shift;
    if !(top > 0.0) || bottom <= SINGULAR_TOLERANCE * top {
        return Err(Error::Singular(format!(
            "{block} covariance is not invertible (smallest eigenvalue {bottom:e})"
        )));
    }
    let d = eig.values.mapv(|l| 1.0 / (l + shift).sqrt());
    let scaled = &eig.vectors * &d.view().insert_axis(ndarray::Axis(0));
    Ok(symmetrize(&scaled.dot(&eig.vectors.t())))
}

/// Leading `r` singular triplets of `k` (p×q), `r ≤ min(p, q)`.
///
/// Left vectors come from the eigen decomposition of the smaller Gram
/// matrix; partners for (near-)zero singular values are completed from the
/// other Gram matrix so that every returned column is a unit vector.
pub(crate) fn leading_singular(k: &Mat, r: usize) -> Result<(Mat, Vector, Mat)> {
    let (p, q) = k.dim();
    if p > q {
        let (v, s, u) = leading_singular(&k.t().to_owned(), r)?;
        return Ok((u, s, v));
    }
    let gram = symmetrize(&k.dot(&k.t()));
    let eig = symmetric_eigen(&gram)?;
    let scale = eig.values[0].max(0.0).sqrt();
    let mut u = Mat::zeros((p, r));
    let mut s = Vector::zeros(r);
    let mut v = Mat::zeros((q, r));
    let mut missing = Vec::new();
    for i in 0..r {
        let ui = eig.vectors.column(i);
        u.column_mut(i).assign(&ui);
        let si = eig.values[i].max(0.0).sqrt();
        s[i] = si;
        if si > 1e-10 * scale && si > 0.0 {
            let vi = k.t().dot(&ui);
            let norm = vi.dot(&vi).sqrt();
            v.column_mut(i).assign(&(vi / norm));
        } else {
            missing.push(i);
        }
    }
    if !missing.is_empty() {
        let other = symmetric_eigen(&symmetrize(&k.t().dot(k)))?;
        let mut taken: Vec<usize> = (0..r).filter(|i| !missing.contains(i)).collect();
        let mut candidates = other.vectors.columns().into_iter();
        for &i in &missing {
            loop {
                let c = candidates
                    .next()
                    .ok_or_else(|| Error::Contract("could not complete singular basis".into()))?;
                let mut w = c.to_owned();
                for &t in &taken {
                    let vt = v.column(t);
                    let proj = vt.dot(&w);
                    w.scaled_add(-proj, &vt);
                }
                let norm = w.dot(&w).sqrt();
                if norm > 0.5 {
                    v.column_mut(i).assign(&(w / norm));
                    taken.push(i);
                    break;
                }
            }
        }
    }
    Ok((u, s, v))
}

// Makes the largest-magnitude entry of every column of `a` positive,
// flipping the partner column of `b` alongside.
fn fix_signs(a: &mut Mat, b: &mut Mat) {
    for i in 0..a.ncols() {
        let mut best = 0;
        for j in 0..a.nrows() {
            if a[[j, i]].abs() > a[[best, i]].abs() {
                best = j;
            }
        }
        if a[[best, i]] < 0.0 {
            a.column_mut(i).mapv_inplace(|v| -v);
            b.column_mut(i).mapv_inplace(|v| -v);
        }
    }
}

fn check_rank(r: usize, p: usize, q: usize) -> Result<()> {
    if r == 0 || r > p.min(q) {
        return Err(Error::Contract(format!(
            "rank must lie in 1..={}, got {r}",
            p.min(q)
        )));
    }
    Ok(())
}

fn from_covariances(
    sxx: &Mat,
    syy: &Mat,
    sxy: &Mat,
    params: RidgeParams,
    r: usize,
) -> Result<CcaModel> {
    let (p, q) = sxy.dim();
    check_rank(r, p, q)?;
    let wx = inverse_sqrt(&symmetric_eigen(&symmetrize(sxx))?, params.k1, "X")?;
    let wy = inverse_sqrt(&symmetric_eigen(&symmetrize(syy))?, params.k2, "Y")?;
    let k = wx.dot(sxy).dot(&wy);
    let (u, rho, v) = leading_singular(&k, r)?;
    let mut a = wx.dot(&u);
    let mut b = wy.dot(&v);
    fix_signs(&mut a, &mut b);
    Ok(CcaModel { a, b, rho })
}

fn covariances(x: &Mat, y: &Mat) -> Result<(Mat, Mat, Mat)> {
    if x.nrows() != y.nrows() {
        return Err(Error::Shape(format!(
            "X has {} rows, Y has {}",
            x.nrows(),
            y.nrows()
        )));
    }
    crate::linalg::ensure_finite(x, "X")?;
    crate::linalg::ensure_finite(y, "Y")?;
    let (xc, _) = center_columns(x)?;
    let (yc, _) = center_columns(y)?;
    Ok((
        sample_covariance(&xc, &xc)?,
        sample_covariance(&yc, &yc)?,
        sample_covariance(&xc, &yc)?,
    ))
}

/// Sample CCA. Canonical variates `XA` have unit sample variance.
pub fn classical_cca(x: &Mat, y: &Mat, r: usize) -> Result<CcaModel> {
    let (sxx, syy, sxy) = covariances(x, y)?;
    from_covariances(&sxx, &syy, &sxy, RidgeParams { k1: 0.0, k2: 0.0 }, r)
}

/// Canonical ridge: `Σ̂xx + k1 I` and `Σ̂yy + k2 I` replace the within-set
/// covariances.
pub fn canonical_ridge(x: &Mat, y: &Mat, params: RidgeParams, r: usize) -> Result<CcaModel> {
    RidgeParams::new(params.k1, params.k2)?;
    let (sxx, syy, sxy) = covariances(x, y)?;
    from_covariances(&sxx, &syy, &sxy, params, r)
}

/// Exact canonical vectors and correlations of a joint covariance matrix
/// whose first `p` coordinates are `x` and last `q` are `y`.
pub fn population_cca(sigma: &Mat, p: usize, q: usize, r: usize) -> Result<CcaModel> {
    if sigma.nrows() != p + q || sigma.ncols() != p + q {
        return Err(Error::Shape(format!(
            "joint covariance is {}x{}, expected {}x{}",
            sigma.nrows(),
            sigma.ncols(),
            p + q,
            p + q
        )));
    }
    cholesky(sigma)?;
    let sxx = sigma.slice(ndarray::s![..p, ..p]).to_owned();
    let syy = sigma.slice(ndarray::s![p.., p..]).to_owned();
    let sxy = sigma.slice(ndarray::s![..p, p..]).to_owned();
    from_covariances(&sxx, &syy, &sxy, RidgeParams { k1: 0.0, k2: 0.0 }, r)
}

/// Outcome of the maximum eigenvalue ratio rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankSelection {
    pub rank: usize,
    /// Set when every correlation is below `1e-8`.
    pub degenerate: bool,
}

/// `argmaxⱼ ρⱼ / max(ρⱼ₊₁, 1e-8)` over `j = 1 … len−1` (1-based, first
/// maximum wins).
pub fn select_rank(rho: &[f64]) -> Result<RankSelection> {
    const FLOOR: f64 = 1e-8;
    if rho.is_empty() {
        return Err(Error::Contract("rank selection needs a spectrum".into()));
    }
    if rho.iter().all(|r| *r < FLOOR) {
        return Ok(RankSelection { rank: 1, degenerate: true });
    }
    if rho.len() == 1 {
        return Ok(RankSelection { rank: 1, degenerate: false });
    }
    let mut best = 0;
    let mut best_ratio = f64::NEG_INFINITY;
    for j in 0..rho.len() - 1 {
        let ratio = rho[j] / rho[j + 1].max(FLOOR);
        if ratio > best_ratio {
            best = j;
            best_ratio = ratio;
        }
    }
    Ok(RankSelection { rank: best + 1, degenerate: false })
}

/// Deterministic fold partition: shuffle `0..n` with the seeded generator,
/// then cut into contiguous blocks whose sizes differ by at most one.
pub fn fold_partition(n: usize, folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seeded_rng(seed));
    let base = n / folds;
    let extra = n % folds;
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let len = base + usize::from(f < extra);
        out.push(idx[start..start + len].to_vec());
        start += len;
    }
    out
}

pub(crate) fn select_rows(m: &Mat, rows: &[usize]) -> Mat {
    m.select(ndarray::Axis(0), rows)
}

fn has_constant_column(m: &Mat) -> bool {
    m.columns().into_iter().any(|c| {
        let first = c[0];
        c.iter().all(|v| *v == first)
    })
}

// Per-fold quantities that do not depend on the ridge penalties.
struct FoldSpectra {
    x_test: Mat,
    y_test: Mat,
    ex: EigenResult,
    ey: EigenResult,
    // Vxᵀ Σxy Vy
    rotated: Mat,
}

impl FoldSpectra {
    fn new(x: &Mat, y: &Mat, test: &[usize]) -> Option<Self> {
        let n = x.nrows();
        let train: Vec<usize> = (0..n).filter(|i| !test.contains(i)).collect();
        let xtr = select_rows(x, &train);
        let ytr = select_rows(y, &train);
        let xte = select_rows(x, test);
        let yte = select_rows(y, test);
        if train.len() < 2
            || test.len() < 2
            || [&xtr, &ytr, &xte, &yte].iter().any(|m| has_constant_column(m))
        {
            return None;
        }
        let (xc, mx) = center_columns(&xtr).ok()?;
        let (yc, my) = center_columns(&ytr).ok()?;
        let sxx = sample_covariance(&xc, &xc).ok()?;
        let syy = sample_covariance(&yc, &yc).ok()?;
        let sxy = sample_covariance(&xc, &yc).ok()?;
        let ex = symmetric_eigen(&sxx).ok()?;
        let ey = symmetric_eigen(&syy).ok()?;
        let rotated = ex.vectors.t().dot(&sxy).dot(&ey.vectors);
        Some(Self {
            x_test: xte - &mx.view().insert_axis(ndarray::Axis(0)),
            y_test: yte - &my.view().insert_axis(ndarray::Axis(0)),
            ex,
            ey,
            rotated,
        })
    }

    // Test-sample correlation of the first ridge pair fitted on the training
    // part of the fold.
    fn score(&self, params: RidgeParams) -> f64 {
        let scale = |eig: &EigenResult, k: f64| -> Option<Vector> {
            let top = eig.values[0] + k;
            let bottom = eig.values[eig.values.len() - 1] + k;
            if !(top > 0.0) || bottom <= SINGULAR_TOLERANCE * top {
                return None;
            }
            Some(eig.values.mapv(|l| 1.0 / (l + k).sqrt()))
        };
        let (Some(dx), Some(dy)) = (scale(&self.ex, params.k1), scale(&self.ey, params.k2)) else {
            return 0.0;
        };
        let k = &self.rotated
            * &dx.view().insert_axis(ndarray::Axis(1))
            * &dy.view().insert_axis(ndarray::Axis(0));
        let Ok((u, _, v)) = leading_singular(&k, 1) else {
            return 0.0;
        };
        let a = self.ex.vectors.dot(&(&dx * &u.column(0)));
        let b = self.ey.vectors.dot(&(&dy * &v.column(0)));
        let score = correlation(self.x_test.dot(&a).view(), self.y_test.dot(&b).view());
        if score.is_finite() {
            score
        } else {
            0.0
        }
    }
}

/// Grid search for the ridge penalties maximising the mean test-fold
/// correlation of the first canonical pair.
pub fn ridge_cv(
    x: &Mat,
    y: &Mat,
    grid1: &[f64],
    grid2: &[f64],
    folds: usize,
    seed: u64,
) -> Result<RidgeParams> {
    let n = x.nrows();
    if y.nrows() != n {
        return Err(Error::Shape(format!("X has {n} rows, Y has {}", y.nrows())));
    }
    if folds < 2 || n < folds {
        return Err(Error::Contract(format!(
            "need 2 <= folds <= n, got folds={folds}, n={n}"
        )));
    }
    if grid1.is_empty() || grid2.is_empty() {
        return Err(Error::Contract("ridge grids must be non-empty".into()));
    }
    for &k in grid1.iter().chain(grid2) {
        RidgeParams::new(k, 0.0)?;
    }
    crate::linalg::ensure_finite(x, "X")?;
    crate::linalg::ensure_finite(y, "Y")?;

    let parts = fold_partition(n, folds, seed);
    let spectra: Vec<Option<FoldSpectra>> =
        parts.iter().map(|test| FoldSpectra::new(x, y, test)).collect();

    let mut best: Option<(f64, RidgeParams)> = None;
    for &k1 in grid1 {
        for &k2 in grid2 {
            let params = RidgeParams { k1, k2 };
            let total: f64 = spectra
                .iter()
                .map(|s| s.as_ref().map_or(0.0, |s| s.score(params)))
                .sum();
            let mean = total / folds as f64;
            let better = match best {
                None => true,
                Some((score, cur)) => {
                    mean > score
                        || (mean == score && (k1, k2).partial_cmp(&(cur.k1, cur.k2)) == Some(std::cmp::Ordering::Greater))
                }
            };
            if better {
                best = Some((mean, params));
            }
        }
    }
    Ok(best.expect("non-empty grids").1)
}

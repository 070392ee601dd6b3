//! Dense linear algebra on `ndarray` matrices.
//!
//! Everything here is a pure function of its inputs. The eigen solver is the
//! classic Householder tridiagonalisation followed by implicit QL iterations,
//! which is accurate to working precision for the symmetric matrices (at most
//! a few hundred rows) that the CCA routines produce.

use ndarray::{Array1, Array2, ArrayView1, Axis};

use crate::error::{Error, Result};

/// Dense real matrix.
pub type Mat = Array2<f64>;
/// Dense real vector.
pub type Vector = Array1<f64>;

/// Relative pivot tolerance used by Cholesky and QR rank checks.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

/// Eigen decomposition of a symmetric matrix, values sorted descending.
#[derive(Debug, Clone)]
pub struct EigenResult {
    pub values: Vector,
    /// Unit-norm eigenvectors stored as columns, matching `values`.
    pub vectors: Mat,
}

pub(crate) fn ensure_finite(m: &Mat, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Contract(format!("{what} contains non-finite entries")))
    }
}

/// Subtracts column means. Returns the centered matrix and the means.
pub fn center_columns(x: &Mat) -> Result<(Mat, Vector)> {
    if x.nrows() < 2 {
        return Err(Error::Degenerate(format!(
            "centering needs at least 2 rows, got {}",
            x.nrows()
        )));
    }
    let means = x.mean_axis(Axis(0)).expect("non-empty");
    let xc = x - &means.view().insert_axis(Axis(0));
    Ok((xc, means))
}

/// `Xcᵀ Yc / (n − 1)` for centered inputs.
pub fn sample_covariance(xc: &Mat, yc: &Mat) -> Result<Mat> {
    let n = xc.nrows();
    if yc.nrows() != n {
        return Err(Error::Shape(format!(
            "covariance operands have {} and {} rows",
            n,
            yc.nrows()
        )));
    }
    if n < 2 {
        return Err(Error::Degenerate("covariance needs at least 2 rows".into()));
    }
    Ok(xc.t().dot(yc) / (n as f64 - 1.0))
}

/// Symmetrised copy `(S + Sᵀ) / 2`.
pub fn symmetrize(s: &Mat) -> Mat {
    (s + &s.t()) * 0.5
}

fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Eigen decomposition of a symmetric matrix.
///
/// Values are sorted in descending order and the vectors are orthonormal.
/// Inputs that are asymmetric beyond `1e-10` (relative to the largest entry)
/// are rejected.
pub fn symmetric_eigen(s: &Mat) -> Result<EigenResult> {
    let n = s.nrows();
    if n == 0 || s.ncols() != n {
        return Err(Error::Shape(format!(
            "eigen decomposition needs a square matrix, got {}x{}",
            s.nrows(),
            s.ncols()
        )));
    }
    ensure_finite(s, "eigen input")?;
    let scale = max_abs(s).max(1.0);
    for i in 0..n {
        for j in (i + 1)..n {
            if (s[[i, j]] - s[[j, i]]).abs() > 1e-10 * scale {
                return Err(Error::Contract(format!(
                    "matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }

    let mut v: Vec<f64> = symmetrize(s).iter().copied().collect();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(n, &mut v, &mut d, &mut e);
    tridiagonal_ql(n, &mut v, &mut d, &mut e)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[b].total_cmp(&d[a]));
    let values = Array1::from_iter(order.iter().map(|&k| d[k]));
    let mut vectors = Mat::zeros((n, n));
    for (col, &k) in order.iter().enumerate() {
        for row in 0..n {
            vectors[[row, col]] = v[row * n + k];
        }
    }
    Ok(EigenResult { values, vectors })
}

// Householder reduction to tridiagonal form. On exit `v` holds the
// accumulated orthogonal transform (row-major), `d` the diagonal and `e` the
// sub-diagonal in e[1..].
fn tridiagonalize(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) {
    let idx = |r: usize, c: usize| r * n + c;
    for j in 0..n {
        d[j] = v[idx(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for dk in d.iter().take(i) {
            scale += dk.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[idx(i - 1, j)];
                v[idx(i, j)] = 0.0;
                v[idx(j, i)] = 0.0;
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                let f = d[j];
                v[idx(j, i)] = f;
                let mut g = e[j] + v[idx(j, j)] * f;
                for k in (j + 1)..i {
                    g += v[idx(k, j)] * d[k];
                    e[k] += v[idx(k, j)] * f;
                }
                e[j] = g;
            }
            let mut f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                let f = d[j];
                let g = e[j];
                for k in j..i {
                    v[idx(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[idx(i - 1, j)];
                v[idx(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }

    for i in 0..n.saturating_sub(1) {
        v[idx(n - 1, i)] = v[idx(i, i)];
        v[idx(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[idx(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[idx(k, i + 1)] * v[idx(k, j)];
                }
                for k in 0..=i {
                    v[idx(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[idx(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[idx(n - 1, j)];
        v[idx(n - 1, j)] = 0.0;
    }
    v[idx(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

// Implicit QL iterations on the tridiagonal form produced above.
fn tridiagonal_ql(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let idx = |r: usize, c: usize| r * n + c;
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let eps = f64::EPSILON;
    let max_iter = 60 * n.max(1);
    let mut f = 0.0;
    let mut tst1 = 0.0_f64;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > max_iter {
                    return Err(Error::Convergence { iterations: iter });
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    let h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        let h = v[idx(k, i + 1)];
                        v[idx(k, i + 1)] = s * v[idx(k, i)] + c * h;
                        v[idx(k, i)] = c * v[idx(k, i)] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Lower-triangular `L` with `L Lᵀ = S`.
pub fn cholesky(s: &Mat) -> Result<Mat> {
    let n = s.nrows();
    if n == 0 || s.ncols() != n {
        return Err(Error::Shape(format!(
            "cholesky needs a square matrix, got {}x{}",
            s.nrows(),
            s.ncols()
        )));
    }
    ensure_finite(s, "cholesky input")?;
    let max_diag = s.diag().iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let tol = PIVOT_TOLERANCE * max_diag;
    let mut l = Mat::zeros((n, n));
    for j in 0..n {
        let mut pivot = s[[j, j]];
        for k in 0..j {
            pivot -= l[[j, k]] * l[[j, k]];
        }
        if !(pivot > tol) {
            return Err(Error::NotPositiveDefinite { index: j, pivot });
        }
        let ljj = pivot.sqrt();
        l[[j, j]] = ljj;
        for i in (j + 1)..n {
            let mut acc = s[[i, j]];
            for k in 0..j {
                acc -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = acc / ljj;
        }
    }
    Ok(l)
}

/// Thin Householder QR of a tall matrix with full column rank.
///
/// Returns `(Q, R)` with `Q` of shape `n×k` having orthonormal columns and `R`
/// upper triangular `k×k`. A diagonal entry of `R` at or below
/// `PIVOT_TOLERANCE` times the largest column norm is reported as rank
/// deficiency.
pub fn qr_thin(a: &Mat) -> Result<(Mat, Mat)> {
    let (n, k) = a.dim();
    if n < k {
        return Err(Error::RankDeficient(format!(
            "{n}x{k} matrix cannot have full column rank"
        )));
    }
    ensure_finite(a, "QR input")?;
    let col_scale = a
        .axis_iter(Axis(1))
        .map(|c| c.dot(&c).sqrt())
        .fold(0.0_f64, f64::max);
    if col_scale == 0.0 {
        return Err(Error::RankDeficient("matrix is identically zero".into()));
    }

    let mut r = a.clone();
    let mut reflectors: Vec<Vector> = Vec::with_capacity(k);
    for j in 0..k {
        let mut x = r.slice(ndarray::s![j.., j]).to_owned();
        let alpha = {
            let norm = x.dot(&x).sqrt();
            if x[0] > 0.0 {
                -norm
            } else {
                norm
            }
        };
        if alpha.abs() <= PIVOT_TOLERANCE * col_scale {
            return Err(Error::RankDeficient(format!(
                "column {j} is (numerically) dependent on earlier columns"
            )));
        }
        x[0] -= alpha;
        let vnorm = x.dot(&x).sqrt();
        x /= vnorm;
        for c in j..k {
            let mut col = r.slice_mut(ndarray::s![j.., c]);
            let proj = 2.0 * x.dot(&col);
            col.scaled_add(-proj, &x);
        }
        reflectors.push(x);
    }

    let mut q = Mat::zeros((n, k));
    for j in 0..k {
        q[[j, j]] = 1.0;
    }
    for (j, x) in reflectors.iter().enumerate().rev() {
        for c in 0..k {
            let mut col = q.slice_mut(ndarray::s![j.., c]);
            let proj = 2.0 * x.dot(&col);
            col.scaled_add(-proj, x);
        }
    }
    let mut rr = r.slice(ndarray::s![..k, ..]).to_owned();
    for i in 0..k {
        for j in 0..i {
            rr[[i, j]] = 0.0;
        }
    }
    Ok((q, rr))
}

fn back_substitute(r: &Mat, b: &Vector) -> Vector {
    let k = r.nrows();
    let mut x = Vector::zeros(k);
    for i in (0..k).rev() {
        let mut acc = b[i];
        for j in (i + 1)..k {
            acc -= r[[i, j]] * x[j];
        }
        x[i] = acc / r[[i, i]];
    }
    x
}

/// Ordinary least squares `argmin ‖y − Xβ‖²` via Householder QR.
pub fn least_squares(x: &Mat, y: &Vector) -> Result<Vector> {
    if x.nrows() != y.len() {
        return Err(Error::Shape(format!(
            "design has {} rows, response has {}",
            x.nrows(),
            y.len()
        )));
    }
    if !y.iter().all(|v| v.is_finite()) {
        return Err(Error::Contract("response contains non-finite entries".into()));
    }
    let (q, r) = qr_thin(x)?;
    let qty = q.t().dot(y);
    Ok(back_substitute(&r, &qty))
}

/// Residual of `y` after projecting onto the column span of `x`.
pub fn projection_residual(x: &Mat, y: &Vector) -> Result<Vector> {
    let beta = least_squares(x, y)?;
    Ok(y - &x.dot(&beta))
}

/// Orthonormal basis of the column span (full column rank required).
pub fn orthonormal_basis(a: &Mat) -> Result<Mat> {
    qr_thin(a).map(|(q, _)| q)
}

/// Largest principal angle between `span(A)` and `span(B)`, in `[0, π/2]`.
///
/// Both the cosine (smallest singular value of `Q_Aᵀ Q_B`) and the sine
/// (largest singular value of `Q_A − Q_B Q_Bᵀ Q_A`) are formed so that small
/// and near-orthogonal angles are both resolved to working precision.
pub fn principal_subspace_angle(a: &Mat, b: &Mat) -> Result<f64> {
    if a.nrows() != b.nrows() || a.ncols() != b.ncols() {
        return Err(Error::Shape(format!(
            "subspace operands are {}x{} and {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let qa = orthonormal_basis(a)?;
    let qb = orthonormal_basis(b)?;
    let m = qa.t().dot(&qb);
    let resid = &qa - &qb.dot(&qb.t().dot(&qa));

    let cos_eig = symmetric_eigen(&symmetrize(&m.t().dot(&m)))?;
    let sin_eig = symmetric_eigen(&symmetrize(&resid.t().dot(&resid)))?;
    let cos = cos_eig.values[cos_eig.values.len() - 1].max(0.0).sqrt();
    let sin = sin_eig.values[0].max(0.0).sqrt();
    Ok(sin.atan2(cos).clamp(0.0, std::f64::consts::FRAC_PI_2))
}

/// Smallest principal angle between `span(A)` and `span(B)`, in `[0, π/2]`.
pub fn smallest_principal_angle(a: &Mat, b: &Mat) -> Result<f64> {
    if a.nrows() != b.nrows() || a.ncols() != b.ncols() {
        return Err(Error::Shape(format!(
            "subspace operands are {}x{} and {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let qa = orthonormal_basis(a)?;
    let qb = orthonormal_basis(b)?;
    let m = qa.t().dot(&qb);
    let resid = &qa - &qb.dot(&m.t());
    let cos_eig = symmetric_eigen(&symmetrize(&m.t().dot(&m)))?;
    let sin_eig = symmetric_eigen(&symmetrize(&resid.t().dot(&resid)))?;
    let cos = cos_eig.values[0].max(0.0).sqrt();
    let sin = sin_eig.values[sin_eig.values.len() - 1].max(0.0).sqrt();
    Ok(sin.atan2(cos).clamp(0.0, std::f64::consts::FRAC_PI_2))
}

/// Sign-invariant angle between two nonzero vectors, in `[0, π/2]`.
pub fn vector_angle(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    let na = a.dot(&a).sqrt();
    let nb = b.dot(&b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return std::f64::consts::FRAC_PI_2;
    }
    let ua = &a / na;
    let ub = &b / nb;
    let c = ua.dot(&ub);
    let sin = (&ua - &(&ub * c)).dot(&(&ua - &(&ub * c))).sqrt();
    sin.atan2(c.abs())
}

/// Pearson correlation; 0 when either argument has zero variance.
pub fn correlation(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    let n = a.len() as f64;
    let ma = a.sum() / n;
    let mb = b.sum() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        let dx = x - ma;
        let dy = y - mb;
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return 0.0;
    }
    sab / (saa.sqrt() * sbb.sqrt())
}

pub fn l2_norm(v: ArrayView1<f64>) -> f64 {
    v.dot(&v).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    #[test]
    fn centering_examples() {
        let x = array![[5.0, 1.0], [5.0, 2.0], [5.0, 3.0], [5.0, 2.0]];
        let (xc, means) = center_columns(&x).unwrap();
        assert_eq!(means[0], 5.0);
        assert!(xc.column(0).iter().all(|&v| v == 0.0));

        let x = array![[1.0], [2.0], [3.0]];
        let (xc, means) = center_columns(&x).unwrap();
        assert_eq!(means[0], 2.0);
        assert_eq!(xc, array![[-1.0], [0.0], [1.0]]);

        let (again, m2) = center_columns(&xc).unwrap();
        assert_eq!(again, xc);
        assert_eq!(m2[0], 0.0);

        assert!(matches!(
            center_columns(&array![[1.0, 2.0]]),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn covariance_examples() {
        let x = array![[-1.0], [0.0], [1.0]];
        let y = array![[-2.0], [0.0], [2.0]];
        assert_eq!(sample_covariance(&x, &y).unwrap(), array![[2.0]]);
        // unit variance column
        assert_eq!(sample_covariance(&x, &x).unwrap(), array![[1.0]]);
        let o = array![[1.0], [0.0], [-1.0]];
        let w = array![[1.0], [-2.0], [1.0]];
        assert_eq!(sample_covariance(&o, &w).unwrap(), array![[0.0]]);
        assert!(matches!(
            sample_covariance(&x, &array![[1.0], [2.0]]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn eigen_examples() {
        let e = symmetric_eigen(&Mat::eye(3)).unwrap();
        assert_eq!(e.values.to_vec(), vec![1.0, 1.0, 1.0]);

        let e = symmetric_eigen(&array![[1.0, 0.0], [0.0, 4.0]]).unwrap();
        assert_abs_diff_eq!(e.values[0], 4.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.values[1], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.vectors[[1, 0]].abs(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.vectors[[0, 1]].abs(), 1.0, epsilon = 1e-14);

        let e = symmetric_eigen(&array![[2.0, 1.0], [1.0, 2.0]]).unwrap();
        assert_abs_diff_eq!(e.values[0], 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.values[1], 1.0, epsilon = 1e-14);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let v0 = e.vectors.column(0);
        assert_abs_diff_eq!((v0[0] * v0[1]).signum(), 1.0);
        assert_abs_diff_eq!(v0[0].abs(), h, epsilon = 1e-14);
        let v1 = e.vectors.column(1);
        assert_abs_diff_eq!((v1[0] * v1[1]).signum(), -1.0);
        assert_abs_diff_eq!(v1[1].abs(), h, epsilon = 1e-14);

        assert!(matches!(
            symmetric_eigen(&array![[1.0, 2.0], [0.0, 1.0]]),
            Err(Error::Contract(_))
        ));
        let e = symmetric_eigen(&array![[7.0]]).unwrap();
        assert_eq!(e.values[0], 7.0);
        assert_eq!(e.vectors[[0, 0]], 1.0);
    }

    #[test]
    fn cholesky_examples() {
        assert_eq!(cholesky(&Mat::eye(3)).unwrap(), Mat::eye(3));
        assert_eq!(cholesky(&array![[4.0]]).unwrap(), array![[2.0]]);
        let l = cholesky(&array![[1.0, 0.7], [0.7, 1.0]]).unwrap();
        assert_abs_diff_eq!(l[[0, 0]], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(l[[0, 1]], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(l[[1, 0]], 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(l[[1, 1]], 0.51_f64.sqrt(), epsilon = 1e-15);
        assert!(matches!(
            cholesky(&array![[1.0, 1.0], [1.0, 1.0]]),
            Err(Error::NotPositiveDefinite { index: 1, .. })
        ));
        assert!(matches!(
            cholesky(&array![[-1.0]]),
            Err(Error::NotPositiveDefinite { index: 0, .. })
        ));
    }

    #[test]
    fn least_squares_examples() {
        let x = array![[1.0], [1.0], [1.0]];
        let beta = least_squares(&x, &array![1.0, 2.0, 3.0]).unwrap();
        assert_abs_diff_eq!(beta[0], 2.0, epsilon = 1e-14);

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let q = array![[h, 0.0], [h, 0.0], [0.0, 1.0]];
        let y = array![3.0, -1.0, 2.5];
        let beta = least_squares(&q, &y).unwrap();
        let expect = q.t().dot(&y);
        assert_abs_diff_eq!(beta[0], expect[0], epsilon = 1e-14);
        assert_abs_diff_eq!(beta[1], expect[1], epsilon = 1e-14);

        let x = array![[1.0, 0.0], [1.0, 1.0], [1.0, 2.0], [1.0, 3.0]];
        let y = array![1.0, 3.0, 5.0, 7.0];
        let resid = projection_residual(&x, &y).unwrap();
        assert!(resid.iter().all(|r| r.abs() < 1e-12));

        let dup = array![[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]];
        assert!(matches!(
            least_squares(&dup, &array![1.0, 2.0, 3.0]),
            Err(Error::RankDeficient(_))
        ));
    }

    #[test]
    fn angle_examples() {
        let a = array![[1.0], [0.0]];
        let b = array![[0.0], [1.0]];
        assert_abs_diff_eq!(principal_subspace_angle(&a, &a).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(principal_subspace_angle(&a, &b).unwrap(), FRAC_PI_2, epsilon = 1e-15);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let c = array![[h], [h]];
        assert_abs_diff_eq!(principal_subspace_angle(&a, &c).unwrap(), FRAC_PI_4, epsilon = 1e-14);
        let z = array![[0.0], [0.0]];
        assert!(matches!(
            principal_subspace_angle(&a, &z),
            Err(Error::RankDeficient(_))
        ));
        assert_abs_diff_eq!(vector_angle(a.column(0), (-&a).column(0)), 0.0);
    }

    #[test]
    fn smallest_and_largest_angles_of_a_hinged_plane() {
        let t: f64 = 0.3;
        let a = array![[1.0, 0.0], [0.0, 1.0], [0.0, 0.0], [0.0, 0.0]];
        let b = array![[1.0, 0.0], [0.0, t.cos()], [0.0, t.sin()], [0.0, 0.0]];
        assert_abs_diff_eq!(principal_subspace_angle(&a, &b).unwrap(), t, epsilon = 1e-14);
        assert_abs_diff_eq!(smallest_principal_angle(&a, &b).unwrap(), 0.0, epsilon = 1e-14);
        let e = array![[1.0], [0.0], [0.0], [0.0]];
        let f = array![[t.cos()], [0.0], [t.sin()], [0.0]];
        assert_abs_diff_eq!(smallest_principal_angle(&e, &f).unwrap(), t, epsilon = 1e-14);
    }

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Mat {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Mat::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn centered_columns_sum_to_zero(seed in any::<u64>(), n in 2usize..40, p in 1usize..6) {
            let x = random_matrix(n, p, seed) * 100.0 + 3.0;
            let (xc, means) = center_columns(&x).unwrap();
            for col in xc.axis_iter(Axis(1)) {
                prop_assert!(col.sum().abs() <= 1e-10 * n as f64 * 100.0);
            }
            let back = &xc + &means.view().insert_axis(Axis(0));
            for (u, v) in back.iter().zip(x.iter()) {
                prop_assert!((u - v).abs() <= 1e-12 * v.abs().max(1.0));
            }
        }

        #[test]
        fn eigen_reconstructs(seed in any::<u64>(), n in 1usize..30) {
            let m = random_matrix(n, n, seed);
            let s = symmetrize(&(&m + &m.t()));
            let e = symmetric_eigen(&s).unwrap();
            let recon = e.vectors.dot(&Mat::from_diag(&e.values)).dot(&e.vectors.t());
            let norm = s.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
            let err = (&recon - &s).iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!(err <= 1e-8 * norm);
            let trace: f64 = s.diag().sum();
            prop_assert!((e.values.sum() - trace).abs() <= 1e-8 * norm.max(1.0));
            let gram = e.vectors.t().dot(&e.vectors);
            for i in 0..n { for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                prop_assert!((gram[[i, j]] - target).abs() <= 1e-8);
            }}
            for w in e.values.windows(2) { prop_assert!(w[0] >= w[1]); }
        }

        #[test]
        fn cholesky_and_eigen_round_trip(seed in any::<u64>(), n in 1usize..20) {
            let m = random_matrix(n, n, seed);
            let s = symmetrize(&(m.dot(&m.t()) + Mat::eye(n) * 1e-3));
            let l = cholesky(&s).unwrap();
            let norm = s.iter().map(|v| v * v).sum::<f64>().sqrt();
            let err = (&l.dot(&l.t()) - &s).iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!(err <= 1e-10 * norm);
            for i in 0..n { for j in (i+1)..n { prop_assert_eq!(l[[i, j]], 0.0); } }
        }

        #[test]
        fn least_squares_residual_is_orthogonal(seed in any::<u64>(), n in 6usize..40, p in 1usize..5) {
            let x = random_matrix(n, p, seed);
            let y = random_matrix(n, 1, seed ^ 0x9e37).column(0).to_owned() * 10.0;
            let beta = least_squares(&x, &y).unwrap();
            let grad = x.t().dot(&(&y - &x.dot(&beta)));
            let scale = l2_norm(y.view());
            prop_assert!(grad.iter().all(|g| g.abs() <= 1e-8 * scale));
        }

        #[test]
        fn angle_ignores_column_mixing(seed in any::<u64>(), n in 4usize..20, r in 1usize..4) {
            let a = random_matrix(n, r, seed);
            let mut g = random_matrix(r, r, seed ^ 0xabc);
            for i in 0..r { g[[i, i]] += 3.0; }
            let theta = principal_subspace_angle(&a, &a.dot(&g)).unwrap();
            prop_assert!(theta <= 1e-8);
            let b = random_matrix(n, r, seed ^ 0x55);
            let t1 = principal_subspace_angle(&a, &b).unwrap();
            let t2 = principal_subspace_angle(&(&a * -2.5), &b.dot(&g)).unwrap();
            prop_assert!((0.0..=FRAC_PI_2).contains(&t1));
            prop_assert!((t1 - t2).abs() <= 1e-8);
        }
    }
}

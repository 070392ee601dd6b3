use std::fmt;
use std::str::FromStr;

use ndarray::s;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cca::population_cca;
use crate::error::{Error, Result};
use crate::linalg::{cholesky, Mat};
use crate::seeded_rng;

/// Population coefficients below this magnitude count as zero.
pub const TRUTH_ZERO_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignName {
    Uncorrelated,
    Correlated,
    HighDimensional,
    Overparametrized,
}

impl DesignName {
    pub const ALL: [DesignName; 4] = [
        DesignName::Uncorrelated,
        DesignName::Correlated,
        DesignName::HighDimensional,
        DesignName::Overparametrized,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DesignName::Uncorrelated => "uncorrelated",
            DesignName::Correlated => "correlated",
            DesignName::HighDimensional => "high_dimensional",
            DesignName::Overparametrized => "overparametrized",
        }
    }
}

impl fmt::Display for DesignName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DesignName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        DesignName::ALL
            .into_iter()
            .find(|d| d.as_str() == key)
            .ok_or_else(|| Error::UnknownDesign { name: s.to_string() })
    }
}

/// A simulation setting: dimensions and the joint covariance of `(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSpec {
    pub name: DesignName,
    pub n: usize,
    pub p: usize,
    pub q: usize,
    /// `(p+q)×(p+q)`, `x` coordinates first.
    pub sigma: Mat,
    pub true_rank: usize,
    chol: Mat,
}

impl DesignSpec {
    /// Lower Cholesky factor of `sigma`.
    pub fn cholesky_factor(&self) -> &Mat {
        &self.chol
    }

    pub fn sigma_xy(&self) -> Mat {
        self.sigma.slice(s![..self.p, self.p..]).to_owned()
    }

    pub fn sigma_yy(&self) -> Mat {
        self.sigma.slice(s![self.p.., self.p..]).to_owned()
    }
}

fn toeplitz(dim: usize, base: f64) -> Mat {
    Mat::from_shape_fn((dim, dim), |(i, j)| base.powi(i.abs_diff(j) as i32))
}

/// Joint covariance with `Σxx = I`, `Σyy = blockdiag(S1, I)` and the
/// leading diagonal of `Σxy` set to `sxy_diag`.
fn assemble(p: usize, q: usize, s1: Option<Mat>, sxy_diag: &[f64]) -> Mat {
    let mut sigma = Mat::eye(p + q);
    if let Some(s1) = s1 {
        let k = s1.nrows();
        sigma.slice_mut(s![p..p + k, p..p + k]).assign(&s1);
    }
    for (i, &c) in sxy_diag.iter().enumerate() {
        sigma[[i, p + i]] = c;
        sigma[[p + i, i]] = c;
    }
    sigma
}

pub fn build_design(name: &str) -> Result<DesignSpec> {
    design(name.parse()?)
}

pub fn design(name: DesignName) -> Result<DesignSpec> {
    let (n, p, q, sigma) = match name {
        DesignName::Uncorrelated => (50, 4, 6, assemble(4, 6, None, &[0.6, 0.5])),
        DesignName::Correlated => (50, 6, 10, assemble(6, 10, Some(toeplitz(3, 0.7)), &[0.5, 0.5])),
        DesignName::HighDimensional => {
            (50, 25, 40, assemble(25, 40, Some(toeplitz(3, 0.3)), &[0.7, 0.7]))
        }
        DesignName::Overparametrized => {
            (80, 60, 85, assemble(60, 85, Some(toeplitz(3, 0.3)), &[0.7, 0.7]))
        }
    };
    let chol = cholesky(&sigma)?;
    Ok(DesignSpec {
        name,
        n,
        p,
        q,
        sigma,
        true_rank: 2,
        chol,
    })
}

/// `n` independent draws `z = L g`, split into `X` (first `p` coordinates)
/// and `Y`.
pub fn sample_dataset(design: &DesignSpec, seed: u64) -> (Mat, Mat) {
    sample_rows(design, design.n, seed)
}

/// As [`sample_dataset`] with an explicit sample size.
pub fn sample_rows(design: &DesignSpec, n: usize, seed: u64) -> (Mat, Mat) {
    let mut rng = seeded_rng(seed);
    let d = design.p + design.q;
    let l = &design.chol;
    let mut z = Mat::zeros((n, d));
    let mut g = vec![0.0; d];
    for mut row in z.rows_mut() {
        for gi in g.iter_mut() {
            *gi = StandardNormal.sample(&mut rng);
        }
        for i in 0..d {
            row[i] = (0..=i).map(|k| l[[i, k]] * g[k]).sum();
        }
    }
    let x = z.slice(s![.., ..design.p]).to_owned();
    let y = z.slice(s![.., design.p..]).to_owned();
    (x, y)
}

/// First `true_rank` population canonical vectors, with magnitudes below
/// [`TRUTH_ZERO_THRESHOLD`] set to exact zero.
pub fn true_canonical_vectors(design: &DesignSpec) -> Result<(Mat, Mat)> {
    let model = population_cca(&design.sigma, design.p, design.q, design.true_rank)?;
    let clean = |m: Mat| m.mapv(|v| if v.abs() < TRUTH_ZERO_THRESHOLD { 0.0 } else { v });
    Ok((clean(model.a), clean(model.b)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{center_columns, sample_covariance};

    #[test]
    fn uncorrelated_cross_block() {
        let d = build_design("uncorrelated").unwrap();
        let sxy = d.sigma_xy();
        assert_eq!(sxy.dim(), (4, 6));
        for ((i, j), v) in sxy.indexed_iter() {
            let expected = match (i, j) {
                (0, 0) => 0.6,
                (1, 1) => 0.5,
                _ => 0.0,
            };
            assert_eq!(*v, expected);
        }
    }

    #[test]
    fn correlated_within_block() {
        let d = build_design("correlated").unwrap();
        let syy = d.sigma_yy();
        assert_eq!(syy[[0, 1]], 0.7);
        assert!((syy[[0, 2]] - 0.49).abs() < 1e-15);
        assert_eq!(syy[[3, 4]], 0.0);
        assert_eq!(syy[[5, 5]], 1.0);
    }

    #[test]
    fn dimensions_and_definiteness() {
        let dims: Vec<_> = DesignName::ALL
            .into_iter()
            .map(|n| {
                let d = design(n).unwrap();
                assert!(cholesky(&d.sigma).is_ok());
                assert_eq!(d.sigma, d.sigma.t());
                (d.n, d.p, d.q, d.true_rank)
            })
            .collect();
        assert_eq!(dims, vec![(50, 4, 6, 2), (50, 6, 10, 2), (50, 25, 40, 2), (80, 60, 85, 2)]);
    }

    #[test]
    fn unknown_name_lists_designs() {
        let err = build_design("banana").unwrap_err();
        assert!(matches!(err, Error::UnknownDesign { .. }));
        assert!(err.to_string().contains("high_dimensional"));
        assert_eq!(build_design("High-Dimensional").unwrap().name, DesignName::HighDimensional);
    }

    #[test]
    fn sampling_is_deterministic_and_nonconstant() {
        for name in DesignName::ALL {
            let d = design(name).unwrap();
            let (x1, y1) = sample_dataset(&d, 42);
            let (x2, y2) = sample_dataset(&d, 42);
            assert_eq!(x1, x2);
            assert_eq!(y1, y2);
            assert_eq!(x1.dim(), (d.n, d.p));
            assert_eq!(y1.dim(), (d.n, d.q));
            for c in x1.columns().into_iter().chain(y1.columns()) {
                assert!(c.iter().any(|v| *v != c[0]));
            }
            let (x3, _) = sample_dataset(&d, 43);
            assert_ne!(x1, x3);
        }
    }

    #[test]
    fn large_sample_covariance_matches_sigma() {
        let d = build_design("correlated").unwrap();
        let (x, y) = sample_rows(&d, 100_000, 7);
        let z = ndarray::concatenate![ndarray::Axis(1), x, y];
        let (zc, _) = center_columns(&z).unwrap();
        let s = sample_covariance(&zc, &zc).unwrap();
        let worst = (&s - &d.sigma).iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        assert!(worst <= 0.03, "max deviation {worst}");
    }

    #[test]
    fn true_vectors_of_uncorrelated_design_are_axes() {
        let d = build_design("uncorrelated").unwrap();
        let (a, b) = true_canonical_vectors(&d).unwrap();
        assert_eq!(a.dim(), (4, 2));
        assert_eq!(b.dim(), (6, 2));
        for j in 0..2 {
            for i in 0..4 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((a[[i, j]].abs() - expected).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn correlated_truth_is_supported_on_the_s1_block() {
        let d = build_design("correlated").unwrap();
        let (a, b) = true_canonical_vectors(&d).unwrap();
        for j in 0..2 {
            assert!(b.column(j).iter().skip(3).all(|v| *v == 0.0));
            assert!(b.column(j).iter().take(3).any(|v| *v != 0.0));
            assert!(a.column(j).iter().skip(2).all(|v| *v == 0.0));
        }
    }

    #[test]
    fn high_dimensional_has_two_population_correlations() {
        let d = build_design("high_dimensional").unwrap();
        let full = population_cca(&d.sigma, d.p, d.q, d.p).unwrap();
        let nonzero = full.rho.iter().filter(|r| **r > 1e-10).count();
        assert_eq!(nonzero, 2);
    }
}

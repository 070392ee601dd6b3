use rayon::prelude::*;

use super::campaign::{fit_method, Method};
use crate::cca::{select_rows, RidgeParams};
use crate::error::{Error, Result};
use crate::linalg::{center_columns, Mat, Vector};
use crate::sar::{RankChoice, SarConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct LooSettings {
    pub rank: RankChoice,
    pub sar: SarConfig,
    /// Fixed canonical-ridge penalties; cross-validated per fold otherwise.
    pub ridge: Option<RidgeParams>,
    /// `0` or `1` runs folds sequentially.
    pub threads: usize,
}

impl Default for LooSettings {
    fn default() -> Self {
        Self {
            rank: RankChoice::Fixed(1),
            sar: SarConfig::default(),
            ridge: None,
            threads: 1,
        }
    }
}

// Rescales each column so the training variate `m · col` has unit sample
// variance.
fn unit_variance(m: &Mat, coef: &Mat) -> Result<Mat> {
    let n = m.nrows() as f64;
    let variates = m.dot(coef);
    let mut out = coef.clone();
    for (j, mut col) in out.columns_mut().into_iter().enumerate() {
        let var = variates.column(j).iter().map(|v| v * v).sum::<f64>() / (n - 1.0);
        if !(var > 0.0) {
            return Err(Error::Degenerate(format!("canonical variate {} has zero variance", j + 1)));
        }
        col /= var.sqrt();
    }
    Ok(out)
}

fn fold_score(x: &Mat, y: &Mat, i: usize, method: Method, settings: &LooSettings) -> Result<f64> {
    let keep: Vec<usize> = (0..x.nrows()).filter(|&r| r != i).collect();
    let (xt, yt) = (select_rows(x, &keep), select_rows(y, &keep));
    let (xc, x_means) = center_columns(&xt)?;
    let (yc, y_means) = center_columns(&yt)?;
    let fit = fit_method(method, &xc, &yc, settings.rank, &settings.sar, settings.ridge)?;
    let a = unit_variance(&xc, &fit.a)?;
    let b = unit_variance(&yc, &fit.b)?;
    let xi: Vector = &x.row(i) - &x_means;
    let yi: Vector = &y.row(i) - &y_means;
    let diff = a.t().dot(&xi) - b.t().dot(&yi);
    Ok(diff.dot(&diff))
}

/// Leave-one-out score `(1/n) Σᵢ ‖Aᵀxᵢ − Bᵀyᵢ‖²`, with `A`, `B` refitted
/// without observation `i` and scaled to unit-variance training variates.
pub fn loo_cv_score(x: &Mat, y: &Mat, method: Method, settings: &LooSettings) -> Result<f64> {
    let n = x.nrows();
    if y.nrows() != n {
        return Err(Error::Shape(format!("X has {n} rows, Y has {}", y.nrows())));
    }
    if n < 3 {
        return Err(Error::Degenerate(format!(
            "leave-one-out scoring needs at least 3 observations, got {n}"
        )));
    }
    let job = |i: usize| {
        fold_score(x, y, i, method, settings).map_err(|e| Error::Fold {
            fold: i + 1,
            message: e.to_string(),
        })
    };
    let scores: Vec<Result<f64>> = if settings.threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(settings.threads)
            .build()
            .map_err(|e| Error::Contract(format!("cannot start worker threads: {e}")))?;
        pool.install(|| (0..n).into_par_iter().map(job).collect())
    } else {
        (0..n).map(job).collect()
    };
    let mut total = 0.0;
    for s in scores {
        total += s?;
    }
    Ok(total / n as f64)
}

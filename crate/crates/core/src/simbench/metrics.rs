use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;

/// Support recovery of an estimate against a population pattern.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparsityRates {
    pub tpr: f64,
    pub tnr: f64,
    /// The truth has no nonzero entries; `tpr` reported as 1.
    pub no_positives: bool,
    /// The truth has no zero entries; `tnr` reported as 1.
    pub no_negatives: bool,
}

/// True positive and true negative rates of the nonzero pattern of `est`
/// (exact zeros) against `truth` (zeros already thresholded).
pub fn sparsity_metrics(est: &Mat, truth: &Mat) -> Result<SparsityRates> {
    if est.dim() != truth.dim() {
        return Err(Error::Shape(format!(
            "estimate is {:?}, truth is {:?}",
            est.dim(),
            truth.dim()
        )));
    }
    let (mut tp, mut pos, mut tn, mut neg) = (0usize, 0usize, 0usize, 0usize);
    for (e, t) in est.iter().zip(truth.iter()) {
        if *t != 0.0 {
            pos += 1;
            tp += usize::from(*e != 0.0);
        } else {
            neg += 1;
            tn += usize::from(*e == 0.0);
        }
    }
    let rate = |hit: usize, total: usize| if total == 0 { 1.0 } else { hit as f64 / total as f64 };
    Ok(SparsityRates {
        tpr: rate(tp, pos),
        tnr: rate(tn, neg),
        no_positives: pos == 0,
        no_negatives: neg == 0,
    })
}

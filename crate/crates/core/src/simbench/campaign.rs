use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::design::{sample_dataset, true_canonical_vectors, DesignName, DesignSpec};
use super::metrics::{sparsity_metrics, SparsityRates};
use crate::cca::{canonical_ridge, classical_cca, default_ridge_grid, ridge_cv, RidgeParams};
use crate::error::{Error, Result};
use crate::linalg::{principal_subspace_angle, smallest_principal_angle, Mat};
use crate::sar::{sar_fit, RankChoice, SarConfig, SarModel};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Sar,
    Ridge,
    Cca,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Sar => "sar",
            Method::Ridge => "ridge",
            Method::Cca => "cca",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sar" => Ok(Method::Sar),
            "ridge" => Ok(Method::Ridge),
            "cca" => Ok(Method::Cca),
            other => Err(Error::Contract(format!(
                "unknown method '{other}' (valid: sar, ridge, cca)"
            ))),
        }
    }
}

/// Canonical vectors produced by one method on one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodFit {
    pub a: Mat,
    pub b: Mat,
    pub sar: Option<SarModel>,
}

/// Fits `method` with `rank` pairs. `ridge` fixes the canonical-ridge
/// penalties (for both the ridge method and SAR starting values); when
/// absent they are cross-validated with `sar.seed`.
pub fn fit_method(
    method: Method,
    x: &Mat,
    y: &Mat,
    rank: RankChoice,
    sar: &SarConfig,
    ridge: Option<RidgeParams>,
) -> Result<MethodFit> {
    let fixed_rank = |what: &str| match rank {
        RankChoice::Fixed(r) => Ok(r),
        RankChoice::Auto => Err(Error::Contract(format!(
            "automatic rank selection is only available for SAR, not {what}"
        ))),
    };
    match method {
        Method::Sar => {
            let config = SarConfig {
                rank,
                ridge: ridge.or(sar.ridge),
                ..sar.clone()
            };
            let model = sar_fit(x, y, &config)?;
            Ok(MethodFit {
                a: model.a.clone(),
                b: model.b.clone(),
                sar: Some(model),
            })
        }
        Method::Ridge => {
            let r = fixed_rank("ridge")?;
            let params = match ridge.or(sar.ridge) {
                Some(p) => p,
                None => {
                    let grid = default_ridge_grid();
                    ridge_cv(x, y, &grid, &grid, sar.ridge_folds, sar.seed)?
                }
            };
            let m = canonical_ridge(x, y, params, r)?;
            Ok(MethodFit { a: m.a, b: m.b, sar: None })
        }
        Method::Cca => {
            let m = classical_cca(x, y, fixed_rank("cca")?)?;
            Ok(MethodFit { a: m.a, b: m.b, sar: None })
        }
    }
}

/// Classical CCA needs invertible sample covariances.
pub fn cca_feasible(n: usize, p: usize, q: usize) -> bool {
    p < n && q < n
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignOptions {
    /// Settings for SAR; its rank is overridden by the design's true rank
    /// and its seed by the run seed.
    pub sar: SarConfig,
    /// Worker threads; `0` or `1` runs sequentially.
    pub threads: usize,
    /// Record elapsed time in the report (makes the output nondeterministic).
    pub record_wall_time: bool,
}

impl Default for CampaignOptions {
    fn default() -> Self {
        Self {
            sar: SarConfig::default(),
            threads: 1,
            record_wall_time: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRun {
    pub method: Method,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub angle_a: Option<f64>,
    pub angle_b: Option<f64>,
    /// Smallest principal angles, reported alongside the largest.
    pub min_angle_a: Option<f64>,
    pub min_angle_b: Option<f64>,
    pub sparsity_a: Option<SparsityRates>,
    pub sparsity_b: Option<SparsityRates>,
    /// SAR only: every pair reached the angle threshold.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    /// SAR only: largest relative `|uᵀ X'ⱼ|` over all deflations.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_deflation_residual: Option<f64>,
}

impl MethodRun {
    pub fn succeeded(&self) -> bool {
        self.error.is_none()
    }

    fn failed(method: Method, err: &Error) -> Self {
        Self {
            method,
            error: Some(err.to_string()),
            angle_a: None,
            angle_b: None,
            min_angle_a: None,
            min_angle_b: None,
            sparsity_a: None,
            sparsity_b: None,
            converged: None,
            max_deflation_residual: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: usize,
    pub seed: u64,
    pub results: Vec<MethodRun>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub feasible: bool,
    pub successes: usize,
    pub failures: usize,
    pub mean_angle_a: Option<f64>,
    pub mean_angle_b: Option<f64>,
    pub mean_min_angle_a: Option<f64>,
    pub mean_min_angle_b: Option<f64>,
    pub mean_tpr_a: Option<f64>,
    pub mean_tnr_a: Option<f64>,
    pub mean_tpr_b: Option<f64>,
    pub mean_tnr_b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nonconverged_runs: Option<usize>,
}

/// Two-sided paired t-test of SAR's per-run angles against a competitor's.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedTest {
    pub method: Method,
    pub pairs: usize,
    pub t_angle_a: Option<f64>,
    pub p_value_angle_a: Option<f64>,
    pub t_angle_b: Option<f64>,
    pub p_value_angle_b: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub schema_version: u32,
    pub design: DesignName,
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub true_rank: usize,
    pub runs: usize,
    pub seed: u64,
    pub epsilon: f64,
    pub methods: Vec<MethodSummary>,
    pub paired_tests: Vec<PairedTest>,
    pub per_run: Vec<RunRecord>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_time_seconds: Option<f64>,
}

impl SimulationReport {
    pub fn summary(&self, method: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == method)
    }

    /// `(method, metric, value)` rows; missing values are `None`.
    pub fn metric_rows(&self) -> Vec<(Method, &'static str, Option<f64>)> {
        let mut rows = Vec::new();
        for m in &self.methods {
            rows.extend([
                (m.method, "mean_angle_a", m.mean_angle_a),
                (m.method, "mean_angle_b", m.mean_angle_b),
                (m.method, "mean_min_angle_a", m.mean_min_angle_a),
                (m.method, "mean_min_angle_b", m.mean_min_angle_b),
                (m.method, "mean_tpr_a", m.mean_tpr_a),
                (m.method, "mean_tnr_a", m.mean_tnr_a),
                (m.method, "mean_tpr_b", m.mean_tpr_b),
                (m.method, "mean_tnr_b", m.mean_tnr_b),
                (m.method, "successes", Some(m.successes as f64)),
                (m.method, "failures", Some(m.failures as f64)),
            ]);
        }
        rows
    }
}

fn evaluate(
    method: Method,
    x: &Mat,
    y: &Mat,
    truth: &(Mat, Mat),
    rank: usize,
    sar: &SarConfig,
    ridge: &Result<RidgeParams>,
) -> MethodRun {
    let ridge_param = match (method, ridge) {
        (Method::Ridge, Err(e)) => return MethodRun::failed(method, e),
        (_, r) => r.as_ref().ok().copied(),
    };
    let fit = match fit_method(method, x, y, RankChoice::Fixed(rank), sar, ridge_param) {
        Ok(f) => f,
        Err(e) => return MethodRun::failed(method, &e),
    };
    let scored = (|| -> Result<MethodRun> {
        Ok(MethodRun {
            method,
            error: None,
            angle_a: Some(principal_subspace_angle(&fit.a, &truth.0)?),
            angle_b: Some(principal_subspace_angle(&fit.b, &truth.1)?),
            min_angle_a: Some(smallest_principal_angle(&fit.a, &truth.0)?),
            min_angle_b: Some(smallest_principal_angle(&fit.b, &truth.1)?),
            sparsity_a: Some(sparsity_metrics(&fit.a, &truth.0)?),
            sparsity_b: Some(sparsity_metrics(&fit.b, &truth.1)?),
            converged: fit.sar.as_ref().map(|m| m.pairs.iter().all(|p| p.converged)),
            max_deflation_residual: fit.sar.as_ref().map(|m| {
                m.pairs
                    .iter()
                    .flat_map(|p| [p.deflation_residual_x, p.deflation_residual_y])
                    .flatten()
                    .fold(0.0, f64::max)
            }),
        })
    })();
    scored.unwrap_or_else(|e| MethodRun::failed(method, &e))
}

fn single_run(
    design: &DesignSpec,
    methods: &[Method],
    truth: &(Mat, Mat),
    run: usize,
    seed: u64,
    sar: &SarConfig,
) -> RunRecord {
    let run_seed = seed ^ run as u64;
    let (x, y) = sample_dataset(design, run_seed);
    let sar = SarConfig {
        seed: run_seed,
        rank: RankChoice::Fixed(design.true_rank),
        ..sar.clone()
    };
    let ridge = match sar.ridge {
        Some(p) => Ok(p),
        None if methods.iter().any(|m| matches!(m, Method::Sar | Method::Ridge)) => {
            let grid = default_ridge_grid();
            ridge_cv(&x, &y, &grid, &grid, sar.ridge_folds, run_seed)
        }
        None => Err(Error::Contract("ridge not requested".into())),
    };
    let results = methods
        .iter()
        .filter(|m| **m != Method::Cca || cca_feasible(design.n, design.p, design.q))
        .map(|&m| evaluate(m, &x, &y, truth, design.true_rank, &sar, &ridge))
        .collect();
    RunRecord {
        run,
        seed: run_seed,
        results,
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

fn summarise(method: Method, feasible: bool, records: &[RunRecord]) -> MethodSummary {
    let runs: Vec<&MethodRun> = records
        .iter()
        .flat_map(|r| r.results.iter())
        .filter(|r| r.method == method)
        .collect();
    let ok: Vec<&MethodRun> = runs.iter().copied().filter(|r| r.succeeded()).collect();
    let field = |f: fn(&MethodRun) -> Option<f64>| mean(ok.iter().filter_map(|r| f(r)));
    MethodSummary {
        method,
        feasible,
        successes: ok.len(),
        failures: runs.len() - ok.len(),
        mean_angle_a: field(|r| r.angle_a),
        mean_angle_b: field(|r| r.angle_b),
        mean_min_angle_a: field(|r| r.min_angle_a),
        mean_min_angle_b: field(|r| r.min_angle_b),
        mean_tpr_a: field(|r| r.sparsity_a.map(|s| s.tpr)),
        mean_tnr_a: field(|r| r.sparsity_a.map(|s| s.tnr)),
        mean_tpr_b: field(|r| r.sparsity_b.map(|s| s.tpr)),
        mean_tnr_b: field(|r| r.sparsity_b.map(|s| s.tnr)),
        nonconverged_runs: (method == Method::Sar)
            .then(|| ok.iter().filter(|r| r.converged == Some(false)).count()),
    }
}

/// Two-sided paired t statistic and p-value of `first − second`.
pub fn paired_t_test(first: &[f64], second: &[f64]) -> Option<(f64, f64)> {
    if first.len() != second.len() || first.len() < 2 {
        return None;
    }
    let d: Vec<f64> = first.iter().zip(second).map(|(a, b)| a - b).collect();
    let m = d.len() as f64;
    let mean = d.iter().sum::<f64>() / m;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    if !(var > 0.0) {
        return None;
    }
    let t = mean / (var / m).sqrt();
    let dist = StudentsT::new(0.0, 1.0, m - 1.0).ok()?;
    let p = 2.0 * dist.cdf(-t.abs());
    (t.is_finite() && p.is_finite()).then_some((t, p))
}

fn paired(records: &[RunRecord], other: Method) -> PairedTest {
    let mut a = (Vec::new(), Vec::new());
    let mut b = (Vec::new(), Vec::new());
    for rec in records {
        let find = |m: Method| rec.results.iter().find(|r| r.method == m && r.succeeded());
        if let (Some(s), Some(o)) = (find(Method::Sar), find(other)) {
            a.0.extend(s.angle_a);
            a.1.extend(o.angle_a);
            b.0.extend(s.angle_b);
            b.1.extend(o.angle_b);
        }
    }
    let ta = paired_t_test(&a.0, &a.1);
    let tb = paired_t_test(&b.0, &b.1);
    PairedTest {
        method: other,
        pairs: a.0.len(),
        t_angle_a: ta.map(|v| v.0),
        p_value_angle_a: ta.map(|v| v.1),
        t_angle_b: tb.map(|v| v.0),
        p_value_angle_b: tb.map(|v| v.1),
    }
}

/// Monte-Carlo campaign: `runs` datasets from `design`, run `m` seeded by
/// `seed ^ m`, each method fitted with the design's true rank.
pub fn run_campaign(
    design: &DesignSpec,
    methods: &[Method],
    runs: usize,
    seed: u64,
    options: &CampaignOptions,
) -> Result<SimulationReport> {
    if runs == 0 {
        return Err(Error::Contract("a campaign needs at least one run".into()));
    }
    if methods.is_empty() {
        return Err(Error::Contract("a campaign needs at least one method".into()));
    }
    let mut methods = methods.to_vec();
    methods.sort();
    methods.dedup();
    let started = Instant::now();
    let truth = true_canonical_vectors(design)?;
    let job = |run: usize| single_run(design, &methods, &truth, run, seed, &options.sar);
    let per_run: Vec<RunRecord> = if options.threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(options.threads)
            .build()
            .map_err(|e| Error::Contract(format!("cannot start worker threads: {e}")))?;
        pool.install(|| (0..runs).into_par_iter().map(job).collect())
    } else {
        (0..runs).map(job).collect()
    };

    let feasible = cca_feasible(design.n, design.p, design.q);
    let summaries = methods
        .iter()
        .map(|&m| summarise(m, m != Method::Cca || feasible, &per_run))
        .collect();
    let paired_tests = if methods.contains(&Method::Sar) {
        methods
            .iter()
            .filter(|m| **m != Method::Sar && (**m != Method::Cca || feasible))
            .map(|&m| paired(&per_run, m))
            .collect()
    } else {
        Vec::new()
    };
    Ok(SimulationReport {
        schema_version: SCHEMA_VERSION,
        design: design.name,
        n: design.n,
        p: design.p,
        q: design.q,
        true_rank: design.true_rank,
        runs,
        seed,
        epsilon: options.sar.epsilon,
        methods: summaries,
        paired_tests,
        per_run,
        wall_time_seconds: options
            .record_wall_time
            .then(|| started.elapsed().as_secs_f64()),
    })
}

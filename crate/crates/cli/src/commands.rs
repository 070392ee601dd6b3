use std::fmt::Write as _;
use std::io::Write;

use serde::Serialize;

use sarcca_core::cca::{default_ridge_grid, RankSelection};
use sarcca_core::linalg::{center_columns, correlation};
use sarcca_core::sar::{PairSummary, RankChoice};
use sarcca_core::simbench::{
    build_design, fit_method, loo_cv_score, run_campaign, sample_dataset, sample_rows,
    CampaignOptions, LooSettings, Method, SimulationReport, SCHEMA_VERSION,
};
use sarcca_core::{
    canonical_ridge, classical_cca, ridge_cv, select_rank, CcaModel, Mat, RidgeParams, SarConfig,
};

use crate::args::{CvArgs, FitArgs, Format, OutputArgs, RankArg, SampleArgs, SimulateArgs};
use crate::csvio::{format_value, read_matrix, write_matrix_file};
use crate::error::{CliError, CliResult};

/// Where a subcommand's output document goes when `--out` is absent.
pub struct Io<'a> {
    pub stdout: &'a mut dyn Write,
}

fn emit(io: &mut Io<'_>, output: &OutputArgs, body: &str) -> CliResult<()> {
    match &output.out {
        Some(path) => std::fs::write(path, body)
            .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display()))),
        None => Ok(io.stdout.write_all(body.as_bytes())?),
    }
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn optional(v: Option<f64>) -> String {
    v.map(format_value).unwrap_or_default()
}

fn rows(m: &Mat) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn load_pair(x: &std::path::Path, y: &std::path::Path) -> CliResult<(Mat, Mat)> {
    let x = read_matrix(x)?;
    let y = read_matrix(y)?;
    if x.nrows() != y.nrows() {
        return Err(CliError::input(format!(
            "X has {} rows but Y has {}",
            x.nrows(),
            y.nrows()
        )));
    }
    Ok((x, y))
}

#[derive(Debug, Serialize)]
pub struct FitReport {
    pub schema_version: u32,
    pub method: Method,
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub rank: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank_selection: Option<RankSelection>,
    /// `p × rank`, row-major.
    pub a: Vec<Vec<f64>>,
    /// `q × rank`, row-major.
    pub b: Vec<Vec<f64>>,
    pub rho_hat: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ridge: Option<RidgeParams>,
    /// SAR only: selected penalties and convergence per pair.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<PairSummary>>,
}

// Ridge or classical CCA; `auto` fits the full spectrum (at most n − 1
// pairs), applies the ratio rule and keeps the leading pairs.
fn fit_dense(
    method: Method,
    x: &Mat,
    y: &Mat,
    rank: RankArg,
    seed: u64,
) -> CliResult<(CcaModel, Option<RidgeParams>, Option<RankSelection>)> {
    let rmax = x.ncols().min(y.ncols()).min(x.nrows().saturating_sub(1)).max(1);
    let wanted = match rank {
        RankArg::Auto => rmax,
        RankArg::Fixed(r) => r,
    };
    let (model, ridge) = if method == Method::Ridge {
        let grid = default_ridge_grid();
        let params = ridge_cv(x, y, &grid, &grid, SarConfig::default().ridge_folds, seed)?;
        (canonical_ridge(x, y, params, wanted)?, Some(params))
    } else {
        (classical_cca(x, y, wanted)?, None)
    };
    if rank != RankArg::Auto {
        return Ok((model, ridge, None));
    }
    let selection = select_rank(model.rho.as_slice().expect("contiguous"))?;
    let r = selection.rank;
    let keep = ndarray::s![.., ..r];
    let model = CcaModel {
        a: model.a.slice(keep).to_owned(),
        b: model.b.slice(keep).to_owned(),
        rho: model.rho.slice(ndarray::s![..r]).to_owned(),
    };
    Ok((model, ridge, Some(selection)))
}

pub fn fit(args: &FitArgs, io: &mut Io<'_>) -> CliResult<()> {
    let (x, y) = load_pair(&args.data.x, &args.data.y)?;
    let (a, b, ridge, rank_selection, pairs) = match args.method {
        Method::Sar => {
            let config = SarConfig {
                epsilon: args.epsilon,
                lambda_overrides: args.lambda.overrides(),
                seed: args.seed,
                ..SarConfig::default()
            };
            let fit = fit_method(Method::Sar, &x, &y, args.rank.into(), &config, None)?;
            let model = fit.sar.expect("SAR fits carry their model");
            (fit.a, fit.b, model.ridge_params, model.rank_selection, Some(model.pairs))
        }
        method => {
            let (model, ridge, selection) = fit_dense(method, &x, &y, args.rank, args.seed)?;
            (model.a, model.b, ridge, selection, None)
        }
    };
    let (xc, _) = center_columns(&x)?;
    let (yc, _) = center_columns(&y)?;
    let (u, v) = (xc.dot(&a), yc.dot(&b));
    let rho_hat = (0..a.ncols()).map(|l| correlation(u.column(l), v.column(l))).collect();
    let report = FitReport {
        schema_version: SCHEMA_VERSION,
        method: args.method,
        n: x.nrows(),
        p: x.ncols(),
        q: y.ncols(),
        rank: a.ncols(),
        rank_selection,
        a: rows(&a),
        b: rows(&b),
        rho_hat,
        ridge,
        pairs,
    };
    let body = match args.output.format {
        Format::Json => json(&report),
        Format::Csv => fit_csv(&report),
    };
    emit(io, &args.output, &body)
}

fn fit_csv(r: &FitReport) -> String {
    let mut s = String::from("quantity,row,column,value\n");
    for (name, m) in [("a", &r.a), ("b", &r.b)] {
        for (i, row) in m.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let _ = writeln!(s, "{name},{},{},{}", i + 1, j + 1, format_value(*v));
            }
        }
    }
    for (l, v) in r.rho_hat.iter().enumerate() {
        let _ = writeln!(s, "rho_hat,{},,{}", l + 1, format_value(*v));
    }
    for (l, p) in r.pairs.iter().flatten().enumerate() {
        let _ = writeln!(s, "lambda_a,{},,{}", l + 1, format_value(p.lambda_a));
        let _ = writeln!(s, "lambda_b,{},,{}", l + 1, format_value(p.lambda_b));
        let _ = writeln!(s, "converged,{},,{}", l + 1, u8::from(p.converged));
    }
    s
}

/// Summary table of a campaign. Numbers print in the shortest form that
/// parses back to the reported value.
pub fn summary_table(report: &SimulationReport) -> String {
    let mut s = format!(
        "design {} (n={}, p={}, q={}, rank {}), {} runs, seed {}\n",
        report.design, report.n, report.p, report.q, report.true_rank, report.runs, report.seed
    );
    let cell = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| v.to_string());
    let _ = writeln!(
        s,
        "{:<6} {:>24} {:>24} {:>24} {:>24} {:>24} {:>24} {:>5} {:>6}",
        "method", "angle_a", "angle_b", "tpr_a", "tnr_a", "tpr_b", "tnr_b", "ok", "failed"
    );
    for m in &report.methods {
        if !m.feasible {
            let _ = writeln!(s, "{:<6} infeasible for this design", m.method.as_str());
            continue;
        }
        let _ = writeln!(
            s,
            "{:<6} {:>24} {:>24} {:>24} {:>24} {:>24} {:>24} {:>5} {:>6}",
            m.method.as_str(),
            cell(m.mean_angle_a),
            cell(m.mean_angle_b),
            cell(m.mean_tpr_a),
            cell(m.mean_tnr_a),
            cell(m.mean_tpr_b),
            cell(m.mean_tnr_b),
            m.successes,
            m.failures
        );
    }
    s
}

pub fn simulate(args: &SimulateArgs, io: &mut Io<'_>) -> CliResult<()> {
    let design = build_design(&args.design)?;
    let options = CampaignOptions {
        sar: SarConfig { epsilon: args.epsilon, ..SarConfig::default() },
        threads: args.threads,
        record_wall_time: false,
    };
    let report = run_campaign(&design, &args.methods, args.runs as usize, args.seed, &options)?;
    let body = match args.output.format {
        Format::Json => json(&report),
        Format::Csv => {
            let mut s = String::from("method,metric,value\n");
            for (method, metric, value) in report.metric_rows() {
                let _ = writeln!(s, "{method},{metric},{}", optional(value));
            }
            s
        }
    };
    if let Some(path) = &args.output.out {
        std::fs::write(path, body)
            .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))?;
    }
    io.stdout.write_all(summary_table(&report).as_bytes())?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoreRow {
    pub method: Method,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioRow {
    pub method: Method,
    pub relative_to: Method,
    pub ratio: f64,
}

#[derive(Debug, Serialize)]
pub struct CvReport {
    pub schema_version: u32,
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub rank: RankChoice,
    pub scores: Vec<ScoreRow>,
    /// Each method's score divided by SAR's; SAR itself is the reference
    /// and gets no row.
    pub ratios: Vec<RatioRow>,
}

/// Every score divided by SAR's, with SAR's own ratio exactly 1. Empty if
/// SAR was not scored.
pub fn relative_scores(scores: &[ScoreRow]) -> Vec<RatioRow> {
    let Some(reference) = scores.iter().find(|s| s.method == Method::Sar) else {
        return Vec::new();
    };
    scores
        .iter()
        .map(|s| RatioRow {
            method: s.method,
            relative_to: Method::Sar,
            ratio: if s.method == Method::Sar { 1.0 } else { s.score / reference.score },
        })
        .collect()
}

pub fn cv(args: &CvArgs, io: &mut Io<'_>) -> CliResult<()> {
    let (x, y) = load_pair(&args.data.x, &args.data.y)?;
    let mut methods = args.methods.clone();
    methods.dedup();
    if args.rank == RankArg::Auto && methods.iter().any(|m| *m != Method::Sar) {
        return Err(CliError::input("--rank auto is only supported for sar in cv; pass an integer rank"));
    }
    let settings = LooSettings {
        rank: args.rank.into(),
        sar: SarConfig {
            epsilon: args.epsilon,
            lambda_overrides: args.lambda.overrides(),
            seed: args.seed,
            ..SarConfig::default()
        },
        ridge: None,
        threads: args.threads,
    };
    let mut scores = Vec::with_capacity(methods.len());
    for &method in &methods {
        let score = loo_cv_score(&x, &y, method, &settings).map_err(|e| {
            let mut err = CliError::from(e);
            err.message = format!("{method}: {}", err.message);
            err
        })?;
        scores.push(ScoreRow { method, score });
    }
    let ratios = relative_scores(&scores)
        .into_iter()
        .filter(|r| r.method != Method::Sar)
        .collect();
    let report = CvReport {
        schema_version: SCHEMA_VERSION,
        n: x.nrows(),
        p: x.ncols(),
        q: y.ncols(),
        rank: settings.rank,
        scores,
        ratios,
    };
    let body = match args.output.format {
        Format::Json => json(&report),
        Format::Csv => {
            let mut s = String::from("kind,method,value\n");
            for r in &report.scores {
                let _ = writeln!(s, "score,{},{}", r.method, format_value(r.score));
            }
            for r in &report.ratios {
                let _ = writeln!(s, "ratio,{},{}", r.method, format_value(r.ratio));
            }
            s
        }
    };
    emit(io, &args.output, &body)
}

pub fn sample(args: &SampleArgs, _io: &mut Io<'_>) -> CliResult<()> {
    let design = build_design(&args.design)?;
    let (x, y) = match args.n {
        Some(n) if n < 2 => return Err(CliError::input("--n must be at least 2")),
        Some(n) => sample_rows(&design, n, args.seed),
        None => sample_dataset(&design, args.seed),
    };
    write_matrix_file(&args.x, &x)?;
    write_matrix_file(&args.y, &y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sar_ratio_to_itself_is_one() {
        let scores = [
            ScoreRow { method: Method::Sar, score: 0.3 },
            ScoreRow { method: Method::Ridge, score: 0.6 },
        ];
        let r = relative_scores(&scores);
        assert_eq!(r[0].ratio, 1.0);
        assert_eq!(r[1].ratio, 2.0);
        let zero = [ScoreRow { method: Method::Sar, score: 0.0 }];
        assert_eq!(relative_scores(&zero)[0].ratio, 1.0);
        assert!(relative_scores(&scores[1..]).is_empty());
    }
}

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sarcca_core::sar::RankChoice;
use sarcca_core::simbench::Method;
use sarcca_core::DEFAULT_SEED;

#[derive(Debug, Parser)]
#[command(name = "sarcca", version, about = "Sparse canonical correlation analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit canonical vectors to two CSV data sets.
    Fit(FitArgs),
    /// Run a Monte-Carlo campaign on a simulation design.
    Simulate(SimulateArgs),
    /// Leave-one-out cross-validation scores per method.
    Cv(CvArgs),
    /// Draw one data set from a simulation design and write it as CSV.
    Sample(SampleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankArg {
    Auto,
    Fixed(usize),
}

impl FromStr for RankArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(RankArg::Auto);
        }
        match s.parse::<usize>() {
            Ok(r) if r > 0 => Ok(RankArg::Fixed(r)),
            _ => Err(format!("expected 'auto' or a positive integer, got '{s}'")),
        }
    }
}

impl From<RankArg> for RankChoice {
    fn from(r: RankArg) -> Self {
        match r {
            RankArg::Auto => RankChoice::Auto,
            RankArg::Fixed(k) => RankChoice::Fixed(k),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaArg {
    Bic,
    Fixed(f64),
}

impl LambdaArg {
    pub fn overrides(self) -> Option<Vec<f64>> {
        match self {
            LambdaArg::Bic => None,
            LambdaArg::Fixed(v) => Some(vec![v]),
        }
    }
}

impl FromStr for LambdaArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("bic") {
            return Ok(LambdaArg::Bic);
        }
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() && v >= 0.0 => Ok(LambdaArg::Fixed(v)),
            _ => Err(format!("expected 'bic' or a nonnegative number, got '{s}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

fn positive_float(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
        _ => Err(format!("expected a positive number, got '{s}'")),
    }
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// CSV file with the X observations (rows) and variables (columns).
    #[arg(long)]
    pub x: PathBuf,
    /// CSV file with the Y observations, row-aligned with X.
    #[arg(long)]
    pub y: PathBuf,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value = "sar")]
    pub method: Method,
    /// Number of canonical pairs, or `auto` for the maximum eigenvalue
    /// ratio rule.
    #[arg(long, default_value = "auto")]
    pub rank: RankArg,
    /// `bic` or a fixed lasso penalty (SAR only).
    #[arg(long, default_value = "bic")]
    pub lambda: LambdaArg,
    #[arg(long, default_value = "1e-3", value_parser = positive_float)]
    pub epsilon: f64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
#[command(after_help = "The summary table always goes to standard output; the full report is written only when --out is given.")]
pub struct SimulateArgs {
    #[arg(long)]
    pub design: String,
    #[arg(long, alias = "method", value_delimiter = ',', default_value = "sar,ridge,cca")]
    pub methods: Vec<Method>,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pub runs: u64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, default_value = "1e-3", value_parser = positive_float)]
    pub epsilon: f64,
    /// Worker threads; results do not depend on this.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, alias = "method", value_delimiter = ',', default_value = "sar,ridge")]
    pub methods: Vec<Method>,
    #[arg(long, default_value = "1")]
    pub rank: RankArg,
    #[arg(long, default_value = "bic")]
    pub lambda: LambdaArg,
    #[arg(long, default_value = "1e-3", value_parser = positive_float)]
    pub epsilon: f64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub design: String,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Number of observations; the design's own size when omitted.
    #[arg(long)]
    pub n: Option<usize>,
    /// Destination of the X block.
    #[arg(long)]
    pub x: PathBuf,
    /// Destination of the Y block.
    #[arg(long)]
    pub y: PathBuf,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_and_lambda_parse() {
        assert_eq!("auto".parse::<RankArg>(), Ok(RankArg::Auto));
        assert_eq!("3".parse::<RankArg>(), Ok(RankArg::Fixed(3)));
        assert!("0".parse::<RankArg>().is_err());
        assert_eq!("bic".parse::<LambdaArg>(), Ok(LambdaArg::Bic));
        assert_eq!("0".parse::<LambdaArg>(), Ok(LambdaArg::Fixed(0.0)));
        assert!("-1".parse::<LambdaArg>().is_err());
    }

    #[test]
    fn methods_split_on_commas() {
        let cli = Cli::try_parse_from(["sarcca", "simulate", "--design", "uncorrelated", "--methods", "sar,cca"]).unwrap();
        let Command::Simulate(args) = cli.command else { panic!("wrong subcommand") };
        assert_eq!(args.methods, vec![Method::Sar, Method::Cca]);
        assert_eq!(args.seed, 12345);
    }
}

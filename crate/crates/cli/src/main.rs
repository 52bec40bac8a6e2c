//! `oqcv`: slices, negativities, sampling and circuit checks from the command line.
//!
//! Exit codes: 0 on success, 2 for invalid input, 3 when a numerical
//! procedure gave up (the message carries the last estimate), 1 otherwise.

mod config;
mod run;

use clap::{Args, Parser, Subcommand, ValueEnum};
use oqcv::OqcvError;
use serde::Serialize;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "oqcv", version, about = "Quasiprobabilities of sequential heterodyne measurements")]
struct Cli {
    /// JSON file of flags, or a manifest written by an earlier run
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// W(α, ·) on a β grid for a fixed first outcome
    #[command(args_override_self = true)]
    Slice(SliceArgs),
    /// Total negativity of one state
    #[command(args_override_self = true)]
    Negativity(NegativityArgs),
    /// Negativity against mean photon number for a state family
    #[command(args_override_self = true)]
    Sweep(SweepArgs),
    /// Draw outcomes from the sequential or second-only experiment
    #[command(args_override_self = true)]
    Sample(SampleArgs),
    /// Histogram estimate of W from two sample batches
    #[command(args_override_self = true)]
    EmpiricalW(EmpiricalArgs),
    /// Compare the Gaussian circuit's outcome density with 2Q(√2μ)
    #[command(args_override_self = true)]
    SchemeCheck(SchemeArgs),
    /// Fidelity of the post-measurement state against ancilla squeezing
    #[command(args_override_self = true)]
    CollapseCurve(CollapseArgs),
    /// Four-index Hermite moments of the heterodyne W
    #[command(args_override_self = true)]
    Gamma(GammaArgs),
}

const SUBCOMMANDS: &[&str] =
    &["slice", "negativity", "sweep", "sample", "empirical-w", "scheme-check", "collapse-curve", "gamma"];

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, PartialEq)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, PartialEq)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Sequential,
    SecondOnly,
}

#[derive(Args, Serialize)]
pub struct SliceArgs {
    #[arg(long)]
    pub state: String,
    /// Fixed first outcome `re,im`
    #[arg(long, default_value = "0,0", allow_hyphen_values = true)]
    pub alpha: String,
    /// Points per axis, `NxM`
    #[arg(long, default_value = "101x101")]
    pub grid: String,
    /// Half-width of the β square (default √n̄ + 6)
    #[arg(long)]
    pub extent: Option<f64>,
    #[arg(long, default_value = "0,0", allow_hyphen_values = true)]
    pub center: String,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Args, Serialize)]
pub struct NegativityArgs {
    #[arg(long)]
    pub state: String,
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    /// Integrate over all four dimensions whatever the symmetry
    #[arg(long)]
    pub full: bool,
    /// Node cap per axis
    #[arg(long)]
    pub max_nodes: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Args, Serialize)]
pub struct SweepArgs {
    /// vacuum, coherent, number, squeezed, cat+, cat- or thermal
    #[arg(long)]
    pub family: String,
    /// Comma-separated, strictly increasing
    #[arg(long, value_delimiter = ',', required = true)]
    pub nbars: Vec<f64>,
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    #[arg(long)]
    pub full: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Args, Serialize)]
pub struct SampleArgs {
    #[arg(long)]
    pub state: String,
    #[arg(long, default_value_t = 100_000)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Mode::Sequential)]
    pub mode: Mode,
    /// CSV of outcomes; a `.json` sidecar is written beside it
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Serialize)]
pub struct EmpiricalArgs {
    /// Batch from `sample --mode sequential`
    #[arg(long)]
    pub sequential: PathBuf,
    /// Batch from `sample --mode second-only`
    #[arg(long)]
    pub second_only: PathBuf,
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long)]
    pub width: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub center: Option<String>,
    /// Add the exact bin averages and their total-variation distance
    #[arg(long)]
    pub analytic: bool,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Args, Serialize)]
pub struct SchemeArgs {
    /// A state with a regular P function
    #[arg(long)]
    pub state: String,
    #[arg(long, default_value = "41x41")]
    pub grid: String,
    /// Half-width of the (x, p) square
    #[arg(long, default_value_t = 2.0)]
    pub extent: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Args, Serialize)]
pub struct CollapseArgs {
    /// Homodyne reading on the input mode
    #[arg(long, allow_hyphen_values = true)]
    pub x: f64,
    /// Homodyne reading on the vacuum mode
    #[arg(long, allow_hyphen_values = true)]
    pub p: f64,
    /// Coherent input amplitude `re,im`
    #[arg(long, default_value = "0,0", allow_hyphen_values = true)]
    pub input: String,
    /// Ancilla squeezing levels in dB
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 3.0, 10.0, 20.0, 40.0, 60.0])]
    pub db: Vec<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Args, Serialize)]
pub struct GammaArgs {
    #[arg(long)]
    pub state: String,
    /// Largest Hermite order per index
    #[arg(long, default_value_t = 4)]
    pub degree: usize,
    /// Quadrature nodes per axis
    #[arg(long, default_value_t = 64)]
    pub nodes: usize,
    /// Also integrate the moments of W directly and compare
    #[arg(long)]
    pub check: bool,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

/// A sweep point that failed for numerical reasons.
#[derive(Debug)]
pub struct SweepFailure(pub String);

impl std::fmt::Display for SweepFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for SweepFailure {}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<SweepFailure>().is_some() {
        return 3;
    }
    match e.chain().find_map(|c| c.downcast_ref::<OqcvError>()) {
        Some(o) if o.is_numerical() => 3,
        Some(OqcvError::Io(_)) | Some(OqcvError::Serde(_)) => 1,
        Some(_) => 2,
        None => 1,
    }
}

fn set_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("OQCV_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| OqcvError::Invalid(format!("OQCV_THREADS must be a positive integer, got '{v}'")))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let expanded = match config::expand(std::env::args_os().collect(), SUBCOMMANDS) {
        Ok(e) => e,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(&expanded.args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let ctx = run::Ctx::new(expanded.base);
    let result = set_threads().and_then(|_| match cli.command {
        Command::Slice(a) => run::slice(&ctx, a),
        Command::Negativity(a) => run::negativity(&ctx, a),
        Command::Sweep(a) => run::sweep(&ctx, a),
        Command::Sample(a) => run::sample(&ctx, a),
        Command::EmpiricalW(a) => run::empirical(&ctx, a),
        Command::SchemeCheck(a) => run::scheme_check(&ctx, a),
        Command::CollapseCurve(a) => run::collapse_curve(&ctx, a),
        Command::Gamma(a) => run::gamma(&ctx, a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
        let names: Vec<String> = Cli::command().get_subcommands().map(|c| c.get_name().to_string()).collect();
        assert_eq!(names, SUBCOMMANDS);
    }

    #[test]
    fn exit_codes() {
        let code = |e: OqcvError| exit_code(&anyhow::Error::new(e));
        assert_eq!(code(OqcvError::Invalid("x".into())), 2);
        assert_eq!(code(OqcvError::NotRepresentable("cat".into())), 2);
        assert_eq!(
            code(OqcvError::NotConverged { last: 0.1, previous: 0.2, error: 0.1, tolerance: 1e-3, nodes: 8 }),
            3
        );
        assert_eq!(code(OqcvError::Io("disk".into())), 1);
        assert_eq!(exit_code(&anyhow::Error::new(SweepFailure("n̄ = 3".into()))), 3);
    }
}

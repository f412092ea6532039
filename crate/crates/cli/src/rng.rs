use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use por_core::randomness::{fill_pool, run_suite, RandomnessError, SuiteConfig, SuiteReport};
use por_core::{EntropySource, SourceSpec};

use crate::config::Format;
use crate::error::{CliError, CliResult};

#[derive(Args, Debug, Clone)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["seed", "file", "os"])))]
pub struct RngArgs {
    /// Seeded ChaCha20 stream (reproducible)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Raw bytes from a file
    #[arg(long)]
    pub file: Option<PathBuf>,
    /// Operating-system entropy
    #[arg(long)]
    pub os: bool,
    #[arg(long, default_value_t = 1 << 20)]
    pub bits: usize,
    #[arg(long, default_value_t = por_core::randomness::DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, default_value_t = por_core::randomness::DEFAULT_BLOCK_LEN)]
    pub block_len: usize,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

fn randomness_error(e: RandomnessError) -> CliError {
    match e {
        RandomnessError::PoolTooShort { .. } | RandomnessError::BlockLenInvalid(_) | RandomnessError::EmptyRequest => {
            CliError::config(e)
        }
        other => CliError::runtime(other),
    }
}

fn render(report: &SuiteReport, spec: &SourceSpec, format: Format) -> String {
    match format {
        Format::Json => serde_json::to_string_pretty(report).expect("plain data serializes") + "\n",
        Format::Csv => {
            let mut out = String::from("test,statistic,p_value,passed\n");
            for r in &report.results {
                let _ = writeln!(out, "{},{},{},{}", r.test_name, r.statistic, r.p_value, r.passed);
            }
            out
        }
        Format::Text => {
            let mut out = format!("source {spec}, {} bits\n", report.pool_length_bits);
            for r in &report.results {
                let verdict = if r.passed { "pass" } else { "FAIL" };
                let _ = writeln!(out, "{:<16} p = {:.6}  {verdict}", r.test_name, r.p_value);
            }
            let _ = writeln!(
                out,
                "{}",
                if report.all_passed {
                    "all passed"
                } else {
                    "suite failed"
                }
            );
            out
        }
    }
}

/// Returns the rendered report and whether every test passed.
pub fn cmd_rngtest(args: &RngArgs) -> CliResult<(String, bool)> {
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(CliError::config(format!(
            "alpha must lie in (0, 1), got {}",
            args.alpha
        )));
    }
    let spec = match (&args.seed, &args.file) {
        (Some(s), _) => SourceSpec::SeededDeterministic(*s),
        (None, Some(p)) => SourceSpec::FileBacked(p.clone()),
        (None, None) => SourceSpec::OsEntropy,
    };
    let suite = SuiteConfig {
        alpha: args.alpha,
        block_len: args.block_len,
    };
    if args.bits < suite.min_bits() {
        return Err(randomness_error(RandomnessError::PoolTooShort {
            needed: suite.min_bits(),
            got: args.bits,
        }));
    }
    let mut source = EntropySource::open(&spec).map_err(randomness_error)?;
    let pool = fill_pool(&mut source, args.bits).map_err(randomness_error)?;
    let report = run_suite(&pool, &suite).map_err(randomness_error)?;
    Ok((render(&report, &spec, args.format), report.all_passed))
}

use crate::args::{Cli, Command};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::report::CsvSink;
use crate::studies::{self, TIMING_HEADER};
use crate::verify::{self, format_table, CheckResult, VerifyOptions};

pub fn run(cli: &Cli) -> CliResult<()> {
    let cfg = cli.common.resolve()?;
    if cfg.threads > 1 {
        eprintln!("note: running with {} threads; timing rows reflect that", cfg.threads);
    }
    // A second call would fail because the pool exists already; harmless.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global();
    match cli.command {
        Command::Verify { inject_fault } => {
            cmd_verify(&cfg, &VerifyOptions { inject_fault, ..VerifyOptions::standard() })
        }
        Command::BenchScaling => cmd_bench_scaling(&cfg),
        Command::BenchFastmult => cmd_bench_fastmult(&cfg),
        Command::ErrorVsS => cmd_error_vs_s(&cfg),
        Command::KernelShape => cmd_kernel_shape(&cfg),
        Command::RopeCheck => cmd_rope_check(&cfg),
    }
}

const CHECK_HEADER: [&str; 5] = ["check", "cases", "worst", "tolerance", "result"];

/// Prints the table, mirrors it to `cfg.output` as CSV when set, and fails on any failed check.
fn report_checks(
    cfg: &RunConfig,
    command: &str,
    checks: impl FnOnce() -> CliResult<Vec<CheckResult>>,
) -> CliResult<()> {
    let sink = match cfg.output {
        Some(_) => Some(CsvSink::open(cfg, command, &CHECK_HEADER)?),
        None => None,
    };
    let results = checks()?;
    print!("{}", format_table(&results));
    if let Some(mut sink) = sink {
        for r in &results {
            let result = if r.passed() { "PASS" } else { "FAIL" };
            sink.row([
                r.name.to_string(),
                r.cases.to_string(),
                format!("{:e}", r.worst),
                format!("{:e}", r.tolerance),
                result.to_string(),
            ])?;
        }
        sink.finish()?;
    }
    let failed: Vec<&CheckResult> = results.iter().filter(|r| !r.passed()).collect();
    for r in &failed {
        eprintln!("FAILED: {} (worst {:.3e} > {:.3e})", r.name, r.worst, r.tolerance);
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::ChecksFailed(failed.len()))
    }
}

pub fn cmd_verify(cfg: &RunConfig, opts: &VerifyOptions) -> CliResult<()> {
    report_checks(cfg, "verify", || verify::run_verify(cfg, opts))
}

pub fn cmd_rope_check(cfg: &RunConfig) -> CliResult<()> {
    report_checks(cfg, "rope-check", || verify::run_rope_checks(cfg, 20))
}

fn write_timings(
    cfg: &RunConfig,
    command: &str,
    study: impl FnOnce(&RunConfig) -> CliResult<Vec<studies::TimingRow>>,
) -> CliResult<()> {
    // Opened before timing so an unwritable path fails fast.
    let mut sink = CsvSink::open(cfg, command, &TIMING_HEADER)?;
    for r in study(cfg)? {
        sink.row(r.fields())?;
    }
    sink.finish()
}

pub fn cmd_bench_scaling(cfg: &RunConfig) -> CliResult<()> {
    write_timings(cfg, "bench-scaling", studies::bench_scaling)
}

pub fn cmd_bench_fastmult(cfg: &RunConfig) -> CliResult<()> {
    write_timings(cfg, "bench-fastmult", studies::bench_fastmult)
}

/// Rows `S,seed,rel_error`; the last row is `summary,<slope>,<slope stderr>` for the
/// log-log fit of the mean error against S.
pub fn cmd_error_vs_s(cfg: &RunConfig) -> CliResult<()> {
    let study = studies::error_vs_s(cfg)?;
    let mut sink = CsvSink::open(cfg, "error-vs-s", &["S", "seed", "rel_error"])?;
    for r in &study.rows {
        sink.row([r.size.to_string(), r.seed.to_string(), format!("{:.9e}", r.rel_error)])?;
    }
    sink.row(["summary".to_string(), format!("{:.6}", study.fit.slope), format!("{:.6}", study.fit.slope_stderr)])?;
    sink.finish()
}

pub fn cmd_kernel_shape(cfg: &RunConfig) -> CliResult<()> {
    let shape = studies::kernel_shape(cfg)?;
    let header = ["distance", "mask_mean", "mask_std", "ideal", "rbf", "laplace"];
    let mut sink = CsvSink::open(cfg, "kernel-shape", &header)?;
    for r in &shape.rows {
        sink.row(
            [r.distance, r.mask_mean, r.mask_std, r.ideal, r.rbf, r.laplace].map(|v| format!("{v:.9e}")),
        )?;
    }
    sink.finish()?;
    eprintln!("spearman(distance, mask_mean) = {:.4}", shape.spearman);
    Ok(())
}

//! Convergence benchmark CLI for the Morley-Wang-Xu penalty methods.
//!
//! Reproduces the three benchmark problems end to end and emits convergence
//! tables with rates, as CSV or markdown. Exit code 0 on success; any failed
//! solve or invalid configuration reports a diagnostic and exits nonzero.

use clap::Parser;
use morley::forms::MethodKind;
use morley::study::{emit_table, run_convergence_study, BenchConfig, ExampleId, TableFormat};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(
    name = "bench",
    about = "Convergence benchmarks for Morley-Wang-Xu penalty methods",
    long_about = "Runs a (epsilon, mesh level) sweep of the selected fourth-order \
                  singular perturbation benchmark and reports errors and rates."
)]
struct Args {
    /// Benchmark problem: 1 (2D smooth), 2 (2D boundary layer), 3 (3D smooth).
    #[arg(long, value_parser = parse_example)]
    example: ExampleId,

    /// Discretization: ipmwx, spmwx, or nitsche.
    #[arg(long, value_parser = parse_method)]
    method: MethodKind,

    /// Comma-separated perturbation strengths; "0" is allowed and exact.
    /// Defaults to the benchmark's published sweep.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    eps: Option<Vec<f64>>,

    /// Coarsest mesh level (grid spacing 2^-level).
    #[arg(long, default_value_t = 2)]
    min_level: usize,

    /// Finest mesh level.
    #[arg(long, default_value_t = 5)]
    max_level: usize,

    /// Interior penalty weight.
    #[arg(long, default_value_t = 5.0)]
    sigma: f64,

    /// Super-penalty exponent in (0, 1].
    #[arg(long, default_value_t = 1.0)]
    p: f64,

    /// Nitsche penalty on the boundary normal derivative.
    #[arg(long, default_value_t = 5.0)]
    sigma1: f64,

    /// Nitsche penalty on the boundary value.
    #[arg(long, default_value_t = 5.0)]
    sigma2: f64,

    /// Degree of the local projection in the oscillation term.
    #[arg(long, default_value_t = 2)]
    r: usize,

    /// Quadrature degree for stiffness and penalty assembly.
    #[arg(long, default_value_t = 4)]
    quad_assembly: usize,

    /// Quadrature degree for load vectors and error norms.
    #[arg(long, default_value_t = 6)]
    quad_error: usize,

    /// Relative residual tolerance of the linear solver.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,

    /// Output format: csv or md.
    #[arg(long, default_value = "csv", value_parser = parse_format)]
    format: TableFormat,

    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_example(s: &str) -> Result<ExampleId, String> {
    let n: usize = s.parse().map_err(|_| format!("not an example number: {s}"))?;
    ExampleId::from_number(n).ok_or_else(|| format!("example must be 1, 2 or 3, got {n}"))
}

fn parse_method(s: &str) -> Result<MethodKind, String> {
    match s {
        "ipmwx" => Ok(MethodKind::InteriorPenalty),
        "spmwx" => Ok(MethodKind::SuperPenalty),
        "nitsche" => Ok(MethodKind::Nitsche),
        other => Err(format!("method must be ipmwx, spmwx or nitsche, got {other}")),
    }
}

fn parse_format(s: &str) -> Result<TableFormat, String> {
    match s {
        "csv" => Ok(TableFormat::Csv),
        "md" => Ok(TableFormat::Markdown),
        other => Err(format!("format must be csv or md, got {other}")),
    }
}

fn run(args: Args) -> Result<(), String> {
    let mut config = BenchConfig::<f64>::new(args.example, args.method);
    if let Some(eps) = args.eps {
        config.eps_list = eps;
    }
    config.min_level = args.min_level;
    config.max_level = args.max_level;
    config.sigma = args.sigma;
    config.p = args.p;
    config.sigma1 = args.sigma1;
    config.sigma2 = args.sigma2;
    config.proj_degree = args.r;
    config.quad_assembly = args.quad_assembly;
    config.quad_error = args.quad_error;
    config.tol = args.tol;

    let table = run_convergence_study(&config).map_err(|e| e.to_string())?;

    match &args.out {
        Some(path) => {
            let file = File::create(path)
                .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
            let mut writer = BufWriter::new(file);
            emit_table(&table, args.format, &mut writer).and_then(|_| writer.flush())
        }
        None => emit_table(&table, args.format, &mut io::stdout().lock()),
    }
    .map_err(|e| format!("output failed: {e}"))
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("bench: {msg}");
            ExitCode::FAILURE
        }
    }
}

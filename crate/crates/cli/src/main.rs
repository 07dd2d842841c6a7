//! `depsub`: dataset generation, single estimation runs, Monte Carlo studies
//! and result summaries.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use depsub::study::{
    default_workers, read_results, run_study, summarize, write_summary, GroupKey, StudyConfig,
    WORKERS_ENV,
};
use depsub::{
    copula_truth, estimate, generate_seeded, subspace_distance, CopulaFamily, Dataset, Design,
    Error, EstimateRequest, EstimatorSettings, KernelSpec, MarginMode, MeasureKind, Method,
};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "depsub",
    version,
    about = "Central dependence subspace estimation and simulation harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a dataset from the simulation model and write it as CSV.
    Simulate(SimulateArgs),
    /// Estimate the copula subspace of a dataset file.
    Estimate(EstimateArgs),
    /// Run (or resume) a scenario-grid study described by a config file.
    Study(StudyArgs),
    /// Aggregate a results CSV by scenario columns.
    Summarize(SummarizeArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: usize,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    alpha: f64,
    #[arg(long, default_value = "gaussian")]
    copula: CopulaFamily,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    /// Dataset CSV (`x1..xp,y1,y2[,u1,u2]`).
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "opga")]
    method: Method,
    #[arg(long, default_value = "spearman")]
    measure: MeasureKind,
    #[arg(long, default_value = "nonparametric")]
    margins: MarginMode,
    /// Dimension of the estimated subspace.
    #[arg(long, default_value_t = 1)]
    d: usize,
    /// Copula family assumed by the `par` baseline.
    #[arg(long)]
    copula: Option<CopulaFamily>,
    /// Link strength assumed by the `par` baseline.
    #[arg(long)]
    alpha: Option<f64>,
    /// Print a JSON record instead of the text report.
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    tuning: Tuning,
}

#[derive(Args)]
struct Tuning {
    #[arg(long)]
    kernel: Option<KernelSpec>,
    /// Per-coordinate trimming quantile; 0 disables trimming.
    #[arg(long)]
    trim_quantile: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    h0: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    h_inf: Option<f64>,
}

impl Tuning {
    fn settings(&self) -> Result<EstimatorSettings, CliError> {
        let mut s = EstimatorSettings::default();
        if let Some(k) = self.kernel {
            s.kernel = k;
        }
        if let Some(q) = self.trim_quantile {
            if !(0.0..0.5).contains(&q) {
                return Err(CliError::Usage(
                    "--trim-quantile must lie in [0, 0.5)".into(),
                ));
            }
            s.trim_quantile = q;
        }
        if let Some(t) = self.tol {
            s.tol = t;
        }
        if let Some(m) = self.max_iter {
            s.max_iter = m;
        }
        for (name, v) in [
            ("--h0", self.h0),
            ("--rho", self.rho),
            ("--h-inf", self.h_inf),
        ] {
            if matches!(v, Some(x) if !(x > 0.0 && x.is_finite())) {
                return Err(CliError::Usage(format!("{name} must be positive")));
            }
        }
        s.h0 = self.h0;
        s.rho = self.rho;
        s.h_inf = self.h_inf;
        Ok(s)
    }
}

#[derive(Args)]
struct StudyArgs {
    /// Config file of `key = value` lines.
    config: PathBuf,
    /// Results CSV; overrides `output` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; overrides `workers` in the config and the environment.
    #[arg(long)]
    workers: Option<usize>,
    /// Suppress progress lines on stderr.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct SummarizeArgs {
    /// Results CSV written by `study`.
    results: PathBuf,
    /// Comma-separated group-by columns.
    #[arg(long, default_value = "n,p,d,alpha,copula,measure,margins,method")]
    by: String,
    /// Append `ln_n` and `ln_mean_error` columns.
    #[arg(long)]
    loglog: bool,
    /// Tab-separated output.
    #[arg(long)]
    tsv: bool,
    /// Output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum CliError {
    /// Invalid flags or flag combinations: exit code 1.
    Usage(String),
    /// Unreadable, malformed or unsuitable input: exit code 2.
    Data(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

fn io_error(path: &Path, e: io::Error) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Estimate(a) => run_estimate(a),
        Command::Study(a) => study(a),
        Command::Summarize(a) => summarize_cmd(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (kind, msg) = match &e {
                CliError::Usage(m) => ("usage error", m),
                CliError::Data(m) => ("data error", m),
            };
            eprintln!("depsub: {kind}: {msg}");
            ExitCode::from(e.code())
        }
    }
}

fn simulate(a: SimulateArgs) -> Result<(), CliError> {
    let design = Design::new(a.n, a.p, a.d, a.alpha, a.copula)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let data = generate_seeded(&design, a.seed);
    let file = File::create(&a.out).map_err(|e| io_error(&a.out, e))?;
    let mut out = BufWriter::new(file);
    data.write_csv(&mut out)
        .and_then(|_| out.flush())
        .map_err(|e| io_error(&a.out, e))
}

fn format_row(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x:.6}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn run_estimate(a: EstimateArgs) -> Result<(), CliError> {
    let settings = a.tuning.settings()?;
    let model = match (a.method, a.copula, a.alpha) {
        (Method::Par, Some(c), Some(alpha)) => Some((c, alpha)),
        (Method::Par, _, _) => {
            return Err(CliError::Usage(
                "--method par needs --copula and --alpha".into(),
            ))
        }
        _ => None,
    };
    let file = File::open(&a.data).map_err(|e| io_error(&a.data, e))?;
    let data = Dataset::read_csv(BufReader::new(file))
        .map_err(|e| CliError::Data(format!("{}: {e}", a.data.display())))?;
    if a.d == 0 || a.d > data.p() {
        return Err(CliError::Usage(format!(
            "--d {} outside 1..={}",
            a.d,
            data.p()
        )));
    }
    if a.margins == MarginMode::Known && data.u_true.is_none() {
        return Err(CliError::Data(format!(
            "unsupported margin mode `known`: {} has no u1,u2 columns",
            a.data.display()
        )));
    }
    let request = EstimateRequest {
        d: a.d,
        measure: a.measure,
        margins: a.margins,
        method: a.method,
        model,
    };
    let header = json!({
        "data": a.data.display().to_string(),
        "n": data.n(),
        "p": data.p(),
        "d": a.d,
        "method": a.method.name(),
        "measure": a.measure.name(),
        "margins": a.margins.name(),
    });
    let record = match estimate(&data, &request, &settings) {
        Ok(est) => {
            let error = match data.u_true {
                Some(_) => {
                    let truth =
                        copula_truth(data.p(), a.d).map_err(|e| CliError::Usage(e.to_string()))?;
                    Some(
                        subspace_distance(&est.basis, &truth)
                            .map_err(|e| CliError::Data(e.to_string()))?,
                    )
                }
                None => None,
            };
            let m = est.basis.matrix();
            let basis: Vec<Vec<f64>> = (0..m.rows()).map(|i| m.row(i).to_vec()).collect();
            json!({
                "failed": false,
                "error": error,
                "basis": basis,
                "eigenvalues": est.eigenvalues,
                "iterations": est.iterations,
                "h_final": est.h_final,
                "converged": est.converged,
                "trimmed_fraction": est.trimmed_fraction,
                "flags": est.flags(),
            })
        }
        Err(e @ (Error::EstimationFailed(_) | Error::DegenerateNeighborhood { .. })) => json!({
            "failed": true,
            "reason": e.to_string(),
        }),
        Err(e @ Error::Contract(_)) => return Err(CliError::Usage(e.to_string())),
        Err(e) => return Err(CliError::Data(e.to_string())),
    };
    let mut merged = header;
    merged
        .as_object_mut()
        .unwrap()
        .extend(record.as_object().unwrap().clone());
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let written = if a.json {
        writeln!(out, "{merged}")
    } else {
        write_report(&mut out, &merged)
    };
    written.map_err(|e| CliError::Data(format!("stdout: {e}")))
}

fn write_report(out: &mut impl Write, r: &serde_json::Value) -> io::Result<()> {
    let text = |k: &str| match &r[k] {
        serde_json::Value::String(s) => s.clone(),
        serde_json::Value::Null => "NA".into(),
        v => v.to_string(),
    };
    for k in ["data", "n", "p", "d", "method", "measure", "margins"] {
        writeln!(out, "{k}={}", text(k))?;
    }
    if r["failed"] == true {
        writeln!(out, "reason={}", text("reason"))?;
        return writeln!(out, "failed=true");
    }
    for k in ["iterations", "h_final", "converged", "trimmed_fraction"] {
        writeln!(out, "{k}={}", text(k))?;
    }
    let floats = |v: &serde_json::Value| -> Vec<f64> {
        v.as_array()
            .unwrap()
            .iter()
            .map(|x| x.as_f64().unwrap_or(f64::NAN))
            .collect()
    };
    writeln!(
        out,
        "eigenvalues={}",
        format_row(&floats(&r["eigenvalues"]))
    )?;
    writeln!(out, "basis:")?;
    for row in r["basis"].as_array().unwrap() {
        writeln!(out, "  {}", format_row(&floats(row)))?;
    }
    writeln!(out, "error={}", text("error"))?;
    let flags: Vec<&str> = r["flags"]
        .as_array()
        .unwrap()
        .iter()
        .filter_map(|f| f.as_str())
        .collect();
    writeln!(out, "flags={}", flags.join(";"))?;
    writeln!(out, "failed=false")
}

fn study(a: StudyArgs) -> Result<(), CliError> {
    let config = StudyConfig::from_file(&a.config)
        .map_err(|e| CliError::Data(format!("{}: {e}", a.config.display())))?;
    let output = a.out.or_else(|| config.output.clone()).ok_or_else(|| {
        CliError::Usage("no output path: pass --out or set `output` in the config".into())
    })?;
    let workers = a.workers.or(config.workers).unwrap_or_else(default_workers);
    if workers == 0 {
        return Err(CliError::Usage(format!(
            "worker count must be positive (see --workers, {WORKERS_ENV})"
        )));
    }
    let quiet = a.quiet;
    let status = run_study(&config, &output, workers, |s| {
        if !quiet {
            eprintln!(
                "study: {}/{} rows computed, {} already present",
                s.done, s.pending, s.skipped
            );
        }
    })
    .map_err(|e| CliError::Data(e.to_string()))?;
    if !quiet {
        eprintln!(
            "study: wrote {} new rows to {}",
            status.done,
            output.display()
        );
    }
    Ok(())
}

fn summarize_cmd(a: SummarizeArgs) -> Result<(), CliError> {
    let keys: Vec<GroupKey> =
        a.by.split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.parse::<GroupKey>())
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    if a.loglog && !keys.contains(&GroupKey::N) {
        return Err(CliError::Usage(
            "--loglog needs `n` among the --by keys".into(),
        ));
    }
    let file = File::open(&a.results).map_err(|e| io_error(&a.results, e))?;
    let rows = read_results(BufReader::new(file))
        .map_err(|e| CliError::Data(format!("{}: {e}", a.results.display())))?;
    let summary = summarize(&rows, &keys);
    let sep = if a.tsv { '\t' } else { ',' };
    let write = |w: &mut dyn Write| {
        write_summary(w, &keys, &summary, sep, a.loglog).map_err(|e| CliError::Data(e.to_string()))
    };
    match &a.out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path).map_err(|e| io_error(path, e))?);
            write(&mut w)?;
            w.flush().map_err(|e| io_error(path, e))
        }
        None => write(&mut io::stdout().lock()),
    }
}

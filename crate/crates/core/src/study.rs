//! Scenario-grid Monte Carlo studies: configuration, the results CSV,
//! a resumable runner and per-group summaries.
//!
//! Results columns, in order:
//! `n,p,d,alpha,copula,measure,margins,method,replicate,master_seed,seed,error,iterations,h_final,flags,runtime_seconds`.
//! Failed replicates carry `NA` in `error`; `flags` is a `;`-separated list.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::copula::CopulaFamily;
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::margins::MarginMode;
use crate::measures::MeasureKind;
use crate::pipeline::{EstimatorSettings, Method};
use crate::sim::{run_replicate, Design, ReplicateRecord, Scenario};
use crate::stats::{mean_and_se, ols_slope};

pub const RESULT_COLUMNS: [&str; 16] = [
    "n",
    "p",
    "d",
    "alpha",
    "copula",
    "measure",
    "margins",
    "method",
    "replicate",
    "master_seed",
    "seed",
    "error",
    "iterations",
    "h_final",
    "flags",
    "runtime_seconds",
];

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "DEPSUB_WORKERS";

/// Worker count from [`WORKERS_ENV`], else the available parallelism.
pub fn default_workers() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&w| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// A study grid: the Cartesian product of the axis lists, each cell
/// replicated `replications` times.
#[derive(Clone, Debug, PartialEq)]
pub struct StudyConfig {
    pub n: Vec<usize>,
    pub p: Vec<usize>,
    pub d: Vec<usize>,
    pub alpha: Vec<f64>,
    pub copula: Vec<CopulaFamily>,
    pub measure: Vec<MeasureKind>,
    pub margins: Vec<MarginMode>,
    pub method: Vec<Method>,
    pub replications: usize,
    pub master_seed: u64,
    pub output: Option<PathBuf>,
    pub workers: Option<usize>,
    pub settings: EstimatorSettings,
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    let items: Vec<T> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|e| Error::Data(format!("{key}: `{s}`: {e}")))
        })
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(Error::Data(format!("{key}: empty list")));
    }
    Ok(items)
}

fn parse_one<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .trim()
        .parse::<T>()
        .map_err(|e| Error::Data(format!("{key}: `{}`: {e}", value.trim())))
}

impl StudyConfig {
    /// Parses `key = value` lines; `#` starts a comment and list values are
    /// comma-separated. `n`, `p`, `d` and `alpha` are required; the other
    /// axes default to `gaussian`, `spearman`, `known` and `opga`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: HashMap<String, String> = HashMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Data(format!("line {}: expected key = value", lineno + 1)))?;
            let key = key.trim().to_ascii_lowercase().replace('-', "_");
            if entries
                .insert(key.clone(), value.trim().to_string())
                .is_some()
            {
                return Err(Error::Data(format!(
                    "line {}: duplicate key `{key}`",
                    lineno + 1
                )));
            }
        }
        let mut take = |k: &str| entries.remove(k);
        let required =
            |k: &str, v: Option<String>| v.ok_or_else(|| Error::Data(format!("missing key `{k}`")));

        let n = parse_list("n", &required("n", take("n"))?)?;
        let p = parse_list("p", &required("p", take("p"))?)?;
        let d = parse_list("d", &required("d", take("d"))?)?;
        let alpha = parse_list("alpha", &required("alpha", take("alpha"))?)?;
        let copula = parse_list(
            "copula",
            &take("copula").unwrap_or_else(|| "gaussian".into()),
        )?;
        let measure = parse_list(
            "measure",
            &take("measure").unwrap_or_else(|| "spearman".into()),
        )?;
        let margins = parse_list(
            "margins",
            &take("margins").unwrap_or_else(|| "known".into()),
        )?;
        let method = parse_list("method", &take("method").unwrap_or_else(|| "opga".into()))?;
        let replications = take("replications")
            .map(|v| parse_one("replications", &v))
            .transpose()?
            .unwrap_or(100);
        let master_seed = take("master_seed")
            .map(|v| parse_one("master_seed", &v))
            .transpose()?
            .unwrap_or(0);
        let output = take("output").map(PathBuf::from);
        let workers = take("workers")
            .map(|v| parse_one::<usize>("workers", &v))
            .transpose()?;

        let mut settings = EstimatorSettings::default();
        if let Some(v) = take("kernel") {
            settings.kernel = parse_one::<KernelSpec>("kernel", &v)?;
        }
        if let Some(v) = take("trim_quantile") {
            settings.trim_quantile = parse_one("trim_quantile", &v)?;
        }
        if let Some(v) = take("tol") {
            settings.tol = parse_one("tol", &v)?;
        }
        if let Some(v) = take("max_iter") {
            settings.max_iter = parse_one("max_iter", &v)?;
        }
        if let Some(v) = take("margin_dim") {
            settings.margin_dim = parse_one("margin_dim", &v)?;
        }
        if let Some(v) = take("par_max_iter") {
            settings.par_max_iter = parse_one("par_max_iter", &v)?;
        }
        settings.h0 = take("h0").map(|v| parse_one("h0", &v)).transpose()?;
        settings.rho = take("rho").map(|v| parse_one("rho", &v)).transpose()?;
        settings.h_inf = take("h_inf").map(|v| parse_one("h_inf", &v)).transpose()?;
        settings.cdf_h = take("cdf_h").map(|v| parse_one("cdf_h", &v)).transpose()?;
        settings.cdf_b = take("cdf_b").map(|v| parse_one("cdf_b", &v)).transpose()?;

        if let Some(k) = entries.keys().min() {
            return Err(Error::Data(format!("unknown key `{k}`")));
        }
        let config = Self {
            n,
            p,
            d,
            alpha,
            copula,
            measure,
            margins,
            method,
            replications,
            master_seed,
            output,
            workers,
            settings,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Data("replications must be at least 1".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Data("workers must be at least 1".into()));
        }
        if !(0.0..0.5).contains(&self.settings.trim_quantile) {
            return Err(Error::Data("trim_quantile must lie in [0, 0.5)".into()));
        }
        if self.settings.max_iter == 0 || !(self.settings.tol > 0.0) {
            return Err(Error::Data("max_iter and tol must be positive".into()));
        }
        for design in self.designs() {
            design
                .validate()
                .map_err(|e| Error::Data(format!("invalid scenario {design:?}: {e}")))?;
        }
        Ok(())
    }

    fn designs(&self) -> Vec<Design> {
        let mut out = Vec::new();
        for &n in &self.n {
            for &p in &self.p {
                for &d in &self.d {
                    for &alpha in &self.alpha {
                        for &copula in &self.copula {
                            out.push(Design {
                                n,
                                p,
                                d,
                                alpha,
                                copula,
                            });
                        }
                    }
                }
            }
        }
        out
    }

    /// Every cell in canonical order (axes nested as listed, method
    /// innermost).
    pub fn scenarios(&self) -> Vec<Scenario> {
        let mut out = Vec::new();
        for design in self.designs() {
            for &measure in &self.measure {
                for &margins in &self.margins {
                    for &method in &self.method {
                        out.push(Scenario {
                            design,
                            measure,
                            margins,
                            method,
                        });
                    }
                }
            }
        }
        out
    }

    /// `(scenario, replicate)` pairs in the order rows are written.
    pub fn tasks(&self) -> Vec<(Scenario, usize)> {
        self.scenarios()
            .into_iter()
            .flat_map(|s| (0..self.replications).map(move |r| (s, r)))
            .collect()
    }
}

/// One line of the results file.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub scenario: Scenario,
    pub replicate: usize,
    pub master_seed: u64,
    pub record: ReplicateRecord,
}

fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        "NA".into()
    } else {
        format!("{v}")
    }
}

fn parse_float(s: &str) -> Result<f64> {
    if s == "NA" {
        return Ok(f64::NAN);
    }
    s.parse::<f64>()
        .map_err(|e| Error::Data(format!("`{s}`: {e}")))
}

fn key_of(scenario: &Scenario, replicate: usize, master_seed: u64) -> String {
    let d = &scenario.design;
    format!(
        "{},{},{},{},{},{},{},{},{replicate},{master_seed}",
        d.n,
        d.p,
        d.d,
        fmt_float(d.alpha),
        d.copula,
        scenario.measure,
        scenario.margins,
        scenario.method
    )
}

impl ResultRow {
    pub fn key(&self) -> String {
        key_of(&self.scenario, self.replicate, self.master_seed)
    }

    pub fn to_csv_line(&self) -> String {
        let r = &self.record;
        let mut line = self.key();
        write!(
            line,
            ",{},{},{},{},{},{:.6}",
            r.seed,
            fmt_float(r.error),
            r.iterations,
            fmt_float(r.h_final),
            r.flags.join(";"),
            r.runtime_seconds
        )
        .unwrap();
        line
    }

    pub fn parse_csv_line(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != RESULT_COLUMNS.len() {
            return Err(Error::Data(format!(
                "expected {} fields, got {}",
                RESULT_COLUMNS.len(),
                f.len()
            )));
        }
        let int = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| Error::Data(format!("`{s}`: {e}")))
        };
        let design = Design {
            n: int(f[0])?,
            p: int(f[1])?,
            d: int(f[2])?,
            alpha: parse_float(f[3])?,
            copula: f[4].parse()?,
        };
        let scenario = Scenario {
            design,
            measure: f[5].parse()?,
            margins: f[6].parse()?,
            method: f[7].parse()?,
        };
        let u64_ = |s: &str| {
            s.parse::<u64>()
                .map_err(|e| Error::Data(format!("`{s}`: {e}")))
        };
        let flags = if f[14].is_empty() {
            Vec::new()
        } else {
            f[14].split(';').map(String::from).collect()
        };
        Ok(Self {
            scenario,
            replicate: int(f[8])?,
            master_seed: u64_(f[9])?,
            record: ReplicateRecord {
                seed: u64_(f[10])?,
                error: parse_float(f[11])?,
                iterations: int(f[12])?,
                h_final: parse_float(f[13])?,
                flags,
                runtime_seconds: parse_float(f[15])?,
            },
        })
    }
}

pub fn header_line() -> String {
    RESULT_COLUMNS.join(",")
}

/// Parses a whole results file.
pub fn read_results<R: BufRead>(input: R) -> Result<Vec<ResultRow>> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .transpose()
        .map_err(|e| Error::Data(e.to_string()))?;
    match header {
        Some(h) if h.trim() == header_line() => {}
        Some(h) => return Err(Error::Data(format!("unexpected results header `{h}`"))),
        None => return Ok(Vec::new()),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::Data(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(
            ResultRow::parse_csv_line(line.trim_end())
                .map_err(|e| Error::Data(format!("line {}: {e}", i + 2)))?,
        );
    }
    Ok(rows)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StudyProgress {
    /// Rows computed in this run so far.
    pub done: usize,
    /// Rows this run has to compute.
    pub pending: usize,
    /// Rows already present in the output file.
    pub skipped: usize,
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Data(format!("{}: {e}", path.display()))
}

/// Opens `path` for appending, creating it with a header if needed and
/// dropping a trailing partial line left by an interrupted run. Returns the
/// keys of the complete rows already present.
fn prepare_output(path: &Path) -> Result<(File, HashSet<String>)> {
    let mut file = OpenOptions::new()
        .read(true)
        .append(true)
        .create(true)
        .open(path)
        .map_err(|e| io_err(path, e))?;
    let mut text = String::new();
    file.read_to_string(&mut text)
        .map_err(|e| io_err(path, e))?;
    if let Some(pos) = text.rfind('\n') {
        if pos + 1 < text.len() {
            text.truncate(pos + 1);
            file.set_len(text.len() as u64)
                .map_err(|e| io_err(path, e))?;
        }
    } else if !text.is_empty() {
        text.clear();
        file.set_len(0).map_err(|e| io_err(path, e))?;
    }
    file.seek(SeekFrom::End(0)).map_err(|e| io_err(path, e))?;
    if text.is_empty() {
        writeln!(file, "{}", header_line()).map_err(|e| io_err(path, e))?;
        return Ok((file, HashSet::new()));
    }
    let rows = read_results(BufReader::new(text.as_bytes()))?;
    Ok((file, rows.iter().map(ResultRow::key).collect()))
}

/// Runs every task not yet present in `output`, appending rows in canonical
/// order. Estimation failures become `NA` rows; the run never aborts on them.
pub fn run_study(
    config: &StudyConfig,
    output: &Path,
    workers: usize,
    mut progress: impl FnMut(&StudyProgress),
) -> Result<StudyProgress> {
    config.validate()?;
    let (mut file, existing) = prepare_output(output)?;
    let pending: Vec<(Scenario, usize)> = config
        .tasks()
        .into_iter()
        .filter(|(s, r)| !existing.contains(&key_of(s, *r, config.master_seed)))
        .collect();
    let mut status = StudyProgress {
        done: 0,
        pending: pending.len(),
        skipped: config.tasks().len() - pending.len(),
    };
    progress(&status);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Data(e.to_string()))?;
    let chunk = (workers.max(1) * 2).max(1);
    for batch in pending.chunks(chunk) {
        let rows: Vec<ResultRow> = pool.install(|| {
            batch
                .par_iter()
                .map(|&(scenario, replicate)| {
                    run_replicate(&scenario, replicate, config.master_seed, &config.settings).map(
                        |record| ResultRow {
                            scenario,
                            replicate,
                            master_seed: config.master_seed,
                            record,
                        },
                    )
                })
                .collect::<Result<_>>()
        })?;
        let mut text = String::new();
        for row in &rows {
            text.push_str(&row.to_csv_line());
            text.push('\n');
        }
        file.write_all(text.as_bytes())
            .map_err(|e| io_err(output, e))?;
        file.flush().map_err(|e| io_err(output, e))?;
        status.done += rows.len();
        progress(&status);
    }
    Ok(status)
}

/// Columns a summary can group by.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GroupKey {
    N,
    P,
    D,
    Alpha,
    Copula,
    Measure,
    Margins,
    Method,
}

impl GroupKey {
    pub const ALL: [GroupKey; 8] = [
        GroupKey::N,
        GroupKey::P,
        GroupKey::D,
        GroupKey::Alpha,
        GroupKey::Copula,
        GroupKey::Measure,
        GroupKey::Margins,
        GroupKey::Method,
    ];

    pub fn name(self) -> &'static str {
        RESULT_COLUMNS[self as usize]
    }

    fn value(self, row: &ResultRow) -> String {
        let s = &row.scenario;
        match self {
            GroupKey::N => s.design.n.to_string(),
            GroupKey::P => s.design.p.to_string(),
            GroupKey::D => s.design.d.to_string(),
            GroupKey::Alpha => fmt_float(s.design.alpha),
            GroupKey::Copula => s.design.copula.to_string(),
            GroupKey::Measure => s.measure.to_string(),
            GroupKey::Margins => s.margins.to_string(),
            GroupKey::Method => s.method.to_string(),
        }
    }
}

impl FromStr for GroupKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| Error::Unsupported(format!("unknown group-by key `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub group: Vec<String>,
    pub rows: usize,
    pub failures: usize,
    /// Mean over successful rows, NaN when every row failed.
    pub mean_error: f64,
    pub se_error: f64,
    pub mean_runtime: f64,
}

/// Groups rows by `keys` (in order of first appearance) and aggregates the
/// error over successful rows.
pub fn summarize(rows: &[ResultRow], keys: &[GroupKey]) -> Vec<SummaryRow> {
    let mut order: Vec<Vec<String>> = Vec::new();
    let mut groups: HashMap<Vec<String>, Vec<&ResultRow>> = HashMap::new();
    for row in rows {
        let group: Vec<String> = keys.iter().map(|k| k.value(row)).collect();
        groups
            .entry(group.clone())
            .or_insert_with(|| {
                order.push(group);
                Vec::new()
            })
            .push(row);
    }
    order
        .into_iter()
        .map(|group| {
            let members = &groups[&group];
            let errors: Vec<f64> = members
                .iter()
                .map(|r| r.record.error)
                .filter(|e| !e.is_nan())
                .collect();
            let (mean_error, se_error) = mean_and_se(&errors);
            let runtimes: Vec<f64> = members.iter().map(|r| r.record.runtime_seconds).collect();
            SummaryRow {
                group,
                rows: members.len(),
                failures: members.len() - errors.len(),
                mean_error,
                se_error,
                mean_runtime: mean_and_se(&runtimes).0,
            }
        })
        .collect()
}

/// Writes a summary table; with `loglog`, appends `ln_n` and `ln_mean_error`
/// (requires `n` among the keys).
pub fn write_summary<W: Write>(
    mut out: W,
    keys: &[GroupKey],
    summary: &[SummaryRow],
    sep: char,
    loglog: bool,
) -> Result<()> {
    let n_pos = keys.iter().position(|k| *k == GroupKey::N);
    if loglog && n_pos.is_none() {
        return Err(Error::Unsupported(
            "--loglog needs `n` among the group-by keys".into(),
        ));
    }
    let mut header: Vec<&str> = keys.iter().map(|k| k.name()).collect();
    header.extend(["rows", "failures", "mean_error", "se_error", "mean_runtime"]);
    if loglog {
        header.extend(["ln_n", "ln_mean_error"]);
    }
    let s = sep.to_string();
    let io = |e: std::io::Error| Error::Data(e.to_string());
    writeln!(out, "{}", header.join(&s)).map_err(io)?;
    for row in summary {
        let mut fields = row.group.clone();
        fields.extend([
            row.rows.to_string(),
            row.failures.to_string(),
            fmt_float(row.mean_error),
            fmt_float(row.se_error),
            fmt_float(row.mean_runtime),
        ]);
        if let Some(i) = n_pos.filter(|_| loglog) {
            let n: f64 = row.group[i].parse().unwrap();
            fields.extend([fmt_float(n.ln()), fmt_float(row.mean_error.ln())]);
        }
        writeln!(out, "{}", fields.join(&s)).map_err(io)?;
    }
    Ok(())
}

/// Least-squares slope of `ln(mean error)` on `ln n`.
pub fn loglog_slope(ns: &[usize], mean_errors: &[f64]) -> f64 {
    let x: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let y: Vec<f64> = mean_errors.iter().map(|e| e.ln()).collect();
    ols_slope(&x, &y)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "
        # two scenarios x two methods x three replicates
        n = 120, 150
        p = 5
        d = 1
        alpha = 1.5
        method = opg1, opga
        replications = 3
        master_seed = 42
    ";

    #[test]
    fn parses_config_with_defaults() {
        let c = StudyConfig::parse(SMALL).unwrap();
        assert_eq!(c.n, vec![120, 150]);
        assert_eq!(c.copula, vec![CopulaFamily::Gaussian]);
        assert_eq!(c.measure, vec![MeasureKind::Spearman]);
        assert_eq!(c.margins, vec![MarginMode::Known]);
        assert_eq!(c.method, vec![Method::Opg1, Method::Opga]);
        assert_eq!(c.tasks().len(), 12);
        assert_eq!(c.settings, EstimatorSettings::default());
        let c = StudyConfig::parse(
            "n=100\np=5\nd=1\nalpha=0\nkernel=epanechnikov\ntrim-quantile=0\nh0=1.2",
        )
        .unwrap();
        assert_eq!(c.replications, 100);
        assert_eq!(c.settings.kernel, KernelSpec::Epanechnikov);
        assert_eq!(c.settings.trim_quantile, 0.0);
        assert_eq!(c.settings.h0, Some(1.2));
    }

    #[test]
    fn rejects_bad_configs() {
        for bad in [
            "p=5\nd=1\nalpha=1",
            "n=100\np=5\nd=1\nalpha=1\nbogus=3",
            "n=100\np=5\nd=1\nalpha=1\nreplications=0",
            "n=100\np=5\nd=6\nalpha=1",
            "n=100\np=5\nd=1\nalpha=1\nn=200",
            "n=\np=5\nd=1\nalpha=1",
            "n=100\np=5\nd=1\nalpha=1\nmethod=magic",
            "n=100\np=5\nd=1\nalpha=1\njust text",
        ] {
            assert!(
                matches!(StudyConfig::parse(bad), Err(Error::Data(_))),
                "{bad}"
            );
        }
    }

    #[test]
    fn rows_round_trip() {
        let row = ResultRow {
            scenario: Scenario {
                design: Design {
                    n: 400,
                    p: 5,
                    d: 1,
                    alpha: 0.2,
                    copula: CopulaFamily::Clayton,
                },
                measure: MeasureKind::IndicatorGrid,
                margins: MarginMode::Nonparametric,
                method: Method::Par,
            },
            replicate: 7,
            master_seed: 9,
            record: ReplicateRecord {
                error: 0.123_456_789_012_345_67,
                runtime_seconds: 1.5,
                iterations: 3,
                h_final: f64::NAN,
                flags: vec!["not_converged".into(), "excluded=2".into()],
                seed: u64::MAX,
            },
        };
        let line = row.to_csv_line();
        let back = ResultRow::parse_csv_line(&line).unwrap();
        assert_eq!(back.to_csv_line(), line);
        assert_eq!(back.record.error, row.record.error);
        assert!(line.contains(",NA,"));
    }

    #[test]
    fn study_is_complete_resumable_and_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let config = StudyConfig::parse(SMALL).unwrap();
        let a = dir.path().join("a.csv");
        let status = run_study(&config, &a, 2, |_| {}).unwrap();
        assert_eq!((status.done, status.skipped), (12, 0));
        let rows = read_results(BufReader::new(File::open(&a).unwrap())).unwrap();
        assert_eq!(rows.len(), 12);

        let again = run_study(&config, &a, 2, |_| {}).unwrap();
        assert_eq!((again.done, again.skipped), (0, 12));

        // Interrupted run: keep the header, five rows and half of the sixth.
        let full = std::fs::read_to_string(&a).unwrap();
        let lines: Vec<&str> = full.lines().collect();
        let mut partial = lines[..6].join("\n");
        partial.push('\n');
        partial.push_str(&lines[6][..10]);
        let b = dir.path().join("b.csv");
        std::fs::write(&b, partial).unwrap();
        let resumed = run_study(&config, &b, 1, |_| {}).unwrap();
        assert_eq!((resumed.done, resumed.skipped), (7, 5));

        let strip = |text: &str| -> Vec<String> {
            text.lines()
                .map(|l| l.rsplit_once(',').unwrap().0.to_string())
                .collect()
        };
        assert_eq!(strip(&std::fs::read_to_string(&b).unwrap()), strip(&full));
    }

    #[test]
    fn summaries_group_and_count_failures() {
        let mk = |n: usize, method: Method, error: f64| ResultRow {
            scenario: Scenario {
                design: Design {
                    n,
                    p: 5,
                    d: 1,
                    alpha: 1.5,
                    copula: CopulaFamily::Gaussian,
                },
                measure: MeasureKind::Spearman,
                margins: MarginMode::Known,
                method,
            },
            replicate: 0,
            master_seed: 0,
            record: ReplicateRecord {
                error,
                runtime_seconds: 2.0,
                iterations: 1,
                h_final: 0.5,
                flags: vec![],
                seed: 0,
            },
        };
        let rows = vec![
            mk(150, Method::Opga, 0.4),
            mk(150, Method::Opga, 0.2),
            mk(150, Method::Opg1, f64::NAN),
            mk(400, Method::Opga, 0.1),
            mk(150, Method::Opg1, f64::NAN),
        ];
        let keys = [GroupKey::N, GroupKey::Method];
        let s = summarize(&rows, &keys);
        assert_eq!(s.len(), 3);
        assert_eq!(s[0].group, vec!["150", "opga"]);
        assert!((s[0].mean_error - 0.3).abs() < 1e-15);
        assert!((s[0].se_error - 0.1).abs() < 1e-15);
        assert_eq!((s[1].rows, s[1].failures), (2, 2));
        assert!(s[1].mean_error.is_nan());
        let mut out = Vec::new();
        write_summary(&mut out, &keys, &s, ',', true).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with(
            "n,method,rows,failures,mean_error,se_error,mean_runtime,ln_n,ln_mean_error\n"
        ));
        assert!(text.contains("150,opg1,2,2,NA,NA,2,"));
        assert!(write_summary(Vec::new(), &[GroupKey::Method], &s, ',', true).is_err());
        assert!("replicate".parse::<GroupKey>().is_err());
    }

    #[test]
    fn slope_of_a_power_law() {
        let ns = [400, 1000, 2500];
        let errs: Vec<f64> = ns.iter().map(|&n| 3.0 * (n as f64).powf(-0.5)).collect();
        assert!((loglog_slope(&ns, &errs) + 0.5).abs() < 1e-12);
    }
}

//! Command-line front end: CSV ingestion, run configuration and report
//! rendering.
//!
//! Errors are printed as a single line `error[<kind>]: <message>` on stderr
//! and mapped to exit codes 2 (configuration), 3 (data) and 4 (numerical).

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::combined::{combined_test, CombinedReport};
use crate::engine::{run_test_with_estimates, Method, TestReport, MIN_RECOMMENDED_REPETITIONS};
use crate::error::{Error, ErrorKind, Result};
use crate::estimation::{GroupedSample, MomentEstimates};
use crate::hypothesis::{
    custom_hypothesis, predefined_hypothesis, structure_hypothesis, HypothesisParam,
    HypothesisSpec, Target,
};
use crate::linalg::SymMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TestTarget {
    Covariance,
    Correlation,
    Combined,
    CovarianceStructure,
    CorrelationStructure,
}

impl TestTarget {
    fn base(self) -> Option<Target> {
        match self {
            TestTarget::Covariance | TestTarget::CovarianceStructure => Some(Target::Covariance),
            TestTarget::Correlation | TestTarget::CorrelationStructure => {
                Some(Target::Correlation)
            }
            TestTarget::Combined => None,
        }
    }

    fn is_structure(self) -> bool {
        matches!(
            self,
            TestTarget::CovarianceStructure | TestTarget::CorrelationStructure
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Text,
    Json,
}

/// Tests for equality and structure of covariance and correlation matrices.
#[derive(Debug, Parser)]
#[command(name = "covtest", version)]
pub struct Args {
    /// CSV file with a header row; one observation per row
    #[arg(long)]
    pub data: PathBuf,

    /// Column holding group labels
    #[arg(long, conflicts_with = "group_sizes")]
    pub group_column: Option<String>,

    /// Group sizes for row-ordered data, e.g. 10,12,9
    #[arg(long, value_delimiter = ',')]
    pub group_sizes: Option<Vec<usize>>,

    #[arg(long, value_enum, default_value = "covariance")]
    pub target: TestTarget,

    /// Predefined hypothesis name
    #[arg(long)]
    pub hypothesis: Option<String>,

    /// Headerless CSV with a custom hypothesis matrix
    #[arg(long = "C", value_name = "PATH")]
    pub c_path: Option<PathBuf>,

    /// Headerless CSV with the custom hypothesis vector
    #[arg(long = "zeta", value_name = "PATH")]
    pub zeta_path: Option<PathBuf>,

    /// Structure name for the structure targets
    #[arg(long)]
    pub structure: Option<String>,

    /// Trace value for the "given-trace" hypothesis
    #[arg(long)]
    pub trace: Option<f64>,

    /// Headerless CSV with the matrix for the "given-matrix" hypothesis
    #[arg(long = "matrix", value_name = "PATH")]
    pub matrix_path: Option<PathBuf>,

    /// MC, BT or TAY
    #[arg(long)]
    pub method: Option<String>,

    #[arg(long, default_value_t = crate::engine::DEFAULT_REPETITIONS)]
    pub repetitions: usize,

    /// Root seed; drawn from entropy and echoed when absent
    #[arg(long)]
    pub seed: Option<u64>,

    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,

    #[arg(long, value_enum, default_value = "text")]
    pub output: OutputFormat,

    /// Worker threads for resampling (results do not depend on it)
    #[arg(long)]
    pub threads: Option<usize>,
}

/// How rows are assigned to groups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Grouping {
    Single,
    Column(String),
    Sizes(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum HypothesisChoice {
    Named {
        name: String,
        trace: Option<f64>,
        matrix_path: Option<PathBuf>,
    },
    Custom {
        c_path: PathBuf,
        zeta_path: PathBuf,
    },
    Structure(String),
    Combined,
}

/// Validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data_path: PathBuf,
    pub grouping: Grouping,
    pub target: TestTarget,
    pub hypothesis: HypothesisChoice,
    pub method: Method,
    pub repetitions: usize,
    pub seed: u64,
    pub alpha: f64,
    pub output: OutputFormat,
    pub threads: Option<usize>,
}

fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl RunConfig {
    pub fn from_args(args: Args) -> Result<Self> {
        let grouping = match (args.group_column, args.group_sizes) {
            (Some(c), None) => Grouping::Column(c),
            (None, Some(s)) => {
                if s.is_empty() {
                    return Err(config("--group-sizes is empty"));
                }
                Grouping::Sizes(s)
            }
            (None, None) => Grouping::Single,
            (Some(_), Some(_)) => {
                return Err(config("--group-column and --group-sizes are exclusive"))
            }
        };
        if args.repetitions == 0 {
            return Err(config("--repetitions must be at least 1"));
        }
        if !(args.alpha > 0.0 && args.alpha < 1.0) {
            return Err(config(format!("--alpha must lie in (0, 1), got {}", args.alpha)));
        }
        if args.threads == Some(0) {
            return Err(config("--threads must be at least 1"));
        }
        let custom = args.c_path.is_some() || args.zeta_path.is_some();
        let extras = args.trace.is_some() || args.matrix_path.is_some();

        let hypothesis = match args.target {
            TestTarget::Combined => {
                if args.hypothesis.is_some() || custom || args.structure.is_some() || extras {
                    return Err(config("the combined test takes no hypothesis options"));
                }
                if args.method.is_some() {
                    return Err(config("the combined test takes no --method"));
                }
                if let Grouping::Sizes(s) = &grouping {
                    if s.len() != 2 {
                        return Err(Error::CombinedGroupCount(s.len()));
                    }
                }
                HypothesisChoice::Combined
            }
            t if t.is_structure() => {
                if args.hypothesis.is_some() || custom || extras {
                    return Err(config("structure targets take only --structure"));
                }
                if let Grouping::Sizes(s) = &grouping {
                    if s.len() != 1 {
                        return Err(config(format!(
                            "structure tests need exactly one group (got {})",
                            s.len()
                        )));
                    }
                }
                let name = args
                    .structure
                    .ok_or_else(|| config("structure targets need --structure"))?;
                HypothesisChoice::Structure(name)
            }
            t => {
                if args.structure.is_some() {
                    return Err(config("--structure needs a structure target"));
                }
                match (args.hypothesis, args.c_path, args.zeta_path) {
                    (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
                        return Err(config("use either --hypothesis or --C/--zeta"))
                    }
                    (None, Some(c), Some(z)) => {
                        if extras {
                            return Err(config("--trace/--matrix need a named hypothesis"));
                        }
                        HypothesisChoice::Custom {
                            c_path: c,
                            zeta_path: z,
                        }
                    }
                    (None, Some(_), None) | (None, None, Some(_)) => {
                        return Err(config("--C and --zeta must be given together"))
                    }
                    (name, None, None) => HypothesisChoice::Named {
                        name: name.unwrap_or_else(|| match t {
                            TestTarget::Correlation => "equal-correlated".into(),
                            _ => "equal".into(),
                        }),
                        trace: args.trace,
                        matrix_path: args.matrix_path,
                    },
                }
            }
        };

        let method = match (&hypothesis, args.method) {
            (HypothesisChoice::Combined, _) => Method::Taylor,
            (_, Some(m)) => m.parse()?,
            (_, None) => Method::MonteCarlo,
        };
        if method == Method::Taylor && args.target.base() == Some(Target::Covariance) {
            return Err(Error::TaylorOnCovariance);
        }

        Ok(RunConfig {
            data_path: args.data,
            grouping,
            target: args.target,
            hypothesis,
            method,
            repetitions: args.repetitions,
            seed: args.seed.unwrap_or_else(rand::random),
            alpha: args.alpha,
            output: args.output,
            threads: args.threads,
        })
    }
}

/// Ingested observations with their variable names and group labels.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub sample: GroupedSample,
    pub variables: Vec<String>,
    pub group_labels: Vec<String>,
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn ingest(path: &Path, grouping: &Grouping) -> Result<Dataset> {
    ingest_reader(open(path)?, grouping)
}

/// Reads a headered CSV; every column except the group column must be numeric.
pub fn ingest_reader<R: Read>(reader: R, grouping: &Grouping) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let group_idx = match grouping {
        Grouping::Column(name) => Some(
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Data(format!("no column named {name:?}")))?,
        ),
        _ => None,
    };
    let variables: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != group_idx)
        .map(|(_, h)| h.clone())
        .collect();
    if variables.is_empty() {
        return Err(Error::Data("no numeric columns".into()));
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<String> = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row_no = r + 1;
        let mut values = Vec::with_capacity(variables.len());
        for (c, cell) in record.iter().enumerate() {
            if Some(c) == group_idx {
                labels.push(cell.to_string());
                continue;
            }
            let value: f64 = cell.parse().map_err(|_| Error::Cell {
                row: row_no,
                column: headers[c].clone(),
                message: format!("not a number: {cell:?}"),
            })?;
            if !value.is_finite() {
                return Err(Error::Cell {
                    row: row_no,
                    column: headers[c].clone(),
                    message: format!("non-finite value {cell:?}"),
                });
            }
            values.push(value);
        }
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(Error::Data("no data rows".into()));
    }

    let (members, group_labels): (Vec<Vec<usize>>, Vec<String>) = match grouping {
        Grouping::Single => (vec![(0..rows.len()).collect()], vec!["1".into()]),
        Grouping::Sizes(sizes) => {
            let total: usize = sizes.iter().sum();
            if total != rows.len() {
                return Err(Error::Data(format!(
                    "group sizes sum to {total} but the file has {} rows",
                    rows.len()
                )));
            }
            let mut start = 0;
            let members = sizes
                .iter()
                .map(|&n| {
                    let m: Vec<usize> = (start..start + n).collect();
                    start += n;
                    m
                })
                .collect();
            let names = (1..=sizes.len()).map(|i| i.to_string()).collect();
            (members, names)
        }
        Grouping::Column(_) => {
            let mut index: HashMap<&str, usize> = HashMap::new();
            let mut names = Vec::new();
            let mut members: Vec<Vec<usize>> = Vec::new();
            for (r, label) in labels.iter().enumerate() {
                let g = *index.entry(label.as_str()).or_insert_with(|| {
                    names.push(label.clone());
                    members.push(Vec::new());
                    names.len() - 1
                });
                members[g].push(r);
            }
            (members, names)
        }
    };

    let d = variables.len();
    let groups = members
        .iter()
        .map(|m| DMatrix::from_fn(d, m.len(), |j, k| rows[m[k]][j]))
        .collect();
    let sample = GroupedSample::new(groups)?;
    Ok(Dataset {
        sample,
        variables,
        group_labels,
    })
}

/// Writes `sample` as a headered CSV with a trailing `group` column.
///
/// Values use the shortest representation that parses back to the same
/// `f64`, so [`ingest_reader`] with `Grouping::Column("group")` restores the
/// sample exactly.
pub fn write_csv<W: Write>(writer: W, sample: &GroupedSample, variables: &[String]) -> Result<()> {
    if variables.len() != sample.dim() {
        return Err(Error::InvalidArgument(format!(
            "{} variable names for d={}",
            variables.len(),
            sample.dim()
        )));
    }
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = variables.to_vec();
    header.push("group".into());
    wtr.write_record(&header)?;
    for (i, g) in sample.groups().iter().enumerate() {
        for col in g.column_iter() {
            let mut record: Vec<String> = col.iter().map(|v| v.to_string()).collect();
            record.push((i + 1).to_string());
            wtr.write_record(&record)?;
        }
    }
    wtr.flush().map_err(|source| Error::Io {
        path: "<csv output>".into(),
        source,
    })?;
    Ok(())
}

/// Numbers from a headerless CSV, one inner vector per line.
pub fn read_numeric_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(open(path)?);
    let mut out = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row = record
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                cell.parse::<f64>().map_err(|_| Error::Cell {
                    row: r + 1,
                    column: (c + 1).to_string(),
                    message: format!("not a number: {cell:?}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        out.push(row);
    }
    Ok(out)
}

fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let rows = read_numeric_rows(path)?;
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 {
        return Err(config(format!("{}: empty matrix", path.display())));
    }
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(config(format!("{}: ragged matrix", path.display())));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |r, c| rows[r][c]))
}

fn read_vector(path: &Path) -> Result<DVector<f64>> {
    let values: Vec<f64> = read_numeric_rows(path)?.into_iter().flatten().collect();
    Ok(DVector::from_vec(values))
}

fn build_spec(cfg: &RunConfig, target: Target, a: usize, d: usize) -> Result<HypothesisSpec> {
    match &cfg.hypothesis {
        HypothesisChoice::Named {
            name,
            trace,
            matrix_path,
        } => {
            let param = match (trace, matrix_path) {
                (Some(t), None) => Some(HypothesisParam::Trace(*t)),
                (None, Some(p)) => Some(HypothesisParam::Matrix(
                    SymMatrix::new(read_matrix(p)?).map_err(|e| config(e.to_string()))?,
                )),
                (None, None) => None,
                (Some(_), Some(_)) => return Err(config("--trace and --matrix are exclusive")),
            };
            predefined_hypothesis(name, target, a, d, param.as_ref())
        }
        HypothesisChoice::Custom { c_path, zeta_path } => {
            let c = read_matrix(c_path)?;
            let zeta = read_vector(zeta_path)?;
            custom_hypothesis(c, zeta, target, a, d)
        }
        HypothesisChoice::Structure(name) => {
            if a != 1 {
                return Err(config(format!(
                    "structure tests need exactly one group (got {a})"
                )));
            }
            structure_hypothesis(name, target, d)
        }
        HypothesisChoice::Combined => unreachable!("combined runs have no hypothesis spec"),
    }
}

/// Result of one invocation, with what the renderers need.
#[derive(Debug, Clone)]
pub enum Outcome {
    Test {
        report: TestReport,
        spec: HypothesisSpec,
        pooled_covariance: DMatrix<f64>,
        dim: usize,
    },
    Combined {
        report: CombinedReport,
        dim: usize,
    },
}

/// Ingests the data and runs the configured test.
pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    let data = ingest(&cfg.data_path, &cfg.grouping)?;
    run_on(cfg, &data.sample)
}

pub fn run_on(cfg: &RunConfig, sample: &GroupedSample) -> Result<Outcome> {
    let work = || -> Result<Outcome> {
        let a = sample.num_groups();
        let d = sample.dim();
        match cfg.target.base() {
            None => {
                let report = combined_test(
                    sample,
                    cfg.repetitions,
                    cfg.seed,
                    cfg.alpha,
                    cfg.repetitions,
                )?;
                Ok(Outcome::Combined { report, dim: d })
            }
            Some(target) => {
                let spec = build_spec(cfg, target, a, d)?;
                let est = MomentEstimates::for_target(sample, target)?;
                let report = run_test_with_estimates(
                    &est,
                    &spec,
                    cfg.method,
                    cfg.repetitions,
                    cfg.seed,
                    cfg.alpha,
                )?;
                Ok(Outcome::Test {
                    report,
                    spec,
                    pooled_covariance: est.pooled_cov(target)?.clone(),
                    dim: d,
                })
            }
        }
    };
    match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()?
            .install(work),
        None => work(),
    }
}

/// `p = 0.xxx`, or `p < 1/B` when no resampled value reached the statistic.
pub fn format_p_value(p: f64, repetitions: usize) -> String {
    if p > 0.0 {
        return format!("p = {p:.3}");
    }
    let mut b = repetitions;
    let mut exp = 0;
    while b > 1 && b.is_multiple_of(10) {
        b /= 10;
        exp += 1;
    }
    if b == 1 && exp > 0 {
        format!("p < 1e-{exp}")
    } else {
        format!("p < 1/{repetitions}")
    }
}

fn groups_line(a: usize) -> String {
    if a == 1 {
        "one group".into()
    } else {
        format!("{a} groups")
    }
}

pub fn render_text(outcome: &Outcome) -> String {
    let mut out = String::new();
    match outcome {
        Outcome::Test { report, .. } => {
            let title = match report.target {
                Target::Covariance => "Covariance Test",
                Target::Correlation => "Correlation Test",
            };
            let _ = writeln!(out, "{title}");
            let _ = writeln!(out, "{}", groups_line(report.num_groups()));
            let _ = writeln!(out);
            let _ = writeln!(out, "Hypothesis: {}", report.label);
            let _ = writeln!(out, "Teststatistic value: {:.4}", report.statistic);
            let _ = writeln!(
                out,
                "p-value: {}",
                format_p_value(report.p_value, report.repetitions)
            );
            let _ = writeln!(out);
            let _ = writeln!(
                out,
                "p-value computed using {} with B={} repetitions",
                report.method.description(),
                report.repetitions
            );
            let _ = writeln!(out, "seed: {}", report.seed);
        }
        Outcome::Combined { report, .. } => {
            let b = report.repetitions;
            let _ = writeln!(out, "Combined Test");
            let _ = writeln!(out);
            let _ = writeln!(out, "p-value-Variances: {}", format_p_value(report.p_variances, b));
            let _ = writeln!(
                out,
                "p-value-Correlations: {}",
                format_p_value(report.p_correlations, b)
            );
            let _ = writeln!(out, "p-value-Total: {}", format_p_value(report.p_total, b));
            let _ = writeln!(out);
            let _ = writeln!(
                out,
                "p-values computed using {} with B={b} repetitions",
                Method::Taylor.description()
            );
            let _ = writeln!(out, "seed: {}", report.seed);
        }
    }
    out
}

#[derive(Serialize)]
struct JsonCritical {
    alpha: f64,
    value: f64,
}

#[derive(Serialize)]
struct JsonTest<'a> {
    test: &'a str,
    hypothesis: &'a str,
    groups: usize,
    sizes: &'a [usize],
    dim: usize,
    method: &'a str,
    repetitions: usize,
    seed: u64,
    alpha: f64,
    statistic: f64,
    p_value: f64,
    critical_value: Option<JsonCritical>,
    hypothesis_matrix: Vec<Vec<f64>>,
    hypothesis_vector: Vec<f64>,
    pooled_covariance: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct JsonCombined<'a> {
    test: &'a str,
    groups: usize,
    sizes: &'a [usize],
    dim: usize,
    method: &'a str,
    repetitions: usize,
    seed: u64,
    alpha: f64,
    statistic: Vec<f64>,
    beta_tilde: f64,
    p_variances: f64,
    p_correlations: f64,
    p_total: f64,
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    // `+ 0.0` maps -0.0 to 0.0
    m.row_iter().map(|r| r.iter().map(|v| v + 0.0).collect()).collect()
}

pub fn render_json(outcome: &Outcome, alpha: f64) -> String {
    let text = match outcome {
        Outcome::Test {
            report,
            spec,
            pooled_covariance,
            dim,
        } => serde_json::to_string_pretty(&JsonTest {
            test: report.target.as_str(),
            hypothesis: &report.label,
            groups: report.num_groups(),
            sizes: &report.sizes,
            dim: *dim,
            method: report.method.as_str(),
            repetitions: report.repetitions,
            seed: report.seed,
            alpha,
            statistic: report.statistic,
            p_value: report.p_value,
            critical_value: report.critical_value.map(|c| JsonCritical {
                alpha: c.alpha,
                value: c.value,
            }),
            hypothesis_matrix: rows_of(spec.matrix()),
            hypothesis_vector: spec.vector().iter().map(|v| v + 0.0).collect(),
            pooled_covariance: rows_of(pooled_covariance),
        }),
        Outcome::Combined { report, dim } => serde_json::to_string_pretty(&JsonCombined {
            test: "combined",
            groups: report.sizes.len(),
            sizes: &report.sizes,
            dim: *dim,
            method: Method::Taylor.as_str(),
            repetitions: report.repetitions,
            seed: report.seed,
            alpha: report.alpha,
            statistic: report.statistic.iter().copied().collect(),
            beta_tilde: report.beta_tilde,
            p_variances: report.p_variances,
            p_correlations: report.p_correlations,
            p_total: report.p_total,
        }),
    };
    let mut text = text.expect("report structs serialize");
    text.push('\n');
    text
}

pub fn render(outcome: &Outcome, cfg: &RunConfig) -> String {
    match cfg.output {
        OutputFormat::Text => render_text(outcome),
        OutputFormat::Json => render_json(outcome, cfg.alpha),
    }
}

fn report_error(kind: ErrorKind, msg: &str) -> i32 {
    let line = msg.lines().map(str::trim).collect::<Vec<_>>().join(" ");
    eprintln!("error[{}]: {}", kind.as_str(), line);
    kind.exit_code()
}

/// Parses `argv`, runs, prints, and returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            use clap::error::ErrorKind as ClapKind;
            if matches!(e.kind(), ClapKind::DisplayHelp | ClapKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            return report_error(ErrorKind::Config, first.trim_start_matches("error: "));
        }
    };
    let cfg = match RunConfig::from_args(args) {
        Ok(c) => c,
        Err(e) => return report_error(e.kind(), &e.to_string()),
    };
    if cfg.repetitions < MIN_RECOMMENDED_REPETITIONS {
        eprintln!(
            "warning: B={} repetitions; at least {MIN_RECOMMENDED_REPETITIONS} are recommended",
            cfg.repetitions
        );
    }
    match run(&cfg) {
        Ok(outcome) => {
            let mut stdout = io::stdout().lock();
            if stdout.write_all(render(&outcome, &cfg).as_bytes()).is_err() {
                return report_error(ErrorKind::Config, "cannot write to stdout");
            }
            0
        }
        Err(e) => report_error(e.kind(), &e.to_string()),
    }
}

pub fn main() -> i32 {
    main_with_args(std::env::args_os())
}

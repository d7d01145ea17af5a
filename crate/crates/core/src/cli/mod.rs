//! Command-line front end.
//!
//! Every command is a plain function taking parsed arguments and a writer
//! for human-readable output, so the binary and the tests share one path.

mod table;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde::Deserialize;
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::bench::{fit_power_law, gen_correlated, run_appendix_bench, BenchPoint, PowerLawFit};
use crate::codec::{self, CompressedDataset, CompressionReport};
use crate::learn::{boost, combined_reconstruction, TrainConfig};
use crate::pca::{pca_fit, pca_roundtrip, FLOAT_COEFFICIENT_BITS};
use crate::pipeline::{self, CompressOptions};
use crate::solver::{ExactSolver, SaParams, Solver};
use crate::stats::{self, EstimateWithError, Selection};
use crate::Error;

pub use table::{format_text, format_value, parse_text, read_table, write_table, TableFormat};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Output(String),
    #[error(transparent)]
    Compute(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Input(_) => 3,
            CliError::Compute(_) => 4,
            CliError::Output(_) => 5,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Format(f) => CliError::Input(f.to_string()),
            other => CliError::Compute(other),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Debug, Parser)]
#[command(name = "binq", version, about = "Lossy compression with binary codes learned by QUBO solves")]
pub struct Cli {
    /// Cap on worker threads (results do not depend on it).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// JSON file with default values for any long flag (snake_case keys).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train codes for a numeric table and write a BINQ file.
    Compress(CompressArgs),
    /// Write the reconstruction stored in a BINQ file as a table.
    Decompress(DecompressArgs),
    /// Quality report and bias-corrected component means.
    Report(ReportArgs),
    #[command(subcommand)]
    Bench(BenchCommand),
}

#[derive(Debug, Subcommand)]
pub enum BenchCommand {
    /// Geometric-basis solver benchmark with a power-law fit.
    Appendix(AppendixArgs),
    /// Q² against bits per sample for binary codes and PCA.
    Compare(CompareArgs),
    /// Write correlated Gaussian samples.
    Gendata(GendataArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Exact,
    Sa,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BcSelection {
    First,
    Strided,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SolverArgs {
    #[arg(long, value_enum)]
    pub solver: Option<SolverKind>,
    #[arg(long)]
    pub num_reads: Option<usize>,
    #[arg(long)]
    pub sweeps: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct LearnArgs {
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub eta0: Option<f64>,
    #[arg(long)]
    pub eta_decay: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Clamp every dictionary entry to [-b, b].
    #[arg(long)]
    pub element_bound: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CompressArgs {
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Bits per sample for a single dictionary.
    #[arg(long, conflicts_with = "stages")]
    pub nq: Option<usize>,
    /// Bits per boosting stage, e.g. 8,8.
    #[arg(long, value_delimiter = ',')]
    pub stages: Option<Vec<usize>>,
    #[command(flatten)]
    pub learn: LearnArgs,
    /// Original samples kept for bias correction.
    #[arg(long)]
    pub nbc: Option<usize>,
    #[arg(long)]
    pub nbin: Option<usize>,
    #[arg(long, value_enum)]
    pub bc_selection: Option<BcSelection>,
    #[arg(long, value_enum)]
    pub format: Option<TableFormat>,
    /// Also write the report as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct DecompressArgs {
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long, value_enum)]
    pub format: Option<TableFormat>,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    pub input: PathBuf,
    /// Uncompressed table for the full Q² report.
    #[arg(long)]
    pub original: Option<PathBuf>,
    /// Bins for the bias-corrected means; inferred from the stored indices by default.
    #[arg(long)]
    pub nbin: Option<usize>,
    /// Autocorrelation factor in the predicted error increase.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, value_enum)]
    pub format: Option<TableFormat>,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct AppendixArgs {
    #[arg(long, default_value_t = 2.0)]
    pub r: f64,
    #[arg(long, value_delimiter = ',', default_values_t = vec![8, 10, 12, 14, 16])]
    pub nq: Vec<usize>,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Write JSON-lines records here.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    pub input: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = vec![4, 8, 16])]
    pub nq: Vec<usize>,
    /// Also train two boosted stages of half the bits each.
    #[arg(long)]
    pub boost: bool,
    #[arg(long, value_delimiter = ',', default_values_t = vec![1, 2])]
    pub pca_nz: Vec<usize>,
    #[command(flatten)]
    pub learn: LearnArgs,
    #[arg(long, value_enum)]
    pub format: Option<TableFormat>,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GendataArgs {
    #[arg(short, long)]
    pub n: usize,
    #[arg(short, long)]
    pub d: usize,
    #[arg(long)]
    pub rho: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long, value_enum)]
    pub format: Option<TableFormat>,
}

/// Defaults read from `--config`; flags take precedence.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub threads: Option<usize>,
    pub nq: Option<usize>,
    pub stages: Option<Vec<usize>>,
    pub batch_size: Option<usize>,
    pub eta0: Option<f64>,
    pub eta_decay: Option<f64>,
    pub epochs: Option<usize>,
    pub element_bound: Option<f64>,
    pub seed: Option<u64>,
    pub solver: Option<SolverKind>,
    pub num_reads: Option<usize>,
    pub sweeps: Option<usize>,
    pub nbc: Option<usize>,
    pub nbin: Option<usize>,
    pub bc_selection: Option<BcSelection>,
    pub format: Option<TableFormat>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| usage(format!("config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| usage(format!("config {}: {e}", path.display())))
    }
}

pub fn resolve_solver(args: &SolverArgs, cfg: &ConfigFile, seed: u64) -> CliResult<Solver> {
    let kind = args.solver.or(cfg.solver).unwrap_or(SolverKind::Exact);
    let num_reads = args.num_reads.or(cfg.num_reads);
    let sweeps = args.sweeps.or(cfg.sweeps);
    let solver = match kind {
        SolverKind::Exact => {
            if num_reads.is_some() || sweeps.is_some() {
                return Err(usage("--num-reads and --sweeps apply only to --solver sa"));
            }
            Solver::Exact(ExactSolver::default())
        }
        SolverKind::Sa => {
            let defaults = SaParams::default();
            Solver::Anneal(SaParams {
                num_reads: num_reads.unwrap_or(defaults.num_reads),
                sweeps: sweeps.unwrap_or(defaults.sweeps),
                seed,
                ..defaults
            })
        }
    };
    solver.validate().map_err(|e| usage(e.to_string()))?;
    Ok(solver)
}

fn check_exact_cap(solver: &Solver, widths: &[usize]) -> CliResult<()> {
    if let Solver::Exact(s) = solver {
        if let Some(&w) = widths.iter().find(|&&w| w > s.cap) {
            return Err(usage(format!(
                "the exact solver handles at most {} bits per stage (asked for {w}); use --solver sa or split the bits with --stages",
                s.cap
            )));
        }
    }
    Ok(())
}

pub fn resolve_train(args: &LearnArgs, cfg: &ConfigFile, n_q: usize) -> CliResult<TrainConfig> {
    let d = TrainConfig::default();
    let seed = args.seed.or(cfg.seed).unwrap_or(d.seed);
    let config = TrainConfig {
        n_q,
        batch_size: args.batch_size.or(cfg.batch_size).unwrap_or(d.batch_size),
        eta0: args.eta0.or(cfg.eta0).unwrap_or(d.eta0),
        eta_decay: args.eta_decay.or(cfg.eta_decay).unwrap_or(d.eta_decay),
        epochs: args.epochs.or(cfg.epochs).unwrap_or(d.epochs),
        seed,
        element_bound: args.element_bound.or(cfg.element_bound),
        solver: resolve_solver(&args.solver, cfg, seed)?,
        ridge_epsilon: d.ridge_epsilon,
    };
    config.validate().map_err(|e| usage(e.to_string()))?;
    Ok(config)
}

/// Validated compression settings for a dataset with `n` rows.
pub fn resolve_compress(args: &CompressArgs, cfg: &ConfigFile, n: usize) -> CliResult<CompressOptions> {
    let stages = match (&args.stages, args.nq) {
        (Some(s), _) => s.clone(),
        (None, Some(q)) => vec![q],
        (None, None) => match (&cfg.stages, cfg.nq) {
            (Some(_), Some(_)) => return Err(usage("config sets both nq and stages")),
            (Some(s), None) => s.clone(),
            (None, q) => vec![q.unwrap_or(TrainConfig::default().n_q)],
        },
    };
    if stages.is_empty() || stages.contains(&0) {
        return Err(usage("every stage needs at least one bit"));
    }
    let train = resolve_train(&args.learn, cfg, stages[0])?;
    check_exact_cap(&train.solver, &stages)?;
    let n_bc = args.nbc.or(cfg.nbc).unwrap_or(0);
    let n_bin = args.nbin.or(cfg.nbin).unwrap_or(if n_bc == 0 { 1 } else { n_bc });
    let selection = match args.bc_selection.or(cfg.bc_selection).unwrap_or(BcSelection::First) {
        BcSelection::First => Selection::First,
        BcSelection::Strided => Selection::Strided,
    };
    stats::BiasCorrectionPlan::new(n, n_bc, n_bin, selection.clone())
        .map_err(|e| usage(format!("{e} (--nbc {n_bc}, --nbin {n_bin}, {n} samples)")))?;
    Ok(CompressOptions {
        stages,
        train,
        n_bc,
        n_bin,
        selection,
    })
}

fn table_format(flag: Option<TableFormat>, cfg: &ConfigFile) -> TableFormat {
    flag.or(cfg.format).unwrap_or_default()
}

fn write_json(path: &Path, value: &Value) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("json value serialises");
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
}

fn write_json_lines(path: &Path, records: &[Value]) -> CliResult<()> {
    let mut text = String::new();
    for r in records {
        text.push_str(&r.to_string());
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
}

fn out_err(e: std::io::Error) -> CliError {
    CliError::Output(format!("writing output: {e}"))
}

fn solver_name(solver: &Solver) -> &'static str {
    match solver {
        Solver::Exact(_) => "exact",
        Solver::Anneal(_) => "sa",
    }
}

pub fn read_binq(path: &Path) -> CliResult<CompressedDataset> {
    let file = File::open(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    codec::read(BufReader::new(file)).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn write_binq(path: &Path, dataset: &CompressedDataset) -> CliResult<()> {
    let file =
        File::create(path).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
    let mut sink = BufWriter::new(file);
    codec::write(dataset, &mut sink).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
    sink.flush().map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
}

fn report_record(report: &CompressionReport) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("n".into(), json!(report.n));
    m.insert("d".into(), json!(report.d));
    m.insert("n_q_total".into(), json!(report.n_q_total));
    m.insert("n_bc".into(), json!(report.n_bc));
    m.insert("q2".into(), json!(report.q2));
    m.insert("per_component_ratio".into(), json!(report.per_component_ratio));
    m.insert("payload_bits".into(), json!(report.payload_bits));
    m.insert("total_bits".into(), json!(report.total_bits));
    m.insert(
        "bits_per_sample".into(),
        json!(report.total_bits as f64 / report.n as f64),
    );
    m.insert(
        "predicted_error_increase".into(),
        json!(report.predicted_error_increase),
    );
    m
}

fn print_report(out: &mut dyn Write, report: &CompressionReport) -> CliResult<()> {
    writeln!(out, "samples            {}", report.n).map_err(out_err)?;
    writeln!(out, "components         {}", report.d).map_err(out_err)?;
    writeln!(out, "bits per sample    {}", report.n_q_total).map_err(out_err)?;
    writeln!(out, "retained originals {}", report.n_bc).map_err(out_err)?;
    writeln!(out, "Q2                 {}", format_value(report.q2)).map_err(out_err)?;
    for (i, r) in report.per_component_ratio.iter().enumerate() {
        writeln!(out, "  ratio[{i}]        {}", format_value(*r)).map_err(out_err)?;
    }
    writeln!(out, "payload bits       {}", report.payload_bits).map_err(out_err)?;
    writeln!(out, "total bits         {}", report.total_bits).map_err(out_err)?;
    if let Some(p) = report.predicted_error_increase {
        writeln!(out, "predicted error x  {}", format_value(p)).map_err(out_err)?;
    }
    Ok(())
}

pub fn cmd_compress(args: &CompressArgs, cfg: &ConfigFile, out: &mut dyn Write) -> CliResult<CompressionReport> {
    let format = table_format(args.format, cfg);
    let data = read_table(&args.input, format)?;
    let opts = resolve_compress(args, cfg, data.nrows())?;
    log::info!(
        "compressing {}x{} with stages {:?} ({} solver)",
        data.nrows(),
        data.ncols(),
        opts.stages,
        solver_name(&opts.train.solver)
    );
    let compressed = pipeline::compress(&data, &opts)?;
    write_binq(&args.output, &compressed.dataset)?;
    let report = CompressionReport::new(&compressed.dataset, &data, 1.0)?;
    print_report(out, &report)?;
    if let Some(path) = &args.json {
        let mut m = report_record(&report);
        m.insert("command".into(), json!("compress"));
        m.insert("stages".into(), json!(opts.stages));
        m.insert("n_bin".into(), json!(opts.n_bin));
        m.insert("solver".into(), json!(solver_name(&opts.train.solver)));
        m.insert("seed".into(), json!(opts.train.seed));
        write_json(path, &Value::Object(m))?;
    }
    Ok(report)
}

pub fn cmd_decompress(args: &DecompressArgs, cfg: &ConfigFile) -> CliResult<DMatrix<f64>> {
    let dataset = read_binq(&args.input)?;
    let recon = dataset.decompress();
    write_table(&args.output, &recon, table_format(args.format, cfg))?;
    Ok(recon)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentMean {
    pub sloppy: f64,
    pub corrected: EstimateWithError,
}

impl ComponentMean {
    pub fn correction(&self) -> f64 {
        self.corrected.value - self.sloppy
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOutcome {
    pub report: Option<CompressionReport>,
    /// Empty when the file keeps no original samples.
    pub means: Vec<ComponentMean>,
}

pub fn cmd_report(args: &ReportArgs, cfg: &ConfigFile, out: &mut dyn Write) -> CliResult<ReportOutcome> {
    let dataset = read_binq(&args.input)?;
    let report = match &args.original {
        Some(path) => {
            let original = read_table(path, table_format(args.format, cfg))?;
            if original.shape() != (dataset.n(), dataset.d()) {
                return Err(CliError::Input(format!(
                    "{}: shape {}x{} does not match the compressed {}x{}",
                    path.display(),
                    original.nrows(),
                    original.ncols(),
                    dataset.n(),
                    dataset.d()
                )));
            }
            if !(args.alpha >= 0.0 && args.alpha.is_finite()) {
                return Err(usage("--alpha must be a non-negative number"));
            }
            let report = CompressionReport::new(&dataset, &original, args.alpha)?;
            print_report(out, &report)?;
            Some(report)
        }
        None => None,
    };
    let means = if dataset.bc_indices().is_empty() {
        writeln!(out, "no retained originals; bias-corrected means unavailable").map_err(out_err)?;
        Vec::new()
    } else {
        let corrected = pipeline::bias_corrected_component_means(&dataset, args.nbin)
            .map_err(|e| match e {
                Error::Plan(m) => usage(m),
                other => other.into(),
            })?;
        let sloppy = pipeline::sloppy_component_means(&dataset);
        writeln!(out, "component  corrected_mean  error  correction").map_err(out_err)?;
        let means: Vec<ComponentMean> = sloppy
            .into_iter()
            .zip(corrected)
            .map(|(sloppy, corrected)| ComponentMean { sloppy, corrected })
            .collect();
        for (i, m) in means.iter().enumerate() {
            writeln!(
                out,
                "{i}  {}  {}  {}",
                format_value(m.corrected.value),
                format_value(m.corrected.error),
                format_value(m.correction())
            )
            .map_err(out_err)?;
        }
        means
    };
    if let Some(path) = &args.json {
        let mut m = report.as_ref().map(report_record).unwrap_or_default();
        m.insert("command".into(), json!("report"));
        m.insert("n".into(), json!(dataset.n()));
        m.insert("d".into(), json!(dataset.d()));
        m.insert("n_q_total".into(), json!(dataset.n_q_total()));
        m.insert("n_bc".into(), json!(dataset.bc_indices().len()));
        m.insert("stages".into(), json!(dataset.stage_widths()));
        if let Some(first) = means.first() {
            m.insert("n_bin".into(), json!(first.corrected.n_bin));
        }
        m.insert("sloppy_mean".into(), json!(means.iter().map(|c| c.sloppy).collect::<Vec<_>>()));
        m.insert(
            "corrected_mean".into(),
            json!(means.iter().map(|c| c.corrected.value).collect::<Vec<_>>()),
        );
        m.insert(
            "corrected_mean_error".into(),
            json!(means.iter().map(|c| c.corrected.error).collect::<Vec<_>>()),
        );
        write_json(path, &Value::Object(m))?;
    }
    Ok(ReportOutcome { report, means })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AppendixOutcome {
    pub points: Vec<BenchPoint>,
    pub fit: Option<PowerLawFit>,
}

pub fn cmd_bench_appendix(args: &AppendixArgs, cfg: &ConfigFile, out: &mut dyn Write) -> CliResult<AppendixOutcome> {
    if !(args.r > 1.0 && args.r.is_finite()) {
        return Err(usage("--r must be greater than 1"));
    }
    if args.nq.is_empty() || args.nq.contains(&0) {
        return Err(usage("--nq needs positive bit counts"));
    }
    if args.samples < 2 {
        return Err(usage("--samples must be at least 2"));
    }
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    let solver = resolve_solver(&args.solver, cfg, seed)?;
    check_exact_cap(&solver, &args.nq)?;
    writeln!(out, "n_q  mean  stderr").map_err(out_err)?;
    let mut points = Vec::new();
    for &n_q in &args.nq {
        let p = run_appendix_bench(args.r, n_q, args.samples, &solver, seed)?;
        writeln!(out, "{}  {}  {}", p.n_q, format_value(p.mean), format_value(p.stderr)).map_err(out_err)?;
        points.push(p);
    }
    let fit = if points.len() >= 3 {
        let data: Vec<(usize, f64, f64)> = points.iter().map(|p| (p.n_q, p.mean, p.stderr)).collect();
        let fit = fit_power_law(&data)?;
        writeln!(
            out,
            "fit a^(n_q+b): a = {}  b = {}  chi2/dof = {}",
            format_value(fit.a),
            format_value(fit.b),
            format_value(fit.chi2_per_dof)
        )
        .map_err(out_err)?;
        Some(fit)
    } else {
        None
    };
    if let Some(path) = &args.json {
        let mut records: Vec<Value> = points
            .iter()
            .map(|p| {
                json!({
                    "kind": "appendix",
                    "r": args.r,
                    "n_q": p.n_q,
                    "mean": p.mean,
                    "stderr": p.stderr,
                    "n_samples": p.n_samples,
                    "solver": solver_name(&solver),
                    "seed": seed,
                })
            })
            .collect();
        if let Some(f) = &fit {
            records.push(json!({"kind": "fit", "r": args.r, "a": f.a, "b": f.b, "chi2_per_dof": f.chi2_per_dof}));
        }
        write_json_lines(path, &records)?;
    }
    Ok(AppendixOutcome { points, fit })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparePoint {
    /// `binary`, `boosted`, or `pca`.
    pub method: &'static str,
    pub bits_per_sample: usize,
    pub q2: f64,
}

pub fn cmd_bench_compare(args: &CompareArgs, cfg: &ConfigFile, out: &mut dyn Write) -> CliResult<Vec<ComparePoint>> {
    let data = read_table(&args.input, table_format(args.format, cfg))?;
    if args.nq.contains(&0) || args.pca_nz.contains(&0) {
        return Err(usage("bit and component counts must be positive"));
    }
    if let Some(&nz) = args.pca_nz.iter().find(|&&nz| nz > data.ncols()) {
        return Err(usage(format!("--pca-nz {nz} exceeds the {} data columns", data.ncols())));
    }
    if args.boost && args.nq.iter().any(|q| q % 2 != 0 || *q < 2) {
        return Err(usage("--boost needs even --nq values"));
    }
    let base = resolve_train(&args.learn, cfg, 1)?;
    check_exact_cap(&base.solver, &args.nq)?;
    let (z, _) = codec::standardize(&data)?;
    let mut points = Vec::new();
    for &n_q in &args.nq {
        let stages = boost(&z, &[n_q], &TrainConfig { n_q, ..base.clone() })?;
        let recon = combined_reconstruction(&stages).expect("one stage");
        points.push(ComparePoint {
            method: "binary",
            bits_per_sample: n_q,
            q2: stats::q_squared(&z, &recon)?,
        });
        if args.boost {
            let half = n_q / 2;
            let stages = boost(&z, &[half, half], &TrainConfig { n_q: half, ..base.clone() })?;
            let recon = combined_reconstruction(&stages).expect("two stages");
            points.push(ComparePoint {
                method: "boosted",
                bits_per_sample: n_q,
                q2: stats::q_squared(&z, &recon)?,
            });
        }
    }
    for &nz in &args.pca_nz {
        let model = pca_fit(&z, nz)?;
        let recon = pca_roundtrip(&model, &z)?;
        points.push(ComparePoint {
            method: "pca",
            bits_per_sample: nz * FLOAT_COEFFICIENT_BITS,
            q2: stats::q_squared(&z, &recon)?,
        });
    }
    writeln!(out, "method  bits  q2").map_err(out_err)?;
    for p in &points {
        writeln!(out, "{}  {}  {}", p.method, p.bits_per_sample, format_value(p.q2)).map_err(out_err)?;
    }
    if let Some(path) = &args.json {
        let records: Vec<Value> = points
            .iter()
            .map(|p| {
                json!({
                    "kind": "compare",
                    "method": p.method,
                    "bits_per_sample": p.bits_per_sample,
                    "q2": p.q2,
                    "solver": solver_name(&base.solver),
                    "seed": base.seed,
                })
            })
            .collect();
        write_json_lines(path, &records)?;
    }
    Ok(points)
}

pub fn cmd_bench_gendata(args: &GendataArgs, cfg: &ConfigFile) -> CliResult<DMatrix<f64>> {
    if !(0.0..1.0).contains(&args.rho) {
        return Err(usage("--rho must lie in [0, 1)"));
    }
    if args.n == 0 || args.d == 0 {
        return Err(usage("-n and -d must be positive"));
    }
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    let data = gen_correlated(args.n, args.d, args.rho, seed)?;
    write_table(&args.output, &data, table_format(args.format, cfg))?;
    Ok(data)
}

fn dispatch(command: &Command, cfg: &ConfigFile, out: &mut dyn Write) -> CliResult<()> {
    match command {
        Command::Compress(a) => cmd_compress(a, cfg, out).map(drop),
        Command::Decompress(a) => cmd_decompress(a, cfg).map(drop),
        Command::Report(a) => cmd_report(a, cfg, out).map(drop),
        Command::Bench(BenchCommand::Appendix(a)) => cmd_bench_appendix(a, cfg, out).map(drop),
        Command::Bench(BenchCommand::Compare(a)) => cmd_bench_compare(a, cfg, out).map(drop),
        Command::Bench(BenchCommand::Gendata(a)) => cmd_bench_gendata(a, cfg).map(drop),
    }
}

/// Run a parsed command line, optionally inside a bounded thread pool.
pub fn run(cli: &Cli, out: &mut dyn Write) -> CliResult<()> {
    let cfg = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    match cli.threads.or(cfg.threads) {
        Some(0) => Err(usage("--threads must be at least 1")),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| usage(format!("cannot start {t} threads: {e}")))?;
            let mut buffer = Vec::new();
            let result = pool.install(|| dispatch(&cli.command, &cfg, &mut buffer));
            out.write_all(&buffer).map_err(out_err)?;
            result
        }
        None => dispatch(&cli.command, &cfg, out),
    }
}

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use cfair::{
    baseline_threshold, fit, pairwise_audit, select_degree, sweep_tradeoff, AuditReport,
    BaselineParams, FitOptions, Mode, NormOrder, Normalization, PairSampling, SolverConfig,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{CliError, Result};
use crate::ingest::{self, IngestOptions, Ingested, Layout};
use crate::model_file::{ModelFile, Provenance};
use crate::report::{emit, flag, g9, Table};

#[derive(Debug, Parser)]
#[command(name = "cfair", version, about = "Fit, audit and benchmark c-fair polynomials over spatial data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a c-fair polynomial and write the model, fair scores and fit report.
    Fit(FitArgs),
    /// Count pairs whose scores violate the c-Lipschitz constraint.
    Audit(AuditCmd),
    /// Threshold baseline: move each score toward a target by at most alpha.
    Baseline(BaselineArgs),
    /// Fit every (c, n) cell of a grid and emit one table row per cell.
    Sweep(SweepArgs),
    /// Pick the degree minimizing the residual variance.
    SelectDegree(SelectDegreeArgs),
    /// Score points with a saved model.
    Predict(PredictArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Distance,
    Zone,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Distance => Mode::Distance,
            ModeArg::Zone => Mode::Zone,
        }
    }
}

fn parse_delimiter(s: &str) -> std::result::Result<u8, String> {
    match s {
        "tab" | "\\t" | "\t" => Ok(b'\t'),
        _ if s.len() == 1 && s.is_ascii() => Ok(s.as_bytes()[0]),
        _ => Err(format!("delimiter must be a single ASCII character or 'tab', got '{s}'")),
    }
}

/// Comma-separated degrees and inclusive ranges, e.g. `1,5,10` or `1:20`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeGrid(pub Vec<usize>);

fn parse_degree_grid(s: &str) -> std::result::Result<DegreeGrid, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim) {
        let parse = |v: &str| v.trim().parse::<usize>().map_err(|_| format!("'{v}' is not a degree"));
        match part.split_once(':') {
            Some((a, b)) => {
                let (a, b) = (parse(a)?, parse(b)?);
                if a > b {
                    return Err(format!("empty degree range '{part}'"));
                }
                out.extend(a..=b);
            }
            None => out.push(parse(part)?),
        }
    }
    if out.contains(&0) {
        return Err("degrees start at 1".into());
    }
    Ok(DegreeGrid(out))
}

fn parse_norm(s: &str) -> std::result::Result<NormOrder, String> {
    let p: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    NormOrder::new(p).map_err(|e| e.to_string())
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Delimited input with header `id,x1,...,xk,score` or `id,dtr,score`.
    #[arg(long)]
    pub input: PathBuf,
    /// Inferred from the header and --reference when omitted.
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Reference point; turns coordinates into normalized distances to it.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub reference: Option<Vec<f64>>,
    /// Norm order for distances.
    #[arg(long, default_value = "2", value_parser = parse_norm)]
    pub p: NormOrder,
    #[arg(long, default_value = ",", value_parser = parse_delimiter)]
    pub delimiter: u8,
    /// Drop malformed rows instead of aborting.
    #[arg(long)]
    pub skip_bad: bool,
}

impl InputArgs {
    fn options(&self) -> IngestOptions {
        IngestOptions {
            mode: self.mode.map(Mode::from),
            reference: self.reference.clone(),
            p: self.p,
            delimiter: self.delimiter,
            skip_bad: self.skip_bad,
        }
    }

    fn load(&self) -> Result<Ingested> {
        let ingested = ingest::ingest(&self.input, &self.options())?;
        for r in &ingested.table.rejected {
            eprintln!("warning: skipped line {}: {}", r.line, r.reason);
        }
        Ok(ingested)
    }
}

#[derive(Debug, Args)]
pub struct SeedArgs {
    /// Single source of randomness for sampled audits and random solver starts.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Audit this many uniformly drawn pairs instead of all of them.
    #[arg(long)]
    pub sample_pairs: Option<u64>,
}

impl SeedArgs {
    fn sampling(&self) -> Result<Option<PairSampling>> {
        match self.sample_pairs {
            Some(0) => Err(CliError::Usage("--sample-pairs must be positive".into())),
            Some(pairs) => Ok(Some(PairSampling { pairs, seed: self.seed })),
            None => Ok(None),
        }
    }
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 300)]
    pub max_iterations: usize,
    /// Relative objective change accepted as converged once first-order conditions hold.
    #[arg(long, default_value_t = 1e-2)]
    pub tolerance: f64,
    /// Start the solver from a point drawn inside the box using --seed.
    #[arg(long)]
    pub random_start: bool,
}

impl SolverArgs {
    fn config(&self, seed: u64) -> Result<SolverConfig> {
        let config = SolverConfig {
            max_iterations: self.max_iterations,
            tolerance: self.tolerance,
            seed: self.random_start.then_some(seed),
        };
        config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(config)
    }
}

fn check_c(c: f64) -> Result<f64> {
    if c.is_finite() && c >= 1.0 {
        Ok(c)
    } else {
        Err(CliError::Usage(format!("--c must be >= 1, got {c}")))
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub seed: SeedArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, default_value_t = 5)]
    pub degree: usize,
    #[arg(long)]
    pub model_out: Option<PathBuf>,
    /// Per-row `id,original_score,fair_score`.
    #[arg(long)]
    pub scores_out: Option<PathBuf>,
    /// Fit report table; stdout when omitted.
    #[arg(long)]
    pub report_out: Option<PathBuf>,
    /// Record the wall-clock time in the model provenance.
    #[arg(long)]
    pub timestamp: bool,
}

#[derive(Debug, Args)]
pub struct AuditCmd {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub seed: SeedArgs,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long)]
    pub report_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub seed: SeedArgs,
    /// Level at which the adjusted scores are audited.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// Target score for distance-based data.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Largest change allowed per score.
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub scores_out: Option<PathBuf>,
    #[arg(long)]
    pub report_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub seed: SeedArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, value_delimiter = ',', default_value = "1,5,25")]
    pub c_grid: Vec<f64>,
    #[arg(long, default_value = "1,5,10,15", value_parser = parse_degree_grid)]
    pub n_grid: DegreeGrid,
    #[arg(long)]
    pub report_out: Option<PathBuf>,
    /// Add a solve_time_ms column. Timings make the output vary between runs.
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct SelectDegreeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// Contiguous degree range to search.
    #[arg(long, default_value = "1:20", value_parser = parse_degree_grid)]
    pub n_grid: DegreeGrid,
    #[arg(long)]
    pub report_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model_in: PathBuf,
    /// Header `id,<features>[,score]` with the same features the model was fitted on.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = ",", value_parser = parse_delimiter)]
    pub delimiter: u8,
    #[arg(long)]
    pub skip_bad: bool,
    /// `id,fair_score,clipped`; stdout when omitted.
    #[arg(long)]
    pub scores_out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit(args) => cmd_fit(&args),
        Command::Audit(args) => cmd_audit(&args),
        Command::Baseline(args) => cmd_baseline(&args),
        Command::Sweep(args) => cmd_sweep(&args),
        Command::SelectDegree(args) => cmd_select_degree(&args),
        Command::Predict(args) => cmd_predict(&args),
    }
}

/// Shortest representation that parses back to the same `f64`.
fn exact(v: f64) -> String {
    v.to_string()
}

fn write_scores(path: &Path, ingested: &Ingested, fair: &[f64], delimiter: u8) -> Result<()> {
    let mut table = Table::new(["id", "original_score", "fair_score"]);
    for ((id, original), fair) in ingested.ids().iter().zip(ingested.scores()).zip(fair) {
        table.push(vec![id.clone(), exact(*original), exact(*fair)]);
    }
    emit(&table.render(delimiter), Some(path))
}

fn dataset_columns(ingested: &Ingested) -> Vec<String> {
    let geometry = ingested.dataset.geometry();
    vec![
        geometry.mode().to_string(),
        geometry.dim().to_string(),
        g9(geometry.p().value()),
        ingested.dataset.len().to_string(),
        ingested.table.rejected.len().to_string(),
    ]
}

const DATASET_HEADER: [&str; 5] = ["mode", "k", "p", "rows", "rejected_rows"];
const AUDIT_HEADER: [&str; 6] = [
    "unfairness_pct",
    "violated_pairs",
    "total_pairs",
    "max_violation",
    "sampled",
    "seed",
];

fn audit_columns(audit: &AuditReport, seed: u64) -> Vec<String> {
    vec![
        g9(audit.unfairness_pct),
        audit.violated_pairs.to_string(),
        audit.total_pairs.to_string(),
        g9(audit.max_violation),
        flag(audit.sampled),
        if audit.sampled { seed.to_string() } else { String::new() },
    ]
}

fn cmd_fit(args: &FitArgs) -> Result<()> {
    let c = check_c(args.c)?;
    if args.degree < 1 {
        return Err(CliError::Usage("--degree must be >= 1".into()));
    }
    let options = FitOptions {
        solver: args.solver.config(args.seed.seed)?,
        audit_sample: args.seed.sampling()?,
    };
    let ingested = args.input.load()?;
    let report = fit(&ingested.dataset, c, args.degree, &options)?;
    let converged = report.diagnostics.converged;

    if let Some(path) = &args.model_out {
        let timestamp_unix = args
            .timestamp
            .then(|| SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()));
        let provenance = Provenance {
            input_sha256: ingested.table.digest.clone(),
            timestamp_unix,
            converged,
            solver: options.solver.into(),
        };
        ModelFile::from_model(&report.model, provenance).save(path)?;
    }
    if let Some(path) = &args.scores_out {
        write_scores(path, &ingested, &report.fair_scores, args.input.delimiter)?;
    }

    let mut header: Vec<&str> = DATASET_HEADER.to_vec();
    header.extend(["n", "c", "variant"]);
    header.extend(AUDIT_HEADER);
    header.extend([
        "fitting_error",
        "iterations",
        "final_cost",
        "converged",
        "rank_deficient",
        "input_sha256",
    ]);
    let mut table = Table::new(header);
    let mut row = dataset_columns(&ingested);
    row.extend([args.degree.to_string(), g9(c), report.model.variant.to_string()]);
    row.extend(audit_columns(&report.audit, args.seed.seed));
    row.extend([
        g9(report.fitting_error),
        report.diagnostics.iterations.to_string(),
        g9(report.diagnostics.objective),
        flag(converged),
        flag(report.diagnostics.rank_deficient),
        ingested.table.digest.clone(),
    ]);
    table.push(row);
    emit(&table.render(args.input.delimiter), args.report_out.as_deref())?;

    if converged {
        Ok(())
    } else {
        Err(CliError::NotConverged(options.solver.max_iterations))
    }
}

fn cmd_audit(args: &AuditCmd) -> Result<()> {
    let c = check_c(args.c)?;
    let sampling = args.seed.sampling()?;
    let ingested = args.input.load()?;
    let audit = pairwise_audit(ingested.dataset.geometry(), ingested.scores(), c, sampling)?;
    let mut header: Vec<&str> = DATASET_HEADER.to_vec();
    header.push("c");
    header.extend(AUDIT_HEADER);
    header.push("input_sha256");
    let mut table = Table::new(header);
    let mut row = dataset_columns(&ingested);
    row.push(g9(c));
    row.extend(audit_columns(&audit, args.seed.seed));
    row.push(ingested.table.digest.clone());
    table.push(row);
    emit(&table.render(args.input.delimiter), args.report_out.as_deref())
}

fn cmd_baseline(args: &BaselineArgs) -> Result<()> {
    let c = check_c(args.c)?;
    let params = BaselineParams::new(args.threshold, args.alpha).map_err(|e| CliError::Usage(e.to_string()))?;
    let sampling = args.seed.sampling()?;
    let ingested = args.input.load()?;
    let outcome = baseline_threshold(&ingested.dataset, params, c, sampling)?;
    if let Some(path) = &args.scores_out {
        write_scores(path, &ingested, &outcome.scores, args.input.delimiter)?;
    }
    let mut header: Vec<&str> = DATASET_HEADER.to_vec();
    header.extend(["threshold", "alpha", "c"]);
    header.extend(AUDIT_HEADER);
    header.extend(["fitting_error", "input_sha256"]);
    let mut table = Table::new(header);
    let mut row = dataset_columns(&ingested);
    row.extend([g9(args.threshold), g9(args.alpha), g9(c)]);
    row.extend(audit_columns(&outcome.audit, args.seed.seed));
    row.extend([g9(outcome.fitting_error), ingested.table.digest.clone()]);
    table.push(row);
    emit(&table.render(args.input.delimiter), args.report_out.as_deref())
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    for &c in &args.c_grid {
        check_c(c)?;
    }
    let options = FitOptions {
        solver: args.solver.config(args.seed.seed)?,
        audit_sample: args.seed.sampling()?,
    };
    let ingested = args.input.load()?;
    let rows = sweep_tradeoff(&ingested.dataset, &args.c_grid, &args.n_grid.0, &options)?;

    let mut header = vec![
        "c",
        "n",
        "unfairness_pct",
        "unfairness_pct_c1",
        "fitting_error",
        "iterations",
        "final_cost",
        "converged",
        "variant",
        "error",
    ];
    if args.timing {
        header.push("solve_time_ms");
    }
    let mut table = Table::new(header);
    for r in &rows {
        let mut line = vec![
            g9(r.c),
            r.degree.to_string(),
            g9(r.unfairness_pct),
            g9(r.unfairness_pct_c1),
            g9(r.fitting_error),
            r.iterations.to_string(),
            g9(r.final_cost),
            flag(r.converged),
            r.variant.map(|v| v.to_string()).unwrap_or_default(),
            r.error.clone().unwrap_or_default(),
        ];
        if args.timing {
            line.push(g9(r.solve_time_ms));
        }
        table.push(line);
    }
    emit(&table.render(args.input.delimiter), args.report_out.as_deref())?;

    if let Some(failed) = rows.iter().find(|r| r.error.is_some()) {
        return Err(CliError::Data(format!(
            "cell c={} n={} failed: {}",
            g9(failed.c),
            failed.degree,
            failed.error.as_deref().unwrap_or_default()
        )));
    }
    if rows.iter().any(|r| !r.converged) {
        return Err(CliError::NotConverged(options.solver.max_iterations));
    }
    Ok(())
}

fn cmd_select_degree(args: &SelectDegreeArgs) -> Result<()> {
    let c = check_c(args.c)?;
    let grid = &args.n_grid.0;
    let contiguous = grid.windows(2).all(|w| w[1] == w[0] + 1);
    let (lo, hi) = match (grid.first(), grid.last()) {
        (Some(&lo), Some(&hi)) if contiguous => (lo, hi),
        _ => return Err(CliError::Usage("--n-grid must be a contiguous range such as 1:20".into())),
    };
    let options = FitOptions {
        solver: args.solver.config(args.seed)?,
        audit_sample: None,
    };
    let ingested = args.input.load()?;
    let selection = select_degree(&ingested.dataset, c, lo..=hi, &options)?;
    let mut table = Table::new(["n", "criterion", "fitting_error", "selected", "skipped"]);
    for r in &selection.rows {
        table.push(vec![
            r.degree.to_string(),
            r.criterion.map(g9).unwrap_or_default(),
            r.fitting_error.map(g9).unwrap_or_default(),
            flag(r.degree == selection.best),
            r.skipped.clone().unwrap_or_default(),
        ]);
    }
    emit(&table.render(args.input.delimiter), args.report_out.as_deref())
}

fn cmd_predict(args: &PredictArgs) -> Result<()> {
    let model = ModelFile::load(&args.model_in)?.to_model()?;
    let bytes = ingest::read_input(&args.input)?;
    let table = ingest::parse_table(&bytes, args.delimiter, args.skip_bad, false)?;
    for r in &table.rejected {
        eprintln!("warning: skipped line {}: {}", r.line, r.reason);
    }
    let expected = match &model.normalization {
        Normalization::Distance { reference: None, .. } => Layout::Dtr,
        Normalization::Distance { reference: Some(r), .. } => Layout::Coordinates(r.len()),
        Normalization::Zone(t) => Layout::Coordinates(t.dim()),
    };
    if table.layout != expected {
        return Err(CliError::Data(format!(
            "model expects {} feature column(s){}, input has {}",
            expected.width(),
            if expected == Layout::Dtr { " named 'dtr'" } else { "" },
            table.layout.width()
        )));
    }
    let mut out = Table::new(["id", "fair_score", "clipped"]);
    let mut clipped = 0;
    for (id, features) in table.ids.iter().zip(&table.features) {
        let prediction = model.predict(features)?;
        clipped += usize::from(prediction.clipped);
        out.push(vec![id.clone(), exact(prediction.score), flag(prediction.clipped)]);
    }
    if clipped > 0 {
        eprintln!("warning: {clipped} point(s) fell outside the training domain and were clipped onto it");
    }
    emit(&out.render(args.delimiter), args.scores_out.as_deref())
}

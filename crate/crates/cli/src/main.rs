//! `vine-empirica` — batch interface to the empirical pair-copula
//! estimator: structure selection, per-edge inference, simulation, and
//! scaled re-runs of the validation experiments.

mod data;
mod records;
mod reproduce;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{CommandFactory, Parser, Subcommand};

use vine_empirica::estimator::{fit, FittedEmpiricalVine};
use vine_empirica::families::{FamilyKind, VineModel};
use vine_empirica::inference::{
    confidence_interval, gof_test, independence_test, spearman_ci, spearman_rho, CiMethod,
};
use vine_empirica::rank::Bandwidth;
use vine_empirica::rng::derive_seed;
use vine_empirica::select::select_structure;
use vine_empirica::vine::RegularVine;

use data::{atomic_write, csv_from_columns, read_dataset, Dataset};
use records::{EdgeReport, EstimateReport, IntervalRecord, TestRecord, SCHEMA_VERSION};

/// Exit-coded command failure: 1 usage, 2 data, 3 numeric.
pub enum CliError {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Numeric(m) => m,
        }
    }
}

impl From<vine_empirica::Error> for CliError {
    fn from(e: vine_empirica::Error) -> Self {
        use vine_empirica::Error;
        match e {
            Error::EmptyWindow { .. } | Error::NonConvergence { .. } | Error::NumericFailure(_) => {
                CliError::Numeric(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "vine-empirica",
    version,
    about = "Empirical pair-copula estimation on regular vines"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Bandwidth rule for the finite-difference conditional cdf:
    /// half-cuberoot, fifthroot, quarterroot, or fixed=<h>.
    #[arg(long, global = true, default_value = "half-cuberoot", value_parser = parse_bandwidth)]
    bandwidth: Bandwidth,

    /// Bootstrap replicates for confidence intervals.
    #[arg(long = "B", global = true, default_value_t = 1000)]
    b: usize,

    /// RNG seed; falls back to $VINE_EMPIRICA_SEED, then 0.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Two-sided error probability for confidence intervals.
    #[arg(long, global = true, default_value_t = 0.1)]
    alpha: f64,

    /// Worker threads (0 = one per available core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Select a vine structure from data by maximum-spanning-tree cascades.
    Select {
        /// CSV data file (header row, one column per variable).
        #[arg(long)]
        data: PathBuf,
        /// Directory receiving vine.json, trace.csv and ground_tree.dot.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Fit every edge of a vine and report rho, its interval, and an
    /// independence p-value per edge.
    Estimate {
        #[arg(long)]
        data: PathBuf,
        /// Vine structure JSON (as written by select or simulate models).
        #[arg(long)]
        vine: PathBuf,
        /// Monte-Carlo replicates for the independence tests.
        #[arg(long, default_value_t = 1000)]
        mc: usize,
        /// Report file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Confidence interval for one edge's copula value at a point.
    Ci {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        vine: PathBuf,
        /// Edge label, 1-based, like '1,4|2,3'.
        #[arg(long)]
        edge: String,
        /// Evaluation point 'u,v' with both coordinates in (0,1).
        #[arg(long)]
        point: String,
        /// Interval method: percentile, symmetric-normal, or plug-in.
        #[arg(long, default_value = "percentile", value_parser = parse_method)]
        method: CiMethod,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Conditional Spearman's rho for one edge with a bootstrap interval.
    Rho {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        vine: PathBuf,
        /// Edge label, 1-based, like '1,4|2,3'.
        #[arg(long)]
        edge: String,
        /// Interval method: percentile or symmetric-normal.
        #[arg(long, default_value = "percentile", value_parser = parse_method)]
        method: CiMethod,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Test one edge's conditional pseudo-observations for independence.
    IndepTest {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        vine: PathBuf,
        /// Edge label, 1-based, like '1,4|2,3'.
        #[arg(long)]
        edge: String,
        /// Monte-Carlo replicates for the null distribution.
        #[arg(long, default_value_t = 1000)]
        mc: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parametric-bootstrap goodness-of-fit test of a family at one edge.
    Gof {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        vine: PathBuf,
        /// Edge label, 1-based, like '1,4|2,3'.
        #[arg(long)]
        edge: String,
        /// Hypothesized family: gaussian, student_t, or gumbel.
        #[arg(long, value_parser = parse_family)]
        family: FamilyKind,
        /// Bootstrap resamples (each re-runs the full fit).
        #[arg(long, default_value_t = 200)]
        mc: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw a deterministic sample from a stored vine model.
    Simulate {
        /// Vine model JSON (structure plus one copula per edge).
        #[arg(long)]
        model: PathBuf,
        /// Number of rows to draw.
        #[arg(long)]
        n: usize,
        /// Output CSV.
        #[arg(long, default_value = "samples.csv")]
        out: PathBuf,
    },
    /// Re-run a validation experiment and write expected-vs-observed rows.
    Reproduce {
        /// Table id: T1, T2, T3, gof, or fig2.
        #[arg(long)]
        table: reproduce::TableId,
        /// Multiplier on the default replicate counts.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        /// Output CSV.
        #[arg(long, default_value = "table.csv")]
        out: PathBuf,
    },
}

fn parse_bandwidth(s: &str) -> Result<Bandwidth, String> {
    match s {
        "half-cuberoot" => Ok(Bandwidth::HalfCubeRoot),
        "fifthroot" => Ok(Bandwidth::FifthRoot),
        "quarterroot" => Ok(Bandwidth::QuarterRoot),
        other => {
            let h = other
                .strip_prefix("fixed=")
                .ok_or_else(|| {
                    format!("expected half-cuberoot, fifthroot, quarterroot or fixed=<h>, got '{other}'")
                })?
                .parse::<f64>()
                .map_err(|_| format!("bad fixed bandwidth in '{other}'"))?;
            if h.is_finite() && h > 0.0 && h < 0.5 {
                Ok(Bandwidth::Fixed(h))
            } else {
                Err(format!("fixed bandwidth must lie in (0, 0.5), got {h}"))
            }
        }
    }
}

fn parse_method(s: &str) -> Result<CiMethod, String> {
    match s {
        "percentile" => Ok(CiMethod::Percentile),
        "symmetric-normal" => Ok(CiMethod::SymmetricNormal),
        "plug-in" => Ok(CiMethod::PlugIn),
        other => Err(format!(
            "expected percentile, symmetric-normal or plug-in, got '{other}'"
        )),
    }
}

fn parse_family(s: &str) -> Result<FamilyKind, String> {
    s.parse::<FamilyKind>().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version are successful outcomes, not usage errors
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}: error: {}", Cli::command().get_name(), e.message());
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if !(cli.alpha.is_finite() && cli.alpha > 0.0 && cli.alpha < 1.0) {
        return Err(CliError::Usage(format!("--alpha must lie in (0, 1), got {}", cli.alpha)));
    }
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot configure {} threads: {e}", cli.threads)))?;
    }
    let seed = resolve_seed(cli.seed)?;
    let (bandwidth, b, alpha) = (cli.bandwidth, cli.b, cli.alpha);
    if b == 0 {
        return Err(CliError::Usage("--B must be at least 1".into()));
    }

    match cli.command {
        Command::Select { data, out } => cmd_select(&data, &out, bandwidth),
        Command::Estimate { data, vine, mc, out } => {
            cmd_estimate(&data, &vine, mc, out.as_deref(), bandwidth, b, alpha, seed)
        }
        Command::Ci { data, vine, edge, point, method, out } => {
            cmd_ci(&data, &vine, &edge, &point, method, out.as_deref(), bandwidth, b, alpha, seed)
        }
        Command::Rho { data, vine, edge, method, out } => {
            cmd_rho(&data, &vine, &edge, method, out.as_deref(), bandwidth, b, alpha, seed)
        }
        Command::IndepTest { data, vine, edge, mc, out } => {
            cmd_indep(&data, &vine, &edge, mc, out.as_deref(), bandwidth, seed)
        }
        Command::Gof { data, vine, edge, family, mc, out } => {
            cmd_gof(&data, &vine, &edge, family, mc, out.as_deref(), bandwidth, seed)
        }
        Command::Simulate { model, n, out } => cmd_simulate(&model, n, &out, seed),
        Command::Reproduce { table, scale, out } => cmd_reproduce(table, scale, &out, seed),
    }
}

/// --seed, else $VINE_EMPIRICA_SEED, else 0.
fn resolve_seed(flag: Option<u64>) -> Result<u64, CliError> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var("VINE_EMPIRICA_SEED") {
        Ok(s) => s
            .trim()
            .parse::<u64>()
            .map_err(|_| CliError::Usage(format!("VINE_EMPIRICA_SEED='{s}' is not a u64"))),
        Err(_) => Ok(0),
    }
}

/// Stable per-edge seed stream so reports do not change when other edges
/// are added or reordered.
fn edge_seed(seed: u64, level: usize, index: usize) -> u64 {
    derive_seed(seed, ((level as u64) << 20) | (index as u64) | (1 << 40))
}

fn load_vine(path: &Path) -> Result<RegularVine, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    Ok(RegularVine::from_json_str(&text)?)
}

fn fit_dataset(
    dataset: &Dataset,
    vine: &RegularVine,
    bandwidth: Bandwidth,
) -> Result<FittedEmpiricalVine, CliError> {
    if vine.dimension() != dataset.d() {
        return Err(CliError::Data(format!(
            "vine is {}-dimensional but the data has {} columns",
            vine.dimension(),
            dataset.d()
        )));
    }
    Ok(fit(&dataset.columns, vine, bandwidth)?)
}

/// Parse a 1-based edge label like `1,4|2,3` and locate it in the vine.
fn resolve_edge(vine: &RegularVine, spec: &str) -> Result<(usize, usize), CliError> {
    let bad = |detail: &str| CliError::Usage(format!("bad edge '{spec}': {detail}"));
    let (pair, cond) = match spec.split_once('|') {
        Some((p, c)) => (p, Some(c)),
        None => (spec, None),
    };
    let parse_var = |tok: &str| -> Result<usize, CliError> {
        let v: usize = tok
            .trim()
            .parse()
            .map_err(|_| bad(&format!("'{tok}' is not a variable number")))?;
        if v == 0 {
            return Err(bad("variables are numbered from 1"));
        }
        Ok(v - 1)
    };
    let conditioned: Vec<usize> =
        pair.split(',').map(parse_var).collect::<Result<_, CliError>>()?;
    let [i, j] = conditioned[..] else {
        return Err(bad("need exactly two conditioned variables"));
    };
    if i == j {
        return Err(bad("conditioned variables must differ"));
    }
    let conditioning: Vec<usize> = match cond {
        Some(c) => c.split(',').map(parse_var).collect::<Result<_, CliError>>()?,
        None => Vec::new(),
    };
    vine.find_edge(i, j, &conditioning).ok_or_else(|| {
        let labels: Vec<String> =
            vine.trees().iter().flatten().map(|e| e.label()).collect();
        CliError::Data(format!(
            "edge '{spec}' is not in the vine; its edges are: {}",
            labels.join("  ")
        ))
    })
}

/// Parse an evaluation point `u,v` with both coordinates inside (0,1).
fn parse_point(spec: &str) -> Result<(f64, f64), CliError> {
    let bad = |detail: &str| CliError::Usage(format!("bad point '{spec}': {detail}"));
    let coords: Vec<f64> = spec
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| bad("coordinates must be numbers")))
        .collect::<Result<_, CliError>>()?;
    let [u, v] = coords[..] else {
        return Err(bad("need exactly two coordinates"));
    };
    if !(u.is_finite() && v.is_finite() && u > 0.0 && u < 1.0 && v > 0.0 && v < 1.0) {
        return Err(bad("coordinates must lie strictly inside (0, 1)"));
    }
    Ok((u, v))
}

/// Serialize a record as pretty JSON; write it to `out` or print it.
fn emit<T: serde::Serialize>(record: &T, out: Option<&Path>) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(record)
        .map_err(|e| CliError::Data(format!("cannot serialize report: {e}")))?;
    text.push('\n');
    match out {
        Some(path) => atomic_write(path, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_select(data: &Path, out: &Path, bandwidth: Bandwidth) -> Result<(), CliError> {
    let dataset = read_dataset(data)?;
    let (vine, fitted, trace) = select_structure(&dataset.columns, bandwidth)?;

    std::fs::create_dir_all(out)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", out.display())))?;

    atomic_write(&out.join("vine.json"), vine.to_json_string().as_bytes())?;

    // labels contain commas, so write the trace through a quoting writer
    let mut writer = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: &dyn std::fmt::Display| CliError::Data(format!("cannot render trace: {e}"));
    writer.write_record(["level", "edge", "weight", "chosen"]).map_err(|e| csv_err(&e))?;
    for (l, level) in trace.levels.iter().enumerate() {
        for (k, cand) in level.candidates.iter().enumerate() {
            let chosen = level.chosen.contains(&k);
            writer
                .write_record([
                    (l + 1).to_string(),
                    cand.label(),
                    cand.weight.to_string(),
                    chosen.to_string(),
                ])
                .map_err(|e| csv_err(&e))?;
        }
    }
    let trace_csv = writer.into_inner().map_err(|e| csv_err(&e))?;
    atomic_write(&out.join("trace.csv"), &trace_csv)?;

    // ground-tree weights in the vine's own edge order
    let ground = &trace.levels[0];
    let weights: Vec<f64> = vine.trees()[0]
        .iter()
        .map(|e| {
            ground
                .candidates
                .iter()
                .find(|c| c.conditioned == e.conditioned)
                .map_or(f64::NAN, |c| c.weight)
        })
        .collect();
    let dot = vine.ground_tree_dot(Some(&weights), Some(&dataset.names));
    atomic_write(&out.join("ground_tree.dot"), dot.as_bytes())?;

    println!(
        "selected a {}-dimensional vine from {} rows ({} dropped); fitted h = {}",
        dataset.d(),
        dataset.n(),
        dataset.dropped_rows,
        fitted.h()
    );
    for (l, level) in trace.levels.iter().enumerate() {
        println!("  level {}: total |rho| weight {:.4}", l + 1, level.total_weight);
    }
    println!("wrote {}, trace.csv, ground_tree.dot", out.join("vine.json").display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_estimate(
    data: &Path,
    vine_path: &Path,
    mc: usize,
    out: Option<&Path>,
    bandwidth: Bandwidth,
    b: usize,
    alpha: f64,
    seed: u64,
) -> Result<(), CliError> {
    let dataset = read_dataset(data)?;
    let vine = load_vine(vine_path)?;
    let fitted = fit_dataset(&dataset, &vine, bandwidth)?;

    let mut edges = Vec::with_capacity(vine.edge_count());
    for (l, tree) in vine.trees().iter().enumerate() {
        for (e, edge) in tree.iter().enumerate() {
            let rho = spearman_rho(&fitted, l, e)?;
            let ci = spearman_ci(&fitted, l, e, alpha, b, edge_seed(seed, l, e), CiMethod::Percentile)?;
            // one shared seed so the rank-based null is simulated once
            let indep = independence_test(&fitted, l, e, mc, seed)?;
            edges.push(EdgeReport {
                level: l + 1,
                label: edge.label(),
                spearman_rho: rho,
                rho_lower: ci.lower,
                rho_upper: ci.upper,
                independence_p: indep.p_value,
                warning: ci.warning,
            });
        }
    }
    let report = EstimateReport {
        schema_version: SCHEMA_VERSION,
        command: "estimate",
        data: data.display().to_string(),
        n: fitted.n(),
        d: dataset.d(),
        dropped_rows: dataset.dropped_rows,
        bandwidth: fitted.h(),
        bootstrap_replicates: b,
        mc_replicates: mc,
        alpha,
        seed,
        edges,
    };
    emit(&report, out)
}

#[allow(clippy::too_many_arguments)]
fn cmd_ci(
    data: &Path,
    vine_path: &Path,
    edge: &str,
    point: &str,
    method: CiMethod,
    out: Option<&Path>,
    bandwidth: Bandwidth,
    b: usize,
    alpha: f64,
    seed: u64,
) -> Result<(), CliError> {
    let point = parse_point(point)?;
    let dataset = read_dataset(data)?;
    let vine = load_vine(vine_path)?;
    let (level, index) = resolve_edge(&vine, edge)?;
    let fitted = fit_dataset(&dataset, &vine, bandwidth)?;
    let ci = confidence_interval(&fitted, level, index, point, alpha, b, seed, method)?;
    let estimate = fitted.estimate(level, index).copula(point.0, point.1);
    let record = IntervalRecord::new(
        "ci",
        vine.edge(level, index).label(),
        Some([point.0, point.1]),
        estimate,
        ci,
        b,
        seed,
    );
    emit(&record, out)
}

#[allow(clippy::too_many_arguments)]
fn cmd_rho(
    data: &Path,
    vine_path: &Path,
    edge: &str,
    method: CiMethod,
    out: Option<&Path>,
    bandwidth: Bandwidth,
    b: usize,
    alpha: f64,
    seed: u64,
) -> Result<(), CliError> {
    let dataset = read_dataset(data)?;
    let vine = load_vine(vine_path)?;
    let (level, index) = resolve_edge(&vine, edge)?;
    let fitted = fit_dataset(&dataset, &vine, bandwidth)?;
    let estimate = spearman_rho(&fitted, level, index)?;
    let ci = spearman_ci(&fitted, level, index, alpha, b, seed, method)?;
    let record =
        IntervalRecord::new("rho", vine.edge(level, index).label(), None, estimate, ci, b, seed);
    emit(&record, out)
}

fn cmd_indep(
    data: &Path,
    vine_path: &Path,
    edge: &str,
    mc: usize,
    out: Option<&Path>,
    bandwidth: Bandwidth,
    seed: u64,
) -> Result<(), CliError> {
    let dataset = read_dataset(data)?;
    let vine = load_vine(vine_path)?;
    let (level, index) = resolve_edge(&vine, edge)?;
    let fitted = fit_dataset(&dataset, &vine, bandwidth)?;
    let result = independence_test(&fitted, level, index, mc, seed)?;
    let record =
        TestRecord::new("indep-test", vine.edge(level, index).label(), None, result, seed);
    emit(&record, out)
}

#[allow(clippy::too_many_arguments)]
fn cmd_gof(
    data: &Path,
    vine_path: &Path,
    edge: &str,
    family: FamilyKind,
    mc: usize,
    out: Option<&Path>,
    bandwidth: Bandwidth,
    seed: u64,
) -> Result<(), CliError> {
    let dataset = read_dataset(data)?;
    let vine = load_vine(vine_path)?;
    let (level, index) = resolve_edge(&vine, edge)?;
    let fitted = fit_dataset(&dataset, &vine, bandwidth)?;
    let result = gof_test(&fitted, level, index, family, mc, seed)?;
    let record = TestRecord::new(
        "gof",
        vine.edge(level, index).label(),
        Some(family.to_string()),
        result,
        seed,
    );
    emit(&record, out)
}

fn cmd_simulate(model_path: &Path, n: usize, out: &Path, seed: u64) -> Result<(), CliError> {
    if n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    let text = std::fs::read_to_string(model_path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", model_path.display())))?;
    let model = VineModel::from_json_str(&text)?;
    let columns = model.sample_stream(n, seed, 0);
    let names: Vec<String> = (1..=model.dimension()).map(|j| format!("x{j}")).collect();
    atomic_write(out, csv_from_columns(&names, &columns).as_bytes())?;
    println!("wrote {} rows of {} columns to {}", n, model.dimension(), out.display());
    Ok(())
}

fn cmd_reproduce(
    table: reproduce::TableId,
    scale: f64,
    out: &Path,
    seed: u64,
) -> Result<(), CliError> {
    let csv = reproduce::run(table, scale, seed)?;
    atomic_write(out, csv.as_bytes())?;
    print!("{csv}");
    println!("wrote {}", out.display());
    Ok(())
}

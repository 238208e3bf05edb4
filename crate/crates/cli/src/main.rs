//! Command-line front end: independence tests, feature screening, influence
//! grids, and simulation runs.
//!
//! Conventions: results go to standard output as single-line JSON; bulk data
//! (grids, ROC/QQ points, full reports) goes to files. Every stochastic
//! subcommand requires an explicit `--seed`. Exit codes: 0 success, 2
//! usage/input error, 1 internal error.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use catdcov::error::Error;
use catdcov::hyptest::{
    chi1_test, lrt_test, pearson_test, permutation_test, weighted_chi2_test, PermutationStat,
    TestMethod, TestOutcome,
};
use catdcov::influence::{gross_error_sensitivity, Functional};
use catdcov::screening::{screen, ScreeningStat, Selector};
use catdcov::simlab::{
    build_setting, emit_report, run_screening_experiment, run_test_experiment, write_roc_csv,
    ReportFormat, SettingOverrides, SimKind, SimulationSpec,
};
use catdcov::stream::substream;
use catdcov::table::{ContingencyTable, JointPMF, PairedSample};

#[derive(Parser)]
#[command(name = "catdcov", version, about = "Dependence tests and screening for categorical data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test independence of the two columns of a sample CSV.
    Test(TestArgs),
    /// Screen the feature columns of a CSV against its response column.
    Screen(ScreenArgs),
    /// Evaluate an influence-function grid for a pmf JSON file.
    Influence(InfluenceArgs),
    /// Run a named simulation experiment and write its report files.
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Permutation,
    Weighted,
    Chi1,
    Pearson,
    Lrt,
}

#[derive(Clone, Copy, ValueEnum)]
enum StatArg {
    Dcov,
    DcovUnbiased,
}

#[derive(Args)]
struct TestArgs {
    /// Two-column CSV with header `x,y`.
    input: PathBuf,
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Permutation statistic.
    #[arg(long, value_enum, default_value = "dcov")]
    stat: StatArg,
    /// Permutation count.
    #[arg(long, default_value_t = 999)]
    b: usize,
    /// Monte-Carlo draws for the weighted null.
    #[arg(long, default_value_t = 100_000)]
    draws: usize,
    /// Seed; required for stochastic methods.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Dcov,
    DcovUnbiased,
    Chisq,
}

impl From<EstimatorArg> for ScreeningStat {
    fn from(e: EstimatorArg) -> Self {
        match e {
            EstimatorArg::Dcov => ScreeningStat::Dcov,
            EstimatorArg::DcovUnbiased => ScreeningStat::DcovUnbiased,
            EstimatorArg::Chisq => ScreeningStat::ChiSq,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SelectorArg {
    Changepoint,
    Maxratio,
}

#[derive(Args)]
struct ScreenArgs {
    /// CSV whose first column is the response and remaining columns features.
    input: PathBuf,
    #[arg(long, value_enum, default_value = "dcov")]
    estimator: EstimatorArg,
    #[arg(long, value_enum, default_value = "changepoint")]
    selector: SelectorArg,
    /// Write the full report JSON here (default: stdout only).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FunctionalArg {
    Dcov,
    Chisq,
}

#[derive(Args)]
struct InfluenceArgs {
    /// Pmf JSON file: {"probs": [[...], ...]}.
    #[arg(long)]
    pmf: PathBuf,
    #[arg(long, value_enum)]
    functional: FunctionalArg,
    /// Write the influence grid CSV (columns x,y,value) here.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Named setting: setting1..setting4, null1, null2, alt1, alt2.
    #[arg(long, conflicts_with = "config")]
    setting: Option<String>,
    /// Full SimulationSpec JSON file instead of a named setting.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    replicates: Option<usize>,
    /// Feature-panel width for screening settings.
    #[arg(long = "K", value_name = "K")]
    k: Option<usize>,
    #[arg(long)]
    signal_fraction: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    b: Option<usize>,
    #[arg(long)]
    draws: Option<usize>,
    /// Test methods for null/alternative runs.
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [MethodArg::Permutation, MethodArg::Weighted, MethodArg::Chi1])]
    methods: Vec<MethodArg>,
    /// Feature sampling mode for screening runs.
    #[arg(long, value_enum, default_value = "independent")]
    mode: ModeArg,
    /// Worker threads (0 = all cores). Never changes results.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Directory for report files.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Independent,
    Shared,
}

enum CliError {
    /// Usage or input problems: exit 2.
    Input(String),
    /// Everything else: exit 1.
    Internal(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            // everything describing the user's data is an input error
            Error::InvalidInput(_)
            | Error::CsvParse { .. }
            | Error::Json(_)
            | Error::EmptyTable
            | Error::InsufficientSample { .. }
            | Error::DegenerateStatistic(_)
            | Error::SingularInfluence { .. }
            | Error::Selector(_)
            | Error::Metric(_)
            | Error::UndefinedTest(_) => CliError::Input(e.to_string()),
            other => CliError::Internal(other.to_string()),
        }
    }
}

fn open_input(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Input(format!("cannot open {}: {}", path.display(), e)))
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), CliError> {
    let line = serde_json::to_string(value)
        .map_err(|e| CliError::Internal(format!("serialization failed: {}", e)))?;
    println!("{}", line);
    Ok(())
}

fn require_seed(seed: Option<u64>) -> Result<u64, CliError> {
    seed.ok_or_else(|| CliError::Input("--seed is required for stochastic methods".into()))
}

fn run_test(args: &TestArgs) -> Result<(), CliError> {
    let sample = PairedSample::from_csv_reader(open_input(&args.input)?)?;
    let table = ContingencyTable::from_sample(&sample);
    let mut outcome: TestOutcome = match args.method {
        MethodArg::Permutation => {
            let seed = require_seed(args.seed)?;
            let stat = match args.stat {
                StatArg::Dcov => PermutationStat::Dcov,
                StatArg::DcovUnbiased => PermutationStat::DcovUnbiased,
            };
            permutation_test(&sample, stat, args.b, &mut substream(seed, &[0]))?
        }
        MethodArg::Weighted => {
            let seed = require_seed(args.seed)?;
            weighted_chi2_test(&table, args.draws, &mut substream(seed, &[0]))?
        }
        MethodArg::Chi1 => chi1_test(&table)?,
        MethodArg::Pearson => pearson_test(&table)?,
        MethodArg::Lrt => lrt_test(&table)?,
    };
    outcome.seed = args.seed;
    print_json(&outcome)
}

fn run_screen(args: &ScreenArgs) -> Result<(), CliError> {
    let data = catdcov::screening::FeatureMatrix::from_csv_reader(open_input(&args.input)?)?;
    let selector = match args.selector {
        SelectorArg::Changepoint => Selector::Changepoint,
        SelectorArg::Maxratio => Selector::Maxratio,
    };
    let report = screen(&data, args.estimator.into(), selector)?;
    if let Some(path) = &args.output {
        let file = File::create(path)
            .map_err(|e| CliError::Input(format!("cannot create {}: {}", path.display(), e)))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut w, &report)
            .map_err(|e| CliError::Internal(e.to_string()))?;
        writeln!(w).map_err(|e| CliError::Internal(e.to_string()))?;
    }
    // stdout summary: selected set and thresholds only
    print_json(&json!({
        "estimator": report.estimator,
        "selector": report.selector,
        "threshold_maxratio": report.threshold_maxratio,
        "threshold_changepoint": report.threshold_changepoint,
        "selected": report.selected,
        "selected_names": report.selected.iter().map(|&k| report.feature_names[k].clone()).collect::<Vec<_>>(),
        "num_features": report.stats.len(),
        "constant_response": report.constant_response,
    }))
}

fn run_influence(args: &InfluenceArgs) -> Result<(), CliError> {
    let pmf = JointPMF::from_json_reader(open_input(&args.pmf)?)?;
    let functional = match args.functional {
        FunctionalArg::Dcov => Functional::Dcov,
        FunctionalArg::Chisq => Functional::ChiSq,
    };
    let surface = gross_error_sensitivity(functional, &pmf);
    let file = File::create(&args.out)
        .map_err(|e| CliError::Input(format!("cannot create {}: {}", args.out.display(), e)))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "x,y,value").map_err(|e| CliError::Internal(e.to_string()))?;
    for (x, row) in surface.values.iter().enumerate() {
        for (y, v) in row.iter().enumerate() {
            writeln!(w, "{},{},{}", x + 1, y + 1, v).map_err(|e| CliError::Internal(e.to_string()))?;
        }
    }
    w.flush().map_err(|e| CliError::Internal(e.to_string()))?;
    print_json(&json!({
        "functional": match functional { Functional::Dcov => "dcov", Functional::ChiSq => "chisq" },
        "rows": pmf.rows(),
        "cols": pmf.cols(),
        "gamma": surface.gamma,
        "grid": args.out.display().to_string(),
    }))
}

fn resolve_spec(args: &SimulateArgs) -> Result<SimulationSpec, CliError> {
    let overrides = SettingOverrides {
        n: args.n,
        replicates: args.replicates,
        num_features: args.k,
        signal_fraction: args.signal_fraction,
        seed: Some(require_seed(args.seed)?),
        alpha: args.alpha,
        permutation_b: args.b,
        null_draws: args.draws,
        sampling: Some(match args.mode {
            ModeArg::Independent => catdcov::simlab::SamplingMode::IndependentPairs,
            ModeArg::Shared => catdcov::simlab::SamplingMode::SharedResponse,
        }),
        ..Default::default()
    };
    if let Some(name) = &args.setting {
        return Ok(build_setting(name, &overrides)?);
    }
    let path = args
        .config
        .as_ref()
        .ok_or_else(|| CliError::Input("either --setting or --config is required".into()))?;
    let mut spec: SimulationSpec = serde_json::from_reader(open_input(path)?)
        .map_err(|e| CliError::Input(format!("bad spec in {}: {}", path.display(), e)))?;
    // CLI flags override the file
    spec.seed = require_seed(args.seed)?;
    if let Some(n) = args.n {
        spec.sample_size = n;
    }
    if let Some(r) = args.replicates {
        spec.replicates = r;
    }
    if let Some(k) = args.k {
        spec.num_features = k;
    }
    if let Some(a) = args.alpha {
        spec.alpha = a;
    }
    if let Some(b) = args.b {
        spec.permutation_b = b;
    }
    if let Some(d) = args.draws {
        spec.null_draws = d;
    }
    spec.validate()?;
    Ok(spec)
}

fn run_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let spec = resolve_spec(args)?;
    let methods: Vec<TestMethod> = args
        .methods
        .iter()
        .map(|m| match m {
            MethodArg::Permutation => TestMethod::Permutation,
            MethodArg::Weighted => TestMethod::WeightedChisq,
            MethodArg::Chi1 => TestMethod::ChisqDf1,
            MethodArg::Pearson => TestMethod::Pearson,
            MethodArg::Lrt => TestMethod::Lrt,
        })
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.workers)
        .build()
        .map_err(|e| CliError::Internal(format!("cannot build worker pool: {}", e)))?;
    let start = std::time::Instant::now();
    let report = pool.install(|| match spec.kind {
        SimKind::Screening => run_screening_experiment(&spec),
        SimKind::Null | SimKind::Alternative => run_test_experiment(&spec, &methods),
    })?;
    let runtime = start.elapsed().as_secs_f64();

    if let Some(dir) = &args.out_dir {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Input(format!("cannot create {}: {}", dir.display(), e)))?;
        emit_report(&report, ReportFormat::Json, &dir.join("report.json"))?;
        if let Some(screening) = &report.screening {
            if !screening.one_class_truth {
                for (idx, est) in screening.estimators.iter().enumerate() {
                    let tag = serde_json::to_value(est)
                        .map_err(|e| CliError::Internal(e.to_string()))?;
                    let name = format!("roc_{}.csv", tag.as_str().unwrap_or("estimator"));
                    write_roc_csv(&report, idx, &dir.join(name))?;
                }
            }
        }
        if report.spec.kind == SimKind::Null {
            emit_report(&report, ReportFormat::Csv, &dir.join("qq.csv"))?;
        }
    }

    // aggregate summary line on stdout; wall-clock goes to stderr so output
    // files and stdout stay byte-stable for identical seeds
    eprintln!("runtime_seconds: {:.3}", runtime);
    let summary = match (&report.screening, &report.testing) {
        (Some(s), _) => json!({
            "setting": spec.name,
            "kind": spec.kind,
            "n": spec.sample_size,
            "K": spec.num_features,
            "replicates": spec.replicates,
            "estimators": s.estimators,
            "mean_auc": s.mean_auc,
            "mean_sensitivity": s.mean_sensitivity,
            "mean_specificity": s.mean_specificity,
            "mean_selected_changepoint": s.mean_selected_changepoint,
            "mean_selected_maxratio": s.mean_selected_maxratio,
        }),
        (_, Some(t)) => json!({
            "setting": spec.name,
            "kind": spec.kind,
            "n": spec.sample_size,
            "replicates": spec.replicates,
            "alpha": t.alpha,
            "rejection_rates": t.methods.iter()
                .map(|(k, v)| (k.clone(), json!({"rate": v.rate, "se": v.se})))
                .collect::<serde_json::Map<_, _>>(),
        }),
        _ => json!({}),
    };
    print_json(&summary)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Test(args) => run_test(args),
        Command::Screen(args) => run_screen(args),
        Command::Influence(args) => run_influence(args),
        Command::Simulate(args) => run_simulate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Input(msg)) => {
            eprintln!("error: {}", msg);
            ExitCode::from(2)
        }
        Err(CliError::Internal(msg)) => {
            eprintln!("error: {}", msg);
            ExitCode::from(1)
        }
    }
}

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use fairbbr_core::experiment::run_scenario;
use fairbbr_core::fairness::{AlphaMode, RttPrime};
use fairbbr_core::measurement::{import_csv, write_csv, Dataset, Provenance, CSV_HEADER, DEFAULT_LATENCY_THRESHOLD};
use fairbbr_core::ml::ModelArtifact;
use fairbbr_core::scenario::{Algorithm, ScenarioConfig};

use crate::error::{csv_error, CliError};
use crate::fairness::{compare, PredictorSource};
use crate::plot;
use crate::sweep::{run_sweep, write_sweep, SweepSpec, DEFAULT_BUFFERS, DEFAULT_RATES};
use crate::train::{load_dataset, train, TrainOptions};

#[derive(Debug, Parser)]
#[command(name = "fairbbr", version, about = "BBR and coupled-fairness network simulator with a latency-class ML pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario and write its per-window metrics.
    Simulate(SimulateArgs),
    /// Run a send-rate by buffer-size grid and write plot data.
    Sweep(SweepArgs),
    /// Merge metric CSVs into a labeled dataset.
    Dataset(DatasetArgs),
    /// Cross-validate classifiers and train the throughput regressor.
    Train(TrainArgs),
    /// Compare bbr, coupled and coupled_ml fairness on one scenario.
    Fairness(FairnessArgs),
    /// Render SVG charts from plot-data CSVs.
    Plot(PlotArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum AlphaModeArg {
    AsPrinted,
    PerSubflow,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum RttPrimeArg {
    Max,
    Min,
}

/// Options that override fields of a scenario config.
#[derive(Debug, Default, Args)]
pub struct Overrides {
    /// Seed for arrivals and controller randomness.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub alpha_mode: Option<AlphaModeArg>,
    #[arg(long, value_enum)]
    pub rtt_prime: Option<RttPrimeArg>,
    /// Run length in seconds.
    #[arg(long)]
    pub duration: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ScenarioConfig) -> Result<(), CliError> {
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(mode) = self.alpha_mode {
            cfg.alpha_mode = match mode {
                AlphaModeArg::AsPrinted => AlphaMode::AsPrinted,
                AlphaModeArg::PerSubflow => AlphaMode::PerSubflow,
            };
        }
        if let Some(r) = self.rtt_prime {
            cfg.rtt_prime = match r {
                RttPrimeArg::Max => RttPrime::Max,
                RttPrimeArg::Min => RttPrime::Min,
            };
        }
        if let Some(d) = self.duration {
            cfg.duration_s = d;
        }
        cfg.validate()?;
        Ok(())
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output metrics CSV.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Base scenario config; defaults to the built-in sweep scenario.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Offered loads in messages per second.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_RATES.to_vec())]
    pub rates: Vec<f64>,
    /// Bottleneck buffer sizes in packets.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_BUFFERS.to_vec())]
    pub buffers: Vec<i64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Maximum cells run in parallel; defaults to the number of CPUs.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Also write SVG charts next to the plot data.
    #[arg(long)]
    pub svg: bool,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    /// Metric CSV files, or directories whose CSV files are all read.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Output dataset CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Latency above this many seconds is High.
    #[arg(long, default_value_t = DEFAULT_LATENCY_THRESHOLD)]
    pub threshold: f64,
    /// Fail on the first malformed row instead of skipping it.
    #[arg(long)]
    pub strict_csv: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset or metrics CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory for the report and model artifacts.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Cross-validation folds.
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Repeated cross-validation runs.
    #[arg(long, default_value_t = 10)]
    pub runs: usize,
    /// Relative error within which a throughput prediction is correct.
    #[arg(long, default_value_t = 0.10)]
    pub tolerance: f64,
    #[arg(long, default_value_t = DEFAULT_LATENCY_THRESHOLD)]
    pub threshold: f64,
    #[arg(long)]
    pub strict_csv: bool,
}

#[derive(Debug, Args)]
pub struct FairnessArgs {
    /// Scenario config; defaults to the built-in two-subflow scenario.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output report CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Classifier artifact for coupled_ml; without it a tree is fitted on
    /// the coupled run.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Directory holding plot-data CSVs.
    #[arg(long)]
    pub input: PathBuf,
    /// Directory for the SVGs; defaults to the input directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, CliError> {
    ScenarioConfig::from_json(&read_text(path)?)
        .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => sweep(a),
        Command::Dataset(a) => dataset(a),
        Command::Train(a) => train_cmd(a),
        Command::Fairness(a) => fairness(a),
        Command::Plot(a) => plot_cmd(a),
    }
}

fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    let mut cfg = load_config(&args.config)?;
    args.overrides.apply(&mut cfg)?;
    if cfg.algorithm == Algorithm::CoupledMl {
        return Err(CliError::Invalid(
            "simulate does not take a model; use the fairness command for coupled_ml".into(),
        ));
    }
    let out = run_scenario(&cfg, None)?;
    let mut buf = Vec::new();
    write_csv(&out.rows, &mut buf).map_err(|e| CliError::Internal(e.to_string()))?;
    write_bytes(&args.out, &buf)?;
    let s = &out.stats;
    println!(
        "sent {} delivered {} dropped {} retransmitted {}",
        s.sent, s.delivered, s.dropped, s.retransmitted
    );
    for (flow, f) in out.flows.iter().zip(&s.per_flow) {
        println!(
            "flow {}: sent {} delivered {} dropped {} retransmitted {} in_flight {} messages {}/{}",
            flow.id, f.sent, f.delivered, f.dropped, f.retransmitted, f.in_flight, f.messages_delivered, f.messages_offered
        );
    }
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<(), CliError> {
    let mut base = match &args.config {
        Some(p) => load_config(p)?,
        None => ScenarioConfig::default_sweep(),
    };
    args.overrides.apply(&mut base)?;
    let spec = SweepSpec::new(base, args.rates, args.buffers)?;
    let jobs = args
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let results = run_sweep(&spec, jobs)?;
    let summaries = write_sweep(&spec, results, &args.out, args.svg)?;
    for s in &summaries {
        println!(
            "rate {} buffer {}: throughput {} latency {}",
            s.cell.send_rate,
            s.cell.buffer,
            s.throughput,
            s.avg_latency.map_or("-".to_string(), |v| v.to_string())
        );
    }
    Ok(())
}

fn csv_files(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(input)
                .map_err(|e| CliError::io(input, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "csv"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(input.clone());
        }
    }
    Ok(files)
}

fn dataset(args: DatasetArgs) -> Result<(), CliError> {
    let mut rows = Vec::new();
    for path in csv_files(&args.inputs)? {
        let report = import_csv(&path, args.strict_csv).map_err(|e| csv_error(&path, e))?;
        if report.skipped > 0 {
            log::warn!("{}: skipped {} malformed rows", path.display(), report.skipped);
        }
        rows.extend(report.rows);
    }
    let data = Dataset::from_metrics(&rows, args.threshold, Provenance::Imported)
        .map_err(|e| CliError::Invalid(e.to_string()))?;
    let err = |e: csv::Error| CliError::Internal(e.to_string());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = CSV_HEADER.to_vec();
    header.push("latency_class");
    w.write_record(&header).map_err(err)?;
    let kept = rows.iter().filter(|r| r.avg_latency.is_some() && r.throughput > 0.0);
    for (r, d) in kept.zip(&data.rows) {
        w.write_record([
            r.window_start.to_string(),
            r.flow_id.to_string(),
            r.send_rate.to_string(),
            r.block_size.to_string(),
            r.throughput.to_string(),
            d.avg_latency.to_string(),
            d.class.to_string(),
        ])
        .map_err(err)?;
    }
    write_bytes(&args.out, &w.into_inner().map_err(|e| CliError::Internal(e.to_string()))?)?;
    let (low, high) = data.class_counts();
    println!("{} rows: {low} Low, {high} High", data.len());
    Ok(())
}

fn train_cmd(args: TrainArgs) -> Result<(), CliError> {
    let data = load_dataset(&args.input, args.strict_csv, args.threshold)?;
    let outcome = train(
        &data,
        TrainOptions {
            folds: args.folds,
            runs: args.runs,
            seed: args.seed,
            threshold: args.threshold,
            tolerance: args.tolerance,
            ..TrainOptions::default()
        },
    )?;
    let report = outcome.report();
    fs::create_dir_all(&args.out).map_err(|e| CliError::io(&args.out, e))?;
    write_bytes(&args.out.join("report.txt"), report.as_bytes())?;
    for (stem, artifact) in &outcome.artifacts {
        write_bytes(&args.out.join(format!("{stem}.json")), artifact.to_json().as_bytes())?;
    }
    print!("{report}");
    Ok(())
}

fn fairness(args: FairnessArgs) -> Result<(), CliError> {
    let mut cfg = match &args.config {
        Some(p) => load_config(p)?,
        None => ScenarioConfig::default_fairness(),
    };
    args.overrides.apply(&mut cfg)?;
    let source = match &args.model {
        Some(path) => {
            let artifact = ModelArtifact::from_json(&read_text(path)?)
                .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
            artifact
                .classifier()
                .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
            PredictorSource::Artifact(Box::new(artifact))
        }
        None => PredictorSource::Bootstrap,
    };
    let report = compare(&cfg, source)?;
    write_bytes(&args.out, &report.to_csv()?)?;
    for (algorithm, j) in &report.jain {
        println!("{algorithm} Jain index: {j}");
    }
    Ok(())
}

fn plot_cmd(args: PlotArgs) -> Result<(), CliError> {
    let out_dir = args.out.clone().unwrap_or_else(|| args.input.clone());
    fs::create_dir_all(&out_dir).map_err(|e| CliError::io(&out_dir, e))?;
    let mut rendered = 0;
    for path in csv_files(std::slice::from_ref(&args.input))? {
        let bytes = fs::read(&path).map_err(|e| CliError::io(&path, e))?;
        if !bytes.starts_with(plot::PLOT_HEADER.join(",").as_bytes()) {
            continue;
        }
        let stem = path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
        let data = plot::from_csv(&bytes, &stem)?;
        write_bytes(&out_dir.join(format!("{stem}.svg")), plot::render_svg(&data).as_bytes())?;
        rendered += 1;
    }
    if rendered == 0 {
        return Err(CliError::Invalid(format!(
            "{}: no plot-data CSVs found",
            args.input.display()
        )));
    }
    println!("rendered {rendered} charts");
    Ok(())
}

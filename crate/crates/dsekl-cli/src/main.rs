//! `dsekl` command-line interface.

use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use dsekl::data::{generate_xor, Dataset};
use dsekl::model::{load_model, save_model, DecisionModel};
use dsekl::model_selection::{dsekl_trainer, grid_search, SearchSpace};
use dsekl::optimizer::{train_serial, RunRecord, StepSchedule, TrainConfig};
use dsekl::parallel::train_parallel;
use dsekl::rng::rng_from_seed;

use dsekl_cli::config::{read_config, Method, Overrides, Setup};
use dsekl_cli::experiments::{
    load_data, run_covertype, run_speedup, run_sweep, run_table1, CovertypePlan, SweepAxis,
    SweepData, SweepPlan, Table1Plan,
};

#[derive(Parser)]
#[command(
    name = "dsekl",
    version,
    about = "Kernel SVM training on random Gram sub-blocks, with baselines and benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write it with its metrics
    Train(TrainArgs),
    /// Evaluate a saved model on a dataset
    Predict(PredictArgs),
    /// Compare methods while sweeping I or J
    Sweep(SweepArgs),
    /// Small-data benchmark table (subsample, tune, repeat)
    Table1(Table1Args),
    /// Large-data protocol: scaled blocks, holdouts, stop rule
    Covertype(CovertypeArgs),
    /// Measure parallel speedup on a fixed workload
    Speedup(SpeedupArgs),
    /// Exhaustive grid search with two-fold cross-validation
    Gridsearch(GridsearchArgs),
}

fn parse_method(s: &str) -> Result<Method, String> {
    Method::from_str(s)
}

fn parse_schedule(s: &str) -> Result<StepSchedule, String> {
    match s {
        "iter" => Ok(StepSchedule::InverseIter),
        "epoch" => Ok(StepSchedule::InverseEpoch),
        other => Err(format!("unknown schedule '{other}' (expected iter or epoch)")),
    }
}

fn parse_axis(s: &str) -> Result<SweepAxis, String> {
    SweepAxis::from_str(s)
}

/// Hyperparameter flags shared by the training-style commands; unset flags
/// fall through to the config file and then the defaults.
#[derive(Args, Clone, Default)]
struct OverrideArgs {
    /// Training method: dsekl, parallel, batch, rks, or empfix
    #[arg(long, value_parser = parse_method)]
    method: Option<Method>,
    /// RBF kernel bandwidth
    #[arg(long)]
    sigma: Option<f64>,
    /// Regularization strength
    #[arg(long)]
    lambda: Option<f64>,
    /// Base step size
    #[arg(long)]
    eta0: Option<f64>,
    /// Step schedule: iter (eta0/t) or epoch (eta0/e)
    #[arg(long, value_parser = parse_schedule)]
    schedule: Option<StepSchedule>,
    /// Gradient batch size I
    #[arg(long = "I")]
    grad_batch: Option<usize>,
    /// Expansion sample size J (feature count for rks, subset for empfix)
    #[arg(long = "J")]
    expansion: Option<usize>,
    /// Maximum training epochs
    #[arg(long)]
    epochs: Option<usize>,
    /// Stop when the epoch weight change drops below this L2 norm
    #[arg(long)]
    stop_delta: Option<f64>,
    /// Root random seed
    #[arg(long)]
    seed: Option<u64>,
    /// Worker count for the parallel method
    #[arg(long)]
    workers: Option<usize>,
    /// Enable or disable gradient dampening (parallel method)
    #[arg(long)]
    dampening: Option<bool>,
    /// Keep one fixed block partition instead of resampling each sweep
    #[arg(long)]
    fixed_blocks: Option<bool>,
}

impl OverrideArgs {
    fn to_overrides(&self) -> Overrides {
        Overrides {
            method: self.method,
            sigma: self.sigma,
            lambda: self.lambda,
            eta0: self.eta0,
            schedule: self.schedule,
            grad_batch: self.grad_batch,
            expansion: self.expansion,
            epochs: self.epochs,
            stop_delta: self.stop_delta,
            seed: self.seed,
            workers: self.workers,
            dampening: self.dampening,
            fixed_blocks: self.fixed_blocks,
        }
    }
}

fn build_setup(args: &OverrideArgs, config_path: Option<&PathBuf>) -> Result<Setup, String> {
    let file = match config_path {
        Some(p) => read_config(p)?,
        None => Overrides::default(),
    };
    args.to_overrides().over(file).resolve()
}

#[derive(Args)]
struct TrainArgs {
    /// Training data in libsvm format
    #[arg(long)]
    data: PathBuf,
    /// Optional validation data tracked in the metrics
    #[arg(long)]
    validation: Option<PathBuf>,
    /// Flat key=value config file (flags take precedence)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Where to write the trained model
    #[arg(long)]
    model_out: Option<PathBuf>,
    /// Where to write the per-checkpoint metrics CSV
    #[arg(long)]
    metrics_out: Option<PathBuf>,
    #[command(flatten)]
    overrides: OverrideArgs,
}

#[derive(Args)]
struct PredictArgs {
    /// Saved model file
    #[arg(long)]
    model: PathBuf,
    /// Dataset to score
    #[arg(long)]
    data: PathBuf,
    /// Write predicted labels, one per line
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Dataset file, split half train / half test per repetition
    #[arg(long, conflicts_with = "xor")]
    data: Option<PathBuf>,
    /// Generate a fresh XOR train/test pair of this size per repetition
    #[arg(long)]
    xor: Option<usize>,
    /// Swept parameter: I or J
    #[arg(long, value_parser = parse_axis)]
    axis: SweepAxis,
    /// Values of the swept parameter
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<usize>,
    /// Methods to compare
    #[arg(long, value_delimiter = ',', value_parser = parse_method,
          default_values = ["dsekl", "rks", "empfix", "batch"])]
    methods: Vec<Method>,
    /// Repetitions per point
    #[arg(long, default_value_t = 10)]
    reps: usize,
    /// Write the CSV here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: OverrideArgs,
}

#[derive(Args)]
struct Table1Args {
    /// Datasets (names resolved as <name>.svm under DSEKL_DATA_DIR)
    #[arg(long, value_delimiter = ',',
          default_values = ["diabetes", "breast-cancer", "sonar"])]
    datasets: Vec<String>,
    #[arg(long, default_value_t = 10)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Epoch budget per cross-validation training
    #[arg(long, default_value_t = 20)]
    cv_epochs: usize,
    /// Epoch budget for the final runs
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    /// Write the reports as JSON here
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CovertypeArgs {
    /// Dataset in libsvm format
    #[arg(long)]
    data: PathBuf,
    /// Desk-scale subsample size (full dataset when omitted)
    #[arg(long)]
    subsample: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Safety valve on top of the protocol's stop rule
    #[arg(long, default_value_t = 100)]
    max_epochs: usize,
    /// Also train the batch reference on a 5000-point sub-subsample
    #[arg(long, default_value_t = false)]
    batch_comparison: bool,
    /// Write the run record CSV here
    #[arg(long)]
    record_out: Option<PathBuf>,
}

#[derive(Args)]
struct SpeedupArgs {
    /// Dataset file for the workload
    #[arg(long, conflicts_with = "xor")]
    data: Option<PathBuf>,
    /// Use a generated XOR dataset of this size instead
    #[arg(long)]
    xor: Option<usize>,
    /// Worker counts to measure
    #[arg(long, value_delimiter = ',', required = true)]
    workers: Vec<usize>,
    /// Block size (I = J) per worker
    #[arg(long, default_value_t = 200)]
    block: usize,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Double the dataset to lengthen the workload
    #[arg(long, default_value_t = false)]
    duplicate: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the CSV here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GridsearchArgs {
    /// Training data in libsvm format
    #[arg(long)]
    data: PathBuf,
    /// Epoch budget per cross-validation training
    #[arg(long, default_value_t = 20)]
    cv_epochs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the full CV table CSV here
    #[arg(long)]
    out: Option<PathBuf>,
}

fn write_or_print(out: Option<&PathBuf>, content: &str) -> Result<(), String> {
    match out {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn cmd_train(args: TrainArgs) -> Result<(), String> {
    let setup = build_setup(&args.overrides, args.config.as_ref())?;
    let data = load_data(&args.data)?;
    let validation = match &args.validation {
        Some(p) => Some(load_data(p)?),
        None => None,
    };
    let val_ref = validation.as_deref();
    let err = |e: dsekl::Error| e.to_string();

    let (model, record): (Option<dsekl::model::DualModel>, Option<RunRecord>) = match setup.method {
        Method::Dsekl => {
            let (m, r) = train_serial(&data, &setup.spec, &setup.config, val_ref).map_err(err)?;
            (Some(m), Some(r))
        }
        Method::Parallel => {
            let (m, r) = train_parallel(&data, &setup.spec, &setup.config, val_ref).map_err(err)?;
            (Some(m), Some(r))
        }
        Method::EmpFix => {
            let (m, r) = dsekl::baselines::train_fixed_subsample(
                &data,
                &setup.spec,
                &setup.config,
                setup.config.expansion_size,
                val_ref,
            )
            .map_err(err)?;
            (Some(m), Some(r))
        }
        Method::Batch => {
            let m = dsekl_cli::experiments::train_batch_for(&data, &setup.spec, &setup.config)
                .map_err(err)?;
            (Some(m), None)
        }
        Method::Rks => {
            if args.model_out.is_some() {
                return Err(
                    "rks models have no dual representation and cannot be saved; \
                     drop --model-out or pick another method"
                        .into(),
                );
            }
            let (m, r) = dsekl::baselines::train_rks(
                &data,
                setup.spec.bandwidth_sigma,
                setup.config.expansion_size,
                &setup.config,
                val_ref,
            )
            .map_err(err)?;
            println!("method rks  n {}  iterations {}", data.len(), r.iterations);
            if let Some(v) = r.last_validation_error() {
                println!("validation_error {v}");
            }
            if let Some(ref v) = validation {
                let e = m.error_rate(v).map_err(err)?;
                println!("final_validation_error {e}");
            }
            if let Some(path) = &args.metrics_out {
                write_or_print(Some(path), &r.to_csv())?;
            }
            return Ok(());
        }
    };

    if let Some(m) = &model {
        println!(
            "method {}  n {}  support {}",
            setup.method,
            data.len(),
            m.support().len()
        );
        if let Some(path) = &args.model_out {
            save_model(m, path).map_err(err)?;
            println!("model written to {}", path.display());
        }
        if let Some(ref v) = validation {
            let e = m.error_rate(v).map_err(err)?;
            println!("final_validation_error {e}");
        }
    }
    match (&record, &args.metrics_out) {
        (Some(r), Some(path)) => {
            write_or_print(Some(path), &r.to_csv())?;
            println!("metrics written to {}", path.display());
        }
        (None, Some(_)) => {
            eprintln!("note: the batch method records no per-iteration metrics; skipping --metrics-out");
        }
        _ => {}
    }
    if let Some(r) = &record {
        println!(
            "iterations {}  final_epoch {:.2}  stopped_early {}",
            r.iterations, r.final_epoch, r.stopped_early
        );
    }
    Ok(())
}

fn cmd_predict(args: PredictArgs) -> Result<(), String> {
    let model = load_model(&args.model).map_err(|e| e.to_string())?;
    let data = load_data(&args.data)?;
    let preds = model.predict(&data).map_err(|e| e.to_string())?;
    let err = model.error_rate(&data).map_err(|e| e.to_string())?;
    println!("n {}  error_rate {}", data.len(), err);
    if let Some(path) = &args.out {
        let text: String = preds.iter().map(|p| format!("{p}\n")).collect();
        write_or_print(Some(path), &text)?;
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), String> {
    let base = build_setup(&args.overrides, args.config.as_ref())?;
    let data = match (&args.data, args.xor) {
        (Some(path), None) => SweepData::File(load_data(path)?),
        (None, Some(n)) => SweepData::Xor(n),
        (None, None) => return Err("give either --data or --xor".into()),
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    };
    let plan = SweepPlan {
        axis: args.axis,
        values: args.values,
        methods: args.methods,
        reps: args.reps,
        base,
    };
    let table = run_sweep(&plan, &data)?;
    write_or_print(args.out.as_ref(), &table.to_csv())
}

fn cmd_table1(args: Table1Args) -> Result<(), String> {
    let plan = Table1Plan {
        datasets: args.datasets,
        reps: args.reps,
        seed: args.seed,
        cv_epochs: args.cv_epochs,
        full_epochs: args.epochs,
    };
    let outcome = run_table1(&plan);
    for (name, reason) in &outcome.skipped {
        eprintln!("warning: skipped {name}: {reason}");
    }
    for r in &outcome.reports {
        println!(
            "{:<14} {:<8} {:.2} ± {:.2}",
            r.dataset, r.method, r.mean_error, r.std_error
        );
    }
    if let Some(path) = &args.out {
        let json = serde_json::to_string_pretty(&outcome.reports)
            .map_err(|e| format!("cannot serialize reports: {e}"))?;
        write_or_print(Some(path), &json)?;
    }
    if outcome.reports.is_empty() {
        return Err("no dataset could be processed".into());
    }
    Ok(())
}

fn cmd_covertype(args: CovertypeArgs) -> Result<(), String> {
    let data = load_data(&args.data)?;
    let plan = CovertypePlan {
        subsample: args.subsample,
        seed: args.seed,
        workers: args.workers,
        max_epochs: args.max_epochs,
        batch_comparison: args.batch_comparison,
    };
    let outcome = run_covertype(&data, &plan)?;
    println!(
        "train {}  block {}  lambda {:e}",
        outcome.train_size, outcome.block_size, outcome.lambda
    );
    println!(
        "validation_error epoch0 {:.4}  epoch1 {:.4}",
        outcome.epoch0_validation_error, outcome.epoch1_validation_error
    );
    println!("final_eval_error {:.4}", outcome.final_eval_error);
    if let Some(b) = outcome.batch_eval_error {
        println!("batch_eval_error {b:.4}");
    }
    println!(
        "epochs {:.2}  iterations {}  stopped_early {}",
        outcome.record.final_epoch, outcome.record.iterations, outcome.record.stopped_early
    );
    if let Some(path) = &args.record_out {
        write_or_print(Some(path), &outcome.record.to_csv())?;
    }
    Ok(())
}

fn cmd_speedup(args: SpeedupArgs) -> Result<(), String> {
    let data: Arc<Dataset> = match (&args.data, args.xor) {
        (Some(path), None) => load_data(path)?,
        (None, Some(n)) => Arc::new(generate_xor(n, &mut rng_from_seed(args.seed))),
        (None, None) => return Err("give either --data or --xor".into()),
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    };
    let table = run_speedup(
        &data,
        args.sigma,
        args.block,
        &args.workers,
        args.duplicate,
        args.seed,
    )?;
    write_or_print(args.out.as_ref(), &table.to_csv())
}

fn cmd_gridsearch(args: GridsearchArgs) -> Result<(), String> {
    let data = load_data(&args.data)?;
    let budget = TrainConfig {
        max_epochs: args.cv_epochs,
        ..TrainConfig::default()
    };
    let mut rng = rng_from_seed(args.seed);
    let (best, table) = grid_search(&data, &SearchSpace::default(), dsekl_trainer(budget), &mut rng)
        .map_err(|e| e.to_string())?;
    println!(
        "best lambda {:e}  sigma {:e}  eta0 {:e}  I {}  J {}  cv_error {}",
        best.lambda,
        best.sigma,
        best.eta0,
        best.grad_batch_size,
        best.expansion_size,
        table.min_error()
    );
    if let Some(path) = &args.out {
        write_or_print(Some(path), &table.to_csv())?;
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Table1(args) => cmd_table1(args),
        Command::Covertype(args) => cmd_covertype(args),
        Command::Speedup(args) => cmd_speedup(args),
        Command::Gridsearch(args) => cmd_gridsearch(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

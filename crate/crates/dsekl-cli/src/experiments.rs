//! Experiment protocols behind the CLI subcommands: sweeps over I or J,
//! the small-data benchmark table, the covertype-style large-data run, and
//! speedup measurement.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use dsekl::baselines::{train_batch_observed, train_fixed_subsample, train_rks, BatchConfig};
use dsekl::data::{read_libsvm_file, split, split_counts, standardize, subsample, Dataset};
use dsekl::kernel::KernelSpec;
use dsekl::model::{DecisionModel, DualModel};
use dsekl::model_selection::{dsekl_trainer, grid_search, GridPoint, SearchSpace};
use dsekl::optimizer::{train_serial, RunRecord, StepSchedule, TrainConfig};
use dsekl::parallel::{measure_speedup, train_parallel, SpeedupTable};
use dsekl::rng::{derive_seed, rng_from_seed};

use crate::config::{Method, Setup};
use crate::report::BenchmarkReport;

/// Resolves a dataset path: an existing path is used as given, otherwise
/// it is looked up under `$DSEKL_DATA_DIR`.
pub fn resolve_data_path(given: &Path) -> PathBuf {
    if given.exists() {
        return given.to_path_buf();
    }
    if let Ok(root) = std::env::var("DSEKL_DATA_DIR") {
        let candidate = Path::new(&root).join(given);
        if candidate.exists() {
            return candidate;
        }
    }
    given.to_path_buf()
}

pub fn load_data(path: &Path) -> Result<Arc<Dataset>, String> {
    let resolved = resolve_data_path(path);
    read_libsvm_file(&resolved)
        .map(Arc::new)
        .map_err(|e| format!("cannot load {}: {e}", resolved.display()))
}

/// Trains one method on `train` and returns its test error with the run
/// record when the method produces one.
pub fn train_and_eval(
    setup: &Setup,
    train: &Arc<Dataset>,
    test: &Dataset,
) -> Result<(f64, Option<RunRecord>), String> {
    let err = |e: dsekl::Error| e.to_string();
    match setup.method {
        Method::Dsekl => {
            let (model, record) = train_serial(train, &setup.spec, &setup.config, None).map_err(err)?;
            Ok((model.error_rate(test).map_err(err)?, Some(record)))
        }
        Method::Parallel => {
            let (model, record) =
                train_parallel(train, &setup.spec, &setup.config, None).map_err(err)?;
            Ok((model.error_rate(test).map_err(err)?, Some(record)))
        }
        Method::EmpFix => {
            let (model, record) = train_fixed_subsample(
                train,
                &setup.spec,
                &setup.config,
                setup.config.expansion_size,
                None,
            )
            .map_err(err)?;
            Ok((model.error_rate(test).map_err(err)?, Some(record)))
        }
        Method::Rks => {
            let sigma = setup.spec.bandwidth_sigma;
            let (model, record) = train_rks(
                train,
                sigma,
                setup.config.expansion_size,
                &setup.config,
                None,
            )
            .map_err(err)?;
            Ok((model.error_rate(test).map_err(err)?, Some(record)))
        }
        Method::Batch => {
            let model = train_batch_for(train, &setup.spec, &setup.config).map_err(err)?;
            Ok((model.error_rate(test).map_err(err)?, None))
        }
    }
}

/// Batch reference derived from a stochastic config: same lambda and
/// schedule, one full-batch iteration per configured epoch.
pub fn train_batch_for(
    train: &Arc<Dataset>,
    spec: &KernelSpec,
    config: &TrainConfig,
) -> dsekl::Result<DualModel> {
    let batch_config = BatchConfig {
        eta0: config.eta0,
        step_schedule: config.step_schedule,
        ..BatchConfig::new(config.lambda, config.max_epochs as u64)
    };
    train_batch_observed(train, spec, &batch_config, |_, _| {})
}

/// Which block-size parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    I,
    J,
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<SweepAxis, String> {
        match s {
            "I" | "i" => Ok(SweepAxis::I),
            "J" | "j" => Ok(SweepAxis::J),
            other => Err(format!("unknown sweep axis '{other}' (expected I or J)")),
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::I => "I",
            SweepAxis::J => "J",
        })
    }
}

/// Data source for sweeps: synthetic XOR regenerated per repetition, or a
/// fixed dataset split per repetition.
#[derive(Debug, Clone)]
pub enum SweepData {
    Xor(usize),
    File(Arc<Dataset>),
}

#[derive(Debug, Clone)]
pub struct SweepPlan {
    pub axis: SweepAxis,
    pub values: Vec<usize>,
    pub methods: Vec<Method>,
    pub reps: usize,
    pub base: Setup,
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub method: Method,
    /// `None` for the constant batch reference row.
    pub value: Option<usize>,
    pub errors: Vec<f64>,
    pub mean_error: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone)]
pub struct SweepTable {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::from("method,axis,value,mean_error,std_error\n");
        for r in &self.rows {
            let value = r.value.map(|v| v.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{}",
                r.method, self.axis, value, r.mean_error, r.std_error
            )
            .expect("string write");
        }
        out
    }

    pub fn row(&self, method: Method, value: Option<usize>) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.value == value)
    }
}

fn apply_axis(base: &Setup, axis: SweepAxis, value: usize) -> Setup {
    let mut setup = base.clone();
    match axis {
        SweepAxis::I => setup.config.grad_batch_size = value,
        SweepAxis::J => setup.config.expansion_size = value,
    }
    setup
}

/// Per-repetition train/test pairs; stream 1_000_000 + r keeps each
/// repetition's data independent of how many repetitions run.
fn sweep_splits(
    root: u64,
    reps: usize,
    data: &SweepData,
) -> Result<Vec<(Arc<Dataset>, Arc<Dataset>)>, String> {
    let mut splits = Vec::with_capacity(reps);
    for r in 0..reps {
        let mut rng = rng_from_seed(derive_seed(root, 1_000_000 + r as u64));
        let pair = match data {
            SweepData::Xor(n) => {
                let train = dsekl::data::generate_xor(*n, &mut rng);
                let test = dsekl::data::generate_xor(*n, &mut rng);
                (Arc::new(train), Arc::new(test))
            }
            SweepData::File(ds) => {
                let parts = split(ds, &[0.5, 0.5], &mut rng).map_err(|e| e.to_string())?;
                let mut it = parts.into_iter();
                (Arc::new(it.next().unwrap()), Arc::new(it.next().unwrap()))
            }
        };
        splits.push(pair);
    }
    Ok(splits)
}

/// Runs the sweep: every method at every axis value, `reps` repetitions
/// with fresh data and fresh training seeds per repetition. Batch has no
/// I or J dependence and appears as one constant reference row.
pub fn run_sweep(plan: &SweepPlan, data: &SweepData) -> Result<SweepTable, String> {
    if plan.values.is_empty() && plan.methods.iter().any(|m| *m != Method::Batch) {
        return Err("sweep needs at least one axis value".into());
    }
    if plan.reps == 0 {
        return Err("sweep needs at least one repetition".into());
    }
    let root = plan.base.config.seed;
    let splits = sweep_splits(root, plan.reps, data)?;

    let mut rows = Vec::new();
    for (mi, &method) in plan.methods.iter().enumerate() {
        if method == Method::Batch {
            let mut errors = Vec::with_capacity(plan.reps);
            for (train, test) in &splits {
                let setup = plan.base.clone();
                let setup = Setup {
                    method: Method::Batch,
                    ..setup
                };
                let (e, _) = train_and_eval(&setup, train, test)?;
                errors.push(e);
            }
            rows.push(SweepRow {
                method,
                value: None,
                mean_error: crate::report::mean(&errors),
                std_error: crate::report::std_dev(&errors),
                errors,
            });
            continue;
        }
        for (vi, &value) in plan.values.iter().enumerate() {
            let mut errors = Vec::with_capacity(plan.reps);
            for (r, (train, test)) in splits.iter().enumerate() {
                let mut setup = apply_axis(&plan.base, plan.axis, value);
                setup.method = method;
                setup.config.seed =
                    derive_seed(root, ((mi as u64) << 40) | ((vi as u64) << 20) | r as u64);
                let (e, _) = train_and_eval(&setup, train, test)?;
                errors.push(e);
            }
            rows.push(SweepRow {
                method,
                value: Some(value),
                mean_error: crate::report::mean(&errors),
                std_error: crate::report::std_dev(&errors),
                errors,
            });
        }
    }
    Ok(SweepTable {
        axis: plan.axis,
        rows,
    })
}

/// Small-data benchmark protocol settings.
#[derive(Debug, Clone)]
pub struct Table1Plan {
    pub datasets: Vec<String>,
    pub reps: usize,
    pub seed: u64,
    /// Epoch budget for each CV training during grid search.
    pub cv_epochs: usize,
    /// Epoch budget for the final per-repetition training runs.
    pub full_epochs: usize,
}

impl Default for Table1Plan {
    fn default() -> Table1Plan {
        Table1Plan {
            datasets: vec![
                "diabetes".into(),
                "breast-cancer".into(),
                "sonar".into(),
            ],
            reps: 10,
            seed: 0,
            cv_epochs: 20,
            full_epochs: 100,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Table1Outcome {
    pub reports: Vec<BenchmarkReport>,
    /// Datasets that could not be processed, with the reason.
    pub skipped: Vec<(String, String)>,
}

fn dataset_file(name: &str) -> PathBuf {
    let p = Path::new(name);
    if p.extension().is_some() {
        resolve_data_path(p)
    } else {
        resolve_data_path(Path::new(&format!("{name}.svm")))
    }
}

fn config_snapshot(point: &GridPoint, extra: &[(&str, String)]) -> BTreeMap<String, String> {
    let mut map = BTreeMap::new();
    map.insert("lambda".into(), format!("{}", point.lambda));
    map.insert("sigma".into(), format!("{}", point.sigma));
    map.insert("eta0".into(), format!("{}", point.eta0));
    map.insert("i".into(), point.grad_batch_size.to_string());
    map.insert("j".into(), point.expansion_size.to_string());
    for (k, v) in extra {
        map.insert((*k).into(), v.clone());
    }
    map
}

/// Benchmark protocol for one dataset: subsample min(1000, N), split half
/// train / half test, tune hyperparameters by grid search on the first
/// repetition's training half, then run `reps` repetitions of DSEKL and
/// the batch reference on fresh subsamples and splits.
pub fn run_table1_dataset(
    name: &str,
    full: &Arc<Dataset>,
    plan: &Table1Plan,
) -> Result<(BenchmarkReport, BenchmarkReport), String> {
    let root = derive_seed(plan.seed, fnv_hash(name));
    let take = full.len().min(1000);
    let prepare = |r: u64| -> Result<(Arc<Dataset>, Arc<Dataset>), String> {
        let mut rng = rng_from_seed(derive_seed(root, r));
        let sub = subsample(full, take, &mut rng);
        let parts = split(&sub, &[0.5, 0.5], &mut rng).map_err(|e| e.to_string())?;
        let (scaled, _) =
            standardize(&parts[0], &[&parts[1]]).map_err(|e| e.to_string())?;
        let mut it = scaled.into_iter();
        Ok((Arc::new(it.next().unwrap()), Arc::new(it.next().unwrap())))
    };

    // hyperparameter selection on the first repetition's training half
    let (tune_train, _) = prepare(0)?;
    let cv_budget = TrainConfig {
        max_epochs: plan.cv_epochs,
        ..TrainConfig::default()
    };
    let mut cv_rng = rng_from_seed(derive_seed(root, 777));
    let (point, _) = grid_search(
        &tune_train,
        &SearchSpace::default(),
        dsekl_trainer(cv_budget),
        &mut cv_rng,
    )
    .map_err(|e| e.to_string())?;
    log::info!(
        "{name}: tuned lambda {:e}, sigma {:e}, eta0 {:e}",
        point.lambda,
        point.sigma,
        point.eta0
    );

    let spec = KernelSpec::rbf(point.sigma).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let mut dsekl_errors = Vec::with_capacity(plan.reps);
    let mut batch_errors = Vec::with_capacity(plan.reps);
    for r in 0..plan.reps {
        let (train, test) = prepare(r as u64)?;
        let config = TrainConfig {
            lambda: point.lambda,
            eta0: point.eta0,
            grad_batch_size: point.grad_batch_size,
            expansion_size: point.expansion_size,
            max_epochs: plan.full_epochs,
            seed: derive_seed(root, 10_000 + r as u64),
            ..TrainConfig::default()
        };
        let (model, _) =
            train_serial(&train, &spec, &config, None).map_err(|e| e.to_string())?;
        dsekl_errors.push(model.error_rate(&test).map_err(|e| e.to_string())?);

        // reference solver: tuned lambda/sigma, step size at the strongly
        // convex rate, generous iteration budget
        let batch_config = BatchConfig {
            eta0: (1.0 / (2.0 * point.lambda)).clamp(1e-4, 1e3),
            ..BatchConfig::new(point.lambda, 2_000)
        };
        let batch_model =
            train_batch_observed(&train, &spec, &batch_config, |_, _| {}).map_err(|e| e.to_string())?;
        batch_errors.push(batch_model.error_rate(&test).map_err(|e| e.to_string())?);
    }
    let wall = start.elapsed().as_secs_f64();
    let snapshot = config_snapshot(
        &point,
        &[
            ("subsample", take.to_string()),
            ("epochs", plan.full_epochs.to_string()),
        ],
    );
    Ok((
        BenchmarkReport::new("dsekl", name, snapshot.clone(), dsekl_errors, wall),
        BenchmarkReport::new("batch", name, snapshot, batch_errors, wall),
    ))
}

/// Runs the benchmark table over all requested datasets; missing files are
/// skipped with a warning so one absent dataset does not sink the rest.
pub fn run_table1(plan: &Table1Plan) -> Table1Outcome {
    let mut outcome = Table1Outcome {
        reports: Vec::new(),
        skipped: Vec::new(),
    };
    for name in &plan.datasets {
        let path = dataset_file(name);
        let full = match read_libsvm_file(&path) {
            Ok(d) => Arc::new(d),
            Err(e) => {
                let reason = format!("{}: {e}", path.display());
                log::warn!("skipping {name}: {reason}");
                outcome.skipped.push((name.clone(), reason));
                continue;
            }
        };
        match run_table1_dataset(name, &full, plan) {
            Ok((dsekl, batch)) => {
                outcome.reports.push(dsekl);
                outcome.reports.push(batch);
            }
            Err(reason) => {
                log::warn!("skipping {name}: {reason}");
                outcome.skipped.push((name.clone(), reason));
            }
        }
    }
    outcome
}

/// Covertype-style protocol settings.
#[derive(Debug, Clone)]
pub struct CovertypePlan {
    /// Desk-scale subsample size; `None` runs the full dataset.
    pub subsample: Option<usize>,
    pub seed: u64,
    pub workers: usize,
    /// Safety valve; the protocol's own stop rule normally fires first.
    pub max_epochs: usize,
    /// Also train the batch reference on a 5000-point sub-subsample of the
    /// training split and evaluate it on the shared evaluation split.
    pub batch_comparison: bool,
}

#[derive(Debug, Clone)]
pub struct CovertypeOutcome {
    pub record: RunRecord,
    pub train_size: usize,
    pub block_size: usize,
    pub lambda: f64,
    pub epoch0_validation_error: f64,
    pub epoch1_validation_error: f64,
    pub final_eval_error: f64,
    pub batch_eval_error: Option<f64>,
}

/// Reference sizes of the full-scale protocol; subsampled runs scale the
/// expansion/gradient block proportionally and shrink the holdouts.
const COVERTYPE_N: usize = 581_012;
const COVERTYPE_BLOCK: usize = 10_000;
const VALIDATION_HOLDOUT: usize = 1_122;
const EVALUATION_HOLDOUT: usize = 20_000;

pub fn run_covertype(
    data: &Arc<Dataset>,
    plan: &CovertypePlan,
) -> Result<CovertypeOutcome, String> {
    let working = match plan.subsample {
        Some(m) => {
            let mut rng = rng_from_seed(derive_seed(plan.seed, 0));
            Arc::new(subsample(data, m, &mut rng))
        }
        None => Arc::clone(data),
    };
    let m = working.len();
    let val_n = VALIDATION_HOLDOUT.min(m / 10);
    let eval_n = EVALUATION_HOLDOUT.min(m / 5);
    if m <= val_n + eval_n {
        return Err(format!("{m} rows are too few for the holdout protocol"));
    }
    let train_n = m - val_n - eval_n;
    let mut rng = rng_from_seed(derive_seed(plan.seed, 1));
    let parts = split_counts(&working, &[train_n, val_n, eval_n], &mut rng)
        .map_err(|e| e.to_string())?;
    let (scaled, _) =
        standardize(&parts[0], &[&parts[1], &parts[2]]).map_err(|e| e.to_string())?;
    let mut it = scaled.into_iter();
    let train = Arc::new(it.next().unwrap());
    let validation = it.next().unwrap();
    let evaluation = it.next().unwrap();

    let block = ((COVERTYPE_BLOCK as f64 * m as f64 / COVERTYPE_N as f64).round() as usize)
        .clamp(1, train_n);
    let lambda = 1.0 / train_n as f64;
    let config = TrainConfig {
        grad_batch_size: block,
        expansion_size: block,
        lambda,
        step_schedule: StepSchedule::InverseEpoch,
        eta0: 1.0,
        max_epochs: plan.max_epochs,
        stop_weight_delta: 1.0,
        seed: derive_seed(plan.seed, 2),
        workers: plan.workers,
        ..TrainConfig::default()
    };
    let spec = KernelSpec::rbf(1.0).expect("static bandwidth");
    let (model, record) = if plan.workers > 1 {
        train_parallel(&train, &spec, &config, Some(&validation)).map_err(|e| e.to_string())?
    } else {
        train_serial(&train, &spec, &config, Some(&validation)).map_err(|e| e.to_string())?
    };

    let epoch0 = record.checkpoints[0]
        .validation_error
        .ok_or("missing initial validation error")?;
    let epoch1 = record
        .checkpoints
        .iter()
        .find(|c| c.is_epoch_end)
        .and_then(|c| c.validation_error)
        .ok_or("missing epoch-1 validation error")?;
    let final_eval_error = model.error_rate(&evaluation).map_err(|e| e.to_string())?;

    let batch_eval_error = if plan.batch_comparison {
        let mut rng = rng_from_seed(derive_seed(plan.seed, 3));
        let sub = Arc::new(subsample(&train, 5_000, &mut rng));
        let batch_lambda = 1.0 / sub.len() as f64;
        let batch_config = BatchConfig {
            eta0: (1.0 / (2.0 * batch_lambda)).clamp(1e-4, 1e3),
            ..BatchConfig::new(batch_lambda, 300)
        };
        let batch_model = train_batch_observed(&sub, &spec, &batch_config, |_, _| {})
            .map_err(|e| e.to_string())?;
        Some(batch_model.error_rate(&evaluation).map_err(|e| e.to_string())?)
    } else {
        None
    };

    Ok(CovertypeOutcome {
        record,
        train_size: train_n,
        block_size: block,
        lambda,
        epoch0_validation_error: epoch0,
        epoch1_validation_error: epoch1,
        final_eval_error,
        batch_eval_error,
    })
}

/// Speedup measurement over a worker-count list; `duplicate` doubles the
/// dataset to lengthen the workload as in the original protocol.
pub fn run_speedup(
    data: &Arc<Dataset>,
    sigma: f64,
    block: usize,
    worker_counts: &[usize],
    duplicate: bool,
    seed: u64,
) -> Result<SpeedupTable, String> {
    let working = if duplicate {
        Arc::new(data.concat(data).map_err(|e| e.to_string())?)
    } else {
        Arc::clone(data)
    };
    let spec = KernelSpec::rbf(sigma).map_err(|e| e.to_string())?;
    let config = TrainConfig {
        grad_batch_size: block,
        expansion_size: block,
        seed,
        ..TrainConfig::default()
    };
    measure_speedup(&working, &spec, &config, worker_counts).map_err(|e| e.to_string())
}

/// FNV-1a, used to fold dataset names into seed streams.
fn fnv_hash(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x1000_0000_01b3);
    }
    h
}

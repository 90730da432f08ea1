//! Experiment configuration with flat key=value files.
//!
//! Precedence is CLI flags, then config file, then built-in defaults. The
//! file format is one `key = value` pair per line with `#` comments, strict
//! about unknown keys so typos fail loudly instead of silently using a
//! default.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use dsekl::kernel::KernelSpec;
use dsekl::optimizer::{StepSchedule, TrainConfig};

/// Training algorithm selector shared by all commands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Serial doubly stochastic trainer.
    Dsekl,
    /// Shared-memory parallel trainer with dampening.
    Parallel,
    /// Full-Gram batch reference.
    Batch,
    /// Random kitchen sinks baseline.
    Rks,
    /// Fixed expansion subsample baseline.
    EmpFix,
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Method, String> {
        match s {
            "dsekl" => Ok(Method::Dsekl),
            "parallel" => Ok(Method::Parallel),
            "batch" => Ok(Method::Batch),
            "rks" => Ok(Method::Rks),
            "empfix" => Ok(Method::EmpFix),
            other => Err(format!(
                "unknown method '{other}' (expected dsekl, parallel, batch, rks, or empfix)"
            )),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Method::Dsekl => "dsekl",
            Method::Parallel => "parallel",
            Method::Batch => "batch",
            Method::Rks => "rks",
            Method::EmpFix => "empfix",
        };
        f.write_str(name)
    }
}

/// Partially specified experiment settings; `None` means "not given at
/// this layer".
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub method: Option<Method>,
    pub sigma: Option<f64>,
    pub lambda: Option<f64>,
    pub eta0: Option<f64>,
    pub schedule: Option<StepSchedule>,
    pub grad_batch: Option<usize>,
    pub expansion: Option<usize>,
    pub epochs: Option<usize>,
    pub stop_delta: Option<f64>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub dampening: Option<bool>,
    pub fixed_blocks: Option<bool>,
}

impl Overrides {
    /// Layers `self` over `lower`; values present in `self` win.
    pub fn over(self, lower: Overrides) -> Overrides {
        Overrides {
            method: self.method.or(lower.method),
            sigma: self.sigma.or(lower.sigma),
            lambda: self.lambda.or(lower.lambda),
            eta0: self.eta0.or(lower.eta0),
            schedule: self.schedule.or(lower.schedule),
            grad_batch: self.grad_batch.or(lower.grad_batch),
            expansion: self.expansion.or(lower.expansion),
            epochs: self.epochs.or(lower.epochs),
            stop_delta: self.stop_delta.or(lower.stop_delta),
            seed: self.seed.or(lower.seed),
            workers: self.workers.or(lower.workers),
            dampening: self.dampening.or(lower.dampening),
            fixed_blocks: self.fixed_blocks.or(lower.fixed_blocks),
        }
    }

    /// Fills the gaps with defaults and produces the concrete settings.
    pub fn resolve(&self) -> Result<Setup, String> {
        let defaults = TrainConfig::default();
        let sigma = self.sigma.unwrap_or(1.0);
        let spec = KernelSpec::rbf(sigma).map_err(|e| e.to_string())?;
        let config = TrainConfig {
            grad_batch_size: self.grad_batch.unwrap_or(defaults.grad_batch_size),
            expansion_size: self.expansion.unwrap_or(defaults.expansion_size),
            lambda: self.lambda.unwrap_or(defaults.lambda),
            step_schedule: self.schedule.unwrap_or(defaults.step_schedule),
            eta0: self.eta0.unwrap_or(defaults.eta0),
            max_epochs: self.epochs.unwrap_or(defaults.max_epochs),
            stop_weight_delta: self.stop_delta.unwrap_or(defaults.stop_weight_delta),
            seed: self.seed.unwrap_or(defaults.seed),
            workers: self.workers.unwrap_or(defaults.workers),
            dampening: self.dampening.unwrap_or(defaults.dampening),
            fixed_blocks: self.fixed_blocks.unwrap_or(defaults.fixed_blocks),
        };
        config.validate().map_err(|e| e.to_string())?;
        Ok(Setup {
            method: self.method.unwrap_or(Method::Dsekl),
            spec,
            config,
        })
    }
}

/// Fully resolved experiment settings.
#[derive(Debug, Clone)]
pub struct Setup {
    pub method: Method,
    pub spec: KernelSpec,
    pub config: TrainConfig,
}

fn parse_schedule(s: &str) -> Result<StepSchedule, String> {
    match s {
        "iter" => Ok(StepSchedule::InverseIter),
        "epoch" => Ok(StepSchedule::InverseEpoch),
        other => Err(format!("unknown schedule '{other}' (expected iter or epoch)")),
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str, line: usize) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| format!("line {line}: bad value for {key}: {e}"))
}

/// Parses the flat key=value config format.
pub fn parse_config(text: &str) -> Result<Overrides, String> {
    let mut out = Overrides::default();
    let mut seen = BTreeSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {line_no}: expected key = value, got '{line}'"))?;
        let key = key.trim();
        let value = value.trim();
        if value.is_empty() {
            return Err(format!("line {line_no}: empty value for {key}"));
        }
        if !seen.insert(key.to_string()) {
            return Err(format!("line {line_no}: duplicate key {key}"));
        }
        match key {
            "method" => out.method = Some(value.parse()?),
            "sigma" => out.sigma = Some(parse_value(key, value, line_no)?),
            "lambda" => out.lambda = Some(parse_value(key, value, line_no)?),
            "eta0" => out.eta0 = Some(parse_value(key, value, line_no)?),
            "schedule" => out.schedule = Some(parse_schedule(value)?),
            "i" => out.grad_batch = Some(parse_value(key, value, line_no)?),
            "j" => out.expansion = Some(parse_value(key, value, line_no)?),
            "epochs" => out.epochs = Some(parse_value(key, value, line_no)?),
            "stop_delta" => out.stop_delta = Some(parse_value(key, value, line_no)?),
            "seed" => out.seed = Some(parse_value(key, value, line_no)?),
            "workers" => out.workers = Some(parse_value(key, value, line_no)?),
            "dampening" => out.dampening = Some(parse_value(key, value, line_no)?),
            "fixed_blocks" => out.fixed_blocks = Some(parse_value(key, value, line_no)?),
            other => return Err(format!("line {line_no}: unknown key '{other}'")),
        }
    }
    Ok(out)
}

/// Reads and parses a config file.
pub fn read_config(path: &Path) -> Result<Overrides, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    parse_config(&text).map_err(|e| format!("{}: {e}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_config() {
        let text = "\
# experiment manifest
method = parallel
sigma = 2.5
lambda = 1e-3
eta0 = 0.5
schedule = epoch
i = 100
j = 40   # expansion
epochs = 7
stop_delta = 0.25
seed = 42
workers = 4
dampening = true
fixed_blocks = false
";
        let o = parse_config(text).unwrap();
        assert_eq!(o.method, Some(Method::Parallel));
        assert_eq!(o.sigma, Some(2.5));
        assert_eq!(o.lambda, Some(1e-3));
        assert_eq!(o.schedule, Some(StepSchedule::InverseEpoch));
        assert_eq!(o.grad_batch, Some(100));
        assert_eq!(o.expansion, Some(40));
        assert_eq!(o.epochs, Some(7));
        assert_eq!(o.stop_delta, Some(0.25));
        assert_eq!(o.seed, Some(42));
        assert_eq!(o.workers, Some(4));
        assert_eq!(o.dampening, Some(true));
        assert_eq!(o.fixed_blocks, Some(false));
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        let err = parse_config("lambada = 1.0").unwrap_err();
        assert!(err.contains("unknown key"), "{err}");
        let err = parse_config("seed = 1\nseed = 2").unwrap_err();
        assert!(err.contains("duplicate"), "{err}");
        let err = parse_config("just some words").unwrap_err();
        assert!(err.contains("key = value"), "{err}");
    }

    #[test]
    fn cli_layer_beats_file_layer() {
        let file = parse_config("lambda = 0.5\nseed = 9").unwrap();
        let cli = Overrides {
            lambda: Some(0.001),
            ..Overrides::default()
        };
        let merged = cli.over(file);
        assert_eq!(merged.lambda, Some(0.001));
        assert_eq!(merged.seed, Some(9));
        let setup = merged.resolve().unwrap();
        assert_eq!(setup.config.lambda, 0.001);
        assert_eq!(setup.config.seed, 9);
        assert_eq!(setup.config.grad_batch_size, TrainConfig::default().grad_batch_size);
    }

    #[test]
    fn resolve_validates_the_merged_config() {
        let bad = Overrides {
            lambda: Some(-1.0),
            ..Overrides::default()
        };
        assert!(bad.resolve().is_err());
        let bad_sigma = Overrides {
            sigma: Some(0.0),
            ..Overrides::default()
        };
        assert!(bad_sigma.resolve().is_err());
    }
}

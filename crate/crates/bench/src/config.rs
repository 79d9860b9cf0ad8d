//! Experiment configuration: CLI flags layered over an optional flat TOML file.

use serde::{Deserialize, Serialize};

use qentropy::dist::LowerBoundKind;
use qentropy::encodings::OracleKind;
use qentropy::estimator::Mode;

use crate::input::InputSource;
use crate::HarnessError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Estimate,
    Additive,
    ThresholdTest,
    Sweep,
    LowerBoundDemo,
    Baseline,
}

/// Keys of the config file; every key is optional and mirrors a flag.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub input: Option<String>,
    pub gen: Option<String>,
    pub gamma: Option<f64>,
    pub eps: Option<f64>,
    pub eta: Option<f64>,
    pub mode: Option<String>,
    pub seeds: Option<String>,
    pub trials: Option<usize>,
    pub out: Option<String>,
    pub h1: Option<f64>,
    pub h2: Option<f64>,
    pub n_list: Option<String>,
    pub encoding: Option<String>,
    pub exclude: Option<usize>,
    pub kind: Option<String>,
    pub n: Option<usize>,
    pub param: Option<f64>,
}

impl FileConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Validation(format!("config: {e}")))
    }

    /// Fields set in `over` win.
    pub fn overlay(self, over: FileConfig) -> FileConfig {
        macro_rules! pick {
            ($($f:ident),*) => { FileConfig { $($f: over.$f.or(self.$f)),* } };
        }
        pick!(input, gen, gamma, eps, eta, mode, seeds, trials, out, h1, h2, n_list, encoding, exclude, kind, n, param)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub task: Task,
    pub input: Option<InputSource>,
    pub gamma: f64,
    pub eps: f64,
    pub eta: Option<f64>,
    pub mode: Mode,
    pub seeds: Vec<u64>,
    pub trials: usize,
    pub out: Option<String>,
    pub h1: Option<f64>,
    pub h2: Option<f64>,
    pub n_list: Vec<usize>,
    pub encoding: OracleKind,
    /// Number of smallest sizes left out of the scaling fit.
    pub exclude: usize,
    pub lower_bound_kind: Option<LowerBoundKind>,
    pub n: Option<usize>,
    pub param: Option<f64>,
}

pub const DEFAULT_GAMMA: f64 = 2.0;
pub const DEFAULT_EPS: f64 = 0.1;
pub const DEFAULT_EXCLUDE: usize = 2;

fn parse_seeds(s: &str) -> Result<Vec<u64>, HarnessError> {
    let bad = || HarnessError::Validation(format!("seeds {s:?}: expected a..b or a comma list"));
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        if a >= b {
            return Err(bad());
        }
        return Ok((a..b).collect());
    }
    s.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect()
}

fn parse_n_list(s: &str) -> Result<Vec<usize>, HarnessError> {
    let bad = || HarnessError::Validation(format!("n_list {s:?}: expected a comma list or 2^a..2^b"));
    if let Some((a, b)) = s.split_once("..") {
        let exp = |t: &str| t.trim().strip_prefix("2^").and_then(|e| e.parse::<u32>().ok());
        let (a, b) = (exp(a).ok_or_else(bad)?, exp(b).ok_or_else(bad)?);
        return Ok((a..=b).map(|e| 1usize << e).collect());
    }
    s.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect()
}

impl ExperimentConfig {
    pub fn resolve(task: Task, f: FileConfig) -> Result<Self, HarnessError> {
        let input = match (f.input, f.gen) {
            (Some(_), Some(_)) => return Err(HarnessError::Validation("give either input or gen, not both".into())),
            (Some(p), None) => {
                if !std::path::Path::new(&p).exists() {
                    return Err(HarnessError::Validation(format!("input file {p} does not exist")));
                }
                Some(InputSource::File(p))
            }
            (None, Some(g)) => Some(InputSource::Gen(g)),
            (None, None) => None,
        };
        let needs_input = matches!(task, Task::Estimate | Task::Additive | Task::ThresholdTest | Task::Baseline);
        if needs_input && input.is_none() {
            return Err(HarnessError::Validation("this task needs --input or --gen".into()));
        }
        let mode = match f.mode.as_deref() {
            Some(m) => m.parse()?,
            None => Mode::Exact,
        };
        let trials = f.trials.unwrap_or(1);
        if trials == 0 {
            return Err(HarnessError::Validation("trials must be at least 1".into()));
        }
        let encoding = match f.encoding.as_deref() {
            None | Some("classical") => OracleKind::Classical,
            Some("quantum") => OracleKind::Quantum,
            Some(other) => return Err(HarnessError::Validation(format!("unknown encoding {other:?}"))),
        };
        let n_list = match f.n_list.as_deref() {
            Some(s) => parse_n_list(s)?,
            None => (6..=14).map(|e| 1usize << e).collect(),
        };
        let lower_bound_kind = f.kind.as_deref().map(str::parse).transpose()?;
        if task == Task::LowerBoundDemo && (lower_bound_kind.is_none() || f.n.is_none() || f.param.is_none()) {
            return Err(HarnessError::Validation("lowerbound needs --kind, --n and --param".into()));
        }
        if task == Task::ThresholdTest && (f.h1.is_none() || f.h2.is_none()) {
            return Err(HarnessError::Validation("threshold needs --h1 and --h2".into()));
        }
        Ok(ExperimentConfig {
            task,
            input,
            gamma: f.gamma.unwrap_or(DEFAULT_GAMMA),
            eps: f.eps.unwrap_or(DEFAULT_EPS),
            eta: f.eta,
            mode,
            seeds: match f.seeds.as_deref() {
                Some(s) => parse_seeds(s)?,
                None => vec![0],
            },
            trials,
            out: f.out,
            h1: f.h1,
            h2: f.h2,
            n_list,
            encoding,
            exclude: f.exclude.unwrap_or(DEFAULT_EXCLUDE),
            lower_bound_kind,
            n: f.n,
            param: f.param,
        })
    }
}

//! Run configuration: the validated, serializable form of a command line.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::ValueEnum;
use freeatoms::{Extrapolation, LadderOptions, OracleOptions};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Convolve,
    AtomScan,
    Decompose,
    Linearize,
    Eigtest,
    Oracle,
    Compare,
}

impl fmt::Display for CommandKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
        f.write_str(&s)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExtrapolationArg {
    Linear,
    SqrtLinear,
    #[default]
    Auto,
}

impl From<ExtrapolationArg> for Extrapolation {
    fn from(e: ExtrapolationArg) -> Self {
        match e {
            ExtrapolationArg::Linear => Extrapolation::Linear,
            ExtrapolationArg::SqrtLinear => Extrapolation::SqrtLinear,
            ExtrapolationArg::Auto => Extrapolation::Auto,
        }
    }
}

/// Evaluation grid written `min:max:points`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.min];
        }
        let step = (self.max - self.min) / (self.points - 1) as f64;
        (0..self.points).map(|k| self.min + step * k as f64).collect()
    }
}

impl FromStr for Grid {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("expected min:max:points, got {s:?}"));
        }
        let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
        let points = parts[2].trim().parse::<usize>().map_err(|e| format!("{:?}: {e}", parts[2]))?;
        Ok(Grid { min: num(parts[0])?, max: num(parts[1])?, points })
    }
}

/// Input files named on the command line.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Inputs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu1: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu2: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub locations: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: CommandKind,
    /// Subordination solver tolerance.
    pub tol: f64,
    /// Top of the boundary ladder.
    pub y0: f64,
    pub ladder_depth: usize,
    pub extrapolation: ExtrapolationArg,
    pub grid: Option<Grid>,
    /// Height above the real axis at which densities are read off.
    pub y_eval: f64,
    pub seed: u64,
    #[serde(rename = "N")]
    pub matrix_size: usize,
    pub trials: usize,
    pub bins: usize,
    pub epsilon: f64,
    pub poly: Option<String>,
    pub lambdas: Vec<f64>,
    /// Scalar locations `b = x·1`.
    pub at: Vec<f64>,
    pub check_trials: usize,
    pub check_dim: usize,
    pub inputs: Inputs,
    pub output: Option<PathBuf>,
    pub format: OutputFormat,
    pub strict: bool,
    pub workers: usize,
}

impl RunConfig {
    pub fn new(command: CommandKind) -> Self {
        let ladder = LadderOptions::default();
        let oracle = OracleOptions::default();
        RunConfig {
            command,
            tol: ladder.tol,
            y0: ladder.y0,
            ladder_depth: ladder.rungs,
            extrapolation: ExtrapolationArg::Auto,
            grid: None,
            y_eval: 1e-4,
            seed: 0,
            matrix_size: 2000,
            trials: 8,
            bins: oracle.bins,
            epsilon: oracle.epsilon,
            poly: None,
            lambdas: Vec::new(),
            at: Vec::new(),
            check_trials: 100,
            check_dim: 3,
            inputs: Inputs::default(),
            output: None,
            format: OutputFormat::Json,
            strict: false,
            workers: 0,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Schema(msg));
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if !(4..=40).contains(&self.ladder_depth) {
            return bad(format!("ladder depth must lie in [4, 40], got {}", self.ladder_depth));
        }
        if !(self.y0 > 0.0 && self.y0.is_finite()) {
            return bad(format!("y0 must be positive, got {}", self.y0));
        }
        if !(self.y_eval > 0.0 && self.y_eval.is_finite()) {
            return bad(format!("evaluation height must be positive, got {}", self.y_eval));
        }
        if let Some(g) = &self.grid {
            if !(g.min < g.max) || g.points < 2 {
                return bad(format!("grid needs min < max and at least 2 points, got {}:{}:{}", g.min, g.max, g.points));
            }
        }
        if matches!(self.command, CommandKind::Oracle | CommandKind::Compare) {
            if self.matrix_size < 2 || self.trials < 1 {
                return bad(format!("oracle needs N >= 2 and trials >= 1, got N = {}, trials = {}", self.matrix_size, self.trials));
            }
            if !(self.epsilon > 0.0) {
                return bad(format!("epsilon must be positive, got {}", self.epsilon));
            }
        }
        if self.command == CommandKind::Linearize && self.check_trials > 0 && self.check_dim == 0 {
            return bad("equivalence check dimension must be positive".into());
        }
        Ok(())
    }

    pub fn ladder(&self) -> LadderOptions {
        LadderOptions {
            y0: self.y0,
            rungs: self.ladder_depth,
            tol: self.tol,
            extrapolation: self.extrapolation.into(),
            ..LadderOptions::default()
        }
    }

    pub fn oracle(&self) -> OracleOptions {
        OracleOptions { bins: self.bins, epsilon: self.epsilon, ..OracleOptions::default() }
    }
}

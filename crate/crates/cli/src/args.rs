//! Command-line syntax, resolved into a [`RunConfig`].

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{CommandKind, ExtrapolationArg, Grid, OutputFormat, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "freeatoms", version, about = "Atoms and densities of free convolutions and polynomials in free variables")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Subordination solver tolerance.
    #[arg(long, global = true, env = "FREEATOMS_TOL")]
    pub tol: Option<f64>,
    /// Largest height of the boundary ladder.
    #[arg(long, global = true)]
    pub y0: Option<f64>,
    /// Number of ladder heights, halving from y0.
    #[arg(long, global = true)]
    pub ladder_depth: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub extrapolation: Option<ExtrapolationArg>,
    /// Seed for every random draw.
    #[arg(long, global = true, env = "FREEATOMS_SEED")]
    pub seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<OutputFormat>,
    /// Exit with status 4 when any invariant check fails.
    #[arg(long, global = true)]
    pub strict: bool,
    /// Worker threads for parallel sections; 0 uses every core.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args, Default)]
pub struct ModelArgs {
    /// Measure of the first variable (JSON).
    #[arg(long)]
    pub mu1: Option<PathBuf>,
    /// Measure of the second variable (JSON).
    #[arg(long)]
    pub mu2: Option<PathBuf>,
    /// Matrix-coefficient model (JSON), instead of --mu1/--mu2.
    #[arg(long, conflicts_with_all = ["mu1", "mu2"])]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EnsembleArgs {
    /// Random matrix size.
    #[arg(short = 'N', long = "matrix-size", default_value_t = 2000)]
    pub matrix_size: usize,
    #[arg(long, default_value_t = 8)]
    pub trials: usize,
    /// Window half-width for kernel masses, relative to 1 + the matrix norm.
    #[arg(long, default_value_t = 1e-10)]
    pub epsilon: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Density of X1 + X2 (or a1⊗X1 + a2⊗X2) on a grid.
    #[command(allow_negative_numbers = true)]
    Convolve {
        #[command(flatten)]
        model: ModelArgs,
        /// min:max:points
        #[arg(long, allow_hyphen_values = true)]
        grid: Grid,
        /// Height above the axis at which the density is read.
        #[arg(long, default_value_t = 1e-4)]
        y: f64,
    },
    /// Atom masses at candidate locations.
    #[command(allow_negative_numbers = true)]
    AtomScan {
        #[command(flatten)]
        model: ModelArgs,
        /// Scalar locations, comma separated.
        #[arg(long, value_delimiter = ',')]
        at: Vec<f64>,
        /// JSON file with a location matrix or a list of them.
        #[arg(long)]
        locations: Option<PathBuf>,
    },
    /// Mass and full decomposition at one location.
    #[command(allow_negative_numbers = true)]
    Decompose {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        at: Option<f64>,
        #[arg(long, conflicts_with = "at")]
        location: Option<PathBuf>,
    },
    /// Selfadjoint linear pencil of a polynomial, with its certificate.
    Linearize {
        #[arg(long)]
        poly: String,
        /// Random invertibility-equivalence trials; 0 skips the check.
        #[arg(long, default_value_t = 100)]
        check_trials: usize,
        #[arg(long, default_value_t = 3)]
        check_dim: usize,
    },
    /// Mass of the eigenvalue λ of P(X1, X2).
    #[command(allow_negative_numbers = true)]
    Eigtest {
        #[arg(long)]
        poly: String,
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        mu1: PathBuf,
        #[arg(long)]
        mu2: PathBuf,
    },
    /// Random-matrix estimate of spectra and masses.
    #[command(allow_negative_numbers = true)]
    Oracle {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, conflicts_with = "model")]
        poly: Option<String>,
        #[arg(long, value_delimiter = ',')]
        lambda: Vec<f64>,
        #[arg(long, conflicts_with = "poly")]
        at: Option<f64>,
        #[command(flatten)]
        ensemble: EnsembleArgs,
        /// Histogram bins; 0 counts masses by inertia only.
        #[arg(long, default_value_t = 200)]
        bins: usize,
    },
    /// Pipeline masses against the oracle, as a discrepancy table.
    #[command(allow_negative_numbers = true)]
    Compare {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, conflicts_with = "model")]
        poly: Option<String>,
        #[arg(long, value_delimiter = ',')]
        lambda: Vec<f64>,
        #[arg(long, value_delimiter = ',', conflicts_with = "poly")]
        at: Vec<f64>,
        #[arg(long, conflicts_with = "poly")]
        locations: Option<PathBuf>,
        #[command(flatten)]
        ensemble: EnsembleArgs,
        #[arg(long, default_value_t = 0)]
        bins: usize,
    },
}

impl Cli {
    pub fn into_config(self) -> RunConfig {
        let g = self.global;
        let kind = match &self.command {
            Command::Convolve { .. } => CommandKind::Convolve,
            Command::AtomScan { .. } => CommandKind::AtomScan,
            Command::Decompose { .. } => CommandKind::Decompose,
            Command::Linearize { .. } => CommandKind::Linearize,
            Command::Eigtest { .. } => CommandKind::Eigtest,
            Command::Oracle { .. } => CommandKind::Oracle,
            Command::Compare { .. } => CommandKind::Compare,
        };
        let mut c = RunConfig::new(kind);
        if let Some(v) = g.tol {
            c.tol = v;
        }
        if let Some(v) = g.y0 {
            c.y0 = v;
        }
        if let Some(v) = g.ladder_depth {
            c.ladder_depth = v;
        }
        if let Some(v) = g.extrapolation {
            c.extrapolation = v;
        }
        if let Some(v) = g.seed {
            c.seed = v;
        }
        if let Some(v) = g.format {
            c.format = v;
        }
        if let Some(v) = g.workers {
            c.workers = v;
        }
        c.output = g.output;
        c.strict = g.strict;
        let set_model = |c: &mut RunConfig, m: ModelArgs| {
            c.inputs.mu1 = m.mu1;
            c.inputs.mu2 = m.mu2;
            c.inputs.model = m.model;
        };
        let set_ensemble = |c: &mut RunConfig, e: EnsembleArgs| {
            c.matrix_size = e.matrix_size;
            c.trials = e.trials;
            c.epsilon = e.epsilon;
        };
        match self.command {
            Command::Convolve { model, grid, y } => {
                set_model(&mut c, model);
                c.grid = Some(grid);
                c.y_eval = y;
            }
            Command::AtomScan { model, at, locations } => {
                set_model(&mut c, model);
                c.at = at;
                c.inputs.locations = locations;
            }
            Command::Decompose { model, at, location } => {
                set_model(&mut c, model);
                c.at = at.into_iter().collect();
                c.inputs.locations = location;
            }
            Command::Linearize { poly, check_trials, check_dim } => {
                c.poly = Some(poly);
                c.check_trials = check_trials;
                c.check_dim = check_dim;
            }
            Command::Eigtest { poly, lambda, mu1, mu2 } => {
                c.poly = Some(poly);
                c.lambdas = vec![lambda];
                c.inputs.mu1 = Some(mu1);
                c.inputs.mu2 = Some(mu2);
            }
            Command::Oracle { model, poly, lambda, at, ensemble, bins } => {
                set_model(&mut c, model);
                set_ensemble(&mut c, ensemble);
                c.poly = poly;
                c.lambdas = lambda;
                c.at = at.into_iter().collect();
                c.bins = bins;
            }
            Command::Compare { model, poly, lambda, at, locations, ensemble, bins } => {
                set_model(&mut c, model);
                set_ensemble(&mut c, ensemble);
                c.poly = poly;
                c.lambdas = lambda;
                c.at = at;
                c.inputs.locations = locations;
                c.bins = bins;
            }
        }
        c
    }
}

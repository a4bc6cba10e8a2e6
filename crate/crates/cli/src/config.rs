//! Command-line flags, the optional TOML config file, and their merge into a
//! fully resolved [`RunConfig`].
//!
//! Every flag can also be given in the config file under the same name with
//! dashes, e.g. `grid-step = 0.05`. Flags win over the file.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gmle_core::grid::{axis_with_step, ParameterGrid};
use gmle_core::models::{BernoulliModel, Model, PoissonBinomialModel, StrataBinomialModel, SurveyGeometricModel};
use gmle_core::sim::{table1_specs, table2_specs, PopulationKind, PopulationSpec};
use gmle_core::{CensoringMode, InitScheme, SolverConfig};
use serde::Deserialize;

use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(
    name = "gmle",
    version,
    about = "Grid GMLE of mixing distributions under non-response"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a mixing distribution to a data file and report the mean estimate.
    Fit(Options),
    /// Run a replicated simulation study (Table 1 / Table 2 designs).
    Simulate(Options),
    /// Fit from several random starts and check that the fits agree.
    Verify(Options),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelName {
    Bernoulli,
    StrataBinomial,
    SurveyGeometric,
    PoissonBinomial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Full,
    Truncated,
    Censored,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Table,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Table1,
    Table2,
}

/// Flags shared by all subcommands; each is also a config-file key.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct Options {
    /// TOML file with flat `key = value` settings.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Data file (fit; optional for verify).
    #[arg(long, short)]
    pub input: Option<PathBuf>,

    #[arg(long, value_enum)]
    pub model: Option<ModelName>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,

    /// Attempted sample size per stratum (strata-binomial).
    #[arg(long)]
    pub kappa: Option<u32>,
    /// Maximum contact attempts (survey-geometric).
    #[arg(long)]
    pub attempts: Option<u32>,
    /// Number of answer categories (survey-geometric).
    #[arg(long)]
    pub categories: Option<u32>,
    /// Largest Poisson rate on the grid (poisson-binomial).
    #[arg(long)]
    pub lambda_max: Option<f64>,
    /// Spacing of the rate axis (poisson-binomial).
    #[arg(long)]
    pub lambda_step: Option<f64>,

    /// Spacing of every probability axis of the grid.
    #[arg(long)]
    pub grid_step: Option<f64>,
    #[arg(long)]
    pub grid_lo: Option<f64>,
    #[arg(long)]
    pub grid_hi: Option<f64>,
    /// Lattice resolution of the category simplex (survey-geometric).
    #[arg(long)]
    pub simplex_resolution: Option<usize>,

    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub rel_tol: Option<f64>,
    #[arg(long)]
    pub kkt_tol: Option<f64>,

    /// Random starts (verify).
    #[arg(long)]
    pub starts: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,

    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Replications per design (simulate).
    #[arg(long)]
    pub reps: Option<usize>,
    /// Strata per population (simulate).
    #[arg(long)]
    pub strata: Option<usize>,
    /// Two-point design `pi = p = 0.5 -+ delta`, when no preset is given.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Sample size of the generated verify dataset (half zeros, half ones).
    #[arg(long)]
    pub n: Option<u64>,

    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Write the csv output to this path instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

macro_rules! overlay {
    ($top:ident, $base:ident; $($field:ident),* $(,)?) => {
        Options { config: $top.config, $($field: $top.$field.or($base.$field)),* }
    };
}

impl Options {
    /// Fields set on `self` win; the rest come from `base`.
    pub fn over(self, base: Options) -> Options {
        let top = self;
        overlay!(top, base; input, model, mode, kappa, attempts, categories, lambda_max, lambda_step,
            grid_step, grid_lo, grid_hi, simplex_resolution, max_iters, rel_tol, kkt_tol, starts, seed,
            preset, reps, strata, delta, n, format, out)
    }

    pub fn load_file(path: &Path) -> Result<Options> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("config file {}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Fit,
    Simulate,
    Verify,
}

impl CommandKind {
    fn name(self) -> &'static str {
        match self {
            CommandKind::Fit => "fit",
            CommandKind::Simulate => "simulate",
            CommandKind::Verify => "verify",
        }
    }
}

pub const DEFAULT_GRID_STEP: f64 = 0.025;
pub const DEFAULT_REPS: usize = 100;
pub const DEFAULT_STARTS: usize = 10;
pub const DEFAULT_SIMPLEX_RESOLUTION: usize = 10;
pub const DEFAULT_LAMBDA_MAX: f64 = 10.0;
pub const DEFAULT_LAMBDA_STEP: f64 = 0.5;
pub const DEFAULT_STRATA: usize = 1000;
pub const DEFAULT_VERIFY_N: u64 = 10;

/// Everything a run needs, with defaults filled in.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: CommandKind,
    pub model: ModelName,
    /// `None` for strata-binomial fits until read off the data.
    pub kappa: Option<u32>,
    pub attempts: u32,
    pub categories: u32,
    pub lambda_max: f64,
    pub lambda_step: f64,
    pub mode: CensoringMode,
    pub grid_step: f64,
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub simplex_resolution: usize,
    pub solver: SolverConfig,
    pub input: Option<PathBuf>,
    pub preset: Option<Preset>,
    pub reps: usize,
    pub strata: usize,
    pub delta: Option<f64>,
    pub n: u64,
    pub seed: Option<u64>,
    pub format: Format,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn resolve(command: CommandKind, cli: Options) -> Result<RunConfig> {
        let opts = match &cli.config {
            Some(path) => {
                let file = Options::load_file(path)?;
                cli.over(file)
            }
            None => cli,
        };
        let model = opts.model.unwrap_or(match command {
            CommandKind::Verify if opts.input.is_none() => ModelName::Bernoulli,
            CommandKind::Verify | CommandKind::Fit | CommandKind::Simulate => ModelName::StrataBinomial,
        });
        let seed = opts.seed;
        let defaults = SolverConfig::default();
        let starts = opts.starts.unwrap_or(DEFAULT_STARTS);
        let solver = SolverConfig {
            max_iters: opts.max_iters.unwrap_or(defaults.max_iters),
            rel_tol: opts.rel_tol.unwrap_or(defaults.rel_tol),
            kkt_tol: opts.kkt_tol.unwrap_or(defaults.kkt_tol),
            n_starts: if command == CommandKind::Verify {
                starts
            } else {
                defaults.n_starts
            },
            init_scheme: match (command, seed) {
                (CommandKind::Verify, Some(s)) => InitScheme::DirichletRandom(s),
                _ => InitScheme::Uniform,
            },
        };
        let mode = match opts.mode {
            Some(Mode::Full) => CensoringMode::Full,
            Some(Mode::Truncated) => CensoringMode::Truncated,
            Some(Mode::Censored) => CensoringMode::Censored,
            None if model == ModelName::Bernoulli => CensoringMode::Full,
            None => CensoringMode::Censored,
        };
        let cfg = RunConfig {
            command,
            model,
            kappa: opts.kappa.or((command == CommandKind::Simulate).then_some(4)),
            attempts: opts.attempts.unwrap_or(3),
            categories: opts.categories.unwrap_or(2),
            lambda_max: opts.lambda_max.unwrap_or(DEFAULT_LAMBDA_MAX),
            lambda_step: opts.lambda_step.unwrap_or(DEFAULT_LAMBDA_STEP),
            mode,
            grid_step: opts.grid_step.unwrap_or(DEFAULT_GRID_STEP),
            grid_lo: opts.grid_lo.unwrap_or(0.0),
            grid_hi: opts.grid_hi.unwrap_or(1.0),
            simplex_resolution: opts.simplex_resolution.unwrap_or(DEFAULT_SIMPLEX_RESOLUTION),
            solver,
            input: opts.input,
            preset: opts.preset,
            reps: opts.reps.unwrap_or(DEFAULT_REPS),
            strata: opts.strata.unwrap_or(DEFAULT_STRATA),
            delta: opts.delta,
            n: opts.n.unwrap_or(DEFAULT_VERIFY_N),
            seed,
            format: opts.format.unwrap_or(Format::Table),
            out: opts.out,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let usage = |msg: String| Err(CliError::Usage(msg));
        match self.command {
            CommandKind::Fit if self.input.is_none() => return usage("fit needs --input <file>".into()),
            CommandKind::Simulate | CommandKind::Verify if self.seed.is_none() => {
                return usage(format!("{} needs --seed", self.command.name()))
            }
            CommandKind::Simulate if self.model != ModelName::StrataBinomial => {
                return usage("simulate only supports the strata-binomial model".into())
            }
            CommandKind::Simulate if self.preset.is_none() && self.delta.is_none() => {
                return usage("simulate needs --preset or --delta".into())
            }
            CommandKind::Simulate if self.reps == 0 => return usage("--reps must be positive".into()),
            CommandKind::Verify if self.solver.n_starts < 2 => {
                return usage(format!("verify needs at least 2 starts, got {}", self.solver.n_starts))
            }
            CommandKind::Verify if self.input.is_none() && self.model != ModelName::Bernoulli => {
                return usage("verify without --input generates Bernoulli data; use --model bernoulli".into())
            }
            _ => {}
        }
        if let Some(path) = &self.input {
            if !path.is_file() {
                return usage(format!("input file {} does not exist", path.display()));
            }
        }
        if self.mode == CensoringMode::Full && self.model != ModelName::Bernoulli {
            return usage(format!(
                "mode full only applies to the bernoulli model, not {:?}",
                self.model
            ));
        }
        self.solver.validate()?;
        Ok(())
    }

    /// Observation model; `kappa` must be known for strata-binomial.
    pub fn build_model(&self) -> Result<Model> {
        Ok(match self.model {
            ModelName::Bernoulli => Model::Bernoulli(BernoulliModel),
            ModelName::StrataBinomial => {
                let kappa = self
                    .kappa
                    .ok_or_else(|| CliError::Usage("strata-binomial needs --kappa".into()))?;
                Model::StrataBinomial(StrataBinomialModel::new(kappa)?)
            }
            ModelName::SurveyGeometric => {
                Model::SurveyGeometric(SurveyGeometricModel::new(self.attempts, self.categories)?)
            }
            ModelName::PoissonBinomial => Model::PoissonBinomial(PoissonBinomialModel::new(self.lambda_max)?),
        })
    }

    pub fn build_grid(&self) -> Result<Arc<ParameterGrid>> {
        let prob = axis_with_step(self.grid_lo, self.grid_hi, self.grid_step)?;
        let grid = match self.model {
            ModelName::Bernoulli => ParameterGrid::from_scalars(&prob)?,
            ModelName::StrataBinomial => ParameterGrid::cartesian(&[prob.clone(), prob])?,
            ModelName::PoissonBinomial => {
                let rates = axis_with_step(self.lambda_step, self.lambda_max, self.lambda_step)?;
                ParameterGrid::cartesian(&[rates, prob])?
            }
            ModelName::SurveyGeometric => {
                ParameterGrid::with_simplex(&prob, self.categories as usize, self.simplex_resolution)?
            }
        };
        Ok(Arc::new(grid))
    }

    pub fn population_specs(&self) -> Result<Vec<PopulationSpec>> {
        let mut specs = match (self.preset, self.delta) {
            (Some(Preset::Table1), _) => table1_specs(),
            (Some(Preset::Table2), _) => table2_specs(),
            (None, Some(delta)) => vec![PopulationSpec {
                kind: PopulationKind::TwoPointSymmetric { delta },
                n_strata: self.strata,
                kappa: self.kappa.unwrap_or(4),
            }],
            (None, None) => return Err(CliError::Usage("simulate needs --preset or --delta".into())),
        };
        for s in &mut specs {
            s.n_strata = self.strata;
        }
        Ok(specs)
    }

    /// The resolved settings as commented `key = value` lines.
    pub fn header(&self) -> String {
        let mut lines: Vec<(&str, String)> = vec![
            ("command", self.command.name().into()),
            ("model", value_name(self.model)),
        ];
        if let Some(path) = &self.input {
            lines.push(("input", path.display().to_string()));
        }
        match self.model {
            ModelName::StrataBinomial => lines.push((
                "kappa",
                self.kappa.map_or_else(|| "from data".into(), |k| k.to_string()),
            )),
            ModelName::SurveyGeometric => {
                lines.push(("attempts", self.attempts.to_string()));
                lines.push(("categories", self.categories.to_string()));
                lines.push(("simplex-resolution", self.simplex_resolution.to_string()));
            }
            ModelName::PoissonBinomial => {
                lines.push(("lambda-max", self.lambda_max.to_string()));
                lines.push(("lambda-step", self.lambda_step.to_string()));
            }
            ModelName::Bernoulli => {}
        }
        lines.push(("mode", self.mode.to_string()));
        lines.push(("grid-lo", self.grid_lo.to_string()));
        lines.push(("grid-hi", self.grid_hi.to_string()));
        lines.push(("grid-step", self.grid_step.to_string()));
        lines.push(("max-iters", self.solver.max_iters.to_string()));
        lines.push(("rel-tol", format!("{:e}", self.solver.rel_tol)));
        lines.push(("kkt-tol", format!("{:e}", self.solver.kkt_tol)));
        match self.command {
            CommandKind::Fit => {}
            CommandKind::Simulate => {
                match self.preset {
                    Some(p) => lines.push(("preset", value_name(p))),
                    None => lines.push(("delta", self.delta.unwrap_or_default().to_string())),
                }
                lines.push(("reps", self.reps.to_string()));
                lines.push(("strata", self.strata.to_string()));
            }
            CommandKind::Verify => {
                lines.push(("starts", self.solver.n_starts.to_string()));
                if self.input.is_none() {
                    lines.push(("n", self.n.to_string()));
                }
            }
        }
        if let Some(seed) = self.seed {
            lines.push(("seed", seed.to_string()));
        }
        lines.push(("format", value_name(self.format)));
        let mut out = String::new();
        for (k, v) in lines {
            let _ = writeln!(out, "# {k} = {v}");
        }
        out
    }
}

fn value_name<T: ValueEnum>(v: T) -> String {
    v.to_possible_value()
        .map(|p| p.get_name().to_string())
        .unwrap_or_default()
}

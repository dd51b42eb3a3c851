//! Command-line front end: flag parsing, config merging, dispatch and exit codes.

pub mod commands;
pub mod config;
pub mod manifest;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::{Command, ExperimentBlock, NumOrTheory, RunConfig, StepRuleConfig, BudgetRuleConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_SCALING_NOT_OBSERVED: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numeric(_) => EXIT_NUMERIC,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl From<sgdlab_core::Error> for CliError {
    fn from(e: sgdlab_core::Error) -> Self {
        use sgdlab_core::Error as E;
        match e {
            E::InvalidArgument(_)
            | E::DimensionMismatch { .. }
            | E::Precondition(_)
            | E::AssumptionAViolated
            | E::EmptyStepWindow { .. } => CliError::Config(e.to_string()),
            E::ZeroNorm { .. } | E::NonFiniteAtNode { .. } | E::NonFinite { .. } | E::NoExponent { .. } | E::Blowup { .. } => {
                CliError::Numeric(e.to_string())
            }
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "sgdlab", version, about = "Online SGD on the sphere: Hermite analysis, dynamics and scaling experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Hermite coefficients and information exponent of an activation.
    Hermite(HermiteArgs),
    /// Critical sample complexity, step size, recovery time and envelopes.
    Predict(PredictArgs),
    /// One online SGD run.
    Simulate(SimulateArgs),
    /// Hitting-time scaling scan over a grid of dimensions.
    Scan(ScanArgs),
    /// Deviation of SGD from the population dynamics across dimensions.
    Lln(LlnArgs),
    /// Probability of leaving the equator below the critical sample complexity.
    Refute(RefuteArgs),
    /// Several activations trained on the same sample stream.
    Compare(CompareArgs),
    /// Monte Carlo moment estimates of the sample-wise error gradient.
    #[command(name = "verify-b")]
    VerifyB(VerifyBArgs),
    /// Re-hash the outputs listed in a manifest.
    Check {
        manifest: PathBuf,
    },
    /// Run again the configuration recorded in a manifest.
    Rerun {
        manifest: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Debug, Args, Default)]
pub struct CommonArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default 1).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Run even when the population loss fails the negativity check.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args, Default)]
pub struct ModelArgs {
    /// supervised, glm, linear_regression, tensor_pca, composite_tensor, gaussian_mixture, population.
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub activation: Option<String>,
    /// Polynomial activation coefficients c0,c1,...
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub polynomial: Option<Vec<f64>>,
    #[arg(long)]
    pub student: Option<String>,
    /// Mixture weight.
    #[arg(long)]
    pub p: Option<f64>,
    /// Tensor order.
    #[arg(long)]
    pub order: Option<usize>,
    #[arg(long)]
    pub snr: Option<f64>,
    /// GLM family: linear, logistic, poisson.
    #[arg(long)]
    pub glm: Option<String>,
}

#[derive(Debug, Args)]
pub struct HermiteArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub activation: Option<String>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub polynomial: Option<Vec<f64>>,
    #[arg(long)]
    pub truncation: Option<usize>,
    #[arg(long)]
    pub quad_order: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub drift: Option<f64>,
    #[arg(long)]
    pub lbar: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub m0: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub n: Option<usize>,
    /// Step size or "theory".
    #[arg(long, value_parser = NumOrTheory::parse_flag)]
    pub delta: Option<NumOrTheory>,
    /// Samples per dimension or "theory".
    #[arg(long, value_parser = NumOrTheory::parse_flag)]
    pub alpha: Option<NumOrTheory>,
    #[arg(long)]
    pub steps: Option<u64>,
    /// Start at this latitude instead of uniformly on the upper half-sphere.
    #[arg(long)]
    pub m0: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Option<Vec<f64>>,
    #[arg(long)]
    pub stride: Option<u64>,
    /// Record the drift / martingale / radial decomposition.
    #[arg(long)]
    pub diagnostics: bool,
    #[arg(long)]
    pub stop_at: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_delimiter = ',')]
    pub n_grid: Option<Vec<usize>>,
    #[arg(long)]
    pub seeds: Option<usize>,
    #[arg(long)]
    pub eta: Option<f64>,
    /// Fixed step size or "theory".
    #[arg(long, value_parser = NumOrTheory::parse_flag)]
    pub delta: Option<NumOrTheory>,
    /// Fixed samples per dimension or "theory".
    #[arg(long, value_parser = NumOrTheory::parse_flag)]
    pub alpha: Option<NumOrTheory>,
    #[arg(long)]
    pub budget_factor: Option<f64>,
}

#[derive(Debug, Args)]
pub struct LlnArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_delimiter = ',')]
    pub n_grid: Option<Vec<usize>>,
    #[arg(long)]
    pub m0: Option<f64>,
    #[arg(long, value_parser = NumOrTheory::parse_flag)]
    pub delta: Option<NumOrTheory>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub seeds: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RefuteArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_parser = NumOrTheory::parse_flag)]
    pub alpha: Option<NumOrTheory>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub seeds: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_delimiter = ',')]
    pub activations: Option<Vec<String>>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub level: Option<f64>,
    #[arg(long)]
    pub seeds: Option<usize>,
}

#[derive(Debug, Args)]
pub struct VerifyBArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub iota: Option<f64>,
    #[arg(long)]
    pub probes: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
}

fn set<T>(slot: &mut Option<T>, value: Option<T>) {
    if value.is_some() {
        *slot = value;
    }
}

impl CommonArgs {
    fn load(&self, command: Command) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_path(p)?,
            None => RunConfig::default(),
        };
        if let Some(c) = cfg.command {
            if c != command {
                return Err(CliError::Config(format!(
                    "config file is for `{}` but `{}` was requested",
                    c.name(),
                    command.name()
                )));
            }
        }
        cfg.command = Some(command);
        set(&mut cfg.master_seed, self.seed);
        set(&mut cfg.output_dir, self.output_dir.clone());
        set(&mut cfg.threads, self.threads);
        if self.force {
            cfg.force = Some(true);
        }
        cfg.apply_env(self.output_dir.is_some(), self.threads.is_some())?;
        Ok(cfg)
    }
}

impl ModelArgs {
    fn apply(&self, cfg: &mut RunConfig) -> Result<(), CliError> {
        let m = cfg.model_mut();
        set(&mut m.family, self.family.clone());
        if self.activation.is_some() {
            m.activation = self.activation.clone();
            m.polynomial = None;
        }
        if self.polynomial.is_some() {
            m.polynomial = self.polynomial.clone();
            m.activation = None;
        }
        set(&mut m.student, self.student.clone());
        set(&mut m.p, self.p);
        set(&mut m.order, self.order);
        set(&mut m.snr, self.snr);
        if let Some(g) = &self.glm {
            let parsed = serde_json::from_value(serde_json::Value::String(g.clone()))
                .map_err(|_| CliError::Config(format!("--glm: unknown family \"{g}\"")))?;
            m.glm = Some(parsed);
        }
        Ok(())
    }
}

fn rule_flag(v: &Option<NumOrTheory>) -> (Option<StepRuleConfig>, Option<BudgetRuleConfig>) {
    match v {
        Some(NumOrTheory::Value(x)) => (Some(StepRuleConfig::Value(*x)), Some(BudgetRuleConfig::Value(*x))),
        Some(NumOrTheory::Keyword(k)) => (Some(StepRuleConfig::Keyword(k.clone())), Some(BudgetRuleConfig::Keyword(k.clone()))),
        None => (None, None),
    }
}

/// Merges flags into the file configuration for the chosen subcommand.
pub fn resolve_config(sub: &Sub) -> Result<RunConfig, CliError> {
    match sub {
        Sub::Rerun { manifest, output_dir, threads } => {
            let mut cfg = RunConfig::from_manifest(manifest)?;
            set(&mut cfg.output_dir, output_dir.clone());
            set(&mut cfg.threads, *threads);
            cfg.apply_env(output_dir.is_some(), threads.is_some())?;
            Ok(cfg)
        }
        Sub::Hermite(a) => {
            let mut cfg = a.common.load(Command::Hermite)?;
            let m = cfg.model_mut();
            if a.activation.is_some() {
                m.activation = a.activation.clone();
                m.polynomial = None;
            }
            if a.polynomial.is_some() {
                m.polynomial = a.polynomial.clone();
                m.activation = None;
            }
            let h = cfg.hermite_mut();
            set(&mut h.truncation, a.truncation);
            set(&mut h.quad_order, a.quad_order);
            Ok(cfg)
        }
        Sub::Predict(a) => {
            let mut cfg = a.common.load(Command::Predict)?;
            a.model.apply(&mut cfg)?;
            if cfg.model.as_ref().is_some_and(|m| *m == Default::default()) {
                cfg.model = None;
            }
            let p = cfg.predict_mut();
            set(&mut p.k, a.k);
            set(&mut p.n, a.n);
            set(&mut p.drift_coefficient, a.drift);
            set(&mut p.lbar, a.lbar);
            set(&mut p.alpha, a.alpha);
            set(&mut p.eta, a.eta);
            set(&mut p.m0, a.m0);
            Ok(cfg)
        }
        Sub::Simulate(a) => {
            let mut cfg = a.common.load(Command::Simulate)?;
            a.model.apply(&mut cfg)?;
            let d = cfg.dynamics_mut();
            set(&mut d.n, a.n);
            set(&mut d.delta, a.delta.clone());
            set(&mut d.alpha, a.alpha.clone());
            set(&mut d.steps, a.steps);
            if a.m0.is_some() {
                d.m0 = a.m0;
                d.init = Some("fixed".into());
            }
            set(&mut d.thresholds, a.thresholds.clone());
            set(&mut d.stride, a.stride);
            if a.diagnostics {
                d.diagnostics = Some(true);
            }
            set(&mut d.stop_at, a.stop_at);
            Ok(cfg)
        }
        Sub::Scan(a) => {
            let mut cfg = a.common.load(Command::Scan)?;
            a.model.apply(&mut cfg)?;
            let e = cfg.experiment_mut();
            set(&mut e.n_grid, a.n_grid.clone());
            set(&mut e.seeds, a.seeds);
            set(&mut e.eta, a.eta);
            set(&mut e.delta, rule_flag(&a.delta).0);
            set(&mut e.alpha, rule_flag(&a.alpha).1);
            set(&mut e.budget_factor, a.budget_factor);
            Ok(cfg)
        }
        Sub::Lln(a) => {
            let mut cfg = a.common.load(Command::Lln)?;
            a.model.apply(&mut cfg)?;
            let e = cfg.experiment_mut();
            set(&mut e.n_grid, a.n_grid.clone());
            set(&mut e.m0, a.m0);
            set(&mut e.delta, rule_flag(&a.delta).0);
            set(&mut e.alpha, a.alpha.map(BudgetRuleConfig::Value));
            set(&mut e.seeds, a.seeds);
            Ok(cfg)
        }
        Sub::Refute(a) => {
            let mut cfg = a.common.load(Command::Refute)?;
            a.model.apply(&mut cfg)?;
            let d = cfg.dynamics_mut();
            set(&mut d.n, a.n);
            set(&mut d.alpha, a.alpha.clone());
            set(&mut d.delta, a.delta.map(NumOrTheory::Value));
            let e = cfg.experiment_mut();
            set(&mut e.eta, a.eta);
            set(&mut e.seeds, a.seeds);
            Ok(cfg)
        }
        Sub::Compare(a) => {
            let mut cfg = a.common.load(Command::Compare)?;
            let d = cfg.dynamics_mut();
            set(&mut d.n, a.n);
            set(&mut d.alpha, a.alpha.map(NumOrTheory::Value));
            set(&mut d.delta, a.delta.map(NumOrTheory::Value));
            let e = cfg.experiment_mut();
            set(&mut e.activations, a.activations.clone());
            set(&mut e.level, a.level);
            set(&mut e.seeds, a.seeds);
            Ok(cfg)
        }
        Sub::VerifyB(a) => {
            let mut cfg = a.common.load(Command::VerifyB)?;
            a.model.apply(&mut cfg)?;
            set(&mut cfg.dynamics_mut().n, a.n);
            let e: &mut ExperimentBlock = cfg.experiment_mut();
            set(&mut e.iota, a.iota);
            set(&mut e.probes, a.probes);
            set(&mut e.samples_per_probe, a.samples);
            Ok(cfg)
        }
        Sub::Check { .. } => Err(CliError::Config("`check` takes no run configuration".into())),
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Sub::Check { manifest } = &cli.command {
        return match manifest::verify_manifest(manifest) {
            Ok(bad) if bad.is_empty() => {
                println!("all outputs match {}", manifest.display());
                EXIT_OK
            }
            Ok(bad) => {
                eprintln!("digest mismatch: {}", bad.join(", "));
                EXIT_NUMERIC
            }
            Err(e) => {
                eprintln!("{e}");
                e.exit_code()
            }
        };
    }
    let cfg = match resolve_config(&cli.command) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return e.exit_code();
        }
    };
    match commands::execute(cfg) {
        Ok(outcome) => outcome.exit_code,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

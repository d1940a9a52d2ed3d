//! Command-line configuration for `spp run` and `spp compare`.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::SemanticsMode;
use crate::samplers::{
    SamplerKind, DEFAULT_FRICTION, DEFAULT_MASS, DEFAULT_N_LEAPFROG, DEFAULT_STEP_SIZE,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelName {
    Survey,
    Ball,
    Gmm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Stochastic,
    Deterministic,
    /// Survey with coins from an external source (see `--coin`).
    Blackbox,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerName {
    Hmc,
    Sghmc,
    Mhmc,
}

impl From<SamplerName> for SamplerKind {
    fn from(s: SamplerName) -> Self {
        match s {
            SamplerName::Hmc => SamplerKind::Hmc,
            SamplerName::Sghmc => SamplerKind::Sghmc,
            SamplerName::Mhmc => SamplerKind::Mhmc,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorName {
    /// No prior term on the unconstrained parameter.
    #[default]
    Flat,
    /// Uniform on the survey's θ or the ball's sin 2α.
    Uniform,
    /// Normal(π/4, π/8) on the ball's launch angle.
    Angle,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CoinName {
    #[default]
    Fair,
    /// Every coin lands heads: all answers are honest.
    Honest,
    /// Correlated flips; see `--coin-stay`.
    Markov,
}

#[derive(Parser, Debug)]
#[command(
    name = "spp",
    version,
    about = "Inference in stochastic probabilistic programs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sample one model variant and write samples and a summary.
    Run(RunConfig),
    /// Sample the stochastic variant and the deterministic one, and check
    /// that their posterior means agree.
    Compare(RunConfig),
}

#[derive(Args, Clone, Debug, PartialEq)]
pub struct RunConfig {
    #[arg(long, value_enum)]
    pub model: ModelName,
    #[arg(long, value_enum, default_value = "stochastic")]
    pub variant: Variant,
    /// Defaults to hmc for the deterministic variant and to the sampler
    /// matching the model's semantics otherwise.
    #[arg(long, value_enum)]
    pub sampler: Option<SamplerName>,
    #[arg(long, default_value_t = DEFAULT_STEP_SIZE)]
    pub step_size: f64,
    #[arg(long, default_value_t = DEFAULT_N_LEAPFROG)]
    pub n_leapfrog: usize,
    #[arg(long, default_value_t = DEFAULT_FRICTION)]
    pub friction: f64,
    #[arg(long, default_value_t = DEFAULT_MASS)]
    pub mass: f64,
    /// Draws per gradient estimate; 10 for mhmc and 1 for sghmc by default.
    #[arg(long)]
    pub n_draws: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub chains: usize,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 500)]
    pub burnin: usize,
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Single-column CSV of observations; required for gmm.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output directory for samples.csv and summary.json.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Weak-throw speed.
    #[arg(long, default_value_t = 8.0)]
    pub vw: f64,
    /// Strong-throw speed.
    #[arg(long, default_value_t = 10.0)]
    pub vs: f64,
    /// Distance to the basket.
    #[arg(long, default_value_t = 8.0)]
    pub distance: f64,
    #[arg(long, default_value_t = 2)]
    pub n_comp: usize,
    #[arg(long, value_enum, default_value = "flat")]
    pub prior: PriorName,
    #[arg(long, value_enum, default_value = "fair")]
    pub coin: CoinName,
    /// Probability that a markov coin repeats its previous flip.
    #[arg(long, default_value_t = 0.9)]
    pub coin_stay: f64,
    /// Comma-separated initial point; zeros (or data quantiles for gmm) by default.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub init: Option<Vec<f64>>,
    /// Record wall-clock seconds in the summary; outputs then differ between runs.
    #[arg(long)]
    pub timing: bool,
}

impl RunConfig {
    pub fn semantics(&self) -> SemanticsMode {
        match (self.variant, self.model) {
            (Variant::Deterministic, _) => SemanticsMode::Deterministic,
            (_, ModelName::Ball) => SemanticsMode::Nondeterminism,
            _ => SemanticsMode::Marginalization,
        }
    }

    pub fn sampler_kind(&self) -> SamplerKind {
        match self.sampler {
            Some(s) => s.into(),
            None => match self.semantics() {
                SemanticsMode::Deterministic => SamplerKind::Hmc,
                SemanticsMode::Nondeterminism => SamplerKind::Sghmc,
                SemanticsMode::Marginalization => SamplerKind::Mhmc,
            },
        }
    }

    pub fn n_draws(&self) -> usize {
        self.n_draws.unwrap_or(match self.sampler_kind() {
            SamplerKind::Mhmc => crate::estimators::DEFAULT_MHMC_DRAWS,
            _ => crate::estimators::DEFAULT_SGHMC_DRAWS,
        })
    }

    /// Checks flag combinations that clap cannot express.
    pub fn validate(&self) -> Result<()> {
        let usage = |m: String| Err(Error::Usage(m));
        let kind = self.sampler_kind();
        match (kind, self.variant) {
            (SamplerKind::Hmc, v) if v != Variant::Deterministic => {
                return usage("hmc requires deterministic variant".into())
            }
            (k, Variant::Deterministic) if k != SamplerKind::Hmc => {
                return usage(format!("{k} requires a stochastic variant"))
            }
            _ => {}
        }
        if kind.semantics() != self.semantics() {
            return usage(format!(
                "{kind} requires a {} model, this one uses {}",
                kind.semantics(),
                self.semantics()
            ));
        }
        if self.variant == Variant::Blackbox && self.model != ModelName::Survey {
            return usage("blackbox variant exists only for the survey model".into());
        }
        if self.model == ModelName::Gmm && self.data.is_none() {
            return usage("gmm requires --data".into());
        }
        if self.model == ModelName::Ball && self.data.is_some() {
            return usage("ball takes no --data; use --vw, --vs, --distance".into());
        }
        match (self.prior, self.model) {
            (PriorName::Angle, m) if m != ModelName::Ball => {
                return usage("angle prior applies to the ball model only".into())
            }
            (p, ModelName::Gmm) if p != PriorName::Flat => {
                return usage("gmm supports only the flat prior".into())
            }
            _ => {}
        }
        for (name, v) in [
            ("chains", self.chains),
            ("samples", self.samples),
            ("thin", self.thin),
            ("n-leapfrog", self.n_leapfrog),
            ("n-draws", self.n_draws()),
            ("n-comp", self.n_comp),
        ] {
            if v < 1 {
                return usage(format!("--{name} must be at least 1"));
            }
        }
        for (name, v) in [
            ("step-size", self.step_size),
            ("mass", self.mass),
            ("vw", self.vw),
            ("vs", self.vs),
            ("distance", self.distance),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return usage(format!("--{name} must be positive, got {v}"));
            }
        }
        if !(self.friction >= 0.0 && self.friction.is_finite()) {
            return usage(format!(
                "--friction must be non-negative, got {}",
                self.friction
            ));
        }
        if !(0.0..=1.0).contains(&self.coin_stay) {
            return usage(format!(
                "--coin-stay must lie in [0, 1], got {}",
                self.coin_stay
            ));
        }
        if let Some(init) = &self.init {
            if init.iter().any(|v| !v.is_finite()) {
                return usage("--init values must be finite".into());
            }
        }
        Ok(())
    }

    /// The same configuration with the deterministic variant sampled by HMC.
    pub fn deterministic_counterpart(&self) -> RunConfig {
        RunConfig {
            variant: Variant::Deterministic,
            sampler: Some(SamplerName::Hmc),
            ..self.clone()
        }
    }

    /// The same configuration with the stochastic variant and its sampler.
    pub fn stochastic_counterpart(&self) -> RunConfig {
        let variant = match self.variant {
            Variant::Deterministic => Variant::Stochastic,
            v => v,
        };
        RunConfig {
            variant,
            sampler: None,
            ..self.clone()
        }
    }
}

/// Checks a parsed command beyond what clap enforces.
pub fn validate_command(command: &Command) -> Result<()> {
    match command {
        Command::Run(c) => c.validate(),
        Command::Compare(c) => {
            if c.variant == Variant::Deterministic {
                return Err(Error::Usage(
                    "compare samples both variants; pass the stochastic or blackbox one".into(),
                ));
            }
            if c.sampler == Some(SamplerName::Hmc) {
                return Err(Error::Usage(
                    "compare picks hmc for the deterministic run itself".into(),
                ));
            }
            c.validate()?;
            if c.variant == Variant::Blackbox && c.coin != CoinName::Fair {
                return Err(Error::Usage(
                    "only a fair-coin blackbox survey has a deterministic counterpart".into(),
                ));
            }
            Ok(())
        }
    }
}

/// Parses and validates a command line (including the program name).
pub fn parse_config<I, T>(argv: I) -> Result<Command>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| Error::Usage(e.render().to_string()))?;
    validate_command(&cli.command)?;
    Ok(cli.command)
}

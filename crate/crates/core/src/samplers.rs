//! HMC for deterministic models and friction-damped stochastic-gradient HMC
//! for stochastic ones. MHMC is sgHMC driven by the marginalization
//! estimator; plain sgHMC uses the nondeterminism estimator.
//!
//! The potential is `U(x) = -log p̃(x)` and the kinetic energy is
//! `|r|² / 2m` for a scalar mass `m`.

use std::fmt;

use crate::error::{Error, Result};
use crate::estimators::{estimate, EstimatorConfig, GradientEstimate};
use crate::model::{check_params, evaluate, Evaluation, Model, SemanticsMode};
use crate::rng::RngStream;

pub const DEFAULT_STEP_SIZE: f64 = 0.01;
pub const DEFAULT_N_LEAPFROG: usize = 10;
pub const DEFAULT_FRICTION: f64 = 1.0;
pub const DEFAULT_MASS: f64 = 1.0;

/// Fraction of divergent steps above which a chain is abandoned.
pub const MAX_DIVERGENT_FRACTION: f64 = 0.5;
/// Steps a chain runs before the divergence budget is enforced.
const DIVERGENCE_GRACE: usize = 100;

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "{name} must be positive, got {v}"
        )));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HmcConfig {
    pub step_size: f64,
    pub n_leapfrog: usize,
    pub mass: f64,
}

impl HmcConfig {
    pub fn new(step_size: f64, n_leapfrog: usize, mass: f64) -> Result<Self> {
        let cfg = Self {
            step_size,
            n_leapfrog,
            mass,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("step size", self.step_size)?;
        check_positive("mass", self.mass)?;
        if self.n_leapfrog < 1 {
            return Err(Error::InvalidArgument(
                "n_leapfrog must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

impl Default for HmcConfig {
    fn default() -> Self {
        Self {
            step_size: DEFAULT_STEP_SIZE,
            n_leapfrog: DEFAULT_N_LEAPFROG,
            mass: DEFAULT_MASS,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SghmcConfig {
    pub step_size: f64,
    /// Inner steps between momentum resamplings.
    pub n_leapfrog: usize,
    pub friction: f64,
    pub mass: f64,
    pub estimator: EstimatorConfig,
    /// Turning this off leaves only the damping term; for testing.
    pub inject_noise: bool,
}

impl SghmcConfig {
    pub fn new(
        step_size: f64,
        n_leapfrog: usize,
        friction: f64,
        mass: f64,
        estimator: EstimatorConfig,
    ) -> Result<Self> {
        let cfg = Self {
            step_size,
            n_leapfrog,
            friction,
            mass,
            estimator,
            inject_noise: true,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn defaults(estimator: EstimatorConfig) -> Self {
        Self {
            step_size: DEFAULT_STEP_SIZE,
            n_leapfrog: DEFAULT_N_LEAPFROG,
            friction: DEFAULT_FRICTION,
            mass: DEFAULT_MASS,
            estimator,
            inject_noise: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("step size", self.step_size)?;
        check_positive("mass", self.mass)?;
        if !(self.friction >= 0.0 && self.friction.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "friction must be non-negative, got {}",
                self.friction
            )));
        }
        if self.n_leapfrog < 1 {
            return Err(Error::InvalidArgument(
                "n_leapfrog must be at least 1".into(),
            ));
        }
        if self.estimator.n_draws < 1 {
            return Err(Error::InvalidArgument("n_draws must be at least 1".into()));
        }
        Ok(())
    }

    fn noise_sd(&self) -> f64 {
        (2.0 * self.friction * self.step_size).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainState {
    pub x: Vec<f64>,
    pub r: Vec<f64>,
    pub iter: usize,
    /// Log-density (or its estimate) and gradient at `x`, when known.
    pub current: Option<Evaluation>,
}

impl ChainState {
    pub fn new(x: Vec<f64>) -> Self {
        let r = vec![0.0; x.len()];
        Self {
            x,
            r,
            iter: 0,
            current: None,
        }
    }

    pub fn with_momentum(x: Vec<f64>, r: Vec<f64>) -> Result<Self> {
        if x.len() != r.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: r.len(),
            });
        }
        Ok(Self {
            x,
            r,
            iter: 0,
            current: None,
        })
    }

    fn resample_momentum(&mut self, mass: f64, rng: &mut RngStream) {
        let sd = mass.sqrt();
        for r in &mut self.r {
            *r = sd * rng.standard_normal();
        }
    }

    fn kinetic(&self, mass: f64) -> f64 {
        self.r.iter().map(|r| r * r).sum::<f64>() / (2.0 * mass)
    }
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|a| a.is_finite())
}

/// Leapfrog with a target returning log-density and gradient; `start` is the
/// evaluation at `state.x`. Returns the end state and the evaluation there.
fn leapfrog_eval<F>(
    target: &mut F,
    state: &ChainState,
    start: &Evaluation,
    eps: f64,
    n_steps: usize,
    mass: f64,
) -> Result<(ChainState, Evaluation)>
where
    F: FnMut(&[f64]) -> Result<Evaluation>,
{
    let mut x = state.x.clone();
    let mut r = state.r.clone();
    let mut eval = start.clone();
    for _ in 0..n_steps {
        for (ri, g) in r.iter_mut().zip(&eval.grad) {
            *ri += 0.5 * eps * g;
        }
        for (xi, ri) in x.iter_mut().zip(&r) {
            *xi += eps * ri / mass;
        }
        if !all_finite(&x) || !all_finite(&r) {
            return Err(Error::DivergentTrajectory);
        }
        eval = target(&x).map_err(|e| {
            if e.is_recoverable() {
                Error::DivergentTrajectory
            } else {
                e
            }
        })?;
        for (ri, g) in r.iter_mut().zip(&eval.grad) {
            *ri += 0.5 * eps * g;
        }
        if !all_finite(&r) {
            return Err(Error::DivergentTrajectory);
        }
    }
    let end = ChainState {
        x,
        r,
        iter: state.iter,
        current: Some(eval.clone()),
    };
    Ok((end, eval))
}

/// `n_steps` leapfrog steps; `grad` returns `∇ log p̃`.
pub fn leapfrog<F>(
    mut grad: F,
    state: &ChainState,
    eps: f64,
    n_steps: usize,
    mass: f64,
) -> Result<ChainState>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let mut target = |x: &[f64]| {
        Ok(Evaluation {
            logp: 0.0,
            grad: grad(x)?,
        })
    };
    let start = target(&state.x)?;
    let (mut end, _) = leapfrog_eval(&mut target, state, &start, eps, n_steps, mass)?;
    end.current = None;
    Ok(end)
}

/// Outcome of one HMC transition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HmcStep {
    pub accepted: bool,
    pub divergent: bool,
}

/// One HMC transition against an arbitrary target.
pub fn hmc_step_with<F>(
    target: &mut F,
    state: &ChainState,
    cfg: &HmcConfig,
    rng: &mut RngStream,
) -> Result<(ChainState, HmcStep)>
where
    F: FnMut(&[f64]) -> Result<Evaluation>,
{
    let start = match &state.current {
        Some(e) => e.clone(),
        None => target(&state.x)?,
    };
    let mut current = state.clone();
    current.current = Some(start.clone());
    current.resample_momentum(cfg.mass, rng);
    let h0 = -start.logp + current.kinetic(cfg.mass);
    let proposal = leapfrog_eval(
        target,
        &current,
        &start,
        cfg.step_size,
        cfg.n_leapfrog,
        cfg.mass,
    );
    // the uniform is drawn on every path so streams stay aligned
    let u = rng.uniform();
    current.iter += 1;
    let (prop, eval) = match proposal {
        Ok(p) => p,
        Err(Error::DivergentTrajectory) => {
            return Ok((
                current,
                HmcStep {
                    accepted: false,
                    divergent: true,
                },
            ))
        }
        Err(e) => return Err(e),
    };
    let h1 = -eval.logp + prop.kinetic(cfg.mass);
    let delta = h1 - h0;
    let divergent = delta.is_nan();
    let accept = delta.is_finite() && (delta <= 0.0 || u < (-delta).exp());
    if accept {
        let mut next = prop;
        next.iter = current.iter;
        Ok((
            next,
            HmcStep {
                accepted: true,
                divergent: false,
            },
        ))
    } else {
        Ok((
            current,
            HmcStep {
                accepted: false,
                divergent,
            },
        ))
    }
}

pub fn hmc_step(
    model: &dyn Model,
    state: &ChainState,
    cfg: &HmcConfig,
    rng: &mut RngStream,
) -> Result<(ChainState, HmcStep)> {
    if model.semantics() != SemanticsMode::Deterministic {
        return Err(Error::ModeMismatch(format!(
            "HMC needs a deterministic model, got {}",
            model.semantics()
        )));
    }
    let mut target = |x: &[f64]| evaluate(model, x, None);
    hmc_step_with(&mut target, state, cfg, rng)
}

/// Outcome of one sgHMC trajectory.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SghmcStep {
    pub divergent: bool,
    /// Gradient estimates whose importance weights were degenerate.
    pub low_ess: usize,
}

/// Runs `n_steps` inner sgHMC updates from the current momentum without
/// resampling it. On a non-finite state or a failed estimate the position
/// reverts to where the trajectory started and the momentum is resampled.
pub fn sghmc_trajectory<F>(
    estimator: &mut F,
    state: &ChainState,
    cfg: &SghmcConfig,
    n_steps: usize,
    rng: &mut RngStream,
) -> Result<(ChainState, SghmcStep)>
where
    F: FnMut(&[f64], &mut RngStream) -> Result<GradientEstimate>,
{
    let eps = cfg.step_size;
    let damping = eps * cfg.friction / cfg.mass;
    let noise = if cfg.inject_noise {
        cfg.noise_sd()
    } else {
        0.0
    };
    let mut next = state.clone();
    next.iter += 1;
    let mut info = SghmcStep::default();
    let mut cached = state.current.clone();

    let diverge = |mut s: ChainState, info: SghmcStep, rng: &mut RngStream| {
        s.x.clone_from(&state.x);
        s.current = state.current.clone();
        s.resample_momentum(cfg.mass, rng);
        (
            s,
            SghmcStep {
                divergent: true,
                ..info
            },
        )
    };

    for step in 0..=n_steps {
        let eval = match cached.take() {
            Some(e) => e,
            None => match estimator(&next.x, rng) {
                Ok(est) => {
                    if est.low_ess() {
                        info.low_ess += 1;
                    }
                    Evaluation {
                        logp: est.logp,
                        grad: est.grad,
                    }
                }
                Err(e) if e.is_recoverable() => return Ok(diverge(next, info, rng)),
                Err(e) => return Err(e),
            },
        };
        if step == n_steps {
            // estimate at the end point, reused by the next trajectory
            next.current = Some(eval);
            break;
        }
        for (ri, g) in next.r.iter_mut().zip(&eval.grad) {
            let xi = if noise > 0.0 {
                noise * rng.standard_normal()
            } else {
                0.0
            };
            *ri += eps * g - damping * *ri + xi;
        }
        for (xi, ri) in next.x.iter_mut().zip(&next.r) {
            *xi += eps * ri / cfg.mass;
        }
        if !all_finite(&next.x) || !all_finite(&next.r) {
            return Ok(diverge(next, info, rng));
        }
    }
    Ok((next, info))
}

/// Resamples the momentum, then runs `cfg.n_leapfrog` inner updates.
pub fn sghmc_step<F>(
    estimator: &mut F,
    state: &ChainState,
    cfg: &SghmcConfig,
    rng: &mut RngStream,
) -> Result<(ChainState, SghmcStep)>
where
    F: FnMut(&[f64], &mut RngStream) -> Result<GradientEstimate>,
{
    let mut start = state.clone();
    start.resample_momentum(cfg.mass, rng);
    sghmc_trajectory(estimator, &start, cfg, cfg.n_leapfrog, rng)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SamplerKind {
    Hmc,
    Sghmc,
    Mhmc,
}

impl SamplerKind {
    /// The semantics a model must declare to be run by this sampler.
    pub fn semantics(self) -> SemanticsMode {
        match self {
            SamplerKind::Hmc => SemanticsMode::Deterministic,
            SamplerKind::Sghmc => SemanticsMode::Nondeterminism,
            SamplerKind::Mhmc => SemanticsMode::Marginalization,
        }
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SamplerKind::Hmc => "hmc",
            SamplerKind::Sghmc => "sghmc",
            SamplerKind::Mhmc => "mhmc",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SamplerConfig {
    Hmc(HmcConfig),
    /// sgHMC; `estimator.mode` selects plain sgHMC or MHMC.
    Sghmc(SghmcConfig),
}

impl SamplerConfig {
    pub fn kind(&self) -> SamplerKind {
        match self {
            SamplerConfig::Hmc(_) => SamplerKind::Hmc,
            SamplerConfig::Sghmc(c) => match c.estimator.mode {
                SemanticsMode::Marginalization => SamplerKind::Mhmc,
                _ => SamplerKind::Sghmc,
            },
        }
    }

    /// Default configuration of `kind` with `n_draws` draws per estimate.
    pub fn defaults(kind: SamplerKind, n_draws: usize) -> Result<Self> {
        Ok(match kind {
            SamplerKind::Hmc => SamplerConfig::Hmc(HmcConfig::default()),
            k => SamplerConfig::Sghmc(SghmcConfig::defaults(EstimatorConfig::new(
                k.semantics(),
                n_draws,
            )?)),
        })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SamplerConfig::Hmc(c) => c.validate(),
            SamplerConfig::Sghmc(c) => {
                if c.estimator.mode == SemanticsMode::Deterministic {
                    return Err(Error::ModeMismatch(
                        "sgHMC needs a stochastic estimator".into(),
                    ));
                }
                c.validate()
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunLength {
    pub n_samples: usize,
    pub burnin: usize,
    pub thin: usize,
}

impl RunLength {
    pub fn new(n_samples: usize, burnin: usize, thin: usize) -> Result<Self> {
        if n_samples < 1 {
            return Err(Error::InvalidArgument(
                "n_samples must be at least 1".into(),
            ));
        }
        if thin < 1 {
            return Err(Error::InvalidArgument("thin must be at least 1".into()));
        }
        Ok(Self {
            n_samples,
            burnin,
            thin,
        })
    }

    pub fn total_steps(&self) -> usize {
        self.burnin + self.n_samples * self.thin
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleBatch {
    /// One row per kept state.
    pub samples: Vec<Vec<f64>>,
    /// Log-density at each kept state; an estimate for stochastic samplers.
    pub logps: Vec<f64>,
    /// Metropolis acceptance rate (HMC only).
    pub accept_rate: Option<f64>,
    pub divergences: usize,
    pub low_ess_steps: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub stream_id: u64,
}

impl SampleBatch {
    pub fn dimension(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    /// Values of coordinate `i` across kept samples.
    pub fn column(&self, i: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s[i]).collect()
    }
}

fn check_divergences(divergent: usize, steps: usize, done: bool) -> Result<()> {
    if (done || steps >= DIVERGENCE_GRACE)
        && divergent as f64 > MAX_DIVERGENT_FRACTION * steps as f64
    {
        return Err(Error::TooManyDivergences {
            divergent,
            total: steps,
        });
    }
    Ok(())
}

/// Runs one chain from `init`, discarding `burnin` steps and keeping every
/// `thin`-th state after that.
pub fn run_chain(
    model: &dyn Model,
    cfg: &SamplerConfig,
    init: &[f64],
    len: &RunLength,
    rng: &mut RngStream,
) -> Result<SampleBatch> {
    cfg.validate()?;
    check_params(model.dimension(), init)?;
    let kind = cfg.kind();
    if model.semantics() != kind.semantics() {
        return Err(Error::ModeMismatch(format!(
            "{kind} needs a {} model, got a {} one",
            kind.semantics(),
            model.semantics()
        )));
    }
    let len = RunLength::new(len.n_samples, len.burnin, len.thin)?;
    let total = len.total_steps();
    let mut state = ChainState::new(init.to_vec());
    let mut samples = Vec::with_capacity(len.n_samples);
    let mut logps = Vec::with_capacity(len.n_samples);
    let (mut divergences, mut accepted, mut low_ess) = (0usize, 0usize, 0usize);

    let mut exact = |x: &[f64]| evaluate(model, x, None);
    let mut stochastic = |x: &[f64], rng: &mut RngStream| match cfg {
        SamplerConfig::Sghmc(c) => estimate(model, x, &c.estimator, rng),
        SamplerConfig::Hmc(_) => unreachable!("HMC uses the exact target"),
    };

    for step in 1..=total {
        match cfg {
            SamplerConfig::Hmc(c) => {
                let (next, info) = hmc_step_with(&mut exact, &state, c, rng)?;
                accepted += usize::from(info.accepted);
                divergences += usize::from(info.divergent);
                state = next;
            }
            SamplerConfig::Sghmc(c) => {
                let (next, info) = sghmc_step(&mut stochastic, &state, c, rng)?;
                divergences += usize::from(info.divergent);
                low_ess += info.low_ess;
                state = next;
            }
        }
        check_divergences(divergences, step, step == total)?;
        if step > len.burnin && (step - len.burnin) % len.thin == 0 {
            let logp = match &state.current {
                Some(e) => e.logp,
                None => f64::NAN,
            };
            samples.push(state.x.clone());
            logps.push(logp);
        }
    }

    Ok(SampleBatch {
        samples,
        logps,
        accept_rate: match cfg {
            SamplerConfig::Hmc(_) => Some(accepted as f64 / total as f64),
            SamplerConfig::Sghmc(_) => None,
        },
        divergences,
        low_ess_steps: low_ess,
        n_steps: total,
        seed: rng.seed(),
        stream_id: rng.stream_id(),
    })
}

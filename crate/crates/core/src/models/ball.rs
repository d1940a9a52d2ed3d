//! Ball throw at a basket under a randomly chosen launch speed.
//!
//! The trace is `x = [logit(sin 2α)]`; the landing distance is
//! `v² sin 2α / g` and the basket distance is observed with unit noise.

use std::f64::consts::{FRAC_PI_4, FRAC_PI_8};

use crate::ad::{Tape, Var};
use crate::dist::normal_logpdf;
use crate::error::{Error, Result};
use crate::model::{draw_choices, EnumerableModel, Model, SemanticsMode};
use crate::rng::RngStream;

use super::logit_uniform_prior;

/// Gravitational acceleration used by the ball programs.
pub const GRAVITY: f64 = 9.80655;

const WEAK: usize = 0;
const STRONG: usize = 1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BallParams {
    /// Speed of a weak throw.
    pub vw: f64,
    /// Speed of a strong throw.
    pub vs: f64,
    /// Distance to the basket.
    pub basket_distance: f64,
    pub g: f64,
}

impl BallParams {
    pub fn new(vw: f64, vs: f64, basket_distance: f64) -> Result<Self> {
        for (name, v) in [("vw", vw), ("vs", vs), ("basket distance", basket_distance)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(Self {
            vw,
            vs,
            basket_distance,
            g: GRAVITY,
        })
    }

    /// Maximizer in `sin 2α` of the equal-weight average of the two
    /// log-likelihoods.
    pub fn optimal_sin2alpha(&self) -> f64 {
        let (w2, s2) = (self.vw * self.vw, self.vs * self.vs);
        self.g * self.basket_distance * (w2 + s2) / (w2 * w2 + s2 * s2)
    }

    fn landing_logp<'t>(&self, sin2alpha: Var<'t>, v: f64) -> Result<Var<'t>> {
        let d = sin2alpha * (v * v / self.g);
        // the normal log-density is symmetric in (observation - location)
        normal_logpdf(d, sin2alpha.tape().constant(1.0), self.basket_distance)
    }
}

/// Prior on the launch angle, expressed on the unconstrained scale.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BallPrior {
    /// No prior term: flat in `x`.
    #[default]
    Flat,
    /// Uniform on `sin 2α`.
    UniformSin2Alpha,
    /// `α ~ Normal(π/4, π/8)`.
    AngleNormal,
}

impl BallPrior {
    fn logp<'t>(self, x: Var<'t>, tape: &'t Tape) -> Result<Var<'t>> {
        match self {
            BallPrior::Flat => Ok(tape.constant(0.0)),
            BallPrior::UniformSin2Alpha => logit_uniform_prior(x),
            BallPrior::AngleNormal => {
                // α = asin(s)/2 with s = σ(x); log|dα/dx| =
                // ln σ(x) + ½ ln σ(-x) - ln 2 - ½ ln(1 + s)
                let s = x.sigm();
                let alpha = s.asin()? * 0.5;
                let density = normal_logpdf(alpha, tape.constant(FRAC_PI_8), FRAC_PI_4)?;
                let jac = s.ln()? + (-x).sigm().ln()? * 0.5 - 2f64.ln() - (s + 1.0).ln()? * 0.5;
                Ok(density + jac)
            }
        }
    }
}

/// Launch speed drawn inside the program: weak or strong with equal odds.
#[derive(Clone, Debug)]
pub struct BallStochastic {
    pub params: BallParams,
    pub prior: BallPrior,
}

impl BallStochastic {
    pub fn new(params: BallParams) -> Self {
        Self {
            params,
            prior: BallPrior::Flat,
        }
    }
}

impl Model for BallStochastic {
    fn dimension(&self) -> usize {
        1
    }

    fn semantics(&self) -> SemanticsMode {
        SemanticsMode::Nondeterminism
    }

    fn observe<'t>(
        &self,
        tape: &'t Tape,
        x: &[Var<'t>],
        rng: Option<&mut RngStream>,
    ) -> Result<Var<'t>> {
        let rng = rng.ok_or_else(|| Error::InvalidArgument("ball needs a random stream".into()))?;
        let choices = draw_choices(&self.choice_priors(), rng);
        self.observe_given(tape, x, &choices)
    }
}

impl EnumerableModel for BallStochastic {
    fn choice_priors(&self) -> Vec<Vec<f64>> {
        vec![vec![0.5, 0.5]]
    }

    fn observe_given<'t>(
        &self,
        tape: &'t Tape,
        x: &[Var<'t>],
        choices: &[usize],
    ) -> Result<Var<'t>> {
        let s = x[0].sigm();
        let v = match choices[0] {
            WEAK => self.params.vw,
            STRONG => self.params.vs,
            c => return Err(Error::InvalidArgument(format!("ball choice {c}"))),
        };
        Ok(self.prior.logp(x[0], tape)? + self.params.landing_logp(s, v)?)
    }
}

/// Expected log-likelihood over both speeds.
#[derive(Clone, Debug)]
pub struct BallDeterministic {
    pub params: BallParams,
    pub prior: BallPrior,
}

impl BallDeterministic {
    pub fn new(params: BallParams) -> Self {
        Self {
            params,
            prior: BallPrior::Flat,
        }
    }
}

impl Model for BallDeterministic {
    fn dimension(&self) -> usize {
        1
    }

    fn semantics(&self) -> SemanticsMode {
        SemanticsMode::Deterministic
    }

    fn observe<'t>(
        &self,
        tape: &'t Tape,
        x: &[Var<'t>],
        _rng: Option<&mut RngStream>,
    ) -> Result<Var<'t>> {
        let s = x[0].sigm();
        let weak = self.params.landing_logp(s, self.params.vw)?;
        let strong = self.params.landing_logp(s, self.params.vs)?;
        Ok(self.prior.logp(x[0], tape)? + weak * 0.5 + strong * 0.5)
    }
}

//! The three stochastic/deterministic model pairs: compensation survey, ball
//! throw, and Gaussian mixture, plus a plain Gaussian target for sampler checks.

mod ball;
pub mod data;
mod gmm;
mod survey;

pub use ball::{BallDeterministic, BallParams, BallPrior, BallStochastic, GRAVITY};
pub use gmm::{relabel_by_location, GmmData, GmmDeterministic, GmmStochastic};
pub use survey::{
    CoinSource, ConstantCoin, FairCoin, MarkovCoin, SurveyBlackbox, SurveyData,
    SurveyDeterministic, SurveyStochastic,
};

use crate::ad::{Tape, Var};
use crate::dist::normal_logpdf;
use crate::error::Result;
use crate::model::{Model, SemanticsMode};
use crate::rng::RngStream;

/// Log-density on the unconstrained scale of a uniform prior on `sigm(x)`:
/// the log-Jacobian `ln σ(x) + ln σ(-x)`.
pub fn logit_uniform_prior(x: Var<'_>) -> Result<Var<'_>> {
    Ok(x.sigm().ln()? + (-x).sigm().ln()?)
}

/// Independent normal target with the given means and unit scale.
#[derive(Clone, Debug)]
pub struct Gaussian {
    pub mean: Vec<f64>,
}

impl Gaussian {
    pub fn standard(dimension: usize) -> Self {
        Self {
            mean: vec![0.0; dimension],
        }
    }
}

impl Model for Gaussian {
    fn dimension(&self) -> usize {
        self.mean.len()
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
        let one = tape.constant(1.0);
        let mut ll = tape.constant(0.0);
        for (xi, &m) in x.iter().zip(&self.mean) {
            ll = ll + normal_logpdf(*xi, one, m)?;
        }
        Ok(ll)
    }
}

//! Randomized-response compensation survey.
//!
//! Each respondent flips a fair coin: on head they answer honestly (yes with
//! probability θ), on tail they answer by a second fair flip. The trace is
//! `x = [logit θ]`.

use std::fmt;

use crate::ad::{log_sum_exp, Tape, Var};
use crate::dist::flip_logp;
use crate::error::{Error, Result};
use crate::model::{draw_choices, EnumerableModel, Model, SemanticsMode};
use crate::rng::{sample_bernoulli, RngStream};

use super::logit_uniform_prior;

const TAIL: usize = 0;
const HEAD: usize = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct SurveyData(Vec<bool>);

impl SurveyData {
    pub fn new(answers: Vec<bool>) -> Result<Self> {
        if answers.is_empty() {
            return Err(Error::Data("survey needs at least one answer".into()));
        }
        Ok(Self(answers))
    }

    /// `yes` true answers followed by `no` false answers.
    pub fn counts(yes: usize, no: usize) -> Result<Self> {
        let mut v = vec![true; yes];
        v.extend(std::iter::repeat_n(false, no));
        Self::new(v)
    }

    pub fn answers(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn theta_prior<'t>(x: Var<'t>, enabled: bool, tape: &'t Tape) -> Result<Var<'t>> {
    if enabled {
        logit_uniform_prior(x)
    } else {
        Ok(tape.constant(0.0))
    }
}

/// One answer with the coin outcome fixed.
fn answer_logp<'t>(theta: Var<'t>, half: Var<'t>, y: bool, head: bool) -> Result<Var<'t>> {
    if head {
        flip_logp(theta, y)
    } else {
        flip_logp(half, y)
    }
}

/// Coin flips drawn inside the program and not part of the trace.
#[derive(Clone, Debug)]
pub struct SurveyStochastic {
    pub data: SurveyData,
    /// Adds a uniform prior on θ (with its logit Jacobian).
    pub theta_prior: bool,
}

impl SurveyStochastic {
    pub fn new(data: SurveyData) -> Self {
        Self {
            data,
            theta_prior: false,
        }
    }
}

impl Model for SurveyStochastic {
    fn dimension(&self) -> usize {
        1
    }

    fn semantics(&self) -> SemanticsMode {
        SemanticsMode::Marginalization
    }

    fn observe<'t>(
        &self,
        tape: &'t Tape,
        x: &[Var<'t>],
        rng: Option<&mut RngStream>,
    ) -> Result<Var<'t>> {
        let rng =
            rng.ok_or_else(|| Error::InvalidArgument("survey needs a random stream".into()))?;
        let choices = draw_choices(&self.choice_priors(), rng);
        self.observe_given(tape, x, &choices)
    }
}

impl EnumerableModel for SurveyStochastic {
    fn choice_priors(&self) -> Vec<Vec<f64>> {
        vec![vec![0.5, 0.5]; self.data.len()]
    }

    fn observe_given<'t>(
        &self,
        tape: &'t Tape,
        x: &[Var<'t>],
        choices: &[usize],
    ) -> Result<Var<'t>> {
        let theta = x[0].sigm();
        let half = tape.constant(0.5);
        let mut ll = theta_prior(x[0], self.theta_prior, tape)?;
        for (&y, &c) in self.data.answers().iter().zip(choices) {
            let head = match c {
                HEAD => true,
                TAIL => false,
                c => return Err(Error::InvalidArgument(format!("coin choice {c}"))),
            };
            ll = ll + answer_logp(theta, half, y, head)?;
        }
        Ok(ll)
    }
}

/// The coin marginalized by hand.
#[derive(Clone, Debug)]
pub struct SurveyDeterministic {
    pub data: SurveyData,
    pub theta_prior: bool,
}

impl SurveyDeterministic {
    pub fn new(data: SurveyData) -> Self {
        Self {
            data,
            theta_prior: false,
        }
    }
}

impl Model for SurveyDeterministic {
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
        let theta = x[0].sigm();
        let half = tape.constant(0.5);
        let ln_half = 0.5f64.ln();
        let mut ll = theta_prior(x[0], self.theta_prior, tape)?;
        for &y in self.data.answers() {
            let tail = answer_logp(theta, half, y, false)? + ln_half;
            let term = match answer_logp(theta, half, y, true) {
                Ok(head) => log_sum_exp(head + ln_half, tail),
                // saturated θ: the honest branch has probability zero
                Err(Error::EvaluationImpossible { .. }) => tail,
                Err(e) => return Err(e),
            };
            ll = ll + term;
        }
        Ok(ll)
    }
}

/// A stationary source of coin flips whose law the model does not know.
pub trait CoinSource: Send + Sync {
    /// Per-program-run state, e.g. the previous flip of a correlated source.
    type State: Default;

    fn next(&self, state: &mut Self::State, rng: &mut RngStream) -> bool;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct FairCoin;

impl CoinSource for FairCoin {
    type State = ();

    fn next(&self, _: &mut (), rng: &mut RngStream) -> bool {
        rng.uniform() >= 0.5
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ConstantCoin(pub bool);

impl CoinSource for ConstantCoin {
    type State = ();

    fn next(&self, _: &mut (), _: &mut RngStream) -> bool {
        self.0
    }
}

/// Two-state Markov chain over coin outcomes, started from its stationary
/// (fair) distribution; each flip repeats the previous one with
/// probability `stay`.
#[derive(Clone, Copy, Debug)]
pub struct MarkovCoin {
    pub stay: f64,
}

impl MarkovCoin {
    pub fn new(stay: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&stay) {
            return Err(Error::InvalidArgument(format!("stay probability {stay}")));
        }
        Ok(Self { stay })
    }
}

impl CoinSource for MarkovCoin {
    type State = Option<bool>;

    fn next(&self, state: &mut Option<bool>, rng: &mut RngStream) -> bool {
        let flip = match *state {
            None => rng.uniform() >= 0.5,
            // `stay` is validated at construction
            Some(prev) => {
                if sample_bernoulli(rng, self.stay).unwrap_or(true) {
                    prev
                } else {
                    !prev
                }
            }
        };
        *state = Some(flip);
        flip
    }
}

/// The survey with coins from an opaque source; no deterministic counterpart.
#[derive(Clone, Debug)]
pub struct SurveyBlackbox<C> {
    pub data: SurveyData,
    pub coins: C,
    pub theta_prior: bool,
}

impl<C: CoinSource> SurveyBlackbox<C> {
    pub fn new(data: SurveyData, coins: C) -> Self {
        Self {
            data,
            coins,
            theta_prior: false,
        }
    }
}

impl<C: CoinSource> Model for SurveyBlackbox<C> {
    fn dimension(&self) -> usize {
        1
    }

    fn semantics(&self) -> SemanticsMode {
        SemanticsMode::Marginalization
    }

    fn observe<'t>(
        &self,
        tape: &'t Tape,
        x: &[Var<'t>],
        rng: Option<&mut RngStream>,
    ) -> Result<Var<'t>> {
        let rng =
            rng.ok_or_else(|| Error::InvalidArgument("survey needs a random stream".into()))?;
        let theta = x[0].sigm();
        let half = tape.constant(0.5);
        let mut ll = theta_prior(x[0], self.theta_prior, tape)?;
        let mut state = C::State::default();
        for &y in self.data.answers() {
            let head = self.coins.next(&mut state, rng);
            ll = ll + answer_logp(theta, half, y, head)?;
        }
        Ok(ll)
    }
}

impl fmt::Display for SurveyData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let yes = self.0.iter().filter(|&&y| y).count();
        write!(f, "{yes} yes / {} no", self.0.len() - yes)
    }
}

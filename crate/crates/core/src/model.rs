//! The contract every probabilistic program implements.
//!
//! A [`Model`] maps an unconstrained parameter vector to an unnormalized
//! log-probability. A stochastic model draws its nuisance randomness from the
//! [`RngStream`] it is handed, so each call returns one realization of a
//! random log-probability.

use std::cell::RefCell;
use std::fmt;

use crate::ad::{Tape, Var};
use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SemanticsMode {
    Deterministic,
    /// Nuisance randomness is integrated out of the density.
    Marginalization,
    /// The density must hold in expectation over all nondeterministic outcomes.
    Nondeterminism,
}

impl fmt::Display for SemanticsMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SemanticsMode::Deterministic => "deterministic",
            SemanticsMode::Marginalization => "marginalization",
            SemanticsMode::Nondeterminism => "nondeterminism",
        };
        f.write_str(s)
    }
}

pub trait Model: Send + Sync {
    fn dimension(&self) -> usize;

    fn semantics(&self) -> SemanticsMode;

    /// Log-probability of `x`, recorded on `tape`. Deterministic models must
    /// not touch `rng`; stochastic models draw from it.
    fn observe<'t>(
        &self,
        tape: &'t Tape,
        x: &[Var<'t>],
        rng: Option<&mut RngStream>,
    ) -> Result<Var<'t>>;

    fn is_stochastic(&self) -> bool {
        self.semantics() != SemanticsMode::Deterministic
    }
}

/// A stochastic model whose nuisance randomness is a finite sequence of
/// independent discrete choices.
pub trait EnumerableModel: Model {
    /// Prior probabilities of the outcomes of each choice.
    fn choice_priors(&self) -> Vec<Vec<f64>>;

    /// Log-probability with every choice fixed; `choices[k]` indexes into
    /// `choice_priors()[k]`.
    fn observe_given<'t>(
        &self,
        tape: &'t Tape,
        x: &[Var<'t>],
        choices: &[usize],
    ) -> Result<Var<'t>>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub logp: f64,
    pub grad: Vec<f64>,
}

thread_local! {
    static TAPE: RefCell<Tape> = RefCell::new(Tape::new());
}

pub fn check_params(dimension: usize, x: &[f64]) -> Result<()> {
    if x.len() != dimension {
        return Err(Error::DimensionMismatch {
            expected: dimension,
            got: x.len(),
        });
    }
    if let Some(v) = x.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite parameter {v}")));
    }
    Ok(())
}

/// Turns a recorded log-probability into an [`Evaluation`].
pub(crate) fn finish(tape: &Tape, logp: Var<'_>, inputs: &[Var<'_>]) -> Result<Evaluation> {
    let v = logp.value();
    if v == f64::NEG_INFINITY {
        tape.reset();
        return Err(Error::impossible("log-probability"));
    }
    if v.is_nan() {
        tape.reset();
        return Err(Error::Numerical("log-probability is NaN".into()));
    }
    let grad = tape.gradient(logp, inputs)?;
    Ok(Evaluation { logp: v, grad })
}

/// Evaluates `model` at `x` on a caller-owned tape.
pub fn evaluate_on(
    tape: &Tape,
    model: &dyn Model,
    x: &[f64],
    rng: Option<&mut RngStream>,
) -> Result<Evaluation> {
    check_params(model.dimension(), x)?;
    if model.is_stochastic() && rng.is_none() {
        return Err(Error::InvalidArgument(
            "stochastic model evaluated without a random stream".into(),
        ));
    }
    if !tape.is_empty() {
        return Err(Error::TapeInUse(tape.len()));
    }
    let vars = tape.vars(x);
    let rng = if model.is_stochastic() { rng } else { None };
    let logp = match model.observe(tape, &vars, rng) {
        Ok(v) => v,
        Err(e) => {
            tape.reset();
            return Err(e);
        }
    };
    finish(tape, logp, &vars)
}

/// Evaluates `model` at `x` on this thread's tape.
pub fn evaluate(model: &dyn Model, x: &[f64], rng: Option<&mut RngStream>) -> Result<Evaluation> {
    TAPE.with(|t| match t.try_borrow_mut() {
        Ok(tape) => evaluate_on(&tape, model, x, rng),
        // re-entrant call from inside an observe
        Err(_) => evaluate_on(&Tape::new(), model, x, rng),
    })
}

/// `count` independent evaluations, each consuming fresh draws.
pub fn evaluate_batch(
    model: &dyn Model,
    x: &[f64],
    rng: &mut RngStream,
    count: usize,
) -> Result<Vec<Evaluation>> {
    if count < 1 {
        return Err(Error::InvalidArgument("count must be at least 1".into()));
    }
    if !model.is_stochastic() {
        return Err(Error::ModeMismatch(
            "batch evaluation requires a stochastic model".into(),
        ));
    }
    (0..count)
        .map(|index| {
            evaluate(model, x, Some(rng)).map_err(|e| Error::Draw {
                index,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Evaluates an enumerable model with all choices fixed.
pub fn evaluate_given(
    model: &dyn EnumerableModel,
    x: &[f64],
    choices: &[usize],
) -> Result<Evaluation> {
    check_params(model.dimension(), x)?;
    let tape = Tape::new();
    let vars = tape.vars(x);
    let logp = model.observe_given(&tape, &vars, choices)?;
    finish(&tape, logp, &vars)
}

/// Draws one outcome per choice from the priors of an enumerable model.
pub fn draw_choices(priors: &[Vec<f64>], rng: &mut RngStream) -> Vec<usize> {
    priors
        .iter()
        .map(|p| {
            let u = rng.uniform();
            let mut acc = 0.0;
            for (k, w) in p.iter().enumerate() {
                acc += w;
                if u < acc {
                    return k;
                }
            }
            p.len() - 1
        })
        .collect()
}

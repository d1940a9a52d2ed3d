//! Brute-force references: central finite differences, 1-D grid posteriors,
//! and exhaustive enumeration of nuisance choices.

use crate::error::{Error, Result};
use crate::model::{evaluate_given, EnumerableModel};

/// Default finite-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Maximum number of nuisance assignments [`enumerate_outcomes`] visits.
pub const ENUMERATION_BUDGET: usize = 1_000_000;

/// Central differences `(f(x + h eᵢ) - f(x - h eᵢ)) / 2h`.
pub fn finite_diff_grad<F>(mut f: F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("step {h}")));
    }
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let up = f(&probe)?;
        probe[i] = x[i] - h;
        let down = f(&probe)?;
        probe[i] = x[i];
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::Numerical(format!(
                "objective not finite near coordinate {i}"
            )));
        }
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}

/// Uniform grid on `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid1D {
    pub lo: f64,
    pub hi: f64,
    pub n_points: usize,
}

impl Grid1D {
    pub fn new(lo: f64, hi: f64, n_points: usize) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidArgument(format!("grid bounds [{lo}, {hi}]")));
        }
        if n_points < 3 {
            return Err(Error::InvalidArgument(
                "grid needs at least 3 points".into(),
            ));
        }
        Ok(Self { lo, hi, n_points })
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.n_points - 1) as f64
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        let h = self.step();
        (0..self.n_points).map(move |i| {
            if i + 1 == self.n_points {
                self.hi
            } else {
                self.lo + h * i as f64
            }
        })
    }
}

/// Posterior mean and normalizer of `exp(logpost)` over the grid by the
/// trapezoid rule. The normalizer is reported relative to the grid maximum
/// of `logpost`, i.e. it is `∫ exp(logpost - max)`.
pub fn grid_posterior_mean<F>(mut logpost: F, grid: &Grid1D) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    let pts: Vec<f64> = grid.points().collect();
    let lp: Vec<f64> = pts.iter().map(|&t| logpost(t)).collect();
    if let Some((t, v)) = pts.iter().zip(&lp).find(|(_, v)| !v.is_finite()) {
        return Err(Error::Numerical(format!("log posterior {v} at {t}")));
    }
    let max = lp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let h = grid.step();
    let (mut z, mut m) = (0.0, 0.0);
    for (i, (&t, &l)) in pts.iter().zip(&lp).enumerate() {
        let w = if i == 0 || i + 1 == pts.len() {
            0.5
        } else {
            1.0
        };
        let p = w * (l - max).exp();
        z += p;
        m += p * t;
    }
    if !(z > 0.0) {
        return Err(Error::Numerical("zero normalizer".into()));
    }
    Ok((m / z, z * h))
}

/// One nuisance assignment with its prior weight and the model's
/// log-probability and gradient under it. Impossible assignments carry
/// `logp = -inf` and a zero gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub choices: Vec<usize>,
    pub weight: f64,
    pub logp: f64,
    pub grad: Vec<f64>,
}

impl Outcome {
    pub fn is_possible(&self) -> bool {
        self.logp > f64::NEG_INFINITY
    }
}

/// Every assignment of the model's nuisance choices.
pub fn enumerate_outcomes(model: &dyn EnumerableModel, x: &[f64]) -> Result<Vec<Outcome>> {
    let priors = model.choice_priors();
    let mut total: usize = 1;
    for p in &priors {
        if p.is_empty() {
            return Err(Error::InvalidArgument("choice with no outcomes".into()));
        }
        let s: f64 = p.iter().sum();
        if (s - 1.0).abs() > 1e-12 || p.iter().any(|w| *w < 0.0) {
            return Err(Error::InvalidArgument(format!("choice weights sum to {s}")));
        }
        total = total
            .checked_mul(p.len())
            .filter(|&t| t <= ENUMERATION_BUDGET)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "more than {ENUMERATION_BUDGET} nuisance assignments"
                ))
            })?;
    }
    let mut out = Vec::with_capacity(total);
    let mut choices = vec![0usize; priors.len()];
    for _ in 0..total {
        let weight: f64 = priors.iter().zip(&choices).map(|(p, &c)| p[c]).product();
        let (logp, grad) = match evaluate_given(model, x, &choices) {
            Ok(e) => (e.logp, e.grad),
            Err(Error::EvaluationImpossible { .. }) => (f64::NEG_INFINITY, vec![0.0; x.len()]),
            Err(e) => return Err(e),
        };
        out.push(Outcome {
            choices: choices.clone(),
            weight,
            logp,
            grad,
        });
        // odometer increment, first choice fastest
        for (c, p) in choices.iter_mut().zip(&priors) {
            *c += 1;
            if *c < p.len() {
                break;
            }
            *c = 0;
        }
    }
    Ok(out)
}

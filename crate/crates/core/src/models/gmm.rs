//! Gaussian mixture with equal, fixed weights.
//!
//! The trace interleaves component locations and log-scales:
//! `x = [μ₀, ln σ₀, μ₁, ln σ₁, …]`.

use crate::ad::{log_sum_exp, Tape, Var};
use crate::dist::normal_logpdf;
use crate::error::{Error, Result};
use crate::model::{EnumerableModel, Model, SemanticsMode};
use crate::rng::{sample_uniform_int, RngStream};

#[derive(Clone, Debug, PartialEq)]
pub struct GmmData {
    pub data: Vec<f64>,
    pub n_comp: usize,
}

impl GmmData {
    pub fn new(data: Vec<f64>, n_comp: usize) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Data("mixture needs at least one observation".into()));
        }
        if n_comp < 1 {
            return Err(Error::InvalidArgument(
                "mixture needs at least one component".into(),
            ));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite observation {v}")));
        }
        Ok(Self { data, n_comp })
    }

    pub fn dimension(&self) -> usize {
        2 * self.n_comp
    }

    /// Locations at evenly spaced sample quantiles, scales at the sample
    /// standard deviation.
    pub fn initial_point(&self) -> Vec<f64> {
        let mut sorted = self.data.clone();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let mean = sorted.iter().sum::<f64>() / n as f64;
        let var = sorted.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n as f64;
        let log_sd = if var > 0.0 { 0.5 * var.ln() } else { 0.0 };
        let mut x = Vec::with_capacity(self.dimension());
        for j in 0..self.n_comp {
            let q = (j as f64 + 0.5) / self.n_comp as f64;
            let idx = ((q * n as f64) as usize).min(n - 1);
            x.push(sorted[idx]);
            x.push(log_sd);
        }
        x
    }

    fn components<'t>(&self, x: &[Var<'t>]) -> Vec<(Var<'t>, Var<'t>)> {
        (0..self.n_comp)
            .map(|j| (x[2 * j], x[2 * j + 1].exp()))
            .collect()
    }
}

/// Sorts the `(μ, ln σ)` pairs of one sample by location, which removes the
/// label-switching symmetry of the mixture posterior.
pub fn relabel_by_location(x: &[f64]) -> Vec<f64> {
    let mut pairs: Vec<[f64; 2]> = x.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
    pairs.sort_by(|a, b| a[0].total_cmp(&b[0]));
    pairs.into_iter().flatten().collect()
}

/// Each observation's component is drawn uniformly inside the program.
#[derive(Clone, Debug)]
pub struct GmmStochastic {
    pub data: GmmData,
}

impl GmmStochastic {
    pub fn new(data: GmmData) -> Self {
        Self { data }
    }
}

impl Model for GmmStochastic {
    fn dimension(&self) -> usize {
        self.data.dimension()
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
            rng.ok_or_else(|| Error::InvalidArgument("mixture needs a random stream".into()))?;
        let k = self.data.n_comp as i64;
        let choices = (0..self.data.data.len())
            .map(|_| sample_uniform_int(rng, k))
            .collect::<Result<Vec<_>>>()?;
        self.observe_given(tape, x, &choices)
    }
}

impl EnumerableModel for GmmStochastic {
    fn choice_priors(&self) -> Vec<Vec<f64>> {
        let k = self.data.n_comp;
        vec![vec![1.0 / k as f64; k]; self.data.data.len()]
    }

    fn observe_given<'t>(
        &self,
        tape: &'t Tape,
        x: &[Var<'t>],
        choices: &[usize],
    ) -> Result<Var<'t>> {
        let comps = self.data.components(x);
        let mut ll = tape.constant(0.0);
        for (&d, &j) in self.data.data.iter().zip(choices) {
            let (mu, sigma) = comps[j];
            ll = ll + normal_logpdf(mu, sigma, d)?;
        }
        Ok(ll)
    }
}

/// Mixture likelihood with components summed out per observation. The sum
/// carries no 1/K weight, so it exceeds the normalized likelihood by
/// `n ln K`, a constant.
#[derive(Clone, Debug)]
pub struct GmmDeterministic {
    pub data: GmmData,
}

impl GmmDeterministic {
    pub fn new(data: GmmData) -> Self {
        Self { data }
    }
}

impl Model for GmmDeterministic {
    fn dimension(&self) -> usize {
        self.data.dimension()
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
        let comps = self.data.components(x);
        let mut ll = tape.constant(0.0);
        for &d in &self.data.data {
            let mut l = normal_logpdf(comps[0].0, comps[0].1, d)?;
            for &(mu, sigma) in &comps[1..] {
                l = log_sum_exp(l, normal_logpdf(mu, sigma, d)?);
            }
            ll = ll + l;
        }
        Ok(ll)
    }
}

//! Gradient estimators for `∇ₓ log p̃(x|y)` under the three semantics.
//!
//! * deterministic: one exact evaluation;
//! * nondeterminism: unweighted mean of per-draw gradients with the nuisance
//!   drawn from its prior, an unbiased estimate of the gradient of the
//!   expected log-density;
//! * marginalization: self-normalized importance sampling with the program's
//!   own prior as proposal, i.e. per-draw gradients weighted by
//!   `softmax(logp₁, …, logp_N)`.
//!
//! The `logp` reported with a marginalization estimate is
//! `logsumexp(logpᵢ) - ln N`, which is biased low as a log estimate and only
//! meant for diagnostics.

use crate::ad::log_sum_exp_slice;
use crate::error::{Error, Result};
use crate::model::{evaluate, EnumerableModel, Evaluation, Model, SemanticsMode};
use crate::oracles::enumerate_outcomes;
use crate::rng::RngStream;

/// Fraction of `n_draws` below which the effective sample size is flagged.
pub const LOW_ESS_FRACTION: f64 = 0.1;

/// Default draws per marginalization estimate.
pub const DEFAULT_MHMC_DRAWS: usize = 10;
/// Default draws per nondeterminism estimate.
pub const DEFAULT_SGHMC_DRAWS: usize = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct GradientEstimate {
    pub grad: Vec<f64>,
    pub logp: f64,
    pub n_draws: usize,
    /// Effective sample size of the importance weights (marginalization only).
    pub ess: Option<f64>,
}

impl GradientEstimate {
    pub fn low_ess(&self) -> bool {
        self.ess
            .is_some_and(|e| e < LOW_ESS_FRACTION * self.n_draws as f64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimatorConfig {
    pub n_draws: usize,
    pub mode: SemanticsMode,
}

impl EstimatorConfig {
    pub fn new(mode: SemanticsMode, n_draws: usize) -> Result<Self> {
        if n_draws < 1 {
            return Err(Error::InvalidArgument("n_draws must be at least 1".into()));
        }
        Ok(Self { n_draws, mode })
    }

    pub fn default_for(mode: SemanticsMode) -> Self {
        let n_draws = match mode {
            SemanticsMode::Marginalization => DEFAULT_MHMC_DRAWS,
            _ => DEFAULT_SGHMC_DRAWS,
        };
        Self { n_draws, mode }
    }
}

fn expect_mode(model: &dyn Model, mode: SemanticsMode) -> Result<()> {
    if model.semantics() != mode {
        return Err(Error::ModeMismatch(format!(
            "estimator for {mode} applied to a {} model",
            model.semantics()
        )));
    }
    Ok(())
}

fn check_draws(n: usize) -> Result<()> {
    if n < 1 {
        return Err(Error::InvalidArgument("n_draws must be at least 1".into()));
    }
    Ok(())
}

pub fn exact_gradient(model: &dyn Model, x: &[f64]) -> Result<GradientEstimate> {
    expect_mode(model, SemanticsMode::Deterministic)?;
    let e = evaluate(model, x, None)?;
    Ok(GradientEstimate {
        grad: e.grad,
        logp: e.logp,
        n_draws: 1,
        ess: None,
    })
}

pub fn nondeterminism_gradient(
    model: &dyn Model,
    x: &[f64],
    cfg: &EstimatorConfig,
    rng: &mut RngStream,
) -> Result<GradientEstimate> {
    expect_mode(model, SemanticsMode::Nondeterminism)?;
    check_draws(cfg.n_draws)?;
    let n = cfg.n_draws;
    let mut grad = vec![0.0; x.len()];
    let mut logp = 0.0;
    for index in 0..n {
        let e = evaluate(model, x, Some(rng)).map_err(|e| Error::Draw {
            index,
            source: Box::new(e),
        })?;
        logp += e.logp;
        for (g, d) in grad.iter_mut().zip(&e.grad) {
            *g += d;
        }
    }
    let inv = 1.0 / n as f64;
    grad.iter_mut().for_each(|g| *g *= inv);
    Ok(GradientEstimate {
        grad,
        logp: logp * inv,
        n_draws: n,
        ess: None,
    })
}

/// Per-draw evaluations for a marginalization estimate. Impossible draws are
/// kept as `None`: they carry zero importance weight.
pub fn marginalization_draws(
    model: &dyn Model,
    x: &[f64],
    n_draws: usize,
    rng: &mut RngStream,
) -> Result<Vec<Option<Evaluation>>> {
    check_draws(n_draws)?;
    (0..n_draws)
        .map(|index| match evaluate(model, x, Some(rng)) {
            Ok(e) => Ok(Some(e)),
            Err(Error::EvaluationImpossible { .. }) => Ok(None),
            Err(e) => Err(Error::Draw {
                index,
                source: Box::new(e),
            }),
        })
        .collect()
}

/// Self-normalized importance-sampling combination of draws taken from the
/// nuisance prior.
pub fn combine_importance_weighted(draws: &[Option<Evaluation>]) -> Result<GradientEstimate> {
    check_draws(draws.len())?;
    let logps: Vec<f64> = draws
        .iter()
        .map(|d| d.as_ref().map_or(f64::NEG_INFINITY, |e| e.logp))
        .collect();
    let lse = log_sum_exp_slice(&logps);
    if lse == f64::NEG_INFINITY {
        return Err(Error::impossible(format!(
            "all {} nuisance draws",
            draws.len()
        )));
    }
    let dim = draws.iter().flatten().next().map_or(0, |e| e.grad.len());
    let mut grad = vec![0.0; dim];
    let mut sum_sq = 0.0;
    for e in draws.iter().flatten() {
        let w = (e.logp - lse).exp();
        sum_sq += w * w;
        for (g, d) in grad.iter_mut().zip(&e.grad) {
            *g += w * d;
        }
    }
    let n = draws.len();
    Ok(GradientEstimate {
        grad,
        logp: lse - (n as f64).ln(),
        n_draws: n,
        ess: Some((1.0 / sum_sq).clamp(1.0, n as f64)),
    })
}

pub fn marginalization_gradient(
    model: &dyn Model,
    x: &[f64],
    cfg: &EstimatorConfig,
    rng: &mut RngStream,
) -> Result<GradientEstimate> {
    expect_mode(model, SemanticsMode::Marginalization)?;
    let draws = marginalization_draws(model, x, cfg.n_draws, rng)?;
    combine_importance_weighted(&draws)
}

/// Dispatches on the configured mode.
pub fn estimate(
    model: &dyn Model,
    x: &[f64],
    cfg: &EstimatorConfig,
    rng: &mut RngStream,
) -> Result<GradientEstimate> {
    match cfg.mode {
        SemanticsMode::Deterministic => exact_gradient(model, x),
        SemanticsMode::Nondeterminism => nondeterminism_gradient(model, x, cfg, rng),
        SemanticsMode::Marginalization => marginalization_gradient(model, x, cfg, rng),
    }
}

/// Exact value of either stochastic-gradient integral over a finite nuisance
/// space.
pub fn enumerated_gradient(
    model: &dyn EnumerableModel,
    x: &[f64],
    mode: SemanticsMode,
) -> Result<GradientEstimate> {
    let outcomes = enumerate_outcomes(model, x)?;
    let total: f64 = outcomes.iter().map(|o| o.weight).sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "outcome weights sum to {total}"
        )));
    }
    let dim = x.len();
    let n = outcomes.len();
    match mode {
        SemanticsMode::Deterministic => Err(Error::ModeMismatch(
            "enumeration needs a stochastic semantics".into(),
        )),
        SemanticsMode::Nondeterminism => {
            let mut grad = vec![0.0; dim];
            let mut logp = 0.0;
            for o in &outcomes {
                if !o.is_possible() {
                    return Err(Error::impossible(format!(
                        "nuisance assignment {:?}",
                        o.choices
                    )));
                }
                logp += o.weight * o.logp;
                for (g, d) in grad.iter_mut().zip(&o.grad) {
                    *g += o.weight * d;
                }
            }
            Ok(GradientEstimate {
                grad,
                logp,
                n_draws: n,
                ess: None,
            })
        }
        SemanticsMode::Marginalization => {
            let joint: Vec<f64> = outcomes
                .iter()
                .map(|o| {
                    if o.weight > 0.0 {
                        o.weight.ln() + o.logp
                    } else {
                        f64::NEG_INFINITY
                    }
                })
                .collect();
            let lse = log_sum_exp_slice(&joint);
            if lse == f64::NEG_INFINITY {
                return Err(Error::impossible("every nuisance assignment"));
            }
            let mut grad = vec![0.0; dim];
            let mut sum_sq = 0.0;
            for (o, j) in outcomes.iter().zip(&joint) {
                let w = (j - lse).exp();
                if w == 0.0 {
                    continue;
                }
                sum_sq += w * w;
                for (g, d) in grad.iter_mut().zip(&o.grad) {
                    *g += w * d;
                }
            }
            Ok(GradientEstimate {
                grad,
                logp: lse,
                n_draws: n,
                ess: Some((1.0 / sum_sq).clamp(1.0, n as f64)),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ad::{sigmoid, Tape, Var};
    use crate::models::{
        BallDeterministic, BallParams, BallStochastic, GmmData, GmmDeterministic, GmmStochastic,
        SurveyData, SurveyDeterministic, SurveyStochastic,
    };

    fn survey(n_true: usize, n_false: usize) -> SurveyData {
        SurveyData::counts(n_true, n_false).unwrap()
    }

    fn ball_params() -> BallParams {
        BallParams::new(8.0, 10.0, 8.0).unwrap()
    }

    #[test]
    fn exact_on_survey() {
        let m = SurveyDeterministic::new(survey(1, 0));
        let e = exact_gradient(&m, &[0.0]).unwrap();
        assert!((e.logp - (-std::f64::consts::LN_2)).abs() < 1e-7);
        assert_eq!(e.n_draws, 1);
        assert!(e.ess.is_none());
    }

    #[test]
    fn exact_rejects_stochastic() {
        let m = SurveyStochastic::new(survey(1, 0));
        assert!(matches!(
            exact_gradient(&m, &[0.0]),
            Err(Error::ModeMismatch(_))
        ));
        let mut rng = RngStream::new(0);
        let cfg = EstimatorConfig::new(SemanticsMode::Nondeterminism, 3).unwrap();
        assert!(matches!(
            nondeterminism_gradient(&m, &[0.0], &cfg, &mut rng),
            Err(Error::ModeMismatch(_))
        ));
    }

    #[test]
    fn exact_on_perfect_ball() {
        let v = 9.0;
        let m =
            BallDeterministic::new(BallParams::new(v, v, v * v / crate::models::GRAVITY).unwrap());
        let e = exact_gradient(&m, &[40.0]).unwrap();
        assert!((e.logp + crate::dist::LN_SQRT_2PI).abs() < 1e-12);
    }

    #[test]
    fn exact_single_component_gmm() {
        let data = GmmData::new(vec![0.1, 0.9, -0.4], 1).unwrap();
        let m = GmmDeterministic::new(data.clone());
        let e = exact_gradient(&m, &[0.3, 0.2]).unwrap();
        let s = 0.2f64.exp();
        let expect: f64 = data
            .data
            .iter()
            .map(|d| -s.ln() - crate::dist::LN_SQRT_2PI - 0.5 * ((d - 0.3) / s).powi(2))
            .sum();
        assert!((e.logp - expect).abs() < 1e-12);
    }

    #[test]
    fn config_rejects_zero_draws() {
        assert!(EstimatorConfig::new(SemanticsMode::Marginalization, 0).is_err());
        let m = BallStochastic::new(ball_params());
        let cfg = EstimatorConfig {
            n_draws: 0,
            mode: SemanticsMode::Nondeterminism,
        };
        assert!(nondeterminism_gradient(&m, &[0.0], &cfg, &mut RngStream::new(1)).is_err());
    }

    #[test]
    fn ball_enumeration_equals_deterministic() {
        let st = BallStochastic::new(ball_params());
        let det = BallDeterministic::new(ball_params());
        for &x in &[-0.7, 0.0, 1.1, 2.4] {
            let en = enumerated_gradient(&st, &[x], SemanticsMode::Nondeterminism).unwrap();
            let ex = exact_gradient(&det, &[x]).unwrap();
            assert!((en.grad[0] - ex.grad[0]).abs() < 1e-12);
            assert!((en.logp - ex.logp).abs() < 1e-12);
        }
    }

    #[test]
    fn survey_enumeration_equals_deterministic() {
        let y = SurveyData::new(vec![true, false, true]).unwrap();
        let st = SurveyStochastic::new(y.clone());
        let det = SurveyDeterministic::new(y);
        for &x in &[-2.0, -0.3, 0.0, 0.9, 3.3] {
            let en = enumerated_gradient(&st, &[x], SemanticsMode::Marginalization).unwrap();
            let ex = exact_gradient(&det, &[x]).unwrap();
            assert!((en.grad[0] - ex.grad[0]).abs() < 1e-10);
            assert!((en.logp - ex.logp).abs() < 1e-10);
        }
    }

    #[test]
    fn survey_single_observation_closed_form() {
        // ∂/∂θ of the marginal: 0.5 / (0.5θ + 0.25); at θ = ½ it is 1
        let st = SurveyStochastic::new(survey(1, 0));
        let en = enumerated_gradient(&st, &[0.0], SemanticsMode::Marginalization).unwrap();
        let theta = 0.5;
        let dtheta_dx = theta * (1.0 - theta);
        assert!((en.grad[0] / dtheta_dx - 1.0).abs() < 1e-12);
        for &x in &[-1.0, 0.6, 2.0] {
            let t = sigmoid(x);
            let en = enumerated_gradient(&st, &[x], SemanticsMode::Marginalization).unwrap();
            let expect = 0.5 / (0.5 * t + 0.25) * t * (1.0 - t);
            assert!((en.grad[0] - expect).abs() < 1e-12);
        }
    }

    struct OneBranch;

    impl Model for OneBranch {
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
            _: Option<&mut RngStream>,
        ) -> Result<Var<'t>> {
            self.observe_given(tape, x, &[0])
        }
    }

    impl EnumerableModel for OneBranch {
        fn choice_priors(&self) -> Vec<Vec<f64>> {
            vec![vec![1.0]]
        }
        fn observe_given<'t>(&self, _: &'t Tape, x: &[Var<'t>], _: &[usize]) -> Result<Var<'t>> {
            Ok(x[0] * x[0] * -0.5 + x[0].sin())
        }
    }

    struct BadWeights;

    impl Model for BadWeights {
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
            _: Option<&mut RngStream>,
        ) -> Result<Var<'t>> {
            self.observe_given(tape, x, &[0])
        }
    }

    impl EnumerableModel for BadWeights {
        fn choice_priors(&self) -> Vec<Vec<f64>> {
            vec![vec![0.5, 0.4]]
        }
        fn observe_given<'t>(&self, _: &'t Tape, x: &[Var<'t>], _: &[usize]) -> Result<Var<'t>> {
            Ok(x[0])
        }
    }

    #[test]
    fn single_branch_both_modes() {
        let x = [0.4f64];
        let direct = -x[0] + x[0].cos();
        for mode in [
            SemanticsMode::Marginalization,
            SemanticsMode::Nondeterminism,
        ] {
            let en = enumerated_gradient(&OneBranch, &x, mode).unwrap();
            assert!((en.grad[0] - direct).abs() < 1e-15);
        }
        assert!(enumerated_gradient(&OneBranch, &x, SemanticsMode::Deterministic).is_err());
    }

    #[test]
    fn unnormalized_weights_rejected() {
        assert!(enumerated_gradient(&BadWeights, &[0.0], SemanticsMode::Marginalization).is_err());
    }

    #[test]
    fn single_draw_degenerates() {
        let st = SurveyStochastic::new(survey(3, 2));
        let cfg = EstimatorConfig::new(SemanticsMode::Marginalization, 1).unwrap();
        let mut a = RngStream::new(13);
        let mut b = RngStream::new(13);
        let est = marginalization_gradient(&st, &[0.4], &cfg, &mut a).unwrap();
        let one = evaluate(&st, &[0.4], Some(&mut b)).unwrap();
        assert_eq!(est.grad, one.grad);
        assert_eq!(est.ess, Some(1.0));

        let ball = BallStochastic::new(ball_params());
        let cfg = EstimatorConfig::new(SemanticsMode::Nondeterminism, 1).unwrap();
        let mut a = RngStream::new(21);
        let mut b = RngStream::new(21);
        let est = nondeterminism_gradient(&ball, &[0.4], &cfg, &mut a).unwrap();
        let one = evaluate(&ball, &[0.4], Some(&mut b)).unwrap();
        assert_eq!(est.grad, one.grad);
        assert_eq!(est.logp, one.logp);
    }

    #[test]
    fn weights_normalized_and_ess_bounded() {
        let st = SurveyStochastic::new(survey(6, 3));
        let mut rng = RngStream::new(2);
        for n in [1usize, 5, 50] {
            let draws = marginalization_draws(&st, &[1.3], n, &mut rng).unwrap();
            let logps: Vec<f64> = draws.iter().flatten().map(|e| e.logp).collect();
            let lse = log_sum_exp_slice(&logps);
            let wsum: f64 = logps.iter().map(|l| (l - lse).exp()).sum();
            assert!((wsum - 1.0).abs() < 1e-12);
            let est = combine_importance_weighted(&draws).unwrap();
            let ess = est.ess.unwrap();
            assert!((1.0..=n as f64).contains(&ess));
        }
    }

    #[test]
    fn impossible_draws_get_zero_weight() {
        let ok = Evaluation {
            logp: -1.0,
            grad: vec![2.0],
        };
        let est = combine_importance_weighted(&[None, Some(ok.clone()), None]).unwrap();
        assert_eq!(est.grad, vec![2.0]);
        assert!(matches!(
            combine_importance_weighted(&[None, None]),
            Err(Error::EvaluationImpossible { .. })
        ));
    }

    #[test]
    fn low_ess_flag() {
        let est = GradientEstimate {
            grad: vec![0.0],
            logp: 0.0,
            n_draws: 100,
            ess: Some(5.0),
        };
        assert!(est.low_ess());
        let est = GradientEstimate {
            ess: Some(50.0),
            ..est
        };
        assert!(!est.low_ess());
    }

    #[test]
    fn gmm_enumeration_equals_deterministic() {
        let data = GmmData::new(vec![-1.0, 0.2, 1.7, 2.1], 2).unwrap();
        let st = GmmStochastic::new(data.clone());
        let det = GmmDeterministic::new(data);
        let x = [-0.5, 0.1, 1.4, -0.2];
        let en = enumerated_gradient(&st, &x, SemanticsMode::Marginalization).unwrap();
        let ex = exact_gradient(&det, &x).unwrap();
        for i in 0..4 {
            assert!((en.grad[i] - ex.grad[i]).abs() < 1e-10);
        }
        // the unweighted mixture sum sits n ln K above the marginal
        assert!((ex.logp - en.logp - 4.0 * 2f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn nondeterminism_clt_on_ball() {
        let st = BallStochastic::new(ball_params());
        let det = BallDeterministic::new(ball_params());
        let x = [0.8];
        let exact = exact_gradient(&det, &x).unwrap().grad[0];
        let n = 100_000;
        let mut rng = RngStream::new(99);
        let g: Vec<f64> = (0..n)
            .map(|_| evaluate(&st, &x, Some(&mut rng)).unwrap().grad[0])
            .collect();
        let mean = g.iter().sum::<f64>() / n as f64;
        let var = g.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!(
            (mean - exact).abs() < 3.0 * se,
            "{mean} vs {exact} (se {se})"
        );
    }
}

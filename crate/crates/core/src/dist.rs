//! Differentiable log-densities for the families the case models use.
//!
//! Each density is a single fused tape node whose partials are computed in
//! closed form. Samplers live in [`crate::rng`].

use crate::ad::{Op, Var};
use crate::error::{Error, Result};

/// `0.5 * ln(2π)`
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Normal log-density of `x` with differentiable location and scale.
pub fn normal_logpdf<'t>(mu: Var<'t>, sigma: Var<'t>, x: f64) -> Result<Var<'t>> {
    let s = sigma.value();
    if !(s > 0.0) {
        return Err(Error::domain("normal_logpdf", format!("sigma = {s}")));
    }
    let z = (x - mu.value()) / s;
    let value = -s.ln() - LN_SQRT_2PI - 0.5 * z * z;
    let d_mu = z / s;
    let d_sigma = (z * z - 1.0) / s;
    Ok(mu.tape().record(
        Op::Density("normal"),
        value,
        &[(mu, d_mu), (sigma, d_sigma)],
    ))
}

/// Log-probability of a Bernoulli outcome.
///
/// An outcome with probability zero yields [`Error::EvaluationImpossible`].
pub fn flip_logp(theta: Var<'_>, y: bool) -> Result<Var<'_>> {
    let t = theta.value();
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::domain("flip_logp", format!("theta = {t}")));
    }
    let (p, d) = if y {
        (t, 1.0 / t)
    } else {
        (1.0 - t, -1.0 / (1.0 - t))
    };
    if p == 0.0 {
        return Err(Error::impossible(format!("flip(theta = {t}) = {y}")));
    }
    Ok(theta
        .tape()
        .record(Op::Density("flip"), p.ln(), &[(theta, d)]))
}

pub fn ln_beta(alpha: f64, beta: f64) -> f64 {
    libm::lgamma(alpha) + libm::lgamma(beta) - libm::lgamma(alpha + beta)
}

pub fn beta_logpdf(alpha: f64, beta: f64, theta: Var<'_>) -> Result<Var<'_>> {
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(Error::domain(
            "beta_logpdf",
            format!("alpha = {alpha}, beta = {beta}"),
        ));
    }
    let t = theta.value();
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::domain("beta_logpdf", format!("theta = {t}")));
    }
    let value = (alpha - 1.0) * t.ln() + (beta - 1.0) * (1.0 - t).ln() - ln_beta(alpha, beta);
    let d = (alpha - 1.0) / t - (beta - 1.0) / (1.0 - t);
    Ok(theta
        .tape()
        .record(Op::Density("beta"), value, &[(theta, d)]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ad::Tape;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn normal_values() {
        let tape = Tape::new();
        let v = normal_logpdf(tape.constant(0.0), tape.constant(1.0), 0.0).unwrap();
        assert!(close(v.value(), -0.918_938_533_2, 1e-10));
        let v = normal_logpdf(tape.constant(1.0), tape.constant(2.0), 1.0).unwrap();
        assert!(close(v.value(), -1.612_085_713_7, 1e-10));
    }

    #[test]
    fn normal_location_partial() {
        let tape = Tape::new();
        let mu = tape.var(0.0);
        let sigma = tape.var(1.0);
        let v = normal_logpdf(mu, sigma, 2.0).unwrap();
        let g = tape.gradient(v, &[mu, sigma]).unwrap();
        assert_eq!(g[0], 2.0);
        assert_eq!(g[1], 3.0);
    }

    #[test]
    fn normal_bad_scale() {
        let tape = Tape::new();
        let r = normal_logpdf(tape.constant(0.0), tape.constant(0.0), 1.0);
        assert!(matches!(
            r,
            Err(Error::Domain {
                op: "normal_logpdf",
                ..
            })
        ));
    }

    #[test]
    fn normal_partials_match_fd() {
        let f = |m: f64, s: f64| -s.ln() - LN_SQRT_2PI - 0.5 * ((0.7 - m) / s).powi(2);
        let h = 1e-6;
        for &(m, s) in &[(0.1, 0.4), (-2.0, 3.0), (5.0, 0.9)] {
            let tape = Tape::new();
            let mu = tape.var(m);
            let sigma = tape.var(s);
            let v = normal_logpdf(mu, sigma, 0.7).unwrap();
            let g = tape.gradient(v, &[mu, sigma]).unwrap();
            let dm = (f(m + h, s) - f(m - h, s)) / (2.0 * h);
            let ds = (f(m, s + h) - f(m, s - h)) / (2.0 * h);
            assert!(close(g[0], dm, 1e-6 * (1.0 + dm.abs())));
            assert!(close(g[1], ds, 1e-6 * (1.0 + ds.abs())));
        }
    }

    #[test]
    fn normal_integrates_to_one() {
        let tape = Tape::new();
        let (mu, sigma) = (1.3, 0.7);
        let n = 200_001;
        let lo = mu - 10.0 * sigma;
        let h = 20.0 * sigma / (n - 1) as f64;
        let mut total = 0.0;
        for i in 0..n {
            let x = lo + h * i as f64;
            let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            total += w * normal_logpdf(tape.constant(mu), tape.constant(sigma), x)
                .unwrap()
                .value()
                .exp();
        }
        assert!(close(total * h, 1.0, 1e-6), "{}", total * h);
    }

    #[test]
    fn flip_values() {
        let tape = Tape::new();
        let v = flip_logp(tape.constant(0.5), true).unwrap();
        assert!(close(v.value(), -std::f64::consts::LN_2, 1e-7));
        let v = flip_logp(tape.constant(0.25), false).unwrap();
        assert!(close(v.value(), -0.287_682_1, 1e-7));

        let theta = tape.var(0.5);
        let v = flip_logp(theta, true).unwrap();
        assert_eq!(tape.gradient(v, &[theta]).unwrap(), vec![2.0]);
    }

    #[test]
    fn flip_impossible_outcome() {
        let tape = Tape::new();
        assert!(matches!(
            flip_logp(tape.constant(0.0), true),
            Err(Error::EvaluationImpossible { .. })
        ));
        assert!(matches!(
            flip_logp(tape.constant(1.0), false),
            Err(Error::EvaluationImpossible { .. })
        ));
        assert_eq!(flip_logp(tape.constant(1.0), true).unwrap().value(), 0.0);
        assert!(flip_logp(tape.constant(1.2), true).is_err());
    }

    #[test]
    fn flip_sums_to_one() {
        let tape = Tape::new();
        for k in 1..=9 {
            let t = tape.constant(k as f64 / 10.0);
            let p = flip_logp(t, true).unwrap().value().exp()
                + flip_logp(t, false).unwrap().value().exp();
            assert!(close(p, 1.0, 1e-15), "{k}: {p}");
        }
    }

    #[test]
    fn beta_values() {
        let tape = Tape::new();
        assert!(close(
            beta_logpdf(1.0, 1.0, tape.constant(0.3)).unwrap().value(),
            0.0,
            1e-15
        ));
        assert!(close(
            beta_logpdf(2.0, 1.0, tape.constant(0.5)).unwrap().value(),
            0.0,
            1e-15
        ));
        let theta = tape.var(0.5);
        let v = beta_logpdf(2.0, 2.0, theta).unwrap();
        assert!(close(tape.gradient(v, &[theta]).unwrap()[0], 0.0, 1e-15));
        assert!(beta_logpdf(0.0, 1.0, tape.constant(0.5)).is_err());
        assert!(beta_logpdf(1.0, 1.0, tape.constant(1.0)).is_err());
    }

    #[test]
    fn beta_partial_matches_fd() {
        let (a, b) = (2.5, 4.0);
        let f = |t: f64| (a - 1.0) * t.ln() + (b - 1.0) * (1.0 - t).ln() - ln_beta(a, b);
        for &t in &[0.1, 0.35, 0.8] {
            let tape = Tape::new();
            let theta = tape.var(t);
            let v = beta_logpdf(a, b, theta).unwrap();
            assert!(close(v.value(), f(t), 1e-12));
            let g = tape.gradient(v, &[theta]).unwrap()[0];
            let h = 1e-6;
            let fd = (f(t + h) - f(t - h)) / (2.0 * h);
            assert!(close(g, fd, 1e-6 * (1.0 + fd.abs())));
        }
    }
}

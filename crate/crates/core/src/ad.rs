//! Scalar reverse-mode automatic differentiation.
//!
//! A [`Tape`] records every operation on [`Var`]s as a node holding its
//! operand indices and the local partial derivatives, evaluated eagerly in the
//! forward pass. [`Tape::gradient`] runs one backward sweep from the output
//! and then resets the tape, so a single tape can serve every evaluation of a
//! chain.
//!
//! ```
//! use spp_core::ad::Tape;
//!
//! let tape = Tape::new();
//! let x = tape.var(3.0);
//! let y = x * x;
//! assert_eq!(y.value(), 9.0);
//! assert_eq!(tape.gradient(y, &[x]).unwrap(), vec![6.0]);
//! ```
//!
//! Infallible operations (`+`, `-`, `*`, negation, `exp`, `sin`, `cos`,
//! [`Var::sigm`], [`log_sum_exp`]) are exposed as operators and methods.
//! Operations with a restricted domain return [`Result`].

use std::cell::RefCell;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

const NO_ARG: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    Input,
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Neg,
    Log,
    Exp,
    Sin,
    Cos,
    Sqrt,
    Asin,
    Sigm,
    LogSumExp,
    /// A fused density node (e.g. a normal log-density) with precomputed partials.
    Density(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Log,
    Exp,
    Sin,
    Cos,
    Sqrt,
}

#[derive(Clone, Copy, Debug)]
struct Node {
    op: Op,
    args: [u32; 2],
    partials: [f64; 2],
}

#[derive(Debug, Default)]
struct Inner {
    nodes: Vec<Node>,
    generation: u32,
}

/// Append-only record of operations. Single-threaded; one per chain.
#[derive(Debug, Default)]
pub struct Tape {
    inner: RefCell<Inner>,
}

/// A scalar on a [`Tape`]. Constants carry no node and receive no adjoint.
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    value: f64,
    node: Option<u32>,
    generation: u32,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Var")
            .field("value", &self.value)
            .field("node", &self.node)
            .finish()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of recorded nodes.
    pub fn len(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Discards all nodes. Values recorded before the reset become stale.
    pub fn reset(&self) {
        let mut inner = self.inner.borrow_mut();
        inner.nodes.clear();
        inner.generation = inner.generation.wrapping_add(1);
    }

    /// Registers an independent variable.
    pub fn var(&self, value: f64) -> Var<'_> {
        self.push(Op::Input, value, [NO_ARG; 2], [0.0; 2])
    }

    pub fn vars(&self, values: &[f64]) -> Vec<Var<'_>> {
        values.iter().map(|&v| self.var(v)).collect()
    }

    /// Injects a constant. Its derivative contribution is discarded.
    pub fn lift(&self, c: f64) -> Result<Var<'_>> {
        if !c.is_finite() {
            return Err(Error::NonFiniteConstant(c));
        }
        Ok(self.constant(c))
    }

    pub(crate) fn constant(&self, c: f64) -> Var<'_> {
        Var {
            tape: self,
            value: c,
            node: None,
            generation: self.inner.borrow().generation,
        }
    }

    fn push(&self, op: Op, value: f64, args: [u32; 2], partials: [f64; 2]) -> Var<'_> {
        let mut inner = self.inner.borrow_mut();
        let idx = u32::try_from(inner.nodes.len()).expect("tape overflow");
        assert!(idx != NO_ARG, "tape overflow");
        inner.nodes.push(Node { op, args, partials });
        Var {
            tape: self,
            value,
            node: Some(idx),
            generation: inner.generation,
        }
    }

    /// Records `value` as a function of up to two operands with the given
    /// local partials. Constant operands are dropped from the record.
    pub(crate) fn record<'t>(&'t self, op: Op, value: f64, operands: &[(Var<'t>, f64)]) -> Var<'t> {
        debug_assert!(operands.len() <= 2);
        let mut args = [NO_ARG; 2];
        let mut partials = [0.0; 2];
        let mut k = 0;
        for (v, d) in operands {
            self.check_owned(v);
            if let Some(n) = v.node {
                args[k] = n;
                partials[k] = *d;
                k += 1;
            }
        }
        if k == 0 {
            return self.constant(value);
        }
        self.push(op, value, args, partials)
    }

    fn check_owned(&self, v: &Var<'_>) {
        assert!(
            std::ptr::eq(self, v.tape),
            "operands recorded on different tapes"
        );
        assert_eq!(
            v.generation,
            self.inner.borrow().generation,
            "operand recorded before the tape was reset"
        );
    }

    /// Partial derivatives of `output` with respect to each of `inputs`,
    /// from one backward sweep. The tape is reset afterwards, also on error.
    pub fn gradient(&self, output: Var<'_>, inputs: &[Var<'_>]) -> Result<Vec<f64>> {
        let res = self.sweep(output, inputs);
        self.reset();
        res
    }

    fn sweep(&self, output: Var<'_>, inputs: &[Var<'_>]) -> Result<Vec<f64>> {
        let inner = self.inner.borrow();
        for v in std::iter::once(&output).chain(inputs) {
            if !std::ptr::eq(self, v.tape) {
                return Err(Error::ForeignTape);
            }
            if v.generation != inner.generation {
                return Err(Error::StaleValue);
            }
        }
        if !output.value.is_finite() {
            return Err(Error::NonFiniteObjective(output.value));
        }
        let Some(out) = output.node else {
            return Ok(vec![0.0; inputs.len()]);
        };
        let out = out as usize;
        let mut adj = vec![0.0; out + 1];
        adj[out] = 1.0;
        for i in (0..=out).rev() {
            let a = adj[i];
            // zero adjoints are skipped so that infinite partials on dead
            // branches never turn into NaN
            if a == 0.0 {
                continue;
            }
            let node = &inner.nodes[i];
            for k in 0..2 {
                let arg = node.args[k];
                if arg != NO_ARG {
                    adj[arg as usize] += a * node.partials[k];
                }
            }
        }
        let grad: Vec<f64> = inputs
            .iter()
            .map(|v| match v.node {
                Some(n) if (n as usize) <= out => adj[n as usize],
                _ => 0.0,
            })
            .collect();
        if let Some(bad) = grad.iter().find(|g| !g.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite gradient component {bad}"
            )));
        }
        Ok(grad)
    }

    /// Operations recorded since the last reset, in order.
    pub fn ops(&self) -> Vec<Op> {
        self.inner.borrow().nodes.iter().map(|n| n.op).collect()
    }
}

fn is_integer(v: f64) -> bool {
    v.is_finite() && v.fract() == 0.0
}

impl<'t> Var<'t> {
    pub fn value(self) -> f64 {
        self.value
    }

    pub fn is_constant(self) -> bool {
        self.node.is_none()
    }

    pub fn tape(self) -> &'t Tape {
        self.tape
    }

    fn unary_node(self, op: Op, value: f64, partial: f64) -> Var<'t> {
        self.tape.record(op, value, &[(self, partial)])
    }

    pub fn checked_div(self, rhs: Var<'t>) -> Result<Var<'t>> {
        if rhs.value == 0.0 {
            return Err(Error::domain("div", "division by zero"));
        }
        let q = self.value / rhs.value;
        Ok(self.tape.record(
            Op::Div,
            q,
            &[(self, 1.0 / rhs.value), (rhs, -q / rhs.value)],
        ))
    }

    /// `self` raised to `rhs`. A non-positive base needs an integer, constant exponent.
    pub fn pow(self, rhs: Var<'t>) -> Result<Var<'t>> {
        let (a, b) = (self.value, rhs.value);
        if a <= 0.0 && !is_integer(b) {
            return Err(Error::domain(
                "pow",
                format!("negative or zero base {a} with non-integer exponent {b}"),
            ));
        }
        if a <= 0.0 && !rhs.is_constant() {
            return Err(Error::domain(
                "pow",
                format!("derivative in the exponent undefined at base {a}"),
            ));
        }
        if a == 0.0 && b < 1.0 && b != 0.0 && !self.is_constant() {
            return Err(Error::domain("pow", format!("0^{b} is not differentiable")));
        }
        let v = a.powf(b);
        let da = if b == 0.0 { 0.0 } else { b * a.powf(b - 1.0) };
        let db = if rhs.is_constant() { 0.0 } else { v * a.ln() };
        Ok(self.tape.record(Op::Pow, v, &[(self, da), (rhs, db)]))
    }

    pub fn powf(self, exponent: f64) -> Result<Var<'t>> {
        let e = self.tape.lift(exponent)?;
        self.pow(e)
    }

    pub fn ln(self) -> Result<Var<'t>> {
        if self.value <= 0.0 {
            return Err(Error::domain(
                "log",
                format!("argument {} is not positive", self.value),
            ));
        }
        Ok(self.unary_node(Op::Log, self.value.ln(), 1.0 / self.value))
    }

    pub fn sqrt(self) -> Result<Var<'t>> {
        if self.value <= 0.0 {
            return Err(Error::domain(
                "sqrt",
                format!("argument {} is not positive", self.value),
            ));
        }
        let s = self.value.sqrt();
        Ok(self.unary_node(Op::Sqrt, s, 0.5 / s))
    }

    /// Arcsine on the open interval (-1, 1).
    pub fn asin(self) -> Result<Var<'t>> {
        if !(self.value > -1.0 && self.value < 1.0) {
            return Err(Error::domain(
                "asin",
                format!("argument {} outside (-1, 1)", self.value),
            ));
        }
        let d = 1.0 / (1.0 - self.value * self.value).sqrt();
        Ok(self.unary_node(Op::Asin, self.value.asin(), d))
    }

    pub fn exp(self) -> Var<'t> {
        let e = self.value.exp();
        self.unary_node(Op::Exp, e, e)
    }

    pub fn sin(self) -> Var<'t> {
        self.unary_node(Op::Sin, self.value.sin(), self.value.cos())
    }

    pub fn cos(self) -> Var<'t> {
        self.unary_node(Op::Cos, self.value.cos(), -self.value.sin())
    }

    /// Logistic sigmoid, saturating without overflow.
    pub fn sigm(self) -> Var<'t> {
        let s = sigmoid(self.value);
        self.unary_node(Op::Sigm, s, s * (1.0 - s))
    }
}

/// Logistic sigmoid on plain floats, branch-wise so `exp` never overflows.
pub fn sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

/// `log(exp(a) + exp(b))` on plain floats.
pub fn log_sum_exp_f64(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Log-sum-exp of a slice; `-inf` for an empty or all `-inf` slice.
pub fn log_sum_exp_slice(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `log(exp(a) + exp(b))` with the softmax pair as partials.
pub fn log_sum_exp<'t>(a: Var<'t>, b: Var<'t>) -> Var<'t> {
    let m = a.value.max(b.value);
    let ea = (a.value - m).exp();
    let eb = (b.value - m).exp();
    let s = ea + eb;
    a.tape
        .record(Op::LogSumExp, m + s.ln(), &[(a, ea / s), (b, eb / s)])
}

pub fn binary<'t>(op: BinaryOp, a: Var<'t>, b: Var<'t>) -> Result<Var<'t>> {
    match op {
        BinaryOp::Add => Ok(a + b),
        BinaryOp::Sub => Ok(a - b),
        BinaryOp::Mul => Ok(a * b),
        BinaryOp::Div => a.checked_div(b),
        BinaryOp::Pow => a.pow(b),
    }
}

pub fn unary(op: UnaryOp, a: Var<'_>) -> Result<Var<'_>> {
    match op {
        UnaryOp::Neg => Ok(-a),
        UnaryOp::Log => a.ln(),
        UnaryOp::Exp => Ok(a.exp()),
        UnaryOp::Sin => Ok(a.sin()),
        UnaryOp::Cos => Ok(a.cos()),
        UnaryOp::Sqrt => a.sqrt(),
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        self.tape
            .record(Op::Add, self.value + rhs.value, &[(self, 1.0), (rhs, 1.0)])
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        self.tape
            .record(Op::Sub, self.value - rhs.value, &[(self, 1.0), (rhs, -1.0)])
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        self.tape.record(
            Op::Mul,
            self.value * rhs.value,
            &[(self, rhs.value), (rhs, self.value)],
        )
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.unary_node(Op::Neg, -self.value, -1.0)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: f64) -> Var<'t> {
        self.unary_node(Op::Add, self.value + rhs, 1.0)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: f64) -> Var<'t> {
        self.unary_node(Op::Sub, self.value - rhs, 1.0)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: f64) -> Var<'t> {
        self.unary_node(Op::Mul, self.value * rhs, rhs)
    }
}

impl<'t> Add<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        rhs + self
    }
}

impl<'t> Sub<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        rhs.unary_node(Op::Sub, self - rhs.value, -1.0)
    }
}

impl<'t> Mul<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        rhs * self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fd(f: impl Fn(f64) -> f64, x: f64) -> f64 {
        let h = 1e-6;
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn lift_is_constant() {
        let tape = Tape::new();
        let c = tape.lift(0.5).unwrap();
        assert_eq!(c.value(), 0.5);
        assert!(c.is_constant());
        let x = tape.var(1.0);
        let three = tape.lift(3.0).unwrap();
        assert_eq!(tape.gradient(three, &[x]).unwrap(), vec![0.0]);
    }

    #[test]
    fn lift_rejects_nan() {
        let tape = Tape::new();
        assert!(matches!(
            tape.lift(f64::NAN),
            Err(Error::NonFiniteConstant(_))
        ));
        assert!(tape.lift(f64::INFINITY).is_err());
    }

    #[test]
    fn square_and_shift() {
        let tape = Tape::new();
        let x = tape.var(3.0);
        let y = binary(BinaryOp::Mul, x, x).unwrap();
        assert_eq!(y.value(), 9.0);
        assert_eq!(tape.gradient(y, &[x]).unwrap(), vec![6.0]);

        let x = tape.var(0.0);
        let one = tape.lift(1.0).unwrap();
        let y = binary(BinaryOp::Add, x, one).unwrap();
        assert_eq!(y.value(), 1.0);
        assert_eq!(tape.gradient(y, &[x]).unwrap(), vec![1.0]);
    }

    #[test]
    fn division_by_zero() {
        let tape = Tape::new();
        let x = tape.var(2.0);
        let zero = tape.lift(0.0).unwrap();
        match binary(BinaryOp::Div, x, zero) {
            Err(Error::Domain { op, .. }) => assert_eq!(op, "div"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn division_partials() {
        let tape = Tape::new();
        let a = tape.var(3.0);
        let b = tape.var(4.0);
        let q = a.checked_div(b).unwrap();
        let g = tape.gradient(q, &[a, b]).unwrap();
        assert!((g[0] - 0.25).abs() < 1e-15);
        assert!((g[1] + 3.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn pow_domain_and_partials() {
        let tape = Tape::new();
        let a = tape.var(-2.0);
        let half = tape.lift(0.5).unwrap();
        assert!(matches!(a.pow(half), Err(Error::Domain { op: "pow", .. })));
        let cube = a.powf(3.0).unwrap();
        assert_eq!(cube.value(), -8.0);
        assert_eq!(tape.gradient(cube, &[a]).unwrap(), vec![12.0]);

        let a = tape.var(2.0);
        let b = tape.var(3.0);
        let p = a.pow(b).unwrap();
        let g = tape.gradient(p, &[a, b]).unwrap();
        assert!((g[0] - 12.0).abs() < 1e-12);
        assert!((g[1] - 8.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn log_exp_identity() {
        let tape = Tape::new();
        let x = tape.var(1.7);
        let y = unary(UnaryOp::Log, unary(UnaryOp::Exp, x).unwrap()).unwrap();
        assert!((y.value() - 1.7).abs() < 1e-15);
        let g = tape.gradient(y, &[x]).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sin_at_zero() {
        let tape = Tape::new();
        let x = tape.var(0.0);
        let y = unary(UnaryOp::Sin, x).unwrap();
        assert_eq!(y.value(), 0.0);
        assert_eq!(tape.gradient(y, &[x]).unwrap(), vec![1.0]);
    }

    #[test]
    fn log_and_sqrt_domain() {
        let tape = Tape::new();
        let x = tape.var(-1.0);
        assert!(matches!(
            unary(UnaryOp::Log, x),
            Err(Error::Domain { op: "log", .. })
        ));
        assert!(matches!(
            unary(UnaryOp::Sqrt, x),
            Err(Error::Domain { op: "sqrt", .. })
        ));
    }

    #[test]
    fn unary_partials_match_fd() {
        let x0 = 0.37;
        type Case = (UnaryOp, fn(f64) -> f64);
        let cases: [Case; 6] = [
            (UnaryOp::Neg, |v| -v),
            (UnaryOp::Log, f64::ln),
            (UnaryOp::Exp, f64::exp),
            (UnaryOp::Sin, f64::sin),
            (UnaryOp::Cos, f64::cos),
            (UnaryOp::Sqrt, f64::sqrt),
        ];
        for (op, f) in cases {
            let tape = Tape::new();
            let x = tape.var(x0);
            let y = unary(op, x).unwrap();
            let g = tape.gradient(y, &[x]).unwrap()[0];
            assert!((g - fd(f, x0)).abs() < 1e-8, "{op:?}");
        }
        let tape = Tape::new();
        let x = tape.var(x0);
        let y = x.asin().unwrap();
        let g = tape.gradient(y, &[x]).unwrap()[0];
        assert!((g - fd(f64::asin, x0)).abs() < 1e-8);
    }

    #[test]
    fn sigm_values() {
        let tape = Tape::new();
        let x = tape.var(0.0);
        let s = x.sigm();
        assert_eq!(s.value(), 0.5);
        assert_eq!(tape.gradient(s, &[x]).unwrap(), vec![0.25]);

        let x = tape.var(40.0);
        let s = x.sigm();
        assert!((s.value() - 1.0).abs() < 1e-15);
        assert!(tape.gradient(s, &[x]).unwrap()[0].abs() < 1e-15);

        let x = tape.var(-800.0);
        let s = x.sigm();
        assert_eq!(s.value(), 0.0);
        assert!(tape.gradient(s, &[x]).unwrap()[0].is_finite());

        assert!((sigmoid(-1.3) - (1.0 - sigmoid(1.3))).abs() < 1e-15);
    }

    #[test]
    fn log_sum_exp_cases() {
        let tape = Tape::new();
        let c = tape.var(-700.0);
        let d = tape.var(-700.0);
        let l = log_sum_exp(c, d);
        assert!((l.value() - (-700.0 + 2f64.ln())).abs() < 1e-12);
        let g = tape.gradient(l, &[c, d]).unwrap();
        assert_eq!(g, vec![0.5, 0.5]);

        let a = tape.var(0.0);
        let b = tape.lift(-1e308).unwrap();
        let l = log_sum_exp(a, b);
        assert_eq!(l.value(), 0.0);
        assert_eq!(tape.gradient(l, &[a]).unwrap(), vec![1.0]);
    }

    #[test]
    fn gradient_of_sum() {
        let tape = Tape::new();
        let x = tape.vars(&[0.3, -1.2]);
        let y = x[0] + x[1];
        assert_eq!(tape.gradient(y, &x).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn gradient_resets_tape() {
        let tape = Tape::new();
        let x = tape.var(1.0);
        let y = x * x + x;
        assert_eq!(tape.len(), 3);
        tape.gradient(y, &[x]).unwrap();
        assert!(tape.is_empty());
        assert!(matches!(tape.gradient(y, &[x]), Err(Error::StaleValue)));
    }

    #[test]
    fn foreign_tape_rejected() {
        let t1 = Tape::new();
        let t2 = Tape::new();
        let x = t1.var(1.0);
        let z = t2.var(2.0);
        let y = x * x;
        assert!(matches!(t1.gradient(y, &[z]), Err(Error::ForeignTape)));
    }

    #[test]
    fn non_finite_objective() {
        let tape = Tape::new();
        let x = tape.var(1000.0);
        let y = x.exp();
        assert!(matches!(
            tape.gradient(y, &[x]),
            Err(Error::NonFiniteObjective(_))
        ));
        assert!(tape.is_empty());
    }

    #[test]
    fn topological_record() {
        let tape = Tape::new();
        let x = tape.var(0.5);
        let y = (x.sigm() * 2.0).exp() - x;
        assert_eq!(
            tape.ops(),
            vec![Op::Input, Op::Sigm, Op::Mul, Op::Exp, Op::Sub]
        );
        let g = tape.gradient(y, &[x]).unwrap()[0];
        let f = |v: f64| (2.0 * sigmoid(v)).exp() - v;
        assert!((g - fd(f, 0.5)).abs() < 1e-8);
    }

    #[test]
    fn repeated_evaluation_is_bit_identical() {
        let run = || {
            let tape = Tape::new();
            let x = tape.vars(&[0.3, 1.1]);
            let y = log_sum_exp(x[0] * x[1], x[1].sin()) + x[0].sigm();
            (y.value(), tape.gradient(y, &x).unwrap())
        };
        let (v1, g1) = run();
        let (v2, g2) = run();
        assert_eq!(v1.to_bits(), v2.to_bits());
        assert_eq!(g1, g2);
    }

    proptest! {
        #[test]
        fn linearity(x0 in -3.0f64..3.0, x1 in -3.0f64..3.0, a in -5.0f64..5.0, b in -5.0f64..5.0) {
            fn f<'t>(x: &[Var<'t>]) -> Var<'t> {
                x[0].sin() * x[1] + x[0].exp()
            }
            fn g<'t>(x: &[Var<'t>]) -> Var<'t> {
                log_sum_exp(x[0] * x[1], x[1].cos())
            }
            let grad = |h: for<'t> fn(&[Var<'t>]) -> Var<'t>| {
                let tape = Tape::new();
                let x = tape.vars(&[x0, x1]);
                let y = h(&x);
                tape.gradient(y, &x).unwrap()
            };
            let combined = {
                let tape = Tape::new();
                let x = tape.vars(&[x0, x1]);
                let y = f(&x) * a + g(&x) * b;
                tape.gradient(y, &x).unwrap()
            };
            let gf = grad(f);
            let gg = grad(g);
            for i in 0..2 {
                let expect = a * gf[i] + b * gg[i];
                prop_assert!((combined[i] - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
            }
        }

        #[test]
        fn log_sum_exp_never_nan(a in -1e300f64..1e300, d in -700.0f64..700.0) {
            let tape = Tape::new();
            let x = tape.var(a);
            let y = tape.var(a + d);
            let l = log_sum_exp(x, y);
            prop_assert!(l.value().is_finite());
            prop_assert!(l.value() >= a.max(a + d));
            let g = tape.gradient(l, &[x, y]).unwrap();
            prop_assert!((g[0] + g[1] - 1.0).abs() < 1e-12);
        }

        #[test]
        fn sigm_symmetry(x in -50.0f64..50.0) {
            prop_assert!((sigmoid(-x) - (1.0 - sigmoid(x))).abs() < 1e-15);
        }
    }
}

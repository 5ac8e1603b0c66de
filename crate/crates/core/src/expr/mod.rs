//! Scalar expressions over base coordinates `x1..xm` and, optionally, time `t`.
//!
//! Every smooth coefficient in a scene (vector field components, matrix
//! entries, sections, structure functions) is a [`ScalarExpr`]. Evaluation is
//! either plain ([`ScalarExpr::eval`]) or forward-mode with first-order
//! partials ([`ScalarExpr::eval_jet`]).

mod ast;
mod jet;
mod parse;

pub use ast::{BinaryOp, Node, UnaryOp};
pub use jet::Jet1;

use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: found {found}, expected one of {expected:?}")]
    Syntax { offset: usize, found: String, expected: Vec<String> },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("function `{name}` at offset {offset} takes {expected} argument(s), found {found}")]
    Arity { name: String, offset: usize, expected: usize, found: usize },
    #[error("exponent at offset {offset} must be a constant")]
    NonConstantExponent { offset: usize },
    #[error("expression nested too deeply at offset {offset}")]
    TooDeep { offset: usize },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. }
            | ParseError::UnknownIdentifier { offset, .. }
            | ParseError::Arity { offset, .. }
            | ParseError::NonConstantExponent { offset }
            | ParseError::TooDeep { offset } => *offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("domain error in `{node}`: {reason} (argument {argument})")]
    Domain { node: String, reason: &'static str, argument: f64 },
    #[error("derivative of `{node}` is singular at argument {argument}")]
    DerivativeSingular { node: String, argument: f64 },
    #[error("expected a point of dimension {expected}, got {found}")]
    PointDimension { expected: usize, found: usize },
    #[error("expression is time dependent but no time was supplied")]
    MissingTime,
}

/// A parsed, immutable scalar expression.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarExpr {
    root: Node,
    dim: usize,
    time_dependent: bool,
}

impl ScalarExpr {
    /// Parses `text` over variables `x1..x<dim>`, plus `t` if `time_dependent`.
    pub fn parse(text: &str, dim: usize, time_dependent: bool) -> Result<ScalarExpr, ParseError> {
        parse::parse(text, dim, time_dependent)
    }

    pub(crate) fn from_parts(root: Node, dim: usize, time_dependent: bool) -> ScalarExpr {
        ScalarExpr { root, dim, time_dependent }
    }

    /// Wraps an AST built in code. Panics if it references a variable
    /// outside `x1..x<dim>` or uses `t` without `time_dependent`.
    pub fn from_node(root: Node, dim: usize, time_dependent: bool) -> ScalarExpr {
        if let Some(i) = root.max_var() {
            assert!(i < dim, "variable x{} out of range for dimension {dim}", i + 1);
        }
        assert!(time_dependent || !root.uses_time(), "t used in a time-independent expression");
        ScalarExpr { root, dim, time_dependent }
    }

    pub fn constant(value: f64, dim: usize) -> ScalarExpr {
        ScalarExpr { root: Node::Const(value), dim, time_dependent: false }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_time_dependent(&self) -> bool {
        self.time_dependent
    }

    /// Number of jet partials: `dim`, plus one for `t` when time dependent.
    pub fn jet_len(&self) -> usize {
        self.dim + usize::from(self.time_dependent)
    }

    /// Negated copy, `-(e)`.
    pub fn negated(&self) -> ScalarExpr {
        ScalarExpr {
            root: Node::unary(UnaryOp::Neg, self.root.clone()),
            dim: self.dim,
            time_dependent: self.time_dependent,
        }
    }

    /// Turns time into the first base coordinate: `t -> x1`, `xi -> x(i+1)`.
    ///
    /// The result is a time-independent expression of dimension `dim + 1`.
    pub fn suspend(&self) -> ScalarExpr {
        ScalarExpr { root: self.root.suspended(), dim: self.dim + 1, time_dependent: false }
    }

    fn check_point(&self, point: &[f64], t: Option<f64>) -> Result<(), EvalError> {
        if point.len() != self.dim {
            return Err(EvalError::PointDimension { expected: self.dim, found: point.len() });
        }
        if self.time_dependent && t.is_none() {
            return Err(EvalError::MissingTime);
        }
        Ok(())
    }

    pub fn eval(&self, point: &[f64], t: Option<f64>) -> Result<f64, EvalError> {
        self.check_point(point, t)?;
        eval_node_f64(&self.root, point, t)
    }

    pub fn eval_jet(&self, point: &[f64], t: Option<f64>) -> Result<Jet1, EvalError> {
        self.check_point(point, t)?;
        let n = self.jet_len();
        eval_node_jet(&self.root, point, t, n)
    }
}

impl fmt::Display for ScalarExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.root, f)
    }
}

fn domain(node: &Node, reason: &'static str, argument: f64) -> EvalError {
    EvalError::Domain { node: node.to_string(), reason, argument }
}

fn pow_f64(node: &Node, base: f64, exponent: f64) -> Result<f64, EvalError> {
    if exponent.fract() == 0.0 && exponent.abs() <= i32::MAX as f64 {
        if base == 0.0 && exponent < 0.0 {
            return Err(domain(node, "division by zero", base));
        }
        Ok(base.powi(exponent as i32))
    } else {
        if base < 0.0 {
            return Err(domain(node, "non-integer power of a negative number", base));
        }
        if base == 0.0 && exponent < 0.0 {
            return Err(domain(node, "division by zero", base));
        }
        Ok(base.powf(exponent))
    }
}

pub(crate) fn eval_node_f64(node: &Node, point: &[f64], t: Option<f64>) -> Result<f64, EvalError> {
    Ok(match node {
        Node::Const(c) => *c,
        Node::Var(i) => point[*i],
        Node::Time => t.ok_or(EvalError::MissingTime)?,
        Node::Unary(op, a) => {
            let x = eval_node_f64(a, point, t)?;
            match op {
                UnaryOp::Neg => -x,
                UnaryOp::Sin => x.sin(),
                UnaryOp::Cos => x.cos(),
                UnaryOp::Exp => x.exp(),
                UnaryOp::Tanh => x.tanh(),
                UnaryOp::Log => {
                    if x <= 0.0 {
                        return Err(domain(node, "log of a nonpositive number", x));
                    }
                    x.ln()
                }
                UnaryOp::Sqrt => {
                    if x < 0.0 {
                        return Err(domain(node, "sqrt of a negative number", x));
                    }
                    x.sqrt()
                }
            }
        }
        Node::Binary(op, a, b) => {
            let x = eval_node_f64(a, point, t)?;
            let y = eval_node_f64(b, point, t)?;
            match op {
                BinaryOp::Add => x + y,
                BinaryOp::Sub => x - y,
                BinaryOp::Mul => x * y,
                BinaryOp::Div => {
                    if y == 0.0 {
                        return Err(domain(node, "division by zero", y));
                    }
                    x / y
                }
            }
        }
        Node::Pow(a, p) => {
            let x = eval_node_f64(a, point, t)?;
            pow_f64(node, x, *p)?
        }
    })
}

fn eval_node_jet(node: &Node, point: &[f64], t: Option<f64>, n: usize) -> Result<Jet1, EvalError> {
    Ok(match node {
        Node::Const(c) => Jet1::constant(*c, n),
        Node::Var(i) => Jet1::variable(point[*i], *i, n),
        Node::Time => Jet1::variable(t.ok_or(EvalError::MissingTime)?, n - 1, n),
        Node::Unary(op, a) => {
            let x = eval_node_jet(a, point, t, n)?;
            match op {
                UnaryOp::Neg => -&x,
                UnaryOp::Sin => x.sin(),
                UnaryOp::Cos => x.cos(),
                UnaryOp::Exp => x.exp(),
                UnaryOp::Tanh => x.tanh(),
                UnaryOp::Log => {
                    if x.value <= 0.0 {
                        return Err(domain(node, "log of a nonpositive number", x.value));
                    }
                    x.chain(x.value.ln(), 1.0 / x.value)
                }
                UnaryOp::Sqrt => {
                    if x.value < 0.0 {
                        return Err(domain(node, "sqrt of a negative number", x.value));
                    }
                    if x.value == 0.0 {
                        return Err(EvalError::DerivativeSingular {
                            node: node.to_string(),
                            argument: 0.0,
                        });
                    }
                    let s = x.value.sqrt();
                    x.chain(s, 0.5 / s)
                }
            }
        }
        Node::Binary(op, a, b) => {
            let x = eval_node_jet(a, point, t, n)?;
            let y = eval_node_jet(b, point, t, n)?;
            match op {
                BinaryOp::Add => &x + &y,
                BinaryOp::Sub => &x - &y,
                BinaryOp::Mul => &x * &y,
                BinaryOp::Div => {
                    if y.value == 0.0 {
                        return Err(domain(node, "division by zero", y.value));
                    }
                    x.div(&y)
                }
            }
        }
        Node::Pow(a, p) => {
            let x = eval_node_jet(a, point, t, n)?;
            let value = pow_f64(node, x.value, *p)?;
            if *p == 0.0 {
                Jet1::constant(value, n)
            } else if *p < 1.0 && x.value == 0.0 {
                return Err(EvalError::DerivativeSingular { node: node.to_string(), argument: 0.0 });
            } else {
                let derivative = p * pow_f64(node, x.value, p - 1.0)?;
                x.chain(value, derivative)
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(text: &str, dim: usize) -> ScalarExpr {
        ScalarExpr::parse(text, dim, false).unwrap()
    }

    #[test]
    fn parses_sum_of_product() {
        let e = p("x1 + 2*x2", 2);
        let expected = Node::binary(
            BinaryOp::Add,
            Node::Var(0),
            Node::binary(BinaryOp::Mul, Node::Const(2.0), Node::Var(1)),
        );
        assert_eq!(e.root(), &expected);
    }

    #[test]
    fn parses_time_dependent_product() {
        let e = ScalarExpr::parse("sin(t)*x1", 1, true).unwrap();
        let expected = Node::binary(
            BinaryOp::Mul,
            Node::unary(UnaryOp::Sin, Node::Time),
            Node::Var(0),
        );
        assert_eq!(e.root(), &expected);
    }

    #[test]
    fn incomplete_input_reports_offset() {
        let err = ScalarExpr::parse("x1 +", 1, false).unwrap_err();
        assert!(matches!(err, ParseError::Syntax { offset: 4, .. }), "{err:?}");
        if let ParseError::Syntax { expected, .. } = err {
            assert!(expected.contains(&"number".to_string()));
        }
    }

    #[test]
    fn precedence_and_associativity() {
        // unary minus binds looser than ^
        assert_eq!(p("-2^2", 0).eval(&[], None).unwrap(), -4.0);
        // ^ is right associative
        assert_eq!(p("2^3^2", 0).eval(&[], None).unwrap(), 512.0);
        // - and / are left associative
        assert_eq!(p("10 - 4 - 3", 0).eval(&[], None).unwrap(), 3.0);
        assert_eq!(p("12 / 3 / 2", 0).eval(&[], None).unwrap(), 2.0);
        assert_eq!(p("2 * -3", 0).eval(&[], None).unwrap(), -6.0);
        assert_eq!(p("x1^-1", 1).eval(&[4.0], None).unwrap(), 0.25);
        assert_eq!(p("1.5e-1 * 2", 0).eval(&[], None).unwrap(), 0.3);
    }

    #[test]
    fn identifier_errors() {
        assert!(matches!(
            ScalarExpr::parse("x3", 2, false),
            Err(ParseError::UnknownIdentifier { .. })
        ));
        assert!(matches!(
            ScalarExpr::parse("t + x1", 1, false),
            Err(ParseError::UnknownIdentifier { offset: 0, .. })
        ));
        assert!(matches!(ScalarExpr::parse("x0", 2, false), Err(ParseError::UnknownIdentifier { .. })));
        assert!(matches!(ScalarExpr::parse("foo(x1)", 1, false), Err(ParseError::UnknownIdentifier { .. })));
        assert!(matches!(
            ScalarExpr::parse("sin(x1, x2)", 2, false),
            Err(ParseError::Arity { found: 2, .. })
        ));
        assert!(matches!(ScalarExpr::parse("2^x1", 1, false), Err(ParseError::NonConstantExponent { .. })));
        assert!(matches!(ScalarExpr::parse("(x1", 1, false), Err(ParseError::Syntax { offset: 3, .. })));
        assert!(matches!(ScalarExpr::parse("x1 $ 2", 1, false), Err(ParseError::Syntax { offset: 3, .. })));
    }

    #[test]
    fn eval_examples() {
        assert_eq!(p("2*3", 3).eval(&[0.1, 0.2, 0.3], None).unwrap(), 6.0);
        assert_eq!(p("x1^2", 1).eval(&[3.0], None).unwrap(), 9.0);
        assert_eq!(p("exp(x1)", 1).eval(&[1.0], None).unwrap(), 1.0f64.exp());
    }

    #[test]
    fn eval_domain_errors_name_the_node() {
        let err = p("1 + log(x1)", 1).eval(&[-1.0], None).unwrap_err();
        match err {
            EvalError::Domain { node, .. } => assert_eq!(node, "log(x1)"),
            other => panic!("{other:?}"),
        }
        assert!(p("1 / (x1 - 1)", 1).eval(&[1.0], None).is_err());
        assert!(p("sqrt(x1)", 1).eval(&[-0.5], None).is_err());
        assert!(p("x1^0.5", 1).eval(&[-0.5], None).is_err());
        assert!(matches!(p("x1", 1).eval(&[1.0, 2.0], None), Err(EvalError::PointDimension { .. })));
        let te = ScalarExpr::parse("t", 0, true).unwrap();
        assert_eq!(te.eval(&[], None), Err(EvalError::MissingTime));
    }

    #[test]
    fn jet_examples() {
        let j = p("x1^2", 1).eval_jet(&[3.0], None).unwrap();
        assert_eq!(j.value, 9.0);
        assert_eq!(j.partials, vec![6.0]);
        let j = p("sin(x1)*x2", 2).eval_jet(&[0.0, 5.0], None).unwrap();
        assert_eq!(j.value, 0.0);
        assert_eq!(j.partials, vec![5.0, 0.0]);
        let j = ScalarExpr::parse("x1*t^2", 1, true).unwrap().eval_jet(&[2.0], Some(3.0)).unwrap();
        assert_eq!(j.value, 18.0);
        assert_eq!(j.partials, vec![9.0, 12.0]);
    }

    #[test]
    fn jet_singularities_are_reported() {
        assert!(matches!(
            p("sqrt(x1)", 1).eval_jet(&[0.0], None),
            Err(EvalError::DerivativeSingular { .. })
        ));
        assert!(matches!(
            p("x1^0.5", 1).eval_jet(&[0.0], None),
            Err(EvalError::DerivativeSingular { .. })
        ));
        // integer powers are fine at zero
        assert_eq!(p("x1^3", 1).eval_jet(&[0.0], None).unwrap().partials, vec![0.0]);
    }

    #[test]
    fn suspend_moves_time_to_first_coordinate() {
        let e = ScalarExpr::parse("t*x1 + x2", 2, true).unwrap();
        let s = e.suspend();
        assert_eq!(s.dim(), 3);
        assert!(!s.is_time_dependent());
        assert_eq!(s.to_string(), "x1 * x2 + x3");
        assert_eq!(s.eval(&[2.0, 3.0, 1.0], None).unwrap(), e.eval(&[3.0, 1.0], Some(2.0)).unwrap());
    }

    #[test]
    fn printing_round_trips() {
        for text in [
            "x1 - (x2 - x3)",
            "-(-x1)",
            "(-x1)^2",
            "-x1^2",
            "x1 / (x2 * x3)",
            "(x1 + x2) * x3",
            "sin(x1)^3 * exp(-x2)",
            "x1^(-1.5) + tanh(x2 / 2)",
            "(x1^2)^3",
            "pi * x1",
        ] {
            let e = p(text, 3);
            let again = p(&e.to_string(), 3);
            assert_eq!(e, again, "{text} -> {e}");
        }
    }
}

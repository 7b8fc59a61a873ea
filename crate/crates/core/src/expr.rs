//! A small scalar expression language for problem data.
//!
//! Entries of `A(x)`, `b(x)`, `pi_des(x)`, `pi_f(x)` and dynamics `f(x, u)`
//! are written as infix expressions over parameter variables `x1..xn` and
//! (for dynamics) input variables `u1..um`. Supported: literals, `+ - * /`,
//! `^` with a nonnegative integer exponent, unary minus, `abs`, `sqrt`, and
//! n-ary `min`/`max`. Precedence is `^` > unary `-` > `* /` > `+ -`;
//! whitespace is insignificant and there is no implicit multiplication.

use std::collections::BTreeSet;
use std::fmt;

use crate::scalar::Scalar;

/// Abstract syntax tree of one scalar expression.
///
/// Variable indices are stored 1-based, exactly as written (`x1` is
/// `Param(1)`). Expressions are immutable and evaluation is pure, so sharing
/// across threads is safe.
#[derive(Debug, Clone, PartialEq)]
pub enum Expression<F> {
    Const(F),
    /// Parameter variable `x<i>`, 1-based.
    Param(usize),
    /// Input variable `u<i>`, 1-based.
    Input(usize),
    Neg(Box<Expression<F>>),
    Abs(Box<Expression<F>>),
    Sqrt(Box<Expression<F>>),
    Add(Box<Expression<F>>, Box<Expression<F>>),
    Sub(Box<Expression<F>>, Box<Expression<F>>),
    Mul(Box<Expression<F>>, Box<Expression<F>>),
    Div(Box<Expression<F>>, Box<Expression<F>>),
    /// Integer power; the exponent is restricted to a nonnegative literal.
    Pow(Box<Expression<F>>, u32),
    Min(Vec<Expression<F>>),
    Max(Vec<Expression<F>>),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { offset: usize, name: String },
    #[error("`{name}` expects {expected} argument(s), got {got} (at byte {offset})")]
    Arity { offset: usize, name: String, expected: String, got: usize },
    #[error("sqrt of negative value {value}")]
    NegativeSqrt { value: f64 },
    #[error("division by zero")]
    DivisionByZero,
    #[error("variable {name} not supplied (got {supplied} values)")]
    MissingVariable { name: String, supplied: usize },
}

/// Parse an expression from text.
pub fn parse<F: Scalar>(source: &str) -> Result<Expression<F>, ExprError> {
    let mut p = Parser { src: source.as_bytes(), pos: 0 };
    p.skip_ws();
    if p.pos >= p.src.len() {
        return Err(ExprError::Syntax { offset: 0, message: "empty expression".into() });
    }
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(ExprError::Syntax {
            offset: p.pos,
            message: format!("unexpected `{}`", p.src[p.pos] as char),
        });
    }
    Ok(e)
}

/// Evaluate an expression at a parameter vector and optional input vector.
pub fn evaluate<F: Scalar>(
    expr: &Expression<F>,
    x: &[F],
    u: Option<&[F]>,
) -> Result<F, ExprError> {
    use Expression::*;
    match expr {
        Const(c) => Ok(*c),
        Param(i) => x.get(i - 1).copied().ok_or_else(|| ExprError::MissingVariable {
            name: format!("x{i}"),
            supplied: x.len(),
        }),
        Input(i) => {
            let u = u.unwrap_or(&[]);
            u.get(i - 1).copied().ok_or_else(|| ExprError::MissingVariable {
                name: format!("u{i}"),
                supplied: u.len(),
            })
        }
        Neg(e) => Ok(-evaluate(e, x, u)?),
        Abs(e) => Ok(evaluate(e, x, u)?.abs()),
        Sqrt(e) => {
            let v = evaluate(e, x, u)?;
            if v < F::zero() {
                return Err(ExprError::NegativeSqrt { value: v.to_f64().unwrap_or(f64::NAN) });
            }
            Ok(v.sqrt())
        }
        Add(a, b) => Ok(evaluate(a, x, u)? + evaluate(b, x, u)?),
        Sub(a, b) => Ok(evaluate(a, x, u)? - evaluate(b, x, u)?),
        Mul(a, b) => Ok(evaluate(a, x, u)? * evaluate(b, x, u)?),
        Div(a, b) => {
            let d = evaluate(b, x, u)?;
            if d == F::zero() {
                return Err(ExprError::DivisionByZero);
            }
            Ok(evaluate(a, x, u)? / d)
        }
        Pow(e, k) => Ok(evaluate(e, x, u)?.powi(*k as i32)),
        Min(es) => {
            let mut best = evaluate(&es[0], x, u)?;
            for e in &es[1..] {
                best = best.min(evaluate(e, x, u)?);
            }
            Ok(best)
        }
        Max(es) => {
            let mut best = evaluate(&es[0], x, u)?;
            for e in &es[1..] {
                best = best.max(evaluate(e, x, u)?);
            }
            Ok(best)
        }
    }
}

/// Sets of referenced variable numbers: `(parameters, inputs)`, 1-based.
pub fn free_vars<F>(expr: &Expression<F>) -> (BTreeSet<usize>, BTreeSet<usize>) {
    let mut xs = BTreeSet::new();
    let mut us = BTreeSet::new();
    collect(expr, &mut xs, &mut us);
    (xs, us)
}

fn collect<F>(expr: &Expression<F>, xs: &mut BTreeSet<usize>, us: &mut BTreeSet<usize>) {
    use Expression::*;
    match expr {
        Const(_) => {}
        Param(i) => {
            xs.insert(*i);
        }
        Input(i) => {
            us.insert(*i);
        }
        Neg(e) | Abs(e) | Sqrt(e) | Pow(e, _) => collect(e, xs, us),
        Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) => {
            collect(a, xs, us);
            collect(b, xs, us);
        }
        Min(es) | Max(es) => {
            for e in es {
                collect(e, xs, us);
            }
        }
    }
}

impl<F: Scalar> fmt::Display for Expression<F> {
    /// Fully parenthesized form; reparsing yields a structurally identical
    /// AST (for nonnegative literals, the only kind the parser produces).
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Expression::*;
        match self {
            Const(c) => write!(f, "{c}"),
            Param(i) => write!(f, "x{i}"),
            Input(i) => write!(f, "u{i}"),
            Neg(e) => write!(f, "(-{e})"),
            Abs(e) => write!(f, "abs({e})"),
            Sqrt(e) => write!(f, "sqrt({e})"),
            Add(a, b) => write!(f, "({a} + {b})"),
            Sub(a, b) => write!(f, "({a} - {b})"),
            Mul(a, b) => write!(f, "({a} * {b})"),
            Div(a, b) => write!(f, "({a} / {b})"),
            Pow(e, k) => write!(f, "({e}^{k})"),
            Min(es) | Max(es) => {
                let name = if matches!(self, Min(_)) { "min" } else { "max" };
                write!(f, "{name}(")?;
                for (i, e) in es.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{e}")?;
                }
                write!(f, ")")
            }
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn syntax<T>(&self, message: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError::Syntax { offset: self.pos, message: message.into() })
    }

    fn expr<F: Scalar>(&mut self) -> Result<Expression<F>, ExprError> {
        let mut lhs = self.term()?;
        while let Some(op @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == b'+' {
                Expression::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Expression::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term<F: Scalar>(&mut self) -> Result<Expression<F>, ExprError> {
        let mut lhs = self.factor()?;
        while let Some(op @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = if op == b'*' {
                Expression::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Expression::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn factor<F: Scalar>(&mut self) -> Result<Expression<F>, ExprError> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(Expression::Neg(Box::new(self.factor()?)));
        }
        self.power()
    }

    fn power<F: Scalar>(&mut self) -> Result<Expression<F>, ExprError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            let start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if self.pos == start {
                return self.syntax("expected nonnegative integer exponent after `^`");
            }
            let digits = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
            let k: u32 = digits
                .parse()
                .map_err(|_| ExprError::Syntax { offset: start, message: "exponent too large".into() })?;
            return Ok(Expression::Pow(Box::new(base), k));
        }
        Ok(base)
    }

    fn atom<F: Scalar>(&mut self) -> Result<Expression<F>, ExprError> {
        match self.peek() {
            None => self.syntax("unexpected end of input"),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return self.syntax("expected `)`");
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.ident(),
            Some(c) => self.syntax(format!("unexpected `{}`", c as char)),
        }
    }

    fn number<F: Scalar>(&mut self) -> Result<Expression<F>, ExprError> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.')
        {
            self.pos += 1;
        }
        if self.pos < self.src.len() && matches!(self.src[self.pos], b'e' | b'E') {
            let mut probe = self.pos + 1;
            if probe < self.src.len() && matches!(self.src[probe], b'+' | b'-') {
                probe += 1;
            }
            if probe < self.src.len() && self.src[probe].is_ascii_digit() {
                self.pos = probe;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        let value: f64 = text.parse().map_err(|_| ExprError::Syntax {
            offset: start,
            message: format!("invalid number `{text}`"),
        })?;
        Ok(Expression::Const(F::c(value)))
    }

    fn ident<F: Scalar>(&mut self) -> Result<Expression<F>, ExprError> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap().to_string();

        // variable: x<digits> or u<digits>
        if name.len() > 1 && (name.starts_with('x') || name.starts_with('u')) {
            if let Ok(i) = name[1..].parse::<usize>() {
                if i >= 1 {
                    return Ok(if name.starts_with('x') {
                        Expression::Param(i)
                    } else {
                        Expression::Input(i)
                    });
                }
            }
        }

        match name.as_str() {
            "abs" | "sqrt" | "min" | "max" => {
                let args = self.args(&name, start)?;
                match name.as_str() {
                    "abs" => Ok(Expression::Abs(Box::new(args.into_iter().next().unwrap()))),
                    "sqrt" => Ok(Expression::Sqrt(Box::new(args.into_iter().next().unwrap()))),
                    "min" => Ok(Expression::Min(args)),
                    _ => Ok(Expression::Max(args)),
                }
            }
            _ => Err(ExprError::UnknownIdentifier { offset: start, name }),
        }
    }

    fn args<F: Scalar>(&mut self, name: &str, at: usize) -> Result<Vec<Expression<F>>, ExprError> {
        if self.peek() != Some(b'(') {
            return self.syntax(format!("expected `(` after `{name}`"));
        }
        self.pos += 1;
        let mut args = vec![self.expr()?];
        while self.peek() == Some(b',') {
            self.pos += 1;
            args.push(self.expr()?);
        }
        if self.peek() != Some(b')') {
            return self.syntax("expected `)` or `,`");
        }
        self.pos += 1;
        let ok = match name {
            "abs" | "sqrt" => args.len() == 1,
            _ => !args.is_empty(),
        };
        if !ok {
            return Err(ExprError::Arity {
                offset: at,
                name: name.to_string(),
                expected: if name == "abs" || name == "sqrt" { "1".into() } else { ">= 1".into() },
                got: args.len(),
            });
        }
        Ok(args)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Expression::*;

    fn eval(src: &str, x: &[f64]) -> f64 {
        evaluate(&parse::<f64>(src).unwrap(), x, None).unwrap()
    }

    #[test]
    fn parses_with_expected_structure() {
        let e = parse::<f64>("1 - x1^2").unwrap();
        assert_eq!(e, Sub(Box::new(Const(1.0)), Box::new(Pow(Box::new(Param(1)), 2))));
        assert_eq!(evaluate(&e, &[2.0], None).unwrap(), -3.0);
    }

    #[test]
    fn abs_min_examples() {
        assert_eq!(eval("2 + abs(x2)", &[0.0, -1.5]), 3.5);
        assert_eq!(eval("min(x1, 0, x2)", &[-2.0, 3.0]), -2.0);
        assert_eq!(eval("min(x1)", &[7.0]), 7.0);
        assert_eq!(eval("max(x1)", &[7.0]), 7.0);
    }

    #[test]
    fn evaluate_examples() {
        assert_eq!(eval("1 + 2*x1", &[0.0]), 1.0);
        assert_eq!(eval("-(1+x1)", &[2.0]), -3.0);
        let e = parse::<f64>("x1*u1 + u2").unwrap();
        assert_eq!(evaluate(&e, &[3.0], Some(&[2.0, 5.0])).unwrap(), 11.0);
    }

    #[test]
    fn precedence() {
        // ^ binds tighter than unary minus: -x1^2 at x1=2 is -4
        assert_eq!(eval("-x1^2", &[2.0]), -4.0);
        assert_eq!(eval("2+3*4", &[]), 14.0);
        assert_eq!(eval("2*3^2", &[]), 18.0);
        assert_eq!(eval("(2+3)*4", &[]), 20.0);
        assert_eq!(eval("1 - 2 - 3", &[]), -4.0);
        assert_eq!(eval("8/4/2", &[]), 1.0);
    }

    #[test]
    fn free_vars_examples() {
        let (xs, us) = free_vars(&parse::<f64>("1 - x1^2").unwrap());
        assert_eq!(xs.into_iter().collect::<Vec<_>>(), vec![1]);
        assert!(us.is_empty());

        let (xs, us) = free_vars(&parse::<f64>("3.0").unwrap());
        assert!(xs.is_empty() && us.is_empty());

        let (xs, us) = free_vars(&parse::<f64>("x2*u1").unwrap());
        assert_eq!(xs.into_iter().collect::<Vec<_>>(), vec![2]);
        assert_eq!(us.into_iter().collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn errors() {
        assert!(matches!(parse::<f64>("1 +"), Err(ExprError::Syntax { .. })));
        assert!(matches!(parse::<f64>(""), Err(ExprError::Syntax { offset: 0, .. })));
        assert!(matches!(
            parse::<f64>("foo(1)"),
            Err(ExprError::UnknownIdentifier { offset: 0, .. })
        ));
        assert!(matches!(parse::<f64>("abs(1, 2)"), Err(ExprError::Arity { .. })));
        assert!(matches!(parse::<f64>("x1^x1"), Err(ExprError::Syntax { .. })));
        assert!(matches!(
            evaluate(&parse::<f64>("sqrt(0 - 1)").unwrap(), &[], None),
            Err(ExprError::NegativeSqrt { .. })
        ));
        assert!(matches!(
            evaluate(&parse::<f64>("1/x1").unwrap(), &[0.0], None),
            Err(ExprError::DivisionByZero)
        ));
        assert!(matches!(
            evaluate(&parse::<f64>("x3").unwrap(), &[1.0], None),
            Err(ExprError::MissingVariable { .. })
        ));
    }

    #[test]
    fn syntax_error_reports_offset() {
        match parse::<f64>("1 + $") {
            Err(ExprError::Syntax { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_expr() -> impl Strategy<Value = Expression<f64>> {
            let leaf = prop_oneof![
                (0.0..100.0f64).prop_map(Expression::Const),
                (1usize..4).prop_map(Expression::Param),
                (1usize..3).prop_map(Expression::Input),
            ];
            leaf.prop_recursive(4, 32, 4, |inner| {
                prop_oneof![
                    inner.clone().prop_map(|e| Expression::Neg(Box::new(e))),
                    inner.clone().prop_map(|e| Expression::Abs(Box::new(e))),
                    inner.clone().prop_map(|e| Expression::Sqrt(Box::new(e))),
                    (inner.clone(), inner.clone())
                        .prop_map(|(a, b)| Expression::Add(Box::new(a), Box::new(b))),
                    (inner.clone(), inner.clone())
                        .prop_map(|(a, b)| Expression::Sub(Box::new(a), Box::new(b))),
                    (inner.clone(), inner.clone())
                        .prop_map(|(a, b)| Expression::Mul(Box::new(a), Box::new(b))),
                    (inner.clone(), inner.clone())
                        .prop_map(|(a, b)| Expression::Div(Box::new(a), Box::new(b))),
                    (inner.clone(), 0u32..5).prop_map(|(e, k)| Expression::Pow(Box::new(e), k)),
                    prop::collection::vec(inner.clone(), 1..4).prop_map(Expression::Min),
                    prop::collection::vec(inner, 1..4).prop_map(Expression::Max),
                ]
            })
        }

        proptest! {
            #[test]
            fn pretty_print_round_trips(e in arb_expr()) {
                let printed = e.to_string();
                let reparsed = parse::<f64>(&printed).unwrap();
                prop_assert_eq!(e, reparsed);
            }

            #[test]
            fn evaluation_is_reproducible(e in arb_expr(), x in prop::collection::vec(-5.0..5.0f64, 3), u in prop::collection::vec(-5.0..5.0f64, 2)) {
                let a = evaluate(&e, &x, Some(&u));
                let b = evaluate(&e, &x, Some(&u));
                prop_assert_eq!(a, b); // bit-for-bit, including errors
            }
        }
    }
}

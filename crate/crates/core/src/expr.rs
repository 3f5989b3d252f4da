//! Rational expressions in `z1..zn` and their conjugates.
//!
//! Grammar:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := base ('^' ['-'] integer)?
//! base   := number ['i'] | 'z' index | 'conj(' expr ')' | 'abs2(' expr ')'
//!         | '(' expr ')' | '-' base
//! ```
//!
//! A number followed by `i` is imaginary (`2.5i`). Constant subtrees are
//! folded while parsing and `conj(zk)` becomes a conjugate variable, so a
//! parsed tree prints to text that parses back to the same tree.

use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

use crate::error::{CurvError, Result};

type C64 = Complex64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

/// Expression tree. Variable indices are zero-based (`z1` is `Var(0)`).
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(C64),
    Var(usize),
    ConjVar(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Abs2(Box<Expr>),
    Conj(Box<Expr>),
    Neg(Box<Expr>),
}

/// Which Wirtinger derivative to take.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wirtinger {
    Holo,
    Anti,
}

impl Wirtinger {
    fn flip(self) -> Self {
        match self {
            Wirtinger::Holo => Wirtinger::Anti,
            Wirtinger::Anti => Wirtinger::Holo,
        }
    }
}

fn is_zero(e: &Expr) -> bool {
    matches!(e, Expr::Const(c) if *c == C64::new(0.0, 0.0))
}

fn is_one(e: &Expr) -> bool {
    matches!(e, Expr::Const(c) if *c == C64::new(1.0, 0.0))
}

impl Expr {
    pub fn constant(re: f64, im: f64) -> Expr {
        Expr::Const(C64::new(re, im))
    }

    pub fn real(re: f64) -> Expr {
        Expr::Const(C64::new(re, 0.0))
    }

    pub fn complex(c: C64) -> Expr {
        Expr::Const(c)
    }

    // The combinators below drop trivial zero/one factors so that
    // builder-generated and differentiated trees stay small.

    pub fn add(a: Expr, b: Expr) -> Expr {
        match (a, b) {
            (a, b) if is_zero(&a) => b,
            (a, b) if is_zero(&b) => a,
            (Expr::Const(x), Expr::Const(y)) => Expr::Const(x + y),
            (a, b) => Expr::Add(Box::new(a), Box::new(b)),
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        match (a, b) {
            (a, b) if is_zero(&b) => a,
            (a, b) if is_zero(&a) => Expr::neg(b),
            (Expr::Const(x), Expr::Const(y)) => Expr::Const(x - y),
            (a, b) => Expr::Sub(Box::new(a), Box::new(b)),
        }
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        match (a, b) {
            (a, _) if is_zero(&a) => Expr::real(0.0),
            (_, b) if is_zero(&b) => Expr::real(0.0),
            (a, b) if is_one(&a) => b,
            (a, b) if is_one(&b) => a,
            (Expr::Const(x), Expr::Const(y)) => Expr::Const(x * y),
            (a, b) => Expr::Mul(Box::new(a), Box::new(b)),
        }
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        match (a, b) {
            (a, _) if is_zero(&a) => Expr::real(0.0),
            (a, b) if is_one(&b) => a,
            (a, b) => Expr::Div(Box::new(a), Box::new(b)),
        }
    }

    pub fn pow(a: Expr, k: i32) -> Expr {
        match (a, k) {
            (_, 0) => Expr::real(1.0),
            (a, 1) => a,
            (Expr::Const(x), k) => Expr::Const(x.powi(k)),
            (a, k) => Expr::Pow(Box::new(a), k),
        }
    }

    pub fn neg(a: Expr) -> Expr {
        match a {
            Expr::Const(x) => Expr::Const(-x),
            Expr::Neg(inner) => *inner,
            a => Expr::Neg(Box::new(a)),
        }
    }

    pub fn conj(a: Expr) -> Expr {
        match a {
            Expr::Const(x) => Expr::Const(x.conj()),
            Expr::Var(k) => Expr::ConjVar(k),
            Expr::ConjVar(k) => Expr::Var(k),
            a => Expr::Conj(Box::new(a)),
        }
    }

    pub fn abs2(a: Expr) -> Expr {
        match a {
            Expr::Const(x) => Expr::real(x.norm_sqr()),
            a => Expr::Abs2(Box::new(a)),
        }
    }

    /// One more than the largest variable index, or 0 for constants.
    pub fn arity(&self) -> usize {
        match self {
            Expr::Const(_) => 0,
            Expr::Var(k) | Expr::ConjVar(k) => k + 1,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => a.arity().max(b.arity()),
            Expr::Pow(a, _) | Expr::Abs2(a) | Expr::Conj(a) | Expr::Neg(a) => a.arity(),
        }
    }

    /// True when the tree mentions no conjugate variable, `conj` or `abs2`.
    pub fn is_syntactically_holomorphic(&self) -> bool {
        match self {
            Expr::Const(_) | Expr::Var(_) => true,
            Expr::ConjVar(_) | Expr::Conj(_) | Expr::Abs2(_) => false,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.is_syntactically_holomorphic() && b.is_syntactically_holomorphic()
            }
            Expr::Pow(a, _) | Expr::Neg(a) => a.is_syntactically_holomorphic(),
        }
    }

    pub fn eval(&self, z: &[C64]) -> Result<C64> {
        let v = match self {
            Expr::Const(c) => *c,
            Expr::Var(k) => *z.get(*k).ok_or(CurvError::DimensionMismatch { expected: k + 1, found: z.len() })?,
            Expr::ConjVar(k) => z
                .get(*k)
                .ok_or(CurvError::DimensionMismatch { expected: k + 1, found: z.len() })?
                .conj(),
            Expr::Add(a, b) => a.eval(z)? + b.eval(z)?,
            Expr::Sub(a, b) => a.eval(z)? - b.eval(z)?,
            Expr::Mul(a, b) => a.eval(z)? * b.eval(z)?,
            Expr::Div(a, b) => {
                let d = b.eval(z)?;
                if d == C64::new(0.0, 0.0) {
                    return Err(CurvError::DivisionByZero);
                }
                a.eval(z)? / d
            }
            Expr::Pow(a, k) => {
                let base = a.eval(z)?;
                if *k < 0 && base == C64::new(0.0, 0.0) {
                    return Err(CurvError::DivisionByZero);
                }
                base.powi(*k)
            }
            Expr::Abs2(a) => C64::new(a.eval(z)?.norm_sqr(), 0.0),
            Expr::Conj(a) => a.eval(z)?.conj(),
            Expr::Neg(a) => -a.eval(z)?,
        };
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(CurvError::NonFinite(self.to_string()));
        }
        Ok(v)
    }

    /// Symbolic Wirtinger derivative with respect to `z_k` or `conj(z_k)`.
    pub fn derivative(&self, k: usize, kind: Wirtinger) -> Expr {
        match self {
            Expr::Const(_) => Expr::real(0.0),
            Expr::Var(j) => Expr::real(if *j == k && kind == Wirtinger::Holo { 1.0 } else { 0.0 }),
            Expr::ConjVar(j) => Expr::real(if *j == k && kind == Wirtinger::Anti { 1.0 } else { 0.0 }),
            Expr::Add(a, b) => Expr::add(a.derivative(k, kind), b.derivative(k, kind)),
            Expr::Sub(a, b) => Expr::sub(a.derivative(k, kind), b.derivative(k, kind)),
            Expr::Mul(a, b) => Expr::add(
                Expr::mul(a.derivative(k, kind), (**b).clone()),
                Expr::mul((**a).clone(), b.derivative(k, kind)),
            ),
            Expr::Div(a, b) => {
                let num = Expr::sub(
                    Expr::mul(a.derivative(k, kind), (**b).clone()),
                    Expr::mul((**a).clone(), b.derivative(k, kind)),
                );
                Expr::div(num, Expr::pow((**b).clone(), 2))
            }
            Expr::Pow(a, p) => Expr::mul(
                Expr::mul(Expr::real(*p as f64), Expr::pow((**a).clone(), p - 1)),
                a.derivative(k, kind),
            ),
            // d conj(a) = conj(d-bar a)
            Expr::Conj(a) => Expr::conj(a.derivative(k, kind.flip())),
            Expr::Abs2(a) => Expr::add(
                Expr::mul(a.derivative(k, kind), Expr::conj((**a).clone())),
                Expr::mul((**a).clone(), Expr::conj(a.derivative(k, kind.flip()))),
            ),
            Expr::Neg(a) => Expr::neg(a.derivative(k, kind)),
        }
    }
}

fn write_number(f: &mut fmt::Formatter<'_>, x: f64) -> fmt::Result {
    // `{}` on f64 is the shortest representation that parses back exactly.
    if x < 0.0 || (x == 0.0 && x.is_sign_negative()) {
        write!(f, "(-{})", -x)
    } else {
        write!(f, "{}", x)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => {
                if c.im == 0.0 && !c.im.is_sign_negative() {
                    write_number(f, c.re)
                } else if c.re == 0.0 && !c.re.is_sign_negative() {
                    if c.im < 0.0 {
                        write!(f, "(-{}i)", -c.im)
                    } else {
                        write!(f, "{}i", c.im)
                    }
                } else {
                    write!(f, "(")?;
                    write_number(f, c.re)?;
                    if c.im < 0.0 || c.im.is_sign_negative() {
                        write!(f, " - {}i)", -c.im)
                    } else {
                        write!(f, " + {}i)", c.im)
                    }
                }
            }
            Expr::Var(k) => write!(f, "z{}", k + 1),
            Expr::ConjVar(k) => write!(f, "conj(z{})", k + 1),
            Expr::Add(a, b) => write!(f, "({} + {})", a, b),
            Expr::Sub(a, b) => write!(f, "({} - {})", a, b),
            Expr::Mul(a, b) => write!(f, "({} * {})", a, b),
            Expr::Div(a, b) => write!(f, "({} / {})", a, b),
            Expr::Pow(a, k) => match **a {
                Expr::Var(_) | Expr::ConjVar(_) => write!(f, "{}^{}", a, k),
                _ => write!(f, "({})^{}", a, k),
            },
            Expr::Abs2(a) => write!(f, "abs2({})", a),
            Expr::Conj(a) => write!(f, "conj({})", a),
            Expr::Neg(a) => write!(f, "(-({}))", a),
        }
    }
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    col: usize,
}

impl Parser {
    fn new(src: &str) -> Self {
        Parser { chars: src.chars().collect(), pos: 0, line: 1, col: 1 }
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError { line: self.line, col: self.col, message: message.into() }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.bump();
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> std::result::Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(format!("expected '{}'", c)))
        }
    }

    fn starts_with(&self, word: &str) -> bool {
        let w: Vec<char> = word.chars().collect();
        self.chars.get(self.pos..self.pos + w.len()) == Some(&w[..])
    }

    fn expr(&mut self) -> std::result::Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Expr::add(lhs, self.term()?);
            } else if self.eat('-') {
                lhs = Expr::sub(lhs, self.term()?);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> std::result::Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            if self.eat('*') {
                lhs = Expr::mul(lhs, self.factor()?);
            } else if self.eat('/') {
                let (line, col) = (self.line, self.col);
                let rhs = self.factor()?;
                if is_zero(&rhs) {
                    return Err(ParseError { line, col, message: "division by constant zero".into() });
                }
                lhs = match (lhs, rhs) {
                    (Expr::Const(a), Expr::Const(b)) => Expr::Const(a / b),
                    (a, b) => Expr::div(a, b),
                };
            } else {
                return Ok(lhs);
            }
        }
    }

    fn factor(&mut self) -> std::result::Result<Expr, ParseError> {
        let base = self.base()?;
        if !self.eat('^') {
            return Ok(base);
        }
        self.skip_ws();
        let negative = self.eat('-');
        self.skip_ws();
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.bump();
        }
        if start == self.pos {
            return Err(self.error("expected integer exponent"));
        }
        let digits: String = self.chars[start..self.pos].iter().collect();
        let k: i32 = digits.parse().map_err(|_| self.error("exponent out of range"))?;
        let k = if negative { -k } else { k };
        if k == 0 {
            return Err(self.error("exponent must be a nonzero integer"));
        }
        if is_zero(&base) && k < 0 {
            return Err(self.error("negative power of constant zero"));
        }
        Ok(Expr::pow(base, k))
    }

    fn base(&mut self) -> std::result::Result<Expr, ParseError> {
        self.skip_ws();
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some('-') => {
                self.bump();
                Ok(Expr::neg(self.base()?))
            }
            Some('(') => {
                self.bump();
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some('z') => {
                self.bump();
                let start = self.pos;
                while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                    self.bump();
                }
                let digits: String = self.chars[start..self.pos].iter().collect();
                match digits.parse::<usize>() {
                    Ok(k) if k >= 1 => Ok(Expr::Var(k - 1)),
                    _ => Err(self.error("variable index must be a positive integer")),
                }
            }
            Some(_) if self.starts_with("conj") => {
                for _ in 0..4 {
                    self.bump();
                }
                self.expect('(')?;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(Expr::conj(e))
            }
            Some(_) if self.starts_with("abs2") => {
                for _ in 0..4 {
                    self.bump();
                }
                self.expect('(')?;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(Expr::abs2(e))
            }
            Some(c) => Err(self.error(format!("unexpected character '{}'", c))),
        }
    }

    fn number(&mut self) -> std::result::Result<Expr, ParseError> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit() || c == '.') {
            self.bump();
        }
        if matches!(self.peek(), Some('e') | Some('E')) {
            let save = (self.pos, self.line, self.col);
            self.bump();
            if matches!(self.peek(), Some('+') | Some('-')) {
                self.bump();
            }
            if matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                    self.bump();
                }
            } else {
                (self.pos, self.line, self.col) = save;
            }
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        let x: f64 = text.parse().map_err(|_| self.error(format!("invalid number '{}'", text)))?;
        if self.peek() == Some('i') {
            self.bump();
            return Ok(Expr::constant(0.0, x));
        }
        Ok(Expr::real(x))
    }
}

/// Parses a single expression; trailing input is an error.
pub fn parse_expr(src: &str) -> std::result::Result<Expr, ParseError> {
    let mut p = Parser::new(src);
    let e = p.expr()?;
    p.skip_ws();
    if p.peek().is_some() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(e: &Expr, z: &[C64]) -> C64 {
        e.eval(z).unwrap()
    }

    #[test]
    fn poincare_entry() {
        let e = parse_expr("1/(1 - abs2(z1))^2").unwrap();
        assert_eq!(at(&e, &[C64::new(0.0, 0.0)]), C64::new(1.0, 0.0));
        let v = at(&e, &[C64::new(0.5, 0.0)]);
        assert!((v.re - 16.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn conj_of_variable_is_conj_var() {
        assert_eq!(parse_expr("conj(z2)").unwrap(), Expr::ConjVar(1));
        assert_eq!(parse_expr("conj(conj(z2))").unwrap(), Expr::Var(1));
    }

    #[test]
    fn constants_fold() {
        assert_eq!(parse_expr("-(2)").unwrap(), Expr::real(-2.0));
        assert_eq!(parse_expr("1 + 2.5i").unwrap(), Expr::constant(1.0, 2.5));
        assert_eq!(parse_expr("2^-2").unwrap(), Expr::real(0.25));
    }

    #[test]
    fn precedence() {
        let e = parse_expr("1 + 2*z1^2").unwrap();
        let v = at(&e, &[C64::new(3.0, 0.0)]);
        assert_eq!(v, C64::new(19.0, 0.0));
        let e = parse_expr("-z1^2").unwrap();
        // '-' binds to the base, so this is (-z1)^2
        assert_eq!(at(&e, &[C64::new(3.0, 0.0)]), C64::new(9.0, 0.0));
    }

    #[test]
    fn round_trip_through_printer() {
        for src in [
            "1/(1 - abs2(z1))^2",
            "1 + z1*conj(z2)",
            "(0.5 - 0.25i) * z2 / (z1 + 3)^-3",
            "-conj(z1 * z2) + abs2(z1 - 2i)",
            "1e-3 * z1 - -4",
        ] {
            let ast = parse_expr(src).unwrap();
            let printed = ast.to_string();
            assert_eq!(parse_expr(&printed).unwrap(), ast, "{} -> {}", src, printed);
        }
    }

    #[test]
    fn errors_carry_position() {
        let err = parse_expr("1 +\n  * z1").unwrap_err();
        assert_eq!(err.line, 2);
        assert_eq!(err.col, 3);
        assert!(parse_expr("z0").is_err());
        assert!(parse_expr("z1^0").is_err());
        assert!(parse_expr("z1 / 0").is_err());
        assert!(parse_expr("(z1").is_err());
        assert!(parse_expr("z1 z2").is_err());
    }

    #[test]
    fn division_by_zero_at_runtime() {
        let e = parse_expr("1/z1").unwrap();
        assert_eq!(e.eval(&[C64::new(0.0, 0.0)]), Err(CurvError::DivisionByZero));
    }

    #[test]
    fn symbolic_wirtinger_derivatives() {
        // d/dz |z|^{-2} = -conj(z)/|z|^4
        let e = parse_expr("1/abs2(z1)").unwrap();
        let z = [C64::new(0.7, -0.4)];
        let d = at(&e.derivative(0, Wirtinger::Holo), &z);
        let expect = -z[0].conj() / z[0].norm_sqr().powi(2);
        assert!((d - expect).norm() < 1e-14);
        let dbar = at(&e.derivative(0, Wirtinger::Anti), &z);
        assert!((dbar - expect.conj()).norm() < 1e-14);

        let f = parse_expr("z1^3 * z2 - 2*z2").unwrap();
        let z = [C64::new(0.3, 0.2), C64::new(-1.0, 0.5)];
        let d1 = at(&f.derivative(0, Wirtinger::Holo), &z);
        assert!((d1 - 3.0 * z[0] * z[0] * z[1]).norm() < 1e-14);
        assert_eq!(f.derivative(1, Wirtinger::Anti), Expr::real(0.0));
        assert!(f.is_syntactically_holomorphic());
        assert!(!e.is_syntactically_holomorphic());
    }
}

//! A small arithmetic expression language for function families, kernels and
//! nonlinearities.
//!
//! Grammar (whitespace insignificant, numbers are decimal literals):
//!
//! ```text
//! expr   := term (("+" | "-") term)*
//! term   := factor (("*" | "/") factor)*
//! factor := atom ("^" atom)?
//! atom   := number | variable | func "(" expr ")" | "(" expr ")"
//! func   := "sin" | "cos" | "exp" | "log" | "abs"
//! ```
//!
//! Which variables are legal depends on the context: families use `t` and `n`,
//! kernels `t` and `s`, nonlinearities `x`.

use std::borrow::Cow;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Var {
    /// Domain point.
    T,
    /// Family index.
    N,
    /// Integration variable.
    S,
    /// Argument of a nonlinearity.
    X,
}

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::T => "t",
            Var::N => "n",
            Var::S => "s",
            Var::X => "x",
        }
    }

    fn from_name(name: &str) -> Option<Var> {
        match name {
            "t" => Some(Var::T),
            "n" => Some(Var::N),
            "s" => Some(Var::S),
            "x" => Some(Var::X),
            _ => None,
        }
    }
}

/// Variables allowed in family expressions.
pub const FAMILY_VARS: &[Var] = &[Var::T, Var::N];
/// Variables allowed in functions of the domain point only.
pub const POINT_VARS: &[Var] = &[Var::T];
/// Variables allowed in integral kernels.
pub const KERNEL_VARS: &[Var] = &[Var::T, Var::S];
/// Variables allowed in nonlinearities.
pub const NONLINEARITY_VARS: &[Var] = &[Var::X];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Abs,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Abs => "abs",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "log" => Some(Func::Log),
            "abs" => Some(Func::Abs),
            _ => None,
        }
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
            Func::Log => v.ln(),
            Func::Abs => v.abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
        }
    }
}

/// Expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Call(Func, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
}

/// The tree of a family expression in `t` and `n`.
pub type FamilyExpr = Expr;

/// Variable bindings for evaluation. Unbound variables read as zero; the
/// parser guarantees only context-legal variables occur.
#[derive(Debug, Clone, Copy, Default)]
pub struct Env {
    pub t: f64,
    pub n: f64,
    pub s: f64,
    pub x: f64,
}

impl Env {
    pub fn point(t: f64) -> Self {
        Env { t, ..Env::default() }
    }

    pub fn member(t: f64, n: f64) -> Self {
        Env { t, n, ..Env::default() }
    }

    fn get(&self, v: Var) -> f64 {
        match v {
            Var::T => self.t,
            Var::N => self.n,
            Var::S => self.s,
            Var::X => self.x,
        }
    }
}

/// `base^exponent` evaluated through logarithms, so that huge exponents
/// underflow to zero instead of overflowing intermediate products.
pub fn log_space_pow(base: f64, exponent: f64) -> f64 {
    if base > 0.0 {
        (exponent * base.ln()).exp()
    } else if base == 0.0 {
        if exponent > 0.0 {
            0.0
        } else if exponent == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else if exponent.fract() == 0.0 {
        let magnitude = (exponent * (-base).ln()).exp();
        // exponents beyond 2^53 are all even
        let odd = exponent.abs() < 9.007_199_254_740_992e15 && (exponent as i64) % 2 != 0;
        if odd {
            -magnitude
        } else {
            magnitude
        }
    } else {
        f64::NAN
    }
}

impl Expr {
    pub fn eval(&self, env: &Env) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(v) => env.get(*v),
            Expr::Call(f, arg) => f.apply(arg.eval(env)),
            Expr::Binary(op, l, r) => {
                let (a, b) = (l.eval(env), r.eval(env));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                }
            }
            Expr::Pow(b, e) => log_space_pow(b.eval(env), e.eval(env)),
        }
    }

    pub fn uses(&self, var: Var) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(v) => *v == var,
            Expr::Call(_, a) => a.uses(var),
            Expr::Binary(_, l, r) | Expr::Pow(l, r) => l.uses(var) || r.uses(var),
        }
    }

    /// True if evaluation can leave the reals on a finite domain (logarithms
    /// and divisions).
    pub fn may_diverge(&self) -> bool {
        match self {
            Expr::Num(_) | Expr::Var(_) => false,
            Expr::Call(Func::Log, _) => true,
            Expr::Call(_, a) => a.may_diverge(),
            Expr::Binary(BinOp::Div, _, _) => true,
            Expr::Binary(_, l, r) | Expr::Pow(l, r) => l.may_diverge() || r.may_diverge(),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(op, _, _) => op.precedence(),
            Expr::Pow(_, _) => 3,
            _ => 4,
        }
    }
}

#[derive(Debug)]
enum Node {
    Cached(usize),
    Num(f64),
    Var(Var),
    Call(Func, Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    /// Power with an `n`-free base: cached base values and their logarithms.
    PowCachedBase(usize, usize, Box<Node>),
}

/// A family expression prepared for a fixed grid: every compound subtree
/// free of `n` is evaluated once per grid point, so only the `n`-dependent
/// remainder runs per member. Results are bit-identical to [`Expr::eval`].
#[derive(Debug)]
pub struct GridProgram {
    root: Node,
    cached: Vec<Vec<f64>>,
}

impl GridProgram {
    pub fn new(expr: &Expr, points: &[f64]) -> Self {
        let mut cached = Vec::new();
        let root = Self::lower(expr, points, &mut cached);
        GridProgram { root, cached }
    }

    fn lower(e: &Expr, points: &[f64], cached: &mut Vec<Vec<f64>>) -> Node {
        match e {
            Expr::Num(v) => Node::Num(*v),
            Expr::Var(v) => Node::Var(*v),
            _ if !e.uses(Var::N) => {
                cached.push(points.iter().map(|&t| e.eval(&Env::point(t))).collect());
                Node::Cached(cached.len() - 1)
            }
            Expr::Call(f, a) => Node::Call(*f, Box::new(Self::lower(a, points, cached))),
            Expr::Binary(op, l, r) => Node::Binary(
                *op,
                Box::new(Self::lower(l, points, cached)),
                Box::new(Self::lower(r, points, cached)),
            ),
            Expr::Pow(b, x) if !b.uses(Var::N) => {
                let base: Vec<f64> = points.iter().map(|&t| b.eval(&Env::point(t))).collect();
                cached.push(base.iter().map(|v| v.ln()).collect());
                cached.push(base);
                let k = cached.len();
                Node::PowCachedBase(k - 1, k - 2, Box::new(Self::lower(x, points, cached)))
            }
            Expr::Pow(b, x) => Node::Pow(
                Box::new(Self::lower(b, points, cached)),
                Box::new(Self::lower(x, points, cached)),
            ),
        }
    }

    /// Values at every grid point for index `n`; `points` must be the grid the
    /// program was built on.
    pub fn eval_grid(&self, points: &[f64], n: f64) -> Vec<f64> {
        self.grid_node(&self.root, points, n).into_owned()
    }

    fn grid_node<'a>(&'a self, node: &Node, points: &'a [f64], n: f64) -> Cow<'a, [f64]> {
        let map = |v: Cow<[f64]>, f: &dyn Fn(f64) -> f64| -> Cow<'a, [f64]> {
            Cow::Owned(v.iter().map(|&x| f(x)).collect())
        };
        match node {
            Node::Cached(k) => Cow::Borrowed(&self.cached[*k]),
            Node::Num(v) => Cow::Owned(vec![*v; points.len()]),
            Node::Var(Var::T) => Cow::Borrowed(points),
            Node::Var(Var::N) => Cow::Owned(vec![n; points.len()]),
            Node::Var(_) => Cow::Owned(vec![0.0; points.len()]),
            Node::Call(f, a) => map(self.grid_node(a, points, n), &|x| f.apply(x)),
            Node::Binary(op, l, r) => {
                let (a, b) = (self.grid_node(l, points, n), self.grid_node(r, points, n));
                let z = a.iter().zip(b.iter());
                Cow::Owned(match op {
                    BinOp::Add => z.map(|(x, y)| x + y).collect(),
                    BinOp::Sub => z.map(|(x, y)| x - y).collect(),
                    BinOp::Mul => z.map(|(x, y)| x * y).collect(),
                    BinOp::Div => z.map(|(x, y)| x / y).collect(),
                })
            }
            Node::Pow(b, e) => {
                let (b, e) = (self.grid_node(b, points, n), self.grid_node(e, points, n));
                Cow::Owned(b.iter().zip(e.iter()).map(|(&x, &y)| log_space_pow(x, y)).collect())
            }
            Node::PowCachedBase(b, ln_b, e) => {
                let e = self.grid_node(e, points, n);
                let (base, ln_base) = (&self.cached[*b], &self.cached[*ln_b]);
                Cow::Owned(
                    (0..points.len())
                        .map(|i| {
                            if base[i] > 0.0 {
                                (e[i] * ln_base[i]).exp()
                            } else {
                                log_space_pow(base[i], e[i])
                            }
                        })
                        .collect(),
                )
            }
        }
    }

    /// Value at grid point `i` (which lies at `t`) for index `n`.
    pub fn eval(&self, i: usize, t: f64, n: f64) -> f64 {
        self.eval_node(&self.root, i, t, n)
    }

    fn eval_node(&self, node: &Node, i: usize, t: f64, n: f64) -> f64 {
        match node {
            Node::Cached(k) => self.cached[*k][i],
            Node::Num(v) => *v,
            Node::Var(Var::T) => t,
            Node::Var(Var::N) => n,
            Node::Var(_) => 0.0,
            Node::Call(f, a) => f.apply(self.eval_node(a, i, t, n)),
            Node::Binary(op, l, r) => {
                let (a, b) = (self.eval_node(l, i, t, n), self.eval_node(r, i, t, n));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                }
            }
            Node::Pow(b, e) => log_space_pow(self.eval_node(b, i, t, n), self.eval_node(e, i, t, n)),
            Node::PowCachedBase(b, ln_b, e) => {
                let (base, exponent) = (self.cached[*b][i], self.eval_node(e, i, t, n));
                if base > 0.0 {
                    (exponent * self.cached[*ln_b][i]).exp()
                } else {
                    log_space_pow(base, exponent)
                }
            }
        }
    }
}

/// Serialized as source text that parses back to the same tree.
impl Serialize for Expr {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn wrapped(e: &Expr, f: &mut fmt::Formatter<'_>, parens: bool) -> fmt::Result {
            if parens {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        }
        match self {
            // the grammar has no unary minus
            Expr::Num(v) if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) => {
                write!(f, "(0 - {})", -v)
            }
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(v) => f.write_str(v.name()),
            Expr::Call(func, arg) => write!(f, "{}({arg})", func.name()),
            Expr::Binary(op, l, r) => {
                let p = op.precedence();
                wrapped(l, f, l.precedence() < p)?;
                write!(f, " {} ", op.symbol())?;
                wrapped(r, f, r.precedence() <= p)
            }
            Expr::Pow(b, e) => {
                wrapped(b, f, b.precedence() < 4)?;
                f.write_str("^")?;
                wrapped(e, f, e.precedence() < 4)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("column {column}: expected {expected}, found {found}")]
    Syntax {
        column: usize,
        expected: String,
        found: String,
    },
    #[error("column {column}: unknown identifier `{name}`")]
    UnknownIdentifier { column: usize, name: String },
    #[error("column {column}: invalid number `{text}`")]
    InvalidNumber { column: usize, text: String },
}

impl ParseError {
    /// One-based column of the offending token.
    pub fn column(&self) -> usize {
        match self {
            ParseError::Syntax { column, .. }
            | ParseError::UnknownIdentifier { column, .. }
            | ParseError::InvalidNumber { column, .. } => *column,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number `{v}`"),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Op(c) => format!("`{c}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let column = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i < chars.len() && chars[i] == '.' {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            let text: String = chars[start..i].iter().collect();
            match text.parse::<f64>() {
                Ok(v) if v.is_finite() => out.push((Tok::Num(v), column)),
                _ => return Err(ParseError::InvalidNumber { column, text }),
            }
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), column));
        } else {
            let tok = match c {
                '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                _ => {
                    return Err(ParseError::Syntax {
                        column,
                        expected: "expression".into(),
                        found: format!("`{c}`"),
                    })
                }
            };
            out.push((tok, column));
            i += 1;
        }
    }
    out.push((Tok::End, chars.len() + 1));
    Ok(out)
}

struct Parser<'v> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    vars: &'v [Var],
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn column(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, expected: &str) -> ParseError {
        ParseError::Syntax {
            column: self.column(),
            expected: expected.into(),
            found: self.peek().describe(),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.factor()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if let Tok::Op('^') = self.peek() {
            self.bump();
            let exponent = self.atom()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Num(v))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                let column = self.column();
                if let Some(func) = Func::from_name(&name) {
                    self.bump();
                    if *self.peek() != Tok::LParen {
                        return Err(self.unexpected("`(`"));
                    }
                    self.bump();
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                match Var::from_name(&name) {
                    Some(v) if self.vars.contains(&v) => {
                        self.bump();
                        Ok(Expr::Var(v))
                    }
                    _ => Err(ParseError::UnknownIdentifier { column, name }),
                }
            }
            _ => Err(self.unexpected("expression")),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        if *self.peek() == Tok::RParen {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected("`)`"))
        }
    }
}

/// Parses `src`, accepting only the variables in `vars`.
pub fn parse_expr(src: &str, vars: &[Var]) -> Result<Expr, ParseError> {
    let toks = tokenize(src)?;
    let mut p = Parser { toks, pos: 0, vars };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.unexpected("operator or end of input"));
    }
    Ok(e)
}

/// Parses a family expression in `t` and `n`.
pub fn parse_family(src: &str) -> Result<FamilyExpr, ParseError> {
    parse_expr(src, FAMILY_VARS)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn var(v: Var) -> Box<Expr> {
        Box::new(Expr::Var(v))
    }

    #[test]
    fn parses_power_family() {
        assert_eq!(parse_family("t^n").unwrap(), Expr::Pow(var(Var::T), var(Var::N)));
    }

    #[test]
    fn parses_weighted_power_family() {
        assert_eq!(
            parse_family("n * t^n").unwrap(),
            Expr::Binary(
                BinOp::Mul,
                var(Var::N),
                Box::new(Expr::Pow(var(Var::T), var(Var::N)))
            )
        );
    }

    #[test]
    fn dangling_operator_reports_column() {
        let err = parse_family("sin(3*t) +").unwrap_err();
        assert_eq!(err.column(), 11);
        match err {
            ParseError::Syntax { expected, .. } => assert_eq!(expected, "expression"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rejects_foreign_variables() {
        assert!(matches!(
            parse_family("t + s"),
            Err(ParseError::UnknownIdentifier { column: 5, .. })
        ));
        assert!(matches!(
            parse_family("tan(t)"),
            Err(ParseError::UnknownIdentifier { .. })
        ));
        assert!(parse_expr("k(t)", KERNEL_VARS).is_err());
        assert!(parse_expr("exp(t - s)", KERNEL_VARS).is_ok());
    }

    #[test]
    fn rejects_malformed_input() {
        for bad in ["", "(t", "t)", "sin t", "t^", "t t", "2 ^ t ^ n", "1.2.3", "#"] {
            assert!(parse_family(bad).is_err(), "{bad:?} should not parse");
        }
    }

    #[test]
    fn left_associative_subtraction() {
        let e = parse_family("1 - 2 - 3").unwrap();
        assert_eq!(e.eval(&Env::default()), -4.0);
        let e = parse_family("8 / 4 / 2").unwrap();
        assert_eq!(e.eval(&Env::default()), 1.0);
    }

    #[test]
    fn log_space_power_does_not_underflow_early() {
        let e = parse_family("t^n").unwrap();
        let v = e.eval(&Env::member(0.99, 1e4));
        let oracle = (1e4 * 0.99f64.ln()).exp();
        assert!(v > 0.0 && v.is_finite());
        assert!((v / oracle - 1.0).abs() < 1e-12);
        assert!((v - 2.2e-44).abs() < 0.05e-44);
        assert_eq!(e.eval(&Env::member(0.0, 3.0)), 0.0);
        assert_eq!(e.eval(&Env::member(1.0, 1e300)), 1.0);
        assert_eq!(e.eval(&Env::member(0.5, 1e300)), 0.0);
    }

    #[test]
    fn grid_program_matches_tree_evaluation_bitwise() {
        let pts: Vec<f64> = (0..=200).map(|i| i as f64 * 0.005).collect();
        for src in ["t^n", "0.3*t^2 - sin(t) + 1.2*t^n/n", "exp(t)*(n*t)", "n", "2 + 3", "cos(n*t) + t^(1/2)"] {
            let e = parse_family(src).unwrap();
            let prog = GridProgram::new(&e, &pts);
            for n in [1.0, 7.0, 1e4] {
                for (i, &t) in pts.iter().enumerate() {
                    assert_eq!(prog.eval(i, t, n).to_bits(), e.eval(&Env::member(t, n)).to_bits(), "{src}");
                }
                let all = prog.eval_grid(&pts, n);
                for (i, &t) in pts.iter().enumerate() {
                    assert_eq!(all[i].to_bits(), e.eval(&Env::member(t, n)).to_bits(), "{src}");
                }
            }
        }
    }

    #[test]
    fn negative_bases() {
        assert!((log_space_pow(-2.0, 3.0) + 8.0).abs() < 1e-12);
        assert!((log_space_pow(-2.0, 2.0) - 4.0).abs() < 1e-12);
        assert!(log_space_pow(-2.0, 0.5).is_nan());
        assert_eq!(log_space_pow(0.0, 0.0), 1.0);
        assert!(log_space_pow(0.0, -1.0).is_infinite());
    }

    #[test]
    fn divergence_flag() {
        assert!(parse_family("log(t)").unwrap().may_diverge());
        assert!(parse_family("1 / t").unwrap().may_diverge());
        assert!(!parse_family("sin(n*t) + t^n").unwrap().may_diverge());
    }

    #[test]
    fn negative_constants_print_parseably() {
        let e = Expr::Binary(BinOp::Mul, Box::new(Expr::Num(-2.0)), var(Var::T));
        let printed = e.to_string();
        let back = parse_family(&printed).unwrap();
        assert_eq!(back.eval(&Env::point(0.25)), -0.5);
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (0u32..1000, 0u32..4).prop_map(|(m, d)| Expr::Num(m as f64 / 10f64.powi(d as i32))),
            Just(Expr::Var(Var::T)),
            Just(Expr::Var(Var::N)),
        ];
        leaf.prop_recursive(4, 32, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone(), 0..4usize).prop_map(|(l, r, k)| {
                    let op = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div][k];
                    Expr::Binary(op, Box::new(l), Box::new(r))
                }),
                (inner.clone(), inner.clone())
                    .prop_map(|(b, e)| Expr::Pow(Box::new(b), Box::new(e))),
                (inner, 0..5usize).prop_map(|(a, k)| {
                    let f = [Func::Sin, Func::Cos, Func::Exp, Func::Log, Func::Abs][k];
                    Expr::Call(f, Box::new(a))
                }),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(e in arb_expr()) {
            let printed = e.to_string();
            let back = parse_family(&printed).unwrap();
            prop_assert_eq!(&back, &e, "printed as {}", printed);
            prop_assert_eq!(back.to_string(), printed);
        }
    }
}

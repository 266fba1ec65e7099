use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use crate::lexer::{ParseError, Token, Tokens};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sqrt,
    Exp,
    Log,
    Abs,
    /// Smooth transition `ψ(s) = f(s)/(f(s)+f(1−s))`, `f(s) = e^{−1/s}` for `s > 0`:
    /// `ψ = 0` for `s ≤ 0`, `ψ = 1` for `s ≥ 1`, and `ψ ∈ C^∞`.
    Step,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Abs => "abs",
            Func::Step => "step",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "sqrt" => Func::Sqrt,
            "exp" => Func::Exp,
            "log" | "ln" => Func::Log,
            "abs" => Func::Abs,
            "step" => Func::Step,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Var(usize),
    Add(ScalarExpr, ScalarExpr),
    Sub(ScalarExpr, ScalarExpr),
    Mul(ScalarExpr, ScalarExpr),
    Div(ScalarExpr, ScalarExpr),
    Neg(ScalarExpr),
    Pow(ScalarExpr, f64),
    Unary(Func, ScalarExpr),
}

/// Immutable expression tree over variables `x₀…x_{n−1}`; subtrees are shared.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarExpr(pub(crate) Arc<Node>);

impl ScalarExpr {
    fn node(n: Node) -> Self {
        ScalarExpr(Arc::new(n))
    }

    pub fn constant(c: f64) -> Self {
        Self::node(Node::Const(c))
    }

    pub fn var(i: usize) -> Self {
        Self::node(Node::Var(i))
    }

    pub fn powf(&self, p: f64) -> Self {
        if p == 1.0 {
            return self.clone();
        }
        Self::node(Node::Pow(self.clone(), p))
    }

    pub fn apply(&self, f: Func) -> Self {
        Self::node(Node::Unary(f, self.clone()))
    }

    pub fn sqrt(&self) -> Self {
        self.apply(Func::Sqrt)
    }

    pub fn exp(&self) -> Self {
        self.apply(Func::Exp)
    }

    pub fn ln(&self) -> Self {
        self.apply(Func::Log)
    }

    pub fn abs(&self) -> Self {
        self.apply(Func::Abs)
    }

    pub fn step(&self) -> Self {
        self.apply(Func::Step)
    }

    pub fn kind(&self) -> &Node {
        &self.0
    }

    pub fn as_constant(&self) -> Option<f64> {
        match *self.0 {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    /// Largest variable index plus one.
    pub fn arity(&self) -> usize {
        match &*self.0 {
            Node::Const(_) => 0,
            Node::Var(i) => i + 1,
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => a.arity().max(b.arity()),
            Node::Neg(a) | Node::Pow(a, _) | Node::Unary(_, a) => a.arity(),
        }
    }

    /// Replaces variable `i` by `subs[i]`.
    pub fn substitute(&self, subs: &[ScalarExpr]) -> ScalarExpr {
        match &*self.0 {
            Node::Const(_) => self.clone(),
            Node::Var(i) => subs[*i].clone(),
            Node::Add(a, b) => a.substitute(subs) + b.substitute(subs),
            Node::Sub(a, b) => a.substitute(subs) - b.substitute(subs),
            Node::Mul(a, b) => a.substitute(subs) * b.substitute(subs),
            Node::Div(a, b) => a.substitute(subs) / b.substitute(subs),
            Node::Neg(a) => -a.substitute(subs),
            Node::Pow(a, p) => a.substitute(subs).powf(*p),
            Node::Unary(f, a) => a.substitute(subs).apply(*f),
        }
    }

    pub fn parse(src: &str, names: &[String]) -> Result<ScalarExpr, ParseError> {
        let mut t = Tokens::new(src)?;
        let e = ExprParser { names }.expr(&mut t)?;
        t.finish()?;
        Ok(e)
    }

    pub fn to_string_with(&self, names: &[String]) -> String {
        let mut s = String::new();
        write_expr(self, names, 0, &mut s);
        s
    }

    /// Evaluates without compiling; for one-off use. Hot loops should compile a [`super::Tape`].
    pub fn eval(&self, x: &[f64]) -> Result<f64, super::EvalError> {
        super::Tape::compile(self, x.len())?.value(x)
    }
}

// precedence levels: 0 sum, 1 product, 2 unary minus, 3 power, 4 atom
fn write_expr(e: &ScalarExpr, names: &[String], ctx: u8, out: &mut String) {
    let (prec, body) = match &*e.0 {
        Node::Const(c) => {
            let s = format_f64(*c);
            if *c < 0.0 {
                (2, s)
            } else {
                (4, s)
            }
        }
        Node::Var(i) => (4, names.get(*i).cloned().unwrap_or_else(|| format!("x{}", i + 1))),
        Node::Add(a, b) => (0, format!("{} + {}", sub(a, names, 0), sub(b, names, 1))),
        Node::Sub(a, b) => (0, format!("{} - {}", sub(a, names, 0), sub(b, names, 1))),
        Node::Mul(a, b) => (1, format!("{}*{}", sub(a, names, 1), sub(b, names, 2))),
        Node::Div(a, b) => (1, format!("{}/{}", sub(a, names, 1), sub(b, names, 2))),
        Node::Neg(a) => (2, format!("-{}", sub(a, names, 2))),
        Node::Pow(a, p) => {
            let ps = format_f64(*p);
            let ps = if *p < 0.0 { format!("({ps})") } else { ps };
            (3, format!("{}^{}", sub(a, names, 4), ps))
        }
        Node::Unary(f, a) => (4, format!("{}({})", f.name(), sub(a, names, 0))),
    };
    if prec < ctx {
        out.push('(');
        out.push_str(&body);
        out.push(')');
    } else {
        out.push_str(&body);
    }
}

fn sub(e: &ScalarExpr, names: &[String], ctx: u8) -> String {
    let mut s = String::new();
    write_expr(e, names, ctx, &mut s);
    s
}

/// Shortest representation that round-trips.
fn format_f64(c: f64) -> String {
    let s = format!("{c:?}");
    s.strip_suffix(".0").map(str::to_string).unwrap_or(s)
}

impl fmt::Display for ScalarExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names = crate::lexer::default_var_names(self.arity());
        write!(f, "{}", self.to_string_with(&names))
    }
}

macro_rules! expr_binop {
    ($tr:ident, $m:ident, $node:ident) => {
        impl $tr for ScalarExpr {
            type Output = ScalarExpr;
            fn $m(self, rhs: ScalarExpr) -> ScalarExpr {
                ScalarExpr::node(Node::$node(self, rhs))
            }
        }
        impl $tr<&ScalarExpr> for &ScalarExpr {
            type Output = ScalarExpr;
            fn $m(self, rhs: &ScalarExpr) -> ScalarExpr {
                ScalarExpr::node(Node::$node(self.clone(), rhs.clone()))
            }
        }
        impl $tr<f64> for ScalarExpr {
            type Output = ScalarExpr;
            fn $m(self, rhs: f64) -> ScalarExpr {
                ScalarExpr::node(Node::$node(self, ScalarExpr::constant(rhs)))
            }
        }
        impl $tr<ScalarExpr> for f64 {
            type Output = ScalarExpr;
            fn $m(self, rhs: ScalarExpr) -> ScalarExpr {
                ScalarExpr::node(Node::$node(ScalarExpr::constant(self), rhs))
            }
        }
    };
}
expr_binop!(Add, add, Add);
expr_binop!(Sub, sub, Sub);
expr_binop!(Mul, mul, Mul);
expr_binop!(Div, div, Div);

impl Neg for ScalarExpr {
    type Output = ScalarExpr;
    fn neg(self) -> ScalarExpr {
        ScalarExpr::node(Node::Neg(self))
    }
}

impl Neg for &ScalarExpr {
    type Output = ScalarExpr;
    fn neg(self) -> ScalarExpr {
        -self.clone()
    }
}

struct ExprParser<'a> {
    names: &'a [String],
}

impl ExprParser<'_> {
    fn expr(&self, t: &mut Tokens) -> Result<ScalarExpr, ParseError> {
        let mut acc = self.term(t)?;
        loop {
            if t.eat(&Token::Plus) {
                acc = acc + self.term(t)?;
            } else if t.eat(&Token::Minus) {
                acc = acc - self.term(t)?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&self, t: &mut Tokens) -> Result<ScalarExpr, ParseError> {
        let mut acc = self.unary(t)?;
        loop {
            if t.eat(&Token::Star) {
                acc = acc * self.unary(t)?;
            } else if t.eat(&Token::Slash) {
                acc = acc / self.unary(t)?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&self, t: &mut Tokens) -> Result<ScalarExpr, ParseError> {
        if t.eat(&Token::Minus) {
            let inner = self.unary(t)?;
            return Ok(match inner.as_constant() {
                Some(c) => ScalarExpr::constant(-c),
                None => -inner,
            });
        }
        if t.eat(&Token::Plus) {
            return self.unary(t);
        }
        self.power(t)
    }

    fn power(&self, t: &mut Tokens) -> Result<ScalarExpr, ParseError> {
        let base = self.atom(t)?;
        if !t.eat(&Token::Caret) {
            return Ok(base);
        }
        let exponent = self.unary(t)?;
        let p = fold_constant(&exponent)
            .ok_or_else(|| ParseError::InvalidExponent(format!("non-constant exponent {exponent}")))?;
        Ok(base.powf(p))
    }

    fn atom(&self, t: &mut Tokens) -> Result<ScalarExpr, ParseError> {
        match t.next() {
            Some(Token::Number(s)) => s
                .parse::<f64>()
                .map(ScalarExpr::constant)
                .map_err(|_| ParseError::InvalidNumber(s)),
            Some(Token::Ident(name)) => {
                if t.eat(&Token::LParen) {
                    let f = Func::from_name(&name).ok_or(ParseError::UnknownFunction(name))?;
                    let arg = self.expr(t)?;
                    t.expect(&Token::RParen)?;
                    return Ok(arg.apply(f));
                }
                if let Some(i) = self.names.iter().position(|v| *v == name) {
                    return Ok(ScalarExpr::var(i));
                }
                match name.as_str() {
                    "pi" => Ok(ScalarExpr::constant(std::f64::consts::PI)),
                    _ => Err(ParseError::UnknownVariable(name)),
                }
            }
            Some(Token::LParen) => {
                let e = self.expr(t)?;
                t.expect(&Token::RParen)?;
                Ok(e)
            }
            Some(other) => Err(ParseError::UnexpectedToken(format!("{other:?}"))),
            None => Err(ParseError::UnexpectedEnd),
        }
    }
}

/// Evaluates a variable-free expression.
fn fold_constant(e: &ScalarExpr) -> Option<f64> {
    if e.arity() > 0 {
        return None;
    }
    e.eval(&[]).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexer::default_var_names;

    fn parse(s: &str, n: usize) -> ScalarExpr {
        ScalarExpr::parse(s, &default_var_names(n)).unwrap()
    }

    #[test]
    fn parse_display_round_trip() {
        let srcs = [
            "((x1^2 + x2^2)^2 + 16*x3^2)^(1/4)",
            "x1 - (x2 - x3)",
            "-x1^2",
            "exp(-x1)*sqrt(abs(x2)) / (1 + x3)^(-1.5)",
            "step((x1 - 2)/2)",
            "2^-1 * x1",
        ];
        for s in srcs {
            let e = parse(s, 3);
            let back = parse(&e.to_string_with(&default_var_names(3)), 3);
            let p = [0.3, -1.7, 2.2];
            let (a, b) = (e.eval(&p).unwrap(), back.eval(&p).unwrap());
            assert!((a - b).abs() <= 1e-15 * a.abs().max(1.0), "{s}: {a} vs {b}");
        }
    }

    #[test]
    fn unary_minus_binds_looser_than_power() {
        assert_eq!(parse("-x1^2", 1).eval(&[3.0]).unwrap(), -9.0);
        assert_eq!(parse("2^3^2", 0).eval(&[]).unwrap(), 512.0);
    }

    #[test]
    fn parse_errors() {
        let names = default_var_names(2);
        assert!(ScalarExpr::parse("x1^x2", &names).is_err());
        assert!(ScalarExpr::parse("foo(x1)", &names).is_err());
        assert!(ScalarExpr::parse("x3", &names).is_err());
        assert!(ScalarExpr::parse("(x1", &names).is_err());
    }

    #[test]
    fn substitution_composes() {
        let q = parse("x1^(-2)", 1);
        let t = parse("1 + x1^2 + x2^2", 2);
        let composed = q.substitute(&[t]);
        assert!((composed.eval(&[1.0, 1.0]).unwrap() - 1.0 / 9.0).abs() < 1e-15);
    }
}

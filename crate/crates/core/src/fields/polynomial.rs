use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::FieldError;
use crate::lexer::{default_var_names, ParseError, Token, Tokens};

pub type Rational = BigRational;

/// Build a rational `num/den` from machine integers.
pub fn rat(num: i64, den: i64) -> Rational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Exponent vector of a monomial. Lexicographic order makes the term map canonical.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Monomial(pub Vec<u32>);

impl Monomial {
    pub fn one(n: usize) -> Self {
        Monomial(vec![0; n])
    }

    pub fn total_degree(&self) -> u32 {
        self.0.iter().sum()
    }

    /// Weighted degree `Σ αᵢσᵢ`.
    pub fn weighted_degree(&self, sigma: &[u32]) -> u64 {
        self.0.iter().zip(sigma).map(|(&a, &s)| a as u64 * s as u64).sum()
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }
}

/// Weighted degree of a polynomial under a dilation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightedDegree {
    /// The zero polynomial is homogeneous of every degree.
    Zero,
    Homogeneous(u64),
    Mixed,
}

/// Multivariate polynomial in `n` variables with exact rational coefficients.
///
/// No stored coefficient is zero, so structural equality is polynomial equality.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Monomial, Rational>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Self {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: Rational) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(Monomial::one(nvars), c);
        p
    }

    pub fn one(nvars: usize) -> Self {
        Self::constant(nvars, Rational::one())
    }

    /// The coordinate function `x_{i+1}` (zero-based index `i`).
    pub fn var(nvars: usize, i: usize) -> Self {
        assert!(i < nvars, "variable index {i} out of range for {nvars} variables");
        let mut e = vec![0; nvars];
        e[i] = 1;
        let mut p = Self::zero(nvars);
        p.add_term(Monomial(e), Rational::one());
        p
    }

    pub fn monomial(nvars: usize, exps: Vec<u32>, coeff: Rational) -> Self {
        assert_eq!(exps.len(), nvars);
        let mut p = Self::zero(nvars);
        p.add_term(Monomial(exps), coeff);
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Rational)> {
        self.terms.iter()
    }

    /// Constant term value, if the polynomial is constant.
    pub fn as_constant(&self) -> Option<Rational> {
        match self.terms.len() {
            0 => Some(Rational::zero()),
            1 => {
                let (m, c) = self.terms.iter().next().unwrap();
                (m.total_degree() == 0).then(|| c.clone())
            }
            _ => None,
        }
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(Monomial::total_degree).max().unwrap_or(0)
    }

    fn add_term(&mut self, m: Monomial, c: Rational) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(m);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    fn check_dims(&self, other: &Polynomial) -> Result<(), FieldError> {
        if self.nvars != other.nvars {
            return Err(FieldError::DimensionMismatch {
                expected: self.nvars,
                found: other.nvars,
            });
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Polynomial) -> Result<Polynomial, FieldError> {
        self.check_dims(other)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn try_sub(&self, other: &Polynomial) -> Result<Polynomial, FieldError> {
        self.check_dims(other)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), -c.clone());
        }
        Ok(out)
    }

    pub fn try_mul(&self, other: &Polynomial) -> Result<Polynomial, FieldError> {
        self.check_dims(other)?;
        let mut out = Polynomial::zero(self.nvars);
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                out.add_term(m1.mul(m2), c1 * c2);
            }
        }
        Ok(out)
    }

    pub fn scale(&self, c: &Rational) -> Polynomial {
        let mut out = Polynomial::zero(self.nvars);
        if c.is_zero() {
            return out;
        }
        for (m, k) in &self.terms {
            out.terms.insert(m.clone(), k * c);
        }
        out
    }

    pub fn pow(&self, e: u32) -> Polynomial {
        let mut acc = Polynomial::one(self.nvars);
        for _ in 0..e {
            acc = &acc * self;
        }
        acc
    }

    /// Partial derivative with respect to the zero-based variable `i`.
    pub fn derivative(&self, i: usize) -> Polynomial {
        let mut out = Polynomial::zero(self.nvars);
        for (m, c) in &self.terms {
            let e = m.0[i];
            if e == 0 {
                continue;
            }
            let mut m2 = m.clone();
            m2.0[i] -= 1;
            out.add_term(m2, c * BigInt::from(e));
        }
        out
    }

    pub fn eval_f64(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.nvars);
        self.terms
            .iter()
            .map(|(m, c)| {
                let mut v = c.to_f64().unwrap_or(f64::NAN);
                for (xi, &e) in x.iter().zip(&m.0) {
                    if e > 0 {
                        v *= xi.powi(e as i32);
                    }
                }
                v
            })
            .sum()
    }

    /// Exact evaluation at a rational point.
    pub fn eval_exact(&self, x: &[Rational]) -> Rational {
        let mut acc = Rational::zero();
        for (m, c) in &self.terms {
            let mut v = c.clone();
            for (xi, &e) in x.iter().zip(&m.0) {
                for _ in 0..e {
                    v *= xi;
                }
            }
            acc += v;
        }
        acc
    }

    pub fn weighted_degree(&self, sigma: &[u32]) -> WeightedDegree {
        let mut degs = self.terms.keys().map(|m| m.weighted_degree(sigma));
        let Some(first) = degs.next() else {
            return WeightedDegree::Zero;
        };
        if degs.all(|d| d == first) {
            WeightedDegree::Homogeneous(first)
        } else {
            WeightedDegree::Mixed
        }
    }

    /// Sets the variables with index `>= keep` to zero and drops them.
    pub fn truncate_vars_at_zero(&self, keep: usize) -> Polynomial {
        let mut out = Polynomial::zero(keep);
        for (m, c) in &self.terms {
            if m.0[keep..].iter().all(|&e| e == 0) {
                out.add_term(Monomial(m.0[..keep].to_vec()), c.clone());
            }
        }
        out
    }

    /// Sets the first `count` variables to zero and drops them.
    pub fn drop_leading_at_zero(&self, count: usize) -> Polynomial {
        let mut out = Polynomial::zero(self.nvars - count);
        for (m, c) in &self.terms {
            if m.0[..count].iter().all(|&e| e == 0) {
                out.add_term(Monomial(m.0[count..].to_vec()), c.clone());
            }
        }
        out
    }

    /// Re-embeds the polynomial into `total` variables, placing its variables at `offset..`.
    pub fn embed(&self, total: usize, offset: usize) -> Polynomial {
        assert!(offset + self.nvars <= total);
        let mut out = Polynomial::zero(total);
        for (m, c) in &self.terms {
            let mut e = vec![0; total];
            e[offset..offset + self.nvars].copy_from_slice(&m.0);
            out.add_term(Monomial(e), c.clone());
        }
        out
    }

    /// Coefficient/exponent pairs in floating point, for fast repeated evaluation.
    pub fn compile(&self) -> CompiledPoly {
        CompiledPoly {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .map(|(m, c)| {
                    let factors =
                        m.0.iter()
                            .enumerate()
                            .filter(|(_, &e)| e > 0)
                            .map(|(i, &e)| (i as u32, e))
                            .collect();
                    (c.to_f64().unwrap_or(f64::NAN), factors)
                })
                .collect(),
        }
    }

    /// Parses the text grammar: variables `x1..xn`, integer/decimal/rational constants,
    /// `+ - * /` (division by constants only) and `^` with non-negative integer exponents.
    pub fn parse(src: &str, nvars: usize) -> Result<Polynomial, ParseError> {
        Self::parse_with_names(src, &default_var_names(nvars))
    }

    pub fn parse_with_names(src: &str, names: &[String]) -> Result<Polynomial, ParseError> {
        let mut toks = Tokens::new(src)?;
        let p = PolyParser { names }.expr(&mut toks)?;
        toks.finish()?;
        Ok(p)
    }

    pub fn to_string_with(&self, names: &[String]) -> String {
        if self.terms.is_empty() {
            return "0".to_string();
        }
        let mut s = String::new();
        // highest total degree first reads more naturally
        let mut terms: Vec<_> = self.terms.iter().collect();
        terms.sort_by(|a, b| b.0.total_degree().cmp(&a.0.total_degree()).then(b.0.cmp(a.0)));
        for (k, (m, c)) in terms.into_iter().enumerate() {
            let neg = c.is_negative();
            let abs = c.abs();
            if k == 0 {
                if neg {
                    s.push('-');
                }
            } else {
                s.push_str(if neg { " - " } else { " + " });
            }
            let mono: Vec<String> =
                m.0.iter()
                    .enumerate()
                    .filter(|(_, &e)| e > 0)
                    .map(|(i, &e)| {
                        if e == 1 {
                            names[i].clone()
                        } else {
                            format!("{}^{}", names[i], e)
                        }
                    })
                    .collect();
            if mono.is_empty() {
                s.push_str(&abs.to_string());
            } else {
                if !abs.is_one() {
                    s.push_str(&abs.to_string());
                    s.push('*');
                }
                s.push_str(&mono.join("*"));
            }
        }
        s
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_string_with(&default_var_names(self.nvars)))
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $try:ident) => {
        impl $tr<&Polynomial> for &Polynomial {
            type Output = Polynomial;
            fn $m(self, rhs: &Polynomial) -> Polynomial {
                self.$try(rhs).expect("polynomial dimension mismatch")
            }
        }
        impl $tr<Polynomial> for Polynomial {
            type Output = Polynomial;
            fn $m(self, rhs: Polynomial) -> Polynomial {
                (&self).$m(&rhs)
            }
        }
    };
}
binop!(Add, add, try_add);
binop!(Sub, sub, try_sub);
binop!(Mul, mul, try_mul);

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(&-Rational::one())
    }
}

impl Neg for Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        -&self
    }
}

/// Floating-point image of a [`Polynomial`].
#[derive(Debug, Clone)]
pub struct CompiledPoly {
    nvars: usize,
    terms: Vec<(f64, Vec<(u32, u32)>)>,
}

impl CompiledPoly {
    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (c, factors) in &self.terms {
            let mut v = *c;
            for &(i, e) in factors {
                v *= x[i as usize].powi(e as i32);
            }
            acc += v;
        }
        acc
    }
}

/// Exact decimal/scientific literal to rational.
pub(crate) fn parse_rational_literal(s: &str) -> Result<Rational, ParseError> {
    let bad = || ParseError::InvalidNumber(s.to_string());
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(k) => (&s[..k], s[k + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (int_part, frac_part) = match mantissa.find('.') {
        Some(k) => (&mantissa[..k], &mantissa[k + 1..]),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if frac_part.contains('.') {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let num: BigInt = digits.parse().map_err(|_| bad())?;
    let scale = exp - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let r = if scale >= 0 {
        Rational::from_integer(num * num_traits::pow(ten, scale as usize))
    } else {
        Rational::new(num, num_traits::pow(ten, (-scale) as usize))
    };
    Ok(r)
}

struct PolyParser<'a> {
    names: &'a [String],
}

impl PolyParser<'_> {
    fn n(&self) -> usize {
        self.names.len()
    }

    fn expr(&self, t: &mut Tokens) -> Result<Polynomial, ParseError> {
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

    fn term(&self, t: &mut Tokens) -> Result<Polynomial, ParseError> {
        let mut acc = self.unary(t)?;
        loop {
            if t.eat(&Token::Star) {
                acc = acc * self.unary(t)?;
            } else if t.eat(&Token::Slash) {
                let d = self.unary(t)?;
                match d.as_constant() {
                    Some(c) if !c.is_zero() => acc = acc.scale(&c.recip()),
                    _ => return Err(ParseError::InvalidDivision),
                }
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&self, t: &mut Tokens) -> Result<Polynomial, ParseError> {
        if t.eat(&Token::Minus) {
            return Ok(-self.unary(t)?);
        }
        if t.eat(&Token::Plus) {
            return self.unary(t);
        }
        self.power(t)
    }

    fn power(&self, t: &mut Tokens) -> Result<Polynomial, ParseError> {
        let base = self.atom(t)?;
        if t.eat(&Token::Caret) {
            match t.next() {
                Some(Token::Number(s)) => {
                    let e: u32 = s.parse().map_err(|_| ParseError::InvalidExponent(s))?;
                    Ok(base.pow(e))
                }
                Some(other) => Err(ParseError::InvalidExponent(format!("{other:?}"))),
                None => Err(ParseError::UnexpectedEnd),
            }
        } else {
            Ok(base)
        }
    }

    fn atom(&self, t: &mut Tokens) -> Result<Polynomial, ParseError> {
        match t.next() {
            Some(Token::Number(s)) => Ok(Polynomial::constant(self.n(), parse_rational_literal(&s)?)),
            Some(Token::Ident(name)) => match self.names.iter().position(|v| *v == name) {
                Some(i) => Ok(Polynomial::var(self.n(), i)),
                None => Err(ParseError::UnknownVariable(name)),
            },
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

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display_round_trip() {
        let p = Polynomial::parse("1/2*x2 - 3*x1^2*x3 + 7", 3).unwrap();
        let q = Polynomial::parse(&p.to_string(), 3).unwrap();
        assert_eq!(p, q);
        assert_eq!(
            Polynomial::parse("0.5*x1", 1).unwrap(),
            Polynomial::var(1, 0).scale(&rat(1, 2))
        );
    }

    #[test]
    fn zero_terms_are_never_stored() {
        let p = Polynomial::parse("x1 - x1 + x2*x1 - x1*x2", 2).unwrap();
        assert!(p.is_zero());
        assert_eq!(p.num_terms(), 0);
    }

    #[test]
    fn derivative_power_rule() {
        let p = Polynomial::parse("x1^2", 1).unwrap();
        assert_eq!(p.derivative(0), Polynomial::parse("2*x1", 1).unwrap());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Polynomial::parse("x1 / x2", 2).is_err());
        assert!(Polynomial::parse("x1^-1", 1).is_err());
        assert!(Polynomial::parse("x4", 3).is_err());
        assert!(Polynomial::parse("x1 +", 1).is_err());
    }

    #[test]
    fn weighted_degree_classification() {
        let sigma = [1, 2];
        assert_eq!(
            Polynomial::parse("x1^2 + x2", 2).unwrap().weighted_degree(&sigma),
            WeightedDegree::Homogeneous(2)
        );
        assert_eq!(
            Polynomial::parse("x1 + x2", 2).unwrap().weighted_degree(&sigma),
            WeightedDegree::Mixed
        );
        assert_eq!(Polynomial::zero(2).weighted_degree(&sigma), WeightedDegree::Zero);
    }

    #[test]
    fn scientific_literals_are_exact() {
        assert_eq!(parse_rational_literal("1e-3").unwrap(), rat(1, 1000));
        assert_eq!(parse_rational_literal("2.5E2").unwrap(), rat(250, 1));
    }
}

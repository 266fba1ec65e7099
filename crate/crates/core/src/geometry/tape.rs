//! Flattened expression evaluator with forward-mode first and second derivatives.

use std::collections::HashMap;

use super::expr::{Func, Node, ScalarExpr};
use super::EvalError;

#[derive(Debug, Clone, Copy)]
enum Op {
    Const(f64),
    Var(u32),
    Add(u32, u32),
    Sub(u32, u32),
    Mul(u32, u32),
    Div(u32, u32),
    Neg(u32),
    Powi(u32, i32),
    Powf(u32, f64),
    Unary(Func, u32),
}

/// Compiled form of a [`ScalarExpr`]; shared subtrees are evaluated once.
#[derive(Debug, Clone)]
pub struct Tape {
    n: usize,
    ops: Vec<Op>,
}

/// Reusable scratch space for one [`Tape`].
#[derive(Debug, Default, Clone)]
pub struct TapeBuf {
    val: Vec<f64>,
    grad: Vec<f64>,
    hess: Vec<f64>,
}

impl Tape {
    pub fn compile(expr: &ScalarExpr, n: usize) -> Result<Tape, EvalError> {
        if expr.arity() > n {
            return Err(EvalError::Arity {
                expected: n,
                found: expr.arity(),
            });
        }
        let mut ops = Vec::new();
        let mut memo = HashMap::new();
        emit(expr, &mut ops, &mut memo);
        Ok(Tape { n, ops })
    }

    pub fn nvars(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn value(&self, x: &[f64]) -> Result<f64, EvalError> {
        self.value_with(x, &mut TapeBuf::default())
    }

    pub fn value_with(&self, x: &[f64], buf: &mut TapeBuf) -> Result<f64, EvalError> {
        self.run(x, buf, 0)?;
        Ok(*buf.val.last().unwrap())
    }

    /// Value and gradient; `grad` must have length `n`.
    pub fn gradient_with(&self, x: &[f64], buf: &mut TapeBuf, grad: &mut [f64]) -> Result<f64, EvalError> {
        self.run(x, buf, 1)?;
        let n = self.n;
        let k = self.ops.len() - 1;
        grad.copy_from_slice(&buf.grad[k * n..(k + 1) * n]);
        Ok(buf.val[k])
    }

    pub fn gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>), EvalError> {
        let mut g = vec![0.0; self.n];
        let v = self.gradient_with(x, &mut TapeBuf::default(), &mut g)?;
        Ok((v, g))
    }

    /// Value, gradient and row-major Hessian (`n×n`).
    pub fn hessian_with(
        &self,
        x: &[f64],
        buf: &mut TapeBuf,
        grad: &mut [f64],
        hess: &mut [f64],
    ) -> Result<f64, EvalError> {
        self.run(x, buf, 2)?;
        let n = self.n;
        let k = self.ops.len() - 1;
        grad.copy_from_slice(&buf.grad[k * n..(k + 1) * n]);
        hess.copy_from_slice(&buf.hess[k * n * n..(k + 1) * n * n]);
        Ok(buf.val[k])
    }

    pub fn hessian(&self, x: &[f64]) -> Result<(f64, Vec<f64>, Vec<f64>), EvalError> {
        let mut g = vec![0.0; self.n];
        let mut h = vec![0.0; self.n * self.n];
        let v = self.hessian_with(x, &mut TapeBuf::default(), &mut g, &mut h)?;
        Ok((v, g, h))
    }

    fn run(&self, x: &[f64], buf: &mut TapeBuf, order: u8) -> Result<(), EvalError> {
        let n = self.n;
        if x.len() != n {
            return Err(EvalError::Arity {
                expected: n,
                found: x.len(),
            });
        }
        let len = self.ops.len();
        buf.val.resize(len, 0.0);
        if order >= 1 {
            buf.grad.resize(len * n, 0.0);
        }
        if order >= 2 {
            buf.hess.resize(len * n * n, 0.0);
        }
        for (k, op) in self.ops.iter().enumerate() {
            let v = &mut buf.val;
            // (f, f', f'') of a unary map applied to slot a, when the op is unary
            let mut unary: Option<(usize, f64, f64, f64)> = None;
            match *op {
                Op::Const(c) => v[k] = c,
                Op::Var(i) => v[k] = x[i as usize],
                Op::Add(a, b) => v[k] = v[a as usize] + v[b as usize],
                Op::Sub(a, b) => v[k] = v[a as usize] - v[b as usize],
                Op::Mul(a, b) => v[k] = v[a as usize] * v[b as usize],
                Op::Div(a, b) => {
                    let d = v[b as usize];
                    if d == 0.0 {
                        return Err(EvalError::Domain { op: "division", arg: d });
                    }
                    v[k] = v[a as usize] / d;
                }
                Op::Neg(a) => v[k] = -v[a as usize],
                Op::Powi(a, p) => {
                    let u = v[a as usize];
                    let (f, d1, d2) = powi_derivs(u, p, order)?;
                    v[k] = f;
                    unary = Some((a as usize, f, d1, d2));
                }
                Op::Powf(a, p) => {
                    let u = v[a as usize];
                    let (f, d1, d2) = powf_derivs(u, p, order)?;
                    v[k] = f;
                    unary = Some((a as usize, f, d1, d2));
                }
                Op::Unary(func, a) => {
                    let u = v[a as usize];
                    let (f, d1, d2) = func_derivs(func, u, order)?;
                    v[k] = f;
                    unary = Some((a as usize, f, d1, d2));
                }
            }
            if !v[k].is_finite() {
                return Err(EvalError::NonFinite);
            }
            if order == 0 {
                continue;
            }
            let (gb, ga) = buf.grad.split_at_mut(k * n);
            let gk = &mut ga[..n];
            let g = |i: u32| &gb[i as usize * n..(i as usize + 1) * n];
            match *op {
                Op::Const(_) => gk.fill(0.0),
                Op::Var(i) => {
                    gk.fill(0.0);
                    gk[i as usize] = 1.0;
                }
                Op::Add(a, b) => zip2(gk, g(a), g(b), |p, q| p + q),
                Op::Sub(a, b) => zip2(gk, g(a), g(b), |p, q| p - q),
                Op::Mul(a, b) => {
                    let (va, vb) = (buf.val[a as usize], buf.val[b as usize]);
                    zip2(gk, g(a), g(b), |p, q| vb * p + va * q)
                }
                Op::Div(a, b) => {
                    let (vb, vk) = (buf.val[b as usize], buf.val[k]);
                    zip2(gk, g(a), g(b), |p, q| (p - vk * q) / vb)
                }
                Op::Neg(a) => zip2(gk, g(a), g(a), |p, _| -p),
                Op::Powi(..) | Op::Powf(..) | Op::Unary(..) => {
                    let (a, _, d1, _) = unary.unwrap();
                    zip2(gk, g(a as u32), g(a as u32), |p, _| d1 * p)
                }
            }
            if gk.iter().any(|d| !d.is_finite()) {
                return Err(EvalError::NonFinite);
            }
            if order == 1 {
                continue;
            }
            let nn = n * n;
            let (hb, ha) = buf.hess.split_at_mut(k * nn);
            let hk = &mut ha[..nn];
            let h = |i: u32| &hb[i as usize * nn..(i as usize + 1) * nn];
            let grad = &buf.grad;
            let gs = |i: usize| &grad[i * n..(i + 1) * n];
            match *op {
                Op::Const(_) | Op::Var(_) => hk.fill(0.0),
                Op::Add(a, b) => zip2(hk, h(a), h(b), |p, q| p + q),
                Op::Sub(a, b) => zip2(hk, h(a), h(b), |p, q| p - q),
                Op::Mul(a, b) => {
                    let (va, vb) = (buf.val[a as usize], buf.val[b as usize]);
                    let (ga, gbb) = (gs(a as usize), gs(b as usize));
                    for i in 0..n {
                        for j in 0..n {
                            let ij = i * n + j;
                            hk[ij] = va * h(b)[ij] + vb * h(a)[ij] + ga[i] * gbb[j] + gbb[i] * ga[j];
                        }
                    }
                }
                Op::Div(a, b) => {
                    let (vb, vk) = (buf.val[b as usize], buf.val[k]);
                    let (gbb, gkk) = (gs(b as usize), gs(k));
                    for i in 0..n {
                        for j in 0..n {
                            let ij = i * n + j;
                            hk[ij] = (h(a)[ij] - vk * h(b)[ij] - gbb[i] * gkk[j] - gkk[i] * gbb[j]) / vb;
                        }
                    }
                }
                Op::Neg(a) => zip2(hk, h(a), h(a), |p, _| -p),
                Op::Powi(..) | Op::Powf(..) | Op::Unary(..) => {
                    let (a, _, d1, d2) = unary.unwrap();
                    let ga = gs(a);
                    let ha = h(a as u32);
                    for i in 0..n {
                        for j in 0..n {
                            let ij = i * n + j;
                            hk[ij] = d1 * ha[ij] + d2 * ga[i] * ga[j];
                        }
                    }
                }
            }
            if hk.iter().any(|d| !d.is_finite()) {
                return Err(EvalError::NonFinite);
            }
        }
        Ok(())
    }
}

#[inline]
fn zip2(out: &mut [f64], a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) {
    for ((o, &p), &q) in out.iter_mut().zip(a).zip(b) {
        *o = f(p, q);
    }
}

fn emit(e: &ScalarExpr, ops: &mut Vec<Op>, memo: &mut HashMap<*const Node, u32>) -> u32 {
    let key = std::sync::Arc::as_ptr(&e.0);
    if let Some(&k) = memo.get(&key) {
        return k;
    }
    let op = match e.kind() {
        Node::Const(c) => Op::Const(*c),
        Node::Var(i) => Op::Var(*i as u32),
        Node::Add(a, b) => Op::Add(emit(a, ops, memo), emit(b, ops, memo)),
        Node::Sub(a, b) => Op::Sub(emit(a, ops, memo), emit(b, ops, memo)),
        Node::Mul(a, b) => Op::Mul(emit(a, ops, memo), emit(b, ops, memo)),
        Node::Div(a, b) => Op::Div(emit(a, ops, memo), emit(b, ops, memo)),
        Node::Neg(a) => Op::Neg(emit(a, ops, memo)),
        Node::Pow(a, p) => {
            let a = emit(a, ops, memo);
            if p.fract() == 0.0 && p.abs() <= 64.0 {
                Op::Powi(a, *p as i32)
            } else {
                Op::Powf(a, *p)
            }
        }
        Node::Unary(f, a) => Op::Unary(*f, emit(a, ops, memo)),
    };
    ops.push(op);
    let k = (ops.len() - 1) as u32;
    memo.insert(key, k);
    k
}

fn powi_derivs(u: f64, p: i32, order: u8) -> Result<(f64, f64, f64), EvalError> {
    if u == 0.0 && p < 0 {
        return Err(EvalError::Domain {
            op: "negative power",
            arg: u,
        });
    }
    let pf = p as f64;
    let pw = |k: i32| if k == 0 { 1.0 } else { u.powi(k) };
    let f = pw(p);
    let d1 = if order >= 1 && p != 0 { pf * pw(p - 1) } else { 0.0 };
    let d2 = if order >= 2 && p != 0 && p != 1 {
        pf * (pf - 1.0) * pw(p - 2)
    } else {
        0.0
    };
    Ok((f, d1, d2))
}

fn powf_derivs(u: f64, p: f64, order: u8) -> Result<(f64, f64, f64), EvalError> {
    if u < 0.0 {
        return Err(EvalError::Domain {
            op: "fractional power",
            arg: u,
        });
    }
    if u == 0.0 {
        if p < 0.0 {
            return Err(EvalError::Domain {
                op: "negative power",
                arg: u,
            });
        }
        if (order >= 1 && p < 1.0) || (order >= 2 && p < 2.0) {
            return Err(EvalError::NonDifferentiable {
                op: "fractional power",
                arg: u,
            });
        }
        return Ok((0.0, 0.0, 0.0));
    }
    let f = u.powf(p);
    let d1 = if order >= 1 { p * f / u } else { 0.0 };
    let d2 = if order >= 2 { p * (p - 1.0) * f / (u * u) } else { 0.0 };
    Ok((f, d1, d2))
}

fn func_derivs(func: Func, u: f64, order: u8) -> Result<(f64, f64, f64), EvalError> {
    Ok(match func {
        Func::Sqrt => {
            if u < 0.0 {
                return Err(EvalError::Domain { op: "sqrt", arg: u });
            }
            if u == 0.0 && order >= 1 {
                return Err(EvalError::NonDifferentiable { op: "sqrt", arg: u });
            }
            let s = u.sqrt();
            (s, 0.5 / s, -0.25 / (s * u))
        }
        Func::Exp => {
            let e = u.exp();
            (e, e, e)
        }
        Func::Log => {
            if u <= 0.0 {
                return Err(EvalError::Domain { op: "log", arg: u });
            }
            (u.ln(), 1.0 / u, -1.0 / (u * u))
        }
        Func::Abs => (
            u.abs(),
            if u > 0.0 {
                1.0
            } else if u < 0.0 {
                -1.0
            } else {
                0.0
            },
            0.0,
        ),
        Func::Step => smooth_step(u),
    })
}

/// `f(s) = e^{−1/s}` and its first two derivatives, flushed to zero where they underflow.
fn bump_side(s: f64) -> (f64, f64, f64) {
    if s < 1e-3 {
        return (0.0, 0.0, 0.0);
    }
    let f = (-1.0 / s).exp();
    let s2 = s * s;
    (f, f / s2, f * (1.0 - 2.0 * s) / (s2 * s2))
}

/// `ψ(s) = f(s)/(f(s)+f(1−s))` with exact first and second derivatives.
pub fn smooth_step(s: f64) -> (f64, f64, f64) {
    if s <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if s >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    let (f, f1, f2) = bump_side(s);
    let (g, g1m, g2) = bump_side(1.0 - s);
    let g1 = -g1m;
    let d = f + g;
    let (d1, d2) = (f1 + g1, f2 + g2);
    let psi = f / d;
    let psi1 = (f1 * d - f * d1) / (d * d);
    let psi2 = f2 / d - 2.0 * f1 * d1 / (d * d) - f * d2 / (d * d) + 2.0 * f * d1 * d1 / (d * d * d);
    (psi, psi1, psi2)
}

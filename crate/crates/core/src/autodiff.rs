//! Symbolic differentiation and light algebraic simplification.

use std::f64::consts::LN_10;

use crate::expr::{BinOp, Expr, Func};

/// Returns `d expr / dx` by structural rules.
///
/// The result is not simplified; see [`derivative`] for the form the solver
/// consumes. Subtrees without `x` differentiate to a literal zero.
pub fn differentiate(expr: &Expr) -> Expr {
    if !expr.contains_var() {
        return Expr::Const(0.0);
    }
    match expr {
        Expr::Const(_) => Expr::Const(0.0),
        Expr::Var => Expr::Const(1.0),
        Expr::Neg(inner) => -differentiate(inner),
        Expr::Binary(op, lhs, rhs) => binary_rule(*op, lhs, rhs),
        Expr::Call(func, arg) => chain_rule(*func, arg),
    }
}

/// Simplified derivative.
pub fn derivative(expr: &Expr) -> Expr {
    simplify(&differentiate(expr))
}

fn binary_rule(op: BinOp, f: &Expr, g: &Expr) -> Expr {
    let df = || differentiate(f);
    let dg = || differentiate(g);
    match op {
        BinOp::Add => df() + dg(),
        BinOp::Sub => df() - dg(),
        BinOp::Mul => df() * g.clone() + f.clone() * dg(),
        BinOp::Div if !g.contains_var() => df() / g.clone(),
        BinOp::Div => (df() * g.clone() - f.clone() * dg()) / g.clone().pow(Expr::Const(2.0)),
        // Constant exponent: g * f^(g-1) * f'. Avoids ln(f) and its NaN for f <= 0.
        BinOp::Pow if !g.contains_var() => {
            g.clone() * f.clone().pow(g.clone() - 1.0) * df()
        }
        BinOp::Pow => {
            let general = dg() * f.clone().ln() + g.clone() * df() / f.clone();
            f.clone().pow(g.clone()) * general
        }
    }
}

fn chain_rule(func: Func, u: &Expr) -> Expr {
    let du = differentiate(u);
    let u = u.clone();
    match func {
        Func::Sqrt => du / (2.0 * u.sqrt()),
        Func::Exp => u.exp() * du,
        Func::Log => du / u,
        Func::Log10 => du / (u * LN_10),
        Func::Sin => u.cos() * du,
        Func::Cos => -u.sin() * du,
        Func::Tan => du / u.cos().pow(Expr::Const(2.0)),
        // d|u|/du = sign(u), taken as 0 at u = 0.
        Func::Abs => Expr::call(Func::Sign, u) * du,
        Func::Sign => Expr::Const(0.0),
    }
}

/// Bottom-up constant folding plus the identities `e+0`, `e-0`, `0-e`,
/// `e*1`, `e*0`, `e/1`, `0/e`, `e^1` and `--e`.
///
/// Folding happens only when the folded value is finite, so `1/0` stays as
/// written and keeps evaluating to NaN.
pub fn simplify(expr: &Expr) -> Expr {
    match expr {
        Expr::Const(_) | Expr::Var => expr.clone(),
        Expr::Neg(inner) => match simplify(inner) {
            Expr::Const(c) => Expr::Const(-c),
            Expr::Neg(e) => *e,
            e => -e,
        },
        Expr::Call(func, arg) => {
            let arg = simplify(arg);
            if let Some(c) = arg.as_const() {
                let v = func.apply(c);
                if v.is_finite() {
                    return Expr::Const(v);
                }
            }
            Expr::call(*func, arg)
        }
        Expr::Binary(op, lhs, rhs) => simplify_binary(*op, simplify(lhs), simplify(rhs)),
    }
}

fn simplify_binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
    if let (Some(a), Some(b)) = (lhs.as_const(), rhs.as_const()) {
        let v = op.apply(a, b);
        if v.is_finite() {
            return Expr::Const(v);
        }
    }
    let is = |e: &Expr, v: f64| e.as_const() == Some(v);
    match op {
        BinOp::Add if is(&rhs, 0.0) => lhs,
        BinOp::Add if is(&lhs, 0.0) => rhs,
        BinOp::Sub if is(&rhs, 0.0) => lhs,
        BinOp::Sub if is(&lhs, 0.0) => simplify(&-rhs),
        BinOp::Mul if is(&lhs, 0.0) || is(&rhs, 0.0) => Expr::Const(0.0),
        BinOp::Mul if is(&lhs, 1.0) => rhs,
        BinOp::Mul if is(&rhs, 1.0) => lhs,
        BinOp::Div if is(&lhs, 0.0) => Expr::Const(0.0),
        BinOp::Div if is(&rhs, 1.0) => lhs,
        BinOp::Pow if is(&rhs, 1.0) => lhs,
        _ => Expr::binary(op, lhs, rhs),
    }
}

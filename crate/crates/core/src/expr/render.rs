use super::{BinOp, Expr};

/// Fully parenthesized canonical text. Every binary and negation node gets
/// its own pair of parentheses, so `parse(render(e)) == e` for any tree
/// whose constants are non-negative.
pub fn render(expr: &Expr) -> String {
    let mut out = String::new();
    write_full(expr, &mut out);
    out
}

fn write_full(expr: &Expr, out: &mut String) {
    match expr {
        Expr::Const(c) if c.is_sign_negative() => {
            out.push_str("(-");
            out.push_str(&format_constant(-c));
            out.push(')');
        }
        Expr::Const(c) => out.push_str(&format_constant(*c)),
        Expr::Var => out.push('x'),
        Expr::Neg(inner) => {
            out.push_str("(-");
            write_full(inner, out);
            out.push(')');
        }
        Expr::Binary(op, lhs, rhs) => {
            out.push('(');
            write_full(lhs, out);
            out.push(' ');
            out.push_str(op.symbol());
            out.push(' ');
            write_full(rhs, out);
            out.push(')');
        }
        Expr::Call(func, arg) => {
            out.push_str(func.name());
            out.push('(');
            write_full(arg, out);
            out.push(')');
        }
    }
}

/// Shortest text that parses back to the same `f64`.
pub(crate) fn format_constant(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-4..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

const PREC_SUM: u8 = 1;
const PREC_PRODUCT: u8 = 2;
const PREC_UNARY: u8 = 3;
const PREC_POWER: u8 = 4;
const PREC_ATOM: u8 = 5;

fn precedence(expr: &Expr) -> u8 {
    match expr {
        Expr::Const(c) if c.is_sign_negative() => PREC_UNARY,
        Expr::Const(_) | Expr::Var | Expr::Call(..) => PREC_ATOM,
        Expr::Neg(_) => PREC_UNARY,
        Expr::Binary(op, ..) => op_precedence(*op),
    }
}

fn op_precedence(op: BinOp) -> u8 {
    match op {
        BinOp::Add | BinOp::Sub => PREC_SUM,
        BinOp::Mul | BinOp::Div => PREC_PRODUCT,
        BinOp::Pow => PREC_POWER,
    }
}

/// Minimal-parenthesis rendering in Python syntax, e.g. `x - 0.6*sin(x) - 0.6`.
pub(crate) fn render_compact(expr: &Expr) -> String {
    let mut out = String::new();
    write_compact(expr, &mut out);
    out
}

fn write_compact(expr: &Expr, out: &mut String) {
    match expr {
        Expr::Const(c) => out.push_str(&format_constant(*c)),
        Expr::Var => out.push('x'),
        Expr::Neg(inner) => {
            out.push('-');
            write_child(inner, precedence(inner) < PREC_UNARY, out);
        }
        Expr::Binary(op, lhs, rhs) => {
            let p = op_precedence(*op);
            let (lp, rp) = (precedence(lhs), precedence(rhs));
            let (wrap_l, wrap_r) = if *op == BinOp::Pow {
                (lp <= p, rp < p)
            } else {
                (lp < p, rp <= p)
            };
            write_child(lhs, wrap_l, out);
            match op {
                BinOp::Add | BinOp::Sub => {
                    out.push(' ');
                    out.push_str(op.symbol());
                    out.push(' ');
                }
                _ => out.push_str(op.symbol()),
            }
            write_child(rhs, wrap_r, out);
        }
        Expr::Call(func, arg) => {
            out.push_str(func.name());
            out.push('(');
            write_compact(arg, out);
            out.push(')');
        }
    }
}

fn write_child(expr: &Expr, wrap: bool, out: &mut String) {
    if wrap {
        out.push('(');
        write_compact(expr, out);
        out.push(')');
    } else {
        write_compact(expr, out);
    }
}

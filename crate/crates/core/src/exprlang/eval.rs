use thiserror::Error;

use super::{BinOp, Dual, Expr, Func, Func2};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("dimension mismatch: expected x of length {expected_x} and t of length {expected_t}, got {got_x} and {got_t}")]
    Dimension {
        expected_x: usize,
        got_x: usize,
        expected_t: usize,
        got_t: usize,
    },
    #[error("domain error in {op}: argument {arg}")]
    Domain { op: &'static str, arg: f64 },
    #[error("non-finite result in {op}")]
    NonFinite { op: &'static str },
    #[error("{op} is not differentiable here (kink at {arg})")]
    Kink { op: &'static str, arg: f64 },
}

fn finite(v: f64, op: &'static str) -> Result<f64, EvalError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::NonFinite { op })
    }
}

fn pow_value(a: f64, b: f64) -> Result<f64, EvalError> {
    if a < 0.0 && b.fract() != 0.0 {
        return Err(EvalError::Domain { op: "^", arg: a });
    }
    if a == 0.0 && b < 0.0 {
        return Err(EvalError::Domain { op: "^", arg: a });
    }
    finite(a.powf(b), "^")
}

fn func_value(func: Func, v: f64) -> Result<f64, EvalError> {
    let out = match func {
        Func::Sin => v.sin(),
        Func::Cos => v.cos(),
        Func::Exp => v.exp(),
        Func::Log => {
            if v <= 0.0 {
                return Err(EvalError::Domain { op: "log", arg: v });
            }
            v.ln()
        }
        Func::Sqrt => {
            if v < 0.0 {
                return Err(EvalError::Domain { op: "sqrt", arg: v });
            }
            v.sqrt()
        }
        Func::Abs => v.abs(),
    };
    finite(out, func.name())
}

pub(crate) fn eval_f64(e: &Expr, x: &[f64], t: &[f64]) -> Result<f64, EvalError> {
    match e {
        Expr::Const(c) => Ok(*c),
        Expr::X(i) => Ok(x[*i]),
        Expr::T(i) => Ok(t[*i]),
        Expr::Neg(a) => Ok(-eval_f64(a, x, t)?),
        Expr::Binary(op, a, b) => {
            let a = eval_f64(a, x, t)?;
            let b = eval_f64(b, x, t)?;
            match op {
                BinOp::Add => finite(a + b, "+"),
                BinOp::Sub => finite(a - b, "-"),
                BinOp::Mul => finite(a * b, "*"),
                BinOp::Div => {
                    if b == 0.0 {
                        return Err(EvalError::Domain { op: "/", arg: b });
                    }
                    finite(a / b, "/")
                }
                BinOp::Pow => pow_value(a, b),
            }
        }
        Expr::Call(func, a) => func_value(*func, eval_f64(a, x, t)?),
        Expr::Call2(func, a, b) => {
            let a = eval_f64(a, x, t)?;
            let b = eval_f64(b, x, t)?;
            Ok(match func {
                Func2::Min => a.min(b),
                Func2::Max => a.max(b),
            })
        }
    }
}

pub(crate) fn eval_dual(e: &Expr, x: &[f64], t: &[f64], tol_kink: f64) -> Result<Dual, EvalError> {
    let n = x.len();
    match e {
        Expr::Const(c) => Ok(Dual::constant(*c, n)),
        Expr::X(i) => Ok(Dual::variable(x[*i], *i, n)),
        Expr::T(i) => Ok(Dual::constant(t[*i], n)),
        Expr::Neg(a) => {
            let a = eval_dual(a, x, t, tol_kink)?;
            Ok(a.chain(-a.value, -1.0))
        }
        Expr::Binary(op, a, b) => {
            let a = eval_dual(a, x, t, tol_kink)?;
            let b = eval_dual(b, x, t, tol_kink)?;
            binary_dual(*op, &a, &b)
        }
        Expr::Call(func, a) => {
            let a = eval_dual(a, x, t, tol_kink)?;
            let v = a.value;
            let value = func_value(*func, v)?;
            let slope = match func {
                Func::Sin => v.cos(),
                Func::Cos => -v.sin(),
                Func::Exp => value,
                Func::Log => 1.0 / v,
                Func::Sqrt => {
                    if v == 0.0 {
                        return Err(EvalError::Domain { op: "sqrt", arg: v });
                    }
                    0.5 / value
                }
                Func::Abs => {
                    if v.abs() <= tol_kink {
                        return Err(EvalError::Kink { op: "abs", arg: v });
                    }
                    v.signum()
                }
            };
            let out = a.chain(value, slope);
            check_partials(out, func.name())
        }
        Expr::Call2(func, a, b) => {
            let a = eval_dual(a, x, t, tol_kink)?;
            let b = eval_dual(b, x, t, tol_kink)?;
            if (a.value - b.value).abs() <= tol_kink {
                return Err(EvalError::Kink {
                    op: func.name(),
                    arg: a.value,
                });
            }
            let take_a = match func {
                Func2::Min => a.value < b.value,
                Func2::Max => a.value > b.value,
            };
            Ok(if take_a { a } else { b })
        }
    }
}

fn binary_dual(op: BinOp, a: &Dual, b: &Dual) -> Result<Dual, EvalError> {
    let out = match op {
        BinOp::Add => a.combine(1.0, b, 1.0, finite(a.value + b.value, "+")?),
        BinOp::Sub => a.combine(1.0, b, -1.0, finite(a.value - b.value, "-")?),
        BinOp::Mul => a.combine(b.value, b, a.value, finite(a.value * b.value, "*")?),
        BinOp::Div => {
            if b.value == 0.0 {
                return Err(EvalError::Domain {
                    op: "/",
                    arg: b.value,
                });
            }
            let q = finite(a.value / b.value, "/")?;
            a.combine(1.0 / b.value, b, -q / b.value, q)
        }
        BinOp::Pow => {
            let value = pow_value(a.value, b.value)?;
            if b.is_constant() {
                if b.value == 0.0 {
                    return Ok(Dual::constant(1.0, a.partials.len()));
                }
                if a.is_constant() {
                    return Ok(Dual::constant(value, a.partials.len()));
                }
                if a.value == 0.0 && b.value < 1.0 {
                    return Err(EvalError::Domain {
                        op: "^",
                        arg: a.value,
                    });
                }
                let slope = b.value * pow_value(a.value, b.value - 1.0)?;
                a.chain(value, slope)
            } else {
                if a.value <= 0.0 {
                    return Err(EvalError::Domain {
                        op: "^",
                        arg: a.value,
                    });
                }
                // d(a^b) = a^b (b/a da + ln a db)
                a.combine(value * b.value / a.value, b, value * a.value.ln(), value)
            }
        }
    };
    check_partials(out, op.symbol())
}

fn check_partials(d: Dual, op: &'static str) -> Result<Dual, EvalError> {
    if d.partials.iter().all(|p| p.is_finite()) {
        Ok(d)
    } else {
        Err(EvalError::NonFinite { op })
    }
}

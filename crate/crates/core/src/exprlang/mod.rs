//! Scalar expression language.
//!
//! Constraint and objective functions are written as plain strings over the
//! decision variables `x1..xp` and, for parametric families, the index
//! variables `t1..tm`. Expressions are parsed once into an immutable tree and
//! then evaluated either in plain `f64` or in forward-mode dual arithmetic,
//! which yields the exact gradient with respect to `x`.
//!
//! Grammar (EBNF):
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = "-" unary | power ;
//! power   = primary [ "^" unary ] ;          (* right associative *)
//! primary = number
//!         | "x" index | "t" index | "pi"
//!         | func1 "(" expr ")"
//!         | func2 "(" expr "," expr ")"
//!         | "(" expr ")" ;
//! func1   = "sin" | "cos" | "exp" | "log" | "sqrt" | "abs" ;
//! func2   = "min" | "max" ;
//! number  = digit { digit } [ "." { digit } ] [ ("e" | "E") [ "+" | "-" ] digit { digit } ]
//!         | "." digit { digit } [ exponent ] ;
//! index   = nonzero-digit { digit } ;
//! ```
//!
//! Variables are 1-based in source text and 0-based in the tree.

mod dual;
mod eval;
mod parser;

use std::fmt;

pub use dual::Dual;
pub use eval::EvalError;
pub use parser::ParseError;

/// Default tolerance for treating `abs`, `min` and `max` as evaluated at
/// their kink when differentiating.
pub const TOL_KINK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    pub(crate) fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func2 {
    Min,
    Max,
}

impl Func2 {
    pub(crate) fn name(self) -> &'static str {
        match self {
            Func2::Min => "min",
            Func2::Max => "max",
        }
    }
}

/// Expression tree. Constants produced by the parser are always finite and
/// nonnegative; a leading minus is a [`Expr::Neg`] node.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    X(usize),
    T(usize),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
    Call2(Func2, Box<Expr>, Box<Expr>),
}

impl Expr {
    /// Replaces every `X(i)` by `subs[i]`. Panics if an index is out of range.
    pub fn substitute_x(&self, subs: &[Expr]) -> Expr {
        let go = |e: &Expr| Box::new(e.substitute_x(subs));
        match self {
            Expr::X(i) => subs[*i].clone(),
            Expr::Const(_) | Expr::T(_) => self.clone(),
            Expr::Neg(a) => Expr::Neg(go(a)),
            Expr::Binary(op, a, b) => Expr::Binary(*op, go(a), go(b)),
            Expr::Call(f, a) => Expr::Call(*f, go(a)),
            Expr::Call2(f, a, b) => Expr::Call2(*f, go(a), go(b)),
        }
    }

    /// Exchanges the roles of `x` and `t`, so that derivatives in `t` can be
    /// taken with the `x`-gradient machinery.
    pub fn swap_xt(&self) -> Expr {
        let go = |e: &Expr| Box::new(e.swap_xt());
        match self {
            Expr::X(i) => Expr::T(*i),
            Expr::T(i) => Expr::X(*i),
            Expr::Const(_) => self.clone(),
            Expr::Neg(a) => Expr::Neg(go(a)),
            Expr::Binary(op, a, b) => Expr::Binary(*op, go(a), go(b)),
            Expr::Call(f, a) => Expr::Call(*f, go(a)),
            Expr::Call2(f, a, b) => Expr::Call2(*f, go(a), go(b)),
        }
    }

    fn max_x(&self) -> Option<usize> {
        self.fold_index(&|e| match e {
            Expr::X(i) => Some(*i),
            _ => None,
        })
    }

    fn max_t(&self) -> Option<usize> {
        self.fold_index(&|e| match e {
            Expr::T(i) => Some(*i),
            _ => None,
        })
    }

    fn fold_index(&self, leaf: &dyn Fn(&Expr) -> Option<usize>) -> Option<usize> {
        match self {
            Expr::Const(_) | Expr::X(_) | Expr::T(_) => leaf(self),
            Expr::Neg(a) | Expr::Call(_, a) => a.fold_index(leaf),
            Expr::Binary(_, a, b) | Expr::Call2(_, a, b) => {
                match (a.fold_index(leaf), b.fold_index(leaf)) {
                    (Some(i), Some(j)) => Some(i.max(j)),
                    (i, j) => i.or(j),
                }
            }
        }
    }
}

impl fmt::Display for Expr {
    /// Fully parenthesized form; parsing the output yields the same tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c:?}"),
            Expr::X(i) => write!(f, "x{}", i + 1),
            Expr::T(i) => write!(f, "t{}", i + 1),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Call2(func, a, b) => write!(f, "{}({a}, {b})", func.name()),
        }
    }
}

/// A parsed scalar function of `x` (and optionally `t`).
///
/// Immutable after construction, so it can be shared freely across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprFn {
    ast: Expr,
    arity_x: usize,
    arity_t: usize,
    source: String,
}

impl ExprFn {
    pub fn parse(src: &str, arity_x: usize, arity_t: usize) -> Result<Self, ParseError> {
        let ast = parser::parse(src, arity_x, arity_t)?;
        Ok(ExprFn {
            ast,
            arity_x,
            arity_t,
            source: src.to_string(),
        })
    }

    /// Wraps an already-built tree, checking variable indices against the arities.
    pub fn from_ast(ast: Expr, arity_x: usize, arity_t: usize) -> Result<Self, ParseError> {
        if let Some(i) = ast.max_x() {
            if i >= arity_x {
                return Err(ParseError::Arity {
                    name: format!("x{}", i + 1),
                    offset: 0,
                    arity: arity_x,
                });
            }
        }
        if let Some(i) = ast.max_t() {
            if i >= arity_t {
                return Err(ParseError::Arity {
                    name: format!("t{}", i + 1),
                    offset: 0,
                    arity: arity_t,
                });
            }
        }
        let source = ast.to_string();
        Ok(ExprFn {
            ast,
            arity_x,
            arity_t,
            source,
        })
    }

    pub fn ast(&self) -> &Expr {
        &self.ast
    }

    pub fn arity_x(&self) -> usize {
        self.arity_x
    }

    pub fn arity_t(&self) -> usize {
        self.arity_t
    }

    /// Source text as given to [`ExprFn::parse`].
    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, x: &[f64], t: &[f64]) -> Result<f64, EvalError> {
        self.check_dims(x, t)?;
        eval::eval_f64(&self.ast, x, t)
    }

    /// Exact gradient with respect to `x` by forward-mode dual arithmetic.
    pub fn grad(&self, x: &[f64], t: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.value_and_grad(x, t).map(|(_, g)| g)
    }

    pub fn value_and_grad(&self, x: &[f64], t: &[f64]) -> Result<(f64, Vec<f64>), EvalError> {
        self.value_and_grad_with(x, t, TOL_KINK)
    }

    pub fn value_and_grad_with(
        &self,
        x: &[f64],
        t: &[f64],
        tol_kink: f64,
    ) -> Result<(f64, Vec<f64>), EvalError> {
        self.check_dims(x, t)?;
        let d = eval::eval_dual(&self.ast, x, t, tol_kink)?;
        Ok((d.value, d.partials))
    }

    fn check_dims(&self, x: &[f64], t: &[f64]) -> Result<(), EvalError> {
        if x.len() != self.arity_x || t.len() != self.arity_t {
            return Err(EvalError::Dimension {
                expected_x: self.arity_x,
                got_x: x.len(),
                expected_t: self.arity_t,
                got_t: t.len(),
            });
        }
        Ok(())
    }
}

impl fmt::Display for ExprFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.ast.fmt(f)
    }
}

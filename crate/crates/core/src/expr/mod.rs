//! Coefficient expression language.
//!
//! Users supply the coefficients `a, b, c, d` and the shift exponent `omega`
//! as small infix expressions in one variable. This module parses them,
//! evaluates them (also at points far beyond the `f64` range of `t`, see
//! [`Expr::eval_log`]), and differentiates them symbolically.

mod diff;
mod parse;
mod value;

use std::fmt;

pub use diff::DiffError;
pub use parse::ParseError;
pub use value::EvalError;

/// Binary operators, in increasing precedence order of their groups.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
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

/// Built-in functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Atan,
    Abs,
}

impl Func {
    pub const ALL: [Func; 7] = [
        Func::Sin,
        Func::Cos,
        Func::Exp,
        Func::Log,
        Func::Sqrt,
        Func::Atan,
        Func::Abs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Atan => "atan",
            Func::Abs => "abs",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

/// Expression tree. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    /// The single free variable (`t` for coefficients, `x` for symbols).
    Var,
    /// The imaginary unit `i`.
    I,
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    /// Parses an expression in the variable `t`.
    pub fn parse(source: &str) -> Result<Expr, ParseError> {
        parse::parse(source, "t")
    }

    /// Parses an expression whose free variable is spelled `var`.
    pub fn parse_with_var(source: &str, var: &str) -> Result<Expr, ParseError> {
        parse::parse(source, var)
    }

    pub fn num(x: f64) -> Expr {
        Expr::Num(x)
    }

    pub fn bin(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Bin(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn call(f: Func, arg: Expr) -> Expr {
        Expr::Call(f, Box::new(arg))
    }

    /// True when the expression does not mention the variable.
    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Num(_) | Expr::I => true,
            Expr::Var => false,
            Expr::Neg(e) | Expr::Call(_, e) => e.is_constant(),
            Expr::Bin(_, l, r) => l.is_constant() && r.is_constant(),
        }
    }

    /// True when the literal `i` occurs anywhere.
    pub fn mentions_imaginary(&self) -> bool {
        match self {
            Expr::I => true,
            Expr::Num(_) | Expr::Var => false,
            Expr::Neg(e) | Expr::Call(_, e) => e.mentions_imaginary(),
            Expr::Bin(_, l, r) => l.mentions_imaginary() || r.mentions_imaginary(),
        }
    }

    /// Replaces every occurrence of the variable by `replacement`.
    pub fn substitute(&self, replacement: &Expr) -> Expr {
        match self {
            Expr::Var => replacement.clone(),
            Expr::Num(_) | Expr::I => self.clone(),
            Expr::Neg(e) => Expr::Neg(Box::new(e.substitute(replacement))),
            Expr::Call(f, e) => Expr::call(*f, e.substitute(replacement)),
            Expr::Bin(op, l, r) => Expr::bin(*op, l.substitute(replacement), r.substitute(replacement)),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Var | Expr::I => 1,
            Expr::Neg(e) | Expr::Call(_, e) => 1 + e.node_count(),
            Expr::Bin(_, l, r) => 1 + l.node_count() + r.node_count(),
        }
    }
}

/// Fully parenthesised rendering; reparses to a structurally equal tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(x) if *x < 0.0 || (*x == 0.0 && x.is_sign_negative()) => write!(f, "({x:?})"),
            Expr::Num(x) => write!(f, "{x:?}"),
            Expr::Var => f.write_str("t"),
            Expr::I => f.write_str("i"),
            Expr::Neg(e) => write!(f, "(-({e}))"),
            Expr::Bin(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
            Expr::Call(func, e) => write!(f, "{}({e})", func.name()),
        }
    }
}

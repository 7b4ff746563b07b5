//! Symbolic differentiation with light constant folding.

use thiserror::Error;

use super::{BinOp, Expr, Func};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DiffError {
    #[error("`{0}` is not differentiable")]
    NonDifferentiable(String),
}

fn is_num(e: &Expr, v: f64) -> bool {
    matches!(e, Expr::Num(x) if *x == v)
}

fn add(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x + y),
        _ if is_num(&a, 0.0) => b,
        _ if is_num(&b, 0.0) => a,
        _ => Expr::bin(BinOp::Add, a, b),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x - y),
        _ if is_num(&b, 0.0) => a,
        _ if is_num(&a, 0.0) => neg(b),
        _ => Expr::bin(BinOp::Sub, a, b),
    }
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(x) => Expr::Num(-x),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x * y),
        _ if is_num(&a, 0.0) || is_num(&b, 0.0) => Expr::Num(0.0),
        _ if is_num(&a, 1.0) => b,
        _ if is_num(&b, 1.0) => a,
        _ => Expr::bin(BinOp::Mul, a, b),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        _ if is_num(&a, 0.0) => Expr::Num(0.0),
        _ if is_num(&b, 1.0) => a,
        _ => Expr::bin(BinOp::Div, a, b),
    }
}

fn pow(a: Expr, b: Expr) -> Expr {
    if is_num(&b, 1.0) {
        a
    } else if is_num(&b, 0.0) {
        Expr::Num(1.0)
    } else {
        Expr::bin(BinOp::Pow, a, b)
    }
}

impl Expr {
    /// Derivative with respect to the free variable.
    pub fn differentiate(&self) -> Result<Expr, DiffError> {
        Ok(match self {
            Expr::Num(_) | Expr::I => Expr::Num(0.0),
            Expr::Var => Expr::Num(1.0),
            Expr::Neg(e) => neg(e.differentiate()?),
            Expr::Bin(op, l, r) => {
                let (u, v) = (l.as_ref().clone(), r.as_ref().clone());
                match op {
                    BinOp::Add => add(l.differentiate()?, r.differentiate()?),
                    BinOp::Sub => sub(l.differentiate()?, r.differentiate()?),
                    BinOp::Mul => add(mul(l.differentiate()?, v), mul(u, r.differentiate()?)),
                    BinOp::Div => {
                        let du = l.differentiate()?;
                        let dv = r.differentiate()?;
                        if r.is_constant() {
                            div(du, v)
                        } else {
                            div(sub(mul(du, v.clone()), mul(u, dv)), pow(v, Expr::Num(2.0)))
                        }
                    }
                    BinOp::Pow => {
                        let du = l.differentiate()?;
                        if r.is_constant() {
                            // v * u^(v-1) * u'
                            let vm1 = sub(v.clone(), Expr::Num(1.0));
                            mul(mul(v, pow(u, vm1)), du)
                        } else {
                            // u^v * (v' log u + v u'/u)
                            let dv = r.differentiate()?;
                            let inner = add(
                                mul(dv, Expr::call(Func::Log, u.clone())),
                                div(mul(v.clone(), du), u.clone()),
                            );
                            mul(self.clone(), inner)
                        }
                    }
                }
            }
            Expr::Call(f, arg) => {
                let du = arg.differentiate()?;
                let u = arg.as_ref().clone();
                let outer = match f {
                    Func::Sin => Expr::call(Func::Cos, u),
                    Func::Cos => neg(Expr::call(Func::Sin, u)),
                    Func::Exp => self.clone(),
                    Func::Log => div(Expr::Num(1.0), u),
                    Func::Sqrt => div(Expr::Num(1.0), mul(Expr::Num(2.0), self.clone())),
                    Func::Atan => div(
                        Expr::Num(1.0),
                        add(Expr::Num(1.0), pow(u, Expr::Num(2.0))),
                    ),
                    Func::Abs => {
                        if arg.is_constant() {
                            return Ok(Expr::Num(0.0));
                        }
                        return Err(DiffError::NonDifferentiable(self.to_string()));
                    }
                };
                if is_num(&du, 1.0) {
                    outer
                } else {
                    mul(outer, du)
                }
            }
        })
    }
}

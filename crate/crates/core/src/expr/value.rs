//! Evaluation.
//!
//! Real intermediates that leave the `f64` range are carried as
//! sign + log-magnitude, so that e.g. `sin(log(log(t)))` can be evaluated at
//! `t = exp(exp(30))` and `t * (1/(4*t*(1+log(t)^2)))` stays exact for huge
//! `t`. Complex arithmetic is only entered when the literal `i` (or a
//! negative base under a fractional power) forces it.

use num_complex::Complex64;
use thiserror::Error;

use super::{BinOp, Expr, Func};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("domain error in `{subexpr}`: {reason}")]
    Domain { subexpr: String, reason: &'static str },
    #[error("non-finite value in `{subexpr}`")]
    NonFinite { subexpr: String },
    #[error("expected a real value, `{subexpr}` has imaginary part {imag:e}")]
    NotReal { subexpr: String, imag: f64 },
}

/// `(-1)^neg * exp(ln)`, never zero.
#[derive(Clone, Copy, Debug)]
struct LogReal {
    neg: bool,
    ln: f64,
}

#[derive(Clone, Copy, Debug)]
enum Value {
    Real(f64),
    Big(LogReal),
    Complex(Complex64),
}

const LN_SAFE: f64 = 700.0;

impl Value {
    fn from_log(neg: bool, ln: f64) -> Value {
        if ln.abs() < LN_SAFE {
            let m = ln.exp();
            Value::Real(if neg { -m } else { m })
        } else {
            Value::Big(LogReal { neg, ln })
        }
    }

    /// Nearest `f64`; may be infinite or zero for `Big`.
    fn to_f64(self) -> f64 {
        match self {
            Value::Real(x) => x,
            Value::Big(l) => {
                let m = l.ln.exp();
                if l.neg {
                    -m
                } else {
                    m
                }
            }
            Value::Complex(z) => z.re,
        }
    }

    fn to_complex(self) -> Complex64 {
        match self {
            Value::Complex(z) => z,
            other => Complex64::new(other.to_f64(), 0.0),
        }
    }

    fn log_form(self) -> Option<LogReal> {
        match self {
            Value::Real(x) if x == 0.0 => None,
            Value::Real(x) => Some(LogReal { neg: x < 0.0, ln: x.abs().ln() }),
            Value::Big(l) => Some(l),
            Value::Complex(_) => None,
        }
    }

    fn is_zero(self) -> bool {
        match self {
            Value::Real(x) => x == 0.0,
            Value::Big(_) => false,
            Value::Complex(z) => z.re == 0.0 && z.im == 0.0,
        }
    }

    fn is_complex(self) -> bool {
        matches!(self, Value::Complex(_))
    }
}

fn log_add(a: LogReal, b: LogReal) -> Value {
    let (hi, lo) = if a.ln >= b.ln { (a, b) } else { (b, a) };
    let d = (lo.ln - hi.ln).exp();
    if hi.neg == lo.neg {
        Value::from_log(hi.neg, hi.ln + d.ln_1p())
    } else if d >= 1.0 {
        Value::Real(0.0)
    } else {
        Value::from_log(hi.neg, hi.ln + (-d).ln_1p())
    }
}

struct Ctx {
    var: Value,
}

fn domain(e: &Expr, reason: &'static str) -> EvalError {
    EvalError::Domain { subexpr: e.to_string(), reason }
}

fn check_complex(z: Complex64, e: &Expr) -> Result<Value, EvalError> {
    if z.re.is_finite() && z.im.is_finite() {
        Ok(Value::Complex(z))
    } else {
        Err(EvalError::NonFinite { subexpr: e.to_string() })
    }
}

impl Ctx {
    fn eval(&self, e: &Expr) -> Result<Value, EvalError> {
        match e {
            Expr::Num(x) => Ok(Value::Real(*x)),
            Expr::Var => Ok(self.var),
            Expr::I => Ok(Value::Complex(Complex64::i())),
            Expr::Neg(inner) => Ok(match self.eval(inner)? {
                Value::Real(x) => Value::Real(-x),
                Value::Big(l) => Value::Big(LogReal { neg: !l.neg, ln: l.ln }),
                Value::Complex(z) => Value::Complex(-z),
            }),
            Expr::Bin(op, l, r) => {
                let a = self.eval(l)?;
                let b = self.eval(r)?;
                binary(*op, a, b, e)
            }
            Expr::Call(f, arg) => {
                let v = self.eval(arg)?;
                call(*f, v, e)
            }
        }
    }
}

fn binary(op: BinOp, a: Value, b: Value, e: &Expr) -> Result<Value, EvalError> {
    if op == BinOp::Pow {
        return power(a, b, e);
    }
    if a.is_complex() || b.is_complex() {
        let (x, y) = (a.to_complex(), b.to_complex());
        let z = match op {
            BinOp::Add => x + y,
            BinOp::Sub => x - y,
            BinOp::Mul => x * y,
            BinOp::Div => {
                if y.re == 0.0 && y.im == 0.0 {
                    return Err(domain(e, "division by zero"));
                }
                x / y
            }
            BinOp::Pow => unreachable!(),
        };
        return check_complex(z, e);
    }
    if let (Value::Real(x), Value::Real(y)) = (a, b) {
        let r = match op {
            BinOp::Add => x + y,
            BinOp::Sub => x - y,
            BinOp::Mul => x * y,
            BinOp::Div => {
                if y == 0.0 {
                    return Err(domain(e, "division by zero"));
                }
                x / y
            }
            BinOp::Pow => unreachable!(),
        };
        let underflow = r == 0.0 && matches!(op, BinOp::Mul | BinOp::Div) && x != 0.0;
        if r.is_finite() && !underflow {
            return Ok(Value::Real(r));
        }
        if r.is_nan() {
            return Err(EvalError::NonFinite { subexpr: e.to_string() });
        }
    }
    // log-magnitude path
    match op {
        BinOp::Add | BinOp::Sub => {
            let b = if op == BinOp::Sub {
                match b {
                    Value::Real(y) => Value::Real(-y),
                    Value::Big(l) => Value::Big(LogReal { neg: !l.neg, ln: l.ln }),
                    c => c,
                }
            } else {
                b
            };
            match (a.log_form(), b.log_form()) {
                (None, _) => Ok(b),
                (_, None) => Ok(a),
                (Some(x), Some(y)) => Ok(log_add(x, y)),
            }
        }
        BinOp::Mul | BinOp::Div => {
            if op == BinOp::Div && b.is_zero() {
                return Err(domain(e, "division by zero"));
            }
            match (a.log_form(), b.log_form()) {
                (None, _) | (_, None) => Ok(Value::Real(0.0)),
                (Some(x), Some(y)) => {
                    let ln = if op == BinOp::Mul { x.ln + y.ln } else { x.ln - y.ln };
                    Ok(Value::from_log(x.neg != y.neg, ln))
                }
            }
        }
        BinOp::Pow => unreachable!(),
    }
}

fn power(a: Value, b: Value, e: &Expr) -> Result<Value, EvalError> {
    if a.is_complex() || b.is_complex() {
        let (x, y) = (a.to_complex(), b.to_complex());
        if x.re == 0.0 && x.im == 0.0 {
            return zero_power(y.re, y.im, e);
        }
        return check_complex(x.powc(y), e);
    }
    let y = b.to_f64();
    if !y.is_finite() {
        return Err(EvalError::NonFinite { subexpr: e.to_string() });
    }
    if let Value::Real(x) = a {
        let r = x.powf(y);
        if r.is_finite() && (r != 0.0 || x == 0.0) {
            return Ok(Value::Real(r));
        }
    }
    let Some(base) = a.log_form() else {
        return zero_power(y, 0.0, e);
    };
    if base.neg {
        if y.fract() == 0.0 {
            let odd = (y.abs() % 2.0) == 1.0;
            return Ok(Value::from_log(odd, y * base.ln));
        }
        let x = a.to_complex();
        if !x.re.is_finite() {
            return Err(EvalError::NonFinite { subexpr: e.to_string() });
        }
        return check_complex(x.powf(y), e);
    }
    let ln = y * base.ln;
    if ln.is_nan() {
        return Err(EvalError::NonFinite { subexpr: e.to_string() });
    }
    if ln == f64::INFINITY {
        return Err(EvalError::NonFinite { subexpr: e.to_string() });
    }
    if ln == f64::NEG_INFINITY {
        return Ok(Value::Real(0.0));
    }
    Ok(Value::from_log(false, ln))
}

fn zero_power(re: f64, im: f64, e: &Expr) -> Result<Value, EvalError> {
    if im == 0.0 && re == 0.0 {
        Ok(Value::Real(1.0))
    } else if re > 0.0 {
        Ok(Value::Real(0.0))
    } else {
        Err(domain(e, "zero raised to a non-positive power"))
    }
}

fn call(f: Func, v: Value, e: &Expr) -> Result<Value, EvalError> {
    if let Value::Complex(z) = v {
        let r = match f {
            Func::Sin => z.sin(),
            Func::Cos => z.cos(),
            Func::Exp => z.exp(),
            Func::Log => {
                if z.re == 0.0 && z.im == 0.0 {
                    return Err(domain(e, "logarithm of zero"));
                }
                z.ln()
            }
            Func::Sqrt => z.sqrt(),
            Func::Atan => {
                if z.re == 0.0 && (z.im.abs() - 1.0).abs() == 0.0 {
                    return Err(domain(e, "atan pole at +-i"));
                }
                z.atan()
            }
            Func::Abs => return Ok(Value::Real(z.norm())),
        };
        return check_complex(r, e);
    }
    match f {
        Func::Log => match v.log_form() {
            Some(l) if !l.neg => Ok(Value::Real(l.ln)),
            _ => Err(domain(e, "logarithm of a non-positive number")),
        },
        Func::Sqrt => match v.log_form() {
            None => Ok(Value::Real(0.0)),
            Some(l) if !l.neg => Ok(Value::from_log(false, 0.5 * l.ln)),
            _ => Err(domain(e, "square root of a negative number")),
        },
        Func::Abs => Ok(match v {
            Value::Real(x) => Value::Real(x.abs()),
            Value::Big(l) => Value::Big(LogReal { neg: false, ln: l.ln }),
            Value::Complex(_) => unreachable!(),
        }),
        Func::Exp => {
            let x = v.to_f64();
            if x == f64::INFINITY {
                return Err(EvalError::NonFinite { subexpr: e.to_string() });
            }
            if x == f64::NEG_INFINITY {
                return Ok(Value::Real(0.0));
            }
            Ok(Value::from_log(false, x))
        }
        Func::Sin | Func::Cos | Func::Atan => {
            let x = v.to_f64();
            let r = match f {
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                _ => x.atan(),
            };
            if r.is_finite() {
                Ok(Value::Real(r))
            } else {
                Err(EvalError::NonFinite { subexpr: e.to_string() })
            }
        }
    }
}

fn finish(v: Value, e: &Expr) -> Result<Complex64, EvalError> {
    let z = v.to_complex();
    if z.re.is_finite() && z.im.is_finite() {
        Ok(z)
    } else {
        Err(EvalError::NonFinite { subexpr: e.to_string() })
    }
}

impl Expr {
    fn eval_value(&self, var: Value) -> Result<Complex64, EvalError> {
        let ctx = Ctx { var };
        let v = ctx.eval(self)?;
        finish(v, self)
    }

    /// Evaluates at a plain real value of the variable (any sign).
    pub fn eval_at(&self, x: f64) -> Result<Complex64, EvalError> {
        self.eval_value(Value::Real(x))
    }

    /// Evaluates at `t > 0`.
    pub fn eval(&self, t: f64) -> Result<Complex64, EvalError> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(EvalError::Domain { subexpr: "t".into(), reason: "t must be positive and finite" });
        }
        self.eval_value(Value::Real(t))
    }

    /// Evaluates at `t = exp(u)`. Works for `|u|` far beyond 709, as long as
    /// the expression itself stays finite.
    pub fn eval_log(&self, u: f64) -> Result<Complex64, EvalError> {
        if !u.is_finite() {
            return Err(EvalError::Domain { subexpr: "t".into(), reason: "log t must be finite" });
        }
        self.eval_value(Value::from_log(false, u))
    }

    /// Real-valued evaluation at `t = exp(u)`.
    pub fn eval_log_real(&self, u: f64) -> Result<f64, EvalError> {
        let z = self.eval_log(u)?;
        if z.im != 0.0 {
            return Err(EvalError::NotReal { subexpr: self.to_string(), imag: z.im });
        }
        Ok(z.re)
    }

    /// Value of a constant expression.
    pub fn eval_constant(&self) -> Result<Complex64, EvalError> {
        self.eval_value(Value::Real(1.0))
    }
}

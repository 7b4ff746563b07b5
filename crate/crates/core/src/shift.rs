//! Slowly oscillating shifts `alpha(t) = t exp(omega(t))` and the shift
//! operator `W_alpha f = f o alpha`.

use num_complex::Complex64;
use thiserror::Error;

use crate::expr::{BinOp, DiffError, Expr, Func};
use crate::grid::{GridError, LogGridFunction};
use crate::so::{SoError, SoFunction};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ShiftError {
    #[error(transparent)]
    So(#[from] SoError),
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("omega must be real-valued, got imaginary part {imag:e} at log t = {u}")]
    NotReal { u: f64, imag: f64 },
    #[error("shift invariant violated: {0}")]
    Invariant(String),
    #[error("cannot bracket the inverse shift at log t = {0}")]
    Bracket(f64),
    #[error("iterate of order {n} exceeds the configured maximum {max}")]
    IterateLimit { n: i64, max: usize },
    #[error("shift iterates leave the representable range at log t = {0}")]
    Overflow(f64),
}

/// Number of probe points used for the invariant checks.
pub const PROBE_POINTS: usize = 10_000;
/// Half-width of the probe range in `log t` for unbounded domains.
pub const PROBE_RANGE: f64 = 64.0;
/// Default bound on `|n|` for [`SosShift::iterate`].
pub const DEFAULT_MAX_ITERATE: usize = 64;

/// Quantities measured on the probe grid at construction.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftBounds {
    /// `inf (1 + t omega'(t))`.
    pub inf_one_plus: f64,
    pub sup_abs_omega: f64,
    pub alpha_prime_min: f64,
    pub alpha_prime_max: f64,
    /// `|t omega'(t)|` at the farthest tail samples toward 0 and infinity.
    pub tail_t_omega_prime: (f64, f64),
    /// `log t` of probe points where `omega` vanishes or changes sign.
    /// Such points are fixed points of `alpha`.
    pub interior_fixed_points: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SosShift {
    omega: SoFunction,
    omega_prime: Expr,
    t_omega_prime: Expr,
    bounds: ShiftBounds,
    max_iterate: usize,
}

pub(crate) fn probe_range(omega: &SoFunction) -> (f64, f64) {
    let (lo, hi) = omega.log_domain();
    let lo = if lo.is_finite() { lo + 1e-3 * (1.0 + lo.abs()) } else { -PROBE_RANGE };
    let hi = if hi.is_finite() { hi - 1e-3 * (1.0 + hi.abs()) } else { PROBE_RANGE };
    (lo, hi)
}

impl SosShift {
    /// Builds the shift from `omega`, checking the invariants on the probe
    /// grid. `tail_tol` bounds `|t omega'(t)|` at the far tail samples.
    pub fn new(omega: SoFunction, tail_tol: f64) -> Result<Self, ShiftError> {
        let omega_prime = omega.expr().differentiate()?;
        let t_omega_prime = Expr::bin(BinOp::Mul, Expr::Var, omega_prime.clone());
        let mut sh = SosShift {
            omega,
            omega_prime,
            t_omega_prime,
            bounds: ShiftBounds {
                inf_one_plus: 1.0,
                sup_abs_omega: 0.0,
                alpha_prime_min: 1.0,
                alpha_prime_max: 1.0,
                tail_t_omega_prime: (0.0, 0.0),
                interior_fixed_points: Vec::new(),
            },
            max_iterate: DEFAULT_MAX_ITERATE,
        };
        sh.bounds = sh.measure(tail_tol)?;
        Ok(sh)
    }

    /// `alpha(t) = k t`.
    pub fn multiplicative(k: f64) -> Result<Self, ShiftError> {
        if !(k > 0.0) {
            return Err(ShiftError::Invariant(format!("multiplier {k} is not positive")));
        }
        Self::new(SoFunction::new("omega", Expr::Num(k.ln())), 1e-3)
    }

    pub fn with_max_iterate(mut self, max: usize) -> Self {
        self.max_iterate = max;
        self
    }

    fn measure(&self, tail_tol: f64) -> Result<ShiftBounds, ShiftError> {
        let (lo, hi) = probe_range(&self.omega);
        let mut b = ShiftBounds {
            inf_one_plus: f64::INFINITY,
            sup_abs_omega: 0.0,
            alpha_prime_min: f64::INFINITY,
            alpha_prime_max: 0.0,
            tail_t_omega_prime: (0.0, 0.0),
            interior_fixed_points: Vec::new(),
        };
        let mut prev: Option<f64> = None;
        let mut last_log_alpha = f64::NEG_INFINITY;
        for k in 0..PROBE_POINTS {
            let u = lo + (hi - lo) * k as f64 / (PROBE_POINTS - 1) as f64;
            let w = self.omega_log(u)?;
            let q = 1.0 + self.t_omega_prime_log(u)?;
            b.inf_one_plus = b.inf_one_plus.min(q);
            b.sup_abs_omega = b.sup_abs_omega.max(w.abs());
            if q > 0.0 {
                let ap = q * w.exp();
                b.alpha_prime_min = b.alpha_prime_min.min(ap);
                b.alpha_prime_max = b.alpha_prime_max.max(ap);
            }
            let la = u + w;
            if la <= last_log_alpha {
                return Err(ShiftError::Invariant(format!("alpha is not increasing near log t = {u}")));
            }
            last_log_alpha = la;
            if w == 0.0 || prev.is_some_and(|pw| pw * w < 0.0) {
                b.interior_fixed_points.push(u);
            }
            prev = Some(w);
        }
        if !(b.inf_one_plus > 0.0) {
            return Err(ShiftError::Invariant(format!(
                "inf of 1 + t omega'(t) is {:.3e}, not positive",
                b.inf_one_plus
            )));
        }
        if !(b.alpha_prime_max.ln().is_finite() && b.alpha_prime_min.ln().is_finite()) {
            return Err(ShiftError::Invariant("log alpha' is unbounded on the probe grid".into()));
        }
        let tail = |sign: f64, edge: f64| -> Result<f64, ShiftError> {
            // march geometrically past the probe grid, staying in the domain
            let mut u = edge;
            let mut val = self.t_omega_prime_log(u)?.abs();
            for _ in 0..30 {
                let next = u * 2.0;
                if next * sign <= 0.0 || !self.omega.contains_log(next) {
                    break;
                }
                match self.t_omega_prime_log(next) {
                    Ok(v) => {
                        u = next;
                        val = v.abs();
                    }
                    Err(_) => break,
                }
            }
            Ok(val)
        };
        let zero_side = if self.omega.reaches(crate::so::Endpoint::Zero) { tail(-1.0, lo)? } else { 0.0 };
        let inf_side = if self.omega.reaches(crate::so::Endpoint::Infinity) { tail(1.0, hi)? } else { 0.0 };
        b.tail_t_omega_prime = (zero_side, inf_side);
        if zero_side >= tail_tol || inf_side >= tail_tol {
            return Err(ShiftError::Invariant(format!(
                "t omega'(t) does not vanish at the endpoints (tail values {zero_side:.3e}, {inf_side:.3e})"
            )));
        }
        Ok(b)
    }

    pub fn omega(&self) -> &SoFunction {
        &self.omega
    }

    pub fn omega_prime(&self) -> &Expr {
        &self.omega_prime
    }

    pub fn bounds(&self) -> &ShiftBounds {
        &self.bounds
    }

    /// Whether `omega` is constant, i.e. `alpha(t) = k t`.
    pub fn is_multiplicative(&self) -> bool {
        self.omega.is_constant()
    }

    /// Expression for `alpha` in the variable `t`.
    pub fn alpha_expr(&self) -> Expr {
        Expr::bin(BinOp::Mul, Expr::Var, Expr::call(Func::Exp, self.omega.expr().clone()))
    }

    /// `c o alpha` as an expression.
    pub fn compose(&self, c: &Expr) -> Expr {
        c.substitute(&self.alpha_expr())
    }

    pub fn omega_log(&self, u: f64) -> Result<f64, ShiftError> {
        let w = self.omega.eval_log(u)?;
        if w.im.abs() > 1e-12 * w.re.abs().max(1.0) {
            return Err(ShiftError::NotReal { u, imag: w.im });
        }
        Ok(w.re)
    }

    fn t_omega_prime_log(&self, u: f64) -> Result<f64, ShiftError> {
        if !self.omega.contains_log(u) {
            return Err(SoError::OutsideDomain {
                name: self.omega.name().to_string(),
                u,
                lo: self.omega.log_domain().0,
                hi: self.omega.log_domain().1,
            }
            .into());
        }
        let v = self
            .t_omega_prime
            .eval_log(u)
            .map_err(|source| SoError::Eval { name: self.omega.name().to_string(), source })?;
        Ok(v.re)
    }

    /// `log alpha(exp(u))`.
    pub fn log_alpha(&self, u: f64) -> Result<f64, ShiftError> {
        Ok(u + self.omega_log(u)?)
    }

    pub fn alpha(&self, t: f64) -> Result<f64, ShiftError> {
        Ok(self.log_alpha(t.ln())?.exp())
    }

    /// `alpha'(exp(u)) = (1 + t omega'(t)) exp(omega(t))`.
    pub fn alpha_prime_log(&self, u: f64) -> Result<f64, ShiftError> {
        let q = 1.0 + self.t_omega_prime_log(u)?;
        if !(q > 0.0) {
            return Err(ShiftError::Invariant(format!("alpha'(t) <= 0 at log t = {u}")));
        }
        Ok(q * self.omega_log(u)?.exp())
    }

    pub fn alpha_prime(&self, t: f64) -> Result<f64, ShiftError> {
        self.alpha_prime_log(t.ln())
    }

    /// `log beta(exp(v))`: solves `u + omega(u) = v` by bisection and Newton
    /// to `1e-12` in `log t`.
    pub fn log_beta(&self, v: f64) -> Result<f64, ShiftError> {
        if self.is_multiplicative() {
            return Ok(v - self.omega_log(0.0)?);
        }
        let g = |u: f64| self.log_alpha(u).map(|la| la - v);
        let span = self.bounds.sup_abs_omega + 1.0;
        let (mut lo, mut hi) = (v - span, v + span);
        let (mut glo, mut ghi) = (g(lo), g(hi));
        let mut widen = 0;
        while !(matches!(glo, Ok(x) if x < 0.0) && matches!(ghi, Ok(x) if x > 0.0)) {
            widen += 1;
            if widen > 8 {
                return Err(ShiftError::Bracket(v));
            }
            let w = span * 2f64.powi(widen);
            lo = v - w;
            hi = v + w;
            glo = g(lo);
            ghi = g(hi);
        }
        let mut u = 0.5 * (lo + hi);
        for _ in 0..200 {
            let gu = g(u)?;
            if gu == 0.0 {
                return Ok(u);
            }
            if gu < 0.0 {
                lo = u;
            } else {
                hi = u;
            }
            let slope = 1.0 + self.t_omega_prime_log(u)?;
            let newton = u - gu / slope;
            let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if (next - u).abs() <= 1e-12 * u.abs().max(1.0) * 0.01 || hi - lo <= 1e-15 * u.abs().max(1.0) {
                return Ok(next);
            }
            u = next;
        }
        Ok(u)
    }

    pub fn beta(&self, t: f64) -> Result<f64, ShiftError> {
        Ok(self.log_beta(t.ln())?.exp())
    }

    /// `log alpha_n(exp(u))`; negative `n` iterates `beta`.
    pub fn iterate_log(&self, n: i64, u: f64) -> Result<f64, ShiftError> {
        if n.unsigned_abs() as usize > self.max_iterate {
            return Err(ShiftError::IterateLimit { n, max: self.max_iterate });
        }
        let mut u = u;
        for _ in 0..n.unsigned_abs() {
            u = if n > 0 { self.log_alpha(u)? } else { self.log_beta(u)? };
            if !u.is_finite() {
                return Err(ShiftError::Overflow(u));
            }
        }
        Ok(u)
    }

    pub fn iterate(&self, n: i64, t: f64) -> Result<f64, ShiftError> {
        Ok(self.iterate_log(n, t.ln())?.exp())
    }

    /// `log alpha` at every node of `f`'s grid.
    pub fn log_alpha_on(&self, f: &LogGridFunction) -> Result<Vec<f64>, ShiftError> {
        f.grid().xs().map(|x| self.log_alpha(x)).collect()
    }

    /// `(W_alpha f)(t) = f(alpha(t))`, cubic interpolation in `log t`. Exact
    /// for multiplicative shifts whose `log k` is a multiple of the step.
    pub fn apply(&self, f: &LogGridFunction) -> Result<LogGridFunction, ShiftError> {
        let targets = self.log_alpha_on(f)?;
        apply_at(f, &targets)
    }

    /// [`apply`](Self::apply) with `f` taken as zero beyond its grid.
    pub fn apply_truncated(&self, f: &LogGridFunction) -> Result<LogGridFunction, ShiftError> {
        let targets = self.log_alpha_on(f)?;
        sample_at(f, &targets, (true, true))
    }

    /// `W_alpha^{-1} f = f o beta`.
    pub fn apply_inverse(&self, f: &LogGridFunction) -> Result<LogGridFunction, ShiftError> {
        let targets: Vec<f64> = f.grid().xs().map(|x| self.log_beta(x)).collect::<Result<_, _>>()?;
        apply_at(f, &targets)
    }
}

/// Samples `f` at the given `log t` positions, one per node of its grid.
pub(crate) fn apply_at(f: &LogGridFunction, targets: &[f64]) -> Result<LogGridFunction, ShiftError> {
    sample_at(f, targets, f.decay_flags())
}

fn sample_at(f: &LogGridFunction, targets: &[f64], flags: (bool, bool)) -> Result<LogGridFunction, ShiftError> {
    let g = f.grid();
    let values = targets
        .iter()
        .map(|&x| f.at_index_with((x - g.x0()) / g.step(), flags))
        .collect::<Result<Vec<Complex64>, _>>()?;
    Ok(LogGridFunction::new(*g, values)?)
}

/// `alpha'` at a fiber point: `exp(omega(xi))`.
pub fn fiber_shift_derivative(omega_at_fiber: f64) -> f64 {
    omega_at_fiber.exp()
}

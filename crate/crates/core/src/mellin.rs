//! Mellin analysis on log grids: the transform pair, Mellin convolutions
//! `Co(a) = M^{-1} a M`, the symbols `s_p`, `r_p`, `m_k`, direct quadrature
//! of `S` and `R`, total variation and the Stechkin multiplier bound.
//!
//! `(M f)(x) = int f(t) t^{-ix} dt/t` is the Fourier transform of
//! `f(e^y)`, so everything here is FFT on the `log t` grid. Functions passed
//! to [`co_apply`] live in `L^p(dt/t)`, i.e. they are `Phi f`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::expr::{DiffError, EvalError, Expr};
use crate::grid::{GridError, LogGrid, LogGridFunction};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MellinError {
    #[error("function does not decay at the {0} end of the grid")]
    NotDecaying(&'static str),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("total variation does not converge (last window [-{window:e}, {window:e}], increment {increment:e})")]
    Divergent { window: f64, increment: f64 },
    #[error("symbol is not finite at x = {0}")]
    NonFinite(f64),
    #[error("invalid parameter: {0}")]
    Parameter(&'static str),
}

/// Zero-padding factor of the FFT routes.
pub const PAD: usize = 4;

const I: Complex64 = Complex64::new(0.0, 1.0);

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// `coth z`, stable for large `|Re z|`.
pub fn coth(z: Complex64) -> Complex64 {
    if z.re < 0.0 {
        return -coth(-z);
    }
    let w = (-2.0 * z).exp();
    (1.0 + w) / (1.0 - w)
}

/// `1 / sinh z`, stable for large `|Re z|`.
pub fn csch(z: Complex64) -> Complex64 {
    if z.re < 0.0 {
        return -csch(-z);
    }
    let w = (-2.0 * z).exp();
    2.0 * (-z).exp() / (1.0 - w)
}

/// `s_p(x) = coth(pi (x + i/p))`.
pub fn symbol_sp(p: f64, x: f64) -> Complex64 {
    coth(Complex64::new(PI * x, PI / p))
}

/// `r_p(x) = 1 / sinh(pi (x + i/p))`.
pub fn symbol_rp(p: f64, x: f64) -> Complex64 {
    csch(Complex64::new(PI * x, PI / p))
}

/// `s_p'(x) = -pi r_p(x)^2`.
pub fn symbol_sp_derivative(p: f64, x: f64) -> Complex64 {
    let r = symbol_rp(p, x);
    -PI * r * r
}

/// `m_k(x) = exp(i (x + i/p) log k)`.
pub fn symbol_mk(k: f64, p: f64, x: f64) -> Complex64 {
    Complex64::new(-k.ln() / p, x * k.ln()).exp()
}

/// Multiplier of a Mellin convolution operator.
#[derive(Clone)]
pub enum MellinSymbol {
    /// Expression in the variable `x`.
    ClosedForm(Expr),
    /// Samples on a uniform `x` grid, linear in between, constant beyond.
    Sampled { x0: f64, h: f64, values: Vec<Complex64> },
    /// `sum r e^{i lambda x}` over `(r, lambda)`.
    ApPolynomial(Vec<(Complex64, f64)>),
    /// Built-in closed form.
    Function(&'static str, Arc<dyn Fn(f64) -> Complex64 + Send + Sync>),
}

impl fmt::Debug for MellinSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MellinSymbol::ClosedForm(e) => write!(f, "ClosedForm({e})"),
            MellinSymbol::Sampled { x0, h, values } => {
                write!(f, "Sampled {{ x0: {x0}, h: {h}, len: {} }}", values.len())
            }
            MellinSymbol::ApPolynomial(terms) => write!(f, "ApPolynomial({terms:?})"),
            MellinSymbol::Function(name, _) => write!(f, "Function({name})"),
        }
    }
}

impl MellinSymbol {
    pub fn constant(value: Complex64) -> Self {
        MellinSymbol::ApPolynomial(vec![(value, 0.0)])
    }

    pub fn sp(p: f64) -> Self {
        MellinSymbol::Function("s_p", Arc::new(move |x| symbol_sp(p, x)))
    }

    pub fn rp(p: f64) -> Self {
        MellinSymbol::Function("r_p", Arc::new(move |x| symbol_rp(p, x)))
    }

    pub fn mk(k: f64, p: f64) -> Self {
        MellinSymbol::ApPolynomial(vec![(c(k.powf(-1.0 / p)), k.ln())])
    }

    pub fn function(name: &'static str, f: impl Fn(f64) -> Complex64 + Send + Sync + 'static) -> Self {
        MellinSymbol::Function(name, Arc::new(f))
    }

    /// Pointwise product; AP polynomials multiply exactly.
    pub fn product(&self, other: &MellinSymbol) -> MellinSymbol {
        if let (MellinSymbol::ApPolynomial(a), MellinSymbol::ApPolynomial(b)) = (self, other) {
            let mut terms = Vec::with_capacity(a.len() * b.len());
            for &(ra, la) in a {
                for &(rb, lb) in b {
                    terms.push((ra * rb, la + lb));
                }
            }
            return MellinSymbol::ApPolynomial(terms);
        }
        let (a, b) = (self.clone(), other.clone());
        MellinSymbol::function("product", move |x| {
            a.eval(x).unwrap_or(c(f64::NAN)) * b.eval(x).unwrap_or(c(f64::NAN))
        })
    }

    pub fn is_almost_periodic(&self) -> bool {
        matches!(self, MellinSymbol::ApPolynomial(_))
    }

    pub fn eval(&self, x: f64) -> Result<Complex64, MellinError> {
        let v = match self {
            MellinSymbol::ClosedForm(e) => e.eval_at(x)?,
            MellinSymbol::Sampled { x0, h, values } => {
                let s = (x - x0) / h;
                if s <= 0.0 {
                    values[0]
                } else if s >= (values.len() - 1) as f64 {
                    values[values.len() - 1]
                } else {
                    let k = s.floor() as usize;
                    let f = s - k as f64;
                    values[k] * (1.0 - f) + values[k + 1] * f
                }
            }
            MellinSymbol::ApPolynomial(terms) => {
                terms.iter().map(|&(r, l)| r * Complex64::from_polar(1.0, l * x)).sum()
            }
            MellinSymbol::Function(_, f) => f(x),
        };
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(MellinError::NonFinite(x));
        }
        Ok(v)
    }

    /// CSV rows `x,re,im,abs`.
    pub fn trace_csv(&self, xs: impl IntoIterator<Item = f64>) -> Result<String, MellinError> {
        let mut s = String::from("x,re,im,abs\n");
        for x in xs {
            let v = self.eval(x)?;
            s.push_str(&format!("{x:.17e},{:.17e},{:.17e},{:.17e}\n", v.re, v.im, v.norm()));
        }
        Ok(s)
    }
}

fn fft(data: &mut [Complex64], inverse: bool) {
    let mut planner = FftPlanner::new();
    let plan = if inverse { planner.plan_fft_inverse(data.len()) } else { planner.plan_fft_forward(data.len()) };
    plan.process(data);
}

fn padded_len(n: usize) -> usize {
    (PAD * n).next_power_of_two()
}

/// Signed frequency of FFT bin `k` for `len` points at step `h`.
fn frequency(k: usize, len: usize, h: f64) -> f64 {
    let signed = if k < len / 2 { k as f64 } else { k as f64 - len as f64 };
    2.0 * PI * signed / (len as f64 * h)
}

/// Mellin transform sampled at the frequencies of the padded FFT.
#[derive(Clone, Debug, PartialEq)]
pub struct MellinTransform {
    /// Frequencies in increasing order.
    pub xi: Vec<f64>,
    pub values: Vec<Complex64>,
    grid: LogGrid,
}

impl MellinTransform {
    pub fn step(&self) -> f64 {
        self.xi[1] - self.xi[0]
    }

    /// `||M f||_2`.
    pub fn norm2(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.step()).sqrt()
    }

    pub fn as_symbol(&self) -> MellinSymbol {
        MellinSymbol::Sampled { x0: self.xi[0], h: self.step(), values: self.values.clone() }
    }

    /// `(M^{-1} g)(t) = (1/2pi) int g(x) t^{ix} dx` on the original grid.
    pub fn inverse(&self) -> LogGridFunction {
        let len = self.values.len();
        let half = len / 2;
        let x0 = self.grid.x0();
        let h = self.grid.step();
        // undo the ordering and the origin phase
        let mut data = vec![Complex64::new(0.0, 0.0); len];
        for (i, (&xi, &v)) in self.xi.iter().zip(&self.values).enumerate() {
            let k = (i + len - half) % len;
            data[k] = v * Complex64::from_polar(1.0, xi * x0) / h;
        }
        fft(&mut data, true);
        let n = self.grid.len();
        let values = data[..n].iter().map(|v| v / len as f64).collect();
        LogGridFunction::new(self.grid, values).expect("grid length")
    }
}

/// `(M f)(x)` for `f` sampled on a log grid (trapezoid, zero-padded FFT).
pub fn mellin_transform(f: &LogGridFunction) -> Result<MellinTransform, MellinError> {
    let (left, right) = f.decay_flags();
    if !left {
        return Err(MellinError::NotDecaying("left"));
    }
    if !right {
        return Err(MellinError::NotDecaying("right"));
    }
    let g = *f.grid();
    let len = padded_len(g.len());
    let mut data = vec![Complex64::new(0.0, 0.0); len];
    data[..g.len()].copy_from_slice(f.values());
    fft(&mut data, false);
    let half = len / 2;
    let mut xi = Vec::with_capacity(len);
    let mut values = Vec::with_capacity(len);
    for i in 0..len {
        let k = (i + len - half) % len;
        let w = frequency(k, len, g.step());
        xi.push(w);
        values.push(data[k] * g.step() * Complex64::from_polar(1.0, -w * g.x0()));
    }
    Ok(MellinTransform { xi, values, grid: g })
}

/// `Co(a) psi` through the padded FFT, for any kind of symbol.
pub fn co_apply_fft(a: &MellinSymbol, psi: &LogGridFunction) -> Result<LogGridFunction, MellinError> {
    let g = *psi.grid();
    let (left, right) = psi.decay_flags();
    if !(left && right) {
        log::warn!("Mellin convolution applied to a function that does not decay at the grid ends");
    }
    let len = padded_len(g.len());
    let mut data = vec![Complex64::new(0.0, 0.0); len];
    data[..g.len()].copy_from_slice(psi.values());
    fft(&mut data, false);
    let peak = data.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    let mut edge = 0.0f64;
    for (k, v) in data.iter_mut().enumerate() {
        let w = frequency(k, len, g.step());
        let s = a.eval(w)?;
        let d = (k as i64 - (len / 2) as i64).unsigned_abs() as usize;
        if d < len / 64 {
            edge = edge.max((s * *v).norm());
        }
        *v *= s;
    }
    if peak > 0.0 && edge > 1e-10 * peak {
        log::warn!("Mellin convolution: spectrum not negligible near Nyquist ({:.2e} relative)", edge / peak);
    }
    fft(&mut data, true);
    let values = data[..g.len()].iter().map(|v| v / len as f64).collect();
    Ok(LogGridFunction::new(g, values)?)
}

/// `Co(a) psi`. Almost periodic polynomials act by translation,
/// `Co(e^{i lambda .}) psi (x) = psi(x + lambda)`; other symbols via FFT.
pub fn co_apply(a: &MellinSymbol, psi: &LogGridFunction) -> Result<LogGridFunction, MellinError> {
    match a {
        MellinSymbol::ApPolynomial(terms) => {
            let g = *psi.grid();
            let mut out = LogGridFunction::zeros(g);
            for &(r, l) in terms {
                let shifted = psi.resample(&g.shifted(l))?;
                for (o, v) in out.values_mut().iter_mut().zip(shifted.values()) {
                    *o += r * v;
                }
            }
            Ok(out)
        }
        _ => co_apply_fft(a, psi),
    }
}

/// Computation route for `S`, `R`, `P_+`, `P_-`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    /// Quadrature of the singular integral in the `log t` variable.
    Direct,
    /// `Phi^{-1} Co(symbol) Phi`.
    Symbol,
}

fn check_p(p: f64) -> Result<(), MellinError> {
    if p > 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(MellinError::Parameter("p must lie in (1, inf)"))
    }
}

/// Kernel of `Phi S Phi^{-1}` in `w = x - y`, without the `1/(pi i)`.
fn s_kernel(p: f64, w: f64) -> f64 {
    if w > 0.0 {
        // e^{w/p}/(1-e^w) = -e^{-w(1-1/p)}/(1-e^{-w})
        -(-w * (1.0 - 1.0 / p)).exp() / (-(-w).exp_m1())
    } else {
        (w / p).exp() / (-w.exp_m1())
    }
}

/// `h sum_{m != 0} K(m h)` over the whole lattice, summed in symmetric pairs.
fn s_lattice_sum(p: f64, h: f64) -> f64 {
    let decay = (1.0 / p).min(1.0 - 1.0 / p);
    let mut sum = 0.0;
    let mut m = 1usize;
    loop {
        let w = m as f64 * h;
        let term = s_kernel(p, w) + s_kernel(p, -w);
        sum += term;
        if (w * decay) > 45.0 {
            break;
        }
        m += 1;
    }
    h * sum
}

/// Linear Toeplitz product `out_i = sum_j k(i - j) v_j` for `|i - j| < n`.
fn toeplitz_apply(kernel: impl Fn(i64) -> f64, v: &[Complex64]) -> Vec<Complex64> {
    let n = v.len();
    let len = (2 * n).next_power_of_two();
    let mut kd = vec![Complex64::new(0.0, 0.0); len];
    for m in -(n as i64 - 1)..(n as i64) {
        kd[m.rem_euclid(len as i64) as usize] = c(kernel(m));
    }
    let mut vd = vec![Complex64::new(0.0, 0.0); len];
    vd[..n].copy_from_slice(v);
    fft(&mut kd, false);
    fft(&mut vd, false);
    for (a, b) in vd.iter_mut().zip(&kd) {
        *a *= b;
    }
    fft(&mut vd, true);
    vd[..n].iter().map(|x| x / len as f64).collect()
}

/// `S f` by singularity subtraction and the trapezoid rule in `log t`.
/// `f` is taken to vanish beyond the grid.
pub fn apply_s_direct(f: &LogGridFunction, p: f64) -> Result<LogGridFunction, MellinError> {
    check_p(p)?;
    let psi = f.phi_centred(p);
    let g = *psi.grid();
    let h = g.step();
    let (left, right) = psi.decay_flags();
    if !(left && right) {
        log::warn!("S: input truncated at a grid end where it does not vanish");
    }
    let conv = toeplitz_apply(|m| if m == 0 { 0.0 } else { s_kernel(p, m as f64 * h) }, psi.values());
    let d = psi.dx();
    let local = PI / (PI / p).tan() - s_lattice_sum(p, h);
    let scale = 1.0 / (PI * I);
    let values = (0..g.len())
        .map(|i| scale * (h * conv[i] + h * d[i] + psi.values()[i] * local))
        .collect();
    Ok(LogGridFunction::new(g, values)?.phi_inv_centred(p))
}

/// Reference `O(n^2)` version of [`apply_s_direct`] for small grids.
pub fn apply_s_direct_naive(f: &LogGridFunction, p: f64) -> Result<LogGridFunction, MellinError> {
    check_p(p)?;
    let psi = f.phi_centred(p);
    let g = *psi.grid();
    let h = g.step();
    let v = psi.values();
    let d = psi.dx();
    let local = PI / (PI / p).tan() - s_lattice_sum(p, h);
    let values = (0..g.len())
        .map(|i| {
            let mut acc = h * d[i] + v[i] * local;
            for (j, vj) in v.iter().enumerate() {
                if j != i {
                    acc += h * s_kernel(p, (i as f64 - j as f64) * h) * vj;
                }
            }
            acc / (PI * I)
        })
        .collect();
    Ok(LogGridFunction::new(g, values)?.phi_inv_centred(p))
}

fn r_kernel(p: f64, w: f64) -> f64 {
    // e^{w/p}/(1+e^w), written to avoid overflow
    if w > 0.0 {
        (-w * (1.0 - 1.0 / p)).exp() / (1.0 + (-w).exp())
    } else {
        (w / p).exp() / (1.0 + w.exp())
    }
}

/// `R f` by the trapezoid rule in `log t`.
pub fn apply_r_direct(f: &LogGridFunction, p: f64) -> Result<LogGridFunction, MellinError> {
    check_p(p)?;
    let psi = f.phi_centred(p);
    let g = *psi.grid();
    let h = g.step();
    let (left, right) = psi.decay_flags();
    if !(left && right) {
        log::warn!("R: input truncated at a grid end where it does not vanish");
    }
    let conv = toeplitz_apply(|m| r_kernel(p, m as f64 * h), psi.values());
    let values = conv.into_iter().map(|v| v * h / (PI * I)).collect();
    Ok(LogGridFunction::new(g, values)?.phi_inv_centred(p))
}

/// `Phi^{-1} Co(a) Phi f`.
pub fn conjugated(a: &MellinSymbol, f: &LogGridFunction, p: f64) -> Result<LogGridFunction, MellinError> {
    Ok(co_apply(a, &f.phi_centred(p))?.phi_inv_centred(p))
}

pub fn apply_s(f: &LogGridFunction, p: f64, route: Route) -> Result<LogGridFunction, MellinError> {
    match route {
        Route::Direct => apply_s_direct(f, p),
        Route::Symbol => {
            check_p(p)?;
            conjugated(&MellinSymbol::sp(p), f, p)
        }
    }
}

pub fn apply_r(f: &LogGridFunction, p: f64, route: Route) -> Result<LogGridFunction, MellinError> {
    match route {
        Route::Direct => apply_r_direct(f, p),
        Route::Symbol => {
            check_p(p)?;
            conjugated(&MellinSymbol::rp(p), f, p)
        }
    }
}

/// `P_+ f = (f + S f)/2` for `sign = 1`, `P_- f = (f - S f)/2` for `sign = -1`.
pub fn apply_projection(f: &LogGridFunction, p: f64, sign: f64, route: Route) -> Result<LogGridFunction, MellinError> {
    let s = apply_s(f, p, route)?;
    Ok(f.zip(&s, |a, b| 0.5 * (a + sign * b))?)
}

/// Window doubling limit for [`total_variation`].
const MAX_DOUBLINGS: usize = 64;

fn adaptive_simpson(f: &dyn Fn(f64) -> Result<f64, MellinError>, a: f64, b: f64, tol: f64) -> Result<f64, MellinError> {
    fn rec(
        f: &dyn Fn(f64) -> Result<f64, MellinError>,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> Result<f64, MellinError> {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm)?, f(rm)?);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return Ok(left + right + delta / 15.0);
        }
        Ok(rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)?
            + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)?)
    }
    // split into pieces so narrow features are not stepped over
    let pieces = 64;
    let w = (b - a) / pieces as f64;
    let mut total = 0.0;
    for k in 0..pieces {
        let (x0, x1) = (a + k as f64 * w, a + (k + 1) as f64 * w);
        let (f0, fm, f1) = (f(x0)?, f(0.5 * (x0 + x1))?, f(x1)?);
        let whole = (x1 - x0) / 6.0 * (f0 + 4.0 * fm + f1);
        total += rec(f, x0, x1, f0, fm, f1, whole, tol / pieces as f64, 40)?;
    }
    Ok(total)
}

/// `V(a) = int |a'(x)| dx` for an expression in `x`. The window `[-X, X]`
/// starts at `X = hint` and doubles until the added mass is negligible.
pub fn total_variation(a: &Expr, hint: f64) -> Result<f64, MellinError> {
    if !(hint > 0.0) {
        return Err(MellinError::Parameter("support hint must be positive"));
    }
    if a.is_constant() {
        return Ok(0.0);
    }
    let d = a.differentiate()?;
    let integrand = |x: f64| -> Result<f64, MellinError> { Ok(d.eval_at(x)?.norm()) };
    let mut x = hint;
    let mut total = adaptive_simpson(&integrand, -x, x, 1e-12)?;
    let mut growing = 0;
    let mut last_increment = f64::INFINITY;
    for _ in 0..MAX_DOUBLINGS {
        let inc = adaptive_simpson(&integrand, -2.0 * x, -x, 1e-13)? + adaptive_simpson(&integrand, x, 2.0 * x, 1e-13)?;
        total += inc;
        x *= 2.0;
        if inc <= 1e-10 * total.max(1.0) {
            return Ok(total);
        }
        growing = if inc >= 0.99 * last_increment { growing + 1 } else { 0 };
        if growing >= 6 {
            return Err(MellinError::Divergent { window: x, increment: inc });
        }
        last_increment = inc;
    }
    Err(MellinError::Divergent { window: x, increment: last_increment })
}

/// Norm of the Cauchy singular integral on `L^p(R)`:
/// `cot(pi / (2 max(p, q)))`.
pub fn cauchy_norm(p: f64) -> f64 {
    let q = p / (p - 1.0);
    1.0 / (PI / (2.0 * p.max(q))).tan()
}

/// `||S_R||_p (sup|a| + V(a))`. `norm_override` replaces the constant.
pub fn stechkin_bound(a: &Expr, p: f64, hint: f64, norm_override: Option<f64>) -> Result<f64, MellinError> {
    check_p(p)?;
    let v = total_variation(a, hint)?;
    // sup|a| on a dense window plus far samples toward the limits
    let mut sup: f64 = 0.0;
    let window = 64.0 * hint;
    for k in 0..=20000 {
        let x = -window + 2.0 * window * k as f64 / 20000.0;
        sup = sup.max(a.eval_at(x)?.norm());
    }
    for k in 0..40 {
        let x = window * 2f64.powi(k);
        sup = sup.max(a.eval_at(x)?.norm()).max(a.eval_at(-x)?.norm());
    }
    Ok(norm_override.unwrap_or_else(|| cauchy_norm(p)) * (sup + v))
}

//! Functions sampled on uniform grids in `x = log t`.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("invalid grid: {0}")]
    Invalid(&'static str),
    #[error("point log t = {x} lies outside the grid [{lo}, {hi}] where the function does not vanish")]
    Extrapolation { x: f64, lo: f64, hi: f64 },
    #[error("grids differ")]
    Mismatch,
}

/// Uniform grid `x_j = x0 + j h`, `j = 0..n`, in the variable `x = log t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogGrid {
    x0: f64,
    h: f64,
    n: usize,
}

impl LogGrid {
    pub fn new(x0: f64, h: f64, n: usize) -> Result<LogGrid, GridError> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(GridError::Invalid("step must be positive"));
        }
        if n < 8 {
            return Err(GridError::Invalid("need at least 8 points"));
        }
        if !x0.is_finite() {
            return Err(GridError::Invalid("origin must be finite"));
        }
        Ok(LogGrid { x0, h, n })
    }

    /// `2^m` points covering `[-l, l)`.
    pub fn symmetric(l: f64, m: u32) -> LogGrid {
        let n = 1usize << m;
        LogGrid { x0: -l, h: 2.0 * l / n as f64, n }
    }

    /// Grid with step `h` (exactly), `n` points, centred on `x = 0` with a
    /// node at 0.
    pub fn centered(h: f64, n: usize) -> LogGrid {
        LogGrid { x0: -((n / 2) as f64) * h, h, n }
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x0 + j as f64 * self.h
    }

    pub fn centre(&self) -> f64 {
        self.x0 + 0.5 * (self.n - 1) as f64 * self.h
    }

    pub fn x_last(&self) -> f64 {
        self.x(self.n - 1)
    }

    pub fn t(&self, j: usize) -> f64 {
        self.x(j).exp()
    }

    pub fn xs(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |j| self.x(j))
    }

    /// Same step and size, origin moved by `dx`.
    pub fn shifted(&self, dx: f64) -> LogGrid {
        LogGrid { x0: self.x0 + dx, ..*self }
    }

    /// Same step, `factor` times as many points, same centre node.
    pub fn widened(&self, factor: usize) -> LogGrid {
        let n = self.n * factor;
        let extra = (n - self.n) / 2;
        LogGrid { x0: self.x0 - extra as f64 * self.h, h: self.h, n }
    }

    /// Index of the node nearest to `x` if it lies on this grid's lattice.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let s = (x - self.x0) / self.h;
        let k = s.round();
        if (s - k).abs() < 1e-9 && k >= 0.0 && (k as usize) < self.n {
            Some(k as usize)
        } else {
            None
        }
    }

    pub fn same_lattice(&self, other: &LogGrid) -> bool {
        self.h == other.h && self.n == other.n && {
            let s = (other.x0 - self.x0) / self.h;
            (s - s.round()).abs() < 1e-9
        }
    }
}

/// Samples of a function on a [`LogGrid`]. Interpolation between nodes is
/// cubic (four-point Lagrange) in `x = log t`.
#[derive(Clone, Debug, PartialEq)]
pub struct LogGridFunction {
    grid: LogGrid,
    values: Vec<Complex64>,
}

/// Relative size below which the samples at a grid end count as vanished.
pub const DECAY_TOL: f64 = 1e-12;
const EDGE: usize = 4;

impl LogGridFunction {
    pub fn new(grid: LogGrid, values: Vec<Complex64>) -> Result<Self, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::Mismatch);
        }
        Ok(LogGridFunction { grid, values })
    }

    pub fn zeros(grid: LogGrid) -> Self {
        LogGridFunction { grid, values: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    /// Samples `f(x)` with `x = log t`.
    pub fn from_log_fn(grid: LogGrid, f: impl Fn(f64) -> Complex64) -> Self {
        let values = grid.xs().map(f).collect();
        LogGridFunction { grid, values }
    }

    /// Samples `f(t)`.
    pub fn from_fn(grid: LogGrid, f: impl Fn(f64) -> Complex64) -> Self {
        Self::from_log_fn(grid, |x| f(x.exp()))
    }

    pub fn grid(&self) -> &LogGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64, Complex64) -> Complex64) -> Self {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(j, &v)| f(self.grid.x(j), v))
            .collect();
        LogGridFunction { grid: self.grid, values }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        self.map(|_, v| c * v)
    }

    pub fn add(&self, other: &Self) -> Result<Self, GridError> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, GridError> {
        self.zip(other, |a, b| a - b)
    }

    pub fn zip(&self, other: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Self, GridError> {
        if self.grid != other.grid {
            return Err(GridError::Mismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(LogGridFunction { grid: self.grid, values })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    fn edge_max(&self, left: bool) -> f64 {
        let k = EDGE.min(self.values.len());
        let slice = if left { &self.values[..k] } else { &self.values[self.values.len() - k..] };
        slice.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// `(left, right)`: whether the samples at each end are negligible.
    pub fn decay_flags(&self) -> (bool, bool) {
        let scale = self.max_abs();
        if scale == 0.0 {
            return (true, true);
        }
        (self.edge_max(true) <= DECAY_TOL * scale, self.edge_max(false) <= DECAY_TOL * scale)
    }

    /// Norm in `L^p(R_+, dt)`, trapezoid in `x`.
    pub fn norm_lp(&self, p: f64) -> f64 {
        let h = self.grid.h;
        let s: f64 = self
            .values
            .iter()
            .enumerate()
            .map(|(j, v)| v.norm().powf(p) * self.grid.x(j).exp())
            .sum();
        (h * s).powf(1.0 / p)
    }

    /// Norm in `L^p(R_+, dt/t)`.
    pub fn norm_lp_mu(&self, p: f64) -> f64 {
        let s: f64 = self.values.iter().map(|v| v.norm().powf(p)).sum();
        (self.grid.h * s).powf(1.0 / p)
    }

    /// `(Phi f)(t) = t^{1/p} f(t)`, the isometry `L^p(dt) -> L^p(dt/t)`.
    pub fn phi(&self, p: f64) -> Self {
        self.map(|x, v| v * (x / p).exp())
    }

    pub fn phi_inv(&self, p: f64) -> Self {
        self.map(|x, v| v * (-x / p).exp())
    }

    /// `Phi` divided by `t_c^{1/p}` with `t_c` at the grid centre. Operators
    /// `Phi^{-1} C Phi` are unchanged by the constant, and grids far out on
    /// the half-line do not overflow.
    pub(crate) fn phi_centred(&self, p: f64) -> Self {
        let c = self.grid.centre();
        self.map(|x, v| v * ((x - c) / p).exp())
    }

    pub(crate) fn phi_inv_centred(&self, p: f64) -> Self {
        let c = self.grid.centre();
        self.map(|x, v| v * (-(x - c) / p).exp())
    }

    /// `(V_s f)(t) = f(t/s)`: relabels the grid, samples unchanged.
    pub fn dilate(&self, s: f64) -> Self {
        self.dilate_log(s.ln())
    }

    /// Dilation by `exp(dx)`.
    pub fn dilate_log(&self, dx: f64) -> Self {
        LogGridFunction { grid: self.grid.shifted(dx), values: self.values.clone() }
    }

    /// `(E_mu f)(t) = t^{i mu} f(t)`.
    pub fn modulate(&self, mu: f64) -> Self {
        self.map(|x, v| v * Complex64::from_polar(1.0, mu * x))
    }

    /// Value at fractional node index `s`, cubic in `x`. Outside the grid
    /// (or with a stencil leaving it) the function is extended by zero at an
    /// end where it has decayed; otherwise an extrapolation error results.
    pub fn at_index(&self, s: f64) -> Result<Complex64, GridError> {
        self.at_index_with(s, self.decay_flags())
    }

    /// [`at_index`](Self::at_index) with precomputed decay flags.
    pub(crate) fn at_index_with(&self, s: f64, flags: (bool, bool)) -> Result<Complex64, GridError> {
        let n = self.values.len();
        let last = (n - 1) as f64;
        let (left_ok, right_ok) = flags;
        let r = s.round();
        let s = if (s - r).abs() < 1e-9 { r } else { s };
        if s < 0.0 || s > last {
            let ok = if s < 0.0 { left_ok } else { right_ok };
            if ok {
                if s < -2.0 || s > last + 2.0 {
                    return Ok(Complex64::new(0.0, 0.0));
                }
            } else {
                return Err(self.extrapolation(s));
            }
        }
        let base = s.floor();
        let frac = s - base;
        let base = base as i64;
        if frac == 0.0 && base >= 0 && (base as usize) < n {
            return Ok(self.values[base as usize]);
        }
        let mut k0 = base - 1;
        let get = |k: i64| -> Option<Complex64> {
            if k >= 0 && (k as usize) < n {
                Some(self.values[k as usize])
            } else if (k < 0 && left_ok) || (k >= n as i64 && right_ok) {
                Some(Complex64::new(0.0, 0.0))
            } else {
                None
            }
        };
        if get(k0).is_none() {
            k0 = 0;
        }
        if get(k0 + 3).is_none() {
            k0 = n as i64 - 4;
        }
        let xs = s - k0 as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..4 {
            let mut w = 1.0;
            for j in 0..4 {
                if i != j {
                    w *= (xs - j as f64) / (i as f64 - j as f64);
                }
            }
            let v = get(k0 + i as i64).ok_or_else(|| self.extrapolation(s))?;
            acc += v * w;
        }
        Ok(acc)
    }

    fn extrapolation(&self, s: f64) -> GridError {
        GridError::Extrapolation {
            x: self.grid.x0 + s * self.grid.h,
            lo: self.grid.x0,
            hi: self.grid.x_last(),
        }
    }

    /// Value at `x = log t`.
    pub fn at_x(&self, x: f64) -> Result<Complex64, GridError> {
        self.at_index((x - self.grid.x0) / self.grid.h)
    }

    /// Resamples onto `target`, exactly when the lattices coincide.
    pub fn resample(&self, target: &LogGrid) -> Result<Self, GridError> {
        let offset = (target.x0 - self.grid.x0) / self.grid.h;
        let ratio = target.h / self.grid.h;
        let flags = self.decay_flags();
        let mut values = Vec::with_capacity(target.len());
        for j in 0..target.len() {
            values.push(self.at_index_with(offset + j as f64 * ratio, flags)?);
        }
        Ok(LogGridFunction { grid: *target, values })
    }

    /// Central-difference derivative in `x` (one-sided at the ends).
    pub fn dx(&self) -> Vec<Complex64> {
        let n = self.values.len();
        let h = self.grid.h;
        let v = &self.values;
        (0..n)
            .map(|j| {
                if j == 0 {
                    (v[1] - v[0]) / h
                } else if j == n - 1 {
                    (v[n - 1] - v[n - 2]) / h
                } else {
                    (v[j + 1] - v[j - 1]) / (2.0 * h)
                }
            })
            .collect()
    }

    /// Inner product `sum_j f_j conj(g_j) h` in `L^2(dt/t)`.
    pub fn inner_mu(&self, other: &Self) -> Result<Complex64, GridError> {
        if self.grid != other.grid {
            return Err(GridError::Mismatch);
        }
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| a * b.conj()).sum::<Complex64>() * self.grid.h)
    }
}

/// Log-Gaussian `exp(-(log t - centre)^2 / (2 width^2))`.
pub fn log_gaussian(grid: LogGrid, centre: f64, width: f64) -> LogGridFunction {
    LogGridFunction::from_log_fn(grid, |x| {
        let z = (x - centre) / width;
        Complex64::new((-0.5 * z * z).exp(), 0.0)
    })
}

/// Indicator of `[lo, hi]` in `t`, sampled at the nodes.
pub fn indicator(grid: LogGrid, lo: f64, hi: f64) -> LogGridFunction {
    let (a, b) = (lo.ln(), hi.ln());
    let eps = 1e-9 * grid.step();
    LogGridFunction::from_log_fn(grid, |x| {
        if x >= a - eps && x <= b + eps {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

//! Slowly oscillating coefficients: oscillation modulus, the SO test, and
//! estimation of joint partial limits at `0` and `infinity` (sampled fiber
//! points).
//!
//! All sampling happens in `u = log t`, so points like `t = exp(exp(20))`
//! are reachable as long as the expressions involved stay finite there.

use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

use crate::expr::{EvalError, Expr};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SoError {
    #[error("`{name}`: {source}")]
    Eval {
        name: String,
        #[source]
        source: EvalError,
    },
    #[error("`{name}` is not defined at log t = {u} (declared domain log t in [{lo}, {hi}])")]
    OutsideDomain { name: String, u: f64, lo: f64, hi: f64 },
    #[error("`{name}` is not sampled near {endpoint} and has no asserted limit there")]
    EndpointUnsupported { name: String, endpoint: Endpoint },
    #[error("`{name}` failed the slow-oscillation test at {endpoint}: {reason}")]
    NotSlowlyOscillating { name: String, endpoint: Endpoint, reason: String },
    #[error("invalid parameter: {0}")]
    Parameter(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Endpoint {
    Zero,
    Infinity,
}

impl Endpoint {
    pub const BOTH: [Endpoint; 2] = [Endpoint::Zero, Endpoint::Infinity];

    /// Direction of `log t` toward the endpoint.
    pub fn sign(self) -> f64 {
        match self {
            Endpoint::Zero => -1.0,
            Endpoint::Infinity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Endpoint::Zero => "0",
            Endpoint::Infinity => "inf",
        }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A bounded continuous function on `R_+` given by an expression, with a
/// declared domain and optional asserted limits at the endpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct SoFunction {
    name: String,
    expr: Expr,
    /// Domain in `log t`.
    log_domain: (f64, f64),
    limit_zero: Option<Complex64>,
    limit_inf: Option<Complex64>,
}

impl SoFunction {
    pub fn new(name: impl Into<String>, expr: Expr) -> Self {
        SoFunction {
            name: name.into(),
            expr,
            log_domain: (f64::NEG_INFINITY, f64::INFINITY),
            limit_zero: None,
            limit_inf: None,
        }
    }

    pub fn parse(name: impl Into<String>, source: &str) -> Result<Self, crate::expr::ParseError> {
        Ok(Self::new(name, Expr::parse(source)?))
    }

    pub fn constant(name: impl Into<String>, value: f64) -> Self {
        Self::new(name, Expr::Num(value))
    }

    /// Restricts the domain to `(t_min, t_max)`; `t_min = 0` and
    /// `t_max = inf` keep the corresponding endpoint.
    pub fn with_domain(mut self, t_min: f64, t_max: f64) -> Self {
        let lo = if t_min <= 0.0 { f64::NEG_INFINITY } else { t_min.ln() };
        let hi = if t_max.is_infinite() { f64::INFINITY } else { t_max.ln() };
        self.log_domain = (lo, hi);
        self
    }

    pub fn with_limit(mut self, endpoint: Endpoint, value: Complex64) -> Self {
        match endpoint {
            Endpoint::Zero => self.limit_zero = Some(value),
            Endpoint::Infinity => self.limit_inf = Some(value),
        }
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn log_domain(&self) -> (f64, f64) {
        self.log_domain
    }

    pub fn is_constant(&self) -> bool {
        self.expr.is_constant()
    }

    /// Whether the declared domain reaches the endpoint.
    pub fn reaches(&self, endpoint: Endpoint) -> bool {
        match endpoint {
            Endpoint::Zero => self.log_domain.0 == f64::NEG_INFINITY,
            Endpoint::Infinity => self.log_domain.1 == f64::INFINITY,
        }
    }

    /// Asserted limit, or the value itself for constant expressions.
    pub fn exact_limit(&self, endpoint: Endpoint) -> Option<Complex64> {
        let asserted = match endpoint {
            Endpoint::Zero => self.limit_zero,
            Endpoint::Infinity => self.limit_inf,
        };
        asserted.or_else(|| {
            if self.is_constant() {
                self.expr.eval_constant().ok()
            } else {
                None
            }
        })
    }

    pub fn contains_log(&self, u: f64) -> bool {
        u > self.log_domain.0 && u < self.log_domain.1
    }

    /// Value at `t = exp(u)`.
    pub fn eval_log(&self, u: f64) -> Result<Complex64, SoError> {
        if !self.contains_log(u) {
            return Err(SoError::OutsideDomain {
                name: self.name.clone(),
                u,
                lo: self.log_domain.0,
                hi: self.log_domain.1,
            });
        }
        self.expr.eval_log(u).map_err(|source| SoError::Eval { name: self.name.clone(), source })
    }

    pub fn eval(&self, t: f64) -> Result<Complex64, SoError> {
        self.eval_log(t.ln())
    }

    /// Value along a sequence tending to `endpoint`: the asserted limit when
    /// the domain does not reach it, the sampled value otherwise.
    pub fn eval_toward(&self, endpoint: Endpoint, u: f64) -> Result<Complex64, SoError> {
        if self.is_constant() || !self.reaches(endpoint) {
            return self.exact_limit(endpoint).ok_or_else(|| SoError::EndpointUnsupported {
                name: self.name.clone(),
                endpoint,
            });
        }
        self.eval_log(u)
    }
}

/// Number of samples per interval in [`oscillation_modulus`].
pub const MODULUS_SAMPLES: usize = 256;

/// `sup_{t, tau in [lambda r, r]} |f(t) - f(tau)|`, computed as the exact
/// diameter of the values at 256 log-spaced points. `log_r = log r`.
pub fn oscillation_modulus(f: &SoFunction, lambda: f64, log_r: f64) -> Result<f64, SoError> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(SoError::Parameter("lambda must lie in (0, 1)"));
    }
    if f.is_constant() {
        return Ok(0.0);
    }
    let lo = log_r + lambda.ln();
    let step = (log_r - lo) / (MODULUS_SAMPLES - 1) as f64;
    let values = (0..MODULUS_SAMPLES)
        .map(|k| f.eval_log(if k == MODULUS_SAMPLES - 1 { log_r } else { lo + k as f64 * step }))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(diameter(&values))
}

pub(crate) fn diameter(values: &[Complex64]) -> f64 {
    let mut d: f64 = 0.0;
    for (i, a) in values.iter().enumerate() {
        for b in &values[i + 1..] {
            d = d.max((a - b).norm());
        }
    }
    d
}

/// Default `lambda` for the oscillation modulus.
pub const DEFAULT_LAMBDA: f64 = 0.5;
/// Default acceptance threshold of [`verify_so`].
pub const DEFAULT_SO_TOL: f64 = 1e-3;

/// Outcome of the slow-oscillation test at one endpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct SoDiagnostic {
    pub endpoint: Endpoint,
    pub accepted: bool,
    /// `(log r, modulus)` pairs in grid order.
    pub trace: Vec<(f64, f64)>,
    pub note: String,
}

impl SoDiagnostic {
    /// CSV rows `r,modulus` with `r` given as `log r`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("log_r,modulus\n");
        for (u, m) in &self.trace {
            s.push_str(&format!("{u:.17e},{m:.17e}\n"));
        }
        s
    }
}

/// Geometric grid of `log r` values toward `endpoint`: `+-u0 * 2^k`,
/// starting inside the declared domain.
pub fn default_log_r_grid(f: &SoFunction, endpoint: Endpoint, count: usize) -> Vec<f64> {
    let (lo, hi) = f.log_domain();
    let margin = 2.0;
    let start = match endpoint {
        Endpoint::Infinity => 4.0f64.max(if lo.is_finite() { lo.abs() + margin } else { 0.0 }),
        Endpoint::Zero => 4.0f64.max(if hi.is_finite() { hi.abs() + margin } else { 0.0 }),
    };
    (0..count).map(|k| endpoint.sign() * start * 2f64.powi(k as i32)).collect()
}

/// Slow-oscillation test at one endpoint. Accepts iff the modulus at the
/// last grid point is below `tol` and, over the second half of the grid, no
/// value exceeds 1.1 times the largest earlier value.
pub fn verify_so(
    f: &SoFunction,
    lambda: f64,
    endpoint: Endpoint,
    log_r_grid: &[f64],
    tol: f64,
) -> Result<SoDiagnostic, SoError> {
    if log_r_grid.len() < 8 {
        return Err(SoError::Parameter("need at least 8 grid points per endpoint"));
    }
    if f.is_constant() {
        return Ok(SoDiagnostic {
            endpoint,
            accepted: true,
            trace: log_r_grid.iter().map(|&u| (u, 0.0)).collect(),
            note: "constant".into(),
        });
    }
    if !f.reaches(endpoint) {
        return match f.exact_limit(endpoint) {
            Some(_) => Ok(SoDiagnostic {
                endpoint,
                accepted: true,
                trace: Vec::new(),
                note: "not sampled; asserted limit used".into(),
            }),
            None => Err(SoError::EndpointUnsupported { name: f.name().to_string(), endpoint }),
        };
    }
    let mut trace = Vec::with_capacity(log_r_grid.len());
    for &u in log_r_grid {
        // for the zero endpoint the interval [lambda r, r] is oriented so
        // that r is the point nearer the endpoint
        let log_r = if endpoint == Endpoint::Zero { u - lambda.ln() } else { u };
        trace.push((u, oscillation_modulus(f, lambda, log_r)?));
    }
    let last = trace.last().map(|p| p.1).unwrap_or(0.0);
    let half = trace.len() / 2;
    let mut running = trace[..half].iter().fold(0.0f64, |m, p| m.max(p.1));
    let mut grows = None;
    for &(u, m) in &trace[half..] {
        if m > 1.1 * running + 1e-15 {
            grows = Some(u);
        }
        running = running.max(m);
    }
    let (accepted, note) = if last >= tol {
        (false, format!("modulus {last:.3e} at the last grid point is not below {tol:.1e}"))
    } else if let Some(u) = grows {
        (false, format!("modulus grows again near log r = {u:.3e}"))
    } else {
        (true, String::new())
    };
    Ok(SoDiagnostic { endpoint, accepted, trace, note })
}

/// Runs [`verify_so`] with the default grid, `lambda` and tolerance.
pub fn verify_so_default(f: &SoFunction, endpoint: Endpoint) -> Result<SoDiagnostic, SoError> {
    let grid = default_log_r_grid(f, endpoint, 16);
    verify_so(f, DEFAULT_LAMBDA, endpoint, &grid, DEFAULT_SO_TOL)
}

/// The five functions entering the operator: coefficients and shift exponent.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientSet {
    pub a: SoFunction,
    pub b: SoFunction,
    pub c: SoFunction,
    pub d: SoFunction,
    pub omega: SoFunction,
}

impl CoefficientSet {
    pub fn as_array(&self) -> [&SoFunction; 5] {
        [&self.a, &self.b, &self.c, &self.d, &self.omega]
    }

    /// Constant coefficients with the multiplicative shift `t -> e^omega t`.
    pub fn constants(a: Complex64, b: Complex64, c: Complex64, d: Complex64, omega: f64) -> Self {
        let k = |name: &str, z: Complex64| {
            let e = if z.im == 0.0 {
                Expr::Num(z.re)
            } else {
                Expr::bin(
                    crate::expr::BinOp::Add,
                    Expr::Num(z.re),
                    Expr::bin(crate::expr::BinOp::Mul, Expr::Num(z.im), Expr::I),
                )
            };
            SoFunction::new(name, e)
        };
        CoefficientSet {
            a: k("a", a),
            b: k("b", b),
            c: k("c", c),
            d: k("d", d),
            omega: SoFunction::constant("omega", omega),
        }
    }
}

/// Values `(a, b, c, d, omega)` of a fiber point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FiberValues {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
    pub omega: f64,
}

impl FiberValues {
    pub fn distance(&self, other: &FiberValues) -> f64 {
        [
            (self.a - other.a).norm(),
            (self.b - other.b).norm(),
            (self.c - other.c).norm(),
            (self.d - other.d).norm(),
            (self.omega - other.omega).abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// A sampled stand-in for a point of the fiber over `0` or `infinity`.
#[derive(Clone, Debug, PartialEq)]
pub struct FiberPoint {
    pub endpoint: Endpoint,
    pub values: FiberValues,
    /// `log t` of the samples that formed this cluster, ordered toward the
    /// endpoint.
    pub source_log_t: Vec<f64>,
    /// Largest distance of a member from `values`.
    pub cluster_radius: f64,
    /// All five functions have exact limits here: the point is the fiber's
    /// only value tuple.
    pub exact: bool,
}

/// Sampling parameters for fiber estimation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FiberConfig {
    /// Step of the geometric sweep `t_n = exp(+-sigma n)`.
    pub sigma: f64,
    /// Sweep length; only `n = N/2 ..= N` is used.
    pub samples: usize,
    pub eps_cluster: f64,
    /// Rate of the iterated sweep `t_n = exp(+-exp(rate n))`.
    pub loglog_rate: f64,
}

impl Default for FiberConfig {
    fn default() -> Self {
        FiberConfig { sigma: 0.7, samples: 400, eps_cluster: 1e-2, loglog_rate: 0.06 }
    }
}

impl FiberConfig {
    /// Tail sample points in `log t`, ordered toward the endpoint: the
    /// geometric sweep followed by the iterated one.
    pub fn sweep(&self, endpoint: Endpoint) -> Vec<f64> {
        let s = endpoint.sign();
        let n = self.samples;
        let mut pts: Vec<f64> = (n / 2..=n).map(|k| s * self.sigma * k as f64).collect();
        if self.loglog_rate > 0.0 {
            pts.extend((n / 2..=n).map(|k| s * (self.loglog_rate * k as f64).exp()));
        }
        pts.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
        pts.dedup();
        pts
    }
}

fn tuple_at(set: &CoefficientSet, endpoint: Endpoint, u: f64) -> Result<FiberValues, SoError> {
    let w = set.omega.eval_toward(endpoint, u)?;
    if w.im != 0.0 {
        return Err(SoError::Eval {
            name: set.omega.name().to_string(),
            source: EvalError::NotReal { subexpr: set.omega.expr().to_string(), imag: w.im },
        });
    }
    Ok(FiberValues {
        a: set.a.eval_toward(endpoint, u)?,
        b: set.b.eval_toward(endpoint, u)?,
        c: set.c.eval_toward(endpoint, u)?,
        d: set.d.eval_toward(endpoint, u)?,
        omega: w.re,
    })
}

/// Checks the slow-oscillation property of all five functions at the
/// endpoint, returning the first failure.
pub fn require_so(set: &CoefficientSet, endpoint: Endpoint) -> Result<(), SoError> {
    for f in set.as_array() {
        let diag = verify_so_default(f, endpoint)?;
        if !diag.accepted {
            return Err(SoError::NotSlowlyOscillating {
                name: f.name().to_string(),
                endpoint,
                reason: diag.note,
            });
        }
    }
    Ok(())
}

/// Samples the joint values of the five functions along the tail sweep
/// toward `endpoint` and clusters them greedily (max-coordinate distance,
/// radius `eps_cluster`). Each cluster is represented by its first member,
/// so the returned values are always actual samples.
pub fn estimate_fiber_points(
    set: &CoefficientSet,
    endpoint: Endpoint,
    cfg: &FiberConfig,
) -> Result<Vec<FiberPoint>, SoError> {
    if !(cfg.eps_cluster > 0.0) || cfg.samples < 8 || !(cfg.sigma > 0.0) {
        return Err(SoError::Parameter("fiber config must have eps > 0, sigma > 0, N >= 8"));
    }
    require_so(set, endpoint)?;
    let sweep = cfg.sweep(endpoint);
    let limits: Option<Vec<Complex64>> = set.as_array().iter().map(|f| f.exact_limit(endpoint)).collect();
    if let Some(l) = limits {
        return Ok(vec![FiberPoint {
            endpoint,
            values: FiberValues { a: l[0], b: l[1], c: l[2], d: l[3], omega: l[4].re },
            source_log_t: sweep,
            cluster_radius: 0.0,
            exact: true,
        }]);
    }
    let mut clusters: Vec<FiberPoint> = Vec::new();
    for &u in &sweep {
        let v = tuple_at(set, endpoint, u)?;
        match clusters.iter_mut().find(|c| c.values.distance(&v) <= cfg.eps_cluster) {
            Some(c) => {
                c.cluster_radius = c.cluster_radius.max(c.values.distance(&v));
                c.source_log_t.push(u);
            }
            None => clusters.push(FiberPoint {
                endpoint,
                values: v,
                source_log_t: vec![u],
                cluster_radius: 0.0,
                exact: false,
            }),
        }
    }
    Ok(clusters)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(src: &str) -> SoFunction {
        SoFunction::parse("f", src).unwrap()
    }

    #[test]
    fn modulus_of_constant_is_zero() {
        assert_eq!(oscillation_modulus(&f("7"), 0.3, 5.0).unwrap(), 0.0);
    }

    fn dense_diameter_of_sin(lo: f64, hi: f64) -> f64 {
        let (mut mn, mut mx) = (f64::INFINITY, f64::NEG_INFINITY);
        for k in 0..=20000 {
            let s = (lo + (hi - lo) * k as f64 / 20000.0).sin();
            mn = mn.min(s);
            mx = mx.max(s);
        }
        mx - mn
    }

    #[test]
    fn modulus_of_sin_log_matches_dense_oracle() {
        let g = f("sin(log(t))");
        for &u in &[10.0, 1000.0, 1001.3, -50.0] {
            let want = dense_diameter_of_sin(u - 2f64.ln(), u);
            let m = oscillation_modulus(&g, 0.5, u).unwrap();
            assert!((m - want).abs() < 1e-4, "u={u}: {m} vs {want}");
        }
        // no decay: the sup over far radii stays of order one
        let far = (0..8).map(|k| oscillation_modulus(&g, 0.5, 1000.0 + k as f64).unwrap());
        assert!(far.fold(0.0, f64::max) > 0.5);
    }

    #[test]
    fn modulus_of_sin_log_log_shrinks() {
        let g = f("sin(log(log(t)))").with_domain(std::f64::consts::E, f64::INFINITY);
        let at10 = oscillation_modulus(&g, 0.5, 10f64.exp()).unwrap();
        assert!(at10 <= 2f64.ln() / 10f64.exp() * 1.0001 + 1e-12, "{at10}");
        let at20 = oscillation_modulus(&g, 0.5, 20f64.exp()).unwrap();
        assert!(at20 < at10 || at20 < 1e-8);
        // the example of a huge radius r = exp(exp(10))
        let near = oscillation_modulus(&g, 0.5, 10f64.exp() + 0.0).unwrap();
        assert!(near < 0.07);
    }

    #[test]
    fn so_test_verdicts() {
        let c = verify_so_default(&f("3"), Endpoint::Zero).unwrap();
        assert!(c.accepted && c.trace.iter().all(|p| p.1 == 0.0));
        for e in Endpoint::BOTH {
            assert!(!verify_so_default(&f("sin(log(t))"), e).unwrap().accepted);
            assert!(verify_so_default(&f("atan(log(t))"), e).unwrap().accepted);
        }
        let g = f("2+sin(log(log(t)))").with_domain(std::f64::consts::E, f64::INFINITY);
        assert!(verify_so_default(&g, Endpoint::Infinity).unwrap().accepted);
        assert!(matches!(
            verify_so_default(&g, Endpoint::Zero),
            Err(SoError::EndpointUnsupported { .. })
        ));
        let g = g.with_limit(Endpoint::Zero, Complex64::new(2.0, 0.0));
        assert!(verify_so_default(&g, Endpoint::Zero).unwrap().accepted);
    }

    #[test]
    fn constant_fiber_is_single_exact_point() {
        let set = CoefficientSet::constants(
            Complex64::new(2.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(2.0, 0.0),
            Complex64::new(1.0, 0.0),
            1.0,
        );
        for e in Endpoint::BOTH {
            let fps = estimate_fiber_points(&set, e, &FiberConfig::default()).unwrap();
            assert_eq!(fps.len(), 1);
            assert!(fps[0].exact);
            assert_eq!(fps[0].values.a, Complex64::new(2.0, 0.0));
            assert_eq!(fps[0].values.omega, 1.0);
        }
    }

    #[test]
    fn rejects_non_so_coefficient() {
        let mut set = CoefficientSet::constants(
            Complex64::new(2.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(2.0, 0.0),
            Complex64::new(1.0, 0.0),
            1.0,
        );
        set.a = SoFunction::parse("a", "2 + sin(log(t))").unwrap();
        assert!(matches!(
            estimate_fiber_points(&set, Endpoint::Infinity, &FiberConfig::default()),
            Err(SoError::NotSlowlyOscillating { .. })
        ));
    }
}

//! Fredholm criterion for `N = (a I - b W_alpha) P_+ + (c I - d W_alpha) P_-`:
//! the fiber symbol `n_xi(x)`, its analytic tail bounds, the two conditions
//! and the combined verdict.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

use crate::funcops::{BinomialOp, FuncopsConfig, FuncopsError, InvertibilityReport, Verdict};
use crate::grid::{GridError, LogGridFunction};
use crate::mellin::{apply_projection, coth, MellinError, MellinSymbol, Route};
use crate::shift::{ShiftError, SosShift};
use crate::so::{estimate_fiber_points, CoefficientSet, Endpoint, FiberPoint, FiberValues, SoError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FredholmError {
    #[error("instance invalid: {0}")]
    So(#[from] SoError),
    #[error("instance invalid: {0}")]
    Shift(#[from] ShiftError),
    #[error(transparent)]
    Funcops(#[from] FuncopsError),
    #[error(transparent)]
    Mellin(#[from] MellinError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("invalid parameter: {0}")]
    Parameter(&'static str),
}

/// `[a - b e^{i omega (x+i/p)}] (1 + s_p)/2 + [c - d e^{i omega (x+i/p)}] (1 - s_p)/2`.
pub fn symbol_n(v: &FiberValues, p: f64, x: f64) -> Complex64 {
    let z = Complex64::new(x, 1.0 / p);
    let e = (Complex64::new(0.0, v.omega) * z).exp();
    let s = coth(PI * z);
    (v.a - v.b * e) * (1.0 + s) * 0.5 + (v.c - v.d * e) * (1.0 - s) * 0.5
}

/// Lower bounds for `|n_xi(x)|` on `x >= X` (plus) and `x <= -X` (minus).
pub fn symbol_tail_bound(v: &FiberValues, p: f64, x_max: f64) -> (f64, f64) {
    let damp = (-v.omega / p).exp();
    let circle = |a: Complex64, b: Complex64| {
        if v.omega == 0.0 {
            (a - b).norm()
        } else {
            (a.norm() - b.norm() * damp).abs()
        }
    };
    let c = 2.0 * (v.a.norm() + v.b.norm() * damp + v.c.norm() + v.d.norm() * damp);
    let corr = c * (-2.0 * PI * x_max).exp();
    (circle(v.a, v.b) - corr, circle(v.c, v.d) - corr)
}

/// Bound on `|n_xi'(x)|` over the real line.
pub fn symbol_lipschitz(v: &FiberValues, p: f64) -> f64 {
    let damp = (-v.omega / p).exp();
    let sin = (PI / p).sin();
    // n' = A'(1+s)/2 + B'(1-s)/2 + (A-B)s'/2 with |s'| <= pi / sin^2(pi/p)
    let diff = (v.a - v.c).norm() + (v.b - v.d).norm() * damp;
    let da = v.omega.abs() * v.b.norm() * damp;
    let db = v.omega.abs() * v.d.norm() * damp;
    (da + db) * (1.0 + 1.0 / sin) / 2.0 + diff * PI / (2.0 * sin * sin)
}

/// A symbol as a [`MellinSymbol`].
pub fn symbol_n_mellin(v: FiberValues, p: f64) -> MellinSymbol {
    MellinSymbol::function("n_xi", move |x| symbol_n(&v, p, x))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FredholmConfig {
    pub funcops: FuncopsConfig,
    /// Half-width `X` of the symbol grid.
    pub x_max: f64,
    /// Initial symbol grid step; halved until the grid error is below `tol/10`.
    pub delta: f64,
    /// `|n| <= zero_tol` on an exact fiber counts as a zero.
    pub zero_tol: f64,
}

impl Default for FredholmConfig {
    fn default() -> Self {
        FredholmConfig { funcops: FuncopsConfig::default(), x_max: 8.0, delta: 1.0 / 256.0, zero_tol: 1e-9 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

/// Where the minimum of `|n_xi|` over the line is attained.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WitnessLocation {
    At(f64),
    TailPlus,
    TailMinus,
}

impl fmt::Display for WitnessLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WitnessLocation::At(x) => write!(f, "x = {x:.17e}"),
            WitnessLocation::TailPlus => f.write_str("x -> +inf"),
            WitnessLocation::TailMinus => f.write_str("x -> -inf"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FiberMinimum {
    pub fiber: FiberPoint,
    /// Index within the endpoint's fiber list.
    pub index: usize,
    pub grid_min: f64,
    pub grid_argmin: f64,
    pub tail: (f64, f64),
    pub margin: f64,
    pub location: WitnessLocation,
    pub delta: f64,
    pub status: Status,
}

impl FiberMinimum {
    pub fn id(&self) -> String {
        format!("{}:{}", self.fiber.endpoint, self.index)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionIIReport {
    pub fibers: Vec<FiberMinimum>,
    pub margin: f64,
    /// Index into `fibers` of the smallest margin.
    pub witness: usize,
    pub status: Status,
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..90 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Minimum of `|n_xi|` over the line for one fiber point.
pub fn fiber_minimum(fp: &FiberPoint, index: usize, p: f64, cfg: &FredholmConfig) -> FiberMinimum {
    let v = &fp.values;
    let tol = cfg.funcops.tol;
    let lip = symbol_lipschitz(v, p);
    let target = tol / 10.0;
    let eval = |x: f64| symbol_n(v, p, x).norm();
    let steps = (2.0 * cfg.x_max / cfg.delta).round() as i64;
    let x_at = |k: i64| -cfg.x_max + k as f64 * cfg.delta;
    let vals: Vec<f64> = (0..=steps).map(|k| eval(x_at(k))).collect();
    let (mut gmin, mut gargmin) = (f64::INFINITY, 0.0);
    for (k, &m) in vals.iter().enumerate() {
        if m < gmin {
            gmin = m;
            gargmin = x_at(k as i64);
        }
    }
    // bisect the cells whose Lipschitz lower bound could still undercut the
    // running minimum, until each survivor is resolved to `target`
    let mut stack: Vec<(f64, f64, f64, f64)> =
        (0..steps).map(|k| (x_at(k), vals[k as usize], x_at(k + 1), vals[k as usize + 1])).collect();
    let mut leaves = Vec::new();
    let mut delta = cfg.delta;
    while let Some((a, va, b, vb)) = stack.pop() {
        let w = b - a;
        if 0.5 * (va + vb) - lip * w / 2.0 > gmin {
            continue;
        }
        if lip * w / 2.0 < target || w < 1e-9 {
            leaves.push((a, va, b, vb));
            continue;
        }
        let m = 0.5 * (a + b);
        let vm = eval(m);
        if vm < gmin {
            gmin = vm;
            gargmin = m;
        }
        delta = delta.min(w / 2.0);
        stack.push((a, va, m, vm));
        stack.push((m, vm, b, vb));
    }
    leaves.retain(|&(a, va, b, vb)| 0.5 * (va + vb) - lip * (b - a) / 2.0 <= gmin);
    leaves.sort_by(|x, y| x.1.min(x.3).total_cmp(&y.1.min(y.3)));
    let mut best = (gargmin, gmin);
    for &(a, _, b, _) in leaves.iter().take(64) {
        let w = b - a;
        let r = golden_min(eval, (a - w).max(-cfg.x_max), (b + w).min(cfg.x_max));
        if r.1 < best.1 {
            best = r;
        }
    }
    let tail = symbol_tail_bound(v, p, cfg.x_max);
    let (margin, location) = [
        (best.1, WitnessLocation::At(best.0)),
        (tail.0, WitnessLocation::TailPlus),
        (tail.1, WitnessLocation::TailMinus),
    ]
    .into_iter()
    .fold((f64::INFINITY, WitnessLocation::At(0.0)), |acc, c| if c.0 < acc.0 { c } else { acc });
    // an actual zero on the line is a better witness than a tail bound
    let (margin, location) = if best.1 <= cfg.zero_tol { (best.1, WitnessLocation::At(best.0)) } else { (margin, location) };
    let status = if margin > tol {
        Status::Pass
    } else if fp.exact && margin <= cfg.zero_tol {
        Status::Fail
    } else {
        Status::Inconclusive
    };
    FiberMinimum {
        fiber: fp.clone(),
        index,
        grid_min: gmin,
        grid_argmin: gargmin,
        tail,
        margin,
        location,
        delta,
        status,
    }
}

/// Condition on the symbols over the sampled fiber points of both endpoints.
pub fn check_condition_ii(fibers: &[FiberPoint], p: f64, cfg: &FredholmConfig) -> Result<ConditionIIReport, FredholmError> {
    for e in Endpoint::BOTH {
        if !fibers.iter().any(|f| f.endpoint == e) {
            return Err(FredholmError::Parameter("fiber points must cover both endpoints"));
        }
    }
    let mut counters = [0usize; 2];
    let mins: Vec<FiberMinimum> = fibers
        .iter()
        .map(|fp| {
            let slot = &mut counters[(fp.endpoint == Endpoint::Infinity) as usize];
            let m = fiber_minimum(fp, *slot, p, cfg);
            *slot += 1;
            m
        })
        .collect();
    let witness = (0..mins.len()).fold(0, |w, k| if mins[k].margin < mins[w].margin { k } else { w });
    let status = if mins.iter().any(|m| m.status == Status::Fail) {
        Status::Fail
    } else if mins.iter().all(|m| m.status == Status::Pass) {
        Status::Pass
    } else {
        Status::Inconclusive
    };
    Ok(ConditionIIReport { margin: mins[witness].margin, witness, status, fibers: mins })
}

/// Invertibility of a symbol with almost periodic tails: grid infimum on
/// `[-X, X]` combined with the given tail infima.
pub fn sap_invertible(
    sym: &MellinSymbol,
    x_max: f64,
    delta: f64,
    tail: (f64, f64),
    tol: f64,
) -> Result<(bool, f64), FredholmError> {
    if !(delta > 0.0 && x_max > 0.0) {
        return Err(FredholmError::Parameter("symbol grid must have positive size"));
    }
    let steps = (2.0 * x_max / delta).round() as i64;
    let mut m = tail.0.min(tail.1);
    for k in 0..=steps {
        m = m.min(sym.eval(-x_max + k as f64 * delta)?.norm());
    }
    Ok((m > tol, m))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Overall {
    Fredholm,
    NotFredholm,
    Inconclusive,
}

impl fmt::Display for Overall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Overall::Fredholm => "fredholm",
            Overall::NotFredholm => "not-fredholm",
            Overall::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FredholmVerdict {
    /// Reports for `A_+ = aI - bW` and `A_- = cI - dW`.
    pub condition_i: [InvertibilityReport; 2],
    pub condition_ii: ConditionIIReport,
    pub overall: Overall,
}

impl FredholmVerdict {
    /// Number of sampled fiber points per endpoint `(zero, infinity)`.
    pub fn coverage(&self) -> (usize, usize) {
        let n = |e| self.condition_ii.fibers.iter().filter(|m| m.fiber.endpoint == e).count();
        (n(Endpoint::Zero), n(Endpoint::Infinity))
    }
}

/// `N = (aI - bW_alpha)P_+ + (cI - dW_alpha)P_-` on `L^p(R_+)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftedSio {
    pub coeffs: CoefficientSet,
    pub shift: SosShift,
    pub p: f64,
    plus: BinomialOp,
    minus: BinomialOp,
}

impl ShiftedSio {
    pub fn new(coeffs: CoefficientSet, p: f64, shift_tail_tol: f64) -> Result<Self, FredholmError> {
        let shift = SosShift::new(coeffs.omega.clone(), shift_tail_tol)?;
        let plus = BinomialOp::new(coeffs.a.clone(), coeffs.b.clone(), shift.clone(), p)?;
        let minus = BinomialOp::new(coeffs.c.clone(), coeffs.d.clone(), shift.clone(), p)?;
        Ok(ShiftedSio { coeffs, shift, p, plus, minus })
    }

    /// `A_+ = aI - bW_alpha`.
    pub fn plus(&self) -> &BinomialOp {
        &self.plus
    }

    /// `A_- = cI - dW_alpha`.
    pub fn minus(&self) -> &BinomialOp {
        &self.minus
    }

    /// Sampled fiber points over both endpoints.
    pub fn fiber_points(&self, cfg: &FredholmConfig) -> Result<Vec<FiberPoint>, FredholmError> {
        let mut out = Vec::new();
        for e in Endpoint::BOTH {
            out.extend(estimate_fiber_points(&self.coeffs, e, &cfg.funcops.fiber)?);
        }
        Ok(out)
    }

    /// `N f` on `f`'s grid; `f`, `P_+ f` and `P_- f` count as zero beyond it.
    pub fn apply(&self, f: &LogGridFunction, route: Route) -> Result<LogGridFunction, FredholmError> {
        let pp = apply_projection(f, self.p, 1.0, route)?;
        let pm = apply_projection(f, self.p, -1.0, route)?;
        let a = self.plus.apply_truncated(&pp)?;
        let b = self.minus.apply_truncated(&pm)?;
        Ok(a.add(&b)?)
    }

    /// Runs both conditions and combines them.
    pub fn fredholm_check(&self, cfg: &FredholmConfig) -> Result<FredholmVerdict, FredholmError> {
        if let Some(u) = self.shift.bounds().interior_fixed_points.first() {
            return Err(ShiftError::Invariant(format!(
                "alpha has a fixed point near t = exp({u:.6}) on the probe grid"
            ))
            .into());
        }
        let fibers = self.fiber_points(cfg)?;
        let plus = self.plus.check_invertibility(&cfg.funcops)?;
        let minus = self.minus.check_invertibility(&cfg.funcops)?;
        let cond2 = check_condition_ii(&fibers, self.p, cfg)?;
        let verdicts = [plus.verdict, minus.verdict];
        let overall = if verdicts.contains(&Verdict::NotInvertible) || cond2.status == Status::Fail {
            Overall::NotFredholm
        } else if verdicts.iter().all(|v| matches!(v, Verdict::Invertible(_))) && cond2.status == Status::Pass {
            Overall::Fredholm
        } else {
            Overall::Inconclusive
        };
        Ok(FredholmVerdict { condition_i: [plus, minus], condition_ii: cond2, overall })
    }

    /// CSV rows `fiber_id,x,re,im,abs` for every fiber point and every
    /// node of the symbol grid `[-X, X]` with step `delta`.
    pub fn symbol_dump(&self, cfg: &FredholmConfig) -> Result<String, FredholmError> {
        let fibers = self.fiber_points(cfg)?;
        let steps = (2.0 * cfg.x_max / cfg.delta).round() as i64;
        let mut out = String::from("fiber_id,x,re,im,abs\n");
        let mut counters = [0usize; 2];
        for fp in &fibers {
            let slot = &mut counters[(fp.endpoint == Endpoint::Infinity) as usize];
            let id = format!("{}:{}", fp.endpoint, *slot);
            *slot += 1;
            for k in 0..=steps {
                let x = -cfg.x_max + k as f64 * cfg.delta;
                let n = symbol_n(&fp.values, self.p, x);
                out.push_str(&format!("{id},{x:.17e},{:.17e},{:.17e},{:.17e}\n", n.re, n.im, n.norm()));
            }
        }
        Ok(out)
    }
}

//! Binomial functional operators `A = a I - b W_alpha` on `L^p(R_+)`:
//! the quantities `L_*`, `L^*`, the invertibility decision, and the inverse
//! as a truncated Neumann series.

use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

use crate::grid::{GridError, LogGrid, LogGridFunction};
use crate::shift::{apply_at, probe_range, ShiftError, SosShift};
use crate::so::{estimate_fiber_points, CoefficientSet, Endpoint, FiberConfig, SoError, SoFunction};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FuncopsError {
    #[error(transparent)]
    So(#[from] SoError),
    #[error(transparent)]
    Shift(#[from] ShiftError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("p must lie in (1, inf), got {0}")]
    Exponent(f64),
    #[error("coefficient `{0}` must be defined on all of R_+")]
    Domain(String),
    #[error("operator is not known to be invertible ({0})")]
    NotInvertible(Verdict),
    #[error("Neumann term {term} reaches the grid edge before the error budget is met")]
    GridExhaustion { term: usize },
    #[error("error budget not met after {terms} terms (tail bound {bound:e})")]
    BudgetUnmet { terms: usize, bound: f64 },
}

/// Decision parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FuncopsConfig {
    /// Margin threshold for sampled data.
    pub tol: f64,
    /// Threshold for data given exactly (constants and asserted limits).
    pub exact_tol: f64,
    pub fiber: FiberConfig,
    pub max_terms: usize,
}

impl Default for FuncopsConfig {
    fn default() -> Self {
        FuncopsConfig { tol: 1e-3, exact_tol: 1e-12, fiber: FiberConfig::default(), max_terms: 10_000 }
    }
}

/// `a I - b W_alpha` on `L^p(R_+)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BinomialOp {
    pub a: SoFunction,
    pub b: SoFunction,
    pub shift: SosShift,
    pub p: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Liminf,
    Limsup,
}

/// Estimate of `L_*(s)` or `L^*(s)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LEstimate {
    /// Tail estimate, or the exact value when `exact`.
    pub value: f64,
    /// Extremum over the sampled fiber points of `|a| - |b| e^{-omega/p}`.
    pub fiber: f64,
    /// Last-half and last-quarter tail extrema agree within tolerance.
    pub stable: bool,
    pub exact: bool,
}

/// A margin together with how it was obtained.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Margin {
    pub value: f64,
    pub exact: bool,
    pub stable: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Margins {
    pub inf_abs_a: Margin,
    pub inf_abs_b: Margin,
    /// `L_*` at `0` and at infinity.
    pub lower: [Margin; 2],
    /// `L^*` at `0` and at infinity.
    pub upper: [Margin; 2],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    /// `inf|a| > 0`, `L_* > 0` at both endpoints.
    First,
    /// `inf|b| > 0`, `L^* < 0` at both endpoints.
    Second,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Invertible(Branch),
    NotInvertible,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Invertible(Branch::First) => "invertible (first branch)",
            Verdict::Invertible(Branch::Second) => "invertible (second branch)",
            Verdict::NotInvertible => "not invertible",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// Bound `||T^n|| <= constant * q^n` for the Neumann operator `T`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Contraction {
    pub q: f64,
    pub constant: f64,
    /// Number of factors after which the sampled product first drops below 1.
    pub block: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InvertibilityReport {
    pub verdict: Verdict,
    pub margins: Margins,
    pub contraction: Option<Contraction>,
    pub notes: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Tri {
    Pass,
    Fail,
    Unknown,
}

/// Tri-state test of `sign * m.value > 0`.
fn decide(m: &Margin, sign: f64, cfg: &FuncopsConfig) -> Tri {
    let v = sign * m.value;
    if m.exact {
        if v > cfg.exact_tol {
            Tri::Pass
        } else {
            Tri::Fail
        }
    } else if !m.stable {
        Tri::Unknown
    } else if v > cfg.tol {
        Tri::Pass
    } else if v < -cfg.tol {
        Tri::Fail
    } else {
        Tri::Unknown
    }
}

fn all(ts: &[Tri]) -> Tri {
    if ts.contains(&Tri::Fail) {
        Tri::Fail
    } else if ts.iter().all(|t| *t == Tri::Pass) {
        Tri::Pass
    } else {
        Tri::Unknown
    }
}

/// Points used for suprema and infima over `R_+`: the probe grid of the
/// shift plus the fiber sweeps toward both endpoints.
fn sup_points(op: &BinomialOp, cfg: &FuncopsConfig, probe: usize) -> Vec<f64> {
    let (lo, hi) = probe_range(op.shift.omega());
    let mut pts: Vec<f64> = (0..probe).map(|k| lo + (hi - lo) * k as f64 / (probe - 1) as f64).collect();
    for e in Endpoint::BOTH {
        pts.extend(cfg.fiber.sweep(e).into_iter().step_by(4));
    }
    pts
}

impl BinomialOp {
    pub fn new(a: SoFunction, b: SoFunction, shift: SosShift, p: f64) -> Result<Self, FuncopsError> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(FuncopsError::Exponent(p));
        }
        for f in [&a, &b] {
            if !(f.reaches(Endpoint::Zero) && f.reaches(Endpoint::Infinity)) {
                return Err(FuncopsError::Domain(f.name().to_string()));
            }
        }
        Ok(BinomialOp { a, b, shift, p })
    }

    fn as_set(&self) -> CoefficientSet {
        // fiber estimation works on full coefficient tuples; the second
        // pair simply repeats the first
        CoefficientSet {
            a: self.a.clone(),
            b: self.b.clone(),
            c: self.a.clone(),
            d: self.b.clone(),
            omega: self.shift.omega().clone(),
        }
    }

    fn omega_limit(&self, s: Endpoint) -> Option<f64> {
        self.shift.omega().exact_limit(s).map(|w| w.re)
    }

    /// `|a| - |b| alpha'^{-1/p}` at `t = exp(u)` on the way to `s`.
    fn g_toward(&self, s: Endpoint, u: f64) -> Result<f64, FuncopsError> {
        let a = self.a.eval_toward(s, u)?.norm();
        let b = self.b.eval_toward(s, u)?.norm();
        let ap = if self.shift.is_multiplicative() {
            self.omega_limit(s).unwrap_or(0.0).exp()
        } else {
            self.shift.alpha_prime_log(u)?
        };
        Ok(a - b * ap.powf(-1.0 / self.p))
    }

    /// `L_*(s)` (liminf) or `L^*(s)` (limsup) of `|a| - |b| alpha'^{-1/p}`.
    pub fn l_star(&self, s: Endpoint, mode: Mode, cfg: &FuncopsConfig) -> Result<LEstimate, FuncopsError> {
        let fibers = estimate_fiber_points(&self.as_set(), s, &cfg.fiber)?;
        let fiber_vals = fibers
            .iter()
            .map(|fp| fp.values.a.norm() - fp.values.b.norm() * (-fp.values.omega / self.p).exp());
        let fiber = match mode {
            Mode::Liminf => fiber_vals.fold(f64::INFINITY, f64::min),
            Mode::Limsup => fiber_vals.fold(f64::NEG_INFINITY, f64::max),
        };
        let exact = [self.a.exact_limit(s), self.b.exact_limit(s)].iter().all(Option::is_some)
            && self.omega_limit(s).is_some();
        if exact {
            let (a, b, w) = (
                self.a.exact_limit(s).unwrap().norm(),
                self.b.exact_limit(s).unwrap().norm(),
                self.omega_limit(s).unwrap(),
            );
            let value = a - b * (-w / self.p).exp();
            return Ok(LEstimate { value, fiber: value, stable: true, exact: true });
        }
        let sweep = cfg.fiber.sweep(s);
        let g = sweep.iter().map(|&u| self.g_toward(s, u)).collect::<Result<Vec<_>, _>>()?;
        let ext = |xs: &[f64]| match mode {
            Mode::Liminf => xs.iter().copied().fold(f64::INFINITY, f64::min),
            Mode::Limsup => xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        };
        let n = g.len();
        let quarter = ext(&g[n - n / 4..]);
        let half = ext(&g[n - n / 2..]);
        let stable = (quarter - half).abs() <= cfg.tol;
        if !stable {
            log::warn!("{} at {s}: tail extremum not stabilized ({quarter:.4e} vs {half:.4e})", self.a.name());
        }
        Ok(LEstimate { value: quarter, fiber, stable, exact: false })
    }

    fn inf_abs(&self, f: &SoFunction, cfg: &FuncopsConfig) -> Result<Margin, FuncopsError> {
        if f.is_constant() {
            let v = f.exact_limit(Endpoint::Zero).map(|z| z.norm()).unwrap_or(0.0);
            return Ok(Margin { value: v, exact: true, stable: true });
        }
        let mut min = f64::INFINITY;
        let mut prev: Option<Complex64> = None;
        let (lo, hi) = probe_range(self.shift.omega());
        let probe = 10_000;
        let mut vals = Vec::with_capacity(probe);
        for k in 0..probe {
            vals.push(f.eval_log(lo + (hi - lo) * k as f64 / (probe - 1) as f64)?);
        }
        for e in Endpoint::BOTH {
            // tails, nearest first, attached on the matching side
            let tail: Vec<Complex64> =
                cfg.fiber.sweep(e).iter().map(|&u| f.eval_toward(e, u)).collect::<Result<_, _>>()?;
            match e {
                Endpoint::Zero => {
                    let mut t = tail;
                    t.reverse();
                    t.extend(vals);
                    vals = t;
                }
                Endpoint::Infinity => vals.extend(tail),
            }
        }
        for v in vals {
            if let Some(pv) = prev {
                if v.im == 0.0 && pv.im == 0.0 && v.re * pv.re <= 0.0 {
                    return Ok(Margin { value: 0.0, exact: true, stable: true });
                }
            }
            min = min.min(v.norm());
            prev = Some(v);
        }
        for e in Endpoint::BOTH {
            if let Some(l) = f.exact_limit(e) {
                min = min.min(l.norm());
            }
        }
        Ok(Margin { value: min, exact: false, stable: true })
    }

    /// Decision between the two branches of the invertibility criterion.
    pub fn check_invertibility(&self, cfg: &FuncopsConfig) -> Result<InvertibilityReport, FuncopsError> {
        let mut notes = Vec::new();
        let mk = |e: LEstimate| Margin { value: e.value, exact: e.exact, stable: e.stable };
        let mut lower = [Margin { value: 0.0, exact: false, stable: false }; 2];
        let mut upper = lower;
        for (i, s) in Endpoint::BOTH.into_iter().enumerate() {
            let lo = self.l_star(s, Mode::Liminf, cfg)?;
            let up = self.l_star(s, Mode::Limsup, cfg)?;
            for (name, e) in [("L_*", lo), ("L^*", up)] {
                if !e.stable {
                    notes.push(format!("{name}({s}) tail not stabilized"));
                }
                if !e.exact && (e.value - e.fiber).abs() > cfg.fiber.eps_cluster * 4.0 {
                    notes.push(format!("{name}({s}) tail {:.4e} differs from fiber value {:.4e}", e.value, e.fiber));
                }
            }
            lower[i] = mk(lo);
            upper[i] = mk(up);
        }
        let margins =
            Margins { inf_abs_a: self.inf_abs(&self.a, cfg)?, inf_abs_b: self.inf_abs(&self.b, cfg)?, lower, upper };
        let first = all(&[
            decide(&margins.inf_abs_a, 1.0, cfg),
            decide(&margins.lower[0], 1.0, cfg),
            decide(&margins.lower[1], 1.0, cfg),
        ]);
        let second = all(&[
            decide(&margins.inf_abs_b, 1.0, cfg),
            decide(&margins.upper[0], -1.0, cfg),
            decide(&margins.upper[1], -1.0, cfg),
        ]);
        let mut verdict = match (first, second) {
            (Tri::Pass, _) => Verdict::Invertible(Branch::First),
            (_, Tri::Pass) => Verdict::Invertible(Branch::Second),
            (Tri::Fail, Tri::Fail) => Verdict::NotInvertible,
            _ => Verdict::Inconclusive,
        };
        let mut contraction = None;
        if let Verdict::Invertible(branch) = verdict {
            contraction = self.contraction(branch, cfg)?;
            if contraction.is_none() {
                notes.push("no contracting block of at most 64 factors found on the probe points".into());
                verdict = Verdict::Inconclusive;
            }
        }
        Ok(InvertibilityReport { verdict, margins, contraction, notes })
    }

    /// Weight of one factor of the Neumann operator at `log t = u`.
    fn weight(&self, branch: Branch, u: f64) -> Result<f64, FuncopsError> {
        let a = self.a.eval_log(u)?.norm();
        let b = self.b.eval_log(u)?.norm();
        Ok(match branch {
            Branch::First => b / a * self.shift.alpha_prime_log(u)?.powf(-1.0 / self.p),
            Branch::Second => {
                let ub = self.shift.log_beta(u)?;
                a / b * self.shift.alpha_prime_log(ub)?.powf(1.0 / self.p)
            }
        })
    }

    fn step(&self, branch: Branch, u: f64) -> Result<f64, FuncopsError> {
        Ok(match branch {
            Branch::First => self.shift.log_alpha(u)?,
            Branch::Second => self.shift.log_beta(u)?,
        })
    }

    /// `sup_t prod_{k < n} w(alpha_k(t))` for `n` up to 64 on the probe
    /// points; the first `n` with product below one gives the bound.
    pub fn contraction(&self, branch: Branch, cfg: &FuncopsConfig) -> Result<Option<Contraction>, FuncopsError> {
        const MAX_BLOCK: usize = 64;
        let pts = sup_points(self, cfg, 2001);
        let mut rho = vec![0.0f64; MAX_BLOCK + 1];
        rho[0] = 1.0;
        for &u0 in &pts {
            let mut u = u0;
            let mut prod = 1.0;
            for r in rho.iter_mut().skip(1) {
                prod *= self.weight(branch, u)?;
                *r = r.max(prod);
                if prod == 0.0 {
                    break;
                }
                u = self.step(branch, u)?;
            }
        }
        let Some(block) = (1..=MAX_BLOCK).find(|&n| rho[n] < 1.0 - 1e-9) else {
            return Ok(None);
        };
        let q = rho[block].powf(1.0 / block as f64);
        let constant = if q == 0.0 {
            1.0
        } else {
            (0..block).map(|j| rho[j] / q.powi(j as i32)).fold(1.0, f64::max)
        };
        Ok(Some(Contraction { q, constant, block }))
    }

    fn sample(&self, f: &SoFunction, grid: &LogGrid) -> Result<Vec<Complex64>, FuncopsError> {
        grid.xs().map(|x| f.eval_log(x).map_err(FuncopsError::from)).collect()
    }

    /// `(a I - b W_alpha) f` on `f`'s grid.
    pub fn apply(&self, f: &LogGridFunction) -> Result<LogGridFunction, FuncopsError> {
        let a = self.sample(&self.a, f.grid())?;
        let b = self.sample(&self.b, f.grid())?;
        let w = self.shift.apply(f)?;
        let values = (0..a.len()).map(|j| a[j] * f.values()[j] - b[j] * w.values()[j]).collect();
        Ok(LogGridFunction::new(*f.grid(), values)?)
    }

    /// [`apply`](Self::apply) with `f` taken as zero beyond its grid.
    pub fn apply_truncated(&self, f: &LogGridFunction) -> Result<LogGridFunction, FuncopsError> {
        let a = self.sample(&self.a, f.grid())?;
        let b = self.sample(&self.b, f.grid())?;
        let w = self.shift.apply_truncated(f)?;
        let values = (0..a.len()).map(|j| a[j] * f.values()[j] - b[j] * w.values()[j]).collect();
        Ok(LogGridFunction::new(*f.grid(), values)?)
    }

    fn sup_abs(&self, f: &SoFunction, cfg: &FuncopsConfig) -> Result<f64, FuncopsError> {
        let mut m: f64 = 0.0;
        for u in sup_points(self, cfg, 2001) {
            m = m.max(f.eval_log(u)?.norm());
        }
        Ok(m)
    }

    /// `A^{-1} f` by the Neumann series of the branch in `report`, truncated
    /// once the tail bound guarantees both `||A^{-1} f - result||_p` and the
    /// residual `||A result - f||_p` are within `budget`.
    pub fn apply_inverse(
        &self,
        report: &InvertibilityReport,
        f: &LogGridFunction,
        budget: f64,
        cfg: &FuncopsConfig,
    ) -> Result<NeumannResult, FuncopsError> {
        let (Verdict::Invertible(branch), Some(c)) = (report.verdict, report.contraction) else {
            return Err(FuncopsError::NotInvertible(report.verdict));
        };
        let grid = *f.grid();
        let a = self.sample(&self.a, &grid)?;
        let b = self.sample(&self.b, &grid)?;
        let (div, ratio, targets): (&[Complex64], Vec<Complex64>, Vec<f64>) = match branch {
            Branch::First => (
                &a,
                (0..a.len()).map(|j| b[j] / a[j]).collect(),
                grid.xs().map(|x| self.shift.log_alpha(x)).collect::<Result<_, _>>()?,
            ),
            Branch::Second => (
                &b,
                (0..a.len()).map(|j| a[j] / b[j]).collect(),
                grid.xs().map(|x| self.shift.log_beta(x)).collect::<Result<_, _>>()?,
            ),
        };
        let g = LogGridFunction::new(grid, (0..a.len()).map(|j| f.values()[j] / div[j]).collect())?;
        let gnorm = g.norm_lp(self.p);
        let factor = match branch {
            Branch::First => self.sup_abs(&self.a, cfg)?.max(1.0),
            Branch::Second => {
                let w_beta = self.shift.bounds().alpha_prime_max.powf(1.0 / self.p);
                self.sup_abs(&self.b, cfg)?.max(w_beta)
            }
        };
        let tail = |n: usize| c.constant * c.q.powi(n as i32) * gnorm * factor / (1.0 - c.q);
        let mut sum = g.clone();
        let mut term = g;
        let mut terms = 1;
        let edge_tol = 1e-3 * budget;
        while tail(terms) > budget {
            if terms >= cfg.max_terms {
                return Err(FuncopsError::BudgetUnmet { terms, bound: tail(terms) });
            }
            let shifted = apply_at(&term, &targets)?;
            term = LogGridFunction::new(grid, (0..ratio.len()).map(|j| ratio[j] * shifted.values()[j]).collect())?;
            let vals = term.values();
            let edge = vals[..4].iter().chain(&vals[vals.len() - 4..]).fold(0.0f64, |m, v| m.max(v.norm()));
            if edge > edge_tol {
                return Err(FuncopsError::GridExhaustion { term: terms });
            }
            sum = sum.add(&term)?;
            terms += 1;
        }
        let result = match branch {
            Branch::First => sum,
            Branch::Second => self.shift.apply_inverse(&sum)?.scale(Complex64::new(-1.0, 0.0)),
        };
        Ok(NeumannResult { value: result, terms, tail_bound: tail(terms) })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NeumannResult {
    pub value: LogGridFunction,
    pub terms: usize,
    pub tail_bound: f64,
}

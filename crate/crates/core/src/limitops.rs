//! Limit-operator experiments: dilations `V_x`, modulations `E_mu`, the
//! strong-convergence traces for shifted singular integral operators, and
//! finite-section probes.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::fredholm::{FredholmError, ShiftedSio};
use crate::grid::{log_gaussian, GridError, LogGrid, LogGridFunction};
use crate::mellin::{apply_s, mellin_transform, symbol_sp, symbol_sp_derivative, MellinError, Route};
use crate::so::{CoefficientSet, FiberPoint, FiberValues, SoError, SoFunction};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LimitError {
    #[error(transparent)]
    Fredholm(#[from] FredholmError),
    #[error(transparent)]
    Mellin(#[from] MellinError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    So(#[from] SoError),
    #[error("dilation by exp({0}) leaves the representable range")]
    Overflow(f64),
    #[error("test function {id} is not band-limited on this grid (spectrum reaches {reach:.3} of Nyquist)")]
    NotBandLimited { id: usize, reach: f64 },
    #[error("finite section of size {size} exceeds the cap {cap}")]
    SizeCap { size: usize, cap: usize },
    #[error("parameter sequence is not monotone at index {0}")]
    NotMonotone(usize),
}

/// `(V_x f)(t) = f(t / x)`: an exact relabelling of the log grid.
pub fn apply_dilation(x: f64, f: &LogGridFunction) -> Result<LogGridFunction, LimitError> {
    let dx = x.ln();
    if !dx.is_finite() || !(f.grid().x0() + dx).is_finite() {
        return Err(LimitError::Overflow(dx));
    }
    Ok(f.dilate_log(dx))
}

/// `(E_mu f)(t) = t^{i mu} f(t)`.
pub fn apply_modulation(mu: f64, f: &LogGridFunction) -> LogGridFunction {
    f.modulate(mu)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FamilyKind {
    /// Parameters are `log x` of `V_x`.
    Dilation,
    /// Parameters are `mu` of `E_mu`.
    Modulation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PseudoisometryFamily {
    pub kind: FamilyKind,
    pub params: Vec<f64>,
}

impl PseudoisometryFamily {
    /// The sequence must move monotonically toward its endpoint.
    pub fn new(kind: FamilyKind, params: Vec<f64>) -> Result<Self, LimitError> {
        if params.len() >= 2 {
            let up = params[1] > params[0];
            for k in 1..params.len() {
                if (params[k] > params[k - 1]) != up || params[k] == params[k - 1] {
                    return Err(LimitError::NotMonotone(k));
                }
            }
        }
        Ok(PseudoisometryFamily { kind, params })
    }

    /// `(||U||, ||U^{-1}||)` on `L^p(R_+)` for every element.
    pub fn norms(&self, p: f64) -> Vec<(f64, f64)> {
        self.params
            .iter()
            .map(|&v| match self.kind {
                FamilyKind::Dilation => ((v / p).exp(), (-v / p).exp()),
                FamilyKind::Modulation => (1.0, 1.0),
            })
            .collect()
    }
}

/// One cell of a convergence trace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub n: usize,
    pub parameter: f64,
    pub test_fn: usize,
    pub discrepancy: f64,
}

/// CSV with columns `n,parameter,test_fn_id,discrepancy`.
pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut s = String::from("n,parameter,test_fn_id,discrepancy\n");
    for r in rows {
        s.push_str(&format!("{},{:.17e},{},{:.17e}\n", r.n, r.parameter, r.test_fn, r.discrepancy));
    }
    s
}

fn tuple_at(set: &CoefficientSet, u: f64) -> Result<FiberValues, SoError> {
    Ok(FiberValues {
        a: set.a.eval_log(u)?,
        b: set.b.eval_log(u)?,
        c: set.c.eval_log(u)?,
        d: set.d.eval_log(u)?,
        omega: set.omega.eval_log(u)?.re,
    })
}

/// Snaps the source sequence of `fp` to multiples of `step` (so dilations
/// are exact grid relabellings) and drops samples whose coefficient values
/// move by more than `eps / 2` under snapping.
pub fn snap_source_sequence(
    set: &CoefficientSet,
    fp: &FiberPoint,
    step: f64,
    eps: f64,
) -> Result<Vec<f64>, LimitError> {
    let mut out = Vec::with_capacity(fp.source_log_t.len());
    for &u in &fp.source_log_t {
        let snapped = (u / step).round() * step;
        if fp.exact {
            out.push(snapped);
            continue;
        }
        let before = tuple_at(set, u)?;
        let after = tuple_at(set, snapped)?;
        if before.distance(&after) <= eps / 2.0 {
            out.push(snapped);
        }
    }
    Ok(out)
}

/// Constant-coefficient operator of a fiber point.
pub fn limit_operator(fp: &FiberPoint, p: f64) -> Result<ShiftedSio, LimitError> {
    let v = fp.values;
    Ok(ShiftedSio::new(CoefficientSet::constants(v.a, v.b, v.c, v.d, v.omega), p, 1e-3)?)
}

/// `||V_h^{-1} N V_h f - N_xi f||_p` for every `log h` and test function.
/// The test functions should be normalised; they are applied on their own
/// grids, which must be wide enough for `P_+ f`, `P_- f` to be small at the
/// ends.
pub fn dilation_limit_experiment(
    op: &ShiftedSio,
    fp: &FiberPoint,
    log_h: &[f64],
    test_fns: &[LogGridFunction],
    route: Route,
) -> Result<Vec<TraceRow>, LimitError> {
    let limit = limit_operator(fp, op.p)?;
    let mut rows = Vec::with_capacity(log_h.len() * test_fns.len());
    for (id, f) in test_fns.iter().enumerate() {
        let want = limit.apply(f, route)?;
        // P_+ f and P_- f commute with dilations, so they are computed once
        let pp = crate::mellin::apply_projection(f, op.p, 1.0, route)?;
        let pm = crate::mellin::apply_projection(f, op.p, -1.0, route)?;
        for (n, &lh) in log_h.iter().enumerate() {
            let a = op.plus().apply_truncated(&pp.dilate_log(lh)).map_err(FredholmError::from)?;
            let b = op.minus().apply_truncated(&pm.dilate_log(lh)).map_err(FredholmError::from)?;
            let got = a.add(&b)?.dilate_log(-lh);
            let diff = LogGridFunction::new(*f.grid(), got.into_values())?.sub(&want)?;
            rows.push(TraceRow { n, parameter: lh, test_fn: id, discrepancy: diff.norm_lp(op.p) });
        }
    }
    Ok(rows)
}

/// Rank-three smoothing operator `K f = sum_k g_k <f, h_k>` with
/// log-Gaussian factors, the pairing taken in `L^2(dt/t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CompactKernel {
    /// `(centre, width)` of `g_k` and of `h_k`, in `log t`.
    pub factors: [((f64, f64), (f64, f64)); 3],
}

impl Default for CompactKernel {
    fn default() -> Self {
        CompactKernel {
            factors: [((0.0, 1.0), (0.5, 0.7)), ((-1.0, 0.6), (-0.8, 1.2)), ((1.5, 0.8), (1.0, 0.5))],
        }
    }
}

impl CompactKernel {
    pub fn apply(&self, f: &LogGridFunction) -> Result<LogGridFunction, LimitError> {
        let g = *f.grid();
        let mut out = LogGridFunction::zeros(g);
        for &((gc, gw), (hc, hw)) in &self.factors {
            let coef = f.inner_mu(&log_gaussian(g, hc, hw))?;
            let gk = log_gaussian(g, gc, gw);
            for (o, v) in out.values_mut().iter_mut().zip(gk.values()) {
                *o += coef * v;
            }
        }
        Ok(out)
    }
}

/// `||V_h^{-1} K V_h f||_p` for every `log h` and test function.
pub fn compact_limit_experiment(
    k: &CompactKernel,
    p: f64,
    log_h: &[f64],
    test_fns: &[LogGridFunction],
) -> Result<Vec<TraceRow>, LimitError> {
    let mut rows = Vec::new();
    for (id, f) in test_fns.iter().enumerate() {
        for (n, &lh) in log_h.iter().enumerate() {
            let out = k.apply(&f.dilate_log(lh))?.dilate_log(-lh);
            rows.push(TraceRow { n, parameter: lh, test_fn: id, discrepancy: out.norm_lp(p) });
        }
    }
    Ok(rows)
}

/// Smallest `kappa` such that the Mellin spectrum of `Phi f` outside
/// `[-kappa, kappa]` is below `1e-12` of its peak. Errors when that band
/// reaches beyond 90% of the grid's Nyquist frequency.
pub fn mellin_band(f: &LogGridFunction, p: f64, id: usize) -> Result<f64, LimitError> {
    let m = mellin_transform(&f.phi(p))?;
    let peak = m.values.iter().fold(0.0f64, |a, v| a.max(v.norm()));
    let kappa = m
        .xi
        .iter()
        .zip(&m.values)
        .filter(|(_, v)| v.norm() > 1e-12 * peak)
        .fold(0.0f64, |a, (x, _)| a.max(x.abs()));
    let nyquist = PI / f.grid().step();
    if kappa > 0.9 * nyquist {
        return Err(LimitError::NotBandLimited { id, reach: kappa / nyquist });
    }
    Ok(kappa)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModulationRow {
    pub mu: f64,
    pub test_fn: usize,
    /// `||E_mu^{-1} S E_mu f - sign(mu) f||_p / ||f||_p`.
    pub discrepancy: f64,
    /// `sup_{|x| <= kappa} |s_p(x + mu) - sign(mu)|`.
    pub symbol_gap: f64,
    /// `sup_{|x| <= kappa} |s_p'(x + mu)|`.
    pub symbol_slope: f64,
}

/// Modulation conjugates of `S` for band-limited test functions.
pub fn modulation_limit_experiment(
    p: f64,
    mus: &[f64],
    test_fns: &[LogGridFunction],
    route: Route,
) -> Result<Vec<ModulationRow>, LimitError> {
    let mut rows = Vec::new();
    for (id, f) in test_fns.iter().enumerate() {
        let kappa = mellin_band(f, p, id)?;
        let norm = f.norm_lp(p);
        for &mu in mus {
            let sign = mu.signum();
            let conj = apply_s(&f.modulate(mu), p, route)?.modulate(-mu);
            let diff = conj.zip(f, |a, b| a - sign * b)?;
            let (mut gap, mut slope) = (0.0f64, 0.0f64);
            for k in 0..=2000 {
                let x = -kappa + 2.0 * kappa * k as f64 / 2000.0 + mu;
                gap = gap.max((symbol_sp(p, x) - sign).norm());
                slope = slope.max(symbol_sp_derivative(p, x).norm());
            }
            rows.push(ModulationRow {
                mu,
                test_fn: id,
                discrepancy: diff.norm_lp(p) / norm,
                symbol_gap: gap,
                symbol_slope: slope,
            });
        }
    }
    Ok(rows)
}

/// `sup_{t in [1/2, 2]} |g(h t) - g(h)|` for each `log h`.
pub fn dilation_oscillation(g: &SoFunction, log_h: &[f64]) -> Result<Vec<f64>, LimitError> {
    log_h
        .iter()
        .map(|&u| {
            let g0 = g.eval_log(u)?;
            let mut m: f64 = 0.0;
            for k in 0..=256 {
                let s = -(2f64.ln()) + 2.0 * 2f64.ln() * k as f64 / 256.0;
                m = m.max((g.eval_log(u + s)? - g0).norm());
            }
            Ok(m)
        })
        .collect()
}

/// Largest finite section materialised by [`finite_section_probe`].
pub const SIZE_CAP: usize = 4096;

/// Matrix of `Phi A Phi^{-1}` on `grid`, built column by column from the
/// unit vectors (`p` is the exponent of `Phi`).
pub fn materialize<E>(
    apply: impl Fn(&LogGridFunction) -> Result<LogGridFunction, E>,
    grid: LogGrid,
    p: f64,
) -> Result<DMatrix<Complex64>, E>
where
    E: From<GridError>,
{
    let n = grid.len();
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = LogGridFunction::zeros(grid);
        e.values_mut()[j] = Complex64::new(1.0, 0.0);
        let col = apply(&e.phi_inv(p))?.phi(p);
        for (i, v) in col.values().iter().enumerate() {
            m[(i, j)] = *v;
        }
    }
    Ok(m)
}

/// Smallest singular value by inverse iteration on `A^* A` with LU solves.
/// Returns 0 for a numerically singular matrix.
pub fn sigma_min(a: &DMatrix<Complex64>) -> f64 {
    let n = a.nrows();
    let lu = a.clone().lu();
    let lu_adj = a.adjoint().lu();
    // fixed pseudo-random start so results are reproducible
    let mut x = nalgebra::DVector::from_fn(n, |i, _| {
        let k = i as f64 + 1.0;
        Complex64::new((k * 12.9898).sin(), (k * 78.233).cos())
    });
    x /= Complex64::new(x.norm(), 0.0);
    let mut est = f64::INFINITY;
    for _ in 0..500 {
        let Some(y) = lu_adj.solve(&x) else { return 0.0 };
        let Some(z) = lu.solve(&y) else { return 0.0 };
        let nz = z.norm();
        if !nz.is_finite() || nz == 0.0 {
            return 0.0;
        }
        x = z / Complex64::new(nz, 0.0);
        let next = (a * &x).norm();
        if (est - next).abs() <= 1e-12 * next {
            return next;
        }
        est = next;
    }
    est
}

/// All singular values, largest first.
pub fn singular_values(a: &DMatrix<Complex64>) -> Vec<f64> {
    let mut s: Vec<f64> = a.clone().singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// `sigma_min` of `Phi A Phi^{-1}` on centred grids of step `step` and the
/// given sizes.
pub fn finite_section_probe<E>(
    apply: impl Fn(&LogGridFunction) -> Result<LogGridFunction, E>,
    step: f64,
    sizes: &[usize],
    p: f64,
) -> Result<Vec<(usize, f64)>, E>
where
    E: From<GridError> + From<LimitError>,
{
    let mut out = Vec::with_capacity(sizes.len());
    for &n in sizes {
        if n > SIZE_CAP {
            return Err(LimitError::SizeCap { size: n, cap: SIZE_CAP }.into());
        }
        let m = materialize(&apply, LogGrid::centered(step, n), p)?;
        out.push((n, sigma_min(&m)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::indicator;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dilation_norms() {
        let g = LogGrid::centered(1.0 / 128.0, 4096);
        let f = indicator(g, 1e-12, 1.0);
        for &x in &[0.5, 2.0, 7.0] {
            let v = apply_dilation(x, &f).unwrap();
            // trapezoid of an indicator on t: exact integral is x, error
            // from the ends is what the undilated norm also carries
            let ratio = v.norm_lp(2.0).powi(2) / f.norm_lp(2.0).powi(2);
            assert!((ratio - x).abs() < 1e-12 * x, "{ratio}");
            let back = apply_dilation(1.0 / x, &v).unwrap();
            assert_eq!(back.values(), f.values());
            assert!((back.grid().x0() - f.grid().x0()).abs() < 1e-12);
        }
        assert!(matches!(apply_dilation(0.0, &f), Err(LimitError::Overflow(_))));
    }

    #[test]
    fn modulation_is_isometric() {
        let g = LogGrid::symmetric(12.0, 12);
        let f = log_gaussian(g, 0.2, 0.9);
        for &mu in &[-30.0, 1.5, 20.0] {
            assert!((apply_modulation(mu, &f).norm_lp(3.0) - f.norm_lp(3.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn families() {
        let fam = PseudoisometryFamily::new(FamilyKind::Dilation, vec![1.0, 2.0, 4.0]).unwrap();
        for (a, b) in fam.norms(2.0) {
            assert!((a * b - 1.0).abs() < 1e-15);
        }
        assert!(PseudoisometryFamily::new(FamilyKind::Modulation, vec![1.0, 3.0, 2.0]).is_err());
    }

    #[test]
    fn sigma_min_matches_svd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = DMatrix::from_fn(40, 40, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let sv = singular_values(&a);
        let s = sigma_min(&a);
        assert!((s - sv[39]).abs() <= 1e-8 * sv[0], "{s} vs {}", sv[39]);
        let id = DMatrix::<Complex64>::identity(16, 16);
        assert!((sigma_min(&id) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn compact_kernel_vanishes_far_out() {
        let g = LogGrid::symmetric(12.0, 12);
        let f = log_gaussian(g, 0.0, 1.0);
        let rows = compact_limit_experiment(&CompactKernel::default(), 2.0, &[0.0, 10.0, 40.0], &[f]).unwrap();
        assert!(rows[0].discrepancy > 0.1);
        assert!(rows[2].discrepancy < 1e-100);
    }

    #[test]
    fn band_check_rejects_rough_functions() {
        let g = LogGrid::symmetric(12.0, 12);
        assert!(mellin_band(&log_gaussian(g, 0.0, 1.0), 2.0, 0).unwrap() < 10.0);
        let rough = indicator(g, 0.5, 2.0);
        assert!(matches!(mellin_band(&rough, 2.0, 0), Err(LimitError::NotBandLimited { .. })));
    }
}

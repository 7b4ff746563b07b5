//! Built-in oracle suite run by `sio selftest`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::bundled;
use crate::fredholm::{FredholmConfig, Overall, ShiftedSio};
use crate::funcops::{FuncopsConfig, Verdict};
use crate::grid::{log_gaussian, LogGrid, LogGridFunction};
use crate::limitops::{dilation_limit_experiment, snap_source_sequence};
use crate::mellin::{apply_projection, apply_r, apply_s, conjugated, mellin_transform, symbol_rp, symbol_sp, MellinSymbol, Route};
use crate::so::{estimate_fiber_points, Endpoint, FiberConfig};

/// Deliberate faults for exercising the harness itself.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Faults {
    /// Multiplies `s_p` wherever the suite evaluates it.
    pub sp_scale: f64,
}

impl Default for Faults {
    fn default() -> Self {
        Faults { sp_scale: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SelfCheck {
    pub id: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Outcome = Result<(bool, String), String>;

fn check(id: &'static str, run: impl FnOnce() -> Outcome) -> SelfCheck {
    match run() {
        Ok((passed, detail)) => SelfCheck { id, passed, detail },
        Err(e) => SelfCheck { id, passed: false, detail: format!("error: {e}") },
    }
}

fn bound(value: f64, limit: f64) -> Outcome {
    Ok((value <= limit, format!("{value:.3e} (limit {limit:.0e})")))
}

fn wide_gaussian(p: f64, factor: usize) -> LogGridFunction {
    let g = LogGrid::symmetric(12.0, 12);
    log_gaussian(g, 0.3, 0.8).phi_inv(p).resample(&g.widened(factor)).expect("widening keeps the lattice")
}

/// Runs every check; the suite passes iff all entries pass.
pub fn run(faults: Faults) -> Vec<SelfCheck> {
    let scale = faults.sp_scale;
    let sp = move |x: f64| symbol_sp(2.0, x) * scale;
    vec![
        check("mellin.round-trip", || {
            let f = log_gaussian(LogGrid::symmetric(12.0, 12), -0.5, 1.1);
            let back = mellin_transform(&f).map_err(|e| e.to_string())?.inverse();
            bound(back.sub(&f).map_err(|e| e.to_string())?.max_abs(), 1e-12)
        }),
        check("mellin.gaussian", || {
            let m = mellin_transform(&log_gaussian(LogGrid::symmetric(12.0, 12), 0.0, 1.0)).map_err(|e| e.to_string())?;
            let err = m
                .xi
                .iter()
                .zip(&m.values)
                .map(|(x, v)| (v - (2.0 * PI).sqrt() * (-0.5 * x * x).exp()).norm())
                .fold(0.0, f64::max);
            bound(err, 1e-10)
        }),
        check("mellin.symbol-identity", || {
            let err = (-400..=400)
                .map(|k| {
                    let x = k as f64 / 80.0;
                    (sp(x) * sp(x) - symbol_rp(2.0, x) * symbol_rp(2.0, x) - 1.0).norm()
                })
                .fold(0.0, f64::max);
            bound(err, 1e-12)
        }),
        check("mellin.s-similarity", || {
            let f = wide_gaussian(2.0, 4);
            let direct = apply_s(&f, 2.0, Route::Direct).map_err(|e| e.to_string())?;
            let via = conjugated(&MellinSymbol::function("s_p", sp), &f, 2.0).map_err(|e| e.to_string())?;
            bound(direct.sub(&via).map_err(|e| e.to_string())?.norm_lp(2.0) / f.norm_lp(2.0), 1e-5)
        }),
        check("mellin.projection-identity", || {
            // R f has exponential tails only, so the iterates need a wider grid
            let f = wide_gaussian(2.0, 8);
            let run = || -> Result<f64, crate::mellin::MellinError> {
                let pm = apply_projection(&f, 2.0, -1.0, Route::Direct)?;
                let ppm = apply_projection(&pm, 2.0, 1.0, Route::Direct)?;
                let r2 = apply_r(&apply_r(&f, 2.0, Route::Direct)?, 2.0, Route::Direct)?;
                Ok(ppm.scale(Complex64::new(4.0, 0.0)).add(&r2)?.norm_lp(2.0) / f.norm_lp(2.0))
            };
            bound(run().map_err(|e| e.to_string())?, 1e-5)
        }),
        check("funcops.neumann-residual", || {
            let cfg = FuncopsConfig::default();
            let mut worst: f64 = 0.0;
            for inst in bundled::invertible_instances() {
                let op = inst.build().map_err(|e| e.to_string())?;
                let report = op.check_invertibility(&cfg).map_err(|e| e.to_string())?;
                for f in bundled::test_functions(inst.grid, inst.p, 2) {
                    let inv = op.apply_inverse(&report, &f, 1e-6, &cfg).map_err(|e| e.to_string())?;
                    let res = op.apply(&inv.value).and_then(|v| Ok(v.sub(&f)?)).map_err(|e| e.to_string())?;
                    worst = worst.max(res.norm_lp(inst.p));
                }
            }
            bound(worst, 2e-6)
        }),
        check("funcops.boundary-verdict", || {
            let op = bundled::boundary_instance().build().map_err(|e| e.to_string())?;
            let v = op.check_invertibility(&FuncopsConfig::default()).map_err(|e| e.to_string())?.verdict;
            Ok((v == Verdict::NotInvertible, v.to_string()))
        }),
        check("limitops.dilation-trace", || {
            let set = bundled::so_instance();
            let op = ShiftedSio::new(set.clone(), 2.0, 1e-3).map_err(|e| e.to_string())?;
            let cfg = FiberConfig::default();
            let fps = estimate_fiber_points(&set, Endpoint::Infinity, &cfg).map_err(|e| e.to_string())?;
            let fp = fps
                .iter()
                .max_by(|x, y| x.values.a.re.total_cmp(&y.values.a.re))
                .ok_or("no fiber points")?;
            let grid = LogGrid::symmetric(12.0, 11).widened(4);
            let lh = snap_source_sequence(&set, fp, grid.step(), cfg.eps_cluster).map_err(|e| e.to_string())?;
            let tail = &lh[lh.len() - lh.len().div_ceil(4)..];
            let rows = dilation_limit_experiment(&op, fp, tail, &bundled::test_functions(grid, 2.0, 3), Route::Direct)
                .map_err(|e| e.to_string())?;
            bound(rows.iter().map(|r| r.discrepancy).fold(0.0, f64::max), 1e-2)
        }),
        check("fredholm.verdicts", || {
            let cfg = FredholmConfig::default();
            let mut got = Vec::new();
            for set in [bundled::fredholm_instance(), bundled::zero_instance()] {
                let op = ShiftedSio::new(set, 2.0, 1e-3).map_err(|e| e.to_string())?;
                got.push(op.fredholm_check(&cfg).map_err(|e| e.to_string())?.overall);
            }
            Ok((got == [Overall::Fredholm, Overall::NotFredholm], format!("{} / {}", got[0], got[1])))
        }),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        for c in run(Faults::default()) {
            assert!(c.passed, "{}: {}", c.id, c.detail);
        }
    }

    #[test]
    fn perturbed_sp_is_caught() {
        let failed: Vec<_> = run(Faults { sp_scale: 1.001 }).into_iter().filter(|c| !c.passed).map(|c| c.id).collect();
        assert_eq!(failed, ["mellin.symbol-identity", "mellin.s-similarity"]);
    }
}

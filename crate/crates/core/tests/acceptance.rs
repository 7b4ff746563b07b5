//! Acceptance criteria. Each prints one PASS/FAIL line; the process fails if
//! any criterion does.

use std::f64::consts::{E, PI};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sio_core::bundled;
use sio_core::fredholm::{FredholmConfig, Overall, ShiftedSio};
use sio_core::funcops::{FuncopsConfig, Verdict};
use sio_core::grid::{log_gaussian, LogGrid, LogGridFunction};
use sio_core::limitops::{
    compact_limit_experiment, dilation_limit_experiment, finite_section_probe, modulation_limit_experiment,
    snap_source_sequence, CompactKernel, LimitError,
};
use sio_core::mellin::{apply_projection, apply_r, apply_s, co_apply_fft, MellinSymbol, Route};
use sio_core::shift::SosShift;
use sio_core::so::{estimate_fiber_points, CoefficientSet, Endpoint, FiberConfig, SoFunction};
use sio_core::Complex64;

type Outcome = Result<String, String>;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn require(ok: bool, what: String) -> Outcome {
    if ok {
        Ok(what)
    } else {
        Err(what)
    }
}

fn default_grid() -> LogGrid {
    LogGrid::symmetric(12.0, 12).widened(4)
}

fn random_gaussians(rng: &mut ChaCha8Rng, grid: LogGrid, count: usize) -> Vec<LogGridFunction> {
    (0..count).map(|_| log_gaussian(grid, rng.gen_range(-2.0..2.0), rng.gen_range(0.5..1.5)).phi_inv(2.0)).collect()
}

fn identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let p = 2.0;
    let (mut worst_a, mut worst_b, mut worst_sign) = (0.0f64, 0.0f64, 0.0f64);
    for f in random_gaussians(&mut rng, default_grid(), 20) {
        let n = f.norm_lp(p);
        let pm = apply_projection(&f, p, -1.0, Route::Direct).map_err(err)?;
        let ppm = apply_projection(&pm, p, 1.0, Route::Direct).map_err(err)?;
        let r2 = apply_r(&apply_r(&f, p, Route::Direct).map_err(err)?, p, Route::Direct).map_err(err)?;
        let s2 = apply_s(&apply_s(&f, p, Route::Direct).map_err(err)?, p, Route::Direct).map_err(err)?;
        let a = ppm.scale(c(4.0)).add(&r2).map_err(err)?.norm_lp(p) / n;
        let b = s2.sub(&r2).and_then(|v| v.sub(&f)).map_err(err)?.norm_lp(p) / n;
        // the literal S^2 + R^2 - I differs from the vanishing combination by 2R^2
        let literal = s2.add(&r2).and_then(|v| v.sub(&f)).map_err(err)?.norm_lp(p);
        let two_r2 = r2.scale(c(2.0)).norm_lp(p);
        worst_a = worst_a.max(a);
        worst_b = worst_b.max(b);
        worst_sign = worst_sign.max((literal - two_r2).abs() / n);
    }
    require(
        worst_a <= 1e-5 && worst_b <= 1e-5 && worst_sign <= 1e-5,
        format!("4P+P- + R^2: {worst_a:.2e}, S^2 - R^2 - I: {worst_b:.2e}, |S^2+R^2-I| - 2|R^2|: {worst_sign:.2e} (tol 1e-5)"),
    )
}

fn similarity() -> Outcome {
    let p = 2.0;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let grid = default_grid();
    let mut worst_s = 0.0f64;
    for f in random_gaussians(&mut rng, grid, 5) {
        let lhs = apply_s(&f, p, Route::Direct).map_err(err)?.phi(p);
        let rhs = co_apply_fft(&MellinSymbol::sp(p), &f.phi(p)).map_err(err)?;
        worst_s = worst_s.max(lhs.sub(&rhs).map_err(err)?.norm_lp_mu(p) / f.norm_lp(p));
    }
    let f = log_gaussian(grid, 0.2, 1.0).phi_inv(p);
    let mut worst_w = 0.0f64;
    for k in [0.5, 2.0, E] {
        let w = SosShift::multiplicative(k).map_err(err)?;
        let lhs = w.apply_truncated(&f).map_err(err)?.phi(p);
        let rhs = co_apply_fft(&MellinSymbol::mk(k, p), &f.phi(p)).map_err(err)?;
        worst_w = worst_w.max(lhs.sub(&rhs).map_err(err)?.norm_lp_mu(p) / f.norm_lp(p));
    }
    require(
        worst_s <= 1e-5 && worst_w <= 1e-8,
        format!("S: {worst_s:.2e} (tol 1e-5), W_k: {worst_w:.2e} (tol 1e-8)"),
    )
}

fn neumann_residuals() -> Outcome {
    let cfg = FuncopsConfig::default();
    let budget = 1e-6;
    let mut parts = Vec::new();
    let mut ok = true;
    for inst in bundled::invertible_instances() {
        let op = inst.build().map_err(err)?;
        let report = op.check_invertibility(&cfg).map_err(err)?;
        let mut worst = 0.0f64;
        for f in bundled::test_functions(inst.grid, inst.p, 10) {
            let inv = op.apply_inverse(&report, &f, budget, &cfg).map_err(err)?;
            let back = op.apply(&inv.value).map_err(err)?;
            worst = worst.max(back.sub(&f).map_err(err)?.norm_lp(inst.p));
        }
        ok &= worst <= 2.0 * budget && Some(report.verdict) == inst.branch.map(Verdict::Invertible);
        parts.push(format!("{} {} {worst:.2e}", inst.name, report.verdict));
    }
    let boundary = bundled::boundary_instance().build().map_err(err)?.check_invertibility(&cfg).map_err(err)?;
    ok &= boundary.verdict == Verdict::NotInvertible;
    parts.push(format!("boundary {}", boundary.verdict));
    require(ok, format!("{} (tol {:.0e})", parts.join(", "), 2.0 * budget))
}

fn final_quarter<T: Copy>(v: &[T]) -> &[T] {
    &v[v.len() - v.len().div_ceil(4)..]
}

fn limit_operators() -> Outcome {
    let set = bundled::so_instance();
    let p = 2.0;
    let op = ShiftedSio::new(set.clone(), p, 1e-3).map_err(err)?;
    let cfg = FiberConfig::default();
    let fps = estimate_fiber_points(&set, Endpoint::Infinity, &cfg).map_err(err)?;
    let fp = fps.iter().max_by(|x, y| x.values.a.re.total_cmp(&y.values.a.re)).ok_or("no fiber points")?;
    let grid = LogGrid::symmetric(12.0, 11).widened(4);
    let log_h = snap_source_sequence(&set, fp, grid.step(), cfg.eps_cluster).map_err(err)?;
    if log_h.is_empty() {
        return Err("empty snapped source sequence".into());
    }
    let tfs = bundled::test_functions(grid, p, 3);
    let tail = final_quarter(&log_h);
    let dil = dilation_limit_experiment(&op, fp, tail, &tfs, Route::Direct).map_err(err)?;
    let dil_max = dil.iter().map(|r| r.discrepancy).fold(0.0, f64::max);
    let comp = compact_limit_experiment(&CompactKernel::default(), p, tail, &tfs).map_err(err)?;
    let comp_max = comp.iter().map(|r| r.discrepancy).fold(0.0, f64::max);
    // the quadrature error for t^{i mu} f is third order in the step, so a finer grid
    let fine = bundled::test_functions(LogGrid::symmetric(12.0, 13).widened(4), p, 3);
    let modu = modulation_limit_experiment(p, &[20.0], &fine, Route::Direct).map_err(err)?;
    let mod_max = modu.iter().map(|r| r.discrepancy).fold(0.0, f64::max);
    require(
        dil_max < 1e-2 && comp_max < 1e-3 && mod_max <= 1e-4,
        format!(
            "fiber a = {:.4}, {} snapped samples; dilation {dil_max:.2e} (tol 1e-2), compact {comp_max:.2e} (tol 1e-3), modulation mu=20 {mod_max:.2e} (tol 1e-4)",
            fp.values.a.re,
            log_h.len()
        ),
    )
}

/// Symbol of the constant-coefficient operator, written out independently.
fn oracle_symbol(v: [Complex64; 4], omega: f64, p: f64, x: f64) -> Complex64 {
    let z = Complex64::new(PI * x, PI / p);
    let s = if x.abs() > 20.0 { c(x.signum()) } else { z.cosh() / z.sinh() };
    let e = Complex64::new(0.0, omega * x).exp() * (-omega / p).exp();
    (v[0] - v[1] * e) * (c(1.0) + s) / 2.0 + (v[2] - v[3] * e) * (c(1.0) - s) / 2.0
}

fn oracle_margin(v: [Complex64; 4], omega: f64, p: f64) -> f64 {
    let k = (-omega / p).exp();
    let circle_plus = (v[0].norm() - v[1].norm() * k).abs();
    let circle_minus = (v[2].norm() - v[3].norm() * k).abs();
    let dense = (-16384..=16384)
        .map(|j| oracle_symbol(v, omega, p, j as f64 / 1024.0).norm())
        .fold(f64::INFINITY, f64::min);
    circle_plus.min(circle_minus).min(dense)
}

fn random_complex(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::from_polar(rng.gen_range(0.2..3.0), rng.gen_range(-PI..PI))
}

fn consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cfg = FredholmConfig::default();
    let tol = cfg.funcops.tol;
    let (mut agree, mut counts) = (0, [0usize; 3]);
    let mut bad = Vec::new();
    for i in 0..50 {
        let p: f64 = rng.gen_range(1.3..4.0);
        let omega: f64 = rng.gen_range(0.3..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let mut v = [0; 4].map(|_| random_complex(&mut rng));
        let zero = match i % 10 {
            // |a| = |b| e^{-omega/p} or the same for (c, d)
            0..=2 => {
                let side = 2 * (i % 2);
                v[side] = v[side + 1] * (-omega / p).exp() * Complex64::from_polar(1.0, rng.gen_range(-PI..PI));
                true
            }
            // n(x0) = 0 for a random x0, solved for a or c
            3..=5 => {
                let x0: f64 = rng.gen_range(-1.5..1.5);
                let z = Complex64::new(PI * x0, PI / p);
                let s = z.cosh() / z.sinh();
                let e = Complex64::new(0.0, omega * x0).exp() * (-omega / p).exp();
                let (wp, wm) = ((c(1.0) + s) / 2.0, (c(1.0) - s) / 2.0);
                if wp.norm() >= wm.norm() {
                    v[0] = v[1] * e - (v[2] - v[3] * e) * wm / wp;
                } else {
                    v[2] = v[3] * e - (v[0] - v[1] * e) * wp / wm;
                }
                true
            }
            _ => false,
        };
        let margin = if zero { 0.0 } else { oracle_margin(v, omega, p) };
        let set = CoefficientSet::constants(v[0], v[1], v[2], v[3], omega);
        let got = ShiftedSio::new(set, p, 1e-3).and_then(|o| o.fredholm_check(&cfg)).map_err(err)?.overall;
        counts[got as usize] += 1;
        let ok = match got {
            Overall::Fredholm => margin > 0.0,
            Overall::NotFredholm => margin == 0.0,
            Overall::Inconclusive => margin < 2.0 * tol,
        };
        if ok {
            agree += 1;
        } else {
            bad.push(format!("#{i} {got} margin {margin:.3e}"));
        }
    }
    require(
        agree == 50,
        format!(
            "{agree}/50 agree (fredholm {}, not-fredholm {}, inconclusive {}){}",
            counts[0],
            counts[1],
            counts[2],
            if bad.is_empty() { String::new() } else { format!("; mismatches: {}", bad.join(", ")) }
        ),
    )
}

fn finite_sections() -> Outcome {
    let p = 2.0;
    let sizes = [128, 256, 512, 1024];
    let cfg = FredholmConfig::default();
    let probe = |set: CoefficientSet| -> Result<(f64, Vec<(usize, f64)>), String> {
        let op = ShiftedSio::new(set, p, 1e-3).map_err(err)?;
        let margin = op.fredholm_check(&cfg).map_err(err)?.condition_ii.margin;
        let sv = finite_section_probe(|f| op.apply(f, Route::Symbol).map_err(LimitError::from), 1.0 / 16.0, &sizes, p)
            .map_err(err)?;
        Ok((margin, sv))
    };
    let (margin, good) = probe(bundled::fredholm_instance())?;
    let good_min = good.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let (_, bad) = probe(bundled::zero_instance())?;
    let e = 0.5f64.exp();
    let scale = (0..=4096)
        .map(|j| oracle_symbol([c(1.0), c(e), c(1.0), c(e)], 1.0, p, -8.0 + j as f64 / 256.0).norm())
        .fold(0.0, f64::max);
    let last = bad.last().map(|s| s.1).unwrap_or(f64::NAN);
    let fmt = |v: &[(usize, f64)]| v.iter().map(|(n, s)| format!("{n}:{s:.4}")).collect::<Vec<_>>().join(" ");
    require(
        good_min > 0.5 * margin && last < 0.1 * scale,
        format!(
            "fredholm [{}] vs 0.5*margin {:.4}; zero [{}] vs 0.1*scale {:.4}",
            fmt(&good),
            0.5 * margin,
            fmt(&bad),
            0.1 * scale
        ),
    )
}

fn fiber_estimation() -> Outcome {
    let set = CoefficientSet {
        a: SoFunction::parse("a", "2 + sin(log(log(t)))").map_err(err)?.with_domain(E, f64::INFINITY),
        b: SoFunction::constant("b", 0.5),
        c: SoFunction::constant("c", 2.0),
        d: SoFunction::constant("d", 0.5),
        omega: SoFunction::constant("omega", 1.0),
    };
    let fps = estimate_fiber_points(&set, Endpoint::Infinity, &FiberConfig::default()).map_err(err)?;
    let lo = fps.iter().map(|f| f.values.a.re).fold(f64::INFINITY, f64::min);
    let hi = fps.iter().map(|f| f.values.a.re).fold(f64::NEG_INFINITY, f64::max);
    require(
        lo <= 1.05 && hi >= 2.95 && lo >= 0.95 && hi <= 3.05,
        format!("{} clusters, a values in [{lo:.4}, {hi:.4}]", fps.len()),
    )
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Outcome); 7] = [
        ("1 operator identities", Duration::from_secs(10), identities),
        ("2 similarity", Duration::from_secs(10), similarity),
        ("3 Neumann residuals", Duration::from_secs(30), neumann_residuals),
        ("4 limit operators", Duration::from_secs(60), limit_operators),
        ("5 criterion consistency", Duration::from_secs(60), consistency),
        ("6 finite sections", Duration::from_secs(120), finite_sections),
        ("7 fiber estimation", Duration::from_secs(10), fiber_estimation),
    ];
    let mut failed = 0;
    for (name, limit, run) in criteria {
        let t0 = Instant::now();
        let out = run();
        let took = t0.elapsed();
        let (ok, detail) = match out {
            Ok(d) => (took <= limit, d),
            Err(d) => (false, d),
        };
        println!(
            "{} criterion {name}: {detail}; runtime {:.2}s (limit {}s)",
            if ok { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            limit.as_secs()
        );
        failed += usize::from(!ok);
    }
    if failed > 0 {
        eprintln!("{failed} criteria failed");
        std::process::exit(1);
    }
}

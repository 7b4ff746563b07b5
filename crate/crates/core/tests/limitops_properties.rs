use std::f64::consts::PI;

use sio_core::bundled;
use sio_core::fredholm::ShiftedSio;
use sio_core::grid::{indicator, log_gaussian, LogGrid, LogGridFunction};
use sio_core::limitops::*;
use sio_core::mellin::{apply_s, Route};
use sio_core::shift::SosShift;
use sio_core::so::{estimate_fiber_points, Endpoint, FiberConfig, SoFunction};

fn grid() -> LogGrid {
    LogGrid::symmetric(12.0, 11).widened(4)
}

#[test]
fn constant_coefficients_give_a_flat_trace() {
    let op = ShiftedSio::new(bundled::fredholm_instance(), 2.0, 1e-3).unwrap();
    let fps = estimate_fiber_points(&bundled::fredholm_instance(), Endpoint::Infinity, &FiberConfig::default()).unwrap();
    let g = grid();
    let log_h: Vec<f64> = [-5.0, 3.0, 40.0].iter().map(|u: &f64| (u / g.step()).round() * g.step()).collect();
    let rows = dilation_limit_experiment(&op, &fps[0], &log_h, &bundled::test_functions(g, 2.0, 2), Route::Direct).unwrap();
    for r in rows {
        assert!(r.discrepancy < 1e-12, "{r:?}");
    }
}

#[test]
fn dilation_trace_csv() {
    let rows = [TraceRow { n: 0, parameter: 1.5, test_fn: 2, discrepancy: 0.25 }];
    let csv = trace_csv(&rows);
    assert_eq!(csv, "n,parameter,test_fn_id,discrepancy\n0,1.50000000000000000e0,2,2.50000000000000000e-1\n");
}

#[test]
fn multiplication_commutes_with_modulation() {
    let g = grid();
    let f = log_gaussian(g, 0.1, 0.9);
    let coeff = SoFunction::parse("g", "2 + atan(log(t))").unwrap();
    let mul = |h: &LogGridFunction| h.map(|x, v| v * coeff.eval_log(x).unwrap());
    for mu in [-7.0, 3.0, 50.0] {
        let conj = mul(&apply_modulation(mu, &f)).modulate(-mu);
        assert!(conj.sub(&mul(&f)).unwrap().max_abs() < 1e-15);
    }
}

#[test]
fn multiplicative_shift_is_fixed_by_resonant_modulations() {
    let k = 2.0f64;
    let g = LogGrid::centered(k.ln() / 64.0, 4096);
    let f = log_gaussian(g, 0.0, 1.0);
    let w = SosShift::multiplicative(k).unwrap();
    let plain = w.apply_truncated(&f).unwrap();
    for n in 1..4 {
        let nu = 2.0 * PI * n as f64 / k.ln();
        let conj = w.apply_truncated(&f.modulate(nu)).unwrap().modulate(-nu);
        assert!(conj.sub(&plain).unwrap().max_abs() < 1e-12);
    }
}

#[test]
fn slowly_oscillating_dilations_flatten() {
    let g = SoFunction::parse("g", "2 + sin(log(log(t + exp(1))))").unwrap();
    let osc = dilation_oscillation(&g, &[10.0, 1e3, 1e5, 1e7]).unwrap();
    for w in osc.windows(2) {
        assert!(w[1] < w[0]);
    }
    assert!(osc[3] < 1e-6);
}

#[test]
fn commutator_with_multiplication_is_nearly_compact() {
    let p = 2.0;
    let a = SoFunction::parse("a", "2 + atan(log(t))/2").unwrap();
    let n = 256;
    let g = LogGrid::centered(1.0 / 16.0, n);
    let mul = |h: &LogGridFunction| h.map(|x, v| v * a.eval_log(x).unwrap());
    let commutator = |h: &LogGridFunction| -> Result<LogGridFunction, LimitError> {
        let left = mul(&apply_s(h, p, Route::Symbol)?);
        let right = apply_s(&mul(h), p, Route::Symbol)?;
        Ok(left.sub(&right)?)
    };
    let m = materialize(commutator, g, p).unwrap();
    let sv = singular_values(&m);
    assert!(sv[n / 4] <= sv[0] / 10.0, "{} vs {}", sv[n / 4], sv[0]);
}

#[test]
fn identity_finite_sections() {
    let r = finite_section_probe(|f| Ok::<_, LimitError>(f.clone()), 0.1, &[16, 64], 2.0).unwrap();
    for (_, s) in r {
        assert!((s - 1.0).abs() < 1e-14);
    }
    assert!(matches!(
        finite_section_probe(|f| Ok::<_, LimitError>(f.clone()), 0.1, &[SIZE_CAP + 1], 2.0),
        Err(LimitError::SizeCap { .. })
    ));
}

#[test]
fn indicator_dilation_norms() {
    let g = LogGrid::centered(1.0 / 64.0, 2048);
    let f = indicator(g, (-4.0f64).exp(), 1.0);
    for p in [1.5, 2.0, 3.0] {
        for x in [0.25f64, 3.0] {
            let lhs = apply_dilation(x, &f).unwrap().norm_lp(p);
            assert!((lhs - x.powf(1.0 / p) * f.norm_lp(p)).abs() < 1e-12 * lhs);
        }
    }
}

#[test]
fn composed_operator_traces_vanish_with_their_factors() {
    let set = bundled::so_instance();
    let op = ShiftedSio::new(set.clone(), 2.0, 1e-3).unwrap();
    let cfg = FiberConfig::default();
    let fps = estimate_fiber_points(&set, Endpoint::Infinity, &cfg).unwrap();
    let fp = fps.iter().max_by_key(|f| f.source_log_t.len()).unwrap();
    let g = grid();
    let log_h = snap_source_sequence(&set, fp, g.step(), cfg.eps_cluster).unwrap();
    let limit = limit_operator(fp, 2.0).unwrap();
    let f = &bundled::test_functions(g, 2.0, 1)[0];
    let want = limit.apply(&limit.apply(f, Route::Direct).unwrap(), Route::Direct).unwrap();
    let nf = limit.apply(f, Route::Direct).unwrap();
    let single = dilation_limit_experiment(&op, fp, &log_h, std::slice::from_ref(f), Route::Direct).unwrap();
    let second = dilation_limit_experiment(&op, fp, &log_h, std::slice::from_ref(&nf), Route::Direct).unwrap();
    for ((r1, r2), &lh) in single.iter().zip(&second).zip(&log_h) {
        let once = op.apply(&f.dilate_log(lh), Route::Direct).unwrap();
        let twice = op.apply(&once, Route::Direct).unwrap().dilate_log(-lh);
        let twice = LogGridFunction::new(*f.grid(), twice.into_values()).unwrap();
        let d = twice.sub(&want).unwrap().norm_lp(2.0);
        // V^{-1}NNV - N'N' = V^{-1}NV (V^{-1}NV - N') + (V^{-1}NV - N') N', and
        // ||N|| < 6 at p = 2 for these coefficients
        assert!(d <= 6.0 * r1.discrepancy + r2.discrepancy + 1e-6, "{d} vs {} + {}", r1.discrepancy, r2.discrepancy);
    }
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sio_core::grid::{log_gaussian, LogGrid, LogGridFunction};
use sio_core::mellin::{apply_projection, apply_r, apply_s, Route};

fn rel(a: &LogGridFunction, b: &LogGridFunction, p: f64) -> f64 {
    a.norm_lp(p) / b.norm_lp(p)
}

#[test]
fn direct_and_symbol_routes_agree() {
    let g = LogGrid::symmetric(12.0, 14);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for &p in &[2.0, 1.5, 4.0] {
        let f = log_gaussian(g, rng.gen_range(-2.0..2.0), rng.gen_range(0.5..1.5)).phi_inv(p);
        let wide = f.resample(&g.widened(4)).unwrap();
        let a = apply_s(&wide, p, Route::Direct).unwrap();
        let b = apply_s(&wide, p, Route::Symbol).unwrap();
        let d = a.sub(&b).unwrap();
        assert!(rel(&d, &wide, p) < 1e-6, "S p={p}");
        let a = apply_r(&wide, p, Route::Direct).unwrap();
        let b = apply_r(&wide, p, Route::Symbol).unwrap();
        assert!(rel(&a.sub(&b).unwrap(), &wide, p) < 1e-6, "R p={p}");
        for route in [Route::Direct, Route::Symbol] {
            let pm = apply_projection(&wide, p, -1.0, route).unwrap();
            let ppm = apply_projection(&pm, p, 1.0, route).unwrap();
            let r1 = apply_r(&wide, p, route).unwrap();
            let r2 = apply_r(&r1, p, route).unwrap();
            let lhs = ppm.scale(4.0.into()).add(&r2).unwrap();
            assert!(rel(&lhs, &wide, p) < 1e-5, "identity p={p} {route:?}");
        }
    }
}

#[test]
fn parseval() {
    let g = LogGrid::symmetric(12.0, 12);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let psi = log_gaussian(g, rng.gen_range(-2.0..2.0), rng.gen_range(0.3..1.2)).modulate(rng.gen_range(-5.0..5.0));
        let m = sio_core::mellin::mellin_transform(&psi).unwrap();
        let lhs = m.norm2();
        let rhs = (2.0 * std::f64::consts::PI).sqrt() * psi.norm_lp_mu(2.0);
        assert!((lhs - rhs).abs() < 1e-12 * rhs, "{lhs} vs {rhs}");
    }
}

proptest::proptest! {
    #[test]
    fn symbol_identity(x in -40.0f64..40.0, p in 1.05f64..20.0) {
        use sio_core::mellin::{symbol_rp, symbol_sp};
        let s = symbol_sp(p, x);
        let r = symbol_rp(p, x);
        proptest::prop_assert!((s * s - r * r - 1.0).norm() < 1e-12 * (1.0 + s.norm_sqr()));
    }
}

#[test]
fn constant_coefficient_operator_is_a_mellin_convolution() {
    use sio_core::fredholm::{symbol_n_mellin, ShiftedSio};
    use sio_core::mellin::conjugated;
    use sio_core::so::{CoefficientSet, FiberValues};
    use sio_core::Complex64;
    let p = 2.0;
    let v = FiberValues {
        a: Complex64::new(2.0, 0.5),
        b: Complex64::new(1.0, 0.0),
        c: Complex64::new(3.0, 0.0),
        d: Complex64::new(0.5, -1.0),
        omega: 1.0,
    };
    let op = ShiftedSio::new(CoefficientSet::constants(v.a, v.b, v.c, v.d, v.omega), p, 1e-3).unwrap();
    let g = LogGrid::symmetric(12.0, 12).widened(4);
    for (centre, width) in [(0.0, 1.0), (1.0, 0.7), (-1.5, 1.3)] {
        let f = log_gaussian(g, centre, width).phi_inv(p);
        let direct = op.apply(&f, Route::Direct).unwrap();
        let via = conjugated(&symbol_n_mellin(v, p), &f, p).unwrap();
        assert!(rel(&direct.sub(&via).unwrap(), &f, p) < 1e-5);
    }
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sio_core::bundled;
use sio_core::fredholm::{symbol_n, FredholmConfig, FredholmError, Overall, ShiftedSio, WitnessLocation};
use sio_core::so::{CoefficientSet, SoFunction};
use sio_core::Complex64;

fn refined(cfg: &FredholmConfig) -> FredholmConfig {
    let mut r = *cfg;
    r.funcops.fiber.samples *= 2;
    r.delta /= 2.0;
    r
}

fn random_instances(count: usize) -> Vec<CoefficientSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    (0..count)
        .map(|_| {
            let mut z = || Complex64::from_polar(rng.gen_range(0.2..2.5), rng.gen_range(-3.0..3.0));
            let (a, b, c, d) = (z(), z(), z(), z());
            CoefficientSet::constants(a, b, c, d, rng.gen_range(0.4..1.5))
        })
        .collect()
}

#[test]
fn refinement_never_flips_a_definite_verdict() {
    let cfg = FredholmConfig::default();
    let fine = refined(&cfg);
    let mut sets = random_instances(6);
    sets.push(bundled::so_instance());
    sets.push(bundled::fredholm_instance());
    sets.push(bundled::zero_instance());
    for set in sets {
        let op = ShiftedSio::new(set, 2.0, 1e-3).unwrap();
        let coarse = op.fredholm_check(&cfg).unwrap().overall;
        let again = op.fredholm_check(&fine).unwrap().overall;
        let flipped = matches!(
            (coarse, again),
            (Overall::Fredholm, Overall::NotFredholm) | (Overall::NotFredholm, Overall::Fredholm)
        );
        assert!(!flipped, "{coarse} -> {again}");
    }
}

#[test]
fn slowly_oscillating_instance_is_fredholm() {
    let op = ShiftedSio::new(bundled::so_instance(), 2.0, 1e-3).unwrap();
    let v = op.fredholm_check(&FredholmConfig::default()).unwrap();
    assert_eq!(v.overall, Overall::Fredholm);
    let (zero, inf) = v.coverage();
    assert_eq!(zero, 1);
    assert!(inf > 10);
}

#[test]
fn witnesses_reproduce() {
    let cfg = FredholmConfig::default();
    for set in random_instances(4).into_iter().chain([bundled::zero_instance()]) {
        let op = ShiftedSio::new(set, 2.0, 1e-3).unwrap();
        let v = op.fredholm_check(&cfg).unwrap();
        for m in &v.condition_ii.fibers {
            if let WitnessLocation::At(x) = m.location {
                assert_eq!(symbol_n(&m.fiber.values, op.p, x).norm(), m.margin);
            }
        }
        let w = &v.condition_ii.fibers[v.condition_ii.witness];
        assert_eq!(w.margin, v.condition_ii.margin);
    }
}

#[test]
fn symbol_dump_has_one_row_per_fiber_and_node() {
    let cfg = FredholmConfig::default();
    let op = ShiftedSio::new(bundled::zero_instance(), 2.0, 1e-3).unwrap();
    let csv = op.symbol_dump(&cfg).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("fiber_id,x,re,im,abs"));
    let rows: Vec<&str> = lines.collect();
    let nodes = (2.0 * cfg.x_max / cfg.delta) as usize + 1;
    assert_eq!(rows.len(), 2 * nodes);
    let at_zero: Vec<&str> = rows.iter().filter(|r| r.split(',').nth(1) == Some("0.00000000000000000e0")).copied().collect();
    assert_eq!(at_zero.len(), 2);
    for r in at_zero {
        let abs: f64 = r.split(',').nth(4).unwrap().parse().unwrap();
        assert!(abs < 1e-12);
    }
}

#[test]
fn invalid_instances_are_rejected() {
    let cfg = FredholmConfig::default();
    let with_omega = |omega: &str| {
        let mut set = bundled::fredholm_instance();
        set.omega = SoFunction::parse("omega", omega).unwrap();
        ShiftedSio::new(set, 2.0, 1e-3).and_then(|op| op.fredholm_check(&cfg))
    };
    assert!(matches!(with_omega("0"), Err(FredholmError::Shift(_))));
    assert!(matches!(with_omega("atan(log(t))/4"), Err(FredholmError::Shift(_))));
    let mut set = bundled::fredholm_instance();
    set.a = SoFunction::parse("a", "2 + sin(log(t))").unwrap();
    let r = ShiftedSio::new(set, 2.0, 1e-3).and_then(|op| op.fredholm_check(&cfg));
    assert!(matches!(r, Err(FredholmError::So(_)) | Err(FredholmError::Funcops(_))), "{r:?}");
}

//! Reference instances shared by the self-test, the CLI and the test suites.

use num_complex::Complex64;

use crate::funcops::{BinomialOp, Branch, FuncopsError};
use crate::grid::{log_gaussian, LogGrid, LogGridFunction};
use crate::shift::SosShift;
use crate::so::{CoefficientSet, SoFunction};

#[derive(Clone, Debug, PartialEq)]
pub struct BinomialInstance {
    pub name: &'static str,
    pub a: &'static str,
    pub b: &'static str,
    pub omega: &'static str,
    pub p: f64,
    /// Grid wide enough for every Neumann term at budget `1e-6`.
    pub grid: LogGrid,
    /// `None` for an instance that is not invertible.
    pub branch: Option<Branch>,
}

impl BinomialInstance {
    pub fn build(&self) -> Result<BinomialOp, FuncopsError> {
        let parse = |name: &str, src: &str| SoFunction::parse(name, src).expect("bundled literal");
        let shift = SosShift::new(parse("omega", self.omega), 1e-3)?;
        BinomialOp::new(parse("a", self.a), parse("b", self.b), shift, self.p)
    }
}

/// Invertible binomial operators: one per branch plus the `b = 0` case.
pub fn invertible_instances() -> Vec<BinomialInstance> {
    vec![
        BinomialInstance {
            name: "first-branch",
            a: "2",
            b: "1",
            omega: "1 + atan(log(t))/4",
            p: 2.0,
            grid: LogGrid::symmetric(40.0, 14),
            branch: Some(Branch::First),
        },
        BinomialInstance {
            name: "second-branch",
            a: "0.5",
            b: "1",
            omega: "log(2)",
            p: 2.0,
            grid: LogGrid::centered(2f64.ln() / 64.0, 8192),
            branch: Some(Branch::Second),
        },
        BinomialInstance {
            name: "division",
            a: "2 + atan(log(t))/2",
            b: "0",
            omega: "1",
            p: 2.0,
            grid: LogGrid::symmetric(40.0, 14),
            branch: Some(Branch::First),
        },
    ]
}

/// `|a| = |b| e^{-omega/p}` exactly: not invertible.
pub fn boundary_instance() -> BinomialInstance {
    BinomialInstance {
        name: "boundary",
        a: "1",
        b: "exp(0.5)",
        omega: "1",
        p: 2.0,
        grid: LogGrid::symmetric(40.0, 14),
        branch: None,
    }
}

/// `a = 2 + sin(log log(t + e))`, other coefficients constant, `omega = 1`.
/// Near infinity `a` behaves like `2 + sin(log log t)`.
pub fn so_instance() -> CoefficientSet {
    CoefficientSet {
        a: SoFunction::parse("a", "2 + sin(log(log(t + exp(1))))").expect("literal"),
        b: SoFunction::constant("b", 0.5),
        c: SoFunction::constant("c", 2.0),
        d: SoFunction::constant("d", 0.5),
        omega: SoFunction::constant("omega", 1.0),
    }
}

fn real(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

/// `a = 2, c = 3, b = d = 1, omega = 1`: Fredholm with symbol margin
/// `2 - e^{-1/2}`.
pub fn fredholm_instance() -> CoefficientSet {
    CoefficientSet::constants(real(2.0), real(1.0), real(3.0), real(1.0), 1.0)
}

/// `a = c = 1, b = d = e^{1/2}, omega = 1`: the symbol vanishes at `x = 0`.
pub fn zero_instance() -> CoefficientSet {
    let e = 0.5f64.exp();
    CoefficientSet::constants(real(1.0), real(e), real(1.0), real(e), 1.0)
}

/// Deterministic log-Gaussians normalised in `L^p(R_+)`.
pub fn test_functions(grid: LogGrid, p: f64, count: usize) -> Vec<LogGridFunction> {
    (0..count)
        .map(|k| {
            let centre = -2.0 + 4.0 * k as f64 / count.max(2) as f64;
            let width = 0.6 + 0.1 * (k % 10) as f64;
            let f = log_gaussian(grid, centre, width).phi_inv(p);
            let n = f.norm_lp(p);
            f.scale(real(1.0 / n))
        })
        .collect()
}

//! Instance files: `key = value` lines grouped under `[section]` headers.
//!
//! ```text
//! p = 2
//!
//! [coefficients]
//! a = 2 + sin(log(log(t + exp(1))))
//! b = 0.5
//! c = 2
//! d = 0.5
//! omega = 1
//!
//! [domain]
//! t_min = 0
//! t_max = inf
//!
//! [limits]
//! a.infinity = 3
//!
//! [numerics]
//! tol = 0.001
//! ```

use anyhow::{anyhow, bail, Context, Result};
use ini::Ini;
use sio_core::expr::Expr;
use sio_core::fredholm::FredholmConfig;
use sio_core::funcops::FuncopsConfig;
use sio_core::grid::LogGrid;
use sio_core::so::{CoefficientSet, Endpoint, FiberConfig, SoFunction};
use sio_core::Complex64;

/// Every `[numerics]` key with its default and meaning.
pub const DEFAULTS: &[(&str, &str, &str)] = &[
    ("L", "12", "half-width of the log t grid"),
    ("m", "12", "log2 of the number of grid points"),
    ("X", "8", "half-width of the symbol grid"),
    ("delta", "0.00390625", "initial step of the symbol grid"),
    ("sigma", "0.7", "step of the geometric fiber sweep in log t"),
    ("N", "400", "length of the fiber sweep"),
    ("eps_cluster", "0.01", "fiber cluster radius"),
    ("loglog_rate", "0.06", "rate of the iterated-log fiber sweep (0 disables it)"),
    ("tol", "0.001", "decision tolerance for sampled margins"),
    ("exact_tol", "1e-12", "decision tolerance for exact margins"),
    ("zero_tol", "1e-9", "symbol values at or below this count as zeros"),
    ("max_terms", "10000", "cap on Neumann series terms"),
    ("budget", "1e-6", "error budget for inverse applications"),
    ("shift_tail_tol", "0.001", "bound on |t omega'(t)| far out"),
];

const COEFFICIENTS: [&str; 5] = ["a", "b", "c", "d", "omega"];

#[derive(Clone, Debug, PartialEq)]
pub struct Numerics {
    pub l: f64,
    pub m: u32,
    pub x_max: f64,
    pub delta: f64,
    pub sigma: f64,
    pub samples: usize,
    pub eps_cluster: f64,
    pub loglog_rate: f64,
    pub tol: f64,
    pub exact_tol: f64,
    pub zero_tol: f64,
    pub max_terms: usize,
    pub budget: f64,
    pub shift_tail_tol: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Limit {
    pub coefficient: String,
    pub endpoint: Endpoint,
    pub source: String,
    pub value: Complex64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InstanceConfig {
    pub p: f64,
    /// Expression text of `a, b, c, d, omega`.
    pub coefficients: [String; 5],
    pub domain: (f64, f64),
    pub limits: Vec<Limit>,
    pub numerics: Numerics,
}

fn number(key: &str, src: &str) -> Result<f64> {
    let s = src.trim();
    if s == "inf" {
        return Ok(f64::INFINITY);
    }
    if let Ok(v) = s.parse::<f64>() {
        return Ok(v);
    }
    let e = Expr::parse(s).with_context(|| format!("`{key}`: cannot parse `{s}`"))?;
    if !e.is_constant() {
        bail!("`{key}` must be a constant, got `{s}`");
    }
    let v = e.eval_constant().with_context(|| format!("`{key}`: cannot evaluate `{s}`"))?;
    if v.im != 0.0 {
        bail!("`{key}` must be real, got `{s}`");
    }
    Ok(v.re)
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if !(v > 0.0) || !v.is_finite() {
        bail!("`{key}` must be positive and finite, got {v}");
    }
    Ok(v)
}

fn count(key: &str, v: f64) -> Result<usize> {
    if !(v >= 1.0) || v.fract() != 0.0 || v > 1e9 {
        bail!("`{key}` must be a positive integer, got {v}");
    }
    Ok(v as usize)
}

impl Numerics {
    fn from_pairs(pairs: &[(String, String)]) -> Result<Self> {
        for (k, _) in pairs {
            if !DEFAULTS.iter().any(|d| d.0 == k) {
                bail!("unknown key `{k}` in [numerics]");
            }
        }
        let get = |key: &str| -> Result<f64> {
            let src = pairs
                .iter()
                .rev()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.as_str())
                .unwrap_or_else(|| DEFAULTS.iter().find(|d| d.0 == key).expect("key in table").1);
            number(key, src)
        };
        let m = count("m", get("m")?)?;
        if !(3..=24).contains(&m) {
            bail!("`m` must lie in 3..=24, got {m}");
        }
        let loglog_rate = get("loglog_rate")?;
        if !(loglog_rate >= 0.0) {
            bail!("`loglog_rate` must not be negative");
        }
        Ok(Numerics {
            l: positive("L", get("L")?)?,
            m: m as u32,
            x_max: positive("X", get("X")?)?,
            delta: positive("delta", get("delta")?)?,
            sigma: positive("sigma", get("sigma")?)?,
            samples: count("N", get("N")?)?,
            eps_cluster: positive("eps_cluster", get("eps_cluster")?)?,
            loglog_rate,
            tol: positive("tol", get("tol")?)?,
            exact_tol: positive("exact_tol", get("exact_tol")?)?,
            zero_tol: positive("zero_tol", get("zero_tol")?)?,
            max_terms: count("max_terms", get("max_terms")?)?,
            budget: positive("budget", get("budget")?)?,
            shift_tail_tol: positive("shift_tail_tol", get("shift_tail_tol")?)?,
        })
    }

    fn render(&self) -> Vec<(&'static str, String)> {
        vec![
            ("L", format!("{:?}", self.l)),
            ("m", self.m.to_string()),
            ("X", format!("{:?}", self.x_max)),
            ("delta", format!("{:?}", self.delta)),
            ("sigma", format!("{:?}", self.sigma)),
            ("N", self.samples.to_string()),
            ("eps_cluster", format!("{:?}", self.eps_cluster)),
            ("loglog_rate", format!("{:?}", self.loglog_rate)),
            ("tol", format!("{:?}", self.tol)),
            ("exact_tol", format!("{:?}", self.exact_tol)),
            ("zero_tol", format!("{:?}", self.zero_tol)),
            ("max_terms", self.max_terms.to_string()),
            ("budget", format!("{:?}", self.budget)),
            ("shift_tail_tol", format!("{:?}", self.shift_tail_tol)),
        ]
    }
}

impl InstanceConfig {
    /// Reads an instance file, or the configuration embedded in a verdict file.
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        if text.lines().any(|l| l.trim() == "[config]") {
            return Self::from_embedded(&text);
        }
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let ini = Ini::load_from_str_noescape(text).map_err(|e| anyhow!("config syntax: {e}"))?;
        let mut p = None;
        let mut coefficients: [Option<String>; 5] = Default::default();
        let mut domain = (0.0, f64::INFINITY);
        let mut limits = Vec::new();
        let mut numerics = Vec::new();
        for (section, props) in ini.iter() {
            for (key, value) in props.iter() {
                match section {
                    None => match key {
                        "p" => p = Some(number("p", value)?),
                        _ => bail!("unknown top-level key `{key}`"),
                    },
                    Some("coefficients") => {
                        let k = COEFFICIENTS
                            .iter()
                            .position(|c| *c == key)
                            .ok_or_else(|| anyhow!("unknown coefficient `{key}`"))?;
                        Expr::parse(value).with_context(|| format!("coefficient `{key}`"))?;
                        coefficients[k] = Some(value.trim().to_string());
                    }
                    Some("domain") => match key {
                        "t_min" => domain.0 = number(key, value)?,
                        "t_max" => domain.1 = number(key, value)?,
                        _ => bail!("unknown key `{key}` in [domain]"),
                    },
                    Some("limits") => {
                        let (coef, end) =
                            key.split_once('.').ok_or_else(|| anyhow!("limit key `{key}` must read <coefficient>.<zero|infinity>"))?;
                        if !COEFFICIENTS.contains(&coef) {
                            bail!("unknown coefficient `{coef}` in [limits]");
                        }
                        let endpoint = match end {
                            "zero" | "0" => Endpoint::Zero,
                            "infinity" | "inf" => Endpoint::Infinity,
                            _ => bail!("limit endpoint must be `zero` or `infinity`, got `{end}`"),
                        };
                        let e = Expr::parse(value).with_context(|| format!("limit `{key}`"))?;
                        if !e.is_constant() {
                            bail!("limit `{key}` must be a constant");
                        }
                        let v = e.eval_constant().with_context(|| format!("limit `{key}`"))?;
                        limits.push(Limit { coefficient: coef.to_string(), endpoint, source: value.trim().to_string(), value: v });
                    }
                    Some("numerics") => numerics.push((key.to_string(), value.to_string())),
                    Some(other) => bail!("unknown section [{other}]"),
                }
            }
        }
        let p = p.ok_or_else(|| anyhow!("missing `p`"))?;
        if !(p > 1.0) || !p.is_finite() {
            bail!("`p` must lie in (1, inf), got {p}");
        }
        if !(domain.0 >= 0.0 && domain.1 > domain.0) {
            bail!("domain must satisfy 0 <= t_min < t_max");
        }
        let mut out: [String; 5] = Default::default();
        for (k, c) in coefficients.into_iter().enumerate() {
            out[k] = c.ok_or_else(|| anyhow!("missing coefficient `{}`", COEFFICIENTS[k]))?;
        }
        Ok(InstanceConfig { p, coefficients: out, domain, limits, numerics: Numerics::from_pairs(&numerics)? })
    }

    /// The effective configuration in the input format, defaults filled in.
    pub fn render(&self) -> String {
        let mut s = format!("p = {:?}\n\n[coefficients]\n", self.p);
        for (name, src) in COEFFICIENTS.iter().zip(&self.coefficients) {
            s.push_str(&format!("{name} = {src}\n"));
        }
        let t_max = if self.domain.1.is_infinite() { "inf".to_string() } else { format!("{:?}", self.domain.1) };
        s.push_str(&format!("\n[domain]\nt_min = {:?}\nt_max = {t_max}\n", self.domain.0));
        if !self.limits.is_empty() {
            s.push_str("\n[limits]\n");
            for l in &self.limits {
                let end = match l.endpoint {
                    Endpoint::Zero => "zero",
                    Endpoint::Infinity => "infinity",
                };
                s.push_str(&format!("{}.{end} = {}\n", l.coefficient, l.source));
            }
        }
        s.push_str("\n[numerics]\n");
        for (k, v) in self.numerics.render() {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }

    /// [`render`](Self::render) with every section moved under `config`.
    pub fn render_embedded(&self) -> String {
        let mut out = String::from("[config]\n");
        for line in self.render().lines() {
            match line.strip_prefix('[') {
                Some(rest) => out.push_str(&format!("[config.{rest}\n")),
                None => out.push_str(&format!("{line}\n")),
            }
        }
        out
    }

    /// Recovers the configuration embedded in a verdict file.
    pub fn from_embedded(text: &str) -> Result<Self> {
        let ini = Ini::load_from_str_noescape(text).map_err(|e| anyhow!("verdict syntax: {e}"))?;
        let mut src = String::new();
        for (section, props) in ini.iter() {
            let inner = match section {
                Some("config") => None,
                Some(s) => match s.strip_prefix("config.") {
                    Some(rest) => Some(rest),
                    None => continue,
                },
                None => continue,
            };
            if let Some(name) = inner {
                src.push_str(&format!("[{name}]\n"));
            }
            for (k, v) in props.iter() {
                src.push_str(&format!("{k} = {v}\n"));
            }
        }
        Self::parse(&src)
    }

    pub fn coefficient_set(&self) -> Result<CoefficientSet> {
        let mut fs = Vec::with_capacity(5);
        for (name, src) in COEFFICIENTS.iter().zip(&self.coefficients) {
            let mut f = SoFunction::parse(*name, src).with_context(|| format!("coefficient `{name}`"))?;
            if self.domain != (0.0, f64::INFINITY) {
                f = f.with_domain(self.domain.0, self.domain.1);
            }
            for l in self.limits.iter().filter(|l| l.coefficient == *name) {
                f = f.with_limit(l.endpoint, l.value);
            }
            fs.push(f);
        }
        let mut it = fs.into_iter();
        let mut next = || it.next().expect("five coefficients");
        Ok(CoefficientSet { a: next(), b: next(), c: next(), d: next(), omega: next() })
    }

    pub fn fiber(&self) -> FiberConfig {
        let n = &self.numerics;
        FiberConfig { sigma: n.sigma, samples: n.samples, eps_cluster: n.eps_cluster, loglog_rate: n.loglog_rate }
    }

    pub fn funcops(&self) -> FuncopsConfig {
        let n = &self.numerics;
        FuncopsConfig { tol: n.tol, exact_tol: n.exact_tol, fiber: self.fiber(), max_terms: n.max_terms }
    }

    pub fn fredholm(&self) -> FredholmConfig {
        let n = &self.numerics;
        FredholmConfig { funcops: self.funcops(), x_max: n.x_max, delta: n.delta, zero_tol: n.zero_tol }
    }

    pub fn grid(&self) -> LogGrid {
        LogGrid::symmetric(self.numerics.l, self.numerics.m)
    }
}

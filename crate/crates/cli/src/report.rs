//! Verdict files: sections of `key = value` lines, readable by the same
//! parser as instance files. The effective configuration is appended with
//! its sections renamed under `config`.

use std::fmt::Write;

use sio_core::fredholm::{FredholmVerdict, Status};
use sio_core::funcops::{InvertibilityReport, Margin};
use sio_core::Complex64;

use crate::config::InstanceConfig;

#[derive(Default)]
pub struct Report {
    text: String,
}

pub fn complex(z: Complex64) -> String {
    format!("{:?} {:?}", z.re, z.im)
}

pub fn status(s: Status) -> &'static str {
    match s {
        Status::Pass => "pass",
        Status::Fail => "fail",
        Status::Inconclusive => "inconclusive",
    }
}

impl Report {
    pub fn section(&mut self, name: &str) -> &mut Self {
        if !self.text.is_empty() {
            self.text.push('\n');
        }
        writeln!(self.text, "[{name}]").unwrap();
        self
    }

    pub fn kv(&mut self, key: &str, value: impl std::fmt::Display) -> &mut Self {
        writeln!(self.text, "{key} = {value}").unwrap();
        self
    }

    fn margin(&mut self, key: &str, m: &Margin) -> &mut Self {
        self.kv(key, format!("{:?}", m.value))
            .kv(&format!("{key}.exact"), m.exact)
            .kv(&format!("{key}.stable"), m.stable)
    }

    pub fn invertibility(&mut self, name: &str, operator: &str, r: &InvertibilityReport) -> &mut Self {
        self.section(name).kv("operator", operator).kv("verdict", r.verdict);
        let m = &r.margins;
        self.margin("inf_abs_a", &m.inf_abs_a)
            .margin("inf_abs_b", &m.inf_abs_b)
            .margin("lower.0", &m.lower[0])
            .margin("lower.inf", &m.lower[1])
            .margin("upper.0", &m.upper[0])
            .margin("upper.inf", &m.upper[1]);
        if let Some(c) = &r.contraction {
            self.kv("contraction.q", format!("{:?}", c.q))
                .kv("contraction.constant", format!("{:?}", c.constant))
                .kv("contraction.block", c.block);
        }
        for (k, n) in r.notes.iter().enumerate() {
            self.kv(&format!("note.{k}"), n);
        }
        self
    }

    pub fn fredholm(&mut self, v: &FredholmVerdict) -> &mut Self {
        self.invertibility("condition_i.plus", "aI - bW", &v.condition_i[0]);
        self.invertibility("condition_i.minus", "cI - dW", &v.condition_i[1]);
        let c = &v.condition_ii;
        let (zero, inf) = v.coverage();
        self.section("condition_ii")
            .kv("status", status(c.status))
            .kv("margin", format!("{:?}", c.margin))
            .kv("witness", c.fibers.get(c.witness).map(|m| m.id()).unwrap_or_default())
            .kv("coverage", if c.fibers.iter().all(|m| m.fiber.exact) { "exact" } else { "sampled" })
            .kv("fibers.0", zero)
            .kv("fibers.inf", inf);
        for m in &c.fibers {
            let f = &m.fiber;
            self.section(&format!("fiber.{}", m.id()))
                .kv("a", complex(f.values.a))
                .kv("b", complex(f.values.b))
                .kv("c", complex(f.values.c))
                .kv("d", complex(f.values.d))
                .kv("omega", format!("{:?}", f.values.omega))
                .kv("exact", f.exact)
                .kv("samples", f.source_log_t.len())
                .kv("cluster_radius", format!("{:?}", f.cluster_radius))
                .kv("margin", format!("{:?}", m.margin))
                .kv("location", m.location)
                .kv("delta", format!("{:?}", m.delta))
                .kv("status", status(m.status));
        }
        self
    }

    pub fn append(&mut self, other: Report) {
        if !other.text.is_empty() {
            self.text.push('\n');
            self.text.push_str(&other.text);
        }
    }

    pub fn finish(mut self, cfg: &InstanceConfig) -> String {
        self.text.push('\n');
        self.text.push_str(&cfg.render_embedded());
        self.text
    }
}

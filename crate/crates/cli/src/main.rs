//! `sio`: batch front end for shifted singular integral operators.
//!
//! Exit codes: 0 fredholm / invertible / accepted / passed, 1 not fredholm /
//! not invertible / rejected / failed, 2 inconclusive, 3 error.

mod config;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use log::info;
use sio_core::bundled;
use sio_core::fredholm::{Overall, ShiftedSio};
use sio_core::funcops::Verdict;
use sio_core::limitops::{dilation_limit_experiment, snap_source_sequence, trace_csv};
use sio_core::mellin::Route;
use sio_core::selftest::{self, Faults};
use sio_core::so::{default_log_r_grid, estimate_fiber_points, verify_so, Endpoint, DEFAULT_LAMBDA, DEFAULT_SO_TOL};

use config::InstanceConfig;
use report::Report;

#[derive(Parser)]
#[command(name = "sio", version, about = "Fredholm checks for singular integral operators with shifts on L^p(R+)")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fredholm verdict for N = (aI - bW)P+ + (cI - dW)P-.
    Check {
        #[arg(long)]
        config: PathBuf,
        /// Verdict file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// |n| on the symbol grid for every fiber point, as CSV.
    SymbolDump {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// `0` or `inf`; all endpoints when absent.
        #[arg(long, value_parser = parse_endpoint)]
        endpoint: Option<Endpoint>,
        /// Fiber index within the endpoint.
        #[arg(long, requires = "endpoint")]
        fiber: Option<usize>,
    },
    /// Slow-oscillation test for each coefficient.
    VerifySo {
        #[arg(long)]
        config: PathBuf,
        /// Verdict file; the moduli go to `<out>.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_parser = parse_endpoint)]
        endpoint: Option<Endpoint>,
    },
    /// Invertibility of aI - bW and cI - dW, with Neumann residuals.
    Invertibility {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dilation trace toward the limit operator of one fiber point, as CSV.
    LimitopTest {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_parser = parse_endpoint, default_value = "inf")]
        endpoint: Endpoint,
        /// Fiber index; the one with the longest source sequence when absent.
        #[arg(long)]
        fiber: Option<usize>,
    },
    /// Built-in oracle suite.
    Selftest {
        #[arg(long, hide = true, default_value_t = 1.0)]
        fault_sp_scale: f64,
    },
}

fn parse_endpoint(s: &str) -> Result<Endpoint, String> {
    match s {
        "0" | "zero" => Ok(Endpoint::Zero),
        "inf" | "infinity" => Ok(Endpoint::Infinity),
        _ => Err(format!("expected `0` or `inf`, got `{s}`")),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn operator(cfg: &InstanceConfig) -> Result<ShiftedSio> {
    Ok(ShiftedSio::new(cfg.coefficient_set()?, cfg.p, cfg.numerics.shift_tail_tol)?)
}

fn verdict_code(v: Verdict) -> u8 {
    match v {
        Verdict::Invertible(_) => 0,
        Verdict::NotInvertible => 1,
        Verdict::Inconclusive => 2,
    }
}

fn check(config: &Path, out: Option<&Path>) -> Result<u8> {
    let cfg = InstanceConfig::load(config)?;
    let v = operator(&cfg)?.fredholm_check(&cfg.fredholm())?;
    let code = match v.overall {
        Overall::Fredholm => 0,
        Overall::NotFredholm => 1,
        Overall::Inconclusive => 2,
    };
    info!("{}: {}", config.display(), v.overall);
    let mut r = Report::default();
    r.section("verdict").kv("command", "check").kv("overall", v.overall).kv("exit_code", code);
    r.fredholm(&v);
    emit(out, &r.finish(&cfg))?;
    Ok(code)
}

fn symbol_dump(config: &Path, out: Option<&Path>, endpoint: Option<Endpoint>, fiber: Option<usize>) -> Result<u8> {
    let cfg = InstanceConfig::load(config)?;
    let csv = operator(&cfg)?.symbol_dump(&cfg.fredholm())?;
    let keep = |id: &str| match (endpoint, fiber) {
        (None, _) => true,
        (Some(e), None) => id.split(':').next() == Some(e.name()),
        (Some(e), Some(k)) => id == format!("{e}:{k}"),
    };
    let mut lines = csv.lines();
    let mut text = format!("{}\n", lines.next().unwrap_or_default());
    let mut rows = 0usize;
    for line in lines.filter(|l| keep(l.split(',').next().unwrap_or_default())) {
        text.push_str(line);
        text.push('\n');
        rows += 1;
    }
    if rows == 0 {
        bail!("no fiber point matches the selection");
    }
    emit(out, &text)?;
    Ok(0)
}

fn verify_so_cmd(config: &Path, out: Option<&Path>, endpoint: Option<Endpoint>) -> Result<u8> {
    let cfg = InstanceConfig::load(config)?;
    let set = cfg.coefficient_set()?;
    let endpoints = endpoint.map(|e| vec![e]).unwrap_or(Endpoint::BOTH.to_vec());
    let mut r = Report::default();
    let mut csv = String::from("function,endpoint,log_r,modulus\n");
    let mut all = true;
    let mut body = Report::default();
    for f in set.as_array() {
        for &e in &endpoints {
            let grid = default_log_r_grid(f, e, 16);
            body.section(&format!("so.{}.{e}", f.name()));
            match verify_so(f, DEFAULT_LAMBDA, e, &grid, DEFAULT_SO_TOL) {
                Ok(d) => {
                    all &= d.accepted;
                    body.kv("accepted", d.accepted);
                    if !d.note.is_empty() {
                        body.kv("note", &d.note);
                    }
                    for (u, m) in &d.trace {
                        csv.push_str(&format!("{},{e},{u:.17e},{m:.17e}\n", f.name()));
                    }
                }
                Err(err) => {
                    all = false;
                    body.kv("accepted", false).kv("note", err);
                }
            }
        }
    }
    let code = if all { 0 } else { 1 };
    r.section("verdict")
        .kv("command", "verify-so")
        .kv("overall", if all { "accepted" } else { "rejected" })
        .kv("exit_code", code)
        .kv("lambda", format!("{DEFAULT_LAMBDA:?}"))
        .kv("tol", format!("{DEFAULT_SO_TOL:?}"));
    r.append(body);
    emit(out, &r.finish(&cfg))?;
    if let Some(path) = out {
        let mut csv_path = path.as_os_str().to_owned();
        csv_path.push(".csv");
        emit(Some(Path::new(&csv_path)), &csv)?;
    }
    Ok(code)
}

fn invertibility(config: &Path, out: Option<&Path>) -> Result<u8> {
    let cfg = InstanceConfig::load(config)?;
    let op = operator(&cfg)?;
    let fcfg = cfg.funcops();
    // Neumann terms travel along the shift, hence the wider grid
    let tests = bundled::test_functions(cfg.grid().widened(4), cfg.p, 3);
    let mut body = Report::default();
    let mut codes = Vec::new();
    for (name, label, bin) in [("plus", "aI - bW", op.plus()), ("minus", "cI - dW", op.minus())] {
        let rep = bin.check_invertibility(&fcfg)?;
        codes.push(verdict_code(rep.verdict));
        body.invertibility(&format!("operator.{name}"), label, &rep);
        if matches!(rep.verdict, Verdict::Invertible(_)) {
            for (k, f) in tests.iter().enumerate() {
                let key = format!("residual.{k}");
                match bin.apply_inverse(&rep, f, cfg.numerics.budget, &fcfg) {
                    Ok(inv) => {
                        let res = bin.apply(&inv.value)?.sub(f)?.norm_lp(cfg.p);
                        body.kv(&key, format!("{res:?}")).kv(&format!("{key}.terms"), inv.terms);
                    }
                    Err(e) => {
                        body.kv(&key, format!("error: {e}"));
                    }
                }
            }
        }
    }
    let code = if codes.contains(&1) {
        1
    } else if codes.contains(&2) {
        2
    } else {
        0
    };
    let overall = ["invertible", "not-invertible", "inconclusive"][code as usize];
    let mut r = Report::default();
    r.section("verdict")
        .kv("command", "invertibility")
        .kv("overall", overall)
        .kv("exit_code", code)
        .kv("budget", format!("{:?}", cfg.numerics.budget));
    r.append(body);
    emit(out, &r.finish(&cfg))?;
    Ok(code)
}

fn limitop_test(config: &Path, out: Option<&Path>, endpoint: Endpoint, fiber: Option<usize>) -> Result<u8> {
    let cfg = InstanceConfig::load(config)?;
    let op = operator(&cfg)?;
    let set = cfg.coefficient_set()?;
    let fibers = estimate_fiber_points(&set, endpoint, &cfg.fiber())?;
    let fp = match fiber {
        Some(k) => fibers.get(k).ok_or_else(|| anyhow!("endpoint {endpoint} has {} fiber points", fibers.len()))?,
        None => fibers.iter().max_by_key(|f| f.source_log_t.len()).ok_or_else(|| anyhow!("no fiber points"))?,
    };
    let grid = cfg.grid().widened(4);
    let log_h = snap_source_sequence(&set, fp, grid.step(), cfg.numerics.eps_cluster)?;
    info!("{} dilations on {} points", log_h.len(), grid.len());
    let tests = bundled::test_functions(grid, cfg.p, 3);
    let rows = dilation_limit_experiment(&op, fp, &log_h, &tests, Route::Direct)?;
    emit(out, &trace_csv(&rows))?;
    Ok(0)
}

fn selftest_cmd(fault_sp_scale: f64) -> u8 {
    let checks = selftest::run(Faults { sp_scale: fault_sp_scale });
    let mut failed = 0;
    for c in &checks {
        println!("{} {} {}", if c.passed { "PASS" } else { "FAIL" }, c.id, c.detail);
        failed += !c.passed as usize;
    }
    println!("{} of {} checks passed", checks.len() - failed, checks.len());
    if failed == 0 {
        0
    } else {
        1
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Check { config, out } => check(&config, out.as_deref()),
        Command::SymbolDump { config, out, endpoint, fiber } => symbol_dump(&config, out.as_deref(), endpoint, fiber),
        Command::VerifySo { config, out, endpoint } => verify_so_cmd(&config, out.as_deref(), endpoint),
        Command::Invertibility { config, out } => invertibility(&config, out.as_deref()),
        Command::LimitopTest { config, out, endpoint, fiber } => limitop_test(&config, out.as_deref(), endpoint, fiber),
        Command::Selftest { fault_sp_scale } => Ok(selftest_cmd(fault_sp_scale)),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}

//! Command-line entry point.
//!
//! Exit codes: 0 when every assertion holds, 2 when one fails (the JSON
//! report lists the failures), 1 for usage and runtime errors.

mod config;
mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use beurling::appendix::{appendix_report, write_ledger_csv, ConvolutionOptions, DeviationMeasure};
use beurling::discretize::{augment, build_grid, check_bounds, monte_carlo, sample, BoundRanges, ExpSumTable, MonteCarloOptions};
use beurling::numeric::PrecisionContext;
use beurling::perron::{CompositeOptions, PerronProblem, VerticalOptions};
use beurling::saddle::{write_paths_csv, SaddleProblem};
use beurling::system::{build_system, ContinuousPrimeSystem};
use beurling::verify;
use beurling::zeta::{write_log_zeta_csv, CertificateOptions, Region, ZetaEvaluator};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde_json::{json, Value};

use config::Config;

#[derive(Parser, Debug)]
#[command(name = "beurling", version, about = "Numerical laboratory for a continuous Beurling prime system")]
struct Cli {
    /// `key = value` config file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<String>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for manifests, CSVs and JSON reports.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Construct the parameter sequence and write a manifest.
    Build {
        #[arg(long = "K", default_value_t = 2)]
        k_count: usize,
        #[arg(long, default_value_t = 3.0)]
        tau_floor: f64,
        #[arg(long, default_value_t = 256)]
        bits: usize,
        #[arg(long)]
        relaxed: bool,
    },
    /// Evaluate log ζ at points or certify a boundedness region.
    Zeta {
        #[command(flatten)]
        sys: SysArg,
        /// Point such as `1.5+100i`; repeatable.
        #[arg(long = "s")]
        points: Vec<String>,
        /// `hl` or `strip:K`.
        #[arg(long)]
        certify: Option<String>,
        #[arg(long, default_value_t = 1e6)]
        t_max: f64,
    },
    /// Locate saddle points and trace their descent paths.
    Saddles {
        #[command(flatten)]
        sys: SysArg,
        #[arg(long, default_value_t = 0)]
        k: usize,
        /// `auto` for |m| ≤ m_max, or a bound N for |m| ≤ N.
        #[arg(long, default_value = "auto")]
        m_range: String,
    },
    /// Perron inversion on the vertical line or the composite contour.
    Perron {
        #[command(flatten)]
        sys: SysArg,
        #[arg(long, default_value_t = 0)]
        k: usize,
        #[arg(long, value_enum, default_value_t = Mode::Composite)]
        mode: Mode,
        /// Evaluation point for the vertical mode.
        #[arg(long)]
        x: Option<f64>,
        #[arg(long, default_value_t = 2.0)]
        kappa: f64,
    },
    /// Sample a random discrete system and check its deviations.
    Discretize {
        #[command(flatten)]
        sys: SysArg,
        #[arg(long, default_value_t = 0)]
        k: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 1e6)]
        y_max: f64,
        /// Subset of the letters A, B, C.
        #[arg(long, default_value = "ABC")]
        check: String,
        /// Monte Carlo seeds; 0 skips the ensemble run.
        #[arg(long, default_value_t = 0)]
        seeds: u64,
        #[arg(long, default_value_t = 1000)]
        mean_seeds: u64,
        #[arg(long, default_value_t = 25)]
        lattice: usize,
        /// Add the phase-correcting prime.
        #[arg(long)]
        augment: bool,
    },
    /// Convolution powers of a toy deviation measure.
    Appendix {
        #[arg(long, default_value_t = 0.5)]
        theta: f64,
        /// `start:end:count`; an `e` prefix means a power of e.
        #[arg(long, default_value = "e4:e14:10")]
        x_grid: String,
        #[arg(long, default_value_t = 8)]
        n_top: usize,
        #[arg(long, default_value_t = 1e-3)]
        h: f64,
    },
    /// Run the acceptance suite.
    VerifyAll {
        #[arg(long)]
        quick: bool,
        /// Restrict to these criteria.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
}

#[derive(Args, Debug)]
struct SysArg {
    /// System manifest written by `build`.
    #[arg(long = "sys")]
    manifest: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Mode {
    Composite,
    Vertical,
}

fn subcommand_name(args: &[String]) -> Option<&str> {
    const NAMES: [&str; 7] = ["build", "zeta", "saddles", "perron", "discretize", "appendix", "verify-all"];
    args.iter().skip(1).map(String::as_str).find(|a| NAMES.contains(a))
}

fn config_path(args: &[String]) -> Option<String> {
    let i = args.iter().position(|a| a == "--config" || a.starts_with("--config="))?;
    match args[i].split_once('=') {
        Some((_, v)) => Some(v.to_string()),
        None => args.get(i + 1).cloned(),
    }
}

/// Splices config-file flags after the subcommand so the user's flags win.
fn merged_args(args: Vec<String>) -> Result<Vec<String>> {
    let Some(path) = config_path(&args) else { return Ok(args) };
    let cfg = Config::load(&path)?;
    let Some(cmd) = subcommand_name(&args).map(str::to_string) else { return Ok(args) };
    let extra = cfg.args_for(&cmd, &args);
    let at = args.iter().position(|a| *a == cmd).map_or(args.len(), |i| i + 1);
    let mut out = args[..at].to_vec();
    out.extend(extra);
    out.extend_from_slice(&args[at..]);
    Ok(out)
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    let args = match merged_args(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn load_system(p: &Path) -> Result<ContinuousPrimeSystem> {
    let text = fs::read_to_string(p).with_context(|| format!("reading manifest {}", p.display()))?;
    Ok(ContinuousPrimeSystem::from_manifest(&text)?)
}

fn parse_complex(s: &str) -> Result<Complex64> {
    let t = s.replace(' ', "");
    let Some(body) = t.strip_suffix('i') else {
        return Ok(Complex64::new(t.parse().with_context(|| format!("bad point {s}"))?, 0.0));
    };
    // split at the last sign that is not part of an exponent
    let b = body.as_bytes();
    let cut = (1..b.len()).rev().find(|&i| (b[i] == b'+' || b[i] == b'-') && !matches!(b[i - 1], b'e' | b'E'));
    let (re, im) = match cut {
        Some(i) => (&body[..i], &body[i..]),
        None => ("0", body),
    };
    let im = match im {
        "" | "+" => "1",
        "-" => "-1",
        v => v,
    };
    Ok(Complex64::new(re.parse().with_context(|| format!("bad point {s}"))?, im.parse().with_context(|| format!("bad point {s}"))?))
}

fn parse_x_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, n] = parts[..] else { bail!("x grid `{s}` is not start:end:count") };
    let val = |v: &str| -> Result<f64> {
        Ok(match v.strip_prefix('e') {
            Some(p) => p.parse::<f64>()?.exp(),
            None => v.parse()?,
        })
    };
    let (a, b, n): (f64, f64, usize) = (val(a)?, val(b)?, n.parse()?);
    if !(a > 1.0 && b >= a && n >= 1) {
        bail!("x grid `{s}` needs 1 < start ≤ end and count ≥ 1");
    }
    Ok((0..n).map(|i| if n == 1 { a } else { (a.ln() + (b.ln() - a.ln()) * i as f64 / (n - 1) as f64).exp() }).collect())
}

fn emit(out: &Path, command: &str, failures: Vec<String>, body: Value) -> Result<bool> {
    let text = report::to_string(&report::envelope(command, &failures, body));
    fs::create_dir_all(out)?;
    fs::write(out.join(format!("{command}.json")), &text)?;
    println!("{text}");
    for f in &failures {
        eprintln!("FAIL {f}");
    }
    Ok(failures.is_empty())
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let out = cli.out.as_path();
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    match cli.command {
        Command::Build { k_count, tau_floor, bits, relaxed } => {
            let (sys, rep) = build_system(k_count, tau_floor, relaxed, PrecisionContext::new(bits))?;
            let path = out.join("system.manifest");
            fs::write(&path, sys.to_manifest())?;
            let failures = rep
                .terms
                .iter()
                .flat_map(|t| {
                    [("a", t.pass_a), ("b", t.pass_b), ("c", t.pass_c), ("d", t.pass_d)]
                        .into_iter()
                        .filter(|p| !p.1)
                        .map(move |p| format!("term {} property ({})", t.k, p.0))
                })
                .collect();
            emit(out, "build", failures, json!({"manifest": path, "terms": rep.terms}))
        }
        Command::Zeta { sys, points, certify, t_max } => {
            let s = load_system(&sys.manifest)?;
            let z = ZetaEvaluator::new(&s)?;
            let pts = points.iter().map(|p| parse_complex(p)).collect::<Result<Vec<_>>>()?;
            let rows = z.log_zeta_table(&pts);
            write_log_zeta_csv(&out.join("log_zeta.csv"), &rows)?;
            let mut failures = Vec::new();
            let values: Vec<Value> = rows
                .iter()
                .map(|(sg, t, v)| match v {
                    Ok(c) => json!({"sigma": sg, "t": t, "re_log_zeta": c.re, "im_log_zeta": c.im}),
                    Err(e) => json!({"sigma": sg, "t": t, "error": e.to_string()}),
                })
                .collect();
            let cert = match certify.as_deref() {
                None => Value::Null,
                Some(c) => {
                    let region = match c {
                        "hl" => Region::Hl { t_max },
                        _ => match c.strip_prefix("strip:").map(str::parse::<usize>) {
                            Some(Ok(k)) => Region::Strip(k),
                            _ => bail!("--certify takes `hl` or `strip:K`, got `{c}`"),
                        },
                    };
                    let r = z.ghl_bound_certificate(region, CertificateOptions::default())?;
                    if !r.pass {
                        failures.push(format!("certificate ratio {} above 1", r.ratio));
                    }
                    serde_json::to_value(r)?
                }
            };
            emit(out, "zeta", failures, json!({"points": values, "certificate": cert}))
        }
        Command::Saddles { sys, k, m_range } => {
            let s = load_system(&sys.manifest)?;
            let p = SaddleProblem::new(&s, k)?;
            let bound = match m_range.as_str() {
                "auto" => p.m_max(),
                v => v.parse::<i64>().context("--m-range takes `auto` or an integer")?,
            };
            if bound > p.m_study_max() {
                bail!("|m| ≤ {bound} exceeds the study range {}", p.m_study_max());
            }
            let mut failures = Vec::new();
            let mut saddles = Vec::new();
            let mut paths = Vec::new();
            for m in -bound..=bound {
                let sp = p.find_saddle(m)?;
                let path = p.trace_descent(&sp)?;
                if m.abs() <= p.m_max() {
                    for (name, ok) in
                        [("Im f constant", path.im_f_ok()), ("Re f monotone", path.re_f_monotone), ("tangent", path.tangent_ok())]
                    {
                        if !ok {
                            failures.push(format!("m = {m}: {name}"));
                        }
                    }
                }
                saddles.push(p.summary(&sp));
                paths.push(path);
            }
            let csv = out.join(format!("paths_k{k}.csv"));
            write_paths_csv(&csv, &paths)?;
            let phase = p.phase_report()?;
            if !phase.pass {
                failures.push("phase distance above pi/8".into());
            }
            emit(out, "saddles", failures, json!({"k": k, "m_max": p.m_max(), "saddles": saddles, "phase": phase, "paths_csv": csv}))
        }
        Command::Perron { sys, k, mode, x, kappa } => {
            let s = load_system(&sys.manifest)?;
            let pp = PerronProblem::continuous(&s)?;
            match mode {
                Mode::Composite => {
                    let c = pp.composite(&s, k, CompositeOptions::default())?;
                    let mut failures = Vec::new();
                    if !c.closes {
                        failures.push("contour does not close".into());
                    }
                    if !c.delta0_negative {
                        failures.push("Delta_0 integrand changes sign".into());
                    }
                    emit(out, "perron", failures, serde_json::to_value(&c)?)
                }
                Mode::Vertical => {
                    let x = x.context("--x is required in vertical mode")?;
                    let r = pp.vertical(x, kappa, VerticalOptions::default())?;
                    emit(out, "perron", Vec::new(), serde_json::to_value(&r)?)
                }
            }
        }
        Command::Discretize { sys, k, seed, y_max, check, seeds, mean_seeds, lattice, augment: aug } => {
            let check = check.to_ascii_uppercase();
            if check.chars().any(|c| !"ABC".contains(c)) {
                bail!("--check takes letters from ABC, got `{check}`");
            }
            let s = load_system(&sys.manifest)?;
            let grid = build_grid(&s)?;
            let sp = SaddleProblem::new(&s, k)?;
            let c2 = sp.compute_c_doubleprime(sp.find_saddle(0)?.w.re);
            let ranges = BoundRanges::for_term(&s, k, c2, 1e2, y_max, lattice)?;
            let table = ExpSumTable::new(grid.measure(), &ranges)?;
            let draw = sample(&grid, seed, y_max)?;
            let dev = check_bounds(&draw, &grid, &ranges, &table);
            let mut failures = Vec::new();
            if check.contains('A') && !dev.pass {
                failures.push(format!("seed {seed}: (A) constant {} above 10", dev.a_constant));
            }
            let ensemble = if seeds > 0 {
                let mc = monte_carlo(&grid, &ranges, &table, MonteCarloOptions { first_seed: 1, seeds, mean_seeds })?;
                for (letter, ok, what) in [
                    ('A', mc.a_pass, "(A) constant"),
                    ('B', mc.mean_pass, "mean deviation"),
                    ('C', mc.exceedance_pass, "exceedance frequency"),
                ] {
                    if check.contains(letter) && !ok {
                        failures.push(format!("ensemble {what}"));
                    }
                }
                serde_json::to_value(&mc)?
            } else {
                Value::Null
            };
            let (system, augmentation) = if aug {
                let (a, r) = augment(&draw, &grid, &s)?;
                if !r.pass {
                    failures.push("augmentation targets".into());
                }
                (a, serde_json::to_value(&r)?)
            } else {
                (draw, Value::Null)
            };
            let sample_path = out.join(format!("sample_seed{seed}.json"));
            let record = json!({"manifest": sys.manifest, "sample": system});
            fs::write(&sample_path, report::to_string(&record))?;
            emit(
                out,
                "discretize",
                failures,
                json!({
                    "seed": seed,
                    "j0": system.j0,
                    "primes": system.selected.len(),
                    "c_doubleprime": c2,
                    "window": ranges.n_window,
                    "deviation": dev,
                    "ensemble": ensemble,
                    "augmentation": augmentation,
                    "sample_file": sample_path,
                }),
            )
        }
        Command::Appendix { theta, x_grid, n_top, h } => {
            let xs = parse_x_grid(&x_grid)?;
            let de = DeviationMeasure::toy(theta);
            let r = appendix_report(&de, &xs, n_top, ConvolutionOptions { h, ..Default::default() })?;
            let csv = out.join("appendix.csv");
            write_ledger_csv(&csv, &r.rows)?;
            emit(out, "appendix", Vec::new(), json!({"csv": csv, "result": r}))
        }
        Command::VerifyAll { quick, only } => {
            let ids: Vec<u8> = if only.is_empty() { (1..=verify::CRITERIA).collect() } else { only };
            let mut results = Vec::new();
            let mut failures = Vec::new();
            for id in ids {
                let r = verify::run_criterion(id, quick);
                eprintln!("{}", r.line());
                if !r.pass {
                    failures.push(r.line());
                }
                results.push(r);
            }
            emit(out, "verify-all", failures, json!({"quick": quick, "criteria": results}))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_points() {
        assert_eq!(parse_complex("1.5+100i").unwrap(), Complex64::new(1.5, 100.0));
        assert_eq!(parse_complex("2-3.5i").unwrap(), Complex64::new(2.0, -3.5));
        assert_eq!(parse_complex("1e-3+2e+2i").unwrap(), Complex64::new(1e-3, 200.0));
        assert_eq!(parse_complex("2").unwrap(), Complex64::new(2.0, 0.0));
        assert_eq!(parse_complex("-i").unwrap(), Complex64::new(0.0, -1.0));
        assert!(parse_complex("x+yi").is_err());
    }

    #[test]
    fn x_grid() {
        let g = parse_x_grid("e4:e14:11").unwrap();
        assert_eq!(g.len(), 11);
        assert!((g[0].ln() - 4.0).abs() < 1e-12 && (g[10].ln() - 14.0).abs() < 1e-12 && (g[1].ln() - 5.0).abs() < 1e-12);
        assert_eq!(parse_x_grid("10:10:1").unwrap(), vec![10.0]);
        assert!(parse_x_grid("e4:e14").is_err());
        assert!(parse_x_grid("0.5:3:4").is_err());
    }

    #[test]
    fn config_flags_follow_the_subcommand() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.cfg");
        fs::write(&p, "[appendix]\ntheta = 0.25\nn-top = 3\n").unwrap();
        let args: Vec<String> =
            ["beurling", "--config", p.to_str().unwrap(), "appendix", "--n-top", "4"].iter().map(|s| s.to_string()).collect();
        let m = merged_args(args).unwrap();
        assert_eq!(&m[4..], ["--theta=0.25", "--n-top", "4"]);
        let cli = Cli::try_parse_from(&m).unwrap();
        assert!(matches!(cli.command, Command::Appendix { theta, n_top: 4, .. } if theta == 0.25));
    }
}

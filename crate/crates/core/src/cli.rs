//! Command-line front end. `run` returns the process exit code:
//! 0 when every checked invariant held, 1 when violations were reported,
//! 2 on configuration or runtime errors.

use crate::acceptance::run_all;
use crate::config::{resolve, ConfigError, Resolved, RunConfig};
use crate::detect::{classify_point, write_results_csv};
use crate::domain::Point;
use crate::geometry::{orbit_geometry, write_geometry_csv, GeometryError};
use crate::linearization::{
    classify_fixed_point, gamma_estimate, locate_fixed_points, period_blowup_probe, GammaConfig,
};
use crate::pfunc::{
    build_period_field, check_regularity, detect_generator, probe_conditions, verify_p_function, GroupKind,
};
use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde_json::json;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const DEFAULT_SEED: u64 = 0x5eed;

#[derive(Debug, Parser)]
#[command(name = "flowperiod", version, about = "Period functions of flows")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory for reports.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Overrides the seed in the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Multiplies detector and verification tolerances.
    #[arg(long, global = true, default_value_t = 1.0)]
    pub tol_scale: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Classify a batch of points: fixed, periodic or non-periodic.
    Classify,
    /// Build the period function over a grid and verify it.
    Field,
    /// Divide the period function down to the generator and run the Z_p tests.
    Generator,
    /// Locate fixed points and classify their linear parts.
    Fixedpoints,
    /// Length, diameter and speed inequalities of sampled orbits.
    Geometry,
    /// Conditions (A) to (E) and period blow-up near fixed points.
    Probe,
    /// Run the acceptance suite.
    VerifyPaper,
}

struct Ctx {
    cfg: RunConfig,
    flow: Resolved,
    seed: u64,
    out: PathBuf,
}

fn write_csv_with_seed(path: &Path, seed: u64, f: impl FnOnce(&mut Vec<u8>) -> Result<(), csv::Error>) -> Result<()> {
    let mut buf = format!("# seed={seed}\n").into_bytes();
    f(&mut buf)?;
    fs::write(path, buf).with_context(|| format!("writing {}", path.display()))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn classify(ctx: &Ctx) -> Result<bool> {
    let pts = ctx.flow.points(&ctx.cfg, ctx.seed);
    let res: Vec<_> = pts.par_iter().map(|x| classify_point(&ctx.flow.flow, x, &ctx.flow.detector)).collect();
    write_csv_with_seed(&ctx.out.join("classify.csv"), ctx.seed, |b| write_results_csv(b, &pts, &res))?;
    Ok(false)
}

fn field(ctx: &Ctx) -> Result<bool> {
    let r = &ctx.flow;
    let grid = r.grid(ctx.cfg.grid.cells);
    let f = build_period_field(&r.flow, &grid, &r.field)?;
    write_csv_with_seed(&ctx.out.join("field.csv"), ctx.seed, |b| f.write_csv(b))?;
    let theta = f.theta_fn(&r.flow, &r.detector);
    let pts: Vec<Point> = f.grid.points().to_vec();
    let ver = verify_p_function(&r.flow, &pts, &|x| theta(x), r.field.verify_tol);
    let reg = check_regularity(&r.flow, &f, &r.field);
    write_json(
        &ctx.out.join("field.json"),
        &json!({
            "seed": ctx.seed,
            "flow": r.name,
            "outcome": f.outcome,
            "notes": f.notes,
            "grid_points": f.len(),
            "max_residual": ver.max_residual,
            "inconclusive": ver.inconclusive,
            "verified": ver.passed,
            "regular": reg.regular,
        }),
    )?;
    Ok(!(ver.passed && reg.regular))
}

fn generator(ctx: &Ctx) -> Result<bool> {
    let r = &ctx.flow;
    let grid = r.grid(ctx.cfg.grid.cells);
    let f = build_period_field(&r.flow, &grid, &r.field)?;
    let rep = detect_generator(&r.flow, &f, ctx.cfg.primes_up_to, ctx.cfg.samples, &r.field);
    write_csv_with_seed(&ctx.out.join("generator.csv"), ctx.seed, |b| rep.generator.write_csv(b))?;
    let bad_identity = rep
        .final_tests
        .iter()
        .any(|t| t.max_pth_iterate_displacement >= 10.0 * r.field.verify_tol);
    let bad_residual = rep.generator.max_residual() >= r.field.verify_tol;
    write_json(
        &ctx.out.join("generator.json"),
        &json!({
            "seed": ctx.seed,
            "flow": r.name,
            "group": match rep.group { GroupKind::Trivial => "trivial", GroupKind::Multiples => "multiples" },
            "divisions": rep.divisions,
            "tested_primes": rep.tested_primes,
            "max_residual": rep.generator.max_residual(),
            "zp_tests": rep.final_tests,
        }),
    )?;
    Ok(bad_identity || bad_residual)
}

fn fixed_points(ctx: &Ctx) -> Result<Vec<Point>> {
    let r = &ctx.flow;
    let grid = r.grid(ctx.cfg.grid.cells);
    Ok(locate_fixed_points(&r.flow, &grid, r.detector.fixed_tol, &ctx.cfg.linearization))
}

fn fixedpoints(ctx: &Ctx) -> Result<bool> {
    let r = &ctx.flow;
    let lin = &ctx.cfg.linearization;
    let probe = &ctx.cfg.probe;
    let mut reports = Vec::new();
    for z in fixed_points(ctx)? {
        let cls = classify_fixed_point(&r.flow, &z, lin);
        let gamma = gamma_estimate(&r.flow, &z, r.detector.horizon.min(10.0), &probe.radii, lin, &GammaConfig::default());
        let blowup = period_blowup_probe(&r.flow, &z, &probe.region, &probe.radii, probe.threshold, &r.detector);
        let (matrix, eigenvalues, blocks) = match &cls.linear_part {
            Some(lp) => (
                json!(lp.matrix.row_iter().map(|row| row.iter().copied().collect::<Vec<f64>>()).collect::<Vec<_>>()),
                json!(lp.eigenvalues.iter().map(|e| [e.re, e.im]).collect::<Vec<_>>()),
                json!(lp.blocks),
            ),
            None => (json!(null), json!(null), json!(null)),
        };
        reports.push(json!({
            "fixed_point": z,
            "matrix": matrix,
            "eigenvalues": eigenvalues,
            "blocks": blocks,
            "verdict": cls.verdict,
            "detail": cls.detail,
            "gamma_curve": gamma.curve,
            "quadratic": gamma.quadratic,
            "blowup_table": blowup,
        }));
    }
    write_json(&ctx.out.join("fixedpoints.json"), &json!({ "seed": ctx.seed, "flow": r.name, "fixed_points": reports }))?;
    Ok(false)
}

fn geometry(ctx: &Ctx) -> Result<bool> {
    let r = &ctx.flow;
    let pts = ctx.flow.points(&ctx.cfg, ctx.seed);
    let res: Vec<_> = pts.par_iter().map(|x| orbit_geometry(&r.flow, x, &r.detector, ctx.cfg.quad_n)).collect();
    let mut rows = Vec::new();
    let mut skipped = 0;
    for g in res {
        match g {
            Ok(g) => rows.push(g),
            Err(GeometryError::NotPeriodic(..)) => skipped += 1,
            Err(e) => return Err(e.into()),
        }
    }
    write_csv_with_seed(&ctx.out.join("geometry.csv"), ctx.seed, |b| write_geometry_csv(b, &rows))?;
    let violations = rows.iter().filter(|g| !g.inequalities_hold()).count();
    write_json(
        &ctx.out.join("geometry.json"),
        &json!({ "seed": ctx.seed, "flow": r.name, "orbits": rows.len(), "not_periodic": skipped, "violations": violations }),
    )?;
    Ok(violations > 0)
}

fn probe(ctx: &Ctx) -> Result<bool> {
    let r = &ctx.flow;
    let p = &ctx.cfg.probe;
    let grid = r.grid(ctx.cfg.grid.cells);
    let f = build_period_field(&r.flow, &grid, &r.field)?;
    let g = detect_generator(&r.flow, &f, ctx.cfg.primes_up_to, ctx.cfg.samples, &r.field).generator;
    let theta = g.theta_fn(&r.flow, &r.detector);
    let zs = fixed_points(ctx)?;
    let samples = ctx.flow.points(&ctx.cfg, ctx.seed);
    let mut cond_cfg = p.conditions.clone();
    cond_cfg.detector = r.detector.clone();
    let conditions = probe_conditions(&r.flow, &theta, &samples, &zs, p.alpha, &cond_cfg);
    let blowup: Vec<_> = zs
        .iter()
        .map(|z| period_blowup_probe(&r.flow, z, &p.region, &p.radii, p.threshold, &r.detector))
        .collect();
    write_json(
        &ctx.out.join("probe.json"),
        &json!({ "seed": ctx.seed, "flow": r.name, "conditions": conditions, "blowup": blowup }),
    )?;
    Ok(false)
}

fn verify_paper(out: &Path, seed: u64) -> Result<bool> {
    let results = run_all(seed);
    let mut summary = String::new();
    for r in &results {
        summary.push_str(&r.line());
        summary.push('\n');
        for d in &r.details {
            summary.push_str(&format!("    {d}\n"));
        }
    }
    print!("{summary}");
    fs::write(out.join("acceptance.txt"), &summary)?;
    write_json(&out.join("acceptance.json"), &json!({ "seed": seed, "criteria": results }))?;
    Ok(results.iter().any(|r| !r.passed))
}

fn execute(cli: &Cli) -> Result<bool> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring threads")?;
    }
    if !(cli.tol_scale.is_finite() && cli.tol_scale > 0.0) {
        return Err(ConfigError::Invalid("--tol-scale must be positive".into()).into());
    }
    fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let cfg = match &cli.config {
        Some(path) => Some(RunConfig::from_path(path)?),
        None if cli.command == Command::VerifyPaper => None,
        None => return Err(ConfigError::Invalid("--config is required".into()).into()),
    };
    let seed = cli.seed.or(cfg.as_ref().and_then(|c| c.seed)).unwrap_or(DEFAULT_SEED);
    let Some(cfg) = cfg else { return verify_paper(&cli.out, seed) };
    let flow = resolve(&cfg, cli.tol_scale)?;
    let ctx = Ctx { cfg, flow, seed, out: cli.out.clone() };
    match cli.command {
        Command::Classify => classify(&ctx),
        Command::Field => field(&ctx),
        Command::Generator => generator(&ctx),
        Command::Fixedpoints => fixedpoints(&ctx),
        Command::Geometry => geometry(&ctx),
        Command::Probe => probe(&ctx),
        Command::VerifyPaper => verify_paper(&ctx.out, seed),
    }
}

pub fn run(cli: &Cli) -> i32 {
    match execute(cli) {
        Ok(false) => 0,
        Ok(true) => {
            eprintln!("violations found; see the reports in {}", cli.out.display());
            1
        }
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "error: {e:#}");
            2
        }
    }
}

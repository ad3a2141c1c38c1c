//! The end-to-end acceptance suite: eight criteria over the gallery flows,
//! each with a runtime budget. Used by the `verify-paper` command and the
//! `acceptance` test target.

use crate::detect::classify_point;
use crate::domain::{Domain, Point};
use crate::gallery::{gallery_get, GalleryEntry, GalleryParams, TruePeriod};
use crate::geometry::{
    dress_bound_check, hoffman_mann_check, orbit_geometry, planar_rotation, CyclicActionSample, QUAD_N,
};
use crate::grid::Grid;
use crate::linearization::{
    classify_fixed_point, period_blowup_probe, region_directions, BlockKind, LinearizationConfig, SampleRegion,
    Verdict,
};
use crate::pfunc::{
    build_period_field, circle_action, detect_generator, extend_period_function, verify_p_function,
    zp_divisibility_test, ExtendConfig, FieldConfig, PeriodFunctionField,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::TAU;
use std::time::Instant;

pub const CRITERIA: [(u8, &str); 8] = [
    (1, "seifert dichotomy"),
    (2, "C0/C1 contrast"),
    (3, "eigenstructure"),
    (4, "period blow-up"),
    (5, "orbit inequalities"),
    (6, "circle action"),
    (7, "property suite"),
    (8, "diameter bounds"),
];

#[derive(Clone, Debug, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: String,
    /// Every check held and the runtime stayed within the limit.
    pub passed: bool,
    pub checks_passed: bool,
    pub elapsed_s: f64,
    pub limit_s: Option<f64>,
    pub details: Vec<String>,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        let limit = self.limit_s.map_or(String::new(), |l| format!(" / {l:.0} s"));
        format!(
            "{} criterion {} ({}): {:.2} s{limit}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.elapsed_s
        )
    }
}

#[derive(Default)]
struct Checks {
    ok: bool,
    details: Vec<String>,
}

impl Checks {
    fn new() -> Self {
        Checks { ok: true, details: Vec::new() }
    }

    fn check(&mut self, cond: bool, msg: impl Into<String>) {
        let msg = msg.into();
        self.ok &= cond;
        self.details.push(format!("[{}] {msg}", if cond { "ok" } else { "violated" }));
    }

    fn note(&mut self, msg: impl Into<String>) {
        self.details.push(msg.into());
    }
}

fn r2(x: &[f64]) -> f64 {
    x[0] * x[0] + x[1] * x[1]
}

fn entry(name: &str, params: GalleryParams) -> GalleryEntry {
    gallery_get(name, &params).expect("gallery entry")
}

fn field_cfg(e: &GalleryEntry) -> FieldConfig {
    FieldConfig::with_detector(e.detector.clone())
}

fn build(e: &GalleryEntry, grid: &Grid, c: &mut Checks) -> Option<PeriodFunctionField> {
    match build_period_field(&e.flow, grid, &field_cfg(e)) {
        Ok(f) => Some(f),
        Err(err) => {
            c.check(false, format!("{}: field construction failed: {err}", e.name));
            None
        }
    }
}

fn max_abs_dev(f: &PeriodFunctionField, target: impl Fn(&[f64]) -> f64, skip_fixed: bool) -> f64 {
    (0..f.len())
        .filter(|&i| !(skip_fixed && f.is_fixed(i)))
        .map(|i| (f.theta[i] - target(f.grid.point(i))).abs())
        .fold(0.0, f64::max)
}

fn c0_field() -> (GalleryEntry, Grid) {
    let e = entry("c0_disk", GalleryParams::default());
    let mask = e.sample_mask.clone();
    let grid = Grid::over_domain(&e.domain, 256, move |x| mask(x));
    (e, grid)
}

fn annulus_grid(e: &GalleryEntry, inner: f64, n: usize) -> Grid {
    Grid::over_domain(&e.domain, n, move |x| (inner * inner..=1.0 + 1e-12).contains(&r2(x)))
}

fn seifert_grid(e: &GalleryEntry, n: usize) -> Grid {
    let mask = e.sample_mask.clone();
    Grid::over_domain(&e.domain, n, move |x| mask(x))
}

fn criterion_1(c: &mut Checks) {
    for k in [2u32, 3, 5] {
        let t = Instant::now();
        let e = entry("seifert", GalleryParams::k(k));
        let grid = seifert_grid(&e, 40);
        let Some(f) = build(&e, &grid, c) else { continue };
        let rep = detect_generator(&e.flow, &f, 7, 400, &field_cfg(&e));
        let g = &rep.generator;
        let kf = k as f64;
        let dev = max_abs_dev(g, |_| kf, false);
        c.check(dev < 1e-5, format!("k={k}: {} grid points, max |θ - k| = {dev:.3e}", g.len()));
        let central: Vec<usize> = (0..g.len()).filter(|&i| r2(g.grid.point(i)) == 0.0).collect();
        let mult_ok = (0..g.len()).all(|i| g.multiplier[i] == if central.contains(&i) { k } else { 1 });
        c.check(
            mult_ok && !central.is_empty(),
            format!("k={k}: multiplier {k} on the {} central-orbit nodes, 1 elsewhere", central.len()),
        );
        let none = rep.divisions.is_empty() && rep.final_tests.iter().all(|z| !z.divisible);
        let disp: Vec<String> = rep
            .final_tests
            .iter()
            .map(|z| format!("p={}: {:.2e}", z.p, z.max_displacement))
            .collect();
        c.check(none, format!("k={k}: θ/p not a period function for p ≤ 7 (max |d(x) - x| {})", disp.join(", ")));
        let el = t.elapsed().as_secs_f64();
        c.check(el < 60.0, format!("k={k}: {el:.2} s (limit 60 s)"));
    }
}

fn criterion_2(c: &mut Checks) {
    let (e, grid) = c0_field();
    if let Some(f) = build(&e, &grid, c) {
        let g = detect_generator(&e.flow, &f, 7, 300, &field_cfg(&e)).generator;
        let dev = max_abs_dev(&g, r2, true);
        c.check(dev < 1e-4, format!("c0_disk: {} nodes, max |θ - |z|²| = {dev:.3e}", g.len()));
        let origin = g.grid.nearest(&[0.0, 0.0]).expect("origin");
        c.check(g.theta[origin] < 1e-4, format!("c0_disk: θ(0) = {:.3e}", g.theta[origin]));
    }

    let e = entry("c_inf_disk", GalleryParams::default());
    let grid = annulus_grid(&e, 0.2, 64);
    if let Some(f) = build(&e, &grid, c) {
        let g = detect_generator(&e.flow, &f, 7, 300, &field_cfg(&e)).generator;
        let rel = (0..g.len())
            .map(|i| (g.theta[i] * r2(g.grid.point(i)) - 1.0).abs())
            .fold(0.0, f64::max);
        c.check(rel < 1e-4, format!("c_inf_disk annulus 0.2..1: {} nodes, max relative error {rel:.3e}", g.len()));
        let det = e.detector.clone().with_horizon(2000.0);
        let cfg = ExtendConfig { allow_continuation: true, ..Default::default() };
        let target = vec![Point(vec![0.03, 0.0])];
        match extend_period_function(&e.flow, &g, &target, &det, &cfg) {
            Ok(ext) => c.check(
                ext[0].value > 1e3 && ext[0].residual < 1e-6,
                format!("c_inf_disk: θ at |z| = 0.03 is {:.2} (residual {:.1e})", ext[0].value, ext[0].residual),
            ),
            Err(err) => c.check(false, format!("c_inf_disk: extension to |z| = 0.03 failed: {err}")),
        }
    }
}

fn criterion_3(c: &mut Checks) {
    let lin = LinearizationConfig::default();
    for beta in [1.0, 3.0, TAU] {
        let e = entry("rotation", GalleryParams::beta(beta));
        let cls = classify_fixed_point(&e.flow, &[0.0, 0.0], &lin);
        let err = cls.linear_part.as_ref().map_or(f64::INFINITY, |lp| {
            let mut im: Vec<f64> = lp.eigenvalues.iter().map(|z| z.im).collect();
            im.sort_by(f64::total_cmp);
            let re = lp.eigenvalues.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
            if im.len() == 2 { re.max((im[0] + beta).abs()).max((im[1] - beta).abs()) } else { f64::INFINITY }
        });
        c.check(
            cls.verdict == Verdict::PeriodicType && err < 1e-7,
            format!("rotation β={beta:.4}: {:?}, eigenvalue error {err:.1e}", cls.verdict),
        );
    }

    let ham = entry("hamiltonian_even", GalleryParams::b(2));
    let cls = classify_fixed_point(&ham.flow, &[0.0, 0.0], &lin);
    let j2 = cls.linear_part.as_ref().is_some_and(|lp| {
        lp.blocks.len() == 1 && lp.blocks[0].size == 2 && matches!(lp.blocks[0].kind, BlockKind::Real { lambda } if lambda == 0.0)
    });
    c.check(cls.verdict == Verdict::DegenerateBlock && j2, format!("hamiltonian_even b=2: {:?}, {}", cls.verdict, cls.detail));

    let saddle = entry("saddle", GalleryParams::default());
    let cls = classify_fixed_point(&saddle.flow, &[0.0, 0.0], &lin);
    c.check(cls.verdict == Verdict::HyperbolicPart, format!("saddle: {:?}", cls.verdict));

    for e in [&ham, &saddle] {
        let grid = Grid::over_domain(&Domain::cube(2, 0.5), 12, |_| true);
        if let Some(f) = build(e, &grid, c) {
            let m = (0..f.len()).filter(|&i| !f.is_fixed(i)).map(|i| f.theta[i].abs()).fold(0.0, f64::max);
            c.check(m < 1e-6, format!("{}: max |θ| off Fix = {m:.1e} ({:?})", e.name, f.outcome));
        }
    }
}

fn criterion_4(c: &mut Checks) {
    let e = entry("hamiltonian_even", GalleryParams::b(2));
    let radii = [0.5, 0.25, 0.125, 0.0625];
    let rep = period_blowup_probe(&e.flow, &[0.0, 0.0], &SampleRegion::Cone { epsilon: 0.5 }, &radii, 10.0, &e.detector);
    let fmt = |v: Option<f64>| v.map_or("none".into(), |p| format!("{p:.4}"));
    for row in &rep.rows {
        c.note(format!(
            "r={}: min period {}, axis period {}, {} periodic",
            row.radius,
            fmt(row.min_period),
            fmt(row.axis_period),
            row.periodic
        ));
    }
    c.check(rep.strictly_increasing, "minimal detected periods strictly increase as the radius shrinks");
    let first = &rep.rows[0];
    let last = &rep.rows[rep.rows.len() - 1];
    let ratio = |a: Option<f64>, b: Option<f64>| a.zip(b).map_or(f64::NAN, |(a, b)| b / a);
    let axis = ratio(first.axis_period, last.axis_period);
    let min = ratio(first.min_period, last.min_period);
    c.check(axis > 4.0, format!("Per(0.0625) / Per(0.5) along the cone axis = {axis:.3}"));
    c.note(format!("ratio of the cone minima = {min:.3}"));

    let flat = entry("flat_circle", GalleryParams::default());
    let dirs = region_directions(4, &SampleRegion::Subspace { coords: vec![2, 3] });
    let mut worst: f64 = 0.0;
    let mut all = true;
    for r in radii {
        for u in &dirs {
            let x: Vec<f64> = u.iter().map(|v| v * r).collect();
            match classify_point(&flat.flow, &x, &flat.detector).minimal_period {
                Some(p) => worst = worst.max((p - TAU).abs()),
                None => all = false,
            }
        }
    }
    c.check(all && worst < 1e-5, format!("flat_circle along (0,0,·,·): max |Per - 2π| = {worst:.2e}"));
}

fn criterion_5(c: &mut Checks, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entries = [
        entry("seifert", GalleryParams::k(3)),
        entry("c_inf_disk", GalleryParams::default()),
        entry("c0_disk", GalleryParams::default()),
        entry("rotation", GalleryParams::beta(3.0)),
        entry("hamiltonian_even", GalleryParams::b(2)),
    ];
    let mut jobs = Vec::new();
    for e in &entries {
        let mut n = 0;
        while n < 41 {
            let x: Vec<f64> = e.domain.bounds().iter().map(|&(lo, hi)| rng.gen_range(lo..hi)).collect();
            let ok = (e.sample_mask)(&x)
                && matches!((e.truth.period)(&x), TruePeriod::Periodic(p) if p < e.detector.horizon && p > 1e-2);
            if ok {
                jobs.push((e, x));
                n += 1;
            }
        }
    }
    let results: Vec<_> = jobs.par_iter().map(|(e, x)| orbit_geometry(&e.flow, x, &e.detector, QUAD_N)).collect();
    let mut count = 0;
    let mut worst = f64::INFINITY;
    let mut errors = 0;
    for r in &results {
        match r {
            Ok(g) => {
                count += 1;
                worst = worst.min(g.slack_diameter).min(g.slack_speed);
            }
            Err(_) => errors += 1,
        }
    }
    c.check(errors == 0, format!("{errors} orbits failed"));
    c.check(count >= 200 && worst >= -1e-7, format!("{count} orbits, smallest slack {worst:.3e}"));
}

fn criterion_6(c: &mut Checks, seed: u64) {
    let disk: fn(&[f64]) -> bool = |x| r2(x) <= 1.0;
    let ring: fn(&[f64]) -> bool = |x| (0.04..=1.0).contains(&r2(x));
    let cases = [
        (entry("seifert", GalleryParams::k(3)), 16, disk),
        (entry("c0_disk", GalleryParams::default()), 64, disk),
        (entry("c_inf_disk", GalleryParams::default()), 32, ring),
        (entry("rotation", GalleryParams::beta(3.0)), 24, disk),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (e, cells, region) in &cases {
        let grid = &Grid::over_domain(&e.domain, *cells, region);
        let Some(f) = build(e, grid, c) else { continue };
        let g = detect_generator(&e.flow, &f, 7, 200, &field_cfg(e)).generator;
        if g.is_zero() {
            c.note(format!("{}: zero generator, skipped", e.name));
            continue;
        }
        let theta = g.theta_fn(&e.flow, &e.detector);
        let mut pts = Vec::with_capacity(500);
        while pts.len() < 500 {
            let x: Vec<f64> = e.domain.bounds().iter().map(|&(lo, hi)| rng.gen_range(lo..hi)).collect();
            if region(&x) && e.flow.speed(&x) > e.detector.fixed_tol {
                pts.push(Point(x));
            }
        }
        let b = match circle_action(&e.flow, theta, &pts, e.detector.fixed_tol) {
            Ok(b) => b,
            Err(err) => {
                c.check(false, format!("{}: {err}", e.name));
                continue;
            }
        };
        let res = pts.par_iter().map(|x| b.unit_time_residual(x)).reduce(|| 0.0, f64::max);
        c.check(res < 1e-6, format!("{}: max |B(x,1) - x| over 500 points = {res:.2e}", e.name));
        let haus = pts.par_iter().step_by(10).map(|x| b.orbit_hausdorff(x, 1000)).reduce(|| 0.0, f64::max);
        c.check(haus < 1e-4, format!("{}: max orbit Hausdorff distance over 50 points = {haus:.2e}", e.name));
    }
}

fn criterion_7(c: &mut Checks) {
    let s = entry("seifert", GalleryParams::k(3));
    let (c0, c0g) = {
        let e = entry("c0_disk", GalleryParams::default());
        let mask = e.sample_mask.clone();
        let g = Grid::over_domain(&e.domain, 64, move |x| mask(x));
        (e, g)
    };
    let ci = entry("c_inf_disk", GalleryParams::default());
    let cases = [(&s, seifert_grid(&s, 16)), (&c0, c0g), (&ci, annulus_grid(&ci, 0.2, 32))];
    for (e, grid) in cases {
        let Some(f) = build(e, &grid, c) else { continue };
        let g = detect_generator(&e.flow, &f, 7, 300, &field_cfg(e)).generator;
        let pts: Vec<Point> = g.samples(300).into_iter().map(|(p, _)| p).collect();
        let th = g.theta_fn(&e.flow, &e.detector);
        let (t1, t2) = (th.clone(), th.clone());
        let sum = verify_p_function(&e.flow, &pts, &move |x| 3.0 * t1(x), 1e-6);
        let diff = verify_p_function(&e.flow, &pts, &move |x| 3.0 * t2(x) - th(x), 1e-6);
        c.check(
            sum.passed && diff.passed,
            format!("{}: θ + 2θ and 3θ - θ verify (residuals {:.1e}, {:.1e})", e.name, sum.max_residual, diff.max_residual),
        );

        let integ = (0..g.len())
            .filter_map(|i| g.period(i).map(|p| g.theta[i] / p))
            .map(|q| (q - q.round()).abs())
            .fold(0.0, f64::max);
        c.check(integ < 1e-6, format!("{}: max distance of θ/Per to an integer = {integ:.1e}", e.name));

        let samples = g.samples(300);
        let disp = (2..=7u32)
            .map(|p| zp_divisibility_test(&e.flow, &samples, p, 1e-6).max_pth_iterate_displacement)
            .fold(0.0, f64::max);
        c.check(disp < 1e-5, format!("{}: max |d^p(x) - x| for p ≤ 7 = {disp:.1e}", e.name));

        if e.name == "seifert" {
            c.check(local_uniqueness(&g), "seifert: each component is entirely zero or entirely positive");
        }
    }

    let saddle = entry("saddle", GalleryParams::default());
    let grid = Grid::over_domain(&Domain::cube(2, 0.5), 10, |_| true);
    if let Some(f) = build(&saddle, &grid, c) {
        c.check(local_uniqueness(&f) && f.is_zero(), format!("saddle: zero field ({:?})", f.outcome));
    }
}

fn local_uniqueness(f: &PeriodFunctionField) -> bool {
    f.grid.components(|i| !f.is_fixed(i)).iter().all(|comp| {
        let zeros = comp.iter().filter(|&&i| f.theta[i] == 0.0).count();
        zeros == 0 || zeros == comp.len()
    })
}

fn criterion_8(c: &mut Checks) {
    let disk = Grid::over_domain(&Domain::cube(2, 1.0), 60, |x| r2(x) <= 1.0);
    let half_domain = Domain::new(vec![(-1.0, 1.0), (-1.0, 1.0), (0.0, 1.0)], vec![false; 3], None).expect("domain");
    let half_ball = Grid::over_domain(&half_domain, 14, |x| x.iter().map(|v| v * v).sum::<f64>() <= 1.0);
    for p in [2u32, 3, 5, 7] {
        let turns = 1.0 / p as f64;
        let samples = [
            ("disk", CyclicActionSample::from_grid(planar_rotation(&[0.0, 0.0], turns), p, &disk), vec![0.0, 0.0], true),
            (
                "half-ball",
                CyclicActionSample::from_grid(planar_rotation(&[0.0, 0.0, 0.0], turns), p, &half_ball),
                vec![0.0, 0.0, 0.0],
                false,
            ),
        ];
        for (label, act, z, interior) in &samples {
            match dress_bound_check(act, 1e-9) {
                Ok(d) => c.check(d.holds, format!("{label} p={p}: D = {:.3} < C = {:.3}", d.d, d.c)),
                Err(err) => c.check(false, format!("{label} p={p}: {err}")),
            }
            for r in [0.1, 0.5] {
                match hoffman_mann_check(act, z, r, *interior, 64, 1e-9) {
                    Ok(h) => c.check(
                        h.holds,
                        format!("{label} p={p} r={r}: witness on {:?} with ratio {:.3} < {}", h.face, h.ratio, h.constant),
                    ),
                    Err(err) => c.check(false, format!("{label} p={p} r={r}: {err}")),
                }
            }
        }
    }
}

/// Run one criterion. `seed` drives the random orbit and point samples.
pub fn run_criterion(id: u8, seed: u64) -> CriterionResult {
    let (_, name) = CRITERIA.iter().find(|(i, _)| *i == id).copied().expect("criterion id in 1..=8");
    let limit = match id {
        1 => Some(180.0),
        2 => Some(30.0),
        3 => Some(10.0),
        4 | 5 => Some(60.0),
        8 => Some(10.0),
        _ => None,
    };
    let mut c = Checks::new();
    let t = Instant::now();
    match id {
        1 => criterion_1(&mut c),
        2 => criterion_2(&mut c),
        3 => criterion_3(&mut c),
        4 => criterion_4(&mut c),
        5 => criterion_5(&mut c, seed),
        6 => criterion_6(&mut c, seed),
        7 => criterion_7(&mut c),
        _ => criterion_8(&mut c),
    }
    let elapsed_s = t.elapsed().as_secs_f64();
    let in_time = limit.is_none_or(|l| elapsed_s < l);
    CriterionResult {
        id,
        name: name.to_string(),
        passed: c.ok && in_time,
        checks_passed: c.ok,
        elapsed_s,
        limit_s: limit,
        details: c.details,
    }
}

pub fn run_all(seed: u64) -> Vec<CriterionResult> {
    CRITERIA.iter().map(|&(id, _)| run_criterion(id, seed)).collect()
}

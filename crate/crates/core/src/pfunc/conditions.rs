use super::{check_orbit_constancy, ThetaFn};
use crate::detect::{classify_point, probe_directions, DetectorConfig};
use crate::domain::Point;
use crate::flow::{sample_orbit, FlowSpec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// The rational `q/p` used by `d_α(x) = Φ(x, α·μ(x))`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alpha {
    pub q: i64,
    pub p: u32,
}

impl Alpha {
    pub fn new(q: i64, p: u32) -> Self {
        assert!(p > 0, "alpha denominator must be positive");
        Alpha { q, p }
    }

    pub fn value(self) -> f64 {
        self.q as f64 / self.p as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConditionConfig {
    /// Probe radii around each fixed point, largest first.
    pub radii: Vec<f64>,
    /// Upper bound for periods; when absent the bound is judged from growth over the radii.
    pub period_bound: Option<f64>,
    pub growth_factor: f64,
    /// Radius of the neighbourhood `W` of a fixed point.
    pub ball_radius: f64,
    pub e_constant: f64,
    pub verify_tol: f64,
    pub continuity_tol: f64,
    pub regularity_samples: usize,
    pub orbit_samples: usize,
    pub detector: DetectorConfig,
}

impl Default for ConditionConfig {
    fn default() -> Self {
        ConditionConfig {
            radii: vec![0.4, 0.2, 0.1, 0.05],
            period_bound: None,
            growth_factor: 1.05,
            ball_radius: 0.5,
            e_constant: 4.0,
            verify_tol: 1e-6,
            continuity_tol: 1e-3,
            regularity_samples: 8,
            orbit_samples: 512,
            detector: DetectorConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CondA {
    pub holds: bool,
    /// Largest period seen where `μ ≠ 0`.
    pub bound: f64,
    /// Largest period per probe radius, aggregated over all fixed points.
    pub sup_by_radius: Vec<(f64, f64)>,
    /// Points with `μ ≠ 0` whose period was not found within the horizon.
    pub unresolved: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct CondB {
    pub fixed_point: Point,
    pub regular: bool,
    pub checked: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct CondC {
    pub fixed_point: Point,
    /// `(r, sup dist(d_α(x), z))` over probe points at distance `r`.
    pub modulus: Vec<(f64, f64)>,
    pub continuous: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CondD {
    pub fixed_point: Point,
    pub pth_power_identity: bool,
    pub max_residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EWitness {
    pub x: Point,
    pub distance: f64,
    pub diameter: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CondE {
    pub fixed_point: Point,
    /// Largest `d(z, x_i) / diam(orb ∩ W)` along the witnesses.
    pub constant: f64,
    pub holds: bool,
    pub witnesses: Vec<EWitness>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionReport {
    pub alpha: Alpha,
    pub cond_a: CondA,
    pub cond_b: Vec<CondB>,
    pub cond_c_alpha: Vec<CondC>,
    pub cond_d_alpha: Vec<CondD>,
    pub cond_e: Vec<CondE>,
}

fn d_alpha(flow: &FlowSpec, theta: &ThetaFn, alpha: f64, fixed_tol: f64, x: &[f64]) -> Option<Point> {
    if flow.speed(x) < fixed_tol {
        return Some(Point(x.to_vec()));
    }
    flow.evaluate(x, alpha * theta(x)).ok()
}

fn shell(flow: &FlowSpec, z: &[f64], r: f64) -> Vec<Point> {
    probe_directions(z.len())
        .iter()
        .map(|u| flow.domain().offset(z, &u.iter().map(|c| c * r).collect::<Vec<_>>()))
        .filter(|p| flow.domain().contains(p))
        .collect()
}

fn orbit_diameter_in_ball(flow: &FlowSpec, x: &[f64], per: f64, z: &[f64], radius: f64, n: usize) -> f64 {
    let pts: Vec<Point> = sample_orbit(flow, x, per, n)
        .unwrap_or_default()
        .into_iter()
        .filter(|p| flow.distance(p, z) < radius)
        .collect();
    let mut diam: f64 = 0.0;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            diam = diam.max(flow.distance(&pts[i], &pts[j]));
        }
    }
    diam
}

/// Probe conditions (A) through (E) near the given fixed points.
///
/// `samples` are extra points of `V` used for the period bound; the
/// remaining checks use shells of the configured radii around each fixed point.
pub fn probe_conditions(
    flow: &FlowSpec,
    theta: &ThetaFn,
    samples: &[Point],
    fixed_points: &[Point],
    alpha: Alpha,
    cfg: &ConditionConfig,
) -> ConditionReport {
    let det = &cfg.detector;
    let a = alpha.value();

    let shells: Vec<Vec<(f64, Vec<Point>)>> = fixed_points
        .iter()
        .map(|z| cfg.radii.iter().map(|&r| (r, shell(flow, z, r))).collect())
        .collect();

    let periods = |pts: &[Point]| -> Vec<Option<f64>> {
        pts.par_iter()
            .map(|x| (theta(x) != 0.0).then(|| classify_point(flow, x, det).minimal_period.unwrap_or(f64::NAN)))
            .collect()
    };

    let mut unresolved = 0;
    let mut bound: f64 = 0.0;
    let mut account = |ps: &[Option<f64>]| -> f64 {
        let mut sup: f64 = 0.0;
        for p in ps.iter().flatten() {
            if p.is_nan() {
                unresolved += 1;
            } else {
                sup = sup.max(*p);
            }
        }
        bound = bound.max(sup);
        sup
    };
    account(&periods(samples));
    let mut sup_by_radius: Vec<(f64, f64)> = cfg.radii.iter().map(|&r| (r, 0.0)).collect();
    for per_z in &shells {
        for (k, (_, pts)) in per_z.iter().enumerate() {
            let s = account(&periods(pts));
            sup_by_radius[k].1 = sup_by_radius[k].1.max(s);
        }
    }
    let holds = unresolved == 0
        && match cfg.period_bound {
            Some(b) => bound < b,
            None => sup_by_radius.windows(2).all(|w| w[1].1 <= cfg.growth_factor * w[0].1),
        };
    let cond_a = CondA { holds, bound, sup_by_radius, unresolved };

    let mut cond_b = Vec::new();
    let mut cond_c = Vec::new();
    let mut cond_d = Vec::new();
    let mut cond_e = Vec::new();
    for (z, per_z) in fixed_points.iter().zip(&shells) {
        let pts: Vec<Point> = per_z.iter().flat_map(|(_, p)| p.iter().cloned()).collect();

        let mu = |y: &[f64]| theta(y);
        let in_ball = |y: &[f64]| flow.distance(y, z) < cfg.ball_radius && flow.speed(y) >= det.fixed_tol;
        let reg = check_orbit_constancy(flow, &pts, &mu, &in_ball, cfg.regularity_samples, cfg.continuity_tol);
        cond_b.push(CondB { fixed_point: z.clone(), regular: reg.regular, checked: reg.checked });

        let modulus: Vec<(f64, f64)> = per_z
            .iter()
            .map(|(r, pts)| {
                let w = pts
                    .par_iter()
                    .map(|x| d_alpha(flow, theta, a, det.fixed_tol, x).map_or(f64::INFINITY, |y| flow.distance(&y, z)))
                    .reduce(|| 0.0, f64::max);
                (*r, w)
            })
            .collect();
        let continuous = match (modulus.first(), modulus.last()) {
            (Some(&(_, w_max)), Some(&(_, w_min))) => w_min.is_finite() && w_min <= 0.5 * w_max + cfg.verify_tol,
            _ => true,
        };
        cond_c.push(CondC { fixed_point: z.clone(), modulus, continuous });

        let max_residual = pts
            .par_iter()
            .map(|x| {
                let mut y = x.clone();
                for _ in 0..alpha.p {
                    match d_alpha(flow, theta, a, det.fixed_tol, &y) {
                        Some(v) => y = v,
                        None => return f64::INFINITY,
                    }
                }
                flow.distance(x, &y)
            })
            .reduce(|| 0.0, f64::max);
        cond_d.push(CondD { fixed_point: z.clone(), pth_power_identity: max_residual < cfg.verify_tol, max_residual });

        let witnesses: Vec<EWitness> = per_z
            .iter()
            .filter_map(|(_, pts)| {
                pts.par_iter()
                    .filter(|x| theta(x) != 0.0)
                    .filter_map(|x| {
                        let per = classify_point(flow, x, det).minimal_period?;
                        let diameter = orbit_diameter_in_ball(flow, x, per, z, cfg.ball_radius, cfg.orbit_samples);
                        Some(EWitness { x: x.clone(), distance: flow.distance(x, z), diameter })
                    })
                    .max_by(|u, v| (u.diameter / u.distance).total_cmp(&(v.diameter / v.distance)))
            })
            .collect();
        let constant = witnesses.iter().map(|w| w.distance / w.diameter).fold(0.0, f64::max);
        let holds = !witnesses.is_empty() && constant < cfg.e_constant;
        cond_e.push(CondE { fixed_point: z.clone(), constant, holds, witnesses });
    }

    ConditionReport { alpha, cond_a, cond_b, cond_c_alpha: cond_c, cond_d_alpha: cond_d, cond_e }
}

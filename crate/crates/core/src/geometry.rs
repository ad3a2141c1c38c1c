//! Orbit length and diameter, and lower bounds for orbits of finite cyclic actions.

use crate::detect::{classify_point, DetectorConfig, PeriodStatus};
use crate::domain::{norm, Point};
use crate::flow::{sample_orbit, FlowError, FlowSpec};
use crate::grid::Grid;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::TAU;
use std::io::Write;
use std::sync::Arc;
use thiserror::Error;

pub const QUAD_N: usize = 4096;
pub const QUAD_TOL: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("{0:?} is not periodic ({1})")]
    NotPeriodic(Point, String),
    #[error("orbit length changed from {coarse} to {fine} when doubling {n} panels")]
    QuadratureNonConverged { n: usize, coarse: f64, fine: f64 },
    #[error("action is the identity on every sample")]
    TrivialAction,
    #[error("{0:?} is moved by the action")]
    NotFixedByAction(Point),
    #[error(transparent)]
    Flow(#[from] FlowError),
}

#[derive(Clone, Debug, Serialize)]
pub struct OrbitGeometry {
    pub period: f64,
    pub length: f64,
    pub diameter: f64,
    pub sup_speed: f64,
    /// `length − 2·diameter`.
    pub slack_diameter: f64,
    /// `period·sup_speed − length`.
    pub slack_speed: f64,
    pub quad_n: usize,
}

impl OrbitGeometry {
    /// Both inequalities `2·diam ≤ l` and `l ≤ Per·sup‖F‖`, up to `QUAD_TOL` relative.
    pub fn inequalities_hold(&self) -> bool {
        let tol = QUAD_TOL * self.length.max(1.0);
        self.slack_diameter >= -tol && self.slack_speed >= -tol
    }
}

fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len() - 1;
    let inner: f64 = (1..n).map(|i| if i % 2 == 1 { 4.0 } else { 2.0 } * values[i]).sum();
    h / 3.0 * (values[0] + values[n] + inner)
}

fn max_pairwise(flow: &FlowSpec, pts: &[Point]) -> f64 {
    (0..pts.len())
        .into_par_iter()
        .map(|i| pts[i + 1..].iter().map(|q| flow.distance(&pts[i], q)).fold(0.0, f64::max))
        .reduce(|| 0.0, f64::max)
}

/// Geometry of the orbit of `x` over one known period.
///
/// The length is `∫ ‖F(Φ(x, t))‖ dt` by composite Simpson with `quad_n`
/// panels, checked against `2·quad_n` panels.
pub fn orbit_geometry_with_period(flow: &FlowSpec, x: &[f64], period: f64, quad_n: usize) -> Result<OrbitGeometry, GeometryError> {
    let n = quad_n.max(2).next_multiple_of(2);
    let fine = sample_orbit(flow, x, period, 2 * n)?;
    let speeds: Vec<f64> = fine.par_iter().map(|p| flow.speed(p)).collect();
    let coarse: Vec<f64> = speeds.iter().step_by(2).copied().collect();
    let h = period / (2 * n) as f64;
    let l_coarse = simpson(&coarse, 2.0 * h);
    let l_fine = simpson(&speeds, h);
    if (l_fine - l_coarse).abs() > QUAD_TOL * l_fine.abs().max(f64::MIN_POSITIVE) {
        return Err(GeometryError::QuadratureNonConverged { n, coarse: l_coarse, fine: l_fine });
    }
    let nodes: Vec<Point> = fine.iter().step_by(2).take(n).cloned().collect();
    let diameter = max_pairwise(flow, &nodes);
    let sup_speed = speeds.iter().copied().fold(0.0, f64::max);
    Ok(OrbitGeometry {
        period,
        length: l_coarse,
        diameter,
        sup_speed,
        slack_diameter: l_coarse - 2.0 * diameter,
        slack_speed: period * sup_speed - l_coarse,
        quad_n: n,
    })
}

/// [`orbit_geometry_with_period`] after classifying `x`.
pub fn orbit_geometry(flow: &FlowSpec, x: &[f64], det: &DetectorConfig, quad_n: usize) -> Result<OrbitGeometry, GeometryError> {
    let r = classify_point(flow, x, det);
    match (r.status, r.minimal_period) {
        (PeriodStatus::Periodic, Some(p)) => orbit_geometry_with_period(flow, x, p, quad_n),
        _ => Err(GeometryError::NotPeriodic(Point(x.to_vec()), r.status.as_str().into())),
    }
}

/// CSV with columns `orbit_id, period, length, diameter, sup_speed, slack1, slack2`.
pub fn write_geometry_csv<W: Write>(out: W, rows: &[OrbitGeometry]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["orbit_id", "period", "length", "diameter", "sup_speed", "slack1", "slack2"])?;
    for (i, g) in rows.iter().enumerate() {
        w.write_record(&[
            i.to_string(),
            g.period.to_string(),
            g.length.to_string(),
            g.diameter.to_string(),
            g.sup_speed.to_string(),
            g.slack_diameter.to_string(),
            g.slack_speed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub type PointMap = Arc<dyn Fn(&[f64]) -> Point + Send + Sync>;

/// A `Z_p` action sampled on a set `U` with its detected boundary.
#[derive(Clone)]
pub struct CyclicActionSample {
    pub generator: PointMap,
    pub p: u32,
    pub samples: Vec<Point>,
    pub boundary: Vec<bool>,
    /// Two lattice spacings, absorbing the sampled-boundary approximation.
    pub sample_tol: f64,
}

impl CyclicActionSample {
    /// Samples are the grid nodes; boundary nodes have a lattice neighbour outside the grid.
    pub fn from_grid(generator: PointMap, p: u32, grid: &Grid) -> Self {
        let boundary = (0..grid.len()).map(|i| grid.is_boundary(i)).collect();
        CyclicActionSample {
            generator,
            p,
            samples: grid.points().to_vec(),
            boundary,
            sample_tol: 2.0 * grid.spacing(),
        }
    }

    pub fn iterate(&self, x: &[f64], a: u32) -> Point {
        let mut y = Point(x.to_vec());
        for _ in 0..a {
            y = (self.generator)(&y);
        }
        y
    }

    /// Largest `d(x, g(x))` over the samples.
    pub fn max_displacement(&self) -> f64 {
        self.samples.par_iter().map(|x| norm_dist(x, &(self.generator)(x))).reduce(|| 0.0, f64::max)
    }

    /// Largest `d(x, g^p(x))` over the samples.
    pub fn pth_power_displacement(&self) -> f64 {
        self.samples.par_iter().map(|x| norm_dist(x, &self.iterate(x, self.p))).reduce(|| 0.0, f64::max)
    }
}

fn norm_dist(a: &[f64], b: &[f64]) -> f64 {
    norm(&a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>())
}

#[derive(Clone, Debug, Serialize)]
pub struct DressReport {
    /// Largest distance from an interior sample to the sampled boundary.
    pub d: f64,
    /// Largest `d(x, g^a(x))` over boundary samples.
    pub c: f64,
    pub sample_tol: f64,
    pub holds: bool,
}

pub fn dress_bound_check(action: &CyclicActionSample, verify_tol: f64) -> Result<DressReport, GeometryError> {
    if action.max_displacement() < verify_tol {
        return Err(GeometryError::TrivialAction);
    }
    let boundary: Vec<&Point> = action.samples.iter().zip(&action.boundary).filter(|(_, &b)| b).map(|(x, _)| x).collect();
    let d = action
        .samples
        .par_iter()
        .zip(action.boundary.par_iter())
        .filter(|(_, &b)| !b)
        .map(|(x, _)| boundary.iter().map(|y| norm_dist(x, y)).fold(f64::INFINITY, f64::min))
        .reduce(|| 0.0, f64::max);
    let c = boundary
        .par_iter()
        .map(|x| (1..action.p).map(|a| norm_dist(x, &action.iterate(x, a))).fold(0.0, f64::max))
        .reduce(|| 0.0, f64::max);
    Ok(DressReport { d, c, sample_tol: action.sample_tol, holds: d < c + action.sample_tol })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Face {
    /// The sphere `∂B_{r/2}(z)` around an interior point.
    Sphere,
    /// The curved part of `∂(B_{2r/3}(z) ∩ {x_n ≥ 0})`.
    Curved,
    /// The flat part `{x_n = 0}` of the same boundary.
    Flat,
}

#[derive(Clone, Debug, Serialize)]
pub struct HoffmanMannReport {
    pub x_star: Point,
    pub a_star: u32,
    /// `d(z, x*) / d(x*, g^{a*}(x*))`, minimal over the search set.
    pub ratio: f64,
    pub constant: f64,
    pub face: Face,
    pub holds: bool,
    pub searched: usize,
}

/// Directions on the unit sphere of `R^dim`: a regular polygon in 2D, a
/// Fibonacci lattice in 3D, coordinate and diagonal directions otherwise.
pub fn sphere_directions(dim: usize, n: usize) -> Vec<Vec<f64>> {
    match dim {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..n).map(|k| {
            let a = TAU * k as f64 / n as f64;
            vec![a.cos(), a.sin()]
        }).collect(),
        3 => {
            let golden = TAU * (1.0 - 1.0 / ((1.0 + 5f64.sqrt()) / 2.0));
            (0..n)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let a = golden * k as f64;
                    vec![r * a.cos(), r * a.sin(), z]
                })
                .collect()
        }
        _ => crate::detect::probe_directions(dim),
    }
}

/// Search for `x` and `a ∈ 1..p` with `d(z, x) ≤ K·d(x, g^a(x))`.
///
/// Interior points search `∂B_{r/2}(z)` with `K = 2`. Boundary points
/// (last coordinate zero, set `x_n ≥ 0`) search both the curved and the
/// flat face of `∂(B_{2r/3}(z) ∩ {x_n ≥ 0})` with `K = 4`.
pub fn hoffman_mann_check(
    action: &CyclicActionSample,
    z: &[f64],
    r: f64,
    interior: bool,
    directions: usize,
    verify_tol: f64,
) -> Result<HoffmanMannReport, GeometryError> {
    if action.max_displacement() < verify_tol {
        return Err(GeometryError::TrivialAction);
    }
    if norm_dist(z, &(action.generator)(z)) > verify_tol {
        return Err(GeometryError::NotFixedByAction(Point(z.to_vec())));
    }
    let dim = z.len();
    let at = |u: &[f64], s: f64| Point(z.iter().zip(u).map(|(c, d)| c + s * d).collect());
    let (candidates, constant): (Vec<(Point, Face)>, f64) = if interior {
        (sphere_directions(dim, directions).iter().map(|u| (at(u, r / 2.0), Face::Sphere)).collect(), 2.0)
    } else {
        let s = 2.0 * r / 3.0;
        let mut c: Vec<(Point, Face)> = sphere_directions(dim, 2 * directions)
            .into_iter()
            .filter(|u| u[dim - 1] >= 0.0)
            .map(|u| (at(&u, s), Face::Curved))
            .collect();
        if dim > 1 {
            for u in sphere_directions(dim - 1, directions) {
                let mut v = u.clone();
                v.push(0.0);
                for frac in [0.25, 0.5, 0.75, 1.0] {
                    c.push((at(&v, frac * s), Face::Flat));
                }
            }
        }
        (c, 4.0)
    };
    let best = candidates
        .par_iter()
        .map(|(x, face)| {
            let (a, disp) = (1..action.p)
                .map(|a| (a, norm_dist(x, &action.iterate(x, a))))
                .max_by(|u, v| u.1.total_cmp(&v.1))
                .unwrap_or((1, 0.0));
            (x.clone(), a, norm_dist(z, x) / disp, *face)
        })
        .min_by(|u, v| u.2.total_cmp(&v.2))
        .expect("non-empty search set");
    Ok(HoffmanMannReport {
        x_star: best.0,
        a_star: best.1,
        ratio: best.2,
        constant,
        face: best.3,
        holds: best.2 <= constant,
        searched: candidates.len(),
    })
}

/// Rotation by `turns` of the first two coordinates about `centre`.
pub fn planar_rotation(centre: &[f64], turns: f64) -> PointMap {
    let c = centre.to_vec();
    let (s, co) = (TAU * turns).sin_cos();
    Arc::new(move |x: &[f64]| {
        let mut y = x.to_vec();
        let (dx, dy) = (x[0] - c[0], x[1] - c[1]);
        y[0] = c[0] + co * dx - s * dy;
        y[1] = c[1] + s * dx + co * dy;
        Point(y)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_integrates_cubics_exactly() {
        let v: Vec<f64> = (0..=8).map(|i| (i as f64 / 8.0).powi(3)).collect();
        assert!((simpson(&v, 1.0 / 8.0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn fibonacci_directions_are_unit() {
        for u in sphere_directions(3, 50) {
            assert!((norm(&u) - 1.0).abs() < 1e-12);
        }
    }
}

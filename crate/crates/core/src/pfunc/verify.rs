use super::{FieldConfig, FieldError, PeriodFunctionField};
use crate::detect::{classify_point, DetectorConfig};
use crate::domain::Point;
use crate::flow::FlowSpec;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    /// `dist(Φ(x, μ(x)), x)` per sample; `None` when the orbit left the domain.
    pub residuals: Vec<Option<f64>>,
    pub max_residual: f64,
    pub inconclusive: usize,
    pub passed: bool,
}

/// Check `Φ(x, μ(x)) = x` on every sample.
pub fn verify_p_function(
    flow: &FlowSpec,
    samples: &[Point],
    mu: &(dyn Fn(&[f64]) -> f64 + Sync),
    verify_tol: f64,
) -> VerifyReport {
    let residuals: Vec<Option<f64>> = samples
        .par_iter()
        .map(|x| flow.evaluate(x, mu(x)).ok().map(|y| flow.distance(x, &y)))
        .collect();
    let max_residual = residuals.iter().flatten().copied().fold(0.0, f64::max);
    let inconclusive = residuals.iter().filter(|r| r.is_none()).count();
    VerifyReport { residuals, max_residual, inconclusive, passed: max_residual < verify_tol }
}

#[derive(Clone, Debug, Serialize)]
pub struct RegularityWitness {
    pub x: Point,
    pub tau: f64,
    pub y: Point,
    pub mu_x: f64,
    pub mu_y: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RegularityReport {
    pub regular: bool,
    pub checked: usize,
    /// Pairs skipped because `Φ(x, τ)` left the set or `μ(x) = 0`.
    pub skipped: usize,
    pub witnesses: Vec<RegularityWitness>,
}

/// Compare `μ(x)` with `μ(Φ(x, τ))` for `τ` uniform in `(0, 2|μ(x)|]`, keeping
/// only pairs with `Φ(x, τ)` inside the set.
pub fn check_orbit_constancy(
    flow: &FlowSpec,
    samples: &[Point],
    mu: &(dyn Fn(&[f64]) -> f64 + Sync),
    in_set: &(dyn Fn(&[f64]) -> bool + Sync),
    taus_per_point: usize,
    rel_tol: f64,
) -> RegularityReport {
    let per_point: Vec<(usize, usize, Vec<RegularityWitness>)> = samples
        .par_iter()
        .map(|x| {
            let mx = mu(x);
            if mx == 0.0 {
                return (0, taus_per_point, Vec::new());
            }
            let (mut checked, mut skipped, mut wit) = (0, 0, Vec::new());
            for j in 1..=taus_per_point {
                let tau = 2.0 * mx.abs() * j as f64 / taus_per_point as f64;
                let Ok(y) = flow.evaluate(x, tau) else {
                    skipped += 1;
                    continue;
                };
                if !in_set(&y) {
                    skipped += 1;
                    continue;
                }
                checked += 1;
                let my = mu(&y);
                if (my - mx).abs() > rel_tol * mx.abs() {
                    wit.push(RegularityWitness { x: x.clone(), tau, y, mu_x: mx, mu_y: my });
                }
            }
            (checked, skipped, wit)
        })
        .collect();
    let checked = per_point.iter().map(|p| p.0).sum();
    let skipped = per_point.iter().map(|p| p.1).sum();
    let witnesses: Vec<RegularityWitness> = per_point.into_iter().flat_map(|p| p.2).collect();
    RegularityReport { regular: witnesses.is_empty(), checked, skipped, witnesses }
}

/// Orbit-constancy of a sampled field, evaluated off the grid by [`PeriodFunctionField::theta_at`].
pub fn check_regularity(flow: &FlowSpec, field: &PeriodFunctionField, cfg: &FieldConfig) -> RegularityReport {
    let samples: Vec<Point> = field.samples(cfg.regularity_points).into_iter().map(|(p, _)| p).collect();
    let det = &cfg.detector;
    let mu = |y: &[f64]| field.theta_at(flow, y, det).unwrap_or(0.0);
    let in_set = |y: &[f64]| field.grid.covers(y);
    check_orbit_constancy(flow, &samples, &mu, &in_set, cfg.regularity_samples, cfg.continuity_tol)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtendConfig {
    /// Longest time the target is flowed forward and backward looking for the set.
    pub horizon: f64,
    pub steps: usize,
    /// Walk from the nearest grid node to targets outside the saturation.
    pub allow_continuation: bool,
    /// Step of the continuation walk; defaults to the grid spacing.
    pub continuation_step: Option<f64>,
}

impl Default for ExtendConfig {
    fn default() -> Self {
        ExtendConfig { horizon: 10.0, steps: 400, allow_continuation: false, continuation_step: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ExtensionRoute {
    /// The target is already covered by the grid.
    InSet,
    /// The target's orbit enters the grid at time `tau`.
    Saturation,
    /// Multiples of `Per` carried along a path from the nearest grid node.
    Continuation,
}

#[derive(Clone, Debug, Serialize)]
pub struct Extension {
    pub target: Point,
    pub value: f64,
    pub route: ExtensionRoute,
    pub source: Point,
    pub tau: f64,
    /// `dist(Φ(y, θ(y)), y)` for the extended value.
    pub residual: f64,
}

fn continue_along_path(
    flow: &FlowSpec,
    field: &PeriodFunctionField,
    y: &[f64],
    step: f64,
    det: &DetectorConfig,
) -> Option<(Point, f64)> {
    let start = (0..field.len())
        .filter(|&i| field.theta[i] > 0.0 && !field.is_fixed(i))
        .min_by(|&a, &b| {
            flow.distance(field.grid.point(a), y).total_cmp(&flow.distance(field.grid.point(b), y))
        })?;
    let x0 = field.grid.point(start).clone();
    let delta = flow.domain().delta(&x0, y);
    let len = flow.distance(&x0, y);
    let steps = (len / step).ceil().max(1.0) as usize;
    let mut value = field.theta[start];
    for k in 1..=steps {
        let s = k as f64 / steps as f64;
        let p = flow.domain().offset(&x0, &delta.iter().map(|d| d * s).collect::<Vec<_>>());
        let per = classify_point(flow, &p, det).minimal_period?;
        value = (value / per).round().max(1.0) * per;
    }
    Some((x0, value))
}

/// Extend a regular period function to points of the flow saturation of its grid.
pub fn extend_period_function(
    flow: &FlowSpec,
    field: &PeriodFunctionField,
    targets: &[Point],
    det: &DetectorConfig,
    cfg: &ExtendConfig,
) -> Result<Vec<Extension>, FieldError> {
    targets
        .par_iter()
        .map(|y| {
            let found = if field.grid.covers(y) {
                field.theta_at(flow, y, det).map(|v| (ExtensionRoute::InSet, y.clone(), 0.0, v))
            } else {
                let mut hit = None;
                'search: for k in 1..=cfg.steps {
                    let t = cfg.horizon * k as f64 / cfg.steps as f64;
                    for tau in [-t, t] {
                        if let Ok(x) = flow.evaluate(y, tau) {
                            if field.grid.covers(&x) {
                                hit = field.theta_at(flow, &x, det).map(|v| (ExtensionRoute::Saturation, x, -tau, v));
                                break 'search;
                            }
                        }
                    }
                }
                hit
            };
            let found = match found {
                Some(f) => Some(f),
                None if cfg.allow_continuation => {
                    let step = cfg.continuation_step.unwrap_or(field.grid.spacing());
                    continue_along_path(flow, field, y, step, det)
                        .map(|(x, v)| (ExtensionRoute::Continuation, x, 0.0, v))
                }
                None => None,
            };
            let (route, source, tau, value) = found.ok_or_else(|| FieldError::NotInSaturation(y.clone()))?;
            let residual = flow.evaluate(y, value).map_or(f64::INFINITY, |z| flow.distance(y, &z));
            Ok(Extension { target: y.clone(), value, route, source, tau, residual })
        })
        .collect()
}

use super::{FieldError, ThetaFn};
use crate::detect::{classify_batch, classify_point, DetectorConfig, PeriodResult, PeriodStatus};
use crate::domain::Point;
use crate::flow::FlowSpec;
use crate::grid::Grid;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::io::Write;
use std::sync::Arc;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldConfig {
    pub detector: DetectorConfig,
    /// Relative tolerance for orbit-constancy checks.
    pub continuity_tol: f64,
    /// Largest relative period jump between grid neighbours that still
    /// counts as continuous, and the largest relative rounding residual
    /// accepted when a multiplier is chosen.
    pub jump_tol: f64,
    pub verify_tol: f64,
    pub max_multiplier: u32,
    /// Bisections of a grid edge before a period jump across it counts as a discontinuity.
    pub bisect_depth: usize,
    /// Ring-average growth factor towards a fixed point that marks diverging periods.
    pub blowup_factor: f64,
    pub blowup_rings: usize,
    pub regularity_samples: usize,
    pub regularity_points: usize,
}

impl Default for FieldConfig {
    fn default() -> Self {
        FieldConfig {
            detector: DetectorConfig::default(),
            continuity_tol: 1e-3,
            jump_tol: 0.25,
            verify_tol: 1e-6,
            max_multiplier: 64,
            bisect_depth: 12,
            blowup_factor: 1.05,
            blowup_rings: 3,
            regularity_samples: 16,
            regularity_points: 200,
        }
    }
}

impl FieldConfig {
    pub fn with_detector(detector: DetectorConfig) -> Self {
        FieldConfig { detector, ..Default::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldOutcome {
    /// A nonzero field was built.
    Generated,
    /// No grid point is periodic; the field is zero.
    NoPeriodicPoints,
    /// Periodic points exist but every component was forced to zero.
    ZeroField,
    /// Fixed points with an interior; the field is zero off them.
    InteriorFixed,
}

/// A period function sampled on a grid.
#[derive(Clone, Debug)]
pub struct PeriodFunctionField {
    pub grid: Grid,
    pub classification: Vec<PeriodResult>,
    pub theta: Vec<f64>,
    /// `θ(x) / Per(x)` at periodic points, 0 at fixed and non-periodic points.
    pub multiplier: Vec<u32>,
    /// Periodic points where `θ = Per`.
    pub dense_mask: Vec<bool>,
    /// `dist(Φ(x, θ(x)), x)`; infinite when the orbit left the domain.
    pub residual: Vec<f64>,
    pub outcome: FieldOutcome,
    pub notes: Vec<String>,
}

fn residuals(flow: &FlowSpec, points: &[Point], theta: &[f64]) -> Vec<f64> {
    points
        .par_iter()
        .zip(theta.par_iter())
        .map(|(x, &t)| flow.evaluate(x, t).map_or(f64::INFINITY, |y| flow.distance(x, &y)))
        .collect()
}

impl PeriodFunctionField {
    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn period(&self, i: usize) -> Option<f64> {
        self.classification[i].minimal_period
    }

    pub fn is_fixed(&self, i: usize) -> bool {
        self.classification[i].is_fixed()
    }

    pub fn is_zero(&self) -> bool {
        self.theta.iter().all(|&t| t == 0.0)
    }

    pub fn max_residual(&self) -> f64 {
        self.residual.iter().copied().fold(0.0, f64::max)
    }

    /// `c·θ` with multipliers and residuals recomputed.
    pub fn scaled(&self, flow: &FlowSpec, c: f64) -> PeriodFunctionField {
        let theta: Vec<f64> = self.theta.iter().map(|t| t * c).collect();
        let multiplier: Vec<u32> = (0..self.len())
            .map(|i| match self.period(i) {
                Some(p) if theta[i] > 0.0 => (theta[i] / p).round() as u32,
                _ => 0,
            })
            .collect();
        let dense_mask = multiplier.iter().map(|&m| m == 1).collect();
        let residual = residuals(flow, self.grid.points(), &theta);
        PeriodFunctionField { theta, multiplier, dense_mask, residual, ..self.clone() }
    }

    /// Value at the nearest grid node, without classifying `y`.
    pub fn theta_nearest(&self, y: &[f64]) -> Option<f64> {
        self.grid.nearest(y).map(|i| self.theta[i])
    }

    /// `θ(y)` off the grid: the multiple of `Per(y)` nearest to the value at
    /// the closest grid node. Fixed points take the node value.
    pub fn theta_at(&self, flow: &FlowSpec, y: &[f64], det: &DetectorConfig) -> Option<f64> {
        let i = self.grid.nearest(y)?;
        let t = self.theta[i];
        if t == 0.0 {
            return Some(0.0);
        }
        let r = classify_point(flow, y, det);
        match r.status {
            PeriodStatus::Fixed => Some(t),
            PeriodStatus::Periodic => {
                let p = r.minimal_period.unwrap_or(t);
                Some((t / p).round().max(1.0) * p)
            }
            _ => Some(0.0),
        }
    }

    /// [`Self::theta_at`] as a shareable closure; points outside the grid map to 0.
    pub fn theta_fn(&self, flow: &FlowSpec, det: &DetectorConfig) -> ThetaFn {
        let field = Arc::new(self.clone());
        let flow = flow.clone();
        let det = det.clone();
        Arc::new(move |y: &[f64]| field.theta_at(&flow, y, &det).unwrap_or(0.0))
    }

    /// Non-fixed grid points with `θ > 0` and their values, thinned by a fixed stride.
    pub fn samples(&self, max: usize) -> Vec<(Point, f64)> {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| !self.is_fixed(i) && self.theta[i] > 0.0).collect();
        let stride = idx.len().div_ceil(max.max(1)).max(1);
        idx.into_iter()
            .step_by(stride)
            .map(|i| (self.grid.point(i).clone(), self.theta[i]))
            .collect()
    }

    /// CSV with columns `coords..., per, theta, multiplier, dense_mask, residual`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let dim = self.grid.domain().dim();
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
        header.extend(["per", "theta", "multiplier", "dense_mask", "residual"].map(String::from));
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut row: Vec<String> = self.grid.point(i).iter().map(|c| c.to_string()).collect();
            row.push(self.period(i).map(|p| p.to_string()).unwrap_or_default());
            row.push(self.theta[i].to_string());
            row.push(self.multiplier[i].to_string());
            row.push(u8::from(self.dense_mask[i]).to_string());
            row.push(self.residual[i].to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Sample the generator of the period-function group on `grid`.
///
/// Components of the non-fixed set that contain a non-periodic point, or
/// whose periods diverge towards an adjacent fixed point, carry the zero
/// function. On the others `θ` is seeded with `Per` on the largest region of
/// locally continuous periods and propagated by breadth-first search,
/// multiplying `Per` by the integer that keeps `θ` continuous.
pub fn build_period_field(flow: &FlowSpec, grid: &Grid, cfg: &FieldConfig) -> Result<PeriodFunctionField, FieldError> {
    let cls = classify_batch(flow, grid.points(), &cfg.detector);
    build_from_classification(flow, grid, cls, cfg)
}

fn rel_jump(a: f64, b: f64) -> f64 {
    a.max(b) / a.min(b) - 1.0
}

/// Whether `Per` is continuous along the edge `a`–`b`: the edge is bisected
/// towards the larger relative jump until the jump falls below `jump_tol`.
fn edge_continuous(flow: &FlowSpec, a: &[f64], pa: f64, b: &[f64], pb: f64, cfg: &FieldConfig) -> bool {
    let (mut x, mut px, mut y, mut py) = (a.to_vec(), pa, b.to_vec(), pb);
    for _ in 0..cfg.bisect_depth {
        if rel_jump(px, py) <= cfg.jump_tol {
            return true;
        }
        let half: Vec<f64> = flow.domain().delta(&x, &y).iter().map(|d| d / 2.0).collect();
        let m = flow.domain().offset(&x, &half);
        let Some(pm) = classify_point(flow, &m, &cfg.detector).minimal_period else {
            return false;
        };
        if rel_jump(px, pm) >= rel_jump(pm, py) {
            (y, py) = (m.0, pm);
        } else {
            (x, px) = (m.0, pm);
        }
    }
    rel_jump(px, py) <= cfg.jump_tol
}

pub(crate) fn build_from_classification(
    flow: &FlowSpec,
    grid: &Grid,
    cls: Vec<PeriodResult>,
    cfg: &FieldConfig,
) -> Result<PeriodFunctionField, FieldError> {
    let n = grid.len();
    let dim = grid.domain().dim();
    let mut theta = vec![0.0; n];
    let mut multiplier = vec![0u32; n];
    let mut dense_mask = vec![false; n];
    let mut notes = Vec::new();
    let zero = |theta: Vec<f64>, multiplier, dense_mask, notes, outcome| PeriodFunctionField {
        grid: grid.clone(),
        residual: vec![0.0; n],
        classification: cls.clone(),
        theta,
        multiplier,
        dense_mask,
        outcome,
        notes,
    };

    if !cls.iter().any(|r| r.is_periodic()) {
        return Ok(zero(theta, multiplier, dense_mask, notes, FieldOutcome::NoPeriodicPoints));
    }
    let interior_fixed = (0..n).find(|&i| {
        let nb = grid.neighbors(i);
        cls[i].is_fixed() && nb.len() == 2 * dim && nb.iter().all(|&j| cls[j].is_fixed())
    });
    if let Some(i) = interior_fixed {
        notes.push(format!("fixed points have interior near {:?}", grid.point(i)));
        return Ok(zero(theta, multiplier, dense_mask, notes, FieldOutcome::InteriorFixed));
    }

    let comps = grid.components(|i| !cls[i].is_fixed());
    let mut comp_of = vec![usize::MAX; n];
    for (c, comp) in comps.iter().enumerate() {
        for &i in comp {
            comp_of[i] = c;
        }
    }
    let mut zeroed = vec![false; comps.len()];
    for (c, comp) in comps.iter().enumerate() {
        if let Some(&i) = comp.iter().find(|&&i| !cls[i].is_periodic()) {
            zeroed[c] = true;
            notes.push(format!(
                "component of {} points zeroed: {:?} is {}",
                comp.len(),
                grid.point(i),
                cls[i].status.as_str()
            ));
        }
    }

    // periods growing towards a fixed point force the zero function nearby
    for z in (0..n).filter(|&i| cls[i].is_fixed()) {
        let rings: Vec<Vec<usize>> = (1..=cfg.blowup_rings).map(|k| grid.ring(z, k)).collect();
        let avg: Vec<Option<f64>> = rings
            .iter()
            .map(|r| {
                let ps: Vec<f64> = r.iter().filter_map(|&j| cls[j].minimal_period).collect();
                (!ps.is_empty()).then(|| ps.iter().sum::<f64>() / ps.len() as f64)
            })
            .collect();
        let grows = avg.len() >= 2
            && avg.windows(2).all(|w| matches!((w[0], w[1]), (Some(a), Some(b)) if a >= cfg.blowup_factor * b));
        if grows {
            for &j in rings.iter().flatten() {
                if comp_of[j] != usize::MAX && !zeroed[comp_of[j]] {
                    zeroed[comp_of[j]] = true;
                    notes.push(format!("component zeroed: periods diverge towards {:?}", grid.point(z)));
                }
            }
        }
    }

    let per = |i: usize| cls[i].minimal_period.expect("periodic point");
    let continuous = |i: usize, j: usize| rel_jump(per(i), per(j)) <= cfg.jump_tol;
    for (c, comp) in comps.iter().enumerate() {
        if zeroed[c] {
            continue;
        }
        let q: Vec<bool> = (0..n)
            .map(|i| {
                comp_of[i] == c && grid.neighbors(i).iter().all(|&j| comp_of[j] != c || continuous(i, j))
            })
            .collect();
        let seed = grid
            .components(|i| q[i])
            .into_iter()
            .max_by_key(|s| s.len())
            .unwrap_or_else(|| vec![comp[0]]);
        let mut assigned = vec![false; n];
        let mut queue = VecDeque::new();
        for &i in &seed {
            theta[i] = per(i);
            multiplier[i] = 1;
            assigned[i] = true;
            queue.push_back(i);
        }
        while let Some(i) = queue.pop_front() {
            for j in grid.neighbors(i) {
                if comp_of[j] != c || assigned[j] {
                    continue;
                }
                let pj = per(j);
                let mut choice: Option<(u32, usize)> = None;
                for a in grid.neighbors(j).into_iter().filter(|&a| assigned[a]) {
                    let m = if edge_continuous(flow, grid.point(a), per(a), grid.point(j), pj, cfg) {
                        multiplier[a]
                    } else {
                        let m = (theta[a] / pj).round().max(1.0);
                        if (m * pj - theta[a]).abs() > cfg.jump_tol * theta[a] || m > cfg.max_multiplier as f64 {
                            return Err(FieldError::InconsistentRepair {
                                a: grid.point(a).clone(),
                                b: grid.point(j).clone(),
                                detail: format!("θ = {} is not close to a multiple of Per = {pj}", theta[a]),
                            });
                        }
                        m as u32
                    };
                    match choice {
                        Some((prev, pa)) if prev != m => {
                            return Err(FieldError::InconsistentRepair {
                                a: grid.point(pa).clone(),
                                b: grid.point(a).clone(),
                                detail: format!("multipliers {prev} and {m} at {:?}", grid.point(j)),
                            })
                        }
                        _ => choice = Some((m, a)),
                    }
                }
                let (m, _) = choice.expect("at least one assigned neighbour");
                theta[j] = m as f64 * pj;
                multiplier[j] = m;
                assigned[j] = true;
                queue.push_back(j);
            }
        }
        for &i in comp {
            dense_mask[i] = multiplier[i] == 1;
        }
    }

    // fixed points take the average of their neighbours' values
    for z in (0..n).filter(|&i| cls[i].is_fixed()) {
        let vals: Vec<f64> = grid
            .neighbors(z)
            .into_iter()
            .filter(|&j| comp_of[j] != usize::MAX && !zeroed[comp_of[j]])
            .map(|j| theta[j])
            .collect();
        if !vals.is_empty() {
            theta[z] = vals.iter().sum::<f64>() / vals.len() as f64;
        }
    }

    let outcome = if theta.iter().any(|&t| t != 0.0) { FieldOutcome::Generated } else { FieldOutcome::ZeroField };
    let residual = residuals(flow, grid.points(), &theta);
    Ok(PeriodFunctionField { grid: grid.clone(), classification: cls, theta, multiplier, dense_mask, residual, outcome, notes })
}

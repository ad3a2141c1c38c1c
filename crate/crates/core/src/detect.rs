//! Minimal-period detection by scanning `g(t) = dist(Φ(x,t), x)`.

use crate::domain::Point;
use crate::flow::FlowSpec;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    pub horizon: f64,
    pub return_tol: f64,
    pub fixed_tol: f64,
    /// Returns earlier than this are ignored. Defaults to `10·fixed_tol/‖F(x)‖`.
    pub t_floor: Option<f64>,
    pub m_max: usize,
    pub refine_iters: usize,
    /// Scan step. Defaults to `horizon / 20000`.
    pub scan_step: Option<f64>,
    /// Largest distance travelled between scan samples.
    pub arc_step: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            horizon: 100.0,
            return_tol: 1e-6,
            fixed_tol: 1e-8,
            t_floor: None,
            m_max: 7,
            refine_iters: 200,
            scan_step: None,
            arc_step: 2e-3,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.horizon > 0.0) {
            return Err("horizon must be positive".into());
        }
        if !(self.return_tol > 0.0 && self.fixed_tol > 0.0 && self.arc_step > 0.0) {
            return Err("tolerances must be positive".into());
        }
        if let Some(tf) = self.t_floor {
            if !(tf >= 0.0 && tf < self.horizon) {
                return Err("t_floor must lie in [0, horizon)".into());
            }
        }
        if self.scan_step.is_some_and(|s| !(s > 0.0)) {
            return Err("scan_step must be positive".into());
        }
        Ok(())
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_scan_step(mut self, step: f64) -> Self {
        self.scan_step = Some(step);
        self
    }

    pub fn scaled(mut self, s: f64) -> Self {
        self.return_tol *= s;
        self.fixed_tol *= s;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PeriodStatus {
    Fixed,
    Periodic,
    NonPeriodicEvidence,
    Unknown,
}

impl PeriodStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            PeriodStatus::Fixed => "fixed",
            PeriodStatus::Periodic => "periodic",
            PeriodStatus::NonPeriodicEvidence => "non_periodic_evidence",
            PeriodStatus::Unknown => "unknown",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodResult {
    pub status: PeriodStatus,
    pub minimal_period: Option<f64>,
    pub return_residual: Option<f64>,
    /// Infimum of `g` past `t_floor` when no return was found.
    pub evidence: Option<f64>,
    pub horizon: f64,
}

impl PeriodResult {
    fn bare(status: PeriodStatus, horizon: f64) -> Self {
        PeriodResult { status, minimal_period: None, return_residual: None, evidence: None, horizon }
    }

    pub fn period(&self) -> Option<f64> {
        self.minimal_period
    }

    pub fn is_fixed(&self) -> bool {
        self.status == PeriodStatus::Fixed
    }

    pub fn is_periodic(&self) -> bool {
        self.status == PeriodStatus::Periodic
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section minimisation of a unimodal `f` on `[a, b]`.
fn golden<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, width: f64, iters: usize) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if (b - a).abs() <= width {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

struct Sample {
    t: f64,
    g: f64,
    y: Point,
}

/// Classify `x` as fixed, periodic with its minimal period, or neither.
pub fn classify_point(flow: &FlowSpec, x: &[f64], cfg: &DetectorConfig) -> PeriodResult {
    let horizon = cfg.horizon.min(flow.max_horizon());
    if x.len() != flow.dim() || !flow.domain().contains(x) {
        return PeriodResult::bare(PeriodStatus::Unknown, horizon);
    }
    let speed = flow.speed(x);
    if speed < cfg.fixed_tol {
        let mut r = PeriodResult::bare(PeriodStatus::Fixed, horizon);
        r.return_residual = Some(0.0);
        return r;
    }
    let t_floor = cfg.t_floor.unwrap_or(10.0 * cfg.fixed_tol / speed.max(1e-12));
    let base = cfg.scan_step.unwrap_or(horizon / 20000.0);
    let h = if speed.is_finite() { base.min(cfg.arc_step / speed) } else { base };
    let vector_field = flow.vector_field_ref().is_some();

    // g(t) near a scan sample: closed forms are exact anywhere, vector fields
    // restart the integrator from the stored state.
    let local_g = |from: &Sample, t: f64| -> f64 {
        let y = if vector_field {
            flow.evaluate(&from.y, t - from.t)
        } else {
            flow.evaluate(x, t)
        };
        y.map_or(f64::INFINITY, |y| flow.distance(x, &y))
    };

    let mut traj = flow.trajectory(x, 1.0);
    let n_max = (horizon / h).ceil() as usize;
    let mut window: Vec<Sample> = vec![Sample { t: 0.0, g: 0.0, y: Point::from(x) }];
    let mut inf = f64::INFINITY;
    for i in 1..=n_max {
        let t = (i as f64 * h).min(horizon);
        let y = match traj.at(t) {
            Ok(y) => y,
            Err(_) => return PeriodResult::bare(PeriodStatus::Unknown, horizon),
        };
        let g = flow.distance(x, &y);
        if t >= t_floor {
            inf = inf.min(g);
        }
        window.push(Sample { t, g, y });
        if window.len() > 3 {
            window.remove(0);
        }
        if window.len() < 3 {
            continue;
        }
        let (a, b, c) = (&window[0], &window[1], &window[2]);
        let drop = (a.g - b.g).max(c.g - b.g);
        if b.t <= t_floor || b.g > a.g || b.g > c.g || b.g > drop + cfg.return_tol {
            continue;
        }
        let lo = a.t.max(t_floor);
        let (tm, gm) = golden(|s| local_g(a, s), lo, c.t, 1e-12, cfg.refine_iters);
        inf = inf.min(gm);
        if gm < cfg.return_tol {
            let (period, residual) = certify_minimal(flow, x, tm, gm, h, t_floor, cfg);
            return PeriodResult {
                status: PeriodStatus::Periodic,
                minimal_period: Some(period),
                return_residual: Some(residual),
                evidence: None,
                horizon,
            };
        }
    }
    let mut r = PeriodResult::bare(PeriodStatus::NonPeriodicEvidence, horizon);
    r.evidence = Some(inf);
    r
}

/// Check `T/m` for `m = 2..m_max`; an earlier return found there replaces `T`.
fn certify_minimal(
    flow: &FlowSpec,
    x: &[f64],
    mut period: f64,
    mut residual: f64,
    h: f64,
    t_floor: f64,
    cfg: &DetectorConfig,
) -> (f64, f64) {
    let g = |t: f64| flow.evaluate(x, t).map_or(f64::INFINITY, |y| flow.distance(x, &y));
    'outer: loop {
        for m in 2..=cfg.m_max.max(1) {
            let tm = period / m as f64;
            if tm <= t_floor {
                break;
            }
            if g(tm) < 10.0 * cfg.return_tol {
                let (t, r) = golden(g, (tm - h).max(t_floor), tm + h, 1e-12, cfg.refine_iters);
                if r < cfg.return_tol {
                    period = t;
                    residual = r;
                    continue 'outer;
                }
            }
        }
        return (period, residual);
    }
}

/// Classify many points in parallel; the output order matches the input.
pub fn classify_batch(flow: &FlowSpec, points: &[Point], cfg: &DetectorConfig) -> Vec<PeriodResult> {
    points.par_iter().map(|x| classify_point(flow, x, cfg)).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeSample {
    pub radius: f64,
    pub point: Point,
    pub result: PeriodResult,
}

#[derive(Clone, Debug, Serialize)]
pub struct LowerBoundProbe {
    pub samples: Vec<ProbeSample>,
    /// Smallest detected minimal period among the samples.
    pub inf_period: Option<f64>,
}

/// Unit directions `±e_k` and `(±e_k ± e_l)/√2`.
pub fn probe_directions(dim: usize) -> Vec<Vec<f64>> {
    let mut dirs = Vec::new();
    for k in 0..dim {
        for s in [1.0, -1.0] {
            let mut v = vec![0.0; dim];
            v[k] = s;
            dirs.push(v);
        }
    }
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for k in 0..dim {
        for l in k + 1..dim {
            for (sk, sl) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                let mut v = vec![0.0; dim];
                v[k] = sk * r;
                v[l] = sl * r;
                dirs.push(v);
            }
        }
    }
    dirs
}

/// Classify points at the given distances from `z` and report the smallest period.
pub fn period_lower_bound_probe(
    flow: &FlowSpec,
    z: &[f64],
    radii: &[f64],
    cfg: &DetectorConfig,
) -> LowerBoundProbe {
    let domain = flow.domain();
    let mut pts = Vec::new();
    for &r in radii {
        for u in probe_directions(z.len()) {
            let v: Vec<f64> = u.iter().map(|c| c * r).collect();
            let p = domain.offset(z, &v);
            if domain.contains(&p) {
                pts.push((r, p));
            }
        }
    }
    let results: Vec<PeriodResult> =
        pts.par_iter().map(|(_, p)| classify_point(flow, p, cfg)).collect();
    let inf_period = results.iter().filter_map(|r| r.minimal_period).reduce(f64::min);
    let samples = pts
        .into_iter()
        .zip(results)
        .map(|((radius, point), result)| ProbeSample { radius, point, result })
        .collect();
    LowerBoundProbe { samples, inf_period }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// CSV with columns `coords..., status, minimal_period, return_residual, evidence`.
pub fn write_results_csv<W: Write>(
    out: W,
    points: &[Point],
    results: &[PeriodResult],
) -> Result<(), csv::Error> {
    let dim = points.first().map_or(0, |p| p.dim());
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
    header.extend(["status", "minimal_period", "return_residual", "evidence"].map(String::from));
    w.write_record(&header)?;
    for (p, r) in points.iter().zip(results) {
        let mut row: Vec<String> = p.iter().map(|c| c.to_string()).collect();
        row.push(r.status.as_str().into());
        row.push(opt(r.minimal_period));
        row.push(opt(r.return_residual));
        row.push(opt(r.evidence));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_a_v_minimum() {
        let (t, g) = golden(|s| (s - 0.3).abs(), 0.0, 1.0, 1e-12, 200);
        assert!((t - 0.3).abs() < 1e-11 && g < 1e-11);
    }

    #[test]
    fn config_validation() {
        assert!(DetectorConfig::default().validate().is_ok());
        let bad = DetectorConfig { t_floor: Some(1e3), ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn directions_are_unit() {
        for d in probe_directions(3) {
            assert!((crate::domain::norm(&d) - 1.0).abs() < 1e-15);
        }
        assert_eq!(probe_directions(3).len(), 6 + 12);
    }
}

//! Built-in flows with known periods, period functions and linear parts.

use crate::detect::DetectorConfig;
use crate::domain::{norm, Domain, Point};
use crate::flow::{FieldMap, FlowMap, FlowSpec, LinearField, PolynomialField, Smoothness};
use crate::linearization::{real_jordan_matrix, BlockKind, JordanBlock, Verdict};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GalleryError {
    #[error("unknown gallery flow {0:?}")]
    UnknownName(String),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
}

pub const NAMES: [&str; 8] =
    ["seifert", "c_inf_disk", "c0_disk", "hamiltonian_even", "linear", "saddle", "rotation", "flat_circle"];

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GalleryParams {
    pub k: Option<u32>,
    pub b: Option<u32>,
    pub beta: Option<f64>,
    pub blocks: Option<Vec<JordanBlock>>,
}

impl GalleryParams {
    pub fn k(k: u32) -> Self {
        GalleryParams { k: Some(k), ..Default::default() }
    }

    pub fn b(b: u32) -> Self {
        GalleryParams { b: Some(b), ..Default::default() }
    }

    pub fn beta(beta: f64) -> Self {
        GalleryParams { beta: Some(beta), ..Default::default() }
    }

    pub fn blocks(blocks: Vec<JordanBlock>) -> Self {
        GalleryParams { blocks: Some(blocks), ..Default::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TruePeriod {
    Fixed,
    Periodic(f64),
    NonPeriodic,
}

impl TruePeriod {
    pub fn period(self) -> Option<f64> {
        match self {
            TruePeriod::Periodic(p) => Some(p),
            _ => None,
        }
    }
}

pub type PeriodTruth = Arc<dyn Fn(&[f64]) -> TruePeriod + Send + Sync>;
pub type ThetaTruth = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type Mask = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

#[derive(Clone)]
pub struct Truth {
    pub period: PeriodTruth,
    pub theta: Option<ThetaTruth>,
    pub fixed_point: Option<Point>,
    pub jacobian_at_fixed: Option<DMatrix<f64>>,
    pub expected_class: Option<Verdict>,
}

#[derive(Clone)]
pub struct GalleryEntry {
    pub name: String,
    pub flow: FlowSpec,
    pub domain: Domain,
    pub truth: Truth,
    /// Region used for grid sampling inside the domain box.
    pub sample_mask: Mask,
    /// Detector settings adapted to the entry's periods and speeds.
    pub detector: DetectorConfig,
}

impl std::fmt::Debug for GalleryEntry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GalleryEntry").field("name", &self.name).field("flow", &self.flow).finish()
    }
}

fn rotate(x: f64, y: f64, turns: f64) -> (f64, f64) {
    let (s, c) = (TAU * turns).sin_cos();
    (c * x - s * y, s * x + c * y)
}

fn r2(x: &[f64]) -> f64 {
    x[0] * x[0] + x[1] * x[1]
}

fn disk(radius: f64) -> Mask {
    Arc::new(move |x: &[f64]| r2(x) <= radius * radius + 1e-12)
}

pub fn gallery_get(name: &str, params: &GalleryParams) -> Result<GalleryEntry, GalleryError> {
    match name {
        "seifert" => seifert(params.k.unwrap_or(3)),
        "c_inf_disk" => Ok(c_inf_disk()),
        "c0_disk" => Ok(c0_disk()),
        "hamiltonian_even" => hamiltonian_even(params.b.unwrap_or(2)),
        "linear" => linear(params.blocks.clone().ok_or_else(|| {
            GalleryError::InvalidParam("linear needs a list of blocks".into())
        })?),
        "saddle" => Ok(saddle()),
        "rotation" => rotation(params.beta.unwrap_or(1.0)),
        "flat_circle" => Ok(flat_circle()),
        other => Err(GalleryError::UnknownName(other.to_string())),
    }
}

/// The solid torus `D² × S¹` with `Φ(z,τ,t) = (z·e^{2πit/k}, τ + t)`.
fn seifert(k: u32) -> Result<GalleryEntry, GalleryError> {
    if k < 2 {
        return Err(GalleryError::InvalidParam(format!("seifert needs k >= 2, got {k}")));
    }
    let kf = k as f64;
    let domain = Domain::new(vec![(-1.0, 1.0), (-1.0, 1.0), (0.0, 1.0)], vec![false, false, true], None)
        .expect("valid torus");
    let map: FlowMap = Arc::new(move |x: &[f64], t: f64| {
        let (a, b) = rotate(x[0], x[1], t / kf);
        Ok(vec![a, b, x[2] + t])
    });
    let field: FieldMap = Arc::new(move |x: &[f64]| vec![-TAU * x[1] / kf, TAU * x[0] / kf, 1.0]);
    let flow = FlowSpec::closed_form(format!("seifert(k={k})"), domain.clone(), Smoothness::Cinf, map, Some(field));
    let period: PeriodTruth =
        Arc::new(move |x: &[f64]| TruePeriod::Periodic(if r2(x) == 0.0 { 1.0 } else { kf }));
    Ok(GalleryEntry {
        name: "seifert".into(),
        flow,
        domain,
        truth: Truth {
            period,
            theta: Some(Arc::new(move |_: &[f64]| kf)),
            fixed_point: None,
            jacobian_at_fixed: None,
            expected_class: None,
        },
        sample_mask: disk(1.0),
        detector: DetectorConfig { horizon: kf + 0.5, scan_step: Some(2e-3), ..Default::default() },
    })
}

/// `Φ(z,t) = e^{2πit|z|²}·z`, periods `1/|z|²`.
fn c_inf_disk() -> GalleryEntry {
    let domain = Domain::cube(2, 1.0);
    let map: FlowMap = Arc::new(|x: &[f64], t: f64| {
        let (a, b) = rotate(x[0], x[1], t * r2(x));
        Ok(vec![a, b])
    });
    let field: FieldMap = Arc::new(|x: &[f64]| {
        let s = TAU * r2(x);
        vec![-s * x[1], s * x[0]]
    });
    let flow = FlowSpec::closed_form("c_inf_disk", domain.clone(), Smoothness::Cinf, map, Some(field));
    let period: PeriodTruth = Arc::new(|x: &[f64]| {
        let q = r2(x);
        if q == 0.0 {
            TruePeriod::Fixed
        } else {
            TruePeriod::Periodic(1.0 / q)
        }
    });
    GalleryEntry {
        name: "c_inf_disk".into(),
        flow,
        domain,
        truth: Truth {
            period,
            theta: Some(Arc::new(|x: &[f64]| 1.0 / r2(x))),
            fixed_point: Some(Point::zeros(2)),
            jacobian_at_fixed: Some(DMatrix::zeros(2, 2)),
            expected_class: Some(Verdict::ZeroLinearPart),
        },
        // periods diverge at the origin; sampling keeps away from it
        sample_mask: Arc::new(|x: &[f64]| {
            let q = r2(x);
            q <= 1.0 + 1e-12 && q >= 0.02 * 0.02
        }),
        detector: DetectorConfig { horizon: 30.0, arc_step: 1e-2, ..Default::default() },
    }
}

/// `Φ(z,t) = e^{2πit/|z|²}·z`, `Φ(0,t) = 0`: continuous but not differentiable at 0.
fn c0_disk() -> GalleryEntry {
    let domain = Domain::cube(2, 1.0);
    let map: FlowMap = Arc::new(|x: &[f64], t: f64| {
        let q = r2(x);
        if q == 0.0 {
            return Ok(vec![0.0, 0.0]);
        }
        let (a, b) = rotate(x[0], x[1], t / q);
        Ok(vec![a, b])
    });
    let flow = FlowSpec::closed_form("c0_disk", domain.clone(), Smoothness::C0, map, None);
    let period: PeriodTruth = Arc::new(|x: &[f64]| {
        let q = r2(x);
        if q == 0.0 {
            TruePeriod::Fixed
        } else {
            TruePeriod::Periodic(q)
        }
    });
    GalleryEntry {
        name: "c0_disk".into(),
        flow,
        domain,
        truth: Truth {
            period,
            theta: Some(Arc::new(r2)),
            fixed_point: Some(Point::zeros(2)),
            jacobian_at_fixed: None,
            expected_class: None,
        },
        sample_mask: disk(1.0),
        detector: DetectorConfig { horizon: 1.5, scan_step: Some(1e-3), ..Default::default() },
    }
}

/// `∫₀¹ du / √(1 − u^{2b})`, integrated after `u = 1 − v²` which removes the
/// endpoint singularity.
pub fn hamiltonian_period_integral(b: u32) -> f64 {
    let tb = 2.0 * b as f64;
    let g = |v: f64| {
        if v == 0.0 {
            return 2.0 / tb.sqrt();
        }
        let w = -(tb * (-v * v).ln_1p()).exp_m1();
        2.0 * v / w.sqrt()
    };
    let n = 20_000;
    let h = 1.0 / n as f64;
    let mut s = g(0.0) + g(1.0);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * g(i as f64 * h);
    }
    s * h / 3.0
}

/// Hamiltonian field of `f = x^{2b} + y²`; nilpotent linear part at the origin.
fn hamiltonian_even(b: u32) -> Result<GalleryEntry, GalleryError> {
    if b < 2 {
        return Err(GalleryError::InvalidParam(format!("hamiltonian_even needs b >= 2, got {b}")));
    }
    let domain = Domain::cube(2, 2.0);
    let comps = ["-2*y".to_string(), format!("{}*x^{}", 2 * b, 2 * b - 1)];
    let field = PolynomialField::parse(2, &comps).expect("valid polynomial");
    let flow = FlowSpec::vector_field(format!("hamiltonian_even(b={b})"), domain.clone(), Smoothness::Cinf, Arc::new(field))
        .expect("valid field");
    let integral = hamiltonian_period_integral(b);
    let bf = b as f64;
    // along f = c the period is 2·s^{1-b}·I(b) with s = c^{1/(2b)}
    let period: PeriodTruth = Arc::new(move |x: &[f64]| {
        let c = x[0].powi(2 * b as i32) + x[1] * x[1];
        if c == 0.0 {
            TruePeriod::Fixed
        } else {
            let s = c.powf(1.0 / (2.0 * bf));
            TruePeriod::Periodic(2.0 * s.powf(1.0 - bf) * integral)
        }
    });
    Ok(GalleryEntry {
        name: "hamiltonian_even".into(),
        flow,
        domain,
        truth: Truth {
            period,
            theta: None,
            fixed_point: Some(Point::zeros(2)),
            jacobian_at_fixed: Some(DMatrix::from_row_slice(2, 2, &[0.0, -2.0, 0.0, 0.0])),
            expected_class: Some(Verdict::DegenerateBlock),
        },
        sample_mask: disk(1.0),
        detector: DetectorConfig { horizon: 200.0, ..Default::default() },
    })
}

/// Period of `ẋ = Ax` for `A` in real Jordan form, read off the blocks.
fn linear_period(blocks: &[JordanBlock], x: &[f64]) -> TruePeriod {
    let mut freqs: Vec<f64> = Vec::new();
    let mut o = 0;
    for blk in blocks {
        let part = &x[o..o + blk.dim()];
        o += blk.dim();
        if part.iter().all(|&c| c == 0.0) {
            continue;
        }
        match blk.kind {
            BlockKind::Real { lambda } => {
                if lambda != 0.0 || part[1..].iter().any(|&c| c != 0.0) {
                    return TruePeriod::NonPeriodic;
                }
            }
            BlockKind::Complex { a, b } => {
                if a != 0.0 || part[2..].iter().any(|&c| c != 0.0) {
                    return TruePeriod::NonPeriodic;
                }
                freqs.push(b.abs());
            }
        }
    }
    if freqs.is_empty() {
        return TruePeriod::Fixed;
    }
    // common period 2π·q/ω₀ for frequency ratios p/q with small denominators
    let w0 = freqs[0];
    let mut q_all = 1u64;
    for &w in &freqs[1..] {
        let r = w / w0;
        match (1..=64u64).find(|&q| ((r * q as f64).round() - r * q as f64).abs() < 1e-9) {
            Some(q) => q_all = lcm(q_all, q),
            None => return TruePeriod::NonPeriodic,
        }
    }
    TruePeriod::Periodic(TAU * q_all as f64 / w0)
}

fn lcm(a: u64, b: u64) -> u64 {
    fn gcd(a: u64, b: u64) -> u64 {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    a / gcd(a, b) * b
}

fn expected_verdict(blocks: &[JordanBlock]) -> Verdict {
    let re = |b: &JordanBlock| match b.kind {
        BlockKind::Real { lambda } => lambda,
        BlockKind::Complex { a, .. } => a,
    };
    if blocks.iter().any(|b| re(b) != 0.0) {
        Verdict::HyperbolicPart
    } else if blocks.iter().any(|b| b.size >= 2) {
        Verdict::DegenerateBlock
    } else if blocks.iter().all(|b| matches!(b.kind, BlockKind::Real { .. })) {
        Verdict::ZeroLinearPart
    } else {
        Verdict::PeriodicType
    }
}

fn linear_entry(name: &str, blocks: Vec<JordanBlock>, a: DMatrix<f64>) -> GalleryEntry {
    let n = a.nrows();
    let domain = Domain::cube(n, 2.0);
    let flow = FlowSpec::vector_field(name, domain.clone(), Smoothness::Cinf, Arc::new(LinearField::new(a.clone())))
        .expect("valid linear field");
    let verdict = expected_verdict(&blocks);
    let max_w = blocks
        .iter()
        .filter_map(|b| match b.kind {
            BlockKind::Complex { b, .. } => Some(b.abs()),
            _ => None,
        })
        .fold(f64::INFINITY, f64::min);
    let horizon = if max_w.is_finite() { (4.0 * PI / max_w).max(10.0) } else { 10.0 };
    GalleryEntry {
        name: name.into(),
        flow,
        domain,
        truth: Truth {
            period: Arc::new(move |x: &[f64]| linear_period(&blocks, x)),
            theta: None,
            fixed_point: Some(Point::zeros(n)),
            jacobian_at_fixed: Some(a),
            expected_class: Some(verdict),
        },
        sample_mask: Arc::new(|x: &[f64]| norm(x) <= 1.0 + 1e-12),
        detector: DetectorConfig { horizon, ..Default::default() },
    }
}

fn linear(blocks: Vec<JordanBlock>) -> Result<GalleryEntry, GalleryError> {
    if blocks.is_empty() || blocks.iter().any(|b| b.size == 0) {
        return Err(GalleryError::InvalidParam("blocks must be non-empty with positive sizes".into()));
    }
    let a = real_jordan_matrix(&blocks);
    Ok(linear_entry("linear", blocks, a))
}

/// `ẋ = x, ẏ = −y`.
fn saddle() -> GalleryEntry {
    let domain = Domain::cube(2, 2.0);
    let field = PolynomialField::parse(2, &["x", "-y"]).expect("valid polynomial");
    let flow = FlowSpec::vector_field("saddle", domain.clone(), Smoothness::Cinf, Arc::new(field)).expect("valid field");
    GalleryEntry {
        name: "saddle".into(),
        flow,
        domain,
        truth: Truth {
            period: Arc::new(|x: &[f64]| if r2(x) == 0.0 { TruePeriod::Fixed } else { TruePeriod::NonPeriodic }),
            theta: Some(Arc::new(|_: &[f64]| 0.0)),
            fixed_point: Some(Point::zeros(2)),
            jacobian_at_fixed: Some(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0])),
            expected_class: Some(Verdict::HyperbolicPart),
        },
        sample_mask: disk(1.0),
        detector: DetectorConfig { horizon: 20.0, ..Default::default() },
    }
}

/// `(−βy, βx)`, period `2π/|β|`.
fn rotation(beta: f64) -> Result<GalleryEntry, GalleryError> {
    if !(beta.is_finite() && beta != 0.0) {
        return Err(GalleryError::InvalidParam(format!("rotation needs a finite nonzero beta, got {beta}")));
    }
    let domain = Domain::cube(2, 2.0);
    let comps = [format!("-({beta:?})*y"), format!("({beta:?})*x")];
    let field = PolynomialField::parse(2, &comps).expect("valid polynomial");
    let flow = FlowSpec::vector_field(format!("rotation(beta={beta})"), domain.clone(), Smoothness::Cinf, Arc::new(field))
        .expect("valid field");
    let per = TAU / beta.abs();
    Ok(GalleryEntry {
        name: "rotation".into(),
        flow,
        domain,
        truth: Truth {
            period: Arc::new(move |x: &[f64]| if r2(x) == 0.0 { TruePeriod::Fixed } else { TruePeriod::Periodic(per) }),
            theta: Some(Arc::new(move |_: &[f64]| per)),
            fixed_point: Some(Point::zeros(2)),
            jacobian_at_fixed: Some(DMatrix::from_row_slice(2, 2, &[0.0, -beta, beta, 0.0])),
            expected_class: Some(Verdict::PeriodicType),
        },
        sample_mask: disk(1.0),
        detector: DetectorConfig { horizon: 1.5 * per, ..Default::default() },
    })
}

/// The linear field on ℝ⁴ with a nilpotent 2-block and a unit rotation block.
fn flat_circle() -> GalleryEntry {
    #[rustfmt::skip]
    let a = DMatrix::from_row_slice(4, 4, &[
        0.0, 0.0, 0.0, 0.0,
        1.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, -1.0,
        0.0, 0.0, 1.0, 0.0,
    ]);
    let mut e = linear_entry("flat_circle", vec![], a);
    e.truth.period = Arc::new(|x: &[f64]| {
        if x[0] != 0.0 {
            TruePeriod::NonPeriodic
        } else if x[2] == 0.0 && x[3] == 0.0 {
            TruePeriod::Fixed
        } else {
            TruePeriod::Periodic(TAU)
        }
    });
    e.truth.expected_class = Some(Verdict::DegenerateBlock);
    e.detector = DetectorConfig { horizon: 10.0, ..Default::default() };
    e
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lemniscate_constant() {
        // ∫₀¹ du/√(1−u⁴) = ϖ/2 with ϖ = 2.62205755429211981...
        assert!((hamiltonian_period_integral(2) - 1.311_028_777_146_06).abs() < 1e-9);
    }

    #[test]
    fn parameters_are_validated() {
        assert!(matches!(gallery_get("seifert", &GalleryParams::k(1)), Err(GalleryError::InvalidParam(_))));
        assert!(matches!(gallery_get("hamiltonian_even", &GalleryParams::b(1)), Err(GalleryError::InvalidParam(_))));
        assert!(matches!(gallery_get("nope", &GalleryParams::default()), Err(GalleryError::UnknownName(_))));
        for n in NAMES {
            let p = if n == "linear" {
                GalleryParams::blocks(vec![JordanBlock::complex(0.0, 1.0, 1)])
            } else {
                GalleryParams::default()
            };
            assert!(gallery_get(n, &p).is_ok(), "{n}");
        }
    }

    #[test]
    fn truth_values() {
        let s = gallery_get("seifert", &GalleryParams::k(3)).unwrap();
        assert_eq!((s.truth.period)(&[0.4, 0.0, 0.2]), TruePeriod::Periodic(3.0));
        assert_eq!((s.truth.period)(&[0.0, 0.0, 0.2]), TruePeriod::Periodic(1.0));
        let c0 = gallery_get("c0_disk", &GalleryParams::default()).unwrap();
        assert_eq!((c0.truth.theta.unwrap())(&[0.0, 0.0]), 0.0);
        let r = gallery_get("rotation", &GalleryParams::beta(TAU)).unwrap();
        assert!(((r.truth.period)(&[0.3, 0.1]).period().unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn linear_period_uses_common_multiple() {
        let blocks = [JordanBlock::complex(0.0, 1.0, 1), JordanBlock::complex(0.0, 2.0, 1)];
        assert_eq!(linear_period(&blocks, &[1.0, 0.0, 1.0, 0.0]), TruePeriod::Periodic(TAU));
        assert_eq!(linear_period(&blocks, &[0.0, 0.0, 1.0, 0.0]), TruePeriod::Periodic(PI));
        let irr = [JordanBlock::complex(0.0, 1.0, 1), JordanBlock::complex(0.0, 2f64.sqrt(), 1)];
        assert_eq!(linear_period(&irr, &[1.0, 0.0, 1.0, 0.0]), TruePeriod::NonPeriodic);
    }
}

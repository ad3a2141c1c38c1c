//! Linear parts at fixed points: Jacobians, real Jordan structure, the
//! classification of fixed points, the γ speed bound and the period blow-up probe.

use crate::detect::{classify_point, DetectorConfig, PeriodResult, PeriodStatus};
use crate::domain::{norm, Point};
use crate::flow::{FlowError, FlowSpec, Smoothness};
use crate::grid::Grid;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinearizationError {
    #[error("flow is declared C0; its linear part is undefined")]
    NotC1,
    #[error("finite-difference Jacobian did not converge (Richardson estimates differ by {0:e})")]
    FDNonConvergent(f64),
    #[error("eigenvalue clusters are not separable: {0}")]
    IllConditioned(String),
    #[error(transparent)]
    Flow(#[from] FlowError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BlockKind {
    Real { lambda: f64 },
    Complex { a: f64, b: f64 },
}

/// A real Jordan block `J_q(λ)` or `J_q(a ± ib)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JordanBlock {
    #[serde(flatten)]
    pub kind: BlockKind,
    pub size: usize,
}

impl JordanBlock {
    pub fn real(lambda: f64, size: usize) -> Self {
        JordanBlock { kind: BlockKind::Real { lambda }, size }
    }

    pub fn complex(a: f64, b: f64, size: usize) -> Self {
        JordanBlock { kind: BlockKind::Complex { a, b }, size }
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            BlockKind::Real { .. } => self.size,
            BlockKind::Complex { .. } => 2 * self.size,
        }
    }

    pub fn label(&self) -> String {
        match self.kind {
            BlockKind::Real { lambda } => format!("J{}({})", self.size, lambda),
            BlockKind::Complex { a, b } => format!("J{}({}±{}i)", self.size, a, b.abs()),
        }
    }
}

/// Block-diagonal real Jordan matrix; complex blocks use `R(a,b) = [[a,-b],[b,a]]`.
pub fn real_jordan_matrix(blocks: &[JordanBlock]) -> DMatrix<f64> {
    let n: usize = blocks.iter().map(|b| b.dim()).sum();
    let mut m = DMatrix::zeros(n, n);
    let mut o = 0;
    for blk in blocks {
        match blk.kind {
            BlockKind::Real { lambda } => {
                for i in 0..blk.size {
                    m[(o + i, o + i)] = lambda;
                    if i + 1 < blk.size {
                        m[(o + i, o + i + 1)] = 1.0;
                    }
                }
            }
            BlockKind::Complex { a, b } => {
                for i in 0..blk.size {
                    let r = o + 2 * i;
                    m[(r, r)] = a;
                    m[(r, r + 1)] = -b;
                    m[(r + 1, r)] = b;
                    m[(r + 1, r + 1)] = a;
                    if i + 1 < blk.size {
                        m[(r, r + 2)] = 1.0;
                        m[(r + 1, r + 3)] = 1.0;
                    }
                }
            }
        }
        o += blk.dim();
    }
    m
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearPart {
    pub matrix: DMatrix<f64>,
    pub eigenvalues: Vec<Complex64>,
    pub blocks: Vec<JordanBlock>,
    /// Spectral norm used for normalisation.
    pub scale: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    HyperbolicPart,
    DegenerateBlock,
    ZeroLinearPart,
    PeriodicType,
    Indeterminate,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::HyperbolicPart => "hyperbolic_part",
            Verdict::DegenerateBlock => "degenerate_block",
            Verdict::ZeroLinearPart => "zero_linear_part",
            Verdict::PeriodicType => "periodic_type",
            Verdict::Indeterminate => "indeterminate",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FixedPointClass {
    pub verdict: Verdict,
    pub detail: String,
    pub linear_part: Option<LinearPart>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct LinearizationConfig {
    pub eig_tol: f64,
    /// Eigenvalues of the normalised matrix closer than this are one cluster.
    pub cluster_tol: f64,
    pub fd_step: Option<f64>,
}

impl Default for LinearizationConfig {
    fn default() -> Self {
        LinearizationConfig { eig_tol: 1e-7, cluster_tol: 1e-3, fd_step: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum JacobianMethod {
    Analytic,
    Richardson,
}

#[derive(Clone, Debug)]
pub struct JacobianEstimate {
    pub matrix: DMatrix<f64>,
    pub method: JacobianMethod,
    pub error_estimate: f64,
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, v| a.max(v.abs()))
}

fn fd_jacobian(flow: &FlowSpec, z: &[f64], h: f64) -> Result<DMatrix<f64>, FlowError> {
    let n = z.len();
    let mut j = DMatrix::zeros(n, n);
    for c in 0..n {
        let mut e = vec![0.0; n];
        e[c] = h;
        let fp = flow.field(&flow.domain().offset(z, &e))?;
        e[c] = -h;
        let fm = flow.field(&flow.domain().offset(z, &e))?;
        for r in 0..n {
            j[(r, c)] = (fp[r] - fm[r]) / (2.0 * h);
        }
    }
    Ok(j)
}

/// `∂F_i/∂x_j` at `z`: exact for polynomial and linear fields, otherwise
/// central differences with one Richardson extrapolation at two step pairs.
pub fn jacobian_at(
    flow: &FlowSpec,
    z: &[f64],
    cfg: &LinearizationConfig,
) -> Result<JacobianEstimate, LinearizationError> {
    if flow.smoothness() == Smoothness::C0 {
        return Err(LinearizationError::NotC1);
    }
    if let Some(m) = flow.vector_field_ref().and_then(|v| v.jacobian(z)) {
        return Ok(JacobianEstimate { matrix: m, method: JacobianMethod::Analytic, error_estimate: 0.0 });
    }
    let h = cfg.fd_step.unwrap_or(1e-3 * norm(z).max(1.0));
    let d1 = fd_jacobian(flow, z, h)?;
    let d2 = fd_jacobian(flow, z, h / 2.0)?;
    let d4 = fd_jacobian(flow, z, h / 4.0)?;
    let r1 = (&d2 * 4.0 - &d1) / 3.0;
    let r2 = (&d4 * 4.0 - &d2) / 3.0;
    let err = max_abs(&(&r1 - &r2)) / max_abs(&r2).max(1.0);
    if err > 10.0 * cfg.eig_tol {
        return Err(LinearizationError::FDNonConvergent(err));
    }
    Ok(JacobianEstimate { matrix: r2, method: JacobianMethod::Richardson, error_estimate: err })
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().iter().fold(0.0, |a: f64, &v| a.max(v))
}

fn nullity(m: &DMatrix<f64>, cutoff: f64) -> usize {
    m.nrows() - m.clone().singular_values().iter().filter(|&&s| s > cutoff).count()
}

/// Block sizes from the nullities `ν_j` of `M^j`, `j = 1..=mult`.
fn block_sizes(nu: &[usize], mult: usize) -> Option<Vec<usize>> {
    let mut prev = 0;
    let mut ge = Vec::new();
    for &v in nu {
        if v < prev {
            return None;
        }
        ge.push(v - prev);
        prev = v;
    }
    if prev != mult || ge.windows(2).any(|w| w[1] > w[0]) {
        return None;
    }
    let mut sizes = Vec::new();
    for j in 0..ge.len() {
        let next = ge.get(j + 1).copied().unwrap_or(0);
        for _ in 0..ge[j] - next {
            sizes.push(j + 1);
        }
    }
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    Some(sizes)
}

/// Eigenvalues and real Jordan block structure of a square matrix.
pub fn real_jordan_classify(
    matrix: &DMatrix<f64>,
    cfg: &LinearizationConfig,
) -> Result<LinearPart, LinearizationError> {
    assert!(matrix.is_square(), "square matrix required");
    let n = matrix.nrows();
    let scale = spectral_norm(matrix);
    if scale < cfg.eig_tol {
        return Ok(LinearPart {
            matrix: matrix.clone(),
            eigenvalues: vec![Complex64::new(0.0, 0.0); n],
            blocks: vec![JordanBlock::real(0.0, 1); n],
            scale,
        });
    }
    let b = matrix / scale;
    let eig: Vec<Complex64> = b.complex_eigenvalues().iter().copied().collect();

    // single-linkage clustering
    let mut label: Vec<usize> = (0..n).collect();
    loop {
        let mut changed = false;
        for i in 0..n {
            for j in 0..n {
                if label[i] != label[j] && (eig[i] - eig[j]).norm() < cfg.cluster_tol {
                    let (lo, hi) = (label[i].min(label[j]), label[i].max(label[j]));
                    label.iter_mut().filter(|l| **l == hi).for_each(|l| *l = lo);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let mut ids: Vec<usize> = label.clone();
    ids.sort_unstable();
    ids.dedup();
    let clusters: Vec<(Complex64, usize)> = ids
        .iter()
        .map(|&id| {
            let members: Vec<Complex64> =
                label.iter().zip(&eig).filter(|(l, _)| **l == id).map(|(_, e)| *e).collect();
            let mean = members.iter().sum::<Complex64>() / members.len() as f64;
            (mean, members.len())
        })
        .collect();
    for (i, a) in clusters.iter().enumerate() {
        for c in &clusters[i + 1..] {
            if (a.0 - c.0).norm() < 10.0 * cfg.cluster_tol {
                return Err(LinearizationError::IllConditioned(format!(
                    "clusters at {} and {} are too close",
                    a.0 * scale,
                    c.0 * scale
                )));
            }
        }
    }

    let id = DMatrix::<f64>::identity(n, n);
    let cutoff = cfg.eig_tol;
    let mut blocks = Vec::new();
    for &(mean, mult) in &clusters {
        if mean.im.abs() <= cfg.cluster_tol {
            let lambda = mean.re;
            let m = &b - &id * lambda;
            let mut p = m.clone();
            let mut nu = Vec::new();
            for j in 1..=mult {
                if j > 1 {
                    p = &p * &m;
                }
                nu.push(nullity(&p, cutoff));
            }
            let sizes = block_sizes(&nu, mult).ok_or_else(|| {
                LinearizationError::IllConditioned(format!(
                    "inconsistent kernel dimensions {nu:?} for eigenvalue {}",
                    lambda * scale
                ))
            })?;
            blocks.extend(sizes.into_iter().map(|s| JordanBlock::real(lambda * scale, s)));
        } else if mean.im > 0.0 {
            let (a, bi) = (mean.re, mean.im);
            let shifted = &b - &id * a;
            let m = &shifted * &shifted + &id * (bi * bi);
            let mut p = m.clone();
            let mut nu = Vec::new();
            for j in 1..=mult {
                if j > 1 {
                    p = &p * &m;
                }
                let k = nullity(&p, cutoff);
                if k % 2 != 0 {
                    return Err(LinearizationError::IllConditioned(format!(
                        "odd kernel dimension for pair {}±{}i",
                        a * scale,
                        bi * scale
                    )));
                }
                nu.push(k / 2);
            }
            let sizes = block_sizes(&nu, mult).ok_or_else(|| {
                LinearizationError::IllConditioned(format!(
                    "inconsistent kernel dimensions {nu:?} for pair {}±{}i",
                    a * scale,
                    bi * scale
                ))
            })?;
            blocks.extend(sizes.into_iter().map(|s| JordanBlock::complex(a * scale, bi * scale, s)));
        }
    }
    let total: usize = blocks.iter().map(|b| b.dim()).sum();
    if total != n {
        return Err(LinearizationError::IllConditioned(format!(
            "blocks cover {total} of {n} dimensions"
        )));
    }
    let mut eigenvalues: Vec<Complex64> = eig.iter().map(|e| e * scale).collect();
    eigenvalues.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(LinearPart { matrix: matrix.clone(), eigenvalues, blocks, scale })
}

/// Classification of a matrix by the fixed-point trichotomy.
pub fn classify_matrix(matrix: &DMatrix<f64>, cfg: &LinearizationConfig) -> FixedPointClass {
    let lp = match real_jordan_classify(matrix, cfg) {
        Ok(lp) => lp,
        Err(e) => {
            return FixedPointClass { verdict: Verdict::Indeterminate, detail: e.to_string(), linear_part: None }
        }
    };
    let tol = cfg.eig_tol * lp.scale.max(1.0);
    let re_of = |b: &JordanBlock| match b.kind {
        BlockKind::Real { lambda } => lambda,
        BlockKind::Complex { a, .. } => a,
    };
    let (verdict, detail) = if let Some(b) = lp.blocks.iter().find(|b| re_of(b).abs() > tol) {
        (Verdict::HyperbolicPart, format!("eigenvalue with nonzero real part in {}", b.label()))
    } else if let Some(b) = lp.blocks.iter().find(|b| b.size >= 2) {
        (Verdict::DegenerateBlock, format!("block {}", b.label()))
    } else if lp.scale < cfg.eig_tol {
        (Verdict::ZeroLinearPart, "linear part vanishes".to_string())
    } else {
        let betas: Vec<String> = lp
            .blocks
            .iter()
            .filter_map(|b| match b.kind {
                BlockKind::Complex { b, .. } => Some(format!("{b}")),
                _ => None,
            })
            .collect();
        (Verdict::PeriodicType, format!("semisimple, frequencies [{}]", betas.join(", ")))
    };
    FixedPointClass { verdict, detail, linear_part: Some(lp) }
}

pub fn classify_fixed_point(flow: &FlowSpec, z: &[f64], cfg: &LinearizationConfig) -> FixedPointClass {
    match jacobian_at(flow, z, cfg) {
        Ok(j) => classify_matrix(&j.matrix, cfg),
        Err(e) => FixedPointClass { verdict: Verdict::Indeterminate, detail: e.to_string(), linear_part: None },
    }
}

/// Fixed points found by damped Newton iterations seeded at grid nodes where
/// `‖F‖` is locally minimal.
pub fn locate_fixed_points(
    flow: &FlowSpec,
    grid: &Grid,
    fixed_tol: f64,
    cfg: &LinearizationConfig,
) -> Vec<Point> {
    let speeds: Vec<f64> = grid.points().par_iter().map(|p| flow.speed(p)).collect();
    let seeds: Vec<usize> = (0..grid.len())
        .filter(|&i| grid.neighbors(i).iter().all(|&j| speeds[i] <= speeds[j]))
        .collect();
    let found: Vec<Option<Point>> = seeds
        .par_iter()
        .map(|&i| {
            let mut x = grid.point(i).clone();
            for _ in 0..200 {
                let f = flow.field(&x).ok()?;
                if norm(&f) < fixed_tol {
                    return Some(x);
                }
                let j = jacobian_at(flow, &x, cfg).ok()?.matrix;
                let svd = j.svd(true, true);
                let rhs = nalgebra::DVector::from_vec(f);
                let step = svd.solve(&rhs, 1e-12).ok()?;
                let v: Vec<f64> = step.iter().map(|s| -s).collect();
                x = flow.domain().offset(&x, &v);
                if !flow.domain().contains(&x) {
                    return None;
                }
            }
            None
        })
        .collect();
    let mut out: Vec<Point> = Vec::new();
    for p in found.into_iter().flatten() {
        if out.iter().all(|q| flow.distance(q, &p) > 1e-4) {
            out.push(p);
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct GammaPoint {
    pub radius: f64,
    pub gamma: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct QuadraticDiagnostic {
    /// True when the flow is C2 or smoother with vanishing linear part.
    pub applies: bool,
    /// `M_i(r) = sup |F_i(Φ(x,t))| / r²` per radius, per component.
    pub per_component: Vec<Vec<f64>>,
    /// Components whose `M_i(r)` grows as `r` shrinks.
    pub rejected_components: Vec<usize>,
    /// `sup_r sup ‖F(Φ(x,t))‖ / r²` when the fit applies and no component is rejected.
    pub m_empirical: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GammaReport {
    pub curve: Vec<GammaPoint>,
    pub quadratic: QuadraticDiagnostic,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct GammaConfig {
    pub directions: usize,
    pub time_samples: usize,
}

impl Default for GammaConfig {
    fn default() -> Self {
        GammaConfig { directions: 16, time_samples: 128 }
    }
}

fn sphere_directions(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    if dim == 2 {
        return (0..count)
            .map(|i| {
                let a = std::f64::consts::TAU * i as f64 / count as f64;
                vec![a.cos(), a.sin()]
            })
            .collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let n = norm(&v);
            v.into_iter().map(|c| c / n).collect()
        })
        .collect()
}

/// Empirical `γ(r) = sup ‖F(Φ(x,t))‖ / ‖x − z‖` over `|t| ≤ T` for sample points at radius `r`.
pub fn gamma_estimate(
    flow: &FlowSpec,
    z: &[f64],
    t_max: f64,
    radii: &[f64],
    lin: &LinearizationConfig,
    cfg: &GammaConfig,
) -> GammaReport {
    let dim = z.len();
    let dirs = sphere_directions(dim, cfg.directions, 0x6a);
    let per_radius: Vec<(f64, Vec<f64>)> = radii
        .par_iter()
        .map(|&r| {
            let mut gamma: f64 = 0.0;
            let mut comp = vec![0.0f64; dim];
            for u in &dirs {
                let v: Vec<f64> = u.iter().map(|c| c * r).collect();
                let x = flow.domain().offset(z, &v);
                if !flow.domain().contains(&x) {
                    continue;
                }
                let dist = flow.distance(&x, z);
                for sign in [1.0, -1.0] {
                    let mut traj = flow.trajectory(&x, sign);
                    for k in 0..=cfg.time_samples {
                        let t = sign * t_max * k as f64 / cfg.time_samples as f64;
                        let Ok(y) = traj.at(t) else { break };
                        let Ok(f) = flow.field(&y) else { break };
                        gamma = gamma.max(norm(&f) / dist);
                        for (c, fi) in comp.iter_mut().zip(&f) {
                            *c = c.max(fi.abs() / (dist * dist));
                        }
                    }
                }
            }
            (gamma, comp)
        })
        .collect();
    let curve = radii.iter().zip(&per_radius).map(|(&radius, (g, _))| GammaPoint { radius, gamma: *g }).collect();
    let per_component: Vec<Vec<f64>> = per_radius.iter().map(|(_, c)| c.clone()).collect();

    // radii sorted from largest to smallest for the growth test
    let mut order: Vec<usize> = (0..radii.len()).collect();
    order.sort_by(|&a, &b| radii[b].total_cmp(&radii[a]));
    let rejected_components: Vec<usize> = (0..dim)
        .filter(|&i| {
            if order.len() < 2 {
                return false;
            }
            let first = per_component[order[0]][i];
            let last = per_component[*order.last().unwrap()][i];
            last > 1.5 * first + 1e-300
        })
        .collect();
    let applies = flow.smoothness() >= Smoothness::C2
        && jacobian_at(flow, z, lin).is_ok_and(|j| max_abs(&j.matrix) < lin.eig_tol);
    let m_empirical = if applies && rejected_components.is_empty() {
        per_radius
            .iter()
            .zip(radii)
            .map(|((g, _), r)| g / r)
            .reduce(f64::max)
    } else {
        None
    };
    GammaReport {
        curve,
        quadratic: QuadraticDiagnostic { applies, per_component, rejected_components, m_empirical },
    }
}

/// Where the blow-up probe places its samples around the fixed point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SampleRegion {
    /// Directions `u` with `|u_1| ≥ ε`; the first direction is `e_1`.
    Cone { epsilon: f64 },
    /// Directions in the span of the listed coordinates.
    Subspace { coords: Vec<usize> },
}

pub const BLOWUP_DIRECTIONS: usize = 32;

pub fn region_directions(dim: usize, region: &SampleRegion) -> Vec<Vec<f64>> {
    match region {
        SampleRegion::Cone { epsilon } => {
            let eps = epsilon.clamp(0.0, 1.0);
            if dim == 2 {
                let half = BLOWUP_DIRECTIONS / 2;
                let amax = eps.acos();
                let mut out = Vec::new();
                for s in [1.0, -1.0] {
                    for i in 0..half {
                        // 0, +a, -a, +2a, ... symmetric around the axis
                        let k = (i + 1) / 2;
                        let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
                        let a = sign * amax * k as f64 / (half / 2) as f64;
                        out.push(vec![s * a.cos(), a.sin()]);
                    }
                }
                return out;
            }
            let mut out = vec![{
                let mut e = vec![0.0; dim];
                e[0] = 1.0;
                e
            }];
            let mut rng = ChaCha8Rng::seed_from_u64(0xc0e);
            while out.len() < BLOWUP_DIRECTIONS {
                let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                let n = norm(&v);
                if v[0].abs() >= eps * n {
                    out.push(v.into_iter().map(|c| c / n).collect());
                }
            }
            out
        }
        SampleRegion::Subspace { coords } => {
            let k = coords.len();
            let local = sphere_directions(k.max(1), BLOWUP_DIRECTIONS, 0x5b);
            local
                .into_iter()
                .map(|u| {
                    let mut v = vec![0.0; dim];
                    for (c, &i) in u.iter().zip(coords) {
                        v[i] = *c;
                    }
                    v
                })
                .collect()
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BlowupRow {
    pub radius: f64,
    /// Smallest detected minimal period over the sampled directions.
    pub min_period: Option<f64>,
    /// Period of the sample along the first direction.
    pub axis_period: Option<f64>,
    pub periodic: usize,
    /// Samples without a return: no return within the horizon, or the orbit left the domain.
    pub non_returning: usize,
    pub fixed: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct BlowupReport {
    pub region: SampleRegion,
    pub threshold: f64,
    pub rows: Vec<BlowupRow>,
    pub strictly_increasing: bool,
    pub blowup_observed: bool,
}

/// Classify samples around `z` at shrinking radii and report how the periods behave.
pub fn period_blowup_probe(
    flow: &FlowSpec,
    z: &[f64],
    region: &SampleRegion,
    radii: &[f64],
    threshold: f64,
    cfg: &DetectorConfig,
) -> BlowupReport {
    let dirs = region_directions(z.len(), region);
    let mut rows = Vec::new();
    for &r in radii {
        let pts: Vec<Point> = dirs
            .iter()
            .map(|u| flow.domain().offset(z, &u.iter().map(|c| c * r).collect::<Vec<_>>()))
            .collect();
        let results: Vec<PeriodResult> = pts.par_iter().map(|p| classify_point(flow, p, cfg)).collect();
        let count = |s: &[PeriodStatus]| results.iter().filter(|x| s.contains(&x.status)).count();
        rows.push(BlowupRow {
            radius: r,
            min_period: results.iter().filter_map(|x| x.minimal_period).reduce(f64::min),
            axis_period: results[0].minimal_period,
            periodic: count(&[PeriodStatus::Periodic]),
            non_returning: count(&[PeriodStatus::NonPeriodicEvidence, PeriodStatus::Unknown]),
            fixed: count(&[PeriodStatus::Fixed]),
        });
    }
    let mut by_radius: Vec<&BlowupRow> = rows.iter().collect();
    by_radius.sort_by(|a, b| b.radius.total_cmp(&a.radius));
    let strictly_increasing = by_radius.len() >= 2
        && by_radius.windows(2).all(|w| match (w[0].min_period, w[1].min_period) {
            (Some(a), Some(b)) => b > a,
            _ => false,
        });
    let smallest = by_radius.last();
    let blowup_observed = rows.iter().any(|r| r.non_returning > 0)
        || smallest.is_some_and(|r| r.periodic > 0 && r.min_period.is_some_and(|p| p > threshold));
    BlowupReport { region: region.clone(), threshold, rows, strictly_increasing, blowup_observed }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> LinearizationConfig {
        LinearizationConfig::default()
    }

    #[test]
    fn nilpotent_two_block() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, -2.0, 0.0, 0.0]);
        let lp = real_jordan_classify(&m, &cfg()).unwrap();
        assert_eq!(lp.blocks, vec![JordanBlock::real(0.0, 2)]);
    }

    #[test]
    fn two_rotation_blocks() {
        let m = real_jordan_matrix(&[JordanBlock::complex(0.0, 1.0, 1), JordanBlock::complex(0.0, 2.0, 1)]);
        let lp = real_jordan_classify(&m, &cfg()).unwrap();
        let mut bs: Vec<f64> = lp
            .blocks
            .iter()
            .map(|b| match b.kind {
                BlockKind::Complex { b, .. } => b,
                _ => panic!("expected complex blocks"),
            })
            .collect();
        bs.sort_by(f64::total_cmp);
        assert!((bs[0] - 1.0).abs() < 1e-9 && (bs[1] - 2.0).abs() < 1e-9);
        assert!(lp.blocks.iter().all(|b| b.size == 1));
    }

    #[test]
    fn mixed_nilpotent_and_rotation() {
        let m = DMatrix::from_row_slice(
            4,
            4,
            &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0],
        );
        let lp = real_jordan_classify(&m, &cfg()).unwrap();
        assert_eq!(lp.blocks.len(), 2);
        assert!(lp.blocks.contains(&JordanBlock::real(0.0, 2)));
        assert!(lp.blocks.iter().any(|b| matches!(b.kind, BlockKind::Complex { b, .. } if (b - 1.0).abs() < 1e-9)
            && b.size == 1));
    }

    #[test]
    fn trichotomy_on_matrices() {
        let sad = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert_eq!(classify_matrix(&sad, &cfg()).verdict, Verdict::HyperbolicPart);
        let nil = DMatrix::from_row_slice(2, 2, &[0.0, -2.0, 0.0, 0.0]);
        assert_eq!(classify_matrix(&nil, &cfg()).verdict, Verdict::DegenerateBlock);
        assert_eq!(classify_matrix(&DMatrix::zeros(3, 3), &cfg()).verdict, Verdict::ZeroLinearPart);
        let rot = DMatrix::from_row_slice(2, 2, &[0.0, -3.0, 3.0, 0.0]);
        assert_eq!(classify_matrix(&rot, &cfg()).verdict, Verdict::PeriodicType);
        let semisimple_zero = real_jordan_matrix(&[JordanBlock::real(0.0, 1), JordanBlock::complex(0.0, 2.0, 1)]);
        assert_eq!(classify_matrix(&semisimple_zero, &cfg()).verdict, Verdict::PeriodicType);
        let double_pair = real_jordan_matrix(&[JordanBlock::complex(0.0, 1.0, 2)]);
        assert_eq!(classify_matrix(&double_pair, &cfg()).verdict, Verdict::DegenerateBlock);
    }

    #[test]
    fn block_sizes_from_nullities() {
        // J3 ⊕ J1: ν = 2, 3, 4
        assert_eq!(block_sizes(&[2, 3, 4, 4], 4), Some(vec![3, 1]));
        assert_eq!(block_sizes(&[1, 3], 3), None);
    }

    #[test]
    fn cone_directions_respect_epsilon() {
        for d in [2, 3] {
            let dirs = region_directions(d, &SampleRegion::Cone { epsilon: 0.5 });
            assert_eq!(dirs.len(), BLOWUP_DIRECTIONS);
            assert_eq!(dirs[0][0], 1.0);
            assert!(dirs.iter().all(|u| u[0].abs() >= 0.5 - 1e-12 && (norm(u) - 1.0).abs() < 1e-12));
        }
    }
}

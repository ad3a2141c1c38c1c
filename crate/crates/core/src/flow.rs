//! Flows `Φ: M × ℝ → M` given in closed form or generated by a vector field.

use crate::domain::{norm, Domain, Point};
use crate::expr::{parse_expr, Expr, ParseError};
use crate::integrate::{Dopri5, IntegrateError, IntegratorConfig};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("trajectory left the domain at t = {t}")]
    TrajectoryLeftDomain { t: f64 },
    #[error("integrator stalled at t = {t}")]
    IntegratorStalled { t: f64 },
    #[error("|t| = {t} exceeds the configured horizon {max}")]
    HorizonTooLong { t: f64, max: f64 },
    #[error("finite differences of a C0 flow did not converge at {0:?}")]
    NotDifferentiable(Vec<f64>),
    #[error("point has dimension {got}, flow expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("point {0:?} is outside the domain")]
    OutsideDomain(Vec<f64>),
    #[error("invalid flow: {0}")]
    Invalid(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

impl From<IntegrateError> for FlowError {
    fn from(e: IntegrateError) -> Self {
        match e {
            IntegrateError::LeftDomain { t } => FlowError::TrajectoryLeftDomain { t },
            IntegrateError::Stalled { t } | IntegrateError::NonFinite { t } => {
                FlowError::IntegratorStalled { t }
            }
            IntegrateError::TooManySteps(_) => FlowError::IntegratorStalled { t: f64::NAN },
        }
    }
}

/// Declared differentiability class of a flow.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Smoothness {
    C0,
    C1,
    C2,
    Cinf,
}

/// A generating vector field `F(x) = ∂Φ/∂t (x, 0)`.
pub trait VectorField: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64], out: &mut [f64]);
    /// Exact Jacobian when available.
    fn jacobian(&self, _x: &[f64]) -> Option<DMatrix<f64>> {
        None
    }
    fn describe(&self) -> String;
}

/// Components given as polynomial expressions; the Jacobian is differentiated
/// symbolically once at construction.
#[derive(Clone, Debug)]
pub struct PolynomialField {
    dim: usize,
    components: Vec<Expr>,
    jacobian: Vec<Vec<Expr>>,
}

impl PolynomialField {
    pub fn parse<S: AsRef<str>>(dim: usize, components: &[S]) -> Result<Self, FlowError> {
        if components.len() != dim {
            return Err(FlowError::Invalid(format!(
                "{} components for dimension {dim}",
                components.len()
            )));
        }
        let components = components
            .iter()
            .map(|c| parse_expr(c.as_ref(), dim))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::from_exprs(dim, components))
    }

    pub fn from_exprs(dim: usize, components: Vec<Expr>) -> Self {
        let jacobian = components
            .iter()
            .map(|c| (0..dim).map(|j| c.derivative(j)).collect())
            .collect();
        PolynomialField { dim, components, jacobian }
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }
}

impl VectorField for PolynomialField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = c.eval(x);
        }
    }

    fn jacobian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_fn(self.dim, self.dim, |i, j| self.jacobian[i][j].eval(x)))
    }

    fn describe(&self) -> String {
        let parts: Vec<String> =
            self.components.iter().map(|c| c.display(self.dim).to_string()).collect();
        format!("({})", parts.join(", "))
    }
}

/// `ẋ = A x`.
#[derive(Clone, Debug)]
pub struct LinearField {
    a: DMatrix<f64>,
}

impl LinearField {
    pub fn new(a: DMatrix<f64>) -> Self {
        assert!(a.is_square(), "linear field needs a square matrix");
        LinearField { a }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }
}

impl VectorField for LinearField {
    fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) {
        let n = self.a.nrows();
        for (i, o) in out.iter_mut().enumerate().take(n) {
            *o = (0..n).map(|j| self.a[(i, j)] * x[j]).sum();
        }
    }

    fn jacobian(&self, _x: &[f64]) -> Option<DMatrix<f64>> {
        Some(self.a.clone())
    }

    fn describe(&self) -> String {
        format!("linear {}x{}", self.a.nrows(), self.a.ncols())
    }
}

pub type FlowMap = Arc<dyn Fn(&[f64], f64) -> Result<Vec<f64>, FlowError> + Send + Sync>;
pub type FieldMap = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

#[derive(Clone)]
pub enum FlowKind {
    ClosedForm { map: FlowMap, field: Option<FieldMap> },
    VectorField(Arc<dyn VectorField>),
}

/// An immutable flow description. Cheap to clone and safe to share across threads.
#[derive(Clone)]
pub struct FlowSpec {
    name: String,
    domain: Domain,
    kind: FlowKind,
    smoothness: Smoothness,
    integrator: IntegratorConfig,
    max_horizon: f64,
}

impl fmt::Debug for FlowSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            FlowKind::ClosedForm { .. } => "closed_form".to_string(),
            FlowKind::VectorField(v) => format!("vector_field {}", v.describe()),
        };
        f.debug_struct("FlowSpec")
            .field("name", &self.name)
            .field("kind", &kind)
            .field("smoothness", &self.smoothness)
            .field("domain", &self.domain)
            .finish()
    }
}

pub const DEFAULT_MAX_HORIZON: f64 = 1e4;

impl FlowSpec {
    pub fn closed_form(
        name: impl Into<String>,
        domain: Domain,
        smoothness: Smoothness,
        map: FlowMap,
        field: Option<FieldMap>,
    ) -> Self {
        FlowSpec {
            name: name.into(),
            domain,
            kind: FlowKind::ClosedForm { map, field },
            smoothness,
            integrator: IntegratorConfig::default(),
            max_horizon: DEFAULT_MAX_HORIZON,
        }
    }

    /// Vector-field flows must be at least C1.
    pub fn vector_field(
        name: impl Into<String>,
        domain: Domain,
        smoothness: Smoothness,
        field: Arc<dyn VectorField>,
    ) -> Result<Self, FlowError> {
        if smoothness == Smoothness::C0 {
            return Err(FlowError::Invalid(
                "vector-field flows must be declared C1 or smoother".into(),
            ));
        }
        if field.dim() != domain.dim() {
            return Err(FlowError::DimensionMismatch { expected: domain.dim(), got: field.dim() });
        }
        Ok(FlowSpec {
            name: name.into(),
            domain,
            kind: FlowKind::VectorField(field),
            smoothness,
            integrator: IntegratorConfig::default(),
            max_horizon: DEFAULT_MAX_HORIZON,
        })
    }

    pub fn with_integrator(mut self, cfg: IntegratorConfig) -> Self {
        self.integrator = cfg;
        self
    }

    pub fn with_max_horizon(mut self, h: f64) -> Self {
        self.max_horizon = h;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn kind(&self) -> &FlowKind {
        &self.kind
    }

    pub fn smoothness(&self) -> Smoothness {
        self.smoothness
    }

    pub fn integrator(&self) -> &IntegratorConfig {
        &self.integrator
    }

    pub fn max_horizon(&self) -> f64 {
        self.max_horizon
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn vector_field_ref(&self) -> Option<&Arc<dyn VectorField>> {
        match &self.kind {
            FlowKind::VectorField(v) => Some(v),
            _ => None,
        }
    }

    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        self.domain.distance(a, b)
    }

    fn check_point(&self, x: &[f64]) -> Result<(), FlowError> {
        if x.len() != self.dim() {
            return Err(FlowError::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(())
    }

    /// `Φ(x, t)`, with periodic coordinates wrapped into `[0, 1)`.
    pub fn evaluate(&self, x: &[f64], t: f64) -> Result<Point, FlowError> {
        self.check_point(x)?;
        if t.abs() > self.max_horizon {
            return Err(FlowError::HorizonTooLong { t, max: self.max_horizon });
        }
        if t == 0.0 {
            return Ok(Point::from(x));
        }
        let mut y = match &self.kind {
            FlowKind::ClosedForm { map, .. } => {
                let y = map(x, t)?;
                if !self.domain.contains(&y) {
                    return Err(FlowError::TrajectoryLeftDomain { t });
                }
                y
            }
            FlowKind::VectorField(vf) => {
                let vf = vf.clone();
                let domain = &self.domain;
                let check = |y: &[f64]| domain.contains(y);
                crate::integrate::integrate(
                    move |y: &[f64], dy: &mut [f64]| vf.eval(y, dy),
                    x,
                    t,
                    self.integrator,
                    &check,
                )?
            }
        };
        self.domain.wrap(&mut y);
        Ok(Point(y))
    }

    /// The generating field at `x`. Closed-form flows without an analytic
    /// field use a central difference in `t` with step `ε^{1/3}·max(1, ‖x‖)`.
    pub fn field(&self, x: &[f64]) -> Result<Vec<f64>, FlowError> {
        self.check_point(x)?;
        match &self.kind {
            FlowKind::VectorField(vf) => {
                let mut out = vec![0.0; self.dim()];
                vf.eval(x, &mut out);
                Ok(out)
            }
            FlowKind::ClosedForm { field: Some(f), .. } => Ok(f(x)),
            FlowKind::ClosedForm { field: None, .. } => {
                let h = f64::EPSILON.cbrt() * norm(x).max(1.0);
                let d1 = self.time_difference(x, h)?;
                let d2 = self.time_difference(x, 0.5 * h)?;
                let diff = norm(&d1.iter().zip(&d2).map(|(a, b)| a - b).collect::<Vec<_>>());
                if self.smoothness == Smoothness::C0 && diff > 1e-4 * norm(&d2).max(1.0) {
                    return Err(FlowError::NotDifferentiable(x.to_vec()));
                }
                Ok(d2)
            }
        }
    }

    fn time_difference(&self, x: &[f64], h: f64) -> Result<Vec<f64>, FlowError> {
        let fwd = self.evaluate(x, h)?;
        let bwd = self.evaluate(x, -h)?;
        Ok(self.domain.delta(&bwd, &fwd).into_iter().map(|d| d / (2.0 * h)).collect())
    }

    /// `‖F(x)‖`, falling back to a displacement quotient when the field is not
    /// available (C0 flows near singular points).
    pub fn speed(&self, x: &[f64]) -> f64 {
        match self.field(x) {
            Ok(v) => norm(&v),
            Err(_) => {
                let h = 1e-7;
                match self.evaluate(x, h) {
                    Ok(y) => self.distance(x, &y) / h,
                    Err(_) => f64::INFINITY,
                }
            }
        }
    }

    /// A sampler for `t ↦ Φ(x, t)` along monotonically growing `|t|`.
    pub fn trajectory(&self, x: &[f64], direction: f64) -> Trajectory<'_> {
        let inner = match &self.kind {
            FlowKind::ClosedForm { .. } => TrajInner::Closed,
            FlowKind::VectorField(vf) => {
                let vf = vf.clone();
                let f: Box<dyn Fn(&[f64], &mut [f64]) + Send + Sync> =
                    Box::new(move |y: &[f64], dy: &mut [f64]| vf.eval(y, dy));
                TrajInner::Stepper(Box::new(Dopri5::new(f, x, direction, self.integrator)))
            }
        };
        Trajectory { flow: self, x0: x.to_vec(), inner, buf: vec![0.0; x.len()] }
    }
}

type BoxedRhs = Box<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

enum TrajInner {
    Closed,
    Stepper(Box<Dopri5<BoxedRhs>>),
}

/// Sequential sampler of one trajectory. Vector-field flows are integrated
/// once and sampled through the dense output.
pub struct Trajectory<'a> {
    flow: &'a FlowSpec,
    x0: Vec<f64>,
    inner: TrajInner,
    buf: Vec<f64>,
}

impl Trajectory<'_> {
    pub fn at(&mut self, t: f64) -> Result<Point, FlowError> {
        if t.abs() > self.flow.max_horizon {
            return Err(FlowError::HorizonTooLong { t, max: self.flow.max_horizon });
        }
        match &mut self.inner {
            TrajInner::Closed => self.flow.evaluate(&self.x0, t),
            TrajInner::Stepper(st) => {
                let domain = &self.flow.domain;
                st.advance_to(t, &|y| domain.contains(y), &mut self.buf)?;
                let mut y = self.buf.clone();
                domain.wrap(&mut y);
                Ok(Point(y))
            }
        }
    }
}

/// Uniform samples `Φ(x, i·T/n)` for `i = 0..=n`.
pub fn sample_orbit(flow: &FlowSpec, x: &[f64], period: f64, n: usize) -> Result<Vec<Point>, FlowError> {
    let mut traj = flow.trajectory(x, period.signum());
    (0..=n).map(|i| traj.at(period * i as f64 / n as f64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn rotation_field() -> FlowSpec {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        FlowSpec::vector_field("rot", Domain::cube(2, 3.0), Smoothness::Cinf, Arc::new(LinearField::new(a)))
            .unwrap()
    }

    #[test]
    fn linear_field_matches_matrix_exponential() {
        // A = [[0,1],[-1,0]]: e^{At} x = (cos t x0 + sin t x1, -sin t x0 + cos t x1)
        let f = rotation_field();
        let y = f.evaluate(&[1.0, 0.0], PI / 2.0).unwrap();
        assert!(y[0].abs() < 1e-8 && (y[1] + 1.0).abs() < 1e-8, "{y:?}");
    }

    #[test]
    fn zero_time_is_identity() {
        let f = rotation_field();
        assert_eq!(f.evaluate(&[0.3, -0.2], 0.0).unwrap().0, vec![0.3, -0.2]);
    }

    #[test]
    fn c0_vector_field_is_rejected() {
        let pf = PolynomialField::parse(1, &["x"]).unwrap();
        let err = FlowSpec::vector_field("bad", Domain::cube(1, 1.0), Smoothness::C0, Arc::new(pf))
            .unwrap_err();
        assert!(matches!(err, FlowError::Invalid(_)));
    }

    #[test]
    fn horizon_guard() {
        let f = rotation_field().with_max_horizon(10.0);
        assert!(matches!(f.evaluate(&[1.0, 0.0], 11.0), Err(FlowError::HorizonTooLong { .. })));
    }

    #[test]
    fn leaving_the_box_is_reported() {
        let pf = PolynomialField::parse(2, &["x", "-y"]).unwrap();
        let f = FlowSpec::vector_field("saddle", Domain::cube(2, 2.0), Smoothness::Cinf, Arc::new(pf))
            .unwrap();
        assert!(matches!(
            f.evaluate(&[0.5, 0.5], 5.0),
            Err(FlowError::TrajectoryLeftDomain { .. })
        ));
    }

    #[test]
    fn group_law_and_reversibility() {
        let f = rotation_field();
        let tol = f.integrator().abs_tol;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let x = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let s = rng.gen_range(-5.0..5.0);
            let t = rng.gen_range(-5.0..5.0);
            let lhs = f.evaluate(&f.evaluate(&x, s).unwrap(), t).unwrap();
            let rhs = f.evaluate(&x, s + t).unwrap();
            assert!(f.distance(&lhs, &rhs) < 10.0 * tol, "group law");
            let back = f.evaluate(&f.evaluate(&x, t).unwrap(), -t).unwrap();
            assert!(f.distance(&back, &x) < 10.0 * tol, "reversibility");
        }
    }

    #[test]
    fn closed_form_field_by_finite_difference() {
        let map: FlowMap = Arc::new(|x: &[f64], t: f64| {
            let (s, c) = t.sin_cos();
            Ok(vec![c * x[0] + s * x[1], -s * x[0] + c * x[1]])
        });
        let f = FlowSpec::closed_form("rot", Domain::cube(2, 3.0), Smoothness::Cinf, map, None);
        let v = f.field(&[1.0, 2.0]).unwrap();
        assert!((v[0] - 2.0).abs() < 1e-8 && (v[1] + 1.0).abs() < 1e-8, "{v:?}");
    }

    #[test]
    fn trajectory_sampler_matches_direct_evaluation() {
        let f = rotation_field();
        let mut tr = f.trajectory(&[1.0, 0.5], 1.0);
        for j in 1..50 {
            let t = j as f64 * 0.173;
            let a = tr.at(t).unwrap();
            let b = f.evaluate(&[1.0, 0.5], t).unwrap();
            assert!(f.distance(&a, &b) < 1e-7);
        }
    }
}

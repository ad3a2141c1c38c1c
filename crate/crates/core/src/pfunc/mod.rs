//! Period functions: continuous `μ` with `Φ(x, μ(x)) = x`.
//!
//! [`build_period_field`] samples the generator `θ` on a grid, the other
//! operations verify, extend, divide and reparametrize it.

mod action;
mod build;
mod conditions;
mod verify;

pub use action::{
    circle_action, detect_generator, primes_up_to, zp_divisibility_test, CircleAction, GeneratorReport, GroupKind,
    ZpActionReport,
};
pub use build::{build_period_field, FieldConfig, FieldOutcome, PeriodFunctionField};
pub use conditions::{probe_conditions, Alpha, CondA, CondB, CondC, CondD, CondE, ConditionConfig, ConditionReport, EWitness};
pub use verify::{
    check_orbit_constancy, check_regularity, extend_period_function, verify_p_function, ExtendConfig,
    Extension, ExtensionRoute, RegularityReport, RegularityWitness, VerifyReport,
};

use crate::domain::Point;
use crate::flow::FlowError;
use std::sync::Arc;
use thiserror::Error;

/// A period-function candidate evaluated pointwise.
pub type ThetaFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("neighbours {a:?} and {b:?} demand different multipliers: {detail}")]
    InconsistentRepair { a: Point, b: Point, detail: String },
    #[error("orbit of {0:?} does not enter the sampled set")]
    NotInSaturation(Point),
    #[error("period function vanishes at the non-fixed point {0:?}")]
    FieldVanishesOffFix(Point),
    #[error(transparent)]
    Flow(#[from] FlowError),
}

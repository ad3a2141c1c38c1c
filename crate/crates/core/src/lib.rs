pub mod domain;
pub mod expr;
pub mod flow;
pub mod integrate;
pub mod detect;
pub mod grid;
pub mod linearization;
pub mod gallery;
pub mod pfunc;
pub mod geometry;
pub mod config;
pub mod acceptance;
pub mod cli;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/overview.md")]
    pub struct Overview;
    #[doc = include_str!("../../../book/src/flows.md")]
    pub struct Flows;
    #[doc = include_str!("../../../book/src/periods.md")]
    pub struct Periods;
    #[doc = include_str!("../../../book/src/period_functions.md")]
    pub struct PeriodFunctions;
    #[doc = include_str!("../../../book/src/generators.md")]
    pub struct Generators;
    #[doc = include_str!("../../../book/src/fixed_points.md")]
    pub struct FixedPoints;
    #[doc = include_str!("../../../book/src/geometry.md")]
    pub struct Geometry;
    #[doc = include_str!("../../../book/src/cli.md")]
    pub struct Cli;
}

//! Points, boxes with circle factors, and the product metric.
//!
//! Angular coordinates are stored in turns: a periodic coordinate lives in
//! `[0, 1)` and one full revolution is a shift by `1.0`.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::{Deref, DerefMut};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("domain dimension must be positive")]
    ZeroDimension,
    #[error("expected {expected} bounds/flags, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("coordinate {0}: empty or non-finite interval")]
    BadInterval(usize),
    #[error("periodic coordinate {0} must have interval [0, 1)")]
    PeriodicInterval(usize),
    #[error("boundary coordinate {0} must be non-periodic with an interval starting at 0")]
    BoundaryCoord(usize),
}

/// A point in chart coordinates.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(pub Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point(coords)
    }

    pub fn zeros(dim: usize) -> Self {
        Point(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Point{:?}", self.0)
    }
}

impl Deref for Point {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Point {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Point(v)
    }
}

impl From<&[f64]> for Point {
    fn from(v: &[f64]) -> Self {
        Point(v.to_vec())
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// Shortest signed arc from `a` to `b` on a circle of circumference 1.
pub fn wrapped_delta(a: f64, b: f64) -> f64 {
    let d = (b - a).rem_euclid(1.0);
    if d > 0.5 {
        d - 1.0
    } else {
        d
    }
}

/// A box in ℝⁿ, some of whose coordinates may be circle factors of unit
/// circumference, optionally cut to the half-space `x[boundary] >= 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    bounds: Vec<(f64, f64)>,
    periodic: Vec<bool>,
    boundary_coord: Option<usize>,
}

impl Domain {
    pub fn new(
        bounds: Vec<(f64, f64)>,
        periodic: Vec<bool>,
        boundary_coord: Option<usize>,
    ) -> Result<Self, DomainError> {
        let n = bounds.len();
        if n == 0 {
            return Err(DomainError::ZeroDimension);
        }
        if periodic.len() != n {
            return Err(DomainError::LengthMismatch { expected: n, got: periodic.len() });
        }
        for (i, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(DomainError::BadInterval(i));
            }
            if periodic[i] && (lo != 0.0 || hi != 1.0) {
                return Err(DomainError::PeriodicInterval(i));
            }
        }
        if let Some(b) = boundary_coord {
            if b >= n || periodic[b] || bounds[b].0 != 0.0 {
                return Err(DomainError::BoundaryCoord(b));
            }
        }
        Ok(Domain { bounds, periodic, boundary_coord })
    }

    /// The plain box `[-half_width, half_width]^dim`.
    pub fn cube(dim: usize, half_width: f64) -> Self {
        Domain::new(vec![(-half_width, half_width); dim], vec![false; dim], None)
            .expect("valid cube")
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn periodic_mask(&self) -> &[bool] {
        &self.periodic
    }

    pub fn is_periodic(&self, i: usize) -> bool {
        self.periodic[i]
    }

    pub fn boundary_coord(&self) -> Option<usize> {
        self.boundary_coord
    }

    pub fn has_periodic(&self) -> bool {
        self.periodic.iter().any(|&p| p)
    }

    /// Membership in the closed box; periodic coordinates are always inside.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter().zip(&self.bounds).zip(&self.periodic).all(|((&c, &(lo, hi)), &p)| {
                p || (c >= lo - 1e-12 && c <= hi + 1e-12)
            })
    }

    /// Reduce periodic coordinates into `[0, 1)`.
    pub fn wrap(&self, x: &mut [f64]) {
        for (c, &p) in x.iter_mut().zip(&self.periodic) {
            if p {
                let w = c.rem_euclid(1.0);
                // rem_euclid can return exactly 1.0 for tiny negative inputs
                *c = if w >= 1.0 { 0.0 } else { w };
            }
        }
    }

    pub fn wrapped(&self, mut x: Point) -> Point {
        self.wrap(&mut x);
        x
    }

    /// Per-coordinate displacement from `a` to `b`, shortest arc on circle factors.
    pub fn delta(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        a.iter()
            .zip(b)
            .zip(&self.periodic)
            .map(|((&ai, &bi), &p)| if p { wrapped_delta(ai, bi) } else { bi - ai })
            .collect()
    }

    /// Product metric: Euclidean on real coordinates, shortest arc on circles.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut s = 0.0;
        for ((&ai, &bi), &p) in a.iter().zip(b).zip(&self.periodic) {
            let d = if p { wrapped_delta(ai, bi) } else { bi - ai };
            s += d * d;
        }
        s.sqrt()
    }

    /// Distance from `p` to the segment `a`–`b`, measured in the chart unwrapped
    /// around `a`. Valid when the segment is short compared to the circles.
    pub fn point_segment_distance(&self, p: &[f64], a: &[f64], b: &[f64]) -> f64 {
        let ab = self.delta(a, b);
        let ap = self.delta(a, p);
        let len2: f64 = ab.iter().map(|c| c * c).sum();
        let s = if len2 > 0.0 {
            (ab.iter().zip(&ap).map(|(u, v)| u * v).sum::<f64>() / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        ab.iter().zip(&ap).map(|(u, v)| (v - s * u).powi(2)).sum::<f64>().sqrt()
    }

    /// `x + v` with periodic coordinates wrapped.
    pub fn offset(&self, x: &[f64], v: &[f64]) -> Point {
        let mut y: Vec<f64> = x.iter().zip(v).map(|(a, b)| a + b).collect();
        self.wrap(&mut y);
        Point(y)
    }

    /// Diameter of the box in the product metric.
    pub fn diameter(&self) -> f64 {
        self.bounds
            .iter()
            .zip(&self.periodic)
            .map(|(&(lo, hi), &p)| if p { 0.25 } else { (hi - lo).powi(2) })
            .sum::<f64>()
            .sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn torus() -> Domain {
        Domain::new(vec![(-1.0, 1.0), (-1.0, 1.0), (0.0, 1.0)], vec![false, false, true], None)
            .unwrap()
    }

    #[test]
    fn rejects_bad_periodic_interval() {
        let err = Domain::new(vec![(0.0, 2.0)], vec![true], None).unwrap_err();
        assert_eq!(err, DomainError::PeriodicInterval(0));
    }

    #[test]
    fn boundary_coord_must_start_at_zero() {
        assert!(Domain::new(vec![(-1.0, 1.0), (0.0, 1.0)], vec![false; 2], Some(1)).is_ok());
        assert_eq!(
            Domain::new(vec![(-1.0, 1.0), (-1.0, 1.0)], vec![false; 2], Some(1)).unwrap_err(),
            DomainError::BoundaryCoord(1)
        );
    }

    #[test]
    fn circle_distance_takes_short_arc() {
        let d = torus();
        let a = [0.0, 0.0, 0.95];
        let b = [0.0, 0.0, 0.05];
        assert!((d.distance(&a, &b) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn wrap_lands_in_unit_interval() {
        let d = torus();
        let mut x = [0.3, 0.2, -1e-18];
        d.wrap(&mut x);
        assert!(x[2] >= 0.0 && x[2] < 1.0);
        let mut y = [0.3, 0.2, 7.25];
        d.wrap(&mut y);
        assert!((y[2] - 0.25).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn metric_axioms(
            a in prop::array::uniform3(-1.0f64..1.0),
            b in prop::array::uniform3(-1.0f64..1.0),
            c in prop::array::uniform3(-1.0f64..1.0),
        ) {
            let d = torus();
            let mut a = a; let mut b = b; let mut c = c;
            d.wrap(&mut a); d.wrap(&mut b); d.wrap(&mut c);
            prop_assert!((d.distance(&a, &b) - d.distance(&b, &a)).abs() < 1e-12);
            prop_assert!(d.distance(&a, &c) <= d.distance(&a, &b) + d.distance(&b, &c) + 1e-12);
            prop_assert!(d.distance(&a, &a) == 0.0);
        }
    }
}

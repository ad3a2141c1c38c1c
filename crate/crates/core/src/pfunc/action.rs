use super::{FieldConfig, FieldError, PeriodFunctionField, ThetaFn};
use crate::domain::Point;
use crate::flow::{FlowMap, FlowSpec};
use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;

#[derive(Clone, Debug, Serialize)]
pub struct ZpActionReport {
    pub p: u32,
    /// Largest `dist(d^p(x), x)` over the samples.
    pub max_pth_iterate_displacement: f64,
    /// Largest `dist(d(x), x)` over the samples.
    pub max_displacement: f64,
    pub identity_on_test_set: bool,
    pub divisible: bool,
    pub samples: usize,
}

/// Test whether `θ/p` is again a period function through `d(x) = Φ(x, θ(x)/p)`.
///
/// `θ` is orbit-invariant for regular period functions, so the iterates are
/// `d^{j+1}(x) = Φ(d^j(x), θ(x)/p)`.
pub fn zp_divisibility_test(flow: &FlowSpec, samples: &[(Point, f64)], p: u32, verify_tol: f64) -> ZpActionReport {
    let per_sample: Vec<(f64, f64)> = samples
        .par_iter()
        .map(|(x, theta)| {
            let step = theta / p as f64;
            let mut y = x.clone();
            let mut first = f64::INFINITY;
            for j in 0..p {
                y = match flow.evaluate(&y, step) {
                    Ok(v) => v,
                    Err(_) => return (f64::INFINITY, f64::INFINITY),
                };
                if j == 0 {
                    first = flow.distance(x, &y);
                }
            }
            (first, flow.distance(x, &y))
        })
        .collect();
    let max_displacement = per_sample.iter().map(|s| s.0).fold(0.0, f64::max);
    let max_pth = per_sample.iter().map(|s| s.1).fold(0.0, f64::max);
    let identity = max_displacement < verify_tol;
    ZpActionReport {
        p,
        max_pth_iterate_displacement: max_pth,
        max_displacement,
        identity_on_test_set: identity,
        divisible: identity,
        samples: samples.len(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum GroupKind {
    /// Only the zero function.
    Trivial,
    /// All integer multiples of a positive generator.
    Multiples,
}

#[derive(Clone, Debug)]
pub struct GeneratorReport {
    pub generator: PeriodFunctionField,
    pub group: GroupKind,
    /// Primes divided out, in order.
    pub divisions: Vec<u32>,
    /// Divisibility tests of the final generator, one per tested prime.
    pub final_tests: Vec<ZpActionReport>,
    pub tested_primes: Vec<u32>,
}

pub fn primes_up_to(n: u32) -> Vec<u32> {
    (2..=n).filter(|&k| (2..k).take_while(|d| d * d <= k).all(|d| k % d != 0)).collect()
}

/// Divide `θ` by primes `p ≤ primes_up_to` while `θ/p` remains a period function.
pub fn detect_generator(
    flow: &FlowSpec,
    field: &PeriodFunctionField,
    primes_up_to_n: u32,
    max_samples: usize,
    cfg: &FieldConfig,
) -> GeneratorReport {
    let primes = primes_up_to(primes_up_to_n);
    if field.is_zero() {
        return GeneratorReport {
            generator: field.clone(),
            group: GroupKind::Trivial,
            divisions: Vec::new(),
            final_tests: Vec::new(),
            tested_primes: primes,
        };
    }
    let mut current = field.clone();
    let mut divisions = Vec::new();
    'outer: loop {
        let samples = current.samples(max_samples);
        for &p in &primes {
            if zp_divisibility_test(flow, &samples, p, cfg.verify_tol).divisible {
                current = current.scaled(flow, 1.0 / p as f64);
                divisions.push(p);
                continue 'outer;
            }
        }
        break;
    }
    let samples = current.samples(max_samples);
    let final_tests = primes.iter().map(|&p| zp_divisibility_test(flow, &samples, p, cfg.verify_tol)).collect();
    GeneratorReport { generator: current, group: GroupKind::Multiples, divisions, final_tests, tested_primes: primes }
}

/// The reparametrized flow `B(x, t) = Φ(x, t·θ(x))`, periodic with period 1.
#[derive(Clone)]
pub struct CircleAction {
    pub flow: FlowSpec,
    pub base: FlowSpec,
    pub theta: ThetaFn,
}

pub fn circle_action(base: &FlowSpec, theta: ThetaFn, samples: &[Point], fixed_tol: f64) -> Result<CircleAction, FieldError> {
    if let Some(x) = samples.iter().find(|x| theta(x) == 0.0 && base.speed(x) >= fixed_tol) {
        return Err(FieldError::FieldVanishesOffFix(x.clone()));
    }
    let inner = base.clone();
    let th = theta.clone();
    let map: FlowMap = Arc::new(move |x: &[f64], t: f64| Ok(inner.evaluate(x, t * th(x))?.0));
    let flow = FlowSpec::closed_form(
        format!("circle action of {}", base.name()),
        base.domain().clone(),
        base.smoothness(),
        map,
        None,
    )
    .with_max_horizon(base.max_horizon());
    Ok(CircleAction { flow, base: base.clone(), theta })
}

fn hausdorff_to_polyline(flow: &FlowSpec, from: &[Point], line: &[Point]) -> f64 {
    from.iter()
        .map(|p| {
            line.windows(2)
                .map(|w| flow.domain().point_segment_distance(p, &w[0], &w[1]))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

impl CircleAction {
    /// `dist(B(x, 1), x)`.
    pub fn unit_time_residual(&self, x: &[f64]) -> f64 {
        self.flow.evaluate(x, 1.0).map_or(f64::INFINITY, |y| self.flow.distance(x, &y))
    }

    /// Hausdorff distance between the `Φ`-orbit over `[0, θ(x)]` sampled at `n`
    /// points and the `B`-orbit over `[0, 1]` sampled at a different count,
    /// each point measured against the other's polyline.
    pub fn orbit_hausdorff(&self, x: &[f64], n: usize) -> f64 {
        let t = (self.theta)(x);
        if t == 0.0 {
            return 0.0;
        }
        let m = n + n / 3 + 1;
        let phi: Vec<Point> = (0..=n).filter_map(|i| self.base.evaluate(x, t * i as f64 / n as f64).ok()).collect();
        // B(x, s) = Φ(x, s·θ(x)) with θ(x) evaluated once
        let b: Vec<Point> = (0..=m).filter_map(|i| self.base.evaluate(x, t * i as f64 / m as f64).ok()).collect();
        if phi.len() != n + 1 || b.len() != m + 1 {
            return f64::INFINITY;
        }
        hausdorff_to_polyline(&self.base, &phi, &b).max(hausdorff_to_polyline(&self.base, &b, &phi))
    }
}

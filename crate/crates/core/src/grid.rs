//! Regular lattices over a domain, masked to a sampled open set.

use crate::domain::{Domain, Point};
use std::collections::VecDeque;

#[derive(Clone, Debug, PartialEq)]
pub struct GridAxis {
    pub start: f64,
    pub step: f64,
    pub count: usize,
    pub periodic: bool,
}

impl GridAxis {
    /// `count + 1` nodes `lo, lo + h, ..., hi`.
    pub fn closed(lo: f64, hi: f64, count: usize) -> Self {
        GridAxis { start: lo, step: (hi - lo) / count as f64, count: count + 1, periodic: false }
    }

    /// `count` nodes `0, 1/count, ...` on a unit circle.
    pub fn circle(count: usize) -> Self {
        GridAxis { start: 0.0, step: 1.0 / count as f64, count, periodic: true }
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.start + self.step * i as f64
    }
}

/// The active nodes of a lattice together with their neighbour structure.
#[derive(Clone, Debug)]
pub struct Grid {
    domain: Domain,
    axes: Vec<GridAxis>,
    points: Vec<Point>,
    lattice: Vec<Vec<usize>>,
    slot: Vec<Option<usize>>,
}

impl Grid {
    pub fn new(domain: &Domain, axes: Vec<GridAxis>, keep: impl Fn(&[f64]) -> bool) -> Self {
        assert_eq!(axes.len(), domain.dim(), "one axis per coordinate");
        let total: usize = axes.iter().map(|a| a.count).product();
        let mut points = Vec::new();
        let mut lattice = Vec::new();
        let mut slot = vec![None; total];
        let mut idx = vec![0usize; axes.len()];
        for (flat, s) in slot.iter_mut().enumerate() {
            let mut rem = flat;
            for (k, a) in axes.iter().enumerate().rev() {
                idx[k] = rem % a.count;
                rem /= a.count;
            }
            let x: Vec<f64> = idx.iter().zip(&axes).map(|(&i, a)| a.coord(i)).collect();
            if domain.contains(&x) && keep(&x) {
                *s = Some(points.len());
                points.push(Point(x));
                lattice.push(idx.clone());
            }
        }
        Grid { domain: domain.clone(), axes, points, lattice, slot }
    }

    /// `n` cells per real axis over the domain box, `n` nodes per circle.
    pub fn over_domain(domain: &Domain, n: usize, keep: impl Fn(&[f64]) -> bool) -> Self {
        let axes = domain
            .bounds()
            .iter()
            .zip(domain.periodic_mask())
            .map(|(&(lo, hi), &p)| if p { GridAxis::circle(n) } else { GridAxis::closed(lo, hi, n) })
            .collect();
        Grid::new(domain, axes, keep)
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn axes(&self) -> &[GridAxis] {
        &self.axes
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &Point {
        &self.points[i]
    }

    /// Largest lattice step.
    pub fn spacing(&self) -> f64 {
        self.axes.iter().map(|a| a.step).fold(0.0, f64::max)
    }

    fn flat(&self, idx: &[i64]) -> Option<usize> {
        let mut flat = 0usize;
        for (&i, a) in idx.iter().zip(&self.axes) {
            let n = a.count as i64;
            let i = if a.periodic {
                i.rem_euclid(n)
            } else if (0..n).contains(&i) {
                i
            } else {
                return None;
            };
            flat = flat * a.count + i as usize;
        }
        Some(flat)
    }

    fn active_at(&self, idx: &[i64]) -> Option<usize> {
        self.flat(idx).and_then(|f| self.slot[f])
    }

    /// Axis neighbours (`±1` along each coordinate).
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        let base: Vec<i64> = self.lattice[i].iter().map(|&c| c as i64).collect();
        let mut out = Vec::with_capacity(2 * base.len());
        for k in 0..base.len() {
            for d in [-1i64, 1] {
                let mut idx = base.clone();
                idx[k] += d;
                if let Some(j) = self.active_at(&idx) {
                    if j != i && !out.contains(&j) {
                        out.push(j);
                    }
                }
            }
        }
        out
    }

    /// True when some axis neighbour slot is outside the sampled set.
    pub fn is_boundary(&self, i: usize) -> bool {
        let base: Vec<i64> = self.lattice[i].iter().map(|&c| c as i64).collect();
        (0..base.len()).any(|k| {
            [-1i64, 1].iter().any(|d| {
                let mut idx = base.clone();
                idx[k] += d;
                self.active_at(&idx).is_none()
            })
        })
    }

    /// Active nodes at Chebyshev lattice distance exactly `ring` from node `i`.
    pub fn ring(&self, i: usize, ring: usize) -> Vec<usize> {
        let base: Vec<i64> = self.lattice[i].iter().map(|&c| c as i64).collect();
        let r = ring as i64;
        let dim = base.len();
        let mut out = Vec::new();
        let mut off = vec![-r; dim];
        loop {
            if off.iter().any(|o| o.abs() == r) {
                let idx: Vec<i64> = base.iter().zip(&off).map(|(b, o)| b + o).collect();
                if let Some(j) = self.active_at(&idx) {
                    if !out.contains(&j) {
                        out.push(j);
                    }
                }
            }
            let mut k = 0;
            loop {
                if k == dim {
                    return out;
                }
                off[k] += 1;
                if off[k] <= r {
                    break;
                }
                off[k] = -r;
                k += 1;
            }
        }
    }

    /// Nearest active node to `y` within one lattice cell, if any.
    pub fn nearest(&self, y: &[f64]) -> Option<usize> {
        let mut base = Vec::with_capacity(y.len());
        for (&c, a) in y.iter().zip(&self.axes) {
            base.push(((c - a.start) / a.step).round() as i64);
        }
        if let Some(j) = self.active_at(&base) {
            return Some(j);
        }
        let dim = base.len();
        let mut best: Option<(f64, usize)> = None;
        let mut off = vec![-1i64; dim];
        loop {
            let idx: Vec<i64> = base.iter().zip(&off).map(|(b, o)| b + o).collect();
            if let Some(j) = self.active_at(&idx) {
                let d = self.domain.distance(y, &self.points[j]);
                if best.map_or(true, |(bd, _)| d < bd) {
                    best = Some((d, j));
                }
            }
            let mut k = 0;
            loop {
                if k == dim {
                    return best.map(|(_, j)| j);
                }
                off[k] += 1;
                if off[k] <= 1 {
                    break;
                }
                off[k] = -1;
                k += 1;
            }
        }
    }

    /// True when `y` lies within half a cell of an active node.
    pub fn covers(&self, y: &[f64]) -> bool {
        self.nearest(y).is_some_and(|j| {
            let d = self.domain.delta(&self.points[j], y);
            d.iter().zip(&self.axes).all(|(c, a)| c.abs() <= 0.5 * a.step + 1e-12)
        })
    }

    /// Connected components of the nodes selected by `member`, as lists of
    /// node indices in ascending order of their smallest element.
    pub fn components(&self, member: impl Fn(usize) -> bool) -> Vec<Vec<usize>> {
        let mut label = vec![usize::MAX; self.len()];
        let mut comps = Vec::new();
        for s in 0..self.len() {
            if label[s] != usize::MAX || !member(s) {
                continue;
            }
            let id = comps.len();
            let mut comp = vec![s];
            label[s] = id;
            let mut queue = VecDeque::from([s]);
            while let Some(i) = queue.pop_front() {
                for j in self.neighbors(i) {
                    if label[j] == usize::MAX && member(j) {
                        label[j] = id;
                        comp.push(j);
                        queue.push_back(j);
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps
    }
}

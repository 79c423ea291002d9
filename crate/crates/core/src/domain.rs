//! Uniform grids on a compact interval and the metric primitives built on them.
//!
//! Every measure in the crate works on functions sampled on a [`GridDomain`].
//! Distances are sup-norm distances over the grid, and neighbourhoods are open
//! metric balls intersected with the grid.

use std::ops::Range;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::family::SampledFunction;

/// Largest number of intervals a grid may have.
pub const MAX_INTERVALS: f64 = 1e7;

/// A compact interval `[lower, upper]` discretised with spacing `step`.
///
/// Both endpoints are always grid points; when `upper - lower` is not a
/// multiple of `step` the final interval is shorter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridDomain {
    lower: f64,
    upper: f64,
    step: f64,
    #[serde(skip)]
    points: Vec<f64>,
}

impl GridDomain {
    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Tolerance used when matching a real number to a grid point.
    fn snap_tolerance(&self) -> f64 {
        1e-9 * self.step
    }

    /// Index of the grid point equal to `t` (up to a tiny fraction of a step).
    pub fn index_of(&self, t: f64) -> Result<usize> {
        if !t.is_finite() {
            return Err(Error::NotOnGrid { t });
        }
        let tol = self.snap_tolerance();
        let idx = self.points.partition_point(|&p| p < t - tol);
        match self.points.get(idx) {
            Some(&p) if (p - t).abs() <= tol => Ok(idx),
            _ => Err(Error::NotOnGrid { t }),
        }
    }

    /// Trapezoid weights over the whole grid; they sum to `upper - lower`.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let n = self.points.len();
        let mut w = vec![0.0; n];
        for i in 0..n - 1 {
            let half = 0.5 * (self.points[i + 1] - self.points[i]);
            w[i] += half;
            w[i + 1] += half;
        }
        w
    }
}

/// Builds the grid `lower, lower + step, ..., upper`.
pub fn make_grid(lower: f64, upper: f64, step: f64) -> Result<GridDomain> {
    if !(lower.is_finite() && upper.is_finite() && step.is_finite()) {
        return Err(Error::InvalidGrid("bounds and step must be finite".into()));
    }
    if lower >= upper {
        return Err(Error::InvalidGrid(format!(
            "lower ({lower}) must be below upper ({upper})"
        )));
    }
    if step <= 0.0 {
        return Err(Error::InvalidGrid(format!("step must be positive, got {step}")));
    }
    let ratio = (upper - lower) / step;
    if ratio > MAX_INTERVALS {
        return Err(Error::InvalidGrid(format!(
            "{ratio:.0} intervals exceeds the limit of {MAX_INTERVALS:e}"
        )));
    }
    // A ratio within rounding of an integer means the step divides the interval.
    let nearest = ratio.round();
    let exact = (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0);
    let full = if exact { nearest } else { ratio.floor() } as usize;

    let mut points: Vec<f64> = (0..=full).map(|i| lower + i as f64 * step).collect();
    if exact {
        *points.last_mut().expect("grid has at least one point") = upper;
    } else {
        points.push(upper);
    }
    Ok(GridDomain {
        lower,
        upper,
        step,
        points,
    })
}

/// Grid points inside the open ball of radius `radius` around `center`.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborhoodSpec {
    pub center: f64,
    pub center_index: usize,
    pub radius: f64,
    pub indices: Range<usize>,
}

impl NeighborhoodSpec {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn points<'a>(&self, domain: &'a GridDomain) -> &'a [f64] {
        &domain.points[self.indices.clone()]
    }
}

/// The open ball `{s : |s - t0| < eps}` restricted to the grid.
///
/// Points whose distance equals `eps` up to rounding are excluded, so a ball
/// of radius `k * step` never contains the points `k` steps away.
pub fn neighborhood(domain: &GridDomain, t0: f64, eps: f64) -> Result<NeighborhoodSpec> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    let center_index = domain.index_of(t0)?;
    let center = domain.points[center_index];
    Ok(neighborhood_at(domain, center_index, eps, center))
}

pub(crate) fn neighborhood_at(
    domain: &GridDomain,
    center_index: usize,
    eps: f64,
    center: f64,
) -> NeighborhoodSpec {
    let reach = eps - domain.snap_tolerance();
    let pts = &domain.points;
    let lo = pts[..center_index].partition_point(|&s| center - s >= reach);
    let hi = center_index + 1 + pts[center_index + 1..].partition_point(|&s| s - center < reach);
    NeighborhoodSpec {
        center,
        center_index,
        radius: eps,
        indices: lo..hi,
    }
}

/// Sup-norm distance over the grid.
pub fn sup_distance(f: &SampledFunction, g: &SampledFunction) -> Result<f64> {
    if !f.same_grid(g) {
        return Err(Error::GridMismatch);
    }
    Ok(sup_distance_values(f.values(), g.values()))
}

pub(crate) fn sup_distance_values(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

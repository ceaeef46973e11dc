//! Right-continuous step functions, analysis intervals and evaluation grids.

use serde::Serialize;

use crate::error::{Error, Result};

/// A right-continuous, piecewise-constant function.
///
/// `value(t)` is the value attached to the last jump at or before `t`, or
/// `initial` when `t` precedes every jump.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepFunction {
    initial: f64,
    jump_times: Vec<f64>,
    values: Vec<f64>,
}

impl StepFunction {
    pub fn new(initial: f64, jump_times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if jump_times.len() != values.len() {
            return Err(crate::error::invalid(
                "values",
                format!("{} jump times but {} values", jump_times.len(), values.len()),
            ));
        }
        if jump_times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(crate::error::invalid(
                "jump_times",
                "jump times must be strictly increasing",
            ));
        }
        Ok(Self {
            initial,
            jump_times,
            values,
        })
    }

    /// Caller guarantees strictly increasing times of equal length.
    pub(crate) fn from_sorted(initial: f64, jump_times: Vec<f64>, values: Vec<f64>) -> Self {
        debug_assert_eq!(jump_times.len(), values.len());
        debug_assert!(jump_times.windows(2).all(|w| w[0] < w[1]));
        Self {
            initial,
            jump_times,
            values,
        }
    }

    pub fn constant(value: f64) -> Self {
        Self::from_sorted(value, Vec::new(), Vec::new())
    }

    pub fn initial(&self) -> f64 {
        self.initial
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, t: f64) -> f64 {
        let k = self.jump_times.partition_point(|&u| u <= t);
        if k == 0 {
            self.initial
        } else {
            self.values[k - 1]
        }
    }

    /// Left limit at `t`.
    pub fn value_left(&self, t: f64) -> f64 {
        let k = self.jump_times.partition_point(|&u| u < t);
        if k == 0 {
            self.initial
        } else {
            self.values[k - 1]
        }
    }

    /// `(time, value)` pairs for every jump.
    pub fn vertices(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.jump_times.iter().copied().zip(self.values.iter().copied())
    }
}

/// Closed analysis interval `[start, end]` with `0 <= start < end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    start: f64,
    end: f64,
}

impl Interval {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if !(start.is_finite() && end.is_finite() && start >= 0.0 && start < end) {
            return Err(Error::InvalidInterval { start, end });
        }
        Ok(Self { start, end })
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn length(&self) -> f64 {
        self.end - self.start
    }

    pub fn contains(&self, t: f64) -> bool {
        self.start <= t && t <= self.end
    }
}

/// Strictly increasing evaluation points spanning an [`Interval`].
///
/// The first and last points are the interval endpoints. Cell `i` is
/// `[points[i], points[i + 1])`; there are `len() - 1` cells.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    points: Vec<f64>,
}

impl Grid {
    /// Builds a grid from arbitrary points; duplicates are merged and
    /// points outside `interval` dropped.
    pub fn from_points(interval: Interval, points: impl IntoIterator<Item = f64>) -> Self {
        let mut pts: Vec<f64> = points
            .into_iter()
            .filter(|&t| interval.contains(t))
            .chain([interval.start(), interval.end()])
            .collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        Self { points: pts }
    }

    /// Evenly spaced grid with `n_points >= 2` points.
    pub fn uniform(interval: Interval, n_points: usize) -> Result<Self> {
        if n_points < 2 {
            return Err(crate::error::invalid("n_points", "need at least two points"));
        }
        let h = interval.length() / (n_points - 1) as f64;
        let mut points: Vec<f64> = (0..n_points)
            .map(|i| interval.start() + h * i as f64)
            .collect();
        points[n_points - 1] = interval.end();
        Ok(Self { points })
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

    pub fn interval(&self) -> Interval {
        Interval {
            start: self.points[0],
            end: self.points[self.points.len() - 1],
        }
    }

    pub fn contains(&self, t: f64) -> bool {
        self.points.binary_search_by(|p| p.total_cmp(&t)).is_ok()
    }

    /// `(left, right)` endpoints of every cell.
    pub fn cells(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points.windows(2).map(|w| (w[0], w[1]))
    }

    /// Keeps every `stride`-th point plus both endpoints.
    pub(crate) fn subsample_indices(&self, max_points: usize) -> Vec<usize> {
        let m = self.points.len();
        if max_points < 2 || m <= max_points {
            return (0..m).collect();
        }
        let stride = (m - 1).div_ceil(max_points - 1);
        let mut idx: Vec<usize> = (0..m).step_by(stride).collect();
        if *idx.last().unwrap() != m - 1 {
            idx.push(m - 1);
        }
        idx
    }

    pub(crate) fn select(&self, indices: &[usize]) -> Self {
        Self {
            points: indices.iter().map(|&i| self.points[i]).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_function_evaluation() {
        let f = StepFunction::new(0.0, vec![1.0, 2.0], vec![1.0, 3.0]).unwrap();
        assert_eq!(f.value(0.5), 0.0);
        assert_eq!(f.value(1.0), 1.0);
        assert_eq!(f.value_left(1.0), 0.0);
        assert_eq!(f.value(1.5), 1.0);
        assert_eq!(f.value(2.0), 3.0);
        assert_eq!(f.value_left(2.0), 1.0);
        assert_eq!(f.value(10.0), 3.0);
    }

    #[test]
    fn step_function_rejects_unsorted() {
        assert!(StepFunction::new(0.0, vec![2.0, 1.0], vec![1.0, 2.0]).is_err());
        assert!(StepFunction::new(0.0, vec![1.0, 1.0], vec![1.0, 2.0]).is_err());
        assert!(StepFunction::new(0.0, vec![1.0], vec![]).is_err());
    }

    #[test]
    fn interval_validation() {
        assert!(Interval::new(0.0, 1.0).is_ok());
        assert!(Interval::new(1.0, 1.0).is_err());
        assert!(Interval::new(-1.0, 1.0).is_err());
        assert!(Interval::new(0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn grid_merges_and_clips() {
        let iv = Interval::new(0.0, 2.0).unwrap();
        let g = Grid::from_points(iv, [1.2, 0.5, 0.8, 0.5, 3.0]);
        assert_eq!(g.points(), &[0.0, 0.5, 0.8, 1.2, 2.0]);
        assert!(g.contains(0.8));
        assert!(!g.contains(0.9));
        assert_eq!(g.cells().count(), 4);
    }

    #[test]
    fn subsampling_keeps_endpoints() {
        let iv = Interval::new(0.0, 1.0).unwrap();
        let g = Grid::uniform(iv, 101).unwrap();
        let idx = g.subsample_indices(10);
        assert_eq!(idx[0], 0);
        assert_eq!(*idx.last().unwrap(), 100);
        assert!(idx.len() <= 12);
        assert_eq!(g.subsample_indices(1000).len(), 101);
    }
}

//! Welch-type covariance estimate of the two-sample difference process and
//! the weighted moment integrals used by the chi-square approximations.
//!
//! All covariance surfaces here are piecewise constant on grid cells: on
//! `[g_i, g_{i+1}) x [g_j, g_{j+1})` the surface takes its value at
//! `(g_i, g_j)`. Integrals are therefore finite sums.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::step::{Grid, Interval};
use crate::survival::{Cause, CompetingRisksFit, Sample};

/// Weight function on the analysis interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Weight {
    Constant(f64),
    /// `((end - u)(u - start))^(-1/2)`; unbounded at both endpoints.
    AndersonDarling,
    /// Linear interpolation through `(times, values)`, flat outside.
    Tabulated { times: Vec<f64>, values: Vec<f64> },
}

impl Default for Weight {
    fn default() -> Self {
        Weight::Constant(1.0)
    }
}

impl Weight {
    pub fn validate(&self) -> Result<()> {
        match self {
            Weight::Constant(c) if !(c.is_finite() && *c > 0.0) => {
                Err(invalid("weight", "constant weight must be positive"))
            }
            Weight::Tabulated { times, values } => {
                if times.is_empty() || times.len() != values.len() {
                    return Err(invalid("weight", "tabulated weight needs matching times and values"));
                }
                if times.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(invalid("weight", "tabulated times must be strictly increasing"));
                }
                if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    return Err(invalid("weight", "tabulated values must be positive"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self, Weight::AndersonDarling)
    }

    pub fn value_at(&self, t: f64, interval: Interval) -> f64 {
        match self {
            Weight::Constant(c) => *c,
            Weight::AndersonDarling => {
                let d = (interval.end() - t) * (t - interval.start());
                if d > 0.0 {
                    d.sqrt().recip()
                } else {
                    f64::INFINITY
                }
            }
            Weight::Tabulated { times, values } => {
                let k = times.partition_point(|&x| x <= t);
                if k == 0 {
                    values[0]
                } else if k == times.len() {
                    values[k - 1]
                } else {
                    let (t0, t1) = (times[k - 1], times[k]);
                    let (v0, v1) = (values[k - 1], values[k]);
                    v0 + (v1 - v0) * (t - t0) / (t1 - t0)
                }
            }
        }
    }

    /// `int_a^b rho(u) du` for `a <= b` inside `interval`.
    ///
    /// Exact for constant and Anderson-Darling weights, midpoint rule for
    /// tabulated ones.
    pub fn cell_integral(&self, a: f64, b: f64, interval: Interval) -> f64 {
        match self {
            Weight::Constant(c) => c * (b - a),
            Weight::AndersonDarling => {
                let (s, e) = (interval.start(), interval.end());
                let arg = |u: f64| ((2.0 * u - s - e) / (e - s)).clamp(-1.0, 1.0).asin();
                arg(b) - arg(a)
            }
            Weight::Tabulated { .. } => self.value_at(0.5 * (a + b), interval) * (b - a),
        }
    }

    pub(crate) fn cell_integrals(&self, grid: &Grid) -> Vec<f64> {
        let iv = grid.interval();
        grid.cells().map(|(a, b)| self.cell_integral(a, b, iv)).collect()
    }
}

/// Symmetric covariance values on all pairs of grid points.
#[derive(Debug, Clone, PartialEq)]
pub struct CovGrid {
    grid: Grid,
    matrix: DMatrix<f64>,
}

impl CovGrid {
    pub fn new(grid: Grid, matrix: DMatrix<f64>) -> Result<Self> {
        let m = grid.len();
        if matrix.nrows() != m || matrix.ncols() != m {
            return Err(invalid("matrix", "dimension does not match grid"));
        }
        Ok(Self { grid, matrix })
    }

    /// Tabulates `f(s, t)` on the grid, symmetrized from the upper triangle.
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let p = grid.points();
        let m = p.len();
        let mut matrix = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let v = f(p[i], p[j]);
                matrix[(i, j)] = v;
                matrix[(j, i)] = v;
            }
        }
        Self { grid, matrix }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().copied().collect()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    pub fn is_symmetric(&self) -> bool {
        let m = self.matrix.nrows();
        (0..m).all(|i| (0..i).all(|j| self.matrix[(i, j)] == self.matrix[(j, i)]))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.matrix.clone())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            matrix: &self.matrix * c,
        }
    }

    /// Restricts to at most `max_points` grid points (every k-th point plus
    /// both endpoints). This is an approximation: values between retained
    /// points are replaced by the left retained value.
    pub fn coarsen(&self, max_points: usize) -> Self {
        let idx = self.grid.subsample_indices(max_points);
        if idx.len() == self.grid.len() {
            return self.clone();
        }
        let matrix = self.matrix.select_rows(&idx).select_columns(&idx);
        Self {
            grid: self.grid.select(&idx),
            matrix,
        }
    }
}

fn check_grid_covers(fit: &CompetingRisksFit, grid: &Grid) -> Result<()> {
    let iv = grid.interval();
    for e in fit.events() {
        if iv.contains(e.time) && !grid.contains(e.time) {
            return Err(Error::GridMismatch { time: e.time });
        }
    }
    Ok(())
}

pub fn group_covariance(sample: &Sample, grid: &Grid) -> Result<CovGrid> {
    group_covariance_fit(&CompetingRisksFit::new(sample), grid)
}

/// Single-group covariance estimate
///
/// `n * sum_{u <= s1 ^ s2} (A(u) - F1(s1)) (A(u) - F1(s2)) / Y(u)^2`
///
/// summed over observed events `u`, with `A = 1 - F2` at cause-1 events and
/// `A = F1` at cause-2 events.
pub fn group_covariance_fit(fit: &CompetingRisksFit, grid: &Grid) -> Result<CovGrid> {
    check_grid_covers(fit, grid)?;
    let n = fit.n() as f64;
    let events = fit.events();

    // Prefix sums of w, A w, A^2 w with w = 1/Y^2, in event-time order.
    let mut s0 = Vec::with_capacity(events.len() + 1);
    let mut s1 = Vec::with_capacity(events.len() + 1);
    let mut s2 = Vec::with_capacity(events.len() + 1);
    let (mut a0, mut a1, mut a2) = (0.0, 0.0, 0.0);
    s0.push(a0);
    s1.push(a1);
    s2.push(a2);
    for e in events {
        if e.at_risk > 0.0 {
            let w = (e.at_risk * e.at_risk).recip();
            let a = match e.cause {
                Cause::One => 1.0 - e.cif2,
                Cause::Two => e.cif1,
            };
            a0 += w;
            a1 += a * w;
            a2 += a * a * w;
        }
        s0.push(a0);
        s1.push(a1);
        s2.push(a2);
    }

    let points = grid.points();
    let counts: Vec<usize> = points
        .iter()
        .map(|&g| events.partition_point(|e| e.time <= g))
        .collect();
    let cif: Vec<f64> = points.iter().map(|&g| fit.cif1_at(g)).collect();

    let m = points.len();
    let mut matrix = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let k = counts[i];
            let (fi, fj) = (cif[i], cif[j]);
            let v = n * (s2[k] - (fi + fj) * s1[k] + fi * fj * s0[k]);
            matrix[(i, j)] = v;
            matrix[(j, i)] = v;
        }
    }
    Ok(CovGrid {
        grid: grid.clone(),
        matrix,
    })
}

/// `(n2/n) z1 + (n1/n) z2`.
pub fn pooled_covariance(z1: &CovGrid, z2: &CovGrid, n1: usize, n2: usize) -> Result<CovGrid> {
    if z1.grid != z2.grid {
        return Err(Error::CovGridMismatch);
    }
    let n = (n1 + n2) as f64;
    let (w1, w2) = (n2 as f64 / n, n1 as f64 / n);
    Ok(CovGrid {
        grid: z1.grid.clone(),
        matrix: z1.matrix.zip_map(&z2.matrix, |a, b| w1 * a + w2 * b),
    })
}

/// Weighted trace moments of a covariance surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    /// `int rho z(s, s) ds`
    pub mu: f64,
    /// `2 int int rho z^2 rho`
    pub sigma2: f64,
    /// `int int int rho z rho z rho z` around the cycle
    pub gamma: f64,
}

pub fn covariance_moments(z: &CovGrid, rho2: &Weight) -> Result<Moments> {
    if !rho2.is_bounded() {
        return Err(Error::InadmissibleWeight(
            "Anderson-Darling weight has no chi-square moment representation",
        ));
    }
    rho2.validate()?;
    let cells = rho2.cell_integrals(&z.grid);
    let m = cells.len();
    if m == 0 {
        return Ok(Moments {
            mu: 0.0,
            sigma2: 0.0,
            gamma: 0.0,
        });
    }
    // A = D^{1/2} Z D^{1/2} over the m cells; the last grid point spans no cell.
    let root: Vec<f64> = cells.iter().map(|w| w.sqrt()).collect();
    let a = DMatrix::from_fn(m, m, |i, j| root[i] * z.matrix[(i, j)] * root[j]);
    let mu = (0..m).map(|i| a[(i, i)]).sum();
    let sigma2 = 2.0 * a.iter().map(|v| v * v).sum::<f64>();
    let a2 = &a * &a;
    let gamma = a2.iter().zip(a.iter()).map(|(x, y)| x * y).sum();
    Ok(Moments { mu, sigma2, gamma })
}

//! The scaled difference of the two cause-1 CIF estimates and the scalar
//! functionals used as test statistics.

use serde::{Deserialize, Serialize};

use crate::covariance::Weight;
use crate::error::{Error, Result};
use crate::step::{Grid, Interval};
use crate::survival::{CompetingRisksFit, Sample};

/// Below this the estimated variance is treated as zero.
pub const DEGENERACY_EPS: f64 = 1e-12;

/// `sqrt(n1 n2 / n) (F1_hat^(1) - F1_hat^(2))` tabulated on a grid.
///
/// The process is constant on every grid cell, so `values[i]` holds on
/// `[g_i, g_{i+1})` and at the right endpoint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiffProcess {
    grid: Grid,
    values: Vec<f64>,
    n1: usize,
    n2: usize,
}

impl DiffProcess {
    pub fn new(grid: Grid, values: Vec<f64>, n1: usize, n2: usize) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(crate::error::invalid("values", "one value per grid point required"));
        }
        Ok(Self {
            grid,
            values,
            n1,
            n2,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sizes(&self) -> (usize, usize) {
        (self.n1, self.n2)
    }

    pub fn interval(&self) -> Interval {
        self.grid.interval()
    }
}

pub(crate) fn scale(n1: usize, n2: usize) -> f64 {
    let (a, b) = (n1 as f64, n2 as f64);
    (a * b / (a + b)).sqrt()
}

pub fn w_process(first: &Sample, second: &Sample, grid: &Grid) -> DiffProcess {
    w_process_fit(
        &CompetingRisksFit::new(first),
        &CompetingRisksFit::new(second),
        grid,
    )
}

pub fn w_process_fit(
    first: &CompetingRisksFit,
    second: &CompetingRisksFit,
    grid: &Grid,
) -> DiffProcess {
    let c = scale(first.n(), second.n());
    let values = grid
        .points()
        .iter()
        .map(|&g| c * (first.cif1_at(g) - second.cif1_at(g)))
        .collect();
    DiffProcess {
        grid: grid.clone(),
        values,
        n1: first.n(),
        n2: second.n(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StatisticKind {
    /// Weighted sup-norm.
    Ks,
    /// Weighted integrated square.
    Cvm,
    /// Studentized integrated square.
    CvmStud,
    /// Signed weighted integral.
    Pepe,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Statistic {
    pub kind: StatisticKind,
    pub value: f64,
    pub weight: Weight,
}

/// A statistic functional with its weight already evaluated on a grid, so
/// it can be applied to many processes on the same grid.
#[derive(Debug, Clone)]
pub(crate) struct Functional {
    kind: StatisticKind,
    /// Point weights for KS, cell integrals otherwise.
    weights: Vec<f64>,
}

impl Functional {
    pub(crate) fn new(kind: StatisticKind, weight: &Weight, grid: &Grid) -> Result<Self> {
        weight.validate()?;
        let iv = grid.interval();
        let weights = match kind {
            StatisticKind::Ks => grid
                .points()
                .iter()
                .map(|&g| {
                    let w = weight.value_at(g, iv);
                    // Unbounded weights are evaluated on interior points only.
                    if w.is_finite() {
                        w
                    } else {
                        0.0
                    }
                })
                .collect(),
            StatisticKind::Cvm | StatisticKind::Pepe => weight.cell_integrals(grid),
            StatisticKind::CvmStud => {
                return Err(crate::error::invalid(
                    "kind",
                    "studentized statistic needs moment estimates",
                ))
            }
        };
        Ok(Self { kind, weights })
    }

    pub(crate) fn apply(&self, values: &[f64]) -> f64 {
        match self.kind {
            StatisticKind::Ks => values
                .iter()
                .zip(&self.weights)
                .map(|(v, w)| w * v.abs())
                .fold(0.0, f64::max),
            StatisticKind::Cvm => values
                .iter()
                .zip(&self.weights)
                .map(|(v, w)| w * v * v)
                .sum(),
            StatisticKind::Pepe => values.iter().zip(&self.weights).map(|(v, w)| w * v).sum(),
            StatisticKind::CvmStud => unreachable!(),
        }
    }
}

fn evaluate(kind: StatisticKind, d: &DiffProcess, weight: &Weight) -> Result<Statistic> {
    let f = Functional::new(kind, weight, &d.grid)?;
    Ok(Statistic {
        kind,
        value: f.apply(&d.values),
        weight: weight.clone(),
    })
}

/// `sup rho1 |W|`, taken over grid points.
pub fn ks_stat(d: &DiffProcess, rho1: &Weight) -> Result<Statistic> {
    evaluate(StatisticKind::Ks, d, rho1)
}

/// `int rho2 W^2` by exact cell summation.
pub fn cvm_stat(d: &DiffProcess, rho2: &Weight) -> Result<Statistic> {
    evaluate(StatisticKind::Cvm, d, rho2)
}

/// `int rho2 W` by exact cell summation.
pub fn pepe_stat(d: &DiffProcess, rho2: &Weight) -> Result<Statistic> {
    evaluate(StatisticKind::Pepe, d, rho2)
}

/// `(T - mu) / sqrt(sigma2)`.
pub fn studentize_cvm(t_cvm: f64, mu: f64, sigma2: f64) -> Result<f64> {
    if !(sigma2 > DEGENERACY_EPS) {
        return Err(Error::DegenerateVariance(sigma2));
    }
    Ok((t_cvm - mu) / sigma2.sqrt())
}

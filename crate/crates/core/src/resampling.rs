//! Wild bootstrap of the difference process.
//!
//! Each replicate multiplies the per-event martingale increments of both
//! groups by i.i.d. centred unit-variance multipliers. With prefix sums over
//! the time-ordered events a replicate costs `O(n + m)` for `m` grid points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::Weight;
use crate::error::{invalid, Error, Result};
use crate::outcome::{Method, TestResult};
use crate::statistics::{scale, DiffProcess, Functional, StatisticKind};
use crate::step::Grid;
use crate::survival::{Cause, CompetingRisksFit, Sample};

/// Law of the bootstrap multipliers; all have mean 0 and variance 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiplierLaw {
    #[default]
    StandardNormal,
    Rademacher,
    /// `Poisson(1) - 1`.
    CenteredPoisson,
}

impl MultiplierLaw {
    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            MultiplierLaw::StandardNormal => StandardNormal.sample(rng),
            MultiplierLaw::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            MultiplierLaw::CenteredPoisson => {
                let p = Poisson::new(1.0).expect("unit rate is valid");
                let k: f64 = p.sample(rng);
                k - 1.0
            }
        }
    }
}

pub fn draw_multipliers<R: Rng + ?Sized>(n: usize, law: MultiplierLaw, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| law.sample(rng)).collect()
}

/// Generator for replicate `b`: a fixed seed with one ChaCha stream per
/// replicate, so results do not depend on scheduling.
pub fn replicate_rng(seed: u64, b: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(b);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub law: MultiplierLaw,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            replicates: 999,
            law: MultiplierLaw::StandardNormal,
            alpha: 0.05,
            seed: 0,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(invalid("replicates", "at least one replicate is required"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid("alpha", format!("must lie in (0, 1), got {}", self.alpha)));
        }
        Ok(())
    }
}

/// Per-group terms of the bootstrap process.
#[derive(Debug, Clone)]
struct GroupTerms {
    /// `a_e / Y(u_e)` with `a = 1 - F2` at cause-1 and `a = F1` at cause-2 events.
    loading: Vec<f64>,
    /// `1 / Y(u_e)`.
    inv_risk: Vec<f64>,
    /// Number of events at or before each grid point.
    counts: Vec<usize>,
    /// `F1_hat` at each grid point.
    cif: Vec<f64>,
}

impl GroupTerms {
    fn new(fit: &CompetingRisksFit, grid: &Grid) -> Self {
        let events = fit.events();
        let mut loading = Vec::with_capacity(events.len());
        let mut inv_risk = Vec::with_capacity(events.len());
        for e in events {
            let r = if e.at_risk > 0.0 { e.at_risk.recip() } else { 0.0 };
            let a = match e.cause {
                Cause::One => 1.0 - e.cif2,
                Cause::Two => e.cif1,
            };
            loading.push(a * r);
            inv_risk.push(r);
        }
        let points = grid.points();
        Self {
            loading,
            inv_risk,
            counts: points
                .iter()
                .map(|&g| events.partition_point(|e| e.time <= g))
                .collect(),
            cif: points.iter().map(|&g| fit.cif1_at(g)).collect(),
        }
    }

    fn len(&self) -> usize {
        self.loading.len()
    }

    /// Adds `sign * c * (P(s) - F1(s) Q(s))` to `out` at every grid point.
    fn accumulate(&self, g: &[f64], sign: f64, out: &mut [f64]) {
        let (mut p, mut q) = (0.0, 0.0);
        let mut e = 0;
        for (i, slot) in out.iter_mut().enumerate() {
            let upto = self.counts[i];
            while e < upto {
                p += self.loading[e] * g[e];
                q += self.inv_risk[e] * g[e];
                e += 1;
            }
            *slot += sign * (p - self.cif[i] * q);
        }
    }
}

/// Precomputed data for drawing bootstrap copies of the difference process
/// on a fixed grid.
#[derive(Debug, Clone)]
pub struct BootstrapEngine {
    grid: Grid,
    scale: f64,
    groups: [GroupTerms; 2],
}

impl BootstrapEngine {
    pub fn new(first: &CompetingRisksFit, second: &CompetingRisksFit, grid: &Grid) -> Self {
        Self {
            grid: grid.clone(),
            scale: scale(first.n(), second.n()),
            groups: [GroupTerms::new(first, grid), GroupTerms::new(second, grid)],
        }
    }

    pub fn from_samples(first: &Sample, second: &Sample, grid: &Grid) -> Self {
        Self::new(
            &CompetingRisksFit::new(first),
            &CompetingRisksFit::new(second),
            grid,
        )
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Number of multipliers needed per group.
    pub fn event_counts(&self) -> (usize, usize) {
        (self.groups[0].len(), self.groups[1].len())
    }

    /// Bootstrap process for given multipliers, one per event in time order.
    pub fn process(&self, g1: &[f64], g2: &[f64]) -> Result<Vec<f64>> {
        for (k, g) in [g1, g2].into_iter().enumerate() {
            let expected = self.groups[k].len();
            if g.len() != expected {
                return Err(Error::MultiplierCountMismatch {
                    group: k + 1,
                    expected,
                    got: g.len(),
                });
            }
        }
        let mut out = vec![0.0; self.grid.len()];
        self.fill(g1, g2, &mut out);
        Ok(out)
    }

    fn fill(&self, g1: &[f64], g2: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        self.groups[0].accumulate(g1, 1.0, out);
        self.groups[1].accumulate(g2, -1.0, out);
        out.iter_mut().for_each(|v| *v *= self.scale);
    }

    /// Replicate `b` under `seed`: multipliers for every event of group 1,
    /// then group 2, from the replicate's own stream.
    pub fn replicate(&self, law: MultiplierLaw, seed: u64, b: u64) -> Vec<f64> {
        let mut rng = replicate_rng(seed, b);
        let g1 = draw_multipliers(self.groups[0].len(), law, &mut rng);
        let g2 = draw_multipliers(self.groups[1].len(), law, &mut rng);
        let mut out = vec![0.0; self.grid.len()];
        self.fill(&g1, &g2, &mut out);
        out
    }

    /// Evaluates each functional on `replicates` bootstrap processes.
    /// Entry `[j][b]` is functional `j` on replicate `b`.
    pub(crate) fn statistics(
        &self,
        functionals: &[Functional],
        config: &BootstrapConfig,
    ) -> Vec<Vec<f64>> {
        let per_rep: Vec<Vec<f64>> = (0..config.replicates as u64)
            .into_par_iter()
            .map(|b| {
                let w = self.replicate(config.law, config.seed, b);
                functionals.iter().map(|f| f.apply(&w)).collect()
            })
            .collect();
        (0..functionals.len())
            .map(|j| per_rep.iter().map(|r| r[j]).collect())
            .collect()
    }
}

/// Bootstrap copy of the difference process for explicit multipliers.
pub fn bootstrap_process(
    first: &Sample,
    second: &Sample,
    grid: &Grid,
    g1: &[f64],
    g2: &[f64],
) -> Result<DiffProcess> {
    let engine = BootstrapEngine::from_samples(first, second, grid);
    let values = engine.process(g1, g2)?;
    DiffProcess::new(grid.clone(), values, first.len(), second.len())
}

/// The `ceil((1 - alpha)(B + 1))`-th smallest replicate, or `+inf` when that
/// rank exceeds `B`.
pub fn bootstrap_critical(replicates: &[f64], alpha: f64) -> f64 {
    let b = replicates.len();
    let rank = ((1.0 - alpha) * (b as f64 + 1.0) - 1e-9).ceil() as usize;
    if rank == 0 {
        return f64::NEG_INFINITY;
    }
    if rank > b {
        return f64::INFINITY;
    }
    let mut sorted = replicates.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted[rank - 1]
}

/// `(1 + #{T* >= T}) / (B + 1)`.
pub fn bootstrap_p_value(replicates: &[f64], observed: f64) -> f64 {
    let exceed = replicates.iter().filter(|&&t| t >= observed).count();
    (1 + exceed) as f64 / (replicates.len() + 1) as f64
}

fn kind_of(method: Method) -> Result<StatisticKind> {
    match method {
        Method::Ks => Ok(StatisticKind::Ks),
        Method::Cvm => Ok(StatisticKind::Cvm),
        Method::Pepe => Ok(StatisticKind::Pepe),
        other => Err(invalid(
            "method",
            format!("`{other}` is not a bootstrap procedure"),
        )),
    }
}

/// Runs several bootstrap tests on shared multiplier draws.
pub fn bootstrap_tests(
    engine: &BootstrapEngine,
    observed: &DiffProcess,
    requests: &[(Method, Weight)],
    config: &BootstrapConfig,
) -> Result<Vec<TestResult>> {
    config.validate()?;
    if observed.grid() != engine.grid() {
        return Err(Error::CovGridMismatch);
    }
    let functionals = requests
        .iter()
        .map(|(m, w)| Functional::new(kind_of(*m)?, w, engine.grid()))
        .collect::<Result<Vec<_>>>()?;
    let draws = engine.statistics(&functionals, config);
    Ok(requests
        .iter()
        .zip(&functionals)
        .zip(&draws)
        .map(|(((method, _), f), stats)| {
            let t = f.apply(observed.values());
            TestResult::decide(
                *method,
                t,
                bootstrap_critical(stats, config.alpha),
                bootstrap_p_value(stats, t),
            )
            .with_extra("replicates", config.replicates as f64)
        })
        .collect())
}

/// A single bootstrap test on the event grid of two samples.
pub fn bootstrap_test(
    first: &Sample,
    second: &Sample,
    grid: &Grid,
    method: Method,
    weight: &Weight,
    config: &BootstrapConfig,
) -> Result<TestResult> {
    let f1 = CompetingRisksFit::new(first);
    let f2 = CompetingRisksFit::new(second);
    let engine = BootstrapEngine::new(&f1, &f2, grid);
    let observed = crate::statistics::w_process_fit(&f1, &f2, grid);
    let mut out = bootstrap_tests(&engine, &observed, &[(method, weight.clone())], config)?;
    Ok(out.remove(0))
}

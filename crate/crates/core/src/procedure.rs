//! Runs a set of test methods on one two-sample comparison, sharing the
//! fits, grid, covariance and bootstrap draws between them.

use serde::{Deserialize, Serialize};

use crate::approximation::{box_test, pearson_test};
use crate::covariance::{covariance_moments, group_covariance_fit, pooled_covariance, Moments, Weight};
use crate::error::{Error, Result};
use crate::outcome::{Method, TestResult};
use crate::resampling::{bootstrap_tests, BootstrapConfig, BootstrapEngine};
use crate::statistics::{cvm_stat, w_process_fit, DiffProcess};
use crate::step::{Grid, Interval};
use crate::survival::{event_grid, Cause, CompetingRisksFit, Sample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOptions {
    pub methods: Vec<Method>,
    pub bootstrap: BootstrapConfig,
    /// Weight of the supremum statistic.
    pub rho1: Weight,
    /// Weight of the integral statistics.
    pub rho2: Weight,
    /// Require someone at risk in each group at the right endpoint.
    pub check_risk_set: bool,
    /// Thin the covariance grid to at most this many points before taking
    /// moments.
    pub coarsen: Option<usize>,
}

impl Default for TestOptions {
    fn default() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            bootstrap: BootstrapConfig::default(),
            rho1: Weight::default(),
            rho2: Weight::default(),
            check_risk_set: true,
            coarsen: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Analysis {
    pub interval: Interval,
    pub grid: Grid,
    pub process: DiffProcess,
    pub moments: Option<Moments>,
    pub results: Vec<TestResult>,
}

/// `[0, min_k max event time in group k]`.
pub fn default_interval(first: &Sample, second: &Sample) -> Result<Interval> {
    let last = |s: &Sample| s.event_times().fold(f64::NEG_INFINITY, f64::max);
    let end = last(first).min(last(second));
    if !(end > 0.0 && end.is_finite()) {
        return Err(Error::InvalidInterval { start: 0.0, end });
    }
    Interval::new(0.0, end)
}

pub fn run_methods(
    first: &Sample,
    second: &Sample,
    interval: Interval,
    options: &TestOptions,
) -> Result<Analysis> {
    options.bootstrap.validate()?;
    let grid = event_grid(first, second, interval, options.check_risk_set)?;
    let fits = [CompetingRisksFit::new(first), CompetingRisksFit::new(second)];
    let process = w_process_fit(&fits[0], &fits[1], &grid);

    let cause1 = first.count_events(Cause::One, interval.end())
        + second.count_events(Cause::One, interval.end());
    if cause1 == 0 {
        let results = options
            .methods
            .iter()
            .map(|&m| TestResult::not_rejected(m, 0.0, "no cause-1 events in the interval"))
            .collect();
        return Ok(Analysis {
            interval,
            grid,
            process,
            moments: None,
            results,
        });
    }

    let requests: Vec<(Method, Weight)> = options
        .methods
        .iter()
        .filter(|m| m.is_bootstrap())
        .map(|&m| {
            let w = if m == Method::Ks { &options.rho1 } else { &options.rho2 };
            (m, w.clone())
        })
        .collect();
    let boot = if requests.is_empty() {
        Vec::new()
    } else {
        let engine = BootstrapEngine::new(&fits[0], &fits[1], &grid);
        bootstrap_tests(&engine, &process, &requests, &options.bootstrap)?
    };

    let needs_moments = options
        .methods
        .iter()
        .any(|m| matches!(m, Method::Box | Method::Pearson));
    let moments = if needs_moments {
        let z = pooled_covariance(
            &group_covariance_fit(&fits[0], &grid)?,
            &group_covariance_fit(&fits[1], &grid)?,
            first.len(),
            second.len(),
        )?;
        let z = match options.coarsen {
            Some(k) => z.coarsen(k),
            None => z,
        };
        Some(covariance_moments(&z, &options.rho2)?)
    } else {
        None
    };
    let t_cvm = if needs_moments {
        cvm_stat(&process, &options.rho2)?.value
    } else {
        0.0
    };

    let alpha = options.bootstrap.alpha;
    let mut boot = boot.into_iter();
    let results = options
        .methods
        .iter()
        .map(|&m| match m {
            Method::Box => {
                let mo = moments.expect("moments computed");
                box_test(t_cvm, mo.mu, mo.sigma2, alpha)
            }
            Method::Pearson => {
                let mo = moments.expect("moments computed");
                pearson_test(t_cvm, mo.mu, mo.sigma2, mo.gamma, alpha)
            }
            _ => Ok(boot.next().expect("one bootstrap result per request")),
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(Analysis {
        interval,
        grid,
        process,
        moments,
        results,
    })
}

//! Test execution on a dataset and rendering of the results.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use cifeq_core::covariance::Weight;
use cifeq_core::procedure::{default_interval, run_methods, TestOptions};
use cifeq_core::resampling::BootstrapConfig;
use cifeq_core::step::Interval;
use cifeq_core::survival::{aalen_johansen, Cause, TiePolicy};
use cifeq_core::{Error as CoreError, Method, TestResult};
use serde::Serialize;

use crate::dataset::{ColumnMapping, Dataset, Filter};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub interval: Option<[f64; 2]>,
    pub methods: Vec<Method>,
    pub bootstrap: BootstrapConfig,
    /// Weight of the integral statistics; the supremum statistic is
    /// unweighted.
    pub rho2: Weight,
    pub tie_policy: TiePolicy,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            interval: None,
            methods: Method::ALL.to_vec(),
            bootstrap: BootstrapConfig::default(),
            rho2: Weight::default(),
            tie_policy: TiePolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub time: f64,
    pub cif1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CifCurve {
    pub group: String,
    pub points: Vec<CurvePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub version: &'static str,
    pub groups: [String; 2],
    pub sizes: [usize; 2],
    pub mapping: ColumnMapping,
    pub filter: Option<Filter>,
    pub interval: [f64; 2],
    pub interval_source: &'static str,
    pub bootstrap: BootstrapConfig,
    pub rho1: Weight,
    pub rho2: Weight,
    pub tie_policy: TiePolicy,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportBundle {
    pub results: Vec<TestResult>,
    pub curves: Vec<CifCurve>,
    pub provenance: Provenance,
}

pub fn run_test(dataset: &Dataset, filter: Option<&Filter>, config: &RunConfig) -> Result<ReportBundle> {
    let [first, second] = dataset.samples(config.tie_policy)?;
    let (interval, source) = match config.interval {
        Some([a, b]) => (Interval::new(a, b)?, "user"),
        None => (default_interval(&first, &second)?, "default"),
    };
    let mut options = TestOptions {
        methods: config.methods.clone(),
        bootstrap: config.bootstrap,
        rho1: Weight::Constant(1.0),
        rho2: config.rho2.clone(),
        check_risk_set: true,
        coarsen: None,
    };
    let mut warnings = Vec::new();
    let analysis = match run_methods(&first, &second, interval, &options) {
        Err(CoreError::EmptyRiskSet { label, time }) if source == "user" => {
            warnings.push(format!(
                "group `{label}` has nobody at risk at {time}; estimates near the right end are unstable"
            ));
            options.check_risk_set = false;
            run_methods(&first, &second, interval, &options)?
        }
        other => other?,
    };

    let curves = [&first, &second]
        .iter()
        .map(|s| {
            let fit = cifeq_core::survival::CompetingRisksFit::new(s);
            CifCurve {
                group: s.label().to_string(),
                points: analysis
                    .grid
                    .points()
                    .iter()
                    .map(|&t| CurvePoint {
                        time: t,
                        cif1: fit.cif1_at(t),
                    })
                    .collect(),
            }
        })
        .collect();

    Ok(ReportBundle {
        results: analysis.results,
        curves,
        provenance: Provenance {
            version: env!("CARGO_PKG_VERSION"),
            groups: dataset.groups.clone(),
            sizes: dataset.group_sizes(),
            mapping: dataset.mapping.clone(),
            filter: filter.cloned(),
            interval: [interval.start(), interval.end()],
            interval_source: source,
            bootstrap: config.bootstrap,
            rho1: options.rho1,
            rho2: options.rho2,
            tie_policy: config.tie_policy,
            warnings,
        },
    })
}

fn num(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        "null".into()
    }
}

impl ReportBundle {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Human-readable table with the same numbers as the JSON output.
    pub fn render_table(&self) -> String {
        let p = &self.provenance;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "groups: {} (n = {}) vs {} (n = {})",
            p.groups[0], p.sizes[0], p.groups[1], p.sizes[1]
        );
        let _ = writeln!(
            out,
            "interval: [{}, {}] ({}), B = {}, alpha = {}, seed = {}",
            p.interval[0], p.interval[1], p.interval_source, p.bootstrap.replicates, p.bootstrap.alpha, p.bootstrap.seed
        );
        for w in &p.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        let _ = writeln!(
            out,
            "{:<8} {:>22} {:>22} {:>22} {:>7}",
            "method", "statistic", "critical", "p_value", "reject"
        );
        for r in &self.results {
            let _ = writeln!(
                out,
                "{:<8} {:>22} {:>22} {:>22} {:>7}",
                r.method.as_str(),
                num(r.statistic),
                num(r.critical),
                num(r.p_value),
                r.reject
            );
            if !r.extras.is_empty() {
                let extras: Vec<String> = r.extras.iter().map(|(k, v)| format!("{k} = {}", num(*v))).collect();
                let _ = writeln!(out, "         {}", extras.join(", "));
            }
            for n in &r.notes {
                let _ = writeln!(out, "         note: {n}");
            }
        }
        out
    }

    /// Writes `results.csv`, `curves.csv` and `report.json` into `dir`.
    pub fn write_files(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let results = dir.join("results.csv");
        let mut w = csv::Writer::from_path(&results)?;
        w.write_record(["method", "statistic", "critical", "p_value", "reject"])?;
        for r in &self.results {
            w.write_record([
                r.method.as_str().to_string(),
                num(r.statistic),
                num(r.critical),
                num(r.p_value),
                r.reject.to_string(),
            ])?;
        }
        w.flush()?;

        let curves = dir.join("curves.csv");
        let mut w = csv::Writer::from_path(&curves)?;
        w.write_record(["group", "time", "cif1"])?;
        for c in &self.curves {
            for pt in &c.points {
                w.write_record([c.group.clone(), num(pt.time), num(pt.cif1)])?;
            }
        }
        w.flush()?;

        let json = dir.join("report.json");
        fs::write(&json, self.to_json()?)?;
        Ok(vec![results, curves, json])
    }
}

/// Step-function vertices `(time, F1_hat)` of each group's cause-1 CIF on
/// the interval, starting at its left end and closing at its right end.
pub fn plot_data(dataset: &Dataset, interval: Option<[f64; 2]>, tie_policy: TiePolicy) -> Result<Vec<CifCurve>> {
    let [first, second] = dataset.samples(tie_policy)?;
    let interval = match interval {
        Some([a, b]) => Interval::new(a, b)?,
        None => default_interval(&first, &second)?,
    };
    Ok([&first, &second]
        .iter()
        .map(|s| {
            let f = aalen_johansen(s, Cause::One);
            let mut points = vec![CurvePoint {
                time: interval.start(),
                cif1: f.value(interval.start()),
            }];
            points.extend(
                f.vertices()
                    .filter(|&(t, _)| t > interval.start() && t <= interval.end())
                    .map(|(time, cif1)| CurvePoint { time, cif1 }),
            );
            if points.last().map(|p| p.time) != Some(interval.end()) {
                points.push(CurvePoint {
                    time: interval.end(),
                    cif1: f.value(interval.end()),
                });
            }
            CifCurve {
                group: s.label().to_string(),
                points,
            }
        })
        .collect())
}

/// Writes one `cif_<k>.csv` per group (k = 1, 2) with columns
/// `group,time,cif1`.
pub fn emit_plot_data(
    dataset: &Dataset,
    interval: Option<[f64; 2]>,
    tie_policy: TiePolicy,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let curves = plot_data(dataset, interval, tie_policy)?;
    let mut paths = Vec::new();
    for (k, c) in curves.iter().enumerate() {
        let path = dir.join(format!("cif_{}.csv", k + 1));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["group", "time", "cif1"])?;
        for pt in &c.points {
            w.write_record([c.group.clone(), num(pt.time), num(pt.cif1)])?;
        }
        w.flush()?;
        paths.push(path);
    }
    Ok(paths)
}

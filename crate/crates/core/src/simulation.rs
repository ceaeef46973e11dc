//! Data-generating models, censoring and truncation layers, and the Monte
//! Carlo harness for rejection rates.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::outcome::Method;
use crate::procedure::{run_methods, TestOptions};
use crate::resampling::BootstrapConfig;
use crate::step::Interval;
use crate::survival::{Cause, Sample, Status, Subject, TiePolicy};

/// Sample label, 1 or 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Group {
    First,
    Second,
}

impl Group {
    pub const BOTH: [Group; 2] = [Group::First, Group::Second];

    fn index(self) -> usize {
        match self {
            Group::First => 0,
            Group::Second => 1,
        }
    }
}

/// Competing-risks models with two groups.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Model {
    /// `F1 = q x / (1 - p + q x)`, `F2 = (1 - p) x / (1 - p + q)` with
    /// `x = 1 - e^{-t}`, `q = p e^{beta Z}` and `Z = 1` in the second group.
    Bk1 { p: f64, beta: f64 },
    /// `F1 = (1 - p_k) x^{e^{beta Z}}`, `F2 = p_k x` with `Z = 1` in the
    /// first group, so the cause-1 CIFs cross.
    Bk2 { p1: f64, p2: f64, beta: f64 },
    /// Group 1: hazards `e^{-u}` and `1 - e^{-u}`. Group 2: constant hazards
    /// `c` and `2 - c`.
    Dp3 { c: f64 },
}

fn unit_open(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must lie in (0, 1), got {v}")))
    }
}

fn finite(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, "must be finite"))
    }
}

impl Model {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Model::Bk1 { p, beta } => {
                unit_open("model.p", p)?;
                finite("model.beta", beta)
            }
            Model::Bk2 { p1, p2, beta } => {
                unit_open("model.p1", p1)?;
                unit_open("model.p2", p2)?;
                finite("model.beta", beta)
            }
            Model::Dp3 { c } => {
                if (0.0..=1.0).contains(&c) {
                    Ok(())
                } else {
                    Err(invalid("model.c", format!("must lie in [0, 1], got {c}")))
                }
            }
        }
    }

    fn bk1_q(p: f64, beta: f64, group: Group) -> f64 {
        match group {
            Group::First => p,
            Group::Second => p * beta.exp(),
        }
    }

    fn bk2_params(p1: f64, p2: f64, beta: f64, group: Group) -> (f64, f64) {
        match group {
            Group::First => (p1, beta.exp()),
            Group::Second => (p2, 1.0),
        }
    }

    /// `F1^(k)(t)`.
    pub fn cif1(&self, group: Group, t: f64) -> f64 {
        let x = -(-t).exp_m1();
        match *self {
            Model::Bk1 { p, beta } => {
                let q = Self::bk1_q(p, beta, group);
                q * x / (1.0 - p + q * x)
            }
            Model::Bk2 { p1, p2, beta } => {
                let (pk, power) = Self::bk2_params(p1, p2, beta, group);
                (1.0 - pk) * x.powf(power)
            }
            Model::Dp3 { c } => match group {
                Group::First => 0.5 * -(-2.0 * t).exp_m1(),
                Group::Second => 0.5 * c * -(-2.0 * t).exp_m1(),
            },
        }
    }

    /// `F2^(k)(t)`.
    pub fn cif2(&self, group: Group, t: f64) -> f64 {
        1.0 - self.survival(group, t) - self.cif1(group, t)
    }

    /// All-cause survival `P(T > t)`.
    pub fn survival(&self, group: Group, t: f64) -> f64 {
        let x = -(-t).exp_m1();
        match *self {
            Model::Bk1 { p, beta } => {
                let q = Self::bk1_q(p, beta, group);
                1.0 - q * x / (1.0 - p + q * x) - (1.0 - p) * x / (1.0 - p + q)
            }
            Model::Bk2 { p1, p2, beta } => {
                let (pk, power) = Self::bk2_params(p1, p2, beta, group);
                1.0 - (1.0 - pk) * x.powf(power) - pk * x
            }
            Model::Dp3 { .. } => match group {
                Group::First => (-t).exp(),
                Group::Second => (-2.0 * t).exp(),
            },
        }
    }
}

/// Draws one complete `(time, cause)` pair by inverting the conditional
/// CIFs.
pub fn sample_event<R: Rng + ?Sized>(model: &Model, group: Group, rng: &mut R) -> (f64, Cause) {
    let std_exp = |rng: &mut R| -> f64 { -(1.0 - rng.random::<f64>()).ln() };
    match *model {
        Model::Bk1 { p, beta } => {
            let q = Model::bk1_q(p, beta, group);
            if rng.random::<f64>() < q / (1.0 - p + q) {
                let u: f64 = rng.random();
                let x = u * (1.0 - p) / (1.0 - p + q * (1.0 - u));
                (-(-x).ln_1p(), Cause::One)
            } else {
                (std_exp(rng), Cause::Two)
            }
        }
        Model::Bk2 { p1, p2, beta } => {
            let (pk, power) = Model::bk2_params(p1, p2, beta, group);
            if rng.random::<f64>() < 1.0 - pk {
                let u: f64 = rng.random();
                (-(-u.powf(power.recip())).ln_1p(), Cause::One)
            } else {
                (std_exp(rng), Cause::Two)
            }
        }
        Model::Dp3 { c } => match group {
            Group::First => {
                let t = std_exp(rng);
                let cause = if rng.random::<f64>() < (-t).exp() {
                    Cause::One
                } else {
                    Cause::Two
                };
                (t, cause)
            }
            Group::Second => {
                let t = 0.5 * std_exp(rng);
                let cause = if rng.random::<f64>() < 0.5 * c {
                    Cause::One
                } else {
                    Cause::Two
                };
                (t, cause)
            }
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Censoring {
    #[default]
    None,
    /// `C ~ U(a, b)` in both groups.
    Uniform { a: f64, b: f64 },
    /// `C ~ Exp(lambda_k)`; a zero rate means no censoring in that group.
    Exponential { lambda1: f64, lambda2: f64 },
    /// `U(0, b)` with `b` calibrated so that, averaged over both groups,
    /// the untruncated censoring proportion equals `fraction`.
    Target { fraction: f64 },
}

impl Censoring {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Censoring::None => Ok(()),
            Censoring::Uniform { a, b } => {
                if a >= 0.0 && a < b && b.is_finite() {
                    Ok(())
                } else {
                    Err(invalid("censoring.b", format!("need 0 <= a < b < inf, got a = {a}, b = {b}")))
                }
            }
            Censoring::Exponential { lambda1, lambda2 } => {
                for (name, l) in [("censoring.lambda1", lambda1), ("censoring.lambda2", lambda2)] {
                    if !(l >= 0.0 && l.is_finite()) {
                        return Err(invalid(name, format!("must be finite and >= 0, got {l}")));
                    }
                }
                Ok(())
            }
            Censoring::Target { fraction } => {
                if (0.0..1.0).contains(&fraction) {
                    Ok(())
                } else {
                    Err(invalid("censoring.fraction", format!("must lie in [0, 1), got {fraction}")))
                }
            }
        }
    }

    /// Replaces a censoring target by the calibrated uniform law.
    pub fn resolve(&self, model: &Model) -> Result<Censoring> {
        self.validate()?;
        match *self {
            Censoring::Target { fraction } if fraction == 0.0 => Ok(Censoring::None),
            Censoring::Target { fraction } => Ok(Censoring::Uniform {
                a: 0.0,
                b: uniform_bound(model, fraction)?,
            }),
            other => Ok(other),
        }
    }

    fn draw<R: Rng + ?Sized>(&self, group: Group, rng: &mut R) -> f64 {
        match *self {
            Censoring::None | Censoring::Target { .. } => f64::INFINITY,
            Censoring::Uniform { a, b } => Uniform::new(a, b).expect("validated bounds").sample(rng),
            Censoring::Exponential { lambda1, lambda2 } => {
                let l = [lambda1, lambda2][group.index()];
                if l == 0.0 {
                    f64::INFINITY
                } else {
                    Exp::new(l).expect("validated rate").sample(rng)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Truncation {
    #[default]
    None,
    /// With probability `fraction` the entry time is `Gamma(shape, scale)`,
    /// otherwise 0.
    Gamma { shape: f64, scale: f64, fraction: f64 },
}

impl Truncation {
    pub fn validate(&self) -> Result<()> {
        if let Truncation::Gamma {
            shape,
            scale,
            fraction,
        } = *self
        {
            if !(shape > 0.0 && shape.is_finite()) {
                return Err(invalid("truncation.shape", format!("must be positive, got {shape}")));
            }
            if !(scale > 0.0 && scale.is_finite()) {
                return Err(invalid("truncation.scale", format!("must be positive, got {scale}")));
            }
            if !(0.0..=1.0).contains(&fraction) {
                return Err(invalid(
                    "truncation.fraction",
                    format!("must lie in [0, 1], got {fraction}"),
                ));
            }
        }
        Ok(())
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Truncation::None => 0.0,
            Truncation::Gamma {
                shape,
                scale,
                fraction,
            } => {
                if rng.random::<f64>() < fraction {
                    Gamma::new(shape, scale).expect("validated law").sample(rng)
                } else {
                    0.0
                }
            }
        }
    }
}

/// Censors and truncates one event. `None` means the subject left the
/// study before entry and is never observed.
pub fn apply_incompleteness<R: Rng + ?Sized>(
    event: (f64, Cause),
    group: Group,
    censoring: &Censoring,
    truncation: &Truncation,
    rng: &mut R,
) -> Option<Subject> {
    let (t, cause) = event;
    let c = censoring.draw(group, rng);
    let entry = truncation.draw(rng);
    let exit = t.min(c);
    if entry >= exit {
        return None;
    }
    let status = if t <= c {
        match cause {
            Cause::One => Status::Cause1,
            Cause::Two => Status::Cause2,
        }
    } else {
        Status::Censored
    };
    Some(Subject::new(entry, exit, status))
}

/// How the nominal group size relates to truncation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sizing {
    /// Redraw truncated subjects until `n` are observed.
    #[default]
    Observed,
    /// Draw `n` subjects and keep those that survive truncation.
    Drawn,
}

/// One simulated group and the number of subjects drawn to obtain it.
pub fn generate_group<R: Rng + ?Sized>(
    model: &Model,
    group: Group,
    n: usize,
    censoring: &Censoring,
    truncation: &Truncation,
    sizing: Sizing,
    rng: &mut R,
) -> (Vec<Subject>, usize) {
    let mut out = Vec::with_capacity(n);
    let mut drawn = 0;
    loop {
        match sizing {
            Sizing::Observed if out.len() >= n => break,
            Sizing::Drawn if drawn >= n => break,
            _ => {}
        }
        drawn += 1;
        let ev = sample_event(model, group, rng);
        if let Some(s) = apply_incompleteness(ev, group, censoring, truncation, rng) {
            out.push(s);
        }
    }
    (out, drawn)
}

// ---------------------------------------------------------------------------
// Censoring calibration

/// `(1/b) int_0^b S(c) dc`, the probability that `U(0, b)` censoring
/// precedes the event.
fn censored_fraction(model: &Model, group: Group, b: f64) -> f64 {
    // Composite Simpson on a smooth integrand.
    let n = 4096;
    let h = b / n as f64;
    let mut acc = model.survival(group, 0.0) + model.survival(group, b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * model.survival(group, i as f64 * h);
    }
    acc * h / 3.0 / b
}

fn mean_censored_fraction(model: &Model, b: f64) -> f64 {
    0.5 * Group::BOTH
        .iter()
        .map(|&g| censored_fraction(model, g, b))
        .sum::<f64>()
}

/// Upper bound `b` of `U(0, b)` censoring giving the target average
/// censoring proportion over both untruncated groups.
pub fn calibrate_uniform(model: &Model, target: f64) -> Result<f64> {
    model.validate()?;
    unit_open("censoring.fraction", target)?;
    let (mut lo, mut hi) = (1e-9_f64, 1.0_f64);
    while mean_censored_fraction(model, hi) > target {
        lo = hi;
        hi *= 2.0;
        if hi > 1e9 {
            return Err(invalid("censoring.fraction", "target not reachable"));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_censored_fraction(model, mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Calibrated `U(0, b)` bounds for the first model at the designs' `p` and
/// `beta` values.
pub const UNIFORM_CENSORING_TABLE: &[(f64, f64, f64, f64)] = &[
    // (p, beta, target, b)
    (0.25, 0.0, 0.25, 3.777169210445095),
    (0.25, 0.0, 0.5, 1.51847964935547),
    (0.5, 0.0, 0.25, 3.272156520844078),
    (0.5, 0.0, 0.5, 1.253710764112327),
    (0.75, 0.0, 0.25, 2.1858629704999544),
    (0.75, 0.0, 0.5, 0.725636542635195),
    (0.18, 0.75, 0.25, 3.765546334444366),
    (0.18, 0.75, 0.5, 1.5120178206695414),
    (0.41, 0.75, 0.25, 3.2264528928532172),
    (0.41, 0.75, 0.5, 1.2275356581740766),
    (0.68, 0.75, 0.25, 2.145916537865048),
    (0.68, 0.75, 0.5, 0.7012880135858095),
];

fn uniform_bound(model: &Model, target: f64) -> Result<f64> {
    if let Model::Bk1 { p, beta } = *model {
        let hit = UNIFORM_CENSORING_TABLE
            .iter()
            .find(|r| r.0 == p && r.1 == beta && r.2 == target);
        if let Some(r) = hit {
            return Ok(r.3);
        }
    }
    calibrate_uniform(model, target)
}

// ---------------------------------------------------------------------------
// Monte Carlo harness

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub id: String,
    pub model: Model,
    pub sizes: [usize; 2],
    #[serde(default)]
    pub censoring: Censoring,
    #[serde(default)]
    pub truncation: Truncation,
    pub interval: [f64; 2],
    pub n_sim: usize,
    /// Replicates, level, multiplier law and the master seed.
    #[serde(default)]
    pub bootstrap: BootstrapConfig,
    #[serde(default = "all_methods")]
    pub tests: Vec<Method>,
    #[serde(default)]
    pub sizing: Sizing,
}

fn all_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty()
            || !self
                .id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c))
        {
            return Err(invalid("id", "use letters, digits, '-', '_' or '.'"));
        }
        self.model.validate()?;
        if self.sizes.contains(&0) {
            return Err(invalid("sizes", "both group sizes must be positive"));
        }
        self.censoring.validate()?;
        self.truncation.validate()?;
        Interval::new(self.interval[0], self.interval[1])
            .map_err(|_| invalid("interval", format!("need 0 <= t1 < t2, got {:?}", self.interval)))?;
        if self.n_sim == 0 {
            return Err(invalid("n_sim", "at least one run is required"));
        }
        self.bootstrap.validate().map_err(|e| match e {
            crate::Error::InvalidParameter { name, reason } => crate::Error::InvalidParameter {
                name: match name {
                    "alpha" => "bootstrap.alpha",
                    "replicates" => "bootstrap.replicates",
                    other => other,
                },
                reason,
            },
            other => other,
        })?;
        if self.tests.is_empty() {
            return Err(invalid("tests", "at least one test is required"));
        }
        Ok(())
    }
}

/// Mixes a master seed with an index (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectionRow {
    pub scenario_id: String,
    pub test: Method,
    pub rejections: usize,
    pub n_sim: usize,
    pub proportion: f64,
    pub se: f64,
    pub wallclock_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectionTable {
    pub rows: Vec<RejectionRow>,
    /// Runs in which a group had no cause-1 event in the interval.
    pub empty_runs: usize,
    /// Mean ratio of subjects drawn to subjects observed.
    pub redraw_factor: f64,
}

impl RejectionTable {
    pub fn proportion(&self, test: Method) -> Option<f64> {
        self.rows.iter().find(|r| r.test == test).map(|r| r.proportion)
    }
}

/// Outcome of one Monte Carlo run: one rejection flag per requested test.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub rejections: Vec<bool>,
    pub empty: bool,
    pub drawn: usize,
    pub observed: usize,
}

/// The two samples of run `r`.
pub fn simulate_samples(scenario: &Scenario, censoring: &Censoring, r: u64) -> Result<([Sample; 2], usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(scenario.bootstrap.seed, r));
    let mut drawn = 0;
    let mut make = |g: Group, label: &str| -> Result<Sample> {
        let (subjects, d) = generate_group(
            &scenario.model,
            g,
            scenario.sizes[g.index()],
            censoring,
            &scenario.truncation,
            scenario.sizing,
            &mut rng,
        );
        drawn += d;
        Sample::new(
            label,
            subjects,
            TiePolicy::Jitter {
                seed: derive_seed(scenario.bootstrap.seed ^ 0x7469_6573, r),
            },
        )
    };
    let first = make(Group::First, "group1")?;
    let second = make(Group::Second, "group2")?;
    Ok(([first, second], drawn))
}

/// Run `r` of a scenario whose censoring has been resolved.
pub fn run_once(scenario: &Scenario, censoring: &Censoring, r: u64) -> Result<RunOutcome> {
    let ([first, second], drawn) = simulate_samples(scenario, censoring, r)?;
    let observed = first.len() + second.len();
    let t2 = scenario.interval[1];
    let empty = first.count_events(Cause::One, t2) == 0 || second.count_events(Cause::One, t2) == 0;
    if empty {
        return Ok(RunOutcome {
            rejections: vec![false; scenario.tests.len()],
            empty,
            drawn,
            observed,
        });
    }
    let options = TestOptions {
        methods: scenario.tests.clone(),
        bootstrap: BootstrapConfig {
            seed: derive_seed(scenario.bootstrap.seed ^ 0x6D75_6C74, r),
            ..scenario.bootstrap
        },
        check_risk_set: false,
        ..TestOptions::default()
    };
    let interval = Interval::new(scenario.interval[0], t2)?;
    let analysis = run_methods(&first, &second, interval, &options)?;
    Ok(RunOutcome {
        rejections: analysis.results.iter().map(|r| r.reject).collect(),
        empty,
        drawn,
        observed,
    })
}

pub fn monte_carlo(scenario: &Scenario) -> Result<RejectionTable> {
    scenario.validate()?;
    let start = Instant::now();
    let censoring = scenario.censoring.resolve(&scenario.model)?;
    let runs = (0..scenario.n_sim as u64)
        .into_par_iter()
        .map(|r| run_once(scenario, &censoring, r))
        .collect::<Result<Vec<_>>>()?;
    let elapsed = start.elapsed().as_secs_f64();

    let n = scenario.n_sim as f64;
    let rows = scenario
        .tests
        .iter()
        .enumerate()
        .map(|(j, &test)| {
            let rejections = runs.iter().filter(|o| o.rejections[j]).count();
            let proportion = rejections as f64 / n;
            RejectionRow {
                scenario_id: scenario.id.clone(),
                test,
                rejections,
                n_sim: scenario.n_sim,
                proportion,
                se: (proportion * (1.0 - proportion) / n).sqrt(),
                wallclock_s: elapsed,
            }
        })
        .collect();
    let drawn: usize = runs.iter().map(|o| o.drawn).sum();
    let observed: usize = runs.iter().map(|o| o.observed).sum();
    Ok(RejectionTable {
        rows,
        empty_runs: runs.iter().filter(|o| o.empty).count(),
        redraw_factor: drawn as f64 / observed.max(1) as f64,
    })
}

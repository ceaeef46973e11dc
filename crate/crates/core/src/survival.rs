//! One-sample competing-risks estimators for left-truncated, right-censored
//! data: risk set, cause-specific counting processes, Kaplan-Meier and
//! Aalen-Johansen.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::step::{Grid, Interval, StepFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cause {
    One,
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    Censored,
    Cause1,
    Cause2,
}

impl Status {
    pub fn cause(self) -> Option<Cause> {
        match self {
            Status::Censored => None,
            Status::Cause1 => Some(Cause::One),
            Status::Cause2 => Some(Cause::Two),
        }
    }

    pub fn is_event(self) -> bool {
        self != Status::Censored
    }

    /// 0 = censored, 1 and 2 = cause.
    pub fn code(self) -> u8 {
        match self {
            Status::Censored => 0,
            Status::Cause1 => 1,
            Status::Cause2 => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Status::Censored),
            1 => Some(Status::Cause1),
            2 => Some(Status::Cause2),
            _ => None,
        }
    }
}

impl From<Cause> for Status {
    fn from(c: Cause) -> Self {
        match c {
            Cause::One => Status::Cause1,
            Cause::Two => Status::Cause2,
        }
    }
}

/// One observation: at risk on `(entry, exit]`, leaving with `status`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Subject {
    pub entry: f64,
    pub exit: f64,
    pub status: Status,
}

impl Subject {
    pub fn new(entry: f64, exit: f64, status: Status) -> Self {
        Self {
            entry,
            exit,
            status,
        }
    }

    /// Untruncated subject.
    pub fn at(exit: f64, status: Status) -> Self {
        Self::new(0.0, exit, status)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TiePolicy {
    /// Break ties with seeded N(0, (1e-6 * range)^2) noise on the tied exits.
    Jitter { seed: u64 },
    Reject,
}

impl Default for TiePolicy {
    fn default() -> Self {
        TiePolicy::Jitter { seed: 0 }
    }
}

const JITTER_SCALE: f64 = 1e-6;

/// A validated sample: non-empty, `exit > entry`, pairwise distinct exits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    label: String,
    subjects: Vec<Subject>,
}

impl Sample {
    pub fn new(label: impl Into<String>, raw: Vec<Subject>, policy: TiePolicy) -> Result<Self> {
        validate_sample(raw, policy).map(|subjects| Self {
            label: label.into(),
            subjects: subjects.subjects,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn subjects(&self) -> &[Subject] {
        &self.subjects
    }

    pub fn len(&self) -> usize {
        self.subjects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty()
    }

    /// Number at risk just before `t`: `#{i : entry_i < t <= exit_i}`.
    pub fn at_risk(&self, t: f64) -> usize {
        self.subjects
            .iter()
            .filter(|s| s.entry < t && t <= s.exit)
            .count()
    }

    pub fn event_times(&self) -> impl Iterator<Item = f64> + '_ {
        self.subjects
            .iter()
            .filter(|s| s.status.is_event())
            .map(|s| s.exit)
    }

    pub fn count_events(&self, cause: Cause, up_to: f64) -> usize {
        self.subjects
            .iter()
            .filter(|s| s.status.cause() == Some(cause) && s.exit <= up_to)
            .count()
    }
}

/// Validates raw subjects and resolves tied exit times. Subject order is
/// preserved. The returned sample is unlabeled.
pub fn validate_sample(mut raw: Vec<Subject>, policy: TiePolicy) -> Result<Sample> {
    if raw.is_empty() {
        return Err(Error::EmptySample);
    }
    for (index, s) in raw.iter().enumerate() {
        if !(s.entry.is_finite() && s.exit.is_finite() && s.entry >= 0.0) {
            return Err(Error::InvalidTime { index });
        }
        if s.exit <= s.entry {
            return Err(Error::NonPositiveDuration {
                index,
                entry: s.entry,
                exit: s.exit,
            });
        }
    }

    match policy {
        TiePolicy::Reject => {
            if let Some(time) = first_tie(&raw) {
                return Err(Error::TiesPresent { time });
            }
        }
        TiePolicy::Jitter { seed } => jitter_ties(&mut raw, seed),
    }
    Ok(Sample {
        label: String::new(),
        subjects: raw,
    })
}

fn sorted_exit_order(subjects: &[Subject]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..subjects.len()).collect();
    order.sort_by(|&a, &b| subjects[a].exit.total_cmp(&subjects[b].exit));
    order
}

fn first_tie(subjects: &[Subject]) -> Option<f64> {
    let order = sorted_exit_order(subjects);
    order
        .windows(2)
        .find(|w| subjects[w[0]].exit == subjects[w[1]].exit)
        .map(|w| subjects[w[0]].exit)
}

fn jitter_ties(subjects: &mut [Subject], seed: u64) {
    let (lo, hi) = subjects
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
            (lo.min(s.exit), hi.max(s.exit))
        });
    let range = if hi > lo { hi - lo } else { hi };
    let noise = Normal::new(0.0, JITTER_SCALE * range).expect("positive jitter sd");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // A second pass only triggers if the noise itself produced a tie.
    for _ in 0..64 {
        let order = sorted_exit_order(subjects);
        let mut any = false;
        let mut i = 0;
        while i < order.len() {
            let mut j = i + 1;
            while j < order.len() && subjects[order[j]].exit == subjects[order[i]].exit {
                j += 1;
            }
            if j - i > 1 {
                any = true;
                for &k in &order[i..j] {
                    let s = &mut subjects[k];
                    let base = s.exit;
                    loop {
                        let candidate = base + noise.sample(&mut rng);
                        if candidate > s.entry {
                            s.exit = candidate;
                            break;
                        }
                    }
                }
            }
            i = j;
        }
        if !any {
            return;
        }
    }
    unreachable!("jitter failed to separate tied exit times");
}

/// Number at risk `Y(t) = #{entry < t <= exit}`.
///
/// Stored as the right-continuous process `R(t) = #{entry <= t} - #{exit <= t}`,
/// whose left limit is `Y(t)`; `at(t)` reads that left limit so that
/// `Y(u)` at an event time `u` still counts the subject leaving at `u`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskSet {
    process: StepFunction,
}

impl RiskSet {
    pub fn at(&self, t: f64) -> f64 {
        self.process.value_left(t)
    }

    pub fn as_step(&self) -> &StepFunction {
        &self.process
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountingProcesses {
    pub at_risk: RiskSet,
    pub cause1: StepFunction,
    pub cause2: StepFunction,
}

pub fn risk_and_counting(sample: &Sample) -> CountingProcesses {
    let mut changes: Vec<(f64, f64)> = Vec::with_capacity(2 * sample.len());
    for s in sample.subjects() {
        changes.push((s.entry, 1.0));
        changes.push((s.exit, -1.0));
    }
    changes.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut level = 0.0;
    for (t, d) in changes {
        level += d;
        if times.last() == Some(&t) {
            *values.last_mut().unwrap() = level;
        } else {
            times.push(t);
            values.push(level);
        }
    }
    let at_risk = RiskSet {
        process: StepFunction::from_sorted(0.0, times, values),
    };

    let counting = |cause: Cause| {
        let mut exits: Vec<f64> = sample
            .subjects()
            .iter()
            .filter(|s| s.status.cause() == Some(cause))
            .map(|s| s.exit)
            .collect();
        exits.sort_by(f64::total_cmp);
        let mut times: Vec<f64> = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        for (k, t) in exits.into_iter().enumerate() {
            if times.last() == Some(&t) {
                *values.last_mut().unwrap() = (k + 1) as f64;
            } else {
                times.push(t);
                values.push((k + 1) as f64);
            }
        }
        StepFunction::from_sorted(0.0, times, values)
    };

    CountingProcesses {
        at_risk,
        cause1: counting(Cause::One),
        cause2: counting(Cause::Two),
    }
}

/// Estimates attached to one observed event, evaluated at its time `u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EventPoint {
    pub time: f64,
    pub cause: Cause,
    /// `Y(u)`.
    pub at_risk: f64,
    /// `S(u-)`.
    pub surv_before: f64,
    /// `S(u)`.
    pub surv: f64,
    /// `F1(u)`.
    pub cif1: f64,
    /// `F2(u)`.
    pub cif2: f64,
}

/// Kaplan-Meier and Aalen-Johansen estimates of one sample, kept at the
/// event times in increasing order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompetingRisksFit {
    n: usize,
    events: Vec<EventPoint>,
}

impl CompetingRisksFit {
    pub fn new(sample: &Sample) -> Self {
        let subjects = sample.subjects();
        let mut entries: Vec<f64> = subjects.iter().map(|s| s.entry).collect();
        let mut exits: Vec<f64> = subjects.iter().map(|s| s.exit).collect();
        entries.sort_by(f64::total_cmp);
        exits.sort_by(f64::total_cmp);
        let at_risk = |t: f64| {
            (entries.partition_point(|&e| e < t) - exits.partition_point(|&x| x < t)) as f64
        };

        let mut ev: Vec<(f64, Cause)> = subjects
            .iter()
            .filter_map(|s| s.status.cause().map(|c| (s.exit, c)))
            .collect();
        ev.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut events = Vec::with_capacity(ev.len());
        let (mut surv, mut cif1, mut cif2) = (1.0_f64, 0.0_f64, 0.0_f64);
        let mut i = 0;
        while i < ev.len() {
            let t = ev[i].0;
            let mut j = i;
            let (mut d1, mut d2) = (0usize, 0usize);
            while j < ev.len() && ev[j].0 == t {
                match ev[j].1 {
                    Cause::One => d1 += 1,
                    Cause::Two => d2 += 1,
                }
                j += 1;
            }
            let y = at_risk(t);
            let before = surv;
            if y > 0.0 {
                cif1 += before * d1 as f64 / y;
                cif2 += before * d2 as f64 / y;
                surv = before * (1.0 - (d1 + d2) as f64 / y);
            }
            for &(time, cause) in &ev[i..j] {
                events.push(EventPoint {
                    time,
                    cause,
                    at_risk: y,
                    surv_before: before,
                    surv,
                    cif1,
                    cif2,
                });
            }
            i = j;
        }
        Self {
            n: sample.len(),
            events,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn events(&self) -> &[EventPoint] {
        &self.events
    }

    fn last_event_at(&self, t: f64) -> Option<&EventPoint> {
        let k = self.events.partition_point(|e| e.time <= t);
        k.checked_sub(1).map(|k| &self.events[k])
    }

    pub fn surv_at(&self, t: f64) -> f64 {
        self.last_event_at(t).map_or(1.0, |e| e.surv)
    }

    pub fn cif1_at(&self, t: f64) -> f64 {
        self.last_event_at(t).map_or(0.0, |e| e.cif1)
    }

    pub fn cif2_at(&self, t: f64) -> f64 {
        self.last_event_at(t).map_or(0.0, |e| e.cif2)
    }

    pub fn cif_at(&self, cause: Cause, t: f64) -> f64 {
        match cause {
            Cause::One => self.cif1_at(t),
            Cause::Two => self.cif2_at(t),
        }
    }

    fn step(&self, initial: f64, value: impl Fn(&EventPoint) -> f64) -> StepFunction {
        let mut times: Vec<f64> = Vec::with_capacity(self.events.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.events.len());
        for e in &self.events {
            if times.last() == Some(&e.time) {
                *values.last_mut().unwrap() = value(e);
            } else {
                times.push(e.time);
                values.push(value(e));
            }
        }
        StepFunction::from_sorted(initial, times, values)
    }

    pub fn kaplan_meier(&self) -> StepFunction {
        self.step(1.0, |e| e.surv)
    }

    pub fn cif(&self, cause: Cause) -> StepFunction {
        match cause {
            Cause::One => self.step(0.0, |e| e.cif1),
            Cause::Two => self.step(0.0, |e| e.cif2),
        }
    }
}

pub fn kaplan_meier(sample: &Sample) -> StepFunction {
    CompetingRisksFit::new(sample).kaplan_meier()
}

pub fn aalen_johansen(sample: &Sample, cause: Cause) -> StepFunction {
    CompetingRisksFit::new(sample).cif(cause)
}

/// Union of the interval endpoints and every event time of either sample
/// inside the interval.
///
/// With `check_risk_set`, each sample must have someone at risk at the
/// right endpoint.
pub fn event_grid(
    first: &Sample,
    second: &Sample,
    interval: Interval,
    check_risk_set: bool,
) -> Result<Grid> {
    if check_risk_set {
        for s in [first, second] {
            if s.at_risk(interval.end()) == 0 {
                return Err(Error::EmptyRiskSet {
                    label: s.label().to_string(),
                    time: interval.end(),
                });
            }
        }
    }
    Ok(Grid::from_points(
        interval,
        first.event_times().chain(second.event_times()),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use Status::*;

    fn sample(subjects: &[(f64, f64, Status)]) -> Sample {
        let raw = subjects
            .iter()
            .map(|&(a, b, s)| Subject::new(a, b, s))
            .collect();
        Sample::new("s", raw, TiePolicy::Reject).unwrap()
    }

    #[test]
    fn validation_errors() {
        assert_eq!(
            validate_sample(vec![], TiePolicy::Reject).unwrap_err(),
            Error::EmptySample
        );
        let err = validate_sample(vec![Subject::new(1.0, 1.0, Cause1)], TiePolicy::Reject);
        assert!(matches!(err, Err(Error::NonPositiveDuration { index: 0, .. })));
        let err = validate_sample(vec![Subject::new(0.0, f64::NAN, Cause1)], TiePolicy::Reject);
        assert!(matches!(err, Err(Error::InvalidTime { index: 0 })));
    }

    #[test]
    fn reject_policy() {
        let ok = vec![Subject::at(1.0, Cause1), Subject::at(2.0, Censored)];
        let s = validate_sample(ok.clone(), TiePolicy::Reject).unwrap();
        assert_eq!(s.subjects(), ok.as_slice());

        let tied = vec![Subject::at(1.0, Cause1), Subject::at(1.0, Cause2)];
        assert_eq!(
            validate_sample(tied, TiePolicy::Reject).unwrap_err(),
            Error::TiesPresent { time: 1.0 }
        );
    }

    #[test]
    fn jitter_policy_is_deterministic() {
        let tied = vec![Subject::at(1.0, Cause1), Subject::at(1.0, Cause2)];
        let a = validate_sample(tied.clone(), TiePolicy::Jitter { seed: 7 }).unwrap();
        let b = validate_sample(tied, TiePolicy::Jitter { seed: 7 }).unwrap();
        assert_eq!(a, b);
        let (x, y) = (a.subjects()[0].exit, a.subjects()[1].exit);
        assert_ne!(x, y);
        assert!((x - 1.0).abs() < 1e-4 && (y - 1.0).abs() < 1e-4);
        assert_eq!(a.subjects()[0].status, Cause1);
        assert_eq!(a.subjects()[1].status, Cause2);
    }

    #[test]
    fn jitter_leaves_untied_subjects_alone() {
        let raw = vec![
            Subject::at(3.0, Censored),
            Subject::at(1.0, Cause1),
            Subject::at(1.0, Cause2),
            Subject::at(2.0, Cause1),
        ];
        let s = validate_sample(raw, TiePolicy::Jitter { seed: 1 }).unwrap();
        assert_eq!(s.subjects()[0].exit, 3.0);
        assert_eq!(s.subjects()[3].exit, 2.0);
        assert_ne!(s.subjects()[1].exit, s.subjects()[2].exit);
    }

    #[test]
    fn counting_single_subject() {
        let c = risk_and_counting(&sample(&[(0.0, 1.0, Cause1)]));
        assert_eq!(c.at_risk.at(0.0), 0.0);
        assert_eq!(c.at_risk.at(0.5), 1.0);
        assert_eq!(c.at_risk.at(1.0), 1.0);
        assert_eq!(c.at_risk.at(1.5), 0.0);
        assert_eq!(c.cause1.value(0.99), 0.0);
        assert_eq!(c.cause1.value(1.0), 1.0);
        assert_eq!(c.cause2.value(5.0), 0.0);
    }

    #[test]
    fn counting_three_subjects() {
        let c = risk_and_counting(&sample(&[
            (0.0, 1.0, Cause1),
            (0.0, 2.0, Censored),
            (0.0, 3.0, Cause2),
        ]));
        assert_eq!(c.at_risk.at(1.0), 3.0);
        assert_eq!(c.at_risk.at(2.0), 2.0);
        assert_eq!(c.at_risk.at(3.0), 1.0);
        assert_eq!(c.cause1.value(3.0), 1.0);
        assert_eq!(c.cause2.value(3.0), 1.0);
    }

    #[test]
    fn counting_left_truncated() {
        let c = risk_and_counting(&sample(&[(1.5, 2.0, Cause1)]));
        assert_eq!(c.at_risk.at(1.0), 0.0);
        assert_eq!(c.at_risk.at(1.5), 0.0);
        assert_eq!(c.at_risk.at(2.0), 1.0);
    }

    #[test]
    fn kaplan_meier_examples() {
        let all_censored = sample(&[(0.0, 1.0, Censored), (0.0, 2.0, Censored)]);
        let km = kaplan_meier(&all_censored);
        assert_eq!(km.value(0.0), 1.0);
        assert_eq!(km.value(10.0), 1.0);

        let s = sample(&[(0.0, 1.0, Cause1), (0.0, 2.0, Censored), (0.0, 3.0, Cause2)]);
        let km = kaplan_meier(&s);
        assert!((km.value(1.0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((km.value(2.0) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(km.value(3.0), 0.0);
    }

    #[test]
    fn aalen_johansen_examples() {
        let one = sample(&[(0.0, 1.0, Cause1)]);
        let f1 = aalen_johansen(&one, Cause::One);
        assert_eq!(f1.value(0.999), 0.0);
        assert_eq!(f1.value(1.0), 1.0);

        let s = sample(&[(0.0, 1.0, Cause1), (0.0, 2.0, Censored), (0.0, 3.0, Cause2)]);
        assert!((aalen_johansen(&s, Cause::One).value(3.0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((aalen_johansen(&s, Cause::Two).value(3.0) - 2.0 / 3.0).abs() < 1e-15);

        let no_cause1 = sample(&[(0.0, 1.0, Cause2), (0.0, 2.0, Censored)]);
        let f1 = aalen_johansen(&no_cause1, Cause::One);
        assert!(f1.values().iter().all(|&v| v == 0.0));
        assert_eq!(f1.initial(), 0.0);
    }

    #[test]
    fn grid_examples() {
        let a = sample(&[(0.0, 0.5, Cause1), (0.0, 1.2, Cause2), (0.0, 3.0, Censored)]);
        let b = sample(&[(0.0, 0.8, Cause1), (0.0, 2.5, Censored)]);
        let iv = Interval::new(0.0, 2.0).unwrap();
        let g = event_grid(&a, &b, iv, true).unwrap();
        assert_eq!(g.points(), &[0.0, 0.5, 0.8, 1.2, 2.0]);

        let quiet = sample(&[(0.0, 5.0, Censored)]);
        let g = event_grid(&quiet, &quiet, iv, true).unwrap();
        assert_eq!(g.points(), &[0.0, 2.0]);

        let c = sample(&[(0.0, 0.5, Cause1), (0.0, 3.0, Censored)]);
        let g = event_grid(&c, &c, iv, true).unwrap();
        assert_eq!(g.points(), &[0.0, 0.5, 2.0]);
    }

    #[test]
    fn grid_risk_set_check() {
        let short = sample(&[(0.0, 0.5, Cause1)]);
        let long = sample(&[(0.0, 3.0, Censored)]);
        let iv = Interval::new(0.0, 2.0).unwrap();
        assert!(matches!(
            event_grid(&short, &long, iv, true),
            Err(Error::EmptyRiskSet { .. })
        ));
        assert!(event_grid(&short, &long, iv, false).is_ok());
    }
}

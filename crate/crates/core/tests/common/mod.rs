#![allow(dead_code)]

use cifeq_core::survival::{Sample, Status, Subject, TiePolicy};
use rand::Rng;

/// Exponential event times with random causes, optional uniform censoring
/// and optional delayed entry.
pub fn random_sample<R: Rng>(rng: &mut R, n: usize, censor: bool, truncate: bool, label: &str) -> Sample {
    let mut subjects = Vec::with_capacity(n);
    while subjects.len() < n {
        let t = -(1.0 - rng.random::<f64>()).ln();
        let c = if censor { rng.random::<f64>() * 3.0 } else { f64::INFINITY };
        let entry = if truncate && rng.random::<f64>() < 0.5 {
            rng.random::<f64>() * 0.8
        } else {
            0.0
        };
        let exit = t.min(c);
        if entry >= exit {
            continue;
        }
        let status = if t <= c {
            if rng.random::<f64>() < 0.55 {
                Status::Cause1
            } else {
                Status::Cause2
            }
        } else {
            Status::Censored
        };
        subjects.push(Subject::new(entry, exit, status));
    }
    Sample::new(label, subjects, TiePolicy::Jitter { seed: 0 }).unwrap()
}

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Test procedures for equality of the cause-1 CIFs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Wild bootstrap Kolmogorov-Smirnov.
    Ks,
    /// Wild bootstrap Cramér-von Mises.
    Cvm,
    /// Box approximation of the Cramér-von Mises null law.
    Box,
    /// Pearson approximation of the studentized Cramér-von Mises statistic.
    Pearson,
    /// Wild bootstrap one-sided Pepe-type integral.
    Pepe,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Ks,
        Method::Cvm,
        Method::Box,
        Method::Pearson,
        Method::Pepe,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Ks => "ks",
            Method::Cvm => "cvm",
            Method::Box => "box",
            Method::Pearson => "pearson",
            Method::Pepe => "pepe",
        }
    }

    pub fn is_bootstrap(self) -> bool {
        matches!(self, Method::Ks | Method::Cvm | Method::Pepe)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown method `{s}` (expected ks, cvm, box, pearson or pepe)"))
    }
}

/// Outcome of one level-alpha test. `reject` holds iff `statistic > critical`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestResult {
    pub method: Method,
    pub statistic: f64,
    pub critical: f64,
    pub p_value: f64,
    pub reject: bool,
    /// Nuisance estimates (f, g, kappa, mu, sigma2, ...).
    pub extras: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl TestResult {
    pub(crate) fn decide(method: Method, statistic: f64, critical: f64, p_value: f64) -> Self {
        Self {
            method,
            statistic,
            critical,
            p_value: p_value.clamp(0.0, 1.0),
            reject: statistic > critical,
            extras: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    /// Non-rejection with p-value 1, used when the data carry no
    /// information on the cause-1 CIFs.
    pub(crate) fn not_rejected(method: Method, statistic: f64, note: impl Into<String>) -> Self {
        Self {
            method,
            statistic,
            critical: f64::INFINITY,
            p_value: 1.0,
            reject: false,
            extras: BTreeMap::new(),
            notes: vec![note.into()],
        }
    }

    pub(crate) fn with_extra(mut self, key: &str, value: f64) -> Self {
        self.extras.insert(key.to_string(), value);
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert_eq!(" CvM ".parse::<Method>().unwrap(), Method::Cvm);
        assert!("gray".parse::<Method>().is_err());
    }

    #[test]
    fn decision_is_strict() {
        let r = TestResult::decide(Method::Ks, 1.0, 1.0, 0.05);
        assert!(!r.reject);
        let r = TestResult::decide(Method::Ks, 1.0 + 1e-12, 1.0, 0.04);
        assert!(r.reject);
    }
}

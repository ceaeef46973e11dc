//! Box (scaled chi-square) and Pearson (studentized chi-square) tests for
//! the Cramér-von Mises statistic, and the chi-square quantile they need.

use statrs::function::gamma::{checked_gamma_lr, checked_gamma_ur, ln_gamma};

use crate::error::{invalid, Error, Result};
use crate::outcome::{Method, TestResult};
use crate::statistics::DEGENERACY_EPS;

fn check_df(df: f64) -> Result<()> {
    if !(df.is_finite() && df > 0.0) {
        return Err(Error::Domain(format!("degrees of freedom must be positive, got {df}")));
    }
    Ok(())
}

pub fn chi2_cdf(df: f64, x: f64) -> Result<f64> {
    check_df(df)?;
    if x <= 0.0 {
        return Ok(0.0);
    }
    if x == f64::INFINITY {
        return Ok(1.0);
    }
    checked_gamma_lr(0.5 * df, 0.5 * x).map_err(|e| Error::Domain(e.to_string()))
}

/// Upper tail `P(chi2_df > x)`.
pub fn chi2_sf(df: f64, x: f64) -> Result<f64> {
    check_df(df)?;
    if x <= 0.0 {
        return Ok(1.0);
    }
    if x == f64::INFINITY {
        return Ok(0.0);
    }
    checked_gamma_ur(0.5 * df, 0.5 * x).map_err(|e| Error::Domain(e.to_string()))
}

fn chi2_pdf(df: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let k = 0.5 * df;
    ((k - 1.0) * x.ln() - 0.5 * x - k * std::f64::consts::LN_2 - ln_gamma(k)).exp()
}

/// Quantile of the chi-square law with real `df > 0` at level `p in (0, 1)`.
///
/// Bracketing plus safeguarded Newton iteration on the incomplete-gamma CDF.
/// Upper quantiles are solved on the survival function to avoid
/// cancellation near `p = 1`.
pub fn chi2_quantile(df: f64, p: f64) -> Result<f64> {
    check_df(df)?;
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("probability must lie in (0, 1), got {p}")));
    }
    let upper = p > 0.5;
    let q = 1.0 - p;
    // Increasing in x, zero at the quantile.
    let h = |x: f64| -> Result<f64> {
        if upper {
            Ok(q - chi2_sf(df, x)?)
        } else {
            Ok(chi2_cdf(df, x)? - p)
        }
    };

    let mut lo = 0.0_f64;
    let mut hi = df.max(1.0);
    while h(hi)? < 0.0 {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::Domain("quantile bracket overflow".into()));
        }
    }

    // Lower quantiles of small-df laws sit many decades below 1, so the
    // fallback step bisects geometrically.
    let split = |lo: f64, hi: f64| {
        if lo == 0.0 {
            hi * 1e-3
        } else if hi > 4.0 * lo {
            (lo * hi).sqrt()
        } else {
            0.5 * (lo + hi)
        }
    };
    let mut x = df.clamp(lo, hi);
    if !(x > lo && x < hi) {
        x = split(lo, hi);
    }
    for _ in 0..2000 {
        let hx = h(x)?;
        if hx.abs() <= 1e-15 {
            return Ok(x);
        }
        if hx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            return Ok(0.5 * (lo + hi));
        }
        let slope = chi2_pdf(df, x);
        let newton = x - hx / slope;
        x = if slope > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            split(lo, hi)
        };
    }
    Ok(x)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid("alpha", format!("must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// `g chi2_f` matching mean `mu` and variance `sigma2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxParams {
    pub f: f64,
    pub g: f64,
}

impl BoxParams {
    pub fn from_moments(mu: f64, sigma2: f64) -> Self {
        Self {
            f: 2.0 * mu * mu / sigma2,
            g: sigma2 / (2.0 * mu),
        }
    }
}

/// Degrees of freedom of the studentized chi-square matching skewness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PearsonParams {
    pub kappa: f64,
}

impl PearsonParams {
    pub fn from_moments(sigma2: f64, gamma: f64) -> Self {
        Self {
            kappa: sigma2.powi(3) / (8.0 * gamma * gamma),
        }
    }
}

const P_VALUE_NOTE: &str = "p-value is the fitted chi-square tail probability";

pub fn box_test(t_cvm: f64, mu: f64, sigma2: f64, alpha: f64) -> Result<TestResult> {
    check_alpha(alpha)?;
    if !(mu > DEGENERACY_EPS && sigma2 > DEGENERACY_EPS) {
        return Ok(
            TestResult::not_rejected(Method::Box, t_cvm, "degenerate moment estimates")
                .with_extra("mu", mu)
                .with_extra("sigma2", sigma2),
        );
    }
    let BoxParams { f, g } = BoxParams::from_moments(mu, sigma2);
    let critical = g * chi2_quantile(f, 1.0 - alpha)?;
    let p_value = chi2_sf(f, t_cvm / g)?;
    let mut r = TestResult::decide(Method::Box, t_cvm, critical, p_value)
        .with_extra("f", f)
        .with_extra("g", g)
        .with_extra("mu", mu)
        .with_extra("sigma2", sigma2);
    r.notes.push(P_VALUE_NOTE.into());
    Ok(r)
}

/// Pearson test on `T_stud = (T - mu) / sigma` against the standardized
/// `chi2_kappa`. Falls back to the Box test when `gamma <= 0`.
pub fn pearson_test(
    t_cvm: f64,
    mu: f64,
    sigma2: f64,
    gamma: f64,
    alpha: f64,
) -> Result<TestResult> {
    check_alpha(alpha)?;
    if !(mu > DEGENERACY_EPS && sigma2 > DEGENERACY_EPS) {
        return Ok(
            TestResult::not_rejected(Method::Pearson, t_cvm, "degenerate moment estimates")
                .with_extra("mu", mu)
                .with_extra("sigma2", sigma2)
                .with_extra("gamma", gamma),
        );
    }
    if !(gamma > 0.0) {
        let mut r = box_test(t_cvm, mu, sigma2, alpha)?;
        r.method = Method::Pearson;
        r.extras.insert("gamma".into(), gamma);
        r.extras.insert("box_fallback".into(), 1.0);
        r.notes
            .push("non-positive third-moment estimate: Box approximation used".into());
        return Ok(r);
    }
    let PearsonParams { kappa } = PearsonParams::from_moments(sigma2, gamma);
    let spread = (2.0 * kappa).sqrt();
    let t_stud = (t_cvm - mu) / sigma2.sqrt();
    let critical = (chi2_quantile(kappa, 1.0 - alpha)? - kappa) / spread;
    let p_value = chi2_sf(kappa, (kappa + t_stud * spread).max(0.0))?;
    let mut r = TestResult::decide(Method::Pearson, t_stud, critical, p_value)
        .with_extra("kappa", kappa)
        .with_extra("mu", mu)
        .with_extra("sigma2", sigma2)
        .with_extra("gamma", gamma)
        .with_extra("t_cvm", t_cvm);
    r.notes.push(P_VALUE_NOTE.into());
    Ok(r)
}

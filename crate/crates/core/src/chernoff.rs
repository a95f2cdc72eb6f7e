//! Chernoff exponents for SPADE and direct imaging.
//!
//! `q_s = sum_k p0(k)^s p1(k)^(1-s)` is log-convex in `s`, so a coarse grid
//! followed by golden-section search finds the global minimum. Internally the
//! minimization runs on `q_s - 1` written as
//! `sum_k p0(k) expm1((1 - s) ln(p1(k) / p0(k)))`, which keeps full relative
//! precision when both distributions are close and `xi` is tiny.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::minimize::minimize_unit_interval;
use crate::optics::direct_imaging_intensity;
use crate::quadrature::{integrate_disk, QuadratureOptions};

/// Number of grid points scanned before golden-section refinement.
pub const COARSE_GRID: usize = 64;

/// Radius, in PSF widths, of the disk used for direct-imaging integrals.
pub const DIRECT_IMAGING_RADIUS: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ChernoffMethod {
    ExactMinimization,
    AsymptoticSmallX,
    AsymptoticLargeX,
    QuantumBound,
    DirectImagingExact,
    DirectImagingAsymptotic,
}

/// A Chernoff exponent with the minimizing `s`.
///
/// `s_min` is `None` for the quantum bound, which is a closed-form value
/// without an associated classical minimization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChernoffResult {
    pub xi: f64,
    pub s_min: Option<f64>,
    pub method: ChernoffMethod,
    pub tolerance: f64,
}

fn check_pair(p0: &[f64], p1: &[f64]) -> Result<()> {
    if p0.len() != p1.len() {
        return Err(Error::Domain(format!(
            "distributions have different supports ({} vs {} outcomes)",
            p0.len(),
            p1.len()
        )));
    }
    if p0.iter().chain(p1).any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::Domain("probabilities must lie in [0, 1]".into()));
    }
    Ok(())
}

fn check_s(s: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::Domain(format!("s = {s} outside [0, 1]")));
    }
    Ok(())
}

/// `sum_k p0(k)^s p1(k)^(1-s)`. Outcomes where either probability vanishes
/// contribute nothing, including at the endpoints `s = 0` and `s = 1`.
pub fn q_s(p0: &[f64], p1: &[f64], s: f64) -> Result<f64> {
    check_pair(p0, p1)?;
    check_s(s)?;
    Ok(p0
        .iter()
        .zip(p1)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| a.powf(s) * b.powf(1.0 - s))
        .sum())
}

/// `q_s - sum_k p0(k)`, accurate when `q_s` is close to one.
fn q_s_deficit(p0: &[f64], p1: &[f64], s: f64) -> f64 {
    let mut acc = 0.0;
    for (&a, &b) in p0.iter().zip(p1) {
        if a > 0.0 {
            if b > 0.0 {
                acc += a * ((1.0 - s) * (b / a).ln()).exp_m1();
            } else {
                acc -= a;
            }
        }
    }
    acc
}

/// Chernoff exponent `-ln min_s q_s` between two outcome distributions,
/// with `s` located to within `tol`.
pub fn chernoff_exponent(p0: &[f64], p1: &[f64], tol: f64) -> Result<ChernoffResult> {
    check_pair(p0, p1)?;
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance {tol} must be positive")));
    }
    let min = minimize_unit_interval(|s| q_s_deficit(p0, p1, s), COARSE_GRID, tol);
    let xi = if min.value <= -1.0 {
        f64::INFINITY
    } else {
        (-min.value.ln_1p()).max(0.0)
    };
    Ok(ChernoffResult {
        xi,
        s_min: Some(min.arg),
        method: ChernoffMethod::ExactMinimization,
        tolerance: tol,
    })
}

/// Which leading-order expansion of the SPADE exponent to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsymptoticBranch {
    /// `x << eps`: `x^4 / (8 p0)` with `s_min = 1/2`.
    XMuchLess,
    /// `x >> eps`, the commonly quoted form `{1 - [ln ln q - 1] / ln q} x^2`.
    XMuchGreater,
    /// `x >> eps`, re-derived from the stationary point of the expanded
    /// `q_s = 1 + (s - 1 + q^-s) x^2`: `{1 - [ln ln q + 1] / ln q} x^2`.
    XMuchGreaterStationary,
}

/// Two-regime series for the SPADE Chernoff exponent, `q = x^2 / p0`.
pub fn spade_chernoff_asymptotic(
    x: f64,
    p0: f64,
    branch: AsymptoticBranch,
) -> Result<ChernoffResult> {
    if !(p0 > 0.0) {
        return Err(Error::Degenerate(format!(
            "crosstalk probability p0 = {p0} must be positive"
        )));
    }
    if !(x >= 0.0) {
        return Err(Error::Domain(format!(
            "separation x = {x} must be non-negative"
        )));
    }
    match branch {
        AsymptoticBranch::XMuchLess => Ok(ChernoffResult {
            xi: x.powi(4) / (8.0 * p0),
            s_min: Some(0.5),
            method: ChernoffMethod::AsymptoticSmallX,
            tolerance: 0.0,
        }),
        AsymptoticBranch::XMuchGreater | AsymptoticBranch::XMuchGreaterStationary => {
            let ln_q = (x * x / p0).ln();
            if !(ln_q > 1.0) {
                return Err(Error::Regime(format!(
                    "ln(x^2 / p0) = {ln_q} <= 1; the large-separation series does not converge here"
                )));
            }
            let ln_ln_q = ln_q.ln();
            let offset = if branch == AsymptoticBranch::XMuchGreater {
                -1.0
            } else {
                1.0
            };
            Ok(ChernoffResult {
                xi: (1.0 - (ln_ln_q + offset) / ln_q) * x * x,
                s_min: Some(ln_ln_q / ln_q),
                method: ChernoffMethod::AsymptoticLargeX,
                tolerance: 0.0,
            })
        }
    }
}

/// Quantum Chernoff exponent `x^2`, the optimum over all measurements.
pub fn quantum_bound(x: f64) -> Result<ChernoffResult> {
    if !(x >= 0.0) {
        return Err(Error::Domain(format!(
            "separation x = {x} must be non-negative"
        )));
    }
    Ok(ChernoffResult {
        xi: x * x,
        s_min: None,
        method: ChernoffMethod::QuantumBound,
        tolerance: 0.0,
    })
}

/// `q_s - 1` for ideal direct imaging, integrated over the truncated plane.
fn direct_imaging_deficit(x: f64, s: f64, opts: QuadratureOptions) -> Result<f64> {
    let est = integrate_disk(
        |rx, ry| {
            let p0 = direct_imaging_intensity(0.0, [rx, ry]);
            let p1 = direct_imaging_intensity(x, [rx, ry]);
            if p0 == 0.0 {
                return 0.0;
            }
            p0 * ((1.0 - s) * (p1 / p0).ln()).exp_m1()
        },
        DIRECT_IMAGING_RADIUS,
        opts,
    )?;
    Ok(est.value)
}

/// Chernoff exponent of continuous, noiseless direct imaging.
///
/// Each `q_s` is a disk integral computed to absolute tolerance `quad_tol`.
pub fn direct_imaging_chernoff(x: f64, quad_tol: f64) -> Result<ChernoffResult> {
    if !(x >= 0.0) {
        return Err(Error::Domain(format!(
            "separation x = {x} must be non-negative"
        )));
    }
    if !(quad_tol > 0.0) {
        return Err(Error::Domain(format!(
            "quadrature tolerance {quad_tol} must be positive"
        )));
    }
    if x == 0.0 {
        return Ok(ChernoffResult {
            xi: 0.0,
            s_min: Some(0.5),
            method: ChernoffMethod::DirectImagingExact,
            tolerance: quad_tol,
        });
    }
    let opts = QuadratureOptions {
        abs_tol: quad_tol,
        ..QuadratureOptions::default()
    };
    let mut failure = None;
    let min = minimize_unit_interval(
        |s| match direct_imaging_deficit(x, s, opts) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        9,
        1e-5,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(ChernoffResult {
        xi: (-min.value.ln_1p()).max(0.0),
        s_min: Some(min.arg),
        method: ChernoffMethod::DirectImagingExact,
        tolerance: quad_tol,
    })
}

/// Leading-order direct-imaging exponent `x^4`, attained at `s = 1/2`.
pub fn direct_imaging_chernoff_asymptotic(x: f64) -> Result<ChernoffResult> {
    if !(x >= 0.0) {
        return Err(Error::Domain(format!(
            "separation x = {x} must be non-negative"
        )));
    }
    Ok(ChernoffResult {
        xi: x.powi(4),
        s_min: Some(0.5),
        method: ChernoffMethod::DirectImagingAsymptotic,
        tolerance: 0.0,
    })
}

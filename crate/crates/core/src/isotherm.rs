//! Analytical isotherms used as oracles for the particle model.
//!
//! * Langmuir: `C = B0 K A / (1 + K A)`.
//! * Freundlich: `C = K A^m`.
//! * Combined: Langmuir local coverage averaged over site constants drawn
//!   from the truncated power law with cut-off `K_min`,
//!
//!   ```text
//!   C = m B0 K_min^m  int_{K_min}^inf  K^(-m) A / (1 + K A) dK
//!     = m B0 x0^m     int_{x0}^inf     x^(-m) / (1 + x) dx,      x0 = K_min A.
//!   ```
//!
//! The combined isotherm follows Freundlich with
//! `K = m pi B0 K_min^m / sin((1 - m) pi)` as `A -> 0` and saturates at `B0`
//! as `A -> inf`.
//!
//! The semi-infinite integral is mapped to `t = 1 / (1 + x)` on `(0, t0]`,
//! where it becomes `int t^(m-1) (1-t)^(-m) dt`. Power substitutions at each
//! end remove the algebraic endpoint behaviour before adaptive quadrature.

use std::f64::consts::PI;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::quadrature::integrate;

const REL_TOL: f64 = 1e-11;
const MAX_INTERVALS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum IsothermModel {
    Langmuir { k_eq: f64, b0: f64 },
    Freundlich { k: f64, m: f64 },
    Combined { m: f64, k_min: f64, b0: f64 },
}

fn check_exponent(m: f64) -> Result<()> {
    if m > 0.0 && m < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "m",
            value: m,
            reason: "exponent must lie in (0, 1)",
        })
    }
}

fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be finite and > 0",
        })
    }
}

fn check_concentration(a: f64) -> Result<()> {
    if a >= 0.0 && a.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "A",
            value: a,
            reason: "concentration must be finite and >= 0",
        })
    }
}

impl IsothermModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            IsothermModel::Langmuir { k_eq, b0 } => {
                check_positive("k_eq", k_eq)?;
                check_positive("b0", b0)
            }
            IsothermModel::Freundlich { k, m } => {
                check_positive("k", k)?;
                check_exponent(m)
            }
            IsothermModel::Combined { m, k_min, b0 } => {
                check_exponent(m)?;
                check_positive("k_min", k_min)?;
                check_positive("b0", b0)
            }
        }
    }

    /// Adsorbed concentration at adsorbate concentration `a`.
    pub fn evaluate(&self, a: f64) -> Result<f64> {
        self.validate()?;
        check_concentration(a)?;
        match *self {
            IsothermModel::Langmuir { k_eq, b0 } => Ok(langmuir(a, k_eq, b0)),
            IsothermModel::Freundlich { k, m } => Ok(freundlich(a, k, m)),
            IsothermModel::Combined { m, k_min, b0 } => combined_isotherm(a, m, k_min, b0),
        }
    }
}

pub fn langmuir(a: f64, k_eq: f64, b0: f64) -> f64 {
    let ka = k_eq * a;
    b0 * ka / (1.0 + ka)
}

pub fn freundlich(a: f64, k: f64, m: f64) -> f64 {
    k * a.powf(m)
}

/// Freundlich coefficient of the combined isotherm's low-concentration limit.
pub fn freundlich_coefficient(m: f64, b0: f64, k_min: f64) -> Result<f64> {
    check_exponent(m)?;
    check_positive("b0", b0)?;
    check_positive("k_min", k_min)?;
    Ok(m * PI * b0 * k_min.powf(m) / ((1.0 - m) * PI).sin())
}

/// `int_0^inf x^(-m) / (1 + x) dx = pi / sin((1 - m) pi)`.
pub fn full_integral_closed_form(m: f64) -> f64 {
    PI / ((1.0 - m) * PI).sin()
}

/// `int_{x0}^inf x^(-m) / (1 + x) dx` by quadrature.
pub fn tail_integral(x0: f64, m: f64) -> Result<f64> {
    check_exponent(m)?;
    if !(x0 >= 0.0) || x0.is_nan() {
        return Err(Error::InvalidParameter {
            name: "x0",
            value: x0,
            reason: "lower limit must be >= 0",
        });
    }
    if x0.is_infinite() {
        return Ok(0.0);
    }
    let q = 1.0 - m;
    // t0 = 1/(1+x0); 1 - t0 = x0/(1+x0).
    let t0 = 1.0 / (1.0 + x0);
    let s0 = x0 / (1.0 + x0);

    // t in [0, min(t0, 1/2)] with u = t^m: (1/m) int (1 - u^(1/m))^(-m) du.
    let t_lo = t0.min(0.5);
    let lower = integrate(
        |u: f64| (1.0 - u.powf(1.0 / m)).powf(-m),
        0.0,
        t_lo.powf(m),
        REL_TOL,
        0.0,
        MAX_INTERVALS,
    )?
    .value
        / m;

    // t in [1/2, t0] via s = 1 - t, v = s^(1-m): (1/q) int (1 - v^(1/q))^(m-1) dv.
    let upper = if t0 > 0.5 {
        integrate(
            |v: f64| (1.0 - v.powf(1.0 / q)).powf(m - 1.0),
            s0.powf(q),
            0.5f64.powf(q),
            REL_TOL,
            0.0,
            MAX_INTERVALS,
        )?
        .value
            / q
    } else {
        0.0
    };
    Ok(lower + upper)
}

/// `int_0^{x0} x^(-m) / (1 + x) dx` by quadrature, with `w = x^(1-m)`.
pub fn head_integral(x0: f64, m: f64) -> Result<f64> {
    check_exponent(m)?;
    check_concentration(x0)?;
    let q = 1.0 - m;
    Ok(integrate(
        |w: f64| 1.0 / (1.0 + w.powf(1.0 / q)),
        0.0,
        x0.powf(q),
        REL_TOL,
        0.0,
        MAX_INTERVALS,
    )?
    .value
        / q)
}

/// Combined (truncated power-law) isotherm by quadrature.
pub fn combined_isotherm(a: f64, m: f64, k_min: f64, b0: f64) -> Result<f64> {
    check_exponent(m)?;
    check_positive("k_min", k_min)?;
    check_positive("b0", b0)?;
    check_concentration(a)?;
    if a == 0.0 {
        return Ok(0.0);
    }
    let x0 = k_min * a;
    Ok(m * b0 * x0.powf(m) * tail_integral(x0, m)?)
}

/// Relative deviation of the combined isotherm below Freundlich.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Deviation {
    /// From quadrature of the finite integral over `[0, K_min]`.
    pub quadrature: f64,
    /// Leading term of the ascending series in `K_min`.
    pub first_order: f64,
}

/// `(C_f - C_a) / C_f` at adsorbate concentration `a`.
pub fn relative_deviation(a: f64, m: f64, k_min: f64) -> Result<Deviation> {
    check_exponent(m)?;
    check_positive("A", a)?;
    if !(k_min >= 0.0 && k_min.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "k_min",
            value: k_min,
            reason: "must be finite and >= 0",
        });
    }
    let x0 = k_min * a;
    let norm = ((1.0 - m) * PI).sin() / PI;
    Ok(Deviation {
        quadrature: norm * head_integral(x0, m)?,
        first_order: deviation_series(a, m, k_min, 1),
    })
}

/// Partial sum of the ascending series of the relative deviation,
/// `sin((1-m)pi)/pi * sum_j (-1)^j x0^(j+1-m) / (j+1-m)`, `x0 = K_min A`.
pub fn deviation_series(a: f64, m: f64, k_min: f64, terms: usize) -> f64 {
    let x0 = k_min * a;
    let norm = ((1.0 - m) * PI).sin() / PI;
    let sum: f64 = (0..terms)
        .map(|j| {
            let e = j as f64 + 1.0 - m;
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sign * x0.powf(e) / e
        })
        .sum();
    norm * sum
}

/// Solve the mass balance `A + C(A) = total_adsorbate` for the equilibrium
/// adsorbate concentration, returning `(A, C)`.
pub fn equilibrium_point(model: &IsothermModel, total_adsorbate: f64) -> Result<(f64, f64)> {
    check_concentration(total_adsorbate)?;
    if total_adsorbate == 0.0 {
        return Ok((0.0, 0.0));
    }
    // A + C(A) is increasing, so bisect on [0, total].
    let (mut lo, mut hi) = (0.0, total_adsorbate);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid + model.evaluate(mid)? > total_adsorbate {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let a = 0.5 * (lo + hi);
    Ok((a, model.evaluate(a)?))
}

/// Straight-line fit of `ln C` against `ln A`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogLogFit {
    /// Natural log of the Freundlich coefficient.
    pub ln_k: f64,
    /// Slope, the Freundlich exponent.
    pub m: f64,
    /// Root-mean-square residual in log space.
    pub residual: f64,
    pub n_points: usize,
}

/// Ordinary least squares on `(ln A, ln C)`.
pub fn fit_loglog(points: &[(f64, f64)]) -> Result<LogLogFit> {
    if points
        .iter()
        .any(|&(a, c)| !(a > 0.0 && c > 0.0 && a.is_finite() && c.is_finite()))
    {
        return Err(Error::Fit("log-log fit needs finite positive A and C".into()));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(a, c)| (a.ln(), c.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if logs.len() < 2 || !(sxx > 0.0) {
        return Err(Error::Fit("log-log fit needs at least 2 distinct A values".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = logs.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    Ok(LogLogFit {
        ln_k: intercept,
        m: slope,
        residual: (ss / n).sqrt(),
        n_points: logs.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LangmuirFit {
    pub k_eq: f64,
    /// Root-mean-square residual in `C`.
    pub rms: f64,
}

/// Least-squares `K_eq` of the Langmuir isotherm at fixed `b0`.
///
/// One-parameter problem: a log-spaced scan brackets the minimum of the sum
/// of squares, then golden-section search refines it.
pub fn fit_langmuir_keq(points: &[(f64, f64)], b0: f64) -> Result<LangmuirFit> {
    check_positive("b0", b0)?;
    if points.is_empty() {
        return Err(Error::Fit("Langmuir fit needs at least one point".into()));
    }
    if points
        .iter()
        .any(|&(a, c)| !(a > 0.0 && a.is_finite() && c.is_finite()))
    {
        return Err(Error::Fit("Langmuir fit needs finite points with A > 0".into()));
    }
    let sse = |ln_k: f64| -> f64 {
        let k = ln_k.exp();
        points.iter().map(|&(a, c)| (c - langmuir(a, k, b0)).powi(2)).sum()
    };
    let (lo, hi) = (
        -20.0 * std::f64::consts::LN_10 / 2.0,
        20.0 * std::f64::consts::LN_10 / 2.0,
    );
    let n_grid = 401;
    let step = (hi - lo) / (n_grid - 1) as f64;
    let best = (0..n_grid)
        .map(|i| lo + step * i as f64)
        .min_by(|x, y| sse(*x).total_cmp(&sse(*y)))
        .unwrap();
    let (mut a, mut b) = (best - step, best + step);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let (mut f1, mut f2) = (sse(x1), sse(x2));
    while b - a > 1e-12 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = sse(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = sse(x2);
        }
    }
    let ln_k = 0.5 * (a + b);
    Ok(LangmuirFit {
        k_eq: ln_k.exp(),
        rms: (sse(ln_k) / points.len() as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn langmuir_cases() {
        assert_eq!(langmuir(0.0, 5.0, 200.0), 0.0);
        assert!((langmuir(0.2, 5.0, 200.0) - 100.0).abs() < 1e-12);
        let big = langmuir(1e9, 5.0, 200.0);
        assert!(big < 200.0 && 200.0 - big < 1e-6);
    }

    #[test]
    fn freundlich_cases() {
        assert_eq!(freundlich(1.0, 3.5, 0.4), 3.5);
        assert_eq!(freundlich(0.0, 3.5, 0.4), 0.0);
        assert!((freundlich(16.0, 2.0, 0.5) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn coefficient_hand_value() {
        let k = freundlich_coefficient(0.5, 200.0, 0.01).unwrap();
        assert!((k - 10.0 * PI).abs() < 1e-12);
        assert!(freundlich_coefficient(1.0, 200.0, 0.01).is_err());
        assert!(freundlich_coefficient(0.5, 1e-300, 0.01).unwrap() < 1e-290);
    }

    #[test]
    fn tail_integral_closed_form_for_half_exponent() {
        // m = 1/2: int_{x0}^inf x^(-1/2)/(1+x) dx = 2 atan(1/sqrt(x0)).
        for &x0 in &[0.0, 1e-8, 0.02, 0.5, 1.0, 3.0, 1e3, 1e9] {
            let got = tail_integral(x0, 0.5).unwrap();
            let want = if x0 == 0.0 { PI } else { 2.0 * (1.0 / x0.sqrt()).atan() };
            assert!((got / want - 1.0).abs() < 1e-10, "x0={x0}: {got} vs {want}");
        }
    }

    #[test]
    fn head_integral_closed_form_for_half_exponent() {
        for &x0 in &[1e-10, 0.02, 1.0, 50.0] {
            let got = head_integral(x0, 0.5).unwrap();
            let want = 2.0 * x0.sqrt().atan();
            assert!((got / want - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn combined_limits() {
        assert_eq!(combined_isotherm(0.0, 0.5, 0.1, 200.0).unwrap(), 0.0);
        let k_min = 0.1;
        let sat = combined_isotherm(1e6 / k_min, 0.5, k_min, 200.0).unwrap();
        assert!(sat < 200.0 && (200.0 - sat) / 200.0 < 1e-3);
        let k = freundlich_coefficient(0.5, 200.0, k_min).unwrap();
        let tiny = 1e-9;
        let ratio = combined_isotherm(tiny, 0.5, k_min, 200.0).unwrap() / freundlich(tiny, k, 0.5);
        assert!(ratio < 1.0 && ratio > 1.0 - 1e-3);
    }

    #[test]
    fn deviation_vanishes_with_cutoff() {
        let d = relative_deviation(1.0, 0.5, 0.0).unwrap();
        assert_eq!(d.quadrature, 0.0);
        assert_eq!(d.first_order, 0.0);
        assert!(relative_deviation(0.0, 0.5, 0.1).is_err());
    }

    #[test]
    fn series_converges_to_quadrature() {
        let (a, m, k_min) = (0.3, 0.4, 0.5);
        let q = relative_deviation(a, m, k_min).unwrap().quadrature;
        let s = deviation_series(a, m, k_min, 60);
        assert!((q - s).abs() < 1e-12);
    }

    #[test]
    fn equilibrium_point_matches_langmuir_quadratic() {
        // A + C = 201 with C = 201 * 5A / (1 + 5A).
        let model = IsothermModel::Langmuir { k_eq: 5.0, b0: 201.0 };
        let (a, c) = equilibrium_point(&model, 201.0).unwrap();
        let want = (-1.0 + (1.0f64 + 20.0 * 201.0).sqrt()) / 10.0;
        assert!((a - want).abs() < 1e-10);
        assert!((a + c - 201.0).abs() < 1e-9);
    }

    #[test]
    fn loglog_exact_data() {
        let pts: Vec<_> = [0.1, 1.0, 3.0, 20.0]
            .iter()
            .map(|&a| (a, freundlich(a, 2.0, 0.5)))
            .collect();
        let fit = fit_loglog(&pts).unwrap();
        assert!((fit.m - 0.5).abs() < 1e-12);
        assert!((fit.ln_k - 2f64.ln()).abs() < 1e-12);
        assert!(fit.residual < 1e-12);

        let two = fit_loglog(&[(1.0, 3.0), (4.0, 5.0)]).unwrap();
        assert!(two.residual < 1e-12);
    }

    #[test]
    fn loglog_rejects_degenerate_data() {
        assert!(fit_loglog(&[(1.0, 2.0)]).is_err());
        assert!(fit_loglog(&[(1.0, 2.0), (1.0, 3.0)]).is_err());
        assert!(fit_loglog(&[(1.0, 2.0), (0.0, 3.0)]).is_err());
        assert!(fit_loglog(&[(1.0, -2.0), (2.0, 3.0)]).is_err());
    }

    #[test]
    fn langmuir_fit_recovers_constant() {
        let pts: Vec<_> = [0.05, 0.3, 1.0, 5.0, 40.0]
            .iter()
            .map(|&a| (a, langmuir(a, 5.0, 200.0)))
            .collect();
        let fit = fit_langmuir_keq(&pts, 200.0).unwrap();
        assert!((fit.k_eq / 5.0 - 1.0).abs() < 1e-8);
        assert!(fit.rms < 1e-6);
    }

    #[test]
    fn model_dispatch_validates() {
        assert!(IsothermModel::Combined {
            m: 1.2,
            k_min: 1.0,
            b0: 1.0
        }
        .evaluate(1.0)
        .is_err());
        assert!(IsothermModel::Langmuir { k_eq: 5.0, b0: 200.0 }.evaluate(-1.0).is_err());
        let v = IsothermModel::Langmuir { k_eq: 5.0, b0: 200.0 }.evaluate(0.2).unwrap();
        assert!((v - 100.0).abs() < 1e-12);
    }
}

//! Kernel bandwidth and the co-location forward reaction probability.
//!
//! Each particle carries a Gaussian kernel of width `h`. Two kernels
//! convolve to a Gaussian of variance `2 h^2`, so the probability that an
//! `A`/`B` pair a distance `r` apart reacts within one step is
//!
//! ```text
//! P_f(r) = k_f m_p dt / (2 h sqrt(pi)) * exp(-r^2 / (2h)^2)
//! ```
//!
//! The bandwidth follows `h = G N^(-1/5)`. `G` is taken from the Silverman
//! rule of thumb, `G = 1.06 * sigma`, with `sigma` the sample standard
//! deviation of the particle positions.

use serde::Deserialize;

use crate::error::{Error, Result};

pub const SILVERMAN_PREFACTOR: f64 = 1.06;

#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum BandwidthRule {
    RuleOfThumb {
        #[serde(default = "default_prefactor")]
        prefactor: f64,
    },
    Fixed {
        h: f64,
    },
}

fn default_prefactor() -> f64 {
    SILVERMAN_PREFACTOR
}

impl Default for BandwidthRule {
    fn default() -> Self {
        BandwidthRule::RuleOfThumb {
            prefactor: SILVERMAN_PREFACTOR,
        }
    }
}

impl BandwidthRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            BandwidthRule::RuleOfThumb { prefactor } if !(prefactor > 0.0 && prefactor.is_finite()) => {
                Err(Error::config("bandwidth.prefactor", "must be finite and > 0"))
            }
            BandwidthRule::Fixed { h } if !(h > 0.0 && h.is_finite()) => {
                Err(Error::config("bandwidth.h", "must be finite and > 0"))
            }
            _ => Ok(()),
        }
    }
}

/// Which particles feed the bandwidth estimate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthPopulation {
    /// Mobile adsorbate only.
    #[default]
    Adsorbate,
    /// Adsorbate plus free sites.
    AdsorbateAndSites,
}

/// Kernel bandwidth for a set of positions.
///
/// `RuleOfThumb` needs at least two positions with nonzero spread.
pub fn bandwidth(positions: &[f64], rule: &BandwidthRule) -> Result<f64> {
    match *rule {
        BandwidthRule::Fixed { h } => Ok(h),
        BandwidthRule::RuleOfThumb { prefactor } => {
            let n = positions.len();
            if n < 2 {
                return Err(Error::Bandwidth(format!(
                    "rule of thumb needs at least 2 positions, got {n}"
                )));
            }
            let sigma = sample_std(positions);
            if !(sigma > 0.0) {
                return Err(Error::Bandwidth(
                    "all positions coincide (zero spread); use a fixed bandwidth".into(),
                ));
            }
            Ok(rule_of_thumb(prefactor, sigma, n))
        }
    }
}

/// `prefactor * sigma * n^(-1/5)`.
pub fn rule_of_thumb(prefactor: f64, sigma: f64, n: usize) -> f64 {
    prefactor * sigma * (n as f64).powf(-0.2)
}

fn sample_std(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (ss / (n - 1.0)).sqrt()
}

/// Parameters of the forward reaction probability for one pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelParams {
    pub h_opt: f64,
    pub k_f: f64,
    pub m_p: f64,
    pub dt: f64,
}

impl KernelParams {
    /// Unclamped probability at `r = 0`.
    pub fn peak(&self) -> f64 {
        self.k_f * self.m_p * self.dt / (2.0 * self.h_opt * std::f64::consts::PI.sqrt())
    }

    /// Whether the unclamped probability exceeds one anywhere.
    pub fn clamps(&self) -> bool {
        self.peak() > 1.0
    }
}

/// The co-location factor `exp(-r^2 / (2h)^2)`.
#[inline]
pub fn colocation_factor(r: f64, h_opt: f64) -> f64 {
    let two_h = 2.0 * h_opt;
    (-(r * r) / (two_h * two_h)).exp()
}

pub fn p_forward_unclamped(r: f64, params: &KernelParams) -> f64 {
    params.peak() * colocation_factor(r, params.h_opt)
}

/// Forward reaction probability, clamped to 1.
pub fn p_forward(r: f64, params: &KernelParams) -> f64 {
    p_forward_unclamped(r, params).min(1.0)
}

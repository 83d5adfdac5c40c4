//! Heterogeneous sorption sites.
//!
//! An exponential distribution of adsorption energies truncated below at a
//! minimum energy maps onto per-site equilibrium constants `K` following a
//! truncated power law,
//!
//! ```text
//! F(K) = 1 - (K / K_min)^(-m),   K >= K_min,
//! ```
//!
//! sampled by inversion as `K = K_min (1 - zeta)^(-1/m)`. The lower cut-off
//! `K_min` fixes the adsorbate concentration `A_c` past which the isotherm
//! departs from the Freundlich law by a relative amount `epsilon`.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};

/// How `K_min` was specified.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LawProvenance {
    Direct,
    FromDeviation { epsilon: f64, a_c: f64 },
}

/// Truncated power-law distribution of per-site equilibrium constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FreundlichSiteLaw {
    m: f64,
    k_min: f64,
    provenance: LawProvenance,
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

/// `[epsilon pi (1-m) / sin((1-m) pi)]^(1/(1-m))`, the value of `K_min A_c`.
fn deviation_bracket(epsilon: f64, m: f64) -> f64 {
    let q = 1.0 - m;
    (epsilon * PI * q / (q * PI).sin()).powf(1.0 / q)
}

/// `K_min` such that the isotherm deviates from Freundlich by `epsilon` at
/// `a_c` (first-order series estimate).
pub fn kmin_from_deviation(epsilon: f64, m: f64, a_c: f64) -> Result<f64> {
    check_exponent(m)?;
    check_positive("epsilon", epsilon)?;
    check_positive("a_c", a_c)?;
    Ok(deviation_bracket(epsilon, m) / a_c)
}

/// Critical adsorbate concentration for a relative deviation `epsilon`.
pub fn critical_concentration(epsilon: f64, m: f64, k_min: f64) -> Result<f64> {
    check_exponent(m)?;
    check_positive("epsilon", epsilon)?;
    check_positive("k_min", k_min)?;
    Ok(deviation_bracket(epsilon, m) / k_min)
}

impl FreundlichSiteLaw {
    pub fn direct(m: f64, k_min: f64) -> Result<Self> {
        check_exponent(m)?;
        check_positive("k_min", k_min)?;
        Ok(FreundlichSiteLaw {
            m,
            k_min,
            provenance: LawProvenance::Direct,
        })
    }

    pub fn from_deviation(epsilon: f64, m: f64, a_c: f64) -> Result<Self> {
        let k_min = kmin_from_deviation(epsilon, m, a_c)?;
        Ok(FreundlichSiteLaw {
            m,
            k_min,
            provenance: LawProvenance::FromDeviation { epsilon, a_c },
        })
    }

    /// Build from config-style parts: either `k_min`, or `epsilon` with `a_c`.
    pub fn from_parts(m: f64, k_min: Option<f64>, epsilon: Option<f64>, a_c: Option<f64>) -> Result<Self> {
        match (k_min, epsilon, a_c) {
            (Some(k_min), None, None) => Self::direct(m, k_min),
            (None, Some(epsilon), Some(a_c)) => Self::from_deviation(epsilon, m, a_c),
            _ => Err(Error::config(
                "sites",
                "give either `k_min`, or both `epsilon` and `a_c`",
            )),
        }
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn k_min(&self) -> f64 {
        self.k_min
    }

    pub fn provenance(&self) -> LawProvenance {
        self.provenance
    }

    pub fn cdf(&self, k: f64) -> f64 {
        if k <= self.k_min {
            0.0
        } else {
            1.0 - (k / self.k_min).powf(-self.m)
        }
    }

    pub fn pdf(&self, k: f64) -> f64 {
        if k < self.k_min {
            0.0
        } else {
            self.m / self.k_min * (k / self.k_min).powf(-1.0 - self.m)
        }
    }

    /// Critical concentration of this law for deviation `epsilon`.
    pub fn critical_concentration(&self, epsilon: f64) -> Result<f64> {
        critical_concentration(epsilon, self.m, self.k_min)
    }

    /// Draw one constant from the rng.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        // random::<f64>() is uniform on [0, 1).
        let zeta: f64 = rng.random();
        self.k_min * (1.0 - zeta).powf(-1.0 / self.m)
    }
}

/// Inverse-CDF draw `K_min (1 - zeta)^(-1/m)` for `zeta` in `[0, 1)`.
pub fn sample_khat(law: &FreundlichSiteLaw, zeta: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&zeta) {
        return Err(Error::InvalidParameter {
            name: "zeta",
            value: zeta,
            reason: "uniform draw must lie in [0, 1)",
        });
    }
    Ok(law.k_min * (1.0 - zeta).powf(-1.0 / law.m))
}

/// Forward rate constants `k_b * K` for `n_sites` independent sites.
pub fn assign_site_constants<R: Rng + ?Sized>(
    n_sites: usize,
    law: &FreundlichSiteLaw,
    k_b: f64,
    rng: &mut R,
) -> Vec<f64> {
    (0..n_sites).map(|_| k_b * law.sample(rng)).collect()
}

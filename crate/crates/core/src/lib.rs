//! Random-walk particle tracking of nonlinear adsorption.
//!
//! Mobile adsorbate particles `A` diffuse on a periodic 1-D domain and bind
//! to immobile sites `B`, forming complexes `C` (`A + B <-> C`). Binding is a
//! pairwise probabilistic rule whose interaction range is a Gaussian kernel
//! density estimator bandwidth; release is first order. Homogeneous sites
//! reproduce the Langmuir isotherm, sites with power-law distributed
//! equilibrium constants reproduce the Freundlich isotherm at low
//! concentration and saturate at high concentration.
//!
//! Module map:
//!
//! * [`particle`]: domain types, initial state, concentration accounting.
//! * [`kernel`]: bandwidth rule and forward reaction probability.
//! * [`sites`]: truncated power-law site constants and critical concentration.
//! * [`engine`]: diffusion, cell lists, forward and backward sweeps, time loop.
//! * [`isotherm`]: analytical isotherms, quadrature, log-log and Langmuir fits.
//! * [`experiment`]: config files, sweeps, CSV and plot-script output.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod engine;
pub mod error;
pub mod experiment;
pub mod isotherm;
pub mod kernel;
pub mod particle;
pub mod quadrature;
pub mod sites;

pub use engine::{run, PairSampling, Simulation, StepReport};
pub use error::{Error, Result};
pub use isotherm::IsothermModel;
pub use kernel::{BandwidthPopulation, BandwidthRule, KernelParams};
pub use particle::{ParticleState, SimConfig, SiteModel, Species, TimeSeriesRecord};
pub use sites::FreundlichSiteLaw;

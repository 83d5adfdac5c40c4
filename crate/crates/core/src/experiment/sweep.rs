use std::panic::{catch_unwind, AssertUnwindSafe};

use rayon::prelude::*;

use crate::engine::run;
use crate::error::{Error, Result};
use crate::isotherm::{fit_loglog, LogLogFit};
use crate::particle::{equilibrium_average, equilibrium_ratio, SimConfig};

/// A set of runs over initial adsorbate concentrations.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub a0_values: Vec<f64>,
    /// Replicates for each entry of `a0_values`.
    pub replicates: Vec<usize>,
    pub base: SimConfig,
    /// Number of trailing records averaged for equilibrium values.
    pub window: usize,
}

impl SweepSpec {
    /// Same replicate count for every A0.
    pub fn uniform(a0_values: Vec<f64>, replicates: usize, base: SimConfig, window: usize) -> Self {
        let replicates = vec![replicates; a0_values.len()];
        SweepSpec {
            a0_values,
            replicates,
            base,
            window,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.a0_values.is_empty() {
            return Err(Error::config("sweep.a0_values", "must not be empty"));
        }
        if self.a0_values.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            return Err(Error::config("sweep.a0_values", "must be finite and > 0"));
        }
        if self.replicates.len() != self.a0_values.len() || self.replicates.contains(&0) {
            return Err(Error::config("sweep.replicates", "must be >= 1 for every A0"));
        }
        let records = self.base.n_steps / self.base.record_every + 1;
        if self.window == 0 || self.window > records {
            return Err(Error::config(
                "sweep.window",
                format!("must be in 1..={records} for this run length"),
            ));
        }
        self.base.validate()
    }

    /// Config of replicate `replicate` at A0 index `index`.
    pub fn replicate_config(&self, index: usize, replicate: usize) -> SimConfig {
        SimConfig {
            conc_a0: self.a0_values[index],
            seed: derive_seed(self.base.seed, index as u64, replicate as u64),
            ..self.base.clone()
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of one replicate, a hash of the base seed and its position.
pub fn derive_seed(base: u64, a0_index: u64, replicate: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(base) ^ a0_index) ^ replicate)
}

/// Equilibrium averages of one run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Equilibrium {
    pub conc_a: f64,
    pub conc_c: f64,
    /// Mean of the defined `[C]/([A][B])` values in the window.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReplicateResult {
    pub a0: f64,
    pub a0_index: usize,
    pub replicate: usize,
    pub seed: u64,
    pub outcome: std::result::Result<Equilibrium, String>,
}

/// Replicate-aggregated equilibrium at one A0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub a0: f64,
    pub conc_a: f64,
    pub conc_c: f64,
    /// Sample standard deviation of `conc_c` across replicates (0 for one).
    pub std_c: f64,
    /// Successful replicates.
    pub n_rep: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    /// Sorted by A0 index, then replicate.
    pub replicates: Vec<ReplicateResult>,
}

impl SweepOutcome {
    pub fn n_failed(&self) -> usize {
        self.replicates.iter().filter(|r| r.outcome.is_err()).count()
    }
}

fn run_replicate(spec: &SweepSpec, index: usize, replicate: usize) -> ReplicateResult {
    let config = spec.replicate_config(index, replicate);
    let outcome = catch_unwind(AssertUnwindSafe(|| -> Result<Equilibrium> {
        let series = run(&config)?;
        let (conc_a, conc_c) = equilibrium_average(&series, spec.window)?;
        let ratio = equilibrium_ratio(&series, spec.window)?.map(|(r, _)| r);
        Ok(Equilibrium { conc_a, conc_c, ratio })
    }));
    let outcome = match outcome {
        Ok(Ok(eq)) => Ok(eq),
        Ok(Err(e)) => Err(e.to_string()),
        Err(panic) => Err(panic
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| panic.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "unknown panic".into())),
    };
    ReplicateResult {
        a0: config.conc_a0,
        a0_index: index,
        replicate,
        seed: config.seed,
        outcome,
    }
}

fn aggregate(a0: f64, results: &[&ReplicateResult]) -> SweepRow {
    let ok: Vec<Equilibrium> = results.iter().filter_map(|r| r.outcome.clone().ok()).collect();
    let n = ok.len();
    if n == 0 {
        return SweepRow {
            a0,
            conc_a: f64::NAN,
            conc_c: f64::NAN,
            std_c: f64::NAN,
            n_rep: 0,
        };
    }
    let nf = n as f64;
    let conc_a = ok.iter().map(|e| e.conc_a).sum::<f64>() / nf;
    let conc_c = ok.iter().map(|e| e.conc_c).sum::<f64>() / nf;
    let std_c = if n > 1 {
        (ok.iter().map(|e| (e.conc_c - conc_c).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt()
    } else {
        0.0
    };
    SweepRow {
        a0,
        conc_a,
        conc_c,
        std_c,
        n_rep: n,
    }
}

/// Run every replicate of `spec` on up to `workers` threads (0: all cores).
///
/// A replicate that errors or panics is reported in `replicates` and left
/// out of its row; a row with no successful replicate holds NaN.
pub fn run_sweep(spec: &SweepSpec, workers: usize) -> Result<SweepOutcome> {
    spec.validate()?;
    let jobs: Vec<(usize, usize)> = spec
        .replicates
        .iter()
        .enumerate()
        .flat_map(|(i, &n)| (0..n).map(move |r| (i, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::config("workers", e.to_string()))?;
    let mut replicates: Vec<ReplicateResult> =
        pool.install(|| jobs.par_iter().map(|&(i, r)| run_replicate(spec, i, r)).collect());
    replicates.sort_by_key(|r| (r.a0_index, r.replicate));

    let mut order: Vec<usize> = (0..spec.a0_values.len()).collect();
    order.sort_by(|&x, &y| spec.a0_values[x].total_cmp(&spec.a0_values[y]).then(x.cmp(&y)));
    let rows = order
        .into_iter()
        .map(|i| {
            let group: Vec<&ReplicateResult> = replicates.iter().filter(|r| r.a0_index == i).collect();
            aggregate(spec.a0_values[i], &group)
        })
        .collect();
    Ok(SweepOutcome { rows, replicates })
}

/// Log-log fit over rows with `0 < [A] <= a_c` and `[C] > 0`.
pub fn freundlich_fit(rows: &[SweepRow], a_c: f64) -> Result<LogLogFit> {
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.n_rep > 0 && r.conc_a > 0.0 && r.conc_a <= a_c && r.conc_c > 0.0)
        .map(|r| (r.conc_a, r.conc_c))
        .collect();
    fit_loglog(&points)
}

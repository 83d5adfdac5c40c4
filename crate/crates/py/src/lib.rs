//! Python bindings: `Config`, `Simulation`, sweeps and the analytic isotherms.

use std::path::Path;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sorption_core::experiment::{parse_config, run_sweep, SweepSpec};
use sorption_core::isotherm::{self, IsothermModel};
use sorption_core::kernel::{self, KernelParams};
use sorption_core::sites::{self, FreundlichSiteLaw};
use sorption_core::{BandwidthRule, Error, PairSampling, SimConfig, SiteModel, TimeSeriesRecord};

fn py_err(e: Error) -> PyErr {
    if e.is_config_error() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

/// Parameters of one run. Unset arguments keep the Langmuir benchmark values.
#[pyclass(name = "Config", module = "sorption", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: SimConfig,
}

#[pymethods]
impl PyConfig {
    /// Give `k_f` for homogeneous sites, or `m` with either `k_min` or
    /// `epsilon` and `a_c` for power-law sites. `h` fixes the bandwidth.
    #[new]
    #[pyo3(signature = (
        *, domain_length=None, diffusion=None, dt=None, n_steps=None, particle_mass=None,
        conc_a0=None, conc_b0=None, conc_c0=None, k_b=None, k_f=None, m=None, k_min=None,
        epsilon=None, a_c=None, redraw_per_encounter=false, seed=None, record_every=None,
        h=None, exhaustive=false
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        domain_length: Option<f64>,
        diffusion: Option<f64>,
        dt: Option<f64>,
        n_steps: Option<usize>,
        particle_mass: Option<f64>,
        conc_a0: Option<f64>,
        conc_b0: Option<f64>,
        conc_c0: Option<f64>,
        k_b: Option<f64>,
        k_f: Option<f64>,
        m: Option<f64>,
        k_min: Option<f64>,
        epsilon: Option<f64>,
        a_c: Option<f64>,
        redraw_per_encounter: bool,
        seed: Option<u64>,
        record_every: Option<usize>,
        h: Option<f64>,
        exhaustive: bool,
    ) -> PyResult<Self> {
        let d = SimConfig::default();
        let sites = match (k_f, m) {
            (Some(_), Some(_)) => return Err(PyValueError::new_err("give `k_f` or `m`, not both")),
            (_, Some(m)) => SiteModel::Heterogeneous {
                law: FreundlichSiteLaw::from_parts(m, k_min, epsilon, a_c).map_err(py_err)?,
                redraw_per_encounter,
            },
            (Some(k_f), None) => SiteModel::Homogeneous { k_f },
            (None, None) => d.sites.clone(),
        };
        let inner = SimConfig {
            domain_length: domain_length.unwrap_or(d.domain_length),
            diffusion: diffusion.unwrap_or(d.diffusion),
            dt: dt.unwrap_or(d.dt),
            n_steps: n_steps.unwrap_or(d.n_steps),
            particle_mass: particle_mass.unwrap_or(d.particle_mass),
            conc_a0: conc_a0.unwrap_or(d.conc_a0),
            conc_b0: conc_b0.unwrap_or(d.conc_b0),
            conc_c0: conc_c0.unwrap_or(d.conc_c0),
            k_b: k_b.unwrap_or(d.k_b),
            sites,
            seed: seed.unwrap_or(d.seed),
            record_every: record_every.unwrap_or(d.record_every),
            bandwidth: h.map_or(d.bandwidth, |h| BandwidthRule::Fixed { h }),
            pair_sampling: if exhaustive {
                PairSampling::Exhaustive
            } else {
                d.pair_sampling
            },
            ..d
        };
        inner.validate().map_err(py_err)?;
        Ok(PyConfig { inner })
    }

    /// The `[simulation]` table of an experiment file's text.
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        let config = parse_config(text, Path::new("<string>")).map_err(py_err)?;
        Ok(PyConfig {
            inner: config.simulation,
        })
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn n_steps(&self) -> usize {
        self.inner.n_steps
    }

    fn __repr__(&self) -> String {
        format!("Config({:?})", self.inner)
    }
}

fn series_dict<'py>(py: Python<'py>, series: &[TimeSeriesRecord]) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("step", series.iter().map(|r| r.step).collect::<Vec<_>>())?;
    d.set_item("t", series.iter().map(|r| r.time).collect::<Vec<_>>())?;
    d.set_item("conc_A", series.iter().map(|r| r.conc_a).collect::<Vec<_>>())?;
    d.set_item("conc_B", series.iter().map(|r| r.conc_b).collect::<Vec<_>>())?;
    d.set_item("conc_C", series.iter().map(|r| r.conc_c).collect::<Vec<_>>())?;
    d.set_item("ratio", series.iter().map(|r| r.ratio).collect::<Vec<_>>())?;
    d.set_item("h_opt", series.iter().map(|r| r.h_opt).collect::<Vec<_>>())?;
    d.set_item("n_forward", series.iter().map(|r| r.n_forward).collect::<Vec<_>>())?;
    d.set_item("n_backward", series.iter().map(|r| r.n_backward).collect::<Vec<_>>())?;
    Ok(d)
}

/// A simulation that can be stepped from Python.
#[pyclass(name = "Simulation", module = "sorption", unsendable)]
struct PySimulation {
    inner: sorption_core::Simulation,
}

#[pymethods]
impl PySimulation {
    #[new]
    fn new(config: PyConfig) -> PyResult<Self> {
        Ok(PySimulation {
            inner: sorption_core::Simulation::new(config.inner).map_err(py_err)?,
        })
    }

    /// Advance one step; returns the step's record as a dict.
    fn step<'py>(&mut self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let report = self.inner.step().map_err(py_err)?;
        let r = self.inner.record(&report);
        let d = PyDict::new(py);
        d.set_item("step", r.step)?;
        d.set_item("t", r.time)?;
        d.set_item("conc_A", r.conc_a)?;
        d.set_item("conc_B", r.conc_b)?;
        d.set_item("conc_C", r.conc_c)?;
        d.set_item("ratio", r.ratio)?;
        d.set_item("h_opt", r.h_opt)?;
        d.set_item("n_forward", r.n_forward)?;
        d.set_item("n_backward", r.n_backward)?;
        d.set_item("clamped", report.clamped)?;
        Ok(d)
    }

    /// Run to `n_steps`; returns column lists keyed like the CSV header.
    fn run<'py>(&mut self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let series = self.inner.run().map_err(py_err)?;
        series_dict(py, &series)
    }

    /// `(n_A, n_B, n_C)`.
    fn counts(&self) -> (usize, usize, usize) {
        let s = self.inner.state();
        (s.n_a(), s.n_b(), s.n_c())
    }

    #[getter]
    fn time(&self) -> f64 {
        self.inner.state().time()
    }

    #[getter]
    fn step_index(&self) -> u64 {
        self.inner.state().step_index()
    }

    fn positions_a(&self) -> Vec<f64> {
        self.inner.state().positions_a().to_vec()
    }

    fn positions_b(&self) -> Vec<f64> {
        self.inner.state().positions_b()
    }

    fn positions_c(&self) -> Vec<f64> {
        self.inner.state().positions_c()
    }
}

/// Run a whole configuration; returns column lists keyed like the CSV header.
#[pyfunction]
fn run<'py>(py: Python<'py>, config: PyConfig) -> PyResult<Bound<'py, PyDict>> {
    let series = sorption_core::run(&config.inner).map_err(py_err)?;
    series_dict(py, &series)
}

/// `(A0, [A], [C], std_C, n_rep)`.
type SweepTuple = (f64, f64, f64, f64, usize);

/// Equilibrium rows over `a0_values`.
#[pyfunction]
#[pyo3(signature = (config, a0_values, replicates=1, window=100, workers=0))]
fn sweep(
    py: Python<'_>,
    config: PyConfig,
    a0_values: Vec<f64>,
    replicates: usize,
    window: usize,
    workers: usize,
) -> PyResult<Vec<SweepTuple>> {
    let spec = SweepSpec::uniform(a0_values, replicates, config.inner, window);
    let outcome = py.detach(|| run_sweep(&spec, workers)).map_err(py_err)?;
    Ok(outcome
        .rows
        .iter()
        .map(|r| (r.a0, r.conc_a, r.conc_c, r.std_c, r.n_rep))
        .collect())
}

#[pyfunction]
fn langmuir(a: f64, k_eq: f64, b0: f64) -> f64 {
    isotherm::langmuir(a, k_eq, b0)
}

#[pyfunction]
fn freundlich(a: f64, k: f64, m: f64) -> f64 {
    isotherm::freundlich(a, k, m)
}

#[pyfunction]
fn freundlich_coefficient(m: f64, b0: f64, k_min: f64) -> PyResult<f64> {
    isotherm::freundlich_coefficient(m, b0, k_min).map_err(py_err)
}

/// Isotherm of sites with power-law distributed equilibrium constants.
#[pyfunction]
fn combined_isotherm(a: f64, m: f64, k_min: f64, b0: f64) -> PyResult<f64> {
    isotherm::combined_isotherm(a, m, k_min, b0).map_err(py_err)
}

/// `(quadrature, first_order)` relative deviation from the Freundlich law.
#[pyfunction]
fn relative_deviation(a: f64, m: f64, k_min: f64) -> PyResult<(f64, f64)> {
    let d = isotherm::relative_deviation(a, m, k_min).map_err(py_err)?;
    Ok((d.quadrature, d.first_order))
}

#[pyfunction]
fn critical_concentration(epsilon: f64, m: f64, k_min: f64) -> PyResult<f64> {
    sites::critical_concentration(epsilon, m, k_min).map_err(py_err)
}

#[pyfunction]
fn kmin_from_deviation(epsilon: f64, m: f64, a_c: f64) -> PyResult<f64> {
    sites::kmin_from_deviation(epsilon, m, a_c).map_err(py_err)
}

/// Evaluate an isotherm on `a_values`; `model` is "langmuir", "freundlich" or "combined".
#[pyfunction]
#[pyo3(signature = (model, a_values, *, k_eq=None, b0=None, k=None, m=None, k_min=None))]
fn isotherm_table(
    model: &str,
    a_values: Vec<f64>,
    k_eq: Option<f64>,
    b0: Option<f64>,
    k: Option<f64>,
    m: Option<f64>,
    k_min: Option<f64>,
) -> PyResult<Vec<f64>> {
    let need = |x: Option<f64>, name: &str| x.ok_or_else(|| PyValueError::new_err(format!("{model} needs `{name}`")));
    let model = match model {
        "langmuir" => IsothermModel::Langmuir {
            k_eq: need(k_eq, "k_eq")?,
            b0: need(b0, "b0")?,
        },
        "freundlich" => IsothermModel::Freundlich {
            k: need(k, "k")?,
            m: need(m, "m")?,
        },
        "combined" => IsothermModel::Combined {
            m: need(m, "m")?,
            k_min: need(k_min, "k_min")?,
            b0: need(b0, "b0")?,
        },
        other => return Err(PyValueError::new_err(format!("unknown isotherm model `{other}`"))),
    };
    a_values
        .into_iter()
        .map(|a| model.evaluate(a).map_err(py_err))
        .collect()
}

/// `(ln K, m)` of a least-squares line through `(ln A, ln C)`.
#[pyfunction]
fn fit_loglog(a: Vec<f64>, c: Vec<f64>) -> PyResult<(f64, f64)> {
    if a.len() != c.len() {
        return Err(PyValueError::new_err("`a` and `c` differ in length"));
    }
    let points: Vec<(f64, f64)> = a.into_iter().zip(c).collect();
    let fit = isotherm::fit_loglog(&points).map_err(py_err)?;
    Ok((fit.ln_k, fit.m))
}

/// Least-squares `K_eq` of the Langmuir isotherm through `(A, C)`.
#[pyfunction]
fn fit_langmuir_keq(a: Vec<f64>, c: Vec<f64>, b0: f64) -> PyResult<f64> {
    if a.len() != c.len() {
        return Err(PyValueError::new_err("`a` and `c` differ in length"));
    }
    let points: Vec<(f64, f64)> = a.into_iter().zip(c).collect();
    Ok(isotherm::fit_langmuir_keq(&points, b0).map_err(py_err)?.k_eq)
}

/// `n` site equilibrium constants drawn from the truncated power law.
#[pyfunction]
fn sample_site_constants(m: f64, k_min: f64, n: usize, seed: u64) -> PyResult<Vec<f64>> {
    let law = FreundlichSiteLaw::direct(m, k_min).map_err(py_err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| law.sample(&mut rng)).collect())
}

/// Rule-of-thumb bandwidth of `positions`.
#[pyfunction]
fn bandwidth(positions: Vec<f64>) -> PyResult<f64> {
    kernel::bandwidth(&positions, &BandwidthRule::default()).map_err(py_err)
}

/// Forward reaction probability of a pair at distance `r`, clamped at one.
#[pyfunction]
fn forward_probability(r: f64, h_opt: f64, k_f: f64, particle_mass: f64, dt: f64) -> f64 {
    kernel::p_forward(
        r,
        &KernelParams {
            h_opt,
            k_f,
            m_p: particle_mass,
            dt,
        },
    )
}

#[pymodule]
fn sorption(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PySimulation>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(langmuir, m)?)?;
    m.add_function(wrap_pyfunction!(freundlich, m)?)?;
    m.add_function(wrap_pyfunction!(freundlich_coefficient, m)?)?;
    m.add_function(wrap_pyfunction!(combined_isotherm, m)?)?;
    m.add_function(wrap_pyfunction!(relative_deviation, m)?)?;
    m.add_function(wrap_pyfunction!(critical_concentration, m)?)?;
    m.add_function(wrap_pyfunction!(kmin_from_deviation, m)?)?;
    m.add_function(wrap_pyfunction!(isotherm_table, m)?)?;
    m.add_function(wrap_pyfunction!(fit_loglog, m)?)?;
    m.add_function(wrap_pyfunction!(fit_langmuir_keq, m)?)?;
    m.add_function(wrap_pyfunction!(sample_site_constants, m)?)?;
    m.add_function(wrap_pyfunction!(bandwidth, m)?)?;
    m.add_function(wrap_pyfunction!(forward_probability, m)?)?;
    Ok(())
}

use std::fs::File;
use std::io::Write;
use std::path::Path;

use super::sweep::{ReplicateResult, SweepRow};
use crate::error::{Error, Result};
use crate::particle::TimeSeriesRecord;

/// Float in scientific notation with 17 significant digits; `NaN` when undefined.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else {
        format!("{x:.16e}")
    }
}

fn opt(x: Option<f64>) -> String {
    format_float(x.unwrap_or(f64::NAN))
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    Ok(csv::Writer::from_writer(file))
}

fn finish(mut w: csv::Writer<File>, path: &Path) -> Result<()> {
    w.flush()
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn write_series_csv(path: &Path, series: &[TimeSeriesRecord]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "step",
        "t",
        "conc_A",
        "conc_B",
        "conc_C",
        "ratio",
        "h_opt",
        "n_forward",
        "n_backward",
    ])?;
    for r in series {
        w.write_record([
            r.step.to_string(),
            format_float(r.time),
            format_float(r.conc_a),
            format_float(r.conc_b),
            format_float(r.conc_c),
            opt(r.ratio),
            format_float(r.h_opt),
            r.n_forward.to_string(),
            r.n_backward.to_string(),
        ])?;
    }
    finish(w, path)
}

/// One row per A0. Rows without a successful replicate hold `NaN` and `n_rep = 0`.
pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["A0", "conc_A", "conc_C", "std_C", "n_rep"])?;
    for r in rows {
        w.write_record([
            format_float(r.a0),
            format_float(r.conc_a),
            format_float(r.conc_c),
            format_float(r.std_c),
            r.n_rep.to_string(),
        ])?;
    }
    finish(w, path)
}

/// Per-replicate results; `status` is `ok` or the failure message.
pub fn write_replicates_csv(path: &Path, replicates: &[ReplicateResult]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["A0", "replicate", "seed", "status", "conc_A", "conc_C", "ratio"])?;
    for r in replicates {
        let (status, a, c, ratio) = match &r.outcome {
            Ok(eq) => ("ok".to_string(), eq.conc_a, eq.conc_c, eq.ratio),
            Err(msg) => (format!("failed: {msg}"), f64::NAN, f64::NAN, None),
        };
        w.write_record([
            format_float(r.a0),
            r.replicate.to_string(),
            r.seed.to_string(),
            status,
            format_float(a),
            format_float(c),
            opt(ratio),
        ])?;
    }
    finish(w, path)
}

/// Simulated against theoretical Freundlich parameters for one exponent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FreundlichFitRow {
    pub m: f64,
    pub a_c: f64,
    pub k_min: f64,
    pub fitted_m: f64,
    pub theory_ln_k: f64,
    pub fitted_ln_k: f64,
    pub n_points: usize,
}

pub fn write_fit_csv(path: &Path, rows: &[FreundlichFitRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "m",
        "A_c",
        "K_min",
        "fitted_m",
        "ln_K_theory",
        "ln_K_fitted",
        "n_points",
    ])?;
    for r in rows {
        w.write_record([
            format_float(r.m),
            format_float(r.a_c),
            format_float(r.k_min),
            format_float(r.fitted_m),
            format_float(r.theory_ln_k),
            format_float(r.fitted_ln_k),
            r.n_points.to_string(),
        ])?;
    }
    finish(w, path)
}

pub fn write_isotherm_csv(path: &Path, points: &[(f64, f64)]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["A", "C"])?;
    for &(a, c) in points {
        w.write_record([format_float(a), format_float(c)])?;
    }
    finish(w, path)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut file = File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    file.write_all(text.as_bytes())
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

const PREAMBLE: &str = "set datafile separator ','\nset key top left\nset grid\n";

/// Gnuplot script of the concentrations in `data` against time.
pub fn write_series_plot(path: &Path, data: &Path) -> Result<()> {
    let d = file_name(data);
    let text = format!(
        "{PREAMBLE}set xlabel 't'\nset ylabel 'concentration'\n\
         plot '{d}' using 2:3 every ::1 with lines title '[A]', \\\n     \
         '{d}' using 2:4 every ::1 with lines title '[B]', \\\n     \
         '{d}' using 2:5 every ::1 with lines title '[C]'\n"
    );
    write_text(path, &text)
}

/// Gnuplot script of the sweep in `data` with the Langmuir curve overlaid.
pub fn write_langmuir_plot(path: &Path, data: &Path, k_eq: f64, b0: f64) -> Result<()> {
    let d = file_name(data);
    let text = format!(
        "{PREAMBLE}set xlabel '[A]'\nset ylabel '[C]'\nK = {}\nB0 = {}\n\
         langmuir(a) = K * B0 * a / (1 + K * a)\n\
         plot '{d}' using 2:3:4 every ::1 with yerrorbars title 'simulation', \\\n     \
         langmuir(x) with lines title 'Langmuir'\n",
        format_float(k_eq),
        format_float(b0)
    );
    write_text(path, &text)
}

/// Log-log gnuplot script of the sweep in `data` against the tabulated
/// combined isotherm in `theory` and the power law `k [A]^m`.
pub fn write_freundlich_plot(path: &Path, data: &Path, theory: &Path, k: f64, m: f64, a_c: f64) -> Result<()> {
    let d = file_name(data);
    let t = file_name(theory);
    let text = format!(
        "{PREAMBLE}set logscale xy\nset xlabel '[A]'\nset ylabel '[C]'\nK = {}\nM = {}\nAC = {}\n\
         set arrow from AC, graph 0 to AC, graph 1 nohead dashtype 2\n\
         freundlich(a) = K * a**M\n\
         plot '{d}' using 2:3 every ::1 with points pt 7 title 'simulation', \\\n     \
         '{t}' using 1:2 every ::1 with lines title 'combined isotherm', \\\n     \
         freundlich(x) with lines dashtype 3 title 'Freundlich'\n",
        format_float(k),
        format_float(m),
        format_float(a_c)
    );
    write_text(path, &text)
}

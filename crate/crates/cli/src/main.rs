use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use sorption_core::experiment::{
    freundlich_fit, load_config, run_sweep, write_fit_csv, write_freundlich_plot, write_isotherm_csv,
    write_langmuir_plot, write_replicates_csv, write_series_csv, write_series_plot, write_sweep_csv, ExperimentConfig,
    FreundlichFitRow, SweepOutcome, SweepSpec,
};
use sorption_core::isotherm::{combined_isotherm, fit_langmuir_keq, freundlich_coefficient};
use sorption_core::sites::{FreundlichSiteLaw, LawProvenance};
use sorption_core::{run, Error, SiteModel};

/// Particle-tracking simulation of Langmuir and Freundlich adsorption.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single run; writes series.csv and series.gp.
    Run(Common),
    /// Homogeneous-site sweep over A0; writes sweep.csv, replicates.csv, langmuir.gp.
    SweepLangmuir(Common),
    /// Heterogeneous-site sweep over A0; also writes fit.csv and theory.csv.
    SweepFreundlich(Common),
    /// Tabulate an analytic isotherm; writes isotherm.csv.
    Isotherm(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Overrides `simulation.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for sweeps; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Overrides `simulation.record_every`.
    #[arg(long)]
    record_every: Option<usize>,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_config_error() {
            Failure::Config(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

type CliResult = Result<(), Failure>;

fn load(common: &Common) -> Result<ExperimentConfig, Failure> {
    // An unreadable experiment file is a config error, not a runtime one.
    let mut config = load_config(&common.config).map_err(|e| match e {
        Error::Io { .. } => Failure::Config(e.to_string()),
        other => other.into(),
    })?;
    if let Some(seed) = common.seed {
        config.simulation.seed = seed;
    }
    if let Some(every) = common.record_every {
        config.simulation.record_every = every;
    }
    config.simulation.validate()?;
    std::fs::create_dir_all(&common.out)
        .map_err(|e| Failure::Runtime(format!("creating {}: {e}", common.out.display())))?;
    Ok(config)
}

fn sweep_spec(config: &ExperimentConfig) -> Result<SweepSpec, Failure> {
    let section = config
        .sweep
        .as_ref()
        .ok_or_else(|| Failure::Config("missing [sweep] section".into()))?;
    Ok(section.to_spec(&config.simulation)?)
}

fn write_sweep(out: &Path, outcome: &SweepOutcome) -> CliResult {
    write_sweep_csv(&out.join("sweep.csv"), &outcome.rows)?;
    write_replicates_csv(&out.join("replicates.csv"), &outcome.replicates)?;
    Ok(())
}

fn check_failures(outcome: &SweepOutcome) -> CliResult {
    match outcome.n_failed() {
        0 => Ok(()),
        n => Err(Failure::Runtime(format!(
            "{n} of {} replicates failed; see replicates.csv",
            outcome.replicates.len()
        ))),
    }
}

fn cmd_run(common: &Common) -> CliResult {
    let config = load(common)?;
    let series = run(&config.simulation)?;
    let csv = common.out.join("series.csv");
    write_series_csv(&csv, &series)?;
    write_series_plot(&common.out.join("series.gp"), &csv)?;
    info!("wrote {} records to {}", series.len(), csv.display());
    Ok(())
}

fn cmd_sweep_langmuir(common: &Common) -> CliResult {
    let config = load(common)?;
    let k_f = match config.simulation.sites {
        SiteModel::Homogeneous { k_f } => k_f,
        SiteModel::Heterogeneous { .. } => {
            return Err(Failure::Config(
                "sweep-langmuir needs `sites.model = \"homogeneous\"`".into(),
            ))
        }
    };
    if config.simulation.k_b <= 0.0 {
        return Err(Failure::Config("sweep-langmuir needs `k_b` > 0".into()));
    }
    let spec = sweep_spec(&config)?;
    let outcome = run_sweep(&spec, common.workers)?;
    write_sweep(&common.out, &outcome)?;
    let k_eq = k_f / config.simulation.k_b;
    let b0 = config.simulation.conc_b0;
    write_langmuir_plot(&common.out.join("langmuir.gp"), &common.out.join("sweep.csv"), k_eq, b0)?;

    let points: Vec<(f64, f64)> = outcome
        .rows
        .iter()
        .filter(|r| r.n_rep > 0 && r.conc_a > 0.0)
        .map(|r| (r.conc_a, r.conc_c))
        .collect();
    match fit_langmuir_keq(&points, b0) {
        Ok(fit) => println!("K_eq theory {k_eq:.6} fitted {:.6} (rms {:.4})", fit.k_eq, fit.rms),
        Err(e) => warn!("Langmuir fit skipped: {e}"),
    }
    check_failures(&outcome)
}

fn fit_range(law: &FreundlichSiteLaw, epsilon: f64) -> Result<f64, Failure> {
    Ok(match law.provenance() {
        LawProvenance::FromDeviation { a_c, .. } => a_c,
        LawProvenance::Direct => law.critical_concentration(epsilon)?,
    })
}

fn cmd_sweep_freundlich(common: &Common) -> CliResult {
    let config = load(common)?;
    let law = match &config.simulation.sites {
        SiteModel::Heterogeneous { law, .. } => *law,
        SiteModel::Homogeneous { .. } => {
            return Err(Failure::Config(
                "sweep-freundlich needs `sites.model = \"heterogeneous\"`".into(),
            ))
        }
    };
    let spec = sweep_spec(&config)?;
    let epsilon = config.sweep.as_ref().map_or(0.1, |s| s.fit_epsilon);
    let a_c = fit_range(&law, epsilon)?;
    let b0 = config.simulation.conc_b0;
    let k = freundlich_coefficient(law.m(), b0, law.k_min())?;

    let outcome = run_sweep(&spec, common.workers)?;
    write_sweep(&common.out, &outcome)?;

    // Theory table spans the simulated [A] with a margin either side.
    let positive: Vec<f64> = outcome.rows.iter().map(|r| r.conc_a).filter(|&a| a > 0.0).collect();
    let lo = positive.iter().copied().fold(a_c, f64::min) * 0.5;
    let hi = positive.iter().copied().fold(a_c, f64::max) * 2.0;
    let theory: Vec<(f64, f64)> = (0..200)
        .map(|i| {
            let a = (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / 199.0).exp();
            combined_isotherm(a, law.m(), law.k_min(), b0).map(|c| (a, c))
        })
        .collect::<Result<_, _>>()?;
    let theory_path = common.out.join("theory.csv");
    write_isotherm_csv(&theory_path, &theory)?;
    write_freundlich_plot(
        &common.out.join("freundlich.gp"),
        &common.out.join("sweep.csv"),
        &theory_path,
        k,
        law.m(),
        a_c,
    )?;

    let fit = freundlich_fit(&outcome.rows, a_c);
    let row = FreundlichFitRow {
        m: law.m(),
        a_c,
        k_min: law.k_min(),
        fitted_m: fit.as_ref().map_or(f64::NAN, |f| f.m),
        theory_ln_k: k.ln(),
        fitted_ln_k: fit.as_ref().map_or(f64::NAN, |f| f.ln_k),
        n_points: fit.as_ref().map_or(0, |f| f.n_points),
    };
    write_fit_csv(&common.out.join("fit.csv"), &[row])?;
    match fit {
        Ok(f) => println!(
            "m theory {:.4} fitted {:.4}; ln K theory {:.4} fitted {:.4}; {} points with A <= {:.4}",
            law.m(),
            f.m,
            k.ln(),
            f.ln_k,
            f.n_points,
            a_c
        ),
        Err(e) => warn!("Freundlich fit skipped: {e}"),
    }
    check_failures(&outcome)
}

fn cmd_isotherm(common: &Common) -> CliResult {
    let config = load(common)?;
    let section = config
        .isotherm
        .as_ref()
        .ok_or_else(|| Failure::Config("missing [isotherm] section".into()))?;
    let points: Vec<(f64, f64)> = section
        .grid()?
        .into_iter()
        .map(|a| section.model.evaluate(a).map(|c| (a, c)))
        .collect::<Result<_, _>>()?;
    write_isotherm_csv(&common.out.join("isotherm.csv"), &points)?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(c) => cmd_run(c),
        Command::SweepLangmuir(c) => cmd_sweep_langmuir(c),
        Command::SweepFreundlich(c) => cmd_sweep_freundlich(c),
        Command::Isotherm(c) => cmd_isotherm(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

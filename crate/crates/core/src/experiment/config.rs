use std::path::Path;

use serde::Deserialize;

use super::sweep::SweepSpec;
use crate::error::{Error, Result};
use crate::isotherm::IsothermModel;
use crate::particle::SimConfig;

/// Contents of one experiment file.
///
/// ```toml
/// [simulation]
/// conc_a0 = 200.0
/// seed = 7
///
/// [simulation.sites]
/// model = "homogeneous"
/// k_f = 0.5
///
/// [sweep]
/// a0_range = [40.0, 250.0, 10.0]
/// window = 100
/// ```
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub simulation: SimConfig,
    pub sweep: Option<SweepSection>,
    pub isotherm: Option<IsothermSection>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Explicit initial adsorbate concentrations.
    pub a0_values: Option<Vec<f64>>,
    /// `[start, stop, step]`, inclusive of `stop`.
    pub a0_range: Option<[f64; 3]>,
    #[serde(default = "one")]
    pub replicates: usize,
    /// Replicate count per A0 value, overriding `replicates`.
    pub replicates_per_a0: Option<Vec<usize>>,
    /// A0 values at or below this get `low_a0_replicates` replicates.
    pub low_a0_cutoff: Option<f64>,
    pub low_a0_replicates: Option<usize>,
    #[serde(default = "hundred")]
    pub window: usize,
    /// Deviation that sets the Freundlich fitting range `A <= A_c`.
    #[serde(default = "tenth")]
    pub fit_epsilon: f64,
}

fn one() -> usize {
    1
}

fn hundred() -> usize {
    100
}

fn tenth() -> f64 {
    0.1
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsothermSection {
    pub model: IsothermModel,
    pub a_values: Option<Vec<f64>>,
    pub a_min: Option<f64>,
    pub a_max: Option<f64>,
    pub n_points: Option<usize>,
    #[serde(default)]
    pub log_spaced: bool,
}

impl SweepSection {
    pub fn a0_grid(&self) -> Result<Vec<f64>> {
        match (&self.a0_values, self.a0_range) {
            (Some(values), None) => Ok(values.clone()),
            (None, Some([start, stop, step])) => {
                if !(step > 0.0 && start.is_finite() && stop >= start) {
                    return Err(Error::config("sweep.a0_range", "needs start <= stop and step > 0"));
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
                Ok((0..n).map(|i| start + step * i as f64).collect())
            }
            _ => Err(Error::config("sweep", "give exactly one of `a0_values` or `a0_range`")),
        }
    }

    pub fn to_spec(&self, base: &SimConfig) -> Result<SweepSpec> {
        let a0_values = self.a0_grid()?;
        let replicates = match &self.replicates_per_a0 {
            Some(r) if r.len() != a0_values.len() => {
                return Err(Error::config(
                    "sweep.replicates_per_a0",
                    format!("has {} entries for {} A0 values", r.len(), a0_values.len()),
                ))
            }
            Some(r) => r.clone(),
            None => a0_values
                .iter()
                .map(|&a0| match (self.low_a0_cutoff, self.low_a0_replicates) {
                    (Some(cut), Some(n)) if a0 <= cut => n,
                    _ => self.replicates,
                })
                .collect(),
        };
        let spec = SweepSpec {
            a0_values,
            replicates,
            base: base.clone(),
            window: self.window,
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl IsothermSection {
    pub fn grid(&self) -> Result<Vec<f64>> {
        let grid = match (&self.a_values, self.a_min, self.a_max, self.n_points) {
            (Some(v), None, None, None) => v.clone(),
            (None, Some(lo), Some(hi), Some(n)) => {
                if n < 2 || !(hi > lo) || (self.log_spaced && !(lo > 0.0)) {
                    return Err(Error::config(
                        "isotherm",
                        "grid needs n_points >= 2, a_max > a_min, and a_min > 0 when log_spaced",
                    ));
                }
                (0..n)
                    .map(|i| {
                        let f = i as f64 / (n - 1) as f64;
                        if self.log_spaced {
                            (lo.ln() + f * (hi.ln() - lo.ln())).exp()
                        } else {
                            lo + f * (hi - lo)
                        }
                    })
                    .collect()
            }
            _ => {
                return Err(Error::config(
                    "isotherm",
                    "give either `a_values` or all of `a_min`, `a_max`, `n_points`",
                ))
            }
        };
        if grid.is_empty() || grid.iter().any(|&a| !(a >= 0.0 && a.is_finite())) {
            return Err(Error::config("isotherm.a_values", "must be non-empty, finite and >= 0"));
        }
        Ok(grid)
    }
}

/// Parse an experiment file's text. `origin` names it in diagnostics.
pub fn parse_config(text: &str, origin: &Path) -> Result<ExperimentConfig> {
    let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::ConfigParse {
        path: origin.to_path_buf(),
        message: e.to_string(),
    })?;
    config.simulation.validate()?;
    if let Some(iso) = &config.isotherm {
        iso.model.validate()?;
    }
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    parse_config(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::particle::SiteModel;

    #[test]
    fn empty_file_is_the_langmuir_benchmark() {
        let config = parse_config("", Path::new("x.toml")).unwrap();
        assert_eq!(config.simulation, SimConfig::default());
        assert!(config.sweep.is_none());
    }

    #[test]
    fn langmuir_sweep_grid_has_22_values() {
        let text = "[sweep]\na0_range = [40.0, 250.0, 10.0]\n";
        let config = parse_config(text, Path::new("x.toml")).unwrap();
        let grid = config.sweep.unwrap().a0_grid().unwrap();
        assert_eq!(grid.len(), 22);
        assert_eq!(grid[0], 40.0);
        assert_eq!(*grid.last().unwrap(), 250.0);
    }

    #[test]
    fn low_a0_replicates() {
        let text = "[sweep]\na0_values = [1.0, 5.0, 50.0]\nlow_a0_cutoff = 5.0\nlow_a0_replicates = 4\n";
        let config = parse_config(text, Path::new("x.toml")).unwrap();
        let spec = config.sweep.unwrap().to_spec(&config.simulation).unwrap();
        assert_eq!(spec.replicates, vec![4, 4, 1]);
        assert_eq!(spec.window, 100);
    }

    #[test]
    fn heterogeneous_sites_from_file() {
        let text = r#"
            [simulation]
            n_steps = 10
            [simulation.sites]
            model = "heterogeneous"
            m = 0.5
            epsilon = 0.1
            a_c = 2.0
        "#;
        let config = parse_config(text, Path::new("x.toml")).unwrap();
        assert!(matches!(config.simulation.sites, SiteModel::Heterogeneous { .. }));
    }

    #[test]
    fn diagnostics_name_line_and_field() {
        let text = "[simulation]\ndomain_length = 200.0\nbogus = 1\n";
        let err = parse_config(text, Path::new("bad.toml")).unwrap_err();
        let msg = err.to_string();
        assert!(err.is_config_error());
        assert!(
            msg.contains("bad.toml") && msg.contains("line 3") && msg.contains("bogus"),
            "{msg}"
        );

        let err = parse_config("[simulation]\ndt = -1.0\n", Path::new("x.toml")).unwrap_err();
        assert!(err.to_string().contains("`dt`"), "{err}");
    }

    #[test]
    fn isotherm_grid_forms() {
        let text = r#"
            [isotherm]
            a_min = 0.1
            a_max = 10.0
            n_points = 3
            log_spaced = true
            [isotherm.model]
            model = "langmuir"
            k_eq = 5.0
            b0 = 200.0
        "#;
        let config = parse_config(text, Path::new("x.toml")).unwrap();
        let grid = config.isotherm.unwrap().grid().unwrap();
        assert_eq!(grid.len(), 3);
        assert!((grid[1] - 1.0).abs() < 1e-12);
    }
}

//! Particle populations, run configuration and concentration accounting.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::engine::{PairSampling, SiteLayoutCache};
use crate::error::{Error, Result};
use crate::kernel::{BandwidthPopulation, BandwidthRule};
use crate::sites::{assign_site_constants, FreundlichSiteLaw};

/// The deterministic random stream every run draws from.
pub type SimRng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Species {
    /// Mobile adsorbate.
    A,
    /// Free sorption site (immobile).
    B,
    /// Adsorbed complex (immobile).
    C,
}

impl Species {
    pub fn is_mobile(self) -> bool {
        self == Species::A
    }
}

/// A view of one particle. States store particles per species, this type is
/// what [`ParticleState::particles`] hands out.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Particle {
    pub position: f64,
    pub species: Species,
    /// Forward rate constant of the site; `None` for `A`.
    pub site_kf: Option<f64>,
    pub alive: bool,
}

/// Rate constants carried by sorption sites.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(try_from = "RawSiteModel")]
pub enum SiteModel {
    /// Every site shares `k_f`.
    Homogeneous { k_f: f64 },
    /// Each site gets `k_f = k_b K` with `K` drawn from `law`.
    Heterogeneous {
        law: FreundlichSiteLaw,
        /// Redraw `K` for every candidate pair instead of once per site.
        redraw_per_encounter: bool,
    },
}

#[derive(Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
enum RawSiteModel {
    Homogeneous {
        k_f: f64,
    },
    Heterogeneous {
        m: f64,
        k_min: Option<f64>,
        epsilon: Option<f64>,
        a_c: Option<f64>,
        #[serde(default)]
        redraw_per_encounter: bool,
    },
}

impl TryFrom<RawSiteModel> for SiteModel {
    type Error = Error;

    fn try_from(raw: RawSiteModel) -> Result<Self> {
        Ok(match raw {
            RawSiteModel::Homogeneous { k_f } => SiteModel::Homogeneous { k_f },
            RawSiteModel::Heterogeneous {
                m,
                k_min,
                epsilon,
                a_c,
                redraw_per_encounter,
            } => SiteModel::Heterogeneous {
                law: FreundlichSiteLaw::from_parts(m, k_min, epsilon, a_c)?,
                redraw_per_encounter,
            },
        })
    }
}

impl Default for SiteModel {
    fn default() -> Self {
        SiteModel::Homogeneous { k_f: 0.5 }
    }
}

/// Full parameterization of one run. Defaults are the Langmuir benchmark:
/// `k_f = 0.5`, `k_b = 0.1`, `Omega = 200`, `m_p = 1`, `[A0] = [B0] = 200`,
/// `[C0] = 1`, `dt = D = 0.01`, 2000 steps.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub domain_length: f64,
    pub diffusion: f64,
    pub dt: f64,
    pub n_steps: usize,
    pub particle_mass: f64,
    pub conc_a0: f64,
    pub conc_b0: f64,
    pub conc_c0: f64,
    pub k_b: f64,
    pub sites: SiteModel,
    pub seed: u64,
    pub record_every: usize,
    pub bandwidth: BandwidthRule,
    pub bandwidth_population: BandwidthPopulation,
    pub pair_sampling: PairSampling,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            domain_length: 200.0,
            diffusion: 1e-2,
            dt: 1e-2,
            n_steps: 2000,
            particle_mass: 1.0,
            conc_a0: 200.0,
            conc_b0: 200.0,
            conc_c0: 1.0,
            k_b: 0.1,
            sites: SiteModel::default(),
            seed: 0,
            record_every: 1,
            bandwidth: BandwidthRule::default(),
            bandwidth_population: BandwidthPopulation::default(),
            pair_sampling: PairSampling::default(),
        }
    }
}

fn require(ok: bool, field: &str, reason: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(field, reason))
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        require(
            self.domain_length.is_finite() && self.domain_length > 0.0,
            "domain_length",
            "must be finite and > 0",
        )?;
        require(
            self.diffusion.is_finite() && self.diffusion >= 0.0,
            "diffusion",
            "must be finite and >= 0",
        )?;
        require(self.dt.is_finite() && self.dt > 0.0, "dt", "must be finite and > 0")?;
        require(
            self.particle_mass.is_finite() && self.particle_mass > 0.0,
            "particle_mass",
            "must be finite and > 0",
        )?;
        for (name, c) in [
            ("conc_a0", self.conc_a0),
            ("conc_b0", self.conc_b0),
            ("conc_c0", self.conc_c0),
        ] {
            require(c.is_finite() && c >= 0.0, name, "must be finite and >= 0")?;
            let n = (c * self.domain_length / self.particle_mass).round();
            require(n <= u32::MAX as f64 / 4.0, name, "implies too many particles")?;
        }
        require(
            self.k_b.is_finite() && self.k_b >= 0.0,
            "k_b",
            "must be finite and >= 0",
        )?;
        require(
            self.k_b * self.dt <= 1.0,
            "k_b",
            "backward probability k_b * dt exceeds 1; reduce dt",
        )?;
        require(self.record_every >= 1, "record_every", "must be >= 1")?;
        if let SiteModel::Homogeneous { k_f } = self.sites {
            require(k_f.is_finite() && k_f >= 0.0, "sites.k_f", "must be finite and >= 0")?;
        }
        self.bandwidth.validate()
    }

    /// Particle count for a concentration, rounded to the nearest integer.
    pub fn count_for(&self, conc: f64) -> usize {
        (conc * self.domain_length / self.particle_mass).round() as usize
    }

    /// Concentration represented by one particle.
    pub fn conc_per_particle(&self) -> f64 {
        self.particle_mass / self.domain_length
    }

    /// Forward rate constant for a newly created site.
    pub(crate) fn draw_site_kf(&self, rng: &mut SimRng, n: usize) -> Vec<f64> {
        match &self.sites {
            SiteModel::Homogeneous { k_f } => vec![*k_f; n],
            SiteModel::Heterogeneous { law, .. } => assign_site_constants(n, law, self.k_b, rng),
        }
    }
}

/// Wrap a coordinate into `[0, length)`.
#[inline]
pub fn wrap(x: f64, length: f64) -> f64 {
    let y = x.rem_euclid(length);
    // rem_euclid can round up to `length` for tiny negative inputs.
    if y >= length {
        0.0
    } else {
        y
    }
}

/// Mutable simulation state.
///
/// Sorption sites never move and keep their rate constant; a site is either
/// free (`B`) or holds a complex (`C`). Between steps every stored `A` is
/// alive; the alive masks only carry information while a step is in progress.
#[derive(Clone, Debug)]
pub struct ParticleState {
    pub(crate) domain_length: f64,
    pub(crate) a_pos: Vec<f64>,
    pub(crate) a_alive: Vec<bool>,
    pub(crate) site_pos: Vec<f64>,
    pub(crate) site_kf: Vec<f64>,
    pub(crate) occupied: Vec<bool>,
    /// Occupied sites, oldest complex first.
    pub(crate) complexes: Vec<u32>,
    pub(crate) complex_alive: Vec<bool>,
    /// Leading `complexes` entries that may desorb this step.
    pub(crate) c_eligible: usize,
    pub(crate) n_free: usize,
    pub(crate) layouts: SiteLayoutCache,
    pub(crate) time: f64,
    pub(crate) step: u64,
    pub(crate) rng: SimRng,
}

/// Build the initial state using a stream seeded from `config.seed`.
pub fn initialize_state(config: &SimConfig) -> Result<ParticleState> {
    initialize_state_with_rng(config, SimRng::seed_from_u64(config.seed))
}

/// Build the initial state, taking ownership of `rng` as the run's stream.
pub fn initialize_state_with_rng(config: &SimConfig, mut rng: SimRng) -> Result<ParticleState> {
    config.validate()?;
    let omega = config.domain_length;
    let n_a = config.count_for(config.conc_a0);
    let n_b = config.count_for(config.conc_b0);
    let n_c = config.count_for(config.conc_c0);

    let uniform =
        |rng: &mut SimRng, n: usize| -> Vec<f64> { (0..n).map(|_| wrap(rng.random::<f64>() * omega, omega)).collect() };
    let a_pos = uniform(&mut rng, n_a);
    let b_pos = uniform(&mut rng, n_b);
    let b_kf = config.draw_site_kf(&mut rng, n_b);
    let c_pos = uniform(&mut rng, n_c);
    let c_kf = config.draw_site_kf(&mut rng, n_c);
    Ok(ParticleState::assemble(omega, a_pos, b_pos, b_kf, c_pos, c_kf, rng))
}

impl ParticleState {
    fn assemble(
        domain_length: f64,
        a_pos: Vec<f64>,
        mut site_pos: Vec<f64>,
        mut site_kf: Vec<f64>,
        c_pos: Vec<f64>,
        c_kf: Vec<f64>,
        rng: SimRng,
    ) -> Self {
        let n_free = site_pos.len();
        let n_c = c_pos.len();
        site_pos.extend(c_pos);
        site_kf.extend(c_kf);
        let mut occupied = vec![false; n_free];
        occupied.resize(n_free + n_c, true);
        ParticleState {
            domain_length,
            a_alive: vec![true; a_pos.len()],
            a_pos,
            site_pos,
            site_kf,
            occupied,
            complexes: (n_free as u32..(n_free + n_c) as u32).collect(),
            complex_alive: vec![true; n_c],
            c_eligible: n_c,
            n_free,
            layouts: SiteLayoutCache::default(),
            time: 0.0,
            step: 0,
            rng,
        }
    }

    pub fn n_a(&self) -> usize {
        self.a_pos.len()
    }

    pub fn n_b(&self) -> usize {
        self.n_free
    }

    pub fn n_c(&self) -> usize {
        self.complexes.len()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    pub fn domain_length(&self) -> f64 {
        self.domain_length
    }

    pub fn positions_a(&self) -> &[f64] {
        &self.a_pos
    }

    fn free_sites(&self) -> impl Iterator<Item = usize> + '_ {
        self.occupied.iter().enumerate().filter(|(_, &o)| !o).map(|(i, _)| i)
    }

    /// Free site positions, in site order.
    pub fn positions_b(&self) -> Vec<f64> {
        self.free_sites().map(|i| self.site_pos[i]).collect()
    }

    /// Complex positions, oldest first.
    pub fn positions_c(&self) -> Vec<f64> {
        self.complexes.iter().map(|&s| self.site_pos[s as usize]).collect()
    }

    pub fn site_kf_b(&self) -> Vec<f64> {
        self.free_sites().map(|i| self.site_kf[i]).collect()
    }

    pub fn site_kf_c(&self) -> Vec<f64> {
        self.complexes.iter().map(|&s| self.site_kf[s as usize]).collect()
    }

    /// Positions of all sites, free or occupied, indexed as in candidate pairs.
    pub fn site_positions(&self) -> &[f64] {
        &self.site_pos
    }

    pub fn site_rates(&self) -> &[f64] {
        &self.site_kf
    }

    pub fn site_occupied(&self) -> &[bool] {
        &self.occupied
    }

    /// All particles, `A` first, then `B`, then `C`.
    pub fn particles(&self) -> impl Iterator<Item = Particle> + '_ {
        let a = self
            .a_pos
            .iter()
            .zip(&self.a_alive)
            .map(|(&position, &alive)| Particle {
                position,
                species: Species::A,
                site_kf: None,
                alive,
            });
        let b = self.free_sites().map(|i| Particle {
            position: self.site_pos[i],
            species: Species::B,
            site_kf: Some(self.site_kf[i]),
            alive: true,
        });
        let c = self
            .complexes
            .iter()
            .zip(&self.complex_alive)
            .map(|(&s, &alive)| Particle {
                position: self.site_pos[s as usize],
                species: Species::C,
                site_kf: Some(self.site_kf[s as usize]),
                alive,
            });
        a.chain(b).chain(c)
    }

    /// Place particles explicitly. Intended for tests and bindings that need
    /// hand-built configurations; the stream is seeded from `seed`.
    pub fn from_parts(
        domain_length: f64,
        a_pos: Vec<f64>,
        b_sites: Vec<(f64, f64)>,
        c_sites: Vec<(f64, f64)>,
        seed: u64,
    ) -> Result<Self> {
        require(
            domain_length.is_finite() && domain_length > 0.0,
            "domain_length",
            "must be finite and > 0",
        )?;
        let in_domain = |x: f64| (0.0..domain_length).contains(&x);
        require(
            a_pos
                .iter()
                .copied()
                .chain(b_sites.iter().map(|s| s.0))
                .chain(c_sites.iter().map(|s| s.0))
                .all(in_domain),
            "positions",
            "must lie in [0, domain_length)",
        )?;
        require(
            b_sites.iter().chain(&c_sites).all(|s| s.1.is_finite() && s.1 >= 0.0),
            "site_kf",
            "must be finite and >= 0",
        )?;
        require(
            b_sites.len() + c_sites.len() <= u32::MAX as usize,
            "sites",
            "too many sites",
        )?;
        let (b_pos, b_kf): (Vec<_>, Vec<_>) = b_sites.into_iter().unzip();
        let (c_pos, c_kf): (Vec<_>, Vec<_>) = c_sites.into_iter().unzip();
        Ok(ParticleState::assemble(
            domain_length,
            a_pos,
            b_pos,
            b_kf,
            c_pos,
            c_kf,
            SimRng::seed_from_u64(seed),
        ))
    }

    /// Drop adsorbate consumed and complexes released during the current step.
    pub fn compact(&mut self) {
        if self.a_alive.iter().any(|&a| !a) {
            let mut alive = self.a_alive.iter();
            self.a_pos.retain(|_| *alive.next().unwrap());
            self.a_alive.retain(|&a| a);
        }
        if self.complex_alive.iter().any(|&a| !a) {
            let mut alive = self.complex_alive.iter();
            self.complexes.retain(|_| *alive.next().unwrap());
            self.complex_alive.retain(|&a| a);
        }
        self.c_eligible = self.complexes.len();
    }
}

/// Concentrations at one recorded step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeSeriesRecord {
    pub step: u64,
    pub time: f64,
    pub conc_a: f64,
    pub conc_b: f64,
    pub conc_c: f64,
    /// `[C] / ([A][B])`, `None` when `[A][B] = 0`.
    pub ratio: Option<f64>,
    /// Bandwidth used by the step that produced this record.
    pub h_opt: f64,
    pub n_forward: u64,
    pub n_backward: u64,
}

/// Concentrations of the current state: counts times `m_p / Omega`.
pub fn concentrations(state: &ParticleState, config: &SimConfig) -> TimeSeriesRecord {
    let scale = config.conc_per_particle();
    let conc_a = state.n_a() as f64 * scale;
    let conc_b = state.n_b() as f64 * scale;
    let conc_c = state.n_c() as f64 * scale;
    let denom = conc_a * conc_b;
    TimeSeriesRecord {
        step: state.step,
        time: state.time,
        conc_a,
        conc_b,
        conc_c,
        ratio: (denom > 0.0).then(|| conc_c / denom),
        h_opt: f64::NAN,
        n_forward: 0,
        n_backward: 0,
    }
}

fn tail(series: &[TimeSeriesRecord], window: usize) -> Result<&[TimeSeriesRecord]> {
    if window == 0 || series.len() < window {
        return Err(Error::WindowTooLong {
            len: series.len(),
            window,
        });
    }
    Ok(&series[series.len() - window..])
}

/// Mean `([A], [C])` over the last `window` records.
pub fn equilibrium_average(series: &[TimeSeriesRecord], window: usize) -> Result<(f64, f64)> {
    let last = tail(series, window)?;
    let n = last.len() as f64;
    let a = last.iter().map(|r| r.conc_a).sum::<f64>() / n;
    let c = last.iter().map(|r| r.conc_c).sum::<f64>() / n;
    Ok((a, c))
}

/// Mean of the defined ratios over the last `window` records, with the number
/// of records that contributed. `None` if every ratio in the window is undefined.
pub fn equilibrium_ratio(series: &[TimeSeriesRecord], window: usize) -> Result<Option<(f64, usize)>> {
    let last = tail(series, window)?;
    let defined: Vec<f64> = last.iter().filter_map(|r| r.ratio).collect();
    if defined.is_empty() {
        return Ok(None);
    }
    Ok(Some((
        defined.iter().sum::<f64>() / defined.len() as f64,
        defined.len(),
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::PairSampling;

    fn record(a: f64, c: f64) -> TimeSeriesRecord {
        TimeSeriesRecord {
            step: 0,
            time: 0.0,
            conc_a: a,
            conc_b: 1.0,
            conc_c: c,
            ratio: None,
            h_opt: 1.0,
            n_forward: 0,
            n_backward: 0,
        }
    }

    #[test]
    fn benchmark_counts() {
        let config = SimConfig::default();
        let state = initialize_state(&config).unwrap();
        assert_eq!(state.n_a(), 40_000);
        assert_eq!(state.n_b(), 40_000);
        assert_eq!(state.n_c(), 200);
        let rec = concentrations(&state, &config);
        assert_eq!(rec.conc_a, 200.0);
        assert_eq!(rec.conc_b, 200.0);
        assert_eq!(rec.conc_c, 1.0);
    }

    #[test]
    fn empty_adsorbate() {
        let config = SimConfig {
            conc_a0: 0.0,
            ..SimConfig::default()
        };
        let state = initialize_state(&config).unwrap();
        assert_eq!(state.n_a(), 0);
        let rec = concentrations(&state, &config);
        assert_eq!(rec.conc_a, 0.0);
        assert_eq!(rec.ratio, None);
    }

    #[test]
    fn positions_in_domain_and_sites_carry_kf() {
        let config = SimConfig {
            conc_a0: 10.0,
            conc_b0: 10.0,
            conc_c0: 3.0,
            ..SimConfig::default()
        };
        let state = initialize_state(&config).unwrap();
        for p in state.particles() {
            assert!((0.0..200.0).contains(&p.position));
            assert!(p.alive);
            match p.species {
                Species::A => assert!(p.site_kf.is_none()),
                _ => assert_eq!(p.site_kf, Some(0.5)),
            }
        }
    }

    #[test]
    fn heterogeneous_sites_get_independent_constants() {
        let law = FreundlichSiteLaw::direct(0.5, 0.02).unwrap();
        let config = SimConfig {
            conc_a0: 5.0,
            conc_b0: 50.0,
            conc_c0: 5.0,
            sites: SiteModel::Heterogeneous {
                law,
                redraw_per_encounter: false,
            },
            ..SimConfig::default()
        };
        let state = initialize_state(&config).unwrap();
        let floor = config.k_b * law.k_min();
        assert!(state
            .site_kf_b()
            .iter()
            .chain(state.site_kf_c().iter())
            .all(|&k| k >= floor));
        let first = state.site_kf_b()[0];
        assert!(state.site_kf_b().iter().any(|&k| k != first));
    }

    #[test]
    fn concentration_arithmetic() {
        let config = SimConfig::default();
        let state = ParticleState::from_parts(
            200.0,
            vec![1.0; 1000],
            vec![(2.0, 0.5); 39_000],
            vec![(3.0, 0.5); 1200],
            0,
        )
        .unwrap();
        let rec = concentrations(&state, &config);
        assert_eq!((rec.conc_a, rec.conc_b, rec.conc_c), (5.0, 195.0, 6.0));
        assert!((rec.ratio.unwrap() - 6.0 / 975.0).abs() < 1e-15);
        assert!((rec.ratio.unwrap() - 6.154e-3).abs() < 1e-6);
    }

    #[test]
    fn zero_complex_gives_zero_ratio() {
        let config = SimConfig::default();
        let state = ParticleState::from_parts(200.0, vec![1.0; 10], vec![(2.0, 0.5); 10], vec![], 0).unwrap();
        let rec = concentrations(&state, &config);
        assert_eq!(rec.conc_c, 0.0);
        assert_eq!(rec.ratio, Some(0.0));
    }

    #[test]
    fn equilibrium_average_cases() {
        let constant: Vec<_> = (0..2000).map(|_| record(5.0, 1.0)).collect();
        assert_eq!(equilibrium_average(&constant, 100).unwrap(), (5.0, 1.0));

        let ramp: Vec<_> = (0..10).map(|i| record(i as f64, 2.0 * i as f64)).collect();
        assert_eq!(equilibrium_average(&ramp, 10).unwrap(), (4.5, 9.0));

        let alternating: Vec<_> = (0..1000)
            .map(|i| record(if i % 2 == 0 { 4.0 } else { 6.0 }, 0.0))
            .collect();
        assert_eq!(equilibrium_average(&alternating, 100).unwrap().0, 5.0);

        assert!(matches!(
            equilibrium_average(&ramp, 11),
            Err(Error::WindowTooLong { len: 10, window: 11 })
        ));
        assert!(equilibrium_average(&ramp, 0).is_err());
    }

    #[test]
    fn validation_rejects_bad_values() {
        let bad = [
            SimConfig {
                domain_length: 0.0,
                ..SimConfig::default()
            },
            SimConfig {
                diffusion: -1.0,
                ..SimConfig::default()
            },
            SimConfig {
                dt: f64::NAN,
                ..SimConfig::default()
            },
            SimConfig {
                conc_a0: -1.0,
                ..SimConfig::default()
            },
            SimConfig {
                particle_mass: 0.0,
                ..SimConfig::default()
            },
            SimConfig {
                k_b: 200.0,
                ..SimConfig::default()
            },
            SimConfig {
                record_every: 0,
                ..SimConfig::default()
            },
            SimConfig {
                sites: SiteModel::Homogeneous { k_f: -0.5 },
                ..SimConfig::default()
            },
            SimConfig {
                bandwidth: BandwidthRule::Fixed { h: 0.0 },
                ..SimConfig::default()
            },
        ];
        for config in &bad {
            assert!(
                matches!(initialize_state(config), Err(Error::InvalidConfig { .. })),
                "{config:?}"
            );
        }
        assert_eq!(SimConfig::default().pair_sampling, PairSampling::Thinned);
    }

    #[test]
    fn heterogeneous_requires_exponent_in_unit_interval() {
        let raw = r#"
            model = "heterogeneous"
            m = 1.5
            k_min = 0.1
        "#;
        assert!(toml::from_str::<SiteModel>(raw).is_err());
        let ok = r#"
            model = "heterogeneous"
            m = 0.5
            epsilon = 0.1
            a_c = 1.0
        "#;
        let sites: SiteModel = toml::from_str(ok).unwrap();
        match sites {
            SiteModel::Heterogeneous { law, .. } => assert!((law.k_min() - 0.024674).abs() < 1e-6),
            _ => panic!(),
        }
    }

    #[test]
    fn wrap_stays_half_open() {
        assert_eq!(wrap(200.0, 200.0), 0.0);
        assert!((wrap(200.1, 200.0) - 0.1).abs() < 1e-12);
        assert!((wrap(-0.5, 200.0) - 199.5).abs() < 1e-12);
        assert!(wrap(-1e-300, 200.0) < 200.0);
    }
}

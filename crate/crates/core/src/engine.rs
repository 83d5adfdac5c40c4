//! Time stepping: Brownian motion of `A`, cell-list pair search, forward
//! adsorption and backward desorption sweeps.
//!
//! One step runs, in order: diffuse, bandwidth, cell build, forward sweep,
//! backward sweep, compaction. The domain is periodic and pair distances use
//! the minimum-image convention.
//!
//! The forward sweep visits every candidate `(A, B)` pair once, in a seeded
//! random order, and converts the pair into a `C` when a uniform draw falls
//! below `P_f` and neither member was consumed earlier in the sweep. Only
//! pairs whose draw succeeds ("hits") can change the state, and a uniform
//! random order over all pairs restricted to the hits is a uniform random
//! order over the hits. So the sweep first collects hits, then shuffles and
//! resolves them. [`PairSampling::Exhaustive`] tests every pair with its own
//! draw. [`PairSampling::Thinned`] reaches the same hit distribution by
//! geometric skipping with a per-block upper bound on `P_f` followed by
//! rejection, which costs time proportional to the number of trials rather
//! than the number of pairs.

use std::collections::HashMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::kernel::{bandwidth, colocation_factor, rule_of_thumb, BandwidthPopulation, BandwidthRule};
use crate::particle::{
    concentrations, initialize_state, wrap, ParticleState, SimConfig, SimRng, SiteModel, TimeSeriesRecord,
};
use crate::sites::FreundlichSiteLaw;

/// How the forward sweep finds reacting pairs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairSampling {
    /// Geometric skipping over candidate pairs with rejection.
    #[default]
    Thinned,
    /// One uniform draw per candidate pair.
    Exhaustive,
}

/// What happened during one step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepReport {
    pub n_forward: u64,
    pub n_backward: u64,
    pub h_opt_used: f64,
    /// Some candidate site had an unclamped peak probability above one.
    pub clamped: bool,
}

/// Shortest periodic separation of two points in `[0, length)`.
#[inline]
pub fn min_image_distance(x: f64, y: f64, length: f64) -> f64 {
    let d = (x - y).abs();
    if d > 0.5 * length {
        length - d
    } else {
        d
    }
}

/// Move every `A` by `xi * sqrt(2 D dt)`, `xi` standard normal, then wrap.
pub fn diffuse(state: &mut ParticleState, diffusion: f64, dt: f64) {
    if diffusion == 0.0 {
        return;
    }
    let scale = (2.0 * diffusion * dt).sqrt();
    let length = state.domain_length;
    let rng = &mut state.rng;
    for x in state.a_pos.iter_mut() {
        let xi: f64 = rng.sample(StandardNormal);
        *x = wrap(*x + xi * scale, length);
    }
}

/// Bandwidth used by a step.
///
/// When the rule of thumb is undefined (fewer than two particles, or all on
/// one point) the sample deviation is replaced by that of a uniform
/// population on the domain, `Omega / sqrt(12)`.
pub fn step_bandwidth(state: &ParticleState, config: &SimConfig) -> f64 {
    let combined;
    let positions: &[f64] = match config.bandwidth_population {
        BandwidthPopulation::Adsorbate => &state.a_pos,
        BandwidthPopulation::AdsorbateAndSites => {
            combined = [state.a_pos.as_slice(), state.positions_b().as_slice()].concat();
            &combined
        }
    };
    match (bandwidth(positions, &config.bandwidth), config.bandwidth) {
        (Ok(h), _) => h,
        (Err(_), BandwidthRule::RuleOfThumb { prefactor }) => {
            let sigma = state.domain_length / 12f64.sqrt();
            rule_of_thumb(prefactor, sigma, positions.len().max(1))
        }
        (Err(_), BandwidthRule::Fixed { h }) => h,
    }
}

/// Upper limit on the number of cells, so a tiny fixed bandwidth cannot
/// allocate without bound. Cells only get wider, never narrower than `2h`.
const MAX_CELLS: usize = 1 << 20;

/// Layouts kept per state before the cache is emptied.
const MAX_LAYOUTS: usize = 64;

/// Binary exponent class of a rate constant. Constants in one class differ by
/// less than a factor of two; zero and subnormal constants share class 0.
#[inline]
fn rate_class(k_f: f64) -> usize {
    if k_f > 0.0 {
        ((k_f.to_bits() >> 52) & 0x7ff) as usize
    } else {
        0
    }
}

/// Sites in one rate class of one cell: `items[start..end]`.
#[derive(Clone, Copy, Debug)]
struct SiteGroup {
    start: u32,
    end: u32,
    max_kf: f64,
}

/// All sites of a state bucketed into `n_cells` cells, ordered by rate class
/// within each cell. Depends only on site positions and rates, which never
/// change, so it is built once per cell count.
#[derive(Debug)]
pub(crate) struct SiteLayout {
    start: Vec<u32>,
    items: Vec<u32>,
    group_start: Vec<u32>,
    groups: Vec<SiteGroup>,
}

impl SiteLayout {
    fn build(pos: &[f64], kf: &[f64], n_cells: usize, width: f64) -> Self {
        let cell_of = |x: f64| ((x / width) as usize).min(n_cells - 1);
        // Counting sort by (cell, class): class pass, then a stable cell pass.
        let mut class_start = vec![0u32; 2049];
        for &k in kf {
            class_start[rate_class(k) + 1] += 1;
        }
        for c in 0..2048 {
            class_start[c + 1] += class_start[c];
        }
        let mut by_class = vec![0u32; kf.len()];
        for (i, &k) in kf.iter().enumerate() {
            let c = rate_class(k);
            by_class[class_start[c] as usize] = i as u32;
            class_start[c] += 1;
        }
        let mut start = vec![0u32; n_cells + 1];
        for &x in pos {
            start[cell_of(x) + 1] += 1;
        }
        for c in 0..n_cells {
            start[c + 1] += start[c];
        }
        let mut fill = start.clone();
        let mut items = vec![0u32; pos.len()];
        for &i in &by_class {
            let c = cell_of(pos[i as usize]);
            items[fill[c] as usize] = i;
            fill[c] += 1;
        }

        let mut group_start = Vec::with_capacity(n_cells + 1);
        let mut groups = Vec::new();
        for c in 0..n_cells {
            group_start.push(groups.len() as u32);
            let (lo, hi) = (start[c] as usize, start[c + 1] as usize);
            let mut i = lo;
            while i < hi {
                let class = rate_class(kf[items[i] as usize]);
                let mut j = i;
                let mut max_kf = 0.0f64;
                while j < hi && rate_class(kf[items[j] as usize]) == class {
                    max_kf = max_kf.max(kf[items[j] as usize]);
                    j += 1;
                }
                if max_kf > 0.0 {
                    groups.push(SiteGroup {
                        start: i as u32,
                        end: j as u32,
                        max_kf,
                    });
                }
                i = j;
            }
        }
        group_start.push(groups.len() as u32);
        SiteLayout {
            start,
            items,
            group_start,
            groups,
        }
    }

    fn groups_in(&self, cell: usize) -> &[SiteGroup] {
        &self.groups[self.group_start[cell] as usize..self.group_start[cell + 1] as usize]
    }
}

/// Site layouts by cell count.
#[derive(Clone, Default)]
pub(crate) struct SiteLayoutCache(HashMap<usize, Arc<SiteLayout>>);

impl std::fmt::Debug for SiteLayoutCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_set().entries(self.0.keys()).finish()
    }
}

/// Partition of the domain into equal cells of width at least `2 h_opt`,
/// with the live `A` of each cell and every site of each cell in compressed rows.
#[derive(Clone, Debug)]
pub struct CellIndex {
    n_cells: usize,
    width: f64,
    a_start: Vec<u32>,
    a_items: Vec<u32>,
    sites: Arc<SiteLayout>,
}

impl CellIndex {
    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn cell_of(&self, x: f64) -> usize {
        ((x / self.width) as usize).min(self.n_cells - 1)
    }

    pub fn a_in(&self, cell: usize) -> &[u32] {
        &self.a_items[self.a_start[cell] as usize..self.a_start[cell + 1] as usize]
    }

    /// Site indices in `cell`, free or occupied.
    pub fn sites_in(&self, cell: usize) -> &[u32] {
        &self.sites.items[self.sites.start[cell] as usize..self.sites.start[cell + 1] as usize]
    }

    /// The cell and its two periodic neighbours, without repeats.
    pub fn neighbors(&self, cell: usize) -> impl Iterator<Item = usize> {
        let n = self.n_cells;
        let cells = [cell, (cell + n - 1) % n, (cell + 1) % n];
        let len = n.min(3);
        cells.into_iter().take(len)
    }

    /// Every candidate `(A, free site)` index pair, each exactly once.
    pub fn candidate_pairs(&self, state: &ParticleState) -> Vec<(u32, u32)> {
        let mut pairs = Vec::new();
        for c in 0..self.n_cells {
            let al = self.a_in(c);
            if al.is_empty() {
                continue;
            }
            for d in self.neighbors(c) {
                for &a in al {
                    let free = self.sites_in(d).iter().filter(|&&s| !state.occupied[s as usize]);
                    pairs.extend(free.map(|&s| (a, s)));
                }
            }
        }
        pairs
    }
}

/// Build the cell index of the live `A` and the sites.
pub fn build_cells(state: &mut ParticleState, h_opt: f64) -> Result<CellIndex> {
    if !(h_opt > 0.0 && h_opt.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "h_opt",
            value: h_opt,
            reason: "bandwidth must be finite and > 0",
        });
    }
    let length = state.domain_length;
    let n_cells = ((length / (2.0 * h_opt)).floor() as usize).clamp(1, MAX_CELLS);
    let width = length / n_cells as f64;
    let cell_of = |x: f64| ((x / width) as usize).min(n_cells - 1);

    let mut a_start = vec![0u32; n_cells + 1];
    for (&x, _) in state.a_pos.iter().zip(&state.a_alive).filter(|(_, &a)| a) {
        a_start[cell_of(x) + 1] += 1;
    }
    for c in 0..n_cells {
        a_start[c + 1] += a_start[c];
    }
    let mut fill = a_start.clone();
    let mut a_items = vec![0u32; a_start[n_cells] as usize];
    for (i, (&x, _)) in state
        .a_pos
        .iter()
        .zip(&state.a_alive)
        .enumerate()
        .filter(|(_, (_, &a))| a)
    {
        let c = cell_of(x);
        a_items[fill[c] as usize] = i as u32;
        fill[c] += 1;
    }

    let cache = &mut state.layouts.0;
    if !cache.contains_key(&n_cells) && cache.len() >= MAX_LAYOUTS {
        cache.clear();
    }
    let sites = cache
        .entry(n_cells)
        .or_insert_with(|| Arc::new(SiteLayout::build(&state.site_pos, &state.site_kf, n_cells, width)))
        .clone();
    Ok(CellIndex {
        n_cells,
        width,
        a_start,
        a_items,
        sites,
    })
}

/// Inputs of the forward sweep shared by all pairs; `k_f` comes from the site.
#[derive(Clone, Copy, Debug)]
pub struct ForwardOptions<'a> {
    pub h_opt: f64,
    pub m_p: f64,
    pub dt: f64,
    pub sampling: PairSampling,
    /// Redraw the site constant for every tested pair, with this law and `k_b`.
    pub redraw: Option<(&'a FreundlichSiteLaw, f64)>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ForwardOutcome {
    pub n_forward: u64,
    pub clamped: bool,
}

/// Number of failures before the first success of a Bernoulli(`p`) sequence,
/// or `None` if it is at least `limit`.
#[inline]
fn geometric_skip(rng: &mut SimRng, ln_q: f64, limit: u64) -> Option<u64> {
    if ln_q == f64::NEG_INFINITY {
        return (limit > 0).then_some(0);
    }
    let u = 1.0 - rng.random::<f64>();
    let g = (u.ln() / ln_q).floor();
    if g >= limit as f64 {
        None
    } else {
        Some(g as u64)
    }
}

/// Forward adsorption: collect and resolve reacting pairs.
pub fn forward_sweep(state: &mut ParticleState, cells: &CellIndex, opts: &ForwardOptions<'_>) -> ForwardOutcome {
    let c0 = opts.m_p * opts.dt / (2.0 * opts.h_opt * std::f64::consts::PI.sqrt());
    let length = state.domain_length;
    let mut hits: Vec<(u32, u32)> = Vec::new();
    let mut clamped = false;

    let sampling = if opts.redraw.is_some() {
        PairSampling::Exhaustive
    } else {
        opts.sampling
    };

    match sampling {
        PairSampling::Exhaustive => {
            for c in 0..cells.n_cells {
                let al = cells.a_in(c);
                if al.is_empty() {
                    continue;
                }
                for d in cells.neighbors(c) {
                    for &a in al {
                        let xa = state.a_pos[a as usize];
                        for &s in cells.sites_in(d) {
                            let s_ix = s as usize;
                            if state.occupied[s_ix] {
                                continue;
                            }
                            let kf = match opts.redraw {
                                Some((law, k_b)) => k_b * law.sample(&mut state.rng),
                                None => state.site_kf[s_ix],
                            };
                            let r = min_image_distance(xa, state.site_pos[s_ix], length);
                            let raw = kf * c0;
                            clamped |= raw > 1.0;
                            let pf = (raw * colocation_factor(r, opts.h_opt)).min(1.0);
                            let xi: f64 = state.rng.random();
                            if xi < pf {
                                hits.push((a, s));
                            }
                        }
                    }
                }
            }
        }
        PairSampling::Thinned => {
            let mut free: Vec<u32> = Vec::new();
            for c in 0..cells.n_cells {
                let al = cells.a_in(c);
                if al.is_empty() {
                    continue;
                }
                for d in cells.neighbors(c) {
                    for group in cells.sites.groups_in(d) {
                        let all = &cells.sites.items[group.start as usize..group.end as usize];
                        let p = (group.max_kf * c0).min(1.0);
                        // More expected trials than sites: drop occupied sites up front.
                        let items = if al.len() as f64 * p > 1.0 {
                            free.clear();
                            free.extend(all.iter().copied().filter(|&s| !state.occupied[s as usize]));
                            if free.is_empty() {
                                continue;
                            }
                            &free[..]
                        } else {
                            all
                        };
                        let ln_q = if p >= 1.0 { f64::NEG_INFINITY } else { (-p).ln_1p() };
                        let nb = items.len() as u64;
                        let total = al.len() as u64 * nb;
                        let mut pos = 0u64;
                        while let Some(skip) = geometric_skip(&mut state.rng, ln_q, total - pos) {
                            pos += skip;
                            let a = al[(pos / nb) as usize];
                            let s = items[(pos % nb) as usize];
                            pos += 1;
                            let s_ix = s as usize;
                            // Occupied sites are not candidates; their trials are discarded.
                            if !state.occupied[s_ix] {
                                let raw = state.site_kf[s_ix] * c0;
                                clamped |= raw > 1.0;
                                let r = min_image_distance(state.a_pos[a as usize], state.site_pos[s_ix], length);
                                let pf = (raw * colocation_factor(r, opts.h_opt)).min(1.0);
                                if pf >= p || state.rng.random::<f64>() * p < pf {
                                    hits.push((a, s));
                                }
                            }
                            if pos >= total {
                                break;
                            }
                        }
                    }
                }
            }
        }
    }

    hits.shuffle(&mut state.rng);
    let mut n_forward = 0;
    for (a, s) in hits {
        let (a, s_ix) = (a as usize, s as usize);
        if state.a_alive[a] && !state.occupied[s_ix] {
            state.a_alive[a] = false;
            state.occupied[s_ix] = true;
            state.n_free -= 1;
            state.complexes.push(s);
            state.complex_alive.push(true);
            n_forward += 1;
        }
    }
    ForwardOutcome { n_forward, clamped }
}

/// Backward desorption with probability `k_b dt` per eligible `C`.
///
/// Complexes created during the current step are not eligible. Each released
/// complex frees its site and leaves an `A` at the site position.
/// Eligible complexes are selected by geometric skipping, which draws the
/// same Bernoulli sequence as one uniform per complex.
pub fn backward_sweep(state: &mut ParticleState, k_b: f64, dt: f64) -> u64 {
    let p = k_b * dt;
    if p <= 0.0 {
        return 0;
    }
    let ln_q = if p >= 1.0 { f64::NEG_INFINITY } else { (-p).ln_1p() };
    let n = state.c_eligible as u64;
    let mut pos = 0u64;
    let mut released = 0;
    while let Some(skip) = geometric_skip(&mut state.rng, ln_q, n - pos) {
        pos += skip;
        let i = pos as usize;
        if state.complex_alive[i] {
            state.complex_alive[i] = false;
            let s = state.complexes[i] as usize;
            state.occupied[s] = false;
            state.n_free += 1;
            state.a_pos.push(state.site_pos[s]);
            state.a_alive.push(true);
            released += 1;
        }
        pos += 1;
        if pos >= n {
            break;
        }
    }
    released
}

fn forward_options(config: &SimConfig, h_opt: f64) -> ForwardOptions<'_> {
    let redraw = match &config.sites {
        SiteModel::Heterogeneous {
            law,
            redraw_per_encounter: true,
        } => Some((law, config.k_b)),
        _ => None,
    };
    ForwardOptions {
        h_opt,
        m_p: config.particle_mass,
        dt: config.dt,
        sampling: config.pair_sampling,
        redraw,
    }
}

/// Advance the state by one time step.
pub fn step(state: &mut ParticleState, config: &SimConfig) -> Result<StepReport> {
    diffuse(state, config.diffusion, config.dt);
    let h_opt = step_bandwidth(state, config);
    let cells = build_cells(state, h_opt)?;
    let fwd = forward_sweep(state, &cells, &forward_options(config, h_opt));
    let n_backward = backward_sweep(state, config.k_b, config.dt);
    state.compact();
    state.step += 1;
    state.time = state.step as f64 * config.dt;
    Ok(StepReport {
        n_forward: fwd.n_forward,
        n_backward,
        h_opt_used: h_opt,
        clamped: fwd.clamped,
    })
}

/// A configured run: state plus the bookkeeping for recording.
#[derive(Clone, Debug)]
pub struct Simulation {
    config: SimConfig,
    state: ParticleState,
    clamp_warned: bool,
}

impl Simulation {
    pub fn new(config: SimConfig) -> Result<Self> {
        let state = initialize_state(&config)?;
        Ok(Simulation {
            config,
            state,
            clamp_warned: false,
        })
    }

    /// Run `config` from a prepared state.
    pub fn with_state(config: SimConfig, state: ParticleState) -> Result<Self> {
        config.validate()?;
        if (state.domain_length - config.domain_length).abs() > 0.0 {
            return Err(Error::config("domain_length", "does not match the supplied state"));
        }
        Ok(Simulation {
            config,
            state,
            clamp_warned: false,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn state(&self) -> &ParticleState {
        &self.state
    }

    pub fn step(&mut self) -> Result<StepReport> {
        let report = step(&mut self.state, &self.config)?;
        if report.clamped && !self.clamp_warned {
            self.clamp_warned = true;
            log::warn!(
                "forward probability clamped at 1 (step {}, h_opt = {:.4}); reduce dt for accuracy",
                self.state.step,
                report.h_opt_used
            );
        }
        Ok(report)
    }

    pub fn clamp_warned(&self) -> bool {
        self.clamp_warned
    }

    /// Record of the current state, tagged with `report`.
    pub fn record(&self, report: &StepReport) -> TimeSeriesRecord {
        TimeSeriesRecord {
            h_opt: report.h_opt_used,
            n_forward: report.n_forward,
            n_backward: report.n_backward,
            ..concentrations(&self.state, &self.config)
        }
    }

    /// Record of the current state before any step; the bandwidth column
    /// holds the estimate for the current positions.
    pub fn initial_record(&self) -> TimeSeriesRecord {
        TimeSeriesRecord {
            h_opt: step_bandwidth(&self.state, &self.config),
            ..concentrations(&self.state, &self.config)
        }
    }

    /// Step to `config.n_steps`, recording the initial state and every
    /// `record_every`-th step.
    pub fn run(&mut self) -> Result<Vec<TimeSeriesRecord>> {
        let every = self.config.record_every as u64;
        let n_steps = self.config.n_steps as u64;
        let mut series = Vec::with_capacity((n_steps / every + 1) as usize);
        series.push(self.initial_record());
        while self.state.step < n_steps {
            let report = self.step()?;
            if self.state.step.is_multiple_of(every) {
                series.push(self.record(&report));
            }
        }
        Ok(series)
    }
}

/// Initialize from `config` and run it to completion.
pub fn run(config: &SimConfig) -> Result<Vec<TimeSeriesRecord>> {
    Simulation::new(config.clone())?.run()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state_with(a: Vec<f64>, b: Vec<(f64, f64)>, c: Vec<(f64, f64)>, seed: u64) -> ParticleState {
        ParticleState::from_parts(200.0, a, b, c, seed).unwrap()
    }

    #[test]
    fn minimum_image() {
        assert_eq!(min_image_distance(1.0, 199.0, 200.0), 2.0);
        assert_eq!(min_image_distance(10.0, 30.0, 200.0), 20.0);
        assert_eq!(min_image_distance(0.0, 100.0, 200.0), 100.0);
    }

    #[test]
    fn zero_diffusion_leaves_positions() {
        let mut s = state_with(vec![3.0, 50.0, 199.99], vec![], vec![], 1);
        diffuse(&mut s, 0.0, 0.01);
        assert_eq!(s.positions_a(), &[3.0, 50.0, 199.99]);
    }

    #[test]
    fn diffusion_moves_only_adsorbate() {
        let mut s = state_with(vec![3.0; 100], vec![(7.0, 0.5); 10], vec![(9.0, 0.5); 10], 1);
        diffuse(&mut s, 1.0, 0.01);
        assert!(s.positions_a().iter().any(|&x| x != 3.0));
        assert!(s.positions_b().iter().all(|&x| x == 7.0));
        assert!(s.positions_c().iter().all(|&x| x == 9.0));
    }

    #[test]
    fn periodic_wrap_of_displacement() {
        assert!((wrap(199.9 + 0.3, 200.0) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn cell_count_rule() {
        let mut s = state_with(vec![1.0], vec![(3.0, 0.5)], vec![], 0);
        assert_eq!(build_cells(&mut s, 7.35).unwrap().n_cells(), 13);
        assert_eq!(build_cells(&mut s, 100.0).unwrap().n_cells(), 1);
        assert_eq!(build_cells(&mut s, 1e4).unwrap().n_cells(), 1);
        assert!(build_cells(&mut s, 0.0).is_err());
    }

    #[test]
    fn neighbors_never_repeat() {
        let mut s = state_with(vec![], vec![], vec![], 0);
        for (h, n) in [(100.0, 1), (50.0, 2), (30.0, 3), (10.0, 10)] {
            let cells = build_cells(&mut s, h).unwrap();
            assert_eq!(cells.n_cells(), n);
            for c in 0..n {
                let mut nb: Vec<_> = cells.neighbors(c).collect();
                nb.sort();
                nb.dedup();
                assert_eq!(nb.len(), n.min(3));
            }
        }
    }

    #[test]
    fn zero_rate_sites_never_react() {
        for sampling in [PairSampling::Thinned, PairSampling::Exhaustive] {
            let mut s = state_with(vec![5.0; 50], vec![(5.0, 0.0); 50], vec![], 3);
            let cells = build_cells(&mut s, 1.0).unwrap();
            let opts = ForwardOptions {
                h_opt: 1.0,
                m_p: 1.0,
                dt: 0.01,
                sampling,
                redraw: None,
            };
            assert_eq!(forward_sweep(&mut s, &cells, &opts).n_forward, 0);
        }
    }

    #[test]
    fn unit_probability_reacts_with_certainty() {
        let h = 1.0;
        let dt = 0.01;
        let k_f = 2.0 * h * std::f64::consts::PI.sqrt() / dt;
        for sampling in [PairSampling::Thinned, PairSampling::Exhaustive] {
            for seed in 0..20 {
                let mut s = state_with(vec![42.0], vec![(42.0, k_f)], vec![], seed);
                let cells = build_cells(&mut s, h).unwrap();
                let opts = ForwardOptions {
                    h_opt: h,
                    m_p: 1.0,
                    dt,
                    sampling,
                    redraw: None,
                };
                let out = forward_sweep(&mut s, &cells, &opts);
                assert_eq!(out.n_forward, 1);
                s.compact();
                assert_eq!((s.n_a(), s.n_b(), s.n_c()), (0, 0, 1));
                assert_eq!(s.positions_c(), &[42.0]);
                assert_eq!(s.site_kf_c(), &[k_f]);
            }
        }
    }

    #[test]
    fn no_particle_reacts_twice() {
        let h = 1.0;
        let k_f = 1e4;
        let mut s = state_with(vec![10.0; 30], vec![(10.0, k_f); 20], vec![], 5);
        let cells = build_cells(&mut s, h).unwrap();
        let opts = ForwardOptions {
            h_opt: h,
            m_p: 1.0,
            dt: 0.01,
            sampling: PairSampling::Thinned,
            redraw: None,
        };
        let out = forward_sweep(&mut s, &cells, &opts);
        assert!(out.clamped);
        assert_eq!(out.n_forward, 20);
        s.compact();
        assert_eq!((s.n_a(), s.n_b(), s.n_c()), (10, 0, 20));
    }

    #[test]
    fn backward_releases_at_site_with_inherited_rate() {
        let mut s = state_with(vec![], vec![], vec![(12.5, 0.7), (80.0, 0.9)], 2);
        // k_b dt = 1: every eligible complex desorbs.
        assert_eq!(backward_sweep(&mut s, 100.0, 0.01), 2);
        s.compact();
        assert_eq!(s.n_c(), 0);
        assert_eq!(s.positions_a(), &[12.5, 80.0]);
        assert_eq!(s.positions_b(), &[12.5, 80.0]);
        assert_eq!(s.site_kf_b(), &[0.7, 0.9]);
    }

    #[test]
    fn zero_backward_rate_never_releases() {
        let mut s = state_with(vec![], vec![], vec![(1.0, 0.5); 1000], 2);
        assert_eq!(backward_sweep(&mut s, 0.0, 0.01), 0);
    }

    #[test]
    fn fresh_complexes_cannot_desorb_in_same_step() {
        let h = 1.0;
        let dt = 0.01;
        let k_f = 2.0 * h * std::f64::consts::PI.sqrt() / dt;
        let mut s = state_with(vec![42.0], vec![(42.0, k_f)], vec![], 0);
        let config = SimConfig {
            diffusion: 0.0,
            dt,
            k_b: 1.0 / dt,
            bandwidth: BandwidthRule::Fixed { h },
            conc_a0: 0.005,
            conc_b0: 0.005,
            conc_c0: 0.0,
            ..SimConfig::default()
        };
        let r = step(&mut s, &config).unwrap();
        assert_eq!((r.n_forward, r.n_backward), (1, 0));
        assert_eq!(s.n_c(), 1);
        let r = step(&mut s, &config).unwrap();
        // The complex releases, and the released A waits for the next step.
        assert_eq!((r.n_forward, r.n_backward), (0, 1));
        assert_eq!((s.n_a(), s.n_b(), s.n_c()), (1, 1, 0));
    }

    #[test]
    fn empty_state_only_advances_time() {
        let config = SimConfig {
            conc_a0: 0.0,
            conc_b0: 0.0,
            conc_c0: 0.0,
            ..SimConfig::default()
        };
        let mut sim = Simulation::new(config).unwrap();
        let r = sim.step().unwrap();
        assert_eq!((r.n_forward, r.n_backward), (0, 0));
        assert!((sim.state().time() - 0.01).abs() < 1e-15);
        assert_eq!(sim.state().n_a() + sim.state().n_b() + sim.state().n_c(), 0);
    }

    #[test]
    fn inert_step_is_identity() {
        let config = SimConfig {
            diffusion: 0.0,
            k_b: 0.0,
            sites: SiteModel::Homogeneous { k_f: 0.0 },
            conc_a0: 5.0,
            conc_b0: 5.0,
            ..SimConfig::default()
        };
        let mut sim = Simulation::new(config).unwrap();
        let before = sim.state().clone();
        let r = sim.step().unwrap();
        assert_eq!((r.n_forward, r.n_backward), (0, 0));
        assert_eq!(sim.state().positions_a(), before.positions_a());
        assert_eq!(sim.state().positions_b(), before.positions_b());
        assert_eq!(sim.state().positions_c(), before.positions_c());
    }

    #[test]
    fn zero_steps_gives_initial_record() {
        let config = SimConfig {
            n_steps: 0,
            ..SimConfig::default()
        };
        let series = run(&config).unwrap();
        assert_eq!(series.len(), 1);
        assert_eq!(series[0].step, 0);
        assert_eq!(series[0].conc_a, 200.0);
    }

    #[test]
    fn record_every_thins_series() {
        let config = SimConfig {
            n_steps: 10,
            record_every: 3,
            conc_a0: 2.0,
            conc_b0: 2.0,
            ..SimConfig::default()
        };
        let steps: Vec<u64> = run(&config).unwrap().iter().map(|r| r.step).collect();
        assert_eq!(steps, vec![0, 3, 6, 9]);
    }

    #[test]
    fn fallback_bandwidth_for_single_adsorbate() {
        let config = SimConfig::default();
        let s = state_with(vec![4.0], vec![], vec![], 0);
        let h = step_bandwidth(&s, &config);
        assert!((h - 1.06 * 200.0 / 12f64.sqrt()).abs() < 1e-12);
    }
}

//! Exact event-driven simulation of the individual-based process.
//!
//! Each individual of trait `(g,p)` gives birth at rate `b(p)` (a fraction
//! `u_K m(g)` of births are mutants whose trait is drawn from the mutation
//! law), dies at rate `d(p) + sum_q c(p,q) nu(q)`, and switches to `q` at
//! rate `s_nat(p,q) + sum_r s_ind(p,q)(r) nu(r)`, where `nu` is the
//! phenotype marginal of the rescaled population. The sampler is the direct
//! method: an exponential waiting time with the total rate, then one event
//! chosen proportionally to its rate.

use crate::error::{Error, Result};
use crate::model::{ModelParams, PopulationState, Trait};
use crate::rng::{self, SimRng};

/// Slots per trait row: clean birth, mutant birth, death, then one per target phenotype.
const CLEAN: usize = 0;
const MUTANT: usize = 1;
const DEATH: usize = 2;
const SWITCH: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct EventRateTable {
    n_phenotypes: usize,
    rates: Vec<f64>,
    total: f64,
}

impl EventRateTable {
    fn zeros(n_traits: usize, n_phenotypes: usize) -> Self {
        Self {
            n_phenotypes,
            rates: vec![0.0; n_traits * (SWITCH + n_phenotypes)],
            total: 0.0,
        }
    }

    fn stride(&self) -> usize {
        SWITCH + self.n_phenotypes
    }

    fn row(&self, x: usize) -> &[f64] {
        let s = self.stride();
        &self.rates[x * s..(x + 1) * s]
    }

    pub fn birth_clean(&self, x: usize) -> f64 {
        self.row(x)[CLEAN]
    }

    pub fn birth_mutant(&self, x: usize) -> f64 {
        self.row(x)[MUTANT]
    }

    pub fn death(&self, x: usize) -> f64 {
        self.row(x)[DEATH]
    }

    pub fn switch(&self, x: usize, to: usize) -> f64 {
        self.row(x)[SWITCH + to]
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    /// Largest relative difference between two tables, entrywise against `max(|a|,|b|,1e-300)`.
    pub fn max_relative_difference(&self, other: &Self) -> f64 {
        let entry = self
            .rates
            .iter()
            .zip(&other.rates)
            .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(1e-300))
            .fold(0.0, f64::max);
        let total = (self.total - other.total).abs() / self.total.abs().max(other.total.abs()).max(1e-300);
        entry.max(total)
    }
}

#[derive(Debug, Clone)]
struct SwitchTarget {
    to: usize,
    natural: f64,
    /// Induced rate per unit density of each inducing phenotype; empty when none.
    induced: Vec<f64>,
}

/// Per-trait coefficients derived once from the parameters.
#[derive(Debug, Clone)]
struct RateKernel {
    n_phenotypes: usize,
    phenotype_of: Vec<usize>,
    clean: Vec<f64>,
    mutant: Vec<f64>,
    death: Vec<f64>,
    competition: Vec<f64>,
    switches: Vec<Vec<SwitchTarget>>,
}

impl RateKernel {
    fn new(params: &ModelParams) -> Self {
        let space = params.space();
        let np = space.n_phenotypes();
        let u = params.mutation_scaling();
        let mut k = RateKernel {
            n_phenotypes: np,
            phenotype_of: Vec::new(),
            clean: Vec::new(),
            mutant: Vec::new(),
            death: Vec::new(),
            competition: (0..np * np)
                .map(|i| params.competition(i / np, i % np))
                .collect(),
            switches: Vec::new(),
        };
        for t in space.traits() {
            let (g, p) = (t.genotype, t.phenotype);
            let pm = u * params.mutation_prob(g);
            k.phenotype_of.push(p);
            k.clean.push((1.0 - pm) * params.birth(p));
            k.mutant.push(pm * params.birth(p));
            k.death.push(params.death(p));
            let targets = (0..np)
                .filter(|&q| q != p)
                .filter_map(|q| {
                    let natural = params.switch_natural(g, p, q);
                    let induced: Vec<f64> = (0..np).map(|r| params.switch_induced(g, p, q, r)).collect();
                    let any_induced = induced.iter().any(|&v| v != 0.0);
                    (natural != 0.0 || any_induced).then(|| SwitchTarget {
                        to: q,
                        natural,
                        induced: if any_induced { induced } else { Vec::new() },
                    })
                })
                .collect();
            k.switches.push(targets);
        }
        k
    }

    /// Writes the row of trait `x` with `n` individuals given the phenotype marginal.
    fn fill_row(&self, x: usize, n: u64, marginal: &[f64], row: &mut [f64]) -> f64 {
        row.fill(0.0);
        if n == 0 {
            return 0.0;
        }
        let n = n as f64;
        let np = self.n_phenotypes;
        let p = self.phenotype_of[x];
        row[CLEAN] = self.clean[x] * n;
        row[MUTANT] = self.mutant[x] * n;
        let comp = &self.competition[p * np..(p + 1) * np];
        let pressure: f64 = comp.iter().zip(marginal).map(|(c, m)| c * m).sum();
        row[DEATH] = (self.death[x] + pressure) * n;
        let mut sum = row[CLEAN] + row[MUTANT] + row[DEATH];
        for s in &self.switches[x] {
            let induced: f64 = s.induced.iter().zip(marginal).map(|(r, m)| r * m).sum();
            let rate = (s.natural + induced) * n;
            row[SWITCH + s.to] = rate;
            sum += rate;
        }
        sum
    }
}

fn marginal_density(phenotype_counts: &[u64], k: u64) -> Vec<f64> {
    let k = k as f64;
    phenotype_counts.iter().map(|&c| c as f64 / k).collect()
}

/// Rebuilds the full rate table of `state`.
pub fn event_rates(state: &PopulationState, params: &ModelParams) -> EventRateTable {
    let kernel = RateKernel::new(params);
    let space = params.space();
    let np = space.n_phenotypes();
    let mut counts = vec![0u64; np];
    for (x, &c) in state.counts.iter().enumerate() {
        counts[x % np] += c;
    }
    let marginal = marginal_density(&counts, state.carrying_capacity);
    let mut table = EventRateTable::zeros(space.n_traits(), np);
    let stride = table.stride();
    let mut total = 0.0;
    for (x, &n) in state.counts.iter().enumerate() {
        total += kernel.fill_row(x, n, &marginal, &mut table.rates[x * stride..(x + 1) * stride]);
    }
    table.total = total;
    table
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    CleanBirth,
    MutantBirth(Trait),
    Death,
    Switch(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimEvent {
    pub kind: EventKind,
    pub source: Trait,
    pub dt: f64,
}

/// A running simulation: state, rate table and the phenotype counts behind it.
///
/// After each event only the rows of occupied traits are recomputed, from
/// integer phenotype counts maintained incrementally; [`event_rates`] is the
/// from-scratch reference for the same table.
#[derive(Debug, Clone)]
pub struct MicroSim<'a> {
    params: &'a ModelParams,
    kernel: RateKernel,
    state: PopulationState,
    phenotype_counts: Vec<u64>,
    marginal: Vec<f64>,
    table: EventRateTable,
}

impl<'a> MicroSim<'a> {
    pub fn new(params: &'a ModelParams, state: PopulationState) -> Self {
        let space = params.space();
        assert_eq!(state.counts.len(), space.n_traits(), "state does not match trait space");
        let np = space.n_phenotypes();
        let mut phenotype_counts = vec![0u64; np];
        for (x, &c) in state.counts.iter().enumerate() {
            phenotype_counts[x % np] += c;
        }
        let mut sim = Self {
            params,
            kernel: RateKernel::new(params),
            marginal: vec![0.0; np],
            table: EventRateTable::zeros(space.n_traits(), np),
            phenotype_counts,
            state,
        };
        sim.refresh(None);
        sim
    }

    pub fn state(&self) -> &PopulationState {
        &self.state
    }

    pub fn into_state(self) -> PopulationState {
        self.state
    }

    pub fn rates(&self) -> &EventRateTable {
        &self.table
    }

    pub fn time(&self) -> f64 {
        self.state.time
    }

    /// Recomputes occupied rows; `vacated` is a trait whose count just hit zero.
    fn refresh(&mut self, vacated: Option<usize>) {
        let k = self.state.carrying_capacity as f64;
        for (m, &c) in self.marginal.iter_mut().zip(&self.phenotype_counts) {
            *m = c as f64 / k;
        }
        let stride = self.table.stride();
        if let Some(x) = vacated {
            self.table.rates[x * stride..(x + 1) * stride].fill(0.0);
        }
        let mut total = 0.0;
        for (x, &n) in self.state.counts.iter().enumerate() {
            if n > 0 {
                total += self.kernel.fill_row(
                    x,
                    n,
                    &self.marginal,
                    &mut self.table.rates[x * stride..(x + 1) * stride],
                );
            }
        }
        self.table.total = total;
    }

    /// Samples the next event without applying it.
    pub fn draw(&self, rng: &mut SimRng) -> Result<SimEvent> {
        let total = self.table.total;
        if !(total > 0.0) {
            return Err(Error::Absorbed);
        }
        let dt = rng::exponential(rng, total);
        let slot = rng::pick_weighted(rng, &self.table.rates, total);
        let stride = self.table.stride();
        let x = slot / stride;
        let space = self.params.space();
        let source = space.trait_at(x);
        let kind = match slot % stride {
            CLEAN => EventKind::CleanBirth,
            MUTANT => {
                let row = self.params.mutation_row(x);
                let row_total: f64 = row.iter().sum();
                EventKind::MutantBirth(space.trait_at(rng::pick_weighted(rng, row, row_total)))
            }
            DEATH => EventKind::Death,
            s => EventKind::Switch(s - SWITCH),
        };
        Ok(SimEvent { kind, source, dt })
    }

    /// Applies `event` and advances the clock by its waiting time.
    pub fn apply(&mut self, event: &SimEvent) {
        let space = self.params.space();
        let x = space.index(event.source);
        let mut vacated = None;
        match event.kind {
            EventKind::CleanBirth => self.add(x),
            EventKind::MutantBirth(target) => self.add(space.index(target)),
            EventKind::Death => {
                self.remove(x);
                vacated = (self.state.counts[x] == 0).then_some(x);
            }
            EventKind::Switch(to) => {
                self.remove(x);
                self.add(space.index(crate::model::Trait::new(event.source.genotype, to)));
                vacated = (self.state.counts[x] == 0).then_some(x);
            }
        }
        self.state.time += event.dt;
        self.refresh(vacated);
    }

    fn add(&mut self, x: usize) {
        self.state.counts[x] += 1;
        self.phenotype_counts[x % self.kernel.n_phenotypes] += 1;
    }

    fn remove(&mut self, x: usize) {
        debug_assert!(self.state.counts[x] > 0, "event on an empty trait");
        self.state.counts[x] -= 1;
        self.phenotype_counts[x % self.kernel.n_phenotypes] -= 1;
    }

    pub fn step(&mut self, rng: &mut SimRng) -> Result<SimEvent> {
        let event = self.draw(rng)?;
        self.apply(&event);
        Ok(event)
    }

    /// Runs until `stop` holds, absorption, or the clock would pass `t_max`.
    pub fn run_until<F>(&mut self, rng: &mut SimRng, t_max: f64, mut stop: F) -> RunOutcome
    where
        F: FnMut(&PopulationState) -> bool,
    {
        loop {
            if stop(&self.state) {
                return RunOutcome::Stopped;
            }
            match self.draw(rng) {
                Err(_) => return RunOutcome::Absorbed,
                Ok(ev) => {
                    if self.state.time + ev.dt > t_max {
                        self.state.time = t_max;
                        return RunOutcome::TimeLimit;
                    }
                    self.apply(&ev);
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunOutcome {
    Stopped,
    Absorbed,
    TimeLimit,
}

/// One event on `state`, with the rate table rebuilt from scratch.
pub fn step(state: &mut PopulationState, params: &ModelParams, rng: &mut SimRng) -> Result<SimEvent> {
    let mut sim = MicroSim::new(params, state.clone());
    let ev = sim.step(rng)?;
    *state = sim.into_state();
    Ok(ev)
}

/// Densities sampled on a regular grid plus the final state.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Full trait-indexed densities per sample.
    pub densities: Vec<Vec<f64>>,
    /// Set when every rate vanished before `t_end`; the last row is the absorbing state.
    pub absorbed: bool,
}

impl Trajectory {
    fn push(&mut self, time: f64, state: &PopulationState) {
        self.times.push(time);
        self.densities.push(state.densities());
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(f64, &[f64])> {
        self.times.last().map(|&t| (t, self.densities.last().unwrap().as_slice()))
    }
}

/// Simulates from `state0` to `t_end`, recording the state at
/// `state0.time + k * sample_dt` and at the end.
pub fn simulate(
    state0: &PopulationState,
    params: &ModelParams,
    t_end: f64,
    sample_dt: f64,
    rng: &mut SimRng,
) -> Trajectory {
    assert!(sample_dt > 0.0, "sample interval must be positive");
    let mut sim = MicroSim::new(params, state0.clone());
    let mut traj = Trajectory {
        times: Vec::new(),
        densities: Vec::new(),
        absorbed: false,
    };
    let t0 = state0.time;
    let t_end = t_end.max(t0);
    let mut k = 0u64;
    let mut next_sample = t0;
    loop {
        match sim.draw(rng) {
            Err(_) => {
                traj.absorbed = true;
                break;
            }
            Ok(ev) => {
                let t_next = sim.time() + ev.dt;
                while next_sample <= t_end && next_sample < t_next {
                    traj.push(next_sample, sim.state());
                    k += 1;
                    next_sample = t0 + k as f64 * sample_dt;
                }
                if t_next > t_end {
                    sim.state.time = t_end;
                    break;
                }
                sim.apply(&ev);
            }
        }
    }
    let t_final = sim.time();
    if traj.times.last() != Some(&t_final) {
        traj.push(t_final, sim.state());
    }
    traj
}

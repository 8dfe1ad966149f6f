//! Monte Carlo check of invasion probabilities against the microscopic process.

use rayon::prelude::*;

use crate::branching::{build_branching_spec, extinction_vector};
use crate::error::Result;
use crate::lvs::{find_lvs_equilibrium, EquilibriumOptions};
use crate::micro::{MicroSim, RunOutcome};
use crate::model::{DensityVector, ModelParams, PopulationState, Trait};
use crate::phenotype_graph::{reachable_traits, ClassMap};
use crate::rng::replicate_stream;
use crate::stats::clopper_pearson;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McInvasionConfig {
    pub replicates: u64,
    pub seed: u64,
    /// Mutant-class density counted as fixation.
    pub eps: f64,
    /// Safety cap on simulated time per replicate.
    pub t_max: f64,
}

impl Default for McInvasionConfig {
    fn default() -> Self {
        Self {
            replicates: 2000,
            seed: 0,
            eps: 0.1,
            t_max: 1e4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McInvasionResult {
    pub mutant: Trait,
    pub resident_equilibrium: DensityVector,
    pub lambda_max: f64,
    /// Branching-process survival probability `1 - q`.
    pub analytic: f64,
    pub successes: u64,
    pub replicates: u64,
    pub empirical: f64,
    pub ci95: (f64, f64),
    /// Replicates that hit `t_max` undecided (counted as failures).
    pub undecided: u64,
}

impl McInvasionResult {
    pub fn analytic_in_ci(&self) -> bool {
        self.ci95.0 <= self.analytic && self.analytic <= self.ci95.1
    }
}

/// Splits `initial` into residents (everything outside the mutant's class)
/// and a single mutant individual of trait `mutant`.
pub fn invasion_start(params: &ModelParams, classes: &ClassMap, initial: &PopulationState, mutant: Trait) -> PopulationState {
    let space = params.space();
    let class = classes.class_traits(mutant);
    let mut state = initial.clone();
    state.time = 0.0;
    for t in &class {
        state.counts[space.index(*t)] = 0;
    }
    state.counts[space.index(mutant)] = 1;
    state
}

/// Runs `cfg.replicates` independent micro simulations from one mutant in
/// the resident population of `initial`; fixation means the mutant class
/// reaches density `cfg.eps` before dying out.
pub fn mc_invasion(
    params: &ModelParams,
    classes: &ClassMap,
    initial: &PopulationState,
    mutant: Trait,
    cfg: &McInvasionConfig,
) -> Result<McInvasionResult> {
    let space = params.space();
    let start = invasion_start(params, classes, initial, mutant);
    let class_idx: Vec<usize> = classes.class_traits(mutant).iter().map(|t| space.index(*t)).collect();

    let residents: Vec<Trait> = space
        .traits()
        .filter(|t| start.counts[space.index(*t)] > 0 && !class_idx.contains(&space.index(*t)))
        .collect();
    let support = reachable_traits(space, &residents, classes)?;
    let x0 = DensityVector::restrict(space, &start.densities(), &support);
    let resident_equilibrium = if support.is_empty() {
        x0
    } else {
        find_lvs_equilibrium(params, classes, &x0, &EquilibriumOptions::default())?.equilibrium
    };
    let spec = build_branching_spec(params, classes, &resident_equilibrium, mutant)?;
    let ev = extinction_vector(&spec)?;
    let pos = spec.position(mutant.phenotype).expect("mutant in its own class");

    let threshold = (cfg.eps * start.carrying_capacity as f64).ceil() as u64;
    let outcomes: Vec<(bool, bool)> = (0..cfg.replicates)
        .into_par_iter()
        .map(|i| {
            let mut rng = replicate_stream(cfg.seed, i);
            let mut sim = MicroSim::new(params, start.clone());
            let class_count = |s: &PopulationState| class_idx.iter().map(|&x| s.counts[x]).sum::<u64>();
            let outcome = sim.run_until(&mut rng, cfg.t_max, |s| {
                let c = class_count(s);
                c == 0 || c >= threshold
            });
            let fixed = class_count(sim.state()) >= threshold;
            (fixed, outcome == RunOutcome::TimeLimit)
        })
        .collect();
    let successes = outcomes.iter().filter(|o| o.0).count() as u64;
    let undecided = outcomes.iter().filter(|o| o.1).count() as u64;
    Ok(McInvasionResult {
        mutant,
        resident_equilibrium,
        lambda_max: ev.lambda_max,
        analytic: 1.0 - ev.q[pos],
        successes,
        replicates: cfg.replicates,
        empirical: successes as f64 / cfg.replicates as f64,
        ci95: clopper_pearson(successes, cfg.replicates, 0.95),
        undecided,
    })
}

//! The rare-mutation jump process over coexisting equilibria.
//!
//! Time runs on the mutation scale (units of `1/(K u_K)`). From a state
//! `(support, n̄)` mutations arrive at total rate `sum m(g) b(p) n̄_(g,p)`;
//! the parent is drawn in proportion to its term and the mutant from the
//! parent's row of the mutation law. The mutant invades with probability
//! `1 - q`, in which case the system moves to the post-invasion equilibrium.
//! Rejected mutations only advance the clock.

use std::collections::HashMap;

use serde_json::json;

use crate::branching::{build_branching_spec, extinction_vector, perron_root, generator_matrix};
use crate::error::{Error, Result};
use crate::linalg::spectral_abscissa;
use crate::lvs::{check_coexistence, find_lvs_equilibrium, EquilibriumOptions, EquilibriumReport, PlasticField, VectorField};
use crate::model::{DensityVector, ModelParams, Trait, TraitSpace};
use crate::phenotype_graph::{reachable_traits, ClassMap};
use crate::rng::{exponential, pick_weighted, uniform, SimRng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PespOptions {
    /// Initial size of the invading class, in density units.
    pub eps: f64,
    /// Post-invasion coordinates below this are set to zero.
    pub zero_threshold: f64,
    pub equilibrium: EquilibriumOptions,
}

impl Default for PespOptions {
    fn default() -> Self {
        Self {
            eps: 1e-3,
            zero_threshold: 1e-6,
            equilibrium: EquilibriumOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PespState {
    pub support: Vec<Trait>,
    pub equilibrium: DensityVector,
    pub time: f64,
}

/// Branching results for one (support, mutant) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct InvasionData {
    pub lambda_max: f64,
    /// Extinction probability of a single mutant of the queried phenotype.
    pub q: f64,
    pub class: Vec<Trait>,
    /// Limiting type composition of the surviving mutant class (left Perron
    /// eigenvector over `class`, summing to one).
    pub composition: Vec<f64>,
}

/// Memo of branching results keyed by (support, mutant).
#[derive(Debug, Default, Clone)]
pub struct InvasionCache {
    map: HashMap<(Vec<Trait>, Trait), InvasionData>,
}

impl InvasionCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn get(
        &mut self,
        params: &ModelParams,
        classes: &ClassMap,
        state: &PespState,
        mutant: Trait,
    ) -> Result<InvasionData> {
        let key = (state.support.clone(), mutant);
        if let Some(d) = self.map.get(&key) {
            return Ok(d.clone());
        }
        let spec = build_branching_spec(params, classes, &state.equilibrium, mutant)?;
        let pair = perron_root(&generator_matrix(&spec))?;
        let ev = extinction_vector(&spec)?;
        let pos = spec.position(mutant.phenotype).expect("mutant in its own class");
        let data = InvasionData {
            lambda_max: pair.lambda,
            q: ev.q[pos],
            class: spec.traits(),
            composition: pair.u,
        };
        self.map.insert(key, data.clone());
        Ok(data)
    }
}

/// Equilibrium from `x0`, restricted to the traits that persist, and
/// verified to coexist there.
pub fn settle(
    params: &ModelParams,
    classes: &ClassMap,
    x0: &DensityVector,
    time: f64,
    opts: &PespOptions,
) -> Result<PespState> {
    let space = params.space();
    let support = reachable_traits(space, &x0.support, classes)?;
    let x0 = DensityVector::restrict(space, &x0.to_full(space), &support);
    let report = find_lvs_equilibrium(params, classes, &x0, &opts.equilibrium)?;
    state_from_report(params, classes, &report, time, opts)
}

fn state_from_report(
    params: &ModelParams,
    classes: &ClassMap,
    report: &EquilibriumReport,
    time: f64,
    opts: &PespOptions,
) -> Result<PespState> {
    let space = params.space();
    let eq = &report.equilibrium;
    let alive: Vec<Trait> = eq
        .support
        .iter()
        .zip(&eq.values)
        .filter(|(_, &v)| v >= opts.zero_threshold)
        .map(|(t, _)| *t)
        .collect();
    if alive.is_empty() {
        return Err(Error::Extinct);
    }
    let support = reachable_traits(space, &alive, classes)?;
    let x0 = DensityVector::restrict(space, &eq.to_full(space), &support);
    let (ok, check) = check_coexistence(params, classes, &x0, &opts.equilibrium)?;
    if !ok {
        if !check.converged {
            return Err(Error::NonConvergence(Box::new(check)));
        }
        return Err(Error::UnstableTarget(check.eigenvalue_max_real));
    }
    Ok(PespState {
        support,
        equilibrium: check.equilibrium,
        time,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct JumpCandidate {
    pub parent: Trait,
    pub mutant: Trait,
    pub rate: f64,
    pub q: f64,
    pub lambda_max: f64,
}

/// Total mutation intensity `sum m(g) b(p) n̄` and its per-parent terms.
pub fn mutation_intensity(params: &ModelParams, state: &PespState) -> (f64, Vec<f64>) {
    let terms: Vec<f64> = state
        .equilibrium
        .support
        .iter()
        .zip(&state.equilibrium.values)
        .map(|(t, n)| params.mutation_prob(t.genotype) * params.birth(t.phenotype) * n)
        .collect();
    (terms.iter().sum(), terms)
}

/// One candidate per (parent, mutant) with positive mutation flow and the
/// mutant outside the support.
pub fn jump_rates(
    params: &ModelParams,
    classes: &ClassMap,
    state: &PespState,
    cache: &mut InvasionCache,
) -> Result<Vec<JumpCandidate>> {
    let space = params.space();
    let (_, terms) = mutation_intensity(params, state);
    let mut out = Vec::new();
    for (parent, flow) in state.equilibrium.support.iter().zip(terms) {
        if flow <= 0.0 {
            continue;
        }
        for mutant in space.traits() {
            let law = params.mutation_law(*parent, mutant);
            if law <= 0.0 || state.support.contains(&mutant) {
                continue;
            }
            let data = cache.get(params, classes, state, mutant)?;
            out.push(JumpCandidate {
                parent: *parent,
                mutant,
                rate: flow * law * (1.0 - data.q),
                q: data.q,
                lambda_max: data.lambda_max,
            });
        }
    }
    Ok(out)
}

/// Integrates the system on `support ∪ class(mutant)` from the residents at
/// their equilibrium and the mutant class at `eps` times its limiting
/// composition, then zeroes the
/// coordinates below the threshold. The reported Jacobian is that of the
/// joint system at the zeroed point and must be strictly stable.
pub fn post_invasion_equilibrium(
    params: &ModelParams,
    classes: &ClassMap,
    state: &PespState,
    mutant: Trait,
    cache: &mut InvasionCache,
    opts: &PespOptions,
) -> Result<EquilibriumReport> {
    let data = cache.get(params, classes, state, mutant)?;
    let mut support: Vec<Trait> = state.support.iter().chain(&data.class).copied().collect();
    support.sort();
    let values = support
        .iter()
        .map(|t| match data.class.iter().position(|c| c == t) {
            Some(i) => opts.eps * data.composition[i],
            None => state.equilibrium.get(*t),
        })
        .collect();
    let x0 = DensityVector::new(support, values);
    let mut report = find_lvs_equilibrium(params, classes, &x0, &opts.equilibrium)?;
    for v in &mut report.equilibrium.values {
        if *v < opts.zero_threshold {
            *v = 0.0;
        }
    }
    let field = PlasticField::lvs(params, &report.equilibrium.support, classes)?;
    let x = &report.equilibrium.values;
    report.jacobian = field.jacobian(x);
    report.eigenvalue_max_real = spectral_abscissa(&report.jacobian);
    report.residual = field.eval_vec(x).iter().fold(0.0, |m, v| m.max(v.abs()));
    if report.eigenvalue_max_real >= -opts.equilibrium.margin {
        return Err(Error::UnstableTarget(report.eigenvalue_max_real));
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventOutcome {
    /// The mutant invaded and the state moved.
    Jump,
    /// The mutant's lineage died out.
    Rejected,
    /// The mutant trait was already present; nothing changes.
    InSupport,
}

impl EventOutcome {
    pub fn as_str(self) -> &'static str {
        match self {
            EventOutcome::Jump => "jump",
            EventOutcome::Rejected => "rejected",
            EventOutcome::InSupport => "in_support",
        }
    }
}

/// A mutation event drawn from a state.
#[derive(Debug, Clone, PartialEq)]
pub struct MutationDraw {
    pub wait: f64,
    pub parent: Trait,
    pub mutant: Trait,
}

/// Waiting time, parent and mutant of the next mutation, or `NoMutation`
/// when the total intensity is zero.
pub fn draw_mutation(params: &ModelParams, state: &PespState, rng: &mut SimRng) -> Result<MutationDraw> {
    let (total, terms) = mutation_intensity(params, state);
    if !(total > 0.0) {
        return Err(Error::NoMutation);
    }
    let wait = exponential(rng, total);
    let parent = state.equilibrium.support[pick_weighted(rng, &terms, total)];
    let space = params.space();
    let row = params.mutation_row(space.index(parent));
    let row_total: f64 = row.iter().sum();
    let mutant = space.trait_at(pick_weighted(rng, row, row_total));
    Ok(MutationDraw { wait, parent, mutant })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PespEvent {
    pub time: f64,
    pub parent: Trait,
    pub mutant: Trait,
    pub outcome: EventOutcome,
    pub lambda_max: Option<f64>,
    pub q: Option<f64>,
    /// State after the event.
    pub state: PespState,
}

impl PespEvent {
    /// One line of the jump log.
    pub fn to_json(&self, space: &TraitSpace) -> serde_json::Value {
        json!({
            "time": self.time,
            "event": self.outcome.as_str(),
            "parent": space.key(self.parent),
            "mutant": space.key(self.mutant),
            "lambda_max": self.lambda_max,
            "q": self.q,
            "support": self.state.support.iter().map(|t| space.key(*t)).collect::<Vec<_>>(),
            "equilibrium": self.state.equilibrium.values,
        })
    }
}

/// Draws and resolves one mutation event.
pub fn pesp_step(
    params: &ModelParams,
    classes: &ClassMap,
    state: &PespState,
    cache: &mut InvasionCache,
    opts: &PespOptions,
    rng: &mut SimRng,
) -> Result<PespEvent> {
    let draw = draw_mutation(params, state, rng)?;
    let time = state.time + draw.wait;
    resolve(params, classes, state, draw, time, cache, opts, rng)
}

#[allow(clippy::too_many_arguments)]
fn resolve(
    params: &ModelParams,
    classes: &ClassMap,
    state: &PespState,
    draw: MutationDraw,
    time: f64,
    cache: &mut InvasionCache,
    opts: &PespOptions,
    rng: &mut SimRng,
) -> Result<PespEvent> {
    let mut next = state.clone();
    next.time = time;
    if state.support.contains(&draw.mutant) {
        return Ok(PespEvent {
            time,
            parent: draw.parent,
            mutant: draw.mutant,
            outcome: EventOutcome::InSupport,
            lambda_max: None,
            q: None,
            state: next,
        });
    }
    let data = cache.get(params, classes, state, draw.mutant)?;
    let accept = uniform(rng) < 1.0 - data.q;
    let outcome = if accept {
        let report = post_invasion_equilibrium(params, classes, state, draw.mutant, cache, opts)?;
        next = state_from_report(params, classes, &report, time, opts)?;
        EventOutcome::Jump
    } else {
        EventOutcome::Rejected
    };
    Ok(PespEvent {
        time,
        parent: draw.parent,
        mutant: draw.mutant,
        outcome,
        lambda_max: Some(data.lambda_max),
        q: Some(data.q),
        state: next,
    })
}

/// Runs the chain to `t_end`. Returns the visited states (initial first);
/// `on_event` sees every mutation event in order.
pub fn simulate_pesp(
    params: &ModelParams,
    classes: &ClassMap,
    state0: PespState,
    t_end: f64,
    opts: &PespOptions,
    rng: &mut SimRng,
    mut on_event: impl FnMut(&PespEvent),
) -> Result<Vec<PespState>> {
    let mut cache = InvasionCache::new();
    let mut chain = vec![state0.clone()];
    let mut state = state0;
    while state.time < t_end {
        let draw = match draw_mutation(params, &state, rng) {
            Ok(d) => d,
            Err(Error::NoMutation) => break,
            Err(e) => return Err(e),
        };
        let time = state.time + draw.wait;
        if time >= t_end {
            break;
        }
        let event = resolve(params, classes, &state, draw, time, &mut cache, opts, rng)?;
        on_event(&event);
        state = event.state;
        if event.outcome == EventOutcome::Jump {
            chain.push(state.clone());
        }
    }
    Ok(chain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::rng::seeded;

    fn example_a_with_mutation() -> ModelParams {
        let mut m = fixtures::example_a();
        m.set_mutation_prob(0, 1.0);
        m.set_mutation_law(Trait::new(0, 0), Trait::new(1, 1), 1.0);
        m
    }

    fn resident_state(m: &ModelParams, classes: &ClassMap) -> PespState {
        let x0 = DensityVector::new(vec![Trait::new(0, 0)], vec![2.0]);
        settle(m, classes, &x0, 0.0, &PespOptions::default()).unwrap()
    }

    #[test]
    fn no_mutation_gives_no_candidates() {
        let m = fixtures::example_a();
        let classes = ClassMap::build(&m).unwrap();
        let s = resident_state(&m, &classes);
        let mut cache = InvasionCache::new();
        assert!(jump_rates(&m, &classes, &s, &mut cache).unwrap().is_empty());
        assert!(matches!(draw_mutation(&m, &s, &mut seeded(0)), Err(Error::NoMutation)));
    }

    #[test]
    fn two_resident_candidate_rate() {
        let m = fixtures::two_resident_with_mutation();
        let classes = ClassMap::build(&m).unwrap();
        let x0 = DensityVector::new(vec![Trait::new(0, 0), Trait::new(0, 1)], vec![1.5, 0.8]);
        let s = settle(&m, &classes, &x0, 0.0, &PespOptions::default()).unwrap();
        let mut cache = InvasionCache::new();
        let cands = jump_rates(&m, &classes, &s, &mut cache).unwrap();
        assert_eq!(cands.len(), 2);
        let spec = build_branching_spec(&m, &classes, &s.equilibrium, Trait::new(1, 2)).unwrap();
        let q = extinction_vector(&spec).unwrap().q[0];
        let c = &cands[0];
        assert_eq!(c.parent, Trait::new(0, 0));
        let want = 3.0 * s.equilibrium.values[0] * (1.0 - q);
        assert!((c.rate - want).abs() < 1e-12 * want);
        assert_eq!(cache.len(), 1);
    }

    #[test]
    fn two_resident_jump_replaces_the_residents() {
        let m = fixtures::two_resident_with_mutation();
        let classes = ClassMap::build(&m).unwrap();
        let x0 = DensityVector::new(vec![Trait::new(0, 0), Trait::new(0, 1)], vec![1.5, 0.8]);
        let s = settle(&m, &classes, &x0, 0.0, &PespOptions::default()).unwrap();
        let mut cache = InvasionCache::new();
        let r = post_invasion_equilibrium(&m, &classes, &s, Trait::new(1, 2), &mut cache, &PespOptions::default())
            .unwrap();
        let v = &r.equilibrium.values;
        assert_eq!(&v[..2], &[0.0, 0.0]);
        assert!((v[2] - 2.608).abs() < 5e-3 && (v[3] - 1.608).abs() < 5e-3);
        assert!((r.eigenvalue_max_real - (-0.95073)).abs() < 1e-3);

        let mut rng = seeded(11);
        let mut jumped = 0;
        for _ in 0..50 {
            let ev = pesp_step(&m, &classes, &s, &mut cache, &PespOptions::default(), &mut rng).unwrap();
            if ev.outcome == EventOutcome::Jump {
                jumped += 1;
                assert_eq!(ev.state.support, vec![Trait::new(1, 2), Trait::new(1, 3)]);
            }
        }
        assert!(jumped > 0);
    }

    #[test]
    fn subcritical_mutants_never_jump() {
        let mut m = example_a_with_mutation();
        // make the mutant class hopeless
        m.set_birth(1, 0.1);
        m.set_birth(2, 0.1);
        let classes = ClassMap::build(&m).unwrap();
        let s = resident_state(&m, &classes);
        let mut cache = InvasionCache::new();
        let cands = jump_rates(&m, &classes, &s, &mut cache).unwrap();
        assert_eq!(cands.len(), 1);
        assert_eq!(cands[0].rate, 0.0);
        let mut rng = seeded(5);
        for _ in 0..10_000 {
            let ev = pesp_step(&m, &classes, &s, &mut cache, &PespOptions::default(), &mut rng).unwrap();
            assert_eq!(ev.outcome, EventOutcome::Rejected);
        }
    }

    #[test]
    fn mutant_already_present_is_a_null_event() {
        let mut m = fixtures::example_a();
        m.set_mutation_prob(0, 1.0);
        m.set_mutation_law(Trait::new(0, 0), Trait::new(0, 0), 1.0);
        let classes = ClassMap::build(&m).unwrap();
        let s = resident_state(&m, &classes);
        let mut cache = InvasionCache::new();
        let ev = pesp_step(&m, &classes, &s, &mut cache, &PespOptions::default(), &mut seeded(1)).unwrap();
        assert_eq!(ev.outcome, EventOutcome::InSupport);
        assert_eq!(ev.state.equilibrium, s.equilibrium);
        assert!(ev.time > 0.0);
    }

    #[test]
    fn chain_edge_cases() {
        let m = example_a_with_mutation();
        let classes = ClassMap::build(&m).unwrap();
        let s = resident_state(&m, &classes);
        let chain = simulate_pesp(&m, &classes, s.clone(), 0.0, &PespOptions::default(), &mut seeded(2), |_| {}).unwrap();
        assert_eq!(chain, vec![s.clone()]);

        let quiet = fixtures::example_a();
        let chain = simulate_pesp(&quiet, &classes, s.clone(), 50.0, &PespOptions::default(), &mut seeded(2), |_| {
            panic!("no events expected")
        })
        .unwrap();
        assert_eq!(chain.len(), 1);
    }
}

//! Statistical checks of the exact simulator against the rate table, the
//! deterministic limit and the branching approximation.

use plasticity::branching::{build_branching_spec, extinction_vector};
use plasticity::fixtures;
use plasticity::lvs::{find_lvs_equilibrium, integrate, EquilibriumOptions, OdeOptions, PlasticField};
use plasticity::micro::{EventKind, MicroSim, RunOutcome};
use plasticity::phenotype_graph::{reachable_traits, ClassMap};
use plasticity::rng::{replicate_stream, seeded};
use plasticity::{DensityVector, ModelParams, PopulationState, Trait, TraitSpace};

fn two_resident_state(k: u64, densities: [f64; 4]) -> (ModelParams, PopulationState) {
    let mut m = fixtures::two_resident();
    m.set_carrying_capacity(k);
    let space = m.space().clone();
    let mut full = vec![0.0; space.n_traits()];
    full[space.index(Trait::new(0, 0))] = densities[0];
    full[space.index(Trait::new(0, 1))] = densities[1];
    full[space.index(Trait::new(1, 2))] = densities[2];
    full[space.index(Trait::new(1, 3))] = densities[3];
    (m, PopulationState::from_densities(&full, k))
}

#[test]
fn event_frequencies_follow_the_rate_table() {
    let (m, state) = two_resident_state(2000, [1.5, 0.8, 0.1, 0.05]);
    let nx = m.space().n_traits();
    let np = m.space().n_phenotypes();
    let slots = 3 + np;
    let mut sim = MicroSim::new(&m, state);
    let mut rng = seeded(2024);
    let mut observed = vec![0u64; nx * slots];
    // running sums of p and p(1-p) per slot give the mean and variance of
    // the observed count under independent categorical draws
    let mut expected = vec![0.0; nx * slots];
    let mut variance = vec![0.0; nx * slots];
    for _ in 0..1_000_000 {
        let r = sim.rates();
        let total = r.total();
        for x in 0..nx {
            let mut row = vec![r.birth_clean(x), r.birth_mutant(x), r.death(x)];
            row.extend((0..np).map(|q| r.switch(x, q)));
            for (s, rate) in row.into_iter().enumerate() {
                let p = rate / total;
                expected[x * slots + s] += p;
                variance[x * slots + s] += p * (1.0 - p);
            }
        }
        let ev = sim.step(&mut rng).unwrap();
        let x = m.space().index(ev.source);
        let s = match ev.kind {
            EventKind::CleanBirth => 0,
            EventKind::MutantBirth(_) => 1,
            EventKind::Death => 2,
            EventKind::Switch(q) => 3 + q,
        };
        observed[x * slots + s] += 1;
    }
    let mut checked = 0;
    for i in 0..nx * slots {
        if expected[i] == 0.0 {
            assert_eq!(observed[i], 0, "impossible event {i} happened");
            continue;
        }
        let z = (observed[i] as f64 - expected[i]) / variance[i].sqrt();
        assert!(z.abs() <= 3.0, "slot {i}: observed {} expected {:.1} (z = {z:.2})", observed[i], expected[i]);
        checked += 1;
    }
    // clean births, deaths and one switch for each of four occupied traits
    assert_eq!(checked, 12);
}

#[test]
fn mean_increment_matches_the_deterministic_flow() {
    let (m, state) = two_resident_state(1000, [1.5, 0.8, 0.2, 0.1]);
    let space = m.space().clone();
    let h = 0.05;
    let n = 20_000u64;
    let x0 = state.densities();
    let mut sum = vec![0.0; x0.len()];
    let mut sum_sq = vec![0.0; x0.len()];
    for i in 0..n {
        let mut sim = MicroSim::new(&m, state.clone());
        let mut rng = replicate_stream(77, i);
        sim.run_until(&mut rng, h, |_| false);
        for (j, (a, b)) in sim.state().densities().iter().zip(&x0).enumerate() {
            let d = a - b;
            sum[j] += d;
            sum_sq[j] += d * d;
        }
    }
    let field = PlasticField::full(&m);
    let flow = integrate(&field, &x0, 0.0, &[h], &OdeOptions::default()).unwrap();
    for j in 0..x0.len() {
        let mean = sum[j] / n as f64;
        let se = ((sum_sq[j] / n as f64 - mean * mean) / n as f64).sqrt();
        let want = flow.states[0][j] - x0[j];
        if x0[j] == 0.0 && want == 0.0 {
            assert_eq!(mean, 0.0);
            continue;
        }
        assert!(
            (mean - want).abs() <= 4.0 * se + 1e-9,
            "{}: mean increment {mean:.5} vs flow {want:.5} (se {se:.1e})",
            space.label(space.trait_at(j))
        );
    }
}

#[test]
fn without_mutation_the_support_stays_reachable() {
    let mut m = fixtures::two_resident_with_mutation();
    m.set_carrying_capacity(500);
    assert_eq!(m.mutation_scaling(), 0.0);
    let classes = ClassMap::build(&m).unwrap();
    let space = m.space().clone();
    let mut full = vec![0.0; space.n_traits()];
    full[space.index(Trait::new(0, 0))] = 1.0;
    let state = PopulationState::from_densities(&full, 500);
    let allowed: Vec<usize> = reachable_traits(&space, &[Trait::new(0, 0)], &classes)
        .unwrap()
        .iter()
        .map(|t| space.index(*t))
        .collect();
    let mut sim = MicroSim::new(&m, state);
    let mut rng = seeded(9);
    let mut total = sim.state().total();
    for _ in 0..200_000 {
        if sim.step(&mut rng).is_err() {
            break;
        }
        let s = sim.state();
        let t = s.total();
        assert!(t.abs_diff(total) <= 1);
        total = t;
        for (x, &c) in s.counts.iter().enumerate() {
            assert!(c == 0 || allowed.contains(&x), "trait {x} appeared without mutation");
        }
    }
}

#[test]
fn monomorphic_density_stays_near_the_fixed_point() {
    let space = TraitSpace::new(vec!["g".into()], vec!["p".into()]).unwrap();
    let mut m = ModelParams::new(space);
    m.set_birth(0, 3.0);
    m.set_death(0, 1.0);
    m.set_competition(0, 0, 1.0);
    m.set_carrying_capacity(10_000);
    let state = PopulationState::from_densities(&[2.0], 10_000);
    let seeds = 100u64;
    let mut inside = 0;
    for seed in 0..seeds {
        let mut sim = MicroSim::new(&m, state.clone());
        let mut rng = replicate_stream(5, seed);
        let outcome = sim.run_until(&mut rng, 20.0, |s| {
            let x = s.density(0);
            !(1.9..=2.1).contains(&x)
        });
        if outcome == RunOutcome::TimeLimit {
            inside += 1;
        }
    }
    assert!(inside * 100 >= 99 * seeds, "{inside}/{seeds} runs stayed in [1.9, 2.1]");
}

/// Mutant class either gone or near the post-invasion equilibrium; the
/// fixation fraction matches the branching survival probability.
#[test]
fn two_resident_invasion_fraction_matches_branching() {
    let k = 2000u64;
    let (m, state) = two_resident_state(k, [1.5, 0.8, 1.0 / k as f64, 0.0]);
    let classes = ClassMap::build(&m).unwrap();
    let space = m.space().clone();
    let residents = vec![Trait::new(0, 0), Trait::new(0, 1)];
    let eq = find_lvs_equilibrium(
        &m,
        &classes,
        &DensityVector::new(residents, vec![1.5, 0.8]),
        &EquilibriumOptions::default(),
    )
    .unwrap();
    let spec = build_branching_spec(&m, &classes, &eq.equilibrium, Trait::new(1, 2)).unwrap();
    let survival = 1.0 - extinction_vector(&spec).unwrap().q[0];

    let class_idx = [space.index(Trait::new(1, 2)), space.index(Trait::new(1, 3))];
    let target = [0.0, 0.0, 2.608, 1.608];
    let order = [
        space.index(Trait::new(0, 0)),
        space.index(Trait::new(0, 1)),
        class_idx[0],
        class_idx[1],
    ];
    let replicates = 2000u64;
    let full_runs = 100u64;
    let threshold = k / 10;
    let mut fixed = 0u64;
    for i in 0..replicates {
        let mut sim = MicroSim::new(&m, state.clone());
        let mut rng = replicate_stream(31, i);
        let class_count = |s: &PopulationState| class_idx.iter().map(|&x| s.counts[x]).sum::<u64>();
        if i < full_runs {
            sim.run_until(&mut rng, 30.0, |s| class_count(s) == 0);
            let s = sim.state();
            if class_count(s) > 0 {
                let d = s.densities();
                let dist = order.iter().zip(target).map(|(&x, t)| (d[x] - t).abs()).fold(0.0, f64::max);
                assert!(dist < 0.15, "replicate {i} ended at distance {dist} from n*");
                fixed += 1;
            }
        } else {
            sim.run_until(&mut rng, 30.0, |s| {
                let c = class_count(s);
                c == 0 || c >= threshold
            });
            if class_count(sim.state()) >= threshold {
                fixed += 1;
            }
        }
    }
    let frac = fixed as f64 / replicates as f64;
    assert!((frac - survival).abs() <= 0.03, "fixation {frac} vs 1-q {survival}");
}

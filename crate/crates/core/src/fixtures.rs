//! Reference models used throughout the tests and shipped as model files.
//!
//! `two_resident` is the two-resident invasion scenario (residents `g:p1`, `g:p2`;
//! mutant genotype `gt` with phenotypes `pt1`, `pt2`). `example_a` and
//! `example_b` are single-resident scenarios whose mutant genotype has two
//! phenotypes with negative apparent fitness in at least one phenotype.

use crate::model::{ModelParams, Trait, TraitSpace};

fn space(genotypes: &[&str], phenotypes: &[&str]) -> TraitSpace {
    TraitSpace::new(
        genotypes.iter().map(|s| s.to_string()).collect(),
        phenotypes.iter().map(|s| s.to_string()).collect(),
    )
    .expect("fixture trait space")
}

/// Phenotypes `p1, p2, pt1, pt2`; genotypes `g, gt`; `K = 2000`, `u_K = 0`.
pub fn two_resident() -> ModelParams {
    let mut m = ModelParams::new(space(&["g", "gt"], &["p1", "p2", "pt1", "pt2"]));
    for (p, b) in [3.0, 3.0, 5.0, 4.0].into_iter().enumerate() {
        m.set_birth(p, b);
        m.set_death(p, 1.0);
        for q in 0..4 {
            m.set_competition(p, q, if p == q { 1.0 } else { 0.7 });
        }
    }
    m.set_switch_natural(0, 0, 1, 1.0);
    m.set_switch_natural(0, 1, 0, 2.0);
    m.set_switch_natural(1, 2, 3, 1.5);
    m.set_switch_natural(1, 3, 2, 2.0);
    m.set_carrying_capacity(2000);
    m
}

/// [`two_resident`] where every birth of genotype `g` mutates to `gt:pt1`.
pub fn two_resident_with_mutation() -> ModelParams {
    let mut m = two_resident();
    m.set_mutation_prob(0, 1.0);
    m.set_mutation_law(Trait::new(0, 0), Trait::new(1, 2), 1.0);
    m.set_mutation_law(Trait::new(0, 1), Trait::new(1, 2), 1.0);
    // rows of the unoccupied g:pt1, g:pt2 keep the law stochastic
    m.set_mutation_law(Trait::new(0, 2), Trait::new(1, 2), 1.0);
    m.set_mutation_law(Trait::new(0, 3), Trait::new(1, 2), 1.0);
    m
}

/// Initial densities of the invasion run: residents at (1.5, 0.8), one mutant `gt:pt1`.
pub fn two_resident_initial() -> Vec<f64> {
    let m = two_resident();
    let k = m.carrying_capacity() as f64;
    let mut init = vec![0.0; m.space().n_traits()];
    init[0] = 1.5;
    init[1] = 0.8;
    init[m.space().index(Trait::new(1, 2))] = 1.0 / k;
    init
}

fn single_resident(back_switch: f64) -> ModelParams {
    let mut m = ModelParams::new(space(&["g", "gt"], &["p", "pt1", "pt2"]));
    m.set_birth(0, 3.0);
    m.set_birth(1, 2.0);
    m.set_birth(2, 4.0);
    for p in 0..3 {
        m.set_death(p, 1.0);
    }
    let c = [[1.0, 1.0, 0.7], [1.0, 1.0, 0.5], [0.7, 0.5, 1.0]];
    for (p, row) in c.iter().enumerate() {
        for (q, &v) in row.iter().enumerate() {
            m.set_competition(p, q, v);
        }
    }
    m.set_switch_natural(1, 1, 2, 2.0);
    m.set_switch_natural(1, 2, 1, back_switch);
    m.set_carrying_capacity(1000);
    m
}

/// Weak back-switch `pt2 -> pt1` (0.6); `K = 1000`.
pub fn example_a() -> ModelParams {
    single_resident(0.6)
}

/// Strong back-switch `pt2 -> pt1` (2.0); `K = 1000`.
pub fn example_b() -> ModelParams {
    single_resident(2.0)
}

/// Resident `g:p` at 2, one mutant `gt:pt1`.
pub fn single_resident_initial(k: u64) -> Vec<f64> {
    vec![2.0, 0.0, 0.0, 0.0, 1.0 / k as f64, 0.0]
}

//! Trait space, model parameters and population states.
//!
//! A trait is a (genotype, phenotype) pair. Traits are totally ordered
//! genotype-major: the trait `(g, p)` has index `g * |P| + p`, so every
//! trait-indexed vector in the crate uses the same layout.

use std::collections::HashSet;
use std::fmt;

use crate::error::{Error, Result};

/// A (genotype, phenotype) pair, by index into the [`TraitSpace`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Trait {
    pub genotype: usize,
    pub phenotype: usize,
}

impl Trait {
    pub const fn new(genotype: usize, phenotype: usize) -> Self {
        Self { genotype, phenotype }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraitSpace {
    genotypes: Vec<String>,
    phenotypes: Vec<String>,
}

impl TraitSpace {
    pub fn new(genotypes: Vec<String>, phenotypes: Vec<String>) -> Result<Self> {
        for (kind, ids) in [("genotype", &genotypes), ("phenotype", &phenotypes)] {
            if ids.is_empty() {
                return Err(Error::InvalidTraitSpace(format!("no {kind}s")));
            }
            let mut seen = HashSet::new();
            for id in ids {
                if id.is_empty() || id.contains(',') || id.contains(':') {
                    return Err(Error::InvalidTraitSpace(format!(
                        "{kind} identifier `{id}` must be non-empty without ',' or ':'"
                    )));
                }
                if !seen.insert(id.as_str()) {
                    return Err(Error::InvalidTraitSpace(format!("duplicate {kind} `{id}`")));
                }
            }
        }
        Ok(Self {
            genotypes,
            phenotypes,
        })
    }

    pub fn genotypes(&self) -> &[String] {
        &self.genotypes
    }

    pub fn phenotypes(&self) -> &[String] {
        &self.phenotypes
    }

    pub fn n_genotypes(&self) -> usize {
        self.genotypes.len()
    }

    pub fn n_phenotypes(&self) -> usize {
        self.phenotypes.len()
    }

    pub fn n_traits(&self) -> usize {
        self.genotypes.len() * self.phenotypes.len()
    }

    pub fn index(&self, t: Trait) -> usize {
        t.genotype * self.phenotypes.len() + t.phenotype
    }

    pub fn trait_at(&self, index: usize) -> Trait {
        let np = self.phenotypes.len();
        Trait::new(index / np, index % np)
    }

    pub fn check(&self, t: Trait) -> Result<()> {
        if t.genotype < self.n_genotypes() && t.phenotype < self.n_phenotypes() {
            Ok(())
        } else {
            Err(Error::TraitOutOfRange(
                t.genotype * self.n_phenotypes() + t.phenotype,
            ))
        }
    }

    /// All traits in index order.
    pub fn traits(&self) -> impl Iterator<Item = Trait> + '_ {
        (0..self.n_traits()).map(move |i| self.trait_at(i))
    }

    pub fn genotype_index(&self, id: &str) -> Result<usize> {
        self.genotypes
            .iter()
            .position(|g| g == id)
            .ok_or_else(|| Error::UnknownGenotype(id.to_string()))
    }

    pub fn phenotype_index(&self, id: &str) -> Result<usize> {
        self.phenotypes
            .iter()
            .position(|p| p == id)
            .ok_or_else(|| Error::UnknownPhenotype(id.to_string()))
    }

    /// Parses `"g,p"` into a trait.
    pub fn parse_trait(&self, s: &str) -> Result<Trait> {
        let (g, p) = s
            .split_once(',')
            .ok_or_else(|| Error::MalformedTrait(s.to_string()))?;
        Ok(Trait::new(
            self.genotype_index(g.trim())?,
            self.phenotype_index(p.trim())?,
        ))
    }

    /// Parses `"p,q"` into a phenotype pair.
    pub fn parse_phenotype_pair(&self, s: &str) -> Result<(usize, usize)> {
        let (a, b) = s
            .split_once(',')
            .ok_or_else(|| Error::MalformedTrait(s.to_string()))?;
        Ok((
            self.phenotype_index(a.trim())?,
            self.phenotype_index(b.trim())?,
        ))
    }

    /// `"g:p"`, the column label used in trajectory files.
    pub fn label(&self, t: Trait) -> String {
        format!("{}:{}", self.genotypes[t.genotype], self.phenotypes[t.phenotype])
    }

    /// `"g,p"`, the key format of model files.
    pub fn key(&self, t: Trait) -> String {
        format!("{},{}", self.genotypes[t.genotype], self.phenotypes[t.phenotype])
    }
}

/// Rate kernels, mutation law and scaling of one model.
///
/// Diagonal switch entries are forced to zero: setters ignore writes with
/// equal source and target phenotypes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    space: TraitSpace,
    birth: Vec<f64>,
    death: Vec<f64>,
    // [p * np + q]
    competition: Vec<f64>,
    // [g][p * np + q]
    switch_nat: Vec<Vec<f64>>,
    // [g][(p * np + q) * np + inducer]
    switch_ind: Vec<Vec<f64>>,
    mutation_prob: Vec<f64>,
    // [from * nx + to]
    mutation_law: Vec<f64>,
    carrying_capacity: u64,
    mutation_scaling: f64,
}

impl ModelParams {
    /// All-zero parameters with `K = 1` and `u_K = 0`.
    pub fn new(space: TraitSpace) -> Self {
        let ng = space.n_genotypes();
        let np = space.n_phenotypes();
        let nx = space.n_traits();
        Self {
            birth: vec![0.0; np],
            death: vec![0.0; np],
            competition: vec![0.0; np * np],
            switch_nat: vec![vec![0.0; np * np]; ng],
            switch_ind: vec![vec![0.0; np * np * np]; ng],
            mutation_prob: vec![0.0; ng],
            mutation_law: vec![0.0; nx * nx],
            carrying_capacity: 1,
            mutation_scaling: 0.0,
            space,
        }
    }

    pub fn space(&self) -> &TraitSpace {
        &self.space
    }

    fn np(&self) -> usize {
        self.space.n_phenotypes()
    }

    pub fn birth(&self, p: usize) -> f64 {
        self.birth[p]
    }

    pub fn death(&self, p: usize) -> f64 {
        self.death[p]
    }

    pub fn competition(&self, p: usize, q: usize) -> f64 {
        self.competition[p * self.np() + q]
    }

    pub fn switch_natural(&self, g: usize, from: usize, to: usize) -> f64 {
        self.switch_nat[g][from * self.np() + to]
    }

    pub fn switch_induced(&self, g: usize, from: usize, to: usize, inducer: usize) -> f64 {
        let np = self.np();
        self.switch_ind[g][(from * np + to) * np + inducer]
    }

    /// True when genotype `g` has any induced switching at all.
    pub fn has_induced_switching(&self, g: usize) -> bool {
        self.switch_ind[g].iter().any(|&r| r != 0.0)
    }

    pub fn mutation_prob(&self, g: usize) -> f64 {
        self.mutation_prob[g]
    }

    pub fn mutation_law(&self, from: Trait, to: Trait) -> f64 {
        let nx = self.space.n_traits();
        self.mutation_law[self.space.index(from) * nx + self.space.index(to)]
    }

    /// Row of the mutation law for parent trait index `from`, over target trait indices.
    pub fn mutation_row(&self, from: usize) -> &[f64] {
        let nx = self.space.n_traits();
        &self.mutation_law[from * nx..(from + 1) * nx]
    }

    pub fn carrying_capacity(&self) -> u64 {
        self.carrying_capacity
    }

    pub fn mutation_scaling(&self) -> f64 {
        self.mutation_scaling
    }

    pub fn set_birth(&mut self, p: usize, rate: f64) {
        self.birth[p] = rate;
    }

    pub fn set_death(&mut self, p: usize, rate: f64) {
        self.death[p] = rate;
    }

    pub fn set_competition(&mut self, p: usize, q: usize, value: f64) {
        let np = self.np();
        self.competition[p * np + q] = value;
    }

    pub fn set_switch_natural(&mut self, g: usize, from: usize, to: usize, rate: f64) {
        if from != to {
            let np = self.np();
            self.switch_nat[g][from * np + to] = rate;
        }
    }

    pub fn set_switch_induced(&mut self, g: usize, from: usize, to: usize, inducer: usize, rate: f64) {
        if from != to {
            let np = self.np();
            self.switch_ind[g][(from * np + to) * np + inducer] = rate;
        }
    }

    pub fn set_mutation_prob(&mut self, g: usize, prob: f64) {
        self.mutation_prob[g] = prob;
    }

    pub fn set_mutation_law(&mut self, from: Trait, to: Trait, prob: f64) {
        let nx = self.space.n_traits();
        let (i, j) = (self.space.index(from), self.space.index(to));
        self.mutation_law[i * nx + j] = prob;
    }

    pub fn set_carrying_capacity(&mut self, k: u64) {
        self.carrying_capacity = k;
    }

    pub fn set_mutation_scaling(&mut self, u_k: f64) {
        self.mutation_scaling = u_k;
    }

    /// Copy of these parameters with every mutation probability set to zero.
    pub fn without_mutation(&self) -> Self {
        let mut p = self.clone();
        p.mutation_prob.iter_mut().for_each(|m| *m = 0.0);
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    NegativeRate,
    NonFinite,
    ProbabilityOutOfRange,
    MutationLawNotStochastic,
    InducedWithoutNatural,
    ZeroCarryingCapacity,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, serde::Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        match self.violations.first() {
            None => Ok(()),
            Some(v) => Err(Error::InvalidModel {
                count: self.violations.len(),
                first: v.message.clone(),
            }),
        }
    }

    fn push(&mut self, kind: ViolationKind, message: String) {
        self.violations.push(Violation { kind, message });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            write!(f, "valid")?;
        }
        for v in &self.violations {
            writeln!(f, "{:?}: {}", v.kind, v.message)?;
        }
        Ok(())
    }
}

/// Tolerance on mutation-law row sums.
const ROW_SUM_TOL: f64 = 1e-9;

/// Checks every parameter invariant and reports all violations found.
pub fn validate_model(params: &ModelParams) -> ValidationReport {
    let mut report = ValidationReport::default();
    let space = params.space();
    let pn = |p: usize| space.phenotypes()[p].as_str();
    let gn = |g: usize| space.genotypes()[g].as_str();

    let rate = |report: &mut ValidationReport, what: String, v: f64| {
        if !v.is_finite() {
            report.push(ViolationKind::NonFinite, format!("{what} is not finite"));
        } else if v < 0.0 {
            report.push(ViolationKind::NegativeRate, format!("{what} = {v} is negative"));
        }
    };

    let np = space.n_phenotypes();
    for p in 0..np {
        rate(&mut report, format!("birth({})", pn(p)), params.birth(p));
        rate(&mut report, format!("death({})", pn(p)), params.death(p));
        for q in 0..np {
            rate(
                &mut report,
                format!("competition({},{})", pn(p), pn(q)),
                params.competition(p, q),
            );
        }
    }

    for g in 0..space.n_genotypes() {
        for p in 0..np {
            for q in 0..np {
                let nat = params.switch_natural(g, p, q);
                rate(
                    &mut report,
                    format!("switch_natural[{}]({},{})", gn(g), pn(p), pn(q)),
                    nat,
                );
                for r in 0..np {
                    let ind = params.switch_induced(g, p, q, r);
                    rate(
                        &mut report,
                        format!("switch_induced[{}]({},{})({})", gn(g), pn(p), pn(q), pn(r)),
                        ind,
                    );
                    if nat == 0.0 && ind != 0.0 {
                        report.push(
                            ViolationKind::InducedWithoutNatural,
                            format!(
                                "induced switch without natural switch: genotype {} {}->{} induced by {}",
                                gn(g),
                                pn(p),
                                pn(q),
                                pn(r)
                            ),
                        );
                    }
                }
            }
        }
        let m = params.mutation_prob(g);
        if !(0.0..=1.0).contains(&m) {
            report.push(
                ViolationKind::ProbabilityOutOfRange,
                format!("mutation_prob({}) = {m} outside [0,1]", gn(g)),
            );
        }
    }

    let nx = space.n_traits();
    for i in 0..nx {
        let from = space.trait_at(i);
        let row = params.mutation_row(i);
        for (j, &v) in row.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                report.push(
                    ViolationKind::ProbabilityOutOfRange,
                    format!(
                        "mutation_law({} -> {}) = {v} outside [0,1]",
                        space.key(from),
                        space.key(space.trait_at(j))
                    ),
                );
            }
        }
        if params.mutation_prob(from.genotype) > 0.0 {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                report.push(
                    ViolationKind::MutationLawNotStochastic,
                    format!(
                        "mutation law row not stochastic: row {} sums to {sum}",
                        space.key(from)
                    ),
                );
            }
        }
    }

    let u = params.mutation_scaling();
    if !(0.0..=1.0).contains(&u) {
        report.push(
            ViolationKind::ProbabilityOutOfRange,
            format!("u_K = {u} outside [0,1]"),
        );
    }
    let k = params.carrying_capacity();
    if k == 0 {
        report.push(
            ViolationKind::ZeroCarryingCapacity,
            "carrying capacity K must be positive".into(),
        );
    } else if u > 0.0 {
        let kf = k as f64;
        if u * kf * kf.ln() >= 1.0 {
            report.warnings.push(format!(
                "u_K*K*ln(K) = {:.3} >= 1: mutations are not rare relative to invasion times",
                u * kf * kf.ln()
            ));
        }
    }
    report
}

/// Integer counts per trait; densities are counts divided by `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationState {
    pub counts: Vec<u64>,
    pub carrying_capacity: u64,
    pub time: f64,
}

impl PopulationState {
    pub fn empty(space: &TraitSpace, carrying_capacity: u64) -> Self {
        Self {
            counts: vec![0; space.n_traits()],
            carrying_capacity,
            time: 0.0,
        }
    }

    /// Counts `round(density * K)` for every trait of a full-length density vector.
    pub fn from_densities(densities: &[f64], carrying_capacity: u64) -> Self {
        let k = carrying_capacity as f64;
        Self {
            counts: densities.iter().map(|&d| (d * k).round().max(0.0) as u64).collect(),
            carrying_capacity,
            time: 0.0,
        }
    }

    pub fn density(&self, trait_index: usize) -> f64 {
        self.counts[trait_index] as f64 / self.carrying_capacity as f64
    }

    pub fn densities(&self) -> Vec<f64> {
        let k = self.carrying_capacity as f64;
        self.counts.iter().map(|&c| c as f64 / k).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn phenotype_marginal(&self, space: &TraitSpace) -> Vec<f64> {
        phenotype_marginal(space, &self.densities())
    }
}

/// Nonnegative densities on an ordered set of traits.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityVector {
    pub support: Vec<Trait>,
    pub values: Vec<f64>,
}

impl DensityVector {
    pub fn new(support: Vec<Trait>, values: Vec<f64>) -> Self {
        assert_eq!(support.len(), values.len(), "support/value length mismatch");
        Self { support, values }
    }

    pub fn zeros(support: Vec<Trait>) -> Self {
        let n = support.len();
        Self::new(support, vec![0.0; n])
    }

    /// Density vector over the whole trait space, in trait order.
    pub fn from_full(space: &TraitSpace, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), space.n_traits());
        Self::new(space.traits().collect(), values)
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn get(&self, t: Trait) -> f64 {
        self.support
            .iter()
            .position(|&s| s == t)
            .map_or(0.0, |i| self.values[i])
    }

    /// Embeds into a full trait-indexed vector, zero outside the support.
    pub fn to_full(&self, space: &TraitSpace) -> Vec<f64> {
        let mut full = vec![0.0; space.n_traits()];
        for (t, v) in self.support.iter().zip(&self.values) {
            full[space.index(*t)] = *v;
        }
        full
    }

    /// Restriction of a full trait-indexed vector to `support`.
    pub fn restrict(space: &TraitSpace, full: &[f64], support: &[Trait]) -> Self {
        Self::new(
            support.to_vec(),
            support.iter().map(|t| full[space.index(*t)]).collect(),
        )
    }

    pub fn phenotype_marginal(&self, space: &TraitSpace) -> Vec<f64> {
        let mut m = vec![0.0; space.n_phenotypes()];
        for (t, v) in self.support.iter().zip(&self.values) {
            m[t.phenotype] += v;
        }
        m
    }
}

/// Sums a full trait-indexed density vector over genotypes.
pub fn phenotype_marginal(space: &TraitSpace, densities: &[f64]) -> Vec<f64> {
    let np = space.n_phenotypes();
    let mut m = vec![0.0; np];
    for (i, v) in densities.iter().enumerate() {
        m[i % np] += v;
    }
    m
}

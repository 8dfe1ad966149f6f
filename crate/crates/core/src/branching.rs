//! Multi-type branching approximation of a rare mutant class in a frozen
//! resident background.
//!
//! An individual of phenotype `p̃_i` in the mutant class gives birth at rate
//! `b_i`, dies at rate `D_i` (natural death plus competition from the
//! residents) and switches to `p̃_j` at rate `S_ij`. The generator is
//! `A_ii = b_i - D_i - sum_j S_ij`, `A_ij = S_ij` (row `i` holds the rates
//! out of phenotype `i`). Extinction probabilities `q` solve `u(q) = 0` with
//!
//! ```text
//! u_i(y) = b_i y_i^2 + sum_j S_ij y_j + D_i - (b_i + sum_j S_ij + D_i) y_i.
//! ```

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{expm, norm_inf, spectral_abscissa};
use crate::model::{DensityVector, ModelParams, Trait};
use crate::phenotype_graph::ClassMap;
use crate::rng::{pick_weighted, SimRng};

/// `|λ_max|` at or below this is treated as critical (`q = 1`).
pub const CRITICAL_BAND: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct BranchingSpec {
    pub genotype: usize,
    pub class_phenotypes: Vec<usize>,
    pub birth: Vec<f64>,
    pub death_total: Vec<f64>,
    /// Zero diagonal.
    pub switch: DMatrix<f64>,
}

impl BranchingSpec {
    pub fn new(
        genotype: usize,
        class_phenotypes: Vec<usize>,
        birth: Vec<f64>,
        death_total: Vec<f64>,
        mut switch: DMatrix<f64>,
    ) -> Self {
        let k = class_phenotypes.len();
        assert!(k >= 1, "empty mutant class");
        assert!(birth.len() == k && death_total.len() == k, "rate vectors must have one entry per phenotype");
        assert!(switch.nrows() == k && switch.ncols() == k, "switch matrix must be k x k");
        for i in 0..k {
            switch[(i, i)] = 0.0;
        }
        assert!(
            birth.iter().chain(&death_total).chain(switch.iter()).all(|v| v.is_finite() && *v >= 0.0),
            "branching rates must be finite and nonnegative"
        );
        Self {
            genotype,
            class_phenotypes,
            birth,
            death_total,
            switch,
        }
    }

    pub fn k(&self) -> usize {
        self.class_phenotypes.len()
    }

    pub fn traits(&self) -> Vec<Trait> {
        self.class_phenotypes.iter().map(|&p| Trait::new(self.genotype, p)).collect()
    }

    /// Position of phenotype `p` in the class ordering.
    pub fn position(&self, p: usize) -> Option<usize> {
        self.class_phenotypes.iter().position(|&q| q == p)
    }

    fn switch_out(&self, i: usize) -> f64 {
        self.switch.row(i).sum()
    }

    /// Same spec with every rate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(
            self.genotype,
            self.class_phenotypes.clone(),
            self.birth.iter().map(|v| v * factor).collect(),
            self.death_total.iter().map(|v| v * factor).collect(),
            &self.switch * factor,
        )
    }
}

/// Rates of the mutant class of `mutant` against residents frozen at `resident_eq`.
pub fn build_branching_spec(
    params: &ModelParams,
    classes: &ClassMap,
    resident_eq: &DensityVector,
    mutant: Trait,
) -> Result<BranchingSpec> {
    let space = params.space();
    space.check(mutant)?;
    let class = classes.class_of(mutant).to_vec();
    let g = mutant.genotype;
    if resident_eq
        .support
        .iter()
        .any(|t| t.genotype == g && class.contains(&t.phenotype))
    {
        return Err(Error::MutantInResidentClass(space.label(mutant)));
    }
    let marginal = resident_eq.phenotype_marginal(space);
    let np = space.n_phenotypes();
    let k = class.len();
    let birth = class.iter().map(|&p| params.birth(p)).collect();
    let death_total = class
        .iter()
        .map(|&p| params.death(p) + (0..np).map(|r| params.competition(p, r) * marginal[r]).sum::<f64>())
        .collect();
    let switch = DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            return 0.0;
        }
        let (pi, pj) = (class[i], class[j]);
        params.switch_natural(g, pi, pj)
            + (0..np)
                .map(|r| params.switch_induced(g, pi, pj, r) * marginal[r])
                .sum::<f64>()
    });
    Ok(BranchingSpec::new(g, class, birth, death_total, switch))
}

pub fn generator_matrix(spec: &BranchingSpec) -> DMatrix<f64> {
    let k = spec.k();
    DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            spec.birth[i] - spec.death_total[i] - spec.switch_out(i)
        } else {
            spec.switch[(i, j)]
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerronPair {
    pub lambda: f64,
    /// Right eigenvector, positive, sums to one.
    pub v: Vec<f64>,
    /// Left eigenvector, positive, sums to one. With `A_ij` the rate from
    /// type `i` to type `j`, expected counts evolve as `n' = n A`, so this is
    /// the type composition a surviving population settles into.
    pub u: Vec<f64>,
}

/// Power iteration on the nonnegative matrix `b`; returns the Rayleigh
/// quotient and the iterate normalized to sum one.
fn power_iteration(b: &DMatrix<f64>, scale: f64) -> Result<(f64, DVector<f64>)> {
    let k = b.nrows();
    let mut v = DVector::from_element(k, 1.0 / k as f64);
    for _ in 0..1_000_000 {
        let w = b * &v;
        let mu = v.dot(&w) / v.dot(&v);
        let residual = (&w - &v * mu).amax();
        let s = w.sum();
        if !(s > 0.0) {
            break;
        }
        v = w / s;
        if residual <= 1e-14 * scale {
            return Ok((mu, v));
        }
    }
    Err(Error::IterationLimit(1_000_000))
}

/// Rightmost eigenvalue and the right and left eigenvectors of a Metzler
/// matrix, by power iteration on `A + σI` with `σ = max |A_ii| + 1`.
pub fn perron_root(a: &DMatrix<f64>) -> Result<PerronPair> {
    let k = a.nrows();
    assert!(k >= 1 && a.ncols() == k, "perron_root needs a nonempty square matrix");
    if k == 1 {
        return Ok(PerronPair {
            lambda: a[(0, 0)],
            v: vec![1.0],
            u: vec![1.0],
        });
    }
    let sigma = (0..k).map(|i| a[(i, i)].abs()).fold(0.0, f64::max) + 1.0;
    let b = a + DMatrix::identity(k, k) * sigma;
    let scale = norm_inf(&b);
    let (mu, v) = power_iteration(&b, scale)?;
    let (_, u) = power_iteration(&b.transpose(), scale)?;
    let lambda = mu - sigma;
    let vmin = v.min().min(u.min());
    if vmin <= 1e-12 {
        return Err(Error::NonIrreducible(vmin));
    }
    let dense = spectral_abscissa(a);
    if (dense - lambda).abs() > 1e-8 * norm_inf(a).max(1.0) {
        return Err(Error::EigenMismatch { power: lambda, dense });
    }
    Ok(PerronPair {
        lambda,
        v: v.iter().copied().collect(),
        u: u.iter().copied().collect(),
    })
}

/// `u(y)` from the module docs, evaluated as
/// `(1 - y_i)(D_i - b_i y_i) + sum_j S_ij (y_j - y_i)`, which keeps its
/// rounding error proportional to the distance from `y = 1`.
pub fn generating_residual(spec: &BranchingSpec, y: &[f64]) -> Vec<f64> {
    (0..spec.k())
        .map(|i| {
            let (b, d) = (spec.birth[i], spec.death_total[i]);
            let switching: f64 = (0..spec.k()).map(|j| spec.switch[(i, j)] * (y[j] - y[i])).sum();
            (1.0 - y[i]) * (d - b * y[i]) + switching
        })
        .collect()
}

/// Iterates `y_i <- (b_i y_i^2 + sum_j S_ij y_j + D_i) / (b_i + sum_j S_ij + D_i)` from `y = 0`.
pub struct FixedPointIterates<'a> {
    spec: &'a BranchingSpec,
    y: Vec<f64>,
}

impl Iterator for FixedPointIterates<'_> {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        let spec = self.spec;
        let y = &self.y;
        let next: Vec<f64> = (0..spec.k())
            .map(|i| {
                let (b, d, s) = (spec.birth[i], spec.death_total[i], spec.switch_out(i));
                let total = b + s + d;
                if total == 0.0 {
                    // inert type: never dies
                    return 0.0;
                }
                let inflow: f64 = (0..spec.k()).map(|j| spec.switch[(i, j)] * y[j]).sum();
                (b * y[i] * y[i] + inflow + d) / total
            })
            .collect();
        self.y = next.clone();
        Some(next)
    }
}

pub fn fixed_point_iterates(spec: &BranchingSpec) -> FixedPointIterates<'_> {
    FixedPointIterates {
        spec,
        y: vec![0.0; spec.k()],
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtinctionVector {
    pub q: Vec<f64>,
    pub supercritical: bool,
    pub lambda_max: f64,
}

pub const DEFAULT_ITERATION_CAP: usize = 1_000_000;

pub fn extinction_vector(spec: &BranchingSpec) -> Result<ExtinctionVector> {
    extinction_vector_with_cap(spec, DEFAULT_ITERATION_CAP)
}

pub fn extinction_vector_with_cap(spec: &BranchingSpec, cap: usize) -> Result<ExtinctionVector> {
    let k = spec.k();
    let lambda_max = perron_root(&generator_matrix(spec))?.lambda;
    if lambda_max <= CRITICAL_BAND {
        return Ok(ExtinctionVector {
            q: vec![1.0; k],
            supercritical: false,
            lambda_max,
        });
    }
    let mut y = vec![0.0; k];
    let mut done = false;
    for (n, next) in fixed_point_iterates(spec).take(cap).enumerate() {
        let step = next.iter().zip(&y).fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()));
        y = next;
        if step <= 1e-12 {
            done = true;
            break;
        }
        // near criticality the contraction factor approaches 1
        if (n + 1) % NEWTON_HANDOFF == 0 {
            if let Some(z) = monotone_newton(spec, &y) {
                y = z;
                done = true;
                break;
            }
        }
    }
    if !done {
        return Err(Error::IterationLimit(cap));
    }
    newton_polish(spec, &mut y);
    Ok(ExtinctionVector {
        q: y,
        supercritical: true,
        lambda_max,
    })
}

/// Iterations of the fixed-point map between attempts to finish with Newton.
const NEWTON_HANDOFF: usize = 10_000;

fn residual_jacobian(spec: &BranchingSpec, y: &[f64]) -> DMatrix<f64> {
    let k = spec.k();
    DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            2.0 * spec.birth[i] * y[i] - (spec.birth[i] + spec.switch_out(i) + spec.death_total[i])
        } else {
            spec.switch[(i, j)]
        }
    })
}

/// Newton's method from a point below the minimal root. For this convex
/// system the iterates increase monotonically to the minimal root; any
/// decrease or exit from `[0, 1)` abandons the attempt.
fn monotone_newton(spec: &BranchingSpec, y0: &[f64]) -> Option<Vec<f64>> {
    let k = spec.k();
    let mut y = y0.to_vec();
    for _ in 0..200 {
        let u = generating_residual(spec, &y);
        let delta = residual_jacobian(spec, &y)
            .lu()
            .solve(&DVector::from_iterator(k, u.iter().map(|v| -v)))?;
        let next: Vec<f64> = y.iter().zip(delta.iter()).map(|(a, d)| a + d).collect();
        if next.iter().zip(&y).any(|(n, o)| *n < o - 1e-14 || !(*n < 1.0)) {
            return None;
        }
        let step = delta.amax();
        y = next;
        if step <= 1e-15 {
            return Some(y);
        }
    }
    None
}

fn newton_polish(spec: &BranchingSpec, y: &mut [f64]) {
    let k = spec.k();
    let sup = |v: &[f64]| v.iter().fold(0.0, |m: f64, x| m.max(x.abs()));
    let mut residual = sup(&generating_residual(spec, y));
    for _ in 0..5 {
        let u = generating_residual(spec, y);
        let Some(delta) = residual_jacobian(spec, y).lu().solve(&DVector::from_iterator(k, u.iter().map(|v| -v))) else {
            return;
        };
        let trial: Vec<f64> = y.iter().zip(delta.iter()).map(|(a, d)| a + d).collect();
        if trial.iter().any(|&v| !(0.0..1.0).contains(&v)) {
            return;
        }
        let r = sup(&generating_residual(spec, &trial));
        if !(r < residual) {
            return;
        }
        y.copy_from_slice(&trial);
        residual = r;
    }
}

/// Survival probability of a single mutant `mutant` (its own phenotype first).
pub fn invasion_probability(
    params: &ModelParams,
    classes: &ClassMap,
    resident_eq: &DensityVector,
    mutant: Trait,
) -> Result<f64> {
    let spec = build_branching_spec(params, classes, resident_eq, mutant)?;
    let ev = extinction_vector(&spec)?;
    let i = spec.position(mutant.phenotype).expect("mutant phenotype is in its own class");
    Ok(1.0 - ev.q[i])
}

/// `exp(A t)`.
pub fn mean_matrix(spec: &BranchingSpec, t: f64) -> DMatrix<f64> {
    assert!(t >= 0.0, "mean matrix needs t >= 0");
    expm(&(generator_matrix(spec) * t))
}

/// Everything reported for one mutant class.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchingAnalysis {
    pub spec: BranchingSpec,
    pub matrix: DMatrix<f64>,
    pub lambda_max: f64,
    pub v: Vec<f64>,
    /// Limiting type composition (left eigenvector).
    pub u: Vec<f64>,
    pub q: Vec<f64>,
}

impl BranchingAnalysis {
    pub fn invasion_probability(&self) -> Vec<f64> {
        self.q.iter().map(|q| 1.0 - q).collect()
    }
}

pub fn analyze(spec: BranchingSpec) -> Result<BranchingAnalysis> {
    let matrix = generator_matrix(&spec);
    let pair = perron_root(&matrix)?;
    let ev = extinction_vector(&spec)?;
    Ok(BranchingAnalysis {
        spec,
        matrix,
        lambda_max: pair.lambda,
        v: pair.v,
        u: pair.u,
        q: ev.q,
    })
}

/// Runs the embedded jump chain of the branching process (event times are
/// not needed) from one individual of class position
/// `start` until the total reaches `target` (returns the type counts then)
/// or the population dies out (`None`).
pub fn simulate_branching(spec: &BranchingSpec, start: usize, target: u64, rng: &mut SimRng) -> Option<Vec<u64>> {
    let k = spec.k();
    let mut counts = vec![0u64; k];
    counts[start] = 1;
    let mut total = 1u64;
    // per-individual event rates: birth, death, then switches to each j
    let per_type: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            let mut r = vec![spec.birth[i], spec.death_total[i]];
            r.extend((0..k).map(|j| spec.switch[(i, j)]));
            r
        })
        .collect();
    let per_type_total: Vec<f64> = per_type.iter().map(|r| r.iter().sum()).collect();
    let mut weights = vec![0.0; k];
    while total > 0 && total < target {
        for i in 0..k {
            weights[i] = counts[i] as f64 * per_type_total[i];
        }
        let sum: f64 = weights.iter().sum();
        if sum == 0.0 {
            // nothing can happen: the population is frozen below the target
            return None;
        }
        let i = pick_weighted(rng, &weights, sum);
        let e = pick_weighted(rng, &per_type[i], per_type_total[i]);
        match e {
            0 => {
                counts[i] += 1;
                total += 1;
            }
            1 => {
                counts[i] -= 1;
                total -= 1;
            }
            s => {
                counts[i] -= 1;
                counts[s - 2] += 1;
            }
        }
    }
    (total >= target).then_some(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use proptest::prelude::*;

    fn spec2(b: [f64; 2], d: [f64; 2], s12: f64, s21: f64) -> BranchingSpec {
        BranchingSpec::new(
            1,
            vec![1, 2],
            b.to_vec(),
            d.to_vec(),
            DMatrix::from_row_slice(2, 2, &[0.0, s12, s21, 0.0]),
        )
    }

    fn two_resident_resident_eq() -> DensityVector {
        DensityVector::new(vec![Trait::new(0, 0), Trait::new(0, 1)], vec![1.50709, 0.80868])
    }

    #[test]
    fn two_resident_mutant_spec() {
        let m = fixtures::two_resident();
        let classes = ClassMap::build(&m).unwrap();
        let spec = build_branching_spec(&m, &classes, &two_resident_resident_eq(), Trait::new(1, 2)).unwrap();
        assert_eq!(spec.class_phenotypes, vec![2, 3]);
        assert_eq!(spec.birth, vec![5.0, 4.0]);
        // 1 + 0.7 * (1.50709 + 0.80868)
        let d = 1.0 + 0.7 * (1.50709 + 0.80868);
        assert!(spec.death_total.iter().all(|x| (x - d).abs() < 1e-12));
        assert!((d - 2.621).abs() < 1e-3);
        assert_eq!(spec.switch, DMatrix::from_row_slice(2, 2, &[0.0, 1.5, 2.0, 0.0]));
    }

    #[test]
    fn example_a_spec_and_matrix() {
        let m = fixtures::example_a();
        let classes = ClassMap::build(&m).unwrap();
        let eq = DensityVector::new(vec![Trait::new(0, 0)], vec![2.0]);
        let spec = build_branching_spec(&m, &classes, &eq, Trait::new(1, 2)).unwrap();
        assert_eq!(spec.birth, vec![2.0, 4.0]);
        assert_eq!(spec.death_total, vec![3.0, 2.4]);
        let a = generator_matrix(&spec);
        let want = DMatrix::from_row_slice(2, 2, &[-3.0, 2.0, 0.6, 1.0]);
        assert!((&a - want).amax() < 1e-12);

        // 2x2 closed forms: λ from the characteristic polynomial, then
        // v2/v1 = (λ - a11)/a12 and u2/u1 = (λ - a11)/a21
        let lambda = (-2.0 + (16.0f64 + 4.0 * 1.2).sqrt()) / 2.0;
        let p = perron_root(&a).unwrap();
        assert!((p.lambda - lambda).abs() < 1e-12);
        let rv = (lambda + 3.0) / 2.0;
        let ru = (lambda + 3.0) / 0.6;
        assert!((p.v[1] / p.v[0] - rv).abs() < 1e-10);
        assert!((p.u[1] / p.u[0] - ru).abs() < 1e-10);
    }

    #[test]
    fn mutant_sharing_a_resident_class_is_rejected() {
        let m = fixtures::two_resident();
        let classes = ClassMap::build(&m).unwrap();
        let err = build_branching_spec(&m, &classes, &two_resident_resident_eq(), Trait::new(0, 1));
        assert!(matches!(err, Err(Error::MutantInResidentClass(_))));
    }

    #[test]
    fn singleton_class() {
        let sub = BranchingSpec::new(0, vec![0], vec![2.0], vec![3.0], DMatrix::zeros(1, 1));
        let ev = extinction_vector(&sub).unwrap();
        assert_eq!(ev.q, vec![1.0]);
        assert!(!ev.supercritical);
        let sup = BranchingSpec::new(0, vec![0], vec![4.0], vec![2.0], DMatrix::zeros(1, 1));
        let ev = extinction_vector(&sup).unwrap();
        // roots of 4y^2 + 2 - 6y are {1, 1/2}
        assert!((ev.q[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn perron_of_symmetric_swap() {
        // eigenvalues +-1 of equal modulus; the unit shift breaks the tie
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let p = perron_root(&a).unwrap();
        assert!((p.lambda - 1.0).abs() < 1e-12);
        assert!((p.v[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn reducible_matrix_is_flagged() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        assert!(matches!(perron_root(&a), Err(Error::NonIrreducible(_))));
    }

    #[test]
    fn example_b_probabilities() {
        let spec = spec2([2.0, 4.0], [3.0, 2.4], 2.0, 2.0);
        let a = analyze(spec).unwrap();
        assert!((a.lambda_max - 0.68537).abs() < 1e-4);
        let p = a.invasion_probability();
        assert!((p[0] - 0.12735).abs() < 1e-4 && (p[1] - 0.20725).abs() < 1e-4, "{p:?}");
    }

    #[test]
    fn mean_matrix_identity_and_growth() {
        let spec = spec2([2.0, 4.0], [3.0, 2.4], 2.0, 0.6);
        assert_eq!(mean_matrix(&spec, 0.0), DMatrix::identity(2, 2));
        let lambda = perron_root(&generator_matrix(&spec)).unwrap().lambda;
        let growth = |t: f64| mean_matrix(&spec, t).row_sum().sum().ln();
        let slope = (growth(5.0) - growth(4.0)) / 1.0;
        assert!((slope - lambda).abs() < 0.01 * lambda);
    }

    fn random_spec() -> impl Strategy<Value = BranchingSpec> {
        (1usize..=4).prop_flat_map(|k| {
            (
                prop::collection::vec(0.0f64..5.0, k),
                prop::collection::vec(0.0f64..5.0, k),
                prop::collection::vec(0.05f64..3.0, k * k),
            )
                .prop_map(move |(b, d, s)| {
                    BranchingSpec::new(0, (0..k).collect(), b, d, DMatrix::from_row_slice(k, k, &s))
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn q_is_a_root_and_matches_criticality(spec in random_spec()) {
            let ev = extinction_vector(&spec).unwrap();
            let u = generating_residual(&spec, &ev.q);
            prop_assert!(u.iter().all(|v| v.abs() <= 1e-9), "{u:?}");
            if ev.lambda_max > CRITICAL_BAND {
                prop_assert!(ev.q.iter().all(|&q| q < 1.0 && q >= 0.0));
            } else {
                prop_assert!(ev.q.iter().all(|&q| q == 1.0));
            }
        }

        #[test]
        fn iterates_are_monotone_and_bounded(spec in random_spec()) {
            let mut prev = vec![0.0; spec.k()];
            for y in fixed_point_iterates(&spec).take(500) {
                prop_assert!(y.iter().zip(&prev).all(|(a, b)| *a >= *b - 1e-15 && *a <= 1.0 + 1e-15));
                prev = y;
            }
        }

        #[test]
        fn q_is_invariant_under_time_rescaling(spec in random_spec(), c in 0.1f64..10.0) {
            let q1 = extinction_vector(&spec).unwrap().q;
            let q2 = extinction_vector(&spec.scaled(c)).unwrap().q;
            for (a, b) in q1.iter().zip(&q2) {
                prop_assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
            }
        }

        #[test]
        fn perron_pair_residual(spec in random_spec()) {
            let a = generator_matrix(&spec);
            let p = perron_root(&a).unwrap();
            let v = DVector::from_vec(p.v.clone());
            let r = (&a * &v - &v * p.lambda).amax();
            prop_assert!(r <= 1e-10 * norm_inf(&a).max(1.0));
            prop_assert!((p.v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let u = DVector::from_vec(p.u.clone());
            let r = (a.tr_mul(&u) - &u * p.lambda).amax();
            prop_assert!(r <= 1e-10 * norm_inf(&a).max(1.0));
        }

        #[test]
        fn mean_matrix_semigroup(s in 0.0f64..2.0, t in 0.0f64..2.0) {
            let spec = spec2([2.0, 4.0], [3.0, 2.4], 2.0, 0.6);
            let lhs = mean_matrix(&spec, s + t);
            let rhs = mean_matrix(&spec, s) * mean_matrix(&spec, t);
            prop_assert!((&lhs - &rhs).amax() <= 1e-9 * lhs.amax().max(1.0));
        }
    }
}

use nalgebra::DMatrix;

use crate::error::Result;
use crate::model::{DensityVector, ModelParams, Trait};
use crate::phenotype_graph::{require_closed, ClassMap};

/// An autonomous ODE `x' = f(x)` with an analytic Jacobian.
pub trait VectorField {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64], dx: &mut [f64]);
    fn jacobian(&self, x: &[f64]) -> DMatrix<f64>;

    fn eval_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut dx = vec![0.0; self.dim()];
        self.eval(x, &mut dx);
        dx
    }
}

/// Deterministic limit of the population on an ordered list of traits.
///
/// For trait `i = (g,p)` with density `x_i`:
///
/// ```text
/// x_i' = x_i (r_i - sum_j c(p, p_j) x_j - sum_k w_ik(x))
///      + sum_k x_k w_ki(x)
///      + sum_k m_k b(p_k) M(k, i) x_k
/// ```
///
/// where `r_i = (1 - m_i) b(p) - d(p)`, `w_ik(x) = s_nat(p, p_k) + sum_j
/// s_ind(p, p_k)(p_j) x_j` for traits `k` of the same genotype (zero
/// otherwise) and `m_k` is the effective mutation probability `u_K m(g_k)`.
/// With mutation disabled this is the plastic Lotka-Volterra system.
#[derive(Debug, Clone)]
pub struct PlasticField {
    traits: Vec<Trait>,
    growth: Vec<f64>,
    // [i * n + j]
    competition: Vec<f64>,
    // [i * n + k]
    switch_nat: Vec<f64>,
    // [(i * n + k) * n + j]
    switch_ind: Vec<f64>,
    has_induced: bool,
    // [i * n + k]: inflow into i from births of k
    mutation_in: Vec<f64>,
}

impl PlasticField {
    /// Field over the traits in `support`, with or without the mutation terms.
    pub fn on_traits(params: &ModelParams, support: &[Trait], with_mutation: bool) -> Self {
        let n = support.len();
        let u = if with_mutation { params.mutation_scaling() } else { 0.0 };
        let mut f = PlasticField {
            traits: support.to_vec(),
            growth: Vec::with_capacity(n),
            competition: vec![0.0; n * n],
            switch_nat: vec![0.0; n * n],
            switch_ind: vec![0.0; n * n * n],
            has_induced: false,
            mutation_in: vec![0.0; n * n],
        };
        for (i, ti) in support.iter().enumerate() {
            let m = u * params.mutation_prob(ti.genotype);
            f.growth.push((1.0 - m) * params.birth(ti.phenotype) - params.death(ti.phenotype));
            for (k, tk) in support.iter().enumerate() {
                f.competition[i * n + k] = params.competition(ti.phenotype, tk.phenotype);
                if tk.genotype == ti.genotype && k != i {
                    f.switch_nat[i * n + k] =
                        params.switch_natural(ti.genotype, ti.phenotype, tk.phenotype);
                    for (j, tj) in support.iter().enumerate() {
                        let s = params.switch_induced(ti.genotype, ti.phenotype, tk.phenotype, tj.phenotype);
                        f.switch_ind[(i * n + k) * n + j] = s;
                        f.has_induced |= s != 0.0;
                    }
                }
                let mk = u * params.mutation_prob(tk.genotype);
                f.mutation_in[i * n + k] = mk * params.birth(tk.phenotype) * params.mutation_law(*tk, *ti);
            }
        }
        f
    }

    /// The full field over every trait, mutation included.
    pub fn full(params: &ModelParams) -> Self {
        let all: Vec<Trait> = params.space().traits().collect();
        Self::on_traits(params, &all, true)
    }

    /// The mutation-free system on a switch-closed support.
    pub fn lvs(params: &ModelParams, support: &[Trait], classes: &ClassMap) -> Result<Self> {
        require_closed(params.space(), support, classes)?;
        Ok(Self::on_traits(params, support, false))
    }

    pub fn traits(&self) -> &[Trait] {
        &self.traits
    }

    /// Per-capita switch rate matrix `w[i * n + k]` at `x`.
    fn switch_rates(&self, x: &[f64]) -> Vec<f64> {
        let n = self.traits.len();
        let mut w = self.switch_nat.clone();
        if self.has_induced {
            for (ik, wik) in w.iter_mut().enumerate() {
                let row = &self.switch_ind[ik * n..(ik + 1) * n];
                *wik += row.iter().zip(x).map(|(s, xj)| s * xj).sum::<f64>();
            }
        }
        w
    }
}

impl VectorField for PlasticField {
    fn dim(&self) -> usize {
        self.traits.len()
    }

    fn eval(&self, x: &[f64], dx: &mut [f64]) {
        let n = self.traits.len();
        let w = self.switch_rates(x);
        for i in 0..n {
            let comp: f64 = self.competition[i * n..(i + 1) * n]
                .iter()
                .zip(x)
                .map(|(c, xj)| c * xj)
                .sum();
            let out: f64 = w[i * n..(i + 1) * n].iter().sum();
            let mut v = x[i] * (self.growth[i] - comp - out);
            for k in 0..n {
                v += x[k] * w[k * n + i] + self.mutation_in[i * n + k] * x[k];
            }
            dx[i] = v;
        }
    }

    fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.traits.len();
        let w = self.switch_rates(x);
        let mut jac = DMatrix::zeros(n, n);
        for i in 0..n {
            let comp: f64 = self.competition[i * n..(i + 1) * n]
                .iter()
                .zip(x)
                .map(|(c, xj)| c * xj)
                .sum();
            let out: f64 = w[i * n..(i + 1) * n].iter().sum();
            for l in 0..n {
                let mut v = -x[i] * self.competition[i * n + l];
                if self.has_induced {
                    // d/dx_l of the induced outflow of i and of the induced inflow into i
                    for k in 0..n {
                        v -= x[i] * self.switch_ind[(i * n + k) * n + l];
                        v += x[k] * self.switch_ind[(k * n + i) * n + l];
                    }
                }
                v += w[l * n + i] + self.mutation_in[i * n + l];
                if l == i {
                    v += self.growth[i] - comp - out;
                }
                jac[(i, l)] = v;
            }
        }
        jac
    }
}

/// Derivative of the full field (mutation included) at a density vector over all traits.
pub fn vector_field_full(x: &DensityVector, params: &ModelParams) -> DensityVector {
    let space = params.space();
    let field = PlasticField::full(params);
    let dx = field.eval_vec(&x.to_full(space));
    DensityVector::from_full(space, dx)
}

/// Derivative of the mutation-free system on the (closed) support of `x`.
pub fn vector_field_lvs(x: &DensityVector, params: &ModelParams, classes: &ClassMap) -> Result<DensityVector> {
    let field = PlasticField::lvs(params, &x.support, classes)?;
    Ok(DensityVector::new(x.support.clone(), field.eval_vec(&x.values)))
}

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::spectral_abscissa;
use crate::model::{DensityVector, ModelParams};
use crate::phenotype_graph::ClassMap;

use super::dopri::{Dopri5, OdeOptions};
use super::field::{PlasticField, VectorField};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumOptions {
    pub t_max: f64,
    /// Convergence threshold on `max |f|`.
    pub tol: f64,
    /// Coordinates at or below this count as absent.
    pub positivity: f64,
    /// Required gap below zero for the rightmost eigenvalue.
    pub margin: f64,
    pub newton_polish: bool,
    pub ode: OdeOptions,
}

impl Default for EquilibriumOptions {
    fn default() -> Self {
        Self {
            t_max: 1e4,
            tol: 1e-8,
            positivity: 1e-6,
            margin: 1e-8,
            newton_polish: true,
            ode: OdeOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumReport {
    pub equilibrium: DensityVector,
    pub jacobian: DMatrix<f64>,
    pub eigenvalue_max_real: f64,
    pub converged: bool,
    /// `max |f|` at the reported point.
    pub residual: f64,
    /// Integration time used.
    pub time: f64,
}

impl EquilibriumReport {
    /// All coordinates above `threshold` and the rightmost eigenvalue below `-margin`.
    pub fn is_coexistence(&self, threshold: f64, margin: f64) -> bool {
        self.converged
            && !self.equilibrium.is_empty()
            && self.equilibrium.values.iter().all(|&v| v > threshold)
            && self.eigenvalue_max_real < -margin
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Newton iterations on the coordinates above `threshold`, kept only while
/// they lower the residual and keep those coordinates positive.
fn polish<F: VectorField>(field: &F, x: &mut [f64], threshold: f64) {
    let active: Vec<usize> = (0..x.len()).filter(|&i| x[i] > threshold).collect();
    if active.is_empty() {
        return;
    }
    let mut residual = max_abs(&field.eval_vec(x));
    for _ in 0..8 {
        if residual < 1e-15 {
            break;
        }
        let f = field.eval_vec(x);
        let jac = field.jacobian(x);
        let k = active.len();
        let sub = DMatrix::from_fn(k, k, |a, b| jac[(active[a], active[b])]);
        let rhs = DVector::from_fn(k, |a, _| -f[active[a]]);
        let Some(delta) = sub.lu().solve(&rhs) else { break };
        let mut trial = x.to_vec();
        for (a, &i) in active.iter().enumerate() {
            trial[i] += delta[a];
        }
        if active.iter().any(|&i| trial[i] <= 0.0) {
            break;
        }
        let r = max_abs(&field.eval_vec(&trial));
        if !(r < residual) {
            break;
        }
        x.copy_from_slice(&trial);
        residual = r;
    }
}

/// Integrates from `x0` until `max |f| <= tol`, then polishes and reports the
/// Jacobian. Reaching `t_max` first gives [`Error::NonConvergence`] with the
/// final state.
pub fn find_equilibrium<F: VectorField>(
    field: &F,
    x0: &DensityVector,
    opts: &EquilibriumOptions,
) -> Result<EquilibriumReport> {
    assert_eq!(field.dim(), x0.len(), "initial state does not match the field");
    let mut solver = Dopri5::new(field, 0.0, &x0.values, opts.ode);
    let mut converged = max_abs(solver.dy()) <= opts.tol;
    let mut polished = None;
    let mut steps = 0u64;
    while !converged && solver.t() < opts.t_max {
        solver.step(opts.t_max)?;
        steps += 1;
        let residual = max_abs(solver.dy());
        converged = residual <= opts.tol;
        // Close to an equilibrium the step-size controller settles at the
        // stability boundary and the residual can stall near the local error
        // tolerance; a Newton step from there finishes the job.
        if !converged && opts.newton_polish && steps % 16 == 0 && residual <= 1e4 * opts.tol {
            let mut x = solver.y().to_vec();
            polish(field, &mut x, opts.positivity);
            let moved = x.iter().zip(solver.y()).fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()));
            let scale = 1.0 + max_abs(solver.y());
            if max_abs(&field.eval_vec(&x)) <= opts.tol && moved <= 1e-4 * scale {
                converged = true;
                polished = Some(x);
            }
        }
    }
    let mut x = match polished {
        Some(x) => x,
        None => solver.y().to_vec(),
    };
    if converged && opts.newton_polish {
        polish(field, &mut x, opts.positivity);
    }
    let jacobian = field.jacobian(&x);
    let report = EquilibriumReport {
        equilibrium: DensityVector::new(x0.support.clone(), x.clone()),
        eigenvalue_max_real: spectral_abscissa(&jacobian),
        jacobian,
        converged,
        residual: max_abs(&field.eval_vec(&x)),
        time: solver.t(),
    };
    if converged {
        Ok(report)
    } else {
        Err(Error::NonConvergence(Box::new(report)))
    }
}

/// Equilibrium of the mutation-free system on the closed support of `x0`.
pub fn find_lvs_equilibrium(
    params: &ModelParams,
    classes: &ClassMap,
    x0: &DensityVector,
    opts: &EquilibriumOptions,
) -> Result<EquilibriumReport> {
    let field = PlasticField::lvs(params, &x0.support, classes)?;
    find_equilibrium(&field, x0, opts)
}

/// Whether the support of `x0` coexists. Non-convergence counts as `false`
/// and still returns the diagnostic report.
pub fn check_coexistence(
    params: &ModelParams,
    classes: &ClassMap,
    x0: &DensityVector,
    opts: &EquilibriumOptions,
) -> Result<(bool, EquilibriumReport)> {
    match find_lvs_equilibrium(params, classes, x0, opts) {
        Ok(report) => Ok((report.is_coexistence(opts.positivity, opts.margin), report)),
        Err(Error::NonConvergence(report)) => Ok((false, *report)),
        Err(e) => Err(e),
    }
}

//! CSV and JSON writers.
//!
//! Floats are printed in their shortest round-trip form: plain decimal,
//! switching to exponent notation for nonzero magnitudes below 1e-6 or at
//! least 1e16. Parsing a printed value gives back the identical `f64`.

use std::io::{self, Write};

use nalgebra::DMatrix;
use serde_json::{json, Value};

use crate::branching::BranchingAnalysis;
use crate::lvs::EquilibriumReport;
use crate::model::{DensityVector, TraitSpace};

pub fn fmt_float(v: f64) -> String {
    let a = v.abs();
    if v != 0.0 && a.is_finite() && !(1e-6..1e16).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

/// `time,<g:p>,...` over every trait in trait order, one row per sample.
/// An absorbed run ends with `# absorbed,<time>`.
pub fn write_trajectory_csv<W: Write>(
    w: &mut W,
    space: &TraitSpace,
    times: &[f64],
    rows: &[Vec<f64>],
    absorbed_at: Option<f64>,
) -> io::Result<()> {
    let mut header = String::from("time");
    for t in space.traits() {
        header.push(',');
        header.push_str(&space.label(t));
    }
    writeln!(w, "{header}")?;
    for (t, row) in times.iter().zip(rows) {
        let mut line = fmt_float(*t);
        for v in row {
            line.push(',');
            line.push_str(&fmt_float(*v));
        }
        writeln!(w, "{line}")?;
    }
    if let Some(t) = absorbed_at {
        writeln!(w, "# absorbed,{}", fmt_float(t))?;
    }
    Ok(())
}

pub fn matrix_json(m: &DMatrix<f64>) -> Value {
    Value::from(
        m.row_iter()
            .map(|r| r.iter().copied().collect::<Vec<f64>>())
            .collect::<Vec<_>>(),
    )
}

pub fn keys(space: &TraitSpace, d: &DensityVector) -> Vec<String> {
    d.support.iter().map(|t| space.key(*t)).collect()
}

pub fn density_json(space: &TraitSpace, d: &DensityVector) -> Value {
    json!({
        "support": keys(space, d),
        "values": d.values,
    })
}

pub fn equilibrium_json(space: &TraitSpace, r: &EquilibriumReport) -> Value {
    json!({
        "support": keys(space, &r.equilibrium),
        "equilibrium": r.equilibrium.values,
        "jacobian": matrix_json(&r.jacobian),
        "eigenvalue_max_real": r.eigenvalue_max_real,
        "converged": r.converged,
        "residual": r.residual,
        "time": r.time,
    })
}

/// Branching results of one mutant class. `mutant` selects the scalar
/// `invasion_probability`; without it the probabilities are keyed by
/// starting trait.
pub fn branching_json(
    space: &TraitSpace,
    resident: &DensityVector,
    a: &BranchingAnalysis,
    mutant: Option<crate::model::Trait>,
) -> Value {
    let class: Vec<String> = a.spec.traits().iter().map(|t| space.key(*t)).collect();
    let probs = a.invasion_probability();
    let invasion = match mutant {
        Some(m) => json!(probs[a.spec.position(m.phenotype).expect("mutant in class")]),
        None => Value::Object(class.iter().cloned().zip(probs.iter().map(|p| json!(p))).collect()),
    };
    let mut out = json!({
        "resident": density_json(space, resident),
        "class": class,
        "matrix": matrix_json(&a.matrix),
        "lambda_max": a.lambda_max,
        "v": a.v,
        "composition": a.u,
        "q": a.q,
        "invasion_probability": invasion,
    });
    if let Some(m) = mutant {
        out["mutant"] = json!(space.key(m));
    }
    out
}

//! JSON model files.
//!
//! ```json
//! {
//!   "genotypes": ["g", "gt"],
//!   "phenotypes": ["p", "pt1", "pt2"],
//!   "birth": {"p": 3, "pt1": 2, "pt2": 4},
//!   "death": {"p": 1, "pt1": 1, "pt2": 1},
//!   "competition": {"p,p": 1, "p,pt1": 1, "pt1,pt2": 0.5},
//!   "switch_natural": {"gt": {"pt1,pt2": 2, "pt2,pt1": 0.6}},
//!   "switch_induced": {"gt": {"pt1,pt2": {"p": 0.1}}},
//!   "mutation_prob": {"g": 1},
//!   "mutation_law": [{"from": "g,p", "to": "gt,pt1", "prob": 1}],
//!   "K": 1000,
//!   "u_K": 0,
//!   "initial": {"g,p": 2, "gt,pt1": {"count": 1}}
//! }
//! ```
//!
//! Absent rate entries are zero. An `initial` value is either a density
//! (rounded to `round(density * K)` individuals) or `{"count": n}`.
//! Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelParams, PopulationState, Trait, TraitSpace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub genotypes: Vec<String>,
    pub phenotypes: Vec<String>,
    pub birth: BTreeMap<String, f64>,
    pub death: BTreeMap<String, f64>,
    pub competition: BTreeMap<String, f64>,
    #[serde(default)]
    pub switch_natural: BTreeMap<String, BTreeMap<String, f64>>,
    #[serde(default)]
    pub switch_induced: BTreeMap<String, BTreeMap<String, BTreeMap<String, f64>>>,
    #[serde(default)]
    pub mutation_prob: BTreeMap<String, f64>,
    #[serde(default)]
    pub mutation_law: Vec<MutationEntry>,
    #[serde(rename = "K")]
    pub carrying_capacity: u64,
    #[serde(rename = "u_K", default)]
    pub mutation_scaling: f64,
    #[serde(default)]
    pub initial: BTreeMap<String, InitialValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MutationEntry {
    pub from: String,
    pub to: String,
    pub prob: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialValue {
    Density(f64),
    Count {
        count: u64,
    },
}

/// Parameters plus the initial population of a model file.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub params: ModelParams,
    pub initial: PopulationState,
}

fn keyed<T>(key: &str, section: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::ModelFile(format!("{section}: key `{key}`: {e}")))
}

impl ModelFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::ModelFile(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model file serializes")
    }

    /// Builds parameters and initial state. Structural invariants are not
    /// checked here; run [`crate::validate_model`] on the result.
    pub fn to_model(&self) -> Result<Model> {
        let space = TraitSpace::new(self.genotypes.clone(), self.phenotypes.clone())
            .map_err(|e| Error::ModelFile(e.to_string()))?;
        let mut params = ModelParams::new(space.clone());

        for (key, &v) in &self.birth {
            let p = keyed(key, "birth", space.phenotype_index(key))?;
            params.set_birth(p, v);
        }
        for (key, &v) in &self.death {
            let p = keyed(key, "death", space.phenotype_index(key))?;
            params.set_death(p, v);
        }
        for (key, &v) in &self.competition {
            let (p, q) = keyed(key, "competition", space.parse_phenotype_pair(key))?;
            params.set_competition(p, q, v);
        }
        for (gkey, table) in &self.switch_natural {
            let g = keyed(gkey, "switch_natural", space.genotype_index(gkey))?;
            for (key, &v) in table {
                let (p, q) = keyed(key, "switch_natural", space.parse_phenotype_pair(key))?;
                if p == q && v != 0.0 {
                    return Err(Error::ModelFile(format!(
                        "switch_natural: key `{key}`: diagonal switch rates are not allowed"
                    )));
                }
                params.set_switch_natural(g, p, q, v);
            }
        }
        for (gkey, table) in &self.switch_induced {
            let g = keyed(gkey, "switch_induced", space.genotype_index(gkey))?;
            for (key, inducers) in table {
                let (p, q) = keyed(key, "switch_induced", space.parse_phenotype_pair(key))?;
                for (ikey, &v) in inducers {
                    let r = keyed(ikey, "switch_induced", space.phenotype_index(ikey))?;
                    if p == q && v != 0.0 {
                        return Err(Error::ModelFile(format!(
                            "switch_induced: key `{key}`: diagonal switch rates are not allowed"
                        )));
                    }
                    params.set_switch_induced(g, p, q, r, v);
                }
            }
        }
        for (key, &v) in &self.mutation_prob {
            let g = keyed(key, "mutation_prob", space.genotype_index(key))?;
            params.set_mutation_prob(g, v);
        }
        for e in &self.mutation_law {
            let from = keyed(&e.from, "mutation_law", space.parse_trait(&e.from))?;
            let to = keyed(&e.to, "mutation_law", space.parse_trait(&e.to))?;
            params.set_mutation_law(from, to, e.prob);
        }
        params.set_carrying_capacity(self.carrying_capacity);
        params.set_mutation_scaling(self.mutation_scaling);

        let mut initial = PopulationState::empty(&space, self.carrying_capacity);
        for (key, v) in &self.initial {
            let t = keyed(key, "initial", space.parse_trait(key))?;
            let count = match *v {
                InitialValue::Count { count } => count,
                InitialValue::Density(d) => {
                    if !(d.is_finite() && d >= 0.0) {
                        return Err(Error::ModelFile(format!(
                            "initial: key `{key}`: density must be finite and nonnegative"
                        )));
                    }
                    (d * self.carrying_capacity as f64).round() as u64
                }
            };
            initial.counts[space.index(t)] = count;
        }
        Ok(Model { params, initial })
    }

    /// Model file with every nonzero parameter of `params`; initial values as counts.
    pub fn from_model(params: &ModelParams, initial: &PopulationState) -> Self {
        let space = params.space();
        let ph = space.phenotypes();
        let np = space.n_phenotypes();
        let pair = |p: usize, q: usize| format!("{},{}", ph[p], ph[q]);
        let nonzero = |v: f64| v != 0.0;

        let mut file = ModelFile {
            genotypes: space.genotypes().to_vec(),
            phenotypes: ph.to_vec(),
            birth: BTreeMap::new(),
            death: BTreeMap::new(),
            competition: BTreeMap::new(),
            switch_natural: BTreeMap::new(),
            switch_induced: BTreeMap::new(),
            mutation_prob: BTreeMap::new(),
            mutation_law: Vec::new(),
            carrying_capacity: params.carrying_capacity(),
            mutation_scaling: params.mutation_scaling(),
            initial: BTreeMap::new(),
        };
        for p in 0..np {
            file.birth.insert(ph[p].clone(), params.birth(p));
            file.death.insert(ph[p].clone(), params.death(p));
            for q in 0..np {
                if nonzero(params.competition(p, q)) {
                    file.competition.insert(pair(p, q), params.competition(p, q));
                }
            }
        }
        for (g, gname) in space.genotypes().iter().enumerate() {
            let mut nat = BTreeMap::new();
            let mut ind = BTreeMap::new();
            for p in 0..np {
                for q in 0..np {
                    if nonzero(params.switch_natural(g, p, q)) {
                        nat.insert(pair(p, q), params.switch_natural(g, p, q));
                    }
                    let inducers: BTreeMap<_, _> = (0..np)
                        .filter(|&r| nonzero(params.switch_induced(g, p, q, r)))
                        .map(|r| (ph[r].clone(), params.switch_induced(g, p, q, r)))
                        .collect();
                    if !inducers.is_empty() {
                        ind.insert(pair(p, q), inducers);
                    }
                }
            }
            if !nat.is_empty() {
                file.switch_natural.insert(gname.clone(), nat);
            }
            if !ind.is_empty() {
                file.switch_induced.insert(gname.clone(), ind);
            }
            if nonzero(params.mutation_prob(g)) {
                file.mutation_prob.insert(gname.clone(), params.mutation_prob(g));
            }
        }
        for from in space.traits() {
            for to in space.traits() {
                let v = params.mutation_law(from, to);
                if nonzero(v) {
                    file.mutation_law.push(MutationEntry {
                        from: space.key(from),
                        to: space.key(to),
                        prob: v,
                    });
                }
            }
        }
        for (i, &c) in initial.counts.iter().enumerate() {
            if c > 0 {
                file.initial
                    .insert(space.key(space.trait_at(i)), InitialValue::Count { count: c });
            }
        }
        file
    }
}

impl Model {
    pub fn load(path: &Path) -> Result<Self> {
        ModelFile::load(path)?.to_model()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        ModelFile::from_json(text)?.to_model()
    }

    /// Traits with a positive initial count, in trait order.
    pub fn initial_support(&self) -> Vec<Trait> {
        let space = self.params.space();
        self.initial
            .counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, _)| space.trait_at(i))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use proptest::prelude::*;

    const EXAMPLE_A: &str = r#"{
        "genotypes": ["g", "gt"],
        "phenotypes": ["p", "pt1", "pt2"],
        "birth": {"p": 3, "pt1": 2, "pt2": 4},
        "death": {"p": 1, "pt1": 1, "pt2": 1},
        "competition": {"p,p": 1, "p,pt1": 1, "p,pt2": 0.7,
                        "pt1,p": 1, "pt1,pt1": 1, "pt1,pt2": 0.5,
                        "pt2,p": 0.7, "pt2,pt1": 0.5, "pt2,pt2": 1},
        "switch_natural": {"gt": {"pt1,pt2": 2, "pt2,pt1": 0.6}},
        "K": 1000,
        "u_K": 0,
        "initial": {"g,p": 2, "gt,pt1": {"count": 1}}
    }"#;

    #[test]
    fn parses_example_a() {
        let m = Model::from_json(EXAMPLE_A).unwrap();
        assert_eq!(m.params, fixtures::example_a());
        assert_eq!(m.initial.counts, vec![2000, 0, 0, 0, 1, 0]);
        assert_eq!(m.initial_support(), vec![Trait::new(0, 0), Trait::new(1, 1)]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = EXAMPLE_A.replace("\"K\": 1000", "\"K\": 1000, \"carrying\": 3");
        let err = Model::from_json(&text).unwrap_err().to_string();
        assert!(err.contains("carrying"), "{err}");
    }

    #[test]
    fn errors_name_the_offending_key() {
        let text = EXAMPLE_A.replace("\"pt1,pt2\": 0.5", "\"pt1,px\": 0.5");
        let err = Model::from_json(&text).unwrap_err().to_string();
        assert!(err.contains("competition") && err.contains("pt1,px"), "{err}");

        let text = EXAMPLE_A.replace("\"g,p\": 2", "\"gz,p\": 2");
        let err = Model::from_json(&text).unwrap_err().to_string();
        assert!(err.contains("initial") && err.contains("gz,p"), "{err}");
    }

    #[test]
    fn diagonal_switch_in_file_is_rejected() {
        let text = EXAMPLE_A.replace("\"pt1,pt2\": 2,", "\"pt1,pt1\": 2, \"pt1,pt2\": 2,");
        assert!(Model::from_json(&text).is_err());
    }

    fn arb_params() -> impl Strategy<Value = ModelParams> {
        let rate = prop_oneof![Just(0.0), 0.0..10.0f64];
        (
            proptest::collection::vec(rate.clone(), 9 + 2 * 9 + 2 * 27 + 3),
            1u64..100_000,
            0.0..1.0f64,
        )
            .prop_map(|(v, k, u)| {
                let mut p = ModelParams::new(
                    TraitSpace::new(
                        vec!["a".into(), "b".into()],
                        vec!["x".into(), "y".into(), "z".into()],
                    )
                    .unwrap(),
                );
                let mut it = v.into_iter();
                for i in 0..3 {
                    p.set_birth(i, it.next().unwrap());
                    p.set_death(i, it.next().unwrap());
                    p.set_competition(i, (i + 1) % 3, it.next().unwrap());
                }
                for g in 0..2 {
                    for i in 0..3 {
                        for j in 0..3 {
                            p.set_switch_natural(g, i, j, it.next().unwrap());
                            for r in 0..3 {
                                p.set_switch_induced(g, i, j, r, it.next().unwrap());
                            }
                        }
                    }
                }
                p.set_mutation_prob(1, it.next().unwrap() / 10.0);
                p.set_mutation_law(Trait::new(1, 0), Trait::new(0, 2), it.next().unwrap() / 10.0);
                p.set_carrying_capacity(k);
                p.set_mutation_scaling(u);
                p
            })
    }

    proptest! {
        #[test]
        fn json_round_trip_is_bitwise(params in arb_params()) {
            let init = PopulationState::empty(params.space(), params.carrying_capacity());
            let json = ModelFile::from_model(&params, &init).to_json();
            let back = Model::from_json(&json).unwrap();
            prop_assert_eq!(back.params, params);
        }
    }
}

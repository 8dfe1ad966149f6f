//! Per-genotype switch chains and their communicating classes.
//!
//! The embedded chain of genotype `g` moves from `p` to `q` with probability
//! `s_nat(p,q) / sum_r s_nat(p,r)`, or stays at `p` when `p` has no outgoing
//! switch. Only its zero pattern matters downstream: the communicating
//! classes determine which traits a lineage can reach by switching alone.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::model::{ModelParams, Trait, TraitSpace};

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchChain {
    pub genotype: usize,
    /// Row-stochastic, `transition[p][q]`.
    pub transition: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassPartition {
    /// Classes sorted by their smallest phenotype; each class sorted ascending.
    pub classes: Vec<Vec<usize>>,
    pub class_of: Vec<usize>,
}

impl ClassPartition {
    pub fn class_containing(&self, p: usize) -> &[usize] {
        &self.classes[self.class_of[p]]
    }
}

pub fn build_switch_chain(params: &ModelParams, genotype: usize) -> SwitchChain {
    let np = params.space().n_phenotypes();
    let transition = (0..np)
        .map(|p| {
            let total: f64 = (0..np).map(|q| params.switch_natural(genotype, p, q)).sum();
            if total > 0.0 {
                (0..np)
                    .map(|q| params.switch_natural(genotype, p, q) / total)
                    .collect()
            } else {
                (0..np).map(|q| if q == p { 1.0 } else { 0.0 }).collect()
            }
        })
        .collect();
    SwitchChain {
        genotype,
        transition,
    }
}

/// Strongly connected components of the positive-transition digraph (Tarjan).
pub fn communicating_classes(chain: &SwitchChain) -> ClassPartition {
    let n = chain.transition.len();
    let adj: Vec<Vec<usize>> = chain
        .transition
        .iter()
        .enumerate()
        .map(|(p, row)| {
            row.iter()
                .enumerate()
                .filter(|&(q, &w)| q != p && w > 0.0)
                .map(|(q, _)| q)
                .collect()
        })
        .collect();

    const UNVISITED: usize = usize::MAX;
    let mut index = vec![UNVISITED; n];
    let mut lowlink = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut next_index = 0;
    let mut classes = Vec::new();

    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        // (node, next edge position)
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = next_index;
        lowlink[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&(v, edge)) = call.last() {
            if let Some(&w) = adj[v].get(edge) {
                if let Some(top) = call.last_mut() {
                    top.1 += 1;
                }
                if index[w] == UNVISITED {
                    index[w] = next_index;
                    lowlink[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    lowlink[v] = lowlink[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                lowlink[parent] = lowlink[parent].min(lowlink[v]);
            }
            if lowlink[v] == index[v] {
                let mut class = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack");
                    on_stack[w] = false;
                    class.push(w);
                    if w == v {
                        break;
                    }
                }
                class.sort_unstable();
                classes.push(class);
            }
        }
    }

    classes.sort_by_key(|c| c[0]);
    let mut class_of = vec![0; n];
    for (ci, class) in classes.iter().enumerate() {
        for &p in class {
            class_of[p] = ci;
        }
    }
    ClassPartition { classes, class_of }
}

/// Indices of classes with a positive transition leaving them. On a finite
/// chain a class is recurrent exactly when it is closed.
pub fn check_recurrence(partition: &ClassPartition, chain: &SwitchChain) -> Vec<usize> {
    partition
        .classes
        .iter()
        .enumerate()
        .filter(|(ci, class)| {
            class.iter().any(|&p| {
                chain.transition[p]
                    .iter()
                    .enumerate()
                    .any(|(q, &w)| w > 0.0 && partition.class_of[q] != *ci)
            })
        })
        .map(|(ci, _)| ci)
        .collect()
}

/// Communicating classes of every genotype, with recurrence verified.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassMap {
    partitions: Vec<ClassPartition>,
}

impl ClassMap {
    /// Fails with [`Error::NonRecurrent`] on the first genotype with a transient class.
    pub fn build(params: &ModelParams) -> Result<Self> {
        let space = params.space();
        let partitions = (0..space.n_genotypes())
            .map(|g| {
                let chain = build_switch_chain(params, g);
                let partition = communicating_classes(&chain);
                if let Some(&ci) = check_recurrence(&partition, &chain).first() {
                    return Err(Error::NonRecurrent {
                        genotype: space.genotypes()[g].clone(),
                        class: partition.classes[ci]
                            .iter()
                            .map(|&p| space.phenotypes()[p].clone())
                            .collect(),
                    });
                }
                Ok(partition)
            })
            .collect::<Result<_>>()?;
        Ok(Self { partitions })
    }

    pub fn partition(&self, genotype: usize) -> &ClassPartition {
        &self.partitions[genotype]
    }

    /// Phenotypes of the class of `t`, ascending.
    pub fn class_of(&self, t: Trait) -> &[usize] {
        self.partitions[t.genotype].class_containing(t.phenotype)
    }

    /// The traits `{g} x [p]_g`.
    pub fn class_traits(&self, t: Trait) -> Vec<Trait> {
        self.class_of(t)
            .iter()
            .map(|&p| Trait::new(t.genotype, p))
            .collect()
    }
}

/// Union of `{g} x [p]_g` over the support, in trait order.
pub fn reachable_traits(space: &TraitSpace, support: &[Trait], classes: &ClassMap) -> Result<Vec<Trait>> {
    let mut out = BTreeSet::new();
    for &t in support {
        space.check(t)?;
        out.extend(classes.class_traits(t));
    }
    Ok(out.into_iter().collect())
}

/// Errors unless `support` equals its own reachable set.
pub fn require_closed(space: &TraitSpace, support: &[Trait], classes: &ClassMap) -> Result<()> {
    let closure = reachable_traits(space, support, classes)?;
    if let Some(missing) = closure.iter().find(|t| !support.contains(t)) {
        return Err(Error::SupportNotClosed {
            missing: space.key(*missing),
        });
    }
    Ok(())
}

//! Classical causal models: per-variable mechanisms and generation of the
//! joint distribution they induce.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::distribution::{JointDistribution, OutcomeSpace, NORMALIZATION_TOL};
use crate::error::{Error, Result};
use crate::graph::CausalInputList;
use crate::varset::{VarId, VarSet};

/// How one variable is produced from its parents.
///
/// Parent configurations are flattened with parents in ascending index
/// order, the first parent most significant.
#[derive(Debug, Clone, PartialEq)]
pub enum Mechanism {
    /// Distribution of a parentless variable.
    Marginal(Vec<f64>),
    /// Deterministic `table[config * noise.len() + u]` applied to the
    /// parents and an independent error variable `u ~ noise`.
    Function { table: Vec<usize>, noise: Vec<f64> },
    /// Explicit conditional `P(x | config)` stored as `rows[config * k + x]`.
    Conditional(Vec<f64>),
}

/// Names, outcome-space sizes and one mechanism per variable.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalModelParams {
    pub names: Vec<String>,
    pub sizes: Vec<usize>,
    pub mechanisms: Vec<Mechanism>,
}

fn check_distribution(what: &str, p: &[f64]) -> Result<()> {
    if p.is_empty() || p.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::input(format!("{what}: invalid probabilities")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::input(format!("{what}: probabilities sum to {s}")));
    }
    Ok(())
}

impl ClassicalModelParams {
    /// Conditional table `P(x | parent config)` for each variable.
    fn conditionals(&self, list: &CausalInputList) -> Result<Vec<Vec<f64>>> {
        let n = list.n();
        if self.names.len() != n || self.sizes.len() != n || self.mechanisms.len() != n {
            return Err(Error::input(format!(
                "model parameters describe {} variables, the input list has {n}",
                self.mechanisms.len()
            )));
        }
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let name = &self.names[i];
            let k = self.sizes[i];
            let configs: usize = list
                .parents(VarId::new(i))
                .iter()
                .map(|p| self.sizes[p.index()])
                .product();
            let cond = match &self.mechanisms[i] {
                Mechanism::Marginal(m) => {
                    if !list.parents(VarId::new(i)).is_empty() {
                        return Err(Error::input(format!("{name}: a marginal needs a parentless variable")));
                    }
                    if m.len() != k {
                        return Err(Error::input(format!("{name}: marginal has {} entries, expected {k}", m.len())));
                    }
                    check_distribution(name, m)?;
                    m.clone()
                }
                Mechanism::Function { table, noise } => {
                    check_distribution(&format!("{name} noise"), noise)?;
                    if table.len() != configs * noise.len() {
                        return Err(Error::input(format!(
                            "{name}: function table has {} entries, expected {}",
                            table.len(),
                            configs * noise.len()
                        )));
                    }
                    if let Some(&bad) = table.iter().find(|&&x| x >= k) {
                        return Err(Error::input(format!("{name}: function value {bad} out of range")));
                    }
                    let mut c = vec![0.0; configs * k];
                    for cfg in 0..configs {
                        for (u, pu) in noise.iter().enumerate() {
                            c[cfg * k + table[cfg * noise.len() + u]] += pu;
                        }
                    }
                    c
                }
                Mechanism::Conditional(rows) => {
                    if rows.len() != configs * k {
                        return Err(Error::input(format!(
                            "{name}: conditional table has {} entries, expected {}",
                            rows.len(),
                            configs * k
                        )));
                    }
                    for cfg in 0..configs {
                        check_distribution(&format!("{name} row {cfg}"), &rows[cfg * k..(cfg + 1) * k])?;
                    }
                    rows.clone()
                }
            };
            out.push(cond);
        }
        Ok(out)
    }
}

/// Joint distribution of a classical causal model: the product of each
/// variable's conditional given its parents.
pub fn generate_ccm(list: &CausalInputList, params: &ClassicalModelParams) -> Result<JointDistribution> {
    let conds = params.conditionals(list)?;
    let space = OutcomeSpace::new(params.names.clone(), params.sizes.clone())?;
    let parents: Vec<Vec<usize>> = (0..list.n())
        .map(|i| list.parents(VarId::new(i)).iter().map(VarId::index).collect())
        .collect();
    let sizes = &params.sizes;
    JointDistribution::from_fn(space, |vals| {
        let mut p = 1.0;
        for i in 0..vals.len() {
            let cfg = parents[i].iter().fold(0, |acc, &q| acc * sizes[q] + vals[q]);
            p *= conds[i][cfg * sizes[i] + vals[i]];
            if p == 0.0 {
                break;
            }
        }
        p
    })
}

/// Strictly positive random distribution (flat Dirichlet).
pub fn random_distribution<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).map(|x: f64| x + 1e-3).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

/// Random conditional tables for every variable of `list`.
pub fn random_ccm_params<R: Rng + ?Sized>(
    list: &CausalInputList,
    names: Vec<String>,
    sizes: Vec<usize>,
    rng: &mut R,
) -> ClassicalModelParams {
    let mechanisms = (0..list.n())
        .map(|i| {
            let pa: VarSet = list.parents(VarId::new(i));
            let configs: usize = pa.iter().map(|p| sizes[p.index()]).product();
            if pa.is_empty() {
                Mechanism::Marginal(random_distribution(sizes[i], rng))
            } else {
                Mechanism::Conditional(
                    (0..configs).flat_map(|_| random_distribution(sizes[i], rng)).collect(),
                )
            }
        })
        .collect();
    ClassicalModelParams {
        names,
        sizes,
        mechanisms,
    }
}

//! Named observables evaluated along a trajectory: subsystem entropies,
//! mutual-information statistics, mode occupations, bond currents, and
//! fidelity with the initial state.
//!
//! Descriptors are declarative (species by label, sites by index) and are
//! compiled once per basis into concrete operators and mode sets.  Unless a
//! descriptor lists species explicitly, entanglement quantities cover the
//! "tau" and "ups" modes and leave any further species out, matching how
//! the reference experiments report them.

use crate::entanglement::{
    pairwise_mi_stats, reduced_density_matrix, von_neumann_entropy, EntanglementError,
};
use crate::fock::FockBasis;
use crate::model::{ModelError, ModelSpec};
use crate::operators::{
    bond_current_operator, number_operator, DiagonalOperator, OperatorError, SparseOperator,
};
use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

type C64 = Complex64;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Entanglement(#[from] EntanglementError),
    #[error("diagnostic lists no sites")]
    NoSites,
    #[error("bond current expectation has imaginary part {0:.3e}")]
    ComplexCurrent(f64),
}

/// Declarative description of one diagnostic column (or column pair).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiagnosticSpec {
    /// entanglement entropy of the listed sites
    Entropy { sites: Vec<usize>, #[serde(default, skip_serializing_if = "Option::is_none")] species: Option<Vec<String>> },
    /// mutual information between two sites
    MiPair {
        #[serde(rename = "i")]
        site_i: usize,
        #[serde(rename = "j")]
        site_j: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        species: Option<Vec<String>>,
    },
    /// mean and standard deviation of mutual information over all site pairs
    MiStats { #[serde(default, skip_serializing_if = "Option::is_none")] species: Option<Vec<String>> },
    /// occupation of one mode
    Number { site: usize, species: String },
    /// particle current through a bond, summed over species
    Current { bond: (usize, usize), #[serde(default, skip_serializing_if = "Option::is_none")] species: Option<Vec<String>> },
    /// squared overlap with the initial state
    Fidelity,
}

/// Species used for entanglement quantities when a descriptor does not
/// list any: "tau" and "ups" where present, otherwise every species.
pub fn default_entanglement_species(model: &ModelSpec) -> Vec<usize> {
    let named: Vec<usize> = ["tau", "ups"]
        .iter()
        .filter_map(|label| model.species_index(label).ok())
        .collect();
    if named.is_empty() {
        (0..model.num_species()).collect()
    } else {
        named
    }
}

fn resolve_species(
    model: &ModelSpec,
    species: &Option<Vec<String>>,
) -> Result<Vec<usize>, ModelError> {
    match species {
        Some(labels) => labels.iter().map(|l| model.species_index(l)).collect(),
        None => Ok(default_entanglement_species(model)),
    }
}

enum Item {
    Entropy { name: String, sites: Vec<usize>, species: Vec<usize> },
    MiPair { name: String, site_i: usize, site_j: usize, species: Vec<usize> },
    MiStats { species: Vec<usize> },
    Number { name: String, op: DiagonalOperator },
    Current { name: String, op: SparseOperator },
    Fidelity,
}

/// Diagnostics compiled against one basis, ready to evaluate on states.
pub struct DiagnosticSet {
    items: Vec<Item>,
}

fn join_sites(sites: &[usize]) -> String {
    sites.iter().map(|s| s.to_string()).collect::<Vec<_>>().join("-")
}

impl DiagnosticSet {
    pub fn compile(
        basis: &FockBasis,
        specs: &[DiagnosticSpec],
    ) -> Result<DiagnosticSet, DiagnosticsError> {
        let model = &basis.model;
        let mut items = Vec::with_capacity(specs.len());
        for spec in specs {
            match spec {
                DiagnosticSpec::Entropy { sites, species } => {
                    if sites.is_empty() {
                        return Err(DiagnosticsError::NoSites);
                    }
                    let mut sites = sites.clone();
                    sites.sort_unstable();
                    sites.dedup();
                    items.push(Item::Entropy {
                        name: format!("S_{}", join_sites(&sites)),
                        sites,
                        species: resolve_species(model, species)?,
                    });
                }
                DiagnosticSpec::MiPair { site_i, site_j, species } => {
                    items.push(Item::MiPair {
                        name: format!("I_{site_i}-{site_j}"),
                        site_i: *site_i,
                        site_j: *site_j,
                        species: resolve_species(model, species)?,
                    });
                }
                DiagnosticSpec::MiStats { species } => {
                    items.push(Item::MiStats { species: resolve_species(model, species)? });
                }
                DiagnosticSpec::Number { site, species } => {
                    let s = model.species_index(species)?;
                    items.push(Item::Number {
                        name: format!("n_{species}_{site}"),
                        op: number_operator(basis, *site, s)?,
                    });
                }
                DiagnosticSpec::Current { bond, species } => {
                    let sp = match species {
                        Some(labels) => labels
                            .iter()
                            .map(|l| model.species_index(l))
                            .collect::<Result<Vec<_>, _>>()?,
                        None => (0..model.num_species()).collect(),
                    };
                    items.push(Item::Current {
                        name: format!("J_{}-{}", bond.0, bond.1),
                        op: bond_current_operator(basis, *bond, &sp)?,
                    });
                }
                DiagnosticSpec::Fidelity => items.push(Item::Fidelity),
            }
        }
        Ok(DiagnosticSet { items })
    }

    pub fn columns(&self) -> Vec<String> {
        let mut cols = Vec::new();
        for item in &self.items {
            match item {
                Item::Entropy { name, .. }
                | Item::MiPair { name, .. }
                | Item::Number { name, .. }
                | Item::Current { name, .. } => cols.push(name.clone()),
                Item::MiStats { .. } => {
                    cols.push("mi_mean".to_string());
                    cols.push("mi_sigma".to_string());
                }
                Item::Fidelity => cols.push("fidelity".to_string()),
            }
        }
        cols
    }

    /// Evaluate every diagnostic on a state (`initial` backs the fidelity
    /// column).  Output order matches [`DiagnosticSet::columns`].
    pub fn eval(
        &self,
        basis: &FockBasis,
        state: &DVector<C64>,
        initial: &DVector<C64>,
    ) -> Result<Vec<f64>, DiagnosticsError> {
        let mut out = Vec::with_capacity(self.items.len() + 1);
        for item in &self.items {
            match item {
                Item::Entropy { sites, species, .. } => {
                    let rho = reduced_density_matrix(basis, state, sites, species)?;
                    out.push(von_neumann_entropy(&rho)?);
                }
                Item::MiPair { site_i, site_j, species, .. } => {
                    out.push(crate::entanglement::mutual_information(
                        basis, state, *site_i, *site_j, species,
                    )?);
                }
                Item::MiStats { species } => {
                    let stats = pairwise_mi_stats(basis, state, species)?;
                    out.push(stats.mean);
                    out.push(stats.sigma);
                }
                Item::Number { op, .. } => {
                    out.push(op.expectation(state).re);
                }
                Item::Current { op, .. } => {
                    let e = op.expectation(state);
                    if e.im.abs() > 1e-9 {
                        return Err(DiagnosticsError::ComplexCurrent(e.im));
                    }
                    out.push(e.re);
                }
                Item::Fidelity => {
                    out.push(initial.dotc(state).norm_sqr());
                }
            }
        }
        Ok(out)
    }
}

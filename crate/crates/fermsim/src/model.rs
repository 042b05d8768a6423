//! Declarative lattice model: geometry, species, and density-density
//! interactions.  A validated [`ModelSpec`] is the single source of truth
//! that every other module consumes.
//!
//! Conventions fixed here and relied on everywhere else:
//! - sites are 0-based; edges are unordered pairs stored as (min, max);
//! - each species carries its own hopping amplitude, per-site potentials,
//!   and the subset of edges it may traverse;
//! - a species can reach exactly the sites touched by its allowed edges
//!   (a species with no edges at all may sit anywhere).

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("lattice must have at least one site")]
    NoSites,
    #[error("site {site} out of range for {num_sites} sites")]
    SiteOutOfRange { site: usize, num_sites: usize },
    #[error("edge ({0}, {0}) is a self-loop")]
    SelfLoop(usize),
    #[error("edge ({0}, {1}) listed more than once")]
    DuplicateEdge(usize, usize),
    #[error("model must declare at least one species")]
    NoSpecies,
    #[error("species label {0:?} declared more than once")]
    DuplicateSpecies(String),
    #[error("species {0:?} not declared in the model")]
    UnknownSpecies(String),
    #[error("species {label:?}: {got} site potentials for {want} sites")]
    PotentialLength { label: String, got: usize, want: usize },
    #[error("species {label:?}: allowed edge ({a}, {b}) is not a lattice edge")]
    EdgeNotInLattice { label: String, a: usize, b: usize },
    #[error("interaction pairs a species with itself: {0:?}")]
    SelfInteraction(String),
    #[error("non-finite coupling in {0}")]
    NonFinite(String),
    #[error("site label list has {got} entries for {want} sites")]
    SiteLabelLength { got: usize, want: usize },
    #[error("ring length must be at least 2, got {0}")]
    RingTooShort(usize),
    #[error("base model already contains a species labelled {0:?}")]
    PhiAlreadyPresent(String),
}

/// Site count plus undirected edge list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub num_sites: usize,
    pub edges: Vec<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub site_labels: Option<Vec<String>>,
}

/// One distinguishable fermion species.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeciesSpec {
    pub label: String,
    pub hopping: f64,
    /// one entry per lattice site
    pub site_potentials: Vec<f64>,
    /// subset of the lattice edges this species may traverse
    pub allowed_edges: Vec<(usize, usize)>,
}

/// Density-density coupling between two species on a set of sites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionSpec {
    pub species_pair: (String, String),
    pub strength: f64,
    /// sites where the n*n term acts
    pub sites: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub lattice: LatticeSpec,
    pub species: Vec<SpeciesSpec>,
    pub interactions: Vec<InteractionSpec>,
}

fn normalize_edge(a: usize, b: usize) -> (usize, usize) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Validate and normalize a model.  Edges are stored as (min, max); every
/// cross-reference (labels, sites, edge subsets) is checked here so that
/// downstream code can index without further bounds checks.
pub fn build_model(
    lattice: LatticeSpec,
    species: Vec<SpeciesSpec>,
    interactions: Vec<InteractionSpec>,
) -> Result<ModelSpec, ModelError> {
    if lattice.num_sites == 0 {
        return Err(ModelError::NoSites);
    }
    if let Some(labels) = &lattice.site_labels {
        if labels.len() != lattice.num_sites {
            return Err(ModelError::SiteLabelLength { got: labels.len(), want: lattice.num_sites });
        }
    }
    let mut edges = Vec::with_capacity(lattice.edges.len());
    for &(a, b) in &lattice.edges {
        for site in [a, b] {
            if site >= lattice.num_sites {
                return Err(ModelError::SiteOutOfRange { site, num_sites: lattice.num_sites });
            }
        }
        if a == b {
            return Err(ModelError::SelfLoop(a));
        }
        let e = normalize_edge(a, b);
        if edges.contains(&e) {
            return Err(ModelError::DuplicateEdge(e.0, e.1));
        }
        edges.push(e);
    }
    let lattice = LatticeSpec { edges, ..lattice };

    if species.is_empty() {
        return Err(ModelError::NoSpecies);
    }
    let mut normalized_species = Vec::with_capacity(species.len());
    for sp in species {
        if normalized_species.iter().any(|s: &SpeciesSpec| s.label == sp.label) {
            return Err(ModelError::DuplicateSpecies(sp.label));
        }
        if !sp.hopping.is_finite() {
            return Err(ModelError::NonFinite(format!("hopping of species {:?}", sp.label)));
        }
        if sp.site_potentials.len() != lattice.num_sites {
            return Err(ModelError::PotentialLength {
                label: sp.label,
                got: sp.site_potentials.len(),
                want: lattice.num_sites,
            });
        }
        if sp.site_potentials.iter().any(|u| !u.is_finite()) {
            return Err(ModelError::NonFinite(format!("site potential of species {:?}", sp.label)));
        }
        let mut allowed = Vec::with_capacity(sp.allowed_edges.len());
        for &(a, b) in &sp.allowed_edges {
            let e = normalize_edge(a, b);
            if !lattice.edges.contains(&e) {
                return Err(ModelError::EdgeNotInLattice { label: sp.label, a: e.0, b: e.1 });
            }
            if allowed.contains(&e) {
                return Err(ModelError::DuplicateEdge(e.0, e.1));
            }
            allowed.push(e);
        }
        normalized_species.push(SpeciesSpec { allowed_edges: allowed, ..sp });
    }

    for it in &interactions {
        for label in [&it.species_pair.0, &it.species_pair.1] {
            if !normalized_species.iter().any(|s| &s.label == label) {
                return Err(ModelError::UnknownSpecies(label.clone()));
            }
        }
        if it.species_pair.0 == it.species_pair.1 {
            return Err(ModelError::SelfInteraction(it.species_pair.0.clone()));
        }
        if !it.strength.is_finite() {
            return Err(ModelError::NonFinite(format!(
                "interaction ({:?}, {:?})",
                it.species_pair.0, it.species_pair.1
            )));
        }
        for &site in &it.sites {
            if site >= lattice.num_sites {
                return Err(ModelError::SiteOutOfRange { site, num_sites: lattice.num_sites });
            }
        }
    }

    Ok(ModelSpec { lattice, species: normalized_species, interactions })
}

/// Periodic chain with two species ("tau", "ups"), equal hopping on all
/// edges, and an on-site density-density coupling on every site.
pub fn ring_model(length: usize, hopping: f64, interaction: f64) -> Result<ModelSpec, ModelError> {
    if length < 2 {
        return Err(ModelError::RingTooShort(length));
    }
    let mut edges: Vec<(usize, usize)> = (0..length - 1).map(|i| (i, i + 1)).collect();
    let wrap = normalize_edge(length - 1, 0);
    if edges.contains(&wrap) {
        // length 2: the wrap-around edge coincides with (0, 1)
        log::warn!("ring of length {length} keeps a single edge (0, 1)");
    } else {
        edges.push(wrap);
    }
    let species = ["tau", "ups"]
        .into_iter()
        .map(|label| SpeciesSpec {
            label: label.to_string(),
            hopping,
            site_potentials: vec![0.0; length],
            allowed_edges: edges.clone(),
        })
        .collect();
    let interactions = vec![InteractionSpec {
        species_pair: ("tau".to_string(), "ups".to_string()),
        strength: interaction,
        sites: (0..length).collect(),
    }];
    build_model(LatticeSpec { num_sites: length, edges, site_labels: None }, species, interactions)
}

/// Extend a two-species model with an auxiliary site and a third species
/// ("phi") that hops only between `attach_site` and the new site, coupled
/// to "tau" by a density-density term on the attachment site.
pub fn phi_extended_model(
    base: &ModelSpec,
    attach_site: usize,
    j_phi: f64,
    u_tau_phi: f64,
) -> Result<ModelSpec, ModelError> {
    if base.species.iter().any(|s| s.label == "phi") {
        return Err(ModelError::PhiAlreadyPresent("phi".to_string()));
    }
    if !base.species.iter().any(|s| s.label == "tau") {
        return Err(ModelError::UnknownSpecies("tau".to_string()));
    }
    if attach_site >= base.lattice.num_sites {
        return Err(ModelError::SiteOutOfRange {
            site: attach_site,
            num_sites: base.lattice.num_sites,
        });
    }
    let aux = base.lattice.num_sites;
    let num_sites = aux + 1;
    let phi_edge = (attach_site, aux);
    let mut edges = base.lattice.edges.clone();
    edges.push(phi_edge);
    let mut species: Vec<SpeciesSpec> = base
        .species
        .iter()
        .cloned()
        .map(|mut sp| {
            // the new site exists for every species; only phi can reach it
            sp.site_potentials.push(0.0);
            sp
        })
        .collect();
    species.push(SpeciesSpec {
        label: "phi".to_string(),
        hopping: j_phi,
        site_potentials: vec![0.0; num_sites],
        allowed_edges: vec![phi_edge],
    });
    let mut interactions = base.interactions.clone();
    interactions.push(InteractionSpec {
        species_pair: ("tau".to_string(), "phi".to_string()),
        strength: u_tau_phi,
        sites: vec![attach_site],
    });
    build_model(
        LatticeSpec { num_sites, edges, site_labels: base.lattice.site_labels.clone() },
        species,
        interactions,
    )
}

impl ModelSpec {
    pub fn num_sites(&self) -> usize {
        self.lattice.num_sites
    }

    pub fn num_species(&self) -> usize {
        self.species.len()
    }

    pub fn species_index(&self, label: &str) -> Result<usize, ModelError> {
        self.species
            .iter()
            .position(|s| s.label == label)
            .ok_or_else(|| ModelError::UnknownSpecies(label.to_string()))
    }

    /// Sites a species can occupy: the endpoints of its allowed edges, or
    /// every site if it has no edges (an immobile species may sit anywhere).
    pub fn accessible_sites(&self, species: usize) -> Vec<usize> {
        let sp = &self.species[species];
        if sp.allowed_edges.is_empty() {
            return (0..self.lattice.num_sites).collect();
        }
        let mut sites: Vec<usize> =
            sp.allowed_edges.iter().flat_map(|&(a, b)| [a, b]).collect();
        sites.sort_unstable();
        sites.dedup();
        sites
    }

    /// SHA-256 of the canonical JSON form, for run provenance records.
    pub fn canonical_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("model serialization cannot fail");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

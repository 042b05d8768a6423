//! Mixed reference ensembles on a sector.
//!
//! Two ensembles serve as thermal baselines for the pure-state dynamics:
//! the uniform mixture over the whole sector, rho = I/dim, and the uniform
//! mixture over the eigenstates inside an energy window |E - center| <=
//! delta_e.  Subsystem entropies and mutual informations of these mixed
//! states reuse the fermionic reduction machinery of [`crate::entanglement`].

use crate::dynamics::EigenSystem;
use crate::entanglement::{
    reduce_density_full, summarize_pairs, species_site_union, von_neumann_entropy,
    EntanglementError, MIStatistics, Mode,
};
use crate::fock::FockBasis;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

type C64 = Complex64;

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("no eigenstates fall inside the energy window {center} +- {delta_e}")]
    EmptyWindow { center: f64, delta_e: f64 },
    #[error("energy window needs a center: none given and no state to take one from")]
    NoCenter,
    #[error("invalid ensemble parameter: {0}")]
    BadSpec(String),
    #[error(transparent)]
    Entanglement(#[from] EntanglementError),
}

fn default_energy_halfwidth() -> f64 {
    0.5
}

/// Which mixed state to build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnsembleSpec {
    /// I / dim over the whole sector
    SectorUniform,
    /// equal weights on the eigenstates with |E - center| <= delta_e;
    /// `center` defaults to the energy of the run's initial state
    EnergyWindow {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<f64>,
        #[serde(default = "default_energy_halfwidth")]
        delta_e: f64,
    },
}

/// A constructed ensemble: the sector density matrix plus bookkeeping.
pub struct EnsembleDensity {
    pub rho: DMatrix<C64>,
    /// eigenstates (or basis states) carrying weight
    pub states: usize,
    pub label: String,
}

/// Build the density matrix for a spec.  `fallback_center` seeds the
/// energy-window center when the spec leaves it out.
pub fn build_ensemble(
    eig: &EigenSystem,
    spec: &EnsembleSpec,
    fallback_center: Option<f64>,
) -> Result<EnsembleDensity, EnsembleError> {
    match spec {
        EnsembleSpec::SectorUniform => {
            let dim = eig.dim();
            let w = C64::new(1.0 / dim as f64, 0.0);
            Ok(EnsembleDensity {
                rho: DMatrix::from_diagonal_element(dim, dim, w),
                states: dim,
                label: "sector_uniform".to_string(),
            })
        }
        EnsembleSpec::EnergyWindow { center, delta_e } => {
            if !(delta_e.is_finite() && *delta_e > 0.0) {
                return Err(EnsembleError::BadSpec(format!(
                    "energy half-width must be positive and finite, got {delta_e}"
                )));
            }
            let center = center.or(fallback_center).ok_or(EnsembleError::NoCenter)?;
            if !center.is_finite() {
                return Err(EnsembleError::BadSpec(format!("non-finite center {center}")));
            }
            let picked: Vec<usize> = (0..eig.dim())
                .filter(|&k| (eig.eigenvalues[k] - center).abs() <= *delta_e)
                .collect();
            if picked.is_empty() {
                return Err(EnsembleError::EmptyWindow { center, delta_e: *delta_e });
            }
            let dim = eig.dim();
            let mut window = DMatrix::from_element(dim, picked.len(), C64::new(0.0, 0.0));
            for (dst, &k) in picked.iter().enumerate() {
                window.set_column(dst, &eig.vectors.column(k));
            }
            let rho = &window * window.adjoint() / C64::new(picked.len() as f64, 0.0);
            Ok(EnsembleDensity {
                rho,
                states: picked.len(),
                label: format!("energy_window_{center:+.6}_{delta_e:.6}"),
            })
        }
    }
}

/// Entropy of the (species, site) modes of a mixed sector state.
pub fn ensemble_entropy(
    basis: &FockBasis,
    rho: &DMatrix<C64>,
    sites: &[usize],
    species: &[usize],
) -> Result<f64, EnsembleError> {
    let reduced = reduce_density_full(basis, rho, &site_species_modes(sites, species))?;
    Ok(von_neumann_entropy(&reduced)?)
}

/// I(i:j) of a mixed sector state over the listed species' modes.
pub fn ensemble_mutual_information(
    basis: &FockBasis,
    rho: &DMatrix<C64>,
    site_i: usize,
    site_j: usize,
    species: &[usize],
) -> Result<f64, EnsembleError> {
    let si = ensemble_entropy(basis, rho, &[site_i], species)?;
    let sj = ensemble_entropy(basis, rho, &[site_j], species)?;
    let sij = ensemble_entropy(basis, rho, &[site_i, site_j], species)?;
    Ok((si + sj - sij).max(0.0))
}

/// Pairwise mutual information of a mixed state over every site pair the
/// selected species can reach, with mean and population sigma.
pub fn ensemble_pairwise_mi_stats(
    basis: &FockBasis,
    rho: &DMatrix<C64>,
    species: &[usize],
) -> Result<MIStatistics, EnsembleError> {
    let sites = species_site_union(basis, species)?;
    let mut single = HashMap::new();
    for &i in &sites {
        single.insert(i, ensemble_entropy(basis, rho, &[i], species)?);
    }
    let mut pairs = Vec::new();
    for (a, &i) in sites.iter().enumerate() {
        for &j in &sites[a + 1..] {
            let sij = ensemble_entropy(basis, rho, &[i, j], species)?;
            pairs.push(((i, j), (single[&i] + single[&j] - sij).max(0.0)));
        }
    }
    Ok(summarize_pairs(pairs))
}

fn site_species_modes(sites: &[usize], species: &[usize]) -> Vec<Mode> {
    let mut modes: Vec<Mode> =
        species.iter().flat_map(|&s| sites.iter().map(move |&site| (s, site))).collect();
    modes.sort_unstable();
    modes
}

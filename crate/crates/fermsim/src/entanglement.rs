//! Reduced density matrices of mode subsets, von Neumann entropy, and
//! pairwise mutual information.
//!
//! A subsystem is a list of modes (species, site).  Within each species the
//! target modes are brought to the front of that species' ordering; the
//! exchange sign of a configuration is (-1)^m where m counts occupied
//! (complement, target) mode pairs whose order flips, i.e. the parity any
//! schedule of adjacent transpositions would accumulate.  Modes of
//! different species commute, so no sign crosses a species boundary.
//!
//! Matrices are stored compactly over the subsystem configurations that
//! actually occur in the sector; absent configurations carry zero weight
//! and do not affect spectra.  Entropies use the natural logarithm.

use crate::fock::{FockBasis, FockConfiguration};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::collections::{BTreeMap, HashMap};
use thiserror::Error;

type C64 = Complex64;

/// One mode: (species index, site index).
pub type Mode = (usize, usize);

#[derive(Debug, Error, PartialEq)]
pub enum EntanglementError {
    #[error("mode (species {0}, site {1}) out of range")]
    ModeOutOfRange(usize, usize),
    #[error("mode (species {0}, site {1}) listed twice")]
    DuplicateMode(usize, usize),
    #[error("subsystem must contain at least one mode")]
    EmptySubsystem,
    #[error("state length {got} does not match basis dimension {want}")]
    DimensionMismatch { got: usize, want: usize },
    #[error("density matrix trace deviates from 1 by {0:.3e}")]
    TraceDeviation(f64),
    #[error("species index {0} out of range")]
    SpeciesOutOfRange(usize),
}

/// Hermitian, unit-trace matrix over a labelled set of subsystem
/// configurations.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    /// modes spanned, canonical order (species-major, site ascending);
    /// `None` for a full-sector density
    pub modes: Option<Vec<Mode>>,
    /// occupation pattern of each row/column over `modes` (first mode most
    /// significant); `None` for a full-sector density
    pub keys: Option<Vec<u64>>,
    pub matrix: DMatrix<C64>,
}

impl DensityMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|i| self.matrix[(i, i)]).sum()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.dim() {
            for c in r..self.dim() {
                worst = worst.max((self.matrix[(r, c)] - self.matrix[(c, r)].conj()).norm());
            }
        }
        worst
    }

    /// Expand the compact matrix to the full 2^m space of its mode list,
    /// placing entries at their occupation-pattern indices.
    pub fn to_full_dense(&self) -> DMatrix<C64> {
        let modes = self.modes.as_ref().expect("full expansion needs a mode list");
        let keys = self.keys.as_ref().expect("full expansion needs keys");
        assert!(modes.len() <= 20, "full expansion limited to small subsystems");
        let full = 1usize << modes.len();
        let mut m = DMatrix::from_element(full, full, C64::new(0.0, 0.0));
        for (r, &kr) in keys.iter().enumerate() {
            for (c, &kc) in keys.iter().enumerate() {
                m[(kr as usize, kc as usize)] = self.matrix[(r, c)];
            }
        }
        m
    }
}

/// Per-species masks describing a subsystem split.
struct ModeSplit {
    /// target sites per species, ascending
    target_sites: Vec<Vec<usize>>,
    target_mask: Vec<u64>,
}

impl ModeSplit {
    fn new(basis: &FockBasis, modes: &[Mode]) -> Result<Self, EntanglementError> {
        if modes.is_empty() {
            return Err(EntanglementError::EmptySubsystem);
        }
        let num_species = basis.model.num_species();
        let num_sites = basis.model.num_sites();
        let mut target_sites = vec![Vec::new(); num_species];
        let mut target_mask = vec![0u64; num_species];
        let mut sorted: Vec<Mode> = modes.to_vec();
        sorted.sort_unstable();
        for &(s, site) in &sorted {
            if s >= num_species || site >= num_sites {
                return Err(EntanglementError::ModeOutOfRange(s, site));
            }
            if target_mask[s] >> site & 1 == 1 {
                return Err(EntanglementError::DuplicateMode(s, site));
            }
            target_mask[s] |= 1 << site;
            target_sites[s].push(site);
        }
        Ok(ModeSplit { target_sites, target_mask })
    }

    fn canonical_modes(&self) -> Vec<Mode> {
        self.target_sites
            .iter()
            .enumerate()
            .flat_map(|(s, sites)| sites.iter().map(move |&site| (s, site)))
            .collect()
    }

    /// Split a configuration into (subsystem pattern, complement pattern,
    /// exchange sign).  Patterns pack the respective modes species-major,
    /// site ascending, first mode most significant.
    fn project(&self, config: &FockConfiguration, num_sites: usize) -> (u64, u64, f64) {
        let mut a_key = 0u64;
        let mut b_key = 0u64;
        let mut flips = 0u32;
        for (s, &occ) in config.occ.iter().enumerate() {
            let tmask = self.target_mask[s];
            for &site in &self.target_sites[s] {
                a_key = (a_key << 1) | (occ >> site & 1);
                if occ >> site & 1 == 1 {
                    // occupied complement modes of this species below the
                    // target each contribute one transposition
                    let below = occ & !tmask & ((1u64 << site) - 1);
                    flips += below.count_ones();
                }
            }
            for site in 0..num_sites {
                if tmask >> site & 1 == 0 {
                    b_key = (b_key << 1) | (occ >> site & 1);
                }
            }
        }
        let sign = if flips % 2 == 0 { 1.0 } else { -1.0 };
        (a_key, b_key, sign)
    }
}

/// Reduced density matrix of an arbitrary mode set of a pure state.
pub fn reduced_density_matrix_modes(
    basis: &FockBasis,
    state: &DVector<C64>,
    modes: &[Mode],
) -> Result<DensityMatrix, EntanglementError> {
    if state.len() != basis.dim() {
        return Err(EntanglementError::DimensionMismatch { got: state.len(), want: basis.dim() });
    }
    let split = ModeSplit::new(basis, modes)?;
    let num_sites = basis.model.num_sites();
    // BTreeMap so the accumulation order (and thus roundoff) is reproducible
    let mut groups: BTreeMap<u64, Vec<(u64, C64)>> = BTreeMap::new();
    for (i, config) in basis.configs().iter().enumerate() {
        let (a, b, sign) = split.project(config, num_sites);
        groups.entry(b).or_default().push((a, state[i] * C64::new(sign, 0.0)));
    }
    let mut keys: Vec<u64> = groups.values().flatten().map(|&(a, _)| a).collect();
    keys.sort_unstable();
    keys.dedup();
    let pos: HashMap<u64, usize> = keys.iter().enumerate().map(|(p, &k)| (k, p)).collect();
    let mut matrix = DMatrix::from_element(keys.len(), keys.len(), C64::new(0.0, 0.0));
    for members in groups.values() {
        for &(a1, amp1) in members {
            for &(a2, amp2) in members {
                matrix[(pos[&a1], pos[&a2])] += amp1 * amp2.conj();
            }
        }
    }
    Ok(DensityMatrix { modes: Some(split.canonical_modes()), keys: Some(keys), matrix })
}

/// Reduced density matrix of the modes (species, site) for every requested
/// species on every requested site.
pub fn reduced_density_matrix(
    basis: &FockBasis,
    state: &DVector<C64>,
    sites: &[usize],
    species: &[usize],
) -> Result<DensityMatrix, EntanglementError> {
    reduced_density_matrix_modes(basis, state, &site_species_modes(sites, species))
}

fn site_species_modes(sites: &[usize], species: &[usize]) -> Vec<Mode> {
    let mut modes: Vec<Mode> =
        species.iter().flat_map(|&s| sites.iter().map(move |&site| (s, site))).collect();
    modes.sort_unstable();
    modes
}

/// Reduce a full-sector density matrix (e.g. a mixed ensemble) over a mode
/// set, with the same sign convention as the pure-state path.
pub fn reduce_density_full(
    basis: &FockBasis,
    rho: &DMatrix<C64>,
    modes: &[Mode],
) -> Result<DensityMatrix, EntanglementError> {
    if rho.nrows() != basis.dim() || rho.ncols() != basis.dim() {
        return Err(EntanglementError::DimensionMismatch { got: rho.nrows(), want: basis.dim() });
    }
    let split = ModeSplit::new(basis, modes)?;
    let num_sites = basis.model.num_sites();
    let mut groups: BTreeMap<u64, Vec<(u64, usize, f64)>> = BTreeMap::new();
    for (i, config) in basis.configs().iter().enumerate() {
        let (a, b, sign) = split.project(config, num_sites);
        groups.entry(b).or_default().push((a, i, sign));
    }
    let mut keys: Vec<u64> = groups.values().flatten().map(|&(a, _, _)| a).collect();
    keys.sort_unstable();
    keys.dedup();
    let pos: HashMap<u64, usize> = keys.iter().enumerate().map(|(p, &k)| (k, p)).collect();
    let mut matrix = DMatrix::from_element(keys.len(), keys.len(), C64::new(0.0, 0.0));
    for members in groups.values() {
        for &(a1, i1, s1) in members {
            for &(a2, i2, s2) in members {
                matrix[(pos[&a1], pos[&a2])] += rho[(i1, i2)] * C64::new(s1 * s2, 0.0);
            }
        }
    }
    Ok(DensityMatrix { modes: Some(split.canonical_modes()), keys: Some(keys), matrix })
}

/// Eigenvalue floor below which density-matrix weights are treated as zero.
pub const EIGENVALUE_CLIP: f64 = 1e-12;
/// Largest tolerated deviation of a density-matrix trace from 1.
pub const TRACE_TOLERANCE: f64 = 1e-8;

/// S = -sum p ln p over the eigenvalues of a unit-trace Hermitian matrix,
/// with eigenvalues below [`EIGENVALUE_CLIP`] dropped.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64, EntanglementError> {
    let defect = (rho.trace() - C64::new(1.0, 0.0)).norm();
    if defect > TRACE_TOLERANCE {
        return Err(EntanglementError::TraceDeviation(defect));
    }
    let eig = rho.matrix.clone().symmetric_eigen();
    let mut s = 0.0;
    for &p in eig.eigenvalues.iter() {
        if p > EIGENVALUE_CLIP {
            s -= p * p.ln();
        }
    }
    Ok(s)
}

/// Mutual information I(i:j) = S_i + S_j - S_ij between two sites, using
/// the listed species' modes on each site.  Clamped at zero against
/// roundoff.
pub fn mutual_information(
    basis: &FockBasis,
    state: &DVector<C64>,
    site_i: usize,
    site_j: usize,
    species: &[usize],
) -> Result<f64, EntanglementError> {
    let si = von_neumann_entropy(&reduced_density_matrix(basis, state, &[site_i], species)?)?;
    let sj = von_neumann_entropy(&reduced_density_matrix(basis, state, &[site_j], species)?)?;
    let sij =
        von_neumann_entropy(&reduced_density_matrix(basis, state, &[site_i, site_j], species)?)?;
    let mi = si + sj - sij;
    debug_assert!(mi > -1e-9, "mutual information {mi} below roundoff floor");
    Ok(mi.max(0.0))
}

/// Mutual information of every site pair plus mean and population standard
/// deviation.  Pairs run over the sites the selected species can reach.
#[derive(Debug, Clone)]
pub struct MIStatistics {
    pub pairs: Vec<((usize, usize), f64)>,
    pub mean: f64,
    pub sigma: f64,
}

pub fn pairwise_mi_stats(
    basis: &FockBasis,
    state: &DVector<C64>,
    species: &[usize],
) -> Result<MIStatistics, EntanglementError> {
    let sites = species_site_union(basis, species)?;
    // single-site entropies once, pair entropies per pair
    let mut single = HashMap::new();
    for &i in &sites {
        let s = von_neumann_entropy(&reduced_density_matrix(basis, state, &[i], species)?)?;
        single.insert(i, s);
    }
    let mut pairs = Vec::new();
    for (a, &i) in sites.iter().enumerate() {
        for &j in &sites[a + 1..] {
            let sij =
                von_neumann_entropy(&reduced_density_matrix(basis, state, &[i, j], species)?)?;
            let mi = (single[&i] + single[&j] - sij).max(0.0);
            pairs.push(((i, j), mi));
        }
    }
    Ok(summarize_pairs(pairs))
}

pub(crate) fn summarize_pairs(pairs: Vec<((usize, usize), f64)>) -> MIStatistics {
    let n = pairs.len() as f64;
    let mean = pairs.iter().map(|&(_, v)| v).sum::<f64>() / n;
    let var = pairs.iter().map(|&(_, v)| (v - mean) * (v - mean)).sum::<f64>() / n;
    MIStatistics { pairs, mean, sigma: var.sqrt() }
}

/// Sites reachable by at least one of the given species, ascending.
pub fn species_site_union(
    basis: &FockBasis,
    species: &[usize],
) -> Result<Vec<usize>, EntanglementError> {
    let mut sites: Vec<usize> = Vec::new();
    for &s in species {
        if s >= basis.model.num_species() {
            return Err(EntanglementError::SpeciesOutOfRange(s));
        }
        sites.extend(basis.model.accessible_sites(s));
    }
    sites.sort_unstable();
    sites.dedup();
    Ok(sites)
}

/// Every mode of the basis, canonical order.
pub fn all_modes(basis: &FockBasis) -> Vec<Mode> {
    let num_sites = basis.model.num_sites();
    (0..basis.model.num_species())
        .flat_map(|s| (0..num_sites).map(move |site| (s, site)))
        .collect()
}

/// Complement of a mode list within the full mode set.
pub fn complement_modes(basis: &FockBasis, modes: &[Mode]) -> Vec<Mode> {
    all_modes(basis).into_iter().filter(|m| !modes.contains(m)).collect()
}

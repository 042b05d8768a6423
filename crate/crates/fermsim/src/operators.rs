//! Sparse operators on a sector basis: the Hamiltonian, mode occupations,
//! bond currents, and local phase unitaries.
//!
//! The Hamiltonian convention is +J (c^+_i c_j + c^+_j c_i) per allowed
//! edge, plus per-mode site potentials and density-density interactions.
//! The bond current on an ordered bond (a, b) is
//! i * sum_s J_s (c^+_a c_b - c^+_b c_a), summed over the species that may
//! traverse the bond.

use crate::fock::{apply_hop, FockBasis, FockError};
use crate::model::ModelSpec;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

type C64 = Complex64;

#[derive(Debug, Error, PartialEq)]
pub enum OperatorError {
    #[error("basis was enumerated for a different model")]
    ModelMismatch,
    #[error("site {site} out of range for {num_sites} sites")]
    SiteOutOfRange { site: usize, num_sites: usize },
    #[error("species index {0} out of range")]
    SpeciesOutOfRange(usize),
    #[error("bond ({0}, {1}) is not a lattice edge")]
    NotAnEdge(usize, usize),
    #[error(transparent)]
    Fock(#[from] FockError),
}

/// Triplet-form sparse operator on a sector basis.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    pub dim: usize,
    /// (row, col, value), ordering deterministic in the assembly inputs
    pub triplets: Vec<(usize, usize, C64)>,
    pub hermitian: bool,
}

impl SparseOperator {
    pub fn apply(&self, v: &DVector<C64>) -> DVector<C64> {
        assert_eq!(v.len(), self.dim);
        let mut out = DVector::from_element(self.dim, C64::new(0.0, 0.0));
        for &(r, c, val) in &self.triplets {
            out[r] += val * v[c];
        }
        out
    }

    pub fn expectation(&self, v: &DVector<C64>) -> C64 {
        let av = self.apply(v);
        v.dotc(&av)
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::from_element(self.dim, self.dim, C64::new(0.0, 0.0));
        for &(r, c, v) in &self.triplets {
            m[(r, c)] += v;
        }
        m
    }

    /// Largest deviation |A - A^+| over all entries.
    pub fn hermiticity_defect(&self) -> f64 {
        let m = self.to_dense();
        let mut worst = 0.0f64;
        for r in 0..self.dim {
            for c in r..self.dim {
                worst = worst.max((m[(r, c)] - m[(c, r)].conj()).norm());
            }
        }
        worst
    }
}

/// Operator diagonal in the occupation basis (occupations, phase pulses).
#[derive(Debug, Clone)]
pub struct DiagonalOperator {
    pub values: DVector<C64>,
}

impl DiagonalOperator {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn apply(&self, v: &DVector<C64>) -> DVector<C64> {
        assert_eq!(v.len(), self.values.len());
        v.component_mul(&self.values)
    }

    pub fn expectation(&self, v: &DVector<C64>) -> C64 {
        v.iter().zip(self.values.iter()).map(|(a, d)| a.conj() * d * a).sum()
    }

    pub fn dagger(&self) -> DiagonalOperator {
        DiagonalOperator { values: self.values.map(|z| z.conj()) }
    }

    /// Largest deviation of |entry| from 1.
    pub fn unitarity_defect(&self) -> f64 {
        self.values.iter().map(|z| (z.norm() - 1.0).abs()).fold(0.0, f64::max)
    }
}

fn check_site_species(
    model: &ModelSpec,
    site: usize,
    species: usize,
) -> Result<(), OperatorError> {
    if species >= model.num_species() {
        return Err(OperatorError::SpeciesOutOfRange(species));
    }
    if site >= model.num_sites() {
        return Err(OperatorError::SiteOutOfRange { site, num_sites: model.num_sites() });
    }
    Ok(())
}

/// Assemble the sector Hamiltonian: hopping over each species' allowed
/// edges, site potentials, and density-density interactions.
pub fn build_hamiltonian(
    model: &ModelSpec,
    basis: &FockBasis,
) -> Result<SparseOperator, OperatorError> {
    if *model != basis.model {
        return Err(OperatorError::ModelMismatch);
    }
    let dim = basis.dim();
    let mut triplets = Vec::new();
    // interactions resolved to species indices once
    let interactions: Vec<(usize, usize, f64, &Vec<usize>)> = model
        .interactions
        .iter()
        .map(|it| {
            let a = model.species_index(&it.species_pair.0).expect("validated");
            let b = model.species_index(&it.species_pair.1).expect("validated");
            (a, b, it.strength, &it.sites)
        })
        .collect();
    for (col, config) in basis.configs().iter().enumerate() {
        // hopping: both directions of every allowed edge
        for (s, sp) in model.species.iter().enumerate() {
            if sp.hopping == 0.0 {
                continue;
            }
            for &(a, b) in &sp.allowed_edges {
                for (from, to) in [(a, b), (b, a)] {
                    if let Some((moved, sign)) = apply_hop(config, s, from, to) {
                        let row = basis.index_of(&moved).expect("hop stays inside the sector");
                        triplets.push((row, col, C64::new(sp.hopping * sign, 0.0)));
                    }
                }
            }
        }
        // diagonal: potentials and interactions
        let mut diag = 0.0;
        for (s, sp) in model.species.iter().enumerate() {
            for (site, &u) in sp.site_potentials.iter().enumerate() {
                if u != 0.0 && config.occupied(s, site) {
                    diag += u;
                }
            }
        }
        for &(a, b, strength, sites) in &interactions {
            for &site in sites {
                if config.occupied(a, site) && config.occupied(b, site) {
                    diag += strength;
                }
            }
        }
        if diag != 0.0 {
            triplets.push((col, col, C64::new(diag, 0.0)));
        }
    }
    Ok(SparseOperator { dim, triplets, hermitian: true })
}

/// Occupation of one mode (site, species) as a diagonal operator.
pub fn number_operator(
    basis: &FockBasis,
    site: usize,
    species: usize,
) -> Result<DiagonalOperator, OperatorError> {
    check_site_species(&basis.model, site, species)?;
    let values = DVector::from_iterator(
        basis.dim(),
        basis.configs().iter().map(|c| {
            C64::new(if c.occupied(species, site) { 1.0 } else { 0.0 }, 0.0)
        }),
    );
    Ok(DiagonalOperator { values })
}

/// Particle current through the ordered bond (a, b), summed over the given
/// species (those unable to traverse the bond contribute nothing):
/// i * sum_s J_s (c^+_a c_b - c^+_b c_a).
pub fn bond_current_operator(
    basis: &FockBasis,
    bond: (usize, usize),
    species: &[usize],
) -> Result<SparseOperator, OperatorError> {
    let model = &basis.model;
    let (a, b) = bond;
    check_site_species(model, a, 0)?;
    check_site_species(model, b, 0)?;
    let normalized = (a.min(b), a.max(b));
    if !model.lattice.edges.contains(&normalized) {
        return Err(OperatorError::NotAnEdge(a, b));
    }
    let mut triplets = Vec::new();
    for &s in species {
        if s >= model.num_species() {
            return Err(OperatorError::SpeciesOutOfRange(s));
        }
        let sp = &model.species[s];
        if !sp.allowed_edges.contains(&normalized) || sp.hopping == 0.0 {
            continue;
        }
        for (col, config) in basis.configs().iter().enumerate() {
            // i J c^+_a c_b moves a particle b -> a
            if let Some((moved, sign)) = apply_hop(config, s, b, a) {
                let row = basis.index_of(&moved).expect("hop stays inside the sector");
                triplets.push((row, col, C64::new(0.0, sp.hopping * sign)));
            }
            // -i J c^+_b c_a moves a particle a -> b
            if let Some((moved, sign)) = apply_hop(config, s, a, b) {
                let row = basis.index_of(&moved).expect("hop stays inside the sector");
                triplets.push((row, col, C64::new(0.0, -sp.hopping * sign)));
            }
        }
    }
    Ok(SparseOperator { dim: basis.dim(), triplets, hermitian: true })
}

/// Diagonal unitary exp(-i * strength * duration * n_{site, species}):
/// the accumulated action of a local potential of the given strength held
/// for the given duration, applied as one instantaneous phase.
pub fn local_phase_unitary(
    basis: &FockBasis,
    site: usize,
    species: usize,
    strength: f64,
    duration: f64,
) -> Result<DiagonalOperator, OperatorError> {
    check_site_species(&basis.model, site, species)?;
    let phase = C64::new(0.0, -strength * duration).exp();
    let values = DVector::from_iterator(
        basis.dim(),
        basis.configs().iter().map(|c| {
            if c.occupied(species, site) {
                phase
            } else {
                C64::new(1.0, 0.0)
            }
        }),
    );
    Ok(DiagonalOperator { values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{enumerate_sector, parse_state_string};
    use crate::model::{build_model, ring_model, LatticeSpec, SpeciesSpec};

    fn ring6_sector33() -> (ModelSpec, FockBasis) {
        let m = ring_model(6, 1.0, -0.05).unwrap();
        let basis = enumerate_sector(&m, &[3, 3]).unwrap();
        (m, basis)
    }

    #[test]
    fn hamiltonian_is_hermitian_and_real() {
        let (m, basis) = ring6_sector33();
        let h = build_hamiltonian(&m, &basis).unwrap();
        assert!(h.hermiticity_defect() < 1e-12);
        assert!(h.triplets.iter().all(|&(_, _, v)| v.im == 0.0));
    }

    #[test]
    fn reference_state_energy_is_three_interaction_quanta() {
        // |111000> x |111000>: three doubly occupied sites, no diagonal
        // hopping contribution
        let (m, basis) = ring6_sector33();
        let h = build_hamiltonian(&m, &basis).unwrap();
        let psi0 = parse_state_string(&m, "|111000>_tau x |111000>_ups").unwrap();
        let idx = basis.index_of(&psi0).unwrap();
        let mut v = DVector::from_element(basis.dim(), C64::new(0.0, 0.0));
        v[idx] = C64::new(1.0, 0.0);
        let e = h.expectation(&v);
        assert!((e.re - 3.0 * -0.05).abs() < 1e-14, "got {e}");
        assert!(e.im.abs() < 1e-14);
    }

    #[test]
    fn zero_couplings_with_potentials_give_a_diagonal_hamiltonian() {
        let m = build_model(
            LatticeSpec { num_sites: 3, edges: vec![(0, 1), (1, 2)], site_labels: None },
            vec![SpeciesSpec {
                label: "tau".into(),
                hopping: 0.0,
                site_potentials: vec![0.3, -0.2, 0.9],
                allowed_edges: vec![(0, 1), (1, 2)],
            }],
            vec![],
        )
        .unwrap();
        let basis = enumerate_sector(&m, &[1]).unwrap();
        let h = build_hamiltonian(&m, &basis).unwrap();
        assert!(h.triplets.iter().all(|&(r, c, _)| r == c));
        let dense = h.to_dense();
        // canonical order puts |001> (site 2 occupied, string "001") first
        // ... actually keys sort "001"<"010"<"100": site 2, site 1, site 0
        let diag: Vec<f64> = (0..3).map(|i| dense[(i, i)].re).collect();
        assert_eq!(diag, vec![0.9, -0.2, 0.3]);
    }

    #[test]
    fn hamiltonian_rejects_mismatched_model() {
        let (_, basis) = ring6_sector33();
        let other = ring_model(6, 1.0, -0.06).unwrap();
        assert_eq!(
            build_hamiltonian(&other, &basis).unwrap_err(),
            OperatorError::ModelMismatch
        );
    }

    #[test]
    fn hamiltonian_matches_full_space_construction_on_a_small_model() {
        // independent route: explicit creation/annihilation matrices on the
        // full 2^8 space of a 4-site path with two species, projected onto
        // the sector
        let m = build_model(
            LatticeSpec { num_sites: 4, edges: vec![(0, 1), (1, 2), (2, 3)], site_labels: None },
            vec![
                SpeciesSpec {
                    label: "tau".into(),
                    hopping: 0.7,
                    site_potentials: vec![0.1, 0.0, -0.4, 0.0],
                    allowed_edges: vec![(0, 1), (1, 2), (2, 3)],
                },
                SpeciesSpec {
                    label: "ups".into(),
                    hopping: -1.3,
                    site_potentials: vec![0.0; 4],
                    allowed_edges: vec![(1, 2)],
                },
            ],
            vec![crate::model::InteractionSpec {
                species_pair: ("tau".into(), "ups".into()),
                strength: 0.25,
                sites: vec![1, 2],
            }],
        )
        .unwrap();
        let basis = enumerate_sector(&m, &[2, 1]).unwrap();
        let h = build_hamiltonian(&m, &basis).unwrap().to_dense();

        let modes = fullspace::ModeSet::new(&[4, 4]);
        let mode_id = |s: usize, site: usize| s * 4 + site;
        let mut full = fullspace::Coo::zeros(256, 256);
        for (s, sp) in m.species.iter().enumerate() {
            for &(a, b) in &sp.allowed_edges {
                let hop = modes
                    .creation(mode_id(s, a))
                    .mul(&modes.annihilation(mode_id(s, b)));
                let term = hop.add(&hop.dagger()).scale(C64::new(sp.hopping, 0.0));
                full = full.add(&term);
            }
            for (site, &u) in sp.site_potentials.iter().enumerate() {
                if u != 0.0 {
                    full = full.add(&modes.number(mode_id(s, site)).scale(C64::new(u, 0.0)));
                }
            }
        }
        for it in &m.interactions {
            let sa = m.species_index(&it.species_pair.0).unwrap();
            let sb = m.species_index(&it.species_pair.1).unwrap();
            for &site in &it.sites {
                let nn = modes.number(mode_id(sa, site)).mul(&modes.number(mode_id(sb, site)));
                full = full.add(&nn.scale(C64::new(it.strength, 0.0)));
            }
        }
        let full = full.to_dense();
        let embed = |c: &crate::fock::FockConfiguration| {
            let pattern: Vec<bool> =
                (0..2).flat_map(|s| (0..4).map(move |x| c.occupied(s, x))).collect();
            modes.index_of(&pattern)
        };
        for (i, ci) in basis.configs().iter().enumerate() {
            for (j, cj) in basis.configs().iter().enumerate() {
                let want = full[(embed(ci), embed(cj))];
                assert!(
                    (h[(i, j)] - want).norm() < 1e-10,
                    "entry ({i}, {j}): sector {} vs full {want}",
                    h[(i, j)]
                );
            }
        }
    }

    #[test]
    fn number_operator_counts_sector_membership() {
        // 200 of the 400 configurations occupy any given mode
        let (_, basis) = ring6_sector33();
        for species in 0..2 {
            for site in 0..6 {
                let n = number_operator(&basis, site, species).unwrap();
                let trace: f64 = n.values.iter().map(|z| z.re).sum();
                assert_eq!(trace, 200.0);
            }
        }
    }

    #[test]
    fn number_operator_rejects_bad_mode() {
        let (_, basis) = ring6_sector33();
        assert!(number_operator(&basis, 6, 0).is_err());
        assert!(number_operator(&basis, 0, 2).is_err());
    }

    #[test]
    fn bond_current_is_hermitian_and_vanishes_on_occupation_states() {
        let (_, basis) = ring6_sector33();
        let j = bond_current_operator(&basis, (0, 1), &[0, 1]).unwrap();
        assert!(j.hermiticity_defect() < 1e-12);
        for idx in [0usize, 57, 399] {
            let mut v = DVector::from_element(basis.dim(), C64::new(0.0, 0.0));
            v[idx] = C64::new(1.0, 0.0);
            let e = j.expectation(&v);
            assert!(e.norm() < 1e-14, "index {idx}: {e}");
        }
    }

    #[test]
    fn bond_current_on_momentum_state_matches_group_velocity() {
        // single tau particle in the k = 2*pi/6 plane wave: the current
        // through each of the 6 bonds is -2 J sin(k) / 6, computed here
        // independently from the quadratic form on the 6 amplitudes
        let m = ring_model(6, 1.0, 0.0).unwrap();
        let basis = enumerate_sector(&m, &[1, 0]).unwrap();
        let k = 2.0 * std::f64::consts::PI / 6.0;
        let mut v = DVector::from_element(6, C64::new(0.0, 0.0));
        for (i, c) in basis.configs().iter().enumerate() {
            let site = (0..6).find(|&s| c.occupied(0, s)).unwrap();
            v[i] = (C64::new(0.0, k * site as f64)).exp() / C64::new(6f64.sqrt(), 0.0);
        }
        let mut total = 0.0;
        for bond in [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0)] {
            let j = bond_current_operator(&basis, bond, &[0, 1]).unwrap();
            let e = j.expectation(&v);
            assert!(e.im.abs() < 1e-14);
            assert!(
                (e.re - (-2.0 * k.sin() / 6.0)).abs() < 1e-12,
                "bond {bond:?}: {}",
                e.re
            );
            total += e.re;
        }
        assert!((total - (-2.0 * k.sin())).abs() < 1e-12);
    }

    #[test]
    fn bond_current_rejects_non_edge() {
        let (_, basis) = ring6_sector33();
        assert_eq!(
            bond_current_operator(&basis, (0, 3), &[0]).unwrap_err(),
            OperatorError::NotAnEdge(0, 3)
        );
    }

    #[test]
    fn phase_unitary_has_unit_modulus_and_expected_phase() {
        let (_, basis) = ring6_sector33();
        let u = local_phase_unitary(&basis, 1, 0, 1.0, 20.0).unwrap();
        assert!(u.unitarity_defect() < 1e-15);
        let expect = C64::new(0.0, -20.0).exp();
        for (c, v) in basis.configs().iter().zip(u.values.iter()) {
            if c.occupied(0, 1) {
                assert!((v - expect).norm() < 1e-15);
            } else {
                assert!((v - C64::new(1.0, 0.0)).norm() < 1e-15);
            }
        }
        // zero strength: identity
        let id = local_phase_unitary(&basis, 1, 0, 0.0, 20.0).unwrap();
        assert!(id.values.iter().all(|z| (z - C64::new(1.0, 0.0)).norm() < 1e-15));
    }
}

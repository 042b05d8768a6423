//! Sector-restricted occupation basis.
//!
//! Modes are ordered species-major: all modes of species 0 (one per site,
//! mode index = site index), then species 1, and so on.  A configuration is
//! one occupation bit per mode.  The basis of a sector (fixed particle
//! count per species) is sorted lexicographically on the concatenated
//! occupation string read from site 0 of species 0 upward, which equals
//! numeric order of the string interpreted as a binary number with the
//! first mode as the most significant bit.
//!
//! Fermion exchange phases live entirely inside each species: moving a
//! particle between two sites picks up a sign from the occupied modes of
//! the *same* species strictly between them, and no phase string ever
//! crosses a species boundary.

use crate::model::ModelSpec;
use itertools::Itertools;
use std::collections::HashMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FockError {
    #[error("species {species} asks for {count} particles but can reach only {accessible} sites")]
    CountExceedsSites { species: usize, count: usize, accessible: usize },
    #[error("sector needs one count per species: got {got}, model has {want}")]
    CountArity { got: usize, want: usize },
    #[error("model with {0} total modes exceeds the 64-mode limit")]
    TooManyModes(usize),
    #[error("configuration is not a member of this sector basis")]
    NotInBasis,
    #[error("state string {0:?} does not parse: {1}")]
    BadStateString(String, String),
}

/// Occupation bits, one mask per species; bit `s` of mask `k` is site `s`
/// of species `k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FockConfiguration {
    pub occ: Vec<u64>,
}

impl FockConfiguration {
    pub fn empty(num_species: usize) -> Self {
        FockConfiguration { occ: vec![0; num_species] }
    }

    pub fn occupied(&self, species: usize, site: usize) -> bool {
        (self.occ[species] >> site) & 1 == 1
    }

    pub fn particle_count(&self, species: usize) -> usize {
        self.occ[species].count_ones() as usize
    }

    /// Concatenated occupation string as a binary number, first mode most
    /// significant.  This is the canonical sort key of the basis.
    pub fn canonical_key(&self, num_sites: usize) -> u128 {
        let mut key: u128 = 0;
        for mask in &self.occ {
            for site in 0..num_sites {
                key = (key << 1) | u128::from((mask >> site) & 1);
            }
        }
        key
    }
}

/// Move one particle of `species` from site `from` to site `to`.
///
/// Returns the new configuration and the exchange sign, or `None` when the
/// move annihilates the state (`from` empty or `to` occupied).  The sign is
/// (-1)^m with m the number of occupied modes of the same species strictly
/// between the two sites.
pub fn apply_hop(
    config: &FockConfiguration,
    species: usize,
    from: usize,
    to: usize,
) -> Option<(FockConfiguration, f64)> {
    debug_assert_ne!(from, to);
    let mask = config.occ[species];
    if (mask >> from) & 1 == 0 || (mask >> to) & 1 == 1 {
        return None;
    }
    let (lo, hi) = if from < to { (from, to) } else { (to, from) };
    let between = (mask >> (lo + 1)) & ((1u64 << (hi - lo - 1)) - 1);
    let sign = if between.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
    let mut occ = config.occ.clone();
    occ[species] = mask & !(1 << from) | (1 << to);
    Some((FockConfiguration { occ }, sign))
}

/// Canonically ordered basis of one particle-number sector.
#[derive(Debug, Clone)]
pub struct FockBasis {
    pub model: ModelSpec,
    pub counts: Vec<usize>,
    configs: Vec<FockConfiguration>,
    index: HashMap<FockConfiguration, usize>,
}

/// All configurations with `counts[s]` particles of species `s`, each
/// confined to the sites that species can reach.
pub fn enumerate_sector(model: &ModelSpec, counts: &[usize]) -> Result<FockBasis, FockError> {
    if counts.len() != model.num_species() {
        return Err(FockError::CountArity { got: counts.len(), want: model.num_species() });
    }
    let total_modes = model.num_sites() * model.num_species();
    if total_modes > 64 {
        return Err(FockError::TooManyModes(total_modes));
    }
    let mut per_species_masks: Vec<Vec<u64>> = Vec::with_capacity(counts.len());
    for (s, &count) in counts.iter().enumerate() {
        let sites = model.accessible_sites(s);
        if count > sites.len() {
            return Err(FockError::CountExceedsSites {
                species: s,
                count,
                accessible: sites.len(),
            });
        }
        let masks: Vec<u64> = sites
            .iter()
            .combinations(count)
            .map(|combo| combo.into_iter().fold(0u64, |m, &site| m | (1 << site)))
            .collect();
        per_species_masks.push(masks);
    }
    let mut configs: Vec<FockConfiguration> = per_species_masks
        .iter()
        .multi_cartesian_product()
        .map(|combo| FockConfiguration { occ: combo.into_iter().copied().collect() })
        .collect();
    // multi_cartesian_product of empty iterator list yields nothing; a
    // zero-species model is impossible, but an all-zero-count sector still
    // has the vacuum
    if configs.is_empty() && per_species_masks.iter().all(|m| m.len() == 1) {
        configs.push(FockConfiguration {
            occ: per_species_masks.iter().map(|m| m[0]).collect(),
        });
    }
    let num_sites = model.num_sites();
    configs.sort_by_key(|c| c.canonical_key(num_sites));
    let index = configs.iter().cloned().enumerate().map(|(i, c)| (c, i)).collect();
    Ok(FockBasis { model: model.clone(), counts: counts.to_vec(), configs, index })
}

impl FockBasis {
    pub fn dim(&self) -> usize {
        self.configs.len()
    }

    pub fn config(&self, i: usize) -> &FockConfiguration {
        &self.configs[i]
    }

    pub fn configs(&self) -> &[FockConfiguration] {
        &self.configs
    }

    /// Position of a configuration in the canonical order.
    pub fn index_of(&self, config: &FockConfiguration) -> Result<usize, FockError> {
        self.index.get(config).copied().ok_or(FockError::NotInBasis)
    }
}

/// Parse a product state written as `|bits>_label x |bits>_label x ...`.
///
/// Each species' bit string covers its accessible sites in ascending
/// order, read left to right, so a fully mobile species on L sites takes L
/// characters while a species confined to two sites takes two.
pub fn parse_state_string(model: &ModelSpec, text: &str) -> Result<FockConfiguration, FockError> {
    let bad = |why: &str| FockError::BadStateString(text.to_string(), why.to_string());
    let mut config = FockConfiguration::empty(model.num_species());
    let mut seen = vec![false; model.num_species()];
    for part in text.split(" x ") {
        let part = part.trim();
        let inner = part
            .strip_prefix('|')
            .ok_or_else(|| bad("component does not start with '|'"))?;
        let (bits, label) = inner
            .split_once(">_")
            .ok_or_else(|| bad("component does not end with '>_<species>'"))?;
        let species =
            model.species_index(label).map_err(|_| bad(&format!("unknown species {label:?}")))?;
        if seen[species] {
            return Err(bad(&format!("species {label:?} appears twice")));
        }
        seen[species] = true;
        let sites = model.accessible_sites(species);
        if bits.len() != sites.len() {
            return Err(bad(&format!(
                "species {label:?} takes {} occupation bits, got {}",
                sites.len(),
                bits.len()
            )));
        }
        for (ch, &site) in bits.chars().zip(sites.iter()) {
            match ch {
                '0' => {}
                '1' => config.occ[species] |= 1 << site,
                _ => return Err(bad(&format!("invalid occupation character {ch:?}"))),
            }
        }
    }
    if let Some(missing) = seen.iter().position(|&s| !s) {
        return Err(bad(&format!(
            "species {:?} has no component",
            model.species[missing].label
        )));
    }
    Ok(config)
}

/// Inverse of [`parse_state_string`].
pub fn format_state_string(model: &ModelSpec, config: &FockConfiguration) -> String {
    let mut parts = Vec::with_capacity(model.num_species());
    for (s, sp) in model.species.iter().enumerate() {
        let bits: String = model
            .accessible_sites(s)
            .iter()
            .map(|&site| if config.occupied(s, site) { '1' } else { '0' })
            .collect();
        parts.push(format!("|{bits}>_{}", sp.label));
    }
    parts.join(" x ")
}

impl fmt::Display for FockBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "sector basis: dim {} for counts {:?}", self.dim(), self.counts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, phi_extended_model, ring_model, LatticeSpec, SpeciesSpec};

    fn ring6() -> ModelSpec {
        ring_model(6, 1.0, -0.05).unwrap()
    }

    fn config_from_masks(masks: &[u64]) -> FockConfiguration {
        FockConfiguration { occ: masks.to_vec() }
    }

    #[test]
    fn sector_dimensions_follow_binomials() {
        let m = ring6();
        assert_eq!(enumerate_sector(&m, &[3, 3]).unwrap().dim(), 400);
        assert_eq!(enumerate_sector(&m, &[1, 0]).unwrap().dim(), 6);
        assert_eq!(enumerate_sector(&m, &[0, 0]).unwrap().dim(), 1);
        let ext = phi_extended_model(&m, 1, 3.0, -0.7).unwrap();
        assert_eq!(enumerate_sector(&ext, &[3, 3, 1]).unwrap().dim(), 800);
    }

    #[test]
    fn dimension_matches_filtered_full_enumeration_on_small_models() {
        // brute force: filter all 2^modes bitstrings by per-species count
        // and accessibility
        let path4 = build_model(
            LatticeSpec { num_sites: 4, edges: vec![(0, 1), (1, 2), (2, 3)], site_labels: None },
            vec![
                SpeciesSpec {
                    label: "tau".into(),
                    hopping: 1.0,
                    site_potentials: vec![0.0; 4],
                    allowed_edges: vec![(0, 1), (1, 2), (2, 3)],
                },
                SpeciesSpec {
                    label: "ups".into(),
                    hopping: 0.5,
                    site_potentials: vec![0.0; 4],
                    allowed_edges: vec![(1, 2)],
                },
            ],
            vec![],
        )
        .unwrap();
        for counts in [[2usize, 1], [1, 0], [0, 2], [4, 2], [3, 1]] {
            let expect = brute_force_count(&path4, &counts);
            match enumerate_sector(&path4, &counts) {
                Ok(basis) => assert_eq!(basis.dim(), expect, "counts {counts:?}"),
                Err(_) => assert_eq!(expect, 0, "counts {counts:?}"),
            }
        }
    }

    fn brute_force_count(model: &ModelSpec, counts: &[usize]) -> usize {
        let sites = model.num_sites();
        let species = model.num_species();
        let accessible: Vec<u64> = (0..species)
            .map(|s| model.accessible_sites(s).iter().fold(0u64, |m, &x| m | (1 << x)))
            .collect();
        let mut total = 0;
        for bits in 0u64..(1 << (sites * species)) {
            let ok = (0..species).all(|s| {
                let mask = (bits >> (s * sites)) & ((1 << sites) - 1);
                mask.count_ones() as usize == counts[s] && mask & !accessible[s] == 0
            });
            if ok {
                total += 1;
            }
        }
        total
    }

    #[test]
    fn count_above_accessible_sites_is_rejected() {
        let m = ring6();
        let err = enumerate_sector(&m, &[7, 0]).unwrap_err();
        assert_eq!(err, FockError::CountExceedsSites { species: 0, count: 7, accessible: 6 });
    }

    #[test]
    fn canonical_order_matches_string_sort() {
        // oracle: render every configuration as its concatenated bit string
        // and sort the strings
        let m = ring6();
        let basis = enumerate_sector(&m, &[3, 3]).unwrap();
        let mut strings: Vec<String> = basis
            .configs()
            .iter()
            .map(|c| {
                (0..2)
                    .flat_map(|s| (0..6).map(move |site| (s, site)))
                    .map(|(s, site)| if c.occupied(s, site) { '1' } else { '0' })
                    .collect()
            })
            .collect();
        let rendered = strings.clone();
        strings.sort();
        assert_eq!(rendered, strings);
    }

    #[test]
    fn reference_state_sits_at_the_end_of_the_sector() {
        // |111000>_tau x |111000>_ups reads as the largest concatenated
        // string among all (3,3) configurations
        let m = ring6();
        let basis = enumerate_sector(&m, &[3, 3]).unwrap();
        let psi0 = parse_state_string(&m, "|111000>_tau x |111000>_ups").unwrap();
        assert_eq!(basis.index_of(&psi0).unwrap(), 399);
    }

    #[test]
    fn index_of_rejects_configuration_outside_sector() {
        let m = ring6();
        let basis = enumerate_sector(&m, &[3, 3]).unwrap();
        let other = config_from_masks(&[0b11, 0b111]);
        assert_eq!(basis.index_of(&other).unwrap_err(), FockError::NotInBasis);
    }

    #[test]
    fn hop_moves_particle_with_interior_parity_sign() {
        // |110100>_tau (sites 0,1,3), hop 0 -> 4: modes 1,2,3 lie strictly
        // between; sites 1 and 3 are occupied, so the sign is +1
        let config = config_from_masks(&[0b001011, 0]);
        let (new, sign) = apply_hop(&config, 0, 0, 4).unwrap();
        assert_eq!(new, config_from_masks(&[0b011010, 0]));
        assert_eq!(sign, 1.0);
        // hop 1 -> 4: only site 3 occupied in between -> sign -1
        let (new, sign) = apply_hop(&config, 0, 1, 4).unwrap();
        assert_eq!(new, config_from_masks(&[0b011001, 0]));
        assert_eq!(sign, -1.0);
    }

    #[test]
    fn hop_annihilates_on_empty_source_or_occupied_target() {
        let config = config_from_masks(&[0b000011, 0]);
        assert!(apply_hop(&config, 0, 2, 4).is_none());
        assert!(apply_hop(&config, 0, 0, 1).is_none());
    }

    #[test]
    fn hop_round_trip_restores_configuration_with_unit_sign_product() {
        let config = config_from_masks(&[0b101010, 0b010101]);
        for (from, to) in [(1usize, 4usize), (3, 0), (5, 2)] {
            let (mid, s1) = apply_hop(&config, 0, from, to).unwrap();
            let (back, s2) = apply_hop(&mid, 0, to, from).unwrap();
            assert_eq!(back, config);
            assert_eq!(s1 * s2, 1.0);
        }
    }

    #[test]
    fn state_string_round_trips() {
        let m = ring6();
        let text = "|110100>_tau x |011010>_ups";
        let parsed = parse_state_string(&m, text).unwrap();
        assert_eq!(format_state_string(&m, &parsed), text);
        let ext = phi_extended_model(&m, 1, 3.0, -0.7).unwrap();
        let text = "|111000>_tau x |111000>_ups x |10>_phi";
        let parsed = parse_state_string(&ext, text).unwrap();
        // phi's two accessible sites are 1 (attachment) and 6 (auxiliary)
        assert!(parsed.occupied(2, 1));
        assert!(!parsed.occupied(2, 6));
        assert_eq!(format_state_string(&ext, &parsed), text);
    }

    #[test]
    fn state_string_errors_are_descriptive() {
        let m = ring6();
        assert!(parse_state_string(&m, "|111000>_tau").is_err()); // ups missing
        assert!(parse_state_string(&m, "|11100>_tau x |111000>_ups").is_err()); // wrong length
        assert!(parse_state_string(&m, "|111000>_tau x |111000>_xi").is_err()); // unknown label
        assert!(parse_state_string(&m, "|111002>_tau x |111000>_ups").is_err()); // bad character
    }

    #[test]
    fn vacuum_sector_has_single_empty_configuration() {
        let m = ring6();
        let basis = enumerate_sector(&m, &[0, 0]).unwrap();
        assert_eq!(basis.dim(), 1);
        assert_eq!(basis.config(0), &FockConfiguration::empty(2));
    }
}

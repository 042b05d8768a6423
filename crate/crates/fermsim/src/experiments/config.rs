//! Experiment plan: one JSON document describing a model, a sector, and
//! which computations to run on it.

use crate::diagnostics::DiagnosticSpec;
use crate::dynamics::{Protocol, SampleSpec};
use crate::ensemble::EnsembleSpec;
use crate::model::{phi_extended_model, ring_model, ModelError, ModelSpec};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::ExperimentError;

fn default_hopping() -> f64 {
    1.0
}
fn default_interaction() -> f64 {
    -0.05
}
fn default_attach_site() -> usize {
    1
}
fn default_phi_hopping() -> f64 {
    3.0
}
fn default_phi_interaction() -> f64 {
    -0.7
}
fn default_envelope_window() -> f64 {
    10.0
}
fn default_strength() -> f64 {
    1.0
}
fn default_pulse_duration() -> f64 {
    20.0
}
fn default_spread_time() -> f64 {
    50.0
}
fn default_n_max() -> usize {
    40
}

/// Model section: a named family or a fully explicit spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    /// periodic chain with two species ("tau", "ups") everywhere
    Ring {
        length: usize,
        #[serde(default = "default_hopping")]
        hopping: f64,
        #[serde(default = "default_interaction")]
        interaction: f64,
    },
    /// the ring plus a third species ("phi") shuttling between one ring
    /// site and an auxiliary site, coupled to "tau" on the ring site
    PhiRing {
        length: usize,
        #[serde(default = "default_hopping")]
        hopping: f64,
        #[serde(default = "default_interaction")]
        interaction: f64,
        #[serde(default = "default_attach_site")]
        attach_site: usize,
        #[serde(default = "default_phi_hopping")]
        phi_hopping: f64,
        #[serde(default = "default_phi_interaction")]
        phi_interaction: f64,
    },
    /// verbatim model spec
    Explicit { spec: ModelSpec },
}

impl ModelConfig {
    pub fn build(&self) -> Result<ModelSpec, ModelError> {
        match self {
            ModelConfig::Ring { length, hopping, interaction } => {
                ring_model(*length, *hopping, *interaction)
            }
            ModelConfig::PhiRing {
                length,
                hopping,
                interaction,
                attach_site,
                phi_hopping,
                phi_interaction,
            } => {
                let base = ring_model(*length, *hopping, *interaction)?;
                phi_extended_model(&base, *attach_site, *phi_hopping, *phi_interaction)
            }
            ModelConfig::Explicit { spec } => crate::model::build_model(
                spec.lattice.clone(),
                spec.species.clone(),
                spec.interactions.clone(),
            ),
        }
    }
}

/// A single-mode potential kick, delta-H = potential * n_(site, species).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub site: usize,
    pub species: String,
    pub potential: f64,
}

/// Named diagonal phase operator for spread_op protocol segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseOperatorSpec {
    pub site: usize,
    pub species: String,
    #[serde(default = "default_strength")]
    pub strength: f64,
    #[serde(default = "default_pulse_duration")]
    pub duration: f64,
}

/// Overlap decay |<e^{-iHt} psi | e^{-i(H+dH)t} psi>|^2 on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EchoConfig {
    pub perturbation: PerturbationSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<SampleSpec>,
}

/// Which mode's initial occupation splits the scan states into two groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupingSpec {
    pub site: usize,
    pub species: String,
}

/// Erasure-sequence sweep over every sector configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub site: usize,
    pub species: String,
    #[serde(default = "default_strength")]
    pub strength: f64,
    #[serde(default = "default_pulse_duration")]
    pub duration: f64,
    #[serde(default = "default_spread_time")]
    pub spread_time: f64,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    /// defaults to the kicked mode itself
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grouping: Option<GroupingSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    /// particle count per species label; omitted labels mean zero
    pub sector: BTreeMap<String, usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protocol: Option<Protocol>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<DiagnosticSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleSpec>,
    /// named diagonal operators referenced by spread_op segments
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub operators: BTreeMap<String, PhaseOperatorSpec>,
    /// named alternative Hamiltonians (base H plus one potential kick)
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub hamiltonians: BTreeMap<String, PerturbationSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub echo: Option<EchoConfig>,
    /// time width of the sliding max/min envelope written next to
    /// trajectories
    #[serde(default = "default_envelope_window")]
    pub envelope_window: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<ExperimentConfig, ExperimentError> {
        serde_json::from_str(text)
            .map_err(|e| ExperimentError::Config(format!("config parse error: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization cannot fail")
    }

    /// Particle counts in model species order.
    pub fn sector_counts(&self, model: &ModelSpec) -> Result<Vec<usize>, ExperimentError> {
        for label in self.sector.keys() {
            if model.species_index(label).is_err() {
                return Err(ExperimentError::Config(format!(
                    "sector names unknown species {label:?}"
                )));
            }
        }
        Ok(model
            .species
            .iter()
            .map(|s| self.sector.get(&s.label).copied().unwrap_or(0))
            .collect())
    }
}

/// Bundled experiment plans compiled into the binary.
pub const BUNDLED_CONFIGS: [(&str, &str); 5] = [
    ("fig2", include_str!("../../configs/fig2.json")),
    ("fig3a", include_str!("../../configs/fig3a.json")),
    ("fig3c", include_str!("../../configs/fig3c.json")),
    ("fig3d", include_str!("../../configs/fig3d.json")),
    ("fig4", include_str!("../../configs/fig4.json")),
];

pub fn bundled_config(name: &str) -> Option<&'static str> {
    BUNDLED_CONFIGS.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_config_builds_the_reference_model() {
        let cfg = ModelConfig::Ring { length: 6, hopping: 1.0, interaction: -0.05 };
        let m = cfg.build().unwrap();
        assert_eq!(m, ring_model(6, 1.0, -0.05).unwrap());
    }

    #[test]
    fn phi_ring_config_builds_the_extended_model() {
        let cfg = ModelConfig::PhiRing {
            length: 6,
            hopping: 1.0,
            interaction: -0.05,
            attach_site: 1,
            phi_hopping: 3.0,
            phi_interaction: -0.7,
        };
        let base = ring_model(6, 1.0, -0.05).unwrap();
        assert_eq!(cfg.build().unwrap(), phi_extended_model(&base, 1, 3.0, -0.7).unwrap());
    }

    #[test]
    fn every_bundled_config_parses_and_builds() {
        for (name, text) in BUNDLED_CONFIGS {
            let cfg = ExperimentConfig::from_json(text)
                .unwrap_or_else(|e| panic!("{name}: {e}"));
            let model = cfg.model.build().unwrap_or_else(|e| panic!("{name}: {e}"));
            let counts = cfg.sector_counts(&model).unwrap();
            assert_eq!(counts.len(), model.num_species(), "{name}");
            if let Some(state) = &cfg.initial_state {
                crate::fock::parse_state_string(&model, state)
                    .unwrap_or_else(|e| panic!("{name}: {e}"));
            }
            // round trip
            let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
            assert_eq!(cfg, back, "{name}");
        }
    }

    #[test]
    fn sector_counts_follow_species_order_and_reject_unknowns() {
        let cfg_json = r#"{
            "model": {"kind": "ring", "length": 6},
            "sector": {"ups": 1, "tau": 2},
            "initial_state": "|110000>_tau x |100000>_ups"
        }"#;
        let cfg = ExperimentConfig::from_json(cfg_json).unwrap();
        let model = cfg.model.build().unwrap();
        assert_eq!(cfg.sector_counts(&model).unwrap(), vec![2, 1]);

        let bad = ExperimentConfig::from_json(
            r#"{"model": {"kind": "ring", "length": 6}, "sector": {"xi": 1}}"#,
        )
        .unwrap();
        assert!(bad.sector_counts(&model).is_err());
    }

    #[test]
    fn parse_errors_carry_position_information() {
        let err = ExperimentConfig::from_json("{\n  \"model\": 7\n}").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line"), "{msg}");
    }
}

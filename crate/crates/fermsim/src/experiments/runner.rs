//! Executes an experiment plan and writes its artifacts.
//!
//! Every CSV value is printed with 17 significant digits, so identical
//! plans produce byte-identical CSV bodies; the metadata document is the
//! only output allowed to differ between reruns (wall time).

use crate::diagnostics::{default_entanglement_species, DiagnosticSet, DiagnosticSpec};
use crate::dynamics::{run_protocol_with, ProtocolContext, SampleSpec, Segment};
use crate::ensemble::{
    build_ensemble, ensemble_entropy, ensemble_mutual_information, ensemble_pairwise_mi_stats,
    EnsembleSpec,
};
use crate::fock::{enumerate_sector, parse_state_string, FockBasis};
use crate::model::ModelSpec;
use crate::operators::{
    build_hamiltonian, local_phase_unitary, number_operator, SparseOperator,
};
use num_complex::Complex64;
use serde_json::json;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::config::{ExperimentConfig, PerturbationSpec};
use super::envelope::envelope;
use super::scan::fock_scan;
use super::ExperimentError;

type C64 = Complex64;

/// Outcome of a run: which files were written, plus human-readable notes
/// for the terminal.
pub struct RunSummary {
    pub outputs: Vec<PathBuf>,
    pub notes: Vec<String>,
}

fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_lines(path: &Path, lines: impl IntoIterator<Item = String>) -> std::io::Result<()> {
    let file = fs::File::create(path)?;
    let mut out = std::io::BufWriter::new(file);
    for line in lines {
        writeln!(out, "{line}")?;
    }
    out.flush()
}

fn numeric_csv(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<f64>>,
) -> std::io::Result<()> {
    let head = header.join(",");
    let body = rows
        .into_iter()
        .map(|row| row.iter().map(|&x| fmt_f(x)).collect::<Vec<_>>().join(","));
    write_lines(path, std::iter::once(head).chain(body))
}

fn resolve_species_labels(
    model: &ModelSpec,
    labels: &Option<Vec<String>>,
) -> Result<Vec<usize>, ExperimentError> {
    match labels {
        Some(list) => Ok(list
            .iter()
            .map(|l| model.species_index(l))
            .collect::<Result<Vec<_>, _>>()?),
        None => Ok(default_entanglement_species(model)),
    }
}

/// The base sector Hamiltonian plus one local potential kick.
pub fn perturbed_hamiltonian(
    model: &ModelSpec,
    basis: &FockBasis,
    kick: &PerturbationSpec,
) -> Result<SparseOperator, ExperimentError> {
    let mut h = build_hamiltonian(model, basis)?;
    let s = model.species_index(&kick.species)?;
    let n = number_operator(basis, kick.site, s)?;
    for (i, v) in n.values.iter().enumerate() {
        if v.re != 0.0 {
            h.triplets.push((i, i, C64::new(kick.potential * v.re, 0.0)));
        }
    }
    Ok(h)
}

/// Run the protocol section, writing `trajectory.csv` and (for time-sampled
/// protocols) `envelope.csv`.  Returns the files written; empty when the
/// config has no protocol.
pub fn run_trajectory_files(
    cfg: &ExperimentConfig,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, ExperimentError> {
    let Some(protocol) = &cfg.protocol else {
        return Ok(Vec::new());
    };
    let model = cfg.model.build()?;
    let counts = cfg.sector_counts(&model)?;
    let initial_str = cfg.initial_state.as_ref().ok_or_else(|| {
        ExperimentError::Config("a protocol run needs an initial_state".into())
    })?;
    let initial = parse_state_string(&model, initial_str)?;
    let basis = enumerate_sector(&model, &counts)?;
    let diag = DiagnosticSet::compile(&basis, &cfg.diagnostics)?;

    let mut ctx = ProtocolContext::default();
    for (label, op) in &cfg.operators {
        let s = model.species_index(&op.species)?;
        ctx.operators.insert(
            label.clone(),
            local_phase_unitary(&basis, op.site, s, op.strength, op.duration)?,
        );
    }
    for (label, kick) in &cfg.hamiltonians {
        ctx.hamiltonians.insert(label.clone(), perturbed_hamiltonian(&model, &basis, kick)?);
    }

    let traj = run_protocol_with(&model, &counts, &initial, protocol, &diag, &ctx)?;
    let is_sequence = matches!(protocol.segments.as_slice(), [Segment::Sequence { .. }]);
    let time_col = if is_sequence { "step" } else { "time" };

    let mut header: Vec<&str> = vec![time_col];
    header.extend(traj.columns.iter().map(|s| s.as_str()));
    let traj_path = out_dir.join("trajectory.csv");
    numeric_csv(
        &traj_path,
        &header,
        traj.rows.iter().map(|(t, vals)| {
            let mut row = Vec::with_capacity(vals.len() + 1);
            row.push(*t);
            row.extend_from_slice(vals);
            row
        }),
    )?;
    let mut written = vec![traj_path];

    if !is_sequence && traj.rows.len() >= 2 {
        let times: Vec<f64> = traj.rows.iter().map(|(t, _)| *t).collect();
        let mut env_header: Vec<String> = vec![time_col.to_string()];
        let mut env_cols: Vec<Vec<f64>> = Vec::new();
        for (c, name) in traj.columns.iter().enumerate() {
            let series: Vec<f64> = traj.rows.iter().map(|(_, vals)| vals[c]).collect();
            let (upper, lower) = envelope(&times, &series, cfg.envelope_window)?;
            env_header.push(format!("{name}_upper"));
            env_header.push(format!("{name}_lower"));
            env_cols.push(upper);
            env_cols.push(lower);
        }
        let env_path = out_dir.join("envelope.csv");
        let header_refs: Vec<&str> = env_header.iter().map(|s| s.as_str()).collect();
        numeric_csv(
            &env_path,
            &header_refs,
            (0..times.len()).map(|i| {
                let mut row = Vec::with_capacity(env_cols.len() + 1);
                row.push(times[i]);
                row.extend(env_cols.iter().map(|col| col[i]));
                row
            }),
        )?;
        written.push(env_path);
    }
    Ok(written)
}

/// One reference value from a mixed ensemble.
pub struct EnsembleRow {
    pub ensemble: String,
    pub quantity: String,
    pub value: f64,
}

/// Reference values for both ensemble readings: the uniform sector mixture
/// and the energy window around the initial state's energy.
pub fn ensemble_report(cfg: &ExperimentConfig) -> Result<Vec<EnsembleRow>, ExperimentError> {
    let model = cfg.model.build()?;
    let counts = cfg.sector_counts(&model)?;
    let basis = enumerate_sector(&model, &counts)?;
    let h = build_hamiltonian(&model, &basis)?;
    let eig = crate::dynamics::spectral_decompose(&h)?;

    let fallback_center = match &cfg.initial_state {
        Some(text) => {
            let config = parse_state_string(&model, text)?;
            let idx = basis.index_of(&config)?;
            let mut v = nalgebra::DVector::from_element(basis.dim(), C64::new(0.0, 0.0));
            v[idx] = C64::new(1.0, 0.0);
            Some(h.expectation(&v).re)
        }
        None => None,
    };
    let window_spec = match &cfg.ensemble {
        Some(EnsembleSpec::EnergyWindow { center, delta_e }) => {
            EnsembleSpec::EnergyWindow { center: *center, delta_e: *delta_e }
        }
        _ => EnsembleSpec::EnergyWindow { center: None, delta_e: 0.5 },
    };
    let explicit_window = matches!(cfg.ensemble, Some(EnsembleSpec::EnergyWindow { .. }));

    // quantities follow the config's entanglement diagnostics
    let mut quantities: Vec<(String, DiagnosticSpec)> = Vec::new();
    for spec in &cfg.diagnostics {
        match spec {
            DiagnosticSpec::Entropy { sites, .. } => {
                let mut s = sites.clone();
                s.sort_unstable();
                s.dedup();
                let name = format!(
                    "S_{}",
                    s.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("-")
                );
                quantities.push((name, spec.clone()));
            }
            DiagnosticSpec::MiPair { site_i, site_j, .. } => {
                quantities.push((format!("I_{site_i}-{site_j}"), spec.clone()));
            }
            DiagnosticSpec::MiStats { .. } => {
                quantities.push(("mi".to_string(), spec.clone()));
            }
            _ => {}
        }
    }
    if quantities.is_empty() {
        quantities.push(("mi".to_string(), DiagnosticSpec::MiStats { species: None }));
    }

    let mut rows = Vec::new();
    for spec in [EnsembleSpec::SectorUniform, window_spec] {
        let built = match build_ensemble(&eig, &spec, fallback_center) {
            Ok(b) => b,
            Err(e) if !explicit_window && matches!(spec, EnsembleSpec::EnergyWindow { .. }) => {
                log::warn!("skipping energy-window reference: {e}");
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        rows.push(EnsembleRow {
            ensemble: built.label.clone(),
            quantity: "omega".to_string(),
            value: built.states as f64,
        });
        for (name, q) in &quantities {
            match q {
                DiagnosticSpec::Entropy { sites, species } => {
                    let sp = resolve_species_labels(&model, species)?;
                    let mut s = sites.clone();
                    s.sort_unstable();
                    s.dedup();
                    rows.push(EnsembleRow {
                        ensemble: built.label.clone(),
                        quantity: name.clone(),
                        value: ensemble_entropy(&basis, &built.rho, &s, &sp)?,
                    });
                }
                DiagnosticSpec::MiPair { site_i, site_j, species } => {
                    let sp = resolve_species_labels(&model, species)?;
                    rows.push(EnsembleRow {
                        ensemble: built.label.clone(),
                        quantity: name.clone(),
                        value: ensemble_mutual_information(
                            &basis, &built.rho, *site_i, *site_j, &sp,
                        )?,
                    });
                }
                DiagnosticSpec::MiStats { species } => {
                    let sp = resolve_species_labels(&model, species)?;
                    let stats = ensemble_pairwise_mi_stats(&basis, &built.rho, &sp)?;
                    rows.push(EnsembleRow {
                        ensemble: built.label.clone(),
                        quantity: "mi_mean".to_string(),
                        value: stats.mean,
                    });
                    rows.push(EnsembleRow {
                        ensemble: built.label.clone(),
                        quantity: "mi_sigma".to_string(),
                        value: stats.sigma,
                    });
                }
                _ => unreachable!("only entanglement diagnostics are collected"),
            }
        }
    }
    Ok(rows)
}

/// Write `ensemble.csv`; returns the file and printable notes.
pub fn run_ensemble_files(
    cfg: &ExperimentConfig,
    out_dir: &Path,
) -> Result<(Vec<PathBuf>, Vec<String>), ExperimentError> {
    let rows = ensemble_report(cfg)?;
    let path = out_dir.join("ensemble.csv");
    write_lines(
        &path,
        std::iter::once("ensemble,quantity,value".to_string()).chain(
            rows.iter()
                .map(|r| format!("{},{},{}", r.ensemble, r.quantity, fmt_f(r.value))),
        ),
    )?;
    let notes = rows
        .iter()
        .map(|r| format!("{} {} = {:.6}", r.ensemble, r.quantity, r.value))
        .collect();
    Ok((vec![path], notes))
}

/// Run the echo section, writing `echo.csv`.  Empty when absent.
pub fn run_echo_files(
    cfg: &ExperimentConfig,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, ExperimentError> {
    let Some(echo) = &cfg.echo else {
        return Ok(Vec::new());
    };
    let model = cfg.model.build()?;
    let counts = cfg.sector_counts(&model)?;
    let initial_str = cfg.initial_state.as_ref().ok_or_else(|| {
        ExperimentError::Config("an echo run needs an initial_state".into())
    })?;
    let initial = parse_state_string(&model, initial_str)?;
    let basis = enumerate_sector(&model, &counts)?;
    let h = build_hamiltonian(&model, &basis)?;
    let eig = crate::dynamics::spectral_decompose(&h)?;
    let h_pert = perturbed_hamiltonian(&model, &basis, &echo.perturbation)?;
    let eig_pert = crate::dynamics::spectral_decompose(&h_pert)?;
    let psi = crate::dynamics::StateVector::from_configuration(&basis, &initial)
        .map_err(ExperimentError::from)?;
    let times = echo
        .times
        .clone()
        .unwrap_or(SampleSpec::Grid { start: 0.0, stop: 250.0, step: 0.5 })
        .resolve()
        .map_err(ExperimentError::from)?;
    let values = crate::dynamics::loschmidt_echo(&eig, &eig_pert, &psi, &times)
        .map_err(ExperimentError::from)?;
    for (&t, &l) in times.iter().zip(values.iter()) {
        if !(-1e-12..=1.0 + 1e-9).contains(&l) {
            return Err(ExperimentError::Numerical(format!(
                "echo value {l} at t = {t} escapes [0, 1]"
            )));
        }
    }
    let path = out_dir.join("echo.csv");
    numeric_csv(
        &path,
        &["time", "loschmidt"],
        times.iter().zip(values.iter()).map(|(&t, &l)| vec![t, l]),
    )?;
    Ok(vec![path])
}

/// Run the scan section, writing the raw table, the per-step deviations,
/// and the grouped statistics.  Empty when absent.
pub fn run_scan_files(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    n_max_override: Option<usize>,
    workers: usize,
) -> Result<Vec<PathBuf>, ExperimentError> {
    let Some(scan_cfg) = &cfg.scan else {
        return Ok(Vec::new());
    };
    let mut scan_cfg = scan_cfg.clone();
    if let Some(n) = n_max_override {
        scan_cfg.n_max = n;
    }
    let model = cfg.model.build()?;
    let counts = cfg.sector_counts(&model)?;
    let result = fock_scan(&model, &counts, &scan_cfg, workers)?;

    let raw_path = out_dir.join("scan_raw.csv");
    {
        let mut header = vec!["state_index", "state", "group", "step"];
        header.extend(result.observables.iter().map(|s| s.as_str()));
        let mut lines = vec![header.join(",")];
        for (i, state) in result.states.iter().enumerate() {
            for (k, table) in result.raw.iter().enumerate() {
                let mut fields =
                    vec![i.to_string(), state.clone(), result.group_of[i].to_string(), k.to_string()];
                fields.extend((0..result.observables.len()).map(|o| fmt_f(table[(i, o)])));
                lines.push(fields.join(","));
            }
        }
        write_lines(&raw_path, lines)?;
    }

    let sigma_path = out_dir.join("scan_sigma.csv");
    {
        let mut header = vec!["step".to_string()];
        header.extend(result.observables.iter().map(|s| format!("sigma_{s}")));
        header.push("pooled_sigma_occupation".to_string());
        header.push("pooled_sigma_current".to_string());
        let mut lines = vec![header.join(",")];
        for k in 0..result.raw.len() {
            let mut fields = vec![k.to_string()];
            fields.extend(result.sigma[k].iter().map(|&s| fmt_f(s)));
            fields.push(fmt_f(result.pooled_sigma_occupation[k]));
            fields.push(fmt_f(result.pooled_sigma_current[k]));
            lines.push(fields.join(","));
        }
        write_lines(&sigma_path, lines)?;
    }

    let groups_path = out_dir.join("scan_groups.csv");
    {
        let observable = &result.observables[result.group_observable];
        let mut lines = vec![format!("step,group,count,mean_{observable},sigma_{observable}")];
        for (k, moments) in result.group_stats.iter().enumerate() {
            for (g, m) in moments.iter().enumerate() {
                lines.push(format!(
                    "{k},{g},{},{},{}",
                    m.count,
                    fmt_f(m.mean),
                    fmt_f(m.sigma)
                ));
            }
        }
        write_lines(&groups_path, lines)?;
    }
    Ok(vec![raw_path, sigma_path, groups_path])
}

fn write_meta(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    workers: usize,
    outputs: &[PathBuf],
    wall_seconds: f64,
) -> Result<PathBuf, ExperimentError> {
    let model = cfg.model.build()?;
    let counts = cfg.sector_counts(&model)?;
    let basis = enumerate_sector(&model, &counts)?;
    let names: Vec<String> = outputs
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    let meta = json!({
        "model_hash": model.canonical_hash(),
        "num_sites": model.num_sites(),
        "species": model.species.iter().map(|s| s.label.clone()).collect::<Vec<_>>(),
        "sector_counts": counts,
        "sector_dim": basis.dim(),
        "initial_state": cfg.initial_state,
        "crate_version": env!("CARGO_PKG_VERSION"),
        "workers": workers,
        "wall_seconds": wall_seconds,
        "outputs": names,
    });
    let path = out_dir.join("meta.json");
    fs::write(&path, serde_json::to_string_pretty(&meta).expect("meta serializes"))?;
    Ok(path)
}

/// Execute every section present in the config and write all artifacts.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    workers: usize,
) -> Result<RunSummary, ExperimentError> {
    let started = Instant::now();
    fs::create_dir_all(out_dir)?;
    let mut outputs = Vec::new();
    let mut notes = Vec::new();
    outputs.extend(run_trajectory_files(cfg, out_dir)?);
    if cfg.ensemble.is_some() {
        let (files, ens_notes) = run_ensemble_files(cfg, out_dir)?;
        outputs.extend(files);
        notes.extend(ens_notes);
    }
    outputs.extend(run_echo_files(cfg, out_dir)?);
    outputs.extend(run_scan_files(cfg, out_dir, None, workers)?);
    let meta = write_meta(cfg, out_dir, workers, &outputs, started.elapsed().as_secs_f64())?;
    outputs.push(meta);
    Ok(RunSummary { outputs, notes })
}

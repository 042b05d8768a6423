//! Spectral time evolution and composite protocols.
//!
//! The propagator is exact: H = V diag(lambda) V^+ is diagonalized once,
//! and e^{-iHt}psi = V e^{-i lambda t} V^+ psi for any t, positive or
//! negative.  Protocols chain segments on a cumulative timeline clock:
//! an Evolve segment advances the clock by |duration| while evolving by the
//! signed duration (reverse evolution keeps the clock moving forward), and
//! a Pulse freezes the dynamics for its duration while a local phase
//! accumulates, so sample times inside the pulse window see the partially
//! accumulated phase.
//!
//! The spread of a diagonal operator, O(t) = e^{iHt} O e^{-iHt}, is applied
//! right to left: evolve by +t, apply O, evolve by -t.

use crate::diagnostics::{DiagnosticSet, DiagnosticsError};
use crate::fock::{enumerate_sector, FockBasis, FockConfiguration, FockError};
use crate::model::{ModelError, ModelSpec};
use crate::operators::{
    build_hamiltonian, local_phase_unitary, DiagonalOperator, OperatorError, SparseOperator,
};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

type C64 = Complex64;

/// Largest tolerated deviation of a state norm from 1 along a protocol.
pub const NORM_TOLERANCE: f64 = 1e-9;
/// Largest tolerated relative energy drift across an Evolve segment.
pub const ENERGY_TOLERANCE: f64 = 1e-8;
/// Slack when matching sample times against segment boundaries.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("operator is not Hermitian (defect {0:.3e})")]
    NotHermitian(f64),
    #[error("dimension mismatch: {got} vs {want}")]
    DimensionMismatch { got: usize, want: usize },
    #[error("protocol references unknown {kind} {label:?}")]
    UnknownLabel { kind: &'static str, label: String },
    #[error("invalid protocol: {0}")]
    BadProtocol(String),
    #[error("sample time {time} lies outside the protocol timeline of length {end}")]
    SampleOutOfRange { time: f64, end: f64 },
    #[error("operator drifts from unitarity by {0:.3e}")]
    NonUnitaryOperator(f64),
    #[error("numerical invariant violated: {0}")]
    InvariantViolation(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
}

/// Eigendecomposition of a Hermitian sector operator, eigenvalues
/// ascending.
pub struct EigenSystem {
    pub eigenvalues: DVector<f64>,
    pub vectors: DMatrix<C64>,
}

impl EigenSystem {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Coefficients of a state in the eigenbasis: c = V^+ psi.
    pub fn coefficients(&self, amplitudes: &DVector<C64>) -> DVector<C64> {
        self.vectors.ad_mul(amplitudes)
    }

    /// psi = V c.
    pub fn synthesize(&self, coefficients: &DVector<C64>) -> DVector<C64> {
        &self.vectors * coefficients
    }

    /// <H> evaluated from eigenbasis coefficients.
    pub fn energy(&self, coefficients: &DVector<C64>) -> f64 {
        coefficients
            .iter()
            .zip(self.eigenvalues.iter())
            .map(|(c, &l)| c.norm_sqr() * l)
            .sum()
    }

    /// Largest entry of |V diag(lambda) V^+ - A|.
    pub fn reconstruction_defect(&self, op: &SparseOperator) -> f64 {
        let lam = DVector::from_iterator(
            self.dim(),
            self.eigenvalues.iter().map(|&l| C64::new(l, 0.0)),
        );
        let rebuilt = &self.vectors * DMatrix::from_diagonal(&lam) * self.vectors.adjoint();
        (rebuilt - op.to_dense()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Diagonalize a Hermitian operator.  Real-valued operators (every
/// Hamiltonian in this crate) take the real symmetric path.
pub fn spectral_decompose(op: &SparseOperator) -> Result<EigenSystem, DynamicsError> {
    let defect = op.hermiticity_defect();
    if !op.hermitian || defect > 1e-9 {
        return Err(DynamicsError::NotHermitian(defect));
    }
    let dense = op.to_dense();
    let dim = op.dim;
    let max_im = dense.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    let (mut eigenvalues, vectors) = if max_im < 1e-14 {
        let se = dense.map(|z| z.re).symmetric_eigen();
        (se.eigenvalues, se.eigenvectors.map(|x| C64::new(x, 0.0)))
    } else {
        let se = dense.symmetric_eigen();
        (se.eigenvalues, se.eigenvectors)
    };
    // sort ascending, permuting eigenvector columns along
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eigenvalues[a].partial_cmp(&eigenvalues[b]).unwrap());
    let sorted_vals = DVector::from_iterator(dim, order.iter().map(|&i| eigenvalues[i]));
    let mut sorted_vecs = DMatrix::from_element(dim, dim, C64::new(0.0, 0.0));
    for (dst, &src) in order.iter().enumerate() {
        sorted_vecs.set_column(dst, &vectors.column(src));
    }
    eigenvalues = sorted_vals;
    Ok(EigenSystem { eigenvalues, vectors: sorted_vecs })
}

/// Normalized state in a sector basis.
#[derive(Debug, Clone)]
pub struct StateVector {
    pub amplitudes: DVector<C64>,
}

impl StateVector {
    pub fn unit(dim: usize, index: usize) -> StateVector {
        let mut amplitudes = DVector::from_element(dim, C64::new(0.0, 0.0));
        amplitudes[index] = C64::new(1.0, 0.0);
        StateVector { amplitudes }
    }

    pub fn from_configuration(
        basis: &FockBasis,
        config: &FockConfiguration,
    ) -> Result<StateVector, FockError> {
        Ok(StateVector::unit(basis.dim(), basis.index_of(config)?))
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn overlap(&self, other: &StateVector) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    /// |<self|other>|^2
    pub fn fidelity(&self, other: &StateVector) -> f64 {
        self.overlap(other).norm_sqr()
    }
}

fn phase_evolved(eig: &EigenSystem, coefficients: &DVector<C64>, t: f64) -> DVector<C64> {
    let rotated = DVector::from_iterator(
        eig.dim(),
        coefficients
            .iter()
            .zip(eig.eigenvalues.iter())
            .map(|(c, &l)| c * C64::new(0.0, -l * t).exp()),
    );
    eig.synthesize(&rotated)
}

/// e^{-iHt} |psi> for any real t.
pub fn evolve(eig: &EigenSystem, state: &StateVector, t: f64) -> StateVector {
    let c = eig.coefficients(&state.amplitudes);
    StateVector { amplitudes: phase_evolved(eig, &c, t) }
}

/// O(t)|psi> = e^{iHt} O e^{-iHt} |psi>.
pub fn apply_spread_operator(
    eig: &EigenSystem,
    op: &DiagonalOperator,
    t: f64,
    state: &StateVector,
) -> StateVector {
    let forward = evolve(eig, state, t);
    let kicked = StateVector { amplitudes: op.apply(&forward.amplitudes) };
    evolve(eig, &kicked, -t)
}

fn check_norm(state: &StateVector, context: &str) -> Result<(), DynamicsError> {
    let drift = (state.norm() - 1.0).abs();
    if drift > NORM_TOLERANCE {
        return Err(DynamicsError::InvariantViolation(format!(
            "norm drifted by {drift:.3e} {context}"
        )));
    }
    Ok(())
}

/// Apply [O^+ O(t)] repeatedly, visiting the state after k = 0..=steps
/// applications.  `visit(k, state)` sees normalized states; the final state
/// is returned.
pub fn sequence_erasure<F>(
    eig: &EigenSystem,
    op: &DiagonalOperator,
    t: f64,
    steps: usize,
    initial: &StateVector,
    mut visit: F,
) -> Result<StateVector, DynamicsError>
where
    F: FnMut(usize, &StateVector) -> Result<(), DynamicsError>,
{
    let defect = op.unitarity_defect();
    if defect > NORM_TOLERANCE {
        return Err(DynamicsError::NonUnitaryOperator(defect));
    }
    let mut state = initial.clone();
    check_norm(&state, "entering erasure sequence")?;
    visit(0, &state)?;
    let dagger = op.dagger();
    for k in 1..=steps {
        let spread = apply_spread_operator(eig, op, t, &state);
        state = StateVector { amplitudes: dagger.apply(&spread.amplitudes) };
        check_norm(&state, &format!("after erasure step {k}"))?;
        visit(k, &state)?;
    }
    Ok(state)
}

/// L(t) = |<psi| e^{iHt} e^{-i(H + dH)t} |psi>|^2 for each requested time.
pub fn loschmidt_echo(
    eig_base: &EigenSystem,
    eig_perturbed: &EigenSystem,
    initial: &StateVector,
    times: &[f64],
) -> Result<Vec<f64>, DynamicsError> {
    if eig_base.dim() != eig_perturbed.dim() || initial.dim() != eig_base.dim() {
        return Err(DynamicsError::DimensionMismatch {
            got: eig_perturbed.dim(),
            want: eig_base.dim(),
        });
    }
    let c_base = eig_base.coefficients(&initial.amplitudes);
    let c_pert = eig_perturbed.coefficients(&initial.amplitudes);
    Ok(times
        .iter()
        .map(|&t| {
            let a = phase_evolved(eig_base, &c_base, t);
            let b = phase_evolved(eig_perturbed, &c_pert, t);
            a.dotc(&b).norm_sqr()
        })
        .collect())
}

/// One protocol step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Segment {
    /// evolve by the signed duration; the clock advances by |duration|
    Evolve {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hamiltonian: Option<String>,
        duration: f64,
    },
    /// local potential `strength` on (site, species) held for `duration`
    /// with the rest of the dynamics frozen; net effect is the accumulated
    /// phase exp(-i strength duration n)
    Pulse { site: usize, species: String, strength: f64, duration: f64 },
    /// one instantaneous application of a named diagonal operator spread to
    /// time `spread_time`; the clock does not advance
    SpreadOp { operator: String, spread_time: f64 },
    /// `repetitions` applications of [O^+ O(spread_time)] with O the
    /// accumulated pulse on (site, species); records are per step, so this
    /// must be the only segment of its protocol
    Sequence {
        site: usize,
        species: String,
        strength: f64,
        duration: f64,
        spread_time: f64,
        repetitions: usize,
    },
}

/// Where along the timeline to record diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SampleSpec {
    Times { times: Vec<f64> },
    Grid { start: f64, stop: f64, step: f64 },
}

/// Default sampling interval when a protocol does not specify one.
pub const DEFAULT_SAMPLE_STEP: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    pub segments: Vec<Segment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<SampleSpec>,
}

impl SampleSpec {
    pub fn resolve(&self) -> Result<Vec<f64>, DynamicsError> {
        let times = match self {
            SampleSpec::Times { times } => times.clone(),
            SampleSpec::Grid { start, stop, step } => {
                if !(step.is_finite() && *step > 0.0) || stop < start {
                    return Err(DynamicsError::BadProtocol(format!(
                        "bad sample grid: start {start}, stop {stop}, step {step}"
                    )));
                }
                let n = ((stop - start) / step + TIME_EPS).floor() as usize;
                (0..=n).map(|i| start + i as f64 * step).collect()
            }
        };
        if times.iter().any(|t| !t.is_finite()) {
            return Err(DynamicsError::BadProtocol("non-finite sample time".into()));
        }
        if times.windows(2).any(|w| w[1] < w[0]) {
            return Err(DynamicsError::BadProtocol("sample times must be non-decreasing".into()));
        }
        Ok(times)
    }
}

/// Named objects a protocol may reference beyond the sector Hamiltonian.
#[derive(Default)]
pub struct ProtocolContext {
    /// alternative Hamiltonians for Evolve segments, by label
    pub hamiltonians: BTreeMap<String, SparseOperator>,
    /// diagonal operators for SpreadOp segments, by label
    pub operators: BTreeMap<String, DiagonalOperator>,
}

/// Time-stamped diagnostic table produced by a protocol run.  For erasure
/// sequences the time column holds the step index.
pub struct Trajectory {
    pub columns: Vec<String>,
    pub rows: Vec<(f64, Vec<f64>)>,
    pub final_state: StateVector,
    pub basis: FockBasis,
}

fn validate_protocol(protocol: &Protocol) -> Result<(), DynamicsError> {
    // an empty segment list is a valid no-op: one sample of the initial state
    let sequences =
        protocol.segments.iter().filter(|s| matches!(s, Segment::Sequence { .. })).count();
    if sequences > 0 {
        if protocol.segments.len() != 1 {
            return Err(DynamicsError::BadProtocol(
                "an erasure sequence must be the only segment of its protocol".into(),
            ));
        }
        if protocol.samples.is_some() {
            return Err(DynamicsError::BadProtocol(
                "erasure sequences record one row per step and take no sample spec".into(),
            ));
        }
    }
    for seg in &protocol.segments {
        let finite = match seg {
            Segment::Evolve { duration, .. } => duration.is_finite(),
            Segment::Pulse { strength, duration, .. } => {
                if *duration < 0.0 {
                    return Err(DynamicsError::BadProtocol(
                        "pulse duration must be non-negative".into(),
                    ));
                }
                strength.is_finite() && duration.is_finite()
            }
            Segment::SpreadOp { spread_time, .. } => spread_time.is_finite(),
            Segment::Sequence { strength, duration, spread_time, .. } => {
                strength.is_finite() && duration.is_finite() && spread_time.is_finite()
            }
        };
        if !finite {
            return Err(DynamicsError::BadProtocol("non-finite segment parameter".into()));
        }
    }
    Ok(())
}

fn timeline_length(protocol: &Protocol) -> f64 {
    protocol
        .segments
        .iter()
        .map(|s| match s {
            Segment::Evolve { duration, .. } => duration.abs(),
            Segment::Pulse { duration, .. } => *duration,
            Segment::SpreadOp { .. } | Segment::Sequence { .. } => 0.0,
        })
        .sum()
}

/// Run a protocol from a sector configuration, recording the requested
/// diagnostics at each sample time.
pub fn run_protocol(
    model: &ModelSpec,
    counts: &[usize],
    initial: &FockConfiguration,
    protocol: &Protocol,
    diagnostics: &DiagnosticSet,
) -> Result<Trajectory, DynamicsError> {
    run_protocol_with(model, counts, initial, protocol, diagnostics, &ProtocolContext::default())
}

/// [`run_protocol`] with named Hamiltonians and operators available to the
/// segments.
pub fn run_protocol_with(
    model: &ModelSpec,
    counts: &[usize],
    initial: &FockConfiguration,
    protocol: &Protocol,
    diagnostics: &DiagnosticSet,
    context: &ProtocolContext,
) -> Result<Trajectory, DynamicsError> {
    validate_protocol(protocol)?;
    let basis = enumerate_sector(model, counts)?;
    let h = build_hamiltonian(model, &basis)?;
    let eig_base = spectral_decompose(&h)?;
    let mut extra_eigs: BTreeMap<&str, EigenSystem> = BTreeMap::new();
    for (label, op) in &context.hamiltonians {
        if op.dim != basis.dim() {
            return Err(DynamicsError::DimensionMismatch { got: op.dim, want: basis.dim() });
        }
        extra_eigs.insert(label.as_str(), spectral_decompose(op)?);
    }
    let resolve_eig = |label: &Option<String>| -> Result<&EigenSystem, DynamicsError> {
        match label.as_deref() {
            None | Some("H") => Ok(&eig_base),
            Some(other) => extra_eigs.get(other).ok_or_else(|| DynamicsError::UnknownLabel {
                kind: "hamiltonian",
                label: other.to_string(),
            }),
        }
    };

    let initial_state = StateVector::from_configuration(&basis, initial)?;
    let columns = diagnostics.columns();
    let mut rows: Vec<(f64, Vec<f64>)> = Vec::new();

    // erasure sequences are step-indexed rather than time-sampled
    if let [Segment::Sequence { site, species, strength, duration, spread_time, repetitions }] =
        &protocol.segments[..]
    {
        let s = model.species_index(species)?;
        let op = local_phase_unitary(&basis, *site, s, *strength, *duration)?;
        let final_state = sequence_erasure(
            &eig_base,
            &op,
            *spread_time,
            *repetitions,
            &initial_state,
            |k, state| {
                let values = diagnostics.eval(&basis, &state.amplitudes, &initial_state.amplitudes)?;
                rows.push((k as f64, values));
                Ok(())
            },
        )?;
        return Ok(Trajectory { columns, rows, final_state, basis });
    }

    let end = timeline_length(protocol);
    let times = match &protocol.samples {
        Some(spec) => spec.resolve()?,
        None => SampleSpec::Grid { start: 0.0, stop: end, step: DEFAULT_SAMPLE_STEP }.resolve()?,
    };
    if let Some(&last) = times.last() {
        if last > end + TIME_EPS {
            return Err(DynamicsError::SampleOutOfRange { time: last, end });
        }
    }

    let mut emit = |t: f64, state: &StateVector| -> Result<(), DynamicsError> {
        check_norm(state, &format!("at sample time {t}"))?;
        let values = diagnostics.eval(&basis, &state.amplitudes, &initial_state.amplitudes)?;
        rows.push((t, values));
        Ok(())
    };
    let check_particle_numbers = |state: &StateVector, clock: f64| -> Result<(), DynamicsError> {
        for (s, &count) in counts.iter().enumerate() {
            let total: f64 = basis
                .configs()
                .iter()
                .zip(state.amplitudes.iter())
                .map(|(c, a)| a.norm_sqr() * c.particle_count(s) as f64)
                .sum();
            if (total - count as f64).abs() > 1e-10 {
                return Err(DynamicsError::InvariantViolation(format!(
                    "species {s} count {total} != {count} at t = {clock}"
                )));
            }
        }
        Ok(())
    };

    let mut state = initial_state.clone();
    let mut clock = 0.0f64;
    let mut pending = times.iter().copied().peekable();
    for segment in &protocol.segments {
        match segment {
            Segment::Evolve { hamiltonian, duration } => {
                let eig = resolve_eig(hamiltonian)?;
                let span = duration.abs();
                let direction = if *duration < 0.0 { -1.0 } else { 1.0 };
                let c = eig.coefficients(&state.amplitudes);
                let energy_in = eig.energy(&c);
                while let Some(&t) = pending.peek() {
                    if t > clock + span + TIME_EPS {
                        break;
                    }
                    let offset = (t - clock).clamp(0.0, span);
                    let sampled = StateVector {
                        amplitudes: phase_evolved(eig, &c, direction * offset),
                    };
                    emit(t, &sampled)?;
                    pending.next();
                }
                state = StateVector { amplitudes: phase_evolved(eig, &c, *duration) };
                clock += span;
                let energy_out = eig.energy(&eig.coefficients(&state.amplitudes));
                let scale = eig.eigenvalues.iter().map(|l| l.abs()).fold(1.0, f64::max);
                if (energy_out - energy_in).abs() > ENERGY_TOLERANCE * scale {
                    return Err(DynamicsError::InvariantViolation(format!(
                        "energy drifted from {energy_in} to {energy_out} across an evolve segment"
                    )));
                }
            }
            Segment::Pulse { site, species, strength, duration } => {
                let s = model.species_index(species)?;
                let entry = state.clone();
                while let Some(&t) = pending.peek() {
                    if t > clock + duration + TIME_EPS {
                        break;
                    }
                    let held = (t - clock).clamp(0.0, *duration);
                    let partial = local_phase_unitary(&basis, *site, s, *strength, held)?;
                    let sampled = StateVector { amplitudes: partial.apply(&entry.amplitudes) };
                    emit(t, &sampled)?;
                    pending.next();
                }
                let full = local_phase_unitary(&basis, *site, s, *strength, *duration)?;
                state = StateVector { amplitudes: full.apply(&entry.amplitudes) };
                clock += duration;
            }
            Segment::SpreadOp { operator, spread_time } => {
                let op = context.operators.get(operator).ok_or_else(|| {
                    DynamicsError::UnknownLabel { kind: "operator", label: operator.clone() }
                })?;
                if op.dim() != basis.dim() {
                    return Err(DynamicsError::DimensionMismatch {
                        got: op.dim(),
                        want: basis.dim(),
                    });
                }
                let defect = op.unitarity_defect();
                if defect > NORM_TOLERANCE {
                    return Err(DynamicsError::NonUnitaryOperator(defect));
                }
                // instantaneous: samples at exactly this clock time were
                // already emitted against the pre-application state
                state = apply_spread_operator(&eig_base, op, *spread_time, &state);
            }
            Segment::Sequence { .. } => unreachable!("validated to be the sole segment"),
        }
        check_norm(&state, "at segment end")?;
        check_particle_numbers(&state, clock)?;
    }
    while let Some(&t) = pending.peek() {
        if t > clock + TIME_EPS {
            return Err(DynamicsError::SampleOutOfRange { time: t, end });
        }
        emit(t, &state)?;
        pending.next();
    }
    Ok(Trajectory { columns, rows, final_state: state, basis })
}

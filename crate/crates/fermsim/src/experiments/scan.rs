//! Erasure-sequence sweep over every configuration of a sector.
//!
//! Each sector basis state is run through [O^+ O(t)]^k for k = 0..=n_max,
//! recording local observables after every step: mode occupations for every
//! site other than the kicked one (both species), the occupation of the
//! kicked mode itself, and the particle current through every bond.  The
//! cross-state statistics of those observables are the convergence
//! diagnostics: as k grows, states that differ only in details the sequence
//! has erased become indistinguishable to local measurements, so the
//! cross-state spread collapses.  Grouping by the initial occupation of one
//! designated mode (default: the kicked mode) exposes the one bit the kick
//! site remembers.
//!
//! One erasure step is a fixed unitary M = O^+ e^{iHt} O e^{-iHt}, built
//! once as a dense matrix; the sweep is then M applied k times to every
//! basis column, distributed over a worker pool with an indexed collect so
//! the result is bitwise independent of the worker count.

use crate::dynamics::{spectral_decompose, NORM_TOLERANCE};
use crate::fock::{enumerate_sector, format_state_string};
use crate::model::ModelSpec;
use crate::operators::{
    bond_current_operator, build_hamiltonian, local_phase_unitary, number_operator,
    SparseOperator,
};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use super::config::ScanConfig;
use super::ExperimentError;

type C64 = Complex64;

/// Population mean and standard deviation of one observable inside one
/// group of initial states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupMoments {
    pub count: usize,
    pub mean: f64,
    pub sigma: f64,
}

/// Everything the sweep measured.  `raw` is the ground truth; every
/// statistic recomputes from it exactly.
pub struct ScanResult {
    /// observable column names: occupations first, then bond currents
    pub observables: Vec<String>,
    /// how many of `observables` are occupation columns
    pub num_occupation: usize,
    /// index of the grouping mode's occupation column
    pub group_observable: usize,
    /// state strings in basis order
    pub states: Vec<String>,
    /// initial occupation (0/1) of the grouping mode per state
    pub group_of: Vec<u8>,
    /// raw[k][(state, observable)] after k applications
    pub raw: Vec<DMatrix<f64>>,
    /// sigma[k][observable]: population sigma across states
    pub sigma: Vec<Vec<f64>>,
    /// root mean variance over the occupation columns (kicked mode
    /// excluded) per step
    pub pooled_sigma_occupation: Vec<f64>,
    /// root mean variance over the current columns per step
    pub pooled_sigma_current: Vec<f64>,
    /// group_stats[k][group 0/1]: moments of the grouping observable
    pub group_stats: Vec<[GroupMoments; 2]>,
}

fn population_moments(values: &[f64]) -> (f64, f64, usize) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0, 0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    (mean, var.sqrt(), n)
}

/// Run the sweep.  `workers` sizes a local thread pool; any value produces
/// identical results.
pub fn fock_scan(
    model: &ModelSpec,
    counts: &[usize],
    scan: &ScanConfig,
    workers: usize,
) -> Result<ScanResult, ExperimentError> {
    let basis = enumerate_sector(model, counts)?;
    let dim = basis.dim();
    let kick_species = model.species_index(&scan.species)?;
    let (group_site, group_species) = match &scan.grouping {
        Some(g) => (g.site, model.species_index(&g.species)?),
        None => (scan.site, kick_species),
    };

    // observable set: occupations everywhere but the kicked site, the
    // kicked mode itself, and every bond current
    let mut occ_ops: Vec<(String, DVector<f64>)> = Vec::new();
    for (s, spec) in model.species.iter().enumerate() {
        for site in model.accessible_sites(s) {
            let keep = site != scan.site || s == kick_species;
            if !keep {
                continue;
            }
            let op = number_operator(&basis, site, s)?;
            occ_ops.push((format!("n_{}_{site}", spec.label), op.values.map(|z| z.re)));
        }
    }
    let mut current_ops: Vec<(String, SparseOperator)> = Vec::new();
    for &(a, b) in &model.lattice.edges {
        let op = bond_current_operator(&basis, (a, b), &(0..model.num_species()).collect::<Vec<_>>())?;
        current_ops.push((format!("J_{a}-{b}"), op));
    }
    let group_observable = occ_ops
        .iter()
        .position(|(name, _)| {
            *name == format!("n_{}_{group_site}", model.species[group_species].label)
        })
        .ok_or_else(|| {
            ExperimentError::Config(format!(
                "grouping mode (site {group_site}, species {:?}) has no occupation column",
                model.species[group_species].label
            ))
        })?;
    let kick_column = occ_ops
        .iter()
        .position(|(name, _)| *name == format!("n_{}_{}", model.species[kick_species].label, scan.site))
        .expect("the kicked mode always has a column");

    // one erasure step as a dense matrix: M = O^+ e^{iHt} O e^{-iHt}
    let h = build_hamiltonian(model, &basis)?;
    let eig = spectral_decompose(&h)?;
    let op = local_phase_unitary(&basis, scan.site, kick_species, scan.strength, scan.duration)?;
    let defect = op.unitarity_defect();
    if defect > NORM_TOLERANCE {
        return Err(ExperimentError::Numerical(format!(
            "erasure operator drifts from unitarity by {defect:.3e}"
        )));
    }
    let mut forward = eig.vectors.clone(); // V e^{-i lambda t}
    for (k, mut col) in forward.column_iter_mut().enumerate() {
        col *= C64::new(0.0, -eig.eigenvalues[k] * scan.spread_time).exp();
    }
    let u_fwd = &forward * eig.vectors.adjoint(); // e^{-iHt}
    let mut kicked = u_fwd.clone();
    for (r, &phase) in op.values.iter().enumerate() {
        for c in 0..dim {
            kicked[(r, c)] *= phase;
        }
    }
    // u_fwd^+ (O u_fwd) = e^{iHt} O e^{-iHt}
    let spread = u_fwd.ad_mul(&kicked);
    let mut step_matrix = spread;
    for (r, &phase) in op.values.iter().enumerate() {
        let conj = phase.conj();
        for c in 0..dim {
            step_matrix[(r, c)] *= conj;
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| ExperimentError::Config(format!("cannot build worker pool: {e}")))?;

    let measure = |columns: &[DVector<C64>]| -> Result<DMatrix<f64>, ExperimentError> {
        let rows: Vec<Vec<f64>> = pool.install(|| {
            columns
                .par_iter()
                .map(|psi| {
                    let mut row = Vec::with_capacity(occ_ops.len() + current_ops.len());
                    for (_, diag) in &occ_ops {
                        row.push(
                            psi.iter().zip(diag.iter()).map(|(a, d)| a.norm_sqr() * d).sum(),
                        );
                    }
                    for (_, op) in &current_ops {
                        row.push(op.expectation(psi).re);
                    }
                    row
                })
                .collect()
        });
        for (i, psi) in columns.iter().enumerate() {
            let drift = (psi.norm() - 1.0).abs();
            if drift > NORM_TOLERANCE {
                return Err(ExperimentError::Numerical(format!(
                    "state {i} norm drifted by {drift:.3e} during the scan"
                )));
            }
        }
        Ok(DMatrix::from_row_iterator(
            columns.len(),
            occ_ops.len() + current_ops.len(),
            rows.into_iter().flatten(),
        ))
    };

    let mut columns: Vec<DVector<C64>> = (0..dim)
        .map(|i| {
            let mut v = DVector::from_element(dim, C64::new(0.0, 0.0));
            v[i] = C64::new(1.0, 0.0);
            v
        })
        .collect();
    let group_of: Vec<u8> = basis
        .configs()
        .iter()
        .map(|c| c.occupied(group_species, group_site) as u8)
        .collect();

    let mut raw = Vec::with_capacity(scan.n_max + 1);
    raw.push(measure(&columns)?);
    for _ in 1..=scan.n_max {
        columns = pool.install(|| {
            columns.par_iter().map(|psi| &step_matrix * psi).collect::<Vec<_>>()
        });
        raw.push(measure(&columns)?);
    }

    let num_occupation = occ_ops.len();
    let observables: Vec<String> = occ_ops
        .iter()
        .map(|(n, _)| n.clone())
        .chain(current_ops.iter().map(|(n, _)| n.clone()))
        .collect();
    let num_observables = observables.len();

    let mut sigma = Vec::with_capacity(raw.len());
    let mut pooled_sigma_occupation = Vec::with_capacity(raw.len());
    let mut pooled_sigma_current = Vec::with_capacity(raw.len());
    let mut group_stats = Vec::with_capacity(raw.len());
    for table in &raw {
        let mut per_obs = Vec::with_capacity(num_observables);
        for o in 0..num_observables {
            let col: Vec<f64> = table.column(o).iter().copied().collect();
            let (_, s, _) = population_moments(&col);
            per_obs.push(s);
        }
        let pooled = |range: std::ops::Range<usize>, skip: Option<usize>| -> f64 {
            let vars: Vec<f64> = range
                .filter(|&o| Some(o) != skip)
                .map(|o| per_obs[o] * per_obs[o])
                .collect();
            if vars.is_empty() {
                0.0
            } else {
                (vars.iter().sum::<f64>() / vars.len() as f64).sqrt()
            }
        };
        pooled_sigma_occupation.push(pooled(0..num_occupation, Some(kick_column)));
        pooled_sigma_current.push(pooled(num_occupation..num_observables, None));
        let mut moments = [GroupMoments { count: 0, mean: 0.0, sigma: 0.0 }; 2];
        for g in 0..2u8 {
            let members: Vec<f64> = table
                .column(group_observable)
                .iter()
                .zip(group_of.iter())
                .filter(|(_, &gg)| gg == g)
                .map(|(&v, _)| v)
                .collect();
            let (mean, s, count) = population_moments(&members);
            moments[g as usize] = GroupMoments { count, mean, sigma: s };
        }
        sigma.push(per_obs);
        group_stats.push(moments);
    }

    let states: Vec<String> =
        basis.configs().iter().map(|c| format_state_string(model, c)).collect();
    Ok(ScanResult {
        observables,
        num_occupation,
        group_observable,
        states,
        group_of,
        raw,
        sigma,
        pooled_sigma_occupation,
        pooled_sigma_current,
        group_stats,
    })
}

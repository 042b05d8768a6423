//! Brute-force operator constructions on the full occupation space of a
//! fixed mode list, built from explicit sparse matrices (Kronecker products
//! of 2x2 factors) with no shortcuts.  Sector-restricted implementations are
//! cross-checked against this crate; nothing in here may depend on them.
//!
//! Conventions: modes are numbered 0..M in species-major order and mode 0 is
//! the most significant bit of a basis index, so the index of an occupation
//! pattern is the pattern read as a binary number from mode 0 down.  Phase
//! strings attached to a mode operator run over lower-numbered modes of the
//! same species only; operators acting on different species commute.

use nalgebra::DMatrix;
use num_complex::Complex64;
use std::collections::HashMap;

pub type C64 = Complex64;

/// Sparse matrix in triplet form.  Small and slow on purpose: every
/// operation is the textbook definition.
#[derive(Debug, Clone)]
pub struct Coo {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<(usize, usize, C64)>,
}

impl Coo {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Coo { rows, cols, entries: Vec::new() }
    }

    pub fn identity(dim: usize) -> Self {
        let entries = (0..dim).map(|i| (i, i, C64::new(1.0, 0.0))).collect();
        Coo { rows: dim, cols: dim, entries }
    }

    pub fn from_dense_rows(rows: usize, cols: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), rows * cols);
        let mut entries = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let v = data[r * cols + c];
                if v != 0.0 {
                    entries.push((r, c, C64::new(v, 0.0)));
                }
            }
        }
        Coo { rows, cols, entries }
    }

    pub fn kron(&self, rhs: &Coo) -> Coo {
        let mut entries = Vec::with_capacity(self.entries.len() * rhs.entries.len());
        for &(r1, c1, v1) in &self.entries {
            for &(r2, c2, v2) in &rhs.entries {
                entries.push((r1 * rhs.rows + r2, c1 * rhs.cols + c2, v1 * v2));
            }
        }
        Coo { rows: self.rows * rhs.rows, cols: self.cols * rhs.cols, entries }
    }

    pub fn mul(&self, rhs: &Coo) -> Coo {
        assert_eq!(self.cols, rhs.rows);
        let mut rhs_by_row: HashMap<usize, Vec<(usize, C64)>> = HashMap::new();
        for &(r, c, v) in &rhs.entries {
            rhs_by_row.entry(r).or_default().push((c, v));
        }
        let mut acc: HashMap<(usize, usize), C64> = HashMap::new();
        for &(r, c, v) in &self.entries {
            if let Some(row) = rhs_by_row.get(&c) {
                for &(c2, v2) in row {
                    *acc.entry((r, c2)).or_insert(C64::new(0.0, 0.0)) += v * v2;
                }
            }
        }
        let mut entries: Vec<(usize, usize, C64)> =
            acc.into_iter().map(|((r, c), v)| (r, c, v)).collect();
        entries.sort_by_key(|&(r, c, _)| (r, c));
        entries.retain(|&(_, _, v)| v.norm() > 0.0);
        Coo { rows: self.rows, cols: rhs.cols, entries }
    }

    pub fn add(&self, rhs: &Coo) -> Coo {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let mut acc: HashMap<(usize, usize), C64> = HashMap::new();
        for &(r, c, v) in self.entries.iter().chain(rhs.entries.iter()) {
            *acc.entry((r, c)).or_insert(C64::new(0.0, 0.0)) += v;
        }
        let mut entries: Vec<(usize, usize, C64)> =
            acc.into_iter().map(|((r, c), v)| (r, c, v)).collect();
        entries.sort_by_key(|&(r, c, _)| (r, c));
        Coo { rows: self.rows, cols: self.cols, entries }
    }

    pub fn scale(&self, s: C64) -> Coo {
        let entries = self.entries.iter().map(|&(r, c, v)| (r, c, v * s)).collect();
        Coo { rows: self.rows, cols: self.cols, entries }
    }

    pub fn dagger(&self) -> Coo {
        let entries = self.entries.iter().map(|&(r, c, v)| (c, r, v.conj())).collect();
        Coo { rows: self.cols, cols: self.rows, entries }
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.cols);
        let mut out = vec![C64::new(0.0, 0.0); self.rows];
        for &(r, c, val) in &self.entries {
            out[r] += val * v[c];
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::from_element(self.rows, self.cols, C64::new(0.0, 0.0));
        for &(r, c, v) in &self.entries {
            m[(r, c)] += v;
        }
        m
    }
}

/// Full occupation space of a species-major mode list.
#[derive(Debug, Clone)]
pub struct ModeSet {
    /// species index of each mode, non-decreasing (species-major order)
    pub species_of_mode: Vec<usize>,
}

impl ModeSet {
    /// Mode list with `counts[s]` consecutive modes for each species `s`.
    pub fn new(counts: &[usize]) -> Self {
        let mut species_of_mode = Vec::new();
        for (s, &n) in counts.iter().enumerate() {
            species_of_mode.extend(std::iter::repeat(s).take(n));
        }
        ModeSet { species_of_mode }
    }

    pub fn num_modes(&self) -> usize {
        self.species_of_mode.len()
    }

    pub fn dim(&self) -> usize {
        1usize << self.num_modes()
    }

    fn factor_product(&self, factors: impl Fn(usize) -> Coo) -> Coo {
        let mut out = Coo::identity(1);
        for k in 0..self.num_modes() {
            out = out.kron(&factors(k));
        }
        out
    }

    /// Annihilation operator for `mode`, with the phase string over
    /// lower-numbered modes of the same species.
    pub fn annihilation(&self, mode: usize) -> Coo {
        let id = Coo::from_dense_rows(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let z = Coo::from_dense_rows(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        // |0><1| : occupied -> empty
        let lower = Coo::from_dense_rows(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let sp = self.species_of_mode[mode];
        self.factor_product(|k| {
            if k == mode {
                lower.clone()
            } else if k < mode && self.species_of_mode[k] == sp {
                z.clone()
            } else {
                id.clone()
            }
        })
    }

    pub fn creation(&self, mode: usize) -> Coo {
        self.annihilation(mode).dagger()
    }

    pub fn number(&self, mode: usize) -> Coo {
        self.creation(mode).mul(&self.annihilation(mode))
    }

    /// Basis index of an occupation pattern given as mode -> occupied.
    pub fn index_of(&self, occupied: &[bool]) -> usize {
        assert_eq!(occupied.len(), self.num_modes());
        occupied.iter().fold(0usize, |acc, &b| (acc << 1) | usize::from(b))
    }

    /// Occupation pattern of a basis index.
    pub fn pattern_of(&self, index: usize) -> Vec<bool> {
        let m = self.num_modes();
        (0..m).map(|k| (index >> (m - 1 - k)) & 1 == 1).collect()
    }
}

/// Dense matrix exponential by scaling and squaring with a Taylor series.
pub fn expm(m: &DMatrix<C64>) -> DMatrix<C64> {
    assert_eq!(m.nrows(), m.ncols());
    let dim = m.nrows();
    let norm = m.iter().map(|z| z.norm()).fold(0.0f64, f64::max) * dim as f64;
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scaled = m.map(|z| z / 2f64.powi(squarings as i32));
    let mut result = DMatrix::identity(dim, dim);
    let mut term = DMatrix::identity(dim, dim);
    for k in 1..200 {
        term = (&term * &scaled).map(|z| z / k as f64);
        result += &term;
        let tnorm: f64 = term.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
        if tnorm < 1e-20 {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Reduced density matrix over the first `front` modes of `state`, taking
/// the trace over the rest.  Valid only after the desired modes have been
/// moved to the front.
pub fn reduce_front_block(state: &[C64], total_modes: usize, front: usize) -> DMatrix<C64> {
    assert_eq!(state.len(), 1usize << total_modes);
    let da = 1usize << front;
    let db = 1usize << (total_modes - front);
    let mut rho = DMatrix::from_element(da, da, C64::new(0.0, 0.0));
    for a in 0..da {
        for a2 in 0..da {
            let mut acc = C64::new(0.0, 0.0);
            for b in 0..db {
                acc += state[a * db + b] * state[a2 * db + b].conj();
            }
            rho[(a, a2)] = acc;
        }
    }
    rho
}

/// Reduced density matrix of `targets` (sorted mode ids), computed by
/// explicitly applying adjacent swap matrices until the targets sit at the
/// front, then tracing the back block.  Swapping two modes of the same
/// species flips the sign of the doubly occupied component; swapping modes
/// of different species does not.
pub fn fermionic_reduce(
    state: &[C64],
    modes: &ModeSet,
    targets: &[usize],
) -> DMatrix<C64> {
    let m = modes.num_modes();
    assert_eq!(state.len(), 1usize << m);
    assert!(targets.windows(2).all(|w| w[0] < w[1]), "targets must be sorted");
    let mut order: Vec<usize> = (0..m).collect();
    let mut psi = state.to_vec();
    for (slot, &target) in targets.iter().enumerate() {
        let mut pos = order.iter().position(|&x| x == target).unwrap();
        while pos > slot {
            let same_species =
                modes.species_of_mode[order[pos - 1]] == modes.species_of_mode[order[pos]];
            psi = apply_adjacent_swap(&psi, m, pos - 1, same_species);
            order.swap(pos - 1, pos);
            pos -= 1;
        }
    }
    reduce_front_block(&psi, m, targets.len())
}

/// Swap the modes at bit positions `p` and `p+1` (position 0 = most
/// significant).  `fermionic` adds a minus sign when both are occupied.
fn apply_adjacent_swap(state: &[C64], total_modes: usize, p: usize, fermionic: bool) -> Vec<C64> {
    let swap = if fermionic {
        Coo::from_dense_rows(
            4,
            4,
            &[
                1.0, 0.0, 0.0, 0.0, //
                0.0, 0.0, 1.0, 0.0, //
                0.0, 1.0, 0.0, 0.0, //
                0.0, 0.0, 0.0, -1.0,
            ],
        )
    } else {
        Coo::from_dense_rows(
            4,
            4,
            &[
                1.0, 0.0, 0.0, 0.0, //
                0.0, 0.0, 1.0, 0.0, //
                0.0, 1.0, 0.0, 0.0, //
                0.0, 0.0, 0.0, 1.0,
            ],
        )
    };
    let front = Coo::identity(1usize << p);
    let back = Coo::identity(1usize << (total_modes - p - 2));
    front.kron(&swap).kron(&back).apply(state)
}

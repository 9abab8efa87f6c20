//! Exact state-vector quantum mechanics for a few atoms.
//!
//! Basis states are bit strings: bit `i` of the index is atom `i`, with
//! `0 = ↑` and `1 = ↓`. The interaction `(J/2)(σxσx + σyσy)` exchanges
//! `|↑↓⟩ ↔ |↓↑⟩` with amplitude `J`; the optional field term is
//! `ε0 Σ_i σ⊥(φ_i)` with `σ⊥(φ) = cos φ σx + sin φ σy`, so that
//! `σ⊥|↑⟩ = e^{iφ}|↓⟩`.

mod analysis;
mod dump;
mod eigen;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{coupling_list, AtomChain, LatticeParams};

pub use analysis::{
    collective_spin_stats, identify_pairs, identify_pairs_with_floor, rdm2, singlet_fraction,
    sw_effective_spectrum_check, CollectiveSpinStats, Rdm2, SingletPairing, SwSpectrumCheck,
    PAIRING_FLOOR,
};
pub use dump::{read_state_dump, write_state_dump, DumpHeader};
pub use eigen::{ground_state, ground_state_dense, GroundStateOptions, DENSE_MAX_ATOMS};

/// Default limit on the atom number for eigensolvers and dynamics.
pub const MAX_ATOMS: usize = 14;

/// Dimension above which `apply` splits the work across threads.
const PARALLEL_DIM: usize = 1 << 12;

pub(crate) fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub(crate) fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Normalized many-body state of `n` atoms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    n: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// Normalizes `amplitudes`; they must have length `2^n` and nonzero norm.
    pub fn new(n: usize, mut amplitudes: Vec<Complex64>) -> Result<Self> {
        let dim = 1usize << n;
        if amplitudes.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: amplitudes.len(),
            });
        }
        let nrm = norm(&amplitudes);
        if !(nrm > 0.0) || !nrm.is_finite() {
            return Err(Error::Domain("state has zero or non-finite norm".into()));
        }
        amplitudes.iter_mut().for_each(|a| *a /= nrm);
        Ok(Self { n, amplitudes })
    }

    pub fn basis(n: usize, index: usize) -> Result<Self> {
        let dim = 1usize << n;
        if index >= dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: index,
            });
        }
        let mut a = vec![Complex64::default(); dim];
        a[index] = Complex64::new(1.0, 0.0);
        Ok(Self { n, amplitudes: a })
    }

    pub fn all_up(n: usize) -> Self {
        Self::basis(n, 0).expect("index 0 exists")
    }

    /// Tensor product of single-atom states `[a_up, a_down]`.
    pub fn product(sites: &[[Complex64; 2]]) -> Result<Self> {
        let n = sites.len();
        let amps = (0..1usize << n)
            .map(|s| {
                sites
                    .iter()
                    .enumerate()
                    .map(|(i, site)| site[(s >> i) & 1])
                    .product()
            })
            .collect();
        Self::new(n, amps)
    }

    /// Singlets `(|↑↓⟩ - |↓↑⟩)/√2` on the given pairs, other atoms up.
    pub fn singlet_product(n: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut used = vec![false; n];
        for &(i, j) in pairs {
            if i >= n || j >= n || i == j || used[i] || used[j] {
                return Err(Error::InvalidParameter(format!(
                    "pair ({i}, {j}) is out of range or reuses an atom"
                )));
            }
            used[i] = true;
            used[j] = true;
        }
        let mut amps = vec![Complex64::default(); 1 << n];
        let r = std::f64::consts::FRAC_1_SQRT_2;
        for (s, a) in amps.iter_mut().enumerate() {
            let mut val = 1.0;
            for &(i, j) in pairs {
                val *= match ((s >> i) & 1, (s >> j) & 1) {
                    (0, 1) => r,
                    (1, 0) => -r,
                    _ => 0.0,
                };
            }
            let free_down = (0..n).any(|k| !used[k] && (s >> k) & 1 == 1);
            if !free_down {
                *a = Complex64::new(val, 0.0);
            }
        }
        Self::new(n, amps)
    }

    /// Ground state of the field term: `⊗ (|↑⟩ - e^{iφ_i}|↓⟩)/√2`.
    pub fn field_ground_state(phases: &[f64]) -> Result<Self> {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let sites: Vec<[Complex64; 2]> = phases
            .iter()
            .map(|&p| [Complex64::new(r, 0.0), -Complex64::from_polar(r, p)])
            .collect();
        Self::product(&sites)
    }

    /// Gaussian random state.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let amps = (0..1usize << n)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        Self::new(n, amps).expect("random vector is nonzero")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amplitudes)
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(dot(&self.amplitudes, &other.amplitudes))
    }

    /// `|⟨self|other⟩|²`.
    pub fn overlap(&self, other: &Self) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    /// Rotates the global phase so the largest-magnitude amplitude (lowest
    /// index on ties) is real and positive.
    pub fn fix_phase(&mut self) {
        let mut best = 0;
        for (k, a) in self.amplitudes.iter().enumerate() {
            if a.norm_sqr() > self.amplitudes[best].norm_sqr() * (1.0 + 1e-12) {
                best = k;
            }
        }
        let a = self.amplitudes[best];
        if a.norm() > 0.0 {
            let rot = a.conj() / a.norm();
            self.amplitudes.iter_mut().for_each(|x| *x *= rot);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub i: usize,
    pub j: usize,
    pub j_ij: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldTerm {
    pub site: usize,
    pub epsilon0: f64,
    pub phi: f64,
}

/// `Σ (J_ij/2)(σxσx + σyσy) + Σ ε0 σ⊥(φ_i)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct XYHamiltonian {
    n: usize,
    couplings: Vec<Coupling>,
    transverse_field: Option<Vec<FieldTerm>>,
}

impl XYHamiltonian {
    pub fn new(
        n: usize,
        couplings: Vec<Coupling>,
        transverse_field: Option<Vec<FieldTerm>>,
    ) -> Result<Self> {
        if n == 0 || n > 30 {
            return Err(Error::InvalidParameter(format!(
                "atom count {n} out of range"
            )));
        }
        for c in &couplings {
            if c.i >= n || c.j >= n || c.i == c.j || !c.j_ij.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "bad coupling ({}, {}, {})",
                    c.i, c.j, c.j_ij
                )));
            }
        }
        for f in transverse_field.iter().flatten() {
            if f.site >= n || !f.epsilon0.is_finite() || !f.phi.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "bad field term on site {}",
                    f.site
                )));
            }
        }
        Ok(Self {
            n,
            couplings,
            transverse_field,
        })
    }

    /// All-to-all interaction for the atoms of `chain`.
    pub fn interaction(chain: &AtomChain, params: &LatticeParams) -> Result<Self> {
        let couplings = coupling_list(chain, params)
            .into_iter()
            .map(|c| Coupling {
                i: c.i,
                j: c.j,
                j_ij: c.coupling,
            })
            .collect();
        Self::new(chain.len(), couplings, None)
    }

    /// Field-only Hamiltonian with `φ_i = x_i φ0`.
    pub fn transverse(chain: &AtomChain, epsilon0: f64, phi0: f64) -> Result<Self> {
        let field = chain
            .positions()
            .iter()
            .enumerate()
            .map(|(site, &x)| FieldTerm {
                site,
                epsilon0,
                phi: x as f64 * phi0,
            })
            .collect();
        Self::new(chain.len(), Vec::new(), Some(field))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn couplings(&self) -> &[Coupling] {
        &self.couplings
    }

    pub fn transverse_field(&self) -> Option<&[FieldTerm]> {
        self.transverse_field.as_deref()
    }

    /// `out = (w_field H_field + w_int H_int) v`.
    pub fn apply_weighted(&self, w_field: f64, w_int: f64, v: &[Complex64], out: &mut [Complex64]) {
        let pairs: Vec<(usize, usize, f64)> = self
            .couplings
            .iter()
            .map(|c| (c.i, c.j, w_int * c.j_ij))
            .collect();
        let field: Vec<(usize, Complex64)> = self
            .transverse_field
            .iter()
            .flatten()
            .map(|f| (f.site, Complex64::from_polar(w_field * f.epsilon0, f.phi)))
            .collect();
        let element = |t: usize| -> Complex64 {
            let mut acc = Complex64::default();
            for &(i, j, jij) in &pairs {
                if ((t >> i) ^ (t >> j)) & 1 == 1 {
                    acc += jij * v[t ^ (1 << i) ^ (1 << j)];
                }
            }
            for &(i, e) in &field {
                let src = v[t ^ (1 << i)];
                acc += if (t >> i) & 1 == 1 {
                    e * src
                } else {
                    e.conj() * src
                };
            }
            acc
        };
        if out.len() >= PARALLEL_DIM {
            out.par_iter_mut()
                .enumerate()
                .for_each(|(t, o)| *o = element(t));
        } else {
            out.iter_mut()
                .enumerate()
                .for_each(|(t, o)| *o = element(t));
        }
    }

    pub fn apply_into(&self, v: &[Complex64], out: &mut [Complex64]) {
        self.apply_weighted(1.0, 1.0, v, out);
    }

    /// `⟨v|H|v⟩`.
    pub fn expectation(&self, v: &StateVector) -> Result<f64> {
        Ok(dot(v.amplitudes(), &apply_h(self, v)?).re)
    }

    /// Dense matrix; intended for small `n`.
    pub fn to_dense(&self) -> nalgebra::DMatrix<Complex64> {
        let dim = self.dim();
        let mut m = nalgebra::DMatrix::zeros(dim, dim);
        let mut e = vec![Complex64::default(); dim];
        let mut col = vec![Complex64::default(); dim];
        for k in 0..dim {
            e[k] = Complex64::new(1.0, 0.0);
            self.apply_into(&e, &mut col);
            e[k] = Complex64::default();
            for (r, c) in col.iter().enumerate() {
                m[(r, k)] = *c;
            }
        }
        m
    }
}

/// Row-compressed interaction plus per-site field data, for repeated
/// application with time-dependent weights.
#[derive(Clone, Debug)]
pub(crate) struct SparseXY {
    offsets: Vec<u32>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    field: Vec<(usize, Complex64)>,
}

impl SparseXY {
    pub fn new(h: &XYHamiltonian) -> Self {
        let dim = h.dim();
        let mut offsets = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        offsets.push(0);
        for t in 0..dim {
            for c in &h.couplings {
                if ((t >> c.i) ^ (t >> c.j)) & 1 == 1 {
                    cols.push((t ^ (1 << c.i) ^ (1 << c.j)) as u32);
                    vals.push(c.j_ij);
                }
            }
            offsets.push(cols.len() as u32);
        }
        let field = h
            .transverse_field
            .iter()
            .flatten()
            .map(|f| (f.site, Complex64::from_polar(f.epsilon0, f.phi)))
            .collect();
        Self {
            offsets,
            cols,
            vals,
            field,
        }
    }

    /// `out = (w_field H_field + w_int H_int) v`.
    pub fn apply(&self, w_field: f64, w_int: f64, v: &[Complex64], out: &mut [Complex64]) {
        let field: Vec<(usize, Complex64, Complex64)> = self
            .field
            .iter()
            .map(|&(i, e)| (1usize << i, w_field * e, w_field * e.conj()))
            .collect();
        for (t, o) in out.iter_mut().enumerate() {
            let (a, b) = (self.offsets[t] as usize, self.offsets[t + 1] as usize);
            let mut acc = Complex64::default();
            for (&c, &x) in self.cols[a..b].iter().zip(&self.vals[a..b]) {
                acc += x * v[c as usize];
            }
            acc *= w_int;
            for &(bit, down, up) in &field {
                let src = v[t ^ bit];
                acc += if t & bit != 0 { down * src } else { up * src };
            }
            *o = acc;
        }
    }
}

/// `H v`, matrix-free.
pub fn apply_h(h: &XYHamiltonian, v: &StateVector) -> Result<Vec<Complex64>> {
    if v.n() != h.n() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            found: v.dim(),
        });
    }
    let mut out = vec![Complex64::default(); v.dim()];
    h.apply_into(v.amplitudes(), &mut out);
    Ok(out)
}

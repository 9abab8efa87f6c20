//! Adiabatic preparation sweeps `H(t) = cos(ωt) H0 + sin(ωt) H_int` for
//! `0 ≤ t ≤ π/2ω`, starting from the product ground state of the field term.
//!
//! Time stepping uses the fourth-order commutator-free Magnus scheme with
//! two exponentials per step, each applied by a Lanczos (Krylov) method.
//! Steps are controlled by step doubling so that the local error stays
//! below `tolerance · dt`.

mod krylov;
mod scan;

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{coupling_list, AtomChain, LatticeParams};
use crate::spinsim::{norm, Coupling, FieldTerm, SparseXY, StateVector, XYHamiltonian, MAX_ATOMS};

use krylov::KrylovExp;

pub use scan::{
    adaptive_bond_break_scan, bond_break_scan, lz_fit, two_atom_scan, write_records_csv, Censoring,
    FitRequirements, LzFit, ScanOptions, ScanReport, SweepRecord, TwoAtomConfig,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepParams {
    /// Slew rate in units of `J0`.
    pub omega: f64,
    pub epsilon0: f64,
    /// Field angle advance per lattice site.
    pub phi0: f64,
    /// Local error allowed per unit time.
    pub tolerance: f64,
    pub max_atoms: usize,
}

impl Default for SweepParams {
    fn default() -> Self {
        Self {
            omega: 0.01,
            epsilon0: 1.0,
            phi0: PI / 6.0,
            tolerance: 1e-7,
            max_atoms: MAX_ATOMS,
        }
    }
}

impl SweepParams {
    pub fn with_omega(&self, omega: f64) -> Self {
        Self {
            omega,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "omega must be positive, got {}",
                self.omega
            )));
        }
        if !(0.0..2.0 * PI).contains(&self.phi0) {
            return Err(Error::InvalidParameter(format!(
                "phi0 must lie in [0, 2π), got {}",
                self.phi0
            )));
        }
        if !(self.epsilon0.is_finite() && self.tolerance > 0.0) {
            return Err(Error::InvalidParameter(
                "epsilon0 must be finite and tolerance positive".into(),
            ));
        }
        Ok(())
    }

    /// Sweep duration `π / 2ω`.
    pub fn duration(&self) -> f64 {
        FRAC_PI_2 / self.omega
    }
}

/// Logarithmic grid with `per_decade` points per decade from `lo` to `hi`
/// inclusive.
pub fn omega_grid(lo: f64, hi: f64, per_decade: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo) || per_decade == 0 {
        return Err(Error::InvalidParameter(format!(
            "bad omega grid [{lo}, {hi}] with {per_decade} points per decade"
        )));
    }
    let n = ((hi / lo).log10() * per_decade as f64).round() as usize;
    Ok((0..=n)
        .map(|k| lo * 10f64.powf(k as f64 / per_decade as f64))
        .collect())
}

/// Default scan grid: 40 points per decade over `[1e-4, 10] J0`.
pub fn default_omega_grid(j0: f64) -> Vec<f64> {
    omega_grid(1e-4 * j0, 10.0 * j0, 40).expect("valid default grid")
}

/// Everything needed to sweep one chain at any slew rate.
#[derive(Clone, Debug)]
pub struct SweepSystem {
    hamiltonian: XYHamiltonian,
    sparse: SparseXY,
    initial: StateVector,
    epsilon0: f64,
}

#[derive(Clone, Debug)]
pub struct EvolveOutcome {
    pub state: StateVector,
    pub steps: usize,
    pub rejected: usize,
    pub matvecs: usize,
    /// `|‖ψ(T)‖ - 1|` before renormalization.
    pub norm_drift: f64,
}

impl SweepSystem {
    pub fn new(chain: &AtomChain, lattice: &LatticeParams, params: &SweepParams) -> Result<Self> {
        lattice.validate()?;
        if chain.len() > params.max_atoms {
            return Err(Error::ResourceLimit {
                n: chain.len(),
                max: params.max_atoms,
            });
        }
        if chain.is_empty() {
            return Err(Error::InvalidParameter(
                "cannot sweep an empty chain".into(),
            ));
        }
        let phases: Vec<f64> = chain
            .positions()
            .iter()
            .map(|&x| x as f64 * params.phi0)
            .collect();
        let couplings = coupling_list(chain, lattice)
            .into_iter()
            .map(|c| Coupling {
                i: c.i,
                j: c.j,
                j_ij: c.coupling,
            })
            .collect();
        let field = phases
            .iter()
            .enumerate()
            .map(|(site, &phi)| FieldTerm {
                site,
                epsilon0: params.epsilon0,
                phi,
            })
            .collect();
        let hamiltonian = XYHamiltonian::new(chain.len(), couplings, Some(field))?;
        let initial = StateVector::field_ground_state(&phases)?;
        Ok(Self {
            sparse: SparseXY::new(&hamiltonian),
            hamiltonian,
            initial,
            epsilon0: params.epsilon0,
        })
    }

    /// Field plus interaction terms; weights select `H0` and `H_int`.
    pub fn hamiltonian(&self) -> &XYHamiltonian {
        &self.hamiltonian
    }

    pub fn initial_state(&self) -> &StateVector {
        &self.initial
    }

    /// `H(t) v`.
    pub fn apply_at(&self, omega: f64, t: f64, v: &[Complex64], out: &mut [Complex64]) {
        let (s, c) = (omega * t).sin_cos();
        self.hamiltonian.apply_weighted(c, s, v, out);
    }

    pub fn evolve(&self, omega: f64, tolerance: f64) -> Result<EvolveOutcome> {
        if !(omega > 0.0) || !(tolerance > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "need omega > 0 and tolerance > 0, got {omega} and {tolerance}"
            )));
        }
        let t_end = FRAC_PI_2 / omega;
        let dim = self.hamiltonian.dim();
        let mut krylov = KrylovExp::new(dim, 40, 1e-13);
        let mut v = self.initial.amplitudes().to_vec();
        let mut full = vec![Complex64::default(); dim];
        let mut half = vec![Complex64::default(); dim];
        let scale = self.epsilon0.abs().max(1.0) * self.hamiltonian.n() as f64;
        let mut dt = (0.5 / scale).min(t_end);
        let (mut t, mut steps, mut rejected) = (0.0, 0usize, 0usize);
        while t < t_end {
            let h = dt.min(t_end - t);
            full.copy_from_slice(&v);
            self.cf4(&mut krylov, omega, t, h, &mut full);
            half.copy_from_slice(&v);
            self.cf4(&mut krylov, omega, t, 0.5 * h, &mut half);
            self.cf4(&mut krylov, omega, t + 0.5 * h, 0.5 * h, &mut half);
            let err = full
                .iter()
                .zip(&half)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt()
                / 15.0;
            let target = tolerance * h;
            if err <= target {
                v.copy_from_slice(&half);
                t = if t_end - t <= h { t_end } else { t + h };
                steps += 1;
            } else {
                rejected += 1;
            }
            let factor = if err == 0.0 {
                2.0
            } else {
                (0.9 * (target / err).powf(0.25)).clamp(0.2, 2.0)
            };
            dt = h * factor;
            if dt < 1e-13 * t_end.max(1.0) {
                return Err(Error::StiffIntegration { t, dt });
            }
        }
        let norm_drift = (norm(&v) - 1.0).abs();
        Ok(EvolveOutcome {
            state: StateVector::new(self.hamiltonian.n(), v)?,
            steps,
            rejected,
            matvecs: krylov.matvecs,
            norm_drift,
        })
    }

    fn cf4(&self, k: &mut KrylovExp, omega: f64, t: f64, h: f64, v: &mut [Complex64]) {
        let r = 3f64.sqrt() / 6.0;
        let (c1, c2) = (0.5 - r, 0.5 + r);
        let (a1, a2) = (0.25 + r, 0.25 - r);
        let (s1, co1) = (omega * (t + c1 * h)).sin_cos();
        let (s2, co2) = (omega * (t + c2 * h)).sin_cos();
        let op = &self.sparse;
        let (f, i) = (a1 * co1 + a2 * co2, a1 * s1 + a2 * s2);
        k.apply(|x, o| op.apply(f, i, x, o), h, v);
        let (f, i) = (a2 * co1 + a1 * co2, a2 * s1 + a1 * s2);
        k.apply(|x, o| op.apply(f, i, x, o), h, v);
    }
}

/// Sweeps `chain` at `params.omega` and returns the final state.
pub fn evolve(
    chain: &AtomChain,
    lattice: &LatticeParams,
    params: &SweepParams,
) -> Result<StateVector> {
    Ok(evolve_with_stats(chain, lattice, params)?.state)
}

pub fn evolve_with_stats(
    chain: &AtomChain,
    lattice: &LatticeParams,
    params: &SweepParams,
) -> Result<EvolveOutcome> {
    params.validate()?;
    SweepSystem::new(chain, lattice, params)?.evolve(params.omega, params.tolerance)
}

#[cfg(test)]
mod tests;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::eigen::spectrum_dense;
use super::{Coupling, StateVector, XYHamiltonian};
use crate::error::{Error, Result};
use crate::lattice::{AtomChain, Filling, LatticeParams};

/// Minimum singlet fraction for two atoms to count as paired.
pub const PAIRING_FLOOR: f64 = 0.5;

/// Two-atom reduced density matrix in the basis `↑↑, ↑↓, ↓↑, ↓↓`
/// (index `2 b_i + b_j`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rdm2 {
    pub i: usize,
    pub j: usize,
    pub rho: [[Complex64; 4]; 4],
}

impl Rdm2 {
    pub fn trace(&self) -> f64 {
        (0..4).map(|k| self.rho[k][k].re).sum()
    }

    /// Largest deviation from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        let mut e = 0.0f64;
        for a in 0..4 {
            for b in 0..4 {
                e = e.max((self.rho[a][b] - self.rho[b][a].conj()).norm());
            }
        }
        e
    }

    /// Smallest eigenvalue.
    pub fn min_eigenvalue(&self) -> f64 {
        let m = nalgebra::Matrix4::from_fn(|a, b| self.rho[a][b]);
        let eig = nalgebra::SymmetricEigen::new(m);
        eig.eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Partial trace over every atom except `i` and `j`.
pub fn rdm2(v: &StateVector, i: usize, j: usize) -> Result<Rdm2> {
    if i == j {
        return Err(Error::Domain(format!(
            "rdm2 needs two distinct atoms, got {i} twice"
        )));
    }
    if i >= v.n() || j >= v.n() {
        return Err(Error::DimensionMismatch {
            expected: v.n(),
            found: i.max(j),
        });
    }
    let a = v.amplitudes();
    let (bi, bj) = (1usize << i, 1usize << j);
    let mut rho = [[Complex64::default(); 4]; 4];
    for base in (0..a.len()).filter(|s| s & (bi | bj) == 0) {
        let idx = [base, base | bj, base | bi, base | bi | bj];
        for x in 0..4 {
            for y in 0..4 {
                rho[x][y] += a[idx[x]] * a[idx[y]].conj();
            }
        }
    }
    Ok(Rdm2 { i, j, rho })
}

/// `⟨S|ρ|S⟩` with `|S⟩ = (|↑↓⟩ - |↓↑⟩)/√2`.
pub fn singlet_fraction(r: &Rdm2) -> f64 {
    let p = &r.rho;
    (0.5 * (p[1][1] + p[2][2] - p[1][2] - p[2][1]).re).clamp(0.0, 1.0)
}

/// Singlet pairing read off a state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingletPairing {
    /// Pairs `(i, j)` with `i < j`, in the order they were assigned.
    pub pairs: Vec<(usize, usize)>,
    pub pair_fractions: Vec<f64>,
    pub unpaired: Vec<usize>,
    /// Symmetric matrix of singlet fractions; the diagonal is zero.
    pub fractions: Vec<Vec<f64>>,
    pub floor: f64,
}

impl SingletPairing {
    pub fn is_complete(&self) -> bool {
        self.unpaired.is_empty()
    }

    /// Pairs sorted by left atom.
    pub fn sorted_pairs(&self) -> Vec<(usize, usize)> {
        let mut p = self.pairs.clone();
        p.sort_unstable();
        p
    }

    pub fn partner(&self, atom: usize) -> Option<usize> {
        self.pairs.iter().find_map(|&(i, j)| match atom {
            a if a == i => Some(j),
            a if a == j => Some(i),
            _ => None,
        })
    }
}

pub fn identify_pairs(v: &StateVector) -> SingletPairing {
    identify_pairs_with_floor(v, PAIRING_FLOOR)
}

/// Repeatedly pairs the two unassigned atoms with the largest singlet
/// fraction while it is at least `floor`. Ties go to the lexicographically
/// smallest pair.
pub fn identify_pairs_with_floor(v: &StateVector, floor: f64) -> SingletPairing {
    let n = v.n();
    let mut fractions = vec![vec![0.0; n]; n];
    let mut cand = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let f = singlet_fraction(&rdm2(v, i, j).expect("valid distinct atoms"));
            fractions[i][j] = f;
            fractions[j][i] = f;
            cand.push((f, i, j));
        }
    }
    cand.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    let mut free = vec![true; n];
    let (mut pairs, mut pair_fractions) = (Vec::new(), Vec::new());
    for (f, i, j) in cand {
        if f < floor {
            break;
        }
        if free[i] && free[j] {
            free[i] = false;
            free[j] = false;
            pairs.push((i, j));
            pair_fractions.push(f);
        }
    }
    SingletPairing {
        pairs,
        pair_fractions,
        unpaired: (0..n).filter(|&k| free[k]).collect(),
        fractions,
        floor,
    }
}

/// Means and variances of `S_x, S_y, S_z` with `S_α = ½ Σ σ_α` (ħ = 1).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollectiveSpinStats {
    pub mean: [f64; 3],
    pub variance: [f64; 3],
}

pub fn collective_spin_stats(v: &StateVector) -> CollectiveSpinStats {
    let a = v.amplitudes();
    let n = v.n();
    let i_unit = Complex64::new(0.0, 1.0);
    let mut mean = [0.0; 3];
    let mut variance = [0.0; 3];
    let mut sv = vec![Complex64::default(); a.len()];
    for (alpha, (m, var)) in mean.iter_mut().zip(variance.iter_mut()).enumerate() {
        for (t, o) in sv.iter_mut().enumerate() {
            let mut acc = Complex64::default();
            for k in 0..n {
                let down = (t >> k) & 1 == 1;
                acc += match alpha {
                    0 => a[t ^ (1 << k)],
                    1 if down => i_unit * a[t ^ (1 << k)],
                    1 => -i_unit * a[t ^ (1 << k)],
                    _ if down => -a[t],
                    _ => a[t],
                };
            }
            *o = 0.5 * acc;
        }
        let mu = super::dot(a, &sv).re;
        let sq: f64 = sv.iter().map(|x| x.norm_sqr()).sum();
        *m = mu;
        *var = (sq - mu * mu).max(0.0);
    }
    CollectiveSpinStats { mean, variance }
}

/// Comparison of a four-atom spectrum with its two-spin effective model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwSpectrumCheck {
    /// Lowest four eigenvalues of the full Hamiltonian.
    pub exact: [f64; 4],
    pub effective: [f64; 4],
    /// Largest coupling other than the middle one, over the middle one.
    pub ratio: f64,
    /// Maximum relative deviation.
    pub deviation: f64,
}

/// Decimates the middle pair of a four-atom chain and compares the low
/// spectrum `-J12 - Σ_j (J2j - J1j)²/2J12 + J̃ (σxσx + σyσy)/2` of the outer
/// spins with exact diagonalization.
pub fn sw_effective_spectrum_check(
    chain4: &AtomChain,
    interaction_range: f64,
    j0: f64,
) -> Result<SwSpectrumCheck> {
    if chain4.len() != 4 {
        return Err(Error::Precondition(format!(
            "need exactly 4 atoms, got {}",
            chain4.len()
        )));
    }
    let g = chain4.gaps();
    if !(g[1] < g[0] && g[1] < g[2]) {
        return Err(Error::Precondition(format!(
            "middle gap {} is not strictly the smallest of {:?}",
            g[1], g
        )));
    }
    let params = LatticeParams::new(
        chain4.positions()[3] + 1,
        interaction_range,
        Filling::Fixed(4),
    )
    .with_j0(j0);
    params.validate()?;
    let x = chain4.positions();
    let j = |a: usize, b: usize| params.coupling(x[a], x[b]);
    let j12 = j(1, 2)?;
    let mut shift = -j12;
    for o in [0, 3] {
        shift -= (j(2, o)? - j(1, o)?).powi(2) / (2.0 * j12);
    }
    let j_tilde = j(0, 3)? - (j(2, 0)? - j(1, 0)?) * (j(2, 3)? - j(1, 3)?) / j12;
    let mut effective = [shift - j_tilde.abs(), shift, shift, shift + j_tilde.abs()];
    effective.sort_by(f64::total_cmp);

    let mut couplings = Vec::new();
    for a in 0..4 {
        for b in a + 1..4 {
            couplings.push(Coupling {
                i: a,
                j: b,
                j_ij: j(a, b)?,
            });
        }
    }
    let h = XYHamiltonian::new(4, couplings, None)?;
    let spec = spectrum_dense(&h)?;
    let exact = [spec[0], spec[1], spec[2], spec[3]];
    let deviation = exact
        .iter()
        .zip(&effective)
        .map(|(e, f)| (e - f).abs() / e.abs())
        .fold(0.0, f64::max);
    let j_max = [j(0, 1)?, j(0, 2)?, j(0, 3)?, j(1, 3)?, j(2, 3)?]
        .into_iter()
        .fold(0.0, f64::max);
    Ok(SwSpectrumCheck {
        exact,
        effective,
        ratio: j_max / j12,
        deviation,
    })
}

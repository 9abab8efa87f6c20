use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{dot, norm, StateVector, XYHamiltonian, MAX_ATOMS};
use crate::error::{Error, Result};

/// Largest atom number accepted by [`ground_state_dense`].
pub const DENSE_MAX_ATOMS: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GroundStateOptions {
    pub max_atoms: usize,
    /// Lanczos vectors per restart cycle.
    pub krylov_dim: usize,
    pub max_restarts: usize,
    /// Required `‖Hv - Ev‖`.
    pub tolerance: f64,
    /// Seed of the random start vector.
    pub seed: u64,
}

impl Default for GroundStateOptions {
    fn default() -> Self {
        Self {
            max_atoms: MAX_ATOMS,
            krylov_dim: 60,
            max_restarts: 200,
            tolerance: 1e-8,
            seed: 0x5eed,
        }
    }
}

/// Lowest eigenpair by restarted Lanczos with full reorthogonalization.
pub fn ground_state(h: &XYHamiltonian, opts: &GroundStateOptions) -> Result<(f64, StateVector)> {
    if h.n() > opts.max_atoms {
        return Err(Error::ResourceLimit {
            n: h.n(),
            max: opts.max_atoms,
        });
    }
    let dim = h.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut start = StateVector::random(h.n(), &mut rng).into_amplitudes();
    let m = opts.krylov_dim.clamp(2, dim.max(2)).min(dim);
    let mut hv = vec![Complex64::default(); dim];
    let mut residual = f64::INFINITY;
    for _ in 0..=opts.max_restarts {
        let (theta, ritz) = lanczos_cycle(h, &start, m);
        h.apply_into(&ritz, &mut hv);
        residual = hv
            .iter()
            .zip(&ritz)
            .map(|(a, b)| (a - theta * b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if residual <= opts.tolerance {
            let mut v = StateVector::new(h.n(), ritz)?;
            v.fix_phase();
            let e = h.expectation(&v)?;
            return Ok((e, v));
        }
        start = ritz;
    }
    Err(Error::Convergence {
        iterations: opts.max_restarts,
        residual,
    })
}

fn lanczos_cycle(h: &XYHamiltonian, start: &[Complex64], m: usize) -> (f64, Vec<Complex64>) {
    let dim = start.len();
    let s = norm(start);
    let mut basis: Vec<Vec<Complex64>> = vec![start.iter().map(|x| x / s).collect()];
    let mut alpha = Vec::with_capacity(m);
    let mut beta: Vec<f64> = Vec::with_capacity(m);
    let mut w = vec![Complex64::default(); dim];
    let mut scale = 0.0f64;
    loop {
        let k = basis.len() - 1;
        h.apply_into(&basis[k], &mut w);
        let a = dot(&basis[k], &w).re;
        alpha.push(a);
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &w);
                for (x, y) in w.iter_mut().zip(b) {
                    *x -= c * y;
                }
            }
        }
        let b = norm(&w);
        scale = scale.max(a.abs()).max(b);
        if basis.len() == m || b <= 1e-13 * scale.max(1.0) {
            break;
        }
        beta.push(b);
        basis.push(w.iter().map(|x| x / b).collect());
    }
    let k = alpha.len();
    let mut t = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alpha[i];
        if i + 1 < k {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let low = (0..k)
        .min_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]))
        .expect("nonempty tridiagonal");
    let mut ritz = vec![Complex64::default(); dim];
    for (i, b) in basis.iter().enumerate() {
        let y = eig.eigenvectors[(i, low)];
        for (r, x) in ritz.iter_mut().zip(b) {
            *r += y * x;
        }
    }
    let rn = norm(&ritz);
    ritz.iter_mut().for_each(|x| *x /= rn);
    (eig.eigenvalues[low], ritz)
}

/// Lowest eigenpair by dense Hermitian diagonalization, for `n ≤ 10`.
pub fn ground_state_dense(h: &XYHamiltonian) -> Result<(f64, StateVector)> {
    if h.n() > DENSE_MAX_ATOMS {
        return Err(Error::ResourceLimit {
            n: h.n(),
            max: DENSE_MAX_ATOMS,
        });
    }
    let eig = SymmetricEigen::new(h.to_dense());
    let low = (0..h.dim())
        .min_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]))
        .expect("nonempty matrix");
    let amps = eig.eigenvectors.column(low).iter().copied().collect();
    let mut v = StateVector::new(h.n(), amps)?;
    v.fix_phase();
    Ok((eig.eigenvalues[low], v))
}

/// Full spectrum in ascending order, for `n ≤ 10`.
pub(crate) fn spectrum_dense(h: &XYHamiltonian) -> Result<Vec<f64>> {
    if h.n() > DENSE_MAX_ATOMS {
        return Err(Error::ResourceLimit {
            n: h.n(),
            max: DENSE_MAX_ATOMS,
        });
    }
    let mut e: Vec<f64> = SymmetricEigen::new(h.to_dense())
        .eigenvalues
        .iter()
        .copied()
        .collect();
    e.sort_by(f64::total_cmp);
    Ok(e)
}

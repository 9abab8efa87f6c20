use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::spinsim::{dot, norm};

/// Iterations after which the Lanczos error estimate is checked.
const CHECKPOINTS: [usize; 10] = [3, 5, 7, 10, 13, 17, 22, 28, 34, 40];

/// Lanczos workspace for `v ← exp(-iτA) v` with Hermitian `A`.
pub(crate) struct KrylovExp {
    max_dim: usize,
    tol: f64,
    basis: Vec<Vec<Complex64>>,
    w: Vec<Complex64>,
    pub(crate) matvecs: usize,
}

impl KrylovExp {
    pub fn new(dim: usize, max_dim: usize, tol: f64) -> Self {
        Self {
            max_dim,
            tol,
            basis: vec![vec![Complex64::default(); dim]; max_dim + 1],
            w: vec![Complex64::default(); dim],
            matvecs: 0,
        }
    }

    /// Applies the exponential, splitting `tau` into pieces small enough for
    /// the subspace limit.
    pub fn apply<F>(&mut self, a: F, tau: f64, v: &mut [Complex64])
    where
        F: Fn(&[Complex64], &mut [Complex64]),
    {
        let mut left = tau;
        let mut piece = tau;
        while left > 0.0 {
            let h = piece.min(left);
            if self.try_apply(&a, h, v) {
                left -= h;
            } else {
                piece = 0.5 * h;
            }
        }
    }

    fn try_apply<F>(&mut self, a: &F, tau: f64, v: &mut [Complex64]) -> bool
    where
        F: Fn(&[Complex64], &mut [Complex64]),
    {
        let beta0 = norm(v);
        if beta0 == 0.0 {
            return true;
        }
        for (b, x) in self.basis[0].iter_mut().zip(v.iter()) {
            *b = x / beta0;
        }
        let mut alpha: Vec<f64> = Vec::with_capacity(self.max_dim);
        let mut beta: Vec<f64> = Vec::with_capacity(self.max_dim);
        let mut check = 0;
        for k in 0..self.max_dim {
            a(&self.basis[k], &mut self.w);
            self.matvecs += 1;
            let ak = dot(&self.basis[k], &self.w).re;
            for (x, b) in self.w.iter_mut().zip(&self.basis[k]) {
                *x -= ak * b;
            }
            if k > 0 {
                let bk = beta[k - 1];
                for (x, b) in self.w.iter_mut().zip(&self.basis[k - 1]) {
                    *x -= bk * b;
                }
            }
            alpha.push(ak);
            let bnext = norm(&self.w);
            let m = k + 1;
            let breakdown =
                bnext <= 1e-14 * (ak.abs() + beta.last().copied().unwrap_or(0.0) + 1e-300);
            let at_check = check < CHECKPOINTS.len() && m >= CHECKPOINTS[check];
            if breakdown || at_check || m == self.max_dim {
                if at_check {
                    check += 1;
                }
                let y = small_exp(&alpha, &beta, tau);
                let err = if breakdown {
                    0.0
                } else {
                    beta0 * bnext * y[m - 1].norm()
                };
                if err <= self.tol {
                    v.iter_mut().for_each(|x| *x = Complex64::default());
                    for (yi, b) in y.iter().zip(&self.basis) {
                        let c = beta0 * yi;
                        for (x, bv) in v.iter_mut().zip(b) {
                            *x += c * bv;
                        }
                    }
                    return true;
                }
                if m == self.max_dim {
                    return false;
                }
            }
            beta.push(bnext);
            for (b, x) in self.basis[k + 1].iter_mut().zip(&self.w) {
                *b = x / bnext;
            }
        }
        false
    }
}

/// `exp(-iτT) e_1` for the tridiagonal `T` with diagonal `alpha` and
/// off-diagonal `beta`.
fn small_exp(alpha: &[f64], beta: &[f64], tau: f64) -> Vec<Complex64> {
    let m = alpha.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let q = &eig.eigenvectors;
    let coef: Vec<Complex64> = (0..m)
        .map(|j| Complex64::from_polar(q[(0, j)], -tau * eig.eigenvalues[j]))
        .collect();
    (0..m)
        .map(|i| (0..m).map(|j| q[(i, j)] * coef[j]).sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn matches_dense_exponential() {
        let n = 24;
        let mut m = DMatrix::<Complex64>::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let x = ((i * 7 + j * 3) % 11) as f64 / 5.0 - 1.0;
                let y = if i == j {
                    0.0
                } else {
                    ((i + 2 * j) % 5) as f64 / 7.0
                };
                m[(i, j)] = Complex64::new(x, y);
                m[(j, i)] = Complex64::new(x, -y);
            }
        }
        let apply = |v: &[Complex64], out: &mut [Complex64]| {
            for i in 0..n {
                out[i] = (0..n).map(|j| m[(i, j)] * v[j]).sum();
            }
        };
        let v0: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new(1.0 / (i as f64 + 1.0), 0.0))
            .collect();
        let tau = 3.0;
        let eig = SymmetricEigen::new(m.clone());
        let u = &eig.eigenvectors;
        let mut exact = vec![Complex64::default(); n];
        for k in 0..n {
            let c: Complex64 = (0..n).map(|j| u[(j, k)].conj() * v0[j]).sum::<Complex64>()
                * Complex64::from_polar(1.0, -tau * eig.eigenvalues[k]);
            for i in 0..n {
                exact[i] += u[(i, k)] * c;
            }
        }
        let mut k = KrylovExp::new(n, 12, 1e-12);
        let mut v = v0.clone();
        k.apply(apply, tau, &mut v);
        let err: f64 = v
            .iter()
            .zip(&exact)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(err < 1e-10, "{err}");
        assert!((norm(&v) - norm(&v0)).abs() < 1e-12);
    }
}

use std::sync::Arc;

use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

/// Zero-padded FFT workspace for linear (non-circular) convolutions of
/// sequences of a fixed length `n`.
pub(crate) struct Convolver {
    n: usize,
    len: usize,
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
    real: Vec<f64>,
    spec: Vec<Complex64>,
    scratch_fwd: Vec<Complex64>,
    scratch_inv: Vec<Complex64>,
}

/// Smallest `2^a 3^b` not below `min`.
fn smooth_length(min: usize) -> usize {
    let mut best = usize::MAX;
    let mut p3 = 1usize;
    while p3 < 2 * min {
        let mut v = p3;
        while v < min {
            v *= 2;
        }
        best = best.min(v);
        p3 *= 3;
    }
    best
}

impl Convolver {
    pub fn new(n: usize) -> Self {
        let len = smooth_length((2 * n).saturating_sub(1).max(2));
        let mut planner = RealFftPlanner::<f64>::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        Self {
            n,
            len,
            real: vec![0.0; len],
            spec: forward.make_output_vec(),
            scratch_fwd: forward.make_scratch_vec(),
            scratch_inv: inverse.make_scratch_vec(),
            forward,
            inverse,
        }
    }

    pub fn spectrum_len(&self) -> usize {
        self.len / 2 + 1
    }

    /// Spectrum of `q` zero-padded to the transform length.
    pub fn forward(&mut self, q: &[f64], out: &mut [Complex64]) {
        debug_assert_eq!(q.len(), self.n);
        self.real[..self.n].copy_from_slice(q);
        self.real[self.n..].iter_mut().for_each(|x| *x = 0.0);
        self.forward
            .process_with_scratch(&mut self.real, out, &mut self.scratch_fwd)
            .expect("forward FFT buffer sizes are fixed at construction");
    }

    /// First `n` samples of the inverse transform of `spectrum`, scaled so
    /// that `inverse(forward(a) * forward(b))` is the discrete convolution.
    /// `spectrum` is consumed as scratch.
    pub fn inverse(&mut self, spectrum: &[Complex64], out: &mut [f64]) {
        self.spec.copy_from_slice(spectrum);
        // spectra of real signals: these imaginary parts are roundoff
        self.spec[0].im = 0.0;
        if self.len.is_multiple_of(2) {
            let last = self.spec.len() - 1;
            self.spec[last].im = 0.0;
        }
        self.inverse
            .process_with_scratch(&mut self.spec, &mut self.real, &mut self.scratch_inv)
            .expect("inverse FFT buffer sizes are fixed at construction");
        let scale = 1.0 / self.len as f64;
        for (o, r) in out.iter_mut().zip(&self.real[..self.n]) {
            *o = r * scale;
        }
    }
}

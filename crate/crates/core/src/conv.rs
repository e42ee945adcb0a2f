//! N-dimensional linear convolution by FFT.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

/// Smallest `2^a 3^b 5^c >= n`.
pub fn good_size(n: usize) -> usize {
    let n = n.max(1);
    let mut best = n.next_power_of_two();
    let mut p5 = 1usize;
    while p5 < best {
        let mut p35 = p5;
        while p35 < best {
            let mut v = p35;
            while v < n {
                v *= 2;
            }
            best = best.min(v);
            p35 *= 3;
        }
        p5 *= 5;
    }
    best
}

fn plans(shape: &[usize], inverse: bool) -> Vec<Arc<dyn Fft<f64>>> {
    let mut planner = FftPlanner::new();
    shape
        .iter()
        .map(|&n| if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) })
        .collect()
}

fn fft_nd(buf: &mut [Complex64], shape: &[usize], plans: &[Arc<dyn Fft<f64>>]) {
    let total: usize = shape.iter().product();
    debug_assert_eq!(buf.len(), total);
    for (ax, &len) in shape.iter().enumerate() {
        if len == 1 {
            continue;
        }
        let inner: usize = shape[ax + 1..].iter().product();
        let fft = &plans[ax];
        if inner == 1 {
            buf.par_chunks_mut(len * 64).for_each(|c| fft.process(c));
            continue;
        }
        // gather strided lines, transform, scatter back; one outer block per task
        buf.par_chunks_mut(len * inner).for_each(|block| {
            let mut scratch = vec![Complex64::default(); len * inner];
            for l in 0..len {
                for i in 0..inner {
                    scratch[i * len + l] = block[l * inner + i];
                }
            }
            fft.process(&mut scratch);
            for l in 0..len {
                for i in 0..inner {
                    block[l * inner + i] = scratch[i * len + l];
                }
            }
        });
    }
}

fn embed(src: &[f64], sshape: &[usize], dshape: &[usize]) -> Vec<Complex64> {
    let total: usize = dshape.iter().product();
    let mut out = vec![Complex64::default(); total];
    let n = sshape.len();
    let row = sshape[n - 1];
    let rows = src.len() / row.max(1);
    let mut idx = vec![0usize; n];
    for r in 0..rows {
        // multi-index of the row start
        let mut rem = r;
        for k in (0..n - 1).rev() {
            idx[k] = rem % sshape[k];
            rem /= sshape[k];
        }
        let mut off = 0;
        for k in 0..n - 1 {
            off = off * dshape[k] + idx[k];
        }
        off *= dshape[n - 1];
        for c in 0..row {
            out[off + c] = Complex64::new(src[r * row + c], 0.0);
        }
    }
    out
}

/// Linear convolution against a fixed kernel, reused across many inputs.
pub struct Convolver {
    kshape: Vec<usize>,
    ishape: Vec<usize>,
    fshape: Vec<usize>,
    spectrum: Vec<Complex64>,
    fwd: Vec<Arc<dyn Fft<f64>>>,
    inv: Vec<Arc<dyn Fft<f64>>>,
}

impl Convolver {
    /// `kernel` has shape `kshape`; inputs will have shape `ishape` (same rank).
    pub fn new(kernel: &[f64], kshape: &[usize], ishape: &[usize]) -> Self {
        assert_eq!(kshape.len(), ishape.len());
        assert_eq!(kernel.len(), kshape.iter().product::<usize>());
        let fshape: Vec<usize> = kshape.iter().zip(ishape).map(|(a, b)| good_size(a + b - 1)).collect();
        let fwd = plans(&fshape, false);
        let inv = plans(&fshape, true);
        let mut spectrum = embed(kernel, kshape, &fshape);
        fft_nd(&mut spectrum, &fshape, &fwd);
        Self { kshape: kshape.to_vec(), ishape: ishape.to_vec(), fshape, spectrum, fwd, inv }
    }

    /// Shape of the full linear convolution.
    pub fn full_shape(&self) -> Vec<usize> {
        self.kshape.iter().zip(&self.ishape).map(|(a, b)| a + b - 1).collect()
    }

    /// Full convolution restricted to the box `offset .. offset + out_shape`.
    pub fn apply_window(&self, input: &[f64], offset: &[usize], out_shape: &[usize]) -> Vec<f64> {
        assert_eq!(input.len(), self.ishape.iter().product::<usize>());
        let mut buf = embed(input, &self.ishape, &self.fshape);
        fft_nd(&mut buf, &self.fshape, &self.fwd);
        let total = buf.len();
        let norm = 1.0 / total as f64;
        buf.par_iter_mut().zip(self.spectrum.par_iter()).for_each(|(b, s)| *b *= s * norm);
        fft_nd(&mut buf, &self.fshape, &self.inv);
        let n = out_shape.len();
        let count: usize = out_shape.iter().product();
        let mut out = Vec::with_capacity(count);
        let row = out_shape[n - 1];
        let rows = count / row.max(1);
        for r in 0..rows {
            let mut rem = r;
            let mut idx = [0usize; 4];
            for k in (0..n - 1).rev() {
                idx[k] = rem % out_shape[k] + offset[k];
                rem /= out_shape[k];
            }
            let mut off = 0;
            for k in 0..n - 1 {
                off = off * self.fshape[k] + idx[k];
            }
            off = off * self.fshape[n - 1] + offset[n - 1];
            out.extend(buf[off..off + row].iter().map(|c| c.re));
        }
        out
    }

    pub fn apply_full(&self, input: &[f64]) -> Vec<f64> {
        let fs = self.full_shape();
        self.apply_window(input, &vec![0; fs.len()], &fs)
    }
}

/// Full linear convolution of two arrays of equal rank.
pub fn convolve(a: &[f64], ashape: &[usize], b: &[f64], bshape: &[usize]) -> Vec<f64> {
    Convolver::new(a, ashape, bshape).apply_full(b)
}

/// Direct full convolution (reference implementation).
pub fn convolve_direct(a: &[f64], ashape: &[usize], b: &[f64], bshape: &[usize]) -> Vec<f64> {
    let n = ashape.len();
    let cshape: Vec<usize> = ashape.iter().zip(bshape).map(|(x, y)| x + y - 1).collect();
    let mut c = vec![0.0; cshape.iter().product()];
    let unravel = |mut f: usize, s: &[usize]| {
        let mut idx = [0usize; 4];
        for k in (0..s.len()).rev() {
            idx[k] = f % s[k];
            f /= s[k];
        }
        idx
    };
    for (ia, &va) in a.iter().enumerate() {
        if va == 0.0 {
            continue;
        }
        let xa = unravel(ia, ashape);
        for (ib, &vb) in b.iter().enumerate() {
            let xb = unravel(ib, bshape);
            let mut off = 0;
            for k in 0..n {
                off = off * cshape[k] + xa[k] + xb[k];
            }
            c[off] += va * vb;
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn good_sizes() {
        assert_eq!(good_size(1), 1);
        assert_eq!(good_size(7), 8);
        assert_eq!(good_size(401), 405);
        assert_eq!(good_size(4805), 4860);
        for n in 1..500 {
            let g = good_size(n);
            assert!(g >= n);
            let mut m = g;
            for p in [2, 3, 5] {
                while m % p == 0 {
                    m /= p;
                }
            }
            assert_eq!(m, 1);
        }
    }

    proptest! {
        #[test]
        fn fft_matches_direct(
            a in prop::collection::vec(-1.0f64..1.0, 12),
            b in prop::collection::vec(-1.0f64..1.0, 20),
        ) {
            let fa = convolve(&a, &[3, 4], &b, &[4, 5]);
            let da = convolve_direct(&a, &[3, 4], &b, &[4, 5]);
            for (x, y) in fa.iter().zip(&da) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            let f3 = convolve(&a, &[2, 3, 2], &b[..8], &[2, 2, 2]);
            let d3 = convolve_direct(&a, &[2, 3, 2], &b[..8], &[2, 2, 2]);
            for (x, y) in f3.iter().zip(&d3) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn window_extraction() {
        let a = [1.0, 2.0, 3.0];
        let b = [1.0, 1.0];
        let c = Convolver::new(&a, &[3], &[2]);
        assert_eq!(c.full_shape(), vec![4]);
        let w = c.apply_window(&b, &[1], &[2]);
        assert!((w[0] - 3.0).abs() < 1e-12 && (w[1] - 5.0).abs() < 1e-12);
    }
}

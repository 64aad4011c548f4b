//! Dense feed-forward baselines with log-cosh activations.

use num_complex::Complex64 as C64;

use super::{logcosh, tanh_stable, ZERO_LOG};
use crate::error::{Error, Result};

/// `log ψ = Σ_k log cosh(z_L)_k` with `h_{l} = log cosh(W_l h_{l-1} + b_l)`, `h_0 = σ`.
/// Parameters are stored layer by layer as `W_l` (row-major, out × in) then `b_l`.
#[derive(Clone, Debug)]
pub struct Ffnn {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    n_params: usize,
}

struct Forward {
    z: Vec<Vec<C64>>,
    h: Vec<Vec<C64>>,
    zero: bool,
}

impl Ffnn {
    pub fn new(n_in: usize, widths: &[usize]) -> Self {
        let mut sizes = vec![n_in];
        sizes.extend_from_slice(widths);
        let mut offsets = Vec::new();
        let mut n = 0;
        for l in 1..sizes.len() {
            offsets.push(n);
            n += sizes[l] * sizes[l - 1] + sizes[l];
        }
        Ffnn { sizes, offsets, n_params: n }
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    fn forward(&self, params: &[C64], spins: &[i8]) -> Forward {
        let mut h: Vec<Vec<C64>> = vec![spins.iter().map(|&s| C64::new(s as f64, 0.0)).collect()];
        let mut z = Vec::new();
        let mut zero = false;
        for l in 1..self.sizes.len() {
            let (nin, nout) = (self.sizes[l - 1], self.sizes[l]);
            let w = &params[self.offsets[l - 1]..];
            let prev = &h[l - 1];
            let mut zl = Vec::with_capacity(nout);
            let mut hl = Vec::with_capacity(nout);
            for o in 0..nout {
                let mut acc = w[nout * nin + o];
                for (i, x) in prev.iter().enumerate() {
                    acc += w[o * nin + i] * x;
                }
                let (v, zf) = logcosh(acc);
                zero |= zf;
                zl.push(acc);
                hl.push(v);
            }
            z.push(zl);
            h.push(hl);
        }
        Forward { z, h, zero }
    }

    pub fn log_psi(&self, params: &[C64], spins: &[i8]) -> C64 {
        let f = self.forward(params, spins);
        if f.zero {
            return C64::new(ZERO_LOG, 0.0);
        }
        f.h.last().unwrap().iter().sum()
    }

    pub fn log_derivs(&self, params: &[C64], spins: &[i8], out: &mut [C64]) -> Result<()> {
        let f = self.forward(params, spins);
        if f.zero {
            return Err(Error::DerivativeAtZeroAmplitude);
        }
        let nl = self.sizes.len() - 1;
        // d log ψ / d h_L = 1
        let mut dh: Vec<C64> = vec![C64::new(1.0, 0.0); self.sizes[nl]];
        for l in (1..=nl).rev() {
            let (nin, nout) = (self.sizes[l - 1], self.sizes[l]);
            let off = self.offsets[l - 1];
            let delta: Vec<C64> = (0..nout).map(|o| dh[o] * tanh_stable(f.z[l - 1][o])).collect();
            let prev = &f.h[l - 1];
            for o in 0..nout {
                for i in 0..nin {
                    out[off + o * nin + i] = delta[o] * prev[i];
                }
                out[off + nout * nin + o] = delta[o];
            }
            if l > 1 {
                let w = &params[off..];
                dh = (0..nin).map(|i| (0..nout).map(|o| delta[o] * w[o * nin + i]).sum()).collect();
            }
        }
        Ok(())
    }
}

/// Translation-invariant two-layer network: `F` convolution-like filters applied to every
/// translate of the configuration, a dense `F → W` layer, and a sum over translates.
/// Parameter order: filters `K` (F × N), filter biases (F), dense `V` (W × F), dense biases (W).
#[derive(Clone, Debug)]
pub struct SymmetricFfnn {
    perms: Vec<Vec<usize>>,
    n: usize,
    features: usize,
    width: usize,
}

impl SymmetricFfnn {
    pub fn new(perms: Vec<Vec<usize>>, features: usize, width: usize) -> Self {
        let n = perms[0].len();
        SymmetricFfnn { perms, n, features, width }
    }

    pub fn n_params(&self) -> usize {
        self.features * self.n + self.features + self.width * self.features + self.width
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let b = self.features * self.n;
        let v = b + self.features;
        let c = v + self.width * self.features;
        (b, v, c)
    }

    fn layer(&self, params: &[C64], spins: &[i8], perm: &[usize]) -> (Vec<C64>, Vec<C64>, Vec<C64>, bool) {
        let (bo, vo, co) = self.offsets();
        let mut zero = false;
        let mut z1 = Vec::with_capacity(self.features);
        let mut h1 = Vec::with_capacity(self.features);
        for j in 0..self.features {
            let mut acc = params[bo + j];
            for i in 0..self.n {
                let w = params[j * self.n + i];
                if spins[perm[i]] > 0 {
                    acc += w;
                } else {
                    acc -= w;
                }
            }
            let (v, zf) = logcosh(acc);
            zero |= zf;
            z1.push(acc);
            h1.push(v);
        }
        let mut z2 = Vec::with_capacity(self.width);
        for k in 0..self.width {
            let mut acc = params[co + k];
            for j in 0..self.features {
                acc += params[vo + k * self.features + j] * h1[j];
            }
            z2.push(acc);
        }
        (z1, h1, z2, zero)
    }

    pub fn log_psi(&self, params: &[C64], spins: &[i8]) -> C64 {
        let mut total = C64::new(0.0, 0.0);
        for perm in &self.perms {
            let (_, _, z2, zero) = self.layer(params, spins, perm);
            if zero {
                return C64::new(ZERO_LOG, 0.0);
            }
            for z in z2 {
                let (v, zf) = logcosh(z);
                if zf {
                    return C64::new(ZERO_LOG, 0.0);
                }
                total += v;
            }
        }
        total
    }

    pub fn log_derivs(&self, params: &[C64], spins: &[i8], out: &mut [C64]) -> Result<()> {
        let (bo, vo, co) = self.offsets();
        out.iter_mut().for_each(|o| *o = C64::new(0.0, 0.0));
        for perm in &self.perms {
            let (z1, h1, z2, zero) = self.layer(params, spins, perm);
            if zero {
                return Err(Error::DerivativeAtZeroAmplitude);
            }
            let d2: Vec<C64> = z2.iter().map(|&z| tanh_stable(z)).collect();
            for k in 0..self.width {
                out[co + k] += d2[k];
                for j in 0..self.features {
                    out[vo + k * self.features + j] += d2[k] * h1[j];
                }
            }
            for j in 0..self.features {
                let dh: C64 = (0..self.width).map(|k| d2[k] * params[vo + k * self.features + j]).sum();
                let d1 = dh * tanh_stable(z1[j]);
                out[bo + j] += d1;
                for i in 0..self.n {
                    if spins[perm[i]] > 0 {
                        out[j * self.n + i] += d1;
                    } else {
                        out[j * self.n + i] -= d1;
                    }
                }
            }
        }
        Ok(())
    }
}

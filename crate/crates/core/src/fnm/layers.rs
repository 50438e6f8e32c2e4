//! The layer family: Fourier layers (spectral convolution + pointwise
//! linear + bias + activation), linear functional layers (function to
//! vector), decoder layers (vector to function), the auxiliary pointwise
//! integral branch, and affine maps. Every layer implements an exact
//! reverse pass; parameter cotangents accumulate into a same-shaped layer
//! struct.
//!
//! Complex parameter blocks exist only for k = 0..=K; negative frequencies
//! are implied by conjugate symmetry so all layer outputs are real. The
//! k = 0 block is kept real (its imaginary part would be a dead parameter).

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::fnm::spectral;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Activation {
    Gelu,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Gelu => 0.5 * x * (1.0 + erf(x / std::f64::consts::SQRT_2)),
            Activation::Identity => x,
        }
    }

    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Gelu => {
                let phi_big = 0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2));
                let phi_small = FRAC_1_SQRT_2PI * (-0.5 * x * x).exp();
                phi_big + x * phi_small
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Per-mode parameter blocks of a spectral operator: a real matrix at k = 0
/// and complex matrices for k = 1..=K, each d_out x d_in.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBlocks {
    pub p0: Array2<f64>,
    pub pk: Vec<Array2<Complex64>>,
}

impl SpectralBlocks {
    pub fn zeros(d_out: usize, d_in: usize, modes: usize) -> Self {
        Self {
            p0: Array2::zeros((d_out, d_in)),
            pk: (0..modes).map(|_| Array2::zeros((d_out, d_in))).collect(),
        }
    }

    pub fn modes(&self) -> usize {
        self.pk.len()
    }

    pub fn d_out(&self) -> usize {
        self.p0.nrows()
    }

    pub fn d_in(&self) -> usize {
        self.p0.ncols()
    }

    /// b_k = P^(k) c_k for k = 0..=K (b_0 real by construction).
    fn apply(&self, coeffs: &Array2<Complex64>) -> Array2<Complex64> {
        let (d_out, d_in) = self.p0.dim();
        let k1 = self.modes() + 1;
        let mut out = Array2::zeros((k1, d_out));
        for l in 0..d_out {
            let mut acc = 0.0;
            for j in 0..d_in {
                acc += self.p0[[l, j]] * coeffs[[0, j]].re;
            }
            out[[0, l]] = Complex64::new(acc, 0.0);
        }
        for (k, p) in self.pk.iter().enumerate() {
            for l in 0..d_out {
                let mut acc = Complex64::default();
                for j in 0..d_in {
                    acc += p[[l, j]] * coeffs[[k + 1, j]];
                }
                out[[k + 1, l]] = acc;
            }
        }
        out
    }

    /// Reverse pass through `apply`: given output cotangents `g` (row k
    /// holds dL/db_k with real/imag parts independent; only the real part
    /// of row 0 is meaningful), accumulates dL/dP into `accum` and returns
    /// the input-coefficient cotangents dL/dc.
    fn backward(
        &self,
        coeffs: &Array2<Complex64>,
        g: &Array2<Complex64>,
        accum: &mut SpectralBlocks,
    ) -> Array2<Complex64> {
        let (d_out, d_in) = self.p0.dim();
        let k1 = self.modes() + 1;
        let mut dc = Array2::zeros((k1, d_in));
        for l in 0..d_out {
            let gl = g[[0, l]].re;
            for j in 0..d_in {
                accum.p0[[l, j]] += gl * coeffs[[0, j]].re;
                dc[[0, j]] += Complex64::new(self.p0[[l, j]] * gl, 0.0);
            }
        }
        for (k, p) in self.pk.iter().enumerate() {
            let pa = &mut accum.pk[k];
            for l in 0..d_out {
                let gl = g[[k + 1, l]];
                for j in 0..d_in {
                    pa[[l, j]] += gl * coeffs[[k + 1, j]].conj();
                    dc[[k + 1, j]] += p[[l, j]].conj() * gl;
                }
            }
        }
        dc
    }

    pub fn visit(&mut self, f: &mut dyn FnMut(&mut f64)) {
        for v in self.p0.iter_mut() {
            f(v);
        }
        for p in &mut self.pk {
            for v in p.iter_mut() {
                f(&mut v.re);
                f(&mut v.im);
            }
        }
    }
}

fn check_resolution(n: usize, modes: usize) -> Result<()> {
    if n <= 2 * modes {
        return Err(Error::InvalidArgument(format!(
            "resolution {n} aliases with {modes} retained modes (need n > 2K)"
        )));
    }
    Ok(())
}

/// One Fourier layer v -> sigma(W v + K v + b) with constant bias.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierLayer {
    pub w: Array2<f64>,
    pub blocks: SpectralBlocks,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

pub struct FourierLayerCache {
    input: Array2<f64>,
    coeffs: Array2<Complex64>,
    pre: Array2<f64>,
}

impl FourierLayer {
    pub fn zeros(d_out: usize, d_in: usize, modes: usize, activation: Activation) -> Self {
        Self {
            w: Array2::zeros((d_out, d_in)),
            blocks: SpectralBlocks::zeros(d_out, d_in, modes),
            bias: Array1::zeros(d_out),
            activation,
        }
    }

    pub fn forward(&self, input: &Array2<f64>) -> Result<(Array2<f64>, FourierLayerCache)> {
        let (n, d_in) = input.dim();
        if d_in != self.blocks.d_in() {
            return Err(Error::DimensionMismatch(format!(
                "layer expects {} channels, input has {d_in}",
                self.blocks.d_in()
            )));
        }
        check_resolution(n, self.blocks.modes())?;
        let coeffs = spectral::forward_coeffs(input, self.blocks.modes());
        let conv = spectral::inverse_mirrored(&self.blocks.apply(&coeffs), n);
        let mut pre = input.dot(&self.w.t()) + conv;
        for mut row in pre.rows_mut() {
            row += &self.bias;
        }
        let out = pre.mapv(|x| self.activation.apply(x));
        Ok((out, FourierLayerCache { input: input.clone(), coeffs, pre }))
    }

    /// Accumulates parameter cotangents into `accum` and returns dL/dinput.
    pub fn backward(
        &self,
        cache: &FourierLayerCache,
        grad_out: &Array2<f64>,
        accum: &mut FourierLayer,
    ) -> Array2<f64> {
        let n = cache.input.nrows();
        let ds = grad_out * &cache.pre.mapv(|x| self.activation.derivative(x));
        accum.w += &ds.t().dot(&cache.input);
        accum.bias += &ds.sum_axis(ndarray::Axis(0));

        // spectral path: cotangent of b_k is 2 * unnormalized DFT of ds
        // (the conjugate-mirrored negative frequency contributes the factor
        // of two; k = 0 is unpaired)
        let mut g_hat = spectral::forward_unnormalized(&ds, self.blocks.modes());
        for (k, mut row) in g_hat.rows_mut().into_iter().enumerate() {
            if k > 0 {
                row.mapv_inplace(|v| v * 2.0);
            }
        }
        let dc = self.blocks.backward(&cache.coeffs, &g_hat, &mut accum.blocks);
        spectral::inverse_oneside(&dc, n) + ds.dot(&self.w)
    }

    pub fn visit(&mut self, f: &mut dyn FnMut(&mut f64)) {
        for v in self.w.iter_mut() {
            f(v);
        }
        self.blocks.visit(f);
        for v in self.bias.iter_mut() {
            f(v);
        }
    }
}

/// Linear functional layer: h -> { Re sum_{|k|<=K} (P^(k) <psi_k, h>)_l }.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalLayer {
    pub blocks: SpectralBlocks,
}

pub struct FunctionalLayerCache {
    coeffs: Array2<Complex64>,
    n: usize,
}

impl FunctionalLayer {
    pub fn zeros(m: usize, d: usize, modes: usize) -> Self {
        Self { blocks: SpectralBlocks::zeros(m, d, modes) }
    }

    pub fn forward(&self, input: &Array2<f64>) -> Result<(Array1<f64>, FunctionalLayerCache)> {
        let (n, d_in) = input.dim();
        if d_in != self.blocks.d_in() {
            return Err(Error::DimensionMismatch(format!(
                "functional layer expects {} channels, input has {d_in}",
                self.blocks.d_in()
            )));
        }
        check_resolution(n, self.blocks.modes())?;
        let coeffs = spectral::forward_coeffs(input, self.blocks.modes());
        let b = self.blocks.apply(&coeffs);
        let m = self.blocks.d_out();
        let mut out = Array1::zeros(m);
        for l in 0..m {
            let mut acc = b[[0, l]].re;
            for k in 1..=self.blocks.modes() {
                acc += 2.0 * b[[k, l]].re;
            }
            out[l] = acc;
        }
        Ok((out, FunctionalLayerCache { coeffs, n }))
    }

    pub fn backward(
        &self,
        cache: &FunctionalLayerCache,
        grad_out: &Array1<f64>,
        accum: &mut FunctionalLayer,
    ) -> Array2<f64> {
        let k1 = self.blocks.modes() + 1;
        let m = self.blocks.d_out();
        let mut g = Array2::zeros((k1, m));
        for l in 0..m {
            g[[0, l]] = Complex64::new(grad_out[l], 0.0);
            for k in 1..k1 {
                g[[k, l]] = Complex64::new(2.0 * grad_out[l], 0.0);
            }
        }
        let dc = self.blocks.backward(&cache.coeffs, &g, &mut accum.blocks);
        spectral::inverse_oneside(&dc, cache.n)
    }

    pub fn visit(&mut self, f: &mut dyn FnMut(&mut f64)) {
        self.blocks.visit(f);
    }
}

/// Linear decoder layer: z -> { Re sum_{|k|<=K} (P^(k) z)_j psi_k }.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderLayer {
    pub blocks: SpectralBlocks,
}

pub struct DecoderLayerCache {
    z: Array1<f64>,
}

impl DecoderLayer {
    pub fn zeros(d: usize, m: usize, modes: usize) -> Self {
        Self { blocks: SpectralBlocks::zeros(d, m, modes) }
    }

    pub fn forward(&self, z: &Array1<f64>, n: usize) -> Result<(Array2<f64>, DecoderLayerCache)> {
        if z.len() != self.blocks.d_in() {
            return Err(Error::DimensionMismatch(format!(
                "decoder expects a vector of length {}, got {}",
                self.blocks.d_in(),
                z.len()
            )));
        }
        check_resolution(n, self.blocks.modes())?;
        let k1 = self.blocks.modes() + 1;
        let d = self.blocks.d_out();
        let mut b = Array2::zeros((k1, d));
        for l in 0..d {
            let mut acc = 0.0;
            for j in 0..z.len() {
                acc += self.blocks.p0[[l, j]] * z[j];
            }
            b[[0, l]] = Complex64::new(acc, 0.0);
        }
        for (k, p) in self.blocks.pk.iter().enumerate() {
            for l in 0..d {
                let mut acc = Complex64::default();
                for j in 0..z.len() {
                    acc += p[[l, j]] * z[j];
                }
                b[[k + 1, l]] = acc;
            }
        }
        Ok((spectral::inverse_mirrored(&b, n), DecoderLayerCache { z: z.clone() }))
    }

    pub fn backward(
        &self,
        cache: &DecoderLayerCache,
        grad_out: &Array2<f64>,
        accum: &mut DecoderLayer,
    ) -> Array1<f64> {
        let mut g_hat = spectral::forward_unnormalized(grad_out, self.blocks.modes());
        for (k, mut row) in g_hat.rows_mut().into_iter().enumerate() {
            if k > 0 {
                row.mapv_inplace(|v| v * 2.0);
            }
        }
        let d = self.blocks.d_out();
        let m = self.blocks.d_in();
        let mut dz = Array1::zeros(m);
        for l in 0..d {
            let g0 = g_hat[[0, l]].re;
            for j in 0..m {
                accum.blocks.p0[[l, j]] += g0 * cache.z[j];
                dz[j] += self.blocks.p0[[l, j]] * g0;
            }
        }
        for (k, p) in self.blocks.pk.iter().enumerate() {
            let pa = &mut accum.blocks.pk[k];
            for l in 0..d {
                let gl = g_hat[[k + 1, l]];
                for j in 0..m {
                    pa[[l, j]] += gl * cache.z[j];
                    dz[j] += (p[[l, j]].conj() * gl).re;
                }
            }
        }
        dz
    }

    pub fn visit(&mut self, f: &mut dyn FnMut(&mut f64)) {
        self.blocks.visit(f);
    }
}

/// Auxiliary integral branch h -> (1/n) sum_i NN(h(x_i)) with a one-hidden-
/// layer GELU network, so all frequencies of h contribute.
#[derive(Debug, Clone, PartialEq)]
pub struct WBranch {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

pub struct WBranchCache {
    input: Array2<f64>,
    hidden_pre: Array2<f64>,
}

impl WBranch {
    pub fn zeros(m: usize, d: usize, hidden: usize) -> Self {
        Self {
            w1: Array2::zeros((hidden, d)),
            b1: Array1::zeros(hidden),
            w2: Array2::zeros((m, hidden)),
            b2: Array1::zeros(m),
        }
    }

    pub fn forward(&self, input: &Array2<f64>) -> Result<(Array1<f64>, WBranchCache)> {
        if input.ncols() != self.w1.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "integral branch expects {} channels, input has {}",
                self.w1.ncols(),
                input.ncols()
            )));
        }
        let n = input.nrows();
        let mut hidden_pre = input.dot(&self.w1.t());
        for mut row in hidden_pre.rows_mut() {
            row += &self.b1;
        }
        let act = hidden_pre.mapv(|x| Activation::Gelu.apply(x));
        let mean_act = act.mean_axis(ndarray::Axis(0)).expect("nonempty grid");
        let out = self.w2.dot(&mean_act) + &self.b2;
        let _ = n;
        Ok((out, WBranchCache { input: input.clone(), hidden_pre }))
    }

    pub fn backward(
        &self,
        cache: &WBranchCache,
        grad_out: &Array1<f64>,
        accum: &mut WBranch,
    ) -> Array2<f64> {
        let n = cache.input.nrows() as f64;
        let act = cache.hidden_pre.mapv(|x| Activation::Gelu.apply(x));
        let mean_act = act.mean_axis(ndarray::Axis(0)).expect("nonempty grid");
        for (l, g) in grad_out.iter().enumerate() {
            accum.b2[l] += g;
            for h in 0..self.w2.ncols() {
                accum.w2[[l, h]] += g * mean_act[h];
            }
        }
        let da_each = self.w2.t().dot(grad_out) / n; // same for every grid point
        let mut dh = cache.hidden_pre.mapv(|x| Activation::Gelu.derivative(x));
        for mut row in dh.rows_mut() {
            row *= &da_each;
        }
        accum.w1 += &dh.t().dot(&cache.input);
        accum.b1 += &dh.sum_axis(ndarray::Axis(0));
        dh.dot(&self.w1)
    }

    pub fn visit(&mut self, f: &mut dyn FnMut(&mut f64)) {
        for v in self.w1.iter_mut() {
            f(v);
        }
        for v in self.b1.iter_mut() {
            f(v);
        }
        for v in self.w2.iter_mut() {
            f(v);
        }
        for v in self.b2.iter_mut() {
            f(v);
        }
    }
}

/// Affine map z -> W z + b, applied to vectors or pointwise over a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Affine {
    pub fn zeros(d_out: usize, d_in: usize) -> Self {
        Self { w: Array2::zeros((d_out, d_in)), b: Array1::zeros(d_out) }
    }

    pub fn identity(d: usize) -> Self {
        Self { w: Array2::eye(d), b: Array1::zeros(d) }
    }

    pub fn apply_vec(&self, z: &Array1<f64>) -> Result<Array1<f64>> {
        if z.len() != self.w.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "affine map expects length {}, got {}",
                self.w.ncols(),
                z.len()
            )));
        }
        Ok(self.w.dot(z) + &self.b)
    }

    pub fn apply_pointwise(&self, grid: &Array2<f64>) -> Result<Array2<f64>> {
        if grid.ncols() != self.w.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "affine map expects {} channels, got {}",
                self.w.ncols(),
                grid.ncols()
            )));
        }
        let mut out = grid.dot(&self.w.t());
        for mut row in out.rows_mut() {
            row += &self.b;
        }
        Ok(out)
    }

    pub fn backward_vec(
        &self,
        input: &Array1<f64>,
        grad_out: &Array1<f64>,
        accum: &mut Affine,
    ) -> Array1<f64> {
        for (l, g) in grad_out.iter().enumerate() {
            accum.b[l] += g;
            for j in 0..input.len() {
                accum.w[[l, j]] += g * input[j];
            }
        }
        self.w.t().dot(grad_out)
    }

    pub fn backward_pointwise(
        &self,
        input: &Array2<f64>,
        grad_out: &Array2<f64>,
        accum: &mut Affine,
    ) -> Array2<f64> {
        accum.w += &grad_out.t().dot(input);
        accum.b += &grad_out.sum_axis(ndarray::Axis(0));
        grad_out.dot(&self.w)
    }

    pub fn visit(&mut self, f: &mut dyn FnMut(&mut f64)) {
        for v in self.w.iter_mut() {
            f(v);
        }
        for v in self.b.iter_mut() {
            f(v);
        }
    }
}

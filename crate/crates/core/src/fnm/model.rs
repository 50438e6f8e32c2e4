//! The four architecture variants wiring lift, decoder, Fourier layers,
//! functional head, auxiliary integral branch, and projection into one
//! model, with a cached forward pass and an exact reverse pass.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::fnm::grid::GridFunction;
use crate::fnm::layers::{
    Activation, Affine, DecoderLayer, DecoderLayerCache, FourierLayer, FourierLayerCache,
    FunctionalLayer, FunctionalLayerCache, WBranch, WBranchCache,
};

/// Whether each end of the mapping is a function space (F) or a finite-
/// dimensional vector space (V).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Variant {
    F2F,
    F2V,
    V2F,
    V2V,
}

impl Variant {
    pub fn vector_input(self) -> bool {
        matches!(self, Variant::V2F | Variant::V2V)
    }

    pub fn vector_output(self) -> bool {
        matches!(self, Variant::F2V | Variant::V2V)
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelConfig {
    pub variant: Variant,
    /// Input channels (F2*) or input vector length (V2*).
    pub in_dim: usize,
    /// Output channels (*2F) or output vector length (*2V).
    pub out_dim: usize,
    /// Latent channel width d.
    pub width: usize,
    /// Retained frequencies K.
    pub modes: usize,
    /// Number of nonlinear (GELU) Fourier layers.
    pub hidden_layers: usize,
    /// Latent grid resolution for vector inputs (power of two, > 2K).
    pub resolution: usize,
    /// Concatenate the pointwise integral branch with the functional head.
    pub use_w_branch: bool,
}

impl ModelConfig {
    fn validate(&self) -> Result<()> {
        if self.in_dim == 0 || self.out_dim == 0 || self.width == 0 {
            return Err(Error::InvalidArgument(
                "model dimensions must be positive".into(),
            ));
        }
        if !self.resolution.is_power_of_two() || self.resolution <= 2 * self.modes {
            return Err(Error::InvalidArgument(format!(
                "resolution {} must be a power of two exceeding 2K = {}",
                self.resolution,
                2 * self.modes
            )));
        }
        if self.use_w_branch && !self.variant.vector_output() {
            return Err(Error::InvalidArgument(
                "the integral branch only applies to vector-valued variants".into(),
            ));
        }
        Ok(())
    }

    fn head_dim(&self) -> usize {
        if self.use_w_branch {
            2 * self.width
        } else {
            self.width
        }
    }
}

/// Input or output of a model: a vector or a grid function, per variant.
#[derive(Debug, Clone, PartialEq)]
pub enum Sample {
    Vector(Array1<f64>),
    Function(GridFunction),
}

impl Sample {
    pub fn as_vector(&self) -> Result<&Array1<f64>> {
        match self {
            Sample::Vector(v) => Ok(v),
            Sample::Function(_) => Err(Error::DimensionMismatch(
                "expected a vector sample, got a function".into(),
            )),
        }
    }

    pub fn as_function(&self) -> Result<&GridFunction> {
        match self {
            Sample::Function(h) => Ok(h),
            Sample::Vector(_) => Err(Error::DimensionMismatch(
                "expected a function sample, got a vector".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FnmModel {
    pub config: ModelConfig,
    /// Lift S: vector affine (V2*) or pointwise affine (F2*), in_dim -> width.
    pub lift: Affine,
    /// Decoder D, width-vector -> width-channel function (V2* only).
    pub decoder: Option<DecoderLayer>,
    /// Nonlinear Fourier layers, width -> width, GELU.
    pub hidden: Vec<FourierLayer>,
    /// Final identity-activation Fourier layer (*2F only).
    pub final_fourier: Option<FourierLayer>,
    /// Functional head G, width channels -> width vector (*2V only).
    pub functional: Option<FunctionalLayer>,
    /// Auxiliary integral branch concatenated with G (*2V, optional).
    pub w_branch: Option<WBranch>,
    /// Projection Q: vector affine head_dim -> out_dim (*2V) or pointwise
    /// affine width -> out_dim (*2F).
    pub proj: Affine,
}

/// Which training group a parameter belongs to: the nonlinear body or the
/// linear-in-parameters head (functional layer, integral branch, projection).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamGroup {
    Body,
    Head,
}

pub struct ForwardCache {
    lift_input: Sample,
    decoder: Option<DecoderLayerCache>,
    hidden: Vec<FourierLayerCache>,
    final_fourier: Option<FourierLayerCache>,
    functional: Option<FunctionalLayerCache>,
    w_branch: Option<WBranchCache>,
    /// Input to the projection: the head vector (*2V) or final grid (*2F).
    proj_input: ProjInput,
}

enum ProjInput {
    Vector(Array1<f64>),
    Grid(Array2<f64>),
}

impl FnmModel {
    /// All-zero parameters with the shapes implied by `config`.
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let (w, k) = (config.width, config.modes);
        let lift = Affine::zeros(w, config.in_dim);
        let decoder = config
            .variant
            .vector_input()
            .then(|| DecoderLayer::zeros(w, w, k));
        let hidden = (0..config.hidden_layers)
            .map(|_| FourierLayer::zeros(w, w, k, Activation::Gelu))
            .collect();
        let final_fourier = (!config.variant.vector_output())
            .then(|| FourierLayer::zeros(w, w, k, Activation::Identity));
        let functional = config
            .variant
            .vector_output()
            .then(|| FunctionalLayer::zeros(w, w, k));
        let w_branch = config.use_w_branch.then(|| WBranch::zeros(w, w, w));
        let proj = if config.variant.vector_output() {
            Affine::zeros(config.out_dim, config.head_dim())
        } else {
            Affine::zeros(config.out_dim, w)
        };
        Ok(Self {
            config,
            lift,
            decoder,
            hidden,
            final_fourier,
            functional,
            w_branch,
            proj,
        })
    }

    /// Random initialization: complex spectral blocks iid Gaussian with
    /// entry variance 1/(d_in (2K+1)), real matrices Glorot-uniform,
    /// biases zero. Deterministic given the seed.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        let mut model = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let modes = model.config.modes;

        fn glorot(rng: &mut ChaCha8Rng, m: &mut Array2<f64>) {
            let a = (6.0 / (m.nrows() + m.ncols()) as f64).sqrt();
            for v in m.iter_mut() {
                *v = rng.gen_range(-a..a);
            }
        }
        fn spectral_init(
            rng: &mut ChaCha8Rng,
            blocks: &mut crate::fnm::layers::SpectralBlocks,
            modes: usize,
        ) {
            let var = 1.0 / (blocks.d_in() * (2 * modes + 1)) as f64;
            let real = Normal::new(0.0, var.sqrt()).expect("positive variance");
            let part = Normal::new(0.0, (var / 2.0).sqrt()).expect("positive variance");
            for v in blocks.p0.iter_mut() {
                *v = real.sample(rng);
            }
            for p in &mut blocks.pk {
                for v in p.iter_mut() {
                    v.re = part.sample(rng);
                    v.im = part.sample(rng);
                }
            }
        }

        glorot(&mut rng, &mut model.lift.w);
        if let Some(dec) = &mut model.decoder {
            spectral_init(&mut rng, &mut dec.blocks, modes);
        }
        for layer in &mut model.hidden {
            glorot(&mut rng, &mut layer.w);
            spectral_init(&mut rng, &mut layer.blocks, modes);
        }
        if let Some(layer) = &mut model.final_fourier {
            glorot(&mut rng, &mut layer.w);
            spectral_init(&mut rng, &mut layer.blocks, modes);
        }
        if let Some(func) = &mut model.functional {
            spectral_init(&mut rng, &mut func.blocks, modes);
        }
        if let Some(branch) = &mut model.w_branch {
            glorot(&mut rng, &mut branch.w1);
            glorot(&mut rng, &mut branch.w2);
        }
        glorot(&mut rng, &mut model.proj.w);
        Ok(model)
    }

    /// A same-shaped model with zero parameters, for gradient accumulation.
    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.config.clone()).expect("config already validated")
    }

    /// Evaluates the model at the configured latent resolution.
    pub fn forward(&self, input: &Sample) -> Result<(Sample, ForwardCache)> {
        self.forward_at(input, self.config.resolution)
    }

    /// Evaluates the model, using `resolution` for the latent (and output)
    /// grid of vector-input variants; function inputs carry their own grid.
    pub fn forward_at(&self, input: &Sample, resolution: usize) -> Result<(Sample, ForwardCache)> {
        // lift + decode to the latent grid function
        let (mut current, decoder_cache) = if self.config.variant.vector_input() {
            let z = input.as_vector()?;
            if z.len() != self.config.in_dim {
                return Err(Error::DimensionMismatch(format!(
                    "expected input length {}, got {}",
                    self.config.in_dim,
                    z.len()
                )));
            }
            let lifted = self.lift.apply_vec(z)?;
            let dec = self.decoder.as_ref().expect("vector-input variant");
            let (grid, cache) = dec.forward(&lifted, resolution)?;
            (grid, Some(cache))
        } else {
            let h = input.as_function()?;
            if h.channels() != self.config.in_dim {
                return Err(Error::DimensionMismatch(format!(
                    "expected {} input channels, got {}",
                    self.config.in_dim,
                    h.channels()
                )));
            }
            (self.lift.apply_pointwise(h.values())?, None)
        };

        let mut hidden_caches = Vec::with_capacity(self.hidden.len());
        for layer in &self.hidden {
            let (next, cache) = layer.forward(&current)?;
            hidden_caches.push(cache);
            current = next;
        }

        let mut final_cache = None;
        if let Some(layer) = &self.final_fourier {
            let (next, cache) = layer.forward(&current)?;
            final_cache = Some(cache);
            current = next;
        }

        if self.config.variant.vector_output() {
            let func = self.functional.as_ref().expect("vector-output variant");
            let (gv, func_cache) = func.forward(&current)?;
            let (head, w_cache) = if let Some(branch) = &self.w_branch {
                let (wv, cache) = branch.forward(&current)?;
                let mut head = Array1::zeros(gv.len() + wv.len());
                head.slice_mut(ndarray::s![..gv.len()]).assign(&gv);
                head.slice_mut(ndarray::s![gv.len()..]).assign(&wv);
                (head, Some(cache))
            } else {
                (gv, None)
            };
            let out = self.proj.apply_vec(&head)?;
            Ok((
                Sample::Vector(out),
                ForwardCache {
                    lift_input: input.clone(),
                    decoder: decoder_cache,
                    hidden: hidden_caches,
                    final_fourier: None,
                    functional: Some(func_cache),
                    w_branch: w_cache,
                    proj_input: ProjInput::Vector(head),
                },
            ))
        } else {
            let out = self.proj.apply_pointwise(&current)?;
            Ok((
                Sample::Function(GridFunction::new(out)?),
                ForwardCache {
                    lift_input: input.clone(),
                    decoder: decoder_cache,
                    hidden: hidden_caches,
                    final_fourier: final_cache,
                    functional: None,
                    w_branch: None,
                    proj_input: ProjInput::Grid(current),
                },
            ))
        }
    }

    /// Reverse pass: accumulates parameter cotangents into `accum` and
    /// returns the input cotangent.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        grad_out: &Sample,
        accum: &mut FnmModel,
    ) -> Result<Sample> {
        // back through the projection and head to a latent-grid cotangent
        let mut grad_grid = if self.config.variant.vector_output() {
            let g = grad_out.as_vector()?;
            let head = match &cache.proj_input {
                ProjInput::Vector(v) => v,
                ProjInput::Grid(_) => unreachable!("vector-output cache"),
            };
            let dhead = self.proj.backward_vec(head, g, &mut accum.proj);
            let func = self.functional.as_ref().expect("vector-output variant");
            let func_accum = accum.functional.as_mut().expect("same shape");
            let m = self.config.width;
            let dg = dhead.slice(ndarray::s![..m]).to_owned();
            let mut grad = func.backward(
                cache.functional.as_ref().expect("vector-output cache"),
                &dg,
                func_accum,
            );
            if let Some(branch) = &self.w_branch {
                let dw = dhead.slice(ndarray::s![m..]).to_owned();
                grad = grad
                    + branch.backward(
                        cache.w_branch.as_ref().expect("branch cache"),
                        &dw,
                        accum.w_branch.as_mut().expect("same shape"),
                    );
            }
            grad
        } else {
            let g = grad_out.as_function()?;
            let grid = match &cache.proj_input {
                ProjInput::Grid(v) => v,
                ProjInput::Vector(_) => unreachable!("function-output cache"),
            };
            let mut grad = self
                .proj
                .backward_pointwise(grid, g.values(), &mut accum.proj);
            if let Some(layer) = &self.final_fourier {
                grad = layer.backward(
                    cache.final_fourier.as_ref().expect("function-output cache"),
                    &grad,
                    accum.final_fourier.as_mut().expect("same shape"),
                );
            }
            grad
        };

        for (i, layer) in self.hidden.iter().enumerate().rev() {
            grad_grid = layer.backward(&cache.hidden[i], &grad_grid, &mut accum.hidden[i]);
        }

        // back through decode + lift to the input cotangent
        if self.config.variant.vector_input() {
            let dec = self.decoder.as_ref().expect("vector-input variant");
            let dz = dec.backward(
                cache.decoder.as_ref().expect("vector-input cache"),
                &grad_grid,
                accum.decoder.as_mut().expect("same shape"),
            );
            let z = cache.lift_input.as_vector()?;
            let din = self.lift.backward_vec(z, &dz, &mut accum.lift);
            Ok(Sample::Vector(din))
        } else {
            let h = cache.lift_input.as_function()?;
            let din = self
                .lift
                .backward_pointwise(h.values(), &grad_grid, &mut accum.lift);
            Ok(Sample::Function(GridFunction::new(din)?))
        }
    }

    /// Visits every scalar parameter in a fixed order, tagged with its
    /// training group.
    pub fn visit_params(&mut self, f: &mut dyn FnMut(ParamGroup, &mut f64)) {
        self.lift.visit(&mut |v| f(ParamGroup::Body, v));
        if let Some(dec) = &mut self.decoder {
            dec.visit(&mut |v| f(ParamGroup::Body, v));
        }
        for layer in &mut self.hidden {
            layer.visit(&mut |v| f(ParamGroup::Body, v));
        }
        if let Some(layer) = &mut self.final_fourier {
            layer.visit(&mut |v| f(ParamGroup::Body, v));
        }
        if let Some(func) = &mut self.functional {
            func.visit(&mut |v| f(ParamGroup::Head, v));
        }
        if let Some(branch) = &mut self.w_branch {
            branch.visit(&mut |v| f(ParamGroup::Head, v));
        }
        self.proj.visit(&mut |v| f(ParamGroup::Head, v));
    }

    pub fn param_count(&mut self) -> usize {
        let mut count = 0;
        self.visit_params(&mut |_, _| count += 1);
        count
    }
}

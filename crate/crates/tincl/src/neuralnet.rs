//! Fully-connected backbone/head network with exact reverse-mode gradients.
//!
//! The backbone maps a flattened n x n channel matrix through LeakyReLU
//! hidden layers to an l-dimensional embedding, optionally l2-normalized.
//! The head is a single affine layer followed by a sigmoid, producing a
//! power vector in (0,1)^n. All gradients are analytic; the tests check
//! them against central finite differences.

use rand::distributions::{Distribution, Uniform};

use crate::error::{Error, Result};
use crate::netsim::{ChannelMatrix, PowerVector};
use crate::real::Real;
use crate::rng::{self, tag};

#[derive(Debug, Clone, PartialEq)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub embedding_dim: usize,
    pub output_dim: usize,
    pub leaky_slope: f64,
    pub normalize_embedding: bool,
}

impl MlpSpec {
    /// Preset used by the small 3-pair clustering demo: one 128-unit hidden
    /// layer and a 2-D unit-circle embedding.
    pub fn demo(n: usize) -> Self {
        MlpSpec {
            input_dim: n * n,
            hidden_dims: vec![128],
            embedding_dim: 2,
            output_dim: n,
            leaky_slope: 0.01,
            normalize_embedding: true,
        }
    }

    /// Preset used by the larger evaluation runs: two 512-unit hidden layers.
    pub fn evaluation(n: usize) -> Self {
        MlpSpec {
            input_dim: n * n,
            hidden_dims: vec![512, 512],
            // With unit-norm embeddings the head's input scale is 1/sqrt(l);
            // 64 keeps the head trainable at the default learning rate.
            embedding_dim: 64,
            output_dim: n,
            leaky_slope: 0.01,
            normalize_embedding: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim < 1 || self.embedding_dim < 1 || self.output_dim < 1 {
            return Err(Error::Config("all MLP dimensions must be >= 1".into()));
        }
        if self.hidden_dims.iter().any(|d| *d < 1) {
            return Err(Error::Config("hidden dimensions must be >= 1".into()));
        }
        if !(self.leaky_slope > 0.0 && self.leaky_slope < 1.0) {
            return Err(Error::Config("leaky_slope must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// (in, out) dimensions of every backbone affine layer, in order. The
    /// last one produces the embedding.
    fn backbone_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::new();
        let mut prev = self.input_dim;
        for &h in &self.hidden_dims {
            dims.push((prev, h));
            prev = h;
        }
        dims.push((prev, self.embedding_dim));
        dims
    }
}

/// One affine layer; weights are out x in, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<F: Real = f64> {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<F>,
    pub biases: Vec<F>,
}

impl<F: Real> Layer<F> {
    fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Layer {
            in_dim,
            out_dim,
            weights: vec![F::zero(); in_dim * out_dim],
            biases: vec![F::zero(); out_dim],
        }
    }

    fn affine(&self, input: &[F]) -> Vec<F> {
        debug_assert_eq!(input.len(), self.in_dim);
        (0..self.out_dim)
            .map(|o| {
                let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
                let mut acc = self.biases[o];
                for (w, x) in row.iter().zip(input) {
                    acc += *w * *x;
                }
                acc
            })
            .collect()
    }

    /// Accumulate parameter gradients for `dz` (gradient wrt this layer's
    /// pre-activation) and return the gradient wrt the layer input.
    fn backward(&self, input: &[F], dz: &[F], grad: &mut Layer<F>) -> Vec<F> {
        let mut d_input = vec![F::zero(); self.in_dim];
        for o in 0..self.out_dim {
            grad.biases[o] += dz[o];
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            let grow = &mut grad.weights[o * self.in_dim..(o + 1) * self.in_dim];
            for i in 0..self.in_dim {
                grow[i] += dz[o] * input[i];
                d_input[i] += row[i] * dz[o];
            }
        }
        d_input
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel<F: Real = f64> {
    pub spec: MlpSpec,
    pub backbone: Vec<Layer<F>>,
    pub head: Layer<F>,
}

/// Parameter-shaped gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet<F: Real = f64> {
    pub backbone: Vec<Layer<F>>,
    pub head: Layer<F>,
}

impl<F: Real> GradientSet<F> {
    pub fn zeros_like(model: &MlpModel<F>) -> Self {
        GradientSet {
            backbone: model
                .backbone
                .iter()
                .map(|l| Layer::zeros(l.in_dim, l.out_dim))
                .collect(),
            head: Layer::zeros(model.head.in_dim, model.head.out_dim),
        }
    }

    pub fn add_assign(&mut self, other: &GradientSet<F>) {
        for (a, b) in self.backbone.iter_mut().zip(&other.backbone) {
            for (x, y) in a.weights.iter_mut().zip(&b.weights) {
                *x += *y;
            }
            for (x, y) in a.biases.iter_mut().zip(&b.biases) {
                *x += *y;
            }
        }
        for (x, y) in self.head.weights.iter_mut().zip(&other.head.weights) {
            *x += *y;
        }
        for (x, y) in self.head.biases.iter_mut().zip(&other.head.biases) {
            *x += *y;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.backbone
            .iter()
            .chain(std::iter::once(&self.head))
            .all(|l| {
                l.weights.iter().all(|w| w.is_finite())
                    && l.biases.iter().all(|b| b.is_finite())
            })
    }
}

/// Activations cached by a forward pass, consumed by the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<F: Real = f64> {
    input: Vec<F>,
    /// Input to every backbone affine layer (first entry == `input`).
    layer_inputs: Vec<Vec<F>>,
    /// Pre-activation of every hidden layer (LeakyReLU layers only).
    hidden_pre: Vec<Vec<F>>,
    /// Embedding before l2 normalization.
    emb_raw: Vec<F>,
    /// Embedding actually exposed (normalized iff enabled).
    emb: Vec<F>,
    /// Head output, present once `forward_head` ran on this cache.
    output: Option<Vec<F>>,
}

impl<F: Real> ForwardCache<F> {
    pub fn embedding(&self) -> &[F] {
        &self.emb
    }
}

fn leaky<F: Real>(z: F, slope: F) -> F {
    if z >= F::zero() {
        z
    } else {
        slope * z
    }
}

impl<F: Real> MlpModel<F> {
    /// Uniform(-sqrt(6/fan_in), +sqrt(6/fan_in)) weights, zero biases.
    pub fn init(spec: &MlpSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = rng::substream(seed, tag::MODEL_INIT, 0);
        let mut make_layer = |in_dim: usize, out_dim: usize| {
            let bound = F::from_f64((6.0 / in_dim as f64).sqrt());
            let dist = Uniform::new_inclusive(-bound, bound);
            Layer {
                in_dim,
                out_dim,
                weights: (0..in_dim * out_dim)
                    .map(|_| dist.sample(&mut rng))
                    .collect(),
                biases: vec![F::zero(); out_dim],
            }
        };
        let backbone = spec
            .backbone_dims()
            .iter()
            .map(|&(i, o)| make_layer(i, o))
            .collect();
        let head = make_layer(spec.embedding_dim, spec.output_dim);
        Ok(MlpModel {
            spec: spec.clone(),
            backbone,
            head,
        })
    }

    pub fn forward_backbone_vec(&self, input: &[F]) -> Result<ForwardCache<F>> {
        if input.len() != self.spec.input_dim {
            return Err(Error::Dimension(format!(
                "backbone expects {} inputs, got {}",
                self.spec.input_dim,
                input.len()
            )));
        }
        let slope = F::from_f64(self.spec.leaky_slope);
        let mut layer_inputs = Vec::with_capacity(self.backbone.len());
        let mut hidden_pre = Vec::with_capacity(self.backbone.len() - 1);
        let mut current = input.to_vec();
        let last = self.backbone.len() - 1;
        for (k, layer) in self.backbone.iter().enumerate() {
            layer_inputs.push(current.clone());
            let z = layer.affine(&current);
            if k < last {
                current = z.iter().map(|&v| leaky(v, slope)).collect();
                hidden_pre.push(z);
            } else {
                current = z;
            }
        }
        let emb_raw = current;
        let emb = if self.spec.normalize_embedding {
            let norm = emb_raw.iter().map(|v| *v * *v).sum::<F>().sqrt();
            if norm == F::zero() {
                return Err(Error::ZeroNormEmbedding);
            }
            emb_raw.iter().map(|v| *v / norm).collect()
        } else {
            emb_raw.clone()
        };
        Ok(ForwardCache {
            input: input.to_vec(),
            layer_inputs,
            hidden_pre,
            emb_raw,
            emb,
            output: None,
        })
    }

    pub fn forward_backbone(&self, h: &ChannelMatrix<F>) -> Result<ForwardCache<F>> {
        self.forward_backbone_vec(h.gains())
    }

    /// sigmoid(affine(embedding)).
    pub fn forward_head(&self, cache: &mut ForwardCache<F>) -> Result<PowerVector<F>> {
        if cache.emb.len() != self.head.in_dim {
            return Err(Error::Dimension(format!(
                "head expects {} inputs, got {}",
                self.head.in_dim,
                cache.emb.len()
            )));
        }
        let out: Vec<F> = self
            .head
            .affine(&cache.emb)
            .into_iter()
            .map(|z| F::one() / (F::one() + (-z).exp()))
            .collect();
        cache.output = Some(out.clone());
        PowerVector::new(out)
    }

    pub fn forward(&self, h: &ChannelMatrix<F>) -> Result<(PowerVector<F>, ForwardCache<F>)> {
        let mut cache = self.forward_backbone(h)?;
        let out = self.forward_head(&mut cache)?;
        Ok((out, cache))
    }

    /// Backward through the whole network given the gradient of a scalar
    /// loss wrt the head output. The cache must come from `forward`.
    pub fn backward(
        &self,
        cache: &ForwardCache<F>,
        d_output: &[F],
    ) -> Result<GradientSet<F>> {
        let out = cache.output.as_ref().ok_or_else(|| {
            Error::Dimension("backward requires a cache produced by forward".into())
        })?;
        if d_output.len() != self.spec.output_dim {
            return Err(Error::Dimension(format!(
                "expected {} output gradients, got {}",
                self.spec.output_dim,
                d_output.len()
            )));
        }
        let mut grads = GradientSet::zeros_like(self);
        // Sigmoid: dz = dy * y * (1 - y).
        let dz: Vec<F> = d_output
            .iter()
            .zip(out)
            .map(|(dy, y)| *dy * *y * (F::one() - *y))
            .collect();
        let d_emb = self.head.backward(&cache.emb, &dz, &mut grads.head);
        self.backbone_backward(cache, &d_emb, &mut grads)?;
        Ok(grads)
    }

    /// Backbone-only backward given the gradient wrt the (post-normalization)
    /// embedding. Head gradients stay zero.
    pub fn backward_from_embedding(
        &self,
        cache: &ForwardCache<F>,
        d_embedding: &[F],
    ) -> Result<GradientSet<F>> {
        let mut grads = GradientSet::zeros_like(self);
        self.backbone_backward(cache, d_embedding, &mut grads)?;
        Ok(grads)
    }

    /// Shared backbone reverse pass; accumulates into `grads`.
    pub fn backbone_backward_into(
        &self,
        cache: &ForwardCache<F>,
        d_embedding: &[F],
        grads: &mut GradientSet<F>,
    ) -> Result<()> {
        self.backbone_backward(cache, d_embedding, grads)
    }

    fn backbone_backward(
        &self,
        cache: &ForwardCache<F>,
        d_embedding: &[F],
        grads: &mut GradientSet<F>,
    ) -> Result<()> {
        if d_embedding.len() != self.spec.embedding_dim {
            return Err(Error::Dimension(format!(
                "expected {} embedding gradients, got {}",
                self.spec.embedding_dim,
                d_embedding.len()
            )));
        }
        if cache.input.len() != self.spec.input_dim
            || cache.layer_inputs.len() != self.backbone.len()
        {
            return Err(Error::Dimension("stale or mismatched cache".into()));
        }
        // Through y = x / ||x||: dx = (dy - (dy . y) y) / ||x||.
        let mut d = if self.spec.normalize_embedding {
            let norm = cache.emb_raw.iter().map(|v| *v * *v).sum::<F>().sqrt();
            let radial: F = d_embedding
                .iter()
                .zip(&cache.emb)
                .map(|(g, y)| *g * *y)
                .sum();
            d_embedding
                .iter()
                .zip(&cache.emb)
                .map(|(g, y)| (*g - radial * *y) / norm)
                .collect::<Vec<F>>()
        } else {
            d_embedding.to_vec()
        };
        let slope = F::from_f64(self.spec.leaky_slope);
        for k in (0..self.backbone.len()).rev() {
            let layer = &self.backbone[k];
            let is_hidden = k < self.backbone.len() - 1;
            let dz: Vec<F> = if is_hidden {
                d.iter()
                    .zip(&cache.hidden_pre[k])
                    .map(|(g, z)| {
                        if *z >= F::zero() {
                            *g
                        } else {
                            *g * slope
                        }
                    })
                    .collect()
            } else {
                d
            };
            d = layer.backward(&cache.layer_inputs[k], &dz, &mut grads.backbone[k]);
        }
        Ok(())
    }

    /// Plain SGD: theta <- theta - lr * grad.
    pub fn sgd_step(&mut self, grads: &GradientSet<F>, lr: F) -> Result<()> {
        if !grads.is_finite() {
            return Err(Error::NonFinite("gradients in sgd_step".into()));
        }
        for (layer, grad) in self
            .backbone
            .iter_mut()
            .chain(std::iter::once(&mut self.head))
            .zip(grads.backbone.iter().chain(std::iter::once(&grads.head)))
        {
            for (w, g) in layer.weights.iter_mut().zip(&grad.weights) {
                *w -= lr * *g;
            }
            for (b, g) in layer.biases.iter_mut().zip(&grad.biases) {
                *b -= lr * *g;
            }
        }
        Ok(())
    }

    /// All parameters in a fixed order: backbone layers then head, weights
    /// row-major then biases per layer. Used by checkpoints and tests.
    pub fn flatten(&self) -> Vec<F> {
        let mut out = Vec::new();
        for layer in self.backbone.iter().chain(std::iter::once(&self.head)) {
            out.extend_from_slice(&layer.weights);
            out.extend_from_slice(&layer.biases);
        }
        out
    }

    pub fn set_from_flat(&mut self, flat: &[F]) -> Result<()> {
        let expected: usize = self
            .backbone
            .iter()
            .chain(std::iter::once(&self.head))
            .map(|l| l.weights.len() + l.biases.len())
            .sum();
        if flat.len() != expected {
            return Err(Error::Dimension(format!(
                "expected {expected} parameters, got {}",
                flat.len()
            )));
        }
        let mut idx = 0;
        for layer in self
            .backbone
            .iter_mut()
            .chain(std::iter::once(&mut self.head))
        {
            let nw = layer.weights.len();
            layer.weights.copy_from_slice(&flat[idx..idx + nw]);
            idx += nw;
            let nb = layer.biases.len();
            layer.biases.copy_from_slice(&flat[idx..idx + nb]);
            idx += nb;
        }
        Ok(())
    }
}

impl<F: Real> GradientSet<F> {
    /// Same ordering as `MlpModel::flatten`.
    pub fn flatten(&self) -> Vec<F> {
        let mut out = Vec::new();
        for layer in self.backbone.iter().chain(std::iter::once(&self.head)) {
            out.extend_from_slice(&layer.weights);
            out.extend_from_slice(&layer.biases);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use rand::Rng;

    fn small_spec(normalize: bool) -> MlpSpec {
        MlpSpec {
            input_dim: 4,
            hidden_dims: vec![5],
            embedding_dim: 3,
            output_dim: 2,
            leaky_slope: 0.01,
            normalize_embedding: normalize,
        }
    }

    #[test]
    fn init_deterministic_bounded_zero_bias() {
        let spec = small_spec(true);
        let a = MlpModel::<f64>::init(&spec, 42).unwrap();
        let b = MlpModel::<f64>::init(&spec, 42).unwrap();
        assert_eq!(a, b);
        let c = MlpModel::<f64>::init(&spec, 43).unwrap();
        assert_ne!(a, c);
        for layer in a.backbone.iter().chain(std::iter::once(&a.head)) {
            let bound = (6.0 / layer.in_dim as f64).sqrt();
            assert!(layer.weights.iter().all(|w| w.abs() <= bound));
            assert!(layer.biases.iter().all(|b| *b == 0.0));
        }
    }

    #[test]
    fn zero_model_zero_embedding_when_unnormalized() {
        let spec = small_spec(false);
        let mut m = MlpModel::<f64>::init(&spec, 1).unwrap();
        let flat = vec![0.0; m.flatten().len()];
        m.set_from_flat(&flat).unwrap();
        let cache = m.forward_backbone_vec(&[1.0, -2.0, 0.5, 3.0]).unwrap();
        assert!(cache.embedding().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn zero_model_errors_when_normalized() {
        let spec = small_spec(true);
        let mut m = MlpModel::<f64>::init(&spec, 1).unwrap();
        let flat = vec![0.0; m.flatten().len()];
        m.set_from_flat(&flat).unwrap();
        assert!(matches!(
            m.forward_backbone_vec(&[1.0, 1.0, 1.0, 1.0]),
            Err(Error::ZeroNormEmbedding)
        ));
    }

    #[test]
    fn normalization_matches_hand_value() {
        // A 1-layer backbone mapping 2 inputs straight to a 2-D embedding.
        let spec = MlpSpec {
            input_dim: 2,
            hidden_dims: vec![],
            embedding_dim: 2,
            output_dim: 1,
            leaky_slope: 0.01,
            normalize_embedding: true,
        };
        let mut m = MlpModel::<f64>::init(&spec, 1).unwrap();
        // Identity weights so the raw embedding equals the input [3, 4].
        let mut flat = vec![0.0; m.flatten().len()];
        flat[0] = 1.0; // w00
        flat[3] = 1.0; // w11
        m.set_from_flat(&flat).unwrap();
        let cache = m.forward_backbone_vec(&[3.0, 4.0]).unwrap();
        assert!((cache.embedding()[0] - 0.6).abs() < 1e-15);
        assert!((cache.embedding()[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn leaky_relu_negative_slope() {
        let spec = MlpSpec {
            input_dim: 1,
            hidden_dims: vec![1],
            embedding_dim: 1,
            output_dim: 1,
            leaky_slope: 0.01,
            normalize_embedding: false,
        };
        let mut m = MlpModel::<f64>::init(&spec, 1).unwrap();
        // hidden: w=1 b=0; embedding layer: w=1 b=0; head untouched.
        let mut flat = vec![0.0; m.flatten().len()];
        flat[0] = 1.0;
        flat[2] = 1.0;
        m.set_from_flat(&flat).unwrap();
        let cache = m.forward_backbone_vec(&[-1.0]).unwrap();
        assert!((cache.embedding()[0] + 0.01).abs() < 1e-15);
    }

    #[test]
    fn head_zero_params_gives_half() {
        let spec = small_spec(false);
        let mut m = MlpModel::<f64>::init(&spec, 2).unwrap();
        let n_params = m.flatten().len();
        let mut flat = m.flatten();
        let head_params = m.head.weights.len() + m.head.biases.len();
        for p in flat[n_params - head_params..].iter_mut() {
            *p = 0.0;
        }
        m.set_from_flat(&flat).unwrap();
        let (out, _) = m
            .forward(&ChannelMatrix::from_gains(2, vec![1.0, 2.0, 3.0, 4.0]).unwrap())
            .unwrap();
        assert!(out.gamma().iter().all(|g| (*g - 0.5).abs() < 1e-15));
    }

    #[test]
    fn forward_composition_consistency() {
        let spec = small_spec(true);
        let m = MlpModel::<f64>::init(&spec, 9).unwrap();
        let h = ChannelMatrix::from_gains(2, vec![0.5, 1.5, 2.5, 0.1]).unwrap();
        let (out, _) = m.forward(&h).unwrap();
        let mut cache = m.forward_backbone(&h).unwrap();
        let out2 = m.forward_head(&mut cache).unwrap();
        assert_eq!(out, out2);
        assert!(out.gamma().iter().all(|g| *g > 0.0 && *g < 1.0));
    }

    #[test]
    fn embedding_unit_norm() {
        let spec = small_spec(true);
        let m = MlpModel::<f64>::init(&spec, 5).unwrap();
        let mut rng = substream(50, 0, 0);
        for _ in 0..20 {
            let input: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let cache = m.forward_backbone_vec(&input).unwrap();
            let norm: f64 = cache.embedding().iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn normalized_gradient_annihilates_radial_direction() {
        // The Jacobian of x/||x|| kills the radial direction: feeding the
        // embedding itself back as the upstream gradient must produce zero
        // parameter gradients everywhere.
        let spec = small_spec(true);
        let m = MlpModel::<f64>::init(&spec, 13).unwrap();
        let cache = m.forward_backbone_vec(&[0.3, -0.7, 1.2, 0.4]).unwrap();
        let emb = cache.embedding().to_vec();
        let grads = m.backward_from_embedding(&cache, &emb).unwrap();
        assert!(grads.flatten().iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn sgd_step_examples() {
        let spec = small_spec(false);
        let mut m = MlpModel::<f64>::init(&spec, 3).unwrap();
        let before = m.clone();
        let zero = GradientSet::zeros_like(&m);
        m.sgd_step(&zero, 0.1).unwrap();
        assert_eq!(m, before);

        let mut g = GradientSet::zeros_like(&m);
        g.backbone[0].weights[0] = 2.0;
        let w0 = m.backbone[0].weights[0];
        m.sgd_step(&g, 0.1).unwrap();
        assert!((m.backbone[0].weights[0] - (w0 - 0.2)).abs() < 1e-15);

        // lr = 0 leaves the model unchanged.
        let snapshot = m.clone();
        m.sgd_step(&g, 0.0).unwrap();
        assert_eq!(m, snapshot);

        let mut bad = GradientSet::zeros_like(&m);
        bad.head.biases[0] = f64::NAN;
        assert!(m.sgd_step(&bad, 0.1).is_err());
    }

    #[test]
    fn zero_output_gradient_gives_zero_grads() {
        let spec = small_spec(true);
        let m = MlpModel::<f64>::init(&spec, 4).unwrap();
        let h = ChannelMatrix::from_gains(2, vec![1.0, 0.2, 0.3, 2.0]).unwrap();
        let (_, cache) = m.forward(&h).unwrap();
        let g = m.backward(&cache, &[0.0, 0.0]).unwrap();
        assert!(g.flatten().iter().all(|v| *v == 0.0));
    }

    /// Central finite differences on a scalar loss of the network output.
    fn fd_check(spec: &MlpSpec, seed: u64) {
        let model = MlpModel::<f64>::init(spec, seed).unwrap();
        let mut rng = substream(seed, 99, 0);
        let input: Vec<f64> = (0..spec.input_dim)
            .map(|_| rng.gen_range(0.01..2.0))
            .collect();
        let target: Vec<f64> = (0..spec.output_dim)
            .map(|_| rng.gen_range(0.0..1.0))
            .collect();
        // loss = sum_k (y_k - t_k)^2
        let loss_of = |m: &MlpModel<f64>| -> f64 {
            let mut cache = m.forward_backbone_vec(&input).unwrap();
            let y = m.forward_head(&mut cache).unwrap();
            y.gamma()
                .iter()
                .zip(&target)
                .map(|(y, t)| (y - t) * (y - t))
                .sum()
        };
        let mut cache = model.forward_backbone_vec(&input).unwrap();
        let y = model.forward_head(&mut cache).unwrap();
        let d_out: Vec<f64> = y
            .gamma()
            .iter()
            .zip(&target)
            .map(|(y, t)| 2.0 * (y - t))
            .collect();
        let analytic = model.backward(&cache, &d_out).unwrap().flatten();
        let flat = model.flatten();
        let step = 1e-5;
        for k in 0..flat.len() {
            let mut m_plus = model.clone();
            let mut m_minus = model.clone();
            let mut fp = flat.clone();
            fp[k] += step;
            m_plus.set_from_flat(&fp).unwrap();
            fp[k] = flat[k] - step;
            m_minus.set_from_flat(&fp).unwrap();
            let numeric = (loss_of(&m_plus) - loss_of(&m_minus)) / (2.0 * step);
            let denom = numeric.abs().max(analytic[k].abs()).max(1e-6);
            assert!(
                (numeric - analytic[k]).abs() / denom < 1e-4,
                "param {k}: analytic {} vs numeric {numeric}",
                analytic[k]
            );
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        fd_check(&small_spec(false), 101);
        fd_check(&small_spec(true), 102);
        let deeper = MlpSpec {
            input_dim: 9,
            hidden_dims: vec![6, 4],
            embedding_dim: 2,
            output_dim: 3,
            leaky_slope: 0.01,
            normalize_embedding: true,
        };
        fd_check(&deeper, 103);
    }
}

use rayon::prelude::*;

use super::dropout::{dropout, Mode};
use super::layers::{
    conv2d_backward, conv2d_forward, dense_backward, dense_forward, relu_backward, relu_forward, sigmoid,
};
use super::{LayerShape, ModelSpec, Scalar, Tensor};
use crate::dataset::PhaseMap;
use crate::estimator::PosteriorVector;
use crate::rng::{derive_seed, CounterRng};
use crate::{Error, Result};

/// Rows per inference slice; bounds activation memory for large batches.
const INFER_CHUNK: usize = 256;

/// A CNN built from a [`ModelSpec`] and its parameters. Immutable once
/// trained, so it can be shared across threads for inference.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T: Scalar = f32> {
    spec: ModelSpec,
    params: Vec<Tensor<T>>,
}

struct Cache<T> {
    conv_in: Vec<Tensor<T>>,
    conv_pre: Vec<Tensor<T>>,
    dense_in: Vec<Tensor<T>>,
    dense_pre: Vec<Tensor<T>>,
    /// Dropout masks: after the convolution stack, then after each hidden dense layer.
    masks: Vec<Option<Vec<T>>>,
    probs: Vec<T>,
}

impl<T: Scalar> Network<T> {
    /// He-uniform weights for ReLU layers, Glorot-uniform for the sigmoid
    /// output layer, zero biases.
    pub fn new(spec: ModelSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let layers = spec.layers();
        let last = layers.len() - 1;
        let mut params = Vec::with_capacity(2 * layers.len());
        for (i, layer) in layers.iter().enumerate() {
            let (shape, fan_in, fan_out) = match *layer {
                LayerShape::Conv { filters, channels, .. } => {
                    (vec![filters, channels, 2, 1], 2 * channels, 2 * filters)
                }
                LayerShape::Dense { inputs, outputs } => (vec![outputs, inputs], inputs, outputs),
            };
            let limit = if i == last { (6.0 / (fan_in + fan_out) as f64).sqrt() } else { (6.0 / fan_in as f64).sqrt() };
            let mut rng = CounterRng::new(derive_seed(seed, &[i as u64]));
            let n: usize = shape.iter().product();
            let w = (0..n).map(|_| T::from_f64(rng.uniform_range(-limit, limit))).collect();
            params.push(Tensor::from_vec(&shape, w)?);
            params.push(Tensor::zeros(&[shape[0]]));
        }
        Ok(Self { spec, params })
    }

    pub fn from_params(spec: ModelSpec, params: Vec<Tensor<T>>) -> Result<Self> {
        spec.validate()?;
        let shapes = spec.param_shapes();
        if shapes.len() != params.len() || shapes.iter().zip(&params).any(|(s, p)| s.as_slice() != p.shape()) {
            return Err(Error::shape("parameters do not match the model spec"));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("non-finite parameter"));
        }
        Ok(Self { spec, params })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &[Tensor<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    pub fn cast<U: Scalar>(&self) -> Network<U> {
        Network { spec: self.spec.clone(), params: self.params.iter().map(Tensor::cast).collect() }
    }

    fn check_input(&self, inputs: &[T], batch: usize) -> Result<()> {
        let want = batch * self.spec.input_len();
        if inputs.len() != want || batch == 0 {
            return Err(Error::shape(format!(
                "{} input values for {batch} phase maps of {}x{}",
                inputs.len(),
                self.spec.mics,
                self.spec.bins
            )));
        }
        Ok(())
    }

    fn run(&self, inputs: &[T], batch: usize, mode: Mode, seed: u64) -> Result<Cache<T>> {
        let spec = &self.spec;
        let convs = spec.conv_layers();
        let hidden = spec.dense.len();
        let rate = spec.dropout;
        let mut cache = Cache {
            conv_in: Vec::with_capacity(convs),
            conv_pre: Vec::with_capacity(convs),
            dense_in: Vec::with_capacity(hidden + 1),
            dense_pre: Vec::with_capacity(hidden),
            masks: Vec::with_capacity(hidden + 1),
            probs: Vec::new(),
        };
        let mut x = Tensor::from_vec(&[batch, 1, spec.mics, spec.bins], inputs.to_vec())?;
        for l in 0..convs {
            let z = conv2d_forward(&x, &self.params[2 * l], &self.params[2 * l + 1])?;
            let a = relu_forward(&z);
            cache.conv_in.push(std::mem::replace(&mut x, a));
            cache.conv_pre.push(z);
        }
        let mut h = x.reshaped(&[batch, spec.flat_features()])?;
        cache.masks.push(dropout(h.data_mut(), rate, mode, derive_seed(seed, &[0])));
        for j in 0..hidden {
            let p = 2 * (convs + j);
            let z = dense_forward(&h, &self.params[p], &self.params[p + 1])?;
            let a = relu_forward(&z);
            cache.dense_in.push(std::mem::replace(&mut h, a));
            cache.dense_pre.push(z);
            cache.masks.push(dropout(h.data_mut(), rate, mode, derive_seed(seed, &[j as u64 + 1])));
        }
        let p = 2 * (convs + hidden);
        let logits = dense_forward(&h, &self.params[p], &self.params[p + 1])?;
        cache.dense_in.push(h);
        cache.probs = logits.into_data().into_iter().map(sigmoid).collect();
        Ok(cache)
    }

    /// Eval-mode sigmoid outputs, `batch × classes` row-major.
    pub fn forward(&self, inputs: &[T], batch: usize) -> Result<Vec<T>> {
        self.check_input(inputs, batch)?;
        let n = self.spec.input_len();
        let mut out = Vec::with_capacity(batch * self.spec.classes);
        for chunk in inputs.chunks(INFER_CHUNK * n) {
            out.extend(self.run(chunk, chunk.len() / n, Mode::Eval, 0)?.probs);
        }
        Ok(out)
    }

    /// Summed per-sample BCE loss over the batch and its gradient with respect
    /// to every parameter. `dropout_seed = None` runs in eval mode.
    pub fn loss_and_grad(
        &self,
        inputs: &[T],
        targets: &[T],
        batch: usize,
        dropout_seed: Option<u64>,
    ) -> Result<(f64, Vec<Tensor<T>>)> {
        self.check_input(inputs, batch)?;
        let classes = self.spec.classes;
        if targets.len() != batch * classes {
            return Err(Error::shape(format!("{} targets for {batch}x{classes}", targets.len())));
        }
        let (mode, seed) = match dropout_seed {
            Some(s) => (Mode::Train, s),
            None => (Mode::Eval, 0),
        };
        let cache = self.run(inputs, batch, mode, seed)?;
        let mut loss = 0.0;
        let mut g = Vec::with_capacity(batch * classes);
        for (p, t) in cache.probs.chunks_exact(classes).zip(targets.chunks_exact(classes)) {
            let (l, grad) = super::bce_loss(p, t);
            loss += l.as_f64();
            g.extend(grad);
        }
        let grads = self.backward(cache, Tensor::from_vec(&[batch, classes], g)?)?;
        Ok((loss, grads))
    }

    fn backward(&self, mut cache: Cache<T>, grad_logits: Tensor<T>) -> Result<Vec<Tensor<T>>> {
        let convs = self.spec.conv_layers();
        let hidden = self.spec.dense.len();
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; self.params.len()];

        let p = 2 * (convs + hidden);
        let input = cache.dense_in.pop().expect("output layer input");
        let (mut dx, dw, db) = dense_backward(&input, &self.params[p], &grad_logits)?;
        grads[p] = Some(dw);
        grads[p + 1] = Some(db);

        for j in (0..hidden).rev() {
            if let Some(mask) = &cache.masks[j + 1] {
                dx.data_mut().iter_mut().zip(mask).for_each(|(g, &m)| *g = *g * m);
            }
            let g = relu_backward(&cache.dense_pre[j], &dx)?;
            let p = 2 * (convs + j);
            let (d, dw, db) = dense_backward(&cache.dense_in[j], &self.params[p], &g)?;
            grads[p] = Some(dw);
            grads[p + 1] = Some(db);
            dx = d;
        }

        if let Some(mask) = &cache.masks[0] {
            dx.data_mut().iter_mut().zip(mask).for_each(|(g, &m)| *g = *g * m);
        }
        let mut dx = dx.reshaped(cache.conv_pre[convs - 1].shape())?;
        for l in (0..convs).rev() {
            let g = relu_backward(&cache.conv_pre[l], &dx)?;
            let (d, dw, db) = conv2d_backward(&cache.conv_in[l], &self.params[2 * l], &g)?;
            grads[2 * l] = Some(dw);
            grads[2 * l + 1] = Some(db);
            dx = d;
        }
        Ok(grads.into_iter().map(|g| g.expect("every layer visited")).collect())
    }

    /// [`Self::loss_and_grad`] split into fixed-size slices processed in
    /// parallel. Slices are reduced in order, so results do not depend on the
    /// thread count.
    pub fn batch_gradient(
        &self,
        inputs: &[T],
        targets: &[T],
        batch: usize,
        dropout_seed: Option<u64>,
        slice: usize,
    ) -> Result<(f64, Vec<Tensor<T>>)> {
        self.check_input(inputs, batch)?;
        let n = self.spec.input_len();
        let c = self.spec.classes;
        let slice = slice.max(1);
        let parts = inputs
            .par_chunks(slice * n)
            .zip(targets.par_chunks(slice * c))
            .enumerate()
            .map(|(i, (x, t))| {
                let seed = dropout_seed.map(|s| derive_seed(s, &[i as u64]));
                self.loss_and_grad(x, t, x.len() / n, seed)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut iter = parts.into_iter();
        let (mut loss, mut grads) = iter.next().ok_or(Error::EmptyBlock)?;
        for (l, g) in iter {
            loss += l;
            grads.iter_mut().zip(&g).for_each(|(a, b)| a.add_assign(b));
        }
        Ok((loss, grads))
    }

    fn check_map(&self, map: &PhaseMap) -> Result<()> {
        if map.mics() != self.spec.mics || map.bins() != self.spec.bins {
            return Err(Error::shape(format!(
                "phase map {}x{} for a model expecting {}x{}",
                map.mics(),
                map.bins(),
                self.spec.mics,
                self.spec.bins
            )));
        }
        Ok(())
    }

    /// Per-class posteriors for one frame's phase map.
    pub fn predict(&self, map: &PhaseMap) -> Result<PosteriorVector> {
        Ok(self.predict_batch(std::slice::from_ref(map))?.remove(0))
    }

    pub fn predict_batch(&self, maps: &[PhaseMap]) -> Result<Vec<PosteriorVector>> {
        if maps.is_empty() {
            return Ok(Vec::new());
        }
        let mut inputs = Vec::with_capacity(maps.len() * self.spec.input_len());
        for m in maps {
            self.check_map(m)?;
            inputs.extend(m.values().iter().map(|&v| T::from_f64(v as f64)));
        }
        let probs = self.forward(&inputs, maps.len())?;
        probs
            .chunks_exact(self.spec.classes)
            .map(|row| PosteriorVector::new(row.iter().map(|v| v.as_f64()).collect()))
            .collect()
    }
}

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::Uniform;

use super::NnError;

/// One affine layer; `weight` is `out x in`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Layer {
    pub fn input_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.nrows()
    }
}

/// Affine layers with ReLU between them; the output layer is linear.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedForwardNet {
    layers: Vec<Layer>,
}

/// Intermediate values of a batched forward pass, kept for backprop.
#[derive(Debug, Clone)]
pub struct Trace {
    /// Input to each layer (`batch x in`).
    inputs: Vec<Array2<f64>>,
    /// Pre-activation of each layer (`batch x out`); the last is the output.
    preacts: Vec<Array2<f64>>,
}

impl Trace {
    pub fn output(&self) -> &Array2<f64> {
        self.preacts.last().expect("net has at least one layer")
    }
}

/// Parameter gradients, same layout as the net.
#[derive(Debug, Clone, PartialEq)]
pub struct NetGrads {
    pub layers: Vec<(Array2<f64>, Array1<f64>)>,
}

impl NetGrads {
    pub fn zeros_like(net: &FeedForwardNet) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| (Array2::zeros(l.weight.raw_dim()), Array1::zeros(l.bias.len())))
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &NetGrads) {
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            *w += ow;
            *b += ob;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for (w, b) in &mut self.layers {
            *w *= s;
            *b *= s;
        }
    }

    /// Flat view in checkpoint order (per layer: W row-major, then b).
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in &self.layers {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }

    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(2 * self.layers.len());
        for (w, b) in &self.layers {
            out.push(w.as_slice().expect("standard layout"));
            out.push(b.as_slice().expect("standard layout"));
        }
        out
    }
}

fn check_dims(dims: &[usize]) -> Result<(), NnError> {
    if dims.len() < 2 || dims.contains(&0) {
        return Err(NnError::BadArchitecture(dims.to_vec()));
    }
    Ok(())
}

impl FeedForwardNet {
    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn new(dims: &[usize], rng: &mut impl Rng) -> Result<Self, NnError> {
        check_dims(dims)?;
        let layers = dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let dist = Uniform::new_inclusive(-limit, limit);
                let weight = Array2::from_shape_simple_fn((fan_out, fan_in), || rng.sample(dist));
                Layer { weight, bias: Array1::zeros(fan_out) }
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn zeros(dims: &[usize]) -> Result<Self, NnError> {
        check_dims(dims)?;
        Ok(Self {
            layers: dims
                .windows(2)
                .map(|w| Layer { weight: Array2::zeros((w[1], w[0])), bias: Array1::zeros(w[1]) })
                .collect(),
        })
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self, NnError> {
        if layers.is_empty() {
            return Err(NnError::BadArchitecture(vec![]));
        }
        for w in layers.windows(2) {
            if w[0].output_dim() != w[1].input_dim() {
                return Err(NnError::BadArchitecture(vec![w[0].output_dim(), w[1].input_dim()]));
            }
        }
        for l in &layers {
            if l.bias.len() != l.output_dim() {
                return Err(NnError::BadArchitecture(vec![l.output_dim(), l.bias.len()]));
            }
        }
        Ok(Self { layers })
    }

    /// Rebuild from layer dims and a flat parameter vector.
    pub fn from_flat(dims: &[usize], flat: &[f64]) -> Result<Self, NnError> {
        let mut net = Self::zeros(dims)?;
        net.set_flat_params(flat)?;
        Ok(net)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.layers[0].input_dim()];
        d.extend(self.layers.iter().map(Layer::output_dim));
        d
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").output_dim()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend(l.weight.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<(), NnError> {
        if flat.len() != self.param_count() {
            return Err(NnError::Dimension { expected: self.param_count(), got: flat.len() });
        }
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(NnError::NonFinite);
        }
        let mut rest = flat;
        for l in &mut self.layers {
            let (w, tail) = rest.split_at(l.weight.len());
            l.weight.as_slice_mut().expect("standard layout").copy_from_slice(w);
            let (b, tail) = tail.split_at(l.bias.len());
            l.bias.as_slice_mut().expect("standard layout").copy_from_slice(b);
            rest = tail;
        }
        Ok(())
    }

    /// Mutable parameter slices in flat order, for the optimizer.
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(2 * self.layers.len());
        for l in &mut self.layers {
            out.push(l.weight.as_slice_mut().expect("standard layout"));
            out.push(l.bias.as_slice_mut().expect("standard layout"));
        }
        out
    }

    /// Single-sample forward pass.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        if x.len() != self.input_dim() {
            return Err(NnError::Dimension { expected: self.input_dim(), got: x.len() });
        }
        let batch = ArrayView2::from_shape((1, x.len()), x).expect("row vector");
        Ok(self.forward_batch(batch)?.into_raw_vec_and_offset().0)
    }

    /// Forward pass over rows of `x`.
    pub fn forward_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>, NnError> {
        if x.ncols() != self.input_dim() {
            return Err(NnError::Dimension { expected: self.input_dim(), got: x.ncols() });
        }
        let mut a = x.to_owned();
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = a.dot(&l.weight.t());
            z += &l.bias;
            if i < last {
                z.mapv_inplace(relu);
            }
            a = z;
        }
        Ok(a)
    }

    /// Forward pass keeping what backprop needs.
    pub fn forward_trace(&self, x: ArrayView2<'_, f64>) -> Result<Trace, NnError> {
        if x.ncols() != self.input_dim() {
            return Err(NnError::Dimension { expected: self.input_dim(), got: x.ncols() });
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut preacts = Vec::with_capacity(self.layers.len());
        let mut a = x.to_owned();
        for l in &self.layers {
            let mut z = a.dot(&l.weight.t());
            z += &l.bias;
            inputs.push(a);
            a = z.mapv(relu);
            preacts.push(z);
        }
        Ok(Trace { inputs, preacts })
    }

    /// Backprop `grad_out` (d loss / d output, `batch x out`) through a trace.
    /// Returns parameter gradients and d loss / d input.
    pub fn backward(&self, trace: &Trace, grad_out: ArrayView2<'_, f64>) -> (NetGrads, Array2<f64>) {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = grad_out.to_owned();
        let mut grad_in = None;
        for (i, l) in self.layers.iter().enumerate().rev() {
            let dw = delta.t().dot(&trace.inputs[i]);
            let db = delta.sum_axis(Axis(0));
            grads.push((dw, db));
            let mut da = delta.dot(&l.weight);
            if i > 0 {
                ndarray::Zip::from(&mut da)
                    .and(&trace.preacts[i - 1])
                    .for_each(|g, &z| {
                        if z <= 0.0 {
                            *g = 0.0;
                        }
                    });
                delta = da;
            } else {
                grad_in = Some(da);
            }
        }
        grads.reverse();
        (NetGrads { layers: grads }, grad_in.expect("at least one layer"))
    }
}

fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

//! Fully connected value network with manual backpropagation.
//!
//! Parameters live in one flat vector, layer by layer: the weight matrix
//! stored input-major (`[in][out]`, row-major) followed by the bias vector.
//! The first layer consumes sparse [`Features`], so its cost scales with the
//! number of set fingerprint bits instead of the input width.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView2, ArrayViewMut2, Axis};
use rand::Rng;

use super::{huber, huber_grad, Features, QError};

#[derive(Debug, Clone, PartialEq)]
pub struct ValueNetwork {
    dims: Vec<usize>,
    params: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Slots {
    w: usize,
    b: usize,
    end: usize,
    inp: usize,
    out: usize,
}

fn slots(dims: &[usize]) -> Vec<Slots> {
    let mut at = 0;
    dims.windows(2)
        .map(|w| {
            let (inp, out) = (w[0], w[1]);
            let s = Slots {
                w: at,
                b: at + inp * out,
                end: at + inp * out + out,
                inp,
                out,
            };
            at = s.end;
            s
        })
        .collect()
}

pub fn param_count(dims: &[usize]) -> usize {
    slots(dims).last().map_or(0, |s| s.end)
}

impl ValueNetwork {
    /// All-zero parameters. `dims` is `[input, hidden..., heads]`.
    pub fn zeros(dims: &[usize]) -> Self {
        assert!(dims.len() >= 2 && dims.iter().all(|&d| d > 0), "bad layer dims {dims:?}");
        ValueNetwork {
            dims: dims.to_vec(),
            params: vec![0.0; param_count(dims)],
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn new(dims: &[usize], rng: &mut impl Rng) -> Self {
        let mut net = ValueNetwork::zeros(dims);
        for s in slots(dims) {
            let limit = (6.0 / (s.inp + s.out) as f64).sqrt();
            for p in &mut net.params[s.w..s.b] {
                *p = rng.gen_range(-limit..limit);
            }
        }
        net
    }

    pub fn from_params(dims: &[usize], params: Vec<f64>) -> Result<Self, QError> {
        let expected = param_count(dims);
        if params.len() != expected {
            return Err(QError::DimensionMismatch {
                expected,
                got: params.len(),
            });
        }
        let mut net = ValueNetwork::zeros(dims);
        net.params = params;
        Ok(net)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn heads(&self) -> usize {
        *self.dims.last().expect("at least two layers")
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn copy_from(&mut self, other: &ValueNetwork) -> Result<(), QError> {
        if self.dims != other.dims {
            return Err(QError::ArchitectureMismatch {
                expected: self.dims.clone(),
                found: other.dims.clone(),
            });
        }
        self.params.copy_from_slice(&other.params);
        Ok(())
    }

    /// Weight of the edge `input -> output` in `layer`.
    pub fn weight(&self, layer: usize, input: usize, output: usize) -> f64 {
        let s = slots(&self.dims)[layer];
        self.params[s.w + input * s.out + output]
    }

    pub fn set_weight(&mut self, layer: usize, input: usize, output: usize, value: f64) {
        let s = slots(&self.dims)[layer];
        self.params[s.w + input * s.out + output] = value;
    }

    pub fn set_bias(&mut self, layer: usize, output: usize, value: f64) {
        let s = slots(&self.dims)[layer];
        self.params[s.b + output] = value;
    }

    /// Parameter range of one head's output weights and bias, as
    /// (indices of the weight column, bias index).
    pub fn head_params(&self, head: usize) -> (Vec<usize>, usize) {
        let s = *slots(&self.dims).last().expect("at least one layer");
        ((0..s.inp).map(|i| s.w + i * s.out + head).collect(), s.b + head)
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, QError> {
        if x.len() != self.input_dim() {
            return Err(QError::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let out = self.forward_batch(&[&Features::from_dense(x)])?;
        Ok(out.row(0).to_vec())
    }

    /// Head values for each input row (rows x heads).
    pub fn forward_batch(&self, rows: &[&Features]) -> Result<Array2<f64>, QError> {
        self.check_inputs(rows)?;
        Ok(self.activations(rows).pop().expect("at least one layer"))
    }

    fn check_inputs(&self, rows: &[&Features]) -> Result<(), QError> {
        for f in rows {
            if let Some(i) = f.max_index() {
                if i as usize >= self.input_dim() {
                    return Err(QError::DimensionMismatch {
                        expected: self.input_dim(),
                        got: i as usize + 1,
                    });
                }
            }
        }
        Ok(())
    }

    fn w(&self, s: Slots) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((s.inp, s.out), &self.params[s.w..s.b]).expect("slot shape")
    }

    /// Post-activation outputs of every layer; the last entry is the output.
    fn activations(&self, rows: &[&Features]) -> Vec<Array2<f64>> {
        let layers = slots(&self.dims);
        let last = layers.len() - 1;
        let mut acts: Vec<Array2<f64>> = Vec::with_capacity(layers.len());

        let s0 = layers[0];
        let w0 = &self.params[s0.w..s0.b];
        let b0 = &self.params[s0.b..s0.end];
        let mut a0 = Array2::<f64>::zeros((rows.len(), s0.out));
        for (mut out, f) in a0.axis_iter_mut(Axis(0)).zip(rows) {
            let out = out.as_slice_mut().expect("contiguous row");
            out.copy_from_slice(b0);
            for &k in f.ones.iter() {
                let k = k as usize;
                for (o, w) in out.iter_mut().zip(&w0[k * s0.out..(k + 1) * s0.out]) {
                    *o += w;
                }
            }
            for &(k, v) in &f.extra {
                let k = k as usize;
                for (o, w) in out.iter_mut().zip(&w0[k * s0.out..(k + 1) * s0.out]) {
                    *o += v * w;
                }
            }
        }
        if last > 0 {
            a0.mapv_inplace(relu);
        }
        acts.push(a0);

        for (l, &s) in layers.iter().enumerate().skip(1) {
            let input = &acts[l - 1];
            let mut z = Array2::<f64>::zeros((rows.len(), s.out));
            for mut row in z.axis_iter_mut(Axis(0)) {
                row.as_slice_mut()
                    .expect("contiguous row")
                    .copy_from_slice(&self.params[s.b..s.end]);
            }
            general_mat_mul(1.0, input, &self.w(s), 1.0, &mut z);
            if l < last {
                z.mapv_inplace(relu);
            }
            acts.push(z);
        }
        acts
    }

    /// Masked mean Huber loss between head outputs and `targets`, and its
    /// gradient with respect to every parameter (written into `grad`).
    ///
    /// `weights[j][i]` is 1 when head `i` trains on row `j`; the loss is
    /// `sum(weights * huber(targets - V)) / denom`.
    pub fn loss_and_grad(
        &self,
        rows: &[&Features],
        targets: ArrayView2<f64>,
        weights: ArrayView2<f64>,
        denom: f64,
        grad: &mut [f64],
    ) -> Result<f64, QError> {
        self.check_inputs(rows)?;
        let shape = (rows.len(), self.heads());
        if targets.dim() != shape || weights.dim() != shape {
            return Err(QError::DimensionMismatch {
                expected: shape.0 * shape.1,
                got: targets.len().min(weights.len()),
            });
        }
        assert_eq!(grad.len(), self.params.len(), "gradient buffer length");
        grad.iter_mut().for_each(|g| *g = 0.0);
        if rows.is_empty() || denom == 0.0 {
            return Ok(0.0);
        }

        let layers = slots(&self.dims);
        let acts = self.activations(rows);
        let output = acts.last().expect("at least one layer");

        let mut loss = 0.0;
        let mut delta = Array2::<f64>::zeros(shape);
        ndarray::Zip::from(&mut delta)
            .and(output)
            .and(&targets)
            .and(&weights)
            .for_each(|d, &v, &t, &w| {
                if w != 0.0 {
                    loss += w * huber(t - v);
                    *d = -w * huber_grad(t - v) / denom;
                }
            });
        loss /= denom;

        for l in (1..layers.len()).rev() {
            let s = layers[l];
            let input = &acts[l - 1];
            {
                let gw = ArrayViewMut2::from_shape((s.inp, s.out), &mut grad[s.w..s.b]).expect("slot shape");
                let mut gw = gw;
                general_mat_mul(1.0, &input.t(), &delta, 0.0, &mut gw);
            }
            for (g, col) in grad[s.b..s.end].iter_mut().zip(delta.axis_iter(Axis(1))) {
                *g = col.sum();
            }
            let mut prev = delta.dot(&self.w(s).t());
            ndarray::Zip::from(&mut prev).and(input).for_each(|p, &a| {
                if a <= 0.0 {
                    *p = 0.0;
                }
            });
            delta = prev;
        }

        // `dot` may hand back column-major output (e.g. a single head).
        let delta = delta.as_standard_layout();
        let s0 = layers[0];
        let (gw0, gb0) = grad[s0.w..s0.end].split_at_mut(s0.b - s0.w);
        for (d, f) in delta.axis_iter(Axis(0)).zip(rows) {
            let d = d.as_slice().expect("contiguous row");
            for (g, x) in gb0.iter_mut().zip(d) {
                *g += x;
            }
            for &k in f.ones.iter() {
                let k = k as usize;
                for (g, x) in gw0[k * s0.out..(k + 1) * s0.out].iter_mut().zip(d) {
                    *g += x;
                }
            }
            for &(k, v) in &f.extra {
                let k = k as usize;
                for (g, x) in gw0[k * s0.out..(k + 1) * s0.out].iter_mut().zip(d) {
                    *g += v * x;
                }
            }
        }
        Ok(loss)
    }

    /// Loss only; the finite-difference reference for [`Self::loss_and_grad`].
    pub fn loss(&self, rows: &[&Features], targets: ArrayView2<f64>, weights: ArrayView2<f64>, denom: f64) -> f64 {
        let out = self.activations(rows).pop().expect("at least one layer");
        let mut loss = 0.0;
        ndarray::Zip::from(&out)
            .and(&targets)
            .and(&weights)
            .for_each(|&v, &t, &w| loss += w * huber(t - v));
        loss / denom
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }
}

fn relu(x: f64) -> f64 {
    x.max(0.0)
}

use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution, Normal};

use crate::error::{check_len, Error, Result};
use crate::tensor::{gemm, View};
use crate::{rng, Matrix, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply<T: Real>(self, xs: &mut [T]) {
        if self == Activation::Relu {
            for x in xs {
                if !(*x > T::zero()) {
                    *x = T::zero();
                }
            }
        }
    }
}

/// Layer widths and activations of a dense network.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MlpSpec {
    pub widths: Vec<usize>,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
}

impl MlpSpec {
    /// ReLU hidden layers, identity output.
    pub fn relu(widths: &[usize]) -> Result<Self> {
        let spec = Self {
            widths: widths.to_vec(),
            hidden_activation: Activation::Relu,
            output_activation: Activation::Identity,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 2 {
            return Err(Error::InvalidSpec("an MLP needs at least input and output widths"));
        }
        if self.widths.contains(&0) {
            return Err(Error::InvalidSpec("layer widths must be positive"));
        }
        Ok(())
    }

    pub fn num_layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// (fan_in, fan_out) of every layer.
    pub fn layer_shapes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.widths.windows(2).map(|w| (w[0], w[1]))
    }
}

/// Flat parameter buffer: for each layer, an `in × out` row-major weight
/// matrix followed by its bias vector.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams<T> {
    spec: MlpSpec,
    data: Vec<T>,
    offsets: Vec<usize>,
}

fn layer_offsets(spec: &MlpSpec) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(spec.num_layers());
    let mut at = 0;
    for (i, o) in spec.layer_shapes() {
        offsets.push(at);
        at += i * o + o;
    }
    offsets
}

impl<T: Real> MlpParams<T> {
    pub fn zeros(spec: MlpSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.num_params();
        let offsets = layer_offsets(&spec);
        Ok(Self {
            spec,
            data: vec![T::zero(); n],
            offsets,
        })
    }

    /// He-normal weights (std = sqrt(2 / fan_in)) and zero biases.
    pub fn init(spec: MlpSpec, seed: u64) -> Result<Self> {
        let mut params = Self::zeros(spec)?;
        let mut rng = rng::seeded(seed);
        for l in 0..params.spec.num_layers() {
            let fan_in = params.spec.widths[l];
            let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
            for w in params.weight_mut(l) {
                *w = T::of(normal.sample(&mut rng));
            }
        }
        Ok(params)
    }

    pub fn from_flat(spec: MlpSpec, data: Vec<T>) -> Result<Self> {
        spec.validate()?;
        check_len("MlpParams::from_flat", spec.num_params(), data.len())?;
        let offsets = layer_offsets(&spec);
        Ok(Self { spec, data, offsets })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn layer_range(&self, l: usize) -> (usize, usize, usize) {
        let (i, o) = (self.spec.widths[l], self.spec.widths[l + 1]);
        let w = self.offsets[l];
        (w, w + i * o, w + i * o + o)
    }

    pub fn weight(&self, l: usize) -> &[T] {
        let (w, b, _) = self.layer_range(l);
        &self.data[w..b]
    }

    pub fn weight_mut(&mut self, l: usize) -> &mut [T] {
        let (w, b, _) = self.layer_range(l);
        &mut self.data[w..b]
    }

    pub fn bias(&self, l: usize) -> &[T] {
        let (_, b, e) = self.layer_range(l);
        &self.data[b..e]
    }

    pub fn bias_mut(&mut self, l: usize) -> &mut [T] {
        let (_, b, e) = self.layer_range(l);
        &mut self.data[b..e]
    }

    /// Zeroes the weights and bias of the final layer.
    pub fn zero_last_layer(&mut self) {
        let (w, _, e) = self.layer_range(self.spec.num_layers() - 1);
        self.data[w..e].iter_mut().for_each(|x| *x = T::zero());
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn cast<U: Real>(&self) -> MlpParams<U> {
        MlpParams {
            spec: self.spec.clone(),
            data: self.data.iter().map(|&x| U::of(x.as_f64())).collect(),
            offsets: self.offsets.clone(),
        }
    }

    fn affine(&self, l: usize, x: &Matrix<T>) -> Matrix<T> {
        let (i, o) = (self.spec.widths[l], self.spec.widths[l + 1]);
        let mut out = Matrix::zeros(x.rows(), o);
        let bias = self.bias(l);
        for r in 0..x.rows() {
            out.row_mut(r).copy_from_slice(bias);
        }
        gemm(
            T::one(),
            x.view(),
            View::new(self.weight(l), i, o),
            T::one(),
            out.as_mut_slice(),
            o,
        );
        out
    }

    fn activation(&self, l: usize) -> Activation {
        if l + 1 == self.spec.num_layers() {
            self.spec.output_activation
        } else {
            self.spec.hidden_activation
        }
    }

    /// Forward pass without recording a tape.
    pub fn infer(&self, input: &Matrix<T>) -> Result<Matrix<T>> {
        check_len("mlp input width", self.spec.input_width(), input.cols())?;
        let mut x = self.affine(0, input);
        self.activation(0).apply(x.as_mut_slice());
        for l in 1..self.spec.num_layers() {
            x = self.affine(l, &x);
            self.activation(l).apply(x.as_mut_slice());
        }
        Ok(x)
    }

    /// Forward pass that records what the backward pass needs.
    pub fn forward(&self, input: &Matrix<T>) -> Result<(Matrix<T>, MlpTape<'_, T>)> {
        check_len("mlp input width", self.spec.input_width(), input.cols())?;
        let layers = self.spec.num_layers();
        let mut inputs = Vec::with_capacity(layers);
        inputs.push(input.clone());
        let mut out = Matrix::zeros(0, 0);
        for l in 0..layers {
            let mut y = self.affine(l, &inputs[l]);
            self.activation(l).apply(y.as_mut_slice());
            if l + 1 < layers {
                inputs.push(y);
            } else {
                out = y;
            }
        }
        let tape = MlpTape {
            params: self,
            inputs,
            output_mask: match self.spec.output_activation {
                Activation::Relu => Some(out.clone()),
                Activation::Identity => None,
            },
        };
        Ok((out, tape))
    }
}

/// Forward intermediates of one [`MlpParams::forward`] call.
///
/// Borrowing the parameters keeps them frozen until the tape is consumed,
/// and `backward` takes the tape by value so it runs at most once.
#[derive(Debug)]
pub struct MlpTape<'a, T> {
    params: &'a MlpParams<T>,
    /// Input to each layer (post-activation of the previous one).
    inputs: Vec<Matrix<T>>,
    output_mask: Option<Matrix<T>>,
}

impl<'a, T: Real> MlpTape<'a, T> {
    pub fn batch_size(&self) -> usize {
        self.inputs[0].rows()
    }

    /// Returns `(parameter gradients, input gradients)`.
    pub fn backward(self, output_grad: &Matrix<T>) -> Result<(Vec<T>, Matrix<T>)> {
        let mut grads = vec![T::zero(); self.params.len()];
        let input_grad = self.backward_into(output_grad, &mut grads)?;
        Ok((grads, input_grad))
    }

    /// Adds parameter gradients into `grads` and returns input gradients.
    pub fn backward_into(self, output_grad: &Matrix<T>, grads: &mut [T]) -> Result<Matrix<T>> {
        let params = self.params;
        let spec = params.spec();
        check_len("mlp backward gradient buffer", params.len(), grads.len())?;
        check_len("mlp output grad rows", self.batch_size(), output_grad.rows())?;
        check_len("mlp output grad cols", spec.output_width(), output_grad.cols())?;

        let mut g = output_grad.clone();
        if let Some(out) = &self.output_mask {
            relu_mask(&mut g, out);
        }
        for l in (0..spec.num_layers()).rev() {
            let (i, o) = (spec.widths[l], spec.widths[l + 1]);
            let x = &self.inputs[l];
            let (w_at, b_at, end) = params.layer_range(l);
            let (dw, db) = grads[w_at..end].split_at_mut(b_at - w_at);
            gemm(T::one(), x.view().t(), g.view(), T::one(), dw, o);
            for r in 0..g.rows() {
                for (acc, &v) in db.iter_mut().zip(g.row(r)) {
                    *acc += v;
                }
            }
            let mut dx = Matrix::zeros(g.rows(), i);
            gemm(
                T::one(),
                g.view(),
                View::new(params.weight(l), i, o).t(),
                T::zero(),
                dx.as_mut_slice(),
                i,
            );
            if l > 0 && spec.hidden_activation == Activation::Relu {
                relu_mask(&mut dx, x);
            }
            g = dx;
        }
        Ok(g)
    }
}

/// Zeroes gradient entries whose activation is not strictly positive.
fn relu_mask<T: Real>(grad: &mut Matrix<T>, activation: &Matrix<T>) {
    for (g, &a) in grad.as_mut_slice().iter_mut().zip(activation.as_slice()) {
        if !(a > T::zero()) {
            *g = T::zero();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn init_is_deterministic_with_zero_bias() {
        let spec = MlpSpec::relu(&[2, 1]).unwrap();
        let a = MlpParams::<f32>::init(spec.clone(), 0).unwrap();
        let b = MlpParams::<f32>::init(spec.clone(), 0).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
        assert!(a.bias(0).iter().all(|&x| x == 0.0));
        let c = MlpParams::<f32>::init(spec, 1).unwrap();
        assert_ne!(a.as_slice(), c.as_slice());
    }

    #[test]
    fn init_std_is_fan_in_scaled() {
        let spec = MlpSpec::relu(&[512, 512]).unwrap();
        let p = MlpParams::<f64>::init(spec, 7).unwrap();
        let w = p.weight(0);
        let n = w.len() as f64;
        let mean = w.iter().sum::<f64>() / n;
        let std = (w.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt();
        let target = (2.0f64 / 512.0).sqrt();
        assert!((std - target).abs() < 0.1 * target, "std {std} vs {target}");
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(MlpSpec::relu(&[3]).is_err());
        assert!(MlpSpec::relu(&[3, 0, 1]).is_err());
    }

    #[test]
    fn zero_network_gives_zero_output() {
        let p = MlpParams::<f32>::zeros(MlpSpec::relu(&[3, 4, 2]).unwrap()).unwrap();
        let x = Matrix::from_rows(&[[1.0f32, -2.0, 3.0], [0.5, 0.5, 0.5]]).unwrap();
        assert!(p.infer(&x).unwrap().as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_layer() {
        let p = MlpParams::from_flat(
            MlpSpec::relu(&[2, 2]).unwrap(),
            vec![1.0f32, 0.0, 0.0, 1.0, 0.0, 0.0],
        )
        .unwrap();
        let y = p.infer(&Matrix::from_rows(&[[3.0f32, -2.0]]).unwrap()).unwrap();
        assert_eq!(y.as_slice(), &[3.0, -2.0]);
    }

    #[test]
    fn two_layer_hand_computation() {
        // Layer 1: W = [[1, -1], [2, 1]], b = [0.5, -1]; layer 2: W = [[2], [3]], b = [1].
        let p = MlpParams::from_flat(
            MlpSpec::relu(&[2, 2, 1]).unwrap(),
            vec![1.0f64, -1.0, 2.0, 1.0, 0.5, -1.0, 2.0, 3.0, 1.0],
        )
        .unwrap();
        // x = (1, 2): h = relu(1 + 4 + 0.5, -1 + 2 - 1) = (5.5, 0); y = 11 + 0 + 1 = 12.
        // x = (-1, 1): h = relu(-1 + 2 + 0.5, 1 + 1 - 1) = (1.5, 1); y = 3 + 3 + 1 = 7.
        let x = Matrix::from_rows(&[[1.0, 2.0], [-1.0, 1.0]]).unwrap();
        assert_eq!(p.infer(&x).unwrap().as_slice(), &[12.0, 7.0]);
        let (y, _tape) = p.forward(&x).unwrap();
        assert_eq!(y.as_slice(), &[12.0, 7.0]);
    }

    #[test]
    fn zero_output_grad_gives_zero_gradients() {
        let p = MlpParams::<f64>::init(MlpSpec::relu(&[3, 5, 2]).unwrap(), 3).unwrap();
        let x = Matrix::from_rows(&[[0.1, 0.2, 0.3]]).unwrap();
        let (_, tape) = p.forward(&x).unwrap();
        let (gp, gx) = tape.backward(&Matrix::zeros(1, 2)).unwrap();
        assert!(gp.iter().all(|&g| g == 0.0));
        assert!(gx.as_slice().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn linear_input_gradient_is_weight_transpose() {
        let p = MlpParams::<f64>::init(MlpSpec::relu(&[3, 2]).unwrap(), 11).unwrap();
        let x = Matrix::from_rows(&[[0.3, -0.7, 1.1]]).unwrap();
        let (_, tape) = p.forward(&x).unwrap();
        let og = Matrix::from_rows(&[[0.25, -2.0]]).unwrap();
        let (_, gx) = tape.backward(&og).unwrap();
        let w = p.weight(0);
        for i in 0..3 {
            let expect = w[i * 2] * 0.25 + w[i * 2 + 1] * -2.0;
            assert_abs_diff_eq!(gx.get(0, i), expect, epsilon = 1e-14);
        }
    }

    #[test]
    fn backward_shape_errors() {
        let p = MlpParams::<f64>::init(MlpSpec::relu(&[3, 2]).unwrap(), 1).unwrap();
        assert!(p.forward(&Matrix::zeros(1, 4)).is_err());
        let (_, tape) = p.forward(&Matrix::zeros(2, 3)).unwrap();
        assert!(tape.backward(&Matrix::zeros(2, 3)).is_err());
    }
}

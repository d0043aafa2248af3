use rand::Rng;

use super::tensor::Tensor;
use crate::error::{Error, Result};

fn glorot(rng: &mut impl Rng, fan_in: usize, fan_out: usize, n: usize) -> Vec<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..n).map(|_| rng.random_range(-limit..=limit)).collect()
}

/// Fully connected layer `y = W x + b` with `W` stored as `[out, in]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Dense {
    pub fn new(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let w = glorot(rng, inputs, outputs, inputs * outputs);
        Self {
            weight: Tensor::param(vec![outputs, inputs], w).expect("dense weight"),
            bias: Tensor::param(vec![outputs], vec![0.0; outputs]).expect("dense bias"),
        }
    }

    pub fn from_parts(weight: Tensor, bias: Tensor) -> Result<Self> {
        let (ws, bs) = (weight.shape(), bias.shape());
        if ws.len() != 2 || bs.len() != 1 || ws[0] != bs[0] {
            return Err(Error::InvalidShape(format!(
                "dense weight {ws:?} incompatible with bias {bs:?}"
            )));
        }
        Ok(Self { weight, bias })
    }

    pub fn inputs(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn outputs(&self) -> usize {
        self.weight.shape()[0]
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (out, inp) = (self.outputs(), self.inputs());
        if x.shape() != [inp] {
            return Err(Error::InvalidShape(format!(
                "dense expects [{inp}], got {:?}",
                x.shape()
            )));
        }
        let w = self.weight.data();
        let xs = x.data();
        let y = self
            .bias
            .data()
            .iter()
            .enumerate()
            .map(|(o, b)| {
                let row = &w[o * inp..(o + 1) * inp];
                b + row.iter().zip(xs).map(|(a, c)| a * c).sum::<f64>()
            })
            .collect::<Vec<_>>();
        debug_assert_eq!(y.len(), out);
        Ok(Tensor::vector(y))
    }

    fn backward(&mut self, x: &Tensor, grad_y: &Tensor) -> Tensor {
        let inp = self.inputs();
        let xs = x.data();
        let gy = grad_y.data();
        let mut gx = vec![0.0; inp];
        {
            let (w, gw) = self.weight.value_and_grad_mut();
            for (o, &g) in gy.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                let row = &w[o * inp..(o + 1) * inp];
                let grow = &mut gw[o * inp..(o + 1) * inp];
                for i in 0..inp {
                    grow[i] += g * xs[i];
                    gx[i] += g * row[i];
                }
            }
        }
        let gb = self.bias.grad_mut();
        for (b, g) in gb.iter_mut().zip(gy) {
            *b += g;
        }
        Tensor::vector(gx)
    }
}

/// Valid-padding, stride-1 1-D convolution over `[channels, length]` inputs.
/// Weights are stored as `[out, in, kernel]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv1d {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Conv1d {
    pub fn new(in_channels: usize, out_channels: usize, kernel: usize, rng: &mut impl Rng) -> Self {
        assert!(kernel >= 1, "kernel width must be positive");
        let w = glorot(
            rng,
            in_channels * kernel,
            out_channels * kernel,
            out_channels * in_channels * kernel,
        );
        Self {
            weight: Tensor::param(vec![out_channels, in_channels, kernel], w).expect("conv weight"),
            bias: Tensor::param(vec![out_channels], vec![0.0; out_channels]).expect("conv bias"),
        }
    }

    pub fn from_parts(weight: Tensor, bias: Tensor) -> Result<Self> {
        let (ws, bs) = (weight.shape(), bias.shape());
        if ws.len() != 3 || bs.len() != 1 || ws[0] != bs[0] {
            return Err(Error::InvalidShape(format!(
                "conv weight {ws:?} incompatible with bias {bs:?}"
            )));
        }
        Ok(Self { weight, bias })
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn kernel(&self) -> usize {
        self.weight.shape()[2]
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (cout, cin, k) = (self.out_channels(), self.in_channels(), self.kernel());
        let s = x.shape();
        if s.len() != 2 || s[0] != cin {
            return Err(Error::InvalidShape(format!(
                "conv1d expects [{cin}, length], got {s:?}"
            )));
        }
        let len = s[1];
        if k > len {
            return Err(Error::InvalidShape(format!(
                "kernel width {k} exceeds input length {len}"
            )));
        }
        let out_len = len - k + 1;
        let w = self.weight.data();
        let xs = x.data();
        let mut y = vec![0.0; cout * out_len];
        for o in 0..cout {
            let yrow = &mut y[o * out_len..(o + 1) * out_len];
            yrow.iter_mut().for_each(|v| *v = self.bias.data()[o]);
            for i in 0..cin {
                let xrow = &xs[i * len..(i + 1) * len];
                let taps = &w[(o * cin + i) * k..(o * cin + i + 1) * k];
                for (j, &tap) in taps.iter().enumerate() {
                    for (t, yv) in yrow.iter_mut().enumerate() {
                        *yv += tap * xrow[t + j];
                    }
                }
            }
        }
        Tensor::new(vec![cout, out_len], y)
    }

    fn backward(&mut self, x: &Tensor, grad_y: &Tensor) -> Tensor {
        let (cout, cin, k) = (self.out_channels(), self.in_channels(), self.kernel());
        let len = x.shape()[1];
        let out_len = len - k + 1;
        let xs = x.data();
        let gy = grad_y.data();
        let mut gx = vec![0.0; cin * len];
        {
            let (w, gw) = self.weight.value_and_grad_mut();
            for o in 0..cout {
                let grow = &gy[o * out_len..(o + 1) * out_len];
                for i in 0..cin {
                    let xrow = &xs[i * len..(i + 1) * len];
                    let gxrow = &mut gx[i * len..(i + 1) * len];
                    let base = (o * cin + i) * k;
                    for j in 0..k {
                        let tap = w[base + j];
                        let mut acc = 0.0;
                        for (t, &g) in grow.iter().enumerate() {
                            acc += g * xrow[t + j];
                            gxrow[t + j] += g * tap;
                        }
                        gw[base + j] += acc;
                    }
                }
            }
        }
        let gb = self.bias.grad_mut();
        for (o, b) in gb.iter_mut().enumerate() {
            *b += gy[o * out_len..(o + 1) * out_len].iter().sum::<f64>();
        }
        Tensor::new(vec![cin, len], gx).expect("conv input grad")
    }
}

/// One stage of a [`Sequential`] network.
#[derive(Clone, Debug, PartialEq)]
pub enum Layer {
    Dense(Dense),
    Conv1d(Conv1d),
    /// Rectifier, `max(0, x)` elementwise.
    Relu,
    /// Mean over the length axis of a `[channels, length]` input.
    MeanPool,
}

impl Layer {
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        match self {
            Layer::Dense(d) => d.forward(x),
            Layer::Conv1d(c) => c.forward(x),
            Layer::Relu => {
                let y = x.data().iter().map(|v| v.max(0.0)).collect();
                Tensor::new(x.shape().to_vec(), y)
            }
            Layer::MeanPool => {
                let s = x.shape();
                if s.len() != 2 {
                    return Err(Error::InvalidShape(format!(
                        "mean-pool expects [channels, length], got {s:?}"
                    )));
                }
                let len = s[1];
                let y = x
                    .data()
                    .chunks(len)
                    .map(|row| row.iter().sum::<f64>() / len as f64)
                    .collect();
                Ok(Tensor::vector(y))
            }
        }
    }

    /// Backpropagates `grad_y` through the layer given its cached input `x`,
    /// accumulating parameter gradients and returning the input gradient.
    pub fn backward(&mut self, x: &Tensor, grad_y: &Tensor) -> Tensor {
        match self {
            Layer::Dense(d) => d.backward(x, grad_y),
            Layer::Conv1d(c) => c.backward(x, grad_y),
            Layer::Relu => {
                let g = x
                    .data()
                    .iter()
                    .zip(grad_y.data())
                    .map(|(&xv, &gv)| if xv > 0.0 { gv } else { 0.0 })
                    .collect();
                Tensor::new(x.shape().to_vec(), g).expect("relu grad")
            }
            Layer::MeanPool => {
                let len = x.shape()[1];
                let g = grad_y
                    .data()
                    .iter()
                    .flat_map(|&gv| std::iter::repeat_n(gv / len as f64, len))
                    .collect();
                Tensor::new(x.shape().to_vec(), g).expect("pool grad")
            }
        }
    }

    pub fn params(&self) -> Vec<&Tensor> {
        match self {
            Layer::Dense(d) => vec![&d.weight, &d.bias],
            Layer::Conv1d(c) => vec![&c.weight, &c.bias],
            Layer::Relu | Layer::MeanPool => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Layer::Dense(d) => vec![&mut d.weight, &mut d.bias],
            Layer::Conv1d(c) => vec![&mut c.weight, &mut c.bias],
            Layer::Relu | Layer::MeanPool => Vec::new(),
        }
    }
}

/// Cached activations from [`Sequential::forward_tape`]; `activations[i]` is
/// the input of layer `i`, the last entry is the network output.
#[derive(Clone, Debug)]
pub struct Tape {
    pub activations: Vec<Tensor>,
}

impl Tape {
    pub fn output(&self) -> &Tensor {
        self.activations.last().expect("tape holds at least the input")
    }
}

/// A feed-forward stack of layers with hand-written backpropagation.
#[derive(Clone, Debug, PartialEq)]
pub struct Sequential {
    pub layers: Vec<Layer>,
}

impl Sequential {
    pub fn new(layers: Vec<Layer>) -> Self {
        Self { layers }
    }

    /// Dense network with rectifiers between layers and a linear output.
    pub fn mlp(sizes: &[usize], rng: &mut impl Rng) -> Self {
        assert!(sizes.len() >= 2, "an mlp needs input and output sizes");
        let mut layers = Vec::new();
        for (i, w) in sizes.windows(2).enumerate() {
            layers.push(Layer::Dense(Dense::new(w[0], w[1], rng)));
            if i + 2 < sizes.len() {
                layers.push(Layer::Relu);
            }
        }
        Self { layers }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut cur = x.clone();
        for layer in &self.layers {
            cur = layer.forward(&cur)?;
        }
        Ok(cur)
    }

    pub fn forward_tape(&self, x: &Tensor) -> Result<Tape> {
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.clone());
        for layer in &self.layers {
            let next = layer.forward(activations.last().unwrap())?;
            activations.push(next);
        }
        Ok(Tape { activations })
    }

    /// Accumulates parameter gradients for `d loss / d output = grad_out` and
    /// returns the gradient with respect to the network input.
    pub fn backward(&mut self, tape: &Tape, grad_out: &Tensor) -> Result<Tensor> {
        if tape.activations.len() != self.layers.len() + 1 {
            return Err(Error::InvalidShape("tape does not match network depth".into()));
        }
        if grad_out.shape() != tape.output().shape() {
            return Err(Error::InvalidShape(format!(
                "output grad {:?} does not match output {:?}",
                grad_out.shape(),
                tape.output().shape()
            )));
        }
        let mut g = grad_out.clone();
        for (i, layer) in self.layers.iter_mut().enumerate().rev() {
            g = layer.backward(&tape.activations[i], &g);
        }
        Ok(g)
    }

    pub fn params(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Signs of every rectifier input; used to detect finite-difference steps
    /// that cross a kink.
    pub(crate) fn relu_pattern(&self, x: &Tensor) -> Result<Vec<bool>> {
        let tape = self.forward_tape(x)?;
        let mut pattern = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            if matches!(layer, Layer::Relu) {
                pattern.extend(tape.activations[i].data().iter().map(|v| *v > 0.0));
            }
        }
        Ok(pattern)
    }
}

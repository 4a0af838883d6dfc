//! The grid-to-coordinates convolutional generator.

use rand::Rng;

use super::tape::{Gradients, Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    Identity,
    Sine { freq: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvLayer {
    /// `out x in x k x k`
    pub weight: Tensor,
    /// `out`
    pub bias: Tensor,
    pub activation: Activation,
}

impl ConvLayer {
    pub fn in_channels(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn kernel(&self) -> usize {
        self.weight.shape()[2]
    }
}

/// Architecture knobs for [`GeneratorParams::init`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneratorArch {
    pub layers: usize,
    pub hidden: usize,
    pub kernel: usize,
    /// Sine frequency of the hidden activations.
    pub sine_freq: f64,
    /// Multiplier on the first layer's init bound; larger values start the
    /// network with higher-frequency features.
    pub first_layer_gain: f64,
}

impl Default for GeneratorArch {
    fn default() -> Self {
        Self {
            layers: 6,
            hidden: 16,
            kernel: 3,
            sine_freq: 1.0,
            first_layer_gain: 4.0,
        }
    }
}

impl GeneratorArch {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.hidden == 0 {
            return Err(Error::invalid("generator needs at least one layer and one hidden channel"));
        }
        if self.kernel % 2 == 0 {
            return Err(Error::invalid("generator kernel size must be odd"));
        }
        Ok(())
    }
}

/// Weights of the generator; layer shapes chain from 3 channels to 3 channels.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorParams {
    layers: Vec<ConvLayer>,
}

impl GeneratorParams {
    pub fn new(layers: Vec<ConvLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("generator has no layers"));
        }
        let mut expect = 3;
        for (i, l) in layers.iter().enumerate() {
            let ws = l.weight.shape();
            if ws.len() != 4 || ws[2] != ws[3] || ws[2] % 2 == 0 {
                return Err(Error::invalid(format!("layer {i}: bad kernel shape {ws:?}")));
            }
            if l.in_channels() != expect {
                return Err(Error::invalid(format!(
                    "layer {i}: expects {} input channels, previous layer gives {expect}",
                    l.in_channels()
                )));
            }
            if l.bias.shape() != [l.out_channels()] {
                return Err(Error::invalid(format!("layer {i}: bias shape mismatch")));
            }
            expect = l.out_channels();
        }
        if expect != 3 {
            return Err(Error::invalid("last layer must output 3 channels"));
        }
        Ok(Self { layers })
    }

    /// Uniform fan-in init; sine on hidden layers, linear zero-initialized output layer.
    pub fn init(arch: &GeneratorArch, rng: &mut impl Rng) -> Result<Self> {
        arch.validate()?;
        let k = arch.kernel;
        let mut layers = Vec::with_capacity(arch.layers);
        for i in 0..arch.layers {
            let c_in = if i == 0 { 3 } else { arch.hidden };
            let last = i + 1 == arch.layers;
            let c_out = if last { 3 } else { arch.hidden };
            let fan_in = (c_in * k * k) as f64;
            let (weight, bias) = if last {
                (vec![0.0; c_out * c_in * k * k], vec![0.0; c_out])
            } else {
                let mut bound = (6.0 / fan_in).sqrt() / arch.sine_freq;
                if i == 0 {
                    bound *= arch.first_layer_gain;
                }
                let w = (0..c_out * c_in * k * k).map(|_| rng.gen_range(-bound..bound)).collect();
                let bb = 1.0 / fan_in.sqrt();
                let b = (0..c_out).map(|_| rng.gen_range(-bb..bb)).collect();
                (w, b)
            };
            layers.push(ConvLayer {
                weight: Tensor::new(&[c_out, c_in, k, k], weight)?,
                bias: Tensor::new(&[c_out], bias)?,
                activation: if last {
                    Activation::Identity
                } else {
                    Activation::Sine { freq: arch.sine_freq }
                },
            });
        }
        Self::new(layers)
    }

    pub fn layers(&self) -> &[ConvLayer] {
        &self.layers
    }

    /// Parameter buffers in a fixed order: weight, bias per layer.
    pub fn buffers(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.data(), l.bias.data()])
            .collect()
    }

    pub fn buffers_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| {
                let ConvLayer { weight, bias, .. } = l;
                [weight.data_mut(), bias.data_mut()]
            })
            .collect()
    }

    pub fn num_parameters(&self) -> usize {
        self.buffers().iter().map(|b| b.len()).sum()
    }

    /// Record the forward pass on `tape`. Returns the output node and the
    /// `(weight, bias)` nodes of every layer.
    pub fn record(&self, tape: &mut Tape, input: Var) -> Result<(Var, Vec<(Var, Var)>)> {
        let (c, _, _) = tape.value(input).chw()?;
        if c != 3 {
            return Err(Error::invalid(format!("generator input must have 3 channels, got {c}")));
        }
        let mut x = input;
        let mut vars = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let w = tape.leaf(layer.weight.clone())?;
            let b = tape.leaf(layer.bias.clone())?;
            x = tape.conv2d(x, w, b)?;
            if let Activation::Sine { freq } = layer.activation {
                x = tape.sin(x, freq)?;
            }
            vars.push((w, b));
        }
        Ok((x, vars))
    }
}

/// A recorded generator forward pass awaiting its backward sweep.
#[derive(Debug)]
pub struct GeneratorTape {
    pub tape: Tape,
    pub input: Var,
    pub output: Var,
    pub params: Vec<(Var, Var)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorGrads {
    /// `(d_weight, d_bias)` per layer.
    pub layers: Vec<(Tensor, Tensor)>,
    pub input: Tensor,
}

impl GeneratorGrads {
    /// Gradient buffers in the order of [`GeneratorParams::buffers`].
    pub fn buffers(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|(w, b)| [w.data(), b.data()]).collect()
    }

    pub(crate) fn collect(grads: &Gradients, input: Var, params: &[(Var, Var)]) -> Self {
        Self {
            layers: params
                .iter()
                .map(|&(w, b)| (grads.get_or_zero(w), grads.get_or_zero(b)))
                .collect(),
            input: grads.get_or_zero(input),
        }
    }
}

/// Run the generator on a `3 x U x V` input.
pub fn forward_generator(params: &GeneratorParams, input: &Tensor) -> Result<(Tensor, GeneratorTape)> {
    let mut tape = Tape::new();
    let x = tape.leaf(input.clone())?;
    let (out, vars) = params.record(&mut tape, x)?;
    let value = tape.value(out).clone();
    Ok((
        value,
        GeneratorTape {
            tape,
            input: x,
            output: out,
            params: vars,
        },
    ))
}

/// Backpropagate `d(loss)/d(output)` through a recorded generator pass.
pub fn backward(gt: &mut GeneratorTape, loss_gradient: &Tensor) -> Result<GeneratorGrads> {
    let grads = gt.tape.backward(&[(gt.output, loss_gradient)])?;
    Ok(GeneratorGrads::collect(&grads, gt.input, &gt.params))
}

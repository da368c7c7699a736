//! Dense feed-forward networks with reverse-mode gradients, Adam, and exact
//! parameter snapshots.

mod adam;
mod blob;
mod tape;

pub use adam::{clip_grad_norm, OptState};
pub use blob::{ParamBlob, BLOB_VERSION};
pub use tape::{Matrix, NetVars, Tape, Var, MASK_PENALTY};

use alloc::vec::Vec;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("index {index} out of range for width {len}")]
    Index { index: usize, len: usize },
    #[error("row has no legal action")]
    NoLegalAction,
    #[error("parameter blob: {0}")]
    Blob(&'static str),
    #[error("architecture mismatch on restore")]
    ArchMismatch,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeadKind {
    PolicyLogits,
    StateValue,
    QValues,
}

/// Layer widths plus activation and head kind.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arch {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub output: usize,
    pub activation: Activation,
    pub head: HeadKind,
}

impl Arch {
    /// Default shape: two hidden layers of 128, tanh for policy/value heads and relu for Q heads.
    pub fn default_for(head: HeadKind, input: usize, output: usize) -> Self {
        let activation = match head {
            HeadKind::QValues => Activation::Relu,
            _ => Activation::Tanh,
        };
        Self { input, hidden: alloc::vec![128, 128], output, activation, head }
    }

    pub fn with_hidden(mut self, hidden: Vec<usize>) -> Self {
        self.hidden = hidden;
        self
    }

    /// `(fan_in, fan_out)` for each affine layer, input to output.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut widths = Vec::with_capacity(self.hidden.len() + 2);
        widths.push(self.input);
        widths.extend_from_slice(&self.hidden);
        widths.push(self.output);
        widths.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layer_shapes().iter().map(|(i, o)| i * o + o).sum()
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if self.input == 0 || self.output == 0 || self.hidden.contains(&0) {
            return Err(NnError::Blob("zero-width layer"));
        }
        if self.head == HeadKind::StateValue && self.output != 1 {
            return Err(NnError::Shape { expected: 1, got: self.output });
        }
        Ok(())
    }
}

/// Flat gradient aligned with a [`NetParams`] vector.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Gradient(pub Vec<f64>);

impl Gradient {
    pub fn zeros(len: usize) -> Self {
        Self(alloc::vec![0.0; len])
    }

    pub fn add_assign(&mut self, other: &Gradient) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += b;
        }
    }

    pub fn norm(&self) -> f64 {
        math::sqrt(self.0.iter().map(|x| x * x).sum())
    }
}

/// An MLP: architecture plus flat parameters (per layer: row-major `W[in][out]`, then `b[out]`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetParams {
    pub arch: Arch,
    pub params: Vec<f64>,
}

impl NetParams {
    pub fn zeros(arch: Arch) -> Self {
        let n = arch.param_count();
        Self { arch, params: alloc::vec![0.0; n] }
    }

    /// Glorot-uniform weights, zero biases. The output layer is scaled by
    /// `output_scale` (small values give near-uniform initial policies).
    pub fn init<R: Rng + ?Sized>(arch: Arch, output_scale: f64, rng: &mut R) -> Self {
        let shapes = arch.layer_shapes();
        let mut params = Vec::with_capacity(arch.param_count());
        for (li, &(fan_in, fan_out)) in shapes.iter().enumerate() {
            let limit = math::sqrt(6.0 / (fan_in + fan_out) as f64);
            let scale = if li + 1 == shapes.len() { output_scale } else { 1.0 };
            for _ in 0..fan_in * fan_out {
                params.push(rng.gen_range(-limit..limit) * scale);
            }
            params.extend(core::iter::repeat_n(0.0, fan_out));
        }
        Self { arch, params }
    }

    pub fn from_parts(arch: Arch, params: Vec<f64>) -> Result<Self, NnError> {
        arch.validate()?;
        if params.len() != arch.param_count() {
            return Err(NnError::Shape { expected: arch.param_count(), got: params.len() });
        }
        Ok(Self { arch, params })
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Forward pass for one input row.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, NnError> {
        let x = Matrix::from_rows(1, input.len(), input.to_vec())?;
        Ok(self.forward_batch(&x)?.data)
    }

    /// Forward pass for a batch (one row per sample). Bit-identical to the tape path.
    pub fn forward_batch(&self, x: &Matrix) -> Result<Matrix, NnError> {
        if x.cols != self.arch.input {
            return Err(NnError::Shape { expected: self.arch.input, got: x.cols });
        }
        let shapes = self.arch.layer_shapes();
        let last = shapes.len() - 1;
        let mut cur = x.clone();
        let mut offset = 0;
        for (li, &(fan_in, fan_out)) in shapes.iter().enumerate() {
            let w = Matrix { rows: fan_in, cols: fan_out, data: self.params[offset..offset + fan_in * fan_out].to_vec() };
            offset += fan_in * fan_out;
            let b = &self.params[offset..offset + fan_out];
            offset += fan_out;
            let mut out = Matrix::zeros(cur.rows, fan_out);
            tape::affine_kernel(&cur, &w, b, &mut out);
            if li != last {
                self.activate(&mut out.data);
            }
            cur = out;
        }
        Ok(cur)
    }

    fn activate(&self, data: &mut [f64]) {
        match self.arch.activation {
            Activation::Tanh => data.iter_mut().for_each(|x| *x = math::tanh(*x)),
            Activation::Relu => data.iter_mut().for_each(|x| *x = if *x > 0.0 { *x } else { 0.0 }),
        }
    }

    /// Forward pass recorded on a tape against previously registered leaves.
    pub fn forward_tape(&self, tape: &mut Tape, vars: &NetVars, x: Var) -> Result<Var, NnError> {
        let last = vars.layers.len() - 1;
        let mut cur = x;
        for (li, &(w, b)) in vars.layers.iter().enumerate() {
            cur = tape.affine(cur, w, b)?;
            if li != last {
                cur = match self.arch.activation {
                    Activation::Tanh => tape.tanh(cur),
                    Activation::Relu => tape.relu(cur),
                };
            }
        }
        Ok(cur)
    }

    pub fn apply_update(&mut self, delta: &[f64]) {
        for (p, d) in self.params.iter_mut().zip(delta) {
            *p += d;
        }
    }

    pub fn snapshot(&self) -> ParamBlob {
        ParamBlob::encode(self)
    }

    pub fn restore(blob: &ParamBlob) -> Result<Self, NnError> {
        blob.decode()
    }

    /// Restore and insist on a specific architecture.
    pub fn restore_as(blob: &ParamBlob, expected: &Arch) -> Result<Self, NnError> {
        let net = blob.decode()?;
        if &net.arch != expected {
            return Err(NnError::ArchMismatch);
        }
        Ok(net)
    }
}

/// Log-probabilities matching [`Tape::masked_log_softmax`] bit for bit.
pub fn masked_log_probs(logits: &[f64], mask: &[bool]) -> Vec<f64> {
    let mut row: Vec<f64> = logits
        .iter()
        .zip(mask)
        .map(|(&l, &m)| if m { l + 0.0 } else { l + MASK_PENALTY })
        .collect();
    tape::log_softmax_inplace(&mut row);
    row
}

/// Build a loss on a fresh tape and return its value and gradient for `net`.
pub fn grad<F>(net: &NetParams, build: F) -> Result<(f64, Gradient), NnError>
where
    F: FnOnce(&mut Tape, &NetVars) -> Result<Var, NnError>,
{
    let mut tape = Tape::new();
    let vars = tape.register(net);
    let loss = build(&mut tape, &vars)?;
    let g = tape.gradient_for(loss, &vars)?;
    Ok((tape.scalar(loss), g))
}

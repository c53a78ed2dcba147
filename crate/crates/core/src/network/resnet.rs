use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::NetworkError;
use crate::autodiff::Scalar;

/// Shape of an `L`-block ResNet: entry affine `d → m`, `L−1` residual
/// blocks of width `m`, exit affine `m → d₀`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapeSpec {
    pub input_dim: usize,
    pub width: usize,
    pub blocks: usize,
    pub output_dim: usize,
}

impl ShapeSpec {
    pub fn new(input_dim: usize, width: usize, blocks: usize, output_dim: usize) -> Self {
        ShapeSpec { input_dim, width, blocks, output_dim }
    }

    pub fn residual_blocks(&self) -> usize {
        self.blocks.saturating_sub(1)
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        if self.input_dim == 0 || self.width == 0 || self.blocks == 0 || self.output_dim == 0 {
            return Err(NetworkError::InvalidShape(*self));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        let (d, m, o) = (self.input_dim, self.width, self.output_dim);
        m * d + m + self.residual_blocks() * 2 * (m * m + m) + o * m + o
    }

    pub(crate) fn layout(&self) -> Layout {
        let (d, m, o) = (self.input_dim, self.width, self.output_dim);
        let mut off = 0;
        let mut take = |n: usize| {
            let s = off;
            off += n;
            s
        };
        let entry_w = take(m * d);
        let entry_b = take(m);
        let blocks = (0..self.residual_blocks())
            .map(|_| BlockLayout { w1: take(m * m), b1: take(m), w2: take(m * m), b2: take(m) })
            .collect();
        let exit_w = take(o * m);
        let exit_b = take(o);
        Layout { entry_w, entry_b, blocks, exit_w, exit_b }
    }
}

#[derive(Debug, Clone)]
pub struct BlockLayout {
    pub w1: usize,
    pub b1: usize,
    pub w2: usize,
    pub b2: usize,
}

/// Offsets of each tensor in the flat parameter vector; weights are
/// row-major `out × in`.
#[derive(Debug, Clone)]
pub struct Layout {
    pub entry_w: usize,
    pub entry_b: usize,
    pub blocks: Vec<BlockLayout>,
    pub exit_w: usize,
    pub exit_b: usize,
}

/// Parameters of one ResNet, flattened as entry `(W, b)`, then per block
/// `(W₁, b₁, W₂, b₂)`, then exit `(W, b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResNet {
    shape: ShapeSpec,
    params: Vec<f64>,
}

impl ResNet {
    pub fn zeros(shape: ShapeSpec) -> Result<Self, NetworkError> {
        shape.validate()?;
        Ok(ResNet { shape, params: vec![0.0; shape.param_count()] })
    }

    pub fn from_params(shape: ShapeSpec, params: Vec<f64>) -> Result<Self, NetworkError> {
        shape.validate()?;
        if params.len() != shape.param_count() {
            return Err(NetworkError::ParamCount { expected: shape.param_count(), got: params.len() });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(NetworkError::NonFinite);
        }
        Ok(ResNet { shape, params })
    }

    /// Xavier-uniform weights on `±√(6/(fan_in+fan_out))`, zero biases.
    pub fn init_xavier(shape: ShapeSpec, seed: u64) -> Result<Self, NetworkError> {
        let mut net = ResNet::zeros(shape)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lay = shape.layout();
        let (d, m, o) = (shape.input_dim, shape.width, shape.output_dim);
        let mut fill = |params: &mut [f64], start: usize, fan_in: usize, fan_out: usize| {
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for p in &mut params[start..start + fan_in * fan_out] {
                *p = rng.gen_range(-bound..=bound);
            }
        };
        fill(&mut net.params, lay.entry_w, d, m);
        for b in &lay.blocks {
            fill(&mut net.params, b.w1, m, m);
            fill(&mut net.params, b.w2, m, m);
        }
        fill(&mut net.params, lay.exit_w, m, o);
        Ok(net)
    }

    pub fn shape(&self) -> &ShapeSpec {
        &self.shape
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

    /// Point-wise forward pass, generic over the scalar type so that the
    /// same recursion runs on `f64`, [`DualScalar`](crate::autodiff::DualScalar)
    /// and [`Jet`](crate::autodiff::Jet).
    pub fn forward<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>, NetworkError> {
        let (d, m, o) = (self.shape.input_dim, self.shape.width, self.shape.output_dim);
        if x.len() != d {
            return Err(NetworkError::InputDim { expected: d, got: x.len() });
        }
        let p = &self.params;
        let lay = self.shape.layout();
        let affine = |w: usize, b: usize, rows: usize, cols: usize, h: &[S]| -> Vec<S> {
            (0..rows)
                .map(|r| {
                    let mut acc = S::constant(p[b + r]);
                    for c in 0..cols {
                        acc = acc + h[c] * p[w + r * cols + c];
                    }
                    acc
                })
                .collect()
        };
        let mut h = affine(lay.entry_w, lay.entry_b, m, d, x);
        for blk in &lay.blocks {
            let a1: Vec<S> = affine(blk.w1, blk.b1, m, m, &h).into_iter().map(|z| z.gelu()).collect();
            let a2: Vec<S> = affine(blk.w2, blk.b2, m, m, &a1).into_iter().map(|z| z.gelu()).collect();
            h = h.iter().zip(a2).map(|(&hi, ai)| hi + ai).collect();
        }
        Ok(affine(lay.exit_w, lay.exit_b, o, m, &h))
    }

    /// Scalar-output convenience wrapper around [`forward`](Self::forward).
    pub fn forward_scalar<S: Scalar>(&self, x: &[S]) -> Result<S, NetworkError> {
        Ok(self.forward(x)?[0])
    }
}

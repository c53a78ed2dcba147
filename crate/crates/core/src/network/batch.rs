//! Batched jet forward and reverse passes through a [`ResNet`].
//!
//! Rows are stacked channel-major: the value rows of every point first,
//! then `∂t` rows, `∂x` rows and `∂²x` rows for whichever directions are
//! requested. Affine maps act identically on every channel (the bias only
//! on values), so each layer is one GEMM over the whole stack.

use super::gemm;
use super::resnet::ResNet;
use super::NetworkError;
use crate::autodiff::{gelu_derivs, Channel, Jet};

/// Which input coordinates carry derivative seeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Directions {
    /// Input index of the time coordinate, if `∂t` is wanted.
    pub t: Option<usize>,
    /// Input index of the space coordinate, if `∂x` is wanted.
    pub x: Option<usize>,
    /// Whether `∂²x` is wanted (requires `x`).
    pub xx: bool,
}

impl Directions {
    pub const VALUE: Directions = Directions { t: None, x: None, xx: false };

    pub fn channels(&self) -> Vec<Channel> {
        let mut c = vec![Channel::Value];
        if self.t.is_some() {
            c.push(Channel::Dt);
        }
        if self.x.is_some() {
            c.push(Channel::Dx);
            if self.xx {
                c.push(Channel::Dxx);
            }
        }
        c
    }
}

struct ActCache {
    f1: Vec<f64>,
    f2: Vec<f64>,
    f3: Vec<f64>,
}

struct BlockCache {
    h_in: Vec<f64>,
    a1: Vec<f64>,
    s1: Vec<f64>,
    act1: ActCache,
    a2: Vec<f64>,
    act2: ActCache,
}

/// Forward activations kept for the reverse pass.
pub struct BatchTrace {
    n: usize,
    chans: Vec<Channel>,
    input: Vec<f64>,
    blocks: Vec<BlockCache>,
    h_last: Vec<f64>,
    outputs: Vec<Jet>,
}

impl BatchTrace {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Output jets, `output_dim` per point.
    pub fn outputs(&self) -> &[Jet] {
        &self.outputs
    }
}

fn chan_pos(chans: &[Channel], c: Channel) -> Option<usize> {
    chans.iter().position(|&x| x == c)
}

fn add_bias_to_values(z: &mut [f64], n: usize, width: usize, bias: &[f64]) {
    for row in z[..n * width].chunks_exact_mut(width) {
        for (zi, bi) in row.iter_mut().zip(bias) {
            *zi += bi;
        }
    }
}

fn sum_value_rows(z: &[f64], n: usize, width: usize, out: &mut [f64]) {
    for row in z[..n * width].chunks_exact(width) {
        for (o, zi) in out.iter_mut().zip(row) {
            *o += zi;
        }
    }
}

fn activate(a: &[f64], n: usize, m: usize, chans: &[Channel]) -> (Vec<f64>, ActCache) {
    let mut s = vec![0.0; a.len()];
    let mut f1 = vec![0.0; n * m];
    let mut f2 = vec![0.0; n * m];
    let mut f3 = vec![0.0; n * m];
    for k in 0..n * m {
        let d = gelu_derivs(a[k]);
        s[k] = d.f0;
        f1[k] = d.f1;
        f2[k] = d.f2;
        f3[k] = d.f3;
    }
    let stride = n * m;
    let pt = chan_pos(chans, Channel::Dt);
    let px = chan_pos(chans, Channel::Dx);
    let pxx = chan_pos(chans, Channel::Dxx);
    if let Some(c) = pt {
        for k in 0..stride {
            s[c * stride + k] = f1[k] * a[c * stride + k];
        }
    }
    if let Some(c) = px {
        for k in 0..stride {
            s[c * stride + k] = f1[k] * a[c * stride + k];
        }
        if let Some(cc) = pxx {
            for k in 0..stride {
                let ax = a[c * stride + k];
                s[cc * stride + k] = f2[k] * ax * ax + f1[k] * a[cc * stride + k];
            }
        }
    }
    (s, ActCache { f1, f2, f3 })
}

/// Reverse of [`activate`]: adjoint of the pre-activation from that of the output.
fn activate_back(a: &[f64], sbar: &[f64], cache: &ActCache, n: usize, m: usize, chans: &[Channel]) -> Vec<f64> {
    let stride = n * m;
    let mut abar = vec![0.0; a.len()];
    for k in 0..stride {
        abar[k] = sbar[k] * cache.f1[k];
    }
    if let Some(c) = chan_pos(chans, Channel::Dt) {
        for k in 0..stride {
            let sb = sbar[c * stride + k];
            abar[k] += sb * cache.f2[k] * a[c * stride + k];
            abar[c * stride + k] = sb * cache.f1[k];
        }
    }
    if let Some(c) = chan_pos(chans, Channel::Dx) {
        let cxx = chan_pos(chans, Channel::Dxx);
        for k in 0..stride {
            let ax = a[c * stride + k];
            let sbx = sbar[c * stride + k];
            abar[k] += sbx * cache.f2[k] * ax;
            abar[c * stride + k] = sbx * cache.f1[k];
            if let Some(cc) = cxx {
                let sbxx = sbar[cc * stride + k];
                let axx = a[cc * stride + k];
                abar[k] += sbxx * (cache.f3[k] * ax * ax + cache.f2[k] * axx);
                abar[c * stride + k] += sbxx * 2.0 * cache.f2[k] * ax;
                abar[cc * stride + k] = sbxx * cache.f1[k];
            }
        }
    }
    abar
}

impl ResNet {
    /// Jet forward pass for `n` points stored row-major in `inputs` (`n × d`).
    pub fn forward_batch(&self, inputs: &[f64], dirs: Directions) -> Result<BatchTrace, NetworkError> {
        let shape = *self.shape();
        let (d, m, o) = (shape.input_dim, shape.width, shape.output_dim);
        if inputs.len() % d != 0 {
            return Err(NetworkError::InputDim { expected: d, got: inputs.len() % d });
        }
        for idx in [dirs.t, dirs.x].into_iter().flatten() {
            if idx >= d {
                return Err(NetworkError::InputDim { expected: d, got: idx + 1 });
            }
        }
        let n = inputs.len() / d;
        let chans = dirs.channels();
        let rows = n * chans.len();
        let mut input = vec![0.0; rows * d];
        input[..n * d].copy_from_slice(inputs);
        for (c, ch) in chans.iter().enumerate() {
            let seed = match ch {
                Channel::Dt => dirs.t,
                Channel::Dx => dirs.x,
                _ => None,
            };
            if let Some(axis) = seed {
                for i in 0..n {
                    input[(c * n + i) * d + axis] = 1.0;
                }
            }
        }
        let p = self.params();
        let lay = shape.layout();
        let mut h = vec![0.0; rows * m];
        gemm::mul_bt(rows, d, m, &input, &p[lay.entry_w..], 0.0, &mut h);
        add_bias_to_values(&mut h, n, m, &p[lay.entry_b..lay.entry_b + m]);
        let mut blocks = Vec::with_capacity(lay.blocks.len());
        for blk in &lay.blocks {
            let mut a1 = vec![0.0; rows * m];
            gemm::mul_bt(rows, m, m, &h, &p[blk.w1..], 0.0, &mut a1);
            add_bias_to_values(&mut a1, n, m, &p[blk.b1..blk.b1 + m]);
            let (s1, act1) = activate(&a1, n, m, &chans);
            let mut a2 = vec![0.0; rows * m];
            gemm::mul_bt(rows, m, m, &s1, &p[blk.w2..], 0.0, &mut a2);
            add_bias_to_values(&mut a2, n, m, &p[blk.b2..blk.b2 + m]);
            let (s2, act2) = activate(&a2, n, m, &chans);
            let h_next: Vec<f64> = h.iter().zip(&s2).map(|(x, y)| x + y).collect();
            blocks.push(BlockCache { h_in: std::mem::replace(&mut h, h_next), a1, s1, act1, a2, act2 });
        }
        let mut y = vec![0.0; rows * o];
        gemm::mul_bt(rows, m, o, &h, &p[lay.exit_w..], 0.0, &mut y);
        add_bias_to_values(&mut y, n, o, &p[lay.exit_b..lay.exit_b + o]);
        let mut outputs = vec![Jet::ZERO; n * o];
        for (c, &ch) in chans.iter().enumerate() {
            for k in 0..n * o {
                *outputs[k].get_mut(ch) = y[c * n * o + k];
            }
        }
        Ok(BatchTrace { n, chans, input, blocks, h_last: h, outputs })
    }

    /// Accumulates `∂L/∂θ` into `grad` given `∂L/∂(output jets)`.
    pub fn backward_batch(&self, trace: &BatchTrace, out_adj: &[Jet], grad: &mut [f64]) -> Result<(), NetworkError> {
        let shape = *self.shape();
        let (d, m, o) = (shape.input_dim, shape.width, shape.output_dim);
        let n = trace.n;
        if out_adj.len() != n * o {
            return Err(NetworkError::ParamCount { expected: n * o, got: out_adj.len() });
        }
        if grad.len() != self.param_count() {
            return Err(NetworkError::ParamCount { expected: self.param_count(), got: grad.len() });
        }
        let chans = &trace.chans;
        let rows = n * chans.len();
        let mut ybar = vec![0.0; rows * o];
        for (c, &ch) in chans.iter().enumerate() {
            for k in 0..n * o {
                ybar[c * n * o + k] = out_adj[k].get(ch);
            }
        }
        let p = self.params();
        let lay = shape.layout();
        // exit
        gemm::add_at_b(o, rows, m, &ybar, &trace.h_last, &mut grad[lay.exit_w..lay.exit_w + o * m]);
        sum_value_rows(&ybar, n, o, &mut grad[lay.exit_b..lay.exit_b + o]);
        let mut hbar = vec![0.0; rows * m];
        gemm::mul(rows, o, m, &ybar, &p[lay.exit_w..], 0.0, &mut hbar);
        for (blk, cache) in lay.blocks.iter().zip(&trace.blocks).rev() {
            let a2bar = activate_back(&cache.a2, &hbar, &cache.act2, n, m, chans);
            gemm::add_at_b(m, rows, m, &a2bar, &cache.s1, &mut grad[blk.w2..blk.w2 + m * m]);
            sum_value_rows(&a2bar, n, m, &mut grad[blk.b2..blk.b2 + m]);
            let mut s1bar = vec![0.0; rows * m];
            gemm::mul(rows, m, m, &a2bar, &p[blk.w2..], 0.0, &mut s1bar);
            let a1bar = activate_back(&cache.a1, &s1bar, &cache.act1, n, m, chans);
            gemm::add_at_b(m, rows, m, &a1bar, &cache.h_in, &mut grad[blk.w1..blk.w1 + m * m]);
            sum_value_rows(&a1bar, n, m, &mut grad[blk.b1..blk.b1 + m]);
            // residual path keeps hbar, add the branch contribution
            gemm::mul(rows, m, m, &a1bar, &p[blk.w1..], 1.0, &mut hbar);
        }
        gemm::add_at_b(m, rows, d, &hbar, &trace.input, &mut grad[lay.entry_w..lay.entry_w + m * d]);
        sum_value_rows(&hbar, n, m, &mut grad[lay.entry_b..lay.entry_b + m]);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::ShapeSpec;

    fn sample_inputs(n: usize, d: usize) -> Vec<f64> {
        (0..n * d).map(|i| ((i as f64) * 0.731).sin()).collect()
    }

    #[test]
    fn batch_forward_matches_pointwise_jets() {
        let net = ResNet::init_xavier(ShapeSpec::new(3, 8, 3, 1), 5).unwrap();
        let inputs = sample_inputs(5, 3);
        let dirs = Directions { t: Some(0), x: Some(1), xx: true };
        let trace = net.forward_batch(&inputs, dirs).unwrap();
        for i in 0..5 {
            let x = &inputs[i * 3..i * 3 + 3];
            let jx = [Jet::new(x[0], 1.0, 0.0, 0.0), Jet::new(x[1], 0.0, 1.0, 0.0), Jet::constant(x[2])];
            let want = net.forward_scalar(&jx).unwrap();
            let got = trace.outputs()[i];
            for ch in [Channel::Value, Channel::Dt, Channel::Dx, Channel::Dxx] {
                assert!((want.get(ch) - got.get(ch)).abs() < 1e-13, "{ch:?}");
            }
        }
    }

    #[test]
    fn value_only_batch() {
        let net = ResNet::init_xavier(ShapeSpec::new(2, 6, 2, 1), 9).unwrap();
        let inputs = sample_inputs(4, 2);
        let trace = net.forward_batch(&inputs, Directions::VALUE).unwrap();
        for i in 0..4 {
            let want = net.forward_scalar(&inputs[2 * i..2 * i + 2]).unwrap();
            assert!((trace.outputs()[i].v - want).abs() < 1e-14);
            assert_eq!(trace.outputs()[i].dx, 0.0);
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let shape = ShapeSpec::new(3, 5, 3, 1);
        let net = ResNet::init_xavier(shape, 21).unwrap();
        let inputs = sample_inputs(3, 3);
        let dirs = Directions { t: Some(0), x: Some(1), xx: true };
        let weights = [Jet::new(0.3, -1.1, 0.7, 0.4), Jet::new(-0.2, 0.5, 1.3, -0.8), Jet::new(1.0, 0.1, -0.6, 0.9)];
        let loss = |net: &ResNet| -> f64 {
            let tr = net.forward_batch(&inputs, dirs).unwrap();
            tr.outputs()
                .iter()
                .zip(&weights)
                .map(|(y, w)| y.v * w.v + y.dt * w.dt + y.dx * w.dx + y.dxx * w.dxx)
                .sum()
        };
        let trace = net.forward_batch(&inputs, dirs).unwrap();
        let mut grad = vec![0.0; net.param_count()];
        net.backward_batch(&trace, &weights, &mut grad).unwrap();
        let h = 1e-6;
        for k in 0..net.param_count() {
            let mut np = net.clone();
            np.params_mut()[k] += h;
            let fp = loss(&np);
            np.params_mut()[k] -= 2.0 * h;
            let fm = loss(&np);
            let fd = (fp - fm) / (2.0 * h);
            assert!((grad[k] - fd).abs() < 1e-7 * (1.0 + fd.abs()), "param {k}: {} vs {}", grad[k], fd);
        }
    }
}

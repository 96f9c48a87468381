//! Neural building blocks: the autodiff substrate, GRU networks for the
//! frame-wise steering-vector and inverse-covariance estimates, the
//! dilated-convolution complex-ratio-filter estimator, and checkpointing.

pub mod autodiff;
pub mod checkpoint;
pub mod estimator;
pub mod gru;

use autodiff::Tensor;
use ndarray::{ArrayD, IxDyn};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Uniform initialization in `(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
pub fn uniform_init(shape: &[usize], fan_in: usize, rng: &mut ChaCha8Rng) -> ArrayD<f64> {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
    ArrayD::from_shape_vec(IxDyn(shape), data).unwrap()
}

/// Channel-wise layer normalization over `[C, T]` with learnable affine
/// parameters of shape `[C, 1]`. Composed from autodiff primitives, so the
/// whole expression is differentiable.
pub fn layer_norm_channels(x: &Tensor, gamma: &Tensor, beta: &Tensor, eps: f64) -> Tensor {
    let shape = x.shape();
    let (c, t) = (shape[0], shape[1]);
    let mean = x.sum_axis(0).mul_scalar(1.0 / c as f64).reshape(&[1, t]);
    let centered = x.sub(&mean.broadcast_to(&[c, t]));
    let var = centered
        .mul(&centered)
        .sum_axis(0)
        .mul_scalar(1.0 / c as f64)
        .reshape(&[1, t]);
    let denom = var.add_scalar(eps).sqrt().broadcast_to(&[c, t]);
    let normed = centered.div(&denom);
    normed
        .mul(&gamma.broadcast_to(&[c, t]))
        .add(&beta.broadcast_to(&[c, t]))
}

/// PReLU with a learnable scalar slope: `relu(x) - a * relu(-x)`.
pub fn prelu(x: &Tensor, slope: &Tensor) -> Tensor {
    let shape = x.shape();
    let a = slope.reshape(&[1, 1]).broadcast_to(&shape);
    x.relu().sub(&a.mul(&x.neg().relu()))
}

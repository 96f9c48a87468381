//! The front-end filter estimator: a causal dilated-convolution stack
//! that maps the feature matrix to complex ratio filters for the speech
//! and noise targets.
//!
//! Output taps pass through a tanh squashed to `+-2` per real/imaginary
//! component, which keeps early training bounded.

use super::autodiff::Tensor;
use super::{layer_norm_channels, prelu, uniform_init};
use crate::masking::MASK_COMPONENT_BOUND;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    /// Input feature dimension D.
    pub feature_dim: usize,
    /// Frequency bins F.
    pub bins: usize,
    /// Convolution channels.
    pub channels: usize,
    /// Kernel size of the dilated convolutions.
    pub kernel: usize,
    /// Dilation schedule within one repeat.
    pub dilations: Vec<usize>,
    /// Number of repeats of the dilation schedule.
    pub repeats: usize,
    /// cRF time half-width L.
    pub time_halfwidth: usize,
    /// cRF frequency half-width K.
    pub freq_halfwidth: usize,
}

impl EstimatorConfig {
    pub fn taps(&self) -> usize {
        (2 * self.time_halfwidth + 1) * (2 * self.freq_halfwidth + 1)
    }

    /// 2 targets x 2 components x taps x bins.
    pub fn out_dim(&self) -> usize {
        4 * self.taps() * self.bins
    }

    /// Frames of look-back that can influence one output frame.
    pub fn receptive_field(&self) -> usize {
        let per_repeat: usize = self.dilations.iter().map(|d| (self.kernel - 1) * d).sum();
        1 + self.repeats * per_repeat
    }
}

struct ConvBlock {
    w: Tensor,
    b: Tensor,
    ln_gamma: Tensor,
    ln_beta: Tensor,
    prelu_a: Tensor,
    dilation: usize,
}

/// Estimated complex ratio filters, `[T, F, taps]` as real/imag pairs.
pub struct CrfEstimate {
    pub speech_re: Tensor,
    pub speech_im: Tensor,
    pub noise_re: Tensor,
    pub noise_im: Tensor,
}

pub struct FilterEstimator {
    pub config: EstimatorConfig,
    in_w: Tensor,
    in_b: Tensor,
    blocks: Vec<ConvBlock>,
    out_w: Tensor,
    out_b: Tensor,
}

impl FilterEstimator {
    pub fn new(config: EstimatorConfig, rng: &mut ChaCha8Rng) -> Self {
        let c = config.channels;
        let in_w = Tensor::param(uniform_init(&[c, config.feature_dim, 1], config.feature_dim, rng));
        let in_b = Tensor::param(uniform_init(&[c], config.feature_dim, rng));
        let mut blocks = Vec::new();
        for _ in 0..config.repeats {
            for &dilation in &config.dilations {
                let fan = c * config.kernel;
                blocks.push(ConvBlock {
                    w: Tensor::param(uniform_init(&[c, c, config.kernel], fan, rng)),
                    b: Tensor::param(uniform_init(&[c], fan, rng)),
                    ln_gamma: Tensor::param(ndarray::ArrayD::from_elem(
                        ndarray::IxDyn(&[c, 1]),
                        1.0,
                    )),
                    ln_beta: Tensor::param(ndarray::ArrayD::zeros(ndarray::IxDyn(&[c, 1]))),
                    prelu_a: Tensor::param(ndarray::ArrayD::from_elem(
                        ndarray::IxDyn(&[1]),
                        0.1,
                    )),
                    dilation,
                });
            }
        }
        let out_dim = config.out_dim();
        let out_w = Tensor::param(uniform_init(&[out_dim, c, 1], c, rng));
        let mut out_b_init = uniform_init(&[out_dim], c, rng);
        // Identity-mask start: bias the real center tap of both targets so
        // the initial filters pass the mixture through. The covariance
        // estimates then carry real spatial structure from step one
        // instead of near-zero noise.
        {
            let (f, taps) = (config.bins, config.taps());
            let center = config.time_halfwidth * (2 * config.freq_halfwidth + 1)
                + config.freq_halfwidth;
            let bias = 0.5f64.atanh(); // 2*tanh(x) == 1
            for fi in 0..f {
                out_b_init[[fi * taps + center]] += bias; // speech re
                out_b_init[[2 * f * taps + fi * taps + center]] += bias; // noise re
            }
        }
        let out_b = Tensor::param(out_b_init);
        FilterEstimator {
            config,
            in_w,
            in_b,
            blocks,
            out_w,
            out_b,
        }
    }

    /// Features `[T, D]` in, bounded cRF taps out. Chunk layout along the
    /// output dimension is `[speech_re | speech_im | noise_re | noise_im]`,
    /// each `F * taps` wide with bins major and taps minor.
    pub fn forward(&self, features: &Tensor) -> CrfEstimate {
        let shape = features.shape();
        assert_eq!(shape.len(), 2, "features must be [T, D]");
        let (t, d) = (shape[0], shape[1]);
        assert_eq!(
            d, self.config.feature_dim,
            "feature dim {d} does not match estimator config {}",
            self.config.feature_dim
        );
        let mut x = features.transpose(&[1, 0]).conv1d(&self.in_w, &self.in_b, 1);
        for block in &self.blocks {
            let y = x.conv1d(&block.w, &block.b, block.dilation);
            let y = layer_norm_channels(&y, &block.ln_gamma, &block.ln_beta, 1e-8);
            let y = prelu(&y, &block.prelu_a);
            x = x.add(&y);
        }
        let out = x
            .conv1d(&self.out_w, &self.out_b, 1)
            .transpose(&[1, 0]); // [T, out_dim]
        let (f, taps) = (self.config.bins, self.config.taps());
        let width = f * taps;
        let squash = |chunk: Tensor| {
            chunk
                .tanh()
                .mul_scalar(MASK_COMPONENT_BOUND)
                .reshape(&[t, f, taps])
        };
        CrfEstimate {
            speech_re: squash(out.slice(1, 0, width)),
            speech_im: squash(out.slice(1, width, width)),
            noise_re: squash(out.slice(1, 2 * width, width)),
            noise_im: squash(out.slice(1, 3 * width, width)),
        }
    }

    pub fn params(&self) -> Vec<(String, Tensor)> {
        let mut out = vec![
            ("estimator.in.w".to_string(), self.in_w.clone()),
            ("estimator.in.b".to_string(), self.in_b.clone()),
        ];
        for (i, blk) in self.blocks.iter().enumerate() {
            out.push((format!("estimator.block{i}.w"), blk.w.clone()));
            out.push((format!("estimator.block{i}.b"), blk.b.clone()));
            out.push((format!("estimator.block{i}.ln_gamma"), blk.ln_gamma.clone()));
            out.push((format!("estimator.block{i}.ln_beta"), blk.ln_beta.clone()));
            out.push((format!("estimator.block{i}.prelu_a"), blk.prelu_a.clone()));
        }
        out.push(("estimator.out.w".to_string(), self.out_w.clone()));
        out.push(("estimator.out.b".to_string(), self.out_b.clone()));
        out
    }
}

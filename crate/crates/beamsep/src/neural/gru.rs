//! GRU layers and the two covariance-stream networks.
//!
//! Sequences run along the time axis with frequency bins batched as rows,
//! matching the frame-recursive use of these networks: each network sees
//! the flattened real/imaginary covariance entries of one frame and
//! carries its hidden state to the next frame. Hidden states start at
//! zero for every utterance and are never carried across utterances.

use super::autodiff::Tensor;
use super::uniform_init;
use rand_chacha::ChaCha8Rng;

/// One GRU layer. Gate order in the stacked matrices is `[r | z | n]`:
///
/// ```text
/// r_t = sigmoid(x W_ir + b_ir + h W_hr + b_hr)
/// z_t = sigmoid(x W_iz + b_iz + h W_hz + b_hz)
/// n_t = tanh(x W_in + b_in + r_t .* (h W_hn + b_hn))
/// h_t = (1 - z_t) .* n_t + z_t .* h_{t-1}
/// ```
#[derive(Clone)]
pub struct GruLayer {
    /// `[input_dim, 3*hidden]`
    pub w_ih: Tensor,
    /// `[hidden, 3*hidden]`
    pub w_hh: Tensor,
    /// `[3*hidden]`
    pub b_ih: Tensor,
    /// `[3*hidden]`
    pub b_hh: Tensor,
    pub input_dim: usize,
    pub hidden_dim: usize,
}

impl GruLayer {
    pub fn new(input_dim: usize, hidden_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        GruLayer {
            w_ih: Tensor::param(uniform_init(&[input_dim, 3 * hidden_dim], input_dim, rng)),
            w_hh: Tensor::param(uniform_init(&[hidden_dim, 3 * hidden_dim], hidden_dim, rng)),
            b_ih: Tensor::param(uniform_init(&[3 * hidden_dim], hidden_dim, rng)),
            b_hh: Tensor::param(uniform_init(&[3 * hidden_dim], hidden_dim, rng)),
            input_dim,
            hidden_dim,
        }
    }

    /// One recurrence step: `x` is `[B, input_dim]`, `h` is `[B, hidden]`.
    pub fn step(&self, x: &Tensor, h: &Tensor) -> Tensor {
        let b = x.shape()[0];
        let hd = self.hidden_dim;
        assert_eq!(
            x.shape()[1],
            self.input_dim,
            "GRU step: input dim mismatch"
        );
        let gi = x
            .matmul(&self.w_ih)
            .add(&self.b_ih.reshape(&[1, 3 * hd]).broadcast_to(&[b, 3 * hd]));
        let gh = h
            .matmul(&self.w_hh)
            .add(&self.b_hh.reshape(&[1, 3 * hd]).broadcast_to(&[b, 3 * hd]));
        let r = gi
            .slice(1, 0, hd)
            .add(&gh.slice(1, 0, hd))
            .sigmoid();
        let z = gi
            .slice(1, hd, hd)
            .add(&gh.slice(1, hd, hd))
            .sigmoid();
        let n = gi
            .slice(1, 2 * hd, hd)
            .add(&r.mul(&gh.slice(1, 2 * hd, hd)))
            .tanh();
        let one_minus_z = z.neg().add_scalar(1.0);
        one_minus_z.mul(&n).add(&z.mul(h))
    }
}

/// Stacked GRU layers followed by a linear output layer.
#[derive(Clone)]
pub struct GruNet {
    pub name: String,
    pub layers: Vec<GruLayer>,
    /// `[hidden_last, out_dim]`
    pub fc_w: Tensor,
    /// `[out_dim]`
    pub fc_b: Tensor,
    pub out_dim: usize,
}

impl GruNet {
    pub fn new(
        name: impl Into<String>,
        input_dim: usize,
        hidden: &[usize],
        out_dim: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        assert!(!hidden.is_empty(), "GruNet needs at least one GRU layer");
        let mut layers = Vec::with_capacity(hidden.len());
        let mut dim = input_dim;
        for &h in hidden {
            layers.push(GruLayer::new(dim, h, rng));
            dim = h;
        }
        GruNet {
            name: name.into(),
            fc_w: Tensor::param(uniform_init(&[dim, out_dim], dim, rng)),
            fc_b: Tensor::param(uniform_init(&[out_dim], dim, rng)),
            layers,
            out_dim,
        }
    }

    /// Run the whole sequence; `xs[t]` is `[B, input_dim]`. Returns the
    /// per-step linear outputs, each `[B, out_dim]`.
    pub fn forward_seq(&self, xs: &[Tensor]) -> Vec<Tensor> {
        assert!(!xs.is_empty(), "empty sequence");
        let b = xs[0].shape()[0];
        let mut hidden: Vec<Tensor> = self
            .layers
            .iter()
            .map(|l| Tensor::zeros(&[b, l.hidden_dim]))
            .collect();
        let mut outputs = Vec::with_capacity(xs.len());
        for x in xs {
            let mut cur = x.clone();
            for (li, layer) in self.layers.iter().enumerate() {
                let h_new = layer.step(&cur, &hidden[li]);
                hidden[li] = h_new.clone();
                cur = h_new;
            }
            let out = cur.matmul(&self.fc_w).add(
                &self
                    .fc_b
                    .reshape(&[1, self.out_dim])
                    .broadcast_to(&[b, self.out_dim]),
            );
            outputs.push(out);
        }
        outputs
    }

    /// Sequence forward over a `[T, B, C]` tensor with the per-layer
    /// input projections batched into single matrix products (the
    /// recurrent hidden products stay sequential). Numerically identical
    /// to [`GruNet::forward_seq`]; returns `[T, B, out_dim]`.
    pub fn forward_frames(&self, input: &Tensor) -> Tensor {
        let shape = input.shape();
        assert_eq!(shape.len(), 3, "forward_frames: input must be [T, B, C]");
        let (t, b, _c) = (shape[0], shape[1], shape[2]);
        let mut cur = input.clone();
        for layer in &self.layers {
            let hd = layer.hidden_dim;
            let cin = layer.input_dim;
            let gi_all = cur
                .reshape(&[t * b, cin])
                .matmul(&layer.w_ih)
                .add(
                    &layer
                        .b_ih
                        .reshape(&[1, 3 * hd])
                        .broadcast_to(&[t * b, 3 * hd]),
                )
                .reshape(&[t, b, 3 * hd]);
            let mut h = Tensor::zeros(&[b, hd]);
            let mut outs = Vec::with_capacity(t);
            for ti in 0..t {
                let gi = gi_all.slice(0, ti, 1).reshape(&[b, 3 * hd]);
                let gh = h.matmul(&layer.w_hh).add(
                    &layer
                        .b_hh
                        .reshape(&[1, 3 * hd])
                        .broadcast_to(&[b, 3 * hd]),
                );
                let r = gi.slice(1, 0, hd).add(&gh.slice(1, 0, hd)).sigmoid();
                let z = gi.slice(1, hd, hd).add(&gh.slice(1, hd, hd)).sigmoid();
                let n = gi
                    .slice(1, 2 * hd, hd)
                    .add(&r.mul(&gh.slice(1, 2 * hd, hd)))
                    .tanh();
                h = z.neg().add_scalar(1.0).mul(&n).add(&z.mul(&h));
                outs.push(h.reshape(&[1, b, hd]));
            }
            cur = Tensor::concat(&outs, 0);
        }
        let hd = self.layers.last().unwrap().hidden_dim;
        cur.reshape(&[t * b, hd])
            .matmul(&self.fc_w)
            .add(
                &self
                    .fc_b
                    .reshape(&[1, self.out_dim])
                    .broadcast_to(&[t * b, self.out_dim]),
            )
            .reshape(&[t, b, self.out_dim])
    }

    pub fn params(&self) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            out.push((format!("{}.gru{}.w_ih", self.name, i), l.w_ih.clone()));
            out.push((format!("{}.gru{}.w_hh", self.name, i), l.w_hh.clone()));
            out.push((format!("{}.gru{}.b_ih", self.name, i), l.b_ih.clone()));
            out.push((format!("{}.gru{}.b_hh", self.name, i), l.b_hh.clone()));
        }
        out.push((format!("{}.fc.w", self.name), self.fc_w.clone()));
        out.push((format!("{}.fc.b", self.name), self.fc_b.clone()));
        out
    }
}

/// Layer sizes for the two covariance-stream networks.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct GruNetConfig {
    pub hidden: Vec<usize>,
}

impl GruNetConfig {
    /// Steering-vector network for `mics` channels: input `2*M^2` reals
    /// per frame, output `2*M` reals.
    pub fn build_v_net(&self, mics: usize, rng: &mut ChaCha8Rng) -> GruNet {
        GruNet::new("v_net", 2 * mics * mics, &self.hidden, 2 * mics, rng)
    }

    /// Inverse-covariance network: input and output are `2*M^2` reals.
    pub fn build_inv_net(&self, mics: usize, rng: &mut ChaCha8Rng) -> GruNet {
        GruNet::new("inv_net", 2 * mics * mics, &self.hidden, 2 * mics * mics, rng)
    }
}

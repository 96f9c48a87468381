//! Differentiable end-to-end graphs for every system variant.
//!
//! Complex quantities live as (re, im) tensor pairs ([`Cplx`]); complex
//! products, Hermitian contractions and the linear solve are composed
//! from real autodiff primitives, so one real-valued loss drives the
//! whole chain. The plain modules ([`crate::masking`],
//! [`crate::beamformer`], [`crate::signal`]) implement the same
//! operations on complex arrays; parity between the two routes is pinned
//! by the integration tests.

use crate::error::{Error, Result};
use crate::features::{assemble_features, ArrayGeometry, FeatureSpec};
use crate::masking::NORMALIZER_FLOOR;
use crate::neural::autodiff::{no_grad, Tensor};
use crate::neural::estimator::{CrfEstimate, EstimatorConfig, FilterEstimator};
use crate::neural::gru::GruNet;
use crate::neural::{checkpoint, gru::GruNetConfig};
use crate::signal::{hann_window, stft, MultiWave, Stft, StftConfig, Waveform, SAMPLE_RATE};
use crate::train::config::{ModelConfig, Variant};
use ndarray::{Array2, ArrayD, IxDyn};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Modulus-squared floor for frame-wise weight denominators (the graph
/// analogue of the plain path's 1e-10 modulus floor).
pub const DENOM_FLOOR_SQ: f64 = 1e-20;

/// A complex tensor as a real/imaginary pair of equal shape.
#[derive(Clone)]
pub struct Cplx {
    pub re: Tensor,
    pub im: Tensor,
}

impl Cplx {
    pub fn constant(re: ArrayD<f64>, im: ArrayD<f64>) -> Cplx {
        assert_eq!(re.shape(), im.shape(), "Cplx: re/im shape mismatch");
        Cplx {
            re: Tensor::constant(re),
            im: Tensor::constant(im),
        }
    }

    pub fn shape(&self) -> Vec<usize> {
        self.re.shape()
    }

    pub fn add(&self, o: &Cplx) -> Cplx {
        Cplx {
            re: self.re.add(&o.re),
            im: self.im.add(&o.im),
        }
    }

    /// Elementwise complex product.
    pub fn mul(&self, o: &Cplx) -> Cplx {
        Cplx {
            re: self.re.mul(&o.re).sub(&self.im.mul(&o.im)),
            im: self.re.mul(&o.im).add(&self.im.mul(&o.re)),
        }
    }

    /// Elementwise `conj(self) * o`.
    pub fn conj_mul(&self, o: &Cplx) -> Cplx {
        Cplx {
            re: self.re.mul(&o.re).add(&self.im.mul(&o.im)),
            im: self.re.mul(&o.im).sub(&self.im.mul(&o.re)),
        }
    }

    pub fn norm_sqr(&self) -> Tensor {
        self.re.mul(&self.re).add(&self.im.mul(&self.im))
    }

    pub fn reshape(&self, shape: &[usize]) -> Cplx {
        Cplx {
            re: self.re.reshape(shape),
            im: self.im.reshape(shape),
        }
    }

    pub fn broadcast_to(&self, shape: &[usize]) -> Cplx {
        Cplx {
            re: self.re.broadcast_to(shape),
            im: self.im.broadcast_to(shape),
        }
    }

    pub fn slice(&self, axis: usize, start: usize, len: usize) -> Cplx {
        Cplx {
            re: self.re.slice(axis, start, len),
            im: self.im.slice(axis, start, len),
        }
    }

    pub fn sum_axis(&self, axis: usize) -> Cplx {
        Cplx {
            re: self.re.sum_axis(axis),
            im: self.im.sum_axis(axis),
        }
    }

    /// Divide by a positive real tensor of the same shape.
    pub fn div_real(&self, d: &Tensor) -> Cplx {
        Cplx {
            re: self.re.div(d),
            im: self.im.div(d),
        }
    }

    /// Extract the plain complex values (forward data).
    pub fn to_complex(&self) -> ArrayD<Complex64> {
        let re = self.re.data();
        let im = self.im.data();
        let mut out = ArrayD::from_elem(re.raw_dim(), Complex64::default());
        ndarray::Zip::from(&mut out)
            .and(&*re)
            .and(&*im)
            .for_each(|o, &r, &i| *o = Complex64::new(r, i));
        out
    }
}

/// Constant complex tensor from an ndarray of complex values.
pub fn cplx_const<D: ndarray::Dimension>(a: &ndarray::Array<Complex64, D>) -> Cplx {
    let shape: Vec<usize> = a.shape().to_vec();
    let re = ArrayD::from_shape_vec(IxDyn(&shape), a.iter().map(|z| z.re).collect()).unwrap();
    let im = ArrayD::from_shape_vec(IxDyn(&shape), a.iter().map(|z| z.im).collect()).unwrap();
    Cplx::constant(re, im)
}

/// Counts forward-data entries strictly below `thresh`.
fn count_below(t: &Tensor, thresh: f64) -> usize {
    t.data().iter().filter(|&&v| v < thresh).count()
}

// ---------------------------------------------------------------------
// Graph building blocks
// ---------------------------------------------------------------------

/// Apply a cRF to one channel's stack of shifted spectrogram copies:
/// `sum over taps of filt(t,f,tap) * y_shift(t,f,tap)`.
pub fn crf_apply(filt: &Cplx, y_stack: &Cplx) -> Cplx {
    filt.mul(y_stack).sum_axis(2)
}

/// Stack per-channel `[T, F]` estimates into `[T, F, M]`.
pub fn stack_channels(chans: &[Cplx]) -> Cplx {
    let shape = chans[0].shape();
    let (t, f) = (shape[0], shape[1]);
    let res: Vec<Tensor> = chans.iter().map(|c| c.re.reshape(&[t, f, 1])).collect();
    let ims: Vec<Tensor> = chans.iter().map(|c| c.im.reshape(&[t, f, 1])).collect();
    Cplx {
        re: Tensor::concat(&res, 2),
        im: Tensor::concat(&ims, 2),
    }
}

/// Mask energy normalizer per bin: `max(sum_t |center|^2, floor)`, `[F]`.
fn mask_norm(center: &Cplx) -> Tensor {
    center.norm_sqr().sum_axis(0).max_scalar(NORMALIZER_FLOOR)
}

/// Frame-wise covariance `[T, F, M, M]` from stacked estimates and the
/// center-tap mask; normalizer sums mask energy over all frames.
pub fn framewise_cov_graph(est: &Cplx, center: &Cplx) -> Cplx {
    let shape = est.shape();
    let (t, f, m) = (shape[0], shape[1], shape[2]);
    let sa = est.reshape(&[t, f, m, 1]).broadcast_to(&[t, f, m, m]);
    let sb = est.reshape(&[t, f, 1, m]).broadcast_to(&[t, f, m, m]);
    // (x y^H)re = xr yr + xi yi ; (x y^H)im = xi yr - xr yi
    let re = sa.re.mul(&sb.re).add(&sa.im.mul(&sb.im));
    let im = sa.im.mul(&sb.re).sub(&sa.re.mul(&sb.im));
    let norm = mask_norm(center)
        .reshape(&[1, f, 1, 1])
        .broadcast_to(&[t, f, m, m]);
    Cplx { re, im }.div_real(&norm)
}

/// Utterance covariance `[F, M, M]`: frame outer products summed over
/// time, then normalized by the all-frames mask energy.
pub fn utterance_cov_graph(est: &Cplx, center: &Cplx) -> Cplx {
    let shape = est.shape();
    let (t, f, m) = (shape[0], shape[1], shape[2]);
    let sa = est.reshape(&[t, f, m, 1]).broadcast_to(&[t, f, m, m]);
    let sb = est.reshape(&[t, f, 1, m]).broadcast_to(&[t, f, m, m]);
    let re = sa.re.mul(&sb.re).add(&sa.im.mul(&sb.im)).sum_axis(0);
    let im = sa.im.mul(&sb.re).sub(&sa.re.mul(&sb.im)).sum_axis(0);
    let norm = mask_norm(center).reshape(&[f, 1, 1]).broadcast_to(&[f, m, m]);
    Cplx { re, im }.div_real(&norm)
}

/// Flatten a covariance sequence `[T, F, M, M]` into GRU input
/// `[T, F, 2*M^2]`: real parts first (row-major), then imaginary parts.
pub fn cov_flatten(phi: &Cplx) -> Tensor {
    let shape = phi.shape();
    let (t, f, m) = (shape[0], shape[1], shape[2]);
    let re = phi.re.reshape(&[t, f, m * m]);
    let im = phi.im.reshape(&[t, f, m * m]);
    Tensor::concat(&[re, im], 2)
}

/// Run a GRU network frame by frame over `[T, F, C]` input; returns
/// `[T, F, out_dim]`. Frequency bins ride along as the batch dimension.
pub fn run_gru_over_frames(net: &GruNet, input: &Tensor) -> Tensor {
    net.forward_frames(input)
}

/// Steering-vector network: covariance sequence in, per-frame complex
/// M-vector out (`2M` reals reassembled as re|im).
pub fn grunet_v(net: &GruNet, phi_ss: &Cplx) -> Result<Cplx> {
    let shape = phi_ss.shape();
    let m = shape[2];
    if net.out_dim != 2 * m {
        return Err(Error::ModelMismatch(format!(
            "v-net emits {} values, need 2*M = {}",
            net.out_dim,
            2 * m
        )));
    }
    let out = run_gru_over_frames(net, &cov_flatten(phi_ss));
    Ok(Cplx {
        re: out.slice(2, 0, m),
        im: out.slice(2, m, m),
    })
}

/// Inverse-covariance network: covariance sequence in, per-frame complex
/// M x M matrix out (`2M^2` reals reassembled as re|im, row-major).
pub fn grunet_phinn_inv(net: &GruNet, phi_nn: &Cplx) -> Result<Cplx> {
    let shape = phi_nn.shape();
    let (t, f, m) = (shape[0], shape[1], shape[2]);
    if net.out_dim != 2 * m * m {
        return Err(Error::ModelMismatch(format!(
            "inverse net emits {} values, need 2*M^2 = {}",
            net.out_dim,
            2 * m * m
        )));
    }
    let out = run_gru_over_frames(net, &cov_flatten(phi_nn));
    Ok(Cplx {
        re: out.slice(2, 0, m * m).reshape(&[t, f, m, m]),
        im: out.slice(2, m * m, m * m).reshape(&[t, f, m, m]),
    })
}

/// Frame-wise weights `h = P v / (v^H P v)` with a squared-modulus floor
/// on the denominator. Returns the weights and the floored-bin count.
pub fn adl_weights_graph(p: &Cplx, v: &Cplx) -> (Cplx, usize) {
    let shape = p.shape();
    let (t, f, m) = (shape[0], shape[1], shape[2]);
    let vb = v.reshape(&[t, f, 1, m]).broadcast_to(&[t, f, m, m]);
    let u_re = p.re.mul(&vb.re).sub(&p.im.mul(&vb.im)).sum_axis(3);
    let u_im = p.re.mul(&vb.im).add(&p.im.mul(&vb.re)).sum_axis(3);
    let u = Cplx { re: u_re, im: u_im };
    // v^H u
    let den = v.conj_mul(&u).sum_axis(2);
    let m2_raw = den.norm_sqr();
    let floors = count_below(&m2_raw, DENOM_FLOOR_SQ);
    let m2 = m2_raw
        .max_scalar(DENOM_FLOOR_SQ)
        .reshape(&[t, f, 1])
        .broadcast_to(&[t, f, m]);
    let den_b = den.reshape(&[t, f, 1]).broadcast_to(&[t, f, m]);
    // h = u * conj(den) / |den|^2
    let h_re = u.re.mul(&den_b.re).add(&u.im.mul(&den_b.im)).div(&m2);
    let h_im = u.im.mul(&den_b.re).sub(&u.re.mul(&den_b.im)).div(&m2);
    (Cplx { re: h_re, im: h_im }, floors)
}

/// `s(t,f) = h(t,f)^H y(t,f)`.
pub fn apply_frame_weights_graph(h: &Cplx, y: &Cplx) -> Cplx {
    h.conj_mul(y).sum_axis(2)
}

/// `s(t,f) = h(f)^H y(t,f)` with utterance-level weights `[F, D]`.
pub fn apply_utt_weights_graph(h: &Cplx, y: &Cplx) -> Cplx {
    let yshape = y.shape();
    let (t, f, d) = (yshape[0], yshape[1], yshape[2]);
    let hb = h.reshape(&[1, f, d]).broadcast_to(&[t, f, d]);
    hb.conj_mul(y).sum_axis(2)
}

/// Unrolled power iteration on per-bin Hermitian matrices `[F, M, M]`,
/// started from the first column and gauged so the reference entry is
/// (nearly) real-positive. Returns unit-norm steering vectors `[F, M]`.
pub fn steering_power_iter_graph(phi: &Cplx, iters: usize) -> Cplx {
    let shape = phi.shape();
    let (f, m) = (shape[0], shape[1]);
    let normalize = |v: &Cplx| -> Cplx {
        let n = v
            .norm_sqr()
            .sum_axis(1)
            .max_scalar(1e-30)
            .sqrt()
            .reshape(&[f, 1])
            .broadcast_to(&[f, m]);
        v.div_real(&n)
    };
    let mut v = normalize(&phi.slice(2, 0, 1).reshape(&[f, m]));
    for _ in 0..iters {
        let vb = v.reshape(&[f, 1, m]).broadcast_to(&[f, m, m]);
        let w_re = phi.re.mul(&vb.re).sub(&phi.im.mul(&vb.im)).sum_axis(2);
        let w_im = phi.re.mul(&vb.im).add(&phi.im.mul(&vb.re)).sum_axis(2);
        v = normalize(&Cplx { re: w_re, im: w_im });
    }
    // Phase gauge toward the reference channel: rotate by conj(v0 + d)
    // normalized, with a small real bias so near-zero reference entries
    // degrade to "no rotation" instead of dividing by zero.
    let v0 = v.slice(1, 0, 1);
    let biased_re = v0.re.add_scalar(1e-12);
    let mag = biased_re
        .mul(&biased_re)
        .add(&v0.im.mul(&v0.im))
        .sqrt()
        .broadcast_to(&[f, m]);
    let phase = Cplx {
        re: biased_re.broadcast_to(&[f, m]),
        im: v0.im.neg().broadcast_to(&[f, m]),
    };
    v.mul(&phase).div_real(&mag)
}

/// Utterance MVDR weights from a Hermitian noise covariance `[F, D, D]`
/// and steering `[F, D]` via a diagonally-loaded real-block solve.
/// Returns the weights and the number of bins where the absolute loading
/// floor engaged.
pub fn mvdr_weights_graph(phi_nn: &Cplx, steer: &Cplx, eps_rel: f64) -> (Cplx, usize) {
    let shape = phi_nn.shape();
    let (f, d) = (shape[0], shape[1]);
    let eye = {
        let mut e = ArrayD::zeros(IxDyn(&[1, d, d]));
        for i in 0..d {
            e[[0, i, i]] = 1.0;
        }
        Tensor::constant(e)
    };
    let trace = phi_nn
        .re
        .mul(&eye.broadcast_to(&[f, d, d]))
        .sum_axis(2)
        .sum_axis(1);
    let lam_rel = trace.mul_scalar(eps_rel / d as f64);
    let loading_floors = count_below(&lam_rel, crate::linalg::LOADING_FLOOR);
    let lam = lam_rel.max_scalar(crate::linalg::LOADING_FLOOR);
    let loaded_re = phi_nn.re.add(
        &lam.reshape(&[f, 1, 1])
            .broadcast_to(&[f, d, d])
            .mul(&eye.broadcast_to(&[f, d, d])),
    );
    let loaded_im = phi_nn.im.clone();
    // Real-block embedding [[re, -im], [im, re]].
    let top = Tensor::concat(&[loaded_re.clone(), loaded_im.neg()], 2);
    let bottom = Tensor::concat(&[loaded_im, loaded_re], 2);
    let a = Tensor::concat(&[top, bottom], 1);
    let b = Tensor::concat(&[steer.re.clone(), steer.im.clone()], 1);
    let x = a.solve_batched(&b);
    let xc = Cplx {
        re: x.slice(1, 0, d),
        im: x.slice(1, d, d),
    };
    let den = steer.conj_mul(&xc).sum_axis(1);
    let m2 = den
        .norm_sqr()
        .max_scalar(DENOM_FLOOR_SQ)
        .reshape(&[f, 1])
        .broadcast_to(&[f, d]);
    let den_b = den.reshape(&[f, 1]).broadcast_to(&[f, d]);
    let h_re = xc.re.mul(&den_b.re).add(&xc.im.mul(&den_b.im)).div(&m2);
    let h_im = xc.im.mul(&den_b.re).sub(&xc.re.mul(&den_b.im)).div(&m2);
    (Cplx { re: h_re, im: h_im }, loading_floors)
}

/// Differentiable inverse STFT: one-sided spectra `[T, F]` to a waveform
/// of `(T-1)*hop` samples via constant IDFT matrices, Hann synthesis
/// windowing, overlap-add and the squared-window normalizer.
pub fn istft_graph(spec: &Cplx, cfg: &StftConfig) -> Tensor {
    let shape = spec.shape();
    let (t, f) = (shape[0], shape[1]);
    assert_eq!(f, cfg.bins(), "istft_graph: bin count mismatch");
    let n = cfg.fft_size;
    let w = cfg.frame_len;
    let window = hann_window(w);
    // Real-part IDFT matrices with Hermitian-symmetry weighting.
    let mut c_re = Array2::<f64>::zeros((f, w));
    let mut c_im = Array2::<f64>::zeros((f, w));
    for k in 0..f {
        let weight = if k == 0 || k == f - 1 { 1.0 } else { 2.0 };
        for i in 0..w {
            let theta = 2.0 * std::f64::consts::PI * k as f64 * i as f64 / n as f64;
            c_re[[k, i]] = weight * theta.cos() / n as f64;
            c_im[[k, i]] = if k == 0 {
                0.0
            } else {
                weight * theta.sin() / n as f64
            };
        }
    }
    let c_re = Tensor::constant(c_re.into_dyn());
    let c_im = Tensor::constant(c_im.into_dyn());
    // frames[t, i] = sum_k re*cos - im*sin
    let frames = spec.re.matmul(&c_re).sub(&spec.im.matmul(&c_im));
    let win = Tensor::from_vec(window.clone(), &[1, w]).broadcast_to(&[t, w]);
    let windowed = frames.mul(&win);
    let full = windowed.overlap_add(cfg.hop);
    let pad = w / 2;
    let out_len = (t - 1) * cfg.hop;
    // Per-sample normalizer over the cropped range.
    let padded_len = (t - 1) * cfg.hop + w;
    let mut norm = vec![0.0f64; padded_len];
    for ti in 0..t {
        for i in 0..w {
            norm[ti * cfg.hop + i] += window[i] * window[i];
        }
    }
    let inv_norm: Vec<f64> = (0..out_len)
        .map(|i| 1.0 / norm[pad + i].max(1e-12))
        .collect();
    full.slice(0, pad, out_len)
        .mul(&Tensor::from_vec(inv_norm, &[out_len]))
}

/// Negative Si-SNR as a graph scalar: matches [`crate::metrics::si_snr`]
/// up to a 1e-300 guard in the denominator, clamped to +-60 dB.
pub fn si_snr_loss(est: &Tensor, reference: &[f64]) -> Tensor {
    let n = reference.len();
    assert_eq!(est.shape(), vec![n], "si_snr_loss: length mismatch");
    let mean = reference.iter().sum::<f64>() / n as f64;
    let ref0: Vec<f64> = reference.iter().map(|v| v - mean).collect();
    let rr: f64 = ref0.iter().map(|v| v * v).sum();
    assert!(rr > 0.0, "si_snr_loss: zero reference");
    let ref_t = Tensor::from_vec(ref0, &[n]);
    let est0 = est.sub(&est.mean_all().reshape(&[1]).broadcast_to(&[n]));
    let alpha = est0.mul(&ref_t).sum_all().mul_scalar(1.0 / rr);
    let s_t = alpha.reshape(&[1]).broadcast_to(&[n]).mul(&ref_t);
    let e = est0.sub(&s_t);
    let num = s_t.mul(&s_t).sum_all();
    let den = e.mul(&e).sum_all().add_scalar(1e-300);
    let si = num
        .div(&den)
        .ln()
        .mul_scalar(10.0 / std::f64::consts::LN_10);
    si.min_scalar(crate::metrics::CLAMP_DB)
        .max_scalar(-crate::metrics::CLAMP_DB)
        .neg()
}

// ---------------------------------------------------------------------
// Scene packaging
// ---------------------------------------------------------------------

/// Constant tensors derived from one mixture, ready for any variant's
/// forward graph.
pub struct ScenePack {
    pub t: usize,
    pub f: usize,
    pub m: usize,
    pub stft_cfg: StftConfig,
    /// Per-channel shifted-copy stacks `[T, F, taps]` for cRF application.
    pub y_stack: Vec<Cplx>,
    /// The mixture as `[T, F, M]`.
    pub y_tfm: Cplx,
    /// Multi-tap variants: per-expanded-channel stacks and `[T, F, D]`.
    pub y_exp_stack: Option<Vec<Cplx>>,
    pub y_exp_tfd: Option<Cplx>,
    pub features: Tensor,
    /// Reference waveform trimmed to the iSTFT output length.
    pub reference: Option<Vec<f64>>,
    pub mix_spec: Stft,
}

fn shifted_stack(chan: ndarray::ArrayView2<Complex64>, l: usize, k: usize) -> Cplx {
    let (t, f) = chan.dim();
    let taps = (2 * l + 1) * (2 * k + 1);
    let mut re = ArrayD::zeros(IxDyn(&[t, f, taps]));
    let mut im = ArrayD::zeros(IxDyn(&[t, f, taps]));
    for tau_t in -(l as isize)..=(l as isize) {
        for tau_f in -(k as isize)..=(k as isize) {
            let tap = ((tau_t + l as isize) * (2 * k as isize + 1) + (tau_f + k as isize)) as usize;
            for ti in 0..t as isize {
                let ts = ti + tau_t;
                if ts < 0 || ts >= t as isize {
                    continue;
                }
                for fi in 0..f as isize {
                    let fs = fi + tau_f;
                    if fs < 0 || fs >= f as isize {
                        continue;
                    }
                    let z = chan[[ts as usize, fs as usize]];
                    re[[ti as usize, fi as usize, tap]] = z.re;
                    im[[ti as usize, fi as usize, tap]] = z.im;
                }
            }
        }
    }
    Cplx::constant(re, im)
}

fn spec_to_tfm(spec: &Stft) -> Cplx {
    let (m, t, f) = (spec.num_channels(), spec.num_frames(), spec.num_bins());
    let mut re = ArrayD::zeros(IxDyn(&[t, f, m]));
    let mut im = ArrayD::zeros(IxDyn(&[t, f, m]));
    for mi in 0..m {
        for ti in 0..t {
            for fi in 0..f {
                let z = spec.data[[mi, ti, fi]];
                re[[ti, fi, mi]] = z.re;
                im[[ti, fi, mi]] = z.im;
            }
        }
    }
    Cplx::constant(re, im)
}

impl ScenePack {
    /// Build the constant graph inputs for one scene. `reference` (the
    /// reverberant-clean target at the reference channel) is needed for
    /// training/validation but not for inference.
    pub fn build(
        mixture: &MultiWave,
        reference: Option<&[f64]>,
        doa: f64,
        cfg: &ModelConfig,
    ) -> Result<ScenePack> {
        if mixture.num_channels() != cfg.mics {
            return Err(Error::ModelMismatch(format!(
                "mixture has {} channels, model expects {}",
                mixture.num_channels(),
                cfg.mics
            )));
        }
        let spec = stft(mixture, &cfg.stft)?;
        let (t, f, m) = (spec.num_frames(), spec.num_bins(), spec.num_channels());
        let geometry = ArrayGeometry::uniform_linear(cfg.mics, cfg.spacing_m);
        let fspec = FeatureSpec {
            ipd_encoding: cfg.ipd_encoding,
            ..FeatureSpec::new(geometry)
        };
        let feats = assemble_features(&spec, &fspec, doa)?;
        let features = Tensor::constant(feats.data.into_dyn());
        let (l, k) = (cfg.crf_time_halfwidth, cfg.crf_freq_halfwidth);
        let y_stack: Vec<Cplx> = (0..m)
            .map(|mi| shifted_stack(spec.data.index_axis(ndarray::Axis(0), mi), l, k))
            .collect();
        let y_tfm = spec_to_tfm(&spec);
        let (y_exp_stack, y_exp_tfd) = if cfg.variant == Variant::MultitapMvdr {
            let expanded = crate::beamformer::multitap_expand(&spec, cfg.multitap_taps)?;
            let stacks = (0..expanded.num_channels())
                .map(|mi| shifted_stack(expanded.data.index_axis(ndarray::Axis(0), mi), l, k))
                .collect();
            (Some(stacks), Some(spec_to_tfm(&expanded)))
        } else {
            (None, None)
        };
        let out_len = (t - 1) * cfg.stft.hop;
        let reference = match reference {
            Some(r) => {
                if r.len() < out_len {
                    return Err(Error::ShapeMismatch {
                        context: "ScenePack",
                        expected: format!("reference of at least {out_len} samples"),
                        got: format!("{}", r.len()),
                    });
                }
                Some(r[..out_len].to_vec())
            }
            None => None,
        };
        Ok(ScenePack {
            t,
            f,
            m,
            stft_cfg: cfg.stft,
            y_stack,
            y_tfm,
            y_exp_stack,
            y_exp_tfd,
            features,
            reference,
            mix_spec: spec,
        })
    }
}

// ---------------------------------------------------------------------
// The model: estimator plus optional GRU-Nets, with variant dispatch
// ---------------------------------------------------------------------

/// Numerical-stability counters from one forward pass.
#[derive(Debug, Clone, Copy, Default)]
pub struct ForwardStats {
    /// Frame-wise weight denominators that hit the floor.
    pub denom_floors: usize,
    /// Bins where the absolute diagonal-loading floor engaged.
    pub loading_floors: usize,
}

pub struct Model {
    pub cfg: ModelConfig,
    pub estimator: FilterEstimator,
    pub v_net: Option<GruNet>,
    pub inv_net: Option<GruNet>,
}

impl Model {
    pub fn new(cfg: &ModelConfig, seed: u64) -> Result<Model> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let geometry = ArrayGeometry::uniform_linear(cfg.mics, cfg.spacing_m);
        let fspec = FeatureSpec {
            ipd_encoding: cfg.ipd_encoding,
            ..FeatureSpec::new(geometry)
        };
        let est_cfg = EstimatorConfig {
            feature_dim: fspec.layout(cfg.stft.bins()).total_dim(),
            bins: cfg.stft.bins(),
            channels: cfg.conv_channels,
            kernel: cfg.conv_kernel,
            dilations: cfg.conv_dilations.clone(),
            repeats: cfg.conv_repeats,
            time_halfwidth: cfg.crf_time_halfwidth,
            freq_halfwidth: cfg.crf_freq_halfwidth,
        };
        let estimator = FilterEstimator::new(est_cfg, &mut rng);
        let (v_net, inv_net) = if cfg.variant.uses_gru_nets() {
            let v = GruNetConfig {
                hidden: cfg.v_net_hidden.clone(),
            }
            .build_v_net(cfg.mics, &mut rng);
            let p = GruNetConfig {
                hidden: cfg.inv_net_hidden.clone(),
            }
            .build_inv_net(cfg.mics, &mut rng);
            (Some(v), Some(p))
        } else {
            (None, None)
        };
        Ok(Model {
            cfg: cfg.clone(),
            estimator,
            v_net,
            inv_net,
        })
    }

    pub fn params(&self) -> Vec<(String, Tensor)> {
        let mut out = self.estimator.params();
        if let Some(v) = &self.v_net {
            out.extend(v.params());
        }
        if let Some(p) = &self.inv_net {
            out.extend(p.params());
        }
        out
    }

    /// Mask estimates for the mixture: per-channel speech and noise
    /// estimates plus the center-tap masks.
    fn masked_estimates(
        &self,
        est: &CrfEstimate,
        stacks: &[Cplx],
    ) -> (Vec<Cplx>, Vec<Cplx>) {
        let speech_filt = Cplx {
            re: est.speech_re.clone(),
            im: est.speech_im.clone(),
        };
        let noise_filt = Cplx {
            re: est.noise_re.clone(),
            im: est.noise_im.clone(),
        };
        let speech = stacks.iter().map(|s| crf_apply(&speech_filt, s)).collect();
        let noise = stacks.iter().map(|s| crf_apply(&noise_filt, s)).collect();
        (speech, noise)
    }

    fn center_masks(&self, est: &CrfEstimate) -> (Cplx, Cplx) {
        let shape = est.speech_re.shape();
        let (t, f) = (shape[0], shape[1]);
        let center = {
            let l = self.cfg.crf_time_halfwidth as isize;
            let k = self.cfg.crf_freq_halfwidth as isize;
            ((l * (2 * k + 1)) + k) as usize
        };
        let take = |re: &Tensor, im: &Tensor| Cplx {
            re: re.slice(2, center, 1).reshape(&[t, f]),
            im: im.slice(2, center, 1).reshape(&[t, f]),
        };
        (
            take(&est.speech_re, &est.speech_im),
            take(&est.noise_re, &est.noise_im),
        )
    }

    /// Run the variant's forward graph on a packed scene. Returns the
    /// enhanced single-channel spectrogram `[T, F]` and stability stats.
    pub fn forward_spec(&self, pack: &ScenePack) -> Result<(Cplx, ForwardStats)> {
        let est = self.estimator.forward(&pack.features);
        let mut stats = ForwardStats::default();
        let enhanced = match self.cfg.variant {
            Variant::NnCrm | Variant::NnCrf => {
                let speech_filt = Cplx {
                    re: est.speech_re.clone(),
                    im: est.speech_im.clone(),
                };
                crf_apply(&speech_filt, &pack.y_stack[0])
            }
            Variant::MvdrCrm | Variant::MvdrCrf => {
                let (speech, noise) = self.masked_estimates(&est, &pack.y_stack);
                let (sp_center, nz_center) = self.center_masks(&est);
                let phi_ss = utterance_cov_graph(&stack_channels(&speech), &sp_center);
                let phi_nn = utterance_cov_graph(&stack_channels(&noise), &nz_center);
                let steer = steering_power_iter_graph(&phi_ss, self.cfg.power_iters);
                let (w, lf) = mvdr_weights_graph(&phi_nn, &steer, self.cfg.eps_rel);
                stats.loading_floors = lf;
                apply_utt_weights_graph(&w, &pack.y_tfm)
            }
            Variant::MultitapMvdr => {
                let exp_stacks = pack
                    .y_exp_stack
                    .as_ref()
                    .ok_or_else(|| Error::ModelMismatch("pack lacks multitap stacks".into()))?;
                let y_exp = pack
                    .y_exp_tfd
                    .as_ref()
                    .ok_or_else(|| Error::ModelMismatch("pack lacks multitap tensor".into()))?;
                let (speech, _) = self.masked_estimates(&est, &pack.y_stack);
                let (sp_center, nz_center) = self.center_masks(&est);
                // Steering from the single-tap speech covariance.
                let phi_ss = utterance_cov_graph(&stack_channels(&speech), &sp_center);
                let steer = steering_power_iter_graph(&phi_ss, self.cfg.power_iters);
                // Noise covariance on the delay-expanded channels.
                let noise_filt = Cplx {
                    re: est.noise_re.clone(),
                    im: est.noise_im.clone(),
                };
                let noise_exp: Vec<Cplx> = exp_stacks
                    .iter()
                    .map(|s| crf_apply(&noise_filt, s))
                    .collect();
                let phi_nn = utterance_cov_graph(&stack_channels(&noise_exp), &nz_center);
                let d = self.cfg.multitap_taps * pack.m;
                // Distortionless constraint on the current frame only.
                let steer_padded = Cplx {
                    re: Tensor::concat(
                        &[steer.re.clone(), Tensor::zeros(&[pack.f, d - pack.m])],
                        1,
                    ),
                    im: Tensor::concat(
                        &[steer.im.clone(), Tensor::zeros(&[pack.f, d - pack.m])],
                        1,
                    ),
                };
                let (w, lf) = mvdr_weights_graph(&phi_nn, &steer_padded, self.cfg.eps_rel);
                stats.loading_floors = lf;
                apply_utt_weights_graph(&w, y_exp)
            }
            Variant::AdlMvdr => {
                let (speech, noise) = self.masked_estimates(&est, &pack.y_stack);
                let (sp_center, nz_center) = self.center_masks(&est);
                let phi_ss = framewise_cov_graph(&stack_channels(&speech), &sp_center);
                let phi_nn = framewise_cov_graph(&stack_channels(&noise), &nz_center);
                let v_net = self
                    .v_net
                    .as_ref()
                    .ok_or_else(|| Error::ModelMismatch("adl_mvdr without v-net".into()))?;
                let inv_net = self
                    .inv_net
                    .as_ref()
                    .ok_or_else(|| Error::ModelMismatch("adl_mvdr without inverse net".into()))?;
                let v = grunet_v(v_net, &phi_ss)?;
                let p = grunet_phinn_inv(inv_net, &phi_nn)?;
                let (h, floors) = adl_weights_graph(&p, &v);
                stats.denom_floors = floors;
                apply_frame_weights_graph(&h, &pack.y_tfm)
            }
        };
        Ok((enhanced, stats))
    }

    /// Forward to the time domain.
    pub fn forward_wave(&self, pack: &ScenePack) -> Result<(Tensor, ForwardStats)> {
        let (spec, stats) = self.forward_spec(pack)?;
        Ok((istft_graph(&spec, &pack.stft_cfg), stats))
    }

    /// Forward to the scalar training loss (negative Si-SNR).
    pub fn forward_loss(&self, pack: &ScenePack) -> Result<(Tensor, ForwardStats)> {
        let reference = pack
            .reference
            .as_ref()
            .ok_or_else(|| Error::ModelMismatch("pack has no reference for loss".into()))?;
        let (wave, stats) = self.forward_wave(pack)?;
        Ok((si_snr_loss(&wave, reference), stats))
    }

    /// Inference: enhance a mixture, no gradients recorded.
    pub fn enhance(&self, mixture: &MultiWave, doa: f64) -> Result<(Waveform, ForwardStats)> {
        let pack = ScenePack::build(mixture, None, doa, &self.cfg)?;
        no_grad(|| {
            let (wave, stats) = self.forward_wave(&pack)?;
            let samples: Vec<f64> = wave.data().iter().copied().collect();
            Ok((
                Waveform {
                    samples,
                    rate: SAMPLE_RATE,
                },
                stats,
            ))
        })
    }

    /// Checkpoint the model with its config echoed into the metadata.
    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let geometry = ArrayGeometry::uniform_linear(self.cfg.mics, self.cfg.spacing_m);
        let fspec = FeatureSpec {
            ipd_encoding: self.cfg.ipd_encoding,
            ..FeatureSpec::new(geometry)
        };
        let meta = serde_json::json!({
            "model": serde_json::to_value(&self.cfg)
                .map_err(|e| Error::Checkpoint(e.to_string()))?,
            "feature_layout": serde_json::to_value(fspec.layout(self.cfg.stft.bins()))
                .map_err(|e| Error::Checkpoint(e.to_string()))?,
        });
        checkpoint::save(path, &meta, &self.params())
    }

    /// Rebuild a model from a checkpoint (config echo plus parameters).
    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Model> {
        let ck = checkpoint::load(path)?;
        let cfg: ModelConfig = serde_json::from_value(ck.meta["model"].clone())
            .map_err(|e| Error::Checkpoint(format!("model config: {e}")))?;
        let model = Model::new(&cfg, 0)?;
        ck.load_into(&model.params())?;
        Ok(model)
    }
}

// ---------------------------------------------------------------------

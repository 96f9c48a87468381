//! Beamforming weight computation and application: utterance-level MVDR,
//! multi-tap MVDR on a delay-expanded channel dimension, and the
//! frame-wise composition from network-estimated statistics.

use crate::error::{Error, Result};
use crate::linalg::{self, CVec};
use crate::masking::{CovSeq, UttCov};
use crate::signal::Stft;
use ndarray::Array3;
use num_complex::Complex64;

/// Modulus floor for the frame-wise weight denominator.
pub const DENOMINATOR_FLOOR: f64 = 1e-10;

/// Utterance-level weights, `[bins, D]` with `D = M` or `taps * M`.
#[derive(Debug, Clone)]
pub struct BeamWeightsUtt {
    pub data: ndarray::Array2<Complex64>,
}

/// Frame-wise weights, `[frames, bins, M]`.
#[derive(Debug, Clone)]
pub struct BeamWeightsFrame {
    pub data: Array3<Complex64>,
}

/// Per-bin steering vectors.
#[derive(Debug, Clone)]
pub struct Steering {
    pub vectors: Vec<CVec>,
}

/// MVDR weights from the noise covariance and steering vector:
/// `h(f) = phi_nn^-1 v / (v^H phi_nn^-1 v)`, via a diagonally-loaded solve.
pub fn mvdr_weights(phi_nn: &UttCov, steer: &Steering, eps_rel: f64) -> Result<BeamWeightsUtt> {
    let bins = phi_nn.num_bins();
    let d = phi_nn.num_channels();
    if steer.vectors.len() != bins {
        return Err(Error::ShapeMismatch {
            context: "mvdr_weights",
            expected: format!("{bins} steering vectors"),
            got: format!("{}", steer.vectors.len()),
        });
    }
    let mut out = ndarray::Array2::zeros((bins, d));
    for f in 0..bins {
        let v = &steer.vectors[f];
        if v.dim() != d {
            return Err(Error::ShapeMismatch {
                context: "mvdr_weights",
                expected: format!("steering dim {d}"),
                got: format!("{} at bin {f}", v.dim()),
            });
        }
        let norm = v.norm();
        if norm < 1e-10 {
            return Err(Error::DegenerateSteering { bin: f, norm });
        }
        let phi = phi_nn.bin(f);
        let x = linalg::solve_loaded(&phi, v, eps_rel)?;
        let den = v.dotc(&x);
        if den.norm() == 0.0 || !den.re.is_finite() || !den.im.is_finite() {
            return Err(Error::DegenerateSteering { bin: f, norm });
        }
        let h = x.scale(den.inv());
        for i in 0..d {
            out[[f, i]] = h.data[i];
        }
    }
    Ok(BeamWeightsUtt { data: out })
}

/// Steering vector per bin: principal eigenvector of the speech covariance.
///
/// After power iteration, the phase is re-gauged to make the reference
/// channel (entry 0) real-positive when it carries meaningful energy, so
/// the beamformed output stays phase-coherent across frequency. Bins where
/// the reference entry is negligible keep the largest-modulus gauge.
pub fn steering_from_cov(phi_ss: &UttCov) -> Result<Steering> {
    let bins = phi_ss.num_bins();
    let mut vectors = Vec::with_capacity(bins);
    for f in 0..bins {
        let phi = phi_ss.bin(f);
        let v = linalg::principal_eigvec(&phi, 1e-8, 200).map_err(|e| match e {
            Error::NonConvergence { max_iter, .. } => Error::NonConvergence {
                max_iter,
                bin: Some(f),
            },
            other => other,
        })?;
        vectors.push(gauge_to_reference(&v));
    }
    Ok(Steering { vectors })
}

pub(crate) fn gauge_to_reference(v: &CVec) -> CVec {
    let n = v.norm();
    let r = v.data[0].norm();
    if n > 0.0 && r > 1e-3 * n {
        let phase = v.data[0] / r;
        v.scale(phase.conj())
    } else {
        v.clone()
    }
}

/// Stack a spectrogram with delayed copies of itself: output channel
/// `d*M + m` holds channel `m` delayed by `d` frames (zeros before the
/// signal starts). `taps = 1` is the identity.
pub fn multitap_expand(spec: &Stft, taps: usize) -> Result<Stft> {
    if taps < 1 {
        return Err(Error::InvalidArgument {
            context: "multitap_expand",
            detail: "taps must be >= 1".into(),
        });
    }
    let (m, t, f) = (spec.num_channels(), spec.num_frames(), spec.num_bins());
    let mut data = Array3::zeros((taps * m, t, f));
    for d in 0..taps {
        for mi in 0..m {
            for ti in d..t {
                for fi in 0..f {
                    data[[d * m + mi, ti, fi]] = spec.data[[mi, ti - d, fi]];
                }
            }
        }
    }
    Ok(Stft {
        data,
        frame_len: spec.frame_len,
        hop: spec.hop,
        fft_size: spec.fft_size,
    })
}

/// Expand a steering vector to the multi-tap dimension: the distortionless
/// constraint applies to the current frame, so delayed taps get zeros.
pub fn multitap_steering(steer: &Steering, taps: usize) -> Steering {
    Steering {
        vectors: steer
            .vectors
            .iter()
            .map(|v| {
                let mut data = v.data.clone();
                data.resize(taps * v.dim(), Complex64::default());
                CVec { data }
            })
            .collect(),
    }
}

/// Frame-wise weights from estimated inverse noise covariances and
/// steering vectors: `h(t,f) = P v / (v^H P v)` with the denominator
/// floored at [`DENOMINATOR_FLOOR`] in modulus. Returns the weights and
/// the number of floored denominators.
pub fn adl_weights(
    phi_nn_inv: &CovSeq,
    steer: &Array3<Complex64>,
) -> Result<(BeamWeightsFrame, usize)> {
    let (t, f, m, _) = phi_nn_inv.data.dim();
    if steer.dim() != (t, f, m) {
        return Err(Error::ShapeMismatch {
            context: "adl_weights",
            expected: format!("steering [T={t}, F={f}, M={m}]"),
            got: format!("{:?}", steer.dim()),
        });
    }
    let mut out = Array3::zeros((t, f, m));
    let mut floored = 0usize;
    for ti in 0..t {
        for fi in 0..f {
            let mut u = vec![Complex64::default(); m];
            for i in 0..m {
                let mut acc = Complex64::default();
                for j in 0..m {
                    acc += phi_nn_inv.data[[ti, fi, i, j]] * steer[[ti, fi, j]];
                }
                u[i] = acc;
            }
            let mut den = Complex64::default();
            for i in 0..m {
                den += steer[[ti, fi, i]].conj() * u[i];
            }
            let dmod = den.norm();
            let den = if dmod < DENOMINATOR_FLOOR {
                floored += 1;
                if dmod == 0.0 {
                    Complex64::new(DENOMINATOR_FLOOR, 0.0)
                } else {
                    den * (DENOMINATOR_FLOOR / dmod)
                }
            } else {
                den
            };
            for i in 0..m {
                let h = u[i] / den;
                if !h.re.is_finite() || !h.im.is_finite() {
                    return Err(Error::NonFiniteWeight { frame: ti, bin: fi });
                }
                out[[ti, fi, i]] = h;
            }
        }
    }
    Ok((BeamWeightsFrame { data: out }, floored))
}

/// Apply utterance-level weights: `s(t,f) = h(f)^H Y(t,f)`.
pub fn apply_weights_utt(w: &BeamWeightsUtt, spec: &Stft) -> Result<Stft> {
    let (bins, d) = w.data.dim();
    if spec.num_bins() != bins || spec.num_channels() != d {
        return Err(Error::ShapeMismatch {
            context: "apply_weights_utt",
            expected: format!("spectrogram [{d} ch, *, {bins} bins]"),
            got: format!(
                "[{} ch, *, {} bins]",
                spec.num_channels(),
                spec.num_bins()
            ),
        });
    }
    let t = spec.num_frames();
    let mut data = Array3::zeros((1, t, bins));
    for ti in 0..t {
        for fi in 0..bins {
            let mut acc = Complex64::default();
            for m in 0..d {
                acc += w.data[[fi, m]].conj() * spec.data[[m, ti, fi]];
            }
            data[[0, ti, fi]] = acc;
        }
    }
    Ok(Stft {
        data,
        frame_len: spec.frame_len,
        hop: spec.hop,
        fft_size: spec.fft_size,
    })
}

/// Apply frame-wise weights: `s(t,f) = h(t,f)^H Y(t,f)`.
pub fn apply_weights_frame(w: &BeamWeightsFrame, spec: &Stft) -> Result<Stft> {
    let (t, f, m) = w.data.dim();
    if spec.num_frames() != t || spec.num_bins() != f || spec.num_channels() != m {
        return Err(Error::ShapeMismatch {
            context: "apply_weights_frame",
            expected: format!("spectrogram [{m} ch, {t} frames, {f} bins]"),
            got: format!(
                "[{} ch, {} frames, {} bins]",
                spec.num_channels(),
                spec.num_frames(),
                spec.num_bins()
            ),
        });
    }
    let mut data = Array3::zeros((1, t, f));
    for ti in 0..t {
        for fi in 0..f {
            let mut acc = Complex64::default();
            for mi in 0..m {
                acc += w.data[[ti, fi, mi]].conj() * spec.data[[mi, ti, fi]];
            }
            data[[0, ti, fi]] = acc;
        }
    }
    Ok(Stft {
        data,
        frame_len: spec.frame_len,
        hop: spec.hop,
        fft_size: spec.fft_size,
    })
}

/// Max over bins of `|h^H v - 1|`; diagnostic for the distortionless
/// constraint.
pub fn distortionless_defect(w: &BeamWeightsUtt, steer: &Steering) -> f64 {
    let mut worst = 0.0f64;
    for (f, v) in steer.vectors.iter().enumerate() {
        let mut acc = Complex64::default();
        for i in 0..v.dim() {
            acc += w.data[[f, i]].conj() * v.data[i];
        }
        worst = worst.max((acc - Complex64::new(1.0, 0.0)).norm());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::outer;
    use ndarray::Array4;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn identity_cov(bins: usize, m: usize, scale: f64) -> UttCov {
        let mut data = Array3::zeros((bins, m, m));
        for f in 0..bins {
            for i in 0..m {
                data[[f, i, i]] = c(scale, 0.0);
            }
        }
        UttCov { data }
    }

    fn basis_steering(bins: usize, m: usize) -> Steering {
        Steering {
            vectors: (0..bins).map(|_| CVec::unit(m, 0)).collect(),
        }
    }

    #[test]
    fn white_noise_reference_channel() {
        let phi = identity_cov(3, 4, 1.0);
        let steer = basis_steering(3, 4);
        let w = mvdr_weights(&phi, &steer, 1e-6).unwrap();
        for f in 0..3 {
            assert!((w.data[[f, 0]] - c(1.0, 0.0)).norm() < 1e-8);
            for i in 1..4 {
                assert!(w.data[[f, i]].norm() < 1e-10);
            }
        }
    }

    #[test]
    fn weights_invariant_to_covariance_scaling() {
        let phi1 = identity_cov(2, 3, 1.0);
        let phi2 = identity_cov(2, 3, 2.0);
        let steer = basis_steering(2, 3);
        let w1 = mvdr_weights(&phi1, &steer, 1e-6).unwrap();
        let w2 = mvdr_weights(&phi2, &steer, 1e-6).unwrap();
        for (a, b) in w1.data.iter().zip(w2.data.iter()) {
            assert!((a - b).norm() < 1e-8);
        }
    }

    #[test]
    fn degenerate_steering_names_the_bin() {
        let phi = identity_cov(2, 2, 1.0);
        let steer = Steering {
            vectors: vec![CVec::unit(2, 0), CVec::zeros(2)],
        };
        match mvdr_weights(&phi, &steer, 1e-6) {
            Err(Error::DegenerateSteering { bin, .. }) => assert_eq!(bin, 1),
            other => panic!("expected degenerate steering, got {other:?}"),
        }
    }

    #[test]
    fn steering_from_rank_one_cov() {
        let a = CVec {
            data: vec![c(1.0, 0.2), c(-0.3, 0.8), c(0.5, -0.5)],
        };
        let m = outer(&a, &a);
        let mut data = Array3::zeros((1, 3, 3));
        for i in 0..3 {
            for j in 0..3 {
                data[[0, i, j]] = m[(i, j)];
            }
        }
        let steer = steering_from_cov(&UttCov { data }).unwrap();
        let v = &steer.vectors[0];
        // Proportional to a up to phase: check |<v, a>| = |v||a|.
        let ip = v.dotc(&a).norm();
        assert!((ip - v.norm() * a.norm()).abs() < 1e-7);
        // Reference gauge: entry 0 real-positive.
        assert!(v.data[0].im.abs() < 1e-9);
        assert!(v.data[0].re > 0.0);
    }

    #[test]
    fn steering_from_identity_does_not_crash() {
        let phi = identity_cov(2, 3, 1.0);
        let steer = steering_from_cov(&phi).unwrap();
        for v in &steer.vectors {
            assert!((v.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn multitap_one_is_identity() {
        let mut data = Array3::zeros((2, 3, 2));
        for (i, z) in data.iter_mut().enumerate() {
            *z = c(i as f64, -(i as f64));
        }
        let spec = Stft {
            data,
            frame_len: 512,
            hop: 256,
            fft_size: 512,
        };
        let out = multitap_expand(&spec, 1).unwrap();
        assert_eq!(out.data, spec.data);
        assert!(multitap_expand(&spec, 0).is_err());
    }

    #[test]
    fn multitap_two_pads_first_frame() {
        let mut data = Array3::zeros((2, 3, 1));
        for m in 0..2 {
            for t in 0..3 {
                data[[m, t, 0]] = c((m + 10 * t) as f64, 0.0);
            }
        }
        let spec = Stft {
            data,
            frame_len: 512,
            hop: 256,
            fft_size: 512,
        };
        let out = multitap_expand(&spec, 2).unwrap();
        assert_eq!(out.num_channels(), 4);
        // Delayed block is zero at frame 0 and shifted elsewhere.
        for m in 0..2 {
            assert_eq!(out.data[[2 + m, 0, 0]], c(0.0, 0.0));
            assert_eq!(out.data[[2 + m, 1, 0]], spec.data[[m, 0, 0]]);
            assert_eq!(out.data[[2 + m, 2, 0]], spec.data[[m, 1, 0]]);
            for t in 0..3 {
                assert_eq!(out.data[[m, t, 0]], spec.data[[m, t, 0]]);
            }
        }
    }

    #[test]
    fn adl_identity_inverse_reference_steering() {
        let (t, f, m) = (3, 2, 3);
        let mut inv = Array4::zeros((t, f, m, m));
        for ti in 0..t {
            for fi in 0..f {
                for i in 0..m {
                    inv[[ti, fi, i, i]] = c(1.0, 0.0);
                }
            }
        }
        let mut steer = Array3::zeros((t, f, m));
        for ti in 0..t {
            for fi in 0..f {
                steer[[ti, fi, 0]] = c(1.0, 0.0);
            }
        }
        let (w, floored) = adl_weights(&CovSeq { data: inv }, &steer).unwrap();
        assert_eq!(floored, 0);
        for ti in 0..t {
            for fi in 0..f {
                assert!((w.data[[ti, fi, 0]] - c(1.0, 0.0)).norm() < 1e-12);
                assert!(w.data[[ti, fi, 1]].norm() < 1e-12);
            }
        }
    }

    #[test]
    fn adl_distortionless_holds_for_arbitrary_outputs() {
        // Whatever the "networks" emit, h^H v = 1 by construction.
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let (t, f, m) = (4, 3, 3);
        let mut inv = Array4::zeros((t, f, m, m));
        let mut steer = Array3::zeros((t, f, m));
        for z in inv.iter_mut() {
            *z = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        for z in steer.iter_mut() {
            *z = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        let (w, _) = adl_weights(&CovSeq { data: inv }, &steer).unwrap();
        for ti in 0..t {
            for fi in 0..f {
                let mut acc = Complex64::default();
                for i in 0..m {
                    acc += w.data[[ti, fi, i]].conj() * steer[[ti, fi, i]];
                }
                assert!(
                    (acc - c(1.0, 0.0)).norm() < 1e-6,
                    "h^H v = {acc} at ({ti},{fi})"
                );
            }
        }
    }

    #[test]
    fn adl_floors_tiny_denominators() {
        let (t, f, m) = (1, 1, 2);
        let inv = Array4::zeros((t, f, m, m));
        let mut steer = Array3::zeros((t, f, m));
        steer[[0, 0, 0]] = c(1.0, 0.0);
        let (w, floored) = adl_weights(&CovSeq { data: inv }, &steer).unwrap();
        assert_eq!(floored, 1);
        assert!(w.data.iter().all(|z| z.re.is_finite() && z.im.is_finite()));
    }

    #[test]
    fn reference_selector_weights() {
        let mut data = Array3::zeros((2, 2, 2));
        for (i, z) in data.iter_mut().enumerate() {
            *z = c(i as f64 + 1.0, -0.5 * i as f64);
        }
        let spec = Stft {
            data,
            frame_len: 512,
            hop: 256,
            fft_size: 512,
        };
        let mut w = ndarray::Array2::zeros((2, 2));
        w[[0, 0]] = c(1.0, 0.0);
        w[[1, 0]] = c(1.0, 0.0);
        let out = apply_weights_utt(&BeamWeightsUtt { data: w }, &spec).unwrap();
        for t in 0..2 {
            for f in 0..2 {
                assert_eq!(out.data[[0, t, f]], spec.data[[0, t, f]]);
            }
        }
    }

    #[test]
    fn weight_phase_conjugates_in_output() {
        let spec = Stft {
            data: Array3::from_elem((1, 1, 1), c(1.0, 0.0)),
            frame_len: 512,
            hop: 256,
            fft_size: 512,
        };
        let phi = std::f64::consts::FRAC_PI_3;
        let w = BeamWeightsUtt {
            data: ndarray::Array2::from_elem((1, 1), Complex64::from_polar(1.0, phi)),
        };
        let out = apply_weights_utt(&w, &spec).unwrap();
        let expect = Complex64::from_polar(1.0, -phi);
        assert!((out.data[[0, 0, 0]] - expect).norm() < 1e-12);
    }
}

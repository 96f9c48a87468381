//! Complex ratio masks/filters and speech/noise spatial covariance
//! estimation at utterance and frame level.
//!
//! A single complex mask (or filter) is shared across all channels; the
//! frame-level covariance keeps the per-frame outer product but normalizes
//! by the mask energy summed over all frames, with an optional per-frame
//! alternative behind [`CovNorm::PerFrame`].

use crate::error::{Error, Result};
use crate::signal::Stft;
use ndarray::{Array2, Array3, Array4};
use num_complex::Complex64;

/// Floor applied to covariance normalizers on silent bins.
pub const NORMALIZER_FLOOR: f64 = 1e-10;

/// Bound on each real/imaginary tap component produced by the estimator.
pub const MASK_COMPONENT_BOUND: f64 = 2.0;

/// Complex ratio mask, `[frames, bins]`, shared across channels.
#[derive(Debug, Clone)]
pub struct CrMask {
    pub data: Array2<Complex64>,
}

impl CrMask {
    pub fn ones(t: usize, f: usize) -> Self {
        CrMask {
            data: Array2::from_elem((t, f), Complex64::new(1.0, 0.0)),
        }
    }
}

/// Complex ratio filter: `(2L+1) x (2K+1)` taps per T-F bin,
/// `[frames, bins, taps]`. Tap `(tau_t, tau_f)` lives at index
/// `(tau_t + L) * (2K+1) + (tau_f + K)`.
#[derive(Debug, Clone)]
pub struct CrFilter {
    pub data: Array3<Complex64>,
    /// Time half-width L.
    pub l: usize,
    /// Frequency half-width K.
    pub k: usize,
}

impl CrFilter {
    pub fn num_taps(&self) -> usize {
        (2 * self.l + 1) * (2 * self.k + 1)
    }

    pub fn tap_index(&self, tau_t: isize, tau_f: isize) -> usize {
        ((tau_t + self.l as isize) * (2 * self.k as isize + 1) + (tau_f + self.k as isize)) as usize
    }

    pub fn center_index(&self) -> usize {
        self.tap_index(0, 0)
    }

    /// The center-tap mask `M(t,f)`, used for covariance normalization.
    pub fn center_mask(&self) -> CrMask {
        let c = self.center_index();
        CrMask {
            data: self.data.index_axis(ndarray::Axis(2), c).to_owned(),
        }
    }

    /// Wrap a mask as a single-tap filter (L = K = 0).
    pub fn from_mask(mask: &CrMask) -> Self {
        let (t, f) = mask.data.dim();
        let mut data = Array3::zeros((t, f, 1));
        data.index_axis_mut(ndarray::Axis(2), 0).assign(&mask.data);
        CrFilter { data, l: 0, k: 0 }
    }
}

/// Utterance-level covariance, `[bins, M, M]`, Hermitian per bin.
#[derive(Debug, Clone)]
pub struct UttCov {
    pub data: Array3<Complex64>,
}

impl UttCov {
    pub fn num_bins(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn num_channels(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn bin(&self, f: usize) -> crate::linalg::CMat {
        let m = self.num_channels();
        let mut out = crate::linalg::CMat::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                out[(i, j)] = self.data[[f, i, j]];
            }
        }
        out
    }
}

/// Frame-level covariance sequence, `[frames, bins, M, M]`.
#[derive(Debug, Clone)]
pub struct CovSeq {
    pub data: Array4<Complex64>,
}

impl CovSeq {
    pub fn num_frames(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn num_bins(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn num_channels(&self) -> usize {
        self.data.shape()[2]
    }

    pub fn slice(&self, t: usize, f: usize) -> crate::linalg::CMat {
        let m = self.num_channels();
        let mut out = crate::linalg::CMat::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                out[(i, j)] = self.data[[t, f, i, j]];
            }
        }
        out
    }

    /// Mean over frames, per bin.
    pub fn mean_over_frames(&self) -> UttCov {
        let (t, f, m, _) = self.data.dim();
        let mut out = Array3::<Complex64>::zeros((f, m, m));
        for ti in 0..t {
            for fi in 0..f {
                for i in 0..m {
                    for j in 0..m {
                        out[[fi, i, j]] += self.data[[ti, fi, i, j]];
                    }
                }
            }
        }
        out.mapv_inplace(|z| z / t as f64);
        UttCov { data: out }
    }
}

/// Normalizer convention for the frame-level covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CovNorm {
    /// Mask energy summed over all frames (the default).
    #[default]
    AllFrames,
    /// Mask energy of the current frame only (ablation alternative).
    PerFrame,
}

fn check_tf(context: &'static str, spec: &Stft, t: usize, f: usize) -> Result<()> {
    if spec.num_frames() != t || spec.num_bins() != f {
        return Err(Error::ShapeMismatch {
            context,
            expected: format!("[T={t}, F={f}]"),
            got: format!("[T={}, F={}]", spec.num_frames(), spec.num_bins()),
        });
    }
    Ok(())
}

/// Apply a complex ratio mask: `out_m(t,f) = mask(t,f) * Y_m(t,f)`.
pub fn apply_crm(mask: &CrMask, spec: &Stft) -> Result<Stft> {
    let (t, f) = mask.data.dim();
    check_tf("apply_crm", spec, t, f)?;
    let mut out = spec.clone();
    for m in 0..spec.num_channels() {
        for ti in 0..t {
            for fi in 0..f {
                out.data[[m, ti, fi]] = mask.data[[ti, fi]] * spec.data[[m, ti, fi]];
            }
        }
    }
    Ok(out)
}

/// Apply a complex ratio filter: for each T-F bin, sum the tap-weighted
/// shifted spectrogram values over the `(2L+1) x (2K+1)` neighborhood,
/// zero-padded outside the spectrogram.
pub fn apply_crf(filt: &CrFilter, spec: &Stft) -> Result<Stft> {
    let (t, f, taps) = filt.data.dim();
    check_tf("apply_crf", spec, t, f)?;
    if taps != filt.num_taps() {
        return Err(Error::ShapeMismatch {
            context: "apply_crf",
            expected: format!("{} taps", filt.num_taps()),
            got: format!("{taps}"),
        });
    }
    let channels = spec.num_channels();
    let mut out = spec.clone();
    out.data.fill(Complex64::default());
    let (l, k) = (filt.l as isize, filt.k as isize);
    for m in 0..channels {
        for ti in 0..t {
            for fi in 0..f {
                let mut acc = Complex64::default();
                for tau_t in -l..=l {
                    let ts = ti as isize + tau_t;
                    if ts < 0 || ts >= t as isize {
                        continue;
                    }
                    for tau_f in -k..=k {
                        let fs = fi as isize + tau_f;
                        if fs < 0 || fs >= f as isize {
                            continue;
                        }
                        let tap = filt.tap_index(tau_t, tau_f);
                        acc += filt.data[[ti, fi, tap]] * spec.data[[m, ts as usize, fs as usize]];
                    }
                }
                out.data[[m, ti, fi]] = acc;
            }
        }
    }
    Ok(out)
}

/// Mask energy summed over frames, per bin, floored.
fn mask_energy_per_bin(mask: &CrMask) -> (Vec<f64>, bool) {
    let (t, f) = mask.data.dim();
    let mut floored = false;
    let norms = (0..f)
        .map(|fi| {
            let e: f64 = (0..t).map(|ti| mask.data[[ti, fi]].norm_sqr()).sum();
            if e < NORMALIZER_FLOOR {
                floored = true;
                NORMALIZER_FLOOR
            } else {
                e
            }
        })
        .collect();
    (norms, floored)
}

/// Utterance-level covariance of a masked estimate:
/// `phi(f) = sum_t est(t,f) est(t,f)^H / sum_t |mask(t,f)|^2`.
pub fn utterance_cov(est: &Stft, center_mask: &CrMask) -> Result<UttCov> {
    let (t, f) = center_mask.data.dim();
    check_tf("utterance_cov", est, t, f)?;
    let m = est.num_channels();
    let (norms, floored) = mask_energy_per_bin(center_mask);
    if floored {
        log::warn!("utterance_cov: zero mask normalizer on some bins, floored at {NORMALIZER_FLOOR}");
    }
    let mut out = Array3::<Complex64>::zeros((f, m, m));
    for fi in 0..f {
        for ti in 0..t {
            for i in 0..m {
                let si = est.data[[i, ti, fi]];
                for j in 0..m {
                    out[[fi, i, j]] += si * est.data[[j, ti, fi]].conj();
                }
            }
        }
        let d = norms[fi];
        for i in 0..m {
            for j in 0..m {
                out[[fi, i, j]] /= d;
            }
        }
    }
    Ok(UttCov { data: out })
}

/// Frame-level covariance sequence with the default all-frames normalizer.
pub fn framewise_cov(est: &Stft, center_mask: &CrMask) -> Result<CovSeq> {
    framewise_cov_with(est, center_mask, CovNorm::AllFrames)
}

/// Frame-level covariance sequence:
/// `phi(t,f) = est(t,f) est(t,f)^H / norm`, where `norm` sums the mask
/// energy over all frames ([`CovNorm::AllFrames`]) or uses only the
/// current frame ([`CovNorm::PerFrame`]).
pub fn framewise_cov_with(est: &Stft, center_mask: &CrMask, norm: CovNorm) -> Result<CovSeq> {
    let (t, f) = center_mask.data.dim();
    check_tf("framewise_cov", est, t, f)?;
    let m = est.num_channels();
    let (norms, floored) = mask_energy_per_bin(center_mask);
    if floored {
        log::warn!("framewise_cov: zero mask normalizer on some bins, floored at {NORMALIZER_FLOOR}");
    }
    let mut out = Array4::<Complex64>::zeros((t, f, m, m));
    for ti in 0..t {
        for fi in 0..f {
            let d = match norm {
                CovNorm::AllFrames => norms[fi],
                CovNorm::PerFrame => {
                    let e = center_mask.data[[ti, fi]].norm_sqr();
                    if e < NORMALIZER_FLOOR {
                        NORMALIZER_FLOOR
                    } else {
                        e
                    }
                }
            };
            for i in 0..m {
                let si = est.data[[i, ti, fi]];
                for j in 0..m {
                    out[[ti, fi, i, j]] = si * est.data[[j, ti, fi]].conj() / d;
                }
            }
        }
    }
    Ok(CovSeq { data: out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::Stft;
    use ndarray::Array3 as NdArray3;

    fn spec_from_fn(m: usize, t: usize, f: usize, g: impl Fn(usize, usize, usize) -> Complex64) -> Stft {
        let mut data = NdArray3::zeros((m, t, f));
        for mi in 0..m {
            for ti in 0..t {
                for fi in 0..f {
                    data[[mi, ti, fi]] = g(mi, ti, fi);
                }
            }
        }
        Stft {
            data,
            frame_len: 512,
            hop: 256,
            fft_size: 512,
        }
    }

    #[test]
    fn identity_mask_is_identity() {
        let spec = spec_from_fn(2, 3, 4, |m, t, f| {
            Complex64::new((m + t) as f64, f as f64 - 1.0)
        });
        let out = apply_crm(&CrMask::ones(3, 4), &spec).unwrap();
        assert_eq!(out.data, spec.data);
    }

    #[test]
    fn zero_mask_zeroes_output() {
        let spec = spec_from_fn(2, 3, 4, |_, _, _| Complex64::new(1.0, 1.0));
        let mask = CrMask {
            data: Array2::zeros((3, 4)),
        };
        let out = apply_crm(&mask, &spec).unwrap();
        assert!(out.data.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn imaginary_mask_rotates() {
        let spec = spec_from_fn(1, 2, 2, |_, _, _| Complex64::new(1.0, 0.0));
        let mask = CrMask {
            data: Array2::from_elem((2, 2), Complex64::new(0.0, 1.0)),
        };
        let out = apply_crm(&mask, &spec).unwrap();
        for z in out.data.iter() {
            assert!((z - Complex64::new(0.0, 1.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn center_only_crf_equals_crm_bitwise() {
        let spec = spec_from_fn(2, 5, 6, |m, t, f| {
            Complex64::new(
                (m as f64 + 1.3) * (t as f64 - 2.0),
                f as f64 * 0.7 - 1.0,
            )
        });
        let mask = CrMask {
            data: Array2::from_shape_fn((5, 6), |(t, f)| {
                Complex64::new(0.3 * t as f64 - 0.1, 0.2 * f as f64)
            }),
        };
        let single = CrFilter::from_mask(&mask);
        let via_crm = apply_crm(&mask, &spec).unwrap();
        let via_crf = apply_crf(&single, &spec).unwrap();
        assert_eq!(via_crm.data, via_crf.data);
    }

    #[test]
    fn averaging_crf_preserves_constants_in_interior() {
        let c = Complex64::new(2.0, -1.0);
        let spec = spec_from_fn(1, 6, 7, |_, _, _| c);
        let taps = 9;
        let filt = CrFilter {
            data: Array3::from_elem((6, 7, taps), Complex64::new(1.0 / 9.0, 0.0)),
            l: 1,
            k: 1,
        };
        let out = apply_crf(&filt, &spec).unwrap();
        for t in 1..5 {
            for f in 1..6 {
                assert!((out.data[[0, t, f]] - c).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn utterance_cov_single_frame_scalar() {
        let spec = spec_from_fn(1, 1, 1, |_, _, _| Complex64::new(2.0, 0.0));
        let cov = utterance_cov(&spec, &CrMask::ones(1, 1)).unwrap();
        assert!((cov.data[[0, 0, 0]] - Complex64::new(4.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn unit_mask_cov_is_frame_average() {
        let spec = spec_from_fn(2, 4, 3, |m, t, f| {
            Complex64::new((m * t) as f64 + 0.5, f as f64 - (m as f64) * 0.3)
        });
        let cov = utterance_cov(&spec, &CrMask::ones(4, 3)).unwrap();
        // Normalizer is T; compare against the plain frame average.
        for fi in 0..3 {
            for i in 0..2 {
                for j in 0..2 {
                    let mut acc = Complex64::default();
                    for ti in 0..4 {
                        acc += spec.data[[i, ti, fi]] * spec.data[[j, ti, fi]].conj();
                    }
                    acc /= 4.0;
                    assert!((cov.data[[fi, i, j]] - acc).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn framewise_mean_matches_utterance_over_t() {
        let spec = spec_from_fn(2, 5, 3, |m, t, f| {
            Complex64::new(
                (m as f64 - 0.4) * (t as f64 + 1.0) * 0.3,
                (f as f64 + 1.0) * 0.2 - m as f64 * 0.1,
            )
        });
        let mask = CrMask {
            data: Array2::from_shape_fn((5, 3), |(t, f)| {
                Complex64::new(0.5 + 0.1 * t as f64, 0.05 * f as f64)
            }),
        };
        let seq = framewise_cov(&spec, &mask).unwrap();
        let utt = utterance_cov(&spec, &mask).unwrap();
        let mean = seq.mean_over_frames();
        for fi in 0..3 {
            for i in 0..2 {
                for j in 0..2 {
                    let lhs = mean.data[[fi, i, j]];
                    let rhs = utt.data[[fi, i, j]] / 5.0;
                    assert!((lhs - rhs).norm() < 1e-10, "{lhs} vs {rhs}");
                }
            }
        }
    }

    #[test]
    fn framewise_slices_are_rank_one() {
        let spec = spec_from_fn(3, 2, 2, |m, t, f| {
            Complex64::new(m as f64 + t as f64 * 0.5, f as f64 - 0.7)
        });
        let seq = framewise_cov(&spec, &CrMask::ones(2, 2)).unwrap();
        for t in 0..2 {
            for f in 0..2 {
                let s = seq.slice(t, f);
                // Rank 1: the Gram determinant of any 2x2 minor vanishes.
                for i in 0..2 {
                    for j in 0..2 {
                        let det = s[(i, i)] * s[(j, j)] - s[(i, j)] * s[(j, i)];
                        assert!(det.norm() < 1e-8 * s[(i, i)].norm().max(1e-12));
                    }
                }
                assert!(s.hermitian_defect() < 1e-8);
            }
        }
    }

    #[test]
    fn zero_estimate_gives_zero_covseq() {
        let spec = spec_from_fn(2, 3, 3, |_, _, _| Complex64::default());
        let seq = framewise_cov(&spec, &CrMask::ones(3, 3)).unwrap();
        assert!(seq.data.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn covariance_scales_quadratically() {
        let spec = spec_from_fn(2, 3, 2, |m, t, f| {
            Complex64::new(0.3 * (m + 1) as f64 * t as f64, 0.1 * f as f64 + 0.2)
        });
        let mask = CrMask::ones(3, 2);
        let cov1 = utterance_cov(&spec, &mask).unwrap();
        let mut scaled = spec.clone();
        scaled.data.mapv_inplace(|z| z * 3.0);
        let cov2 = utterance_cov(&scaled, &mask).unwrap();
        for (a, b) in cov1.data.iter().zip(cov2.data.iter()) {
            assert!((b - a * 9.0).norm() < 1e-10);
        }
    }

    #[test]
    fn zero_mask_normalizer_is_floored() {
        let spec = spec_from_fn(1, 2, 2, |_, _, _| Complex64::new(1.0, 0.0));
        let mask = CrMask {
            data: Array2::zeros((2, 2)),
        };
        let cov = utterance_cov(&spec, &mask).unwrap();
        assert!(cov.data.iter().all(|z| z.re.is_finite()));
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let spec = spec_from_fn(1, 2, 2, |_, _, _| Complex64::default());
        assert!(apply_crm(&CrMask::ones(3, 2), &spec).is_err());
    }
}

//! Classical beamforming with masks computed from ground truth: the
//! reference upper-ish bound for mask-driven MVDR, free of any learning.

use crate::beamformer::{
    apply_weights_utt, gauge_to_reference, multitap_expand, multitap_steering, mvdr_weights,
    Steering,
};
use crate::error::Result;
use crate::linalg::principal_eigvec;
use crate::masking::{apply_crm, utterance_cov, CrMask, UttCov};
use crate::signal::{istft, stft, MultiWave, Stft, StftConfig, Waveform};
use ndarray::Array2;
use num_complex::Complex64;

/// Modulus bound for oracle complex ratio masks.
pub const ORACLE_MASK_BOUND: f64 = 4.0;

/// Complex ratio masks from ground truth at the reference channel:
/// speech mask `S/Y` and noise mask `(Y-S)/Y`, modulus-clipped.
pub fn oracle_masks(mix: &Stft, target: &Stft, ref_channel: usize) -> (CrMask, CrMask) {
    let (t, f) = (mix.num_frames(), mix.num_bins());
    let clip = |z: Complex64| -> Complex64 {
        let m = z.norm();
        if !m.is_finite() {
            Complex64::default()
        } else if m > ORACLE_MASK_BOUND {
            z * (ORACLE_MASK_BOUND / m)
        } else {
            z
        }
    };
    let mut speech = Array2::default((t, f));
    let mut noise = Array2::default((t, f));
    for ti in 0..t {
        for fi in 0..f {
            let y = mix.data[[ref_channel, ti, fi]];
            let s = target.data[[ref_channel, ti, fi]];
            if y.norm() < 1e-10 {
                speech[[ti, fi]] = Complex64::default();
                noise[[ti, fi]] = Complex64::default();
            } else {
                speech[[ti, fi]] = clip(s / y);
                noise[[ti, fi]] = clip((y - s) / y);
            }
        }
    }
    (CrMask { data: speech }, CrMask { data: noise })
}

/// Per-bin steering with a relaxed retry: bins whose masked speech
/// covariance has a near-degenerate spectrum make tight power iteration
/// fail legitimately; for those, any dominant-subspace vector is equally
/// (un)informative, so a loose pass is accepted instead.
fn robust_steering(phi_ss: &UttCov) -> Steering {
    let vectors = (0..phi_ss.num_bins())
        .map(|f| {
            let phi = phi_ss.bin(f);
            let v = principal_eigvec(&phi, 1e-8, 200)
                .or_else(|_| principal_eigvec(&phi, 0.5, 50))
                .unwrap_or_else(|_| crate::linalg::CVec::unit(phi_ss.num_channels(), 0));
            gauge_to_reference(&v)
        })
        .collect();
    Steering { vectors }
}

/// Enhance a mixture with utterance-level MVDR driven by oracle masks.
/// `taps = 1` is the conventional beamformer; `taps > 1` the multi-tap
/// variant on the delay-expanded channels.
pub fn oracle_mvdr_enhance(
    mixture: &MultiWave,
    target: &MultiWave,
    cfg: &StftConfig,
    taps: usize,
    eps_rel: f64,
) -> Result<Waveform> {
    let mix_spec = stft(mixture, cfg)?;
    let tgt_spec = stft(target, cfg)?;
    let (mask_s, mask_n) = oracle_masks(&mix_spec, &tgt_spec, 0);

    let speech_est = apply_crm(&mask_s, &mix_spec)?;
    let phi_ss = utterance_cov(&speech_est, &mask_s)?;
    let steer = robust_steering(&phi_ss);

    let enhanced_spec = if taps > 1 {
        let expanded = multitap_expand(&mix_spec, taps)?;
        let noise_est = apply_crm(&mask_n, &expanded)?;
        let phi_nn = utterance_cov(&noise_est, &mask_n)?;
        let steer_exp = multitap_steering(&steer, taps);
        let w = mvdr_weights(&phi_nn, &steer_exp, eps_rel)?;
        apply_weights_utt(&w, &expanded)?
    } else {
        let noise_est = apply_crm(&mask_n, &mix_spec)?;
        let phi_nn = utterance_cov(&noise_est, &mask_n)?;
        let w = mvdr_weights(&phi_nn, &steer, eps_rel)?;
        apply_weights_utt(&w, &mix_spec)?
    };
    let wave = istft(&enhanced_spec, cfg)?;
    Ok(wave.channels.into_iter().next().unwrap())
}

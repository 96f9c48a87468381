//! Property tests for the spec-level invariants that hold over whole
//! input families rather than hand-picked cases.

use beamsep::features::wrap_angle;
use beamsep::linalg::{hermitian, inv_loaded, matvec, CMat, CVec};
use beamsep::masking::{apply_crf, apply_crm, framewise_cov, utterance_cov, CrFilter, CrMask};
use beamsep::metrics::si_snr;
use beamsep::signal::Stft;
use ndarray::{Array2, Array3};
use num_complex::Complex64;
use proptest::prelude::*;

fn small_f64() -> impl Strategy<Value = f64> {
    (-1.0f64..1.0).prop_filter("finite", |v| v.is_finite())
}

fn complex_vec(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
    proptest::collection::vec((small_f64(), small_f64()), n)
        .prop_map(|v| v.into_iter().map(|(re, im)| Complex64::new(re, im)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn wrapped_angles_stay_in_range(a in -50.0f64..50.0) {
        let w = wrap_angle(a);
        prop_assert!(w > -std::f64::consts::PI - 1e-12);
        prop_assert!(w <= std::f64::consts::PI + 1e-12);
        // Wrapping preserves the angle modulo 2*pi.
        let diff = (a - w) / (2.0 * std::f64::consts::PI);
        prop_assert!((diff - diff.round()).abs() < 1e-9);
    }

    #[test]
    fn hermitian_is_an_involution(entries in complex_vec(12)) {
        let m = CMat { rows: 3, cols: 4, data: entries };
        let hh = hermitian(&hermitian(&m));
        prop_assert_eq!(hh.data, m.data);
    }

    #[test]
    fn loaded_inverse_is_hermitian_psd(entries in complex_vec(16)) {
        let b = CMat { rows: 4, cols: 4, data: entries };
        let mut a = CMat::zeros(4, 4);
        for i in 0..4 {
            for j in 0..4 {
                let mut acc = Complex64::default();
                for k in 0..4 {
                    acc += b[(i, k)] * b[(j, k)].conj();
                }
                a[(i, j)] = acc;
            }
            a[(i, i)] += Complex64::new(0.05, 0.0);
        }
        let inv = inv_loaded(&a, 1e-6).unwrap();
        prop_assert!(inv.hermitian_defect() < 1e-8);
        // Rayleigh quotients on a few deterministic probes.
        for k in 0..4 {
            let q = CVec::unit(4, k);
            let r = q.dotc(&matvec(&inv, &q).unwrap());
            prop_assert!(r.re >= -1e-8);
        }
    }

    #[test]
    fn single_tap_filter_equals_mask(
        mask_entries in complex_vec(12),
        spec_entries in complex_vec(24),
    ) {
        let (t, f) = (3, 4);
        let mask = CrMask {
            data: Array2::from_shape_vec((t, f), mask_entries).unwrap(),
        };
        let spec = Stft {
            data: Array3::from_shape_vec((2, t, f), spec_entries).unwrap(),
            frame_len: 512,
            hop: 256,
            fft_size: 512,
        };
        let a = apply_crm(&mask, &spec).unwrap();
        let b = apply_crf(&CrFilter::from_mask(&mask), &spec).unwrap();
        prop_assert_eq!(a.data, b.data);
    }

    #[test]
    fn covariances_are_hermitian_and_scale_quadratically(
        mask_entries in complex_vec(12),
        spec_entries in complex_vec(24),
        c in 0.25f64..4.0,
    ) {
        let (t, f) = (3, 4);
        let mask = CrMask {
            data: Array2::from_shape_vec((t, f), mask_entries).unwrap(),
        };
        let spec = Stft {
            data: Array3::from_shape_vec((2, t, f), spec_entries).unwrap(),
            frame_len: 512,
            hop: 256,
            fft_size: 512,
        };
        let est = apply_crm(&mask, &spec).unwrap();
        let utt = utterance_cov(&est, &mask).unwrap();
        for fi in 0..f {
            prop_assert!(utt.bin(fi).hermitian_defect() < 1e-8);
        }
        let seq = framewise_cov(&est, &mask).unwrap();
        for ti in 0..t {
            for fi in 0..f {
                prop_assert!(seq.slice(ti, fi).hermitian_defect() < 1e-8);
            }
        }
        // Scaling the estimate by real c scales covariances by c^2
        // (same mask normalizer).
        let mut scaled = est.clone();
        scaled.data.mapv_inplace(|z| z * c);
        let utt2 = utterance_cov(&scaled, &mask).unwrap();
        for (a, b) in utt.data.iter().zip(utt2.data.iter()) {
            prop_assert!((b - a * c * c).norm() <= 1e-9 * (1.0 + b.norm()));
        }
    }

    #[test]
    fn si_snr_is_scale_invariant(
        reference in proptest::collection::vec(-1.0f64..1.0, 64),
        noise in proptest::collection::vec(-1.0f64..1.0, 64),
        exponent in -6i32..6,
        alpha in prop_oneof![(-8.0f64..-0.125), (0.125f64..8.0)],
    ) {
        let energy: f64 = reference.iter().map(|v| v * v).sum();
        prop_assume!(energy > 1e-6);
        let est: Vec<f64> = reference
            .iter()
            .zip(&noise)
            .map(|(r, n)| r + 0.3 * n)
            .collect();
        let a = si_snr(&est, &reference).unwrap();
        // Power-of-two scales commute with every rounding step: exact.
        let pow2 = (2.0f64).powi(exponent);
        let scaled: Vec<f64> = est.iter().map(|v| pow2 * v).collect();
        prop_assert_eq!(si_snr(&scaled, &reference).unwrap(), a);
        let neg: Vec<f64> = est.iter().map(|v| -v).collect();
        prop_assert_eq!(si_snr(&neg, &reference).unwrap(), a);
        // Arbitrary scales agree to rounding error.
        let scaled: Vec<f64> = est.iter().map(|v| alpha * v).collect();
        let b = si_snr(&scaled, &reference).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
    }
}

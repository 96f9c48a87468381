//! STFT analysis/synthesis roundtrip: transform a signal, invert it, and
//! report the reconstruction error on the interior samples.
//!
//! ```bash
//! cargo run --release --example stft_roundtrip
//! ```

use beamsep::signal::{istft, stft, MultiWave, StftConfig};
use beamsep::simulate::speechlike;

fn main() {
    let cfg = StftConfig::default();
    println!(
        "config: fft {}, frame {} ({} ms), hop {} ({} ms), {} bins",
        cfg.fft_size,
        cfg.frame_len,
        cfg.frame_len * 1000 / 16000,
        cfg.hop,
        cfg.hop * 1000 / 16000,
        cfg.bins()
    );

    let wave = MultiWave::from_mono(speechlike(1.0, 42));
    let spec = stft(&wave, &cfg).unwrap();
    println!(
        "spectrogram: {} channels x {} frames x {} bins",
        spec.num_channels(),
        spec.num_frames(),
        spec.num_bins()
    );

    let back = istft(&spec, &cfg).unwrap();
    let orig = &wave.channels[0].samples;
    let rec = &back.channels[0].samples;
    let lo = cfg.frame_len;
    let hi = rec.len().min(orig.len() - cfg.frame_len);
    let max_err = (lo..hi)
        .map(|i| (orig[i] - rec[i]).abs())
        .fold(0.0f64, f64::max);
    println!("interior reconstruction max abs error: {max_err:.3e}");
    assert!(max_err < 1e-6);
    println!("perfect reconstruction within 1e-6");
}

//! Time/frequency conversion (STFT, iSTFT) and multi-channel WAV I/O.
//!
//! All processing runs at a fixed 16 kHz sample rate. Analysis uses a
//! periodic Hann window with reflect padding of `frame_len/2` samples at
//! both ends, so frame `t` is centered at sample `t * hop`. Synthesis is
//! weighted overlap-add with the same Hann window, normalized per sample
//! by the sum of squared overlapped windows, which gives perfect
//! reconstruction on the interior for any hop with full coverage.

use crate::error::{Error, Result};
use ndarray::Array3;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// The only sample rate this toolkit operates at.
pub const SAMPLE_RATE: u32 = 16_000;

/// Single-channel time-domain signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, rate: u32) -> Result<Self> {
        if rate == 0 {
            return Err(Error::InvalidArgument {
                context: "Waveform::new",
                detail: "rate must be > 0".into(),
            });
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("waveform samples"));
        }
        Ok(Waveform { samples, rate })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.rate as f64
    }
}

/// Multi-channel signal; all channels share length and rate.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiWave {
    pub channels: Vec<Waveform>,
}

impl MultiWave {
    pub fn new(channels: Vec<Waveform>) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::EmptyInput("MultiWave requires at least one channel"));
        }
        let len = channels[0].len();
        let rate = channels[0].rate;
        for (i, ch) in channels.iter().enumerate() {
            if ch.len() != len || ch.rate != rate {
                return Err(Error::ShapeMismatch {
                    context: "MultiWave::new",
                    expected: format!("len={len}, rate={rate}"),
                    got: format!("channel {i}: len={}, rate={}", ch.len(), ch.rate),
                });
            }
        }
        Ok(MultiWave { channels })
    }

    pub fn from_mono(wave: Waveform) -> Self {
        MultiWave {
            channels: vec![wave],
        }
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn rate(&self) -> u32 {
        self.channels[0].rate
    }

    /// Truncate all channels to `len` samples.
    pub fn truncate(&mut self, len: usize) {
        for ch in &mut self.channels {
            ch.samples.truncate(len);
        }
    }
}

/// STFT analysis/synthesis parameters. The window is always periodic Hann.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StftConfig {
    pub fft_size: usize,
    pub frame_len: usize,
    pub hop: usize,
    #[serde(default = "default_window")]
    pub window: WindowKind,
}

fn default_window() -> WindowKind {
    WindowKind::Hann
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    Hann,
}

impl Default for StftConfig {
    /// 512-point FFT, 32 ms Hann window, 16 ms hop at 16 kHz.
    fn default() -> Self {
        StftConfig {
            fft_size: 512,
            frame_len: 512,
            hop: 256,
            window: WindowKind::Hann,
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.frame_len == 0 || self.hop == 0 || self.fft_size == 0 {
            return Err(Error::InvalidArgument {
                context: "StftConfig",
                detail: "fft_size, frame_len and hop must be > 0".into(),
            });
        }
        if self.frame_len > self.fft_size {
            return Err(Error::InvalidArgument {
                context: "StftConfig",
                detail: format!(
                    "frame_len {} exceeds fft_size {}",
                    self.frame_len, self.fft_size
                ),
            });
        }
        if self.frame_len % 2 != 0 {
            return Err(Error::InvalidArgument {
                context: "StftConfig",
                detail: "frame_len must be even (centered framing)".into(),
            });
        }
        Ok(())
    }

    pub fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Number of frames produced for an input of `len` samples after
    /// reflect-padding `frame_len/2` on each side.
    pub fn num_frames(&self, len: usize) -> usize {
        1 + len / self.hop
    }
}

/// Complex spectrogram, `[channels, frames, bins]`.
#[derive(Debug, Clone)]
pub struct Stft {
    pub data: Array3<Complex64>,
    pub frame_len: usize,
    pub hop: usize,
    pub fft_size: usize,
}

impl Stft {
    pub fn num_channels(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn num_frames(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn num_bins(&self) -> usize {
        self.data.shape()[2]
    }

    pub fn matches_config(&self, config: &StftConfig) -> bool {
        self.frame_len == config.frame_len
            && self.hop == config.hop
            && self.fft_size == config.fft_size
    }
}

/// Periodic Hann window of length `n`.
pub fn hann_window(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let x = std::f64::consts::PI * i as f64 / n as f64;
            let s = x.sin();
            s * s
        })
        .collect()
}

/// Reflect-pad `pad` samples at both ends (mirror excluding the edge sample).
fn reflect_pad(x: &[f64], pad: usize) -> Vec<f64> {
    assert!(x.len() > pad, "signal too short for reflect padding");
    let mut out = Vec::with_capacity(x.len() + 2 * pad);
    for i in 0..pad {
        out.push(x[pad - i]);
    }
    out.extend_from_slice(x);
    for i in 0..pad {
        out.push(x[x.len() - 2 - i]);
    }
    out
}

/// Forward STFT of a multi-channel waveform.
pub fn stft(wave: &MultiWave, config: &StftConfig) -> Result<Stft> {
    config.validate()?;
    if wave.rate() != SAMPLE_RATE {
        return Err(Error::UnsupportedRate { rate: wave.rate() });
    }
    let len = wave.len();
    if len == 0 {
        return Err(Error::EmptyInput("stft input"));
    }
    if len < config.frame_len {
        return Err(Error::InvalidArgument {
            context: "stft",
            detail: format!(
                "input length {} shorter than frame_len {}",
                len, config.frame_len
            ),
        });
    }

    let m = wave.num_channels();
    let t_frames = config.num_frames(len);
    let bins = config.bins();
    let window = hann_window(config.frame_len);
    let pad = config.frame_len / 2;

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(config.fft_size);
    let mut buf = vec![Complex64::default(); config.fft_size];

    let mut data = Array3::<Complex64>::zeros((m, t_frames, bins));
    for (ch_idx, ch) in wave.channels.iter().enumerate() {
        let padded = reflect_pad(&ch.samples, pad);
        for t in 0..t_frames {
            let start = t * config.hop;
            for i in 0..config.fft_size {
                buf[i] = if i < config.frame_len {
                    Complex64::new(padded[start + i] * window[i], 0.0)
                } else {
                    Complex64::default()
                };
            }
            fft.process(&mut buf);
            for f in 0..bins {
                data[[ch_idx, t, f]] = buf[f];
            }
        }
    }

    Ok(Stft {
        data,
        frame_len: config.frame_len,
        hop: config.hop,
        fft_size: config.fft_size,
    })
}

/// Inverse STFT by weighted overlap-add.
///
/// Returns `(T - 1) * hop` samples per channel, aligned with the first
/// input sample of the corresponding forward transform. Bins above Nyquist
/// are reconstructed by Hermitian symmetry and any residual imaginary part
/// is discarded.
pub fn istft(spec: &Stft, config: &StftConfig) -> Result<MultiWave> {
    config.validate()?;
    if !spec.matches_config(config) {
        return Err(Error::ConfigMismatch {
            spec_fft: spec.fft_size,
            spec_frame: spec.frame_len,
            spec_hop: spec.hop,
        });
    }
    let m = spec.num_channels();
    let t_frames = spec.num_frames();
    let bins = spec.num_bins();
    let n = config.fft_size;
    let window = hann_window(config.frame_len);
    let pad = config.frame_len / 2;
    let padded_len = (t_frames - 1) * config.hop + config.frame_len;
    let out_len = (t_frames - 1) * config.hop;

    let mut planner = FftPlanner::<f64>::new();
    let ifft = planner.plan_fft_inverse(n);
    let mut buf = vec![Complex64::default(); n];

    // Per-sample normalizer: sum of squared synthesis windows.
    let mut norm = vec![0.0f64; padded_len];
    for t in 0..t_frames {
        let start = t * config.hop;
        for i in 0..config.frame_len {
            norm[start + i] += window[i] * window[i];
        }
    }

    let mut channels = Vec::with_capacity(m);
    for ch in 0..m {
        let mut acc = vec![0.0f64; padded_len];
        for t in 0..t_frames {
            for f in 0..bins {
                buf[f] = spec.data[[ch, t, f]];
            }
            for f in bins..n {
                buf[f] = spec.data[[ch, t, n - f]].conj();
            }
            ifft.process(&mut buf);
            let start = t * config.hop;
            for i in 0..config.frame_len {
                acc[start + i] += buf[i].re / n as f64 * window[i];
            }
        }
        let mut samples = Vec::with_capacity(out_len);
        for i in 0..out_len {
            let p = pad + i;
            let d = if norm[p] > 1e-12 { norm[p] } else { 1e-12 };
            samples.push(acc[p] / d);
        }
        channels.push(Waveform {
            samples,
            rate: SAMPLE_RATE,
        });
    }
    MultiWave::new(channels)
}

/// Sample encodings supported for WAV output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavEncoding {
    Pcm16,
    Float32,
}

/// Read a PCM16 or IEEE-float32 RIFF/WAV file into a `MultiWave`.
pub fn read_wav(path: impl AsRef<Path>) -> Result<MultiWave> {
    let path = path.as_ref();
    let mut reader = hound::WavReader::open(path).map_err(|e| Error::Wav {
        path: path.into(),
        detail: e.to_string(),
    })?;
    let spec = reader.spec();
    if spec.channels == 0 {
        return Err(Error::Wav {
            path: path.into(),
            detail: "zero channels".into(),
        });
    }
    let m = spec.channels as usize;
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| {
                s.map(|v| v as f64 / 32768.0).map_err(|e| Error::Wav {
                    path: path.into(),
                    detail: e.to_string(),
                })
            })
            .collect::<Result<_>>()?,
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| {
                s.map(|v| v as f64).map_err(|e| Error::Wav {
                    path: path.into(),
                    detail: e.to_string(),
                })
            })
            .collect::<Result<_>>()?,
        (fmt, bits) => {
            return Err(Error::UnsupportedEncoding {
                path: path.into(),
                detail: format!("{fmt:?} {bits}-bit"),
            })
        }
    };
    let frames = interleaved.len() / m;
    let mut channels = vec![Vec::with_capacity(frames); m];
    for (i, v) in interleaved.iter().enumerate() {
        channels[i % m].push(*v);
    }
    MultiWave::new(
        channels
            .into_iter()
            .map(|samples| Waveform {
                samples,
                rate: spec.sample_rate,
            })
            .collect(),
    )
}

/// Write a `MultiWave` as a little-endian RIFF/WAV file.
pub fn write_wav(path: impl AsRef<Path>, wave: &MultiWave, encoding: WavEncoding) -> Result<()> {
    let path = path.as_ref();
    let spec = hound::WavSpec {
        channels: wave.num_channels() as u16,
        sample_rate: wave.rate(),
        bits_per_sample: match encoding {
            WavEncoding::Pcm16 => 16,
            WavEncoding::Float32 => 32,
        },
        sample_format: match encoding {
            WavEncoding::Pcm16 => hound::SampleFormat::Int,
            WavEncoding::Float32 => hound::SampleFormat::Float,
        },
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| Error::Wav {
        path: path.into(),
        detail: e.to_string(),
    })?;
    let len = wave.len();
    for i in 0..len {
        for ch in &wave.channels {
            let v = ch.samples[i];
            let res = match encoding {
                WavEncoding::Pcm16 => {
                    let q = (v * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                    writer.write_sample(q)
                }
                WavEncoding::Float32 => writer.write_sample(v as f32),
            };
            res.map_err(|e| Error::Wav {
                path: path.into(),
                detail: e.to_string(),
            })?;
        }
    }
    writer.finalize().map_err(|e| Error::Wav {
        path: path.into(),
        detail: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn noise(len: usize, seed: u64) -> Waveform {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Waveform {
            samples: (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            rate: SAMPLE_RATE,
        }
    }

    #[test]
    fn default_config_gives_257_bins() {
        let cfg = StftConfig::default();
        assert_eq!(cfg.bins(), 257);
        let w = MultiWave::from_mono(noise(16000, 1));
        let spec = stft(&w, &cfg).unwrap();
        assert_eq!(spec.num_bins(), 257);
        assert_eq!(spec.num_frames(), 63);
    }

    #[test]
    fn zero_input_gives_zero_stft() {
        let cfg = StftConfig::default();
        let w = MultiWave::from_mono(Waveform {
            samples: vec![0.0; 8000],
            rate: SAMPLE_RATE,
        });
        let spec = stft(&w, &cfg).unwrap();
        assert!(spec.data.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn zero_spectrogram_gives_zero_waveform() {
        let cfg = StftConfig::default();
        let spec = Stft {
            data: Array3::zeros((1, 10, cfg.bins())),
            frame_len: cfg.frame_len,
            hop: cfg.hop,
            fft_size: cfg.fft_size,
        };
        let out = istft(&spec, &cfg).unwrap();
        assert!(out.channels[0].samples.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn roundtrip_interior_error_below_1e6() {
        let cfg = StftConfig::default();
        let w = MultiWave::from_mono(noise(16000, 2));
        let spec = stft(&w, &cfg).unwrap();
        let back = istft(&spec, &cfg).unwrap();
        let orig = &w.channels[0].samples;
        let rec = &back.channels[0].samples;
        let lo = cfg.frame_len;
        let hi = orig.len() - cfg.frame_len;
        let max_err = (lo..hi.min(rec.len()))
            .map(|i| (orig[i] - rec[i]).abs())
            .fold(0.0f64, f64::max);
        assert!(max_err < 1e-6, "max roundtrip error {max_err}");
    }

    #[test]
    fn multichannel_matches_per_channel() {
        let cfg = StftConfig::default();
        let a = noise(8000, 3);
        let b = noise(8000, 4);
        let multi = MultiWave::new(vec![a.clone(), b.clone()]).unwrap();
        let spec_multi = stft(&multi, &cfg).unwrap();
        let spec_a = stft(&MultiWave::from_mono(a), &cfg).unwrap();
        let spec_b = stft(&MultiWave::from_mono(b), &cfg).unwrap();
        for t in 0..spec_multi.num_frames() {
            for f in 0..spec_multi.num_bins() {
                assert_eq!(spec_multi.data[[0, t, f]], spec_a.data[[0, t, f]]);
                assert_eq!(spec_multi.data[[1, t, f]], spec_b.data[[0, t, f]]);
            }
        }
        let back = istft(&spec_multi, &cfg).unwrap();
        let back_a = istft(&spec_a, &cfg).unwrap();
        assert_eq!(back.channels[0].samples, back_a.channels[0].samples);
    }

    #[test]
    fn stft_is_linear() {
        let cfg = StftConfig::default();
        let x = noise(8000, 5);
        let y = noise(8000, 6);
        let (a, b) = (0.7, -1.3);
        let combo = Waveform {
            samples: x
                .samples
                .iter()
                .zip(&y.samples)
                .map(|(&u, &v)| a * u + b * v)
                .collect(),
            rate: SAMPLE_RATE,
        };
        let sx = stft(&MultiWave::from_mono(x), &cfg).unwrap();
        let sy = stft(&MultiWave::from_mono(y), &cfg).unwrap();
        let sc = stft(&MultiWave::from_mono(combo), &cfg).unwrap();
        let mut max_rel = 0.0f64;
        let scale = sc.data.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for (zc, (zx, zy)) in sc.data.iter().zip(sx.data.iter().zip(sy.data.iter())) {
            let expect = a * zx + b * zy;
            max_rel = max_rel.max((zc - expect).norm() / scale);
        }
        assert!(max_rel < 1e-10, "linearity violation {max_rel}");
    }

    #[test]
    fn hann_windows_overlap_to_one_at_half_hop() {
        let n = 512;
        let w = hann_window(n);
        for i in 0..n / 2 {
            let s = w[i] + w[i + n / 2];
            assert!((s - 1.0).abs() < 1e-12, "sum {s} at {i}");
        }
    }

    #[test]
    fn frame_energy_matches_spectral_energy() {
        // Per-frame Parseval plus the stationary-signal aggregate check.
        let cfg = StftConfig::default();
        let w = noise(16000, 7);
        let spec = stft(&MultiWave::from_mono(w.clone()), &cfg).unwrap();
        let window = hann_window(cfg.frame_len);
        let padded = reflect_pad(&w.samples, cfg.frame_len / 2);
        let n = cfg.fft_size as f64;
        let mut total_time = 0.0;
        let mut total_freq = 0.0;
        for t in 0..spec.num_frames() {
            let start = t * cfg.hop;
            let te: f64 = (0..cfg.frame_len)
                .map(|i| {
                    let v = padded[start + i] * window[i];
                    v * v
                })
                .sum();
            // Two-sided spectral energy from the one-sided representation.
            let mut fe = 0.0;
            for f in 0..spec.num_bins() {
                let p = spec.data[[0, t, f]].norm_sqr();
                let mult = if f == 0 || f == spec.num_bins() - 1 {
                    1.0
                } else {
                    2.0
                };
                fe += mult * p;
            }
            fe /= n;
            assert!((te - fe).abs() <= 1e-9 * te.max(1e-30), "frame {t}");
            total_time += te;
            total_freq += fe;
        }
        // Stationary input: windowed energy ~= signal power * sum(w^2) per frame.
        let wsq: f64 = window.iter().map(|v| v * v).sum();
        let power = w.energy() / w.len() as f64;
        let expected = power * wsq * spec.num_frames() as f64;
        let rel = (total_time - expected).abs() / expected;
        assert!(rel < 0.01, "stationary energy off by {rel}");
        assert!((total_time - total_freq).abs() < 1e-6 * total_time);
    }

    #[test]
    fn cosine_at_bin_center_concentrates_energy() {
        // Hann-windowed cosine at an exact bin center: the peak bin holds
        // 2/3 of the frame energy and the +-1 neighborhood above 99%.
        let cfg = StftConfig::default();
        let k = 40usize;
        let freq = k as f64 * SAMPLE_RATE as f64 / cfg.fft_size as f64;
        let samples: Vec<f64> = (0..16000)
            .map(|n| (2.0 * std::f64::consts::PI * freq * n as f64 / SAMPLE_RATE as f64).cos())
            .collect();
        let w = MultiWave::from_mono(Waveform {
            samples,
            rate: SAMPLE_RATE,
        });
        let spec = stft(&w, &cfg).unwrap();
        let t = spec.num_frames() / 2;
        let energies: Vec<f64> = (0..spec.num_bins())
            .map(|f| spec.data[[0, t, f]].norm_sqr())
            .collect();
        let total: f64 = energies.iter().sum();
        let peak = energies
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(peak, k);
        let neighborhood: f64 = energies[k - 1..=k + 1].iter().sum();
        assert!(neighborhood / total > 0.99, "ratio {}", neighborhood / total);
        assert!(energies[k] / total > 0.6);
    }

    #[test]
    fn rejects_bad_inputs() {
        let cfg = StftConfig::default();
        let short = MultiWave::from_mono(Waveform {
            samples: vec![0.0; 100],
            rate: SAMPLE_RATE,
        });
        assert!(stft(&short, &cfg).is_err());

        let wrong_rate = MultiWave::from_mono(Waveform {
            samples: vec![0.0; 16000],
            rate: 8000,
        });
        assert!(matches!(
            stft(&wrong_rate, &cfg),
            Err(Error::UnsupportedRate { rate: 8000 })
        ));

        let bad = StftConfig {
            fft_size: 256,
            frame_len: 512,
            hop: 128,
            window: WindowKind::Hann,
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn istft_rejects_config_mismatch() {
        let cfg = StftConfig::default();
        let w = MultiWave::from_mono(noise(8000, 8));
        let spec = stft(&w, &cfg).unwrap();
        let other = StftConfig {
            hop: 128,
            ..StftConfig::default()
        };
        assert!(matches!(
            istft(&spec, &other),
            Err(Error::ConfigMismatch { .. })
        ));
    }

    #[test]
    fn wav_float32_roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f32.wav");
        let w = MultiWave::new(vec![noise(500, 9), noise(500, 10)]).unwrap();
        // Quantize to f32 first so the on-disk value is exactly representable.
        let w = MultiWave::new(
            w.channels
                .iter()
                .map(|ch| Waveform {
                    samples: ch.samples.iter().map(|&v| v as f32 as f64).collect(),
                    rate: ch.rate,
                })
                .collect(),
        )
        .unwrap();
        write_wav(&path, &w, WavEncoding::Float32).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.num_channels(), 2);
        for (a, b) in w.channels.iter().zip(&back.channels) {
            assert_eq!(a.samples, b.samples);
        }
    }

    #[test]
    fn wav_pcm16_roundtrip_within_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pcm.wav");
        let w = MultiWave::from_mono(Waveform {
            samples: vec![0.5, -0.25, 0.999, -1.0, 0.0],
            rate: SAMPLE_RATE,
        });
        write_wav(&path, &w, WavEncoding::Pcm16).unwrap();
        let back = read_wav(&path).unwrap();
        for (a, b) in w.channels[0].samples.iter().zip(&back.channels[0].samples) {
            assert!((a - b).abs() <= 1.0 / 32768.0, "{a} vs {b}");
        }
    }

    #[test]
    fn wav_fifteen_channels() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("15ch.wav");
        let w = MultiWave::new((0..15).map(|i| noise(200, 11 + i)).collect()).unwrap();
        write_wav(&path, &w, WavEncoding::Float32).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.num_channels(), 15);
    }

    #[test]
    fn wav_rejects_malformed_and_unsupported() {
        let dir = tempfile::tempdir().unwrap();
        let bad = dir.path().join("bad.wav");
        std::fs::write(&bad, b"not a riff file at all").unwrap();
        assert!(matches!(read_wav(&bad), Err(Error::Wav { .. })));

        // 8-bit PCM is a valid WAV hound can write, but we reject it on read.
        let u8_path = dir.path().join("u8.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: SAMPLE_RATE,
            bits_per_sample: 8,
            sample_format: hound::SampleFormat::Int,
        };
        let mut wr = hound::WavWriter::create(&u8_path, spec).unwrap();
        for _ in 0..10 {
            wr.write_sample(0i8).unwrap();
        }
        wr.finalize().unwrap();
        assert!(matches!(
            read_wav(&u8_path),
            Err(Error::UnsupportedEncoding { .. })
        ));
    }
}

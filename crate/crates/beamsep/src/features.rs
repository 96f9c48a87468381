//! Input features for the filter estimator: log-power spectra (LPS),
//! interaural phase differences (IPD), and the location-guided
//! directional feature (DF).
//!
//! The directional feature is the cosine agreement between the observed
//! IPD and the target-phase-difference (TPD) of a far-field plane wave
//! from the known direction of arrival, averaged over microphone pairs.
//! This form reconstructs the directional feature of the location-guided
//! separation literature; the exact published variant lives in prior work.

use crate::error::{Error, Result};
use crate::signal::{Stft, SAMPLE_RATE};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// Speed of sound in m/s used throughout.
pub const SPEED_OF_SOUND: f64 = 343.0;

/// Floor inside the LPS logarithm.
pub const LPS_FLOOR: f64 = 1e-12;

/// Microphone positions in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub positions: Vec<[f64; 3]>,
}

impl ArrayGeometry {
    /// Uniform linear array along the x axis, centered at the origin.
    pub fn uniform_linear(mics: usize, spacing_m: f64) -> Self {
        let offset = (mics as f64 - 1.0) / 2.0;
        ArrayGeometry {
            positions: (0..mics)
                .map(|m| [(m as f64 - offset) * spacing_m, 0.0, 0.0])
                .collect(),
        }
    }

    pub fn num_mics(&self) -> usize {
        self.positions.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.positions.len() < 2 {
            return Err(Error::InvalidArgument {
                context: "ArrayGeometry",
                detail: "spatial processing needs at least 2 microphones".into(),
            });
        }
        for i in 0..self.positions.len() {
            for j in (i + 1)..self.positions.len() {
                let d: f64 = (0..3)
                    .map(|k| (self.positions[i][k] - self.positions[j][k]).powi(2))
                    .sum();
                if d == 0.0 {
                    return Err(Error::InvalidArgument {
                        context: "ArrayGeometry",
                        detail: format!("microphones {i} and {j} share a position"),
                    });
                }
            }
        }
        Ok(())
    }

    /// Propagation delay of a far-field plane wave from azimuth `doa`
    /// (radians, in the array plane) at microphone `m`, relative to the
    /// origin. Positive delay means the wavefront arrives later.
    pub fn plane_wave_delay(&self, m: usize, doa: f64) -> f64 {
        let u = [doa.cos(), doa.sin(), 0.0];
        let p = self.positions[m];
        -(p[0] * u[0] + p[1] * u[1] + p[2] * u[2]) / SPEED_OF_SOUND
    }
}

/// Named feature blocks and their widths, in concatenation order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub blocks: Vec<(String, usize)>,
}

impl FeatureLayout {
    pub fn total_dim(&self) -> usize {
        self.blocks.iter().map(|(_, d)| d).sum()
    }
}

/// Feature matrix `[frames, dim]` plus its block layout.
#[derive(Debug, Clone)]
pub struct FeatureTensor {
    pub data: Array2<f64>,
    pub layout: FeatureLayout,
}

/// Wrap an angle to `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let tau = 2.0 * std::f64::consts::PI;
    let mut w = a - (a / tau).round() * tau;
    if w <= -std::f64::consts::PI {
        w += tau;
    }
    w
}

/// Log-power spectrum of the reference channel: `ln(|Y|^2 + floor)`.
pub fn lps(spec: &Stft, ref_channel: usize) -> Result<Array2<f64>> {
    if ref_channel >= spec.num_channels() {
        return Err(Error::InvalidArgument {
            context: "lps",
            detail: format!(
                "ref_channel {ref_channel} out of range for {} channels",
                spec.num_channels()
            ),
        });
    }
    let (t, f) = (spec.num_frames(), spec.num_bins());
    Ok(Array2::from_shape_fn((t, f), |(ti, fi)| {
        (spec.data[[ref_channel, ti, fi]].norm_sqr() + LPS_FLOOR).ln()
    }))
}

/// Default microphone pairs: all adjacent pairs plus (first, last).
pub fn default_pairs(mics: usize) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(usize, usize)> = (0..mics - 1).map(|i| (i, i + 1)).collect();
    if mics > 2 {
        pairs.push((0, mics - 1));
    }
    pairs
}

fn check_pairs(spec: &Stft, pairs: &[(usize, usize)]) -> Result<()> {
    for &(i, j) in pairs {
        if i == j || i >= spec.num_channels() || j >= spec.num_channels() {
            return Err(Error::InvalidArgument {
                context: "ipd",
                detail: format!(
                    "invalid pair ({i}, {j}) for {} channels",
                    spec.num_channels()
                ),
            });
        }
    }
    Ok(())
}

/// Interaural phase differences, `[frames, pairs*bins]`, wrapped to
/// `(-pi, pi]`. Pair `p` occupies columns `p*F .. (p+1)*F`.
pub fn ipd(spec: &Stft, pairs: &[(usize, usize)]) -> Result<Array2<f64>> {
    check_pairs(spec, pairs)?;
    let (t, f) = (spec.num_frames(), spec.num_bins());
    let mut out = Array2::zeros((t, pairs.len() * f));
    for (p, &(i, j)) in pairs.iter().enumerate() {
        for ti in 0..t {
            for fi in 0..f {
                let z = spec.data[[i, ti, fi]] * spec.data[[j, ti, fi]].conj();
                let mut a = z.arg();
                if a <= -std::f64::consts::PI {
                    a = std::f64::consts::PI;
                }
                out[[ti, p * f + fi]] = a;
            }
        }
    }
    Ok(out)
}

/// Target phase difference of a plane wave from `doa` for one pair at one
/// frequency bin.
pub fn tpd(pair: (usize, usize), bin: usize, fft_size: usize, geometry: &ArrayGeometry, doa: f64) -> f64 {
    let f_hz = bin as f64 * SAMPLE_RATE as f64 / fft_size as f64;
    let dt = geometry.plane_wave_delay(pair.1, doa) - geometry.plane_wave_delay(pair.0, doa);
    2.0 * std::f64::consts::PI * f_hz * dt
}

/// Location-guided directional feature, `[frames, bins]`:
/// mean over pairs of `cos(IPD - TPD)`. Values lie in `[-1, 1]`.
pub fn directional_feature(
    spec: &Stft,
    doa: f64,
    geometry: &ArrayGeometry,
    pairs: &[(usize, usize)],
) -> Result<Array2<f64>> {
    check_pairs(spec, pairs)?;
    if geometry.num_mics() != spec.num_channels() {
        return Err(Error::ShapeMismatch {
            context: "directional_feature",
            expected: format!("{} mics", spec.num_channels()),
            got: format!("{}", geometry.num_mics()),
        });
    }
    let (t, f) = (spec.num_frames(), spec.num_bins());
    let ipds = ipd(spec, pairs)?;
    let mut out = Array2::zeros((t, f));
    for (p, &pair) in pairs.iter().enumerate() {
        for fi in 0..f {
            let target = tpd(pair, fi, spec.fft_size, geometry, doa);
            for ti in 0..t {
                out[[ti, fi]] += (ipds[[ti, p * f + fi]] - target).cos();
            }
        }
    }
    out.mapv_inplace(|v| v / pairs.len() as f64);
    Ok(out)
}

/// How the IPD block is encoded in the feature matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum IpdEncoding {
    /// Wrapped angle, one value per pair-bin.
    #[default]
    Angle,
    /// Cosine and sine of the angle, two values per pair-bin.
    CosSin,
}

/// Everything needed to assemble the estimator input.
#[derive(Debug, Clone)]
pub struct FeatureSpec {
    pub ref_channel: usize,
    pub pairs: Vec<(usize, usize)>,
    pub geometry: ArrayGeometry,
    pub ipd_encoding: IpdEncoding,
}

impl FeatureSpec {
    pub fn new(geometry: ArrayGeometry) -> Self {
        let pairs = default_pairs(geometry.num_mics());
        FeatureSpec {
            ref_channel: 0,
            pairs,
            geometry,
            ipd_encoding: IpdEncoding::Angle,
        }
    }

    pub fn layout(&self, bins: usize) -> FeatureLayout {
        let ipd_dim = match self.ipd_encoding {
            IpdEncoding::Angle => self.pairs.len() * bins,
            IpdEncoding::CosSin => 2 * self.pairs.len() * bins,
        };
        FeatureLayout {
            blocks: vec![
                ("lps".into(), bins),
                ("ipd".into(), ipd_dim),
                ("df".into(), bins),
            ],
        }
    }
}

/// Concatenate `[LPS | IPD | DF]` into the estimator input.
pub fn assemble_features(spec: &Stft, fs: &FeatureSpec, doa: f64) -> Result<FeatureTensor> {
    let (t, f) = (spec.num_frames(), spec.num_bins());
    let layout = fs.layout(f);
    let lps_block = lps(spec, fs.ref_channel)?;
    let ipd_block = ipd(spec, &fs.pairs)?;
    let df_block = directional_feature(spec, doa, &fs.geometry, &fs.pairs)?;
    let d = layout.total_dim();
    let mut data = Array2::zeros((t, d));
    for ti in 0..t {
        let mut col = 0;
        for fi in 0..f {
            data[[ti, col]] = lps_block[[ti, fi]];
            col += 1;
        }
        match fs.ipd_encoding {
            IpdEncoding::Angle => {
                for c in 0..ipd_block.ncols() {
                    data[[ti, col]] = ipd_block[[ti, c]];
                    col += 1;
                }
            }
            IpdEncoding::CosSin => {
                for c in 0..ipd_block.ncols() {
                    data[[ti, col]] = ipd_block[[ti, c]].cos();
                    data[[ti, col + 1]] = ipd_block[[ti, c]].sin();
                    col += 2;
                }
            }
        }
        for fi in 0..f {
            data[[ti, col]] = df_block[[ti, fi]];
            col += 1;
        }
        debug_assert_eq!(col, d);
    }
    Ok(FeatureTensor { data, layout })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::Stft;
    use ndarray::Array3;
    use num_complex::Complex64;

    fn spec_from_fn(
        m: usize,
        t: usize,
        f: usize,
        g: impl Fn(usize, usize, usize) -> Complex64,
    ) -> Stft {
        let mut data = Array3::zeros((m, t, f));
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
    fn lps_of_unit_magnitude_is_near_zero() {
        let spec = spec_from_fn(1, 3, 4, |_, t, f| {
            Complex64::from_polar(1.0, 0.3 * (t + f) as f64)
        });
        let out = lps(&spec, 0).unwrap();
        for v in out.iter() {
            assert!(v.abs() < 1e-11);
        }
    }

    #[test]
    fn lps_of_zero_hits_floor() {
        let spec = spec_from_fn(1, 2, 2, |_, _, _| Complex64::default());
        let out = lps(&spec, 0).unwrap();
        let expect = LPS_FLOOR.ln();
        assert!((expect - (-27.631021)).abs() < 1e-5);
        for v in out.iter() {
            assert_eq!(*v, expect);
        }
    }

    #[test]
    fn ipd_of_identical_channels_is_zero() {
        let spec = spec_from_fn(2, 3, 4, |_, t, f| {
            Complex64::from_polar(1.0 + t as f64, 0.2 * f as f64)
        });
        let out = ipd(&spec, &[(0, 1)]).unwrap();
        for v in out.iter() {
            assert_eq!(*v, 0.0);
        }
    }

    #[test]
    fn ipd_of_constant_phase_shift() {
        let shift = std::f64::consts::PI / 4.0;
        let spec = spec_from_fn(2, 2, 3, |m, t, f| {
            let base = Complex64::from_polar(2.0, 0.1 * (t * f) as f64);
            if m == 0 {
                base
            } else {
                base * Complex64::from_polar(1.0, -shift)
            }
        });
        let out = ipd(&spec, &[(0, 1)]).unwrap();
        for v in out.iter() {
            assert!((v - shift).abs() < 1e-12);
        }
    }

    #[test]
    fn ipd_antisymmetry_under_wrapping() {
        let spec = spec_from_fn(2, 4, 5, |m, t, f| {
            Complex64::from_polar(1.0, (m as f64 + 1.0) * (0.9 * t as f64 - 1.7 * f as f64))
        });
        let fwd = ipd(&spec, &[(0, 1)]).unwrap();
        let rev = ipd(&spec, &[(1, 0)]).unwrap();
        for (a, b) in fwd.iter().zip(rev.iter()) {
            assert!(wrap_angle(a + b).abs() < 1e-12);
        }
    }

    #[test]
    fn ipd_rejects_bad_pair() {
        let spec = spec_from_fn(2, 2, 2, |_, _, _| Complex64::new(1.0, 0.0));
        assert!(ipd(&spec, &[(0, 0)]).is_err());
        assert!(ipd(&spec, &[(0, 5)]).is_err());
    }

    #[test]
    fn df_is_one_for_zero_phase_at_broadside() {
        let geom = ArrayGeometry::uniform_linear(4, 0.04);
        let spec = spec_from_fn(4, 3, 5, |_, _, _| Complex64::new(1.0, 0.0));
        let pairs = default_pairs(4);
        let broadside = std::f64::consts::FRAC_PI_2;
        let df = directional_feature(&spec, broadside, &geom, &pairs).unwrap();
        for v in df.iter() {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn df_stays_in_unit_interval() {
        let geom = ArrayGeometry::uniform_linear(3, 0.05);
        let spec = spec_from_fn(3, 6, 8, |m, t, f| {
            Complex64::from_polar(
                0.5 + m as f64,
                1.3 * m as f64 * f as f64 - 0.4 * t as f64,
            )
        });
        let df = directional_feature(&spec, 1.1, &geom, &default_pairs(3)).unwrap();
        for v in df.iter() {
            assert!(*v >= -1.0 - 1e-12 && *v <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn global_scaling_shifts_lps_only() {
        let geom = ArrayGeometry::uniform_linear(2, 0.04);
        let spec = spec_from_fn(2, 3, 4, |m, t, f| {
            Complex64::new(
                0.5 + (m + t) as f64 * 0.3,
                0.2 * f as f64 - 0.1,
            )
        });
        let mut scaled = spec.clone();
        let c = 2.5f64;
        scaled.data.mapv_inplace(|z| z * c);
        let fs = FeatureSpec::new(geom);
        let a = assemble_features(&spec, &fs, 0.7).unwrap();
        let b = assemble_features(&scaled, &fs, 0.7).unwrap();
        let bins = 4;
        for ti in 0..3 {
            for col in 0..a.layout.total_dim() {
                let (x, y) = (a.data[[ti, col]], b.data[[ti, col]]);
                if col < bins {
                    assert!((y - x - 2.0 * c.ln()).abs() < 1e-9, "lps col {col}");
                } else {
                    assert!((y - x).abs() < 1e-12, "col {col}");
                }
            }
        }
    }

    #[test]
    fn layout_dims_add_up() {
        let geom = ArrayGeometry::uniform_linear(6, 0.04);
        let fs = FeatureSpec::new(geom);
        let layout = fs.layout(257);
        // 6 mics -> 6 pairs: 5 adjacent + (first, last).
        assert_eq!(layout.total_dim(), 257 + 6 * 257 + 257);
        let cs = FeatureSpec {
            ipd_encoding: IpdEncoding::CosSin,
            ..fs
        };
        assert_eq!(cs.layout(257).total_dim(), 257 + 2 * 6 * 257 + 257);
    }

    #[test]
    fn wrap_angle_edges() {
        use std::f64::consts::PI;
        assert!((wrap_angle(PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!(wrap_angle(2.0 * PI).abs() < 1e-12);
    }
}

//! Objective scoring: scale-invariant SNR, plain SNR, projection-based
//! SDR, and per-condition report aggregation.
//!
//! SDR here is single-source projection SDR ("SDR (proj)"): the reference
//! is passed through a least-squares FIR fit to the estimate before
//! scoring, which absorbs small delays and filtering. It is not the full
//! BSS-eval decomposition. PESQ and WER are out of scope; the report
//! schema reserves their fields as null.

use crate::error::{Error, Result};
use crate::signal::read_wav;
use crate::simulate::ManifestRow;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

/// Score clamp in dB; keeps perfect estimates from polluting means.
pub const CLAMP_DB: f64 = 60.0;

fn zero_mean(x: &[f64]) -> Vec<f64> {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| v - mean).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn clamp_db(x: f64) -> f64 {
    if x.is_nan() {
        -CLAMP_DB
    } else {
        x.clamp(-CLAMP_DB, CLAMP_DB)
    }
}

fn check_pair(est: &[f64], reference: &[f64]) -> Result<()> {
    if est.len() != reference.len() {
        return Err(Error::ShapeMismatch {
            context: "metrics",
            expected: format!("equal lengths ({})", reference.len()),
            got: format!("{}", est.len()),
        });
    }
    if est.is_empty() {
        return Err(Error::EmptyInput("metric input"));
    }
    Ok(())
}

/// Scale-invariant SNR in dB, clamped to +-60.
///
/// Both signals are zero-meaned, the estimate is projected onto the
/// reference, and the ratio of projected to residual energy is scored.
pub fn si_snr(est: &[f64], reference: &[f64]) -> Result<f64> {
    check_pair(est, reference)?;
    let e = zero_mean(est);
    let r = zero_mean(reference);
    let rr = dot(&r, &r);
    if rr <= 0.0 {
        return Err(Error::ZeroReference);
    }
    let alpha = dot(&e, &r) / rr;
    let target_energy = alpha * alpha * rr;
    let noise_energy: f64 = e
        .iter()
        .zip(&r)
        .map(|(x, y)| {
            let d = x - alpha * y;
            d * d
        })
        .sum();
    if noise_energy == 0.0 {
        return Ok(CLAMP_DB);
    }
    Ok(clamp_db(10.0 * (target_energy / noise_energy).log10()))
}

/// Plain SNR in dB against the reference, clamped to +-60.
pub fn snr(est: &[f64], reference: &[f64]) -> Result<f64> {
    check_pair(est, reference)?;
    let e = zero_mean(est);
    let r = zero_mean(reference);
    let rr = dot(&r, &r);
    if rr <= 0.0 {
        return Err(Error::ZeroReference);
    }
    let err: f64 = e
        .iter()
        .zip(&r)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum();
    if err == 0.0 {
        return Ok(CLAMP_DB);
    }
    Ok(clamp_db(10.0 * (rr / err).log10()))
}

/// Cholesky solve for a symmetric positive-definite system; used for the
/// FIR normal equations.
fn solve_spd(a: &mut [Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    for j in 0..n {
        let mut d = a[j][j];
        for k in 0..j {
            d -= a[j][k] * a[j][k];
        }
        if !(d.is_finite() && d > 0.0) {
            return None;
        }
        a[j][j] = d.sqrt();
        for i in (j + 1)..n {
            let mut s = a[i][j];
            for k in 0..j {
                s -= a[i][k] * a[j][k];
            }
            a[i][j] = s / a[j][j];
        }
    }
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= a[i][k] * y[k];
        }
        y[i] /= a[i][i];
    }
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            y[i] -= a[k][i] * y[k];
        }
        y[i] /= a[i][i];
    }
    Some(y)
}

/// Projection SDR in dB: fit a `filter_len`-tap FIR mapping the reference
/// to the estimate (least squares, diagonally loaded), then score the
/// estimate against the filtered reference with [`si_snr`].
pub fn sdr_proj(est: &[f64], reference: &[f64], filter_len: usize) -> Result<f64> {
    check_pair(est, reference)?;
    if filter_len == 0 {
        return Err(Error::InvalidArgument {
            context: "sdr_proj",
            detail: "filter_len must be >= 1".into(),
        });
    }
    let e = zero_mean(est);
    let r = zero_mean(reference);
    let n = r.len();
    let l = filter_len.min(n);
    // Exact least-squares Gram matrix over zero-padded shifts:
    // G[j][k] = sum_{i=max(j,k)}^{n-1} r[i-j] r[i-k]
    //         = auto[d] - tail[d][max(j,k)] with d = |j-k|.
    let mut auto = vec![0.0f64; l];
    for k in 0..l {
        let mut acc = 0.0;
        for i in k..n {
            acc += r[i] * r[i - k];
        }
        auto[k] = acc;
    }
    if auto[0] <= 0.0 {
        return Err(Error::ZeroReference);
    }
    // tail[d][s] = sum_{i=s}^{... up to n-1} missing-edge terms: for lag d
    // and shift s > d, the s - d products r[m+d]*r[m] with m in
    // [n-s, n-1-d] drop out of the exact Gram entry.
    let mut tail = vec![vec![0.0f64; l]; l];
    for d in 0..l {
        for s in (d + 1)..l {
            // m runs n-s .. n-1-d; incremental over s.
            let m = n - s;
            tail[d][s] = tail[d][s - 1] + r[m + d] * r[m];
        }
    }
    let mut cross = vec![0.0f64; l];
    for k in 0..l {
        let mut acc = 0.0;
        for i in k..n {
            acc += e[i] * r[i - k];
        }
        cross[k] = acc;
    }
    let load = 1e-10 * auto[0];
    let mut a: Vec<Vec<f64>> = (0..l)
        .map(|i| {
            (0..l)
                .map(|j| {
                    let d = (i as isize - j as isize).unsigned_abs();
                    let s = i.max(j);
                    let v = auto[d] - tail[d][s];
                    if i == j {
                        v + load
                    } else {
                        v
                    }
                })
                .collect()
        })
        .collect();
    let g = solve_spd(&mut a, &cross).ok_or_else(|| {
        Error::Other("sdr_proj: normal equations not positive definite".into())
    })?;
    let mut filtered = vec![0.0f64; n];
    for (k, &gk) in g.iter().enumerate() {
        if gk == 0.0 {
            continue;
        }
        for i in k..n {
            filtered[i] += gk * r[i - k];
        }
    }
    if dot(&filtered, &filtered) == 0.0 {
        // Estimate orthogonal to every shifted reference.
        return Ok(-CLAMP_DB);
    }
    si_snr(&e, &filtered)
}

/// Per-utterance scores.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UttScore {
    pub id: String,
    pub si_snr_db: f64,
    pub snr_db: f64,
    pub sdr_proj_db: f64,
    /// Si-SNR of the unprocessed mixture, when available.
    pub mixture_si_snr_db: Option<f64>,
    pub angle_bin: Option<String>,
    pub n_speakers: usize,
}

/// Mean and count for one group of utterances.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct Aggregate {
    pub count: usize,
    pub si_snr_db: f64,
    pub snr_db: f64,
    pub sdr_proj_db: f64,
}

impl Aggregate {
    fn accumulate(&mut self, s: &UttScore) {
        self.count += 1;
        self.si_snr_db += s.si_snr_db;
        self.snr_db += s.snr_db;
        self.sdr_proj_db += s.sdr_proj_db;
    }

    fn finalize(&mut self) {
        if self.count > 0 {
            let n = self.count as f64;
            self.si_snr_db /= n;
            self.snr_db /= n;
            self.sdr_proj_db /= n;
        }
    }
}

/// Evaluation report (schema version 1). PESQ and WER are reserved and
/// always null.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub v: u32,
    pub utterances: Vec<UttScore>,
    pub skipped: Vec<String>,
    pub overall: Aggregate,
    pub by_angle_bin: BTreeMap<String, Aggregate>,
    pub by_speakers: BTreeMap<String, Aggregate>,
    pub pesq: Option<f64>,
    pub wer: Option<f64>,
}

/// Aggregate a set of per-utterance scores into a report.
pub fn aggregate(utterances: Vec<UttScore>, skipped: Vec<String>) -> EvalReport {
    let mut overall = Aggregate::default();
    let mut by_angle_bin: BTreeMap<String, Aggregate> = BTreeMap::new();
    let mut by_speakers: BTreeMap<String, Aggregate> = BTreeMap::new();
    for s in &utterances {
        overall.accumulate(s);
        if let Some(bin) = &s.angle_bin {
            by_angle_bin.entry(bin.clone()).or_default().accumulate(s);
        }
        by_speakers
            .entry(format!("{}spk", s.n_speakers))
            .or_default()
            .accumulate(s);
    }
    overall.finalize();
    for agg in by_angle_bin.values_mut() {
        agg.finalize();
    }
    for agg in by_speakers.values_mut() {
        agg.finalize();
    }
    EvalReport {
        v: 1,
        utterances,
        skipped,
        overall,
        by_angle_bin,
        by_speakers,
        pesq: None,
        wer: None,
    }
}

/// Score every manifest row against `enhanced_dir/{id}.wav`. Missing
/// enhanced files are reported as skipped, not fatal.
pub fn evaluate_set(
    manifest: &[ManifestRow],
    manifest_dir: impl AsRef<Path>,
    enhanced_dir: impl AsRef<Path>,
    filter_len: usize,
) -> Result<EvalReport> {
    let manifest_dir = manifest_dir.as_ref();
    let enhanced_dir = enhanced_dir.as_ref();
    let mut utterances = Vec::new();
    let mut skipped = Vec::new();
    for row in manifest {
        let enhanced_path = enhanced_dir.join(format!("{}.wav", row.id));
        if !enhanced_path.exists() {
            skipped.push(row.id.clone());
            continue;
        }
        let est = read_wav(&enhanced_path)?;
        let reference = read_wav(manifest_dir.join(&row.reference))?;
        let mixture = read_wav(manifest_dir.join(&row.mix)).ok();
        let len = est.len().min(reference.len());
        let e = &est.channels[0].samples[..len];
        let r = &reference.channels[0].samples[..len];
        let score = UttScore {
            id: row.id.clone(),
            si_snr_db: si_snr(e, r)?,
            snr_db: snr(e, r)?,
            sdr_proj_db: sdr_proj(e, r, filter_len)?,
            mixture_si_snr_db: mixture
                .as_ref()
                .and_then(|m| si_snr(&m.channels[0].samples[..len], r).ok()),
            angle_bin: row.angle_bin.clone(),
            n_speakers: row.n_speakers,
        };
        utterances.push(score);
    }
    Ok(aggregate(utterances, skipped))
}

/// Render the report as an aligned text table, one row per condition.
pub fn format_report_table(report: &EvalReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<12} {:>6} {:>12} {:>10} {:>12} {:>8} {:>6}\n",
        "condition", "count", "Si-SNR (dB)", "SNR (dB)", "SDRp (dB)", "PESQ", "WER"
    ));
    let mut push_row = |name: &str, agg: &Aggregate| {
        out.push_str(&format!(
            "{:<12} {:>6} {:>12.2} {:>10.2} {:>12.2} {:>8} {:>6}\n",
            name, agg.count, agg.si_snr_db, agg.snr_db, agg.sdr_proj_db, "n/a", "n/a"
        ));
    };
    for bin in ["0-15", "15-45", "45-90", "90-180"] {
        if let Some(agg) = report.by_angle_bin.get(bin) {
            push_row(bin, agg);
        }
    }
    for spk in ["1spk", "2spk", "3spk"] {
        if let Some(agg) = report.by_speakers.get(spk) {
            push_row(spk, agg);
        }
    }
    push_row("overall", &report.overall);
    if !report.skipped.is_empty() {
        out.push_str(&format!(
            "skipped ({}): {}\n",
            report.skipped.len(),
            report.skipped.join(", ")
        ));
    }
    out
}

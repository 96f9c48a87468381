//! The training loop: scene loading, batched loss, Adam updates,
//! validation-driven checkpointing, and a JSON-lines training log with
//! numerical-stability counters.

use crate::error::{Error, Result};
use crate::metrics;
use crate::neural::autodiff::{no_grad, Tensor};
use crate::signal::{read_wav, MultiWave, SAMPLE_RATE};
use crate::simulate::{read_manifest, ManifestRow};
use crate::train::adam::Adam;
use crate::train::config::TrainConfig;
use crate::train::pipeline::{Model, ScenePack};
use serde::Serialize;
use std::io::Write;
use std::path::{Path, PathBuf};

/// One loaded training/validation scene.
pub struct SceneData {
    pub id: String,
    pub mixture: MultiWave,
    /// Reference-channel reverberant clean target.
    pub reference: Vec<f64>,
    /// Target DOA in radians.
    pub doa: f64,
}

/// Load manifest rows into memory, trimming to `chunk_samples`. Scenes
/// whose reference chunk is silent are skipped with a warning.
pub fn load_scenes(
    rows: &[ManifestRow],
    dir: &Path,
    chunk_samples: usize,
) -> Result<Vec<SceneData>> {
    let mut out = Vec::with_capacity(rows.len());
    for row in rows {
        let mut mixture = read_wav(dir.join(&row.mix))?;
        let reference_wav = read_wav(dir.join(&row.reference))?;
        let len = mixture.len().min(reference_wav.len()).min(chunk_samples);
        mixture.truncate(len);
        let reference: Vec<f64> = reference_wav.channels[0].samples[..len].to_vec();
        if reference.iter().map(|v| v * v).sum::<f64>() <= 0.0 {
            log::warn!("scene {}: zero reference chunk, skipped", row.id);
            continue;
        }
        out.push(SceneData {
            id: row.id.clone(),
            mixture,
            reference,
            doa: row.target_doa_deg.to_radians(),
        });
    }
    if out.is_empty() {
        return Err(Error::EmptyInput("no usable scenes in manifest"));
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
struct LogLine {
    step: usize,
    loss: f64,
    si_snr: f64,
    denom_floors: usize,
    loading_floors: usize,
    nan_loss_events: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    val_si_snr: Option<f64>,
}

/// Summary of a finished (or aborted) training run.
#[derive(Debug)]
pub struct TrainOutcome {
    pub checkpoint: PathBuf,
    pub log_path: PathBuf,
    pub best_val_si_snr: f64,
    pub final_loss: f64,
    pub steps_run: usize,
    pub nan_loss_events: usize,
    pub denom_floors: usize,
    pub loading_floors: usize,
}

/// Mean validation Si-SNR of the model over held-out scenes.
pub fn validate(model: &Model, scenes: &[SceneData]) -> Result<f64> {
    let mut total = 0.0;
    for scene in scenes {
        let pack = ScenePack::build(
            &scene.mixture,
            Some(&scene.reference),
            scene.doa,
            &model.cfg,
        )?;
        let si = no_grad(|| -> Result<f64> {
            let (wave, _) = model.forward_wave(&pack)?;
            let est: Vec<f64> = wave.data().iter().copied().collect();
            metrics::si_snr(&est, pack.reference.as_ref().unwrap())
        })?;
        total += si;
    }
    Ok(total / scenes.len() as f64)
}

/// Train a model per the config against a generated dataset directory
/// (must contain `manifest.jsonl`). Writes `best.bsck` and
/// `train_log.jsonl` under `out_dir`.
pub fn train(cfg: &TrainConfig, data_dir: &Path, out_dir: &Path) -> Result<TrainOutcome> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let rows = read_manifest(data_dir.join("manifest.jsonl"))?;
    let val_n = cfg.train.val_scenes.min(rows.len().saturating_sub(1));
    let (train_rows, val_rows) = rows.split_at(rows.len() - val_n);
    if train_rows.is_empty() {
        return Err(Error::EmptyInput("no training scenes after validation split"));
    }
    let chunk_samples = (cfg.train.chunk_s * SAMPLE_RATE as f64).round() as usize;
    let scenes = load_scenes(train_rows, data_dir, chunk_samples)?;
    let val_scenes = if val_rows.is_empty() {
        Vec::new()
    } else {
        load_scenes(val_rows, data_dir, chunk_samples)?
    };

    let model = Model::new(&cfg.model, cfg.train.seed)?;
    let params = model.params();
    let mut adam = Adam::new(&params, cfg.train.lr);

    let log_path = out_dir.join("train_log.jsonl");
    let mut log_file = std::fs::File::create(&log_path).map_err(|e| Error::io(&log_path, e))?;
    let checkpoint = out_dir.join("best.bsck");

    let mut best_val = f64::NEG_INFINITY;
    let mut saved_any = false;
    let mut nan_loss_events = 0usize;
    let mut consecutive_nan = 0usize;
    let mut denom_floors = 0usize;
    let mut loading_floors = 0usize;
    let mut final_loss = f64::NAN;
    let mut steps_run = 0usize;

    for step in 0..cfg.train.steps {
        let mut total: Option<Tensor> = None;
        let mut step_denom = 0usize;
        let mut step_loading = 0usize;
        for b in 0..cfg.train.batch {
            let idx = (step * cfg.train.batch + b) % scenes.len();
            let scene = &scenes[idx];
            let pack = ScenePack::build(
                &scene.mixture,
                Some(&scene.reference),
                scene.doa,
                &cfg.model,
            )?;
            let (loss, stats) = model.forward_loss(&pack)?;
            step_denom += stats.denom_floors;
            step_loading += stats.loading_floors;
            total = Some(match total {
                None => loss,
                Some(t) => t.add(&loss),
            });
        }
        let loss = total.unwrap().mul_scalar(1.0 / cfg.train.batch as f64);
        let loss_val = loss.item();
        denom_floors += step_denom;
        loading_floors += step_loading;

        if !loss_val.is_finite() {
            nan_loss_events += 1;
            consecutive_nan += 1;
            log::warn!("step {step}: non-finite loss ({consecutive_nan} consecutive)");
            if consecutive_nan >= 3 {
                return Err(Error::NanLoss(consecutive_nan));
            }
            continue;
        }
        consecutive_nan = 0;
        final_loss = loss_val;
        loss.backward();
        adam.step_with_clip(&params, cfg.train.grad_clip)?;
        steps_run = step + 1;

        let mut val_si_snr = None;
        let at_eval = (step + 1) % cfg.train.eval_every == 0 || step + 1 == cfg.train.steps;
        if at_eval && !val_scenes.is_empty() {
            let v = validate(&model, &val_scenes)?;
            val_si_snr = Some(v);
            if v > best_val {
                best_val = v;
                model.save(&checkpoint)?;
                saved_any = true;
            }
        }
        let line = LogLine {
            step,
            loss: loss_val,
            si_snr: -loss_val,
            denom_floors: step_denom,
            loading_floors: step_loading,
            nan_loss_events,
            val_si_snr,
        };
        writeln!(
            log_file,
            "{}",
            serde_json::to_string(&line).map_err(|e| Error::Other(e.to_string()))?
        )
        .map_err(|e| Error::io(&log_path, e))?;
    }

    if !saved_any {
        model.save(&checkpoint)?;
    }
    Ok(TrainOutcome {
        checkpoint,
        log_path,
        best_val_si_snr: best_val,
        final_loss,
        steps_run,
        nan_loss_events,
        denom_floors,
        loading_floors,
    })
}

//! Configuration for models, training runs and dataset generation,
//! loadable from TOML or JSON.

use crate::error::{Error, Result};
use crate::features::IpdEncoding;
use crate::signal::StftConfig;
use crate::simulate::DatasetSpec;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Which forward path the system trains and runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Mask estimator only; cRM applied to the reference channel.
    NnCrm,
    /// Filter estimator only; cRF applied to the reference channel.
    NnCrf,
    /// Utterance-level MVDR driven by estimated cRMs.
    MvdrCrm,
    /// Utterance-level MVDR driven by estimated cRFs.
    MvdrCrf,
    /// MVDR on the delay-expanded channel dimension.
    MultitapMvdr,
    /// Frame-wise weights from the two recurrent estimators.
    AdlMvdr,
}

impl Variant {
    pub fn uses_gru_nets(&self) -> bool {
        matches!(self, Variant::AdlMvdr)
    }

    pub fn is_mask_only(&self) -> bool {
        matches!(self, Variant::NnCrm | Variant::NnCrf)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Variant::NnCrm => "nn_crm",
            Variant::NnCrf => "nn_crf",
            Variant::MvdrCrm => "mvdr_crm",
            Variant::MvdrCrf => "mvdr_crf",
            Variant::MultitapMvdr => "multitap_mvdr",
            Variant::AdlMvdr => "adl_mvdr",
        }
    }
}

/// Everything needed to rebuild a model (echoed into checkpoints).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: Variant,
    pub mics: usize,
    pub spacing_m: f64,
    pub stft: StftConfig,
    #[serde(default)]
    pub ipd_encoding: IpdEncoding,
    /// cRF time half-width L.
    pub crf_time_halfwidth: usize,
    /// cRF frequency half-width K.
    pub crf_freq_halfwidth: usize,
    /// Delay taps for the multi-tap variant.
    #[serde(default = "default_taps")]
    pub multitap_taps: usize,
    pub conv_channels: usize,
    #[serde(default = "default_kernel")]
    pub conv_kernel: usize,
    #[serde(default = "default_dilations")]
    pub conv_dilations: Vec<usize>,
    #[serde(default = "default_repeats")]
    pub conv_repeats: usize,
    #[serde(default)]
    pub v_net_hidden: Vec<usize>,
    #[serde(default)]
    pub inv_net_hidden: Vec<usize>,
    /// Relative diagonal loading for in-graph MVDR solves.
    #[serde(default = "default_eps_rel")]
    pub eps_rel: f64,
    /// Unrolled power-iteration steps for in-graph steering estimation.
    #[serde(default = "default_power_iters")]
    pub power_iters: usize,
}

fn default_taps() -> usize {
    2
}
fn default_kernel() -> usize {
    3
}
fn default_dilations() -> Vec<usize> {
    vec![1, 2, 4, 8]
}
fn default_repeats() -> usize {
    2
}
fn default_eps_rel() -> f64 {
    crate::linalg::DEFAULT_EPS_REL
}
fn default_power_iters() -> usize {
    3
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.stft.validate()?;
        if self.mics < 2 {
            return Err(Error::Config("at least 2 microphones required".into()));
        }
        if matches!(self.variant, Variant::NnCrm | Variant::MvdrCrm)
            && (self.crf_time_halfwidth != 0 || self.crf_freq_halfwidth != 0)
        {
            return Err(Error::Config(
                "cRM variants require crf_time_halfwidth = crf_freq_halfwidth = 0".into(),
            ));
        }
        if self.variant.uses_gru_nets()
            && (self.v_net_hidden.is_empty() || self.inv_net_hidden.is_empty())
        {
            return Err(Error::Config(
                "adl_mvdr requires v_net_hidden and inv_net_hidden".into(),
            ));
        }
        if self.variant == Variant::MultitapMvdr && self.multitap_taps < 1 {
            return Err(Error::Config("multitap_taps must be >= 1".into()));
        }
        if self.conv_dilations.is_empty() || self.conv_repeats == 0 || self.conv_channels == 0 {
            return Err(Error::Config("estimator stack must be non-empty".into()));
        }
        Ok(())
    }
}

/// Training loop parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLoopConfig {
    pub steps: usize,
    pub batch: usize,
    pub chunk_s: f64,
    pub lr: f64,
    pub seed: u64,
    /// Validate (and checkpoint on improvement) every this many steps.
    #[serde(default = "default_eval_every")]
    pub eval_every: usize,
    /// Scenes held out from the end of the manifest for validation.
    #[serde(default = "default_val_scenes")]
    pub val_scenes: usize,
    /// Optional global gradient-norm clip; absent means no clipping.
    #[serde(default)]
    pub grad_clip: Option<f64>,
}

fn default_eval_every() -> usize {
    50
}
fn default_val_scenes() -> usize {
    4
}

/// Top-level config file: model + training + dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub train: TrainLoopConfig,
    #[serde(default)]
    pub dataset: Option<DatasetSpec>,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.train.steps == 0 || self.train.batch == 0 {
            return Err(Error::Config("steps and batch must be > 0".into()));
        }
        if !(self.train.lr > 0.0) {
            return Err(Error::Config("learning rate must be > 0".into()));
        }
        if !(self.train.chunk_s > 0.0) {
            return Err(Error::Config("chunk_s must be > 0".into()));
        }
        if let Some(ds) = &self.dataset {
            if ds.mics != self.model.mics {
                return Err(Error::Config(format!(
                    "dataset mics {} != model mics {}",
                    ds.mics, self.model.mics
                )));
            }
        }
        Ok(())
    }

    /// Load from a `.toml` or `.json` file (decided by extension).
    pub fn load(path: impl AsRef<Path>) -> Result<TrainConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: TrainConfig = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?,
            _ => toml::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_model(variant: Variant) -> ModelConfig {
        ModelConfig {
            variant,
            mics: 4,
            spacing_m: 0.04,
            stft: StftConfig::default(),
            ipd_encoding: IpdEncoding::Angle,
            crf_time_halfwidth: 1,
            crf_freq_halfwidth: 1,
            multitap_taps: 2,
            conv_channels: 16,
            conv_kernel: 3,
            conv_dilations: vec![1, 2],
            conv_repeats: 1,
            v_net_hidden: vec![16],
            inv_net_hidden: vec![16],
            eps_rel: 1e-6,
            power_iters: 3,
        }
    }

    #[test]
    fn crm_variant_requires_zero_halfwidths() {
        let bad = base_model(Variant::NnCrm);
        assert!(bad.validate().is_err());
        let mut ok = base_model(Variant::NnCrm);
        ok.crf_time_halfwidth = 0;
        ok.crf_freq_halfwidth = 0;
        assert!(ok.validate().is_ok());
    }

    #[test]
    fn adl_requires_gru_configs() {
        let mut bad = base_model(Variant::AdlMvdr);
        bad.v_net_hidden.clear();
        assert!(bad.validate().is_err());
        assert!(base_model(Variant::AdlMvdr).validate().is_ok());
    }

    #[test]
    fn toml_roundtrip() {
        let cfg = TrainConfig {
            model: base_model(Variant::AdlMvdr),
            train: TrainLoopConfig {
                steps: 10,
                batch: 2,
                chunk_s: 0.5,
                lr: 1e-3,
                seed: 3,
                eval_every: 5,
                val_scenes: 2,
                grad_clip: None,
            },
            dataset: Some(DatasetSpec::default()),
        };
        let text = toml::to_string(&cfg).unwrap();
        let back: TrainConfig = toml::from_str(&text).unwrap();
        assert_eq!(back.model, cfg.model);
        assert_eq!(back.train, cfg.train);
    }

    #[test]
    fn malformed_config_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.toml");
        std::fs::write(&p, "this is not toml = = =").unwrap();
        assert!(matches!(TrainConfig::load(&p), Err(Error::Config(_))));
    }
}

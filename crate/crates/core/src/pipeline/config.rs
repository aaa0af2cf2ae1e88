use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dsp::DspParams;
use crate::embed::{FeatureLayer, TsneConfig};
use crate::ensemble::{EnsembleConfig, THRESHOLDS};
use crate::error::{Error, Result};
use crate::model::{ModelConfig, TrainConfig};
use crate::songgen::{DatasetSpec, MAX_CLUSTERS};
use crate::types::{Background, BackgroundSet};
use crate::xai::{LimeConfig, ShapConfig, SlicConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    pub data_dir: PathBuf,
    pub checkpoint_dir: PathBuf,
    pub output_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            data_dir: "data".into(),
            checkpoint_dir: "checkpoints".into(),
            output_dir: "out".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetSettings {
    pub per_class: usize,
    pub clusters_per_class: u32,
    pub split_fraction: f64,
    /// Renders written per song.
    pub backgrounds: Vec<Background>,
}

impl Default for DatasetSettings {
    fn default() -> Self {
        DatasetSettings {
            per_class: 300,
            clusters_per_class: MAX_CLUSTERS,
            split_fraction: 2.0 / 3.0,
            backgrounds: Background::ALL.to_vec(),
        }
    }
}

/// Layer widths; the input size comes from the render geometry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSettings {
    pub conv_channels: Vec<usize>,
    pub fc_sizes: Vec<usize>,
}

impl Default for ModelSettings {
    fn default() -> Self {
        let c = ModelConfig::canonical();
        ModelSettings {
            conv_channels: c.conv_channels,
            fc_sizes: c.fc_sizes,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSettings {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f32,
    pub weight_decay: f32,
    pub backgrounds: Vec<BackgroundSet>,
    /// Evaluate the test split after every epoch, not only at the end.
    pub eval_each_epoch: bool,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSettings {
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            weight_decay: t.weight_decay,
            backgrounds: BackgroundSet::ALL.to_vec(),
            eval_each_epoch: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct XaiSettings {
    pub overlay_alpha: f32,
    /// Test samples explained by `report`.
    pub report_samples: usize,
    pub thresholds: Vec<f64>,
    pub ensemble: EnsembleConfig,
    pub slic: SlicConfig,
    pub lime: LimeConfig,
    pub shap: ShapConfig,
}

impl Default for XaiSettings {
    fn default() -> Self {
        XaiSettings {
            overlay_alpha: 0.5,
            report_samples: 10,
            thresholds: THRESHOLDS.to_vec(),
            ensemble: EnsembleConfig::default(),
            slic: SlicConfig::default(),
            lime: LimeConfig::default(),
            shap: ShapConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedSettings {
    pub layer: FeatureLayer,
    /// k-means clusters per class.
    pub k: usize,
    pub tsne: TsneConfig,
}

impl Default for EmbedSettings {
    fn default() -> Self {
        EmbedSettings {
            layer: FeatureLayer::Penultimate,
            k: MAX_CLUSTERS as usize,
            tsne: TsneConfig::default(),
        }
    }
}

/// Everything a run depends on, in one document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub paths: Paths,
    pub dataset: DatasetSettings,
    pub dsp: DspParams,
    pub model: ModelSettings,
    pub train: TrainSettings,
    pub xai: XaiSettings,
    pub embed: EmbedSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            paths: Paths::default(),
            dataset: DatasetSettings::default(),
            dsp: DspParams::with_scale(4).expect("valid scale"),
            model: ModelSettings::default(),
            train: TrainSettings::default(),
            xai: XaiSettings::default(),
            embed: EmbedSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Switch the render geometry to the canonical size divided by `divisor`.
    pub fn set_scale(&mut self, divisor: usize) -> Result<()> {
        self.dsp.render = DspParams::with_scale(divisor)?.render;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset_spec().validate()?;
        self.model_config().validate()?;
        if self.train.epochs == 0 {
            return Err(Error::Config("train.epochs must be at least 1".into()));
        }
        self.train_config().validate()?;
        if self.train.backgrounds.is_empty() {
            return Err(Error::Config("train.backgrounds must not be empty".into()));
        }
        self.xai.ensemble.validate()?;
        if self.xai.thresholds.is_empty() || self.xai.thresholds.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::Config("xai.thresholds must be a non-empty list in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.xai.overlay_alpha) {
            return Err(Error::Config("xai.overlay_alpha must be in [0, 1]".into()));
        }
        if self.embed.k < 2 {
            return Err(Error::Config("embed.k must be at least 2".into()));
        }
        Ok(())
    }

    pub fn dataset_spec(&self) -> DatasetSpec {
        DatasetSpec {
            per_class: self.dataset.per_class,
            clusters_per_class: self.dataset.clusters_per_class,
            backgrounds: self.dataset.backgrounds.clone(),
            split_fraction: self.dataset.split_fraction,
            seed: self.seed,
        }
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            conv_channels: self.model.conv_channels.clone(),
            fc_sizes: self.model.fc_sizes.clone(),
            ..ModelConfig::for_input(self.dsp.render.height, self.dsp.render.width)
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            learning_rate: self.train.learning_rate,
            weight_decay: self.train.weight_decay,
            seed: self.seed,
        }
    }

    pub fn checkpoint_path(&self, set: BackgroundSet) -> PathBuf {
        self.paths.checkpoint_dir.join(format!("model_{set}.bwxa"))
    }
}

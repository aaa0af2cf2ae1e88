//! Deterministic synthetic two-variant bird song and dataset generation.
//!
//! Both classes share the same intro: a few frequency-modulated whistles
//! in 3-5 kHz. They differ only in the terminal ~1.4 s. Eastern songs end
//! in 3-4 slow, loud elements at 2-3.5 kHz. Mexican songs end in a trill
//! of 10-16 fast notes at 4-7 kHz. The cluster id selects element count
//! (trill rate) and center frequency from a fixed table, so sub-groups are
//! planted and recoverable.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsp::{self, png_io, DspParams, Waveform, CANONICAL_SAMPLE_RATE};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream, Rng};
use crate::types::{Background, SongClass};

pub const MAX_CLUSTERS: u32 = 4;
/// Length of the class-discriminative terminal section.
pub const TERMINAL_SECONDS: f64 = 1.4;
const PEAK_LIMIT: f64 = 0.9;
const NOISE_DB: f64 = -30.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SongSpec {
    pub class: SongClass,
    pub cluster: u32,
    pub clusters_per_class: u32,
    pub seed: u64,
    pub duration_s: f64,
    pub sample_rate: u32,
}

impl SongSpec {
    pub fn new(class: SongClass, cluster: u32, seed: u64) -> Self {
        SongSpec {
            class,
            cluster,
            clusters_per_class: MAX_CLUSTERS,
            seed,
            duration_s: 4.0,
            sample_rate: CANONICAL_SAMPLE_RATE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.clusters_per_class == 0 || self.clusters_per_class > MAX_CLUSTERS {
            return Err(Error::InvalidArgument(format!(
                "clusters_per_class must be in 1..={MAX_CLUSTERS}, got {}",
                self.clusters_per_class
            )));
        }
        if self.cluster >= self.clusters_per_class {
            return Err(Error::InvalidArgument(format!(
                "cluster {} out of range for {} clusters",
                self.cluster, self.clusters_per_class
            )));
        }
        if self.duration_s < 3.0 {
            return Err(Error::InvalidArgument("songs need at least 3 s".into()));
        }
        if self.sample_rate < 24_000 {
            return Err(Error::InvalidArgument("sample rate too low for a 7 kHz trill".into()));
        }
        Ok(())
    }
}

/// Planted terminal-section parameters for one (class, cluster).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TerminalProfile {
    pub elements: usize,
    pub center_hz: f64,
}

impl TerminalProfile {
    pub fn of(class: SongClass, cluster: u32) -> Self {
        let (counts, freqs) = match class {
            SongClass::Eastern => ([3, 4], [2300.0, 3100.0]),
            SongClass::Mexican => ([10, 16], [4600.0, 6200.0]),
        };
        TerminalProfile {
            elements: counts[(cluster % 2) as usize],
            center_hz: freqs[((cluster / 2) % 2) as usize],
        }
    }

    /// Onset-to-onset spacing of the terminal elements.
    pub fn period_s(&self) -> f64 {
        TERMINAL_SECONDS / self.elements as f64
    }
}

/// Phase-continuous tone with a linear frequency sweep and a Hann envelope,
/// added into `out`.
fn add_element(out: &mut [f64], fs: f64, start_s: f64, len_s: f64, f0: f64, f1: f64, amp: f64) {
    let start = (start_s * fs).round() as usize;
    let len = (len_s * fs).round() as usize;
    let mut phase = 0.0f64;
    for i in 0..len {
        let Some(slot) = out.get_mut(start + i) else { break };
        let t = i as f64 / len as f64;
        let f = f0 + (f1 - f0) * t;
        phase += 2.0 * PI * f / fs;
        let env = (PI * t).sin().powi(2);
        *slot += amp * env * phase.sin();
    }
}

/// Render one song. The same spec always yields the same samples.
pub fn generate_song(spec: &SongSpec) -> Result<Waveform> {
    spec.validate()?;
    let fs = spec.sample_rate as f64;
    let n = (spec.duration_s * fs).round() as usize;
    let mut rng: Rng = stream(spec.seed, 0x50_4E47);
    let mut jitter = |scale: f64| -> f64 { scale * (rng.random::<f64>() * 2.0 - 1.0) };
    let mut out = vec![0.0f64; n];

    // Intro: 2 or 3 rising whistles in the first part of the song.
    let intro_end = spec.duration_s - TERMINAL_SECONDS - 0.45;
    let whistles = 2 + (spec.cluster as usize / 2) % 2;
    let slot = (intro_end - 0.15) / whistles as f64;
    for k in 0..whistles {
        let len = 0.28 + jitter(0.04);
        let start = 0.15 + k as f64 * slot + (slot - len) * 0.5 + jitter(0.05);
        let f0 = 3400.0 + 350.0 * k as f64 + jitter(150.0);
        let amp = 0.42 + jitter(0.05);
        add_element(&mut out, fs, start, len, f0, f0 + 600.0, amp);
    }

    // Terminal section.
    let profile = TerminalProfile::of(spec.class, spec.cluster);
    let term_start = spec.duration_s - TERMINAL_SECONDS - 0.05;
    let center = profile.center_hz + jitter(60.0);
    let period = profile.period_s();
    match spec.class {
        SongClass::Eastern => {
            let amp = 0.85 + jitter(0.05);
            for k in 0..profile.elements {
                let start = term_start + k as f64 * period + jitter(0.01);
                let len = 0.55 * period.min(0.4);
                add_element(&mut out, fs, start, len, center + 150.0, center - 150.0, amp);
            }
        }
        SongClass::Mexican => {
            let amp = 0.65 + jitter(0.05);
            for k in 0..profile.elements {
                let start = term_start + k as f64 * period + jitter(0.002);
                let len = 0.45 * period;
                add_element(&mut out, fs, start, len, center - 300.0, center + 300.0, amp);
            }
        }
    }

    // Pink-ish background: one-pole low-passed white noise at -30 dB.
    let mut noise_rng: Rng = stream(spec.seed, 0x4E_4F49);
    let mut state = 0.0f64;
    let mut noise: Vec<f64> = (0..n)
        .map(|_| {
            let w: f64 = StandardNormal.sample(&mut noise_rng);
            state = 0.9 * state + w;
            state
        })
        .collect();
    let rms = (noise.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    let target = PEAK_LIMIT * 10f64.powf(NOISE_DB / 20.0);
    for (o, v) in out.iter_mut().zip(noise.iter_mut()) {
        *o += *v * target / rms;
    }

    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if peak > PEAK_LIMIT { PEAK_LIMIT / peak } else { 1.0 };
    let samples = out.iter().map(|v| (v * scale) as f32).collect();
    Waveform::new(samples, spec.sample_rate)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub per_class: usize,
    pub clusters_per_class: u32,
    pub backgrounds: Vec<Background>,
    pub split_fraction: f64,
    pub seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            per_class: 300,
            clusters_per_class: MAX_CLUSTERS,
            backgrounds: Background::ALL.to_vec(),
            split_fraction: 2.0 / 3.0,
            seed: 42,
        }
    }
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.clusters_per_class == 0 || self.clusters_per_class > MAX_CLUSTERS {
            return Err(Error::InvalidArgument(format!(
                "clusters_per_class must be in 1..={MAX_CLUSTERS}"
            )));
        }
        if self.per_class < self.clusters_per_class as usize {
            return Err(Error::InvalidArgument(format!(
                "per_class ({}) must be >= clusters_per_class ({})",
                self.per_class, self.clusters_per_class
            )));
        }
        if self.backgrounds.is_empty() {
            return Err(Error::InvalidArgument("at least one background required".into()));
        }
        if !(0.0..=1.0).contains(&self.split_fraction) {
            return Err(Error::InvalidArgument("split_fraction must be in [0, 1]".into()));
        }
        Ok(())
    }

    /// The (class, cluster, seed, split) of every song, class-major.
    pub fn plan(&self) -> Result<Vec<PlannedSong>> {
        self.validate()?;
        let mut out = Vec::with_capacity(2 * self.per_class);
        for class in SongClass::ALL {
            let splits = self.class_splits(class);
            for (index, split) in splits.into_iter().enumerate() {
                let global = (class.id() * self.per_class + index) as u64;
                out.push(PlannedSong {
                    id: format!("{}_{index:04}", class.as_str()),
                    spec: SongSpec {
                        class,
                        cluster: (index % self.clusters_per_class as usize) as u32,
                        clusters_per_class: self.clusters_per_class,
                        seed: derive_seed(self.seed, global),
                        duration_s: 4.0,
                        sample_rate: CANONICAL_SAMPLE_RATE,
                    },
                    split,
                });
            }
        }
        Ok(out)
    }

    /// Stratified split: shuffle each cluster's members, interleave clusters
    /// round-robin, and take the first `round(fraction * per_class)`.
    fn class_splits(&self, class: SongClass) -> Vec<Split> {
        let k = self.clusters_per_class as usize;
        let mut rng: Rng = stream(self.seed, 0x5350_4C00 + class.id() as u64);
        let mut groups: Vec<Vec<usize>> = (0..k)
            .map(|c| (c..self.per_class).step_by(k).collect())
            .collect();
        for g in &mut groups {
            for i in (1..g.len()).rev() {
                let j = rng.random_range(0..=i);
                g.swap(i, j);
            }
        }
        let mut order: Vec<usize> = Vec::with_capacity(self.per_class);
        for round in 0.. {
            let before = order.len();
            order.extend(groups.iter().filter_map(|g| g.get(round).copied()));
            if order.len() == before {
                break;
            }
        }
        let n_train = (self.split_fraction * self.per_class as f64).round() as usize;
        let mut splits = vec![Split::Test; self.per_class];
        for &i in order.iter().take(n_train) {
            splits[i] = Split::Train;
        }
        splits
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlannedSong {
    pub id: String,
    pub spec: SongSpec,
    pub split: Split,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub wav: String,
    pub png: String,
    pub class: SongClass,
    pub cluster: u32,
    pub background: Background,
    pub split: Split,
    pub seed: u64,
}

impl SampleRecord {
    /// Stable sample identifier (the WAV file stem).
    pub fn sample_id(&self) -> &str {
        let name = self.wav.rsplit('/').next().unwrap_or(&self.wav);
        name.strip_suffix(".wav").unwrap_or(name)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub classes: Vec<String>,
    pub samples: Vec<SampleRecord>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn select<'a>(
        &'a self,
        split: Option<Split>,
        backgrounds: &'a [Background],
    ) -> impl Iterator<Item = &'a SampleRecord> + 'a {
        self.samples
            .iter()
            .filter(move |s| split.is_none_or(|sp| s.split == sp) && backgrounds.contains(&s.background))
    }
}

/// Sidecar written next to every spectrogram PNG.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrogramSidecar {
    pub label: Option<SongClass>,
    pub cluster: Option<u32>,
    pub background: Background,
    pub source: String,
    pub dsp: DspParams,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Generate every song, its WAV and one PNG (+ sidecar) per background, and
/// write `manifest.json` into `out_dir`.
pub fn generate_dataset(spec: &DatasetSpec, dsp_params: &DspParams, out_dir: &Path) -> Result<DatasetManifest> {
    let plan = spec.plan()?;
    for sub in ["wav", "png"] {
        let d = out_dir.join(sub);
        std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    let per_song: Vec<Vec<SampleRecord>> = plan
        .par_iter()
        .map(|p| {
            let wave = generate_song(&p.spec)?;
            let wav_rel = format!("wav/{}.wav", p.id);
            write_file(&out_dir.join(&wav_rel), &dsp::encode_wav_pcm16(&wave))?;
            let images = dsp::clip_to_images(&wave, dsp_params, &spec.backgrounds)?;
            images
                .into_iter()
                .map(|img| {
                    let png_rel = format!("png/{}_{}.png", p.id, img.background);
                    let png_path: PathBuf = out_dir.join(&png_rel);
                    png_io::write_gray(&png_path, img.width, img.height, &img.pixels)?;
                    let sidecar = SpectrogramSidecar {
                        label: Some(p.spec.class),
                        cluster: Some(p.spec.cluster),
                        background: img.background,
                        source: wav_rel.clone(),
                        dsp: *dsp_params,
                    };
                    write_file(
                        &png_path.with_extension("json"),
                        serde_json::to_string_pretty(&sidecar)?.as_bytes(),
                    )?;
                    Ok(SampleRecord {
                        wav: wav_rel.clone(),
                        png: png_rel,
                        class: p.spec.class,
                        cluster: p.spec.cluster,
                        background: img.background,
                        split: p.split,
                        seed: p.spec.seed,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let manifest = DatasetManifest {
        classes: SongClass::ALL.iter().map(|c| c.as_str().to_string()).collect(),
        samples: per_song.into_iter().flatten().collect(),
    };
    manifest.save(&out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_spec_same_samples() {
        let spec = SongSpec::new(SongClass::Mexican, 2, 99);
        assert_eq!(generate_song(&spec).unwrap(), generate_song(&spec).unwrap());
        let other = SongSpec { seed: 100, ..spec };
        assert_ne!(generate_song(&spec).unwrap(), generate_song(&other).unwrap());
    }

    #[test]
    fn peak_is_bounded() {
        for class in SongClass::ALL {
            for cluster in 0..4 {
                let w = generate_song(&SongSpec::new(class, cluster, 7)).unwrap();
                let peak = w.samples.iter().fold(0.0f32, |m, v| m.max(v.abs()));
                assert!(peak <= 0.9 + 1e-6, "{class} {cluster}: {peak}");
                assert_eq!(w.samples.len(), 192_000);
            }
        }
    }

    #[test]
    fn invalid_cluster_is_rejected() {
        let mut spec = SongSpec::new(SongClass::Eastern, 4, 1);
        assert!(generate_song(&spec).is_err());
        spec.cluster = 0;
        spec.clusters_per_class = 5;
        assert!(generate_song(&spec).is_err());
    }

    #[test]
    fn plan_is_balanced() {
        let spec = DatasetSpec {
            per_class: 8,
            ..DatasetSpec::default()
        };
        let plan = spec.plan().unwrap();
        for class in SongClass::ALL {
            for cluster in 0..4 {
                let n = plan
                    .iter()
                    .filter(|p| p.spec.class == class && p.spec.cluster == cluster)
                    .count();
                assert_eq!(n, 2);
            }
        }
    }

    #[test]
    fn split_counts_follow_fraction() {
        let spec = DatasetSpec {
            per_class: 10,
            split_fraction: 0.7,
            ..DatasetSpec::default()
        };
        let plan = spec.plan().unwrap();
        let train = plan.iter().filter(|p| p.split == Split::Train).count();
        assert_eq!((train, plan.len() - train), (14, 6));
        let big = DatasetSpec::default().plan().unwrap();
        assert_eq!(big.iter().filter(|p| p.split == Split::Train).count(), 400);
    }

    #[test]
    fn too_few_samples_per_class() {
        let spec = DatasetSpec {
            per_class: 3,
            ..DatasetSpec::default()
        };
        assert!(spec.plan().is_err());
    }
}

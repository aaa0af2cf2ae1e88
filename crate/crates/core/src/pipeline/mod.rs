//! Config-driven stages: synth, prep, train, eval, explain, report, embed.

mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

pub use config::{DatasetSettings, EmbedSettings, ModelSettings, Paths, RunConfig, TrainSettings, XaiSettings};

use crate::dsp::{self, png_io, segment_clips};
use crate::embed::{extract_features, pca, per_class_diagnostics, tsne, ClusterDiagnostics, Embedding2D, FeatureMatrix};
use crate::ensemble::{coverage_report, fuse, CoverageReport, EnsembleConfig, Strategy};
use crate::error::{Error, Result};
use crate::model::{
    build_model, evaluate, load_checkpoint, save_checkpoint, train_from, LabeledSet, Metrics, Model, TrainHistory,
    TrainingMetadata,
};
use crate::songgen::{generate_dataset, DatasetManifest, SpectrogramSidecar, Split, MANIFEST_FILE};
use crate::tensor::Tensor;
use crate::types::{Background, BackgroundSet};
use crate::xai::{
    background_reference, deeplift, gradcam, lime_explain, shap_explain, slic_segment, write_saliency, Method,
    SaliencyMap, SaliencySidecar,
};

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn load_manifest(cfg: &RunConfig) -> Result<DatasetManifest> {
    let path = cfg.paths.data_dir.join(MANIFEST_FILE);
    if !path.is_file() {
        return Err(Error::Data(format!("no dataset manifest at {} (run synth first)", path.display())));
    }
    DatasetManifest::load(&path)
}

/// Generate the synthetic corpus into the data directory.
pub fn synth(cfg: &RunConfig) -> Result<DatasetManifest> {
    let dir = &cfg.paths.data_dir;
    create_dir(dir)?;
    let manifest = generate_dataset(&cfg.dataset_spec(), &cfg.dsp, dir)?;
    write_json(
        &dir.join("synth.json"),
        &json!({ "config_hash": cfg.hash(), "dataset": cfg.dataset_spec(), "samples": manifest.samples.len() }),
    )?;
    Ok(manifest)
}

fn wav_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let entries = std::fs::read_dir(p).map_err(|e| Error::io(p, e))?;
            let mut found: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
                .collect();
            found.sort();
            out.extend(found);
        } else if p.is_file() {
            out.push(p.clone());
        } else {
            return Err(Error::Data(format!("input {} does not exist", p.display())));
        }
    }
    if out.is_empty() {
        return Err(Error::Data("no WAV inputs found".into()));
    }
    Ok(out)
}

/// Render external recordings: every 4 s clip of every WAV becomes one
/// unlabelled PNG per background. Returns the written PNG paths.
pub fn prep(cfg: &RunConfig, inputs: &[PathBuf], out_dir: &Path, backgrounds: &[Background]) -> Result<Vec<PathBuf>> {
    let files = wav_inputs(inputs)?;
    create_dir(out_dir)?;
    let written: Vec<Vec<PathBuf>> = files
        .par_iter()
        .map(|f| {
            let bytes = std::fs::read(f).map_err(|e| Error::io(f, e))?;
            let wave = dsp::decode_wav(&bytes).map_err(|e| Error::Data(format!("{}: {e}", f.display())))?;
            let stem = f.file_stem().map_or_else(|| "input".into(), |s| s.to_string_lossy().into_owned());
            let clips = segment_clips(&wave, cfg.dsp.clip_seconds);
            if clips.is_empty() {
                log::warn!("{} is shorter than one clip, skipped", f.display());
            }
            let mut paths = Vec::new();
            for (i, clip) in clips.iter().enumerate() {
                for img in dsp::clip_to_images(clip, &cfg.dsp, backgrounds)? {
                    let png = out_dir.join(format!("{stem}_{i:03}_{}.png", img.background));
                    png_io::write_gray(&png, img.width, img.height, &img.pixels)?;
                    let sidecar = SpectrogramSidecar {
                        label: None,
                        cluster: None,
                        background: img.background,
                        source: f.display().to_string(),
                        dsp: cfg.dsp,
                    };
                    write_json(&png.with_extension("json"), &sidecar)?;
                    paths.push(png);
                }
            }
            Ok(paths)
        })
        .collect::<Result<_>>()?;
    let paths: Vec<PathBuf> = written.into_iter().flatten().collect();
    let names: Vec<String> = paths.iter().map(|p| p.display().to_string()).collect();
    write_json(&out_dir.join("prep.json"), &json!({ "config_hash": cfg.hash(), "images": names }))?;
    Ok(paths)
}

/// Outcome of training one model.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub set: BackgroundSet,
    pub checkpoint: PathBuf,
    pub history: TrainHistory,
    pub metrics: Metrics,
    pub optimizer_steps: u64,
}

fn load_split(cfg: &RunConfig, manifest: &DatasetManifest, split: Split, set: BackgroundSet, model: &Model) -> Result<LabeledSet> {
    let s = LabeledSet::from_manifest(manifest, &cfg.paths.data_dir, split, set.backgrounds(), model)?;
    if s.is_empty() {
        return Err(Error::Data(format!(
            "no {split:?} samples with {set} background in the manifest"
        )));
    }
    Ok(s)
}

const METRICS_FILE: &str = "metrics.csv";

/// Rewrite `metrics.csv`, keeping rows of models not retrained now.
fn update_metrics_csv(path: &Path, rows: &[(BackgroundSet, Metrics)]) -> Result<()> {
    let mut by_set: Vec<(BackgroundSet, String)> = Vec::new();
    if let Ok(text) = std::fs::read_to_string(path) {
        for line in text.lines().skip(1) {
            if let Some(set) = line.split(',').next().and_then(|s| s.parse::<BackgroundSet>().ok()) {
                by_set.push((set, line.to_string()));
            }
        }
    }
    for (set, m) in rows {
        by_set.retain(|(s, _)| s != set);
        by_set.push((*set, m.csv_row(set.as_str())));
    }
    by_set.sort_by_key(|(s, _)| *s);
    let mut text = format!("{}\n", Metrics::CSV_HEADER);
    for (_, line) in by_set {
        text.push_str(&line);
        text.push('\n');
    }
    write_text(path, &text)
}

fn history_csv(h: &TrainHistory) -> String {
    let mut s = String::from("epoch,train_loss,train_accuracy,test_accuracy\n");
    for e in &h.epochs {
        let test = e.test_accuracy.map_or(String::new(), |a| format!("{a:.6}"));
        let _ = writeln!(s, "{},{:.6},{:.6},{test}", e.epoch, e.train_loss, e.train_accuracy);
    }
    s
}

/// Train one model per background set; write checkpoints, per-model
/// sidecars and histories, and the metrics table.
pub fn train(cfg: &RunConfig, sets: &[BackgroundSet], resume: bool) -> Result<Vec<TrainOutcome>> {
    cfg.validate()?;
    let manifest = load_manifest(cfg)?;
    create_dir(&cfg.paths.checkpoint_dir)?;
    create_dir(&cfg.paths.output_dir)?;
    let tc = cfg.train_config();
    let mut outcomes = Vec::new();
    for &set in sets {
        let mut model = build_model(&cfg.model_config(), cfg.seed)?;
        let train_set = load_split(cfg, &manifest, Split::Train, set, &model)?;
        let test_set = load_split(cfg, &manifest, Split::Test, set, &model)?;
        let path = cfg.checkpoint_path(set);
        let (mut optimizer, mut epochs_before) = (None, 0);
        if resume && path.is_file() {
            let ck = load_checkpoint(&path)?;
            if ck.model.config != model.config {
                return Err(Error::Config(format!("{} was trained with a different model config", path.display())));
            }
            model = ck.model;
            optimizer = ck.optimizer;
            epochs_before = ck.metadata.epochs_run;
            log::info!("resuming {set} from epoch {epochs_before}");
        }
        log::info!("training {set}: {} train / {} test samples", train_set.len(), test_set.len());
        let eval_set = cfg.train.eval_each_epoch.then_some(&test_set);
        let (history, state) = train_from(&mut model, &train_set, eval_set, &tc, optimizer)?;
        let metadata = TrainingMetadata {
            epochs_run: epochs_before + tc.epochs,
            final_loss: history.final_loss(),
            seed: cfg.seed,
            ..Default::default()
        };
        save_checkpoint(&path, &model, &metadata, Some(&state))?;
        let metrics = evaluate(&model, &test_set)?;
        write_text(&cfg.paths.output_dir.join(format!("train_{set}.csv")), &history_csv(&history))?;
        write_json(
            &path.with_extension("json"),
            &json!({
                "config_hash": cfg.hash(),
                "background_set": set,
                "epochs_run": metadata.epochs_run,
                "optimizer_steps": state.step_count,
                "train_samples": train_set.len(),
                "test_samples": test_set.len(),
                "metrics": metrics,
                "history": history,
            }),
        )?;
        outcomes.push(TrainOutcome {
            set,
            checkpoint: path,
            history,
            metrics,
            optimizer_steps: state.step_count,
        });
    }
    let rows: Vec<(BackgroundSet, Metrics)> = outcomes.iter().map(|o| (o.set, o.metrics)).collect();
    update_metrics_csv(&cfg.paths.output_dir.join(METRICS_FILE), &rows)?;
    Ok(outcomes)
}

pub fn load_model(cfg: &RunConfig, set: BackgroundSet) -> Result<Model> {
    let path = cfg.checkpoint_path(set);
    if !path.is_file() {
        return Err(Error::Data(format!("no checkpoint at {} (run train first)", path.display())));
    }
    Ok(load_checkpoint(&path)?.model)
}

/// Test-split metrics of a stored model.
pub fn eval(cfg: &RunConfig, set: BackgroundSet) -> Result<Metrics> {
    let model = load_model(cfg, set)?;
    let manifest = load_manifest(cfg)?;
    let test_set = load_split(cfg, &manifest, Split::Test, set, &model)?;
    let metrics = evaluate(&model, &test_set)?;
    write_json(
        &cfg.paths.output_dir.join(format!("eval_{set}.json")),
        &json!({ "config_hash": cfg.hash(), "background_set": set, "test_samples": test_set.len(), "metrics": metrics }),
    )?;
    Ok(metrics)
}

/// One spectrogram to explain.
#[derive(Clone, Debug)]
pub struct ExplainInput {
    pub sample_id: String,
    pub pixels: Tensor,
    pub background: Background,
}

impl ExplainInput {
    /// A PNG path, or a sample id such as `eastern_0003_black` looked up in
    /// the data directory.
    pub fn resolve(cfg: &RunConfig, input: &str) -> Result<Self> {
        let direct = PathBuf::from(input);
        let path = if direct.is_file() {
            direct
        } else {
            let by_id = cfg.paths.data_dir.join("png").join(format!("{input}.png"));
            if !by_id.is_file() {
                return Err(Error::Data(format!("{input} is neither a file nor a sample id in {}", cfg.paths.data_dir.display())));
            }
            by_id
        };
        let (w, h, pixels) = png_io::read_gray(&path)?;
        let sidecar = std::fs::read_to_string(path.with_extension("json"))
            .ok()
            .and_then(|t| serde_json::from_str::<SpectrogramSidecar>(&t).ok());
        let background = match sidecar {
            Some(s) => s.background,
            None if pixels.iter().map(|&v| v as f64).sum::<f64>() / pixels.len().max(1) as f64 > 0.5 => Background::White,
            None => Background::Black,
        };
        let sample_id = path.file_stem().map_or_else(|| input.to_string(), |s| s.to_string_lossy().into_owned());
        Ok(ExplainInput {
            sample_id,
            pixels: Tensor::new(vec![1, h, w], pixels)?,
            background,
        })
    }
}

/// A loaded model plus everything the attribution methods need.
pub struct Explainer<'a> {
    pub cfg: &'a RunConfig,
    pub set: BackgroundSet,
    pub model: Model,
    shap_backgrounds: OnceLock<Vec<Tensor>>,
    hash: String,
}

#[derive(Clone, Debug)]
pub struct Explanation {
    pub sample_id: String,
    pub predicted_class: usize,
    pub probabilities: Vec<f32>,
    pub map: SaliencyMap,
    pub stem: PathBuf,
}

impl<'a> Explainer<'a> {
    pub fn new(cfg: &'a RunConfig, set: BackgroundSet) -> Result<Self> {
        Ok(Explainer {
            cfg,
            set,
            model: load_model(cfg, set)?,
            shap_backgrounds: OnceLock::new(),
            hash: cfg.hash(),
        })
    }

    /// Evenly spaced training samples of this model's backgrounds.
    fn shap_backgrounds(&self) -> Result<&[Tensor]> {
        if let Some(b) = self.shap_backgrounds.get() {
            return Ok(b);
        }
        let manifest = load_manifest(self.cfg)?;
        let train = load_split(self.cfg, &manifest, Split::Train, self.set, &self.model)?;
        let count = self.cfg.xai.shap.background_count.clamp(1, train.len());
        let picks = (0..count).map(|i| train.inputs[i * train.len() / count].clone()).collect();
        Ok(self.shap_backgrounds.get_or_init(|| picks))
    }

    pub fn saliency(&self, input: &ExplainInput, method: Method, class: usize) -> Result<SaliencyMap> {
        let net = &self.model.net;
        let x = &input.pixels;
        let xai = &self.cfg.xai;
        match method {
            Method::Gradcam => Ok(gradcam(net, x, class)?.map),
            Method::Deeplift => Ok(deeplift(net, x, &background_reference(x.shape(), input.background), class)?.map),
            Method::Lime => {
                let (h, w) = (x.shape()[1], x.shape()[2]);
                let mask = slic_segment(x.data(), h, w, &xai.slic)?;
                Ok(lime_explain(&self.model, x, &mask, class, input.background.intensity(), &xai.lime)?.map)
            }
            Method::Shap => Ok(shap_explain(net, x, self.shap_backgrounds()?, class, &xai.shap)?.map),
            Method::EnsembleAvg | Method::EnsembleMax => {
                let cam = self.saliency(input, Method::Gradcam, class)?;
                let ldf = self.saliency(input, Method::Deeplift, class)?;
                let strategy = if method == Method::EnsembleAvg { Strategy::Average } else { Strategy::Max };
                fuse(&cam, &ldf, &EnsembleConfig { strategy, ..xai.ensemble })
            }
        }
    }

    fn method_parameters(&self, method: Method) -> (Option<u64>, serde_json::Value) {
        let xai = &self.cfg.xai;
        match method {
            Method::Lime => (Some(xai.lime.seed), json!({ "lime": xai.lime, "slic": xai.slic })),
            Method::Shap => (Some(xai.shap.seed), json!({ "shap": xai.shap })),
            Method::EnsembleAvg | Method::EnsembleMax => (None, json!({ "ensemble": xai.ensemble })),
            Method::Gradcam | Method::Deeplift => (None, json!({})),
        }
    }

    /// Explain `class` (the predicted class when `None`) and write the raw
    /// map, overlay PNG and sidecar under `dir`.
    pub fn explain(&self, input: &ExplainInput, method: Method, class: Option<usize>, dir: &Path) -> Result<Explanation> {
        let pred = self.model.predict_tensor(&input.pixels)?;
        let predicted_class = pred.class();
        let target = class.unwrap_or(predicted_class);
        let map = self.saliency(input, method, target)?;
        let (seed, method_params) = self.method_parameters(method);
        let sidecar = SaliencySidecar {
            sample_id: input.sample_id.clone(),
            method,
            target_class: target,
            height: map.height,
            width: map.width,
            seed,
            parameters: json!({
                "config_hash": self.hash,
                "model": self.set,
                "input_background": input.background,
                "predicted_class": predicted_class,
                "probabilities": pred.probabilities,
                "method": method_params,
            }),
        };
        let stem = format!("{}_{}", input.sample_id, method);
        write_saliency(dir, &stem, input.pixels.data(), &map, &sidecar, self.cfg.xai.overlay_alpha)?;
        Ok(Explanation {
            sample_id: input.sample_id.clone(),
            predicted_class,
            probabilities: pred.probabilities,
            map,
            stem: dir.join(stem),
        })
    }

    pub fn saliency_dir(&self) -> PathBuf {
        self.cfg.paths.output_dir.join("saliency").join(self.set.as_str())
    }
}

/// `explain` subcommand: one method on one input.
pub fn explain(cfg: &RunConfig, set: BackgroundSet, method: Method, input: &str, class: Option<usize>) -> Result<Explanation> {
    let explainer = Explainer::new(cfg, set)?;
    let x = ExplainInput::resolve(cfg, input)?;
    let [c, h, w] = explainer.model.input_shape();
    if x.pixels.shape() != [c, h, w] {
        return Err(Error::Data(format!(
            "{} is {:?}, the {set} model expects {c}x{h}x{w}",
            x.sample_id,
            x.pixels.shape()
        )));
    }
    explainer.explain(&x, method, class, &explainer.saliency_dir())
}

#[derive(Clone, Debug)]
pub struct EmbedOutputs {
    pub features: FeatureMatrix,
    pub pca: Embedding2D,
    pub tsne: Embedding2D,
    pub pca_clusters: ClusterDiagnostics,
    pub tsne_clusters: ClusterDiagnostics,
    pub dir: PathBuf,
}

/// PCA and t-SNE of the test split's features, with per-class k-means.
pub fn embed(cfg: &RunConfig, set: BackgroundSet) -> Result<EmbedOutputs> {
    let model = load_model(cfg, set)?;
    let manifest = load_manifest(cfg)?;
    let test_set = load_split(cfg, &manifest, Split::Test, set, &model)?;
    let features = extract_features(&model, &test_set, cfg.embed.layer)?;
    let pca_e = pca(&features, 2)?.embedding()?;
    let tsne_e = tsne(&features, &cfg.embed.tsne)?;
    let k = cfg.embed.k;
    let pca_clusters = per_class_diagnostics(&pca_e, &features.classes, &features.clusters, k, cfg.seed)?;
    let tsne_clusters = per_class_diagnostics(&tsne_e, &features.classes, &features.clusters, k, cfg.seed)?;

    let dir = cfg.paths.output_dir.join("embed").join(set.as_str());
    let mut csv = pca_e.to_csv(&features)?;
    csv.extend(tsne_e.to_csv(&features)?.lines().skip(1).map(|l| format!("{l}\n")));
    write_text(&dir.join("embedding.csv"), &csv)?;
    write_json(
        &dir.join("embedding_diagnostics.json"),
        &json!({
            "config_hash": cfg.hash(),
            "model": set,
            "layer": cfg.embed.layer,
            "samples": features.n,
            "features": features.d,
            "pca": { "diagnostics": pca_e.diagnostics, "ari": pca_clusters.ari },
            "tsne": { "diagnostics": tsne_e.diagnostics, "ari": tsne_clusters.ari },
        }),
    )?;
    Ok(EmbedOutputs {
        features,
        pca: pca_e,
        tsne: tsne_e,
        pca_clusters,
        tsne_clusters,
        dir,
    })
}

/// Methods compared in the coverage report, in series order.
pub const REPORT_METHODS: [Method; 4] = [Method::Deeplift, Method::Gradcam, Method::EnsembleAvg, Method::EnsembleMax];

#[derive(Clone, Debug)]
pub struct ReportOutputs {
    pub coverage: CoverageReport,
    pub embedding: EmbedOutputs,
    pub metrics: Metrics,
    pub summary: String,
    pub dir: PathBuf,
}

fn coverage_ordering(report: &CoverageReport) -> String {
    let mut s = String::new();
    let area = |i: usize| report.mean[i].fraction_above.iter().sum::<f64>() / report.thresholds.len() as f64;
    let mut order: Vec<usize> = (0..report.mean.len()).collect();
    order.sort_by(|&a, &b| area(b).total_cmp(&area(a)).then(a.cmp(&b)));
    let ranked: Vec<String> = order.iter().map(|&i| format!("{} ({:.4})", report.mean[i].method, area(i))).collect();
    let _ = writeln!(s, "mean coverage over thresholds: {}", ranked.join(" > "));
    for (ti, t) in report.thresholds.iter().enumerate() {
        let mut at: Vec<usize> = (0..report.mean.len()).collect();
        at.sort_by(|&a, &b| {
            report.mean[b].fraction_above[ti].total_cmp(&report.mean[a].fraction_above[ti]).then(a.cmp(&b))
        });
        let row: Vec<String> = at
            .iter()
            .map(|&i| format!("{} {:.4}", report.mean[i].method, report.mean[i].fraction_above[ti]))
            .collect();
        let _ = writeln!(s, "  t = {t:.1}: {}", row.join(", "));
    }
    s
}

/// Explain the first `samples` test items with the four compared methods,
/// then write coverage curves, the embedding and a plain-text summary.
pub fn report(cfg: &RunConfig, set: BackgroundSet, samples: usize) -> Result<ReportOutputs> {
    if samples == 0 {
        return Err(Error::Data("report needs at least one explained sample".into()));
    }
    let explainer = Explainer::new(cfg, set)?;
    let manifest = load_manifest(cfg)?;
    let test_set = load_split(cfg, &manifest, Split::Test, set, &explainer.model)?;
    let records: Vec<_> = manifest.select(Some(Split::Test), set.backgrounds()).collect();
    let dir = cfg.paths.output_dir.join("report").join(set.as_str());
    let saliency_dir = explainer.saliency_dir();

    let mut explained = Vec::new();
    for i in 0..samples.min(test_set.len()) {
        let input = ExplainInput {
            sample_id: test_set.ids[i].clone(),
            pixels: test_set.inputs[i].clone(),
            background: records[i].background,
        };
        let maps = REPORT_METHODS
            .iter()
            .map(|&m| explainer.explain(&input, m, None, &saliency_dir).map(|e| e.map))
            .collect::<Result<Vec<_>>>()?;
        explained.push((input.sample_id, maps));
    }
    let coverage = coverage_report(&explained, &cfg.xai.thresholds)?;
    write_text(&dir.join("coverage.csv"), &coverage.to_csv())?;
    write_text(&dir.join("coverage_per_sample.csv"), &coverage.per_sample_csv())?;
    coverage.write_plot(&dir.join("coverage.png"))?;
    write_json(
        &dir.join("coverage.json"),
        &json!({ "config_hash": cfg.hash(), "model": set, "mean": coverage.mean, "violations": coverage.violations }),
    )?;

    let metrics = evaluate(&explainer.model, &test_set)?;
    let embedding = embed(cfg, set)?;

    let mut summary = String::new();
    let _ = writeln!(summary, "model: {set}  config: {}", cfg.hash());
    let _ = writeln!(summary, "test samples: {}  explained: {}\n", test_set.len(), explained.len());
    let _ = writeln!(summary, "{}", Metrics::CSV_HEADER);
    let _ = writeln!(summary, "{}", metrics.csv_row(set.as_str()));
    if let Ok(table) = std::fs::read_to_string(cfg.paths.output_dir.join(METRICS_FILE)) {
        let _ = writeln!(summary, "\nall trained models:\n{}", table.trim_end());
    }
    let _ = writeln!(summary, "\ncoverage ordering");
    summary.push_str(&coverage_ordering(&coverage));
    if coverage.violations.is_empty() {
        let _ = writeln!(summary, "max-coverage identity: holds (0 violations)");
    } else {
        let _ = writeln!(summary, "max-coverage identity: VIOLATED ({} cases)", coverage.violations.len());
        for v in &coverage.violations {
            let _ = writeln!(
                summary,
                "  {} t = {:.1}: max {:.4} < best single {:.4}",
                v.sample.as_deref().unwrap_or("mean"),
                v.threshold,
                v.max_fraction,
                v.best_single
            );
        }
    }
    let _ = writeln!(
        summary,
        "\nembedding ({} features): per-class k-means ARI pca {:.4}, t-SNE {:.4}",
        embedding.features.d, embedding.pca_clusters.ari, embedding.tsne_clusters.ari
    );
    write_text(&dir.join("summary.txt"), &summary)?;
    Ok(ReportOutputs {
        coverage,
        embedding,
        metrics,
        summary,
        dir,
    })
}

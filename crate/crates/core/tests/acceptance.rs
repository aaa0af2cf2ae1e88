//! Acceptance run. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. The training criteria use the full
//! synthetic corpus and take tens of minutes on one core.

#[allow(dead_code, unused_imports)]
#[path = "xai_oracles.rs"]
mod xai_oracles;

use std::collections::BTreeMap;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use songxai::dsp::{render_spectrogram, stft, RenderParams, StftFrames, StftParams, Waveform};
use songxai::embed::pca;
use songxai::ensemble::fuse_average;
use songxai::model::LabeledSet;
use songxai::pipeline::{self, Explainer, ExplainInput, Paths, RunConfig, TrainOutcome};
use songxai::songgen::Split;
use songxai::xai::{background_reference, deeplift, Method};
use songxai::{Background, BackgroundSet};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

struct Line {
    id: usize,
    title: &'static str,
    result: Check,
}

struct Run {
    lines: Vec<Line>,
}

impl Run {
    fn check(&mut self, id: usize, title: &'static str, f: impl FnOnce() -> Check) {
        let t = Instant::now();
        eprintln!("[acceptance] criterion {id}: {title} ...");
        let result = match panic::catch_unwind(AssertUnwindSafe(f)) {
            Ok(r) => r,
            Err(payload) => Err(payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into())),
        };
        eprintln!("[acceptance] criterion {id} done in {:.1}s", t.elapsed().as_secs_f64());
        self.lines.push(Line { id, title, result });
    }
}

// ---------------------------------------------------------------- fast checks

fn autodiff() -> Check {
    let worst = autodiff_oracles::check_finite_differences();
    autodiff_oracles::check_conv_kernels();
    autodiff_oracles::check_pool_kernel();
    autodiff_oracles::check_linear_kernel();
    Ok(format!(
        "50 nets, worst relative gradient error {worst:.2e}; conv/linear within 1e-5 and pool exact on 100 shapes each"
    ))
}

fn ensemble_random() -> Result<(), String> {
    ensemble_oracles::check_max_identity_random();
    ensemble_oracles::check_equal_weight_average();
    Ok(())
}

fn lime() -> Check {
    let (hits, min_r2) = xai_oracles::check_lime_planted();
    Ok(format!("planted superpixel in top 3 on {hits}/20 seeds, lowest R2 {min_r2:.3}"))
}

fn shap() -> Check {
    let worst = xai_oracles::check_shap_linear();
    Ok(format!("10 linear models, worst |attribution - w(x - mean b)| {worst:.2e}"))
}

fn complementary_renders() -> Result<usize, String> {
    let mut state = 0x2545_F491_4F6C_DD1Du64;
    let mut next = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 40) as f32 / (1u64 << 24) as f32
    };
    let (bins, frames) = (257, 300);
    let cells: Vec<f32> = (0..bins * frames).map(|_| -140.0 + 160.0 * next()).collect();
    let synthetic = StftFrames {
        magnitude_db: cells,
        n_bins: bins,
        n_frames: frames,
        bin_hz: 93.75,
        hop_samples: 26,
        window_len: 512,
    };
    let chirp: Vec<f32> = (0..192_000)
        .map(|i| {
            let t = i as f64 / 48_000.0;
            (0.4 * (2.0 * std::f64::consts::PI * (2000.0 * t + 600.0 * t * t)).sin()) as f32
        })
        .collect();
    let real = stft(&Waveform::new(chirp, 48_000).map_err(err)?, &StftParams::default()).map_err(err)?;
    let mut pixels = 0;
    for (frames, params) in [
        (&synthetic, RenderParams { height: 64, width: 96, ..RenderParams::default() }),
        (&real, RenderParams::default()),
    ] {
        let black = render_spectrogram(frames, Background::Black, &params).map_err(err)?;
        let white = render_spectrogram(frames, Background::White, &params).map_err(err)?;
        for (i, (b, w)) in black.pixels.iter().zip(&white.pixels).enumerate() {
            ensure(b + w == 1.0, format!("pixel {i}: black {b} + white {w} != 1"))?;
        }
        pixels += black.pixels.len();
    }
    Ok(pixels)
}

fn dsp() -> Check {
    dsp_oracles::check_tone_bin();
    let atten = dsp_oracles::check_low_tone_attenuation();
    dsp_oracles::check_frame_count();
    let pixels = complementary_renders()?;
    Ok(format!(
        "3 kHz tone peaks in bin 32; 100 Hz attenuated {atten:.1} dB; 7365 frames for 4 s; black + white = 1 on {pixels} pixels"
    ))
}

// ---------------------------------------------------------------- trained runs

fn full_config(root: &Path) -> RunConfig {
    RunConfig {
        paths: Paths {
            data_dir: root.join("data"),
            checkpoint_dir: root.join("checkpoints"),
            output_dir: root.join("out"),
        },
        ..RunConfig::default()
    }
}

fn training(cfg: &RunConfig, trained: &[(TrainOutcome, f64)]) -> Check {
    let manifest = pipeline::load_manifest(cfg).map_err(err)?;
    let songs = |split| manifest.select(Some(split), &[Background::Black]).count();
    let (train_songs, test_songs) = (songs(Split::Train), songs(Split::Test));
    ensure(
        (train_songs, test_songs) == (400, 200),
        format!("split is {train_songs} train / {test_songs} test songs"),
    )?;
    let mut parts = vec![format!("{train_songs} train / {test_songs} test songs")];
    let mut failures = Vec::new();
    for (o, secs) in trained {
        let acc = o.metrics.accuracy;
        let first = o.history.epochs.first().map_or(f64::NAN, |e| e.train_loss);
        parts.push(format!(
            "{} acc {acc:.4} (epochs {}, first-epoch loss {first:.4}, {:.1} min)",
            o.set,
            o.history.epochs.len(),
            secs / 60.0
        ));
        let need = if o.set == BackgroundSet::Mixed { 0.95 } else { 0.90 };
        if acc < need {
            failures.push(format!("{} accuracy {acc:.4} < {need}", o.set));
        }
    }
    if trained.len() != 3 {
        failures.push(format!("{} of 3 models trained", trained.len()));
    }
    let detail = parts.join("; ");
    if failures.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{}: {detail}", failures.join(", ")))
    }
}

fn test_inputs(cfg: &RunConfig, explainer: &Explainer) -> Result<(LabeledSet, Vec<Background>), String> {
    let manifest = pipeline::load_manifest(cfg).map_err(err)?;
    let backgrounds = explainer.set.backgrounds();
    let set = LabeledSet::from_manifest(&manifest, &cfg.paths.data_dir, Split::Test, backgrounds, &explainer.model)
        .map_err(err)?;
    let bgs = manifest.select(Some(Split::Test), backgrounds).map(|r| r.background).collect();
    Ok((set, bgs))
}

fn deeplift_completeness(cfg: &RunConfig) -> Check {
    let small = xai_oracles::check_deeplift_pool_free();
    let explainer = Explainer::new(cfg, BackgroundSet::Mixed).map_err(err)?;
    let (set, bgs) = test_inputs(cfg, &explainer)?;
    ensure(set.len() >= 20, "fewer than 20 test samples")?;
    let mut worst = 0.0f64;
    let mut worst_id = String::new();
    let mut by_background: BTreeMap<String, (usize, f64)> = BTreeMap::new();
    for i in 0..20 {
        let x = &set.inputs[i];
        let class = explainer.model.predict_tensor(x).map_err(err)?.class();
        let d = deeplift(&explainer.model.net, x, &background_reference(x.shape(), bgs[i]), class).map_err(err)?;
        let rel = (d.contribution_sum() - d.delta).abs() / d.delta.abs().max(1e-12);
        let entry = by_background.entry(bgs[i].to_string()).or_default();
        *entry = (entry.0 + 1, entry.1.max(rel));
        if rel > worst {
            worst = rel;
            worst_id = set.ids[i].clone();
        }
    }
    let split: Vec<String> = by_background
        .iter()
        .map(|(bg, (n, w))| format!("{bg} {:.3}% over {n}", 100.0 * w))
        .collect();
    let detail = format!(
        "20 pool-free nets, worst |sum - delta| {small:.2e}; trained mixed model, 20 test samples, worst relative gap {:.3}% ({worst_id}; {})",
        100.0 * worst,
        split.join(", ")
    );
    ensure(worst <= 0.05, detail.clone())?;
    Ok(detail)
}

/// Share of the top-decile saliency mass in the last third of the columns.
fn late_share(values: &[f32], width: usize) -> f64 {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let top = values.len().div_ceil(10);
    let (mut total, mut late) = (0.0f64, 0.0f64);
    for &i in &order[..top] {
        let v = f64::from(values[i]);
        total += v;
        if 3 * (i % width) >= 2 * width {
            late += v;
        }
    }
    if total > 0.0 { late / total } else { 0.0 }
}

struct RealMaps {
    localization: Check,
    average_exact: Result<usize, String>,
}

fn real_sample_checks(cfg: &RunConfig) -> RealMaps {
    let inner = || -> Result<RealMaps, String> {
        let explainer = Explainer::new(cfg, BackgroundSet::Mixed).map_err(err)?;
        let (set, bgs) = test_inputs(cfg, &explainer)?;
        let mut shares = Vec::new();
        let mut averaged = 0;
        let mut average_error = None;
        for i in 0..set.len().min(40) {
            let input = ExplainInput {
                sample_id: set.ids[i].clone(),
                pixels: set.inputs[i].clone(),
                background: bgs[i],
            };
            let predicted = explainer.model.predict_tensor(&input.pixels).map_err(err)?.class();
            if i < 20 {
                let cam = explainer.saliency(&input, Method::Gradcam, predicted).map_err(err)?;
                let ldf = explainer.saliency(&input, Method::Deeplift, predicted).map_err(err)?;
                let avg = fuse_average(&cam, &ldf, 0.5, 0.5).map_err(err)?;
                let exact = avg.values.iter().zip(cam.values.iter().zip(&ldf.values)).all(|(&z, (&x, &y))| z == (x + y) / 2.0);
                if !exact && average_error.is_none() {
                    average_error = Some(format!("average differs from the mean on {}", input.sample_id));
                }
                averaged += 1;
            }
            if predicted != set.labels[i] {
                continue;
            }
            let map = explainer.saliency(&input, Method::EnsembleMax, predicted).map_err(err)?;
            shares.push((input.sample_id, late_share(&map.values, map.width)));
        }
        let met = shares.iter().filter(|(_, s)| *s >= 0.5).count();
        let median = {
            let mut s: Vec<f64> = shares.iter().map(|(_, v)| *v).collect();
            s.sort_by(f64::total_cmp);
            s.get(s.len() / 2).copied().unwrap_or(f64::NAN)
        };
        let detail = format!(
            "{met}/{} correctly classified samples have >= 50% of top-decile ensemble-max mass in the final third (median share {median:.3})",
            shares.len()
        );
        let localization = if shares.len() >= 20 && met as f64 >= 0.8 * shares.len() as f64 {
            Ok(detail)
        } else {
            Err(detail)
        };
        Ok(RealMaps {
            localization,
            average_exact: average_error.map_or(Ok(averaged), Err),
        })
    };
    inner().unwrap_or_else(|e| RealMaps {
        localization: Err(e.clone()),
        average_exact: Err(e),
    })
}

fn ensemble_identities(cfg: &RunConfig, average_exact: &Result<usize, String>) -> Check {
    ensemble_random()?;
    let out = pipeline::report(cfg, BackgroundSet::Black, 20).map_err(err)?;
    let n = out.coverage.per_sample.len();
    ensure(n == 20, format!("report explained {n} samples"))?;
    ensure(
        out.coverage.violations.is_empty(),
        format!("{} max-coverage violations on real samples", out.coverage.violations.len()),
    )?;
    let averaged = average_exact.clone()?;
    Ok(format!(
        "100 random pairs and {n} real samples x {} thresholds: 0 violations; 0.5/0.5 average equals the mean exactly (random pair, {averaged} real pairs)",
        out.coverage.thresholds.len()
    ))
}

fn sub_populations(cfg: &RunConfig) -> Check {
    let t = Instant::now();
    let out = pipeline::embed(cfg, BackgroundSet::Black).map_err(err)?;
    let secs = t.elapsed().as_secs_f64();
    let p = pca(&out.features, 2).map_err(err)?;
    let mut gram_err = 0.0f64;
    for a in 0..p.components.len() {
        for b in 0..p.components.len() {
            let dot: f64 = p.components[a].iter().zip(&p.components[b]).map(|(x, y)| x * y).sum();
            gram_err = gram_err.max((dot - if a == b { 1.0 } else { 0.0 }).abs());
        }
    }
    let ari = out.tsne_clusters.ari;
    let detail = format!(
        "{} test samples, {} features: t-SNE per-class k-means ARI {ari:.3} (PCA {:.3}); PCA Gram error {gram_err:.1e}; {secs:.1}s",
        out.features.n, out.features.d, out.pca_clusters.ari
    );
    ensure(ari >= 0.6 && gram_err <= 1e-8 && secs <= 300.0, detail.clone())?;
    Ok(detail)
}

// ---------------------------------------------------------------- rerun

const SMALL: &str = r#"
seed = 42
[dataset]
per_class = 12
[model]
conv_channels = [4, 8, 8, 8, 8]
fc_sizes = [16, 16, 2]
[train]
epochs = 2
batch_size = 8
[xai.shap]
background_count = 4
[embed]
k = 2
[embed.tsne]
iterations = 300
"#;

fn snapshot(dir: &Path, root: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) -> std::io::Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            snapshot(&path, root, out)?;
        } else {
            let rel = path.strip_prefix(root).expect("inside root").to_path_buf();
            out.insert(rel, std::fs::read(&path)?);
        }
    }
    Ok(())
}

fn small_pipeline(root: &Path) -> Result<BTreeMap<PathBuf, Vec<u8>>, String> {
    let mut cfg = RunConfig::from_toml(SMALL).map_err(err)?;
    cfg.paths = Paths {
        data_dir: root.join("data"),
        checkpoint_dir: root.join("checkpoints"),
        output_dir: root.join("out"),
    };
    for sub in ["data", "checkpoints", "out"] {
        let _ = std::fs::remove_dir_all(root.join(sub));
    }
    pipeline::synth(&cfg).map_err(err)?;
    pipeline::train(&cfg, &BackgroundSet::ALL, false).map_err(err)?;
    pipeline::report(&cfg, BackgroundSet::Black, 3).map_err(err)?;
    pipeline::report(&cfg, BackgroundSet::Mixed, 3).map_err(err)?;
    let mut files = BTreeMap::new();
    snapshot(root, root, &mut files).map_err(err)?;
    Ok(files)
}

fn reproducibility() -> Check {
    let dir = tempfile::tempdir().map_err(err)?;
    let first = small_pipeline(dir.path())?;
    let second = small_pipeline(dir.path())?;
    let count = |ext: &str| first.keys().filter(|p| p.extension().is_some_and(|e| e == ext)).count();
    let differing: Vec<String> = first
        .keys()
        .chain(second.keys())
        .filter(|k| first.get(*k) != second.get(*k))
        .map(|k| k.display().to_string())
        .collect();
    ensure(count("bwxa") == 3, format!("{} checkpoints written", count("bwxa")))?;
    ensure(differing.is_empty(), format!("files differ between runs: {}", differing.join(", ")))?;
    Ok(format!(
        "reduced corpus rerun: {} files identical, including {} CSVs and {} checkpoints",
        first.len(),
        count("csv"),
        count("bwxa")
    ))
}

fn main() {
    panic::set_hook(Box::new(|_| {}));
    let started = Instant::now();
    let mut run = Run { lines: Vec::new() };

    run.check(2, "autodiff correctness", autodiff);
    run.check(6, "LIME planted superpixel", lime);
    run.check(7, "SHAP linear exactness", shap);
    run.check(9, "DSP fidelity", dsp);
    run.check(10, "reproducibility", reproducibility);

    let root = tempfile::tempdir().expect("temp dir");
    let cfg = full_config(root.path());
    eprintln!("[acceptance] generating the synthetic corpus");
    let prepared = pipeline::synth(&cfg).map_err(err);
    let mut trained = Vec::new();
    let mut train_error = prepared.err();
    if train_error.is_none() {
        for set in BackgroundSet::ALL {
            eprintln!("[acceptance] training the {set} model");
            let t = Instant::now();
            match pipeline::train(&cfg, &[set], false) {
                Ok(mut o) => trained.push((o.remove(0), t.elapsed().as_secs_f64())),
                Err(e) => {
                    train_error = Some(format!("training {set}: {e}"));
                    break;
                }
            }
        }
    }
    let ready = || train_error.clone().map_or(Ok(()), Err);

    run.check(1, "synthetic-corpus accuracy", || {
        ready()?;
        training(&cfg, &trained)
    });
    run.check(3, "DeepLIFT completeness", || {
        ready()?;
        deeplift_completeness(&cfg)
    });
    let real = if train_error.is_none() {
        real_sample_checks(&cfg)
    } else {
        RealMaps {
            localization: ready().map(|_| String::new()),
            average_exact: ready().map(|_| 0),
        }
    };
    run.check(4, "ensemble identities", || {
        ready()?;
        ensemble_identities(&cfg, &real.average_exact)
    });
    run.check(5, "saliency localization", || real.localization.clone());
    run.check(8, "sub-population analysis", || {
        ready()?;
        sub_populations(&cfg)
    });

    run.lines.sort_by_key(|l| l.id);
    println!();
    let mut failed = 0;
    for l in &run.lines {
        match &l.result {
            Ok(d) => println!("criterion {:>2} PASS  {}: {d}", l.id, l.title),
            Err(d) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {}: {d}", l.id, l.title);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.1} min",
        run.lines.len() - failed,
        started.elapsed().as_secs_f64() / 60.0
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

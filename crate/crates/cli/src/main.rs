use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use songxai::pipeline::{self, RunConfig};
use songxai::xai::Method;
use songxai::{Background, BackgroundSet, Error};

#[derive(Parser)]
#[command(name = "songxai", version, about = "Spectrogram CNN classifier with saliency explanations")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    checkpoint_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Image size as the canonical 480x960 divided by 1, 2 or 4.
    #[arg(long, global = true)]
    scale: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the effective configuration as TOML.
    Config,
    /// Generate the synthetic song corpus.
    Synth {
        #[arg(long)]
        per_class: Option<usize>,
        #[arg(long)]
        clusters: Option<u32>,
    },
    /// Render external WAV files (or directories of them) to spectrograms.
    Prep {
        #[arg(long, required = true, num_args = 1..)]
        input: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "black,white")]
        backgrounds: Vec<Background>,
    },
    /// Train one model per background set.
    Train {
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        backgrounds: Option<Vec<BackgroundSet>>,
        /// Continue from existing checkpoints.
        #[arg(long)]
        resume: bool,
    },
    /// Test-split metrics of a trained model.
    Eval {
        #[arg(long, default_value = "mixed")]
        background: BackgroundSet,
    },
    /// Saliency map for one spectrogram.
    Explain {
        /// lime, shap, gradcam, deeplift, ensemble-avg or ensemble-max.
        #[arg(long)]
        method: Method,
        /// PNG path or sample id from the data directory.
        #[arg(long)]
        input: String,
        /// Target class; defaults to the predicted class.
        #[arg(long)]
        class: Option<usize>,
        #[arg(long, default_value = "mixed")]
        background: BackgroundSet,
    },
    /// Coverage curves, embedding and summary for explained test samples.
    Report {
        #[arg(long, default_value = "mixed")]
        background: BackgroundSet,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// PCA and t-SNE of model features.
    Embed {
        #[arg(long, default_value = "mixed")]
        background: BackgroundSet,
        #[arg(long)]
        layer: Option<songxai::embed::FeatureLayer>,
        #[arg(long)]
        perplexity: Option<f64>,
    },
}

fn load_config(c: &Common) -> Result<RunConfig, Error> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(d) = &c.data_dir {
        cfg.paths.data_dir = d.clone();
    }
    if let Some(d) = &c.checkpoint_dir {
        cfg.paths.checkpoint_dir = d.clone();
    }
    if let Some(d) = &c.out_dir {
        cfg.paths.output_dir = d.clone();
    }
    if let Some(s) = c.scale {
        cfg.set_scale(s)?;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Error> {
    let mut cfg = load_config(&cli.common)?;
    match cli.command {
        Command::Config => {
            cfg.validate()?;
            print!("{}", cfg.to_toml()?);
        }
        Command::Synth { per_class, clusters } => {
            if let Some(n) = per_class {
                cfg.dataset.per_class = n;
            }
            if let Some(k) = clusters {
                cfg.dataset.clusters_per_class = k;
            }
            cfg.validate()?;
            let m = pipeline::synth(&cfg)?;
            println!("wrote {} spectrograms to {}", m.samples.len(), cfg.paths.data_dir.display());
        }
        Command::Prep { input, out, backgrounds } => {
            let written = pipeline::prep(&cfg, &input, &out, &backgrounds)?;
            println!("wrote {} spectrograms to {}", written.len(), out.display());
        }
        Command::Train { epochs, batch_size, backgrounds, resume } => {
            if let Some(e) = epochs {
                cfg.train.epochs = e;
            }
            if let Some(b) = batch_size {
                cfg.train.batch_size = b;
            }
            if let Some(b) = backgrounds {
                cfg.train.backgrounds = b;
            }
            cfg.validate()?;
            let sets = cfg.train.backgrounds.clone();
            for o in pipeline::train(&cfg, &sets, resume)? {
                println!(
                    "{}: accuracy {:.4} f1 {:.4} ({} steps) -> {}",
                    o.set,
                    o.metrics.accuracy,
                    o.metrics.f1,
                    o.optimizer_steps,
                    o.checkpoint.display()
                );
            }
        }
        Command::Eval { background } => {
            let m = pipeline::eval(&cfg, background)?;
            println!("{}", songxai::model::Metrics::CSV_HEADER);
            println!("{}", m.csv_row(background.as_str()));
        }
        Command::Explain { method, input, class, background } => {
            let e = pipeline::explain(&cfg, background, method, &input, class)?;
            println!(
                "{} {}: class {} (predicted {}) -> {}.{{bin,png,json}}",
                e.sample_id,
                method,
                e.map.target_class,
                e.predicted_class,
                e.stem.display()
            );
        }
        Command::Report { background, samples } => {
            let n = samples.unwrap_or(cfg.xai.report_samples);
            let r = pipeline::report(&cfg, background, n)?;
            print!("{}", r.summary);
            println!("report written to {}", r.dir.display());
        }
        Command::Embed { background, layer, perplexity } => {
            if let Some(l) = layer {
                cfg.embed.layer = l;
            }
            if let Some(p) = perplexity {
                cfg.embed.tsne.perplexity = p;
            }
            let e = pipeline::embed(&cfg, background)?;
            println!(
                "{} samples x {} features; per-class ARI pca {:.4} t-SNE {:.4} -> {}",
                e.features.n,
                e.features.d,
                e.pca_clusters.ari,
                e.tsne_clusters.ari,
                e.dir.display()
            );
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_) | Error::Config(_) => 2,
        Error::NonFinite(_) => 4,
        _ => 3,
    }
}

fn init_threads() -> Result<(), Error> {
    if let Ok(v) = std::env::var("SONGXAI_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Config(format!("SONGXAI_THREADS must be a positive integer, got {v:?}")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match init_threads().and_then(|()| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

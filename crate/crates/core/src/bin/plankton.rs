use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use plankton::clustering::{self, harden, read_labels, write_labels};
use plankton::data::{make_splits, redraw_folds, Manifest, SplitPlan};
use plankton::embedder::{encode, train, write_history, EmbedderModel, InputShape, Variant};
use plankton::experiment::{
    self, ensure_features, export_latents, load_dataset, report, synthetic, Dataset, DataConfig, EmbedderSection,
    ExperimentConfig, ExperimentRecord, Heads,
};
use plankton::features::Layout;
use plankton::metrics::{accuracy, overlaps, purity};
use plankton::nn::Checkpoint;
use plankton::supervised::{fc_train, grid_search, ridge_fit, RidgeParams};
use plankton::{Error, Result};

#[derive(Parser)]
#[command(name = "plankton", version, about = "Plankton image embedding, clustering and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract CNN features for a manifest into a feature cache.
    Extract {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        cache: PathBuf,
        #[arg(long, default_value = "r2")]
        layout: Layout,
    },
    /// Train the embedder for one repeat and write its checkpoint.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value_t = 0)]
        repeat: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit fuzzy c-means on the latents of a trained embedder.
    Cluster {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 0)]
        repeat: usize,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Score cluster labels against the manifest classes.
    Evaluate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        labels: PathBuf,
        /// Restrict to the test ids of this split file.
        #[arg(long)]
        split: Option<PathBuf>,
    },
    /// Train the supervised heads on the latents of a trained embedder.
    Classify {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 0)]
        repeat: usize,
    },
    /// Run the full protocol and write the experiment record.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Render tables from experiment records.
    Report {
        #[arg(required = true)]
        records: Vec<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        text: Option<PathBuf>,
    },
    /// Write the latents of one repeat as CSV.
    ExportLatents {
        #[arg(long)]
        record: PathBuf,
        #[arg(long, default_value_t = 0)]
        repeat: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Config file plus field overrides.
#[derive(Args, Clone)]
struct ConfigArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Generate `classes,per_class,CxHxW[,seed]` synthetic features instead of reading a manifest.
    #[arg(long)]
    synthetic: Option<String>,
    #[arg(long)]
    layout: Option<InputShape>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    feature_cache: Option<PathBuf>,
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    latent_dim: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    n_clusters: Option<usize>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    split_seed: Option<u64>,
    #[arg(long)]
    supervised: Option<Heads>,
}

fn parse_synthetic(s: &str) -> Result<experiment::SyntheticConfig> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |p: &str| p.parse::<usize>().map_err(|_| Error::Config(format!("bad synthetic spec {s:?}")));
    if !(3..=4).contains(&parts.len()) {
        return Err(Error::Config(format!("synthetic spec {s:?} is not classes,per_class,CxHxW[,seed]")));
    }
    Ok(experiment::SyntheticConfig {
        classes: num(parts[0])?,
        per_class: num(parts[1])?,
        shape: parts[2].parse()?,
        seed: parts.get(3).map(|p| num(p)).transpose()?.unwrap_or(0) as u64,
        noise: 0.1,
    })
}

impl ConfigArgs {
    fn build(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig {
                name: "experiment".into(),
                output_dir: PathBuf::from("runs"),
                data: DataConfig {
                    manifest: None,
                    synthetic: None,
                    layout: InputShape::R2,
                    model: None,
                    feature_cache: None,
                    train_ratio: 0.8,
                    split_seed: 0,
                },
                embedder: EmbedderSection {
                    variant: self
                        .variant
                        .ok_or_else(|| Error::Config("--variant is required without --config".into()))?,
                    latent_dim: self
                        .latent_dim
                        .ok_or_else(|| Error::Config("--latent-dim is required without --config".into()))?,
                    epochs: 100,
                    batch_size: 64,
                    lr: 0.001,
                    sgd_decay: 0.95,
                    optimizer: None,
                    channels: [32, 64, 128],
                },
                clustering: Default::default(),
                protocol: Default::default(),
                supervised: Default::default(),
            },
        };
        macro_rules! set {
            ($src:expr => $dst:expr) => {
                if let Some(v) = $src.clone() {
                    $dst = v;
                }
            };
        }
        set!(self.name => cfg.name);
        set!(self.output_dir => cfg.output_dir);
        if let Some(m) = &self.manifest {
            cfg.data.manifest = Some(m.clone());
            cfg.data.synthetic = None;
        }
        if let Some(s) = &self.synthetic {
            cfg.data.synthetic = Some(parse_synthetic(s)?);
            cfg.data.manifest = None;
        }
        set!(self.layout => cfg.data.layout);
        if self.model.is_some() {
            cfg.data.model = self.model.clone();
        }
        if self.feature_cache.is_some() {
            cfg.data.feature_cache = self.feature_cache.clone();
        }
        set!(self.split_seed => cfg.data.split_seed);
        set!(self.variant => cfg.embedder.variant);
        set!(self.latent_dim => cfg.embedder.latent_dim);
        set!(self.epochs => cfg.embedder.epochs);
        set!(self.batch_size => cfg.embedder.batch_size);
        set!(self.lr => cfg.embedder.lr);
        if self.n_clusters.is_some() {
            cfg.clustering.n_clusters = self.n_clusters;
        }
        if let Some(r) = self.repeats {
            cfg.protocol.repeats = r;
            if cfg.protocol.seeds.as_ref().is_some_and(|s| s.len() != r) {
                cfg.protocol.seeds = None;
            }
        }
        set!(self.folds => cfg.protocol.folds);
        if self.seeds.is_some() {
            cfg.protocol.seeds = self.seeds.clone();
            cfg.protocol.repeats = self.seeds.as_ref().map_or(0, Vec::len);
        }
        set!(self.supervised => cfg.supervised.heads);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn manifest_of(cfg: &ExperimentConfig) -> Result<Manifest> {
    match (&cfg.data.synthetic, &cfg.data.manifest) {
        (Some(s), _) => Ok(synthetic::generate(s)?.0),
        (None, Some(m)) => Manifest::load(m),
        (None, None) => Err(Error::Config("no data source".into())),
    }
}

/// Split and seed for `repeat`, matching what `run` uses.
fn repeat_plan(cfg: &ExperimentConfig, manifest: &Manifest, repeat: usize) -> Result<(SplitPlan, usize, u64)> {
    let seeds = cfg.seeds();
    let seed = *seeds
        .get(repeat)
        .ok_or_else(|| Error::Config(format!("repeat {repeat} out of range (repeats = {})", seeds.len())))?;
    let base = make_splits(manifest, cfg.data.train_ratio, cfg.protocol.folds, cfg.data.split_seed)?;
    let plan = redraw_folds(manifest, &base, seed)?;
    let val = repeat % plan.k();
    Ok((plan, val, seed))
}

fn rows(ds: &Dataset, ids: &[String]) -> Result<Vec<usize>> {
    ds.rows(ids)
}

fn latents_of(ds: &Dataset, checkpoint: &Path) -> Result<(EmbedderModel<f32>, Vec<Vec<f32>>)> {
    let model = EmbedderModel::from_checkpoint(&Checkpoint::load(checkpoint)?)?;
    let lat = encode(&model, &ds.samples)?;
    Ok((model, lat))
}

fn f64_rows(lat: &[Vec<f32>], rows: &[usize]) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|&i| lat[i].iter().map(|&v| v as f64).collect())
        .collect()
}

fn print_json(v: serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(&v).unwrap_or_default());
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Extract {
            manifest,
            model,
            cache,
            layout,
        } => {
            let m = Manifest::load(&manifest).map_err(|e| e.in_stage("extract", 0))?;
            let store = ensure_features(&m, layout, Some(&model), &cache).map_err(|e| e.in_stage("extract", 0))?;
            println!("{} feature tensors in {}", store.len(), cache.display());
        }
        Command::Train { cfg, repeat, out } => {
            let cfg = cfg.build()?;
            let ds = load_dataset(&cfg).map_err(|e| e.in_stage("extract", repeat))?;
            let (plan, val, seed) = repeat_plan(&cfg, &ds.manifest, repeat).map_err(|e| e.in_stage("split", repeat))?;
            let fit = rows(&ds, &plan.fit_ids(val))?;
            let mut model = EmbedderModel::build(&cfg.embedder_config(seed)?)?;
            let samples: Vec<&[f32]> = fit.iter().map(|&i| ds.samples[i].as_slice()).collect();
            let history = train(&mut model, &samples).map_err(|e| e.in_stage("train", repeat))?;
            model.to_checkpoint()?.save(&out)?;
            write_history(&out.with_extension("history.csv"), &history)?;
            let last = history.last().map_or(f64::NAN, |h| h.mean_loss);
            println!("trained {} on {} samples, final loss {last:.6}", cfg.algorithm_label(), fit.len());
        }
        Command::Cluster {
            cfg,
            checkpoint,
            repeat,
            out_dir,
        } => {
            let cfg = cfg.build()?;
            let ds = load_dataset(&cfg).map_err(|e| e.in_stage("extract", repeat))?;
            let (plan, val, seed) = repeat_plan(&cfg, &ds.manifest, repeat).map_err(|e| e.in_stage("split", repeat))?;
            let (_, lat) = latents_of(&ds, &checkpoint).map_err(|e| e.in_stage("encode", repeat))?;
            let fuzzy = cfg.fuzzy_config(ds.manifest.n_classes(), seed);
            let fit = f64_rows(&lat, &rows(&ds, &plan.fit_ids(val))?);
            let model = clustering::fit(&fit, &fuzzy).map_err(|e| e.in_stage("cluster", repeat))?;
            std::fs::create_dir_all(&out_dir).map_err(|e| Error::Io {
                path: out_dir.clone(),
                source: e,
            })?;
            model.save(&out_dir.join("clusters.json"))?;
            let all: Vec<usize> = (0..ds.samples.len()).collect();
            let labels = harden(&model.assign(&f64_rows(&lat, &all), fuzzy.m)?);
            let ids: Vec<String> = ds.manifest.entries.iter().map(|e| e.source_id.clone()).collect();
            write_labels(&out_dir.join("labels.csv"), &ids, &labels)?;
            plan.save(&out_dir.join("split.json"))?;
            println!(
                "{} clusters after {} iterations; labels in {}",
                model.n_clusters(),
                model.iterations_run,
                out_dir.join("labels.csv").display()
            );
        }
        Command::Evaluate { cfg, labels, split } => {
            let cfg = cfg.build()?;
            let manifest = manifest_of(&cfg).map_err(|e| e.in_stage("evaluate", 0))?;
            let assigned = read_labels(&labels)?;
            let keep: Option<std::collections::HashSet<String>> = match &split {
                Some(p) => Some(SplitPlan::load(p)?.test_ids.into_iter().collect()),
                None => None,
            };
            let mut clusters = Vec::new();
            let mut classes = Vec::new();
            for (id, c) in assigned {
                if keep.as_ref().is_some_and(|k| !k.contains(&id)) {
                    continue;
                }
                let e = manifest
                    .entry(&id)
                    .ok_or_else(|| Error::Invalid(format!("label file names unknown id {id:?}")))?;
                clusters.push(c);
                classes.push(manifest.class_index(&e.label).expect("label from manifest"));
            }
            let p = purity(&clusters, &classes).map_err(|e| e.in_stage("evaluate", 0))?;
            let o = overlaps(&clusters, &classes)?;
            print_json(json!({"samples": clusters.len(), "purity": p, "overlaps": o}));
        }
        Command::Classify {
            cfg,
            checkpoint,
            repeat,
        } => {
            let cfg = cfg.build()?;
            let heads = match cfg.supervised.heads {
                Heads::None => Heads::Both,
                h => h,
            };
            let ds = load_dataset(&cfg).map_err(|e| e.in_stage("extract", repeat))?;
            let (plan, _, seed) = repeat_plan(&cfg, &ds.manifest, repeat).map_err(|e| e.in_stage("split", repeat))?;
            let (_, lat) = latents_of(&ds, &checkpoint).map_err(|e| e.in_stage("encode", repeat))?;
            let classes = ds.classes();
            let tr = rows(&ds, &plan.train_ids)?;
            let te = rows(&ds, &plan.test_ids)?;
            let ytr: Vec<usize> = tr.iter().map(|&i| classes[i]).collect();
            let yte: Vec<usize> = te.iter().map(|&i| classes[i]).collect();
            let mut out = serde_json::Map::new();
            if heads.ridge() {
                let pos: std::collections::HashMap<usize, usize> =
                    tr.iter().enumerate().map(|(j, &i)| (i, j)).collect();
                let folds = plan
                    .folds
                    .iter()
                    .map(|f| Ok(rows(&ds, f)?.iter().map(|i| pos[i]).collect()))
                    .collect::<Result<Vec<Vec<usize>>>>()?;
                let xtr = f64_rows(&lat, &tr);
                let s = &cfg.supervised;
                let best = grid_search(&xtr, &ytr, &s.lambdas, &s.gammas, &folds)
                    .map_err(|e| e.in_stage("supervised", repeat))?;
                let m = ridge_fit(&xtr, &ytr, RidgeParams::new(best.lambda, best.gamma))?;
                let acc = accuracy(&m.predict(&f64_rows(&lat, &te))?, &yte)?;
                out.insert(
                    "ridge".into(),
                    json!({"lambda": best.lambda, "gamma": best.gamma, "cv_accuracy": best.mean_accuracy, "test_accuracy": acc}),
                );
            }
            if heads.fc() {
                let mut fc = cfg.supervised.fc.clone();
                fc.seed = seed;
                let xtr: Vec<&[f32]> = tr.iter().map(|&i| lat[i].as_slice()).collect();
                let xte: Vec<&[f32]> = te.iter().map(|&i| lat[i].as_slice()).collect();
                let (clf, _) = fc_train(&xtr, &ytr, &fc).map_err(|e| e.in_stage("supervised", repeat))?;
                out.insert("fc".into(), json!({"test_accuracy": accuracy(&clf.predict(&xte)?, &yte)?}));
            }
            print_json(serde_json::Value::Object(out));
        }
        Command::Run { cfg } => {
            let cfg = cfg.build()?;
            let record = experiment::run(&cfg)?;
            println!("{}", record.summary_line());
            println!(
                "record: {}",
                experiment::record_dir(&cfg).join(experiment::RECORD_FILE).display()
            );
        }
        Command::Report { records, csv, text } => {
            let recs = records
                .iter()
                .map(|p| ExperimentRecord::load(p))
                .collect::<Result<Vec<_>>>()?;
            let rep = report(&recs)?;
            print!("{}", rep.text);
            if let Some(p) = csv {
                std::fs::write(&p, &rep.csv).map_err(|e| Error::Io { path: p, source: e })?;
            }
            if let Some(p) = text {
                std::fs::write(&p, &rep.text).map_err(|e| Error::Io { path: p, source: e })?;
            }
        }
        Command::ExportLatents { record, repeat, out } => {
            let n = export_latents(&record, repeat, &out)?;
            println!("wrote {n} rows to {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

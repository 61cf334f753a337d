use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::record::{
    ExperimentRecord, RepeatArtifacts, RepeatRecord, RidgeOutcome, RunStatus, METRICS_FILE, RECORD_FILE,
};
use super::synthetic;
use crate::clustering::{self, harden, write_labels};
use crate::data::{make_splits, preprocess_file, redraw_folds, Manifest, SplitPlan};
use crate::embedder::{encode, evaluate_loss, train, write_history, EmbedderModel, InputShape};
use crate::error::{Error, Result};
use crate::features::{npy, FeatureStore, Layout, StoreMetadata};
use crate::metrics::{aggregate, overlaps, purity, accuracy, MetricSummary};
use crate::nn::Checkpoint;
use crate::supervised::{fc_train, grid_search, ridge_fit, RidgeParams};

/// Samples in manifest order plus an id lookup.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: Manifest,
    pub samples: Vec<Vec<f32>>,
    pub extractor_sha256: Option<String>,
    index: HashMap<String, usize>,
}

impl Dataset {
    pub fn new(manifest: Manifest, samples: Vec<Vec<f32>>, extractor_sha256: Option<String>) -> Result<Self> {
        if samples.len() != manifest.len() {
            return Err(Error::shape(manifest.len(), samples.len()));
        }
        let index = manifest
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.source_id.clone(), i))
            .collect();
        Ok(Self {
            manifest,
            samples,
            extractor_sha256,
            index,
        })
    }

    pub fn position(&self, id: &str) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::invalid(format!("unknown source id {id:?}")))
    }

    pub fn rows(&self, ids: &[String]) -> Result<Vec<usize>> {
        ids.iter().map(|id| self.position(id)).collect()
    }

    /// Class index per manifest entry.
    pub fn classes(&self) -> Vec<usize> {
        self.manifest.class_indices()
    }
}

/// Loads images, features or synthetic samples as the config asks.
pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    if let Some(s) = &cfg.data.synthetic {
        let (manifest, samples) = synthetic::generate(s)?;
        return Dataset::new(manifest, samples, None);
    }
    let path = cfg
        .data
        .manifest
        .as_deref()
        .ok_or_else(|| Error::Config("no manifest".into()))?;
    let manifest = Manifest::load(path)?;
    let layout = match cfg.data.layout {
        InputShape::Image => {
            let samples = manifest
                .entries
                .iter()
                .map(|e| preprocess_file(&e.path, e.source_id.clone()).map(|t| t.data))
                .collect::<Result<Vec<_>>>()?;
            return Dataset::new(manifest, samples, None);
        }
        InputShape::R1 => Layout::R1,
        InputShape::R2 => Layout::R2,
        other => return Err(Error::Config(format!("layout {other} needs synthetic data"))),
    };
    let cache = cfg
        .data
        .feature_cache
        .clone()
        .unwrap_or_else(|| record_dir(cfg).join(format!("features_{layout}")));
    let store = ensure_features(&manifest, layout, cfg.data.model.as_deref(), &cache)?;
    let ids: Vec<&str> = manifest.entries.iter().map(|e| e.source_id.as_str()).collect();
    let samples = store.load(&ids, layout)?.into_iter().map(|f| f.data).collect();
    let sha = store.metadata().model_sha256.clone();
    Dataset::new(manifest, samples, Some(sha))
}

/// Returns the store at `root` holding features for every manifest entry,
/// extracting whatever it lacks with `model`.
pub fn ensure_features(manifest: &Manifest, layout: Layout, model: Option<&Path>, root: &Path) -> Result<FeatureStore> {
    let existing = if root.join(crate::features::INDEX_FILE).exists() {
        Some(FeatureStore::open(root)?)
    } else {
        None
    };
    if let (Some(store), Some(model)) = (&existing, model) {
        let bytes = std::fs::read(model).map_err(|e| Error::io(model, e))?;
        let sha = crate::features::sha256_hex(&bytes);
        if sha != store.metadata().model_sha256 {
            return Err(Error::Store(format!(
                "{} was extracted with model {}, not {} ({sha})",
                root.display(),
                store.metadata().model_sha256,
                model.display()
            )));
        }
    }
    let missing: Vec<_> = manifest
        .entries
        .iter()
        .filter(|e| !existing.as_ref().is_some_and(|s| s.contains(&e.source_id)))
        .collect();
    if missing.is_empty() {
        if let Some(store) = existing {
            return Ok(store);
        }
    }
    let model = model.ok_or_else(|| {
        Error::Model(format!(
            "{} samples lack cached features and no extractor model is configured",
            missing.len()
        ))
    })?;
    extract_into(root, layout, model, &missing)
}

#[cfg(feature = "onnx")]
fn extract_into(
    root: &Path,
    layout: Layout,
    model: &Path,
    entries: &[&crate::data::ManifestEntry],
) -> Result<FeatureStore> {
    use crate::features::{reshape_features, Extractor};
    let extractor = Extractor::load(model)?;
    let mut store = FeatureStore::create(
        root,
        StoreMetadata {
            model_sha256: extractor.model_sha256().to_string(),
            layout,
        },
    )?;
    for chunk in entries.chunks(crate::features::DEFAULT_BATCH * 4) {
        let images = chunk
            .iter()
            .map(|e| preprocess_file(&e.path, e.source_id.clone()))
            .collect::<Result<Vec<_>>>()?;
        let feats = extractor.extract(&images)?;
        let items: Vec<_> = feats.iter().map(|f| reshape_features(f, layout)).collect();
        store.store(&items)?;
        log::info!("extracted {} / {} samples", store.len(), entries.len());
    }
    Ok(store)
}

#[cfg(not(feature = "onnx"))]
fn extract_into(
    _root: &Path,
    _layout: Layout,
    _model: &Path,
    _entries: &[&crate::data::ManifestEntry],
) -> Result<FeatureStore> {
    Err(Error::Model("built without ONNX support".into()))
}

/// Ids and class labels of the rows in a latents file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentIndex {
    pub source_ids: Vec<String>,
    pub class_labels: Vec<String>,
}

fn to_f64(rows: &[Vec<f32>]) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|r| r.iter().map(|&v| v as f64).collect())
        .collect()
}

fn pick<T: Clone>(all: &[T], rows: &[usize]) -> Vec<T> {
    rows.iter().map(|&i| all[i].clone()).collect()
}

struct Timer<'a> {
    stages: &'a mut BTreeMap<String, f64>,
}

impl Timer<'_> {
    fn time<T>(&mut self, stage: &str, repeat: usize, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let out = f().map_err(|e| e.in_stage(stage, repeat));
        *self.stages.entry(stage.to_string()).or_default() += t.elapsed().as_secs_f64();
        out
    }
}

/// Directory that holds the record and artifacts of `cfg`.
pub fn record_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output_dir.join(&cfg.name)
}

/// Runs the full protocol: data preparation once, then per repeat a fold
/// redraw, embedder training, encoding, clustering and evaluation. The
/// record is rewritten after every repeat, so a failure leaves the finished
/// repeats on disk.
pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentRecord> {
    let start = Instant::now();
    let t = Instant::now();
    let ds = load_dataset(cfg).map_err(|e| e.in_stage("extract", 0))?;
    let extract_secs = t.elapsed().as_secs_f64();
    run_on(cfg, &ds, start, extract_secs)
}

/// [`run`] on an already-loaded dataset.
pub fn run_on(cfg: &ExperimentConfig, ds: &Dataset, start: Instant, extract_secs: f64) -> Result<ExperimentRecord> {
    cfg.validate()?;
    let dir = record_dir(cfg);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut record = ExperimentRecord {
        name: cfg.name.clone(),
        dataset_name: ds.manifest.dataset_name.clone(),
        algorithm: cfg.algorithm_label(),
        latent_dim: cfg.embedder.latent_dim,
        config: cfg.clone(),
        config_hash: cfg.hash()?,
        extractor_sha256: ds.extractor_sha256.clone(),
        status: RunStatus::Partial,
        error: None,
        repeats: Vec::new(),
        purity: None,
        overlaps: None,
        validation_purity: None,
        ridge_accuracy: None,
        fc_accuracy: None,
        wall_clock_seconds: 0.0,
        stage_seconds: BTreeMap::from([("extract".to_string(), extract_secs)]),
    };
    let base = make_splits(&ds.manifest, cfg.data.train_ratio, cfg.protocol.folds, cfg.data.split_seed)
        .map_err(|e| e.in_stage("split", 0))?;
    base.save(&dir.join("split.json"))?;

    for (r, seed) in cfg.seeds().into_iter().enumerate() {
        match run_repeat(cfg, ds, &base, r, seed, &dir) {
            Ok(rep) => {
                for (k, v) in &rep.stage_seconds {
                    *record.stage_seconds.entry(k.clone()).or_default() += v;
                }
                record.repeats.push(rep);
                summarize(&mut record)?;
                record.wall_clock_seconds = start.elapsed().as_secs_f64();
                record.save(&dir.join(RECORD_FILE))?;
            }
            Err(e) => {
                record.error = Some(e.to_string());
                record.wall_clock_seconds = start.elapsed().as_secs_f64();
                record.save(&dir.join(RECORD_FILE))?;
                return Err(e);
            }
        }
    }
    record.status = RunStatus::Complete;
    record.wall_clock_seconds = start.elapsed().as_secs_f64();
    record.save(&dir.join(RECORD_FILE))?;
    let metrics = serde_json::to_string_pretty(&record.metric_lines())?;
    let mpath = dir.join(METRICS_FILE);
    std::fs::write(&mpath, metrics).map_err(|e| Error::io(&mpath, e))?;
    Ok(record)
}

fn summarize(record: &mut ExperimentRecord) -> Result<()> {
    let reps = &record.repeats;
    let col = |f: &dyn Fn(&RepeatRecord) -> Option<f64>| -> Result<Option<MetricSummary>> {
        let v: Vec<f64> = reps.iter().filter_map(f).collect();
        if v.len() == reps.len() && !v.is_empty() {
            aggregate(&v).map(Some)
        } else {
            Ok(None)
        }
    };
    record.purity = col(&|r| Some(r.purity))?;
    record.overlaps = col(&|r| Some(r.overlaps as f64))?;
    record.validation_purity = col(&|r| Some(r.validation_purity))?;
    record.ridge_accuracy = col(&|r| r.ridge.as_ref().map(|o| o.test_accuracy))?;
    record.fc_accuracy = col(&|r| r.fc_accuracy)?;
    Ok(())
}

fn rel(dir: &Path, name: String) -> (PathBuf, PathBuf) {
    (dir.join(&name), PathBuf::from(name))
}

fn run_repeat(
    cfg: &ExperimentConfig,
    ds: &Dataset,
    base: &SplitPlan,
    r: usize,
    seed: u64,
    dir: &Path,
) -> Result<RepeatRecord> {
    let mut stages = BTreeMap::new();
    let mut timer = Timer { stages: &mut stages };
    let mut artifacts = RepeatArtifacts::default();
    let classes = ds.classes();

    let plan = timer.time("split", r, || redraw_folds(&ds.manifest, base, seed))?;
    let val_fold = r % plan.k();
    let fit_rows = ds.rows(&plan.fit_ids(val_fold))?;
    let val_rows = ds.rows(&plan.folds[val_fold])?;
    let test_rows = ds.rows(&plan.test_ids)?;

    let (model, history) = timer.time("train", r, || {
        let mut model = EmbedderModel::build(&cfg.embedder_config(seed)?)?;
        let fit: Vec<&[f32]> = fit_rows.iter().map(|&i| ds.samples[i].as_slice()).collect();
        let history = train(&mut model, &fit)?;
        Ok((model, history))
    })?;
    let (abs, relp) = rel(dir, format!("repeat_{r}_embedder.ckpt"));
    model.to_checkpoint()?.save(&abs)?;
    artifacts.checkpoint = Some(relp);
    let (abs, relp) = rel(dir, format!("repeat_{r}_history.csv"));
    write_history(&abs, &history)?;
    artifacts.history = Some(relp);

    let latents = timer.time("encode", r, || encode(&model, &ds.samples))?;
    let validation_loss = timer.time("evaluate", r, || {
        let val: Vec<&[f32]> = val_rows.iter().map(|&i| ds.samples[i].as_slice()).collect();
        Ok(evaluate_loss(&model, &val)?.total)
    })?;
    let lat64 = to_f64(&latents);

    let fuzzy = cfg.fuzzy_config(ds.manifest.n_classes(), seed);
    let clusters = timer.time("cluster", r, || clustering::fit(&pick(&lat64, &fit_rows), &fuzzy))?;
    let (abs, relp) = rel(dir, format!("repeat_{r}_clusters.json"));
    clusters.save(&abs)?;
    artifacts.clusters = Some(relp);

    let (test_purity, test_overlaps, val_purity, all_labels) = timer.time("evaluate", r, || {
        let all = harden(&clusters.assign(&lat64, fuzzy.m)?);
        let score = |rows: &[usize]| -> Result<(f64, usize)> {
            let c = pick(&all, rows);
            let y = pick(&classes, rows);
            Ok((purity(&c, &y)?, overlaps(&c, &y)?))
        };
        let (p, o) = score(&test_rows)?;
        let (vp, _) = score(&val_rows)?;
        Ok((p, o, vp, all))
    })?;
    let ids: Vec<String> = ds.manifest.entries.iter().map(|e| e.source_id.clone()).collect();
    let (abs, relp) = rel(dir, format!("repeat_{r}_labels.csv"));
    write_labels(&abs, &ids, &all_labels)?;
    artifacts.labels = Some(relp);

    let z = model.latent_dim();
    let flat: Vec<f32> = latents.iter().flatten().copied().collect();
    let (abs, relp) = rel(dir, format!("repeat_{r}_latents.npy"));
    npy::write(&abs, &[latents.len(), z], &flat)?;
    artifacts.latents = Some(relp);
    let index = LatentIndex {
        source_ids: ids,
        class_labels: ds.manifest.entries.iter().map(|e| e.label.clone()).collect(),
    };
    let (abs, relp) = rel(dir, format!("repeat_{r}_latents.json"));
    std::fs::write(&abs, serde_json::to_string(&index)?).map_err(|e| Error::io(&abs, e))?;
    artifacts.latent_ids = Some(relp);

    let heads = cfg.supervised.heads;
    let (ridge, fc_accuracy) = timer.time("supervised", r, || {
        if !heads.ridge() && !heads.fc() {
            return Ok((None, None));
        }
        let train_rows = ds.rows(&plan.train_ids)?;
        let pos: HashMap<usize, usize> = train_rows.iter().enumerate().map(|(j, &i)| (i, j)).collect();
        let xtr = pick(&lat64, &train_rows);
        let ytr = pick(&classes, &train_rows);
        let xte = pick(&lat64, &test_rows);
        let yte = pick(&classes, &test_rows);
        let ridge = if heads.ridge() {
            let folds = plan
                .folds
                .iter()
                .map(|f| Ok(ds.rows(f)?.iter().map(|i| pos[i]).collect()))
                .collect::<Result<Vec<Vec<usize>>>>()?;
            let s = &cfg.supervised;
            let best = grid_search(&xtr, &ytr, &s.lambdas, &s.gammas, &folds)?;
            let m = ridge_fit(&xtr, &ytr, RidgeParams::new(best.lambda, best.gamma))?;
            Some(RidgeOutcome {
                lambda: best.lambda,
                gamma: best.gamma,
                cv_accuracy: best.mean_accuracy,
                test_accuracy: accuracy(&m.predict(&xte)?, &yte)?,
            })
        } else {
            None
        };
        let fc = if heads.fc() {
            let mut fc_cfg = cfg.supervised.fc.clone();
            fc_cfg.seed = seed;
            let (clf, _) = fc_train(&pick(&latents, &train_rows), &ytr, &fc_cfg)?;
            Some(accuracy(&clf.predict(&pick(&latents, &test_rows))?, &yte)?)
        } else {
            None
        };
        Ok((ridge, fc))
    })?;

    log::info!(
        "repeat {r}: purity {test_purity:.4}, overlaps {test_overlaps}, validation loss {validation_loss:.4}"
    );
    Ok(RepeatRecord {
        repeat: r,
        seed,
        validation_fold: val_fold,
        purity: test_purity,
        overlaps: test_overlaps,
        validation_purity: val_purity,
        validation_loss,
        final_train_loss: history.last().map_or(f64::NAN, |h| h.mean_loss),
        cluster_iterations: clusters.iterations_run,
        cluster_degenerate: clusters.degenerate,
        ridge,
        fc_accuracy,
        stage_seconds: stages,
        artifacts,
    })
}

/// Loads the embedder checkpoint written for `repeat` of a record.
pub fn load_embedder(record_path: &Path, record: &ExperimentRecord, repeat: usize) -> Result<EmbedderModel<f32>> {
    let rep = record
        .repeats
        .get(repeat)
        .ok_or_else(|| Error::invalid(format!("record has no repeat {repeat}")))?;
    let rel = rep
        .artifacts
        .checkpoint
        .as_ref()
        .ok_or_else(|| Error::invalid("repeat has no checkpoint"))?;
    let base = record_path.parent().unwrap_or_else(|| Path::new("."));
    EmbedderModel::from_checkpoint(&Checkpoint::load(&base.join(rel))?)
}

/// Writes `source_id,class_label,z_1..z_Z` for the latents of `repeat`.
/// Returns the number of rows.
pub fn export_latents(record_path: &Path, repeat: usize, out: &Path) -> Result<usize> {
    let record = ExperimentRecord::load(record_path)?;
    let rep = record
        .repeats
        .get(repeat)
        .ok_or_else(|| Error::invalid(format!("record has no repeat {repeat}")))?;
    let (Some(lat), Some(idx)) = (&rep.artifacts.latents, &rep.artifacts.latent_ids) else {
        return Err(Error::invalid(format!("repeat {repeat} has no latents")));
    };
    let base = record_path.parent().unwrap_or_else(|| Path::new("."));
    let (shape, data) = npy::read(&base.join(lat))?;
    let ipath = base.join(idx);
    let text = std::fs::read_to_string(&ipath).map_err(|e| Error::io(&ipath, e))?;
    let index: LatentIndex = serde_json::from_str(&text)?;
    let [n, z] = shape[..] else {
        return Err(Error::shape("(N, Z)", shape));
    };
    if n != index.source_ids.len() || n != index.class_labels.len() {
        return Err(Error::shape(n, index.source_ids.len()));
    }
    let mut w = csv::Writer::from_path(out)?;
    let mut header = vec!["source_id".to_string(), "class_label".to_string()];
    header.extend((1..=z).map(|j| format!("z_{j}")));
    w.write_record(&header)?;
    for (i, row) in data.chunks(z.max(1)).take(n).enumerate() {
        let mut rec = vec![index.source_ids[i].clone(), index.class_labels[i].clone()];
        // shortest text that parses back to the same f32
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(out, e))?;
    Ok(n)
}

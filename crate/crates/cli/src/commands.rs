use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use topo_core::analysis::{analyze as analyze_model, emit_report, graph_embeddings};
use topo_core::checkpoint::Checkpoint;
use topo_core::config::ExperimentConfig;
use topo_core::encoder::{EncoderConfig, InputKind, Model, OutputKind};
use topo_core::graphs::io::{load_corpus, save_corpus};
use topo_core::graphs::{generate_corpus, Explorer, Graph, SyntheticKind};
use topo_core::numerics::Tensor;
use topo_core::pretrain::pretrain as pretrain_corpus;
use topo_core::rng::{derive_seed, seeded};
use topo_core::transfer::{
    canonical_hash, compare as compare_results, linear_probe, run_task, write_comparisons_csv, Comparison,
    FinetuneConfig, ModelSource, ProbeTask, RunResult, TaskSpec,
};
use topo_core::{Error, Result};

use crate::FinetuneArgs;

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Names the file in I/O errors.
fn at<T>(path: &Path, result: Result<T>) -> Result<T> {
    result.map_err(|e| match e {
        Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
        other => other,
    })
}

fn read_corpus_file(path: &Path) -> Result<Vec<Graph>> {
    at(path, load_corpus(path))
}

fn provenance(hash: &str) -> String {
    format!("# config_hash={hash}\n")
}

/// Prepends a provenance comment to a text artifact.
fn stamp(path: &Path, hash: &str) -> Result<()> {
    let body = fs::read_to_string(path)?;
    let head = if path.extension().is_some_and(|e| e == "svg") {
        format!("<!-- config_hash={hash} -->\n")
    } else {
        provenance(hash)
    };
    fs::write(path, head + &body)?;
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn generate(dataset: &str, count: usize, seed: u64, out: &Path) -> Result<()> {
    let kind: SyntheticKind = dataset.parse()?;
    save_corpus(out, &generate_corpus(kind, count, seed))?;
    println!("wrote {count} {dataset} graphs to {}", out.display());
    Ok(())
}

pub fn sample(graph: &Path, count: usize, min: usize, max: usize, seed: u64, out: &Path) -> Result<()> {
    let source = match read_corpus_file(graph)?.as_slice() {
        [g] => g.clone(),
        other => {
            return Err(Error::Contract(format!(
                "{} must hold exactly one graph, found {}",
                graph.display(),
                other.len()
            )))
        }
    };
    let domain = if source.domain().is_empty() {
        stem(graph)
    } else {
        source.domain().to_string()
    };
    let explorer = Explorer::new(&source);
    let samples = (0..count)
        .map(|i| {
            explorer
                .sample(&mut seeded(derive_seed(seed, i as u64)), min, max)
                .map(|g| g.with_domain(domain.clone()))
        })
        .collect::<Result<Vec<Graph>>>()?;
    save_corpus(out, &samples)?;
    println!("wrote {count} samples of {} to {}", graph.display(), out.display());
    Ok(())
}

fn config_dir(config: &Path) -> PathBuf {
    config.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn pretrain_from(cfg: &ExperimentConfig, base: &Path, out: &Path, log: &Path) -> Result<Checkpoint> {
    let corpus = cfg.load_corpus(base)?;
    let run = pretrain_corpus(&corpus, &cfg.encoder, &cfg.pretrain)?;
    let hash = cfg.hash();
    let mut csv = provenance(&hash).into_bytes();
    run.log.write_csv(&mut csv)?;
    fs::write(log, csv)?;
    let ckpt = Checkpoint::from_pretrained(run, cfg.pretrain.method, Some(hash));
    ckpt.save(out)?;
    Ok(ckpt)
}

pub fn pretrain(config: &Path, out: &Path, log: Option<&Path>) -> Result<()> {
    let cfg = at(config, ExperimentConfig::load(config))?;
    let log = log.map_or_else(|| out.with_extension("log.csv"), Path::to_path_buf);
    let ckpt = pretrain_from(&cfg, &config_dir(config), out, &log)?;
    println!(
        "wrote checkpoint {} ({}) and log {}",
        out.display(),
        ckpt.id()?,
        log.display()
    );
    Ok(())
}

/// `graph-regression`, `graph-binary`, `node[:classes]` or `edge`.
fn parse_task(text: &str, with_features: bool, graphs: &[Graph]) -> Result<TaskSpec> {
    let bad = || {
        Error::Config(vec![format!(
            "unknown task '{text}' (expected graph-regression, graph-binary, node[:classes] or edge)"
        )])
    };
    match text.split_once(':') {
        None if text == "graph-regression" => Ok(TaskSpec::graph_regression(with_features)),
        None if text == "graph-binary" => Ok(TaskSpec::graph_binary(with_features)),
        None if text == "edge" => Ok(TaskSpec::edge_prediction(with_features)),
        None if text == "node" => {
            let classes = graphs
                .first()
                .and_then(Graph::node_labels)
                .and_then(|l| l.iter().max())
                .map(|&m| m + 1)
                .ok_or_else(|| Error::Contract("node task needs node labels".into()))?;
            Ok(TaskSpec::node_classes(classes, with_features))
        }
        Some(("node", k)) => Ok(TaskSpec::node_classes(k.parse().map_err(|_| bad())?, with_features)),
        _ => Err(bad()),
    }
}

fn open_checkpoint(ckpt: &str) -> Result<Option<Checkpoint>> {
    if ckpt == "none" {
        Ok(None)
    } else {
        at(Path::new(ckpt), Checkpoint::load(ckpt)).map(Some)
    }
}

pub fn finetune(args: &FinetuneArgs) -> Result<()> {
    let (encoder, mut cfg) = match &args.config {
        Some(path) => {
            let e = at(path, ExperimentConfig::load(path))?;
            (e.encoder, e.finetune)
        }
        None => (EncoderConfig::default(), FinetuneConfig::default()),
    };
    if let Some(v) = args.runs {
        cfg.runs = v;
    }
    if let Some(v) = args.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = args.lr {
        cfg.lr = v;
    }
    if let Some(v) = args.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    cfg.freeze_encoder |= args.freeze;
    cfg.validate()?;

    let graphs = read_corpus_file(&args.data)?;
    let task = parse_task(&args.task, args.with_features, &graphs)?;
    let dataset = args.dataset.clone().unwrap_or_else(|| stem(&args.data));
    let ckpt = open_checkpoint(&args.ckpt)?;
    let source = match &ckpt {
        Some(c) => ModelSource::Pretrained(c),
        None => ModelSource::Fresh(&encoder),
    };
    let result = run_task(source, &dataset, &graphs, &task, &cfg)?;
    fs::write(&args.out, result.to_json()? + "\n")?;
    println!(
        "{dataset}: {} {:.4} ± {:.4} over {} runs -> {}",
        result.metric.name(),
        result.mean,
        result.std,
        result.scores.len(),
        args.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct ProbeResult {
    dataset: String,
    task: String,
    metric: &'static str,
    score: f64,
    seed: u64,
    checkpoint_id: String,
    encoder: EncoderConfig,
    config_hash: String,
}

pub fn probe(ckpt: &str, data: &Path, task: &str, seed: u64, config: Option<&Path>, out: &Path) -> Result<()> {
    let (probe_task, metric) = match task {
        "regression" => (ProbeTask::Regression, "rmse"),
        "binary" => (ProbeTask::Binary, "auroc"),
        other => {
            return Err(Error::Config(vec![format!(
                "unknown probe task '{other}' (expected regression or binary)"
            )]))
        }
    };
    let (model, id) = match open_checkpoint(ckpt)? {
        Some(c) => (c.model.clone(), c.id()?),
        None => {
            let encoder = match config {
                Some(path) => at(path, ExperimentConfig::load(path))?.encoder,
                None => EncoderConfig::default(),
            };
            (
                Model::new(&encoder, InputKind::Constant, OutputKind::None, seed)?,
                "none".into(),
            )
        }
    };
    let graphs = read_corpus_file(data)?;
    let targets = graphs
        .iter()
        .map(|g| {
            g.target()
                .map(f64::from)
                .ok_or_else(|| Error::Contract("probe needs a target on every graph".into()))
        })
        .collect::<Result<Vec<f64>>>()?;
    let rows = graph_embeddings(&model, &graphs)?;
    let h = model.config().hidden_dim;
    let embeddings = Tensor::new(vec![rows.len(), h], rows.iter().flatten().map(|&v| v as f32).collect())?;
    let score = linear_probe(&embeddings, &targets, probe_task, seed)?;
    let dataset = stem(data);
    let config_hash = canonical_hash(&(&dataset, task, seed, &id, model.config()));
    write_json(
        out,
        &ProbeResult {
            dataset: dataset.clone(),
            task: task.into(),
            metric,
            score,
            seed,
            checkpoint_id: id,
            encoder: model.config().clone(),
            config_hash,
        },
    )?;
    println!("{dataset}: probe {metric} {score:.4} -> {}", out.display());
    Ok(())
}

#[derive(Serialize)]
struct Manifest {
    dataset: String,
    checkpoint_id: String,
    components: usize,
    explained_variance_ratio: Vec<f64>,
    files: Vec<String>,
    config_hash: String,
}

fn analyze_into(ckpt: &Checkpoint, graphs: &[Graph], dataset: &str, k: usize, out: &Path, svg: bool) -> Result<()> {
    let id = ckpt.id()?;
    let hash = canonical_hash(&(dataset, k, &id, ckpt.model.config()));
    let analysis = analyze_model(&ckpt.model, graphs, k)?;
    let written = emit_report(&analysis, out, svg)?;
    for path in &written {
        stamp(path, &hash)?;
    }
    write_json(
        &out.join("manifest.json"),
        &Manifest {
            dataset: dataset.into(),
            checkpoint_id: id,
            components: k,
            explained_variance_ratio: analysis.pca.explained_variance_ratio.clone(),
            files: written
                .iter()
                .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
                .collect(),
            config_hash: hash,
        },
    )
}

pub fn analyze(ckpt: &Path, data: &Path, components: usize, out: &Path, svg: bool) -> Result<()> {
    let ckpt = at(ckpt, Checkpoint::load(ckpt))?;
    let graphs = read_corpus_file(data)?;
    analyze_into(&ckpt, &graphs, &stem(data), components, out, svg)?;
    println!("wrote analysis of {} graphs to {}", graphs.len(), out.display());
    Ok(())
}

fn read_result(path: &Path) -> Result<RunResult> {
    RunResult::from_json(&at(path, fs::read_to_string(path).map_err(Error::from))?)
}

fn write_comparisons(rows: &[Comparison], hash: &str, out: Option<&Path>) -> Result<()> {
    let mut csv = provenance(hash).into_bytes();
    write_comparisons_csv(&mut csv, rows)?;
    match out {
        Some(path) => fs::write(path, csv)?,
        None => std::io::stdout().write_all(&csv)?,
    }
    Ok(())
}

/// Significance level of pre-trained versus baseline comparisons.
pub const DEFAULT_ALPHA: f64 = 0.01;

pub fn compare(a: &[PathBuf], b: &[PathBuf], alpha: f64, out: Option<&Path>) -> Result<()> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Config(vec![format!(
            "compare needs matching --a/--b pairs, got {} and {}",
            a.len(),
            b.len()
        )]));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(vec![format!("alpha must be in (0,1), got {alpha}")]));
    }
    let mut rows = Vec::new();
    let mut sources = Vec::new();
    for (pa, pb) in a.iter().zip(b) {
        let (ra, rb) = (read_result(pa)?, read_result(pb)?);
        rows.push(compare_results(&ra, &rb, alpha)?);
        sources.push((ra.config_hash, rb.config_hash));
    }
    write_comparisons(&rows, &canonical_hash(&(sources, alpha)), out)
}

/// Pre-trains once, then fine-tunes the checkpoint and a fresh baseline on
/// each task, compares them and analyzes the pre-training corpus.
pub fn run(config: &Path, out: &Path) -> Result<()> {
    let cfg = at(config, ExperimentConfig::load(config))?;
    if cfg.tasks.is_empty() {
        return Err(Error::Config(vec!["tasks must list at least one dataset".into()]));
    }
    let base = config_dir(config);
    fs::create_dir_all(out)?;
    let ckpt = pretrain_from(&cfg, &base, &out.join("encoder.ckpt"), &out.join("pretrain.log.csv"))?;
    println!("pre-trained {} ({})", out.join("encoder.ckpt").display(), ckpt.id()?);

    let mut rows = Vec::new();
    let mut sources = Vec::new();
    for entry in &cfg.tasks {
        let graphs = read_corpus_file(&base.join(&entry.path))?;
        let pretrained = run_task(
            ModelSource::Pretrained(&ckpt),
            &entry.dataset,
            &graphs,
            &entry.task,
            &cfg.finetune,
        )?;
        let baseline = run_task(
            ModelSource::Fresh(&cfg.encoder),
            &entry.dataset,
            &graphs,
            &entry.task,
            &cfg.finetune,
        )?;
        fs::write(
            out.join(format!("{}.pretrained.json", entry.dataset)),
            pretrained.to_json()? + "\n",
        )?;
        fs::write(
            out.join(format!("{}.baseline.json", entry.dataset)),
            baseline.to_json()? + "\n",
        )?;
        let row = compare_results(&baseline, &pretrained, DEFAULT_ALPHA)?;
        println!(
            "{}: pre-trained {:.4} vs baseline {:.4} ({}), p={:.4}",
            entry.dataset,
            pretrained.mean,
            baseline.mean,
            pretrained.metric.name(),
            row.p_value
        );
        sources.push((baseline.config_hash, pretrained.config_hash));
        rows.push(row);
    }
    write_comparisons(
        &rows,
        &canonical_hash(&(sources, cfg.hash())),
        Some(&out.join("comparisons.csv")),
    )?;

    let corpus = cfg.load_corpus(&base)?;
    let k = 5.min(cfg.encoder.hidden_dim).min(corpus.len().saturating_sub(1));
    if k > 0 {
        analyze_into(&ckpt, &corpus, "corpus", k, &out.join("analysis"), false)?;
    }
    Ok(())
}

use topo_core::checkpoint::{Checkpoint, CheckpointMeta, FORMAT_VERSION, MAGIC};
use topo_core::config::ExperimentConfig;
use topo_core::encoder::{EncoderConfig, InputHead, InputKind, Model, OutputKind};
use topo_core::graphs::io::save_corpus;
use topo_core::graphs::{batch_graphs, generate_corpus, Graph, SyntheticKind};
use topo_core::numerics::NormMode;
use topo_core::pretrain::{train_adgcl, Method, PretrainConfig};
use topo_core::rng::seeded;
use topo_core::Error;

fn tiny_encoder() -> EncoderConfig {
    EncoderConfig {
        num_layers: 2,
        hidden_dim: 8,
        projection_dim: 8,
        ..EncoderConfig::default()
    }
}

fn corpus() -> Vec<Graph> {
    let mut graphs = generate_corpus(SyntheticKind::Er, 12, 3);
    graphs.extend(generate_corpus(SyntheticKind::Trees, 8, 4));
    graphs
}

fn pretrained(seed: u64) -> Checkpoint {
    let cfg = PretrainConfig {
        epochs: 2,
        batch_size: 8,
        seed,
        ..PretrainConfig::default()
    };
    let run = train_adgcl(&corpus(), &tiny_encoder(), &cfg).unwrap();
    Checkpoint::from_pretrained(run, Method::Adgcl, Some("abc".into()))
}

fn bits<'a>(params: impl Iterator<Item = &'a topo_core::numerics::NamedTensor>) -> Vec<(String, Vec<u32>)> {
    params
        .map(|p| (p.name.clone(), p.tensor.data().iter().map(|v| v.to_bits()).collect()))
        .collect()
}

fn norm_bits(stats: &[topo_core::numerics::BatchNormStats]) -> Vec<Vec<u32>> {
    stats
        .iter()
        .flat_map(|s| [s.running_mean(), s.running_var()])
        .map(|v| v.iter().map(|x| x.to_bits()).collect())
        .collect()
}

/// Replaces `from` with an equally long `to` inside the JSON header.
fn patch_header(bytes: &[u8], from: &str, to: &str) -> Vec<u8> {
    assert_eq!(from.len(), to.len());
    let len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let header = std::str::from_utf8(&bytes[16..16 + len]).unwrap();
    assert!(header.contains(from), "{header}");
    let mut out = bytes[..16].to_vec();
    out.extend_from_slice(header.replacen(from, to, 1).as_bytes());
    out.extend_from_slice(&bytes[16 + len..]);
    out
}

#[test]
fn round_trip_is_bitwise_including_norm_buffers_and_view() {
    let ckpt = pretrained(7);
    // training moved the running statistics away from their initial values
    assert!(ckpt.model.gin().norm_stats()[0]
        .running_mean()
        .iter()
        .any(|&m| m != 0.0));
    let back = Checkpoint::from_bytes(&ckpt.to_bytes().unwrap()).unwrap();

    assert_eq!(bits(back.model.named_params()), bits(ckpt.model.named_params()));
    assert_eq!(
        norm_bits(back.model.gin().norm_stats()),
        norm_bits(ckpt.model.gin().norm_stats())
    );
    let (v0, v1) = (ckpt.view.as_ref().unwrap(), back.view.as_ref().unwrap());
    assert_eq!(bits(v1.named_params()), bits(v0.named_params()));
    assert_eq!(norm_bits(v1.gin().norm_stats()), norm_bits(v0.gin().norm_stats()));
    assert_eq!(back.meta, ckpt.meta);
    assert_eq!(back.model.config(), ckpt.model.config());

    let batch = batch_graphs(&corpus()[..5]).unwrap();
    for mode in [NormMode::Inference, NormMode::Training] {
        assert_eq!(
            back.model.embed(&batch, mode).unwrap(),
            ckpt.model.embed(&batch, mode).unwrap()
        );
    }
}

#[test]
fn same_seed_gives_identical_bytes() {
    let a = pretrained(11).to_bytes().unwrap();
    let b = pretrained(11).to_bytes().unwrap();
    assert_eq!(a, b);
    assert_ne!(a, pretrained(12).to_bytes().unwrap());
}

#[test]
fn layout_starts_with_magic_and_header() {
    let bytes = pretrained(1).to_bytes().unwrap();
    assert_eq!(&bytes[..8], MAGIC);
    let len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let header: serde_json::Value = serde_json::from_slice(&bytes[16..16 + len]).unwrap();
    assert_eq!(header["format_version"], FORMAT_VERSION);
    assert_eq!(header["meta"]["method"], "adgcl");
    assert_eq!(header["meta"]["config_hash"], "abc");
    // composition lists both domains and sums to the corpus size
    let composition = header["meta"]["composition"].as_array().unwrap();
    let total: u64 = composition.iter().map(|e| e[1].as_u64().unwrap()).sum();
    assert_eq!(total, 20);
    assert_eq!(composition.len(), 2);
    // remaining bytes are exactly the f32 arrays
    let ckpt = Checkpoint::from_bytes(&bytes).unwrap();
    let model_scalars = ckpt.model.parameter_count()
        + ckpt
            .model
            .gin()
            .norm_stats()
            .iter()
            .map(|s| 2 * s.channels())
            .sum::<usize>();
    let view = ckpt.view.as_ref().unwrap();
    let view_scalars = view.parameter_count() + view.gin().norm_stats().iter().map(|s| 2 * s.channels()).sum::<usize>();
    assert_eq!(bytes.len() - 16 - len, 4 * (model_scalars + view_scalars));
}

#[test]
fn unknown_version_is_rejected() {
    let bytes = pretrained(2).to_bytes().unwrap();
    let future = patch_header(&bytes, "\"format_version\":1", "\"format_version\":9");
    match Checkpoint::from_bytes(&future) {
        Err(Error::Checkpoint(msg)) => assert!(msg.contains("version"), "{msg}"),
        other => panic!("expected a version error, got {other:?}"),
    }
}

#[test]
fn damaged_files_are_rejected() {
    let bytes = pretrained(3).to_bytes().unwrap();
    let mut bad_magic = bytes.clone();
    bad_magic[0] ^= 1;
    assert!(matches!(Checkpoint::from_bytes(&bad_magic), Err(Error::Checkpoint(_))));
    assert!(matches!(
        Checkpoint::from_bytes(&bytes[..bytes.len() - 4]),
        Err(Error::Checkpoint(_))
    ));
    let mut trailing = bytes.clone();
    trailing.extend_from_slice(&[0; 4]);
    assert!(matches!(Checkpoint::from_bytes(&trailing), Err(Error::Checkpoint(_))));
    assert!(Checkpoint::from_bytes(&bytes[..10]).is_err());
}

#[test]
fn save_load_and_id() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("enc.ckpt");
    let ckpt = pretrained(4);
    ckpt.save(&path).unwrap();
    let back = Checkpoint::load(&path).unwrap();
    let id = ckpt.id().unwrap();
    assert_eq!(id.len(), 16);
    assert!(id.chars().all(|c| c.is_ascii_hexdigit()));
    assert_eq!(back.id().unwrap(), id);
    assert_ne!(pretrained(5).id().unwrap(), id);
}

#[test]
fn model_without_view_round_trips() {
    let model = Model::new(
        &tiny_encoder(),
        InputKind::FeatureMlp {
            node_dim: 3,
            edge_dim: Some(2),
        },
        OutputKind::NodeClass { classes: 4 },
        9,
    )
    .unwrap();
    let ckpt = Checkpoint::new(model, None, CheckpointMeta::default());
    let back = Checkpoint::from_bytes(&ckpt.to_bytes().unwrap()).unwrap();
    assert!(back.view.is_none());
    assert_eq!(back.model, ckpt.model);
}

#[test]
fn head_swap_after_loading_keeps_the_encoder() {
    let ckpt = Checkpoint::from_bytes(&pretrained(6).to_bytes().unwrap()).unwrap();
    let mut model = ckpt.model.clone();
    let head = InputHead::new(
        InputKind::FeatureMlp {
            node_dim: 4,
            edge_dim: None,
        },
        8,
        &mut seeded(1),
    )
    .unwrap();
    model.swap_input_head(head).unwrap();
    assert_eq!(
        bits(model.gin().params().iter()),
        bits(ckpt.model.gin().params().iter())
    );
    assert_eq!(model.gin().norm_stats(), ckpt.model.gin().norm_stats());
}

const FULL: &str = r#"
name = "demo"

[encoder]
num_layers = 3
hidden_dim = 32

[pretrain]
method = "graphcl_edge"
epochs = 5

[finetune]
runs = 4

[[corpus]]
path = "er.jsonl"
max_count = 3

[[corpus]]
path = "trees.jsonl"

[[tasks]]
dataset = "density"
path = "community.jsonl"
level = "graph"
kind = { type = "regression" }
with_features = false
"#;

const REORDERED: &str = r#"
name = "demo"

[[tasks]]
with_features = false
kind = { type = "regression" }
level = "graph"
path = "community.jsonl"
dataset = "density"

[[corpus]]
max_count = 3
path = "er.jsonl"

[[corpus]]
path = "trees.jsonl"

[finetune]
runs = 4

[pretrain]
epochs = 5
method = "graphcl_edge"

[encoder]
hidden_dim = 32
num_layers = 3
readout = "mean"
"#;

#[test]
fn toml_fills_defaults() {
    let cfg = ExperimentConfig::from_toml_str(FULL).unwrap();
    assert_eq!(cfg.name, "demo");
    assert_eq!(cfg.encoder.num_layers, 3);
    assert_eq!(cfg.encoder.projection_dim, EncoderConfig::default().projection_dim);
    assert_eq!(cfg.pretrain.method, Method::GraphclEdge);
    assert_eq!(cfg.pretrain.batch_size, PretrainConfig::default().batch_size);
    assert_eq!(cfg.finetune.runs, 4);
    assert_eq!(cfg.corpus.len(), 2);
    assert_eq!(cfg.tasks[0].dataset, "density");
}

#[test]
fn hash_ignores_key_order_and_explicit_defaults() {
    // REORDERED also spells out the default readout
    let a = ExperimentConfig::from_toml_str(FULL).unwrap();
    let b = ExperimentConfig::from_toml_str(REORDERED).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.hash(), b.hash());
    assert_eq!(a.hash().len(), 64);

    let mut c = a.clone();
    c.finetune.lr *= 2.0;
    assert_ne!(c.hash(), a.hash());

    let back = ExperimentConfig::from_toml_str(&a.to_toml_string().unwrap()).unwrap();
    assert_eq!(back.hash(), a.hash());
}

#[test]
fn validation_lists_every_problem() {
    let text = r#"
[encoder]
num_layers = 0
[pretrain]
batch_size = 1
temperature = 0.0
[finetune]
runs = 0
[[corpus]]
path = "x.jsonl"
max_count = 0
"#;
    match ExperimentConfig::from_toml_str(text) {
        Err(Error::Config(problems)) => {
            assert_eq!(problems.len(), 5, "{problems:?}");
            for field in [
                "encoder.num_layers",
                "pretrain.batch_size",
                "pretrain.temperature",
                "finetune.runs",
                "corpus[0].max_count",
            ] {
                assert!(
                    problems.iter().any(|p| p.contains(field)),
                    "{field} missing from {problems:?}"
                );
            }
        }
        other => panic!("expected config errors, got {other:?}"),
    }
}

#[test]
fn unknown_keys_are_rejected() {
    assert!(matches!(
        ExperimentConfig::from_toml_str("[encoder]\nlayers = 3\n"),
        Err(Error::Config(_))
    ));
    assert!(ExperimentConfig::from_toml_str("colour = 1\n").is_err());
}

#[test]
fn corpus_is_truncated_and_labelled_by_file() {
    let dir = tempfile::tempdir().unwrap();
    save_corpus(dir.path().join("er.jsonl"), &generate_corpus(SyntheticKind::Er, 5, 1)).unwrap();
    let trees: Vec<Graph> = generate_corpus(SyntheticKind::Trees, 4, 2)
        .into_iter()
        .map(|g| g.with_domain(""))
        .collect();
    save_corpus(dir.path().join("trees.jsonl"), &trees).unwrap();
    let cfg = ExperimentConfig::from_toml_str(FULL).unwrap();
    let graphs = cfg.load_corpus(dir.path()).unwrap();
    assert_eq!(graphs.len(), 3 + 4);
    assert!(graphs[3..].iter().all(|g| g.domain() == "trees"));

    let empty = ExperimentConfig::default();
    assert!(matches!(empty.load_corpus(dir.path()), Err(Error::Config(_))));
}

//! Single-file model container: an 8-byte magic, a little-endian `u64`
//! header length, a JSON header, then every array as little-endian `f32`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::encoder::{EncoderConfig, InputKind, Model, OutputKind, ViewLearner};
use crate::error::{Error, Result};
use crate::numerics::{BatchNormStats, NamedTensor, Tensor};
use crate::pretrain::{Method, Pretrained};

pub const MAGIC: &[u8; 8] = b"TOPCKPT1";
pub const FORMAT_VERSION: u32 = 1;

/// Provenance stored with the weights.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub method: Option<Method>,
    /// Graphs per domain in the pre-training corpus.
    pub composition: Vec<(String, usize)>,
    pub seed: u64,
    pub config_hash: Option<String>,
}

impl CheckpointMeta {
    /// Hex SHA-256 of the composition list.
    pub fn composition_digest(&self) -> String {
        let json = serde_json::to_vec(&self.composition).expect("composition serializes");
        hex(&Sha256::digest(json))
    }
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub model: Model,
    pub view: Option<ViewLearner>,
    pub meta: CheckpointMeta,
}

#[derive(Serialize, Deserialize)]
struct ArrayEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Section {
    params: Vec<ArrayEntry>,
    /// Running mean and variance per normalized layer.
    norm_channels: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format_version: u32,
    encoder: EncoderConfig,
    input_head: InputKind,
    output_head: OutputKind,
    model: Section,
    view: Option<Section>,
    meta: CheckpointMeta,
    composition_digest: String,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn section<'a>(
    params: impl Iterator<Item = &'a NamedTensor>,
    norm: &[BatchNormStats],
    payload: &mut Vec<u8>,
) -> Section {
    let mut entries = Vec::new();
    for p in params {
        entries.push(ArrayEntry {
            name: p.name.clone(),
            shape: p.tensor.shape().to_vec(),
        });
        put(payload, p.tensor.data());
    }
    for s in norm {
        put(payload, s.running_mean());
        put(payload, s.running_var());
    }
    Section {
        params: entries,
        norm_channels: norm.iter().map(BatchNormStats::channels).collect(),
    }
}

fn put(payload: &mut Vec<u8>, values: &[f32]) {
    for v in values {
        payload.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, count: usize) -> Result<Vec<f32>> {
        let end = self.pos + count * 4;
        if end > self.bytes.len() {
            return Err(Error::Checkpoint("payload truncated".into()));
        }
        let values = self.bytes[self.pos..end]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        self.pos = end;
        Ok(values)
    }

    fn section(&mut self, section: &Section) -> Result<(Vec<NamedTensor>, Vec<BatchNormStats>)> {
        let mut params = Vec::with_capacity(section.params.len());
        for entry in &section.params {
            let data = self.take(entry.shape.iter().product())?;
            params.push(NamedTensor {
                name: entry.name.clone(),
                tensor: Tensor::new(entry.shape.clone(), data)?,
            });
        }
        let mut norm = Vec::with_capacity(section.norm_channels.len());
        for &c in &section.norm_channels {
            let mean = self.take(c)?;
            let var = self.take(c)?;
            norm.push(BatchNormStats::from_buffers(mean, var)?);
        }
        Ok((params, norm))
    }
}

impl Checkpoint {
    pub fn new(model: Model, view: Option<ViewLearner>, meta: CheckpointMeta) -> Self {
        Self { model, view, meta }
    }

    /// Wraps a pre-training result.
    pub fn from_pretrained(run: Pretrained, method: Method, config_hash: Option<String>) -> Self {
        let meta = CheckpointMeta {
            method: Some(method),
            composition: run.log.composition.clone(),
            seed: run.log.seed,
            config_hash,
        };
        Self::new(run.model, run.view, meta)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut payload = Vec::new();
        let model = section(self.model.named_params(), self.model.gin().norm_stats(), &mut payload);
        let view = self
            .view
            .as_ref()
            .map(|v| section(v.named_params(), v.gin().norm_stats(), &mut payload));
        let header = Header {
            format_version: FORMAT_VERSION,
            encoder: self.model.config().clone(),
            input_head: self.model.input_head().kind().clone(),
            output_head: self.model.output_head().kind().clone(),
            model,
            view,
            meta: self.meta.clone(),
            composition_digest: self.meta.composition_digest(),
        };
        let header = serde_json::to_vec(&header)?;
        let mut out = Vec::with_capacity(16 + header.len() + payload.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&payload);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file".into()));
        }
        let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let body = &bytes[16..];
        if len > body.len() {
            return Err(Error::Checkpoint("header truncated".into()));
        }
        let version: serde_json::Value = serde_json::from_slice(&body[..len])?;
        match version.get("format_version").and_then(serde_json::Value::as_u64) {
            Some(v) if v == FORMAT_VERSION as u64 => {}
            other => {
                return Err(Error::Checkpoint(format!(
                    "unsupported format version {other:?}, expected {FORMAT_VERSION}"
                )))
            }
        }
        let header: Header = serde_json::from_value(version)?;
        let mut reader = Reader {
            bytes: &body[len..],
            pos: 0,
        };

        let (params, norm) = reader.section(&header.model)?;
        let mut model = Model::new(&header.encoder, header.input_head, header.output_head, 0)?;
        model.load_params(&params)?;
        model.gin_mut().set_norm_stats(norm)?;

        let view = match &header.view {
            Some(s) => {
                let (params, norm) = reader.section(s)?;
                let mut view = ViewLearner::new(&header.encoder, 0)?;
                view.load_params(&params)?;
                view.gin_mut().set_norm_stats(norm)?;
                Some(view)
            }
            None => None,
        };
        if reader.pos != reader.bytes.len() {
            return Err(Error::Checkpoint(format!(
                "{} trailing payload bytes",
                reader.bytes.len() - reader.pos
            )));
        }
        Ok(Self {
            model,
            view,
            meta: header.meta,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    /// Short content hash identifying the serialized checkpoint.
    pub fn id(&self) -> Result<String> {
        Ok(hex(&Sha256::digest(self.to_bytes()?))[..16].to_string())
    }
}

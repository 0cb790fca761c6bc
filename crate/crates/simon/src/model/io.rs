//! Model serialization.
//!
//! Layout: 4-byte magic "SIMN", format version (u32 LE), metadata
//! length (u64 LE), a JSON metadata block (config, alphabet, labels,
//! parameter manifest), then one raw little-endian f32 blob per
//! parameter in manifest order. Identical models produce identical
//! bytes.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LabelSpace, ModelConfig, SimonModel};
use crate::encode::Alphabet;
use crate::error::{Result, SimonError};
use crate::recurrent::GATE_NAMES;
use crate::tensor::{Parameter, Tensor};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: [u8; 4] = *b"SIMN";
/// Metadata blocks beyond this are rejected as corrupt rather than
/// trusted as an allocation size.
const MAX_META_LEN: u64 = 1 << 24;

#[derive(Serialize, Deserialize)]
struct Meta {
    config: ModelConfig,
    alphabet: String,
    labels: Vec<String>,
    parameters: Vec<ParamMeta>,
}

#[derive(Serialize, Deserialize)]
struct ParamMeta {
    name: String,
    shape: Vec<usize>,
    trainable: bool,
}

/// The (name, shape) manifest a well-formed model must carry, in
/// serialization order. The writer's layout and this reader-side list
/// are kept consistent by a unit test.
fn expected_manifest(
    config: &ModelConfig,
    alphabet_size: usize,
    n_labels: usize,
) -> Vec<(String, Vec<usize>)> {
    let mut out = Vec::new();
    let mut cin = alphabet_size;
    for (i, (&k, &d)) in config.conv_kernels.iter().zip(&config.conv_dims).enumerate() {
        out.push((format!("conv.{i}.kernels"), vec![k, cin, d]));
        cin = d;
    }
    let sent_in = *config.conv_dims.last().expect("validated non-empty");
    for (prefix, input, hidden) in [
        ("sentence.fw", sent_in, config.sentence_lstm_units),
        ("sentence.bw", sent_in, config.sentence_lstm_units),
        ("document.fw", config.sentence_width(), config.document_lstm_units),
        ("document.bw", config.sentence_width(), config.document_lstm_units),
    ] {
        for gate in GATE_NAMES {
            out.push((format!("{prefix}.{gate}.w_x"), vec![input, hidden]));
            out.push((format!("{prefix}.{gate}.w_h"), vec![hidden, hidden]));
            out.push((format!("{prefix}.{gate}.b"), vec![hidden]));
        }
    }
    out.push(("dense.w".into(), vec![config.document_width(), config.dense_units]));
    out.push(("dense.b".into(), vec![config.dense_units]));
    out.push(("head.w".into(), vec![config.dense_units, n_labels]));
    out.push(("head.b".into(), vec![n_labels]));
    out
}

pub fn save_model(model: &SimonModel, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_model(model, &mut w)?;
    w.flush()?;
    Ok(())
}

fn write_model<W: Write>(model: &SimonModel, w: &mut W) -> Result<()> {
    let meta = Meta {
        config: model.config.clone(),
        alphabet: model.alphabet.as_string(),
        labels: model.labels.names().to_vec(),
        parameters: model
            .parameters()
            .iter()
            .map(|p| ParamMeta {
                name: p.name.clone(),
                shape: p.value.shape().to_vec(),
                trainable: p.trainable,
            })
            .collect(),
    };
    let meta_bytes =
        serde_json::to_vec(&meta).map_err(|e| SimonError::Format(format!("metadata: {e}")))?;
    w.write_all(&MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(meta_bytes.len() as u64).to_le_bytes())?;
    w.write_all(&meta_bytes)?;
    for p in model.parameters() {
        for v in p.value.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn load_model(path: &Path) -> Result<SimonModel> {
    let mut r = BufReader::new(File::open(path)?);
    read_model(&mut r)
}

fn read_model<R: Read>(r: &mut R) -> Result<SimonModel> {
    let mut magic = [0u8; 4];
    read_fully(r, &mut magic, "magic")?;
    if magic != MAGIC {
        return Err(SimonError::Format("bad magic: not a model file".into()));
    }
    let mut version = [0u8; 4];
    read_fully(r, &mut version, "version")?;
    let version = u32::from_le_bytes(version);
    if version != FORMAT_VERSION {
        return Err(SimonError::Format(format!(
            "file is format version {version}, this build reads version {FORMAT_VERSION}"
        )));
    }
    let mut len = [0u8; 8];
    read_fully(r, &mut len, "metadata length")?;
    let len = u64::from_le_bytes(len);
    if len == 0 || len > MAX_META_LEN {
        return Err(SimonError::Corruption(format!("implausible metadata length {len}")));
    }
    let mut meta_bytes = vec![0u8; len as usize];
    read_fully(r, &mut meta_bytes, "metadata block")?;
    let meta: Meta = serde_json::from_slice(&meta_bytes)
        .map_err(|e| SimonError::Corruption(format!("metadata does not parse: {e}")))?;

    let alphabet = Alphabet::from_string(&meta.alphabet)
        .map_err(|e| SimonError::Corruption(format!("stored alphabet invalid: {e}")))?;
    let labels = LabelSpace::new(meta.labels)
        .map_err(|e| SimonError::Corruption(format!("stored labels invalid: {e}")))?;
    meta.config
        .validate()
        .map_err(|e| SimonError::Corruption(format!("stored config invalid: {e}")))?;

    let expected = expected_manifest(&meta.config, alphabet.size(), labels.n_labels());
    if meta.parameters.len() != expected.len() {
        return Err(SimonError::Corruption(format!(
            "manifest has {} parameters, the architecture requires {}",
            meta.parameters.len(),
            expected.len()
        )));
    }
    for (pm, (name, shape)) in meta.parameters.iter().zip(&expected) {
        if &pm.name != name || &pm.shape != shape {
            return Err(SimonError::Corruption(format!(
                "manifest entry '{}' {:?} does not match required '{}' {:?}",
                pm.name, pm.shape, name, shape
            )));
        }
    }

    let mut params = Vec::with_capacity(meta.parameters.len());
    for pm in meta.parameters {
        let numel: usize = pm.shape.iter().product();
        let mut bytes = vec![0u8; numel * 4];
        read_fully(r, &mut bytes, &format!("weights of '{}'", pm.name))?;
        let data: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let value = Tensor::new(pm.shape, data)
            .map_err(|e| SimonError::Corruption(format!("'{}': {e}", pm.name)))?;
        params.push(Parameter { name: pm.name, value, trainable: pm.trainable });
    }
    let mut extra = [0u8; 1];
    match r.read(&mut extra)? {
        0 => {}
        _ => return Err(SimonError::Corruption("trailing data after weight blobs".into())),
    }
    Ok(SimonModel { config: meta.config, alphabet, labels, params })
}

/// read_exact with short reads reported as corruption, not plain IO.
fn read_fully<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            SimonError::Corruption(format!("file ends inside {what}"))
        } else {
            SimonError::Io(e)
        }
    })
}

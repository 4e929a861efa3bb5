//! Binary model container.
//!
//! ```text
//! "GRCN" | u32 version | u64 metadata length | metadata JSON
//! u32 tensor count
//! per tensor: u32 name length | name | u32 rank | u64 dims... | f64 values...
//! ```
//!
//! All integers and floats are little-endian. The metadata carries the layer
//! list, the input shape and an opaque `extra` object owned by the caller.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{LayerSpec, ModelGraph, NnError, Tensor};

pub const MAGIC: &[u8; 4] = b"GRCN";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Metadata {
    input_shape: Vec<usize>,
    layers: Vec<LayerSpec>,
    #[serde(default)]
    extra: Value,
}

pub fn serialize(model: &ModelGraph, extra: &Value) -> Vec<u8> {
    let meta = Metadata {
        input_shape: model.input_shape().to_vec(),
        layers: model.specs(),
        extra: extra.clone(),
    };
    let json = serde_json::to_vec(&meta).expect("metadata is always serializable");
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);

    let tensors: Vec<(String, &Tensor)> = model
        .layers()
        .iter()
        .enumerate()
        .flat_map(|(i, layer)| {
            layer
                .param_names()
                .into_iter()
                .zip(layer.params())
                .map(move |(name, t)| (format!("{i}/{name}"), t))
        })
        .collect();
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in tensors {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], NnError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                NnError::CorruptModel(format!(
                    "truncated while reading {what} at byte {}",
                    self.pos
                ))
            })?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self, what: &str) -> Result<u32, NnError> {
        Ok(u32::from_le_bytes(
            self.take(4, what)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self, what: &str) -> Result<u64, NnError> {
        Ok(u64::from_le_bytes(
            self.take(8, what)?.try_into().expect("8 bytes"),
        ))
    }

    fn len(&mut self, what: &str) -> Result<usize, NnError> {
        usize::try_from(self.u64(what)?)
            .map_err(|_| NnError::CorruptModel(format!("{what} overflows")))
    }
}

/// Parses a container, returning the model and the caller's `extra` metadata.
pub fn deserialize(bytes: &[u8]) -> Result<(ModelGraph, Value), NnError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(NnError::CorruptModel(
            "bad magic, not a GRCN model file".into(),
        ));
    }
    let version = r.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(NnError::CorruptModel(format!(
            "unsupported format version {version}, expected {FORMAT_VERSION}"
        )));
    }
    let meta_len = r.len("metadata length")?;
    let meta: Metadata = serde_json::from_slice(r.take(meta_len, "metadata")?)
        .map_err(|e| NnError::CorruptModel(format!("metadata JSON: {e}")))?;
    let mut model = ModelGraph::from_specs(meta.input_shape, &meta.layers)
        .map_err(|e| NnError::CorruptModel(format!("layer list does not type-check: {e}")))?;

    let expected: usize = model.layers().iter().map(|l| l.params().len()).sum();
    let count = r.u32("tensor count")? as usize;
    if count != expected {
        return Err(NnError::CorruptModel(format!(
            "file holds {count} tensors, layer list needs {expected}"
        )));
    }
    for (i, layer) in model.layers_mut().iter_mut().enumerate() {
        let names = layer.param_names();
        for (name, param) in names.into_iter().zip(layer.params_mut()) {
            let want = format!("{i}/{name}");
            let name_len = r.u32("tensor name length")? as usize;
            let got = r.take(name_len, "tensor name")?;
            if got != want.as_bytes() {
                return Err(NnError::CorruptModel(format!(
                    "expected tensor {want}, found {}",
                    String::from_utf8_lossy(got)
                )));
            }
            let rank = r.u32("tensor rank")? as usize;
            let dims = (0..rank)
                .map(|_| r.len("tensor dim"))
                .collect::<Result<Vec<_>, _>>()?;
            if dims != param.shape() {
                return Err(NnError::CorruptModel(format!(
                    "tensor {want} has shape {dims:?}, expected {:?}",
                    param.shape()
                )));
            }
            let raw = r.take(param.len() * 8, "tensor data")?;
            for (v, chunk) in param.data_mut().iter_mut().zip(raw.chunks_exact(8)) {
                *v = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
            }
        }
    }
    if r.pos != bytes.len() {
        return Err(NnError::CorruptModel(format!(
            "{} trailing bytes after last tensor",
            bytes.len() - r.pos
        )));
    }
    Ok((model, meta.extra))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation;
    use serde_json::json;

    fn model() -> ModelGraph {
        let mut m = ModelGraph::from_specs(
            vec![3, 4, 1],
            &[
                LayerSpec::conv2d(2, [1, 2], [1, 1]),
                LayerSpec::activation(Activation::Relu),
                LayerSpec::reshape(&[9, 2]),
                LayerSpec::gru(3, false),
                LayerSpec::dropout(0.2),
                LayerSpec::dense(1),
                LayerSpec::activation(Activation::Sigmoid),
            ],
        )
        .unwrap();
        m.init_params(17);
        m
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = model();
        let extra = json!({"threshold": 0.5});
        let bytes = serialize(&m, &extra);
        assert_eq!(&bytes[..4], b"GRCN");
        let (back, back_extra) = deserialize(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(back_extra, extra);
        assert_eq!(serialize(&back, &back_extra), bytes);
    }

    #[test]
    fn truncation_is_corrupt() {
        let bytes = serialize(&model(), &Value::Null);
        for cut in [0, 3, 10, bytes.len() / 2, bytes.len() - 1] {
            assert!(
                matches!(deserialize(&bytes[..cut]), Err(NnError::CorruptModel(_))),
                "cut {cut}"
            );
        }
    }

    #[test]
    fn wrong_version_names_the_version() {
        let mut bytes = serialize(&model(), &Value::Null);
        bytes[4..8].copy_from_slice(&7u32.to_le_bytes());
        match deserialize(&bytes) {
            Err(NnError::CorruptModel(msg)) => assert!(msg.contains("version 7"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn trailing_garbage_is_corrupt() {
        let mut bytes = serialize(&model(), &Value::Null);
        bytes.push(0);
        assert!(matches!(deserialize(&bytes), Err(NnError::CorruptModel(_))));
    }

    #[test]
    fn bad_magic_is_corrupt() {
        let mut bytes = serialize(&model(), &Value::Null);
        bytes[0] = b'X';
        assert!(matches!(deserialize(&bytes), Err(NnError::CorruptModel(_))));
    }
}

//! Binary parameter container.
//!
//! ```text
//! "CLCK" | version u32 | config_len u64 | config JSON
//! | n_params u64 | per param: name_len u64, name, ndim u64, dims u64…, f64 payload
//! ```
//! All integers and floats are little-endian.

use std::fs;
use std::path::Path;

use super::{Model, ModelConfig};
use crate::codec::{Reader, Writer};
use crate::error::{FormatError, Result};

pub const MAGIC: [u8; 4] = *b"CLCK";
pub const VERSION: u32 = 1;

pub fn encode_checkpoint(model: &Model) -> Result<Vec<u8>> {
    let mut w = Writer::default();
    w.bytes(&MAGIC);
    w.u32(VERSION);
    let config = serde_json::to_vec(&model.config())
        .map_err(|e| FormatError::CorruptHeader(e.to_string()))?;
    w.u64(config.len() as u64);
    w.bytes(&config);
    let store = model.store();
    w.u64(store.len() as u64);
    for (name, tensor) in store.iter() {
        w.u64(name.len() as u64);
        w.bytes(name.as_bytes());
        w.u64(tensor.ndim() as u64);
        for &d in tensor.shape() {
            w.u64(d as u64);
        }
        w.f64s(tensor.data());
    }
    Ok(w.buf)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Model> {
    let mut r = Reader::new(bytes);
    r.magic(MAGIC)?;
    let version = r.u32()?;
    if version != VERSION {
        return Err(FormatError::Version {
            expected: VERSION,
            found: version,
        }
        .into());
    }
    let config_len = r.len("config length")?;
    let config: ModelConfig = serde_json::from_slice(r.take(config_len)?)
        .map_err(|e| FormatError::CorruptHeader(format!("config: {e}")))?;
    // Rebuild the layout from the config, then overwrite every tensor.
    let mut model = Model::new(&config, 0)?;
    let count = r.len("parameter count")?;
    if count != model.store().len() {
        return Err(FormatError::CorruptPayload(format!(
            "{count} parameters stored, config implies {}",
            model.store().len()
        ))
        .into());
    }
    for i in 0..count {
        let name_len = r.len("name length")?;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| FormatError::CorruptPayload("parameter name is not UTF-8".into()))?
            .to_string();
        let ndim = r.len("rank")?;
        let mut shape = Vec::with_capacity(ndim.min(8));
        for _ in 0..ndim {
            shape.push(r.len("dimension")?);
        }
        let store = model.store_mut();
        let id = super::ParamId(i);
        if store.name(id) != name || store.get(id).shape() != shape.as_slice() {
            return Err(FormatError::CorruptPayload(format!(
                "parameter {i}: stored `{name}` {shape:?}, expected `{}` {:?}",
                store.name(id),
                store.get(id).shape()
            ))
            .into());
        }
        let n = store.get(id).len();
        let data = r.f64s(n)?;
        store.get_mut(id).data_mut().copy_from_slice(&data);
    }
    r.finish()?;
    Ok(model)
}

pub fn save_checkpoint(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_checkpoint(model)?)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Model> {
    decode_checkpoint(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::models::{BiEflstmConfig, MfnConfig};

    fn models() -> Vec<Model> {
        vec![
            Model::new(
                &ModelConfig::BiEflstm(BiEflstmConfig {
                    input_dim: 5,
                    hidden: 3,
                    classes: 4,
                }),
                11,
            )
            .unwrap(),
            Model::new(&ModelConfig::Mfn(MfnConfig::new([2, 3, 1], 2)), 12).unwrap(),
        ]
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for model in models() {
            let back = decode_checkpoint(&encode_checkpoint(&model).unwrap()).unwrap();
            assert_eq!(back.config(), model.config());
            assert!(back.store().bit_eq(model.store()));
        }
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let model = models().remove(1);
        save_checkpoint(&model, &path).unwrap();
        assert!(load_checkpoint(&path)
            .unwrap()
            .store()
            .bit_eq(model.store()));
    }

    #[test]
    fn corruption_is_detected() {
        let bytes = encode_checkpoint(&models()[0]).unwrap();
        assert!(matches!(
            decode_checkpoint(&bytes[..bytes.len() - 3]),
            Err(Error::Format(FormatError::Truncated { .. }))
        ));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(
            decode_checkpoint(&bad),
            Err(Error::Format(FormatError::BadMagic { .. }))
        ));
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(
            decode_checkpoint(&bad),
            Err(Error::Format(FormatError::Version { .. }))
        ));
        let mut long = bytes;
        long.push(0);
        assert!(matches!(
            decode_checkpoint(&long),
            Err(Error::Format(FormatError::CorruptPayload(_)))
        ));
    }
}

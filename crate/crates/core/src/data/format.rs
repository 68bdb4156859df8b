//! Binary dataset container.
//!
//! Layout, all little-endian:
//!
//! | field | type |
//! |---|---|
//! | magic `CLDS` | 4 bytes |
//! | version | u32 |
//! | task (0 classification, 1 regression) | u8 |
//! | classes | u32 |
//! | T, d_language, d_audio, d_visual | 4 × u64 |
//! | train, validation, test counts | 3 × u64 |
//!
//! followed, for each split in that order, by the language, audio and visual
//! blocks (`n×T×d` f64 each, row-major), `n` f64 targets and `n` u64 unpadded
//! lengths.

use std::fs;
use std::path::Path;

use super::{DatasetSplit, Dims, Modality, MultimodalSample, Target, Task};
use crate::autograd::Tensor;
use crate::codec::{Reader, Writer};
use crate::error::{FormatError, Result};

pub const MAGIC: [u8; 4] = *b"CLDS";
pub const VERSION: u32 = 1;
/// Size of the fixed header in bytes.
pub const HEADER_LEN: usize = 4 + 4 + 1 + 4 + 8 * 4 + 8 * 3;

pub fn encode_dataset(split: &DatasetSplit) -> Result<Vec<u8>> {
    split.validate()?;
    let mut w = Writer::default();
    w.bytes(&MAGIC);
    w.u32(VERSION);
    match split.task {
        Task::Classification { classes } => {
            w.u8(0);
            w.u32(classes as u32);
        }
        Task::Regression => {
            w.u8(1);
            w.u32(0);
        }
    }
    let d = split.dims;
    for v in [d.timesteps, d.language, d.audio, d.visual] {
        w.u64(v as u64);
    }
    let parts = [&split.train, &split.validation, &split.test];
    for part in parts {
        w.u64(part.len() as u64);
    }
    for part in parts {
        for m in Modality::ALL {
            for s in part.iter() {
                w.f64s(s.modality(m).data());
            }
        }
        let targets: Vec<f64> = part.iter().map(|s| s.target.as_f64()).collect();
        w.f64s(&targets);
        for s in part.iter() {
            w.u64(s.original_length as u64);
        }
    }
    Ok(w.buf)
}

pub fn decode_dataset(bytes: &[u8]) -> Result<DatasetSplit> {
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
    let task_tag = r.u8()?;
    let classes = r.u32()? as usize;
    let task = match task_tag {
        0 if classes >= 2 => Task::Classification { classes },
        0 => return Err(FormatError::CorruptHeader(format!("{classes} classes")).into()),
        1 => Task::Regression,
        other => {
            return Err(FormatError::CorruptHeader(format!("unknown task tag {other}")).into())
        }
    };
    let dims = Dims {
        timesteps: r.len("timesteps")?,
        language: r.len("language dim")?,
        audio: r.len("audio dim")?,
        visual: r.len("visual dim")?,
    };
    if [dims.timesteps, dims.language, dims.audio, dims.visual].contains(&0) {
        return Err(FormatError::CorruptHeader("zero dimension".into()).into());
    }
    let counts = [
        r.len("train count")?,
        r.len("validation count")?,
        r.len("test count")?,
    ];

    let total: usize = counts.iter().sum();
    if total > 0 && r.remaining() == 0 {
        return Err(FormatError::CorruptPayload(format!(
            "header declares {total} samples but no payload follows"
        ))
        .into());
    }

    let mut parts: Vec<Vec<MultimodalSample>> = Vec::with_capacity(3);
    for &n in &counts {
        let blocks = Modality::ALL.map(|m| r.f64s(n * dims.timesteps * dims.of(m)));
        let [l, a, v] = blocks;
        let (l, a, v) = (l?, a?, v?);
        let targets = r.f64s(n)?;
        let mut samples = Vec::with_capacity(n);
        for i in 0..n {
            let length = r.u64()? as usize;
            if length > dims.timesteps {
                return Err(FormatError::CorruptPayload(format!(
                    "sample length {length} exceeds T"
                ))
                .into());
            }
            let target = match task {
                Task::Classification { classes } => {
                    let t = targets[i];
                    if t.fract() != 0.0 || t < 0.0 || t >= classes as f64 {
                        return Err(FormatError::CorruptPayload(format!(
                            "invalid class target {t}"
                        ))
                        .into());
                    }
                    Target::Class(t as usize)
                }
                Task::Regression => Target::Value(targets[i]),
            };
            let block = |data: &[f64], d: usize| {
                let span = dims.timesteps * d;
                Tensor::new(
                    vec![dims.timesteps, d],
                    data[i * span..(i + 1) * span].to_vec(),
                )
            };
            samples.push(MultimodalSample {
                language: block(&l, dims.language)?,
                audio: block(&a, dims.audio)?,
                visual: block(&v, dims.visual)?,
                target,
                original_length: length,
            });
        }
        parts.push(samples);
    }
    r.finish()?;
    let test = parts.pop().expect("three parts");
    let validation = parts.pop().expect("three parts");
    let train = parts.pop().expect("three parts");
    Ok(DatasetSplit {
        task,
        dims,
        train,
        validation,
        test,
    })
}

pub fn save_dataset(split: &DatasetSplit, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_dataset(split)?)?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<DatasetSplit> {
    decode_dataset(&fs::read(path)?)
}

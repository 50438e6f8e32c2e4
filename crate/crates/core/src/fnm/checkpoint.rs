//! Model checkpointing: a single self-describing container with a versioned
//! JSON header (model configuration plus named array descriptors) followed
//! by a little-endian 64-bit float payload. Complex blocks are stored as
//! interleaved real/imaginary pairs.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fnm::layers::SpectralBlocks;
use crate::fnm::model::{FnmModel, ModelConfig};

const MAGIC: &[u8; 4] = b"FNMC";
const VERSION: u32 = 1;

#[derive(serde::Serialize, serde::Deserialize)]
struct ArrayDescriptor {
    name: String,
    shape: Vec<usize>,
    complex: bool,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct Header {
    config: ModelConfig,
    arrays: Vec<ArrayDescriptor>,
}

struct NamedArray {
    descriptor: ArrayDescriptor,
    data: Vec<f64>,
}

fn real2(name: &str, a: &Array2<f64>) -> NamedArray {
    NamedArray {
        descriptor: ArrayDescriptor {
            name: name.to_string(),
            shape: vec![a.nrows(), a.ncols()],
            complex: false,
        },
        data: a.iter().copied().collect(),
    }
}

fn real1(name: &str, a: &Array1<f64>) -> NamedArray {
    NamedArray {
        descriptor: ArrayDescriptor {
            name: name.to_string(),
            shape: vec![a.len()],
            complex: false,
        },
        data: a.to_vec(),
    }
}

fn complex2(name: &str, a: &Array2<Complex64>) -> NamedArray {
    let mut data = Vec::with_capacity(2 * a.len());
    for v in a.iter() {
        data.push(v.re);
        data.push(v.im);
    }
    NamedArray {
        descriptor: ArrayDescriptor {
            name: name.to_string(),
            shape: vec![a.nrows(), a.ncols()],
            complex: true,
        },
        data,
    }
}

fn collect_blocks(out: &mut Vec<NamedArray>, prefix: &str, blocks: &SpectralBlocks) {
    out.push(real2(&format!("{prefix}.p0"), &blocks.p0));
    for (k, p) in blocks.pk.iter().enumerate() {
        out.push(complex2(&format!("{prefix}.p{}", k + 1), p));
    }
}

fn collect(model: &FnmModel) -> Vec<NamedArray> {
    let mut out = Vec::new();
    out.push(real2("lift.w", &model.lift.w));
    out.push(real1("lift.b", &model.lift.b));
    if let Some(dec) = &model.decoder {
        collect_blocks(&mut out, "decoder", &dec.blocks);
    }
    for (t, layer) in model.hidden.iter().enumerate() {
        let prefix = format!("hidden{t}");
        out.push(real2(&format!("{prefix}.w"), &layer.w));
        out.push(real1(&format!("{prefix}.bias"), &layer.bias));
        collect_blocks(&mut out, &prefix, &layer.blocks);
    }
    if let Some(layer) = &model.final_fourier {
        out.push(real2("final.w", &layer.w));
        out.push(real1("final.bias", &layer.bias));
        collect_blocks(&mut out, "final", &layer.blocks);
    }
    if let Some(func) = &model.functional {
        collect_blocks(&mut out, "functional", &func.blocks);
    }
    if let Some(branch) = &model.w_branch {
        out.push(real2("wbranch.w1", &branch.w1));
        out.push(real1("wbranch.b1", &branch.b1));
        out.push(real2("wbranch.w2", &branch.w2));
        out.push(real1("wbranch.b2", &branch.b2));
    }
    out.push(real2("proj.w", &model.proj.w));
    out.push(real1("proj.b", &model.proj.b));
    out
}

fn take(map: &mut HashMap<String, NamedArray>, name: &str) -> Result<NamedArray> {
    map.remove(name)
        .ok_or_else(|| Error::Checkpoint(format!("missing array {name}")))
}

fn install_real2(map: &mut HashMap<String, NamedArray>, name: &str, a: &mut Array2<f64>) -> Result<()> {
    let arr = take(map, name)?;
    if arr.descriptor.complex || arr.descriptor.shape != [a.nrows(), a.ncols()] {
        return Err(Error::Checkpoint(format!("shape mismatch for {name}")));
    }
    for (dst, src) in a.iter_mut().zip(&arr.data) {
        *dst = *src;
    }
    Ok(())
}

fn install_real1(map: &mut HashMap<String, NamedArray>, name: &str, a: &mut Array1<f64>) -> Result<()> {
    let arr = take(map, name)?;
    if arr.descriptor.complex || arr.descriptor.shape != [a.len()] {
        return Err(Error::Checkpoint(format!("shape mismatch for {name}")));
    }
    for (dst, src) in a.iter_mut().zip(&arr.data) {
        *dst = *src;
    }
    Ok(())
}

fn install_complex2(
    map: &mut HashMap<String, NamedArray>,
    name: &str,
    a: &mut Array2<Complex64>,
) -> Result<()> {
    let arr = take(map, name)?;
    if !arr.descriptor.complex || arr.descriptor.shape != [a.nrows(), a.ncols()] {
        return Err(Error::Checkpoint(format!("shape mismatch for {name}")));
    }
    for (dst, pair) in a.iter_mut().zip(arr.data.chunks_exact(2)) {
        *dst = Complex64::new(pair[0], pair[1]);
    }
    Ok(())
}

fn install_blocks(
    map: &mut HashMap<String, NamedArray>,
    prefix: &str,
    blocks: &mut SpectralBlocks,
) -> Result<()> {
    install_real2(map, &format!("{prefix}.p0"), &mut blocks.p0)?;
    for k in 0..blocks.pk.len() {
        install_complex2(map, &format!("{prefix}.p{}", k + 1), &mut blocks.pk[k])?;
    }
    Ok(())
}

/// Writes the model to `path` in the versioned container format.
pub fn save(model: &FnmModel, path: &Path) -> Result<()> {
    let arrays = collect(model);
    let header = Header {
        config: model.config.clone(),
        arrays: arrays.iter().map(|a| ArrayDescriptor {
            name: a.descriptor.name.clone(),
            shape: a.descriptor.shape.clone(),
            complex: a.descriptor.complex,
        }).collect(),
    };
    let header_bytes = serde_json::to_vec(&header)
        .map_err(|e| Error::Checkpoint(format!("header serialization: {e}")))?;
    let mut file = std::fs::File::create(path)?;
    file.write_all(MAGIC)?;
    file.write_all(&VERSION.to_le_bytes())?;
    file.write_all(&(header_bytes.len() as u64).to_le_bytes())?;
    file.write_all(&header_bytes)?;
    for array in &arrays {
        for v in &array.data {
            file.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Reads a model from `path`, validating magic, version, and array shapes.
pub fn load(path: &Path) -> Result<FnmModel> {
    let mut file = std::fs::File::open(path)?;
    let mut magic = [0u8; 4];
    file.read_exact(&mut magic)
        .map_err(|_| Error::Checkpoint("file too short for magic".into()))?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic bytes".into()));
    }
    let mut word = [0u8; 4];
    file.read_exact(&mut word)
        .map_err(|_| Error::Checkpoint("file too short for version".into()))?;
    let version = u32::from_le_bytes(word);
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let mut len_bytes = [0u8; 8];
    file.read_exact(&mut len_bytes)
        .map_err(|_| Error::Checkpoint("file too short for header length".into()))?;
    let header_len = u64::from_le_bytes(len_bytes) as usize;
    let mut header_bytes = vec![0u8; header_len];
    file.read_exact(&mut header_bytes)
        .map_err(|_| Error::Checkpoint("truncated header".into()))?;
    let header: Header = serde_json::from_slice(&header_bytes)
        .map_err(|e| Error::Checkpoint(format!("header parse: {e}")))?;

    let mut map = HashMap::new();
    for descriptor in header.arrays {
        let count: usize =
            descriptor.shape.iter().product::<usize>() * if descriptor.complex { 2 } else { 1 };
        let mut bytes = vec![0u8; 8 * count];
        file.read_exact(&mut bytes)
            .map_err(|_| Error::Checkpoint(format!("truncated payload at {}", descriptor.name)))?;
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        map.insert(descriptor.name.clone(), NamedArray { descriptor, data });
    }

    let mut model = FnmModel::zeros(header.config)?;
    install_real2(&mut map, "lift.w", &mut model.lift.w)?;
    install_real1(&mut map, "lift.b", &mut model.lift.b)?;
    if let Some(dec) = &mut model.decoder {
        install_blocks(&mut map, "decoder", &mut dec.blocks)?;
    }
    for t in 0..model.hidden.len() {
        let prefix = format!("hidden{t}");
        install_real2(&mut map, &format!("{prefix}.w"), &mut model.hidden[t].w)?;
        install_real1(&mut map, &format!("{prefix}.bias"), &mut model.hidden[t].bias)?;
        install_blocks(&mut map, &prefix, &mut model.hidden[t].blocks)?;
    }
    if let Some(layer) = &mut model.final_fourier {
        install_real2(&mut map, "final.w", &mut layer.w)?;
        install_real1(&mut map, "final.bias", &mut layer.bias)?;
        install_blocks(&mut map, "final", &mut layer.blocks)?;
    }
    if let Some(func) = &mut model.functional {
        install_blocks(&mut map, "functional", &mut func.blocks)?;
    }
    if let Some(branch) = &mut model.w_branch {
        install_real2(&mut map, "wbranch.w1", &mut branch.w1)?;
        install_real1(&mut map, "wbranch.b1", &mut branch.b1)?;
        install_real2(&mut map, "wbranch.w2", &mut branch.w2)?;
        install_real1(&mut map, "wbranch.b2", &mut branch.b2)?;
    }
    install_real2(&mut map, "proj.w", &mut model.proj.w)?;
    install_real1(&mut map, "proj.b", &mut model.proj.b)?;
    if !map.is_empty() {
        let extra: Vec<_> = map.keys().cloned().collect();
        return Err(Error::Checkpoint(format!("unexpected arrays: {extra:?}")));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fnm::model::{ModelConfig, Variant};

    fn sample_model() -> FnmModel {
        FnmModel::init(
            ModelConfig {
                variant: Variant::V2V,
                in_dim: 2,
                out_dim: 3,
                width: 4,
                modes: 3,
                hidden_layers: 2,
                resolution: 16,
                use_w_branch: true,
            },
            99,
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = std::env::temp_dir().join("fnm-checkpoint-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.fnmc");
        let model = sample_model();
        save(&model, &path).unwrap();
        let restored = load(&path).unwrap();
        assert_eq!(model, restored);
        std::fs::remove_file(&path).unwrap();
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let dir = std::env::temp_dir().join("fnm-checkpoint-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model-corrupt.fnmc");
        let model = sample_model();
        save(&model, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        match load(&path) {
            Err(Error::Checkpoint(msg)) => assert!(msg.contains("magic")),
            other => panic!("expected checkpoint error, got {other:?}"),
        }
        bytes[0] = b'F';
        bytes.truncate(bytes.len() - 16);
        std::fs::write(&path, &bytes).unwrap();
        match load(&path) {
            Err(Error::Checkpoint(msg)) => assert!(msg.contains("truncated")),
            other => panic!("expected checkpoint error, got {other:?}"),
        }
        std::fs::remove_file(&path).unwrap();
    }
}

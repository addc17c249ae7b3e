// SPDX-License-Identifier: MIT OR Apache-2.0

//! Safetensors weight archives.

use std::collections::BTreeMap;
use std::path::Path;

use gapscope_core::{DType, Model, ModelConfig, Scalar, Tensor, WeightLayout};
use half::{bf16, f16};
use safetensors::tensor::TensorView;
use safetensors::{Dtype, SafeTensors};

use crate::error::{Error, Result};
use crate::io::{read_bytes, read_json, write_atomic};

fn archive_err(path: &Path, reason: impl std::fmt::Display) -> Error {
    Error::Archive { path: path.to_path_buf(), reason: reason.to_string() }
}

fn decode<T: Scalar>(dtype: Dtype, bytes: &[u8]) -> Option<Vec<T>> {
    let out = match dtype {
        Dtype::F64 => bytes.chunks_exact(8).map(|c| T::from_f64(f64::from_le_bytes(c.try_into().unwrap()))).collect(),
        Dtype::F32 => bytes.chunks_exact(4).map(|c| T::from_f64(f32::from_le_bytes(c.try_into().unwrap()) as f64)).collect(),
        Dtype::F16 => bytes.chunks_exact(2).map(|c| T::from_f64(f16::from_le_bytes([c[0], c[1]]).to_f64())).collect(),
        Dtype::BF16 => bytes.chunks_exact(2).map(|c| T::from_f64(bf16::from_le_bytes([c[0], c[1]]).to_f64())).collect(),
        _ => return None,
    };
    Some(out)
}

/// Every floating-point tensor in the archive, converted to `T`.
pub fn read_tensors<T: Scalar>(path: &Path) -> Result<BTreeMap<String, Tensor<T>>> {
    let bytes = read_bytes(path)?;
    let st = SafeTensors::deserialize(&bytes).map_err(|e| archive_err(path, e))?;
    let mut out = BTreeMap::new();
    for (name, view) in st.tensors() {
        let data = decode::<T>(view.dtype(), view.data())
            .ok_or_else(|| archive_err(path, format!("tensor `{name}` has unsupported dtype {:?}", view.dtype())))?;
        out.insert(name, Tensor::new(view.shape().to_vec(), data)?);
    }
    Ok(out)
}

/// Writes tensors in their own precision.
pub fn write_tensors<T: Scalar>(path: &Path, tensors: &BTreeMap<String, Tensor<T>>) -> Result<()> {
    let dtype = match T::DTYPE {
        DType::F32 => Dtype::F32,
        DType::F64 => Dtype::F64,
    };
    let raw: Vec<(String, Vec<usize>, Vec<u8>)> = tensors
        .iter()
        .map(|(name, t)| {
            let bytes = t
                .data()
                .iter()
                .flat_map(|v| match T::DTYPE {
                    DType::F32 => (v.as_f64() as f32).to_le_bytes().to_vec(),
                    DType::F64 => v.as_f64().to_le_bytes().to_vec(),
                })
                .collect();
            (name.clone(), t.shape().to_vec(), bytes)
        })
        .collect();
    let mut views = Vec::with_capacity(raw.len());
    for (name, shape, bytes) in &raw {
        views.push((name.as_str(), TensorView::new(dtype, shape.clone(), bytes).map_err(|e| archive_err(path, e))?));
    }
    let buf = safetensors::serialize(views, &None).map_err(|e| archive_err(path, e))?;
    write_atomic(path, &buf)
}

/// Reads a `config.json` (native or Hugging Face key names).
pub fn read_config(path: &Path) -> Result<ModelConfig> {
    let cfg: ModelConfig = read_json(path)?;
    Ok(cfg.validated()?)
}

/// Loads a model; `layout` defaults to the NeoX checkpoint names.
pub fn load_model<T: Scalar>(weights: &Path, config: ModelConfig, layout: Option<&WeightLayout>) -> Result<Model<T>> {
    let default = WeightLayout::default();
    let layout = layout.unwrap_or(&default);
    let tensors = read_tensors::<T>(weights)?;
    Ok(Model::from_tensors(config, layout, tensors)?)
}

pub fn save_model<T: Scalar>(path: &Path, model: &Model<T>, layout: Option<&WeightLayout>) -> Result<()> {
    let default = WeightLayout::default();
    write_tensors(path, &model.to_tensors(layout.unwrap_or(&default)))
}

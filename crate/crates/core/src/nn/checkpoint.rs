//! Single-file checkpoints.
//!
//! Layout:
//!
//! ```text
//! KANAE1 <metadata-length>\n
//! <metadata-length bytes of JSON metadata>
//! <tensor payloads, little-endian f64, in the order listed in the metadata>
//! ```
//!
//! The metadata object carries `spec` (caller supplied, usually the model
//! spec), `grids` (spline grid parameters keyed by KAN layer name) and
//! `tensors`, a list of `{name, role, shape, dtype, offset, nbytes}` where
//! `offset` counts bytes from the start of the payload section.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::layer::Layer;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::splines::GridParams;

pub const MAGIC: &str = "KANAE1";
const DTYPE: &str = "f64-le";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TensorRole {
    Param,
    Buffer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub role: TensorRole,
    pub shape: Vec<usize>,
    pub dtype: String,
    pub offset: u64,
    pub nbytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub spec: serde_json::Value,
    pub grids: BTreeMap<String, GridParams>,
    pub tensors: Vec<TensorEntry>,
}

fn collect(layer: &dyn Layer) -> Vec<(String, TensorRole, Tensor)> {
    let mut out = Vec::new();
    layer.visit_params("", &mut |n, p| {
        out.push((n.to_string(), TensorRole::Param, p.value.clone()))
    });
    layer.visit_buffers("", &mut |n, t| {
        out.push((n.to_string(), TensorRole::Buffer, t.clone()))
    });
    out
}

pub fn save(path: &Path, spec: serde_json::Value, layer: &dyn Layer) -> Result<()> {
    let tensors = collect(layer);
    let mut grids = BTreeMap::new();
    layer.visit_grids("", &mut |n, g| {
        grids.insert(n.to_string(), g.params());
    });
    let mut offset = 0u64;
    let entries = tensors
        .iter()
        .map(|(name, role, t)| {
            let nbytes = (t.len() * 8) as u64;
            let e = TensorEntry {
                name: name.clone(),
                role: role.clone(),
                shape: t.shape().to_vec(),
                dtype: DTYPE.to_string(),
                offset,
                nbytes,
            };
            offset += nbytes;
            e
        })
        .collect();
    let meta = Metadata {
        spec,
        grids,
        tensors: entries,
    };
    let json = serde_json::to_vec(&meta)?;

    let mut buf = Vec::with_capacity(json.len() + offset as usize + 32);
    writeln!(buf, "{MAGIC} {}", json.len())?;
    buf.extend_from_slice(&json);
    for (_, _, t) in &tensors {
        for v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, buf)?;
    Ok(())
}

fn read_meta<R: BufRead>(reader: &mut R) -> Result<Metadata> {
    let mut header = String::new();
    reader.read_line(&mut header)?;
    let header = header.trim_end_matches('\n');
    let len = header
        .strip_prefix(MAGIC)
        .and_then(|rest| rest.strip_prefix(' '))
        .and_then(|n| n.parse::<usize>().ok())
        .ok_or_else(|| Error::Checkpoint(format!("bad header line {header:?}")))?;
    let mut json = vec![0u8; len];
    reader.read_exact(&mut json)?;
    Ok(serde_json::from_slice(&json)?)
}

/// Parse only the header and metadata block.
pub fn read_metadata(path: &Path) -> Result<Metadata> {
    let mut reader = BufReader::new(fs::File::open(path)?);
    read_meta(&mut reader)
}

/// Read every tensor in the file, keyed by name.
pub fn read_tensors(path: &Path) -> Result<(Metadata, BTreeMap<String, Tensor>)> {
    let mut reader = BufReader::new(fs::File::open(path)?);
    let meta = read_meta(&mut reader)?;
    let mut payload = Vec::new();
    reader.read_to_end(&mut payload)?;
    let mut out = BTreeMap::new();
    for e in &meta.tensors {
        if e.dtype != DTYPE {
            return Err(Error::Checkpoint(format!("{}: unsupported dtype {}", e.name, e.dtype)));
        }
        let start = e.offset as usize;
        let end = start + e.nbytes as usize;
        let bytes = payload
            .get(start..end)
            .ok_or_else(|| Error::Checkpoint(format!("{}: payload truncated", e.name)))?;
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        out.insert(e.name.clone(), Tensor::new(&e.shape, data)?);
    }
    Ok((meta, out))
}

/// Overwrite the parameters and buffers of `layer` with the file contents.
/// Every tensor of the layer must be present with a matching shape.
pub fn load_into(path: &Path, layer: &mut dyn Layer) -> Result<Metadata> {
    let (meta, mut tensors) = read_tensors(path)?;
    let mut problems = Vec::new();
    let mut take = |name: &str, dst: &mut Tensor| match tensors.remove(name) {
        Some(t) if t.shape() == dst.shape() => *dst = t,
        Some(t) => problems.push(format!(
            "{name}: shape {:?} in file, {:?} in model",
            t.shape(),
            dst.shape()
        )),
        None => problems.push(format!("{name}: missing from file")),
    };
    layer.visit_params_mut("", &mut |n, p| take(n, &mut p.value));
    layer.visit_buffers_mut("", &mut |n, t| take(n, t));
    if !problems.is_empty() {
        return Err(Error::Checkpoint(problems.join("; ")));
    }
    Ok(meta)
}

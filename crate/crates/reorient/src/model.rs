//! Regressor model files.
//!
//! Layout, all little-endian: the 8-byte magic `REORIENT`, a `u32` version,
//! a `u32` layer count, then `(rows, cols)` as `u32` pairs per dense layer,
//! the input side as `u32`, leaky slope and dropout rate as `f64`, the
//! parameter count as `u64`, and the raw `f64` parameters.

use std::fs;
use std::io::{Cursor, Read};
use std::path::Path;

use reorient_core::estimate::{EstimatorError, RegressorModel, RegressorShape};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"REORIENT";
pub const VERSION: u32 = 1;

pub fn encode_model(model: &RegressorModel) -> Vec<u8> {
    let shape = model.shape();
    let dims = shape.layer_dims();
    let mut out = Vec::with_capacity(64 + 8 * model.params().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
    for (rows, cols) in dims {
        out.extend_from_slice(&(rows as u32).to_le_bytes());
        out.extend_from_slice(&(cols as u32).to_le_bytes());
    }
    out.extend_from_slice(&(shape.input_side as u32).to_le_bytes());
    out.extend_from_slice(&model.leaky_slope.to_le_bytes());
    out.extend_from_slice(&model.dropout.to_le_bytes());
    out.extend_from_slice(&(model.params().len() as u64).to_le_bytes());
    for p in model.params() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

fn mismatch(msg: impl Into<String>) -> Error {
    Error::Estimator(EstimatorError::ShapeMismatch(msg.into()))
}

/// Decodes a model file. Truncation surfaces as an io error; a header that
/// does not describe a valid regressor is a shape mismatch.
pub fn decode_model(bytes: &[u8], path: &Path) -> Result<RegressorModel> {
    let mut cur = Cursor::new(bytes);
    let mut read = |n: usize| -> Result<Vec<u8>> {
        let mut buf = vec![0u8; n];
        cur.read_exact(&mut buf).map_err(|e| Error::io(path, e))?;
        Ok(buf)
    };
    let u32_at = |b: Vec<u8>| u32::from_le_bytes(b.try_into().expect("4 bytes"));
    let f64_at = |b: Vec<u8>| f64::from_le_bytes(b.try_into().expect("8 bytes"));

    if read(8)? != MAGIC {
        return Err(Error::format(path, "not a reorient model file"));
    }
    let version = u32_at(read(4)?);
    if version != VERSION {
        return Err(Error::format(
            path,
            format!("unsupported model version {version}"),
        ));
    }
    let layers = u32_at(read(4)?) as usize;
    if layers != 4 {
        return Err(mismatch(format!(
            "expected 4 layers, header lists {layers}"
        )));
    }
    let mut dims = [(0usize, 0usize); 4];
    for d in dims.iter_mut() {
        *d = (u32_at(read(4)?) as usize, u32_at(read(4)?) as usize);
    }
    let input_side = u32_at(read(4)?) as usize;
    let leaky_slope = f64_at(read(8)?);
    let dropout = f64_at(read(8)?);
    let count = u64::from_le_bytes(read(8)?.try_into().expect("8 bytes")) as usize;

    let shape = RegressorShape {
        input_side,
        embed: dims[0].0,
        hidden: [dims[1].0, dims[2].0],
    };
    if shape.layer_dims() != dims {
        return Err(mismatch(format!(
            "layer table {dims:?} is not a valid chain"
        )));
    }
    if count != shape.param_count() {
        return Err(mismatch(format!(
            "header lists {count} parameters, shape needs {}",
            shape.param_count()
        )));
    }
    let raw = read(8 * count)?;
    let params = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    if (cur.position() as usize) != bytes.len() {
        return Err(Error::format(path, "trailing bytes after parameters"));
    }
    let mut model = RegressorModel::from_params(shape, params)?;
    model.leaky_slope = leaky_slope;
    model.dropout = dropout;
    Ok(model)
}

pub fn save_model(path: impl AsRef<Path>, model: &RegressorModel) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_model(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<RegressorModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes, path)
}

/// Loads a model and checks it against the shape the caller expects.
pub fn load_model_with_shape(
    path: impl AsRef<Path>,
    expected: &RegressorShape,
) -> Result<RegressorModel> {
    let model = load_model(path)?;
    if model.shape() != expected {
        return Err(mismatch(format!(
            "model has shape {:?}, expected {expected:?}",
            model.shape()
        )));
    }
    Ok(model)
}

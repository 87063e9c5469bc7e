//! OSTF, the portable tensor format for exported ViT features and attention.
//!
//! Layout (all integers little-endian):
//!
//! | offset | size | field                                              |
//! |-------:|-----:|----------------------------------------------------|
//! | 0      | 4    | magic `b"OSTF"`                                    |
//! | 4      | 4    | version, `u32` = 1                                 |
//! | 8      | 1    | kind, `u8`: 0 = feature map, 1 = attention stack   |
//! | 9      | 12   | three `u32` dims: `H, W, d` or `h_a, H, W`         |
//! | 21     | 4    | patch stride, `u32` (0 when not applicable)        |
//! | 25     | 4·n  | `f32` payload, row-major, last dim fastest         |

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"OSTF";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 25;

const KIND_FEATURE: u8 = 0;
const KIND_ATTENTION: u8 = 1;

/// Dense patch features, shape `height x width x dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub height: usize,
    pub width: usize,
    pub dim: usize,
    pub patch_stride: u32,
    pub values: Vec<f32>,
}

impl FeatureMap {
    pub fn new(height: usize, width: usize, dim: usize, patch_stride: u32, values: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 || dim == 0 {
            return Err(Error::Data(format!("feature map dims must be >= 1, got {height}x{width}x{dim}")));
        }
        if values.len() != height * width * dim {
            return Err(Error::Data(format!(
                "feature map {height}x{width}x{dim} needs {} values, got {}",
                height * width * dim,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite feature value at flat index {i}")));
        }
        Ok(FeatureMap {
            height,
            width,
            dim,
            patch_stride,
            values,
        })
    }

    pub fn num_cells(&self) -> usize {
        self.height * self.width
    }

    /// Feature vector of cell `index` in row-major order.
    pub fn vector(&self, index: usize) -> &[f32] {
        &self.values[index * self.dim..(index + 1) * self.dim]
    }
}

/// Per-head attention maps, shape `heads x height x width`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionStack {
    pub heads: usize,
    pub height: usize,
    pub width: usize,
    pub patch_stride: u32,
    pub values: Vec<f32>,
}

impl AttentionStack {
    pub fn new(heads: usize, height: usize, width: usize, patch_stride: u32, values: Vec<f32>) -> Result<Self> {
        if heads == 0 || height == 0 || width == 0 {
            return Err(Error::Data(format!(
                "attention dims must be >= 1, got {heads}x{height}x{width}"
            )));
        }
        if values.len() != heads * height * width {
            return Err(Error::Data(format!(
                "attention stack {heads}x{height}x{width} needs {} values, got {}",
                heads * height * width,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Data(format!(
                "attention value {} at flat index {i} is negative or non-finite",
                values[i]
            )));
        }
        Ok(AttentionStack {
            heads,
            height,
            width,
            patch_stride,
            values,
        })
    }

    pub fn map(&self, head: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.values[head * n..(head + 1) * n]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Tensor {
    Feature(FeatureMap),
    Attention(AttentionStack),
}

impl Tensor {
    pub fn into_feature(self) -> Result<FeatureMap> {
        match self {
            Tensor::Feature(f) => Ok(f),
            Tensor::Attention(_) => Err(Error::Format("expected a feature map, found an attention stack".into())),
        }
    }

    pub fn into_attention(self) -> Result<AttentionStack> {
        match self {
            Tensor::Attention(a) => Ok(a),
            Tensor::Feature(_) => Err(Error::Format("expected an attention stack, found a feature map".into())),
        }
    }

    fn header(&self) -> (u8, [u32; 3], u32, &[f32]) {
        match self {
            Tensor::Feature(f) => (
                KIND_FEATURE,
                [f.height as u32, f.width as u32, f.dim as u32],
                f.patch_stride,
                &f.values,
            ),
            Tensor::Attention(a) => (
                KIND_ATTENTION,
                [a.heads as u32, a.height as u32, a.width as u32],
                a.patch_stride,
                &a.values,
            ),
        }
    }
}

impl From<FeatureMap> for Tensor {
    fn from(f: FeatureMap) -> Self {
        Tensor::Feature(f)
    }
}

impl From<AttentionStack> for Tensor {
    fn from(a: AttentionStack) -> Self {
        Tensor::Attention(a)
    }
}

fn eof_as_format(e: std::io::Error) -> Error {
    Error::Format(format!("incomplete header: {e}"))
}

/// Reads one tensor, consuming the whole reader.
pub fn read_tensor<R: Read>(mut reader: R) -> Result<Tensor> {
    let mut magic = [0u8; 4];
    reader.read_exact(&mut magic).map_err(eof_as_format)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let version = reader.read_u32::<LittleEndian>().map_err(eof_as_format)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let kind = reader.read_u8().map_err(eof_as_format)?;
    let mut dims = [0u32; 3];
    for d in &mut dims {
        *d = reader.read_u32::<LittleEndian>().map_err(eof_as_format)?;
    }
    let patch_stride = reader.read_u32::<LittleEndian>().map_err(eof_as_format)?;
    if kind != KIND_FEATURE && kind != KIND_ATTENTION {
        return Err(Error::Format(format!("unknown tensor kind {kind}")));
    }

    let count = dims.iter().map(|&d| d as u64).product::<u64>();
    let expected = count * 4;
    let mut payload = Vec::new();
    reader
        .read_to_end(&mut payload)
        .map_err(|e| Error::Format(format!("payload read failed: {e}")))?;
    if payload.len() as u64 != expected {
        return Err(Error::Truncated {
            expected,
            found: payload.len() as u64,
        });
    }
    let values: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();

    let [a, b, c] = dims.map(|d| d as usize);
    Ok(match kind {
        KIND_FEATURE => Tensor::Feature(FeatureMap::new(a, b, c, patch_stride, values)?),
        _ => Tensor::Attention(AttentionStack::new(a, b, c, patch_stride, values)?),
    })
}

pub fn write_tensor<W: Write>(mut writer: W, tensor: &Tensor) -> Result<()> {
    let (kind, dims, stride, values) = tensor.header();
    let io = |e: std::io::Error| Error::Format(format!("write failed: {e}"));
    writer.write_all(MAGIC).map_err(io)?;
    writer.write_u32::<LittleEndian>(VERSION).map_err(io)?;
    writer.write_u8(kind).map_err(io)?;
    for d in dims {
        writer.write_u32::<LittleEndian>(d).map_err(io)?;
    }
    writer.write_u32::<LittleEndian>(stride).map_err(io)?;
    for v in values {
        writer.write_f32::<LittleEndian>(*v).map_err(io)?;
    }
    writer.flush().map_err(io)
}

pub fn read_tensor_file(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_tensor(BufReader::new(file))
}

pub fn write_tensor_file(path: impl AsRef<Path>, tensor: &Tensor) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_tensor(BufWriter::new(file), tensor)
}

pub fn to_bytes(tensor: &Tensor) -> Vec<u8> {
    let mut buf = Vec::new();
    write_tensor(&mut buf, tensor).expect("writing to a Vec cannot fail");
    buf
}

//! Raw float tensor images: `"RAWT"`, u32 H, u32 W, u32 C (little-endian),
//! then H*W*C little-endian `f32` values.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const RAWT_MAGIC: &[u8; 4] = b"RAWT";

pub fn encode_rawt(image: &Tensor) -> Result<Vec<u8>> {
    let [h, w, c] = match *image.shape() {
        [h, w, c] => [h, w, c],
        _ => {
            return Err(Error::shape(format!(
                "raw tensor images are (H, W, C), got {:?}",
                image.shape()
            )))
        }
    };
    let mut out = Vec::with_capacity(16 + 4 * image.len());
    out.extend_from_slice(RAWT_MAGIC);
    for d in [h, w, c] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in image.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_rawt(bytes: &[u8]) -> Result<Tensor> {
    if bytes.len() < 16 || &bytes[..4] != RAWT_MAGIC {
        return Err(Error::InvalidData("not a RAWT tensor file".into()));
    }
    let dim = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
    let shape = [dim(0), dim(1), dim(2)];
    let count: usize = shape.iter().product();
    if bytes.len() != 16 + 4 * count {
        return Err(Error::InvalidData(format!(
            "RAWT {:?} needs {} payload bytes, file has {}",
            shape,
            4 * count,
            bytes.len() - 16
        )));
    }
    let data = bytes[16..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Tensor::from_vec(&shape, data)
}

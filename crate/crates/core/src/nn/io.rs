//! `DGW1` weight files.
//!
//! Layout, all integers `u32` little-endian and all reals `f64` little-endian:
//!
//! ```text
//! "DGW1" | layer_count
//! per layer: in_size | out_size | activation tag (u8) | weights (out*in, row-major) | biases (out)
//! ```
//!
//! Activation tags: 0 identity, 1 sigmoid, 2 tanh, 3 relu.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{Activation, Layer, Mlp};
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"DGW1";

pub fn write_weights<W: Write>(params: &Mlp, mut out: W) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&(params.layers().len() as u32).to_le_bytes())?;
    for layer in params.layers() {
        out.write_all(&(layer.in_size() as u32).to_le_bytes())?;
        out.write_all(&(layer.out_size() as u32).to_le_bytes())?;
        out.write_all(&[layer.activation().tag()])?;
        for v in layer.weights().iter().chain(layer.bias().iter()) {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Size in bytes of the encoded form of `params`.
pub fn encoded_len(params: &Mlp) -> usize {
    8 + params.layers().len() * 9 + params.param_count() * 8
}

pub fn to_bytes(params: &Mlp) -> Vec<u8> {
    let mut buf = Vec::with_capacity(encoded_len(params));
    write_weights(params, &mut buf).expect("writing to a Vec cannot fail");
    buf
}

struct Cursor<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> Cursor<R> {
    fn fill(&mut self, buf: &mut [u8], what: &str) -> Result<()> {
        let mut read = 0;
        while read < buf.len() {
            match self.inner.read(&mut buf[read..]) {
                Ok(0) => {
                    return Err(Error::Format {
                        offset: self.offset + read as u64,
                        message: format!("truncated while reading {what}"),
                    })
                }
                Ok(n) => read += n,
                Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
        self.offset += buf.len() as u64;
        Ok(())
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let mut b = [0u8; 4];
        self.fill(&mut b, what)?;
        Ok(u32::from_le_bytes(b))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        let mut b = [0u8; 8];
        self.fill(&mut b, what)?;
        Ok(f64::from_le_bytes(b))
    }
}

fn format_err(offset: u64, message: impl Into<String>) -> Error {
    Error::Format {
        offset,
        message: message.into(),
    }
}

pub fn read_weights<R: Read>(input: R) -> Result<Mlp> {
    read_impl(input, None)
}

/// Reads a file and checks its layer widths against `expected_sizes`
/// (input width first, e.g. `[2, 4, 1]`).
pub fn read_weights_expecting<R: Read>(input: R, expected_sizes: &[usize]) -> Result<Mlp> {
    read_impl(input, Some(expected_sizes))
}

fn read_impl<R: Read>(input: R, expected: Option<&[usize]>) -> Result<Mlp> {
    let mut cur = Cursor {
        inner: input,
        offset: 0,
    };
    let mut magic = [0u8; 4];
    cur.fill(&mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(format_err(0, format!("bad magic {magic:?}, expected \"DGW1\"")));
    }
    let count_at = cur.offset;
    let count = cur.u32("layer count")? as usize;
    if count == 0 {
        return Err(format_err(count_at, "layer count is zero"));
    }
    if let Some(sizes) = expected {
        if sizes.len() != count + 1 {
            return Err(format_err(
                count_at,
                format!("dimension mismatch: file has {count} layers, expected {}", sizes.len() - 1),
            ));
        }
    }

    let mut layers = Vec::with_capacity(count);
    let mut prev_out: Option<usize> = None;
    for k in 0..count {
        let in_at = cur.offset;
        let inp = cur.u32("layer input size")? as usize;
        let out_at = cur.offset;
        let out = cur.u32("layer output size")? as usize;
        if inp == 0 || out == 0 {
            return Err(format_err(in_at, format!("layer {k} has a zero dimension")));
        }
        if let Some(p) = prev_out {
            if p != inp {
                return Err(format_err(
                    in_at,
                    format!("layer {k} input size {inp} does not chain with previous output {p}"),
                ));
            }
        }
        if let Some(sizes) = expected {
            if sizes[k] != inp {
                return Err(format_err(
                    in_at,
                    format!("dimension mismatch: layer {k} input {inp}, expected {}", sizes[k]),
                ));
            }
            if sizes[k + 1] != out {
                return Err(format_err(
                    out_at,
                    format!("dimension mismatch: layer {k} output {out}, expected {}", sizes[k + 1]),
                ));
            }
        }
        let tag_at = cur.offset;
        let mut tag = [0u8; 1];
        cur.fill(&mut tag, "activation tag")?;
        let activation = Activation::from_tag(tag[0])
            .ok_or_else(|| format_err(tag_at, format!("unknown activation tag {}", tag[0])))?;

        let mut weights = Vec::with_capacity(inp * out);
        for _ in 0..inp * out {
            let at = cur.offset;
            let v = cur.f64("weights")?;
            if !v.is_finite() {
                return Err(format_err(at, format!("non-finite weight in layer {k}")));
            }
            weights.push(v);
        }
        let mut bias = Vec::with_capacity(out);
        for _ in 0..out {
            let at = cur.offset;
            let v = cur.f64("biases")?;
            if !v.is_finite() {
                return Err(format_err(at, format!("non-finite bias in layer {k}")));
            }
            bias.push(v);
        }
        let weights = Array2::from_shape_vec((out, inp), weights).expect("length checked");
        layers.push(Layer::new(weights, Array1::from(bias), activation)?);
        prev_out = Some(out);
    }
    let mut trailing = [0u8; 1];
    match cur.inner.read(&mut trailing) {
        Ok(0) => {}
        Ok(_) => return Err(format_err(cur.offset, "trailing bytes after last layer")),
        Err(e) => return Err(e.into()),
    }
    Mlp::from_layers(layers)
}

pub fn save(params: &Mlp, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path)?;
    write_weights(params, BufWriter::new(file))
}

pub fn load(path: impl AsRef<Path>) -> Result<Mlp> {
    read_weights(BufReader::new(File::open(path)?))
}

pub fn load_expecting(path: impl AsRef<Path>, expected_sizes: &[usize]) -> Result<Mlp> {
    read_weights_expecting(BufReader::new(File::open(path)?), expected_sizes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net() -> Mlp {
        Mlp::init(&[2, 4, 1], &[Activation::Relu, Activation::Sigmoid], 11).unwrap()
    }

    #[test]
    fn header_layout() {
        let bytes = to_bytes(&net());
        assert_eq!(&bytes[..4], b"DGW1");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 4);
        assert_eq!(bytes[16], 3);
        assert_eq!(bytes.len(), encoded_len(&net()));
        assert_eq!(bytes.len(), 8 + 2 * 9 + 17 * 8);
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let original = net();
        let restored = read_weights(to_bytes(&original).as_slice()).unwrap();
        let a: Vec<u64> = original.flatten().iter().map(|v| v.to_bits()).collect();
        let b: Vec<u64> = restored.flatten().iter().map(|v| v.to_bits()).collect();
        assert_eq!(a, b);
        assert_eq!(original, restored);
    }

    #[test]
    fn corrupted_magic() {
        let mut bytes = to_bytes(&net());
        bytes[0] = b'X';
        let err = read_weights(bytes.as_slice()).unwrap_err();
        assert!(matches!(err, Error::Format { offset: 0, .. }), "{err}");
    }

    #[test]
    fn truncation_reports_offset() {
        let bytes = to_bytes(&net());
        let cut = &bytes[..bytes.len() - 3];
        match read_weights(cut).unwrap_err() {
            Error::Format { offset, message } => {
                assert!(message.contains("truncated"));
                assert_eq!(offset, cut.len() as u64);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn expected_dimensions_are_checked() {
        let bytes = to_bytes(&net());
        let err = read_weights_expecting(bytes.as_slice(), &[2, 5, 1]).unwrap_err();
        match err {
            Error::Format { offset, message } => {
                assert!(message.contains("dimension mismatch"));
                // output size of the first layer sits at byte 12
                assert_eq!(offset, 12);
            }
            other => panic!("unexpected {other}"),
        }
        assert!(read_weights_expecting(bytes.as_slice(), &[2, 4, 1]).is_ok());
    }

    #[test]
    fn unknown_activation_tag() {
        let mut bytes = to_bytes(&net());
        bytes[16] = 9;
        assert!(matches!(
            read_weights(bytes.as_slice()),
            Err(Error::Format { offset: 16, .. })
        ));
    }
}

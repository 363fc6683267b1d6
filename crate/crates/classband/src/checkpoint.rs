//! Binary checkpoint framing shared by classifier and decoder models.
//!
//! Layout, little-endian throughout:
//!
//! ```text
//! magic       [u8; 4]      "CPTH" (classifier) or "CPTD" (decoder)
//! version     u32          currently 1
//! layer_index u32          decoder files only: the classifier layer it decodes
//! layer_count u32
//! per layer:
//!   in_dim     u32
//!   out_dim    u32
//!   activation u8          0 = relu, 1 = identity
//!   weights    f64 × (out_dim × in_dim), row-major
//!   bias       f64 × out_dim
//! ```

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::net::{Activation, LayerParams};
use crate::tensor::Tensor;

pub(crate) const MAGIC_CLASSIFIER: [u8; 4] = *b"CPTH";
pub(crate) const MAGIC_DECODER: [u8; 4] = *b"CPTD";
pub(crate) const FORMAT_VERSION: u32 = 1;

const MAX_LAYERS: u32 = 1024;
const MAX_DIM: u32 = 1_000_000;

pub(crate) fn write_checkpoint<W: Write>(
    w: &mut W,
    magic: [u8; 4],
    layer_index: Option<u32>,
    layers: &[LayerParams],
) -> Result<()> {
    w.write_all(&magic)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    if let Some(l) = layer_index {
        w.write_all(&l.to_le_bytes())?;
    }
    w.write_all(&(layers.len() as u32).to_le_bytes())?;
    for layer in layers {
        w.write_all(&(layer.in_dim() as u32).to_le_bytes())?;
        w.write_all(&(layer.out_dim() as u32).to_le_bytes())?;
        let tag: u8 = match layer.activation {
            Activation::Relu => 0,
            Activation::Identity => 1,
        };
        w.write_all(&[tag])?;
        for v in layer.weights.data() {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in layer.bias.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Reader wrapper that tracks the byte offset for error reporting.
struct Cursor<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> Cursor<R> {
    fn new(inner: R) -> Self {
        Self { inner, offset: 0 }
    }

    fn fail(&self, message: impl Into<String>) -> Error {
        Error::Format {
            offset: self.offset,
            message: message.into(),
        }
    }

    fn read_exact(&mut self, buf: &mut [u8], what: &str) -> Result<()> {
        match self.inner.read_exact(buf) {
            Ok(()) => {
                self.offset += buf.len() as u64;
                Ok(())
            }
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => {
                Err(self.fail(format!("truncated while reading {what}")))
            }
            Err(e) => Err(e.into()),
        }
    }

    fn read_u32(&mut self, what: &str) -> Result<u32> {
        let mut buf = [0u8; 4];
        self.read_exact(&mut buf, what)?;
        Ok(u32::from_le_bytes(buf))
    }

    fn read_u8(&mut self, what: &str) -> Result<u8> {
        let mut buf = [0u8; 1];
        self.read_exact(&mut buf, what)?;
        Ok(buf[0])
    }

    fn read_f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(n);
        let mut buf = [0u8; 8];
        for _ in 0..n {
            self.read_exact(&mut buf, what)?;
            out.push(f64::from_le_bytes(buf));
        }
        Ok(out)
    }
}

pub(crate) fn read_checkpoint<R: Read>(
    r: &mut R,
    expected_magic: [u8; 4],
    with_layer_index: bool,
) -> Result<(Option<u32>, Vec<LayerParams>)> {
    let mut c = Cursor::new(r);
    let mut magic = [0u8; 4];
    c.read_exact(&mut magic, "magic")?;
    if magic != expected_magic {
        return Err(Error::Format {
            offset: 0,
            message: format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(&magic),
                String::from_utf8_lossy(&expected_magic)
            ),
        });
    }
    let version = c.read_u32("format version")?;
    if version != FORMAT_VERSION {
        return Err(c.fail(format!(
            "unsupported format version {version}, expected {FORMAT_VERSION}"
        )));
    }
    let layer_index = if with_layer_index {
        Some(c.read_u32("layer index")?)
    } else {
        None
    };
    let count = c.read_u32("layer count")?;
    if count == 0 || count > MAX_LAYERS {
        return Err(c.fail(format!("implausible layer count {count}")));
    }
    let mut layers = Vec::with_capacity(count as usize);
    for k in 0..count {
        let in_dim = c.read_u32("layer in_dim")?;
        let out_dim = c.read_u32("layer out_dim")?;
        if in_dim == 0 || out_dim == 0 || in_dim > MAX_DIM || out_dim > MAX_DIM {
            return Err(c.fail(format!("implausible dims {in_dim}x{out_dim} in layer {k}")));
        }
        let activation = match c.read_u8("activation tag")? {
            0 => Activation::Relu,
            1 => Activation::Identity,
            t => return Err(c.fail(format!("unknown activation tag {t} in layer {k}"))),
        };
        let w = c.read_f64s((in_dim * out_dim) as usize, "layer weights")?;
        let b = c.read_f64s(out_dim as usize, "layer bias")?;
        layers.push(LayerParams::new(
            Tensor::new(vec![out_dim as usize, in_dim as usize], w)?,
            Tensor::vector(b),
            activation,
        )?);
    }
    let mut probe = [0u8; 1];
    if c.inner.read(&mut probe)? != 0 {
        return Err(c.fail("trailing data after last layer"));
    }
    Ok((layer_index, layers))
}

//! Model files: the magic `DNET`, a little-endian `u32` version, a `u32`
//! length-prefixed `key=value` [`ModelSpec`] text, a `u64` parameter count,
//! then every weight and bias tensor as raw little-endian `f32` in
//! declaration order.

use std::fs;
use std::path::Path;

use super::{ModelSpec, Network, Scalar, Tensor};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"DNET";
const VERSION: u32 = 1;

pub fn model_to_bytes<T: Scalar>(net: &Network<T>) -> Vec<u8> {
    let text = net.spec().to_text();
    let mut buf = Vec::with_capacity(20 + text.len() + 4 * net.param_count());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(text.len() as u32).to_le_bytes());
    buf.extend_from_slice(text.as_bytes());
    buf.extend_from_slice(&(net.param_count() as u64).to_le_bytes());
    for p in net.params() {
        for &v in p.data() {
            buf.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
    }
    buf
}

pub fn model_from_bytes<T: Scalar>(bytes: &[u8]) -> Result<Network<T>> {
    let short = || Error::Format("model file truncated".into());
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(Error::Format("not a DNET model file".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::Format(format!("model version {version}, expected {VERSION}")));
    }
    let text_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let text_end = 12 + text_len;
    let text = bytes.get(12..text_end).ok_or_else(short)?;
    let text = std::str::from_utf8(text).map_err(|e| Error::Format(format!("model spec: {e}")))?;
    let spec = ModelSpec::from_text(text)?;
    let count_bytes = bytes.get(text_end..text_end + 8).ok_or_else(short)?;
    let count = u64::from_le_bytes(count_bytes.try_into().unwrap()) as usize;
    if count != spec.param_count() {
        return Err(Error::Format(format!("file holds {count} parameters but its spec needs {}", spec.param_count())));
    }
    let blob = &bytes[text_end + 8..];
    if blob.len() != 4 * count {
        return Err(if blob.len() < 4 * count {
            short()
        } else {
            Error::Format("trailing bytes after weights".into())
        });
    }
    let mut values = blob.chunks_exact(4).map(|c| T::from_f64(f32::from_le_bytes(c.try_into().unwrap()) as f64));
    let params = spec
        .param_shapes()
        .iter()
        .map(|shape| {
            let n = shape.iter().product();
            Tensor::from_vec(shape, values.by_ref().take(n).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Network::from_params(spec, params)
}

pub fn save_model<T: Scalar>(net: &Network<T>, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, model_to_bytes(net))?;
    Ok(())
}

pub fn load_model<T: Scalar>(path: impl AsRef<Path>) -> Result<Network<T>> {
    model_from_bytes(&fs::read(path)?)
}

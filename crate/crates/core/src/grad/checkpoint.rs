//! Binary container for named parameter arrays.
//!
//! Layout, all integers little-endian `u32`:
//!
//! ```text
//! magic    8 bytes  "CLVAEPRM"
//! version  u32      1
//! count    u32      number of arrays
//! repeated count times:
//!   name_len u32, name (UTF-8, name_len bytes)
//!   rows u32, cols u32
//!   rows*cols f64 values, little-endian IEEE-754, row-major
//! ```
//!
//! Values are stored as raw bit patterns, so a round trip is bit-exact.

use std::io::{Read, Write};

use super::graph::ParamStore;
use super::tensor::Tensor;
use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"CLVAEPRM";
pub const VERSION: u32 = 1;

pub fn write_params<W: Write>(store: &ParamStore, mut out: W) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(store.len() as u32).to_le_bytes())?;
    for (name, t) in store.named_values() {
        out.write_all(&(name.len() as u32).to_le_bytes())?;
        out.write_all(name.as_bytes())?;
        out.write_all(&(t.rows() as u32).to_le_bytes())?;
        out.write_all(&(t.cols() as u32).to_le_bytes())?;
        for v in t.data() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u32::from_le_bytes(b))
}

fn truncated(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Format("parameter file truncated".into())
    } else {
        Error::Io(e)
    }
}

/// Reads a container into `(name, tensor)` pairs in file order.
pub fn read_params<R: Read>(mut input: R) -> Result<Vec<(String, Tensor)>> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic).map_err(truncated)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a parameter container (bad magic)".into()));
    }
    let version = read_u32(&mut input)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported parameter container version {version}")));
    }
    let count = read_u32(&mut input)?;
    let mut out = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let len = read_u32(&mut input)? as usize;
        let mut name = vec![0u8; len];
        input.read_exact(&mut name).map_err(truncated)?;
        let name = String::from_utf8(name).map_err(|_| Error::Format("parameter name is not UTF-8".into()))?;
        let rows = read_u32(&mut input)? as usize;
        let cols = read_u32(&mut input)? as usize;
        let mut data = Vec::with_capacity(rows * cols);
        let mut b = [0u8; 8];
        for _ in 0..rows * cols {
            input.read_exact(&mut b).map_err(truncated)?;
            data.push(f64::from_le_bytes(b));
        }
        out.push((name, Tensor::new(rows, cols, data)?));
    }
    Ok(out)
}

/// Loads a container into an existing store, matching arrays by name and shape.
pub fn load_into(store: &mut ParamStore, entries: Vec<(String, Tensor)>) -> Result<()> {
    if entries.len() != store.len() {
        return Err(Error::Format(format!("container holds {} arrays, model expects {}", entries.len(), store.len())));
    }
    for (name, t) in entries {
        let id = store.find(&name).ok_or_else(|| Error::Format(format!("unknown parameter {name}")))?;
        if store.value(id).shape() != t.shape() {
            return Err(Error::Format(format!("shape mismatch for parameter {name}")));
        }
        *store.value_mut(id) = t;
    }
    Ok(())
}

//! Binary parameter files.
//!
//! ```text
//! magic       4 bytes  "SMNN"
//! version     u32
//! input_dim   u32
//! n_hidden    u32, then n_hidden x u32 widths
//! head        u8   (0 scalar, 1 categorical)
//! n_heads     u32  (0 for scalar)
//! n_actions   u32  (0 for scalar)
//! count       u64
//! values      count x f64
//! ```
//! All integers and floats are little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Head, MlpSpec, NnError, ParamVector};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"SMNN";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_params<W: Write>(mut w: W, p: &ParamVector) -> Result<(), NnError> {
    let spec = p.spec();
    w.write_all(&CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(spec.input_dim as u32).to_le_bytes())?;
    w.write_all(&(spec.hidden.len() as u32).to_le_bytes())?;
    for h in &spec.hidden {
        w.write_all(&(*h as u32).to_le_bytes())?;
    }
    let (tag, heads, actions) = match spec.head {
        Head::Scalar => (0u8, 0u32, 0u32),
        Head::Categorical { n_heads, n_actions } => (1, n_heads as u32, n_actions as u32),
    };
    w.write_all(&[tag])?;
    w.write_all(&heads.to_le_bytes())?;
    w.write_all(&actions.to_le_bytes())?;
    w.write_all(&(p.len() as u64).to_le_bytes())?;
    for v in &p.values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, NnError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_params<R: Read>(mut r: R) -> Result<ParamVector, NnError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != CHECKPOINT_MAGIC {
        return Err(NnError::Format("bad magic".into()));
    }
    let version = read_u32(&mut r)?;
    if version != CHECKPOINT_VERSION {
        return Err(NnError::Format(format!("unsupported version {version}")));
    }
    let input_dim = read_u32(&mut r)? as usize;
    let n_hidden = read_u32(&mut r)? as usize;
    if n_hidden > 64 {
        return Err(NnError::Format(format!("implausible layer count {n_hidden}")));
    }
    let hidden = (0..n_hidden).map(|_| read_u32(&mut r).map(|h| h as usize)).collect::<Result<Vec<_>, _>>()?;
    let mut tag = [0u8; 1];
    r.read_exact(&mut tag)?;
    let n_heads = read_u32(&mut r)? as usize;
    let n_actions = read_u32(&mut r)? as usize;
    let head = match tag[0] {
        0 => Head::Scalar,
        1 => Head::Categorical { n_heads, n_actions },
        t => return Err(NnError::Format(format!("unknown head tag {t}"))),
    };
    let spec = MlpSpec { input_dim, hidden, head };
    spec.validate().map_err(|e| NnError::Format(e.to_string()))?;
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let count = u64::from_le_bytes(b8) as usize;
    if count != spec.param_count() {
        return Err(NnError::Format(format!(
            "value count {count} does not match shape ({})",
            spec.param_count()
        )));
    }
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        r.read_exact(&mut b8)?;
        values.push(f64::from_le_bytes(b8));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(NnError::Format("trailing bytes".into()));
    }
    if !values.iter().all(|v| v.is_finite()) {
        return Err(NnError::NonFinite("checkpoint values"));
    }
    ParamVector::from_values(&spec, values)
}

pub fn save_params(path: &Path, p: &ParamVector) -> Result<(), NnError> {
    write_params(BufWriter::new(File::create(path)?), p)
}

pub fn load_params(path: &Path) -> Result<ParamVector, NnError> {
    read_params(BufReader::new(File::open(path)?))
}

//! `SEXP`: raw expanded flag tensors.
//!
//! ```text
//! magic "SEXP" | u32 version | u32 e0, e1, e2 (expanded shape) | e0*e1*e2 flag bytes
//! ```

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use super::{checked_count, create, eof, expect_end, open, read_header, write_header};
use crate::error::{Error, Result};
use crate::tensor::ExpandedTensor;

const MAGIC: &[u8; 4] = b"SEXP";
const FMT: &str = "SEXP";

pub fn write_tensor(w: &mut impl Write, t: &ExpandedTensor) -> Result<()> {
    write_header(w, MAGIC)?;
    for e in t.shape() {
        w.write_u32::<LE>(e as u32)?;
    }
    w.write_all(t.flags())?;
    Ok(())
}

pub fn read_tensor(r: &mut impl Read) -> Result<ExpandedTensor> {
    read_header(r, MAGIC, FMT)?;
    let mut s = [0u32; 3];
    r.read_u32_into::<LE>(&mut s).map_err(|e| eof(e, FMT))?;
    let n = checked_count(s.iter().map(|&x| u64::from(x)).product(), 1 << 36, "flag", FMT)?;
    let mut flags = vec![0u8; n];
    r.read_exact(&mut flags).map_err(|e| eof(e, FMT))?;
    expect_end(r, FMT)?;
    ExpandedTensor::from_raw(s.map(|x| x as usize), flags).map_err(|e| Error::format(FMT, e.to_string()))
}

pub fn write_tensor_file(path: &Path, t: &ExpandedTensor) -> Result<()> {
    let mut w = create(path)?;
    write_tensor(&mut w, t)?;
    Ok(w.flush()?)
}

pub fn read_tensor_file(path: &Path) -> Result<ExpandedTensor> {
    read_tensor(&mut open(path)?)
}

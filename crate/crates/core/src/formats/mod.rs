//! Little-endian binary formats for volumes, tensors, minors, models and
//! predictions. Every file starts with a 4-byte magic and a `u32` version.

pub mod sexp;
pub mod smdl;
pub mod smin;
pub mod sprd;
pub mod svol;

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};

pub const VERSION: u32 = 1;

pub(crate) fn write_header(w: &mut impl Write, magic: &[u8; 4]) -> io::Result<()> {
    w.write_all(magic)?;
    w.write_u32::<LE>(VERSION)
}

pub(crate) fn read_header(r: &mut impl Read, magic: &[u8; 4], format: &'static str) -> Result<()> {
    let mut m = [0u8; 4];
    r.read_exact(&mut m).map_err(|e| eof(e, format))?;
    if &m != magic {
        return Err(Error::format(format, format!("bad magic {m:?}")));
    }
    let v = r.read_u32::<LE>().map_err(|e| eof(e, format))?;
    if v != VERSION {
        return Err(Error::format(format, format!("unsupported version {v}")));
    }
    Ok(())
}

/// Maps truncation to a format error; other I/O errors pass through.
pub(crate) fn eof(e: io::Error, format: &'static str) -> Error {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        Error::format(format, "truncated")
    } else {
        Error::Io(e)
    }
}

pub(crate) fn expect_end(r: &mut impl Read, format: &'static str) -> Result<()> {
    let mut b = [0u8; 1];
    match r.read(&mut b)? {
        0 => Ok(()),
        _ => Err(Error::format(format, "trailing bytes")),
    }
}

pub(crate) fn read_f32s(r: &mut impl Read, n: usize, format: &'static str) -> Result<Vec<f32>> {
    let mut v = vec![0f32; n];
    r.read_f32_into::<LE>(&mut v).map_err(|e| eof(e, format))?;
    Ok(v)
}

pub(crate) fn read_u32s(r: &mut impl Read, n: usize, format: &'static str) -> Result<Vec<u32>> {
    let mut v = vec![0u32; n];
    r.read_u32_into::<LE>(&mut v).map_err(|e| eof(e, format))?;
    Ok(v)
}

pub(crate) fn write_f32s(w: &mut impl Write, v: &[f32]) -> io::Result<()> {
    v.iter().try_for_each(|&x| w.write_f32::<LE>(x))
}

pub(crate) fn write_u32s(w: &mut impl Write, v: &[u32]) -> io::Result<()> {
    v.iter().try_for_each(|&x| w.write_u32::<LE>(x))
}

pub(crate) fn write_str(w: &mut impl Write, s: &str) -> io::Result<()> {
    let len = u16::try_from(s.len()).map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "string too long"))?;
    w.write_u16::<LE>(len)?;
    w.write_all(s.as_bytes())
}

pub(crate) fn read_str(r: &mut impl Read, format: &'static str) -> Result<String> {
    let len = r.read_u16::<LE>().map_err(|e| eof(e, format))? as usize;
    let mut b = vec![0u8; len];
    r.read_exact(&mut b).map_err(|e| eof(e, format))?;
    String::from_utf8(b).map_err(|_| Error::format(format, "string is not UTF-8"))
}

/// Guards allocations driven by header counts against corrupt files.
pub(crate) fn checked_count(n: u64, limit: u64, what: &str, format: &'static str) -> Result<usize> {
    if n > limit {
        return Err(Error::format(format, format!("{what} count {n} exceeds {limit}")));
    }
    Ok(n as usize)
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

pub(crate) fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))
}

//! `SPRD`: one predicted class per supernode.
//!
//! ```text
//! magic "SPRD" | u32 version | u32 n (supernodes) | u32 k (classes) | n u8 classes
//! ```

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use super::{checked_count, create, eof, expect_end, open, read_header, write_header};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"SPRD";
const FMT: &str = "SPRD";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodePredictions {
    pub classes: usize,
    pub labels: Vec<u8>,
}

impl NodePredictions {
    pub fn new(classes: usize, labels: Vec<u8>) -> Result<Self> {
        if !(2..=256).contains(&classes) {
            return Err(Error::InvalidParams(format!("class count {classes} outside 2..=256")));
        }
        if let Some(&c) = labels.iter().find(|&&c| usize::from(c) >= classes) {
            return Err(Error::InvalidParams(format!("class {c} >= {classes}")));
        }
        Ok(Self { classes, labels })
    }
}

pub fn write_predictions(w: &mut impl Write, p: &NodePredictions) -> Result<()> {
    write_header(w, MAGIC)?;
    w.write_u32::<LE>(p.labels.len() as u32)?;
    w.write_u32::<LE>(p.classes as u32)?;
    w.write_all(&p.labels)?;
    Ok(())
}

pub fn read_predictions(r: &mut impl Read) -> Result<NodePredictions> {
    read_header(r, MAGIC, FMT)?;
    let n = checked_count(u64::from(r.read_u32::<LE>().map_err(|e| eof(e, FMT))?), 1 << 32, "node", FMT)?;
    let k = r.read_u32::<LE>().map_err(|e| eof(e, FMT))? as usize;
    let mut labels = vec![0u8; n];
    r.read_exact(&mut labels).map_err(|e| eof(e, FMT))?;
    expect_end(r, FMT)?;
    NodePredictions::new(k, labels).map_err(|e| Error::format(FMT, e.to_string()))
}

pub fn write_predictions_file(path: &Path, p: &NodePredictions) -> Result<()> {
    let mut w = create(path)?;
    write_predictions(&mut w, p)?;
    Ok(w.flush()?)
}

pub fn read_predictions_file(path: &Path) -> Result<NodePredictions> {
    read_predictions(&mut open(path)?)
}

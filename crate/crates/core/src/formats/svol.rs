//! `SVOL`: dense voxel grids.
//!
//! ```text
//! magic "SVOL" | u32 version | u32 h, w, d, c | u8 dtype (0 f32, 1 u8, 2 u16) | h*w*d*c values
//! ```

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use super::{create, eof, expect_end, open, read_f32s, read_header, write_f32s, write_header};
use crate::error::{Error, Result};
use crate::tensor::{LabelMap, Volume, VolumeDims};

const MAGIC: &[u8; 4] = b"SVOL";
const FMT: &str = "SVOL";
const MAX_VALUES: u64 = 1 << 34;

#[derive(Debug, Clone, PartialEq)]
pub enum SvolData {
    F32(Vec<f32>),
    U8(Vec<u8>),
    U16(Vec<u16>),
}

impl SvolData {
    fn dtype(&self) -> u8 {
        match self {
            SvolData::F32(_) => 0,
            SvolData::U8(_) => 1,
            SvolData::U16(_) => 2,
        }
    }

    fn len(&self) -> usize {
        match self {
            SvolData::F32(v) => v.len(),
            SvolData::U8(v) => v.len(),
            SvolData::U16(v) => v.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Svol {
    pub dims: VolumeDims,
    pub data: SvolData,
}

pub fn write_svol(w: &mut impl Write, s: &Svol) -> Result<()> {
    if s.data.len() != s.dims.voxels() * s.dims.c {
        return Err(Error::DimMismatch(format!("{} values for {}", s.data.len(), s.dims)));
    }
    write_header(w, MAGIC)?;
    for x in [s.dims.h, s.dims.w, s.dims.d, s.dims.c] {
        w.write_u32::<LE>(x as u32)?;
    }
    w.write_u8(s.data.dtype())?;
    match &s.data {
        SvolData::F32(v) => write_f32s(w, v)?,
        SvolData::U8(v) => w.write_all(v)?,
        SvolData::U16(v) => v.iter().try_for_each(|&x| w.write_u16::<LE>(x))?,
    }
    Ok(())
}

pub fn read_svol(r: &mut impl Read) -> Result<Svol> {
    read_header(r, MAGIC, FMT)?;
    let mut dim = [0u32; 4];
    r.read_u32_into::<LE>(&mut dim).map_err(|e| eof(e, FMT))?;
    let dims = VolumeDims::new(dim[0] as usize, dim[1] as usize, dim[2] as usize, dim[3] as usize)
        .map_err(|e| Error::format(FMT, e.to_string()))?;
    let n = super::checked_count(dims.voxels() as u64 * dims.c as u64, MAX_VALUES, "value", FMT)?;
    let data = match r.read_u8().map_err(|e| eof(e, FMT))? {
        0 => SvolData::F32(read_f32s(r, n, FMT)?),
        1 => {
            let mut v = vec![0u8; n];
            r.read_exact(&mut v).map_err(|e| eof(e, FMT))?;
            SvolData::U8(v)
        }
        2 => {
            let mut v = vec![0u16; n];
            r.read_u16_into::<LE>(&mut v).map_err(|e| eof(e, FMT))?;
            SvolData::U16(v)
        }
        t => return Err(Error::format(FMT, format!("unknown dtype {t}"))),
    };
    expect_end(r, FMT)?;
    Ok(Svol { dims, data })
}

pub fn volume_to_svol(v: &Volume) -> Svol {
    Svol { dims: v.dims(), data: SvolData::F32(v.data().to_vec()) }
}

/// Any dtype is accepted and widened to `f32`.
pub fn svol_to_volume(s: Svol) -> Result<Volume> {
    let data = match s.data {
        SvolData::F32(v) => v,
        SvolData::U8(v) => v.into_iter().map(f32::from).collect(),
        SvolData::U16(v) => v.into_iter().map(f32::from).collect(),
    };
    Volume::new(s.dims, data)
}

pub fn labels_to_svol(l: &LabelMap) -> Svol {
    Svol { dims: l.dims(), data: SvolData::U16(l.labels().to_vec()) }
}

/// Single-channel `u8` or `u16` grids only.
pub fn svol_to_labels(s: Svol) -> Result<LabelMap> {
    if s.dims.c != 1 {
        return Err(Error::format(FMT, format!("label grid must have one channel, got {}", s.dims.c)));
    }
    let labels = match s.data {
        SvolData::U8(v) => v.into_iter().map(u16::from).collect(),
        SvolData::U16(v) => v,
        SvolData::F32(_) => return Err(Error::format(FMT, "label grid must be u8 or u16")),
    };
    LabelMap::new(s.dims, labels)
}

pub fn write_volume_file(path: &Path, v: &Volume) -> Result<()> {
    let mut w = create(path)?;
    write_svol(&mut w, &volume_to_svol(v))?;
    Ok(w.flush()?)
}

pub fn read_volume_file(path: &Path) -> Result<Volume> {
    svol_to_volume(read_svol(&mut open(path)?)?)
}

pub fn write_labels_file(path: &Path, l: &LabelMap) -> Result<()> {
    let mut w = create(path)?;
    write_svol(&mut w, &labels_to_svol(l))?;
    Ok(w.flush()?)
}

pub fn read_labels_file(path: &Path) -> Result<LabelMap> {
    svol_to_labels(read_svol(&mut open(path)?)?)
}

/// Voxel predictions are stored as `u8`.
pub fn write_prediction_file(path: &Path, l: &LabelMap) -> Result<()> {
    let data = l
        .labels()
        .iter()
        .map(|&x| u8::try_from(x).map_err(|_| Error::format(FMT, format!("class {x} does not fit u8"))))
        .collect::<Result<Vec<u8>>>()?;
    let mut w = create(path)?;
    write_svol(&mut w, &Svol { dims: l.dims(), data: SvolData::U8(data) })?;
    Ok(w.flush()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn round_trip(s: &Svol) -> Svol {
        let mut buf = Vec::new();
        write_svol(&mut buf, s).unwrap();
        read_svol(&mut buf.as_slice()).unwrap()
    }

    #[test]
    fn all_dtypes_round_trip() {
        let dims = VolumeDims::new(2, 3, 1, 2).unwrap();
        let f: Vec<f32> = (0..12).map(|i| i as f32 * 0.37 - 1.0).collect();
        for data in [
            SvolData::F32(f),
            SvolData::U8((0..12).collect()),
            SvolData::U16((0..12).map(|i| i * 1000).collect()),
        ] {
            let s = Svol { dims, data };
            assert_eq!(round_trip(&s), s);
        }
    }

    #[test]
    fn corrupt_input() {
        let dims = VolumeDims::spatial(2, 2, 2).unwrap();
        let s = Svol { dims, data: SvolData::U8(vec![1; 8]) };
        let mut buf = Vec::new();
        write_svol(&mut buf, &s).unwrap();
        assert!(matches!(read_svol(&mut &buf[..buf.len() - 1]), Err(Error::Format { .. })));
        let mut extra = buf.clone();
        extra.push(0);
        assert!(read_svol(&mut extra.as_slice()).is_err());
        let mut magic = buf.clone();
        magic[0] = b'X';
        assert!(read_svol(&mut magic.as_slice()).is_err());
        let mut dtype = buf;
        dtype[24] = 9;
        assert!(read_svol(&mut dtype.as_slice()).is_err());
    }

    #[test]
    fn labels_reject_float_grids() {
        let dims = VolumeDims::spatial(1, 1, 2).unwrap();
        assert!(svol_to_labels(Svol { dims, data: SvolData::F32(vec![0.0, 1.0]) }).is_err());
        let l = svol_to_labels(Svol { dims, data: SvolData::U8(vec![0, 3]) }).unwrap();
        assert_eq!(l.labels(), &[0, 3]);
    }
}

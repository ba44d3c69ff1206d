//! `SMDL`: model checkpoints.
//!
//! ```text
//! magic "SMDL" | u32 version
//! u32 n + n bytes of config JSON
//! u32 node_dim, edge_dim
//! normalizer: node_mean, node_std (node_dim f64 each), edge_mean, edge_std (edge_dim f64 each)
//! u32 tensor count, then per tensor: name (u16 length + UTF-8), u32 rows, u32 cols, rows*cols f32
//! ```
//!
//! Weights are stored as `f32`; trained models are rounded to `f32` before they are
//! returned, so a write/read cycle reproduces them exactly.

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;

use super::{checked_count, create, eof, expect_end, open, read_f32s, read_header, read_str, read_u32s, write_header, write_str};
use crate::error::{Error, Result};
use crate::gnn::{MpnnConfig, MpnnModel, Normalizer};

const MAGIC: &[u8; 4] = b"SMDL";
const FMT: &str = "SMDL";

pub fn write_model(w: &mut impl Write, m: &MpnnModel) -> Result<()> {
    write_header(w, MAGIC)?;
    let cfg = serde_json::to_vec(&m.config)?;
    w.write_u32::<LE>(cfg.len() as u32)?;
    w.write_all(&cfg)?;
    w.write_u32::<LE>(m.node_dim as u32)?;
    w.write_u32::<LE>(m.edge_dim as u32)?;
    let n = &m.normalizer;
    for v in [&n.node_mean, &n.node_std, &n.edge_mean, &n.edge_std] {
        v.iter().try_for_each(|&x| w.write_f64::<LE>(x))?;
    }
    w.write_u32::<LE>(m.params().len() as u32)?;
    for (name, p) in m.param_names().iter().zip(m.params()) {
        write_str(w, name)?;
        w.write_u32::<LE>(p.nrows() as u32)?;
        w.write_u32::<LE>(p.ncols() as u32)?;
        p.iter().try_for_each(|&x| w.write_f32::<LE>(x as f32))?;
    }
    Ok(())
}

pub fn read_model(r: &mut impl Read) -> Result<MpnnModel> {
    read_header(r, MAGIC, FMT)?;
    let len = checked_count(u64::from(r.read_u32::<LE>().map_err(|e| eof(e, FMT))?), 1 << 20, "config byte", FMT)?;
    let mut cfg = vec![0u8; len];
    r.read_exact(&mut cfg).map_err(|e| eof(e, FMT))?;
    let config: MpnnConfig = serde_json::from_slice(&cfg).map_err(|e| Error::format(FMT, format!("config block: {e}")))?;
    let dims = read_u32s(r, 2, FMT)?;
    let (dx, df) = (
        checked_count(u64::from(dims[0]), 1 << 20, "node feature", FMT)?,
        checked_count(u64::from(dims[1]), 1 << 20, "edge feature", FMT)?,
    );
    let mut f64s = |n: usize| -> Result<Vec<f64>> {
        let mut v = vec![0f64; n];
        r.read_f64_into::<LE>(&mut v).map_err(|e| eof(e, FMT))?;
        Ok(v)
    };
    let normalizer = Normalizer { node_mean: f64s(dx)?, node_std: f64s(dx)?, edge_mean: f64s(df)?, edge_std: f64s(df)? };
    let count = r.read_u32::<LE>().map_err(|e| eof(e, FMT))? as usize;
    let names = crate::gnn::param_names(config.layers);
    if count != names.len() {
        return Err(Error::format(FMT, format!("{count} tensors, configuration needs {}", names.len())));
    }
    let mut params = Vec::with_capacity(count);
    for expected in &names {
        let name = read_str(r, FMT)?;
        if &name != expected {
            return Err(Error::format(FMT, format!("tensor `{name}` where `{expected}` was expected")));
        }
        let shape = read_u32s(r, 2, FMT)?;
        let n = checked_count(u64::from(shape[0]) * u64::from(shape[1]), 1 << 30, "weight", FMT)?;
        let data = read_f32s(r, n, FMT)?.into_iter().map(f64::from).collect();
        params.push(
            Array2::from_shape_vec((shape[0] as usize, shape[1] as usize), data)
                .map_err(|e| Error::format(FMT, e.to_string()))?,
        );
    }
    expect_end(r, FMT)?;
    MpnnModel::from_params(config, dx, df, normalizer, params).map_err(|e| Error::format(FMT, e.to_string()))
}

pub fn write_model_file(path: &Path, m: &MpnnModel) -> Result<()> {
    let mut w = create(path)?;
    write_model(&mut w, m)?;
    Ok(w.flush()?)
}

pub fn read_model_file(path: &Path) -> Result<MpnnModel> {
    read_model(&mut open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantized_model_round_trips_exactly() {
        let cfg = MpnnConfig { hidden: 8, layers: 2, ..Default::default() };
        let mut norm = Normalizer::identity(13, 8);
        norm.node_mean[3] = 0.123_456_789;
        norm.edge_std[1] = 7.5;
        let mut m = MpnnModel::new(cfg, 13, 8, norm).unwrap();
        m.quantize();
        let mut buf = Vec::new();
        write_model(&mut buf, &m).unwrap();
        assert_eq!(read_model(&mut buf.as_slice()).unwrap(), m);
        assert!(read_model(&mut &buf[..buf.len() - 2]).is_err());
    }
}

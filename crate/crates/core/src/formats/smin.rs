//! `SMIN`: graph minors.
//!
//! ```text
//! magic "SMIN" | u32 version
//! u32 h, w, d, c | u8 connectivity (6, 18, 26)
//! u32 nodes, edges, d_x, d_f
//! d_x + d_f column names (u16 byte length + UTF-8)
//! nodes x (u32 id, u32 j, k, l, u64 area, u64 boundary_len)
//! X: nodes*d_x f32 | F: edges*d_f f32
//! edges x (u32 u, u32 v)
//! h*w*d u32 membership (0xFFFFFFFF = deleted)
//! ```

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use super::{
    checked_count, create, eof, expect_end, open, read_f32s, read_header, read_str, read_u32s, write_f32s, write_header,
    write_str, write_u32s,
};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::minor::{GraphMinor, Supernode};
use crate::tensor::{Connectivity, VolumeDims};

const MAGIC: &[u8; 4] = b"SMIN";
const FMT: &str = "SMIN";
const LIMIT: u64 = 1 << 32;

pub fn write_minor(w: &mut impl Write, m: &GraphMinor) -> Result<()> {
    write_header(w, MAGIC)?;
    for x in [m.dims.h, m.dims.w, m.dims.d, m.dims.c] {
        w.write_u32::<LE>(x as u32)?;
    }
    w.write_u8(m.connectivity.n() as u8)?;
    for x in [m.nodes.len(), m.edges.len(), m.node_features.cols(), m.edge_features.cols()] {
        w.write_u32::<LE>(x as u32)?;
    }
    for name in m.node_features.names.iter().chain(&m.edge_features.names) {
        write_str(w, name)?;
    }
    for n in &m.nodes {
        w.write_u32::<LE>(n.id)?;
        for x in n.canonical {
            w.write_u32::<LE>(x as u32)?;
        }
        w.write_u64::<LE>(n.area)?;
        w.write_u64::<LE>(n.boundary_len)?;
    }
    write_f32s(w, &m.node_features.data)?;
    write_f32s(w, &m.edge_features.data)?;
    for &(u, v) in &m.edges {
        w.write_u32::<LE>(u)?;
        w.write_u32::<LE>(v)?;
    }
    write_u32s(w, &m.membership)?;
    Ok(())
}

pub fn read_minor(r: &mut impl Read) -> Result<GraphMinor> {
    read_header(r, MAGIC, FMT)?;
    let bad = |e: Error| Error::format(FMT, e.to_string());
    let head = read_u32s(r, 4, FMT)?;
    let dims = VolumeDims::new(head[0] as usize, head[1] as usize, head[2] as usize, head[3] as usize).map_err(bad)?;
    let connectivity = Connectivity::try_from(u32::from(r.read_u8().map_err(|e| eof(e, FMT))?)).map_err(bad)?;
    let counts = read_u32s(r, 4, FMT)?;
    let n = checked_count(u64::from(counts[0]), LIMIT, "node", FMT)?;
    let e = checked_count(u64::from(counts[1]), LIMIT, "edge", FMT)?;
    let (dx, df) = (counts[2] as usize, counts[3] as usize);
    let mut names = (0..dx + df).map(|_| read_str(r, FMT)).collect::<Result<Vec<_>>>()?;
    let edge_names = names.split_off(dx);
    let mut nodes = Vec::with_capacity(n);
    for _ in 0..n {
        let v = read_u32s(r, 4, FMT)?;
        let area = r.read_u64::<LE>().map_err(|e| eof(e, FMT))?;
        let boundary_len = r.read_u64::<LE>().map_err(|e| eof(e, FMT))?;
        nodes.push(Supernode { id: v[0], canonical: [v[1] as usize, v[2] as usize, v[3] as usize], area, boundary_len });
    }
    let x = read_f32s(r, n * dx, FMT)?;
    let f = read_f32s(r, e * df, FMT)?;
    let flat = read_u32s(r, 2 * e, FMT)?;
    let edges = flat.chunks_exact(2).map(|p| (p[0], p[1])).collect();
    let membership = read_u32s(r, dims.voxels(), FMT)?;
    expect_end(r, FMT)?;
    let matrix = |names: Vec<String>, data: Vec<f32>, rows: usize| {
        if names.is_empty() {
            Err(Error::format(FMT, "feature matrix without columns"))
        } else {
            Ok(FeatureMatrix { rows, names, data })
        }
    };
    let minor = GraphMinor {
        dims,
        connectivity,
        nodes,
        edges,
        node_features: matrix(names, x, n)?,
        edge_features: matrix(edge_names, f, e)?,
        membership,
    };
    minor.validate().map_err(bad)?;
    Ok(minor)
}

pub fn write_minor_file(path: &Path, m: &GraphMinor) -> Result<()> {
    let mut w = create(path)?;
    write_minor(&mut w, m)?;
    Ok(w.flush()?)
}

pub fn read_minor_file(path: &Path) -> Result<GraphMinor> {
    read_minor(&mut open(path)?)
}

/// JSON export for inspection (same content as the binary file).
pub fn write_minor_json(path: &Path, m: &GraphMinor) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer(&mut w, m)?;
    Ok(w.flush()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minor::{build_minor, MinorParams};
    use crate::tensor::Volume;

    fn minor() -> GraphMinor {
        let dims = VolumeDims::spatial(5, 4, 6).unwrap();
        let vol = Volume::from_fn(dims, |v| {
            if v == [4, 3, 5] {
                500.0
            } else {
                ((v[0] / 2 + v[1] / 2 + v[2] / 3) % 3) as f32 * 40.0 + v[2] as f32
            }
        })
        .unwrap();
        let p = MinorParams::new(10.0, 200.0).with_area_bounds(2, 1000);
        build_minor(&vol, &p).unwrap().1
    }

    #[test]
    fn binary_round_trip_is_exact() {
        let m = minor();
        assert!(m.num_edges() > 0 && m.deleted_voxels() > 0);
        let mut buf = Vec::new();
        write_minor(&mut buf, &m).unwrap();
        assert_eq!(read_minor(&mut buf.as_slice()).unwrap(), m);
        assert!(read_minor(&mut &buf[..buf.len() - 1]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let m = minor();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        write_minor_json(&p, &m).unwrap();
        let back: GraphMinor = serde_json::from_slice(&std::fs::read(&p).unwrap()).unwrap();
        assert_eq!(back, m);
    }
}

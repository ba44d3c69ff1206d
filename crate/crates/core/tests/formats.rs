mod common;

use std::io::Cursor;

use semir::formats::{sexp, smdl, smin, sprd, svol};
use semir::gnn::{MpnnConfig, MpnnModel, Normalizer};
use semir::{build_minor_with, Connectivity, Exec, LabelMap, Volume, VolumeDims};

fn built(seed: u64) -> (Volume, semir::minor::MinorBuild) {
    let mut r = common::rng(seed);
    let vol = common::random_volume(&mut r, 10);
    let p = common::random_params(&mut r, &vol, Connectivity::Eighteen);
    let b = build_minor_with(&vol, &p, Exec::Sequential).unwrap();
    (vol, b)
}

#[test]
fn volume_and_labels_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let dims = VolumeDims::new(3, 4, 5, 2).unwrap();
    let vol = Volume::new(dims, (0..120).map(|i| i as f32 * 0.25 - 7.0).collect()).unwrap();
    svol::write_volume_file(&tmp.path().join("v.svol"), &vol).unwrap();
    assert_eq!(svol::read_volume_file(&tmp.path().join("v.svol")).unwrap(), vol);

    let lm = LabelMap::from_fn(dims.with_channels(1), |v| (v[0] * 300 + v[2]) as u16).unwrap();
    svol::write_labels_file(&tmp.path().join("l.svol"), &lm).unwrap();
    assert_eq!(svol::read_labels_file(&tmp.path().join("l.svol")).unwrap(), lm);

    let small = LabelMap::from_fn(dims.with_channels(1), |v| (v[1] % 2) as u16).unwrap();
    svol::write_prediction_file(&tmp.path().join("p.svol"), &small).unwrap();
    assert_eq!(svol::read_labels_file(&tmp.path().join("p.svol")).unwrap(), small);
}

#[test]
fn minor_and_tensor_round_trip() {
    for seed in 0..10 {
        let (_, b) = built(seed);
        let mut buf = Vec::new();
        smin::write_minor(&mut buf, &b.minor).unwrap();
        assert_eq!(smin::read_minor(&mut Cursor::new(&buf)).unwrap(), b.minor);
        let mut buf = Vec::new();
        sexp::write_tensor(&mut buf, &b.tensor).unwrap();
        assert_eq!(sexp::read_tensor(&mut Cursor::new(&buf)).unwrap(), b.tensor);
    }
}

#[test]
fn model_round_trip_preserves_predictions() {
    let (_, b) = built(3);
    let g = &b.minor;
    let cfg = MpnnConfig { hidden: 16, ..Default::default() };
    let mut m = MpnnModel::new(cfg, g.node_features.cols(), g.edge_features.cols(), Normalizer::fit(&[g]).unwrap()).unwrap();
    m.quantize();
    let mut buf = Vec::new();
    smdl::write_model(&mut buf, &m).unwrap();
    let back = smdl::read_model(&mut Cursor::new(&buf)).unwrap();
    assert_eq!(back.forward(g).unwrap(), m.forward(g).unwrap());
    let mut again = Vec::new();
    smdl::write_model(&mut again, &back).unwrap();
    assert_eq!(buf, again);
}

#[test]
fn predictions_round_trip() {
    let p = sprd::NodePredictions::new(3, vec![0, 2, 1, 1]).unwrap();
    let mut buf = Vec::new();
    sprd::write_predictions(&mut buf, &p).unwrap();
    assert_eq!(sprd::read_predictions(&mut Cursor::new(&buf)).unwrap(), p);
    assert!(sprd::NodePredictions::new(2, vec![0, 2]).is_err());
}

#[test]
fn corrupt_inputs_are_rejected() {
    let (_, b) = built(1);
    let mut buf = Vec::new();
    smin::write_minor(&mut buf, &b.minor).unwrap();
    for cut in [0, 4, 8, buf.len() / 2, buf.len() - 1] {
        assert!(smin::read_minor(&mut Cursor::new(&buf[..cut])).is_err(), "cut at {cut}");
    }
    let mut bad = buf.clone();
    bad[0] = b'X';
    assert!(smin::read_minor(&mut Cursor::new(&bad)).is_err());
    let mut bad = buf.clone();
    bad[4] = 2;
    assert!(smin::read_minor(&mut Cursor::new(&bad)).is_err());
    let mut long = buf;
    long.push(0);
    assert!(smin::read_minor(&mut Cursor::new(&long)).is_err());
}

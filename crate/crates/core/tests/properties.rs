mod common;

use proptest::prelude::*;
use semir::boundary_opt::{dice, expected_improvement, extract_gt_boundary, extract_minor_boundary, BoundaryMap};
use semir::tensor::ExpandedTensor;
use semir::{build_minor_with, Connectivity, Exec, LabelMap, VolumeDims};

const CONNS: [Connectivity; 3] = [Connectivity::Six, Connectivity::Eighteen, Connectivity::TwentySix];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn minor_invariants(seed in any::<u64>(), conn in 0usize..3) {
        let mut r = common::rng(seed);
        let vol = common::random_volume(&mut r, 12);
        let p = common::random_params(&mut r, &vol, CONNS[conn]);
        let a = build_minor_with(&vol, &p, Exec::Sequential).unwrap();
        let b = build_minor_with(&vol, &p, Exec::Parallel).unwrap();
        prop_assert_eq!(&a.minor, &b.minor);
        prop_assert_eq!(&a.tensor, &b.tensor);
        a.minor.validate().unwrap();
        a.tensor.validate(p.connectivity).unwrap();
        prop_assert_eq!(a.stats.pops, vol.dims().voxels() as u64);
        let area: u64 = a.minor.nodes.iter().map(|n| n.area).sum();
        prop_assert_eq!(area + a.stats.deleted_voxels, vol.dims().voxels() as u64);
        for n in &a.minor.nodes {
            prop_assert!(p.beta_min <= n.area && n.area <= p.beta_max);
        }
        let boundary = extract_minor_boundary(&a.tensor).unwrap();
        let deleted = a.minor.membership.iter().zip(boundary.mask()).any(|(&m, &b)| b && m == semir::minor::DELETED);
        prop_assert!(!deleted);
    }

    #[test]
    fn dice_is_symmetric_and_bounded(bits in proptest::collection::vec(any::<(bool, bool)>(), 27)) {
        let dims = VolumeDims::spatial(3, 3, 3).unwrap();
        let a = BoundaryMap::new(dims, bits.iter().map(|b| b.0).collect()).unwrap();
        let b = BoundaryMap::new(dims, bits.iter().map(|b| b.1).collect()).unwrap();
        let ab = dice(&a, &b).unwrap();
        prop_assert_eq!(ab, dice(&b, &a).unwrap());
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(dice(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn gt_boundary_is_symmetric_across_interfaces(labels in proptest::collection::vec(0u16..3, 64), conn in 0usize..3) {
        let dims = VolumeDims::spatial(4, 4, 4).unwrap();
        let lm = LabelMap::new(dims, labels).unwrap();
        let b = extract_gt_boundary(&lm, CONNS[conn]);
        for v in 0..dims.voxels() {
            for &d in CONNS[conn].offsets() {
                if let Some(q) = dims.offset(dims.coords(v), d) {
                    if lm.labels()[v] != lm.get(q) {
                        prop_assert!(b.mask()[v] && b.get(q));
                    }
                }
            }
        }
    }

    #[test]
    fn ei_is_nonnegative(mean in -10.0f64..10.0, std in 0.0f64..5.0, best in -10.0f64..10.0) {
        let ei = expected_improvement(mean, std, best);
        prop_assert!(ei.is_finite() && ei >= 0.0);
        if std == 0.0 {
            prop_assert_eq!(ei, (best - mean).max(0.0));
        }
    }

    #[test]
    fn edge_midpoints_are_shared(h in 1usize..6, w in 1usize..6, d in 1usize..6, conn in 0usize..3) {
        let dims = VolumeDims::spatial(h, w, d).unwrap();
        let t = ExpandedTensor::new(dims).unwrap();
        for v in 0..dims.voxels() {
            let p = dims.coords(v);
            for &delta in CONNS[conn].offsets() {
                if let Some(q) = dims.offset(p, delta) {
                    let back = delta.map(|x| -x);
                    let e = t.edge_position(p, delta).unwrap().unwrap();
                    prop_assert_eq!(Some(e), t.edge_position(q, back).unwrap());
                    prop_assert!(!ExpandedTensor::is_node_position(e));
                } else {
                    prop_assert_eq!(t.edge_position(p, delta).unwrap(), None);
                }
            }
        }
    }
}

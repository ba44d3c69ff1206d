//! Symmetric 3×3 eigendecomposition for spatial covariances.

use std::f64::consts::PI;

pub type Mat3 = [[f64; 3]; 3];

/// Eigen-pairs of a symmetric 3×3 matrix, eigenvalues sorted descending.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigen3 {
    pub values: [f64; 3],
    /// Unit eigenvector of `values[0]`, sign-normalized so its largest-magnitude
    /// component is positive.
    pub principal: [f64; 3],
}

const DISCRIMINANT_EPS: f64 = 1e-12;

/// Closed-form (trigonometric) eigenvalues with a cross-product eigenvector; falls
/// back to cyclic Jacobi when the spectrum is (nearly) degenerate.
pub fn sym3_eigen(a: &Mat3) -> Eigen3 {
    let p1 = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
    let q = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
    let p2 = (a[0][0] - q).powi(2) + (a[1][1] - q).powi(2) + (a[2][2] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    if p2 < DISCRIMINANT_EPS {
        return jacobi_eigen(a);
    }
    let mut b = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            b[i][j] = (a[i][j] - if i == j { q } else { 0.0 }) / p;
        }
    }
    let r = (det3(&b) / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let l1 = q + 2.0 * p * phi.cos();
    let l3 = q + 2.0 * p * (phi + 2.0 * PI / 3.0).cos();
    let l2 = 3.0 * q - l1 - l3;

    let scale = l1.abs().max(l3.abs()).max(1.0);
    if (l1 - l2) < 1e-9 * scale {
        return jacobi_eigen(a);
    }
    let m = [
        [a[0][0] - l1, a[0][1], a[0][2]],
        [a[1][0], a[1][1] - l1, a[1][2]],
        [a[2][0], a[2][1], a[2][2] - l1],
    ];
    let cands = [cross(m[0], m[1]), cross(m[0], m[2]), cross(m[1], m[2])];
    let best = cands
        .iter()
        .copied()
        .max_by(|x, y| norm2(*x).total_cmp(&norm2(*y)))
        .unwrap_or([0.0; 3]);
    let n = norm2(best).sqrt();
    if n < DISCRIMINANT_EPS * scale * scale {
        return jacobi_eigen(a);
    }
    Eigen3 { values: [l1, l2, l3], principal: sign_normalize(best.map(|x| x / n)) }
}

/// Cyclic Jacobi rotations; slow but unconditionally stable.
pub fn jacobi_eigen(a: &Mat3) -> Eigen3 {
    let mut m = *a;
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for _ in 0..64 {
        let off = m[0][1].powi(2) + m[0][2].powi(2) + m[1][2].powi(2);
        if off < 1e-30 {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if m[p][q].abs() < 1e-300 {
                continue;
            }
            let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            // m <- Jᵀ m J
            for k in 0..3 {
                let mkp = m[k][p];
                let mkq = m[k][q];
                m[k][p] = c * mkp - s * mkq;
                m[k][q] = s * mkp + c * mkq;
            }
            for k in 0..3 {
                let mpk = m[p][k];
                let mqk = m[q][k];
                m[p][k] = c * mpk - s * mqk;
                m[q][k] = s * mpk + c * mqk;
            }
            for row in v.iter_mut() {
                let vkp = row[p];
                let vkq = row[q];
                row[p] = c * vkp - s * vkq;
                row[q] = s * vkp + c * vkq;
            }
        }
    }
    let mut order = [0usize, 1, 2];
    // Stable: equal eigenvalues keep axis order.
    order.sort_by(|&i, &j| m[j][j].total_cmp(&m[i][i]));
    let values = order.map(|i| m[i][i]);
    let col = order[0];
    let principal = [v[0][col], v[1][col], v[2][col]];
    let n = norm2(principal).sqrt();
    Eigen3 { values, principal: sign_normalize(principal.map(|x| x / n)) }
}

fn sign_normalize(v: [f64; 3]) -> [f64; 3] {
    let mut idx = 0;
    for i in 1..3 {
        if v[i].abs() > v[idx].abs() + 1e-12 {
            idx = i;
        }
    }
    if v[idx] < 0.0 {
        v.map(|x| -x)
    } else {
        v
    }
}

fn det3(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn norm2(v: [f64; 3]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix3, SymmetricEigen};
    use proptest::prelude::*;

    fn reference(a: &Mat3) -> ([f64; 3], [f64; 3]) {
        let m = Matrix3::from_fn(|i, j| a[i][j]);
        let e = SymmetricEigen::new(m);
        let mut idx: Vec<usize> = (0..3).collect();
        idx.sort_by(|&i, &j| e.eigenvalues[j].total_cmp(&e.eigenvalues[i]));
        let vals = [e.eigenvalues[idx[0]], e.eigenvalues[idx[1]], e.eigenvalues[idx[2]]];
        let c = e.eigenvectors.column(idx[0]);
        (vals, [c[0], c[1], c[2]])
    }

    #[test]
    fn diagonal_line() {
        let e = sym3_eigen(&[[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 1.25]]);
        assert!((e.values[0] - 1.25).abs() < 1e-12);
        assert!(e.values[1].abs() < 1e-12);
        assert_eq!(e.principal, [0.0, 0.0, 1.0]);
    }

    #[test]
    fn isotropic_and_zero() {
        let e = sym3_eigen(&[[0.25, 0.0, 0.0], [0.0, 0.25, 0.0], [0.0, 0.0, 0.25]]);
        assert_eq!(e.values, [0.25, 0.25, 0.25]);
        assert!((norm2(e.principal) - 1.0).abs() < 1e-12);
        let z = sym3_eigen(&[[0.0; 3]; 3]);
        assert_eq!(z.values, [0.0; 3]);
        assert_eq!(z.principal, [1.0, 0.0, 0.0]);
    }

    proptest! {
        #[test]
        fn matches_reference(diag in proptest::array::uniform3(-5.0f64..5.0), off in proptest::array::uniform3(-3.0f64..3.0)) {
            let a = [[diag[0], off[0], off[1]], [off[0], diag[1], off[2]], [off[1], off[2], diag[2]]];
            let e = sym3_eigen(&a);
            let (vals, vec) = reference(&a);
            for i in 0..3 {
                prop_assert!((e.values[i] - vals[i]).abs() < 1e-8, "{:?} vs {:?}", e.values, vals);
            }
            prop_assert!((norm2(e.principal) - 1.0).abs() < 1e-6);
            if vals[0] - vals[1] > 1e-3 {
                let dot: f64 = (0..3).map(|i| e.principal[i] * vec[i]).sum();
                prop_assert!((dot.abs() - 1.0).abs() < 1e-6);
            }
        }

        #[test]
        fn jacobi_matches_reference(diag in proptest::array::uniform3(-5.0f64..5.0), off in proptest::array::uniform3(-3.0f64..3.0)) {
            let a = [[diag[0], off[0], off[1]], [off[0], diag[1], off[2]], [off[1], off[2], diag[2]]];
            let e = jacobi_eigen(&a);
            let (vals, _) = reference(&a);
            for i in 0..3 {
                prop_assert!((e.values[i] - vals[i]).abs() < 1e-9);
            }
        }
    }
}

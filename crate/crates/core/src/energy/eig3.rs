//! Closed-form 3x3 symmetric eigendecomposition and a rotation-variant SVD.
//!
//! These run on the per-element hot path of every Hessian assembly, so they
//! avoid heap allocation and iteration. The eigensolver follows the standard
//! trigonometric (Cardano) eigenvalue formula with cross-product eigenvector
//! extraction and a 2x2 fallback for close eigenvalue pairs.

use nalgebra::{Matrix3, Vector3};

/// Eigenvalues ascending, eigenvectors as matching columns (orthonormal,
/// right-handed up to column signs).
pub fn eig3_sym(a: &Matrix3<f64>) -> (Vector3<f64>, Matrix3<f64>) {
    let scale = a.abs().max();
    if scale == 0.0 {
        return (Vector3::zeros(), Matrix3::identity());
    }
    let b = a / scale;

    let p1 = b[(0, 1)].powi(2) + b[(0, 2)].powi(2) + b[(1, 2)].powi(2);
    if p1 < 1e-28 {
        // Already diagonal: sort the diagonal.
        let mut pairs = [(b[(0, 0)], 0usize), (b[(1, 1)], 1), (b[(2, 2)], 2)];
        pairs.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
        let mut vecs = Matrix3::zeros();
        let mut vals = Vector3::zeros();
        for (k, (val, idx)) in pairs.iter().enumerate() {
            vals[k] = val * scale;
            vecs[(*idx, k)] = 1.0;
        }
        return (vals, vecs);
    }

    let q = b.trace() / 3.0;
    let p2 = (b[(0, 0)] - q).powi(2) + (b[(1, 1)] - q).powi(2) + (b[(2, 2)] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let c = (b - Matrix3::from_diagonal_element(q)) / p;
    let r = (c.determinant() / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let hi = q + 2.0 * p * phi.cos();
    let lo = q + 2.0 * p * (phi + 2.0 * std::f64::consts::FRAC_PI_3 * 2.0).cos();
    let mid = 3.0 * q - hi - lo;
    let vals = Vector3::new(lo, mid, hi);

    // Nearly spherical: any orthonormal frame works.
    if hi - lo <= 1e-14 * hi.abs().max(lo.abs()).max(1.0) {
        return (vals * scale, Matrix3::identity());
    }

    // Extract the eigenvector of the better-separated extreme eigenvalue
    // first; get the middle one from a 2x2 solve in the complement plane.
    let (v_first, first_is_lo) = if mid - lo >= hi - mid {
        (eigvec_cross(&b, lo), true)
    } else {
        (eigvec_cross(&b, hi), false)
    };
    let (u0, u1) = complement(&v_first);
    let bu0 = b * u0;
    let bu1 = b * u1;
    let m00 = u0.dot(&bu0) - mid;
    let m01 = u0.dot(&bu1);
    let m11 = u1.dot(&bu1) - mid;
    // Null vector of the (singular) 2x2 [[m00, m01], [m01, m11]].
    let v_mid = if m00.hypot(m01) >= m01.hypot(m11) {
        let n = m00.hypot(m01);
        if n > 1e-20 {
            (u0 * m01 - u1 * m00) / n
        } else {
            u0
        }
    } else {
        let n = m01.hypot(m11);
        if n > 1e-20 {
            (u0 * m11 - u1 * m01) / n
        } else {
            u0
        }
    };
    let v_third = v_first.cross(&v_mid);
    let vecs = if first_is_lo {
        Matrix3::from_columns(&[v_first, v_mid, v_third])
    } else {
        Matrix3::from_columns(&[v_third, v_mid, v_first])
    };
    (vals * scale, vecs)
}

/// Eigenvector for eigenvalue `lam` via the largest cross product of rows of
/// (B - lam I). Caller guarantees `lam` is well separated.
fn eigvec_cross(b: &Matrix3<f64>, lam: f64) -> Vector3<f64> {
    let r0 = Vector3::new(b[(0, 0)] - lam, b[(0, 1)], b[(0, 2)]);
    let r1 = Vector3::new(b[(0, 1)], b[(1, 1)] - lam, b[(1, 2)]);
    let r2 = Vector3::new(b[(0, 2)], b[(1, 2)], b[(2, 2)] - lam);
    let c01 = r0.cross(&r1);
    let c02 = r0.cross(&r2);
    let c12 = r1.cross(&r2);
    let (n01, n02, n12) = (c01.norm_squared(), c02.norm_squared(), c12.norm_squared());
    let best = if n01 >= n02 && n01 >= n12 {
        c01
    } else if n02 >= n12 {
        c02
    } else {
        c12
    };
    let n = best.norm();
    if n > 1e-20 {
        best / n
    } else {
        Vector3::x()
    }
}

/// Orthonormal pair spanning the plane perpendicular to unit vector `w`.
fn complement(w: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let u = if w.x.abs() > w.z.abs() {
        Vector3::new(-w.y, w.x, 0.0) / w.x.hypot(w.y)
    } else {
        Vector3::new(0.0, -w.z, w.y) / w.y.hypot(w.z)
    };
    (u, w.cross(&u))
}

/// Rotation-variant SVD of a 3x3: `f = r * diag(sigma) * v^T` with
/// `r`, `v` proper rotations and the sign of a reflection carried by the
/// smallest singular value (`sigma[2]` may be negative for inverted inputs).
/// Singular values are ordered by decreasing magnitude.
pub fn svd3_rotation_variant(f: &Matrix3<f64>) -> (Matrix3<f64>, Vector3<f64>, Matrix3<f64>) {
    let scale = f.abs().max();
    if scale == 0.0 {
        return (Matrix3::identity(), Vector3::zeros(), Matrix3::identity());
    }
    let fs = f / scale;
    let c = fs.transpose() * fs;
    let (w, mut v) = eig3_sym(&c);
    // Reorder descending and keep det(v) = +1.
    let mut cols = [v.column(2).into_owned(), v.column(1).into_owned(), v.column(0).into_owned()];
    let w_desc = Vector3::new(w[2].max(0.0), w[1].max(0.0), w[0].max(0.0));
    if Matrix3::from_columns(&cols).determinant() < 0.0 {
        cols[2] = -cols[2];
    }
    v = Matrix3::from_columns(&cols);

    let a = fs * v;
    let sig0 = w_desc[0].sqrt();
    let r0 = if sig0 > 1e-20 {
        a.column(0).into_owned() / a.column(0).norm().max(1e-300)
    } else {
        Vector3::x()
    };
    let a1 = a.column(1).into_owned();
    let a1_perp = a1 - r0 * r0.dot(&a1);
    let r1 = if a1_perp.norm() > 1e-14 * sig0.max(1e-14) {
        a1_perp.normalize()
    } else {
        complement(&r0).0
    };
    let r2 = r0.cross(&r1);
    let r = Matrix3::from_columns(&[r0, r1, r2]);
    // Signed singular values recovered by projection; only the last can be
    // negative because r is forced right-handed.
    let sigma = Vector3::new(
        r0.dot(&a.column(0).into_owned()),
        r1.dot(&a1),
        r2.dot(&a.column(2).into_owned()),
    ) * scale;
    (r, sigma, v)
}

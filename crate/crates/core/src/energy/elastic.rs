//! Stable Neo-Hookean constitutive model on linear tetrahedra.
//!
//! Energy density: psi(F) = mu/2 (tr(F^T F) - 3) - mu (J - 1) + lambda/2 (J - 1)^2
//! with J = det F. The density stays finite for inverted elements because the
//! volume term enters through the cofactor matrix, which is polynomial in F.
//!
//! The per-element Hessian is assembled from the closed-form eigensystem of
//! d2psi/dF2 in the SVD frame of F: six twist/flip modes with eigenvalues
//! mu -+ c sigma_k plus a 3x3 scaling block. Clamping those eigenvalues at
//! zero yields the positive-semidefinite projection used by Newton.

use nalgebra::{Matrix3, SMatrix, Vector3};

use super::eig3::{eig3_sym, svd3_rotation_variant};
use crate::geometry::TetMesh;

/// How the per-element elastic Hessian is conditioned for Newton.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HessianProjection {
    /// Exact (indefinite) element Hessian.
    None,
    /// Eigenvalue clamping of the 9x9 density Hessian in the SVD frame of F.
    #[default]
    AnalyticFrame,
    /// Numeric eigendecomposition of the assembled 12x12 element block with
    /// negative eigenvalues clamped. Slow; kept as a cross-check.
    Spectral12,
}

pub fn psi(f: &Matrix3<f64>, mu: f64, lambda: f64) -> f64 {
    let ic = f.norm_squared();
    let j = f.determinant();
    0.5 * mu * (ic - 3.0) - mu * (j - 1.0) + 0.5 * lambda * (j - 1.0) * (j - 1.0)
}

/// Cofactor matrix: dJ/dF, polynomial in F.
pub fn cofactor(f: &Matrix3<f64>) -> Matrix3<f64> {
    let c0 = f.column(1).cross(&f.column(2));
    let c1 = f.column(2).cross(&f.column(0));
    let c2 = f.column(0).cross(&f.column(1));
    Matrix3::from_columns(&[c0, c1, c2])
}

/// First Piola-Kirchhoff stress dpsi/dF.
pub fn pk1(f: &Matrix3<f64>, mu: f64, lambda: f64) -> Matrix3<f64> {
    let j = f.determinant();
    let g = cofactor(f);
    f * mu + g * (lambda * (j - 1.0) - mu)
}

/// Deformation gradient of element `e` under displacement slice accessor.
pub fn deformation_gradient(
    mesh: &TetMesh,
    e: usize,
    node_u: impl Fn(usize) -> Vector3<f64>,
) -> Matrix3<f64> {
    let t = &mesh.tets[e];
    let d0 = mesh.nodes[t[0]] + node_u(t[0]);
    let ds = Matrix3::from_columns(&[
        mesh.nodes[t[1]] + node_u(t[1]) - d0,
        mesh.nodes[t[2]] + node_u(t[2]) - d0,
        mesh.nodes[t[3]] + node_u(t[3]) - d0,
    ]);
    ds * mesh.rest_inverse[e]
}

/// Per-node energy gradient of `vol * psi(F)` for one element, as four
/// 3-vectors in tet-local node order.
pub fn element_gradient(
    f: &Matrix3<f64>,
    rest_inverse: &Matrix3<f64>,
    vol: f64,
    mu: f64,
    lambda: f64,
) -> [Vector3<f64>; 4] {
    let dpsi_dds = pk1(f, mu, lambda) * rest_inverse.transpose() * vol;
    let g1 = dpsi_dds.column(0).into_owned();
    let g2 = dpsi_dds.column(1).into_owned();
    let g3 = dpsi_dds.column(2).into_owned();
    [-(g1 + g2 + g3), g1, g2, g3]
}

/// Shape-function gradient rows: node k's contribution to F is
/// `du_k (x) b_k` with b_1..b_3 the rows of the rest inverse and
/// b_0 = -(b_1 + b_2 + b_3).
fn shape_rows(rest_inverse: &Matrix3<f64>) -> [Vector3<f64>; 4] {
    let b1 = rest_inverse.row(0).transpose();
    let b2 = rest_inverse.row(1).transpose();
    let b3 = rest_inverse.row(2).transpose();
    [-(b1 + b2 + b3), b1, b2, b3]
}

/// 12x12 element Hessian of `vol * psi(F)`, optionally PSD-projected.
///
/// The nine eigenmodes of d2psi/dF2 are exact, so `HessianProjection::None`
/// reproduces the analytic Hessian and the clamped variants differ from it
/// only in the negative part of the spectrum.
pub fn element_hessian(
    f: &Matrix3<f64>,
    rest_inverse: &Matrix3<f64>,
    vol: f64,
    mu: f64,
    lambda: f64,
    projection: HessianProjection,
) -> SMatrix<f64, 12, 12> {
    let clamp = !matches!(projection, HessianProjection::None);
    let mut h = assemble_from_modes(f, rest_inverse, vol, mu, lambda, clamp && matches!(projection, HessianProjection::AnalyticFrame));
    if matches!(projection, HessianProjection::Spectral12) {
        h = spectral_clamp_12(&h);
    }
    h
}

fn assemble_from_modes(
    f: &Matrix3<f64>,
    rest_inverse: &Matrix3<f64>,
    vol: f64,
    mu: f64,
    lambda: f64,
    clamp: bool,
) -> SMatrix<f64, 12, 12> {
    let (r, sigma, v) = svd3_rotation_variant(f);
    let j = sigma[0] * sigma[1] * sigma[2];
    let c = lambda * (j - 1.0) - mu;

    // (eigenvalue, mode matrix in the SVD frame) for the six rotation modes.
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let mut modes: [(f64, Matrix3<f64>); 9] = [(0.0, Matrix3::zeros()); 9];
    let pairs = [(0usize, 1usize, 2usize), (0, 2, 1), (1, 2, 0)];
    for (m, &(i, jj, k)) in pairs.iter().enumerate() {
        let mut twist = Matrix3::zeros();
        twist[(i, jj)] = inv_sqrt2;
        twist[(jj, i)] = -inv_sqrt2;
        let mut flip = Matrix3::zeros();
        flip[(i, jj)] = inv_sqrt2;
        flip[(jj, i)] = inv_sqrt2;
        modes[2 * m] = (mu + c * sigma[k], twist);
        modes[2 * m + 1] = (mu - c * sigma[k], flip);
    }
    // Scaling block: mu I + lambda ghat ghat^T + c * offdiag(sigma).
    let ghat = Vector3::new(sigma[1] * sigma[2], sigma[0] * sigma[2], sigma[0] * sigma[1]);
    let mut s = Matrix3::from_diagonal_element(mu) + ghat * ghat.transpose() * lambda;
    s[(0, 1)] += c * sigma[2];
    s[(1, 0)] += c * sigma[2];
    s[(0, 2)] += c * sigma[1];
    s[(2, 0)] += c * sigma[1];
    s[(1, 2)] += c * sigma[0];
    s[(2, 1)] += c * sigma[0];
    let (svals, svecs) = eig3_sym(&s);
    for k in 0..3 {
        let w = svecs.column(k);
        modes[6 + k] = (
            svals[k],
            Matrix3::from_diagonal(&Vector3::new(w[0], w[1], w[2])),
        );
    }

    let b = shape_rows(rest_inverse);
    let mut h = SMatrix::<f64, 12, 12>::zeros();
    for (lam, frame_mode) in modes {
        let lam = if clamp { lam.max(0.0) } else { lam };
        if lam == 0.0 {
            continue;
        }
        let q = r * frame_mode * v.transpose();
        // w[3k + a] = (q b_k)_a maps the 9-space mode into element DOFs.
        let mut wvec = SMatrix::<f64, 12, 1>::zeros();
        for k in 0..4 {
            let qb = q * b[k];
            wvec[3 * k] = qb.x;
            wvec[3 * k + 1] = qb.y;
            wvec[3 * k + 2] = qb.z;
        }
        h.syger(vol * lam, &wvec, &wvec, 1.0);
    }
    // syger fills the lower triangle; mirror it.
    for i in 0..12 {
        for jj in (i + 1)..12 {
            h[(i, jj)] = h[(jj, i)];
        }
    }
    h
}

fn spectral_clamp_12(h: &SMatrix<f64, 12, 12>) -> SMatrix<f64, 12, 12> {
    let mut eig = nalgebra::linalg::SymmetricEigen::new(*h);
    for v in eig.eigenvalues.iter_mut() {
        *v = v.max(0.0);
    }
    eig.recompose()
}

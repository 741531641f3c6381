//! Basis machinery: PCA extraction, the history least-squares basis, and
//! Grassmann geodesic interpolation between subspaces.
//!
//! Subspaces are the contract throughout this module: column signs and
//! orderings follow fixed conventions purely for reproducibility.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::snapshot::SnapshotSet;

/// A 3n x r column basis. `orthonormal` records whether columns are
/// orthonormal by construction.
#[derive(Debug, Clone)]
pub struct Basis {
    pub matrix: DMatrix<f64>,
    pub orthonormal: bool,
}

impl Basis {
    /// Validating constructor: checks full column rank and, when claimed,
    /// orthonormality to 1e-10.
    pub fn new(matrix: DMatrix<f64>, orthonormal: bool) -> Result<Self> {
        let basis = Basis { matrix, orthonormal };
        if orthonormal {
            let defect = basis.orthonormality_defect();
            if defect >= 1e-10 {
                return Err(Error::RankDeficient(format!(
                    "claimed orthonormal basis has defect {defect:.3e}"
                )));
            }
        }
        let (sig_max, sig_min) = basis.extreme_singular_values();
        if sig_min <= 1e-12 * sig_max {
            return Err(Error::RankDeficient(format!(
                "basis is rank deficient: sigma_min/sigma_max = {:.3e}",
                sig_min / sig_max.max(f64::MIN_POSITIVE)
            )));
        }
        Ok(basis)
    }

    pub fn rank(&self) -> usize {
        self.matrix.ncols()
    }

    /// Max-norm of `U^T U - I`.
    pub fn orthonormality_defect(&self) -> f64 {
        let gram = self.matrix.transpose() * &self.matrix;
        let mut defect = 0.0f64;
        for i in 0..gram.nrows() {
            for j in 0..gram.ncols() {
                let target = if i == j { 1.0 } else { 0.0 };
                defect = defect.max((gram[(i, j)] - target).abs());
            }
        }
        defect
    }

    pub fn extreme_singular_values(&self) -> (f64, f64) {
        let sv = self.matrix.clone().singular_values();
        let max = sv.iter().cloned().fold(0.0f64, f64::max);
        let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        (max, min)
    }

    pub fn condition_number(&self) -> f64 {
        let (max, min) = self.extreme_singular_values();
        max / min.max(f64::MIN_POSITIVE)
    }
}

/// Thin QR with deterministic signs (diagonal of R made non-negative).
/// Returns the thin Q and the number of numerically independent columns.
pub fn thin_qr_signed(m: &DMatrix<f64>) -> (DMatrix<f64>, usize) {
    let qr = m.clone().qr();
    let mut q = qr.q();
    let r = qr.r();
    let rdim = q.ncols();
    let mut max_diag = 0.0f64;
    for k in 0..rdim {
        max_diag = max_diag.max(r[(k, k)].abs());
    }
    let mut rank = 0;
    for k in 0..rdim {
        if r[(k, k)].abs() > 1e-12 * max_diag.max(f64::MIN_POSITIVE) {
            rank += 1;
        }
        if r[(k, k)] < 0.0 {
            q.column_mut(k).neg_mut();
        }
    }
    (q, rank)
}

/// Orthonormalizes `m`, requiring full column rank.
pub fn orthonormalize(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (q, rank) = thin_qr_signed(m);
    if rank < m.ncols() {
        return Err(Error::RankDeficient(format!(
            "matrix has numerical rank {rank} < {} columns",
            m.ncols()
        )));
    }
    Ok(q)
}

/// Mean-centered thin SVD of the snapshot columns: returns the top-`r` left
/// singular vectors (orthonormal, deterministic signs) and the mean.
///
/// Errors when `r` exceeds the numerical rank (singular values below
/// 1e-12 of the largest), naming the achievable rank.
pub fn pca_basis(data: &SnapshotSet, r: usize) -> Result<(Basis, DVector<f64>)> {
    if r == 0 {
        return Err(Error::Config("PCA rank must be at least 1".into()));
    }
    if data.count() < r {
        return Err(Error::RankExceeded {
            requested: r,
            achievable: data.count(),
        });
    }
    let (vectors, sigmas, mean) = pca_full(data);
    let achievable = numerical_rank(&sigmas);
    if r > achievable {
        return Err(Error::RankExceeded {
            requested: r,
            achievable,
        });
    }
    let mut basis = vectors.columns(0, r).into_owned();
    fix_column_signs(&mut basis);
    Ok((
        Basis {
            matrix: basis,
            orthonormal: true,
        },
        mean,
    ))
}

/// All left singular vectors and singular values of the centered snapshot
/// matrix (descending), plus the mean column.
pub fn pca_full(data: &SnapshotSet) -> (DMatrix<f64>, Vec<f64>, DVector<f64>) {
    let m = data.as_matrix();
    let mean = if data.count() > 0 {
        let mut mu = DVector::zeros(m.nrows());
        for j in 0..m.ncols() {
            mu += m.column(j);
        }
        mu / data.count() as f64
    } else {
        DVector::zeros(m.nrows())
    };
    let mut centered = m;
    for j in 0..centered.ncols() {
        let mut col = centered.column_mut(j);
        col -= &mean;
    }
    let svd = centered.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let sigmas: Vec<f64> = svd.singular_values.iter().cloned().collect();
    (u, sigmas, mean)
}

/// Count of singular values above 1e-12 of the largest.
pub fn numerical_rank(sigmas: &[f64]) -> usize {
    let max = sigmas.iter().cloned().fold(0.0f64, f64::max);
    if max == 0.0 {
        return 0;
    }
    sigmas.iter().filter(|&&s| s > 1e-12 * max).count()
}

/// Deterministic sign convention: the largest-magnitude entry of each column
/// (first occurrence) is made positive.
pub fn fix_column_signs(m: &mut DMatrix<f64>) {
    for j in 0..m.ncols() {
        let col = m.column(j);
        let mut best = 0usize;
        let mut best_abs = 0.0f64;
        for (i, &v) in col.iter().enumerate() {
            if v.abs() > best_abs {
                best_abs = v.abs();
                best = i;
            }
        }
        if m[(best, j)] < 0.0 {
            m.column_mut(j).neg_mut();
        }
    }
}

/// Sliding window of the last `m` accepted steps: latent codes paired with
/// full displacements, pushed and evicted in lockstep.
#[derive(Debug, Clone)]
pub struct HistoryWindow {
    capacity: usize,
    entries: VecDeque<(DVector<f64>, DVector<f64>)>,
}

impl HistoryWindow {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "history window needs capacity >= 1");
        HistoryWindow {
            capacity,
            entries: VecDeque::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn occupancy(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, latent: DVector<f64>, displacement: DVector<f64>) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back((latent, displacement));
    }

    /// Replaces the newest entry (used when realigning to a reference
    /// trajectory); pushes when empty.
    pub fn replace_last(&mut self, latent: DVector<f64>, displacement: DVector<f64>) {
        self.entries.pop_back();
        self.entries.push_back((latent, displacement));
    }

    pub fn newest(&self) -> Option<&(DVector<f64>, DVector<f64>)> {
        self.entries.back()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    /// Latent matrix P (r x occupancy) and displacement matrix D
    /// (3n x occupancy), columns ordered oldest to newest.
    pub fn matrices(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let occ = self.entries.len();
        assert!(occ > 0, "empty history window has no matrices");
        let r = self.entries[0].0.len();
        let dofs = self.entries[0].1.len();
        let mut p = DMatrix::zeros(r, occ);
        let mut d = DMatrix::zeros(dofs, occ);
        for (k, (lat, disp)) in self.entries.iter().enumerate() {
            p.column_mut(k).copy_from(lat);
            d.column_mut(k).copy_from(disp);
        }
        (p, d)
    }
}

/// History least-squares basis: Phi = D P^T (P P^T + reg I)^{-1} via a
/// symmetric positive-definite solve. Cost O(n m r + r^3).
pub fn history_basis(window: &HistoryWindow, regularization: f64) -> Result<DMatrix<f64>> {
    if window.is_empty() {
        return Err(Error::RankDeficient(
            "history window is empty; no basis to fit".into(),
        ));
    }
    if regularization <= 0.0 {
        return Err(Error::Config(format!(
            "regularization must be positive, got {regularization}"
        )));
    }
    let (p, d) = window.matrices();
    let r = p.nrows();
    let mut gram = &p * p.transpose();
    for k in 0..r {
        gram[(k, k)] += regularization;
    }
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Solver("regularized Gram matrix not SPD".into()))?;
    // Phi^T = (P P^T + reg I)^{-1} (D P^T)^T.
    let dpt = &d * p.transpose();
    let phi_t = chol.solve(&dpt.transpose());
    Ok(phi_t.transpose())
}

/// Principal angles (radians, ascending) between the column spans of `a`
/// and `b`: arccos of the singular values of Q_a^T Q_b, clamped to [0, 1].
pub fn principal_angles(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Vec<f64>> {
    if a.nrows() != b.nrows() || a.ncols() != b.ncols() {
        return Err(Error::Dimension {
            expected: a.nrows() * a.ncols(),
            got: b.nrows() * b.ncols(),
            context: "principal angles need equal shapes".into(),
        });
    }
    let qa = orthonormalize(a)?;
    let qb = orthonormalize(b)?;
    let m = qa.transpose() * qb;
    let sv = m.singular_values();
    let mut angles: Vec<f64> = sv.iter().map(|&s| s.clamp(0.0, 1.0).acos()).collect();
    angles.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(angles)
}

/// Grassmann geodesic interpolation between the spans of `phi` (lambda = 0)
/// and `u` (lambda = 1).
///
/// Thin QR of both inputs, SVD of Q_phi^T Q_u = V cos(Theta) W^T with
/// singular values clamped to [0, 1], then the per-angle blend
///
/// `G = Q_phi V diag(cos(lambda theta_i))
///      + (Q_u W - Q_phi V diag(cos theta_i)) diag(s_i)`
///
/// with `s_i = sin(lambda theta_i) / sin(theta_i)`, replaced by its limit
/// `s_i = lambda` for angles below 1e-8 (shared directions make the literal
/// `(sin Theta)^{-1}` divide by zero). A final thin QR re-orthonormalizes.
pub fn grassmann_interpolate(
    phi: &DMatrix<f64>,
    u: &DMatrix<f64>,
    lambda: f64,
) -> Result<Basis> {
    if phi.nrows() != u.nrows() || phi.ncols() != u.ncols() {
        return Err(Error::Dimension {
            expected: phi.nrows() * phi.ncols(),
            got: u.nrows() * u.ncols(),
            context: "grassmann interpolation needs equal shapes".into(),
        });
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Config(format!(
            "interpolation parameter must lie in [0, 1], got {lambda}"
        )));
    }
    let q_phi = orthonormalize(phi)?;
    let q_u = orthonormalize(u)?;
    let r = q_phi.ncols();

    let m = q_phi.transpose() * &q_u;
    let svd = m.svd(true, true);
    let v = svd.u.expect("svd u");
    let w_t = svd.v_t.expect("svd v_t");

    let mut cos_lt = DVector::zeros(r);
    let mut cos_t = DVector::zeros(r);
    let mut s = DVector::zeros(r);
    for k in 0..r {
        let theta = svd.singular_values[k].clamp(0.0, 1.0).acos();
        cos_t[k] = theta.cos();
        cos_lt[k] = (lambda * theta).cos();
        s[k] = if theta < 1e-8 {
            lambda
        } else {
            (lambda * theta).sin() / theta.sin()
        };
    }

    let qphi_v = &q_phi * &v;
    let qu_w = &q_u * w_t.transpose();
    let mut g = DMatrix::zeros(phi.nrows(), r);
    for k in 0..r {
        let blended = qphi_v.column(k) * cos_lt[k]
            + (qu_w.column(k) - qphi_v.column(k) * cos_t[k]) * s[k];
        g.column_mut(k).copy_from(&blended);
    }
    let q_out = orthonormalize(&g)?;
    Ok(Basis {
        matrix: q_out,
        orthonormal: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    fn snapshots_from(m: &DMatrix<f64>) -> SnapshotSet {
        assert_eq!(m.nrows() % 3, 0, "snapshot columns are 3n-vectors");
        let mut set = SnapshotSet::new(m.nrows() / 3);
        for j in 0..m.ncols() {
            set.push(m.column(j).into_owned(), "t", j).unwrap();
        }
        set
    }

    #[test]
    fn pca_exact_on_low_rank_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (rows, r) = (30, 3);
        let factors = random_matrix(&mut rng, rows, r);
        let offset = random_matrix(&mut rng, rows, 1);
        let mut data = DMatrix::zeros(rows, 12);
        for j in 0..12 {
            let coeffs = random_matrix(&mut rng, r, 1);
            data.column_mut(j).copy_from(&(&factors * coeffs + &offset));
        }
        let set = snapshots_from(&data);
        let (basis, mean) = pca_basis(&set, r).unwrap();
        assert!(basis.orthonormality_defect() < 1e-10);
        for j in 0..12 {
            let centered = data.column(j) - &mean;
            let resid = &centered - &basis.matrix * (basis.matrix.transpose() * &centered);
            assert!(resid.norm() < 1e-10 * centered.norm().max(1.0));
        }
    }

    #[test]
    fn pca_rank_one_recovers_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let w = random_matrix(&mut rng, 15, 1);
        let mut data = DMatrix::zeros(15, 8);
        for j in 0..8 {
            let c: f64 = rng.random_range(-3.0..3.0);
            data.column_mut(j).copy_from(&(&w * c));
        }
        let set = snapshots_from(&data);
        let (basis, _) = pca_basis(&set, 1).unwrap();
        let dir = w.normalize();
        let dot = basis.matrix.column(0).dot(&dir.column(0)).abs();
        assert_relative_eq!(dot, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn pca_variance_matches_dense_svd_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let data = random_matrix(&mut rng, 21, 6);
        let set = snapshots_from(&data);
        let (_, sigmas, mean) = pca_full(&set);
        // Independent oracle: dense SVD via nalgebra on explicitly centered data.
        let mut centered = data.clone();
        for j in 0..centered.ncols() {
            let mut c = centered.column_mut(j);
            c -= &mean;
        }
        let oracle = centered.svd(false, false);
        let top3: f64 = sigmas.iter().take(3).map(|s| s * s).sum();
        let oracle3: f64 = oracle.singular_values.iter().take(3).map(|s| s * s).sum();
        assert_relative_eq!(top3, oracle3, max_relative = 1e-10);
    }

    #[test]
    fn pca_rank_exceeded_names_achievable() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let w = random_matrix(&mut rng, 9, 2);
        let mut data = DMatrix::zeros(9, 6);
        for j in 0..6 {
            let c = random_matrix(&mut rng, 2, 1);
            data.column_mut(j).copy_from(&(&w * c));
        }
        let set = snapshots_from(&data);
        match pca_basis(&set, 5) {
            Err(Error::RankExceeded { requested, achievable }) => {
                assert_eq!(requested, 5);
                assert!(achievable <= 2, "centered columns stay inside the rank-2 span");
            }
            other => panic!("expected RankExceeded, got {other:?}"),
        }
    }

    #[test]
    fn history_window_evicts_in_lockstep() {
        let mut w = HistoryWindow::new(3);
        for k in 0..5 {
            w.push(
                DVector::from_element(2, k as f64),
                DVector::from_element(6, 10.0 + k as f64),
            );
        }
        assert_eq!(w.occupancy(), 3);
        let (p, d) = w.matrices();
        assert_eq!(p[(0, 0)], 2.0); // oldest surviving entry
        assert_eq!(p[(0, 2)], 4.0); // newest
        assert_eq!(d[(0, 2)], 14.0);
        w.replace_last(DVector::from_element(2, 99.0), DVector::from_element(6, 99.0));
        assert_eq!(w.occupancy(), 3);
        assert_eq!(w.newest().unwrap().0[0], 99.0);
    }

    #[test]
    fn history_basis_single_column_matches_scalar_formula() {
        // m = 1: Phi = u p^T / (||p||^2 + reg).
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = random_matrix(&mut rng, 4, 1).column(0).into_owned();
        let u = random_matrix(&mut rng, 18, 1).column(0).into_owned();
        let reg = 1e-6;
        let mut w = HistoryWindow::new(1);
        w.push(p.clone(), u.clone());
        let phi = history_basis(&w, reg).unwrap();
        let expected = &u * p.transpose() / (p.norm_squared() + reg);
        assert!((&phi - &expected).abs().max() < 1e-12 * expected.abs().max());
    }

    #[test]
    fn history_basis_recovers_consistent_system() {
        // D = Phi0 P with rank(P) = r: tiny regularization recovers Phi0.
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let (dofs, r, m) = (24, 3, 8);
        let phi0 = random_matrix(&mut rng, dofs, r);
        let mut w = HistoryWindow::new(m);
        for _ in 0..m {
            let p = random_matrix(&mut rng, r, 1).column(0).into_owned();
            let d = &phi0 * &p;
            w.push(p, d);
        }
        let phi = history_basis(&w, 1e-12).unwrap();
        let rel = (&phi - &phi0).norm() / phi0.norm();
        assert!(rel < 1e-6, "relative recovery error {rel:.3e}");
    }

    #[test]
    fn history_basis_matches_ridge_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let (dofs, r, m) = (15, 4, 6);
            let mut w = HistoryWindow::new(m);
            for _ in 0..m {
                w.push(
                    random_matrix(&mut rng, r, 1).column(0).into_owned(),
                    random_matrix(&mut rng, dofs, 1).column(0).into_owned(),
                );
            }
            let reg = 1e-8;
            let phi = history_basis(&w, reg).unwrap();
            // Oracle: explicit inverse of the ridge normal equations.
            let (p, d) = w.matrices();
            let gram = &p * p.transpose() + DMatrix::identity(r, r) * reg;
            let oracle = &d * p.transpose() * gram.try_inverse().unwrap();
            let rel = (&phi - &oracle).norm() / oracle.norm();
            assert!(rel < 1e-8, "relative error vs oracle {rel:.3e}");
        }
    }

    #[test]
    fn principal_angles_basic_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let a = random_matrix(&mut rng, 10, 3);
        let angles = principal_angles(&a, &a).unwrap();
        assert!(angles.iter().all(|&t| t < 1e-8));

        let mut e1 = DMatrix::zeros(4, 1);
        e1[(0, 0)] = 1.0;
        let mut e2 = DMatrix::zeros(4, 1);
        e2[(1, 0)] = 1.0;
        let right = principal_angles(&e1, &e2).unwrap();
        assert_relative_eq!(right[0], std::f64::consts::FRAC_PI_2, epsilon = 1e-12);
    }

    #[test]
    fn principal_angles_invariant_under_mixing() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..10 {
            let a = random_matrix(&mut rng, 12, 3);
            let b = random_matrix(&mut rng, 12, 3);
            let base = principal_angles(&a, &b).unwrap();
            let r_mix = random_matrix(&mut rng, 3, 3);
            let s_mix = random_matrix(&mut rng, 3, 3);
            // Regularize toward identity so the mixes stay invertible.
            let r_mix = r_mix + DMatrix::identity(3, 3) * 2.0;
            let s_mix = s_mix + DMatrix::identity(3, 3) * 2.0;
            let mixed = principal_angles(&(&a * r_mix), &(&b * s_mix)).unwrap();
            for (x, y) in base.iter().zip(mixed.iter()) {
                assert!((x - y).abs() < 1e-10, "angle changed under mixing: {x} vs {y}");
            }
        }
    }

    #[test]
    fn grassmann_endpoints_and_midpoint() {
        // n = 4, r = 1, phi = e1, u = e2: the midpoint is the bisector.
        let mut phi = DMatrix::zeros(4, 1);
        phi[(0, 0)] = 1.0;
        let mut u = DMatrix::zeros(4, 1);
        u[(1, 0)] = 1.0;
        let mid = grassmann_interpolate(&phi, &u, 0.5).unwrap();
        let to_phi = principal_angles(&mid.matrix, &phi).unwrap()[0];
        let to_u = principal_angles(&mid.matrix, &u).unwrap()[0];
        assert_relative_eq!(to_phi, std::f64::consts::FRAC_PI_4, epsilon = 1e-10);
        assert_relative_eq!(to_u, std::f64::consts::FRAC_PI_4, epsilon = 1e-10);

        let at0 = grassmann_interpolate(&phi, &u, 0.0).unwrap();
        assert!(principal_angles(&at0.matrix, &phi).unwrap()[0] < 1e-8);
        let at1 = grassmann_interpolate(&phi, &u, 1.0).unwrap();
        assert!(principal_angles(&at1.matrix, &u).unwrap()[0] < 1e-8);
    }

    #[test]
    fn grassmann_identical_inputs_exercise_singular_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let phi = random_matrix(&mut rng, 20, 4);
        for lambda in [0.0, 0.3, 1.0] {
            let out = grassmann_interpolate(&phi, &phi, lambda).unwrap();
            let max_angle = *principal_angles(&out.matrix, &phi)
                .unwrap()
                .last()
                .unwrap();
            assert!(max_angle < 1e-8, "lambda {lambda}: angle {max_angle:.3e}");
            assert!(out.orthonormality_defect() < 1e-10);
        }
    }

    #[test]
    fn grassmann_rank_deficient_input_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let mut phi = random_matrix(&mut rng, 10, 3);
        let dup = phi.column(0).into_owned();
        phi.column_mut(2).copy_from(&dup);
        let u = random_matrix(&mut rng, 10, 3);
        assert!(matches!(
            grassmann_interpolate(&phi, &u, 0.5),
            Err(Error::RankDeficient(_))
        ));
    }

    #[test]
    fn grassmann_properties_random_suite() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for trial in 0..50 {
            let n = rng.random_range(8usize..40);
            let r = rng.random_range(1usize..=n.min(6));
            let phi = random_matrix(&mut rng, n, r);
            let u = random_matrix(&mut rng, n, r);
            let lambda: f64 = rng.random_range(0.0..=1.0);
            let out = grassmann_interpolate(&phi, &u, lambda).unwrap();
            assert!(
                out.orthonormality_defect() < 1e-10,
                "trial {trial}: defect {:.3e}",
                out.orthonormality_defect()
            );
            let at0 = grassmann_interpolate(&phi, &u, 0.0).unwrap();
            let at1 = grassmann_interpolate(&phi, &u, 1.0).unwrap();
            assert!(*principal_angles(&at0.matrix, &phi).unwrap().last().unwrap() < 1e-8);
            assert!(*principal_angles(&at1.matrix, &u).unwrap().last().unwrap() < 1e-8);
        }
    }

    #[test]
    fn grassmann_span_only_dependence() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let phi = random_matrix(&mut rng, 16, 3);
        let u = random_matrix(&mut rng, 16, 3);
        let mix = random_matrix(&mut rng, 3, 3) + DMatrix::identity(3, 3) * 2.0;
        let a = grassmann_interpolate(&phi, &u, 0.35).unwrap();
        let b = grassmann_interpolate(&(&phi * mix), &u, 0.35).unwrap();
        let angle = *principal_angles(&a.matrix, &b.matrix).unwrap().last().unwrap();
        assert!(angle < 1e-8, "span changed under right-multiplication: {angle:.3e}");
    }

    #[test]
    fn grassmann_rank_one_geodesic_is_linear_in_lambda() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        for _ in 0..10 {
            let n = rng.random_range(4usize..30);
            let phi = random_matrix(&mut rng, n, 1);
            let u = random_matrix(&mut rng, n, 1);
            let theta = principal_angles(&phi, &u).unwrap()[0];
            for lambda in [0.1, 0.25, 0.5, 0.8] {
                let out = grassmann_interpolate(&phi, &u, lambda).unwrap();
                let angle = principal_angles(&out.matrix, &phi).unwrap()[0];
                assert!(
                    (angle - lambda * theta).abs() < 1e-8,
                    "angle {angle} vs lambda*theta {}",
                    lambda * theta
                );
            }
        }
    }
}

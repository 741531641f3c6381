//! Incremental potential for one implicit time step: inertia + elastic +
//! barrier contact, with analytic gradient and Hessian over all 3n DOFs.
//!
//! Backward Euler is expressed as energy minimization: the step solves
//! `argmin_u  1/(2h^2) (u - u_tilde)^T M (u - u_tilde) + elastic(u) + barrier(u)`
//! where `u_tilde = u_prev + h v_prev + h^2 g` is the ballistic predictor.
//! Dirichlet DOFs are eliminated by identity-row substitution so vector and
//! basis sizes never change.

pub mod barrier;
mod eig3;
pub mod elastic;

pub use barrier::FloorPlane;
pub use elastic::HessianProjection;

use nalgebra::{DMatrix, DVector, Vector3};
use nalgebra_sparse::{CooMatrix, CscMatrix};

use crate::error::{Error, Result};
use crate::geometry::{SimState, TetMesh};

/// Isotropic elastic material with derived Lame parameters.
#[derive(Debug, Clone, Copy)]
pub struct Material {
    pub youngs_modulus: f64,
    pub poissons_ratio: f64,
    pub density: f64,
    pub lame_mu: f64,
    pub lame_lambda: f64,
}

impl Material {
    pub fn new(youngs_modulus: f64, poissons_ratio: f64, density: f64) -> Result<Self> {
        if youngs_modulus <= 0.0 {
            return Err(Error::Config(format!(
                "Young's modulus must be positive, got {youngs_modulus}"
            )));
        }
        if !(0.0..0.5).contains(&poissons_ratio) || poissons_ratio <= 0.0 {
            return Err(Error::Config(format!(
                "Poisson's ratio must lie in (0, 0.5), got {poissons_ratio}"
            )));
        }
        if density <= 0.0 {
            return Err(Error::Config(format!(
                "density must be positive, got {density}"
            )));
        }
        let lame_mu = youngs_modulus / (2.0 * (1.0 + poissons_ratio));
        let lame_lambda = youngs_modulus * poissons_ratio
            / ((1.0 + poissons_ratio) * (1.0 - 2.0 * poissons_ratio));
        Ok(Material {
            youngs_modulus,
            poissons_ratio,
            density,
            lame_mu,
            lame_lambda,
        })
    }
}

/// Dirichlet constraints: a sorted set of fixed nodes with prescribed
/// displacements.
#[derive(Debug, Clone, Default)]
pub struct BoundaryConditions {
    entries: Vec<(usize, Vector3<f64>)>,
}

impl BoundaryConditions {
    pub fn new(mut entries: Vec<(usize, Vector3<f64>)>) -> Self {
        entries.sort_by_key(|(i, _)| *i);
        entries.dedup_by_key(|(i, _)| *i);
        BoundaryConditions { entries }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(usize, Vector3<f64>)> {
        self.entries.iter()
    }

    /// Per-DOF fixed mask of length 3n.
    pub fn dof_mask(&self, num_nodes: usize) -> Vec<bool> {
        let mut mask = vec![false; 3 * num_nodes];
        for (node, _) in &self.entries {
            for c in 0..3 {
                mask[3 * node + c] = true;
            }
        }
        mask
    }

    /// Overwrites constrained DOFs of `u` with their prescribed values.
    pub fn apply(&self, u: &mut DVector<f64>) {
        for (node, val) in &self.entries {
            for c in 0..3 {
                u[3 * node + c] = val[c];
            }
        }
    }

    /// Zeroes constrained rows of a 3n x r basis so reduced steps cannot
    /// violate the constraints.
    pub fn zero_basis_rows(&self, basis: &mut DMatrix<f64>) {
        for (node, _) in &self.entries {
            for c in 0..3 {
                basis.row_mut(3 * node + c).fill(0.0);
            }
        }
    }
}

/// Everything a single implicit step needs to evaluate its objective.
#[derive(Debug, Clone)]
pub struct EnergyContext<'a> {
    pub mesh: &'a TetMesh,
    pub material: Material,
    /// Lumped mass diagonal, length 3n.
    pub mass: DVector<f64>,
    pub gravity: Vector3<f64>,
    pub floor: Option<FloorPlane>,
    pub elasticity_enabled: bool,
    pub projection: HessianProjection,
    pub prev_state: SimState,
    pub boundary: BoundaryConditions,
}

/// Lumped mass diagonal: node i receives density * (sum of adjacent element
/// volumes) / 4, repeated for the three coordinates.
pub fn lumped_mass(mesh: &TetMesh, density: f64) -> DVector<f64> {
    let mut mass = DVector::zeros(mesh.num_dofs());
    for (e, tet) in mesh.tets.iter().enumerate() {
        let share = density * mesh.rest_volume[e] / 4.0;
        for &node in tet {
            for c in 0..3 {
                mass[3 * node + c] += share;
            }
        }
    }
    mass
}

impl<'a> EnergyContext<'a> {
    pub fn new(
        mesh: &'a TetMesh,
        material: Material,
        gravity: Vector3<f64>,
        floor: Option<FloorPlane>,
        prev_state: SimState,
        boundary: BoundaryConditions,
    ) -> Self {
        let mass = lumped_mass(mesh, material.density);
        EnergyContext {
            mesh,
            material,
            mass,
            gravity,
            floor,
            elasticity_enabled: true,
            projection: HessianProjection::default(),
            prev_state,
            boundary,
        }
    }

    pub fn num_dofs(&self) -> usize {
        self.mesh.num_dofs()
    }

    fn h(&self) -> f64 {
        self.prev_state.time_step_h
    }

    /// Backward-Euler predictor u_tilde = u_prev + h v_prev + h^2 M^{-1} f_g.
    /// With lumped mass and per-node gravity this is u_prev + h v + h^2 g.
    pub fn predictor(&self) -> DVector<f64> {
        let h = self.h();
        let mut tilde = &self.prev_state.u + &self.prev_state.v * h;
        let h2 = h * h;
        for i in 0..self.mesh.num_nodes() {
            for c in 0..3 {
                tilde[3 * i + c] += h2 * self.gravity[c];
            }
        }
        tilde
    }

    fn node_u(u: &DVector<f64>, i: usize) -> Vector3<f64> {
        Vector3::new(u[3 * i], u[3 * i + 1], u[3 * i + 2])
    }

    /// Sum over elements of `vol * psi(F)`.
    pub fn elastic_energy(&self, u: &DVector<f64>) -> f64 {
        let (mu, lambda) = (self.material.lame_mu, self.material.lame_lambda);
        let mut sum = 0.0;
        for e in 0..self.mesh.num_tets() {
            let f = elastic::deformation_gradient(self.mesh, e, |i| Self::node_u(u, i));
            sum += self.mesh.rest_volume[e] * elastic::psi(&f, mu, lambda);
        }
        sum
    }

    /// Barrier energy, `None` when any node penetrates the floor.
    pub fn barrier_energy(&self, u: &DVector<f64>) -> Option<f64> {
        match &self.floor {
            Some(plane) => barrier::total_energy(plane, self.mesh, u),
            None => Some(0.0),
        }
    }

    fn inertia_energy(&self, u: &DVector<f64>, tilde: &DVector<f64>) -> f64 {
        let h2 = self.h() * self.h();
        let mut sum = 0.0;
        for d in 0..u.len() {
            let diff = u[d] - tilde[d];
            sum += self.mass[d] * diff * diff;
        }
        sum / (2.0 * h2)
    }

    /// Total incremental potential, `None` when the barrier is infeasible.
    pub fn incremental_potential(&self, u: &DVector<f64>) -> Option<f64> {
        let tilde = self.predictor();
        self.incremental_potential_with(u, &tilde)
    }

    /// Same as [`Self::incremental_potential`] with a precomputed predictor
    /// (the line search reuses it).
    pub fn incremental_potential_with(&self, u: &DVector<f64>, tilde: &DVector<f64>) -> Option<f64> {
        let barrier = self.barrier_energy(u)?;
        let elastic = if self.elasticity_enabled {
            self.elastic_energy(u)
        } else {
            0.0
        };
        Some(self.inertia_energy(u, tilde) + elastic + barrier)
    }

    /// Analytic gradient of the incremental potential. Constrained DOFs get
    /// zero entries.
    pub fn gradient(&self, u: &DVector<f64>) -> DVector<f64> {
        let tilde = self.predictor();
        let h2 = self.h() * self.h();
        let mut grad = DVector::zeros(u.len());
        for d in 0..u.len() {
            grad[d] = self.mass[d] * (u[d] - tilde[d]) / h2;
        }
        if self.elasticity_enabled {
            let (mu, lambda) = (self.material.lame_mu, self.material.lame_lambda);
            for e in 0..self.mesh.num_tets() {
                let f = elastic::deformation_gradient(self.mesh, e, |i| Self::node_u(u, i));
                let g = elastic::element_gradient(
                    &f,
                    &self.mesh.rest_inverse[e],
                    self.mesh.rest_volume[e],
                    mu,
                    lambda,
                );
                for (local, &node) in self.mesh.tets[e].iter().enumerate() {
                    for c in 0..3 {
                        grad[3 * node + c] += g[local][c];
                    }
                }
            }
        }
        if let Some(plane) = &self.floor {
            barrier::add_gradient(plane, self.mesh, u, &mut grad);
        }
        for (node, _) in self.boundary.iter() {
            for c in 0..3 {
                grad[3 * node + c] = 0.0;
            }
        }
        grad
    }

    /// Diagonal part shared by the sparse and reduced Hessian paths:
    /// inertia M/h^2 plus barrier curvature on free DOFs, 1 on fixed DOFs.
    fn hessian_diagonal(&self, u: &DVector<f64>) -> DVector<f64> {
        let h2 = self.h() * self.h();
        let mut diag = &self.mass / h2;
        if let Some(plane) = &self.floor {
            barrier::add_hessian_diag(plane, self.mesh, u, &mut diag);
        }
        let mask = self.boundary.dof_mask(self.mesh.num_nodes());
        for (d, fixed) in mask.iter().enumerate() {
            if *fixed {
                diag[d] = 1.0;
            }
        }
        diag
    }

    /// Sparse Hessian of the incremental potential with identity rows/cols
    /// at constrained DOFs. The elastic part is projected per
    /// `self.projection`.
    pub fn hessian(&self, u: &DVector<f64>) -> CscMatrix<f64> {
        let n = u.len();
        let mask = self.boundary.dof_mask(self.mesh.num_nodes());
        let mut coo = CooMatrix::new(n, n);
        if self.elasticity_enabled {
            let (mu, lambda) = (self.material.lame_mu, self.material.lame_lambda);
            for e in 0..self.mesh.num_tets() {
                let f = elastic::deformation_gradient(self.mesh, e, |i| Self::node_u(u, i));
                let he = elastic::element_hessian(
                    &f,
                    &self.mesh.rest_inverse[e],
                    self.mesh.rest_volume[e],
                    mu,
                    lambda,
                    self.projection,
                );
                let tet = &self.mesh.tets[e];
                for a in 0..4 {
                    for c1 in 0..3 {
                        let gi = 3 * tet[a] + c1;
                        if mask[gi] {
                            continue;
                        }
                        for b in 0..4 {
                            for c2 in 0..3 {
                                let gj = 3 * tet[b] + c2;
                                if mask[gj] {
                                    continue;
                                }
                                coo.push(gi, gj, he[(3 * a + c1, 3 * b + c2)]);
                            }
                        }
                    }
                }
            }
        }
        let diag = self.hessian_diagonal(u);
        for d in 0..n {
            coo.push(d, d, diag[d]);
        }
        CscMatrix::from(&coo)
    }

    /// Reduced Hessian `U^T H U` assembled element-wise without forming H.
    /// Equals the dense product with [`Self::hessian`] to rounding.
    pub fn reduced_hessian(&self, u: &DVector<f64>, basis: &DMatrix<f64>) -> DMatrix<f64> {
        let r = basis.ncols();
        let mask = self.boundary.dof_mask(self.mesh.num_nodes());
        let mut hred = DMatrix::zeros(r, r);
        if self.elasticity_enabled {
            let (mu, lambda) = (self.material.lame_mu, self.material.lame_lambda);
            let mut ue = DMatrix::zeros(12, r);
            for e in 0..self.mesh.num_tets() {
                let f = elastic::deformation_gradient(self.mesh, e, |i| Self::node_u(u, i));
                let he = elastic::element_hessian(
                    &f,
                    &self.mesh.rest_inverse[e],
                    self.mesh.rest_volume[e],
                    mu,
                    lambda,
                    self.projection,
                );
                let tet = &self.mesh.tets[e];
                for a in 0..4 {
                    for c in 0..3 {
                        let gd = 3 * tet[a] + c;
                        if mask[gd] {
                            ue.row_mut(3 * a + c).fill(0.0);
                        } else {
                            ue.row_mut(3 * a + c).copy_from(&basis.row(gd));
                        }
                    }
                }
                hred += ue.transpose() * (SDMat(&he) * &ue);
            }
        }
        let diag = self.hessian_diagonal(u);
        for d in 0..basis.nrows() {
            let w = diag[d];
            if w == 0.0 {
                continue;
            }
            let row = basis.row(d);
            for i in 0..r {
                for j in 0..r {
                    hred[(i, j)] += w * row[i] * row[j];
                }
            }
        }
        hred
    }
}

/// Helper multiplying a static 12x12 with a dynamic 12xr without copies.
struct SDMat<'m>(&'m nalgebra::SMatrix<f64, 12, 12>);

impl std::ops::Mul<&DMatrix<f64>> for SDMat<'_> {
    type Output = DMatrix<f64>;
    fn mul(self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        let r = rhs.ncols();
        let mut out = DMatrix::zeros(12, r);
        for j in 0..r {
            for i in 0..12 {
                let mut acc = 0.0;
                for k in 0..12 {
                    acc += self.0[(i, k)] * rhs[(k, j)];
                }
                out[(i, j)] = acc;
            }
        }
        out
    }
}

/// Objective interface shared by the full-order and reduced Newton solvers.
/// `energy` returns `None` for infeasible states (barrier penetration).
pub trait EnergyFn {
    fn num_dofs(&self) -> usize;
    fn energy(&self, u: &DVector<f64>) -> Option<f64>;
    fn gradient(&self, u: &DVector<f64>) -> DVector<f64>;
    fn sparse_hessian(&self, u: &DVector<f64>) -> CscMatrix<f64>;
    fn reduced_hessian(&self, u: &DVector<f64>, basis: &DMatrix<f64>) -> DMatrix<f64> {
        let h = self.sparse_hessian(u);
        let hu = &h * basis;
        basis.transpose() * hu
    }
}

impl EnergyFn for EnergyContext<'_> {
    fn num_dofs(&self) -> usize {
        self.mesh.num_dofs()
    }

    fn energy(&self, u: &DVector<f64>) -> Option<f64> {
        self.incremental_potential(u)
    }

    fn gradient(&self, u: &DVector<f64>) -> DVector<f64> {
        EnergyContext::gradient(self, u)
    }

    fn sparse_hessian(&self, u: &DVector<f64>) -> CscMatrix<f64> {
        self.hessian(u)
    }

    fn reduced_hessian(&self, u: &DVector<f64>, basis: &DMatrix<f64>) -> DMatrix<f64> {
        EnergyContext::reduced_hessian(self, u, basis)
    }
}

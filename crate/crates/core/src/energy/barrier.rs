//! Log-barrier contact against analytic axis-aligned planes.
//!
//! Per node with gap d in (0, dhat): b(d) = -kappa (d - dhat)^2 ln(d / dhat),
//! zero for d >= dhat, and +infinity as d -> 0. A non-positive gap is an
//! infeasible state reported to the line search, never a crash.

use nalgebra::{DVector, Vector3};

use crate::geometry::TetMesh;

/// A contact plane the body must stay on the positive side of.
#[derive(Debug, Clone, Copy)]
pub struct FloorPlane {
    /// Coordinate axis perpendicular to the plane (1 = horizontal floor).
    pub axis: usize,
    /// Plane offset along `axis`; gap is `(x + u)[axis] - height`.
    pub height: f64,
    /// Barrier stiffness kappa.
    pub stiffness: f64,
    /// Barrier support distance dhat.
    pub distance: f64,
}

impl FloorPlane {
    pub fn gap(&self, rest: &Vector3<f64>, u: &DVector<f64>, node: usize) -> f64 {
        rest[self.axis] + u[3 * node + self.axis] - self.height
    }
}

/// Scalar barrier value for gap `d`. Caller guarantees d > 0.
pub fn barrier_value(d: f64, dhat: f64, kappa: f64) -> f64 {
    if d >= dhat {
        0.0
    } else {
        -kappa * (d - dhat) * (d - dhat) * (d / dhat).ln()
    }
}

/// db/dd.
pub fn barrier_grad(d: f64, dhat: f64, kappa: f64) -> f64 {
    if d >= dhat {
        0.0
    } else {
        let t = d - dhat;
        -kappa * (2.0 * t * (d / dhat).ln() + t * t / d)
    }
}

/// d2b/dd2; positive on (0, dhat) so the contact Hessian needs no projection.
pub fn barrier_hess(d: f64, dhat: f64, kappa: f64) -> f64 {
    if d >= dhat {
        0.0
    } else {
        let t = d - dhat;
        -kappa * (2.0 * (d / dhat).ln() + 4.0 * t / d - t * t / (d * d))
    }
}

/// Total barrier energy over all nodes, or `None` when any node is at or
/// below the plane (infeasible).
pub fn total_energy(plane: &FloorPlane, mesh: &TetMesh, u: &DVector<f64>) -> Option<f64> {
    let mut sum = 0.0;
    for i in 0..mesh.num_nodes() {
        let d = plane.gap(&mesh.nodes[i], u, i);
        if d <= 0.0 {
            return None;
        }
        sum += barrier_value(d, plane.distance, plane.stiffness);
    }
    Some(sum)
}

/// Adds the barrier gradient into `grad`. Infeasible nodes contribute the
/// limiting slope of the feasible side; the solver never evaluates gradients
/// at infeasible states in practice because the line search rejects them.
pub fn add_gradient(plane: &FloorPlane, mesh: &TetMesh, u: &DVector<f64>, grad: &mut DVector<f64>) {
    for i in 0..mesh.num_nodes() {
        let d = plane.gap(&mesh.nodes[i], u, i);
        if d > 0.0 {
            grad[3 * i + plane.axis] += barrier_grad(d, plane.distance, plane.stiffness);
        }
    }
}

/// Per-DOF diagonal Hessian contribution.
pub fn add_hessian_diag(
    plane: &FloorPlane,
    mesh: &TetMesh,
    u: &DVector<f64>,
    diag: &mut DVector<f64>,
) {
    for i in 0..mesh.num_nodes() {
        let d = plane.gap(&mesh.nodes[i], u, i);
        if d > 0.0 {
            diag[3 * i + plane.axis] += barrier_hess(d, plane.distance, plane.stiffness);
        }
    }
}

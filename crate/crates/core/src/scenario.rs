//! Scripted desk-scale scenarios: keyframed Dirichlet boundary programs
//! (press, bend, stretch, twist) and a drop onto a barrier floor.
//!
//! Boundary motions are piecewise-linear in time between keyframes and hold
//! their last value afterwards.

use nalgebra::{Matrix3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::energy::{
    BoundaryConditions, EnergyContext, FloorPlane, HessianProjection, Material,
};
use crate::error::{Error, Result};
use crate::geometry::{SimState, TetMesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Compression,
    Bending,
    Stretching,
    Twisting,
    Drop,
}

impl ScenarioKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::Compression => "compression",
            ScenarioKind::Bending => "bending",
            ScenarioKind::Stretching => "stretching",
            ScenarioKind::Twisting => "twisting",
            ScenarioKind::Drop => "drop",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "compression" => Ok(ScenarioKind::Compression),
            "bending" => Ok(ScenarioKind::Bending),
            "stretching" => Ok(ScenarioKind::Stretching),
            "twisting" => Ok(ScenarioKind::Twisting),
            "drop" => Ok(ScenarioKind::Drop),
            other => Err(Error::Config(format!("unknown scenario kind `{other}`"))),
        }
    }
}

/// Time-indexed rigid motion applied to a node group.
#[derive(Debug, Clone)]
pub enum Motion {
    /// Zero prescribed displacement for all t.
    Fixed,
    /// Piecewise-linear translation offset through `(time, offset)` keys.
    Translate { keys: Vec<(f64, Vector3<f64>)> },
    /// Rotation about an axis through `center`, with piecewise-linear angle
    /// `(time, radians)` keys.
    Rotate {
        center: Vector3<f64>,
        axis: Unit<Vector3<f64>>,
        keys: Vec<(f64, f64)>,
    },
}

fn lerp_keys<T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>>(
    keys: &[(f64, T)],
    t: f64,
    zero: T,
) -> T {
    if keys.is_empty() {
        return zero;
    }
    if t <= keys[0].0 {
        return keys[0].1;
    }
    for w in keys.windows(2) {
        let (t0, v0) = w[0];
        let (t1, v1) = w[1];
        if t <= t1 {
            let s = if t1 > t0 { (t - t0) / (t1 - t0) } else { 1.0 };
            return v0 * (1.0 - s) + v1 * s;
        }
    }
    keys[keys.len() - 1].1
}

impl Motion {
    /// Prescribed displacement of a node with rest position `x` at time `t`.
    pub fn displacement(&self, x: &Vector3<f64>, t: f64) -> Vector3<f64> {
        match self {
            Motion::Fixed => Vector3::zeros(),
            Motion::Translate { keys } => lerp_keys(keys, t, Vector3::zeros()),
            Motion::Rotate { center, axis, keys } => {
                let angle = lerp_keys(keys, t, 0.0);
                let rot = Matrix3::from(nalgebra::Rotation3::from_axis_angle(axis, angle));
                rot * (x - center) + center - x
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct BoundaryGroup {
    pub nodes: Vec<usize>,
    pub motion: Motion,
}

#[derive(Debug, Clone, Default)]
pub struct BoundaryProgram {
    pub groups: Vec<BoundaryGroup>,
}

impl BoundaryProgram {
    /// Dirichlet set at time `t`.
    pub fn conditions_at(&self, mesh: &TetMesh, t: f64) -> BoundaryConditions {
        let mut entries = Vec::new();
        for group in &self.groups {
            for &node in &group.nodes {
                entries.push((node, group.motion.displacement(&mesh.nodes[node], t)));
            }
        }
        BoundaryConditions::new(entries)
    }
}

/// A fully materialized scenario: mesh, material, schedule, and contacts.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub kind: ScenarioKind,
    pub mesh: TetMesh,
    pub material: Material,
    pub gravity: Vector3<f64>,
    pub time_step_h: f64,
    pub num_steps: usize,
    pub boundary: BoundaryProgram,
    pub floor: Option<FloorPlane>,
    pub elasticity_enabled: bool,
    pub projection: HessianProjection,
    pub seed: u64,
}

impl Scenario {
    /// Desk-scale cookbook: builds the keyframed boundary program for `kind`
    /// on `mesh`. Magnitudes are proportional to the bounding box; motions
    /// ramp linearly over the first 60% of the run and hold afterwards.
    pub fn from_cookbook(
        kind: ScenarioKind,
        name: impl Into<String>,
        mesh: TetMesh,
        material: Material,
        time_step_h: f64,
        num_steps: usize,
        seed: u64,
    ) -> Result<Self> {
        if time_step_h <= 0.0 {
            return Err(Error::Config("time step must be positive".into()));
        }
        let (lo, hi) = mesh.bounding_box();
        let extent = hi - lo;
        let total_t = num_steps as f64 * time_step_h;
        let ramp_t = 0.6 * total_t;
        let face_tol = 1e-9 * extent.norm().max(1.0);

        let mut groups = Vec::new();
        let mut floor = None;
        let mut gravity = Vector3::new(0.0, -9.8, 0.0);
        match kind {
            ScenarioKind::Compression => {
                groups.push(BoundaryGroup {
                    nodes: mesh.face_nodes(1, true, face_tol),
                    motion: Motion::Fixed,
                });
                let press = -0.35 * extent.y;
                groups.push(BoundaryGroup {
                    nodes: mesh.face_nodes(1, false, face_tol),
                    motion: Motion::Translate {
                        keys: vec![
                            (0.0, Vector3::zeros()),
                            (ramp_t, Vector3::new(0.0, press, 0.0)),
                            (total_t, Vector3::new(0.0, press, 0.0)),
                        ],
                    },
                });
            }
            ScenarioKind::Bending => {
                groups.push(BoundaryGroup {
                    nodes: mesh.face_nodes(0, true, face_tol),
                    motion: Motion::Fixed,
                });
                let dip = -0.5 * extent.y;
                groups.push(BoundaryGroup {
                    nodes: mesh.face_nodes(0, false, face_tol),
                    motion: Motion::Translate {
                        keys: vec![
                            (0.0, Vector3::zeros()),
                            (ramp_t, Vector3::new(0.0, dip, 0.0)),
                            (total_t, Vector3::new(0.0, dip, 0.0)),
                        ],
                    },
                });
            }
            ScenarioKind::Stretching => {
                groups.push(BoundaryGroup {
                    nodes: mesh.face_nodes(0, true, face_tol),
                    motion: Motion::Fixed,
                });
                let pull = 0.4 * extent.x;
                groups.push(BoundaryGroup {
                    nodes: mesh.face_nodes(0, false, face_tol),
                    motion: Motion::Translate {
                        keys: vec![
                            (0.0, Vector3::zeros()),
                            (ramp_t, Vector3::new(pull, 0.0, 0.0)),
                            (total_t, Vector3::new(pull, 0.0, 0.0)),
                        ],
                    },
                });
            }
            ScenarioKind::Twisting => {
                groups.push(BoundaryGroup {
                    nodes: mesh.face_nodes(0, true, face_tol),
                    motion: Motion::Fixed,
                });
                let center = (lo + hi) * 0.5;
                let angle = 2.0 * std::f64::consts::PI / 3.0;
                groups.push(BoundaryGroup {
                    nodes: mesh.face_nodes(0, false, face_tol),
                    motion: Motion::Rotate {
                        center,
                        axis: Unit::new_normalize(Vector3::x()),
                        keys: vec![(0.0, 0.0), (ramp_t, angle), (total_t, angle)],
                    },
                });
                // Twisting is about shape, not weight; keep it gravity-free so
                // the prescribed rotation dominates.
                gravity = Vector3::zeros();
            }
            ScenarioKind::Drop => {
                let dhat = 1e-3 * extent.norm();
                floor = Some(FloorPlane {
                    axis: 1,
                    height: lo.y - 0.5 * extent.y,
                    stiffness: 1e3 * material.youngs_modulus * dhat,
                    distance: dhat,
                });
            }
        }

        Ok(Scenario {
            name: name.into(),
            kind,
            mesh,
            material,
            gravity,
            time_step_h,
            num_steps,
            boundary: BoundaryProgram { groups },
            floor,
            elasticity_enabled: true,
            projection: HessianProjection::default(),
            seed,
        })
    }

    /// Rest state with the t = 0 boundary values applied.
    pub fn initial_state(&self) -> SimState {
        let mut state = SimState::rest(&self.mesh, self.time_step_h);
        self.boundary
            .conditions_at(&self.mesh, 0.0)
            .apply(&mut state.u);
        state
    }

    /// Energy context for the step advancing `prev` to `prev.step + 1`;
    /// boundary values are evaluated at the target time.
    pub fn context_for_step(&self, prev: SimState) -> EnergyContext<'_> {
        let t_target = (prev.step + 1) as f64 * self.time_step_h;
        let boundary = self.boundary.conditions_at(&self.mesh, t_target);
        let mut ctx = EnergyContext::new(
            &self.mesh,
            self.material,
            self.gravity,
            self.floor,
            prev,
            boundary,
        );
        ctx.elasticity_enabled = self.elasticity_enabled;
        ctx.projection = self.projection;
        ctx
    }
}

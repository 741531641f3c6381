//! Full-order reference solver: one implicit step is a Newton minimization
//! of the incremental potential over all 3n DOFs, with a feasibility-aware
//! backtracking line search and a sparse direct factorization.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::factorization::CscCholesky;

use crate::energy::{EnergyContext, EnergyFn};
use crate::error::{Error, Result};
use crate::geometry::SimState;
use crate::scenario::Scenario;

/// Newton solver settings shared by the full-order and reduced steppers.
#[derive(Debug, Clone, Copy)]
pub struct NewtonParams {
    /// Convergence threshold on the max-norm of the gradient.
    pub tol_abs: f64,
    pub max_iter: usize,
    /// Armijo sufficient-decrease constant.
    pub armijo_c: f64,
    /// Maximum number of step halvings in the line search.
    pub max_halvings: usize,
}

impl NewtonParams {
    /// Default tolerance 1e-6 * E_y * h^2: the gradient of the inertia term
    /// scales as mass/h^2, so this keeps the threshold step-size invariant.
    pub fn for_scale(youngs_modulus: f64, h: f64) -> Self {
        NewtonParams {
            tol_abs: 1e-6 * youngs_modulus * h * h,
            max_iter: 50,
            armijo_c: 1e-4,
            max_halvings: 30,
        }
    }
}

/// Per-step solver diagnostics.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepStats {
    pub iterations: usize,
    pub line_search_halvings: usize,
    pub converged: bool,
    /// Set when the line search exhausted its budget and the step kept the
    /// best feasible non-increasing candidate (or stayed put).
    pub stalled: bool,
    pub residual: f64,
}

/// Backtracking line search: first halve until feasible, then until the
/// Armijo condition holds. On exhaustion, falls back to the smallest
/// feasible non-increasing candidate seen, else stays at `u`.
///
/// Returns (accepted u, its energy, halvings, stalled).
pub fn line_search(
    energy: &dyn EnergyFn,
    u: &DVector<f64>,
    e0: f64,
    direction: &DVector<f64>,
    directional_derivative: f64,
    armijo_c: f64,
    max_halvings: usize,
) -> (DVector<f64>, f64, usize, bool) {
    let mut alpha = 1.0;
    let mut fallback: Option<(DVector<f64>, f64)> = None;
    for halving in 0..=max_halvings {
        let candidate = u + direction * alpha;
        if let Some(e) = energy.energy(&candidate) {
            if e <= e0 + armijo_c * alpha * directional_derivative {
                return (candidate, e, halving, false);
            }
            if e <= e0 {
                fallback = Some((candidate, e));
            }
        }
        alpha *= 0.5;
    }
    match fallback {
        Some((candidate, e)) => (candidate, e, max_halvings, true),
        None => (u.clone(), e0, max_halvings, true),
    }
}

/// One implicit backward-Euler step: minimizes the incremental potential of
/// `ctx` starting from the ballistic predictor (falling back to the previous
/// displacement when the predictor is infeasible against the barrier).
pub fn fom_step(ctx: &EnergyContext, params: &NewtonParams) -> Result<(SimState, StepStats)> {
    let prev = &ctx.prev_state;
    let h = prev.time_step_h;

    let mut u = ctx.predictor();
    ctx.boundary.apply(&mut u);
    let mut e_current = match ctx.incremental_potential(&u) {
        Some(e) => e,
        None => {
            u = prev.u.clone();
            ctx.boundary.apply(&mut u);
            ctx.incremental_potential(&u).ok_or_else(|| {
                Error::Solver("infeasible starting state: node at or below the floor".into())
            })?
        }
    };

    let mut stats = StepStats::default();
    for iteration in 0..params.max_iter {
        let grad = EnergyFn::gradient(ctx, &u);
        stats.residual = grad.amax();
        if stats.residual < params.tol_abs {
            stats.converged = true;
            break;
        }
        stats.iterations = iteration + 1;

        let hess = ctx.hessian(&u);
        let chol = CscCholesky::factor(&hess).map_err(|e| Error::LinearSolve {
            iteration,
            msg: format!("{e:?}"),
        })?;
        let rhs = DMatrix::from_fn(u.len(), 1, |i, _| -grad[i]);
        let delta = DVector::from_column_slice(chol.solve(&rhs).column(0).as_slice());

        let dir_deriv = grad.dot(&delta);
        let (u_next, e_next, halvings, stalled) = line_search(
            ctx,
            &u,
            e_current,
            &delta,
            dir_deriv,
            params.armijo_c,
            params.max_halvings,
        );
        stats.line_search_halvings += halvings;
        u = u_next;
        e_current = e_next;
        if stalled {
            stats.stalled = true;
            break;
        }
    }
    if !stats.converged {
        let grad = EnergyFn::gradient(ctx, &u);
        stats.residual = grad.amax();
        stats.converged = stats.residual < params.tol_abs;
    }

    let v = (&u - &prev.u) / h;
    Ok((
        SimState {
            u,
            v,
            step: prev.step + 1,
            time_step_h: h,
        },
        stats,
    ))
}

/// Full-order trajectory with per-step wall-clock timings (I/O excluded).
#[derive(Debug, Clone)]
pub struct FomRun {
    pub trajectory: Vec<SimState>,
    pub step_times: Vec<Duration>,
    pub stats: Vec<StepStats>,
}

/// Runs `scenario.num_steps` implicit steps from the scenario's initial
/// state. Deterministic: identical configs produce bit-identical
/// trajectories.
pub fn run_scenario_fom(scenario: &Scenario, params: &NewtonParams) -> Result<FomRun> {
    let mut trajectory = Vec::with_capacity(scenario.num_steps + 1);
    let mut step_times = Vec::with_capacity(scenario.num_steps);
    let mut stats = Vec::with_capacity(scenario.num_steps);
    let mut state = scenario.initial_state();
    trajectory.push(state.clone());
    for _ in 0..scenario.num_steps {
        let ctx = scenario.context_for_step(state);
        let start = Instant::now();
        let (next, step_stats) = fom_step(&ctx, params)?;
        step_times.push(start.elapsed());
        stats.push(step_stats);
        state = next;
        trajectory.push(state.clone());
    }
    Ok(FomRun {
        trajectory,
        step_times,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{BoundaryConditions, Material};
    use crate::geometry::make_bar_mesh;
    use crate::scenario::ScenarioKind;
    use nalgebra::Vector3;
    use nalgebra_sparse::{CooMatrix, CscMatrix};

    fn mat() -> Material {
        Material::new(1e5, 0.45, 1000.0).unwrap()
    }

    fn free_ctx(mesh: &crate::geometry::TetMesh, state: SimState) -> EnergyContext<'_> {
        EnergyContext::new(
            mesh,
            mat(),
            Vector3::new(0.0, -10.0, 0.0),
            None,
            state,
            BoundaryConditions::default(),
        )
    }

    #[test]
    fn rest_is_stationary_without_forces() {
        let mesh = make_bar_mesh(2, 2, 2, 0.5).unwrap();
        let state = SimState::rest(&mesh, 0.01);
        let mut ctx = free_ctx(&mesh, state);
        ctx.gravity = Vector3::zeros();
        let params = NewtonParams::for_scale(1e5, 0.01);
        let (next, stats) = fom_step(&ctx, &params).unwrap();
        assert!(stats.converged);
        assert_eq!(stats.iterations, 0);
        assert!(next.u.amax() < 1e-12);
    }

    #[test]
    fn free_flight_matches_ballistic_closed_form() {
        let mesh = make_bar_mesh(2, 2, 2, 0.5).unwrap();
        let h = 0.01;
        let g = -10.0;
        let mut state = SimState::rest(&mesh, h);
        let params = NewtonParams::for_scale(1e5, h);
        for _ in 0..20 {
            let mut ctx = free_ctx(&mesh, state);
            ctx.elasticity_enabled = false;
            let (next, stats) = fom_step(&ctx, &params).unwrap();
            assert!(stats.converged);
            state = next;
        }
        // u_y(t) = g h^2 t (t + 1) / 2, v_y(t) = g h t.
        let t = 20.0;
        let expected_u = g * h * h * t * (t + 1.0) / 2.0;
        let expected_v = g * h * t;
        for i in 0..mesh.num_nodes() {
            assert!((state.u[3 * i + 1] - expected_u).abs() < 1e-12);
            assert!((state.v[3 * i + 1] - expected_v).abs() < 1e-12);
            assert!(state.u[3 * i].abs() < 1e-15);
            assert!(state.u[3 * i + 2].abs() < 1e-15);
        }
    }

    #[test]
    fn single_gravity_step_drops_by_h2_g_plus_hv() {
        let mesh = make_bar_mesh(2, 2, 2, 0.5).unwrap();
        let h = 0.01;
        let mut state = SimState::rest(&mesh, h);
        state.v.fill(0.0);
        for i in 0..mesh.num_nodes() {
            state.v[3 * i + 1] = -0.3;
        }
        let mut ctx = free_ctx(&mesh, state.clone());
        ctx.elasticity_enabled = false;
        let params = NewtonParams::for_scale(1e5, h);
        let (next, _) = fom_step(&ctx, &params).unwrap();
        for i in 0..mesh.num_nodes() {
            let drop = next.u[3 * i + 1] - state.u[3 * i + 1];
            assert!((drop - (h * -0.3 + h * h * -10.0)).abs() < 1e-15);
        }
    }

    /// Quadratic objective E = 1/2 u^T A u - b^T u implementing the solver
    /// interface; Newton must finish it in a single unit step.
    struct Quadratic {
        a: DMatrix<f64>,
        b: DVector<f64>,
    }

    impl EnergyFn for Quadratic {
        fn num_dofs(&self) -> usize {
            self.b.len()
        }
        fn energy(&self, u: &DVector<f64>) -> Option<f64> {
            Some(0.5 * (&self.a * u).dot(u) - self.b.dot(u))
        }
        fn gradient(&self, u: &DVector<f64>) -> DVector<f64> {
            &self.a * u - &self.b
        }
        fn sparse_hessian(&self, _u: &DVector<f64>) -> CscMatrix<f64> {
            let n = self.b.len();
            let mut coo = CooMatrix::new(n, n);
            for i in 0..n {
                for j in 0..n {
                    if self.a[(i, j)] != 0.0 {
                        coo.push(i, j, self.a[(i, j)]);
                    }
                }
            }
            CscMatrix::from(&coo)
        }
    }

    #[test]
    fn newton_is_exact_on_quadratics() {
        // Generic Newton loop over the trait, mirroring fom_step's structure.
        let n = 12;
        let mut a = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = 2.0 + i as f64;
            if i + 1 < n {
                a[(i, i + 1)] = -0.5;
                a[(i + 1, i)] = -0.5;
            }
        }
        let b = DVector::from_fn(n, |i, _| (i as f64 * 0.37).sin());
        let q = Quadratic { a: a.clone(), b: b.clone() };

        let mut u = DVector::zeros(n);
        let mut iterations = 0;
        loop {
            let g = q.gradient(&u);
            if g.amax() < 1e-10 {
                break;
            }
            iterations += 1;
            let h = q.sparse_hessian(&u);
            let chol = CscCholesky::factor(&h).unwrap();
            let rhs = DMatrix::from_fn(n, 1, |i, _| -g[i]);
            let delta = DVector::from_column_slice(chol.solve(&rhs).column(0).as_slice());
            let e0 = q.energy(&u).unwrap();
            let (next, _, halvings, stalled) =
                line_search(&q, &u, e0, &delta, g.dot(&delta), 1e-4, 30);
            assert_eq!(halvings, 0, "full Newton step must pass Armijo");
            assert!(!stalled);
            u = next;
        }
        assert_eq!(iterations, 1, "Newton is exact on quadratics");
        let direct = a.lu().solve(&b).unwrap();
        assert!((u - direct).amax() < 1e-9);
    }

    #[test]
    fn energy_decreases_along_accepted_steps() {
        let mesh = make_bar_mesh(4, 2, 2, 0.1).unwrap();
        let scenario = Scenario::from_cookbook(
            ScenarioKind::Bending,
            "bend",
            mesh,
            mat(),
            0.01,
            30,
            0,
        )
        .unwrap();
        let params = NewtonParams::for_scale(1e5, 0.01);
        let mut state = scenario.initial_state();
        for _ in 0..scenario.num_steps {
            let ctx = scenario.context_for_step(state.clone());
            let mut start = ctx.predictor();
            ctx.boundary.apply(&mut start);
            let e_start = ctx
                .incremental_potential(&start)
                .unwrap_or(f64::INFINITY);
            let (next, stats) = fom_step(&ctx, &params).unwrap();
            let e_end = ctx.incremental_potential(&next.u).unwrap();
            assert!(
                e_end <= e_start + 1e-9 * e_start.abs().max(1.0),
                "energy must not increase: {e_start} -> {e_end}"
            );
            assert!(stats.converged, "step failed to converge: {stats:?}");
            state = next;
        }
    }

    #[test]
    fn trajectories_are_deterministic() {
        let mesh = make_bar_mesh(3, 2, 2, 0.1).unwrap();
        let scenario = Scenario::from_cookbook(
            ScenarioKind::Compression,
            "c",
            mesh,
            mat(),
            0.01,
            15,
            7,
        )
        .unwrap();
        let params = NewtonParams::for_scale(1e5, 0.01);
        let a = run_scenario_fom(&scenario, &params).unwrap();
        let b = run_scenario_fom(&scenario, &params).unwrap();
        assert_eq!(a.trajectory.len(), b.trajectory.len());
        for (sa, sb) in a.trajectory.iter().zip(b.trajectory.iter()) {
            assert_eq!(sa.u.as_slice(), sb.u.as_slice(), "bit-identical displacements");
            assert_eq!(sa.v.as_slice(), sb.v.as_slice());
        }
    }

    #[test]
    fn zero_steps_yields_initial_state_only() {
        let mesh = make_bar_mesh(2, 2, 2, 0.5).unwrap();
        let scenario =
            Scenario::from_cookbook(ScenarioKind::Drop, "d", mesh, mat(), 0.01, 0, 0).unwrap();
        let run = run_scenario_fom(&scenario, &NewtonParams::for_scale(1e5, 0.01)).unwrap();
        assert_eq!(run.trajectory.len(), 1);
        assert!(run.step_times.is_empty());
    }

    #[test]
    fn compression_press_descends_monotonically() {
        let mesh = make_bar_mesh(3, 3, 3, 0.1).unwrap();
        let scenario = Scenario::from_cookbook(
            ScenarioKind::Compression,
            "c",
            mesh,
            mat(),
            0.01,
            200,
            0,
        )
        .unwrap();
        let params = NewtonParams::for_scale(1e5, 0.01);
        let run = run_scenario_fom(&scenario, &params).unwrap();
        // While the press plane descends (the ramp phase), the maximum
        // vertical coordinate strictly decreases.
        let ramp_steps = (0.6 * 200.0) as usize;
        let max_y = |state: &SimState| {
            (0..scenario.mesh.num_nodes())
                .map(|i| scenario.mesh.nodes[i].y + state.u[3 * i + 1])
                .fold(f64::NEG_INFINITY, f64::max)
        };
        let mut prev = max_y(&run.trajectory[0]);
        for t in 1..=ramp_steps {
            let cur = max_y(&run.trajectory[t]);
            assert!(cur < prev, "step {t}: max y {cur} did not decrease from {prev}");
            prev = cur;
        }
    }
}

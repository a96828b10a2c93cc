//! The frictional contact state problem and its adjoints.
//!
//! The displacement solves the regularized variational problem
//!
//! ```text
//! a(u, v) + int_Gc dj(u_t) v_t ds = (f, v) + (g, v)_Gn    for all v,
//! ```
//!
//! with bilateral contact (zero normal displacement on the contact boundary)
//! and zero displacement on the Dirichlet boundary.  The friction density
//! `j` is smooth, so the discrete problem is a plain nonlinear system solved
//! by a damped Newton method with an exact tangent.

use crate::error::Error;
use crate::fem::{
    assemble_body_force, assemble_stiffness, assemble_traction, contact_dissipation,
    contact_residual, contact_tangent, contact_tangent_positive, elastic_energy,
    state_constraints, Coo, DofMap, SpdSolver,
};
use crate::material::{Elasticity, FrictionParams};
use crate::mesh::Mesh;
use crate::Result;

/// Newton iteration controls.
#[derive(Debug, Clone, Copy)]
pub struct NewtonParams {
    /// Residual tolerance relative to the load norm.
    pub tol_rel: f64,
    /// Relative step-size tolerance (secondary stop).
    pub step_tol_rel: f64,
    pub max_iters: usize,
    /// Maximum step halvings when the residual does not decrease.
    pub max_halvings: usize,
}

impl Default for NewtonParams {
    fn default() -> Self {
        NewtonParams { tol_rel: 1e-10, step_tol_rel: 1e-6, max_iters: 50, max_halvings: 8 }
    }
}

/// Everything the state problem needs besides the mesh.
#[derive(Debug, Clone)]
pub struct StateConfig {
    pub elasticity: Elasticity,
    pub friction: FrictionParams,
    /// Constant body force over the domain.
    pub body_force: [f64; 2],
    /// Constant traction on the Neumann boundary.
    pub traction: [f64; 2],
    /// Optional per-triangle stiffness scaling (material interpolation).
    pub stiffness_coeff: Option<Vec<f64>>,
    pub newton: NewtonParams,
}

impl StateConfig {
    pub fn frictionless(elasticity: Elasticity, body_force: [f64; 2], traction: [f64; 2]) -> Self {
        StateConfig {
            elasticity,
            friction: FrictionParams::zero(),
            body_force,
            traction,
            stiffness_coeff: None,
            newton: NewtonParams::default(),
        }
    }
}

/// Converged state with solver diagnostics.
#[derive(Debug, Clone)]
pub struct StateSolution {
    /// Full interleaved displacement vector (constrained entries zero).
    pub u: Vec<f64>,
    pub newton_iterations: usize,
    pub residual_norm: f64,
    pub load_norm: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Assembled pieces reused by the state solve and the adjoint solves.
pub struct StateOperator {
    pub dofs: DofMap,
    pub stiffness: Coo,
    /// Full-size load covector (body force plus traction).
    pub load: Vec<f64>,
}

impl StateOperator {
    pub fn new(mesh: &Mesh, cfg: &StateConfig) -> Result<Self> {
        let dofs = DofMap::from_constraints(state_constraints(mesh)?);
        let stiffness = assemble_stiffness(mesh, &cfg.elasticity, cfg.stiffness_coeff.as_deref())?;
        let mut load = assemble_body_force(mesh, cfg.body_force, cfg.stiffness_coeff.as_deref());
        let traction = assemble_traction(mesh, cfg.traction);
        for (l, t) in load.iter_mut().zip(&traction) {
            *l += t;
        }
        Ok(StateOperator { dofs, stiffness, load })
    }

    /// Residual of the full nonlinear system, reduced to free DOFs.
    fn residual(&self, mesh: &Mesh, cfg: &StateConfig, u_full: &[f64], k: &crate::fem::Csr) -> Vec<f64> {
        let mut r_full = k.matvec(u_full);
        contact_residual(mesh, &cfg.friction, u_full, &mut r_full);
        for (r, l) in r_full.iter_mut().zip(&self.load) {
            *r -= l;
        }
        self.dofs.restrict(&r_full)
    }

    /// Exact tangent (stiffness plus friction second derivative) at `u`,
    /// reduced to free DOFs.
    pub fn tangent(&self, mesh: &Mesh, cfg: &StateConfig, u_full: &[f64]) -> Coo {
        let mut t = self.stiffness.clone();
        contact_tangent(mesh, &cfg.friction, u_full, &mut t);
        self.dofs.reduce_matrix(&t)
    }

    /// Factor the tangent at `u`, falling back to the positive part of the
    /// friction curvature when the exact tangent is indefinite (softening
    /// outweighing a near-void elastic diagonal on the contact boundary).
    fn factor_tangent(&self, mesh: &Mesh, cfg: &StateConfig, u_full: &[f64]) -> Result<SpdSolver> {
        match SpdSolver::new(&self.tangent(mesh, cfg, u_full)) {
            Ok(s) => Ok(s),
            Err(Error::Solve(_)) => {
                let mut t = self.stiffness.clone();
                contact_tangent_positive(mesh, &cfg.friction, u_full, &mut t);
                SpdSolver::new(&self.dofs.reduce_matrix(&t))
            }
            Err(e) => Err(e),
        }
    }
}

/// Solve the state problem by damped Newton.  `warm_start` (a full-size
/// displacement from a nearby design) cuts iterations in the optimization
/// loops; zero loads return immediately without a linear solve.
pub fn solve_state(
    mesh: &Mesh,
    cfg: &StateConfig,
    warm_start: Option<&[f64]>,
) -> Result<StateSolution> {
    let op = StateOperator::new(mesh, cfg)?;
    let k = op.stiffness.to_csr();
    let load_norm = norm(&op.dofs.restrict(&op.load));
    if load_norm == 0.0 {
        return Ok(StateSolution {
            u: vec![0.0; op.dofs.full_dim],
            newton_iterations: 0,
            residual_norm: 0.0,
            load_norm,
        });
    }
    let tol = cfg.newton.tol_rel * load_norm;
    let mut u_red = match warm_start {
        Some(w) => {
            assert_eq!(w.len(), op.dofs.full_dim, "warm start size mismatch");
            op.dofs.restrict(w)
        }
        None => vec![0.0; op.dofs.reduced_dim()],
    };
    let mut u_full = op.dofs.expand(&u_red);
    let mut r = op.residual(mesh, cfg, &u_full, &k);
    let mut r_norm = norm(&r);
    let mut trace = vec![r_norm];
    for iter in 1..=cfg.newton.max_iters {
        if r_norm <= tol {
            return Ok(StateSolution {
                u: u_full,
                newton_iterations: iter - 1,
                residual_norm: r_norm,
                load_norm,
            });
        }
        let solver = op.factor_tangent(mesh, cfg, &u_full)?;
        let neg_r: Vec<f64> = r.iter().map(|x| -x).collect();
        let delta = solver.solve(&neg_r)?;
        // damping: halve the step while the residual norm grows
        let mut scale = 1.0;
        let (mut cand_u, mut cand_r, mut cand_norm);
        let mut halvings = 0;
        loop {
            let trial: Vec<f64> =
                u_red.iter().zip(&delta).map(|(u, d)| u + scale * d).collect();
            let trial_full = op.dofs.expand(&trial);
            let trial_r = op.residual(mesh, cfg, &trial_full, &k);
            let trial_norm = norm(&trial_r);
            cand_u = trial;
            cand_r = trial_r;
            cand_norm = trial_norm;
            if trial_norm < r_norm || halvings >= cfg.newton.max_halvings {
                break;
            }
            halvings += 1;
            scale *= 0.5;
        }
        let step_norm = scale * norm(&delta);
        u_red = cand_u;
        u_full = op.dofs.expand(&u_red);
        r = cand_r;
        r_norm = cand_norm;
        trace.push(r_norm);
        if r_norm <= tol {
            return Ok(StateSolution {
                u: u_full,
                newton_iterations: iter,
                residual_norm: r_norm,
                load_norm,
            });
        }
        if step_norm <= cfg.newton.step_tol_rel * norm(&u_red).max(f64::MIN_POSITIVE) {
            return Ok(StateSolution {
                u: u_full,
                newton_iterations: iter,
                residual_norm: r_norm,
                load_norm,
            });
        }
    }
    Err(Error::NewtonDiverged { iters: cfg.newton.max_iters, trace })
}

// ---------------------------------------------------------------------------
// Objectives and adjoints
// ---------------------------------------------------------------------------

/// Differentiable objective of the optimization loops.
pub enum Objective<'a> {
    /// Work of the applied loads `(f, u) + (g, u)_Gn`.
    Compliance,
    /// Potential energy of the state: `1/2 a(u,u) + int j(u_t) - loads(u)`.
    /// Self-adjoint: the adjoint state vanishes identically.
    Energy,
    /// User-supplied functional with its u-derivative as a full covector.
    General {
        value: &'a dyn Fn(&Mesh, &[f64]) -> f64,
        gradient: &'a dyn Fn(&Mesh, &[f64]) -> Vec<f64>,
    },
}

/// Closed set of objectives selectable from a run configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveKind {
    Compliance,
    Energy,
}

impl ObjectiveKind {
    pub fn as_objective(self) -> Objective<'static> {
        match self {
            ObjectiveKind::Compliance => Objective::Compliance,
            ObjectiveKind::Energy => Objective::Energy,
        }
    }
}

/// Value of the objective at the converged state.
pub fn evaluate_objective(
    mesh: &Mesh,
    cfg: &StateConfig,
    obj: &Objective,
    u: &[f64],
) -> Result<f64> {
    match obj {
        Objective::Compliance => {
            let op = StateOperator::new(mesh, cfg)?;
            Ok(op.load.iter().zip(u).map(|(l, ui)| l * ui).sum())
        }
        Objective::Energy => {
            let op = StateOperator::new(mesh, cfg)?;
            let elastic = elastic_energy(mesh, &cfg.elasticity, cfg.stiffness_coeff.as_deref(), u);
            let dissipation = contact_dissipation(mesh, &cfg.friction, u);
            let work: f64 = op.load.iter().zip(u).map(|(l, ui)| l * ui).sum();
            Ok(elastic + dissipation - work)
        }
        Objective::General { value, .. } => Ok(value(mesh, u)),
    }
}

/// Right-hand side of the adjoint problem, `-dJ/du`, as a full covector.
/// For the energy objective this is the negative state residual, which
/// vanishes at convergence — exposed so callers can verify it.
pub fn adjoint_rhs(mesh: &Mesh, cfg: &StateConfig, obj: &Objective, u: &[f64]) -> Result<Vec<f64>> {
    match obj {
        Objective::Compliance => {
            let op = StateOperator::new(mesh, cfg)?;
            Ok(op.load.iter().map(|l| -l).collect())
        }
        Objective::Energy => {
            let op = StateOperator::new(mesh, cfg)?;
            let k = op.stiffness.to_csr();
            let mut r = k.matvec(u);
            contact_residual(mesh, &cfg.friction, u, &mut r);
            for (ri, l) in r.iter_mut().zip(&op.load) {
                *ri -= l;
            }
            Ok(r.iter().map(|x| -x).collect())
        }
        Objective::General { gradient, .. } => Ok(gradient(mesh, u).iter().map(|g| -g).collect()),
    }
}

/// Solve the adjoint problem at the converged state: the exact tangent
/// (reassembled at `u`) against `-dJ/du`.  The energy objective is
/// self-adjoint and returns zero without a linear solve.
pub fn solve_adjoint(
    mesh: &Mesh,
    cfg: &StateConfig,
    obj: &Objective,
    u: &[f64],
) -> Result<Vec<f64>> {
    if matches!(obj, Objective::Energy) {
        return Ok(vec![0.0; u.len()]);
    }
    let op = StateOperator::new(mesh, cfg)?;
    let rhs_full = adjoint_rhs(mesh, cfg, obj, u)?;
    let solver = op.factor_tangent(mesh, cfg, u)?;
    let p_red = solver.solve(&op.dofs.restrict(&rhs_full))?;
    Ok(op.dofs.expand(&p_red))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate, BoundaryRule, BoundaryTag, DomainKind, DomainSpec, Side};

    fn contact_strip(h: f64) -> Mesh {
        generate(&DomainSpec {
            kind: DomainKind::Rectangle { width: 2.0, height: 1.0 },
            h,
            rules: vec![
                BoundaryRule { side: Side::Left, span: None, tag: BoundaryTag::Dirichlet },
                BoundaryRule { side: Side::Bottom, span: Some((0.8, 1.2)), tag: BoundaryTag::Contact },
                BoundaryRule { side: Side::Right, span: Some((0.44, 0.56)), tag: BoundaryTag::Neumann },
            ],
        })
        .unwrap()
    }

    fn friction_config() -> StateConfig {
        StateConfig {
            elasticity: Elasticity::new(1.0, 0.3).unwrap(),
            friction: FrictionParams::new(4e-3, 2e-3, 100.0, 1e-3).unwrap(),
            body_force: [0.0, 0.0],
            traction: [0.0, -0.3],
            stiffness_coeff: None,
            newton: NewtonParams::default(),
        }
    }

    #[test]
    fn zero_loads_solve_in_zero_iterations() {
        let mesh = contact_strip(0.2);
        let mut cfg = friction_config();
        cfg.traction = [0.0, 0.0];
        let sol = solve_state(&mesh, &cfg, None).unwrap();
        assert_eq!(sol.newton_iterations, 0);
        assert!(sol.u.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn frictionless_problem_converges_in_one_iteration() {
        let mesh = contact_strip(0.2);
        let mut cfg = friction_config();
        cfg.friction = FrictionParams::zero();
        let sol = solve_state(&mesh, &cfg, None).unwrap();
        assert_eq!(sol.newton_iterations, 1);
        assert!(sol.residual_norm <= 1e-10 * sol.load_norm);
        assert!(sol.u.iter().any(|&v| v != 0.0));
    }

    #[test]
    fn friction_newton_converges_and_respects_coulomb_bound() {
        let mesh = contact_strip(0.2);
        let cfg = friction_config();
        let sol = solve_state(&mesh, &cfg, None).unwrap();
        assert!(sol.newton_iterations >= 1);
        assert!(sol.newton_iterations <= 20, "took {} iterations", sol.newton_iterations);
        assert!(sol.residual_norm <= 1e-10 * sol.load_norm);
        // tangential traction bounded by the static friction bound everywhere
        for e in &mesh.boundary {
            if e.tag != BoundaryTag::Contact {
                continue;
            }
            let axis = crate::fem::contact_tangent_axis(&mesh, e.a, e.b);
            for v in [e.a, e.b] {
                let slip = sol.u[2 * v + axis];
                assert!(cfg.friction.dj(slip).abs() <= cfg.friction.static_bound + 1e-15);
            }
        }
    }

    #[test]
    fn converged_state_is_a_stationary_point_of_the_energy() {
        // independent check: finite differences of the discrete energy
        // functional vanish at the Newton solution
        let mesh = contact_strip(0.2);
        let mut cfg = friction_config();
        cfg.newton.tol_rel = 1e-13;
        let sol = solve_state(&mesh, &cfg, None).unwrap();
        let op = StateOperator::new(&mesh, &cfg).unwrap();
        let energy = |u_red: &[f64]| -> f64 {
            let u = op.dofs.expand(u_red);
            let elastic = elastic_energy(&mesh, &cfg.elasticity, None, &u);
            let dissipation = contact_dissipation(&mesh, &cfg.friction, &u);
            let work: f64 = op.load.iter().zip(&u).map(|(l, ui)| l * ui).sum();
            elastic + dissipation - work
        };
        let u_red = op.dofs.restrict(&sol.u);
        let e0 = energy(&u_red);
        let h = 1e-6;
        let mut grad_inf: f64 = 0.0;
        for i in 0..u_red.len() {
            let mut up = u_red.clone();
            up[i] += h;
            let mut dn = u_red.clone();
            dn[i] -= h;
            grad_inf = grad_inf.max(((energy(&up) - energy(&dn)) / (2.0 * h)).abs());
        }
        assert!(
            grad_inf < 1e-8 * (1.0 + e0.abs()),
            "finite-difference gradient {grad_inf} at the solution"
        );
    }

    #[test]
    fn warm_start_does_not_increase_iterations() {
        let mesh = contact_strip(0.2);
        let cfg = friction_config();
        let cold = solve_state(&mesh, &cfg, None).unwrap();
        let mut nudged = cfg.clone();
        nudged.traction = [0.0, -0.303];
        let warm = solve_state(&mesh, &nudged, Some(&cold.u)).unwrap();
        let cold2 = solve_state(&mesh, &nudged, None).unwrap();
        assert!(
            warm.newton_iterations <= cold2.newton_iterations,
            "warm {} vs cold {}",
            warm.newton_iterations,
            cold2.newton_iterations
        );
        for (a, b) in warm.u.iter().zip(&cold2.u) {
            assert!((a - b).abs() < 1e-8, "warm and cold solutions must agree");
        }
    }

    #[test]
    fn stronger_friction_reduces_slip() {
        let mesh = contact_strip(0.2);
        let mut weak = friction_config();
        weak.friction = FrictionParams::zero();
        let mut strong = friction_config();
        strong.friction = FrictionParams::new(4e-2, 2e-2, 100.0, 1e-3).unwrap();
        let slip_max = |cfg: &StateConfig| -> f64 {
            let sol = solve_state(&mesh, cfg, None).unwrap();
            let mut m: f64 = 0.0;
            for e in &mesh.boundary {
                if e.tag == BoundaryTag::Contact {
                    let axis = crate::fem::contact_tangent_axis(&mesh, e.a, e.b);
                    m = m.max(sol.u[2 * e.a + axis].abs()).max(sol.u[2 * e.b + axis].abs());
                }
            }
            m
        };
        let weak_slip = slip_max(&weak);
        let strong_slip = slip_max(&strong);
        assert!(
            strong_slip < weak_slip,
            "slip with friction {strong_slip} vs frictionless {weak_slip}"
        );
    }

    #[test]
    fn exhausted_iteration_budget_reports_divergence_with_trace() {
        let mesh = contact_strip(0.2);
        let mut cfg = friction_config();
        cfg.newton.max_iters = 0;
        match solve_state(&mesh, &cfg, None) {
            Err(Error::NewtonDiverged { iters: 0, trace }) => {
                assert_eq!(trace.len(), 1);
                assert!(trace[0] > 0.0);
            }
            other => panic!("expected divergence, got {:?}", other.map(|s| s.newton_iterations)),
        }
    }

    #[test]
    fn compliance_adjoint_is_negative_state_when_frictionless() {
        let mesh = contact_strip(0.2);
        let mut cfg = friction_config();
        cfg.friction = FrictionParams::zero();
        let sol = solve_state(&mesh, &cfg, None).unwrap();
        let p = solve_adjoint(&mesh, &cfg, &Objective::Compliance, &sol.u).unwrap();
        for (pi, ui) in p.iter().zip(&sol.u) {
            assert!((pi + ui).abs() < 1e-9, "p {pi} vs -u {}", -ui);
        }
    }

    #[test]
    fn energy_adjoint_vanishes_and_its_rhs_is_consistent() {
        let mesh = contact_strip(0.2);
        let mut cfg = friction_config();
        cfg.newton.tol_rel = 1e-14;
        let sol = solve_state(&mesh, &cfg, None).unwrap();
        let p = solve_adjoint(&mesh, &cfg, &Objective::Energy, &sol.u).unwrap();
        assert!(p.iter().all(|&v| v == 0.0));
        let rhs = adjoint_rhs(&mesh, &cfg, &Objective::Energy, &sol.u).unwrap();
        let op = StateOperator::new(&mesh, &cfg).unwrap();
        let free_norm = norm(&op.dofs.restrict(&rhs));
        assert!(free_norm < 1e-11 * sol.load_norm, "energy adjoint rhs norm {free_norm}");
    }

    #[test]
    fn general_objective_reproduces_compliance() {
        let mesh = contact_strip(0.2);
        let cfg = friction_config();
        let sol = solve_state(&mesh, &cfg, None).unwrap();
        let op = StateOperator::new(&mesh, &cfg).unwrap();
        let load = op.load.clone();
        let load2 = op.load.clone();
        let value = move |_: &Mesh, u: &[f64]| -> f64 {
            load.iter().zip(u).map(|(l, ui)| l * ui).sum()
        };
        let gradient = move |_: &Mesh, _: &[f64]| -> Vec<f64> { load2.clone() };
        let general = Objective::General { value: &value, gradient: &gradient };
        let via_general = evaluate_objective(&mesh, &cfg, &general, &sol.u).unwrap();
        let via_builtin = evaluate_objective(&mesh, &cfg, &Objective::Compliance, &sol.u).unwrap();
        assert!((via_general - via_builtin).abs() < 1e-14 * via_builtin.abs());
        let p1 = solve_adjoint(&mesh, &cfg, &general, &sol.u).unwrap();
        let p2 = solve_adjoint(&mesh, &cfg, &Objective::Compliance, &sol.u).unwrap();
        for (a, b) in p1.iter().zip(&p2) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn compliance_equals_twice_energy_for_frictionless_linear_case() {
        // with f = 0 on a linear problem, compliance = 2 * elastic energy
        let mesh = contact_strip(0.2);
        let mut cfg = friction_config();
        cfg.friction = FrictionParams::zero();
        let sol = solve_state(&mesh, &cfg, None).unwrap();
        let compliance = evaluate_objective(&mesh, &cfg, &Objective::Compliance, &sol.u).unwrap();
        let elastic = elastic_energy(&mesh, &cfg.elasticity, None, &sol.u);
        assert!(
            (compliance - 2.0 * elastic).abs() < 1e-10 * compliance.abs(),
            "compliance {compliance} vs twice energy {}",
            2.0 * elastic
        );
    }
}

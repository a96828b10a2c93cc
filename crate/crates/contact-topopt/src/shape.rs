//! Boundary-variation shape optimization.
//!
//! The moving design is the mesh itself: each outer iteration solves the
//! contact state, assembles the shape derivative of the augmented objective,
//! smooths it into an H¹ velocity field that vanishes on the fixed
//! (Dirichlet/Neumann/Contact) boundary, and advects the vertices.  A volume
//! equality constraint is handled by an augmented-Lagrangian multiplier pair
//! updated with an Uzawa step.
//!
//! Two derivative assemblies are provided:
//!  * a distributed (volume) form, exact for the self-adjoint potential-energy
//!    objective and free of boundary-curvature terms, and
//!  * a boundary-density form for compliance-type objectives whose own
//!    integrand vanishes on the moving (Free) boundary.

use crate::fem::{
    assemble_scalar_laplacian, assemble_scalar_mass, flow_constraints, shape_gradients,
    triangle_displacement_gradient, triangle_strain, DofMap, SpdSolver,
};
use crate::history::{History, IterationRecord};
use crate::material::Elasticity;
use crate::mesh::{
    cell_to_vertex_average, generate, move_vertices, smooth_free_boundary, smooth_interior,
    BoundaryTag, DomainSpec, Mesh,
};
use crate::solver::{
    evaluate_objective, solve_adjoint, solve_state, Objective, ObjectiveKind, StateConfig,
    StateSolution,
};
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Shape derivative assemblies
// ---------------------------------------------------------------------------

/// Distributed (volume-form) shape derivative of the potential-energy
/// objective at the converged state `u`, for a constant body force `f`:
///
///   V  ↦  ∫ [(½ σ(u):ε(u) − f·u) I − (Du)ᵀ σ(u)] : DV
///
/// returned as a nodal covector `g` with `dJ(V) = Σ g[2i+c]·V_i[c]`.  All
/// integrands are polynomial on each triangle, so the assembly is exact.
pub fn shape_derivative_distributed(
    mesh: &Mesh,
    elast: &Elasticity,
    u: &[f64],
    f: [f64; 2],
) -> Vec<f64> {
    shape_derivative_distributed_adjoint(mesh, elast, u, None, f)
}

/// Generalized distributed shape derivative including an adjoint state `p`
/// (Lagrangian transport of the state equation).  With `p = None` (or `p`
/// identically zero, as for the self-adjoint energy objective) this reduces
/// exactly to [`shape_derivative_distributed`].
pub fn shape_derivative_distributed_adjoint(
    mesh: &Mesh,
    elast: &Elasticity,
    u: &[f64],
    p: Option<&[f64]>,
    f: [f64; 2],
) -> Vec<f64> {
    let mut g = vec![0.0; 2 * mesh.vertex_count()];
    for t in 0..mesh.triangle_count() {
        let area = mesh.triangle_area(t);
        let tri = mesh.triangles[t];
        let grads = shape_gradients(mesh, t);

        let eps_u = triangle_strain(mesh, t, u);
        let sig_u = elast.stress(&eps_u);
        let sig = [[sig_u.xx, sig_u.xy], [sig_u.xy, sig_u.yy]];
        let du = triangle_displacement_gradient(mesh, t, u);
        // Centroid value of the linear field f·u.
        let mut fu = 0.0;
        for &v in &tri {
            fu += (f[0] * u[2 * v] + f[1] * u[2 * v + 1]) / 3.0;
        }

        // A : DV is the integrand; A[c][d] multiplies dV_c/dx_d.
        let w = 0.5 * sig_u.ddot(&eps_u);
        let mut a = [[0.0; 2]; 2];
        for c in 0..2 {
            a[c][c] = w - fu;
            for d in 0..2 {
                for k in 0..2 {
                    a[c][d] -= du[k][c] * sig[k][d];
                }
            }
        }

        if let Some(p) = p {
            let eps_p = triangle_strain(mesh, t, p);
            let sig_p = elast.stress(&eps_p);
            let sp = [[sig_p.xx, sig_p.xy], [sig_p.xy, sig_p.yy]];
            let dp = triangle_displacement_gradient(mesh, t, p);
            let mut fp = 0.0;
            for &v in &tri {
                fp += (f[0] * p[2 * v] + f[1] * p[2 * v + 1]) / 3.0;
            }
            let cross = sig_u.ddot(&eps_p);
            for c in 0..2 {
                a[c][c] += cross - fp;
                for d in 0..2 {
                    for k in 0..2 {
                        a[c][d] -= dp[k][c] * sig[k][d] + du[k][c] * sp[k][d];
                    }
                }
            }
        }

        for (k, &v) in tri.iter().enumerate() {
            for c in 0..2 {
                g[2 * v + c] += area * (a[c][0] * grads[k][0] + a[c][1] * grads[k][1]);
            }
        }
    }
    g
}

/// Distributed shape derivative of a traction objective such as compliance.
/// The objective itself is a boundary integral over the (fixed) loaded
/// boundary, so for interior velocity fields only the transported state
/// equation contributes:
///
///   V  ↦  ∫ [(σ(u):ε(p) − f·p) I − (Dp)ᵀ σ(u) − (Du)ᵀ σ(p)] : DV
///
/// where `p` solves the adjoint problem of the objective.
pub fn shape_derivative_compliance(
    mesh: &Mesh,
    elast: &Elasticity,
    u: &[f64],
    p: &[f64],
    f: [f64; 2],
) -> Vec<f64> {
    let mut g = vec![0.0; 2 * mesh.vertex_count()];
    for t in 0..mesh.triangle_count() {
        let area = mesh.triangle_area(t);
        let tri = mesh.triangles[t];
        let grads = shape_gradients(mesh, t);

        let eps_u = triangle_strain(mesh, t, u);
        let sig_u = elast.stress(&eps_u);
        let sig = [[sig_u.xx, sig_u.xy], [sig_u.xy, sig_u.yy]];
        let du = triangle_displacement_gradient(mesh, t, u);

        let eps_p = triangle_strain(mesh, t, p);
        let sig_p = elast.stress(&eps_p);
        let sp = [[sig_p.xx, sig_p.xy], [sig_p.xy, sig_p.yy]];
        let dp = triangle_displacement_gradient(mesh, t, p);
        // Centroid value of the linear field f·p.
        let mut fp = 0.0;
        for &v in &tri {
            fp += (f[0] * p[2 * v] + f[1] * p[2 * v + 1]) / 3.0;
        }

        let cross = sig_u.ddot(&eps_p);
        let mut a = [[0.0; 2]; 2];
        for c in 0..2 {
            a[c][c] = cross - fp;
            for d in 0..2 {
                for k in 0..2 {
                    a[c][d] -= dp[k][c] * sig[k][d] + du[k][c] * sp[k][d];
                }
            }
        }

        for (k, &v) in tri.iter().enumerate() {
            for c in 0..2 {
                g[2 * v + c] += area * (a[c][0] * grads[k][0] + a[c][1] * grads[k][1]);
            }
        }
    }
    g
}

/// Covector of the domain-volume derivative: `dVol(V) = ∫ div V`.
pub fn volume_derivative_covector(mesh: &Mesh) -> Vec<f64> {
    let mut g = vec![0.0; 2 * mesh.vertex_count()];
    for t in 0..mesh.triangle_count() {
        let area = mesh.triangle_area(t);
        let grads = shape_gradients(mesh, t);
        for (k, &v) in mesh.triangles[t].iter().enumerate() {
            for c in 0..2 {
                g[2 * v + c] += area * grads[k][c];
            }
        }
    }
    g
}

/// Pointwise shape-gradient density of the augmented objective on the moving
/// (Free) boundary:
///
///   g = m(u) + ℂε(u):ε(p) − f·p + ℓ + γ(Vol − C)
///
/// returned per vertex (zero away from Free-boundary vertices).  Per-triangle
/// quantities are averaged onto vertices with area weights.  Compliance has
/// no domain integrand (`m ≡ 0`); the energy objective contributes
/// `m = ½σ(u):ε(u) − f·u` and is used with its vanishing adjoint.  Objectives
/// with a boundary integrand supported on the moving boundary would need
/// curvature terms that a faceted P1 boundary cannot carry; user-supplied
/// functionals are rejected because their pointwise integrand is unknown.
#[allow(clippy::too_many_arguments)]
pub fn shape_gradient_density_boundary(
    mesh: &Mesh,
    elast: &Elasticity,
    u: &[f64],
    p: &[f64],
    f: [f64; 2],
    ell: f64,
    gamma: f64,
    target_volume: f64,
    kind: &Objective,
) -> Result<Vec<f64>> {
    let with_energy_density = match kind {
        Objective::Compliance => false,
        Objective::Energy => true,
        Objective::General { .. } => {
            return Err(Error::Unsupported(
                "boundary shape-gradient density needs a pointwise objective integrand; \
                 only the compliance and energy objectives provide one away from the \
                 moving boundary"
                    .into(),
            ))
        }
    };

    let nt = mesh.triangle_count();
    let mut cell = vec![0.0; nt];
    for (t, c) in cell.iter_mut().enumerate() {
        let eps_u = triangle_strain(mesh, t, u);
        let sig_u = elast.stress(&eps_u);
        let eps_p = triangle_strain(mesh, t, p);
        *c = sig_u.ddot(&eps_p);
        if with_energy_density {
            *c += 0.5 * sig_u.ddot(&eps_u);
        }
    }
    let nodal = cell_to_vertex_average(mesh, &cell);

    let constant = ell + gamma * (mesh.area() - target_volume);
    let free = mesh.tagged_vertex_mask(&[BoundaryTag::Free]);
    let mut density = vec![0.0; mesh.vertex_count()];
    for (i, d) in density.iter_mut().enumerate() {
        if free[i] {
            *d = nodal[i] - (f[0] * p[2 * i] + f[1] * p[2 * i + 1]) + constant;
            if with_energy_density {
                *d -= f[0] * u[2 * i] + f[1] * u[2 * i + 1];
            }
        }
    }
    Ok(density)
}

/// Covector of `V ↦ ∫_Γ g (V·ν)` over the Free boundary, with `g` and `V`
/// piecewise linear on each edge (exact two-node quadrature).
pub fn boundary_density_covector(mesh: &Mesh, density: &[f64]) -> Vec<f64> {
    let mut cov = vec![0.0; 2 * mesh.vertex_count()];
    for e in &mesh.boundary {
        if e.tag != BoundaryTag::Free {
            continue;
        }
        let len = mesh.edge_length(e);
        let nu = mesh.edge_outward_normal(e);
        let (gi, gj) = (density[e.a], density[e.b]);
        for c in 0..2 {
            cov[2 * e.a + c] += nu[c] * len * (gi / 3.0 + gj / 6.0);
            cov[2 * e.b + c] += nu[c] * len * (gj / 3.0 + gi / 6.0);
        }
    }
    cov
}

// ---------------------------------------------------------------------------
// H¹ velocity extension
// ---------------------------------------------------------------------------

/// Smooth the descent direction: solve, componentwise,
///
///   ∫ ω D𝒱:DV + 𝒱·V = −dJ(V)   for all V vanishing on Γ_D ∪ Γ_N ∪ Γ_C,
///
/// with `dJ` given as a nodal covector.  The returned per-vertex field is
/// exactly zero on the fixed boundary, and satisfies the descent identity
/// `dJ(𝒱) = −(ω‖D𝒱‖² + ‖𝒱‖²)`.
pub fn solve_h1_flow(mesh: &Mesh, dj: &[f64], omega: f64) -> Result<Vec<[f64; 2]>> {
    let n = mesh.vertex_count();
    assert_eq!(dj.len(), 2 * n, "covector size mismatch");
    let mut a = assemble_scalar_laplacian(mesh);
    for e in &mut a.entries {
        e.2 *= omega;
    }
    a.add_coo(&assemble_scalar_mass(mesh));

    // The vector constraints fix both components of every fixed-boundary
    // vertex, so one scalar elimination pattern serves both solves.
    let vector_constraints = flow_constraints(mesh);
    let scalar: Vec<Option<f64>> = (0..n).map(|i| vector_constraints[2 * i]).collect();
    let dofs = DofMap::from_constraints(scalar);

    let rhs_x: Vec<f64> = (0..n).map(|i| -dj[2 * i]).collect();
    let rhs_y: Vec<f64> = (0..n).map(|i| -dj[2 * i + 1]).collect();
    let reduced = dofs.reduce_matrix(&a);
    let solver = SpdSolver::new(&reduced)?;
    let vx = dofs.expand(&solver.solve(&dofs.restrict(&rhs_x))?);
    let vy = dofs.expand(&solver.solve(&dofs.restrict(&rhs_y))?);
    Ok(vx.into_iter().zip(vy).map(|(x, y)| [x, y]).collect())
}

/// `ω‖D𝒱‖² + ‖𝒱‖²` of a per-vertex field (Galerkin energy of the flow).
pub fn h1_energy(mesh: &Mesh, omega: f64, v: &[[f64; 2]]) -> f64 {
    let k = assemble_scalar_laplacian(mesh).to_csr();
    let m = assemble_scalar_mass(mesh).to_csr();
    let mut total = 0.0;
    for c in 0..2 {
        let comp: Vec<f64> = v.iter().map(|p| p[c]).collect();
        let kx = k.matvec(&comp);
        let mx = m.matvec(&comp);
        for ((vi, ki), mi) in comp.iter().zip(&kx).zip(&mx) {
            total += vi * (omega * ki + mi);
        }
    }
    total
}

// ---------------------------------------------------------------------------
// Volume multipliers
// ---------------------------------------------------------------------------

/// One Uzawa step of the augmented-Lagrangian volume constraint:
/// `ℓ′ = ℓ + γ(vol − C)`, `γ′ = min(ρ_γ·γ, γ_max)`.
pub fn uzawa_update(
    ell: f64,
    gamma: f64,
    vol: f64,
    target: f64,
    rho_gamma: f64,
    gamma_max: f64,
) -> (f64, f64) {
    (ell + gamma * (vol - target), (rho_gamma * gamma).min(gamma_max))
}

// ---------------------------------------------------------------------------
// Optimization loop
// ---------------------------------------------------------------------------

/// Full setup of a shape-optimization run.
#[derive(Clone)]
pub struct ShapeConfig {
    pub domain: DomainSpec,
    pub state: StateConfig,
    pub objective: ObjectiveKind,
    /// Initial Lagrange multiplier ℓ₀.
    pub ell0: f64,
    /// Initial penalty factor γ₀ (> 0).
    pub gamma0: f64,
    /// Penalty growth factor ρ_γ (> 1).
    pub rho_gamma: f64,
    /// Cap on the penalty factor.
    pub gamma_max: f64,
    /// Target volume C (absolute).
    pub target_volume: f64,
    /// Relative-objective-change stopping tolerance.
    pub tol: f64,
    /// Maximum outer iterations N_m.
    pub max_iters: usize,
    /// H¹ flow smoothing weight ω.
    pub omega: f64,
    /// Area of the full design domain (for the volume-fraction column).
    pub design_area: f64,
}

/// Why the loop ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Relative objective change below tolerance with the volume constraint
    /// met to 1%.
    Converged,
    /// Iteration cap reached.
    MaxIters,
    /// The smoothed velocity vanished identically.
    StationaryVelocity,
}

/// Final design and diagnostics of a completed run.
pub struct ShapeOutcome {
    pub mesh: Mesh,
    pub state: StateSolution,
    pub ell: f64,
    pub gamma: f64,
    pub stop: StopReason,
}

const STEP_FACTOR: f64 = 5e-3;
const MAX_HALVINGS: usize = 5;
/// Relative objective increase tolerated before a step is rejected.
const REJECT_SLACK: f64 = 0.01;
const SCALE_MIN: f64 = 0.25;
const SCALE_MAX: f64 = 50.0;
const SMOOTH_EVERY: usize = 5;
const QUALITY_FLOOR: f64 = 0.1;
/// A trial step that pushes the worst triangle quality below this value (and
/// below its pre-step value) is rejected: slivers this flat make the
/// stiffness matrix numerically indefinite long before they invert.
const QUALITY_REJECT: f64 = 0.05;
/// Volume trust band, as a fraction of the target volume: one step may not
/// increase the distance to the volume target by more than this.  Multiplier
/// corrections act over many iterations; without the band an adaptively
/// grown step can overshoot the target far faster than the multipliers can
/// pull it back.
const VOL_TRUST_BAND: f64 = 0.005;

/// Run boundary-variation shape optimization.  History rows are appended to
/// `history` as they are produced (one per iteration, starting with the
/// initial evaluation), so a partial record survives solver failures.
/// `observer` is called with each accepted iterate.
pub fn run_shape_optimization(
    cfg: &ShapeConfig,
    history: &mut History,
    mut observer: impl FnMut(usize, &Mesh, &StateSolution),
) -> Result<ShapeOutcome> {
    assert!(
        cfg.state.stiffness_coeff.is_none(),
        "shape optimization moves the mesh; material interpolation does not apply"
    );
    let objective = cfg.objective.as_objective();
    let mut mesh = generate(&cfg.domain)?;
    let mut ell = cfg.ell0;
    let mut gamma = cfg.gamma0;
    let mut state = solve_state(&mesh, &cfg.state, None)?;
    let mut j = evaluate_objective(&mesh, &cfg.state, &objective, &state.u)?;
    let mut vol = mesh.area();

    history.push(IterationRecord {
        iter: 0,
        objective: j,
        volume: vol,
        volume_fraction: vol / cfg.design_area,
        ell,
        gamma,
        newton_iters: state.newton_iterations,
        wall_ms: 0,
    });
    observer(0, &mesh, &state);

    let mut stop = StopReason::MaxIters;
    let mut step_scale = 1.0_f64;
    if cfg.max_iters == 0 {
        return Ok(ShapeOutcome { mesh, state, ell, gamma, stop });
    }

    for n in 1..=cfg.max_iters {
        // Descent covector of the augmented objective.
        let cov = match cfg.objective {
            ObjectiveKind::Energy => {
                // Self-adjoint: distributed derivative of the energy plus the
                // volume-penalty direction.
                let mut cov =
                    shape_derivative_distributed(&mesh, &cfg.state.elasticity, &state.u, cfg.state.body_force);
                let vol_cov = volume_derivative_covector(&mesh);
                let mult = ell + gamma * (vol - cfg.target_volume);
                for (c, v) in cov.iter_mut().zip(&vol_cov) {
                    *c += mult * v;
                }
                cov
            }
            ObjectiveKind::Compliance => {
                let p = solve_adjoint(&mesh, &cfg.state, &objective, &state.u)?;
                let density = shape_gradient_density_boundary(
                    &mesh,
                    &cfg.state.elasticity,
                    &state.u,
                    &p,
                    cfg.state.body_force,
                    ell,
                    gamma,
                    cfg.target_volume,
                    &objective,
                )?;
                boundary_density_covector(&mesh, &density)
            }
        };

        let velocity = solve_h1_flow(&mesh, &cov, cfg.omega)?;
        let vmax = velocity.iter().map(|v| v[0].abs().max(v[1].abs())).fold(0.0, f64::max);
        if vmax == 0.0 {
            stop = StopReason::StationaryVelocity;
            break;
        }

        // Trial steps, halving up to 5 times.  A trial is rejected when it
        // would invert a triangle, collapse the worst triangle quality below
        // the floor, break the state solve, or raise the augmented objective
        // (with the current multipliers) by more than 1%.  An
        // objective-rejected final trial is accepted anyway so multiplier
        // corrections can still make progress; a geometrically or
        // numerically rejected final trial falls back to a pure maintenance
        // iteration (zero step, forced smoothing) instead.
        let aug = j + ell * (vol - cfg.target_volume)
            + 0.5 * gamma * (vol - cfg.target_volume) * (vol - cfg.target_volume);
        let tau0 = step_scale * STEP_FACTOR * mesh.h_max() / vmax;
        let quality_now = mesh.quality();
        let mut newton_spent = 0usize;
        let mut halvings = 0usize;
        let accepted = loop {
            let last = halvings >= MAX_HALVINGS;
            let tau = tau0 * 0.5f64.powi(halvings as i32);
            match move_vertices(&mesh, &velocity, tau) {
                Ok(trial_mesh) => {
                    let q = trial_mesh.quality();
                    if q < QUALITY_REJECT && q < quality_now {
                        if last {
                            break None;
                        }
                    } else {
                        match solve_state(&trial_mesh, &cfg.state, Some(&state.u)) {
                            Ok(trial_state) => {
                                newton_spent += trial_state.newton_iterations;
                                let trial_j = evaluate_objective(
                                    &trial_mesh,
                                    &cfg.state,
                                    &objective,
                                    &trial_state.u,
                                )?;
                                let trial_vol = trial_mesh.area();
                                let dv = trial_vol - cfg.target_volume;
                                let trial_aug = trial_j + ell * dv + 0.5 * gamma * dv * dv;
                                let within_trust = dv.abs()
                                    <= (vol - cfg.target_volume).abs()
                                        + VOL_TRUST_BAND * cfg.target_volume.abs();
                                if (trial_aug <= aug + REJECT_SLACK * aug.abs() && within_trust)
                                    || last
                                {
                                    break Some((trial_mesh, trial_state, trial_j, trial_vol));
                                }
                            }
                            Err(Error::Solve(_)) | Err(Error::NewtonDiverged { .. }) => {
                                if last {
                                    break None;
                                }
                            }
                            Err(other) => return Err(other),
                        }
                    }
                }
                Err(Error::StepRejected { .. }) => {
                    if last {
                        break None;
                    }
                }
                Err(other) => return Err(other),
            }
            halvings += 1;
        };
        let stalled = accepted.is_none();
        let prev_j = j;
        if let Some((new_mesh, new_state, new_j, new_vol)) = accepted {
            mesh = new_mesh;
            state = new_state;
            j = new_j;
            vol = new_vol;
        }
        step_scale = if halvings == 0 {
            (step_scale * 1.5).min(SCALE_MAX)
        } else {
            (step_scale * 0.5f64.powi(halvings as i32)).max(SCALE_MIN)
        };

        // Periodic mesh maintenance (forced after a stalled step): slide
        // free-boundary vertices toward even spacing, relax the interior,
        // and re-solve so the recorded objective always belongs to the
        // current mesh.
        if stalled || n % SMOOTH_EVERY == 0 || mesh.quality() < QUALITY_FLOOR {
            mesh = smooth_interior(&smooth_free_boundary(&mesh, 2), 2);
            state = solve_state(&mesh, &cfg.state, Some(&state.u))?;
            newton_spent += state.newton_iterations;
            j = evaluate_objective(&mesh, &cfg.state, &objective, &state.u)?;
            vol = mesh.area();
        }

        let (new_ell, new_gamma) =
            uzawa_update(ell, gamma, vol, cfg.target_volume, cfg.rho_gamma, cfg.gamma_max);
        ell = new_ell;
        gamma = new_gamma;

        history.push(IterationRecord {
            iter: n,
            objective: j,
            volume: vol,
            volume_fraction: vol / cfg.design_area,
            ell,
            gamma,
            newton_iters: newton_spent,
            wall_ms: 0,
        });
        observer(n, &mesh, &state);

        let rel = if prev_j != 0.0 { ((j - prev_j) / prev_j).abs() } else { j.abs() };
        let feasible = (vol - cfg.target_volume).abs() <= 0.01 * cfg.target_volume.abs();
        if rel < cfg.tol && feasible {
            stop = StopReason::Converged;
            break;
        }
    }

    Ok(ShapeOutcome { mesh, state, ell, gamma, stop })
}

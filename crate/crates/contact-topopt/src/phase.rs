//! Phase-field topology optimization on a fixed design mesh.
//!
//! The design is a nodal scalar field `φ` interpolating between void and
//! material through an ersatz stiffness coefficient.  Two evolutions are
//! implemented:
//!
//! * **Method I** (`run_pf1`): a semi-implicit Allen–Cahn step with a tilted
//!   double well.  `φ` lives in `[0, 1]`; a nodewise implicit/explicit branch
//!   rule keeps the linear system positive definite and a final projection
//!   clamps the box exactly.
//! * **Method II** (`run_pf2`): a fourth-order flow with a Willmore-type
//!   curvature regularizer, discretized through the auxiliary field
//!   `β = W′(φ) − Δφ` and reduced to one symmetric positive-definite solve
//!   per step.  `φ` has wells at `±1` and is not box-constrained.
//!
//! Both outer loops follow the same pattern as the shape loop: state solve on
//! the current coefficient, adjoint, sensitivity, a fixed number of inner
//! field steps, then an Uzawa update of the volume multipliers.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::fem::{
    assemble_scalar_laplacian, gram_scaled, lumped_scalar_mass, triangle_strain, Coo, SpdSolver,
};
use crate::history::{History, IterationRecord};
use crate::material::Elasticity;
use crate::mesh::{cell_to_vertex_average, generate, DomainSpec, Mesh};
use crate::solver::{
    evaluate_objective, solve_adjoint, solve_state, ObjectiveKind, StateConfig, StateSolution,
};
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Material interpolation
// ---------------------------------------------------------------------------

/// Power-law stiffness interpolation with a floor: `k(φ) = max(φ^p, k_min)`.
#[derive(Debug, Clone, Copy)]
pub struct ErsatzInterp {
    pub exponent: i32,
    pub floor: f64,
}

impl Default for ErsatzInterp {
    fn default() -> Self {
        ErsatzInterp { exponent: 3, floor: 1e-5 }
    }
}

impl ErsatzInterp {
    pub fn value(&self, phi: f64) -> f64 {
        phi.powi(self.exponent).max(self.floor)
    }

    /// Derivative of `value`; zero on the flat floor region.
    pub fn derivative(&self, phi: f64) -> f64 {
        if phi.powi(self.exponent) > self.floor {
            self.exponent as f64 * phi.powi(self.exponent - 1)
        } else {
            0.0
        }
    }

    /// Method-II interpolation on wells `±1`:
    /// `ρ(φ) = k_min + (1 − k_min)·((φ+1)/2)^p`, monotone with
    /// `ρ(−1) = k_min` and `ρ(1) = 1`.
    pub fn well_value(&self, phi: f64) -> f64 {
        let s = ((phi + 1.0) / 2.0).clamp(0.0, 1.0);
        self.floor + (1.0 - self.floor) * s.powi(self.exponent)
    }

    pub fn well_derivative(&self, phi: f64) -> f64 {
        let s = ((phi + 1.0) / 2.0).clamp(0.0, 1.0);
        (1.0 - self.floor) * 0.5 * self.exponent as f64 * s.powi(self.exponent - 1)
    }
}

/// Per-triangle stiffness coefficient `k(φ̄)` from the vertex average `φ̄`.
pub fn stiffness_coeff(interp: &ErsatzInterp, mesh: &Mesh, phi: &[f64]) -> Vec<f64> {
    mesh.triangles
        .iter()
        .map(|tri| interp.value((phi[tri[0]] + phi[tri[1]] + phi[tri[2]]) / 3.0))
        .collect()
}

/// Per-triangle method-II coefficient `ρ(φ̄)`.
pub fn willmore_coeff(interp: &ErsatzInterp, mesh: &Mesh, phi: &[f64]) -> Vec<f64> {
    mesh.triangles
        .iter()
        .map(|tri| interp.well_value((phi[tri[0]] + phi[tri[1]] + phi[tri[2]]) / 3.0))
        .collect()
}

/// Exact integral of the P1 field `φ` over the mesh.
pub fn field_integral(mesh: &Mesh, phi: &[f64]) -> f64 {
    lumped_scalar_mass(mesh).iter().zip(phi).map(|(m, p)| m * p).sum()
}

/// Per-triangle sensitivity of the augmented objective with respect to `φ`:
/// `k′(φ̄)·ℂε(u):ε(p) + ℓ + γ(∫φ − C)` with the unscaled base elasticity.
#[allow(clippy::too_many_arguments)]
pub fn sensitivity_field(
    interp: &ErsatzInterp,
    mesh: &Mesh,
    phi: &[f64],
    elast: &Elasticity,
    u: &[f64],
    p_adj: &[f64],
    ell: f64,
    gamma: f64,
    target_volume: f64,
) -> Vec<f64> {
    let constant = ell + gamma * (field_integral(mesh, phi) - target_volume);
    (0..mesh.triangle_count())
        .map(|t| {
            let tri = mesh.triangles[t];
            let avg = (phi[tri[0]] + phi[tri[1]] + phi[tri[2]]) / 3.0;
            let eps_u = triangle_strain(mesh, t, u);
            let eps_p = triangle_strain(mesh, t, p_adj);
            interp.derivative(avg) * elast.stress(&eps_u).ddot(&eps_p) + constant
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Method I: semi-implicit Allen–Cahn step
// ---------------------------------------------------------------------------

/// One semi-implicit Allen–Cahn step with the tilted-well reaction
///
///   ∂φ/∂t = κ₁Δφ + y(φ)(1 − φ)φ,
///   y(φ) = φ − ½ − 30η·(sens/‖sens‖_{L²})·(1 − φ)φ,
///
/// zero-Neumann in `φ`.  The reaction is treated nodewise: where `y ≤ 0` the
/// trailing `φ` factor is implicit, where `y > 0` the `(1 − φ)` factor is,
/// which keeps the lumped system diagonal-dominant in both branches.  The
/// result is clamped into `[0, 1]`.  The normalization uses the input field
/// itself, so callers freezing `sens` over several steps freeze the
/// normalization with it; a vanishing `sens` returns `φ` unchanged.
pub fn step_allen_cahn(
    mesh: &Mesh,
    phi: &[f64],
    sens: &[f64],
    dt: f64,
    kappa1: f64,
    eta: f64,
) -> Result<Vec<f64>> {
    assert!(dt > 0.0, "time step must be positive");
    let n = mesh.vertex_count();
    assert_eq!(phi.len(), n);
    assert_eq!(sens.len(), n);

    let lumped = lumped_scalar_mass(mesh);
    let norm2: f64 = lumped.iter().zip(sens).map(|(m, s)| m * s * s).sum();
    if norm2 == 0.0 {
        return Ok(phi.to_vec());
    }
    let norm = norm2.sqrt();

    let mut a = Coo::new(n);
    if kappa1 != 0.0 {
        a = assemble_scalar_laplacian(mesh);
        for e in &mut a.entries {
            e.2 *= kappa1;
        }
    }
    let mut rhs = vec![0.0; n];
    for i in 0..n {
        let g = sens[i] / norm;
        let y = phi[i] - 0.5 - 30.0 * eta * g * (1.0 - phi[i]) * phi[i];
        let (diag, explicit) =
            if y <= 0.0 { (-y * (1.0 - phi[i]), 0.0) } else { (y * phi[i], y * phi[i]) };
        a.add(i, i, lumped[i] * (1.0 / dt + diag));
        rhs[i] = lumped[i] * (phi[i] / dt + explicit);
    }
    let next = SpdSolver::new(&a)?.solve(&rhs)?;
    Ok(next.into_iter().map(|x| x.clamp(0.0, 1.0)).collect())
}

// ---------------------------------------------------------------------------
// Method II: fourth-order step with Willmore regularizer
// ---------------------------------------------------------------------------

/// One step of the fourth-order flow
///
///   ∂φ/∂t = driving + weight·(Δβ − W″(φ)β − (γ_w/2)β),
///   β = W′(φ) − Δφ,   W(φ) = ½(φ² − 1)²,
///
/// zero-Neumann in both `φ` and `β`.  The Laplacians are implicit; `W′`, `W″`
/// and the reaction occurrences of `β` are evaluated at the old field, which
/// lets `β` be eliminated and leaves one symmetric positive-definite system
/// `(M_L/Δt + weight·K M_L⁻¹ K) φ′ = rhs` per step.
pub fn step_willmore(
    mesh: &Mesh,
    phi: &[f64],
    driving: &[f64],
    dt: f64,
    gamma_w: f64,
    weight: f64,
) -> Result<Vec<f64>> {
    assert!(dt > 0.0, "time step must be positive");
    let n = mesh.vertex_count();
    assert_eq!(phi.len(), n);
    assert_eq!(driving.len(), n);

    let k = assemble_scalar_laplacian(mesh);
    let k_csr = k.to_csr();
    let lumped = lumped_scalar_mass(mesh);

    let w1: Vec<f64> = phi.iter().map(|&p| 2.0 * p * (p * p - 1.0)).collect();
    let w2: Vec<f64> = phi.iter().map(|&p| 6.0 * p * p - 2.0).collect();
    let k_phi = k_csr.matvec(phi);
    let beta_old: Vec<f64> =
        (0..n).map(|i| w1[i] + k_phi[i] / lumped[i]).collect();

    let inv_lumped: Vec<f64> = lumped.iter().map(|m| 1.0 / m).collect();
    let mut a = gram_scaled(&k_csr, &inv_lumped);
    for e in &mut a.entries {
        e.2 *= weight;
    }
    for (i, m) in lumped.iter().enumerate() {
        a.add(i, i, m / dt);
    }

    let k_w1 = k_csr.matvec(&w1);
    let rhs: Vec<f64> = (0..n)
        .map(|i| {
            lumped[i]
                * (phi[i] / dt + driving[i]
                    - weight * (w2[i] + 0.5 * gamma_w) * beta_old[i])
                - weight * k_w1[i]
        })
        .collect();
    SpdSolver::new(&a)?.solve(&rhs)
}

// ---------------------------------------------------------------------------
// Outer optimization loops
// ---------------------------------------------------------------------------

/// Initial design field (method-I convention, values in `[0, 1]`; method II
/// maps it onto its `±1` wells).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialPhase {
    /// Independent uniform values in `[0, 1)` from a seeded generator.
    Random { seed: u64 },
    Constant(f64),
}

impl InitialPhase {
    pub(crate) fn build(&self, n: usize) -> Vec<f64> {
        match *self {
            InitialPhase::Random { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..n).map(|_| rng.gen::<f64>()).collect()
            }
            InitialPhase::Constant(v) => vec![v.clamp(0.0, 1.0); n],
        }
    }
}

/// Full setup of a phase-field run (methods I and II and the
/// topological-derivative variant).
#[derive(Clone)]
pub struct PhaseConfig {
    pub domain: DomainSpec,
    /// State problem on the unit coefficient; the interpolated coefficient is
    /// filled in per iteration.
    pub state: StateConfig,
    pub objective: ObjectiveKind,
    pub interp: ErsatzInterp,
    pub ell0: f64,
    pub gamma0: f64,
    pub rho_gamma: f64,
    pub gamma_max: f64,
    /// Target material volume C (absolute).
    pub target_volume: f64,
    pub tol: f64,
    /// Outer iteration cap N_m.
    pub max_iters: usize,
    /// Inner field steps per outer iteration.
    pub inner_steps: usize,
    /// Diffusion coefficient κ₁ of the Allen–Cahn step.
    pub kappa1: f64,
    /// Reaction weight η of the Allen–Cahn step.
    pub eta: f64,
    pub initial: InitialPhase,
    /// Area of the full design domain D.
    pub design_area: f64,
    /// Willmore well weight γ_w (method II).
    pub gamma_willmore: f64,
    /// Weight of the Willmore terms against the sensitivity (method II).
    pub willmore_weight: f64,
    /// Inclusion contrast r of the topological derivative.
    pub contrast: f64,
}

/// Final design of a phase-field run.
#[derive(Debug)]
pub struct PhaseOutcome {
    pub mesh: Mesh,
    pub phi: Vec<f64>,
    pub state: StateSolution,
    pub ell: f64,
    pub gamma: f64,
    pub converged: bool,
}

/// Pseudo-time step scale shared by the field-evolution loops:
/// `Δt = STEP_FACTOR · h_max / ‖V‖_∞` with `V` the raw (multiplier-free)
/// sensitivity.  Normalizing by the raw field keeps the pace tied to the
/// mechanics alone — folding the volume-multiplier constant into the
/// denominator would shrink the step exactly when the constraint pressure
/// grows, freezing the evolution while it is still infeasible.
pub(crate) const STEP_FACTOR: f64 = 5e-3;

pub(crate) fn inf_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// Shared outer loop of the fixed-mesh methods.  `advance` receives the mesh,
/// the current field, the state and adjoint solutions and the current
/// multiplier pair, and returns the updated field.
#[allow(clippy::too_many_arguments)]
pub(crate) fn run_fixed_mesh_loop(
    cfg: &PhaseConfig,
    history: &mut History,
    mut observer: impl FnMut(usize, &Mesh, &[f64]),
    initial_phi: impl FnOnce(usize) -> Vec<f64>,
    coeff: impl Fn(&Mesh, &[f64]) -> Vec<f64>,
    volume: impl Fn(&Mesh, &[f64]) -> f64,
    mut advance: impl FnMut(&Mesh, &[f64], &StateSolution, f64, f64) -> Result<Vec<f64>>,
) -> Result<PhaseOutcome> {
    assert!(
        cfg.state.stiffness_coeff.is_none(),
        "the interpolated coefficient is computed from the phase field"
    );
    let objective = cfg.objective.as_objective();
    let mesh = generate(&cfg.domain)?;
    let mut phi = initial_phi(mesh.vertex_count());
    let mut ell = cfg.ell0;
    let mut gamma = cfg.gamma0;

    let mut state_cfg = cfg.state.clone();
    state_cfg.stiffness_coeff = Some(coeff(&mesh, &phi));
    let mut state = solve_state(&mesh, &state_cfg, None)?;
    let mut j = evaluate_objective(&mesh, &state_cfg, &objective, &state.u)?;
    let mut vol = volume(&mesh, &phi);

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
    observer(0, &mesh, &phi);

    let mut converged = false;
    for n in 1..=cfg.max_iters {
        phi = advance(&mesh, &phi, &state, ell, gamma)?;

        state_cfg.stiffness_coeff = Some(coeff(&mesh, &phi));
        let prev_u = state.u.clone();
        state = solve_state(&mesh, &state_cfg, Some(&prev_u))?;
        let prev_j = j;
        j = evaluate_objective(&mesh, &state_cfg, &objective, &state.u)?;
        vol = volume(&mesh, &phi);

        let (new_ell, new_gamma) = crate::shape::uzawa_update(
            ell,
            gamma,
            vol,
            cfg.target_volume,
            cfg.rho_gamma,
            cfg.gamma_max,
        );
        ell = new_ell;
        gamma = new_gamma;

        history.push(IterationRecord {
            iter: n,
            objective: j,
            volume: vol,
            volume_fraction: vol / cfg.design_area,
            ell,
            gamma,
            newton_iters: state.newton_iterations,
            wall_ms: 0,
        });
        observer(n, &mesh, &phi);

        let rel = if prev_j != 0.0 { ((j - prev_j) / prev_j).abs() } else { j.abs() };
        let feasible = (vol - cfg.target_volume).abs() <= 0.01 * cfg.target_volume.abs();
        if rel < cfg.tol && feasible {
            converged = true;
            break;
        }
    }
    Ok(PhaseOutcome { mesh, phi, state, ell, gamma, converged })
}

/// Method I: Allen–Cahn evolution of `φ ∈ [0, 1]` under the interpolated
/// stiffness sensitivity.
pub fn run_pf1(
    cfg: &PhaseConfig,
    history: &mut History,
    observer: impl FnMut(usize, &Mesh, &[f64]),
) -> Result<PhaseOutcome> {
    let interp = cfg.interp;
    let objective = cfg.objective.as_objective();
    let state_base = cfg.state.clone();
    run_fixed_mesh_loop(
        cfg,
        history,
        observer,
        |n| cfg.initial.build(n),
        move |mesh, phi| stiffness_coeff(&interp, mesh, phi),
        field_integral,
        |mesh, phi, state, ell, gamma| {
            let mut state_cfg = state_base.clone();
            state_cfg.stiffness_coeff = Some(stiffness_coeff(&interp, mesh, phi));
            let p_adj = solve_adjoint(mesh, &state_cfg, &objective, &state.u)?;
            // Raw sensitivity (zero multipliers) sets the step size; the
            // tilt itself carries the volume-multiplier constant.
            let raw = sensitivity_field(
                &interp,
                mesh,
                phi,
                &state_cfg.elasticity,
                &state.u,
                &p_adj,
                0.0,
                0.0,
                0.0,
            );
            let vmax = inf_norm(&raw);
            if vmax == 0.0 {
                return Ok(phi.to_vec());
            }
            let dt = STEP_FACTOR * mesh.h_max() / vmax;
            eprintln!("DBG vmax={vmax:.3e} dt={dt:.3e} ell={ell:.3e} gamma={gamma:.3e}");
            let constant = ell + gamma * (field_integral(mesh, phi) - cfg.target_volume);
            let cell: Vec<f64> = raw.iter().map(|d| d + constant).collect();
            let sens = cell_to_vertex_average(mesh, &cell);
            let mut next = phi.to_vec();
            for _ in 0..cfg.inner_steps {
                next = step_allen_cahn(mesh, &next, &sens, dt, cfg.kappa1, cfg.eta)?;
            }
            Ok(next)
        },
    )
}

/// Method II: fourth-order Willmore-regularized evolution of `φ` with wells
/// at `±1`; material volume is `∫ (φ+1)/2`.
pub fn run_pf2(
    cfg: &PhaseConfig,
    history: &mut History,
    observer: impl FnMut(usize, &Mesh, &[f64]),
) -> Result<PhaseOutcome> {
    let interp = cfg.interp;
    let objective = cfg.objective.as_objective();
    let state_base = cfg.state.clone();
    run_fixed_mesh_loop(
        cfg,
        history,
        observer,
        |n| cfg.initial.build(n).into_iter().map(|v| 2.0 * v - 1.0).collect(),
        move |mesh, phi| willmore_coeff(&interp, mesh, phi),
        |mesh, phi| {
            lumped_scalar_mass(mesh)
                .iter()
                .zip(phi)
                .map(|(m, p)| m * (p + 1.0) / 2.0)
                .sum()
        },
        |mesh, phi, state, ell, gamma| {
            let mut state_cfg = state_base.clone();
            state_cfg.stiffness_coeff = Some(willmore_coeff(&interp, mesh, phi));
            let p_adj = solve_adjoint(mesh, &state_cfg, &objective, &state.u)?;

            let vol: f64 = lumped_scalar_mass(mesh)
                .iter()
                .zip(phi)
                .map(|(m, p)| m * (p + 1.0) / 2.0)
                .sum();
            let constant = 0.5 * (ell + gamma * (vol - cfg.target_volume));
            let cell: Vec<f64> = (0..mesh.triangle_count())
                .map(|t| {
                    let tri = mesh.triangles[t];
                    let avg = (phi[tri[0]] + phi[tri[1]] + phi[tri[2]]) / 3.0;
                    let eps_u = triangle_strain(mesh, t, &state.u);
                    let eps_p = triangle_strain(mesh, t, &p_adj);
                    interp.well_derivative(avg) * state_cfg.elasticity.stress(&eps_u).ddot(&eps_p)
                })
                .collect();
            // Step size from the raw sensitivity; the driving itself carries
            // the volume-multiplier constant.
            let vmax = inf_norm(&cell);
            if vmax == 0.0 {
                return Ok(phi.to_vec());
            }
            let dt = STEP_FACTOR * mesh.h_max() / vmax;
            let nodal = cell_to_vertex_average(mesh, &cell);
            // Steepest descent on the augmented objective.
            let driving: Vec<f64> = nodal.iter().map(|s| -(s + constant)).collect();
            let mut next = phi.to_vec();
            for _ in 0..cfg.inner_steps {
                next = step_willmore(
                    mesh,
                    &next,
                    &driving,
                    dt,
                    cfg.gamma_willmore,
                    cfg.willmore_weight,
                )?;
            }
            let bound = inf_norm(&next);
            if bound > 2.0 {
                return Err(Error::Domain(format!(
                    "phase field left its sanity bounds (max |phi| = {bound:.3})"
                )));
            }
            Ok(next)
        },
    )
}

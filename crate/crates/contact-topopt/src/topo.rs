//! Topological derivative of the elastic energy and the phase-field loop
//! driven by it.
//!
//! For a plane-strain material with Lamé moduli `λ, μ` and a circular
//! inclusion of stiffness contrast `r`, nucleating the inclusion at a point
//! changes the energy at leading order by `π ρ² d_T` with
//!
//!   d_T = −½ ℙ_r σ(u) : ε(u),
//!   ℙ_r σ = (π(1−r)/(1+r a₂)) [ (1+a₂) σ + ½ (a₁−a₂) ((1−r)/(1+r a₁)) tr(σ) I ],
//!   a₁ = (λ+μ)/μ,   a₂ = (λ+3μ)/(λ+μ),
//!
//! valid for zero body force.  `d_T ≤ 0` everywhere: removing material can
//! only increase the energy, which is why the driving below removes material
//! where `|d_T|` is smallest.
//!
//! `run_pf_td` evolves the method-I field `φ ∈ [0, 1]` with the Allen–Cahn
//! step, but the sensitivity is replaced by `d_T + ℓ + γ(∫φ − C)` and the
//! material removal per outer iteration is capped at 1% of the design area
//! (the reaction weight is bisected down when a full sweep would exceed it).

use crate::fem::triangle_strain;
use crate::history::History;
use crate::material::{Elasticity, Sym2};
use crate::mesh::{cell_to_vertex_average, Mesh};
use crate::phase::{
    field_integral, inf_norm, run_fixed_mesh_loop, step_allen_cahn, stiffness_coeff, PhaseConfig,
    STEP_FACTOR,
    PhaseOutcome,
};
use crate::solver::StateSolution;
use crate::{Error, Result};

/// Polarization tensor coefficients of a circular inclusion with stiffness
/// contrast `r` in a plane-strain matrix.
#[derive(Debug, Clone, Copy)]
pub struct Polarization {
    pub contrast: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Polarization {
    pub fn new(elast: &Elasticity, contrast: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&contrast) {
            return Err(Error::Domain(format!(
                "inclusion contrast must lie in [0, 1), got {contrast}"
            )));
        }
        let (lambda, mu) = (elast.lambda, elast.mu);
        Ok(Polarization {
            contrast,
            a1: (lambda + mu) / mu,
            a2: (lambda + 3.0 * mu) / (lambda + mu),
        })
    }

    /// Apply the polarization tensor to a stress.
    pub fn apply(&self, sigma: &Sym2) -> Sym2 {
        let r = self.contrast;
        let pref = std::f64::consts::PI * (1.0 - r) / (1.0 + r * self.a2);
        let trc = 0.5 * (self.a1 - self.a2) * (1.0 - r) / (1.0 + r * self.a1);
        let tr = sigma.xx + sigma.yy;
        Sym2 {
            xx: pref * ((1.0 + self.a2) * sigma.xx + trc * tr),
            yy: pref * ((1.0 + self.a2) * sigma.yy + trc * tr),
            xy: pref * (1.0 + self.a2) * sigma.xy,
        }
    }
}

/// Per-triangle topological derivative `−½ ℙσ(u):ε(u)` of the elastic energy.
/// `coeff` is the ersatz stiffness scaling of the actual state problem, so the
/// stress entering the formula is the one the state `u` really solves.
pub fn topological_derivative_field(
    mesh: &Mesh,
    elast: &Elasticity,
    coeff: Option<&[f64]>,
    u: &[f64],
    pol: &Polarization,
) -> Vec<f64> {
    (0..mesh.triangle_count())
        .map(|t| {
            let scale = coeff.map_or(1.0, |c| c[t]);
            let eps = triangle_strain(mesh, t, u);
            let mut sigma = elast.stress(&eps);
            sigma.xx *= scale;
            sigma.yy *= scale;
            sigma.xy *= scale;
            -0.5 * pol.apply(&sigma).ddot(&eps)
        })
        .collect()
}

const MAX_BISECTIONS: usize = 20;
const REMOVAL_CAP: f64 = 0.01;

/// Topology optimization driven by the topological derivative: Allen–Cahn
/// steps on `φ ∈ [0, 1]` with per-iteration material removal capped at 1% of
/// the design area.  Requires zero body force (the derivative formula assumes
/// it) and an unscaled base state configuration.
pub fn run_pf_td(
    cfg: &PhaseConfig,
    history: &mut History,
    observer: impl FnMut(usize, &Mesh, &[f64]),
) -> Result<PhaseOutcome> {
    if cfg.state.body_force != [0.0, 0.0] {
        return Err(Error::Unsupported(
            "the topological derivative of the energy is only implemented for zero body force"
                .into(),
        ));
    }
    let interp = cfg.interp;
    let state_base = cfg.state.clone();
    let pol = Polarization::new(&cfg.state.elasticity, cfg.contrast)?;
    let cap = REMOVAL_CAP * cfg.design_area;

    run_fixed_mesh_loop(
        cfg,
        history,
        observer,
        |n| cfg.initial.build(n),
        move |mesh, phi| stiffness_coeff(&interp, mesh, phi),
        field_integral,
        |mesh, phi, state: &StateSolution, ell, gamma| {
            let coeff = stiffness_coeff(&interp, mesh, phi);
            let dt_cell = topological_derivative_field(
                mesh,
                &state_base.elasticity,
                Some(&coeff),
                &state.u,
                &pol,
            );
            // Raw derivative (no multiplier) sets the step size; the tilt
            // itself carries the volume-multiplier constant.
            let vmax = inf_norm(&dt_cell);
            if vmax == 0.0 {
                return Ok(phi.to_vec());
            }
            let dt = STEP_FACTOR * mesh.h_max() / vmax;
            let constant = ell + gamma * (field_integral(mesh, phi) - cfg.target_volume);
            let cell: Vec<f64> = dt_cell.iter().map(|d| d + constant).collect();
            let sens = cell_to_vertex_average(mesh, &cell);
            let vol_before = field_integral(mesh, phi);

            let sweep = |eta: f64| -> Result<Vec<f64>> {
                let mut next = phi.to_vec();
                for _ in 0..cfg.inner_steps {
                    next = step_allen_cahn(mesh, &next, &sens, dt, cfg.kappa1, eta)?;
                }
                Ok(next)
            };

            let full = sweep(cfg.eta)?;
            if vol_before - field_integral(mesh, &full) <= cap {
                return Ok(full);
            }
            // Too much material removed at once: bisect the reaction weight
            // down, keeping the largest sweep that respects the cap.  If none
            // does, leave the field unchanged and let the multiplier update
            // rebalance the driving.
            let (mut lo, mut hi) = (0.0f64, cfg.eta);
            let mut best: Option<Vec<f64>> = None;
            for _ in 0..MAX_BISECTIONS {
                let mid = 0.5 * (lo + hi);
                let trial = sweep(mid)?;
                if vol_before - field_integral(mesh, &trial) <= cap {
                    best = Some(trial);
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Ok(best.unwrap_or_else(|| phi.to_vec()))
        },
    )
}

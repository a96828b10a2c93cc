//! Orchestration of full optimization runs from a parsed configuration:
//! output directory layout, history/VTK persistence, and the diagnostic
//! `check-gradient` / `mesh-info` entry points used by the CLI.
//!
//! A run always leaves `history.csv` behind, even when the optimization loop
//! fails midway — whatever iterations completed are persisted before the
//! error propagates.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{Algorithm, InitialPhi, OptConfig};
use crate::history::{write_history_csv, History};
use crate::material::{Elasticity, FrictionParams};
use crate::mesh::{bounding_area, generate, move_vertices, DomainSpec, Mesh};
use crate::phase::{
    run_pf1, run_pf2, sensitivity_field, stiffness_coeff, willmore_coeff, ErsatzInterp,
    InitialPhase, PhaseConfig,
};
use crate::shape::{
    run_shape_optimization, shape_derivative_compliance, shape_derivative_distributed,
    ShapeConfig, StopReason,
};
use crate::solver::{
    evaluate_objective, solve_adjoint, solve_state, NewtonParams, ObjectiveKind, StateConfig,
};
use crate::topo::{run_pf_td, topological_derivative_field, Polarization};
use crate::vtk::{write_vtk, CellField, PointField};
use crate::{Error, Result};

/// Environment variable reserved for a worker-thread count.  The solvers are
/// single-threaded, but the value is validated so misconfigured launch
/// scripts fail loudly instead of silently running with a typo.
pub const THREADS_ENV: &str = "CONTACT_TOPOPT_THREADS";

fn validate_threads_value(raw: Option<&str>) -> Result<()> {
    if let Some(raw) = raw {
        match raw.parse::<usize>() {
            Ok(n) if n >= 1 => {}
            _ => {
                return Err(Error::Config {
                    line: None,
                    msg: format!("{THREADS_ENV} must be a positive integer, got '{raw}'"),
                })
            }
        }
    }
    Ok(())
}

fn validate_threads_env() -> Result<()> {
    validate_threads_value(std::env::var(THREADS_ENV).ok().as_deref())
}

fn domain_spec(cfg: &OptConfig) -> DomainSpec {
    DomainSpec { kind: cfg.domain.clone(), h: cfg.h, rules: cfg.rules.clone() }
}

fn state_config(cfg: &OptConfig) -> Result<StateConfig> {
    Ok(StateConfig {
        elasticity: Elasticity::new(cfg.youngs, cfg.poisson)?,
        friction: FrictionParams::new(
            cfg.friction_peak,
            cfg.friction_floor,
            cfg.friction_decay,
            cfg.smoothing_band,
        )?,
        body_force: cfg.body_force,
        traction: cfg.traction,
        stiffness_coeff: None,
        newton: NewtonParams::default(),
    })
}

fn phase_config(cfg: &OptConfig) -> Result<PhaseConfig> {
    Ok(PhaseConfig {
        domain: domain_spec(cfg),
        state: state_config(cfg)?,
        objective: cfg.objective,
        interp: ErsatzInterp { exponent: cfg.exponent, floor: cfg.k_min },
        ell0: cfg.ell0,
        gamma0: cfg.gamma0,
        rho_gamma: cfg.rho_gamma,
        gamma_max: cfg.gamma_max,
        target_volume: cfg.target_volume,
        tol: cfg.tol,
        max_iters: cfg.max_iters,
        inner_steps: cfg.inner_steps,
        kappa1: cfg.kappa1,
        eta: cfg.eta,
        initial: match cfg.initial_phi {
            InitialPhi::Random => InitialPhase::Random { seed: cfg.seed },
            InitialPhi::Constant(v) => InitialPhase::Constant(v),
        },
        design_area: bounding_area(&cfg.domain),
        gamma_willmore: cfg.gamma_w,
        willmore_weight: cfg.eta_tilde,
        contrast: cfg.contrast,
    })
}

fn shape_config(cfg: &OptConfig) -> Result<ShapeConfig> {
    Ok(ShapeConfig {
        domain: domain_spec(cfg),
        state: state_config(cfg)?,
        objective: cfg.objective,
        ell0: cfg.ell0,
        gamma0: cfg.gamma0,
        rho_gamma: cfg.rho_gamma,
        gamma_max: cfg.gamma_max,
        target_volume: cfg.target_volume,
        tol: cfg.tol,
        max_iters: cfg.max_iters,
        omega: cfg.omega,
        design_area: bounding_area(&cfg.domain),
    })
}

/// What a completed run left on disk and where it stopped.
#[derive(Debug)]
pub struct RunSummary {
    pub algorithm: Algorithm,
    pub iterations: usize,
    pub final_objective: f64,
    pub final_volume: f64,
    pub converged: bool,
    pub out_dir: PathBuf,
}

/// Owned data of the final design, rendered to VTK after the history is safe
/// on disk.
struct FinalState {
    mesh: Mesh,
    displacement: Vec<f64>,
    phi: Option<Vec<f64>>,
    stiffness: Option<Vec<f64>>,
    topo: Option<Vec<f64>>,
    converged: bool,
}

struct SnapshotSink<'a> {
    out_dir: &'a Path,
    every: usize,
    error: Option<Error>,
}

impl SnapshotSink<'_> {
    fn want(&self, iter: usize) -> bool {
        self.error.is_none() && self.every > 0 && iter % self.every == 0
    }

    fn record(&mut self, result: Result<()>) {
        if let (Err(e), None) = (result, &self.error) {
            self.error = Some(e);
        }
    }

    fn finish(self) -> Result<()> {
        match self.error {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

/// Execute the configured optimization, writing `config.echo.cfg`,
/// `history.csv`, periodic snapshots, and `final.vtk` into the output
/// directory.
pub fn run(cfg: &OptConfig) -> Result<RunSummary> {
    validate_threads_env()?;
    let out_dir = cfg.out_dir.clone();
    fs::create_dir_all(&out_dir)?;
    fs::write(out_dir.join("config.echo.cfg"), crate::config::echo_config(cfg))?;

    let mut history = History::new();
    let mut snaps = SnapshotSink { out_dir: &out_dir, every: cfg.snapshot_every, error: None };

    let result: Result<FinalState> = match cfg.algorithm {
        Algorithm::Shape => {
            let scfg = shape_config(cfg)?;
            run_shape_optimization(&scfg, &mut history, |iter, mesh, state| {
                if snaps.want(iter) {
                    let path = snaps.out_dir.join(format!("snapshot_{iter:04}.vtk"));
                    let r = write_vtk(
                        mesh,
                        &[PointField::Vector2 { name: "displacement", values: &state.u }],
                        &[],
                        &path,
                    );
                    snaps.record(r);
                }
            })
            .map(|outcome| FinalState {
                mesh: outcome.mesh,
                displacement: outcome.state.u,
                phi: None,
                stiffness: None,
                topo: None,
                converged: outcome.stop == StopReason::Converged,
            })
        }
        Algorithm::Pf1 | Algorithm::Pf2 | Algorithm::PfTd => {
            let pcfg = phase_config(cfg)?;
            let observer = |iter: usize, mesh: &Mesh, phi: &[f64]| {
                if snaps.want(iter) {
                    let path = snaps.out_dir.join(format!("snapshot_{iter:04}.vtk"));
                    let r = write_vtk(
                        mesh,
                        &[PointField::Scalar { name: "phi", values: phi }],
                        &[],
                        &path,
                    );
                    snaps.record(r);
                }
            };
            let run_result = match cfg.algorithm {
                Algorithm::Pf1 => run_pf1(&pcfg, &mut history, observer),
                Algorithm::Pf2 => run_pf2(&pcfg, &mut history, observer),
                _ => run_pf_td(&pcfg, &mut history, observer),
            };
            run_result.and_then(|outcome| {
                let coeff = match cfg.algorithm {
                    Algorithm::Pf2 => willmore_coeff(&pcfg.interp, &outcome.mesh, &outcome.phi),
                    _ => stiffness_coeff(&pcfg.interp, &outcome.mesh, &outcome.phi),
                };
                let topo = if cfg.algorithm == Algorithm::PfTd {
                    let pol = Polarization::new(&pcfg.state.elasticity, cfg.contrast)?;
                    Some(topological_derivative_field(
                        &outcome.mesh,
                        &pcfg.state.elasticity,
                        Some(&coeff),
                        &outcome.state.u,
                        &pol,
                    ))
                } else {
                    None
                };
                Ok(FinalState {
                    mesh: outcome.mesh,
                    displacement: outcome.state.u,
                    phi: Some(outcome.phi),
                    stiffness: Some(coeff),
                    topo,
                    converged: outcome.converged,
                })
            })
        }
    };

    // The history is persisted before any error propagates.
    write_history_csv(&history, &out_dir.join("history.csv"))?;
    snaps.finish()?;
    let fin = result?;

    let mut point_fields = Vec::new();
    if let Some(phi) = &fin.phi {
        point_fields.push(PointField::Scalar { name: "phi", values: phi });
    }
    point_fields.push(PointField::Vector2 { name: "displacement", values: &fin.displacement });
    let mut cell_fields = Vec::new();
    if let Some(coeff) = &fin.stiffness {
        cell_fields.push(CellField { name: "stiffness", values: coeff });
    }
    if let Some(td) = &fin.topo {
        cell_fields.push(CellField { name: "topo_derivative", values: td });
    }
    write_vtk(&fin.mesh, &point_fields, &cell_fields, &out_dir.join("final.vtk"))?;

    let last = history.last().expect("every run records at least one row");
    Ok(RunSummary {
        algorithm: cfg.algorithm,
        iterations: last.iter,
        final_objective: last.objective,
        final_volume: last.volume,
        converged: fin.converged,
        out_dir,
    })
}

/// Finite-difference verification of the two sensitivity pipelines on the
/// configured problem.  Returns a human-readable report; errors only when the
/// underlying solves fail, so a poor match is visible in the report rather
/// than an exit code.
pub fn check_gradient(cfg: &OptConfig) -> Result<String> {
    validate_threads_env()?;
    let mut report = String::new();
    let spec = domain_spec(cfg);
    let mesh = generate(&spec)?;
    let state_cfg = state_config(cfg)?;
    let objective = cfg.objective.as_objective();
    let obj_name = match cfg.objective {
        ObjectiveKind::Compliance => "compliance",
        ObjectiveKind::Energy => "energy",
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));

    // --- Domain-variation derivative against central differences. ---
    let state = solve_state(&mesh, &state_cfg, None)?;
    let grad = match cfg.objective {
        ObjectiveKind::Energy => {
            shape_derivative_distributed(&mesh, &state_cfg.elasticity, &state.u, cfg.body_force)
        }
        ObjectiveKind::Compliance => {
            let p_adj = solve_adjoint(&mesh, &state_cfg, &objective, &state.u)?;
            shape_derivative_compliance(
                &mesh,
                &state_cfg.elasticity,
                &state.u,
                &p_adj,
                cfg.body_force,
            )
        }
    };
    let boundary = mesh.boundary_vertex_mask();
    let t = 1e-4;
    report.push_str(&format!(
        "domain-variation derivative ({obj_name} objective, h = {}, step {t:.0e}):\n",
        cfg.h
    ));
    let mut worst: f64 = 0.0;
    for field in 1..=3 {
        let velocity: Vec<[f64; 2]> = (0..mesh.vertex_count())
            .map(|i| {
                if boundary[i] {
                    [0.0, 0.0]
                } else {
                    [rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5]
                }
            })
            .collect();
        let predicted: f64 = (0..mesh.vertex_count())
            .map(|i| grad[2 * i] * velocity[i][0] + grad[2 * i + 1] * velocity[i][1])
            .sum();
        let value_at = |s: f64| -> Result<f64> {
            let moved = move_vertices(&mesh, &velocity, s)?;
            let st = solve_state(&moved, &state_cfg, Some(&state.u))?;
            evaluate_objective(&moved, &state_cfg, &objective, &st.u)
        };
        let fd = (value_at(t)? - value_at(-t)?) / (2.0 * t);
        let rel = (fd - predicted).abs() / predicted.abs().max(1e-12);
        worst = worst.max(rel);
        report.push_str(&format!(
            "  field {field}: directional {predicted:+.6e}  fd {fd:+.6e}  rel {rel:.3e}\n"
        ));
    }
    report.push_str(&format!(
        "  worst relative error {worst:.3e} -> {}\n",
        if worst < 5e-2 { "PASS" } else { "FAIL" }
    ));

    // --- Ersatz-coefficient sensitivity against forward differences. ---
    let interp = ErsatzInterp { exponent: cfg.exponent, floor: cfg.k_min };
    let phi: Vec<f64> = (0..mesh.vertex_count()).map(|_| 0.3 + 0.6 * rng.gen::<f64>()).collect();
    let mut coeff_cfg = state_cfg.clone();
    coeff_cfg.stiffness_coeff = Some(stiffness_coeff(&interp, &mesh, &phi));
    let state = solve_state(&mesh, &coeff_cfg, None)?;
    let j0 = evaluate_objective(&mesh, &coeff_cfg, &objective, &state.u)?;
    let p_adj = solve_adjoint(&mesh, &coeff_cfg, &objective, &state.u)?;
    let sens = sensitivity_field(
        &interp,
        &mesh,
        &phi,
        &coeff_cfg.elasticity,
        &state.u,
        &p_adj,
        0.0,
        0.0,
        0.0,
    );

    let samples = 20.min(mesh.triangle_count());
    let stride = mesh.triangle_count() / samples;
    let delta = 1e-6;
    let mut ok = 0;
    let mut tested = 0;
    let mut worst_s: f64 = 0.0;
    for s in 0..samples {
        let tri_idx = s * stride;
        let tri = mesh.triangles[tri_idx];
        let avg = (phi[tri[0]] + phi[tri[1]] + phi[tri[2]]) / 3.0;
        let kprime = interp.derivative(avg);
        if kprime == 0.0 {
            continue;
        }
        tested += 1;
        let mut coeff = coeff_cfg.stiffness_coeff.clone().unwrap();
        coeff[tri_idx] += kprime * delta;
        let mut pert = coeff_cfg.clone();
        pert.stiffness_coeff = Some(coeff);
        let pert_state = solve_state(&mesh, &pert, Some(&state.u))?;
        let j1 = evaluate_objective(&mesh, &pert, &objective, &pert_state.u)?;
        let fd = (j1 - j0) / (delta * mesh.triangle_area(tri_idx));
        let rel = (fd - sens[tri_idx]).abs() / sens[tri_idx].abs().max(1e-12);
        worst_s = worst_s.max(rel);
        if rel <= 1e-2 {
            ok += 1;
        }
    }
    report.push_str(&format!(
        "stiffness-interpolation sensitivity ({tested} sampled triangles, step {delta:.0e}):\n  \
         {ok}/{tested} within 1e-2 relative, worst {worst_s:.3e} -> {}\n",
        if ok * 100 >= tested * 95 { "PASS" } else { "FAIL" }
    ));
    Ok(report)
}

/// Mesh statistics for the configured domain.
pub fn mesh_info(cfg: &OptConfig) -> Result<String> {
    validate_threads_env()?;
    let spec = domain_spec(cfg);
    let mesh = generate(&spec)?;
    let mut out = String::new();
    out.push_str(&format!("vertices:   {}\n", mesh.vertex_count()));
    out.push_str(&format!("triangles:  {}\n", mesh.triangle_count()));
    out.push_str(&format!("h_max:      {:.6}\n", mesh.h_max()));
    out.push_str(&format!("area:       {:.6}\n", mesh.area()));
    out.push_str(&format!("quality:    {:.6}\n", mesh.quality()));
    let mut lengths = [0.0f64; 4];
    for e in &mesh.boundary {
        lengths[e.tag as usize] += mesh.edge_length(e);
    }
    out.push_str(&format!(
        "boundary:   D = {:.6}, N = {:.6}, C = {:.6}, free = {:.6}\n",
        lengths[0], lengths[1], lengths[2], lengths[3]
    ));
    Ok(out)
}

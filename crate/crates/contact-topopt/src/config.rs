//! Flat `key = value` run configuration with per-algorithm defaults.
//!
//! A config file is a sequence of lines, each either blank, a `#` comment, or
//! `key=value` (whitespace around both is trimmed).  Unknown keys, duplicate
//! keys and malformed values are rejected with the 1-based line number.
//! Missing keys fall back to defaults chosen per algorithm, so an empty file
//! is a complete (if lengthy) run.  [`echo_config`] renders the resolved
//! configuration back into the same format; parsing the echo reproduces the
//! configuration exactly.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::mesh::{bounding_area, BoundaryRule, BoundaryTag, DomainKind, Side};
use crate::solver::ObjectiveKind;
use crate::{Error, Result};

/// Which optimization loop to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    /// Boundary-variation shape optimization on a moving mesh.
    Shape,
    /// Second-order phase-field method on a fixed mesh.
    Pf1,
    /// Fourth-order phase-field method with curvature regularization.
    Pf2,
    /// Phase-field update driven by the topological derivative.
    PfTd,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Shape => "shape",
            Algorithm::Pf1 => "pf1",
            Algorithm::Pf2 => "pf2",
            Algorithm::PfTd => "pf-td",
        }
    }

    fn parse(s: &str) -> Option<Algorithm> {
        match s {
            "shape" => Some(Algorithm::Shape),
            "pf1" => Some(Algorithm::Pf1),
            "pf2" => Some(Algorithm::Pf2),
            "pf-td" => Some(Algorithm::PfTd),
            _ => None,
        }
    }
}

/// Initial phase field (`initial_phi` key): `random`, `constant`
/// (full material) or `constant:<value>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialPhi {
    Random,
    Constant(f64),
}

impl InitialPhi {
    fn render(&self) -> String {
        match self {
            InitialPhi::Random => "random".into(),
            InitialPhi::Constant(v) => format!("constant:{v:?}"),
        }
    }
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct OptConfig {
    pub algorithm: Algorithm,
    pub domain: DomainKind,
    /// Target mesh spacing.
    pub h: f64,
    /// Boundary tagging rules (`bc` key).
    pub rules: Vec<BoundaryRule>,
    pub youngs: f64,
    pub poisson: f64,
    /// Friction bound at zero accumulated slip (`a`).
    pub friction_peak: f64,
    /// Asymptotic friction bound (`b`).
    pub friction_floor: f64,
    /// Exponential decay rate between the two bounds (`alpha`).
    pub friction_decay: f64,
    /// Half-width of the smoothed absolute value (`eps_reg`).
    pub smoothing_band: f64,
    /// Surface traction on the Neumann boundary (`gN_x`, `gN_y`).
    pub traction: [f64; 2],
    /// Body force density (`f_x`, `f_y`).
    pub body_force: [f64; 2],
    /// Absolute volume target `C` (resolved from `V_f` when given).
    pub target_volume: f64,
    /// Outer iteration budget (`N_m`).
    pub max_iters: usize,
    /// Inner field steps per outer iteration (`T`).
    pub inner_steps: usize,
    /// Relative objective-decrease stopping tolerance (`Tol`).
    pub tol: f64,
    /// Gradient-smoothing weight of the shape velocity field.
    pub omega: f64,
    /// Diffusion coefficient of the second-order field step.
    pub kappa1: f64,
    /// Interface-width parameter; recorded with the run but not used by the
    /// discrete updates.
    pub varsigma: f64,
    /// Reaction weight of the field step.
    pub eta: f64,
    /// Ersatz stiffness floor.
    pub k_min: f64,
    /// Ersatz interpolation exponent (`p`).
    pub exponent: i32,
    /// Initial volume multiplier.
    pub ell0: f64,
    /// Initial volume penalty.
    pub gamma0: f64,
    /// Penalty growth factor per outer iteration.
    pub rho_gamma: f64,
    /// Penalty cap.
    pub gamma_max: f64,
    /// Inclusion stiffness contrast of the topological derivative (`r`).
    pub contrast: f64,
    /// Weight of the curvature terms in the fourth-order method.
    pub eta_tilde: f64,
    /// Well weight of the curvature regularizer (`gamma_w`).
    pub gamma_w: f64,
    pub seed: u64,
    pub initial_phi: InitialPhi,
    pub objective: ObjectiveKind,
    pub out_dir: PathBuf,
    /// Write a VTK snapshot every this many outer iterations (0 = final only).
    pub snapshot_every: usize,
}

const KEYS: &[&str] = &[
    "algorithm",
    "domain",
    "width",
    "height",
    "side",
    "hole_x",
    "hole_y",
    "hole_radius",
    "outer",
    "notch",
    "h",
    "bc",
    "E",
    "nu",
    "a",
    "b",
    "alpha",
    "eps_reg",
    "gN_x",
    "gN_y",
    "f_x",
    "f_y",
    "C",
    "V_f",
    "N_m",
    "T",
    "Tol",
    "omega",
    "kappa1",
    "varsigma",
    "eta",
    "k_min",
    "p",
    "ell0",
    "gamma0",
    "rho_gamma",
    "gamma_max",
    "r",
    "eta_tilde",
    "gamma_w",
    "seed",
    "initial_phi",
    "objective",
    "out_dir",
    "snapshot_every",
];

fn err(line: usize, msg: impl Into<String>) -> Error {
    Error::Config { line: Some(line), msg: msg.into() }
}

struct Raw {
    map: HashMap<&'static str, (usize, String)>,
}

impl Raw {
    fn parse(text: &str) -> Result<Raw> {
        let mut map = HashMap::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw_line.find('#') {
                Some(pos) => &raw_line[..pos],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(err(line_no, format!("expected 'key = value', got '{line}'")));
            };
            let key = key.trim();
            let value = value.trim();
            let Some(&canonical) = KEYS.iter().find(|&&k| k == key) else {
                return Err(err(line_no, format!("unknown key '{key}'")));
            };
            if let Some((first, _)) = map.insert(canonical, (line_no, value.to_string())) {
                return Err(err(line_no, format!("key '{key}' already set on line {first}")));
            }
        }
        Ok(Raw { map })
    }

    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.map.remove(key)
    }

    fn f64(&mut self, key: &str, default: f64) -> Result<f64> {
        match self.take(key) {
            None => Ok(default),
            Some((line, v)) => v
                .parse::<f64>()
                .map_err(|_| err(line, format!("key '{key}': not a number: '{v}'"))),
        }
    }

    fn usize(&mut self, key: &str, default: usize) -> Result<usize> {
        match self.take(key) {
            None => Ok(default),
            Some((line, v)) => v
                .parse::<usize>()
                .map_err(|_| err(line, format!("key '{key}': not a non-negative integer: '{v}'"))),
        }
    }

    fn u64(&mut self, key: &str, default: u64) -> Result<u64> {
        match self.take(key) {
            None => Ok(default),
            Some((line, v)) => v
                .parse::<u64>()
                .map_err(|_| err(line, format!("key '{key}': not a non-negative integer: '{v}'"))),
        }
    }
}

/// Parse the space-separated boundary rule list, e.g.
/// `left:D bottom[0.8,1.2]:C right[0.44,0.56]:N`.
pub fn parse_boundary_rules(text: &str, line: usize) -> Result<Vec<BoundaryRule>> {
    let mut rules = Vec::new();
    for token in text.split_whitespace() {
        let Some((head, tag_str)) = token.rsplit_once(':') else {
            return Err(err(line, format!("boundary rule '{token}' is missing ':TAG'")));
        };
        let mut tag_chars = tag_str.chars();
        let tag = match (tag_chars.next().and_then(BoundaryTag::from_letter), tag_chars.next()) {
            (Some(tag), None) => tag,
            _ => {
                return Err(err(
                    line,
                    format!("boundary rule '{token}': tag must be one of D, N, C, F"),
                ))
            }
        };
        let (side_str, span) = match head.split_once('[') {
            None => (head, None),
            Some((side, rest)) => {
                let Some(body) = rest.strip_suffix(']') else {
                    return Err(err(line, format!("boundary rule '{token}': unclosed '['")));
                };
                let Some((lo, hi)) = body.split_once(',') else {
                    return Err(err(
                        line,
                        format!("boundary rule '{token}': span must be '[lo,hi]'"),
                    ));
                };
                let lo = lo.trim().parse::<f64>().map_err(|_| {
                    err(line, format!("boundary rule '{token}': bad span start '{lo}'"))
                })?;
                let hi = hi.trim().parse::<f64>().map_err(|_| {
                    err(line, format!("boundary rule '{token}': bad span end '{hi}'"))
                })?;
                if !(hi > lo) {
                    return Err(err(
                        line,
                        format!("boundary rule '{token}': span must satisfy lo < hi"),
                    ));
                }
                (side, Some((lo, hi)))
            }
        };
        let Some(side) = Side::parse(side_str) else {
            return Err(err(line, format!("boundary rule '{token}': unknown side '{side_str}'")));
        };
        rules.push(BoundaryRule { side, span, tag });
    }
    if rules.is_empty() {
        return Err(err(line, "boundary rule list is empty"));
    }
    Ok(rules)
}

/// Render rules back into the `bc` syntax accepted by [`parse_boundary_rules`].
pub fn render_boundary_rules(rules: &[BoundaryRule]) -> String {
    rules
        .iter()
        .map(|r| match r.span {
            None => format!("{}:{}", r.side.name(), r.tag.letter()),
            Some((lo, hi)) => format!("{}[{lo:?},{hi:?}]:{}", r.side.name(), r.tag.letter()),
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn default_rules(kind: &DomainKind) -> Vec<BoundaryRule> {
    let rule = |side, span, tag| BoundaryRule { side, span, tag };
    match kind {
        // Cantilever pressed onto a rigid base: clamped left, contact strip
        // under the load path, traction band on the right edge.
        DomainKind::Rectangle { .. } => vec![
            rule(Side::Left, None, BoundaryTag::Dirichlet),
            rule(Side::Bottom, Some((0.8, 1.2)), BoundaryTag::Contact),
            rule(Side::Right, Some((0.44, 0.56)), BoundaryTag::Neumann),
        ],
        // Bridge-like setup: both vertical sides clamped, the bottom resting
        // on a rigid base, load band on top; the hole rim stays free.
        DomainKind::SquareWithHole { .. } => vec![
            rule(Side::Left, None, BoundaryTag::Dirichlet),
            rule(Side::Right, None, BoundaryTag::Dirichlet),
            rule(Side::Bottom, None, BoundaryTag::Contact),
            rule(Side::Top, Some((0.44, 0.56)), BoundaryTag::Neumann),
        ],
        // L-bracket: clamped left column, rigid base under the foot, load
        // near the tip of the upper arm.
        DomainKind::LShape { .. } => vec![
            rule(Side::Left, None, BoundaryTag::Dirichlet),
            rule(Side::Bottom, None, BoundaryTag::Contact),
            rule(Side::Right, Some((1.0, 1.2)), BoundaryTag::Neumann),
        ],
    }
}

/// Parse a configuration from text.  See the module docs for the format.
pub fn parse_config(text: &str) -> Result<OptConfig> {
    let mut raw = Raw::parse(text)?;

    let algorithm = match raw.take("algorithm") {
        None => Algorithm::Pf1,
        Some((line, v)) => Algorithm::parse(&v).ok_or_else(|| {
            err(line, format!("key 'algorithm': unknown value '{v}' (expected shape, pf1, pf2 or pf-td)"))
        })?,
    };
    let is_shape = algorithm == Algorithm::Shape;

    let domain_name = match raw.take("domain") {
        Some((line, v)) => {
            if !["rectangle", "square_with_hole", "lshape"].contains(&v.as_str()) {
                return Err(err(line, format!("key 'domain': unknown value '{v}'")));
            }
            v
        }
        None => if is_shape { "square_with_hole" } else { "rectangle" }.to_string(),
    };
    let domain = match domain_name.as_str() {
        "rectangle" => DomainKind::Rectangle {
            width: raw.f64("width", 2.0)?,
            height: raw.f64("height", 1.0)?,
        },
        "square_with_hole" => DomainKind::SquareWithHole {
            side: raw.f64("side", 1.0)?,
            center: [raw.f64("hole_x", 0.5)?, raw.f64("hole_y", 0.5)?],
            radius: raw.f64("hole_radius", 0.2)?,
        },
        _ => DomainKind::LShape { outer: raw.f64("outer", 2.0)?, notch: raw.f64("notch", 1.0)? },
    };
    // Geometry keys for the other families must not linger silently.
    for key in ["width", "height", "side", "hole_x", "hole_y", "hole_radius", "outer", "notch"] {
        if let Some((line, _)) = raw.take(key) {
            return Err(err(line, format!("key '{key}' does not apply to domain '{domain_name}'")));
        }
    }

    let h = raw.f64("h", if is_shape { 0.05 } else { 0.04 })?;
    let rules = match raw.take("bc") {
        None => default_rules(&domain),
        Some((line, v)) => parse_boundary_rules(&v, line)?,
    };

    let target_volume = match (raw.take("C"), raw.take("V_f")) {
        (Some((line, _)), Some(_)) => {
            return Err(err(line, "keys 'C' and 'V_f' both set; give exactly one"));
        }
        (Some((line, v)), None) => v
            .parse::<f64>()
            .map_err(|_| err(line, format!("key 'C': not a number: '{v}'")))?,
        (None, Some((line, v))) => {
            let vf = v
                .parse::<f64>()
                .map_err(|_| err(line, format!("key 'V_f': not a number: '{v}'")))?;
            vf * bounding_area(&domain)
        }
        (None, None) => {
            if is_shape {
                0.95
            } else {
                0.32 * bounding_area(&domain)
            }
        }
    };

    let initial_phi = match raw.take("initial_phi") {
        None => {
            if algorithm == Algorithm::PfTd {
                InitialPhi::Constant(1.0)
            } else {
                InitialPhi::Random
            }
        }
        Some((line, v)) => match v.as_str() {
            "random" => InitialPhi::Random,
            "constant" => InitialPhi::Constant(1.0),
            other => match other.strip_prefix("constant:") {
                Some(num) => InitialPhi::Constant(num.parse::<f64>().map_err(|_| {
                    err(line, format!("key 'initial_phi': bad constant value '{num}'"))
                })?),
                None => {
                    return Err(err(
                        line,
                        format!("key 'initial_phi': expected random, constant or constant:<value>, got '{v}'"),
                    ))
                }
            },
        },
    };

    let objective = match raw.take("objective") {
        None => {
            if algorithm == Algorithm::PfTd {
                ObjectiveKind::Energy
            } else {
                ObjectiveKind::Compliance
            }
        }
        Some((line, v)) => match v.as_str() {
            "compliance" => ObjectiveKind::Compliance,
            "energy" => ObjectiveKind::Energy,
            _ => {
                return Err(err(
                    line,
                    format!("key 'objective': expected compliance or energy, got '{v}'"),
                ))
            }
        },
    };

    let config = OptConfig {
        algorithm,
        domain,
        h,
        rules,
        youngs: raw.f64("E", 1.0)?,
        poisson: raw.f64("nu", 0.3)?,
        friction_peak: raw.f64("a", 4e-3)?,
        friction_floor: raw.f64("b", 2e-3)?,
        friction_decay: raw.f64("alpha", 100.0)?,
        smoothing_band: raw.f64("eps_reg", 1e-3)?,
        traction: [raw.f64("gN_x", 0.0)?, raw.f64("gN_y", -0.3)?],
        body_force: [raw.f64("f_x", 0.0)?, raw.f64("f_y", 0.0)?],
        target_volume,
        max_iters: raw.usize("N_m", if is_shape { 200 } else { 300 })?,
        inner_steps: raw.usize("T", 10)?,
        tol: raw.f64("Tol", 1e-3)?,
        omega: raw.f64("omega", 0.01)?,
        kappa1: raw.f64("kappa1", 1e-5)?,
        varsigma: raw.f64("varsigma", 1e-3)?,
        eta: raw.f64("eta", 20.0)?,
        k_min: raw.f64("k_min", 1e-5)?,
        exponent: raw.usize("p", 3)? as i32,
        ell0: raw.f64("ell0", if is_shape { 0.01 } else { 0.0 })?,
        gamma0: raw.f64("gamma0", if is_shape { 0.02 } else { 20.0 })?,
        rho_gamma: raw.f64("rho_gamma", if is_shape { 1.02 } else { 1.05 })?,
        gamma_max: raw.f64("gamma_max", 1e3)?,
        contrast: raw.f64("r", 1e-3)?,
        eta_tilde: raw.f64("eta_tilde", 1e-2)?,
        gamma_w: raw.f64("gamma_w", 1.0)?,
        seed: raw.u64("seed", 0)?,
        initial_phi,
        objective,
        out_dir: PathBuf::from(
            raw.take("out_dir").map_or_else(|| "out".to_string(), |(_, v)| v),
        ),
        snapshot_every: raw.usize("snapshot_every", 0)?,
    };

    if let Some((line, value)) = raw.map.values().next() {
        return Err(err(*line, format!("internal: unconsumed value '{value}'")));
    }
    Ok(config)
}

/// Read and parse a configuration file.
pub fn load_config(path: &Path) -> Result<OptConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config { line: None, msg: format!("{}: {e}", path.display()) })?;
    parse_config(&text)
}

/// Render the resolved configuration; parsing the result reproduces `cfg`.
pub fn echo_config(cfg: &OptConfig) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(&v);
        out.push('\n');
    };
    kv("algorithm", cfg.algorithm.name().into());
    match &cfg.domain {
        DomainKind::Rectangle { width, height } => {
            kv("domain", "rectangle".into());
            kv("width", format!("{width:?}"));
            kv("height", format!("{height:?}"));
        }
        DomainKind::SquareWithHole { side, center, radius } => {
            kv("domain", "square_with_hole".into());
            kv("side", format!("{side:?}"));
            kv("hole_x", format!("{:?}", center[0]));
            kv("hole_y", format!("{:?}", center[1]));
            kv("hole_radius", format!("{radius:?}"));
        }
        DomainKind::LShape { outer, notch } => {
            kv("domain", "lshape".into());
            kv("outer", format!("{outer:?}"));
            kv("notch", format!("{notch:?}"));
        }
    }
    kv("h", format!("{:?}", cfg.h));
    kv("bc", render_boundary_rules(&cfg.rules));
    kv("E", format!("{:?}", cfg.youngs));
    kv("nu", format!("{:?}", cfg.poisson));
    kv("a", format!("{:?}", cfg.friction_peak));
    kv("b", format!("{:?}", cfg.friction_floor));
    kv("alpha", format!("{:?}", cfg.friction_decay));
    kv("eps_reg", format!("{:?}", cfg.smoothing_band));
    kv("gN_x", format!("{:?}", cfg.traction[0]));
    kv("gN_y", format!("{:?}", cfg.traction[1]));
    kv("f_x", format!("{:?}", cfg.body_force[0]));
    kv("f_y", format!("{:?}", cfg.body_force[1]));
    kv("C", format!("{:?}", cfg.target_volume));
    kv("N_m", cfg.max_iters.to_string());
    kv("T", cfg.inner_steps.to_string());
    kv("Tol", format!("{:?}", cfg.tol));
    kv("omega", format!("{:?}", cfg.omega));
    kv("kappa1", format!("{:?}", cfg.kappa1));
    kv("varsigma", format!("{:?}", cfg.varsigma));
    kv("eta", format!("{:?}", cfg.eta));
    kv("k_min", format!("{:?}", cfg.k_min));
    kv("p", cfg.exponent.to_string());
    kv("ell0", format!("{:?}", cfg.ell0));
    kv("gamma0", format!("{:?}", cfg.gamma0));
    kv("rho_gamma", format!("{:?}", cfg.rho_gamma));
    kv("gamma_max", format!("{:?}", cfg.gamma_max));
    kv("r", format!("{:?}", cfg.contrast));
    kv("eta_tilde", format!("{:?}", cfg.eta_tilde));
    kv("gamma_w", format!("{:?}", cfg.gamma_w));
    kv("seed", cfg.seed.to_string());
    kv("initial_phi", cfg.initial_phi.render());
    kv(
        "objective",
        match cfg.objective {
            ObjectiveKind::Compliance => "compliance".into(),
            ObjectiveKind::Energy => "energy".into(),
        },
    );
    kv("out_dir", cfg.out_dir.display().to_string());
    kv("snapshot_every", cfg.snapshot_every.to_string());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_resolves_to_the_default_run() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg.algorithm, Algorithm::Pf1);
        assert_eq!(cfg.domain, DomainKind::Rectangle { width: 2.0, height: 1.0 });
        assert_eq!(cfg.youngs, 1.0);
        assert_eq!(cfg.poisson, 0.3);
        assert_eq!(cfg.friction_peak, 4e-3);
        assert_eq!(cfg.traction, [0.0, -0.3]);
        assert_eq!(cfg.target_volume, 0.32 * 2.0);
        assert_eq!(cfg.max_iters, 300);
        assert_eq!(cfg.inner_steps, 10);
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.initial_phi, InitialPhi::Random);
        assert_eq!(cfg.objective, ObjectiveKind::Compliance);
    }

    #[test]
    fn shape_defaults_differ_from_phase_defaults() {
        let cfg = parse_config("algorithm = shape\n").unwrap();
        assert!(matches!(cfg.domain, DomainKind::SquareWithHole { .. }));
        assert_eq!(cfg.target_volume, 0.95);
        assert_eq!(cfg.max_iters, 200);
        assert_eq!(cfg.ell0, 0.01);
        assert_eq!(cfg.gamma0, 0.02);
        assert_eq!(cfg.rho_gamma, 1.02);
    }

    #[test]
    fn volume_fraction_scales_by_the_bounding_area() {
        let cfg = parse_config("V_f = 0.32\nwidth = 2.0\nheight = 1.0\n").unwrap();
        assert!((cfg.target_volume - 0.64).abs() < 1e-15);
        // The hole still counts as part of the bounding region.
        let cfg = parse_config("algorithm = shape\nV_f = 0.5\nside = 1.0\n").unwrap();
        assert!((cfg.target_volume - 0.5).abs() < 1e-15);
    }

    #[test]
    fn conflicting_volume_keys_are_rejected() {
        let e = parse_config("C = 0.5\nV_f = 0.3\n").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("C") && msg.contains("V_f"), "{msg}");
    }

    #[test]
    fn unknown_algorithm_names_the_key_and_line() {
        let e = parse_config("# comment\nalgorithm = pf9\n").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("algorithm") && msg.contains("pf9"), "{msg}");
        assert!(msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_line() {
        let e = parse_config("E = 1.0\nfrobnicate = 3\n").unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
        assert!(e.to_string().contains("frobnicate"), "{e}");
    }

    #[test]
    fn duplicate_keys_are_rejected() {
        let e = parse_config("E = 1.0\nE = 2.0\n").unwrap_err();
        assert!(e.to_string().contains("already set"), "{e}");
    }

    #[test]
    fn geometry_keys_must_match_the_domain() {
        let e = parse_config("domain = rectangle\nhole_radius = 0.3\n").unwrap_err();
        assert!(e.to_string().contains("hole_radius"), "{e}");
    }

    #[test]
    fn boundary_rules_parse_sides_spans_and_tags() {
        let rules = parse_boundary_rules("left:D bottom[0.8,1.2]:C right[0.44,0.56]:N", 1).unwrap();
        assert_eq!(rules.len(), 3);
        assert_eq!(rules[0], BoundaryRule { side: Side::Left, span: None, tag: BoundaryTag::Dirichlet });
        assert_eq!(
            rules[1],
            BoundaryRule { side: Side::Bottom, span: Some((0.8, 1.2)), tag: BoundaryTag::Contact }
        );
        assert!(parse_boundary_rules("left:X", 1).is_err());
        assert!(parse_boundary_rules("diagonal:D", 1).is_err());
        assert!(parse_boundary_rules("left[1,0.5]:D", 1).is_err());
        assert!(parse_boundary_rules("", 1).is_err());
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let cfg = parse_config("\n# full line comment\nE = 2.0 # trailing comment\n\n").unwrap();
        assert_eq!(cfg.youngs, 2.0);
    }

    #[test]
    fn echo_round_trips_exactly() {
        for text in [
            "",
            "algorithm = shape\n",
            "algorithm = pf2\nseed = 31\ninitial_phi = constant:0.5\n",
            "algorithm = pf-td\ndomain = lshape\nouter = 2.0\nnotch = 1.0\nV_f = 0.4\n",
            "h = 0.123\nbc = left:D bottom[0.8,1.2]:C right[0.44,0.56]:N\nTol = 5e-4\n",
        ] {
            let cfg = parse_config(text).unwrap();
            let echo = echo_config(&cfg);
            let again = parse_config(&echo).unwrap();
            assert_eq!(cfg, again, "echo did not round-trip for input {text:?}");
            // The echo must pin the seed explicitly.
            assert!(echo.lines().any(|l| l.starts_with("seed = ")), "{echo}");
        }
    }

    #[test]
    fn pf_td_defaults_to_energy_and_full_material() {
        let cfg = parse_config("algorithm = pf-td\n").unwrap();
        assert_eq!(cfg.objective, ObjectiveKind::Energy);
        assert_eq!(cfg.initial_phi, InitialPhi::Constant(1.0));
    }
}

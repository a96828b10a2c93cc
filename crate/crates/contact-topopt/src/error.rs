//! Crate-wide error taxonomy.
//!
//! Errors are grouped by the stage that produced them so the command-line
//! driver can report a meaningful class and exit nonzero: configuration
//! parsing, mesh/domain construction, assembly, linear and nonlinear solves,
//! and file I/O.  Step rejection during mesh motion is an ordinary error here;
//! the optimization loops catch it and retry with a smaller step.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad or contradictory run configuration (includes parse errors with a
    /// 1-based line number when the source is a config file).
    #[error("config error{}: {msg}", line_suffix(*.line))]
    Config { line: Option<usize>, msg: String },

    /// Domain or mesh construction failed (degenerate geometry, hole touching
    /// the boundary, notch not aligned with the grid, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A mesh-motion step produced a non-positive triangle area.
    #[error("step rejected: triangle {triangle} would invert (signed area {area:.3e})")]
    StepRejected { triangle: usize, area: f64 },

    /// Assembly-time contract violation (non-positive coefficient, contact
    /// edge not axis-aligned, ...).
    #[error("assembly error: {0}")]
    Assembly(String),

    /// The linear solver detected a non-SPD reduced system.
    #[error("linear solve error: {0}")]
    Solve(String),

    /// Newton failed to converge within the iteration budget.
    #[error("newton did not converge after {iters} iterations (last residuals {trace:?})")]
    NewtonDiverged { iters: usize, trace: Vec<f64> },

    /// Requested combination of options is not supported.
    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

fn line_suffix(line: Option<usize>) -> String {
    match line {
        Some(n) => format!(" (line {n})"),
        None => String::new(),
    }
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config { line: None, msg: msg.into() }
    }

    pub fn config_at(line: usize, msg: impl Into<String>) -> Self {
        Error::Config { line: Some(line), msg: msg.into() }
    }

    /// Short class name used by the CLI when reporting failures.
    pub fn class(&self) -> &'static str {
        match self {
            Error::Config { .. } => "config",
            Error::Domain(_) => "domain",
            Error::StepRejected { .. } => "step-rejected",
            Error::Assembly(_) => "assembly",
            Error::Solve(_) => "solve",
            Error::NewtonDiverged { .. } => "newton",
            Error::Unsupported(_) => "unsupported",
            Error::Io(_) => "io",
        }
    }
}

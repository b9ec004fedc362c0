use thiserror::Error;

/// Errors raised by the plant, controller, simulator and feasibility search.
///
/// State indices carried by errors are 1-based (`index = 1` is `z1`/`x1`) so
/// that messages read the same way the control laws are written.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("barrier violated{}: |z{index}| = {z_abs} reaches k_b{index} = {bound}", at_time(.t))]
    BarrierViolation {
        index: usize,
        z_abs: f64,
        bound: f64,
        t: Option<f64>,
    },

    #[error("simulation diverged{}: {component} is not finite", at_time(.t))]
    SimulationDiverged { component: String, t: Option<f64> },

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("delay {delay} s is not an integer multiple of step {step} s")]
    DelayNotMultiple { delay: f64, step: f64 },

    #[error("no candidate satisfies the constraints; tightest violation: {tightest}")]
    EmptyFeasibleSet { tightest: String },
}

fn at_time(t: &Option<f64>) -> String {
    match t {
        Some(t) => format!(" at t = {t:.6} s"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    /// Attaches a simulation time to barrier and divergence errors.
    pub fn at(self, time: f64) -> Self {
        match self {
            Error::BarrierViolation {
                index,
                z_abs,
                bound,
                t: None,
            } => Error::BarrierViolation {
                index,
                z_abs,
                bound,
                t: Some(time),
            },
            Error::SimulationDiverged { component, t: None } => Error::SimulationDiverged {
                component,
                t: Some(time),
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            got,
        })
    }
}

pub(crate) fn check_positive(name: &str, values: &[f64]) -> Result<()> {
    for (i, v) in values.iter().enumerate() {
        if !(v.is_finite() && *v > 0.0) {
            return Err(Error::invalid(
                format!("{name}[{}]", i + 1),
                format!("must be finite and > 0, got {v}"),
            ));
        }
    }
    Ok(())
}

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failures reported by the numerical routines.
///
/// Hypothesis checks that are part of an experiment's *output* (for example the
/// Avalanche Principle flags) are not errors; they are returned as data.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("argument outside the certified strip: {0}")]
    Domain(String),

    #[error("step size fell below {min_step:e} at t = {t}")]
    StepFailure { t: f64, min_step: f64 },

    #[error("Avalanche Principle hypotheses failed on {failed} of {total} phases")]
    ApHypothesisFailure { failed: usize, total: usize },

    #[error("Lyapunov estimate {value} below positivity floor {floor}")]
    Positivity { value: f64, floor: f64 },

    #[error("Wronskian v_a(b) is numerically zero (log-ratio {log_ratio:.2}); E is close to a Dirichlet eigenvalue")]
    WronskianNearZero { log_ratio: f64 },

    #[error("norm lower bound fails: log|M_I| = {log_norm} < {required}")]
    HypothesisFailure { log_norm: f64, required: f64 },

    #[error("Green's function decay bound violated at (s, t) = ({s}, {t}): excess {excess:e}")]
    VerificationFailure { s: f64, t: f64, excess: f64 },

    #[error("v_a(b; E) has no sign change on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("quadrature unresolved: coefficient change {change:e} exceeds {allowed:e}")]
    QuadratureUnresolved { change: f64, allowed: f64 },

    #[error("surrogate deviation {deviation} exceeds budget {budget}")]
    SurrogateInaccurate { deviation: f64, budget: f64 },

    #[error("lattice scan of {points} points exceeds the budget of {budget}")]
    BudgetExceeded { points: f64, budget: f64 },

    #[error("malformed potential description: {0}")]
    Parse(String),
}

pub(crate) fn precondition<S: Into<String>>(ok: bool, msg: S) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Precondition(msg.into()))
    }
}

use thiserror::Error;

/// Errors raised by curve construction, operators and solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid error: {0}")]
    Grid(String),

    #[error("curve is not an immersion: min speed {min_speed:.3e} <= threshold {threshold:.3e}")]
    Immersion { min_speed: f64, threshold: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("symbol is not positive definite at mode {mode} (min eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveDefinite { mode: i64, min_eigenvalue: f64 },

    #[error("not supported: {0}")]
    NotSupported(String),

    #[error("invalid diffeomorphism: {0}")]
    Diffeo(String),

    #[error("mean residual {residual:.3e} exceeds {tolerance:.3e} of the integrand scale")]
    MeanResidual { residual: f64, tolerance: f64 },

    #[error("integration step produced non-finite values at t = {t}")]
    Step { t: f64 },

    #[error("immersion lost during integration at t = {t}: {source}")]
    ImmersionLost {
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("shooting did not converge: best residual {}", .0.residual)]
    NoConvergence(Box<crate::solver::ShootingResult>),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

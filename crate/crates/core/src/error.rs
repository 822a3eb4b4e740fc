use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid masses ({0}, {1}, {2}): every mass must be finite and positive")]
    InvalidMass(f64, f64, f64),

    #[error("bodies {i} and {j} collide (distance {distance:e})")]
    Collision { i: usize, j: usize, distance: f64 },

    #[error("configuration is the zero vector (triple collision)")]
    ZeroConfiguration,

    #[error("configuration is not centered (center-of-mass residual {residual:e})")]
    NotCentered { residual: f64 },

    #[error("iteration failed to converge: {0}")]
    Convergence(String),

    #[error("time must be positive, got {0}")]
    NonPositiveTime(f64),

    #[error("nu = {nu} lies within the indeterminate band around 1/8")]
    Boundary { nu: f64 },

    #[error("Euler configuration is not spiraling (nu = {nu} <= 1/8)")]
    NotSpiraling { nu: f64 },

    #[error("quadrature error estimate {estimate:e} too large for value {value:e}")]
    Quadrature { estimate: f64, value: f64 },

    #[error("step size underflow at tau = {tau} (h = {step:e})")]
    StepFailure { tau: f64, step: f64 },

    #[error("constraint residual {residual:e} after projection at tau = {tau}")]
    ConstraintBlowup { tau: f64, residual: f64 },

    #[error("eigenvalue {eigenvalue} is too close to the imaginary axis")]
    DegenerateSpectrum { eigenvalue: f64 },

    #[error("symplectic form is singular at radial coordinate {radial}")]
    SingularChart { radial: f64 },

    #[error("window [{a}, {b}] is not covered by trajectory times [{t_min}, {t_max}]")]
    Window {
        a: f64,
        b: f64,
        t_min: f64,
        t_max: f64,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// Whether the error reports bad caller input rather than a numerical
    /// failure.
    pub fn is_invalid_input(&self) -> bool {
        matches!(
            self,
            Error::InvalidMass(..)
                | Error::Collision { .. }
                | Error::ZeroConfiguration
                | Error::NotCentered { .. }
                | Error::NonPositiveTime(_)
                | Error::NotSpiraling { .. }
                | Error::Window { .. }
                | Error::InvalidInput(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

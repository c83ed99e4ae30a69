use crate::residuals::StateVector;

/// Starting point of the iteration.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum InitialGuess {
    /// Balanced 1 p.u. AC voltages aligned with the slack, nominal DC voltages.
    #[default]
    FlatStart,
    Provided(StateVector),
}

/// How the Jacobian is obtained each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum JacobianMode {
    #[default]
    Analytic,
    /// Analytic, but also compared against central differences with this
    /// step; the worst relative deviation is reported in the solution.
    FiniteDifferenceCheck(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Convergence threshold on the infinity norm of the mismatch vector.
    pub tolerance: f64,
    /// Maximum number of mismatch evaluations.
    pub max_iterations: usize,
    pub init: InitialGuess,
    /// Halve the Newton step while the mismatch grows.
    pub step_halving: bool,
    pub jacobian_mode: JacobianMode,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 50,
            init: InitialGuess::FlatStart,
            step_halving: true,
            jacobian_mode: JacobianMode::Analytic,
        }
    }
}

impl SolverOptions {
    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn with_max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    pub fn with_init(mut self, init: InitialGuess) -> Self {
        self.init = init;
        self
    }

    pub fn with_jacobian_mode(mut self, mode: JacobianMode) -> Self {
        self.jacobian_mode = mode;
        self
    }
}

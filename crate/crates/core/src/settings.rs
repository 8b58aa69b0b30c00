/// Newton solver settings shared by the reduced and the global solver.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverSettings {
    /// Convergence threshold on the residual max-norm.
    pub ftol: f64,
    pub max_iters: usize,
    /// Sufficient-decrease constant of the reduced solver's backtracking.
    pub armijo: f64,
    pub max_halvings: usize,
    /// Retry with the rate scaled by 1/100, 1/10, 1 after a failure.
    pub continuation: bool,
    /// First damping factor of the global solver.
    pub damp_initial: f64,
    /// Damping growth per global Newton step, capped at 1.
    pub damp_growth: f64,
    /// Rebuild the transport matrix in every global Newton step.
    pub force_full_reassembly: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            ftol: 1e-11,
            max_iters: 200,
            armijo: 1e-4,
            max_halvings: 30,
            continuation: true,
            damp_initial: 1.0,
            damp_growth: 1.2,
            force_full_reassembly: false,
        }
    }
}

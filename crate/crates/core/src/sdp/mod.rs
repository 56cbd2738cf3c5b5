//! Dense complex-Hermitian semidefinite programming.
//!
//! [`solve`] runs a primal-dual interior-point method on the homogeneous
//! self-dual embedding with Nesterov-Todd scaling and Mehrotra
//! predictor-corrector steps. Linearly dependent equality constraints are
//! removed before the iteration starts.

mod presolve;
mod problem;
mod solver;

pub use problem::{Constraint, ConstraintTerm, SdpProblem, Sense};
pub use solver::{feasibility, solve, Feasibility, SdpSolution, SolveStatus, SolverSettings};

/// Writes `problem` as JSON into the directory named by
/// `THERMOCERT_SOLVER_DEBUG_DIR` (default: the system temp dir) when
/// `THERMOCERT_SOLVER_DEBUG` is set. Returns the path written.
pub fn debug_dump(problem: &SdpProblem) -> Option<std::path::PathBuf> {
    use std::hash::{Hash, Hasher};

    std::env::var_os("THERMOCERT_SOLVER_DEBUG")?;
    let dir = std::env::var_os("THERMOCERT_SOLVER_DEBUG_DIR")
        .map(std::path::PathBuf::from)
        .unwrap_or_else(std::env::temp_dir);
    let json = problem.to_json().ok()?;
    let mut h = std::collections::hash_map::DefaultHasher::new();
    json.hash(&mut h);
    let path = dir.join(format!("sdp-{:016x}.json", h.finish()));
    std::fs::write(&path, json).ok()?;
    Some(path)
}

/// [`solve`], turning any status other than `Optimal` into an error that
/// names `what` and carries the final residuals.
pub fn solve_optimal(
    problem: &SdpProblem,
    settings: &SolverSettings,
    what: &str,
) -> crate::Result<SdpSolution> {
    let sol = solve(problem, settings)?;
    if sol.is_optimal() {
        return Ok(sol);
    }
    Err(crate::Error::Solver {
        status: sol.status,
        detail: format!(
            "{what}: {} iterations, primal residual {:e}, dual residual {:e}, gap {:e}",
            sol.iterations, sol.primal_residual, sol.dual_residual, sol.gap
        ),
    })
}

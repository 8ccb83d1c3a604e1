//! Deterministic solves on finite domains: killed Green functions, exit
//! times, hitting probabilities, Dirichlet problems and heat-kernel powers.

mod heat;
mod linalg;
mod solve;
mod table;

pub use heat::{
    heat_kernel_powers, heat_kernel_powers_with_budget, HeatKernelIter, HeatKernelTable,
    Restriction, DEFAULT_MEMORY_BUDGET,
};
pub use linalg::{Laplacian, SolverChoice, SpdSolver, DIRECT_LIMIT, RESIDUAL_TOL};
pub use solve::{
    exact_exit_time, exact_green, exact_hit_prob, outer_boundary, solve_dirichlet,
    solve_dirichlet_with, DirichletSolver, GreenSolver, Harmonic, HarmonicOperator, KilledKernel,
};
pub use table::{Domain, GreenTable, Quantity, TableKind};

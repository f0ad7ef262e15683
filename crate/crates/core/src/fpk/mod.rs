//! Controlled Fokker-Planck-Kolmogorov solver on the state grid.

mod banded;
mod generator;
mod monitors;
mod solver;

pub use generator::{build_generator, generator_growth, selling, ControlChoice, Generator, StepStencil};
pub use monitors::{apriori_monitor, gronwall_monitor, AprioriReport, GronwallReport};
pub use solver::{fpk_residual, solve_fpk, step_generators, Scheme, SolveOptions, SolveReport};

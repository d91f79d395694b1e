//! Comparison methods: minimum energy designs and Stein variational
//! gradient descent.

mod med;
mod svgd;

pub use med::{med_energy, med_greedy, med_log_objective, MedConfig};
pub use svgd::{svgd_grid, svgd_run, SvgdConfig};

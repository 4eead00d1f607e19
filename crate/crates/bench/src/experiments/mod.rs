//! One module per subcommand. Each exposes typed results for programmatic
//! use and converts them into output tables.

pub mod compare;
pub mod dynamics;
pub mod ito_bench;
pub mod maps;
pub mod optimize;
pub mod qsl;

use anyhow::Result;
use ito_core::generator::Generator;
use ito_core::models::QuditModel;
use ito_core::quantum::QuantumState;
use rayon::ThreadPool;

use crate::config::{RunConfig, Section};
use crate::output::Table;

/// Tables of one run plus bookkeeping of its independent tasks (sweep
/// cells, or targets for the QSL map). `error` is set when the run
/// could not complete; the tables then hold what was obtained before.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub tables: Vec<Table>,
    pub cells: usize,
    pub failed: usize,
    pub error: Option<String>,
}

pub fn run(cfg: &RunConfig, pool: &ThreadPool) -> Result<Report> {
    match &cfg.section {
        Section::ItoBench(c) => Ok(ito_bench::report(&ito_bench::run(c, pool))),
        Section::Compare(c) => Ok(compare::report(&compare::run(c, pool)?)),
        Section::Dynamics(c) => Ok(dynamics::report(c, &dynamics::run(c, pool))),
        Section::PopMap(c) => Ok(maps::report(&maps::run(c, false, pool), false)),
        Section::GateMap(c) => Ok(maps::report(&maps::run(c, true, pool), true)),
        Section::Optimize(c) => Ok(optimize::report(&optimize::run(c, pool))),
        Section::QslMap(c) => Ok(qsl::report(c, &qsl::run(c, cfg.seed, pool))),
    }
}

/// Lab-frame generator under the model's Pythagorean drive, and the ground
/// state (as a density matrix when dissipative).
fn qudit_lab(model: &QuditModel, dissipative: bool) -> Result<(Generator, QuantumState)> {
    let field = model.drive().coeff();
    let psi0 = QuantumState::basis(model.n_levels, 0);
    Ok(if dissipative {
        (model.lindblad_generator(field)?, psi0.to_density()?)
    } else {
        (model.hamiltonian_generator(field)?, psi0)
    })
}

//! Physical systems: driven and frequency-controlled oscillators, and the
//! dissipative anharmonic qudit.

mod ho;
mod qudit;

pub use ho::{
    driven_ho_analytic, driven_ho_z, ho_operators, ho_operators_scaled, ho_quadratures_squared, DrivenHoModel,
    FreqHoModel,
};
pub use qudit::{
    interaction_generator, interaction_hamiltonian, lindblad_ops, population_mismatch, pythagorean_field,
    PythagoreanDrive, QuditModel,
};

//! The worked examples: a fine-tuned cosmological constant, student test
//! scores, and molecular machines evolving under a Moran-type chain.

mod cosmology;
mod machine;
mod student;

pub use cosmology::{CosmologyBound, CosmologyModel, APPROX_TOL};
pub use machine::{
    build_machine, figure_equilibrium_sweep, figure_time_sweep, machine_labels, machine_null_mass, EquilibriumRow, MachineFamily,
    MachineModel, MachineNullFamily, MachineSystem, TimeRow, B_BOUNDS, MAX_PARTS,
};
pub use student::{upper_normal_tail, StudentModel};

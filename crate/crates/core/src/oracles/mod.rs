//! Independent reference results: dense state-vector evolution of finite
//! chains and free-fermion integrals for the transverse-field Ising chain.

pub mod dense;
pub mod free_fermion;

pub use dense::{
    check_light_cone, ed_evolve_expectation, ed_trajectory, ed_two_time_correlator, Chain, DenseState, Propagator,
};
pub use free_fermion::{tfim_ground_energy_per_site, tfim_ground_sigma_x, tfim_quench_plateau, tfim_quench_sigma_x};

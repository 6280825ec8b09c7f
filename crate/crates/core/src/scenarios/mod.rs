//! Scenario construction: calibrated parametric curves and the random
//! generator.

pub mod fixed;
pub mod io;
pub mod random;

pub use fixed::{calibrate_fixed_scenario, fixed_scenarios, preset_families, ParametricFamily};
pub use io::{read_ensemble, write_ensemble, EnsembleHeader};
pub use random::{
    mtd_counts, random_scenario, random_scenario_filtered, stratified_ensemble, vet, PostFilter, SceneConfig, Vetting,
};

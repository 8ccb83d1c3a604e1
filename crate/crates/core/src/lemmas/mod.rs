//! Runnable checks of the regularity estimates behind the inner bound.
//!
//! Each check evaluates one inequality on a concrete graph and returns a
//! [`CheckReport`] with the measured constants; constants that are only
//! known to exist are fitted, never assumed.

mod harmonic;
mod regularity;
mod report;
mod walks;

pub use harmonic::{
    check_harnack, check_oscillation, harmonic_family, harnack_ratio, oscillation_chain,
    oscillation_instance, HarmonicFamily, OscillationInstance, TestFunctions,
};
pub use regularity::{
    check_domination, check_excursion_lemma, check_exit_regularity, check_green_regularity,
    check_truncation, domination_margin, max_pair_difference, TailSampling, TruncationRow,
};
pub use report::{write_ndjson, CheckReport, Measured, REPORT_SCHEMA, THEOREM_TOL};
pub use walks::{
    check_carne_varopoulos, check_escape_conductance, check_heat_kernel_decay, ENDPOINT_GROWTH_TOL,
};

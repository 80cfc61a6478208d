//! Pulsed-pump spontaneous parametric down-conversion in a two-crystal
//! cascade: joint two-photon amplitudes, the delay-dependent overlap `v(T)`,
//! effective polarization states, and simulated tomography.
//!
//! Units throughout: time in fs, angular frequency in rad/fs, length in mm,
//! wavelength in nm.

// Validation uses `!(x > 0.0)` deliberately so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod amplitude;
pub mod entanglement;
pub mod error;
pub mod filter;
pub mod fit;
pub mod grid;
pub mod overlap;
pub mod par;
pub mod physics;
pub mod tomography;

pub use amplitude::{
    build_joint_amplitude, marginal_spectrum, normalize, to_frequency_domain, to_time_domain, Arm, JointAmplitude,
    Strictness,
};
pub use entanglement::{
    concurrence, effective_rho, interference_pattern, mixed_model_rho, visibility_from_pattern, BackgroundHandling,
    Branch, TwoQubitState, VisibilityEstimate,
};
pub use error::{Error, Result};
pub use filter::{apply_arm_filters, apply_filters, filter_response, FilterSpec};
pub use fit::{fwhm, gaussian_fit, GaussianFit};
pub use grid::{Axis, ComplexGrid2D, Curve1D, Domain, GridSpec, ResolutionWarning};
pub use overlap::{delay_grid, overlap_v, overlap_v_frequency, vcurve, OverlapKernel, Provenance, VCurve};
pub use physics::{
    effective_delay, filter_time_constant, phase_matching, phase_mismatch, pump_autocorrelation, pump_envelope,
    walkoff_delay, CrystalSpec, PrecompensatorSpec, PumpSpec, WalkoffLedger, WalkoffSegment,
};
pub use tomography::{
    born_probability, expected_counts, mle_reconstruct, projection_set, simulate_counts, simulate_pattern,
    stokes_magnitude, Analyzer, CountEntry, CountRecord, MLESettings, MleResult, PatternSample, ProjectorPair,
};

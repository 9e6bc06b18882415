//! Simulation and reconstruction of the two-photon hologram of a single photon.
//!
//! An unknown photon with an arbitrary local phase profile is overlapped with a
//! flat-phase reference photon on a 50/50 beam splitter. The joint distribution of
//! position-resolved coincidences encodes the phase profile of the unknown photon,
//! which this crate recovers with a two-stage optimization and characterizes with a
//! Poisson Monte-Carlo.
//!
//! Module map:
//!
//! * [`wavefunction`]: grids, discretized wavefunctions, mode shapes and phase masks.
//! * [`forward`]: two-photon amplitude, joint coincidence distribution, HOM statistics.
//! * [`sampler`]: simulated detector counts for the three half-wave-plate settings.
//! * [`retrieval`]: phase retrieval, gauge fixing and radius-of-curvature fits.
//! * [`uncertainty`]: Poisson resampling Monte-Carlo.
//! * [`io`]: text tables, matrix files and PGM renders.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod forward;
pub mod io;
pub mod optim;
pub mod polyfit;
pub mod retrieval;
pub mod rng;
pub mod sampler;
pub mod uncertainty;
pub mod wavefunction;

pub use error::{ErrorKind, HspError, Result};
pub use forward::{
    coincidence_probability, hom_dip_visibility, hsp_distribution, marginals, two_photon_amplitude,
    AmplitudeMatrix, JointDistribution,
};
pub use retrieval::{
    empirical_distribution, fit_radius, gauge_fix, global_poly_search, local_refine, objective,
    retrieve_from_distribution, retrieve_phase, retrieve_warm, GaugeRecord, PolyStage, RadiusFit,
    RetrievalConfig, RetrievalResult,
};
pub use sampler::{
    add_dark_counts, sample_coincidences, sample_marginal, simulate_experiment, CoincidenceCounts,
    CountData, DetectorConfig, MarginalCounts, MeasurementMode, SimulatedData,
};
pub use uncertainty::{
    mc_run, mc_run_with_base, poisson_resample, summarize_trials, McConfig, McSummary, TrialOutcome,
};
pub use wavefunction::{
    apply_lens_double_pass, apply_phase_profile, apply_quadratic_phase, gaussian_mode, make_grid,
    overlap, Grid, QuadraticPhase, Wavefunction, SUPPORT_THRESHOLD,
};

/// Wave number for 800 nm light, in rad/mm.
pub const K_800NM: f64 = 2.0 * std::f64::consts::PI / 800.0e-6;

//! Crosstalk-aware analysis of two-point source discrimination with spatial
//! mode demultiplexing (SPADE).
//!
//! Distances are in units of the point-spread-function width and `x` is the
//! half separation. The crate covers the mode model with crosstalk, Chernoff
//! exponents for SPADE and direct imaging, threshold tests on the
//! antisymmetric mode count with exact and Gaussian error probabilities, and
//! seeded Monte Carlo.

// Negated comparisons such as `!(x >= 0.0)` are used on purpose to reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Quadrature and Stirling tables keep their published digits.
#![allow(clippy::excessive_precision)]

pub mod binomial;
pub mod chernoff;
pub mod error;
pub mod hypothesis;
pub mod minimize;
pub mod montecarlo;
pub mod optics;
pub mod quadrature;

pub use chernoff::{
    chernoff_exponent, direct_imaging_chernoff, direct_imaging_chernoff_asymptotic, q_s,
    quantum_bound, spade_chernoff_asymptotic, AsymptoticBranch, ChernoffMethod, ChernoffResult,
};
pub use error::{Error, Result};
pub use hypothesis::{
    asymptotic_classification, asymptotic_error_limits, decide, error_probs_exact,
    error_probs_gaussian, full_lrt_decide, gamma_coefficient, plan_experiment, small_sep_prob,
    threshold, CountsRecord, ErrorLimits, ErrorMethod, ErrorReport, ExperimentPlan, Hypothesis,
    LimitClass, TestSpec,
};
pub use montecarlo::{
    empirical_error_rates, random_crosstalk, sample_counts, spade_chernoff, summarize, EnsembleRow,
    SampleStats,
};
pub use optics::{
    crosstalk_overlaps, crosstalk_strength, direct_imaging_intensity, hg_overlap_ideal,
    mode_probabilities, uniform_crosstalk, CrosstalkMatrix, CrosstalkModel, ImagingConfig,
    ModeDistribution, ModeIndex, Priors, Sign,
};

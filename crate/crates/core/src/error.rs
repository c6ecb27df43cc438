//! Error type shared by every module of the library.

use thiserror::Error;

/// Errors raised by the risk, dynamic-programming and experiment routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("length mismatch: {what} (expected {expected}, got {got})")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("negative probability {value} at position {index}")]
    NegativeProbability { index: usize, value: f64 },
    #[error("probabilities sum to {sum}, which deviates from 1 by more than 1e-9")]
    MassNotOne { sum: f64 },
    #[error("non-finite value in {what}")]
    NonFiniteValue { what: &'static str },
    #[error("empty sample")]
    EmptySample,
    #[error("alpha = {alpha} outside its admissible range {range}")]
    AlphaOutOfRange { alpha: f64, range: &'static str },
    #[error("tau = {tau} must be positive and finite")]
    TauOutOfRange { tau: f64 },
    #[error("ambiguity set is empty")]
    EmptyAmbiguitySet,
    #[error("ambiguity set has {got} members, specification declares {expected}")]
    AmbiguitySizeMismatch { expected: usize, got: usize },
    #[error("node {node} is a leaf")]
    LeafNode { node: usize },
    #[error("candidate {member} out of range at node {node} ({count} candidates)")]
    MemberOutOfRange {
        node: usize,
        member: usize,
        count: usize,
    },
    #[error("value of child node {child} has not been assigned")]
    ChildValueMissing { child: usize },
    #[error("node {node} carries {count} candidate child laws; use the robust evaluation")]
    AmbiguousCandidates { node: usize, count: usize },
    #[error("unknown node id {node}")]
    UnknownNode { node: usize },
    #[error("invalid scenario tree: {0}")]
    InvalidTree(String),
    #[error("leaf table has {got} entries, the product tree has {expected} paths")]
    PathTableIncomplete { expected: usize, got: usize },
    #[error("kappa is not positive ({context})")]
    KappaNotPositive { context: String },
    #[error("delta = {delta} outside (0, 1)")]
    DeltaOutOfRange { delta: f64 },
    #[error("epsilon = {eps} outside {range}")]
    EpsOutOfRange { eps: f64, range: &'static str },
    #[error("parameter {name} = {value} violates {requirement}")]
    ParameterOutOfRange {
        name: &'static str,
        value: f64,
        requirement: &'static str,
    },
    #[error("log argument 4LD/eps = {value} is not above 1")]
    NonpositiveLogArgument { value: f64 },
    #[error("beta * L = {beta_l} must exceed 1 for this sample-size bound")]
    BetaLRegime { beta_l: f64 },
    #[error("cdf slope {slope} below growth constant {c} on [{lo}, {hi}]")]
    GrowthViolated { slope: f64, c: f64, lo: f64, hi: f64 },
    #[error("invalid sampler: {0}")]
    InvalidSampler(String),
    #[error("model has an infinite horizon; a finite-horizon model is required")]
    InfiniteHorizonModel,
    #[error("model has a finite horizon; a discounted infinite-horizon model is required")]
    FiniteHorizonModel,
    #[error("value iteration did not reach tolerance after {iterations} iterations (last residual {last_residual})")]
    MaxIterExceeded {
        iterations: usize,
        last_residual: f64,
        residuals: Vec<f64>,
    },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("kernel ambiguity at stage {stage}, state {state}, action {action} is unresolved")]
    UnresolvedAmbiguity {
        stage: usize,
        state: usize,
        action: usize,
    },
    #[error("enumeration of {count} kernel selections exceeds the limit {limit}")]
    EnumerationTooLarge { count: u128, limit: u128 },
    #[error("matrix of size {rows}x{cols} exceeds the {limit}x{limit} solver budget")]
    MatrixTooLarge {
        rows: usize,
        cols: usize,
        limit: usize,
    },
    #[error("invalid payoff matrix: {0}")]
    InvalidMatrix(String),
    #[error("index {index} out of range for {what} (len {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },
    #[error("invalid risk profile: {0}")]
    InvalidProfile(String),
}

impl Error {
    /// Stable machine-readable code used by the CLI and the C interface.
    pub fn code(&self) -> &'static str {
        match self {
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::NegativeProbability { .. } => "negative_probability",
            Error::MassNotOne { .. } => "mass_not_one",
            Error::NonFiniteValue { .. } => "non_finite_value",
            Error::EmptySample => "empty_sample",
            Error::AlphaOutOfRange { .. } => "alpha_out_of_range",
            Error::TauOutOfRange { .. } => "tau_out_of_range",
            Error::EmptyAmbiguitySet => "empty_ambiguity_set",
            Error::AmbiguitySizeMismatch { .. } => "ambiguity_size_mismatch",
            Error::LeafNode { .. } => "leaf_node",
            Error::MemberOutOfRange { .. } => "member_out_of_range",
            Error::ChildValueMissing { .. } => "child_value_missing",
            Error::AmbiguousCandidates { .. } => "ambiguous_candidates",
            Error::UnknownNode { .. } => "unknown_node",
            Error::InvalidTree(_) => "invalid_tree",
            Error::PathTableIncomplete { .. } => "path_table_incomplete",
            Error::KappaNotPositive { .. } => "kappa_not_positive",
            Error::DeltaOutOfRange { .. } => "delta_out_of_range",
            Error::EpsOutOfRange { .. } => "eps_out_of_range",
            Error::ParameterOutOfRange { .. } => "parameter_out_of_range",
            Error::NonpositiveLogArgument { .. } => "nonpositive_log_argument",
            Error::BetaLRegime { .. } => "beta_l_regime",
            Error::GrowthViolated { .. } => "growth_violated",
            Error::InvalidSampler(_) => "invalid_sampler",
            Error::InfiniteHorizonModel => "infinite_horizon_model",
            Error::FiniteHorizonModel => "finite_horizon_model",
            Error::MaxIterExceeded { .. } => "max_iter_exceeded",
            Error::InvalidModel(_) => "invalid_model",
            Error::UnresolvedAmbiguity { .. } => "unresolved_ambiguity",
            Error::EnumerationTooLarge { .. } => "enumeration_too_large",
            Error::MatrixTooLarge { .. } => "matrix_too_large",
            Error::InvalidMatrix(_) => "invalid_matrix",
            Error::IndexOutOfRange { .. } => "index_out_of_range",
            Error::InvalidProfile(_) => "invalid_profile",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn ensure_finite(values: &[f64], what: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteValue { what })
    }
}

thread_local! {
    static LAST_VALIDATION: std::cell::RefCell<Option<Error>> = const { std::cell::RefCell::new(None) };
}

/// Deserialization reports validation failures as plain messages; the typed
/// error is kept here so callers can tell them apart from syntax errors.
pub(crate) fn record_validation<T>(r: Result<T>) -> Result<T> {
    if let Err(e) = &r {
        LAST_VALIDATION.with(|c| *c.borrow_mut() = Some(e.clone()));
    }
    r
}

/// Typed error behind the most recent failed deserialization on this thread.
pub fn take_validation_error() -> Option<Error> {
    LAST_VALIDATION.with(|c| c.borrow_mut().take())
}

//! Gradient-subspace global search for high-dimensional objectives.
//!
//! Local gradient ascent runs as usual; every so often a search round takes the
//! dominant directions of the recent gradients, evaluates a small context set
//! around the current parameters, and lets a cheap surrogate screen large
//! candidate pools so that only the most promising candidate per iteration is
//! truly evaluated.
//!
//! Modules:
//! - [`subspace`]: gradient window, truncated-SVD basis, lifting coordinates.
//! - [`sampler`]: seeded Gaussian candidates projected onto a trust region.
//! - [`surrogate`]: context sets, built-in surrogates, remote protocol client.
//! - [`search`]: search rounds, baselines, and the interleaving driver.
//! - [`objectives`]: benchmark objectives with gradient oracles.
//! - [`metrics`]: rank agreement, top-1 percentile, improvement, steps-to-threshold.

pub mod metrics;
pub mod objectives;
pub mod sampler;
pub mod search;
pub mod subspace;
pub mod surrogate;

pub use objectives::{LqrConfig, LqrRollout, Objective, ObjectiveError, PlantedQuadratic};
pub use sampler::{gaussian_sample, project_ball, RngStream, TrustRegion};
pub use search::{
    interleave, Adam, Evaluator, GlobalSearch, GradientAscent, Method, Phase, RoundTrace, RunSpec, SearchConfig,
    SearchError, TrainingTrace,
};
pub use subspace::{build_basis, GradientWindow, ParameterVector, SubspaceBasis, SubspaceError};
pub use surrogate::{ContextSet, SurrogateKind};

//! Identifiability of degree-corrected stochastic block models.
//!
//! A parameter system `(Z, Θ, B)` generates the expected adjacency matrix
//! `Δ = ΘZBZᵀΘ`. Systems related by a permutation of community labels and a
//! per-community rescaling generate the same Δ ([`equivalence`]); the
//! [`recovery`] algorithms go the other way, from a full Δ or from Δ with
//! its diagonal deleted back to a canonical system, and report when the
//! data cannot determine one. [`counterexamples`] holds pairs of
//! inequivalent systems that agree off the diagonal.

pub mod cli;
pub mod counterexamples;
pub mod equivalence;
pub mod generate;
pub mod io;
pub mod linalg;
pub mod model;
pub mod partitions;
pub mod recovery;
pub mod sampler;

pub use equivalence::{
    apply_transform, canonicalize, equivalent, same_model_offdiag, Equivalence, Mismatch,
};
pub use model::{
    check_min_size, community_sizes, expected_adjacency, offdiag_project, validate_system,
    CommunityAssignment, ConnectivityMatrix, DegreeParams, ExpectedMatrix, MatrixKind,
    ParameterSystem,
};
pub use partitions::{GaugeTransform, Partition};
pub use recovery::{
    lowrank_complete, offdiag_partition, offdiag_recover, reconstruct_diagonal, spectral_recover,
    RecoveryError, RecoveryReport,
};

//! Exact relevance certification for finite decision problems.
//!
//! The crate computes optimizer quotients and the sufficiency/relevance
//! structure of finite decision problems with exact rational utilities,
//! applies certification-preserving closure moves with explicit transports,
//! builds and checks orbit-gap witnesses for representation-level predicates
//! of binary pairwise slices, and evaluates bounded-pattern classifiers.

pub mod certify;
pub mod classifier;
pub mod closure;
pub mod error;
pub mod obstruction;
pub mod pairwise;
pub mod problem;
pub mod random;
pub mod rational;
pub mod realize;
pub mod reductions;
pub mod space;
pub mod stability;
pub mod taxonomy;

pub use certify::{
    certification_profile, is_relevant, is_sufficient, optimizer_set, quotient, Analysis,
    CertificationProfile, CoordSet, Limits, QuotientPartition,
};
pub use error::{Error, Result};
pub use problem::{ActionId, DecisionProblem, ProblemDocument};
pub use rational::Rational;
pub use space::{CoordinateSpace, ExplicitSpace, StateSpace};
pub use pairwise::{Coefficients, GraphMode, InteractionGraph, PairwiseSlice, SliceDocument, TargetKind};
pub use realize::{realize_equivalence, realize_labeling, Labeling};
pub use closure::{apply_trace, replay, verify_invariance, ClosureStep, ClosureTarget, ClosureTrace, InvarianceReport};
pub use classifier::{evaluate_scheme, LocalPattern, PatternBounds, PatternScheme};
pub use obstruction::{falsify_classifier, make_family, verify_bundle, FiniteUniverse, SearchConfig, Target, WitnessBundle};

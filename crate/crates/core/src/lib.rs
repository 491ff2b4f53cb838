//! Group detection and group-evolution analysis for timing-mat streams of
//! mass-participation races.
//!
//! The crate is `no_std` (with `alloc`). Enable the `std` feature to get
//! `std::error::Error` on the error types through `thiserror`.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod engine;
pub mod evolution;
pub mod longterm;
pub mod online;
pub mod oracle;
pub mod patterns;
pub mod relation;
pub mod synth;

pub use engine::{Component, ComponentState, Engine, EngineOutput, Group, QueryError, StreamAnomaly, StreamAnomalyKind, StreamError};
pub use evolution::{DegreeView, EvolutionError, EvolutionGraph, GroupId, HistoryEntry, PrecursorEdge, PrecursorGraph, RelationEdge};
pub use longterm::{
    build_global, compute_labels, longest, longest_all, sweep_backward_labels, sweep_forward_labels, GlobalError, GlobalGraph, Labels,
    LongTermLabels, LongestKind, LongestResult,
};
pub use online::{classify_online, PairTracker, PatternUpdate};
pub use oracle::{oracle_groups, oracle_longterm, oracle_patterns, OracleError, OracleGroup, OracleLimits, OraclePatterns};
pub use patterns::{
    classify_source, classify_target, collect_patterns, coverage_diagnostics, detect_patterns, in_precedence_corner, Diagnostic,
    DiagnosticKind, Mode, Pattern, PatternError, PatternKind, PatternRecord, PatternSet,
};
pub use relation::{
    inclusion, strongly_related, weakly_related, AthleteId, AthleteSet, ControlPoint, Course, Event, Inclusion, Mu, ParamError, Params,
    RelationError, Timestamp,
};
pub use synth::{
    generate, mass_start, random_instance, Behavior, BehaviorMix, ConfigError, GeneratorConfig, GroundTruth, Instance, MassStartConfig,
    Plan, ScriptStep,
};

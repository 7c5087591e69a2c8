//! Authoring, administration, scoring and statistics for personality
//! questionnaires.
//!
//! A test is a set of items answered from one shared answer set. Each
//! psychological category scores a subset of the items through a scale that
//! assigns points to every answer option; the total is then placed in one of
//! the category's norm bands, which carries the interpretation text.
//!
//! - [`model`] and [`scoring`]: the data model and the scoring arithmetic.
//! - [`validate`]: structural rule checks.
//! - [`generator`] and [`format`]: editing operations and the `.ptest.json` file.
//! - [`executor`] and [`session_log`]: administering a test and the session log.
//! - [`statistics`]: aggregation over many sessions and CSV export.

pub mod executor;
pub mod fixtures;
pub mod format;
pub mod generator;
pub mod model;
pub mod scoring;
pub mod session_log;
pub mod statistics;
pub mod validate;

pub use format::{parse_test, serialize_test, FormatError, TestDocument};
pub use model::*;
pub use scoring::{band_of, compute_max_score, compute_min_score, raw_score, ScoreError};
pub use validate::{validate, Violation, ViolationCode};

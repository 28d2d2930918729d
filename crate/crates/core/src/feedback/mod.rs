//! Score-to-scene mapping, pseudofeedback, session schedules and
//! questionnaire validation.

mod engine;
mod pseudo;
mod responses;
mod scene;
mod schedule;

use thiserror::Error;

pub use engine::FeedbackEngine;
pub use pseudo::{PseudoFeedback, PSEUDO_START, PSEUDO_STEP_SD};
pub use responses::{misc_label, validate_likert, validate_misc, LikertResponse, MiscResponse, LIKERT_ANCHORS};
pub use scene::{map_score_to_scene, SceneCatalog, SceneDefinition, SceneState, SMOOTHING};
pub use schedule::{build_schedule, ScheduleEvent, ScheduleKind, SessionMode, SESSION_MINUTES};

#[derive(Debug, Error, PartialEq)]
pub enum FeedbackError {
    #[error("MISC value {0} outside 0-10")]
    MiscOutOfRange(i64),
    #[error("MISC label {label:?} does not match value {value} ({expected:?})")]
    MiscLabelMismatch {
        value: u8,
        label: String,
        expected: String,
    },
    #[error("Likert value {0} outside 1-7")]
    LikertOutOfRange(i64),
    #[error("scene catalog: {0}")]
    Catalog(String),
}

use serde::{Deserialize, Serialize};

use crate::feedback::SceneState;

/// One line of `events.log` and one message on the broadcast stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    /// Seconds of recorded signal since session start.
    pub t: f64,
    #[serde(flatten)]
    pub payload: EventPayload,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneSource {
    /// Driven by the EEG score (RMS).
    Eeg,
    /// Driven by the pseudofeedback walk (PMS).
    Pseudo,
    /// Scheduled scene change.
    Reset,
    /// Guidance volume changed by the user.
    Guidance,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatusKind {
    Started,
    Completed,
    Aborted,
    LikertRecorded,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EventPayload {
    /// EEG mindfulness score for one window, emitted in every mode.
    ScoreUpdate {
        window_index: u64,
        window_start: f64,
        score: f64,
        probability: f64,
    },
    SceneState {
        source: SceneSource,
        /// Score that drove the update, for EEG and pseudo updates.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        driver: Option<f64>,
        scene: SceneState,
    },
    MiscPrompt {
        /// Minutes from session start.
        prompt_time: f64,
    },
    MiscAck {
        prompt_time: f64,
        value: u8,
        label: String,
    },
    SessionStatus {
        status: StatusKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        detail: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        likert: Option<u8>,
    },
    /// The window spans a break in the sample stream; no score.
    Gap { window_index: u64, window_start: f64 },
    /// Scoring exceeded the hop period, or the window was skipped to catch up.
    Overrun {
        window_index: u64,
        latency_ms: f64,
        dropped: bool,
    },
}

impl EventPayload {
    pub fn type_name(&self) -> &'static str {
        match self {
            EventPayload::ScoreUpdate { .. } => "score_update",
            EventPayload::SceneState { .. } => "scene_state",
            EventPayload::MiscPrompt { .. } => "misc_prompt",
            EventPayload::MiscAck { .. } => "misc_ack",
            EventPayload::SessionStatus { .. } => "session_status",
            EventPayload::Gap { .. } => "gap",
            EventPayload::Overrun { .. } => "overrun",
        }
    }
}

impl SessionEvent {
    pub fn new(t: f64, payload: EventPayload) -> Self {
        SessionEvent { t, payload }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("events serialize")
    }
}

use serde::{Deserialize, Serialize};

use super::scene::SceneCatalog;

pub const SESSION_MINUTES: u32 = 90;
/// Scene segments last ten minutes in the feedback conditions.
const SCENE_SEGMENT_MINUTES: u32 = 10;

/// Experimental condition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SessionMode {
    /// Real-feedback mindfulness: scenes follow the EEG score.
    #[serde(rename = "RMS")]
    Rms,
    /// Pseudofeedback mindfulness: scenes follow a random walk.
    #[serde(rename = "PMS")]
    Pms,
    /// Rest: no feedback.
    #[serde(rename = "RS")]
    Rs,
}

impl SessionMode {
    pub fn duration_minutes(self) -> u32 {
        SESSION_MINUTES
    }

    pub fn misc_interval_minutes(self) -> u32 {
        match self {
            SessionMode::Rs => 2,
            SessionMode::Rms | SessionMode::Pms => 10,
        }
    }

    pub fn feedback_enabled(self) -> bool {
        self != SessionMode::Rs
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SessionMode::Rms => "RMS",
            SessionMode::Pms => "PMS",
            SessionMode::Rs => "RS",
        }
    }
}

impl std::fmt::Display for SessionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SessionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_uppercase().as_str() {
            "RMS" => Ok(SessionMode::Rms),
            "PMS" => Ok(SessionMode::Pms),
            "RS" => Ok(SessionMode::Rs),
            _ => Err(format!("unknown mode {s:?}; expected RMS, PMS or RS")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleKind {
    SessionStart,
    SceneReset { scene_id: String },
    MiscPrompt,
    SessionEnd,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleEvent {
    pub minute: u32,
    #[serde(flatten)]
    pub kind: ScheduleKind,
}

/// Timeline of a session, ordered by minute. Within a minute: start, scene
/// reset, MISC prompt, end.
pub fn build_schedule(mode: SessionMode, catalog: &SceneCatalog) -> Vec<ScheduleEvent> {
    let end = mode.duration_minutes();
    let mut events = vec![ScheduleEvent {
        minute: 0,
        kind: ScheduleKind::SessionStart,
    }];
    let step = mode.misc_interval_minutes();
    for minute in 0..=end {
        if mode.feedback_enabled() && minute < end && minute % SCENE_SEGMENT_MINUTES == 0 {
            let segment = (minute / SCENE_SEGMENT_MINUTES) as usize;
            events.push(ScheduleEvent {
                minute,
                kind: ScheduleKind::SceneReset {
                    scene_id: catalog.nth(segment).id.clone(),
                },
            });
        }
        if minute % step == 0 {
            events.push(ScheduleEvent {
                minute,
                kind: ScheduleKind::MiscPrompt,
            });
        }
    }
    events.push(ScheduleEvent {
        minute: end,
        kind: ScheduleKind::SessionEnd,
    });
    events
}

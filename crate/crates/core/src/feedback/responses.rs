use serde::{Deserialize, Serialize};

use super::FeedbackError;

const NO_NAUSEA: &str = "Dizziness, warmth, headache, stomach, awareness, sweating, and other symptoms, but no nausea";

/// Canonical MISC label for a value: the symptom group, then the severity
/// grade where the table has one.
pub fn misc_label(value: u8) -> Option<String> {
    let label = match value {
        0 => "No problems".to_string(),
        1 => "Uneasiness (no typical symptoms)".to_string(),
        2..=5 => format!("{NO_NAUSEA}, {}", ["Vague", "Slight", "Fairly", "Severe"][value as usize - 2]),
        6..=9 => format!("Nausea, {}", ["Slight", "Fairly", "Severe", "Retching"][value as usize - 6]),
        10 => "Vomiting".to_string(),
        _ => return None,
    };
    Some(label)
}

fn normalise(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Checks a MISC answer. The label must be the value's row of the table;
/// case and runs of whitespace are ignored.
pub fn validate_misc(value: i64, label: &str) -> Result<u8, FeedbackError> {
    let v = u8::try_from(value)
        .ok()
        .filter(|v| *v <= 10)
        .ok_or(FeedbackError::MiscOutOfRange(value))?;
    let expected = misc_label(v).expect("in range");
    if normalise(label) != normalise(&expected) {
        return Err(FeedbackError::MiscLabelMismatch {
            value: v,
            label: label.to_string(),
            expected,
        });
    }
    Ok(v)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MiscResponse {
    /// Minutes from session start of the prompt being answered.
    pub prompt_time: f64,
    pub value: u8,
    pub label: String,
}

impl MiscResponse {
    pub fn new(prompt_time: f64, value: i64, label: &str) -> Result<Self, FeedbackError> {
        let value = validate_misc(value, label)?;
        Ok(MiscResponse {
            prompt_time,
            value,
            label: misc_label(value).expect("validated"),
        })
    }

    /// Response built from the value alone, with the canonical label.
    pub fn from_value(prompt_time: f64, value: i64) -> Result<Self, FeedbackError> {
        let v = u8::try_from(value)
            .ok()
            .filter(|v| *v <= 10)
            .ok_or(FeedbackError::MiscOutOfRange(value))?;
        Ok(MiscResponse {
            prompt_time,
            value: v,
            label: misc_label(v).expect("in range"),
        })
    }
}

/// Anchors of the 7-point scale.
pub const LIKERT_ANCHORS: [(u8, &str); 2] = [(1, "strongly agree"), (7, "strongly disagree")];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LikertResponse {
    pub value: u8,
}

pub fn validate_likert(value: i64) -> Result<LikertResponse, FeedbackError> {
    match value {
        1..=7 => Ok(LikertResponse { value: value as u8 }),
        _ => Err(FeedbackError::LikertOutOfRange(value)),
    }
}

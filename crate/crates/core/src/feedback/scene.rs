use std::path::Path;

use serde::{Deserialize, Serialize};

use super::FeedbackError;

/// Weight of the new target in each update; the rest is the current state.
pub const SMOOTHING: f64 = 0.3;

/// Parametric audiovisual state rendered by the UI.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneState {
    pub scene_id: String,
    /// Flame strength or tree bloom, depending on the scene.
    pub element_intensity: f64,
    pub background_brightness: f64,
    pub background_volume: f64,
    /// Set by the user, never by scores.
    pub guidance_volume: f64,
    /// Seconds since session start.
    pub timestamp: f64,
}

impl SceneState {
    pub fn initial(scene_id: impl Into<String>, guidance_volume: f64) -> Self {
        SceneState {
            scene_id: scene_id.into(),
            element_intensity: 0.0,
            background_brightness: 0.0,
            background_volume: 0.0,
            guidance_volume: clamp_unit(guidance_volume),
            timestamp: 0.0,
        }
    }

    /// The score-driven parameters.
    pub fn driven(&self) -> [f64; 3] {
        [self.element_intensity, self.background_brightness, self.background_volume]
    }
}

fn clamp_unit(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

/// Moves every score-driven parameter 30% of the way towards `score / 100`.
/// A NaN score leaves the state as it was.
pub fn map_score_to_scene(score: f64, current: &SceneState, timestamp: f64) -> SceneState {
    let mut next = current.clone();
    next.timestamp = timestamp;
    if score.is_nan() {
        return next;
    }
    let target = (score / 100.0).clamp(0.0, 1.0);
    let blend = |c: f64| clamp_unit(SMOOTHING * target + (1.0 - SMOOTHING) * c);
    next.element_intensity = blend(current.element_intensity);
    next.background_brightness = blend(current.background_brightness);
    next.background_volume = blend(current.background_volume);
    next
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneDefinition {
    pub id: String,
    /// What `element_intensity` drives in this scene.
    pub element: String,
    #[serde(default)]
    pub description: String,
}

/// Scenes available to the engine, loaded from a TOML manifest:
///
/// ```toml
/// [[scene]]
/// id = "candle"
/// element = "flame"
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneCatalog {
    #[serde(rename = "scene")]
    pub scenes: Vec<SceneDefinition>,
}

impl Default for SceneCatalog {
    fn default() -> Self {
        let def = |id: &str, element: &str, description: &str| SceneDefinition {
            id: id.into(),
            element: element.into(),
            description: description.into(),
        };
        SceneCatalog {
            scenes: vec![
                def("candle", "flame", "candle flame in a dark room"),
                def("campfire", "flame", "campfire under a night sky"),
                def("desert", "bloom", "desert tree that blooms"),
            ],
        }
    }
}

impl SceneCatalog {
    pub fn parse(text: &str) -> Result<Self, FeedbackError> {
        let catalog: SceneCatalog = toml::from_str(text).map_err(|e| FeedbackError::Catalog(e.to_string()))?;
        if catalog.scenes.is_empty() {
            return Err(FeedbackError::Catalog("no scenes".into()));
        }
        for (i, s) in catalog.scenes.iter().enumerate() {
            if s.id.trim().is_empty() {
                return Err(FeedbackError::Catalog(format!("scene {i} has an empty id")));
            }
            if catalog.scenes[..i].iter().any(|o| o.id == s.id) {
                return Err(FeedbackError::Catalog(format!("duplicate scene id {:?}", s.id)));
            }
        }
        Ok(catalog)
    }

    pub fn load(path: &Path) -> Result<Self, FeedbackError> {
        let text = std::fs::read_to_string(path).map_err(|e| FeedbackError::Catalog(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Scene shown in the `n`-th segment; the catalog cycles.
    pub fn nth(&self, n: usize) -> &SceneDefinition {
        &self.scenes[n % self.scenes.len()]
    }
}

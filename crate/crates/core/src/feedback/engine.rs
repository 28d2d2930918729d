use super::pseudo::PseudoFeedback;
use super::scene::{map_score_to_scene, SceneCatalog, SceneState};
use super::schedule::SessionMode;

/// Single-owner feedback state machine. Real scores drive the scene in RMS,
/// the pseudofeedback walk drives it in PMS, and RS has no scene at all.
#[derive(Clone, Debug)]
pub struct FeedbackEngine {
    mode: SessionMode,
    catalog: SceneCatalog,
    pseudo: PseudoFeedback,
    scene: Option<SceneState>,
}

impl FeedbackEngine {
    pub fn new(mode: SessionMode, catalog: SceneCatalog, seed: u64, guidance_volume: f64) -> Self {
        let scene = mode
            .feedback_enabled()
            .then(|| SceneState::initial(catalog.nth(0).id.clone(), guidance_volume));
        FeedbackEngine {
            mode,
            catalog,
            pseudo: PseudoFeedback::new(seed),
            scene,
        }
    }

    pub fn mode(&self) -> SessionMode {
        self.mode
    }

    pub fn scene(&self) -> Option<&SceneState> {
        self.scene.as_ref()
    }

    /// Advances one hop. `eeg_score` is the real score for this window (None
    /// for a gap). Returns the score that drove the scene, if any, with the
    /// new scene state. In PMS the walk advances even across gaps so the
    /// sham keeps the real condition's cadence.
    pub fn on_window(&mut self, eeg_score: Option<f64>, timestamp: f64) -> Option<(f64, SceneState)> {
        let driver = match self.mode {
            SessionMode::Rs => return None,
            SessionMode::Rms => eeg_score?,
            SessionMode::Pms => self.pseudo.next_score(),
        };
        let current = self.scene.as_ref().expect("feedback modes have a scene");
        let next = map_score_to_scene(driver, current, timestamp);
        self.scene = Some(next.clone());
        Some((driver, next))
    }

    /// Applies a scheduled scene reset. Score-driven parameters carry over;
    /// only the scene changes.
    pub fn reset_scene(&mut self, scene_id: &str, timestamp: f64) -> Option<SceneState> {
        let scene = self.scene.as_mut()?;
        scene.scene_id = scene_id.to_string();
        scene.timestamp = timestamp;
        Some(scene.clone())
    }

    pub fn catalog(&self) -> &SceneCatalog {
        &self.catalog
    }

    pub fn set_guidance_volume(&mut self, volume: f64) -> Option<SceneState> {
        let scene = self.scene.as_mut()?;
        scene.guidance_volume = if volume.is_nan() { 0.0 } else { volume.clamp(0.0, 1.0) };
        Some(scene.clone())
    }
}

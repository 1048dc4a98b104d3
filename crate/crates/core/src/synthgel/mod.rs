//! Synthetic desk-scale data rig: random scenes, scripted presses, a top-down
//! camera view with an arm sprite, and a gel sensor image with a marker grid.
//!
//! Everything is a pure function of `(config, seed)`.

mod disk;
mod scene;
mod script;
mod sequence;
mod tactile;
mod vision;

use serde::{Deserialize, Serialize};

pub use disk::{read_annotation, read_sequence, touch_path, vision_path, write_sequence, AnnotationFile};
pub use scene::{make_scene, SceneObject, SceneSpec, Shape, ShapeKind, MIN_CANVAS};
pub use script::{sample_script, TouchScript, MIN_FRAMES};
pub use sequence::{synthesize_sequence, ContactAnnotation, FrameAnnotation, TouchSequence};
pub use tactile::{marker_displacement, MarkerGrid, TactileParams, TactileRenderer};
pub use vision::{render_vision, ArmSprite, ArmState};

use crate::error::{Error, Result};

/// Generator settings for scenes and touch scripts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub width: usize,
    pub height: usize,
    /// Inclusive range of objects per scene.
    pub object_count: [usize; 2],
    pub shapes: Vec<ShapeKind>,
    /// Frames per sequence.
    pub frames: usize,
    /// Inclusive range of press lengths.
    pub press_frames: [usize; 2],
    pub ramp_frames: usize,
    pub peak_pressure: [f64; 2],
    /// Probability that a touch lands on bare desk rather than an object.
    pub desk_touch_prob: f64,
    pub tactile: TactileParams,
    pub arm: ArmSprite,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self::for_canvas(128, 128)
    }
}

impl SynthConfig {
    /// 64-frame presses; contact in roughly 40% of frames.
    pub fn for_canvas(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            object_count: [4, 10],
            shapes: vec![ShapeKind::Disk, ShapeKind::Rectangle, ShapeKind::Ridge],
            frames: 64,
            press_frames: [22, 30],
            ramp_frames: 5,
            peak_pressure: [0.5, 1.0],
            desk_touch_prob: 0.6,
            tactile: TactileParams::for_canvas(width, height),
            arm: ArmSprite::for_canvas(width, height),
        }
    }

    /// Distance touch targets keep from the border.
    pub fn touch_margin(&self) -> f64 {
        self.tactile.contact_radius.max(self.arm.half_size + 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        scene::check_canvas(self.width, self.height)?;
        let [lo, hi] = self.object_count;
        if lo == 0 || lo > hi || hi > 10 {
            return Err(Error::Config(format!(
                "object count range [{lo}, {hi}] must lie within [1, 10]"
            )));
        }
        if self.shapes.is_empty() {
            return Err(Error::Config("empty shape palette".into()));
        }
        if self.frames < MIN_FRAMES {
            return Err(Error::Config(format!(
                "{} frames per sequence; need at least {MIN_FRAMES}",
                self.frames
            )));
        }
        let [pmin, pmax] = self.press_frames;
        if pmin > pmax || pmax + 2 > self.frames {
            return Err(Error::Config(format!(
                "press range [{pmin}, {pmax}] does not fit {} frames",
                self.frames
            )));
        }
        let [a, b] = self.peak_pressure;
        if !(a > 0.0 && a <= b && b <= 1.0) {
            return Err(Error::Config(format!("peak pressure range [{a}, {b}]")));
        }
        if !(0.0..=1.0).contains(&self.desk_touch_prob) {
            return Err(Error::Config("desk_touch_prob must be a probability".into()));
        }
        if 2.0 * self.touch_margin() + 1.0 >= self.width.min(self.height) as f64 {
            return Err(Error::Config("canvas too small for the contact window".into()));
        }
        Ok(())
    }
}

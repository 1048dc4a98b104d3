use serde::{Deserialize, Serialize};

use super::scene::SceneSpec;
use super::script::TouchScript;
use super::tactile::{MarkerGrid, TactileRenderer};
use super::vision::{render_vision, ArmSprite, ArmState};
use super::SynthConfig;
use crate::error::Result;
use crate::image::Image;

/// Simulator ground truth for one frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameAnnotation {
    pub t: usize,
    /// Contact centre of this touch, in pixels of both the vision frame and
    /// the gel image.
    pub center: [f64; 2],
    pub pressure: f64,
    pub in_contact: bool,
    pub arm: Option<ArmState>,
    /// Analytic push of every marker, row-major over the grid (px).
    pub marker_displacements: Vec<[f64; 2]>,
}

impl FrameAnnotation {
    /// Mean analytic marker displacement magnitude.
    pub fn mean_displacement(&self) -> f64 {
        if self.marker_displacements.is_empty() {
            return 0.0;
        }
        self.marker_displacements
            .iter()
            .map(|d| d[0].hypot(d[1]))
            .sum::<f64>()
            / self.marker_displacements.len() as f64
    }
}

/// Ground truth for a whole sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactAnnotation {
    pub frames: Vec<FrameAnnotation>,
    /// First frame with positive pressure.
    pub t_on: Option<usize>,
    /// Last frame with positive pressure.
    pub t_off: Option<usize>,
    pub marker_grid: MarkerGrid,
    pub arm_sprite: ArmSprite,
}

impl ContactAnnotation {
    pub fn pressures(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.pressure).collect()
    }

    /// Frame of maximal pressure (first on ties).
    pub fn peak_frame(&self) -> Option<usize> {
        let t_on = self.t_on?;
        let t_off = self.t_off?;
        (t_on..=t_off).reduce(|best, t| {
            if self.frames[t].pressure > self.frames[best].pressure {
                t
            } else {
                best
            }
        })
    }
}

/// Synchronized vision and gel frames for one touch.
#[derive(Clone, Debug, PartialEq)]
pub struct TouchSequence {
    pub scene: SceneSpec,
    pub script: TouchScript,
    pub vision: Vec<Image>,
    pub tactile: Vec<Image>,
    pub ref_vision: Image,
    pub ref_tactile: Image,
    pub annotation: ContactAnnotation,
}

impl TouchSequence {
    pub fn len(&self) -> usize {
        self.vision.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vision.is_empty()
    }
}

/// Render every frame of `script` on `scene`, index-aligned across both
/// modalities.
pub fn synthesize_sequence(
    scene: &SceneSpec,
    script: &TouchScript,
    config: &SynthConfig,
) -> Result<TouchSequence> {
    script.validate(scene.width, scene.height)?;
    let tactile = TactileRenderer::new(config.tactile.clone(), scene.width, scene.height);
    let ref_vision = scene.render();
    let n = script.frames();
    let mut frames = Vec::with_capacity(n);
    for t in 0..n {
        let pressure = script.pressure_at(t);
        frames.push(FrameAnnotation {
            t,
            center: script.target,
            pressure,
            in_contact: pressure > 0.0,
            arm: script.arm_at(t),
            marker_displacements: tactile.displacements(script.target, pressure),
        });
    }
    let t_on = frames.iter().position(|f| f.in_contact);
    let t_off = frames.iter().rposition(|f| f.in_contact);
    let vision = frames
        .iter()
        .map(|f| render_vision(&ref_vision, f.arm.as_ref(), &config.arm))
        .collect();
    let tactile_frames = frames.iter().map(|f| tactile.render(f)).collect();
    Ok(TouchSequence {
        scene: scene.clone(),
        script: script.clone(),
        vision,
        tactile: tactile_frames,
        ref_tactile: tactile.reference().clone(),
        ref_vision,
        annotation: ContactAnnotation {
            frames,
            t_on,
            t_off,
            marker_grid: tactile.grid().clone(),
            arm_sprite: config.arm.clone(),
        },
    })
}

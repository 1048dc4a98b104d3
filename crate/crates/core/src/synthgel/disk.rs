//! On-disk sequence layout:
//!
//! ```text
//! <seq_dir>/vision_0000.png ... vision_NNNN.png
//! <seq_dir>/touch_0000.png  ... touch_NNNN.png
//! <seq_dir>/ref_vision.png
//! <seq_dir>/ref_touch.png
//! <seq_dir>/annotation.json
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::scene::SceneSpec;
use super::script::TouchScript;
use super::sequence::{ContactAnnotation, FrameAnnotation, TouchSequence};
use super::tactile::MarkerGrid;
use super::vision::ArmSprite;
use crate::error::{Error, Result};
use crate::image::Image;

pub const ANNOTATION_VERSION: u32 = 1;

/// Contents of `annotation.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotationFile {
    pub format_version: u32,
    pub seq_id: String,
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub t_on: Option<usize>,
    pub t_off: Option<usize>,
    pub target: [f64; 2],
    pub marker_grid: MarkerGrid,
    pub arm_sprite: ArmSprite,
    pub scene: SceneSpec,
    pub script: TouchScript,
    pub per_frame: Vec<FrameAnnotation>,
}

impl AnnotationFile {
    pub fn contact(&self) -> ContactAnnotation {
        ContactAnnotation {
            frames: self.per_frame.clone(),
            t_on: self.t_on,
            t_off: self.t_off,
            marker_grid: self.marker_grid.clone(),
            arm_sprite: self.arm_sprite.clone(),
        }
    }
}

pub fn vision_path(dir: &Path, t: usize) -> std::path::PathBuf {
    dir.join(format!("vision_{t:04}.png"))
}

pub fn touch_path(dir: &Path, t: usize) -> std::path::PathBuf {
    dir.join(format!("touch_{t:04}.png"))
}

pub fn write_sequence(dir: &Path, seq_id: &str, seq: &TouchSequence) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (t, (v, g)) in seq.vision.iter().zip(&seq.tactile).enumerate() {
        v.save_png(&vision_path(dir, t))?;
        g.save_png(&touch_path(dir, t))?;
    }
    seq.ref_vision.save_png(&dir.join("ref_vision.png"))?;
    seq.ref_tactile.save_png(&dir.join("ref_touch.png"))?;
    let a = &seq.annotation;
    let file = AnnotationFile {
        format_version: ANNOTATION_VERSION,
        seq_id: seq_id.to_string(),
        width: seq.scene.width,
        height: seq.scene.height,
        frames: seq.len(),
        t_on: a.t_on,
        t_off: a.t_off,
        target: seq.script.target,
        marker_grid: a.marker_grid.clone(),
        arm_sprite: a.arm_sprite.clone(),
        scene: seq.scene.clone(),
        script: seq.script.clone(),
        per_frame: a.frames.clone(),
    };
    let path = dir.join("annotation.json");
    let json = serde_json::to_string_pretty(&file).map_err(|source| Error::Json {
        path: path.clone(),
        source,
    })?;
    fs::write(&path, json).map_err(|e| Error::io(&path, e))
}

pub fn read_annotation(dir: &Path) -> Result<AnnotationFile> {
    let path = dir.join("annotation.json");
    let text = fs::read_to_string(&path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => {
            Error::MissingData(format!("{} not found", path.display()))
        }
        _ => Error::io(&path, e),
    })?;
    let file: AnnotationFile =
        serde_json::from_str(&text).map_err(|source| Error::Json { path, source })?;
    if file.format_version != ANNOTATION_VERSION {
        return Err(Error::Invalid(format!(
            "annotation format {} (expected {ANNOTATION_VERSION})",
            file.format_version
        )));
    }
    Ok(file)
}

/// Load a sequence back from disk (frames as stored, i.e. 8-bit quantized).
pub fn read_sequence(dir: &Path) -> Result<(AnnotationFile, TouchSequence)> {
    let ann = read_annotation(dir)?;
    let mut vision = Vec::with_capacity(ann.frames);
    let mut tactile = Vec::with_capacity(ann.frames);
    for t in 0..ann.frames {
        vision.push(Image::load_png(&vision_path(dir, t))?);
        tactile.push(Image::load_png(&touch_path(dir, t))?);
    }
    let seq = TouchSequence {
        scene: ann.scene.clone(),
        script: ann.script.clone(),
        vision,
        tactile,
        ref_vision: Image::load_png(&dir.join("ref_vision.png"))?,
        ref_tactile: Image::load_png(&dir.join("ref_touch.png"))?,
        annotation: ann.contact(),
    };
    Ok((ann, seq))
}

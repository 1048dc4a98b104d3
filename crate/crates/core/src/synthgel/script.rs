use rand::Rng;
use serde::{Deserialize, Serialize};

use super::scene::SceneSpec;
use super::vision::ArmState;
use super::SynthConfig;
use crate::error::{Error, Result};

/// Shortest sequence that still admits a full ±4 temporal window.
pub const MIN_FRAMES: usize = 9;

/// One press: the arm approaches the target, presses, and lifts away.
///
/// Pressure is zero while approaching and releasing. During the press it
/// rises over `ramp_frames` frames (smoothstep), holds at `peak_pressure`,
/// and falls back symmetrically, staying strictly positive throughout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TouchScript {
    pub target: [f64; 2],
    pub approach_frames: usize,
    pub press_frames: usize,
    pub release_frames: usize,
    pub peak_pressure: f64,
    pub ramp_frames: usize,
    /// Where the arm enters the view.
    pub arm_start: [f64; 2],
    /// Where the arm leaves the view.
    pub arm_exit: [f64; 2],
}

impl TouchScript {
    pub fn frames(&self) -> usize {
        self.approach_frames + self.press_frames + self.release_frames
    }

    pub fn validate(&self, width: usize, height: usize) -> Result<()> {
        let [x, y] = self.target;
        if !(x >= 0.0 && y >= 0.0 && x <= (width - 1) as f64 && y <= (height - 1) as f64) {
            return Err(Error::Invalid(format!(
                "touch target ({x}, {y}) outside {width}x{height} canvas"
            )));
        }
        if self.frames() < MIN_FRAMES {
            return Err(Error::Invalid(format!(
                "script has {} frames, need at least {MIN_FRAMES}",
                self.frames()
            )));
        }
        if self.approach_frames == 0 {
            return Err(Error::Invalid(
                "frame 0 must be contact-free (approach_frames >= 1)".into(),
            ));
        }
        if !(self.peak_pressure > 0.0 && self.peak_pressure <= 1.0) {
            return Err(Error::Invalid(format!(
                "peak pressure {} not in (0, 1]",
                self.peak_pressure
            )));
        }
        Ok(())
    }

    pub fn pressure_at(&self, t: usize) -> f64 {
        let start = self.approach_frames;
        let p = self.press_frames;
        if t < start || t >= start + p {
            return 0.0;
        }
        let k = t - start;
        let ramp = self.ramp_frames.min(p / 2);
        let step = |i: usize| smoothstep((i + 1) as f64 / (ramp + 1) as f64);
        let rise = if k < ramp { step(k) } else { 1.0 };
        let fall = if p - 1 - k < ramp { step(p - 1 - k) } else { 1.0 };
        self.peak_pressure * rise.min(fall)
    }

    /// Arm pose at frame `t`; `None` before the arm enters (frame 0).
    pub fn arm_at(&self, t: usize) -> Option<ArmState> {
        if t == 0 || t >= self.frames() {
            return None;
        }
        let a = self.approach_frames;
        let p = self.press_frames;
        if t < a {
            // Glide in during the first half, descend throughout.
            let u = t as f64 / a as f64;
            Some(ArmState {
                tip: lerp(self.arm_start, self.target, (2.0 * u).min(1.0)),
                height: 1.0 - u,
            })
        } else if t < a + p {
            Some(ArmState {
                tip: self.target,
                height: 0.0,
            })
        } else {
            let k = t - (a + p) + 1;
            let u = k as f64 / self.release_frames as f64;
            Some(ArmState {
                tip: lerp(self.target, self.arm_exit, (2.0 * u - 1.0).max(0.0)),
                height: u,
            })
        }
    }
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

fn lerp(a: [f64; 2], b: [f64; 2], u: f64) -> [f64; 2] {
    [a[0] + (b[0] - a[0]) * u, a[1] + (b[1] - a[1]) * u]
}

/// Draw a script for `scene`. With probability `desk_touch_prob` the target
/// is bare desk, otherwise a point on an object; either way it keeps a
/// margin from the border so the contact window stays on the gel.
pub fn sample_script<R: Rng + ?Sized>(
    scene: &SceneSpec,
    config: &SynthConfig,
    rng: &mut R,
) -> TouchScript {
    let (w, h) = (scene.width, scene.height);
    let margin = config.touch_margin();
    let inner = |v: usize| (margin.ceil() as usize)..(v - margin.ceil() as usize);
    let (xs, ys) = (inner(w), inner(h));
    let mut desk = Vec::new();
    let mut objects = Vec::new();
    for y in ys.clone() {
        for x in xs.clone() {
            if scene.object_at(x as f64, y as f64).is_some() {
                objects.push([x as f64, y as f64]);
            } else {
                desk.push([x as f64, y as f64]);
            }
        }
    }
    let on_desk = rng.random_bool(config.desk_touch_prob);
    let pool = match (on_desk, desk.is_empty(), objects.is_empty()) {
        (_, true, _) => &objects,
        (_, _, true) => &desk,
        (true, _, _) => &desk,
        (false, _, _) => &objects,
    };
    let target = pool[rng.random_range(0..pool.len())];

    let frames = config.frames;
    let [pmin, pmax] = config.press_frames;
    let press = rng.random_range(pmin..=pmax).min(frames - 2);
    let rest = frames - press;
    let approach = ((rest as f64 * rng.random_range(0.45..0.65)).round() as usize).clamp(1, rest - 1);
    let [lo, hi] = config.peak_pressure;
    let edge_point = |rng: &mut R| {
        [
            rng.random_range(margin..(w as f64 - 1.0 - margin)),
            rng.random_range(margin..(h as f64 - 1.0 - margin)),
        ]
    };
    TouchScript {
        target,
        approach_frames: approach,
        press_frames: press,
        release_frames: rest - approach,
        peak_pressure: rng.random_range(lo..=hi),
        ramp_frames: config.ramp_frames,
        arm_start: edge_point(rng),
        arm_exit: edge_point(rng),
    }
}

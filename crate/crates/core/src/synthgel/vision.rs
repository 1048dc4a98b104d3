//! Top-down webcam view: the scene plus an arm sprite and its shadow.

use serde::{Deserialize, Serialize};

use crate::image::Image;

/// Square end-effector body centred on the tip, with a small triangular
/// pointer on its upper side; the pointer is short enough that the sprite's
/// area centroid stays within a pixel or so of the tip. The shadow is the same shape shifted down-right in
/// proportion to the arm's height.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmSprite {
    /// Half side of the body square (px).
    pub half_size: f64,
    /// Height of the pointer triangle (px).
    pub pointer: f64,
    /// Shadow offset at unit height (px).
    pub shadow_offset: f64,
    pub shadow_factor: f64,
    pub color: [f64; 3],
}

impl ArmSprite {
    pub fn for_canvas(width: usize, height: usize) -> Self {
        let side = width.min(height) as f64;
        let half_size = (side / 16.0).round().max(2.0);
        Self {
            half_size,
            pointer: (half_size / 2.0).max(1.0),
            shadow_offset: side / 10.0,
            shadow_factor: 0.65,
            // Brighter in gray than any desk or object tone.
            color: [1.0, 1.0, 0.6],
        }
    }

    /// Does the sprite cover offset `(dx, dy)` from the tip?
    pub fn covers(&self, dx: f64, dy: f64) -> bool {
        let hs = self.half_size;
        if dx.abs() <= hs && dy.abs() <= hs {
            return true;
        }
        let top = -hs - self.pointer;
        if dy >= top && dy < -hs {
            let frac = (dy - top) / self.pointer;
            return dx.abs() <= hs * frac;
        }
        false
    }

    /// Bounding box relative to the tip: `(min_dx, min_dy, max_dx, max_dy)`.
    pub fn bbox(&self) -> (f64, f64, f64, f64) {
        let hs = self.half_size;
        (-hs, -hs - self.pointer, hs, hs)
    }

    /// Diagonal of the bounding box in pixels.
    pub fn diagonal(&self) -> f64 {
        let (x0, y0, x1, y1) = self.bbox();
        (x1 - x0 + 1.0).hypot(y1 - y0 + 1.0)
    }
}

/// Arm pose in one frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmState {
    pub tip: [f64; 2],
    /// 0 when the sensor touches the surface, 1 at the top of the motion.
    pub height: f64,
}

/// Composite the arm over the vision reference. `None` reproduces the
/// reference exactly.
pub fn render_vision(reference: &Image, arm: Option<&ArmState>, sprite: &ArmSprite) -> Image {
    let mut img = reference.clone();
    let Some(arm) = arm else {
        return img;
    };
    let (w, h) = (img.width(), img.height());
    let (x0, y0, x1, y1) = sprite.bbox();
    let shift = arm.height * sprite.shadow_offset;
    let span = |lo: f64, hi: f64, limit: usize| {
        let a = lo.floor().max(0.0) as usize;
        let b = (hi.ceil() as isize).min(limit as isize - 1);
        (a, b)
    };

    if shift > 0.0 {
        let sx = arm.tip[0] + shift;
        let sy = arm.tip[1] + shift;
        let (ax, bx) = span(sx + x0, sx + x1, w);
        let (ay, by) = span(sy + y0, sy + y1, h);
        for y in ay as isize..=by {
            for x in ax as isize..=bx {
                let (xu, yu) = (x as usize, y as usize);
                if sprite.covers(x as f64 - sx, y as f64 - sy) {
                    for c in 0..3 {
                        let v = img.get(c, xu, yu) * sprite.shadow_factor as f32;
                        img.set(c, xu, yu, v);
                    }
                }
            }
        }
    }

    let [tx, ty] = arm.tip;
    let (ax, bx) = span(tx + x0, tx + x1, w);
    let (ay, by) = span(ty + y0, ty + y1, h);
    for y in ay as isize..=by {
        for x in ax as isize..=bx {
            if sprite.covers(x as f64 - tx, y as f64 - ty) {
                for c in 0..3 {
                    img.set(c, x as usize, y as usize, sprite.color[c] as f32);
                }
            }
        }
    }
    img
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SynthConfig;
use crate::error::{Error, Result};
use crate::image::Image;

/// Smallest canvas that still fits a marker grid and an arm sprite.
pub const MIN_CANVAS: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Disk,
    Rectangle,
    Ridge,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    /// Dome-profiled disk.
    Disk { radius: f64 },
    /// Flat-topped box with bevelled edges.
    Rectangle { half_w: f64, half_h: f64 },
    /// Elongated bar with a triangular cross-section, rotated by `angle`.
    Ridge {
        half_len: f64,
        half_width: f64,
        angle: f64,
    },
}

impl Shape {
    /// Radius of a disk centred on the object that contains it.
    pub fn bounding_radius(&self) -> f64 {
        match *self {
            Shape::Disk { radius } => radius,
            Shape::Rectangle { half_w, half_h } => half_w.hypot(half_h),
            Shape::Ridge {
                half_len,
                half_width,
                ..
            } => half_len.hypot(half_width),
        }
    }

    /// Height profile in `[0, 1]` at offset `(dx, dy)`, or `None` outside.
    pub fn profile(&self, dx: f64, dy: f64) -> Option<f64> {
        match *self {
            Shape::Disk { radius } => {
                let r2 = (dx * dx + dy * dy) / (radius * radius);
                (r2 <= 1.0).then(|| (1.0 - r2).sqrt())
            }
            Shape::Rectangle { half_w, half_h } => {
                let inside = dx.abs() <= half_w && dy.abs() <= half_h;
                inside.then(|| {
                    let edge = (half_w - dx.abs()).min(half_h - dy.abs());
                    (edge / 2.0).min(1.0)
                })
            }
            Shape::Ridge {
                half_len,
                half_width,
                angle,
            } => {
                let (s, c) = angle.sin_cos();
                let along = dx * c + dy * s;
                let across = -dx * s + dy * c;
                (along.abs() <= half_len && across.abs() <= half_width)
                    .then(|| 1.0 - across.abs() / half_width)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub shape: Shape,
    /// Centre in pixel coordinates (pixel centres sit on integers).
    pub center: [f64; 2],
    /// Grayscale reflectance.
    pub albedo: f64,
}

impl SceneObject {
    pub fn profile_at(&self, x: f64, y: f64) -> Option<f64> {
        self.shape.profile(x - self.center[0], y - self.center[1])
    }
}

/// A desk with primitive objects, fully determined by its seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub objects: Vec<SceneObject>,
    pub desk_albedo: f64,
    pub rng_seed: u64,
}

impl SceneSpec {
    /// Topmost object covering the pixel, painter's order.
    pub fn object_at(&self, x: f64, y: f64) -> Option<(&SceneObject, f64)> {
        self.objects
            .iter()
            .rev()
            .find_map(|o| o.profile_at(x, y).map(|p| (o, p)))
    }

    /// Contact-free vision frame (the vision reference).
    pub fn render(&self) -> Image {
        let mut img = Image::new(self.width, self.height, 3);
        for y in 0..self.height {
            for x in 0..self.width {
                let v = match self.object_at(x as f64, y as f64) {
                    Some((o, profile)) => o.albedo * (0.8 + 0.2 * profile),
                    None => self.desk_albedo,
                } as f32;
                for c in 0..3 {
                    img.set(c, x, y, v);
                }
            }
        }
        img
    }
}

/// Build a random scene. Deterministic in `(config, seed)`.
pub fn make_scene(config: &SynthConfig, seed: u64) -> Result<SceneSpec> {
    config.validate()?;
    let (w, h) = (config.width, config.height);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [lo, hi] = config.object_count;
    let count = rng.random_range(lo..=hi);
    let desk_albedo = rng.random_range(0.35..0.55);
    let min_side = w.min(h) as f64;
    let mut objects = Vec::with_capacity(count);
    for _ in 0..count {
        let kind = config.shapes[rng.random_range(0..config.shapes.len())];
        let size = rng.random_range(0.06..0.14) * min_side;
        let shape = match kind {
            ShapeKind::Disk => Shape::Disk { radius: size },
            ShapeKind::Rectangle => Shape::Rectangle {
                half_w: size,
                half_h: size * rng.random_range(0.5..1.2),
            },
            ShapeKind::Ridge => Shape::Ridge {
                half_len: size * 1.3,
                half_width: size * 0.35,
                angle: rng.random_range(0.0..std::f64::consts::PI),
            },
        };
        let r = shape.bounding_radius();
        let center = [
            rng.random_range(r..(w as f64 - 1.0 - r)),
            rng.random_range(r..(h as f64 - 1.0 - r)),
        ];
        // Keep objects visible against the desk.
        let albedo = loop {
            let a: f64 = rng.random_range(0.15..0.85);
            if (a - desk_albedo).abs() > 0.12 {
                break a;
            }
        };
        objects.push(SceneObject {
            shape,
            center,
            albedo,
        });
    }
    Ok(SceneSpec {
        width: w,
        height: h,
        objects,
        desk_albedo,
        rng_seed: seed,
    })
}

pub(crate) fn check_canvas(width: usize, height: usize) -> Result<()> {
    if width < MIN_CANVAS || height < MIN_CANVAS {
        return Err(Error::Config(format!(
            "canvas {width}x{height} is smaller than {MIN_CANVAS}x{MIN_CANVAS}"
        )));
    }
    Ok(())
}

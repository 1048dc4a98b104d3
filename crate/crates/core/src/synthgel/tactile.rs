//! Gel membrane: marker flow field and shaded indentation rendering.

use serde::{Deserialize, Serialize};

use super::sequence::FrameAnnotation;
use crate::image::Image;

/// Membrane and illumination parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TactileParams {
    pub grid_rows: usize,
    pub grid_cols: usize,
    /// Marker dot radius (px).
    pub marker_radius: f64,
    /// Peak radial marker push at unit pressure (px).
    pub marker_amplitude: f64,
    /// Width of the contact window, shared by the indentation and the
    /// marker flow (px).
    pub contact_radius: f64,
    /// Regularizer of the radial direction at the contact centre.
    pub epsilon: f64,
    /// Indentation depth at unit pressure, as a multiple of `contact_radius`.
    pub indent_depth: f64,
    pub shading_gain: f64,
    /// Elevation of the three coloured lights (radians).
    pub light_elevation: f64,
    /// Intensity of a marker dot.
    pub marker_intensity: f64,
}

impl TactileParams {
    /// Defaults scaled to a canvas. At 128 px this is an 11×11 grid with a
    /// 4 px peak push.
    pub fn for_canvas(width: usize, height: usize) -> Self {
        let side = width.min(height) as f64;
        let grid = if side >= 96.0 { 11 } else { 8 };
        let spacing = side / grid as f64;
        Self {
            grid_rows: grid,
            grid_cols: grid,
            marker_radius: (0.2 * spacing).max(1.0),
            marker_amplitude: side / 32.0,
            contact_radius: 0.15 * side,
            epsilon: 1e-6,
            indent_depth: 0.8,
            shading_gain: 0.5,
            light_elevation: std::f64::consts::FRAC_PI_4,
            marker_intensity: 0.06,
        }
    }
}

/// Nominal (undeformed) marker layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkerGrid {
    pub rows: usize,
    pub cols: usize,
    pub origin: [f64; 2],
    pub spacing: [f64; 2],
    pub radius: f64,
}

impl MarkerGrid {
    pub fn for_image(params: &TactileParams, width: usize, height: usize) -> Self {
        let sx = width as f64 / params.grid_cols as f64;
        let sy = height as f64 / params.grid_rows as f64;
        // Pixel centres sit on integers, so the image spans [-0.5, w - 0.5].
        Self {
            rows: params.grid_rows,
            cols: params.grid_cols,
            origin: [sx / 2.0 - 0.5, sy / 2.0 - 0.5],
            spacing: [sx, sy],
            radius: params.marker_radius,
        }
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major nominal positions.
    pub fn positions(&self) -> Vec<[f64; 2]> {
        (0..self.rows)
            .flat_map(|i| {
                (0..self.cols).map(move |j| {
                    [
                        self.origin[0] + j as f64 * self.spacing[0],
                        self.origin[1] + i as f64 * self.spacing[1],
                    ]
                })
            })
            .collect()
    }
}

/// Radial Gaussian-windowed push of one marker away from the contact centre:
/// `p · A · exp(−|m−c|²/2σ²) · (m−c)/(|m−c|+ε)`.
pub fn marker_displacement(
    marker: [f64; 2],
    center: [f64; 2],
    pressure: f64,
    params: &TactileParams,
) -> [f64; 2] {
    if pressure <= 0.0 {
        return [0.0, 0.0];
    }
    let dx = marker[0] - center[0];
    let dy = marker[1] - center[1];
    let r2 = dx * dx + dy * dy;
    let sigma = params.contact_radius;
    let window = (-r2 / (2.0 * sigma * sigma)).exp();
    let s = pressure * params.marker_amplitude * window / (r2.sqrt() + params.epsilon);
    [s * dx, s * dy]
}

/// Renders gel images for one canvas size; caches the contact-free
/// reference.
#[derive(Clone, Debug)]
pub struct TactileRenderer {
    params: TactileParams,
    grid: MarkerGrid,
    width: usize,
    height: usize,
    background: Image,
    reference: Image,
}

impl TactileRenderer {
    pub fn new(params: TactileParams, width: usize, height: usize) -> Self {
        let grid = MarkerGrid::for_image(&params, width, height);
        let background = illumination(&params, width, height);
        let mut reference = background.clone();
        let rest: Vec<[f64; 2]> = grid.positions();
        stamp_markers(&mut reference, &rest, &params);
        Self {
            params,
            grid,
            width,
            height,
            background,
            reference,
        }
    }

    pub fn params(&self) -> &TactileParams {
        &self.params
    }

    pub fn grid(&self) -> &MarkerGrid {
        &self.grid
    }

    pub fn reference(&self) -> &Image {
        &self.reference
    }

    /// Analytic displacements of every marker for a contact.
    pub fn displacements(&self, center: [f64; 2], pressure: f64) -> Vec<[f64; 2]> {
        self.grid
            .positions()
            .into_iter()
            .map(|m| marker_displacement(m, center, pressure, &self.params))
            .collect()
    }

    /// Shaded indentation plus displaced markers. A frame without pressure is
    /// the reference, bit for bit.
    pub fn render(&self, frame: &FrameAnnotation) -> Image {
        if frame.pressure <= 0.0 {
            return self.reference.clone();
        }
        let p = &self.params;
        let mut img = self.background.clone();
        let [cx, cy] = frame.center;
        let sigma = p.contact_radius;
        let depth = frame.pressure * p.indent_depth * sigma;
        let lights = lights(p.light_elevation);
        let flat = p.light_elevation.sin();
        for y in 0..self.height {
            for x in 0..self.width {
                let dx = x as f64 - cx;
                let dy = y as f64 - cy;
                let g = depth * (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp() / (sigma * sigma);
                // h = -depth·exp(..) so ∇h = g·(dx, dy); normal ∝ (-hx, -hy, 1).
                let (nx, ny) = (-g * dx, -g * dy);
                let norm = (nx * nx + ny * ny + 1.0).sqrt();
                for (c, l) in lights.iter().enumerate() {
                    let lambert = (nx * l[0] + ny * l[1] + l[2]) / norm;
                    let v = img.get(c, x, y) as f64 + p.shading_gain * (lambert - flat);
                    img.set(c, x, y, v.clamp(0.0, 1.0) as f32);
                }
            }
        }
        let moved: Vec<[f64; 2]> = self
            .grid
            .positions()
            .iter()
            .zip(&frame.marker_displacements)
            .map(|(m, d)| [m[0] + d[0], m[1] + d[1]])
            .collect();
        stamp_markers(&mut img, &moved, p);
        img
    }
}

fn lights(elevation: f64) -> [[f64; 3]; 3] {
    let (se, ce) = elevation.sin_cos();
    let mut out = [[0.0; 3]; 3];
    for (c, l) in out.iter_mut().enumerate() {
        let az = c as f64 * 2.0 * std::f64::consts::PI / 3.0;
        *l = [ce * az.cos(), ce * az.sin(), se];
    }
    out
}

/// Uneven LED illumination of the flat gel.
fn illumination(p: &TactileParams, width: usize, height: usize) -> Image {
    let mut img = Image::new(width, height, 3);
    let light = lights(p.light_elevation);
    for y in 0..height {
        for x in 0..width {
            let u = x as f64 / width as f64 - 0.5;
            let v = y as f64 / height as f64 - 0.5;
            for (c, l) in light.iter().enumerate() {
                let norm = l[0].hypot(l[1]);
                let tilt = (u * l[0] + v * l[1]) / norm;
                img.set(c, x, y, (0.55 + 0.12 * tilt) as f32);
            }
        }
    }
    img
}

/// Anti-aliased dark dots (4×4 supersampled coverage).
fn stamp_markers(img: &mut Image, centers: &[[f64; 2]], p: &TactileParams) {
    const SS: usize = 4;
    let (w, h) = (img.width() as isize, img.height() as isize);
    let r = p.marker_radius;
    let dark = p.marker_intensity as f32;
    for &[mx, my] in centers {
        let x0 = (mx - r - 1.0).floor() as isize;
        let x1 = (mx + r + 1.0).ceil() as isize;
        let y0 = (my - r - 1.0).floor() as isize;
        let y1 = (my + r + 1.0).ceil() as isize;
        for y in y0.max(0)..=y1.min(h - 1) {
            for x in x0.max(0)..=x1.min(w - 1) {
                let mut hits = 0;
                for sy in 0..SS {
                    for sx in 0..SS {
                        let px = x as f64 - 0.5 + (sx as f64 + 0.5) / SS as f64;
                        let py = y as f64 - 0.5 + (sy as f64 + 0.5) / SS as f64;
                        if (px - mx).powi(2) + (py - my).powi(2) <= r * r {
                            hits += 1;
                        }
                    }
                }
                if hits == 0 {
                    continue;
                }
                let cov = hits as f32 / (SS * SS) as f32;
                for c in 0..3 {
                    let v = img.get(c, x as usize, y as usize);
                    img.set(c, x as usize, y as usize, v * (1.0 - cov) + dark * cov);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> TactileParams {
        TactileParams {
            marker_amplitude: 4.0,
            contact_radius: 10.0,
            epsilon: 0.0,
            ..TactileParams::for_canvas(128, 128)
        }
    }

    #[test]
    fn zero_pressure_gives_zero_displacement() {
        assert_eq!(
            marker_displacement([3.0, 4.0], [10.0, 10.0], 0.0, &params()),
            [0.0, 0.0]
        );
    }

    #[test]
    fn marker_at_centre_does_not_move() {
        let p = TactileParams {
            epsilon: 1e-6,
            ..params()
        };
        assert_eq!(marker_displacement([5.0, 5.0], [5.0, 5.0], 1.0, &p), [0.0, 0.0]);
    }

    #[test]
    fn one_sigma_push_matches_hand_value() {
        // 1 · 4 · exp(-100 / 200) = 4 e^{-1/2}
        let d = marker_displacement([10.0, 0.0], [0.0, 0.0], 1.0, &params());
        let expect = 4.0 * (-0.5f64).exp();
        assert!((d[0] - expect).abs() < 1e-12);
        assert!((d[0] - 2.426).abs() < 1e-3);
        assert_eq!(d[1], 0.0);
    }

    #[test]
    fn symmetric_grid_displacements_cancel() {
        let p = TactileParams {
            epsilon: 1e-6,
            ..params()
        };
        let c = [50.0, 50.0];
        let mut sum = [0.0, 0.0];
        for i in -5i32..=5 {
            for j in -5i32..=5 {
                let m = [c[0] + 7.0 * j as f64, c[1] + 7.0 * i as f64];
                let d = marker_displacement(m, c, 0.8, &p);
                sum[0] += d[0];
                sum[1] += d[1];
            }
        }
        assert!(sum[0].abs() < 1e-12 && sum[1].abs() < 1e-12, "{sum:?}");
    }

    #[test]
    fn grid_covers_canvas_symmetrically() {
        let grid = MarkerGrid::for_image(&params(), 128, 128);
        let pos = grid.positions();
        assert_eq!(pos.len(), 121);
        let first = pos[0];
        let last = pos[120];
        assert!((first[0] + last[0] - 127.0).abs() < 1e-9);
        assert!((first[1] + last[1] - 127.0).abs() < 1e-9);
    }
}

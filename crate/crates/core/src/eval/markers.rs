//! Marker tracking on gel images: dark-blob detection, sub-pixel centroids,
//! and one-to-one matching against the nominal layout.

use serde::{Deserialize, Serialize};

use crate::data::to_grayscale;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::synthgel::MarkerGrid;

/// Nominal marker positions inside one image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkerLayout {
    pub nominal: Vec<[f64; 2]>,
    pub radius: f64,
    /// Blobs farther than this from a nominal position are not matched to it.
    pub max_match: f64,
}

impl MarkerLayout {
    pub fn from_grid(grid: &MarkerGrid) -> Self {
        Self {
            nominal: grid.positions(),
            radius: grid.radius,
            max_match: 0.5 * grid.spacing[0].min(grid.spacing[1]),
        }
    }

    /// Markers of the window `[x0, x0 + w) × [y0, y0 + h)` in window
    /// coordinates, keeping those whose resting dot lies inside it.
    pub fn cropped(&self, x0: usize, y0: usize, w: usize, h: usize) -> Self {
        let m = self.radius;
        let (x0, y0) = (x0 as f64, y0 as f64);
        let nominal = self
            .nominal
            .iter()
            .map(|p| [p[0] - x0, p[1] - y0])
            .filter(|p| p[0] - m >= -0.5 && p[1] - m >= -0.5 && p[0] + m <= w as f64 - 0.5 && p[1] + m <= h as f64 - 0.5)
            .collect();
        Self {
            nominal,
            ..self.clone()
        }
    }

    pub fn len(&self) -> usize {
        self.nominal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nominal.is_empty()
    }
}

/// Result of [`track_markers`].
#[derive(Clone, Debug, PartialEq)]
pub struct TrackedMarkers {
    /// One position per nominal marker, in layout order.
    pub positions: Vec<[f64; 2]>,
    pub matched: Vec<bool>,
    /// No blob was found; every marker sits at its nominal position.
    pub low_confidence: bool,
}

/// Gray levels of the gel background and of a marker core, read off the
/// reference frame.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Levels {
    background: f32,
    threshold: f32,
}

impl Levels {
    fn from_reference(gray: &Image) -> Self {
        let mut v = gray.data().to_vec();
        v.sort_by(f32::total_cmp);
        let background = v[v.len() / 2];
        let dark = v[0];
        Self {
            background,
            threshold: 0.5 * (background + dark),
        }
    }
}

/// Locate every marker of `layout` in `frame`. Blobs are connected regions
/// darker than halfway between the reference's background and marker
/// levels; each blob's centroid weighs pixels by how much darker they are
/// than the median of a ring around it, which recovers anti-aliased
/// coverage. Matching is greedy by distance and one-to-one.
pub fn track_markers(frame: &Image, reference: &Image, layout: &MarkerLayout) -> Result<TrackedMarkers> {
    if !frame.same_size(reference) {
        return Err(Error::Invalid(format!(
            "frame {}x{} vs reference {}x{}",
            frame.width(),
            frame.height(),
            reference.width(),
            reference.height()
        )));
    }
    let levels = Levels::from_reference(&to_grayscale(reference));
    Ok(track_gray(&to_grayscale(frame), levels, layout))
}

/// Tracks many frames against one reference without recomputing its levels.
pub(crate) struct Tracker<'a> {
    levels: Levels,
    layout: &'a MarkerLayout,
    size: (usize, usize),
}

impl<'a> Tracker<'a> {
    pub(crate) fn new(reference: &Image, layout: &'a MarkerLayout) -> Self {
        Self {
            levels: Levels::from_reference(&to_grayscale(reference)),
            layout,
            size: (reference.width(), reference.height()),
        }
    }

    pub(crate) fn track(&self, frame: &Image) -> Result<TrackedMarkers> {
        if (frame.width(), frame.height()) != self.size {
            return Err(Error::Invalid(format!(
                "frame {}x{} vs reference {}x{}",
                frame.width(),
                frame.height(),
                self.size.0,
                self.size.1
            )));
        }
        Ok(track_gray(&to_grayscale(frame), self.levels, self.layout))
    }
}

fn track_gray(gray: &Image, levels: Levels, layout: &MarkerLayout) -> TrackedMarkers {
    let (w, h) = (gray.width(), gray.height());
    let g = gray.data();
    let mask: Vec<bool> = g.iter().map(|&v| v < levels.threshold).collect();
    let labels = label_components(&mask, w, h, false);
    let blobs: Vec<[f64; 2]> = labels
        .components
        .iter()
        .enumerate()
        .filter_map(|(id, pixels)| blob_centroid(g, w, h, &labels.label, id, pixels, levels.background))
        .collect();

    let n = layout.len();
    let mut positions = layout.nominal.clone();
    let mut matched = vec![false; n];
    if blobs.is_empty() {
        return TrackedMarkers {
            positions,
            matched,
            low_confidence: true,
        };
    }
    let mut pairs = Vec::new();
    for (m, p) in layout.nominal.iter().enumerate() {
        for (b, q) in blobs.iter().enumerate() {
            let d = (p[0] - q[0]).hypot(p[1] - q[1]);
            if d <= layout.max_match {
                pairs.push((d, m, b));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used = vec![false; blobs.len()];
    for (_, m, b) in pairs {
        if !matched[m] && !used[b] {
            matched[m] = true;
            used[b] = true;
            positions[m] = blobs[b];
        }
    }
    TrackedMarkers {
        positions,
        matched,
        low_confidence: false,
    }
}

/// Darkness-weighted centroid over the blob's bounding box grown by one
/// pixel, against the median of the ring two pixels out. Pixels of other
/// blobs are ignored.
fn blob_centroid(
    g: &[f32],
    w: usize,
    h: usize,
    label: &[usize],
    id: usize,
    pixels: &[usize],
    fallback_bg: f32,
) -> Option<[f64; 2]> {
    let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
    for &i in pixels {
        let (x, y) = (i % w, i / w);
        x0 = x0.min(x);
        y0 = y0.min(y);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    let grow = |lo: usize, hi: usize, k: usize, limit: usize| (lo.saturating_sub(k), (hi + k).min(limit - 1));
    let (bx0, bx1) = grow(x0, x1, 1, w);
    let (by0, by1) = grow(y0, y1, 1, h);
    let (rx0, rx1) = grow(x0, x1, 2, w);
    let (ry0, ry1) = grow(y0, y1, 2, h);

    let mut ring = Vec::new();
    for y in ry0..=ry1 {
        for x in rx0..=rx1 {
            let inside = (bx0..=bx1).contains(&x) && (by0..=by1).contains(&y);
            let i = y * w + x;
            if !inside && label[i] == NO_LABEL {
                ring.push(g[i]);
            }
        }
    }
    let bg = if ring.is_empty() {
        fallback_bg
    } else {
        ring.sort_by(f32::total_cmp);
        ring[ring.len() / 2]
    };

    let (mut sw, mut sx, mut sy) = (0.0f64, 0.0f64, 0.0f64);
    for y in by0..=by1 {
        for x in bx0..=bx1 {
            let i = y * w + x;
            if label[i] != NO_LABEL && label[i] != id {
                continue;
            }
            let wt = f64::from((bg - g[i]).max(0.0));
            sw += wt;
            sx += wt * x as f64;
            sy += wt * y as f64;
        }
    }
    (sw > 0.0).then(|| [sx / sw, sy / sw])
}

pub(crate) const NO_LABEL: usize = usize::MAX;

pub(crate) struct Components {
    /// Component id per pixel, or [`NO_LABEL`].
    pub label: Vec<usize>,
    /// Pixel indices of each component, in scan order of discovery.
    pub components: Vec<Vec<usize>>,
}

/// Connected components of `mask` (4-connected, or 8-connected with
/// `diagonal`).
pub(crate) fn label_components(mask: &[bool], w: usize, h: usize, diagonal: bool) -> Components {
    let mut label = vec![NO_LABEL; mask.len()];
    let mut components = Vec::new();
    let mut stack = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || label[start] != NO_LABEL {
            continue;
        }
        let id = components.len();
        let mut pixels = Vec::new();
        label[start] = id;
        stack.push(start);
        while let Some(i) = stack.pop() {
            pixels.push(i);
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    if (dx == 0 && dy == 0) || (!diagonal && dx != 0 && dy != 0) {
                        continue;
                    }
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if mask[j] && label[j] == NO_LABEL {
                        label[j] = id;
                        stack.push(j);
                    }
                }
            }
        }
        pixels.sort_unstable();
        components.push(pixels);
    }
    Components { label, components }
}

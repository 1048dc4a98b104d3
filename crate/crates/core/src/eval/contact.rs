//! Marker deformation over time and the moment of contact.

use serde::{Deserialize, Serialize};

use super::markers::{MarkerLayout, Tracker};
use crate::error::{Error, Result};
use crate::image::Image;

/// Threshold ratio for contact detection.
pub const CONTACT_RATIO: f64 = 0.6;

/// Per-frame mean marker displacement (px).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeformationCurve {
    pub values: Vec<f64>,
    pub d_min: f64,
    pub d_max: f64,
    /// Frames in which no marker could be detected.
    pub low_confidence_frames: usize,
}

impl DeformationCurve {
    pub fn new(values: Vec<f64>) -> Self {
        let d_min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let d_max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self {
            values,
            d_min,
            d_max,
            low_confidence_frames: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Inclusive span of frames at or above the contact threshold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContactInterval {
    pub t_l: usize,
    pub t_r: usize,
}

/// Mean distance of each tracked marker from where it sits in `reference`.
pub fn deformation_curve(frames: &[Image], reference: &Image, layout: &MarkerLayout) -> Result<DeformationCurve> {
    let tracked = track_sequence(frames, reference, layout)?;
    let rest = Tracker::new(reference, layout).track(reference)?;
    let mut low = 0;
    let values = tracked
        .iter()
        .map(|t| {
            low += usize::from(t.low_confidence);
            mean_distance(&t.positions, &rest.positions)
        })
        .collect();
    Ok(DeformationCurve {
        low_confidence_frames: low,
        ..DeformationCurve::new(values)
    })
}

/// Threshold the curve at `r·(d_max − d_min) + d_min` and return the first
/// and last frame at or above it. A flat curve has no contact.
pub fn moment_of_contact(curve: &DeformationCurve, r: f64) -> Result<Option<ContactInterval>> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Invalid(format!("contact ratio {r} not in (0, 1)")));
    }
    if curve.is_empty() {
        return Err(Error::Invalid("empty deformation curve".into()));
    }
    if curve.d_max <= curve.d_min {
        return Ok(None);
    }
    let theta = r * (curve.d_max - curve.d_min) + curve.d_min;
    let t_l = curve.values.iter().position(|&v| v >= theta);
    let t_r = curve.values.iter().rposition(|&v| v >= theta);
    Ok(t_l.zip(t_r).map(|(t_l, t_r)| ContactInterval { t_l, t_r }))
}

/// `|t_l − t_l'| + |t_r − t_r'|` in frames.
pub fn contact_error(pred: &ContactInterval, gt: &ContactInterval) -> usize {
    pred.t_l.abs_diff(gt.t_l) + pred.t_r.abs_diff(gt.t_r)
}

/// Mean over frames and markers of the distance between markers tracked in
/// the prediction and in the ground truth.
pub fn marker_deformation_error(pred: &[Image], gt: &[Image], reference: &Image, layout: &MarkerLayout) -> Result<f64> {
    if pred.len() != gt.len() {
        return Err(Error::Invalid(format!(
            "{} predicted frames vs {} ground-truth frames",
            pred.len(),
            gt.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Invalid("empty sequence".into()));
    }
    let a = track_sequence(pred, reference, layout)?;
    let b = track_sequence(gt, reference, layout)?;
    let total: f64 = a.iter().zip(&b).map(|(p, g)| mean_distance(&p.positions, &g.positions)).sum();
    Ok(total / pred.len() as f64)
}

fn track_sequence(
    frames: &[Image],
    reference: &Image,
    layout: &MarkerLayout,
) -> Result<Vec<super::markers::TrackedMarkers>> {
    let tracker = Tracker::new(reference, layout);
    frames.iter().map(|f| tracker.track(f)).collect()
}

fn mean_distance(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.iter().zip(b).map(|(p, q)| (p[0] - q[0]).hypot(p[1] - q[1])).sum::<f64>() / a.len() as f64
}

//! Where a predicted vision frame puts the arm.

use super::markers::label_components;
use crate::error::Result;
use crate::image::Image;

/// Residual level (images in `[0, 1]`) above which a pixel counts as changed.
pub const RESIDUAL_THRESHOLD: f64 = 0.1;

/// Centroid of the largest 8-connected region where `pred` differs from
/// `reference` by more than `threshold` (channel mean). `None` when nothing
/// changed.
pub fn residual_centroid(pred: &Image, reference: &Image, threshold: f64) -> Result<Option<[f64; 2]>> {
    let res = pred.abs_diff_mean(reference)?;
    let mask: Vec<bool> = res.iter().map(|&v| f64::from(v) > threshold).collect();
    let w = pred.width();
    let comps = label_components(&mask, w, pred.height(), true);
    // Ties go to the component found first in scan order.
    let largest = comps
        .components
        .iter()
        .fold(None::<&Vec<usize>>, |best, c| match best {
            Some(b) if b.len() >= c.len() => Some(b),
            _ => Some(c),
        });
    Ok(largest.map(|pixels| {
        let n = pixels.len() as f64;
        let sx: f64 = pixels.iter().map(|&i| (i % w) as f64).sum();
        let sy: f64 = pixels.iter().map(|&i| (i / w) as f64).sum();
        [sx / n, sy / n]
    }))
}

/// Distance from the residual centroid to the true contact centre; `None`
/// (a miss) when the prediction shows no change.
pub fn touch_location_error(pred: &Image, reference: &Image, gt_center: [f64; 2], threshold: f64) -> Result<Option<f64>> {
    Ok(residual_centroid(pred, reference, threshold)?.map(|c| (c[0] - gt_center[0]).hypot(c[1] - gt_center[1])))
}

/// Median where misses count as infinitely far; `None` when the median
/// itself is a miss or there are no entries.
pub fn median_with_misses(values: &[Option<f64>]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v: Vec<f64> = values.iter().map(|x| x.unwrap_or(f64::INFINITY)).collect();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let m = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
    m.is_finite().then_some(m)
}

use crate::error::{Error, Result};
use crate::image::Image;

/// Floor on the rarity score so flat frames keep some sampling mass.
pub const RARITY_FLOOR: f64 = 1e-6;

/// 5-point Laplacian over the valid region (no padding), row-major
/// `(h-2)×(w-2)`.
pub fn laplacian_valid(values: &[f64], width: usize, height: usize) -> Vec<f64> {
    if width < 3 || height < 3 {
        return Vec::new();
    }
    let mut out = Vec::with_capacity((width - 2) * (height - 2));
    for y in 1..height - 1 {
        for x in 1..width - 1 {
            let i = y * width + x;
            out.push(values[i - width] + values[i + width] + values[i - 1] + values[i + 1] - 4.0 * values[i]);
        }
    }
    out
}

/// Population variance of the Laplacian of `|x_t − x_ref|`, floored at
/// [`RARITY_FLOOR`]. Both images must be single-channel and equally sized.
pub fn rarity_score(x_t: &Image, x_ref: &Image) -> Result<f64> {
    if !x_t.same_size(x_ref) || x_t.channels() != 1 {
        return Err(Error::Invalid(format!(
            "rarity needs two equal single-channel images, got {}x{}x{} and {}x{}x{}",
            x_t.channels(),
            x_t.height(),
            x_t.width(),
            x_ref.channels(),
            x_ref.height(),
            x_ref.width()
        )));
    }
    let residual: Vec<f64> = x_t
        .data()
        .iter()
        .zip(x_ref.data())
        .map(|(&a, &b)| (a as f64 - b as f64).abs())
        .collect();
    let lap = laplacian_valid(&residual, x_t.width(), x_t.height());
    if lap.is_empty() {
        return Ok(RARITY_FLOOR);
    }
    let n = lap.len() as f64;
    let mean = lap.iter().sum::<f64>() / n;
    let var = lap.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(var.max(RARITY_FLOOR))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn gray(w: usize, h: usize, data: Vec<f32>) -> Image {
        Image::from_planes(w, h, 1, data).unwrap()
    }

    #[test]
    fn identical_images_hit_the_floor() {
        let a = gray(6, 5, (0..30).map(|i| i as f32 / 30.0).collect());
        assert_eq!(rarity_score(&a, &a).unwrap(), RARITY_FLOOR);
    }

    #[test]
    fn constant_offset_hits_the_floor() {
        let a = Image::filled(8, 8, 1, 0.25);
        let b = Image::filled(8, 8, 1, 0.75);
        assert_eq!(rarity_score(&b, &a).unwrap(), RARITY_FLOOR);
    }

    #[test]
    fn centre_spike_matches_hand_value() {
        // Valid responses: centre -4, four edge neighbours 1, corners 0.
        // Mean 0, variance (4·1 + 16) / 9.
        let mut d = vec![0.0; 25];
        d[12] = 1.0;
        let score = rarity_score(&gray(5, 5, d), &Image::new(5, 5, 1)).unwrap();
        assert!((score - 20.0 / 9.0).abs() < 1e-12, "{score}");
    }

    #[test]
    fn mismatched_sizes_are_rejected() {
        let a = Image::new(5, 5, 1);
        let b = Image::new(5, 6, 1);
        assert!(rarity_score(&a, &b).is_err());
        assert!(rarity_score(&Image::new(5, 5, 3), &Image::new(5, 5, 3)).is_err());
    }

    proptest! {
        #[test]
        fn constant_residual_offset_does_not_change_the_score(
            vals in proptest::collection::vec(0.0f32..0.5, 36),
            offset in 0.0f32..0.5,
        ) {
            // Residuals stay positive so |·| commutes with the shift; the slack
            // covers f32 rounding of the shifted pixels.
            let base = Image::new(6, 6, 1);
            let a = gray(6, 6, vals.clone());
            let b = gray(6, 6, vals.iter().map(|v| v + 0.01 + offset).collect());
            let s1 = rarity_score(&a, &base).unwrap();
            let s2 = rarity_score(&b, &base).unwrap();
            prop_assert!((s1 - s2).abs() <= 1e-5 * (1.0 + s1.abs()), "{} vs {}", s1, s2);
        }
    }
}

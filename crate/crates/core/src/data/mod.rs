//! Training data: rarity-weighted sampling over `(sequence, frame)` pairs,
//! five-frame temporal windows, grayscale inputs, and paired augmentation.

mod augment;
mod dataset;
mod rarity;
mod sampler;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use augment::{augment, AugmentConfig, Jitter};
pub use dataset::{
    load_split, DatasetIndex, IndexEntry, LoadedSequence, Manifest, ManifestEntry, SampleOptions,
    TrainingSample, MANIFEST_FILE, MEAN_RARITY_FLOOR, SPLITS,
};
pub use rarity::{laplacian_valid, rarity_score, RARITY_FLOOR};
pub use sampler::{build_sampler, Sampler};

use crate::error::Error;
use crate::image::Image;

/// Frame offsets of the input window.
pub const WINDOW_OFFSETS: [isize; 5] = [-4, -2, 0, 2, 4];

/// Which modality is predicted from which.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "v2t")]
    VisionToTouch,
    #[serde(rename = "t2v")]
    TouchToVision,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::VisionToTouch => "v2t",
            Direction::TouchToVision => "t2v",
        })
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "v2t" => Ok(Direction::VisionToTouch),
            "t2v" => Ok(Direction::TouchToVision),
            other => Err(Error::Config(format!(
                "unknown direction {other:?} (expected v2t or t2v)"
            ))),
        }
    }
}

/// Indices `{t-4, t-2, t, t+2, t+4}`, each clamped to `[0, len-1]`.
pub fn temporal_window(len: usize, t: usize) -> [usize; 5] {
    debug_assert!(t < len);
    WINDOW_OFFSETS.map(|o| (t as isize + o).clamp(0, len as isize - 1) as usize)
}

/// ITU-R 601 luma of an RGB image; single-channel images pass through.
pub fn to_grayscale(rgb: &Image) -> Image {
    if rgb.channels() == 1 {
        return rgb.clone();
    }
    let (r, g, b) = (rgb.plane(0), rgb.plane(1), rgb.plane(2));
    let data = r
        .iter()
        .zip(g)
        .zip(b)
        .map(|((&r, &g), &b)| 0.299 * r + 0.587 * g + 0.114 * b)
        .collect();
    Image::from_planes(rgb.width(), rgb.height(), 1, data).expect("plane size")
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn window_examples() {
        assert_eq!(temporal_window(64, 10), [6, 8, 10, 12, 14]);
        assert_eq!(temporal_window(64, 1), [0, 0, 1, 3, 5]);
        assert_eq!(temporal_window(64, 62), [58, 60, 62, 63, 63]);
    }

    #[test]
    fn luma_examples() {
        let px = |r, g, b| {
            let img = Image::from_planes(1, 1, 3, vec![r, g, b]).unwrap();
            to_grayscale(&img).data()[0]
        };
        assert_eq!(px(1.0, 1.0, 1.0), 1.0);
        assert_eq!(px(1.0, 0.0, 0.0), 0.299);
        assert!((px(0.2, 0.4, 0.6) - 0.3630).abs() < 1e-6);
    }

    #[test]
    fn direction_round_trips() {
        for d in [Direction::VisionToTouch, Direction::TouchToVision] {
            assert_eq!(d.to_string().parse::<Direction>().unwrap(), d);
        }
        assert!("x2y".parse::<Direction>().is_err());
    }

    proptest! {
        #[test]
        fn window_is_sorted_and_in_range(len in 1usize..200, frac in 0.0f64..1.0) {
            let t = ((len as f64 * frac) as usize).min(len - 1);
            let w = temporal_window(len, t);
            prop_assert!(w.windows(2).all(|p| p[0] <= p[1]));
            prop_assert!(w.iter().all(|&i| i < len));
            prop_assert_eq!(w[2], t);
        }
    }
}

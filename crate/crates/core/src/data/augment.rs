use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::TrainingSample;
use super::{to_grayscale, Direction};
use crate::error::{Error, Result};
use crate::image::Image;

/// Random crop plus photometric jitter ranges. Factors are drawn from
/// `[1 - a, 1 + a]`; hue shifts (fraction of a turn) from `[-hue, hue]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentConfig {
    /// Crop size `[width, height]`.
    pub crop: [usize; 2],
    pub brightness: f64,
    pub contrast: f64,
    pub saturation: f64,
    pub hue: f64,
}

impl AugmentConfig {
    /// 128 → 112 crops (scaled for other canvases) and ±10% jitter.
    pub fn for_canvas(width: usize, height: usize) -> Self {
        let scale = |v: usize| ((v as f64) * 112.0 / 128.0).round() as usize;
        Self {
            crop: [scale(width), scale(height)],
            brightness: 0.1,
            contrast: 0.1,
            saturation: 0.1,
            hue: 0.05,
        }
    }

    /// Full-size crop, no jitter.
    pub fn identity(width: usize, height: usize) -> Self {
        Self {
            crop: [width, height],
            brightness: 0.0,
            contrast: 0.0,
            saturation: 0.0,
            hue: 0.0,
        }
    }
}

/// One draw of photometric jitter. A factor of exactly 1 (or a zero hue
/// shift) leaves the image untouched.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jitter {
    pub brightness: f64,
    pub contrast: f64,
    pub saturation: f64,
    pub hue: f64,
}

impl Jitter {
    pub const IDENTITY: Jitter = Jitter {
        brightness: 1.0,
        contrast: 1.0,
        saturation: 1.0,
        hue: 0.0,
    };

    pub fn sample<R: Rng + ?Sized>(cfg: &AugmentConfig, rng: &mut R) -> Self {
        let mut factor = |a: f64| if a > 0.0 { rng.random_range(1.0 - a..=1.0 + a) } else { 1.0 };
        let brightness = factor(cfg.brightness);
        let contrast = factor(cfg.contrast);
        let saturation = factor(cfg.saturation);
        let hue = if cfg.hue > 0.0 {
            rng.random_range(-cfg.hue..=cfg.hue)
        } else {
            0.0
        };
        Self {
            brightness,
            contrast,
            saturation,
            hue,
        }
    }

    /// Brightness, contrast, saturation, then hue, clipping to `[0, 1]`
    /// after each. Saturation and hue only act on RGB images.
    pub fn apply(&self, img: &mut Image) {
        if self.brightness != 1.0 {
            let b = self.brightness as f32;
            img.data_mut().iter_mut().for_each(|v| *v *= b);
            img.clamp01();
        }
        if self.contrast != 1.0 {
            let gray = to_grayscale(img);
            let mean = gray.data().iter().map(|&v| v as f64).sum::<f64>() / gray.data().len() as f64;
            let (c, m) = (self.contrast as f32, mean as f32);
            img.data_mut().iter_mut().for_each(|v| *v = (*v - m) * c + m);
            img.clamp01();
        }
        if img.channels() != 3 {
            return;
        }
        if self.saturation != 1.0 {
            let gray = to_grayscale(img);
            let s = self.saturation as f32;
            for c in 0..3 {
                for (v, g) in img.plane_mut(c).iter_mut().zip(gray.data()) {
                    *v = (*v - g) * s + g;
                }
            }
            img.clamp01();
        }
        if self.hue != 0.0 {
            rotate_hue(img, self.hue);
            img.clamp01();
        }
    }
}

/// Rotate chroma in YIQ space by `turns` of a full circle.
fn rotate_hue(img: &mut Image, turns: f64) {
    let (s, c) = (std::f64::consts::TAU * turns).sin_cos();
    let n = img.width() * img.height();
    let data = img.data_mut();
    for i in 0..n {
        let (r, g, b) = (data[i] as f64, data[n + i] as f64, data[2 * n + i] as f64);
        let y = 0.299 * r + 0.587 * g + 0.114 * b;
        let ci = 0.596 * r - 0.274 * g - 0.322 * b;
        let cq = 0.211 * r - 0.523 * g + 0.312 * b;
        let (i2, q2) = (c * ci - s * cq, s * ci + c * cq);
        data[i] = (y + 0.956 * i2 + 0.621 * q2) as f32;
        data[n + i] = (y - 0.272 * i2 - 0.647 * q2) as f32;
        data[2 * n + i] = (y - 1.106 * i2 + 1.703 * q2) as f32;
    }
}

/// Shared random crop over every image of the sample, plus one jitter draw
/// per modality applied to all images of that modality.
pub fn augment(sample: &TrainingSample, seed: u64, cfg: &AugmentConfig) -> Result<TrainingSample> {
    let (w, h) = (sample.target.width(), sample.target.height());
    let [cw, ch] = cfg.crop;
    if cw == 0 || ch == 0 || cw > w || ch > h {
        return Err(Error::Config(format!("crop {cw}x{ch} does not fit {w}x{h} images")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x0 = rng.random_range(0..=w - cw);
    let y0 = rng.random_range(0..=h - ch);
    let vision = Jitter::sample(cfg, &mut rng);
    let touch = Jitter::sample(cfg, &mut rng);
    let (input_jitter, target_jitter) = match sample.direction {
        Direction::VisionToTouch => (vision, touch),
        Direction::TouchToVision => (touch, vision),
    };
    let tf = |img: &Image, j: &Jitter| -> Result<Image> {
        let mut out = img.crop(x0, y0, cw, ch)?;
        j.apply(&mut out);
        Ok(out)
    };
    Ok(TrainingSample {
        inputs: sample
            .inputs
            .iter()
            .map(|f| tf(f, &input_jitter))
            .collect::<Result<_>>()?,
        ref_vision: tf(&sample.ref_vision, &vision)?,
        ref_tactile: tf(&sample.ref_tactile, &touch)?,
        target: tf(&sample.target, &target_jitter)?,
        ..sample.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TrainingSample {
        let ramp = |c: usize, k: f32| {
            let data = (0..c * 16 * 12).map(|i| ((i as f32 * k) % 1.0).abs()).collect();
            Image::from_planes(16, 12, c, data).unwrap()
        };
        TrainingSample {
            seq: 0,
            t: 3,
            direction: Direction::VisionToTouch,
            inputs: (0..5).map(|i| ramp(1, 0.013 * (i + 1) as f32)).collect(),
            ref_vision: ramp(3, 0.007),
            ref_tactile: ramp(3, 0.011),
            target: ramp(3, 0.017),
            weight: 0.5,
        }
    }

    #[test]
    fn identity_config_is_identity() {
        let s = sample();
        assert_eq!(augment(&s, 9, &AugmentConfig::identity(16, 12)).unwrap(), s);
    }

    #[test]
    fn seeded_augmentation_is_deterministic() {
        let s = sample();
        let cfg = AugmentConfig {
            crop: [10, 8],
            ..AugmentConfig::for_canvas(16, 12)
        };
        let a = augment(&s, 5, &cfg).unwrap();
        assert_eq!(a, augment(&s, 5, &cfg).unwrap());
        assert_ne!(a, augment(&s, 6, &cfg).unwrap());
        assert_eq!(a.target.width(), 10);
        assert!(a.inputs.iter().all(|f| f.height() == 8));
    }

    #[test]
    fn crop_offset_is_shared() {
        let mut s = sample();
        let marker = Image::from_planes(16, 12, 1, (0..192).map(|i| i as f32 / 192.0).collect()).unwrap();
        s.inputs = vec![marker.clone(); 5];
        let cfg = AugmentConfig {
            crop: [9, 7],
            ..AugmentConfig::identity(16, 12)
        };
        let a = augment(&s, 1, &cfg).unwrap();
        let first = a.inputs[0].data()[0];
        let idx = (first * 192.0).round() as usize;
        let (x0, y0) = (idx % 16, idx / 16);
        for f in &a.inputs {
            assert_eq!(f, &marker.crop(x0, y0, 9, 7).unwrap());
        }
        assert_eq!(a.target, s.target.crop(x0, y0, 9, 7).unwrap());
    }

    #[test]
    fn brightness_scales_mid_gray() {
        let mut img = Image::filled(4, 4, 3, 0.5);
        Jitter {
            brightness: 1.1,
            ..Jitter::IDENTITY
        }
        .apply(&mut img);
        assert!(img.data().iter().all(|&v| (v - 0.55).abs() < 1e-6));
    }

    #[test]
    fn hue_rotation_keeps_gray_and_round_trips() {
        let mut g = Image::filled(2, 2, 3, 0.4);
        rotate_hue(&mut g, 0.2);
        assert!(g.data().iter().all(|&v| (v - 0.4).abs() < 1e-3));
        let orig = Image::from_planes(1, 1, 3, vec![0.6, 0.4, 0.3]).unwrap();
        let mut c = orig.clone();
        rotate_hue(&mut c, 0.05);
        assert_ne!(c, orig);
        rotate_hue(&mut c, -0.05);
        for (a, b) in c.data().iter().zip(orig.data()) {
            assert!((a - b).abs() < 1e-3);
        }
    }

    #[test]
    fn jitter_clips_to_unit_range() {
        let mut img = Image::from_planes(2, 1, 3, vec![0.95, 0.1, 0.9, 0.0, 0.8, 1.0]).unwrap();
        Jitter {
            brightness: 1.1,
            contrast: 1.1,
            saturation: 1.1,
            hue: 0.05,
        }
        .apply(&mut img);
        assert!(img.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn oversized_crop_is_rejected() {
        let cfg = AugmentConfig {
            crop: [17, 12],
            ..AugmentConfig::identity(16, 12)
        };
        assert!(augment(&sample(), 0, &cfg).is_err());
    }
}

//! Reference-conditioned generator and patch discriminator.
//!
//! The generator encodes the five-frame grayscale stack and the six-channel
//! reference pair with two ResNet-18-style encoders, concatenates their
//! bottleneck maps, and decodes with five transposed convolutions. Skip
//! connections come from the reference encoder only.

mod discriminator;
mod generator;
mod resnet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tactovis_nn::{Scalar, ShapeError, Slot, Tensor, Visit};

pub use discriminator::Discriminator;
pub use generator::{Decoder, Generator};
pub use resnet::{BasicBlock, EncoderOutput, ResNetEncoder};

use crate::error::{Error, Result};

/// Total downsampling of the encoders and the discriminator.
pub const DOWNSAMPLE: usize = 32;
pub const DECODER_STAGES: usize = 5;

/// Encoder taps feeding the decoder, as `(tap, decoder stage)` pairs; the
/// stage's output is concatenated with the tap before the next stage.
pub const SKIP_MAP: [(EncoderTap, usize); 4] = [
    (EncoderTap::Layer3, 0),
    (EncoderTap::Layer2, 1),
    (EncoderTap::Layer1, 2),
    (EncoderTap::Stem, 3),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EncoderTap {
    /// 1/2 resolution.
    Stem,
    /// 1/4 resolution.
    Layer1,
    /// 1/8 resolution.
    Layer2,
    /// 1/16 resolution.
    Layer3,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Side of the square training images.
    pub image_size: usize,
    pub input_frames: usize,
    pub reference_channels: usize,
    pub output_channels: usize,
    /// Stage widths are `w, 2w, 4w, 8w`; 64 is the full ResNet-18.
    pub base_width: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            image_size: 112,
            input_frames: 5,
            reference_channels: 6,
            output_channels: 3,
            base_width: 64,
        }
    }
}

impl ModelConfig {
    pub fn miniature(image_size: usize, base_width: usize) -> Self {
        Self {
            image_size,
            base_width,
            ..Self::default()
        }
    }

    /// Channels of each encoder's bottleneck.
    pub fn latent_dim(&self) -> usize {
        8 * self.base_width
    }

    /// Channels entering the decoder.
    pub fn fused_dim(&self) -> usize {
        2 * self.latent_dim()
    }

    /// Channels of the stem, layer1, layer2, layer3 taps.
    pub fn tap_channels(&self) -> [usize; 4] {
        let w = self.base_width;
        [w, w, 2 * w, 4 * w]
    }

    /// Side of the discriminator's score map.
    pub fn patch_size(&self) -> usize {
        self.image_size.div_ceil(DOWNSAMPLE)
    }

    pub fn validate(&self) -> Result<()> {
        if self.image_size < DOWNSAMPLE {
            return Err(Error::Config(format!(
                "image size {} below the {DOWNSAMPLE} px minimum",
                self.image_size
            )));
        }
        if self.base_width == 0 || self.input_frames == 0 || self.output_channels == 0 {
            return Err(Error::Config("model widths must be positive".into()));
        }
        Ok(())
    }

    fn check_inputs<T: Scalar>(&self, x: &Tensor<T>, r: &Tensor<T>) -> Result<(), ShapeError> {
        if x.channels() != self.input_frames || r.channels() != self.reference_channels {
            return Err(ShapeError::new(format!(
                "expected {} input and {} reference channels, got {:?} and {:?}",
                self.input_frames,
                self.reference_channels,
                x.shape(),
                r.shape()
            )));
        }
        if x.hw() != r.hw() || x.batch() != r.batch() {
            return Err(ShapeError::new(format!(
                "input {:?} and reference {:?} differ in size",
                x.shape(),
                r.shape()
            )));
        }
        Ok(())
    }
}

/// Generator and discriminator for one configuration.
pub struct Model<T> {
    pub config: ModelConfig,
    pub generator: Generator<T>,
    pub discriminator: Discriminator<T>,
}

impl<T: Scalar> Model<T> {
    pub fn clear_tape(&mut self) {
        self.generator.clear_tape();
        self.discriminator.clear_tape();
    }
}

impl<T: Scalar> Visit<T> for Model<T> {
    fn visit(&mut self, f: &mut dyn FnMut(Slot<'_, T>)) {
        self.generator.visit(f);
        self.discriminator.visit(f);
    }
}

/// Fresh parameters: fan-in-scaled normal weights, identity batch norm,
/// zero biases. Deterministic in `seed`.
pub fn init_params<T: Scalar>(config: &ModelConfig, seed: u64) -> Result<Model<T>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let generator = Generator::new(config, &mut rng);
    let discriminator = Discriminator::new(config, &mut rng);
    Ok(Model {
        config: config.clone(),
        generator,
        discriminator,
    })
}

/// Flattened copy of every parameter and buffer in visit order.
pub fn flatten_state<T: Scalar>(model: &mut dyn Visit<T>) -> Vec<T> {
    let mut out = Vec::new();
    model.visit(&mut |slot| match slot {
        Slot::Param(p) => out.extend_from_slice(&p.value),
        Slot::Buffer(b) => out.extend_from_slice(b),
    });
    out
}

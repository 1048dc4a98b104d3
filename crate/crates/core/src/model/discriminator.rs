use rand::Rng;
use tactovis_nn::init::relu_gain;
use tactovis_nn::layers::{Conv2d, LeakyRelu};
use tactovis_nn::{Mode, Scalar, ShapeError, Slot, Tensor, Visit};

use super::ModelConfig;

const SLOPE: f64 = 0.2;

/// Patch discriminator over `(x̄, r, y)`: five 3×3 stride-2 convolutions
/// (`w, 2w, 4w, 8w, 1` channels) with LeakyReLU between them and raw scores
/// out. No normalization: the score maps are a few pixels wide, where batch
/// statistics are too noisy to help.
pub struct Discriminator<T> {
    config: ModelConfig,
    convs: Vec<Conv2d<T>>,
    acts: Vec<LeakyRelu<T>>,
}

impl<T: Scalar> Discriminator<T> {
    pub fn new<R: Rng + ?Sized>(config: &ModelConfig, rng: &mut R) -> Self {
        let w = config.base_width;
        let widths = [w, 2 * w, 4 * w, 8 * w, 1];
        let mut cin = config.input_frames + config.reference_channels + config.output_channels;
        let mut convs = Vec::new();
        let mut acts = Vec::new();
        for (s, &cout) in widths.iter().enumerate() {
            let last = s == widths.len() - 1;
            let gain = if last { 1.0 } else { relu_gain(SLOPE) };
            convs.push(Conv2d::new(cin, cout, 3, 2, 1, true, gain, rng));
            if !last {
                acts.push(LeakyRelu::new(SLOPE));
            }
            cin = cout;
        }
        Self {
            config: config.clone(),
            convs,
            acts,
        }
    }

    /// Score map of spatial size `ceil(H / 32)`.
    pub fn forward(
        &mut self,
        x: &Tensor<T>,
        r: &Tensor<T>,
        y: &Tensor<T>,
        mode: Mode,
    ) -> Result<Tensor<T>, ShapeError> {
        self.config.check_inputs(x, r)?;
        if y.channels() != self.config.output_channels || y.hw() != x.hw() || y.batch() != x.batch() {
            return Err(ShapeError::new(format!(
                "discriminator target {:?} does not match inputs {:?}",
                y.shape(),
                x.shape()
            )));
        }
        let mut h = Tensor::concat_channels(&[x, r, y])?;
        for (s, conv) in self.convs.iter_mut().enumerate() {
            h = conv.forward(&h, mode)?;
            if let Some(act) = self.acts.get_mut(s) {
                h = act.forward(&h, mode);
            }
        }
        Ok(h)
    }

    /// Accumulate parameter gradients; with `want_target` also return the
    /// gradient with respect to `y`.
    pub fn backward(&mut self, d_scores: &Tensor<T>, want_target: bool) -> Option<Tensor<T>> {
        let mut d = d_scores.clone();
        for s in (1..self.convs.len()).rev() {
            if let Some(act) = self.acts.get_mut(s) {
                d = act.backward(&d);
            }
            d = self.convs[s].backward(&d);
        }
        d = self.acts[0].backward(&d);
        if !want_target {
            self.convs[0].backward_params(&d);
            return None;
        }
        let dx = self.convs[0].backward(&d);
        let c = &self.config;
        let parts = dx
            .split_channels(&[c.input_frames + c.reference_channels, c.output_channels])
            .expect("discriminator input layout");
        parts.into_iter().nth(1)
    }

    pub fn clear_tape(&mut self) {
        self.convs.iter_mut().for_each(|l| l.clear_tape());
        self.acts.iter_mut().for_each(|l| l.clear_tape());
    }
}

impl<T: Scalar> Visit<T> for Discriminator<T> {
    fn visit(&mut self, f: &mut dyn FnMut(Slot<'_, T>)) {
        self.convs.iter_mut().for_each(|c| c.visit(f));
    }
}

use rand::Rng;
use tactovis_nn::init::relu_gain;
use tactovis_nn::layers::{BatchNorm2d, ConvTranspose2d, Relu, Tanh};
use tactovis_nn::{Mode, Scalar, ShapeError, Slot, Tensor, Visit};

use super::resnet::{EncoderOutput, ResNetEncoder};
use super::ModelConfig;

/// Five stride-2 transposed convolutions. Stages 1–4 are followed by batch
/// norm and ReLU and then concatenated with the reference tap of matching
/// resolution; the last stage ends in `tanh`.
pub struct Decoder<T> {
    stages: Vec<ConvTranspose2d<T>>,
    norms: Vec<BatchNorm2d<T>>,
    relus: Vec<Relu<T>>,
    tanh: Tanh<T>,
    /// Channels produced by each stage.
    widths: [usize; 5],
    tap_widths: [usize; 4],
}

impl<T: Scalar> Decoder<T> {
    pub fn new<R: Rng + ?Sized>(config: &ModelConfig, rng: &mut R) -> Self {
        let w = config.base_width;
        let widths = [8 * w, 4 * w, 2 * w, w, config.output_channels];
        let tap_widths = config.tap_channels();
        let mut cin = config.fused_dim();
        let mut stages = Vec::new();
        let mut norms = Vec::new();
        let mut relus = Vec::new();
        for (s, &cout) in widths.iter().enumerate() {
            let last = s == widths.len() - 1;
            let gain = if last { 1.0 } else { relu_gain(0.0) };
            stages.push(ConvTranspose2d::new(cin, cout, 3, 2, 1, last, gain, rng));
            if !last {
                norms.push(BatchNorm2d::new(cout));
                relus.push(Relu::new());
                cin = cout + tap_widths[3 - s];
            }
        }
        Self {
            stages,
            norms,
            relus,
            tanh: Tanh::new(),
            widths,
            tap_widths,
        }
    }

    /// `taps` come from the reference encoder, shallowest first.
    pub fn forward(
        &mut self,
        fused: &Tensor<T>,
        taps: &[Tensor<T>; 4],
        out_hw: (usize, usize),
        mode: Mode,
    ) -> Result<Tensor<T>, ShapeError> {
        let mut h = fused.clone();
        for s in 0..5 {
            let size = if s < 4 { taps[3 - s].hw() } else { out_hw };
            h = self.stages[s].forward(&h, size, mode)?;
            if s < 4 {
                h = self.relus[s].forward(&self.norms[s].forward(&h, mode), mode);
                h = Tensor::concat_channels(&[&h, &taps[3 - s]])?;
            }
        }
        Ok(self.tanh.forward(&h, mode))
    }

    /// Returns the gradients of the fused latent and of the four taps.
    pub fn backward(&mut self, dy: &Tensor<T>) -> (Tensor<T>, [Tensor<T>; 4]) {
        let mut d = self.tanh.backward(dy);
        let mut d_taps: [Option<Tensor<T>>; 4] = Default::default();
        for s in (0..5).rev() {
            d = self.stages[s].backward(&d);
            if s > 0 {
                let tap = 4 - s;
                let parts = d
                    .split_channels(&[self.widths[s - 1], self.tap_widths[tap]])
                    .expect("decoder concat layout");
                let [h, t]: [Tensor<T>; 2] = parts.try_into().unwrap_or_else(|_| unreachable!("two parts"));
                d_taps[tap] = Some(t);
                d = self.norms[s - 1].backward(&self.relus[s - 1].backward(&h));
            }
        }
        (d, d_taps.map(|t| t.expect("every tap receives a gradient")))
    }

    pub fn clear_tape(&mut self) {
        self.stages.iter_mut().for_each(|l| l.clear_tape());
        self.norms.iter_mut().for_each(|l| l.clear_tape());
        self.relus.iter_mut().for_each(|l| l.clear_tape());
        self.tanh.clear_tape();
    }
}

impl<T: Scalar> Visit<T> for Decoder<T> {
    fn visit(&mut self, f: &mut dyn FnMut(Slot<'_, T>)) {
        for s in 0..5 {
            self.stages[s].visit(f);
            if s < 4 {
                self.norms[s].visit(f);
            }
        }
    }
}

/// `G(x̄, r)`: input and reference encoders, fused bottleneck, decoder fed by
/// reference skips.
pub struct Generator<T> {
    config: ModelConfig,
    pub input_encoder: ResNetEncoder<T>,
    pub reference_encoder: ResNetEncoder<T>,
    pub decoder: Decoder<T>,
}

impl<T: Scalar> Generator<T> {
    pub fn new<R: Rng + ?Sized>(config: &ModelConfig, rng: &mut R) -> Self {
        Self {
            config: config.clone(),
            input_encoder: ResNetEncoder::new(config.input_frames, config.base_width, rng),
            reference_encoder: ResNetEncoder::new(config.reference_channels, config.base_width, rng),
            decoder: Decoder::new(config, rng),
        }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Both encoder passes; the latent of each has `latent_dim` channels.
    pub fn encode(
        &mut self,
        x: &Tensor<T>,
        r: &Tensor<T>,
        mode: Mode,
    ) -> Result<(EncoderOutput<T>, EncoderOutput<T>), ShapeError> {
        self.config.check_inputs(x, r)?;
        let ei = self.input_encoder.forward(x, mode)?;
        let er = self.reference_encoder.forward(r, mode)?;
        Ok((ei, er))
    }

    /// `x`: `[N, input_frames, H, W]`; `r`: `[N, reference_channels, H, W]`.
    /// Output `[N, output_channels, H, W]` in `[-1, 1]`.
    pub fn forward(&mut self, x: &Tensor<T>, r: &Tensor<T>, mode: Mode) -> Result<Tensor<T>, ShapeError> {
        let (ei, er) = self.encode(x, r, mode)?;
        let fused = Tensor::concat_channels(&[&ei.latent, &er.latent])?;
        self.decoder.forward(&fused, &er.taps, x.hw(), mode)
    }

    /// Accumulate parameter gradients for one recorded forward.
    pub fn backward(&mut self, dy: &Tensor<T>) {
        let (d_fused, d_taps) = self.decoder.backward(dy);
        let l = self.config.latent_dim();
        let parts = d_fused.split_channels(&[l, l]).expect("fused layout");
        self.input_encoder.backward(&parts[0], None);
        self.reference_encoder.backward(&parts[1], Some(&d_taps));
    }

    pub fn clear_tape(&mut self) {
        self.input_encoder.clear_tape();
        self.reference_encoder.clear_tape();
        self.decoder.clear_tape();
    }
}

impl<T: Scalar> Visit<T> for Generator<T> {
    fn visit(&mut self, f: &mut dyn FnMut(Slot<'_, T>)) {
        self.input_encoder.visit(f);
        self.reference_encoder.visit(f);
        self.decoder.visit(f);
    }
}

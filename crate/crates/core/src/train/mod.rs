//! Adversarial training: alternating discriminator and generator Adam
//! steps on least-squares GAN losses plus a weighted L1 term, over batches
//! drawn from the rarity-weighted sampler.

mod checkpoint;
mod losses;

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tactovis_nn::optim::Adam;
use tactovis_nn::{Mode, Scalar, Tensor, Visit};

pub use checkpoint::{load_checkpoint, read_header, save_checkpoint, CheckpointHeader, RngState, CHECKPOINT_VERSION, MAGIC};
pub use losses::{l1_grad, l1_loss, lsgan_discriminator_grads, lsgan_generator_grad, lsgan_losses};

use crate::data::{augment, AugmentConfig, DatasetIndex, Direction, LoadedSequence, SampleOptions, Sampler, TrainingSample};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::model::{init_params, Discriminator, Model, ModelConfig};

pub const LOSS_LOG: &str = "loss_log.csv";
pub const LOSS_LOG_HEADER: &str = "step,loss_D,loss_G_adv,loss_G_L1";
pub const DIVERGED_SNAPSHOT: &str = "diverged.ckpt";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub direction: Direction,
    /// Weight of the L1 term.
    pub lambda: f64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub batch_size: usize,
    /// Total optimizer steps.
    pub steps: u64,
    pub seed: u64,
    pub checkpoint_every: u64,
    pub options: SampleOptions,
    /// `None` trains on full, unjittered frames.
    pub augment: Option<AugmentConfig>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            direction: Direction::VisionToTouch,
            lambda: 10.0,
            learning_rate: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            adam_eps: 1e-8,
            batch_size: 8,
            steps: 2000,
            seed: 0,
            checkpoint_every: 500,
            options: SampleOptions::default(),
            augment: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda {} must be finite and >= 0", self.lambda)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be > 0", self.learning_rate)));
        }
        for b in [self.beta1, self.beta2] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("Adam beta {b} outside [0, 1)")));
            }
        }
        if self.batch_size == 0 || self.checkpoint_every == 0 {
            return Err(Error::Config("batch size and checkpoint period must be positive".into()));
        }
        Ok(())
    }

    /// Everything but the run length may not change across a resume.
    pub fn resumable_from(&self, earlier: &TrainConfig) -> bool {
        let strip = |c: &TrainConfig| TrainConfig {
            steps: 0,
            checkpoint_every: 1,
            ..c.clone()
        };
        strip(self) == strip(earlier)
    }
}

/// Network inputs in `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch<T> {
    /// `[N, 5, H, W]` grayscale window.
    pub x: Tensor<T>,
    /// `[N, 6, H, W]` vision then tactile reference.
    pub r: Tensor<T>,
    /// `[N, 3, H, W]` target.
    pub y: Tensor<T>,
}

pub fn to_signed(v: f32) -> f32 {
    2.0 * v - 1.0
}

pub fn from_signed(v: f32) -> f32 {
    (v + 1.0) * 0.5
}

impl Batch<f32> {
    pub fn collate(samples: &[TrainingSample]) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::Invalid("empty batch".into()))?;
        let (w, h) = (first.target.width(), first.target.height());
        let mut x = Vec::new();
        let mut r = Vec::new();
        let mut y = Vec::new();
        let frames = first.inputs.len();
        for s in samples {
            let images = s.inputs.iter().chain([&s.ref_vision, &s.ref_tactile, &s.target]);
            if s.inputs.len() != frames || images.clone().any(|i| i.width() != w || i.height() != h) {
                return Err(Error::Invalid("batch samples differ in size".into()));
            }
            x.extend(s.inputs.iter().flat_map(|i| i.data().iter().map(|&v| to_signed(v))));
            r.extend(s.ref_vision.data().iter().chain(s.ref_tactile.data()).map(|&v| to_signed(v)));
            y.extend(s.target.data().iter().map(|&v| to_signed(v)));
        }
        let n = samples.len();
        let rc = first.ref_vision.channels() + first.ref_tactile.channels();
        Ok(Self {
            x: Tensor::from_vec([n, frames, h, w], x)?,
            r: Tensor::from_vec([n, rc, h, w], r)?,
            y: Tensor::from_vec([n, first.target.channels(), h, w], y)?,
        })
    }
}

impl<T: Scalar> Batch<T> {
    pub fn cast<U: Scalar>(&self) -> Batch<U> {
        Batch {
            x: self.x.cast(),
            r: self.r.cast(),
            y: self.y.cast(),
        }
    }
}

/// Item `n` of a `[-1, 1]` network output as an image in `[0, 1]`.
pub fn tensor_to_image(t: &Tensor<f32>, n: usize) -> Image {
    let data = t.item(n).iter().map(|&v| from_signed(v).clamp(0.0, 1.0)).collect();
    Image::from_planes(t.width(), t.height(), t.channels(), data).expect("tensor item layout")
}

/// Losses recorded for one step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepLosses {
    pub step: u64,
    pub loss_d: f32,
    pub loss_g_adv: f32,
    pub loss_g_l1: f32,
}

impl StepLosses {
    pub fn csv_row(&self) -> String {
        format!("{},{},{},{}", self.step, self.loss_d, self.loss_g_adv, self.loss_g_l1)
    }

    pub fn parse_row(line: &str) -> Result<Self> {
        let bad = || Error::Invalid(format!("malformed loss log row {line:?}"));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(bad());
        }
        Ok(Self {
            step: f[0].parse().map_err(|_| bad())?,
            loss_d: f[1].parse().map_err(|_| bad())?,
            loss_g_adv: f[2].parse().map_err(|_| bad())?,
            loss_g_l1: f[3].parse().map_err(|_| bad())?,
        })
    }
}

/// Everything needed to continue training bit-exactly.
pub struct TrainState {
    pub config: TrainConfig,
    pub model: Model<f32>,
    pub opt_g: Adam<f32>,
    pub opt_d: Adam<f32>,
    /// Completed steps.
    pub step: u64,
    /// Drives batch sampling and augmentation.
    pub rng: ChaCha8Rng,
}

impl TrainState {
    pub fn new(model: &ModelConfig, config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        let mut m = init_params::<f32>(model, config.seed)?;
        let adam = checkpoint::adam_config(config);
        let opt_g = Adam::new(adam, &mut m.generator);
        let opt_d = Adam::new(adam, &mut m.discriminator);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(1);
        Ok(Self {
            config: config.clone(),
            model: m,
            opt_g,
            opt_d,
            step: 0,
            rng,
        })
    }
}

/// Discriminator forward on real and generated targets, backward of
/// `loss_D`. Returns `loss_D`; parameter gradients accumulate in `d`.
pub fn discriminator_pass<T: Scalar>(d: &mut Discriminator<T>, batch: &Batch<T>, fake: &Tensor<T>) -> Result<T> {
    let real = d.forward(&batch.x, &batch.r, &batch.y, Mode::Train)?;
    let gen = d.forward(&batch.x, &batch.r, fake, Mode::Train)?;
    let (loss, _) = lsgan_losses(&real, &gen)?;
    let (g_real, g_fake) = lsgan_discriminator_grads(&real, &gen);
    d.backward(&g_fake, false);
    d.backward(&g_real, false);
    Ok(loss)
}

/// Generator objective `loss_G + λ·L1` for a generated batch. Returns the
/// two terms and the gradient with respect to `fake`; the discriminator's
/// parameter gradients are left zeroed.
pub fn generator_objective<T: Scalar>(
    d: &mut Discriminator<T>,
    batch: &Batch<T>,
    fake: &Tensor<T>,
    lambda: f64,
) -> Result<(T, T, Tensor<T>)> {
    let scores = d.forward(&batch.x, &batch.r, fake, Mode::Train)?;
    let adv = T::lit(0.5) * scores.map(|v| (v - T::one()) * (v - T::one())).mean();
    let mut grad = d
        .backward(&lsgan_generator_grad(&scores), true)
        .expect("target gradient requested");
    d.zero_grad();
    let l1 = l1_loss(fake, &batch.y)?;
    let lam = T::lit(lambda);
    grad.add_assign(&l1_grad(fake, &batch.y)?.scale(lam))?;
    Ok((adv, l1, grad))
}

fn finite(name: &str, v: f32, step: u64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Numeric(format!("{name} = {v} at step {step}")))
    }
}

/// One discriminator update followed by one generator update.
pub fn train_step(state: &mut TrainState, batch: &Batch<f32>) -> Result<StepLosses> {
    let step = state.step;
    let m = &mut state.model;
    let fake = m.generator.forward(&batch.x, &batch.r, Mode::Train)?;
    let loss_d = match discriminator_pass(&mut m.discriminator, batch, &fake) {
        Ok(l) => l,
        Err(e) => {
            m.clear_tape();
            return Err(e);
        }
    };
    if let Err(e) = finite("loss_D", loss_d, step) {
        m.clear_tape();
        return Err(e);
    }
    state.opt_d.step(&mut m.discriminator);
    let (adv, l1, grad) = generator_objective(&mut m.discriminator, batch, &fake, state.config.lambda)?;
    for (name, v) in [("loss_G_adv", adv), ("loss_G_L1", l1)] {
        if let Err(e) = finite(name, v, step) {
            m.clear_tape();
            return Err(e);
        }
    }
    m.generator.backward(&grad);
    state.opt_g.step(&mut m.generator);
    state.step += 1;
    Ok(StepLosses {
        step,
        loss_d,
        loss_g_adv: adv,
        loss_g_l1: l1,
    })
}

/// Draw `batch_size` frames from `sampler`, augmenting if configured.
pub fn draw_batch(
    state: &mut TrainState,
    index: &DatasetIndex,
    sampler: &Sampler,
    seqs: &[LoadedSequence],
) -> Result<Batch<f32>> {
    let mut samples = Vec::with_capacity(state.config.batch_size);
    for _ in 0..state.config.batch_size {
        let i = sampler.sample(&mut state.rng);
        let s = index.sample(seqs, i)?;
        samples.push(match &state.config.augment {
            Some(cfg) => {
                let seed = state.rng.random::<u64>();
                augment(&s, seed, cfg)?
            }
            None => s,
        });
    }
    Batch::collate(&samples)
}

pub fn checkpoint_path(dir: &Path, step: u64) -> PathBuf {
    dir.join(format!("ckpt_{step:06}.bin"))
}

/// Highest-step checkpoint in `dir`.
pub fn latest_checkpoint(dir: &Path) -> Result<PathBuf> {
    let entries = fs::read_dir(dir).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingData(format!("no run directory {}", dir.display())),
        _ => Error::io(dir, e),
    })?;
    let mut best: Option<(u64, PathBuf)> = None;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        let step = name
            .strip_prefix("ckpt_")
            .and_then(|s| s.strip_suffix(".bin"))
            .and_then(|s| s.parse::<u64>().ok());
        if let Some(step) = step {
            if best.as_ref().is_none_or(|(b, _)| step > *b) {
                best = Some((step, path));
            }
        }
    }
    best.map(|(_, p)| p)
        .ok_or_else(|| Error::MissingData(format!("no checkpoints in {}", dir.display())))
}

pub fn read_loss_log(path: &Path) -> Result<Vec<StepLosses>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .skip(1)
        .filter(|l| !l.is_empty())
        .map(StepLosses::parse_row)
        .collect()
}

/// Result of [`train_loop`].
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub final_step: u64,
    /// Steps run by this call.
    pub losses: Vec<StepLosses>,
    pub checkpoints: Vec<PathBuf>,
}

/// Train from scratch (or from `resume`) until `config.steps`, writing
/// `ckpt_NNNNNN.bin` every `checkpoint_every` steps plus the final one, and
/// the loss log. A fresh run also writes the step-0 checkpoint.
pub fn train_loop(
    model: &ModelConfig,
    config: &TrainConfig,
    seqs: &[LoadedSequence],
    out_dir: &Path,
    resume: Option<&Path>,
) -> Result<TrainOutcome> {
    if seqs.is_empty() {
        return Err(Error::MissingData("no training sequences".into()));
    }
    config.validate()?;
    model.validate()?;
    let (w, h) = {
        let f = &seqs[0].seq.vision[0];
        (f.width(), f.height())
    };
    let size = config.augment.as_ref().map_or([w, h], |a| a.crop);
    if size != [model.image_size, model.image_size] {
        return Err(Error::Config(format!(
            "training images are {}x{} but the model expects {}",
            size[0], size[1], model.image_size
        )));
    }

    let mut state = match resume {
        Some(path) => {
            let s = load_checkpoint(path)?;
            if s.model.config != *model || !config.resumable_from(&s.config) {
                return Err(Error::Config(format!(
                    "checkpoint {} was trained with a different configuration",
                    path.display()
                )));
            }
            TrainState {
                config: config.clone(),
                ..s
            }
        }
        None => TrainState::new(model, config)?,
    };

    let index = DatasetIndex::build(seqs, config.direction, config.options)?;
    let sampler = index.sampler()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let log_path = out_dir.join(LOSS_LOG);
    let mut kept = vec![LOSS_LOG_HEADER.to_string()];
    if resume.is_some() && log_path.exists() {
        kept.extend(
            read_loss_log(&log_path)?
                .into_iter()
                .filter(|l| l.step < state.step)
                .map(|l| l.csv_row()),
        );
    }
    fs::write(&log_path, kept.join("\n") + "\n").map_err(|e| Error::io(&log_path, e))?;
    let mut log = OpenOptions::new()
        .append(true)
        .open(&log_path)
        .map_err(|e| Error::io(&log_path, e))?;

    let mut outcome = TrainOutcome {
        final_step: state.step,
        losses: Vec::new(),
        checkpoints: Vec::new(),
    };
    if resume.is_none() {
        let p = checkpoint_path(out_dir, 0);
        save_checkpoint(&mut state, &p)?;
        outcome.checkpoints.push(p);
    }
    while state.step < config.steps {
        let batch = draw_batch(&mut state, &index, &sampler, seqs)?;
        let losses = match train_step(&mut state, &batch) {
            Ok(l) => l,
            Err(e @ Error::Numeric(_)) => {
                save_checkpoint(&mut state, &out_dir.join(DIVERGED_SNAPSHOT))?;
                return Err(e);
            }
            Err(e) => return Err(e),
        };
        writeln!(log, "{}", losses.csv_row()).map_err(|e| Error::io(&log_path, e))?;
        outcome.losses.push(losses);
        if state.step % config.checkpoint_every == 0 || state.step == config.steps {
            let p = checkpoint_path(out_dir, state.step);
            save_checkpoint(&mut state, &p)?;
            outcome.checkpoints.push(p);
        }
    }
    outcome.final_step = state.step;
    Ok(outcome)
}

#[cfg(test)]
mod tests;

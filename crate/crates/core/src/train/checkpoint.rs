//! Checkpoint file:
//!
//! ```text
//! magic "TVCKPT\0\0" | u32 version | u64 header length | JSON header |
//! f32 LE payload: model params and buffers (visit order),
//!                 generator Adam m, v, discriminator Adam m, v
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tactovis_nn::optim::{Adam, AdamConfig};
use tactovis_nn::{Slot, Visit};

use super::{TrainConfig, TrainState};
use crate::error::{Error, Result};
use crate::model::{flatten_state, init_params, ModelConfig};

pub const MAGIC: &[u8; 8] = b"TVCKPT\0\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: u64,
    /// `u128` as a decimal string; JSON numbers cannot hold it.
    pub word_pos: String,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        Self {
            seed: rng.get_seed(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos().to_string(),
        }
    }

    pub fn restore(&self) -> Result<ChaCha8Rng> {
        use rand::SeedableRng;
        let pos: u128 = self
            .word_pos
            .parse()
            .map_err(|_| Error::Checkpoint(format!("bad rng position {:?}", self.word_pos)))?;
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(pos);
        Ok(rng)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub step: u64,
    pub rng: RngState,
    pub state_len: usize,
    pub generator_moment_len: usize,
    pub discriminator_moment_len: usize,
    pub generator_adam_steps: u64,
    pub discriminator_adam_steps: u64,
}

fn moments(opt: &Adam<f32>) -> Vec<f32> {
    opt.first_moment
        .iter()
        .chain(&opt.second_moment)
        .flat_map(|m| m.iter().copied())
        .collect()
}

fn restore_moments(opt: &mut Adam<f32>, flat: &[f32]) {
    let mut off = 0;
    for m in opt.first_moment.iter_mut().chain(opt.second_moment.iter_mut()) {
        let n = m.len();
        m.copy_from_slice(&flat[off..off + n]);
        off += n;
    }
}

fn moment_len(opt: &Adam<f32>) -> usize {
    2 * opt.first_moment.iter().map(Vec::len).sum::<usize>()
}

pub fn save_checkpoint(state: &mut TrainState, path: &Path) -> Result<()> {
    let body = flatten_state(&mut state.model);
    let header = CheckpointHeader {
        model: state.model.config.clone(),
        train: state.config.clone(),
        step: state.step,
        rng: RngState::capture(&state.rng),
        state_len: body.len(),
        generator_moment_len: moment_len(&state.opt_g),
        discriminator_moment_len: moment_len(&state.opt_d),
        generator_adam_steps: state.opt_g.steps,
        discriminator_adam_steps: state.opt_d.steps,
    };
    let json = serde_json::to_vec(&header).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    w.write_all(MAGIC).map_err(io)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes()).map_err(io)?;
    w.write_all(&(json.len() as u64).to_le_bytes()).map_err(io)?;
    w.write_all(&json).map_err(io)?;
    for v in body
        .iter()
        .chain(&moments(&state.opt_g))
        .chain(&moments(&state.opt_d))
    {
        w.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_header(path: &Path) -> Result<(CheckpointHeader, BufReader<File>)> {
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingData(format!("no checkpoint at {}", path.display())),
        _ => Error::io(path, e),
    })?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 8];
    let corrupt = |what: &str| Error::Checkpoint(format!("{}: {what}", path.display()));
    r.read_exact(&mut magic).map_err(|_| corrupt("truncated"))?;
    if &magic != MAGIC {
        return Err(corrupt("not a checkpoint file"));
    }
    let mut u32b = [0u8; 4];
    r.read_exact(&mut u32b).map_err(|_| corrupt("truncated"))?;
    let version = u32::from_le_bytes(u32b);
    if version != CHECKPOINT_VERSION {
        return Err(corrupt(&format!("version {version}, expected {CHECKPOINT_VERSION}")));
    }
    let mut u64b = [0u8; 8];
    r.read_exact(&mut u64b).map_err(|_| corrupt("truncated"))?;
    let len = u64::from_le_bytes(u64b) as usize;
    let mut json = vec![0u8; len];
    r.read_exact(&mut json).map_err(|_| corrupt("truncated header"))?;
    let header: CheckpointHeader = serde_json::from_slice(&json).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    Ok((header, r))
}

fn read_f32s(r: &mut impl Read, n: usize, path: &Path) -> Result<Vec<f32>> {
    let mut bytes = vec![0u8; n * 4];
    r.read_exact(&mut bytes)
        .map_err(|_| Error::Checkpoint(format!("{}: truncated payload", path.display())))?;
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

pub fn load_checkpoint(path: &Path) -> Result<TrainState> {
    let (h, mut r) = read_header(path)?;
    let mut model = init_params::<f32>(&h.model, 0)?;
    let expected = flatten_state(&mut model).len();
    if expected != h.state_len {
        return Err(Error::Checkpoint(format!(
            "{}: {} state values, model needs {expected}",
            path.display(),
            h.state_len
        )));
    }
    let body = read_f32s(&mut r, h.state_len, path)?;
    let mut off = 0;
    model.visit(&mut |slot| {
        let dst: &mut [f32] = match slot {
            Slot::Param(p) => &mut p.value,
            Slot::Buffer(b) => b,
        };
        let n = dst.len();
        dst.copy_from_slice(&body[off..off + n]);
        off += n;
    });
    let adam = adam_config(&h.train);
    let mut opt_g = Adam::new(adam, &mut model.generator);
    let mut opt_d = Adam::new(adam, &mut model.discriminator);
    if moment_len(&opt_g) != h.generator_moment_len || moment_len(&opt_d) != h.discriminator_moment_len {
        return Err(Error::Checkpoint(format!("{}: optimizer state size mismatch", path.display())));
    }
    restore_moments(&mut opt_g, &read_f32s(&mut r, h.generator_moment_len, path)?);
    restore_moments(&mut opt_d, &read_f32s(&mut r, h.discriminator_moment_len, path)?);
    opt_g.steps = h.generator_adam_steps;
    opt_d.steps = h.discriminator_adam_steps;
    let mut rest = Vec::new();
    r.read_to_end(&mut rest).map_err(|e| Error::io(path, e))?;
    if !rest.is_empty() {
        return Err(Error::Checkpoint(format!("{}: trailing bytes", path.display())));
    }
    Ok(TrainState {
        config: h.train,
        model,
        opt_g,
        opt_d,
        step: h.step,
        rng: h.rng.restore()?,
    })
}

pub(crate) fn adam_config(c: &TrainConfig) -> AdamConfig {
    AdamConfig {
        learning_rate: c.learning_rate,
        beta1: c.beta1,
        beta2: c.beta2,
        eps: c.adam_eps,
    }
}

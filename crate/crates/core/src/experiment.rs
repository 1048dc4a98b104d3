//! Reproducible experiments: one declarative config drives dataset
//! generation, training, evaluation and plotting.
//!
//! ```
//! use tactovis::experiment::ExperimentConfig;
//!
//! let cfg: ExperimentConfig = toml::from_str(
//!     r#"
//!     seed = 3
//!     [dataset]
//!     n_train = 6
//!     [train]
//!     steps = 100
//!     "#,
//! )
//! .unwrap();
//! assert_eq!(cfg.dataset.n_seen, 4);
//! assert_eq!(cfg.model.image_size, 64);
//! cfg.validate().unwrap();
//! ```

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize};

use crate::data::{load_split, Manifest, ManifestEntry, SPLITS};
use crate::error::{Error, Result};
use crate::eval::{evaluate, plot_loss_log, plot_report, read_report, write_report, EvalOptions, EvalReport, Predictor};
use crate::model::ModelConfig;
use crate::synthgel::{make_scene, sample_script, synthesize_sequence, write_sequence, SynthConfig, TouchSequence};
use crate::train::{latest_checkpoint, load_checkpoint, train_loop, TrainConfig, TrainOutcome, LOSS_LOG};

/// Copy of the resolved configuration kept next to a run's checkpoints.
pub const RUN_CONFIG: &str = "experiment.toml";
pub const LOSS_PLOT: &str = "loss.svg";

/// Where each stage reads and writes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub data: PathBuf,
    pub run: PathBuf,
    pub eval: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            data: "data".into(),
            run: "run".into(),
            eval: "eval".into(),
        }
    }
}

/// Split sizes and simulator ranges. Unset ranges take the canvas defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSpec {
    pub n_train: usize,
    /// Training sequences per training scene. With one, the reference image
    /// alone would identify where the arm touched.
    pub touches_per_scene: usize,
    /// New touches on training scenes.
    pub n_seen: usize,
    /// Touches on held-out scenes.
    pub n_unseen: usize,
    pub width: usize,
    pub height: usize,
    pub frames: Option<usize>,
    pub object_count: Option<[usize; 2]>,
    pub press_frames: Option<[usize; 2]>,
    pub peak_pressure: Option<[f64; 2]>,
    pub desk_touch_prob: Option<f64>,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            n_train: 20,
            touches_per_scene: 4,
            n_seen: 4,
            n_unseen: 4,
            width: 64,
            height: 64,
            frames: None,
            object_count: None,
            press_frames: None,
            peak_pressure: None,
            desk_touch_prob: None,
        }
    }
}

impl DatasetSpec {
    pub fn synth_config(&self) -> SynthConfig {
        let mut c = SynthConfig::for_canvas(self.width, self.height);
        if let Some(v) = self.frames {
            c.frames = v;
        }
        if let Some(v) = self.object_count {
            c.object_count = v;
        }
        if let Some(v) = self.press_frames {
            c.press_frames = v;
        }
        if let Some(v) = self.peak_pressure {
            c.peak_pressure = v;
        }
        if let Some(v) = self.desk_touch_prob {
            c.desk_touch_prob = v;
        }
        c
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Seeds dataset generation and training.
    pub seed: u64,
    pub paths: Paths,
    pub dataset: DatasetSpec,
    #[serde(deserialize_with = "desk_model")]
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub eval: EvalOptions,
}

impl Default for ExperimentConfig {
    /// Desk scale: 64 px canvases and a width-16 model.
    fn default() -> Self {
        Self {
            seed: 0,
            paths: Paths::default(),
            dataset: DatasetSpec::default(),
            model: desk_scale_model(),
            train: TrainConfig::default(),
            eval: EvalOptions::default(),
        }
    }
}

fn desk_scale_model() -> ModelConfig {
    ModelConfig::miniature(64, 16)
}

/// A partial `[model]` table fills in from the desk-scale model rather than
/// the full-size default.
fn desk_model<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<ModelConfig, D::Error> {
    let mut merged = toml::Table::try_from(desk_scale_model()).map_err(D::Error::custom)?;
    merged.extend(toml::Table::deserialize(d)?);
    merged.try_into().map_err(D::Error::custom)
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingData(format!("config {} not found", path.display())),
            _ => Error::io(path, e),
        })?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment config is TOML-representable")
    }

    pub fn validate(&self) -> Result<()> {
        if self.dataset.n_train == 0 {
            return Err(Error::Config("dataset.n_train must be positive".into()));
        }
        if self.dataset.touches_per_scene == 0 {
            return Err(Error::Config("dataset.touches_per_scene must be positive".into()));
        }
        self.dataset.synth_config().validate()?;
        self.model.validate()?;
        self.train.validate()?;
        self.eval.validate()
    }

    /// The training settings with the experiment seed applied.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train.clone()
        }
    }
}

/// Deterministic seed streams of one experiment seed.
struct SeedStream(ChaCha8Rng);

impl SeedStream {
    fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self(rng)
    }

    fn next(&mut self) -> u64 {
        self.0.next_u64()
    }
}

/// Seeds for every split: training scenes, new touches on those scenes, and
/// fresh scenes disjoint from the training ones.
pub fn plan_dataset(spec: &DatasetSpec, seed: u64) -> Manifest {
    let mut scenes = SeedStream::new(seed, 1);
    let mut held_out = SeedStream::new(seed, 2);
    let mut touches = SeedStream::new(seed, 3);
    let mut manifest = Manifest::new(seed, spec.synth_config());

    let n_scenes = spec.n_train.div_ceil(spec.touches_per_scene.max(1));
    let mut train_scenes = Vec::with_capacity(n_scenes);
    let mut taken = BTreeSet::new();
    while train_scenes.len() < n_scenes {
        let s = scenes.next();
        if taken.insert(s) {
            train_scenes.push(s);
        }
    }
    let entry = |split: &str, i: usize, scene_seed: u64, touch_seed: u64| ManifestEntry {
        id: format!("{split}_{i:04}"),
        scene_seed,
        touch_seed,
    };
    let scene_of = |i: usize| train_scenes[i % n_scenes.max(1)];
    let train = (0..spec.n_train)
        .map(|i| entry("train", i, scene_of(i), touches.next()))
        .collect();
    let seen = (0..spec.n_seen)
        .map(|i| entry("seen", i, scene_of(i), touches.next()))
        .collect();
    let mut unseen = Vec::with_capacity(spec.n_unseen);
    while unseen.len() < spec.n_unseen {
        let s = held_out.next();
        if taken.insert(s) {
            unseen.push(entry("unseen", unseen.len(), s, touches.next()));
        }
    }
    manifest.splits.insert("train".into(), train);
    manifest.splits.insert("seen".into(), seen);
    manifest.splits.insert("unseen".into(), unseen);
    manifest
}

/// Render the sequence of one manifest entry.
pub fn synthesize_entry(synth: &SynthConfig, entry: &ManifestEntry) -> Result<TouchSequence> {
    let scene = make_scene(synth, entry.scene_seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(entry.touch_seed);
    let script = sample_script(&scene, synth, &mut rng);
    synthesize_sequence(&scene, &script, synth)
}

/// Write all splits under `out`. A non-empty `out` is refused unless
/// `force`, which replaces the manifest and split directories only.
pub fn generate_dataset(config: &ExperimentConfig, out: &Path, force: bool) -> Result<Manifest> {
    config.dataset.synth_config().validate()?;
    if config.dataset.n_train == 0 {
        return Err(Error::Config("dataset.n_train must be positive".into()));
    }
    if config.dataset.touches_per_scene == 0 {
        return Err(Error::Config("dataset.touches_per_scene must be positive".into()));
    }
    let occupied = match fs::read_dir(out) {
        Ok(mut entries) => entries.next().is_some(),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => false,
        Err(e) => return Err(Error::io(out, e)),
    };
    if occupied {
        if !force {
            return Err(Error::Config(format!(
                "{} is not empty; pass --force to overwrite",
                out.display()
            )));
        }
        for split in SPLITS {
            let dir = out.join(split);
            if dir.exists() {
                fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            }
        }
    }
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;

    let manifest = plan_dataset(&config.dataset, config.seed);
    let jobs: Vec<(&str, &ManifestEntry)> = SPLITS
        .iter()
        .flat_map(|&split| manifest.splits[split].iter().map(move |e| (split, e)))
        .collect();
    jobs.par_iter().try_for_each(|(split, entry)| {
        let seq = synthesize_entry(&manifest.synth, entry)?;
        write_sequence(&out.join(split).join(&entry.id), &entry.id, &seq)
    })?;
    manifest.write(out)?;
    Ok(manifest)
}

/// Train on the dataset's training split, writing into `run_dir`.
pub fn train_experiment(
    config: &ExperimentConfig,
    data: &Path,
    run_dir: &Path,
    resume: Option<&Path>,
) -> Result<TrainOutcome> {
    config.validate()?;
    let seqs = load_split(data, "train")?;
    fs::create_dir_all(run_dir).map_err(|e| Error::io(run_dir, e))?;
    let path = run_dir.join(RUN_CONFIG);
    fs::write(&path, config.to_toml()).map_err(|e| Error::io(&path, e))?;
    train_loop(&config.model, &config.train_config(), &seqs, run_dir, resume)
}

/// What to evaluate.
#[derive(Clone, Debug, PartialEq)]
pub enum EvalSource {
    /// A checkpoint file.
    Checkpoint(PathBuf),
    /// The latest checkpoint in a run directory.
    LatestIn(PathBuf),
    /// Ground-truth frames in the configured direction.
    GroundTruth,
}

/// Evaluate on the seen and unseen splits and write the report, CSV and
/// curve plots into `out`.
pub fn eval_experiment(config: &ExperimentConfig, data: &Path, source: &EvalSource, out: &Path) -> Result<EvalReport> {
    config.eval.validate()?;
    let seen = load_split(data, "seen")?;
    let unseen = load_split(data, "unseen")?;
    let splits = [("seen", seen.as_slice()), ("unseen", unseen.as_slice())];
    let report = match source {
        EvalSource::GroundTruth => evaluate(&mut Predictor::GroundTruth, config.train.direction, &splits, &config.eval)?,
        EvalSource::Checkpoint(_) | EvalSource::LatestIn(_) => {
            let path = match source {
                EvalSource::Checkpoint(p) => p.clone(),
                EvalSource::LatestIn(dir) => latest_checkpoint(dir)?,
                EvalSource::GroundTruth => unreachable!(),
            };
            let mut state = load_checkpoint(&path)?;
            let mut predictor = Predictor::Model {
                generator: &mut state.model.generator,
                options: state.config.options,
            };
            let mut r = evaluate(&mut predictor, state.config.direction, &splits, &config.eval)?;
            r.checkpoint_step = Some(state.step);
            r
        }
    };
    write_report(&report, out)?;
    plot_report(&report, out)?;
    Ok(report)
}

/// Re-render plots: the loss curves of `run_dir` and the deformation curves
/// of the report in `eval_dir`, whichever exist.
pub fn plot_experiment(run_dir: &Path, eval_dir: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let log = run_dir.join(LOSS_LOG);
    if log.exists() {
        fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        let p = out.join(LOSS_PLOT);
        plot_loss_log(&log, &p)?;
        written.push(p);
    }
    match read_report(eval_dir) {
        Ok(report) => written.extend(plot_report(&report, out)?),
        Err(Error::MissingData(_)) => {}
        Err(e) => return Err(e),
    }
    if written.is_empty() {
        return Err(Error::MissingData(format!(
            "nothing to plot: no {} in {} and no report in {}",
            LOSS_LOG,
            run_dir.display(),
            eval_dir.display()
        )));
    }
    Ok(written)
}

//! Split manifest, sequence loading, and the weighted `(sequence, frame)`
//! index used for training.
//!
//! Dataset root layout:
//!
//! ```text
//! <root>/manifest.json
//! <root>/<split>/<seq_id>/...   (see synthgel)
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rarity::rarity_score;
use super::sampler::{build_sampler, Sampler};
use super::{temporal_window, to_grayscale, Direction};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::synthgel::{read_sequence, SynthConfig, TouchSequence};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

/// Training split, new touches on training scenes, and held-out scenes.
pub const SPLITS: [&str; 3] = ["train", "seen", "unseen"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub scene_seed: u64,
    pub touch_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub seed: u64,
    pub synth: SynthConfig,
    pub splits: BTreeMap<String, Vec<ManifestEntry>>,
}

impl Manifest {
    pub fn new(seed: u64, synth: SynthConfig) -> Self {
        Self {
            format_version: MANIFEST_VERSION,
            seed,
            synth,
            splits: BTreeMap::new(),
        }
    }

    pub fn read(root: &Path) -> Result<Self> {
        let path = root.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => {
                Error::MissingData(format!("no dataset manifest at {}", path.display()))
            }
            _ => Error::io(&path, e),
        })?;
        let m: Manifest = serde_json::from_str(&text).map_err(|source| Error::Json { path, source })?;
        if m.format_version != MANIFEST_VERSION {
            return Err(Error::Invalid(format!(
                "manifest format {} (expected {MANIFEST_VERSION})",
                m.format_version
            )));
        }
        Ok(m)
    }

    pub fn write(&self, root: &Path) -> Result<()> {
        let path = root.join(MANIFEST_FILE);
        let json = serde_json::to_string_pretty(self).map_err(|source| Error::Json {
            path: path.clone(),
            source,
        })?;
        fs::write(&path, json).map_err(|e| Error::io(&path, e))
    }

    pub fn split(&self, name: &str) -> Result<&[ManifestEntry]> {
        self.splits
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::MissingData(format!("manifest has no split {name:?}")))
    }
}

/// A sequence read back from disk.
#[derive(Clone, Debug)]
pub struct LoadedSequence {
    pub id: String,
    pub seq: TouchSequence,
}

/// Read every sequence of `split` listed in the manifest, in manifest order.
pub fn load_split(root: &Path, split: &str) -> Result<Vec<LoadedSequence>> {
    let manifest = Manifest::read(root)?;
    let entries = manifest.split(split)?;
    entries
        .par_iter()
        .map(|e| {
            let (_, seq) = read_sequence(&root.join(split).join(&e.id))?;
            Ok(LoadedSequence { id: e.id.clone(), seq })
        })
        .collect()
}

/// Ablation switches; all on is the full model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleOptions {
    /// Five-frame window; off repeats frame `t` five times.
    pub temporal: bool,
    /// Rarity-weighted sampling; off samples uniformly.
    pub rebalance: bool,
    /// Reference images; off feeds zeros.
    pub reference: bool,
}

impl Default for SampleOptions {
    fn default() -> Self {
        Self {
            temporal: true,
            rebalance: true,
            reference: true,
        }
    }
}

impl SampleOptions {
    pub fn window(&self, len: usize, t: usize) -> [usize; 5] {
        if self.temporal {
            temporal_window(len, t)
        } else {
            [t; 5]
        }
    }
}

/// Generator input and target for one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSample {
    pub seq: usize,
    pub t: usize,
    pub direction: Direction,
    /// Five single-channel frames of the source modality.
    pub inputs: Vec<Image>,
    pub ref_vision: Image,
    pub ref_tactile: Image,
    /// RGB frame `t` of the target modality.
    pub target: Image,
    pub weight: f64,
}

impl TrainingSample {
    pub fn from_sequence(
        seq: &TouchSequence,
        seq_index: usize,
        t: usize,
        direction: Direction,
        options: SampleOptions,
        weight: f64,
    ) -> Result<Self> {
        if t >= seq.len() {
            return Err(Error::Invalid(format!("frame {t} of a {}-frame sequence", seq.len())));
        }
        let (source, target) = match direction {
            Direction::VisionToTouch => (&seq.vision, &seq.tactile),
            Direction::TouchToVision => (&seq.tactile, &seq.vision),
        };
        let inputs = options
            .window(seq.len(), t)
            .iter()
            .map(|&i| to_grayscale(&source[i]))
            .collect();
        let reference = |img: &Image| {
            if options.reference {
                img.clone()
            } else {
                Image::new(img.width(), img.height(), img.channels())
            }
        };
        Ok(Self {
            seq: seq_index,
            t,
            direction,
            inputs,
            ref_vision: reference(&seq.ref_vision),
            ref_tactile: reference(&seq.ref_tactile),
            target: target[t].clone(),
            weight,
        })
    }
}

/// Rebalanced weights never drop below this fraction of the mean rarity.
/// Frames identical to the reference would otherwise never be drawn, and the
/// model would not see the arm near the gel without touching it.
pub const MEAN_RARITY_FLOOR: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub seq: usize,
    pub t: usize,
    /// Rarity of the tactile frame against its reference.
    pub rarity: f64,
    /// Sampling weight: the floored rarity, or 1 without rebalancing.
    pub weight: f64,
    pub in_contact: bool,
}

/// Every frame of every sequence, with its sampling weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetIndex {
    pub direction: Direction,
    pub options: SampleOptions,
    pub seq_ids: Vec<String>,
    pub entries: Vec<IndexEntry>,
}

impl DatasetIndex {
    /// Rarity is always scored on the tactile side, whatever the direction.
    pub fn build(seqs: &[LoadedSequence], direction: Direction, options: SampleOptions) -> Result<Self> {
        if seqs.is_empty() {
            return Err(Error::MissingData("no training sequences".into()));
        }
        let per_seq: Vec<Vec<IndexEntry>> = seqs
            .par_iter()
            .enumerate()
            .map(|(i, s)| {
                let reference = to_grayscale(&s.seq.ref_tactile);
                s.seq
                    .tactile
                    .iter()
                    .enumerate()
                    .map(|(t, frame)| {
                        let rarity = rarity_score(&to_grayscale(frame), &reference)?;
                        Ok(IndexEntry {
                            seq: i,
                            t,
                            rarity,
                            weight: 1.0,
                            in_contact: s.seq.annotation.frames[t].in_contact,
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        let mut entries: Vec<IndexEntry> = per_seq.into_iter().flatten().collect();
        if options.rebalance {
            let floor = MEAN_RARITY_FLOOR * entries.iter().map(|e| e.rarity).sum::<f64>() / entries.len() as f64;
            for e in &mut entries {
                e.weight = e.rarity.max(floor);
            }
        }
        Ok(Self {
            direction,
            options,
            seq_ids: seqs.iter().map(|s| s.id.clone()).collect(),
            entries,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.weight).collect()
    }

    pub fn sampler(&self) -> Result<Sampler> {
        build_sampler(&self.weights())
    }

    pub fn sample(&self, seqs: &[LoadedSequence], entry: usize) -> Result<TrainingSample> {
        if seqs.len() != self.seq_ids.len() {
            return Err(Error::Invalid(format!(
                "index built over {} sequences, given {}",
                self.seq_ids.len(),
                seqs.len()
            )));
        }
        let e = &self.entries[entry];
        TrainingSample::from_sequence(&seqs[e.seq].seq, e.seq, e.t, self.direction, self.options, e.weight)
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::data::RARITY_FLOOR;
    use crate::synthgel::{make_scene, sample_script, synthesize_sequence};

    fn seqs(n: u64, side: usize) -> Vec<LoadedSequence> {
        let cfg = SynthConfig::for_canvas(side, side);
        (0..n)
            .map(|s| {
                let scene = make_scene(&cfg, s).unwrap();
                let mut rng = ChaCha8Rng::seed_from_u64(s + 100);
                let script = sample_script(&scene, &cfg, &mut rng);
                LoadedSequence {
                    id: format!("s{s}"),
                    seq: synthesize_sequence(&scene, &script, &cfg).unwrap(),
                }
            })
            .collect()
    }

    #[test]
    fn contact_frames_are_rarer_than_flat_ones() {
        let data = seqs(4, 64);
        let idx = DatasetIndex::build(&data, Direction::VisionToTouch, SampleOptions::default()).unwrap();
        let mean = |contact: bool| {
            let v: Vec<f64> = idx.entries.iter().filter(|e| e.in_contact == contact).map(|e| e.rarity).collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        assert!(mean(true) > mean(false));
        for e in idx.entries.iter().filter(|e| !e.in_contact) {
            assert_eq!(e.rarity, RARITY_FLOOR);
        }
    }

    #[test]
    fn flat_frames_keep_a_share_of_the_draws() {
        let data = seqs(4, 64);
        let idx = DatasetIndex::build(&data, Direction::VisionToTouch, SampleOptions::default()).unwrap();
        let mean = idx.entries.iter().map(|e| e.rarity).sum::<f64>() / idx.len() as f64;
        let floor = MEAN_RARITY_FLOOR * mean;
        for e in &idx.entries {
            assert_eq!(e.weight, e.rarity.max(floor));
        }
        let p = idx.sampler().unwrap().probabilities().to_vec();
        let flat: f64 = idx.entries.iter().zip(&p).filter(|(e, _)| !e.in_contact).map(|(_, p)| p).sum();
        assert!(flat > 0.05 && flat < 0.3, "flat share {flat}");
    }

    #[test]
    fn no_rebalance_is_uniform() {
        let data = seqs(2, 64);
        let opts = SampleOptions {
            rebalance: false,
            ..SampleOptions::default()
        };
        let idx = DatasetIndex::build(&data, Direction::VisionToTouch, opts).unwrap();
        let s = idx.sampler().unwrap();
        let p0 = s.probabilities()[0];
        assert!(s.probabilities().iter().all(|&p| p == p0));
    }

    #[test]
    fn samples_follow_direction_and_ablations() {
        let data = seqs(1, 64);
        let seq = &data[0].seq;
        let v2t = TrainingSample::from_sequence(seq, 0, 30, Direction::VisionToTouch, SampleOptions::default(), 1.0).unwrap();
        assert_eq!(v2t.inputs.len(), 5);
        assert_eq!(v2t.inputs[0], to_grayscale(&seq.vision[26]));
        assert_eq!(v2t.target, seq.tactile[30]);
        let t2v = TrainingSample::from_sequence(seq, 0, 30, Direction::TouchToVision, SampleOptions::default(), 1.0).unwrap();
        assert_eq!(t2v.inputs[4], to_grayscale(&seq.tactile[34]));
        assert_eq!(t2v.target, seq.vision[30]);

        let flat = SampleOptions {
            temporal: false,
            reference: false,
            ..SampleOptions::default()
        };
        let s = TrainingSample::from_sequence(seq, 0, 30, Direction::VisionToTouch, flat, 1.0).unwrap();
        assert!(s.inputs.iter().all(|f| *f == to_grayscale(&seq.vision[30])));
        assert!(s.ref_vision.data().iter().all(|&v| v == 0.0));
        assert!(s.ref_tactile.data().iter().all(|&v| v == 0.0));
        assert!(TrainingSample::from_sequence(seq, 0, 64, Direction::VisionToTouch, flat, 1.0).is_err());
    }
}

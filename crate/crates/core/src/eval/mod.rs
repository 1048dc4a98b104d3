//! Objective metrics: moment-of-contact error and marker deformation error
//! for vision→touch, and a residual-centroid touch-location error for
//! touch→vision.

mod contact;
mod location;
mod markers;
mod plot;
mod report;

pub use contact::{
    contact_error, deformation_curve, marker_deformation_error, moment_of_contact, ContactInterval, DeformationCurve,
    CONTACT_RATIO,
};
pub use location::{median_with_misses, residual_centroid, touch_location_error, RESIDUAL_THRESHOLD};
pub use markers::{track_markers, MarkerLayout, TrackedMarkers};
pub use plot::{plot_curves, plot_loss_log, plot_report};
pub use report::{read_report, write_report, EvalReport, SequenceEval, SplitSummary, Stat, CURVES_DIR, REPORT_CSV, REPORT_JSON};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tactovis_nn::Mode;

use crate::data::{Direction, LoadedSequence, SampleOptions, TrainingSample};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::model::Generator;
use crate::synthgel::TouchSequence;
use crate::train::{tensor_to_image, Batch};

/// Metric settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalOptions {
    pub contact_ratio: f64,
    pub residual_threshold: f64,
    /// Frames per generator call.
    pub batch_size: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            contact_ratio: CONTACT_RATIO,
            residual_threshold: RESIDUAL_THRESHOLD,
            batch_size: 8,
        }
    }
}

impl EvalOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.contact_ratio > 0.0 && self.contact_ratio < 1.0) {
            return Err(Error::Config(format!("contact_ratio {} not in (0, 1)", self.contact_ratio)));
        }
        if !(self.residual_threshold > 0.0 && self.residual_threshold < 1.0) {
            return Err(Error::Config(format!(
                "residual_threshold {} not in (0, 1)",
                self.residual_threshold
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("eval batch_size must be positive".into()));
        }
        Ok(())
    }
}

/// Source of predicted frames.
pub enum Predictor<'a> {
    /// The ground-truth target frames themselves.
    GroundTruth,
    Model {
        generator: &'a mut Generator<f32>,
        options: SampleOptions,
    },
}

/// Top-left corner of the centred `size × size` window.
fn center_offset(w: usize, h: usize, size: usize) -> Result<(usize, usize)> {
    if w < size || h < size {
        return Err(Error::Config(format!("{w}x{h} frames are smaller than the {size} px model")));
    }
    Ok(((w - size) / 2, (h - size) / 2))
}

fn crop_all(images: &[Image], x0: usize, y0: usize, size: usize) -> Result<Vec<Image>> {
    images.iter().map(|i| i.crop(x0, y0, size, size)).collect()
}

/// A sequence seen through the model's centred window.
struct Window {
    offset: (usize, usize),
    size: usize,
}

impl Window {
    fn full(seq: &TouchSequence) -> Self {
        Self {
            offset: (0, 0),
            size: seq.ref_vision.width(),
        }
    }

    fn images(&self, images: &[Image]) -> Result<Vec<Image>> {
        crop_all(images, self.offset.0, self.offset.1, self.size)
    }

    fn image(&self, image: &Image) -> Result<Image> {
        image.crop(self.offset.0, self.offset.1, self.size, self.size)
    }
}

impl Predictor<'_> {
    fn window(&self, seq: &TouchSequence) -> Result<Window> {
        match self {
            Predictor::GroundTruth => Ok(Window::full(seq)),
            Predictor::Model { generator, .. } => {
                let size = generator.config().image_size;
                let offset = center_offset(seq.ref_vision.width(), seq.ref_vision.height(), size)?;
                Ok(Window { offset, size })
            }
        }
    }

    /// Every frame of the target modality, generated one by one and stored
    /// as 8-bit.
    fn predict(&mut self, seq: &TouchSequence, direction: Direction, batch_size: usize) -> Result<Vec<Image>> {
        match self {
            Predictor::GroundTruth => Ok(match direction {
                Direction::VisionToTouch => seq.tactile.iter().map(Image::quantized).collect(),
                Direction::TouchToVision => seq.vision.iter().map(Image::quantized).collect(),
            }),
            Predictor::Model { generator, options } => {
                let size = generator.config().image_size;
                let (x0, y0) = center_offset(seq.ref_vision.width(), seq.ref_vision.height(), size)?;
                let mut out = Vec::with_capacity(seq.len());
                let frames: Vec<usize> = (0..seq.len()).collect();
                for chunk in frames.chunks(batch_size) {
                    let samples = chunk
                        .iter()
                        .map(|&t| {
                            let s = TrainingSample::from_sequence(seq, 0, t, direction, *options, 1.0)?;
                            Ok(TrainingSample {
                                inputs: crop_all(&s.inputs, x0, y0, size)?,
                                ref_vision: s.ref_vision.crop(x0, y0, size, size)?,
                                ref_tactile: s.ref_tactile.crop(x0, y0, size, size)?,
                                target: s.target.crop(x0, y0, size, size)?,
                                ..s
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    let batch = Batch::collate(&samples)?;
                    let y = generator.forward(&batch.x, &batch.r, Mode::Eval)?;
                    out.extend((0..chunk.len()).map(|i| tensor_to_image(&y, i).quantized()));
                }
                Ok(out)
            }
        }
    }
}

/// Metrics of one sequence given its predicted frames.
fn score_sequence(
    id: &str,
    split: &str,
    seq: &TouchSequence,
    window: &Window,
    direction: Direction,
    pred: &[Image],
    opts: &EvalOptions,
) -> Result<SequenceEval> {
    let mut e = SequenceEval::new(id, split);
    let ann = &seq.annotation;
    match direction {
        Direction::VisionToTouch => {
            // Ground truth is scored at the same 8-bit precision as predictions.
            let (x0, y0) = window.offset;
            let gt: Vec<Image> = window.images(&seq.tactile)?.iter().map(Image::quantized).collect();
            let reference = window.image(&seq.ref_tactile)?.quantized();
            let layout = MarkerLayout::from_grid(&ann.marker_grid).cropped(x0, y0, window.size, window.size);
            let gt_curve = deformation_curve(&gt, &reference, &layout)?;
            let pred_curve = deformation_curve(pred, &reference, &layout)?;
            e.gt_interval = moment_of_contact(&gt_curve, opts.contact_ratio)?;
            e.pred_interval = moment_of_contact(&pred_curve, opts.contact_ratio)?;
            if let Some(gt_i) = e.gt_interval {
                match e.pred_interval {
                    Some(p) => e.contact_error = Some(contact_error(&p, &gt_i)),
                    None => e.contact_missed = true,
                }
            }
            e.marker_error = Some(marker_deformation_error(pred, &gt, &reference, &layout)?);
            e.low_confidence_frames = pred_curve.low_confidence_frames;
            e.gt_curve = gt_curve.values;
            e.pred_curve = pred_curve.values;
        }
        Direction::TouchToVision => {
            if let (Some(on), Some(off)) = (ann.t_on, ann.t_off) {
                let mid = (on + off) / 2;
                let center = ann.frames[mid].center;
                let (x0, y0) = window.offset;
                let center = [center[0] - x0 as f64, center[1] - y0 as f64];
                let reference = window.image(&seq.ref_vision)?.quantized();
                e.location_frame = Some(mid);
                e.location_error = touch_location_error(&pred[mid], &reference, center, opts.residual_threshold)?;
                e.location_missed = e.location_error.is_none();
            }
        }
    }
    Ok(e)
}

/// Evaluate `predictor` on labelled splits. Generation runs sequentially;
/// the metrics run in parallel per sequence.
pub fn evaluate(
    predictor: &mut Predictor<'_>,
    direction: Direction,
    splits: &[(&str, &[LoadedSequence])],
    opts: &EvalOptions,
) -> Result<EvalReport> {
    opts.validate()?;
    let mut sequences = Vec::new();
    for (split, seqs) in splits {
        let mut jobs = Vec::with_capacity(seqs.len());
        for s in seqs.iter() {
            let window = predictor.window(&s.seq)?;
            let pred = predictor.predict(&s.seq, direction, opts.batch_size)?;
            jobs.push((s, window, pred));
        }
        let scored: Vec<SequenceEval> = jobs
            .par_iter()
            .map(|(s, window, pred)| score_sequence(&s.id, split, &s.seq, window, direction, pred, opts))
            .collect::<Result<_>>()?;
        sequences.extend(scored);
    }
    Ok(EvalReport::new(direction, opts, sequences))
}

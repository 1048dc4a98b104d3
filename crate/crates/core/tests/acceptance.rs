//! Acceptance suite. Runs every criterion, prints one line per criterion,
//! and exits non-zero if any fails.
//!
//! `cargo test --release -p tactovis --test acceptance`; pass criterion
//! numbers (`-- 1 2 3`) to run a subset.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use tactovis::data::{load_split, DatasetIndex, Direction, LoadedSequence, SampleOptions, TrainingSample};
use tactovis::eval::{
    contact_error, deformation_curve, moment_of_contact, track_markers, ContactInterval, EvalReport, MarkerLayout,
    CONTACT_RATIO,
};
use tactovis::experiment::{eval_experiment, generate_dataset, train_experiment, EvalSource, ExperimentConfig};
use tactovis::model::{init_params, Model, ModelConfig};
use tactovis::train::{
    checkpoint_path, discriminator_pass, generator_objective, l1_loss, lsgan_losses, Batch, TrainConfig, LOSS_LOG,
};
use tactovis_nn::{Mode, Tensor, Visit};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn scratch() -> tempfile::TempDir {
    tempfile::tempdir().expect("temporary directory")
}

/// Every file under `root`, keyed by relative path.
fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

// ---------------------------------------------------------------- 1

/// Leftmost and rightmost frames at or above `r·(max − min) + min` of the
/// pressure curve, by a plain scan.
fn pressure_interval(p: &[f64], r: f64) -> Option<ContactInterval> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in p {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if hi <= lo {
        return None;
    }
    let theta = r * (hi - lo) + lo;
    let mut first = None;
    let mut last = None;
    for (t, &v) in p.iter().enumerate() {
        if v >= theta {
            if first.is_none() {
                first = Some(t);
            }
            last = Some(t);
        }
    }
    Some(ContactInterval {
        t_l: first?,
        t_r: last?,
    })
}

fn criterion_1() -> Outcome {
    let dir = scratch();
    let mut cfg = ExperimentConfig::default();
    cfg.dataset.n_train = 20;
    cfg.dataset.n_seen = 0;
    cfg.dataset.n_unseen = 0;
    generate_dataset(&cfg, dir.path(), false).map_err(|e| e.to_string())?;
    let seqs = load_split(dir.path(), "train").map_err(|e| e.to_string())?;

    let mut mismatched = Vec::new();
    let (mut err_sum, mut err_n) = (0.0, 0usize);
    // Markers the touch actually moves, reported on their own.
    let (mut moved_sum, mut moved_n) = (0.0, 0usize);
    for s in &seqs {
        let ann = &s.seq.annotation;
        let layout = MarkerLayout::from_grid(&ann.marker_grid);
        let curve = deformation_curve(&s.seq.tactile, &s.seq.ref_tactile, &layout).map_err(|e| e.to_string())?;
        let got = moment_of_contact(&curve, CONTACT_RATIO).map_err(|e| e.to_string())?;
        let want = pressure_interval(&ann.pressures(), CONTACT_RATIO);
        match (got, want) {
            (Some(g), Some(w)) if contact_error(&g, &w) == 0 => {}
            (None, None) => {}
            other => mismatched.push(format!("{}: {other:?}", s.id)),
        }

        let reference = track_markers(&s.seq.ref_tactile, &s.seq.ref_tactile, &layout).map_err(|e| e.to_string())?;
        for (frame, f) in s.seq.tactile.iter().zip(&ann.frames) {
            let tracked = track_markers(frame, &s.seq.ref_tactile, &layout).map_err(|e| e.to_string())?;
            for (m, want) in f.marker_displacements.iter().enumerate() {
                let dx = tracked.positions[m][0] - reference.positions[m][0] - want[0];
                let dy = tracked.positions[m][1] - reference.positions[m][1] - want[1];
                err_sum += dx.hypot(dy);
                err_n += 1;
                if want[0].hypot(want[1]) > 0.25 {
                    moved_sum += dx.hypot(dy);
                    moved_n += 1;
                }
            }
        }
    }
    let mean = err_sum / err_n as f64;
    let moved = moved_sum / moved_n.max(1) as f64;
    check(
        seqs.len() == 20 && mismatched.is_empty() && mean <= 0.5 && moved <= 0.5,
        format!(
            "{} sequences, {} interval mismatches {:?}, mean tracking error {mean:.3} px ({moved:.3} px over {moved_n} displaced markers)",
            seqs.len(),
            mismatched.len(),
            mismatched
        ),
    )
}

// ---------------------------------------------------------------- 2

fn t(v: &[f64]) -> Tensor<f64> {
    Tensor::from_vec([1, 1, 1, v.len()], v.to_vec()).unwrap()
}

fn tabulated_losses() -> Vec<String> {
    let mut bad = Vec::new();
    let mut expect = |name: &str, got: f64, want: f64| {
        if got != want {
            bad.push(format!("{name}: {got} != {want}"));
        }
    };
    let (d, g) = lsgan_losses(&t(&[1.0; 4]), &t(&[0.0; 4])).unwrap();
    expect("loss_D(1, 0)", d, 0.0);
    expect("loss_G(1, 0)", g, 0.5);
    let (d, g) = lsgan_losses(&t(&[0.5; 4]), &t(&[0.5; 4])).unwrap();
    expect("loss_D(½, ½)", d, 0.25);
    expect("loss_G(½, ½)", g, 0.125);
    let (_, g) = lsgan_losses(&t(&[0.3; 4]), &t(&[1.0; 4])).unwrap();
    expect("loss_G(·, 1)", g, 0.0);
    expect("L1([0,1], [1,0])", l1_loss(&t(&[0.0, 1.0]), &t(&[1.0, 0.0])).unwrap(), 1.0);
    expect("L1(x, x)", l1_loss(&t(&[0.25, -0.5]), &t(&[0.25, -0.5])).unwrap(), 0.0);
    expect("L1([0.5,-1], [0,-0.5])", l1_loss(&t(&[0.5, -1.0]), &t(&[0.0, -0.5])).unwrap(), 0.5);
    bad
}

fn params(model: &mut dyn Visit<f64>) -> Vec<usize> {
    let mut sizes = Vec::new();
    model.visit_params(&mut |p| sizes.push(p.len()));
    sizes
}

fn pick(sizes: &[usize], n: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let total = sizes.iter().sum();
    sample(rng, total, n)
        .into_iter()
        .map(|mut flat| {
            let mut k = 0;
            while flat >= sizes[k] {
                flat -= sizes[k];
                k += 1;
            }
            (k, flat)
        })
        .collect()
}

fn with_param(model: &mut dyn Visit<f64>, (k, i): (usize, usize), f: &mut dyn FnMut(&mut f64, f64)) {
    let mut idx = 0;
    model.visit_params(&mut |p| {
        if idx == k {
            let g = p.grad[i];
            f(&mut p.value[i], g);
        }
        idx += 1;
    });
}

fn grad(model: &mut dyn Visit<f64>, c: (usize, usize)) -> f64 {
    let mut out = 0.0;
    with_param(model, c, &mut |_, g| out = g);
    out
}

fn nudge(model: &mut dyn Visit<f64>, c: (usize, usize), delta: f64) {
    with_param(model, c, &mut |v, _| *v += delta);
}

#[derive(Clone, Copy, Debug)]
enum Net {
    G,
    D,
}

impl Net {
    fn of(self, m: &mut Model<f64>) -> &mut dyn Visit<f64> {
        match self {
            Net::G => &mut m.generator,
            Net::D => &mut m.discriminator,
        }
    }
}

/// Gradients of the actual training objectives (`loss_D` for the
/// discriminator, `loss_G + λ·L1` for the generator) on a batch of
/// simulator frames, against central differences.
///
/// A coordinate whose differences at `h` and `h / 10` disagree sits within
/// `h` of a kink (ReLU, L1, max-pool) and is replaced by a spare one.
/// Returns (coordinates checked, kinks skipped, worst relative error).
fn gradient_check() -> Result<(usize, usize, f64), String> {
    let synth = tactovis::synthgel::SynthConfig::for_canvas(32, 32);
    let seqs: Vec<LoadedSequence> = (0..2u64)
        .map(|s| {
            let scene = tactovis::synthgel::make_scene(&synth, s).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(s + 7);
            let script = tactovis::synthgel::sample_script(&scene, &synth, &mut rng);
            LoadedSequence {
                id: s.to_string(),
                seq: tactovis::synthgel::synthesize_sequence(&scene, &script, &synth).unwrap(),
            }
        })
        .collect();
    let samples: Vec<TrainingSample> = seqs
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let t = s.seq.annotation.peak_frame().unwrap_or(10);
            TrainingSample::from_sequence(&s.seq, i, t, Direction::VisionToTouch, SampleOptions::default(), 1.0)
                .unwrap()
        })
        .collect();
    let batch: Batch<f64> = Batch::collate(&samples).map_err(|e| e.to_string())?.cast();
    let lambda = 10.0;

    let cfg = ModelConfig::miniature(32, 4);
    let mut m = init_params::<f64>(&cfg, 21).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let d_picks = pick(&params(&mut m.discriminator), 80, &mut rng);
    let g_picks = pick(&params(&mut m.generator), 80, &mut rng);

    let fake = m.generator.forward(&batch.x, &batch.r, Mode::Train).unwrap();
    discriminator_pass(&mut m.discriminator, &batch, &fake).unwrap();
    let d_analytic: Vec<f64> = d_picks.iter().map(|&c| grad(&mut m.discriminator, c)).collect();
    let (_, _, g) = generator_objective(&mut m.discriminator, &batch, &fake, lambda).unwrap();
    m.generator.backward(&g);
    let g_analytic: Vec<f64> = g_picks.iter().map(|&c| grad(&mut m.generator, c)).collect();
    m.clear_tape();

    let loss_d = |m: &mut Model<f64>| {
        let real = m.discriminator.forward(&batch.x, &batch.r, &batch.y, Mode::Train).unwrap();
        let gen = m.discriminator.forward(&batch.x, &batch.r, &fake, Mode::Train).unwrap();
        m.clear_tape();
        lsgan_losses(&real, &gen).unwrap().0
    };
    let loss_g = |m: &mut Model<f64>| {
        let out = m.generator.forward(&batch.x, &batch.r, Mode::Train).unwrap();
        let s = m.discriminator.forward(&batch.x, &batch.r, &out, Mode::Train).unwrap();
        m.clear_tape();
        let adv = 0.5 * s.data().iter().map(|v| (v - 1.0) * (v - 1.0)).sum::<f64>() / s.len() as f64;
        adv + lambda * l1_loss(&out, &batch.y).unwrap()
    };

    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-5);
    let (mut checked, mut kinks, mut worst) = (0, 0, 0.0f64);
    for (net, picks, analytic) in [(Net::D, &d_picks, &d_analytic), (Net::G, &g_picks, &g_analytic)] {
        let mut done = 0;
        for (&c, &a) in picks.iter().zip(analytic) {
            if done == 60 {
                break;
            }
            let mut central = |h: f64| {
                let objective = |m: &mut Model<f64>| match net {
                    Net::D => loss_d(m),
                    Net::G => loss_g(m),
                };
                nudge(net.of(&mut m), c, h);
                let up = objective(&mut m);
                nudge(net.of(&mut m), c, -2.0 * h);
                let down = objective(&mut m);
                nudge(net.of(&mut m), c, h);
                (up - down) / (2.0 * h)
            };
            let numeric = central(1e-5);
            if rel(numeric, central(1e-6)) >= 1e-3 {
                kinks += 1;
                continue;
            }
            let r = rel(a, numeric);
            worst = worst.max(r);
            if r >= 1e-3 {
                return Err(format!("{net:?} coordinate {c:?}: analytic {a:e}, numeric {numeric:e}"));
            }
            done += 1;
        }
        checked += done;
    }
    Ok((checked, kinks, worst))
}

fn criterion_2() -> Outcome {
    let bad = tabulated_losses();
    if !bad.is_empty() {
        return Err(format!("tabulated losses differ: {bad:?}"));
    }
    let (n, kinks, worst) = gradient_check()?;
    check(
        n >= 100 && worst < 1e-3,
        format!("tabulated losses exact; {n} coordinates ({kinks} near kinks skipped), worst relative error {worst:.2e}"),
    )
}

// ---------------------------------------------------------------- 3

fn criterion_3() -> Outcome {
    let mut cfg = ExperimentConfig::default();
    cfg.dataset.n_seen = 0;
    cfg.dataset.n_unseen = 0;
    let dir = scratch();
    generate_dataset(&cfg, dir.path(), false).map_err(|e| e.to_string())?;
    let seqs = load_split(dir.path(), "train").map_err(|e| e.to_string())?;
    let index = DatasetIndex::build(&seqs, Direction::VisionToTouch, SampleOptions::default()).map_err(|e| e.to_string())?;
    let base = index.entries.iter().filter(|e| e.in_contact).count() as f64 / index.len() as f64;

    let sampler = index.sampler().map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let draws = 10_000usize;
    let hits = (0..draws)
        .filter(|_| index.entries[sampler.sample(&mut rng)].in_contact)
        .count() as f64;
    let frac = hits / draws as f64;

    let (e1, e0) = (base * draws as f64, (1.0 - base) * draws as f64);
    let chi2 = (hits - e1).powi(2) / e1 + (draws as f64 - hits - e0).powi(2) / e0;
    let p = 1.0 - ChiSquared::new(1.0).unwrap().cdf(chi2);
    check(
        frac > 0.7 && p < 0.01,
        format!(
            "no-contact rate {:.1}%, drawn contact {:.1}%, chi2 {chi2:.1}, p {p:.2e}",
            100.0 * (1.0 - base),
            100.0 * frac
        ),
    )
}

// ---------------------------------------------------------------- 4 to 6

/// Dataset and training runs shared by the learning criteria.
struct Desk {
    _root: tempfile::TempDir,
    data: PathBuf,
    runs: PathBuf,
    config: ExperimentConfig,
}

impl Desk {
    fn new() -> Result<Self, String> {
        let root = scratch();
        let mut config = ExperimentConfig::default();
        config.dataset.n_seen = 8;
        config.dataset.n_unseen = 8;
        config.train.steps = 2000;
        config.train.checkpoint_every = 2000;
        let data = root.path().join("data");
        generate_dataset(&config, &data, false).map_err(|e| e.to_string())?;
        Ok(Self {
            data,
            runs: root.path().join("runs"),
            _root: root,
            config,
        })
    }

    fn config(&self, direction: Direction, options: SampleOptions) -> ExperimentConfig {
        let mut c = self.config.clone();
        c.train = TrainConfig {
            direction,
            options,
            ..c.train
        };
        c
    }

    /// Train (once) and evaluate one variant; returns the report and the
    /// step losses.
    fn run(&self, name: &str, direction: Direction, options: SampleOptions) -> Result<Trained, String> {
        let cfg = self.config(direction, options);
        let run = self.runs.join(name);
        let started = Instant::now();
        let out = train_experiment(&cfg, &self.data, &run, None).map_err(|e| format!("{name}: {e}"))?;
        let report = eval_experiment(&cfg, &self.data, &EvalSource::LatestIn(run.clone()), &run.join("eval"))
            .map_err(|e| format!("{name}: {e}"))?;
        let l1: Vec<f64> = out.losses.iter().map(|l| l.loss_g_l1 as f64).collect();
        let finite = out
            .losses
            .iter()
            .all(|l| l.loss_d.is_finite() && l.loss_g_adv.is_finite() && l.loss_g_l1.is_finite());
        eprintln!("  [{name}] trained and evaluated in {:.0}s", started.elapsed().as_secs_f64());
        Ok(Trained { report, l1, finite })
    }
}

struct Trained {
    report: EvalReport,
    l1: Vec<f64>,
    finite: bool,
}

impl Trained {
    /// Mean L1 of the last 100 steps.
    fn final_l1(&self) -> f64 {
        let tail = &self.l1[self.l1.len().saturating_sub(100)..];
        tail.iter().sum::<f64>() / tail.len() as f64
    }
}

fn criterion_4(full: &Trained) -> Outcome {
    let start = full.l1[0];
    let end = full.final_l1();
    check(
        full.l1.len() == 2000 && full.finite && end < 0.25 * start,
        format!(
            "{} steps, L1 {start:.4} -> {end:.4} ({:.1}% of step 0), all losses finite: {}",
            full.l1.len(),
            100.0 * end / start,
            full.finite
        ),
    )
}

fn criterion_5(full: &Trained, ablation: &Trained) -> Outcome {
    let f = full.report.split("seen").ok_or("no seen split")?;
    let a = ablation.report.split("seen").ok_or("no seen split")?;
    let miss = f.contact_miss_rate.unwrap_or(1.0);
    let (fe, ae) = (f.contact_error.mean, a.contact_error.mean);
    let lower = matches!((fe, ae), (Some(x), Some(y)) if x < y);
    check(
        f.sequences == 8 && miss <= 0.25 && lower,
        format!(
            "seen n={}: miss rate {miss:.3}, contact error {fe:?} vs no-temporal {ae:?} (miss {:?})",
            f.sequences, a.contact_miss_rate
        ),
    )
}

fn criterion_6(full: &Trained, ablation: &Trained) -> Outcome {
    let diagonal = ExperimentConfig::default().dataset.synth_config().arm.diagonal();
    let f = full.report.split("seen").ok_or("no seen split")?;
    let a = ablation.report.split("seen").ok_or("no seen split")?;
    let median = f.location_error_median.unwrap_or(f64::INFINITY);
    let (fm, am) = (f.location_miss_rate.unwrap_or(1.0), a.location_miss_rate.unwrap_or(1.0));
    check(
        median <= diagonal && fm <= am,
        format!(
            "seen median location error {median:.2} px (sprite diagonal {diagonal:.2}), miss rate {fm:.3} vs no-reference {am:.3} (median {:?})",
            a.location_error_median
        ),
    )
}

// ---------------------------------------------------------------- 7

fn criterion_7() -> Outcome {
    let mut cfg = ExperimentConfig::default();
    cfg.dataset.n_train = 4;
    cfg.dataset.n_seen = 2;
    cfg.dataset.n_unseen = 2;
    cfg.train.steps = 20;
    cfg.train.checkpoint_every = 10;
    cfg.train.batch_size = 4;

    let pipeline = |root: &Path| -> Result<(), String> {
        generate_dataset(&cfg, &root.join("data"), false).map_err(|e| e.to_string())?;
        train_experiment(&cfg, &root.join("data"), &root.join("run"), None).map_err(|e| e.to_string())?;
        eval_experiment(&cfg, &root.join("data"), &EvalSource::LatestIn(root.join("run")), &root.join("eval"))
            .map_err(|e| e.to_string())?;
        Ok(())
    };
    let (a, b) = (scratch(), scratch());
    pipeline(a.path())?;
    pipeline(b.path())?;
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    let differing: Vec<_> = sa
        .keys()
        .chain(sb.keys())
        .filter(|k| sa.get(*k) != sb.get(*k))
        .cloned()
        .collect();

    // Interrupted at step 10 and resumed: same final checkpoint and log.
    let r = a.path().join("resumed");
    let short = ExperimentConfig {
        train: TrainConfig { steps: 10, ..cfg.train.clone() },
        ..cfg.clone()
    };
    let data = a.path().join("data");
    train_experiment(&short, &data, &r, None).map_err(|e| e.to_string())?;
    train_experiment(&cfg, &data, &r, Some(&checkpoint_path(&r, 10))).map_err(|e| e.to_string())?;
    let run = a.path().join("run");
    let same_ckpt = fs::read(checkpoint_path(&r, 20)).ok() == fs::read(checkpoint_path(&run, 20)).ok();
    let same_log = fs::read(r.join(LOSS_LOG)).ok() == fs::read(run.join(LOSS_LOG)).ok();

    check(
        differing.is_empty() && same_ckpt && same_log && !sa.is_empty(),
        format!(
            "{} files identical across runs (differing: {differing:?}); resumed checkpoint identical: {same_ckpt}, loss log identical: {same_log}",
            sa.len()
        ),
    )
}

// ----------------------------------------------------------------

fn report(n: usize, started: Instant, outcome: &Outcome) -> bool {
    let took = fmt_secs(started.elapsed());
    match outcome {
        Ok(d) => println!("criterion {n}: PASS ({took}) {d}"),
        Err(d) => println!("criterion {n}: FAIL ({took}) {d}"),
    }
    outcome.is_ok()
}

fn fmt_secs(d: Duration) -> String {
    format!("{:.1}s", d.as_secs_f64())
}

fn main() -> ExitCode {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |n: usize| selected.is_empty() || selected.contains(&n);
    let mut all = true;

    let simple: [(usize, fn() -> Outcome); 3] = [(1, criterion_1), (2, criterion_2), (3, criterion_3)];
    for (n, f) in simple {
        if wanted(n) {
            let t0 = Instant::now();
            all &= report(n, t0, &f());
        }
    }

    if wanted(4) || wanted(5) || wanted(6) {
        let t0 = Instant::now();
        let learning = (|| -> Result<_, String> {
            let desk = Desk::new()?;
            let full = SampleOptions::default();
            let v2t = desk.run("v2t", Direction::VisionToTouch, full)?;
            let mut rest = None;
            if wanted(5) || wanted(6) {
                let no_temporal = desk.run("v2t_no_temporal", Direction::VisionToTouch, SampleOptions { temporal: false, ..full })?;
                let t2v = desk.run("t2v", Direction::TouchToVision, full)?;
                let no_reference = desk.run("t2v_no_reference", Direction::TouchToVision, SampleOptions { reference: false, ..full })?;
                rest = Some((no_temporal, t2v, no_reference));
            }
            Ok((v2t, rest))
        })();
        match learning {
            Err(e) => {
                for n in [4, 5, 6].into_iter().filter(|&n| wanted(n)) {
                    all &= report(n, t0, &Err(e.clone()));
                }
            }
            Ok((v2t, rest)) => {
                if wanted(4) {
                    all &= report(4, t0, &criterion_4(&v2t));
                }
                if let Some((no_temporal, t2v, no_reference)) = rest {
                    if wanted(5) {
                        all &= report(5, t0, &criterion_5(&v2t, &no_temporal));
                    }
                    if wanted(6) {
                        all &= report(6, t0, &criterion_6(&t2v, &no_reference));
                    }
                }
            }
        }
    }

    if wanted(7) {
        let t0 = Instant::now();
        all &= report(7, t0, &criterion_7());
    }

    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

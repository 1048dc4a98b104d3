use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tactovis_nn::{Mode, Tensor, Visit};

use super::*;
use crate::model::{flatten_state, Generator};
use crate::synthgel::{make_scene, sample_script, synthesize_sequence, SynthConfig};

fn tiny_data(n: u64) -> Vec<LoadedSequence> {
    let cfg = SynthConfig {
        frames: 16,
        press_frames: [6, 8],
        ..SynthConfig::for_canvas(32, 32)
    };
    (0..n)
        .map(|s| {
            let scene = make_scene(&cfg, s).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let script = sample_script(&scene, &cfg, &mut rng);
            LoadedSequence {
                id: format!("seq{s}"),
                seq: synthesize_sequence(&scene, &script, &cfg).unwrap(),
            }
        })
        .collect()
}

fn tiny_model() -> ModelConfig {
    ModelConfig::miniature(32, 4)
}

fn tiny_train(steps: u64) -> TrainConfig {
    TrainConfig {
        batch_size: 2,
        steps,
        checkpoint_every: 3,
        seed: 4,
        ..TrainConfig::default()
    }
}

fn fixed_batch(data: &[LoadedSequence], direction: Direction) -> Batch<f32> {
    let samples: Vec<_> = [(0, 7), (1, 9)]
        .iter()
        .map(|&(s, t)| {
            TrainingSample::from_sequence(&data[s].seq, s, t, direction, SampleOptions::default(), 1.0).unwrap()
        })
        .collect();
    Batch::collate(&samples).unwrap()
}

#[test]
fn collate_scales_and_stacks() {
    let data = tiny_data(2);
    let b = fixed_batch(&data, Direction::VisionToTouch);
    assert_eq!(b.x.shape(), [2, 5, 32, 32]);
    assert_eq!(b.r.shape(), [2, 6, 32, 32]);
    assert_eq!(b.y.shape(), [2, 3, 32, 32]);
    let v = data[0].seq.tactile[7].data()[5];
    assert_eq!(b.y.data()[5], 2.0 * v - 1.0);
    assert!(b.x.data().iter().all(|v| (-1.0..=1.0).contains(v)));
    assert!(Batch::collate(&[]).is_err());
}

#[test]
fn steps_are_deterministic() {
    let data = tiny_data(2);
    let batch = fixed_batch(&data, Direction::VisionToTouch);
    let run = || {
        let mut s = TrainState::new(&tiny_model(), &tiny_train(1)).unwrap();
        let l = train_step(&mut s, &batch).unwrap();
        (l, flatten_state(&mut s.model))
    };
    let (la, pa) = run();
    let (lb, pb) = run();
    assert_eq!(la, lb);
    assert_eq!(pa, pb);
    assert!(la.loss_d.is_finite() && la.loss_g_adv.is_finite() && la.loss_g_l1.is_finite());
}

#[test]
fn checkpoint_round_trip_then_step_matches() {
    let data = tiny_data(2);
    let batch = fixed_batch(&data, Direction::VisionToTouch);
    let dir = tempfile::tempdir().unwrap();
    let mut a = TrainState::new(&tiny_model(), &tiny_train(3)).unwrap();
    train_step(&mut a, &batch).unwrap();
    let path = dir.path().join("c.bin");
    save_checkpoint(&mut a, &path).unwrap();
    let mut b = load_checkpoint(&path).unwrap();
    assert_eq!(b.step, 1);
    assert_eq!(flatten_state(&mut a.model), flatten_state(&mut b.model));
    assert_eq!(a.opt_g, b.opt_g);
    assert_eq!(a.opt_d, b.opt_d);
    assert_eq!(a.rng, b.rng);
    let la = train_step(&mut a, &batch).unwrap();
    let lb = train_step(&mut b, &batch).unwrap();
    assert_eq!(la, lb);
    assert_eq!(flatten_state(&mut a.model), flatten_state(&mut b.model));
}

#[test]
fn corrupt_checkpoints_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = TrainState::new(&tiny_model(), &tiny_train(1)).unwrap();
    let path = dir.path().join("c.bin");
    save_checkpoint(&mut s, &path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 4]).unwrap();
    assert!(matches!(load_checkpoint(&path), Err(Error::Checkpoint(_))));
    std::fs::write(&path, b"garbage!garbage!").unwrap();
    assert!(matches!(load_checkpoint(&path), Err(Error::Checkpoint(_))));
    assert!(matches!(load_checkpoint(&dir.path().join("none")), Err(Error::MissingData(_))));
}

#[test]
fn zero_lambda_leaves_the_pure_adversarial_gradient() {
    let data = tiny_data(2);
    let batch = fixed_batch(&data, Direction::VisionToTouch);
    let mut m = init_params::<f32>(&tiny_model(), 1).unwrap();
    let fake = m.generator.forward(&batch.x, &batch.r, Mode::Eval).unwrap();
    let (_, l1_0, g0) = generator_objective(&mut m.discriminator, &batch, &fake, 0.0).unwrap();
    let (_, l1_10, g10) = generator_objective(&mut m.discriminator, &batch, &fake, 10.0).unwrap();
    assert_eq!(l1_0, l1_10);
    let expect = g0.add(&l1_grad(&fake, &batch.y).unwrap().scale(10.0)).unwrap();
    for (a, b) in g10.data().iter().zip(expect.data()) {
        assert!((a - b).abs() < 1e-7);
    }
    // The discriminator is left without gradients.
    m.discriminator.visit_params(&mut |p| assert!(p.grad.iter().all(|&g| g == 0.0)));
}

#[test]
fn generator_objective_gradient_matches_finite_differences() {
    let data = tiny_data(2);
    let cfg = ModelConfig::miniature(16, 4);
    let samples: Vec<_> = [(0usize, 7usize), (1, 9), (0, 3)]
        .iter()
        .map(|&(s, t)| {
            let full = TrainingSample::from_sequence(&data[s].seq, s, t, Direction::VisionToTouch, SampleOptions::default(), 1.0)
                .unwrap();
            crate::data::augment(&full, 0, &AugmentConfig { crop: [16, 16], ..AugmentConfig::identity(32, 32) }).unwrap()
        })
        .collect();
    let batch: Batch<f64> = Batch::collate(&samples).unwrap().cast();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut g = Generator::<f64>::new(&cfg, &mut rng);
    let mut d = Discriminator::<f64>::new(&cfg, &mut rng);
    let lambda = 10.0;
    let objective = |g: &mut Generator<f64>, d: &mut Discriminator<f64>| {
        let fake = g.forward(&batch.x, &batch.r, Mode::Train).unwrap();
        let (adv, l1, _) = generator_objective(d, &batch, &fake, lambda).unwrap();
        g.clear_tape();
        adv + lambda * l1
    };
    let fake = g.forward(&batch.x, &batch.r, Mode::Train).unwrap();
    let (_, _, grad) = generator_objective(&mut d, &batch, &fake, lambda).unwrap();
    g.backward(&grad);

    let mut sizes = Vec::new();
    g.visit_params(&mut |p| sizes.push(p.len()));
    let total: usize = sizes.iter().sum();
    let picks = sample(&mut rng, total, 100).into_vec();
    let locate = |mut flat: usize| {
        let mut k = 0;
        while flat >= sizes[k] {
            flat -= sizes[k];
            k += 1;
        }
        (k, flat)
    };
    // Step and denominator floor sit above f64 round-off in a deep objective.
    let h = 1e-5;
    for flat in picks {
        let (k, i) = locate(flat);
        let mut analytic = 0.0;
        let mut idx = 0;
        g.visit_params(&mut |p| {
            if idx == k {
                analytic = p.grad[i];
            }
            idx += 1;
        });
        let bump = |g: &mut Generator<f64>, delta: f64| {
            let mut idx = 0;
            g.visit_params(&mut |p| {
                if idx == k {
                    p.value[i] += delta;
                }
                idx += 1;
            });
        };
        bump(&mut g, h);
        let up = objective(&mut g, &mut d);
        bump(&mut g, -2.0 * h);
        let down = objective(&mut g, &mut d);
        bump(&mut g, h);
        let numeric = (up - down) / (2.0 * h);
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-5);
        assert!(rel < 1e-3, "coord ({k}, {i}): analytic {analytic} numeric {numeric}");
    }
}

#[test]
fn overfits_a_single_batch() {
    let data = tiny_data(2);
    let batch = fixed_batch(&data, Direction::VisionToTouch);
    // A larger step than the default keeps the smoke test short.
    let cfg = TrainConfig {
        learning_rate: 3e-3,
        ..tiny_train(500)
    };
    let mut s = TrainState::new(&ModelConfig::miniature(32, 8), &cfg).unwrap();
    let first = train_step(&mut s, &batch).unwrap().loss_g_l1;
    let mut last = first;
    for _ in 1..500 {
        last = train_step(&mut s, &batch).unwrap().loss_g_l1;
    }
    assert!(last * 10.0 <= first, "L1 {first} -> {last}");
}

#[test]
fn non_finite_loss_aborts_with_snapshot() {
    let mut data = tiny_data(1);
    for f in &mut data[0].seq.tactile {
        f.data_mut()[0] = f32::NAN;
    }
    let dir = tempfile::tempdir().unwrap();
    let cfg = TrainConfig {
        options: SampleOptions {
            rebalance: false,
            ..SampleOptions::default()
        },
        ..tiny_train(2)
    };
    let err = train_loop(&tiny_model(), &cfg, &data, dir.path(), None).unwrap_err();
    assert!(matches!(err, Error::Numeric(_)), "{err}");
    assert_eq!(err.exit_code(), 4);
    assert!(dir.path().join(DIVERGED_SNAPSHOT).exists());
}

#[test]
fn zero_steps_write_only_the_initial_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let out = train_loop(&tiny_model(), &tiny_train(0), &tiny_data(1), dir.path(), None).unwrap();
    assert_eq!(out.checkpoints, vec![checkpoint_path(dir.path(), 0)]);
    assert!(out.losses.is_empty());
    let files: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(files.len(), 2, "{files:?}");
    assert_eq!(read_loss_log(&dir.path().join(LOSS_LOG)).unwrap(), vec![]);
}

#[test]
fn resume_reproduces_the_uninterrupted_log() {
    let data = tiny_data(2);
    let full = tempfile::tempdir().unwrap();
    let cut = tempfile::tempdir().unwrap();
    train_loop(&tiny_model(), &tiny_train(7), &data, full.path(), None).unwrap();
    train_loop(&tiny_model(), &tiny_train(3), &data, cut.path(), None).unwrap();
    let ck = latest_checkpoint(cut.path()).unwrap();
    assert_eq!(ck, checkpoint_path(cut.path(), 3));
    train_loop(&tiny_model(), &tiny_train(7), &data, cut.path(), Some(&ck)).unwrap();
    let a = std::fs::read(full.path().join(LOSS_LOG)).unwrap();
    let b = std::fs::read(cut.path().join(LOSS_LOG)).unwrap();
    assert_eq!(a, b);
    let ca = std::fs::read(checkpoint_path(full.path(), 7)).unwrap();
    let cb = std::fs::read(checkpoint_path(cut.path(), 7)).unwrap();
    assert_eq!(ca, cb);
}

#[test]
fn resume_rejects_a_different_configuration() {
    let data = tiny_data(1);
    let dir = tempfile::tempdir().unwrap();
    train_loop(&tiny_model(), &tiny_train(1), &data, dir.path(), None).unwrap();
    let ck = checkpoint_path(dir.path(), 1);
    let other = TrainConfig {
        lambda: 5.0,
        ..tiny_train(2)
    };
    let err = train_loop(&tiny_model(), &other, &data, dir.path(), Some(&ck)).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    let wider = ModelConfig::miniature(32, 8);
    assert!(train_loop(&wider, &tiny_train(2), &data, dir.path(), Some(&ck)).is_err());
}

#[test]
fn touch_to_vision_uses_the_same_loop() {
    let data = tiny_data(2);
    let dir = tempfile::tempdir().unwrap();
    let cfg = TrainConfig {
        direction: Direction::TouchToVision,
        ..tiny_train(2)
    };
    let out = train_loop(&tiny_model(), &cfg, &data, dir.path(), None).unwrap();
    assert_eq!(out.final_step, 2);
    let b = fixed_batch(&data, Direction::TouchToVision);
    assert_eq!(b.y.data()[0], to_signed(data[0].seq.vision[7].data()[0]));
}

#[test]
fn empty_or_mis_sized_data_is_rejected_before_training() {
    let dir = tempfile::tempdir().unwrap();
    let err = train_loop(&tiny_model(), &tiny_train(1), &[], dir.path(), None).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    let err = train_loop(&ModelConfig::miniature(64, 4), &tiny_train(1), &tiny_data(1), dir.path(), None).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn tensor_round_trip_to_image() {
    let t = Tensor::from_vec([1, 3, 1, 2], vec![-1.0, 1.0, 0.0, 0.5, -0.5, 2.0]).unwrap();
    let img = tensor_to_image(&t, 0);
    assert_eq!(img.data(), &[0.0, 1.0, 0.5, 0.75, 0.25, 1.0]);
}

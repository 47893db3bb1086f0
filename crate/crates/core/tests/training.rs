use kanae::data::{synthetic_heartbeats, Dataset, LabeledSeries};
use kanae::models::{build, Family, ModelSpec};
use kanae::optim::{train, Objective, TrainConfig};
use kanae::tasks::{run, Task, TaskSettings};
use kanae::Error;

fn small_spec(family: Family, n: usize) -> ModelSpec {
    let mut s = ModelSpec::new(family);
    s.input_length = n;
    s.latent_dim = 8;
    s.hidden = vec![64];
    s.channels = vec![4, 8];
    s
}

fn dataset(n: usize) -> Dataset {
    Dataset::from_raw(synthetic_heartbeats(20, 20, n, 1), synthetic_heartbeats(30, 30, n, 2)).unwrap()
}

fn cfg(epochs: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        epochs,
        seed,
        ..TrainConfig::default()
    }
}

#[test]
fn runs_are_bitwise_reproducible() {
    let data = dataset(48);
    for family in Family::ALL {
        let spec = small_spec(family, 48);
        let a = run(Task::Denoising, &spec, &cfg(3, 5), &TaskSettings::default(), &data).unwrap();
        let b = run(Task::Denoising, &spec, &cfg(3, 5), &TaskSettings::default(), &data).unwrap();
        assert_eq!(
            serde_json::to_string(&a.report.loss_fields()).unwrap(),
            serde_json::to_string(&b.report.loss_fields()).unwrap()
        );
        let c = run(Task::Denoising, &spec, &cfg(3, 6), &TaskSettings::default(), &data).unwrap();
        assert_ne!(a.report.epoch_loss, c.report.epoch_loss);
    }
}

#[test]
fn null_corruption_replays_reconstruction() {
    let data = dataset(48);
    for family in Family::ALL {
        let spec = small_spec(family, 48);
        let base = run(Task::Reconstruction, &spec, &cfg(4, 2), &TaskSettings::default(), &data).unwrap().report;
        let zero = TaskSettings {
            noise_sigma: 0.0,
            mask_ratio: 0.0,
            ..TaskSettings::default()
        };
        for task in [Task::Denoising, Task::Inpainting] {
            let r = run(task, &spec, &cfg(4, 2), &zero, &data).unwrap().report;
            assert_eq!(r.epoch_loss, base.epoch_loss, "{task} {family}");
            assert_eq!(r.losses_test, base.losses_test, "{task} {family}");
        }
    }
}

#[test]
fn generation_without_kl_and_noise_is_reconstruction() {
    let data = dataset(48);
    let mut spec = small_spec(Family::Kcae, 48);
    spec.variational = true;
    let base = run(Task::Reconstruction, &spec, &cfg(4, 3), &TaskSettings::default(), &data).unwrap().report;
    let settings = TaskSettings {
        beta: 0.0,
        frozen_epsilon: true,
        ..TaskSettings::default()
    };
    let gen = run(Task::Generation, &spec, &cfg(4, 3), &settings, &data).unwrap().report;
    assert_eq!(gen.epoch_loss, base.epoch_loss);
    assert_eq!(gen.losses_test, base.losses_test);
}

#[test]
fn zero_epochs_is_a_config_error() {
    let data = dataset(48);
    let r = run(Task::Reconstruction, &small_spec(Family::Ae, 48), &cfg(0, 0), &TaskSettings::default(), &data);
    assert!(matches!(r, Err(Error::Config(_))));
}

#[test]
fn generated_samples_are_bounded_and_seeded() {
    let data = dataset(64);
    for family in [Family::Cae, Family::Kcae] {
        let mut spec = small_spec(family, 64);
        spec.variational = true;
        let a = run(Task::Generation, &spec, &cfg(30, 4), &TaskSettings::default(), &data).unwrap();
        let b = run(Task::Generation, &spec, &cfg(30, 4), &TaskSettings::default(), &data).unwrap();
        let g = a.report.generation.as_ref().unwrap();
        assert_eq!(g.samples, 64);
        assert!(g.all_finite);
        assert!(g.min >= -6.0 && g.max <= 6.0, "{family}: [{}, {}]", g.min, g.max);
        assert_eq!(a.generated, b.generated);
    }
}

#[test]
fn denoiser_beats_identity_and_inpainter_beats_zero_fill() {
    let data = Dataset::from_raw(synthetic_heartbeats(40, 40, 96, 1), synthetic_heartbeats(30, 30, 96, 2)).unwrap();
    for family in Family::ALL {
        let spec = small_spec(family, 96);
        let r = run(Task::Denoising, &spec, &cfg(200, 0), &TaskSettings::default(), &data).unwrap().report;
        let baseline = r.denoising.as_ref().unwrap().identity_baseline_mse;
        assert!(r.test_mse < baseline, "{family}: denoised {} vs noisy {baseline}", r.test_mse);

        let r = run(Task::Inpainting, &spec, &cfg(200, 0), &TaskSettings::default(), &data).unwrap().report;
        let m = r.inpainting.as_ref().unwrap();
        assert!(m.masked_mse < m.zero_fill_masked_mse, "{family}: {m:?}");
    }
}

#[test]
fn repeated_series_is_learned_to_identity() {
    let one: LabeledSeries = synthetic_heartbeats(1, 0, 64, 9).remove(0);
    let data = Dataset::from_raw(vec![one.clone(); 16], vec![one]).unwrap();
    let mut spec = small_spec(Family::Kcae, 64);
    spec.batchnorm = false;
    spec.dropout = 0.0;
    let c = TrainConfig {
        epochs: 100,
        batch_size: 1,
        ..TrainConfig::default()
    };
    let r = run(Task::Reconstruction, &spec, &c, &TaskSettings::default(), &data).unwrap().report;
    assert!(r.test_mse < 1e-3, "{}", r.test_mse);
}

/// Window-10 moving average of the overfit-batch trace. Adam at a fixed
/// rate jitters once the loss nears its floor, so each step may rise by at
/// most 5% of the epoch-50 level, and the tail must end below that level.
#[test]
fn smoothed_overfit_trace_decreases_after_epoch_50() {
    let raw = synthetic_heartbeats(4, 4, 187, 11);
    let stats = kanae::data::NormStats::fit(&raw).unwrap();
    let batch: Vec<Vec<f64>> = stats.apply(&raw).into_iter().map(|s| s.values).collect();
    for family in [Family::Cae, Family::Kcae] {
        let spec = ModelSpec {
            dropout: 0.0,
            ..ModelSpec::new(family)
        };
        let mut model = build(&spec, 0).unwrap();
        let c = TrainConfig {
            epochs: 500,
            batch_size: 8,
            ..TrainConfig::default()
        };
        let trace = train(&mut model, &batch, &c, Objective::Mse, &|_, _, _| None).unwrap();
        let smooth: Vec<f64> = trace.epoch_loss.windows(10).map(|w| w.iter().sum::<f64>() / 10.0).collect();
        let level = smooth[50];
        for i in 50..smooth.len() - 1 {
            let rise = smooth[i + 1] - smooth[i];
            assert!(rise <= 0.05 * level, "{family} epoch {i}: {} -> {}", smooth[i], smooth[i + 1]);
        }
        assert!(*smooth.last().unwrap() < 0.5 * level, "{family}");
    }
}

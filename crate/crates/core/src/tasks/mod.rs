//! The five benchmark tasks and their report artifacts.
//!
//! Every task trains through [`optim::train`]; tasks differ only in the
//! input transform (none, additive noise, block masking), the training
//! subset (all series, or normal beats only) and the objective (MSE, or
//! MSE plus a KL term for generation). With a null corruption, denoising
//! and inpainting therefore replay the reconstruction run bit for bit.
//!
//! Evaluation-time corruption of the train and test splits uses the epoch
//! tags [`EVAL_TRAIN_EPOCH`] and [`EVAL_TEST_EPOCH`], so it never collides
//! with a training epoch.

pub mod efficiency;
pub mod export;
pub mod metrics;
pub mod timing;

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{sample_rng, Corruption, Dataset, LabeledSeries};
use crate::error::{Error, Result};
use crate::models::{build, Family, Model, ModelSpec, Noise};
use crate::nn::{checkpoint, Ctx, Tensor};
use crate::optim::{self, InputTransform, Objective, TrainConfig};
use crate::splines::GridParams;
use metrics::{LossSummary, Pca};

pub const EVAL_TRAIN_EPOCH: u64 = u64::MAX - 1;
pub const EVAL_TEST_EPOCH: u64 = u64::MAX;
pub const GENERATION_STREAM: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Reconstruction,
    Denoising,
    Inpainting,
    Anomaly,
    Generation,
}

impl Task {
    pub const ALL: [Task; 5] = [
        Task::Reconstruction,
        Task::Denoising,
        Task::Inpainting,
        Task::Anomaly,
        Task::Generation,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Task::Reconstruction => "reconstruction",
            Task::Denoising => "denoising",
            Task::Inpainting => "inpainting",
            Task::Anomaly => "anomaly",
            Task::Generation => "generation",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Task::ALL
            .into_iter()
            .find(|t| t.tag().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::config(format!("unknown task {s:?}")))
    }
}

/// Task knobs beyond the model and the optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskSettings {
    pub noise_sigma: f64,
    pub mask_ratio: f64,
    pub mask_block: usize,
    /// KL weight for generation.
    pub beta: f64,
    /// Freeze the reparameterization noise at zero during generation
    /// training.
    pub frozen_epsilon: bool,
    pub generated_samples: usize,
    /// Label of the normal class for anomaly detection.
    pub normal_label: i64,
    /// Training-score quantile used as the anomaly threshold.
    pub threshold_quantile: f64,
    pub eval_batch: usize,
}

impl Default for TaskSettings {
    fn default() -> Self {
        Self {
            noise_sigma: 0.3,
            mask_ratio: 0.2,
            mask_block: 10,
            beta: 1e-3,
            frozen_epsilon: false,
            generated_samples: 64,
            normal_label: 0,
            threshold_quantile: 0.95,
            eval_batch: 64,
        }
    }
}

impl TaskSettings {
    pub fn corruption(&self, task: Task) -> Corruption {
        match task {
            Task::Denoising => Corruption::GaussianNoise { sigma: self.noise_sigma },
            Task::Inpainting => Corruption::Mask {
                ratio: self.mask_ratio,
                block: self.mask_block,
            },
            _ => Corruption::None,
        }
    }

    pub fn problems(&self, task: Task) -> Vec<String> {
        let mut p = self.corruption(task).problems();
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            p.push(format!("beta must be a nonnegative number, got {}", self.beta));
        }
        if !(0.0..=1.0).contains(&self.threshold_quantile) {
            p.push(format!("threshold quantile must lie in [0, 1], got {}", self.threshold_quantile));
        }
        if self.generated_samples == 0 {
            p.push("generated sample count must be positive".into());
        }
        if self.eval_batch == 0 {
            p.push("evaluation batch must be positive".into());
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenoisingMetrics {
    pub noise_sigma: f64,
    /// MSE of the noisy test input itself against the clean target.
    pub identity_baseline_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InpaintingMetrics {
    pub mask_ratio: f64,
    pub mask_block: usize,
    pub masked_mse: f64,
    pub unmasked_mse: f64,
    /// Masked-region MSE of the zero-filled input.
    pub zero_fill_masked_mse: f64,
    pub masked_positions: usize,
    pub unmasked_positions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyMetrics {
    pub normal_label: i64,
    pub train_samples: usize,
    pub test_labels: Vec<i64>,
    pub auc: f64,
    pub threshold_quantile: f64,
    pub threshold: f64,
    pub confusion: metrics::Confusion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationMetrics {
    pub beta: f64,
    pub samples: usize,
    pub min: f64,
    pub max: f64,
    pub all_finite: bool,
    pub generated_mean: Vec<f64>,
    pub generated_std: Vec<f64>,
    pub train_mean: Vec<f64>,
    pub train_std: Vec<f64>,
    /// Mean over positions of |generated mean - train mean|.
    pub mean_abs_mean_gap: f64,
    /// Mean over positions of |generated std - train std|.
    pub mean_abs_std_gap: f64,
}

/// Published figures for the family, kept for side-by-side reading only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceValues {
    pub reconstruction_mse: f64,
    pub loss_drift_peak: Option<f64>,
}

impl ReferenceValues {
    pub fn for_family(family: Family) -> Self {
        let (reconstruction_mse, loss_drift_peak) = match family {
            Family::Ae => (0.1376, None),
            Family::Kae => (0.2261, None),
            Family::Cae => (0.2423, Some(0.035)),
            Family::Kcae => (0.15498, Some(0.006)),
        };
        Self {
            reconstruction_mse,
            loss_drift_peak,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskReport {
    pub task: Task,
    pub family: Family,
    pub seed: u64,
    pub precision: String,
    pub configured_length: usize,
    pub observed_length: usize,
    pub length_matches_config: bool,
    pub param_count: usize,
    /// Spline grid of the KAN layers, for KAN families.
    pub grid: Option<GridParams>,
    pub train_samples: usize,
    pub test_samples: usize,
    pub train_mse: f64,
    pub test_mse: f64,
    pub losses_train: Vec<f64>,
    pub losses_test: Vec<f64>,
    pub summary_train: LossSummary,
    pub summary_test: LossSummary,
    pub epoch_loss: Vec<f64>,
    pub epoch_seconds: Vec<f64>,
    pub mean_epoch_seconds: f64,
    pub forward_seconds_per_sample: f64,
    pub latent_silhouette: Option<f64>,
    pub denoising: Option<DenoisingMetrics>,
    pub inpainting: Option<InpaintingMetrics>,
    pub anomaly: Option<AnomalyMetrics>,
    pub generation: Option<GenerationMetrics>,
    pub reference: ReferenceValues,
    /// Effective run configuration, filled in by the CLI.
    #[serde(default)]
    pub config: serde_json::Value,
}

impl TaskReport {
    /// The fields that must be bitwise reproducible across reruns:
    /// everything except wall-clock timings and the echoed config.
    pub fn loss_fields(&self) -> serde_json::Value {
        serde_json::json!({
            "train_mse": self.train_mse,
            "test_mse": self.test_mse,
            "losses_train": self.losses_train,
            "losses_test": self.losses_test,
            "epoch_loss": self.epoch_loss,
            "anomaly": self.anomaly,
            "generation": self.generation,
            "inpainting": self.inpainting,
        })
    }
}

/// Everything a run produces besides the report.
#[derive(Debug)]
pub struct TaskOutcome {
    pub report: TaskReport,
    pub model: Model,
    pub test_labels: Vec<i64>,
    pub latent_test: Vec<Vec<f64>>,
    pub latent_pca: Vec<Vec<f64>>,
    pub generated: Option<Vec<Vec<f64>>>,
}

fn values(series: &[LabeledSeries]) -> Vec<Vec<f64>> {
    series.iter().map(|s| s.values.clone()).collect()
}

fn corrupt_all(c: &Corruption, xs: &[Vec<f64>], seed: u64, epoch: u64) -> Result<(Vec<Vec<f64>>, Vec<Vec<bool>>)> {
    xs.iter()
        .enumerate()
        .map(|(i, x)| c.apply(x, &mut sample_rng(seed, epoch, i as u64)))
        .collect::<Result<Vec<_>>>()
        .map(|v| v.into_iter().unzip())
}

fn column_stats(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len() as f64;
    let d = rows.first().map_or(0, Vec::len);
    let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let std = (0..d)
        .map(|j| (rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n).sqrt())
        .collect();
    (mean, std)
}

fn mean_abs_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

/// Check a run request before any work; all problems at once.
pub fn validate(task: Task, spec: &ModelSpec, train: &TrainConfig, settings: &TaskSettings) -> Result<()> {
    let mut p = spec.problems();
    p.extend(train.problems_for(spec));
    p.extend(settings.problems(task));
    if task == Task::Generation && !spec.variational {
        p.push("generation needs a variational model (model.variational = true)".into());
    }
    if let Corruption::Mask { ratio, block } = settings.corruption(task) {
        let blocks = Corruption::mask_blocks(ratio, block, spec.input_length);
        if block > 0 && blocks * block > spec.input_length {
            p.push(format!(
                "{blocks} mask blocks of length {block} do not fit in {} samples",
                spec.input_length
            ));
        }
    }
    if p.is_empty() {
        Ok(())
    } else {
        Err(Error::Config(p.join("; ")))
    }
}

/// Train a fresh `spec` model on `data` for `task` and evaluate it.
///
/// The model is built for the series length found in `data`; a mismatch
/// with `spec.input_length` is recorded in the report, not rejected.
///
/// `train.seed` seeds everything: initialization, shuffling, dropout,
/// corruption and prior samples.
pub fn run(task: Task, spec: &ModelSpec, train: &TrainConfig, settings: &TaskSettings, data: &Dataset) -> Result<TaskOutcome> {
    let configured_length = spec.input_length;
    let spec = &ModelSpec {
        input_length: data.observed_length,
        ..spec.clone()
    };
    validate(task, spec, train, settings)?;
    let seed = train.seed;
    let mut model = build(spec, seed)?;
    let batch = settings.eval_batch;

    let train_split: Vec<&LabeledSeries> = match task {
        Task::Anomaly => data.train.iter().filter(|s| s.label == settings.normal_label).collect(),
        _ => data.train.iter().collect(),
    };
    if train_split.len() < 2 {
        return Err(Error::config(format!(
            "task {task} has {} training series; at least two are needed",
            train_split.len()
        )));
    }
    let train_x: Vec<Vec<f64>> = train_split.iter().map(|s| s.values.clone()).collect();
    let test_x = values(&data.test);
    let test_labels: Vec<i64> = data.test.iter().map(|s| s.label).collect();

    let corruption = settings.corruption(task);
    let transform: Box<InputTransform> = if corruption.is_identity() {
        Box::new(|_, _, _| None)
    } else {
        Box::new(move |epoch, idx, x: &[f64]| {
            let mut rng = sample_rng(seed, epoch as u64, idx as u64);
            Some(corruption.apply(x, &mut rng).expect("corruption validated").0)
        })
    };
    let objective = match task {
        Task::Generation => Objective::Vae {
            beta: settings.beta,
            noise: if settings.frozen_epsilon { Noise::Zero } else { Noise::Sample },
        },
        _ => Objective::Mse,
    };
    let trace = optim::train(&mut model, &train_x, train, objective, &*transform)?;

    let (train_in, _) = corrupt_all(&corruption, &train_x, seed, EVAL_TRAIN_EPOCH)?;
    let (test_in, test_keep) = corrupt_all(&corruption, &test_x, seed, EVAL_TEST_EPOCH)?;
    let losses_train = optim::per_sample_losses(&mut model, &train_in, &train_x, batch)?;
    let started = Instant::now();
    let recon_test = optim::reconstruct(&mut model, &test_in, batch)?;
    let forward_seconds_per_sample = started.elapsed().as_secs_f64() / test_x.len().max(1) as f64;
    let losses_test: Vec<f64> = recon_test
        .iter()
        .zip(&test_x)
        .map(|(p, x)| p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / x.len() as f64)
        .collect();

    let mut report = TaskReport {
        task,
        family: spec.family,
        seed,
        precision: "f64".into(),
        configured_length,
        observed_length: data.observed_length,
        length_matches_config: data.observed_length == configured_length,
        param_count: model.param_count(),
        grid: spec.family.is_kan().then_some(spec.grid),
        train_samples: train_x.len(),
        test_samples: test_x.len(),
        train_mse: metrics::mean(&losses_train),
        test_mse: metrics::mean(&losses_test),
        summary_train: LossSummary::of(&losses_train),
        summary_test: LossSummary::of(&losses_test),
        losses_train,
        losses_test,
        mean_epoch_seconds: metrics::mean(&trace.epoch_seconds),
        epoch_loss: trace.epoch_loss,
        epoch_seconds: trace.epoch_seconds,
        forward_seconds_per_sample,
        latent_silhouette: None,
        denoising: None,
        inpainting: None,
        anomaly: None,
        generation: None,
        reference: ReferenceValues::for_family(spec.family),
        config: serde_json::Value::Null,
    };

    match task {
        Task::Reconstruction => {}
        Task::Denoising => {
            let baseline: Vec<f64> = test_in
                .iter()
                .zip(&test_x)
                .map(|(a, b)| a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>() / b.len() as f64)
                .collect();
            report.denoising = Some(DenoisingMetrics {
                noise_sigma: settings.noise_sigma,
                identity_baseline_mse: metrics::mean(&baseline),
            });
        }
        Task::Inpainting => {
            let (mut masked, mut unmasked, mut zero_fill) = (0.0, 0.0, 0.0);
            let (mut n_masked, mut n_unmasked) = (0usize, 0usize);
            for ((p, x), keep) in recon_test.iter().zip(&test_x).zip(&test_keep) {
                for ((a, b), k) in p.iter().zip(x).zip(keep) {
                    let e = (a - b) * (a - b);
                    if *k {
                        unmasked += e;
                        n_unmasked += 1;
                    } else {
                        masked += e;
                        zero_fill += b * b;
                        n_masked += 1;
                    }
                }
            }
            let per = |s: f64, n: usize| if n == 0 { 0.0 } else { s / n as f64 };
            report.inpainting = Some(InpaintingMetrics {
                mask_ratio: settings.mask_ratio,
                mask_block: settings.mask_block,
                masked_mse: per(masked, n_masked),
                unmasked_mse: per(unmasked, n_unmasked),
                zero_fill_masked_mse: per(zero_fill, n_masked),
                masked_positions: n_masked,
                unmasked_positions: n_unmasked,
            });
        }
        Task::Anomaly => {
            let positive: Vec<bool> = test_labels.iter().map(|l| *l != settings.normal_label).collect();
            let auc = metrics::auc(&report.losses_test, &positive)?;
            let threshold = metrics::quantile(&report.losses_train, settings.threshold_quantile);
            report.anomaly = Some(AnomalyMetrics {
                normal_label: settings.normal_label,
                train_samples: train_x.len(),
                test_labels: test_labels.clone(),
                auc,
                threshold_quantile: settings.threshold_quantile,
                threshold,
                confusion: metrics::Confusion::at(&report.losses_test, &positive, threshold),
            });
        }
        Task::Generation => {}
    }

    let generated = if task == Task::Generation {
        let mut rng = optim::stream(seed, GENERATION_STREAM);
        let k = spec.latent_dim;
        let n = settings.generated_samples;
        let z: Vec<f64> = (0..n * k).map(|_| StandardNormal.sample(&mut rng)).collect();
        let out = model.decode(&Tensor::new(&[n, k], z)?, &mut Ctx::eval())?;
        let rows: Vec<Vec<f64>> = out.rows().map(<[f64]>::to_vec).collect();
        let (generated_mean, generated_std) = column_stats(&rows);
        let (train_mean, train_std) = column_stats(&train_x);
        let flat = out.data();
        report.generation = Some(GenerationMetrics {
            beta: settings.beta,
            samples: n,
            min: flat.iter().copied().fold(f64::INFINITY, f64::min),
            max: flat.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            all_finite: flat.iter().all(|v| v.is_finite()),
            mean_abs_mean_gap: mean_abs_gap(&generated_mean, &train_mean),
            mean_abs_std_gap: mean_abs_gap(&generated_std, &train_std),
            generated_mean,
            generated_std,
            train_mean,
            train_std,
        });
        Some(rows)
    } else {
        None
    };

    let latent_test = optim::encode_all(&mut model, &test_x, batch)?;
    report.latent_silhouette = metrics::silhouette(&latent_test, &test_labels);
    let latent_pca = match Pca::fit(&latent_test, 2) {
        Ok(pca) => latent_test.iter().map(|z| pca.project(z)).collect(),
        Err(_) => Vec::new(),
    };

    Ok(TaskOutcome {
        report,
        model,
        test_labels,
        latent_test,
        latent_pca,
        generated,
    })
}

/// Write the report, CSV artifacts and checkpoint of one run into `dir`.
pub fn write_artifacts(dir: &Path, outcome: &TaskOutcome) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let r = &outcome.report;
    std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(r)?)?;
    export::write_losses(&dir.join("losses_train.csv"), "train", &r.losses_train)?;
    export::write_losses(&dir.join("losses_test.csv"), "test", &r.losses_test)?;
    export::write_trace(&dir.join("trace.csv"), &r.epoch_loss)?;
    export::write_timing(&dir.join("timing.csv"), &r.epoch_seconds)?;
    export::write_labeled_rows(&dir.join("latent_test.csv"), "z", &outcome.test_labels, &outcome.latent_test)?;
    if !outcome.latent_pca.is_empty() {
        export::write_labeled_rows(&dir.join("latent_pca_test.csv"), "pc", &outcome.test_labels, &outcome.latent_pca)?;
    }
    if let Some(g) = &outcome.generated {
        export::write_samples(&dir.join("generated.csv"), g)?;
    }
    if let Some(a) = &r.anomaly {
        export::write_csv(
            &dir.join("anomaly_scores.csv"),
            &["sample_index", "label", "score", "flagged"].map(String::from),
            r.losses_test.iter().zip(&a.test_labels).enumerate().map(|(i, (s, l))| {
                vec![
                    i.to_string(),
                    l.to_string(),
                    export::fmt_f64(*s),
                    u8::from(*s > a.threshold).to_string(),
                ]
            }),
        )?;
    }
    let spec = serde_json::to_value(outcome.model.spec())?;
    checkpoint::save(&dir.join("model.ckpt"), spec, &outcome.model)?;
    Ok(())
}

/// `<out>/<task>/<family>/seed<NN>`
pub fn run_dir(out: &Path, task: Task, family: Family, seed: u64) -> std::path::PathBuf {
    out.join(task.tag()).join(family.tag()).join(format!("seed{seed:02}"))
}

//! UCR-format series files, global z-normalization, input corruption and a
//! synthetic heartbeat generator for fixtures.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSeries {
    pub label: i64,
    pub values: Vec<f64>,
}

fn parse_error(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn separator(line: &str) -> Option<char> {
    if line.contains('\t') {
        Some('\t')
    } else if line.contains(',') {
        Some(',')
    } else {
        None
    }
}

fn parse_label(field: &str) -> Option<i64> {
    let v: f64 = field.trim().parse().ok()?;
    (v.fract() == 0.0 && v.is_finite()).then_some(v as i64)
}

/// Read a UCR text file: one series per line, label first, then the values.
///
/// The separator (tab, comma, or whitespace) is taken from the first
/// nonblank line, and so is the series length; later lines of another
/// length are parse errors naming the line.
pub fn load_ucr(path: &Path) -> Result<Vec<LabeledSeries>> {
    let text = fs::read_to_string(path)?;
    let mut sep = None;
    let mut len = None;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let sep = *sep.get_or_insert_with(|| separator(line));
        let fields: Vec<&str> = match sep {
            Some(c) => line.trim_end().split(c).collect(),
            None => line.split_whitespace().collect(),
        };
        let label = parse_label(fields[0])
            .ok_or_else(|| parse_error(path, lineno, format!("bad label {:?}", fields[0])))?;
        let values = fields[1..]
            .iter()
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_error(path, lineno, format!("bad value {f:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.is_empty() {
            return Err(parse_error(path, lineno, "series has no values"));
        }
        let expected = *len.get_or_insert(values.len());
        if values.len() != expected {
            return Err(parse_error(
                path,
                lineno,
                format!("series length {} differs from {expected} on the first line", values.len()),
            ));
        }
        out.push(LabeledSeries { label, values });
    }
    if out.is_empty() {
        return Err(parse_error(path, 0, "file holds no series"));
    }
    Ok(out)
}

/// Write series in the tab-separated UCR layout. Values use 17 significant
/// digits, so [`load_ucr`] restores them bit for bit.
pub fn write_ucr(path: &Path, series: &[LabeledSeries]) -> Result<()> {
    let mut buf = Vec::new();
    for s in series {
        write!(buf, "{}", s.label)?;
        for v in &s.values {
            write!(buf, "\t{v:.16e}")?;
        }
        buf.push(b'\n');
    }
    fs::write(path, buf)?;
    Ok(())
}

/// Global mean and standard deviation of a training split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: f64,
    pub std: f64,
}

impl NormStats {
    /// Fit on the training split only.
    pub fn fit(train: &[LabeledSeries]) -> Result<Self> {
        let n: usize = train.iter().map(|s| s.values.len()).sum();
        if n == 0 {
            return Err(Error::config("cannot normalize an empty training split"));
        }
        let all = || train.iter().flat_map(|s| s.values.iter().copied());
        let mean = all().sum::<f64>() / n as f64;
        let var = all().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let std = var.sqrt();
        if std.is_nan() || std < 1e-8 {
            return Err(Error::config(format!(
                "training data is constant (std {std:e}); cannot z-normalize"
            )));
        }
        Ok(Self { mean, std })
    }

    pub fn normalize(&self, values: &[f64]) -> Vec<f64> {
        values.iter().map(|v| (v - self.mean) / self.std).collect()
    }

    pub fn denormalize(&self, values: &[f64]) -> Vec<f64> {
        values.iter().map(|v| v * self.std + self.mean).collect()
    }

    pub fn apply(&self, series: &[LabeledSeries]) -> Vec<LabeledSeries> {
        series
            .iter()
            .map(|s| LabeledSeries {
                label: s.label,
                values: self.normalize(&s.values),
            })
            .collect()
    }
}

/// A normalized train/test pair with the statistics used.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub train: Vec<LabeledSeries>,
    pub test: Vec<LabeledSeries>,
    pub stats: NormStats,
    /// Series length found in the files.
    pub observed_length: usize,
}

impl Dataset {
    /// Normalize both splits with statistics fitted on `train`.
    pub fn from_raw(train: Vec<LabeledSeries>, test: Vec<LabeledSeries>) -> Result<Self> {
        let observed_length = train.first().map_or(0, |s| s.values.len());
        if let Some(bad) = test.iter().find(|s| s.values.len() != observed_length) {
            return Err(Error::config(format!(
                "test series length {} differs from training length {observed_length}",
                bad.values.len()
            )));
        }
        let stats = NormStats::fit(&train)?;
        Ok(Self {
            train: stats.apply(&train),
            test: stats.apply(&test),
            stats,
            observed_length,
        })
    }

    pub fn load(train: &Path, test: &Path) -> Result<Self> {
        Self::from_raw(load_ucr(train)?, load_ucr(test)?)
    }
}

/// Where the UCR AbnormalHeartbeat files are expected: `$KANAE_UCR_DIR`.
pub fn ucr_paths_from_env() -> Option<(PathBuf, PathBuf)> {
    let dir = PathBuf::from(std::env::var_os("KANAE_UCR_DIR")?);
    let pick = |split: &str| {
        ["tsv", "txt", "csv"]
            .iter()
            .map(|ext| dir.join(format!("AbnormalHeartbeat_{split}.{ext}")))
            .find(|p| p.exists())
    };
    Some((pick("TRAIN")?, pick("TEST")?))
}

/// Input corruption for the denoising and inpainting tasks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Corruption {
    None,
    GaussianNoise { sigma: f64 },
    Mask { ratio: f64, block: usize },
}

impl Corruption {
    pub fn problems(&self) -> Vec<String> {
        match *self {
            Corruption::None => vec![],
            Corruption::GaussianNoise { sigma } => {
                if sigma.is_finite() && sigma >= 0.0 {
                    vec![]
                } else {
                    vec![format!("noise sigma must be a nonnegative number, got {sigma}")]
                }
            }
            Corruption::Mask { ratio, block } => {
                let mut p = vec![];
                if !(0.0..1.0).contains(&ratio) {
                    p.push(format!("mask ratio must be in [0, 1), got {ratio}"));
                }
                if block == 0 {
                    p.push("mask block length must be positive".into());
                }
                p
            }
        }
    }

    /// Whether the corruption leaves every input unchanged.
    pub fn is_identity(&self) -> bool {
        match *self {
            Corruption::None => true,
            Corruption::GaussianNoise { sigma } => sigma == 0.0,
            Corruption::Mask { ratio, .. } => ratio == 0.0,
        }
    }

    /// Number of masked blocks on a series of length `len`.
    pub fn mask_blocks(ratio: f64, block: usize, len: usize) -> usize {
        (ratio * len as f64 / block as f64).ceil() as usize
    }

    /// Corrupted copy of `values` and the keep-mask (`true` = untouched).
    pub fn apply<R: Rng + ?Sized>(&self, values: &[f64], rng: &mut R) -> Result<(Vec<f64>, Vec<bool>)> {
        let keep = vec![true; values.len()];
        if self.is_identity() {
            return Ok((values.to_vec(), keep));
        }
        match *self {
            Corruption::None => unreachable!("identity handled above"),
            Corruption::GaussianNoise { sigma } => {
                let normal = Normal::new(0.0, sigma).map_err(|e| Error::config(e.to_string()))?;
                Ok((values.iter().map(|v| v + normal.sample(rng)).collect(), keep))
            }
            Corruption::Mask { ratio, block } => {
                let len = values.len();
                let blocks = Self::mask_blocks(ratio, block, len);
                if blocks * block > len {
                    return Err(Error::config(format!(
                        "{blocks} mask blocks of length {block} do not fit in {len} samples"
                    )));
                }
                // Non-overlapping blocks: choose sorted gap offsets in
                // [0, free], then shift block i right by i * block.
                let free = len - blocks * block;
                let mut gaps: Vec<usize> = (0..blocks).map(|_| rng.random_range(0..=free)).collect();
                gaps.sort_unstable();
                let mut out = values.to_vec();
                let mut keep = keep;
                for (i, g) in gaps.into_iter().enumerate() {
                    let start = g + i * block;
                    for p in start..start + block {
                        out[p] = 0.0;
                        keep[p] = false;
                    }
                }
                Ok((out, keep))
            }
        }
    }
}

/// Random stream for corrupting sample `index` in `epoch` of run `seed`.
pub fn sample_rng(seed: u64, epoch: u64, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&epoch.to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    key[24..].copy_from_slice(b"corrupt\0");
    ChaCha8Rng::from_seed(key)
}

/// One synthetic heartbeat: P wave, QRS complex and T wave as Gaussian
/// bumps, with per-beat jitter in timing and amplitude. Abnormal beats get
/// a widened QRS, an inverted T wave and an ectopic bump.
pub fn synthetic_beat<R: Rng + ?Sized>(len: usize, abnormal: bool, rng: &mut R) -> Vec<f64> {
    let jitter = |rng: &mut R, s: f64| rng.random_range(-s..=s);
    let bump = |t: f64, c: f64, w: f64, a: f64| a * (-(t - c) * (t - c) / (2.0 * w * w)).exp();
    let shift = jitter(rng, 0.02);
    let amp = 1.0 + jitter(rng, 0.15);
    let (qrs_w, t_amp) = if abnormal { (0.035, -0.35) } else { (0.012, 0.35) };
    let ectopic = if abnormal { 0.6 + jitter(rng, 0.2) } else { 0.0 };
    let ectopic_at = 0.75 + jitter(rng, 0.08);
    let noise = Normal::new(0.0, 0.02).expect("valid sigma");
    (0..len)
        .map(|i| {
            let t = i as f64 / len as f64 - shift;
            let v = bump(t, 0.2, 0.025, 0.15)
                + bump(t, 0.37, 0.008, -0.15)
                + bump(t, 0.4, qrs_w, 1.0)
                + bump(t, 0.43, 0.008, -0.25)
                + bump(t, 0.62, 0.04, t_amp)
                + bump(t, ectopic_at, 0.02, ectopic);
            amp * v + noise.sample(rng)
        })
        .collect()
}

/// `normal` beats labelled 0 followed by `abnormal` beats labelled 1.
pub fn synthetic_heartbeats(normal: usize, abnormal: usize, len: usize, seed: u64) -> Vec<LabeledSeries> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..normal + abnormal)
        .map(|i| {
            let ab = i >= normal;
            LabeledSeries {
                label: ab as i64,
                values: synthetic_beat(len, ab, &mut rng),
            }
        })
        .collect()
}

/// Add a triangular spike of half-width `half_width` peaking at `center`.
pub fn add_spike(values: &mut [f64], center: usize, half_width: usize, height: f64) {
    let w = half_width as f64 + 1.0;
    let lo = center.saturating_sub(half_width);
    let hi = (center + half_width).min(values.len().saturating_sub(1));
    for (i, v) in values.iter_mut().enumerate().take(hi + 1).skip(lo) {
        *v += height * (1.0 - i.abs_diff(center) as f64 / w);
    }
}

/// Normal beats for training; a test split of normal beats (label 0) and
/// normal beats carrying one spike of `height` at a random position
/// (label 1).
pub fn spike_fixture(
    train: usize,
    test_normal: usize,
    test_spiked: usize,
    len: usize,
    height: f64,
    seed: u64,
) -> (Vec<LabeledSeries>, Vec<LabeledSeries>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beat = |rng: &mut ChaCha8Rng| synthetic_beat(len, false, rng);
    let train: Vec<LabeledSeries> = (0..train)
        .map(|_| LabeledSeries {
            label: 0,
            values: beat(&mut rng),
        })
        .collect();
    let test = (0..test_normal + test_spiked)
        .map(|i| {
            let mut values = beat(&mut rng);
            let spiked = i >= test_normal;
            if spiked {
                let at = rng.random_range(0..len);
                add_spike(&mut values, at, 2, height);
            }
            LabeledSeries {
                label: spiked as i64,
                values,
            }
        })
        .collect();
    (train, test)
}

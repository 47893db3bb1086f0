//! Run configuration: TOML files flattened to `section.key` entries.
//!
//! Sources in increasing precedence: built-in defaults, the config file,
//! the `KANAE_OUT` environment variable (for `output.dir`), and command-line
//! flags `--section.key=value`. Every key accepted in a file is accepted as
//! a flag and vice versa.
//!
//! ```toml
//! [data]
//! train = "AbnormalHeartbeat_TRAIN.tsv"
//! test = "AbnormalHeartbeat_TEST.tsv"
//!
//! [model]
//! family = "kcae"
//! latent_dim = 32
//! override."encoder.1".dropout = 0.0
//!
//! [task]
//! name = "denoising"
//! noise_sigma = 0.3
//!
//! [train]
//! epochs = 300
//! seeds = [0, 1, 2, 3, 4]
//! ```
//!
//! Keys (defaults in [`RunConfig::default`]):
//!
//! | key | type |
//! |---|---|
//! | `data.train`, `data.test` | path, relative to the config file |
//! | `model.family` | `ae`, `kae`, `cae`, `kcae` |
//! | `model.input_length`, `model.latent_dim`, `model.kernel`, `model.stride` | integer |
//! | `model.hidden`, `model.channels` | integer array |
//! | `model.grid_order`, `model.grid_size` | integer |
//! | `model.grid_min`, `model.grid_max`, `model.dropout`, `model.smoothness` | float |
//! | `model.batchnorm`, `model.variational` | bool |
//! | `model.override.<block>.batchnorm` / `.dropout` | bool / float |
//! | `task.name` | `reconstruction`, `denoising`, `inpainting`, `anomaly`, `generation` |
//! | `task.noise_sigma`, `task.mask_ratio`, `task.beta`, `task.threshold_quantile` | float |
//! | `task.mask_block`, `task.generated_samples`, `task.normal_label`, `task.eval_batch` | integer |
//! | `task.frozen_epsilon` | bool |
//! | `train.epochs`, `train.batch_size`, `train.seed` | integer |
//! | `train.seeds` | integer array (bench) |
//! | `train.learning_rate` | float |
//! | `train.optimizer` | `adam`, `sgd` |
//! | `train.precision` | `f64` |
//! | `bench.families` | string array |
//! | `bench.tasks` | string array |
//! | `output.dir` | path |

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::Value;

use crate::error::{Error, Result};
use crate::models::{Family, ModelSpec};
use crate::optim::{OptimizerKind, TrainConfig};
use crate::tasks::{Task, TaskSettings};

/// A fully resolved run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub train_path: Option<PathBuf>,
    pub test_path: Option<PathBuf>,
    pub model: ModelSpec,
    pub task: Task,
    pub settings: TaskSettings,
    pub train: TrainConfig,
    /// Seeds for `bench`; `train` uses `train.seed`.
    pub seeds: Vec<u64>,
    pub families: Vec<Family>,
    pub tasks: Vec<Task>,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            train_path: None,
            test_path: None,
            model: ModelSpec::new(Family::Kcae),
            task: Task::Reconstruction,
            settings: TaskSettings::default(),
            train: TrainConfig::default(),
            seeds: vec![0, 1, 2, 3, 4],
            families: Family::ALL.to_vec(),
            tasks: vec![Task::Reconstruction],
            output_dir: PathBuf::from("runs"),
        }
    }
}

pub type Flat = BTreeMap<String, Value>;

/// Flatten nested tables into dotted keys; arrays stay values.
pub fn flatten(table: &toml::Table) -> Flat {
    fn walk(prefix: &str, t: &toml::Table, out: &mut Flat) {
        for (k, v) in t {
            let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
            match v {
                Value::Table(inner) => walk(&key, inner, out),
                other => {
                    out.insert(key, other.clone());
                }
            }
        }
    }
    let mut out = Flat::new();
    walk("", table, &mut out);
    out
}

pub fn parse_file(path: &Path) -> Result<Flat> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
    let table: toml::Table = toml::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: line_of(&text, e.span().map_or(0, |s| s.start)),
        msg: e.message().to_string(),
    })?;
    let mut flat = flatten(&table);
    // Data paths are relative to the file that names them.
    let base = path.parent().unwrap_or(Path::new(""));
    for key in ["data.train", "data.test"] {
        if let Some(Value::String(p)) = flat.get(key) {
            let joined = base.join(p).to_string_lossy().into_owned();
            flat.insert(key.into(), Value::String(joined));
        }
    }
    Ok(flat)
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Parse one flag value: TOML syntax when it parses, a bare string otherwise.
pub fn parse_flag_value(raw: &str) -> Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

/// Split `--section.key=value` arguments from the rest.
pub fn split_key_flags(args: &[String]) -> (Vec<String>, Flat) {
    let mut rest = Vec::new();
    let mut flat = Flat::new();
    for a in args {
        match a.strip_prefix("--").and_then(|s| s.split_once('=')) {
            Some((k, v)) if k.contains('.') => {
                flat.insert(k.to_string(), parse_flag_value(v));
            }
            _ => rest.push(a.clone()),
        }
    }
    (rest, flat)
}

struct Reader<'a> {
    flat: &'a Flat,
    problems: Vec<String>,
    used: Vec<String>,
}

impl Reader<'_> {
    fn get(&mut self, key: &str) -> Option<&Value> {
        let v = self.flat.get(key)?;
        self.used.push(key.to_string());
        Some(v)
    }

    fn bad(&mut self, key: &str, want: &str, v: &Value) {
        self.problems.push(format!("{key}: expected {want}, got {v}"));
    }

    fn int(&mut self, key: &str, slot: &mut usize) {
        if let Some(v) = self.get(key).cloned() {
            match v.as_integer().and_then(|i| usize::try_from(i).ok()) {
                Some(i) => *slot = i,
                None => self.bad(key, "a nonnegative integer", &v),
            }
        }
    }

    fn u64(&mut self, key: &str, slot: &mut u64) {
        let mut x = *slot as usize;
        self.int(key, &mut x);
        *slot = x as u64;
    }

    fn i64(&mut self, key: &str, slot: &mut i64) {
        if let Some(v) = self.get(key).cloned() {
            match v.as_integer() {
                Some(i) => *slot = i,
                None => self.bad(key, "an integer", &v),
            }
        }
    }

    fn float(&mut self, key: &str, slot: &mut f64) {
        if let Some(v) = self.get(key).cloned() {
            match v.as_float().or_else(|| v.as_integer().map(|i| i as f64)) {
                Some(f) => *slot = f,
                None => self.bad(key, "a number", &v),
            }
        }
    }

    fn boolean(&mut self, key: &str, slot: &mut bool) {
        if let Some(v) = self.get(key).cloned() {
            match v.as_bool() {
                Some(b) => *slot = b,
                None => self.bad(key, "true or false", &v),
            }
        }
    }

    fn string(&mut self, key: &str) -> Option<String> {
        let v = self.get(key)?.clone();
        match v.as_str() {
            Some(s) => Some(s.to_string()),
            None => {
                self.bad(key, "a string", &v);
                None
            }
        }
    }

    fn parsed<T: std::str::FromStr<Err = Error>>(&mut self, key: &str, slot: &mut T) {
        if let Some(s) = self.string(key) {
            match s.parse() {
                Ok(t) => *slot = t,
                Err(e) => self.problems.push(format!("{key}: {e}")),
            }
        }
    }

    fn list<T>(&mut self, key: &str, slot: &mut Vec<T>, item: impl Fn(&Value) -> Option<T>, want: &str) {
        if let Some(v) = self.get(key).cloned() {
            match v.as_array().and_then(|a| a.iter().map(&item).collect::<Option<Vec<T>>>()) {
                Some(items) => *slot = items,
                None => self.bad(key, want, &v),
            }
        }
    }
}

fn as_usize(v: &Value) -> Option<usize> {
    v.as_integer().and_then(|i| usize::try_from(i).ok())
}

fn as_parsed<T: std::str::FromStr>(v: &Value) -> Option<T> {
    v.as_str()?.parse().ok()
}

impl RunConfig {
    /// Resolve `flat` over the defaults. Every problem is collected:
    /// unknown keys, type errors and invalid values.
    pub fn from_flat(flat: &Flat) -> Result<Self> {
        let mut c = RunConfig::default();
        let mut r = Reader {
            flat,
            problems: Vec::new(),
            used: Vec::new(),
        };

        // The family picks the default schedule, so it is read first.
        let mut family = c.model.family;
        r.parsed("model.family", &mut family);
        c.model = ModelSpec::new(family);

        // Absolute, so a written config reruns from any directory.
        let absolute = |p: String| std::path::absolute(&p).unwrap_or_else(|_| PathBuf::from(p));
        c.train_path = r.string("data.train").map(absolute);
        c.test_path = r.string("data.test").map(absolute);

        let m = &mut c.model;
        r.int("model.input_length", &mut m.input_length);
        r.int("model.latent_dim", &mut m.latent_dim);
        r.int("model.kernel", &mut m.kernel);
        r.int("model.stride", &mut m.stride);
        r.list("model.hidden", &mut m.hidden, as_usize, "an integer array");
        r.list("model.channels", &mut m.channels, as_usize, "an integer array");
        r.int("model.grid_order", &mut m.grid.order);
        r.int("model.grid_size", &mut m.grid.grid_size);
        r.float("model.grid_min", &mut m.grid.range_min);
        r.float("model.grid_max", &mut m.grid.range_max);
        r.float("model.dropout", &mut m.dropout);
        r.float("model.smoothness", &mut m.smoothness);
        r.boolean("model.batchnorm", &mut m.batchnorm);
        r.boolean("model.variational", &mut m.variational);
        for key in flat.keys().filter(|k| k.starts_with("model.override.")) {
            let rest = &key["model.override.".len()..];
            let Some((block, field)) = rest.rsplit_once('.') else {
                r.problems.push(format!("{key}: expected model.override.<block>.<field>"));
                continue;
            };
            let mut o = m.overrides.get(block).copied().unwrap_or_default();
            match field {
                "batchnorm" => {
                    let mut b = true;
                    r.boolean(key, &mut b);
                    o.batchnorm = Some(b);
                }
                "dropout" => {
                    let mut p = 0.0;
                    r.float(key, &mut p);
                    o.dropout = Some(p);
                }
                _ => continue,
            }
            m.overrides.insert(block.to_string(), o);
        }

        r.parsed("task.name", &mut c.task);
        let s = &mut c.settings;
        r.float("task.noise_sigma", &mut s.noise_sigma);
        r.float("task.mask_ratio", &mut s.mask_ratio);
        r.int("task.mask_block", &mut s.mask_block);
        r.float("task.beta", &mut s.beta);
        r.boolean("task.frozen_epsilon", &mut s.frozen_epsilon);
        r.int("task.generated_samples", &mut s.generated_samples);
        r.i64("task.normal_label", &mut s.normal_label);
        r.float("task.threshold_quantile", &mut s.threshold_quantile);
        r.int("task.eval_batch", &mut s.eval_batch);

        let t = &mut c.train;
        r.int("train.epochs", &mut t.epochs);
        r.int("train.batch_size", &mut t.batch_size);
        r.float("train.learning_rate", &mut t.learning_rate);
        r.u64("train.seed", &mut t.seed);
        r.parsed("train.optimizer", &mut t.optimizer);
        if let Some(p) = r.string("train.precision") {
            if p != "f64" {
                r.problems
                    .push(format!("train.precision: only \"f64\" is supported, got {p:?}"));
            }
        }
        r.list(
            "train.seeds",
            &mut c.seeds,
            |v| v.as_integer().and_then(|i| u64::try_from(i).ok()),
            "an array of nonnegative integers",
        );
        r.list("bench.families", &mut c.families, as_parsed, "an array of family names");
        r.list("bench.tasks", &mut c.tasks, as_parsed, "an array of task names");
        if let Some(d) = r.string("output.dir") {
            c.output_dir = PathBuf::from(d);
        }

        let mut problems = r.problems;
        for k in flat.keys() {
            if !r.used.contains(k) && !k.starts_with("model.override.") {
                problems.push(format!("{k}: unknown key"));
            }
        }
        problems.extend(c.model.problems().into_iter().map(|p| format!("model: {p}")));
        problems.extend(c.train.problems_for(&c.model).into_iter().map(|p| format!("train: {p}")));
        problems.extend(c.settings.problems(c.task).into_iter().map(|p| format!("task: {p}")));
        if c.seeds.is_empty() {
            problems.push("train.seeds: must not be empty".into());
        }
        if c.families.is_empty() {
            problems.push("bench.families: must not be empty".into());
        }
        if c.tasks.is_empty() {
            problems.push("bench.tasks: must not be empty".into());
        }
        if problems.is_empty() {
            Ok(c)
        } else {
            Err(Error::Config(problems.join("\n")))
        }
    }

    /// Check the dataset paths: both named and both present.
    pub fn data_problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        for (key, path) in [("data.train", &self.train_path), ("data.test", &self.test_path)] {
            match path {
                None => p.push(format!("{key}: missing dataset path")),
                Some(path) if !path.exists() => p.push(format!("{key}: {} does not exist", path.display())),
                Some(_) => {}
            }
        }
        p
    }

    /// The flat form of this configuration; [`RunConfig::from_flat`] maps it
    /// back to an equal value.
    pub fn to_flat(&self) -> Flat {
        let mut f = Flat::new();
        let s = |v: &str| Value::String(v.to_string());
        let i = |v: usize| Value::Integer(v as i64);
        let arr = |v: &[usize]| Value::Array(v.iter().map(|x| Value::Integer(*x as i64)).collect());
        if let Some(p) = &self.train_path {
            f.insert("data.train".into(), s(&p.to_string_lossy()));
        }
        if let Some(p) = &self.test_path {
            f.insert("data.test".into(), s(&p.to_string_lossy()));
        }
        let m = &self.model;
        f.insert("model.family".into(), s(m.family.tag()));
        f.insert("model.input_length".into(), i(m.input_length));
        f.insert("model.latent_dim".into(), i(m.latent_dim));
        f.insert("model.kernel".into(), i(m.kernel));
        f.insert("model.stride".into(), i(m.stride));
        f.insert("model.hidden".into(), arr(&m.hidden));
        f.insert("model.channels".into(), arr(&m.channels));
        f.insert("model.grid_order".into(), i(m.grid.order));
        f.insert("model.grid_size".into(), i(m.grid.grid_size));
        f.insert("model.grid_min".into(), Value::Float(m.grid.range_min));
        f.insert("model.grid_max".into(), Value::Float(m.grid.range_max));
        f.insert("model.dropout".into(), Value::Float(m.dropout));
        f.insert("model.smoothness".into(), Value::Float(m.smoothness));
        f.insert("model.batchnorm".into(), Value::Boolean(m.batchnorm));
        f.insert("model.variational".into(), Value::Boolean(m.variational));
        for (block, o) in &m.overrides {
            if let Some(b) = o.batchnorm {
                f.insert(format!("model.override.{block}.batchnorm"), Value::Boolean(b));
            }
            if let Some(p) = o.dropout {
                f.insert(format!("model.override.{block}.dropout"), Value::Float(p));
            }
        }
        let t = &self.settings;
        f.insert("task.name".into(), s(self.task.tag()));
        f.insert("task.noise_sigma".into(), Value::Float(t.noise_sigma));
        f.insert("task.mask_ratio".into(), Value::Float(t.mask_ratio));
        f.insert("task.mask_block".into(), i(t.mask_block));
        f.insert("task.beta".into(), Value::Float(t.beta));
        f.insert("task.frozen_epsilon".into(), Value::Boolean(t.frozen_epsilon));
        f.insert("task.generated_samples".into(), i(t.generated_samples));
        f.insert("task.normal_label".into(), Value::Integer(t.normal_label));
        f.insert("task.threshold_quantile".into(), Value::Float(t.threshold_quantile));
        f.insert("task.eval_batch".into(), i(t.eval_batch));
        let tr = &self.train;
        f.insert("train.epochs".into(), i(tr.epochs));
        f.insert("train.batch_size".into(), i(tr.batch_size));
        f.insert("train.learning_rate".into(), Value::Float(tr.learning_rate));
        f.insert("train.seed".into(), Value::Integer(tr.seed as i64));
        f.insert(
            "train.optimizer".into(),
            s(match tr.optimizer {
                OptimizerKind::Adam => "adam",
                OptimizerKind::Sgd => "sgd",
            }),
        );
        f.insert("train.precision".into(), s("f64"));
        f.insert(
            "train.seeds".into(),
            Value::Array(self.seeds.iter().map(|x| Value::Integer(*x as i64)).collect()),
        );
        f.insert(
            "bench.families".into(),
            Value::Array(self.families.iter().map(|x| s(x.tag())).collect()),
        );
        f.insert(
            "bench.tasks".into(),
            Value::Array(self.tasks.iter().map(|x| s(x.tag())).collect()),
        );
        f.insert("output.dir".into(), s(&self.output_dir.to_string_lossy()));
        f
    }

    /// One `key = value` line per entry, loadable as a config file. Dotted
    /// override block names are quoted.
    pub fn to_toml(&self) -> String {
        self.to_flat()
            .iter()
            .map(|(k, v)| {
                let key = match k.strip_prefix("model.override.").and_then(|r| r.rsplit_once('.')) {
                    Some((block, field)) => format!("model.override.{block:?}.{field}"),
                    None => k.clone(),
                };
                format!("{key} = {v}\n")
            })
            .collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let map: serde_json::Map<String, serde_json::Value> = self
            .to_flat()
            .into_iter()
            .map(|(k, v)| (k, serde_json::to_value(v).unwrap_or(serde_json::Value::Null)))
            .collect();
        serde_json::Value::Object(map)
    }
}

/// Resolve a configuration from an optional file, the environment and flags.
pub fn resolve(file: Option<&Path>, flags: &Flat) -> Result<RunConfig> {
    let mut flat = match file {
        Some(p) => parse_file(p)?,
        None => Flat::new(),
    };
    if let Ok(out) = std::env::var("KANAE_OUT") {
        if !out.is_empty() {
            flat.insert("output.dir".into(), Value::String(out));
        }
    }
    flat.extend(flags.iter().map(|(k, v)| (k.clone(), v.clone())));
    RunConfig::from_flat(&flat)
}

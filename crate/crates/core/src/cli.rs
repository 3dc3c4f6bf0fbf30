//! Command-line front end.
//!
//! Every tunable lives in a flat [`RunConfig`]. Values come from the
//! built-in defaults, then an optional `key=value` file (`--config`), then
//! `--set key=value` pairs and the dedicated flags. Unknown keys are
//! rejected. Exit codes: 0 success, 2 configuration error, 3 data error,
//! 4 numeric failure.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::complexity::{model_report, GraphStats};
use crate::error::{Error, Result};
use crate::events::{
    encode_nmnist_bin, extract_window, window_start, write_portable, EventStream, SynthConfig, WindowPolicy,
};
use crate::graph::{build_from_points, write_graph, AugmentConfig, GraphConfig};
use crate::model::{
    evaluate, load_dataset, load_sample_file, measure_stats, sample_rng, train, write_synthetic_dataset, LrSchedule,
    ModelSpec, Network, PipelineConfig, SampleData, TrainConfig,
};
use crate::nn::{read_checkpoint, write_checkpoint, PoolMode};
use crate::sampling::{nonuniform_sample, SamplingConfig};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } => EXIT_CONFIG,
        Error::Numeric(_) => EXIT_NUMERIC,
        _ => EXIT_DATA,
    }
}

/// All tunables of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub out: PathBuf,
    pub preset: String,
    /// 0 takes the class count from the dataset.
    pub classes: usize,
    pub k: usize,
    pub radius: f64,
    pub alpha: f64,
    pub beta: f64,
    pub dmax: usize,
    pub window_ms: f64,
    pub eval_offset_ms: f64,
    pub time_scale: f64,
    pub degree: usize,
    pub kernel_size: [usize; 2],
    pub self_loops: bool,
    /// Empty keeps the preset schedule.
    pub clusters: Vec<[usize; 2]>,
    pub residual_convs: usize,
    pub pool_mode: PoolMode,
    pub dropout: f64,
    pub epochs: usize,
    pub lr: f64,
    pub lr_milestones: Vec<usize>,
    pub lr_gamma: f64,
    pub batch: usize,
    pub seed: u64,
    pub workers: usize,
    pub deterministic: bool,
    pub augment: bool,
    pub augment_before_build: bool,
    pub aug_scale_min: f64,
    pub aug_flip_prob: f64,
    pub aug_rotation_deg: f64,
    pub test_fraction: f64,
    pub stats_samples: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            out: PathBuf::from("run"),
            preset: "rgcnn_small".into(),
            classes: 0,
            k: 8,
            radius: 3.0,
            alpha: 1.0,
            beta: 0.5e-5,
            dmax: 32,
            window_ms: 30.0,
            eval_offset_ms: 0.0,
            time_scale: 1.0,
            degree: 1,
            kernel_size: [5, 5],
            self_loops: false,
            clusters: Vec::new(),
            residual_convs: 1,
            pool_mode: PoolMode::Max,
            dropout: 0.5,
            epochs: 150,
            lr: 1e-3,
            lr_milestones: vec![60, 110],
            lr_gamma: 0.1,
            batch: 64,
            seed: 0,
            workers: 1,
            deterministic: false,
            augment: true,
            augment_before_build: false,
            aug_scale_min: 0.95,
            aug_flip_prob: 0.5,
            aug_rotation_deg: 10.0,
            test_fraction: 0.2,
            stats_samples: 100,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::config(key, format!("cannot parse {v:?}")))
}

fn parse_pair(key: &str, v: &str) -> Result<[usize; 2]> {
    match v.trim().split_once('x') {
        Some((a, b)) => Ok([parse(key, a)?, parse(key, b)?]),
        None => {
            let n = parse(key, v)?;
            Ok([n, n])
        }
    }
}

fn join<T: ToString>(items: impl IntoIterator<Item = T>) -> String {
    items.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let v = v.trim();
        match key {
            "dataset" => self.dataset = (!v.is_empty()).then(|| PathBuf::from(v)),
            "out" => self.out = PathBuf::from(v),
            "preset" => self.preset = v.to_string(),
            "classes" => self.classes = parse(key, v)?,
            "k" => self.k = parse(key, v)?,
            "radius" => self.radius = parse(key, v)?,
            "alpha" => self.alpha = parse(key, v)?,
            "beta" => self.beta = parse(key, v)?,
            "dmax" => self.dmax = parse(key, v)?,
            "window_ms" => self.window_ms = parse(key, v)?,
            "eval_offset_ms" => self.eval_offset_ms = parse(key, v)?,
            "time_scale" => self.time_scale = parse(key, v)?,
            "degree" => self.degree = parse(key, v)?,
            "kernel_size" => self.kernel_size = parse_pair(key, v)?,
            "self_loops" => self.self_loops = parse(key, v)?,
            "clusters" => {
                self.clusters = if v.is_empty() {
                    Vec::new()
                } else {
                    v.split(',').map(|c| parse_pair(key, c)).collect::<Result<_>>()?
                }
            }
            "residual_convs" => self.residual_convs = parse(key, v)?,
            "pool_mode" => {
                self.pool_mode = match v {
                    "max" => PoolMode::Max,
                    "avg" => PoolMode::Avg,
                    _ => return Err(Error::config(key, format!("expected max or avg, got {v:?}"))),
                }
            }
            "dropout" => self.dropout = parse(key, v)?,
            "epochs" => self.epochs = parse(key, v)?,
            "lr" => self.lr = parse(key, v)?,
            "lr_milestones" => {
                self.lr_milestones = if v.is_empty() {
                    Vec::new()
                } else {
                    v.split(',').map(|m| parse(key, m)).collect::<Result<_>>()?
                }
            }
            "lr_gamma" => self.lr_gamma = parse(key, v)?,
            "batch" => self.batch = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "workers" => self.workers = parse(key, v)?,
            "deterministic" => self.deterministic = parse(key, v)?,
            "augment" => self.augment = parse(key, v)?,
            "augment_stage" => {
                self.augment_before_build = match v {
                    "before_graph" => true,
                    "after_graph" => false,
                    _ => return Err(Error::config(key, format!("expected before_graph or after_graph, got {v:?}"))),
                }
            }
            "aug_scale_min" => self.aug_scale_min = parse(key, v)?,
            "aug_flip_prob" => self.aug_flip_prob = parse(key, v)?,
            "aug_rotation_deg" => self.aug_rotation_deg = parse(key, v)?,
            "test_fraction" => self.test_fraction = parse(key, v)?,
            "stats_samples" => self.stats_samples = parse(key, v)?,
            _ => return Err(Error::config(key, "unknown configuration key")),
        }
        Ok(())
    }

    /// Applies a `key=value` document (`#` starts a comment line).
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(line, "expected key=value"))?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    /// Every key with its text value, in key order.
    pub fn entries(&self) -> BTreeMap<&'static str, String> {
        let mode = match self.pool_mode {
            PoolMode::Max => "max",
            PoolMode::Avg => "avg",
        };
        let stage = if self.augment_before_build {
            "before_graph"
        } else {
            "after_graph"
        };
        BTreeMap::from([
            ("dataset", self.dataset.as_ref().map(|p| p.display().to_string()).unwrap_or_default()),
            ("out", self.out.display().to_string()),
            ("preset", self.preset.clone()),
            ("classes", self.classes.to_string()),
            ("k", self.k.to_string()),
            ("radius", self.radius.to_string()),
            ("alpha", self.alpha.to_string()),
            ("beta", self.beta.to_string()),
            ("dmax", self.dmax.to_string()),
            ("window_ms", self.window_ms.to_string()),
            ("eval_offset_ms", self.eval_offset_ms.to_string()),
            ("time_scale", self.time_scale.to_string()),
            ("degree", self.degree.to_string()),
            ("kernel_size", format!("{}x{}", self.kernel_size[0], self.kernel_size[1])),
            ("self_loops", self.self_loops.to_string()),
            ("clusters", join(self.clusters.iter().map(|c| format!("{}x{}", c[0], c[1])))),
            ("residual_convs", self.residual_convs.to_string()),
            ("pool_mode", mode.to_string()),
            ("dropout", self.dropout.to_string()),
            ("epochs", self.epochs.to_string()),
            ("lr", self.lr.to_string()),
            ("lr_milestones", join(&self.lr_milestones)),
            ("lr_gamma", self.lr_gamma.to_string()),
            ("batch", self.batch.to_string()),
            ("seed", self.seed.to_string()),
            ("workers", self.workers.to_string()),
            ("deterministic", self.deterministic.to_string()),
            ("augment", self.augment.to_string()),
            ("augment_stage", stage.to_string()),
            ("aug_scale_min", self.aug_scale_min.to_string()),
            ("aug_flip_prob", self.aug_flip_prob.to_string()),
            ("aug_rotation_deg", self.aug_rotation_deg.to_string()),
            ("test_fraction", self.test_fraction.to_string()),
            ("stats_samples", self.stats_samples.to_string()),
        ])
    }

    pub fn to_text(&self) -> String {
        self.entries().iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// SHA-256 of every setting except the output directory, as hex.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.entries() {
            if k != "out" {
                h.update(format!("{k}={v}\n").as_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn graph(&self) -> GraphConfig {
        GraphConfig {
            radius: self.radius,
            alpha: self.alpha,
            beta: self.beta,
            dmax: self.dmax,
        }
    }

    fn ms_to_us(key: &str, ms: f64) -> Result<u64> {
        if !(ms.is_finite() && ms >= 0.0) {
            return Err(Error::config(key, format!("{ms} ms is not a valid duration")));
        }
        Ok((ms * 1000.0).round() as u64)
    }

    pub fn pipeline(&self) -> Result<PipelineConfig> {
        let p = PipelineConfig {
            window_us: Self::ms_to_us("window_ms", self.window_ms)?,
            k: self.k,
            graph: self.graph(),
            time_scale: self.time_scale,
            augment: self.augment.then_some(AugmentConfig {
                scale_min: self.aug_scale_min,
                flip_prob: self.aug_flip_prob,
                max_rotation_deg: self.aug_rotation_deg,
            }),
            augment_before_build: self.augment_before_build,
            eval_window: WindowPolicy::Fixed(Self::ms_to_us("eval_offset_ms", self.eval_offset_ms)?),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        if self.batch == 0 {
            return Err(Error::config("batch", "must be at least 1"));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::config("lr", "must be a positive number"));
        }
        if !(self.lr_gamma.is_finite() && self.lr_gamma > 0.0) {
            return Err(Error::config("lr_gamma", "must be a positive number"));
        }
        if self.workers == 0 {
            return Err(Error::config("workers", "must be at least 1"));
        }
        Ok(TrainConfig {
            epochs: self.epochs,
            schedule: LrSchedule {
                base: self.lr,
                milestones: self.lr_milestones.clone(),
                gamma: self.lr_gamma,
            },
            batch: self.batch,
            seed: self.seed,
            workers: if self.deterministic { 1 } else { self.workers },
            pipeline: self.pipeline()?,
            adam: Default::default(),
            config_hash: self.hash(),
        })
    }

    /// Model for `classes` outputs on a `width x height` sensor with the
    /// configured preset and overrides.
    pub fn model_spec(&self, classes: usize, width: usize, height: usize) -> Result<ModelSpec> {
        let mut spec = ModelSpec::preset(&self.preset, classes, width, height)?;
        spec.degree = self.degree;
        spec.kernel_size = self.kernel_size;
        spec.self_loops = self.self_loops;
        if !self.clusters.is_empty() {
            spec.clusters = self.clusters.clone();
        }
        spec.residual_convs = self.residual_convs;
        spec.pool_mode = self.pool_mode;
        spec.dropout = self.dropout;
        spec.validate()?;
        Ok(spec)
    }

    /// Checks everything that does not need data.
    pub fn validate(&self) -> Result<()> {
        self.train_config()?;
        if !(0.0..1.0).contains(&self.test_fraction) {
            return Err(Error::config("test_fraction", "must lie in [0, 1)"));
        }
        self.model_spec(self.classes.max(2), 34, 34).map(|_| ())
    }

    fn dataset_dir(&self) -> Result<&Path> {
        let d = self
            .dataset
            .as_deref()
            .ok_or_else(|| Error::config("dataset", "no dataset directory given (use --dataset)"))?;
        if !d.is_dir() {
            return Err(Error::config("dataset", format!("{} is not a directory", d.display())));
        }
        Ok(d)
    }
}

#[derive(Debug, Parser)]
#[command(name = "nvsgraph", version, about = "Event-camera graph classification toolkit")]
pub struct Cli {
    #[command(flatten)]
    pub flags: ConfigFlags,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand; each mirrors a configuration key.
#[derive(Debug, Default, Args)]
pub struct ConfigFlags {
    /// Flat key=value configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Any configuration key, as key=value (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long, global = true)]
    pub dataset: Option<String>,
    #[arg(long, global = true)]
    pub out: Option<String>,
    #[arg(long, global = true)]
    pub classes: Option<String>,
    #[arg(long, global = true)]
    pub k: Option<String>,
    #[arg(long, global = true)]
    pub radius: Option<String>,
    #[arg(long, global = true)]
    pub alpha: Option<String>,
    #[arg(long, global = true)]
    pub beta: Option<String>,
    #[arg(long, global = true)]
    pub dmax: Option<String>,
    #[arg(long = "window-ms", global = true)]
    pub window_ms: Option<String>,
    #[arg(long, global = true)]
    pub preset: Option<String>,
    #[arg(long, global = true)]
    pub epochs: Option<String>,
    #[arg(long, global = true)]
    pub lr: Option<String>,
    #[arg(long, global = true)]
    pub batch: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<String>,
    #[arg(long, global = true)]
    pub workers: Option<String>,
    #[arg(long, global = true)]
    pub deterministic: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic moving-shape dataset (portable text, one directory per class).
    Synth {
        #[arg(long = "per-class", default_value_t = 200)]
        per_class: usize,
        #[arg(long = "duration-ms", default_value_t = 100)]
        duration_ms: u64,
        #[arg(long, default_value_t = 34)]
        width: u16,
        #[arg(long, default_value_t = 34)]
        height: u16,
        #[arg(long = "noise-hz", default_value_t = 500.0)]
        noise_hz: f64,
    },
    /// Convert between N-MNIST binary (.bin) and portable text.
    Convert {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Non-uniformly sample an event file (keys k, seed).
    Sample {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Build a radius graph container from an event file.
    BuildGraph {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Cut the evaluation window and sample before building.
        #[arg(long)]
        pipeline: bool,
    },
    /// Train a network; writes metrics.jsonl, model.ckpt and report.json under `out`.
    Train,
    /// Top-1 accuracy of a checkpoint on its dataset's test split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Analytic FLOPs and size of a preset.
    Flops {
        /// `measure` (needs --dataset) or a JSON file with one {n_node, n_edge} per convolution stage.
        #[arg(long, default_value = "measure")]
        stats: String,
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        height: Option<usize>,
    },
}

impl ConfigFlags {
    /// Defaults, then the config file, then `--set`, then dedicated flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::config("config", format!("{}: {e}", path.display())))?;
            cfg.apply_text(&text)?;
        }
        for pair in &self.set {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| Error::config(pair.as_str(), "expected key=value"))?;
            cfg.set(k.trim(), v)?;
        }
        let flags = [
            ("dataset", &self.dataset),
            ("out", &self.out),
            ("classes", &self.classes),
            ("k", &self.k),
            ("radius", &self.radius),
            ("alpha", &self.alpha),
            ("beta", &self.beta),
            ("dmax", &self.dmax),
            ("window_ms", &self.window_ms),
            ("preset", &self.preset),
            ("epochs", &self.epochs),
            ("lr", &self.lr),
            ("batch", &self.batch),
            ("seed", &self.seed),
            ("workers", &self.workers),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                cfg.set(k, v)?;
            }
        }
        if self.deterministic {
            cfg.deterministic = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn read_events(path: &Path) -> Result<EventStream> {
    match load_sample_file(path)? {
        SampleData::Events(s) => Ok(s),
        SampleData::Graph(_) => Err(Error::Malformed(format!("{} holds a graph, not events", path.display()))),
    }
}

fn write_events(stream: &EventStream, path: &Path) -> Result<()> {
    if path.extension().is_some_and(|e| e == "bin") {
        let raw = encode_nmnist_bin(stream.events())?;
        fs::write(path, raw).map_err(|e| Error::io(path, e))
    } else {
        write_portable(stream, path)
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn json_line(out: &mut impl Write, v: &serde_json::Value, path: &Path) -> Result<()> {
    writeln!(out, "{v}").map_err(|e| Error::io(path, e))
}

/// Metadata record opening every run log: everything needed to reproduce
/// the run, and nothing that varies between identical runs.
fn meta_record(command: &str, cfg: &RunConfig, extra: serde_json::Value) -> serde_json::Value {
    let mut config: BTreeMap<&str, String> = cfg.entries();
    config.remove("out");
    json!({
        "type": "meta",
        "tool": "nvsgraph",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        "config": config,
        "run": extra,
    })
}

fn run_synth(cfg: &RunConfig, per_class: usize, duration_ms: u64, width: u16, height: u16, noise_hz: f64) -> Result<()> {
    let classes = if cfg.classes == 0 { 3 } else { cfg.classes };
    let synth = SynthConfig {
        width,
        height,
        duration_us: duration_ms * 1000,
        noise_hz,
        ..SynthConfig::default()
    };
    write_synthetic_dataset(&cfg.out, classes, per_class, cfg.seed, &synth)?;
    println!(
        "{}",
        json!({"type": "synth", "out": cfg.out.display().to_string(), "classes": classes, "per_class": per_class, "seed": cfg.seed})
    );
    Ok(())
}

fn run_train(cfg: &RunConfig) -> Result<()> {
    let root = cfg.dataset_dir()?;
    let tc = cfg.train_config()?;
    let data = load_dataset(root, cfg.test_fraction, cfg.seed)?;
    let classes = if cfg.classes == 0 { data.classes.len() } else { cfg.classes };
    let spec = cfg.model_spec(classes, data.width, data.height)?;
    let mut net = Network::<f64>::new(&spec, cfg.seed)?;

    create_dir(&cfg.out)?;
    let log_path = cfg.out.join("metrics.jsonl");
    let mut log = File::create(&log_path).map_err(|e| Error::io(&log_path, e))?;
    let meta = meta_record(
        "train",
        cfg,
        json!({
            "model": spec.describe(),
            "trainable_params": net.num_trainable(),
            "classes": data.classes,
            "train_samples": data.train.len(),
            "test_samples": data.test.len(),
            "sensor": [data.width, data.height],
        }),
    );
    println!("{meta}");
    json_line(&mut log, &meta, &log_path)?;

    let result = train(&mut net, &data, &tc, |m| {
        let mut v = serde_json::to_value(m).expect("metrics serialize");
        v["type"] = json!("epoch");
        println!("{v}");
        json_line(&mut log, &v, &log_path)
    });
    let report = match result {
        Ok(r) => r,
        Err(e @ Error::Numeric(_)) => {
            let dump = cfg.out.join("nan_dump.json");
            let body = json!({"error": e.to_string(), "config": cfg.entries(), "model": spec.to_kv()});
            let _ = fs::write(&dump, format!("{body:#}\n"));
            eprintln!("diagnostics written to {}", dump.display());
            return Err(e);
        }
        Err(e) => return Err(e),
    };

    let ckpt = cfg.out.join("model.ckpt");
    // The output directory is left out so identical runs write identical files.
    let config: String = cfg.entries().iter().filter(|(k, _)| **k != "out").map(|(k, v)| format!("{k}={v}\n")).collect();
    let metadata = json!({"config": config, "model": spec.to_kv(), "classes": data.classes}).to_string();
    write_checkpoint(&net.store, &metadata, &ckpt)?;
    let done = json!({"type": "done", "final_test_acc": report.final_test_acc, "checkpoint": "model.ckpt"});
    println!("{done}");
    json_line(&mut log, &done, &log_path)?;
    let report_path = cfg.out.join("report.json");
    let text = serde_json::to_string_pretty(&report).expect("report serialize");
    fs::write(&report_path, text + "\n").map_err(|e| Error::io(&report_path, e))?;
    eprintln!("trained in {:.1} s", report.wall_clock_s);
    Ok(())
}

fn run_eval(flags: &ConfigFlags, checkpoint: &Path) -> Result<()> {
    if !checkpoint.is_file() {
        return Err(Error::config("checkpoint", format!("{} does not exist", checkpoint.display())));
    }
    let ck = read_checkpoint(checkpoint)?;
    let meta: serde_json::Value = serde_json::from_str(&ck.metadata)
        .map_err(|e| Error::Malformed(format!("checkpoint metadata: {e}")))?;
    let field = |k: &str| {
        meta[k]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| Error::Malformed(format!("checkpoint metadata lacks {k}")))
    };
    // The training configuration, with command-line overrides on top.
    let mut cfg = RunConfig::default();
    cfg.apply_text(&field("config")?)?;
    let overrides = flags.resolve()?;
    let defaults = RunConfig::default().entries();
    for (k, v) in overrides.entries() {
        if defaults.get(k) != Some(&v) {
            cfg.set(k, &v)?;
        }
    }
    let spec = ModelSpec::from_kv(&field("model")?)?;
    let mut net = Network::<f64>::new(&spec, 0)?;
    ck.load_into(&mut net.store)?;
    let data = load_dataset(cfg.dataset_dir()?, cfg.test_fraction, cfg.seed)?;
    let tc = cfg.train_config()?;
    let acc = evaluate(&net, &data.test, &tc.pipeline, cfg.seed, cfg.batch, tc.workers)?;
    let meta = meta_record("eval", &cfg, json!({"checkpoint": checkpoint.display().to_string()}));
    eprintln!("{meta}");
    println!("{}", json!({"type": "eval", "accuracy": acc, "samples": data.test.len()}));
    Ok(())
}

fn run_flops(cfg: &RunConfig, stats: &str, width: Option<usize>, height: Option<usize>) -> Result<()> {
    let large = cfg.preset.ends_with("_large");
    let (dw, dh) = if large { (240, 180) } else { (34, 34) };
    let classes = if cfg.classes == 0 {
        if large { 101 } else { 10 }
    } else {
        cfg.classes
    };
    let (per_stage, w, h) = if stats == "measure" {
        let data = load_dataset(cfg.dataset_dir()?, cfg.test_fraction, cfg.seed)?;
        let (w, h) = (width.unwrap_or(data.width), height.unwrap_or(data.height));
        let spec = cfg.model_spec(classes, w, h)?;
        let pool: Vec<_> = data.train.iter().chain(&data.test).cloned().collect();
        (measure_stats(&spec, &pool, &cfg.pipeline()?, cfg.seed, cfg.stats_samples)?, w, h)
    } else {
        let path = Path::new(stats);
        let text = fs::read_to_string(path).map_err(|e| Error::config("stats", format!("{stats}: {e}")))?;
        let s: Vec<GraphStats> = serde_json::from_str(&text)
            .map_err(|e| Error::config("stats", format!("expected a JSON array of {{n_node, n_edge}}: {e}")))?;
        (s, width.unwrap_or(dw), height.unwrap_or(dh))
    };
    let spec = cfg.model_spec(classes, w, h)?;
    let report = model_report(&spec, &per_stage)?;
    let mut v = serde_json::to_value(&report).expect("report serialize");
    v["stats"] = serde_json::to_value(&per_stage).expect("stats serialize");
    println!("{v:#}");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let cfg = cli.flags.resolve()?;
    match cli.command {
        Command::Synth {
            per_class,
            duration_ms,
            width,
            height,
            noise_hz,
        } => run_synth(&cfg, per_class, duration_ms, width, height, noise_hz),
        Command::Convert { input, output } => write_events(&read_events(&input)?, &output),
        Command::Sample { input, output } => {
            let s = read_events(&input)?;
            let sampled = nonuniform_sample(&s, &SamplingConfig::new(cfg.k, cfg.seed)?);
            println!("{}", json!({"type": "sample", "input_events": s.len(), "output_events": sampled.len()}));
            write_events(&sampled, &output)
        }
        Command::BuildGraph {
            input,
            output,
            pipeline,
        } => {
            let mut s = read_events(&input)?;
            if pipeline {
                let p = cfg.pipeline()?;
                let mut rng = sample_rng(cfg.seed, 0, u64::MAX);
                let start = window_start(&s, p.window_us, p.eval_window, &mut rng);
                s = extract_window(&s, start, p.window_us)?;
                s = nonuniform_sample(&s, &SamplingConfig::new(cfg.k, cfg.seed)?);
            }
            let pos = s
                .events()
                .iter()
                .map(|e| [f64::from(e.x), f64::from(e.y), e.t as f64 * cfg.time_scale])
                .collect();
            let feats = s.events().iter().map(|e| f64::from(e.p.sign())).collect();
            let g = build_from_points(s.width(), s.height(), pos, feats, &cfg.graph())?;
            println!("{}", json!({"type": "graph", "nodes": g.num_nodes(), "edges": g.num_edges()}));
            write_graph(&g, &output)
        }
        Command::Train => run_train(&cfg),
        Command::Eval { checkpoint } => run_eval(&cli.flags, &checkpoint),
        Command::Flops { stats, width, height } => run_flops(&cfg, &stats, width, height),
    }
}

/// Parses the process arguments, runs the command and returns the exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

//! Datasets on disk and the per-sample preprocessing chain.
//!
//! A dataset root holds one directory per class, optionally nested under
//! `Train/` and `Test/` for a predefined split. Files are read by
//! extension: `.bin` (N-MNIST records), `.graph` (graph container) and
//! anything else as portable text events.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::events::{
    extract_window, parse_nmnist_bin, read_portable, synth_moving_shape, window_start, write_portable, EventStream,
    SynthConfig, WindowPolicy, SHAPE_NAMES,
};
use crate::graph::{build_from_points, random_augment, read_graph, AugmentConfig, EventGraph, GraphConfig};
use crate::sampling::{nonuniform_sample, SamplingConfig};

#[derive(Debug, Clone, PartialEq)]
pub enum SampleData {
    Events(EventStream),
    Graph(EventGraph),
}

#[derive(Debug, Clone)]
pub struct Sample {
    /// Stable identifier; per-sample random streams derive from it.
    pub id: u64,
    pub label: usize,
    pub path: PathBuf,
    pub data: Arc<SampleData>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub classes: Vec<String>,
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
    pub width: usize,
    pub height: usize,
}

pub fn load_sample_file(path: &Path) -> Result<SampleData> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("bin") => {
            let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
            Ok(SampleData::Events(parse_nmnist_bin(&raw)?))
        }
        Some("graph") => Ok(SampleData::Graph(read_graph(path)?)),
        _ => Ok(SampleData::Events(read_portable(path)?)),
    }
}

fn sorted_entries(dir: &Path, want_dirs: bool) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let hidden = path
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.starts_with('.'));
        if !hidden && path.is_dir() == want_dirs {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn dir_name(p: &Path) -> String {
    p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Samples of every class directory under `dir`, labelled by the position
/// of the directory name in `classes`.
fn load_split(dir: &Path, classes: &[String], next_id: &mut u64) -> Result<Vec<Sample>> {
    let mut samples = Vec::new();
    for (label, class) in classes.iter().enumerate() {
        let class_dir = dir.join(class);
        if !class_dir.is_dir() {
            continue;
        }
        for path in sorted_entries(&class_dir, false)? {
            let data = load_sample_file(&path)?;
            samples.push(Sample {
                id: *next_id,
                label,
                path,
                data: Arc::new(data),
            });
            *next_id += 1;
        }
    }
    Ok(samples)
}

/// Reads a dataset root. Without `Train/` and `Test/` the samples are split
/// per class with a `test_fraction` share drawn by `split_seed`.
pub fn load_dataset(root: &Path, test_fraction: f64, split_seed: u64) -> Result<Dataset> {
    if !root.is_dir() {
        return Err(Error::config("dataset", format!("{} is not a directory", root.display())));
    }
    let (train_dir, test_dir) = (root.join("Train"), root.join("Test"));
    let mut next_id = 0;
    let (classes, train, test) = if train_dir.is_dir() && test_dir.is_dir() {
        let mut classes: Vec<String> = sorted_entries(&train_dir, true)?.iter().map(|p| dir_name(p)).collect();
        for c in sorted_entries(&test_dir, true)?.iter().map(|p| dir_name(p)) {
            if !classes.contains(&c) {
                classes.push(c);
            }
        }
        classes.sort();
        let train = load_split(&train_dir, &classes, &mut next_id)?;
        let test = load_split(&test_dir, &classes, &mut next_id)?;
        (classes, train, test)
    } else {
        let classes: Vec<String> = sorted_entries(root, true)?.iter().map(|p| dir_name(p)).collect();
        let all = load_split(root, &classes, &mut next_id)?;
        let (train, test) = split_train_test(all, classes.len(), test_fraction, split_seed);
        (classes, train, test)
    };
    if train.is_empty() {
        return Err(Error::Empty(format!("no training samples under {}", root.display())));
    }
    let (mut width, mut height) = (0usize, 0usize);
    for s in train.iter().chain(&test) {
        let (w, h) = match &*s.data {
            SampleData::Events(e) => (e.width(), e.height()),
            SampleData::Graph(g) => (g.width(), g.height()),
        };
        width = width.max(usize::from(w));
        height = height.max(usize::from(h));
    }
    Ok(Dataset {
        classes,
        train,
        test,
        width,
        height,
    })
}

/// Stratified random split: `round(n_c * test_fraction)` samples of each
/// class go to the test side. Both sides keep id order.
pub fn split_train_test(
    samples: Vec<Sample>,
    classes: usize,
    test_fraction: f64,
    seed: u64,
) -> (Vec<Sample>, Vec<Sample>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut is_test = vec![false; samples.len()];
    for c in 0..classes {
        let mut idx: Vec<usize> = (0..samples.len()).filter(|&i| samples[i].label == c).collect();
        idx.shuffle(&mut rng);
        let n_test = (idx.len() as f64 * test_fraction).round() as usize;
        for &i in &idx[..n_test.min(idx.len())] {
            is_test[i] = true;
        }
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (s, t) in samples.into_iter().zip(is_test) {
        if t {
            test.push(s);
        } else {
            train.push(s);
        }
    }
    (train, test)
}

/// Settings of the window -> sample -> graph -> augment chain.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub window_us: u64,
    pub k: usize,
    pub graph: GraphConfig,
    /// Multiplies timestamps (microseconds) before graph construction.
    pub time_scale: f64,
    /// `None` disables augmentation.
    pub augment: Option<AugmentConfig>,
    /// Augment event positions before building the graph instead of after.
    pub augment_before_build: bool,
    pub eval_window: WindowPolicy,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            window_us: 30_000,
            k: 8,
            graph: GraphConfig::default(),
            time_scale: 1.0,
            augment: Some(AugmentConfig::default()),
            augment_before_build: false,
            eval_window: WindowPolicy::Fixed(0),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_us == 0 {
            return Err(Error::config("window_ms", "window length must be positive"));
        }
        if self.k == 0 {
            return Err(Error::config("k", "must be at least 1"));
        }
        if !(self.time_scale.is_finite() && self.time_scale > 0.0) {
            return Err(Error::config("time_scale", "must be a positive number"));
        }
        if let Some(a) = &self.augment {
            if !(a.scale_min > 0.0 && a.scale_min <= 1.0) {
                return Err(Error::config("aug_scale_min", "must lie in (0, 1]"));
            }
            if !(0.0..=1.0).contains(&a.flip_prob) {
                return Err(Error::config("aug_flip_prob", "must lie in [0, 1]"));
            }
            if !(a.max_rotation_deg >= 0.0) {
                return Err(Error::config("aug_rotation_deg", "must be non-negative"));
            }
        }
        self.graph.validate()
    }
}

/// Random stream for one sample in one pass: `stream` selects the pass
/// (training epoch, or `u64::MAX` for evaluation).
pub fn sample_rng(seed: u64, sample_id: u64, stream: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&sample_id.to_le_bytes());
    key[16..24].copy_from_slice(&stream.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Graph of one sample. Training draws a random window and applies
/// augmentation; evaluation uses the configured fixed window and none.
pub fn prepare_sample<R: Rng + ?Sized>(
    data: &SampleData,
    cfg: &PipelineConfig,
    train: bool,
    rng: &mut R,
) -> Result<EventGraph> {
    let augment = cfg.augment.as_ref().filter(|_| train);
    let stream = match data {
        SampleData::Graph(g) => {
            return Ok(match augment {
                Some(a) => random_augment(g, a, rng),
                None => g.clone(),
            })
        }
        SampleData::Events(s) => s,
    };
    if stream.is_empty() {
        return Err(Error::Empty("sample has no events".into()));
    }
    let policy = if train { WindowPolicy::Random } else { cfg.eval_window };
    let start = window_start(stream, cfg.window_us, policy, rng);
    let mut window = extract_window(stream, start, cfg.window_us)?;
    if window.is_empty() {
        // Gap in the recording (or a fixed offset past its end): slide to
        // the next event, or back to the last one.
        let ev = stream.events();
        let next = ev.iter().find(|e| e.t >= start).unwrap_or(&ev[ev.len() - 1]).t;
        window = extract_window(stream, next, cfg.window_us)?;
    }
    let sampled = nonuniform_sample(&window, &SamplingConfig::new(cfg.k, rng.gen())?);
    let pos: Vec<[f64; 3]> = sampled
        .events()
        .iter()
        .map(|e| [f64::from(e.x), f64::from(e.y), e.t as f64 * cfg.time_scale])
        .collect();
    let feats: Vec<f64> = sampled.events().iter().map(|e| f64::from(e.p.sign())).collect();
    let (w, h) = (sampled.width(), sampled.height());
    match augment {
        Some(a) if cfg.augment_before_build => {
            let bare = EventGraph::from_parts(w, h, pos, feats.clone(), 1, Vec::new())?;
            let moved = random_augment(&bare, a, rng);
            let mut pos = moved.nodes().to_vec();
            // Keep time order for the graph builder; features follow.
            let mut order: Vec<usize> = (0..pos.len()).collect();
            order.sort_by(|&i, &j| pos[i][2].total_cmp(&pos[j][2]).then(i.cmp(&j)));
            let feats = order.iter().map(|&i| feats[i]).collect();
            pos = order.iter().map(|&i| pos[i]).collect();
            build_from_points(w, h, pos, feats, &cfg.graph)
        }
        Some(a) => {
            let g = build_from_points(w, h, pos, feats, &cfg.graph)?;
            Ok(random_augment(&g, a, rng))
        }
        None => build_from_points(w, h, pos, feats, &cfg.graph),
    }
}

/// Writes `per_class` synthetic recordings of each of the first `classes`
/// shapes as portable text under `dir/<id>_<name>/<index>.txt`.
pub fn write_synthetic_dataset(
    dir: &Path,
    classes: usize,
    per_class: usize,
    seed: u64,
    cfg: &SynthConfig,
) -> Result<()> {
    if classes == 0 || classes > SHAPE_NAMES.len() {
        return Err(Error::config(
            "classes",
            format!("the generator has 1 to {} classes, got {classes}", SHAPE_NAMES.len()),
        ));
    }
    for (c, name) in SHAPE_NAMES.iter().enumerate().take(classes) {
        let class_dir = dir.join(format!("{c}_{name}"));
        fs::create_dir_all(&class_dir).map_err(|e| Error::io(&class_dir, e))?;
        for i in 0..per_class {
            let sample_seed = sample_rng(seed, c as u64, i as u64).gen();
            let stream = synth_moving_shape(c, sample_seed, cfg);
            write_portable(&stream, class_dir.join(format!("{i:05}.txt")))?;
        }
    }
    Ok(())
}

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::nn::{PoolMode, PoolSpec, SplineKernelSpec};

pub const PRESETS: [&str; 4] = ["gcnn_small", "rgcnn_small", "gcnn_large", "rgcnn_large"];

/// Layer stack of a plain or residual graph network.
///
/// Stage `s` is a convolution (stage 0, and every stage of a plain network)
/// or a residual block mapping `channels[s-1] -> channels[s]`, followed by
/// max pooling with `clusters[s]`. Cluster sizes are measured on the grid
/// left by the previous pooling, so stage `s` bins sensor pixels in cells of
/// the running product of sizes. The final grid is flattened into
/// `FC(hidden) -> FC(classes)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub preset: String,
    pub classes: usize,
    pub in_channels: usize,
    pub width: usize,
    pub height: usize,
    pub degree: usize,
    pub kernel_size: [usize; 2],
    pub self_loops: bool,
    pub channels: Vec<usize>,
    /// `[along x, along y]` per stage.
    pub clusters: Vec<[usize; 2]>,
    pub fc_hidden: usize,
    pub residual: bool,
    /// Convolutions on the main path of each residual block.
    pub residual_convs: usize,
    pub dropout: f64,
    pub pool_mode: PoolMode,
}

impl ModelSpec {
    /// One of [`PRESETS`] for `classes` outputs on a `width x height` sensor.
    pub fn preset(name: &str, classes: usize, width: usize, height: usize) -> Result<Self> {
        let (residual, large) = match name {
            "gcnn_small" => (false, false),
            "rgcnn_small" => (true, false),
            "gcnn_large" => (false, true),
            "rgcnn_large" => (true, true),
            _ => {
                return Err(Error::config(
                    "preset",
                    format!("unknown preset {name:?}; expected one of {}", PRESETS.join(", ")),
                ))
            }
        };
        let (channels, clusters, fc_hidden) = if large {
            (vec![64, 128, 256, 512], vec![[4, 3], [16, 12], [30, 23], [60, 45]], 1024)
        } else {
            (vec![32, 64, 128], vec![[2, 2], [4, 4], [7, 7]], 128)
        };
        let spec = Self {
            preset: name.to_string(),
            classes,
            in_channels: 1,
            width,
            height,
            degree: 1,
            kernel_size: [5, 5],
            self_loops: false,
            channels,
            clusters,
            fc_hidden,
            residual,
            residual_convs: 1,
            dropout: 0.5,
            pool_mode: PoolMode::Max,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn kernel(&self) -> SplineKernelSpec {
        SplineKernelSpec {
            degree: self.degree,
            kernel_size: self.kernel_size,
            self_loops: self.self_loops,
        }
    }

    /// Pooling of every stage in sensor coordinates.
    pub fn pool_specs(&self) -> Vec<PoolSpec> {
        let (mut cw, mut ch) = (1usize, 1usize);
        self.clusters
            .iter()
            .map(|c| {
                cw = cw.saturating_mul(c[0]);
                ch = ch.saturating_mul(c[1]);
                PoolSpec {
                    cluster_w: cw,
                    cluster_h: ch,
                    extent_w: self.width,
                    extent_h: self.height,
                    mode: self.pool_mode,
                }
            })
            .collect()
    }

    /// Grid cells after the last pooling, the `P` of the first FC layer.
    pub fn final_cells(&self) -> usize {
        self.pool_specs().last().map_or(1, PoolSpec::cells)
    }

    pub fn flat_dim(&self) -> usize {
        self.final_cells() * self.channels.last().copied().unwrap_or(self.in_channels)
    }

    /// Human-readable layer list, e.g. `Conv(1,32) MaxP(2x2) Res(32,64) ...`.
    pub fn describe(&self) -> String {
        let mut out = String::new();
        let mut c_in = self.in_channels;
        for (s, (&c, cl)) in self.channels.iter().zip(&self.clusters).enumerate() {
            let kind = if self.residual && s > 0 { "Res" } else { "Conv" };
            let _ = write!(out, "{kind}({c_in},{c}) MaxP({}x{}) ", cl[0], cl[1]);
            c_in = c;
        }
        let _ = write!(out, "FC({}) FC({})", self.fc_hidden, self.classes);
        out
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: String| Err(Error::config(key, msg));
        if self.classes < 2 {
            return bad("classes", format!("need at least 2 classes, got {}", self.classes));
        }
        if self.in_channels == 0 {
            return bad("in_channels", "must be positive".into());
        }
        if self.width == 0 || self.height == 0 {
            return bad("width", format!("sensor extent {}x{} is empty", self.width, self.height));
        }
        self.kernel().validate()?;
        if self.channels.is_empty() {
            return bad("channels", "at least one convolution stage is required".into());
        }
        if let Some(s) = self.channels.iter().position(|&c| c == 0) {
            return bad("channels", format!("layer {s} has zero output channels"));
        }
        if self.clusters.len() != self.channels.len() {
            return bad(
                "clusters",
                format!("{} pooling stages for {} convolution stages", self.clusters.len(), self.channels.len()),
            );
        }
        if let Some(s) = self.clusters.iter().position(|c| c[0] == 0 || c[1] == 0) {
            return bad("clusters", format!("pooling stage {s} has a zero cluster size"));
        }
        if self.fc_hidden == 0 {
            return bad("fc_hidden", "must be positive".into());
        }
        if self.residual && !(1..=2).contains(&self.residual_convs) {
            return bad("residual_convs", format!("must be 1 or 2, got {}", self.residual_convs));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout", format!("probability {} outside [0, 1)", self.dropout));
        }
        Ok(())
    }

    /// `key=value` lines, readable by [`ModelSpec::from_kv`].
    pub fn to_kv(&self) -> String {
        let list = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        let clusters = self
            .clusters
            .iter()
            .map(|c| format!("{}x{}", c[0], c[1]))
            .collect::<Vec<_>>()
            .join(",");
        let mode = match self.pool_mode {
            PoolMode::Max => "max",
            PoolMode::Avg => "avg",
        };
        format!(
            "preset={}\nclasses={}\nin_channels={}\nwidth={}\nheight={}\ndegree={}\nkernel_size={}x{}\n\
             self_loops={}\nchannels={}\nclusters={}\nfc_hidden={}\nresidual={}\nresidual_convs={}\n\
             dropout={}\npool_mode={}\n",
            self.preset,
            self.classes,
            self.in_channels,
            self.width,
            self.height,
            self.degree,
            self.kernel_size[0],
            self.kernel_size[1],
            self.self_loops,
            list(&self.channels),
            clusters,
            self.fc_hidden,
            self.residual,
            self.residual_convs,
            self.dropout,
            mode
        )
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let mut kv = BTreeMap::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(line, "expected key=value"))?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| kv.get(k).ok_or_else(|| Error::config(k, "missing"));
        let spec = Self {
            preset: get("preset")?.clone(),
            classes: parse_num(get("classes")?, "classes")?,
            in_channels: parse_num(get("in_channels")?, "in_channels")?,
            width: parse_num(get("width")?, "width")?,
            height: parse_num(get("height")?, "height")?,
            degree: parse_num(get("degree")?, "degree")?,
            kernel_size: parse_pair(get("kernel_size")?, "kernel_size")?,
            self_loops: parse_bool(get("self_loops")?, "self_loops")?,
            channels: get("channels")?
                .split(',')
                .map(|c| parse_num(c, "channels"))
                .collect::<Result<_>>()?,
            clusters: get("clusters")?
                .split(',')
                .map(|c| parse_pair(c, "clusters"))
                .collect::<Result<_>>()?,
            fc_hidden: parse_num(get("fc_hidden")?, "fc_hidden")?,
            residual: parse_bool(get("residual")?, "residual")?,
            residual_convs: parse_num(get("residual_convs")?, "residual_convs")?,
            dropout: get("dropout")?
                .parse()
                .map_err(|_| Error::config("dropout", "not a number"))?,
            pool_mode: match get("pool_mode")?.as_str() {
                "max" => PoolMode::Max,
                "avg" => PoolMode::Avg,
                other => return Err(Error::config("pool_mode", format!("expected max or avg, got {other:?}"))),
            },
        };
        if let Some(k) = kv.keys().find(|k| !SPEC_KEYS.contains(&k.as_str())) {
            return Err(Error::config(k.clone(), "unknown model key"));
        }
        spec.validate()?;
        Ok(spec)
    }
}

const SPEC_KEYS: [&str; 15] = [
    "preset",
    "classes",
    "in_channels",
    "width",
    "height",
    "degree",
    "kernel_size",
    "self_loops",
    "channels",
    "clusters",
    "fc_hidden",
    "residual",
    "residual_convs",
    "dropout",
    "pool_mode",
];

fn parse_num(s: &str, key: &str) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| Error::config(key, format!("{s:?} is not a non-negative integer")))
}

fn parse_bool(s: &str, key: &str) -> Result<bool> {
    s.trim()
        .parse()
        .map_err(|_| Error::config(key, format!("{s:?} is not true or false")))
}

/// `"4x3"` or a single `"5"` meaning `5x5`.
pub(crate) fn parse_pair(s: &str, key: &str) -> Result<[usize; 2]> {
    match s.split_once('x') {
        Some((a, b)) => Ok([parse_num(a, key)?, parse_num(b, key)?]),
        None => {
            let v = parse_num(s, key)?;
            Ok([v, v])
        }
    }
}

//! Non-uniform space-time grid sampling.
//!
//! The `(x, y, t)` bounding box of a stream is bisected into octants until a
//! cell holds at most `k` events or cannot be split further (1 px x 1 px x
//! 1 us). Each non-empty leaf contributes one uniformly chosen event.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::events::EventStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplingConfig {
    /// Maximum events per leaf.
    pub k: usize,
    pub seed: u64,
}

impl SamplingConfig {
    pub fn new(k: usize, seed: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::config("k", "must be at least 1"));
        }
        Ok(Self { k, seed })
    }
}

/// Inclusive integer range along one axis.
#[derive(Debug, Clone, Copy)]
struct Span {
    lo: u64,
    hi: u64,
}

impl Span {
    fn splittable(self) -> bool {
        self.hi > self.lo
    }

    fn mid(self) -> u64 {
        self.lo + (self.hi - self.lo) / 2
    }

    /// Halves: `[lo, mid]` and `[mid + 1, hi]`; an event on `mid` goes low.
    fn half(self, upper: bool) -> Span {
        if !self.splittable() {
            self
        } else if upper {
            Span {
                lo: self.mid() + 1,
                hi: self.hi,
            }
        } else {
            Span {
                lo: self.lo,
                hi: self.mid(),
            }
        }
    }

    fn is_upper(self, v: u64) -> bool {
        self.splittable() && v > self.mid()
    }
}

pub fn nonuniform_sample(stream: &EventStream, cfg: &SamplingConfig) -> EventStream {
    let ev = stream.events();
    if ev.is_empty() {
        return stream.clone();
    }
    let bound = |f: &dyn Fn(usize) -> u64| {
        let (lo, hi) = (0..ev.len())
            .map(f)
            .fold((u64::MAX, 0), |(lo, hi), v| (lo.min(v), hi.max(v)));
        Span { lo, hi }
    };
    let cell = [
        bound(&|i| u64::from(ev[i].x)),
        bound(&|i| u64::from(ev[i].y)),
        bound(&|i| ev[i].t),
    ];
    let coord = |i: usize| [u64::from(ev[i].x), u64::from(ev[i].y), ev[i].t];

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut picked = Vec::new();
    let mut indices: Vec<usize> = (0..ev.len()).collect();
    // Explicit stack of (index range, cell); children pushed in reverse so
    // octants are visited in ascending order.
    let mut stack = vec![(0usize, indices.len(), cell)];
    let mut buckets: [Vec<usize>; 8] = Default::default();
    while let Some((start, end, cell)) = stack.pop() {
        let members = &mut indices[start..end];
        let leaf = members.len() <= cfg.k || cell.iter().all(|s| !s.splittable());
        if leaf {
            let choice = if members.len() == 1 {
                0
            } else {
                rng.gen_range(0..members.len())
            };
            picked.push(members[choice]);
            continue;
        }
        for b in buckets.iter_mut() {
            b.clear();
        }
        for &i in members.iter() {
            let c = coord(i);
            let oct = (0..3).fold(0, |acc, d| acc | (usize::from(cell[d].is_upper(c[d])) << d));
            buckets[oct].push(i);
        }
        let mut children = Vec::with_capacity(8);
        let mut off = start;
        for (oct, b) in buckets.iter().enumerate() {
            if b.is_empty() {
                continue;
            }
            indices[off..off + b.len()].copy_from_slice(b);
            let child = [0, 1, 2].map(|d| cell[d].half(oct >> d & 1 == 1));
            children.push((off, off + b.len(), child));
            off += b.len();
        }
        stack.extend(children.into_iter().rev());
    }
    picked.sort_unstable();
    stream.select(&picked)
}

//! Deterministic moving-shape recordings used as a stand-in dataset.
//!
//! Each class is a bright outline shape on a dark background. The shape
//! centre travels on a circle of radius `3 s` pixels (one revolution per
//! 20 ms), where `s = min(W, H) / 34`. The seed picks the start phase,
//! direction of travel and a centre offset of up to `2 s` pixels. At every
//! simulation step a pixel that becomes covered fires ON and a pixel that
//! is uncovered fires OFF, each with probability 0.9 and a timestamp
//! jittered inside the step. Uniform background noise is added on top.
//!
//! | id | name     | outline                                   |
//! |----|----------|-------------------------------------------|
//! | 0  | bar      | horizontal bar, 14 s long, 3 s thick      |
//! | 1  | circle   | ring of radius 7 s, 2 s wide              |
//! | 2  | cross    | horizontal and vertical bars              |
//! | 3  | square   | square outline, side 14 s                 |
//! | 4  | diamond  | rotated square outline                    |
//! | 5  | diagonal | bar along the main diagonal               |

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Event, EventStream, Polarity};

pub const SHAPE_NAMES: [&str; 6] = ["bar", "circle", "cross", "square", "diamond", "diagonal"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub width: u16,
    pub height: u16,
    pub duration_us: u64,
    /// Simulation steps per second.
    pub rate_hz: f64,
    /// Background noise events per second over the whole sensor.
    pub noise_hz: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            width: 34,
            height: 34,
            duration_us: 100_000,
            rate_hz: 1000.0,
            noise_hz: 500.0,
        }
    }
}

const EMIT_PROB: f64 = 0.9;
const PERIOD_US: f64 = 20_000.0;

fn covered(class_id: usize, dx: f64, dy: f64, s: f64) -> bool {
    let bar = |a: f64, b: f64| a.abs() <= 7.0 * s && b.abs() <= 1.5 * s;
    match class_id % SHAPE_NAMES.len() {
        0 => bar(dx, dy),
        1 => ((dx * dx + dy * dy).sqrt() - 7.0 * s).abs() <= 1.0 * s,
        2 => bar(dx, dy) || bar(dy, dx),
        3 => {
            let m = dx.abs().max(dy.abs());
            (5.5 * s..=7.0 * s).contains(&m)
        }
        4 => (dx.abs() + dy.abs() - 7.0 * s).abs() <= 1.0 * s,
        _ => {
            let along = (dx + dy) / std::f64::consts::SQRT_2;
            let across = (dx - dy) / std::f64::consts::SQRT_2;
            along.abs() <= 7.0 * s && across.abs() <= 1.2 * s
        }
    }
}

/// Renders class `class_id` (modulo the shape count) for `cfg.duration_us`.
///
/// Identical `(class_id, seed, cfg)` always yields the identical stream.
pub fn synth_moving_shape(class_id: usize, seed: u64, cfg: &SynthConfig) -> EventStream {
    let (w, h) = (cfg.width, cfg.height);
    if cfg.duration_us == 0 || cfg.rate_hz <= 0.0 || w == 0 || h == 0 {
        return EventStream::empty(w, h);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((class_id as u64) << 48) ^ 0x5eed_cafe);
    let s = f64::from(w.min(h)) / 34.0;
    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
    let dir = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let off_x = rng.gen_range(-2.0..=2.0) * s;
    let off_y = rng.gen_range(-2.0..=2.0) * s;
    let (cx0, cy0) = (f64::from(w) / 2.0 + off_x, f64::from(h) / 2.0 + off_y);

    let dt = 1e6 / cfg.rate_hz;
    let steps = (cfg.duration_us as f64 / dt).floor() as u64;
    let npix = usize::from(w) * usize::from(h);
    let render = |t: f64| -> Vec<bool> {
        let ang = phase + dir * std::f64::consts::TAU * t / PERIOD_US;
        let (cx, cy) = (cx0 + 3.0 * s * ang.cos(), cy0 + 3.0 * s * ang.sin());
        let mut occ = vec![false; npix];
        for y in 0..h {
            for x in 0..w {
                let (dx, dy) = (f64::from(x) + 0.5 - cx, f64::from(y) + 0.5 - cy);
                occ[usize::from(y) * usize::from(w) + usize::from(x)] =
                    covered(class_id, dx, dy, s);
            }
        }
        occ
    };

    let mut events = Vec::new();
    let mut prev = render(0.0);
    for step in 1..=steps {
        let t0 = step as f64 * dt;
        let cur = render(t0);
        for (idx, (&a, &b)) in prev.iter().zip(&cur).enumerate() {
            if a == b || !rng.gen_bool(EMIT_PROB) {
                continue;
            }
            let t = (t0 - rng.gen_range(0.0..dt)).max(0.0) as u64;
            if t >= cfg.duration_us {
                continue;
            }
            let p = if b { Polarity::On } else { Polarity::Off };
            events.push(Event::new(
                (idx % usize::from(w)) as u16,
                (idx / usize::from(w)) as u16,
                t,
                p,
            ));
        }
        prev = cur;
    }

    let n_noise = (cfg.noise_hz * cfg.duration_us as f64 / 1e6).round() as usize;
    for _ in 0..n_noise {
        let p = if rng.gen_bool(0.5) {
            Polarity::On
        } else {
            Polarity::Off
        };
        events.push(Event::new(
            rng.gen_range(0..w),
            rng.gen_range(0..h),
            rng.gen_range(0..cfg.duration_us),
            p,
        ));
    }
    EventStream::new(w, h, events).expect("generated events lie on the sensor")
}

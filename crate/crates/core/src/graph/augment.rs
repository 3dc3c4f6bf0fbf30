//! Geometric augmentation of node positions. The edge set is left alone;
//! pseudo-coordinates are recomputed from the moved nodes.

use rand::Rng;

use super::EventGraph;

fn centre(g: &EventGraph) -> (f64, f64) {
    (
        (f64::from(g.width()) - 1.0) / 2.0,
        (f64::from(g.height()) - 1.0) / 2.0,
    )
}

/// Scales `(x, y)` about the sensor centre.
pub fn augment_scale(g: &EventGraph, factor: f64) -> EventGraph {
    let (cx, cy) = centre(g);
    let pos = g
        .nodes()
        .iter()
        .map(|p| [cx + (p[0] - cx) * factor, cy + (p[1] - cy) * factor, p[2]])
        .collect();
    g.with_positions(pos)
}

/// Reflects along axis 0 (`x -> W - 1 - x`) or axis 1 (`y -> H - 1 - y`).
pub fn augment_mirror(g: &EventGraph, axis: usize) -> EventGraph {
    assert!(axis < 2, "mirror axis must be 0 or 1");
    let extent = if axis == 0 { g.width() } else { g.height() };
    let hi = f64::from(extent) - 1.0;
    let pos = g
        .nodes()
        .iter()
        .map(|p| {
            let mut q = *p;
            q[axis] = hi - q[axis];
            q
        })
        .collect();
    g.with_positions(pos)
}

/// Rotates `(x, y)` about the sensor centre by `degrees`.
pub fn augment_rotate(g: &EventGraph, degrees: f64) -> EventGraph {
    let (cx, cy) = centre(g);
    let (s, c) = degrees.to_radians().sin_cos();
    let pos = g
        .nodes()
        .iter()
        .map(|p| {
            let (dx, dy) = (p[0] - cx, p[1] - cy);
            [cx + c * dx - s * dy, cy + s * dx + c * dy, p[2]]
        })
        .collect();
    g.with_positions(pos)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentConfig {
    pub scale_min: f64,
    pub flip_prob: f64,
    pub max_rotation_deg: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            scale_min: 0.95,
            flip_prob: 0.5,
            max_rotation_deg: 10.0,
        }
    }
}

/// Scale by a factor in `[scale_min, 1)`, flip each axis with `flip_prob`,
/// then rotate by an angle in `[0, max_rotation_deg]`.
pub fn random_augment<R: Rng + ?Sized>(g: &EventGraph, cfg: &AugmentConfig, rng: &mut R) -> EventGraph {
    let factor = if cfg.scale_min < 1.0 {
        rng.gen_range(cfg.scale_min..1.0)
    } else {
        1.0
    };
    let mut out = augment_scale(g, factor);
    for axis in 0..2 {
        if rng.gen_bool(cfg.flip_prob) {
            out = augment_mirror(&out, axis);
        }
    }
    let angle = rng.gen_range(0.0..=cfg.max_rotation_deg);
    augment_rotate(&out, angle)
}

use rand::Rng;

use super::params::{ParamId, ParamStore, Session};
use crate::autodiff::{Real, Tensor, Var};
use crate::error::{Error, Result};

/// Fully connected layer on flattened `[B, P * C]` inputs. The caller applies
/// the activation (identity for the logit layer).
#[derive(Debug, Clone)]
pub struct Linear {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Linear {
    /// Weights uniform in `+-sqrt(1 / in_dim)`, zero bias.
    pub fn new<T: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        rng: &mut R,
    ) -> Self {
        let bound = (1.0 / in_dim as f64).sqrt();
        let w = Tensor::from_fn(&[in_dim, out_dim], |_| {
            T::from_f64_lossy(rng.gen_range(-bound..=bound))
        });
        Self {
            in_dim,
            out_dim,
            weight: store.add(format!("{name}.weight"), w, true),
            bias: store.add(format!("{name}.bias"), Tensor::zeros(&[out_dim]), true),
        }
    }

    pub fn forward<T: Real>(&self, s: &mut Session<'_, T>, x: Var) -> Result<Var> {
        let (_, d) = s.tape.value(x).dims2("fully_connected")?;
        if d != self.in_dim {
            return Err(Error::shape(
                "fully_connected",
                format!("input width {d}, layer expects {}", self.in_dim),
            ));
        }
        let w = s.param(self.weight);
        let y = s.tape.matmul(x, w)?;
        let b = s.param(self.bias);
        s.tape.add(y, b)
    }
}

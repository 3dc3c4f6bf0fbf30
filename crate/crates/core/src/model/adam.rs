use crate::autodiff::{Real, Tensor};
use crate::nn::{ParamId, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction; moments are created lazily per parameter.
#[derive(Debug, Clone)]
pub struct Adam<T: Real = f64> {
    pub cfg: AdamConfig,
    pub step: u64,
    moments: Vec<Option<(Tensor<T>, Tensor<T>)>>,
}

impl<T: Real> Adam<T> {
    pub fn new(cfg: AdamConfig) -> Self {
        Self {
            cfg,
            step: 0,
            moments: Vec::new(),
        }
    }

    /// One update of every parameter in `grads` with learning rate `lr`.
    pub fn update(&mut self, store: &mut ParamStore<T>, grads: &[(ParamId, Tensor<T>)], lr: f64) {
        self.step += 1;
        if self.moments.len() < store.len() {
            self.moments.resize(store.len(), None);
        }
        let (b1, b2) = (self.cfg.beta1, self.cfg.beta2);
        let c1 = 1.0 - b1.powi(self.step as i32);
        let c2 = 1.0 - b2.powi(self.step as i32);
        let (b1t, b2t) = (T::from_f64_lossy(b1), T::from_f64_lossy(b2));
        let (one, eps) = (T::one(), T::from_f64_lossy(self.cfg.eps));
        let (c1, c2, lr) = (T::from_f64_lossy(c1), T::from_f64_lossy(c2), T::from_f64_lossy(lr));
        for (id, g) in grads {
            let param = store.get_mut(*id);
            debug_assert_eq!(param.value.shape(), g.shape());
            let (m, v) = self.moments[id.0]
                .get_or_insert_with(|| (Tensor::zeros(g.shape()), Tensor::zeros(g.shape())));
            let w = param.value.data_mut();
            for (((w, m), v), &g) in w
                .iter_mut()
                .zip(m.data_mut())
                .zip(v.data_mut())
                .zip(g.data())
            {
                *m = b1t * *m + (one - b1t) * g;
                *v = b2t * *v + (one - b2t) * g * g;
                let mhat = *m / c1;
                let vhat = *v / c2;
                *w -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
    }
}

/// Step decay: `base * gamma^(number of milestones <= epoch)`, epochs
/// counted from 0.
#[derive(Debug, Clone, PartialEq)]
pub struct LrSchedule {
    pub base: f64,
    pub milestones: Vec<usize>,
    pub gamma: f64,
}

impl LrSchedule {
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let passed = self.milestones.iter().filter(|&&m| m <= epoch).count();
        self.base * self.gamma.powi(passed as i32)
    }
}

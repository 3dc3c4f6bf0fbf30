use super::params::{ParamId, ParamStore, Session};
use crate::autodiff::{Real, Tensor, Var};
use crate::error::Result;

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

/// Per-channel normalization with learned scale/shift and running
/// statistics for inference.
#[derive(Debug, Clone)]
pub struct BatchNorm {
    pub channels: usize,
    pub gamma: ParamId,
    pub beta: ParamId,
    pub running_mean: ParamId,
    pub running_var: ParamId,
    pub eps: f64,
    pub momentum: f64,
}

impl BatchNorm {
    pub fn new<T: Real>(store: &mut ParamStore<T>, name: &str, channels: usize) -> Self {
        Self {
            channels,
            gamma: store.add(format!("{name}.gamma"), Tensor::ones(&[channels]), true),
            beta: store.add(format!("{name}.beta"), Tensor::zeros(&[channels]), true),
            running_mean: store.add(format!("{name}.running_mean"), Tensor::zeros(&[channels]), false),
            running_var: store.add(format!("{name}.running_var"), Tensor::ones(&[channels]), false),
            eps: BN_EPS,
            momentum: BN_MOMENTUM,
        }
    }

    /// Training mode normalizes with statistics over every row of `x` and
    /// schedules a running-statistic update; inference uses the running
    /// statistics.
    pub fn forward<T: Real>(&self, s: &mut Session<'_, T>, x: Var) -> Result<Var> {
        let (gamma, beta) = (s.param(self.gamma), s.param(self.beta));
        let eps = T::from_f64_lossy(self.eps);
        if !s.train {
            let rm = s.store().get(self.running_mean).value.data().to_vec();
            let rv = s.store().get(self.running_var).value.data().to_vec();
            let (y, _, _) = s.tape.batch_norm(x, gamma, beta, eps, Some((&rm, &rv)))?;
            return Ok(y);
        }
        let n = s.tape.value(x).shape()[0];
        let (y, mean, var) = s.tape.batch_norm(x, gamma, beta, eps, None)?;
        let mom = T::from_f64_lossy(self.momentum);
        let keep = T::one() - mom;
        // Running variance tracks the unbiased estimate.
        let unbias = if n > 1 {
            T::from_f64_lossy(n as f64 / (n - 1) as f64)
        } else {
            T::one()
        };
        let rm = &s.store().get(self.running_mean).value;
        let rv = &s.store().get(self.running_var).value;
        let new_mean = Tensor::from_fn(&[self.channels], |j| keep * rm.data()[j] + mom * mean[j]);
        let new_var = Tensor::from_fn(&[self.channels], |j| keep * rv.data()[j] + mom * var[j] * unbias);
        s.defer_update(self.running_mean, new_mean);
        s.defer_update(self.running_var, new_var);
        Ok(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tape;

    #[test]
    fn train_updates_running_stats_with_unbiased_variance() {
        let mut store = ParamStore::<f64>::new();
        let bn = BatchNorm::new(&mut store, "bn", 1);
        let mut tape = Tape::new();
        let mut s = Session::new(&mut tape, &store, true);
        let x = s.tape.constant(Tensor::from_vec(vec![4, 1], vec![1.0, 2.0, 3.0, 6.0]).unwrap());
        let y = bn.forward(&mut s, x).unwrap();
        let out = s.tape.value(y).data().to_vec();
        let mean: f64 = out.iter().sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12);
        let upd = s.take_updates();
        store.apply_updates(upd);
        // Batch mean 3, unbiased variance 14 / 3.
        assert!((store.get(bn.running_mean).value.data()[0] - 0.3).abs() < 1e-12);
        let rv = 0.9 + 0.1 * 14.0 / 3.0;
        assert!((store.get(bn.running_var).value.data()[0] - rv).abs() < 1e-12);
    }

    #[test]
    fn eval_uses_running_stats() {
        let mut store = ParamStore::<f64>::new();
        let bn = BatchNorm::new(&mut store, "bn", 1);
        store.get_mut(bn.running_mean).value = Tensor::full(&[1], 2.0);
        store.get_mut(bn.running_var).value = Tensor::full(&[1], 4.0);
        let mut tape = Tape::new();
        let mut s = Session::new(&mut tape, &store, false);
        let x = s.tape.constant(Tensor::full(&[1, 1], 6.0));
        let y = bn.forward(&mut s, x).unwrap();
        let want = 4.0 / (4.0f64 + BN_EPS).sqrt();
        assert!((s.tape.value(y).data()[0] - want).abs() < 1e-12);
        assert!(s.take_updates().is_empty());
    }
}

use std::sync::atomic::{AtomicU64, Ordering};

use super::ops::Op;
use super::{Real, Tensor};
use crate::error::{Error, Result};

static NEXT_TAPE: AtomicU64 = AtomicU64::new(1);

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var {
    pub(crate) id: usize,
    pub(crate) tape: u64,
}

pub(crate) struct Node<T: Real> {
    pub value: Tensor<T>,
    pub op: Op<T>,
    pub needs_grad: bool,
}

/// Records operations for one forward/backward pass.
///
/// A tape is single-threaded and can be differentiated once; call
/// [`Tape::reset`] to reuse it.
pub struct Tape<T: Real = f64> {
    id: u64,
    pub(crate) nodes: Vec<Node<T>>,
    consumed: bool,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self {
            id: NEXT_TAPE.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
            consumed: false,
        }
    }

    /// Drops every record; handles from before the reset become invalid.
    pub fn reset(&mut self) {
        *self = Self::new();
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A differentiable input.
    pub fn leaf(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// An input that never receives a gradient.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        self.check(v).expect("variable belongs to this tape");
        &self.nodes[v.id].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.value(v).shape()
    }

    pub(crate) fn check(&self, v: Var) -> Result<()> {
        if v.tape != self.id || v.id >= self.nodes.len() {
            return Err(Error::Tape("variable does not belong to this tape".into()));
        }
        Ok(())
    }

    pub(crate) fn needs(&self, v: Var) -> bool {
        self.nodes[v.id].needs_grad
    }

    pub(crate) fn push(&mut self, value: Tensor<T>, op: Op<T>, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var {
            id: self.nodes.len() - 1,
            tape: self.id,
        }
    }

    /// Gradients of the scalar `loss` with respect to every recorded value.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients<T>> {
        self.check(loss)?;
        if self.consumed {
            return Err(Error::Tape("backward already ran on this tape; reset it first".into()));
        }
        if self.nodes[loss.id].value.len() != 1 {
            return Err(Error::Tape(format!(
                "loss must be a scalar, got shape {:?}",
                self.nodes[loss.id].value.shape()
            )));
        }
        self.consumed = true;
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.id] = Some(Tensor::ones(self.nodes[loss.id].value.shape()));
        for id in (0..=loss.id).rev() {
            if !self.nodes[id].needs_grad || matches!(self.nodes[id].op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            let nodes = &self.nodes;
            let mut acc = |input: usize, delta: Tensor<T>| {
                if !nodes[input].needs_grad {
                    return;
                }
                match &mut grads[input] {
                    Some(existing) => {
                        for (a, d) in existing.data_mut().iter_mut().zip(delta.data()) {
                            *a += *d;
                        }
                    }
                    slot @ None => *slot = Some(delta),
                }
            };
            super::ops::propagate(&nodes[id].op, &g, nodes, &nodes[id].value, &mut acc);
            grads[id] = Some(g);
        }
        Ok(Gradients {
            tape: self.id,
            grads,
        })
    }
}

/// Result of [`Tape::backward`].
pub struct Gradients<T: Real = f64> {
    tape: u64,
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Real> Gradients<T> {
    /// Gradient for `v`, or `None` when the loss does not depend on it.
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        if v.tape != self.tape {
            return None;
        }
        self.grads.get(v.id).and_then(Option::as_ref)
    }

    /// Like [`Gradients::get`] but with zeros for unreached values.
    pub fn get_or_zeros(&self, v: Var, shape: &[usize]) -> Tensor<T> {
        self.get(v).cloned().unwrap_or_else(|| Tensor::zeros(shape))
    }
}

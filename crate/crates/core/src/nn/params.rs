use crate::autodiff::{Gradients, Real, Tape, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Param<T: Real = f64> {
    pub name: String,
    pub value: Tensor<T>,
    /// `false` for running statistics, which are stored but not optimized.
    pub trainable: bool,
}

/// Named tensors of a model in registration order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore<T: Real = f64> {
    params: Vec<Param<T>>,
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        Self { params: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor<T>, trainable: bool) -> ParamId {
        self.params.push(Param {
            name: name.into(),
            value,
            trainable,
        });
        ParamId(self.params.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Param<T> {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param<T> {
        &mut self.params[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param<T>)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    /// Number of trainable scalars.
    pub fn trainable_count(&self) -> usize {
        self.params.iter().filter(|p| p.trainable).map(|p| p.value.len()).sum()
    }
}

/// One forward pass: binds parameters to tape leaves on first use and
/// collects running-statistic updates until [`Session::commit`].
pub struct Session<'a, T: Real = f64> {
    pub tape: &'a mut Tape<T>,
    store: &'a ParamStore<T>,
    vars: Vec<Option<Var>>,
    pending: Vec<(ParamId, Tensor<T>)>,
    pub train: bool,
}

impl<'a, T: Real> Session<'a, T> {
    pub fn new(tape: &'a mut Tape<T>, store: &'a ParamStore<T>, train: bool) -> Self {
        Self {
            tape,
            store,
            vars: vec![None; store.len()],
            pending: Vec::new(),
            train,
        }
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.vars[id.0] {
            return v;
        }
        let p = self.store.get(id);
        let v = if p.trainable {
            self.tape.leaf(p.value.clone())
        } else {
            self.tape.constant(p.value.clone())
        };
        self.vars[id.0] = Some(v);
        v
    }

    pub fn store(&self) -> &ParamStore<T> {
        self.store
    }

    pub(crate) fn defer_update(&mut self, id: ParamId, value: Tensor<T>) {
        self.pending.push((id, value));
    }

    /// Gradients of every trainable parameter used in this pass; unused ones
    /// get zeros.
    pub fn param_grads(&self, grads: &Gradients<T>) -> Vec<(ParamId, Tensor<T>)> {
        self.store
            .iter()
            .filter(|(_, p)| p.trainable)
            .map(|(id, p)| {
                let g = match self.vars[id.0] {
                    Some(v) => grads.get_or_zeros(v, p.value.shape()),
                    None => Tensor::zeros(p.value.shape()),
                };
                (id, g)
            })
            .collect()
    }

    /// Running-statistic updates recorded during the pass.
    pub fn take_updates(&mut self) -> Vec<(ParamId, Tensor<T>)> {
        std::mem::take(&mut self.pending)
    }
}

impl<T: Real> ParamStore<T> {
    pub fn apply_updates(&mut self, updates: Vec<(ParamId, Tensor<T>)>) {
        for (id, v) in updates {
            self.params[id.0].value = v;
        }
    }
}

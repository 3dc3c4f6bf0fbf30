use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tape::Node;
use super::{Real, Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Sparse linear map from `[n_in, C]` rows to `[n_out, blocks * C]`:
/// every entry adds `coef * input[src]` into block `block` of row `dst`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterPlan<T: Real = f64> {
    pub n_in: usize,
    pub n_out: usize,
    pub blocks: usize,
    pub entries: Vec<ScatterEntry<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterEntry<T: Real = f64> {
    pub dst: u32,
    pub src: u32,
    pub block: u32,
    pub coef: T,
}

pub(crate) enum Op<T: Real> {
    Leaf,
    Add { a: usize, b: usize, bcast: bool },
    Sub { a: usize, b: usize, bcast: bool },
    Mul { a: usize, b: usize, bcast: bool },
    MatMul { a: usize, b: usize },
    Relu { a: usize },
    Scale { a: usize, k: T },
    Concat { parts: Vec<usize>, axis: usize },
    Gather { a: usize, index: Arc<Vec<usize>> },
    SegmentSum { a: usize, seg: Arc<Vec<u32>> },
    SegmentMean { a: usize, seg: Arc<Vec<u32>>, counts: Vec<usize> },
    SegmentMax { a: usize, argmax: Vec<usize> },
    Dropout { a: usize, mask: Vec<T> },
    SoftmaxCe { logits: usize, probs: Vec<T>, labels: Vec<usize> },
    Reshape { a: usize },
    Sum { a: usize },
    Scatter { a: usize, plan: Arc<ScatterPlan<T>> },
    BatchNorm {
        x: usize,
        gamma: usize,
        beta: usize,
        xhat: Vec<T>,
        inv_std: Vec<T>,
        train: bool,
    },
}

const NONE: usize = usize::MAX;

fn shape_str<T: Real>(t: &Tensor<T>) -> String {
    format!("{:?}", t.shape())
}

/// `b` matches `a` exactly, or matches `a`'s trailing dimensions and is
/// repeated along the leading ones.
fn broadcast_kind<T: Real>(op: &'static str, a: &Tensor<T>, b: &Tensor<T>) -> Result<bool> {
    if a.shape() == b.shape() {
        return Ok(false);
    }
    let (sa, sb) = (a.shape(), b.shape());
    if sb.len() < sa.len() && sa.ends_with(sb) && !b.is_empty() {
        return Ok(true);
    }
    Err(Error::shape(op, format!("{} vs {}", shape_str(a), shape_str(b))))
}

fn matmul_kernel<T: Real>(a: &[T], b: &[T], n: usize, k: usize, m: usize) -> Vec<T> {
    let mut out = vec![T::zero(); n * m];
    for i in 0..n {
        let row = &mut out[i * m..(i + 1) * m];
        for (kk, &av) in a[i * k..(i + 1) * k].iter().enumerate() {
            if av == T::zero() {
                continue;
            }
            for (o, &bv) in row.iter_mut().zip(&b[kk * m..(kk + 1) * m]) {
                *o += av * bv;
            }
        }
    }
    out
}

fn transpose<T: Real>(a: &[T], r: usize, c: usize) -> Vec<T> {
    let mut out = vec![T::zero(); r * c];
    for i in 0..r {
        for j in 0..c {
            out[j * r + i] = a[i * c + j];
        }
    }
    out
}

/// `a^T b` for `a: [n, k]`, `b: [n, m]`.
fn matmul_at_kernel<T: Real>(a: &[T], b: &[T], n: usize, k: usize, m: usize) -> Vec<T> {
    let mut out = vec![T::zero(); k * m];
    for i in 0..n {
        let brow = &b[i * m..(i + 1) * m];
        for (kk, &av) in a[i * k..(i + 1) * k].iter().enumerate() {
            if av == T::zero() {
                continue;
            }
            for (o, &bv) in out[kk * m..(kk + 1) * m].iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

fn reduce_leading<T: Real>(g: &Tensor<T>, target: &[usize]) -> Tensor<T> {
    let inner: usize = target.iter().product();
    let mut out = vec![T::zero(); inner];
    for chunk in g.data().chunks(inner) {
        for (o, v) in out.iter_mut().zip(chunk) {
            *o += *v;
        }
    }
    Tensor::from_vec(target.to_vec(), out).unwrap()
}

fn rows_cols<T: Real>(t: &Tensor<T>) -> (usize, usize) {
    match t.shape() {
        [] => (1, 1),
        [n] => (*n, 1),
        [n, rest @ ..] => (*n, rest.iter().product()),
    }
}

impl<T: Real> Tape<T> {
    fn binary(
        &mut self,
        op: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(T, T) -> T,
        make: impl Fn(usize, usize, bool) -> Op<T>,
    ) -> Result<Var> {
        self.check(a)?;
        self.check(b)?;
        let (ta, tb) = (self.value(a), self.value(b));
        let bcast = broadcast_kind(op, ta, tb)?;
        let inner = tb.len();
        let data = ta
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| f(x, tb.data()[i % inner]))
            .collect();
        let out = Tensor::from_vec(ta.shape().to_vec(), data)?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(out, make(a.id, b.id, bcast), needs))
    }

    /// Elementwise `a + b`; `b` may be repeated along leading dimensions.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, |x, y| x + y, |a, b, bcast| Op::Add { a, b, bcast })
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, |x, y| x - y, |a, b, bcast| Op::Sub { a, b, bcast })
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, |x, y| x * y, |a, b, bcast| Op::Mul { a, b, bcast })
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check(a)?;
        self.check(b)?;
        let (ta, tb) = (self.value(a), self.value(b));
        let (n, k) = ta.dims2("matmul")?;
        let (k2, m) = tb.dims2("matmul")?;
        if k != k2 {
            return Err(Error::shape("matmul", format!("{} x {}", shape_str(ta), shape_str(tb))));
        }
        let out = Tensor::from_vec(vec![n, m], matmul_kernel(ta.data(), tb.data(), n, k, m))?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(out, Op::MatMul { a: a.id, b: b.id }, needs))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.check(a)?;
        let out = self.value(a).map(|x| x.max(T::zero()));
        let needs = self.needs(a);
        Ok(self.push(out, Op::Relu { a: a.id }, needs))
    }

    pub fn scale(&mut self, a: Var, k: T) -> Result<Var> {
        self.check(a)?;
        let out = self.value(a).map(|x| x * k);
        let needs = self.needs(a);
        Ok(self.push(out, Op::Scale { a: a.id, k }, needs))
    }

    /// Concatenates matrices along `axis` (0 = rows, 1 = columns).
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        if parts.is_empty() || axis > 1 {
            return Err(Error::shape("concat", "need at least one part and axis 0 or 1"));
        }
        for &p in parts {
            self.check(p)?;
        }
        let dims = parts
            .iter()
            .map(|&p| self.value(p).dims2("concat"))
            .collect::<Result<Vec<_>>>()?;
        let out = if axis == 0 {
            let c = dims[0].1;
            if dims.iter().any(|d| d.1 != c) {
                return Err(Error::shape("concat", format!("column counts differ: {dims:?}")));
            }
            let data = parts.iter().flat_map(|&p| self.value(p).data().to_vec()).collect();
            Tensor::from_vec(vec![dims.iter().map(|d| d.0).sum(), c], data)?
        } else {
            let r = dims[0].0;
            if dims.iter().any(|d| d.0 != r) {
                return Err(Error::shape("concat", format!("row counts differ: {dims:?}")));
            }
            let total: usize = dims.iter().map(|d| d.1).sum();
            let mut data = Vec::with_capacity(r * total);
            for i in 0..r {
                for (&p, d) in parts.iter().zip(&dims) {
                    data.extend_from_slice(&self.value(p).data()[i * d.1..(i + 1) * d.1]);
                }
            }
            Tensor::from_vec(vec![r, total], data)?
        };
        let needs = parts.iter().any(|&p| self.needs(p));
        let parts = parts.iter().map(|p| p.id).collect();
        Ok(self.push(out, Op::Concat { parts, axis }, needs))
    }

    /// Rows of `a` picked by `index` (repeats allowed).
    pub fn gather(&mut self, a: Var, index: Arc<Vec<usize>>) -> Result<Var> {
        self.check(a)?;
        let t = self.value(a);
        let (n, c) = rows_cols(t);
        if let Some(&bad) = index.iter().find(|&&i| i >= n) {
            return Err(Error::shape("gather", format!("index {bad} with {n} rows")));
        }
        let mut data = Vec::with_capacity(index.len() * c);
        for &i in index.iter() {
            data.extend_from_slice(&t.data()[i * c..(i + 1) * c]);
        }
        let mut shape = t.shape().to_vec();
        if shape.is_empty() {
            shape.push(1);
        }
        shape[0] = index.len();
        let out = Tensor::from_vec(shape, data)?;
        let needs = self.needs(a);
        Ok(self.push(out, Op::Gather { a: a.id, index }, needs))
    }

    fn segment_prep(&self, op: &'static str, a: Var, seg: &[u32], n: usize) -> Result<(usize, usize)> {
        self.check(a)?;
        let (rows, c) = self.value(a).dims2(op)?;
        if seg.len() != rows {
            return Err(Error::shape(op, format!("{} segment ids for {rows} rows", seg.len())));
        }
        if let Some(&s) = seg.iter().find(|&&s| s as usize >= n) {
            return Err(Error::shape(op, format!("segment id {s} >= {n}")));
        }
        Ok((rows, c))
    }

    /// Row sums per segment: output row `s` adds every row `r` with `seg[r] = s`.
    pub fn segment_sum(&mut self, a: Var, seg: Arc<Vec<u32>>, n: usize) -> Result<Var> {
        let (_, c) = self.segment_prep("segment_sum", a, &seg, n)?;
        let mut out = vec![T::zero(); n * c];
        let src = self.value(a).data();
        for (r, &s) in seg.iter().enumerate() {
            let s = s as usize;
            for j in 0..c {
                out[s * c + j] += src[r * c + j];
            }
        }
        let out = Tensor::from_vec(vec![n, c], out)?;
        let needs = self.needs(a);
        Ok(self.push(out, Op::SegmentSum { a: a.id, seg }, needs))
    }

    /// Row means per segment; empty segments are zero.
    pub fn segment_mean(&mut self, a: Var, seg: Arc<Vec<u32>>, n: usize) -> Result<Var> {
        let (_, c) = self.segment_prep("segment_mean", a, &seg, n)?;
        let mut counts = vec![0usize; n];
        for &s in seg.iter() {
            counts[s as usize] += 1;
        }
        let mut out = vec![T::zero(); n * c];
        let src = self.value(a).data();
        for (r, &s) in seg.iter().enumerate() {
            let s = s as usize;
            for j in 0..c {
                out[s * c + j] += src[r * c + j];
            }
        }
        for (s, &cnt) in counts.iter().enumerate() {
            if cnt > 0 {
                let inv = T::one() / T::from_usize(cnt).unwrap();
                out[s * c..(s + 1) * c].iter_mut().for_each(|v| *v *= inv);
            }
        }
        let out = Tensor::from_vec(vec![n, c], out)?;
        let needs = self.needs(a);
        Ok(self.push(out, Op::SegmentMean { a: a.id, seg, counts }, needs))
    }

    /// Channelwise maximum per segment. The gradient goes to the first row
    /// attaining the maximum; empty segments are zero.
    pub fn segment_max(&mut self, a: Var, seg: Arc<Vec<u32>>, n: usize) -> Result<Var> {
        let (_, c) = self.segment_prep("segment_max", a, &seg, n)?;
        let src = self.value(a).data();
        let mut out = vec![T::zero(); n * c];
        let mut argmax = vec![NONE; n * c];
        for (r, &s) in seg.iter().enumerate() {
            let s = s as usize;
            for j in 0..c {
                let k = s * c + j;
                let v = src[r * c + j];
                if argmax[k] == NONE || v > out[k] {
                    out[k] = v;
                    argmax[k] = r;
                }
            }
        }
        let out = Tensor::from_vec(vec![n, c], out)?;
        let needs = self.needs(a);
        Ok(self.push(out, Op::SegmentMax { a: a.id, argmax }, needs))
    }

    /// Inverted dropout: in training each element is zeroed with
    /// probability `p` and survivors are scaled by `1 / (1 - p)`.
    pub fn dropout(&mut self, a: Var, p: f64, train: bool, seed: u64) -> Result<Var> {
        self.check(a)?;
        if !(0.0..1.0).contains(&p) {
            return Err(Error::shape("dropout", format!("probability {p} outside [0, 1)")));
        }
        if !train || p == 0.0 {
            return Ok(a);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let keep = T::from_f64_lossy(1.0 / (1.0 - p));
        let t = self.value(a);
        let mask: Vec<T> = (0..t.len())
            .map(|_| if rng.gen::<f64>() < p { T::zero() } else { keep })
            .collect();
        let data = t.data().iter().zip(&mask).map(|(&x, &m)| x * m).collect();
        let out = Tensor::from_vec(t.shape().to_vec(), data)?;
        let needs = self.needs(a);
        Ok(self.push(out, Op::Dropout { a: a.id, mask }, needs))
    }

    /// Mean cross-entropy of softmax(`logits`) against class `labels`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        self.check(logits)?;
        let t = self.value(logits);
        let (b, q) = t.dims2("softmax_cross_entropy")?;
        if labels.len() != b || b == 0 {
            return Err(Error::shape(
                "softmax_cross_entropy",
                format!("{} labels for {b} rows", labels.len()),
            ));
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= q) {
            return Err(Error::shape("softmax_cross_entropy", format!("label {l} with {q} classes")));
        }
        let mut probs = vec![T::zero(); b * q];
        let mut loss = T::zero();
        for i in 0..b {
            let row = &t.data()[i * q..(i + 1) * q];
            let mx = row.iter().copied().fold(T::neg_infinity(), T::max);
            let z: T = row.iter().map(|&v| (v - mx).exp()).sum();
            for j in 0..q {
                probs[i * q + j] = (row[j] - mx).exp() / z;
            }
            loss += z.ln() + mx - row[labels[i]];
        }
        let out = Tensor::scalar(loss / T::from_usize(b).unwrap());
        let needs = self.needs(logits);
        let op = Op::SoftmaxCe {
            logits: logits.id,
            probs,
            labels: labels.to_vec(),
        };
        Ok(self.push(out, op, needs))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        self.check(a)?;
        let out = self.value(a).clone().reshape(shape)?;
        let needs = self.needs(a);
        Ok(self.push(out, Op::Reshape { a: a.id }, needs))
    }

    /// Sum of all elements as a scalar.
    pub fn sum(&mut self, a: Var) -> Result<Var> {
        self.check(a)?;
        let s: T = self.value(a).data().iter().copied().sum();
        let needs = self.needs(a);
        Ok(self.push(Tensor::scalar(s), Op::Sum { a: a.id }, needs))
    }

    /// Applies a [`ScatterPlan`] to the rows of `a`.
    pub fn scatter(&mut self, a: Var, plan: Arc<ScatterPlan<T>>) -> Result<Var> {
        self.check(a)?;
        let (n, c) = self.value(a).dims2("scatter")?;
        if n != plan.n_in {
            return Err(Error::shape("scatter", format!("plan expects {} rows, got {n}", plan.n_in)));
        }
        let width = plan.blocks * c;
        let mut out = vec![T::zero(); plan.n_out * width];
        let src = self.value(a).data();
        for e in &plan.entries {
            let o = e.dst as usize * width + e.block as usize * c;
            let s = e.src as usize * c;
            for (dst, &v) in out[o..o + c].iter_mut().zip(&src[s..s + c]) {
                *dst += e.coef * v;
            }
        }
        let out = Tensor::from_vec(vec![plan.n_out, width], out)?;
        let needs = self.needs(a);
        Ok(self.push(out, Op::Scatter { a: a.id, plan }, needs))
    }

    /// Per-channel normalization of `x: [N, C]`.
    ///
    /// With `stats = None` the batch mean and biased variance are used
    /// (training); otherwise the supplied `(mean, var)` (inference). Returns
    /// the output and the batch statistics that were computed.
    pub fn batch_norm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        eps: T,
        stats: Option<(&[T], &[T])>,
    ) -> Result<(Var, Vec<T>, Vec<T>)> {
        for v in [x, gamma, beta] {
            self.check(v)?;
        }
        let (n, c) = self.value(x).dims2("batch_norm")?;
        if self.value(gamma).len() != c || self.value(beta).len() != c {
            return Err(Error::shape(
                "batch_norm",
                format!("{c} channels, gamma {:?}, beta {:?}", self.shape(gamma), self.shape(beta)),
            ));
        }
        let xs = self.value(x).data();
        let (mean, var) = match stats {
            Some((m, v)) => {
                if m.len() != c || v.len() != c {
                    return Err(Error::shape("batch_norm", "running statistics length"));
                }
                (m.to_vec(), v.to_vec())
            }
            None => {
                if n == 0 {
                    return Err(Error::shape("batch_norm", "no rows to normalize"));
                }
                let nf = T::from_usize(n).unwrap();
                let mut mean = vec![T::zero(); c];
                for row in xs.chunks(c) {
                    for (m, &v) in mean.iter_mut().zip(row) {
                        *m += v;
                    }
                }
                mean.iter_mut().for_each(|m| *m = *m / nf);
                let mut var = vec![T::zero(); c];
                for row in xs.chunks(c) {
                    for j in 0..c {
                        let d = row[j] - mean[j];
                        var[j] += d * d;
                    }
                }
                var.iter_mut().for_each(|v| *v = *v / nf);
                (mean, var)
            }
        };
        let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
        let (g, b) = (self.value(gamma).data(), self.value(beta).data());
        let mut xhat = Vec::with_capacity(n * c);
        let mut out = Vec::with_capacity(n * c);
        for row in xs.chunks(c) {
            for j in 0..c {
                let h = (row[j] - mean[j]) * inv_std[j];
                xhat.push(h);
                out.push(h * g[j] + b[j]);
            }
        }
        let out = Tensor::from_vec(vec![n, c], out)?;
        let needs = self.needs(x) || self.needs(gamma) || self.needs(beta);
        let op = Op::BatchNorm {
            x: x.id,
            gamma: gamma.id,
            beta: beta.id,
            xhat,
            inv_std,
            train: stats.is_none(),
        };
        Ok((self.push(out, op, needs), mean, var))
    }
}

/// Backward rule for one record: pushes input gradients through `acc`.
pub(crate) fn propagate<T: Real>(
    op: &Op<T>,
    g: &Tensor<T>,
    nodes: &[Node<T>],
    out: &Tensor<T>,
    acc: &mut impl FnMut(usize, Tensor<T>),
) {
    let val = |i: usize| &nodes[i].value;
    let like = |i: usize, data: Vec<T>| Tensor::from_vec(val(i).shape().to_vec(), data).unwrap();
    let fit = |i: usize, t: Tensor<T>, bcast: bool| {
        if bcast {
            reduce_leading(&t, val(i).shape())
        } else {
            t
        }
    };
    match op {
        Op::Leaf => {}
        Op::Add { a, b, bcast } => {
            acc(*a, g.clone());
            acc(*b, fit(*b, g.clone(), *bcast));
        }
        Op::Sub { a, b, bcast } => {
            acc(*a, g.clone());
            acc(*b, fit(*b, g.map(|v| -v), *bcast));
        }
        Op::Mul { a, b, bcast } => {
            let (ta, tb) = (val(*a), val(*b));
            let inner = tb.len();
            let ga = g
                .data()
                .iter()
                .enumerate()
                .map(|(i, &d)| d * tb.data()[i % inner])
                .collect();
            acc(*a, like(*a, ga));
            let gb: Vec<T> = g.data().iter().zip(ta.data()).map(|(&d, &x)| d * x).collect();
            let gb = Tensor::from_vec(ta.shape().to_vec(), gb).unwrap();
            acc(*b, fit(*b, gb, *bcast));
        }
        Op::MatMul { a, b } => {
            let (ta, tb) = (val(*a), val(*b));
            let (n, k) = ta.dims2("matmul").unwrap();
            let m = tb.shape()[1];
            if nodes[*a].needs_grad {
                let bt = transpose(tb.data(), k, m);
                acc(*a, like(*a, matmul_kernel(g.data(), &bt, n, m, k)));
            }
            if nodes[*b].needs_grad {
                acc(*b, like(*b, matmul_at_kernel(ta.data(), g.data(), n, k, m)));
            }
        }
        Op::Relu { a } => {
            let d = g
                .data()
                .iter()
                .zip(val(*a).data())
                .map(|(&d, &x)| if x > T::zero() { d } else { T::zero() })
                .collect();
            acc(*a, like(*a, d));
        }
        Op::Scale { a, k } => acc(*a, g.map(|v| v * *k)),
        Op::Concat { parts, axis } => {
            let mut offset = 0;
            let total = out.shape()[1];
            for &p in parts {
                let (r, c) = val(p).dims2("concat").unwrap();
                let d = if *axis == 0 {
                    g.data()[offset * c..(offset + r) * c].to_vec()
                } else {
                    let mut d = Vec::with_capacity(r * c);
                    for i in 0..r {
                        d.extend_from_slice(&g.data()[i * total + offset..i * total + offset + c]);
                    }
                    d
                };
                offset += if *axis == 0 { r } else { c };
                acc(p, like(p, d));
            }
        }
        Op::Gather { a, index } => {
            let (_, c) = rows_cols(val(*a));
            let mut d = vec![T::zero(); val(*a).len()];
            for (r, &i) in index.iter().enumerate() {
                for j in 0..c {
                    d[i * c + j] += g.data()[r * c + j];
                }
            }
            acc(*a, like(*a, d));
        }
        Op::SegmentSum { a, seg } | Op::SegmentMean { a, seg, .. } => {
            let c = g.shape()[1];
            let counts = match op {
                Op::SegmentMean { counts, .. } => Some(counts),
                _ => None,
            };
            let mut d = vec![T::zero(); val(*a).len()];
            for (r, &s) in seg.iter().enumerate() {
                let s = s as usize;
                let k = counts.map_or(T::one(), |cn| T::one() / T::from_usize(cn[s]).unwrap());
                for j in 0..c {
                    d[r * c + j] = g.data()[s * c + j] * k;
                }
            }
            acc(*a, like(*a, d));
        }
        Op::SegmentMax { a, argmax } => {
            let c = g.shape()[1];
            let mut d = vec![T::zero(); val(*a).len()];
            for (k, &r) in argmax.iter().enumerate() {
                if r != NONE {
                    d[r * c + k % c] += g.data()[k];
                }
            }
            acc(*a, like(*a, d));
        }
        Op::Dropout { a, mask } => {
            let d = g.data().iter().zip(mask).map(|(&v, &m)| v * m).collect();
            acc(*a, like(*a, d));
        }
        Op::SoftmaxCe {
            logits,
            probs,
            labels,
        } => {
            let q = val(*logits).shape()[1];
            let scale = g.item() / T::from_usize(labels.len()).unwrap();
            let mut d: Vec<T> = probs.iter().map(|&p| p * scale).collect();
            for (i, &l) in labels.iter().enumerate() {
                d[i * q + l] -= scale;
            }
            acc(*logits, like(*logits, d));
        }
        Op::Reshape { a } => acc(*a, like(*a, g.data().to_vec())),
        Op::Sum { a } => {
            let s = g.item();
            acc(*a, Tensor::full(val(*a).shape(), s));
        }
        Op::Scatter { a, plan } => {
            let c = val(*a).shape()[1];
            let width = plan.blocks * c;
            let mut d = vec![T::zero(); val(*a).len()];
            for e in &plan.entries {
                let o = e.dst as usize * width + e.block as usize * c;
                let s = e.src as usize * c;
                for (dst, &v) in d[s..s + c].iter_mut().zip(&g.data()[o..o + c]) {
                    *dst += e.coef * v;
                }
            }
            acc(*a, like(*a, d));
        }
        Op::BatchNorm {
            x,
            gamma,
            beta,
            xhat,
            inv_std,
            train,
        } => {
            let c = inv_std.len();
            let n = g.len() / c.max(1);
            let gam = val(*gamma).data();
            let mut dgamma = vec![T::zero(); c];
            let mut dbeta = vec![T::zero(); c];
            for (gr, hr) in g.data().chunks(c).zip(xhat.chunks(c)) {
                for j in 0..c {
                    dgamma[j] += gr[j] * hr[j];
                    dbeta[j] += gr[j];
                }
            }
            if nodes[*x].needs_grad {
                let mut dx = vec![T::zero(); n * c];
                if *train {
                    let nf = T::from_usize(n).unwrap();
                    for (i, (gr, hr)) in g.data().chunks(c).zip(xhat.chunks(c)).enumerate() {
                        for j in 0..c {
                            // d xhat = g * gamma; sums of it are dbeta * gamma
                            // and dgamma * gamma.
                            let dh = gr[j] * gam[j];
                            dx[i * c + j] = inv_std[j] / nf
                                * (nf * dh - dbeta[j] * gam[j] - hr[j] * dgamma[j] * gam[j]);
                        }
                    }
                } else {
                    for (i, gr) in g.data().chunks(c).enumerate() {
                        for j in 0..c {
                            dx[i * c + j] = gr[j] * gam[j] * inv_std[j];
                        }
                    }
                }
                acc(*x, like(*x, dx));
            }
            acc(*gamma, like(*gamma, dgamma));
            acc(*beta, like(*beta, dbeta));
        }
    }
}

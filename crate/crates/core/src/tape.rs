//! Eager reverse-mode differentiation over dense arrays.
//!
//! Each primitive computes its value when it is recorded. [`Tape::backward`]
//! then walks the record once in reverse, applying each primitive's
//! vector-Jacobian product. Parameters enter the tape as leaves copied from a
//! [`ParameterStore`]; one leaf per parameter per tape.
//!
//! ```
//! use atbrg::tape::Tape;
//! use atbrg::tensor::DenseArray;
//!
//! let mut tape = Tape::new();
//! let w = tape.input(DenseArray::scalar(0.0));
//! let y = tape.sigmoid(w).unwrap();
//! assert_eq!(tape.value(y).item(), Some(0.5));
//! let grads = tape.backward(y).unwrap();
//! assert!((grads.node(w)[0] - 0.25).abs() < 1e-15);
//! ```

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::params::{ParamGrads, ParamId, ParameterStore};
use crate::tensor::DenseArray;

/// Probability clamp applied before taking logs in the cross-entropy.
pub const BCE_CLAMP: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OpKind {
    Input,
    Param,
    Gather,
    Concat,
    Affine,
    Tanh,
    Sigmoid,
    Exp,
    LeakyRelu,
    Dot,
    Stack,
    MaskedSoftmax,
    WeightedSum,
    Sum,
    Mean,
    Bce,
}

#[derive(Clone, Debug)]
enum Op {
    Input,
    Param,
    Gather { table: NodeId, row: usize },
    Concat(Vec<NodeId>),
    Affine { w: NodeId, x: NodeId, b: Option<NodeId> },
    Tanh(NodeId),
    Sigmoid(NodeId),
    Exp(NodeId),
    LeakyRelu(NodeId, f64),
    Dot(NodeId, NodeId),
    Stack(Vec<NodeId>),
    MaskedSoftmax { logits: NodeId, mask: Vec<bool> },
    WeightedSum { weights: NodeId, items: Vec<NodeId> },
    Sum(Vec<NodeId>),
    Mean(Vec<NodeId>),
    Bce { pred: NodeId, labels: Vec<f64> },
}

impl Op {
    fn kind(&self) -> OpKind {
        match self {
            Op::Input => OpKind::Input,
            Op::Param => OpKind::Param,
            Op::Gather { .. } => OpKind::Gather,
            Op::Concat(_) => OpKind::Concat,
            Op::Affine { .. } => OpKind::Affine,
            Op::Tanh(_) => OpKind::Tanh,
            Op::Sigmoid(_) => OpKind::Sigmoid,
            Op::Exp(_) => OpKind::Exp,
            Op::LeakyRelu(..) => OpKind::LeakyRelu,
            Op::Dot(..) => OpKind::Dot,
            Op::Stack(_) => OpKind::Stack,
            Op::MaskedSoftmax { .. } => OpKind::MaskedSoftmax,
            Op::WeightedSum { .. } => OpKind::WeightedSum,
            Op::Sum(_) => OpKind::Sum,
            Op::Mean(_) => OpKind::Mean,
            Op::Bce { .. } => OpKind::Bce,
        }
    }
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    value: DenseArray,
}

/// Append-only computation record.
#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: HashMap<ParamId, NodeId>,
    fault: Option<OpKind>,
}

/// Adjoints of every node on a tape after one backward pass.
#[derive(Clone, Debug)]
pub struct Gradients {
    nodes: Vec<Vec<f64>>,
    params: BTreeMap<ParamId, NodeId>,
}

impl Gradients {
    pub fn node(&self, id: NodeId) -> &[f64] {
        &self.nodes[id.0]
    }

    /// Gradient of a parameter leaf; `None` if the parameter never entered the tape.
    pub fn param(&self, id: ParamId) -> Option<&[f64]> {
        self.params.get(&id).map(|n| self.nodes[n.0].as_slice())
    }

    pub fn into_param_grads(self) -> ParamGrads {
        let mut nodes = self.nodes;
        let mut out = ParamGrads::default();
        for (pid, nid) in self.params {
            out.insert(pid, std::mem::take(&mut nodes[nid.0]));
        }
        out
    }
}

fn shape_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Shape(msg.into()))
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &DenseArray {
        &self.nodes[id.0].value
    }

    pub fn kind(&self, id: NodeId) -> OpKind {
        self.nodes[id.0].op.kind()
    }

    /// Doubles the vector-Jacobian product of `kind`. Used to check that the
    /// gradient checker catches a broken rule.
    #[doc(hidden)]
    pub fn corrupt_vjp(&mut self, kind: OpKind) {
        self.fault = Some(kind);
    }

    fn push(&mut self, op: Op, value: DenseArray) -> Result<NodeId> {
        if !value.is_finite() {
            return Err(Error::Numeric(format!("{:?} produced a non-finite value", op.kind())));
        }
        self.nodes.push(Node { op, value });
        Ok(NodeId(self.nodes.len() - 1))
    }

    fn check(&self, id: NodeId) -> Result<&DenseArray> {
        self.nodes
            .get(id.0)
            .map(|n| &n.value)
            .ok_or_else(|| Error::Contract(format!("node {} is not on this tape", id.0)))
    }

    fn vector_len(&self, id: NodeId, what: &str) -> Result<usize> {
        let v = self.check(id)?;
        if v.rank() != 1 {
            return shape_err(format!("{what} expects a vector, got shape {:?}", v.shape()));
        }
        Ok(v.len())
    }

    /// A constant leaf.
    pub fn input(&mut self, value: DenseArray) -> NodeId {
        self.push(Op::Input, value).expect("constant inputs must be finite")
    }

    /// The leaf holding parameter `id`; created on first use.
    pub fn param(&mut self, store: &ParameterStore, id: ParamId) -> NodeId {
        if let Some(&n) = self.params.get(&id) {
            return n;
        }
        let value = store.value(id).clone();
        let n = self.push(Op::Param, value).expect("parameters must be finite");
        self.params.insert(id, n);
        n
    }

    /// Row `row` of a rank-2 table.
    pub fn gather(&mut self, table: NodeId, row: usize) -> Result<NodeId> {
        let t = self.check(table)?;
        if t.rank() != 2 {
            return shape_err(format!("gather expects a matrix, got shape {:?}", t.shape()));
        }
        let (rows, cols) = (t.shape()[0], t.shape()[1]);
        if row >= rows {
            return Err(Error::Lookup(format!("row {row} out of range for table with {rows} rows")));
        }
        let value = DenseArray::vector(t.values()[row * cols..(row + 1) * cols].to_vec());
        self.push(Op::Gather { table, row }, value)
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let mut out = Vec::new();
        for &p in parts {
            self.vector_len(p, "concat")?;
            out.extend_from_slice(self.nodes[p.0].value.values());
        }
        self.push(Op::Concat(parts.to_vec()), DenseArray::vector(out))
    }

    /// `w · x + b` with `w` of shape `[out, in]`.
    pub fn affine(&mut self, w: NodeId, x: NodeId, b: Option<NodeId>) -> Result<NodeId> {
        let wv = self.check(w)?;
        if wv.rank() != 2 {
            return shape_err(format!("affine weight must be a matrix, got {:?}", wv.shape()));
        }
        let (rows, cols) = (wv.shape()[0], wv.shape()[1]);
        let n = self.vector_len(x, "affine")?;
        if n != cols {
            return shape_err(format!("affine weight {rows}x{cols} applied to length {n}"));
        }
        let mut out = match b {
            Some(b) => {
                let len = self.vector_len(b, "affine bias")?;
                if len != rows {
                    return shape_err(format!("affine bias length {len}, expected {rows}"));
                }
                self.nodes[b.0].value.values().to_vec()
            }
            None => vec![0.0; rows],
        };
        let wv = self.nodes[w.0].value.values();
        let xv = self.nodes[x.0].value.values();
        for (o, acc) in out.iter_mut().enumerate() {
            let row = &wv[o * cols..(o + 1) * cols];
            *acc += row.iter().zip(xv).map(|(a, b)| a * b).sum::<f64>();
        }
        self.push(Op::Affine { w, x, b }, DenseArray::vector(out))
    }

    fn unary(&mut self, x: NodeId, op: Op, f: impl Fn(f64) -> f64) -> Result<NodeId> {
        let v = self.check(x)?;
        let values = v.values().iter().map(|&a| f(a)).collect();
        let value = DenseArray::new(v.shape().to_vec(), values)?;
        self.push(op, value)
    }

    pub fn tanh(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary(x, Op::Tanh(x), f64::tanh)
    }

    pub fn sigmoid(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary(x, Op::Sigmoid(x), sigmoid)
    }

    pub fn exp(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary(x, Op::Exp(x), f64::exp)
    }

    pub fn leaky_relu(&mut self, x: NodeId, slope: f64) -> Result<NodeId> {
        self.unary(x, Op::LeakyRelu(x, slope), |a| if a > 0.0 { a } else { slope * a })
    }

    /// Inner product of two equal-length vectors; a scalar.
    pub fn dot(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let n = self.vector_len(a, "dot")?;
        let m = self.vector_len(b, "dot")?;
        if n != m {
            return shape_err(format!("dot of lengths {n} and {m}"));
        }
        let s = self.nodes[a.0]
            .value
            .values()
            .iter()
            .zip(self.nodes[b.0].value.values())
            .map(|(x, y)| x * y)
            .sum();
        self.push(Op::Dot(a, b), DenseArray::scalar(s))
    }

    /// Packs one-element nodes into a vector.
    pub fn stack(&mut self, scalars: &[NodeId]) -> Result<NodeId> {
        let mut out = Vec::with_capacity(scalars.len());
        for &s in scalars {
            match self.check(s)?.item() {
                Some(v) => out.push(v),
                None => return shape_err("stack expects one-element inputs"),
            }
        }
        self.push(Op::Stack(scalars.to_vec()), DenseArray::vector(out))
    }

    /// Softmax over the positions where `mask` is true; other positions are 0.
    pub fn masked_softmax(&mut self, logits: NodeId, mask: &[bool]) -> Result<NodeId> {
        let n = self.vector_len(logits, "masked_softmax")?;
        if mask.len() != n {
            return shape_err(format!("mask length {} for {n} logits", mask.len()));
        }
        if !mask.iter().any(|&m| m) {
            return Err(Error::Contract("masked softmax over an empty set".into()));
        }
        let v = self.nodes[logits.0].value.values();
        let max = v
            .iter()
            .zip(mask)
            .filter(|(_, &m)| m)
            .map(|(x, _)| *x)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut out: Vec<f64> = v
            .iter()
            .zip(mask)
            .map(|(x, &m)| if m { (x - max).exp() } else { 0.0 })
            .collect();
        let total: f64 = out.iter().sum();
        for o in &mut out {
            *o /= total;
        }
        self.push(
            Op::MaskedSoftmax {
                logits,
                mask: mask.to_vec(),
            },
            DenseArray::vector(out),
        )
    }

    /// `Σ weights[k] · items[k]`.
    pub fn weighted_sum(&mut self, weights: NodeId, items: &[NodeId]) -> Result<NodeId> {
        let n = self.vector_len(weights, "weighted_sum")?;
        if n != items.len() || n == 0 {
            return shape_err(format!("{n} weights for {} items", items.len()));
        }
        let k = self.vector_len(items[0], "weighted_sum")?;
        let mut out = vec![0.0; k];
        for (j, &it) in items.iter().enumerate() {
            if self.vector_len(it, "weighted_sum")? != k {
                return shape_err("weighted_sum items differ in length");
            }
            let w = self.nodes[weights.0].value.values()[j];
            for (o, v) in out.iter_mut().zip(self.nodes[it.0].value.values()) {
                *o += w * v;
            }
        }
        self.push(
            Op::WeightedSum {
                weights,
                items: items.to_vec(),
            },
            DenseArray::vector(out),
        )
    }

    fn reduce(&mut self, items: &[NodeId], scale: f64, op: Op) -> Result<NodeId> {
        if items.is_empty() {
            return shape_err("reduction over no inputs");
        }
        let shape = self.check(items[0])?.shape().to_vec();
        let mut out = vec![0.0; self.nodes[items[0].0].value.len()];
        for &it in items {
            let v = self.check(it)?;
            if v.shape() != shape.as_slice() {
                return shape_err("reduction inputs differ in shape");
            }
            for (o, x) in out.iter_mut().zip(v.values()) {
                *o += x;
            }
        }
        for o in &mut out {
            *o *= scale;
        }
        self.push(op, DenseArray::new(shape, out)?)
    }

    pub fn sum(&mut self, items: &[NodeId]) -> Result<NodeId> {
        self.reduce(items, 1.0, Op::Sum(items.to_vec()))
    }

    pub fn mean(&mut self, items: &[NodeId]) -> Result<NodeId> {
        self.reduce(items, 1.0 / items.len().max(1) as f64, Op::Mean(items.to_vec()))
    }

    /// Mean binary cross-entropy of probabilities `pred` against `labels`,
    /// with probabilities clamped to `[BCE_CLAMP, 1 - BCE_CLAMP]`.
    pub fn bce(&mut self, pred: NodeId, labels: &[f64]) -> Result<NodeId> {
        let n = self.vector_len(pred, "bce")?;
        if labels.is_empty() {
            return Err(Error::Contract("cross-entropy over an empty batch".into()));
        }
        if labels.len() != n {
            return shape_err(format!("{n} predictions for {} labels", labels.len()));
        }
        let p = self.nodes[pred.0].value.values();
        let loss = -p
            .iter()
            .zip(labels)
            .map(|(&p, &y)| {
                let q = p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
                y * q.ln() + (1.0 - y) * (1.0 - q).ln()
            })
            .sum::<f64>()
            / n as f64;
        self.push(
            Op::Bce {
                pred,
                labels: labels.to_vec(),
            },
            DenseArray::scalar(loss),
        )
    }

    /// Propagates adjoints from the scalar `loss` back to every node.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        let lv = self.check(loss)?;
        if lv.len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                lv.shape()
            )));
        }
        let mut grads: Vec<Vec<f64>> = Vec::with_capacity(self.nodes.len());
        let mut reached = vec![false; self.nodes.len()];
        for node in &self.nodes {
            grads.push(vec![0.0; node.value.len()]);
        }
        grads[loss.0][0] = 1.0;
        reached[loss.0] = true;

        for i in (0..=loss.0).rev() {
            if !reached[i] {
                continue;
            }
            let node = &self.nodes[i];
            let mut g = std::mem::take(&mut grads[i]);
            if self.fault == Some(node.op.kind()) {
                for v in &mut g {
                    *v *= 2.0;
                }
            }
            let y = node.value.values();
            let val = |id: NodeId| self.nodes[id.0].value.values();
            let mut mark = |id: NodeId| reached[id.0] = true;

            match &node.op {
                Op::Input | Op::Param => {}
                Op::Gather { table, row } => {
                    mark(*table);
                    let k = g.len();
                    let dst = &mut grads[table.0][row * k..(row + 1) * k];
                    for (d, gv) in dst.iter_mut().zip(&g) {
                        *d += gv;
                    }
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for p in parts {
                        mark(*p);
                        let dst = &mut grads[p.0];
                        let len = dst.len();
                        for (d, gv) in dst.iter_mut().zip(&g[off..off + len]) {
                            *d += gv;
                        }
                        off += len;
                    }
                }
                Op::Affine { w, x, b } => {
                    mark(*w);
                    mark(*x);
                    let wv = val(*w);
                    let xv = val(*x);
                    let cols = xv.len();
                    {
                        let gw = &mut grads[w.0];
                        for (o, go) in g.iter().enumerate() {
                            if *go == 0.0 {
                                continue;
                            }
                            for (d, xi) in gw[o * cols..(o + 1) * cols].iter_mut().zip(xv) {
                                *d += go * xi;
                            }
                        }
                    }
                    {
                        let gx = &mut grads[x.0];
                        for (o, go) in g.iter().enumerate() {
                            if *go == 0.0 {
                                continue;
                            }
                            for (d, wi) in gx.iter_mut().zip(&wv[o * cols..(o + 1) * cols]) {
                                *d += go * wi;
                            }
                        }
                    }
                    if let Some(b) = b {
                        mark(*b);
                        for (d, gv) in grads[b.0].iter_mut().zip(&g) {
                            *d += gv;
                        }
                    }
                }
                Op::Tanh(x) => {
                    mark(*x);
                    for ((d, gv), yv) in grads[x.0].iter_mut().zip(&g).zip(y) {
                        *d += gv * (1.0 - yv * yv);
                    }
                }
                Op::Sigmoid(x) => {
                    mark(*x);
                    for ((d, gv), yv) in grads[x.0].iter_mut().zip(&g).zip(y) {
                        *d += gv * yv * (1.0 - yv);
                    }
                }
                Op::Exp(x) => {
                    mark(*x);
                    for ((d, gv), yv) in grads[x.0].iter_mut().zip(&g).zip(y) {
                        *d += gv * yv;
                    }
                }
                Op::LeakyRelu(x, slope) => {
                    mark(*x);
                    let xv = val(*x);
                    for ((d, gv), xi) in grads[x.0].iter_mut().zip(&g).zip(xv) {
                        *d += if *xi > 0.0 { *gv } else { gv * slope };
                    }
                }
                Op::Dot(a, b) => {
                    mark(*a);
                    mark(*b);
                    let (av, bv) = (val(*a).to_vec(), val(*b).to_vec());
                    for (d, bi) in grads[a.0].iter_mut().zip(&bv) {
                        *d += g[0] * bi;
                    }
                    for (d, ai) in grads[b.0].iter_mut().zip(&av) {
                        *d += g[0] * ai;
                    }
                }
                Op::Stack(items) => {
                    for (k, it) in items.iter().enumerate() {
                        mark(*it);
                        grads[it.0][0] += g[k];
                    }
                }
                Op::MaskedSoftmax { logits, mask } => {
                    mark(*logits);
                    let inner: f64 = y.iter().zip(&g).map(|(a, b)| a * b).sum();
                    for (j, d) in grads[logits.0].iter_mut().enumerate() {
                        if mask[j] {
                            *d += y[j] * (g[j] - inner);
                        }
                    }
                }
                Op::WeightedSum { weights, items } => {
                    mark(*weights);
                    let wv = val(*weights).to_vec();
                    for (j, it) in items.iter().enumerate() {
                        mark(*it);
                        let dw: f64 = val(*it).iter().zip(&g).map(|(a, b)| a * b).sum();
                        grads[weights.0][j] += dw;
                        for (d, gv) in grads[it.0].iter_mut().zip(&g) {
                            *d += wv[j] * gv;
                        }
                    }
                }
                Op::Sum(items) | Op::Mean(items) => {
                    let scale = if matches!(node.op, Op::Mean(_)) {
                        1.0 / items.len() as f64
                    } else {
                        1.0
                    };
                    for it in items {
                        mark(*it);
                        for (d, gv) in grads[it.0].iter_mut().zip(&g) {
                            *d += gv * scale;
                        }
                    }
                }
                Op::Bce { pred, labels } => {
                    mark(*pred);
                    let pv = val(*pred).to_vec();
                    let n = labels.len() as f64;
                    for ((d, p), yl) in grads[pred.0].iter_mut().zip(&pv).zip(labels) {
                        if *p < BCE_CLAMP || *p > 1.0 - BCE_CLAMP {
                            continue;
                        }
                        *d += -g[0] / n * (yl / p - (1.0 - yl) / (1.0 - p));
                    }
                }
            }
            grads[i] = g;
        }

        Ok(Gradients {
            nodes: grads,
            params: self.params.iter().map(|(p, n)| (*p, *n)).collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_of_zero() {
        let mut t = Tape::new();
        let x = t.input(DenseArray::scalar(0.0));
        let y = t.sigmoid(x).unwrap();
        assert_eq!(t.value(y).item(), Some(0.5));
    }

    #[test]
    fn concat_lengths_add() {
        let mut t = Tape::new();
        let a = t.input(DenseArray::vector(vec![1.0; 4]));
        let b = t.input(DenseArray::vector(vec![2.0; 4]));
        let c = t.concat(&[a, b]).unwrap();
        assert_eq!(t.value(c).shape(), &[8]);
    }

    #[test]
    fn symmetric_softmax() {
        let mut t = Tape::new();
        let x = t.input(DenseArray::vector(vec![1.0, 1.0]));
        let y = t.masked_softmax(x, &[true, true]).unwrap();
        assert_eq!(t.value(y).values(), &[0.5, 0.5]);
    }

    #[test]
    fn masked_positions_get_zero_weight() {
        let mut t = Tape::new();
        let x = t.input(DenseArray::vector(vec![3.0, -1.0, 5.0]));
        let y = t.masked_softmax(x, &[true, false, true]).unwrap();
        let v = t.value(y).values();
        assert_eq!(v[1], 0.0);
        assert!((v[0] + v[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fully_masked_softmax_is_an_error() {
        let mut t = Tape::new();
        let x = t.input(DenseArray::vector(vec![1.0, 2.0]));
        assert!(matches!(t.masked_softmax(x, &[false, false]), Err(Error::Contract(_))));
    }

    #[test]
    fn shape_errors() {
        let mut t = Tape::new();
        let w = t.input(DenseArray::matrix(2, 3, vec![0.0; 6]).unwrap());
        let x = t.input(DenseArray::vector(vec![0.0; 2]));
        assert!(matches!(t.affine(w, x, None), Err(Error::Shape(_))));
        assert!(matches!(t.dot(x, w), Err(Error::Shape(_))));
    }

    #[test]
    fn overflow_is_a_numeric_error() {
        let mut t = Tape::new();
        let x = t.input(DenseArray::scalar(1000.0));
        assert!(matches!(t.exp(x), Err(Error::Numeric(_))));
    }

    #[test]
    fn sigmoid_gradient_at_zero() {
        let mut t = Tape::new();
        let w = t.input(DenseArray::scalar(0.0));
        let y = t.sigmoid(w).unwrap();
        let g = t.backward(y).unwrap();
        assert_eq!(g.node(w), &[0.25]);
    }

    #[test]
    fn unused_parameter_has_zero_gradient() {
        let mut store = ParameterStore::new();
        let used = store.add("used", DenseArray::vector(vec![0.3, -0.2])).unwrap();
        let unused = store.add("unused", DenseArray::vector(vec![1.0])).unwrap();
        let mut t = Tape::new();
        let u = t.param(&store, used);
        let _ = t.param(&store, unused);
        let s = t.sum(&[u]).unwrap();
        let loss = t.dot(s, u).unwrap();
        let g = t.backward(loss).unwrap();
        assert_eq!(g.param(unused), Some(&[0.0][..]));
        assert_eq!(g.param(used), Some(&[0.6, -0.4][..]));
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut t = Tape::new();
        let x = t.input(DenseArray::vector(vec![1.0, 2.0]));
        assert!(matches!(t.backward(x), Err(Error::Contract(_))));
    }

    #[test]
    fn bce_values() {
        let mut t = Tape::new();
        let p = t.input(DenseArray::vector(vec![0.5, 0.5]));
        let l = t.bce(p, &[1.0, 0.0]).unwrap();
        assert!((t.value(l).item().unwrap() - std::f64::consts::LN_2).abs() < 1e-12);

        let p = t.input(DenseArray::vector(vec![0.9, 0.2]));
        let l = t.bce(p, &[1.0, 0.0]).unwrap();
        let expected = -(0.9f64.ln() + 0.8f64.ln()) / 2.0;
        assert!((t.value(l).item().unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.164252).abs() < 1e-6);
    }

    #[test]
    fn bce_at_perfect_prediction_hits_the_clamp_floor() {
        let mut t = Tape::new();
        let p = t.input(DenseArray::vector(vec![1.0, 0.0]));
        let l = t.bce(p, &[1.0, 0.0]).unwrap();
        let v = t.value(l).item().unwrap();
        assert!((v - (-(1.0 - BCE_CLAMP).ln())).abs() < 1e-15);
        assert!(v > 0.0 && v < 2e-7);
        assert!(matches!(t.bce(p, &[]), Err(Error::Contract(_))));
    }

    #[test]
    fn repeated_input_accumulates() {
        let mut t = Tape::new();
        let x = t.input(DenseArray::vector(vec![1.5, -2.0]));
        let y = t.dot(x, x).unwrap();
        let g = t.backward(y).unwrap();
        assert_eq!(g.node(x), &[3.0, -4.0]);
    }
}

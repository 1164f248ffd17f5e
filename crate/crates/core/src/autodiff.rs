//! Reverse-mode differentiation over a dynamically built graph.
//!
//! Ops are evaluated eagerly as they are added, so building the graph *is*
//! the forward pass. A fresh [`Graph`] is built for every training step,
//! which makes recurrent unrolling over arbitrary sequence lengths trivial.
//! Nodes are stored in creation order, which is already a topological order;
//! [`Graph::backward`] walks it in reverse and visits every node once.
//!
//! Trainable tensors live in a [`ParamStore`] and are bound into a graph
//! with [`Graph::bind`]. After `backward`, [`Graph::param_grads`] returns
//! d(loss)/d(param) for every bound parameter.

use std::collections::HashMap;
use std::sync::Arc;

use crate::tensor::kernels::{self, ConvGeom};
use crate::tensor::{conv_geom, Rng};
use crate::{Error, Result, Scalar, Tensor};

/// Sentinel in [`Graph::gather`] indices for "no source element" (yields 0).
pub const GATHER_ZERO: usize = usize::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Matmul(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Div(NodeId, NodeId),
    Scale(NodeId, f64),
    AddScalar(NodeId),
    ScaleBy(NodeId, NodeId),
    Relu(NodeId),
    Sigmoid(NodeId),
    Exp(NodeId),
    Softmax(NodeId),
    Conv2d {
        input: NodeId,
        kernel: NodeId,
        geom: ConvGeom,
    },
    AddBias(NodeId, NodeId),
    Reshape(NodeId),
    Sum(NodeId),
    Mean(NodeId),
    Gather(NodeId, Arc<[usize]>),
    Slice(NodeId, usize),
    Concat(Vec<NodeId>),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Matmul(..) => "matmul",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Div(..) => "div",
            Op::Scale(..) => "scale",
            Op::AddScalar(..) => "add_scalar",
            Op::ScaleBy(..) => "scale_by",
            Op::Relu(..) => "relu",
            Op::Sigmoid(..) => "sigmoid",
            Op::Exp(..) => "exp",
            Op::Softmax(..) => "softmax",
            Op::Conv2d { .. } => "conv2d",
            Op::AddBias(..) => "add_bias",
            Op::Reshape(..) => "reshape",
            Op::Sum(..) => "sum",
            Op::Mean(..) => "mean",
            Op::Gather(..) => "gather",
            Op::Slice(..) => "slice",
            Op::Concat(..) => "concat",
        }
    }
}

struct Node<T> {
    op: Op,
    value: Tensor<T>,
    needs_grad: bool,
}

/// One named trainable tensor, with an optional lower bound enforced after
/// every optimizer step.
#[derive(Clone, Debug)]
pub struct ParamEntry<T: Scalar = f32> {
    pub name: String,
    pub value: Tensor<T>,
    pub min: Option<f64>,
}

/// Insertion-ordered collection of uniquely named parameters.
#[derive(Clone, Debug, Default)]
pub struct ParamStore<T: Scalar = f32> {
    entries: Vec<ParamEntry<T>>,
    index: HashMap<String, usize>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self {
            entries: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor<T>) -> Result<()> {
        self.insert_bounded(name, value, None)
    }

    pub fn insert_bounded(&mut self, name: impl Into<String>, value: Tensor<T>, min: Option<f64>) -> Result<()> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::DuplicateParameter(name));
        }
        self.index.insert(name.clone(), self.entries.len());
        self.entries.push(ParamEntry { name, value, min });
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<T>> {
        self.index
            .get(name)
            .map(|&i| &self.entries[i].value)
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))
    }

    /// Replaces a parameter's value; the shape must not change.
    pub fn set(&mut self, name: &str, value: Tensor<T>) -> Result<()> {
        let i = *self
            .index
            .get(name)
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))?;
        let slot = &mut self.entries[i].value;
        if slot.shape() != value.shape() {
            return Err(Error::shape("set parameter", slot.shape(), value.shape()));
        }
        *slot = value;
        Ok(())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &ParamEntry<T>> {
        self.entries.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut ParamEntry<T>> {
        self.entries.iter_mut()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.name.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalars across all parameters.
    pub fn num_scalars(&self) -> usize {
        self.entries.iter().map(|e| e.value.len()).sum()
    }

    /// Raises every bounded parameter to its minimum where it fell below.
    pub fn apply_bounds(&mut self) {
        for e in &mut self.entries {
            if let Some(min) = e.min {
                let min = T::cast(min);
                if e.value.data().iter().any(|&x| x < min) {
                    for x in e.value.data_mut() {
                        if *x < min {
                            *x = min;
                        }
                    }
                }
            }
        }
    }

    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        ParamStore {
            entries: self
                .entries
                .iter()
                .map(|e| ParamEntry {
                    name: e.name.clone(),
                    value: e.value.cast(),
                    min: e.min,
                })
                .collect(),
            index: self.index.clone(),
        }
    }

    /// Merges `other` under `prefix.` names.
    pub fn extend_prefixed(&mut self, prefix: &str, other: ParamStore<T>) -> Result<()> {
        for e in other.entries {
            self.insert_bounded(format!("{prefix}.{}", e.name), e.value, e.min)?;
        }
        Ok(())
    }
}

/// A dynamically built computation graph.
pub struct Graph<T: Scalar> {
    nodes: Vec<Node<T>>,
    params: Vec<(String, NodeId)>,
    param_index: HashMap<String, NodeId>,
    feeds: HashMap<String, Tensor<T>>,
    grads: Vec<Option<Vec<T>>>,
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Self::with_feeds(HashMap::new())
    }

    /// A graph whose placeholders are resolved from `feeds`.
    pub fn with_feeds(feeds: HashMap<String, Tensor<T>>) -> Self {
        Self {
            nodes: Vec::new(),
            params: Vec::new(),
            param_index: HashMap::new(),
            feeds,
            grads: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, value: Tensor<T>, needs_grad: bool) -> NodeId {
        self.nodes.push(Node { op, value, needs_grad });
        NodeId(self.nodes.len() - 1)
    }

    fn derived(&mut self, op: Op, parents: &[NodeId], value: Tensor<T>) -> NodeId {
        let needs_grad = parents.iter().any(|p| self.nodes[p.0].needs_grad);
        self.push(op, value, needs_grad)
    }

    pub fn value(&self, id: NodeId) -> &Tensor<T> {
        &self.nodes[id.0].value
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        self.nodes[id.0].value.shape()
    }

    pub fn constant(&mut self, value: Tensor<T>) -> NodeId {
        self.push(Op::Leaf, value, false)
    }

    /// Placeholder resolved from the graph's feeds.
    pub fn input(&mut self, name: &str) -> Result<NodeId> {
        let value = self
            .feeds
            .get(name)
            .cloned()
            .ok_or_else(|| Error::MissingFeed(name.to_string()))?;
        Ok(self.constant(value))
    }

    /// Registers a trainable leaf.
    pub fn param(&mut self, name: impl Into<String>, value: Tensor<T>) -> Result<NodeId> {
        let name = name.into();
        if self.param_index.contains_key(&name) {
            return Err(Error::DuplicateParameter(name));
        }
        let id = self.push(Op::Leaf, value, true);
        self.param_index.insert(name.clone(), id);
        self.params.push((name, id));
        Ok(id)
    }

    /// Registers every parameter of `store` as a trainable leaf.
    pub fn bind(&mut self, store: &ParamStore<T>) -> Result<()> {
        for e in store.iter() {
            self.param(e.name.clone(), e.value.clone())?;
        }
        Ok(())
    }

    /// Node of a bound parameter.
    pub fn p(&self, name: &str) -> Result<NodeId> {
        self.param_index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))
    }

    fn same_shape(&self, op: &'static str, a: NodeId, b: NodeId) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::shape(op, self.shape(a), self.shape(b)));
        }
        Ok(())
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).matmul(self.value(b))?;
        Ok(self.derived(Op::Matmul(a, b), &[a, b], v))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("add", a, b)?;
        let v = self.value(a).add(self.value(b))?;
        Ok(self.derived(Op::Add(a, b), &[a, b], v))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("sub", a, b)?;
        let v = self.value(a).sub(self.value(b))?;
        Ok(self.derived(Op::Sub(a, b), &[a, b], v))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("mul", a, b)?;
        let v = self.value(a).mul(self.value(b))?;
        Ok(self.derived(Op::Mul(a, b), &[a, b], v))
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("div", a, b)?;
        let v = self.value(a).div(self.value(b))?;
        Ok(self.derived(Op::Div(a, b), &[a, b], v))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = self.value(a).scale(T::cast(c));
        self.derived(Op::Scale(a, c), &[a], v)
    }

    pub fn add_scalar(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = self.value(a).add_scalar(T::cast(c));
        self.derived(Op::AddScalar(a), &[a], v)
    }

    /// `x · s` for a one-element node `s`.
    pub fn scale_by(&mut self, x: NodeId, s: NodeId) -> Result<NodeId> {
        let s_val = self.value(s).item()?;
        let v = self.value(x).scale(s_val);
        Ok(self.derived(Op::ScaleBy(x, s), &[x, s], v))
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).relu();
        self.derived(Op::Relu(a), &[a], v)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).sigmoid();
        self.derived(Op::Sigmoid(a), &[a], v)
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).exp();
        self.derived(Op::Exp(a), &[a], v)
    }

    /// Softmax over all elements.
    pub fn softmax(&mut self, a: NodeId) -> NodeId {
        let x = self.value(a);
        let max = x.data().iter().copied().fold(T::neg_infinity(), T::max);
        let e = x.map(|v| (v - max).exp());
        let total = e.sum();
        let v = e.map(|v| v / total);
        self.derived(Op::Softmax(a), &[a], v)
    }

    /// Valid-padding cross-correlation, see [`Tensor::conv2d`].
    pub fn conv2d(&mut self, input: NodeId, kernel: NodeId, stride: usize) -> Result<NodeId> {
        let geom = conv_geom(self.shape(input), self.shape(kernel), stride)?;
        let v = self.value(input).conv2d(self.value(kernel), stride)?;
        Ok(self.derived(Op::Conv2d { input, kernel, geom }, &[input, kernel], v))
    }

    /// Adds a bias vector along the trailing axis.
    pub fn add_bias(&mut self, x: NodeId, bias: NodeId) -> Result<NodeId> {
        let width = *self.shape(x).last().unwrap_or(&1);
        if self.shape(bias) != [width] {
            return Err(Error::shape("add_bias", self.shape(x), self.shape(bias)));
        }
        let b = self.value(bias).data().to_vec();
        let mut out = self.value(x).to_vec();
        for row in out.chunks_exact_mut(width) {
            for (o, &bv) in row.iter_mut().zip(&b) {
                *o = *o + bv;
            }
        }
        let v = Tensor::from_parts(self.shape(x).to_vec(), out);
        Ok(self.derived(Op::AddBias(x, bias), &[x, bias], v))
    }

    pub fn reshape(&mut self, a: NodeId, shape: &[usize]) -> Result<NodeId> {
        let v = self.value(a).reshape(shape)?;
        Ok(self.derived(Op::Reshape(a), &[a], v))
    }

    pub fn flatten(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).flatten();
        self.derived(Op::Reshape(a), &[a], v)
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let v = Tensor::scalar(self.value(a).sum());
        self.derived(Op::Sum(a), &[a], v)
    }

    pub fn mean(&mut self, a: NodeId) -> NodeId {
        let v = Tensor::scalar(self.value(a).mean());
        self.derived(Op::Mean(a), &[a], v)
    }

    /// `out[i] = src.flat[index[i]]`, or 0 where `index[i] == GATHER_ZERO`.
    pub fn gather(&mut self, src: NodeId, index: Arc<[usize]>, shape: &[usize]) -> Result<NodeId> {
        if shape.iter().product::<usize>() != index.len() {
            return Err(Error::InvalidShape {
                shape: shape.to_vec(),
                reason: format!("gather index has {} entries", index.len()),
            });
        }
        let s = self.value(src).data();
        if let Some(&bad) = index.iter().find(|&&i| i != GATHER_ZERO && i >= s.len()) {
            return Err(Error::InvalidShape {
                shape: self.shape(src).to_vec(),
                reason: format!("gather index {bad} out of range"),
            });
        }
        let out = index
            .iter()
            .map(|&i| if i == GATHER_ZERO { T::zero() } else { s[i] })
            .collect();
        let v = Tensor::new(shape, out)?;
        Ok(self.derived(Op::Gather(src, index), &[src], v))
    }

    /// Flat elements `start..start + len` as a vector.
    pub fn slice(&mut self, src: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let s = self.value(src).data();
        if len == 0 || start + len > s.len() {
            return Err(Error::InvalidShape {
                shape: self.shape(src).to_vec(),
                reason: format!("slice {start}..{} out of range", start + len),
            });
        }
        let v = Tensor::vector(s[start..start + len].to_vec());
        Ok(self.derived(Op::Slice(src, start), &[src], v))
    }

    /// Flat concatenation into a vector.
    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::Empty("concat of no nodes"));
        }
        let mut out = Vec::new();
        for &p in parts {
            out.extend_from_slice(self.value(p).data());
        }
        let v = Tensor::vector(out);
        Ok(self.derived(Op::Concat(parts.to_vec()), parts, v))
    }

    /// Elementwise multiplication by a fixed inverted-dropout mask.
    pub fn dropout(&mut self, x: NodeId, rate: f64, rng: &mut Rng) -> Result<NodeId> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidConfig(format!("dropout rate {rate} not in [0, 1)")));
        }
        if rate == 0.0 {
            return Ok(x);
        }
        let keep = T::cast(1.0 / (1.0 - rate));
        let shape = self.shape(x).to_vec();
        let mask = Tensor::from_fn(&shape, |_| if rng.bernoulli(rate) { T::zero() } else { keep })?;
        let m = self.constant(mask);
        self.mul(x, m)
    }

    /// Sum of squared differences between `pred` and a constant `target`.
    pub fn sum_squared_error(&mut self, pred: NodeId, target: &Tensor<T>) -> Result<NodeId> {
        let t = self.constant(target.clone());
        let d = self.sub(pred, t)?;
        let sq = self.mul(d, d)?;
        Ok(self.sum(sq))
    }

    /// Populates gradients of the scalar `loss` with respect to every node
    /// that depends on a parameter. Only leaf gradients are retained.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(Error::NonScalarLoss(lv.shape().to_vec()));
        }
        let n = self.nodes.len();
        let mut grads: Vec<Option<Vec<T>>> = vec![None; n];
        grads[loss.0] = Some(vec![T::one()]);

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else {
                continue;
            };
            if matches!(node.op, Op::Leaf) {
                grads[i] = Some(g);
                continue;
            }
            self.propagate(i, &g, &mut grads);
        }
        // Intermediate gradients were consumed; only leaves remain.
        self.grads = grads;
        Ok(())
    }

    fn propagate(&self, i: usize, g: &[T], grads: &mut [Option<Vec<T>>]) {
        let nodes = &self.nodes;
        let val = |id: NodeId| nodes[id.0].value.data();
        let wants = |id: NodeId| nodes[id.0].needs_grad;
        fn add_into<T: Scalar>(dst: &mut [T], f: impl Fn(usize) -> T) {
            for (k, d) in dst.iter_mut().enumerate() {
                *d = *d + f(k);
            }
        }
        fn slot_of<T: Scalar>(grads: &mut [Option<Vec<T>>], id: NodeId, len: usize) -> &mut Vec<T> {
            grads[id.0].get_or_insert_with(|| vec![T::zero(); len])
        }
        macro_rules! slot {
            ($id:expr) => {
                slot_of(grads, $id, nodes[$id.0].value.len())
            };
        }

        let out = nodes[i].value.data();
        match &nodes[i].op {
            Op::Leaf => {}
            Op::Matmul(a, b) => {
                let (m, k) = (nodes[a.0].value.shape()[0], nodes[a.0].value.shape()[1]);
                let n = nodes[b.0].value.shape()[1];
                if wants(*a) {
                    let mut tmp = vec![T::zero(); m * k];
                    kernels::gemm_nt(g, val(*b), &mut tmp, m, n, k);
                    add_into(slot!(*a), |j| tmp[j]);
                }
                if wants(*b) {
                    let mut tmp = vec![T::zero(); k * n];
                    kernels::gemm_tn(val(*a), g, &mut tmp, m, k, n);
                    add_into(slot!(*b), |j| tmp[j]);
                }
            }
            Op::Add(a, b) => {
                if wants(*a) {
                    add_into(slot!(*a), |j| g[j]);
                }
                if wants(*b) {
                    add_into(slot!(*b), |j| g[j]);
                }
            }
            Op::Sub(a, b) => {
                if wants(*a) {
                    add_into(slot!(*a), |j| g[j]);
                }
                if wants(*b) {
                    add_into(slot!(*b), |j| -g[j]);
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                if wants(*a) {
                    add_into(slot!(*a), |j| g[j] * bv[j]);
                }
                if wants(*b) {
                    add_into(slot!(*b), |j| g[j] * av[j]);
                }
            }
            Op::Div(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                if wants(*a) {
                    add_into(slot!(*a), |j| g[j] / bv[j]);
                }
                if wants(*b) {
                    add_into(slot!(*b), |j| -g[j] * av[j] / (bv[j] * bv[j]));
                }
            }
            Op::Scale(a, c) => {
                let c = T::cast(*c);
                add_into(slot!(*a), |j| g[j] * c);
            }
            Op::AddScalar(a) | Op::Reshape(a) => add_into(slot!(*a), |j| g[j]),
            Op::ScaleBy(x, s) => {
                let sv = val(*s)[0];
                if wants(*x) {
                    add_into(slot!(*x), |j| g[j] * sv);
                }
                if wants(*s) {
                    let xv = val(*x);
                    let total: T = g.iter().zip(xv).map(|(&gj, &xj)| gj * xj).sum();
                    let ds = slot!(*s);
                    ds[0] = ds[0] + total;
                }
            }
            Op::Relu(a) => {
                let av = val(*a);
                add_into(slot!(*a), |j| if av[j] > T::zero() { g[j] } else { T::zero() });
            }
            Op::Sigmoid(a) => add_into(slot!(*a), |j| g[j] * out[j] * (T::one() - out[j])),
            Op::Exp(a) => add_into(slot!(*a), |j| g[j] * out[j]),
            Op::Softmax(a) => {
                let dot: T = g.iter().zip(out).map(|(&gj, &yj)| gj * yj).sum();
                add_into(slot!(*a), |j| out[j] * (g[j] - dot));
            }
            Op::Conv2d { input, kernel, geom } => {
                if wants(*kernel) {
                    let dk = kernels::conv2d_grad_kernel(val(*input), g, *geom);
                    add_into(slot!(*kernel), |j| dk[j]);
                }
                if wants(*input) {
                    kernels::conv2d_grad_input_add(val(*kernel), g, *geom, slot!(*input));
                }
            }
            Op::AddBias(x, b) => {
                if wants(*x) {
                    add_into(slot!(*x), |j| g[j]);
                }
                if wants(*b) {
                    let db = slot!(*b);
                    let width = db.len();
                    for row in g.chunks_exact(width) {
                        for (d, &gv) in db.iter_mut().zip(row) {
                            *d = *d + gv;
                        }
                    }
                }
            }
            Op::Sum(a) => {
                let g0 = g[0];
                add_into(slot!(*a), |_| g0);
            }
            Op::Mean(a) => {
                let g0 = g[0] / T::cast(nodes[a.0].value.len() as f64);
                add_into(slot!(*a), |_| g0);
            }
            Op::Gather(src, index) => {
                let ds = slot!(*src);
                for (&ix, &gv) in index.iter().zip(g) {
                    if ix != GATHER_ZERO {
                        ds[ix] = ds[ix] + gv;
                    }
                }
            }
            Op::Slice(src, start) => {
                let ds = slot!(*src);
                for (d, &gv) in ds[*start..*start + g.len()].iter_mut().zip(g) {
                    *d = *d + gv;
                }
            }
            Op::Concat(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let len = nodes[p.0].value.len();
                    if wants(p) {
                        add_into(slot!(p), |j| g[offset + j]);
                    }
                    offset += len;
                }
            }
        }
    }

    /// Gradient of the last `backward` loss with respect to a leaf.
    pub fn grad(&self, id: NodeId) -> Option<Tensor<T>> {
        let g = self.grads.get(id.0)?.as_ref()?;
        Some(Tensor::from_parts(self.shape(id).to_vec(), g.clone()))
    }

    /// `(name, gradient)` for every bound parameter, zeros where the loss does
    /// not depend on it.
    pub fn param_grads(&self) -> Vec<(String, Tensor<T>)> {
        self.params
            .iter()
            .map(|(name, id)| {
                let g = self.grad(*id).unwrap_or_else(|| {
                    Tensor::from_parts(self.shape(*id).to_vec(), vec![T::zero(); self.value(*id).len()])
                });
                (name.clone(), g)
            })
            .collect()
    }

    /// Op names in creation order; handy when debugging model graphs.
    /// Active (`> 0`) flags of every ReLU input, in node order.
    pub fn relu_pattern(&self) -> Vec<bool> {
        let mut out = Vec::new();
        for n in &self.nodes {
            if let Op::Relu(a) = n.op {
                out.extend(self.nodes[a.0].value.data().iter().map(|&v| v > T::zero()));
            }
        }
        out
    }

    pub fn op_names(&self) -> Vec<&'static str> {
        self.nodes.iter().map(|n| n.op.name()).collect()
    }
}

/// Worst relative error per parameter from [`gradcheck`].
#[derive(Clone, Debug)]
pub struct GradcheckReport {
    pub per_param: Vec<(String, f64)>,
    pub coordinates_checked: usize,
    /// Coordinates left out because every step tried straddled a ReLU kink.
    pub kinks_skipped: usize,
}

impl GradcheckReport {
    pub fn max_error(&self) -> f64 {
        self.per_param.iter().map(|(_, e)| *e).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&(String, f64)> {
        self.per_param.iter().max_by(|a, b| a.1.total_cmp(&b.1))
    }
}

#[derive(Clone, Copy, Debug)]
pub struct GradcheckConfig {
    /// Central-difference step.
    pub eps: f64,
    /// Parameters with more elements are checked on a seeded random subset.
    pub max_coords_per_param: usize,
    pub seed: u64,
    /// When `θ ± ε` change the active set of some ReLU, the difference
    /// quotient straddles a kink; retry this many times with `ε / 10`.
    pub kink_retries: usize,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            eps: 1e-5,
            max_coords_per_param: 16,
            seed: 0,
            kink_retries: 1,
        }
    }
}

/// Error denominator floor; keeps near-zero gradients from dominating.
const GRADCHECK_FLOOR: f64 = 1e-6;

/// Compares backward gradients against central finite differences
/// `(f(θ+ε) − f(θ−ε)) / 2ε` for the parameters in `params`.
///
/// `build` receives a graph with `params` already bound and returns the
/// scalar loss node. Relative error is `|a − n| / max(|a|, |n|, 1e-6)`.
/// Coordinates whose perturbation flips a ReLU are retried with a smaller
/// step and skipped (and counted) if the flip persists.
pub fn gradcheck<F>(params: &ParamStore<f64>, cfg: GradcheckConfig, build: F) -> Result<GradcheckReport>
where
    F: Fn(&mut Graph<f64>) -> Result<NodeId>,
{
    let eval = |store: &ParamStore<f64>| -> Result<(f64, Vec<bool>)> {
        let mut g = Graph::new();
        g.bind(store)?;
        let loss = build(&mut g)?;
        Ok((g.value(loss).item()?, g.relu_pattern()))
    };

    let mut g = Graph::new();
    g.bind(params)?;
    let loss = build(&mut g)?;
    g.backward(loss)?;
    let analytic = g.param_grads();
    drop(g);

    let mut rng = Rng::new(cfg.seed);
    let mut per_param = Vec::with_capacity(analytic.len());
    let mut checked = 0;
    let mut skipped = 0;
    let mut work = params.clone();
    for (name, grad) in analytic {
        let base = params.get(&name)?.clone();
        let coords = if base.len() <= cfg.max_coords_per_param {
            (0..base.len()).collect()
        } else {
            rng.choose_distinct(base.len(), cfg.max_coords_per_param)
        };
        let mut worst = 0.0f64;
        for c in coords {
            let mut numeric = None;
            let mut eps = cfg.eps;
            for _ in 0..=cfg.kink_retries {
                let mut plus = base.clone();
                plus.data_mut()[c] += eps;
                work.set(&name, plus)?;
                let (fp, kp) = eval(&work)?;
                let mut minus = base.clone();
                minus.data_mut()[c] -= eps;
                work.set(&name, minus)?;
                let (fm, km) = eval(&work)?;
                if kp == km {
                    numeric = Some((fp - fm) / (2.0 * eps));
                    break;
                }
                eps /= 10.0;
            }
            let Some(numeric) = numeric else {
                skipped += 1;
                continue;
            };
            let a = grad.data()[c];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(GRADCHECK_FLOOR);
            worst = worst.max(err);
            checked += 1;
        }
        work.set(&name, base)?;
        per_param.push((name, worst));
    }
    Ok(GradcheckReport {
        per_param,
        coordinates_checked: checked,
        kinks_skipped: skipped,
    })
}

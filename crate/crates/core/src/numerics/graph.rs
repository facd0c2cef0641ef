//! Recording computation graph with reverse-mode differentiation.
//!
//! Nodes are appended in evaluation order, so every parent index is smaller
//! than its child's and a reverse sweep over the node list is a valid
//! reverse topological order.

use super::conv::{self, ConvDims, ConvGeom};
use super::element::matmul_rm;
use super::{Element, NumericsError, Tensor};

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Offset(Var),
    Relu(Var),
    Tanh(Var),
    Softplus(Var),
    Exp(Var),
    Log(Var),
    Sum(Var),
    Mean(Var),
    Conv2d { input: Var, weight: Var, bias: Var, geom: ConvGeom },
    ConvTranspose2d { input: Var, weight: Var, bias: Var, geom: ConvGeom },
    Reshape(Var),
    Concat { parts: Vec<Var>, axis: usize },
    Slice { input: Var, axis: usize, start: usize },
    SquaredError(Var, Var),
}

#[derive(Clone, Debug)]
struct Node<T: Element> {
    op: Op,
    value: Tensor<T>,
    /// Whether any gradient-requiring leaf flows into this node.
    tracked: bool,
}

/// A computation graph recorded during one forward evaluation.
#[derive(Clone, Debug, Default)]
pub struct Graph<T: Element = f32> {
    nodes: Vec<Node<T>>,
}

/// Adjoints of the tracked leaves after [`Graph::backward`].
#[derive(Clone, Debug)]
pub struct Gradients<T: Element = f32> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Element> Gradients<T> {
    pub fn get(&self, var: Var) -> Option<&Tensor<T>> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, var: Var) -> Option<Tensor<T>> {
        self.grads.get_mut(var.0).and_then(Option::take)
    }
}

fn is_suffix(shape: &[usize], suffix: &[usize]) -> bool {
    suffix.len() <= shape.len() && shape[shape.len() - suffix.len()..] == *suffix
}

fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

impl<T: Element> Graph<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Leaf whose gradient is reported by [`Graph::backward`].
    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.push(Op::Leaf, value, true)
    }

    /// Leaf treated as a constant by [`Graph::backward`].
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push(Op::Leaf, value, false)
    }

    pub fn value(&self, var: Var) -> &Tensor<T> {
        &self.nodes[var.0].value
    }

    pub fn shape(&self, var: Var) -> &[usize] {
        self.nodes[var.0].value.shape()
    }

    fn push(&mut self, op: Op, value: Tensor<T>, tracked: bool) -> Var {
        self.nodes.push(Node { op, value, tracked });
        Var(self.nodes.len() - 1)
    }

    fn tracked(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].tracked)
    }

    fn unary(&mut self, x: Var, op: Op, f: impl Fn(T) -> T) -> Var {
        let value = self.nodes[x.0].value.map(f);
        let tracked = self.tracked(&[x]);
        self.push(op, value, tracked)
    }

    fn mismatch(&self, op: &'static str, a: Var, b: Var) -> NumericsError {
        NumericsError::ShapeMismatch { op, lhs: self.shape(a).to_vec(), rhs: self.shape(b).to_vec() }
    }

    /// `[m,k] · [k,n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(self.mismatch("matmul", a, b));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![T::zero(); m * n];
        matmul_rm(m, k, n, self.value(a).data(), self.value(b).data(), &mut out);
        let value = Tensor::new(vec![m, n], out)?;
        let tracked = self.tracked(&[a, b]);
        Ok(self.push(Op::MatMul(a, b), value, tracked))
    }

    fn broadcast_binary(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        op: Op,
        f: impl Fn(T, T) -> T,
    ) -> Result<Var, NumericsError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if !is_suffix(sa, sb) {
            return Err(self.mismatch(name, a, b));
        }
        let rhs = self.value(b).data();
        let block = rhs.len();
        let data = self
            .value(a)
            .data()
            .chunks(block.max(1))
            .flat_map(|chunk| chunk.iter().zip(rhs).map(|(&x, &y)| f(x, y)))
            .collect();
        let value = Tensor::new(sa.to_vec(), data)?;
        let tracked = self.tracked(&[a, b]);
        Ok(self.push(op, value, tracked))
    }

    /// Elementwise sum; `b` may broadcast over the leading axes of `a`.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        self.broadcast_binary("add", a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        self.broadcast_binary("sub", a, b, Op::Sub(a, b), |x, y| x - y)
    }

    /// Elementwise product; `b` may broadcast over the leading axes of `a`.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        self.broadcast_binary("multiply", a, b, Op::Mul(a, b), |x, y| x * y)
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let c = T::lit(factor);
        self.unary(x, Op::Scale(x, factor), |v| v * c)
    }

    /// Adds a constant to every element.
    pub fn offset(&mut self, x: Var, shift: f64) -> Var {
        let c = T::lit(shift);
        self.unary(x, Op::Offset(x), |v| v + c)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.unary(x, Op::Relu(x), |v| if v > T::zero() { v } else { T::zero() })
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(x, Op::Tanh(x), T::tanh)
    }

    pub fn softplus(&mut self, x: Var) -> Var {
        self.unary(x, Op::Softplus(x), softplus)
    }

    pub fn exp(&mut self, x: Var) -> Var {
        self.unary(x, Op::Exp(x), T::exp)
    }

    pub fn log(&mut self, x: Var) -> Var {
        self.unary(x, Op::Log(x), T::ln)
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let total = self.value(x).data().iter().copied().sum();
        let tracked = self.tracked(&[x]);
        self.push(Op::Sum(x), Tensor::scalar(total), tracked)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let n = T::lit(self.value(x).numel() as f64);
        let total: T = self.value(x).data().iter().copied().sum();
        let tracked = self.tracked(&[x]);
        self.push(Op::Mean(x), Tensor::scalar(total / n), tracked)
    }

    /// Σ (a − b)² as a scalar.
    pub fn squared_error(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        if self.shape(a) != self.shape(b) {
            return Err(self.mismatch("squared-error", a, b));
        }
        let total = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| (x - y) * (x - y))
            .sum();
        let tracked = self.tracked(&[a, b]);
        Ok(self.push(Op::SquaredError(a, b), Tensor::scalar(total), tracked))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var, NumericsError> {
        let value = self.value(x).clone().reshape(shape)?;
        let tracked = self.tracked(&[x]);
        Ok(self.push(Op::Reshape(x), value, tracked))
    }

    /// Concatenation along `axis`; all other extents must agree.
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var, NumericsError> {
        let first = *parts.first().ok_or_else(|| NumericsError::InvalidArgument {
            op: "concat",
            reason: "no inputs".into(),
        })?;
        let base = self.shape(first).to_vec();
        if axis >= base.len() {
            return Err(NumericsError::InvalidArgument {
                op: "concat",
                reason: format!("axis {axis} out of range for shape {base:?}"),
            });
        }
        let mut total = 0;
        for &p in parts {
            let s = self.shape(p);
            let compatible = s.len() == base.len()
                && s.iter().zip(&base).enumerate().all(|(i, (x, y))| i == axis || x == y);
            if !compatible {
                return Err(self.mismatch("concat", first, p));
            }
            total += s[axis];
        }
        let (outer, _, inner) = split_axis(&base, axis);
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &p in parts {
                let len = self.shape(p)[axis] * inner;
                data.extend_from_slice(&self.value(p).data()[o * len..(o + 1) * len]);
            }
        }
        let mut shape = base;
        shape[axis] = total;
        let value = Tensor::new(shape, data)?;
        let tracked = self.tracked(parts);
        Ok(self.push(Op::Concat { parts: parts.to_vec(), axis }, value, tracked))
    }

    /// Elements `start..start+len` along `axis`.
    pub fn slice(&mut self, x: Var, axis: usize, start: usize, len: usize) -> Result<Var, NumericsError> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() || start + len > shape[axis] || len == 0 {
            return Err(NumericsError::InvalidArgument {
                op: "slice",
                reason: format!("range {start}..{} on axis {axis} of {shape:?}", start + len),
            });
        }
        let (outer, extent, inner) = split_axis(&shape, axis);
        let src = self.value(x).data();
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * extent + start) * inner;
            data.extend_from_slice(&src[base..base + len * inner]);
        }
        let mut out_shape = shape;
        out_shape[axis] = len;
        let value = Tensor::new(out_shape, data)?;
        let tracked = self.tracked(&[x]);
        Ok(self.push(Op::Slice { input: x, axis, start }, value, tracked))
    }

    fn conv_dims(
        &self,
        name: &'static str,
        input: Var,
        weight: Var,
        bias: Var,
        geom: ConvGeom,
        transpose: bool,
    ) -> Result<ConvDims, NumericsError> {
        let (si, sw, sb) = (self.shape(input), self.shape(weight), self.shape(bias));
        let bad = || NumericsError::ShapeMismatch { op: name, lhs: si.to_vec(), rhs: sw.to_vec() };
        if si.len() != 4 || sw.len() != 4 || sw[2] != sw[3] {
            return Err(bad());
        }
        let (c_in, c_out) = if transpose { (sw[0], sw[1]) } else { (sw[1], sw[0]) };
        if si[1] != c_in {
            return Err(bad());
        }
        if sb != [c_out] {
            return Err(NumericsError::ShapeMismatch { op: name, lhs: sb.to_vec(), rhs: vec![c_out] });
        }
        let k = sw[2];
        let (oh, ow) = if transpose {
            (conv::conv_transpose_out_len(si[2], k, geom), conv::conv_transpose_out_len(si[3], k, geom))
        } else {
            (conv::conv_out_len(si[2], k, geom), conv::conv_out_len(si[3], k, geom))
        };
        match (oh, ow) {
            (Some(oh), Some(ow)) => {
                Ok(ConvDims { batch: si[0], c_in, h: si[2], w: si[3], c_out, k, oh, ow, geom })
            }
            _ => Err(bad()),
        }
    }

    /// 2-D convolution with zero padding. `input: [B,Cin,H,W]`,
    /// `weight: [Cout,Cin,K,K]`, `bias: [Cout]`.
    pub fn conv2d(
        &mut self,
        input: Var,
        weight: Var,
        bias: Var,
        geom: ConvGeom,
    ) -> Result<Var, NumericsError> {
        let d = self.conv_dims("conv2d", input, weight, bias, geom, false)?;
        let out = conv::conv2d_forward(
            self.value(input).data(),
            self.value(weight).data(),
            self.value(bias).data(),
            d,
        );
        let value = Tensor::new(vec![d.batch, d.c_out, d.oh, d.ow], out)?;
        let tracked = self.tracked(&[input, weight, bias]);
        Ok(self.push(Op::Conv2d { input, weight, bias, geom }, value, tracked))
    }

    /// Transposed 2-D convolution. `input: [B,Cin,H,W]`,
    /// `weight: [Cin,Cout,K,K]`, `bias: [Cout]`.
    pub fn conv_transpose2d(
        &mut self,
        input: Var,
        weight: Var,
        bias: Var,
        geom: ConvGeom,
    ) -> Result<Var, NumericsError> {
        let d = self.conv_dims("transposed-conv2d", input, weight, bias, geom, true)?;
        let out = conv::conv_transpose2d_forward(
            self.value(input).data(),
            self.value(weight).data(),
            self.value(bias).data(),
            d,
        );
        let value = Tensor::new(vec![d.batch, d.c_out, d.oh, d.ow], out)?;
        let tracked = self.tracked(&[input, weight, bias]);
        Ok(self.push(Op::ConvTranspose2d { input, weight, bias, geom }, value, tracked))
    }

    /// Reverse sweep from a scalar `root`; returns adjoints of tracked leaves.
    pub fn backward(&self, root: Var) -> Result<Gradients<T>, NumericsError> {
        let root_value = self.value(root);
        if !root_value.is_scalar() {
            return Err(NumericsError::NonScalarRoot(root_value.shape().to_vec()));
        }
        let mut adj: Vec<Option<Tensor<T>>> = vec![None; self.nodes.len()];
        adj[root.0] = Some(Tensor::full(root_value.shape(), T::one()));

        let mut grads: Vec<Option<Tensor<T>>> = vec![None; self.nodes.len()];
        for idx in (0..=root.0).rev() {
            let node = &self.nodes[idx];
            if !node.tracked {
                continue;
            }
            let Some(g) = adj[idx].take() else { continue };
            if let Op::Leaf = node.op {
                grads[idx] = Some(g);
                continue;
            }
            self.propagate(idx, &g, &mut adj)?;
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, adj: &mut [Option<Tensor<T>>], var: Var, contribution: Tensor<T>) {
        if !self.nodes[var.0].tracked {
            return;
        }
        match &mut adj[var.0] {
            Some(existing) => existing.add_assign(&contribution),
            slot @ None => *slot = Some(contribution),
        }
    }

    fn accumulate_data(&self, adj: &mut [Option<Tensor<T>>], var: Var, data: Vec<T>) -> Result<(), NumericsError> {
        let shape = self.shape(var).to_vec();
        self.accumulate(adj, var, Tensor::new(shape, data)?);
        Ok(())
    }

    fn propagate(&self, idx: usize, g: &Tensor<T>, adj: &mut [Option<Tensor<T>>]) -> Result<(), NumericsError> {
        let node = &self.nodes[idx];
        let gd = g.data();
        match &node.op {
            Op::Leaf => {}
            &Op::MatMul(a, b) => {
                let (m, k) = (self.shape(a)[0], self.shape(a)[1]);
                let n = self.shape(b)[1];
                if self.nodes[a.0].tracked {
                    // dA = G [m,n] · Bᵀ [n,k]
                    let mut da = vec![T::zero(); m * k];
                    T::gemm(m, n, k, gd, (n as isize, 1), self.value(b).data(), (1, n as isize), T::zero(), &mut da, (k as isize, 1));
                    self.accumulate_data(adj, a, da)?;
                }
                if self.nodes[b.0].tracked {
                    // dB = Aᵀ [k,m] · G [m,n]
                    let mut db = vec![T::zero(); k * n];
                    T::gemm(k, m, n, self.value(a).data(), (1, k as isize), gd, (n as isize, 1), T::zero(), &mut db, (n as isize, 1));
                    self.accumulate_data(adj, b, db)?;
                }
            }
            &Op::Add(a, b) | &Op::Sub(a, b) => {
                let sign = if matches!(node.op, Op::Sub(..)) { -T::one() } else { T::one() };
                self.accumulate(adj, a, g.clone());
                if self.nodes[b.0].tracked {
                    let block = self.value(b).numel().max(1);
                    let mut db = vec![T::zero(); block];
                    for chunk in gd.chunks(block) {
                        for (acc, &v) in db.iter_mut().zip(chunk) {
                            *acc += v;
                        }
                    }
                    db.iter_mut().for_each(|v| *v *= sign);
                    self.accumulate_data(adj, b, db)?;
                }
            }
            &Op::Mul(a, b) => {
                let av = self.value(a).data();
                let bv = self.value(b).data();
                let block = bv.len().max(1);
                if self.nodes[a.0].tracked {
                    let da = gd.chunks(block).flat_map(|c| c.iter().zip(bv).map(|(&gi, &bi)| gi * bi)).collect();
                    self.accumulate_data(adj, a, da)?;
                }
                if self.nodes[b.0].tracked {
                    let mut db = vec![T::zero(); block];
                    for (gc, ac) in gd.chunks(block).zip(av.chunks(block)) {
                        for ((acc, &gi), &ai) in db.iter_mut().zip(gc).zip(ac) {
                            *acc += gi * ai;
                        }
                    }
                    self.accumulate_data(adj, b, db)?;
                }
            }
            &Op::Scale(x, factor) => {
                let c = T::lit(factor);
                self.accumulate(adj, x, g.map(|v| v * c));
            }
            &Op::Offset(x) | &Op::Reshape(x) => {
                self.accumulate_data(adj, x, gd.to_vec())?;
            }
            &Op::Relu(x) => {
                let xv = self.value(x).data();
                let dx = gd.iter().zip(xv).map(|(&gi, &xi)| if xi > T::zero() { gi } else { T::zero() }).collect();
                self.accumulate_data(adj, x, dx)?;
            }
            &Op::Tanh(x) => {
                let y = node.value.data();
                let dx = gd.iter().zip(y).map(|(&gi, &yi)| gi * (T::one() - yi * yi)).collect();
                self.accumulate_data(adj, x, dx)?;
            }
            &Op::Softplus(x) => {
                let xv = self.value(x).data();
                let dx = gd.iter().zip(xv).map(|(&gi, &xi)| gi * sigmoid(xi)).collect();
                self.accumulate_data(adj, x, dx)?;
            }
            &Op::Exp(x) => {
                let y = node.value.data();
                let dx = gd.iter().zip(y).map(|(&gi, &yi)| gi * yi).collect();
                self.accumulate_data(adj, x, dx)?;
            }
            &Op::Log(x) => {
                let xv = self.value(x).data();
                let dx = gd.iter().zip(xv).map(|(&gi, &xi)| gi / xi).collect();
                self.accumulate_data(adj, x, dx)?;
            }
            &Op::Sum(x) => {
                let n = self.value(x).numel();
                self.accumulate_data(adj, x, vec![gd[0]; n])?;
            }
            &Op::Mean(x) => {
                let n = self.value(x).numel();
                self.accumulate_data(adj, x, vec![gd[0] / T::lit(n as f64); n])?;
            }
            &Op::SquaredError(a, b) => {
                let two_g = T::lit(2.0) * gd[0];
                let diff: Vec<T> = self
                    .value(a)
                    .data()
                    .iter()
                    .zip(self.value(b).data())
                    .map(|(&x, &y)| two_g * (x - y))
                    .collect();
                if self.nodes[b.0].tracked {
                    self.accumulate_data(adj, b, diff.iter().map(|&v| -v).collect())?;
                }
                self.accumulate_data(adj, a, diff)?;
            }
            Op::Concat { parts, axis } => {
                let (outer, total, inner) = split_axis(node.value.shape(), *axis);
                let mut offset = 0;
                for &p in parts {
                    let len = self.shape(p)[*axis];
                    if self.nodes[p.0].tracked {
                        let mut dp = Vec::with_capacity(outer * len * inner);
                        for o in 0..outer {
                            let base = (o * total + offset) * inner;
                            dp.extend_from_slice(&gd[base..base + len * inner]);
                        }
                        self.accumulate_data(adj, p, dp)?;
                    }
                    offset += len;
                }
            }
            &Op::Slice { input, axis, start } => {
                let (outer, extent, inner) = split_axis(self.shape(input), axis);
                let len = node.value.shape()[axis];
                let mut dx = vec![T::zero(); outer * extent * inner];
                for o in 0..outer {
                    let dst = (o * extent + start) * inner;
                    dx[dst..dst + len * inner].copy_from_slice(&gd[o * len * inner..(o + 1) * len * inner]);
                }
                self.accumulate_data(adj, input, dx)?;
            }
            &Op::Conv2d { input, weight, bias, geom } => {
                let d = self.conv_dims("conv2d", input, weight, bias, geom, false)?;
                let (dx, dw, db) =
                    conv::conv2d_backward(self.value(input).data(), self.value(weight).data(), gd, d);
                self.accumulate_data(adj, input, dx)?;
                self.accumulate_data(adj, weight, dw)?;
                self.accumulate_data(adj, bias, db)?;
            }
            &Op::ConvTranspose2d { input, weight, bias, geom } => {
                let d = self.conv_dims("transposed-conv2d", input, weight, bias, geom, true)?;
                let (dx, dw, db) =
                    conv::conv_transpose2d_backward(self.value(input).data(), self.value(weight).data(), gd, d);
                self.accumulate_data(adj, input, dx)?;
                self.accumulate_data(adj, weight, dw)?;
                self.accumulate_data(adj, bias, db)?;
            }
        }
        Ok(())
    }
}

/// Numerically stable `ln(1 + eˣ)`.
pub fn softplus<T: Element>(x: T) -> T {
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

fn sigmoid<T: Element>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

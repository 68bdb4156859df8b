use super::kernels;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    MatMulBt(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    AddBias(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    Softmax {
        input: Var,
        axis: usize,
    },
    Concat {
        inputs: Vec<Var>,
        axis: usize,
    },
    Slice {
        input: Var,
        axis: usize,
        start: usize,
    },
    Sum(Var),
    CrossEntropy {
        logits: Var,
        targets: Vec<usize>,
        probs: Vec<f64>,
    },
    L1 {
        pred: Var,
        target: Var,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Dynamic computation graph, rebuilt for every forward pass.
///
/// Nodes are appended in evaluation order, so every parent index is smaller
/// than its child's and a single reverse sweep visits each node once.
/// Gradients from repeated [`Tape::backward`] calls accumulate until
/// [`Tape::zero_grad`].
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
}

/// Working gradient buffer for `v`, or `None` when `v` needs no gradient.
fn grad_slot<'w>(
    nodes: &[Node],
    work: &'w mut [Option<Vec<f64>>],
    v: Var,
) -> Option<&'w mut Vec<f64>> {
    let node = &nodes[v.0];
    if !node.requires_grad {
        return None;
    }
    let len = node.value.len();
    Some(work[v.0].get_or_insert_with(|| vec![0.0; len]))
}

/// Splits a shape around `axis` into (outer, axis length, inner) extents.
fn axis_extents(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
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

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        self.grads.push(None);
        Var(self.nodes.len() - 1)
    }

    fn node(&self, v: Var) -> &Node {
        &self.nodes[v.0]
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// Records a trainable input.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Records an input that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.node(v).value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.node(v).value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.node(v).requires_grad
    }

    /// Accumulated gradient of the last loss(es) with respect to `v`.
    pub fn grad(&self, v: Var) -> Option<Tensor> {
        self.grads[v.0]
            .as_ref()
            .map(|g| Tensor::new(self.shape(v).to_vec(), g.clone()).expect("gradient shape"))
    }

    pub fn grad_data(&self, v: Var) -> Option<&[f64]> {
        self.grads[v.0].as_deref()
    }

    pub fn zero_grad(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = None);
    }

    fn require_2d(&self, op: &'static str, a: Var, b: Var) -> Result<(usize, usize, usize, usize)> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 {
            return Err(Error::Shape {
                op,
                lhs: sa.to_vec(),
                rhs: sb.to_vec(),
            });
        }
        Ok((sa[0], sa[1], sb[0], sb[1]))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::Shape {
                op,
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        Ok(())
    }

    /// Matrix product `a[m×k] · b[k×n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k, k2, n) = self.require_2d("matmul", a, b)?;
        if k != k2 {
            return Err(Error::Shape {
                op: "matmul",
                lhs: vec![m, k],
                rhs: vec![k2, n],
            });
        }
        let mut out = vec![0.0; m * n];
        kernels::gemm_nn(
            self.value(a).data(),
            self.value(b).data(),
            &mut out,
            m,
            k,
            n,
        );
        let rg = self.rg(&[a, b]);
        Ok(self.push(Tensor::new(vec![m, n], out)?, Op::MatMul(a, b), rg))
    }

    /// Product with a transposed right operand, `a[m×k] · b[n×k]ᵀ`.
    ///
    /// Weight matrices are stored `out×in`, so this is the linear-layer product.
    pub fn matmul_bt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k, n, k2) = self.require_2d("matmul_bt", a, b)?;
        if k != k2 {
            return Err(Error::Shape {
                op: "matmul_bt",
                lhs: vec![m, k],
                rhs: vec![n, k2],
            });
        }
        let mut out = vec![0.0; m * n];
        kernels::gemm_nt(
            self.value(a).data(),
            self.value(b).data(),
            &mut out,
            m,
            k,
            n,
        );
        let rg = self.rg(&[a, b]);
        Ok(self.push(Tensor::new(vec![m, n], out)?, Op::MatMulBt(a, b), rg))
    }

    fn zip_with(
        &mut self,
        op_name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var> {
        self.same_shape(op_name, a, b)?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let shape = self.shape(a).to_vec();
        let rg = self.rg(&[a, b]);
        Ok(self.push(Tensor::new(shape, data)?, op, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    /// Adds a bias row `b[n]` to every row of `a[m×n]`.
    ///
    /// This is the only broadcasting operation on the tape.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(bias));
        if sa.len() != 2 || sb.len() != 1 || sa[1] != sb[0] {
            return Err(Error::Shape {
                op: "add_bias",
                lhs: sa.to_vec(),
                rhs: sb.to_vec(),
            });
        }
        let n = sa[1];
        let b = self.value(bias).data();
        let mut data = self.value(a).data().to_vec();
        for row in data.chunks_exact_mut(n) {
            for (x, &bj) in row.iter_mut().zip(b) {
                *x += bj;
            }
        }
        let shape = sa.to_vec();
        let rg = self.rg(&[a, bias]);
        Ok(self.push(Tensor::new(shape, data)?, Op::AddBias(a, bias), rg))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let t = self.value(a);
        let data = t.data().iter().map(|x| x * factor).collect();
        let value = Tensor::new(t.shape().to_vec(), data).expect("same shape");
        let rg = self.rg(&[a]);
        self.push(value, Op::Scale(a, factor), rg)
    }

    fn map(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let t = self.value(a);
        let data = t.data().iter().map(|&x| f(x)).collect();
        let value = Tensor::new(t.shape().to_vec(), data).expect("same shape");
        let rg = self.rg(&[a]);
        self.push(value, op, rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map(a, kernels::sigmoid, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map(a, f64::tanh, Op::Tanh(a))
    }

    /// Softmax along `axis`, with max subtraction.
    pub fn softmax(&mut self, a: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        if axis >= shape.len() {
            return Err(Error::Axis {
                axis,
                ndim: shape.len(),
            });
        }
        let (outer, n, inner) = axis_extents(&shape, axis);
        let x = self.value(a).data();
        let mut y = vec![0.0; x.len()];
        for o in 0..outer {
            for i in 0..inner {
                let idx = |k: usize| (o * n + k) * inner + i;
                let max = (0..n).map(|k| x[idx(k)]).fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for k in 0..n {
                    let e = (x[idx(k)] - max).exp();
                    y[idx(k)] = e;
                    total += e;
                }
                for k in 0..n {
                    y[idx(k)] /= total;
                }
            }
        }
        let rg = self.rg(&[a]);
        Ok(self.push(Tensor::new(shape, y)?, Op::Softmax { input: a, axis }, rg))
    }

    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        let first = inputs.first().ok_or(Error::Empty("concat inputs"))?;
        let base = self.shape(*first).to_vec();
        if axis >= base.len() {
            return Err(Error::Axis {
                axis,
                ndim: base.len(),
            });
        }
        let mut axis_total = 0;
        for v in inputs {
            let s = self.shape(*v);
            let compatible = s.len() == base.len()
                && s.iter()
                    .zip(&base)
                    .enumerate()
                    .all(|(d, (x, y))| d == axis || x == y);
            if !compatible {
                return Err(Error::Shape {
                    op: "concat",
                    lhs: base,
                    rhs: s.to_vec(),
                });
            }
            axis_total += s[axis];
        }
        let mut shape = base.clone();
        shape[axis] = axis_total;
        let outer: usize = base[..axis].iter().product();
        let mut out = Vec::with_capacity(shape.iter().product());
        for o in 0..outer {
            for v in inputs {
                let t = self.value(*v);
                let chunk = t.len() / outer;
                out.extend_from_slice(&t.data()[o * chunk..(o + 1) * chunk]);
            }
        }
        let rg = self.rg(inputs);
        Ok(self.push(
            Tensor::new(shape, out)?,
            Op::Concat {
                inputs: inputs.to_vec(),
                axis,
            },
            rg,
        ))
    }

    /// Takes `start..end` along `axis`.
    pub fn slice(&mut self, a: Var, axis: usize, start: usize, end: usize) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        if axis >= shape.len() {
            return Err(Error::Axis {
                axis,
                ndim: shape.len(),
            });
        }
        if start > end || end > shape[axis] {
            return Err(Error::SliceRange {
                start,
                end,
                len: shape[axis],
            });
        }
        let (outer, n, inner) = axis_extents(&shape, axis);
        let x = self.value(a).data();
        let width = (end - start) * inner;
        let mut out = Vec::with_capacity(outer * width);
        for o in 0..outer {
            let base = o * n * inner + start * inner;
            out.extend_from_slice(&x[base..base + width]);
        }
        let mut out_shape = shape;
        out_shape[axis] = end - start;
        let rg = self.rg(&[a]);
        Ok(self.push(
            Tensor::new(out_shape, out)?,
            Op::Slice {
                input: a,
                axis,
                start,
            },
            rg,
        ))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let total = self.value(a).data().iter().sum();
        let rg = self.rg(&[a]);
        self.push(Tensor::scalar(total), Op::Sum(a), rg)
    }

    /// Mean over the batch of `-log softmax(logits)[target]`, via log-sum-exp.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var> {
        let shape = self.shape(logits).to_vec();
        if shape.len() != 2 || shape[0] != targets.len() {
            return Err(Error::Shape {
                op: "cross_entropy",
                lhs: shape,
                rhs: vec![targets.len()],
            });
        }
        let (batch, classes) = (shape[0], shape[1]);
        if batch == 0 {
            return Err(Error::Empty("cross_entropy batch"));
        }
        if let Some(&index) = targets.iter().find(|&&t| t >= classes) {
            return Err(Error::InvalidClass { index, classes });
        }
        let x = self.value(logits).data();
        let mut probs = vec![0.0; x.len()];
        let mut total = 0.0;
        for (b, &t) in targets.iter().enumerate() {
            let row = &x[b * classes..(b + 1) * classes];
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sum_exp: f64 = row.iter().map(|v| (v - max).exp()).sum();
            let lse = max + sum_exp.ln();
            total += lse - row[t];
            for (p, v) in probs[b * classes..(b + 1) * classes].iter_mut().zip(row) {
                *p = (v - lse).exp();
            }
        }
        let rg = self.rg(&[logits]);
        Ok(self.push(
            Tensor::scalar(total / batch as f64),
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
                probs,
            },
            rg,
        ))
    }

    /// Mean absolute error. The subgradient at a tie is 0.
    pub fn l1_loss(&mut self, pred: Var, target: Var) -> Result<Var> {
        self.same_shape("l1_loss", pred, target)?;
        let n = self.value(pred).len();
        if n == 0 {
            return Err(Error::Empty("l1_loss input"));
        }
        let total: f64 = self
            .value(pred)
            .data()
            .iter()
            .zip(self.value(target).data())
            .map(|(p, t)| (p - t).abs())
            .sum();
        let rg = self.rg(&[pred, target]);
        Ok(self.push(
            Tensor::scalar(total / n as f64),
            Op::L1 { pred, target },
            rg,
        ))
    }

    /// Back-propagates from a scalar `loss`, adding into stored gradients.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let shape = self.shape(loss);
        if shape.iter().product::<usize>() != 1 {
            return Err(Error::NonScalarLoss(shape.to_vec()));
        }
        if !self.requires_grad(loss) {
            return Ok(());
        }
        let mut work: Vec<Option<Vec<f64>>> = Vec::new();
        work.resize_with(loss.0 + 1, || None);
        work[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            let Some(g) = work[i].take() else { continue };
            self.propagate(i, &g, &mut work);
            match &mut self.grads[i] {
                Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                slot @ None => *slot = Some(g),
            }
        }
        Ok(())
    }

    fn propagate(&self, i: usize, g: &[f64], work: &mut [Option<Vec<f64>>]) {
        let nodes = &self.nodes;
        // Slots are re-fetched per parent, so a parent appearing twice is fine.
        macro_rules! with_slot {
            ($v:expr, |$buf:ident| $body:expr) => {
                if let Some($buf) = grad_slot(nodes, work, $v) {
                    $body
                }
            };
        }
        let node = &nodes[i];
        let out = node.value.data();
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (sa, sb) = (nodes[a.0].value.shape(), nodes[b.0].value.shape());
                let (m, k, n) = (sa[0], sa[1], sb[1]);
                // dA = dC · Bᵀ, dB = Aᵀ · dC
                with_slot!(*a, |da| kernels::gemm_nt(
                    g,
                    nodes[b.0].value.data(),
                    da,
                    m,
                    n,
                    k
                ));
                with_slot!(*b, |db| kernels::gemm_tn(
                    nodes[a.0].value.data(),
                    g,
                    db,
                    m,
                    k,
                    n
                ));
            }
            Op::MatMulBt(a, b) => {
                let (sa, sb) = (nodes[a.0].value.shape(), nodes[b.0].value.shape());
                let (m, k, n) = (sa[0], sa[1], sb[0]);
                // dA = dC · B, dB = dCᵀ · A
                with_slot!(*a, |da| kernels::gemm_nn(
                    g,
                    nodes[b.0].value.data(),
                    da,
                    m,
                    n,
                    k
                ));
                with_slot!(*b, |db| kernels::gemm_tn(
                    g,
                    nodes[a.0].value.data(),
                    db,
                    m,
                    n,
                    k
                ));
            }
            Op::Add(a, b) => {
                with_slot!(*a, |da| kernels::axpy(1.0, g, da));
                with_slot!(*b, |db| kernels::axpy(1.0, g, db));
            }
            Op::Sub(a, b) => {
                with_slot!(*a, |da| kernels::axpy(1.0, g, da));
                with_slot!(*b, |db| kernels::axpy(-1.0, g, db));
            }
            Op::AddBias(a, bias) => {
                with_slot!(*a, |da| kernels::axpy(1.0, g, da));
                with_slot!(*bias, |db| {
                    let n = db.len();
                    for row in g.chunks_exact(n) {
                        kernels::axpy(1.0, row, db);
                    }
                });
            }
            Op::Mul(a, b) => {
                let (va, vb) = (nodes[a.0].value.data(), nodes[b.0].value.data());
                with_slot!(*a, |da| da
                    .iter_mut()
                    .zip(g)
                    .zip(vb)
                    .for_each(|((d, g), y)| *d += g * y));
                with_slot!(*b, |db| db
                    .iter_mut()
                    .zip(g)
                    .zip(va)
                    .for_each(|((d, g), x)| *d += g * x));
            }
            Op::Scale(a, factor) => with_slot!(*a, |da| kernels::axpy(*factor, g, da)),
            Op::Sigmoid(a) => with_slot!(*a, |da| {
                da.iter_mut()
                    .zip(g)
                    .zip(out)
                    .for_each(|((d, g), s)| *d += g * s * (1.0 - s))
            }),
            Op::Tanh(a) => with_slot!(*a, |da| {
                da.iter_mut()
                    .zip(g)
                    .zip(out)
                    .for_each(|((d, g), t)| *d += g * (1.0 - t * t))
            }),
            Op::Softmax { input, axis } => with_slot!(*input, |da| {
                let (outer, n, inner) = axis_extents(node.value.shape(), *axis);
                for o in 0..outer {
                    for j in 0..inner {
                        let idx = |k: usize| (o * n + k) * inner + j;
                        let dot: f64 = (0..n).map(|k| g[idx(k)] * out[idx(k)]).sum();
                        for k in 0..n {
                            da[idx(k)] += out[idx(k)] * (g[idx(k)] - dot);
                        }
                    }
                }
            }),
            Op::Concat { inputs, axis } => {
                let outer: usize = node.value.shape()[..*axis].iter().product();
                let row = g.len() / outer;
                let mut offset = 0;
                for v in inputs {
                    let chunk = nodes[v.0].value.len() / outer;
                    with_slot!(*v, |dv| {
                        for o in 0..outer {
                            let src = &g[o * row + offset..o * row + offset + chunk];
                            kernels::axpy(1.0, src, &mut dv[o * chunk..(o + 1) * chunk]);
                        }
                    });
                    offset += chunk;
                }
            }
            Op::Slice { input, axis, start } => with_slot!(*input, |da| {
                let (outer, n, inner) = axis_extents(nodes[input.0].value.shape(), *axis);
                let width = node.value.shape()[*axis] * inner;
                for o in 0..outer {
                    let base = o * n * inner + start * inner;
                    kernels::axpy(
                        1.0,
                        &g[o * width..(o + 1) * width],
                        &mut da[base..base + width],
                    );
                }
            }),
            Op::Sum(a) => with_slot!(*a, |da| da.iter_mut().for_each(|d| *d += g[0])),
            Op::CrossEntropy {
                logits,
                targets,
                probs,
            } => with_slot!(*logits, |dl| {
                let batch = targets.len();
                let classes = probs.len() / batch;
                let scale = g[0] / batch as f64;
                for (b, &t) in targets.iter().enumerate() {
                    for k in 0..classes {
                        let onehot = if k == t { 1.0 } else { 0.0 };
                        dl[b * classes + k] += scale * (probs[b * classes + k] - onehot);
                    }
                }
            }),
            Op::L1 { pred, target } => {
                let (p, t) = (nodes[pred.0].value.data(), nodes[target.0].value.data());
                let scale = g[0] / p.len() as f64;
                let sign = |x: f64| {
                    if x > 0.0 {
                        1.0
                    } else if x < 0.0 {
                        -1.0
                    } else {
                        0.0
                    }
                };
                with_slot!(*pred, |dp| {
                    dp.iter_mut()
                        .zip(p.iter().zip(t))
                        .for_each(|(d, (p, t))| *d += scale * sign(p - t))
                });
                with_slot!(*target, |dt| {
                    dt.iter_mut()
                        .zip(p.iter().zip(t))
                        .for_each(|(d, (p, t))| *d -= scale * sign(p - t))
                });
            }
        }
    }
}

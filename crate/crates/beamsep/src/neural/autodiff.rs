//! Minimal reverse-mode automatic differentiation on dynamically-shaped
//! f64 arrays.
//!
//! A [`Tensor`] wraps an immutable value plus an optional record of the
//! operation that produced it. Calling [`Tensor::backward`] on a scalar
//! walks the recorded graph in reverse topological order and accumulates
//! gradients into every parameter ([`Tensor::param`]) that contributed.
//!
//! Elementwise operations require exactly matching shapes; broadcasting is
//! explicit through [`Tensor::broadcast_to`]. Shape mismatches are
//! programming errors and panic at record time with the offending shapes.
//!
//! Everything is single-threaded and deterministic: identical inputs and
//! parameters produce bit-identical forwards and gradients.

use ndarray::{ArrayD, Axis, Ix2, IxDyn, Slice};
use std::cell::{Cell, RefCell};
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

thread_local! {
    static NO_GRAD: Cell<bool> = const { Cell::new(false) };
}

/// Run `f` without recording any graph structure (inference mode).
pub fn no_grad<T>(f: impl FnOnce() -> T) -> T {
    let prev = NO_GRAD.with(|c| c.replace(true));
    let out = f();
    NO_GRAD.with(|c| c.set(prev));
    out
}

fn recording() -> bool {
    !NO_GRAD.with(|c| c.get())
}

#[derive(Debug, Clone)]
enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    AddScalar,
    MulScalar(f64),
    MaxScalar(f64),
    MinScalar(f64),
    Tanh,
    Sigmoid,
    Relu,
    Ln,
    Sqrt,
    MatMul,
    SumAll,
    MeanAll,
    SumAxis(usize),
    BroadcastTo,
    Reshape,
    Transpose(Vec<usize>),
    Concat(usize),
    Slice { axis: usize, start: usize },
    Conv1d { dilation: usize },
    OverlapAdd { hop: usize },
    SolveBatched,
}

struct Node {
    id: u64,
    data: RefCell<ArrayD<f64>>,
    grad: RefCell<Option<ArrayD<f64>>>,
    requires_grad: bool,
    op: Option<Op>,
    parents: Vec<Tensor>,
}

/// A value in the computation graph.
#[derive(Clone)]
pub struct Tensor {
    inner: Rc<Node>,
}

impl std::fmt::Debug for Tensor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "Tensor(id={}, shape={:?}, requires_grad={})",
            self.inner.id,
            self.shape(),
            self.inner.requires_grad
        )
    }
}

impl Tensor {
    fn new(data: ArrayD<f64>, requires_grad: bool, op: Option<Op>, parents: Vec<Tensor>) -> Tensor {
        Tensor {
            inner: Rc::new(Node {
                id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
                data: RefCell::new(data),
                grad: RefCell::new(None),
                requires_grad,
                op,
                parents,
            }),
        }
    }

    /// A constant; gradients do not flow into it.
    pub fn constant(data: ArrayD<f64>) -> Tensor {
        Tensor::new(data, false, None, vec![])
    }

    /// A trainable leaf; gradients accumulate here.
    pub fn param(data: ArrayD<f64>) -> Tensor {
        Tensor::new(data, true, None, vec![])
    }

    pub fn scalar(v: f64) -> Tensor {
        Tensor::constant(ArrayD::from_elem(IxDyn(&[]), v))
    }

    pub fn from_vec(v: Vec<f64>, shape: &[usize]) -> Tensor {
        Tensor::constant(
            ArrayD::from_shape_vec(IxDyn(shape), v).expect("from_vec: shape/len mismatch"),
        )
    }

    pub fn zeros(shape: &[usize]) -> Tensor {
        Tensor::constant(ArrayD::zeros(IxDyn(shape)))
    }

    pub fn id(&self) -> u64 {
        self.inner.id
    }

    pub fn data(&self) -> std::cell::Ref<'_, ArrayD<f64>> {
        self.inner.data.borrow()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.inner.data.borrow().shape().to_vec()
    }

    pub fn len(&self) -> usize {
        self.inner.data.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn requires_grad(&self) -> bool {
        self.inner.requires_grad
    }

    pub fn item(&self) -> f64 {
        let d = self.inner.data.borrow();
        assert_eq!(d.len(), 1, "item() on non-scalar tensor");
        *d.iter().next().unwrap()
    }

    pub fn grad(&self) -> Option<ArrayD<f64>> {
        self.inner.grad.borrow().clone()
    }

    pub fn zero_grad(&self) {
        *self.inner.grad.borrow_mut() = None;
    }

    /// Overwrite the value in place (optimizer updates). Shape must match.
    pub fn set_data(&self, new: ArrayD<f64>) {
        let mut d = self.inner.data.borrow_mut();
        assert_eq!(d.shape(), new.shape(), "set_data: shape mismatch");
        *d = new;
    }

    fn unary(&self, op: Op, out: ArrayD<f64>) -> Tensor {
        let rec = recording() && self.inner.requires_grad;
        if rec {
            Tensor::new(out, true, Some(op), vec![self.clone()])
        } else {
            Tensor::constant(out)
        }
    }

    fn binary(&self, other: &Tensor, op: Op, out: ArrayD<f64>) -> Tensor {
        let rec = recording() && (self.inner.requires_grad || other.inner.requires_grad);
        if rec {
            Tensor::new(out, true, Some(op), vec![self.clone(), other.clone()])
        } else {
            Tensor::constant(out)
        }
    }

    fn same_shape(&self, other: &Tensor, what: &str) {
        assert_eq!(
            self.shape(),
            other.shape(),
            "{what}: shape mismatch {:?} vs {:?}",
            self.shape(),
            other.shape()
        );
    }

    pub fn add(&self, other: &Tensor) -> Tensor {
        self.same_shape(other, "add");
        let out = &*self.data() + &*other.data();
        self.binary(other, Op::Add, out)
    }

    pub fn sub(&self, other: &Tensor) -> Tensor {
        self.same_shape(other, "sub");
        let out = &*self.data() - &*other.data();
        self.binary(other, Op::Sub, out)
    }

    pub fn mul(&self, other: &Tensor) -> Tensor {
        self.same_shape(other, "mul");
        let out = &*self.data() * &*other.data();
        self.binary(other, Op::Mul, out)
    }

    pub fn div(&self, other: &Tensor) -> Tensor {
        self.same_shape(other, "div");
        let out = &*self.data() / &*other.data();
        self.binary(other, Op::Div, out)
    }

    pub fn neg(&self) -> Tensor {
        let out = self.data().mapv(|v| -v);
        self.unary(Op::Neg, out)
    }

    pub fn add_scalar(&self, c: f64) -> Tensor {
        let out = self.data().mapv(|v| v + c);
        self.unary(Op::AddScalar, out)
    }

    pub fn mul_scalar(&self, c: f64) -> Tensor {
        let out = self.data().mapv(|v| v * c);
        self.unary(Op::MulScalar(c), out)
    }

    /// Elementwise `max(x, c)`.
    pub fn max_scalar(&self, c: f64) -> Tensor {
        let out = self.data().mapv(|v| v.max(c));
        self.unary(Op::MaxScalar(c), out)
    }

    /// Elementwise `min(x, c)`.
    pub fn min_scalar(&self, c: f64) -> Tensor {
        let out = self.data().mapv(|v| v.min(c));
        self.unary(Op::MinScalar(c), out)
    }

    pub fn tanh(&self) -> Tensor {
        let out = self.data().mapv(f64::tanh);
        self.unary(Op::Tanh, out)
    }

    pub fn sigmoid(&self) -> Tensor {
        let out = self.data().mapv(|v| {
            if v >= 0.0 {
                1.0 / (1.0 + (-v).exp())
            } else {
                let e = v.exp();
                e / (1.0 + e)
            }
        });
        self.unary(Op::Sigmoid, out)
    }

    pub fn relu(&self) -> Tensor {
        let out = self.data().mapv(|v| v.max(0.0));
        self.unary(Op::Relu, out)
    }

    pub fn ln(&self) -> Tensor {
        let out = self.data().mapv(f64::ln);
        self.unary(Op::Ln, out)
    }

    pub fn sqrt(&self) -> Tensor {
        let out = self.data().mapv(f64::sqrt);
        self.unary(Op::Sqrt, out)
    }

    /// 2-D matrix product.
    pub fn matmul(&self, other: &Tensor) -> Tensor {
        let a = self.data();
        let b = other.data();
        let a2 = a
            .view()
            .into_dimensionality::<Ix2>()
            .expect("matmul: lhs not 2-D");
        let b2 = b
            .view()
            .into_dimensionality::<Ix2>()
            .expect("matmul: rhs not 2-D");
        assert_eq!(
            a2.ncols(),
            b2.nrows(),
            "matmul: inner dims {} vs {}",
            a2.ncols(),
            b2.nrows()
        );
        let out = a2.dot(&b2).into_dyn();
        drop(a);
        drop(b);
        self.binary(other, Op::MatMul, out)
    }

    pub fn sum_all(&self) -> Tensor {
        let s = self.data().sum();
        let out = ArrayD::from_elem(IxDyn(&[]), s);
        self.unary(Op::SumAll, out)
    }

    pub fn mean_all(&self) -> Tensor {
        let d = self.data();
        let s = d.sum() / d.len() as f64;
        drop(d);
        let out = ArrayD::from_elem(IxDyn(&[]), s);
        self.unary(Op::MeanAll, out)
    }

    /// Sum over one axis, removing it.
    pub fn sum_axis(&self, axis: usize) -> Tensor {
        let out = self.data().sum_axis(Axis(axis));
        self.unary(Op::SumAxis(axis), out)
    }

    /// Broadcast to `shape`; same rank, each dim equal or 1 in the source.
    pub fn broadcast_to(&self, shape: &[usize]) -> Tensor {
        let cur = self.shape();
        assert_eq!(
            cur.len(),
            shape.len(),
            "broadcast_to: rank mismatch {cur:?} vs {shape:?}"
        );
        for (c, s) in cur.iter().zip(shape) {
            assert!(
                c == s || *c == 1,
                "broadcast_to: incompatible {cur:?} -> {shape:?}"
            );
        }
        let out = self
            .data()
            .broadcast(IxDyn(shape))
            .expect("broadcast_to failed")
            .to_owned();
        self.unary(Op::BroadcastTo, out)
    }

    pub fn reshape(&self, shape: &[usize]) -> Tensor {
        let d = self.data();
        let out = to_standard(d.to_owned())
            .into_shape_with_order(IxDyn(shape))
            .expect("reshape: incompatible shape");
        drop(d);
        self.unary(Op::Reshape, out)
    }

    pub fn transpose(&self, perm: &[usize]) -> Tensor {
        let out = to_standard(self.data().view().permuted_axes(IxDyn(perm)).to_owned());
        self.unary(Op::Transpose(perm.to_vec()), out)
    }

    /// Copy a contiguous range along `axis`.
    pub fn slice(&self, axis: usize, start: usize, len: usize) -> Tensor {
        let out = self
            .data()
            .slice_axis(Axis(axis), Slice::from(start..start + len))
            .to_owned();
        self.unary(Op::Slice { axis, start }, out)
    }

    /// Concatenate along `axis`.
    pub fn concat(tensors: &[Tensor], axis: usize) -> Tensor {
        assert!(!tensors.is_empty(), "concat of nothing");
        let datas: Vec<_> = tensors.iter().map(|t| t.data().clone()).collect();
        let views: Vec<_> = datas.iter().map(|d| d.view()).collect();
        let out = ndarray::concatenate(Axis(axis), &views).expect("concat: shape mismatch");
        let rec = recording() && tensors.iter().any(|t| t.inner.requires_grad);
        if rec {
            Tensor::new(out, true, Some(Op::Concat(axis)), tensors.to_vec())
        } else {
            Tensor::constant(out)
        }
    }

    /// Causal dilated 1-D convolution. `self` is `[C_in, T]`, `weight`
    /// `[C_out, C_in, K]`, `bias` `[C_out]`; output `[C_out, T]`. The
    /// input is implicitly left-padded with `(K-1)*dilation` zeros, so
    /// output frame `t` sees input frames `t - (K-1)*dilation ..= t`.
    pub fn conv1d(&self, weight: &Tensor, bias: &Tensor, dilation: usize) -> Tensor {
        let (c_in, t) = {
            let d = self.data();
            let s = d.shape();
            assert_eq!(s.len(), 2, "conv1d: input must be [C_in, T]");
            (s[0], s[1])
        };
        let (c_out, c_in_w, k) = {
            let d = weight.data();
            let s = d.shape();
            assert_eq!(s.len(), 3, "conv1d: weight must be [C_out, C_in, K]");
            (s[0], s[1], s[2])
        };
        assert_eq!(c_in, c_in_w, "conv1d: channel mismatch");
        assert_eq!(bias.shape(), vec![c_out], "conv1d: bias shape");
        let out = conv1d_forward(&self.data(), &weight.data(), &bias.data(), dilation, k, t);
        let rec = recording()
            && (self.inner.requires_grad || weight.inner.requires_grad || bias.inner.requires_grad);
        if rec {
            Tensor::new(
                out,
                true,
                Some(Op::Conv1d { dilation }),
                vec![self.clone(), weight.clone(), bias.clone()],
            )
        } else {
            Tensor::constant(out)
        }
    }

    /// Overlap-add frames `[T, W]` at hop `hop` into `[(T-1)*hop + W]`.
    pub fn overlap_add(&self, hop: usize) -> Tensor {
        let d = self.data();
        let s = d.shape();
        assert_eq!(s.len(), 2, "overlap_add: input must be [T, W]");
        let (t, w) = (s[0], s[1]);
        let out_len = (t - 1) * hop + w;
        let mut out = ArrayD::zeros(IxDyn(&[out_len]));
        for ti in 0..t {
            for i in 0..w {
                out[[ti * hop + i]] += d[[ti, i]];
            }
        }
        drop(d);
        self.unary(Op::OverlapAdd { hop }, out)
    }

    /// Batched linear solve: `self` is `[B, N, N]`, `rhs` `[B, N]`;
    /// returns `x` with `A_b x_b = rhs_b` via LU with partial pivoting.
    pub fn solve_batched(&self, rhs: &Tensor) -> Tensor {
        let (b, n) = {
            let a = self.data();
            let s = a.shape();
            assert_eq!(s.len(), 3, "solve_batched: lhs must be [B, N, N]");
            assert_eq!(s[1], s[2], "solve_batched: matrices must be square");
            (s[0], s[1])
        };
        assert_eq!(
            rhs.shape(),
            vec![b, n],
            "solve_batched: rhs must be [B, N]"
        );
        let out = {
            let a = self.data();
            let r = rhs.data();
            let mut out = ArrayD::zeros(IxDyn(&[b, n]));
            let mut scratch_a = vec![0.0f64; n * n];
            let mut scratch_b = vec![0.0f64; n];
            for bi in 0..b {
                for i in 0..n {
                    scratch_b[i] = r[[bi, i]];
                    for j in 0..n {
                        scratch_a[i * n + j] = a[[bi, i, j]];
                    }
                }
                lu_solve(&mut scratch_a, &mut scratch_b, n, false);
                for i in 0..n {
                    out[[bi, i]] = scratch_b[i];
                }
            }
            out
        };
        self.binary(rhs, Op::SolveBatched, out)
    }

    /// Reverse-mode sweep from a scalar output.
    pub fn backward(&self) {
        assert_eq!(self.len(), 1, "backward() needs a scalar output");
        // Post-order DFS for a reverse topological order.
        let mut order: Vec<Tensor> = Vec::new();
        let mut visited = std::collections::HashSet::new();
        let mut stack: Vec<(Tensor, bool)> = vec![(self.clone(), false)];
        while let Some((node, processed)) = stack.pop() {
            if processed {
                order.push(node);
                continue;
            }
            if !visited.insert(node.inner.id) {
                continue;
            }
            stack.push((node.clone(), true));
            for p in &node.inner.parents {
                if p.inner.requires_grad && !visited.contains(&p.inner.id) {
                    stack.push((p.clone(), false));
                }
            }
        }

        *self.inner.grad.borrow_mut() =
            Some(ArrayD::from_elem(self.data().raw_dim(), 1.0));

        for node in order.iter().rev() {
            let Some(op) = node.inner.op.clone() else {
                continue;
            };
            let grad = match node.inner.grad.borrow().clone() {
                Some(g) => g,
                None => continue,
            };
            let contribs = backward_op(&op, &grad, node);
            for (parent, contrib) in node.inner.parents.iter().zip(contribs) {
                if let Some(c) = contrib {
                    if parent.inner.requires_grad {
                        let mut slot = parent.inner.grad.borrow_mut();
                        match slot.as_mut() {
                            Some(acc) => *acc += &c,
                            None => *slot = Some(c),
                        }
                    }
                }
            }
            // Intermediate grads are no longer needed once propagated.
            if node.inner.id != self.inner.id {
                *node.inner.grad.borrow_mut() = None;
            }
        }
    }
}

/// Force standard (row-major contiguous) layout.
fn to_standard(a: ArrayD<f64>) -> ArrayD<f64> {
    if a.is_standard_layout() {
        a
    } else {
        a.as_standard_layout().to_owned()
    }
}

fn conv1d_forward(
    x: &ArrayD<f64>,
    w: &ArrayD<f64>,
    bias: &ArrayD<f64>,
    dilation: usize,
    k: usize,
    t: usize,
) -> ArrayD<f64> {
    let c_in = x.shape()[0];
    let c_out = w.shape()[0];
    // im2col: col[(ci*K + kk), t] = x[ci, t - (K-1-kk)*d], zero-padded.
    let mut col = ndarray::Array2::<f64>::zeros((c_in * k, t));
    for ci in 0..c_in {
        for kk in 0..k {
            let shift = (k - 1 - kk) * dilation;
            for ti in shift..t {
                col[[ci * k + kk, ti]] = x[[ci, ti - shift]];
            }
        }
    }
    let w2 = w
        .view()
        .into_shape_with_order((c_out, c_in * k))
        .expect("conv weight reshape");
    let mut out = w2.dot(&col);
    for co in 0..c_out {
        let b = bias[[co]];
        out.row_mut(co).mapv_inplace(|v| v + b);
    }
    out.into_dyn()
}

/// Gradient contributions for one op. Entries align with the node's
/// parents; `None` for parents that do not need gradients.
fn backward_op(op: &Op, grad: &ArrayD<f64>, node: &Tensor) -> Vec<Option<ArrayD<f64>>> {
    let parents = &node.inner.parents;
    let need = |i: usize| parents[i].inner.requires_grad;
    match op {
        Op::Add => vec![
            need(0).then(|| grad.clone()),
            need(1).then(|| grad.clone()),
        ],
        Op::Sub => vec![
            need(0).then(|| grad.clone()),
            need(1).then(|| grad.mapv(|v| -v)),
        ],
        Op::Mul => {
            let ga = need(0).then(|| grad * &*parents[1].data());
            let gb = need(1).then(|| grad * &*parents[0].data());
            vec![ga, gb]
        }
        Op::Div => {
            let b = parents[1].data();
            let ga = need(0).then(|| grad / &*b);
            let gb = need(1).then(|| {
                let a = parents[0].data();
                let mut g = grad * &*a;
                g.zip_mut_with(&b, |v, bv| *v = -*v / (bv * bv));
                g
            });
            vec![ga, gb]
        }
        Op::Neg => vec![need(0).then(|| grad.mapv(|v| -v))],
        Op::AddScalar => vec![need(0).then(|| grad.clone())],
        Op::MulScalar(c) => vec![need(0).then(|| grad.mapv(|v| v * c))],
        Op::MaxScalar(c) => vec![need(0).then(|| {
            let x = parents[0].data();
            let mut g = grad.clone();
            g.zip_mut_with(&x, |v, xv| {
                if *xv <= *c {
                    *v = 0.0;
                }
            });
            g
        })],
        Op::MinScalar(c) => vec![need(0).then(|| {
            let x = parents[0].data();
            let mut g = grad.clone();
            g.zip_mut_with(&x, |v, xv| {
                if *xv >= *c {
                    *v = 0.0;
                }
            });
            g
        })],
        Op::Tanh => vec![need(0).then(|| {
            let y = node.inner.data.borrow();
            let mut g = grad.clone();
            g.zip_mut_with(&y, |v, yv| *v *= 1.0 - yv * yv);
            g
        })],
        Op::Sigmoid => vec![need(0).then(|| {
            let y = node.inner.data.borrow();
            let mut g = grad.clone();
            g.zip_mut_with(&y, |v, yv| *v *= yv * (1.0 - yv));
            g
        })],
        Op::Relu => vec![need(0).then(|| {
            let x = parents[0].data();
            let mut g = grad.clone();
            g.zip_mut_with(&x, |v, xv| {
                if *xv <= 0.0 {
                    *v = 0.0;
                }
            });
            g
        })],
        Op::Ln => vec![need(0).then(|| {
            let x = parents[0].data();
            let mut g = grad.clone();
            g.zip_mut_with(&x, |v, xv| *v /= xv);
            g
        })],
        Op::Sqrt => vec![need(0).then(|| {
            let y = node.inner.data.borrow();
            let mut g = grad.clone();
            g.zip_mut_with(&y, |v, yv| *v *= 0.5 / yv);
            g
        })],
        Op::MatMul => {
            let a = parents[0].data();
            let b = parents[1].data();
            let a2 = a.view().into_dimensionality::<Ix2>().unwrap();
            let b2 = b.view().into_dimensionality::<Ix2>().unwrap();
            let g2 = grad.view().into_dimensionality::<Ix2>().unwrap();
            let ga = need(0).then(|| g2.dot(&b2.t()).into_dyn());
            let gb = need(1).then(|| a2.t().dot(&g2).into_dyn());
            vec![ga, gb]
        }
        Op::SumAll => vec![need(0).then(|| {
            let g = grad.iter().next().copied().unwrap_or(0.0);
            ArrayD::from_elem(parents[0].data().raw_dim(), g)
        })],
        Op::MeanAll => vec![need(0).then(|| {
            let n = parents[0].len() as f64;
            let g = grad.iter().next().copied().unwrap_or(0.0) / n;
            ArrayD::from_elem(parents[0].data().raw_dim(), g)
        })],
        Op::SumAxis(axis) => vec![need(0).then(|| {
            let shape = parents[0].shape();
            let expanded = grad.clone().insert_axis(Axis(*axis));
            expanded
                .broadcast(IxDyn(&shape))
                .expect("sum_axis backward broadcast")
                .to_owned()
        })],
        Op::BroadcastTo => vec![need(0).then(|| {
            let src_shape = parents[0].shape();
            let mut g = grad.clone();
            for (ax, (&s, &o)) in src_shape.iter().zip(grad.shape()).enumerate() {
                if s == 1 && o != 1 {
                    let summed = g.sum_axis(Axis(ax)).insert_axis(Axis(ax));
                    g = summed;
                }
            }
            g
        })],
        Op::Reshape => vec![need(0).then(|| {
            to_standard(grad.to_owned())
                .into_shape_with_order(IxDyn(&parents[0].shape()))
                .expect("reshape backward")
        })],
        Op::Transpose(perm) => vec![need(0).then(|| {
            let mut inverse = vec![0usize; perm.len()];
            for (i, &p) in perm.iter().enumerate() {
                inverse[p] = i;
            }
            to_standard(grad.view().permuted_axes(IxDyn(&inverse)).to_owned())
        })],
        Op::Concat(axis) => {
            let mut out = Vec::with_capacity(parents.len());
            let mut offset = 0;
            for p in parents {
                let extent = p.shape()[*axis];
                let piece = need_slice(grad, *axis, offset, extent);
                offset += extent;
                out.push(if p.inner.requires_grad {
                    Some(piece)
                } else {
                    None
                });
            }
            out
        }
        Op::Slice { axis, start } => vec![need(0).then(|| {
            let mut g = ArrayD::zeros(IxDyn(&parents[0].shape()));
            let len = grad.shape()[*axis];
            g.slice_axis_mut(Axis(*axis), Slice::from(*start..*start + len))
                .assign(grad);
            g
        })],
        Op::Conv1d { dilation } => conv1d_backward(grad, parents, *dilation),
        Op::OverlapAdd { hop } => vec![need(0).then(|| {
            let shape = parents[0].shape();
            let (t, w) = (shape[0], shape[1]);
            let mut g = ArrayD::zeros(IxDyn(&shape));
            for ti in 0..t {
                for i in 0..w {
                    g[[ti, i]] = grad[[ti * hop + i]];
                }
            }
            g
        })],
        Op::SolveBatched => {
            // x = A^-1 b  =>  gb = A^-T g,  gA = -gb x^T
            let a = parents[0].data();
            let x = node.inner.data.borrow();
            let shape = a.shape();
            let (bn, n) = (shape[0], shape[1]);
            let mut gb = ArrayD::zeros(IxDyn(&[bn, n]));
            let mut scratch_a = vec![0.0f64; n * n];
            let mut scratch_b = vec![0.0f64; n];
            for bi in 0..bn {
                for i in 0..n {
                    scratch_b[i] = grad[[bi, i]];
                    for j in 0..n {
                        scratch_a[i * n + j] = a[[bi, i, j]];
                    }
                }
                lu_solve(&mut scratch_a, &mut scratch_b, n, true);
                for i in 0..n {
                    gb[[bi, i]] = scratch_b[i];
                }
            }
            let ga = need(0).then(|| {
                let mut ga = ArrayD::zeros(IxDyn(&[bn, n, n]));
                for bi in 0..bn {
                    for i in 0..n {
                        for j in 0..n {
                            ga[[bi, i, j]] = -gb[[bi, i]] * x[[bi, j]];
                        }
                    }
                }
                ga
            });
            let gbo = need(1).then(|| gb);
            vec![ga, gbo]
        }
    }
}

fn need_slice(grad: &ArrayD<f64>, axis: usize, start: usize, len: usize) -> ArrayD<f64> {
    grad.slice_axis(Axis(axis), Slice::from(start..start + len))
        .to_owned()
}

fn conv1d_backward(
    grad: &ArrayD<f64>,
    parents: &[Tensor],
    dilation: usize,
) -> Vec<Option<ArrayD<f64>>> {
    let x = parents[0].data();
    let w = parents[1].data();
    let (c_in, t) = (x.shape()[0], x.shape()[1]);
    let (c_out, _, k) = (w.shape()[0], w.shape()[1], w.shape()[2]);
    let g2 = grad.view().into_dimensionality::<Ix2>().unwrap();

    // Rebuild the im2col matrix (cheaper than caching it in the node).
    let mut col = ndarray::Array2::<f64>::zeros((c_in * k, t));
    for ci in 0..c_in {
        for kk in 0..k {
            let shift = (k - 1 - kk) * dilation;
            for ti in shift..t {
                col[[ci * k + kk, ti]] = x[[ci, ti - shift]];
            }
        }
    }

    let gw = parents[1].inner.requires_grad.then(|| {
        let gw2 = g2.dot(&col.t());
        gw2.into_shape_with_order((c_out, c_in, k))
            .unwrap()
            .into_dyn()
    });
    let gb = parents[2].inner.requires_grad.then(|| {
        let mut gb = ArrayD::zeros(IxDyn(&[c_out]));
        for co in 0..c_out {
            gb[[co]] = g2.row(co).sum();
        }
        gb
    });
    let gx = parents[0].inner.requires_grad.then(|| {
        let w2 = w
            .view()
            .into_shape_with_order((c_out, c_in * k))
            .unwrap();
        let gcol = w2.t().dot(&g2);
        let mut gx = ArrayD::zeros(IxDyn(&[c_in, t]));
        for ci in 0..c_in {
            for kk in 0..k {
                let shift = (k - 1 - kk) * dilation;
                for ti in shift..t {
                    gx[[ci, ti - shift]] += gcol[[ci * k + kk, ti]];
                }
            }
        }
        gx
    });
    vec![gx, gw, gb]
}

/// LU solve with partial pivoting; `transpose` solves `A^T x = b`.
/// Near-singular systems fall back to a tiny pivot rather than NaN.
fn lu_solve(a: &mut [f64], b: &mut [f64], n: usize, transpose: bool) {
    if transpose {
        for i in 0..n {
            for j in (i + 1)..n {
                a.swap(i * n + j, j * n + i);
            }
        }
    }
    let mut perm: Vec<usize> = (0..n).collect();
    for col in 0..n {
        let mut pivot = col;
        let mut best = a[perm[col] * n + col].abs();
        for r in (col + 1)..n {
            let v = a[perm[r] * n + col].abs();
            if v > best {
                best = v;
                pivot = r;
            }
        }
        perm.swap(col, pivot);
        let p = perm[col];
        let mut pv = a[p * n + col];
        if pv.abs() < 1e-300 {
            pv = if pv < 0.0 { -1e-300 } else { 1e-300 };
            a[p * n + col] = pv;
        }
        for r in (col + 1)..n {
            let row = perm[r];
            let factor = a[row * n + col] / pv;
            a[row * n + col] = factor;
            for j in (col + 1)..n {
                a[row * n + j] -= factor * a[p * n + j];
            }
        }
    }
    let mut y = vec![0.0f64; n];
    for i in 0..n {
        let mut s = b[perm[i]];
        for j in 0..i {
            s -= a[perm[i] * n + j] * y[j];
        }
        y[i] = s;
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for j in (i + 1)..n {
            s -= a[perm[i] * n + j] * b[j];
        }
        b[i] = s / a[perm[i] * n + i];
    }
}

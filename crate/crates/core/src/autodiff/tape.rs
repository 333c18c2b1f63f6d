use std::collections::HashMap;
use std::sync::Arc;

use super::{AutodiffError, Result, Tensor};

/// Added under the square root of every norm so its derivative stays finite
/// at zero.
pub const GRAD_NORM_EPS: f64 = 1e-12;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Index map for [`Primitive::Gather`] and its adjoint [`Primitive::ScatterAdd`].
///
/// Gather reads `out[i] = src[index[i]]` (zero for `None`); scatter-add writes
/// `src[index[i]] += out[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexMap {
    pub src_shape: Vec<usize>,
    pub out_shape: Vec<usize>,
    pub index: Vec<Option<usize>>,
}

impl IndexMap {
    /// Columns `start..start + width` of a `rows × cols` matrix.
    pub fn columns(rows: usize, cols: usize, start: usize, width: usize) -> Self {
        let index = (0..rows)
            .flat_map(|r| (start..start + width).map(move |c| Some(r * cols + c)))
            .collect();
        Self {
            src_shape: vec![rows, cols],
            out_shape: vec![rows, width],
            index,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Primitive {
    MatMul,
    Add,
    Sub,
    Mul,
    Scale(f64),
    AddScalar(f64),
    Relu,
    Sigmoid,
    Tanh,
    Exp,
    Log,
    Powf(f64),
    Clamp(f64, f64),
    SoftmaxRows,
    Sum,
    /// Scalar to the given shape.
    Broadcast(Vec<usize>),
    Reshape(Vec<usize>),
    Transpose,
    /// Matrix plus a `1 × cols` row added to every row.
    AddRow,
    ConcatCols,
    Maximum,
    Gather(Arc<IndexMap>),
    ScatterAdd(Arc<IndexMap>),
}

impl Primitive {
    pub fn name(&self) -> &'static str {
        match self {
            Primitive::MatMul => "matmul",
            Primitive::Add => "add",
            Primitive::Sub => "sub",
            Primitive::Mul => "mul",
            Primitive::Scale(_) => "scale",
            Primitive::AddScalar(_) => "add_scalar",
            Primitive::Relu => "relu",
            Primitive::Sigmoid => "sigmoid",
            Primitive::Tanh => "tanh",
            Primitive::Exp => "exp",
            Primitive::Log => "log",
            Primitive::Powf(_) => "powf",
            Primitive::Clamp(..) => "clamp",
            Primitive::SoftmaxRows => "softmax_rows",
            Primitive::Sum => "sum",
            Primitive::Broadcast(_) => "broadcast",
            Primitive::Reshape(_) => "reshape",
            Primitive::Transpose => "transpose",
            Primitive::AddRow => "add_row",
            Primitive::ConcatCols => "concat_cols",
            Primitive::Maximum => "maximum",
            Primitive::Gather(_) => "gather",
            Primitive::ScatterAdd(_) => "scatter_add",
        }
    }
}

#[derive(Debug, Clone)]
enum Source {
    Leaf,
    Constant,
    Op(Primitive, Vec<Var>),
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    source: Source,
}

/// Append-only record of tensor computations. Nodes are stored in creation
/// order, which is a topological order.
#[derive(Debug, Clone, Default)]
pub struct Tape {
    nodes: Vec<Node>,
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

    /// A differentiable input.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push_source(value, Source::Leaf)
    }

    /// A fixed input. Gradients can still be requested with [`Tape::grad`], but
    /// [`Tape::backward`] does not report them.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push_source(value, Source::Constant)
    }

    fn push_source(&mut self, value: Tensor, source: Source) -> Var {
        self.nodes.push(Node { value, source });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn check(&self, v: Var) -> Result<()> {
        if v.0 < self.nodes.len() {
            Ok(())
        } else {
            Err(AutodiffError::UnknownVar(v.0))
        }
    }

    /// Applies `prim` to `inputs`, recording the result.
    pub fn apply(&mut self, prim: Primitive, inputs: &[Var]) -> Result<Var> {
        for &v in inputs {
            self.check(v)?;
        }
        let value = self.forward(&prim, inputs)?;
        if !value.is_finite() {
            return Err(AutodiffError::NonFinite { op: prim.name() });
        }
        self.nodes.push(Node {
            value,
            source: Source::Op(prim, inputs.to_vec()),
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn forward(&self, prim: &Primitive, inputs: &[Var]) -> Result<Tensor> {
        let op = prim.name();
        let arity = |n: usize| {
            if inputs.len() == n {
                Ok(())
            } else {
                Err(AutodiffError::Arity {
                    op,
                    expected: n,
                    found: inputs.len(),
                })
            }
        };
        let mismatch = |a: &[usize], b: &[usize]| AutodiffError::ShapeMismatch {
            op,
            left: a.to_vec(),
            right: b.to_vec(),
        };
        let same_shape = |a: Var, b: Var| {
            let (sa, sb) = (self.shape(a), self.shape(b));
            if sa == sb {
                Ok(())
            } else {
                Err(mismatch(sa, sb))
            }
        };
        let matrix = |a: Var| {
            let s = self.shape(a);
            if s.len() == 2 {
                Ok(())
            } else {
                Err(mismatch(s, &[]))
            }
        };
        match prim {
            Primitive::MatMul => {
                arity(2)?;
                let (a, b) = (self.value(inputs[0]), self.value(inputs[1]));
                if a.shape().len() != 2 || b.shape().len() != 2 || a.shape()[1] != b.shape()[0] {
                    return Err(mismatch(a.shape(), b.shape()));
                }
                Ok(a.matmul(b))
            }
            Primitive::Add | Primitive::Sub | Primitive::Mul | Primitive::Maximum => {
                arity(2)?;
                same_shape(inputs[0], inputs[1])?;
                let (a, b) = (self.value(inputs[0]), self.value(inputs[1]));
                Ok(match prim {
                    Primitive::Add => a.zip(b, |x, y| x + y),
                    Primitive::Sub => a.zip(b, |x, y| x - y),
                    Primitive::Mul => a.zip(b, |x, y| x * y),
                    _ => a.zip(b, f64::max),
                })
            }
            Primitive::Scale(c) => {
                arity(1)?;
                Ok(self.value(inputs[0]).map(|x| c * x))
            }
            Primitive::AddScalar(c) => {
                arity(1)?;
                Ok(self.value(inputs[0]).map(|x| x + c))
            }
            Primitive::Relu => {
                arity(1)?;
                Ok(self.value(inputs[0]).map(|x| x.max(0.0)))
            }
            Primitive::Sigmoid => {
                arity(1)?;
                Ok(self.value(inputs[0]).map(sigmoid))
            }
            Primitive::Tanh => {
                arity(1)?;
                Ok(self.value(inputs[0]).map(f64::tanh))
            }
            Primitive::Exp => {
                arity(1)?;
                Ok(self.value(inputs[0]).map(f64::exp))
            }
            Primitive::Log => {
                arity(1)?;
                Ok(self.value(inputs[0]).map(f64::ln))
            }
            Primitive::Powf(k) => {
                arity(1)?;
                Ok(self.value(inputs[0]).map(|x| x.powf(*k)))
            }
            Primitive::Clamp(lo, hi) => {
                arity(1)?;
                Ok(self.value(inputs[0]).map(|x| x.clamp(*lo, *hi)))
            }
            Primitive::SoftmaxRows => {
                arity(1)?;
                matrix(inputs[0])?;
                let x = self.value(inputs[0]);
                let c = x.cols();
                let mut out = x.clone();
                for row in out.data_mut().chunks_mut(c) {
                    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let mut total = 0.0;
                    for v in row.iter_mut() {
                        *v = (*v - max).exp();
                        total += *v;
                    }
                    for v in row.iter_mut() {
                        *v /= total;
                    }
                }
                Ok(out)
            }
            Primitive::Sum => {
                arity(1)?;
                Ok(Tensor::scalar(self.value(inputs[0]).data().iter().sum()))
            }
            Primitive::Broadcast(shape) => {
                arity(1)?;
                let x = self.value(inputs[0]);
                if x.len() != 1 {
                    return Err(mismatch(x.shape(), shape));
                }
                Ok(Tensor::full(shape, x.item()))
            }
            Primitive::Reshape(shape) => {
                arity(1)?;
                let x = self.value(inputs[0]);
                if shape.iter().product::<usize>() != x.len() {
                    return Err(mismatch(x.shape(), shape));
                }
                Tensor::new(shape.clone(), x.data().to_vec())
            }
            Primitive::Transpose => {
                arity(1)?;
                matrix(inputs[0])?;
                Ok(self.value(inputs[0]).transpose())
            }
            Primitive::AddRow => {
                arity(2)?;
                matrix(inputs[0])?;
                let (x, b) = (self.value(inputs[0]), self.value(inputs[1]));
                if b.shape() != [1, x.cols()] {
                    return Err(mismatch(x.shape(), b.shape()));
                }
                let mut out = x.clone();
                let c = x.cols();
                for row in out.data_mut().chunks_mut(c) {
                    for (o, &bv) in row.iter_mut().zip(b.data()) {
                        *o += bv;
                    }
                }
                Ok(out)
            }
            Primitive::ConcatCols => {
                if inputs.is_empty() {
                    return Err(AutodiffError::Arity {
                        op,
                        expected: 1,
                        found: 0,
                    });
                }
                let rows = self.value(inputs[0]).rows();
                for &v in inputs {
                    matrix(v)?;
                    if self.value(v).rows() != rows {
                        return Err(mismatch(self.shape(inputs[0]), self.shape(v)));
                    }
                }
                let total: usize = inputs.iter().map(|&v| self.value(v).cols()).sum();
                let mut data = Vec::with_capacity(rows * total);
                for r in 0..rows {
                    for &v in inputs {
                        let t = self.value(v);
                        let c = t.cols();
                        data.extend_from_slice(&t.data()[r * c..(r + 1) * c]);
                    }
                }
                Tensor::new(vec![rows, total], data)
            }
            Primitive::Gather(map) => {
                arity(1)?;
                let x = self.value(inputs[0]);
                if x.shape() != map.src_shape.as_slice() {
                    return Err(mismatch(x.shape(), &map.src_shape));
                }
                let data = map
                    .index
                    .iter()
                    .map(|i| i.map_or(0.0, |i| x.data()[i]))
                    .collect();
                Tensor::new(map.out_shape.clone(), data)
            }
            Primitive::ScatterAdd(map) => {
                arity(1)?;
                let x = self.value(inputs[0]);
                if x.shape() != map.out_shape.as_slice() {
                    return Err(mismatch(x.shape(), &map.out_shape));
                }
                let mut out = Tensor::zeros(&map.src_shape);
                for (k, i) in map.index.iter().enumerate() {
                    if let Some(i) = i {
                        out.data_mut()[*i] += x.data()[k];
                    }
                }
                Ok(out)
            }
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Primitive::MatMul, &[a, b])
    }
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Primitive::Add, &[a, b])
    }
    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Primitive::Sub, &[a, b])
    }
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Primitive::Mul, &[a, b])
    }
    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        self.apply(Primitive::Scale(c), &[a])
    }
    pub fn add_scalar(&mut self, a: Var, c: f64) -> Result<Var> {
        self.apply(Primitive::AddScalar(c), &[a])
    }
    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.apply(Primitive::Relu, &[a])
    }
    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.apply(Primitive::Sigmoid, &[a])
    }
    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.apply(Primitive::Tanh, &[a])
    }
    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.apply(Primitive::Exp, &[a])
    }
    pub fn log(&mut self, a: Var) -> Result<Var> {
        self.apply(Primitive::Log, &[a])
    }
    pub fn powf(&mut self, a: Var, k: f64) -> Result<Var> {
        self.apply(Primitive::Powf(k), &[a])
    }
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Result<Var> {
        self.apply(Primitive::Clamp(lo, hi), &[a])
    }
    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        self.apply(Primitive::SoftmaxRows, &[a])
    }
    pub fn sum(&mut self, a: Var) -> Result<Var> {
        self.apply(Primitive::Sum, &[a])
    }
    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let n = self.value(a).len() as f64;
        let s = self.sum(a)?;
        self.scale(s, 1.0 / n)
    }
    pub fn broadcast(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        self.apply(Primitive::Broadcast(shape.to_vec()), &[a])
    }
    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        self.apply(Primitive::Reshape(shape.to_vec()), &[a])
    }
    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        self.apply(Primitive::Transpose, &[a])
    }
    pub fn add_row(&mut self, x: Var, row: Var) -> Result<Var> {
        self.apply(Primitive::AddRow, &[x, row])
    }
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        self.apply(Primitive::ConcatCols, parts)
    }
    pub fn maximum(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Primitive::Maximum, &[a, b])
    }
    pub fn gather(&mut self, a: Var, map: Arc<IndexMap>) -> Result<Var> {
        self.apply(Primitive::Gather(map), &[a])
    }
    pub fn scatter_add(&mut self, a: Var, map: Arc<IndexMap>) -> Result<Var> {
        self.apply(Primitive::ScatterAdd(map), &[a])
    }

    /// `x · w + b` with `b` a `1 × cols` row.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let xw = self.matmul(x, w)?;
        self.add_row(xw, b)
    }

    /// Sum of a list of same-shaped values.
    pub fn add_all(&mut self, terms: &[Var]) -> Result<Var> {
        let (&first, rest) = terms.split_first().ok_or(AutodiffError::Arity {
            op: "add_all",
            expected: 1,
            found: 0,
        })?;
        rest.iter().try_fold(first, |acc, &t| self.add(acc, t))
    }

    /// `sqrt(sum(x²) + ε)` over all entries of all `parts`.
    pub fn l2_norm(&mut self, parts: &[Var]) -> Result<Var> {
        let mut squares = Vec::with_capacity(parts.len());
        for &p in parts {
            let sq = self.mul(p, p)?;
            squares.push(self.sum(sq)?);
        }
        let total = self.add_all(&squares)?;
        let shifted = self.add_scalar(total, GRAD_NORM_EPS)?;
        self.powf(shifted, 0.5)
    }

    /// Gradients of the scalar `output` with respect to each of `wrt`, recorded
    /// on the tape so they can be differentiated again. Inputs that do not
    /// influence `output` get a zero constant.
    pub fn grad(&mut self, output: Var, wrt: &[Var]) -> Result<Vec<Var>> {
        self.check(output)?;
        for &w in wrt {
            self.check(w)?;
        }
        let out_shape = self.shape(output).to_vec();
        if self.value(output).len() != 1 {
            return Err(AutodiffError::NotScalar(out_shape));
        }
        let end = output.0 + 1;
        // reach[i]: node i depends on some requested input
        let mut reach = vec![false; end];
        for &w in wrt {
            if w.0 < end {
                reach[w.0] = true;
            }
        }
        for i in 0..end {
            if let Source::Op(_, inputs) = &self.nodes[i].source {
                if inputs.iter().any(|x| reach[x.0]) {
                    reach[i] = true;
                }
            }
        }
        let mut grads: Vec<Option<Var>> = vec![None; end];
        if reach[output.0] {
            grads[output.0] = Some(self.constant(Tensor::ones(&out_shape)));
        }
        for i in (0..end).rev() {
            let Some(g) = grads[i] else { continue };
            let (prim, inputs) = match &self.nodes[i].source {
                Source::Op(p, inputs) => (p.clone(), inputs.clone()),
                _ => continue,
            };
            let needed: Vec<bool> = inputs.iter().map(|x| reach[x.0]).collect();
            let contributions = self.vjp(&prim, Var(i), &inputs, g, &needed)?;
            for (x, c) in inputs.iter().zip(contributions) {
                if let Some(c) = c {
                    grads[x.0] = Some(match grads[x.0] {
                        None => c,
                        Some(prev) => self.add(prev, c)?,
                    });
                }
            }
        }
        wrt.iter()
            .map(|&w| match grads.get(w.0).copied().flatten() {
                Some(g) => Ok(g),
                None => {
                    let shape = self.shape(w).to_vec();
                    Ok(self.constant(Tensor::zeros(&shape)))
                }
            })
            .collect()
    }

    /// Gradients of `output` with respect to every leaf, as values.
    pub fn backward(&mut self, output: Var) -> Result<HashMap<Var, Tensor>> {
        let leaves: Vec<Var> = self
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| matches!(n.source, Source::Leaf))
            .map(|(i, _)| Var(i))
            .collect();
        let grads = self.grad(output, &leaves)?;
        Ok(leaves
            .into_iter()
            .zip(grads)
            .map(|(l, g)| (l, self.value(g).clone()))
            .collect())
    }

    /// `‖∂output/∂wrt‖₂` as a differentiable node. Every `wrt` must be a leaf.
    pub fn grad_norm(&mut self, output: Var, wrt: &[Var]) -> Result<Var> {
        for &w in wrt {
            self.check(w)?;
            if !matches!(self.nodes[w.0].source, Source::Leaf) {
                return Err(AutodiffError::NotLeaf(w.0));
            }
        }
        let grads = self.grad(output, wrt)?;
        self.l2_norm(&grads)
    }

    fn mask(&mut self, of: Var, f: impl Fn(f64) -> bool) -> Var {
        let m = self.value(of).map(|x| if f(x) { 1.0 } else { 0.0 });
        self.constant(m)
    }

    fn mask2(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> bool) -> Var {
        let m = self
            .value(a)
            .zip(self.value(b), |x, y| if f(x, y) { 1.0 } else { 0.0 });
        self.constant(m)
    }

    /// Vector-Jacobian products for one node, expressed as new tape nodes.
    fn vjp(
        &mut self,
        prim: &Primitive,
        out: Var,
        inputs: &[Var],
        g: Var,
        needed: &[bool],
    ) -> Result<Vec<Option<Var>>> {
        let mut res = vec![None; inputs.len()];
        match prim {
            Primitive::MatMul => {
                let (a, b) = (inputs[0], inputs[1]);
                if needed[0] {
                    let bt = self.transpose(b)?;
                    res[0] = Some(self.matmul(g, bt)?);
                }
                if needed[1] {
                    let at = self.transpose(a)?;
                    res[1] = Some(self.matmul(at, g)?);
                }
            }
            Primitive::Add => {
                res[0] = Some(g);
                res[1] = Some(g);
            }
            Primitive::Sub => {
                res[0] = Some(g);
                if needed[1] {
                    res[1] = Some(self.scale(g, -1.0)?);
                }
            }
            Primitive::Mul => {
                if needed[0] {
                    res[0] = Some(self.mul(g, inputs[1])?);
                }
                if needed[1] {
                    res[1] = Some(self.mul(g, inputs[0])?);
                }
            }
            Primitive::Scale(c) => res[0] = Some(self.scale(g, *c)?),
            Primitive::Relu => {
                let m = self.mask(inputs[0], |x| x > 0.0);
                res[0] = Some(self.mul(g, m)?);
            }
            Primitive::Sigmoid => {
                let neg = self.scale(out, -1.0)?;
                let one_minus = self.add_scalar(neg, 1.0)?;
                let d = self.mul(out, one_minus)?;
                res[0] = Some(self.mul(g, d)?);
            }
            Primitive::Tanh => {
                let sq = self.mul(out, out)?;
                let neg = self.scale(sq, -1.0)?;
                let d = self.add_scalar(neg, 1.0)?;
                res[0] = Some(self.mul(g, d)?);
            }
            Primitive::Exp => res[0] = Some(self.mul(g, out)?),
            Primitive::Log => {
                let inv = self.powf(inputs[0], -1.0)?;
                res[0] = Some(self.mul(g, inv)?);
            }
            Primitive::Powf(k) => {
                let p = self.powf(inputs[0], k - 1.0)?;
                let d = self.scale(p, *k)?;
                res[0] = Some(self.mul(g, d)?);
            }
            Primitive::Clamp(lo, hi) => {
                let (lo, hi) = (*lo, *hi);
                let m = self.mask(inputs[0], |x| x > lo && x < hi);
                res[0] = Some(self.mul(g, m)?);
            }
            Primitive::SoftmaxRows => {
                let (rows, cols) = (self.value(out).rows(), self.value(out).cols());
                let gs = self.mul(g, out)?;
                let ones_col = self.constant(Tensor::ones(&[cols, 1]));
                let row_sums = self.matmul(gs, ones_col)?;
                let ones_row = self.constant(Tensor::ones(&[1, cols]));
                let spread = self.matmul(row_sums, ones_row)?;
                debug_assert_eq!(self.value(spread).rows(), rows);
                let centered = self.sub(g, spread)?;
                res[0] = Some(self.mul(out, centered)?);
            }
            Primitive::Sum => {
                let shape = self.shape(inputs[0]).to_vec();
                res[0] = Some(self.broadcast(g, &shape)?);
            }
            Primitive::Broadcast(_) => {
                let s = self.sum(g)?;
                let shape = self.shape(inputs[0]).to_vec();
                res[0] = Some(self.reshape(s, &shape)?);
            }
            Primitive::Reshape(_) => {
                let shape = self.shape(inputs[0]).to_vec();
                res[0] = Some(self.reshape(g, &shape)?);
            }
            Primitive::Transpose => res[0] = Some(self.transpose(g)?),
            Primitive::AddRow => {
                res[0] = Some(g);
                if needed[1] {
                    let rows = self.value(g).rows();
                    let ones = self.constant(Tensor::ones(&[1, rows]));
                    res[1] = Some(self.matmul(ones, g)?);
                }
            }
            Primitive::ConcatCols => {
                let (rows, total) = (self.value(g).rows(), self.value(g).cols());
                let mut start = 0;
                for (k, &x) in inputs.iter().enumerate() {
                    let width = self.value(x).cols();
                    if needed[k] {
                        let map = Arc::new(IndexMap::columns(rows, total, start, width));
                        res[k] = Some(self.gather(g, map)?);
                    }
                    start += width;
                }
            }
            Primitive::Maximum => {
                let m = self.mask2(inputs[0], inputs[1], |a, b| a >= b);
                if needed[0] {
                    res[0] = Some(self.mul(g, m)?);
                }
                if needed[1] {
                    let neg = self.scale(m, -1.0)?;
                    let inv = self.add_scalar(neg, 1.0)?;
                    res[1] = Some(self.mul(g, inv)?);
                }
            }
            Primitive::Gather(map) => res[0] = Some(self.scatter_add(g, map.clone())?),
            Primitive::ScatterAdd(map) => res[0] = Some(self.gather(g, map.clone())?),
            Primitive::AddScalar(_) => res[0] = Some(g),
        }
        for (r, &n) in res.iter_mut().zip(needed) {
            if !n {
                *r = None;
            }
        }
        Ok(res)
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

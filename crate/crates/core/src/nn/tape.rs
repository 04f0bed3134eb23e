//! Reverse-mode differentiation over dense row-major matrices.
//!
//! A [`Tape`] records every operation of one forward pass. Parameters are
//! borrowed from a [`ParamStore`] rather than copied; [`Tape::backward`]
//! walks the record in reverse and sums gradients per parameter.

use std::rc::Rc;

use ndarray::{s, Array2, ArrayView2, Axis, Zip};
use rand::Rng;

use crate::error::NnError;

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Named trainable matrices. Biases are stored as `1 × n` rows.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    pub names: Vec<String>,
    pub values: Vec<Array2<f64>>,
}

impl ParamStore {
    pub fn add(&mut self, name: impl Into<String>, value: Array2<f64>) -> usize {
        self.names.push(name.into());
        self.values.push(value);
        self.values.len() - 1
    }

    /// Uniform in `±√(6 / (fan_in + fan_out))`.
    pub fn add_xavier<R: Rng>(
        &mut self,
        name: impl Into<String>,
        fan_in: usize,
        fan_out: usize,
        rng: &mut R,
    ) -> usize {
        let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let w = Array2::from_shape_simple_fn((fan_in, fan_out), || rng.random_range(-a..a));
        self.add(name, w)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(|v| v.len()).sum()
    }

    pub fn shapes(&self) -> Vec<[usize; 2]> {
        self.values.iter().map(|v| [v.nrows(), v.ncols()]).collect()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.values.iter().flat_map(|v| v.iter().copied()).collect()
    }

    pub fn load_flat(&mut self, data: &[f64]) -> Result<(), NnError> {
        if data.len() != self.num_scalars() {
            return Err(NnError::shape(
                "load_flat",
                format!("{} scalars for {}", data.len(), self.num_scalars()),
            ));
        }
        let mut at = 0;
        for v in &mut self.values {
            let n = v.len();
            v.iter_mut()
                .zip(&data[at..at + n])
                .for_each(|(d, s)| *d = *s);
            at += n;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param(usize),
    MatMul(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    /// Broadcast a `1 × n` row over every row.
    AddRow(usize, usize),
    MulRow(usize, usize),
    Tanh(usize),
    Scale(usize, f64),
    ConcatCols(Vec<usize>),
    ConcatRows(Vec<usize>),
    Gather(usize, Rc<Vec<usize>>),
    ScatterSum(usize, Rc<Vec<usize>>),
    RowSlice(usize, usize),
    /// Per-row standardization; `aux` holds the inverse std of each row.
    Standardize(usize),
    MeanSquare(usize),
}

struct Node {
    value: Array2<f64>,
    op: Op,
    needs_grad: bool,
    aux: Vec<f64>,
}

pub struct Tape<'p> {
    params: &'p ParamStore,
    trainable: Option<&'p [bool]>,
    nodes: Vec<Node>,
}

/// Result of a backward pass.
pub struct Gradients {
    nodes: Vec<Option<Array2<f64>>>,
    /// Per parameter id; `None` when the parameter did not influence the root.
    pub params: Vec<Option<Array2<f64>>>,
}

impl Gradients {
    /// Gradient at a tracked node. Intermediate gradients are released
    /// during the sweep unless it ran with `keep_all`.
    pub fn wrt(&self, v: Var) -> Option<&Array2<f64>> {
        self.nodes[v.0].as_ref()
    }
}

fn accumulate(slot: &mut Option<Array2<f64>>, g: Array2<f64>) {
    match slot {
        Some(acc) => *acc += &g,
        None => *slot = Some(g),
    }
}

fn check(op: &'static str, ok: bool, detail: impl FnOnce() -> String) -> Result<(), NnError> {
    if ok {
        Ok(())
    } else {
        Err(NnError::shape(op, detail()))
    }
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Tape {
            params,
            trainable: None,
            nodes: Vec::new(),
        }
    }

    /// Only parameters flagged in `trainable` receive gradients; the rest
    /// are treated as constants and the backward pass skips them.
    pub fn with_trainable(params: &'p ParamStore, trainable: &'p [bool]) -> Self {
        Tape {
            params,
            trainable: Some(trainable),
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Array2<f64>, op: Op, parents: &[usize]) -> Var {
        let needs_grad = parents.iter().any(|&p| self.nodes[p].needs_grad);
        self.push_with(value, op, needs_grad, Vec::new())
    }

    fn push_with(&mut self, value: Array2<f64>, op: Op, needs_grad: bool, aux: Vec<f64>) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
            aux,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        match self.nodes[v.0].op {
            Op::Param(p) => &self.params.values[p],
            _ => &self.nodes[v.0].value,
        }
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.value(v).dim()
    }

    /// Constant input; no gradient flows into it.
    pub fn constant(&mut self, x: Array2<f64>) -> Var {
        self.push_with(x, Op::Leaf, false, Vec::new())
    }

    /// Input whose gradient is recorded (for probes and checks).
    pub fn input(&mut self, x: Array2<f64>) -> Var {
        self.push_with(x, Op::Leaf, true, Vec::new())
    }

    pub fn param(&mut self, pid: usize) -> Var {
        let trainable = self.trainable.is_none_or(|t| t[pid]);
        self.push_with(Array2::zeros((0, 0)), Op::Param(pid), trainable, Vec::new())
    }

    /// Copies the value into a fresh constant, severing gradient flow.
    pub fn detach(&mut self, v: Var) -> Var {
        let x = self.value(v).clone();
        self.constant(x)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        check("matmul", sa.1 == sb.0, || format!("{sa:?} · {sb:?}"))?;
        let y = self.value(a).dot(self.value(b));
        Ok(self.push(y, Op::MatMul(a.0, b.0), &[a.0, b.0]))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(), NnError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        check(op, sa == sb, || format!("{sa:?} vs {sb:?}"))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.same_shape("add", a, b)?;
        let y = self.value(a) + self.value(b);
        Ok(self.push(y, Op::Add(a.0, b.0), &[a.0, b.0]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.same_shape("sub", a, b)?;
        let y = self.value(a) - self.value(b);
        Ok(self.push(y, Op::Sub(a.0, b.0), &[a.0, b.0]))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.same_shape("mul", a, b)?;
        let y = self.value(a) * self.value(b);
        Ok(self.push(y, Op::Mul(a.0, b.0), &[a.0, b.0]))
    }

    fn row_shape(&self, op: &'static str, a: Var, row: Var) -> Result<(), NnError> {
        let (sa, sr) = (self.shape(a), self.shape(row));
        check(op, sr.0 == 1 && sr.1 == sa.1, || {
            format!("{sa:?} with row {sr:?}")
        })
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var, NnError> {
        self.row_shape("add_row", a, row)?;
        let y = self.value(a) + self.value(row);
        Ok(self.push(y, Op::AddRow(a.0, row.0), &[a.0, row.0]))
    }

    pub fn mul_row(&mut self, a: Var, row: Var) -> Result<Var, NnError> {
        self.row_shape("mul_row", a, row)?;
        let y = self.value(a) * self.value(row);
        Ok(self.push(y, Op::MulRow(a.0, row.0), &[a.0, row.0]))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let y = self.value(a).mapv(f64::tanh);
        self.push(y, Op::Tanh(a.0), &[a.0])
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let y = self.value(a) * c;
        self.push(y, Op::Scale(a.0, c), &[a.0])
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, NnError> {
        let rows = parts.first().map_or(0, |&p| self.shape(p).0);
        check(
            "concat_cols",
            parts.iter().all(|&p| self.shape(p).0 == rows),
            || {
                format!(
                    "row counts {:?}",
                    parts.iter().map(|&p| self.shape(p).0).collect::<Vec<_>>()
                )
            },
        )?;
        let views: Vec<ArrayView2<'_, f64>> = parts.iter().map(|&p| self.value(p).view()).collect();
        let y = ndarray::concatenate(Axis(1), &views).expect("checked row counts");
        let ids: Vec<usize> = parts.iter().map(|p| p.0).collect();
        Ok(self.push(y, Op::ConcatCols(ids.clone()), &ids))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, NnError> {
        let cols = parts.first().map_or(0, |&p| self.shape(p).1);
        check(
            "concat_rows",
            parts.iter().all(|&p| self.shape(p).1 == cols),
            || {
                format!(
                    "column counts {:?}",
                    parts.iter().map(|&p| self.shape(p).1).collect::<Vec<_>>()
                )
            },
        )?;
        let views: Vec<ArrayView2<'_, f64>> = parts.iter().map(|&p| self.value(p).view()).collect();
        let y = ndarray::concatenate(Axis(0), &views).expect("checked column counts");
        let ids: Vec<usize> = parts.iter().map(|p| p.0).collect();
        Ok(self.push(y, Op::ConcatRows(ids.clone()), &ids))
    }

    /// Row `k` of the result is row `index[k]` of `a`.
    pub fn gather(&mut self, a: Var, index: &Rc<Vec<usize>>) -> Result<Var, NnError> {
        let n = self.shape(a).0;
        if let Some(&bad) = index.iter().find(|&&i| i >= n) {
            return Err(NnError::IndexOutOfRange { index: bad, len: n });
        }
        let y = self.value(a).select(Axis(0), index);
        Ok(self.push(y, Op::Gather(a.0, index.clone()), &[a.0]))
    }

    /// Row `index[k]` of the `rows × c` result accumulates row `k` of `a`.
    pub fn scatter_sum(
        &mut self,
        a: Var,
        index: &Rc<Vec<usize>>,
        rows: usize,
    ) -> Result<Var, NnError> {
        let (m, c) = self.shape(a);
        check("scatter_sum", index.len() == m, || {
            format!("{} indices for {m} rows", index.len())
        })?;
        let y = scatter_rows(self.value(a), index, rows, c)?;
        Ok(self.push(y, Op::ScatterSum(a.0, index.clone()), &[a.0]))
    }

    /// Rows `start..end` of `a`.
    pub fn row_slice(&mut self, a: Var, start: usize, end: usize) -> Result<Var, NnError> {
        let (m, _) = self.shape(a);
        check("row_slice", start <= end && end <= m, || {
            format!("{start}..{end} of {m}")
        })?;
        let y = self.value(a).slice(s![start..end, ..]).to_owned();
        Ok(self.push(y, Op::RowSlice(a.0, start), &[a.0]))
    }

    /// `(x − mean) / √(var + ε)` per row, without affine terms.
    pub fn standardize(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let d = x.ncols() as f64;
        let mut y = x.clone();
        let mut inv = Vec::with_capacity(x.nrows());
        for mut r in y.rows_mut() {
            let mean = r.sum() / d;
            r.mapv_inplace(|v| v - mean);
            let var = r.iter().map(|v| v * v).sum::<f64>() / d;
            let is = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            r.mapv_inplace(|v| v * is);
            inv.push(is);
        }
        let needs = self.nodes[a.0].needs_grad;
        self.push_with(y, Op::Standardize(a.0), needs, inv)
    }

    /// Mean of squared entries as a `1 × 1` value.
    pub fn mean_square(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let m = if x.is_empty() {
            0.0
        } else {
            x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
        };
        self.push(Array2::from_elem((1, 1), m), Op::MeanSquare(a.0), &[a.0])
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v)[[0, 0]]
    }

    /// Gradients of the scalar `root` with respect to parameters and
    /// tracked inputs.
    pub fn backward(&self, root: Var) -> Gradients {
        self.backward_with(root, false)
    }

    /// Like [`backward`](Self::backward); with `keep_all` every intermediate
    /// gradient stays available through [`Gradients::wrt`].
    pub fn backward_with(&self, root: Var, keep_all: bool) -> Gradients {
        let n = self.nodes.len();
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; n];
        let mut params: Vec<Option<Array2<f64>>> = vec![None; self.params.len()];
        grads[root.0] = Some(Array2::ones(self.value(root).raw_dim()));
        for i in (0..=root.0).rev() {
            if !self.nodes[i].needs_grad {
                continue;
            }
            let node = &self.nodes[i];
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = (if keep_all {
                grads[i].clone()
            } else {
                grads[i].take()
            }) else {
                continue;
            };
            let wants = |p: usize| self.nodes[p].needs_grad;
            match &node.op {
                Op::Leaf => unreachable!("leaves keep their gradient"),
                Op::Param(p) => accumulate(&mut params[*p], g.clone()),
                Op::MatMul(a, b) => {
                    if wants(*a) {
                        accumulate(&mut grads[*a], g.dot(&self.value(Var(*b)).t()));
                    }
                    if wants(*b) {
                        accumulate(&mut grads[*b], self.value(Var(*a)).t().dot(&g));
                    }
                }
                Op::Add(a, b) => {
                    if wants(*a) {
                        accumulate(&mut grads[*a], g.clone());
                    }
                    if wants(*b) {
                        accumulate(&mut grads[*b], g.clone());
                    }
                }
                Op::Sub(a, b) => {
                    if wants(*a) {
                        accumulate(&mut grads[*a], g.clone());
                    }
                    if wants(*b) {
                        accumulate(&mut grads[*b], -&g);
                    }
                }
                Op::Mul(a, b) => {
                    if wants(*a) {
                        accumulate(&mut grads[*a], &g * self.value(Var(*b)));
                    }
                    if wants(*b) {
                        accumulate(&mut grads[*b], &g * self.value(Var(*a)));
                    }
                }
                Op::AddRow(a, r) => {
                    if wants(*r) {
                        accumulate(&mut grads[*r], g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    }
                    if wants(*a) {
                        accumulate(&mut grads[*a], g);
                    }
                }
                Op::MulRow(a, r) => {
                    if wants(*r) {
                        let gr = (&g * self.value(Var(*a)))
                            .sum_axis(Axis(0))
                            .insert_axis(Axis(0));
                        accumulate(&mut grads[*r], gr);
                    }
                    if wants(*a) {
                        accumulate(&mut grads[*a], &g * self.value(Var(*r)));
                    }
                }
                Op::Tanh(a) => {
                    let mut ga = g;
                    Zip::from(&mut ga)
                        .and(&node.value)
                        .for_each(|gv, &y| *gv *= 1.0 - y * y);
                    accumulate(&mut grads[*a], ga);
                }
                Op::Scale(a, c) => accumulate(&mut grads[*a], g * *c),
                Op::ConcatCols(ids) => {
                    let mut at = 0;
                    for &p in ids {
                        let w = self.value(Var(p)).ncols();
                        if wants(p) {
                            accumulate(&mut grads[p], g.slice(s![.., at..at + w]).to_owned());
                        }
                        at += w;
                    }
                }
                Op::ConcatRows(ids) => {
                    let mut at = 0;
                    for &p in ids {
                        let h = self.value(Var(p)).nrows();
                        if wants(p) {
                            accumulate(&mut grads[p], g.slice(s![at..at + h, ..]).to_owned());
                        }
                        at += h;
                    }
                }
                Op::Gather(a, index) => {
                    let (rows, c) = self.value(Var(*a)).dim();
                    let ga = scatter_rows(&g, index, rows, c).expect("indices checked in forward");
                    accumulate(&mut grads[*a], ga);
                }
                Op::ScatterSum(a, index) => accumulate(&mut grads[*a], g.select(Axis(0), index)),
                Op::RowSlice(a, start) => {
                    let mut ga = Array2::zeros(self.value(Var(*a)).raw_dim());
                    ga.slice_mut(s![*start..*start + g.nrows(), ..]).assign(&g);
                    accumulate(&mut grads[*a], ga);
                }
                Op::Standardize(a) => {
                    let xhat = &node.value;
                    let d = xhat.ncols() as f64;
                    let mut ga = Array2::zeros(xhat.raw_dim());
                    for ((mut out, (gr, xr)), &is) in ga
                        .rows_mut()
                        .into_iter()
                        .zip(g.rows().into_iter().zip(xhat.rows()))
                        .zip(&node.aux)
                    {
                        let sg = gr.sum();
                        let sgx = gr.iter().zip(xr.iter()).map(|(a, b)| a * b).sum::<f64>();
                        for ((o, &gv), &xv) in out.iter_mut().zip(gr.iter()).zip(xr.iter()) {
                            *o = is / d * (d * gv - sg - xv * sgx);
                        }
                    }
                    accumulate(&mut grads[*a], ga);
                }
                Op::MeanSquare(a) => {
                    let x = self.value(Var(*a));
                    let c = if x.is_empty() {
                        0.0
                    } else {
                        2.0 * g[[0, 0]] / x.len() as f64
                    };
                    accumulate(&mut grads[*a], x * c);
                }
            }
        }
        Gradients {
            nodes: grads,
            params,
        }
    }
}

fn scatter_rows(
    x: &Array2<f64>,
    index: &[usize],
    rows: usize,
    cols: usize,
) -> Result<Array2<f64>, NnError> {
    let mut y = Array2::<f64>::zeros((rows, cols));
    for (k, &r) in index.iter().enumerate() {
        if r >= rows {
            return Err(NnError::IndexOutOfRange {
                index: r,
                len: rows,
            });
        }
        let mut dst = y.row_mut(r);
        dst += &x.row(k);
    }
    Ok(y)
}

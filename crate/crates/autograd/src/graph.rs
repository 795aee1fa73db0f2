use ndarray::{s, Axis};

use crate::params::{Gradients, ParamId, ParamStore};
use crate::{AutogradError, Matrix};

const LAYER_NORM_EPS: f64 = 1e-5;

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Constant,
    Param(ParamId),
    MatMul(Var, Var),
    /// `a · bᵀ`
    MatMulNt(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    /// Multiply a matrix by a 1x1 node.
    ScaleBy(Var, Var),
    Gelu(Var),
    Softplus(Var),
    Square(Var),
    Recip(Var),
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        normed: Matrix,
        inv_std: Vec<f64>,
    },
    SoftmaxRows(Var),
    PickLogSoftmax {
        logits: Var,
        targets: Vec<usize>,
        probs: Matrix,
    },
    SoftCrossEntropy {
        logits: Var,
        targets: Matrix,
        probs: Matrix,
    },
    Gather {
        table: Var,
        ids: Vec<usize>,
    },
    SliceCols {
        x: Var,
        start: usize,
    },
    ConcatCols(Vec<Var>),
    MeanRows(Var),
    SumSq(Var),
}

struct Node {
    /// `None` for parameter nodes, whose value lives in the store.
    value: Option<Matrix>,
    op: Op,
}

/// A recording of one forward computation.
pub struct Graph<'p> {
    store: &'p ParamStore,
    nodes: Vec<Node>,
    param_vars: Vec<Option<Var>>,
}

fn check_same(op: &'static str, a: &Matrix, b: &Matrix) {
    if a.dim() != b.dim() {
        panic!(
            "{}",
            AutogradError::Shape {
                op,
                left: a.dim(),
                right: b.dim()
            }
        );
    }
}

fn gelu(x: f64) -> f64 {
    let c = (2.0 / std::f64::consts::PI).sqrt();
    0.5 * x * (1.0 + (c * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let c = (2.0 / std::f64::consts::PI).sqrt();
    let t = (c * (x + 0.044715 * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * c * (1.0 + 3.0 * 0.044715 * x * x)
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Row-wise softmax; `-inf` entries receive zero probability.
pub(crate) fn softmax_rows(x: &Matrix) -> Matrix {
    let mut out = x.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

fn log_softmax_rows(x: &Matrix) -> Matrix {
    let mut out = x.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        row.mapv_inplace(|v| v - lse);
    }
    out
}

impl<'p> Graph<'p> {
    pub fn new(store: &'p ParamStore) -> Self {
        Self {
            store,
            nodes: Vec::with_capacity(256),
            param_vars: vec![None; store.len()],
        }
    }

    pub fn store(&self) -> &'p ParamStore {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(Node {
            value: Some(value),
            op,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(m), _) => m,
            (None, Op::Param(id)) => self.store.get(*id),
            (None, _) => unreachable!("non-parameter node without a value"),
        }
    }

    /// Value of a 1x1 node.
    pub fn scalar(&self, v: Var) -> f64 {
        let m = self.value(v);
        debug_assert_eq!(m.dim(), (1, 1));
        m[[0, 0]]
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.value(v).dim()
    }

    /// Node for a stored parameter. Repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars[id.index()] {
            return v;
        }
        self.nodes.push(Node {
            value: None,
            op: Op::Param(id),
        });
        let v = Var(self.nodes.len() - 1);
        self.param_vars[id.index()] = Some(v);
        v
    }

    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Constant)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a).dot(self.value(b));
        self.push(out, Op::MatMul(a, b))
    }

    /// `a · bᵀ`
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a).dot(&self.value(b).t());
        self.push(out, Op::MatMulNt(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        check_same("add", x, y);
        let out = x + y;
        self.push(out, Op::Add(a, b))
    }

    /// Adds a `1 x n` row to every row of `x`.
    pub fn add_row(&mut self, x: Var, row: Var) -> Var {
        let (m, r) = (self.value(x), self.value(row));
        assert_eq!(r.nrows(), 1, "add_row expects a single row");
        assert_eq!(m.ncols(), r.ncols(), "add_row column mismatch");
        let out = m + r;
        self.push(out, Op::AddRow(x, row))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let out = self.value(x) * factor;
        self.push(out, Op::Scale(x, factor))
    }

    /// Multiplies `x` by the 1x1 node `s`.
    pub fn scale_by(&mut self, x: Var, s: Var) -> Var {
        let factor = self.scalar(s);
        let out = self.value(x) * factor;
        self.push(out, Op::ScaleBy(x, s))
    }

    pub fn gelu(&mut self, x: Var) -> Var {
        let out = self.value(x).mapv(gelu);
        self.push(out, Op::Gelu(x))
    }

    pub fn softplus(&mut self, x: Var) -> Var {
        let out = self.value(x).mapv(softplus);
        self.push(out, Op::Softplus(x))
    }

    pub fn square(&mut self, x: Var) -> Var {
        let out = self.value(x).mapv(|v| v * v);
        self.push(out, Op::Square(x))
    }

    pub fn recip(&mut self, x: Var) -> Var {
        let out = self.value(x).mapv(|v| 1.0 / v);
        self.push(out, Op::Recip(x))
    }

    /// Per-row layer normalization followed by an elementwise affine map.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Var {
        let input = self.value(x);
        let n = input.ncols() as f64;
        let mut normed = input.clone();
        let mut inv_std = Vec::with_capacity(input.nrows());
        for mut row in normed.rows_mut() {
            let mean = row.sum() / n;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let r = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            row.mapv_inplace(|v| (v - mean) * r);
            inv_std.push(r);
        }
        let out = &normed * self.value(gain) + self.value(bias);
        self.push(
            out,
            Op::LayerNorm {
                x,
                gain,
                bias,
                normed,
                inv_std,
            },
        )
    }

    /// Row-wise softmax. Entries equal to `-inf` act as masked positions.
    pub fn softmax_rows(&mut self, x: Var) -> Var {
        let out = softmax_rows(self.value(x));
        self.push(out, Op::SoftmaxRows(x))
    }

    /// `Σ_r log softmax(logits_r)[targets[r]]` as a 1x1 node.
    pub fn pick_log_softmax(&mut self, logits: Var, targets: &[usize]) -> Var {
        let z = self.value(logits);
        assert_eq!(z.nrows(), targets.len(), "one target per logit row");
        let logp = log_softmax_rows(z);
        let total: f64 = targets
            .iter()
            .enumerate()
            .map(|(r, &t)| logp[[r, t]])
            .sum();
        let probs = logp.mapv(f64::exp);
        self.push(
            Matrix::from_elem((1, 1), total),
            Op::PickLogSoftmax {
                logits,
                targets: targets.to_vec(),
                probs,
            },
        )
    }

    /// `-Σ_r Σ_c targets[r,c] · log softmax(logits_r)[c]` as a 1x1 node.
    pub fn soft_cross_entropy(&mut self, logits: Var, targets: Matrix) -> Var {
        let z = self.value(logits);
        check_same("soft_cross_entropy", z, &targets);
        let logp = log_softmax_rows(z);
        let total = -(&logp * &targets).sum();
        let probs = logp.mapv(f64::exp);
        self.push(
            Matrix::from_elem((1, 1), total),
            Op::SoftCrossEntropy {
                logits,
                targets,
                probs,
            },
        )
    }

    /// Selects rows of `table` by index.
    pub fn gather(&mut self, table: Var, ids: &[usize]) -> Var {
        let t = self.value(table);
        let mut out = Matrix::zeros((ids.len(), t.ncols()));
        for (r, &id) in ids.iter().enumerate() {
            out.row_mut(r).assign(&t.row(id));
        }
        self.push(
            out,
            Op::Gather {
                table,
                ids: ids.to_vec(),
            },
        )
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Var {
        let out = self.value(x).slice(s![.., start..start + len]).to_owned();
        self.push(out, Op::SliceCols { x, start })
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let out = ndarray::concatenate(Axis(1), &views).expect("concat_cols row mismatch");
        self.push(out, Op::ConcatCols(parts.to_vec()))
    }

    /// Mean over rows, giving a `1 x cols` node.
    pub fn mean_rows(&mut self, x: Var) -> Var {
        let out = self
            .value(x)
            .mean_axis(Axis(0))
            .expect("mean of empty matrix")
            .insert_axis(Axis(0));
        self.push(out, Op::MeanRows(x))
    }

    /// Sum of squared entries as a 1x1 node.
    pub fn sum_sq(&mut self, x: Var) -> Var {
        let total = self.value(x).iter().map(|v| v * v).sum();
        self.push(Matrix::from_elem((1, 1), total), Op::SumSq(x))
    }

    /// Reverse pass from a 1x1 loss.
    pub fn backward(&self, loss: Var) -> Result<Gradients, AutogradError> {
        let dim = self.value(loss).dim();
        if dim != (1, 1) {
            return Err(AutogradError::NonScalarLoss(dim));
        }
        let mut grads: Vec<Option<Matrix>> = Vec::with_capacity(self.nodes.len());
        grads.resize_with(self.nodes.len(), || None);
        grads[loss.0] = Some(Matrix::ones((1, 1)));
        let mut out = Gradients::with_len(self.store.len());

        fn acc(grads: &mut [Option<Matrix>], v: Var, delta: Matrix) {
            match &mut grads[v.0] {
                Some(g) => *g += &delta,
                slot @ None => *slot = Some(delta),
            }
        }

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            match &self.nodes[i].op {
                Op::Constant => {}
                Op::Param(id) => out.accumulate(*id, g),
                Op::MatMul(a, b) => {
                    let da = g.dot(&self.value(*b).t());
                    let db = self.value(*a).t().dot(&g);
                    acc(&mut grads, *a, da);
                    acc(&mut grads, *b, db);
                }
                Op::MatMulNt(a, b) => {
                    let da = g.dot(self.value(*b));
                    let db = g.t().dot(self.value(*a));
                    acc(&mut grads, *a, da);
                    acc(&mut grads, *b, db);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *b, g.clone());
                    acc(&mut grads, *a, g);
                }
                Op::AddRow(x, row) => {
                    let dr = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    acc(&mut grads, *row, dr);
                    acc(&mut grads, *x, g);
                }
                Op::Scale(x, f) => acc(&mut grads, *x, g * *f),
                Op::ScaleBy(x, s) => {
                    let ds = (&g * self.value(*x)).sum();
                    acc(&mut grads, *s, Matrix::from_elem((1, 1), ds));
                    acc(&mut grads, *x, g * self.scalar(*s));
                }
                Op::Gelu(x) => {
                    let dx = &g * &self.value(*x).mapv(gelu_grad);
                    acc(&mut grads, *x, dx);
                }
                Op::Softplus(x) => {
                    let dx = &g * &self.value(*x).mapv(sigmoid);
                    acc(&mut grads, *x, dx);
                }
                Op::Square(x) => {
                    let dx = &g * &self.value(*x).mapv(|v| 2.0 * v);
                    acc(&mut grads, *x, dx);
                }
                Op::Recip(x) => {
                    let dx = &g * &self.value(*x).mapv(|v| -1.0 / (v * v));
                    acc(&mut grads, *x, dx);
                }
                Op::LayerNorm {
                    x,
                    gain,
                    bias,
                    normed,
                    inv_std,
                } => {
                    let dgain = (&g * normed).sum_axis(Axis(0)).insert_axis(Axis(0));
                    let dbias = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    let dnormed = &g * self.value(*gain);
                    let n = normed.ncols() as f64;
                    let mut dx = Matrix::zeros(normed.raw_dim());
                    for r in 0..normed.nrows() {
                        let dn = dnormed.row(r);
                        let xh = normed.row(r);
                        let sum_dn = dn.sum();
                        let sum_dn_xh = dn.dot(&xh);
                        let scale = inv_std[r] / n;
                        for c in 0..normed.ncols() {
                            dx[[r, c]] = scale * (n * dn[c] - sum_dn - xh[c] * sum_dn_xh);
                        }
                    }
                    acc(&mut grads, *gain, dgain);
                    acc(&mut grads, *bias, dbias);
                    acc(&mut grads, *x, dx);
                }
                Op::SoftmaxRows(x) => {
                    let y = self.nodes[i].value.as_ref().expect("softmax value");
                    let mut dx = &g * y;
                    for (mut row, yrow) in dx.rows_mut().into_iter().zip(y.rows()) {
                        let dot = row.sum();
                        row.zip_mut_with(&yrow, |d, &p| *d -= p * dot);
                    }
                    acc(&mut grads, *x, dx);
                }
                Op::PickLogSoftmax {
                    logits,
                    targets,
                    probs,
                } => {
                    let upstream = g[[0, 0]];
                    let mut dz = probs * -upstream;
                    for (r, &t) in targets.iter().enumerate() {
                        dz[[r, t]] += upstream;
                    }
                    acc(&mut grads, *logits, dz);
                }
                Op::SoftCrossEntropy {
                    logits,
                    targets,
                    probs,
                } => {
                    let upstream = g[[0, 0]];
                    let mass = targets.sum_axis(Axis(1)).insert_axis(Axis(1));
                    let dz = (probs * &mass - targets) * upstream;
                    acc(&mut grads, *logits, dz);
                }
                Op::Gather { table, ids } => {
                    let mut dt = Matrix::zeros(self.value(*table).raw_dim());
                    for (r, &id) in ids.iter().enumerate() {
                        let mut row = dt.row_mut(id);
                        row += &g.row(r);
                    }
                    acc(&mut grads, *table, dt);
                }
                Op::SliceCols { x, start } => {
                    let mut dx = Matrix::zeros(self.value(*x).raw_dim());
                    dx.slice_mut(s![.., *start..*start + g.ncols()]).assign(&g);
                    acc(&mut grads, *x, dx);
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let w = self.value(p).ncols();
                        acc(&mut grads, p, g.slice(s![.., offset..offset + w]).to_owned());
                        offset += w;
                    }
                }
                Op::MeanRows(x) => {
                    let rows = self.value(*x).nrows();
                    let dx = g
                        .broadcast((rows, g.ncols()))
                        .expect("broadcast mean grad")
                        .mapv(|v| v / rows as f64);
                    acc(&mut grads, *x, dx);
                }
                Op::SumSq(x) => {
                    let dx = self.value(*x) * (2.0 * g[[0, 0]]);
                    acc(&mut grads, *x, dx);
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn param_nodes_are_shared() {
        let mut store = ParamStore::new();
        let w = store.add("w", array![[1.0]]);
        let mut g = Graph::new(&store);
        assert_eq!(g.param(w), g.param(w));
        assert_eq!(g.len(), 1);
    }

    #[test]
    fn reused_param_accumulates_gradient() {
        let mut store = ParamStore::new();
        let w = store.add("w", array![[2.0, 3.0]]);
        let mut g = Graph::new(&store);
        let p = g.param(w);
        let twice = g.add(p, p);
        let loss = g.sum_sq(twice);
        let grads = g.backward(loss).unwrap();
        // d/dw (2w)^2 = 8w
        assert_eq!(grads.get(w).unwrap(), &array![[16.0, 24.0]]);
    }

    #[test]
    fn masked_softmax_entries_get_zero_mass() {
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        let x = g.constant(array![[0.0, f64::NEG_INFINITY], [1.0, 1.0]]);
        let y = g.softmax_rows(x);
        assert_eq!(g.value(y), &array![[1.0, 0.0], [0.5, 0.5]]);
    }

    #[test]
    fn pick_log_softmax_matches_direct_formula() {
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        let x = g.constant(array![[2.0, 0.0]]);
        let lp = g.pick_log_softmax(x, &[0]);
        let expected = (2f64.exp() / (2f64.exp() + 1.0)).ln();
        assert!((g.scalar(lp) - expected).abs() < 1e-12);
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        let x = g.constant(Matrix::zeros((2, 2)));
        assert!(matches!(
            g.backward(x),
            Err(AutogradError::NonScalarLoss((2, 2)))
        ));
    }
}

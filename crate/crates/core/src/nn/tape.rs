//! Reverse-mode differentiation over row-major matrices.
//!
//! Nodes are appended in evaluation order, so a single reverse sweep from the
//! loss visits every node after all of its consumers. Gradients are returned
//! per registered [`ParamVector`] in its flat layout.
//!
//! Subgradients: `min` sends the gradient to its first argument on ties;
//! `clip` passes the gradient for `lo <= x <= hi` and blocks it outside.

use super::{affine_rows, log_softmax_groups, tanh_in_place, NnError, ParamVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(usize);

#[derive(Debug, Clone)]
enum Op {
    Input,
    Param(usize),
    Affine { x: usize, pid: usize, layer: usize },
    Tanh(usize),
    LogSoftmax { x: usize, n: usize },
    GatherSum { x: usize, n: usize, picks: Vec<Option<usize>> },
    Entropy { x: usize, n: usize, mask: Vec<bool> },
    Exp(usize),
    Square(usize),
    AddConst(usize),
    MulConst(usize, f64),
    Clip(usize, f64, f64),
    Min(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Sum(usize),
    WeightedMean(usize, Vec<f64>),
}

#[derive(Debug, Clone)]
struct Node {
    rows: usize,
    cols: usize,
    value: Vec<f64>,
    op: Op,
    needs_grad: bool,
}

pub struct Tape<'p> {
    nodes: Vec<Node>,
    params: Vec<&'p ParamVector>,
}

impl Default for Tape<'_> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'p> Tape<'p> {
    pub fn new() -> Self {
        Self { nodes: Vec::new(), params: Vec::new() }
    }

    pub fn register(&mut self, params: &'p ParamVector) -> ParamId {
        self.params.push(params);
        ParamId(self.params.len() - 1)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        (self.nodes[v.0].rows, self.nodes[v.0].cols)
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[0]
    }

    fn push(&mut self, rows: usize, cols: usize, value: Vec<f64>, op: Op, needs_grad: bool) -> Var {
        debug_assert_eq!(value.len(), rows * cols);
        self.nodes.push(Node { rows, cols, value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn node(&self, v: Var) -> &Node {
        &self.nodes[v.0]
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<(), NnError> {
        if self.shape(a) != self.shape(b) {
            return Err(NnError::Contract(format!(
                "{what}: shape {:?} vs {:?}",
                self.shape(a),
                self.shape(b)
            )));
        }
        Ok(())
    }

    pub fn input(&mut self, rows: usize, cols: usize, data: Vec<f64>) -> Result<Var, NnError> {
        if data.len() != rows * cols {
            return Err(NnError::Contract(format!("input of {} values is not {rows} x {cols}", data.len())));
        }
        Ok(self.push(rows, cols, data, Op::Input, false))
    }

    /// All parameters of `pid` as a `1 x len` row.
    pub fn param(&mut self, pid: ParamId) -> Var {
        let values = self.params[pid.0].values.clone();
        let n = values.len();
        self.push(1, n, values, Op::Param(pid.0), true)
    }

    pub fn affine(&mut self, x: Var, pid: ParamId, layer: usize) -> Result<Var, NnError> {
        let p = self.params[pid.0];
        let shape = *p
            .layers()
            .get(layer)
            .ok_or_else(|| NnError::Contract(format!("layer {layer} out of range")))?;
        let (rows, cols) = self.shape(x);
        if cols != shape.fan_in {
            return Err(NnError::Contract(format!("affine: {cols} inputs, layer expects {}", shape.fan_in)));
        }
        let mut y = vec![0.0; rows * shape.fan_out];
        affine_rows(p.weights(layer), p.bias(layer), self.value(x), rows, shape.fan_in, shape.fan_out, &mut y);
        Ok(self.push(rows, shape.fan_out, y, Op::Affine { x: x.0, pid: pid.0, layer }, true))
    }

    /// Full network: affine layers with tanh between them, raw final output.
    pub fn mlp(&mut self, x: Var, pid: ParamId) -> Result<Var, NnError> {
        let n_layers = self.params[pid.0].layers().len();
        let mut h = x;
        for l in 0..n_layers {
            h = self.affine(h, pid, l)?;
            if l + 1 < n_layers {
                h = self.tanh(h);
            }
        }
        Ok(h)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let n = self.node(x);
        let (rows, cols, g) = (n.rows, n.cols, n.needs_grad);
        let mut y = n.value.clone();
        tanh_in_place(&mut y);
        self.push(rows, cols, y, Op::Tanh(x.0), g)
    }

    /// Log-softmax over consecutive groups of `n` columns.
    pub fn log_softmax(&mut self, x: Var, n: usize) -> Result<Var, NnError> {
        let (rows, cols) = self.shape(x);
        if n == 0 || cols % n != 0 {
            return Err(NnError::Contract(format!("log_softmax: {cols} columns in groups of {n}")));
        }
        let mut y = vec![0.0; rows * cols];
        log_softmax_groups(self.value(x), n, &mut y);
        let g = self.node(x).needs_grad;
        Ok(self.push(rows, cols, y, Op::LogSoftmax { x: x.0, n }, g))
    }

    /// Per row, the sum over groups of the picked column. `picks` is row-major
    /// `rows x groups`; `None` drops that group from the sum.
    pub fn gather_sum(&mut self, x: Var, n: usize, picks: Vec<Option<usize>>) -> Result<Var, NnError> {
        let (rows, cols) = self.shape(x);
        if n == 0 || cols % n != 0 || picks.len() != rows * (cols / n) {
            return Err(NnError::Contract("gather_sum: picks do not match the grouped shape".into()));
        }
        if picks.iter().flatten().any(|&a| a >= n) {
            return Err(NnError::Contract("gather_sum: action index out of range".into()));
        }
        let groups = cols / n;
        let xv = self.value(x);
        let y = (0..rows)
            .map(|r| {
                (0..groups)
                    .filter_map(|g| picks[r * groups + g].map(|a| xv[r * cols + g * n + a]))
                    .sum()
            })
            .collect();
        let gr = self.node(x).needs_grad;
        Ok(self.push(rows, 1, y, Op::GatherSum { x: x.0, n, picks }, gr))
    }

    /// Per row, the summed entropy of the unmasked groups of a log-prob input.
    pub fn entropy(&mut self, logp: Var, n: usize, mask: Vec<bool>) -> Result<Var, NnError> {
        let (rows, cols) = self.shape(logp);
        if n == 0 || cols % n != 0 || mask.len() != rows * (cols / n) {
            return Err(NnError::Contract("entropy: mask does not match the grouped shape".into()));
        }
        let groups = cols / n;
        let xv = self.value(logp);
        let y = (0..rows)
            .map(|r| {
                (0..groups)
                    .filter(|g| mask[r * groups + g])
                    .map(|g| {
                        let s = &xv[r * cols + g * n..r * cols + (g + 1) * n];
                        -s.iter().map(|lp| lp.exp() * lp).sum::<f64>()
                    })
                    .sum()
            })
            .collect();
        let gr = self.node(logp).needs_grad;
        Ok(self.push(rows, 1, y, Op::Entropy { x: logp.0, n, mask }, gr))
    }

    fn unary(&mut self, x: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let n = self.node(x);
        let (rows, cols, g) = (n.rows, n.cols, n.needs_grad);
        let y = n.value.iter().map(|v| f(*v)).collect();
        self.push(rows, cols, y, op, g)
    }

    pub fn exp(&mut self, x: Var) -> Var {
        self.unary(x, f64::exp, Op::Exp(x.0))
    }

    pub fn square(&mut self, x: Var) -> Var {
        self.unary(x, |v| v * v, Op::Square(x.0))
    }

    pub fn add_const(&mut self, x: Var, c: f64) -> Var {
        self.unary(x, |v| v + c, Op::AddConst(x.0))
    }

    pub fn mul_const(&mut self, x: Var, c: f64) -> Var {
        self.unary(x, |v| v * c, Op::MulConst(x.0, c))
    }

    pub fn clip(&mut self, x: Var, lo: f64, hi: f64) -> Var {
        self.unary(x, |v| v.clamp(lo, hi), Op::Clip(x.0, lo, hi))
    }

    fn binary(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op, what: &str) -> Result<Var, NnError> {
        self.same_shape(a, b, what)?;
        let (rows, cols) = self.shape(a);
        let g = self.node(a).needs_grad || self.node(b).needs_grad;
        let y = self.value(a).iter().zip(self.value(b)).map(|(x, y)| f(*x, *y)).collect();
        Ok(self.push(rows, cols, y, op, g))
    }

    pub fn min(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.binary(a, b, |x, y| if x <= y { x } else { y }, Op::Min(a.0, b.0), "min")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.binary(a, b, |x, y| x + y, Op::Add(a.0, b.0), "add")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.binary(a, b, |x, y| x - y, Op::Sub(a.0, b.0), "sub")
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.binary(a, b, |x, y| x * y, Op::Mul(a.0, b.0), "mul")
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).iter().sum();
        let g = self.node(x).needs_grad;
        self.push(1, 1, vec![s], Op::Sum(x.0), g)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let n = self.value(x).len();
        self.weighted_mean(x, vec![1.0; n]).expect("uniform weights match")
    }

    /// `sum(w * x) / sum(w)` over all entries. Zero total weight gives 0.
    pub fn weighted_mean(&mut self, x: Var, weights: Vec<f64>) -> Result<Var, NnError> {
        if weights.len() != self.value(x).len() {
            return Err(NnError::Contract("weighted_mean: weight count mismatch".into()));
        }
        let total: f64 = weights.iter().sum();
        let m = if total > 0.0 {
            self.value(x).iter().zip(&weights).map(|(v, w)| v * w).sum::<f64>() / total
        } else {
            0.0
        };
        let g = self.node(x).needs_grad;
        Ok(self.push(1, 1, vec![m], Op::WeightedMean(x.0, weights), g))
    }

    /// Gradient of a `1 x 1` node with respect to every registered parameter
    /// vector, in registration order.
    pub fn backward(&self, loss: Var) -> Result<Vec<Vec<f64>>, NnError> {
        if self.shape(loss) != (1, 1) {
            return Err(NnError::Contract("backward needs a scalar loss".into()));
        }
        if !self.scalar(loss).is_finite() {
            return Err(NnError::NonFinite("loss"));
        }
        let mut pgrads: Vec<Vec<f64>> = self.params.iter().map(|p| vec![0.0; p.len()]).collect();
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);

        for id in (0..=loss.0).rev() {
            let Some(gy) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            let send = |grads: &mut Vec<Option<Vec<f64>>>, to: usize, f: &dyn Fn(usize) -> f64| {
                if !self.nodes[to].needs_grad {
                    return;
                }
                let len = self.nodes[to].value.len();
                let g = grads[to].get_or_insert_with(|| vec![0.0; len]);
                for (i, gi) in g.iter_mut().enumerate() {
                    *gi += f(i);
                }
            };
            match &node.op {
                Op::Input => {}
                Op::Param(pid) => {
                    for (a, b) in pgrads[*pid].iter_mut().zip(&gy) {
                        *a += b;
                    }
                }
                Op::Affine { x, pid, layer } => {
                    let p = self.params[*pid];
                    let shape = p.layers()[*layer];
                    let (fi, fo) = (shape.fan_in, shape.fan_out);
                    let xv = &self.nodes[*x].value;
                    let w = p.weights(*layer);
                    let pg = &mut pgrads[*pid];
                    let (wr, br) = (shape.weight_range(), shape.bias_range());
                    for r in 0..node.rows {
                        let gr = &gy[r * fo..(r + 1) * fo];
                        let xr = &xv[r * fi..(r + 1) * fi];
                        for o in 0..fo {
                            let g = gr[o];
                            if g == 0.0 {
                                continue;
                            }
                            pg[br.start + o] += g;
                            let dw = &mut pg[wr.start + o * fi..wr.start + (o + 1) * fi];
                            for i in 0..fi {
                                dw[i] += g * xr[i];
                            }
                        }
                    }
                    if self.nodes[*x].needs_grad {
                        let mut gx = vec![0.0; node.rows * fi];
                        for r in 0..node.rows {
                            for o in 0..fo {
                                let g = gy[r * fo + o];
                                if g == 0.0 {
                                    continue;
                                }
                                let wrow = &w[o * fi..(o + 1) * fi];
                                for i in 0..fi {
                                    gx[r * fi + i] += g * wrow[i];
                                }
                            }
                        }
                        send(&mut grads, *x, &|i| gx[i]);
                    }
                }
                Op::Tanh(x) => {
                    let y = &node.value;
                    send(&mut grads, *x, &|i| gy[i] * (1.0 - y[i] * y[i]));
                }
                Op::LogSoftmax { x, n } => {
                    let y = &node.value;
                    let mut gx = vec![0.0; y.len()];
                    for (k, (yg, gg)) in y.chunks_exact(*n).zip(gy.chunks_exact(*n)).enumerate() {
                        let s: f64 = gg.iter().sum();
                        for j in 0..*n {
                            gx[k * n + j] = gg[j] - yg[j].exp() * s;
                        }
                    }
                    send(&mut grads, *x, &|i| gx[i]);
                }
                Op::GatherSum { x, n, picks } => {
                    let cols = self.nodes[*x].cols;
                    let groups = cols / n;
                    let mut gx = vec![0.0; self.nodes[*x].value.len()];
                    for r in 0..node.rows {
                        for g in 0..groups {
                            if let Some(a) = picks[r * groups + g] {
                                gx[r * cols + g * n + a] += gy[r];
                            }
                        }
                    }
                    send(&mut grads, *x, &|i| gx[i]);
                }
                Op::Entropy { x, n, mask } => {
                    let xv = &self.nodes[*x].value;
                    let cols = self.nodes[*x].cols;
                    let groups = cols / n;
                    let mut gx = vec![0.0; xv.len()];
                    for r in 0..node.rows {
                        for g in 0..groups {
                            if !mask[r * groups + g] {
                                continue;
                            }
                            for j in 0..*n {
                                let i = r * cols + g * n + j;
                                gx[i] = -gy[r] * xv[i].exp() * (xv[i] + 1.0);
                            }
                        }
                    }
                    send(&mut grads, *x, &|i| gx[i]);
                }
                Op::Exp(x) => {
                    let y = &node.value;
                    send(&mut grads, *x, &|i| gy[i] * y[i]);
                }
                Op::Square(x) => {
                    let xv = &self.nodes[*x].value;
                    send(&mut grads, *x, &|i| 2.0 * xv[i] * gy[i]);
                }
                Op::AddConst(x) => send(&mut grads, *x, &|i| gy[i]),
                Op::MulConst(x, c) => send(&mut grads, *x, &|i| gy[i] * c),
                Op::Clip(x, lo, hi) => {
                    let xv = &self.nodes[*x].value;
                    send(&mut grads, *x, &|i| if xv[i] >= *lo && xv[i] <= *hi { gy[i] } else { 0.0 });
                }
                Op::Min(a, b) => {
                    let (av, bv) = (&self.nodes[*a].value, &self.nodes[*b].value);
                    send(&mut grads, *a, &|i| if av[i] <= bv[i] { gy[i] } else { 0.0 });
                    send(&mut grads, *b, &|i| if av[i] <= bv[i] { 0.0 } else { gy[i] });
                }
                Op::Add(a, b) => {
                    send(&mut grads, *a, &|i| gy[i]);
                    send(&mut grads, *b, &|i| gy[i]);
                }
                Op::Sub(a, b) => {
                    send(&mut grads, *a, &|i| gy[i]);
                    send(&mut grads, *b, &|i| -gy[i]);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (&self.nodes[*a].value, &self.nodes[*b].value);
                    send(&mut grads, *a, &|i| gy[i] * bv[i]);
                    send(&mut grads, *b, &|i| gy[i] * av[i]);
                }
                Op::Sum(x) => send(&mut grads, *x, &|_| gy[0]),
                Op::WeightedMean(x, w) => {
                    let total: f64 = w.iter().sum();
                    if total > 0.0 {
                        send(&mut grads, *x, &|i| gy[0] * w[i] / total);
                    }
                }
            }
        }
        if pgrads.iter().flatten().any(|g| !g.is_finite()) {
            return Err(NnError::NonFinite("gradient"));
        }
        Ok(pgrads)
    }
}

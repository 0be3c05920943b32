//! The gradient tape. Every operation appends one entry holding the forward
//! value plus what backward needs; `backward()` walks entries in reverse and
//! accumulates vector-Jacobian products into the leaves.

use std::cell::RefCell;
use std::rc::Rc;

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;

use crate::segments::Segments;
use crate::{Activation, BN_EPS, BN_MOMENTUM};

/// Train/eval switch for batch norm and dropout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Exponential running statistics owned by a batch-norm site.
#[derive(Debug, Clone)]
pub struct RunningStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl RunningStats {
    /// Fresh statistics: zero mean, unit variance.
    pub fn new(width: usize) -> Self {
        RunningStats {
            mean: vec![0.0; width],
            var: vec![1.0; width],
        }
    }
}

/// Gradient rule for an operation fused outside this module. Returns one
/// contribution per input (None for inputs that need no gradient).
pub trait CustomGrad {
    fn backward(
        &self,
        out_grad: &Array2<f64>,
        out_val: &Array2<f64>,
        inputs: &[Rc<Array2<f64>>],
        needs: &[bool],
    ) -> Vec<Option<Array2<f64>>>;
}

enum Back {
    Leaf,
    MatMul { a: usize, b: usize },
    Add { a: usize, b: usize },
    MulElem { a: usize, b: usize },
    Scale { a: usize, k: f64 },
    AddRow { a: usize, row: usize },
    MulCol { a: usize, col: usize },
    LeakyRelu { a: usize, slope: f64 },
    GatherRows { a: usize, idx: Rc<Vec<usize>>, src_rows: usize },
    SegmentSum { a: usize, segs: Rc<Segments> },
    SegmentSoftmax { a: usize, segs: Rc<Segments> },
    BatchNorm(Box<BnSaved>),
    Dropout { a: usize, mask: Rc<Array2<f64>> },
    CrossEntropy { logits: usize, softmax: Array2<f64>, labels: Rc<Vec<usize>> },
    SumAll { a: usize },
    ConcatCols { parts: Vec<(usize, usize)> },
    Custom { inputs: Vec<usize>, op: Box<dyn CustomGrad> },
}

struct BnSaved {
    a: usize,
    gamma: usize,
    beta: usize,
    mean: Vec<f64>,
    inv_std: Vec<f64>,
    train: bool,
}

struct TapeInner {
    vals: RefCell<Vec<Rc<Array2<f64>>>>,
    grads: RefCell<Vec<Option<Array2<f64>>>>,
    backs: RefCell<Vec<Back>>,
    needs: RefCell<Vec<bool>>,
}

/// A fresh tape is created per forward/backward step; parameters enter as
/// `param` leaves and their gradients are read back after `backward`.
pub struct Tape {
    inner: Rc<TapeInner>,
}

/// Handle to one tape entry. Cheap to clone.
#[derive(Clone)]
pub struct Tensor {
    inner: Rc<TapeInner>,
    idx: usize,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            inner: Rc::new(TapeInner {
                vals: RefCell::new(Vec::new()),
                grads: RefCell::new(Vec::new()),
                backs: RefCell::new(Vec::new()),
                needs: RefCell::new(Vec::new()),
            }),
        }
    }

    fn push(&self, value: Array2<f64>, back: Back, needs: bool) -> Tensor {
        let mut vals = self.inner.vals.borrow_mut();
        vals.push(Rc::new(value));
        self.inner.grads.borrow_mut().push(None);
        self.inner.backs.borrow_mut().push(back);
        self.inner.needs.borrow_mut().push(needs);
        Tensor {
            inner: Rc::clone(&self.inner),
            idx: vals.len() - 1,
        }
    }

    /// Constant input: no gradient tracked or propagated into it.
    pub fn leaf(&self, value: Array2<f64>) -> Tensor {
        self.push(value, Back::Leaf, false)
    }

    /// Learnable input: `backward` accumulates dLoss/dLeaf here.
    pub fn param(&self, value: Array2<f64>) -> Tensor {
        self.push(value, Back::Leaf, true)
    }

    /// Appends a fused operation with a caller-supplied gradient rule.
    pub fn custom(&self, inputs: &[&Tensor], value: Array2<f64>, op: Box<dyn CustomGrad>) -> Tensor {
        let idxs: Vec<usize> = inputs
            .iter()
            .map(|t| {
                assert!(Rc::ptr_eq(&t.inner, &self.inner), "tensor from another tape");
                t.idx
            })
            .collect();
        let needs = inputs.iter().any(|t| t.requires_grad());
        self.push(value, Back::Custom { inputs: idxs, op }, needs)
    }
}

fn same_tape(a: &Tensor, b: &Tensor) {
    assert!(
        Rc::ptr_eq(&a.inner, &b.inner),
        "operands live on different tapes"
    );
}

impl Tensor {
    pub fn value(&self) -> Rc<Array2<f64>> {
        Rc::clone(&self.inner.vals.borrow()[self.idx])
    }

    pub fn shape(&self) -> (usize, usize) {
        let v = self.inner.vals.borrow();
        let d = v[self.idx].dim();
        d
    }

    pub fn requires_grad(&self) -> bool {
        self.inner.needs.borrow()[self.idx]
    }

    /// Accumulated gradient, or None when nothing flowed here (or the entry
    /// does not require gradients).
    pub fn grad(&self) -> Option<Array2<f64>> {
        self.inner.grads.borrow()[self.idx].clone()
    }

    fn tape(&self) -> Tape {
        Tape {
            inner: Rc::clone(&self.inner),
        }
    }

    fn needs(&self) -> bool {
        self.requires_grad()
    }

    pub fn matmul(&self, other: &Tensor) -> Tensor {
        same_tape(self, other);
        let (a, b) = (self.value(), other.value());
        assert_eq!(a.ncols(), b.nrows(), "matmul inner dimensions disagree");
        let out = a.dot(&*b);
        self.tape().push(
            out,
            Back::MatMul { a: self.idx, b: other.idx },
            self.needs() || other.needs(),
        )
    }

    pub fn add(&self, other: &Tensor) -> Tensor {
        same_tape(self, other);
        let (a, b) = (self.value(), other.value());
        assert_eq!(a.dim(), b.dim(), "add shapes disagree");
        let out = &*a + &*b;
        self.tape().push(
            out,
            Back::Add { a: self.idx, b: other.idx },
            self.needs() || other.needs(),
        )
    }

    pub fn mul_elem(&self, other: &Tensor) -> Tensor {
        same_tape(self, other);
        let (a, b) = (self.value(), other.value());
        assert_eq!(a.dim(), b.dim(), "mul_elem shapes disagree");
        let out = &*a * &*b;
        self.tape().push(
            out,
            Back::MulElem { a: self.idx, b: other.idx },
            self.needs() || other.needs(),
        )
    }

    pub fn scale(&self, k: f64) -> Tensor {
        let out = self.value().as_ref() * k;
        self.tape().push(out, Back::Scale { a: self.idx, k }, self.needs())
    }

    /// Adds a 1 x C row vector to every row.
    pub fn add_row(&self, row: &Tensor) -> Tensor {
        same_tape(self, row);
        let (a, r) = (self.value(), row.value());
        assert_eq!(r.nrows(), 1, "bias must be a single row");
        assert_eq!(a.ncols(), r.ncols(), "bias width disagrees");
        let out = &*a + &r.row(0);
        self.tape().push(
            out,
            Back::AddRow { a: self.idx, row: row.idx },
            self.needs() || row.needs(),
        )
    }

    /// Multiplies every row by the matching entry of an N x 1 column.
    pub fn mul_col(&self, col: &Tensor) -> Tensor {
        same_tape(self, col);
        let (a, c) = (self.value(), col.value());
        assert_eq!(c.ncols(), 1, "broadcast factor must be a single column");
        assert_eq!(a.nrows(), c.nrows(), "broadcast length disagrees");
        let out = &*a * &c.column(0).insert_axis(Axis(1));
        self.tape().push(
            out,
            Back::MulCol { a: self.idx, col: col.idx },
            self.needs() || col.needs(),
        )
    }

    pub fn leaky_relu(&self, slope: f64) -> Tensor {
        let out = self.value().mapv(|x| if x >= 0.0 { x } else { slope * x });
        self.tape().push(
            out,
            Back::LeakyRelu { a: self.idx, slope },
            self.needs(),
        )
    }

    pub fn relu(&self) -> Tensor {
        self.leaky_relu(0.0)
    }

    pub fn activation(&self, kind: Activation) -> Tensor {
        match kind {
            Activation::Relu => self.relu(),
            Activation::LeakyRelu(s) => self.leaky_relu(s),
            Activation::Identity => self.clone(),
        }
    }

    /// out[k, :] = self[idx[k], :]
    pub fn gather_rows(&self, idx: &Rc<Vec<usize>>) -> Tensor {
        let a = self.value();
        let mut out = Array2::<f64>::zeros((idx.len(), a.ncols()));
        for (k, &i) in idx.iter().enumerate() {
            out.row_mut(k).assign(&a.row(i));
        }
        self.tape().push(
            out,
            Back::GatherRows {
                a: self.idx,
                idx: Rc::clone(idx),
                src_rows: a.nrows(),
            },
            self.needs(),
        )
    }

    /// Sums rows within each contiguous segment; empty segments give zeros.
    pub fn segment_sum(&self, segs: &Rc<Segments>) -> Tensor {
        let a = self.value();
        assert_eq!(a.nrows(), segs.total_len(), "segment cover mismatch");
        let mut out = Array2::<f64>::zeros((segs.num_segments(), a.ncols()));
        for (s, (lo, hi)) in segs.iter_spans().enumerate() {
            let mut row = out.row_mut(s);
            for r in lo..hi {
                row += &a.row(r);
            }
        }
        self.tape().push(
            out,
            Back::SegmentSum { a: self.idx, segs: Rc::clone(segs) },
            self.needs(),
        )
    }

    /// Column-independent softmax within each contiguous segment. Every
    /// segment must be nonempty (neighborhoods always hold the self-loop).
    pub fn segment_softmax(&self, segs: &Rc<Segments>) -> Tensor {
        let a = self.value();
        assert_eq!(a.nrows(), segs.total_len(), "segment cover mismatch");
        let cols = a.ncols();
        let mut out = a.as_ref().clone();
        let mut mx = vec![0.0f64; cols];
        let mut sum = vec![0.0f64; cols];
        for (lo, hi) in segs.iter_spans() {
            assert!(hi > lo, "segment_softmax on an empty segment");
            mx.copy_from_slice(a.row(lo).to_slice().expect("row-major input"));
            for r in lo + 1..hi {
                for (m, &v) in mx.iter_mut().zip(a.row(r).iter()) {
                    if v > *m {
                        *m = v;
                    }
                }
            }
            sum.iter_mut().for_each(|s| *s = 0.0);
            for r in lo..hi {
                let mut row = out.row_mut(r);
                for (c, x) in row.iter_mut().enumerate() {
                    *x = (*x - mx[c]).exp();
                    sum[c] += *x;
                }
            }
            for r in lo..hi {
                let mut row = out.row_mut(r);
                for (c, x) in row.iter_mut().enumerate() {
                    *x /= sum[c];
                }
            }
        }
        self.tape().push(
            out,
            Back::SegmentSoftmax { a: self.idx, segs: Rc::clone(segs) },
            self.needs(),
        )
    }

    /// Column-wise batch normalization. Train mode standardizes with batch
    /// statistics and folds them into `running`; eval mode reads `running`
    /// and never mutates it.
    pub fn batch_norm(
        &self,
        gamma: &Tensor,
        beta: &Tensor,
        running: &RefCell<RunningStats>,
        mode: Mode,
    ) -> Tensor {
        same_tape(self, gamma);
        same_tape(self, beta);
        let a = self.value();
        let (n, c) = a.dim();
        assert_eq!(gamma.shape(), (1, c), "gamma must be 1 x C");
        assert_eq!(beta.shape(), (1, c), "beta must be 1 x C");
        let train = mode == Mode::Train;
        assert!(!train || n >= 2, "batch norm needs at least 2 rows in train mode");

        let (mean, inv_std) = if train {
            let mean: Vec<f64> = a.mean_axis(Axis(0)).unwrap().to_vec();
            let mut var = vec![0.0f64; c];
            for row in a.rows() {
                for (j, &x) in row.iter().enumerate() {
                    let d = x - mean[j];
                    var[j] += d * d;
                }
            }
            var.iter_mut().for_each(|v| *v /= n as f64);
            {
                let mut rs = running.borrow_mut();
                assert_eq!(rs.mean.len(), c, "running stats width disagrees");
                let unbias = n as f64 / (n as f64 - 1.0);
                for j in 0..c {
                    rs.mean[j] = (1.0 - BN_MOMENTUM) * rs.mean[j] + BN_MOMENTUM * mean[j];
                    rs.var[j] = (1.0 - BN_MOMENTUM) * rs.var[j] + BN_MOMENTUM * var[j] * unbias;
                }
            }
            let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
            (mean, inv_std)
        } else {
            let rs = running.borrow();
            assert_eq!(rs.mean.len(), c, "running stats width disagrees");
            let inv_std: Vec<f64> = rs.var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
            (rs.mean.clone(), inv_std)
        };

        let g = gamma.value();
        let b = beta.value();
        let gr = g.as_slice().expect("gamma is standard layout");
        let br = b.as_slice().expect("beta is standard layout");
        let av = a.as_slice().expect("tape values are standard layout");
        let mut out = Array2::<f64>::zeros((n, c));
        {
            let os = out.as_slice_mut().unwrap();
            for r in 0..n {
                let base = r * c;
                for j in 0..c {
                    os[base + j] = (av[base + j] - mean[j]) * inv_std[j] * gr[j] + br[j];
                }
            }
        }
        self.tape().push(
            out,
            Back::BatchNorm(Box::new(BnSaved {
                a: self.idx,
                gamma: gamma.idx,
                beta: beta.idx,
                mean,
                inv_std,
                train,
            })),
            self.needs() || gamma.needs() || beta.needs(),
        )
    }

    /// Inverted dropout: train mode zeroes entries with probability `rate`
    /// and scales survivors by 1/(1-rate); eval mode is the identity.
    pub fn dropout<R: Rng>(&self, rate: f64, mode: Mode, rng: &mut R) -> Tensor {
        assert!((0.0..1.0).contains(&rate), "dropout rate must be in [0, 1)");
        if mode == Mode::Eval || rate == 0.0 {
            return self.clone();
        }
        let keep = 1.0 - rate;
        let scale = 1.0 / keep;
        let a = self.value();
        let mask = Array2::from_shape_fn(a.dim(), |_| {
            if rng.gen::<f64>() < keep {
                scale
            } else {
                0.0
            }
        });
        let out = &*a * &mask;
        self.tape().push(
            out,
            Back::Dropout { a: self.idx, mask: Rc::new(mask) },
            self.needs(),
        )
    }

    /// Mean negative log-likelihood of `labels` under row-wise softmax.
    /// Output is a 1 x 1 tensor.
    pub fn cross_entropy(&self, labels: &[usize]) -> Tensor {
        let logits = self.value();
        let (g, k) = logits.dim();
        assert_eq!(labels.len(), g, "one label per row required");
        let mut softmax = Array2::<f64>::zeros((g, k));
        let mut loss = 0.0;
        for (i, row) in logits.rows().into_iter().enumerate() {
            assert!(labels[i] < k, "label {} out of range {}", labels[i], k);
            let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut denom = 0.0;
            for &z in row.iter() {
                denom += (z - mx).exp();
            }
            let lse = mx + denom.ln();
            loss += lse - row[labels[i]];
            for (j, &z) in row.iter().enumerate() {
                softmax[[i, j]] = (z - lse).exp();
            }
        }
        let out = Array2::from_elem((1, 1), loss / g as f64);
        self.tape().push(
            out,
            Back::CrossEntropy {
                logits: self.idx,
                softmax,
                labels: Rc::new(labels.to_vec()),
            },
            self.needs(),
        )
    }

    /// Sum of all entries as a 1 x 1 tensor (scalar objective for tests).
    pub fn sum_all(&self) -> Tensor {
        let out = Array2::from_elem((1, 1), self.value().sum());
        self.tape().push(out, Back::SumAll { a: self.idx }, self.needs())
    }

    /// Reverse pass from this scalar. Leaf gradients accumulate across calls;
    /// interior gradients are recomputed each call.
    pub fn backward(&self) {
        assert_eq!(self.shape(), (1, 1), "backward requires a scalar");
        let backs = self.inner.backs.borrow();
        let vals = self.inner.vals.borrow();
        let needs = self.inner.needs.borrow();
        let mut grads = self.inner.grads.borrow_mut();

        // Keep leaf accumulators, reset interior nodes for a clean pass.
        for i in 0..backs.len() {
            if !matches!(backs[i], Back::Leaf) {
                grads[i] = None;
            }
        }
        add_into(&mut grads[self.idx], &Array2::from_elem((1, 1), 1.0).view());

        for i in (0..=self.idx).rev() {
            if !needs[i] {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            match &backs[i] {
                Back::Leaf => {}
                Back::MatMul { a, b } => {
                    if needs[*a] {
                        add_owned(&mut grads[*a], g.dot(&vals[*b].t()));
                    }
                    if needs[*b] {
                        add_owned(&mut grads[*b], vals[*a].t().dot(&g));
                    }
                }
                Back::Add { a, b } => {
                    if needs[*a] {
                        add_into(&mut grads[*a], &g.view());
                    }
                    if needs[*b] {
                        add_into(&mut grads[*b], &g.view());
                    }
                }
                Back::MulElem { a, b } => {
                    if needs[*a] {
                        add_owned(&mut grads[*a], &g * &**vals.get(*b).unwrap());
                    }
                    if needs[*b] {
                        add_owned(&mut grads[*b], &g * &**vals.get(*a).unwrap());
                    }
                }
                Back::Scale { a, k } => {
                    if needs[*a] {
                        add_owned(&mut grads[*a], &g * *k);
                    }
                }
                Back::AddRow { a, row } => {
                    if needs[*a] {
                        add_into(&mut grads[*a], &g.view());
                    }
                    if needs[*row] {
                        add_owned(&mut grads[*row], g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    }
                }
                Back::MulCol { a, col } => {
                    if needs[*a] {
                        add_owned(&mut grads[*a], &g * &vals[*col].column(0).insert_axis(Axis(1)));
                    }
                    if needs[*col] {
                        let prod = &g * &**vals.get(*a).unwrap();
                        add_owned(&mut grads[*col], prod.sum_axis(Axis(1)).insert_axis(Axis(1)));
                    }
                }
                Back::LeakyRelu { a, slope } => {
                    if needs[*a] {
                        // Subgradient at 0 follows the positive branch.
                        let src = &vals[*a];
                        let da = ndarray::Zip::from(&g)
                            .and(&**src)
                            .map_collect(|&gv, &x| if x >= 0.0 { gv } else { gv * slope });
                        add_owned(&mut grads[*a], da);
                    }
                }
                Back::GatherRows { a, idx, src_rows } => {
                    if needs[*a] {
                        let cols = g.ncols();
                        let mut da = Array2::<f64>::zeros((*src_rows, cols));
                        {
                            let das = da.as_slice_mut().unwrap();
                            let gs = g.as_slice().expect("gradients are standard layout");
                            for (k, &src) in idx.iter().enumerate() {
                                let sb = src * cols;
                                let kb = k * cols;
                                for j in 0..cols {
                                    das[sb + j] += gs[kb + j];
                                }
                            }
                        }
                        add_owned(&mut grads[*a], da);
                    }
                }
                Back::SegmentSum { a, segs } => {
                    if needs[*a] {
                        let cols = g.ncols();
                        let mut da = Array2::<f64>::zeros((segs.total_len(), cols));
                        {
                            let das = da.as_slice_mut().unwrap();
                            let gs = g.as_slice().expect("gradients are standard layout");
                            for (s, (lo, hi)) in segs.iter_spans().enumerate() {
                                let gb = s * cols;
                                for r in lo..hi {
                                    let base = r * cols;
                                    das[base..base + cols].copy_from_slice(&gs[gb..gb + cols]);
                                }
                            }
                        }
                        add_owned(&mut grads[*a], da);
                    }
                }
                Back::SegmentSoftmax { a, segs } => {
                    if needs[*a] {
                        // d a = alpha * (g - sum_seg(g * alpha)) per column.
                        let alpha = vals[i].as_slice().expect("standard layout");
                        let gs = g.as_slice().expect("standard layout");
                        let cols = g.ncols();
                        let mut da = Array2::<f64>::zeros(g.raw_dim());
                        {
                            let das = da.as_slice_mut().unwrap();
                            let mut dot = vec![0.0f64; cols];
                            for (lo, hi) in segs.iter_spans() {
                                dot.iter_mut().for_each(|d| *d = 0.0);
                                for r in lo..hi {
                                    let base = r * cols;
                                    for (c, d) in dot.iter_mut().enumerate() {
                                        *d += gs[base + c] * alpha[base + c];
                                    }
                                }
                                for r in lo..hi {
                                    let base = r * cols;
                                    for (c, &d) in dot.iter().enumerate() {
                                        das[base + c] =
                                            alpha[base + c] * (gs[base + c] - d);
                                    }
                                }
                            }
                        }
                        add_owned(&mut grads[*a], da);
                    }
                }
                Back::BatchNorm(bn) => {
                    // Flat-slice loops; x_hat is recomputed from the saved
                    // statistics as (a - mean) * inv_std.
                    let a_val = &vals[bn.a];
                    let (n, c) = a_val.dim();
                    let av = a_val.as_slice().expect("tape values are standard layout");
                    let gs = g.as_slice().expect("gradients are standard layout");
                    let gam = vals[bn.gamma].as_slice().expect("gamma is standard layout");
                    if needs[bn.beta] {
                        add_owned(&mut grads[bn.beta], g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    }
                    if needs[bn.gamma] {
                        let mut dg = Array2::<f64>::zeros((1, c));
                        {
                            let dgs = dg.as_slice_mut().unwrap();
                            for r in 0..n {
                                let base = r * c;
                                for j in 0..c {
                                    let xhat = (av[base + j] - bn.mean[j]) * bn.inv_std[j];
                                    dgs[j] += gs[base + j] * xhat;
                                }
                            }
                        }
                        add_owned(&mut grads[bn.gamma], dg);
                    }
                    if needs[bn.a] {
                        let mut da = Array2::<f64>::zeros((n, c));
                        {
                            let das = da.as_slice_mut().unwrap();
                            if bn.train {
                                // Batch statistics depend on x: full Jacobian.
                                let mut sum_g = vec![0.0f64; c];
                                let mut sum_gx = vec![0.0f64; c];
                                for r in 0..n {
                                    let base = r * c;
                                    for j in 0..c {
                                        let xhat =
                                            (av[base + j] - bn.mean[j]) * bn.inv_std[j];
                                        sum_g[j] += gs[base + j];
                                        sum_gx[j] += gs[base + j] * xhat;
                                    }
                                }
                                let nf = n as f64;
                                for r in 0..n {
                                    let base = r * c;
                                    for j in 0..c {
                                        let xhat =
                                            (av[base + j] - bn.mean[j]) * bn.inv_std[j];
                                        das[base + j] = gam[j] * bn.inv_std[j] / nf
                                            * (nf * gs[base + j]
                                                - sum_g[j]
                                                - xhat * sum_gx[j]);
                                    }
                                }
                            } else {
                                for r in 0..n {
                                    let base = r * c;
                                    for j in 0..c {
                                        das[base + j] =
                                            gs[base + j] * gam[j] * bn.inv_std[j];
                                    }
                                }
                            }
                        }
                        add_owned(&mut grads[bn.a], da);
                    }
                }
                Back::Dropout { a, mask } => {
                    if needs[*a] {
                        add_owned(&mut grads[*a], &g * &**mask);
                    }
                }
                Back::CrossEntropy { logits, softmax, labels } => {
                    if needs[*logits] {
                        let gn = g[[0, 0]] / labels.len() as f64;
                        let mut da = softmax * gn;
                        for (r, &lab) in labels.iter().enumerate() {
                            da[[r, lab]] -= gn;
                        }
                        add_owned(&mut grads[*logits], da);
                    }
                }
                Back::SumAll { a } => {
                    if needs[*a] {
                        add_owned(&mut grads[*a], Array2::from_elem(vals[*a].dim(), g[[0, 0]]));
                    }
                }
                Back::ConcatCols { parts } => {
                    let mut off = 0;
                    for &(p, width) in parts {
                        if needs[p] {
                            let slice = g.slice(ndarray::s![.., off..off + width]);
                            add_into(&mut grads[p], &slice);
                        }
                        off += width;
                    }
                }
                Back::Custom { inputs, op } => {
                    let in_vals: Vec<Rc<Array2<f64>>> =
                        inputs.iter().map(|&p| Rc::clone(&vals[p])).collect();
                    let in_needs: Vec<bool> = inputs.iter().map(|&p| needs[p]).collect();
                    let contribs = op.backward(&g, &vals[i], &in_vals, &in_needs);
                    assert_eq!(contribs.len(), inputs.len(), "custom grad arity mismatch");
                    for (&p, contrib) in inputs.iter().zip(contribs) {
                        if let Some(cg) = contrib {
                            assert!(needs[p], "custom op produced a gradient nobody asked for");
                            add_owned(&mut grads[p], cg);
                        }
                    }
                }
            }
            grads[i] = Some(g);
        }
    }
}

/// Columnwise concatenation: out = [parts[0] | parts[1] | ...].
pub fn concat_cols(parts: &[Tensor]) -> Tensor {
    assert!(!parts.is_empty(), "nothing to concatenate");
    let rows = parts[0].shape().0;
    let widths: Vec<usize> = parts.iter().map(|p| p.shape().1).collect();
    let total: usize = widths.iter().sum();
    let mut out = Array2::<f64>::zeros((rows, total));
    let mut off = 0;
    for p in parts {
        same_tape(&parts[0], p);
        let v = p.value();
        assert_eq!(v.nrows(), rows, "concat row counts disagree");
        out.slice_mut(ndarray::s![.., off..off + v.ncols()]).assign(&v);
        off += v.ncols();
    }
    let needs = parts.iter().any(|p| p.requires_grad());
    let back = Back::ConcatCols {
        parts: parts.iter().map(|p| p.idx).zip(widths).collect(),
    };
    parts[0].tape().push(out, back, needs)
}

fn add_into(slot: &mut Option<Array2<f64>>, contrib: &ArrayView2<f64>) {
    match slot {
        Some(acc) => {
            assert_eq!(acc.dim(), contrib.dim(), "gradient shape drifted");
            *acc += contrib;
        }
        None => *slot = Some(contrib.to_owned()),
    }
}

/// Like `add_into` but consumes the contribution, so the common single-
/// consumer case moves the array into the slot instead of copying it.
fn add_owned(slot: &mut Option<Array2<f64>>, contrib: Array2<f64>) {
    match slot {
        Some(acc) => {
            assert_eq!(acc.dim(), contrib.dim(), "gradient shape drifted");
            *acc += &contrib;
        }
        None => *slot = Some(contrib),
    }
}

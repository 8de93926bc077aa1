//! Matrix-free linear operators.
//!
//! Every block of the saddle-point system, every preconditioner and every
//! Schur-complement approximation is a [`LinearOperator`]. Operators are
//! immutable after construction and may be applied concurrently.
//!
//! Cost accounting: [`LinearOperator::flops`] reports the exact number of
//! multiply-add pairs spent in tensor contractions and dense products for one
//! application. Vector updates (axpy, diagonal scaling) are `O(N)` and are not
//! counted, so composite costs are exact integer combinations of their parts.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::dense::DenseMatrix;
use crate::error::{check_len, Error, Result};

pub trait LinearOperator: Send + Sync {
    fn nrows(&self) -> usize;

    fn ncols(&self) -> usize;

    /// Overwrites `y` with `self · x`. Lengths are checked only in debug builds;
    /// use [`LinearOperator::apply`] for a checked call.
    fn apply_into(&self, x: &[f64], y: &mut [f64]);

    fn flops(&self) -> u64;

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("LinearOperator::apply", self.ncols(), x.len())?;
        let mut y = vec![0.0; self.nrows()];
        self.apply_into(x, &mut y);
        Ok(y)
    }
}

pub type OpHandle = Arc<dyn LinearOperator>;

impl<T: LinearOperator + ?Sized> LinearOperator for Arc<T> {
    fn nrows(&self) -> usize {
        (**self).nrows()
    }
    fn ncols(&self) -> usize {
        (**self).ncols()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        (**self).apply_into(x, y)
    }
    fn flops(&self) -> u64 {
        (**self).flops()
    }
}

pub fn require_square(context: &'static str, op: &dyn LinearOperator) -> Result<()> {
    check_len(context, op.nrows(), op.ncols())
}

#[derive(Debug, Clone, Copy)]
pub struct Identity(pub usize);

impl LinearOperator for Identity {
    fn nrows(&self) -> usize {
        self.0
    }
    fn ncols(&self) -> usize {
        self.0
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
    }
    fn flops(&self) -> u64 {
        0
    }
}

/// A dense matrix used as an operator (test problems and desk-scale oracles).
#[derive(Debug, Clone)]
pub struct DenseOp(pub DenseMatrix);

impl LinearOperator for DenseOp {
    fn nrows(&self) -> usize {
        self.0.rows()
    }
    fn ncols(&self) -> usize {
        self.0.cols()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.0.cols());
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.0.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }
    fn flops(&self) -> u64 {
        (self.0.rows() * self.0.cols()) as u64
    }
}

/// `x ↦ factor · op(x)`
pub struct Scaled {
    op: OpHandle,
    factor: f64,
}

impl Scaled {
    pub fn new(op: OpHandle, factor: f64) -> Self {
        Self { op, factor }
    }
}

impl LinearOperator for Scaled {
    fn nrows(&self) -> usize {
        self.op.nrows()
    }
    fn ncols(&self) -> usize {
        self.op.ncols()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.op.apply_into(x, y);
        y.iter_mut().for_each(|v| *v *= self.factor);
    }
    fn flops(&self) -> u64 {
        self.op.flops()
    }
}

/// Composition `outer ∘ middle ∘ ... ∘ inner`, applied right to left.
pub struct Product {
    factors: Vec<OpHandle>,
}

impl Product {
    /// `factors` are listed left to right as in the matrix product.
    pub fn new(factors: Vec<OpHandle>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidArgument("empty operator product".into()));
        }
        for w in factors.windows(2) {
            check_len("Product factor sizes", w[0].ncols(), w[1].nrows())?;
        }
        Ok(Self { factors })
    }
}

impl LinearOperator for Product {
    fn nrows(&self) -> usize {
        self.factors[0].nrows()
    }
    fn ncols(&self) -> usize {
        self.factors.last().unwrap().ncols()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let mut cur = x.to_vec();
        for op in self.factors.iter().skip(1).rev() {
            let mut next = vec![0.0; op.nrows()];
            op.apply_into(&cur, &mut next);
            cur = next;
        }
        self.factors[0].apply_into(&cur, y);
    }
    fn flops(&self) -> u64 {
        self.factors.iter().map(|f| f.flops()).sum()
    }
}

/// Block operator with optional (structurally zero) blocks.
pub struct BlockOperator {
    row_sizes: Vec<usize>,
    col_sizes: Vec<usize>,
    blocks: Vec<Vec<Option<OpHandle>>>,
}

impl BlockOperator {
    pub fn new(
        row_sizes: Vec<usize>,
        col_sizes: Vec<usize>,
        blocks: Vec<Vec<Option<OpHandle>>>,
    ) -> Result<Self> {
        check_len("BlockOperator block rows", row_sizes.len(), blocks.len())?;
        for (i, row) in blocks.iter().enumerate() {
            check_len("BlockOperator block cols", col_sizes.len(), row.len())?;
            for (j, b) in row.iter().enumerate() {
                if let Some(b) = b {
                    check_len("BlockOperator block nrows", row_sizes[i], b.nrows())?;
                    check_len("BlockOperator block ncols", col_sizes[j], b.ncols())?;
                }
            }
        }
        Ok(Self {
            row_sizes,
            col_sizes,
            blocks,
        })
    }

    /// Block-diagonal operator from square blocks.
    pub fn diagonal(blocks: Vec<OpHandle>) -> Result<Self> {
        let sizes: Vec<usize> = blocks.iter().map(|b| b.nrows()).collect();
        let n = blocks.len();
        let grid = blocks
            .into_iter()
            .enumerate()
            .map(|(i, b)| {
                (0..n)
                    .map(|j| if i == j { Some(b.clone()) } else { None })
                    .collect()
            })
            .collect();
        Self::new(sizes.clone(), sizes, grid)
    }

    pub fn block(&self, i: usize, j: usize) -> Option<&OpHandle> {
        self.blocks[i][j].as_ref()
    }

    pub fn row_sizes(&self) -> &[usize] {
        &self.row_sizes
    }

    pub fn col_sizes(&self) -> &[usize] {
        &self.col_sizes
    }
}

fn offsets(sizes: &[usize]) -> Vec<usize> {
    let mut off = Vec::with_capacity(sizes.len() + 1);
    let mut acc = 0;
    off.push(0);
    for s in sizes {
        acc += s;
        off.push(acc);
    }
    off
}

impl LinearOperator for BlockOperator {
    fn nrows(&self) -> usize {
        self.row_sizes.iter().sum()
    }
    fn ncols(&self) -> usize {
        self.col_sizes.iter().sum()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let ro = offsets(&self.row_sizes);
        let co = offsets(&self.col_sizes);
        y.iter_mut().for_each(|v| *v = 0.0);
        let mut tmp = Vec::new();
        for (i, row) in self.blocks.iter().enumerate() {
            let yi = &mut y[ro[i]..ro[i + 1]];
            let mut first = true;
            for (j, b) in row.iter().enumerate() {
                let Some(b) = b else { continue };
                let xj = &x[co[j]..co[j + 1]];
                if first {
                    b.apply_into(xj, yi);
                    first = false;
                } else {
                    tmp.resize(yi.len(), 0.0);
                    b.apply_into(xj, &mut tmp);
                    yi.iter_mut().zip(&tmp).for_each(|(a, t)| *a += t);
                }
            }
        }
    }
    fn flops(&self) -> u64 {
        self.blocks
            .iter()
            .flatten()
            .flatten()
            .map(|b| b.flops())
            .sum()
    }
}

/// Instrumented wrapper: counts applications and accumulates flops.
pub struct Counted {
    op: OpHandle,
    applies: AtomicU64,
}

impl Counted {
    pub fn new(op: OpHandle) -> Arc<Self> {
        Arc::new(Self {
            op,
            applies: AtomicU64::new(0),
        })
    }

    pub fn applies(&self) -> u64 {
        self.applies.load(Ordering::Relaxed)
    }

    pub fn accumulated_flops(&self) -> u64 {
        self.applies() * self.op.flops()
    }

    pub fn reset(&self) {
        self.applies.store(0, Ordering::Relaxed);
    }
}

impl LinearOperator for Counted {
    fn nrows(&self) -> usize {
        self.op.nrows()
    }
    fn ncols(&self) -> usize {
        self.op.ncols()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.applies.fetch_add(1, Ordering::Relaxed);
        self.op.apply_into(x, y)
    }
    fn flops(&self) -> u64 {
        self.op.flops()
    }
}

//! Kronecker product and generalized Kronecker sum operators.
//!
//! Factor ordering convention: a [`KroneckerOp`] stores its factors as
//! `[D_d, ..., D_2, D_1]` and represents `D_d ⊗ ... ⊗ D_1`. Vectors are laid
//! out with the direction-1 index running fastest, i.e. the flat index of
//! `(i_1, ..., i_d)` is `i_1 + n_1 (i_2 + n_2 (i_3 + ...))`. Matrix-vector
//! products are evaluated as `d` successive mode contractions and never form
//! the Kronecker matrix.

use std::cell::RefCell;

use crate::dense::{Cholesky, DenseMatrix};
use crate::error::{check_len, Error, Result};
use crate::operator::LinearOperator;

/// Flat (0-based) index of a 0-based multi-index `(i_1, ..., i_d)`.
pub fn vec_index(multi_index: &[usize], dims: &[usize]) -> Result<usize> {
    check_len("vec_index", dims.len(), multi_index.len())?;
    let mut flat = 0;
    let mut stride = 1;
    for (&i, &n) in multi_index.iter().zip(dims) {
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, size: n });
        }
        flat += i * stride;
        stride *= n;
    }
    Ok(flat)
}

/// Inverse of [`vec_index`].
pub fn multi_index(mut flat: usize, dims: &[usize]) -> Result<Vec<usize>> {
    let total: usize = dims.iter().product();
    if flat >= total {
        return Err(Error::IndexOutOfRange {
            index: flat,
            size: total,
        });
    }
    Ok(dims
        .iter()
        .map(|&n| {
            let i = flat % n;
            flat /= n;
            i
        })
        .collect())
}

/// Ping-pong buffers for the intermediate tensors of a contraction.
#[derive(Debug, Default)]
pub struct KronScratch {
    a: Vec<f64>,
    b: Vec<f64>,
}

thread_local! {
    static SCRATCH: RefCell<KronScratch> = RefCell::new(KronScratch::default());
}

#[derive(Debug, Clone)]
pub struct KroneckerOp {
    factors: Vec<DenseMatrix>,
}

impl KroneckerOp {
    /// `factors = [D_d, ..., D_1]`.
    pub fn new(factors: Vec<DenseMatrix>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidArgument(
                "Kronecker product needs at least one factor".into(),
            ));
        }
        Ok(Self { factors })
    }

    pub fn factors(&self) -> &[DenseMatrix] {
        &self.factors
    }

    pub fn ndim(&self) -> usize {
        self.factors.len()
    }

    /// Factor acting along direction `k` (1-based).
    pub fn factor_for_direction(&self, k: usize) -> &DenseMatrix {
        &self.factors[self.factors.len() - k]
    }

    /// Column sizes `(n_1, ..., n_d)`.
    pub fn col_dims(&self) -> Vec<usize> {
        self.factors.iter().rev().map(|f| f.cols()).collect()
    }

    /// Row sizes `(m_1, ..., m_d)`.
    pub fn row_dims(&self) -> Vec<usize> {
        self.factors.iter().rev().map(|f| f.rows()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self {
            factors: self.factors.iter().map(DenseMatrix::transpose).collect(),
        }
    }

    /// Multiply-adds of one contraction sweep: mode `k` costs
    /// `m_1 ⋯ m_{k-1} · m_k n_k · n_{k+1} ⋯ n_d`.
    pub fn contraction_flops(&self) -> u64 {
        let rows = self.row_dims();
        let cols = self.col_dims();
        (0..self.ndim())
            .map(|k| {
                let left: usize = rows[..k].iter().product();
                let right: usize = cols[k + 1..].iter().product();
                (left * rows[k] * cols[k] * right) as u64
            })
            .sum()
    }

    /// Explicit `D_d ⊗ ... ⊗ D_1`. Test and desk-scale use only.
    pub fn to_dense(&self) -> DenseMatrix {
        let mut it = self.factors.iter();
        let first = it.next().unwrap().clone();
        it.fold(first, |acc, f| acc.kron(f))
    }

    /// Checked matrix-vector product.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.apply(x)
    }

    pub fn apply_with(&self, x: &[f64], y: &mut [f64], scratch: &mut KronScratch) {
        let d = self.ndim();
        debug_assert_eq!(x.len(), self.ncols());
        debug_assert_eq!(y.len(), self.nrows());
        let mut shape = self.col_dims();
        for k in 0..d {
            let f = &self.factors[d - 1 - k];
            let left: usize = shape[..k].iter().product();
            let right: usize = shape[k + 1..].iter().product();
            let in_len = left * f.cols() * right;
            let out_len = left * f.rows() * right;
            let last = k + 1 == d;
            {
                let src: &[f64] = if k == 0 { x } else { &scratch.a[..in_len] };
                if last {
                    mode_product(f, src, y, left, right);
                } else {
                    scratch.b.resize(out_len, 0.0);
                    mode_product(f, src, &mut scratch.b[..out_len], left, right);
                }
            }
            if !last {
                std::mem::swap(&mut scratch.a, &mut scratch.b);
            }
            shape[k] = f.rows();
        }
    }
}

/// `dst[l, i, r] = Σ_j f[i, j] src[l, j, r]` with `l` fastest.
fn mode_product(f: &DenseMatrix, src: &[f64], dst: &mut [f64], left: usize, right: usize) {
    let (m, n) = (f.rows(), f.cols());
    if left == 1 {
        for r in 0..right {
            let s = &src[r * n..(r + 1) * n];
            let out = &mut dst[r * m..(r + 1) * m];
            for (i, o) in out.iter_mut().enumerate() {
                *o = f.row(i).iter().zip(s).map(|(a, b)| a * b).sum();
            }
        }
        return;
    }
    for r in 0..right {
        let src_r = &src[r * n * left..(r + 1) * n * left];
        let dst_r = &mut dst[r * m * left..(r + 1) * m * left];
        for i in 0..m {
            let out = &mut dst_r[i * left..(i + 1) * left];
            out.fill(0.0);
            for (j, &c) in f.row(i).iter().enumerate() {
                let inp = &src_r[j * left..(j + 1) * left];
                for (o, v) in out.iter_mut().zip(inp) {
                    *o += c * v;
                }
            }
        }
    }
}

impl LinearOperator for KroneckerOp {
    fn nrows(&self) -> usize {
        self.factors.iter().map(DenseMatrix::rows).product()
    }
    fn ncols(&self) -> usize {
        self.factors.iter().map(DenseMatrix::cols).product()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        SCRATCH.with(|s| self.apply_with(x, y, &mut s.borrow_mut()))
    }
    fn flops(&self) -> u64 {
        self.contraction_flops()
    }
}

/// `A_1 ⊕̂ ... ⊕̂ A_d = Σ_k M_d ⊗ ... ⊗ A_k ⊗ ... ⊗ M_1`.
///
/// `terms[k-1] = (A_k, M_k)` for direction `k`.
#[derive(Debug, Clone)]
pub struct GeneralizedKronSum {
    terms: Vec<(DenseMatrix, DenseMatrix)>,
    products: Vec<KroneckerOp>,
}

impl GeneralizedKronSum {
    pub fn new(terms: Vec<(DenseMatrix, DenseMatrix)>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidArgument(
                "generalized Kronecker sum needs at least one term".into(),
            ));
        }
        for (a, m) in &terms {
            if !a.is_square() || !m.is_square() {
                return Err(Error::InvalidArgument(
                    "generalized Kronecker sum factors must be square".into(),
                ));
            }
            check_len("GeneralizedKronSum term size", m.rows(), a.rows())?;
        }
        let d = terms.len();
        let products = (0..d)
            .map(|k| {
                let factors = (0..d)
                    .rev()
                    .map(|j| {
                        if j == k {
                            terms[j].0.clone()
                        } else {
                            terms[j].1.clone()
                        }
                    })
                    .collect();
                KroneckerOp::new(factors)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { terms, products })
    }

    pub fn terms(&self) -> &[(DenseMatrix, DenseMatrix)] {
        &self.terms
    }

    pub fn dims(&self) -> Vec<usize> {
        self.terms.iter().map(|(a, _)| a.rows()).collect()
    }

    /// The Kronecker product contributed by direction `k` (0-based).
    pub fn term_product(&self, k: usize) -> &KroneckerOp {
        &self.products[k]
    }

    /// Same sum with every `A_k` multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(
            self.terms
                .iter()
                .map(|(a, m)| (a.scaled(s), m.clone()))
                .collect(),
        )
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut it = self.products.iter();
        let first = it.next().unwrap().to_dense();
        it.fold(first, |acc, p| acc.add_scaled(&p.to_dense(), 1.0).unwrap())
    }
}

impl LinearOperator for GeneralizedKronSum {
    fn nrows(&self) -> usize {
        self.dims().iter().product()
    }
    fn ncols(&self) -> usize {
        self.nrows()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.products[0].apply_into(x, y);
        let mut tmp = vec![0.0; y.len()];
        for p in &self.products[1..] {
            p.apply_into(x, &mut tmp);
            y.iter_mut().zip(&tmp).for_each(|(a, b)| *a += b);
        }
    }
    fn flops(&self) -> u64 {
        self.products.iter().map(KroneckerOp::contraction_flops).sum()
    }
}

/// Direct inverse of a generalized Kronecker sum by fast diagonalization.
///
/// Per direction `M_k = L_k L_kᵀ` and `L_k⁻¹ A_k L_k⁻ᵀ = U_k Λ_k U_kᵀ`; with
/// `Ũ_k = L_k⁻ᵀ U_k` the sum factors as `Ũ⁻ᵀ (Λ_1 ⊕ ... ⊕ Λ_d) Ũ⁻¹`, so its
/// inverse is `(Ũ_d ⊗ ... ⊗ Ũ_1) diag(λ)⁻¹ (Ũ_d ⊗ ... ⊗ Ũ_1)ᵀ`.
#[derive(Debug, Clone)]
pub struct FastDiagSolver {
    transforms: Vec<DenseMatrix>,
    eigenvalues: Vec<Vec<f64>>,
    forward: KroneckerOp,
    backward: KroneckerOp,
    diagonal: Vec<f64>,
}

/// Relative threshold below which an eigenvalue of the assembled diagonal is
/// treated as zero.
pub const SINGULAR_TOLERANCE: f64 = 1e-12;

impl FastDiagSolver {
    pub fn new(sum: &GeneralizedKronSum) -> Result<Self> {
        let mut transforms = Vec::with_capacity(sum.terms.len());
        let mut eigenvalues = Vec::with_capacity(sum.terms.len());
        for (k, (a, m)) in sum.terms.iter().enumerate() {
            let scale = a.max_abs().max(f64::MIN_POSITIVE);
            if a.symmetry_defect() > 1e-12 * scale {
                return Err(Error::InvalidArgument(format!(
                    "fast diagonalization: A_{} is not symmetric",
                    k + 1
                )));
            }
            let chol = Cholesky::new(m).map_err(|e| {
                Error::NotPositiveDefinite(format!("mass factor M_{}: {e}", k + 1))
            })?;
            let x = chol.solve_lower_matrix(a)?;
            let reduced = chol.solve_lower_matrix(&x.transpose())?.symmetrized();
            let eig = reduced.symmetric_eigen()?;
            transforms.push(chol.solve_upper_matrix(&eig.vectors)?);
            eigenvalues.push(eig.values);
        }

        let dims: Vec<usize> = eigenvalues.iter().map(Vec::len).collect();
        let total: usize = dims.iter().product();
        let mut diagonal = vec![0.0; total];
        for (flat, v) in diagonal.iter_mut().enumerate() {
            let idx = multi_index(flat, &dims)?;
            *v = idx.iter().zip(&eigenvalues).map(|(&i, l)| l[i]).sum();
        }
        let max = diagonal.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if let Some(&bad) = diagonal
            .iter()
            .find(|v| v.abs() <= SINGULAR_TOLERANCE * max)
        {
            return Err(Error::SingularOperator { value: bad, max });
        }

        let backward = KroneckerOp::new(transforms.iter().rev().cloned().collect())?;
        let forward = backward.transpose();
        Ok(Self {
            transforms,
            eigenvalues,
            forward,
            backward,
            diagonal,
        })
    }

    /// `Ũ_k` for direction `k` (0-based).
    pub fn transform(&self, k: usize) -> &DenseMatrix {
        &self.transforms[k]
    }

    pub fn eigenvalues(&self, k: usize) -> &[f64] {
        &self.eigenvalues[k]
    }

    /// Eigenvalues of the whole sum, in vec order.
    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn is_positive_definite(&self) -> bool {
        self.diagonal.iter().all(|&v| v > 0.0)
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.apply(b)
    }
}

impl LinearOperator for FastDiagSolver {
    fn nrows(&self) -> usize {
        self.diagonal.len()
    }
    fn ncols(&self) -> usize {
        self.diagonal.len()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let mut t = vec![0.0; x.len()];
        self.forward.apply_into(x, &mut t);
        t.iter_mut().zip(&self.diagonal).for_each(|(v, l)| *v /= l);
        self.backward.apply_into(&t, y);
    }
    fn flops(&self) -> u64 {
        self.forward.contraction_flops() + self.backward.contraction_flops()
    }
}

//! Block-diagonal preconditioners for the Stokes saddle-point system and their
//! hyper-power refinements.
//!
//! One hyper-power update turns an approximate inverse `X` of `Ã` into
//! `2X − X Ã X`. Applying `k` updates to `P_0⁻¹` costs `2^k` applications of
//! `P_0⁻¹` and `2^k − 1` applications of `Ã`, and reproduces the truncated
//! Neumann series `Σ_{j<2^k} (I − P_0⁻¹Ã)^j P_0⁻¹`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use log::{debug, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dense::{Cholesky, DenseMatrix};
use crate::error::{check_len, Error, Result};
use crate::operator::{require_square, BlockOperator, LinearOperator, OpHandle, Product, Scaled};
use crate::spectral::{materialize, MATERIALIZE_LIMIT};
use crate::stokes::{StokesSystem, DIM};
use crate::tensorkron::{FastDiagSolver, KroneckerOp};

/// `v ↦ 2X v − X Ã X v`, sharing the inner `X v`.
pub struct HyperPowerStep {
    pinv: OpHandle,
    atilde: OpHandle,
}

impl LinearOperator for HyperPowerStep {
    fn nrows(&self) -> usize {
        self.pinv.nrows()
    }
    fn ncols(&self) -> usize {
        self.pinv.ncols()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let n = x.len();
        let mut px = vec![0.0; n];
        self.pinv.apply_into(x, &mut px);
        let mut apx = vec![0.0; n];
        self.atilde.apply_into(&px, &mut apx);
        self.pinv.apply_into(&apx, y);
        y.iter_mut().zip(&px).for_each(|(y, p)| *y = 2.0 * p - *y);
    }
    fn flops(&self) -> u64 {
        2 * self.pinv.flops() + self.atilde.flops()
    }
}

pub fn hyperpower_step(pinv: OpHandle, atilde: OpHandle) -> Result<OpHandle> {
    require_square("hyperpower_step: preconditioner", &*pinv)?;
    require_square("hyperpower_step: operator", &*atilde)?;
    check_len("hyperpower_step", pinv.nrows(), atilde.nrows())?;
    Ok(Arc::new(HyperPowerStep { pinv, atilde }))
}

/// Levels `0..=k` of the hyper-power sequence started from `p0inv` with a
/// fixed operator `atilde`.
pub fn hyperpower_sequence(p0inv: OpHandle, atilde: OpHandle, k: usize) -> Result<Vec<OpHandle>> {
    let mut seq = vec![p0inv];
    for _ in 0..k {
        let next = hyperpower_step(seq.last().unwrap().clone(), atilde.clone())?;
        seq.push(next);
    }
    Ok(seq)
}

/// `Σ_{j<order} (I − X Ã)^j X v` by the recurrence `s ← r + s − X Ã s` with `r = X v`.
pub fn neumann_apply(
    p0inv: &dyn LinearOperator,
    atilde: &dyn LinearOperator,
    order: usize,
    v: &[f64],
) -> Result<Vec<f64>> {
    if order == 0 || !order.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "Neumann order must be a power of two (got {order})"
        )));
    }
    check_len("neumann_apply", p0inv.ncols(), v.len())?;
    let r = p0inv.apply(v)?;
    let mut s = r.clone();
    let mut t = vec![0.0; v.len()];
    let mut u = vec![0.0; v.len()];
    for _ in 1..order {
        atilde.apply_into(&s, &mut t);
        p0inv.apply_into(&t, &mut u);
        for i in 0..s.len() {
            s[i] = r[i] + s[i] - u[i];
        }
    }
    Ok(s)
}

/// `P_{V,0}⁻¹`: fast diagonalization of each diagonal block of `A`.
pub fn make_pv0(system: &StokesSystem) -> Result<Arc<BlockOperator>> {
    let blocks = (0..DIM)
        .map(|c| {
            FastDiagSolver::new(system.a_diagonal(c)).map(|s| Arc::new(s) as OpHandle)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Arc::new(BlockOperator::diagonal(blocks)?))
}

/// `P_{Q,0}⁻¹ = 2ν (M̌ ⊗ M̌ ⊗ M̌)⁻¹`, applied as a Kronecker product of the
/// univariate inverse mass matrices.
///
/// The factor matches the `2ν` carried by the velocity block, so that the
/// spectrum of `P_{Q,0}⁻¹ Bᵀ A⁻¹ B` reaches up to 1 independently of `ν`.
pub fn make_pq0(system: &StokesSystem) -> Result<OpHandle> {
    let inv = Cholesky::new(&system.univariate().mass_check)?.inverse();
    let nu = system.params().nu;
    Ok(Arc::new(KroneckerOp::new(vec![
        inv.scaled(2.0 * nu),
        inv.clone(),
        inv,
    ])?))
}

/// Velocity sequence `P_{V,j+1}⁻¹ = 2P_{V,j}⁻¹ − P_{V,j}⁻¹ A P_{V,j}⁻¹`.
pub fn sequence_v(system: &StokesSystem, k: usize) -> Result<Vec<OpHandle>> {
    let pv0: OpHandle = make_pv0(system)?;
    hyperpower_sequence(pv0, system.a(), k)
}

/// `Bᵀ X B` for a velocity-space operator `X`.
pub fn schur_approximation(system: &StokesSystem, xv: OpHandle) -> Result<OpHandle> {
    Ok(Arc::new(Product::new(vec![system.bt(), xv, system.b()])?))
}

/// Schur sequence with inner updates: update `j` uses `Bᵀ P_{V,j}⁻¹ B`.
pub fn sequence_q_hat(system: &StokesSystem, seq_v: &[OpHandle], k: usize) -> Result<Vec<OpHandle>> {
    if k > 0 && seq_v.len() < k {
        return Err(Error::InvalidArgument(format!(
            "Schur sequence to level {k} needs velocity levels 0..{} (got {})",
            k - 1,
            seq_v.len()
        )));
    }
    let mut seq = vec![make_pq0(system)?];
    for j in 0..k {
        let atilde = schur_approximation(system, seq_v[j].clone())?;
        let next = hyperpower_step(seq[j].clone(), atilde)?;
        seq.push(next);
    }
    Ok(seq)
}

/// Schur sequence without inner updates: always `Bᵀ P_{V,0}⁻¹ B`.
pub fn sequence_q_fixed(system: &StokesSystem, pv0: OpHandle, k: usize) -> Result<Vec<OpHandle>> {
    let atilde = schur_approximation(system, pv0)?;
    hyperpower_sequence(make_pq0(system)?, atilde, k)
}

/// `A⁻¹` from a dense Cholesky factorization (small problems only).
pub struct DenseInverse {
    chol: Cholesky,
}

impl DenseInverse {
    pub fn new(op: &dyn LinearOperator) -> Result<Self> {
        require_square("DenseInverse", op)?;
        let dense = materialize(op)?.symmetrized();
        Ok(Self {
            chol: Cholesky::new(&dense)?,
        })
    }
}

impl LinearOperator for DenseInverse {
    fn nrows(&self) -> usize {
        self.chol.dim()
    }
    fn ncols(&self) -> usize {
        self.chol.dim()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
        self.chol.solve_in_place(y);
    }
    fn flops(&self) -> u64 {
        let n = self.chol.dim() as u64;
        n * n
    }
}

/// Schur sequence with the exact `Bᵀ A⁻¹ B`.
pub fn sequence_q_exact(system: &StokesSystem, k: usize) -> Result<Vec<OpHandle>> {
    if system.n_v() > MATERIALIZE_LIMIT {
        return Err(Error::SizeGuard {
            size: system.n_v(),
            limit: MATERIALIZE_LIMIT,
        });
    }
    let ainv: OpHandle = Arc::new(DenseInverse::new(&*system.a())?);
    let atilde = schur_approximation(system, ainv)?;
    hyperpower_sequence(make_pq0(system)?, atilde, k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SchurMode {
    #[default]
    Hat,
    Fixed,
    Exact,
}

impl fmt::Display for SchurMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchurMode::Hat => "hat",
            SchurMode::Fixed => "fixed",
            SchurMode::Exact => "exact",
        })
    }
}

impl FromStr for SchurMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hat" => Ok(SchurMode::Hat),
            "fixed" => Ok(SchurMode::Fixed),
            "exact" => Ok(SchurMode::Exact),
            other => Err(Error::InvalidArgument(format!(
                "unknown Schur mode '{other}' (expected hat, fixed or exact)"
            ))),
        }
    }
}

/// `blockdiag(P_{V,k}⁻¹, P_{Q,k}⁻¹)` together with its parts.
pub struct BlockPreconditioner {
    pub level: usize,
    pub velocity: OpHandle,
    pub pressure: OpHandle,
    pub operator: OpHandle,
}

impl BlockPreconditioner {
    pub fn build(system: &StokesSystem, level: usize, mode: SchurMode) -> Result<Self> {
        Self::build_scaled(system, level, mode, 1.0)
    }

    /// As [`BlockPreconditioner::build`] with `P_{V,0}⁻¹` replaced by `ω P_{V,0}⁻¹`.
    pub fn build_scaled(system: &StokesSystem, level: usize, mode: SchurMode, omega: f64) -> Result<Self> {
        if !(omega > 0.0) {
            return Err(Error::InvalidArgument(format!("scaling must be positive (got {omega})")));
        }
        let mut pv0: OpHandle = make_pv0(system)?;
        if omega != 1.0 {
            pv0 = Arc::new(Scaled::new(pv0, omega));
        }
        if level > 0 {
            check_initial(&pv0, &system.a(), "velocity block", None);
        }
        let seq_v = hyperpower_sequence(pv0.clone(), system.a(), level)?;
        let seq_q = match mode {
            SchurMode::Hat => sequence_q_hat(system, &seq_v, level)?,
            SchurMode::Fixed => sequence_q_fixed(system, pv0, level)?,
            SchurMode::Exact => sequence_q_exact(system, level)?,
        };
        let velocity = seq_v[level].clone();
        let pressure = seq_q[level].clone();
        let operator = Arc::new(BlockOperator::diagonal(vec![velocity.clone(), pressure.clone()])?);
        Ok(Self {
            level,
            velocity,
            pressure,
            operator,
        })
    }
}

/// Extreme eigenvalue estimates of `X Ã` from `iters` steps of Lanczos in the
/// `X⁻¹` inner product. `deflate` removes a known null vector of `Ã` from the
/// start vector.
pub fn lanczos_extremes(
    pinv: &dyn LinearOperator,
    atilde: &dyn LinearOperator,
    iters: usize,
    seed: u64,
    deflate: Option<&[f64]>,
) -> Result<(f64, f64)> {
    let n = pinv.nrows();
    check_len("lanczos_extremes", n, atilde.nrows())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    if let Some(c) = deflate {
        check_len("lanczos_extremes: null vector", n, c.len())?;
        let s = dot(&r, c) / dot(c, c);
        r.iter_mut().zip(c).for_each(|(r, c)| *r -= s * c);
    }
    let mut z = pinv.apply(&r)?;
    let mut beta = dot(&r, &z).sqrt();
    let mut alphas = Vec::new();
    let mut betas = Vec::new();
    let mut v_prev = vec![0.0; n];
    let mut w = vec![0.0; n];
    for _ in 0..iters.min(n) {
        if !(beta > 0.0) {
            break;
        }
        let v: Vec<f64> = r.iter().map(|x| x / beta).collect();
        let q: Vec<f64> = z.iter().map(|x| x / beta).collect();
        atilde.apply_into(&q, &mut w);
        let alpha = dot(&q, &w);
        alphas.push(alpha);
        for i in 0..n {
            r[i] = w[i] - alpha * v[i] - beta * v_prev[i];
        }
        betas.push(beta);
        v_prev = v;
        pinv.apply_into(&r, &mut z);
        let rz = dot(&r, &z);
        beta = if rz > 0.0 { rz.sqrt() } else { 0.0 };
    }
    let m = alphas.len();
    if m == 0 {
        return Err(Error::Breakdown("Lanczos start vector is zero".into()));
    }
    let mut t = DenseMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alphas[i];
        if i + 1 < m {
            t[(i, i + 1)] = betas[i + 1];
            t[(i + 1, i)] = betas[i + 1];
        }
    }
    let eig = t.symmetric_eigen()?;
    Ok((eig.min(), eig.max()))
}

/// Warns when the estimated spectrum of `P_0⁻¹Ã` leaves `(0, 2)`, where the
/// sequence stops converging or loses definiteness. Returns the estimate.
pub fn check_initial(
    p0inv: &OpHandle,
    atilde: &OpHandle,
    label: &str,
    deflate: Option<&[f64]>,
) -> Option<(f64, f64)> {
    match lanczos_extremes(&**p0inv, &**atilde, 30, 7, deflate) {
        Ok((lo, hi)) => {
            debug!("{label}: estimated spectrum of P0^-1 A in [{lo:.4}, {hi:.4}]");
            if lo <= 0.0 || hi >= 2.0 {
                warn!(
                    "{label}: estimated spectrum [{lo:.4}, {hi:.4}] of the initial preconditioned \
                     operator leaves (0, 2); hyper-power updates may diverge (consider a scaling)"
                );
            }
            Some((lo, hi))
        }
        Err(e) => {
            warn!("{label}: spectrum estimate failed: {e}");
            None
        }
    }
}

/// Cost of a level-`k` hyper-power preconditioner in units of matvec cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub c_p: f64,
    pub c_a: f64,
}

impl CostModel {
    /// `C_k = 2^k c_P + (2^k − 1) c_A`.
    pub fn cost(&self, k: u32) -> f64 {
        let two_k = 2f64.powi(k as i32);
        two_k * self.c_p + (two_k - 1.0) * self.c_a
    }

    pub fn ratio(&self, k: u32) -> f64 {
        self.cost(k) / self.c_p
    }

    /// Constants measured by the flop counters of `P_{V,0}⁻¹` and `A`.
    pub fn measured(system: &StokesSystem) -> Result<Self> {
        Ok(Self {
            c_p: make_pv0(system)?.flops() as f64,
            c_a: system.a().flops() as f64,
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::DenseOp;

    fn dense(rows: &[[f64; 2]]) -> OpHandle {
        Arc::new(DenseOp(DenseMatrix::from_rows(rows)))
    }

    #[test]
    fn scalar_step() {
        let x: OpHandle = Arc::new(DenseOp(DenseMatrix::from_rows(&[[0.5]])));
        let a: OpHandle = Arc::new(DenseOp(DenseMatrix::from_rows(&[[1.0]])));
        let s = hyperpower_step(x, a).unwrap();
        assert!((s.apply(&[1.0]).unwrap()[0] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn step_rejects_mismatched_sizes() {
        let x = dense(&[[1.0, 0.0], [0.0, 1.0]]);
        let a: OpHandle = Arc::new(DenseOp(DenseMatrix::identity(3)));
        assert!(hyperpower_step(x, a).is_err());
    }

    #[test]
    fn neumann_low_orders() {
        let x = dense(&[[0.5, 0.1], [0.1, 0.4]]);
        let a = dense(&[[2.0, 0.3], [0.3, 1.5]]);
        let v = [1.0, -2.0];
        assert_eq!(neumann_apply(&*x, &*a, 1, &v).unwrap(), x.apply(&v).unwrap());
        let n2 = neumann_apply(&*x, &*a, 2, &v).unwrap();
        let h1 = hyperpower_step(x.clone(), a.clone()).unwrap().apply(&v).unwrap();
        for (p, q) in n2.iter().zip(&h1) {
            assert!((p - q).abs() < 1e-14);
        }
        assert!(neumann_apply(&*x, &*a, 3, &v).is_err());
    }

    #[test]
    fn cost_model_ratios() {
        let s = 3f64.powf(-4.0 / 3.0);
        let m = CostModel {
            c_p: 6.0 * s,
            c_a: 15.0 * s,
        };
        assert!((m.ratio(0) - 1.0).abs() < 1e-15);
        assert!((m.ratio(1) - 4.5).abs() < 1e-12);
        assert!((m.ratio(2) - 11.5).abs() < 1e-12);
    }

    #[test]
    fn schur_mode_round_trip() {
        for m in [SchurMode::Hat, SchurMode::Fixed, SchurMode::Exact] {
            assert_eq!(m.to_string().parse::<SchurMode>().unwrap(), m);
        }
        assert!("exactish".parse::<SchurMode>().is_err());
    }

    #[test]
    fn lanczos_finds_diagonal_extremes() {
        let a: OpHandle = Arc::new(DenseOp(DenseMatrix::from_diagonal(&[0.5, 1.0, 1.5, 3.0])));
        let i: OpHandle = Arc::new(crate::operator::Identity(4));
        let (lo, hi) = lanczos_extremes(&*i, &*a, 10, 1, None).unwrap();
        assert!((lo - 0.5).abs() < 1e-10 && (hi - 3.0).abs() < 1e-10);
    }
}

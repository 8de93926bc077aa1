//! Preconditioned MINRES for symmetric (indefinite) systems.

use std::time::Instant;

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::operator::{require_square, LinearOperator};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub iterations: usize,
    pub converged: bool,
    /// Preconditioned residual norm relative to the initial one, per iteration
    /// (entry 0 is the initial value 1).
    pub residual_history: Vec<f64>,
    /// `‖b − K x‖ / ‖b‖` of the returned iterate.
    pub true_relative_residual: f64,
    pub operator_applies: usize,
    pub preconditioner_applies: usize,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinresOptions {
    pub tol: f64,
    pub maxit: usize,
}

impl MinresOptions {
    /// Default iteration cap `10 n`.
    pub fn with_tol(tol: f64, n: usize) -> Self {
        Self { tol, maxit: 10 * n }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `K x = b` from a zero initial guess with the SPD preconditioner
/// `precond ≈ K⁻¹` (Paige-Saunders recurrences). Stops once the preconditioned
/// residual norm has dropped by `tol`.
pub fn minres(
    op: &dyn LinearOperator,
    precond: &dyn LinearOperator,
    b: &[f64],
    opts: MinresOptions,
) -> Result<(Vec<f64>, SolveStats)> {
    require_square("minres operator", op)?;
    require_square("minres preconditioner", precond)?;
    check_len("minres preconditioner", op.nrows(), precond.nrows())?;
    check_len("minres right-hand side", op.nrows(), b.len())?;
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive (got {})", opts.tol)));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("right-hand side"));
    }

    let start = Instant::now();
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut stats = SolveStats {
        iterations: 0,
        converged: true,
        residual_history: vec![1.0],
        true_relative_residual: 0.0,
        operator_applies: 0,
        preconditioner_applies: 0,
        wall_time_secs: 0.0,
    };

    let mut r1 = b.to_vec();
    let mut y = vec![0.0; n];
    precond.apply_into(&r1, &mut y);
    stats.preconditioner_applies += 1;
    let b_prec = dot(&r1, &y);
    if b_prec < 0.0 {
        return Err(Error::NotPositiveDefinite("MINRES preconditioner is indefinite".into()));
    }
    let beta1 = b_prec.sqrt();
    if beta1 == 0.0 {
        stats.wall_time_secs = start.elapsed().as_secs_f64();
        return Ok((x, stats));
    }

    let mut r2 = r1.clone();
    let mut oldb = 0.0;
    let mut beta = beta1;
    let mut dbar = 0.0;
    let mut epsln = 0.0;
    let mut phibar = beta1;
    let mut cs = -1.0;
    let mut sn = 0.0;
    let mut w = vec![0.0; n];
    let mut w1 = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let mut v = vec![0.0; n];
    stats.converged = false;

    for itn in 1..=opts.maxit {
        let s = 1.0 / beta;
        v.iter_mut().zip(&y).for_each(|(v, y)| *v = s * y);
        op.apply_into(&v, &mut y);
        stats.operator_applies += 1;
        if itn >= 2 {
            let f = beta / oldb;
            y.iter_mut().zip(&r1).for_each(|(y, r)| *y -= f * r);
        }
        let alfa = dot(&v, &y);
        let f = alfa / beta;
        y.iter_mut().zip(&r2).for_each(|(y, r)| *y -= f * r);
        std::mem::swap(&mut r1, &mut r2);
        r2.copy_from_slice(&y);
        precond.apply_into(&r2, &mut y);
        stats.preconditioner_applies += 1;
        oldb = beta;
        let ry = dot(&r2, &y);
        if !ry.is_finite() || !alfa.is_finite() {
            return Err(Error::NonFinite("MINRES recurrence"));
        }
        if ry < 0.0 {
            return Err(Error::NotPositiveDefinite("MINRES preconditioner is indefinite".into()));
        }
        beta = ry.sqrt();

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta);
        if gamma == 0.0 {
            return Err(Error::Breakdown(format!(
                "MINRES: singular tridiagonal at iteration {itn}"
            )));
        }
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        let denom = 1.0 / gamma;
        std::mem::swap(&mut w1, &mut w2);
        std::mem::swap(&mut w2, &mut w);
        for i in 0..n {
            w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) * denom;
            x[i] += phi * w[i];
        }

        let rel = phibar / beta1;
        stats.iterations = itn;
        stats.residual_history.push(rel);
        if rel <= opts.tol {
            stats.converged = true;
            break;
        }
        if beta == 0.0 {
            return Err(Error::Breakdown(format!(
                "MINRES: Lanczos breakdown at iteration {itn} with relative residual {rel:e}"
            )));
        }
    }

    let kx = op.apply(&x)?;
    let res: f64 = b.iter().zip(&kx).map(|(b, k)| (b - k).powi(2)).sum::<f64>().sqrt();
    stats.true_relative_residual = res / dot(b, b).sqrt();
    stats.wall_time_secs = start.elapsed().as_secs_f64();
    debug!(
        "MINRES: {} iterations, converged = {}, preconditioned residual {:.3e}, true residual {:.3e}",
        stats.iterations,
        stats.converged,
        stats.residual_history.last().unwrap(),
        stats.true_relative_residual
    );
    Ok((x, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::DenseMatrix;
    use crate::operator::{DenseOp, Identity};

    #[test]
    fn zero_rhs() {
        let (x, s) = minres(&Identity(3), &Identity(3), &[0.0; 3], MinresOptions::with_tol(1e-8, 3)).unwrap();
        assert_eq!(x, vec![0.0; 3]);
        assert_eq!(s.iterations, 0);
        assert!(s.converged);
    }

    #[test]
    fn diagonal_system() {
        let a = DenseOp(DenseMatrix::from_diagonal(&[1.0, 2.0, 3.0]));
        let (x, s) = minres(&a, &Identity(3), &[1.0, 2.0, 3.0], MinresOptions::with_tol(1e-12, 3)).unwrap();
        assert!(s.iterations <= 3);
        for v in x {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn indefinite_two_by_two() {
        let a = DenseOp(DenseMatrix::from_rows(&[[2.0, 1.0], [1.0, 0.0]]));
        let (x, s) = minres(&a, &Identity(2), &[1.0, 1.0], MinresOptions::with_tol(1e-12, 2)).unwrap();
        assert!(s.converged);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        let o = MinresOptions::with_tol(1e-8, 2);
        assert!(minres(&Identity(2), &Identity(3), &[1.0, 1.0], o).is_err());
        assert!(minres(&Identity(2), &Identity(2), &[1.0, f64::NAN], o).is_err());
        assert!(minres(&Identity(2), &Identity(2), &[1.0, 1.0], MinresOptions { tol: 0.0, maxit: 2 }).is_err());
    }
}

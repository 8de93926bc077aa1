//! Dense spectra of preconditioned operators at desk scale, and the checks of
//! the hyper-power theory against them.

use serde::{Deserialize, Serialize};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::operator::LinearOperator;

/// Largest operator dimension that will be materialized densely.
pub const MATERIALIZE_LIMIT: usize = 5000;

/// Dense matrix whose columns are `op` applied to the unit vectors.
pub fn materialize(op: &dyn LinearOperator) -> Result<DenseMatrix> {
    let (rows, cols) = (op.nrows(), op.ncols());
    let size = rows.max(cols);
    if size > MATERIALIZE_LIMIT {
        return Err(Error::SizeGuard {
            size,
            limit: MATERIALIZE_LIMIT,
        });
    }
    let mut e = vec![0.0; cols];
    let mut y = vec![0.0; rows];
    Ok(DenseMatrix::from_columns(rows, cols, |j| {
        e[j] = 1.0;
        op.apply_into(&e, &mut y);
        e[j] = 0.0;
        y.clone()
    }))
}

/// `l(λ) = 2λ − λ²`, the spectral image of one hyper-power update.
pub fn lambda_map(lambda: f64) -> f64 {
    2.0 * lambda - lambda * lambda
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub level: usize,
    pub eigenvalues: Vec<f64>,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub kappa: f64,
    /// Extremes predicted from the previous level through `l`, if known.
    pub predicted_min: Option<f64>,
    pub predicted_max: Option<f64>,
}

impl SpectrumReport {
    /// `eigenvalues` need not be sorted.
    pub fn new(level: usize, mut eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::InvalidArgument("empty spectrum".into()));
        }
        if eigenvalues.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("spectrum"));
        }
        eigenvalues.sort_by(f64::total_cmp);
        let lambda_min = eigenvalues[0];
        let lambda_max = *eigenvalues.last().unwrap();
        Ok(Self {
            level,
            kappa: lambda_max / lambda_min,
            eigenvalues,
            lambda_min,
            lambda_max,
            predicted_min: None,
            predicted_max: None,
        })
    }
}

/// Eigenvalues of `Pinv · A` for symmetric `A` and SPD `Pinv`, computed from
/// the congruent symmetric matrix `Lᵀ A L` with `Pinv = L Lᵀ`.
///
/// `null_dim` smallest-magnitude eigenvalues are dropped; they correspond to a
/// known kernel of `A` (the constant pressure for Schur complements).
pub fn generalized_spectrum(
    a: &DenseMatrix,
    pinv: &DenseMatrix,
    level: usize,
    null_dim: usize,
) -> Result<SpectrumReport> {
    let chol = pinv
        .symmetrized()
        .cholesky()
        .map_err(|e| Error::NotPositiveDefinite(format!("preconditioner: {e}")))?;
    let l = chol.factor();
    let sym = l.transpose().matmul(&a.symmetrized())?.matmul(l)?.symmetrized();
    let mut values = sym.symmetric_eigen()?.values;
    if null_dim > 0 {
        values.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
        values.drain(..null_dim.min(values.len()));
    }
    SpectrumReport::new(level, values)
}

/// Predicted extremes of the next level from the current one.
pub fn predict_next(report: &SpectrumReport) -> (f64, f64) {
    let lo = lambda_map(report.lambda_min);
    let hi = lambda_map(report.lambda_max);
    if report.level == 0 {
        // λ_max may exceed 1 at level 0, and l folds it back below 1
        (lo.min(hi), if report.lambda_max >= 1.0 && report.lambda_min <= 1.0 { 1.0 } else { lo.max(hi) })
    } else {
        (lo, hi)
    }
}

/// Fills in `predicted_min/max` of every report from its predecessor.
pub fn attach_predictions(reports: &mut [SpectrumReport]) {
    for i in 1..reports.len() {
        let (lo, hi) = predict_next(&reports[i - 1]);
        reports[i].predicted_min = Some(lo);
        reports[i].predicted_max = Some(hi);
    }
}

/// Which of the theory checks apply to a sequence. Sequences whose update
/// operator differs from the operator being preconditioned only satisfy the
/// initial-spectrum check and definiteness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TheoryChecks {
    pub upper_bound: bool,
    pub decreasing_kappa: bool,
    pub l_map: bool,
}

impl TheoryChecks {
    pub const EXACT: Self = Self {
        upper_bound: true,
        decreasing_kappa: true,
        l_map: true,
    };
    pub const INEXACT: Self = Self {
        upper_bound: false,
        decreasing_kappa: false,
        l_map: false,
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryLedger {
    pub outcomes: Vec<CheckOutcome>,
}

impl TheoryLedger {
    pub fn passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.outcomes.iter().filter(|o| !o.passed)
    }

    fn push(&mut self, name: impl Into<String>, passed: bool, detail: String) {
        self.outcomes.push(CheckOutcome {
            name: name.into(),
            passed,
            detail,
        });
    }
}

pub const UPPER_BOUND_SLACK: f64 = 1e-8;
pub const L_MAP_TOLERANCE: f64 = 1e-6;

/// Checks a sequence of reports for levels `0..=K` of one hyper-power sequence.
///
/// `min_pinv_eigenvalues[k]` is the smallest eigenvalue of the dense `P_k⁻¹`.
pub fn verify_theory(
    reports: &[SpectrumReport],
    min_pinv_eigenvalues: &[f64],
    checks: TheoryChecks,
) -> TheoryLedger {
    let mut ledger = TheoryLedger { outcomes: vec![] };
    let Some(first) = reports.first() else {
        ledger.push("reports", false, "no spectra given".into());
        return ledger;
    };
    ledger.push(
        "initial spectrum in (0, 2)",
        first.lambda_min > 0.0 && first.lambda_max < 2.0,
        format!("[{:.6}, {:.6}]", first.lambda_min, first.lambda_max),
    );
    for (k, &m) in min_pinv_eigenvalues.iter().enumerate() {
        ledger.push(
            format!("P_{k} positive definite"),
            m > 0.0,
            format!("min eigenvalue of P_{k}^-1 = {m:.6e}"),
        );
    }
    for r in reports.iter().skip(1) {
        let k = r.level;
        if checks.upper_bound {
            ledger.push(
                format!("spectrum of level {k} in (0, 1]"),
                r.lambda_min > 0.0 && r.lambda_max <= 1.0 + UPPER_BOUND_SLACK,
                format!("[{:.10}, {:.10}]", r.lambda_min, r.lambda_max),
            );
        }
        if checks.l_map {
            let prev = &reports[k - 1];
            let mut mapped: Vec<f64> = prev.eigenvalues.iter().map(|&l| lambda_map(l)).collect();
            mapped.sort_by(f64::total_cmp);
            let worst = if mapped.len() == r.eigenvalues.len() {
                mapped
                    .iter()
                    .zip(&r.eigenvalues)
                    .map(|(a, b)| (a - b).abs() / b.abs())
                    .fold(0.0, f64::max)
            } else {
                f64::INFINITY
            };
            ledger.push(
                format!("level {k} spectrum is the l-image of level {}", k - 1),
                worst <= L_MAP_TOLERANCE,
                format!("max relative deviation {worst:.3e}"),
            );
            if let (Some(lo), Some(hi)) = (r.predicted_min, r.predicted_max) {
                let e_lo = (lo - r.lambda_min).abs() / r.lambda_min.abs();
                // only an upper bound is predicted for λ_max at level 1
                let ok_hi = if k == 1 {
                    r.lambda_max <= hi * (1.0 + L_MAP_TOLERANCE)
                } else {
                    (hi - r.lambda_max).abs() <= L_MAP_TOLERANCE * r.lambda_max.abs()
                };
                ledger.push(
                    format!("level {k} extremes match the prediction"),
                    e_lo <= L_MAP_TOLERANCE && ok_hi,
                    format!(
                        "min {:.10} (predicted {lo:.10}), max {:.10} (predicted {hi:.10})",
                        r.lambda_min, r.lambda_max
                    ),
                );
            }
        }
        if checks.decreasing_kappa && k >= 2 {
            let prev = &reports[k - 1];
            ledger.push(
                format!("kappa decreases from level {} to {k}", k - 1),
                r.kappa < prev.kappa,
                format!("{:.10} -> {:.10}", prev.kappa, r.kappa),
            );
        }
    }
    ledger
}

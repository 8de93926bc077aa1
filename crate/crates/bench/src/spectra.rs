use std::sync::Arc;

use hyperpower::operator::DenseOp;
use hyperpower::precond::{schur_approximation, sequence_q_exact, sequence_q_fixed, sequence_q_hat, sequence_v};
use hyperpower::spectral::{
    attach_predictions, generalized_spectrum, materialize, verify_theory, CheckOutcome, SpectrumReport,
    TheoryChecks, TheoryLedger,
};
use hyperpower::{DenseMatrix, OpHandle, VERSION};
use log::info;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{BenchError, Result};

/// Allowed per-eigenvalue relative deviation between the hat and exact
/// Schur sequences.
pub const HAT_EXACT_TOLERANCE: f64 = 0.05;

/// Checks for the hat Schur sequence: its update operator changes with the
/// level, so only the condition number is required to decrease.
pub const HAT_CHECKS: TheoryChecks = TheoryChecks {
    upper_bound: false,
    decreasing_kappa: true,
    l_map: false,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceSpectra {
    pub name: String,
    pub reports: Vec<SpectrumReport>,
    /// Smallest eigenvalue of each dense preconditioner `P_k⁻¹`.
    pub min_pinv_eigenvalues: Vec<f64>,
    pub ledger: TheoryLedger,
}

impl SequenceSpectra {
    pub fn kappas(&self) -> Vec<f64> {
        self.reports.iter().map(|r| r.kappa).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectraOutput {
    pub version: String,
    pub config: RunConfig,
    pub velocity: SequenceSpectra,
    pub schur_hat: SequenceSpectra,
    pub schur_fixed: SequenceSpectra,
    pub schur_exact: SequenceSpectra,
    /// Checks relating the Schur sequences to each other.
    pub comparisons: Vec<CheckOutcome>,
    pub passed: bool,
}

impl SpectraOutput {
    pub fn failures(&self) -> Vec<String> {
        let seqs = [&self.velocity, &self.schur_hat, &self.schur_fixed, &self.schur_exact];
        let mut out: Vec<String> = seqs
            .iter()
            .flat_map(|s| s.ledger.failures().map(move |o| format!("{}: {} ({})", s.name, o.name, o.detail)))
            .collect();
        out.extend(
            self.comparisons
                .iter()
                .filter(|o| !o.passed)
                .map(|o| format!("{} ({})", o.name, o.detail)),
        );
        out
    }
}

fn sequence_spectra(
    name: &str,
    target: &DenseMatrix,
    seq: &[OpHandle],
    null_dim: usize,
    checks: TheoryChecks,
) -> Result<SequenceSpectra> {
    let mut reports = Vec::with_capacity(seq.len());
    let mut mins = Vec::with_capacity(seq.len());
    for (k, op) in seq.iter().enumerate() {
        let pinv = materialize(&**op)?.symmetrized();
        mins.push(pinv.symmetric_eigen()?.min());
        let report = generalized_spectrum(target, &pinv, k, null_dim)?;
        info!(
            "{name} k = {k}: [{:.6}, {:.6}], kappa {:.6}",
            report.lambda_min, report.lambda_max, report.kappa
        );
        reports.push(report);
    }
    attach_predictions(&mut reports);
    let ledger = verify_theory(&reports, &mins, checks);
    Ok(SequenceSpectra {
        name: name.to_string(),
        reports,
        min_pinv_eigenvalues: mins,
        ledger,
    })
}

/// Largest relative deviation, eigenvalue by eigenvalue, of `other` from `reference`.
pub fn eigenvalue_deviation(reference: &SpectrumReport, other: &SpectrumReport) -> f64 {
    if reference.eigenvalues.len() != other.eigenvalues.len() {
        return f64::INFINITY;
    }
    reference
        .eigenvalues
        .iter()
        .zip(&other.eigenvalues)
        .map(|(e, h)| (e - h).abs() / e.abs())
        .fold(0.0, f64::max)
}

/// Dense spectra of the velocity sequence and the three Schur sequences for
/// levels `0..=config.updates`, with their theory ledgers.
pub fn cmd_spectra(config: &RunConfig) -> Result<SpectraOutput> {
    config.validate()?;
    if config.updates == 0 {
        return Err(BenchError::Config("spectra need at least one update".into()));
    }
    let k = config.updates;
    let system = config.build_system()?;
    let a = materialize(&*system.a())?;
    let ainv: OpHandle = Arc::new(DenseOp(a.cholesky()?.inverse()));
    let schur = materialize(&*schur_approximation(&system, ainv)?)?;

    let seq_v = sequence_v(&system, k)?;
    let velocity = sequence_spectra("velocity", &a, &seq_v, 0, TheoryChecks::EXACT)?;
    let hat = sequence_spectra("schur-hat", &schur, &sequence_q_hat(&system, &seq_v, k)?, 1, HAT_CHECKS)?;
    let fixed = sequence_spectra(
        "schur-fixed",
        &schur,
        &sequence_q_fixed(&system, seq_v[0].clone(), k)?,
        1,
        TheoryChecks::INEXACT,
    )?;
    let exact = sequence_spectra("schur-exact", &schur, &sequence_q_exact(&system, k)?, 1, TheoryChecks::EXACT)?;

    let mut comparisons = Vec::new();
    let (h0, h1) = (&hat.reports[0], &hat.reports[1]);
    comparisons.push(CheckOutcome {
        name: "schur-hat kappa decreases from level 0 to 1".into(),
        passed: h1.kappa < h0.kappa,
        detail: format!("{:.10} -> {:.10}", h0.kappa, h1.kappa),
    });
    let deviations: Vec<f64> = exact
        .reports
        .iter()
        .zip(&hat.reports)
        .map(|(e, h)| eigenvalue_deviation(e, h))
        .collect();
    let worst = deviations.iter().copied().fold(0.0, f64::max);
    comparisons.push(CheckOutcome {
        name: format!("schur-hat eigenvalues within {HAT_EXACT_TOLERANCE} of schur-exact"),
        passed: worst <= HAT_EXACT_TOLERANCE,
        detail: format!(
            "per level: {}",
            deviations.iter().map(|d| format!("{d:.4}")).collect::<Vec<_>>().join(", ")
        ),
    });

    let passed = velocity.ledger.passed()
        && hat.ledger.passed()
        && fixed.ledger.passed()
        && exact.ledger.passed()
        && comparisons.iter().all(|c| c.passed);
    Ok(SpectraOutput {
        version: VERSION.to_string(),
        config: config.clone(),
        velocity,
        schur_hat: hat,
        schur_fixed: fixed,
        schur_exact: exact,
        comparisons,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deviation_of_identical_and_mismatched_spectra() {
        let a = SpectrumReport::new(0, vec![0.5, 1.0]).unwrap();
        let b = SpectrumReport::new(0, vec![0.55, 1.0]).unwrap();
        assert_eq!(eigenvalue_deviation(&a, &a), 0.0);
        assert!((eigenvalue_deviation(&a, &b) - 0.1).abs() < 1e-15);
        let c = SpectrumReport::new(0, vec![1.0]).unwrap();
        assert_eq!(eigenvalue_deviation(&a, &c), f64::INFINITY);
    }

    #[test]
    fn rejects_level_zero_only() {
        let config = RunConfig { mesh: 2, ..Default::default() };
        assert!(cmd_spectra(&config).is_err());
    }

    #[test]
    fn small_case_serializes_all_report_fields() {
        let config = RunConfig {
            mesh: 2,
            degree: 2,
            updates: 2,
            ..Default::default()
        };
        let out = cmd_spectra(&config).unwrap();
        assert!(out.velocity.ledger.passed(), "{:?}", out.failures());
        assert!(out.schur_exact.ledger.passed(), "{:?}", out.failures());
        let json = serde_json::to_value(&out).unwrap();
        let r = &json["velocity"]["reports"][1];
        for key in ["level", "eigenvalues", "lambda_min", "lambda_max", "kappa", "predicted_min", "predicted_max"] {
            assert!(r.get(key).is_some(), "{key}");
        }
        assert_eq!(json["config"]["mesh"], 2);
        assert_eq!(json["version"], VERSION);
    }
}

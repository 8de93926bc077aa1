//! Solution-time model `T_sol ∝ N_iter · T_f · (1 + T_p / T_f)`, relative to
//! the unaccelerated (`k = 0`) solve.

use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};
use crate::output::{fmt_float, Table};
use crate::solve::BenchRecord;
use hyperpower::VERSION;

/// Grid resolution along each axis.
pub const GRID_STEPS: usize = 21;

/// Predicted `T_sol / T_sol,ref` for an iteration-count ratio and the
/// preconditioner-to-forward cost ratios of the run and its reference.
pub fn model_ratio(iteration_ratio: f64, cost_ratio: f64, reference_cost_ratio: f64) -> f64 {
    iteration_ratio * (1.0 + cost_ratio) / (1.0 + reference_cost_ratio)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourPoint {
    pub mesh: usize,
    pub degree: usize,
    pub schur: String,
    pub updates: usize,
    pub iteration_ratio: f64,
    pub cost_ratio: f64,
    pub model_ratio: f64,
    /// Measured `T_sol` of the run relative to its reference.
    pub measured_ratio: f64,
}

/// One `(mesh, degree, schur)` group: the model over a grid plus the measured points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourGroup {
    pub mesh: usize,
    pub degree: usize,
    pub schur: String,
    pub reference_cost_ratio: f64,
    pub iteration_ratios: Vec<f64>,
    pub cost_ratios: Vec<f64>,
    /// `values[i][j]` at `iteration_ratios[i]`, `cost_ratios[j]`.
    pub values: Vec<Vec<f64>>,
    pub points: Vec<ContourPoint>,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn key(r: &BenchRecord) -> (usize, usize, String) {
    (r.config.mesh, r.config.degree, r.config.schur.to_string())
}

pub fn cmd_contour(records: &[BenchRecord]) -> Result<Vec<ContourGroup>> {
    let mut keys: Vec<(usize, usize, String)> = records.iter().map(key).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .map(|(mesh, degree, schur)| {
            let group: Vec<&BenchRecord> = records
                .iter()
                .filter(|r| key(r) == (mesh, degree, schur.clone()))
                .collect();
            let reference = group
                .iter()
                .find(|r| r.config.updates == 0)
                .ok_or_else(|| BenchError::MissingReference {
                    mesh,
                    degree,
                    schur: schur.clone(),
                })?;
            let ref_cost = reference.t_precond / reference.t_forward;
            let mut points: Vec<ContourPoint> = group
                .iter()
                .map(|r| {
                    let iteration_ratio = r.iterations as f64 / reference.iterations as f64;
                    let cost_ratio = r.t_precond / r.t_forward;
                    ContourPoint {
                        mesh,
                        degree,
                        schur: schur.clone(),
                        updates: r.config.updates,
                        iteration_ratio,
                        cost_ratio,
                        model_ratio: model_ratio(iteration_ratio, cost_ratio, ref_cost),
                        measured_ratio: r.t_sol / reference.t_sol,
                    }
                })
                .collect();
            points.sort_by_key(|p| p.updates);
            let max_cost = points.iter().map(|p| p.cost_ratio).fold(1.0, f64::max);
            let iteration_ratios = linspace(0.05, 1.0, GRID_STEPS);
            let cost_ratios = linspace(0.0, 1.25 * max_cost, GRID_STEPS);
            let values = iteration_ratios
                .iter()
                .map(|&n| cost_ratios.iter().map(|&c| model_ratio(n, c, ref_cost)).collect())
                .collect();
            Ok(ContourGroup {
                mesh,
                degree,
                schur,
                reference_cost_ratio: ref_cost,
                iteration_ratios,
                cost_ratios,
                values,
                points,
            })
        })
        .collect()
}

pub const CONTOUR_COLUMNS: [&str; 11] = [
    "version",
    "kind",
    "mesh",
    "degree",
    "schur",
    "updates",
    "iteration_ratio",
    "cost_ratio",
    "reference_cost_ratio",
    "model_ratio",
    "measured_ratio",
];

/// Grid rows (`kind = grid`, no `updates`) followed by the labelled points.
pub fn contour_table(groups: &[ContourGroup]) -> Table {
    let mut t = Table::new(&CONTOUR_COLUMNS);
    for g in groups {
        let prefix = |kind: &str| {
            vec![
                VERSION.to_string(),
                kind.to_string(),
                g.mesh.to_string(),
                g.degree.to_string(),
                g.schur.clone(),
            ]
        };
        for (i, &n) in g.iteration_ratios.iter().enumerate() {
            for (j, &c) in g.cost_ratios.iter().enumerate() {
                let mut row = prefix("grid");
                row.extend([
                    String::new(),
                    fmt_float(n),
                    fmt_float(c),
                    fmt_float(g.reference_cost_ratio),
                    fmt_float(g.values[i][j]),
                    String::new(),
                ]);
                t.push(row);
            }
        }
        for p in &g.points {
            let mut row = prefix("point");
            row.extend([
                p.updates.to_string(),
                fmt_float(p.iteration_ratio),
                fmt_float(p.cost_ratio),
                fmt_float(g.reference_cost_ratio),
                fmt_float(p.model_ratio),
                fmt_float(p.measured_ratio),
            ]);
            t.push(row);
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_run_has_unit_ratio() {
        assert_eq!(model_ratio(1.0, 0.7, 0.7), 1.0);
    }

    #[test]
    fn break_even_when_iterations_drop_by_two_thirds() {
        // tripling the per-iteration cost against a negligible reference
        let r = model_ratio(0.33, 2.0, 0.0);
        assert!((r - 0.99).abs() < 1e-12);
    }

    #[test]
    fn linspace_endpoints() {
        let v = linspace(0.0, 2.0, 5);
        assert_eq!(v, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
    }
}

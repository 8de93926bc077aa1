use std::time::Instant;

use hyperpower::krylov::{minres, MinresOptions};
use hyperpower::precond::{BlockPreconditioner, CostModel};
use hyperpower::stokes::StokesSystem;
use hyperpower::{LinearOperator, VERSION};
use log::info;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{BenchError, Result};
use crate::output::{fmt_float, fmt_opt, parse_field, parse_opt, Table};

/// Applications timed when measuring a single operator.
pub const TIMING_SAMPLES: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub config: RunConfig,
    pub version: String,
    pub n_v: usize,
    pub n_q: usize,
    pub iterations: usize,
    pub converged: bool,
    pub true_relative_residual: f64,
    /// `‖Bᵀu‖ / ‖u‖`
    pub divergence_ratio: f64,
    /// `‖Bᵀu‖ / ‖b‖`
    pub divergence_residual_ratio: f64,
    /// Mean removed from the reported pressure.
    pub pressure_shift: f64,
    pub flops_forward: u64,
    pub flops_precond: u64,
    /// Flop counts of `P_{V,0}⁻¹` and `A`.
    pub c_p: f64,
    pub c_a: f64,
    pub t_setup: f64,
    pub t_sol: f64,
    /// `t_sol` divided by the `k = 0` solve of the same session.
    pub t_sol_normalized: f64,
    pub t_forward: f64,
    pub t_precond: f64,
}

pub const RECORD_COLUMNS: [&str; 30] = [
    "version",
    "mesh",
    "degree",
    "updates",
    "schur",
    "nu",
    "cpen",
    "tol",
    "maxit",
    "seed",
    "lid_axis",
    "lid_tangent",
    "repeats",
    "n_v",
    "n_q",
    "iterations",
    "converged",
    "true_relative_residual",
    "divergence_ratio",
    "divergence_residual_ratio",
    "pressure_shift",
    "flops_forward",
    "flops_precond",
    "c_p",
    "c_a",
    "t_setup",
    "t_sol",
    "t_sol_normalized",
    "t_forward",
    "t_precond",
];

/// Columns holding wall-clock measurements; everything else is deterministic.
pub const TIMING_COLUMNS: [&str; 5] = ["t_setup", "t_sol", "t_sol_normalized", "t_forward", "t_precond"];

impl BenchRecord {
    pub fn csv_row(&self) -> Vec<String> {
        let c = &self.config;
        vec![
            self.version.clone(),
            c.mesh.to_string(),
            c.degree.to_string(),
            c.updates.to_string(),
            c.schur.to_string(),
            fmt_float(c.nu),
            fmt_float(c.cpen),
            fmt_float(c.tol),
            fmt_opt(c.maxit),
            c.seed.to_string(),
            c.lid_axis.to_string(),
            c.lid_tangent.to_string(),
            c.repeats.to_string(),
            self.n_v.to_string(),
            self.n_q.to_string(),
            self.iterations.to_string(),
            self.converged.to_string(),
            fmt_float(self.true_relative_residual),
            fmt_float(self.divergence_ratio),
            fmt_float(self.divergence_residual_ratio),
            fmt_float(self.pressure_shift),
            self.flops_forward.to_string(),
            self.flops_precond.to_string(),
            fmt_float(self.c_p),
            fmt_float(self.c_a),
            fmt_float(self.t_setup),
            fmt_float(self.t_sol),
            fmt_float(self.t_sol_normalized),
            fmt_float(self.t_forward),
            fmt_float(self.t_precond),
        ]
    }

    pub fn table(records: &[BenchRecord]) -> Table {
        let mut t = Table::new(&RECORD_COLUMNS);
        for r in records {
            t.push(r.csv_row());
        }
        t
    }

    pub fn from_table(table: &Table) -> Result<Vec<BenchRecord>> {
        table
            .named_rows()
            .iter()
            .map(|row| {
                let config = RunConfig {
                    mesh: parse_field(row, "mesh")?,
                    degree: parse_field(row, "degree")?,
                    updates: parse_field(row, "updates")?,
                    schur: parse_field(row, "schur")?,
                    nu: parse_field(row, "nu")?,
                    cpen: parse_field(row, "cpen")?,
                    tol: parse_field(row, "tol")?,
                    maxit: parse_opt(row, "maxit")?,
                    seed: parse_field(row, "seed")?,
                    lid_axis: parse_field(row, "lid_axis")?,
                    lid_tangent: parse_field(row, "lid_tangent")?,
                    repeats: parse_field(row, "repeats")?,
                    ..RunConfig::default()
                };
                Ok(BenchRecord {
                    config,
                    version: parse_field(row, "version")?,
                    n_v: parse_field(row, "n_v")?,
                    n_q: parse_field(row, "n_q")?,
                    iterations: parse_field(row, "iterations")?,
                    converged: parse_field(row, "converged")?,
                    true_relative_residual: parse_field(row, "true_relative_residual")?,
                    divergence_ratio: parse_field(row, "divergence_ratio")?,
                    divergence_residual_ratio: parse_field(row, "divergence_residual_ratio")?,
                    pressure_shift: parse_field(row, "pressure_shift")?,
                    flops_forward: parse_field(row, "flops_forward")?,
                    flops_precond: parse_field(row, "flops_precond")?,
                    c_p: parse_field(row, "c_p")?,
                    c_a: parse_field(row, "c_a")?,
                    t_setup: parse_field(row, "t_setup")?,
                    t_sol: parse_field(row, "t_sol")?,
                    t_sol_normalized: parse_field(row, "t_sol_normalized")?,
                    t_forward: parse_field(row, "t_forward")?,
                    t_precond: parse_field(row, "t_precond")?,
                })
            })
            .collect()
    }
}

pub fn median(mut samples: Vec<f64>) -> f64 {
    assert!(!samples.is_empty());
    samples.sort_by(f64::total_cmp);
    let n = samples.len();
    if n % 2 == 1 {
        samples[n / 2]
    } else {
        0.5 * (samples[n / 2 - 1] + samples[n / 2])
    }
}

/// Shortest wall time of one timing sample; fast operators are applied
/// repeatedly within a sample to reach it.
pub const MIN_SAMPLE_SECS: f64 = 0.05;

/// Median wall time in seconds of one application of `op` to `x`, over
/// `samples` timed samples.
pub fn time_apply(op: &dyn LinearOperator, x: &[f64], samples: usize) -> f64 {
    let mut y = vec![0.0; op.nrows()];
    let warm = Instant::now();
    op.apply_into(x, &mut y);
    let single = warm.elapsed().as_secs_f64();
    let inner = ((MIN_SAMPLE_SECS / single.max(1e-9)).ceil() as usize).clamp(1, 100_000);
    median(
        (0..samples.max(1))
            .map(|_| {
                let t = Instant::now();
                for _ in 0..inner {
                    op.apply_into(x, &mut y);
                }
                t.elapsed().as_secs_f64() / inner as f64
            })
            .collect(),
    )
}

/// Solves the lid-driven cavity with one preconditioner level.
pub fn cmd_solve(config: &RunConfig) -> Result<BenchRecord> {
    let levels: Vec<usize> = if config.updates == 0 { vec![0] } else { vec![0, config.updates] };
    let mut records = solve_levels(config, &levels)?;
    Ok(records.pop().expect("at least one level"))
}

/// Solves with every level `0..=config.updates` on one assembled system.
pub fn cmd_solve_sweep(config: &RunConfig) -> Result<Vec<BenchRecord>> {
    let levels: Vec<usize> = (0..=config.updates).collect();
    solve_levels(config, &levels)
}

fn solve_levels(config: &RunConfig, levels: &[usize]) -> Result<Vec<BenchRecord>> {
    config.validate()?;
    if levels.first() != Some(&0) {
        return Err(BenchError::Config("a session starts with the k = 0 reference".into()));
    }
    let system = config.build_system()?;
    let cost = CostModel::measured(&system)?;
    let rhs = system.rhs();
    let saddle = system.saddle();
    let t_forward = time_apply(&*saddle, &rhs, TIMING_SAMPLES);
    info!(
        "mesh {}^3, degree {}: n_v = {}, n_q = {}, forward apply {:.3e} s",
        config.mesh,
        config.degree,
        system.n_v(),
        system.n_q(),
        t_forward
    );

    let mut records: Vec<BenchRecord> = Vec::with_capacity(levels.len());
    for &k in levels {
        let mut record = solve_one(&system, &config.with_updates(k), cost, t_forward)?;
        record.t_sol_normalized = match records.first() {
            Some(reference) => record.t_sol / reference.t_sol,
            None => 1.0,
        };
        info!(
            "k = {k}: {} iterations (converged = {}), T_sol = {:.3e} s ({:.3} of k = 0)",
            record.iterations, record.converged, record.t_sol, record.t_sol_normalized
        );
        records.push(record);
    }
    Ok(records)
}

fn solve_one(system: &StokesSystem, config: &RunConfig, cost: CostModel, t_forward: f64) -> Result<BenchRecord> {
    let rhs = system.rhs();
    let setup = Instant::now();
    let pc = BlockPreconditioner::build(system, config.updates, config.schur)?;
    let t_setup = setup.elapsed().as_secs_f64();
    let t_precond = time_apply(&*pc.operator, &rhs, TIMING_SAMPLES);

    let n = rhs.len();
    let opts = MinresOptions {
        tol: config.tol,
        maxit: config.maxit.unwrap_or(MinresOptions::with_tol(config.tol, n).maxit),
    };
    let saddle = system.saddle();
    let mut times = Vec::with_capacity(config.repeats);
    let mut result = None;
    for _ in 0..config.repeats {
        let (z, stats) = minres(&*saddle, &*pc.operator, &rhs, opts)?;
        times.push(stats.wall_time_secs);
        result.get_or_insert((z, stats));
    }
    let (z, stats) = result.expect("repeats >= 1");
    let (u, p) = z.split_at(system.n_v());
    let divergence = system.bt().apply(u)?;
    let div_norm = norm(&divergence);
    let (_, pressure_shift) = system.normalized_pressure(p)?;

    Ok(BenchRecord {
        config: config.clone(),
        version: VERSION.to_string(),
        n_v: system.n_v(),
        n_q: system.n_q(),
        iterations: stats.iterations,
        converged: stats.converged,
        true_relative_residual: stats.true_relative_residual,
        divergence_ratio: system.divergence_ratio(u)?,
        divergence_residual_ratio: div_norm / norm(&rhs),
        pressure_shift,
        flops_forward: saddle.flops(),
        flops_precond: pc.operator.flops(),
        c_p: cost.c_p,
        c_a: cost.c_a,
        t_setup,
        t_sol: median(times),
        t_sol_normalized: f64::NAN,
        t_forward,
        t_precond,
    })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_odd_and_even() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 3.0, 2.0]), 2.5);
    }

    #[test]
    fn reference_level_is_normalized_to_one() {
        let config = RunConfig {
            mesh: 2,
            degree: 2,
            updates: 1,
            ..Default::default()
        };
        let records = cmd_solve_sweep(&config).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].t_sol_normalized, 1.0);
        assert!(records.iter().all(|r| r.converged));
        assert!(records[1].iterations < records[0].iterations);
        let single = cmd_solve(&config).unwrap();
        assert_eq!(single.config.updates, 1);
        assert_eq!(single.iterations, records[1].iterations);
    }

    #[test]
    fn csv_round_trip_preserves_records() {
        let config = RunConfig {
            mesh: 2,
            degree: 3,
            ..Default::default()
        };
        let rec = cmd_solve(&config).unwrap();
        let text = BenchRecord::table(&[rec.clone()]).to_string().unwrap();
        let back = BenchRecord::from_table(&Table::read_from(text.as_bytes()).unwrap()).unwrap();
        assert_eq!(back, vec![rec]);
    }
}

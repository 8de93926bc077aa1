use std::process::Command;

use hyperpower::precond::SchurMode;
use hyperpower_bench::contour::{cmd_contour, contour_table, model_ratio};
use hyperpower_bench::output::Table;
use hyperpower_bench::solve::{cmd_solve, cmd_solve_sweep, TIMING_COLUMNS};
use hyperpower_bench::{BenchError, BenchRecord, RunConfig};

fn small(updates: usize) -> RunConfig {
    RunConfig {
        mesh: 3,
        degree: 2,
        updates,
        ..Default::default()
    }
}

fn deterministic_fields(table: &Table) -> Vec<Vec<String>> {
    let keep: Vec<usize> = (0..table.header.len())
        .filter(|&i| !TIMING_COLUMNS.contains(&table.header[i].as_str()))
        .collect();
    table.rows.iter().map(|r| keep.iter().map(|&i| r[i].clone()).collect()).collect()
}

#[test]
fn repeated_runs_are_bitwise_identical_outside_timings() {
    let config = small(2);
    let a = BenchRecord::table(&cmd_solve_sweep(&config).unwrap());
    let b = BenchRecord::table(&cmd_solve_sweep(&config).unwrap());
    assert_eq!(a.header, b.header);
    assert_eq!(deterministic_fields(&a), deterministic_fields(&b));
    assert!(a.header.iter().any(|h| h == "version"));
}

#[test]
fn permuting_the_lid_keeps_iteration_counts() {
    let reference = cmd_solve_sweep(&small(1)).unwrap();
    for (axis, tangent) in [(0, 1), (1, 2), (2, 1), (0, 2)] {
        let config = RunConfig {
            lid_axis: axis,
            lid_tangent: tangent,
            ..small(1)
        };
        let records = cmd_solve_sweep(&config).unwrap();
        for (r, s) in reference.iter().zip(&records) {
            assert_eq!(r.iterations, s.iterations, "axis {axis} tangent {tangent}");
            assert!((r.pressure_shift.abs() - s.pressure_shift.abs()).abs() <= 1e-8 * (1.0 + r.pressure_shift.abs()));
        }
    }
}

#[test]
fn schur_modes_agree_at_level_one() {
    let hat = cmd_solve(&small(1)).unwrap();
    let fixed = cmd_solve(&RunConfig {
        schur: SchurMode::Fixed,
        ..small(1)
    })
    .unwrap();
    assert_eq!(hat.iterations, fixed.iterations);
    let exact = cmd_solve(&RunConfig {
        schur: SchurMode::Exact,
        ..small(1)
    })
    .unwrap();
    assert!(exact.converged);
}

#[test]
fn non_convergence_is_reported() {
    let config = RunConfig {
        maxit: Some(3),
        ..small(0)
    };
    let rec = cmd_solve(&config).unwrap();
    assert!(!rec.converged);
    assert_eq!(rec.iterations, 3);
}

#[test]
fn contour_points_use_the_level_zero_reference() {
    let records = cmd_solve_sweep(&small(2)).unwrap();
    let groups = cmd_contour(&records).unwrap();
    assert_eq!(groups.len(), 1);
    let g = &groups[0];
    assert_eq!(g.points.len(), 3);
    assert_eq!(g.points[0].model_ratio, 1.0);
    assert_eq!(g.points[0].measured_ratio, 1.0);
    for p in &g.points {
        assert_eq!(p.model_ratio, model_ratio(p.iteration_ratio, p.cost_ratio, g.reference_cost_ratio));
    }
    let table = contour_table(&groups);
    let grid = table.rows.iter().filter(|r| r[1] == "grid").count();
    assert_eq!(grid, g.iteration_ratios.len() * g.cost_ratios.len());

    let missing = cmd_contour(&records[1..]);
    assert!(matches!(missing, Err(BenchError::MissingReference { .. })));
}

#[test]
fn cli_solve_contour_and_spectra() {
    let dir = std::env::temp_dir().join(format!("hyperpower-bench-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let exe = env!("CARGO_BIN_EXE_hyperpower-bench");
    let records = dir.join("records.csv");
    let status = Command::new(exe)
        .args(["solve", "--mesh", "2", "--degree", "2", "--updates", "2", "--sweep", "--out"])
        .arg(&records)
        .status()
        .unwrap();
    assert!(status.success());
    let table = Table::read_from(std::fs::File::open(&records).unwrap()).unwrap();
    assert_eq!(table.rows.len(), 3);
    let parsed = BenchRecord::from_table(&table).unwrap();
    assert_eq!(parsed[2].config.updates, 2);

    let contour = dir.join("contour.csv");
    let status = Command::new(exe)
        .args(["contour", "--records"])
        .arg(&records)
        .arg("--out")
        .arg(&contour)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(std::fs::read_to_string(&contour).unwrap().starts_with("version,kind,"));

    let json_config = dir.join("config.json");
    std::fs::write(&json_config, r#"{"degree": 2, "updates": 2}"#).unwrap();
    let spectra = dir.join("spectra.json");
    let status = Command::new(exe)
        .args(["spectra", "--degree", "3", "--json-config"])
        .arg(&json_config)
        .arg("--out")
        .arg(&spectra)
        .status()
        .unwrap();
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&spectra).unwrap()).unwrap();
    assert_eq!(json["config"]["degree"], 2);
    assert_eq!(json["velocity"]["reports"].as_array().unwrap().len(), 3);
    assert_eq!(status.success(), json["passed"].as_bool().unwrap());

    let status = Command::new(exe)
        .args(["solve", "--mesh", "2", "--degree", "2", "--maxit", "2", "--out"])
        .arg(dir.join("short.csv"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    let status = Command::new(exe).args(["solve", "--mesh", "1"]).status().unwrap();
    assert!(!status.success());
    std::fs::remove_dir_all(&dir).ok();
}

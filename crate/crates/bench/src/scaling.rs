use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use hyperpower::precond::{make_pq0, make_pv0};
use hyperpower::tensorkron::{FastDiagSolver, GeneralizedKronSum};
use hyperpower::{OpHandle, VERSION};
use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{BenchError, Result};
use crate::output::{fmt_float, Table};
use crate::solve::time_apply;

/// Minimum number of timed applications per mesh.
pub const MIN_REPEATS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorKind {
    /// The full saddle-point operator.
    Saddle,
    /// Velocity block `A`.
    Velocity,
    /// `Bᵀ`.
    Divergence,
    /// Initial velocity preconditioner (fast diagonalization per component).
    Pv0,
    /// Initial pressure preconditioner (inverse pressure mass).
    Pq0,
    /// A three-term generalized Kronecker sum with equal square factors.
    KronSum,
    /// Its fast-diagonalization inverse.
    FastDiag,
}

impl OperatorKind {
    pub const ALL: [OperatorKind; 7] = [
        Self::Saddle,
        Self::Velocity,
        Self::Divergence,
        Self::Pv0,
        Self::Pq0,
        Self::KronSum,
        Self::FastDiag,
    ];

    /// Operators whose Kronecker factors are all square and of one size.
    pub fn is_equal_size(self) -> bool {
        matches!(self, Self::Pq0 | Self::KronSum | Self::FastDiag)
    }

    pub fn build(self, config: &RunConfig) -> Result<OpHandle> {
        let system = config.build_system()?;
        let equal_sum = || {
            let u = system.univariate();
            GeneralizedKronSum::new(vec![(u.t_check.clone(), u.mass_check.clone()); 3])
        };
        Ok(match self {
            Self::Saddle => system.saddle(),
            Self::Velocity => system.a(),
            Self::Divergence => system.bt(),
            Self::Pv0 => make_pv0(&system)?,
            Self::Pq0 => make_pq0(&system)?,
            Self::KronSum => Arc::new(equal_sum()?),
            Self::FastDiag => Arc::new(FastDiagSolver::new(&equal_sum()?)?),
        })
    }
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Saddle => "saddle",
            Self::Velocity => "velocity",
            Self::Divergence => "divergence",
            Self::Pv0 => "pv0",
            Self::Pq0 => "pq0",
            Self::KronSum => "kron-sum",
            Self::FastDiag => "fast-diag",
        })
    }
}

impl FromStr for OperatorKind {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.to_string() == s)
            .ok_or_else(|| BenchError::Config(format!("unknown operator '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub mesh: usize,
    /// Number of unknowns the operator acts on.
    pub n: usize,
    pub time: f64,
    pub flops: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub version: String,
    pub degree: usize,
    pub operator: OperatorKind,
    pub repeats: usize,
    pub seed: u64,
    pub points: Vec<ScalingPoint>,
    pub time_slope: f64,
    pub flop_slope: f64,
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Times `operator` on every mesh of `meshes` at the degree of `base`.
pub fn cmd_scaling(base: &RunConfig, meshes: &[usize], operator: OperatorKind) -> Result<ScalingReport> {
    let mut sorted = meshes.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() < 3 {
        return Err(BenchError::Config(format!(
            "scaling needs at least three distinct meshes (got {meshes:?})"
        )));
    }
    let repeats = base.repeats.max(MIN_REPEATS);
    let mut rng = ChaCha8Rng::seed_from_u64(base.seed);
    let mut points = Vec::with_capacity(sorted.len());
    for &mesh in &sorted {
        let config = RunConfig { mesh, ..base.clone() };
        let op = operator.build(&config)?;
        let x: Vec<f64> = (0..op.ncols()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let time = time_apply(&*op, &x, repeats);
        info!("{operator} at mesh {mesh}^3: n = {}, {:.3e} s, {} flops", op.ncols(), time, op.flops());
        points.push(ScalingPoint {
            mesh,
            n: op.ncols(),
            time,
            flops: op.flops(),
        });
    }
    let ns: Vec<f64> = points.iter().map(|p| p.n as f64).collect();
    let times: Vec<f64> = points.iter().map(|p| p.time).collect();
    let flops: Vec<f64> = points.iter().map(|p| p.flops as f64).collect();
    Ok(ScalingReport {
        version: VERSION.to_string(),
        degree: base.degree,
        operator,
        repeats,
        seed: base.seed,
        time_slope: loglog_slope(&ns, &times),
        flop_slope: loglog_slope(&ns, &flops),
        points,
    })
}

impl ScalingReport {
    pub fn table(&self) -> Table {
        let mut t = Table::new(&[
            "version",
            "degree",
            "operator",
            "repeats",
            "seed",
            "mesh",
            "n",
            "time",
            "flops",
            "time_slope",
            "flop_slope",
        ]);
        for p in &self.points {
            t.push(vec![
                self.version.clone(),
                self.degree.to_string(),
                self.operator.to_string(),
                self.repeats.to_string(),
                self.seed.to_string(),
                p.mesh.to_string(),
                p.n.to_string(),
                fmt_float(p.time),
                p.flops.to_string(),
                fmt_float(self.time_slope),
                fmt_float(self.flop_slope),
            ]);
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_a_power_law() {
        let xs = [8.0, 27.0, 64.0, 125.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(4.0 / 3.0)).collect();
        assert!((loglog_slope(&xs, &ys) - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn operator_names_round_trip() {
        for k in OperatorKind::ALL {
            assert_eq!(k.to_string().parse::<OperatorKind>().unwrap(), k);
            let json = serde_json::to_string(&k).unwrap();
            assert_eq!(json, format!("\"{k}\""));
        }
        assert!("nope".parse::<OperatorKind>().is_err());
    }

    #[test]
    fn needs_three_meshes() {
        let base = RunConfig::default();
        assert!(cmd_scaling(&base, &[2, 3, 3], OperatorKind::Pq0).is_err());
    }

    #[test]
    fn equal_size_flops_scale_exactly() {
        let base = RunConfig { degree: 2, ..Default::default() };
        for k in OperatorKind::ALL.into_iter().filter(|k| k.is_equal_size()) {
            let r = cmd_scaling(&base, &[2, 3, 5], k).unwrap();
            assert!((r.flop_slope - 4.0 / 3.0).abs() < 1e-12, "{k}: {}", r.flop_slope);
            assert_eq!(r.points.len(), 3);
        }
    }
}

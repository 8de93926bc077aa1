use std::path::PathBuf;

use hyperpower::precond::SchurMode;
use hyperpower::stokes::{Lid, StokesParams, StokesSpace, StokesSystem};
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

/// Nitsche penalty constant used by the benchmark. At m = 2, p = 4 it puts the
/// initial velocity spectrum at [0.710, 1.440].
pub const CALIBRATED_PENALTY: f64 = 10.0;

pub const MAX_UPDATES: usize = 4;

/// Largest mesh and degree accepted without `allow_large`.
pub const DESK_MESH_LIMIT: usize = 32;
pub const DESK_DEGREE_LIMIT: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Elements per direction.
    pub mesh: usize,
    pub degree: usize,
    /// Number of hyper-power updates `k`.
    pub updates: usize,
    pub schur: SchurMode,
    pub nu: f64,
    pub cpen: f64,
    pub tol: f64,
    /// MINRES iteration cap; `10 n` when unset.
    pub maxit: Option<usize>,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub lid_axis: usize,
    pub lid_tangent: usize,
    /// Timed repetitions; the median is reported.
    pub repeats: usize,
    pub allow_large: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mesh: 8,
            degree: 2,
            updates: 0,
            schur: SchurMode::Hat,
            nu: 1.0,
            cpen: CALIBRATED_PENALTY,
            tol: 1e-8,
            maxit: None,
            out: None,
            seed: 0,
            lid_axis: 2,
            lid_tangent: 0,
            repeats: 1,
            allow_large: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(BenchError::Config(msg));
        if self.mesh < 2 {
            return fail(format!("mesh must be at least 2 (got {})", self.mesh));
        }
        if self.degree < 2 {
            return fail(format!("degree must be at least 2 (got {})", self.degree));
        }
        if !self.allow_large && (self.mesh > DESK_MESH_LIMIT || self.degree > DESK_DEGREE_LIMIT) {
            return fail(format!(
                "mesh {} / degree {} exceeds the desk-scale limits ({DESK_MESH_LIMIT}, {DESK_DEGREE_LIMIT}); \
                 pass --allow-large to run it",
                self.mesh, self.degree
            ));
        }
        if self.updates > MAX_UPDATES {
            return fail(format!("updates must be in 0..={MAX_UPDATES} (got {})", self.updates));
        }
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return fail(format!("viscosity must be positive (got {})", self.nu));
        }
        if !(self.cpen > 0.0 && self.cpen.is_finite()) {
            return fail(format!("penalty constant must be positive (got {})", self.cpen));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return fail(format!("tolerance must lie in (0, 1) (got {})", self.tol));
        }
        if self.maxit == Some(0) {
            return fail("maxit must be positive".into());
        }
        if self.repeats == 0 {
            return fail("repeats must be positive".into());
        }
        Lid::unit(self.lid_axis, self.lid_tangent)?;
        Ok(())
    }

    pub fn lid(&self) -> Result<Lid> {
        Ok(Lid::unit(self.lid_axis, self.lid_tangent)?)
    }

    pub fn build_system(&self) -> Result<StokesSystem> {
        self.validate()?;
        let space = StokesSpace::new(self.mesh, self.degree)?;
        Ok(StokesSystem::new(
            space,
            StokesParams {
                nu: self.nu,
                cpen: self.cpen,
                lid: self.lid()?,
            },
        )?)
    }

    /// Overlays the keys of a JSON object onto this configuration.
    pub fn merge_json(&self, text: &str) -> Result<Self> {
        let overrides: serde_json::Value = serde_json::from_str(text)?;
        let serde_json::Value::Object(overrides) = overrides else {
            return Err(BenchError::Config("JSON configuration must be an object".into()));
        };
        let mut base = serde_json::to_value(self)?;
        if let serde_json::Value::Object(map) = &mut base {
            map.extend(overrides);
        }
        let merged: Self = serde_json::from_value(base)?;
        merged.validate()?;
        Ok(merged)
    }

    pub fn with_updates(&self, updates: usize) -> Self {
        Self { updates, ..self.clone() }
    }
}

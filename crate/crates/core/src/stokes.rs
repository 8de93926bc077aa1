//! The divergence-conforming spline discretization of the Stokes problem on
//! the unit cube and its saddle-point system in Kronecker form.
//!
//! Velocity component `c` uses the degree-`p` N-basis (boundary functions
//! removed, which imposes `u·n = 0` strongly) along direction `c` and the
//! unit-integral M-basis of degree `p - 1` along the other two directions;
//! pressure uses the M-basis in every direction. Velocity unknowns are stored
//! component by component, each with the direction-1 index running fastest.
//!
//! The velocity block is `A = 2ν (∫ ∇ˢu : ∇ˢv + Nitsche terms / 2ν)`, the
//! divergence block is `B_{(v,q)} = ∫ (∇·v) q`, and the system solved is
//! `[[A, B], [Bᵀ, 0]] [u; p] = [f; 0]`. With this sign convention the physical
//! pressure is `-p`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dense::DenseMatrix;
use crate::error::{check_len, Error, Result};
use crate::operator::{BlockOperator, LinearOperator, OpHandle};
use crate::spline::{
    assemble_univariate, build_t, BasisKind, QuadratureRule, UnivariateBasis, UnivariateKind,
};
use crate::tensorkron::{GeneralizedKronSum, KroneckerOp};

pub const DIM: usize = 3;

/// Spline spaces of the discrete Stokes complex on a uniform `m³` mesh.
#[derive(Debug, Clone)]
pub struct StokesSpace {
    elements: usize,
    degree: usize,
    /// Restricted N-basis (normal direction of a velocity component).
    n_basis: UnivariateBasis,
    /// M-basis (tangential directions and pressure).
    m_basis: UnivariateBasis,
}

impl StokesSpace {
    pub fn new(m: usize, p: usize) -> Result<Self> {
        if m < 2 || p < 2 {
            return Err(Error::InvalidArgument(format!(
                "Stokes space needs m >= 2 and p >= 2 (got m = {m}, p = {p})"
            )));
        }
        Ok(Self {
            elements: m,
            degree: p,
            n_basis: UnivariateBasis::new(m, p, BasisKind::N, true)?,
            m_basis: UnivariateBasis::new(m, p, BasisKind::M, false)?,
        })
    }

    pub fn elements(&self) -> usize {
        self.elements
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn mesh_size(&self) -> f64 {
        1.0 / self.elements as f64
    }

    pub fn n_basis(&self) -> &UnivariateBasis {
        &self.n_basis
    }

    pub fn m_basis(&self) -> &UnivariateBasis {
        &self.m_basis
    }

    /// Basis of velocity component `c` along direction `dir` (both 0-based).
    pub fn velocity_basis(&self, c: usize, dir: usize) -> &UnivariateBasis {
        if c == dir {
            &self.n_basis
        } else {
            &self.m_basis
        }
    }

    /// Per-direction sizes `(n_1, n_2, n_3)` of velocity component `c`.
    pub fn component_dims(&self, c: usize) -> [usize; DIM] {
        std::array::from_fn(|dir| self.velocity_basis(c, dir).len())
    }

    pub fn component_len(&self, c: usize) -> usize {
        self.component_dims(c).iter().product()
    }

    /// Offset of component `c` inside a velocity vector.
    pub fn component_offset(&self, c: usize) -> usize {
        (0..c).map(|k| self.component_len(k)).sum()
    }

    pub fn pressure_dims(&self) -> [usize; DIM] {
        [self.m_basis.len(); DIM]
    }

    pub fn n_v(&self) -> usize {
        (0..DIM).map(|c| self.component_len(c)).sum()
    }

    pub fn n_q(&self) -> usize {
        self.pressure_dims().iter().product()
    }

    /// Coefficients of the constant pressure 1.
    pub fn constant_pressure(&self) -> Vec<f64> {
        let c = self.m_basis.constant_coefficients();
        let n = c.len();
        let mut out = Vec::with_capacity(n * n * n);
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    out.push(c[i] * c[j] * c[k]);
                }
            }
        }
        out
    }
}

/// The univariate matrices of one parametric direction.
#[derive(Debug, Clone)]
pub struct UnivariateMatrices {
    pub mass: DenseMatrix,
    pub stiffness: DenseMatrix,
    pub coupling: DenseMatrix,
    pub mass_check: DenseMatrix,
    pub stiffness_check: DenseMatrix,
    pub coupling_check: DenseMatrix,
    pub nitsche_check: DenseMatrix,
    pub boundary_check: DenseMatrix,
    pub t_check: DenseMatrix,
}

impl UnivariateMatrices {
    pub fn assemble(space: &StokesSpace, cpen: f64) -> Result<Self> {
        let n = space.n_basis();
        let m = space.m_basis();
        let rule = QuadratureRule::new(space.elements(), space.degree() + 1)?;
        let asm = |a, b, k| assemble_univariate(a, b, k, &rule);
        let stiffness_check = asm(m, m, UnivariateKind::StiffnessCheck)?;
        let nitsche_check = asm(m, m, UnivariateKind::NitscheCheck)?;
        let boundary_check = asm(m, m, UnivariateKind::BoundaryCheck)?;
        let t_check = build_t(
            &stiffness_check,
            &nitsche_check,
            &boundary_check,
            cpen,
            space.mesh_size(),
        )?;
        Ok(Self {
            mass: asm(n, n, UnivariateKind::Mass)?,
            stiffness: asm(n, n, UnivariateKind::Stiffness)?,
            coupling: asm(n, m, UnivariateKind::Coupling)?,
            mass_check: asm(m, m, UnivariateKind::MassCheck)?,
            stiffness_check,
            coupling_check: asm(n, m, UnivariateKind::CouplingCheck)?,
            nitsche_check,
            boundary_check,
            t_check,
        })
    }
}

/// Kronecker factors `[dir 3, dir 2, dir 1]` from a per-direction closure.
fn factors(mut f: impl FnMut(usize) -> DenseMatrix) -> Vec<DenseMatrix> {
    (0..DIM).rev().map(|dir| f(dir)).collect()
}

/// Diagonal block `A_cc / 2ν` as a generalized Kronecker sum: the stiffness
/// pair `(K, M)` along direction `c`, the Nitsche pair `(Ť, M̌)` elsewhere.
pub fn diagonal_block_sum(mats: &UnivariateMatrices, c: usize) -> Result<GeneralizedKronSum> {
    GeneralizedKronSum::new(
        (0..DIM)
            .map(|dir| {
                if dir == c {
                    (mats.stiffness.clone(), mats.mass.clone())
                } else {
                    (mats.t_check.clone(), mats.mass_check.clone())
                }
            })
            .collect(),
    )
}

/// Off-diagonal block `A_ij / 2ν` for `i ≠ j`, i.e. `½ ∫ ∂_j v_i ∂_i u_j`.
pub fn off_diagonal_block(mats: &UnivariateMatrices, i: usize, j: usize) -> Result<KroneckerOp> {
    assert!(i != j && i < DIM && j < DIM);
    KroneckerOp::new(factors(|dir| {
        if dir == i {
            mats.coupling.clone()
        } else if dir == j {
            mats.coupling.transpose()
        } else {
            mats.mass_check.scaled(0.5)
        }
    }))
}

/// Divergence block of component `c` (rows: component `c`, columns: pressure).
pub fn divergence_block(mats: &UnivariateMatrices, c: usize) -> Result<KroneckerOp> {
    KroneckerOp::new(factors(|dir| {
        if dir == c {
            mats.coupling_check.clone()
        } else {
            mats.mass_check.clone()
        }
    }))
}

/// Velocity block `A`, kept both as structured pieces and as an operator.
pub struct VelocityBlock {
    /// `A_cc` (already scaled by `2ν`).
    pub diagonal: Vec<GeneralizedKronSum>,
    pub operator: Arc<BlockOperator>,
}

pub fn assemble_a(space: &StokesSpace, mats: &UnivariateMatrices, nu: f64) -> Result<VelocityBlock> {
    if !(nu > 0.0) {
        return Err(Error::InvalidArgument(format!("viscosity must be positive (got {nu})")));
    }
    let scale = 2.0 * nu;
    let diagonal = (0..DIM)
        .map(|c| diagonal_block_sum(mats, c)?.scaled(scale))
        .collect::<Result<Vec<_>>>()?;
    let mut grid: Vec<Vec<Option<OpHandle>>> = vec![vec![None, None, None]; DIM];
    for i in 0..DIM {
        grid[i][i] = Some(Arc::new(diagonal[i].clone()));
        for j in i + 1..DIM {
            let mut op = off_diagonal_block(mats, i, j)?;
            // fold the 2ν factor into the mass factor
            let f = op.factors().to_vec();
            let k = DIM - 1 - (0..DIM).find(|d| *d != i && *d != j).unwrap();
            let mut f = f;
            f[k] = f[k].scaled(scale);
            op = KroneckerOp::new(f)?;
            grid[j][i] = Some(Arc::new(op.transpose()));
            grid[i][j] = Some(Arc::new(op));
        }
    }
    let sizes: Vec<usize> = (0..DIM).map(|c| space.component_len(c)).collect();
    let operator = Arc::new(BlockOperator::new(sizes.clone(), sizes, grid)?);
    Ok(VelocityBlock { diagonal, operator })
}

/// Divergence coupling: `B` (velocity × pressure) and `Bᵀ`.
pub fn assemble_b(space: &StokesSpace, mats: &UnivariateMatrices) -> Result<(Arc<BlockOperator>, Arc<BlockOperator>)> {
    let blocks = (0..DIM)
        .map(|c| divergence_block(mats, c))
        .collect::<Result<Vec<_>>>()?;
    let sizes: Vec<usize> = (0..DIM).map(|c| space.component_len(c)).collect();
    let b = BlockOperator::new(
        sizes.clone(),
        vec![space.n_q()],
        blocks
            .iter()
            .map(|k| vec![Some(Arc::new(k.clone()) as OpHandle)])
            .collect(),
    )?;
    let bt = BlockOperator::new(
        vec![space.n_q()],
        sizes,
        vec![blocks
            .iter()
            .map(|k| Some(Arc::new(k.transpose()) as OpHandle))
            .collect()],
    )?;
    Ok((Arc::new(b), Arc::new(bt)))
}

/// Lid of the cavity: the face `x_axis = 1` moving with a tangential velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lid {
    /// 0-based axis normal to the lid.
    pub axis: usize,
    pub velocity: [f64; DIM],
}

impl Default for Lid {
    fn default() -> Self {
        Self {
            axis: 2,
            velocity: [1.0, 0.0, 0.0],
        }
    }
}

impl Lid {
    /// Lid normal to `axis` moving with unit speed along `tangent`.
    pub fn unit(axis: usize, tangent: usize) -> Result<Self> {
        if axis >= DIM || tangent >= DIM || axis == tangent {
            return Err(Error::InvalidArgument(format!(
                "lid axis {axis} and tangent {tangent} must be distinct axes"
            )));
        }
        let mut velocity = [0.0; DIM];
        velocity[tangent] = 1.0;
        Ok(Self { axis, velocity })
    }
}

/// Nitsche data of the lid: `f_i = ∫_lid 2ν (α g·v_i - ((∇ˢv_i) n)·g)`.
pub fn assemble_rhs_lid(space: &StokesSpace, nu: f64, cpen: f64, lid: &Lid) -> Result<Vec<f64>> {
    if lid.axis >= DIM {
        return Err(Error::InvalidArgument(format!("lid axis {} out of range", lid.axis)));
    }
    if lid.velocity[lid.axis] != 0.0 {
        return Err(Error::InvalidArgument(
            "lid velocity must be tangential; normal data is imposed strongly".into(),
        ));
    }
    let alpha = cpen / space.mesh_size();
    let mut f = vec![0.0; space.n_v()];
    for c in 0..DIM {
        let g = lid.velocity[c];
        if c == lid.axis || g == 0.0 {
            // v_c vanishes on its own normal faces
            continue;
        }
        // per-direction vectors: trace term along the lid normal, integrals elsewhere
        let per_dir: Vec<Vec<f64>> = (0..DIM)
            .map(|dir| {
                let basis = space.velocity_basis(c, dir);
                if dir == lid.axis {
                    let v = basis.eval_dense(1.0, 0);
                    let d = basis.eval_dense(1.0, 1);
                    v.iter().zip(&d).map(|(v, d)| alpha * v - 0.5 * d).collect()
                } else {
                    basis.integrals()
                }
            })
            .collect();
        let dims = space.component_dims(c);
        let off = space.component_offset(c);
        let mut idx = off;
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    f[idx] = 2.0 * nu * g * per_dir[0][i] * per_dir[1][j] * per_dir[2][k];
                    idx += 1;
                }
            }
        }
    }
    Ok(f)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StokesParams {
    pub nu: f64,
    pub cpen: f64,
    pub lid: Lid,
}

/// The assembled lid-driven cavity saddle-point system.
pub struct StokesSystem {
    space: StokesSpace,
    params: StokesParams,
    mats: UnivariateMatrices,
    a: VelocityBlock,
    b: Arc<BlockOperator>,
    bt: Arc<BlockOperator>,
    saddle: Arc<BlockOperator>,
    rhs: Vec<f64>,
}

impl StokesSystem {
    pub fn new(space: StokesSpace, params: StokesParams) -> Result<Self> {
        let mats = UnivariateMatrices::assemble(&space, params.cpen)?;
        let a = assemble_a(&space, &mats, params.nu)?;
        let (b, bt) = assemble_b(&space, &mats)?;
        let rhs = assemble_rhs_lid(&space, params.nu, params.cpen, &params.lid)?;
        let saddle = Arc::new(BlockOperator::new(
            vec![space.n_v(), space.n_q()],
            vec![space.n_v(), space.n_q()],
            vec![
                vec![Some(a.operator.clone() as OpHandle), Some(b.clone() as OpHandle)],
                vec![Some(bt.clone() as OpHandle), None],
            ],
        )?);
        Ok(Self {
            space,
            params,
            mats,
            a,
            b,
            bt,
            saddle,
            rhs,
        })
    }

    pub fn space(&self) -> &StokesSpace {
        &self.space
    }

    pub fn params(&self) -> &StokesParams {
        &self.params
    }

    pub fn univariate(&self) -> &UnivariateMatrices {
        &self.mats
    }

    pub fn a(&self) -> OpHandle {
        self.a.operator.clone()
    }

    pub fn a_diagonal(&self, c: usize) -> &GeneralizedKronSum {
        &self.a.diagonal[c]
    }

    pub fn b(&self) -> OpHandle {
        self.b.clone()
    }

    pub fn bt(&self) -> OpHandle {
        self.bt.clone()
    }

    pub fn saddle(&self) -> OpHandle {
        self.saddle.clone()
    }

    /// `[f; 0]`.
    pub fn rhs(&self) -> Vec<f64> {
        let mut r = self.rhs.clone();
        r.resize(self.space.n_v() + self.space.n_q(), 0.0);
        r
    }

    pub fn velocity_rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn n_v(&self) -> usize {
        self.space.n_v()
    }

    pub fn n_q(&self) -> usize {
        self.space.n_q()
    }

    /// `(A u + B p, Bᵀ u)`.
    pub fn apply_saddle(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.saddle.apply(z)
    }

    /// `‖Bᵀu‖ / ‖u‖`.
    pub fn divergence_ratio(&self, u: &[f64]) -> Result<f64> {
        check_len("divergence_ratio", self.n_v(), u.len())?;
        let d = self.bt.apply(u)?;
        let nu = norm(u);
        Ok(if nu == 0.0 { 0.0 } else { norm(&d) / nu })
    }

    /// Physical pressure `-p` shifted to zero mean; returns `(pressure, shift)`.
    pub fn normalized_pressure(&self, p: &[f64]) -> Result<(Vec<f64>, f64)> {
        check_len("normalized_pressure", self.n_q(), p.len())?;
        // M-basis functions have unit integral, so the mean over the unit cube is Σ p_i.
        let mean: f64 = -p.iter().sum::<f64>();
        let ones = self.space.constant_pressure();
        let out = p.iter().zip(&ones).map(|(v, c)| -v - mean * c).collect();
        Ok((out, mean))
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

//! Univariate B-splines on uniform open knot vectors with maximal regularity,
//! their unit-integral (M-normalized) siblings, Gauss-Legendre quadrature and
//! the univariate matrices from which all Kronecker blocks are built.

use serde::{Deserialize, Serialize};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};

/// Open uniform knot vector on `[0, 1]` with `m` elements, degree `degree`,
/// ends repeated `degree + 1` times and simple interior knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotVector {
    degree: usize,
    elements: usize,
    knots: Vec<f64>,
}

impl KnotVector {
    pub fn uniform(elements: usize, degree: usize) -> Result<Self> {
        if elements < 1 {
            return Err(Error::InvalidArgument("knot vector needs m >= 1 elements".into()));
        }
        let mut knots = vec![0.0; degree + 1];
        knots.extend((1..elements).map(|j| j as f64 / elements as f64));
        knots.extend(std::iter::repeat(1.0).take(degree + 1));
        Ok(Self {
            degree,
            elements,
            knots,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn elements(&self) -> usize {
        self.elements
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Number of basis functions, `m + degree`.
    pub fn num_functions(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    pub fn breakpoint(&self, j: usize) -> f64 {
        j as f64 / self.elements as f64
    }

    /// Knot span index `s` with `t_s <= x < t_{s+1}` (last span for `x = 1`).
    pub fn span(&self, x: f64) -> usize {
        let n = self.num_functions();
        let t = &self.knots;
        if x >= t[n] {
            return n - 1;
        }
        if x <= t[self.degree] {
            return self.degree;
        }
        // largest s in [degree, n-1] with t[s] <= x
        let (mut lo, mut hi) = (self.degree, n);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if t[mid] <= x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Cox-de Boor: the `q + 1` nonzero degree-`q` B-splines at `x` in span `s`,
    /// i.e. functions `s - q, ..., s` on this knot vector.
    fn basis_funs(&self, q: usize, s: usize, x: f64) -> Vec<f64> {
        let t = &self.knots;
        let mut n = vec![0.0; q + 1];
        let mut left = vec![0.0; q + 1];
        let mut right = vec![0.0; q + 1];
        n[0] = 1.0;
        for j in 1..=q {
            left[j] = x - t[s + 1 - j];
            right[j] = t[s + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = n[r] / (right[r + 1] + left[j - r]);
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        n
    }

    /// Values (`order = 0`) or first derivatives (`order = 1`) of the
    /// `degree + 1` functions active in span `s`.
    fn eval_span(&self, s: usize, x: f64, order: usize) -> Vec<f64> {
        let p = self.degree;
        match order {
            0 => self.basis_funs(p, s, x),
            _ if p == 0 => vec![0.0],
            _ => {
                let t = &self.knots;
                let lower = self.basis_funs(p - 1, s, x);
                let pf = p as f64;
                (0..=p)
                    .map(|j| {
                        let i = s - p + j;
                        let mut v = 0.0;
                        if j >= 1 {
                            v += pf / (t[i + p] - t[i]) * lower[j - 1];
                        }
                        if j < p {
                            v -= pf / (t[i + p + 1] - t[i + 1]) * lower[j];
                        }
                        v
                    })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BasisKind {
    /// Standard B-splines of the parent degree `p`.
    N,
    /// Unit-integral B-splines of degree `p - 1`.
    M,
}

/// Gauss-Legendre rule replicated on every element of a uniform mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    elements: usize,
    ref_points: Vec<f64>,
    ref_weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn new(elements: usize, points_per_element: usize) -> Result<Self> {
        if elements < 1 || points_per_element < 1 {
            return Err(Error::InvalidArgument(
                "quadrature needs at least one element and one point".into(),
            ));
        }
        let (ref_points, ref_weights) = gauss_legendre(points_per_element);
        Ok(Self {
            elements,
            ref_points,
            ref_weights,
        })
    }

    pub fn points_per_element(&self) -> usize {
        self.ref_points.len()
    }

    pub fn elements(&self) -> usize {
        self.elements
    }

    /// Physical `(x, w)` pairs of element `e` on `[e/m, (e+1)/m]`.
    pub fn element_points(&self, e: usize) -> impl Iterator<Item = (f64, f64)> + '_ {
        let h = 1.0 / self.elements as f64;
        let a = e as f64 * h;
        self.ref_points
            .iter()
            .zip(&self.ref_weights)
            .map(move |(&xi, &w)| (a + 0.5 * h * (xi + 1.0), 0.5 * h * w))
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.elements).flat_map(move |e| self.element_points(e))
    }
}

/// Nodes and weights of the `q`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(q: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; q];
    let mut w = vec![0.0; q];
    let n = q as f64;
    for i in 0..q.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence for P_q(z) and its derivative
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=q {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[q - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[q - 1 - i] = wi;
    }
    (x, w)
}

/// Values of the active functions of a basis at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveValues {
    /// Index of the first active function (in the basis' own numbering).
    pub first: usize,
    pub values: Vec<f64>,
}

impl ActiveValues {
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(k, &v)| (self.first + k, v))
    }
}

/// A univariate spline basis: the N-basis of degree `p`, or the M-basis of
/// degree `p - 1`, optionally with the first and last function removed.
#[derive(Debug, Clone, PartialEq)]
pub struct UnivariateBasis {
    parent_degree: usize,
    kind: BasisKind,
    restricted: bool,
    knots: KnotVector,
    /// Per-function multiplier (`1 / ∫N_{i,p-1}` for the M-basis).
    scale: Vec<f64>,
}

impl UnivariateBasis {
    /// `n = m + p` functions for the N-basis, `m + p - 1` for the M-basis,
    /// two fewer when `restrict_boundary` is set.
    pub fn new(m: usize, p: usize, kind: BasisKind, restrict_boundary: bool) -> Result<Self> {
        if m < 1 || p < 1 {
            return Err(Error::InvalidArgument(format!(
                "basis needs m >= 1 and p >= 1 (got m = {m}, p = {p})"
            )));
        }
        let degree = match kind {
            BasisKind::N => p,
            BasisKind::M => p - 1,
        };
        let knots = KnotVector::uniform(m, degree)?;
        let n = knots.num_functions();
        if restrict_boundary && n < 3 {
            return Err(Error::InvalidArgument(format!(
                "restricting the boundary of a {n}-function basis leaves it empty"
            )));
        }
        let mut basis = Self {
            parent_degree: p,
            kind,
            restricted: false,
            knots,
            scale: vec![1.0; n],
        };
        if kind == BasisKind::M {
            let rule = QuadratureRule::new(m, degree + 1)?;
            let mut integrals = vec![0.0; n];
            for (x, w) in rule.points() {
                for (i, v) in basis.eval(x, 0).iter() {
                    integrals[i] += w * v;
                }
            }
            basis.scale = integrals.iter().map(|v| 1.0 / v).collect();
        }
        basis.restricted = restrict_boundary;
        Ok(basis)
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn parent_degree(&self) -> usize {
        self.parent_degree
    }

    /// Polynomial degree of the functions themselves.
    pub fn degree(&self) -> usize {
        self.knots.degree()
    }

    pub fn elements(&self) -> usize {
        self.knots.elements()
    }

    pub fn is_restricted(&self) -> bool {
        self.restricted
    }

    pub fn knots(&self) -> &KnotVector {
        &self.knots
    }

    pub fn len(&self) -> usize {
        let n = self.knots.num_functions();
        if self.restricted {
            n - 2
        } else {
            n
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Values (`order = 0`) or first derivatives (`order = 1`) of the active
    /// functions at `x ∈ [0, 1]`.
    pub fn eval(&self, x: f64, order: usize) -> ActiveValues {
        let x = x.clamp(0.0, 1.0);
        let q = self.knots.degree();
        let s = self.knots.span(x);
        let raw = self.knots.eval_span(s, x, order);
        let first_full = s - q;
        let n = self.knots.num_functions();
        let mut values: Vec<f64> = raw
            .iter()
            .enumerate()
            .map(|(j, v)| v * self.scale[first_full + j])
            .collect();
        if !self.restricted {
            return ActiveValues {
                first: first_full,
                values,
            };
        }
        if first_full + values.len() == n {
            values.pop();
        }
        if first_full == 0 {
            values.remove(0);
            ActiveValues { first: 0, values }
        } else {
            ActiveValues {
                first: first_full - 1,
                values,
            }
        }
    }

    /// All function values (or derivatives) at `x` as a dense vector.
    pub fn eval_dense(&self, x: f64, order: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (i, v) in self.eval(x, order).iter() {
            out[i] = v;
        }
        out
    }

    /// Coefficients of the constant function 1 in this (unrestricted) basis.
    pub fn constant_coefficients(&self) -> Vec<f64> {
        let c: Vec<f64> = self.scale.iter().map(|s| 1.0 / s).collect();
        if self.restricted {
            c[1..c.len() - 1].to_vec()
        } else {
            c
        }
    }

    /// Integral of every basis function over `[0, 1]`.
    pub fn integrals(&self) -> Vec<f64> {
        let rule = QuadratureRule::new(self.elements(), self.degree() + 1)
            .expect("valid quadrature");
        let mut out = vec![0.0; self.len()];
        for (x, w) in rule.points() {
            for (i, v) in self.eval(x, 0).iter() {
                out[i] += w * v;
            }
        }
        out
    }
}

/// The univariate integrals and boundary evaluations used by the Kronecker
/// blocks. `N` is the degree-`p` basis, `M` the unit-integral degree-`p - 1`
/// basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UnivariateKind {
    /// `∫ N_i N_j`
    Mass,
    /// `∫ N_i' N_j'`
    Stiffness,
    /// `∫ N_i M_j'`
    Coupling,
    /// `∫ M_i M_j`
    MassCheck,
    /// `∫ M_i' M_j'`
    StiffnessCheck,
    /// `∫ N_i' M_j`
    CouplingCheck,
    /// `M_i(1) M_j(1) + M_i(0) M_j(0)`
    NitscheCheck,
    /// `M_i(1) M_j'(1) - M_i(0) M_j'(0)`
    BoundaryCheck,
}

impl UnivariateKind {
    fn signature(self) -> (BasisKind, BasisKind, usize, usize) {
        use BasisKind::{M, N};
        match self {
            Self::Mass => (N, N, 0, 0),
            Self::Stiffness => (N, N, 1, 1),
            Self::Coupling => (N, M, 0, 1),
            Self::MassCheck => (M, M, 0, 0),
            Self::StiffnessCheck => (M, M, 1, 1),
            Self::CouplingCheck => (N, M, 1, 0),
            Self::NitscheCheck => (M, M, 0, 0),
            Self::BoundaryCheck => (M, M, 0, 1),
        }
    }
}

/// Assembles one univariate matrix with rows indexed by `test` and columns by
/// `trial`.
pub fn assemble_univariate(
    test: &UnivariateBasis,
    trial: &UnivariateBasis,
    kind: UnivariateKind,
    rule: &QuadratureRule,
) -> Result<DenseMatrix> {
    let (test_kind, trial_kind, test_order, trial_order) = kind.signature();
    if test.kind() != test_kind || trial.kind() != trial_kind {
        return Err(Error::InvalidArgument(format!(
            "{kind:?} expects ({test_kind:?}, {trial_kind:?}) bases, got ({:?}, {:?})",
            test.kind(),
            trial.kind()
        )));
    }
    if test.elements() != trial.elements() {
        return Err(Error::InvalidArgument(
            "test and trial bases live on different meshes".into(),
        ));
    }
    let mut out = DenseMatrix::zeros(test.len(), trial.len());

    match kind {
        UnivariateKind::NitscheCheck | UnivariateKind::BoundaryCheck => {
            let sign = |x: f64| if x == 0.0 { -1.0 } else { 1.0 };
            for x in [0.0, 1.0] {
                let s = match kind {
                    UnivariateKind::NitscheCheck => 1.0,
                    _ => sign(x),
                };
                let a = test.eval(x, test_order);
                let b = trial.eval(x, trial_order);
                for (i, vi) in a.iter() {
                    for (j, vj) in b.iter() {
                        out[(i, j)] += s * vi * vj;
                    }
                }
            }
        }
        _ => {
            if rule.elements() != test.elements() {
                return Err(Error::InvalidArgument(
                    "quadrature rule and bases live on different meshes".into(),
                ));
            }
            let deg = test.degree().saturating_sub(test_order)
                + trial.degree().saturating_sub(trial_order);
            let required = (deg + 2) / 2;
            if rule.points_per_element() < required {
                return Err(Error::QuadratureTooLow {
                    required,
                    got: rule.points_per_element(),
                });
            }
            for (x, w) in rule.points() {
                let a = test.eval(x, test_order);
                let b = trial.eval(x, trial_order);
                for (i, vi) in a.iter() {
                    for (j, vj) in b.iter() {
                        out[(i, j)] += w * vi * vj;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// `Ť = ½ (Ǩ + (2 C_pen / h) Ň - B̌ - B̌ᵀ)`, checked for positive definiteness.
pub fn build_t(
    k_check: &DenseMatrix,
    n_check: &DenseMatrix,
    b_check: &DenseMatrix,
    cpen: f64,
    h: f64,
) -> Result<DenseMatrix> {
    if !(cpen > 0.0) || !(h > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "penalty constant and mesh size must be positive (C_pen = {cpen}, h = {h})"
        )));
    }
    let t = k_check
        .add_scaled(n_check, 2.0 * cpen / h)?
        .add_scaled(b_check, -1.0)?
        .add_scaled(&b_check.transpose(), -1.0)?
        .scaled(0.5)
        .symmetrized();
    if t.cholesky().is_err() {
        return Err(Error::PenaltyTooSmall { cpen });
    }
    Ok(t)
}

/// Default Nitsche penalty `5 (p̌ + 1)` with `p̌ = p - 1` the M-basis degree.
pub fn default_penalty(p: usize) -> f64 {
    5.0 * p as f64
}

/// The `(n-1) × n` coefficient difference matrix with rows `(-1, 1)`.
pub fn difference_matrix(n: usize) -> Result<DenseMatrix> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "difference matrix needs n >= 2 (got {n})"
        )));
    }
    let mut d = DenseMatrix::zeros(n - 1, n);
    for i in 0..n - 1 {
        d[(i, i)] = -1.0;
        d[(i, i + 1)] = 1.0;
    }
    Ok(d)
}

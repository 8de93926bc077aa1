//! Brute-force Galerkin assembly of the Stokes forms by 3D volume and 2D face
//! quadrature over explicitly evaluated vector-valued basis functions.
//!
//! Splines are evaluated with a naive recursive Cox-de Boor formula that shares
//! no code with the library, so this serves as an independent oracle for the
//! Kronecker-factored assembly.

#![allow(dead_code)]

use hyperpower::spline::gauss_legendre;

/// Open uniform knot vector of degree `p` with `m` elements.
pub fn knots(m: usize, p: usize) -> Vec<f64> {
    let mut t = vec![0.0; p];
    t.extend((0..=m).map(|j| j as f64 / m as f64));
    t.extend(std::iter::repeat(1.0).take(p));
    t
}

/// Cox-de Boor recursion with the right end point included in the last span.
pub fn bspline(t: &[f64], i: usize, p: usize, x: f64) -> f64 {
    if p == 0 {
        let last = t[t.len() - 1];
        let inside = t[i] <= x && x < t[i + 1];
        let at_end = x == last && t[i] < t[i + 1] && t[i + 1] == last;
        return if inside || at_end { 1.0 } else { 0.0 };
    }
    let mut v = 0.0;
    if t[i + p] > t[i] {
        v += (x - t[i]) / (t[i + p] - t[i]) * bspline(t, i, p - 1, x);
    }
    if t[i + p + 1] > t[i + 1] {
        v += (t[i + p + 1] - x) / (t[i + p + 1] - t[i + 1]) * bspline(t, i + 1, p - 1, x);
    }
    v
}

pub fn bspline_deriv(t: &[f64], i: usize, p: usize, x: f64) -> f64 {
    if p == 0 {
        return 0.0;
    }
    let mut v = 0.0;
    if t[i + p] > t[i] {
        v += p as f64 / (t[i + p] - t[i]) * bspline(t, i, p - 1, x);
    }
    if t[i + p + 1] > t[i + 1] {
        v -= p as f64 / (t[i + p + 1] - t[i + 1]) * bspline(t, i + 1, p - 1, x);
    }
    v
}

/// A univariate family: value and derivative of every function at `x`.
#[derive(Clone)]
pub struct Family {
    t: Vec<f64>,
    degree: usize,
    first: usize,
    count: usize,
    /// closed-form unit-integral scaling `deg+1 / (t_{i+deg+1} - t_i)` for M-splines
    unit_integral: bool,
}

impl Family {
    /// Degree-`p` B-splines without their first and last member.
    pub fn n_restricted(m: usize, p: usize) -> Self {
        Self {
            t: knots(m, p),
            degree: p,
            first: 1,
            count: m + p - 2,
            unit_integral: false,
        }
    }

    /// Degree-`(p-1)` splines normalized to unit integral.
    pub fn m_spline(m: usize, p: usize) -> Self {
        Self {
            t: knots(m, p - 1),
            degree: p - 1,
            first: 0,
            count: m + p - 1,
            unit_integral: true,
        }
    }

    pub fn len(&self) -> usize {
        self.count
    }

    fn scale(&self, i: usize) -> f64 {
        if self.unit_integral {
            (self.degree + 1) as f64 / (self.t[i + self.degree + 1] - self.t[i])
        } else {
            1.0
        }
    }

    pub fn value(&self, k: usize, x: f64) -> f64 {
        let i = k + self.first;
        self.scale(i) * bspline(&self.t, i, self.degree, x)
    }

    pub fn deriv(&self, k: usize, x: f64) -> f64 {
        let i = k + self.first;
        self.scale(i) * bspline_deriv(&self.t, i, self.degree, x)
    }
}

/// Value and full gradient `grad[a][b] = ∂_b v_a` of one velocity basis function.
#[derive(Clone, Copy)]
pub struct FieldSample {
    pub value: [f64; 3],
    pub grad: [[f64; 3]; 3],
}

pub struct Oracle {
    pub m: usize,
    pub p: usize,
    n: Family,
    mm: Family,
    /// (component, per-direction indices) in library ordering
    velocity: Vec<(usize, [usize; 3])>,
    pressure: Vec<[usize; 3]>,
}

impl Oracle {
    pub fn new(m: usize, p: usize) -> Self {
        let n = Family::n_restricted(m, p);
        let mm = Family::m_spline(m, p);
        let mut velocity = Vec::new();
        for c in 0..3 {
            let dims: [usize; 3] = std::array::from_fn(|d| if d == c { n.len() } else { mm.len() });
            for k in 0..dims[2] {
                for j in 0..dims[1] {
                    for i in 0..dims[0] {
                        velocity.push((c, [i, j, k]));
                    }
                }
            }
        }
        let nm = mm.len();
        let mut pressure = Vec::new();
        for k in 0..nm {
            for j in 0..nm {
                for i in 0..nm {
                    pressure.push([i, j, k]);
                }
            }
        }
        Self {
            m,
            p,
            n,
            mm,
            velocity,
            pressure,
        }
    }

    pub fn n_v(&self) -> usize {
        self.velocity.len()
    }

    pub fn n_q(&self) -> usize {
        self.pressure.len()
    }

    fn family(&self, c: usize, dir: usize) -> &Family {
        if c == dir {
            &self.n
        } else {
            &self.mm
        }
    }

    pub fn velocity_sample(&self, idx: usize, x: [f64; 3]) -> FieldSample {
        let (c, ijk) = self.velocity[idx];
        let vals: [f64; 3] = std::array::from_fn(|d| self.family(c, d).value(ijk[d], x[d]));
        let ders: [f64; 3] = std::array::from_fn(|d| self.family(c, d).deriv(ijk[d], x[d]));
        let mut s = FieldSample {
            value: [0.0; 3],
            grad: [[0.0; 3]; 3],
        };
        s.value[c] = vals[0] * vals[1] * vals[2];
        for b in 0..3 {
            let mut g = ders[b];
            for d in 0..3 {
                if d != b {
                    g *= vals[d];
                }
            }
            s.grad[c][b] = g;
        }
        s
    }

    pub fn pressure_value(&self, idx: usize, x: [f64; 3]) -> f64 {
        let ijk = self.pressure[idx];
        (0..3).map(|d| self.mm.value(ijk[d], x[d])).product()
    }

    /// Composite Gauss rule on `[0,1]` with `q` points per element.
    fn rule_1d(&self, q: usize) -> Vec<(f64, f64)> {
        let (xs, ws) = gauss_legendre(q);
        let h = 1.0 / self.m as f64;
        let mut out = Vec::new();
        for e in 0..self.m {
            for (x, w) in xs.iter().zip(&ws) {
                out.push((h * (e as f64 + 0.5 * (x + 1.0)), 0.5 * h * w));
            }
        }
        out
    }

    fn volume_points(&self) -> Vec<([f64; 3], f64)> {
        let r = self.rule_1d(self.p + 2);
        let mut out = Vec::new();
        for &(z, wz) in &r {
            for &(y, wy) in &r {
                for &(x, wx) in &r {
                    out.push(([x, y, z], wx * wy * wz));
                }
            }
        }
        out
    }

    /// Face points with outward normals over all six faces (or only `only`).
    fn face_points(&self, only: Option<(usize, usize)>) -> Vec<([f64; 3], f64, [f64; 3])> {
        let r = self.rule_1d(self.p + 2);
        let mut out = Vec::new();
        for axis in 0..3 {
            for side in 0..2 {
                if let Some(f) = only {
                    if f != (axis, side) {
                        continue;
                    }
                }
                let (a, b) = ((axis + 1) % 3, (axis + 2) % 3);
                let mut n = [0.0; 3];
                n[axis] = if side == 1 { 1.0 } else { -1.0 };
                for &(s, ws) in &r {
                    for &(t, wt) in &r {
                        let mut x = [0.0; 3];
                        x[axis] = side as f64;
                        x[a] = s;
                        x[b] = t;
                        out.push((x, ws * wt, n));
                    }
                }
            }
        }
        out
    }

    fn sym(g: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
        std::array::from_fn(|a| std::array::from_fn(|b| 0.5 * (g[a][b] + g[b][a])))
    }

    /// Row-major dense `a(u, v) + σ(u, v)` with rows indexing test functions.
    pub fn velocity_matrix(&self, nu: f64, cpen: f64) -> Vec<Vec<f64>> {
        let nv = self.n_v();
        let alpha = cpen * self.m as f64;
        let mut a = vec![vec![0.0; nv]; nv];
        for (x, w) in self.volume_points() {
            let s: Vec<_> = (0..nv).map(|i| self.velocity_sample(i, x)).collect();
            let e: Vec<_> = s.iter().map(|f| Self::sym(&f.grad)).collect();
            for i in 0..nv {
                for j in 0..nv {
                    let mut v = 0.0;
                    for r in 0..3 {
                        for c in 0..3 {
                            v += e[i][r][c] * e[j][r][c];
                        }
                    }
                    a[i][j] += 2.0 * nu * w * v;
                }
            }
        }
        for (x, w, n) in self.face_points(None) {
            let s: Vec<_> = (0..nv).map(|i| self.velocity_sample(i, x)).collect();
            let tr: Vec<[f64; 3]> = s
                .iter()
                .map(|f| {
                    let e = Self::sym(&f.grad);
                    std::array::from_fn(|r| (0..3).map(|c| e[r][c] * n[c]).sum())
                })
                .collect();
            for i in 0..nv {
                for j in 0..nv {
                    let dot = |a: &[f64; 3], b: &[f64; 3]| -> f64 { (0..3).map(|k| a[k] * b[k]).sum() };
                    let v = alpha * dot(&s[j].value, &s[i].value)
                        - dot(&tr[j], &s[i].value)
                        - dot(&tr[i], &s[j].value);
                    a[i][j] += 2.0 * nu * w * v;
                }
            }
        }
        a
    }

    /// Dense `∫ (∇·v_i) q_j` (velocity rows, pressure columns).
    pub fn divergence_matrix(&self) -> Vec<Vec<f64>> {
        let (nv, nq) = (self.n_v(), self.n_q());
        let mut b = vec![vec![0.0; nq]; nv];
        for (x, w) in self.volume_points() {
            let q: Vec<f64> = (0..nq).map(|j| self.pressure_value(j, x)).collect();
            for i in 0..nv {
                let g = self.velocity_sample(i, x).grad;
                let div = g[0][0] + g[1][1] + g[2][2];
                if div == 0.0 {
                    continue;
                }
                for j in 0..nq {
                    b[i][j] += w * div * q[j];
                }
            }
        }
        b
    }

    /// `∫_lid 2ν (α g·v_i − ((∇ˢv_i) n)·g)` on the face `x_axis = 1`.
    pub fn lid_rhs(&self, nu: f64, cpen: f64, axis: usize, g: [f64; 3]) -> Vec<f64> {
        let nv = self.n_v();
        let alpha = cpen * self.m as f64;
        let mut f = vec![0.0; nv];
        for (x, w, n) in self.face_points(Some((axis, 1))) {
            for i in 0..nv {
                let s = self.velocity_sample(i, x);
                let e = Self::sym(&s.grad);
                let mut v = 0.0;
                for r in 0..3 {
                    v += alpha * g[r] * s.value[r];
                    v -= g[r] * (0..3).map(|c| e[r][c] * n[c]).sum::<f64>();
                }
                f[i] += 2.0 * nu * w * v;
            }
        }
        f
    }
}

mod common;

use std::sync::Arc;

use common::{dot, norm, random_vec, rng};
use hyperpower::operator::{BlockOperator, Counted, DenseOp, LinearOperator, OpHandle};
use hyperpower::precond::{
    check_initial, hyperpower_sequence, hyperpower_step, make_pq0, make_pv0, neumann_apply, schur_approximation,
    sequence_q_exact, sequence_q_fixed, sequence_q_hat, sequence_v, BlockPreconditioner, CostModel, SchurMode,
};
use hyperpower::spectral::materialize;
use hyperpower::stokes::{Lid, StokesParams, StokesSpace, StokesSystem};
use hyperpower::DenseMatrix;
use rand_chacha::ChaCha8Rng;

fn system(m: usize, p: usize, nu: f64) -> StokesSystem {
    StokesSystem::new(
        StokesSpace::new(m, p).unwrap(),
        StokesParams {
            nu,
            cpen: 10.0,
            lid: Lid::default(),
        },
    )
    .unwrap()
}

fn random_spd(r: &mut ChaCha8Rng, n: usize, shift: f64) -> DenseMatrix {
    let g = DenseMatrix::from_vec(n, n, random_vec(r, n * n)).unwrap();
    g.transpose()
        .matmul(&g)
        .unwrap()
        .add_scaled(&DenseMatrix::identity(n), shift)
        .unwrap()
}

/// An SPD `Ã` and the scaled inverse of its diagonal, which has ρ(I − XÃ) < 1.
fn jacobi_pair(r: &mut ChaCha8Rng, n: usize) -> (OpHandle, OpHandle, DenseMatrix) {
    let a = random_spd(r, n, n as f64);
    let diag: Vec<f64> = (0..n).map(|i| 1.0 / a[(i, i)]).collect();
    let x = DenseMatrix::from_diagonal(&diag);
    let lmax = x.matmul(&a).unwrap().symmetrized().symmetric_eigen().unwrap().max();
    let x = x.scaled(1.0 / lmax);
    (Arc::new(DenseOp(x.clone())), Arc::new(DenseOp(a.clone())), a)
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&d) / norm(b)
}

#[test]
fn fixed_point_of_the_step() {
    let mut r = rng(1);
    let a = random_spd(&mut r, 3, 1.0);
    let inv = a.cholesky().unwrap().inverse();
    let x: OpHandle = Arc::new(DenseOp(inv));
    let step = hyperpower_step(x.clone(), Arc::new(DenseOp(a))).unwrap();
    let v = random_vec(&mut r, 3);
    assert!(rel(&step.apply(&v).unwrap(), &x.apply(&v).unwrap()) < 1e-13);
}

#[test]
fn schulz_iteration_converges_to_inverse() {
    let mut r = rng(2);
    let (x0, a_op, a) = jacobi_pair(&mut r, 5);
    let seq = hyperpower_sequence(x0, a_op, 8).unwrap();
    let approx = materialize(&*seq[8]).unwrap();
    let inv = a.cholesky().unwrap().inverse();
    assert!(approx.max_abs_diff(&inv) <= 1e-10 * inv.max_abs());
}

#[test]
fn neumann_series_equals_hyperpower_levels() {
    let mut r = rng(3);
    let (x0, a_op, _) = jacobi_pair(&mut r, 6);
    let seq = hyperpower_sequence(x0.clone(), a_op.clone(), 4).unwrap();
    for k in 1..=4 {
        for _ in 0..5 {
            let v = random_vec(&mut r, 6);
            let h = seq[k].apply(&v).unwrap();
            let n = neumann_apply(&*x0, &*a_op, 1 << k, &v).unwrap();
            assert!(rel(&h, &n) <= 1e-12, "k={k}");
        }
    }
}

#[test]
fn apply_counts_follow_powers_of_two() {
    let mut r = rng(4);
    let (x0, a_op, _) = jacobi_pair(&mut r, 4);
    let cx = Counted::new(x0);
    let ca = Counted::new(a_op);
    for k in 0..=4usize {
        let seq = hyperpower_sequence(cx.clone(), ca.clone(), k).unwrap();
        cx.reset();
        ca.reset();
        seq[k].apply(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(cx.applies(), 1 << k);
        assert_eq!(ca.applies(), (1 << k) - 1);
    }
}

#[test]
fn pv0_inverts_the_diagonal_blocks() {
    let sys = system(3, 3, 1.0);
    let pv0 = make_pv0(&sys).unwrap();
    let diag = BlockOperator::diagonal((0..3).map(|c| Arc::new(sys.a_diagonal(c).clone()) as OpHandle).collect())
        .unwrap();
    let mut r = rng(5);
    let v = random_vec(&mut r, sys.n_v());
    assert!(rel(&pv0.apply(&diag.apply(&v).unwrap()).unwrap(), &v) <= 1e-10);
    assert!(pv0.apply(&vec![0.0; sys.n_v()]).unwrap().iter().all(|&x| x == 0.0));
}

#[test]
fn pq0_matches_dense_kronecker_inverse_and_scales_with_nu() {
    let sys = system(2, 4, 1.0);
    let pq0 = make_pq0(&sys).unwrap();
    let mc = &sys.univariate().mass_check;
    let mass3 = mc.kron(mc).kron(mc);
    let dense = materialize(&*pq0).unwrap();
    let expect = mass3.cholesky().unwrap().inverse().scaled(2.0);
    assert!(dense.max_abs_diff(&expect) <= 1e-12 * expect.max_abs());

    let c = sys.space().constant_pressure();
    let back = mass3.scaled(0.5).matvec(&pq0.apply(&c).unwrap()).unwrap();
    assert!(rel(&back, &c) <= 1e-12);

    let sys2 = system(2, 4, 2.0);
    let v = random_vec(&mut rng(6), sys.n_q());
    let y1 = pq0.apply(&v).unwrap();
    let y2 = make_pq0(&sys2).unwrap().apply(&v).unwrap();
    assert!(y1.iter().zip(&y2).all(|(a, b)| *b == 2.0 * a));
}

#[test]
fn hat_and_fixed_schur_sequences_agree_through_level_one() {
    let sys = system(2, 3, 1.0);
    let seq_v = sequence_v(&sys, 2).unwrap();
    let hat = sequence_q_hat(&sys, &seq_v, 2).unwrap();
    let fixed = sequence_q_fixed(&sys, seq_v[0].clone(), 2).unwrap();
    let mut r = rng(7);
    for _ in 0..5 {
        let v = random_vec(&mut r, sys.n_q());
        for k in 0..=1 {
            assert!(rel(&hat[k].apply(&v).unwrap(), &fixed[k].apply(&v).unwrap()) <= 1e-13);
        }
        assert!(hat[0].apply(&vec![0.0; sys.n_q()]).unwrap().iter().all(|&x| x == 0.0));
    }
    let exact = sequence_q_exact(&sys, 1).unwrap();
    let v = random_vec(&mut r, sys.n_q());
    assert_eq!(exact[0].apply(&v).unwrap(), make_pq0(&sys).unwrap().apply(&v).unwrap());
}

#[test]
fn preconditioners_are_linear_and_symmetric() {
    let sys = system(2, 3, 1.0);
    let mut r = rng(8);
    for mode in [SchurMode::Hat, SchurMode::Fixed, SchurMode::Exact] {
        for k in [0, 1, 3] {
            let pc = BlockPreconditioner::build(&sys, k, mode).unwrap();
            let n = sys.n_v() + sys.n_q();
            let (u, v) = (random_vec(&mut r, n), random_vec(&mut r, n));
            let (pu, pv) = (pc.operator.apply(&u).unwrap(), pc.operator.apply(&v).unwrap());
            let lhs = dot(&pu, &v);
            let rhs = dot(&u, &pv);
            assert!((lhs - rhs).abs() <= 1e-11 * lhs.abs().max(rhs.abs()), "{mode} k={k}");
            let w: Vec<f64> = u.iter().zip(&v).map(|(a, b)| 2.5 * a - b).collect();
            let pw = pc.operator.apply(&w).unwrap();
            let combo: Vec<f64> = pu.iter().zip(&pv).map(|(a, b)| 2.5 * a - b).collect();
            assert!(rel(&pw, &combo) <= 1e-12);
        }
    }
}

#[test]
fn exact_schur_sequence_is_guarded() {
    let sys = system(10, 4, 1.0);
    assert!(sys.n_v() > 5000);
    assert!(sequence_q_exact(&sys, 1).is_err());
}

#[test]
fn measured_cost_ratios_follow_the_model() {
    let sys = system(4, 3, 1.0);
    let model = CostModel::measured(&sys).unwrap();
    let seq = sequence_v(&sys, 2).unwrap();
    let c0 = seq[0].flops() as f64;
    assert_eq!(c0, model.c_p);
    assert_eq!(seq[1].flops() as f64 / c0, 2.0 + model.c_a / model.c_p);
    assert_eq!(seq[2].flops() as f64 / c0, 4.0 + 3.0 * model.c_a / model.c_p);
    assert_eq!(seq[2].flops() as f64, model.cost(2));
}

#[test]
fn lanczos_estimates_of_initial_spectra() {
    let sys = system(2, 4, 1.0);
    let pv0: OpHandle = make_pv0(&sys).unwrap();
    let (lo, hi) = check_initial(&pv0, &sys.a(), "test", None).unwrap();
    assert!(lo > 0.0 && hi < 2.0);
    assert!((lo - 0.7101).abs() < 0.02 && (hi - 1.4404).abs() < 0.02, "{lo} {hi}");

    // the Schur approximation has the constant pressure in its kernel
    let at = schur_approximation(&sys, pv0).unwrap();
    let c = sys.space().constant_pressure();
    let (lo, hi) = check_initial(&make_pq0(&sys).unwrap(), &at, "schur", Some(&c)).unwrap();
    assert!(lo > 0.05 && hi < 2.0, "{lo} {hi}");
}

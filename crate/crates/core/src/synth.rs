//! Synthetic system generators.
//!
//! Random matrices with the structural constraints of this domain (unitary,
//! Bogoliubov, orthogonal-symplectic, random physically-realizable parameter
//! sets). Used heavily by the test suites and handy for benchmarking.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{C64, CMat, RMat};
use crate::model::PhysicalParams;

pub fn random_cmat<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

pub fn random_rmat<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> RMat {
    RMat::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Haar-ish random unitary via QR of a complex Gaussian matrix.
pub fn random_unitary<R: Rng>(n: usize, rng: &mut R) -> CMat {
    let g = random_cmat(n, n, rng);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    // normalize column phases so the factorization is unique
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

pub fn random_hermitian<R: Rng>(n: usize, rng: &mut R) -> CMat {
    let g = random_cmat(n, n, rng);
    (&g + g.adjoint()) * C64::new(0.5, 0.0)
}

pub fn random_complex_symmetric<R: Rng>(n: usize, rng: &mut R) -> CMat {
    let g = random_cmat(n, n, rng);
    (&g + g.transpose()) * C64::new(0.5, 0.0)
}

/// Random Bogoliubov matrix: product of a passive unitary block Δ(U,0) and a
/// one-parameter squeeze on each mode.
pub fn random_bogoliubov<R: Rng>(k: usize, rng: &mut R) -> CMat {
    let u = random_unitary(k, rng);
    let mut du = CMat::zeros(2 * k, 2 * k);
    du.view_mut((0, 0), (k, k)).copy_from(&u);
    du.view_mut((k, k), (k, k)).copy_from(&u.map(|z| z.conj()));
    let mut sq = CMat::identity(2 * k, 2 * k);
    for i in 0..k {
        let r: f64 = rng.gen_range(-0.6..0.6);
        sq[(i, i)] = C64::new(r.cosh(), 0.0);
        sq[(i, k + i)] = C64::new(r.sinh(), 0.0);
        sq[(k + i, i)] = C64::new(r.sinh(), 0.0);
        sq[(k + i, k + i)] = C64::new(r.cosh(), 0.0);
    }
    du * sq
}

/// Random real orthogonal *and* symplectic matrix, built from a random
/// unitary U = X + iY via [[X, -Y], [Y, X]].
pub fn random_orthosymplectic<R: Rng>(n: usize, rng: &mut R) -> RMat {
    let u = random_unitary(n, rng);
    let mut m = RMat::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = u[(i, j)].re;
            m[(i, n + j)] = -u[(i, j)].im;
            m[(n + i, j)] = u[(i, j)].im;
            m[(n + i, n + j)] = u[(i, j)].re;
        }
    }
    m
}

/// Random real symplectic matrix exp(𝕁 H) with H symmetric.
pub fn random_symplectic_real<R: Rng>(n: usize, rng: &mut R) -> RMat {
    let g = random_rmat(2 * n, 2 * n, rng);
    let h = (&g + g.transpose()) * 0.25;
    let j = crate::algebra::j_symplectic_real(n);
    (j * h).exp()
}

/// Random physically valid parameter set (unitary S, Hermitian Ω structure).
pub fn random_params<R: Rng>(n: usize, m: usize, l: usize, rng: &mut R) -> PhysicalParams {
    let s = random_unitary(m, rng);
    let c_minus = random_cmat(m, n, rng);
    let c_plus = random_cmat(m, n, rng);
    let omega_minus = random_hermitian(n, rng);
    let omega_plus = random_complex_symmetric(n, rng);
    let k_drive = random_cmat(2 * n, 2 * l, rng);
    PhysicalParams::new(s, c_minus, c_plus, omega_minus, omega_plus, k_drive)
        .expect("randomly generated parameters satisfy the structural invariants")
}

/// Random passive parameter set (no squeezing, no classical drive).
pub fn random_passive_params<R: Rng>(n: usize, m: usize, rng: &mut R) -> PhysicalParams {
    let s = random_unitary(m, rng);
    let c_minus = random_cmat(m, n, rng);
    let c_plus = CMat::zeros(m, n);
    let omega_minus = random_hermitian(n, rng);
    let omega_plus = CMat::zeros(n, n);
    let k_drive = CMat::zeros(2 * n, 0);
    PhysicalParams::new(s, c_minus, c_plus, omega_minus, omega_plus, k_drive)
        .expect("randomly generated passive parameters satisfy the structural invariants")
}

/// Gram-matrix based random positive definite symmetric matrix.
pub fn random_spd<R: Rng>(n: usize, rng: &mut R) -> RMat {
    let g = random_rmat(n, n, rng);
    &g * g.transpose() + RMat::identity(n, n) * 0.2
}

pub fn random_dmatrix_symmetric<R: Rng>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let g = random_rmat(n, n, rng);
    (&g + g.transpose()) * 0.5
}

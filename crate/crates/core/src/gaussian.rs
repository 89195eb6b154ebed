//! Gaussian states: validity and purity tests, Wigner and characteristic
//! functions, moment propagation, pure-state generation by environment
//! engineering, and uncertainty relations.
//!
//! Conventions: [x, xᵀ] = i𝕁 and vacuum covariance I/2. The alternative
//! convention with [x, xᵀ] = 2i𝕁 (vacuum covariance I) is handled only by
//! the converter [`cov_from_double_convention`].
//!
//! The skew-information quantities have no closed form used here; they are
//! evaluated numerically through a truncated Fock-space representation of the
//! state ([`gaussian_to_fock`]).

use crate::algebra::{j_symplectic, j_symplectic_real, quad_basis};
use crate::error::{Error, Result};
use crate::linalg::{
    gauss_hermite, imag_part, op_norm, op_norm_r, real_part, rk4_step, solve_lyapunov, to_complex,
    C64, CMat, CVec, RMat, RVec,
};
use crate::model::{build_state_space, to_quadrature, PhysicalParams, QuadratureSystem};

/// Mean vector and symmetric covariance in quadrature coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    pub mean: RVec,
    pub cov: RMat,
}

impl GaussianState {
    pub fn new(mean: RVec, cov: RMat) -> Result<Self> {
        let dim = mean.len();
        if dim % 2 != 0 || dim == 0 {
            return Err(Error::Dimension("state dimension must be even".into()));
        }
        if cov.shape() != (dim, dim) {
            return Err(Error::Dimension("covariance must be 2n x 2n".into()));
        }
        let asym = op_norm_r(&(&cov - cov.transpose()));
        if asym > 1e-12 {
            return Err(Error::Structure(format!(
                "covariance is not symmetric: residual {asym:.3e}"
            )));
        }
        Ok(Self { mean, cov })
    }

    pub fn n(&self) -> usize {
        self.mean.len() / 2
    }

    pub fn vacuum(n: usize) -> Self {
        Self {
            mean: RVec::zeros(2 * n),
            cov: RMat::identity(2 * n, 2 * n) * 0.5,
        }
    }

    /// Single-mode squeezed thermal state: V = ((2n̄+1)/2) diag(e^{-2r}, e^{2r}).
    pub fn squeezed_thermal(nbar: f64, r: f64) -> Self {
        let nu = 2.0 * nbar + 1.0;
        let mut cov = RMat::zeros(2, 2);
        cov[(0, 0)] = nu / 2.0 * (-2.0 * r).exp();
        cov[(1, 1)] = nu / 2.0 * (2.0 * r).exp();
        Self {
            mean: RVec::zeros(2),
            cov,
        }
    }
}

/// Converts a covariance stated in the [x, xᵀ] = 2i𝕁 units (vacuum = I)
/// into this crate's convention (vacuum = I/2).
pub fn cov_from_double_convention(cov: &RMat) -> RMat {
    cov * 0.5
}

/// Converts the complex-domain second moment Σ = ⟨Δă Δă†⟩ into the real
/// symmetrized covariance 𝕍 = ½ V_n (Σ + PΣᵀP) V_n†.
pub fn cov_from_sigma(sigma: &CMat) -> Result<RMat> {
    let dim = sigma.nrows();
    if sigma.ncols() != dim || dim % 2 != 0 {
        return Err(Error::Dimension("sigma must be square 2n x 2n".into()));
    }
    let n = dim / 2;
    let mut p = CMat::zeros(dim, dim);
    for i in 0..n {
        p[(i, n + i)] = C64::new(1.0, 0.0);
        p[(n + i, i)] = C64::new(1.0, 0.0);
    }
    let v = quad_basis(n)?.matrix;
    let full = &v * (sigma + &p * sigma.transpose() * &p) * v.adjoint() * C64::new(0.5, 0.0);
    let imag = op_norm(&to_complex(&imag_part(&full)));
    if imag > 1e-9 {
        return Err(Error::Structure(format!(
            "sigma does not describe a valid second moment: imaginary residue {imag:.3e}"
        )));
    }
    Ok(real_part(&full))
}

/// Converts the complex mean γ̆ = Tr[ρ ă] into μ = √2 [Re γ; Im γ].
pub fn mean_from_gamma(gamma: &CVec) -> RVec {
    let n = gamma.len();
    let mut mu = RVec::zeros(2 * n);
    for i in 0..n {
        mu[i] = 2.0f64.sqrt() * gamma[i].re;
        mu[n + i] = 2.0f64.sqrt() * gamma[i].im;
    }
    mu
}

#[derive(Debug, Clone)]
pub struct ValidityReport {
    pub valid: bool,
    /// Smallest eigenvalue of 𝕍 + (i/2)𝕁.
    pub min_eig_plus: f64,
    /// Smallest eigenvalue of 𝕍 - (i/2)𝕁.
    pub min_eig_minus: f64,
}

/// Physical validity: 𝕍 ± (i/2)𝕁 ⪰ 0 (the two signs are conjugate; both
/// eigenvalues are reported).
pub fn is_valid(state: &GaussianState, tol: f64) -> ValidityReport {
    let n = state.n();
    let j = j_symplectic(n) * C64::new(0.0, 0.5);
    let base = to_complex(&state.cov);
    let min_eig = |m: CMat| -> f64 {
        let h = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        nalgebra::SymmetricEigen::new(h)
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    };
    let plus = min_eig(&base + &j);
    let minus = min_eig(&base - &j);
    ValidityReport {
        valid: plus >= -tol && minus >= -tol,
        min_eig_plus: plus,
        min_eig_minus: minus,
    }
}

/// Purity test: det 𝕍 = 2^{-2n} within tol. Errors on invalid states.
pub fn is_pure(state: &GaussianState, tol: f64) -> Result<bool> {
    let rep = is_valid(state, 1e-9);
    if !rep.valid {
        return Err(Error::Precondition(format!(
            "state is not a valid quantum covariance (min eig {:.3e})",
            rep.min_eig_plus.min(rep.min_eig_minus)
        )));
    }
    let n = state.n();
    let det = state.cov.determinant();
    Ok((det - 0.25f64.powi(n as i32)).abs() <= tol)
}

/// Gaussian Wigner density at a phase-space point.
pub fn wigner(state: &GaussianState, w: &RVec) -> Result<f64> {
    let dim = 2 * state.n();
    if w.len() != dim {
        return Err(Error::Dimension("phase-space point has wrong length".into()));
    }
    let chol = state
        .cov
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular("covariance is not positive definite".into()))?;
    let d = w - &state.mean;
    let sol = chol.solve(&d);
    let quad = d.dot(&sol);
    let det = state.cov.determinant();
    Ok((-0.5 * quad).exp() / ((2.0 * std::f64::consts::PI).powi(dim as i32) * det).sqrt())
}

/// Quantum characteristic function Tr[ρ exp(i x̂ᵀ𝕁β)] of a Gaussian state:
/// exp(i μᵀ𝕁β - ½ βᵀ(𝕁ᵀ𝕍𝕁)β).
///
/// The 𝕁-conjugated quadratic form is what the displacement parameterization
/// exp(i x̂ᵀ𝕁β) produces; it makes the Fourier pairing with the Wigner
/// density exact (W(w) = (2π)^{-2n} ∫ exp(-i wᵀ𝕁β) χ(β) dβ) and reduces to
/// exp(-¼ βᵀβ) on the vacuum.
pub fn characteristic(state: &GaussianState, beta: &RVec) -> C64 {
    let n = state.n();
    let j = j_symplectic_real(n);
    let jb = &j * beta;
    let lin = state.mean.dot(&jb);
    let quad = jb.dot(&(&state.cov * &jb));
    (C64::new(-0.5 * quad, lin)).exp()
}

/// Wigner normalization via tensor-product Gauss–Hermite quadrature
/// (single-mode states).
pub fn wigner_norm(state: &GaussianState, nodes_per_axis: usize) -> Result<f64> {
    if state.n() != 1 {
        return Err(Error::Dimension("wigner_norm handles single-mode states".into()));
    }
    let (x, wts) = gauss_hermite(nodes_per_axis);
    let lmax = nalgebra::SymmetricEigen::new(state.cov.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(0.0f64, f64::max);
    let sigma = (2.0 * lmax).sqrt().max(1e-8);
    let mut total = 0.0;
    for (i, &xi) in x.iter().enumerate() {
        let wi = wts[i] * (xi * xi).exp();
        for (j, &xj) in x.iter().enumerate() {
            let wj = wts[j] * (xj * xj).exp();
            let pt = RVec::from_column_slice(&[
                state.mean[0] + sigma * xi,
                state.mean[1] + sigma * xj,
            ]);
            total += wi * wj * wigner(state, &pt)?;
        }
    }
    Ok(total * sigma * sigma)
}

/// Propagates (μ, 𝕍) under the measurement-free moment dynamics
/// μ̇ = 𝔸μ, V̇ = 𝔸V + V𝔸ᵀ + ½𝔹𝔹ᵀ with classical RK4.
pub fn evolve_moments(
    qs: &QuadratureSystem,
    state0: &GaussianState,
    horizon: f64,
    dt: f64,
) -> Result<Vec<(f64, GaussianState)>> {
    if dt <= 0.0 || horizon < 0.0 {
        return Err(Error::Parameter("dt must be positive".into()));
    }
    let dim = 2 * qs.n;
    if state0.mean.len() != dim {
        return Err(Error::Dimension("state dimension does not match system".into()));
    }
    let steps = (horizon / dt).round() as usize;
    let noise = &qs.b * qs.b.transpose() * 0.5;
    let mut mean = state0.mean.clone();
    let mut cov = state0.cov.clone();
    let mut out = Vec::with_capacity(steps + 1);
    out.push((0.0, state0.clone()));
    for k in 0..steps {
        let mean_m = RMat::from_column_slice(dim, 1, mean.as_slice());
        let mean_m = rk4_step(|x| &qs.a * x, &mean_m, dt);
        mean = RVec::from_column_slice(mean_m.as_slice());
        cov = rk4_step(|v| &qs.a * v + v * qs.a.transpose() + &noise, &cov, dt);
        cov = (&cov + cov.transpose()) * 0.5;
        if !mean.iter().all(|x| x.is_finite()) || !cov.iter().all(|x| x.is_finite()) {
            return Err(Error::Divergence(format!(
                "moment integration diverged at t = {}",
                (k + 1) as f64 * dt
            )));
        }
        out.push((
            (k + 1) as f64 * dt,
            GaussianState {
                mean: mean.clone(),
                cov: cov.clone(),
            },
        ));
    }
    Ok(out)
}

/// Output of the pure-Gaussian-state generator: the Hamiltonian quadratic
/// form and coupling that realize the target covariance as the unique steady
/// state, plus the verification of that claim.
#[derive(Debug, Clone)]
pub struct GeneratedSystem {
    /// Quadratic Hamiltonian form ℍ over x = (q, p).
    pub h_quad: RMat,
    /// Coupling rows Λ with L = Λ x.
    pub lambda: CMat,
    pub params: PhysicalParams,
    pub target_cov: RMat,
    pub steady_cov: RMat,
    pub residual: f64,
}

fn sym_sqrt(m: &RMat) -> Result<RMat> {
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
        return Err(Error::Parameter("matrix is not positive definite".into()));
    }
    let d = RMat::from_diagonal(&eig.eigenvalues.map(|l| l.sqrt()));
    Ok(&eig.eigenvectors * d * eig.eigenvectors.transpose())
}

/// Builds the linear quantum system whose steady state is the pure Gaussian
/// state with covariance ½𝕊𝕊ᵀ, 𝕊 = [[Y^-1/2, 0], [XY^-1/2, Y^1/2]].
///
/// `p_mat` is the n×m free matrix of the construction; (P, Q) with
/// Q = -iRY + Y⁻¹Γ must be controllable.
pub fn pure_state_generator(
    x: &RMat,
    y: &RMat,
    r: &RMat,
    gamma: &RMat,
    p_mat: &RMat,
) -> Result<GeneratedSystem> {
    let n = x.nrows();
    for (name, m, sym) in [("X", x, 1.0), ("Y", y, 1.0), ("R", r, 1.0), ("Gamma", gamma, -1.0)] {
        if m.shape() != (n, n) {
            return Err(Error::Dimension(format!("{name} must be {n}x{n}")));
        }
        if op_norm_r(&(m - m.transpose() * sym)) > 1e-10 {
            return Err(Error::Parameter(format!("{name} has the wrong symmetry")));
        }
    }
    if p_mat.nrows() != n {
        return Err(Error::Dimension("P must have n rows".into()));
    }
    let m_ch = p_mat.ncols();
    let y_inv = y
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Parameter("Y is singular".into()))?;
    sym_sqrt(y)?; // positive definiteness check

    // controllability of (P, Q), Q = -iRY + Y⁻¹Γ
    let q = to_complex(&(&y_inv * gamma)) + to_complex(&(r * y)) * C64::new(0.0, -1.0);
    let pc = to_complex(p_mat);
    let mut ctrb = CMat::zeros(n, n * m_ch);
    let mut cur = pc.clone();
    for k in 0..n {
        ctrb.view_mut((0, k * m_ch), (n, m_ch)).copy_from(&cur);
        cur = &q * cur;
    }
    let sv = crate::linalg::singular_values(&ctrb);
    let smax = sv.first().copied().unwrap_or(0.0);
    let rank = sv.iter().filter(|&&s| s > 1e-9 * smax).count();
    if smax == 0.0 || rank < n {
        return Err(Error::Precondition(format!(
            "(P, Q) is not controllable: rank {rank} < {n} (singular values {sv:?})"
        )));
    }

    // ℍ block formula
    let h11 = x * r * x + y * r * y - gamma * &y_inv * x - x * &y_inv * gamma.transpose();
    let h12 = -(x * r) + gamma * &y_inv;
    let h21 = -(r * x) + &y_inv * gamma.transpose();
    let mut h_quad = RMat::zeros(2 * n, 2 * n);
    h_quad.view_mut((0, 0), (n, n)).copy_from(&h11);
    h_quad.view_mut((0, n), (n, n)).copy_from(&h12);
    h_quad.view_mut((n, 0), (n, n)).copy_from(&h21);
    h_quad.view_mut((n, n), (n, n)).copy_from(r);

    // Λ = Pᵀ [-Z I], Z = X + iY
    let z = to_complex(x) + to_complex(y) * C64::new(0.0, 1.0);
    let mut lam = CMat::zeros(m_ch, 2 * n);
    lam.view_mut((0, 0), (m_ch, n)).copy_from(&(-(pc.transpose()) * z));
    lam.view_mut((0, n), (m_ch, n)).copy_from(&pc.transpose());

    let params = params_from_quadrature_forms(&h_quad, &lam)?;
    let qs = to_quadrature(&build_state_space(&params)?)?;
    let spec = crate::analysis::is_hurwitz(&qs, 0.0);
    if !spec.is_hurwitz {
        return Err(Error::Precondition(format!(
            "generated system is not Hurwitz (abscissa {:.3e})",
            spec.abscissa
        )));
    }
    let steady = solve_lyapunov(&qs.a, &(&qs.b * qs.b.transpose() * 0.5))?;

    let y_sqrt = sym_sqrt(y)?;
    let y_isqrt = y_sqrt
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Parameter("Y^{1/2} is singular".into()))?;
    let mut s_mat = RMat::zeros(2 * n, 2 * n);
    s_mat.view_mut((0, 0), (n, n)).copy_from(&y_isqrt);
    s_mat.view_mut((n, 0), (n, n)).copy_from(&(x * &y_isqrt));
    s_mat.view_mut((n, n), (n, n)).copy_from(&y_sqrt);
    let target = &s_mat * s_mat.transpose() * 0.5;
    let residual = op_norm_r(&(&steady - &target));

    Ok(GeneratedSystem {
        h_quad,
        lambda: lam,
        params,
        target_cov: target,
        steady_cov: steady,
        residual,
    })
}

/// Converts quadrature-picture data (ℍ, Λ) into the physical parameterization
/// (Ω = V†ℍV, [C₋ C₊] = ΛV).
pub fn params_from_quadrature_forms(h_quad: &RMat, lambda: &CMat) -> Result<PhysicalParams> {
    let dim = h_quad.nrows();
    if dim % 2 != 0 || h_quad.ncols() != dim || lambda.ncols() != dim {
        return Err(Error::Dimension("ℍ must be 2n x 2n and Λ m x 2n".into()));
    }
    let n = dim / 2;
    let m = lambda.nrows();
    let v = quad_basis(n)?.matrix;
    let omega = v.adjoint() * to_complex(h_quad) * &v;
    let omega_minus = omega.view((0, 0), (n, n)).into_owned();
    let omega_plus = omega.view((0, n), (n, n)).into_owned();
    let cpm = lambda * &v;
    let c_minus = cpm.view((0, 0), (m, n)).into_owned();
    let c_plus = cpm.view((0, n), (m, n)).into_owned();
    PhysicalParams::new(
        CMat::identity(m, m),
        c_minus,
        c_plus,
        omega_minus,
        omega_plus,
        CMat::zeros(2 * n, 0),
    )
}

/// Truncated Fock-space density matrix.
#[derive(Debug, Clone)]
pub struct FockDensity {
    pub dim: usize,
    pub rho: CMat,
    pub trace_deviation: f64,
}

pub fn annihilation_op(dim: usize) -> CMat {
    let mut a = CMat::zeros(dim, dim);
    for k in 1..dim {
        a[(k - 1, k)] = C64::new((k as f64).sqrt(), 0.0);
    }
    a
}

pub fn position_op(dim: usize) -> CMat {
    let a = annihilation_op(dim);
    (&a + a.adjoint()) * C64::new(1.0 / 2.0f64.sqrt(), 0.0)
}

pub fn momentum_op(dim: usize) -> CMat {
    let a = annihilation_op(dim);
    (a.adjoint() - &a) * C64::new(0.0, 1.0 / 2.0f64.sqrt())
}

/// D(β) = exp(i x̂ᵀ𝕁β): displaces the mean by β.
pub fn displacement_op(dim: usize, beta: (f64, f64)) -> CMat {
    let gen = position_op(dim) * C64::new(0.0, beta.1) - momentum_op(dim) * C64::new(0.0, beta.0);
    gen.exp()
}

/// S(r) = exp(r/2 (a² - a†²)): maps (q, p) to (e^{-r} q, e^{r} p).
pub fn squeeze_op(dim: usize, r: f64) -> CMat {
    let a = annihilation_op(dim);
    let gen = (&a * &a - a.adjoint() * a.adjoint()) * C64::new(r / 2.0, 0.0);
    gen.exp()
}

/// R(θ) = exp(-iθ a†a).
pub fn rotation_op(dim: usize, theta: f64) -> CMat {
    let mut m = CMat::zeros(dim, dim);
    for k in 0..dim {
        m[(k, k)] = (C64::new(0.0, -theta) * C64::new(k as f64, 0.0)).exp();
    }
    m
}

/// First and second moments (μ, 𝕍) of a single-mode Fock density matrix.
pub fn fock_moments(rho: &FockDensity) -> (RVec, RMat) {
    let dim = rho.dim;
    let ops = [position_op(dim), momentum_op(dim)];
    let tr = |m: &CMat| -> C64 { (0..dim).map(|i| m[(i, i)]).sum() };
    let mut mu = RVec::zeros(2);
    for i in 0..2 {
        mu[i] = tr(&(&rho.rho * &ops[i])).re;
    }
    let mut cov = RMat::zeros(2, 2);
    for i in 0..2 {
        for j in 0..2 {
            let sym = (&ops[i] * &ops[j] + &ops[j] * &ops[i]) * C64::new(0.5, 0.0);
            cov[(i, j)] = tr(&(&rho.rho * sym)).re - mu[i] * mu[j];
        }
    }
    (mu, cov)
}

/// Builds a truncated Fock representation of a single-mode Gaussian state as
/// a squeezed, rotated, displaced thermal state, and reports how well the
/// reconstructed moments match the input.
pub fn gaussian_to_fock(state: &GaussianState, n_trunc: usize) -> Result<(FockDensity, f64)> {
    if state.n() != 1 {
        return Err(Error::Dimension("the Fock bridge handles single-mode states".into()));
    }
    if n_trunc < 2 {
        return Err(Error::Parameter("truncation must be at least 2".into()));
    }
    let rep = is_valid(state, 1e-9);
    if !rep.valid {
        return Err(Error::Precondition(format!(
            "state is not a valid quantum covariance (min eig {:.3e})",
            rep.min_eig_plus.min(rep.min_eig_minus)
        )));
    }
    // Williamson reduction for n = 1: symplectic eigenvalue ν = 2√det 𝕍,
    // 𝕍 = (ν/2) 𝕊𝕊ᵀ. The squeezed thermal state is realized in Gibbs form,
    // ρ ∝ exp(-½ x̂ᵀGx̂) with G = γ(𝕊𝕊ᵀ)⁻¹ and ν = coth(γ/2), which keeps
    // truncation artifacts exponentially suppressed, then displaced.
    let nu = (2.0 * state.cov.determinant().sqrt()).max(1.0);
    let w = &state.cov * (2.0 / nu); // = 𝕊𝕊ᵀ, det 1
    let gamma = if nu > 1.0 + 1e-12 {
        ((nu + 1.0) / (nu - 1.0)).ln().min(40.0)
    } else {
        40.0 // pure state: thermal weight below e⁻⁴⁰
    };
    let g = w
        .try_inverse()
        .ok_or_else(|| Error::Precondition("covariance is not positive definite".into()))?
        * gamma;

    // Work in a padded dimension so the displacement exponential's boundary
    // band stays away from the returned block.
    let work = 2 * n_trunc;
    let (q_op, p_op) = (position_op(work), momentum_op(work));
    let m_op = &q_op * &q_op * C64::new(g[(0, 0)], 0.0)
        + (&q_op * &p_op + &p_op * &q_op) * C64::new(g[(0, 1)], 0.0)
        + &p_op * &p_op * C64::new(g[(1, 1)], 0.0);
    let herm = (&m_op + m_op.adjoint()) * C64::new(0.5, 0.0);
    let eig = nalgebra::SymmetricEigen::new(herm);
    let lmin = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let weights = CMat::from_diagonal(
        &eig.eigenvalues.map(|l| C64::new((-0.5 * (l - lmin)).exp(), 0.0)),
    );
    let mut rho_work = &eig.eigenvectors * weights * eig.eigenvectors.adjoint();
    let tr_work: C64 = (0..work).map(|i| rho_work[(i, i)]).sum();
    rho_work /= tr_work;
    if state.mean.norm() > 0.0 {
        let disp = displacement_op(work, (state.mean[0], state.mean[1]));
        rho_work = &disp * rho_work * disp.adjoint();
    }

    let rho = rho_work.view((0, 0), (n_trunc, n_trunc)).into_owned();
    let trace: C64 = (0..n_trunc).map(|i| rho[(i, i)]).sum();
    let dens = FockDensity {
        dim: n_trunc,
        rho,
        trace_deviation: (trace - C64::new(1.0, 0.0)).norm(),
    };
    let (mu_rec, cov_rec) = fock_moments(&dens);
    let residual = (mu_rec - &state.mean)
        .norm()
        .max(op_norm_r(&(cov_rec - &state.cov)));
    Ok((dens, residual))
}

/// [`gaussian_to_fock`] with the truncation doubled from 60 until the moment
/// residual drops below 1e-5 (or 512 is reached).
pub fn gaussian_to_fock_auto(state: &GaussianState) -> Result<(FockDensity, f64, usize)> {
    let mut n_trunc = 60;
    loop {
        let (dens, residual) = gaussian_to_fock(state, n_trunc)?;
        if residual < 1e-5 || n_trunc >= 512 {
            return Ok((dens, residual, n_trunc));
        }
        n_trunc = (2 * n_trunc).min(512);
    }
}

/// Wigner–Yanase skew information I(ρ, X) = -½ Tr([√ρ, X]²).
pub fn skew_information(rho: &FockDensity, x_op: &CMat) -> Result<f64> {
    let dim = rho.dim;
    if x_op.shape() != (dim, dim) {
        return Err(Error::Dimension("observable dimension mismatch".into()));
    }
    let herm = (&rho.rho + rho.rho.adjoint()) * C64::new(0.5, 0.0);
    let eig = nalgebra::SymmetricEigen::new(herm);
    if let Some(l) = eig.eigenvalues.iter().find(|&&l| l < -1e-8) {
        return Err(Error::Parameter(format!(
            "density matrix has negative eigenvalue {l:.3e}"
        )));
    }
    let d = CMat::from_diagonal(&eig.eigenvalues.map(|l| C64::new(l.max(0.0).sqrt(), 0.0)));
    let sqrt_rho = &eig.eigenvectors * d * eig.eigenvectors.adjoint();
    let comm = &sqrt_rho * x_op - x_op * sqrt_rho;
    let sq = &comm * &comm;
    let tr: C64 = (0..dim).map(|i| sq[(i, i)]).sum();
    Ok(-0.5 * tr.re)
}

/// Variance of a Hermitian observable in a Fock-space state.
pub fn fock_variance(rho: &FockDensity, x_op: &CMat) -> f64 {
    let dim = rho.dim;
    let tr = |m: &CMat| -> C64 { (0..dim).map(|i| m[(i, i)]).sum() };
    let mean = tr(&(&rho.rho * x_op)).re;
    let second = tr(&(&rho.rho * x_op * x_op)).re;
    second - mean * mean
}

#[derive(Debug, Clone)]
pub struct UncertaintyReport {
    /// std(q)·std(p) from the covariance matrix.
    pub heisenberg_lhs: f64,
    /// ½|⟨[q, p]⟩| = ½ in these units.
    pub heisenberg_rhs: f64,
    pub variance_q: f64,
    pub variance_p: f64,
    pub skew_q: f64,
    pub skew_p: f64,
    pub u_q: f64,
    pub u_p: f64,
    /// U(ρ,q)·U(ρ,p)
    pub luo_lhs: f64,
    /// ¼|Tr(ρ[q,p])|², evaluated on the truncated space.
    pub luo_rhs: f64,
    pub fock_dim: usize,
    pub moment_residual: f64,
}

/// Heisenberg and information-theoretic uncertainty quantities for a
/// single-mode Gaussian state, the latter via the Fock bridge at truncation
/// `n_trunc`.
pub fn uncertainty_report(state: &GaussianState, n_trunc: usize) -> Result<UncertaintyReport> {
    if state.n() != 1 {
        return Err(Error::Dimension("uncertainty report handles single-mode states".into()));
    }
    let (dens, moment_residual) = gaussian_to_fock(state, n_trunc)?;
    let q = position_op(n_trunc);
    let p = momentum_op(n_trunc);
    let vq = fock_variance(&dens, &q);
    let vp = fock_variance(&dens, &p);
    let iq = skew_information(&dens, &q)?;
    let ip = skew_information(&dens, &p)?;
    let u = |v: f64, i: f64| -> f64 { (v * v - (v - i) * (v - i)).max(0.0).sqrt() };
    let comm = &q * &p - &p * &q;
    let prod = &dens.rho * &comm;
    let tr_comm: C64 = (0..n_trunc).map(|i| prod[(i, i)]).sum();
    Ok(UncertaintyReport {
        heisenberg_lhs: (state.cov[(0, 0)] * state.cov[(1, 1)]).sqrt(),
        heisenberg_rhs: 0.5,
        variance_q: vq,
        variance_p: vp,
        skew_q: iq,
        skew_p: ip,
        u_q: u(vq, iq),
        u_p: u(vp, ip),
        luo_lhs: u(vq, iq) * u(vp, ip),
        luo_rhs: 0.25 * tr_comm.norm_sqr(),
        fock_dim: n_trunc,
        moment_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn validity_examples() {
        let rep = is_valid(&GaussianState::vacuum(1), 1e-10);
        assert!(rep.valid);
        assert_relative_eq!(rep.min_eig_plus, 0.0, epsilon = 1e-12);

        let squeezed_too_far =
            GaussianState::new(RVec::zeros(2), RMat::identity(2, 2) * 0.4).unwrap();
        let rep = is_valid(&squeezed_too_far, 1e-10);
        assert!(!rep.valid);
        assert_relative_eq!(rep.min_eig_plus, -0.1, epsilon = 1e-12);

        let thermal = GaussianState::new(RVec::zeros(2), RMat::identity(2, 2) * 1.5).unwrap();
        let rep = is_valid(&thermal, 1e-10);
        assert!(rep.valid);
        assert_relative_eq!(rep.min_eig_plus, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn purity_examples() {
        assert!(is_pure(&GaussianState::vacuum(1), 1e-10).unwrap());
        let thermal = GaussianState::new(RVec::zeros(2), RMat::identity(2, 2) * 1.5).unwrap();
        assert!(!is_pure(&thermal, 1e-10).unwrap());
        let squeezed = GaussianState::squeezed_thermal(0.0, 0.5);
        assert!(is_pure(&squeezed, 1e-10).unwrap());
        let invalid = GaussianState::new(RVec::zeros(2), RMat::identity(2, 2) * 0.3).unwrap();
        assert!(matches!(is_pure(&invalid, 1e-10), Err(Error::Precondition(_))));
    }

    #[test]
    fn wigner_examples() {
        let vac = GaussianState::vacuum(1);
        let at0 = wigner(&vac, &RVec::zeros(2)).unwrap();
        assert_relative_eq!(at0, 1.0 / std::f64::consts::PI, epsilon = 1e-14);
        let w = RVec::from_column_slice(&[0.7, -1.2]);
        let expect = (1.0 / std::f64::consts::PI) * (-(w.dot(&w))).exp();
        assert_relative_eq!(wigner(&vac, &w).unwrap(), expect, epsilon = 1e-14);

        // normalization on a couple of displaced/squeezed states
        for state in [
            GaussianState::vacuum(1),
            GaussianState::new(
                RVec::from_column_slice(&[0.8, -0.4]),
                RMat::from_row_slice(2, 2, &[0.9, 0.25, 0.25, 0.7]),
            )
            .unwrap(),
        ] {
            let norm = wigner_norm(&state, 64).unwrap();
            assert!((norm - 1.0).abs() < 1e-3, "norm {norm}");
        }

        let degenerate = GaussianState::new(RVec::zeros(2), RMat::zeros(2, 2));
        assert!(matches!(
            wigner(&degenerate.unwrap(), &RVec::zeros(2)),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn characteristic_examples() {
        let vac = GaussianState::vacuum(1);
        assert_relative_eq!(
            characteristic(&vac, &RVec::zeros(2)).re,
            1.0,
            epsilon = 1e-15
        );
        // χ(β) for the vacuum equals exp(-|α|²/2) with β = √2 (Re α, Im α)
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let alpha = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let beta = RVec::from_column_slice(&[
                2.0f64.sqrt() * alpha.re,
                2.0f64.sqrt() * alpha.im,
            ]);
            let chi = characteristic(&vac, &beta);
            assert_relative_eq!(chi.re, (-alpha.norm_sqr() / 2.0).exp(), epsilon = 1e-12);
            assert_relative_eq!(chi.im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn wigner_is_fourier_transform_of_characteristic() {
        // Riemann-sum transform of χ reproduces the Gaussian Wigner density:
        // W(w) = (2π)^{-2} ∫ exp(-i wᵀ𝕁β) χ(β) dβ for n = 1.
        let state = GaussianState::new(
            RVec::from_column_slice(&[0.4, -0.2]),
            RMat::from_row_slice(2, 2, &[0.8, 0.2, 0.2, 0.9]),
        )
        .unwrap();
        let j = j_symplectic_real(1);
        let (grid, h) = {
            let l = 12.0;
            let nn = 301;
            let step = 2.0 * l / (nn as f64 - 1.0);
            let pts: Vec<f64> = (0..nn).map(|i| -l + step * i as f64).collect();
            (pts, step)
        };
        for w in [
            RVec::from_column_slice(&[0.0, 0.0]),
            RVec::from_column_slice(&[0.5, 0.3]),
        ] {
            let mut acc = c(0.0, 0.0);
            for &b1 in &grid {
                for &b2 in &grid {
                    let beta = RVec::from_column_slice(&[b1, b2]);
                    let phase = -(w.dot(&(&j * &beta)));
                    acc += c(0.0, phase).exp() * characteristic(&state, &beta);
                }
            }
            let value = acc * c(h * h / (2.0 * std::f64::consts::PI).powi(2), 0.0);
            let expect = wigner(&state, &w).unwrap();
            assert_relative_eq!(value.re, expect, epsilon = 1e-6);
            assert!(value.im.abs() < 1e-9);
        }
    }

    fn cavity_qs(kappa: f64, omega: f64) -> QuadratureSystem {
        let p = PhysicalParams::new(
            CMat::identity(1, 1),
            CMat::from_element(1, 1, c(kappa.sqrt(), 0.0)),
            CMat::zeros(1, 1),
            CMat::from_element(1, 1, c(omega, 0.0)),
            CMat::zeros(1, 1),
            CMat::zeros(2, 0),
        )
        .unwrap();
        to_quadrature(&build_state_space(&p).unwrap()).unwrap()
    }

    #[test]
    fn moment_evolution() {
        // vacuum is a fixed point of the cavity dynamics
        let qs = cavity_qs(2.0, 0.0);
        let traj = evolve_moments(&qs, &GaussianState::vacuum(1), 3.0, 1e-3).unwrap();
        let (_, last) = traj.last().unwrap();
        assert!(op_norm_r(&(&last.cov - RMat::identity(2, 2) * 0.5)) < 1e-10);

        // static system keeps the state constant
        let free = QuadratureSystem::new(
            1,
            1,
            0,
            RMat::zeros(2, 2),
            RMat::zeros(2, 2),
            RMat::zeros(2, 2),
            RMat::identity(2, 2),
            RMat::zeros(2, 0),
        )
        .unwrap();
        let start = GaussianState::new(
            RVec::from_column_slice(&[0.3, -0.1]),
            RMat::identity(2, 2) * 0.8,
        )
        .unwrap();
        let traj = evolve_moments(&free, &start, 1.0, 1e-2).unwrap();
        assert_eq!(traj.last().unwrap().1, start);

        // mean follows the matrix exponential
        let qs = cavity_qs(1.3, 0.7);
        let start = GaussianState::new(
            RVec::from_column_slice(&[1.0, -0.5]),
            RMat::identity(2, 2) * 0.5,
        )
        .unwrap();
        let horizon = 2.0;
        let traj = evolve_moments(&qs, &start, horizon, 1e-3).unwrap();
        let expm = (to_complex(&qs.a) * c(horizon, 0.0)).exp();
        let expected = real_part(&expm) * &start.mean;
        assert!((traj.last().unwrap().1.mean.clone() - expected).norm() < 1e-8);

        // validity is preserved along the trajectory
        for (_, st) in traj.iter().step_by(100) {
            let rep = is_valid(st, 1e-8);
            assert!(rep.valid);
        }
    }

    #[test]
    fn pure_state_generator_vacuum_case() {
        let x = RMat::zeros(1, 1);
        let y = RMat::identity(1, 1);
        let r = RMat::zeros(1, 1);
        let gamma = RMat::zeros(1, 1);
        let p = RMat::identity(1, 1);
        let gen = pure_state_generator(&x, &y, &r, &gamma, &p).unwrap();
        assert!(op_norm_r(&(&gen.target_cov - RMat::identity(2, 2) * 0.5)) < 1e-12);
        assert!(gen.residual < 1e-8, "residual {}", gen.residual);
    }

    #[test]
    fn pure_state_generator_correlated_case() {
        let x = RMat::from_element(1, 1, 0.2);
        let y = RMat::from_element(1, 1, 1.5);
        let r = RMat::zeros(1, 1);
        let gamma = RMat::zeros(1, 1);
        let p = RMat::identity(1, 1);
        let gen = pure_state_generator(&x, &y, &r, &gamma, &p).unwrap();
        assert!(gen.residual < 1e-8, "residual {}", gen.residual);
        // purity of the target: det(½𝕊𝕊ᵀ) = 1/4
        assert_relative_eq!(gen.target_cov.determinant(), 0.25, epsilon = 1e-12);
        let state = GaussianState::new(RVec::zeros(2), gen.steady_cov.clone()).unwrap();
        assert!(is_pure(&state, 1e-8).unwrap());
    }

    #[test]
    fn pure_state_generator_rejects_uncontrollable() {
        let x = RMat::zeros(1, 1);
        let y = RMat::identity(1, 1);
        let r = RMat::zeros(1, 1);
        let gamma = RMat::zeros(1, 1);
        let p = RMat::zeros(1, 1);
        assert!(matches!(
            pure_state_generator(&x, &y, &r, &gamma, &p),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn fock_bridge_vacuum_and_thermal() {
        let (dens, res) = gaussian_to_fock(&GaussianState::vacuum(1), 20).unwrap();
        assert!(res < 1e-12);
        assert_relative_eq!(dens.rho[(0, 0)].re, 1.0, epsilon = 1e-12);
        for k in 1..20 {
            assert!(dens.rho[(k, k)].norm() < 1e-12);
        }

        let thermal = GaussianState::new(RVec::zeros(2), RMat::identity(2, 2) * 1.5).unwrap();
        let (dens, res) = gaussian_to_fock(&thermal, 60).unwrap();
        assert!(res < 1e-6, "residual {res}");
        // geometric weights with n̄ = 1: p_k = 1/2^{k+1}
        for k in 0..6 {
            assert_relative_eq!(dens.rho[(k, k)].re, 0.5f64.powi(k as i32 + 1), epsilon = 1e-10);
        }
    }

    #[test]
    fn fock_bridge_squeezed_and_roundtrip_box() {
        let r = 0.4;
        let sq = GaussianState::squeezed_thermal(0.0, r);
        let (dens, res) = gaussian_to_fock(&sq, 60).unwrap();
        assert!(res < 1e-5);
        let (_, cov) = fock_moments(&dens);
        assert_relative_eq!(cov[(0, 0)], (-2.0 * r).exp() / 2.0, epsilon = 1e-5);

        // moderate states reach 1e-5 at the default truncation
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..4 {
            let nbar = rng.gen_range(0.0..2.0);
            let rr = rng.gen_range(-0.5..0.5);
            let theta: f64 = rng.gen_range(0.0..std::f64::consts::PI);
            let rot = RMat::from_row_slice(
                2,
                2,
                &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()],
            );
            let base = GaussianState::squeezed_thermal(nbar, rr);
            let mean = RVec::from_column_slice(&[rng.gen_range(-1.4..1.4), rng.gen_range(-1.4..1.4)]);
            let state =
                GaussianState::new(mean, &rot * base.cov * rot.transpose()).unwrap();
            let (_, res) = gaussian_to_fock(&state, 60).unwrap();
            assert!(res < 1e-5, "residual {res} for n̄={nbar}, r={rr}");
        }

        // hot, strongly squeezed corners of the box carry genuine photon mass
        // beyond level 60; the doubling wrapper brings them below 1e-5
        let hot = GaussianState::squeezed_thermal(3.0, 0.8);
        let (_, res60) = gaussian_to_fock(&hot, 60).unwrap();
        let (_, res, n_used) = gaussian_to_fock_auto(&hot).unwrap();
        assert!(res < 1e-5, "auto residual {res} (N = {n_used}, fixed-60 {res60})");
        assert!(n_used <= 512);
    }

    #[test]
    fn skew_information_properties() {
        // pure state: I = V (up to the √-amplified eigenvalue noise of a
        // numerically pure density matrix)
        let (vac, _) = gaussian_to_fock(&GaussianState::vacuum(1), 30).unwrap();
        let q = position_op(30);
        let iq = skew_information(&vac, &q).unwrap();
        assert_relative_eq!(iq, fock_variance(&vac, &q), epsilon = 1e-7);

        // commuting case: diagonal state, diagonal observable
        let dim = 10;
        let rho = FockDensity {
            dim,
            rho: CMat::identity(dim, dim) * c(1.0 / dim as f64, 0.0),
            trace_deviation: 0.0,
        };
        let num = CMat::from_diagonal(&CVec::from_fn(dim, |k, _| c(k as f64, 0.0)));
        assert_relative_eq!(skew_information(&rho, &num).unwrap(), 0.0, epsilon = 1e-12);

        // thermal state: 0 < I < V, and I matches the direct double sum
        let thermal = GaussianState::new(RVec::zeros(2), RMat::identity(2, 2) * 1.5).unwrap();
        let (dens, _) = gaussian_to_fock(&thermal, 80).unwrap();
        let q80 = position_op(80);
        let i_thermal = skew_information(&dens, &q80).unwrap();
        let v_thermal = fock_variance(&dens, &q80);
        assert!(i_thermal > 1e-3);
        assert!(i_thermal < v_thermal - 1e-3);
        // independent evaluation: I = ½ Σ_{jk} (√p_j - √p_k)² |q_{jk}|² for
        // the diagonal thermal density
        let nbar = 1.0f64;
        let pk = |k: usize| nbar.powi(k as i32) / (nbar + 1.0).powi(k as i32 + 1);
        let mut direct = 0.0;
        for j in 0..80usize {
            for k in 0..80usize {
                let qjk = q80[(j, k)].norm_sqr();
                if qjk > 0.0 {
                    let d = pk(j).sqrt() - pk(k).sqrt();
                    direct += 0.5 * d * d * qjk;
                }
            }
        }
        assert_relative_eq!(i_thermal, direct, epsilon = 1e-8);
    }

    #[test]
    fn uncertainty_reports() {
        // vacuum saturates Heisenberg
        let rep = uncertainty_report(&GaussianState::vacuum(1), 40).unwrap();
        assert_relative_eq!(rep.heisenberg_lhs, 0.5, epsilon = 1e-14);
        assert_relative_eq!(rep.luo_lhs, 0.25, epsilon = 1e-6);

        // mixed thermal state: Heisenberg not saturated, Luo saturated
        let thermal = GaussianState::new(RVec::zeros(2), RMat::identity(2, 2) * 1.5).unwrap();
        let rep = uncertainty_report(&thermal, 60).unwrap();
        assert_relative_eq!(rep.heisenberg_lhs, 1.5, epsilon = 1e-14);
        assert!(rep.heisenberg_lhs > rep.heisenberg_rhs + 0.5);
        assert!((rep.luo_lhs - 0.25).abs() < 1e-3, "U_q U_p = {}", rep.luo_lhs);
        assert!((rep.luo_rhs - 0.25).abs() < 1e-6);
    }

    #[test]
    fn sigma_converter_matches_vacuum() {
        // vacuum: Σ = diag(I_n, 0) maps to 𝕍 = I/2
        let mut sigma = CMat::zeros(2, 2);
        sigma[(0, 0)] = c(1.0, 0.0);
        let v = cov_from_sigma(&sigma).unwrap();
        assert!(op_norm_r(&(&v - RMat::identity(2, 2) * 0.5)) < 1e-12);
        let gamma = CVec::from_column_slice(&[c(0.3, -0.4)]);
        let mu = mean_from_gamma(&gamma);
        assert_relative_eq!(mu[0], 2.0f64.sqrt() * 0.3, epsilon = 1e-15);
        assert_relative_eq!(mu[1], -(2.0f64.sqrt()) * 0.4, epsilon = 1e-15);

        // double-commutation-convention covariance halves
        let v2 = RMat::identity(2, 2);
        assert!(op_norm_r(&(cov_from_double_convention(&v2) - RMat::identity(2, 2) * 0.5)) < 1e-15);
    }
}

//! State-space models of open linear quantum systems.
//!
//! Builds the doubled-up annihilation-operator model (𝒜, ℬ, 𝒞, 𝒟, ℰ) from
//! physical parameters (S, C₋, C₊, Ω₋, Ω₊, K), converts to and from the real
//! quadrature representation, checks physical realizability, and evaluates
//! impulse responses and transfer functions.

use std::sync::OnceLock;

use crate::algebra::{self, flat_adjoint, j_metric, j_symplectic, quad_basis, DoubledMatrix};
use crate::error::{Error, Result};
use crate::linalg::{imag_part, op_norm, real_part, to_complex, C64, CMat, RMat};

/// Physical parameterization (S, C₋, C₊, Ω₋, Ω₊, K) of an open linear
/// quantum system with `n` oscillators, `m` field channels and `l` classical
/// drive channels.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalParams {
    pub n: usize,
    pub m: usize,
    pub l: usize,
    /// Unitary scattering matrix, m×m.
    pub s: CMat,
    /// Coupling to annihilation operators, m×n.
    pub c_minus: CMat,
    /// Coupling to creation operators, m×n.
    pub c_plus: CMat,
    /// Hermitian part of the Hamiltonian, n×n.
    pub omega_minus: CMat,
    /// Symmetric (squeezing) part of the Hamiltonian, n×n.
    pub omega_plus: CMat,
    /// Classical drive coupling, 2n×2l. Not constrained to be doubled-up.
    pub k_drive: CMat,
}

impl PhysicalParams {
    pub fn new(
        s: CMat,
        c_minus: CMat,
        c_plus: CMat,
        omega_minus: CMat,
        omega_plus: CMat,
        k_drive: CMat,
    ) -> Result<Self> {
        let m = s.nrows();
        if s.ncols() != m {
            return Err(Error::Dimension("S must be square".into()));
        }
        let n = c_minus.ncols();
        if c_minus.nrows() != m || c_plus.shape() != (m, n) {
            return Err(Error::Dimension(format!(
                "coupling matrices must be {m}x{n}"
            )));
        }
        if omega_minus.shape() != (n, n) || omega_plus.shape() != (n, n) {
            return Err(Error::Dimension(format!("Omega blocks must be {n}x{n}")));
        }
        if k_drive.nrows() != 2 * n || k_drive.ncols() % 2 != 0 {
            return Err(Error::Dimension(format!(
                "K must be 2n x 2l with n = {n}"
            )));
        }
        let l = k_drive.ncols() / 2;
        let p = Self {
            n,
            m,
            l,
            s,
            c_minus,
            c_plus,
            omega_minus,
            omega_plus,
            k_drive,
        };
        p.validate(algebra::DEFAULT_TOL)?;
        Ok(p)
    }

    /// Checks the structural invariants: S unitary, Ω₋ Hermitian, Ω₊ symmetric.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let m = self.m;
        let uni = op_norm(&(&self.s * self.s.adjoint() - CMat::identity(m, m)));
        if uni > tol {
            return Err(Error::Parameter(format!(
                "S is not unitary: residual {uni:.3e}"
            )));
        }
        let herm = op_norm(&(&self.omega_minus - self.omega_minus.adjoint()));
        if herm > tol {
            return Err(Error::Parameter(format!(
                "Omega_minus is not Hermitian: residual {herm:.3e}"
            )));
        }
        let sym = op_norm(&(&self.omega_plus - self.omega_plus.transpose()));
        if sym > tol {
            return Err(Error::Parameter(format!(
                "Omega_plus is not symmetric: residual {sym:.3e}"
            )));
        }
        Ok(())
    }

    /// Ω = Δ(Ω₋, Ω₊), the full doubled-up Hamiltonian matrix.
    pub fn omega(&self) -> CMat {
        DoubledMatrix::new(self.omega_minus.clone(), self.omega_plus.clone())
            .expect("blocks share dimensions")
            .to_full()
    }

    /// Blocks K₂ and K₃ of the classical drive coupling.
    fn k_blocks_23(&self) -> (CMat, CMat) {
        let (n, l) = (self.n, self.l);
        (
            self.k_drive.view((0, l), (n, l)).into_owned(),
            self.k_drive.view((n, 0), (n, l)).into_owned(),
        )
    }
}

/// Whether the system is passive: C₊ = 0, Ω₊ = 0 and K₂ = K₃ = 0 within `tol`.
pub fn is_passive(p: &PhysicalParams, tol: f64) -> bool {
    let (k2, k3) = p.k_blocks_23();
    op_norm(&p.c_plus) <= tol
        && op_norm(&p.omega_plus) <= tol
        && op_norm(&k2) <= tol
        && op_norm(&k3) <= tol
}

/// Doubled-up complex state-space model.
#[derive(Debug)]
pub struct StateSpace {
    pub n: usize,
    pub m: usize,
    pub l: usize,
    pub a: CMat,
    pub b: CMat,
    pub c: CMat,
    pub d: CMat,
    pub e: CMat,
    quad_cache: OnceLock<QuadratureSystem>,
}

impl Clone for StateSpace {
    fn clone(&self) -> Self {
        let cache = OnceLock::new();
        if let Some(q) = self.quad_cache.get() {
            let _ = cache.set(q.clone());
        }
        Self {
            n: self.n,
            m: self.m,
            l: self.l,
            a: self.a.clone(),
            b: self.b.clone(),
            c: self.c.clone(),
            d: self.d.clone(),
            e: self.e.clone(),
            quad_cache: cache,
        }
    }
}

impl StateSpace {
    pub fn new(n: usize, m: usize, l: usize, a: CMat, b: CMat, c: CMat, d: CMat, e: CMat) -> Result<Self> {
        if a.shape() != (2 * n, 2 * n)
            || b.shape() != (2 * n, 2 * m)
            || c.shape() != (2 * m, 2 * n)
            || d.shape() != (2 * m, 2 * m)
            || e.shape() != (2 * n, 2 * l)
        {
            return Err(Error::Dimension(
                "state-space matrices do not conform to (n, m, l)".into(),
            ));
        }
        Ok(Self {
            n,
            m,
            l,
            a,
            b,
            c,
            d,
            e,
            quad_cache: OnceLock::new(),
        })
    }

    /// Quadrature form, computed on first use and cached.
    pub fn quadrature(&self) -> Result<&QuadratureSystem> {
        if self.quad_cache.get().is_none() {
            let q = to_quadrature(self)?;
            let _ = self.quad_cache.set(q);
        }
        Ok(self.quad_cache.get().expect("cache populated above"))
    }
}

/// Real quadrature state-space model.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureSystem {
    pub n: usize,
    pub m: usize,
    pub l: usize,
    pub a: RMat,
    pub b: RMat,
    pub c: RMat,
    pub d: RMat,
    pub e: RMat,
}

impl QuadratureSystem {
    pub fn new(n: usize, m: usize, l: usize, a: RMat, b: RMat, c: RMat, d: RMat, e: RMat) -> Result<Self> {
        if a.shape() != (2 * n, 2 * n)
            || b.shape() != (2 * n, 2 * m)
            || c.shape() != (2 * m, 2 * n)
            || d.shape() != (2 * m, 2 * m)
            || e.shape() != (2 * n, 2 * l)
        {
            return Err(Error::Dimension(
                "quadrature matrices do not conform to (n, m, l)".into(),
            ));
        }
        Ok(Self { n, m, l, a, b, c, d, e })
    }

    /// Residual of 𝔻 𝔻^♯ = I.
    pub fn dd_sharp_residual(&self) -> f64 {
        let d = to_complex(&self.d);
        let ds = algebra::sharp_adjoint(&d).expect("d has even dimensions");
        op_norm(&(&d * ds - CMat::identity(2 * self.m, 2 * self.m)))
    }
}

/// Builds the doubled-up model per the standard construction:
/// 𝒟 = Δ(S, 0), 𝒞 = Δ(C₋, C₊), ℬ = -𝒞^♭𝒟, 𝒜 = -i J_n Ω - ½ 𝒞^♭𝒞,
/// ℰ = -i (J_n K + 𝕁_n K^# [[0, I_l], [I_l, 0]]).
pub fn build_state_space(p: &PhysicalParams) -> Result<StateSpace> {
    p.validate(algebra::DEFAULT_TOL)?;
    let (n, m, l) = (p.n, p.m, p.l);
    let d = DoubledMatrix::new(p.s.clone(), CMat::zeros(m, m))?.to_full();
    let c = DoubledMatrix::new(p.c_minus.clone(), p.c_plus.clone())?.to_full();
    let c_flat = flat_adjoint(&c)?;
    let b = -(&c_flat * &d);
    let i = C64::new(0.0, 1.0);
    let a = (j_metric(n) * p.omega()) * (-i) - (&c_flat * &c) * C64::new(0.5, 0.0);
    let e = if l == 0 {
        CMat::zeros(2 * n, 0)
    } else {
        let mut swap = CMat::zeros(2 * l, 2 * l);
        for idx in 0..l {
            swap[(idx, l + idx)] = C64::new(1.0, 0.0);
            swap[(l + idx, idx)] = C64::new(1.0, 0.0);
        }
        (j_metric(n) * &p.k_drive + j_symplectic(n) * p.k_drive.map(|z| z.conj()) * swap) * (-i)
    };
    StateSpace::new(n, m, l, a, b, c, d, e)
}

/// Physical realizability report for the two conditions
/// 𝒜 + 𝒜^♭ + ℬℬ^♭ = 0 and ℬ = -𝒞^♭𝒟.
#[derive(Debug, Clone)]
pub struct RealizabilityReport {
    pub residual_a: f64,
    pub residual_b: f64,
    pub passes: bool,
    /// Set when the system is annihilation-only and the passive-form
    /// conditions A + A† + BB† = 0, B = -C†S were additionally evaluated.
    pub passive_variant_used: bool,
    pub passive_residual_a: Option<f64>,
    pub passive_residual_b: Option<f64>,
    pub tol: f64,
}

pub fn check_realizability(ss: &StateSpace, tol: f64) -> RealizabilityReport {
    let a_flat = flat_adjoint(&ss.a).expect("even dims");
    let b_flat = flat_adjoint(&ss.b).expect("even dims");
    let c_flat = flat_adjoint(&ss.c).expect("even dims");
    let residual_a = op_norm(&(&ss.a + a_flat + &ss.b * b_flat));
    let residual_b = op_norm(&(&ss.b + c_flat * &ss.d));

    // Annihilation-only detection: all upper-right (creation) blocks vanish.
    let (n, m) = (ss.n, ss.m);
    let ur = |x: &CMat, rows: usize, cols: usize| x.view((0, cols), (rows, cols)).into_owned();
    let creation = op_norm(&ur(&ss.a, n, n))
        .max(op_norm(&ur(&ss.b, n, m)))
        .max(op_norm(&ur(&ss.c, m, n)))
        .max(op_norm(&ur(&ss.d, m, m)));
    let (passive_variant_used, passive_residual_a, passive_residual_b) = if creation <= tol {
        let a = ss.a.view((0, 0), (n, n)).into_owned();
        let b = ss.b.view((0, 0), (n, m)).into_owned();
        let c = ss.c.view((0, 0), (m, n)).into_owned();
        let s = ss.d.view((0, 0), (m, m)).into_owned();
        let ra = op_norm(&(&a + a.adjoint() + &b * b.adjoint()));
        let rb = op_norm(&(&b + c.adjoint() * s));
        (true, Some(ra), Some(rb))
    } else {
        (false, None, None)
    };

    RealizabilityReport {
        residual_a,
        residual_b,
        passes: residual_a <= tol && residual_b <= tol,
        passive_variant_used,
        passive_residual_a,
        passive_residual_b,
        tol,
    }
}

/// Maximum imaginary part left over after the quadrature basis change; must be
/// round-off-small for genuinely doubled-up inputs.
const IMAG_RESIDUE_LIMIT: f64 = 1e-9;

fn vk_or_empty(k: usize) -> Result<CMat> {
    if k == 0 {
        Ok(CMat::zeros(0, 0))
    } else {
        Ok(quad_basis(k)?.matrix)
    }
}

/// Converts to the real quadrature representation by conjugation with V_k.
pub fn to_quadrature(ss: &StateSpace) -> Result<QuadratureSystem> {
    let (n, m, l) = (ss.n, ss.m, ss.l);
    let vn = vk_or_empty(n)?;
    let vm = vk_or_empty(m)?;
    let a = &vn * &ss.a * vn.adjoint();
    let b = &vn * &ss.b * vm.adjoint();
    let c = &vm * &ss.c * vn.adjoint();
    let d = &vm * &ss.d * vm.adjoint();
    let e = if l == 0 {
        CMat::zeros(2 * n, 0)
    } else {
        let vl = quad_basis(l)?.matrix;
        &vn * &ss.e * vl.adjoint()
    };
    let residue = [&a, &b, &c, &d, &e]
        .iter()
        .map(|x| op_norm(&imag_part(x).map(|v| C64::new(v, 0.0))))
        .fold(0.0f64, f64::max);
    if residue > IMAG_RESIDUE_LIMIT {
        return Err(Error::Structure(format!(
            "input is not doubled-up: imaginary residue {residue:.3e} after basis change"
        )));
    }
    QuadratureSystem::new(
        n,
        m,
        l,
        real_part(&a),
        real_part(&b),
        real_part(&c),
        real_part(&d),
        real_part(&e),
    )
}

/// Inverse of [`to_quadrature`]: conjugation with V_k†.
pub fn from_quadrature(qs: &QuadratureSystem) -> Result<StateSpace> {
    let (n, m, l) = (qs.n, qs.m, qs.l);
    let vn = vk_or_empty(n)?;
    let vm = vk_or_empty(m)?;
    let a = vn.adjoint() * to_complex(&qs.a) * &vn;
    let b = vn.adjoint() * to_complex(&qs.b) * &vm;
    let c = vm.adjoint() * to_complex(&qs.c) * &vn;
    let d = vm.adjoint() * to_complex(&qs.d) * &vm;
    let e = if l == 0 {
        CMat::zeros(2 * n, 0)
    } else {
        let vl = quad_basis(l)?.matrix;
        vn.adjoint() * to_complex(&qs.e) * &vl
    };
    for (name, x) in [("A", &a), ("B", &b), ("C", &c), ("D", &d)] {
        let res = algebra::doubled_residual(x)?;
        if res > IMAG_RESIDUE_LIMIT {
            return Err(Error::Structure(format!(
                "{name} fails the doubled-up check after inverse basis change: residual {res:.3e}"
            )));
        }
    }
    StateSpace::new(n, m, l, a, b, c, d, e)
}

/// Transfer function Ξ_G[s] = 𝒞 (sI - 𝒜)⁻¹ ℬ + 𝒟, together with an estimate
/// of the resolvent condition number.
pub fn transfer_function(ss: &StateSpace, s: C64) -> Result<(CMat, f64)> {
    let dim = 2 * ss.n;
    if dim == 0 {
        return Ok((ss.d.clone(), 1.0));
    }
    if let Some(eigs) = ss.a.clone().eigenvalues() {
        let dist = eigs.iter().map(|l| (s - l).norm()).fold(f64::INFINITY, f64::min);
        if dist <= 1e-12 {
            return Err(Error::Singular(format!(
                "s = {s} is within 1e-12 of the spectrum of A"
            )));
        }
    }
    let m = CMat::identity(dim, dim) * s - &ss.a;
    let sv = crate::linalg::singular_values(&m);
    let (smax, smin) = (sv[0], sv[sv.len() - 1]);
    let inv = m
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Singular("resolvent inversion failed".into()))?;
    Ok((&ss.c * inv * &ss.b + &ss.d, smax / smin.max(1e-300)))
}

/// Smooth part and delta weight of the impulse response
/// g_G(t) = δ(t) 𝒟 - 𝒞 e^{𝒜 t} 𝒞^♭ 𝒟 for t ≥ 0, zero for t < 0.
#[derive(Debug, Clone)]
pub struct ImpulseResponse {
    pub smooth: CMat,
    pub delta_weight: CMat,
}

pub fn impulse_response(ss: &StateSpace, t: f64) -> ImpulseResponse {
    let m2 = 2 * ss.m;
    if t < 0.0 {
        return ImpulseResponse {
            smooth: CMat::zeros(m2, m2),
            delta_weight: CMat::zeros(m2, m2),
        };
    }
    let expm = (ss.a.clone() * C64::new(t, 0.0)).exp();
    let c_flat = flat_adjoint(&ss.c).expect("even dims");
    ImpulseResponse {
        smooth: -(&ss.c * expm * c_flat * &ss.d),
        delta_weight: ss.d.clone(),
    }
}

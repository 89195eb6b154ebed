//! Doubled-up matrix algebra.
//!
//! The structured objects of linear quantum dynamics: doubled-up matrices
//! Δ(U,V) = [[U, V], [V*, U*]], the ♭- and ♯-adjoints they induce, the
//! Bogoliubov and symplectic predicates, and the unitary V_k that maps
//! annihilation/creation pairs to real quadratures.

use crate::error::{Error, Result};
use crate::linalg::{op_norm, C64, CMat};

/// Default tolerance for all structural predicates in this crate.
pub const DEFAULT_TOL: f64 = 1e-10;

/// J_k = diag(I_k, -I_k), the metric of the ♭-adjoint.
pub fn j_metric(k: usize) -> CMat {
    let mut m = CMat::identity(2 * k, 2 * k);
    for i in k..2 * k {
        m[(i, i)] = C64::new(-1.0, 0.0);
    }
    m
}

/// 𝕁_k = [[0, I_k], [-I_k, 0]], the metric of the ♯-adjoint.
pub fn j_symplectic(k: usize) -> CMat {
    let mut m = CMat::zeros(2 * k, 2 * k);
    for i in 0..k {
        m[(i, k + i)] = C64::new(1.0, 0.0);
        m[(k + i, i)] = C64::new(-1.0, 0.0);
    }
    m
}

/// Real version of [`j_symplectic`].
pub fn j_symplectic_real(k: usize) -> crate::linalg::RMat {
    let mut m = crate::linalg::RMat::zeros(2 * k, 2 * k);
    for i in 0..k {
        m[(i, k + i)] = 1.0;
        m[(k + i, i)] = -1.0;
    }
    m
}

fn check_even(rows: usize, cols: usize, what: &str) -> Result<(usize, usize)> {
    if rows % 2 != 0 || cols % 2 != 0 {
        return Err(Error::Dimension(format!(
            "{what}: expected even dimensions, got {rows}x{cols}"
        )));
    }
    Ok((rows / 2, cols / 2))
}

/// ♭-adjoint X^♭ = J_r X† J_k of a 2k×2r matrix.
pub fn flat_adjoint(x: &CMat) -> Result<CMat> {
    let (k, r) = check_even(x.nrows(), x.ncols(), "flat_adjoint")?;
    Ok(j_metric(r) * x.adjoint() * j_metric(k))
}

/// ♯-adjoint X^♯ = -𝕁_r X† 𝕁_k of a 2k×2r matrix.
pub fn sharp_adjoint(x: &CMat) -> Result<CMat> {
    let (k, r) = check_even(x.nrows(), x.ncols(), "sharp_adjoint")?;
    Ok(-j_symplectic(r) * x.adjoint() * j_symplectic(k))
}

/// A doubled-up matrix stored by its two defining blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct DoubledMatrix {
    u: CMat,
    v: CMat,
}

impl DoubledMatrix {
    pub fn new(u: CMat, v: CMat) -> Result<Self> {
        if u.shape() != v.shape() {
            return Err(Error::Dimension(format!(
                "doubled blocks differ: {}x{} vs {}x{}",
                u.nrows(),
                u.ncols(),
                v.nrows(),
                v.ncols()
            )));
        }
        Ok(Self { u, v })
    }

    pub fn identity(k: usize) -> Self {
        Self {
            u: CMat::identity(k, k),
            v: CMat::zeros(k, k),
        }
    }

    /// Extracts blocks from a full 2k×2r matrix, averaging the redundant
    /// copies; the returned residual measures how far the input was from
    /// exact doubled-up structure.
    pub fn from_full(x: &CMat) -> Result<(Self, f64)> {
        let (k, r) = check_even(x.nrows(), x.ncols(), "DoubledMatrix::from_full")?;
        let x11 = x.view((0, 0), (k, r)).into_owned();
        let x12 = x.view((0, r), (k, r)).into_owned();
        let x21 = x.view((k, 0), (k, r)).into_owned();
        let x22 = x.view((k, r), (k, r)).into_owned();
        let u = (&x11 + x22.map(|z| z.conj())) * C64::new(0.5, 0.0);
        let v = (&x12 + x21.map(|z| z.conj())) * C64::new(0.5, 0.0);
        let res = op_norm(&(&x11 - x22.map(|z| z.conj())))
            .max(op_norm(&(&x12 - x21.map(|z| z.conj()))));
        Ok((Self { u, v }, res))
    }

    pub fn to_full(&self) -> CMat {
        let (k, r) = self.u.shape();
        let mut out = CMat::zeros(2 * k, 2 * r);
        out.view_mut((0, 0), (k, r)).copy_from(&self.u);
        out.view_mut((0, r), (k, r)).copy_from(&self.v);
        out.view_mut((k, 0), (k, r))
            .copy_from(&self.v.map(|z| z.conj()));
        out.view_mut((k, r), (k, r))
            .copy_from(&self.u.map(|z| z.conj()));
        out
    }

    pub fn upper_left(&self) -> &CMat {
        &self.u
    }

    pub fn upper_right(&self) -> &CMat {
        &self.v
    }

    pub fn block_dims(&self) -> (usize, usize) {
        self.u.shape()
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.u.shape() != other.u.shape() {
            return Err(Error::Dimension("doubled add: shape mismatch".into()));
        }
        Ok(Self {
            u: &self.u + &other.u,
            v: &self.v + &other.v,
        })
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.u.ncols() != other.u.nrows() {
            return Err(Error::Dimension("doubled mul: shape mismatch".into()));
        }
        // Δ(U1,V1)Δ(U2,V2) = Δ(U1 U2 + V1 V2*, U1 V2 + V1 U2*)
        Ok(Self {
            u: &self.u * &other.u + &self.v * other.v.map(|z| z.conj()),
            v: &self.u * &other.v + &self.v * other.u.map(|z| z.conj()),
        })
    }

    /// Blockwise ♭-adjoint: Δ(U,V)^♭ = Δ(U†, -Vᵀ).
    pub fn flat(&self) -> Self {
        Self {
            u: self.u.adjoint(),
            v: -self.v.transpose(),
        }
    }
}

/// Residual of the doubled-up structure test on a raw matrix.
pub fn doubled_residual(x: &CMat) -> Result<f64> {
    DoubledMatrix::from_full(x).map(|(_, r)| r)
}

#[derive(Debug, Clone)]
pub struct BogoliubovCheck {
    pub passes: bool,
    pub doubled_residual: f64,
    pub left_residual: f64,
    pub right_residual: f64,
}

/// T is Bogoliubov iff it is doubled-up and T T^♭ = T^♭ T = I.
pub fn is_bogoliubov(t: &CMat, tol: f64) -> Result<BogoliubovCheck> {
    if t.nrows() != t.ncols() {
        return Err(Error::Dimension("is_bogoliubov: matrix not square".into()));
    }
    let dres = doubled_residual(t)?;
    let tf = flat_adjoint(t)?;
    let n = t.nrows();
    let eye = CMat::identity(n, n);
    let left = op_norm(&(t * &tf - &eye));
    let right = op_norm(&(&tf * t - &eye));
    Ok(BogoliubovCheck {
        passes: dres <= tol && left <= tol && right <= tol,
        doubled_residual: dres,
        left_residual: left,
        right_residual: right,
    })
}

#[derive(Debug, Clone)]
pub struct SymplecticCheck {
    pub passes: bool,
    pub left_residual: f64,
    pub right_residual: f64,
}

/// S is symplectic iff S S^♯ = S^♯ S = I.
pub fn is_symplectic(s: &CMat, tol: f64) -> Result<SymplecticCheck> {
    if s.nrows() != s.ncols() {
        return Err(Error::Dimension("is_symplectic: matrix not square".into()));
    }
    let ss = sharp_adjoint(s)?;
    let n = s.nrows();
    let eye = CMat::identity(n, n);
    let left = op_norm(&(s * &ss - &eye));
    let right = op_norm(&(&ss * s - &eye));
    Ok(SymplecticCheck {
        passes: left <= tol && right <= tol,
        left_residual: left,
        right_residual: right,
    })
}

pub fn is_symplectic_real(s: &crate::linalg::RMat, tol: f64) -> Result<SymplecticCheck> {
    is_symplectic(&crate::linalg::to_complex(s), tol)
}

/// The change-of-basis unitary V_k = (1/√2) [[I, I], [-iI, iI]] between the
/// doubled annihilation/creation picture and real quadratures.
#[derive(Debug, Clone)]
pub struct QuadBasisUnitary {
    pub k: usize,
    pub matrix: CMat,
}

impl QuadBasisUnitary {
    pub fn unitarity_residual(&self) -> f64 {
        let n = 2 * self.k;
        op_norm(&(&self.matrix * self.matrix.adjoint() - CMat::identity(n, n)))
    }
}

pub fn quad_basis(k: usize) -> Result<QuadBasisUnitary> {
    if k == 0 {
        return Err(Error::Dimension("quad_basis: k must be >= 1".into()));
    }
    let s = 1.0 / 2.0f64.sqrt();
    let mut m = CMat::zeros(2 * k, 2 * k);
    for i in 0..k {
        m[(i, i)] = C64::new(s, 0.0);
        m[(i, k + i)] = C64::new(s, 0.0);
        m[(k + i, i)] = C64::new(0.0, -s);
        m[(k + i, k + i)] = C64::new(0.0, s);
    }
    Ok(QuadBasisUnitary { k, matrix: m })
}

//! Structural analysis: stability, controllability/observability, the quantum
//! Kalman canonical decomposition, and back-action evasion tests.
//!
//! The decomposition splits the quadrature coordinates into
//! (q_h, p_h, x_co, x_c̄ō): the symplectically paired controllable/unobservable
//! and uncontrollable/observable halves, the controllable-and-observable
//! block, and the decoherence-free block. The p_h block carries the QND
//! variables and spans the quantum mechanics-free subsystem.

use num_complex::Complex64;

use crate::algebra::{j_symplectic_real, quad_basis};
use crate::error::{Error, Result};
use crate::linalg::{
    intersect_subspaces, max_abs, op_norm, op_norm_r, orthogonal_complement, range_basis,
    sign_fix_columns, to_complex, C64, CMat, RMat,
};
use crate::model::{check_realizability, from_quadrature, QuadratureSystem};

/// Default relative SVD threshold for subspace ranks.
pub const RANK_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct SpectralReport {
    pub is_hurwitz: bool,
    /// max Re λ(𝔸)
    pub abscissa: f64,
}

/// Hurwitz stability of the mean dynamics: max Re λ(𝔸) < -tol. A system
/// without oscillators is vacuously stable.
pub fn is_hurwitz(qs: &QuadratureSystem, tol: f64) -> SpectralReport {
    if qs.n == 0 {
        return SpectralReport {
            is_hurwitz: true,
            abscissa: f64::NEG_INFINITY,
        };
    }
    let eig = qs.a.complex_eigenvalues();
    let abscissa = eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    SpectralReport {
        is_hurwitz: abscissa < -tol,
        abscissa,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubspaceLabel {
    Controllable,
    Observable,
    Co,
    CObar,
    CbarO,
    CbarObar,
}

#[derive(Debug, Clone)]
pub struct SubspaceBasis {
    /// Orthonormal columns, 2n×d.
    pub columns: RMat,
    pub label: SubspaceLabel,
    pub singular_values: Vec<f64>,
}

fn controllability_matrix(qs: &QuadratureSystem) -> RMat {
    let dim = 2 * qs.n;
    let cols = 2 * qs.m;
    let mut blocks = RMat::zeros(dim, dim * cols.max(1));
    if cols == 0 {
        return RMat::zeros(dim, 0);
    }
    let mut cur = qs.b.clone();
    for k in 0..dim {
        blocks.view_mut((0, k * cols), (dim, cols)).copy_from(&cur);
        cur = &qs.a * cur;
    }
    blocks
}

fn observability_matrix_t(qs: &QuadratureSystem) -> RMat {
    // Transposed observability matrix: columns span the observable subspace.
    let dim = 2 * qs.n;
    let rows = 2 * qs.m;
    if rows == 0 {
        return RMat::zeros(dim, 0);
    }
    let mut blocks = RMat::zeros(dim, dim * rows);
    let mut cur = qs.c.transpose();
    let at = qs.a.transpose();
    for k in 0..dim {
        blocks.view_mut((0, k * rows), (dim, rows)).copy_from(&cur);
        cur = &at * cur;
    }
    blocks
}

/// Orthonormal basis of range[𝔹, 𝔸𝔹, …, 𝔸^{2n-1}𝔹].
pub fn controllable_subspace(qs: &QuadratureSystem, tol: f64) -> SubspaceBasis {
    let (columns, sv) = range_basis(&controllability_matrix(qs), tol);
    SubspaceBasis {
        columns,
        label: SubspaceLabel::Controllable,
        singular_values: sv,
    }
}

/// Orthonormal basis of the observable subspace (range of the transposed
/// observability matrix).
pub fn observable_subspace(qs: &QuadratureSystem, tol: f64) -> SubspaceBasis {
    let (columns, sv) = range_basis(&observability_matrix_t(qs), tol);
    SubspaceBasis {
        columns,
        label: SubspaceLabel::Observable,
        singular_values: sv,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KalmanDims {
    pub n_h: usize,
    pub n_co: usize,
    pub n_cbar_obar: usize,
}

#[derive(Debug, Clone)]
pub struct KalmanDecomposition {
    /// Real orthogonal, blockwise symplectic; new coordinates are x̃ = Tᵀ x,
    /// ordered (q_h, p_h, x_co, x_c̄ō).
    pub t: RMat,
    pub dims: KalmanDims,
    pub a_bar: RMat,
    pub b_bar: RMat,
    pub c_bar: RMat,
    /// Transformed Hamiltonian quadratic form Tᵀ ℍ T.
    pub h_bar: RMat,
    pub n: usize,
    pub m: usize,
    pub qnd_indices: Vec<usize>,
    pub qmfs_indices: Vec<usize>,
    pub dfs_indices: Vec<usize>,
    pub zero_pattern_residual: f64,
    pub orthogonality_residual: f64,
    pub symplectic_residual: f64,
    pub rank_warnings: Vec<String>,
    /// True when the scattering matrix was absorbed into the field basis
    /// before decomposing (the canonical form assumes S = I).
    pub scattering_absorbed: bool,
}

impl KalmanDecomposition {
    pub fn qh_range(&self) -> std::ops::Range<usize> {
        0..self.dims.n_h
    }
    pub fn ph_range(&self) -> std::ops::Range<usize> {
        self.dims.n_h..2 * self.dims.n_h
    }
    pub fn co_range(&self) -> std::ops::Range<usize> {
        2 * self.dims.n_h..2 * self.dims.n_h + 2 * self.dims.n_co
    }
    pub fn cbar_obar_range(&self) -> std::ops::Range<usize> {
        2 * self.dims.n_h + 2 * self.dims.n_co..2 * self.n
    }
}

fn block(m: &RMat, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> RMat {
    m.view((rows.start, cols.start), (rows.len(), cols.len())).into_owned()
}

/// Recovers the quadrature Hamiltonian ℍ from 𝔸 = 𝕁ℍ - ½ℂ^♯ℂ.
pub fn hamiltonian_from_quadrature(qs: &QuadratureSystem) -> RMat {
    let j = j_symplectic_real(qs.n);
    let jm = j_symplectic_real(qs.m);
    // ℂ^♯ = -𝕁_n ℂᵀ 𝕁_m for real ℂ
    let c_sharp = -&j * qs.c.transpose() * &jm;
    let jh = &qs.a + c_sharp * &qs.c * 0.5;
    let h = -j * jh;
    (&h + h.transpose()) * 0.5
}

/// Symplectic Gram–Schmidt inside a 𝕁-invariant subspace: returns (Q, P)
/// with columns orthonormal, Qᵀ𝕁P = I, pairs spanning the subspace.
fn symplectic_pairs(basis: &RMat, j: &RMat, tol: f64) -> Result<(RMat, RMat)> {
    let dim = basis.nrows();
    let total = basis.ncols();
    if total % 2 != 0 {
        return Err(Error::Precondition(format!(
            "subspace of odd dimension {total} cannot be symplectically paired"
        )));
    }
    let pairs = total / 2;
    let mut qcols = RMat::zeros(dim, pairs);
    let mut pcols = RMat::zeros(dim, pairs);
    let mut taken = RMat::zeros(dim, 0);
    for k in 0..pairs {
        // candidate: component of the subspace orthogonal to everything taken
        let mut cand = None;
        for j_col in 0..total {
            let mut v = basis.column(j_col).into_owned();
            if taken.ncols() > 0 {
                v -= &taken * (taken.transpose() * &v);
            }
            let norm = v.norm();
            if norm > tol.max(1e-8) {
                cand = Some(v / norm);
                break;
            }
        }
        let u = cand.ok_or_else(|| {
            Error::Precondition("symplectic pairing exhausted candidate vectors".into())
        })?;
        let v = -(j * &u);
        // v must stay inside the subspace for the pairing to be valid
        let proj = basis * (basis.transpose() * &v);
        if (&proj - &v).norm() > 1e-6 {
            return Err(Error::Precondition(
                "subspace is not 𝕁-invariant; input system is not physically realizable".into(),
            ));
        }
        qcols.set_column(k, &u);
        pcols.set_column(k, &v);
        let mut new_taken = RMat::zeros(dim, taken.ncols() + 2);
        new_taken.view_mut((0, 0), (dim, taken.ncols())).copy_from(&taken);
        new_taken.set_column(taken.ncols(), &u);
        new_taken.set_column(taken.ncols() + 1, &v);
        taken = new_taken;
    }
    Ok((qcols, pcols))
}

/// Quantum Kalman canonical decomposition.
///
/// `tol` is the relative SVD threshold for subspace ranks (see [`RANK_TOL`]).
pub fn kalman_decompose(qs: &QuadratureSystem, tol: f64) -> Result<KalmanDecomposition> {
    let n = qs.n;
    let dim = 2 * n;

    // Realizability precondition.
    let ss = from_quadrature(qs)?;
    let rep = check_realizability(&ss, 1e-8);
    if !rep.passes {
        return Err(Error::Precondition(format!(
            "input system is not physically realizable (residuals {:.3e}, {:.3e})",
            rep.residual_a, rep.residual_b
        )));
    }

    // The canonical form assumes S = I; absorb a nontrivial scattering matrix
    // into the field basis (ℂ ← 𝔻ᵀℂ, 𝔻 ← I leaves 𝔸 and 𝔹 unchanged).
    let mut sys = qs.clone();
    let eye_out = RMat::identity(2 * qs.m, 2 * qs.m);
    let scattering_absorbed = op_norm_r(&(&qs.d - &eye_out)) > 1e-12;
    if scattering_absorbed {
        sys.c = qs.d.transpose() * &qs.c;
        sys.d = eye_out;
    }

    let ctrb = controllable_subspace(&sys, tol);
    let obsv = observable_subspace(&sys, tol);

    let mut rank_warnings = Vec::new();
    for (name, basis) in [("controllability", &ctrb), ("observability", &obsv)] {
        let sv = &basis.singular_values;
        let smax = sv.iter().cloned().fold(0.0f64, f64::max);
        if smax > 0.0 {
            let thresh = tol * smax;
            for &s in sv {
                if s > thresh && s < 10.0 * thresh {
                    rank_warnings.push(format!(
                        "{name} singular value {s:.3e} within a factor 10 of threshold {thresh:.3e}; \
                         rank may be ambiguous"
                    ));
                }
            }
        }
    }

    let ctrb_perp = orthogonal_complement(&ctrb.columns, dim);
    let obsv_perp = orthogonal_complement(&obsv.columns, dim);

    let itol = 1e-7;
    let r_co = intersect_subspaces(&ctrb.columns, &obsv.columns, itol);
    let r_cbar_obar = intersect_subspaces(&ctrb_perp, &obsv_perp, itol);
    let r_c_obar = intersect_subspaces(&ctrb.columns, &obsv_perp, itol);
    let r_cbar_o = intersect_subspaces(&ctrb_perp, &obsv.columns, itol);

    let n_h = r_c_obar.ncols();
    if r_cbar_o.ncols() != n_h {
        return Err(Error::Precondition(format!(
            "controllable/unobservable ({}-dim) and uncontrollable/observable ({}-dim) \
             subspaces do not pair; rank thresholds may need adjustment",
            n_h,
            r_cbar_o.ncols()
        )));
    }
    if r_co.ncols() % 2 != 0 || r_cbar_obar.ncols() % 2 != 0 {
        return Err(Error::Precondition(
            "co / c̄ō subspaces have odd dimension; not a realizable quantum system".into(),
        ));
    }
    let n_co = r_co.ncols() / 2;
    let n_cbar_obar = r_cbar_obar.ncols() / 2;
    if 2 * n_h + 2 * n_co + 2 * n_cbar_obar != dim {
        return Err(Error::Precondition(format!(
            "subspace dimensions 2·{n_h} + 2·{n_co} + 2·{n_cbar_obar} do not fill 2n = {dim}; \
             rank decision is ambiguous"
        )));
    }

    let j = j_symplectic_real(n);

    // h block: q_h spans R_cō; p_h = -𝕁 q_h spans R_c̄o and the pairing
    // Tᵀ𝕁T is canonical on the block.
    let mut t_qh = r_c_obar.clone();
    sign_fix_columns(&mut t_qh);
    let t_ph = -(&j * &t_qh);
    if n_h > 0 {
        let proj = &r_cbar_o * (r_cbar_o.transpose() * &t_ph);
        if op_norm_r(&(&proj - &t_ph)) > 1e-6 {
            return Err(Error::Precondition(
                "𝕁·R_cō does not coincide with R_c̄o; input is not a realizable quantum system"
                    .into(),
            ));
        }
    }

    let (co_q, co_p) = symplectic_pairs(&r_co, &j, tol)?;
    let (dfs_q, dfs_p) = symplectic_pairs(&r_cbar_obar, &j, tol)?;

    let mut t = RMat::zeros(dim, dim);
    for k in 0..n_h {
        t.set_column(k, &t_qh.column(k));
        t.set_column(n_h + k, &t_ph.column(k));
    }
    for k in 0..n_co {
        t.set_column(2 * n_h + k, &co_q.column(k));
        t.set_column(2 * n_h + n_co + k, &co_p.column(k));
    }
    for k in 0..n_cbar_obar {
        t.set_column(2 * n_h + 2 * n_co + k, &dfs_q.column(k));
        t.set_column(2 * n_h + 2 * n_co + n_cbar_obar + k, &dfs_p.column(k));
    }

    let orthogonality_residual = op_norm_r(&(t.transpose() * &t - RMat::identity(dim, dim)));

    // Blockwise symplectic: Tᵀ𝕁T must equal diag(𝕁_{n_h}, 𝕁_{n_co}, 𝕁_{n_c̄ō}).
    let mut j_blocks = RMat::zeros(dim, dim);
    let mut offset = 0;
    for sz in [n_h, n_co, n_cbar_obar] {
        if sz > 0 {
            j_blocks
                .view_mut((offset, offset), (2 * sz, 2 * sz))
                .copy_from(&j_symplectic_real(sz));
        }
        offset += 2 * sz;
    }
    let symplectic_residual = op_norm_r(&(t.transpose() * &j * &t - &j_blocks));

    let a_bar = t.transpose() * &sys.a * &t;
    let b_bar = t.transpose() * &sys.b;
    let c_bar = &sys.c * &t;
    let h = hamiltonian_from_quadrature(&sys);
    let h_bar = t.transpose() * h * &t;

    let dims = KalmanDims {
        n_h,
        n_co,
        n_cbar_obar,
    };
    let kd = KalmanDecomposition {
        t,
        dims,
        a_bar,
        b_bar,
        c_bar,
        h_bar,
        n,
        m: qs.m,
        qnd_indices: (n_h..2 * n_h).collect(),
        qmfs_indices: (n_h..2 * n_h).collect(),
        dfs_indices: (2 * n_h + 2 * n_co..dim).collect(),
        zero_pattern_residual: 0.0,
        orthogonality_residual,
        symplectic_residual,
        rank_warnings,
        scattering_absorbed,
    };
    let zero_pattern_residual = zero_pattern_residual(&kd);
    Ok(KalmanDecomposition {
        zero_pattern_residual,
        ..kd
    })
}

/// Largest entry that the canonical zero pattern requires to vanish.
pub fn zero_pattern_residual(kd: &KalmanDecomposition) -> f64 {
    let qh = kd.qh_range();
    let ph = kd.ph_range();
    let co = kd.co_range();
    let dfs = kd.cbar_obar_range();
    let mut res: f64 = 0.0;
    // p_h rows: only the A_h²² block may be nonzero.
    res = res.max(max_abs(&block(&kd.a_bar, ph.clone(), qh.clone())));
    res = res.max(max_abs(&block(&kd.a_bar, ph.clone(), co.clone())));
    res = res.max(max_abs(&block(&kd.a_bar, ph.clone(), dfs.clone())));
    // co rows: zero against q_h and x_c̄ō.
    res = res.max(max_abs(&block(&kd.a_bar, co.clone(), qh.clone())));
    res = res.max(max_abs(&block(&kd.a_bar, co.clone(), dfs.clone())));
    // c̄ō rows: zero against q_h and x_co.
    res = res.max(max_abs(&block(&kd.a_bar, dfs.clone(), qh.clone())));
    res = res.max(max_abs(&block(&kd.a_bar, dfs.clone(), co.clone())));
    // B rows of p_h and x_c̄ō vanish.
    let bcols = 0..kd.b_bar.ncols();
    res = res.max(max_abs(&block(&kd.b_bar, ph.clone(), bcols.clone())));
    res = res.max(max_abs(&block(&kd.b_bar, dfs.clone(), bcols)));
    // C columns of q_h and x_c̄ō vanish.
    let crows = 0..kd.c_bar.nrows();
    res = res.max(max_abs(&block(&kd.c_bar, crows.clone(), qh)));
    res = res.max(max_abs(&block(&kd.c_bar, crows, dfs)));
    res
}

/// Named sub-blocks of the canonical form, i.e. the cascade structure of the
/// rearranged dynamics (q_h, x_co, x_c̄ō upper-triangular over p_h).
#[derive(Debug, Clone)]
pub struct DecomposedDynamics {
    pub a_h11: RMat,
    pub a_h12: RMat,
    pub a_h22: RMat,
    pub a_12: RMat,
    pub a_13: RMat,
    pub a_21: RMat,
    pub a_31: RMat,
    pub a_co: RMat,
    pub a_cbar_obar: RMat,
    pub b_h: RMat,
    pub b_co: RMat,
    pub c_h: RMat,
    pub c_co: RMat,
}

pub fn decomposed_dynamics(kd: &KalmanDecomposition) -> DecomposedDynamics {
    let qh = kd.qh_range();
    let ph = kd.ph_range();
    let co = kd.co_range();
    let dfs = kd.cbar_obar_range();
    let bcols = 0..kd.b_bar.ncols();
    let crows = 0..kd.c_bar.nrows();
    DecomposedDynamics {
        a_h11: block(&kd.a_bar, qh.clone(), qh.clone()),
        a_h12: block(&kd.a_bar, qh.clone(), ph.clone()),
        a_h22: block(&kd.a_bar, ph.clone(), ph.clone()),
        a_12: block(&kd.a_bar, qh.clone(), co.clone()),
        a_13: block(&kd.a_bar, qh.clone(), dfs.clone()),
        a_21: block(&kd.a_bar, co.clone(), ph.clone()),
        a_31: block(&kd.a_bar, dfs.clone(), ph.clone()),
        a_co: block(&kd.a_bar, co.clone(), co.clone()),
        a_cbar_obar: block(&kd.a_bar, dfs.clone(), dfs.clone()),
        b_h: block(&kd.b_bar, qh.clone(), bcols.clone()),
        b_co: block(&kd.b_bar, co.clone(), bcols),
        c_h: block(&kd.c_bar, crows.clone(), ph),
        c_co: block(&kd.c_bar, crows, co),
    }
}

impl std::fmt::Display for DecomposedDynamics {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "q̇_h  = A_h11 q_h + A_12 x_co + A_13 x_c̄ō + A_h12 p_h + B_h u")?;
        writeln!(f, "ẋ_co = A_co x_co + A_21 p_h + B_co u")?;
        writeln!(f, "ẋ_c̄ō = A_c̄ō x_c̄ō + A_31 p_h")?;
        writeln!(f, "ṗ_h  = A_h22 p_h")?;
        writeln!(f, "y    = C_co x_co + C_h p_h + u")?;
        for (name, m) in [
            ("A_h11", &self.a_h11),
            ("A_h12", &self.a_h12),
            ("A_h22", &self.a_h22),
            ("A_12", &self.a_12),
            ("A_13", &self.a_13),
            ("A_21", &self.a_21),
            ("A_31", &self.a_31),
            ("A_co", &self.a_co),
            ("A_c̄ō", &self.a_cbar_obar),
            ("B_h", &self.b_h),
            ("B_co", &self.b_co),
            ("C_h", &self.c_h),
            ("C_co", &self.c_co),
        ] {
            writeln!(f, "{name} = {m:.6}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaeDirection {
    /// Ξ from p_in to q_out vanishes identically.
    PInToQOut,
    /// Ξ from q_in to p_out vanishes identically.
    QInToPOut,
}

#[derive(Debug, Clone)]
pub struct BaeReport {
    pub is_bae: bool,
    /// Largest magnitude of the canonical-form rational expression over the
    /// sample points.
    pub max_residual: f64,
    /// Largest magnitude of the corresponding direct transfer-function block.
    pub direct_max_residual: f64,
    pub skipped: Vec<String>,
    pub tol: f64,
}

/// Extracts Λ_co = V_m† C_co (top m rows are the coupling rows over the co
/// block coordinates, split as [Λ_co,q  Λ_co,p]).
pub fn lambda_co(kd: &KalmanDecomposition) -> Result<CMat> {
    let dd = decomposed_dynamics(kd);
    let vm = quad_basis(kd.m)?.matrix;
    Ok(vm.adjoint() * to_complex(&dd.c_co))
}

/// Extracts Λ_h = V_m† C_h (coupling rows over the p_h coordinates).
pub fn lambda_h(kd: &KalmanDecomposition) -> Result<CMat> {
    let dd = decomposed_dynamics(kd);
    let vm = quad_basis(kd.m)?.matrix;
    Ok(vm.adjoint() * to_complex(&dd.c_h))
}

/// Back-action evasion test via the canonical-form rational expression,
/// cross-checked against the direct transfer-function block.
pub fn check_bae(
    kd: &KalmanDecomposition,
    direction: BaeDirection,
    samples: &[C64],
    tol: f64,
) -> Result<BaeReport> {
    let m = kd.m;
    let n_co = kd.dims.n_co;
    let lam = lambda_co(kd)?;
    // top m rows of Λ_co, columns split into q and p halves of the co block
    let lam_q = lam.view((0, 0), (m, n_co)).into_owned();
    let lam_p = lam.view((0, n_co), (m, n_co)).into_owned();
    let co = kd.co_range();
    let h_co = block(&kd.h_bar, co.clone(), co);

    let (left, right_top, right_bot) = match direction {
        BaeDirection::PInToQOut => (
            (crate::linalg::real_part(&lam_q), crate::linalg::real_part(&lam_p)),
            crate::linalg::real_part(&lam_p).transpose(),
            -crate::linalg::real_part(&lam_q).transpose(),
        ),
        BaeDirection::QInToPOut => (
            (crate::linalg::imag_part(&lam_q), crate::linalg::imag_part(&lam_p)),
            crate::linalg::imag_part(&lam_p).transpose(),
            -crate::linalg::imag_part(&lam_q).transpose(),
        ),
    };
    let mut lrow = RMat::zeros(m, 2 * n_co);
    lrow.view_mut((0, 0), (m, n_co)).copy_from(&left.0);
    lrow.view_mut((0, n_co), (m, n_co)).copy_from(&left.1);
    let mut rcol = RMat::zeros(2 * n_co, m);
    rcol.view_mut((0, 0), (n_co, m)).copy_from(&right_top);
    rcol.view_mut((n_co, 0), (n_co, m)).copy_from(&right_bot);

    let jh = to_complex(&(j_symplectic_real(n_co) * h_co));
    let lrow_c = to_complex(&lrow);
    let rcol_c = to_complex(&rcol);

    let mut skipped = Vec::new();
    let mut max_residual: f64 = 0.0;
    let mut direct_max: f64 = 0.0;
    let dim_co = 2 * n_co;
    for &s in samples {
        // canonical-form expression
        if dim_co > 0 {
            let res_m = CMat::identity(dim_co, dim_co) * s - &jh;
            let sv = crate::linalg::singular_values(&res_m);
            if sv[sv.len() - 1] <= 1e-12 * sv[0].max(1.0) {
                skipped.push(format!("sample {s} lies on the co-block spectrum; skipped"));
                continue;
            }
            let inv = res_m
                .lu()
                .try_inverse()
                .ok_or_else(|| Error::Singular("co-block resolvent".into()))?;
            let val = &lrow_c * inv * &rcol_c;
            max_residual = max_residual.max(op_norm(&val));
        }
        // direct transfer-function block (S = I after normalization, so
        // the D contribution to the off-diagonal quadrature block vanishes)
        let dim = 2 * kd.n;
        let res_full = CMat::identity(dim, dim) * s - to_complex(&kd.a_bar);
        let sv = crate::linalg::singular_values(&res_full);
        if sv[sv.len() - 1] <= 1e-12 * sv[0].max(1.0) {
            skipped.push(format!("sample {s} lies on the full spectrum; skipped"));
            continue;
        }
        let inv = res_full
            .lu()
            .try_inverse()
            .ok_or_else(|| Error::Singular("full resolvent".into()))?;
        let xi = to_complex(&kd.c_bar) * inv * to_complex(&kd.b_bar);
        let blockv = match direction {
            BaeDirection::PInToQOut => xi.view((0, m), (m, m)).into_owned(),
            BaeDirection::QInToPOut => xi.view((m, 0), (m, m)).into_owned(),
        };
        direct_max = direct_max.max(op_norm(&blockv));
    }

    Ok(BaeReport {
        is_bae: max_residual <= tol && direct_max <= tol,
        max_residual,
        direct_max_residual: direct_max,
        skipped,
        tol,
    })
}

#[derive(Debug, Clone)]
pub struct Prop61Report {
    pub ctrb_rank: usize,
    pub obsv_rank: usize,
    pub ranks_equal: bool,
    pub hurwitz: bool,
    /// When Hurwitz: whether both ranks are full.
    pub full_rank_when_hurwitz: Option<bool>,
    /// Largest |Re λ| over the c̄ō block spectrum, when that block is nonempty.
    pub cbar_obar_max_abs_re: Option<f64>,
}

/// Checks the structural facts: controllability and observability ranks agree,
/// Hurwitz stability implies full rank, and the decoherence-free block has a
/// purely imaginary spectrum.
pub fn verify_prop61(qs: &QuadratureSystem, tol: f64) -> Result<Prop61Report> {
    let ctrb = controllable_subspace(qs, tol);
    let obsv = observable_subspace(qs, tol);
    let ctrb_rank = ctrb.columns.ncols();
    let obsv_rank = obsv.columns.ncols();
    let spec = is_hurwitz(qs, 1e-12);
    let full = if spec.is_hurwitz {
        Some(ctrb_rank == 2 * qs.n && obsv_rank == 2 * qs.n)
    } else {
        None
    };
    let kd = kalman_decompose(qs, tol)?;
    let cbar_obar_max_abs_re = if kd.dims.n_cbar_obar > 0 {
        let dd = decomposed_dynamics(&kd);
        let eig = dd.a_cbar_obar.complex_eigenvalues();
        Some(
            eig.iter()
                .map(|z: &Complex64| z.re.abs())
                .fold(0.0f64, f64::max),
        )
    } else {
        None
    };
    Ok(Prop61Report {
        ctrb_rank,
        obsv_rank,
        ranks_equal: ctrb_rank == obsv_rank,
        hurwitz: spec.is_hurwitz,
        full_rank_when_hurwitz: full,
        cbar_obar_max_abs_re,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_state_space, to_quadrature, PhysicalParams};
    use crate::synth;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn cavity(kappa: f64, omega: f64) -> QuadratureSystem {
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

    /// Two mechanical modes and a cavity, the QMFS-generating fixture.
    pub(crate) fn optomech(omega: f64, g: f64, kappa: f64) -> QuadratureSystem {
        let omega_minus = CMat::from_row_slice(
            3,
            3,
            &[
                c(omega, 0.0), c(0.0, 0.0), c(g, 0.0),
                c(0.0, 0.0), c(-omega, 0.0), c(g, 0.0),
                c(g, 0.0), c(g, 0.0), c(0.0, 0.0),
            ],
        );
        let omega_plus = CMat::from_row_slice(
            3,
            3,
            &[
                c(0.0, 0.0), c(0.0, 0.0), c(g, 0.0),
                c(0.0, 0.0), c(0.0, 0.0), c(g, 0.0),
                c(g, 0.0), c(g, 0.0), c(0.0, 0.0),
            ],
        );
        let p = PhysicalParams::new(
            CMat::identity(1, 1),
            CMat::from_row_slice(1, 3, &[c(0.0, 0.0), c(0.0, 0.0), c(kappa.sqrt(), 0.0)]),
            CMat::zeros(1, 3),
            omega_minus,
            omega_plus,
            CMat::zeros(6, 0),
        )
        .unwrap();
        to_quadrature(&build_state_space(&p).unwrap()).unwrap()
    }

    #[test]
    fn hurwitz_examples() {
        let rep = is_hurwitz(&cavity(2.0, 0.7), 1e-12);
        assert!(rep.is_hurwitz);
        assert_relative_eq!(rep.abscissa, -1.0, epsilon = 1e-12);

        let rot = QuadratureSystem::new(
            1,
            1,
            0,
            j_symplectic_real(1),
            RMat::zeros(2, 2),
            RMat::zeros(2, 2),
            RMat::identity(2, 2),
            RMat::zeros(2, 0),
        )
        .unwrap();
        let rep = is_hurwitz(&rot, 1e-12);
        assert!(!rep.is_hurwitz);
        assert_relative_eq!(rep.abscissa, 0.0, epsilon = 1e-12);

        let closed = optomech(1.0, 0.7, 0.0);
        assert!(!is_hurwitz(&closed, 1e-12).is_hurwitz);
    }

    #[test]
    fn subspaces_of_cavity_and_undriven_system() {
        let qs = cavity(2.0, 0.0);
        assert_eq!(controllable_subspace(&qs, RANK_TOL).columns.ncols(), 2);
        assert_eq!(observable_subspace(&qs, RANK_TOL).columns.ncols(), 2);

        let free = QuadratureSystem::new(
            1,
            1,
            0,
            j_symplectic_real(1),
            RMat::zeros(2, 2),
            RMat::zeros(2, 2),
            RMat::identity(2, 2),
            RMat::zeros(2, 0),
        )
        .unwrap();
        assert_eq!(controllable_subspace(&free, RANK_TOL).columns.ncols(), 0);
    }

    #[test]
    fn optomech_subspaces_span_cavity_coordinates() {
        let qs = optomech(1.0, 0.7, 2.0);
        let co = intersect_subspaces(
            &controllable_subspace(&qs, RANK_TOL).columns,
            &observable_subspace(&qs, RANK_TOL).columns,
            1e-7,
        );
        assert_eq!(co.ncols(), 2);
        // R_co is spanned by the cavity quadratures q3 (index 2) and p3 (index 5)
        for cvec in co.column_iter() {
            for (i, &x) in cvec.iter().enumerate() {
                if i != 2 && i != 5 {
                    assert!(x.abs() < 1e-8, "component {i} = {x}");
                }
            }
        }
    }

    #[test]
    fn cavity_decomposition_is_trivial() {
        let qs = cavity(2.0, 0.4);
        let kd = kalman_decompose(&qs, RANK_TOL).unwrap();
        assert_eq!(
            kd.dims,
            KalmanDims { n_h: 0, n_co: 1, n_cbar_obar: 0 }
        );
        // T is a signed permutation of the identity
        let mut abs_t = kd.t.map(|x| x.abs());
        abs_t -= RMat::identity(2, 2);
        assert!(max_abs(&abs_t) < 1e-10);
    }

    #[test]
    fn optomech_decomposition_dims_and_pattern() {
        let qs = optomech(1.0, 0.7, 2.0);
        let kd = kalman_decompose(&qs, RANK_TOL).unwrap();
        assert_eq!(
            kd.dims,
            KalmanDims { n_h: 2, n_co: 1, n_cbar_obar: 0 }
        );
        assert!(kd.zero_pattern_residual < 1e-8, "residual {}", kd.zero_pattern_residual);
        assert!(kd.orthogonality_residual < 1e-10);
        assert!(kd.symplectic_residual < 1e-10);
        assert_eq!(kd.qnd_indices, vec![2, 3]);
        assert_eq!(kd.dfs_indices, Vec::<usize>::new());
    }

    #[test]
    fn optomech_closed_dynamics_match_displayed_equations() {
        // Decompose the damped system, then drop the dissipation (κ = 0) in
        // the same coordinates: q̇_c = 0 and the only q_h ↔ x_co couplings
        // have magnitude 2√2·G.
        let (omega, g) = (1.0, 0.7);
        let kd = kalman_decompose(&optomech(omega, g, 2.0), RANK_TOL).unwrap();
        assert_eq!(kd.dims, KalmanDims { n_h: 2, n_co: 1, n_cbar_obar: 0 });
        let a0 = kd.t.transpose() * &optomech(omega, g, 0.0).a * &kd.t;
        let (qh, ph, co) = (kd.qh_range(), kd.ph_range(), kd.co_range());
        let expect = 2.0 * 2.0f64.sqrt() * g;

        // The co pair is only fixed up to a symplectic rotation of the
        // (q_c, p_c) plane, so the displayed equations are asserted through
        // their basis-invariant structure.

        // q̇_c = 0: the undamped co rows have a one-dimensional left null
        // space (the conserved direction w ~ q_c).
        let co_rows = block(&a0, co.clone(), 0..6);
        let (u, sv) = crate::linalg::jacobi_svd_left(&co_rows);
        assert!(sv[1] < 1e-10, "second co-row singular value {}", sv[1]);
        assert_relative_eq!(sv[0], expect, epsilon = 1e-10);
        let w = RMat::from_column_slice(2, 1, &[-u[(1, 0)], u[(0, 0)]]); // null direction

        // ṗ₊ = -ω q₋ - 2√2·G q_c: A_12 is rank one with value 2√2·G carried
        // entirely by the conserved direction w.
        let a12 = block(&a0, qh.clone(), co.clone());
        let coupled = &a12 * &w;
        assert_relative_eq!(coupled.norm(), expect, epsilon = 1e-10);
        let w_perp = RMat::from_column_slice(2, 1, &[w[(1, 0)], -w[(0, 0)]]);
        assert!((&a12 * &w_perp).norm() < 1e-10);

        // ṗ_c = -2√2·G q₊: A_21 is rank one with the same magnitude, and its
        // nonzero row is the non-conserved co coordinate.
        let a21 = block(&a0, co.clone(), ph.clone());
        let sv21 = crate::linalg::singular_values_r(&a21);
        assert_relative_eq!(sv21[0], expect, epsilon = 1e-10);
        assert!(sv21[1] < 1e-10);
        assert!((w.transpose() * &a21).norm() < 1e-10);

        // q̇₋ = ω p₊ etc.: the h blocks are ω-rotations.
        let a_h11 = block(&a0, qh.clone(), qh);
        let a_h22 = block(&a0, ph.clone(), ph);
        for blk in [&a_h11, &a_h22] {
            let sv = crate::linalg::singular_values_r(blk);
            assert_relative_eq!(sv[0], omega, epsilon = 1e-10);
            assert_relative_eq!(sv[1], omega, epsilon = 1e-10);
        }
    }

    #[test]
    fn optomech_open_dynamics() {
        // κ > 0: ẋ_co = -κ/2 x_co - A_21 p_h - √κ u.
        let (omega, g, kappa) = (1.0, 0.7, 2.0);
        let qs = optomech(omega, g, kappa);
        let kd = kalman_decompose(&qs, RANK_TOL).unwrap();
        let dd = decomposed_dynamics(&kd);
        assert!(op_norm_r(&(&dd.a_co + RMat::identity(2, 2) * (kappa / 2.0))) < 1e-10);
        let sv = crate::linalg::singular_values_r(&dd.a_21);
        assert_relative_eq!(sv[0], 2.0 * 2.0f64.sqrt() * g, epsilon = 1e-10);
        let svb = crate::linalg::singular_values_r(&dd.b_co);
        assert_relative_eq!(svb[0], kappa.sqrt(), epsilon = 1e-10);
        assert_relative_eq!(svb[1], kappa.sqrt(), epsilon = 1e-10);
        assert!(max_abs(&dd.b_h) < 1e-10);
    }

    #[test]
    fn engineered_direct_sum_recovers_dims() {
        // cavity (co) ⊕ isolated oscillator (c̄ō), conjugated by a random
        // orthogonal-symplectic map.
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..5 {
            let cav = cavity(2.0, 0.3);
            let n = 2;
            let dim = 2 * n;
            let mut a = RMat::zeros(dim, dim);
            // block layout in (q1, q2, p1, p2) coordinates
            let idx = [0usize, 2]; // cavity occupies mode 1 = coords (0, 2)
            for (bi, &i) in idx.iter().enumerate() {
                for (bj, &j) in idx.iter().enumerate() {
                    a[(i, j)] = cav.a[(bi, bj)];
                }
            }
            let w = rng.gen_range(0.5..1.5);
            a[(1, 3)] = w;
            a[(3, 1)] = -w;
            let mut b = RMat::zeros(dim, 2);
            b[(0, 0)] = cav.b[(0, 0)];
            b[(2, 1)] = cav.b[(1, 1)];
            let mut cmat = RMat::zeros(2, dim);
            cmat[(0, 0)] = cav.c[(0, 0)];
            cmat[(1, 2)] = cav.c[(1, 1)];
            let r = synth::random_orthosymplectic(n, &mut rng);
            let qs = QuadratureSystem::new(
                n,
                1,
                0,
                r.transpose() * a * &r,
                r.transpose() * b,
                cmat * &r,
                RMat::identity(2, 2),
                RMat::zeros(dim, 0),
            )
            .unwrap();
            let kd = kalman_decompose(&qs, RANK_TOL).unwrap();
            assert_eq!(kd.dims, KalmanDims { n_h: 0, n_co: 1, n_cbar_obar: 1 });
            assert!(kd.zero_pattern_residual < 1e-8);
            assert!(kd.symplectic_residual < 1e-9);
        }
    }

    #[test]
    fn engineered_h_block_recovers_dims() {
        // opto-mechanical fixture conjugated by a random orthogonal-symplectic map
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..5 {
            let qs = optomech(1.0, 0.7, 2.0);
            let r = synth::random_orthosymplectic(3, &mut rng);
            let qs2 = QuadratureSystem::new(
                3,
                1,
                0,
                r.transpose() * &qs.a * &r,
                r.transpose() * &qs.b,
                &qs.c * &r,
                qs.d.clone(),
                RMat::zeros(6, 0),
            )
            .unwrap();
            let kd = kalman_decompose(&qs2, RANK_TOL).unwrap();
            assert_eq!(kd.dims, KalmanDims { n_h: 2, n_co: 1, n_cbar_obar: 0 });
            assert!(kd.zero_pattern_residual < 1e-8);
        }
    }

    #[test]
    fn non_realizable_input_is_rejected() {
        let mut qs = cavity(1.0, 0.0);
        qs.a[(0, 0)] += 0.3;
        assert!(matches!(
            kalman_decompose(&qs, RANK_TOL),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn optomech_is_bae_in_both_directions() {
        let qs = optomech(1.0, 0.7, 2.0);
        let kd = kalman_decompose(&qs, RANK_TOL).unwrap();
        let samples = [c(0.3, 0.9), c(1.0, -0.4), c(2.0, 2.0), c(0.1, 0.0)];
        for dir in [BaeDirection::PInToQOut, BaeDirection::QInToPOut] {
            let rep = check_bae(&kd, dir, &samples, 1e-8).unwrap();
            assert!(rep.is_bae, "{dir:?}: {rep:?}");
        }
    }

    #[test]
    fn rotating_cavity_is_not_bae() {
        let qs = cavity(2.0, 0.8);
        let kd = kalman_decompose(&qs, RANK_TOL).unwrap();
        let samples = [c(0.3, 0.9), c(1.0, -0.4)];
        let rep = check_bae(&kd, BaeDirection::PInToQOut, &samples, 1e-8).unwrap();
        assert!(!rep.is_bae);
        assert!(rep.max_residual > 1e-3);
        assert!(rep.direct_max_residual > 1e-3);
    }

    #[test]
    fn q_only_coupling_is_trivially_bae() {
        // ℂ couples only the q row; 𝔸 diagonal damping-free rotation absent.
        let kappa = 1.0f64;
        let qs = cavity(kappa, 0.0);
        let kd = kalman_decompose(&qs, RANK_TOL).unwrap();
        let samples = [c(0.5, 0.5), c(1.5, -1.0)];
        let rep = check_bae(&kd, BaeDirection::PInToQOut, &samples, 1e-8).unwrap();
        assert!(rep.is_bae);
    }

    #[test]
    fn prop61_reports() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..10 {
            let n = rng.gen_range(1..=3);
            let m = rng.gen_range(1..=2);
            let p = synth::random_params(n, m, 0, &mut rng);
            let qs = to_quadrature(&build_state_space(&p).unwrap()).unwrap();
            let rep = verify_prop61(&qs, RANK_TOL).unwrap();
            assert!(rep.ranks_equal, "{rep:?}");
            if rep.hurwitz {
                assert_eq!(rep.full_rank_when_hurwitz, Some(true));
            }
        }

        let rep = verify_prop61(&cavity(2.0, 0.3), RANK_TOL).unwrap();
        assert!(rep.hurwitz && rep.full_rank_when_hurwitz == Some(true));

        // the undriven opto-mechanical system is entirely c̄ō and its
        // spectrum lies on the imaginary axis
        let qs = optomech(1.0, 0.7, 0.0);
        let kd = kalman_decompose(&qs, RANK_TOL).unwrap();
        assert_eq!(kd.dims.n_cbar_obar, 3);
        let rep = verify_prop61(&qs, RANK_TOL).unwrap();
        assert!(rep.cbar_obar_max_abs_re.unwrap() < 1e-10);
    }

    #[test]
    fn prop61_dfs_spectrum_imaginary() {
        // direct sum with an isolated rotating mode, as in
        // engineered_direct_sum_recovers_dims
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let cav = cavity(2.0, 0.3);
        let n = 2;
        let dim = 4;
        let mut a = RMat::zeros(dim, dim);
        let idx = [0usize, 2];
        for (bi, &i) in idx.iter().enumerate() {
            for (bj, &j) in idx.iter().enumerate() {
                a[(i, j)] = cav.a[(bi, bj)];
            }
        }
        a[(1, 3)] = 1.1;
        a[(3, 1)] = -1.1;
        let mut b = RMat::zeros(dim, 2);
        b[(0, 0)] = cav.b[(0, 0)];
        b[(2, 1)] = cav.b[(1, 1)];
        let mut cmat = RMat::zeros(2, dim);
        cmat[(0, 0)] = cav.c[(0, 0)];
        cmat[(1, 2)] = cav.c[(1, 1)];
        let r = synth::random_orthosymplectic(n, &mut rng);
        let qs = QuadratureSystem::new(
            n,
            1,
            0,
            r.transpose() * a * &r,
            r.transpose() * b,
            cmat * &r,
            RMat::identity(2, 2),
            RMat::zeros(dim, 0),
        )
        .unwrap();
        let rep = verify_prop61(&qs, RANK_TOL).unwrap();
        assert!(rep.cbar_obar_max_abs_re.unwrap() < 1e-10);
    }
}

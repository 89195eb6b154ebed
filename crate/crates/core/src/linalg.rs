//! Dense linear-algebra helpers shared across the crate.
//!
//! Systems handled here are small (a few dozen state variables at most), so
//! everything is dense and allocation cost is irrelevant.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;
pub type RMat = DMatrix<f64>;
pub type RVec = DVector<f64>;

pub fn to_complex(m: &RMat) -> CMat {
    m.map(|x| C64::new(x, 0.0))
}

pub fn real_part(m: &CMat) -> RMat {
    m.map(|z| z.re)
}

pub fn imag_part(m: &CMat) -> RMat {
    m.map(|z| z.im)
}

/// Singular values (descending) via the spectral decomposition of the Gram
/// matrix. nalgebra's bidiagonal SVD mis-converges on some matrices with
/// round-off-scale entries, so norms and rank decisions go through the
/// symmetric eigensolver instead.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let gram = if m.nrows() <= m.ncols() {
        m * m.adjoint()
    } else {
        m.adjoint() * m
    };
    let mut ev: Vec<f64> = nalgebra::SymmetricEigen::new(gram)
        .eigenvalues
        .iter()
        .map(|&l| l.max(0.0).sqrt())
        .collect();
    ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
    ev
}

/// Real-matrix version of [`singular_values`], computed by one-sided Jacobi
/// so that small singular values keep full relative accuracy.
pub fn singular_values_r(m: &RMat) -> Vec<f64> {
    jacobi_svd_left(m).1
}

/// One-sided Jacobi SVD. Returns the left singular vectors (as columns of an
/// orthogonal rows×rows matrix) and the singular values, sorted descending.
pub fn jacobi_svd_left(m: &RMat) -> (RMat, Vec<f64>) {
    let rows = m.nrows();
    if rows == 0 || m.ncols() == 0 {
        return (RMat::identity(rows, rows), vec![0.0; rows]);
    }
    // Orthogonalize the columns of Mᵀ; the accumulated rotations are the
    // left singular vectors of M.
    let mut w = m.transpose();
    let mut v = RMat::identity(rows, rows);
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..rows - 1 {
            for q in p + 1..rows {
                let cp = w.column(p);
                let cq = w.column(q);
                let app = cp.dot(&cp);
                let aqq = cq.dot(&cq);
                let apq = cp.dot(&cq);
                if apq.abs() <= 1e-300 + 1e-17 * (app * aqq).sqrt() {
                    continue;
                }
                rotated = true;
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..w.nrows() {
                    let (wp, wq) = (w[(i, p)], w[(i, q)]);
                    w[(i, p)] = c * wp - s * wq;
                    w[(i, q)] = s * wp + c * wq;
                }
                for i in 0..rows {
                    let (vp, vq) = (v[(i, p)], v[(i, q)]);
                    v[(i, p)] = c * vp - s * vq;
                    v[(i, q)] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut pairs: Vec<(f64, usize)> = (0..rows).map(|j| (w.column(j).norm(), j)).collect();
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let mut left = RMat::zeros(rows, rows);
    for (c, &(_, j)) in pairs.iter().enumerate() {
        left.set_column(c, &v.column(j));
    }
    (left, pairs.into_iter().map(|(s, _)| s).collect())
}

/// Operator 2-norm (largest singular value). Zero for empty matrices.
pub fn op_norm(m: &CMat) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Operator 2-norm of a real matrix.
pub fn op_norm_r(m: &RMat) -> f64 {
    singular_values_r(m).first().copied().unwrap_or(0.0)
}

/// Largest entry magnitude; cheap residual measure for exact-zero patterns.
pub fn max_abs(m: &RMat) -> f64 {
    m.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

pub fn kron(a: &RMat, b: &RMat) -> RMat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = RMat::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Solves the continuous Lyapunov equation `A X + X Aᵀ + Q = 0` by
/// vectorization: `(I ⊗ A + A ⊗ I) vec(X) = -vec(Q)`.
pub fn solve_lyapunov(a: &RMat, q: &RMat) -> Result<RMat> {
    let n = a.nrows();
    if a.ncols() != n || q.shape() != (n, n) {
        return Err(Error::Dimension(format!(
            "lyapunov: A is {}x{}, Q is {}x{}",
            a.nrows(),
            a.ncols(),
            q.nrows(),
            q.ncols()
        )));
    }
    let eye = RMat::identity(n, n);
    let m = kron(&eye, a) + kron(a, &eye);
    let rhs = RVec::from_column_slice(q.as_slice());
    let lu = m.lu();
    let x = lu
        .solve(&(-rhs))
        .ok_or_else(|| Error::Singular("lyapunov operator is singular".into()))?;
    let sol = RMat::from_column_slice(n, n, x.as_slice());
    // symmetrize away round-off
    Ok((&sol + sol.transpose()) * 0.5)
}

/// Orthonormal basis of the column space, rank decided by `sigma > rel_tol * sigma_max`.
/// Returns the basis together with all singular values (one per row dimension).
pub fn range_basis(m: &RMat, rel_tol: f64) -> (RMat, Vec<f64>) {
    let rows = m.nrows();
    if rows == 0 || m.ncols() == 0 {
        return (RMat::zeros(rows, 0), Vec::new());
    }
    let (left, sv) = jacobi_svd_left(m);
    let smax = sv.first().copied().unwrap_or(0.0);
    let rank = if smax == 0.0 {
        0
    } else {
        sv.iter().filter(|&&s| s > rel_tol * smax).count()
    };
    let mut basis = RMat::from(left.columns(0, rank));
    sign_fix_columns(&mut basis);
    (basis, sv)
}

/// Orthonormal basis of the orthogonal complement of `basis` in R^dim.
///
/// Uses the spectral split of the projector: eigenvalues of `B Bᵀ` cluster at
/// 0 and 1, eigenvectors below 1/2 span the complement.
pub fn orthogonal_complement(basis: &RMat, dim: usize) -> RMat {
    if basis.ncols() == 0 {
        return RMat::identity(dim, dim);
    }
    assert_eq!(basis.nrows(), dim);
    let proj = basis * basis.transpose();
    let eig = nalgebra::SymmetricEigen::new(proj);
    let keep: Vec<usize> = (0..dim).filter(|&i| eig.eigenvalues[i] < 0.5).collect();
    let mut out = RMat::zeros(dim, keep.len());
    for (c, &i) in keep.iter().enumerate() {
        out.set_column(c, &eig.eigenvectors.column(i));
    }
    sign_fix_columns(&mut out);
    out
}

/// Intersection of two subspaces given by orthonormal bases, via the spectral
/// decomposition of the summed projectors (eigenvalue 2 ⇔ common direction).
pub fn intersect_subspaces(a: &RMat, b: &RMat, tol: f64) -> RMat {
    let dim = a.nrows().max(b.nrows());
    if a.ncols() == 0 || b.ncols() == 0 {
        return RMat::zeros(dim, 0);
    }
    assert_eq!(a.nrows(), b.nrows());
    let p = a * a.transpose() + b * b.transpose();
    let eig = nalgebra::SymmetricEigen::new(p);
    let mut pairs: Vec<(f64, usize)> = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .map(|(i, v)| (v, i))
        .collect();
    pairs.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());
    let keep: Vec<usize> = pairs
        .iter()
        .filter(|(v, _)| *v >= 2.0 - tol)
        .map(|&(_, i)| i)
        .collect();
    let mut out = RMat::zeros(dim, keep.len());
    for (c, &i) in keep.iter().enumerate() {
        out.set_column(c, &eig.eigenvectors.column(i));
    }
    sign_fix_columns(&mut out);
    out
}

/// Deterministic column orientation: flip signs so the largest-magnitude entry
/// of every column is positive.
pub fn sign_fix_columns(m: &mut RMat) {
    for mut col in m.column_iter_mut() {
        let mut best = 0.0f64;
        let mut bestval = 0.0f64;
        for &x in col.iter() {
            if x.abs() > best {
                best = x.abs();
                bestval = x;
            }
        }
        if bestval < 0.0 {
            col.neg_mut();
        }
    }
}

/// Gauss–Hermite nodes and weights for ∫ f(x) e^{-x²} dx via Golub–Welsch.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut jac = RMat::zeros(n, n);
    for k in 1..n {
        let b = (k as f64 / 2.0).sqrt();
        jac[(k - 1, k)] = b;
        jac[(k, k - 1)] = b;
    }
    let eig = nalgebra::SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .map(|(i, x)| {
            let v0 = eig.eigenvectors[(0, i)];
            (x, std::f64::consts::PI.sqrt() * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    (
        pairs.iter().map(|p| p.0).collect(),
        pairs.iter().map(|p| p.1).collect(),
    )
}

/// One classical RK4 step for a matrix-valued autonomous ODE.
pub fn rk4_step<F: Fn(&RMat) -> RMat>(f: F, y: &RMat, dt: f64) -> RMat {
    let k1 = f(y);
    let k2 = f(&(y + &k1 * (dt / 2.0)));
    let k3 = f(&(y + &k2 * (dt / 2.0)));
    let k4 = f(&(y + &k3 * dt));
    y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

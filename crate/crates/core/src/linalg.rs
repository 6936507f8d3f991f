//! Small dense kernels shared by the operator and pencil code.

use nalgebra::linalg::{Schur, SymmetricEigen, LU};
use nalgebra::Dyn;

use crate::error::{Error, Result};
use crate::{CMatrix, CVector, C64};

/// Pivot threshold (relative to the caller's scale) below which a system is
/// declared singular.
const PIVOT_TOL: f64 = 64.0 * f64::EPSILON;

pub(crate) fn max_abs_entry(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// LU factorisation that refuses numerically singular matrices.
///
/// `scale` is the magnitude against which pivots are compared; callers that
/// assemble a matrix from several terms pass the sum of the term magnitudes.
pub(crate) struct Factor {
    lu: LU<C64, Dyn, Dyn>,
}

impl Factor {
    pub(crate) fn new(m: CMatrix, scale: f64) -> Option<Self> {
        let n = m.nrows();
        let lu = m.lu();
        let u = lu.u();
        let floor = PIVOT_TOL * (n as f64).max(1.0) * scale.max(f64::MIN_POSITIVE);
        if (0..n).any(|i| {
            let p = u[(i, i)].norm();
            !p.is_finite() || p <= floor
        }) {
            return None;
        }
        Some(Self { lu })
    }

    pub(crate) fn solve_mat(&self, rhs: &CMatrix) -> Option<CMatrix> {
        self.lu.solve(rhs).filter(|x| x.iter().all(|z| z.is_finite()))
    }

    pub(crate) fn solve_vec(&self, rhs: &CVector) -> Option<CVector> {
        self.lu.solve(rhs).filter(|x| x.iter().all(|z| z.is_finite()))
    }

    pub(crate) fn inverse(&self) -> Option<CMatrix> {
        self.lu.try_inverse().filter(|x| x.iter().all(|z| z.is_finite()))
    }
}

pub(crate) fn inverse(m: &CMatrix) -> Option<CMatrix> {
    let scale = max_abs_entry(m);
    Factor::new(m.clone(), scale)?.inverse()
}

/// Largest singular value.
pub(crate) fn spectral_norm(m: &CMatrix) -> f64 {
    if m.nrows() == 1 && m.ncols() == 1 {
        return m[(0, 0)].norm();
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0_f64, |acc, &s| acc.max(s))
}

/// 2-norm condition number; infinite for singular matrices.
pub(crate) fn condition_number(m: &CMatrix) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let hi = sv.iter().fold(0.0_f64, |a, &s| a.max(s));
    let lo = sv.iter().fold(f64::INFINITY, |a, &s| a.min(s));
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

pub(crate) fn is_hermitian(m: &CMatrix, rel_tol: f64) -> bool {
    let scale = max_abs_entry(m).max(f64::MIN_POSITIVE);
    let n = m.nrows();
    (0..n).all(|i| (0..=i).all(|j| (m[(i, j)] - m[(j, i)].conj()).norm() <= rel_tol * scale))
}

pub(crate) fn is_lower_triangular(m: &CMatrix) -> bool {
    let n = m.nrows();
    (0..n).all(|i| (i + 1..n).all(|j| m[(i, j)] == C64::new(0.0, 0.0)))
}

pub(crate) fn is_upper_triangular(m: &CMatrix) -> bool {
    let n = m.nrows();
    (0..n).all(|i| (0..i).all(|j| m[(i, j)] == C64::new(0.0, 0.0)))
}

/// Solves `(shift·I + m) x = b` for triangular `m` by substitution.
/// Returns `None` when `m` is not triangular or a pivot vanishes.
pub(crate) fn shifted_triangular_solve(m: &CMatrix, shift: C64, b: &CVector) -> Option<CVector> {
    let n = m.nrows();
    let lower = is_lower_triangular(m);
    if !lower && !is_upper_triangular(m) {
        return None;
    }
    let scale = max_abs_entry(m).max(shift.norm());
    let floor = PIVOT_TOL * scale.max(f64::MIN_POSITIVE);
    let mut x = CVector::zeros(n);
    let order: Box<dyn Iterator<Item = usize>> = if lower {
        Box::new(0..n)
    } else {
        Box::new((0..n).rev())
    };
    for i in order {
        let mut s = b[i];
        let range = if lower { 0..i } else { i + 1..n };
        for j in range {
            s -= m[(i, j)] * x[j];
        }
        let d = m[(i, i)] + shift;
        if d.norm() <= floor {
            return None;
        }
        x[i] = s / d;
    }
    Some(x)
}

/// Eigenvalues and (column) eigenvectors.
///
/// Hermitian input goes through the symmetric solver and yields a unitary
/// eigenvector matrix; everything else goes through the complex Schur form
/// followed by back substitution on the triangular factor.
pub(crate) struct EigenDecomposition {
    pub values: Vec<C64>,
    pub vectors: CMatrix,
    pub unitary: bool,
}

pub(crate) fn eigen_decomposition(m: &CMatrix) -> Result<EigenDecomposition> {
    let n = m.nrows();
    if is_hermitian(m, 1e-14) {
        let herm = (m + m.adjoint()).scale(0.5);
        let eig = SymmetricEigen::try_new(herm, f64::EPSILON, 0).ok_or(Error::NoConvergence)?;
        return Ok(EigenDecomposition {
            values: eig.eigenvalues.iter().map(|&v| C64::new(v, 0.0)).collect(),
            vectors: eig.eigenvectors,
            unitary: true,
        });
    }

    let (q, t) = Schur::try_new(m.clone(), f64::EPSILON, 0)
        .ok_or(Error::NoConvergence)?
        .unpack();
    let norm = max_abs_entry(&t).max(f64::MIN_POSITIVE);
    let mut y = CMatrix::zeros(n, n);
    for k in 0..n {
        let tkk = t[(k, k)];
        let smin = (f64::EPSILON * tkk.norm()).max(f64::EPSILON * norm);
        y[(k, k)] = C64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut s = C64::new(0.0, 0.0);
            for j in i + 1..=k {
                s += t[(i, j)] * y[(j, k)];
            }
            let mut d = t[(i, i)] - tkk;
            if d.norm() < smin {
                d = C64::new(smin, 0.0);
            }
            y[(i, k)] = -s / d;
        }
    }
    let mut vectors = q * y;
    for mut col in vectors.column_iter_mut() {
        let nrm = col.norm();
        if nrm > 0.0 {
            col /= C64::new(nrm, 0.0);
        }
    }
    Ok(EigenDecomposition {
        values: (0..n).map(|i| t[(i, i)]).collect(),
        vectors,
        unitary: false,
    })
}

/// Eigenvalues only, via the Schur form.
pub(crate) fn eigenvalues(m: &CMatrix) -> Result<Vec<C64>> {
    if m.nrows() == 1 {
        return Ok(vec![m[(0, 0)]]);
    }
    let (_, t) = Schur::try_new(m.clone(), f64::EPSILON, 0)
        .ok_or(Error::NoConvergence)?
        .unpack();
    Ok((0..m.nrows()).map(|i| t[(i, i)]).collect())
}

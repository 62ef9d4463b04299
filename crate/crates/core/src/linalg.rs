//! Small complex linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// `a^H b`.
#[inline]
pub fn inner(a: &CVector, b: &CVector) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// `h^H p` for column `col` of `m` without copying the column.
#[inline]
pub fn column_inner(m: &CMatrix, col: usize, p: &CVector) -> C64 {
    m.column(col)
        .iter()
        .zip(p.iter())
        .map(|(x, y)| x.conj() * y)
        .sum()
}

#[inline]
pub fn norm_sqr(v: &CVector) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum()
}

/// `p^H A p` for Hermitian `A` (imaginary round-off dropped).
pub fn hermitian_form(a: &CMatrix, p: &CVector) -> f64 {
    let ap = a * p;
    inner(p, &ap).re
}

/// Adds `scale * v v^H` into `acc`.
pub fn add_outer(acc: &mut CMatrix, v: impl Iterator<Item = C64> + Clone, scale: f64) {
    let vals: Vec<C64> = v.collect();
    let n = vals.len();
    for j in 0..n {
        let cj = vals[j].conj() * scale;
        for i in 0..n {
            acc[(i, j)] += vals[i] * cj;
        }
    }
}

/// Real embedding of a Hermitian form: `p^H A p = x^T M x` with
/// `x = [Re p; Im p]` and `M = [[Re A, -Im A], [Im A, Re A]]`.
pub fn real_embedding(a: &CMatrix) -> DMatrix<f64> {
    let n = a.nrows();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let v = a[(i, j)];
            m[(i, j)] = v.re;
            m[(i + n, j + n)] = v.re;
            m[(i, j + n)] = -v.im;
            m[(i + n, j)] = v.im;
        }
    }
    // symmetrize against round-off
    let mt = m.transpose();
    (m + mt) * 0.5
}

/// Factor `L` with `L^T L = M` for a symmetric PSD `M`, keeping only
/// eigen-directions above a relative threshold. Negative round-off
/// eigenvalues are dropped.
pub fn psd_factor(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let eig = m.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let cutoff = (max * 1e-13).max(1e-300);
    let keep: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > cutoff).collect();
    let mut l = DMatrix::zeros(keep.len(), n);
    for (row, &i) in keep.iter().enumerate() {
        let s = eig.eigenvalues[i].sqrt();
        for c in 0..n {
            l[(row, c)] = s * eig.eigenvectors[(c, i)];
        }
    }
    l
}

/// Dominant left singular vector of `m` (unit norm). Falls back to the
/// uniform direction when `m` is numerically zero.
pub fn dominant_left_singular(m: &CMatrix) -> CVector {
    let nt = m.nrows();
    let fallback = || CVector::from_element(nt, C64::new(1.0 / (nt as f64).sqrt(), 0.0));
    if m.iter().all(|x| x.norm_sqr() == 0.0) {
        return fallback();
    }
    // Eigenvector of m m^H avoids the thin-SVD shape corner cases.
    let gram = m * m.adjoint();
    let eig = gram.symmetric_eigen();
    let (best, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    let v: CVector = eig.eigenvectors.column(best).into_owned();
    let n = norm_sqr(&v).sqrt();
    if n == 0.0 {
        fallback()
    } else {
        v / C64::new(n, 0.0)
    }
}

//! Small dense helpers shared by the rest of the crate.
//!
//! Everything here works on `nalgebra` dynamic matrices of `Complex<f64>`;
//! Hermitian routines assume (and only read) a Hermitian input.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type RMat = DMatrix<f64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(d: usize) -> CMat {
    CMat::identity(d, d)
}

pub fn pauli_x() -> CMat {
    CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn pauli_y() -> CMat {
    CMat::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
}

pub fn pauli_z() -> CMat {
    CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

pub fn trace(m: &CMat) -> C64 {
    m.diagonal().iter().sum()
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest singular value.
pub fn op_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// Frobenius norm of the anti-Hermitian part.
pub fn hermiticity_defect(m: &CMat) -> f64 {
    frobenius(&(m - m.adjoint())) / 2.0
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * c(0.5, 0.0)
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
pub fn eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    let eig = hermitian_part(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMat::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

pub fn eigvalsh(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut v: Vec<f64> = hermitian_part(m).symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn min_eigenvalue(m: &CMat) -> f64 {
    eigvalsh(m).first().copied().unwrap_or(0.0)
}

/// Rebuilds `V f(Λ) V†` from an eigendecomposition.
pub fn spectral_map(values: &[f64], vectors: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let n = values.len();
    let mut scaled = vectors.clone();
    for j in 0..n {
        let s = f(values[j]);
        for i in 0..n {
            scaled[(i, j)] *= s;
        }
    }
    scaled * vectors.adjoint()
}

/// Principal square root of a PSD matrix; eigenvalues below `clamp` are set to zero.
pub fn sqrtm_psd(m: &CMat, clamp: f64) -> CMat {
    let (vals, vecs) = eigh(m);
    spectral_map(&vals, &vecs, |x| if x > clamp { x.sqrt() } else { 0.0 })
}

/// Inverse square root of a positive definite matrix.
pub fn inv_sqrtm(m: &CMat) -> Option<CMat> {
    let (vals, vecs) = eigh(m);
    let scale = vals.iter().fold(0.0f64, |a, &b| a.max(b.abs())).max(1e-300);
    if vals.iter().any(|&x| x <= 1e-13 * scale) {
        return None;
    }
    Some(spectral_map(&vals, &vecs, |x| 1.0 / x.sqrt()))
}

/// Column-stacking in the lexicographic (row, col) order used for Choi vectors:
/// `vec(K)[o * d_in + i] = K[o, i]`.
pub fn vectorize(m: &CMat) -> DVector<C64> {
    let (r, cdim) = m.shape();
    DVector::from_fn(r * cdim, |k, _| m[(k / cdim, k % cdim)])
}

pub fn unvectorize(v: &[C64], rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |i, j| v[i * cols + j])
}

/// Complex Ginibre matrix with i.i.d. standard normal real and imaginary parts.
pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

/// Haar-ish random unitary from the QR of a Ginibre matrix.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, d: usize) -> CMat {
    let g = ginibre(rng, d, d);
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut u = q;
    for j in 0..d {
        let ph = r[(j, j)] / r[(j, j)].norm();
        for i in 0..d {
            u[(i, j)] *= ph;
        }
    }
    u
}

/// Real least squares `min |A x - b|` via SVD; singular values below
/// `rel_cutoff * s_max` are discarded. Returns `(x, residual_norm)`.
pub fn lstsq(a: &RMat, b: &DVector<f64>, rel_cutoff: f64) -> (DVector<f64>, f64) {
    if a.ncols() == 0 || a.nrows() == 0 {
        return (DVector::zeros(a.ncols()), b.norm());
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let smax = svd.singular_values.max();
    let mut x = DVector::zeros(a.ncols());
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > rel_cutoff * smax && s > 0.0 {
            let coef = u.column(k).dot(b) / s;
            x += vt.row(k).transpose() * coef;
        }
    }
    let res = (a * &x - b).norm();
    (x, res)
}

/// Orthonormal basis of the null space and the least-norm solution of `A x = b`.
pub fn affine_solution_space(
    a: &RMat,
    b: &DVector<f64>,
    rel_cutoff: f64,
) -> (DVector<f64>, RMat, f64, usize) {
    let n = a.ncols();
    if a.nrows() == 0 {
        return (DVector::zeros(n), RMat::identity(n, n), 0.0, 0);
    }
    // Pad to a square-or-taller matrix so the SVD yields a full right basis.
    let rows = a.nrows().max(n);
    let mut padded = RMat::zeros(rows, n);
    padded.view_mut((0, 0), (a.nrows(), n)).copy_from(a);
    let svd = padded.svd(true, true);
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let smax = svd.singular_values.max().max(1e-300);
    let rank_cols: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] > rel_cutoff * smax)
        .collect();
    let null_rows: Vec<usize> = (0..n).filter(|k| !rank_cols.contains(k)).collect();
    let mut null = RMat::zeros(n, null_rows.len());
    for (j, &k) in null_rows.iter().enumerate() {
        null.set_column(j, &vt.row(k).transpose());
    }
    let (x0, res) = lstsq(a, b, rel_cutoff);
    (x0, null, res, rank_cols.len())
}

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, RMat};

/// `[[Re H, −Im H], [Im H, Re H]]`. Each eigenvalue of `H` appears twice in
/// the output spectrum, so the output is PSD exactly when `H` is.
pub fn embed_complex(h: &CMat) -> Result<RMat> {
    let defect = linalg::max_abs(&(h - h.adjoint()));
    if defect > 1e-10 {
        return Err(Error::NotHermitian(defect));
    }
    Ok(embed_unchecked(h))
}

/// Same layout as [`embed_complex`] for an arbitrary complex matrix.
pub fn embed_unchecked(h: &CMat) -> RMat {
    let (r, c) = h.shape();
    RMat::from_fn(2 * r, 2 * c, |i, j| {
        let z = h[(i % r, j % c)];
        match (i < r, j < c) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

/// Recovers a complex Hermitian matrix from a real symmetric `2n × 2n`
/// matrix `[[P, Q], [Qᵀ, T]]` by averaging over the embedding's symmetry:
/// `((P + T) + i(Qᵀ − Q)) / 2`. Exact inverse of [`embed_complex`] and a
/// PSD-preserving projection otherwise.
pub fn unembed(y: &RMat) -> CMat {
    let n = y.nrows() / 2;
    CMat::from_fn(n, n, |i, j| {
        let re = (y[(i, j)] + y[(i + n, j + n)]) / 2.0;
        let im = (y[(i + n, j)] - y[(i, j + n)]) / 2.0;
        linalg::c(re, im)
    })
}

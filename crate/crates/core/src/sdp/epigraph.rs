//! LMI encodings of norm bounds on affine matrix expressions.

use super::problem::LmiBlock;
use crate::linalg::{CMat, C64};

/// Affine (not necessarily square or Hermitian) matrix expression
/// `B_0 + Σ_i x_i B_i` in the real decision vector.
#[derive(Debug, Clone)]
pub struct AffineMatrix {
    pub constant: CMat,
    pub terms: Vec<(usize, CMat)>,
}

impl AffineMatrix {
    pub fn constant(m: CMat) -> Self {
        Self { constant: m, terms: Vec::new() }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.constant.shape()
    }

    pub fn evaluate(&self, x: &[f64]) -> CMat {
        let mut out = self.constant.clone();
        for (i, b) in &self.terms {
            out += b * C64::new(x[*i], 0.0);
        }
        out
    }
}

/// Places `top_left`, `off` (below the diagonal) and `off†` (above) and
/// `bottom_right` into one Hermitian block matrix.
fn arrow(top_left: &CMat, off: &CMat, bottom_right: &CMat) -> CMat {
    let (r, c) = off.shape();
    let mut m = CMat::zeros(c + r, c + r);
    m.view_mut((0, 0), (c, c)).copy_from(top_left);
    m.view_mut((c, c), (r, r)).copy_from(bottom_right);
    m.view_mut((c, 0), (r, c)).copy_from(off);
    m.view_mut((0, c), (c, r)).copy_from(&off.adjoint());
    m
}

fn scaled_identity(d: usize, s: f64) -> CMat {
    CMat::identity(d, d) * C64::new(s, 0.0)
}

/// `[[t·1, B†], [B, t·1]] ⪰ 0`, equivalent to `‖B(x)‖_op ≤ t` with `t = x[bound]`.
pub fn opnorm_epigraph(b: &AffineMatrix, bound: usize) -> LmiBlock {
    let (r, c) = b.shape();
    let zero_c = CMat::zeros(c, c);
    let zero_r = CMat::zeros(r, r);
    let mut terms: Vec<(usize, CMat)> = b
        .terms
        .iter()
        .map(|(i, bi)| (*i, arrow(&zero_c, bi, &zero_r)))
        .collect();
    terms.push((bound, arrow(&scaled_identity(c, 1.0), &CMat::zeros(r, c), &scaled_identity(r, 1.0))));
    LmiBlock { constant: arrow(&zero_c, &b.constant, &zero_r), terms }
}

/// `[[λ·1, A†], [A, 1]] ⪰ 0`, equivalent to `A(x)†A(x) ⪯ λ·1` with `λ = x[bound]`.
pub fn psd_dominance_epigraph(a: &AffineMatrix, bound: usize) -> LmiBlock {
    let (r, c) = a.shape();
    let zero_c = CMat::zeros(c, c);
    let zero_r = CMat::zeros(r, r);
    let mut terms: Vec<(usize, CMat)> = a
        .terms
        .iter()
        .map(|(i, ai)| (*i, arrow(&zero_c, ai, &zero_r)))
        .collect();
    terms.push((bound, arrow(&scaled_identity(c, 1.0), &CMat::zeros(r, c), &zero_r)));
    LmiBlock { constant: arrow(&zero_c, &a.constant, &scaled_identity(r, 1.0)), terms }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, pauli_x};
    use crate::sdp::{SdpProblem, SolveStatus, SolverOptions};

    fn minimize_bound(block: LmiBlock, n_vars: usize, bound: usize) -> f64 {
        let mut p = SdpProblem::new(n_vars);
        p.objective[bound] = 1.0;
        p.lmi_blocks.push(block);
        let s = p.solve(&SolverOptions::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        s.objective_value
    }

    #[test]
    fn opnorm_of_sigma_x() {
        let b = AffineMatrix::constant(pauli_x());
        assert!((minimize_bound(opnorm_epigraph(&b, 0), 1, 0) - 1.0).abs() < 1e-7);
    }

    #[test]
    fn opnorm_of_zero() {
        let b = AffineMatrix::constant(CMat::zeros(2, 2));
        assert!(minimize_bound(opnorm_epigraph(&b, 0), 1, 0).abs() < 1e-7);
    }

    #[test]
    fn opnorm_of_complex_scalar() {
        let b = AffineMatrix::constant(CMat::from_element(1, 1, c(3.0, 4.0)));
        assert!((minimize_bound(opnorm_epigraph(&b, 0), 1, 0) - 5.0).abs() < 1e-7);
    }

    #[test]
    fn opnorm_of_rectangular_with_variable() {
        // min_x ‖[1, x]ᵀ‖ is 1 at x = 0; bound is variable 1.
        let b = AffineMatrix {
            constant: CMat::from_column_slice(2, 1, &[c(1.0, 0.0), c(0.0, 0.0)]),
            terms: vec![(0, CMat::from_column_slice(2, 1, &[c(0.0, 0.0), c(1.0, 0.0)]))],
        };
        assert!((minimize_bound(opnorm_epigraph(&b, 1), 2, 1) - 1.0).abs() < 1e-7);
    }

    #[test]
    fn dominance_identity() {
        let a = AffineMatrix::constant(CMat::identity(2, 2));
        assert!((minimize_bound(psd_dominance_epigraph(&a, 0), 1, 0) - 1.0).abs() < 1e-7);
    }

    #[test]
    fn dominance_diag_one_two() {
        let a = AffineMatrix::constant(CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0, 0.0), c(2.0, 0.0)])));
        assert!((minimize_bound(psd_dominance_epigraph(&a, 0), 1, 0) - 4.0).abs() < 1e-7);
    }

    #[test]
    fn dominance_zero() {
        let a = AffineMatrix::constant(CMat::zeros(3, 2));
        assert!(minimize_bound(psd_dominance_epigraph(&a, 0), 1, 0).abs() < 1e-7);
    }
}

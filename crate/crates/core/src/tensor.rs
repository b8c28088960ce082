//! Operators over ordered products of named finite-dimensional spaces.
//!
//! A [`LabeledOperator`] stores a dense complex matrix together with the list
//! of spaces its row (and column) index runs over. The basis is lexicographic
//! over that list: the first space is the most significant digit, matching
//! `nalgebra`'s Kronecker product. Choi operators of channels always live on
//! `(output, input)` in that order.
//!
//! The link product contracts shared spaces with a partial transpose on the
//! *first* argument:
//!
//! `a * b = Tr_X[(a^{T_X} ⊗ 1) (1 ⊗ b)]`,
//!
//! so that `choi * state` applies the channel and `effect^T * state` yields a
//! probability.

use std::collections::HashSet;
use std::fmt;

use log::warn;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64, ONE, ZERO};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpaceLabel {
    pub name: String,
    pub dim: usize,
}

impl SpaceLabel {
    pub fn new(name: impl Into<String>, dim: usize) -> Self {
        assert!(dim >= 1, "space dimension must be positive");
        Self { name: name.into(), dim }
    }
}

impl fmt::Display for SpaceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.name, self.dim)
    }
}

/// Shorthand used throughout the crate.
pub fn space(name: impl Into<String>, dim: usize) -> SpaceLabel {
    SpaceLabel::new(name, dim)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledOperator {
    spaces: Vec<SpaceLabel>,
    data: CMat,
}

/// Splits flat indices of a product space into a "kept" part and a
/// "selected" part, both expressed as flat offsets into the full space.
struct IndexSplit {
    /// `full = rest[idx] + sel[idx]` for every flat index of the full space.
    rest: Vec<usize>,
    sel: Vec<usize>,
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * dims[k + 1];
    }
    s
}

/// Enumerates flat offsets (in the full space) of all multi-indices over the
/// given subset of positions, in lexicographic order of that subset.
fn offsets(dims: &[usize], positions: &[usize]) -> Vec<usize> {
    let st = strides(dims);
    let mut out = vec![0usize];
    for &p in positions {
        let mut next = Vec::with_capacity(out.len() * dims[p]);
        for &base in &out {
            for k in 0..dims[p] {
                next.push(base + k * st[p]);
            }
        }
        out = next;
    }
    out
}

fn split_indices(dims: &[usize], selected: &[usize]) -> IndexSplit {
    let total: usize = dims.iter().product();
    let st = strides(dims);
    let mut rest = vec![0; total];
    let mut sel = vec![0; total];
    for idx in 0..total {
        let mut r = 0;
        let mut s = 0;
        for (p, &stride) in st.iter().enumerate() {
            let digit = (idx / stride) % dims[p];
            if selected.contains(&p) {
                s += digit * stride;
            } else {
                r += digit * stride;
            }
        }
        rest[idx] = r;
        sel[idx] = s;
    }
    IndexSplit { rest, sel }
}

impl LabeledOperator {
    pub fn new(spaces: Vec<SpaceLabel>, data: CMat) -> Result<Self> {
        let mut seen = HashSet::new();
        for s in &spaces {
            if !seen.insert(s.name.as_str()) {
                return Err(Error::DuplicateLabel(s.name.clone()));
            }
        }
        let d: usize = spaces.iter().map(|s| s.dim).product();
        if data.nrows() != d || data.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "matrix is {}x{} but spaces multiply to {d}",
                data.nrows(),
                data.ncols()
            )));
        }
        Ok(Self { spaces, data })
    }

    pub fn scalar(value: C64) -> Self {
        Self { spaces: Vec::new(), data: CMat::from_element(1, 1, value) }
    }

    pub fn identity(spaces: Vec<SpaceLabel>) -> Result<Self> {
        let d = spaces.iter().map(|s| s.dim).product();
        Self::new(spaces, linalg::identity(d))
    }

    pub fn zeros(spaces: Vec<SpaceLabel>) -> Result<Self> {
        let d = spaces.iter().map(|s| s.dim).product();
        Self::new(spaces, CMat::zeros(d, d))
    }

    pub fn spaces(&self) -> &[SpaceLabel] {
        &self.spaces
    }

    pub fn data(&self) -> &CMat {
        &self.data
    }

    pub fn into_data(self) -> CMat {
        self.data
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.spaces.iter().map(|s| s.dim).collect()
    }

    pub fn names(&self) -> Vec<&str> {
        self.spaces.iter().map(|s| s.name.as_str()).collect()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.spaces.iter().position(|s| s.name == name)
    }

    pub fn has_space(&self, name: &str) -> bool {
        self.position(name).is_some()
    }

    pub fn trace(&self) -> C64 {
        linalg::trace(&self.data)
    }

    /// Value of a zero-space operator.
    pub fn as_scalar(&self) -> Option<C64> {
        self.spaces.is_empty().then(|| self.data[(0, 0)])
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        linalg::max_abs(&(&self.data - self.data.adjoint())) <= tol
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        self.is_hermitian(tol) && self.min_eigenvalue() >= -tol
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::min_eigenvalue(&self.data)
    }

    /// `(X + X†)/2`, warning when the discarded anti-Hermitian part is not small.
    pub fn hermitized(&self) -> Self {
        let defect = linalg::hermiticity_defect(&self.data);
        if defect > 1e-8 {
            warn!("symmetrizing operator on {:?} with anti-Hermitian part {defect:.3e}", self.names());
        }
        Self { spaces: self.spaces.clone(), data: linalg::hermitian_part(&self.data) }
    }

    pub fn map_data(&self, f: impl FnOnce(&CMat) -> CMat) -> Self {
        Self { spaces: self.spaces.clone(), data: f(&self.data) }
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.map_data(|d| d * C64::new(s, 0.0))
    }

    pub fn transpose(&self) -> Self {
        self.map_data(|d| d.transpose())
    }

    pub fn relabeled(&self, renames: &[(&str, &str)]) -> Result<Self> {
        let mut spaces = self.spaces.clone();
        for s in spaces.iter_mut() {
            if let Some((_, to)) = renames.iter().find(|(from, _)| *from == s.name) {
                s.name = (*to).to_string();
            }
        }
        Self::new(spaces, self.data.clone())
    }

    fn positions_of(&self, names: &[&str]) -> Result<Vec<usize>> {
        names
            .iter()
            .map(|n| self.position(n).ok_or_else(|| Error::UnknownLabel((*n).to_string())))
            .collect()
    }

    /// Sum of two operators; `other` is reordered to `self`'s space order first.
    pub fn add(&self, other: &Self) -> Result<Self> {
        let other = other.reorder(&self.names())?;
        if other.spaces != self.spaces {
            return Err(Error::DimensionMismatch("operands live on different spaces".into()));
        }
        Ok(Self { spaces: self.spaces.clone(), data: &self.data + other.data })
    }

    pub fn tensor_product(&self, other: &Self) -> Result<Self> {
        for s in &other.spaces {
            if self.has_space(&s.name) {
                return Err(Error::DuplicateLabel(s.name.clone()));
            }
        }
        let mut spaces = self.spaces.clone();
        spaces.extend(other.spaces.iter().cloned());
        Ok(Self { spaces, data: self.data.kronecker(&other.data) })
    }

    pub fn partial_trace(&self, traced: &[&str]) -> Result<Self> {
        let mut pos = self.positions_of(traced)?;
        pos.sort_unstable();
        pos.dedup();
        let dims = self.dims();
        let kept: Vec<usize> = (0..dims.len()).filter(|p| !pos.contains(p)).collect();
        let kept_off = offsets(&dims, &kept);
        let traced_off = offsets(&dims, &pos);
        let d = kept_off.len();
        let data = CMat::from_fn(d, d, |r, cidx| {
            traced_off
                .iter()
                .map(|&t| self.data[(kept_off[r] + t, kept_off[cidx] + t)])
                .sum()
        });
        let spaces = kept.iter().map(|&p| self.spaces[p].clone()).collect();
        Ok(Self { spaces, data })
    }

    pub fn reorder(&self, new_order: &[&str]) -> Result<Self> {
        if new_order.len() != self.spaces.len() {
            return Err(Error::NotAPermutation);
        }
        let pos = self
            .positions_of(new_order)
            .map_err(|_| Error::NotAPermutation)?;
        let mut check = pos.clone();
        check.sort_unstable();
        check.dedup();
        if check.len() != pos.len() {
            return Err(Error::NotAPermutation);
        }
        if pos.iter().enumerate().all(|(i, &p)| i == p) {
            return Ok(self.clone());
        }
        let map = offsets(&self.dims(), &pos);
        let d = map.len();
        let data = CMat::from_fn(d, d, |r, cidx| self.data[(map[r], map[cidx])]);
        let spaces = pos.iter().map(|&p| self.spaces[p].clone()).collect();
        Ok(Self { spaces, data })
    }

    pub fn partial_transpose(&self, names: &[&str]) -> Result<Self> {
        let pos = self.positions_of(names)?;
        if pos.is_empty() {
            return Ok(self.clone());
        }
        let split = split_indices(&self.dims(), &pos);
        let d = self.dim();
        let data = CMat::from_fn(d, d, |r, cidx| {
            self.data[(split.rest[r] + split.sel[cidx], split.rest[cidx] + split.sel[r])]
        });
        Ok(Self { spaces: self.spaces.clone(), data })
    }

    /// `Tr_X[(a^{T_X} ⊗ 1)(1 ⊗ b)]` over the shared spaces `X`; the result
    /// lives on `(a \ X) ++ (b \ X)`.
    pub fn link_product(&self, other: &Self) -> Result<Self> {
        let shared: Vec<&str> = self
            .names()
            .into_iter()
            .filter(|n| other.has_space(n))
            .collect();
        if shared.is_empty() {
            return self.tensor_product(other);
        }
        for n in &shared {
            let da = self.spaces[self.position(n).unwrap()].dim;
            let db = other.spaces[other.position(n).unwrap()].dim;
            if da != db {
                return Err(Error::DimensionMismatch(format!(
                    "shared space `{n}` has dimension {da} vs {db}"
                )));
            }
        }
        let p_names: Vec<&str> = self.names().into_iter().filter(|n| !shared.contains(n)).collect();
        let q_names: Vec<&str> = other.names().into_iter().filter(|n| !shared.contains(n)).collect();

        let mut a_order = p_names.clone();
        a_order.extend(shared.iter());
        let mut b_order = shared.clone();
        b_order.extend(q_names.iter());
        let a = self.reorder(&a_order)?;
        let b = other.reorder(&b_order)?;

        let dp: usize = p_names.iter().map(|n| a.spaces[a.position(n).unwrap()].dim).product();
        let dq: usize = q_names.iter().map(|n| b.spaces[b.position(n).unwrap()].dim).product();
        let dx: usize = shared.iter().map(|n| a.spaces[a.position(n).unwrap()].dim).product();

        // a_hat[(p,p'),(x',x)] = a[(p,x'),(p',x)]
        let a_hat = CMat::from_fn(dp * dp, dx * dx, |r, cidx| {
            let (p, pp) = (r / dp, r % dp);
            let (xp, x) = (cidx / dx, cidx % dx);
            a.data[(p * dx + xp, pp * dx + x)]
        });
        // b_hat[(x',x),(q,q')] = b[(x',q),(x,q')]
        let b_hat = CMat::from_fn(dx * dx, dq * dq, |r, cidx| {
            let (xp, x) = (r / dx, r % dx);
            let (q, qq) = (cidx / dq, cidx % dq);
            b.data[(xp * dq + q, x * dq + qq)]
        });
        let l_hat = a_hat * b_hat;
        let d = dp * dq;
        let data = CMat::from_fn(d, d, |r, cidx| {
            let (p, q) = (r / dq, r % dq);
            let (pp, qq) = (cidx / dq, cidx % dq);
            l_hat[(p * dp + pp, q * dq + qq)]
        });
        let mut spaces: Vec<SpaceLabel> =
            p_names.iter().map(|n| a.spaces[a.position(n).unwrap()].clone()).collect();
        spaces.extend(q_names.iter().map(|n| b.spaces[b.position(n).unwrap()].clone()));
        Ok(Self { spaces, data })
    }
}

/// Unnormalized `|1⟩⟩ = Σ_i |i⟩|i⟩` on `(out_label, in_label)` as a rank-one operator.
pub fn max_entangled(d: usize, out_label: &str, in_label: &str) -> LabeledOperator {
    let v = max_entangled_vector(d);
    let data = &v * v.adjoint();
    LabeledOperator::new(vec![space(out_label, d), space(in_label, d)], data)
        .expect("labels must differ")
}

pub fn max_entangled_vector(d: usize) -> nalgebra::DVector<C64> {
    nalgebra::DVector::from_fn(d * d, |k, _| if k / d == k % d { ONE } else { ZERO })
}

/// A quantum channel in Kraus form, `ρ ↦ Σ_k K_k ρ K_k†`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel {
    kraus: Vec<CMat>,
    d_in: usize,
    d_out: usize,
}

pub const COMPLETENESS_TOL: f64 = 1e-10;

impl KrausChannel {
    pub fn new(kraus: Vec<CMat>) -> Result<Self> {
        let ch = Self::new_unchecked(kraus)?;
        let res = ch.completeness_residual();
        if res > COMPLETENESS_TOL {
            return Err(Error::NotTracePreserving(res));
        }
        Ok(ch)
    }

    /// Shape checks only; completeness is left to the caller.
    pub fn new_unchecked(kraus: Vec<CMat>) -> Result<Self> {
        let first = kraus
            .first()
            .ok_or_else(|| Error::InvalidParameter("empty Kraus list".into()))?;
        let (d_out, d_in) = first.shape();
        if kraus.iter().any(|k| k.shape() != (d_out, d_in)) {
            return Err(Error::DimensionMismatch("Kraus operators differ in shape".into()));
        }
        Ok(Self { kraus, d_in, d_out })
    }

    pub fn identity(d: usize) -> Self {
        Self { kraus: vec![linalg::identity(d)], d_in: d, d_out: d }
    }

    pub fn kraus(&self) -> &[CMat] {
        &self.kraus
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    /// Max-abs deviation of `Σ K†K` from the identity.
    pub fn completeness_residual(&self) -> f64 {
        let s: CMat = self.kraus.iter().map(|k| k.adjoint() * k).sum();
        linalg::max_abs(&(s - linalg::identity(self.d_in)))
    }

    pub fn apply(&self, rho: &CMat) -> Result<CMat> {
        if rho.shape() != (self.d_in, self.d_in) {
            return Err(Error::DimensionMismatch(format!(
                "state is {}x{}, channel input is {}",
                rho.nrows(),
                rho.ncols(),
                self.d_in
            )));
        }
        Ok(self.kraus.iter().map(|k| k * rho * k.adjoint()).sum())
    }

    /// Drops Kraus operators whose Frobenius norm is at most `tol`.
    pub fn pruned(&self, tol: f64) -> Self {
        let kraus: Vec<CMat> =
            self.kraus.iter().filter(|k| linalg::frobenius(k) > tol).cloned().collect();
        if kraus.is_empty() {
            return self.clone();
        }
        Self { kraus, ..self.clone() }
    }

    pub fn choi(&self) -> LabeledOperator {
        choi_from_kraus_labeled(self, "O", "I").expect("distinct default labels")
    }
}

/// Choi operator `Σ_k |K_k⟩⟩⟨⟨K_k|` on `(O, I)`.
pub fn choi_from_kraus(c: &KrausChannel) -> Result<LabeledOperator> {
    let res = c.completeness_residual();
    if res > COMPLETENESS_TOL {
        return Err(Error::NotTracePreserving(res));
    }
    choi_from_kraus_labeled(c, "O", "I")
}

pub fn choi_from_kraus_labeled(
    c: &KrausChannel,
    out_label: &str,
    in_label: &str,
) -> Result<LabeledOperator> {
    let d = c.d_out * c.d_in;
    let mut data = CMat::zeros(d, d);
    for k in &c.kraus {
        let v = linalg::vectorize(k);
        data += &v * v.adjoint();
    }
    LabeledOperator::new(vec![space(out_label, c.d_out), space(in_label, c.d_in)], data)
}

/// Inverse of [`choi_from_kraus`]: eigendecomposes a Choi operator living on
/// `(output, input)` and keeps eigenvalues above `rank_tol`.
pub fn kraus_from_choi(choi: &LabeledOperator, rank_tol: f64) -> Result<KrausChannel> {
    let (values, vectors) = choi_eigen_checked(choi, rank_tol)?;
    let (d_out, d_in) = (choi.spaces()[0].dim, choi.spaces()[1].dim);
    let d = d_out * d_in;
    let mut kraus = Vec::new();
    for j in (0..d).rev() {
        if values[j] > rank_tol {
            let col: Vec<C64> = vectors.column(j).iter().map(|z| z * values[j].sqrt()).collect();
            kraus.push(linalg::unvectorize(&col, d_out, d_in));
        }
    }
    if kraus.is_empty() {
        return Err(Error::InvalidParameter("Choi operator has no eigenvalue above rank_tol".into()));
    }
    KrausChannel::new_unchecked(kraus)
}

pub(crate) fn choi_eigen_checked(choi: &LabeledOperator, rank_tol: f64) -> Result<(Vec<f64>, CMat)> {
    if choi.spaces().len() != 2 {
        return Err(Error::DimensionMismatch(
            "Choi operator must live on exactly (output, input)".into(),
        ));
    }
    let herm = linalg::hermiticity_defect(choi.data());
    if herm > 1e-8 {
        return Err(Error::NotHermitian(herm));
    }
    let (values, vectors) = linalg::eigh(choi.data());
    if values[0] < -rank_tol.max(1e-12) {
        return Err(Error::NotPositive(values[0]));
    }
    let out_name = choi.spaces()[0].name.clone();
    let tp = choi.partial_trace(&[out_name.as_str()])?;
    let dev = linalg::max_abs(&(tp.data() - linalg::identity(tp.dim())));
    if dev > 1e-8 {
        return Err(Error::NotTracePreserving(dev));
    }
    Ok((values, vectors))
}

pub fn apply_channel(c: &KrausChannel, rho: &LabeledOperator) -> Result<LabeledOperator> {
    if rho.spaces().len() != 1 {
        return Err(Error::DimensionMismatch("state must live on a single input space".into()));
    }
    let out = c.apply(rho.data())?;
    let s = &rho.spaces()[0];
    LabeledOperator::new(vec![space(s.name.clone(), c.d_out)], out)
}

/// Operator with an explicit 2x2 or larger matrix on a single space.
pub fn single(name: &str, data: CMat) -> LabeledOperator {
    let d = data.nrows();
    LabeledOperator::new(vec![space(name, d)], data).expect("square matrix")
}

pub fn dense(rows: usize, values: &[C64]) -> CMat {
    DMatrix::from_row_slice(rows, values.len() / rows, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, pauli_x, pauli_z};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rand_op(rng: &mut ChaCha8Rng, spaces: Vec<SpaceLabel>) -> LabeledOperator {
        let d = spaces.iter().map(|s| s.dim).product();
        LabeledOperator::new(spaces, linalg::ginibre(rng, d, d)).unwrap()
    }

    fn random_channel(rng: &mut ChaCha8Rng, d: usize, r: usize) -> KrausChannel {
        // Stinespring: isometry from a random unitary on d*r.
        let u = linalg::random_unitary(rng, d * r);
        let kraus = (0..r)
            .map(|k| CMat::from_fn(d, d, |i, j| u[(k * d + i, j)]))
            .collect();
        KrausChannel::new(kraus).unwrap()
    }

    #[test]
    fn identity_tensor_identity() {
        let a = LabeledOperator::identity(vec![space("A", 2)]).unwrap();
        let b = LabeledOperator::identity(vec![space("B", 2)]).unwrap();
        let ab = a.tensor_product(&b).unwrap();
        assert_eq!(ab.names(), vec!["A", "B"]);
        assert_eq!(ab.data(), &linalg::identity(4));
    }

    #[test]
    fn sigma_x_tensor_sigma_z_entries() {
        let ab = single("A", pauli_x()).tensor_product(&single("B", pauli_z())).unwrap();
        // σx ⊗ σz = [[0, σz], [σz, 0]]
        let d = ab.data();
        assert_eq!(d[(0, 2)], c(1.0, 0.0));
        assert_eq!(d[(1, 3)], c(-1.0, 0.0));
        assert_eq!(d[(2, 0)], c(1.0, 0.0));
        assert_eq!(d[(3, 1)], c(-1.0, 0.0));
        assert_eq!(d[(0, 0)], c(0.0, 0.0));
        assert_eq!(d[(0, 1)], c(0.0, 0.0));
    }

    #[test]
    fn duplicate_labels_rejected() {
        let a = single("A", pauli_x());
        assert!(matches!(a.tensor_product(&a), Err(Error::DuplicateLabel(_))));
    }

    #[test]
    fn trace_is_multiplicative() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = rand_op(&mut rng, vec![space("A", 2)]);
        let b = rand_op(&mut rng, vec![space("B", 2)]);
        let t = a.tensor_product(&b).unwrap().trace();
        assert_relative_eq!((t - a.trace() * b.trace()).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn partial_trace_of_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = rand_op(&mut rng, vec![space("A", 2)]);
        let b = rand_op(&mut rng, vec![space("B", 3)]);
        let tr = a.tensor_product(&b).unwrap().partial_trace(&["B"]).unwrap();
        let expect = a.data() * b.trace();
        assert!(linalg::max_abs(&(tr.data() - expect)) < 1e-12);
        assert!((tr.trace() - a.trace() * b.trace()).norm() < 1e-12);
    }

    #[test]
    fn partial_trace_of_max_entangled() {
        let phi = max_entangled(2, "A", "B").scaled(0.5);
        let red = phi.partial_trace(&["A"]).unwrap();
        assert!(linalg::max_abs(&(red.data() - linalg::identity(2) * c(0.5, 0.0))) < 1e-15);
    }

    /// Brute-force index summation oracle for tracing out space B of (A,B,C).
    #[test]
    fn partial_trace_order_independent_and_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = rand_op(&mut rng, vec![space("A", 2), space("B", 3), space("C", 2)]);
        let ab = x.partial_trace(&["A"]).unwrap().partial_trace(&["C"]).unwrap();
        let ba = x.partial_trace(&["C"]).unwrap().partial_trace(&["A"]).unwrap();
        let both = x.partial_trace(&["C", "A"]).unwrap();
        let mut brute = CMat::zeros(3, 3);
        for b1 in 0..3 {
            for b2 in 0..3 {
                for a in 0..2 {
                    for cc in 0..2 {
                        brute[(b1, b2)] += x.data()[(a * 6 + b1 * 2 + cc, a * 6 + b2 * 2 + cc)];
                    }
                }
            }
        }
        for m in [&ab, &ba, &both] {
            assert!(linalg::max_abs(&(m.data() - &brute)) < 1e-12);
        }
    }

    #[test]
    fn unknown_label_rejected() {
        let a = single("A", pauli_x());
        assert!(matches!(a.partial_trace(&["Z"]), Err(Error::UnknownLabel(_))));
    }

    #[test]
    fn reorder_identity_and_swap() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = rand_op(&mut rng, vec![space("A", 2)]);
        let b = rand_op(&mut rng, vec![space("B", 3)]);
        let ab = a.tensor_product(&b).unwrap();
        assert_eq!(ab.reorder(&["A", "B"]).unwrap(), ab);
        let ba = ab.reorder(&["B", "A"]).unwrap();
        let direct = b.tensor_product(&a).unwrap();
        assert!(linalg::max_abs(&(ba.data() - direct.data())) < 1e-14);
        assert_eq!(ba.reorder(&["A", "B"]).unwrap(), ab);
        assert!(matches!(ab.reorder(&["A"]), Err(Error::NotAPermutation)));
        assert!(matches!(ab.reorder(&["A", "A"]), Err(Error::NotAPermutation)));
    }

    #[test]
    fn reorder_preserves_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = rand_op(&mut rng, vec![space("A", 2), space("B", 2), space("C", 3)]);
        let h = g.map_data(|d| d * d.adjoint());
        let r = h.reorder(&["C", "A", "B"]).unwrap();
        let (e1, e2) = (linalg::eigvalsh(h.data()), linalg::eigvalsh(r.data()));
        for (x, y) in e1.iter().zip(&e2) {
            assert_relative_eq!(x, y, epsilon = 1e-10);
        }
    }

    #[test]
    fn identity_channel_link_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let rho = rand_op(&mut rng, vec![space("I", 2)]);
        let id = KrausChannel::identity(2).choi();
        let out = id.link_product(&rho).unwrap();
        assert_eq!(out.names(), vec!["O"]);
        assert!(linalg::max_abs(&(out.data() - rho.data())) < 1e-14);
    }

    #[test]
    fn unitary_chois_compose() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u = linalg::random_unitary(&mut rng, 2);
        let v = linalg::random_unitary(&mut rng, 2);
        let cu = choi_from_kraus_labeled(&KrausChannel::new(vec![u.clone()]).unwrap(), "M", "I").unwrap();
        let cv = choi_from_kraus_labeled(&KrausChannel::new(vec![v.clone()]).unwrap(), "O", "M").unwrap();
        let composed = cv.link_product(&cu).unwrap();
        let direct = KrausChannel::new(vec![&v * &u]).unwrap().choi();
        let composed = composed.reorder(&["O", "I"]).unwrap();
        assert!(linalg::max_abs(&(composed.data() - direct.data())) < 1e-12);
    }

    #[test]
    fn effect_link_state_gives_probability() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = linalg::ginibre(&mut rng, 2, 2);
        let rho = &g * g.adjoint();
        let rho = &rho / linalg::trace(&rho);
        let e = linalg::ginibre(&mut rng, 2, 2);
        let e = &e * e.adjoint();
        let effect_cj = single("O", e.transpose());
        let p = effect_cj.link_product(&single("O", rho.clone())).unwrap();
        let expect = linalg::trace(&(&e * &rho));
        assert!((p.as_scalar().unwrap() - expect).norm() < 1e-12);
    }

    #[test]
    fn link_dimension_mismatch() {
        let a = single("X", linalg::identity(2));
        let b = single("X", linalg::identity(3));
        assert!(matches!(a.link_product(&b), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn link_commutes_up_to_reorder() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = rand_op(&mut rng, vec![space("A", 2), space("X", 2)]);
        let b = rand_op(&mut rng, vec![space("X", 2), space("B", 3)]);
        let ab = a.link_product(&b).unwrap();
        let ba = b.link_product(&a).unwrap().reorder(&["A", "B"]).unwrap();
        assert!(linalg::max_abs(&(ab.data() - ba.data())) < 1e-12);
    }

    #[test]
    fn max_entangled_small_cases() {
        assert_eq!(max_entangled_vector(1).as_slice(), &[ONE]);
        assert_eq!(max_entangled_vector(2).as_slice(), &[ONE, ZERO, ZERO, ONE]);
        assert_relative_eq!(max_entangled(3, "A", "B").trace().re, 3.0);
    }

    #[test]
    fn choi_of_identity_and_full_dephasing() {
        let id = choi_from_kraus(&KrausChannel::identity(2)).unwrap();
        assert_eq!(id.data(), max_entangled(2, "O", "I").data());
        assert_relative_eq!(id.trace().re, 2.0);

        let p0 = dense(2, &[ONE, ZERO, ZERO, ZERO]);
        let p1 = dense(2, &[ZERO, ZERO, ZERO, ONE]);
        let deph = KrausChannel::new(vec![p0, p1]).unwrap();
        let cj = choi_from_kraus(&deph).unwrap();
        let expect = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![ONE, ZERO, ZERO, ONE]));
        assert_eq!(cj.data(), &expect);
    }

    #[test]
    fn choi_of_rotation_is_rank_one() {
        let dt = 0.7f64;
        let u = dense(2, &[C64::from_polar(1.0, -dt / 2.0), ZERO, ZERO, C64::from_polar(1.0, dt / 2.0)]);
        let cj = KrausChannel::new(vec![u]).unwrap().choi();
        let ev = linalg::eigvalsh(cj.data());
        assert_relative_eq!(ev[3], 2.0, epsilon = 1e-12);
        for e in &ev[..3] {
            assert!(e.abs() < 1e-12);
        }
    }

    #[test]
    fn completeness_violation_rejected() {
        let bad = KrausChannel::new_unchecked(vec![pauli_x() * c(0.9, 0.0)]).unwrap();
        assert!(matches!(choi_from_kraus(&bad), Err(Error::NotTracePreserving(_))));
        assert!(KrausChannel::new(vec![pauli_x() * c(0.9, 0.0)]).is_err());
    }

    #[test]
    fn kraus_from_identity_choi() {
        let k = kraus_from_choi(&KrausChannel::identity(2).choi(), 1e-10).unwrap();
        assert_eq!(k.kraus().len(), 1);
        let m = &k.kraus()[0];
        let phase = m[(0, 0)];
        assert!((phase.norm() - 1.0).abs() < 1e-12);
        assert!(linalg::max_abs(&(m / phase - linalg::identity(2))) < 1e-12);
    }

    #[test]
    fn kraus_from_dephasing_choi_acts_like_dephasing() {
        let cj = LabeledOperator::new(
            vec![space("O", 2), space("I", 2)],
            CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![ONE, ZERO, ZERO, ONE])),
        )
        .unwrap();
        let k = kraus_from_choi(&cj, 1e-10).unwrap();
        assert_eq!(k.kraus().len(), 2);
        for i in 0..2 {
            for j in 0..2 {
                let mut basis = CMat::zeros(2, 2);
                basis[(i, j)] = ONE;
                let out = k.apply(&basis).unwrap();
                let expect = if i == j { basis.clone() } else { CMat::zeros(2, 2) };
                assert!(linalg::max_abs(&(out - expect)) < 1e-12);
            }
        }
    }

    #[test]
    fn kraus_from_choi_rejects_bad_input() {
        let not_tp = LabeledOperator::new(vec![space("O", 2), space("I", 2)], linalg::identity(4) * c(2.0, 0.0)).unwrap();
        assert!(matches!(kraus_from_choi(&not_tp, 1e-10), Err(Error::NotTracePreserving(_))));
        let neg = LabeledOperator::new(
            vec![space("O", 2), space("I", 2)],
            CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.5, 0.0), ZERO, ZERO, c(-0.5, 0.0)])),
        )
        .unwrap();
        assert!(matches!(kraus_from_choi(&neg, 1e-10), Err(Error::NotPositive(_))));
    }

    #[test]
    fn apply_matches_link_and_dephases_plus() {
        let p0 = dense(2, &[ONE, ZERO, ZERO, ZERO]);
        let p1 = dense(2, &[ZERO, ZERO, ZERO, ONE]);
        let deph = KrausChannel::new(vec![p0, p1]).unwrap();
        let plus = single("I", CMat::from_element(2, 2, c(0.5, 0.0)));
        let out = apply_channel(&deph, &plus).unwrap();
        assert!(linalg::max_abs(&(out.data() - linalg::identity(2) * c(0.5, 0.0))) < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..5 {
            let ch = random_channel(&mut rng, 2, 3);
            let g = linalg::ginibre(&mut rng, 2, 2);
            let rho = single("I", &g * g.adjoint() / linalg::trace(&(&g * g.adjoint())));
            let direct = apply_channel(&ch, &rho).unwrap();
            let linked = ch.choi().link_product(&rho).unwrap();
            assert!(linalg::max_abs(&(direct.data() - linked.data())) < 1e-12);
            assert!((direct.trace() - ONE).norm() < 1e-12);
        }
    }

    #[test]
    fn apply_dimension_mismatch() {
        let rho = single("I", linalg::identity(3));
        assert!(apply_channel(&KrausChannel::identity(2), &rho).is_err());
    }
}

//! Parametrized qubit channel families and constructions built on them.
//!
//! Phase-encoded families use `U(θ) = exp(−iθσ_z/2)`; their derivatives
//! follow from `dU/dθ = −i(σ_z/2)U`.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, pauli_x, pauli_z, CMat, C64, ZERO};
use crate::tensor::{choi_eigen_checked, choi_from_kraus, KrausChannel, LabeledOperator};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelFamily {
    /// Noiseless rotation `U(θ)`.
    UnitaryZRotation,
    /// `√p U`, `√(1−p) σ_x U`: the rotation acts before the bit flip.
    PerpDephasingSignalFirst { p: f64 },
    /// `√p U`, `√(1−p) U σ_x`: the bit flip acts before the rotation.
    PerpDephasingNoiseFirst { p: f64 },
    /// `√p U`, `√(1−p) U σ_z`.
    ParallelDephasing { p: f64 },
    /// `√η 1`, `√(1−η) σ_x`; independent of θ.
    BitflipDephasing { eta: f64 },
    /// `[[1, 0], [0, √(1−γ)]]`, `[[0, √γ], [0, 0]]`; independent of θ.
    AmplitudeDamping { gamma: f64 },
}

impl ChannelFamily {
    pub fn name(&self) -> &'static str {
        match self {
            ChannelFamily::UnitaryZRotation => "unitary_z_rotation",
            ChannelFamily::PerpDephasingSignalFirst { .. } => "perp_dephasing_signal_first",
            ChannelFamily::PerpDephasingNoiseFirst { .. } => "perp_dephasing_noise_first",
            ChannelFamily::ParallelDephasing { .. } => "parallel_dephasing",
            ChannelFamily::BitflipDephasing { .. } => "bitflip_dephasing",
            ChannelFamily::AmplitudeDamping { .. } => "amplitude_damping",
        }
    }

    fn noise_parameter(&self) -> Option<(&'static str, f64)> {
        match *self {
            ChannelFamily::UnitaryZRotation => None,
            ChannelFamily::PerpDephasingSignalFirst { p }
            | ChannelFamily::PerpDephasingNoiseFirst { p }
            | ChannelFamily::ParallelDephasing { p } => Some(("p", p)),
            ChannelFamily::BitflipDephasing { eta } => Some(("eta", eta)),
            ChannelFamily::AmplitudeDamping { gamma } => Some(("gamma", gamma)),
        }
    }

    /// Whether the family carries the rotation parameter at all.
    pub fn is_phase_encoded(&self) -> bool {
        !matches!(self, ChannelFamily::BitflipDephasing { .. } | ChannelFamily::AmplitudeDamping { .. })
    }
}

/// Default dephasing strength for the phase-encoded noisy families.
pub const DEFAULT_NOISE_P: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamChannelModel {
    family: ChannelFamily,
}

pub fn make_channel(family: ChannelFamily) -> Result<ParamChannelModel> {
    if let Some((name, v)) = family.noise_parameter() {
        if !(0.0..=1.0).contains(&v) || !v.is_finite() {
            return Err(Error::InvalidParameter(format!("{name} = {v} outside [0, 1]")));
        }
    }
    Ok(ParamChannelModel { family })
}

fn rotation(theta: f64) -> CMat {
    CMat::from_row_slice(2, 2, &[C64::from_polar(1.0, -theta / 2.0), ZERO, ZERO, C64::from_polar(1.0, theta / 2.0)])
}

fn rotation_derivative(theta: f64) -> CMat {
    pauli_z() * rotation(theta) * c(0.0, -0.5)
}

fn scale(m: CMat, s: f64) -> CMat {
    m * c(s, 0.0)
}

impl ParamChannelModel {
    pub fn family(&self) -> ChannelFamily {
        self.family
    }

    fn kraus_list(&self, theta: f64) -> Vec<CMat> {
        let u = rotation(theta);
        match self.family {
            ChannelFamily::UnitaryZRotation => vec![u],
            ChannelFamily::PerpDephasingSignalFirst { p } => {
                vec![scale(u.clone(), p.sqrt()), scale(pauli_x() * u, (1.0 - p).sqrt())]
            }
            ChannelFamily::PerpDephasingNoiseFirst { p } => {
                vec![scale(u.clone(), p.sqrt()), scale(u * pauli_x(), (1.0 - p).sqrt())]
            }
            ChannelFamily::ParallelDephasing { p } => {
                vec![scale(u.clone(), p.sqrt()), scale(u * pauli_z(), (1.0 - p).sqrt())]
            }
            ChannelFamily::BitflipDephasing { eta } => {
                vec![scale(linalg::identity(2), eta.sqrt()), scale(pauli_x(), (1.0 - eta).sqrt())]
            }
            ChannelFamily::AmplitudeDamping { gamma } => vec![
                CMat::from_row_slice(2, 2, &[c(1.0, 0.0), ZERO, ZERO, c((1.0 - gamma).sqrt(), 0.0)]),
                CMat::from_row_slice(2, 2, &[ZERO, c(gamma.sqrt(), 0.0), ZERO, ZERO]),
            ],
        }
    }

    pub fn kraus_at(&self, theta: f64) -> KrausChannel {
        KrausChannel::new(self.kraus_list(theta)).expect("catalog channels are trace preserving")
    }

    pub fn dkraus_at(&self, theta: f64) -> Vec<CMat> {
        let du = rotation_derivative(theta);
        match self.family {
            ChannelFamily::UnitaryZRotation => vec![du],
            ChannelFamily::PerpDephasingSignalFirst { p } => {
                vec![scale(du.clone(), p.sqrt()), scale(pauli_x() * du, (1.0 - p).sqrt())]
            }
            ChannelFamily::PerpDephasingNoiseFirst { p } => {
                vec![scale(du.clone(), p.sqrt()), scale(du * pauli_x(), (1.0 - p).sqrt())]
            }
            ChannelFamily::ParallelDephasing { p } => {
                vec![scale(du.clone(), p.sqrt()), scale(du * pauli_z(), (1.0 - p).sqrt())]
            }
            ChannelFamily::BitflipDephasing { .. } | ChannelFamily::AmplitudeDamping { .. } => {
                vec![CMat::zeros(2, 2); 2]
            }
        }
    }
}

/// Central differences `(K(θ+h) − K(θ−h)) / 2h` over the Kraus list.
pub fn finite_difference_derivative(model: &ParamChannelModel, theta: f64, step: f64) -> Result<Vec<CMat>> {
    if step <= 0.0 || !step.is_finite() {
        return Err(Error::InvalidParameter(format!("step must be positive, got {step}")));
    }
    let plus = model.kraus_list(theta + step);
    let minus = model.kraus_list(theta - step);
    Ok(plus.iter().zip(&minus).map(|(a, b)| (a - b) * c(0.5 / step, 0.0)).collect())
}

/// `(1 − p) C1 + p C2` for Choi operators on the same spaces.
pub fn convex_interpolation(c1: &LabeledOperator, c2: &LabeledOperator, p: f64) -> Result<LabeledOperator> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("mixing weight {p} outside [0, 1]")));
    }
    if c1.spaces() != c2.spaces() {
        return Err(Error::DimensionMismatch("interpolated Choi operators live on different spaces".into()));
    }
    c1.scaled(1.0 - p).add(&c2.scaled(p))
}

/// One grid point of a Kraus path extracted from a family of Choi operators.
#[derive(Debug, Clone)]
pub struct PathPoint {
    pub s: f64,
    pub kraus: Vec<CMat>,
    pub dkraus: Vec<CMat>,
    /// Smallest overlap between matched eigenvectors at `s ± step`.
    pub min_overlap: f64,
    pub flagged: bool,
}

impl PathPoint {
    pub fn channel(&self) -> KrausChannel {
        KrausChannel::new_unchecked(self.kraus.clone()).expect("consistent shapes")
    }
}

/// Matched overlaps below this mark a point as discontinuous.
pub const ALIGNMENT_THRESHOLD: f64 = 0.99;

struct Eigen {
    values: Vec<f64>,
    vectors: CMat,
}

fn choi_eigen(choi: &LabeledOperator, rank_tol: f64) -> Result<Eigen> {
    let (mut values, vectors) = choi_eigen_checked(choi, rank_tol)?;
    // Descending order.
    values.reverse();
    let n = values.len();
    let vectors = CMat::from_fn(n, n, |i, j| vectors[(i, n - 1 - j)]);
    Ok(Eigen { values, vectors })
}

/// Fixes the phase of each column so its largest-magnitude entry is real positive.
fn fix_phase_by_largest(v: &mut CMat) {
    for j in 0..v.ncols() {
        let col = v.column(j);
        let (imax, _) = col.iter().enumerate().fold((0, -1.0), |acc, (i, z)| {
            if z.norm() > acc.1 + 1e-12 { (i, z.norm()) } else { acc }
        });
        let z = v[(imax, j)];
        if z.norm() > 0.0 {
            let ph = z.conj() / z.norm();
            for i in 0..v.nrows() {
                v[(i, j)] *= ph;
            }
        }
    }
}

/// Reorders and rephases `other`'s leading `r` eigenvectors to follow
/// `reference`'s, returning the aligned vectors, values and the smallest
/// matched overlap.
fn align(reference: &Eigen, other: &Eigen, r: usize) -> (CMat, Vec<f64>, f64) {
    let n = other.vectors.nrows();
    let mut used = vec![false; n];
    let mut vecs = CMat::zeros(n, r);
    let mut vals = vec![0.0; r];
    let mut min_overlap = f64::INFINITY;
    for j in 0..r {
        let rj = reference.vectors.column(j);
        let mut best = (usize::MAX, -1.0, ZERO);
        for k in 0..n {
            if used[k] {
                continue;
            }
            let ov = rj.dotc(&other.vectors.column(k));
            if ov.norm() > best.1 {
                best = (k, ov.norm(), ov);
            }
        }
        let (k, mag, ov) = best;
        used[k] = true;
        min_overlap = min_overlap.min(mag);
        let ph = if mag > 0.0 { ov.conj() / mag } else { c(1.0, 0.0) };
        for i in 0..n {
            vecs[(i, j)] = other.vectors[(i, k)] * ph;
        }
        vals[j] = other.values[k];
    }
    (vecs, vals, min_overlap)
}

fn kraus_from_eigen(vectors: &CMat, values: &[f64], d_out: usize, d_in: usize) -> Vec<CMat> {
    values
        .iter()
        .enumerate()
        .map(|(j, &lam)| {
            let s = lam.max(0.0).sqrt();
            let col: Vec<C64> = vectors.column(j).iter().map(|z| z * s).collect();
            linalg::unvectorize(&col, d_out, d_in)
        })
        .collect()
}

/// Kraus operators and their central-difference derivatives along a Choi
/// family `C(s)` on `(output, input)`.
///
/// At each grid point the Choi operator is eigendecomposed with eigenvalues
/// in descending order and eigenvector phases fixed by making the
/// largest-magnitude component real positive. The decompositions at
/// `s ± step` are matched to it by maximal overlap and rephased so the
/// overlaps are real positive. Every point carries the same number of Kraus
/// operators, the largest numerical rank seen on the grid; lower-rank points
/// are zero-padded. Points whose matched overlap drops below
/// [`ALIGNMENT_THRESHOLD`] are flagged.
pub fn kraus_path_from_choi_family(
    sampler: impl Fn(f64) -> Result<LabeledOperator>,
    grid: &[f64],
    rank_tol: f64,
    step: f64,
) -> Result<Vec<PathPoint>> {
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("grid must be strictly increasing".into()));
    }
    if step <= 0.0 {
        return Err(Error::InvalidParameter("finite-difference step must be positive".into()));
    }
    let mut centers = Vec::with_capacity(grid.len());
    let mut rank = 0;
    let mut dims = (0, 0);
    for &s in grid {
        let choi = sampler(s)?;
        dims = (choi.spaces()[0].dim, choi.spaces()[1].dim);
        let mut e = choi_eigen(&choi, rank_tol)?;
        fix_phase_by_largest(&mut e.vectors);
        rank = rank.max(e.values.iter().filter(|&&v| v > rank_tol).count());
        centers.push(e);
    }
    let (d_out, d_in) = dims;
    let mut out = Vec::with_capacity(grid.len());
    for (&s, center) in grid.iter().zip(&centers) {
        let plus = choi_eigen(&sampler(s + step)?, rank_tol)?;
        let minus = choi_eigen(&sampler(s - step)?, rank_tol)?;
        let (vp, lp, op) = align(center, &plus, rank);
        let (vm, lm, om) = align(center, &minus, rank);
        let vc = center.vectors.columns(0, rank).into_owned();
        let lc: Vec<f64> = center.values[..rank].to_vec();
        let kc = kraus_from_eigen(&vc, &lc, d_out, d_in);
        let kp = kraus_from_eigen(&vp, &lp, d_out, d_in);
        let km = kraus_from_eigen(&vm, &lm, d_out, d_in);
        let dk = kp.iter().zip(&km).map(|(a, b)| (a - b) * c(0.5 / step, 0.0)).collect();
        let min_overlap = op.min(om);
        let flagged = min_overlap < ALIGNMENT_THRESHOLD;
        if flagged {
            warn!("Kraus path gauge alignment failed at s = {s} (overlap {min_overlap:.4})");
        }
        out.push(PathPoint { s, kraus: kc, dkraus: dk, min_overlap, flagged });
    }
    Ok(out)
}

/// Channels with prior probabilities; all channels share input and output dimensions.
#[derive(Debug, Clone)]
pub struct DiscriminationInstance {
    channels: Vec<KrausChannel>,
    priors: Vec<f64>,
    d_in: usize,
    d_out: usize,
}

impl DiscriminationInstance {
    pub fn new(channels: Vec<KrausChannel>, priors: Vec<f64>) -> Result<Self> {
        if channels.is_empty() || channels.len() != priors.len() {
            return Err(Error::InvalidParameter("need one prior per channel".into()));
        }
        if priors.iter().any(|&p| p < 0.0 || !p.is_finite()) {
            return Err(Error::InvalidParameter("priors must be nonnegative".into()));
        }
        let total: f64 = priors.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("priors sum to {total}")));
        }
        let (d_in, d_out) = (channels[0].d_in(), channels[0].d_out());
        if channels.iter().any(|ch| ch.d_in() != d_in || ch.d_out() != d_out) {
            return Err(Error::DimensionMismatch("channels differ in dimensions".into()));
        }
        Ok(Self { channels, priors, d_in, d_out })
    }

    /// Two channels with equal priors.
    pub fn pair(c1: KrausChannel, c2: KrausChannel) -> Result<Self> {
        Self::new(vec![c1, c2], vec![0.5, 0.5])
    }

    pub fn channels(&self) -> &[KrausChannel] {
        &self.channels
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn k(&self) -> usize {
        self.channels.len()
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    /// Choi operators on `(O, I)`.
    pub fn chois(&self) -> Vec<LabeledOperator> {
        self.channels.iter().map(|ch| choi_from_kraus(ch).expect("validated channels")).collect()
    }

    /// Same channels with priors and channels permuted by `perm`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        Self::new(
            perm.iter().map(|&i| self.channels[i].clone()).collect(),
            perm.iter().map(|&i| self.priors[i]).collect(),
        )
    }
}

/// `C_θ0` against a first-order shifted channel with Kraus operators
/// `√(1−ε)(K_i + Δθ K̇_i)` and the completing operator
/// `sqrt(1 − Σ_i K_{2,i}†K_{2,i})`.
#[derive(Debug, Clone)]
pub struct DiscriminationPair {
    pub first: KrausChannel,
    pub second: KrausChannel,
    pub epsilon: f64,
    /// `ε / Δθ²`.
    pub a: f64,
}

/// Smallest `ε = aΔθ²` that keeps the completing operator well defined.
///
/// `a` is found by doubling from a small start until the eigenvalue check of
/// `1 − (1−ε) Σ_i (K_i + ΔθK̇_i)†(K_i + ΔθK̇_i) ⪰ 0` passes, then refined by
/// bisection between the last failing and first passing values.
pub fn discrimination_pair_from_model(
    model: &ParamChannelModel,
    theta0: f64,
    delta_theta: f64,
    a_search_max: f64,
) -> Result<DiscriminationPair> {
    if delta_theta <= 0.0 || !delta_theta.is_finite() {
        return Err(Error::InvalidParameter("Δθ must be positive".into()));
    }
    let k = model.kraus_list(theta0);
    let dk = model.dkraus_at(theta0);
    let shifted: Vec<CMat> = k.iter().zip(&dk).map(|(a, b)| a + b * c(delta_theta, 0.0)).collect();
    let d = k[0].ncols();
    let s: CMat = shifted.iter().map(|m| m.adjoint() * m).sum();
    let remainder = |eps: f64| -> CMat { linalg::identity(d) - &s * c(1.0 - eps, 0.0) };
    let feasible = |a: f64| -> bool {
        let eps = a * delta_theta * delta_theta;
        eps <= 1.0 && linalg::min_eigenvalue(&remainder(eps)) >= -1e-14
    };

    let a = if feasible(0.0) {
        0.0
    } else {
        let mut hi = a_search_max * 2f64.powi(-40);
        while !feasible(hi) {
            hi *= 2.0;
            if hi > a_search_max {
                return Err(Error::Infeasible(format!(
                    "no a ≤ {a_search_max} makes the completing Kraus operator well defined"
                )));
            }
        }
        let mut lo = hi / 2.0;
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if feasible(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    let epsilon = a * delta_theta * delta_theta;
    let w = (1.0 - epsilon).sqrt();
    let mut second: Vec<CMat> = shifted.iter().map(|m| m * c(w, 0.0)).collect();
    second.push(linalg::sqrtm_psd(&remainder(epsilon), 1e-12));
    let second = KrausChannel::new_unchecked(second)?.pruned(1e-9);
    let first = KrausChannel::new(k)?;
    let res = second.completeness_residual();
    if res > crate::tensor::COMPLETENESS_TOL {
        return Err(Error::NotTracePreserving(res));
    }
    Ok(DiscriminationPair { first, second, epsilon, a })
}

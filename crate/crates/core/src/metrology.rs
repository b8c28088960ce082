//! Estimation-theoretic bounds on discrimination.
//!
//! A one-parameter channel family `C_θ` with Kraus operators `K_i(θ)` gives
//! an upper bound `F_N` on the quantum Fisher information reachable by any
//! adaptive strategy with `N` uses. Through the Bures angle this turns into
//! a lower bound on the error of discriminating `C_θ` from `C_{θ+Δθ}`.
//! The module also holds the algebraic span tests that decide whether
//! Heisenberg scaling (for estimation) or finite-use perfect discrimination
//! are ruled out.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channels::PathPoint;
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, RMat, C64, I, ONE, ZERO};
use crate::sdp::{opnorm_epigraph, psd_dominance_epigraph, AffineMatrix, SdpProblem, SolveStatus, SolverOptions};
use crate::tensor::KrausChannel;

/// Least-squares residual below which a target is taken to lie in a span.
pub const SPAN_TOL: f64 = 1e-7;

/// Default number of nodes for path integration.
pub const DEFAULT_PATH_POINTS: usize = 101;

/// Real parametrization of an `r × r` Hermitian matrix: one real parameter
/// per diagonal entry, then the real and imaginary part of each `(i, j)`
/// with `i < j`.
fn hermitian_params(r: usize) -> Vec<(usize, usize, C64)> {
    let mut out = Vec::with_capacity(r * r);
    for i in 0..r {
        out.push((i, i, ONE));
    }
    for i in 0..r {
        for j in i + 1..r {
            out.push((i, j, ONE));
            out.push((i, j, I));
        }
    }
    out
}

/// The Hermitian matrix with parameter vector `x`.
fn hermitian_from_params(r: usize, x: &[f64]) -> CMat {
    let mut h = CMat::zeros(r, r);
    for (&(i, j, unit), &v) in hermitian_params(r).iter().zip(x) {
        h[(i, j)] += unit * v;
        if i != j {
            h[(j, i)] += unit.conj() * v;
        }
    }
    h
}

fn check_model(k: &[CMat], kdot: &[CMat]) -> Result<()> {
    if k.is_empty() || k.len() != kdot.len() {
        return Err(Error::DimensionMismatch("need one derivative per Kraus operator".into()));
    }
    let shape = k[0].shape();
    if k.iter().chain(kdot).any(|m| m.shape() != shape) {
        return Err(Error::DimensionMismatch("Kraus operators and derivatives differ in shape".into()));
    }
    Ok(())
}

/// `A(h)` with rows `K̇_i − i Σ_j h_ij K_j` stacked, as an affine map of the
/// Hermitian parameters.
fn stacked_a(k: &[CMat], kdot: &[CMat]) -> AffineMatrix {
    let r = k.len();
    let (d_out, d_in) = k[0].shape();
    let mut constant = CMat::zeros(r * d_out, d_in);
    for (i, kd) in kdot.iter().enumerate() {
        constant.view_mut((i * d_out, 0), (d_out, d_in)).copy_from(kd);
    }
    let terms = hermitian_params(r)
        .into_iter()
        .enumerate()
        .map(|(p, (i, j, unit))| {
            let mut t = CMat::zeros(r * d_out, d_in);
            // h_ij = unit, h_ji = conj(unit).
            t.view_mut((i * d_out, 0), (d_out, d_in)).copy_from(&(&k[j] * (-I * unit)));
            if i != j {
                let mut v = t.view_mut((j * d_out, 0), (d_out, d_in));
                v += &k[i] * (-I * unit.conj());
            }
            (p, t)
        })
        .collect();
    AffineMatrix { constant, terms }
}

/// `β(h) = i Σ_i K_i† A_i(h)` for the stacked affine map `A`.
fn beta_from(k: &[CMat], a: &AffineMatrix) -> AffineMatrix {
    let d_out = k[0].nrows();
    let contract = |m: &CMat| -> CMat {
        k.iter()
            .enumerate()
            .map(|(i, ki)| ki.adjoint() * m.view((i * d_out, 0), (d_out, m.ncols())) * I)
            .sum()
    };
    AffineMatrix {
        constant: contract(&a.constant),
        terms: a.terms.iter().map(|(p, t)| (*p, contract(t))).collect(),
    }
}

/// `α(h) = A(h)† A(h)` and `β(h)` at a given Hermitian `h`.
pub fn alpha_beta(k: &[CMat], kdot: &[CMat], h: &CMat) -> (CMat, CMat) {
    let rows: Vec<CMat> = (0..k.len())
        .map(|i| {
            let mut a = kdot[i].clone();
            for (j, kj) in k.iter().enumerate() {
                a -= kj * (I * h[(i, j)]);
            }
            a
        })
        .collect();
    let alpha = rows.iter().map(|a| a.adjoint() * a).sum();
    let beta = k.iter().zip(&rows).map(|(ki, a)| ki.adjoint() * a * I).sum();
    (alpha, beta)
}

/// `‖α(h)‖ + w ‖β(h)‖` evaluated exactly.
fn step_objective(k: &[CMat], kdot: &[CMat], h: &CMat, w: f64) -> f64 {
    let (alpha, beta) = alpha_beta(k, kdot, h);
    let a = linalg::eigvalsh(&linalg::hermitian_part(&alpha)).last().copied().unwrap_or(0.0).max(0.0);
    if w == 0.0 {
        a
    } else {
        a + w * linalg::op_norm(&beta)
    }
}

/// Tighter than the interior-point defaults: the recursion sums many
/// increments, so each one has to be accurate well below the target
/// tolerance on `F_N`.
fn qfi_solver_options() -> SolverOptions {
    SolverOptions { feas_tol: 1e-11, gap_tol: 1e-11, max_iter: 200 }
}

/// `min_h ‖α(h)‖ + w ‖β(h)‖` as one SDP. Returns the minimizer and the
/// objective re-evaluated exactly at it, so the result is a valid
/// upper bound for the minimum regardless of solver accuracy.
fn minimize_step(k: &[CMat], kdot: &[CMat], w: f64, opts: &SolverOptions) -> Result<(CMat, f64)> {
    let r = k.len();
    let n_h = r * r;
    let a = stacked_a(k, kdot);
    let lam = n_h;
    let n_vars = if w > 0.0 { n_h + 2 } else { n_h + 1 };
    let mut p = SdpProblem::new(n_vars);
    p.objective[lam] = 1.0;
    p.lmi_blocks.push(psd_dominance_epigraph(&a, lam));
    if w > 0.0 {
        let mu = n_h + 1;
        p.objective[mu] = w;
        p.lmi_blocks.push(opnorm_epigraph(&beta_from(k, &a), mu));
    }
    let sol = p.solve(opts)?;
    if sol.status == SolveStatus::Infeasible {
        return Err(Error::Solver { status: sol.status, context: "QFI step".into() });
    }
    let h = hermitian_from_params(r, &sol.x[..n_h]);
    let mut value = step_objective(k, kdot, &h, w);
    // h = 0 is always feasible; keep whichever is better.
    let zero = CMat::zeros(r, r);
    let at_zero = step_objective(k, kdot, &zero, w);
    let h = if at_zero < value {
        value = at_zero;
        zero
    } else {
        h
    };
    if sol.status != SolveStatus::Optimal && (value - sol.objective_value).abs() > 1e-6 * (1.0 + value.abs()) {
        return Err(Error::Solver { status: sol.status, context: "QFI step did not converge".into() });
    }
    Ok((h, value))
}

#[derive(Debug, Clone)]
pub struct QfiBoundSeries {
    /// `F_1, …, F_N`.
    pub values: Vec<f64>,
    /// The minimizing `h` of each step.
    pub minimizers: Vec<CMat>,
}

impl QfiBoundSeries {
    /// `F_n` for `n ≥ 1`.
    pub fn at(&self, n: usize) -> f64 {
        self.values[n - 1]
    }
}

/// Upper bounds `F_1 … F_N` on the QFI of `N` adaptive uses:
/// `F_1 = 4 min_h ‖α(h)‖` and `F_{n+1} = F_n + 4 min_h (‖α(h)‖ + √F_n ‖β(h)‖)`.
pub fn qfi_iterative_bound(k: &[CMat], kdot: &[CMat], n: usize) -> Result<QfiBoundSeries> {
    qfi_iterative_bound_with(k, kdot, n, &qfi_solver_options())
}

pub fn qfi_iterative_bound_with(k: &[CMat], kdot: &[CMat], n: usize, opts: &SolverOptions) -> Result<QfiBoundSeries> {
    check_model(k, kdot)?;
    let mut values = Vec::with_capacity(n);
    let mut minimizers = Vec::with_capacity(n);
    let mut f = 0.0;
    for step in 0..n {
        let w = if step == 0 { 0.0 } else { f64::sqrt(f) };
        let (h, v) = minimize_step(k, kdot, w, opts)?;
        f += 4.0 * v;
        values.push(f);
        minimizers.push(h);
    }
    Ok(QfiBoundSeries { values, minimizers })
}

#[derive(Debug, Clone)]
pub struct SpanCheckReport {
    /// Whether the checked condition holds, i.e. the target is *not* in the span.
    pub condition_holds: bool,
    /// Frobenius norm of the least-squares misfit.
    pub residual: f64,
    /// Coefficients of the best fit when the target is in the span.
    pub witness: Option<CMat>,
}

/// Least-squares fit of `target` by real combinations of `ops`; returns the
/// real coefficients and the Frobenius residual.
fn real_span_fit(ops: &[CMat], target: &CMat) -> (DVector<f64>, f64) {
    let (rows, cols) = target.shape();
    let n = rows * cols;
    let mut a = RMat::zeros(2 * n, ops.len());
    for (j, op) in ops.iter().enumerate() {
        for (t, z) in op.iter().enumerate() {
            a[(t, j)] = z.re;
            a[(n + t, j)] = z.im;
        }
    }
    let b = DVector::from_iterator(2 * n, target.iter().map(|z| z.re).chain(target.iter().map(|z| z.im)));
    linalg::lstsq(&a, &b, 1e-12)
}

/// Hamiltonian-not-in-Kraus-span test at one parameter value. With
/// `H = i Σ_i K_i† K̇_i`, the condition holds (Heisenberg scaling not ruled
/// out) iff no Hermitian `h` has `Σ_ij h_ij K_i† K_j = H`.
pub fn hnks_check(k: &[CMat], kdot: &[CMat], tol: f64) -> Result<SpanCheckReport> {
    check_model(k, kdot)?;
    let r = k.len();
    let target: CMat = k.iter().zip(kdot).map(|(a, b)| a.adjoint() * b * I).sum();
    let ops: Vec<CMat> = hermitian_params(r)
        .into_iter()
        .map(|(i, j, unit)| {
            let m = &k[i].adjoint() * &k[j] * unit;
            if i == j {
                m
            } else {
                &m + m.adjoint()
            }
        })
        .collect();
    let (x, residual) = real_span_fit(&ops, &target);
    let holds = residual > tol;
    Ok(SpanCheckReport {
        condition_holds: holds,
        residual,
        witness: (!holds).then(|| hermitian_from_params(r, x.as_slice())),
    })
}

/// Which linear span of `{K_{1i}† K_{2j}}` the identity is tested against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpanKind {
    /// Complex linear combinations.
    #[default]
    Complex,
    /// Real combinations of the Hermitian operators `M + M†` and `i(M − M†)`.
    Hermitian,
}

/// Second condition for finite-use perfect discrimination of two channels:
/// holds iff `1 ∉ span{K_{1i}† K_{2j}}`. Disjointness is checked separately
/// by [`disjointness_heuristic`].
pub fn finite_discrimination_check(
    first: &KrausChannel,
    second: &KrausChannel,
    tol: f64,
    kind: SpanKind,
) -> Result<SpanCheckReport> {
    if first.d_in() != second.d_in() || first.d_out() != second.d_out() {
        return Err(Error::DimensionMismatch("channels differ in dimensions".into()));
    }
    let (r1, r2) = (first.kraus().len(), second.kraus().len());
    let mut ops = Vec::with_capacity(4 * r1 * r2);
    for a in first.kraus() {
        for b in second.kraus() {
            let m = a.adjoint() * b;
            match kind {
                SpanKind::Complex => {
                    ops.push(m.clone());
                    ops.push(m * I);
                }
                SpanKind::Hermitian => {
                    ops.push(&m + m.adjoint());
                    ops.push((&m - m.adjoint()) * I);
                }
            }
        }
    }
    let target = linalg::identity(first.d_in());
    let (x, residual) = real_span_fit(&ops, &target);
    let holds = residual > tol;
    let witness = (!holds).then(|| {
        let mut w = CMat::zeros(r1, r2);
        for i in 0..r1 {
            for j in 0..r2 {
                let (u, v) = (x[2 * (i * r2 + j)], x[2 * (i * r2 + j) + 1]);
                w[(i, j)] = match kind {
                    SpanKind::Complex => c(u, v),
                    // Coefficient of M in u(M + M†) + v i(M − M†).
                    SpanKind::Hermitian => c(u, v),
                };
            }
        }
        w
    });
    Ok(SpanCheckReport { condition_holds: holds, residual, witness })
}

#[derive(Debug, Clone)]
pub struct DisjointnessReport {
    /// Conclusive when true; false means nothing was found.
    pub found_input: bool,
    /// Best input found, on system ⊗ qubit ancilla.
    pub witness: DVector<C64>,
    /// Smallest principal angle between the two output supports at the witness.
    pub angle: f64,
}

/// Principal angles below this count as a shared support direction.
pub const DISJOINTNESS_ANGLE: f64 = 1e-4;

fn support_basis(rho: &CMat) -> CMat {
    let (vals, vecs) = linalg::eigh(rho);
    let top = vals.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > 1e-10 * top.max(1e-300)).collect();
    CMat::from_fn(rho.nrows(), keep.len(), |i, j| vecs[(i, keep[j])])
}

/// Smallest principal angle between the supports of two states.
fn smallest_principal_angle(rho1: &CMat, rho2: &CMat) -> f64 {
    let p = support_basis(rho1);
    let q = support_basis(rho2);
    if p.ncols() + q.ncols() > rho1.nrows() {
        // Supports of total dimension above the space dimension must meet.
        return 0.0;
    }
    let s = (p.adjoint() * q).singular_values();
    s.iter().copied().fold(0.0, f64::max).min(1.0).acos()
}

/// Searches pure inputs on system ⊗ qubit ancilla for outputs of the two
/// channels with disjoint supports. Tries computational-basis, uniform
/// superposition and maximally entangled inputs, then `samples` Haar-random
/// ones.
pub fn disjointness_heuristic(
    first: &KrausChannel,
    second: &KrausChannel,
    samples: usize,
    seed: u64,
) -> Result<DisjointnessReport> {
    if samples == 0 {
        return Err(Error::InvalidParameter("need at least one sample".into()));
    }
    if first.d_in() != second.d_in() || first.d_out() != second.d_out() {
        return Err(Error::DimensionMismatch("channels differ in dimensions".into()));
    }
    let d = first.d_in();
    let dim = 2 * d;
    let extend = |ch: &KrausChannel| -> Vec<CMat> { ch.kraus().iter().map(|k| k.kronecker(&linalg::identity(2))).collect() };
    let (k1, k2) = (extend(first), extend(second));
    let output = |ks: &[CMat], psi: &DVector<C64>| -> CMat {
        ks.iter().map(|k| {
            let v = k * psi;
            &v * v.adjoint()
        })
        .sum()
    };
    let mut candidates: Vec<DVector<C64>> = Vec::new();
    for i in 0..dim {
        let mut v = DVector::zeros(dim);
        v[i] = ONE;
        candidates.push(v);
    }
    candidates.push(DVector::from_element(dim, c(1.0 / (dim as f64).sqrt(), 0.0)));
    let mut me = DVector::from_element(dim, ZERO);
    for i in 0..d.min(2) {
        me[i * 2 + i] = c(1.0 / (d.min(2) as f64).sqrt(), 0.0);
    }
    candidates.push(me);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = (candidates[0].clone(), -1.0);
    let evaluate = |psi: DVector<C64>, best: &mut (DVector<C64>, f64)| {
        let angle = smallest_principal_angle(&output(&k1, &psi), &output(&k2, &psi));
        if angle > best.1 {
            *best = (psi, angle);
        }
    };
    for psi in candidates {
        evaluate(psi, &mut best);
    }
    for _ in 0..samples {
        let g = linalg::ginibre(&mut rng, dim, 1);
        let norm = g.norm();
        evaluate(DVector::from_iterator(dim, g.iter().map(|z| z / norm)), &mut best);
    }
    let (witness, angle) = best;
    Ok(DisjointnessReport { found_input: angle > DISJOINTNESS_ANGLE, witness, angle })
}

/// `½[1 − sin(min(Δθ √F / 2, π/2))]`, exactly 0 once the clamp engages.
pub fn err_bound_from_qfi(f: f64, delta_theta: f64) -> f64 {
    angle_to_error(0.5 * delta_theta * f.max(0.0).sqrt())
}

fn angle_to_error(angle: f64) -> f64 {
    if angle >= FRAC_PI_2 {
        0.0
    } else {
        0.5 * (1.0 - angle.sin())
    }
}

/// How path-integration nodes are laid out over `[s1, s2]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GridKind {
    /// Equal cells in `s`.
    Uniform,
    /// Equal cells in `u` with `s = s1 + (s2 − s1)(1 − cos πu)/2`, which
    /// crowds nodes towards both ends. Where the path changes rank at an
    /// end, `√F` blows up like the inverse square root of the distance to
    /// it; in `u` the integrand stays bounded.
    #[default]
    Cosine,
}

/// Offset integration grid: the integration variable `u ∈ [0, 1]` is split
/// into `g` equal cells and every node sits at a cell midpoint, so neither
/// end of the interval is evaluated.
#[derive(Debug, Clone)]
pub struct PathGrid {
    pub kind: GridKind,
    pub range: (f64, f64),
    pub u: Vec<f64>,
    pub nodes: Vec<f64>,
    /// `ds/du` at each node.
    pub jacobian: Vec<f64>,
}

impl PathGrid {
    pub fn new(kind: GridKind, s1: f64, s2: f64, g: usize) -> Result<Self> {
        if g == 0 || !(s2 > s1) {
            return Err(Error::InvalidParameter("need g ≥ 1 and s1 < s2".into()));
        }
        let len = s2 - s1;
        let u: Vec<f64> = (0..g).map(|j| (j as f64 + 0.5) / g as f64).collect();
        let (nodes, jacobian) = match kind {
            GridKind::Uniform => (u.iter().map(|&t| s1 + len * t).collect(), vec![len; g]),
            GridKind::Cosine => (
                u.iter().map(|&t| s1 + len * 0.5 * (1.0 - (PI * t).cos())).collect(),
                u.iter().map(|&t| len * 0.5 * PI * (PI * t).sin()).collect(),
            ),
        };
        Ok(Self { kind, range: (s1, s2), u, nodes, jacobian })
    }
}

#[derive(Debug, Clone)]
pub struct IntegratedBound {
    pub bound: f64,
    /// `½ ∫ √F_N(s) ds`, the bound on the Bures angle.
    pub angle: f64,
    /// `F_N` at the nodes that were used.
    pub f_values: Vec<f64>,
    pub nodes: Vec<f64>,
    /// Indices of flagged path points that were left out.
    pub excluded: Vec<usize>,
}

/// Path-integrated error bound for `N` uses. `path[j]` must be sampled at
/// `grid.nodes[j]`.
///
/// The angle `½ ∫ √F_N(s) ds = ½ ∫ √F_N(s(u)) s'(u) du` is integrated with
/// the trapezoid rule between consecutive nodes in `u`; the half cells
/// between the ends of `[0, 1]` and the outermost nodes take the value of
/// the nearest node. Flagged points make the call fail unless
/// `exclude_flagged` is set, in which case the rule bridges over them.
pub fn integrated_err_bound(path: &[PathPoint], grid: &PathGrid, n: usize, exclude_flagged: bool) -> Result<IntegratedBound> {
    let mut all = integrated_err_bounds(path, grid, n, exclude_flagged)?;
    Ok(all.pop().expect("n ≥ 1"))
}

/// [`integrated_err_bound`] for every `N = 1..=n_max`, sharing one QFI
/// series per node.
pub fn integrated_err_bounds(path: &[PathPoint], grid: &PathGrid, n_max: usize, exclude_flagged: bool) -> Result<Vec<IntegratedBound>> {
    if path.len() != grid.nodes.len() {
        return Err(Error::DimensionMismatch("one path point per grid node expected".into()));
    }
    if let Some((p, s)) = path.iter().zip(&grid.nodes).find(|(p, s)| (p.s - **s).abs() > 1e-12 * (1.0 + s.abs())) {
        return Err(Error::InvalidParameter(format!("path point at {} does not match grid node {s}", p.s)));
    }
    let flagged: Vec<usize> = path.iter().enumerate().filter(|(_, p)| p.flagged).map(|(i, _)| i).collect();
    if !flagged.is_empty() && !exclude_flagged {
        return Err(Error::FlaggedPoints(flagged));
    }
    let used: Vec<usize> = (0..path.len()).filter(|&i| !path[i].flagged).collect();
    if used.is_empty() || n_max == 0 {
        return Err(Error::InvalidParameter("no usable path points".into()));
    }
    let series = used
        .iter()
        .map(|&i| qfi_iterative_bound(&path[i].kraus, &path[i].dkraus, n_max))
        .collect::<Result<Vec<_>>>()?;
    let u: Vec<f64> = used.iter().map(|&i| grid.u[i]).collect();
    let nodes: Vec<f64> = used.iter().map(|&i| grid.nodes[i]).collect();
    let last = u.len() - 1;
    let mut out = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let f_values: Vec<f64> = series.iter().map(|s| s.at(n)).collect();
        let g: Vec<f64> = used.iter().zip(&f_values).map(|(&i, f)| 0.5 * f.max(0.0).sqrt() * grid.jacobian[i]).collect();
        let mut angle = g[0] * u[0] + g[last] * (1.0 - u[last]);
        for w in 0..last {
            angle += 0.5 * (g[w] + g[w + 1]) * (u[w + 1] - u[w]);
        }
        out.push(IntegratedBound {
            bound: angle_to_error(angle),
            angle,
            f_values,
            nodes: nodes.clone(),
            excluded: flagged.clone(),
        });
    }
    Ok(out)
}

fn check_density(rho: &CMat) -> Result<()> {
    if !rho.is_square() {
        return Err(Error::DimensionMismatch("density matrix must be square".into()));
    }
    let scale = 1.0 + linalg::frobenius(rho);
    let defect = linalg::hermiticity_defect(rho);
    if defect > 1e-9 * scale {
        return Err(Error::NotHermitian(defect));
    }
    let lmin = linalg::min_eigenvalue(&linalg::hermitian_part(rho));
    if lmin < -1e-9 {
        return Err(Error::NotPositive(lmin));
    }
    let tr = linalg::trace(rho);
    if (tr.re - 1.0).abs() > 1e-9 || tr.im.abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("density matrix has trace {tr}")));
    }
    Ok(())
}

/// `½ ‖ρ1 − ρ2‖_1`.
pub fn trace_distance(rho1: &CMat, rho2: &CMat) -> Result<f64> {
    check_density(rho1)?;
    check_density(rho2)?;
    if rho1.shape() != rho2.shape() {
        return Err(Error::DimensionMismatch("states differ in dimension".into()));
    }
    let diff = linalg::hermitian_part(&(rho1 - rho2));
    Ok(0.5 * linalg::eigvalsh(&diff).iter().map(|v| v.abs()).sum::<f64>())
}

/// Minimal error for equiprobable states, `½(1 − D_tr)`.
pub fn helstrom_error(rho1: &CMat, rho2: &CMat) -> Result<f64> {
    Ok(0.5 * (1.0 - trace_distance(rho1, rho2)?))
}

/// Shape of the early decrease of the error with the number of uses.
///
/// With `δ(N) = ½ − p_err(N)`, fits `δ ≈ a N` and `δ ≈ b √N` by one-parameter
/// least squares and reports each relative residual `‖δ − fit‖ / ‖δ‖`,
/// plus the slope of `log δ` against `log N`.
#[derive(Debug, Clone, Copy)]
pub struct DropFit {
    pub linear_residual: f64,
    pub sqrt_residual: f64,
    pub exponent: f64,
}

impl DropFit {
    pub fn closer_to_linear(&self) -> bool {
        self.linear_residual < self.sqrt_residual
    }
}

pub fn fit_initial_drop(ns: &[usize], p_err: &[f64]) -> Result<DropFit> {
    if ns.len() != p_err.len() || ns.len() < 2 || ns.contains(&0) {
        return Err(Error::InvalidParameter("need at least two points with N ≥ 1".into()));
    }
    let delta: Vec<f64> = p_err.iter().map(|p| 0.5 - p).collect();
    if delta.iter().any(|&d| d <= 0.0) {
        return Err(Error::InvalidParameter("errors must be below one half".into()));
    }
    let norm = delta.iter().map(|d| d * d).sum::<f64>().sqrt();
    let residual = |basis: &dyn Fn(f64) -> f64| -> f64 {
        let xs: Vec<f64> = ns.iter().map(|&n| basis(n as f64)).collect();
        let coef = xs.iter().zip(&delta).map(|(x, d)| x * d).sum::<f64>() / xs.iter().map(|x| x * x).sum::<f64>();
        xs.iter().zip(&delta).map(|(x, d)| (d - coef * x).powi(2)).sum::<f64>().sqrt() / norm
    };
    let lx: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ly: Vec<f64> = delta.iter().map(|d| d.ln()).collect();
    let m = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / m, ly.iter().sum::<f64>() / m);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(DropFit { linear_residual: residual(&|n| n), sqrt_residual: residual(&|n| n.sqrt()), exponent: sxy / sxx })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{discrimination_pair_from_model, make_channel, ChannelFamily};

    fn model(f: ChannelFamily) -> (Vec<CMat>, Vec<CMat>) {
        let m = make_channel(f).unwrap();
        (m.kraus_at(0.0).kraus().to_vec(), m.dkraus_at(0.0))
    }

    #[test]
    fn unitary_reaches_heisenberg() {
        let (k, kd) = model(ChannelFamily::UnitaryZRotation);
        let s = qfi_iterative_bound(&k, &kd, 20).unwrap();
        for (n, f) in s.values.iter().enumerate() {
            let want = ((n + 1) * (n + 1)) as f64;
            assert!((f - want).abs() < 1e-6, "F_{} = {f}", n + 1);
        }
    }

    #[test]
    fn zero_derivative_gives_zero() {
        let (k, kd) = model(ChannelFamily::ParallelDephasing { p: 0.9 });
        let zero: Vec<CMat> = kd.iter().map(|m| CMat::zeros(m.nrows(), m.ncols())).collect();
        let s = qfi_iterative_bound(&k, &zero, 5).unwrap();
        assert!(s.values.iter().all(|f| f.abs() < 1e-9));
    }

    #[test]
    fn dephasing_single_use_matches_state_qfi() {
        // Dephased phase estimation: F_1 = (2p − 1)².
        let p = 0.9;
        let (k, kd) = model(ChannelFamily::ParallelDephasing { p });
        let s = qfi_iterative_bound(&k, &kd, 1).unwrap();
        assert!((s.values[0] - (2.0 * p - 1.0f64).powi(2)).abs() < 1e-7, "{}", s.values[0]);
    }

    #[test]
    fn series_is_nondecreasing() {
        for f in [
            ChannelFamily::ParallelDephasing { p: 0.9 },
            ChannelFamily::PerpDephasingNoiseFirst { p: 0.9 },
            ChannelFamily::PerpDephasingSignalFirst { p: 0.9 },
        ] {
            let (k, kd) = model(f);
            let s = qfi_iterative_bound(&k, &kd, 8).unwrap();
            assert!(s.values.windows(2).all(|w| w[1] >= w[0] - 1e-9));
        }
    }

    #[test]
    fn hnks_classification() {
        let (k, kd) = model(ChannelFamily::ParallelDephasing { p: 0.9 });
        let r = hnks_check(&k, &kd, SPAN_TOL).unwrap();
        assert!(!r.condition_holds && r.residual < 1e-10);
        let h = r.witness.unwrap();
        assert!(linalg::hermiticity_defect(&h) < 1e-12);
        for f in [ChannelFamily::PerpDephasingSignalFirst { p: 0.9 }, ChannelFamily::PerpDephasingNoiseFirst { p: 0.9 }] {
            let (k, kd) = model(f);
            let r = hnks_check(&k, &kd, SPAN_TOL).unwrap();
            assert!(r.condition_holds && r.residual > 1e-3, "{}", r.residual);
        }
        let (k, kd) = model(ChannelFamily::UnitaryZRotation);
        let zero: Vec<CMat> = kd.iter().map(|m| m * ZERO).collect();
        assert!(!hnks_check(&k, &zero, SPAN_TOL).unwrap().condition_holds);
    }

    #[test]
    fn finite_discrimination_examples() {
        let m = make_channel(ChannelFamily::UnitaryZRotation).unwrap();
        let r = finite_discrimination_check(&m.kraus_at(0.0), &m.kraus_at(0.3), SPAN_TOL, SpanKind::Complex).unwrap();
        assert!(r.condition_holds);
        let ch = m.kraus_at(0.0);
        let r = finite_discrimination_check(&ch, &ch, SPAN_TOL, SpanKind::Complex).unwrap();
        assert!(!r.condition_holds);
        let r = finite_discrimination_check(&ch, &ch, SPAN_TOL, SpanKind::Hermitian).unwrap();
        assert!(!r.condition_holds);
    }

    #[test]
    fn identity_fit_vanishes_for_parallel_dephasing_pairs() {
        let m = make_channel(ChannelFamily::ParallelDephasing { p: 0.9 }).unwrap();
        for dt in [0.2, 0.1, 0.05] {
            let pair = discrimination_pair_from_model(&m, 0.0, dt, 1e6).unwrap();
            let r = finite_discrimination_check(&pair.first, &pair.second, SPAN_TOL, SpanKind::Complex).unwrap();
            assert!(!r.condition_holds && r.residual < 1e-12, "Δθ = {dt}: {}", r.residual);
        }
    }

    #[test]
    fn signal_first_pair_passes_span_condition() {
        let m = make_channel(ChannelFamily::PerpDephasingSignalFirst { p: 0.9 }).unwrap();
        let r = finite_discrimination_check(&m.kraus_at(0.0), &m.kraus_at(0.3), SPAN_TOL, SpanKind::Complex).unwrap();
        assert!(r.condition_holds && r.residual > 1e-2);
        // Noise before the rotation: σx U σx = U†, so U + U† ∝ 1 lies in the span.
        let m = make_channel(ChannelFamily::PerpDephasingNoiseFirst { p: 0.9 }).unwrap();
        let r = finite_discrimination_check(&m.kraus_at(0.0), &m.kraus_at(0.3), SPAN_TOL, SpanKind::Complex).unwrap();
        assert!(!r.condition_holds);
    }

    #[test]
    fn error_bound_edges() {
        assert_eq!(err_bound_from_qfi(0.0, 0.3), 0.5);
        assert_eq!(err_bound_from_qfi((PI_SQ).max(0.0), 1.0), 0.0);
        let b = err_bound_from_qfi(9.0, 0.3);
        assert!((b - 0.5 * (1.0 - 0.45f64.sin())).abs() < 1e-15);
    }

    const PI_SQ: f64 = std::f64::consts::PI * std::f64::consts::PI;

    #[test]
    fn helstrom_examples() {
        let zero = CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, ZERO]);
        let one = CMat::from_row_slice(2, 2, &[ZERO, ZERO, ZERO, ONE]);
        let plus = CMat::from_element(2, 2, c(0.5, 0.0));
        assert!(trace_distance(&zero, &zero).unwrap().abs() < 1e-15);
        assert!((helstrom_error(&zero, &zero).unwrap() - 0.5).abs() < 1e-15);
        assert!((trace_distance(&zero, &one).unwrap() - 1.0).abs() < 1e-15);
        assert!((trace_distance(&zero, &plus).unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
        assert!(trace_distance(&(zero.clone() * c(2.0, 0.0)), &zero).is_err());
    }

    #[test]
    fn disjointness_examples() {
        let m = make_channel(ChannelFamily::UnitaryZRotation).unwrap();
        let r = disjointness_heuristic(&m.kraus_at(0.0), &m.kraus_at(0.3), 100, 1).unwrap();
        assert!(r.found_input);
        let ch = m.kraus_at(0.0);
        assert!(!disjointness_heuristic(&ch, &ch, 100, 1).unwrap().found_input);
    }

    #[test]
    fn drop_fit_shapes() {
        let ns = [1, 2, 3, 4];
        let lin: Vec<f64> = ns.iter().map(|&n| 0.5 - 0.05 * n as f64).collect();
        let sq: Vec<f64> = ns.iter().map(|&n| 0.5 - 0.05 * (n as f64).sqrt()).collect();
        let a = fit_initial_drop(&ns, &lin).unwrap();
        let b = fit_initial_drop(&ns, &sq).unwrap();
        assert!(a.closer_to_linear() && (a.exponent - 1.0).abs() < 1e-12);
        assert!(!b.closer_to_linear() && (b.exponent - 0.5).abs() < 1e-12);
    }

    fn unitary_path(grid: &PathGrid) -> Vec<PathPoint> {
        let m = make_channel(ChannelFamily::UnitaryZRotation).unwrap();
        crate::channels::kraus_path_from_choi_family(|t| Ok(m.kraus_at(t).choi()), &grid.nodes, 1e-12, 1e-6).unwrap()
    }

    #[test]
    fn unitary_path_integral_matches_closed_form() {
        let dt = 0.3;
        for (kind, tol) in [(GridKind::Uniform, 1e-7), (GridKind::Cosine, 1e-4)] {
            let grid = PathGrid::new(kind, 0.0, dt, 41).unwrap();
            let bounds = integrated_err_bounds(&unitary_path(&grid), &grid, 4, false).unwrap();
            for (n, b) in (1..=4).zip(&bounds) {
                let want = err_bound_from_qfi((n * n) as f64, dt);
                assert!((b.bound - want).abs() < tol, "{kind:?} N = {n}: {} vs {want}", b.bound);
            }
        }
    }

    #[test]
    fn qfi_bound_is_kraus_gauge_invariant() {
        let (k, kd) = model(ChannelFamily::ParallelDephasing { p: 0.8 });
        let (a, b) = (0.7_f64, 1.1_f64);
        let u = CMat::from_row_slice(
            2,
            2,
            &[
                c(a.cos(), 0.0),
                C64::from_polar(a.sin(), b),
                -C64::from_polar(a.sin(), -b),
                c(a.cos(), 0.0),
            ],
        );
        let mix = |ops: &[CMat]| -> Vec<CMat> {
            (0..2).map(|i| ops[0].clone() * u[(i, 0)] + ops[1].clone() * u[(i, 1)]).collect()
        };
        let f = qfi_iterative_bound(&k, &kd, 3).unwrap();
        let g = qfi_iterative_bound(&mix(&k), &mix(&kd), 3).unwrap();
        for n in 1..=3 {
            assert!((f.at(n) - g.at(n)).abs() < 1e-6, "N = {n}: {} vs {}", f.at(n), g.at(n));
        }
    }
}

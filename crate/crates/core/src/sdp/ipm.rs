//! Primal-dual infeasible interior-point method for real block-diagonal SDPs
//! in standard form:
//!
//! ```text
//! (P)  min ⟨C, X⟩   s.t. ⟨A_i, X⟩ = b_i,  X ⪰ 0
//! (D)  max bᵀy      s.t. C − Σ_i y_i A_i = Z ⪰ 0
//! ```
//!
//! Search directions use the HKM scaling with a Mehrotra predictor-corrector.
//! Constraint matrices are sparse (triplets), everything else is dense. The
//! solver is single-threaded and performs a fixed sequence of floating-point
//! operations, so identical inputs give bitwise-identical outputs.

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::linalg::triangular_solve::solve_lower_triangular_in_place;
use faer::{Mat, Par};
use log::debug;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::linalg::RMat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    MaxIter,
    Infeasible,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::MaxIter => "max_iter",
            SolveStatus::Infeasible => "infeasible",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub feas_tol: f64,
    pub gap_tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { feas_tol: 1e-8, gap_tol: 1e-8, max_iter: 200 }
    }
}

impl SolverOptions {
    /// Defaults, overridden by `DISCRIMINATE_FEAS_TOL`, `DISCRIMINATE_GAP_TOL`
    /// and `DISCRIMINATE_MAX_ITER` when set to parseable values.
    pub fn from_env() -> Self {
        let mut o = Self::default();
        if let Some(v) = env_parse("DISCRIMINATE_FEAS_TOL") {
            o.feas_tol = v;
        }
        if let Some(v) = env_parse("DISCRIMINATE_GAP_TOL") {
            o.gap_tol = v;
        }
        if let Some(v) = env_parse::<usize>("DISCRIMINATE_MAX_ITER") {
            o.max_iter = v;
        }
        o
    }
}

fn env_parse<T: std::str::FromStr>(key: &str) -> Option<T> {
    std::env::var(key).ok()?.trim().parse().ok()
}

/// Symmetric sparse matrix restricted to one block. Entries list both
/// triangles explicitly.
#[derive(Debug, Clone, Default)]
pub struct BlockPart {
    pub block: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

#[derive(Debug, Clone, Default)]
pub struct Constraint {
    pub parts: Vec<BlockPart>,
}

impl Constraint {
    /// Adds `v` at `(r, c)` and, off the diagonal, at `(c, r)`.
    pub fn add_sym(&mut self, block: usize, r: usize, c: usize, v: f64) {
        if v == 0.0 {
            return;
        }
        let part = match self.parts.iter().position(|p| p.block == block) {
            Some(k) => &mut self.parts[k],
            None => {
                self.parts.push(BlockPart { block, entries: Vec::new() });
                self.parts.last_mut().unwrap()
            }
        };
        part.entries.push((r, c, v));
        if r != c {
            part.entries.push((c, r, v));
        }
    }

    /// Adds every nonzero of a dense symmetric matrix.
    pub fn add_dense(&mut self, block: usize, m: &RMat, drop_tol: f64) {
        let mut entries = Vec::new();
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                if m[(i, j)].abs() > drop_tol {
                    entries.push((i, j, m[(i, j)]));
                }
            }
        }
        if entries.is_empty() {
            return;
        }
        match self.parts.iter_mut().find(|p| p.block == block) {
            Some(part) => part.entries.extend(entries),
            None => self.parts.push(BlockPart { block, entries }),
        }
    }

    fn frob_in_block(&self, block: usize) -> f64 {
        self.parts
            .iter()
            .filter(|p| p.block == block)
            .flat_map(|p| p.entries.iter())
            .map(|e| e.2 * e.2)
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct StandardSdp {
    pub block_dims: Vec<usize>,
    pub c: Vec<RMat>,
    pub a: Vec<Constraint>,
    pub b: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct StandardSolution {
    pub x: Vec<RMat>,
    pub y: DVector<f64>,
    pub z: Vec<RMat>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub status: SolveStatus,
    pub iterations: usize,
    /// `‖b − A(X)‖ / (1 + ‖b‖)`.
    pub primal_infeasibility: f64,
    /// `‖C − Z − Aᵀy‖ / (1 + ‖C‖)`.
    pub dual_infeasibility: f64,
    /// `⟨X, Z⟩ / (1 + |pobj| + |dobj|)`, never negative.
    pub relative_gap: f64,
}

/// Interface for anything that can solve a [`StandardSdp`]. The built-in
/// interior-point method is the only implementation shipped; the trait lets
/// callers plug in an external conic solver.
pub trait SdpBackend {
    fn solve_standard(&self, p: &StandardSdp, opts: &SolverOptions) -> StandardSolution;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct InteriorPoint;

impl SdpBackend for InteriorPoint {
    fn solve_standard(&self, p: &StandardSdp, opts: &SolverOptions) -> StandardSolution {
        solve_standard(p, opts)
    }
}

fn frob(m: &RMat) -> f64 {
    m.norm()
}

fn inner(a: &[RMat], b: &[RMat]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn sym(m: &RMat) -> RMat {
    (m + m.transpose()) * 0.5
}

fn to_faer(m: &RMat) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, f64>) -> RMat {
    RMat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn min_sym_eigenvalue(m: &Mat<f64>) -> f64 {
    let s = Mat::from_fn(m.nrows(), m.ncols(), |i, j| 0.5 * (m[(i, j)] + m[(j, i)]));
    match s.self_adjoint_eigenvalues(faer::Side::Lower) {
        Ok(ev) => ev.into_iter().fold(f64::INFINITY, f64::min),
        Err(_) => from_faer(s.as_ref()).symmetric_eigenvalues().min(),
    }
}

/// Below this size the full spectrum is cheaper than Lanczos.
const LANCZOS_MIN_DIM: usize = 48;

/// Smallest eigenvalue of the symmetric part of `m` by Lanczos with full
/// reorthogonalization, from a fixed start vector. Stops once the Ritz
/// residual of the smallest Ritz value is below `rtol` times the spectral
/// spread seen so far. The estimate can only err upwards.
fn lanczos_min_eigenvalue(m: &Mat<f64>, rtol: f64) -> f64 {
    let n = m.nrows();
    if n < LANCZOS_MIN_DIM {
        return min_sym_eigenvalue(m);
    }
    // Column-major copy of the symmetric part for contiguous matvecs.
    let a: Vec<f64> = (0..n * n).map(|t| 0.5 * (m[(t % n, t / n)] + m[(t / n, t % n)])).collect();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * ((i as f64) * 0.618_033_988_75).fract()).collect();
    let norm = v.iter().map(|t| t * t).sum::<f64>().sqrt();
    v.iter_mut().for_each(|t| *t /= norm);
    let mut estimate = f64::INFINITY;
    for k in 0..n {
        let mut w = vec![0.0; n];
        for (col, &vj) in a.chunks_exact(n).zip(&v) {
            w.iter_mut().zip(col).for_each(|(x, y)| *x += vj * y);
        }
        let ak: f64 = w.iter().zip(&v).map(|(x, y)| x * y).sum();
        basis.push(v.clone());
        alpha.push(ak);
        for _ in 0..2 {
            for q in &basis {
                let h: f64 = w.iter().zip(q).map(|(x, y)| x * y).sum();
                w.iter_mut().zip(q).for_each(|(x, y)| *x -= h * y);
            }
        }
        let bk = w.iter().map(|t| t * t).sum::<f64>().sqrt();
        let kk = k + 1;
        if kk == n || kk % 8 == 0 || bk < 1e-14 {
            let t = RMat::from_fn(kk, kk, |i, j| {
                if i == j {
                    alpha[i]
                } else if i + 1 == j {
                    beta[i]
                } else if j + 1 == i {
                    beta[j]
                } else {
                    0.0
                }
            });
            let eig = t.symmetric_eigen();
            let (imin, &theta) = eig
                .eigenvalues
                .iter()
                .enumerate()
                .min_by(|x, y| x.1.total_cmp(y.1))
                .expect("nonempty");
            let spread = eig.eigenvalues.amax().max(1e-300);
            estimate = theta;
            let resid = bk * eig.eigenvectors[(kk - 1, imin)].abs();
            if kk == n || bk < 1e-14 * spread || resid <= rtol * spread {
                break;
            }
        }
        beta.push(bk);
        v = w.into_iter().map(|t| t / bk).collect();
    }
    estimate
}

/// Congruence used to measure step lengths: `X = L Lᵀ` when `X` is
/// numerically positive definite, otherwise an eigenvalue-floored
/// `X^{-1/2}` that is applied directly.
enum StepScale {
    Empty,
    Cholesky(Mat<f64>),
    InverseRoot(Mat<f64>),
}

impl StepScale {
    fn new(x: &RMat) -> Self {
        let n = x.nrows();
        if n == 0 {
            return StepScale::Empty;
        }
        if let Ok(llt) = to_faer(x).llt(faer::Side::Lower) {
            return StepScale::Cholesky(llt.L().to_owned());
        }
        let eig = x.clone().symmetric_eigen();
        let floor = eig.eigenvalues.amax().max(1e-300) * 1e-14;
        let mut s = eig.eigenvectors.clone();
        for j in 0..n {
            s.column_mut(j).scale_mut(1.0 / eig.eigenvalues[j].max(floor).sqrt());
        }
        StepScale::InverseRoot(to_faer(&s))
    }

    /// Largest `α` such that `X + α ΔX ⪰ 0` (infinite when no bound applies).
    /// The fast variant may overestimate slightly; callers verify it.
    fn max_step(&self, dx: &RMat, exact: bool) -> f64 {
        let min_eig = |w: &Mat<f64>| if exact { min_sym_eigenvalue(w) } else { lanczos_min_eigenvalue(w, 1e-3) };
        let lmin = match self {
            StepScale::Empty => return f64::INFINITY,
            StepScale::Cholesky(l) => {
                let mut w = to_faer(dx);
                solve_lower_triangular_in_place(l.as_ref(), w.as_mut(), Par::Seq);
                let mut wt = w.transpose().to_owned();
                solve_lower_triangular_in_place(l.as_ref(), wt.as_mut(), Par::Seq);
                min_eig(&wt)
            }
            StepScale::InverseRoot(s) => min_eig(&(s.transpose() * to_faer(dx) * s)),
        };
        if !lmin.is_finite() {
            0.0
        } else if lmin >= 0.0 {
            f64::INFINITY
        } else {
            -1.0 / lmin
        }
    }
}

/// Inverse of a symmetric positive definite matrix, falling back to an
/// eigenvalue-floored inverse when Cholesky breaks down numerically.
fn spd_inverse(m: &RMat) -> RMat {
    if let Ok(llt) = to_faer(m).llt(faer::Side::Lower) {
        return sym(&from_faer(llt.inverse().as_ref()));
    }
    let eig = m.clone().symmetric_eigen();
    let floor = eig.eigenvalues.amax().max(1e-300) * 1e-15;
    let mut v = eig.eigenvectors.clone();
    for j in 0..v.ncols() {
        let s = 1.0 / eig.eigenvalues[j].max(floor);
        v.column_mut(j).scale_mut(s);
    }
    sym(&(v * eig.eigenvectors.transpose()))
}

struct Workspace<'a> {
    p: &'a StandardSdp,
    /// For each block, the (constraint, part) pairs touching it.
    by_block: Vec<Vec<(usize, usize)>>,
    nnz_by_block: Vec<usize>,
    /// Distinct column indices of each (constraint, part).
    cols: Vec<Vec<Vec<usize>>>,
}

impl<'a> Workspace<'a> {
    fn new(p: &'a StandardSdp) -> Self {
        let nb = p.block_dims.len();
        let mut by_block = vec![Vec::new(); nb];
        let mut nnz_by_block = vec![0; nb];
        let mut cols = Vec::with_capacity(p.a.len());
        for (i, con) in p.a.iter().enumerate() {
            let mut cc = Vec::with_capacity(con.parts.len());
            for (k, part) in con.parts.iter().enumerate() {
                by_block[part.block].push((i, k));
                nnz_by_block[part.block] += part.entries.len();
                let mut s: Vec<usize> = part.entries.iter().map(|e| e.1).collect();
                s.sort_unstable();
                s.dedup();
                cc.push(s);
            }
            cols.push(cc);
        }
        Self { p, by_block, nnz_by_block, cols }
    }

    fn apply_a(&self, x: &[RMat]) -> DVector<f64> {
        DVector::from_iterator(
            self.p.a.len(),
            self.p.a.iter().map(|con| {
                con.parts
                    .iter()
                    .map(|part| {
                        let xb = &x[part.block];
                        part.entries.iter().map(|&(r, c, v)| v * xb[(r, c)]).sum::<f64>()
                    })
                    .sum()
            }),
        )
    }

    fn apply_at(&self, y: &DVector<f64>) -> Vec<RMat> {
        let mut out: Vec<RMat> = self.p.block_dims.iter().map(|&n| RMat::zeros(n, n)).collect();
        for (i, con) in self.p.a.iter().enumerate() {
            let yi = y[i];
            if yi == 0.0 {
                continue;
            }
            for part in &con.parts {
                let ob = &mut out[part.block];
                for &(r, c, v) in &part.entries {
                    ob[(r, c)] += yi * v;
                }
            }
        }
        out
    }

    /// `M_ij = Σ_blocks Tr(A_i X A_j Z⁻¹)`.
    fn schur(&self, x: &[RMat], zinv: &[RMat]) -> RMat {
        let m = self.p.a.len();
        let mut sch = RMat::zeros(m, m);
        for (b, members) in self.by_block.iter().enumerate() {
            let n = self.p.block_dims[b];
            let xb = &x[b];
            let zb = &zinv[b];
            let total = self.nnz_by_block[b];
            for (pos_j, &(j, kj)) in members.iter().enumerate() {
                let part_j = &self.p.a[j].parts[kj];
                let nnz_j = part_j.entries.len();
                let sj = &self.cols[j][kj];
                let sparse_cost = nnz_j * total;
                let dense_cost = n * nnz_j + n * n * sj.len() + total;
                if sparse_cost <= dense_cost {
                    // X and Z⁻¹ are symmetric: X[q, r] is entry r of column q.
                    let xs = xb.as_slice();
                    let zs = zb.as_slice();
                    for &(i, ki) in &members[pos_j..] {
                        let part_i = &self.p.a[i].parts[ki];
                        let mut acc = 0.0;
                        for &(p, q, vi) in &part_i.entries {
                            let xq = &xs[q * n..(q + 1) * n];
                            let zp = &zs[p * n..(p + 1) * n];
                            let inner: f64 = part_j.entries.iter().map(|&(r, s, vj)| vj * xq[r] * zp[s]).sum();
                            acc += vi * inner;
                        }
                        sch[(i, j)] += acc;
                    }
                } else {
                    // F = X A_j restricted to the support columns, then G = F Z⁻¹[S, :].
                    let mut f = RMat::zeros(n, sj.len());
                    for &(r, s, v) in &part_j.entries {
                        let col = sj.binary_search(&s).unwrap();
                        f.column_mut(col).axpy(v, &xb.column(r), 1.0);
                    }
                    let zs = RMat::from_fn(sj.len(), n, |k, p| zb[(sj[k], p)]);
                    let g = f * zs;
                    for &(i, ki) in &members[pos_j..] {
                        let part_i = &self.p.a[i].parts[ki];
                        let acc: f64 = part_i.entries.iter().map(|&(p, q, vi)| vi * g[(q, p)]).sum();
                        sch[(i, j)] += acc;
                    }
                }
            }
        }
        // members are visited in constraint order, so every (i, j) with i ≥ j
        // was accumulated into the lower triangle.
        for j in 0..m {
            for i in j + 1..m {
                let v = sch[(i, j)] + sch[(j, i)];
                sch[(i, j)] = v;
                sch[(j, i)] = v;
            }
        }
        sch
    }
}

struct SchurFactor {
    llt: Option<faer::linalg::solvers::Llt<f64>>,
    m: usize,
}

impl SchurFactor {
    fn new(sch: &RMat) -> Self {
        let m = sch.nrows();
        if m == 0 {
            return Self { llt: None, m };
        }
        let maxdiag = (0..m).map(|i| sch[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
        let mut reg = 0.0;
        for _ in 0..12 {
            let a = Mat::<f64>::from_fn(m, m, |i, j| sch[(i, j)] + if i == j { reg } else { 0.0 });
            if let Ok(llt) = a.llt(faer::Side::Lower) {
                return Self { llt: Some(llt), m };
            }
            reg = if reg == 0.0 { maxdiag * 1e-14 } else { reg * 100.0 };
        }
        Self { llt: None, m }
    }

    fn solve(&self, rhs: &DVector<f64>) -> Option<DVector<f64>> {
        if self.m == 0 {
            return Some(DVector::zeros(0));
        }
        let llt = self.llt.as_ref()?;
        let mut col = Mat::<f64>::from_fn(self.m, 1, |i, _| rhs[i]);
        llt.solve_in_place(col.as_mut());
        Some(DVector::from_fn(self.m, |i, _| col[(i, 0)]))
    }
}

pub fn solve_standard(p: &StandardSdp, opts: &SolverOptions) -> StandardSolution {
    let ws = Workspace::new(p);
    let nb = p.block_dims.len();
    let m = p.a.len();
    let n_total: usize = p.block_dims.iter().sum();

    // Scale C and b to unit size; undone on exit.
    let c_norm = p.c.iter().map(|c| c.norm_squared()).sum::<f64>().sqrt();
    let b_norm = p.b.norm();
    let sc = c_norm.max(1.0);
    let sb = b_norm.max(1.0);
    let c: Vec<RMat> = p.c.iter().map(|m| m / sc).collect();
    let b = &p.b / sb;
    let c_norm_s = c_norm / sc;
    let b_norm_s = b_norm / sb;

    // Starting point in the style of SDPT3's infeasible start.
    let mut x = Vec::with_capacity(nb);
    let mut z = Vec::with_capacity(nb);
    for blk in 0..nb {
        let n = p.block_dims[blk] as f64;
        let mut xi: f64 = 10f64.max(n.sqrt());
        let mut eta: f64 = 10f64.max(n.sqrt()).max(frob(&c[blk]));
        for (i, con) in p.a.iter().enumerate() {
            let na = con.frob_in_block(blk);
            xi = xi.max(n * (1.0 + b[i].abs()) / (1.0 + na));
            eta = eta.max(na);
        }
        x.push(RMat::identity(p.block_dims[blk], p.block_dims[blk]) * xi);
        z.push(RMat::identity(p.block_dims[blk], p.block_dims[blk]) * eta);
    }
    let mut y = DVector::zeros(m);

    let mut status = SolveStatus::MaxIter;
    let mut iter = 0;
    let mut stall = 0;
    let mut pinf;
    let mut dinf;
    let mut relgap;
    let mut gamma = 0.9;
    let n_f = n_total.max(1) as f64;
    loop {
        let ax = ws.apply_a(&x);
        let rp = &b - &ax;
        let aty = ws.apply_at(&y);
        let rd: Vec<RMat> = (0..nb).map(|k| &c[k] - &z[k] - &aty[k]).collect();
        let pobj = inner(&c, &x);
        let dobj = b.dot(&y);
        let xz = inner(&x, &z);
        let mu = xz / n_f;
        pinf = rp.norm() / (1.0 + b_norm_s);
        dinf = rd.iter().map(|r| r.norm_squared()).sum::<f64>().sqrt() / (1.0 + c_norm_s);
        relgap = xz.max(0.0) / (1.0 + pobj.abs() + dobj.abs());
        debug!("ipm it {iter}: pobj {pobj:.10e} dobj {dobj:.10e} gap {relgap:.2e} pinf {pinf:.2e} dinf {dinf:.2e}");

        if pinf <= opts.feas_tol && dinf <= opts.feas_tol && relgap <= opts.gap_tol {
            status = SolveStatus::Optimal;
            break;
        }
        let xnorm: f64 = x.iter().map(|m| m.norm()).fold(0.0, f64::max);
        let znorm: f64 = z.iter().map(|m| m.norm()).fold(0.0, f64::max);
        if xnorm > 1e12 || znorm > 1e12 || y.amax() > 1e12 {
            status = SolveStatus::Infeasible;
            break;
        }
        if iter >= opts.max_iter || stall >= 5 {
            break;
        }
        iter += 1;

        let zinv: Vec<RMat> = z.iter().map(spd_inverse).collect();
        let sch = ws.schur(&x, &zinv);
        let factor = SchurFactor::new(&sch);
        let x_rd_zinv: Vec<RMat> = (0..nb).map(|k| &x[k] * &rd[k] * &zinv[k]).collect();
        let base_rhs = &rp + ws.apply_a(&x_rd_zinv);

        let direction = |r: &[RMat]| -> Option<(Vec<RMat>, DVector<f64>, Vec<RMat>)> {
            let rhs = &base_rhs - ws.apply_a(r);
            let dy = factor.solve(&rhs)?;
            let atdy = ws.apply_at(&dy);
            let dz: Vec<RMat> = (0..nb).map(|k| &rd[k] - &atdy[k]).collect();
            let dx: Vec<RMat> =
                (0..nb).map(|k| &r[k] - sym(&(&x[k] * &dz[k] * &zinv[k]))).collect();
            Some((dx, dy, dz))
        };

        let x_scale: Vec<StepScale> = x.iter().map(StepScale::new).collect();
        let z_scale: Vec<StepScale> = z.iter().map(StepScale::new).collect();
        let step = |scale: &[StepScale], d: &[RMat], exact: bool| -> f64 {
            scale.iter().zip(d).map(|(s, d)| s.max_step(d, exact)).fold(f64::INFINITY, f64::min)
        };
        let is_pd = |m: &[RMat], d: &[RMat], a: f64| {
            m.iter().zip(d).all(|(m, d)| m.nrows() == 0 || to_faer(&(m + d * a)).llt(faer::Side::Lower).is_ok())
        };
        let r_pred: Vec<RMat> = x.iter().map(|m| -m).collect();
        let Some((dx_a, _dy_a, dz_a)) = direction(&r_pred) else {
            debug!("ipm: Schur complement factorisation failed");
            break;
        };
        let ap = step(&x_scale, &dx_a, false).min(1.0);
        let ad = step(&z_scale, &dz_a, false).min(1.0);
        let mut mu_aff = 0.0;
        for k in 0..nb {
            mu_aff += (&x[k] + &dx_a[k] * ap).dot(&(&z[k] + &dz_a[k] * ad));
        }
        mu_aff /= n_f;
        let expon = if mu > 1e-6 { 1f64.max(3.0 * ap.min(ad).powi(2)) } else { 3.0 };
        let sigma = (mu_aff.max(0.0) / mu).powf(expon).min(1.0);

        let r_corr: Vec<RMat> = (0..nb)
            .map(|k| {
                &zinv[k] * (sigma * mu) - &x[k] - sym(&(&dx_a[k] * &dz_a[k] * &zinv[k]))
            })
            .collect();
        let Some((dx, dy, dz)) = direction(&r_corr) else {
            break;
        };
        let mut ap = (gamma * step(&x_scale, &dx, false)).min(1.0);
        if !is_pd(&x, &dx, ap) {
            ap = (gamma * step(&x_scale, &dx, true)).min(1.0);
        }
        let mut ad = (gamma * step(&z_scale, &dz, false)).min(1.0);
        if !is_pd(&z, &dz, ad) {
            ad = (gamma * step(&z_scale, &dz, true)).min(1.0);
        }
        for k in 0..nb {
            x[k] = sym(&(&x[k] + &dx[k] * ap));
            z[k] = sym(&(&z[k] + &dz[k] * ad));
        }
        y += &dy * ad;
        gamma = 0.9 + 0.09 * ap.min(ad);
        if ap.max(ad) < 1e-8 {
            stall += 1;
        } else {
            stall = 0;
        }
    }

    let x: Vec<RMat> = x.into_iter().map(|m| m * sb).collect();
    let z: Vec<RMat> = z.into_iter().map(|m| m * sc).collect();
    let y = y * sc;
    let primal_objective = inner(&p.c, &x);
    let dual_objective = p.b.dot(&y);
    StandardSolution {
        x,
        y,
        z,
        primal_objective,
        dual_objective,
        status,
        iterations: iter,
        primal_infeasibility: pinf,
        dual_infeasibility: dinf,
        relative_gap: relgap,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// min ⟨C, X⟩ s.t. Tr X = 1 is the smallest eigenvalue of C.
    #[test]
    fn min_eigenvalue_problem() {
        let cmat = RMat::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 1.0]);
        let mut con = Constraint::default();
        for i in 0..3 {
            con.add_sym(0, i, i, 1.0);
        }
        let p = StandardSdp {
            block_dims: vec![3],
            c: vec![cmat.clone()],
            a: vec![con],
            b: DVector::from_vec(vec![1.0]),
        };
        let sol = solve_standard(&p, &SolverOptions::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        let want = cmat.symmetric_eigenvalues().min();
        assert!((sol.primal_objective - want).abs() < 1e-7);
        assert!((sol.dual_objective - want).abs() < 1e-7);
        assert!(sol.relative_gap >= 0.0);
    }

    /// Two blocks tied by a shared constraint; the cheaper block absorbs all mass.
    #[test]
    fn two_blocks() {
        let mut con = Constraint::default();
        con.add_sym(0, 0, 0, 1.0);
        con.add_sym(1, 0, 0, 1.0);
        con.add_sym(1, 1, 1, 1.0);
        let p = StandardSdp {
            block_dims: vec![1, 2],
            c: vec![RMat::from_element(1, 1, 3.0), RMat::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 5.0])],
            a: vec![con],
            b: DVector::from_vec(vec![4.0]),
        };
        let sol = solve_standard(&p, &SolverOptions::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.primal_objective - 8.0).abs() < 1e-6);
    }

    #[test]
    fn detects_infeasible_primal() {
        // X ⪰ 0 with X_00 = −1 has no solution.
        let mut con = Constraint::default();
        con.add_sym(0, 0, 0, 1.0);
        let p = StandardSdp {
            block_dims: vec![2],
            c: vec![RMat::identity(2, 2)],
            a: vec![con],
            b: DVector::from_vec(vec![-1.0]),
        };
        let sol = solve_standard(&p, &SolverOptions::default());
        assert_ne!(sol.status, SolveStatus::Optimal);
    }

    #[test]
    fn deterministic() {
        let cmat = RMat::from_row_slice(2, 2, &[1.0, 0.3, 0.3, -1.0]);
        let mut con = Constraint::default();
        con.add_sym(0, 0, 0, 1.0);
        con.add_sym(0, 1, 1, 1.0);
        let p = StandardSdp { block_dims: vec![2], c: vec![cmat], a: vec![con], b: DVector::from_vec(vec![1.0]) };
        let a = solve_standard(&p, &SolverOptions::default());
        let b = solve_standard(&p, &SolverOptions::default());
        assert_eq!(a.primal_objective.to_bits(), b.primal_objective.to_bits());
        assert_eq!(a.status, b.status);
    }
}

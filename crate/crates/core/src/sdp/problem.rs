//! User-facing problem shapes lowered onto the real standard-form solver.

use nalgebra::DVector;

use super::embed::{embed_unchecked, unembed};
use super::ipm::{solve_standard, Constraint, SolveStatus, SolverOptions, StandardSdp};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, RMat, C64};

/// Affine Hermitian matrix function `F_0 + Σ_i x_i F_i` of the real
/// decision vector. Only variables with a nonzero coefficient are listed.
#[derive(Debug, Clone)]
pub struct LmiBlock {
    pub constant: CMat,
    pub terms: Vec<(usize, CMat)>,
}

impl LmiBlock {
    pub fn dim(&self) -> usize {
        self.constant.nrows()
    }

    pub fn evaluate(&self, x: &[f64]) -> CMat {
        let mut out = self.constant.clone();
        for (i, f) in &self.terms {
            out += f * C64::new(x[*i], 0.0);
        }
        out
    }
}

/// `minimize cᵀx` (or maximize) subject to every [`LmiBlock`] being PSD and
/// `A x = b`.
#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub n_vars: usize,
    pub objective: Vec<f64>,
    pub lmi_blocks: Vec<LmiBlock>,
    pub eq_matrix: RMat,
    pub eq_rhs: Vec<f64>,
    pub maximize: bool,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub x: Vec<f64>,
    pub objective_value: f64,
    pub status: SolveStatus,
    /// Worst of the equality residual and the most negative LMI eigenvalue.
    pub primal_residual: f64,
    pub gap_estimate: f64,
    pub iterations: usize,
}

impl SdpProblem {
    pub fn new(n_vars: usize) -> Self {
        Self {
            n_vars,
            objective: vec![0.0; n_vars],
            lmi_blocks: Vec::new(),
            eq_matrix: RMat::zeros(0, n_vars),
            eq_rhs: Vec::new(),
            maximize: false,
        }
    }

    pub fn add_equality(&mut self, row: &[f64], rhs: f64) {
        assert_eq!(row.len(), self.n_vars);
        let r = self.eq_matrix.nrows();
        self.eq_matrix = self.eq_matrix.clone().insert_row(r, 0.0);
        for (j, v) in row.iter().enumerate() {
            self.eq_matrix[(r, j)] = *v;
        }
        self.eq_rhs.push(rhs);
    }

    fn validate(&self) -> Result<()> {
        if self.objective.len() != self.n_vars || self.eq_matrix.ncols() != self.n_vars {
            return Err(Error::DimensionMismatch("objective/equalities do not match n_vars".into()));
        }
        for blk in &self.lmi_blocks {
            let d = blk.dim();
            let check = |m: &CMat| -> Result<()> {
                if m.shape() != (d, d) {
                    return Err(Error::DimensionMismatch("LMI coefficient shape".into()));
                }
                let h = linalg::max_abs(&(m - m.adjoint()));
                if h > 1e-12 {
                    return Err(Error::NotHermitian(h));
                }
                Ok(())
            };
            check(&blk.constant)?;
            for (i, f) in &blk.terms {
                if *i >= self.n_vars {
                    return Err(Error::DimensionMismatch(format!("variable index {i} out of range")));
                }
                check(f)?;
            }
        }
        Ok(())
    }

    pub fn solve(&self, opts: &SolverOptions) -> Result<SdpSolution> {
        self.validate()?;
        let b = DVector::from_column_slice(&self.eq_rhs);
        let (x0, null, eq_res, _rank) = linalg::affine_solution_space(&self.eq_matrix, &b, 1e-12);
        let scale = 1.0 + b.norm();
        if eq_res > opts.feas_tol * scale {
            return Ok(self.finish(x0.as_slice().to_vec(), SolveStatus::Infeasible, f64::NAN, 0));
        }
        let c = DVector::from_column_slice(&self.objective);
        let reduced_c = null.transpose() * &c;
        let nz = null.ncols();

        if self.lmi_blocks.is_empty() {
            // Only equalities: the objective must be constant on the solution set.
            let status = if reduced_c.amax() <= opts.feas_tol * (1.0 + c.norm()) {
                SolveStatus::Optimal
            } else {
                SolveStatus::Infeasible
            };
            return Ok(self.finish(x0.as_slice().to_vec(), status, 0.0, 0));
        }

        // Dual form over z: Z = F0' + Σ z_k F'_k ⪰ 0, i.e. C = emb(F0'), A_k = −emb(F'_k).
        let mut block_dims = Vec::new();
        let mut cmats = Vec::new();
        let mut cons = vec![Constraint::default(); nz];
        for (bi, blk) in self.lmi_blocks.iter().enumerate() {
            let mut f0 = blk.constant.clone();
            for (i, f) in &blk.terms {
                f0 += f * C64::new(x0[*i], 0.0);
            }
            cmats.push(embed_unchecked(&f0));
            block_dims.push(2 * blk.dim());
            for (k, con) in cons.iter_mut().enumerate() {
                let mut fk = CMat::zeros(blk.dim(), blk.dim());
                let mut any = false;
                for (i, f) in &blk.terms {
                    let w = null[(*i, k)];
                    if w != 0.0 {
                        fk += f * C64::new(w, 0.0);
                        any = true;
                    }
                }
                if any {
                    con.add_dense(bi, &(-embed_unchecked(&fk)), 1e-15);
                }
            }
        }
        let sign = if self.maximize { 1.0 } else { -1.0 };
        let std = StandardSdp { block_dims, c: cmats, a: cons, b: reduced_c * sign };
        let sol = solve_standard(&std, opts);
        let x = &x0 + &null * &sol.y;
        Ok(self.finish(x.as_slice().to_vec(), sol.status, sol.relative_gap, sol.iterations))
    }

    fn finish(&self, x: Vec<f64>, status: SolveStatus, gap: f64, iterations: usize) -> SdpSolution {
        let objective_value = self.objective.iter().zip(&x).map(|(a, b)| a * b).sum();
        let xv = DVector::from_column_slice(&x);
        let eq = if self.eq_rhs.is_empty() {
            0.0
        } else {
            (&self.eq_matrix * &xv - DVector::from_column_slice(&self.eq_rhs)).amax()
        };
        let lmi = self
            .lmi_blocks
            .iter()
            .map(|b| (-linalg::min_eigenvalue(&b.evaluate(&x))).max(0.0))
            .fold(0.0, f64::max);
        SdpSolution {
            x,
            objective_value,
            status,
            primal_residual: eq.max(lmi),
            gap_estimate: if gap.is_nan() { f64::INFINITY } else { gap.max(0.0) },
            iterations,
        }
    }
}

/// Hermitian constraint matrix as sparse complex triplets per block, listing
/// both triangles.
#[derive(Debug, Clone, Default)]
pub struct HermConstraint {
    pub parts: Vec<(usize, Vec<(usize, usize, C64)>)>,
}

impl HermConstraint {
    /// Adds `v` at `(r, c)` and `conj(v)` at `(c, r)`; on the diagonal only the real part.
    pub fn add(&mut self, block: usize, r: usize, c: usize, v: C64) {
        let k = match self.parts.iter().position(|p| p.0 == block) {
            Some(k) => k,
            None => {
                self.parts.push((block, Vec::new()));
                self.parts.len() - 1
            }
        };
        let ents = &mut self.parts[k].1;
        if r == c {
            ents.push((r, r, C64::new(v.re, 0.0)));
        } else {
            ents.push((r, c, v));
            ents.push((c, r, v.conj()));
        }
    }
}

/// `maximize Σ_k ⟨Q_k, X_k⟩` over complex Hermitian PSD blocks `X_k`
/// subject to `Σ_k ⟨A_ik, X_k⟩ = b_i`, with `⟨A, X⟩ = Re Tr(A X)`.
#[derive(Debug, Clone)]
pub struct MatrixSdp {
    pub block_dims: Vec<usize>,
    pub objective: Vec<CMat>,
    pub constraints: Vec<HermConstraint>,
    pub rhs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct MatrixSdpSolution {
    pub blocks: Vec<CMat>,
    pub duals: Vec<f64>,
    pub objective_value: f64,
    pub dual_value: f64,
    pub status: SolveStatus,
    pub primal_residual: f64,
    pub gap_estimate: f64,
    pub iterations: usize,
}

impl MatrixSdp {
    pub fn real_param_count(&self) -> usize {
        self.block_dims.iter().map(|d| d * d).sum()
    }

    pub fn embedded_dim(&self) -> usize {
        self.block_dims.iter().map(|d| 2 * d).sum()
    }

    /// Real standard form. Every complex coefficient is embedded and halved so
    /// that `⟨emb(A)/2, emb(X)⟩ = Re Tr(A X)`.
    pub fn lower(&self) -> StandardSdp {
        let block_dims: Vec<usize> = self.block_dims.iter().map(|d| 2 * d).collect();
        let c = self.objective.iter().map(|q| embed_unchecked(q) * -0.5).collect();
        let a = self
            .constraints
            .iter()
            .map(|hc| {
                let mut con = Constraint::default();
                for (blk, ents) in &hc.parts {
                    let n = self.block_dims[*blk];
                    let mut part = Vec::with_capacity(ents.len() * 4);
                    for &(r, cc, v) in ents {
                        if v.re != 0.0 {
                            part.push((r, cc, v.re / 2.0));
                            part.push((r + n, cc + n, v.re / 2.0));
                        }
                        if v.im != 0.0 {
                            part.push((r, cc + n, -v.im / 2.0));
                            part.push((r + n, cc, v.im / 2.0));
                        }
                    }
                    if !part.is_empty() {
                        con.parts.push(super::ipm::BlockPart { block: *blk, entries: part });
                    }
                }
                con
            })
            .collect();
        StandardSdp { block_dims, c, a, b: DVector::from_column_slice(&self.rhs) }
    }

    pub fn solve(&self, opts: &SolverOptions) -> MatrixSdpSolution {
        let sol = solve_standard(&self.lower(), opts);
        let blocks: Vec<CMat> = sol.x.iter().map(unembed).collect();
        let objective_value: f64 =
            self.objective.iter().zip(&blocks).map(|(q, x)| re_inner(q, x)).sum();
        let mut residual = 0.0f64;
        for (hc, &b) in self.constraints.iter().zip(&self.rhs) {
            let mut v = 0.0;
            for (blk, ents) in &hc.parts {
                let x = &blocks[*blk];
                for &(r, cc, a) in ents {
                    v += (a * x[(cc, r)]).re;
                }
            }
            residual = residual.max((v - b).abs());
        }
        for x in &blocks {
            residual = residual.max((-linalg::min_eigenvalue(x)).max(0.0));
        }
        MatrixSdpSolution {
            blocks,
            duals: sol.y.as_slice().to_vec(),
            objective_value,
            dual_value: -sol.dual_objective,
            status: sol.status,
            primal_residual: residual,
            gap_estimate: sol.relative_gap,
            iterations: sol.iterations,
        }
    }
}

/// `Re Tr(A X)` for Hermitian `A`, `X`.
pub fn re_inner(a: &CMat, x: &CMat) -> f64 {
    a.iter().zip(x.transpose().iter()).map(|(p, q)| (p * q).re).sum()
}

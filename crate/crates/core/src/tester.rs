//! Exact optimal discrimination over all adaptive strategies with `N`
//! channel uses, posed as one SDP over testers.
//!
//! A tester is a tuple of PSD operators `T_k` on `I1, O1, …, IN, ON` (in
//! that order) whose sum `W` is a comb: for every `n`,
//! `Tr_{I_{n+1} … O_N} W = Tr_{O_n, I_{n+1} … O_N} W ⊗ 1_{O_n} / d_O`, and
//! `Tr W = d_O^N`. The success probability is `Σ_k p_k Tr[T_kᵀ C_k^{⊗N}]`.

use serde::Serialize;

use crate::channels::DiscriminationInstance;
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, C64, ONE};
use crate::sdp::{HermConstraint, MatrixSdp, SolveStatus, SolverOptions};
use crate::tensor::{space, LabeledOperator, SpaceLabel};

pub fn input_label(n: usize) -> String {
    format!("I{n}")
}

pub fn output_label(n: usize) -> String {
    format!("O{n}")
}

/// `I1, O1, …, IN, ON`.
pub fn tester_spaces(n_uses: usize, d_in: usize, d_out: usize) -> Vec<SpaceLabel> {
    (1..=n_uses)
        .flat_map(|n| [space(input_label(n), d_in), space(output_label(n), d_out)])
        .collect()
}

/// `C^{⊗N}` on `I1, O1, …, IN, ON`, built from a Choi operator on `(O, I)`.
pub fn choi_tensor_power(choi: &LabeledOperator, n_uses: usize) -> Result<LabeledOperator> {
    let mut acc = LabeledOperator::scalar(ONE);
    for n in 1..=n_uses {
        let (o, i) = (output_label(n), input_label(n));
        let copy = choi.relabeled(&[("O", o.as_str()), ("I", i.as_str())])?;
        acc = acc.tensor_product(&copy.reorder(&[i.as_str(), o.as_str()])?)?;
    }
    Ok(acc)
}

#[derive(Debug, Clone)]
pub struct Tester {
    pub components: Vec<LabeledOperator>,
    pub n_uses: usize,
    pub d_in: usize,
    pub d_out: usize,
}

impl Tester {
    pub fn comb(&self) -> LabeledOperator {
        let mut w = self.components[0].clone();
        for t in &self.components[1..] {
            w = w.add(t).expect("components share spaces");
        }
        w
    }

    pub fn transposed(&self) -> Self {
        Self { components: self.components.iter().map(|t| t.transpose()).collect(), ..self.clone() }
    }
}

/// Size limits for the dense tester SDP.
#[derive(Debug, Clone, Copy)]
pub struct TesterCap {
    /// Largest total side of the real embedded block-diagonal variable.
    pub max_embedded_dim: usize,
    /// Largest number of equality constraints (the Schur complement is dense).
    pub max_constraints: usize,
}

impl Default for TesterCap {
    fn default() -> Self {
        Self { max_embedded_dim: 4096, max_constraints: 6000 }
    }
}

/// Number of comb equality constraints for the given dimensions.
pub fn comb_constraint_count(n_uses: usize, d_in: usize, d_out: usize) -> usize {
    let mut m = 1;
    let mut prefix = d_in;
    for _ in 0..n_uses {
        m += prefix * prefix * (d_out * d_out - 1);
        prefix *= d_out * d_in;
    }
    m
}

#[derive(Debug, Clone)]
pub struct TesterSdp {
    pub sdp: MatrixSdp,
    pub n_uses: usize,
    pub d_in: usize,
    pub d_out: usize,
}

impl TesterSdp {
    /// Real parameters describing the Hermitian blocks `T_1 … T_K`.
    pub fn real_param_count(&self) -> usize {
        self.sdp.real_param_count()
    }
}

/// Sparse Hermitian operator basis of a `d`-dimensional space: `E_jj`,
/// `E_jk + E_kj` and `i(E_jk − E_kj)` for `j < k`. Entries list both triangles.
pub(crate) fn hermitian_basis(d: usize) -> Vec<Vec<(usize, usize, C64)>> {
    let mut out = Vec::with_capacity(d * d);
    for j in 0..d {
        out.push(vec![(j, j, ONE)]);
        for k in j + 1..d {
            out.push(vec![(j, k, ONE), (k, j, ONE)]);
            out.push(vec![(j, k, c(0.0, 1.0)), (k, j, c(0.0, -1.0))]);
        }
    }
    out
}

/// Traceless Hermitian basis: the off-diagonal elements of
/// [`hermitian_basis`] plus `E_00 − E_jj`.
fn traceless_basis(d: usize) -> Vec<Vec<(usize, usize, C64)>> {
    let mut out: Vec<_> = hermitian_basis(d).into_iter().filter(|b| b.len() == 2).collect();
    for j in 1..d {
        out.push(vec![(0, 0, ONE), (j, j, -ONE)]);
    }
    out
}

pub fn build_tester_sdp(inst: &DiscriminationInstance, n_uses: usize, cap: &TesterCap) -> Result<TesterSdp> {
    if n_uses == 0 {
        return Err(Error::InvalidParameter("need at least one channel use".into()));
    }
    let (d_in, d_out) = (inst.d_in(), inst.d_out());
    let dim = (d_in * d_out).pow(n_uses as u32);
    let embedded = 2 * dim * inst.k();
    let m = comb_constraint_count(n_uses, d_in, d_out);
    if embedded > cap.max_embedded_dim || m > cap.max_constraints {
        return Err(Error::CapExceeded(format!(
            "N = {n_uses}: embedded side {embedded} (cap {}), {m} constraints (cap {})",
            cap.max_embedded_dim, cap.max_constraints
        )));
    }

    let objective = inst
        .chois()
        .iter()
        .zip(inst.priors())
        .map(|(ch, &p)| Ok(choi_tensor_power(ch, n_uses)?.data().transpose() * c(p, 0.0)))
        .collect::<Result<Vec<CMat>>>()?;

    let k = inst.k();
    let mut constraints = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    let tau_basis = traceless_basis(d_out);
    for n in 1..=n_uses {
        let prefix = d_in * (d_in * d_out).pow((n - 1) as u32);
        let later = (d_in * d_out).pow((n_uses - n) as u32);
        for b in hermitian_basis(prefix) {
            for tau in &tau_basis {
                let mut entries = Vec::with_capacity(b.len() * tau.len() * later);
                for &(r1, c1, v1) in &b {
                    for &(r2, c2, v2) in tau {
                        for l in 0..later {
                            let row = (r1 * d_out + r2) * later + l;
                            let col = (c1 * d_out + c2) * later + l;
                            entries.push((row, col, v1 * v2));
                        }
                    }
                }
                constraints.push(HermConstraint { parts: (0..k).map(|blk| (blk, entries.clone())).collect() });
                rhs.push(0.0);
            }
        }
    }
    let trace: Vec<(usize, usize, C64)> = (0..dim).map(|i| (i, i, ONE)).collect();
    constraints.push(HermConstraint { parts: (0..k).map(|blk| (blk, trace.clone())).collect() });
    rhs.push((d_out as f64).powi(n_uses as i32));

    Ok(TesterSdp {
        sdp: MatrixSdp { block_dims: vec![dim; k], objective, constraints, rhs },
        n_uses,
        d_in,
        d_out,
    })
}

#[derive(Debug, Clone)]
pub struct ExactResult {
    pub p_succ: f64,
    pub tester: Tester,
    pub status: SolveStatus,
    pub primal_residual: f64,
    pub gap_estimate: f64,
    pub iterations: usize,
}

impl ExactResult {
    pub fn p_err(&self) -> f64 {
        1.0 - self.p_succ
    }
}

pub fn solve_exact(inst: &DiscriminationInstance, n_uses: usize) -> Result<ExactResult> {
    solve_exact_with(inst, n_uses, &TesterCap::default(), &SolverOptions::from_env())
}

pub fn solve_exact_with(
    inst: &DiscriminationInstance,
    n_uses: usize,
    cap: &TesterCap,
    opts: &SolverOptions,
) -> Result<ExactResult> {
    let problem = build_tester_sdp(inst, n_uses, cap)?;
    let sol = problem.sdp.solve(opts);
    if sol.status == SolveStatus::Infeasible || (sol.status != SolveStatus::Optimal && sol.primal_residual > 1e-6) {
        return Err(Error::Solver {
            status: sol.status,
            context: format!("tester SDP with N = {n_uses} (residual {:.2e})", sol.primal_residual),
        });
    }
    let spaces = tester_spaces(n_uses, inst.d_in(), inst.d_out());
    let components = sol
        .blocks
        .into_iter()
        .map(|b| LabeledOperator::new(spaces.clone(), linalg::hermitian_part(&b)))
        .collect::<Result<Vec<_>>>()?;
    let tester = Tester { components, n_uses, d_in: inst.d_in(), d_out: inst.d_out() };
    let p_succ = tester_success_probability(&tester, inst)?;
    Ok(ExactResult {
        p_succ,
        tester,
        status: sol.status,
        primal_residual: sol.primal_residual,
        gap_estimate: sol.gap_estimate,
        iterations: sol.iterations,
    })
}

/// `Σ_k p_k Tr[T_kᵀ C_k^{⊗N}]`.
pub fn tester_success_probability(t: &Tester, inst: &DiscriminationInstance) -> Result<f64> {
    if t.components.len() != inst.k() || t.d_in != inst.d_in() || t.d_out != inst.d_out() {
        return Err(Error::DimensionMismatch("tester does not match the instance".into()));
    }
    let names: Vec<String> = t.components[0].names().iter().map(|s| s.to_string()).collect();
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut total = 0.0;
    for ((tk, ch), &p) in t.components.iter().zip(inst.chois()).zip(inst.priors()) {
        let power = choi_tensor_power(&ch, t.n_uses)?.reorder(&names)?;
        let v: C64 = tk.data().iter().zip(power.data().iter()).map(|(a, b)| a * b).sum();
        total += p * v.re;
    }
    Ok(total)
}

#[derive(Debug, Clone, Serialize)]
pub struct TesterReport {
    /// Smallest eigenvalue of each component.
    pub min_eigenvalues: Vec<f64>,
    /// Max-abs residual of the causal condition at each level `n = 1..N`.
    pub causal_residuals: Vec<f64>,
    /// `|Tr W − d_O^N|`.
    pub trace_residual: f64,
    pub hermiticity_residual: f64,
    pub passed: bool,
}

impl TesterReport {
    pub fn worst(&self) -> f64 {
        let psd = self.min_eigenvalues.iter().map(|&e| (-e).max(0.0)).fold(0.0, f64::max);
        self.causal_residuals
            .iter()
            .copied()
            .fold(psd.max(self.trace_residual).max(self.hermiticity_residual), f64::max)
    }
}

pub fn validate_tester(t: &Tester, tol: f64) -> TesterReport {
    let min_eigenvalues: Vec<f64> = t.components.iter().map(|x| x.min_eigenvalue()).collect();
    let hermiticity_residual = t
        .components
        .iter()
        .map(|x| linalg::max_abs(&(x.data() - x.data().adjoint())))
        .fold(0.0, f64::max);
    let w = t.comb();
    let mut causal_residuals = Vec::with_capacity(t.n_uses);
    for n in 1..=t.n_uses {
        let later: Vec<String> =
            (n + 1..=t.n_uses).flat_map(|m| [input_label(m), output_label(m)]).collect();
        let later: Vec<&str> = later.iter().map(String::as_str).collect();
        let wn = w.partial_trace(&later).expect("labels exist");
        let on = output_label(n);
        let reduced = wn.partial_trace(&[on.as_str()]).expect("labels exist");
        let id = LabeledOperator::identity(vec![space(on.clone(), t.d_out)])
            .expect("valid space")
            .scaled(1.0 / t.d_out as f64);
        let rebuilt = reduced.tensor_product(&id).expect("disjoint labels");
        causal_residuals.push(linalg::max_abs(&(wn.data() - rebuilt.data())));
    }
    let trace_residual = (w.trace().re - (t.d_out as f64).powi(t.n_uses as i32)).abs();
    let mut report = TesterReport {
        min_eigenvalues,
        causal_residuals,
        trace_residual,
        hermiticity_residual,
        passed: false,
    };
    report.passed = report.worst() <= tol;
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{make_channel, ChannelFamily};
    use crate::tensor::KrausChannel;

    fn unitary_pair(dt: f64) -> DiscriminationInstance {
        let m = make_channel(ChannelFamily::UnitaryZRotation).unwrap();
        DiscriminationInstance::pair(m.kraus_at(0.0), m.kraus_at(dt)).unwrap()
    }

    #[test]
    fn parameter_count_for_single_qubit_use() {
        let p = build_tester_sdp(&unitary_pair(0.3), 1, &TesterCap::default()).unwrap();
        assert_eq!(p.real_param_count(), 2 * 16);
    }

    #[test]
    fn constraint_count_matches_formula() {
        let p = build_tester_sdp(&unitary_pair(0.3), 2, &TesterCap::default()).unwrap();
        assert_eq!(p.sdp.constraints.len(), comb_constraint_count(2, 2, 2));
        assert_eq!(comb_constraint_count(3, 2, 2), 3277);
    }

    #[test]
    fn cap_is_enforced() {
        let err = build_tester_sdp(&unitary_pair(0.3), 4, &TesterCap::default()).unwrap_err();
        assert!(matches!(err, Error::CapExceeded(_)));
    }

    #[test]
    fn single_use_unitary_pair() {
        let dt = 0.3;
        let r = solve_exact(&unitary_pair(dt), 1).unwrap();
        let want = 1.0 - 0.5 * (1.0 - (dt / 2.0).sin());
        assert!((r.p_succ - want).abs() < 1e-7, "{} vs {want}", r.p_succ);
        assert!(validate_tester(&r.tester, 1e-7).passed);
    }

    #[test]
    fn identical_channels_give_half() {
        let ch = KrausChannel::identity(2);
        let inst = DiscriminationInstance::pair(ch.clone(), ch).unwrap();
        let r = solve_exact(&inst, 2).unwrap();
        assert!((r.p_succ - 0.5).abs() < 1e-7);
    }

    #[test]
    fn certain_prior_gives_one() {
        let m = make_channel(ChannelFamily::UnitaryZRotation).unwrap();
        let inst = DiscriminationInstance::new(vec![m.kraus_at(0.0), m.kraus_at(0.3)], vec![1.0, 0.0]).unwrap();
        let r = solve_exact(&inst, 1).unwrap();
        assert!((r.p_succ - 1.0).abs() < 1e-7);
    }

    #[test]
    fn trivial_guess_tester() {
        let inst = DiscriminationInstance::new(
            vec![KrausChannel::identity(2), KrausChannel::identity(2)],
            vec![0.3, 0.7],
        )
        .unwrap();
        // W = 1_I ⊗ 1_O / d_O ⊗ … is a valid comb; guess k = 1 always.
        let spaces = tester_spaces(2, 2, 2);
        let w = LabeledOperator::identity(spaces.clone()).unwrap().scaled(0.25);
        let t = Tester { components: vec![w, LabeledOperator::zeros(spaces).unwrap()], n_uses: 2, d_in: 2, d_out: 2 };
        assert!(validate_tester(&t, 1e-12).passed);
        assert!((tester_success_probability(&t, &inst).unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn constructed_violations_are_reported() {
        let spaces = tester_spaces(1, 2, 2);
        let w = LabeledOperator::identity(spaces.clone()).unwrap().scaled(0.5);
        let doubled = Tester {
            components: vec![w.scaled(2.0), LabeledOperator::zeros(spaces.clone()).unwrap()],
            n_uses: 1,
            d_in: 2,
            d_out: 2,
        };
        let rep = validate_tester(&doubled, 1e-7);
        assert!(!rep.passed);
        assert!((rep.trace_residual - 2.0).abs() < 1e-12);

        let mut neg = CMat::identity(4, 4) * c(0.5, 0.0);
        neg[(0, 0)] = c(-0.1, 0.0);
        let bad = Tester {
            components: vec![LabeledOperator::new(spaces.clone(), neg).unwrap(), LabeledOperator::zeros(spaces).unwrap()],
            n_uses: 1,
            d_in: 2,
            d_out: 2,
        };
        let rep = validate_tester(&bad, 1e-7);
        assert!(!rep.passed);
        assert!(rep.min_eigenvalues[0] < -0.05);
    }
}

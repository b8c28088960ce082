//! Adaptive strategies with a finite ancilla, optimized one tooth at a time.
//!
//! A strategy for `N` uses consists of
//!
//! * the input state `ρ` on `(I1, A1)`,
//! * controls `E_n` on `(A{n+1}, I{n+1}, A{n}, O{n})` for `n = 1..N−1`,
//!   channels from `(A{n}, O{n})` to `(A{n+1}, I{n+1})`,
//! * the measurement channel `M` on `(A{N}, O{N}, R)` with a `K`-level
//!   register `R` holding the guess.
//!
//! The success probability is linear in every tooth. With all other teeth
//! fixed it reads `Tr[Gᵀ X]` for an environment `G` obtained by contracting
//! the rest of the network, so each tooth is updated by a small SDP. Teeth
//! are visited in the order `ρ, E_1, …, E_{N−1}, M`; environments to the
//! right of the current tooth are cached at the start of each cycle and the
//! left environment is carried forward, so a cycle costs `O(N)` contractions.

use log::{debug, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channels::DiscriminationInstance;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, ONE};
use crate::sdp::{HermConstraint, MatrixSdp, SolveStatus, SolverOptions};
use crate::tensor::{space, LabeledOperator, SpaceLabel};
use crate::tester::{hermitian_basis, input_label, output_label, tester_spaces, Tester};

pub fn ancilla_label(n: usize) -> String {
    format!("A{n}")
}

pub const REGISTER: &str = "R";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StrategyDims {
    pub n_uses: usize,
    pub d_in: usize,
    pub d_out: usize,
    pub d_anc: usize,
    pub k: usize,
}

/// Which element of the strategy a tooth index refers to: `0` is `ρ`,
/// `1..N−1` are the controls and `N` is the measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToothKind {
    State,
    Control(usize),
    Measurement,
}

impl StrategyDims {
    pub fn kind(&self, tooth: usize) -> ToothKind {
        if tooth == 0 {
            ToothKind::State
        } else if tooth == self.n_uses {
            ToothKind::Measurement
        } else {
            ToothKind::Control(tooth)
        }
    }

    /// `(output spaces, input spaces)`; the stored operator lists the spaces
    /// in the order given in the module documentation.
    pub fn tooth_spaces(&self, kind: ToothKind) -> (Vec<SpaceLabel>, Vec<SpaceLabel>) {
        match kind {
            ToothKind::State => (vec![space(input_label(1), self.d_in), space(ancilla_label(1), self.d_anc)], vec![]),
            ToothKind::Control(n) => (
                vec![space(ancilla_label(n + 1), self.d_anc), space(input_label(n + 1), self.d_in)],
                vec![space(ancilla_label(n), self.d_anc), space(output_label(n), self.d_out)],
            ),
            ToothKind::Measurement => (
                vec![space(REGISTER, self.k)],
                vec![space(ancilla_label(self.n_uses), self.d_anc), space(output_label(self.n_uses), self.d_out)],
            ),
        }
    }

    fn stored_order(&self, kind: ToothKind) -> Vec<String> {
        let (out, inp) = self.tooth_spaces(kind);
        match kind {
            ToothKind::Measurement => inp.iter().chain(&out).map(|s| s.name.clone()).collect(),
            _ => out.iter().chain(&inp).map(|s| s.name.clone()).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Strategy {
    pub rho: LabeledOperator,
    pub controls: Vec<LabeledOperator>,
    pub meas: LabeledOperator,
    pub dims: StrategyDims,
}

fn names(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

impl Strategy {
    pub fn tooth(&self, index: usize) -> &LabeledOperator {
        match self.dims.kind(index) {
            ToothKind::State => &self.rho,
            ToothKind::Control(n) => &self.controls[n - 1],
            ToothKind::Measurement => &self.meas,
        }
    }

    pub fn set_tooth(&mut self, index: usize, x: LabeledOperator) {
        match self.dims.kind(index) {
            ToothKind::State => self.rho = x,
            ToothKind::Control(n) => self.controls[n - 1] = x,
            ToothKind::Measurement => self.meas = x,
        }
    }

    /// Largest violation of positivity or of a tooth's trace condition.
    pub fn violation(&self) -> f64 {
        let mut worst = 0.0f64;
        for t in 0..=self.dims.n_uses {
            let x = self.tooth(t);
            let (out, inp) = self.dims.tooth_spaces(self.dims.kind(t));
            worst = worst.max((-x.min_eigenvalue()).max(0.0));
            worst = worst.max(linalg::max_abs(&(x.data() - x.data().adjoint())));
            let out_names: Vec<&str> = out.iter().map(|s| s.name.as_str()).collect();
            let reduced = x.partial_trace(&out_names).expect("tooth spaces");
            let id = LabeledOperator::identity(inp).expect("valid spaces");
            let id = id.reorder(&reduced.names()).expect("same spaces");
            worst = worst.max(linalg::max_abs(&(reduced.data() - id.data())));
        }
        worst
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        self.violation() <= tol
    }

    /// Embeds the strategy into a larger ancilla. The old ancilla levels span
    /// a subspace that the strategy never leaves; inputs on the new levels
    /// are sent to the first basis state, so the success probability is
    /// unchanged.
    pub fn embed_ancilla(&self, d_anc: usize) -> Result<Strategy> {
        let old = self.dims;
        if d_anc < old.d_anc {
            return Err(Error::InvalidParameter("cannot shrink the ancilla".into()));
        }
        let dims = StrategyDims { d_anc, ..old };
        let mut s = self.clone();
        s.dims = dims;
        for t in 0..=old.n_uses {
            let kind = old.kind(t);
            let (out_old, in_old) = old.tooth_spaces(kind);
            let (out_new, in_new) = dims.tooth_spaces(kind);
            let order_old: Vec<String> = out_old.iter().chain(&in_old).map(|s| s.name.clone()).collect();
            let x = self.tooth(t).reorder(&names(&order_old))?;
            let d_out_old: usize = out_old.iter().map(|s| s.dim).product();
            let d_in_old: usize = in_old.iter().map(|s| s.dim).product();
            let dims_out_new: Vec<usize> = out_new.iter().map(|s| s.dim).collect();
            let dims_in_new: Vec<usize> = in_new.iter().map(|s| s.dim).collect();
            let dims_out_old: Vec<usize> = out_old.iter().map(|s| s.dim).collect();
            let dims_in_old: Vec<usize> = in_old.iter().map(|s| s.dim).collect();
            let d_out_new: usize = dims_out_new.iter().product();
            let d_in_new: usize = dims_in_new.iter().product();
            // Map an old flat index into the new one, digit by digit.
            let lift = |idx: usize, old_dims: &[usize], new_dims: &[usize]| -> usize {
                let mut rem = idx;
                let mut digits = vec![0; old_dims.len()];
                for p in (0..old_dims.len()).rev() {
                    digits[p] = rem % old_dims[p];
                    rem /= old_dims[p];
                }
                digits.iter().zip(new_dims).fold(0, |acc, (d, n)| acc * n + d)
            };
            let out_map: Vec<usize> = (0..d_out_old).map(|i| lift(i, &dims_out_old, &dims_out_new)).collect();
            let in_map: Vec<usize> = (0..d_in_old).map(|i| lift(i, &dims_in_old, &dims_in_new)).collect();
            let mut data = CMat::zeros(d_out_new * d_in_new, d_out_new * d_in_new);
            for o1 in 0..d_out_old {
                for i1 in 0..d_in_old {
                    for o2 in 0..d_out_old {
                        for i2 in 0..d_in_old {
                            data[(out_map[o1] * d_in_new + in_map[i1], out_map[o2] * d_in_new + in_map[i2])] =
                                x.data()[(o1 * d_in_old + i1, o2 * d_in_old + i2)];
                        }
                    }
                }
            }
            for i in 0..d_in_new {
                if !in_map.contains(&i) {
                    data[(i, i)] = ONE;
                }
            }
            let order_new: Vec<SpaceLabel> = out_new.iter().chain(&in_new).cloned().collect();
            let x_new = LabeledOperator::new(order_new, data)?.reorder(&names(&dims.stored_order(kind)))?;
            s.set_tooth(t, x_new);
        }
        Ok(s)
    }
}

/// `X ← (1_out ⊗ T^{-1/2}) X (1_out ⊗ T^{-1/2})` with `T = Tr_out X`, for `X`
/// ordered as `(out, in)`; returns `None` when `T` is singular.
fn normalize_tooth(x: &CMat, d_out: usize, d_in: usize) -> Option<CMat> {
    let t = CMat::from_fn(d_in, d_in, |i, j| (0..d_out).map(|o| x[(o * d_in + i, o * d_in + j)]).sum());
    let s = linalg::inv_sqrtm(&linalg::hermitian_part(&t))?;
    let full = CMat::identity(d_out, d_out).kronecker(&s);
    Some(linalg::hermitian_part(&(&full * x * &full)))
}

fn random_tooth(rng: &mut ChaCha8Rng, out: &[SpaceLabel], inp: &[SpaceLabel]) -> Result<LabeledOperator> {
    let d_out: usize = out.iter().map(|s| s.dim).product();
    let d_in: usize = inp.iter().map(|s| s.dim).product();
    let d = d_out * d_in;
    for _ in 0..100 {
        let g = linalg::ginibre(rng, d, d);
        let x = &g * g.adjoint();
        if let Some(x) = normalize_tooth(&x, d_out, d_in) {
            let spaces = out.iter().chain(inp).cloned().collect();
            return LabeledOperator::new(spaces, x);
        }
    }
    Err(Error::Numerical("could not sample a nonsingular tooth".into()))
}

/// Each tooth is `GG†` for a complex Ginibre `G`, rescaled to satisfy its
/// trace condition exactly.
pub fn random_strategy(n_uses: usize, d_in: usize, d_out: usize, d_anc: usize, k: usize, seed: u64) -> Result<Strategy> {
    if n_uses == 0 || d_in == 0 || d_out == 0 || d_anc == 0 || k == 0 {
        return Err(Error::InvalidParameter("strategy dimensions must be positive".into()));
    }
    let dims = StrategyDims { n_uses, d_in, d_out, d_anc, k };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut teeth = Vec::with_capacity(n_uses + 1);
    for t in 0..=n_uses {
        let kind = dims.kind(t);
        let (out, inp) = dims.tooth_spaces(kind);
        let x = random_tooth(&mut rng, &out, &inp)?;
        teeth.push(x.reorder(&names(&dims.stored_order(kind)))?);
    }
    let meas = teeth.pop().expect("N ≥ 1");
    let rho = teeth.remove(0);
    Ok(Strategy { rho, controls: teeth, meas, dims })
}

fn check_dims(s: &Strategy, inst: &DiscriminationInstance) -> Result<()> {
    if s.dims.d_in != inst.d_in() || s.dims.d_out != inst.d_out() || s.dims.k != inst.k() {
        return Err(Error::DimensionMismatch("strategy does not match the instance".into()));
    }
    Ok(())
}

/// `|k⟩⟨k|` on the register.
fn register_projector(k: usize, dim: usize) -> LabeledOperator {
    let mut p = CMat::zeros(dim, dim);
    p[(k, k)] = ONE;
    LabeledOperator::new(vec![space(REGISTER, dim)], p).expect("valid space")
}

/// Per-channel Choi operators relabelled for each use: `[k][n-1]` on `(O{n}, I{n})`.
fn use_chois(inst: &DiscriminationInstance, n_uses: usize) -> Result<Vec<Vec<LabeledOperator>>> {
    inst.chois()
        .iter()
        .map(|ch| {
            (1..=n_uses)
                .map(|n| {
                    let (o, i) = (output_label(n), input_label(n));
                    ch.relabeled(&[("O", o.as_str()), ("I", i.as_str())])
                })
                .collect()
        })
        .collect()
}

/// Left environment after `n` uses: the state on `(O{n}, A{n})` produced by
/// `ρ, E_1, …, E_{n−1}` and `n` channel uses.
fn left_after(s: &Strategy, chois: &[LabeledOperator], n: usize) -> Result<LabeledOperator> {
    let mut l = chois[0].link_product(&s.rho)?;
    for m in 1..n {
        let tau = s.controls[m - 1].link_product(&l)?;
        l = chois[m].link_product(&tau)?;
    }
    Ok(l)
}

/// Right environments for one channel: `out[n]` is the contraction of
/// `E_{n+1}, …, E_{N−1}, M`, the projector and the channel uses `n+1..N`,
/// living on `(A{n+1}, I{n+1})`, for `n = 0..N−1`.
fn right_environments(s: &Strategy, chois: &[LabeledOperator], k: usize) -> Result<Vec<LabeledOperator>> {
    let n_uses = s.dims.n_uses;
    let mut out = vec![LabeledOperator::scalar(ONE); n_uses];
    let mut phi = s.meas.link_product(&register_projector(k, s.dims.k))?;
    for n in (0..n_uses).rev() {
        let omega = phi.link_product(&chois[n])?;
        if n > 0 {
            phi = omega.link_product(&s.controls[n - 1])?;
        }
        out[n] = omega;
    }
    Ok(out)
}

fn env_from_parts(
    s: &Strategy,
    tooth: usize,
    left: Option<&LabeledOperator>,
    right: Option<&LabeledOperator>,
    k: usize,
) -> Result<LabeledOperator> {
    match s.dims.kind(tooth) {
        ToothKind::State => Ok(right.expect("right environment").clone()),
        ToothKind::Control(_) => left.expect("left").tensor_product(right.expect("right")),
        ToothKind::Measurement => left.expect("left").tensor_product(&register_projector(k, s.dims.k)),
    }
}

fn weighted_sum(parts: Vec<LabeledOperator>, priors: &[f64], order: &[String]) -> Result<LabeledOperator> {
    let mut acc: Option<LabeledOperator> = None;
    for (g, &p) in parts.into_iter().zip(priors) {
        let g = g.reorder(&names(order))?.scaled(p);
        acc = Some(match acc {
            None => g,
            Some(a) => a.add(&g)?,
        });
    }
    Ok(acc.expect("at least one channel"))
}

/// Prior-weighted environment `G` of a tooth, recomputed from scratch, in
/// the tooth's stored space order. The success probability equals
/// `Tr[Gᵀ X]` for the current tooth `X`.
pub fn contract_environment(s: &Strategy, inst: &DiscriminationInstance, tooth: usize) -> Result<LabeledOperator> {
    check_dims(s, inst)?;
    let n_uses = s.dims.n_uses;
    if tooth > n_uses {
        return Err(Error::InvalidParameter(format!("tooth index {tooth} exceeds {n_uses}")));
    }
    let chois = use_chois(inst, n_uses)?;
    let order = s.dims.stored_order(s.dims.kind(tooth));
    let mut parts = Vec::with_capacity(inst.k());
    for k in 0..inst.k() {
        let left = if tooth > 0 { Some(left_after(s, &chois[k], tooth)?) } else { None };
        let right = if tooth < n_uses {
            Some(right_environments(s, &chois[k], k)?.swap_remove(tooth))
        } else {
            None
        };
        parts.push(env_from_parts(s, tooth, left.as_ref(), right.as_ref(), k)?);
    }
    weighted_sum(parts, inst.priors(), &order)
}

/// Cached environments for one pass over the teeth.
pub struct EnvironmentCache {
    chois: Vec<Vec<LabeledOperator>>,
    right: Vec<Vec<LabeledOperator>>,
    left: Vec<Option<LabeledOperator>>,
    next: usize,
}

impl EnvironmentCache {
    /// Caches the right environments of every tooth for the current strategy.
    pub fn new(s: &Strategy, inst: &DiscriminationInstance) -> Result<Self> {
        check_dims(s, inst)?;
        let chois = use_chois(inst, s.dims.n_uses)?;
        let right = (0..inst.k()).map(|k| right_environments(s, &chois[k], k)).collect::<Result<_>>()?;
        Ok(Self { chois, right, left: vec![None; inst.k()], next: 0 })
    }

    /// Environment of tooth `tooth`, which must be the next tooth in sweep
    /// order. Every earlier tooth must already hold its final value in `s`.
    pub fn environment(&mut self, s: &Strategy, inst: &DiscriminationInstance, tooth: usize) -> Result<LabeledOperator> {
        assert_eq!(tooth, self.next, "teeth must be visited in order");
        let n_uses = s.dims.n_uses;
        let order = s.dims.stored_order(s.dims.kind(tooth));
        let mut parts = Vec::with_capacity(inst.k());
        for k in 0..inst.k() {
            if tooth > 0 {
                // Extend the left environment by the freshly updated previous tooth.
                let l = match (&self.left[k], tooth) {
                    (None, 1) => self.chois[k][0].link_product(&s.rho)?,
                    (Some(prev), t) => {
                        let tau = s.controls[t - 2].link_product(prev)?;
                        self.chois[k][t - 1].link_product(&tau)?
                    }
                    _ => unreachable!("left environment missing"),
                };
                self.left[k] = Some(l);
            }
            let right = if tooth < n_uses { Some(&self.right[k][tooth]) } else { None };
            parts.push(env_from_parts(s, tooth, self.left[k].as_ref(), right, k)?);
        }
        self.next += 1;
        weighted_sum(parts, inst.priors(), &order)
    }
}

/// `Re Tr[Gᵀ X]` for operators on the same spaces.
pub fn tooth_objective(g: &LabeledOperator, x: &LabeledOperator) -> Result<f64> {
    let g = g.reorder(&x.names())?;
    Ok(g.data().iter().zip(x.data().iter()).map(|(a, b)| (a * b).re).sum())
}

pub fn strategy_success_probability(s: &Strategy, inst: &DiscriminationInstance) -> Result<f64> {
    check_dims(s, inst)?;
    let chois = use_chois(inst, s.dims.n_uses)?;
    let mut total = 0.0;
    for (k, &p) in inst.priors().iter().enumerate() {
        let l = left_after(s, &chois[k], s.dims.n_uses)?;
        let out = s.meas.link_product(&l)?;
        total += p * out.data()[(k, k)].re;
    }
    Ok(total)
}

/// Tester components `T_k = W̃ * |k⟩⟨k|` of the comb `W̃` obtained by
/// linking all teeth over the ancilla spaces.
pub fn assemble_comb(s: &Strategy) -> Tester {
    let mut w = s.rho.clone();
    for e in &s.controls {
        w = e.link_product(&w).expect("ancilla spaces chain");
    }
    w = s.meas.link_product(&w).expect("ancilla spaces chain");
    let spaces = tester_spaces(s.dims.n_uses, s.dims.d_in, s.dims.d_out);
    let order: Vec<&str> = spaces.iter().map(|l| l.name.as_str()).collect();
    let components = (0..s.dims.k)
        .map(|k| {
            w.link_product(&register_projector(k, s.dims.k))
                .and_then(|t| t.reorder(&order))
                .expect("tester spaces")
                .hermitized()
        })
        .collect();
    Tester { components, n_uses: s.dims.n_uses, d_in: s.dims.d_in, d_out: s.dims.d_out }
}

/// Maximizes `Tr[Gᵀ X]` over PSD `X` with `Tr_out X = 1_in`, where `out`
/// names the output spaces among `G`'s spaces. Returns the maximizer in
/// `G`'s space order and its objective value.
pub fn optimize_tooth(g: &LabeledOperator, out: &[&str], opts: &SolverOptions) -> Result<(LabeledOperator, f64)> {
    let defect = linalg::hermiticity_defect(g.data());
    let scale = 1.0 + linalg::frobenius(g.data());
    if defect > 1e-8 * scale {
        return Err(Error::Numerical(format!(
            "environment on {:?} is not Hermitian: anti-Hermitian part {defect:.3e}, norm {scale:.3e}",
            g.names()
        )));
    }
    let g = g.hermitized();
    let inp: Vec<&str> = g.names().into_iter().filter(|n| !out.contains(n)).collect();
    let order: Vec<&str> = out.iter().copied().chain(inp.iter().copied()).collect();
    let gw = g.reorder(&order)?;
    let d_out: usize = out.iter().map(|n| gw.spaces()[gw.position(n).unwrap()].dim).product();
    let d_in = gw.dim() / d_out;
    let d = gw.dim();

    let mut constraints = Vec::with_capacity(d_in * d_in);
    let mut rhs = Vec::with_capacity(d_in * d_in);
    for b in hermitian_basis(d_in) {
        let mut entries = Vec::with_capacity(b.len() * d_out);
        for o in 0..d_out {
            for &(r, cc, v) in &b {
                entries.push((o * d_in + r, o * d_in + cc, v));
            }
        }
        rhs.push(if b.len() == 1 { 1.0 } else { 0.0 });
        constraints.push(HermConstraint { parts: vec![(0, entries)] });
    }
    let sdp = MatrixSdp { block_dims: vec![d], objective: vec![gw.data().transpose()], constraints, rhs };
    let sol = sdp.solve(opts);
    if sol.status == SolveStatus::Infeasible || (sol.status != SolveStatus::Optimal && sol.primal_residual > 1e-6) {
        return Err(Error::Solver { status: sol.status, context: format!("tooth SDP on {:?}", g.names()) });
    }
    let x = normalize_tooth(&sol.blocks[0], d_out, d_in)
        .ok_or_else(|| Error::Numerical("tooth SDP returned a singular marginal".into()))?;
    let x = LabeledOperator::new(gw.spaces().to_vec(), x)?;
    let value = tooth_objective(&gw, &x)?;
    let x = x.reorder(&g.names())?;
    Ok((x, value))
}

#[derive(Debug, Clone)]
pub struct SeesawOptions {
    /// Relative improvement regarded as no progress.
    pub epsilon: f64,
    /// Number of cycles over which the improvement is measured.
    pub stall_cycles: usize,
    pub max_cycles: usize,
    pub restarts: usize,
    pub seed: u64,
    pub solver: SolverOptions,
    /// Used in place of the first random initialization when given.
    pub initial: Option<Strategy>,
}

impl Default for SeesawOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-4,
            stall_cycles: 5,
            max_cycles: 500,
            restarts: 10,
            seed: 0,
            solver: SolverOptions::default(),
            initial: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SeesawResult {
    pub best_strategy: Strategy,
    pub p_succ: f64,
    /// Success probability after each cycle of the best restart (entry 0 is
    /// the initial value).
    pub history: Vec<f64>,
    /// Success probability after every tooth update of the best restart.
    pub step_history: Vec<f64>,
    pub restart_values: Vec<f64>,
    pub restarts_used: usize,
    pub converged: bool,
    pub seed: u64,
}

impl SeesawResult {
    pub fn p_err(&self) -> f64 {
        1.0 - self.p_succ
    }
}

struct Run {
    strategy: Strategy,
    value: f64,
    history: Vec<f64>,
    steps: Vec<f64>,
    converged: bool,
}

fn restart_seed(seed: u64, r: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(r as u64)
}

fn single_run(inst: &DiscriminationInstance, mut s: Strategy, opts: &SeesawOptions) -> Result<Run> {
    let n_uses = s.dims.n_uses;
    let mut value = strategy_success_probability(&s, inst)?;
    let mut history = vec![value];
    let mut steps = vec![value];
    let mut converged = false;
    for cycle in 0..opts.max_cycles {
        let start = value;
        let mut cache = EnvironmentCache::new(&s, inst)?;
        for tooth in 0..=n_uses {
            let g = cache.environment(&s, inst, tooth)?;
            let kind = s.dims.kind(tooth);
            let (out, _) = s.dims.tooth_spaces(kind);
            let out_names: Vec<&str> = out.iter().map(|l| l.name.as_str()).collect();
            let current = tooth_objective(&g, s.tooth(tooth))?;
            match optimize_tooth(&g, &out_names, &opts.solver) {
                Ok((x, v)) if v >= current => {
                    s.set_tooth(tooth, x);
                    value = v;
                }
                Ok(_) => value = current,
                Err(e) => {
                    warn!("keeping tooth {tooth} after solver failure: {e}");
                    value = current;
                }
            }
            steps.push(value);
        }
        history.push(value);
        debug!("cycle {cycle}: p_succ = {value:.12} (change {:.2e})", value - start);
        // Stop once the last `stall_cycles` cycles together gained less
        // than `epsilon` relative to where they started.
        if history.len() > opts.stall_cycles {
            let base = history[history.len() - 1 - opts.stall_cycles];
            if (value - base) / base.abs().max(1e-12) < opts.epsilon {
                converged = true;
                break;
            }
        }
    }
    Ok(Run { strategy: s, value, history, steps, converged })
}

/// Best of `opts.restarts` independent see-saw runs.
pub fn run_seesaw(inst: &DiscriminationInstance, n_uses: usize, d_anc: usize, opts: &SeesawOptions) -> Result<SeesawResult> {
    let restarts = opts.restarts.max(1);
    let mut best: Option<Run> = None;
    let mut restart_values = Vec::with_capacity(restarts);
    for r in 0..restarts {
        let init = match (&opts.initial, r) {
            (Some(s0), 0) => {
                let s = s0.embed_ancilla(d_anc)?;
                if s.dims.n_uses != n_uses {
                    return Err(Error::DimensionMismatch("initial strategy has a different N".into()));
                }
                s
            }
            _ => random_strategy(n_uses, inst.d_in(), inst.d_out(), d_anc, inst.k(), restart_seed(opts.seed, r))?,
        };
        let run = single_run(inst, init, opts)?;
        restart_values.push(run.value);
        if best.as_ref().is_none_or(|b| run.value > b.value) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one restart");
    Ok(SeesawResult {
        p_succ: best.value,
        best_strategy: best.strategy,
        history: best.history,
        step_history: best.steps,
        restart_values,
        restarts_used: restarts,
        converged: best.converged,
        seed: opts.seed,
    })
}

/// Guessing `argmax_k p_k` without using the channels.
pub fn constant_guess_value(inst: &DiscriminationInstance) -> f64 {
    inst.priors().iter().copied().fold(0.0, f64::max)
}

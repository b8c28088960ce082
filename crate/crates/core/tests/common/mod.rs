//! Property checks shared by the property suites and the acceptance target.
//! Each check draws its inputs from a seed and returns `Err` with a
//! description on violation.

#![allow(dead_code)]

use chandisc::channels::DiscriminationInstance;
use chandisc::linalg::{self, c, CMat, C64};
use chandisc::sdp::{opnorm_epigraph, AffineMatrix, HermConstraint, MatrixSdp, SdpProblem, SolverOptions};
use chandisc::seesaw::{run_seesaw, SeesawOptions};
use chandisc::tensor::{choi_from_kraus_labeled, kraus_from_choi, KrausChannel};
use chandisc::tester::{solve_exact, validate_tester};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<(), String>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Kraus operators cut from the first `d_in` columns of a Haar unitary. The
/// rank is raised where needed to make the columns fit.
pub fn random_channel(rng: &mut ChaCha8Rng, d_in: usize, d_out: usize, rank: usize) -> KrausChannel {
    let rank = rank.max(d_in.div_ceil(d_out));
    let u = linalg::random_unitary(rng, d_out * rank);
    let kraus = (0..rank).map(|i| u.view((i * d_out, 0), (d_out, d_in)).into_owned()).collect();
    KrausChannel::new(kraus).expect("isometry blocks are trace preserving")
}

pub fn random_state(rng: &mut ChaCha8Rng, d: usize) -> CMat {
    let g = linalg::ginibre(rng, d, d);
    let rho = &g * g.adjoint();
    let tr = linalg::trace(&rho).re;
    rho / c(tr, 0.0)
}

fn random_hermitian(rng: &mut ChaCha8Rng, d: usize) -> CMat {
    linalg::hermitian_part(&linalg::ginibre(rng, d, d))
}

/// Choi → Kraus → Choi reproduces the operator, and the recovered Kraus
/// operators act like the originals.
pub fn choi_kraus_round_trip(seed: u64) -> Check {
    let mut r = rng(seed);
    let (d_in, d_out, rank) = (r.random_range(1..=3), r.random_range(1..=3), r.random_range(1..=3));
    let ch = random_channel(&mut r, d_in, d_out, rank);
    let choi = ch.choi();
    let back = kraus_from_choi(&choi, 1e-12).map_err(|e| e.to_string())?;
    let err = linalg::max_abs(&(back.choi().data() - choi.data()));
    if err > 1e-9 {
        return Err(format!("Choi mismatch {err:.2e} for ({d_in}, {d_out}, {rank})"));
    }
    let rho = random_state(&mut r, d_in);
    let diff = linalg::max_abs(&(ch.apply(&rho).unwrap() - back.apply(&rho).unwrap()));
    if diff > 1e-9 {
        return Err(format!("action mismatch {diff:.2e}"));
    }
    Ok(())
}

/// The link product of two Choi operators equals the Choi operator of the
/// composed Kraus operators `{B_j A_i}`.
pub fn link_composition(seed: u64) -> Check {
    let mut r = rng(seed);
    let (d1, d2, d3) = (r.random_range(1..=3), r.random_range(1..=3), r.random_range(1..=3));
    let (ra, rb) = (r.random_range(1..=2), r.random_range(1..=2));
    let a = random_channel(&mut r, d1, d2, ra);
    let b = random_channel(&mut r, d2, d3, rb);
    let ca = choi_from_kraus_labeled(&a, "M", "I").unwrap();
    let cb = choi_from_kraus_labeled(&b, "O", "M").unwrap();
    let linked = cb.link_product(&ca).map_err(|e| e.to_string())?.reorder(&["O", "I"]).unwrap();
    let composed: Vec<CMat> = b.kraus().iter().flat_map(|kb| a.kraus().iter().map(move |ka| kb * ka)).collect();
    let direct = choi_from_kraus_labeled(&KrausChannel::new(composed).unwrap(), "O", "I").unwrap();
    let err = linalg::max_abs(&(linked.data() - direct.data()));
    if err > 1e-10 {
        return Err(format!("composition mismatch {err:.2e} for dims ({d1}, {d2}, {d3})"));
    }
    Ok(())
}

pub fn random_instance(r: &mut ChaCha8Rng, k: usize) -> DiscriminationInstance {
    let chans = (0..k)
        .map(|_| {
            let rank = r.random_range(1..=2);
            random_channel(r, 2, 2, rank)
        })
        .collect();
    DiscriminationInstance::new(chans, vec![1.0 / k as f64; k]).unwrap()
}

/// Optimal testers satisfy positivity and the causal trace conditions.
pub fn tester_validity(seed: u64) -> Check {
    let mut r = rng(seed);
    let inst = random_instance(&mut r, 2);
    let n = r.random_range(1..=2);
    let res = solve_exact(&inst, n).map_err(|e| e.to_string())?;
    let report = validate_tester(&res.tester, 1e-7);
    if !report.passed || report.worst() > 1e-7 {
        return Err(format!("tester residual {:.2e} at N = {n}", report.worst()));
    }
    Ok(())
}

/// Every tooth update of the see-saw keeps or raises the success probability.
pub fn seesaw_monotone(seed: u64) -> Check {
    let mut r = rng(seed);
    let inst = random_instance(&mut r, 2);
    let n = r.random_range(1..=3);
    let d_anc = r.random_range(1..=2);
    let opts = SeesawOptions { restarts: 1, seed, max_cycles: 30, ..Default::default() };
    let res = run_seesaw(&inst, n, d_anc, &opts).map_err(|e| e.to_string())?;
    for w in res.step_history.windows(2) {
        if w[1] < w[0] - 1e-7 {
            return Err(format!("decrease {:.3e} at N = {n}, d_A = {d_anc}", w[0] - w[1]));
        }
    }
    Ok(())
}

/// Small SDPs with closed-form optima:
/// `max Re Tr(C X)` over density matrices is `λ_max(C)`;
/// `min t` with `‖B‖ ≤ t` is the operator norm;
/// the two-outcome measurement optimum is `½(1 + ½‖ρ1 − ρ2‖_1)`.
pub fn sdp_two_by_two(seed: u64) -> Check {
    let mut r = rng(seed);
    let opts = SolverOptions::default();

    let cost = random_hermitian(&mut r, 2);
    let mut trace_one = HermConstraint::default();
    trace_one.add(0, 0, 0, c(1.0, 0.0));
    trace_one.add(0, 1, 1, c(1.0, 0.0));
    let sdp = MatrixSdp { block_dims: vec![2], objective: vec![cost.clone()], constraints: vec![trace_one], rhs: vec![1.0] };
    let got = sdp.solve(&opts).objective_value;
    let want = linalg::eigvalsh(&cost)[1];
    if (got - want).abs() > 1e-6 {
        return Err(format!("largest eigenvalue {got} vs {want}"));
    }

    let b = linalg::ginibre(&mut r, 2, 2);
    let mut p = SdpProblem::new(1);
    p.objective[0] = 1.0;
    p.lmi_blocks.push(opnorm_epigraph(&AffineMatrix::constant(b.clone()), 0));
    let got = p.solve(&opts).map_err(|e| e.to_string())?.objective_value;
    let want = linalg::op_norm(&b);
    if (got - want).abs() > 1e-6 {
        return Err(format!("operator norm {got} vs {want}"));
    }

    let (rho1, rho2) = (random_state(&mut r, 2), random_state(&mut r, 2));
    let mut cons = Vec::new();
    for (i, j) in [(0, 0), (1, 1), (0, 1)] {
        for (re, im) in [(1.0, 0.0), (0.0, 1.0)] {
            if i == j && im != 0.0 {
                continue;
            }
            let mut hc = HermConstraint::default();
            hc.add(0, i, j, C64::new(re, im) * 0.5);
            hc.add(1, i, j, C64::new(re, im) * 0.5);
            cons.push(hc);
        }
    }
    // Σ_k T_k = 1: diagonal entries equal one, off-diagonal entries vanish.
    let rhs = vec![0.5, 0.5, 0.0, 0.0];
    let sdp = MatrixSdp { block_dims: vec![2, 2], objective: vec![rho1.clone() * c(0.5, 0.0), rho2.clone() * c(0.5, 0.0)], constraints: cons, rhs };
    let got = sdp.solve(&opts).objective_value;
    let dist: f64 = linalg::eigvalsh(&linalg::hermitian_part(&(&rho1 - &rho2))).iter().map(|v| v.abs()).sum::<f64>() * 0.5;
    let want = 0.5 * (1.0 + dist);
    if (got - want).abs() > 1e-6 {
        return Err(format!("two-outcome optimum {got} vs {want}"));
    }
    Ok(())
}

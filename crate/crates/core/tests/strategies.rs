mod common;

use chandisc::linalg;
use chandisc::seesaw::{
    assemble_comb, contract_environment, random_strategy, strategy_success_probability, tooth_objective,
    EnvironmentCache,
};
use chandisc::tester::{tester_success_probability, validate_tester};
use rand::Rng;

#[test]
fn strategy_and_assembled_tester_agree() {
    for seed in 0..50 {
        let mut r = common::rng(1000 + seed);
        let k = r.random_range(2..=3);
        let inst = common::random_instance(&mut r, k);
        let n = r.random_range(1..=3);
        let d_anc = r.random_range(1..=2);
        let s = random_strategy(n, 2, 2, d_anc, k, seed).unwrap();
        let direct = strategy_success_probability(&s, &inst).unwrap();
        let via = tester_success_probability(&assemble_comb(&s), &inst).unwrap();
        assert!((direct - via).abs() < 1e-10, "seed {seed}: {direct} vs {via}");
        assert!((0.0..=1.0 + 1e-12).contains(&direct));
    }
}

#[test]
fn cached_environments_match_scratch() {
    for n in 1..=8 {
        let mut r = common::rng(n as u64);
        let inst = common::random_instance(&mut r, 2);
        let d_anc = if n <= 4 { 2 } else { 1 };
        let s = random_strategy(n, 2, 2, d_anc, 2, 40 + n as u64).unwrap();
        let value = strategy_success_probability(&s, &inst).unwrap();
        let mut cache = EnvironmentCache::new(&s, &inst).unwrap();
        for t in 0..=n {
            let scratch = contract_environment(&s, &inst, t).unwrap();
            let cached = cache.environment(&s, &inst, t).unwrap();
            let diff = linalg::max_abs(&(scratch.data() - cached.data()));
            assert!(diff < 1e-10, "N = {n}, tooth {t}: {diff:.2e}");
            let v = tooth_objective(&cached, s.tooth(t)).unwrap();
            assert!((v - value).abs() < 1e-10, "N = {n}, tooth {t}: {v} vs {value}");
        }
    }
}

#[test]
fn random_strategies_are_valid() {
    for seed in 0..100 {
        let n = 1 + (seed as usize % 3);
        let d_anc = 1 + (seed as usize / 3 % 2);
        let s = random_strategy(n, 2, 2, d_anc, 2, seed).unwrap();
        assert!(s.is_valid(1e-9), "seed {seed}: violation {:.2e}", s.violation());
        let report = validate_tester(&assemble_comb(&s), 1e-9);
        assert!(report.passed, "seed {seed}: tester residual {:.2e}", report.worst());
    }
}

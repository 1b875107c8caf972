use coopsgd::engine::{averaged_model, coop_step, network_error, run, AlgorithmConfig, ParamMatrix, UpdateRule};
use coopsgd::mixing::{
    easgd_zeta, make_complete_with_gap, make_easgd, make_fully_connected, make_ring, random_doubly_stochastic,
    MixingMatrix,
};
use coopsgd::objectives::QuadraticProblem;
use coopsgd::theory::{network_coefficient, theorem1_bound, zeta_threshold, BoundInputs};
use coopsgd::timeline::{simulate_timeline, sync_cost, ComputeTime, DelayModel};
use coopsgd::{AlgorithmConfigF32, MixingMatrixF32, QuadraticF32};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_w(n: usize, seed: u64) -> MixingMatrix<f64> {
    random_doubly_stochastic(n, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn matrix_strategy() -> impl Strategy<Value = (usize, u64, Vec<f64>)> {
    (2usize..9, any::<u64>(), 1usize..5).prop_flat_map(|(n, seed, d)| {
        (Just(n), Just(seed), prop::collection::vec(-10.0..10.0f64, n * d))
    })
}

fn params(n: usize, values: &[f64]) -> ParamMatrix<f64> {
    let d = values.len() / n;
    let cols: Vec<Vec<f64>> = values.chunks(d).map(<[f64]>::to_vec).collect();
    ParamMatrix::from_columns(&cols, n).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_mixing_is_valid((n, seed, _) in matrix_strategy()) {
        let w = random_w(n, seed);
        let report = w.validate();
        prop_assert!(report.valid);
        prop_assert!(report.symmetry_defect == 0.0);
        prop_assert!(report.row_sum_defect < 1e-12);
        prop_assert!(w.zeta() >= 0.0 && w.zeta() < 1.0);
    }

    #[test]
    fn mixing_preserves_average((n, seed, values) in matrix_strategy()) {
        let w = random_w(n, seed);
        let x = params(n, &values);
        let zero = ParamMatrix::zeros(x.dim(), n, 0).unwrap();
        for rule in [UpdateRule::PostMultiply, UpdateRule::PreMultiply] {
            let y = coop_step(&x, &w, 0.3, &zero, rule).unwrap();
            for (a, b) in averaged_model(&x).iter().zip(averaged_model(&y)) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
            }
        }
    }

    #[test]
    fn mixing_contracts_disagreement((n, seed, values) in matrix_strategy()) {
        let w = random_w(n, seed);
        let x = params(n, &values);
        let zero = ParamMatrix::zeros(x.dim(), n, 0).unwrap();
        let before = network_error(&x);
        let after = network_error(&coop_step(&x, &w, 0.0, &zero, UpdateRule::PostMultiply).unwrap());
        prop_assert!(after <= w.zeta().powi(2) * before + 1e-10 * (1.0 + before));
    }

    #[test]
    fn gradient_step_moves_average_by_mean_gradient(
        (n, seed, values) in matrix_strategy(),
        eta in 0.0..1.0f64,
        gseed in any::<u64>(),
    ) {
        let w = random_w(n, seed);
        let x = params(n, &values);
        let grads: Vec<f64> = values.iter().enumerate().map(|(i, v)| (v * 0.37 + (gseed % 97) as f64 + i as f64).sin()).collect();
        let g = params(n, &grads);
        let y = coop_step(&x, &w, eta, &g, UpdateRule::PostMultiply).unwrap();
        let (xa, ga, ya) = (averaged_model(&x), averaged_model(&g), averaged_model(&y));
        for i in 0..xa.len() {
            prop_assert!((ya[i] - (xa[i] - eta * ga[i])).abs() < 1e-11);
        }
    }

    #[test]
    fn easgd_zeta_matches_eigensolve(m in 2usize..10, alpha in 0.01..0.2f64) {
        let alpha = alpha.min(0.95 / m as f64);
        let w = make_easgd::<f64>(m, alpha).unwrap();
        prop_assert!((w.zeta() - easgd_zeta(m, alpha)).abs() < 1e-10);
    }

    #[test]
    fn complete_with_gap_hits_target(n in 2usize..10, zeta in 0.0..0.95f64) {
        let w = make_complete_with_gap::<f64>(n, zeta).unwrap();
        prop_assert!((w.zeta() - zeta).abs() < 1e-10);
    }

    #[test]
    fn bound_decomposes(
        f1 in 0.01..10.0f64,
        l in 0.1..10.0f64,
        sigma_sq in 0.0..5.0f64,
        m in 1usize..16,
        v in 0usize..3,
        tau in 1usize..64,
        zeta in 0.0..0.99f64,
        eta in 1e-4..0.5f64,
        k in 1usize..100_000,
    ) {
        let inputs = BoundInputs { f1_minus_finf: f1, lipschitz: l, sigma_sq, beta: 0.0, workers: m, aux: v, tau, zeta, eta, iterations: k };
        let r = theorem1_bound(&inputs).unwrap();
        let sum = r.opt_term + r.stat_term + r.network_term;
        prop_assert!((r.bound - sum).abs() <= 1e-12 * sum);
        prop_assert!((r.floor - (r.bound - r.opt_term)).abs() <= 1e-12 * r.bound);
        prop_assert!(r.network_term >= 0.0);
        prop_assert_eq!(r.lr_ok, r.lr_lhs <= 1.0);
    }

    #[test]
    fn floor_grows_with_tau_and_zeta(
        m in 1usize..16,
        v in 0usize..3,
        tau in 1usize..64,
        zeta in 0.0..0.98f64,
        eta in 1e-4..0.5f64,
    ) {
        let base = BoundInputs { f1_minus_finf: 1.0, lipschitz: 1.0, sigma_sq: 1.0, beta: 0.0, workers: m, aux: v, tau, zeta, eta, iterations: 1000 };
        let floor = |i: &BoundInputs<f64>| theorem1_bound(i).unwrap().floor;
        let f = floor(&base);
        let longer = floor(&BoundInputs { tau: tau + 1, ..base });
        let sparser = floor(&BoundInputs { zeta: zeta + 0.01, ..base });
        prop_assert!(longer > f);
        prop_assert!(sparser > f);
    }

    #[test]
    fn threshold_equates_floors(tau in 1usize..500) {
        let z = zeta_threshold::<f64>(tau);
        let lhs = network_coefficient(1, z);
        let rhs = network_coefficient(tau, 0.0);
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs));
    }

    #[test]
    fn sync_amortizes_over_period(tau in 1usize..20, rounds in 1usize..50, c in 0.1..2.0f64, b in 0.0..2.0f64, p in 0.0..1.0f64) {
        let w = make_ring::<f64>(6).unwrap();
        let delay = DelayModel::constant(c, b, p);
        let t = simulate_timeline(rounds * tau, tau, &w, 6, &delay, 0).unwrap();
        let expected = rounds as f64 * (tau as f64 * c + sync_cost(&w, 6, &delay));
        prop_assert!((t.total_time() - expected).abs() <= 1e-9 * expected);
        prop_assert_eq!(t.cumulative.len(), rounds * tau + 1);
        prop_assert!(t.cumulative.windows(2).all(|s| s[1] >= s[0]));
    }

    #[test]
    fn nonblocking_never_slower(m in 2usize..10, alpha in 0.01..0.1f64, b in 0.0..1.0f64, p in 0.0..1.0f64) {
        let w = make_easgd::<f64>(m, alpha).unwrap();
        let delay = DelayModel::constant(1.0, b, p);
        prop_assert!(sync_cost(&w, m, &delay.with_nonblocking_aux(true)) <= sync_cost(&w, m, &delay));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn runs_are_reproducible(seed in any::<u64>(), tau in 1usize..5) {
        let q = QuadraticProblem::<f64>::synthetic(4, 0.2, 1.0, 3, 0.5).unwrap();
        let cfg = AlgorithmConfig::new(tau, make_ring(5).unwrap(), 0, 0.1, tau * 40, seed).unwrap();
        let a = run(&cfg, &q).unwrap();
        let b = run(&cfg, &q).unwrap();
        prop_assert_eq!(a.to_csv_string(), b.to_csv_string());
    }

    #[test]
    fn full_sync_every_step_has_no_disagreement(seed in any::<u64>(), m in 1usize..8) {
        let q = QuadraticProblem::<f64>::synthetic(4, 0.2, 1.0, 3, 0.5).unwrap();
        let cfg = AlgorithmConfig::new(1, make_fully_connected(m).unwrap(), 0, 0.1, 50, seed).unwrap();
        let trace = run(&cfg, &q).unwrap();
        prop_assert!(trace.records().iter().all(|r| r.network_error < 1e-24));
    }
}

#[test]
fn straggler_idle_time_shrinks_with_period() {
    let w = make_ring::<f64>(8).unwrap();
    let delay = DelayModel {
        compute: ComputeTime::ShiftedExp { c: 1.0, mean: 0.5 },
        comm_latency: 0.5,
        comm_per_neighbor: 0.1,
        nonblocking_aux: false,
    };
    let rounds = 10_000;
    let every = simulate_timeline(rounds, 1, &w, 8, &delay, 11).unwrap();
    let fourth = simulate_timeline(rounds * 4, 4, &w, 8, &delay, 11).unwrap();
    assert!(fourth.mean_idle_fraction() < every.mean_idle_fraction());
    assert!(fourth.comm_fraction() < every.comm_fraction());
}

#[test]
fn decomposition_holds_on_averaged_runs() {
    let q = QuadraticProblem::<f64>::synthetic(6, 0.1, 1.0, 5, 1.0).unwrap();
    let w = make_complete_with_gap::<f64>(4, 0.5).unwrap();
    let traces: Vec<_> = (0..16)
        .map(|s| run(&AlgorithmConfig::new(4, w.clone(), 0, 0.1, 400, s).unwrap(), &q).unwrap())
        .collect();
    let mean = coopsgd::engine::average_traces(&traces).unwrap();
    let x1 = vec![0.0; 6];
    let inputs = BoundInputs {
        f1_minus_finf: coopsgd::objectives::objective_value(&q, &x1) - coopsgd::objectives::GradientOracle::f_inf(&q),
        lipschitz: coopsgd::objectives::GradientOracle::lipschitz(&q),
        sigma_sq: 1.0,
        beta: 0.0,
        workers: 4,
        aux: 0,
        tau: 4,
        zeta: w.zeta(),
        eta: 0.1,
        iterations: 400,
    };
    let check = coopsgd::theory::lemma3_empirical_bound(&mean, &inputs).unwrap();
    assert!(check.applicable && check.holds, "{check:?}");
}

#[test]
fn single_precision_pipeline() {
    let q = QuadraticF32::synthetic(5, 0.2, 1.0, 2, 0.1).unwrap();
    let w: MixingMatrixF32 = make_ring(4).unwrap();
    let cfg: AlgorithmConfigF32 = AlgorithmConfig::new(2, w, 0, 0.2, 2000, 9).unwrap();
    let trace = run(&cfg, &q).unwrap();
    assert!(!trace.diverged());
    assert!(trace.tail_mean_grad_norm_sq(0.2) < 0.05);
    assert!(trace.final_loss() < trace.records()[0].loss);
}

#[test]
fn eigensolver_agrees_with_nalgebra() {
    for seed in 0..40 {
        let n = 2 + (seed as usize % 12);
        let w = random_w(n, seed);
        let m = nalgebra::DMatrix::from_row_slice(n, n, w.entries().as_slice());
        let mut eig: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
        eig.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let expected = eig[1].abs().max(eig[n - 1].abs());
        assert!((w.zeta() - expected).abs() < 1e-10, "n={n} seed={seed}");
    }
}

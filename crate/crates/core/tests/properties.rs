mod common;

use proptest::prelude::*;
use rsma_opt::channel::{draw_saa_samples, generate_block, ChannelConfig};
use rsma_opt::linalg::CVector;
use rsma_opt::qcqp::{solve, SolveStatus};
use rsma_opt::rates::{average_rate, decode_events, instantaneous_rate, xi_mmse, PrecoderSet};
use rsma_opt::strategy::{self as strat, make_layout, LayoutParams, StreamLayout};

fn strategy() -> impl Strategy<Value = strat::Strategy> {
    prop::sample::select(strat::Strategy::ALL.to_vec())
}

fn random_precoders(layout: &StreamLayout, nt: usize, seed: u64) -> PrecoderSet {
    let mut r = common::rng(seed);
    let mut p = PrecoderSet::zeros(layout, nt);
    for v in &mut p.vectors {
        *v = common::random_vector(&mut r, nt, 1.0);
    }
    p
}

fn setup(st: strat::Strategy, k: usize, seed: u64, m: usize) -> (StreamLayout, PrecoderSet, rsma_opt::channel::SaaSampleSet) {
    let cfg = ChannelConfig::new(k, 3, 0.5, 15.0, seed);
    let block = generate_block(&cfg, seed % 7).unwrap();
    let samples = draw_saa_samples(&block, &cfg, m).unwrap();
    let layout = make_layout(st, k, &LayoutParams::default()).unwrap();
    let p = random_precoders(&layout, 3, seed);
    (layout, p, samples)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scaling_interferers_never_helps(st in strategy(), k in 2usize..=3, seed in 0u64..10_000, gamma in 1.0f64..5.0) {
        let (layout, p, samples) = setup(st, k, seed, 1);
        for ev in decode_events(&layout) {
            let base = instantaneous_rate(&layout, &p, samples.sample(0), ev.user, ev.stream).unwrap();
            let mut q = p.clone();
            for (j, v) in q.vectors.iter_mut().enumerate() {
                if j != ev.stream {
                    *v *= rsma_opt::linalg::C64::new(gamma, 0.0);
                }
            }
            let scaled = instantaneous_rate(&layout, &q, samples.sample(0), ev.user, ev.stream).unwrap();
            prop_assert!(scaled <= base * (1.0 + 1e-12), "{st} u{} s{}: {base} -> {scaled}", ev.user, ev.stream);
        }
    }

    #[test]
    fn rates_are_nonnegative_and_vanish_without_power(st in strategy(), k in 1usize..=3, seed in 0u64..10_000) {
        let (layout, p, samples) = setup(st, k, seed, 2);
        for ev in decode_events(&layout) {
            let r = instantaneous_rate(&layout, &p, samples.sample(1), ev.user, ev.stream).unwrap();
            prop_assert!(r > 0.0);
            let mut q = p.clone();
            q.vectors[ev.stream] = CVector::zeros(3);
            prop_assert_eq!(instantaneous_rate(&layout, &q, samples.sample(1), ev.user, ev.stream).unwrap(), 0.0);
        }
    }

    #[test]
    fn averaged_identity(st in strategy(), k in 1usize..=3, seed in 0u64..10_000) {
        let (layout, p, samples) = setup(st, k, seed, 16);
        for ev in decode_events(&layout) {
            let xi: f64 = samples
                .iter()
                .map(|s| xi_mmse(&layout, &p, s, ev.user, ev.stream).unwrap())
                .sum::<f64>() / samples.len() as f64;
            let avg = average_rate(&layout, &p, &samples, ev.user, ev.stream).unwrap();
            prop_assert!((xi - (1.0 - avg)).abs() <= 1e-9);
        }
    }

    #[test]
    fn error_variance_monotone(a1 in 0.0f64..1.0, da in 0.0f64..0.5, snr in 0.0f64..40.0, dsnr in 0.0f64..10.0) {
        let lo = ChannelConfig::new(2, 2, a1, snr, 0);
        let hi_alpha = ChannelConfig::new(2, 2, a1 + da, snr, 0);
        let hi_snr = ChannelConfig::new(2, 2, a1, snr + dsnr, 0);
        prop_assert!(hi_alpha.error_variance(0) <= lo.error_variance(0));
        prop_assert!(hi_snr.error_variance(0) <= lo.error_variance(0));
    }

    #[test]
    fn blocks_are_reproducible(seed in any::<u64>(), block in 0u64..1000, m in 1usize..8) {
        let cfg = ChannelConfig::new(3, 2, 0.7, 12.0, seed);
        let a = draw_saa_samples(&generate_block(&cfg, block).unwrap(), &cfg, m).unwrap();
        let b = draw_saa_samples(&generate_block(&cfg, block).unwrap(), &cfg, m).unwrap();
        prop_assert_eq!(a, b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn objective_scaling_keeps_the_argmin(seed in 0u64..5000, lambda in 0.1f64..10.0) {
        let prob = common::random_problem(seed);
        let a = solve(&prob);
        prop_assume!(a.status == SolveStatus::Optimal);
        let mut scaled = prob.clone();
        scaled.objective = prob.objective.scaled(lambda);
        let b = solve(&scaled);
        prop_assert_eq!(b.status, SolveStatus::Optimal);
        // A relative gap g leaves the argmin within sqrt(2 g |f| / mu) with
        // mu = 0.05 here, so certified solves agree to ~1e-5, not 1e-6.
        for (u, v) in a.precoders.iter().zip(&b.precoders) {
            prop_assert!((u - v).norm() <= 1e-4, "{}", (u - v).norm());
        }
        prop_assert!((b.objective_value - lambda * a.objective_value).abs() <= 1e-6 * (1.0 + b.objective_value.abs()));
    }

    #[test]
    fn returned_solutions_are_feasible(seed in 0u64..5000) {
        let prob = common::random_problem(seed);
        let s = solve(&prob);
        prop_assert_eq!(s.status, SolveStatus::Optimal);
        prop_assert!(s.kkt_residuals.primal <= 1e-7);
        let tail = &s.gap_history[s.gap_history.len().saturating_sub(5)..];
        prop_assert!(tail.windows(2).all(|w| w[1] <= w[0]), "{:?}", tail);
    }
}

//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Run a subset with `cargo test --test acceptance -- <name-substring>`.

mod common;

use std::sync::OnceLock;
use std::time::Instant;

use rand::Rng;
use rsma_opt::channel::{draw_saa_samples, generate_block, ChannelConfig, ChannelSample};
use rsma_opt::exec::Exec;
use rsma_opt::experiments::region::max_excursion;
use rsma_opt::experiments::{
    estimate_dof, run_esr_curve, run_rate_region, ExperimentSpec, ResultRecord, RunOptions,
};
use rsma_opt::linalg::CVector;
use rsma_opt::optimizer::{best_over_orders, AoConfig};
use rsma_opt::qcqp::solve;
use rsma_opt::rates::{decode_events, mmse_equalizer, mmse_weight, mse, PrecoderSet};
use rsma_opt::strategy::{make_layout, ChannelKind, LayoutParams, Strategy, StreamLayout};

type Check = fn() -> (bool, String);

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let checks: [(&str, Check); 8] = [
        ("rate_wmmse_identity", rate_wmmse_identity),
        ("qcqp_oracle", qcqp_oracle),
        ("ao_monotonicity", ao_monotonicity),
        ("strategy_nesting", strategy_nesting),
        ("dof_slopes", dof_slopes),
        ("rs_gain_over_dpc", rs_gain_over_dpc),
        ("multicast_floor", multicast_floor),
        ("region_nesting", region_nesting),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let t = Instant::now();
        let (pass, detail) = check();
        println!(
            "{} {name}: {detail} ({:.1} s)",
            if pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64()
        );
        failed += usize::from(!pass);
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}

/// Rate of one decoding event computed straight from the channels.
fn direct_rate(layout: &StreamLayout, p: &PrecoderSet, smp: ChannelSample<'_>, user: usize, stream: usize) -> f64 {
    let proj = |h: CVector, v: &CVector| h.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum::<rsma_opt::linalg::C64>().norm_sqr();
    let h = smp.actual.column(user).into_owned();
    let e = smp.error.column(user).into_owned();
    let signal = proj(h.clone(), &p.vectors[stream]);
    let mut interference = 1.0;
    for t in layout.interference_set(user, stream).unwrap() {
        let c = match t.channel {
            ChannelKind::Actual => h.clone(),
            ChannelKind::Error => e.clone(),
        };
        interference += proj(c, &p.vectors[t.stream]);
    }
    (1.0 + signal / interference).log2()
}

fn rate_wmmse_identity() -> (bool, String) {
    let mut r = common::rng(77);
    let mut worst: f64 = 0.0;
    let t = Instant::now();
    for i in 0..1000 {
        let strategy = Strategy::ALL[i % 8];
        let k = r.gen_range(1..=3);
        let nt = r.gen_range(1..=4);
        let alpha = [0.0, 0.3, 0.6, f64::INFINITY][r.gen_range(0..4)];
        let cfg = ChannelConfig::new(k, nt, alpha, r.gen_range(0.0..25.0), r.gen());
        let block = generate_block(&cfg, r.gen_range(0..8)).unwrap();
        let samples = draw_saa_samples(&block, &cfg, 1).unwrap();
        let params = LayoutParams {
            multicast: r.gen_bool(0.2).then_some(0.0),
            ..Default::default()
        };
        let layout = make_layout(strategy, k, &params).unwrap();
        let mut p = PrecoderSet::zeros(&layout, nt);
        for v in &mut p.vectors {
            let scale = r.gen_range(0.0..4.0);
            *v = common::random_vector(&mut r, nt, scale);
        }
        let events = decode_events(&layout);
        let ev = &events[r.gen_range(0..events.len())];
        let smp = samples.sample(0);
        let g = mmse_equalizer(&layout, &p, smp, ev.user, ev.stream).unwrap();
        let w = mmse_weight(&layout, &p, smp, ev.user, ev.stream).unwrap();
        let m = mse(&layout, &p, smp, ev.user, ev.stream, g).unwrap();
        let rate = direct_rate(&layout, &p, smp, ev.user, ev.stream);
        worst = worst.max((w * m - w.log2() - (1.0 - rate)).abs());
    }
    let secs = t.elapsed().as_secs_f64();
    (
        worst <= 1e-9 && secs < 10.0,
        format!("max |w mse - log2 w - (1 - R)| = {worst:.2e} over 1000 tuples"),
    )
}

fn qcqp_oracle() -> (bool, String) {
    let t = Instant::now();
    let (mut worst_obj, mut worst_viol): (f64, f64) = (0.0, 0.0);
    for seed in 0..50 {
        let prob = common::random_problem(seed);
        let sol = solve(&prob);
        let oracle = common::oracle_solve(&prob);
        let power: f64 = sol.precoders.iter().map(|v| v.norm_squared()).sum();
        let viol = prob
            .max_violation(&sol.precoders, &sol.allocations)
            .max((power - prob.power) / prob.power)
            .max(sol.allocations.iter().zip(&prob.alloc_upper).map(|(x, u)| x - u).fold(0.0, f64::max));
        worst_viol = worst_viol.max(viol);
        worst_obj = worst_obj.max((sol.objective_value - oracle.objective).abs());
    }
    let secs = t.elapsed().as_secs_f64();
    (
        worst_obj <= 1e-4 && worst_viol <= 1e-7 && secs < 60.0,
        format!("max objective gap {worst_obj:.2e}, max violation {worst_viol:.2e} over 50 instances"),
    )
}

const SEEDS: u64 = 20;

/// Best-of-orders/inits WSR per `(strategy, seed)` for `K` users at 20 dB,
/// `alpha = 0.6`, `Nt = 4`, `M = 50`.
struct AoSweep {
    wsr: Vec<(Strategy, u64, f64)>,
    runs: usize,
    converged: usize,
    worst_drop: f64,
}

fn ao_sweep(k: usize, strategies: &[Strategy]) -> AoSweep {
    let ao = AoConfig {
        csit_alpha: Some(0.6),
        ..AoConfig::new(vec![1.0; k])
    };
    let mut out = AoSweep {
        wsr: Vec::new(),
        runs: 0,
        converged: 0,
        worst_drop: 0.0,
    };
    for seed in 0..SEEDS {
        let cfg = ChannelConfig::new(k, 4, 0.6, 20.0, seed);
        let block = generate_block(&cfg, 0).unwrap();
        let samples = draw_saa_samples(&block, &cfg, 50).unwrap();
        for &st in strategies {
            let best = best_over_orders(st, &LayoutParams::default(), &samples, &ao, cfg.transmit_power(), Exec::default()).unwrap();
            for run in &best.runs {
                let d = run.diagnostics.as_ref().expect("run succeeded");
                out.runs += 1;
                out.converged += usize::from(d.converged && d.iterations <= 100);
                let mut prev = d.init_wsr;
                for &h in &d.wsr_history {
                    out.worst_drop = out.worst_drop.max(prev - h);
                    prev = h;
                }
            }
            out.wsr.push((st, seed, best.result.report.wsr));
        }
    }
    out
}

fn two_user_sweep() -> &'static AoSweep {
    static CELL: OnceLock<AoSweep> = OnceLock::new();
    CELL.get_or_init(|| ao_sweep(2, &Strategy::ALL))
}

fn ao_monotonicity() -> (bool, String) {
    let t = Instant::now();
    let s = two_user_sweep();
    let eps = AoConfig::default().epsilon;
    let frac = s.converged as f64 / s.runs as f64;
    let secs = t.elapsed().as_secs_f64();
    (
        s.worst_drop <= 10.0 * eps && frac >= 0.95 && secs < 900.0,
        format!(
            "largest WSR drop {:.2e} (limit {:.0e}), {}/{} runs converged in <= 100 iterations",
            s.worst_drop,
            10.0 * eps,
            s.converged,
            s.runs
        ),
    )
}

fn nesting_margin(sweep: &AoSweep, big: Strategy, small: Strategy) -> f64 {
    (0..SEEDS)
        .map(|seed| {
            let get = |st| sweep.wsr.iter().find(|(s, sd, _)| *s == st && *sd == seed).unwrap().2;
            get(big) - get(small)
        })
        .fold(f64::INFINITY, f64::min)
}

fn strategy_nesting() -> (bool, String) {
    let two = two_user_sweep();
    let three = ao_sweep(3, &[Strategy::OneDpcRs, Strategy::MDpcRs]);
    let m1 = nesting_margin(two, Strategy::OneLayerRs, Strategy::MuLp);
    let m2 = nesting_margin(two, Strategy::OneDpcRs, Strategy::Dpc);
    let m3 = nesting_margin(&three, Strategy::MDpcRs, Strategy::OneDpcRs);
    (
        m1.min(m2).min(m3) >= -1e-3,
        format!("worst margins: RS-MU-LP {m1:.2e}, 1-DPCRS-DPC {m2:.2e}, M-DPCRS-1-DPCRS (K=3) {m3:.2e}"),
    )
}

fn dof_records() -> &'static Vec<ResultRecord> {
    static CELL: OnceLock<Vec<ResultRecord>> = OnceLock::new();
    CELL.get_or_init(|| {
        let spec: ExperimentSpec = serde_json::from_value(serde_json::json!({
            "name": "dof",
            "seed": 2024,
            "blocks": 20,
            "samples": 200,
            "channel": {"num_users": 2, "num_tx_antennas": 4, "snr_db": [20.0, 25.0, 30.0, 35.0, 40.0], "alpha": [0.3, 0.6, 0.9]},
            "strategies": ["MU-LP", "DPC", "1-layer-RS", "1-DPCRS"],
        }))
        .unwrap();
        run_esr_curve(&spec, RunOptions::default()).unwrap()
    })
}

fn dof_slopes() -> (bool, String) {
    let fits = estimate_dof(dof_records(), None).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for f in &fits {
        let target = f.target.unwrap();
        let ok = (f.slope - target).abs() <= 0.15;
        pass &= ok;
        parts.push(format!(
            "{}@{}: {:.3}/{:.1}{}",
            f.strategy,
            f.alpha,
            f.slope,
            target,
            if ok { "" } else { "!" }
        ));
    }
    (pass, parts.join(", "))
}

fn rs_gain_over_dpc() -> (bool, String) {
    let recs = dof_records();
    let esr = |st| {
        recs.iter()
            .find(|r| r.strategy == st && r.alpha == 0.3 && r.snr_db == 30.0)
            .unwrap()
            .esr
    };
    let ratio = esr(Strategy::OneLayerRs) / esr(Strategy::Dpc);
    (ratio >= 1.08, format!("ESR(1-layer-RS)/ESR(DPC) = {ratio:.4} at alpha 0.3, 30 dB"))
}

fn multicast_spec(threshold: f64) -> ExperimentSpec {
    serde_json::from_value(serde_json::json!({
        "name": "multicast",
        "kind": "multicast",
        "seed": 8,
        "blocks": 10,
        "samples": 100,
        "channel": {"num_users": 2, "num_tx_antennas": 4, "snr_db": [20.0], "alpha": [0.6]},
        "strategies": ["1-DPCRS", "1-layer-RS", "DPC", "MU-LP"],
        "multicast": {"enabled": true, "threshold": threshold},
        "output": {"per_block": true},
    }))
    .unwrap()
}

fn multicast_floor() -> (bool, String) {
    let with = run_esr_curve(&multicast_spec(0.5), RunOptions::default()).unwrap();
    let without = run_esr_curve(&multicast_spec(0.0), RunOptions::default()).unwrap();
    let eps = AoConfig::default().epsilon;
    let mut min_rate = f64::INFINITY;
    let mut worst_gain = f64::NEG_INFINITY;
    let mut skipped = 0;
    for (a, b) in with.iter().zip(&without).filter(|(a, _)| !a.is_aggregate()) {
        assert_eq!((a.strategy, a.block), (b.strategy, b.block));
        if a.skipped > 0 {
            skipped += 1;
            continue;
        }
        min_rate = min_rate.min(a.multicast_rate);
        worst_gain = worst_gain.max(a.esr - b.esr);
    }
    (
        min_rate >= 0.5 - 1e-4 && worst_gain <= 10.0 * eps,
        format!(
            "min multicast rate {min_rate:.5}, max WESR(0.5) - WESR(0) {worst_gain:.2e} (limit {:.0e}), {skipped} skipped blocks",
            10.0 * eps
        ),
    )
}

fn region_nesting() -> (bool, String) {
    let spec: ExperimentSpec = serde_json::from_value(serde_json::json!({
        "name": "region",
        "kind": "rate-region",
        "seed": 5,
        "blocks": 10,
        "samples": 100,
        "channel": {"num_users": 2, "num_tx_antennas": 4, "snr_db": [20.0], "alpha": [0.6]},
        "strategies": ["1-DPCRS", "DPC", "1-layer-RS"],
        "region_u2": rsma_opt::experiments::spec::coarse_weight_grid(),
    }))
    .unwrap();
    let out = run_rate_region(&spec, RunOptions::default()).unwrap();
    let hull = |st| &out.hulls.iter().find(|h| h.strategy == st).unwrap().hull;
    let dpcrs = hull(Strategy::OneDpcRs);
    let d = max_excursion(dpcrs, hull(Strategy::Dpc));
    let r = max_excursion(dpcrs, hull(Strategy::OneLayerRs));
    (
        d <= 1e-2 && r <= 1e-2,
        format!("largest excursion outside the DPCRS hull: DPC {d:.2e}, RS {r:.2e}"),
    )
}

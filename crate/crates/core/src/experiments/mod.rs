//! Multi-block studies: ergodic sum rate curves, multicast runs, rate regions
//! and DoF fits.
//!
//! Every `(strategy, snr, alpha, weights, block)` tuple is an independent
//! task. Channel blocks depend only on `(seed, snr, alpha, block)`, so all
//! strategies and weights see the same realizations. Results are reduced in
//! task order, never in completion order.

pub mod dof;
pub mod output;
pub mod region;
pub mod spec;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::channel::{draw_saa_samples, generate_block};
use crate::exec::Exec;
use crate::optimizer::best_over_orders;
use crate::strategy::{OrderPair, Strategy};
use crate::{Error, Result};
pub use dof::{estimate_dof, DofEstimate};
pub use spec::{ExperimentKind, ExperimentSpec};

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub exec: Exec,
}

/// One CSV row. `block` is `None` for the aggregate over blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub strategy: Strategy,
    pub snr_db: f64,
    pub alpha: f64,
    pub weights: Vec<f64>,
    pub block: Option<u64>,
    /// Weighted sum of the unicast rates (the ESR for unit weights). NaN when
    /// every block was skipped.
    pub esr: f64,
    pub user_rates: Vec<f64>,
    pub multicast_rate: f64,
    pub skipped: usize,
    pub blocks: usize,
    /// AO iterations of the winning run; the maximum over blocks for
    /// aggregates.
    pub iters: usize,
    pub wall_ms: f64,
    pub orders: Option<OrderPair>,
}

impl ResultRecord {
    pub fn is_aggregate(&self) -> bool {
        self.block.is_none()
    }

    /// More than half of the blocks were skipped.
    pub fn mostly_skipped(&self) -> bool {
        2 * self.skipped > self.blocks
    }
}

#[derive(Debug, Clone, Copy)]
struct Task {
    strategy: usize,
    snr: usize,
    alpha: usize,
    weights: usize,
    block: u64,
}

fn skippable(e: &Error) -> bool {
    matches!(e, Error::QosInfeasible | Error::SolverFailure(_) | Error::AllocOverflow { .. })
}

fn run_block(spec: &ExperimentSpec, weights: &[Vec<f64>], t: Task, timing: bool) -> Result<ResultRecord> {
    let start = Instant::now();
    let strategy = spec.strategies[t.strategy];
    let snr_db = spec.channel.snr_db[t.snr];
    let alpha = spec.channel.alpha[t.alpha];
    let w = &weights[t.weights];
    let cfg = spec.channel_config(snr_db, alpha);
    let block = generate_block(&cfg, t.block)?;
    let samples = draw_saa_samples(&block, &cfg, spec.samples)?;
    let ao = spec.ao_for(alpha, w);
    let base = spec.layout_params()?;
    let outcome = best_over_orders(strategy, &base, &samples, &ao, cfg.transmit_power(), Exec::Sequential);
    let wall_ms = if timing { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
    let k = spec.num_users();
    let mut rec = ResultRecord {
        strategy,
        snr_db,
        alpha,
        weights: w.clone(),
        block: Some(t.block),
        esr: f64::NAN,
        user_rates: vec![f64::NAN; k],
        multicast_rate: f64::NAN,
        skipped: 1,
        blocks: 1,
        iters: 0,
        wall_ms,
        orders: None,
    };
    match outcome {
        Ok(best) => {
            let r = &best.result.report;
            rec.esr = r.wsr;
            rec.user_rates = r.user_total.clone();
            rec.multicast_rate = r.multicast_rate;
            rec.skipped = 0;
            rec.iters = best.result.diagnostics.iterations;
            rec.orders = Some(best.orders);
        }
        Err(e) if skippable(&e) => {
            log::warn!("{strategy} snr={snr_db} alpha={alpha} block={}: skipped ({e})", t.block);
        }
        Err(e) => return Err(e),
    }
    Ok(rec)
}

fn aggregate(blocks: &[ResultRecord]) -> ResultRecord {
    let first = &blocks[0];
    let ok: Vec<&ResultRecord> = blocks.iter().filter(|r| r.skipped == 0).collect();
    let n = ok.len() as f64;
    let mean = |f: &dyn Fn(&ResultRecord) -> f64| {
        if ok.is_empty() {
            f64::NAN
        } else {
            ok.iter().map(|r| f(r)).sum::<f64>() / n
        }
    };
    ResultRecord {
        strategy: first.strategy,
        snr_db: first.snr_db,
        alpha: first.alpha,
        weights: first.weights.clone(),
        block: None,
        esr: mean(&|r| r.esr),
        user_rates: (0..first.user_rates.len()).map(|u| mean(&|r| r.user_rates[u])).collect(),
        multicast_rate: mean(&|r| r.multicast_rate),
        skipped: blocks.len() - ok.len(),
        blocks: blocks.len(),
        iters: blocks.iter().map(|r| r.iters).max().unwrap_or(0),
        wall_ms: blocks.iter().map(|r| r.wall_ms).sum(),
        orders: None,
    }
}

/// Raw sweep: one row per block followed by the aggregate, grouped by
/// `(strategy, snr, alpha, weights)` in spec order.
fn sweep(spec: &ExperimentSpec, opts: RunOptions) -> Result<Vec<ResultRecord>> {
    spec.validate()?;
    let weights = spec.weight_vectors();
    let mut tasks = Vec::new();
    for strategy in 0..spec.strategies.len() {
        for snr in 0..spec.channel.snr_db.len() {
            for alpha in 0..spec.channel.alpha.len() {
                for w in 0..weights.len() {
                    for block in 0..spec.blocks as u64 {
                        tasks.push(Task {
                            strategy,
                            snr,
                            alpha,
                            weights: w,
                            block,
                        });
                    }
                }
            }
        }
    }
    let timing = spec.output.timing;
    let rows = opts.exec.map(tasks, |t| run_block(spec, &weights, t, timing));
    let rows: Vec<ResultRecord> = rows.into_iter().collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(rows.len() + rows.len() / spec.blocks);
    for group in rows.chunks(spec.blocks) {
        out.extend(group.iter().cloned());
        out.push(aggregate(group));
    }
    Ok(out)
}

fn keep(records: Vec<ResultRecord>, per_block: bool) -> Vec<ResultRecord> {
    records.into_iter().filter(|r| per_block || r.is_aggregate()).collect()
}

/// Ergodic (weighted) sum rate for every `(strategy, snr, alpha, weights)`.
/// Per-block rows are included when `output.per_block` is set.
pub fn run_esr_curve(spec: &ExperimentSpec, opts: RunOptions) -> Result<Vec<ResultRecord>> {
    Ok(keep(sweep(spec, opts)?, spec.output.per_block))
}

/// Same sweep with the multicast message and its rate floor.
pub fn run_multicast_study(spec: &ExperimentSpec, opts: RunOptions) -> Result<Vec<ResultRecord>> {
    if !spec.multicast.enabled {
        return Err(Error::InvalidConfig("multicast study needs multicast.enabled = true".into()));
    }
    run_esr_curve(spec, opts)
}

/// Hull of one strategy at one `(snr, alpha)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionHull {
    pub strategy: Strategy,
    pub snr_db: f64,
    pub alpha: f64,
    /// `(ER_1, ER_2)` per weight pair.
    pub points: Vec<(f64, f64)>,
    /// Counter-clockwise hull including axis projections and the origin.
    pub hull: Vec<(f64, f64)>,
    /// Non-dominated hull vertices from the user-2 axis to the user-1 axis.
    pub boundary: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionOutput {
    pub records: Vec<ResultRecord>,
    pub hulls: Vec<RegionHull>,
}

/// Two-user rate regions by sweeping the weight of user 2.
pub fn run_rate_region(spec: &ExperimentSpec, opts: RunOptions) -> Result<RegionOutput> {
    if spec.num_users() != 2 {
        return Err(Error::InvalidConfig("rate regions need exactly 2 users".into()));
    }
    let mut spec = spec.clone();
    spec.kind = ExperimentKind::RateRegion;
    let records = sweep(&spec, opts)?;
    let mut hulls: Vec<RegionHull> = Vec::new();
    for r in records.iter().filter(|r| r.is_aggregate()) {
        let pos = hulls
            .iter()
            .position(|h| h.strategy == r.strategy && h.snr_db == r.snr_db && h.alpha == r.alpha);
        let h = match pos {
            Some(i) => &mut hulls[i],
            None => {
                hulls.push(RegionHull {
                    strategy: r.strategy,
                    snr_db: r.snr_db,
                    alpha: r.alpha,
                    points: Vec::new(),
                    hull: Vec::new(),
                    boundary: Vec::new(),
                });
                hulls.last_mut().expect("just pushed")
            }
        };
        if r.user_rates.iter().all(|x| x.is_finite()) {
            h.points.push((r.user_rates[0], r.user_rates[1]));
        }
    }
    for h in &mut hulls {
        h.hull = region::region_hull(&h.points);
        h.boundary = region::upper_right_boundary(&h.hull);
    }
    Ok(RegionOutput {
        records: keep(records, spec.output.per_block),
        hulls,
    })
}

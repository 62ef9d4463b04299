//! Per-block weighted average sum rate maximization.
//!
//! Each run starts from [`init::init_precoders`] and alternates closed-form
//! MMSE equalizer/weight updates with the convex subproblem from
//! [`assemble::assemble_subproblem`]. The reported WSR is always computed from
//! the true sample-average rates at the current precoders.

pub mod assemble;
pub mod init;
pub mod state;

use serde::{Deserialize, Serialize};

use crate::channel::SaaSampleSet;
use crate::exec::Exec;
use crate::qcqp::{self, KktResiduals, SolveStatus, SolverSettings};
use crate::rates::{average_event_rates, decode_events, report_from_event_rates, DecodeEvent, PrecoderSet, RateReport};
use crate::strategy::{enumerate_orders, make_layout, sic_order_by_strength, LayoutParams, OrderPair, Strategy, StreamLayout};
use crate::{Error, Result};
pub use assemble::assemble_subproblem;
pub use init::{init_precoders, init_schedule, InitStart};
pub use state::{update_g, update_w, AoState};

/// Largest constraint violation accepted from a subproblem that did not
/// certify optimality.
const USABLE_VIOLATION: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AoConfig {
    /// WSR change (bit/s/Hz) below which a run stops.
    pub epsilon: f64,
    pub max_iters: usize,
    pub num_inits: usize,
    /// Per-user weights; empty means all ones.
    pub weights: Vec<f64>,
    /// Per-user QoS rate floors; empty means none.
    pub qos: Vec<f64>,
    /// Multicast rate floor; `None` disables the multicast message.
    pub multicast_threshold: Option<f64>,
    /// CSIT exponent used by the initial power split.
    pub csit_alpha: Option<f64>,
    /// Try an over-relaxed step `P + beta (P - P_prev)` after each
    /// subproblem and keep it when it raises the WSR without breaking a
    /// floor.
    pub extrapolate: bool,
    pub solver: SolverSettings,
}

impl Default for AoConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-4,
            max_iters: 100,
            num_inits: 3,
            weights: Vec::new(),
            qos: Vec::new(),
            multicast_threshold: None,
            csit_alpha: None,
            extrapolate: true,
            solver: SolverSettings::default(),
        }
    }
}

impl AoConfig {
    pub fn new(weights: Vec<f64>) -> Self {
        Self {
            weights,
            ..Default::default()
        }
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig("epsilon must be positive".into()));
        }
        if self.max_iters == 0 || self.num_inits == 0 {
            return Err(Error::InvalidConfig("max_iters and num_inits must be at least 1".into()));
        }
        if !self.weights.is_empty() && self.weights.len() != k {
            return Err(Error::InvalidConfig(format!("{} weights for {k} users", self.weights.len())));
        }
        if self.weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidConfig("weights must be positive".into()));
        }
        if !self.qos.is_empty() && self.qos.len() != k {
            return Err(Error::InvalidConfig(format!("{} QoS thresholds for {k} users", self.qos.len())));
        }
        Ok(())
    }

    pub fn weights_for(&self, k: usize) -> Vec<f64> {
        if self.weights.is_empty() {
            vec![1.0; k]
        } else {
            self.weights.clone()
        }
    }

    fn resolved(&self, k: usize) -> AoConfig {
        AoConfig {
            weights: self.weights_for(k),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AoDiagnostics {
    pub init: String,
    pub orders: OrderPair,
    pub iterations: usize,
    pub converged: bool,
    pub init_wsr: f64,
    pub wsr_history: Vec<f64>,
    /// Subproblem objective per iteration.
    pub objective_history: Vec<f64>,
    pub statuses: Vec<SolveStatus>,
    pub final_kkt: KktResiduals,
}

#[derive(Debug, Clone)]
pub struct AoResult {
    pub precoders: PrecoderSet,
    pub report: RateReport,
    pub diagnostics: AoDiagnostics,
}

/// Highest-weight decoder takes each allocated stream's rate, after the
/// multicast floor is reserved.
fn greedy_allocation(layout: &StreamLayout, stream_rate: &[f64], weights: &[f64], p: &mut PrecoderSet) {
    p.alloc.iter_mut().for_each(|c| *c = 0.0);
    p.multicast_alloc = 0.0;
    for s in 0..layout.num_streams() {
        if !layout.is_allocated(s) {
            continue;
        }
        let mut cap = stream_rate[s].max(0.0);
        if Some(s) == layout.multicast_stream {
            p.multicast_alloc = layout.multicast_threshold.min(cap);
            cap -= p.multicast_alloc;
        }
        let slots = layout.slots_of_stream(s);
        if let Some(&best) = slots
            .iter()
            .max_by(|&&a, &&b| weights[layout.alloc_slots[a].user].total_cmp(&weights[layout.alloc_slots[b].user]).then(b.cmp(&a)))
        {
            p.alloc[best] = cap;
        }
    }
}

/// Caps allocations at the true common rates (solver round-off) and hands
/// any unallocated common rate to the highest-weight decoder.
fn repair_allocation(layout: &StreamLayout, stream_rate: &[f64], weights: &[f64], p: &mut PrecoderSet) {
    for s in 0..layout.num_streams() {
        if !layout.is_allocated(s) {
            continue;
        }
        let mut cap = stream_rate[s].max(0.0);
        if Some(s) == layout.multicast_stream {
            p.multicast_alloc = p.multicast_alloc.min(cap);
            cap -= p.multicast_alloc;
        }
        let slots = layout.slots_of_stream(s);
        let used: f64 = slots.iter().map(|&a| p.alloc[a]).sum();
        if used > cap {
            let f = if used > 0.0 { cap / used } else { 0.0 };
            for &a in &slots {
                p.alloc[a] *= f;
            }
        } else if let Some(&best) = slots
            .iter()
            .max_by(|&&a, &&b| weights[layout.alloc_slots[a].user].total_cmp(&weights[layout.alloc_slots[b].user]).then(b.cmp(&a)))
        {
            p.alloc[best] += cap - used;
        }
    }
}

fn stream_rates(layout: &StreamLayout, events: &[DecodeEvent], rates: &[f64]) -> Vec<f64> {
    let mut out = vec![f64::INFINITY; layout.num_streams()];
    for (ev, &r) in events.iter().zip(rates) {
        out[ev.stream] = out[ev.stream].min(r);
    }
    out.iter().map(|r| if r.is_finite() { *r } else { 0.0 }).collect()
}

fn evaluate(
    layout: &StreamLayout,
    events: &[DecodeEvent],
    samples: &SaaSampleSet,
    weights: &[f64],
    p: &mut PrecoderSet,
    fresh_allocation: bool,
) -> Result<RateReport> {
    let rates = average_event_rates(events, p, samples);
    let sr = stream_rates(layout, events, &rates);
    if fresh_allocation {
        greedy_allocation(layout, &sr, weights, p);
    } else {
        repair_allocation(layout, &sr, weights, p);
    }
    report_from_event_rates(layout, p, events, &rates, weights)
}

const BETA_GROWTH: f64 = 1.5;
const BETA_MIN: f64 = 0.5;
const BETA_MAX: f64 = 8.0;

/// Over-relaxed point `cur + beta (cur - prev)`, returned only when it beats
/// `cur` and keeps every floor that `cur` meets.
#[allow(clippy::too_many_arguments)]
fn extrapolated(
    layout: &StreamLayout,
    events: &[DecodeEvent],
    samples: &SaaSampleSet,
    ao: &AoConfig,
    cur: &PrecoderSet,
    cur_report: &RateReport,
    prev: &[crate::linalg::CVector],
    beta: f64,
    p_t: f64,
) -> Option<(PrecoderSet, RateReport)> {
    let b = crate::linalg::C64::new(beta, 0.0);
    let mut p = cur.clone();
    for (v, o) in p.vectors.iter_mut().zip(prev) {
        *v = &*v + (&*v - o) * b;
    }
    let power = p.total_power();
    if power > p_t {
        p.scale_power(p_t / power);
    }
    let r = evaluate(layout, events, samples, &ao.weights, &mut p, false).ok()?;
    let floors_kept = layout
        .qos
        .iter()
        .zip(r.user_total.iter().zip(&cur_report.user_total))
        .all(|(q, (new, old))| *new >= q.min(*old))
        && p.multicast_alloc >= layout.multicast_threshold.min(cur.multicast_alloc);
    (floors_kept && r.wsr > cur_report.wsr).then_some((p, r))
}

fn without_floors(layout: &StreamLayout) -> StreamLayout {
    StreamLayout {
        qos: vec![0.0; layout.num_users],
        multicast_threshold: 0.0,
        ..layout.clone()
    }
}

/// One alternating-optimization run from a given start.
pub fn ao_run(
    layout: &StreamLayout,
    samples: &SaaSampleSet,
    ao: &AoConfig,
    p_t: f64,
    start: &InitStart,
) -> Result<AoResult> {
    let k = layout.num_users;
    let ao = ao.resolved(k);
    ao.validate(k)?;
    if samples.estimate.ncols() != k {
        return Err(Error::Dimension(format!(
            "samples have {} users, layout has {k}",
            samples.estimate.ncols()
        )));
    }
    let weights = ao.weights.clone();
    let events = decode_events(layout);

    let mut p0 = init_precoders(layout, &samples.estimate, p_t, start);
    let init_report = evaluate(layout, &events, samples, &weights, &mut p0, true)?;
    let mut diag = AoDiagnostics {
        init: start.label(),
        orders: OrderPair {
            dpc_order: layout.dpc_order.clone(),
            common_order: None,
        },
        iterations: 0,
        converged: false,
        init_wsr: init_report.wsr,
        wsr_history: Vec::new(),
        objective_history: Vec::new(),
        statuses: Vec::new(),
        final_kkt: KktResiduals::default(),
    };
    let mut state = AoState::new(layout, p0);
    let mut best: Option<(PrecoderSet, RateReport)> = None;
    let mut prev = init_report.wsr;
    let mut beta = 1.0;

    for n in 1..=ao.max_iters {
        state.iteration = n;
        state.update_g(samples);
        state.update_w(samples);
        state.refresh_constants(samples);
        let prob = assemble_subproblem(&state, layout, &ao, p_t);
        let prev_vectors = state.precoders.vectors.clone();
        let sol = qcqp::solve(&prob);
        diag.statuses.push(sol.status);
        diag.final_kkt = sol.kkt_residuals;

        let usable = match sol.status {
            SolveStatus::Optimal => true,
            SolveStatus::MaxIter => sol.kkt_residuals.primal <= USABLE_VIOLATION,
            SolveStatus::Infeasible => false,
        };
        if !usable {
            if n == 1 {
                if sol.status == SolveStatus::Infeasible {
                    let probe = qcqp::solve(&assemble_subproblem(&state, &without_floors(layout), &ao, p_t));
                    return Err(if probe.status == SolveStatus::Optimal {
                        Error::QosInfeasible
                    } else {
                        Error::SolverFailure(format!("feasibility probe ended {:?}", probe.status))
                    });
                }
                return Err(Error::SolverFailure(format!(
                    "first subproblem ended {:?} with residuals {:?}",
                    sol.status, sol.kkt_residuals
                )));
            }
            log::debug!("stopping at iteration {n}: subproblem {:?}", sol.status);
            break;
        }

        let mut vectors = sol.precoders;
        let power: f64 = vectors.iter().map(crate::linalg::norm_sqr).sum();
        if power > p_t {
            let f = crate::linalg::C64::new((p_t / power).sqrt(), 0.0);
            vectors.iter_mut().for_each(|v| *v *= f);
        }
        let mut x = sol.allocations;
        let x0 = if layout.has_multicast() {
            x.pop().expect("multicast variable")
        } else {
            0.0
        };
        state.set_point(vectors, x, x0);
        let mut report = evaluate(layout, &events, samples, &weights, &mut state.precoders, false)?;
        if ao.extrapolate {
            match extrapolated(layout, &events, samples, &ao, &state.precoders, &report, &prev_vectors, beta, p_t) {
                Some((p, r)) => {
                    state.precoders = p;
                    report = r;
                    beta = (beta * BETA_GROWTH).min(BETA_MAX);
                }
                None => beta = (beta / 2.0).max(BETA_MIN),
            }
        }
        state.x = state.precoders.alloc.iter().map(|c| -c).collect();
        state.x0 = -state.precoders.multicast_alloc;

        let wsr = report.wsr;
        diag.iterations = n;
        diag.objective_history.push(sol.objective_value);
        state.wsr_history.push(wsr);
        if best.as_ref().is_none_or(|(_, r)| wsr > r.wsr) {
            best = Some((state.precoders.clone(), report));
        }
        if (wsr - prev).abs() <= ao.epsilon {
            diag.converged = true;
            break;
        }
        prev = wsr;
    }

    diag.wsr_history = state.wsr_history;
    let (precoders, report) = best.ok_or_else(|| Error::SolverFailure("no usable iterate".into()))?;
    Ok(AoResult {
        precoders,
        report,
        diagnostics: diag,
    })
}

/// Keeps the highest-WSR success; earlier entries win ties.
fn pick_best(results: Vec<Result<AoResult>>) -> Result<AoResult> {
    let mut best: Option<AoResult> = None;
    let mut first_err: Option<Error> = None;
    let mut all_qos = true;
    for r in results {
        match r {
            Ok(res) => {
                if best.as_ref().is_none_or(|b| res.report.wsr > b.report.wsr) {
                    best = Some(res);
                }
            }
            Err(e) => {
                all_qos &= matches!(e, Error::QosInfeasible);
                first_err.get_or_insert(e);
            }
        }
    }
    match (best, first_err) {
        (Some(b), _) => Ok(b),
        (None, Some(_)) if all_qos => Err(Error::QosInfeasible),
        (None, Some(e)) => Err(e),
        (None, None) => Err(Error::SolverFailure("no runs".into())),
    }
}

/// Best of the multi-start runs for one layout.
pub fn ao_optimize(layout: &StreamLayout, samples: &SaaSampleSet, ao: &AoConfig, p_t: f64) -> Result<AoResult> {
    let starts = init_schedule(layout, p_t, ao.csit_alpha, ao.num_inits);
    pick_best(starts.iter().map(|s| ao_run(layout, samples, ao, p_t, s)).collect())
}

/// Outcome of one `(orders, init)` run inside [`best_over_orders`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub orders: OrderPair,
    pub init: String,
    pub wsr: Option<f64>,
    pub error: Option<String>,
    pub diagnostics: Option<AoDiagnostics>,
}

#[derive(Debug, Clone)]
pub struct BestResult {
    pub result: AoResult,
    pub orders: OrderPair,
    pub layout: StreamLayout,
    pub runs: Vec<RunRecord>,
}

/// Layout parameters for `strategy`, filled from the AO config and the
/// channel estimate where `base` leaves them open.
pub fn resolve_params(strategy: Strategy, base: &LayoutParams, ao: &AoConfig, samples: &SaaSampleSet) -> LayoutParams {
    let mut p = base.clone();
    if p.qos.is_empty() {
        p.qos = ao.qos.clone();
    }
    if p.multicast.is_none() {
        p.multicast = ao.multicast_threshold;
    }
    if strategy.uses_sic_order() && p.sic_order.is_none() {
        p.sic_order = Some(sic_order_by_strength(&samples.estimate));
    }
    p
}

/// Runs every encoding/decoding order (unless fixed in `base`) and every
/// start, returning the best.
pub fn best_over_orders(
    strategy: Strategy,
    base: &LayoutParams,
    samples: &SaaSampleSet,
    ao: &AoConfig,
    p_t: f64,
    exec: Exec,
) -> Result<BestResult> {
    let k = samples.estimate.ncols();
    let params = resolve_params(strategy, base, ao, samples);
    let mut orders = enumerate_orders(strategy, k)?;
    if params.dpc_order.is_some() || params.common_order.is_some() {
        orders.retain(|o| {
            (params.dpc_order.is_none() || o.dpc_order == params.dpc_order)
                && (params.common_order.is_none() || o.common_order == params.common_order)
        });
        if orders.is_empty() {
            orders.push(OrderPair {
                dpc_order: params.dpc_order.clone(),
                common_order: params.common_order.clone(),
            });
        }
    }
    let mut layouts = Vec::with_capacity(orders.len());
    for o in &orders {
        let lp = LayoutParams {
            dpc_order: o.dpc_order.clone().or_else(|| params.dpc_order.clone()),
            common_order: o.common_order.clone().or_else(|| params.common_order.clone()),
            ..params.clone()
        };
        layouts.push(make_layout(strategy, k, &lp)?);
    }
    let mut tasks = Vec::new();
    for (li, layout) in layouts.iter().enumerate() {
        for s in init_schedule(layout, p_t, ao.csit_alpha, ao.num_inits) {
            tasks.push((li, s));
        }
    }
    let outcomes = exec.map(tasks.clone(), |(li, s)| {
        ao_run(&layouts[li], samples, ao, p_t, &s).map(|mut r| {
            r.diagnostics.orders = orders[li].clone();
            r
        })
    });

    let runs: Vec<RunRecord> = tasks
        .iter()
        .zip(&outcomes)
        .map(|((li, s), o)| RunRecord {
            orders: orders[*li].clone(),
            init: s.label(),
            wsr: o.as_ref().ok().map(|r| r.report.wsr),
            error: o.as_ref().err().map(|e| e.to_string()),
            diagnostics: o.as_ref().ok().map(|r| r.diagnostics.clone()),
        })
        .collect();
    let indexed: Vec<Result<(usize, AoResult)>> = tasks
        .iter()
        .zip(outcomes)
        .map(|((li, _), o)| o.map(|r| (*li, r)))
        .collect();
    let mut best: Option<(usize, AoResult)> = None;
    let mut errs = Vec::new();
    for r in indexed {
        match r {
            Ok((li, res)) => {
                if best.as_ref().is_none_or(|(_, b)| res.report.wsr > b.report.wsr) {
                    best = Some((li, res));
                }
            }
            Err(e) => errs.push(Err(e)),
        }
    }
    match best {
        Some((li, result)) => Ok(BestResult {
            result,
            orders: orders[li].clone(),
            layout: layouts[li].clone(),
            runs,
        }),
        None => pick_best(errs).map(|_| unreachable!("no successful run")),
    }
}

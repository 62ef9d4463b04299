//! Builds the convex subproblem from the averaged constants.

use super::state::AoState;
use super::AoConfig;
use crate::linalg::C64;
use crate::qcqp::{Constraint, Expr, QcqpProblem};
use crate::strategy::{ChannelKind, StreamLayout};

/// `1 / ln 2`: the MSE part of the surrogate is measured in bits so that
/// `w = 1 / mse` minimizes `KAPPA * w * mse - log2 w` and the surrogate at the
/// MMSE point equals `KAPPA - rate`.
pub const KAPPA: f64 = std::f64::consts::LOG2_E;

/// Averaged surrogate `KAPPA * (Omega + t - 2 Re(f^H p_i) + w) - nu` of event
/// `e` as a function of the precoders.
pub fn xi_expr(state: &AoState, e: usize) -> Expr {
    let ev = &state.events[e];
    let c = &state.constants[e];
    let k = C64::new(KAPPA, 0.0);
    let psi = &c.psi * k;
    let phi = c.phi.as_ref().map(|m| m * k);
    let mut quad = vec![(ev.stream, psi.clone())];
    for t in &ev.interference {
        let m = match t.channel {
            ChannelKind::Actual => &psi,
            ChannelKind::Error => phi.as_ref().expect("error-channel constants present"),
        };
        quad.push((t.stream, m.clone()));
    }
    Expr {
        quad,
        lin: vec![(ev.stream, &c.f * C64::new(-2.0 * KAPPA, 0.0))],
        alloc: Vec::new(),
        constant: KAPPA * (c.t + c.w) - c.nu,
    }
}

fn event_index(state: &AoState, user: usize, stream: usize) -> usize {
    state
        .events
        .iter()
        .position(|ev| ev.user == user && ev.stream == stream)
        .expect("decoding event exists")
}

fn merge(mut a: Expr, b: Expr) -> Expr {
    a.quad.extend(b.quad);
    a.lin.extend(b.lin);
    a.alloc.extend(b.alloc);
    a.constant += b.constant;
    a
}

/// Allocation variables are the layout slots followed, for multicast
/// layouts, by `-C0`.
pub fn assemble_subproblem(state: &AoState, layout: &StreamLayout, ao: &AoConfig, p_t: f64) -> QcqpProblem {
    let nt = state.precoders.num_tx_antennas();
    let n_slots = layout.num_allocs();
    let mc_var = layout.has_multicast().then_some(n_slots);
    let n_alloc = n_slots + usize::from(mc_var.is_some());
    let mut prob = QcqpProblem::new(layout.num_streams(), nt, n_alloc, p_t);
    prob.settings = ao.solver;
    if let Some(v) = mc_var {
        prob.alloc_upper[v] = -layout.multicast_threshold;
    }

    let mut objective = Expr::default();
    for u in 0..layout.num_users {
        let wu = ao.weights[u];
        let mut user = Expr {
            alloc: layout.slots_of_user(u).into_iter().map(|a| (a, 1.0)).collect(),
            ..Default::default()
        };
        let direct = layout.direct_stream(u);
        if let Some(s) = direct {
            user = merge(user, xi_expr(state, event_index(state, u, s)));
        }
        let qos = layout.qos[u];
        if qos > 0.0 {
            prob.constraints.push(Constraint {
                expr: user.clone(),
                rhs: if direct.is_some() { KAPPA } else { 0.0 } - qos,
                label: format!("qos u{}", u + 1),
            });
        }
        objective = merge(objective, user.scaled(wu));
    }
    prob.objective = objective;

    for s in 0..layout.num_streams() {
        if !layout.is_allocated(s) {
            continue;
        }
        let mut budget: Vec<(usize, f64)> = layout.slots_of_stream(s).into_iter().map(|a| (a, -1.0)).collect();
        if Some(s) == layout.multicast_stream {
            budget.push((mc_var.expect("multicast variable"), -1.0));
        }
        for u in layout.decoders(s) {
            let mut expr = xi_expr(state, event_index(state, u, s));
            expr.alloc = budget.clone();
            prob.constraints.push(Constraint {
                expr,
                rhs: KAPPA,
                label: format!("rate {} u{}", layout.streams[s].label(), u + 1),
            });
        }
    }
    prob
}

//! Starting points: MRT on the estimate for private streams, the dominant
//! left singular vector of the audience's estimated channels for common
//! streams.

use crate::linalg::{dominant_left_singular, norm_sqr, CMatrix, CVector, C64};
use crate::rates::PrecoderSet;
use crate::strategy::StreamLayout;

const FRACTIONS: [f64; 4] = [0.0, 0.25, 0.5, 0.75];

/// How the power is split at the start of one AO run.
#[derive(Debug, Clone, PartialEq)]
pub struct InitStart {
    /// Share of `P_t` given to common and multicast streams.
    pub common_fraction: f64,
    /// Whether two-user common streams get power (half of the common share).
    pub partial_commons: bool,
    /// All private power on this user's stream; the other private streams
    /// start (and stay) switched off.
    pub focus: Option<usize>,
}

impl InitStart {
    pub fn label(&self) -> String {
        if let Some(u) = self.focus {
            return format!("focus=u{}", u + 1);
        }
        format!(
            "common={:.3}{}",
            self.common_fraction,
            if self.partial_commons { ",partials" } else { "" }
        )
    }
}

/// `1 - P_t^-(1 - alpha)` clipped to `[0.1, 0.9]`.
pub fn heuristic_fraction(p_t: f64, alpha: Option<f64>) -> f64 {
    let f = match alpha {
        Some(a) if a.is_finite() => 1.0 - p_t.powf(-(1.0 - a)),
        Some(_) => 0.0,
        None => 0.5,
    };
    if f.is_nan() {
        0.5
    } else {
        f.clamp(0.1, 0.9)
    }
}

/// Non-private streams that get power at the start. A multicast stream that
/// carries no unicast part and has no rate floor starts (and stays) off.
fn powered_commons(layout: &StreamLayout) -> Vec<usize> {
    (0..layout.num_streams())
        .filter(|&s| !layout.streams[s].is_private())
        .filter(|&s| {
            Some(s) != layout.multicast_stream
                || !layout.slots_of_stream(s).is_empty()
                || layout.multicast_threshold > 0.0
        })
        .collect()
}

fn has_partials(layout: &StreamLayout) -> bool {
    powered_commons(layout)
        .iter()
        .any(|&s| layout.streams[s].audience.len() < layout.num_users)
}

fn has_commons(layout: &StreamLayout) -> bool {
    !powered_commons(layout).is_empty()
}

/// Distinct starts for `num_inits` initialization indices.
///
/// Index 0 uses the heuristic split, later indices cycle through
/// `{0, 0.25, 0.5, 0.75}`. Layouts with two-user commons get a start with
/// those streams off and one with them on per index. Layouts without any
/// common stream start from an equal split and then from single-user points,
/// one user per index. Single-user points are skipped when the layout has
/// allocation slots (SC-SIC): a switched-off stream that still carries a slot
/// leaves the first subproblem without a strictly feasible point.
pub fn init_schedule(layout: &StreamLayout, p_t: f64, alpha: Option<f64>, num_inits: usize) -> Vec<InitStart> {
    if !has_commons(layout) {
        let starts = if layout.num_allocs() == 0 { layout.num_users + 1 } else { 1 };
        let n = num_inits.max(1).min(starts);
        return (0..n)
            .map(|idx| InitStart {
                common_fraction: 0.0,
                partial_commons: false,
                focus: idx.checked_sub(1),
            })
            .filter(|s| layout.num_users > 1 || s.focus.is_none())
            .collect();
    }
    // a zero-power stream stays at zero, so a positive multicast floor needs power on it
    let floor = if layout.has_multicast() && layout.multicast_threshold > 0.0 {
        0.1
    } else {
        0.0
    };
    let partial_modes: &[bool] = if has_partials(layout) { &[false, true] } else { &[false] };
    let mut out: Vec<InitStart> = Vec::new();
    for idx in 0..num_inits.max(1) {
        let f = if idx == 0 {
            heuristic_fraction(p_t, alpha)
        } else {
            FRACTIONS[(idx - 1) % FRACTIONS.len()]
        }
        .max(floor);
        for &partial in partial_modes {
            let s = InitStart {
                common_fraction: f,
                partial_commons: partial && f > 0.0,
                focus: None,
            };
            if !out.contains(&s) {
                out.push(s);
            }
        }
    }
    out
}

fn unit_or_uniform(v: CVector) -> CVector {
    let n = norm_sqr(&v).sqrt();
    if n > 0.0 {
        v / C64::new(n, 0.0)
    } else {
        let nt = v.len();
        CVector::from_element(nt, C64::new(1.0 / (nt as f64).sqrt(), 0.0))
    }
}

/// Precoders with total power exactly `p_t` and zero allocations.
pub fn init_precoders(layout: &StreamLayout, estimate: &CMatrix, p_t: f64, start: &InitStart) -> PrecoderSet {
    let nt = estimate.nrows();
    let k = layout.num_users;
    let mut p = PrecoderSet::zeros(layout, nt);
    let commons = powered_commons(layout);
    let frac = if commons.is_empty() { 0.0 } else { start.common_fraction.clamp(0.0, 1.0) };

    let mut powers = vec![0.0; layout.num_streams()];
    let full: Vec<usize> = commons
        .iter()
        .copied()
        .filter(|&s| layout.streams[s].audience.len() == k)
        .collect();
    let partial: Vec<usize> = commons.iter().copied().filter(|s| !full.contains(s)).collect();
    let common_budget = frac * p_t;
    if start.partial_commons && !partial.is_empty() && !full.is_empty() {
        for &s in &full {
            powers[s] = 0.5 * common_budget / full.len() as f64;
        }
        for &s in &partial {
            powers[s] = 0.5 * common_budget / partial.len() as f64;
        }
    } else if !full.is_empty() {
        for &s in &full {
            powers[s] = common_budget / full.len() as f64;
        }
    } else if !partial.is_empty() {
        for &s in &partial {
            powers[s] = common_budget / partial.len() as f64;
        }
    }
    for u in 0..k {
        powers[layout.private_of[u]] = match start.focus {
            Some(f) if f == u => (1.0 - frac) * p_t,
            Some(_) => 0.0,
            None => (1.0 - frac) * p_t / k as f64,
        };
    }

    for (s, stream) in layout.streams.iter().enumerate() {
        if powers[s] <= 0.0 {
            continue;
        }
        let dir = if stream.is_private() {
            unit_or_uniform(estimate.column(stream.audience[0]).into_owned())
        } else {
            let cols: Vec<CVector> = stream.audience.iter().map(|&u| estimate.column(u).into_owned()).collect();
            dominant_left_singular(&CMatrix::from_columns(&cols))
        };
        p.vectors[s] = dir * C64::new(powers[s].sqrt(), 0.0);
    }
    p
}

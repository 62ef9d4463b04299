//! Instantaneous and sample-average rates, MSEs and the MMSE quantities.
//!
//! Noise power is 1 and rates are in bit/s/Hz. For a decoding event
//! `(u, i)` with signal `s = h_u^H p_i` and interference-plus-noise `I`:
//!
//! * rate `log2(1 + |s|^2 / I)`
//! * `T = I + |s|^2`, MMSE equalizer `g* = conj(s) / T`, weight `w* = T / I`
//! * `w* mse(g*) - log2 w* = 1 - rate`

use crate::channel::{ChannelSample, SaaSampleSet};
use crate::linalg::{column_inner, norm_sqr, CVector, C64};
use crate::strategy::{ChannelKind, InterferenceTerm, StreamLayout};
use crate::{Error, Result};

/// Allocation overflow tolerance in bit/s/Hz.
pub const ALLOC_TOL: f64 = 1e-6;

/// One precoder per layout stream plus the rate allocations.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderSet {
    pub vectors: Vec<CVector>,
    /// `c` per layout allocation slot.
    pub alloc: Vec<f64>,
    /// Rate assigned to the multicast message.
    pub multicast_alloc: f64,
}

impl PrecoderSet {
    pub fn zeros(layout: &StreamLayout, nt: usize) -> Self {
        Self {
            vectors: vec![CVector::zeros(nt); layout.num_streams()],
            alloc: vec![0.0; layout.num_allocs()],
            multicast_alloc: 0.0,
        }
    }

    pub fn num_tx_antennas(&self) -> usize {
        self.vectors.first().map_or(0, |v| v.len())
    }

    pub fn total_power(&self) -> f64 {
        self.vectors.iter().map(norm_sqr).sum()
    }

    pub fn scale_power(&mut self, factor: f64) {
        let s = C64::new(factor.sqrt(), 0.0);
        for v in &mut self.vectors {
            *v *= s;
        }
    }
}

/// A decoding event with its precomputed interference set.
#[derive(Debug, Clone)]
pub struct DecodeEvent {
    pub user: usize,
    pub stream: usize,
    pub interference: Vec<InterferenceTerm>,
}

/// All decoding events of a layout, user-major in chain order.
pub fn decode_events(layout: &StreamLayout) -> Vec<DecodeEvent> {
    layout
        .decode_events()
        .into_iter()
        .map(|(user, stream)| DecodeEvent {
            user,
            stream,
            interference: layout
                .interference_set(user, stream)
                .expect("event comes from the decode chain"),
        })
        .collect()
}

/// `h_u^H p_j` and `h~_u^H p_j` for every user and stream on one sample.
#[derive(Debug, Clone)]
pub struct Projections {
    actual: Vec<C64>,
    error: Vec<C64>,
    num_streams: usize,
}

impl Projections {
    pub fn new(p: &PrecoderSet, sample: ChannelSample<'_>) -> Self {
        let k = sample.actual.ncols();
        let s = p.vectors.len();
        let mut actual = Vec::with_capacity(k * s);
        let mut error = Vec::with_capacity(k * s);
        for u in 0..k {
            for v in &p.vectors {
                actual.push(column_inner(sample.actual, u, v));
                error.push(column_inner(sample.error, u, v));
            }
        }
        Self {
            actual,
            error,
            num_streams: s,
        }
    }

    #[inline]
    pub fn get(&self, user: usize, stream: usize, kind: ChannelKind) -> C64 {
        let idx = user * self.num_streams + stream;
        match kind {
            ChannelKind::Actual => self.actual[idx],
            ChannelKind::Error => self.error[idx],
        }
    }

    /// `(h_u^H p_i, I)` for a decoding event.
    #[inline]
    pub fn signal_and_interference(&self, ev: &DecodeEvent) -> (C64, f64) {
        let s = self.get(ev.user, ev.stream, ChannelKind::Actual);
        let i = 1.0
            + ev
                .interference
                .iter()
                .map(|t| self.get(ev.user, t.stream, t.channel).norm_sqr())
                .sum::<f64>();
        (s, i)
    }
}

fn event(layout: &StreamLayout, user: usize, stream: usize) -> Result<DecodeEvent> {
    Ok(DecodeEvent {
        user,
        stream,
        interference: layout.interference_set(user, stream)?,
    })
}

fn signal_and_interference(
    layout: &StreamLayout,
    p: &PrecoderSet,
    sample: ChannelSample<'_>,
    user: usize,
    stream: usize,
) -> Result<(C64, f64)> {
    let ev = event(layout, user, stream)?;
    Ok(Projections::new(p, sample).signal_and_interference(&ev))
}

#[inline]
pub fn rate_from(s: C64, i: f64) -> f64 {
    (s.norm_sqr() / i).ln_1p() / std::f64::consts::LN_2
}

#[inline]
pub fn mse_from(s: C64, i: f64, g: C64) -> f64 {
    let t = i + s.norm_sqr();
    g.norm_sqr() * t - 2.0 * (g * s).re + 1.0
}

#[inline]
pub fn equalizer_from(s: C64, i: f64) -> C64 {
    s.conj() / (i + s.norm_sqr())
}

#[inline]
pub fn weight_from(s: C64, i: f64) -> f64 {
    (i + s.norm_sqr()) / i
}

pub fn instantaneous_rate(
    layout: &StreamLayout,
    p: &PrecoderSet,
    sample: ChannelSample<'_>,
    user: usize,
    stream: usize,
) -> Result<f64> {
    let (s, i) = signal_and_interference(layout, p, sample, user, stream)?;
    Ok(rate_from(s, i))
}

pub fn average_rate(
    layout: &StreamLayout,
    p: &PrecoderSet,
    samples: &SaaSampleSet,
    user: usize,
    stream: usize,
) -> Result<f64> {
    let ev = event(layout, user, stream)?;
    let sum: f64 = samples
        .iter()
        .map(|smp| {
            let (s, i) = Projections::new(p, smp).signal_and_interference(&ev);
            rate_from(s, i)
        })
        .sum();
    Ok(sum / samples.len() as f64)
}

pub fn mse(
    layout: &StreamLayout,
    p: &PrecoderSet,
    sample: ChannelSample<'_>,
    user: usize,
    stream: usize,
    g: C64,
) -> Result<f64> {
    let (s, i) = signal_and_interference(layout, p, sample, user, stream)?;
    Ok(mse_from(s, i, g))
}

pub fn mmse_equalizer(
    layout: &StreamLayout,
    p: &PrecoderSet,
    sample: ChannelSample<'_>,
    user: usize,
    stream: usize,
) -> Result<C64> {
    let (s, i) = signal_and_interference(layout, p, sample, user, stream)?;
    Ok(equalizer_from(s, i))
}

pub fn mmse_weight(
    layout: &StreamLayout,
    p: &PrecoderSet,
    sample: ChannelSample<'_>,
    user: usize,
    stream: usize,
) -> Result<f64> {
    let (s, i) = signal_and_interference(layout, p, sample, user, stream)?;
    Ok(weight_from(s, i))
}

/// `w* mse(g*) - log2 w*`, which equals `1 - rate`.
pub fn xi_mmse(
    layout: &StreamLayout,
    p: &PrecoderSet,
    sample: ChannelSample<'_>,
    user: usize,
    stream: usize,
) -> Result<f64> {
    let (s, i) = signal_and_interference(layout, p, sample, user, stream)?;
    let w = weight_from(s, i);
    Ok(w * mse_from(s, i, equalizer_from(s, i)) - w.log2())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    /// `[user][stream]`, `None` when the user does not decode the stream.
    pub user_stream_rate: Vec<Vec<Option<f64>>>,
    /// Min over decoders per stream.
    pub stream_rate: Vec<f64>,
    pub user_total: Vec<f64>,
    /// Rate left on the multicast stream after unicast allocations.
    pub multicast_rate: f64,
    pub wsr: f64,
}

impl RateReport {
    pub fn sum_rate(&self) -> f64 {
        self.user_total.iter().sum()
    }
}

/// Average rates of every decoding event, in [`decode_events`] order.
pub fn average_event_rates(events: &[DecodeEvent], p: &PrecoderSet, samples: &SaaSampleSet) -> Vec<f64> {
    let mut acc = vec![0.0; events.len()];
    for smp in samples.iter() {
        let proj = Projections::new(p, smp);
        for (a, ev) in acc.iter_mut().zip(events) {
            let (s, i) = proj.signal_and_interference(ev);
            *a += rate_from(s, i);
        }
    }
    let m = samples.len() as f64;
    acc.iter_mut().for_each(|a| *a /= m);
    acc
}

/// Assembles the report; `weights` has one entry per user.
pub fn rate_report(
    layout: &StreamLayout,
    p: &PrecoderSet,
    samples: &SaaSampleSet,
    weights: &[f64],
) -> Result<RateReport> {
    let events = decode_events(layout);
    let rates = average_event_rates(&events, p, samples);
    report_from_event_rates(layout, p, &events, &rates, weights)
}

pub fn report_from_event_rates(
    layout: &StreamLayout,
    p: &PrecoderSet,
    events: &[DecodeEvent],
    rates: &[f64],
    weights: &[f64],
) -> Result<RateReport> {
    let k = layout.num_users;
    if weights.len() != k || p.alloc.len() != layout.num_allocs() || p.vectors.len() != layout.num_streams() {
        return Err(Error::Dimension("precoders, allocations or weights do not match the layout".into()));
    }
    let mut user_stream_rate = vec![vec![None; layout.num_streams()]; k];
    for (ev, &r) in events.iter().zip(rates) {
        user_stream_rate[ev.user][ev.stream] = Some(r);
    }
    let stream_rate: Vec<f64> = (0..layout.num_streams())
        .map(|s| {
            user_stream_rate
                .iter()
                .filter_map(|row| row[s])
                .fold(f64::INFINITY, f64::min)
        })
        .map(|r| if r.is_finite() { r } else { 0.0 })
        .collect();

    for s in 0..layout.num_streams() {
        if !layout.is_allocated(s) {
            continue;
        }
        let mut used: f64 = layout.slots_of_stream(s).iter().map(|&a| p.alloc[a]).sum();
        if Some(s) == layout.multicast_stream {
            used += p.multicast_alloc;
        }
        let excess = used - stream_rate[s];
        if excess > ALLOC_TOL {
            return Err(Error::AllocOverflow { stream: s, excess });
        }
    }

    let user_total: Vec<f64> = (0..k)
        .map(|u| {
            let alloc: f64 = layout.slots_of_user(u).iter().map(|&a| p.alloc[a]).sum();
            alloc + layout.direct_stream(u).map_or(0.0, |s| stream_rate[s])
        })
        .collect();
    let multicast_rate = layout.multicast_stream.map_or(0.0, |s| {
        let unicast: f64 = layout.slots_of_stream(s).iter().map(|&a| p.alloc[a]).sum();
        stream_rate[s] - unicast
    });
    let wsr = user_total.iter().zip(weights).map(|(r, w)| r * w).sum();
    Ok(RateReport {
        user_stream_rate,
        stream_rate,
        user_total,
        multicast_rate,
        wsr,
    })
}

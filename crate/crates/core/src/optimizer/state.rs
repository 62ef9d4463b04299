//! Alternating-optimization state and the closed-form equalizer/weight steps.

use crate::channel::SaaSampleSet;
use crate::linalg::{add_outer, CMatrix, CVector, C64};
use crate::rates::{decode_events, equalizer_from, weight_from, DecodeEvent, PrecoderSet, Projections};
use crate::strategy::{ChannelKind, StreamLayout};

/// Sample-averaged constants of one decoding event.
#[derive(Debug, Clone, PartialEq)]
pub struct EventConstants {
    pub t: f64,
    /// Average of `t h h^H` over samples (actual channel of the decoding user).
    pub psi: CMatrix,
    /// Average of `t h~ h~^H`; present only when some interferer leaks
    /// through the error channel.
    pub phi: Option<CMatrix>,
    /// Average of `w h conj(g)`.
    pub f: CVector,
    pub w: f64,
    /// Average of `log2 w`.
    pub nu: f64,
}

#[derive(Debug, Clone)]
pub struct AoState {
    pub precoders: PrecoderSet,
    /// `x = -c` per allocation slot.
    pub x: Vec<f64>,
    /// `-C0` for the multicast message.
    pub x0: f64,
    /// Equalizers, `[event][sample]`.
    pub g: Vec<Vec<C64>>,
    /// Weights, `[event][sample]`.
    pub w: Vec<Vec<f64>>,
    pub constants: Vec<EventConstants>,
    pub iteration: usize,
    pub wsr_history: Vec<f64>,
    pub events: Vec<DecodeEvent>,
}

impl AoState {
    pub fn new(layout: &StreamLayout, precoders: PrecoderSet) -> Self {
        let events = decode_events(layout);
        let x = precoders.alloc.iter().map(|c| -c).collect();
        let x0 = -precoders.multicast_alloc;
        Self {
            precoders,
            x,
            x0,
            g: Vec::new(),
            w: Vec::new(),
            constants: Vec::new(),
            iteration: 0,
            wsr_history: Vec::new(),
            events,
        }
    }

    fn for_each_sample(&self, samples: &SaaSampleSet, mut f: impl FnMut(usize, usize, C64, f64)) {
        for (m, smp) in samples.iter().enumerate() {
            let proj = Projections::new(&self.precoders, smp);
            for (e, ev) in self.events.iter().enumerate() {
                let (s, i) = proj.signal_and_interference(ev);
                f(e, m, s, i);
            }
        }
    }

    /// MMSE equalizers at the current precoders.
    pub fn update_g(&mut self, samples: &SaaSampleSet) {
        let mut g = vec![vec![C64::new(0.0, 0.0); samples.len()]; self.events.len()];
        self.for_each_sample(samples, |e, m, s, i| g[e][m] = equalizer_from(s, i));
        self.g = g;
    }

    /// MMSE weights `T / I` at the current precoders.
    pub fn update_w(&mut self, samples: &SaaSampleSet) {
        let mut w = vec![vec![1.0; samples.len()]; self.events.len()];
        self.for_each_sample(samples, |e, m, s, i| w[e][m] = weight_from(s, i));
        self.w = w;
    }

    /// Recomputes the averaged constants from the current `g` and `w`.
    pub fn refresh_constants(&mut self, samples: &SaaSampleSet) {
        let nt = samples.estimate.nrows();
        let mm = samples.len() as f64;
        self.constants = self
            .events
            .iter()
            .enumerate()
            .map(|(e, ev)| {
                let needs_phi = ev.interference.iter().any(|t| t.channel == ChannelKind::Error);
                let mut psi = CMatrix::zeros(nt, nt);
                let mut phi = needs_phi.then(|| CMatrix::zeros(nt, nt));
                let mut f = CVector::zeros(nt);
                let (mut t_sum, mut w_sum, mut nu_sum) = (0.0, 0.0, 0.0);
                for (m, smp) in samples.iter().enumerate() {
                    let g = self.g[e][m];
                    let w = self.w[e][m];
                    let t = w * g.norm_sqr();
                    let h = smp.actual.column(ev.user);
                    if t > 0.0 {
                        add_outer(&mut psi, h.iter().copied(), t / mm);
                        if let Some(phi) = phi.as_mut() {
                            add_outer(phi, smp.error.column(ev.user).iter().copied(), t / mm);
                        }
                    }
                    let coef = g.conj() * (w / mm);
                    for (fi, hi) in f.iter_mut().zip(h.iter()) {
                        *fi += hi * coef;
                    }
                    t_sum += t;
                    w_sum += w;
                    nu_sum += w.log2();
                }
                EventConstants {
                    t: t_sum / mm,
                    psi,
                    phi,
                    f,
                    w: w_sum / mm,
                    nu: nu_sum / mm,
                }
            })
            .collect();
    }

    /// Sample-averaged `w mse(g) - log2 w` per event at the current state.
    pub fn averaged_wmse(&self, samples: &SaaSampleSet) -> Vec<f64> {
        let mut acc = vec![0.0; self.events.len()];
        self.for_each_sample(samples, |e, m, s, i| {
            let w = self.w[e][m];
            acc[e] += w * crate::rates::mse_from(s, i, self.g[e][m]) - w.log2();
        });
        acc.iter().map(|a| a / samples.len() as f64).collect()
    }

    /// Sets precoders and allocations from a subproblem solution.
    pub fn set_point(&mut self, precoders: Vec<CVector>, x: Vec<f64>, x0: f64) {
        self.precoders.alloc = x.iter().map(|v| (-v).max(0.0)).collect();
        self.precoders.multicast_alloc = (-x0).max(0.0);
        self.precoders.vectors = precoders;
        self.x = x;
        self.x0 = x0;
    }
}

/// Free-function form of [`AoState::update_g`].
pub fn update_g(mut state: AoState, samples: &SaaSampleSet) -> AoState {
    state.update_g(samples);
    state
}

/// Free-function form of [`AoState::update_w`].
pub fn update_w(mut state: AoState, samples: &SaaSampleSet) -> AoState {
    state.update_w(samples);
    state
}

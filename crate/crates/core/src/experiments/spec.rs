//! Experiment description as read from a config file.

use serde::{Deserialize, Serialize};

use crate::channel::ChannelConfig;
use crate::optimizer::AoConfig;
use crate::strategy::{make_layout, LayoutParams, Strategy};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    #[default]
    EsrCurve,
    Multicast,
    RateRegion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSweep {
    pub num_users: usize,
    pub num_tx_antennas: usize,
    /// Defaults to 1 for every user.
    #[serde(default)]
    pub user_variances: Vec<f64>,
    pub snr_db: Vec<f64>,
    pub alpha: Vec<f64>,
}

/// Per-user QoS floors, optionally depending on the CSIT exponent.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QosSchedule {
    pub thresholds: Vec<f64>,
    pub by_alpha: Vec<AlphaQos>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaQos {
    pub alpha: f64,
    pub thresholds: Vec<f64>,
}

impl QosSchedule {
    pub fn thresholds_for(&self, alpha: f64) -> Vec<f64> {
        self.by_alpha
            .iter()
            .find(|a| (a.alpha - alpha).abs() < 1e-12)
            .map(|a| a.thresholds.clone())
            .unwrap_or_else(|| self.thresholds.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MulticastSpec {
    pub enabled: bool,
    pub threshold: f64,
}

/// Fixed layout choices; anything left out is enumerated or derived.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LayoutOverrides {
    /// 1-based user groups for SC-SIC-per-group.
    pub groups: Option<Vec<Vec<usize>>>,
    /// 1-based SIC order, weakest first.
    pub sic_order: Option<Vec<usize>>,
    /// 1-based dirty paper encoding order.
    pub dpc_order: Option<Vec<usize>>,
    /// Permutation of the two-user common streams `[12, 13, 23]` given as
    /// 0-based positions.
    pub common_order: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: String,
    /// Emit one row per block in addition to the aggregate rows.
    pub per_block: bool,
    /// Fill `wall_ms`; off by default so reruns produce identical files.
    pub timing: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: "results".into(),
            per_block: false,
            timing: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DofSpec {
    /// Inclusive SNR window (dB) for the slope fit; all points when absent.
    pub snr_window: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub kind: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    /// Fading blocks per point.
    pub blocks: usize,
    /// Conditional channel samples per block.
    pub samples: usize,
    pub channel: ChannelSweep,
    pub strategies: Vec<Strategy>,
    #[serde(default)]
    pub layout: LayoutOverrides,
    /// Weight vectors for ESR/multicast runs; unit weights when empty.
    #[serde(default)]
    pub weights: Vec<Vec<f64>>,
    /// Weights of user 2 for rate regions (user 1 fixed at 1); the 43-point
    /// grid when empty.
    #[serde(default)]
    pub region_u2: Vec<f64>,
    #[serde(default)]
    pub qos: QosSchedule,
    #[serde(default)]
    pub multicast: MulticastSpec,
    #[serde(default)]
    pub ao: AoConfig,
    #[serde(default)]
    pub dof: DofSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_name() -> String {
    "experiment".into()
}

/// `{1e-3} ∪ {10^x : x = -1, -0.95, .., 1} ∪ {1e3}`.
pub fn full_weight_grid() -> Vec<f64> {
    let mut g = vec![1e-3];
    g.extend((-20..=20).map(|i| 10f64.powf(i as f64 * 0.05)));
    g.push(1e3);
    g
}

/// `{1e-3} ∪ {10^x : x = -1, -0.75, .., 1} ∪ {1e3}`.
pub fn coarse_weight_grid() -> Vec<f64> {
    let mut g = vec![1e-3];
    g.extend((-4..=4).map(|i| 10f64.powf(i as f64 * 0.25)));
    g.push(1e3);
    g
}

fn one_based(v: &[usize], k: usize, what: &str) -> Result<Vec<usize>> {
    v.iter()
        .map(|&u| {
            if u == 0 || u > k {
                Err(Error::InvalidConfig(format!("{what}: user {u} outside 1..={k}")))
            } else {
                Ok(u - 1)
            }
        })
        .collect()
}

impl ExperimentSpec {
    pub fn num_users(&self) -> usize {
        self.channel.num_users
    }

    pub fn channel_config(&self, snr_db: f64, alpha: f64) -> ChannelConfig {
        let k = self.channel.num_users;
        ChannelConfig {
            num_users: k,
            num_tx_antennas: self.channel.num_tx_antennas,
            user_variances: if self.channel.user_variances.is_empty() {
                vec![1.0; k]
            } else {
                self.channel.user_variances.clone()
            },
            csit_alpha: alpha,
            snr_db,
            rng_seed: self.seed,
        }
    }

    pub fn layout_params(&self) -> Result<LayoutParams> {
        let k = self.num_users();
        let l = &self.layout;
        Ok(LayoutParams {
            dpc_order: l.dpc_order.as_deref().map(|o| one_based(o, k, "dpc_order")).transpose()?,
            common_order: l.common_order.clone(),
            groups: l
                .groups
                .as_ref()
                .map(|gs| gs.iter().map(|g| one_based(g, k, "groups")).collect::<Result<Vec<_>>>())
                .transpose()?,
            sic_order: l.sic_order.as_deref().map(|o| one_based(o, k, "sic_order")).transpose()?,
            qos: Vec::new(),
            multicast: None,
        })
    }

    /// Weight vectors of the sweep in order.
    pub fn weight_vectors(&self) -> Vec<Vec<f64>> {
        let k = self.num_users();
        match self.kind {
            ExperimentKind::RateRegion => {
                let grid = if self.region_u2.is_empty() {
                    full_weight_grid()
                } else {
                    self.region_u2.clone()
                };
                grid.into_iter().map(|u2| vec![1.0, u2]).collect()
            }
            _ if self.weights.is_empty() => vec![vec![1.0; k]],
            _ => self.weights.clone(),
        }
    }

    pub fn ao_for(&self, alpha: f64, weights: &[f64]) -> AoConfig {
        AoConfig {
            weights: weights.to_vec(),
            qos: self.qos.thresholds_for(alpha),
            multicast_threshold: self.multicast.enabled.then_some(self.multicast.threshold),
            csit_alpha: Some(alpha),
            ..self.ao.clone()
        }
    }

    /// Schema-level and invariant checks; touches neither RNG nor solver.
    pub fn validate(&self) -> Result<()> {
        let k = self.num_users();
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.blocks == 0 {
            return bad("blocks must be at least 1".into());
        }
        if self.samples == 0 {
            return bad("samples must be at least 1".into());
        }
        if self.strategies.is_empty() {
            return bad("strategies must not be empty".into());
        }
        if self.channel.snr_db.is_empty() || self.channel.alpha.is_empty() {
            return bad("snr_db and alpha sweeps must not be empty".into());
        }
        for &snr in &self.channel.snr_db {
            for &alpha in &self.channel.alpha {
                self.channel_config(snr, alpha).validate()?;
            }
        }
        let params = self.layout_params()?;
        for &st in &self.strategies {
            let p = LayoutParams {
                qos: Vec::new(),
                ..params.clone()
            };
            make_layout(st, k, &p)?;
        }
        for &alpha in &self.channel.alpha {
            let q = self.qos.thresholds_for(alpha);
            if !q.is_empty() && q.len() != k {
                return bad(format!("{} QoS thresholds for {k} users", q.len()));
            }
            if q.iter().any(|t| !(*t >= 0.0)) {
                return bad("QoS thresholds must be nonnegative".into());
            }
        }
        if self.multicast.enabled && !(self.multicast.threshold >= 0.0) {
            return bad("multicast threshold must be nonnegative".into());
        }
        match self.kind {
            ExperimentKind::RateRegion if k != 2 => return bad("rate regions need exactly 2 users".into()),
            ExperimentKind::Multicast if !self.multicast.enabled => {
                return bad("multicast experiments need multicast.enabled = true".into())
            }
            _ => {}
        }
        let weights = self.weight_vectors();
        if weights.is_empty() {
            return bad("weight grid must not be empty".into());
        }
        for w in &weights {
            if w.len() != k || w.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                return bad(format!("weight vector {w:?} must have {k} positive entries"));
            }
        }
        self.ao.validate(k)?;
        if let Some([lo, hi]) = self.dof.snr_window {
            if !(lo <= hi) {
                return bad("dof.snr_window must be [low, high]".into());
            }
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

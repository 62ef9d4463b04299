//! Transmission strategies as stream layouts.
//!
//! A [`StreamLayout`] lists the streams, who decodes each of them and in which
//! order, plus the dirty paper encoding order. Rates, MSEs and the convex
//! subproblem are all derived from it, so no other module branches on the
//! strategy name.
//!
//! Users are 0-based internally and 1-based in names and file formats.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::linalg::CMatrix;
use crate::{Error, Result};

/// Upper bound on users for strategies with two-user common streams.
pub const MAX_USERS_MULTI_LAYER: usize = 3;
/// Upper bound on users when enumerating dirty paper encoding orders.
pub const MAX_USERS_DPC_ORDERS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "MU-LP")]
    MuLp,
    #[serde(rename = "SC-SIC")]
    ScSic,
    #[serde(rename = "SC-SIC-per-group")]
    ScSicPerGroup,
    #[serde(rename = "1-layer-RS")]
    OneLayerRs,
    #[serde(rename = "generalized-RS")]
    GeneralizedRs,
    #[serde(rename = "DPC")]
    Dpc,
    #[serde(rename = "1-DPCRS")]
    OneDpcRs,
    #[serde(rename = "M-DPCRS")]
    MDpcRs,
}

impl Strategy {
    pub const ALL: [Strategy; 8] = [
        Strategy::MuLp,
        Strategy::ScSic,
        Strategy::ScSicPerGroup,
        Strategy::OneLayerRs,
        Strategy::GeneralizedRs,
        Strategy::Dpc,
        Strategy::OneDpcRs,
        Strategy::MDpcRs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::MuLp => "MU-LP",
            Strategy::ScSic => "SC-SIC",
            Strategy::ScSicPerGroup => "SC-SIC-per-group",
            Strategy::OneLayerRs => "1-layer-RS",
            Strategy::GeneralizedRs => "generalized-RS",
            Strategy::Dpc => "DPC",
            Strategy::OneDpcRs => "1-DPCRS",
            Strategy::MDpcRs => "M-DPCRS",
        }
    }

    pub fn uses_dpc(self) -> bool {
        matches!(self, Strategy::Dpc | Strategy::OneDpcRs | Strategy::MDpcRs)
    }

    pub fn uses_sic_order(self) -> bool {
        matches!(self, Strategy::ScSic | Strategy::ScSicPerGroup)
    }

    /// Strategies whose layout has a full-audience common stream.
    pub fn has_common(self) -> bool {
        matches!(
            self,
            Strategy::OneLayerRs | Strategy::GeneralizedRs | Strategy::OneDpcRs | Strategy::MDpcRs
        )
    }

    fn multi_layer(self) -> bool {
        matches!(self, Strategy::GeneralizedRs | Strategy::MDpcRs)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .iter()
            .copied()
            .find(|st| st.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown strategy `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StreamKind {
    Common,
    PrivateLinear,
    PrivateDpc,
    Multicast,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Stream {
    /// Sorted, 0-based.
    pub audience: Vec<usize>,
    pub kind: StreamKind,
}

impl Stream {
    pub fn is_private(&self) -> bool {
        matches!(self.kind, StreamKind::PrivateLinear | StreamKind::PrivateDpc)
    }

    /// `s_123`, `s_12`, `s_p2`, `s_0` style label (1-based users).
    pub fn label(&self) -> String {
        let users: String = self.audience.iter().map(|u| (u + 1).to_string()).collect();
        match self.kind {
            StreamKind::Common => format!("s_{users}"),
            StreamKind::Multicast => "s_0".to_string(),
            _ => format!("s_p{users}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelKind {
    Actual,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InterferenceTerm {
    pub stream: usize,
    pub channel: ChannelKind,
}

/// One rate allocation variable: the share of `stream`'s rate carrying part of
/// `user`'s message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AllocSlot {
    pub stream: usize,
    pub user: usize,
}

/// Everything needed to build a layout.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LayoutParams {
    /// Dirty paper encoding order, first-encoded user first.
    pub dpc_order: Option<Vec<usize>>,
    /// Decoding priority among the two-user common streams, as a permutation
    /// of their canonical positions (`s_12`, `s_13`, `s_23`).
    pub common_order: Option<Vec<usize>>,
    /// User partition for SC-SIC-per-group.
    pub groups: Option<Vec<Vec<usize>>>,
    /// SIC order for the SC-SIC family, weakest user first.
    pub sic_order: Option<Vec<usize>>,
    /// Per-user rate floors; empty means all zero.
    pub qos: Vec<f64>,
    /// `Some(R0)` adds a multicast message with rate floor `R0`.
    pub multicast: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamLayout {
    pub num_users: usize,
    pub streams: Vec<Stream>,
    pub dpc_order: Option<Vec<usize>>,
    /// Stream indices of all multi-user streams in decoding priority.
    pub common_order: Vec<usize>,
    /// Per user, stream indices in decoding order; ends with the private stream.
    pub chains: Vec<Vec<usize>>,
    pub private_of: Vec<usize>,
    pub alloc_slots: Vec<AllocSlot>,
    /// Stream carrying the multicast message, if any.
    pub multicast_stream: Option<usize>,
    pub qos: Vec<f64>,
    pub multicast_threshold: f64,
}

fn check_permutation(order: &[usize], n: usize, what: &str) -> Result<()> {
    let mut seen = vec![false; n];
    if order.len() != n {
        return Err(Error::InvalidOrder(format!("{what} must have {n} entries, got {order:?}")));
    }
    for &x in order {
        if x >= n || seen[x] {
            return Err(Error::InvalidOrder(format!("{what} {order:?} is not a permutation of 0..{n}")));
        }
        seen[x] = true;
    }
    Ok(())
}

/// Default SC-SIC-per-group partition: consecutive pairs, `{1,2},{3}` for three users.
pub fn default_groups(k: usize) -> Vec<Vec<usize>> {
    (0..k).collect::<Vec<_>>().chunks(2).map(|c| c.to_vec()).collect()
}

/// SIC order by estimated channel norm, weakest first (ties by index).
pub fn sic_order_by_strength(estimate: &CMatrix) -> Vec<usize> {
    let norms: Vec<f64> = (0..estimate.ncols())
        .map(|k| estimate.column(k).iter().map(|x| x.norm_sqr()).sum())
        .collect();
    let mut order: Vec<usize> = (0..norms.len()).collect();
    order.sort_by(|&a, &b| norms[a].total_cmp(&norms[b]).then(a.cmp(&b)));
    order
}

fn validate_groups(groups: &[Vec<usize>], k: usize) -> Result<()> {
    let mut seen = vec![false; k];
    for g in groups {
        if g.is_empty() {
            return Err(Error::InvalidGroups("empty group".into()));
        }
        for &u in g {
            if u >= k {
                return Err(Error::InvalidGroups(format!("user {} out of range", u + 1)));
            }
            if seen[u] {
                return Err(Error::InvalidGroups(format!("user {} in two groups", u + 1)));
            }
            seen[u] = true;
        }
    }
    if let Some(u) = seen.iter().position(|s| !s) {
        return Err(Error::InvalidGroups(format!("user {} not in any group", u + 1)));
    }
    Ok(())
}

pub fn make_layout(strategy: Strategy, k: usize, params: &LayoutParams) -> Result<StreamLayout> {
    if k == 0 {
        return Err(Error::InvalidConfig("need at least one user".into()));
    }
    if strategy.multi_layer() && k > MAX_USERS_MULTI_LAYER {
        return Err(Error::UnsupportedK {
            strategy: strategy.name(),
            k,
            max: MAX_USERS_MULTI_LAYER,
        });
    }
    let qos = if params.qos.is_empty() {
        vec![0.0; k]
    } else if params.qos.len() == k {
        params.qos.clone()
    } else {
        return Err(Error::InvalidConfig(format!("{} QoS thresholds for {k} users", params.qos.len())));
    };
    if qos.iter().any(|q| !(*q >= 0.0)) {
        return Err(Error::InvalidConfig("QoS thresholds must be nonnegative".into()));
    }
    let multicast_threshold = params.multicast.unwrap_or(0.0);
    if !(multicast_threshold >= 0.0) {
        return Err(Error::InvalidConfig("multicast threshold must be nonnegative".into()));
    }

    let all: Vec<usize> = (0..k).collect();
    let mut streams = Vec::new();
    let mut multicast_stream = None;
    let mut slot_streams = Vec::new();

    if strategy.has_common() {
        let kind = if params.multicast.is_some() {
            multicast_stream = Some(0);
            StreamKind::Multicast
        } else {
            StreamKind::Common
        };
        streams.push(Stream { audience: all.clone(), kind });
        slot_streams.push(0);
    } else if params.multicast.is_some() {
        multicast_stream = Some(0);
        streams.push(Stream {
            audience: all.clone(),
            kind: StreamKind::Multicast,
        });
    }

    // Two-user commons only matter once there are three users.
    let mut partial = Vec::new();
    if strategy.multi_layer() && k == 3 {
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            partial.push(streams.len());
            slot_streams.push(streams.len());
            streams.push(Stream {
                audience: vec![a, b],
                kind: StreamKind::Common,
            });
        }
    }
    let common_order = {
        let mut order: Vec<usize> = (0..streams.len()).filter(|i| !partial.contains(i)).collect();
        match &params.common_order {
            Some(po) if !partial.is_empty() => {
                check_permutation(po, partial.len(), "common-stream order")?;
                order.extend(po.iter().map(|&j| partial[j]));
            }
            Some(po) if po.len() > 1 => {
                return Err(Error::InvalidOrder(format!(
                    "common-stream order {po:?} given but {} has no two-user commons here",
                    strategy.name()
                )));
            }
            _ => order.extend(partial.iter().copied()),
        }
        order
    };

    let private_kind = if strategy.uses_dpc() {
        StreamKind::PrivateDpc
    } else {
        StreamKind::PrivateLinear
    };
    let private_of: Vec<usize> = (0..k)
        .map(|u| {
            streams.push(Stream {
                audience: vec![u],
                kind: private_kind,
            });
            streams.len() - 1
        })
        .collect();

    let dpc_order = if strategy.uses_dpc() {
        let order = params.dpc_order.clone().unwrap_or_else(|| all.clone());
        check_permutation(&order, k, "DPC encoding order")?;
        Some(order)
    } else {
        None
    };

    // Weaker private streams each user also decodes (SC-SIC family).
    let mut sic_prefix: Vec<Vec<usize>> = vec![Vec::new(); k];
    if strategy.uses_sic_order() {
        let order = params.sic_order.clone().unwrap_or_else(|| all.clone());
        check_permutation(&order, k, "SIC order")?;
        let groups = match strategy {
            Strategy::ScSic => vec![all.clone()],
            _ => params.groups.clone().unwrap_or_else(|| default_groups(k)),
        };
        validate_groups(&groups, k)?;
        for g in &groups {
            let ordered: Vec<usize> = order.iter().copied().filter(|u| g.contains(u)).collect();
            for (pos, &u) in ordered.iter().enumerate() {
                sic_prefix[u] = ordered[..pos].iter().map(|&w| private_of[w]).collect();
            }
        }
    } else if params.groups.is_some() && strategy != Strategy::ScSicPerGroup {
        log::debug!("groups ignored for {}", strategy.name());
    }

    let chains: Vec<Vec<usize>> = (0..k)
        .map(|u| {
            let mut chain: Vec<usize> = common_order
                .iter()
                .copied()
                .filter(|&s| streams[s].audience.contains(&u))
                .collect();
            chain.extend(sic_prefix[u].iter().copied());
            chain.push(private_of[u]);
            chain
        })
        .collect();

    let mut alloc_slots = Vec::new();
    for &s in &slot_streams {
        for &u in &streams[s].audience {
            alloc_slots.push(AllocSlot { stream: s, user: u });
        }
    }
    for u in 0..k {
        let s = private_of[u];
        if chains.iter().filter(|c| c.contains(&s)).count() > 1 {
            alloc_slots.push(AllocSlot { stream: s, user: u });
        }
    }

    Ok(StreamLayout {
        num_users: k,
        streams,
        dpc_order,
        common_order,
        chains,
        private_of,
        alloc_slots,
        multicast_stream,
        qos,
        multicast_threshold,
    })
}

impl StreamLayout {
    pub fn num_streams(&self) -> usize {
        self.streams.len()
    }

    pub fn num_allocs(&self) -> usize {
        self.alloc_slots.len()
    }

    pub fn has_multicast(&self) -> bool {
        self.multicast_stream.is_some()
    }

    /// Users whose decode chain contains `stream`.
    pub fn decoders(&self, stream: usize) -> Vec<usize> {
        (0..self.num_users).filter(|&u| self.chains[u].contains(&stream)).collect()
    }

    /// Streams whose rate is shared out through allocation variables.
    pub fn is_allocated(&self, stream: usize) -> bool {
        Some(stream) == self.multicast_stream || self.alloc_slots.iter().any(|a| a.stream == stream)
    }

    /// Slot indices belonging to `stream`.
    pub fn slots_of_stream(&self, stream: usize) -> Vec<usize> {
        (0..self.alloc_slots.len()).filter(|&a| self.alloc_slots[a].stream == stream).collect()
    }

    /// Slot indices carrying part of `user`'s message.
    pub fn slots_of_user(&self, user: usize) -> Vec<usize> {
        (0..self.alloc_slots.len()).filter(|&a| self.alloc_slots[a].user == user).collect()
    }

    /// The user's private stream when its rate is counted directly.
    pub fn direct_stream(&self, user: usize) -> Option<usize> {
        let s = self.private_of[user];
        (!self.is_allocated(s)).then_some(s)
    }

    fn dpc_position(&self, user: usize) -> Option<usize> {
        self.dpc_order.as_ref().and_then(|o| o.iter().position(|&v| v == user))
    }

    fn owner(&self, stream: usize) -> Option<usize> {
        let s = &self.streams[stream];
        s.is_private().then(|| s.audience[0])
    }

    /// Streams still present at `user` when decoding `stream`.
    pub fn interference_set(&self, user: usize, stream: usize) -> Result<Vec<InterferenceTerm>> {
        let chain = &self.chains[user];
        let pos = chain
            .iter()
            .position(|&s| s == stream)
            .ok_or(Error::NotInChain { user, stream })?;
        let removed = &chain[..=pos];
        let own_dpc = stream == self.private_of[user] && self.streams[stream].kind == StreamKind::PrivateDpc;
        let my_pos = self.dpc_position(user);
        Ok((0..self.streams.len())
            .filter(|s| !removed.contains(s))
            .map(|j| {
                let precancelled = own_dpc
                    && self.streams[j].kind == StreamKind::PrivateDpc
                    && matches!(
                        (self.owner(j).and_then(|o| self.dpc_position(o)), my_pos),
                        (Some(a), Some(b)) if a < b
                    );
                InterferenceTerm {
                    stream: j,
                    channel: if precancelled { ChannelKind::Error } else { ChannelKind::Actual },
                }
            })
            .collect())
    }

    /// All `(user, stream)` decoding events, user-major in chain order.
    pub fn decode_events(&self) -> Vec<(usize, usize)> {
        self.chains
            .iter()
            .enumerate()
            .flat_map(|(u, c)| c.iter().map(move |&s| (u, s)))
            .collect()
    }

    pub fn describe(&self) -> String {
        let names: Vec<String> = self.streams.iter().map(Stream::label).collect();
        let chains: Vec<String> = self
            .chains
            .iter()
            .enumerate()
            .map(|(u, c)| {
                let c: Vec<&str> = c.iter().map(|&s| names[s].as_str()).collect();
                format!("u{}: {}", u + 1, c.join(" > "))
            })
            .collect();
        format!("streams [{}]; {}", names.join(", "), chains.join("; "))
    }
}

/// One `(pi, pi')` candidate.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OrderPair {
    pub dpc_order: Option<Vec<usize>>,
    pub common_order: Option<Vec<usize>>,
}

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if cur.len() == used.len() {
            out.push(cur.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                rec(cur, used, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

pub fn enumerate_orders(strategy: Strategy, k: usize) -> Result<Vec<OrderPair>> {
    let limit = |max: usize| {
        if k > max {
            Err(Error::CombinatorialLimit {
                strategy: strategy.name(),
                k,
            })
        } else {
            Ok(())
        }
    };
    if strategy.multi_layer() {
        limit(MAX_USERS_MULTI_LAYER)?;
    }
    if strategy.uses_dpc() {
        limit(MAX_USERS_DPC_ORDERS)?;
    }
    let dpc: Vec<Option<Vec<usize>>> = if strategy.uses_dpc() {
        permutations(k).into_iter().map(Some).collect()
    } else {
        vec![None]
    };
    let common: Vec<Option<Vec<usize>>> = if strategy.multi_layer() && k == 3 {
        permutations(3).into_iter().map(Some).collect()
    } else {
        vec![None]
    };
    Ok(dpc
        .iter()
        .flat_map(|d| {
            common.iter().map(move |c| OrderPair {
                dpc_order: d.clone(),
                common_order: c.clone(),
            })
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout(s: Strategy, k: usize) -> StreamLayout {
        make_layout(s, k, &LayoutParams::default()).unwrap()
    }

    #[test]
    fn names_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
            let j = serde_json::to_string(&s).unwrap();
            assert_eq!(j, format!("\"{}\"", s.name()));
        }
        assert!("NOMA".parse::<Strategy>().is_err());
    }

    #[test]
    fn two_user_reductions() {
        assert_eq!(layout(Strategy::MDpcRs, 2), layout(Strategy::OneDpcRs, 2));
        assert_eq!(layout(Strategy::GeneralizedRs, 2), layout(Strategy::OneLayerRs, 2));
    }

    #[test]
    fn group_reductions() {
        for k in 1..=3 {
            let one = LayoutParams {
                groups: Some(vec![(0..k).collect()]),
                ..Default::default()
            };
            assert_eq!(
                make_layout(Strategy::ScSicPerGroup, k, &one).unwrap(),
                layout(Strategy::ScSic, k)
            );
            let single = LayoutParams {
                groups: Some((0..k).map(|u| vec![u]).collect()),
                ..Default::default()
            };
            assert_eq!(
                make_layout(Strategy::ScSicPerGroup, k, &single).unwrap(),
                layout(Strategy::MuLp, k)
            );
        }
    }

    #[test]
    fn one_layer_rs_three_users() {
        let l = layout(Strategy::OneLayerRs, 3);
        assert_eq!(l.num_streams(), 4);
        assert_eq!(l.streams.iter().filter(|s| s.kind == StreamKind::PrivateLinear).count(), 3);
        assert!(l.chains.iter().all(|c| c.len() == 2));
        assert_eq!(l.num_allocs(), 3);
    }

    #[test]
    fn mu_lp_three_users() {
        let l = layout(Strategy::MuLp, 3);
        assert_eq!(l.num_streams(), 3);
        assert!(l.chains.iter().all(|c| c.len() == 1));
        assert_eq!(l.num_allocs(), 0);
        let set = l.interference_set(0, l.private_of[0]).unwrap();
        assert_eq!(set.len(), 2);
        assert!(set.iter().all(|t| t.channel == ChannelKind::Actual));
    }

    #[test]
    fn m_dpcrs_three_users() {
        let l = layout(Strategy::MDpcRs, 3);
        assert_eq!(l.num_streams(), 7);
        assert_eq!(l.common_order[0], 0);
        assert_eq!(l.streams[0].audience, vec![0, 1, 2]);
        // full common, two partials, private
        assert!(l.chains.iter().all(|c| c.len() == 4));
        assert_eq!(l.num_allocs(), 3 + 3 * 2);
        let p = LayoutParams {
            common_order: Some(vec![2, 0, 1]),
            ..Default::default()
        };
        let l = make_layout(Strategy::MDpcRs, 3, &p).unwrap();
        assert_eq!(l.common_order, vec![0, 3, 1, 2]);
        // user 1 decodes s_12 then s_13; s_23 comes first in priority but user 1 skips it
        assert_eq!(l.chains[0], vec![0, 1, 2, 4]);
        assert_eq!(l.chains[2], vec![0, 3, 2, 6]);
    }

    #[test]
    fn dpc_interference_uses_error_channel() {
        let l = layout(Strategy::Dpc, 2);
        let set = l.interference_set(1, l.private_of[1]).unwrap();
        assert_eq!(
            set,
            vec![InterferenceTerm {
                stream: l.private_of[0],
                channel: ChannelKind::Error
            }]
        );
        let set = l.interference_set(0, l.private_of[0]).unwrap();
        assert_eq!(set[0].channel, ChannelKind::Actual);
        let p = LayoutParams {
            dpc_order: Some(vec![1, 0]),
            ..Default::default()
        };
        let l = make_layout(Strategy::Dpc, 2, &p).unwrap();
        let set = l.interference_set(0, l.private_of[0]).unwrap();
        assert_eq!(set[0].channel, ChannelKind::Error);
    }

    #[test]
    fn dpcrs_common_sees_all_privates() {
        let l = layout(Strategy::OneDpcRs, 2);
        let set = l.interference_set(0, 0).unwrap();
        assert_eq!(set.len(), 2);
        assert!(set.iter().all(|t| t.channel == ChannelKind::Actual && l.streams[t.stream].is_private()));
    }

    #[test]
    fn sc_sic_chain() {
        let p = LayoutParams {
            sic_order: Some(vec![2, 0, 1]),
            ..Default::default()
        };
        let l = make_layout(Strategy::ScSic, 3, &p).unwrap();
        assert_eq!(l.chains[2], vec![l.private_of[2]]);
        assert_eq!(l.chains[0], vec![l.private_of[2], l.private_of[0]]);
        assert_eq!(l.chains[1].len(), 3);
        // strongest user's private stream is counted directly
        assert_eq!(l.direct_stream(1), Some(l.private_of[1]));
        assert_eq!(l.direct_stream(2), None);
        assert_eq!(l.decoders(l.private_of[2]), vec![0, 1, 2]);
    }

    #[test]
    fn chain_partition() {
        for s in Strategy::ALL {
            for k in 1..=3 {
                for mc in [None, Some(0.5)] {
                    let p = LayoutParams {
                        multicast: mc,
                        ..Default::default()
                    };
                    let l = make_layout(s, k, &p).unwrap();
                    for (u, chain) in l.chains.iter().enumerate() {
                        assert_eq!(*chain.last().unwrap(), l.private_of[u]);
                        for (pos, &i) in chain.iter().enumerate() {
                            let set = l.interference_set(u, i).unwrap();
                            let mut all: Vec<usize> = set.iter().map(|t| t.stream).collect();
                            all.extend_from_slice(&chain[..=pos]);
                            all.sort();
                            assert_eq!(all, (0..l.num_streams()).collect::<Vec<_>>(), "{s} k={k}");
                            for t in &set {
                                if t.channel == ChannelKind::Error {
                                    assert!(s.uses_dpc() && i == l.private_of[u]);
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn multicast_layouts() {
        let p = LayoutParams {
            multicast: Some(0.5),
            ..Default::default()
        };
        let rs = make_layout(Strategy::OneLayerRs, 2, &p).unwrap();
        assert_eq!(rs.num_streams(), 3);
        assert_eq!(rs.multicast_stream, Some(0));
        assert_eq!(rs.num_allocs(), 2);
        let dpc = make_layout(Strategy::Dpc, 2, &p).unwrap();
        assert_eq!(dpc.num_streams(), 3);
        assert_eq!(dpc.num_allocs(), 0);
        assert!(dpc.chains.iter().all(|c| c[0] == 0));
    }

    #[test]
    fn order_counts() {
        assert_eq!(enumerate_orders(Strategy::Dpc, 2).unwrap().len(), 2);
        assert_eq!(enumerate_orders(Strategy::MDpcRs, 3).unwrap().len(), 36);
        assert_eq!(enumerate_orders(Strategy::MDpcRs, 2).unwrap().len(), 2);
        assert_eq!(enumerate_orders(Strategy::GeneralizedRs, 3).unwrap().len(), 6);
        assert_eq!(enumerate_orders(Strategy::MuLp, 3).unwrap().len(), 1);
        assert_eq!(enumerate_orders(Strategy::OneDpcRs, 4).unwrap().len(), 24);
        assert!(enumerate_orders(Strategy::Dpc, 5).is_err());
        assert!(enumerate_orders(Strategy::MDpcRs, 4).is_err());
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            make_layout(Strategy::GeneralizedRs, 4, &LayoutParams::default()),
            Err(Error::UnsupportedK { .. })
        ));
        let p = LayoutParams {
            groups: Some(vec![vec![0], vec![0, 1]]),
            ..Default::default()
        };
        assert!(matches!(make_layout(Strategy::ScSicPerGroup, 2, &p), Err(Error::InvalidGroups(_))));
        let p = LayoutParams {
            dpc_order: Some(vec![0, 0]),
            ..Default::default()
        };
        assert!(make_layout(Strategy::Dpc, 2, &p).is_err());
        let l = layout(Strategy::MuLp, 2);
        assert!(matches!(l.interference_set(0, 1), Err(Error::NotInChain { .. })));
    }

    #[test]
    fn sic_order_weakest_first() {
        use crate::linalg::C64;
        let h = CMatrix::from_row_slice(1, 3, &[C64::new(2.0, 0.0), C64::new(0.5, 0.0), C64::new(1.0, 0.0)]);
        assert_eq!(sic_order_by_strength(&h), vec![1, 2, 0]);
    }
}

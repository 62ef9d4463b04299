//! High-SNR slope of the sum rate against `log2(P_t)`.

use serde::{Deserialize, Serialize};

use super::ResultRecord;
use crate::strategy::Strategy;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DofEstimate {
    pub strategy: Strategy,
    pub alpha: f64,
    pub slope: f64,
    pub intercept: f64,
    pub points: usize,
    /// Analytic target, where one is known for the strategy.
    pub target: Option<f64>,
}

/// `1 + (K - 1) alpha`.
pub fn rs_dof(k: usize, alpha: f64) -> f64 {
    1.0 + (k as f64 - 1.0) * alpha.min(1.0)
}

/// `max(1, K alpha)`.
pub fn linear_dof(k: usize, alpha: f64) -> f64 {
    (k as f64 * alpha.min(1.0)).max(1.0)
}

pub fn dof_target(strategy: Strategy, k: usize, alpha: f64) -> Option<f64> {
    match strategy {
        s if s.has_common() => Some(rs_dof(k, alpha)),
        Strategy::MuLp | Strategy::Dpc => Some(linear_dof(k, alpha)),
        _ => None,
    }
}

/// Least-squares slope of `y` against `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

/// One fit per `(strategy, alpha)` over aggregate records with unit weights.
pub fn estimate_dof(records: &[ResultRecord], snr_window: Option<[f64; 2]>) -> Result<Vec<DofEstimate>> {
    let mut keys: Vec<(Strategy, f64)> = Vec::new();
    for r in records.iter().filter(|r| r.block.is_none()) {
        if !keys.iter().any(|&(s, a)| s == r.strategy && a == r.alpha) {
            keys.push((r.strategy, r.alpha));
        }
    }
    let mut out = Vec::new();
    for (strategy, alpha) in keys {
        let mut pts: Vec<(f64, f64)> = records
            .iter()
            .filter(|r| r.block.is_none() && r.strategy == strategy && r.alpha == alpha)
            .filter(|r| snr_window.is_none_or(|[lo, hi]| r.snr_db >= lo - 1e-9 && r.snr_db <= hi + 1e-9))
            .filter(|r| r.esr.is_finite())
            .map(|r| (r.snr_db, r.esr))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        pts.dedup_by(|a, b| a.0 == b.0);
        if pts.len() < 3 {
            return Err(Error::InsufficientPoints(pts.len()));
        }
        let step = pts[1].0 - pts[0].0;
        if pts.windows(2).any(|w| ((w[1].0 - w[0].0) - step).abs() > 1e-6) {
            return Err(Error::InvalidConfig("SNR points must be uniformly spaced in dB".into()));
        }
        let x: Vec<f64> = pts.iter().map(|p| p.0 / 10.0 * std::f64::consts::LOG2_10).collect();
        let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
        let (slope, intercept) = ls_slope(&x, &y);
        let k = records.iter().find(|r| r.strategy == strategy).map_or(0, |r| r.user_rates.len());
        out.push(DofEstimate {
            strategy,
            alpha,
            slope,
            intercept,
            points: pts.len(),
            target: dof_target(strategy, k, alpha),
        });
    }
    Ok(out)
}

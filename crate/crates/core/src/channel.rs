//! Block-fading channels with partial CSIT.
//!
//! Each user's channel column is split into a transmitter-side estimate and an
//! estimation error whose variance shrinks with SNR as
//! `sigma_e^2 = sigma^2 * P_t^(-alpha)`. The estimate gets the remaining
//! variance so that the actual channel keeps variance `sigma^2`.
//!
//! Randomness is keyed by `(seed, domain, block, sample)`: every block and
//! every conditional sample owns an independent ChaCha stream, so draws are
//! reproducible no matter how work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::linalg::{CMatrix, C64};
use crate::{Error, Result};

const DOMAIN_ESTIMATE: u64 = 0x4553_5449;
const DOMAIN_ERROR: u64 = 0x4552_524f;
const DOMAIN_SAA: u64 = 0x5341_4121;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub num_users: usize,
    pub num_tx_antennas: usize,
    pub user_variances: Vec<f64>,
    pub csit_alpha: f64,
    pub snr_db: f64,
    pub rng_seed: u64,
}

impl ChannelConfig {
    /// Equal unit variances for every user.
    pub fn new(num_users: usize, num_tx_antennas: usize, csit_alpha: f64, snr_db: f64, rng_seed: u64) -> Self {
        Self {
            num_users,
            num_tx_antennas,
            user_variances: vec![1.0; num_users],
            csit_alpha,
            snr_db,
            rng_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_users == 0 || self.num_tx_antennas == 0 {
            return Err(Error::InvalidConfig("need at least one user and one antenna".into()));
        }
        if self.user_variances.len() != self.num_users {
            return Err(Error::InvalidConfig(format!(
                "{} user variances given for {} users",
                self.user_variances.len(),
                self.num_users
            )));
        }
        if let Some(v) = self.user_variances.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidConfig(format!("user variance must be positive, got {v}")));
        }
        if !(self.csit_alpha >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "CSIT exponent alpha must be >= 0, got {}",
                self.csit_alpha
            )));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::InvalidConfig("SNR must be finite".into()));
        }
        for k in 0..self.num_users {
            if self.estimate_variance(k) < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "error variance {:.4} exceeds channel variance {:.4} for user {} \
                     (needs SNR >= 0 dB or alpha = 0)",
                    self.error_variance(k),
                    self.user_variances[k],
                    k + 1
                )));
            }
        }
        Ok(())
    }

    /// Linear transmit power (noise power is 1).
    pub fn transmit_power(&self) -> f64 {
        10f64.powf(self.snr_db / 10.0)
    }

    /// `sigma_k^2 * P_t^(-alpha)`; exactly zero for `alpha = inf` above 0 dB.
    pub fn error_variance(&self, user: usize) -> f64 {
        let p = self.transmit_power();
        let scale = if self.csit_alpha.is_infinite() {
            if p > 1.0 {
                0.0
            } else if p == 1.0 {
                1.0
            } else {
                f64::INFINITY
            }
        } else {
            p.powf(-self.csit_alpha)
        };
        self.user_variances[user] * scale
    }

    pub fn estimate_variance(&self, user: usize) -> f64 {
        self.user_variances[user] - self.error_variance(user)
    }
}

/// One fading block: actual channel, estimate and error, each `Nt x K`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelBlock {
    pub actual: CMatrix,
    pub estimate: CMatrix,
    pub error: CMatrix,
    pub block_index: u64,
}

/// Conditional channel samples `H^(m) = H_hat + H_tilde^(m)` for one estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct SaaSampleSet {
    pub estimate: CMatrix,
    pub samples: Vec<CMatrix>,
    pub errors: Vec<CMatrix>,
}

/// Borrowed view of one channel realization: actual channel and the part of it
/// unknown to the transmitter.
#[derive(Debug, Clone, Copy)]
pub struct ChannelSample<'a> {
    pub actual: &'a CMatrix,
    pub error: &'a CMatrix,
}

impl ChannelBlock {
    pub fn view(&self) -> ChannelSample<'_> {
        ChannelSample {
            actual: &self.actual,
            error: &self.error,
        }
    }
}

impl SaaSampleSet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample(&self, m: usize) -> ChannelSample<'_> {
        ChannelSample {
            actual: &self.samples[m],
            error: &self.errors[m],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = ChannelSample<'_>> + '_ {
        (0..self.len()).map(move |m| self.sample(m))
    }

    /// A single "sample" equal to the given realization, for deterministic
    /// evaluation on a known channel.
    pub fn from_realization(actual: CMatrix, error: CMatrix) -> Self {
        let estimate = &actual - &error;
        let error = &actual - &estimate;
        Self {
            estimate,
            samples: vec![actual],
            errors: vec![error],
        }
    }
}

fn keyed_rng(seed: u64, domain: u64, block: u64, sample: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    for (i, word) in [seed, domain, block, sample].iter().enumerate() {
        key[i * 8..(i + 1) * 8].copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// `Nt x K` matrix with independent `CN(0, variances[k])` entries in column k.
fn gaussian_columns(rng: &mut ChaCha8Rng, nt: usize, variances: &[f64]) -> CMatrix {
    let mut m = CMatrix::zeros(nt, variances.len());
    for (k, &var) in variances.iter().enumerate() {
        let s = (var / 2.0).sqrt();
        for i in 0..nt {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            m[(i, k)] = C64::new(s * re, s * im);
        }
    }
    m
}

fn error_variances(config: &ChannelConfig) -> Vec<f64> {
    (0..config.num_users).map(|k| config.error_variance(k)).collect()
}

pub fn generate_block(config: &ChannelConfig, block_index: u64) -> Result<ChannelBlock> {
    config.validate()?;
    let nt = config.num_tx_antennas;
    let est_var: Vec<f64> = (0..config.num_users).map(|k| config.estimate_variance(k)).collect();
    let err_var = error_variances(config);
    let mut rng = keyed_rng(config.rng_seed, DOMAIN_ESTIMATE, block_index, 0);
    let estimate = gaussian_columns(&mut rng, nt, &est_var);
    let mut rng = keyed_rng(config.rng_seed, DOMAIN_ERROR, block_index, 0);
    let error = gaussian_columns(&mut rng, nt, &err_var);
    let actual = &estimate + &error;
    Ok(ChannelBlock {
        actual,
        estimate,
        error,
        block_index,
    })
}

pub fn draw_saa_samples(block: &ChannelBlock, config: &ChannelConfig, m: usize) -> Result<SaaSampleSet> {
    if m == 0 {
        return Err(Error::InvalidConfig("need at least one SAA sample".into()));
    }
    config.validate()?;
    let nt = config.num_tx_antennas;
    if block.estimate.nrows() != nt || block.estimate.ncols() != config.num_users {
        return Err(Error::Dimension("block does not match channel config".into()));
    }
    let err_var = error_variances(config);
    let mut samples = Vec::with_capacity(m);
    let mut errors = Vec::with_capacity(m);
    for i in 0..m {
        let mut rng = keyed_rng(config.rng_seed, DOMAIN_SAA, block.block_index, i as u64);
        let sample = &block.estimate + &gaussian_columns(&mut rng, nt, &err_var);
        // stored as the difference so the sample identity holds without round-off
        errors.push(&sample - &block.estimate);
        samples.push(sample);
    }
    Ok(SaaSampleSet {
        estimate: block.estimate.clone(),
        samples,
        errors,
    })
}

//! Stochastic workload generation: UE arrivals, packet rates, SINR draws,
//! wireless rates and session lifetimes.

use serde::{Deserialize, Serialize};

use crate::config::SliceSpec;
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// One user session attached to a slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ue {
    pub ue_id: u64,
    pub slice_id: u32,
    /// Mean packet arrival rate (packets/step).
    pub lambda: f64,
    /// Linear SINR, sampled once at spawn and held for the lifetime.
    pub sinr: f64,
    /// Wireless transmission rate, `bandwidth * log2(1 + sinr)`.
    pub rate: f64,
    /// Transmit power in W.
    pub tx_power: f64,
    pub remaining_lifetime: u64,
}

/// Poisson-distributed count via Knuth's product-of-uniforms method.
///
/// Exact for any finite mean; means large enough to underflow `exp(-mean)`
/// are split using the additivity of independent Poisson draws.
pub fn sample_poisson(mean: f64, rng: &mut RngStream) -> Result<u64> {
    if mean < 0.0 || !mean.is_finite() {
        return Err(Error::Domain(format!("poisson mean must be non-negative, got {mean}")));
    }
    if mean == 0.0 {
        return Ok(0);
    }
    if mean > 500.0 {
        let half = mean / 2.0;
        return Ok(sample_poisson(half, rng)? + sample_poisson(mean - half, rng)?);
    }
    let limit = (-mean).exp();
    let mut count = 0u64;
    let mut product = rng.uniform();
    while product > limit {
        count += 1;
        product *= rng.uniform();
    }
    Ok(count)
}

/// Geometric lifetime on {1, 2, ...} with the given mean, by inversion.
pub fn sample_lifetime(mean: f64, rng: &mut RngStream) -> u64 {
    debug_assert!(mean >= 1.0);
    let p = 1.0 / mean;
    if p >= 1.0 {
        return 1;
    }
    let u = rng.uniform();
    // P(k) = (1-p)^(k-1) p, k >= 1.
    let k = ((1.0 - u).ln() / (1.0 - p).ln()).floor() + 1.0;
    k.max(1.0) as u64
}

/// Wireless transmission rate for a UE at the given SINR.
pub fn transmission_rate(bandwidth: f64, sinr: f64) -> f64 {
    bandwidth * (1.0 + sinr).log2()
}

/// Draws this step's new UEs for one slice.
///
/// The population count is Poisson, SINR is log-uniform over the configured
/// range, the packet rate is the slice mean, and lifetimes are geometric.
pub fn spawn_ues(
    spec: &SliceSpec,
    sinr_min: f64,
    sinr_max: f64,
    next_ue_id: &mut u64,
    arrivals_rng: &mut RngStream,
    sinr_rng: &mut RngStream,
    lifetime_rng: &mut RngStream,
) -> Result<Vec<Ue>> {
    let count = sample_poisson(spec.ue_arrival_rate, arrivals_rng)?;
    let mut ues = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let sinr = if sinr_max > sinr_min {
            sinr_rng.uniform_range(sinr_min.ln(), sinr_max.ln()).exp()
        } else {
            sinr_min
        };
        let ue = Ue {
            ue_id: *next_ue_id,
            slice_id: spec.slice_id,
            lambda: spec.arrival_rate_mean,
            sinr,
            rate: transmission_rate(spec.bandwidth, sinr),
            tx_power: spec.tx_power,
            remaining_lifetime: sample_lifetime(spec.ue_mean_lifetime, lifetime_rng),
        };
        *next_ue_id += 1;
        ues.push(ue);
    }
    Ok(ues)
}

/// Ages the population by one step; sessions hitting zero depart.
pub fn advance_lifetimes(ues: Vec<Ue>) -> (Vec<Ue>, Vec<Ue>) {
    let mut surviving = Vec::with_capacity(ues.len());
    let mut departed = Vec::new();
    for mut ue in ues {
        ue.remaining_lifetime = ue.remaining_lifetime.saturating_sub(1);
        if ue.remaining_lifetime == 0 {
            departed.push(ue);
        } else {
            surviving.push(ue);
        }
    }
    (surviving, departed)
}

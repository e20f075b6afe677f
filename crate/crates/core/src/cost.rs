//! The per-step cost engine: computation, latency and energy models, their
//! weighted total, and the reciprocal-cost reward.

use crate::error::{Error, Result};

/// Guards the reciprocal reward against a zero-cost step.
pub const REWARD_EPSILON: f64 = 1e-6;

/// Baseband computation cost in MOPTS for a set of served UEs.
///
/// Each UE contributes `theta * log2(1 + sinr)` plus the constant base
/// load `k0`.
pub fn computation_cost(sinrs: &[f64], k0: f64, theta: f64) -> Result<f64> {
    let mut total = 0.0;
    for &sinr in sinrs {
        if sinr < 0.0 || !sinr.is_finite() {
            return Err(Error::Domain(format!("SINR must be non-negative, got {sinr}")));
        }
        total += theta * (1.0 + sinr).log2();
    }
    Ok(total + sinrs.len() as f64 * k0)
}

/// True when the cloud-processing queue and every wireless queue are stable.
pub fn queue_stable(vnf_count: u32, omega: f64, mu_star: f64, ue_rates: &[(f64, f64)]) -> bool {
    f64::from(vnf_count) * mu_star > omega && ue_rates.iter().all(|&(r, lambda)| r > lambda)
}

/// Network latency in ms for one slice: VNF boot time plus, per UE, the
/// cloud-processing and wireless-transmission queueing delays.
///
/// `ue_rates` holds `(rate, lambda)` pairs; `omega` is the aggregate packet
/// arrival rate. An unstable queue saturates to `latency_cap`.
pub fn latency_cost(
    vnf_count: u32,
    omega: f64,
    mu_star: f64,
    ue_rates: &[(f64, f64)],
    boot_latency: f64,
    latency_cap: f64,
) -> Result<f64> {
    if vnf_count == 0 {
        if omega != 0.0 {
            return Err(Error::Domain(
                "latency undefined for zero VNFs with nonzero arrival rate".into(),
            ));
        }
        if ue_rates.is_empty() {
            return Ok(0.0);
        }
        return Ok(latency_cap);
    }
    let j = f64::from(vnf_count);
    if ue_rates.is_empty() {
        // The queue condition is vacuous with nothing to serve.
        return Ok(j * boot_latency);
    }
    if !queue_stable(vnf_count, omega, mu_star, ue_rates) {
        return Ok(latency_cap);
    }
    let processing = j / (j * mu_star - omega);
    let transmission: f64 = ue_rates.iter().map(|&(r, lambda)| 1.0 / (r - lambda)).sum();
    Ok(j * boot_latency + ue_rates.len() as f64 * processing + transmission)
}

/// Energy in J per step: cubic CPU power across the pool, per-VNF overhead,
/// and amplifier-corrected transmit power per UE.
pub fn energy_cost(
    cpu_loads: &[f64],
    vnf_count: u32,
    ue_tx_powers: &[f64],
    sigma_star: f64,
    rho: f64,
    psi: f64,
) -> Result<f64> {
    if rho <= 0.0 || !rho.is_finite() {
        return Err(Error::Domain(format!(
            "amplifier efficiency must be strictly positive, got {rho}"
        )));
    }
    let cpu: f64 = cpu_loads.iter().map(|&p| sigma_star * p.powi(3)).sum();
    let vnf = f64::from(vnf_count) * psi;
    let wireless: f64 = ue_tx_powers.iter().map(|&p| p / rho).sum();
    Ok(cpu + vnf + wireless)
}

/// Weighted per-UE network cost. The divisor is guarded so an empty network
/// costs the raw weighted sum rather than NaN.
pub fn total_network_cost(
    computation: f64,
    latency: f64,
    energy: f64,
    weights: (f64, f64, f64),
    active_ues: u64,
) -> f64 {
    let (w1, w2, w3) = weights;
    (w1 * computation + w2 * latency + w3 * energy) / (active_ues.max(1) as f64)
}

/// Reciprocal-cost reward, shaped by per-slice QoS and saturation penalties.
pub fn reward_from_cost(
    total_cost: f64,
    qos_violated: &[bool],
    saturated: bool,
    qos_penalty: f64,
    saturation_penalty: f64,
) -> f64 {
    let violations = qos_violated.iter().filter(|&&v| v).count() as f64;
    1.0 / (total_cost + REWARD_EPSILON)
        - qos_penalty * violations
        - saturation_penalty * f64::from(saturated)
}

/// Maps a canonical action in [-1, 1] onto the feasible scaling interval
/// `[-current_alloc, free_capacity]`. Out-of-range inputs are clamped, not
/// rejected, since exploration noise may overshoot.
pub fn clip_scaling_action(raw: f64, current_alloc: f64, free_capacity: f64) -> f64 {
    let raw = raw.clamp(-1.0, 1.0);
    -current_alloc + (raw + 1.0) / 2.0 * (current_alloc + free_capacity)
}

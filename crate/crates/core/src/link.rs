//! Zero-forcing downlink rate with equalized per-user rates.

use crate::error::{Error, Result};
use crate::geometry::CouplingStats;
use crate::system::{PilotOverhead, SystemConfig};

/// SINR scale factor `gamma_c` for a given number of active users; the
/// per-user SINR is `gamma * (M - K)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinrCoefficient {
    pub gamma: f64,
    pub users: usize,
}

pub fn sinr_coefficient(
    cfg: &SystemConfig,
    coupling: &CouplingStats,
    users: usize,
) -> Result<SinrCoefficient> {
    if users < 1 {
        return Err(Error::Domain(
            "SINR coefficient needs at least one user".into(),
        ));
    }
    let impairment = coupling.lambda_cc * cfg.total_noise_w + coupling.interference_sum;
    Ok(SinrCoefficient {
        gamma: (cfg.downlink_power_w / users as f64) / impairment,
        users,
    })
}

/// Number of pilot symbols per coherence block when `users` are active.
pub fn pilot_count(cfg: &SystemConfig, users: usize) -> usize {
    match cfg.pilot_overhead {
        PilotOverhead::CurrentUsers => users,
        PilotOverhead::FixedMaxUsers(k) => k,
    }
}

/// Average per-user rate in bit/s: `(1 - K_pilot/U) B log2(1 + gamma (M - K))`.
pub fn per_user_rate(
    cfg: &SystemConfig,
    gamma: SinrCoefficient,
    antennas: usize,
    users: usize,
) -> Result<f64> {
    if antennas <= users {
        return Err(Error::ZfViolation { antennas, users });
    }
    let pilots = pilot_count(cfg, users);
    if pilots as f64 >= cfg.coherence_block {
        return Err(Error::OverheadOverflow {
            pilots,
            block: cfg.coherence_block,
        });
    }
    let overhead = 1.0 - pilots as f64 / cfg.coherence_block;
    let dof = (antennas - users) as f64;
    Ok(overhead * cfg.bandwidth_hz * (gamma.gamma * dof).ln_1p() / std::f64::consts::LN_2)
}

/// Convenience: rate at `(antennas, users)` straight from the coupling terms.
pub fn rate_at(
    cfg: &SystemConfig,
    coupling: &CouplingStats,
    antennas: usize,
    users: usize,
) -> Result<f64> {
    let gamma = sinr_coefficient(cfg, coupling, users)?;
    per_user_rate(cfg, gamma, antennas, users)
}

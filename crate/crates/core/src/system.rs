//! Network-wide scalars shared by the link and power models.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which user count occupies pilot symbols in each coherence block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PilotOverhead {
    /// One pilot per currently served user.
    #[default]
    CurrentUsers,
    /// Pilots reserved for a fixed maximum user count.
    FixedMaxUsers(usize),
}

/// How often the ZF precoder (the `3 M K^2` Gram-matrix work) is recomputed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PrecoderUpdate {
    /// Once per coherence block: `C_{1,2} = 3B / (U L_BS)`.
    #[default]
    PerBlock,
    /// Every symbol: `C_{1,2} = 3B / L_BS`.
    PerSymbol,
}

impl PrecoderUpdate {
    pub fn as_str(self) -> &'static str {
        match self {
            PrecoderUpdate::PerBlock => "per-block",
            PrecoderUpdate::PerSymbol => "per-symbol",
        }
    }
}

impl std::str::FromStr for PrecoderUpdate {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "per-block" => Ok(Self::PerBlock),
            "per-symbol" => Ok(Self::PerSymbol),
            other => Err(format!("unknown precoder update `{other}`")),
        }
    }
}

/// Converts W/(Gbit/s) to joules per bit.
pub fn w_per_gbps_to_j_per_bit(w_per_gbps: f64) -> f64 {
    w_per_gbps * 1e-9
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) * 1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub bandwidth_hz: f64,
    pub coherence_time_s: f64,
    pub coherence_bandwidth_hz: f64,
    /// Symbols per coherence block, `U = B_c T_c`.
    pub coherence_block: f64,
    /// Total receiver noise power `B sigma^2`.
    pub total_noise_w: f64,
    /// Fixed downlink transmit power per cell, `P_c`.
    pub downlink_power_w: f64,
    pub pilot_overhead: PilotOverhead,
    /// Local oscillator, `P_SYN`.
    pub p_syn_w: f64,
    /// Per-antenna transceiver circuitry, `P_BS`.
    pub p_bs_w: f64,
    /// Site cooling, control signalling and other fixed load, `P_Oth`.
    pub p_oth_w: f64,
    pub coding_j_per_bit: f64,
    pub decoding_j_per_bit: f64,
    /// Computational efficiency `L_BS` in flops per joule.
    pub l_bs_flops_per_w: f64,
    pub precoder_update: PrecoderUpdate,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            bandwidth_hz: 20e6,
            coherence_time_s: 10e-3,
            coherence_bandwidth_hz: 180e3,
            coherence_block: 1800.0,
            total_noise_w: dbm_to_watts(-96.0),
            downlink_power_w: 20.0,
            pilot_overhead: PilotOverhead::CurrentUsers,
            p_syn_w: 2.0,
            p_bs_w: 1.0,
            p_oth_w: 18.0,
            coding_j_per_bit: w_per_gbps_to_j_per_bit(0.1),
            decoding_j_per_bit: w_per_gbps_to_j_per_bit(0.8),
            l_bs_flops_per_w: 12.8e9,
            precoder_update: PrecoderUpdate::PerBlock,
        }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("bandwidth_hz", self.bandwidth_hz),
            ("coherence_time_s", self.coherence_time_s),
            ("coherence_bandwidth_hz", self.coherence_bandwidth_hz),
            ("coherence_block", self.coherence_block),
            ("total_noise_w", self.total_noise_w),
            ("downlink_power_w", self.downlink_power_w),
            ("p_syn_w", self.p_syn_w),
            ("p_bs_w", self.p_bs_w),
            ("p_oth_w", self.p_oth_w),
            ("coding_j_per_bit", self.coding_j_per_bit),
            ("decoding_j_per_bit", self.decoding_j_per_bit),
            ("l_bs_flops_per_w", self.l_bs_flops_per_w),
        ];
        for (name, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::Validation(format!(
                    "{name} must be positive and finite, got {value}"
                )));
            }
        }
        let product = self.coherence_bandwidth_hz * self.coherence_time_s;
        if (self.coherence_block - product).abs() > 1e-9 * product {
            return Err(Error::Validation(format!(
                "coherence block U = {} differs from B_c * T_c = {product}",
                self.coherence_block
            )));
        }
        if let PilotOverhead::FixedMaxUsers(k) = self.pilot_overhead {
            if k as f64 >= self.coherence_block {
                return Err(Error::Validation(format!(
                    "max_users = {k} leaves no data symbols in a block of {}",
                    self.coherence_block
                )));
            }
        }
        Ok(())
    }

    /// `P_COD + P_DEC` in joules per bit.
    pub fn rate_coeff(&self) -> f64 {
        self.coding_j_per_bit + self.decoding_j_per_bit
    }
}

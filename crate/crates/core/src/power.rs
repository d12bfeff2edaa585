//! Base-station power consumption: amplifier input power for traditional and
//! envelope-tracking PAs, baseband processing, and the resulting energy
//! efficiency.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::CouplingStats;
use crate::link;
use crate::system::{PrecoderUpdate, SystemConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PaFamily {
    /// Traditional PA, input power `sqrt(p * P_max) / eta`.
    Tpa,
    /// Envelope-tracking PA, input power `(p + alpha P_max) / ((1 + alpha) eta)`.
    EtPa,
}

impl PaFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            PaFamily::Tpa => "tpa",
            PaFamily::EtPa => "etpa",
        }
    }
}

impl std::str::FromStr for PaFamily {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "tpa" => Ok(PaFamily::Tpa),
            "etpa" | "et-pa" => Ok(PaFamily::EtPa),
            other => Err(format!(
                "unknown PA family `{other}` (expected tpa or etpa)"
            )),
        }
    }
}

/// Maximum output power of the amplifiers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PmaxPolicy {
    /// A fixed `P_max,PA` in watts, shared by all antennas.
    Fixed(f64),
    /// `P_max,PA` follows the actual per-antenna mean power plus the PAPR
    /// headroom; the upper bound on achievable efficiency.
    Variable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PaSpec {
    pub family: PaFamily,
    pub p_max: PmaxPolicy,
    /// Peak efficiency, reached at `P_max,PA`.
    pub eta: f64,
    /// ET-PA shape parameter.
    pub alpha: f64,
    /// PAPR headroom between maximum and mean output.
    pub headroom_db: f64,
}

impl PaSpec {
    pub fn new(family: PaFamily, p_max: PmaxPolicy) -> Self {
        PaSpec {
            family,
            p_max,
            eta: 0.8,
            alpha: 0.0082,
            headroom_db: 8.0,
        }
    }

    pub fn variable(family: PaFamily) -> Self {
        Self::new(family, PmaxPolicy::Variable)
    }

    pub fn fixed(family: PaFamily, p_max_w: f64) -> Self {
        Self::new(family, PmaxPolicy::Fixed(p_max_w))
    }

    pub fn with_p_max(self, p_max: PmaxPolicy) -> Self {
        PaSpec { p_max, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::Validation(format!(
                "PA efficiency eta must be in (0, 1], got {}",
                self.eta
            )));
        }
        if self.family == PaFamily::EtPa && !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Validation(format!(
                "ET-PA alpha must be positive, got {}",
                self.alpha
            )));
        }
        if !(self.headroom_db >= 0.0 && self.headroom_db.is_finite()) {
            return Err(Error::Validation(format!(
                "headroom_db must be non-negative, got {}",
                self.headroom_db
            )));
        }
        if let PmaxPolicy::Fixed(p) = self.p_max {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::Validation(format!(
                    "p_max_pa must be positive, got {p}"
                )));
            }
        }
        Ok(())
    }

    /// Linear PAPR headroom factor `10^(headroom_db / 10)`.
    pub fn headroom_factor(&self) -> f64 {
        10f64.powf(self.headroom_db / 10.0)
    }

    /// `P_max,PA` the amplifier must have when each of `antennas` carries an
    /// equal share of `total_w`.
    pub fn p_max_for(&self, total_w: f64, antennas: usize) -> f64 {
        match self.p_max {
            PmaxPolicy::Fixed(p) => p,
            PmaxPolicy::Variable => total_w / antennas as f64 * self.headroom_factor(),
        }
    }

    /// Largest mean output per amplifier, `P_max,PA 10^(-headroom/10)`.
    pub fn max_mean_output(&self) -> Option<f64> {
        match self.p_max {
            PmaxPolicy::Fixed(p) => Some(p / self.headroom_factor()),
            PmaxPolicy::Variable => None,
        }
    }

    /// Fewest amplifiers that can deliver `total_w` within the headroom.
    pub fn min_active_antennas(&self, total_w: f64) -> usize {
        match self.p_max {
            PmaxPolicy::Fixed(p) => {
                let exact = total_w * self.headroom_factor() / p;
                // absorb rounding when P_max was itself derived from an antenna count
                ((exact * (1.0 - 1e-12)).ceil() as usize).max(1)
            }
            PmaxPolicy::Variable => 1,
        }
    }

    /// `C_1^* = alpha / ((1 + alpha) eta)`.
    pub fn c1_star(&self) -> f64 {
        self.alpha / ((1.0 + self.alpha) * self.eta)
    }
}

fn input_power(pa: &PaSpec, mean_w: f64, p_max_w: f64) -> f64 {
    match pa.family {
        PaFamily::Tpa => (mean_w * p_max_w).sqrt() / pa.eta,
        PaFamily::EtPa => (mean_w + pa.alpha * p_max_w) / ((1.0 + pa.alpha) * pa.eta),
    }
}

/// Input power of one amplifier delivering mean output `mean_w`.
pub fn pa_input_power(pa: &PaSpec, mean_w: f64) -> Result<f64> {
    if !(mean_w >= 0.0) {
        return Err(Error::Domain(format!(
            "mean output must be non-negative, got {mean_w}"
        )));
    }
    let p_max = match pa.p_max {
        PmaxPolicy::Fixed(p) => {
            let limit = p / pa.headroom_factor();
            if mean_w > limit * (1.0 + 1e-12) {
                return Err(Error::HeadroomExceeded {
                    mean_w,
                    limit_w: limit,
                });
            }
            p
        }
        PmaxPolicy::Variable => mean_w * pa.headroom_factor(),
    };
    Ok(input_power(pa, mean_w, p_max))
}

/// [`pa_input_power`] without the headroom check, for probing the model at
/// operating points a real amplifier cannot reach (e.g. `p = P_max,PA`).
pub fn pa_input_power_unchecked(pa: &PaSpec, mean_w: f64) -> f64 {
    let p_max = pa.p_max_for(mean_w, 1);
    input_power(pa, mean_w, p_max)
}

/// Total input power of `antennas` amplifiers sharing `total_w` equally.
pub fn pa_array_power(pa: &PaSpec, total_w: f64, antennas: usize) -> Result<f64> {
    if antennas == 0 {
        return Err(Error::Domain("need at least one active antenna".into()));
    }
    let per_antenna = total_w / antennas as f64;
    Ok(antennas as f64 * pa_input_power(pa, per_antenna)?)
}

/// Baseband polynomial coefficients for `users` active users, excluding
/// the coding/decoding term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasebandCoeffs {
    /// `sum_i C_{0,i} K^i`
    pub constant: f64,
    /// `sum_i C_{1,i} K^i`, per active antenna
    pub per_antenna: f64,
}

pub fn baseband_coeffs(cfg: &SystemConfig, users: usize) -> BasebandCoeffs {
    let b = cfg.bandwidth_hz;
    let u = cfg.coherence_block;
    let l = cfg.l_bs_flops_per_w;
    let k = users as f64;
    let c03 = b / (3.0 * u * l);
    let c11 = b / l * (2.0 + 1.0 / u);
    let c12 = match cfg.precoder_update {
        PrecoderUpdate::PerBlock => 3.0 * b / (u * l),
        PrecoderUpdate::PerSymbol => 3.0 * b / l,
    };
    BasebandCoeffs {
        constant: cfg.p_syn_w + c03 * k * k * k,
        per_antenna: cfg.p_bs_w + c11 * k + c12 * k * k,
    }
}

/// Baseband processing power, including coding and decoding at rate `rate_bps` per user.
pub fn baseband_power(cfg: &SystemConfig, antennas: usize, users: usize, rate_bps: f64) -> f64 {
    let bb = baseband_coeffs(cfg, users);
    bb.constant + antennas as f64 * bb.per_antenna + cfg.rate_coeff() * users as f64 * rate_bps
}

/// `P_PA + P_BB + P_Oth`.
pub fn total_power(
    cfg: &SystemConfig,
    pa: &PaSpec,
    antennas: usize,
    users: usize,
    rate_bps: f64,
) -> Result<f64> {
    let pa_w = pa_array_power(pa, cfg.downlink_power_w, antennas)?;
    Ok(pa_w + baseband_power(cfg, antennas, users, rate_bps) + cfg.p_oth_w)
}

/// Sum throughput over total power, bit/J.
pub fn energy_efficiency(
    cfg: &SystemConfig,
    pa: &PaSpec,
    coupling: &CouplingStats,
    antennas: usize,
    users: usize,
) -> Result<f64> {
    if users == 0 {
        return Ok(0.0);
    }
    let rate = link::rate_at(cfg, coupling, antennas, users)?;
    Ok(users as f64 * rate / total_power(cfg, pa, antennas, users, rate)?)
}

/// Decomposition `P_total = c0 + c1 M + sqrt(c2 M) + rate_coeff K R` at fixed `K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerCoeffs {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c1_star: f64,
    pub rate_coeff: f64,
}

impl PowerCoeffs {
    pub fn total(&self, antennas: usize, users: usize, rate_bps: f64) -> f64 {
        let m = antennas as f64;
        self.c0 + self.c1 * m + (self.c2 * m).sqrt() + self.rate_coeff * users as f64 * rate_bps
    }
}

pub fn power_coeffs(cfg: &SystemConfig, pa: &PaSpec, users: usize) -> PowerCoeffs {
    let bb = baseband_coeffs(cfg, users);
    let p_c = cfg.downlink_power_w;
    let c1_star = match pa.family {
        PaFamily::EtPa => pa.c1_star(),
        PaFamily::Tpa => 0.0,
    };
    // (constant PA part, per-antenna PA part, sqrt-law coefficient)
    let (pa_const, pa_linear, c2) = match (pa.family, pa.p_max) {
        (PaFamily::EtPa, PmaxPolicy::Fixed(p)) => {
            (p_c / ((1.0 + pa.alpha) * pa.eta), c1_star * p, 0.0)
        }
        (PaFamily::EtPa, PmaxPolicy::Variable) => (
            p_c / ((1.0 + pa.alpha) * pa.eta) + c1_star * p_c * pa.headroom_factor(),
            0.0,
            0.0,
        ),
        (PaFamily::Tpa, PmaxPolicy::Fixed(p)) => (0.0, 0.0, p_c * p / (pa.eta * pa.eta)),
        (PaFamily::Tpa, PmaxPolicy::Variable) => {
            (p_c * pa.headroom_factor().sqrt() / pa.eta, 0.0, 0.0)
        }
    };
    PowerCoeffs {
        c0: pa_const + bb.constant + cfg.p_oth_w,
        c1: pa_linear + bb.per_antenna,
        c2,
        c1_star,
        rate_coeff: cfg.rate_coeff(),
    }
}

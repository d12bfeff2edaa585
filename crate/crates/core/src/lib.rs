//! Energy-efficiency model of a load-adaptive massive-MIMO downlink.
//!
//! The pipeline runs from cell geometry through a zero-forcing link model
//! and a base-station power model to the EE-optimal antenna count per user
//! state, a loss-queue model of daily traffic, and finally the choice of
//! the amplifier maximum output power `P_max,PA` that maximizes the
//! day-weighted energy efficiency.
//!
//! ```
//! use mimo_pa::{optimizer, power::{PaFamily, PaSpec}, CouplingStats, SystemConfig};
//!
//! let cfg = SystemConfig::default();
//! let coupling = CouplingStats { lambda_cc: 1.19e13, interference_sum: 0.2 };
//! let pa = PaSpec::variable(PaFamily::EtPa);
//! let m = optimizer::optimal_antennas(&cfg, &pa, &coupling, 40, 2000).unwrap();
//! assert!(m > 40);
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dimensioning;
pub mod error;
pub mod export;
pub mod geometry;
pub mod lambert;
pub mod link;
pub mod optimizer;
pub mod power;
pub mod system;
pub mod traffic;

pub use config::{load_config, Manifest, RunConfig};
pub use error::{Error, Result};
pub use geometry::CouplingStats;
pub use system::SystemConfig;

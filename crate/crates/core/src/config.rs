//! Flat `key = value` run configuration.
//!
//! Every key is optional; missing keys keep the reference defaults. Lines
//! starting with `#` and trailing `# ...` comments are ignored.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dimensioning::TrafficOptions;
use crate::error::{Error, Result};
use crate::geometry::{self, CellLayout, CouplingStats, InterferenceNormalization, TestGrid};
use crate::optimizer::ScanOptions;
use crate::power::{PaFamily, PaSpec, PmaxPolicy};
use crate::system::{self, PilotOverhead, PrecoderUpdate, SystemConfig};
use crate::traffic::DailyProfile;

/// Antenna count behind dB-labelled `P_max,PA` values: `"8dB"` is
/// `(P_c / 20) 10^0.8`, the smallest amplifier 20 antennas can share `P_c` with.
pub const DB_LABEL_REFERENCE_ANTENNAS: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProfileSource {
    Builtin(String),
    File(PathBuf),
}

impl ProfileSource {
    pub fn load(&self) -> Result<DailyProfile> {
        match self {
            ProfileSource::Builtin(name) => DailyProfile::builtin(name),
            ProfileSource::File(path) => DailyProfile::from_file(path),
        }
    }

    fn render(&self) -> String {
        match self {
            ProfileSource::Builtin(name) => format!("builtin:{name}"),
            ProfileSource::File(path) => path.display().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub pa: PaSpec,
    pub interference_normalization: InterferenceNormalization,
    pub cell_radius_m: f64,
    pub min_distance_m: f64,
    pub grid_size: usize,
    pub grid_seed: u64,
    pub traffic: TrafficOptions,
    pub scan: ScanOptions,
    pub profile: ProfileSource,
    /// Not part of the canonical form: moving outputs does not change results.
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            system: SystemConfig::default(),
            pa: PaSpec::variable(PaFamily::EtPa),
            interference_normalization: InterferenceNormalization::default(),
            cell_radius_m: 500.0,
            min_distance_m: 35.0,
            grid_size: 15_000,
            grid_seed: 1,
            traffic: TrafficOptions::default(),
            scan: ScanOptions::default(),
            profile: ProfileSource::Builtin("earth".into()),
            output_dir: PathBuf::from("out"),
        }
    }
}

/// Parses a `P_max,PA` label: `variable`, `<x>dB`, `<x>W` or a bare number of watts.
pub fn parse_p_max(label: &str, downlink_power_w: f64) -> std::result::Result<PmaxPolicy, String> {
    let s = label.trim();
    if s.eq_ignore_ascii_case("variable") {
        return Ok(PmaxPolicy::Variable);
    }
    let lower = s.to_ascii_lowercase();
    let watts = if let Some(db) = lower.strip_suffix("db") {
        let db: f64 = db
            .trim()
            .parse()
            .map_err(|_| format!("bad dB value in `{s}`"))?;
        downlink_power_w / DB_LABEL_REFERENCE_ANTENNAS * 10f64.powf(db / 10.0)
    } else {
        let w = lower.strip_suffix('w').unwrap_or(&lower);
        w.trim()
            .parse()
            .map_err(|_| format!("bad P_max,PA value `{s}`"))?
    };
    if !(watts > 0.0 && f64::is_finite(watts)) {
        return Err(format!("P_max,PA must be positive, got `{s}`"));
    }
    Ok(PmaxPolicy::Fixed(watts))
}

fn render_p_max(p: PmaxPolicy) -> String {
    match p {
        PmaxPolicy::Variable => "variable".into(),
        PmaxPolicy::Fixed(w) => format!("{w}W"),
    }
}

struct Line<'a> {
    origin: &'a Path,
    number: usize,
    value: &'a str,
}

impl Line<'_> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.origin.to_path_buf(),
            line: self.number,
            message: message.into(),
        }
    }

    fn f64(&self) -> Result<f64> {
        self.value
            .parse()
            .map_err(|_| self.err(format!("expected a number, found `{}`", self.value)))
    }

    fn usize(&self) -> Result<usize> {
        self.value.parse().map_err(|_| {
            self.err(format!(
                "expected a non-negative integer, found `{}`",
                self.value
            ))
        })
    }

    fn u64(&self) -> Result<u64> {
        self.value.parse().map_err(|_| {
            self.err(format!(
                "expected a non-negative integer, found `{}`",
                self.value
            ))
        })
    }

    fn parsed<T: std::str::FromStr<Err = String>>(&self) -> Result<T> {
        self.value.parse().map_err(|e: String| self.err(e))
    }
}

/// Keys that set the same quantity in different units.
fn alias_group(key: &str) -> &str {
    match key {
        "noise_w" => "noise_dbm",
        "p_cod_j_per_bit" => "p_cod_w_per_gbps",
        "p_dec_j_per_bit" => "p_dec_w_per_gbps",
        "l_bs_flops_per_w" => "l_bs_gflops_per_w",
        other => other,
    }
}

#[derive(Clone, Copy, PartialEq)]
enum PilotMode {
    Current,
    Max,
}

/// Parses configuration text; `origin` is used in error messages and to
/// resolve a relative profile path.
pub fn parse_config(text: &str, origin: &Path) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut p_max_label: Option<(String, usize)> = None;
    let mut coherence_block: Option<f64> = None;
    let mut pilot_mode = PilotMode::Current;
    let mut max_users: Option<usize> = None;
    let mut seen = std::collections::HashMap::new();
    let base_dir = origin.parent().unwrap_or(Path::new(""));

    for (i, raw) in text.lines().enumerate() {
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let number = i + 1;
        let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
            path: origin.to_path_buf(),
            line: number,
            message: format!("expected `key = value`, found `{content}`"),
        })?;
        let key = key.trim();
        let line = Line {
            origin,
            number,
            value: value.trim(),
        };
        if let Some(previous) = seen.insert(alias_group(key), key) {
            return Err(line.err(format!("`{key}` repeats `{previous}`")));
        }
        let s = &mut cfg.system;
        match key {
            "bandwidth_hz" => s.bandwidth_hz = line.f64()?,
            "coherence_time_s" => s.coherence_time_s = line.f64()?,
            "coherence_bandwidth_hz" => s.coherence_bandwidth_hz = line.f64()?,
            "coherence_block" => coherence_block = Some(line.f64()?),
            "noise_dbm" => s.total_noise_w = system::dbm_to_watts(line.f64()?),
            "noise_w" => s.total_noise_w = line.f64()?,
            "downlink_power_w" => s.downlink_power_w = line.f64()?,
            "pilot_overhead" => {
                pilot_mode = match line.value {
                    "current-users" => PilotMode::Current,
                    "max-users" => PilotMode::Max,
                    other => {
                        return Err(line.err(format!(
                            "unknown pilot_overhead `{other}` (expected current-users or max-users)"
                        )))
                    }
                }
            }
            "max_users" => max_users = Some(line.usize()?),
            "precoder_update" => s.precoder_update = line.parsed::<PrecoderUpdate>()?,
            "p_syn_w" => s.p_syn_w = line.f64()?,
            "p_bs_w" => s.p_bs_w = line.f64()?,
            "p_oth_w" => s.p_oth_w = line.f64()?,
            "p_cod_w_per_gbps" => s.coding_j_per_bit = system::w_per_gbps_to_j_per_bit(line.f64()?),
            "p_dec_w_per_gbps" => {
                s.decoding_j_per_bit = system::w_per_gbps_to_j_per_bit(line.f64()?)
            }
            "p_cod_j_per_bit" => s.coding_j_per_bit = line.f64()?,
            "p_dec_j_per_bit" => s.decoding_j_per_bit = line.f64()?,
            "l_bs_gflops_per_w" => s.l_bs_flops_per_w = line.f64()? * 1e9,
            "l_bs_flops_per_w" => s.l_bs_flops_per_w = line.f64()?,
            "interference_normalization" => cfg.interference_normalization = line.parsed()?,
            "pa_family" => cfg.pa.family = line.parsed::<PaFamily>()?,
            "eta" => cfg.pa.eta = line.f64()?,
            "alpha" => cfg.pa.alpha = line.f64()?,
            "headroom_db" => cfg.pa.headroom_db = line.f64()?,
            "p_max_pa" => p_max_label = Some((line.value.to_string(), number)),
            "cell_radius_m" => cfg.cell_radius_m = line.f64()?,
            "min_distance_m" => cfg.min_distance_m = line.f64()?,
            "grid_size" => cfg.grid_size = line.usize()?,
            "grid_seed" => cfg.grid_seed = line.u64()?,
            "traffic_per_user_bits" => cfg.traffic.traffic_per_user_bits = line.f64()?,
            "target_blocking" => cfg.traffic.target_blocking = line.f64()?,
            "k_scan_max" => cfg.scan.k_scan_max = line.usize()?,
            "stop_window" => cfg.scan.stop_window = line.usize()?,
            "m_search_max" => {
                cfg.scan.m_search_max = line.usize()?;
                cfg.traffic.m_search_max = cfg.scan.m_search_max;
            }
            "profile" => {
                cfg.profile = match line.value.strip_prefix("builtin:") {
                    Some(name) => ProfileSource::Builtin(name.to_string()),
                    None => ProfileSource::File(base_dir.join(line.value)),
                }
            }
            "output_dir" => cfg.output_dir = base_dir.join(line.value),
            other => return Err(line.err(format!("unknown key `{other}`"))),
        }
    }

    // coherence block follows B_c T_c unless given, in which case it must agree
    let product = cfg.system.coherence_bandwidth_hz * cfg.system.coherence_time_s;
    cfg.system.coherence_block = coherence_block.unwrap_or(product);
    cfg.system.pilot_overhead = match (pilot_mode, max_users) {
        (PilotMode::Current, _) => PilotOverhead::CurrentUsers,
        (PilotMode::Max, Some(k)) => PilotOverhead::FixedMaxUsers(k),
        (PilotMode::Max, None) => {
            return Err(Error::Validation(
                "pilot_overhead = max-users requires max_users".into(),
            ))
        }
    };
    if let Some((label, number)) = p_max_label {
        cfg.pa.p_max =
            parse_p_max(&label, cfg.system.downlink_power_w).map_err(|message| Error::Parse {
                path: origin.to_path_buf(),
                line: number,
                message,
            })?;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text, path)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.pa.validate()?;
        if !(self.min_distance_m > 0.0 && self.min_distance_m < self.cell_radius_m) {
            return Err(Error::InvalidRadius {
                d_max: self.cell_radius_m,
                d_min: self.min_distance_m,
            });
        }
        if self.grid_size == 0 {
            return Err(Error::Validation("grid_size must be at least 1".into()));
        }
        let t = &self.traffic;
        if !(t.traffic_per_user_bits > 0.0 && t.traffic_per_user_bits.is_finite()) {
            return Err(Error::Validation(format!(
                "traffic_per_user_bits must be positive, got {}",
                t.traffic_per_user_bits
            )));
        }
        if !(t.target_blocking > 0.0 && t.target_blocking < 1.0) {
            return Err(Error::Validation(format!(
                "target_blocking must lie in (0, 1), got {}",
                t.target_blocking
            )));
        }
        if self.scan.k_scan_max == 0 || self.scan.m_search_max < 2 {
            return Err(Error::Validation(
                "k_scan_max must be positive and m_search_max at least 2".into(),
            ));
        }
        if let ProfileSource::Builtin(name) = &self.profile {
            if !DailyProfile::builtin_names().any(|n| n == name) {
                return Err(Error::Validation(format!(
                    "no bundled profile named `{name}`"
                )));
            }
        }
        Ok(())
    }

    /// Canonical text form; parsing it back yields the same configuration.
    pub fn to_config_string(&self) -> String {
        let s = &self.system;
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("bandwidth_hz", s.bandwidth_hz.to_string());
        kv("coherence_time_s", s.coherence_time_s.to_string());
        kv(
            "coherence_bandwidth_hz",
            s.coherence_bandwidth_hz.to_string(),
        );
        kv("coherence_block", s.coherence_block.to_string());
        kv("noise_w", s.total_noise_w.to_string());
        kv("downlink_power_w", s.downlink_power_w.to_string());
        match s.pilot_overhead {
            PilotOverhead::CurrentUsers => kv("pilot_overhead", "current-users".into()),
            PilotOverhead::FixedMaxUsers(k) => {
                kv("pilot_overhead", "max-users".into());
                kv("max_users", k.to_string());
            }
        }
        kv("precoder_update", s.precoder_update.as_str().into());
        kv("p_syn_w", s.p_syn_w.to_string());
        kv("p_bs_w", s.p_bs_w.to_string());
        kv("p_oth_w", s.p_oth_w.to_string());
        kv("p_cod_j_per_bit", s.coding_j_per_bit.to_string());
        kv("p_dec_j_per_bit", s.decoding_j_per_bit.to_string());
        kv("l_bs_flops_per_w", s.l_bs_flops_per_w.to_string());
        kv(
            "interference_normalization",
            self.interference_normalization.as_str().into(),
        );
        kv("pa_family", self.pa.family.as_str().into());
        kv("eta", self.pa.eta.to_string());
        kv("alpha", self.pa.alpha.to_string());
        kv("headroom_db", self.pa.headroom_db.to_string());
        kv("p_max_pa", render_p_max(self.pa.p_max));
        kv("cell_radius_m", self.cell_radius_m.to_string());
        kv("min_distance_m", self.min_distance_m.to_string());
        kv("grid_size", self.grid_size.to_string());
        kv("grid_seed", self.grid_seed.to_string());
        kv(
            "traffic_per_user_bits",
            self.traffic.traffic_per_user_bits.to_string(),
        );
        kv("target_blocking", self.traffic.target_blocking.to_string());
        kv("k_scan_max", self.scan.k_scan_max.to_string());
        kv("stop_window", self.scan.stop_window.to_string());
        kv("m_search_max", self.scan.m_search_max.to_string());
        kv("profile", self.profile.render());
        out
    }

    /// SHA-256 of the canonical text, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_config_string().as_bytes()))
    }

    pub fn layout(&self) -> Result<CellLayout> {
        geometry::build_layout(self.cell_radius_m, self.min_distance_m)
    }

    pub fn grid(&self, layout: &CellLayout) -> Result<TestGrid> {
        geometry::sample_grid(layout, self.grid_size, self.grid_seed)
    }

    pub fn coupling(&self) -> Result<CouplingStats> {
        let layout = self.layout()?;
        let grid = self.grid(&layout)?;
        geometry::coupling_stats(
            &layout,
            &grid,
            self.system.downlink_power_w,
            self.interference_normalization,
        )
    }

    /// Hash of just the inputs that determine [`RunConfig::coupling`].
    pub fn coupling_key(&self) -> String {
        let key = format!(
            "{}|{}|{}|{}|{}|{}",
            self.cell_radius_m,
            self.min_distance_m,
            self.grid_size,
            self.grid_seed,
            self.interference_normalization.as_str(),
            self.system.downlink_power_w
        );
        hex::encode(Sha256::digest(key.as_bytes()))
    }
}

pub const MANIFEST_VERSION_KEY: &str = "# version: ";
pub const MANIFEST_HASH_KEY: &str = "# config_sha256: ";
pub const MANIFEST_COMMAND_KEY: &str = "# command: ";

/// Run manifest: the canonical configuration plus a comment header carrying
/// the tool version, the configuration hash and the command that was run.
/// It is itself a valid configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config_hash: String,
    pub command: serde_json::Value,
    pub config: RunConfig,
}

impl Manifest {
    pub fn new(config: &RunConfig, command: serde_json::Value) -> Self {
        Manifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config.hash(),
            command,
            config: config.clone(),
        }
    }

    pub fn render(&self) -> String {
        format!(
            "# mimo-pa run manifest\n{MANIFEST_VERSION_KEY}{}\n{MANIFEST_HASH_KEY}{}\n{MANIFEST_COMMAND_KEY}{}\n{}",
            self.version,
            self.config_hash,
            self.command,
            self.config.to_config_string()
        )
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let header = |prefix: &str| {
            text.lines()
                .find_map(|l| l.strip_prefix(prefix))
                .map(str::trim)
                .ok_or_else(|| {
                    Error::Validation(format!("manifest is missing `{}`", prefix.trim()))
                })
        };
        let version = header(MANIFEST_VERSION_KEY)?.to_string();
        let config_hash = header(MANIFEST_HASH_KEY)?.to_string();
        let command = serde_json::from_str(header(MANIFEST_COMMAND_KEY)?)?;
        let config = parse_config(text, origin)?;
        if config.hash() != config_hash {
            return Err(Error::Validation(format!(
                "manifest hash {config_hash} does not match its configuration ({})",
                config.hash()
            )));
        }
        Ok(Manifest {
            version,
            config_hash,
            command,
            config,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path)
    }
}

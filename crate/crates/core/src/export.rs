//! CSV and JSON output. Column names carry their units.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::dimensioning::{BaselineComparison, DimensioningReport};
use crate::error::Result;
use crate::geometry::{CouplingStats, PointGain};
use crate::optimizer::{GlobalOptimum, LoadAdaptiveTable, OptimumPoint};
use crate::traffic::StateDistribution;

/// Shortest round-trip text, in exponent form for very small or large magnitudes.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().from_writer(w)
}

fn state_header(prefix: &str, states: usize) -> Vec<String> {
    std::iter::once(prefix.to_string())
        .chain((0..states).map(|n| format!("pi_{n}")))
        .collect()
}

pub fn write_grid<W: Write>(w: W, points: &[PointGain]) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["x_m", "y_m", "serving_gain", "interference_ratio_sum"])?;
    for p in points {
        out.write_record([
            num(p.x_m),
            num(p.y_m),
            num(p.serving_gain),
            num(p.interference_ratio_sum),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_coupling<W: Write>(w: W, stats: &CouplingStats) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["lambda_cc", "interference_sum_W"])?;
    out.write_record([num(stats.lambda_cc), num(stats.interference_sum)])?;
    out.flush()?;
    Ok(())
}

/// One labelled optimum-EE curve per `P_max,PA` setting.
pub fn write_ee_sweep<W: Write>(w: W, curves: &[(String, Vec<OptimumPoint>)]) -> Result<()> {
    let mut out = writer(w);
    out.write_record([
        "K_users",
        "p_max_pa_label",
        "M_opt_antennas",
        "EE_bits_per_joule",
    ])?;
    for (label, curve) in curves {
        for p in curve {
            out.write_record([
                p.users.to_string(),
                label.clone(),
                p.antennas.to_string(),
                num(p.ee_bits_per_joule),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_global_optimum<W: Write>(w: W, opt: &GlobalOptimum) -> Result<()> {
    let mut out = writer(w);
    out.write_record([
        "M_gopt_antennas",
        "K_gopt_users",
        "EE_bits_per_joule",
        "M_over_K",
    ])?;
    out.write_record([
        opt.m_gopt.to_string(),
        opt.k_gopt.to_string(),
        num(opt.ee_bits_per_joule),
        num(opt.m_gopt as f64 / opt.k_gopt as f64),
    ])?;
    out.flush()?;
    Ok(())
}

/// One row per load: `load, pi_0, ..., pi_m`.
pub fn write_load_distributions<W: Write>(w: W, rows: &[(f64, StateDistribution)]) -> Result<()> {
    let mut out = writer(w);
    let states = rows.first().map_or(0, |(_, d)| d.pi.len());
    out.write_record(state_header("load_fraction", states))?;
    for (load, d) in rows {
        out.write_record(std::iter::once(num(*load)).chain(d.pi.iter().map(|p| num(*p))))?;
    }
    out.flush()?;
    Ok(())
}

/// A 24 x (m + 1) table of hourly distributions.
pub fn write_hourly<W: Write>(w: W, hourly: &[StateDistribution]) -> Result<()> {
    let mut out = writer(w);
    let states = hourly.first().map_or(0, |d| d.pi.len());
    out.write_record(state_header("hour", states))?;
    for (h, d) in hourly.iter().enumerate() {
        out.write_record(std::iter::once(h.to_string()).chain(d.pi.iter().map(|p| num(*p))))?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_table<W: Write>(w: W, table: &LoadAdaptiveTable) -> Result<()> {
    let mut out = writer(w);
    out.write_record([
        "n_users",
        "M_antennas",
        "rate_bps",
        "EE_bits_per_joule",
        "total_power_W",
    ])?;
    for r in &table.rows {
        out.write_record([
            r.users.to_string(),
            r.antennas.to_string(),
            num(r.rate_bps),
            num(r.ee_bits_per_joule),
            num(r.total_power_w),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_dimensioning<W: Write>(w: W, report: &DimensioningReport) -> Result<()> {
    let mut out = writer(w);
    out.write_record([
        "p_max_pa_W",
        "weighted_ee_bits_per_joule",
        "profile_name",
        "pa_family",
        "min_active_antennas",
        "lambda_max_per_s",
    ])?;
    for c in &report.candidates {
        out.write_record([
            num(c.p_max_pa),
            num(c.weighted_ee),
            report.profile_name.clone(),
            report.family.as_str().to_string(),
            c.min_active_antennas.to_string(),
            num(c.lambda_max),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_baseline_states<W: Write>(w: W, cmp: &BaselineComparison) -> Result<()> {
    let mut out = writer(w);
    out.write_record([
        "n_users",
        "adaptive_M_antennas",
        "adaptive_EE_bits_per_joule",
        "fixed_M_antennas",
        "fixed_EE_bits_per_joule",
    ])?;
    for s in &cmp.states {
        out.write_record([
            s.users.to_string(),
            s.adaptive_antennas.to_string(),
            num(s.adaptive_ee),
            s.fixed_antennas.to_string(),
            num(s.fixed_ee),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn write_csv_file(path: &Path, f: impl FnOnce(std::fs::File) -> Result<()>) -> Result<()> {
    f(std::fs::File::create(path)?)
}

/// On-disk cache of coupling statistics, keyed by the inputs that produce them.
#[derive(Debug, Clone)]
pub struct CouplingCache {
    dir: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    key: String,
    stats: CouplingStats,
}

impl CouplingCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        CouplingCache { dir: dir.into() }
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("coupling-{key}.json"))
    }

    /// Cached statistics for `cfg`, computing and storing them on a miss.
    /// Returns whether the value came from the cache.
    pub fn get_or_compute(&self, cfg: &RunConfig) -> Result<(CouplingStats, bool)> {
        let key = cfg.coupling_key();
        let path = self.path(&key);
        if let Ok(text) = std::fs::read_to_string(&path) {
            if let Ok(entry) = serde_json::from_str::<CacheEntry>(&text) {
                if entry.key == key {
                    return Ok((entry.stats, true));
                }
            }
        }
        let stats = cfg.coupling()?;
        std::fs::create_dir_all(&self.dir)?;
        write_json(&path, &CacheEntry { key, stats })?;
        Ok((stats, false))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv_string(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> String {
        let mut buf = Vec::new();
        f(&mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn headers_and_rows() {
        let d = StateDistribution {
            pi: vec![0.4, 0.4, 0.2],
        };
        let text =
            csv_string(|b| write_load_distributions(b, &[(0.5, d.clone()), (1.0, d.clone())]));
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "load_fraction,pi_0,pi_1,pi_2");
        assert_eq!(lines[2], "1,0.4,0.4,0.2");
        assert_eq!(lines.len(), 3);

        let text = csv_string(|b| write_hourly(b, &vec![d; 24]));
        assert_eq!(text.lines().count(), 25);
        assert!(text.starts_with("hour,pi_0"));
    }

    #[test]
    fn coupling_cache_hits() {
        let dir = std::env::temp_dir().join(format!("mimo-pa-cache-test-{}", std::process::id()));
        let cache = CouplingCache::new(&dir);
        let cfg = crate::config::parse_config("grid_size = 500", Path::new("x.cfg")).unwrap();
        let (a, hit_a) = cache.get_or_compute(&cfg).unwrap();
        let (b, hit_b) = cache.get_or_compute(&cfg).unwrap();
        assert!(!hit_a && hit_b);
        assert_eq!(a, b);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}

//! Energy-efficiency-optimal antenna counts.
//!
//! For an ET-PA the optimum over a continuous antenna count has a closed form
//! in the principal Lambert W branch; for a TPA the `sqrt(M)` term rules that
//! out and the optimum comes from an exhaustive scan. Both are constrained
//! to `M >= K + 1` (zero forcing) and to the minimum number of amplifiers
//! that can deliver the downlink power within their headroom.

use std::f64::consts::E;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::CouplingStats;
use crate::lambert::lambert_w0;
use crate::link::{self, SinrCoefficient};
use crate::power::{self, PaFamily, PaSpec};
use crate::system::SystemConfig;

/// Limits of the antenna and user sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    /// Largest user count visited by the global sweep.
    pub k_scan_max: usize,
    /// EE must keep falling for this many users past the best one.
    pub stop_window: usize,
    /// Ceiling of the exhaustive antenna search.
    pub m_search_max: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            k_scan_max: 300,
            stop_window: 20,
            m_search_max: 2000,
        }
    }
}

/// EE evaluator at a fixed user count.
struct EeAt<'a> {
    cfg: &'a SystemConfig,
    pa: &'a PaSpec,
    gamma: SinrCoefficient,
    users: usize,
}

impl<'a> EeAt<'a> {
    fn new(
        cfg: &'a SystemConfig,
        pa: &'a PaSpec,
        coupling: &CouplingStats,
        users: usize,
    ) -> Result<Self> {
        Ok(EeAt {
            cfg,
            pa,
            gamma: link::sinr_coefficient(cfg, coupling, users)?,
            users,
        })
    }

    fn ee(&self, antennas: usize) -> Result<f64> {
        let rate = link::per_user_rate(self.cfg, self.gamma, antennas, self.users)?;
        let total = power::total_power(self.cfg, self.pa, antennas, self.users, rate)?;
        Ok(self.users as f64 * rate / total)
    }
}

/// Smallest admissible antenna count for `users` users.
pub fn antenna_floor(cfg: &SystemConfig, pa: &PaSpec, users: usize) -> usize {
    (users + 1).max(pa.min_active_antennas(cfg.downlink_power_w))
}

/// Continuous EE-maximizing antenna count of `K R / (c0 + c1 M)`:
///
/// `M = (exp(W0((gamma c0 - (1 - K gamma) c1) / (c1 e)) + 1) - (1 - K gamma)) / gamma`
pub fn closed_form_antennas(gamma: f64, users: usize, c0: f64, c1: f64) -> Result<f64> {
    if !(gamma > 0.0 && c1 > 0.0 && c0 >= 0.0) {
        return Err(Error::Domain(format!(
            "closed form needs gamma > 0, c1 > 0, c0 >= 0 (got {gamma}, {c1}, {c0})"
        )));
    }
    let shift = 1.0 - users as f64 * gamma;
    let arg = (gamma * c0 - shift * c1) / (c1 * E);
    let w = lambert_w0(arg)?;
    Ok(((w + 1.0).exp() - shift) / gamma)
}

/// EE-optimal antenna count for an ET-PA via the Lambert-W closed form,
/// refined over neighbouring integers and clamped to the feasible set.
///
/// The coding/decoding power `A K R` is left out of the closed form: it adds
/// the constant `A` to `1/EE`, so the maximizer is unchanged.
pub fn optimal_antennas_etpa(
    cfg: &SystemConfig,
    pa: &PaSpec,
    coupling: &CouplingStats,
    users: usize,
) -> Result<usize> {
    if pa.family != PaFamily::EtPa {
        return Err(Error::Domain(
            "closed-form optimum applies to ET-PA only".into(),
        ));
    }
    if users < 1 {
        return Err(Error::Domain(
            "closed-form optimum needs at least one user".into(),
        ));
    }
    let eval = EeAt::new(cfg, pa, coupling, users)?;
    let coeffs = power::power_coeffs(cfg, pa, users);
    debug_assert_eq!(coeffs.c2, 0.0);
    let continuous = closed_form_antennas(eval.gamma.gamma, users, coeffs.c0, coeffs.c1)?;
    if !continuous.is_finite() {
        return Err(Error::Infeasible(format!(
            "closed form diverged for K = {users}"
        )));
    }
    let floor = antenna_floor(cfg, pa, users);
    let base = continuous.floor().max(0.0) as usize;
    let mut candidates: Vec<usize> = [base.saturating_sub(1), base, base + 1, base + 2]
        .into_iter()
        .map(|m| m.max(floor))
        .collect();
    candidates.dedup();

    let mut best: Option<(usize, f64)> = None;
    for m in candidates {
        let ee = eval.ee(m)?;
        if best.is_none_or(|(bm, be)| ee > be || (ee == be && m < bm)) {
            best = Some((m, ee));
        }
    }
    Ok(best.expect("candidate set is never empty").0)
}

/// Exhaustive scan over `[max(K+1, min-active), m_max]`, ties toward fewer antennas.
pub fn optimal_antennas_search(
    cfg: &SystemConfig,
    pa: &PaSpec,
    coupling: &CouplingStats,
    users: usize,
    m_max: usize,
) -> Result<usize> {
    if users < 1 {
        return Err(Error::Domain(
            "antenna search needs at least one user".into(),
        ));
    }
    let floor = antenna_floor(cfg, pa, users);
    if floor > m_max {
        return Err(Error::Infeasible(format!(
            "no antenna count in [{floor}, {m_max}] for K = {users}"
        )));
    }
    let eval = EeAt::new(cfg, pa, coupling, users)?;
    let mut best = (floor, f64::NEG_INFINITY);
    for m in floor..=m_max {
        let ee = eval.ee(m)?;
        if ee > best.1 {
            best = (m, ee);
        }
    }
    Ok(best.0)
}

/// Closed form for ET-PA, exhaustive search for TPA.
pub fn optimal_antennas(
    cfg: &SystemConfig,
    pa: &PaSpec,
    coupling: &CouplingStats,
    users: usize,
    m_max: usize,
) -> Result<usize> {
    match pa.family {
        PaFamily::EtPa => optimal_antennas_etpa(cfg, pa, coupling, users),
        PaFamily::Tpa => optimal_antennas_search(cfg, pa, coupling, users, m_max),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimumPoint {
    pub users: usize,
    pub antennas: usize,
    pub ee_bits_per_joule: f64,
}

fn optimum_at(
    cfg: &SystemConfig,
    pa: &PaSpec,
    coupling: &CouplingStats,
    users: usize,
    m_max: usize,
) -> Result<OptimumPoint> {
    let antennas = optimal_antennas(cfg, pa, coupling, users, m_max)?;
    Ok(OptimumPoint {
        users,
        antennas,
        ee_bits_per_joule: power::energy_efficiency(cfg, pa, coupling, antennas, users)?,
    })
}

/// Per-user-count optimum EE curve.
pub fn ee_curve(
    cfg: &SystemConfig,
    pa: &PaSpec,
    coupling: &CouplingStats,
    users: RangeInclusive<usize>,
    m_max: usize,
) -> Result<Vec<OptimumPoint>> {
    users
        .map(|k| optimum_at(cfg, pa, coupling, k, m_max))
        .collect()
}

/// EE upper bound: `P_max,PA` sized to each antenna count's own mean power.
pub fn variable_headroom_curve(
    cfg: &SystemConfig,
    family: PaFamily,
    coupling: &CouplingStats,
    users: RangeInclusive<usize>,
    m_max: usize,
) -> Result<Vec<OptimumPoint>> {
    ee_curve(cfg, &PaSpec::variable(family), coupling, users, m_max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalOptimum {
    pub m_gopt: usize,
    pub k_gopt: usize,
    pub ee_bits_per_joule: f64,
    pub curve: Vec<OptimumPoint>,
}

/// Sweeps `K = 1..=k_scan_max` and returns the jointly EE-optimal `(M, K)`.
pub fn global_optimum(
    cfg: &SystemConfig,
    pa: &PaSpec,
    coupling: &CouplingStats,
    scan: &ScanOptions,
) -> Result<GlobalOptimum> {
    let curve = ee_curve(cfg, pa, coupling, 1..=scan.k_scan_max, scan.m_search_max)?;
    let best = curve
        .iter()
        .fold(None::<&OptimumPoint>, |acc, p| match acc {
            Some(b) if b.ee_bits_per_joule >= p.ee_bits_per_joule => Some(b),
            _ => Some(p),
        })
        .ok_or_else(|| Error::Domain("empty user scan".into()))?;
    if best.users + scan.stop_window > scan.k_scan_max {
        return Err(Error::ScanTooShort {
            best_k: best.users,
            window: scan.stop_window,
            k_scan_max: scan.k_scan_max,
        });
    }
    Ok(GlobalOptimum {
        m_gopt: best.antennas,
        k_gopt: best.users,
        ee_bits_per_joule: best.ee_bits_per_joule,
        curve,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateRow {
    pub users: usize,
    pub antennas: usize,
    pub rate_bps: f64,
    pub ee_bits_per_joule: f64,
    pub total_power_w: f64,
}

/// Antenna count, rate, EE and power for every user state `n = 0..=m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadAdaptiveTable {
    pub pa: PaSpec,
    pub rows: Vec<StateRow>,
}

impl LoadAdaptiveTable {
    /// Largest user state `m`.
    pub fn max_users(&self) -> usize {
        self.rows.len() - 1
    }

    /// Per-user rates `R_1..R_m`.
    pub fn rates(&self) -> Vec<f64> {
        self.rows[1..].iter().map(|r| r.rate_bps).collect()
    }

    pub fn ee(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.ee_bits_per_joule).collect()
    }

    /// Checks `M(n) >= n + 1` and the amplifier headroom on every row.
    pub fn check_constraints(&self, cfg: &SystemConfig) -> Result<()> {
        let min_active = self.pa.min_active_antennas(cfg.downlink_power_w);
        for row in &self.rows {
            if row.users > 0 && row.antennas < row.users + 1 {
                return Err(Error::ZfViolation {
                    antennas: row.antennas,
                    users: row.users,
                });
            }
            if row.antennas < min_active {
                return Err(Error::Infeasible(format!(
                    "state {} uses {} antennas, below the {min_active} the amplifiers need",
                    row.users, row.antennas
                )));
            }
        }
        Ok(())
    }
}

fn row_for(
    cfg: &SystemConfig,
    pa: &PaSpec,
    coupling: &CouplingStats,
    users: usize,
    antennas: usize,
) -> Result<StateRow> {
    let rate = if users == 0 {
        0.0
    } else {
        link::rate_at(cfg, coupling, antennas, users)?
    };
    let total = power::total_power(cfg, pa, antennas, users, rate)?;
    Ok(StateRow {
        users,
        antennas,
        rate_bps: rate,
        ee_bits_per_joule: users as f64 * rate / total,
        total_power_w: total,
    })
}

/// Load-adaptive table: each state uses its own EE-optimal antenna count.
/// The empty state keeps the minimum number of amplifiers powered.
pub fn build_table(
    cfg: &SystemConfig,
    pa: &PaSpec,
    coupling: &CouplingStats,
    max_users: usize,
    m_max: usize,
) -> Result<LoadAdaptiveTable> {
    if max_users < 1 {
        return Err(Error::Domain("table needs at least one user state".into()));
    }
    let idle = pa.min_active_antennas(cfg.downlink_power_w);
    let mut rows = Vec::with_capacity(max_users + 1);
    rows.push(row_for(cfg, pa, coupling, 0, idle)?);
    for n in 1..=max_users {
        let m = optimal_antennas(cfg, pa, coupling, n, m_max)?;
        rows.push(row_for(cfg, pa, coupling, n, m)?);
    }
    Ok(LoadAdaptiveTable { pa: *pa, rows })
}

/// Baseline table with the same antenna count in every state.
pub fn build_fixed_table(
    cfg: &SystemConfig,
    pa: &PaSpec,
    coupling: &CouplingStats,
    max_users: usize,
    antennas: usize,
) -> Result<LoadAdaptiveTable> {
    if max_users < 1 {
        return Err(Error::Domain("table needs at least one user state".into()));
    }
    let floor = antenna_floor(cfg, pa, max_users);
    if antennas < floor {
        return Err(Error::Infeasible(format!(
            "{antennas} antennas cannot serve {max_users} users with this amplifier (need {floor})"
        )));
    }
    let rows = (0..=max_users)
        .map(|n| row_for(cfg, pa, coupling, n, antennas))
        .collect::<Result<Vec<_>>>()?;
    Ok(LoadAdaptiveTable { pa: *pa, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::power::PmaxPolicy;

    // representative coupling close to the default 500 m layout
    fn coupling() -> CouplingStats {
        CouplingStats {
            lambda_cc: 1.19e13,
            interference_sum: 0.206,
        }
    }

    #[test]
    fn closed_form_matches_search_for_default_etpa() {
        let cfg = SystemConfig::default();
        let c = coupling();
        for pa in [
            PaSpec::variable(PaFamily::EtPa),
            PaSpec::fixed(PaFamily::EtPa, 6.31),
        ] {
            for k in [1, 5, 20, 50, 90, 150] {
                let closed = optimal_antennas_etpa(&cfg, &pa, &c, k).unwrap();
                let search = optimal_antennas_search(&cfg, &pa, &c, k, 2000).unwrap();
                assert!(closed.abs_diff(search) <= 1, "K={k}: {closed} vs {search}");
            }
        }
    }

    #[test]
    fn closed_form_stationarity() {
        // d/dM [ln(1 + g (M - K)) / (c0 + c1 M)] = 0 at the returned M
        let (g, k, c0, c1) = (0.02, 40, 46.0, 1.3);
        let m = closed_form_antennas(g, k, c0, c1).unwrap();
        let f = |m: f64| (g * (m - k as f64)).ln_1p() / (c0 + c1 * m);
        let h = 1e-4 * m;
        let derivative = (f(m + h) - f(m - h)) / (2.0 * h);
        assert!(derivative.abs() < 1e-8 * f(m) / m, "{derivative}");
    }

    #[test]
    fn closed_form_lower_branch_limit() {
        // argument at the branch point: gamma c0 - (1 - K gamma) c1 = -c1
        // happens when gamma c0 / c1 + K gamma = 0, approached with tiny gamma
        let m = closed_form_antennas(1e-12, 1, 1e-3, 1.0).unwrap();
        assert!(m.is_finite());
        let cfg = SystemConfig::default();
        let weak = CouplingStats {
            lambda_cc: 1e30,
            interference_sum: 1e6,
        };
        let pa = PaSpec::variable(PaFamily::EtPa);
        let got = optimal_antennas_etpa(&cfg, &pa, &weak, 3).unwrap();
        assert!(got >= 4);
    }

    #[test]
    fn lower_boundary_optimum() {
        // huge per-antenna power pushes the optimum to the constraint floor
        let cfg = SystemConfig {
            p_bs_w: 1e4,
            ..Default::default()
        };
        let c = coupling();
        let pa = PaSpec::fixed(PaFamily::EtPa, 6.31);
        assert_eq!(optimal_antennas_search(&cfg, &pa, &c, 3, 500).unwrap(), 20);
        assert_eq!(optimal_antennas_etpa(&cfg, &pa, &c, 3).unwrap(), 20);
        // the rate still vanishes at M = K + 1, so a large K leaves the floor
        let k30 = optimal_antennas_search(&cfg, &pa, &c, 30, 500).unwrap();
        assert!(k30 > 31);
        assert!(
            optimal_antennas_etpa(&cfg, &pa, &c, 30)
                .unwrap()
                .abs_diff(k30)
                <= 1
        );
        let tpa = PaSpec::fixed(PaFamily::Tpa, 6.31);
        assert_eq!(optimal_antennas_search(&cfg, &tpa, &c, 3, 500).unwrap(), 20);
    }

    #[test]
    fn search_reports_infeasible_range() {
        let cfg = SystemConfig::default();
        let pa = PaSpec::fixed(PaFamily::EtPa, 1.26);
        assert!(matches!(
            optimal_antennas_search(&cfg, &pa, &coupling(), 5, 50),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn higher_p_max_needs_fewer_antennas() {
        let cfg = SystemConfig::default();
        let c = coupling();
        let grid = [1.26, 2.0, 4.0, 6.31, 12.6, 40.0, 125.9];
        let ms: Vec<usize> = grid
            .iter()
            .map(|&p| {
                optimal_antennas_etpa(&cfg, &PaSpec::fixed(PaFamily::EtPa, p), &c, 100).unwrap()
            })
            .collect();
        for w in ms.windows(2) {
            assert!(w[1] <= w[0], "{ms:?}");
        }
        assert!(ms[0] > ms[ms.len() - 1]);
    }

    #[test]
    fn ee_unimodal_in_antennas() {
        let cfg = SystemConfig::default();
        let c = coupling();
        for pa in [
            PaSpec::fixed(PaFamily::Tpa, 2.0),
            PaSpec::variable(PaFamily::EtPa),
        ] {
            let k = 100;
            let floor = antenna_floor(&cfg, &pa, k);
            let ee: Vec<f64> = (floor..=2000)
                .map(|m| power::energy_efficiency(&cfg, &pa, &c, m, k).unwrap())
                .collect();
            let peaks = (0..ee.len())
                .filter(|&i| {
                    (i == 0 || ee[i] > ee[i - 1]) && (i + 1 == ee.len() || ee[i] > ee[i + 1])
                })
                .count();
            assert_eq!(peaks, 1);
        }
    }

    #[test]
    fn global_optimum_reports_short_scans() {
        let cfg = SystemConfig::default();
        let pa = PaSpec::variable(PaFamily::EtPa);
        let scan = ScanOptions {
            k_scan_max: 30,
            ..Default::default()
        };
        assert!(matches!(
            global_optimum(&cfg, &pa, &coupling(), &scan),
            Err(Error::ScanTooShort { .. })
        ));
    }

    #[test]
    fn heavy_fixed_load_pushes_users_up() {
        let c = coupling();
        let pa = PaSpec::variable(PaFamily::EtPa);
        let scan = ScanOptions {
            k_scan_max: 600,
            ..Default::default()
        };
        let base = global_optimum(&SystemConfig::default(), &pa, &c, &scan).unwrap();
        let heavy_cfg = SystemConfig {
            p_oth_w: 500.0,
            ..Default::default()
        };
        let heavy = global_optimum(&heavy_cfg, &pa, &c, &scan).unwrap();
        assert!(
            heavy.k_gopt > base.k_gopt,
            "{} vs {}",
            heavy.k_gopt,
            base.k_gopt
        );
    }

    #[test]
    fn table_rows_satisfy_constraints() {
        let cfg = SystemConfig::default();
        let c = coupling();
        for pa in [
            PaSpec::fixed(PaFamily::EtPa, 4.5),
            PaSpec::fixed(PaFamily::Tpa, 1.5),
            PaSpec::variable(PaFamily::EtPa),
        ] {
            let table = build_table(&cfg, &pa, &c, 60, 2000).unwrap();
            table.check_constraints(&cfg).unwrap();
            let idle = &table.rows[0];
            assert_eq!(idle.rate_bps, 0.0);
            assert_eq!(idle.ee_bits_per_joule, 0.0);
            assert!(idle.total_power_w > 0.0);
            assert_eq!(idle.antennas, pa.min_active_antennas(20.0));
            for w in table.rows[1..].windows(2) {
                assert!(w[1].antennas >= w[0].antennas);
            }
        }
    }

    #[test]
    fn fixed_table_rejects_too_few_antennas() {
        let cfg = SystemConfig::default();
        let pa = PaSpec::new(PaFamily::EtPa, PmaxPolicy::Fixed(6.31));
        assert!(build_fixed_table(&cfg, &pa, &coupling(), 30, 30).is_err());
        let t = build_fixed_table(&cfg, &pa, &coupling(), 30, 64).unwrap();
        assert!(t.rows.iter().all(|r| r.antennas == 64));
    }

    #[test]
    fn variable_curve_dominates_fixed_curves() {
        let cfg = SystemConfig::default();
        let c = coupling();
        let upper = variable_headroom_curve(&cfg, PaFamily::EtPa, &c, 1..=120, 2000).unwrap();
        assert!(upper[0].antennas >= 2);
        for p in [1.26, 6.31, 125.9] {
            let fixed =
                ee_curve(&cfg, &PaSpec::fixed(PaFamily::EtPa, p), &c, 1..=120, 2000).unwrap();
            for (u, f) in upper.iter().zip(&fixed) {
                assert!(u.ee_bits_per_joule >= f.ee_bits_per_joule);
            }
        }
    }
}

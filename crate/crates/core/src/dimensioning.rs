//! Choosing `P_max,PA` by day-weighted energy efficiency, and the comparison
//! against a system that keeps every antenna switched on.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::CouplingStats;
use crate::optimizer::{self, LoadAdaptiveTable, ScanOptions};
use crate::power::{PaFamily, PaSpec, PmaxPolicy};
use crate::system::SystemConfig;
use crate::traffic::{self, DailyProfile, QueueInputs, StateDistribution, HOURS_PER_DAY};

/// Traffic and search settings shared by every candidate evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficOptions {
    pub traffic_per_user_bits: f64,
    /// Blocking probability at peak load.
    pub target_blocking: f64,
    pub m_search_max: usize,
}

impl Default for TrafficOptions {
    fn default() -> Self {
        TrafficOptions {
            traffic_per_user_bits: 1e6,
            target_blocking: 0.02,
            m_search_max: 2000,
        }
    }
}

/// `(P_c / M) 10^(headroom/10)` for `M = 1..=m_gopt`, largest first.
pub fn candidate_pmax_values(cfg: &SystemConfig, headroom_db: f64, m_gopt: usize) -> Vec<f64> {
    let factor = 10f64.powf(headroom_db / 10.0);
    (1..=m_gopt)
        .map(|m| cfg.downlink_power_w / m as f64 * factor)
        .collect()
}

/// `(1/24) sum_h sum_n pi(h, n) EE(n)`.
pub fn day_weighted_ee(ee: &[f64], hourly: &[StateDistribution]) -> Result<f64> {
    if hourly.len() != HOURS_PER_DAY {
        return Err(Error::Domain(format!(
            "expected {HOURS_PER_DAY} hourly distributions, got {}",
            hourly.len()
        )));
    }
    let mut total = 0.0;
    for d in hourly {
        if d.pi.len() != ee.len() {
            return Err(Error::Domain(format!(
                "distribution has {} states but the table has {}",
                d.pi.len(),
                ee.len()
            )));
        }
        total += d.pi.iter().zip(ee).map(|(p, e)| p * e).sum::<f64>();
    }
    Ok(total / HOURS_PER_DAY as f64)
}

/// Queue solution and weighted EE of one table over one day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayEvaluation {
    pub lambda_max: f64,
    pub hourly: Vec<StateDistribution>,
    pub weighted_ee: f64,
}

/// Solves the peak arrival rate for the table's own rates, then averages EE
/// over the day.
pub fn evaluate_table(
    table: &LoadAdaptiveTable,
    profile: &DailyProfile,
    opts: &TrafficOptions,
) -> Result<DayEvaluation> {
    let template = QueueInputs::new(opts.traffic_per_user_bits, table.rates(), 0.0);
    let lambda_max = traffic::solve_lambda_max(&template, opts.target_blocking)?;
    let hourly = traffic::hourly_distributions(profile, lambda_max, &template)?;
    let weighted_ee = day_weighted_ee(&table.ee(), &hourly)?;
    Ok(DayEvaluation {
        lambda_max,
        hourly,
        weighted_ee,
    })
}

/// Day-weighted EE of a load-adaptive system built around `pa`.
pub fn weighted_ee(
    cfg: &SystemConfig,
    pa: &PaSpec,
    coupling: &CouplingStats,
    max_users: usize,
    profile: &DailyProfile,
    opts: &TrafficOptions,
) -> Result<f64> {
    let table = optimizer::build_table(cfg, pa, coupling, max_users, opts.m_search_max)?;
    table.check_constraints(cfg)?;
    Ok(evaluate_table(&table, profile, opts)?.weighted_ee)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub p_max_pa: f64,
    pub min_active_antennas: usize,
    pub weighted_ee: f64,
    pub lambda_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensioningReport {
    pub family: PaFamily,
    pub profile_name: String,
    pub m_gopt: usize,
    pub k_gopt: usize,
    /// Largest `P_max,PA` first.
    pub candidates: Vec<Candidate>,
    pub best_index: usize,
    pub best_p_max_pa: f64,
    pub best_weighted_ee: f64,
    /// Same day, amplifiers sized to the actual load in every state.
    pub variable_weighted_ee: f64,
    pub baseline_weighted_ee: f64,
    pub gain_percent: f64,
}

impl DimensioningReport {
    /// The best candidate is strictly inside the swept range.
    pub fn has_interior_optimum(&self) -> bool {
        self.best_index > 0 && self.best_index + 1 < self.candidates.len()
    }

    pub fn best_pa(&self, template: &PaSpec) -> PaSpec {
        template.with_p_max(PmaxPolicy::Fixed(self.best_p_max_pa))
    }
}

/// Full dimensioning run for the amplifier family in `template`.
///
/// The variable-headroom global optimum fixes the user cap `m = K_gOpt`
/// and the candidate range `M = 1..=M_gOpt`. Every candidate gets its own
/// table and its own peak arrival rate.
pub fn dimension_pa(
    cfg: &SystemConfig,
    coupling: &CouplingStats,
    profile: &DailyProfile,
    template: &PaSpec,
    scan: &ScanOptions,
    opts: &TrafficOptions,
) -> Result<DimensioningReport> {
    template.validate()?;
    let variable = template.with_p_max(PmaxPolicy::Variable);
    let global = optimizer::global_optimum(cfg, &variable, coupling, scan)?;
    let (m_gopt, k_gopt) = (global.m_gopt, global.k_gopt);

    let p_values = candidate_pmax_values(cfg, template.headroom_db, m_gopt);
    let candidates = p_values
        .par_iter()
        .map(|&p| {
            let pa = template.with_p_max(PmaxPolicy::Fixed(p));
            let table = optimizer::build_table(cfg, &pa, coupling, k_gopt, opts.m_search_max)?;
            table.check_constraints(cfg)?;
            let day = evaluate_table(&table, profile, opts)?;
            Ok(Candidate {
                p_max_pa: p,
                min_active_antennas: pa.min_active_antennas(cfg.downlink_power_w),
                weighted_ee: day.weighted_ee,
                lambda_max: day.lambda_max,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    // candidates run largest to smallest, so the last of equal values is the smallest P_max
    let mut best_index = 0;
    for (i, c) in candidates.iter().enumerate() {
        if c.weighted_ee >= candidates[best_index].weighted_ee {
            best_index = i;
        }
    }
    let best = candidates[best_index];

    let variable_weighted_ee = weighted_ee(cfg, &variable, coupling, k_gopt, profile, opts)?;
    let pa_best = template.with_p_max(PmaxPolicy::Fixed(best.p_max_pa));
    let baseline = baseline_comparison(cfg, &pa_best, coupling, profile, m_gopt, k_gopt, opts)?;

    Ok(DimensioningReport {
        family: template.family,
        profile_name: profile.name.clone(),
        m_gopt,
        k_gopt,
        candidates,
        best_index,
        best_p_max_pa: best.p_max_pa,
        best_weighted_ee: best.weighted_ee,
        variable_weighted_ee,
        baseline_weighted_ee: baseline.fixed_weighted_ee,
        gain_percent: baseline.gain_percent,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateComparison {
    pub users: usize,
    pub adaptive_antennas: usize,
    pub adaptive_ee: f64,
    pub fixed_antennas: usize,
    pub fixed_ee: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineComparison {
    pub adaptive_weighted_ee: f64,
    pub fixed_weighted_ee: f64,
    pub gain_percent: f64,
    pub states: Vec<StateComparison>,
}

impl BaselineComparison {
    /// Share of the non-empty states where the adaptive system is at least as efficient.
    pub fn dominance_fraction(&self) -> f64 {
        let busy: Vec<_> = self.states.iter().filter(|s| s.users > 0).collect();
        if busy.is_empty() {
            return 1.0;
        }
        let wins = busy.iter().filter(|s| s.adaptive_ee >= s.fixed_ee).count();
        wins as f64 / busy.len() as f64
    }
}

/// Runs both tables through the same queue pipeline and compares them.
pub fn compare_tables(
    adaptive: &LoadAdaptiveTable,
    fixed: &LoadAdaptiveTable,
    profile: &DailyProfile,
    opts: &TrafficOptions,
) -> Result<BaselineComparison> {
    if adaptive.rows.len() != fixed.rows.len() {
        return Err(Error::Domain("tables cover different user ranges".into()));
    }
    let a = evaluate_table(adaptive, profile, opts)?;
    let f = evaluate_table(fixed, profile, opts)?;
    let states = adaptive
        .rows
        .iter()
        .zip(&fixed.rows)
        .map(|(ra, rf)| StateComparison {
            users: ra.users,
            adaptive_antennas: ra.antennas,
            adaptive_ee: ra.ee_bits_per_joule,
            fixed_antennas: rf.antennas,
            fixed_ee: rf.ee_bits_per_joule,
        })
        .collect();
    Ok(BaselineComparison {
        adaptive_weighted_ee: a.weighted_ee,
        fixed_weighted_ee: f.weighted_ee,
        gain_percent: 100.0 * (a.weighted_ee - f.weighted_ee) / f.weighted_ee,
        states,
    })
}

/// Adaptive antenna counts against all `m_gopt` antennas kept active, both
/// with the amplifier `pa`.
pub fn baseline_comparison(
    cfg: &SystemConfig,
    pa: &PaSpec,
    coupling: &CouplingStats,
    profile: &DailyProfile,
    m_gopt: usize,
    k_gopt: usize,
    opts: &TrafficOptions,
) -> Result<BaselineComparison> {
    let adaptive = optimizer::build_table(cfg, pa, coupling, k_gopt, opts.m_search_max)?;
    let fixed = optimizer::build_fixed_table(cfg, pa, coupling, k_gopt, m_gopt)?;
    compare_tables(&adaptive, &fixed, profile, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::StateRow;
    use approx::assert_relative_eq;

    fn coupling() -> CouplingStats {
        CouplingStats {
            lambda_cc: 1.19e13,
            interference_sum: 0.206,
        }
    }

    #[test]
    fn candidate_values() {
        let cfg = SystemConfig::default();
        let c = candidate_pmax_values(&cfg, 8.0, 100);
        assert_eq!(c.len(), 100);
        assert_relative_eq!(c[0], 126.19, max_relative = 1e-4);
        assert_relative_eq!(c[19], 6.3096, max_relative = 1e-4);
        assert_relative_eq!(c[99], 1.2619, max_relative = 1e-4);
        assert_relative_eq!(c[99] / 10f64.powf(0.8), 0.2, max_relative = 1e-12);
        assert!(c.windows(2).all(|w| w[0] > w[1]));
        for (i, p) in c.iter().enumerate() {
            assert_eq!(
                PaSpec::fixed(PaFamily::EtPa, *p).min_active_antennas(20.0),
                i + 1
            );
        }
    }

    #[test]
    fn hand_computed_weighted_sum() {
        let hour = StateDistribution {
            pi: vec![0.25, 0.5, 0.25],
        };
        let ee = [0.0, 10.0, 30.0];
        let hourly = vec![hour; 24];
        // 0.5 * 10 + 0.25 * 30
        assert_relative_eq!(
            day_weighted_ee(&ee, &hourly).unwrap(),
            12.5,
            epsilon = 1e-12
        );
        // EE(0) is zero whatever pi(0) is
        let idle = vec![
            StateDistribution {
                pi: vec![1.0, 0.0, 0.0]
            };
            24
        ];
        assert_eq!(day_weighted_ee(&ee, &idle).unwrap(), 0.0);
        assert!(day_weighted_ee(&ee, &hourly[..3]).is_err());
        assert!(day_weighted_ee(&ee[..2], &hourly).is_err());
    }

    fn tiny_table(ee: [f64; 3], rates: [f64; 2]) -> LoadAdaptiveTable {
        let row = |users: usize, rate: f64, ee: f64| StateRow {
            users,
            antennas: 4,
            rate_bps: rate,
            ee_bits_per_joule: ee,
            total_power_w: 1.0,
        };
        LoadAdaptiveTable {
            pa: PaSpec::variable(PaFamily::EtPa),
            rows: vec![
                row(0, 0.0, ee[0]),
                row(1, rates[0], ee[1]),
                row(2, rates[1], ee[2]),
            ],
        }
    }

    #[test]
    fn two_state_table_at_constant_peak() {
        // equal rates: Erlang-B with 2 servers, 20% blocking at one erlang -> (0.4, 0.4, 0.2)
        let table = tiny_table([0.0, 100.0, 400.0], [1e6, 1e6]);
        let opts = TrafficOptions {
            target_blocking: 0.2,
            ..Default::default()
        };
        let day = evaluate_table(&table, &DailyProfile::constant_peak(), &opts).unwrap();
        assert_relative_eq!(day.lambda_max, 1.0, max_relative = 1e-6);
        assert_relative_eq!(
            day.weighted_ee,
            0.4 * 100.0 + 0.2 * 400.0,
            max_relative = 1e-5
        );
    }

    #[test]
    fn self_comparison_has_no_gain() {
        let cfg = SystemConfig::default();
        let pa = PaSpec::fixed(PaFamily::EtPa, 4.5);
        let table = optimizer::build_table(&cfg, &pa, &coupling(), 40, 2000).unwrap();
        let profile = DailyProfile::builtin("earth").unwrap();
        let cmp = compare_tables(&table, &table, &profile, &TrafficOptions::default()).unwrap();
        assert_eq!(cmp.gain_percent, 0.0);
        assert_eq!(cmp.dominance_fraction(), 1.0);
    }

    #[test]
    fn adaptive_beats_fixed_at_low_load() {
        let cfg = SystemConfig::default();
        let pa = PaSpec::fixed(PaFamily::EtPa, 4.5);
        let profile = DailyProfile::builtin("earth").unwrap();
        let cmp = baseline_comparison(
            &cfg,
            &pa,
            &coupling(),
            &profile,
            120,
            60,
            &TrafficOptions::default(),
        )
        .unwrap();
        assert!(cmp.gain_percent > 0.0);
        assert!(cmp.states[1].adaptive_ee > cmp.states[1].fixed_ee);
        assert!(cmp.states.iter().all(|s| s.fixed_antennas == 120));
    }

    #[test]
    fn weighted_ee_upper_bound() {
        let cfg = SystemConfig::default();
        let c = coupling();
        let profile = DailyProfile::builtin("earth").unwrap();
        let opts = TrafficOptions::default();
        let upper = weighted_ee(
            &cfg,
            &PaSpec::variable(PaFamily::EtPa),
            &c,
            50,
            &profile,
            &opts,
        )
        .unwrap();
        for p in [1.5, 4.5, 20.0] {
            let w = weighted_ee(
                &cfg,
                &PaSpec::fixed(PaFamily::EtPa, p),
                &c,
                50,
                &profile,
                &opts,
            )
            .unwrap();
            assert!(w > 0.0 && w <= upper, "{p}: {w} vs {upper}");
        }
    }
}

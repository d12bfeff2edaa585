//! Full-pipeline values cross-checked against an independent NumPy model of
//! the same equations, fed the same coupling statistics.

use mimo_pa::dimensioning::{self, TrafficOptions};
use mimo_pa::optimizer::{self, ScanOptions};
use mimo_pa::power::{PaFamily, PaSpec};
use mimo_pa::traffic::{self, DailyProfile, QueueInputs};
use mimo_pa::{CouplingStats, SystemConfig};

fn coupling() -> CouplingStats {
    CouplingStats {
        lambda_cc: 11_901_121_509_979.979,
        interference_sum: 0.204_169_575_952_759_5,
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

#[test]
fn global_optima() {
    let cfg = SystemConfig::default();
    let scan = ScanOptions::default();
    let et = optimizer::global_optimum(&cfg, &PaSpec::variable(PaFamily::EtPa), &coupling(), &scan)
        .unwrap();
    assert_eq!((et.m_gopt, et.k_gopt), (148, 70));
    assert!(rel(et.ee_bits_per_joule, 17_370_683.595_932_934) < 1e-9);
    let tpa = optimizer::global_optimum(&cfg, &PaSpec::variable(PaFamily::Tpa), &coupling(), &scan)
        .unwrap();
    assert_eq!((tpa.m_gopt, tpa.k_gopt), (198, 90));
    assert!(rel(tpa.ee_bits_per_joule, 15_287_218.500_260_126) < 1e-9);
}

#[test]
fn weighted_ee_at_8db_amplifier() {
    let cfg = SystemConfig::default();
    let pa = PaSpec::fixed(PaFamily::EtPa, 6.31);
    let table = optimizer::build_table(&cfg, &pa, &coupling(), 70, 2000).unwrap();
    let m: Vec<usize> = [1, 35, 70]
        .iter()
        .map(|&n| table.rows[n].antennas)
        .collect();
    assert_eq!(m, [20, 83, 147]);
    let opts = TrafficOptions::default();
    let lambda =
        traffic::solve_lambda_max(&QueueInputs::new(1e6, table.rates(), 0.0), 0.02).unwrap();
    assert!(rel(lambda, 3_445.320_420_319_608_7) < 1e-6);
    let day = dimensioning::evaluate_table(&table, &DailyProfile::builtin("earth").unwrap(), &opts)
        .unwrap();
    assert!(rel(day.weighted_ee, 13_636_741.219_434_222) < 1e-9);
}

#[test]
fn etpa_dimensioning() {
    let cfg = SystemConfig::default();
    let profile = DailyProfile::builtin("earth").unwrap();
    let template = PaSpec::variable(PaFamily::EtPa);
    let scan = ScanOptions::default();
    let opts = TrafficOptions::default();
    let r =
        dimensioning::dimension_pa(&cfg, &coupling(), &profile, &template, &scan, &opts).unwrap();
    assert_eq!(r.candidates.len(), 148);
    assert_eq!(r.candidates[r.best_index].min_active_antennas, 30);
    assert!(rel(r.best_p_max_pa, 4.206_382_296_534_622) < 1e-12);
    assert!(rel(r.best_weighted_ee, 13_747_128.979_743_546) < 1e-9);
    assert!(r.has_interior_optimum());

    // invariants of the report
    let max = r
        .candidates
        .iter()
        .map(|c| c.weighted_ee)
        .fold(f64::MIN, f64::max);
    assert_eq!(max, r.best_weighted_ee);
    assert!(r
        .candidates
        .iter()
        .all(|c| c.weighted_ee <= r.variable_weighted_ee));
    let mut ps: Vec<f64> = r.candidates.iter().map(|c| c.p_max_pa).collect();
    ps.dedup();
    assert_eq!(ps.len(), 148);
    for (i, c) in r.candidates.iter().enumerate() {
        assert_eq!(c.min_active_antennas, i + 1);
    }

    let again =
        dimensioning::dimension_pa(&cfg, &coupling(), &profile, &template, &scan, &opts).unwrap();
    assert_eq!(format!("{r:?}"), format!("{again:?}"));
}

#[test]
fn commercial_and_residential_profiles_dimension_alike() {
    // day shape moves the optimum only moderately; the candidates are dense
    // in this range, so compare watts rather than positions
    let cfg = SystemConfig::default();
    let template = PaSpec::variable(PaFamily::EtPa);
    let best = |name: &str| {
        let profile = DailyProfile::builtin(name).unwrap();
        dimensioning::dimension_pa(
            &cfg,
            &coupling(),
            &profile,
            &template,
            &ScanOptions::default(),
            &TrafficOptions::default(),
        )
        .unwrap()
    };
    let (c, r) = (best("commercial"), best("residential"));
    let ratio = c.best_p_max_pa / r.best_p_max_pa;
    assert!(
        (1.0 / 1.5..=1.5).contains(&ratio),
        "{} vs {}",
        c.best_p_max_pa,
        r.best_p_max_pa
    );
    assert!(c.gain_percent > 20.0 && r.gain_percent > 20.0);
}

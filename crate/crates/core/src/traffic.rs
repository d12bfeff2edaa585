//! State-dependent M/G/m/m loss queue for the number of simultaneously
//! served users, driven hour by hour by a daily load profile.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HOURS_PER_DAY: usize = 24;

/// Inputs of the loss queue. `rates[n - 1]` is the per-user rate in state `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueInputs {
    /// Data volume of one session, bits.
    pub traffic_per_user_bits: f64,
    pub rates: Vec<f64>,
    /// Session arrival rate, 1/s.
    pub arrival_rate: f64,
}

impl QueueInputs {
    pub fn new(traffic_per_user_bits: f64, rates: Vec<f64>, arrival_rate: f64) -> Self {
        QueueInputs {
            traffic_per_user_bits,
            rates,
            arrival_rate,
        }
    }

    /// Number of servers `m`.
    pub fn servers(&self) -> usize {
        self.rates.len()
    }

    pub fn with_arrival_rate(&self, arrival_rate: f64) -> Self {
        QueueInputs {
            arrival_rate,
            ..self.clone()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.rates.is_empty() {
            return Err(Error::Domain("queue needs at least one server".into()));
        }
        if let Some(r) = self.rates.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
            return Err(Error::Domain(format!(
                "service rates must be positive, got {r}"
            )));
        }
        if !(self.traffic_per_user_bits > 0.0) {
            return Err(Error::Domain(format!(
                "traffic per user must be positive, got {}",
                self.traffic_per_user_bits
            )));
        }
        if !(self.arrival_rate >= 0.0 && self.arrival_rate.is_finite()) {
            return Err(Error::Domain(format!(
                "arrival rate must be non-negative, got {}",
                self.arrival_rate
            )));
        }
        Ok(())
    }
}

/// Limiting probabilities `pi(0)..pi(m)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDistribution {
    pub pi: Vec<f64>,
}

impl StateDistribution {
    /// Probability that all servers are busy.
    pub fn blocking(&self) -> f64 {
        *self.pi.last().expect("distribution has at least one state")
    }

    pub fn mean(&self) -> f64 {
        self.pi.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    pub fn cdf(&self) -> Vec<f64> {
        self.pi
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p;
                Some(*acc)
            })
            .collect()
    }

    pub fn total(&self) -> f64 {
        self.pi.iter().sum()
    }
}

/// Stationary distribution of the state-dependent loss queue:
///
/// `pi(n) ∝ (lambda sigma / R_1)^n / (n! f(1) ... f(n))`, `f(n) = R_n / R_1`,
///
/// evaluated with log weights and a log-sum-exp normalizer.
pub fn queue_distribution(q: &QueueInputs) -> Result<StateDistribution> {
    q.validate()?;
    let m = q.servers();
    if q.arrival_rate == 0.0 {
        let mut pi = vec![0.0; m + 1];
        pi[0] = 1.0;
        return Ok(StateDistribution { pi });
    }
    let r1 = q.rates[0];
    let log_load = (q.arrival_rate * q.traffic_per_user_bits / r1).ln();
    let mut log_w = Vec::with_capacity(m + 1);
    log_w.push(0.0);
    let mut acc = 0.0;
    for (i, rate) in q.rates.iter().enumerate() {
        let n = (i + 1) as f64;
        acc += log_load - n.ln() - (rate / r1).ln();
        log_w.push(acc);
    }
    let peak = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = log_w.iter().map(|l| (l - peak).exp()).collect();
    let norm: f64 = weights.iter().sum();
    Ok(StateDistribution {
        pi: weights.into_iter().map(|w| w / norm).collect(),
    })
}

/// Erlang-B blocking probability by the standard recursion
/// `B_0 = 1`, `B_k = a B_{k-1} / (k + a B_{k-1})`.
pub fn erlang_b(servers: usize, offered_load: f64) -> f64 {
    (1..=servers).fold(1.0, |b, k| offered_load * b / (k as f64 + offered_load * b))
}

const BISECTION_ITERATIONS: usize = 200;
const BLOCKING_TOLERANCE: f64 = 1e-6;

/// Arrival rate at which the top state carries `target_blocking` probability.
///
/// Grows an upper bracket by doubling, then bisects; blocking is increasing
/// in the arrival rate and the bracket is checked to confirm it.
pub fn solve_lambda_max(template: &QueueInputs, target_blocking: f64) -> Result<f64> {
    if !(target_blocking > 0.0 && target_blocking < 1.0) {
        return Err(Error::Domain(format!(
            "target blocking must lie in (0, 1), got {target_blocking}"
        )));
    }
    template.with_arrival_rate(0.0).validate()?;
    let blocking = |lambda: f64| -> Result<f64> {
        Ok(queue_distribution(&template.with_arrival_rate(lambda))?.blocking())
    };

    // start at one erlang of single-user offered load
    let mut lo = 0.0;
    let mut hi = template.rates[0] / template.traffic_per_user_bits;
    let mut b_hi = blocking(hi)?;
    let mut expansions = 0;
    while b_hi < target_blocking {
        lo = hi;
        hi *= 2.0;
        let next = blocking(hi)?;
        if next < b_hi {
            return Err(Error::NoConvergence {
                iterations: expansions,
                what: "blocking decreased while expanding the bracket".into(),
            });
        }
        b_hi = next;
        expansions += 1;
        if expansions > 2000 || !hi.is_finite() {
            return Err(Error::NoConvergence {
                iterations: expansions,
                what: "could not bracket the target blocking".into(),
            });
        }
    }

    let mut mid = 0.5 * (lo + hi);
    for _ in 0..BISECTION_ITERATIONS {
        mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let b = blocking(mid)?;
        if b < target_blocking {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let achieved = blocking(mid)?;
    if (achieved - target_blocking).abs() > BLOCKING_TOLERANCE {
        return Err(Error::NoConvergence {
            iterations: BISECTION_ITERATIONS,
            what: format!("blocking {achieved} did not reach {target_blocking}"),
        });
    }
    Ok(mid)
}

/// Hourly load fractions, normalized so the busiest hour is 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyProfile {
    pub name: String,
    pub hourly_load: [f64; HOURS_PER_DAY],
}

const BUILTIN_PROFILES: [(&str, &str); 3] = [
    ("earth", include_str!("../profiles/earth.txt")),
    ("commercial", include_str!("../profiles/commercial.txt")),
    ("residential", include_str!("../profiles/residential.txt")),
];

impl DailyProfile {
    pub fn new(name: impl Into<String>, hourly_load: [f64; HOURS_PER_DAY]) -> Result<Self> {
        let profile = DailyProfile {
            name: name.into(),
            hourly_load,
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(x) = self.hourly_load.iter().find(|x| !(**x > 0.0 && **x <= 1.0)) {
            return Err(Error::Validation(format!(
                "profile `{}`: hourly load {x} outside (0, 1]",
                self.name
            )));
        }
        let peak = self.hourly_load.iter().copied().fold(0.0, f64::max);
        if (peak - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!(
                "profile `{}`: peak load is {peak}, expected 1.0",
                self.name
            )));
        }
        Ok(())
    }

    /// Parses 24 decimal lines; blank lines and `#` comments are skipped.
    pub fn parse(name: &str, text: &str, origin: &Path) -> Result<Self> {
        let mut values = Vec::with_capacity(HOURS_PER_DAY);
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let value: f64 = line.parse().map_err(|_| Error::Parse {
                path: origin.to_path_buf(),
                line: i + 1,
                message: format!("expected a load fraction, found `{line}`"),
            })?;
            if values.len() == HOURS_PER_DAY {
                return Err(Error::Parse {
                    path: origin.to_path_buf(),
                    line: i + 1,
                    message: format!("more than {HOURS_PER_DAY} hourly values"),
                });
            }
            values.push(value);
        }
        let hourly_load: [f64; HOURS_PER_DAY] =
            values.try_into().map_err(|v: Vec<f64>| Error::Parse {
                path: origin.to_path_buf(),
                line: text.lines().count(),
                message: format!("expected {HOURS_PER_DAY} hourly values, found {}", v.len()),
            })?;
        DailyProfile::new(name, hourly_load)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "profile".into());
        Self::parse(&name, &text, path)
    }

    /// One of the bundled approximate profiles: `earth`, `commercial`, `residential`.
    pub fn builtin(name: &str) -> Result<Self> {
        let (_, text) = BUILTIN_PROFILES
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| Error::Validation(format!("no bundled profile named `{name}`")))?;
        Self::parse(name, text, Path::new(&format!("builtin:{name}")))
    }

    pub fn builtin_names() -> impl Iterator<Item = &'static str> {
        BUILTIN_PROFILES.iter().map(|(n, _)| *n)
    }

    /// Flat profile at full load in every hour.
    pub fn constant_peak() -> Self {
        DailyProfile {
            name: "peak".into(),
            hourly_load: [1.0; HOURS_PER_DAY],
        }
    }
}

/// Queue distribution for every hour at `lambda_h = load_h * lambda_max`.
pub fn hourly_distributions(
    profile: &DailyProfile,
    lambda_max: f64,
    template: &QueueInputs,
) -> Result<Vec<StateDistribution>> {
    profile
        .hourly_load
        .iter()
        .map(|load| queue_distribution(&template.with_arrival_rate(load * lambda_max)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn flat(m: usize, offered: f64) -> QueueInputs {
        // sigma = 1, R = 1 -> lambda equals the offered load in erlangs
        QueueInputs::new(1.0, vec![1.0; m], offered)
    }

    // truncated Poisson by forward products, the independent oracle
    fn truncated_poisson(m: usize, a: f64) -> Vec<f64> {
        let mut w = vec![1.0];
        for n in 1..=m {
            let prev = w[n - 1];
            w.push(prev * a / n as f64);
        }
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect()
    }

    #[test]
    fn two_servers_unit_load() {
        let d = queue_distribution(&flat(2, 1.0)).unwrap();
        for (got, want) in d.pi.iter().zip([0.4, 0.4, 0.2]) {
            assert_relative_eq!(*got, want, epsilon = 1e-15);
        }
        assert_relative_eq!(erlang_b(2, 1.0), 0.2, epsilon = 1e-15);
    }

    #[test]
    fn state_dependent_rates() {
        // f(1) = 1, f(2) = 0.5: weights 1, 1, 1/(2 * 0.5) = 1
        let q = QueueInputs::new(1.0, vec![2.0, 1.0], 2.0);
        let d = queue_distribution(&q).unwrap();
        for p in d.pi {
            assert_relative_eq!(p, 1.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn idle_system() {
        let d = queue_distribution(&flat(5, 0.0)).unwrap();
        assert_eq!(d.pi, vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn erlang_b_values() {
        assert_relative_eq!(erlang_b(1, 1.0), 0.5, epsilon = 1e-15);
        // B_1 = 5/6, B_2 = 5 B_1 / (2 + 5 B_1), ...
        let mut b = 1.0;
        for k in 1..=10 {
            b = 5.0 * b / (k as f64 + 5.0 * b);
        }
        assert_relative_eq!(erlang_b(10, 5.0), b, epsilon = 1e-15);
        assert!((queue_distribution(&flat(10, 5.0)).unwrap().blocking() - b).abs() < 1e-10);
    }

    #[test]
    fn large_systems_stay_finite() {
        let d = queue_distribution(&flat(400, 350.0)).unwrap();
        assert!(d.pi.iter().all(|p| p.is_finite()));
        assert!((d.total() - 1.0).abs() < 1e-12);
        assert!((d.blocking() - erlang_b(400, 350.0)).abs() < 1e-10);
    }

    #[test]
    fn invalid_inputs() {
        assert!(queue_distribution(&QueueInputs::new(1.0, vec![], 1.0)).is_err());
        assert!(queue_distribution(&QueueInputs::new(1.0, vec![1.0, 0.0], 1.0)).is_err());
        assert!(queue_distribution(&QueueInputs::new(0.0, vec![1.0], 1.0)).is_err());
        assert!(queue_distribution(&QueueInputs::new(1.0, vec![1.0], -1.0)).is_err());
    }

    #[test]
    fn solver_inverts_erlang_b() {
        let lambda = solve_lambda_max(&flat(2, 0.0), 0.2).unwrap();
        assert_relative_eq!(lambda, 1.0, max_relative = 1e-6);
        // offered load scales with sigma / R_1
        let q = QueueInputs::new(2e6, vec![4e7, 3e7], 0.0);
        let lambda = solve_lambda_max(&q, 0.02).unwrap();
        let b = queue_distribution(&q.with_arrival_rate(lambda))
            .unwrap()
            .blocking();
        assert!((b - 0.02).abs() <= 1e-6);
    }

    #[test]
    fn solver_shrinks_with_target() {
        let q = flat(10, 0.0);
        let mut prev = f64::INFINITY;
        for target in [0.2, 0.02, 1e-3, 1e-5] {
            let l = solve_lambda_max(&q, target).unwrap();
            assert!(l < prev);
            prev = l;
        }
        assert!((erlang_b(10, prev) - 1e-5).abs() < 1e-9);
        assert!(solve_lambda_max(&q, 0.0).is_err());
        assert!(solve_lambda_max(&q, 1.0).is_err());
    }

    #[test]
    fn hourly_distributions_follow_load() {
        let profile = DailyProfile::builtin("earth").unwrap();
        let q = QueueInputs::new(
            1e6,
            (1..=40).map(|n| 5e7 / (1.0 + 0.01 * n as f64)).collect(),
            0.0,
        );
        let lambda = solve_lambda_max(&q, 0.02).unwrap();
        let dists = hourly_distributions(&profile, lambda, &q).unwrap();
        assert_eq!(dists.len(), 24);
        let peak = profile.hourly_load.iter().position(|x| *x == 1.0).unwrap();
        assert!((dists[peak].blocking() - 0.02).abs() <= 1e-6);
        for d in &dists {
            assert!((d.total() - 1.0).abs() < 1e-12);
        }
        let low = queue_distribution(&q.with_arrival_rate(0.01 * lambda)).unwrap();
        assert!(low.pi[0] > 0.5);
    }

    #[test]
    fn builtin_profiles_are_valid() {
        for name in DailyProfile::builtin_names() {
            let p = DailyProfile::builtin(name).unwrap();
            assert_eq!(p.name, name);
            let min = p.hourly_load.iter().copied().fold(1.0, f64::min);
            // busiest hours carry 2-10x the quietest ones
            assert!((2.0..=10.0).contains(&(1.0 / min)), "{name}: {min}");
        }
        assert!(DailyProfile::builtin("nowhere").is_err());
    }

    #[test]
    fn profile_parse_errors() {
        let origin = Path::new("p.txt");
        let good: String = (0..24)
            .map(|h| {
                if h == 5 {
                    "1.0\n".to_string()
                } else {
                    "0.5\n".to_string()
                }
            })
            .collect();
        assert!(DailyProfile::parse("p", &good, origin).is_ok());
        let with_comments = format!("# header\n\n{good}");
        assert!(DailyProfile::parse("p", &with_comments, origin).is_ok());
        let short: String = good.lines().take(23).map(|l| format!("{l}\n")).collect();
        assert!(matches!(
            DailyProfile::parse("p", &short, origin),
            Err(Error::Parse { .. })
        ));
        let bad = good.replacen("0.5", "abc", 1);
        match DailyProfile::parse("p", &bad, origin) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
        let no_peak = good.replace("1.0", "0.9");
        assert!(matches!(
            DailyProfile::parse("p", &no_peak, origin),
            Err(Error::Validation(_))
        ));
        let zero = good.replacen("0.5", "0", 1);
        assert!(DailyProfile::parse("p", &zero, origin).is_err());
    }

    proptest! {
        #[test]
        fn matches_truncated_poisson(m in 1usize..120, a in 0.01f64..150.0) {
            let d = queue_distribution(&flat(m, a)).unwrap();
            let oracle = truncated_poisson(m, a);
            prop_assert!((d.total() - 1.0).abs() < 1e-12);
            for (x, y) in d.pi.iter().zip(&oracle) {
                prop_assert!((x - y).abs() < 1e-10);
            }
        }

        #[test]
        fn blocking_monotone_and_cdf_dominance(
            rates in proptest::collection::vec(1.0f64..100.0, 1..40),
            l1 in 0.0f64..50.0,
            dl in 0.0f64..50.0,
        ) {
            let q = QueueInputs::new(1.0, rates, 0.0);
            let a = queue_distribution(&q.with_arrival_rate(l1)).unwrap();
            let b = queue_distribution(&q.with_arrival_rate(l1 + dl)).unwrap();
            prop_assert!(b.blocking() >= a.blocking() - 1e-15);
            for (fa, fb) in a.cdf().iter().zip(b.cdf()) {
                prop_assert!(*fa >= fb - 1e-12);
            }
        }
    }
}

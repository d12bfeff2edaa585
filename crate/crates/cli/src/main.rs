use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mimo_pa::config::{self, Manifest, RunConfig};
use mimo_pa::dimensioning::{self, DimensioningReport};
use mimo_pa::export::{self, CouplingCache};
use mimo_pa::optimizer::{self, LoadAdaptiveTable};
use mimo_pa::power::{PaFamily, PaSpec, PmaxPolicy};
use mimo_pa::traffic::{self, QueueInputs};
use mimo_pa::{CouplingStats, Error};

/// Energy-efficiency model of a load-adaptive massive-MIMO network.
#[derive(Debug, Parser)]
#[command(name = "mimo-pa", version)]
struct Cli {
    /// Flat `key = value` configuration file; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides `output_dir` from the configuration).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Subcommand)]
enum Command {
    /// Coupling statistics of the test grid (cached).
    Coupling {
        /// Also write per-point gains.
        #[arg(long)]
        points: bool,
    },
    /// Optimum-EE curves versus user count for several P_max,PA settings.
    EeSweep {
        /// Comma-separated labels: variable, <x>dB, <x>W.
        #[arg(long, value_delimiter = ',', default_value = "variable,21dB,8dB,1dB")]
        pmax: Vec<String>,
        /// Largest user count.
        #[arg(long, default_value_t = 150)]
        k_max: usize,
    },
    /// Jointly EE-optimal antenna and user counts.
    GlobalOpt,
    /// User-state distributions at given fractions of peak load.
    Queue {
        #[arg(long, value_delimiter = ',', default_value = "0.5,1.0")]
        loads: Vec<f64>,
    },
    /// Day-weighted P_max,PA dimensioning.
    Dimension {
        /// Amplifier family; defaults to `pa_family` from the configuration.
        #[arg(long)]
        family: Option<PaFamily>,
    },
    /// Load-adaptive system against all M_gOpt antennas always on.
    CompareBaseline {
        #[arg(long)]
        family: Option<PaFamily>,
        /// Use this P_max,PA instead of dimensioning first.
        #[arg(long)]
        pmax: Option<String>,
    },
    /// Re-run the command recorded in a run manifest.
    Replay { manifest: PathBuf },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Coupling { .. } => "coupling",
            Command::EeSweep { .. } => "ee-sweep",
            Command::GlobalOpt => "global-opt",
            Command::Queue { .. } => "queue",
            Command::Dimension { .. } => "dimension",
            Command::CompareBaseline { .. } => "compare-baseline",
            Command::Replay { .. } => "replay",
        }
    }
}

struct Session {
    run: RunConfig,
    out: PathBuf,
}

impl Session {
    fn path(&self, file: &str) -> PathBuf {
        self.out.join(file)
    }

    fn coupling(&self) -> mimo_pa::Result<CouplingStats> {
        let (stats, _) = CouplingCache::new(self.out.join(".cache")).get_or_compute(&self.run)?;
        Ok(stats)
    }

    fn write_manifest(&self, name: &str, argv: &[String]) -> mimo_pa::Result<()> {
        let manifest = Manifest::new(&self.run, serde_json::json!({ "argv": argv }));
        std::fs::write(self.path(&format!("{name}.manifest")), manifest.render())?;
        Ok(())
    }

    fn template(&self, family: Option<PaFamily>) -> PaSpec {
        PaSpec {
            family: family.unwrap_or(self.run.pa.family),
            ..self.run.pa
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_config_error() || matches!(e, Error::Io(_)) {
        2
    } else {
        3
    }
}

fn run(cli: Cli) -> mimo_pa::Result<()> {
    if let Command::Replay { manifest } = &cli.command {
        let m = Manifest::load(manifest)?;
        let argv: Vec<String> = serde_json::from_value(m.command["argv"].clone())?;
        let replayed =
            Cli::try_parse_from(std::iter::once("mimo-pa".to_string()).chain(argv.iter().cloned()))
                .map_err(|e| Error::Validation(format!("manifest command does not parse: {e}")))?;
        if matches!(replayed.command, Command::Replay { .. }) {
            return Err(Error::Validation(
                "a manifest cannot record a replay".into(),
            ));
        }
        let out = cli.out.unwrap_or_else(|| m.config.output_dir.clone());
        return execute(Session { run: m.config, out }, replayed.command, &argv);
    }

    let run = match &cli.config {
        Some(path) => config::load_config(path)?,
        None => RunConfig::default(),
    };
    let out = cli.out.clone().unwrap_or_else(|| run.output_dir.clone());
    let argv: Vec<String> = std::env::args().skip(1).collect();
    execute(Session { run, out }, cli.command, &recorded_args(&argv))
}

/// Drops `--config` and `--out` from the recorded command line: the manifest
/// carries the configuration itself and replays may write elsewhere.
fn recorded_args(argv: &[String]) -> Vec<String> {
    let mut kept = Vec::new();
    let mut skip_next = false;
    for a in argv {
        if skip_next {
            skip_next = false;
            continue;
        }
        if a == "--config" || a == "--out" {
            skip_next = true;
        } else if !(a.starts_with("--config=") || a.starts_with("--out=")) {
            kept.push(a.clone());
        }
    }
    kept
}

fn execute(s: Session, command: Command, argv: &[String]) -> mimo_pa::Result<()> {
    std::fs::create_dir_all(&s.out)?;
    let name = command.name();
    match command {
        Command::Coupling { points } => coupling(&s, points)?,
        Command::EeSweep { pmax, k_max } => ee_sweep(&s, &pmax, k_max)?,
        Command::GlobalOpt => global_opt(&s)?,
        Command::Queue { loads } => queue(&s, &loads)?,
        Command::Dimension { family } => {
            dimension(&s, family)?;
        }
        Command::CompareBaseline { family, pmax } => compare_baseline(&s, family, pmax.as_deref())?,
        Command::Replay { .. } => unreachable!("handled before dispatch"),
    }
    s.write_manifest(name, argv)?;
    println!("wrote {} outputs to {}", name, s.out.display());
    Ok(())
}

fn coupling(s: &Session, points: bool) -> mimo_pa::Result<()> {
    let stats = s.coupling()?;
    export::write_csv_file(&s.path("coupling.csv"), |f| {
        export::write_coupling(f, &stats)
    })?;
    if points {
        let layout = s.run.layout()?;
        let grid = s.run.grid(&layout)?;
        let gains = mimo_pa::geometry::point_gains(&layout, &grid);
        export::write_csv_file(&s.path("grid.csv"), |f| export::write_grid(f, &gains))?;
    }
    println!(
        "lambda_cc = {:e}, interference_sum = {:e} W",
        stats.lambda_cc, stats.interference_sum
    );
    Ok(())
}

fn ee_sweep(s: &Session, labels: &[String], k_max: usize) -> mimo_pa::Result<()> {
    if k_max == 0 {
        return Err(Error::Validation("--k-max must be at least 1".into()));
    }
    let stats = s.coupling()?;
    let cfg = &s.run.system;
    let mut curves = Vec::new();
    for label in labels {
        let p_max = config::parse_p_max(label, cfg.downlink_power_w).map_err(Error::Validation)?;
        let pa = s.run.pa.with_p_max(p_max);
        pa.validate()?;
        let curve = optimizer::ee_curve(cfg, &pa, &stats, 1..=k_max, s.run.scan.m_search_max)?;
        curves.push((label.clone(), curve));
    }
    export::write_csv_file(&s.path("ee_sweep.csv"), |f| {
        export::write_ee_sweep(f, &curves)
    })
}

fn variable_optimum(
    s: &Session,
    stats: &CouplingStats,
    family: PaFamily,
) -> mimo_pa::Result<optimizer::GlobalOptimum> {
    let pa = PaSpec { family, ..s.run.pa }.with_p_max(PmaxPolicy::Variable);
    optimizer::global_optimum(&s.run.system, &pa, stats, &s.run.scan)
}

fn global_opt(s: &Session) -> mimo_pa::Result<()> {
    let stats = s.coupling()?;
    let opt = optimizer::global_optimum(&s.run.system, &s.run.pa, &stats, &s.run.scan)?;
    export::write_csv_file(&s.path("global_opt.csv"), |f| {
        export::write_global_optimum(f, &opt)
    })?;
    let label = s.run.pa.family.as_str().to_string();
    export::write_csv_file(&s.path("global_curve.csv"), |f| {
        export::write_ee_sweep(f, &[(label, opt.curve.clone())])
    })?;
    println!(
        "M_gOpt = {}, K_gOpt = {}, EE = {:.6e} bit/J",
        opt.m_gopt, opt.k_gopt, opt.ee_bits_per_joule
    );
    Ok(())
}

/// Table for the configured amplifier with `m = K_gOpt` of the variable-headroom optimum.
fn configured_table(s: &Session, stats: &CouplingStats) -> mimo_pa::Result<LoadAdaptiveTable> {
    let opt = variable_optimum(s, stats, s.run.pa.family)?;
    let table = optimizer::build_table(
        &s.run.system,
        &s.run.pa,
        stats,
        opt.k_gopt,
        s.run.scan.m_search_max,
    )?;
    table.check_constraints(&s.run.system)?;
    Ok(table)
}

fn queue(s: &Session, loads: &[f64]) -> mimo_pa::Result<()> {
    if let Some(l) = loads.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
        return Err(Error::Validation(format!(
            "load fractions must be non-negative, got {l}"
        )));
    }
    let stats = s.coupling()?;
    let table = configured_table(s, &stats)?;
    let template = QueueInputs::new(s.run.traffic.traffic_per_user_bits, table.rates(), 0.0);
    let lambda_max = traffic::solve_lambda_max(&template, s.run.traffic.target_blocking)?;
    let rows = loads
        .iter()
        .map(|&l| {
            Ok((
                l,
                traffic::queue_distribution(&template.with_arrival_rate(l * lambda_max))?,
            ))
        })
        .collect::<mimo_pa::Result<Vec<_>>>()?;
    export::write_csv_file(&s.path("queue.csv"), |f| {
        export::write_load_distributions(f, &rows)
    })?;
    let profile = s.run.profile.load()?;
    let hourly = traffic::hourly_distributions(&profile, lambda_max, &template)?;
    export::write_csv_file(&s.path("hourly.csv"), |f| export::write_hourly(f, &hourly))?;
    export::write_csv_file(&s.path("table.csv"), |f| export::write_table(f, &table))?;
    println!(
        "m = {}, lambda_max = {:.6} sessions/s",
        table.max_users(),
        lambda_max
    );
    for (l, d) in &rows {
        println!(
            "load {l}: mean users {:.2}, blocking {:.6}",
            d.mean(),
            d.blocking()
        );
    }
    Ok(())
}

fn dimension(s: &Session, family: Option<PaFamily>) -> mimo_pa::Result<DimensioningReport> {
    let stats = s.coupling()?;
    let profile = s.run.profile.load()?;
    let template = s.template(family);
    let report = dimensioning::dimension_pa(
        &s.run.system,
        &stats,
        &profile,
        &template,
        &s.run.scan,
        &s.run.traffic,
    )?;
    export::write_csv_file(&s.path("dimension.csv"), |f| {
        export::write_dimensioning(f, &report)
    })?;
    export::write_json(&s.path("dimension.json"), &report)?;
    println!(
        "{}: best P_max,PA = {:.4} W ({} candidates), weighted EE = {:.6e} bit/J, gain over fixed M = {} is {:.1}%",
        report.family.as_str(),
        report.best_p_max_pa,
        report.candidates.len(),
        report.best_weighted_ee,
        report.m_gopt,
        report.gain_percent
    );
    Ok(report)
}

fn compare_baseline(
    s: &Session,
    family: Option<PaFamily>,
    pmax: Option<&str>,
) -> mimo_pa::Result<()> {
    let stats = s.coupling()?;
    let profile = s.run.profile.load()?;
    let template = s.template(family);
    let opt = variable_optimum(s, &stats, template.family)?;
    let pa = match pmax {
        Some(label) => match config::parse_p_max(label, s.run.system.downlink_power_w)
            .map_err(Error::Validation)?
        {
            PmaxPolicy::Variable => {
                return Err(Error::Validation("baseline needs a fixed P_max,PA".into()))
            }
            p => template.with_p_max(p),
        },
        None => dimension(s, family)?.best_pa(&template),
    };
    pa.validate()?;
    let cmp = dimensioning::baseline_comparison(
        &s.run.system,
        &pa,
        &stats,
        &profile,
        opt.m_gopt,
        opt.k_gopt,
        &s.run.traffic,
    )?;
    export::write_csv_file(&s.path("baseline.csv"), |f| {
        export::write_baseline_states(f, &cmp)
    })?;
    export::write_json(&s.path("baseline.json"), &cmp)?;
    println!(
        "gain {:.2}% (adaptive {:.6e} vs fixed {:.6e} bit/J), adaptive ahead in {:.0}% of states",
        cmp.gain_percent,
        cmp.adaptive_weighted_ee,
        cmp.fixed_weighted_ee,
        100.0 * cmp.dominance_fraction()
    );
    Ok(())
}

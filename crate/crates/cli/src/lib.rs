//! Command-line harness: scenario runs, controller comparisons, gain
//! verification and the canned reference reproduction.

mod artifacts;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use hosmc_core::gains::{find_gammas, inflate_gamma2_for_contraction, rho2_grid, scan_rho2, LmiReport};
use hosmc_core::{
    presets, run_scenario, verify_lmi, ControllerKind, Error, GainSet, RunMetrics, ScenarioConfig, Trajectory,
    DEFAULT_EIG_TOL, PRNG_ID,
};

pub use artifacts::{sha256_hex, signal_digest, OutputDir};

/// Identification window start used by the metric bundles.
pub const IDENTIFICATION_START: f64 = 5.0;
/// Eigenvalue tolerance of the ISS multiplier search.
pub const ISS_EIG_TOL: f64 = 1e-6;

pub mod exit {
    pub const OK: u8 = 0;
    pub const INTERNAL: u8 = 1;
    pub const CONFIG: u8 = 2;
    pub const LMI: u8 = 3;
    pub const DIVERGED: u8 = 4;
    pub const IO: u8 = 5;
}

#[derive(Debug, Parser)]
#[command(name = "hosmc", version, about = "Delayed ILF sliding-mode control: simulation and analysis")]
pub struct Cli {
    /// Override the noise seed of every scenario.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one scenario.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Exit with code 3 instead of simulating when the gains fail verification.
        #[arg(long)]
        require_certified: bool,
    },
    /// Simulate several controllers on one realized signal path.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "delayed,finite_time")]
        controllers: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        require_certified: bool,
    },
    /// Check the three gain LMIs and print per-block margins.
    VerifyGains {
        #[arg(long)]
        gains: PathBuf,
        /// Also try every rho2 on the interior grid of (0, rho1/Delta^2).
        #[arg(long)]
        scan_rho2: bool,
        #[arg(long, default_value_t = DEFAULT_EIG_TOL)]
        eig_tol: f64,
    },
    /// Compute the ISS multipliers and robustness constants.
    IssConstants {
        #[arg(long)]
        gains: PathBuf,
        #[arg(long)]
        chi: f64,
        #[arg(long, default_value_t = ISS_EIG_TOL)]
        eig_tol: f64,
    },
    /// Run the reference scenario with the embedded gains.
    PaperDemo {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Self::new(exit::IO, format!("{}: {e}", path.display()))
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Config(_) | Error::Structural(_) | Error::Domain(_) | Error::Contract(_) => exit::CONFIG,
            Error::Infeasible(_) | Error::Synthesis(_) => exit::LMI,
            Error::Diverged { .. } => exit::DIVERGED,
            Error::Solver(_) | Error::State(_) => exit::INTERNAL,
        };
        Self::new(code, e.to_string())
    }
}

type CliResult = std::result::Result<(), Failure>;

/// Parses `argv` (program name first), executes, and returns the exit code.
pub fn run_cli<I, T>(argv: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    ExitCode::from(run_cli_code(argv))
}

/// Like [`run_cli`] but returns the raw code.
pub fn run_cli_code<I, T>(argv: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::CONFIG } else { exit::OK };
        }
    };
    match execute(&cli) {
        Ok(()) => exit::OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

pub fn execute(cli: &Cli) -> CliResult {
    match &cli.command {
        Command::Run { config, out, require_certified } => {
            let cfg = load_config(config, cli.seed)?;
            let lmi = certificate(&cfg.gains, *require_certified)?;
            simulate_all(Some(config), &[cfg], out, &lmi, None)
        }
        Command::Compare { config, controllers, out, require_certified } => {
            let base = load_config(config, cli.seed)?;
            let kinds = controllers.iter().map(|c| ControllerKind::parse(c.trim())).collect::<Result<Vec<_>, _>>()?;
            if kinds.len() != 2 {
                return Err(Failure::new(exit::CONFIG, "compare needs exactly two controllers"));
            }
            let lmi = certificate(&base.gains, *require_certified)?;
            let cfgs: Vec<ScenarioConfig> = kinds.iter().map(|k| base.with_controller(*k)).collect();
            simulate_all(Some(config), &cfgs, out, &lmi, None)
        }
        Command::VerifyGains { gains, scan_rho2: scan, eig_tol } => verify_gains(gains, *scan, *eig_tol),
        Command::IssConstants { gains, chi, eig_tol } => iss_constants(gains, *chi, *eig_tol),
        Command::PaperDemo { out } => paper_demo(out, cli.seed),
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<ScenarioConfig, Failure> {
    let mut cfg = ScenarioConfig::from_json(&read_text(path)?)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn load_gains(path: &Path) -> Result<GainSet, Failure> {
    Ok(GainSet::from_json(&read_text(path)?)?)
}

fn certificate(g: &GainSet, required: bool) -> Result<LmiReport, Failure> {
    let report = verify_lmi(g, DEFAULT_EIG_TOL)?;
    if !report.passed() {
        let msg = format!("gains fail LMI verification (worst margin {:e})", report.worst_margin());
        if required {
            return Err(Failure::new(exit::LMI, msg));
        }
        eprintln!("warning: {msg}; simulating anyway");
    }
    Ok(report)
}

fn print_report(rho2: f64, r: &LmiReport) {
    for b in r.blocks() {
        println!(
            "{} rho2={rho2:.4} {:<36} margin={:+.6e} threshold={:.3e} min_eig={:+.6e} max_eig={:+.6e}",
            if b.passed { "PASS" } else { "FAIL" },
            b.name,
            b.margin,
            b.threshold,
            b.min_eig,
            b.max_eig
        );
    }
}

fn verify_gains(path: &Path, scan: bool, eig_tol: f64) -> CliResult {
    let g = load_gains(path)?;
    let report = verify_lmi(&g, eig_tol)?;
    print_report(g.rho2(), &report);
    let mut passed = report.passed();
    if scan && !passed {
        let grid = rho2_grid(g.rho1(), g.delta(), 19);
        let result = scan_rho2(&g, &grid, eig_tol)?;
        if let Some((rho2, best)) = result.best() {
            println!("scan: {} of {} rho2 values pass; best rho2={rho2:.4}", result.passing().len(), grid.len());
            print_report(rho2, best);
            passed = best.passed();
        }
    }
    if passed {
        Ok(())
    } else {
        Err(Failure::new(exit::LMI, "gains fail LMI verification"))
    }
}

fn iss_constants(path: &Path, chi: f64, eig_tol: f64) -> CliResult {
    let g = load_gains(path)?;
    let gammas = find_gammas(&g, eig_tol)?;
    let (gammas, iss) = inflate_gamma2_for_contraction(&g, &gammas, chi, eig_tol)?;
    let doc = json!({ "gammas": gammas, "iss": iss });
    println!("{}", serde_json::to_string_pretty(&doc).expect("iss constants serialize"));
    Ok(())
}

fn lmi_json(r: &LmiReport, rho2: f64) -> Value {
    json!({ "rho2": rho2, "passed": r.passed(), "worst_margin": r.worst_margin(), "blocks": r.blocks() })
}

fn paper_demo(out: &Path, seed: Option<u64>) -> CliResult {
    let mut base = presets::reference_scenario(ControllerKind::Delayed);
    if let Some(s) = seed {
        base.seed = s;
    }
    let g = &base.gains;
    let grid = rho2_grid(g.rho1(), g.delta(), 19);
    let scan = scan_rho2(g, &grid, DEFAULT_EIG_TOL)?;
    let (rho2, best) = scan.best().expect("nonempty grid");
    let lmi = best.clone();
    if !lmi.passed() {
        eprintln!(
            "warning: embedded gains fail LMI verification for every rho2 on the grid (best rho2={rho2:.2}, worst margin {:e})",
            lmi.worst_margin()
        );
    }
    let mut extra = json!({
        "rho2_scan": scan.entries.iter().map(|(r, rep)| lmi_json(rep, *r)).collect::<Vec<_>>(),
    });
    extra["iss"] = match find_gammas(g, ISS_EIG_TOL)
        .and_then(|gm| inflate_gamma2_for_contraction(g, &gm, base.chi, ISS_EIG_TOL))
    {
        Ok((gm, iss)) => json!({ "gammas": gm, "constants": iss }),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let cfgs = vec![base.clone(), base.with_controller(ControllerKind::FiniteTime)];
    simulate_all(None, &cfgs, out, &lmi, Some(extra))
}

struct RunOutcome {
    traj: Trajectory,
    elapsed: f64,
}

fn simulate_all(
    config_path: Option<&Path>,
    cfgs: &[ScenarioConfig],
    out: &Path,
    lmi: &LmiReport,
    extra: Option<Value>,
) -> CliResult {
    let mut dir = OutputDir::create(out)?;
    let outcomes: Vec<Result<RunOutcome, Error>> = std::thread::scope(|s| {
        let handles: Vec<_> = cfgs
            .iter()
            .map(|cfg| {
                s.spawn(move || {
                    let start = Instant::now();
                    run_scenario(cfg).map(|traj| RunOutcome { traj, elapsed: start.elapsed().as_secs_f64() })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("simulation thread panicked")).collect()
    });

    let mut runs = Vec::new();
    let mut metrics = Vec::new();
    let mut trajs = Vec::new();
    for (cfg, outcome) in cfgs.iter().zip(outcomes) {
        let name = cfg.controller.kind.name();
        let o = outcome.map_err(|e| match e {
            Error::Diverged { step, time, reason } => Failure::new(
                exit::DIVERGED,
                format!("{name}: simulation diverged at step {step} (t = {time}): {reason}"),
            ),
            other => Failure::from(other),
        })?;
        let csv_name = format!("trajectory_{name}.csv");
        dir.write(&csv_name, o.traj.to_csv().as_bytes())?;
        let m = RunMetrics::compute(name, &o.traj, IDENTIFICATION_START.min(cfg.horizon))?;
        let metrics_name = format!("metrics_{name}.json");
        dir.write(&metrics_name, m.to_json().as_bytes())?;
        let scenario_name = format!("scenario_{name}.json");
        let scenario = serde_json::to_string_pretty(&cfg.to_json_value()).expect("scenario serializes");
        dir.write(&scenario_name, scenario.as_bytes())?;
        runs.push(json!({
            "controller": name,
            "steps": o.traj.len() - 1,
            "samples": o.traj.len(),
            "wall_clock_seconds": o.elapsed,
            "signal_sha256": signal_digest(&o.traj),
            "trajectory": csv_name,
            "metrics": metrics_name,
            "scenario": scenario_name,
            "resolved_config": cfg.to_json_value(),
        }));
        metrics.push(m);
        trajs.push((name, o.traj));
    }

    let shared_signal_path = runs.windows(2).all(|w| w[0]["signal_sha256"] == w[1]["signal_sha256"]);
    if metrics.len() == 2 {
        dir.write("comparison.csv", artifacts::comparison_csv(&metrics[0], &metrics[1]).as_bytes())?;
        dir.write("comparison_long.csv", artifacts::long_csv(&trajs).as_bytes())?;
        if !shared_signal_path {
            return Err(Failure::new(exit::INTERNAL, "controllers saw different signal paths"));
        }
    }

    let mut manifest = json!({
        "tool": "hosmc",
        "version": env!("CARGO_PKG_VERSION"),
        "prng": PRNG_ID,
        "config_path": config_path.map(|p| p.display().to_string()),
        "output_dir": out.display().to_string(),
        "lmi": lmi_json(lmi, cfgs[0].gains.rho2()),
        "shared_signal_path": shared_signal_path,
        "runs": runs,
    });
    if let Some(Value::Object(map)) = extra {
        for (k, v) in map {
            manifest[k] = v;
        }
    }
    if cfgs.iter().all(|c| c.gains.to_json() == presets::reference_gains().to_json()) {
        dir.write("gains.json", presets::reference_gains().to_json().as_bytes())?;
    }
    dir.finish(manifest)
}

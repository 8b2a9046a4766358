//! `mepp` — command-line front end for the GHZ-mixture purification
//! simulator.
//!
//! Subcommands: `round`, `sweep`, `iterate`, `resources`, `faraday-scan`.
//! Values may come from a flat key/value `--config` file; command-line
//! flags override file values. CSV output uses `.` decimals and 17
//! significant digits, so identical configurations and seeds reproduce
//! byte-identical files.
//!
//! Exit codes: 0 success, 2 configuration error, 3 stagnation,
//! 4 leakage failure.

mod config;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use mepp_core::faraday::{self, CavityParams, GateSource};
use mepp_core::ghz::{GhzError, GhzMixture};
use mepp_core::protocol::{
    self, branch_dump_csv, monte_carlo_round, round_report_csv, simulate_round_exact, sweep_csv,
    ErrorMode, ProtocolError, RoundConfig, StopRule,
};
use mepp_core::resources::{
    binary_acceptance_probability, success_probability, EfficiencyParams, LossModel,
};

use config::Config;

const EXIT_CONFIG: i32 = 2;
const EXIT_STAGNATION: i32 = 3;
const EXIT_LEAKAGE: i32 = 4;

#[derive(Debug)]
enum CliError {
    Config(String),
    Stagnation(String),
    Leakage(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Stagnation(_) => EXIT_STAGNATION,
            CliError::Leakage(_) => EXIT_LEAKAGE,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) | CliError::Stagnation(m) | CliError::Leakage(m) => {
                f.write_str(m)
            }
        }
    }
}

impl From<config::ConfigError> for CliError {
    fn from(e: config::ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(format!("i/o error: {e}"))
    }
}

impl From<ProtocolError> for CliError {
    fn from(e: ProtocolError) -> Self {
        match e {
            ProtocolError::Stagnation { .. } => CliError::Stagnation(e.to_string()),
            ProtocolError::Ghz(GhzError::Leakage { .. }) => CliError::Leakage(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<GhzError> for CliError {
    fn from(e: GhzError) -> Self {
        match e {
            GhzError::Leakage { .. } => CliError::Leakage(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<faraday::FaradayError> for CliError {
    fn from(e: faraday::FaradayError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<mepp_core::resources::ResourceError> for CliError {
    fn from(e: mepp_core::resources::ResourceError) -> Self {
        CliError::Config(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "mepp",
    version,
    about = "Exact simulator and calculator for GHZ-mixture entanglement purification"
)]
struct Cli {
    /// Flat key/value configuration file; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one purification round exactly (plus Monte Carlo when
    /// --trials > 0); writes the branch dump CSV to --out.
    Round(RoundArgs),
    /// Tabulate the binary fidelity map F -> F' over a grid.
    Sweep(SweepArgs),
    /// Iterate the fidelity recursion to a round count or a target.
    Iterate(IterateArgs),
    /// Compose the physical per-attempt success probability.
    Resources(ResourcesArgs),
    /// Scan the cavity reflection coefficient over the photon frequency.
    FaradayScan(FaradayScanArgs),
}

#[derive(Args, Clone, Default)]
struct CavityFlags {
    /// Use the exact working-point gate phases (overrides cavity values).
    #[arg(long)]
    ideal: bool,
    #[arg(long, value_name = "RAD/S")]
    omega_c: Option<f64>,
    #[arg(long, value_name = "RAD/S")]
    omega_0: Option<f64>,
    #[arg(long, value_name = "RAD/S")]
    omega_p: Option<f64>,
    #[arg(long, value_name = "RAD/S")]
    kappa: Option<f64>,
    #[arg(long, value_name = "RAD/S")]
    gamma: Option<f64>,
    #[arg(long, value_name = "RAD/S")]
    g: Option<f64>,
}

#[derive(Args, Clone, Default)]
struct EfficiencyFlags {
    /// Fiber coupling/transmission probability T_f.
    #[arg(long = "t-f", value_name = "PROB")]
    t_f: Option<f64>,
    /// Optical-element transmission eta_0.
    #[arg(long = "eta-0", value_name = "PROB")]
    eta_0: Option<f64>,
    /// Single-photon detector efficiency eta_d.
    #[arg(long = "eta-d", value_name = "PROB")]
    eta_d: Option<f64>,
    /// Atomic measurement efficiency eta_a.
    #[arg(long = "eta-a", value_name = "PROB")]
    eta_a: Option<f64>,
    /// Charge fiber and optical losses once per photon (N times).
    #[arg(long)]
    per_photon_losses: bool,
}

#[derive(Args)]
struct RoundArgs {
    /// Number of parties N.
    #[arg(long)]
    n: Option<usize>,
    /// Error family to purify: bit-flip or phase-flip.
    #[arg(long, value_name = "MODE")]
    error: Option<String>,
    /// Fidelity of a binary input mixture.
    #[arg(long = "F", value_name = "FLOAT")]
    fidelity: Option<f64>,
    /// Mixture file (flips<TAB>sign<TAB>weight per line).
    #[arg(long, value_name = "PATH")]
    mixture: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo trials to run alongside the exact round (0 = none).
    #[arg(long)]
    trials: Option<usize>,
    /// Branch-dump CSV path.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Ceiling on the kept state's GHZ-diagonal leakage.
    #[arg(long, value_name = "FLOAT")]
    leakage_threshold: Option<f64>,
    #[command(flatten)]
    cavity: CavityFlags,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_name = "FLOAT")]
    f_min: Option<f64>,
    #[arg(long, value_name = "FLOAT")]
    f_max: Option<f64>,
    #[arg(long, value_name = "FLOAT")]
    f_step: Option<f64>,
    /// Sweep CSV path (stdout when omitted).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct IterateArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_name = "MODE")]
    error: Option<String>,
    #[arg(long = "F", value_name = "FLOAT")]
    fidelity: Option<f64>,
    #[arg(long, value_name = "PATH")]
    mixture: Option<PathBuf>,
    /// Number of rounds to run.
    #[arg(long)]
    rounds: Option<usize>,
    /// Target fidelity to reach.
    #[arg(long, value_name = "FLOAT")]
    target: Option<f64>,
    /// Fold the physical efficiency factors into the success probabilities.
    #[arg(long)]
    with_efficiencies: bool,
    #[command(flatten)]
    efficiencies: EfficiencyFlags,
    /// Round-report CSV path (stdout when omitted).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ResourcesArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long = "F", value_name = "FLOAT")]
    fidelity: Option<f64>,
    #[command(flatten)]
    efficiencies: EfficiencyFlags,
    /// Write the summary to a file as well as stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FaradayScanArgs {
    #[arg(long, value_name = "RAD/S")]
    omega_p_min: Option<f64>,
    #[arg(long, value_name = "RAD/S")]
    omega_p_max: Option<f64>,
    /// Number of scan rows.
    #[arg(long)]
    steps: Option<usize>,
    #[command(flatten)]
    cavity: CavityFlags,
    /// Scan CSV path (stdout when omitted).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

fn main() {
    // CSV output is meant to be piped; die quietly on a closed pipe
    // instead of panicking in println!.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    let file_config = match load_config(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(EXIT_CONFIG);
        }
    };
    let result = match cli.command {
        Command::Round(args) => cmd_round(args, &file_config),
        Command::Sweep(args) => cmd_sweep(args, &file_config),
        Command::Iterate(args) => cmd_iterate(args, &file_config),
        Command::Resources(args) => cmd_resources(args, &file_config),
        Command::FaradayScan(args) => cmd_faraday_scan(args, &file_config),
    };
    match result {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<Config, CliError> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p)?;
            Ok(Config::parse(&text)?)
        }
        None => Ok(Config::default()),
    }
}

fn write_out(path: Option<&Path>, content: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, content)?,
        None => print!("{content}"),
    }
    Ok(())
}

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_error_mode(s: &str) -> Result<ErrorMode, CliError> {
    match s {
        "bit-flip" => Ok(ErrorMode::BitFlip),
        "phase-flip" => Ok(ErrorMode::PhaseFlip),
        other => Err(CliError::Config(format!(
            "unknown error mode `{other}` (expected bit-flip or phase-flip)"
        ))),
    }
}

fn resolve_error_mode(flag: Option<&str>, cfg: &Config) -> Result<ErrorMode, CliError> {
    match flag.map(str::to_string).or_else(|| cfg.get_string("error")) {
        Some(s) => parse_error_mode(&s),
        None => Ok(ErrorMode::BitFlip),
    }
}

/// Build the cavity parameter set from flags over config over the
/// dimensionless working point. `None` means the exact ideal gate.
fn resolve_cavity(flags: &CavityFlags, cfg: &Config) -> Result<Option<CavityParams>, CliError> {
    let ideal_requested = flags.ideal || cfg.get_bool("ideal_point")?.unwrap_or(false);
    let mut params = CavityParams::ideal();
    let mut any = false;
    {
        let mut set = |slot: &mut f64, flag: Option<f64>, key: &str| -> Result<(), CliError> {
            if let Some(v) = flag.or(cfg.get_f64(key)?) {
                *slot = v;
                any = true;
            }
            Ok(())
        };
        set(&mut params.omega_c, flags.omega_c, "omega_c")?;
        set(&mut params.omega_0, flags.omega_0, "omega_0")?;
        set(&mut params.omega_p, flags.omega_p, "omega_p")?;
        set(&mut params.kappa, flags.kappa, "kappa")?;
        set(&mut params.gamma, flags.gamma, "gamma")?;
        set(&mut params.g, flags.g, "g")?;
    }
    if ideal_requested {
        // `ideal_point` overrides any explicit cavity values.
        return Ok(None);
    }
    Ok(if any { Some(params) } else { None })
}

fn resolve_gate_source(flags: &CavityFlags, cfg: &Config) -> Result<GateSource, CliError> {
    Ok(match resolve_cavity(flags, cfg)? {
        Some(params) => GateSource::FromParams(params),
        None => GateSource::Ideal,
    })
}

fn resolve_efficiencies(
    flags: &EfficiencyFlags,
    cfg: &Config,
) -> Result<(EfficiencyParams, LossModel), CliError> {
    let mut eff = EfficiencyParams::cited_defaults();
    if let Some(v) = flags.t_f.or(cfg.get_f64("T_f")?) {
        eff.fiber_transmission = v;
    }
    if let Some(v) = flags.eta_0.or(cfg.get_f64("eta_0")?) {
        eff.optical_transmission = v;
    }
    if let Some(v) = flags.eta_d.or(cfg.get_f64("eta_d")?) {
        eff.detector_efficiency = v;
    }
    if let Some(v) = flags.eta_a.or(cfg.get_f64("eta_a")?) {
        eff.atom_measurement_efficiency = v;
    }
    eff.validate().map_err(CliError::from)?;
    let per_photon = flags.per_photon_losses || cfg.get_bool("per_photon_losses")?.unwrap_or(false);
    let model = if per_photon {
        LossModel::PerPhotonLosses
    } else {
        LossModel::AsPublished
    };
    Ok((eff, model))
}

/// Exactly one mixture source: an inline fidelity or a mixture file.
fn resolve_mixture(
    fidelity: Option<f64>,
    mixture_path: Option<&Path>,
    n: usize,
    mode: ErrorMode,
    cfg: &Config,
) -> Result<GhzMixture, CliError> {
    let fidelity = fidelity.or(cfg.get_f64("fidelity")?);
    let path = mixture_path
        .map(Path::to_path_buf)
        .or_else(|| cfg.get_string("mixture").map(PathBuf::from));
    match (fidelity, path) {
        (Some(_), Some(_)) => Err(CliError::Config(
            "give either --F or --mixture, not both".into(),
        )),
        (None, None) => Err(CliError::Config(
            "a mixture source is required: --F FLOAT or --mixture PATH".into(),
        )),
        (Some(f), None) => {
            if !(0.0..=1.0).contains(&f) {
                return Err(CliError::Config(format!("fidelity {f} outside [0, 1]")));
            }
            Ok(match mode {
                ErrorMode::BitFlip => GhzMixture::binary_bit_flip(n, f)?,
                ErrorMode::PhaseFlip => GhzMixture::binary_phase_flip(n, f)?,
            })
        }
        (None, Some(p)) => {
            let text = fs::read_to_string(&p)?;
            let m = GhzMixture::from_file_string(&text)?;
            if m.n_parties() != n {
                return Err(CliError::Config(format!(
                    "mixture file has {} parties but n = {n}",
                    m.n_parties()
                )));
            }
            Ok(m)
        }
    }
}

fn resolve_n(flag: Option<usize>, cfg: &Config) -> Result<usize, CliError> {
    Ok(flag.or(cfg.get_usize("n")?).unwrap_or(3))
}

fn cmd_round(args: RoundArgs, cfg: &Config) -> Result<(), CliError> {
    let n = resolve_n(args.n, cfg)?;
    let mode = resolve_error_mode(args.error.as_deref(), cfg)?;
    let mixture = resolve_mixture(args.fidelity, args.mixture.as_deref(), n, mode, cfg)?;
    let seed = args.seed.or(cfg.get_u64("seed")?).unwrap_or(0);
    let trials = args.trials.or(cfg.get_usize("trials")?).unwrap_or(0);
    let out = args
        .out
        .or_else(|| cfg.get_string("out").map(PathBuf::from));

    let mut round_cfg = RoundConfig::new(n, mode)
        .with_gate_source(resolve_gate_source(&args.cavity, cfg)?)
        .with_seed(seed);
    if let Some(t) = args.leakage_threshold.or(cfg.get_f64("leakage_threshold")?) {
        round_cfg.leakage_threshold = t;
    }
    round_cfg.validate().map_err(CliError::from)?;

    let report = simulate_round_exact(&mixture, &round_cfg)?;

    println!("n_parties = {n}");
    println!(
        "error_mode = {}",
        match mode {
            ErrorMode::BitFlip => "bit-flip",
            ErrorMode::PhaseFlip => "phase-flip",
        }
    );
    println!(
        "acceptance_probability = {}",
        fmt17(report.acceptance_probability)
    );
    println!("kept_fidelity = {}", fmt17(report.kept_fidelity));
    println!("leakage = {}", fmt17(report.leakage));
    if let Some(kept) = &report.kept_mixture {
        println!("kept_mixture:");
        print!("{}", kept.to_file_string());
    }

    if trials > 0 {
        let mc = monte_carlo_round(&mixture, &round_cfg, trials)?;
        println!("monte_carlo_trials = {trials}");
        println!("monte_carlo_seed = {seed}");
        println!("monte_carlo_acceptance = {}", fmt17(mc.acceptance_rate));
        println!(
            "monte_carlo_acceptance_stderr = {}",
            fmt17(mc.acceptance_stderr)
        );
        println!("monte_carlo_kept_fidelity = {}", fmt17(mc.kept_fidelity));
        println!(
            "monte_carlo_kept_fidelity_stderr = {}",
            fmt17(mc.kept_fidelity_stderr)
        );
    }

    write_out(out.as_deref(), &branch_dump_csv(&report.branches))?;

    if report.kept_mixture.is_none() {
        return Err(CliError::Leakage(format!(
            "kept state leaks {:.3e} outside the GHZ diagonal (threshold {:.0e})",
            report.leakage, round_cfg.leakage_threshold
        )));
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs, cfg: &Config) -> Result<(), CliError> {
    let n = resolve_n(args.n, cfg)?;
    let f_min = args.f_min.or(cfg.get_f64("f_min")?).unwrap_or(0.05);
    let f_max = args.f_max.or(cfg.get_f64("f_max")?).unwrap_or(0.95);
    let f_step = args.f_step.or(cfg.get_f64("f_step")?).unwrap_or(0.05);
    if !(0.0 < f_min && f_min <= f_max && f_max < 1.0 && f_step > 0.0) {
        return Err(CliError::Config(format!(
            "sweep range must satisfy 0 < f_min <= f_max < 1 with positive step, got [{f_min}, {f_max}] step {f_step}"
        )));
    }
    let mut grid = Vec::new();
    let mut f = f_min;
    while f <= f_max + 1e-12 {
        grid.push(f);
        f += f_step;
    }
    let rows = protocol::sweep_binary_fidelity(n, &grid)?;
    let out = args
        .out
        .or_else(|| cfg.get_string("out").map(PathBuf::from));
    write_out(out.as_deref(), &sweep_csv(&rows))
}

fn cmd_iterate(args: IterateArgs, cfg: &Config) -> Result<(), CliError> {
    let n = resolve_n(args.n, cfg)?;
    let mode = resolve_error_mode(args.error.as_deref(), cfg)?;
    let mixture = resolve_mixture(args.fidelity, args.mixture.as_deref(), n, mode, cfg)?;
    let rounds = args.rounds.or(cfg.get_usize("rounds")?);
    let target = args.target.or(cfg.get_f64("target")?);
    let stop = match (rounds, target) {
        (Some(r), None) => StopRule::Rounds(r),
        (None, Some(t)) => StopRule::TargetFidelity(t),
        _ => {
            return Err(CliError::Config(
                "give exactly one of --rounds or --target".into(),
            ))
        }
    };
    let with_eff = args.with_efficiencies || cfg.get_bool("with_efficiencies")?.unwrap_or(false);
    let eff = if with_eff {
        Some(resolve_efficiencies(&args.efficiencies, cfg)?)
    } else {
        None
    };
    let states = protocol::iterate(&mixture, stop, eff.as_ref().map(|(e, m)| (e, *m)))?;
    let out = args
        .out
        .or_else(|| cfg.get_string("out").map(PathBuf::from));
    write_out(out.as_deref(), &round_report_csv(&states))
}

fn cmd_resources(args: ResourcesArgs, cfg: &Config) -> Result<(), CliError> {
    let n = resolve_n(args.n, cfg)?;
    let fidelity = args.fidelity.or(cfg.get_f64("fidelity")?).unwrap_or(0.8);
    if !(0.0..=1.0).contains(&fidelity) {
        return Err(CliError::Config(format!(
            "fidelity {fidelity} outside [0, 1]"
        )));
    }
    let (eff, model) = resolve_efficiencies(&args.efficiencies, cfg)?;
    let p_p = binary_acceptance_probability(fidelity);
    let p_published = success_probability(p_p, n, &eff, LossModel::AsPublished)?;
    let p_per_photon = success_probability(p_p, n, &eff, LossModel::PerPhotonLosses)?;
    let selected = match model {
        LossModel::AsPublished => p_published,
        LossModel::PerPhotonLosses => p_per_photon,
    };
    let mut text = String::new();
    text.push_str(&format!("n_parties = {n}\n"));
    text.push_str(&format!("fidelity = {}\n", fmt17(fidelity)));
    text.push_str(&format!("P_p = {}\n", fmt17(p_p)));
    text.push_str(&format!("P = {}\n", fmt17(selected)));
    text.push_str(&format!("P_published_model = {}\n", fmt17(p_published)));
    text.push_str(&format!("P_per_photon_losses = {}\n", fmt17(p_per_photon)));
    print!("{text}");
    if let Some(out) = args.out.or_else(|| cfg.get_string("out").map(PathBuf::from)) {
        fs::write(out, text)?;
    }
    Ok(())
}

fn cmd_faraday_scan(args: FaradayScanArgs, cfg: &Config) -> Result<(), CliError> {
    let cavity = resolve_cavity(&args.cavity, cfg)?.unwrap_or_else(CavityParams::ideal);
    cavity
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let min = args
        .omega_p_min
        .or(cfg.get_f64("omega_p_min")?)
        .unwrap_or(cavity.omega_c - cavity.kappa);
    let max = args
        .omega_p_max
        .or(cfg.get_f64("omega_p_max")?)
        .unwrap_or(cavity.omega_c + cavity.kappa);
    let steps = args.steps.or(cfg.get_usize("steps")?).unwrap_or(201);
    if !(min < max && steps >= 2) {
        return Err(CliError::Config(format!(
            "need omega_p_min < omega_p_max and steps >= 2, got [{min}, {max}] x {steps}"
        )));
    }

    let mut csv = String::from("omega_p,re_r,im_r,theta,theta_0,rotation\n");
    let mut crossing: Option<f64> = None;
    for i in 0..steps {
        let omega_p = min + (max - min) * i as f64 / (steps - 1) as f64;
        let p = CavityParams { omega_p, ..cavity };
        let r = faraday::reflection_coupled(&p)?;
        let ph = faraday::phases_with_override(&p, true)?;
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            fmt17(omega_p),
            fmt17(r.re),
            fmt17(r.im),
            fmt17(ph.theta),
            fmt17(ph.theta_0),
            fmt17(ph.rotation)
        ));
        let dev = faraday::circular_distance(2.0 * ph.rotation, std::f64::consts::FRAC_PI_2) / 2.0;
        if dev < 1e-9 && crossing.is_none() {
            crossing = Some(omega_p);
        }
    }
    if let Some(omega_p) = crossing {
        eprintln!("ideal point crossed at omega_p = {}", fmt17(omega_p));
    }
    let out = args
        .out
        .or_else(|| cfg.get_string("out").map(PathBuf::from));
    write_out(out.as_deref(), &csv)
}

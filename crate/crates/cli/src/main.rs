//! `fbn`: batch front-end for the fractional Brezis–Nirenberg numerics.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use error::CliError;

#[derive(Parser)]
#[command(name = "fbn", version, about = "Fractional Brezis–Nirenberg numerics")]
struct Cli {
    /// key = value configuration file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Print config keys, CSV columns and exit codes.
    #[arg(long)]
    schema: bool,
    #[command(flatten)]
    flags: Flags,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Closed-form constants and their identities.
    Constants,
    /// Bubble profile, PDE residual and L^p norm.
    Bubble,
    /// Green's function of the ball (and of a + (−Δ)^s for N = 1).
    Greens,
    /// Robin function and its boundary rate.
    Robin,
    /// Constant shift making the potential critical.
    CriticalShift,
    /// λ-sweep of the test-function quotient and its expansion fit.
    EnergyScan,
    /// Quotient minimization, or a scaling study when eps_ladder is set.
    Minimize,
    /// Balanced Druet ratio of a profile read from --u-file.
    DruetCheck,
    /// Summarize the checks of all JSON outputs in --out.
    Report,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Constants => "constants",
            Command::Bubble => "bubble",
            Command::Greens => "greens",
            Command::Robin => "robin",
            Command::CriticalShift => "critical-shift",
            Command::EnergyScan => "energy-scan",
            Command::Minimize => "minimize",
            Command::DruetCheck => "druet-check",
            Command::Report => "report",
        }
    }
}

/// Per-key overrides; every configuration key has a flag.
#[derive(Args)]
struct Flags {
    #[arg(long = "N", global = true)]
    n: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    s: Option<String>,
    #[arg(long, global = true)]
    h: Option<String>,
    #[arg(long, global = true)]
    h_focus: Option<String>,
    #[arg(long, global = true)]
    growth: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    x: Option<String>,
    #[arg(long, global = true)]
    lambda: Option<String>,
    #[arg(long, global = true)]
    lambdas: Option<String>,
    #[arg(long, global = true)]
    eps: Option<String>,
    #[arg(long, global = true)]
    eps_ladder: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    a: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    v: Option<String>,
    #[arg(long, global = true)]
    a_file: Option<String>,
    #[arg(long = "V-file", alias = "v-file", global = true)]
    v_file: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    shift: Option<String>,
    #[arg(long, global = true)]
    tol: Option<String>,
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    check_quadrature: Option<String>,
    #[arg(long, global = true)]
    zero_tol: Option<String>,
    #[arg(long, global = true)]
    tail_order: Option<String>,
    #[arg(long, global = true)]
    mixed_order: Option<String>,
    #[arg(long, global = true)]
    phi_tol: Option<String>,
    #[arg(long, global = true)]
    max_iter: Option<String>,
    #[arg(long, global = true)]
    u_file: Option<String>,
    #[arg(long, global = true)]
    out: Option<String>,
}

impl Flags {
    fn pairs(&self) -> Vec<(&'static str, &str)> {
        [
            ("n", &self.n),
            ("s", &self.s),
            ("h", &self.h),
            ("h_focus", &self.h_focus),
            ("growth", &self.growth),
            ("x", &self.x),
            ("lambda", &self.lambda),
            ("lambdas", &self.lambdas),
            ("eps", &self.eps),
            ("eps_ladder", &self.eps_ladder),
            ("a", &self.a),
            ("v", &self.v),
            ("a_file", &self.a_file),
            ("v_file", &self.v_file),
            ("shift", &self.shift),
            ("tol", &self.tol),
            ("check_quadrature", &self.check_quadrature),
            ("zero_tol", &self.zero_tol),
            ("tail_order", &self.tail_order),
            ("mixed_order", &self.mixed_order),
            ("phi_tol", &self.phi_tol),
            ("max_iter", &self.max_iter),
            ("u_file", &self.u_file),
            ("out", &self.out),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.as_deref().map(|v| (k, v)))
        .collect()
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.apply_text(&text)?;
    }
    for (k, v) in cli.flags.pairs() {
        cfg.set(k, v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: &Cli, command: Command) -> Result<(), CliError> {
    let cfg = load_config(cli)?;
    if let Command::Report = command {
        let dir = cfg.out.as_ref().ok_or_else(|| CliError::Config("report needs --out".into()))?;
        print!("{}", output::emit_report(dir)?);
        return Ok(());
    }
    let name = command.name();
    let out = commands::run(name, &cfg)?;
    let json = output::render_json(name, &cfg, &out)?;
    if let Some(dir) = &cfg.out {
        output::write_files(dir, name, &cfg, &out, &json)?;
    }
    println!("{json}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.schema {
        print!("{}", commands::schema_text());
        return ExitCode::SUCCESS;
    }
    let Some(command) = cli.command else {
        eprintln!("error: no subcommand given (see --help)");
        return ExitCode::from(2);
    };
    match execute(&cli, command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

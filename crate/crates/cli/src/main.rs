use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use heatlab_cli::config::Suite;
use heatlab_cli::run::{EXIT_CONFIG, EXIT_IO};
use heatlab_cli::{parse_config_with, run, Command, Override};

#[derive(Parser)]
#[command(name = "heatlab", version, about = "Heat kernels of weighted dbar-Laplacians on the plane")]
struct Cli {
    /// Run configuration (line-oriented `[section]` / `key = value`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Allow tau = 0.
    #[arg(long, global = true)]
    oracle_mode: bool,
    /// Override one key, `section.key=value`; repeatable.
    #[arg(long = "set", global = true, value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Default)]
struct Shared {
    /// Model polynomial, `p1:m` or `p2:m`.
    #[arg(long)]
    p: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    tau: Option<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Size functions Λ, μ and the radius R_{τp} at the configured points.
    Geom(Shared),
    /// Grid and closed-form control distances between configured points.
    Rho(Shared),
    /// Kernel column H(s, ·, w0) on the schedule.
    Kernel {
        #[command(flatten)]
        shared: Shared,
        #[arg(long = "L")]
        half_width: Option<String>,
        #[arg(long)]
        n: Option<String>,
        #[arg(long)]
        dt: Option<String>,
        /// `a, b`
        #[arg(long, allow_hyphen_values = true)]
        w0: Option<String>,
        /// `log:a:b:n`, `lin:a:b:n`, or a comma list.
        #[arg(long)]
        schedule: Option<String>,
    },
    /// Monte Carlo estimate of H(s, x, y).
    Mc {
        #[command(flatten)]
        shared: Shared,
        #[arg(long, allow_hyphen_values = true)]
        x: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        y: Option<String>,
        #[arg(long)]
        s: Option<String>,
        #[arg(long)]
        n_paths: Option<String>,
        #[arg(long)]
        n_t: Option<String>,
        #[arg(long)]
        seed: Option<String>,
    },
    /// Fundamental solution G(·, w0).
    Gfield(Shared),
    /// Run a verification suite.
    Verify {
        #[command(flatten)]
        shared: Shared,
        /// gaussian|longtime|energy|derivs|subsolution|scaling|gbounds|appendix|all
        suite: Option<String>,
    },
}

fn push(o: &mut Vec<Override>, section: &str, key: &str, v: &Option<String>) {
    if let Some(v) = v {
        o.push(Override { section: section.into(), key: key.into(), value: v.clone() });
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut overrides = Vec::new();
    for s in &cli.set {
        match Override::parse(s) {
            Some(o) => overrides.push(o),
            None => {
                eprintln!("error: --set expects section.key=value, got '{s}'");
                return ExitCode::from(EXIT_CONFIG as u8);
            }
        }
    }
    let shared = |o: &mut Vec<Override>, s: &Shared| {
        push(o, "polynomial", "model", &s.p);
        push(o, "operator", "tau", &s.tau);
    };
    let command = match &cli.command {
        Cmd::Geom(s) => {
            shared(&mut overrides, s);
            Command::Geom
        }
        Cmd::Rho(s) => {
            shared(&mut overrides, s);
            Command::Rho
        }
        Cmd::Kernel { shared: s, half_width, n, dt, w0, schedule } => {
            shared(&mut overrides, s);
            push(&mut overrides, "operator", "L", half_width);
            push(&mut overrides, "operator", "n", n);
            push(&mut overrides, "solver", "dt", dt);
            push(&mut overrides, "solver", "w0", w0);
            push(&mut overrides, "solver", "schedule", schedule);
            Command::Kernel
        }
        Cmd::Mc { shared: s, x, y, s: time, n_paths, n_t, seed } => {
            shared(&mut overrides, s);
            push(&mut overrides, "mc", "x", x);
            push(&mut overrides, "mc", "y", y);
            push(&mut overrides, "mc", "s", time);
            push(&mut overrides, "mc", "n_paths", n_paths);
            push(&mut overrides, "mc", "n_t", n_t);
            push(&mut overrides, "mc", "seed", seed);
            Command::Mc
        }
        Cmd::Gfield(s) => {
            shared(&mut overrides, s);
            Command::Gfield
        }
        Cmd::Verify { shared: s, suite } => {
            shared(&mut overrides, s);
            push(&mut overrides, "verify", "suite", suite);
            Command::Verify(Suite::All)
        }
    };
    let text = match &cli.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: cannot read {}: {e}", path.display());
                return ExitCode::from(EXIT_IO as u8);
            }
        },
        None => String::new(),
    };
    let cfg = match parse_config_with(&text, &overrides, cli.oracle_mode) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error:\n{e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    let command = match command {
        Command::Verify(_) => Command::Verify(cfg.suite),
        c => c,
    };
    match run(&cfg, command, &cli.out) {
        Ok(outcome) => {
            print!("{}", outcome.summary);
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

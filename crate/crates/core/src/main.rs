use clap::{Parser, Subcommand};
use kvcontact::output::RunWriter;
use kvcontact::runner::simulate;
use kvcontact::scenario::{preset, Scenario, PRESET_NAMES};
use kvcontact::Error;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "kvcontact", version, about = "Quasistatic frictional contact of two viscoelastic bodies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file or a built-in preset.
    Run {
        /// Scenario TOML file.
        scenario: Option<PathBuf>,
        /// Built-in preset instead of a file.
        #[arg(long, conflicts_with = "scenario")]
        preset: Option<String>,
        /// Write the resolved scenario TOML to this path and exit.
        #[arg(long)]
        export: Option<PathBuf>,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Initial (or fixed) time step.
        #[arg(long)]
        tau: Option<f64>,
        /// Enable residuum-based step control.
        #[arg(long)]
        adaptive: bool,
        /// Residuum tolerance in µJ; implies --adaptive.
        #[arg(long)]
        eps: Option<f64>,
        /// SVG snapshot cadence in steps, 0 for none.
        #[arg(long)]
        plot_every: Option<usize>,
        /// Directory for cached influence matrices.
        #[arg(long)]
        cache: Option<PathBuf>,
    },
    /// List the built-in presets.
    Presets,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } => 2,
        Error::TauDeadlock { .. } => 4,
        _ => 3,
    }
}

#[allow(clippy::too_many_arguments)]
fn run(
    file: Option<PathBuf>,
    preset_name: Option<String>,
    export: Option<PathBuf>,
    out: PathBuf,
    tau: Option<f64>,
    adaptive: bool,
    eps: Option<f64>,
    plot_every: Option<usize>,
    cache: Option<PathBuf>,
) -> kvcontact::Result<()> {
    let mut scenario = match (file, preset_name) {
        (Some(path), _) => Scenario::load_file(&path)?,
        (None, Some(name)) => preset(&name)
            .ok_or_else(|| Error::config("preset", format!("unknown preset `{name}`; one of {}", PRESET_NAMES.join(", "))))?,
        (None, None) => return Err(Error::config("scenario", "give a scenario file or --preset")),
    };
    if let Some(t) = tau {
        scenario.solver.tau = t;
    }
    if let Some(e) = eps {
        scenario.solver.eps_uj = Some(e);
    } else if adaptive && scenario.solver.eps_uj.is_none() {
        scenario.solver.eps_uj = Some(1.0);
    }
    if scenario.solver.eps_uj.is_some() {
        let s = &mut scenario.solver;
        s.tau_min.get_or_insert(s.tau * 1e-3);
        s.tau_max.get_or_insert(s.tau * 4.0);
    }
    if let Some(p) = plot_every {
        scenario.output.plot_every = p;
    }
    scenario.validate()?;
    if let Some(path) = export {
        std::fs::write(&path, scenario.to_toml())?;
        println!("wrote {}", path.display());
        return Ok(());
    }
    let im = scenario.influence(cache.as_deref())?;
    let mut writer = RunWriter::create(&out, &scenario)?;
    let report = simulate(&scenario, &im, Some(&mut writer))?;
    let s = &report.summary;
    println!(
        "{}: {} steps accepted, {} rejected, {} forced, {} QP iterations, t = {:.6e}",
        scenario.name, s.accepted, s.rejected, s.forced, s.qp_iterations, s.final_time
    );
    println!(
        "energy: stored {:.6e} dissipated {:.6e} work {:.6e} residuum {:.6e} N·mm",
        s.ledger.stored,
        s.ledger.friction + s.ledger.viscous,
        s.ledger.work,
        s.ledger.residuum
    );
    println!("output in {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { scenario, preset, export, out, tau, adaptive, eps, plot_every, cache } => {
            run(scenario, preset, export, out, tau, adaptive, eps, plot_every, cache)
        }
        Command::Presets => {
            for name in PRESET_NAMES {
                println!("{name}");
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

mod builtins;
mod config;
mod error;
mod output;
mod plan;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use config::{Kind, ScenarioConfig};
use error::CliError;
use output::Output;

#[derive(Parser)]
#[command(name = "entropy-lab", version, about = "Relative-entropy production experiments")]
struct Cli {
    /// Scenario file (TOML)
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Artifact directory, overriding `outputs.directory`
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed, overriding `numerics.seed`
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Grid Fokker-Planck relaxation with divergence and rate curves
    FpRun { builtin: Option<String> },
    /// Controlled grid evolution (gain-modulated, direct feedback or linear)
    ControlRun { builtin: Option<String> },
    /// Langevin ensemble, overdamped or polymer
    SdeRun { builtin: Option<String> },
    /// Closed or Lindblad evolution of a finite quantum system
    QuantumRun { builtin: Option<String> },
    /// Forward/backward drift kinematics of a path ensemble
    PathsRun { builtin: Option<String> },
    /// Split of the divergence rate into dissipation and control terms
    Decompose { builtin: Option<String> },
    /// Run a builtin scenario, or a config file with `scenario.kind` set
    Run { builtin: Option<String> },
    /// Print a builtin scenario as a config file
    Show { builtin: String },
    /// List builtin scenarios
    List {
        #[arg(long)]
        json: bool,
    },
}

fn load(cli: &Cli, builtin: Option<&str>) -> Result<(ScenarioConfig, PathBuf), CliError> {
    match (builtin, &cli.config) {
        (Some(_), Some(_)) => Err(CliError::Config("give a builtin name or --config, not both".into())),
        (Some(name), None) => {
            let b = builtins::find(name).ok_or_else(|| CliError::Config(format!("unknown builtin {name:?}; see `entropy-lab list`")))?;
            Ok((ScenarioConfig::parse(b.config)?, PathBuf::from(".")))
        }
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            let cfg = ScenarioConfig::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            Ok((cfg, base))
        }
        (None, None) => Err(CliError::Config("no scenario: give --config FILE or a builtin name".into())),
    }
}

fn run_scenario(cli: &Cli, builtin: Option<&str>, kind: Option<Kind>) -> Result<(), CliError> {
    let (mut cfg, base) = load(cli, builtin)?;
    let kind = kind.or(cfg.scenario.kind).ok_or_else(|| CliError::config("scenario.kind", "missing"))?;
    if let Some(seed) = cli.seed {
        cfg.numerics.seed = seed;
    }
    let plan = plan::build(&cfg, kind, &base)?;
    let dir = match (&cli.out, &cfg.outputs.directory) {
        (Some(d), _) => d.clone(),
        (None, Some(d)) => base.join(d),
        (None, None) => PathBuf::from("out").join(&plan.name),
    };
    let mut out = Output::create(&dir)?;
    let results = match run::execute(&plan, &mut out) {
        Ok(r) => r,
        Err(e) => {
            out.discard();
            return Err(e);
        }
    };
    let doc = json!({ "scenario": plan.name, "kind": kind.name(), "seed": plan.seed, "results": results });
    let text = serde_json::to_string_pretty(&doc).expect("results serialize") + "\n";
    if let Err(e) = out.write("results.json", text.as_bytes()) {
        out.discard();
        return Err(e);
    }
    let dir = out.dir().to_path_buf();
    let manifest = out.finish(&plan.name, kind.name(), plan.seed)?;
    for f in &manifest.files {
        println!("{}  {}", f.sha256, dir.join(&f.file).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::List { json } => {
            if *json {
                let list: Vec<_> =
                    builtins::BUILTINS.iter().map(|b| json!({ "name": b.name, "description": b.description })).collect();
                println!("{}", serde_json::to_string_pretty(&list).expect("list serializes"));
            } else {
                for b in &builtins::BUILTINS {
                    println!("{:<16} {}", b.name, b.description);
                }
            }
            Ok(())
        }
        Command::Show { builtin } => match builtins::find(builtin) {
            Some(b) => {
                print!("{}", b.config);
                Ok(())
            }
            None => Err(CliError::Config(format!("unknown builtin {builtin:?}; see `entropy-lab list`"))),
        },
        Command::Run { builtin } => run_scenario(&cli, builtin.as_deref(), None),
        Command::FpRun { builtin } => run_scenario(&cli, builtin.as_deref(), Some(Kind::FpRun)),
        Command::ControlRun { builtin } => run_scenario(&cli, builtin.as_deref(), Some(Kind::ControlRun)),
        Command::SdeRun { builtin } => run_scenario(&cli, builtin.as_deref(), Some(Kind::SdeRun)),
        Command::QuantumRun { builtin } => run_scenario(&cli, builtin.as_deref(), Some(Kind::QuantumRun)),
        Command::PathsRun { builtin } => run_scenario(&cli, builtin.as_deref(), Some(Kind::PathsRun)),
        Command::Decompose { builtin } => run_scenario(&cli, builtin.as_deref(), Some(Kind::Decompose)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use thbx_harness::report::{emit_report, EmitOptions};
use thbx_harness::{load_config, run_study, Strategies};

#[derive(Parser)]
#[command(name = "thbx", about = "Run immersed THB thermo-elastic studies")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a study from a TOML file or `builtin:<study>[/<variant>]`.
    Run {
        config: String,
        /// Override a configuration entry, e.g. `--set fields.0.degree=3`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Check a configuration and list every problem found.
    Validate {
        config: String,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Print a configuration as TOML, after overrides.
    Show {
        config: String,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// List studies, their variants, level-set kinds and refinement criteria.
    List,
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("THBX_THREADS") {
        let n: usize = v.parse().with_context(|| format!("THBX_THREADS must be a count, got '{v}'"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    init_threads()?;
    let s = Strategies::default();
    match cli.cmd {
        Command::Run { config, set, out } => {
            let cfg = load_config(&config, &set, &s)?;
            let result = run_study(&cfg, &s)?;
            let toml = cfg.to_toml();
            let opts = EmitOptions {
                csv: cfg.output.csv,
                plot: cfg.output.plot,
                summary: cfg.output.summary,
                record_timing: cfg.output.record_timing,
                config_toml: &toml,
            };
            let written = emit_report(&result.report, result.export.as_ref(), &out, &opts).with_context(|| format!("cannot write to {}", out.display()))?;
            print!("{}", result.report.to_csv(cfg.output.record_timing));
            for (k, v) in &result.report.metrics {
                println!("{k} = {v:.6e}");
            }
            for f in written.files {
                eprintln!("wrote {}", f.display());
            }
        }
        Command::Validate { config, set } => {
            let cfg = load_config(&config, &set, &s)?;
            let report = cfg.validate(&s);
            if !report.is_ok() {
                anyhow::bail!("invalid configuration:\n{report}");
            }
            println!("ok");
        }
        Command::Show { config, set } => {
            print!("{}", load_config(&config, &set, &s)?.to_toml());
        }
        Command::List => {
            println!("studies:");
            for st in s.studies.iter() {
                let vars: Vec<&str> = st.variants().iter().map(|(n, _)| *n).collect();
                let vars = if vars.is_empty() { String::new() } else { format!(" [{}]", vars.join(", ")) };
                println!("  {}{vars}: {}", st.name(), st.describe());
            }
            println!("level sets:");
            for k in s.level_sets.iter() {
                println!("  {}: {}", k.name(), k.params().join(", "));
            }
            println!("criteria:");
            for k in s.criteria.iter() {
                println!("  {}: {}", k.name(), k.params().join(", "));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

//! Batch scenario runner: one closed-loop run or an epsilon sweep, with CSV
//! outputs.
//!
//! Exit codes: 0 on success, 2 when any run diverged, 1 on usage or
//! configuration errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use adalloc::plants::QuadplaneParams;
use adalloc::scenario::{
    eps_sweep, export_csv, export_metrics, run_scenario, Metrics, ScenarioConfig,
};

#[derive(Parser)]
#[command(name = "adalloc", about = "Adaptive control allocation scenarios", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario configuration (TOML); defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Quadplane parameter file (TOML); overrides the config's parameters.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Time-scale separation override.
    #[arg(long)]
    eps: Option<f64>,
    /// Run duration override [s].
    #[arg(long)]
    duration: Option<f64>,
    /// Step size override [s].
    #[arg(long)]
    dt: Option<f64>,
    /// RNG seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write run.csv.
    Run(CommonArgs),
    /// Run the scenario once per epsilon (descending list) and write
    /// metrics.csv plus one run_eps_*.csv per entry.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated descending epsilon list.
        #[arg(long, value_delimiter = ',', default_value = "1.0,0.5,0.33,0.25,0.2")]
        eps_list: Vec<f64>,
    },
}

fn load_config(common: &CommonArgs) -> Result<ScenarioConfig, String> {
    let mut config = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            ScenarioConfig::from_toml_str(&text)?
        }
        None => ScenarioConfig::default(),
    };
    if let Some(path) = &common.params {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        config.quadplane_params = Some(QuadplaneParams::from_toml_str(&text)?);
    }
    if let Some(eps) = common.eps {
        config.epsilon = eps;
    }
    if let Some(duration) = common.duration {
        config.duration = duration;
    }
    if let Some(dt) = common.dt {
        config.dt = dt;
    }
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    config.validate()?;
    std::fs::create_dir_all(&common.out)
        .map_err(|e| format!("cannot create {}: {e}", common.out.display()))?;
    Ok(config)
}

fn print_metrics(prefix: &str, m: &Metrics) {
    if m.diverged {
        println!(
            "{prefix}: DIVERGED ({})",
            m.end_reason.as_deref().unwrap_or("unknown")
        );
    } else {
        println!(
            "{prefix}: max tracking error {:.4} m, final |W~| {:.4}, steady |e_s| {:.5}",
            m.max_tracking_error, m.final_w_tilde_norm, m.steady_e_s_norm
        );
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(common) => {
            let config = match load_config(&common) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            };
            match run_scenario(&config) {
                Ok((log, metrics)) => {
                    let path = common.out.join("run.csv");
                    if let Err(e) = export_csv(&log, &path) {
                        eprintln!("error: {e}");
                        return ExitCode::from(1);
                    }
                    print_metrics("run", &metrics);
                    println!("wrote {}", path.display());
                    Ok(metrics.diverged)
                }
                Err(e) => Err(e.to_string()),
            }
        }
        Command::Sweep { common, eps_list } => {
            let config = match load_config(&common) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            };
            match eps_sweep(&config, &eps_list) {
                Ok(rows) => {
                    let path = common.out.join("metrics.csv");
                    if let Err(e) = export_metrics(&rows, &path) {
                        eprintln!("error: {e}");
                        return ExitCode::from(1);
                    }
                    let mut any_diverged = false;
                    for row in &rows {
                        print_metrics(&format!("eps = {:.3}", row.epsilon), &row.metrics);
                        any_diverged |= row.metrics.diverged;
                    }
                    println!("wrote {}", path.display());
                    Ok(any_diverged)
                }
                Err(e) => Err(e.to_string()),
            }
        }
    };
    match result {
        Ok(true) => ExitCode::from(2),
        Ok(false) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

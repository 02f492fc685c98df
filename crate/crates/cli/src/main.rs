use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use encmotion_core::crypto::format_key_file;
use encmotion_core::memory::{MotionDataset, ScalingParams};
use encmotion_core::runner::{
    bench, derive_keys, logs_to_csv, run_loading, run_pipeline, run_saving, run_scaling, Scenario, ScenarioConfig,
};

#[derive(Parser)]
#[command(
    name = "encmotion",
    version,
    about = "Encrypted motion copying: save, scale and load leader motion under ElGamal"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the key pair a seed determines and write it as a key file.
    Keygen {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value = "key.txt")]
        out: PathBuf,
    },
    /// Run the saving phase; write the encrypted dataset and a CSV log beside it.
    Save {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value = "dataset.emc")]
        out: PathBuf,
    },
    /// Multiply a dataset by encrypted scale factors, using the public key only.
    Scale {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "scaled.emc")]
        out: PathBuf,
    },
    /// Run the loading phase from a dataset and write the follower's CSV log.
    Load {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "loading.csv")]
        out: PathBuf,
    },
    /// Save, scale (if α is not identity), load, and check everything.
    Verify {
        #[command(flatten)]
        run: RunArgs,
        /// Directory for the dataset, CSV logs and report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time the encrypted control step.
    Bench {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Default)]
struct RunArgs {
    /// TOML scenario file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_scenario)]
    scenario: Option<Scenario>,
    /// Sampling period in seconds.
    #[arg(long)]
    ts: Option<f64>,
    /// Control steps N (the run has N + 1 samples).
    #[arg(long)]
    steps: Option<usize>,
    /// Key length in bits.
    #[arg(long)]
    lambda: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    gamma_xi: Option<f64>,
    #[arg(long)]
    gamma_phi: Option<f64>,
    #[arg(long)]
    gamma_alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    alpha_x: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    alpha_y: Option<f64>,
}

fn parse_scenario(s: &str) -> Result<Scenario, String> {
    s.parse().map_err(|e: encmotion_core::RunnerError| e.to_string())
}

impl RunArgs {
    fn config(&self) -> Result<ScenarioConfig, String> {
        let mut cfg = match &self.config {
            Some(path) => ScenarioConfig::load(path).map_err(|e| e.to_string())?,
            None => ScenarioConfig::default(),
        };
        macro_rules! set {
            ($($flag:ident => $($field:ident).+),* $(,)?) => {
                $(if let Some(v) = self.$flag { cfg.$($field).+ = v; })*
            };
        }
        set!(
            scenario => scenario,
            ts => ts,
            steps => steps,
            lambda => crypto.lambda,
            seed => crypto.seed,
            gamma_xi => gains.gamma_xi,
            gamma_phi => gains.gamma_phi,
            gamma_alpha => gains.gamma_alpha,
            alpha_x => scaling.alpha_x,
            alpha_y => scaling.alpha_y,
        );
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }
}

fn write(path: &Path, text: &str) -> Result<(), String> {
    fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_dataset(path: &Path) -> Result<MotionDataset, String> {
    MotionDataset::load_file(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn run(cli: Cli) -> Result<bool, String> {
    match cli.command {
        Command::Keygen { run, out } => {
            let cfg = run.config()?;
            let (pk, sk) = derive_keys(&cfg).map_err(|e| e.to_string())?;
            write(&out, &format_key_file(&pk, &sk))?;
            eprintln!("wrote {}-bit key pair to {}", pk.bits(), out.display());
        }
        Command::Save { run, out } => {
            let cfg = run.config()?;
            let saved = run_saving(&cfg).map_err(|e| e.to_string())?;
            saved.dataset.save_file(&out).map_err(|e| e.to_string())?;
            let log = out.with_extension("csv");
            write(&log, &logs_to_csv(&saved.logs, false))?;
            eprintln!(
                "saved {} records to {} (log {}); max |ψ̃-ψ| = {:.3e}",
                saved.dataset.len(),
                out.display(),
                log.display(),
                saved.equivalence.max_deviation
            );
        }
        Command::Scale { run, dataset, out } => {
            let cfg = run.config()?;
            let scaled = run_scaling(&cfg, &load_dataset(&dataset)?, cfg.scaling).map_err(|e| e.to_string())?;
            scaled.save_file(&out).map_err(|e| e.to_string())?;
            eprintln!("scaled by ({}, {}) into {}", cfg.scaling.alpha_x, cfg.scaling.alpha_y, out.display());
        }
        Command::Load { run, dataset, out } => {
            let cfg = run.config()?;
            let loaded = run_loading(&cfg, &load_dataset(&dataset)?).map_err(|e| e.to_string())?;
            write(&out, &logs_to_csv(&loaded.logs, false))?;
            eprintln!(
                "loaded {} steps into {}; max |ψ̃-ψ| = {:.3e}",
                loaded.logs.len(),
                out.display(),
                loaded.equivalence.max_deviation
            );
        }
        Command::Verify { run, out } => {
            let cfg = run.config()?;
            let alpha = (cfg.scaling != ScalingParams::default()).then_some(cfg.scaling);
            let outcome = run_pipeline(&cfg, alpha).map_err(|e| e.to_string())?;
            println!("{}", outcome.report);
            if let Some(dir) = out {
                fs::create_dir_all(&dir).map_err(|e| format!("{}: {e}", dir.display()))?;
                outcome.loaded_dataset.save_file(&dir.join("dataset.emc")).map_err(|e| e.to_string())?;
                write(&dir.join("saving.csv"), &logs_to_csv(&outcome.saving.logs, false))?;
                write(&dir.join("loading.csv"), &logs_to_csv(&outcome.loading.logs, false))?;
                write(&dir.join("report.txt"), &format!("{}\n", outcome.report))?;
            }
            return Ok(outcome.report.passed());
        }
        Command::Bench { run, out } => {
            let cfg = run.config()?;
            let report = bench(&cfg).map_err(|e| e.to_string())?;
            println!("{report}");
            if let Some(path) = out {
                write(&path, &format!("{report}\n"))?;
            }
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

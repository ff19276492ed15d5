use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use wtasnn::data::SynthSpec;
use wtasnn_cli::commands::{self, CliError, TrainOptions, DATA_ROOT_ENV};
use wtasnn_cli::gradcheck::{library_gradient, run_gradcheck, GradcheckOptions};

#[derive(Parser)]
#[command(name = "wtasnn", version, about = "Train and evaluate WTA spiking neural networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train from a configuration file; writes metrics.csv and checkpoint.json.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "runs/latest")]
        out_dir: PathBuf,
        /// Root for relative manifest paths in the configuration.
        #[arg(long, env = DATA_ROOT_ENV)]
        data_root: Option<PathBuf>,
    },
    /// Free-run a checkpoint on a manifest and report accuracy.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check analytic gradients and the hidden estimator against brute force.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        networks: usize,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
    },
    /// Write the synthetic polarity task to disk.
    Synth {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 16)]
        pixels: usize,
        #[arg(long, default_value_t = 50)]
        steps: usize,
        #[arg(long, default_value_t = 2)]
        classes: usize,
        #[arg(long, default_value_t = 2000)]
        n_train: usize,
        #[arg(long, default_value_t = 200)]
        n_test: usize,
        #[arg(long, default_value_t = 0.5)]
        density: f64,
    },
    /// Print a checkpoint summary.
    Inspect {
        #[arg(long)]
        checkpoint: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train {
            config,
            seed,
            out_dir,
            data_root,
        } => {
            if let Some(root) = data_root {
                std::env::set_var(DATA_ROOT_ENV, root);
            }
            let resolved = commands::load_config(&config, seed)?.resolved();
            println!("# configuration {} (hash {})", config.display(), resolved.hash());
            print!("{}", resolved.to_toml());
            for t in commands::train(&TrainOptions { config_path: config, seed, out_dir })? {
                let mut line = format!("trial seed {} -> {}", t.seed, t.dir.display());
                if let Some(row) = &t.last {
                    line += &format!(": train_acc {:.4}, hidden_rate {:.4}", row.train_acc, row.hidden_rate);
                }
                if let Some(test) = &t.test {
                    line += &format!(", test_acc {:.4}", test.accuracy);
                }
                println!("{line}");
            }
        }
        Command::Eval { checkpoint, manifest, seed } => {
            print!("{}", commands::eval(&checkpoint, &manifest, seed)?);
        }
        Command::Gradcheck { seed, networks, samples } => {
            let opts = GradcheckOptions {
                seed,
                fd_networks: networks,
                mc_samples: samples,
                ..GradcheckOptions::default()
            };
            let report = run_gradcheck(&opts, &library_gradient)?;
            for suite in &report.suites {
                println!("{suite}");
            }
            if !report.passed() {
                return Err(CliError::GradcheckFailed);
            }
        }
        Command::Synth {
            out_dir,
            seed,
            pixels,
            steps,
            classes,
            n_train,
            n_test,
            density,
        } => {
            let spec = SynthSpec {
                n_pixels: pixels,
                steps,
                n_classes: classes,
                n_train,
                n_test,
                density,
                seed,
                ..SynthSpec::default()
            };
            let (train, test) = commands::synth(&out_dir, &spec)?;
            println!("{}\n{}", train.display(), test.display());
        }
        Command::Inspect { checkpoint } => print!("{}", commands::inspect(&checkpoint)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nipsr::cli::{self, exit};
use nipsr::config::CliConfig;
use nipsr::mapsr::MapConfig;
use nipsr::prior::NipConfig;
use nipsr::Result;

/// Super-resolution with a natural image prior.
#[derive(Parser)]
#[command(name = "nipsr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the bicubic down-then-up version of an image.
    Degrade {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "out")]
        output: PathBuf,
        #[arg(long, default_value_t = 3)]
        scale: usize,
    },
    /// Train a network on the manifest's training images.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long)]
        fraction: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Score a checkpoint on the manifest's test images.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Train and score every (variant, depth, fraction) cell.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
    /// Pixel-space MAP super-resolution of a low-resolution image.
    Mapsr {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "out")]
        output: PathBuf,
        #[arg(long, default_value_t = 3)]
        scale: usize,
        /// Read the map_* and prior keys from this file.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long)]
        step: Option<f64>,
        /// Write the objective per iteration as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Draw the PSNR chart of a sweep CSV.
    Plot {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        svg: PathBuf,
    },
    /// Finite-difference checks of every gradient.
    Gradcheck,
}

fn load_config(path: &Path, overrides: &[(&str, Option<String>)]) -> Result<CliConfig> {
    let mut cfg = CliConfig::load(path)?;
    for (key, value) in overrides {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn map_config(
    config: Option<&Path>,
    alpha: Option<f64>,
    lambda: Option<f64>,
    iters: Option<usize>,
    step: Option<f64>,
) -> Result<MapConfig> {
    let mut cfg = match config {
        Some(path) => CliConfig::load(path)?.map_config(),
        None => MapConfig::default(),
    };
    if let Some(a) = alpha {
        let lambda = cfg.nip.lambda;
        cfg.nip = if a == 0.1 {
            NipConfig::with_lambda(lambda)
        } else {
            NipConfig::exact(a, lambda)
        };
    }
    if let Some(l) = lambda {
        cfg.nip.lambda = l;
    }
    if let Some(n) = iters {
        cfg.iterations = n;
    }
    if let Some(s) = step {
        cfg.step_size = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(command: Command) -> Result<u8> {
    match command {
        Command::Degrade {
            input,
            output,
            scale,
        } => cli::cmd_degrade(&input, &output, scale)?,
        Command::Train {
            config,
            seed,
            depth,
            fraction,
            lambda,
        } => {
            let cfg = load_config(
                &config,
                &[
                    ("seed", seed.map(|v| v.to_string())),
                    ("depth", depth.map(|v| v.to_string())),
                    ("training_fraction", fraction.map(|v| v.to_string())),
                    ("lambda", lambda.map(|v| v.to_string())),
                ],
            )?;
            cli::cmd_train(&cfg, |r| {
                eprintln!(
                    "epoch {:>4}  lr {:<8}  loss {:.6e}  mse {:.6e}  nip {:.6e}  {:.1}s",
                    r.epoch, r.lr, r.loss, r.mse_term, r.nip_term, r.seconds
                )
            })?;
            println!("wrote {}", cli::default_checkpoint_path(&cfg).display());
        }
        Command::Eval { config, checkpoint } => {
            let cfg = load_config(&config, &[])?;
            let ckpt = checkpoint.unwrap_or_else(|| cli::default_checkpoint_path(&cfg));
            let res = cli::cmd_eval(&cfg, &ckpt)?;
            for r in &res.records {
                println!(
                    "{:<24} psnr {:>8.4} dB  ssim {:.4}   bicubic {:>8.4} dB  {:.4}",
                    r.name, r.psnr_db, r.ssim, r.bicubic_psnr_db, r.bicubic_ssim
                );
            }
            for (name, err) in &res.failures {
                eprintln!("{name}: {err}");
            }
            println!(
                "mean                     psnr {:>8.4} dB  ssim {:.4}   bicubic {:>8.4} dB  {:.4}",
                res.mean_psnr_db, res.mean_ssim, res.mean_bicubic_psnr_db, res.mean_bicubic_ssim
            );
        }
        Command::Sweep { config } => {
            let cfg = load_config(&config, &[])?;
            let table = cli::cmd_sweep(&cfg)?;
            for r in table.rows() {
                match &r.error {
                    None => println!(
                        "{:<8} N={:<3} {:>6}  psnr {:.4}  ssim {:.4}",
                        r.variant, r.depth, r.fraction, r.psnr, r.ssim
                    ),
                    Some(e) => eprintln!(
                        "{:<8} N={:<3} {:>6}  failed: {e}",
                        r.variant, r.depth, r.fraction
                    ),
                }
            }
        }
        Command::Mapsr {
            input,
            output,
            scale,
            config,
            alpha,
            lambda,
            iters,
            step,
            trace,
        } => {
            let cfg = map_config(config.as_deref(), alpha, lambda, iters, step)?;
            cli::cmd_mapsr(&input, &output, scale, &cfg, trace.as_deref())?;
        }
        Command::Plot { csv, svg } => cli::cmd_plot(&csv, &svg)?,
        Command::Gradcheck => {
            let reports = cli::cmd_gradcheck()?;
            for r in &reports {
                println!(
                    "{} {:<18} max rel error {:.3e} (tolerance {:.0e}, {} entries)",
                    if r.passed() { "PASS" } else { "FAIL" },
                    r.name,
                    r.max_rel_error,
                    r.tolerance,
                    r.entries
                );
            }
            if !reports.iter().all(|r| r.passed()) {
                return Ok(exit::SELF_CHECK);
            }
        }
    }
    Ok(exit::OK)
}

fn main() -> ExitCode {
    let args = match Cli::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() {
                exit::CONFIG
            } else {
                exit::OK
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(args.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e))
        }
    }
}

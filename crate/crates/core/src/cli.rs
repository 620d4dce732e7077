//! The commands behind the `nipsr` binary, callable without a process.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::config::CliConfig;
use crate::error::{Error, Result};
use crate::eval::{
    emit_plot_svg, emit_table_csv, evaluate, parse_table_csv, run_sweep, EvalResult, SweepTable,
};
use crate::gradcheck::{run_all, GradCheckReport};
use crate::image::{
    bicubic_resize, build_patch_set, degrade, load_netpbm, rgb_to_ycbcr, save_netpbm,
    subsample_patches, ycbcr_to_rgb, DatasetManifest, ImagePlane, NetpbmImage, RgbImage, Role,
};
use crate::mapsr::{map_sr, MapConfig};
use crate::net::SrNetwork;
use crate::train::{train_with_observer, EpochRecord, TrainLog};

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const IO: u8 = 2;
    pub const CONFIG: u8 = 3;
    pub const NUMERIC: u8 = 4;
    pub const SELF_CHECK: u8 = 5;
}

/// The exit code for a failed command.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io { .. }
        | Error::Parse { .. }
        | Error::CheckpointTruncated { .. }
        | Error::CheckpointMagic
        | Error::CheckpointVersion { .. }
        | Error::CheckpointCrc { .. }
        | Error::CheckpointShape(_) => exit::IO,
        Error::Config(_) | Error::Contract { .. } => exit::CONFIG,
        Error::NonFinite(_) => exit::NUMERIC,
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn map_channels(
    img: &RgbImage,
    mut f: impl FnMut(&ImagePlane) -> Result<ImagePlane>,
) -> Result<RgbImage> {
    let (r, g, b) = (
        f(&img.channel(0))?,
        f(&img.channel(1))?,
        f(&img.channel(2))?,
    );
    RgbImage::from_planes(&r, &g, &b)
}

/// Write the bicubic down-then-up version of `input`. RGB images are
/// degraded per channel.
pub fn cmd_degrade(input: &Path, output: &Path, scale: usize) -> Result<()> {
    if scale == 0 {
        return Err(Error::Config("scale must be >= 1".into()));
    }
    let out = match load_netpbm(input)? {
        NetpbmImage::Gray(p) => NetpbmImage::Gray(degrade(&p, scale)?),
        NetpbmImage::Rgb(img) => NetpbmImage::Rgb(map_channels(&img, |p| degrade(p, scale))?),
    };
    save_netpbm(&out, output)
}

fn manifest(cfg: &CliConfig) -> Result<DatasetManifest> {
    let path = cfg
        .manifest
        .as_ref()
        .ok_or_else(|| Error::Config("`manifest` is not set".into()))?;
    DatasetManifest::load(path, cfg.scale)
}

pub fn default_checkpoint_path(cfg: &CliConfig) -> PathBuf {
    cfg.checkpoint
        .clone()
        .unwrap_or_else(|| cfg.output_dir.join("model.ckpt"))
}

/// Build patches from the manifest's training images, train, and write the
/// checkpoint and `train_log.csv`.
pub fn cmd_train(
    cfg: &CliConfig,
    observer: impl FnMut(&EpochRecord),
) -> Result<(SrNetwork, TrainLog)> {
    let manifest = manifest(cfg)?;
    let mut planes = Vec::new();
    for path in manifest.paths(Role::Train)? {
        planes.push(load_netpbm(path)?.luminance());
    }
    let patches = build_patch_set(&planes, &cfg.patch_plan())?;
    if patches.is_empty() {
        return Err(Error::Config(format!(
            "training images yield no {0}x{0} patches",
            cfg.patch_size
        )));
    }
    let patches = subsample_patches(&patches, cfg.train.training_fraction, cfg.train.seed)?;
    let net = SrNetwork::init_with_width(cfg.depth, cfg.width, cfg.train.seed)?;
    let (net, log) = train_with_observer(net, &patches, &cfg.train, observer)?;

    create_dir(&cfg.output_dir)?;
    let ckpt = default_checkpoint_path(cfg);
    if let Some(dir) = ckpt.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    save_checkpoint(&net, &ckpt)?;
    write_text(&cfg.output_dir.join("train_log.csv"), &log.to_csv())?;
    Ok((net, log))
}

pub fn eval_csv(res: &EvalResult) -> String {
    let mut out = String::from("name,psnr,ssim,bicubic_psnr,bicubic_ssim\n");
    for r in &res.records {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.name, r.psnr_db, r.ssim, r.bicubic_psnr_db, r.bicubic_ssim
        );
    }
    out
}

/// Evaluate a checkpoint on the manifest's test images and write `eval.csv`.
pub fn cmd_eval(cfg: &CliConfig, checkpoint: &Path) -> Result<EvalResult> {
    let manifest = manifest(cfg)?;
    let net = load_checkpoint(checkpoint)?;
    let res = evaluate(&net, &manifest, cfg.scale, cfg.shave())?;
    if res.records.is_empty() {
        let reasons: Vec<String> = res
            .failures
            .iter()
            .map(|(n, e)| format!("{n}: {e}"))
            .collect();
        return Err(Error::Config(format!(
            "no test image could be evaluated ({})",
            reasons.join("; ")
        )));
    }
    create_dir(&cfg.output_dir)?;
    write_text(&cfg.output_dir.join("eval.csv"), &eval_csv(&res))?;
    Ok(res)
}

/// Run the configured sweep and write `sweep.csv` and `sweep.svg`.
pub fn cmd_sweep(cfg: &CliConfig) -> Result<SweepTable> {
    let table = run_sweep(&manifest(cfg)?, &cfg.sweep_config())?;
    create_dir(&cfg.output_dir)?;
    emit_table_csv(&table, cfg.output_dir.join("sweep.csv"))?;
    emit_plot_svg(&table, cfg.output_dir.join("sweep.svg"))?;
    Ok(table)
}

/// MAP super-resolution of a low-resolution image. For RGB input the solver
/// runs on luma and the chroma planes are upscaled bicubically.
pub fn cmd_mapsr(
    input: &Path,
    output: &Path,
    scale: usize,
    cfg: &MapConfig,
    trace: Option<&Path>,
) -> Result<()> {
    if scale < 2 {
        return Err(Error::Config(format!("scale must be >= 2, got {scale}")));
    }
    let mut cfg = cfg.clone();
    cfg.record_trace |= trace.is_some();
    let (out, outcome) = match load_netpbm(input)? {
        NetpbmImage::Gray(p) => {
            let o = map_sr(&p, scale, &cfg)?;
            (NetpbmImage::Gray(o.estimate.clone()), o)
        }
        NetpbmImage::Rgb(img) => {
            let (y, cb, cr) = rgb_to_ycbcr(&img);
            let o = map_sr(&y, scale, &cfg)?;
            let (h, w) = o.estimate.dims();
            let cb = bicubic_resize(&cb, h, w, true)?;
            let cr = bicubic_resize(&cr, h, w, true)?;
            (NetpbmImage::Rgb(ycbcr_to_rgb(&o.estimate, &cb, &cr)?), o)
        }
    };
    save_netpbm(&out, output)?;
    if let Some(path) = trace {
        write_text(path, &outcome.trace_csv())?;
    }
    Ok(())
}

/// Redraw the chart of a sweep CSV.
pub fn cmd_plot(csv: &Path, svg: &Path) -> Result<()> {
    let text = std::fs::read_to_string(csv).map_err(|e| Error::io(csv, e))?;
    emit_plot_svg(&parse_table_csv(&text)?, svg)
}

pub fn cmd_gradcheck() -> Result<Vec<GradCheckReport>> {
    run_all()
}

//! Metrics, corpus evaluation and the depth × training-fraction sweep.

pub mod metrics;
pub mod report;
pub mod sweep;

use std::path::Path;

pub use metrics::{psnr, ssim, PSNR_CAP_DB};
pub use report::{emit_plot_svg, emit_table_csv, parse_table_csv, plot_svg, table_csv};
pub use sweep::{run_sweep, run_sweep_on_planes, SweepConfig, SweepRow, SweepTable, Variant};

use crate::error::{Error, Result};
use crate::image::{degrade, load_netpbm, DatasetManifest, ImagePlane, Role};
use crate::net::SrNetwork;

#[derive(Clone, Debug, PartialEq)]
pub struct EvalRecord {
    pub name: String,
    pub psnr_db: f64,
    pub ssim: f64,
    /// Metrics of the bicubic-degraded input itself.
    pub bicubic_psnr_db: f64,
    pub bicubic_ssim: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalResult {
    pub records: Vec<EvalRecord>,
    /// Images that could not be evaluated, with the reason.
    pub failures: Vec<(String, String)>,
    pub mean_psnr_db: f64,
    pub mean_ssim: f64,
    pub mean_bicubic_psnr_db: f64,
    pub mean_bicubic_ssim: f64,
}

impl EvalResult {
    fn from_records(records: Vec<EvalRecord>, failures: Vec<(String, String)>) -> Self {
        let n = records.len() as f64;
        let mean = |f: fn(&EvalRecord) -> f64| records.iter().map(f).sum::<f64>() / n;
        EvalResult {
            mean_psnr_db: mean(|r| r.psnr_db),
            mean_ssim: mean(|r| r.ssim),
            mean_bicubic_psnr_db: mean(|r| r.bicubic_psnr_db),
            mean_bicubic_ssim: mean(|r| r.bicubic_ssim),
            records,
            failures,
        }
    }
}

/// Degrade, run the network and score one ground-truth luminance plane.
pub fn evaluate_plane(
    net: &SrNetwork,
    name: &str,
    hr: &ImagePlane,
    scale: usize,
    shave: usize,
) -> Result<EvalRecord> {
    let hr = hr.crop_to_multiple(scale)?;
    let input = degrade(&hr, scale)?;
    let out = net.predict(&input.to_tensor())?;
    if !out.is_finite() {
        return Err(Error::NonFinite(format!("network output for {name}")));
    }
    let out = ImagePlane::from_tensor(&out, 0)?;
    Ok(EvalRecord {
        name: name.to_string(),
        psnr_db: psnr(&out, &hr, shave)?,
        ssim: ssim(&out, &hr)?,
        bicubic_psnr_db: psnr(&input, &hr, shave)?,
        bicubic_ssim: ssim(&input, &hr)?,
    })
}

/// [`evaluate_plane`] over named planes. Per-image failures are recorded and
/// skipped.
pub fn evaluate_planes(
    net: &SrNetwork,
    planes: &[(String, ImagePlane)],
    scale: usize,
    shave: usize,
) -> Result<EvalResult> {
    if planes.is_empty() {
        return Err(Error::contract("evaluate", "empty test set"));
    }
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (name, plane) in planes {
        match evaluate_plane(net, name, plane, scale, shave) {
            Ok(r) => records.push(r),
            Err(e) => failures.push((name.clone(), e.to_string())),
        }
    }
    Ok(EvalResult::from_records(records, failures))
}

/// Planes paired with display names.
pub type NamedPlanes = Vec<(String, ImagePlane)>;

/// Luminance planes of the manifest's test images, keyed by path. Unreadable
/// files land in the second list.
pub fn load_test_planes(
    manifest: &DatasetManifest,
) -> Result<(NamedPlanes, Vec<(String, String)>)> {
    let mut planes = Vec::new();
    let mut failures = Vec::new();
    for path in manifest.paths(Role::Test)? {
        let name = display_name(path);
        match load_netpbm(path) {
            Ok(img) => planes.push((name, img.luminance())),
            Err(e) => failures.push((name, e.to_string())),
        }
    }
    Ok((planes, failures))
}

fn display_name(path: &Path) -> String {
    path.file_name().map_or_else(
        || path.display().to_string(),
        |n| n.to_string_lossy().into_owned(),
    )
}

/// Evaluate every test image of `manifest` at `scale`, shaving `shave` border
/// pixels before PSNR.
pub fn evaluate(
    net: &SrNetwork,
    manifest: &DatasetManifest,
    scale: usize,
    shave: usize,
) -> Result<EvalResult> {
    let (planes, load_failures) = load_test_planes(manifest)?;
    let mut result = if planes.is_empty() {
        EvalResult::from_records(Vec::new(), Vec::new())
    } else {
        evaluate_planes(net, &planes, scale, shave)?
    };
    let mut failures = load_failures;
    failures.append(&mut result.failures);
    result.failures = failures;
    Ok(result)
}

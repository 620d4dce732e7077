//! One trained network per (variant, depth, fraction) cell.

use std::fmt;
use std::str::FromStr;

use super::{evaluate_planes, load_test_planes};
use crate::error::{Error, Result};
use crate::image::{
    build_patch_set, load_netpbm, subsample_indices, DatasetManifest, ImagePlane, PatchPlan, Role,
};
use crate::net::SrNetwork;
use crate::train::{train, TrainConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    /// Plain residual network, λ = 0.
    Baseline,
    /// Same network trained with the prior at the configured λ.
    Nip,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::Nip => "nip",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Variant::Baseline),
            "nip" => Ok(Variant::Nip),
            other => Err(Error::Config(format!(
                "unknown variant {other:?}, expected baseline or nip"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub depths: Vec<usize>,
    pub fractions: Vec<f64>,
    pub variants: Vec<Variant>,
    pub width: usize,
    pub plan: PatchPlan,
    /// Shared by every cell; `training_fraction` is replaced by the cell's
    /// fraction and baseline cells run with λ = 0.
    pub train: TrainConfig,
    pub shave: usize,
}

impl SweepConfig {
    fn validate(&self) -> Result<()> {
        if self.depths.is_empty() || self.fractions.is_empty() || self.variants.is_empty() {
            return Err(Error::Config("sweep axes must be non-empty".into()));
        }
        let dup = |n: usize, m: usize| n != m;
        let mut d = self.depths.clone();
        d.sort_unstable();
        d.dedup();
        let mut f = self.fractions.clone();
        f.sort_by(f64::total_cmp);
        f.dedup();
        let mut v = self.variants.clone();
        v.sort_unstable();
        v.dedup();
        if dup(d.len(), self.depths.len())
            || dup(f.len(), self.fractions.len())
            || dup(v.len(), self.variants.len())
        {
            return Err(Error::Config("sweep axes contain duplicate entries".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub variant: Variant,
    pub depth: usize,
    pub fraction: f64,
    /// Mean PSNR over the test images; NaN when the cell failed.
    pub psnr: f64,
    pub ssim: f64,
    pub seed: u64,
    pub epochs: usize,
    /// FNV-1a hash of the training patch indices; equal for paired cells.
    pub subset_hash: u64,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepTable {
    rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn new(rows: Vec<SweepRow>) -> Result<Self> {
        for (k, r) in rows.iter().enumerate() {
            if rows[..k]
                .iter()
                .any(|o| o.variant == r.variant && o.depth == r.depth && o.fraction == r.fraction)
            {
                return Err(Error::contract(
                    "SweepTable",
                    format!(
                        "duplicate row {} depth {} fraction {}",
                        r.variant, r.depth, r.fraction
                    ),
                ));
            }
        }
        Ok(SweepTable { rows })
    }

    pub fn rows(&self) -> &[SweepRow] {
        &self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, variant: Variant, depth: usize, fraction: f64) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.variant == variant && r.depth == depth && r.fraction == fraction)
    }
}

pub(crate) fn hash_indices(indices: &[usize]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &i in indices {
        for b in (i as u64).to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

/// Sweep over in-memory training planes and named test planes.
pub fn run_sweep_on_planes(
    train_planes: &[ImagePlane],
    test_planes: &[(String, ImagePlane)],
    cfg: &SweepConfig,
) -> Result<SweepTable> {
    cfg.validate()?;
    let patches = build_patch_set(train_planes, &cfg.plan)?;
    if patches.is_empty() {
        return Err(Error::Config("training images yield no patches".into()));
    }
    let seed = cfg.train.seed;
    let mut rows = Vec::new();
    for &fraction in &cfg.fractions {
        let indices = subsample_indices(patches.len(), fraction, seed)?;
        let subset = patches.select(&indices);
        let subset_hash = hash_indices(&indices);
        for &depth in &cfg.depths {
            for &variant in &cfg.variants {
                let mut tc = cfg.train.clone();
                tc.training_fraction = fraction;
                if variant == Variant::Baseline {
                    tc.nip.lambda = 0.0;
                    tc.nip.sigma_n = None;
                    tc.nip.sigma_r = None;
                }
                let outcome = SrNetwork::init_with_width(depth, cfg.width, seed)
                    .and_then(|net| train(net, &subset, &tc))
                    .and_then(|(net, _)| {
                        evaluate_planes(&net, test_planes, cfg.plan.scale, cfg.shave)
                    });
                let (psnr, ssim, error) = match outcome {
                    Ok(res) if !res.records.is_empty() => (res.mean_psnr_db, res.mean_ssim, None),
                    Ok(res) => (
                        f64::NAN,
                        f64::NAN,
                        Some(format!("no image evaluated: {:?}", res.failures)),
                    ),
                    Err(e) => (f64::NAN, f64::NAN, Some(e.to_string())),
                };
                rows.push(SweepRow {
                    variant,
                    depth,
                    fraction,
                    psnr,
                    ssim,
                    seed,
                    epochs: tc.epochs,
                    subset_hash,
                    error,
                });
            }
        }
    }
    SweepTable::new(rows)
}

/// Load the manifest's luminance planes and run [`run_sweep_on_planes`].
pub fn run_sweep(manifest: &DatasetManifest, cfg: &SweepConfig) -> Result<SweepTable> {
    let mut train_planes = Vec::new();
    for path in manifest.paths(Role::Train)? {
        train_planes.push(load_netpbm(path)?.luminance());
    }
    let (test_planes, _) = load_test_planes(manifest)?;
    if test_planes.is_empty() {
        return Err(Error::Config("no readable test images".into()));
    }
    run_sweep_on_planes(&train_planes, &test_planes, cfg)
}

//! Training data: manifests, augmentation, aligned patch extraction and
//! seeded training-fraction subsampling.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use super::plane::ImagePlane;
use super::resample::{bicubic_resize, degrade};
use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::tensor::Tensor;

pub const DEFAULT_PATCH_SIZE: usize = 41;

/// Scales applied by [`augment`], in output order.
pub const AUGMENT_SCALES: [f64; 3] = [1.0, 0.7, 0.5];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    Train,
    Test,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Train => "train",
            Role::Test => "test",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ManifestEntry {
    pub role: Role,
    pub path: PathBuf,
}

/// List of images with their role, plus the integer scale factor they are
/// used at.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub scale: usize,
}

impl DatasetManifest {
    pub fn new(entries: Vec<ManifestEntry>, scale: usize) -> Result<Self> {
        if scale < 2 {
            return Err(Error::Config(format!(
                "scale factor must be >= 2, got {scale}"
            )));
        }
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(&e.path) {
                return Err(Error::Config(format!(
                    "duplicate manifest path {}",
                    e.path.display()
                )));
            }
        }
        Ok(DatasetManifest { entries, scale })
    }

    /// Parse `<role> <path>` lines; `#` starts a comment. Relative paths are
    /// resolved against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path, scale: usize) -> Result<Self> {
        let mut entries = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(role), Some(path), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::Config(format!(
                    "manifest line {}: expected `<role> <path>`",
                    lineno + 1
                )));
            };
            let role = match role {
                "train" => Role::Train,
                "test" => Role::Test,
                other => {
                    return Err(Error::Config(format!(
                        "manifest line {}: unknown role `{other}`",
                        lineno + 1
                    )))
                }
            };
            entries.push(ManifestEntry {
                role,
                path: base_dir.join(path),
            });
        }
        DatasetManifest::new(entries, scale)
    }

    pub fn load(path: impl AsRef<Path>, scale: usize) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        DatasetManifest::parse(&text, path.parent().unwrap_or(Path::new(".")), scale)
    }

    /// Entries with the given role; an error if there are none.
    pub fn paths(&self, role: Role) -> Result<Vec<&Path>> {
        let paths: Vec<&Path> = self
            .entries
            .iter()
            .filter(|e| e.role == role)
            .map(|e| e.path.as_path())
            .collect();
        if paths.is_empty() {
            return Err(Error::contract(
                "DatasetManifest",
                format!("no `{}` entries", role.as_str()),
            ));
        }
        Ok(paths)
    }

    pub fn to_text(&self, base_dir: &Path) -> String {
        self.entries
            .iter()
            .map(|e| {
                let p = e.path.strip_prefix(base_dir).unwrap_or(&e.path);
                format!("{} {}\n", e.role.as_str(), p.display())
            })
            .collect()
    }
}

/// The fixed 24-element augmentation set: `{identity, horizontal flip} ×
/// {0°, 90°, 180°, 270°} × {1.0, 0.7, 0.5}`, flip outermost and scale
/// innermost. Rotations are counter-clockwise; scaling is antialiased bicubic
/// to `round(dim · s)`.
pub fn augment(p: &ImagePlane) -> Result<Vec<ImagePlane>> {
    let mut out = Vec::with_capacity(24);
    for flip in [false, true] {
        let base = if flip { p.flip_horizontal() } else { p.clone() };
        for quarter_turns in 0..4 {
            let rotated = base.rotate90(quarter_turns);
            for &s in &AUGMENT_SCALES {
                if s == 1.0 {
                    out.push(rotated.clone());
                } else {
                    let h = ((rotated.height() as f64 * s).round() as usize).max(1);
                    let w = ((rotated.width() as f64 * s).round() as usize).max(1);
                    out.push(bicubic_resize(&rotated, h, w, true)?);
                }
            }
        }
    }
    Ok(out)
}

/// Aligned network-input / target patch pairs, `[m, 1, size, size]` each.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchSet {
    pub lr: Tensor,
    pub hr: Tensor,
}

impl PatchSet {
    pub fn empty(size: usize) -> Self {
        PatchSet {
            lr: Tensor::zeros([0, 1, size, size]),
            hr: Tensor::zeros([0, 1, size, size]),
        }
    }

    pub fn len(&self) -> usize {
        self.lr.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn patch_size(&self) -> usize {
        self.lr.shape()[2]
    }

    pub fn append(&mut self, other: &PatchSet) -> Result<()> {
        if other.patch_size() != self.patch_size() {
            return Err(Error::contract(
                "PatchSet::append",
                format!("patch size {} vs {}", other.patch_size(), self.patch_size()),
            ));
        }
        let s = self.patch_size();
        let m = self.len() + other.len();
        let mut lr = std::mem::replace(&mut self.lr, Tensor::zeros([0, 1, s, s])).into_data();
        let mut hr = std::mem::replace(&mut self.hr, Tensor::zeros([0, 1, s, s])).into_data();
        lr.extend_from_slice(other.lr.data());
        hr.extend_from_slice(other.hr.data());
        self.lr = Tensor::new([m, 1, s, s], lr)?;
        self.hr = Tensor::new([m, 1, s, s], hr)?;
        Ok(())
    }

    /// The pairs at `indices`, in that order, as a new set.
    pub fn select(&self, indices: &[usize]) -> PatchSet {
        let s = self.patch_size();
        let item = s * s;
        let mut lr = Vec::with_capacity(indices.len() * item);
        let mut hr = Vec::with_capacity(indices.len() * item);
        for &k in indices {
            lr.extend_from_slice(self.lr.item(k));
            hr.extend_from_slice(self.hr.item(k));
        }
        PatchSet {
            lr: Tensor::new([indices.len(), 1, s, s], lr).expect("sized above"),
            hr: Tensor::new([indices.len(), 1, s, s], hr).expect("sized above"),
        }
    }
}

/// Window origins along one axis: `0, stride, 2·stride, …`, plus a final
/// window shifted back so it ends exactly at the border.
pub fn patch_anchors(len: usize, size: usize, stride: usize) -> Vec<usize> {
    if len < size || stride == 0 {
        return Vec::new();
    }
    let mut anchors: Vec<usize> = (0..=len - size).step_by(stride).collect();
    if anchors.last() != Some(&(len - size)) {
        anchors.push(len - size);
    }
    anchors
}

pub fn extract_patches(
    lr_up: &ImagePlane,
    hr: &ImagePlane,
    size: usize,
    stride: usize,
) -> Result<PatchSet> {
    if lr_up.dims() != hr.dims() {
        return Err(Error::contract(
            "extract_patches",
            format!(
                "input {:?} and target {:?} differ in size",
                lr_up.dims(),
                hr.dims()
            ),
        ));
    }
    let (h, w) = hr.dims();
    if h < size || w < size || size == 0 || stride == 0 {
        return Err(Error::contract(
            "extract_patches",
            format!("{h}x{w} image cannot hold {size}x{size} patches at stride {stride}"),
        ));
    }
    let rows = patch_anchors(h, size, stride);
    let cols = patch_anchors(w, size, stride);
    let m = rows.len() * cols.len();
    let mut lr = Vec::with_capacity(m * size * size);
    let mut out_hr = Vec::with_capacity(m * size * size);
    for &top in &rows {
        for &left in &cols {
            for i in top..top + size {
                lr.extend_from_slice(&lr_up.values()[i * w + left..i * w + left + size]);
                out_hr.extend_from_slice(&hr.values()[i * w + left..i * w + left + size]);
            }
        }
    }
    Ok(PatchSet {
        lr: Tensor::new([m, 1, size, size], lr)?,
        hr: Tensor::new([m, 1, size, size], out_hr)?,
    })
}

/// How a set of high-resolution planes is turned into training patches.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PatchPlan {
    pub scale: usize,
    pub size: usize,
    pub stride: usize,
    pub augment: bool,
}

/// Degrade every plane (and its augmentations, if enabled) and cut aligned
/// patches. Planes too small to hold one patch after cropping are skipped.
pub fn build_patch_set(planes: &[ImagePlane], plan: &PatchPlan) -> Result<PatchSet> {
    let mut set = PatchSet::empty(plan.size);
    for plane in planes {
        let variants = if plan.augment {
            augment(plane)?
        } else {
            vec![plane.clone()]
        };
        for v in variants {
            if v.height() < plan.scale || v.width() < plan.scale {
                continue;
            }
            let hr = v.crop_to_multiple(plan.scale)?;
            if hr.height() < plan.size || hr.width() < plan.size {
                continue;
            }
            let lr = degrade(&hr, plan.scale)?;
            set.append(&extract_patches(&lr, &hr, plan.size, plan.stride)?)?;
        }
    }
    Ok(set)
}

/// `⌈fraction·m⌉` distinct indices drawn uniformly with the seeded RNG,
/// returned in ascending order. `fraction = 1` yields `0..m`.
pub fn subsample_indices(m: usize, fraction: f64, seed: u64) -> Result<Vec<usize>> {
    if m == 0 {
        return Err(Error::contract("subsample_patches", "empty patch set"));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::contract(
            "subsample_patches",
            format!("fraction must lie in (0, 1], got {fraction}"),
        ));
    }
    // Tolerate representation error so that e.g. 0.01 · 1000 selects 10, not 11.
    let k = ((fraction * m as f64) - 1e-9).ceil().clamp(1.0, m as f64) as usize;
    let mut idx: Vec<usize> = (0..m).collect();
    if k == m {
        return Ok(idx);
    }
    let mut rng = SeededRng::new(seed);
    for i in 0..k {
        let j = i + rng.below(m - i);
        idx.swap(i, j);
    }
    idx.truncate(k);
    idx.sort_unstable();
    Ok(idx)
}

pub fn subsample_patches(ps: &PatchSet, fraction: f64, seed: u64) -> Result<PatchSet> {
    let idx = subsample_indices(ps.len(), fraction, seed)?;
    Ok(ps.select(&idx))
}

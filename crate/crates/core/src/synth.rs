//! Seeded synthetic scenes for tests, examples and desk-scale experiments:
//! piecewise-constant planes with hard edges, written as 8-bit PGM.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::image::{save_netpbm, ImagePlane, NetpbmImage};
use crate::rng::SeededRng;

/// A cartoon: a flat background overlaid with discs, rotated rectangles and
/// half-planes of constant intensity, quantized to 8 bits.
pub fn scene(height: usize, width: usize, seed: u64) -> ImagePlane {
    let mut rng = SeededRng::new(seed);
    let (h, w) = (height as f64, width as f64);
    let mut p = ImagePlane::filled(height, width, 0.2 + 0.6 * rng.next_f64());
    let shapes = 4 + rng.below(5);
    for _ in 0..shapes {
        let level = 0.05 + 0.9 * rng.next_f64();
        let (ci, cj) = (h * rng.next_f64(), w * rng.next_f64());
        let kind = rng.below(3);
        let (a, b) = (
            h * (0.1 + 0.3 * rng.next_f64()),
            w * (0.1 + 0.3 * rng.next_f64()),
        );
        let (s, c) = (std::f64::consts::PI * rng.next_f64()).sin_cos();
        for i in 0..height {
            for j in 0..width {
                let (di, dj) = (i as f64 + 0.5 - ci, j as f64 + 0.5 - cj);
                let inside = match kind {
                    0 => (di / a).powi(2) + (dj / b).powi(2) <= 1.0,
                    1 => (di * c - dj * s).abs() <= a && (di * s + dj * c).abs() <= b,
                    _ => di * c + dj * s >= 0.0,
                };
                if inside {
                    p.set(i, j, level);
                }
            }
        }
    }
    p.map(quantize8)
}

/// Square-wave stripes at a random orientation, period between 9 and 15
/// pixels, levels 0.1 and 0.9.
pub fn stripes(height: usize, width: usize, seed: u64) -> ImagePlane {
    let mut rng = SeededRng::new(seed);
    let period = 9.0 + 6.0 * rng.next_f64();
    let (s, c) = (std::f64::consts::PI * rng.next_f64()).sin_cos();
    let phase = std::f64::consts::TAU * rng.next_f64();
    let k = std::f64::consts::TAU / period;
    ImagePlane::from_fn(height, width, |i, j| {
        let v = (k * (c * i as f64 + s * j as f64) + phase).sin();
        quantize8(if v >= 0.0 { 0.9 } else { 0.1 })
    })
}

fn quantize8(v: f64) -> f64 {
    (v.clamp(0.0, 1.0) * 255.0).round() / 255.0
}

/// Write `n_train + n_test` scenes as PGM files plus a `manifest.txt` listing
/// them, and return the manifest path.
pub fn write_corpus(
    dir: &Path,
    n_train: usize,
    n_test: usize,
    size: usize,
    seed: u64,
) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = String::new();
    for k in 0..n_train + n_test {
        let role = if k < n_train { "train" } else { "test" };
        let name = format!("{role}_{k:02}.pgm");
        let plane = scene(size, size, seed.wrapping_mul(1000).wrapping_add(k as u64));
        save_netpbm(&NetpbmImage::Gray(plane), dir.join(&name))?;
        manifest.push_str(&format!("{role} {name}\n"));
    }
    let path = dir.join("manifest.txt");
    std::fs::write(&path, manifest).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

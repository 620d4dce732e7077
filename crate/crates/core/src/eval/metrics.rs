//! Luminance-domain PSNR and SSIM.

use crate::error::{Error, Result};
use crate::image::ImagePlane;

/// Reported PSNR never exceeds this, so identical planes stay finite in CSV.
pub const PSNR_CAP_DB: f64 = 99.0;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

/// `10·log10(1/mse)` over the planes clamped to `[0, 1]` with a `shave`-pixel
/// border removed, capped at [`PSNR_CAP_DB`].
pub fn psnr(a: &ImagePlane, b: &ImagePlane, shave: usize) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::contract(
            "psnr",
            format!("{:?} vs {:?}", a.dims(), b.dims()),
        ));
    }
    let (h, w) = a.dims();
    if h <= 2 * shave || w <= 2 * shave {
        return Err(Error::contract(
            "psnr",
            format!("{h}x{w} plane cannot lose a {shave}-pixel border"),
        ));
    }
    let mut sum = 0.0;
    for i in shave..h - shave {
        for j in shave..w - shave {
            let d = a.get(i, j).clamp(0.0, 1.0) - b.get(i, j).clamp(0.0, 1.0);
            sum += d * d;
        }
    }
    let mse = sum / ((h - 2 * shave) * (w - 2 * shave)) as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((-10.0 * mse.log10()).min(PSNR_CAP_DB))
}

fn gaussian_taps() -> [f64; SSIM_WINDOW] {
    let c = (SSIM_WINDOW / 2) as f64;
    let mut g = [0.0; SSIM_WINDOW];
    for (k, v) in g.iter_mut().enumerate() {
        let x = k as f64 - c;
        *v = (-x * x / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let total: f64 = g.iter().sum();
    g.map(|v| v / total)
}

/// Separable valid-region Gaussian filter.
fn filter_valid(values: &[f64], h: usize, w: usize, g: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let (oh, ow) = (h - SSIM_WINDOW + 1, w - SSIM_WINDOW + 1);
    let mut rows = vec![0.0; oh * w];
    for i in 0..oh {
        for (k, &gk) in g.iter().enumerate() {
            let src = &values[(i + k) * w..(i + k + 1) * w];
            for (d, &s) in rows[i * w..(i + 1) * w].iter_mut().zip(src) {
                *d += gk * s;
            }
        }
    }
    let mut out = vec![0.0; oh * ow];
    for i in 0..oh {
        let row = &rows[i * w..(i + 1) * w];
        for j in 0..ow {
            out[i * ow + j] = g
                .iter()
                .zip(&row[j..j + SSIM_WINDOW])
                .map(|(a, b)| a * b)
                .sum();
        }
    }
    out
}

/// Mean local SSIM with an 11×11 Gaussian window (σ = 1.5), dynamic range 1,
/// over the valid region. Inputs are clamped to `[0, 1]`.
pub fn ssim(a: &ImagePlane, b: &ImagePlane) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::contract(
            "ssim",
            format!("{:?} vs {:?}", a.dims(), b.dims()),
        ));
    }
    let (h, w) = a.dims();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::contract(
            "ssim",
            format!("{h}x{w} plane is smaller than the 11x11 window"),
        ));
    }
    let x: Vec<f64> = a.values().iter().map(|v| v.clamp(0.0, 1.0)).collect();
    let y: Vec<f64> = b.values().iter().map(|v| v.clamp(0.0, 1.0)).collect();
    let g = gaussian_taps();
    let f = |v: &[f64]| filter_valid(v, h, w, &g);
    let mu_x = f(&x);
    let mu_y = f(&y);
    let xx = f(&x.iter().map(|v| v * v).collect::<Vec<_>>());
    let yy = f(&y.iter().map(|v| v * v).collect::<Vec<_>>());
    let xy = f(&x.iter().zip(&y).map(|(p, q)| p * q).collect::<Vec<_>>());

    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let mut total = 0.0;
    for k in 0..mu_x.len() {
        let (mx, my) = (mu_x[k], mu_y[k]);
        let sxx = xx[k] - mx * mx;
        let syy = yy[k] - my * my;
        let sxy = xy[k] - mx * my;
        total += ((2.0 * mx * my + c1) * (2.0 * sxy + c2))
            / ((mx * mx + my * my + c1) * (sxx + syy + c2));
    }
    Ok(total / mu_x.len() as f64)
}

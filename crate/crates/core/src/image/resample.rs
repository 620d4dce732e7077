//! Separable bicubic resampling (Keys kernel, `a = -0.5`) with antialiasing on
//! downscale and replicated borders, following the `imresize` conventions the
//! SR literature evaluates with.

use super::plane::ImagePlane;
use crate::error::{Error, Result};

pub const KEYS_A: f64 = -0.5;

/// Keys cubic convolution kernel.
pub fn cubic(x: f64) -> f64 {
    let a = KEYS_A;
    let t = x.abs();
    if t <= 1.0 {
        (a + 2.0) * t * t * t - (a + 3.0) * t * t + 1.0
    } else if t < 2.0 {
        a * t * t * t - 5.0 * a * t * t + 8.0 * a * t - 4.0 * a
    } else {
        0.0
    }
}

/// Per-output-sample taps `(source index, weight)` along one axis.
///
/// Source indices are already clamped to the valid range and duplicates
/// merged, so each output is `Σ weight · src[index]` and the weights of every
/// output sum to one.
#[derive(Clone, Debug, PartialEq)]
pub struct AxisWeights {
    pub in_len: usize,
    pub out_len: usize,
    pub taps: Vec<Vec<(usize, f64)>>,
}

impl AxisWeights {
    pub fn new(in_len: usize, out_len: usize, antialias: bool) -> AxisWeights {
        let scale = out_len as f64 / in_len as f64;
        let widen = antialias && scale < 1.0;
        let kernel_width = if widen { 4.0 / scale } else { 4.0 };
        let tap_count = kernel_width.ceil() as isize + 2;

        let taps = (0..out_len)
            .map(|i| {
                let center = (i as f64 + 0.5) / scale - 0.5;
                let left = (center - kernel_width / 2.0).floor() as isize;
                let mut raw: Vec<(usize, f64)> = (0..tap_count)
                    .map(|p| {
                        let j = left + p;
                        let d = center - j as f64;
                        let w = if widen {
                            scale * cubic(scale * d)
                        } else {
                            cubic(d)
                        };
                        (j.clamp(0, in_len as isize - 1) as usize, w)
                    })
                    .collect();
                let total: f64 = raw.iter().map(|&(_, w)| w).sum();
                raw.sort_by_key(|&(j, _)| j);
                let mut merged: Vec<(usize, f64)> = Vec::with_capacity(raw.len());
                for (j, w) in raw {
                    match merged.last_mut() {
                        Some((lj, lw)) if *lj == j => *lw += w,
                        _ => merged.push((j, w)),
                    }
                }
                merged.retain(|&(_, w)| w != 0.0);
                for (_, w) in &mut merged {
                    *w /= total;
                }
                merged
            })
            .collect();
        AxisWeights {
            in_len,
            out_len,
            taps,
        }
    }
}

/// Resize along both axes: rows (height) first, then columns.
pub fn bicubic_resize(
    p: &ImagePlane,
    out_h: usize,
    out_w: usize,
    antialias: bool,
) -> Result<ImagePlane> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::contract(
            "bicubic_resize",
            format!("target size {out_h}x{out_w} is empty"),
        ));
    }
    let (h, w) = p.dims();
    let rows = AxisWeights::new(h, out_h, antialias);
    let cols = AxisWeights::new(w, out_w, antialias);

    // Each output is formed as `ref + Σ w·(src − ref)` with `ref` its first
    // tap, which equals `Σ w·src` for unit-sum weights but reproduces flat
    // regions exactly instead of to rounding error.
    let mut tmp = vec![0.0; out_h * w];
    for (i, taps) in rows.taps.iter().enumerate() {
        let dst = &mut tmp[i * w..(i + 1) * w];
        let r = taps[0].0;
        let ref_row = &p.values()[r * w..(r + 1) * w];
        dst.copy_from_slice(ref_row);
        for &(src, wt) in &taps[1..] {
            let row = &p.values()[src * w..(src + 1) * w];
            for ((d, &s), &q) in dst.iter_mut().zip(row).zip(ref_row) {
                *d += wt * (s - q);
            }
        }
    }
    let mut out = vec![0.0; out_h * out_w];
    for i in 0..out_h {
        let src_row = &tmp[i * w..(i + 1) * w];
        for (j, taps) in cols.taps.iter().enumerate() {
            let q = src_row[taps[0].0];
            out[i * out_w + j] = q + taps[1..]
                .iter()
                .map(|&(src, wt)| wt * (src_row[src] - q))
                .sum::<f64>();
        }
    }
    ImagePlane::new(out_h, out_w, out)
}

/// Bicubic down by `scale` then back up: the network's input for a
/// high-resolution plane. The plane is first center-cropped to a multiple of
/// `scale`; the output has the cropped size.
pub fn degrade(hr: &ImagePlane, scale: usize) -> Result<ImagePlane> {
    if scale == 0 || hr.height() < scale || hr.width() < scale {
        return Err(Error::contract(
            "degrade",
            format!(
                "{}x{} image is smaller than scale {scale}",
                hr.height(),
                hr.width()
            ),
        ));
    }
    let hr = hr.crop_to_multiple(scale)?;
    if scale == 1 {
        return Ok(hr);
    }
    let (h, w) = hr.dims();
    let lr = bicubic_resize(&hr, h / scale, w / scale, true)?;
    bicubic_resize(&lr, h, w, true)
}

//! Studio-swing BT.601 YCbCr, the convention used for SR luminance metrics.

use super::plane::{ImagePlane, RgbImage};
use crate::error::Result;

const OFFSET: [f64; 3] = [16.0, 128.0, 128.0];
const FORWARD: [[f64; 3]; 3] = [
    [65.481, 128.553, 24.966],
    [-37.797, -74.203, 112.0],
    [112.0, -93.786, -18.214],
];

fn inverse_matrix() -> [[f64; 3]; 3] {
    let m = FORWARD;
    let cof =
        |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    let det = m[0][0] * cof(1, 2, 1, 2) - m[0][1] * cof(1, 2, 0, 2) + m[0][2] * cof(1, 2, 0, 1);
    [
        [
            cof(1, 2, 1, 2) / det,
            -cof(0, 2, 1, 2) / det,
            cof(0, 1, 1, 2) / det,
        ],
        [
            -cof(1, 2, 0, 2) / det,
            cof(0, 2, 0, 2) / det,
            -cof(0, 1, 0, 2) / det,
        ],
        [
            cof(1, 2, 0, 1) / det,
            -cof(0, 2, 0, 1) / det,
            cof(0, 1, 0, 1) / det,
        ],
    ]
}

/// `(Y, Cb, Cr)` for one pixel, RGB and outputs in `[0, 1]`.
pub fn ycbcr_from_rgb(rgb: [f64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (k, row) in FORWARD.iter().enumerate() {
        out[k] = (OFFSET[k] + row[0] * rgb[0] + row[1] * rgb[1] + row[2] * rgb[2]) / 255.0;
    }
    out
}

pub fn rgb_from_ycbcr(ycc: [f64; 3]) -> [f64; 3] {
    let inv = inverse_matrix();
    let centered = [
        ycc[0] * 255.0 - OFFSET[0],
        ycc[1] * 255.0 - OFFSET[1],
        ycc[2] * 255.0 - OFFSET[2],
    ];
    let mut out = [0.0; 3];
    for (k, row) in inv.iter().enumerate() {
        out[k] = row[0] * centered[0] + row[1] * centered[1] + row[2] * centered[2];
    }
    out
}

pub fn rgb_to_ycbcr(img: &RgbImage) -> (ImagePlane, ImagePlane, ImagePlane) {
    let (h, w) = (img.height(), img.width());
    let mut planes = [
        Vec::with_capacity(h * w),
        Vec::with_capacity(h * w),
        Vec::with_capacity(h * w),
    ];
    for px in img.data().chunks_exact(3) {
        let ycc = ycbcr_from_rgb([px[0], px[1], px[2]].map(|b| f64::from(b) / 255.0));
        for (p, v) in planes.iter_mut().zip(ycc) {
            p.push(v);
        }
    }
    let [y, cb, cr] = planes.map(|v| ImagePlane::new(h, w, v).expect("sized from the image"));
    (y, cb, cr)
}

pub fn ycbcr_to_rgb(y: &ImagePlane, cb: &ImagePlane, cr: &ImagePlane) -> Result<RgbImage> {
    let (h, w) = y.dims();
    let mut r = Vec::with_capacity(h * w);
    let mut g = Vec::with_capacity(h * w);
    let mut b = Vec::with_capacity(h * w);
    for ((&yv, &cbv), &crv) in y.values().iter().zip(cb.values()).zip(cr.values()) {
        let [rv, gv, bv] = rgb_from_ycbcr([yv, cbv, crv]);
        r.push(rv);
        g.push(gv);
        b.push(bv);
    }
    RgbImage::from_planes(
        &ImagePlane::new(h, w, r)?,
        &ImagePlane::new(cb.height(), cb.width(), g)?,
        &ImagePlane::new(cr.height(), cr.width(), b)?,
    )
}

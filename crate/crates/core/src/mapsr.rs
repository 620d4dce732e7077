//! Pixel-space MAP super-resolution: gradient descent on
//! `λ·penalty(y) + ‖T y − y_l‖²` with `T` the antialiased bicubic decimation
//! used everywhere else, written out as an explicit sparse operator.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::image::{bicubic_resize, AxisWeights, ImagePlane};
use crate::prior::{nip_penalty, nip_penalty_grad, NipConfig};

/// Sparse linear map from an `hr_h × hr_w` plane to an `lr_h × lr_w` plane.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearOperator {
    pub hr_dims: (usize, usize),
    pub lr_dims: (usize, usize),
    /// For each LR pixel (row-major), its `(flat HR index, weight)` terms.
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl LinearOperator {
    pub fn apply(&self, x: &ImagePlane) -> Result<ImagePlane> {
        if x.dims() != self.hr_dims {
            return Err(Error::contract(
                "LinearOperator::apply",
                format!("input {:?}, operator expects {:?}", x.dims(), self.hr_dims),
            ));
        }
        // Same first-tap-relative form as `bicubic_resize`, so flat planes map
        // to exactly the same constant.
        let v = x.values();
        let out = self
            .rows
            .iter()
            .map(|r| {
                let q = v[r[0].0];
                q + r[1..].iter().map(|&(k, w)| w * (v[k] - q)).sum::<f64>()
            })
            .collect();
        ImagePlane::new(self.lr_dims.0, self.lr_dims.1, out)
    }

    pub fn adjoint(&self, u: &ImagePlane) -> Result<ImagePlane> {
        if u.dims() != self.lr_dims {
            return Err(Error::contract(
                "LinearOperator::adjoint",
                format!("input {:?}, operator expects {:?}", u.dims(), self.lr_dims),
            ));
        }
        let mut out = vec![0.0; self.hr_dims.0 * self.hr_dims.1];
        for (r, &uv) in self.rows.iter().zip(u.values()) {
            let mut first = 1.0;
            for &(k, w) in &r[1..] {
                out[k] += w * uv;
                first -= w;
            }
            out[r[0].0] += first * uv;
        }
        ImagePlane::new(self.hr_dims.0, self.hr_dims.1, out)
    }
}

/// The antialiased bicubic downscale by `scale` as a [`LinearOperator`].
pub fn build_downsampler(hr_h: usize, hr_w: usize, scale: usize) -> Result<LinearOperator> {
    if scale == 0
        || hr_h == 0
        || hr_w == 0
        || !hr_h.is_multiple_of(scale)
        || !hr_w.is_multiple_of(scale)
    {
        return Err(Error::contract(
            "build_downsampler",
            format!("{hr_h}x{hr_w} is not a positive multiple of scale {scale}"),
        ));
    }
    let (lr_h, lr_w) = (hr_h / scale, hr_w / scale);
    let ry = AxisWeights::new(hr_h, lr_h, true);
    let rx = AxisWeights::new(hr_w, lr_w, true);
    let mut rows = Vec::with_capacity(lr_h * lr_w);
    for ty in &ry.taps {
        for tx in &rx.taps {
            rows.push(
                ty.iter()
                    .flat_map(|&(i, wy)| tx.iter().map(move |&(j, wx)| (i * hr_w + j, wy * wx)))
                    .collect(),
            );
        }
    }
    Ok(LinearOperator {
        hr_dims: (hr_h, hr_w),
        lr_dims: (lr_h, lr_w),
        rows,
    })
}

/// Default prior weight. Fixed-step descent on the surrogate is only stable
/// while `λ · step` stays small, because its slope near zero is about 2200.
pub const DEFAULT_MAP_LAMBDA: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq)]
pub struct MapConfig {
    /// `lambda` weighs the prior against the data term.
    pub nip: NipConfig,
    pub iterations: usize,
    pub step_size: f64,
    pub record_trace: bool,
}

impl Default for MapConfig {
    fn default() -> Self {
        MapConfig {
            nip: NipConfig::with_lambda(DEFAULT_MAP_LAMBDA),
            iterations: 400,
            step_size: 0.1,
            record_trace: false,
        }
    }
}

impl MapConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::Config(format!(
                "map step size must be positive, got {}",
                self.step_size
            )));
        }
        self.nip.validate()
    }
}

fn sub(a: &ImagePlane, b: &ImagePlane) -> ImagePlane {
    ImagePlane::from_fn(a.height(), a.width(), |i, j| a.get(i, j) - b.get(i, j))
}

/// `λ·penalty(y) + ‖T y − y_l‖²`.
pub fn map_objective(
    y: &ImagePlane,
    y_l: &ImagePlane,
    op: &LinearOperator,
    nip: &NipConfig,
) -> Result<f64> {
    let r = sub(&op.apply(y)?, y_l);
    let data: f64 = r.values().iter().map(|v| v * v).sum();
    let lambda = nip.effective_lambda();
    let prior = if lambda == 0.0 {
        0.0
    } else {
        lambda * nip_penalty(y, nip)?
    };
    Ok(prior + data)
}

/// `λ·∇penalty(y) + 2·Tᵀ(T y − y_l)`.
pub fn map_gradient(
    y: &ImagePlane,
    y_l: &ImagePlane,
    op: &LinearOperator,
    nip: &NipConfig,
) -> Result<ImagePlane> {
    let r = sub(&op.apply(y)?, y_l);
    let mut g = op.adjoint(&r)?.map(|v| 2.0 * v);
    let lambda = nip.effective_lambda();
    if lambda != 0.0 {
        let pg = nip_penalty_grad(y, nip)?;
        for (a, b) in g.values_mut().iter_mut().zip(pg.values()) {
            *a += lambda * b;
        }
    }
    Ok(g)
}

/// Result of [`map_sr`]: the clamped estimate and, if requested, the objective
/// before the first step and after every step.
#[derive(Clone, Debug, PartialEq)]
pub struct MapOutcome {
    pub estimate: ImagePlane,
    pub trace: Vec<f64>,
}

impl MapOutcome {
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iter,objective\n");
        for (k, j) in self.trace.iter().enumerate() {
            writeln!(out, "{k},{j}").expect("writing to a String");
        }
        out
    }
}

/// Fixed-step gradient descent from the bicubic upscale of `y_l`. The result
/// is clamped to `[0, 1]` once, after the last step.
pub fn map_sr(y_l: &ImagePlane, scale: usize, cfg: &MapConfig) -> Result<MapOutcome> {
    cfg.validate()?;
    let (h, w) = (y_l.height() * scale, y_l.width() * scale);
    let op = build_downsampler(h, w, scale)?;
    let mut y = bicubic_resize(y_l, h, w, true)?;
    let mut trace = Vec::new();
    let check = |j: f64, k: usize| {
        if j.is_finite() {
            Ok(j)
        } else {
            Err(Error::NonFinite(format!(
                "map objective at iteration {k}: {j}"
            )))
        }
    };
    if cfg.record_trace {
        trace.push(check(map_objective(&y, y_l, &op, &cfg.nip)?, 0)?);
    }
    for k in 1..=cfg.iterations {
        let g = map_gradient(&y, y_l, &op, &cfg.nip)?;
        for (v, d) in y.values_mut().iter_mut().zip(g.values()) {
            *v -= cfg.step_size * d;
        }
        if cfg.record_trace {
            trace.push(check(map_objective(&y, y_l, &op, &cfg.nip)?, k)?);
        } else if !y.values().iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite(format!("map estimate at iteration {k}")));
        }
    }
    Ok(MapOutcome {
        estimate: y.clamped(),
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    fn random_plane(rng: &mut SeededRng, h: usize, w: usize) -> ImagePlane {
        ImagePlane::from_fn(h, w, |_, _| rng.next_f64())
    }

    fn dot(a: &ImagePlane, b: &ImagePlane) -> f64 {
        a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn operator_matches_resize() {
        let mut rng = SeededRng::new(3);
        for &(h, w, s) in &[(12, 15, 3), (8, 8, 2), (20, 12, 4)] {
            let x = random_plane(&mut rng, h, w);
            let op = build_downsampler(h, w, s).unwrap();
            let a = op.apply(&x).unwrap();
            let b = bicubic_resize(&x, h / s, w / s, true).unwrap();
            for (p, q) in a.values().iter().zip(b.values()) {
                assert!((p - q).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constants_are_preserved() {
        let op = build_downsampler(9, 12, 3).unwrap();
        let out = op.apply(&ImagePlane::filled(9, 12, 0.37)).unwrap();
        assert!(out.values().iter().all(|v| (v - 0.37).abs() < 1e-14));
    }

    #[test]
    fn adjoint_identity() {
        let mut rng = SeededRng::new(4);
        let op = build_downsampler(15, 18, 3).unwrap();
        for _ in 0..5 {
            let x = random_plane(&mut rng, 15, 18);
            let u = random_plane(&mut rng, 5, 6);
            let lhs = dot(&op.apply(&x).unwrap(), &u);
            let rhs = dot(&x, &op.adjoint(&u).unwrap());
            assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs());
        }
    }

    #[test]
    fn non_multiple_rejected() {
        assert!(build_downsampler(10, 9, 3).is_err());
    }

    #[test]
    fn constant_input_is_a_fixed_point() {
        let cfg = MapConfig {
            iterations: 20,
            record_trace: true,
            ..MapConfig::default()
        };
        let out = map_sr(&ImagePlane::filled(6, 5, 0.6), 3, &cfg).unwrap();
        assert!(out.trace.iter().all(|&j| j == 0.0));
        assert!(out.estimate.values().iter().all(|&v| v == 0.6));
        assert_eq!(out.trace.len(), 21);
    }

    #[test]
    fn least_squares_trace_is_monotone() {
        let mut rng = SeededRng::new(8);
        let y_l = random_plane(&mut rng, 6, 6);
        let cfg = MapConfig {
            nip: NipConfig::with_lambda(0.0),
            iterations: 50,
            record_trace: true,
            ..MapConfig::default()
        };
        let out = map_sr(&y_l, 3, &cfg).unwrap();
        assert!(out.trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(out.trace_csv().starts_with("iter,objective\n0,"));
    }

    #[test]
    fn noiseless_data_term_converges() {
        let hr = ImagePlane::from_fn(24, 24, |i, j| {
            0.5 + 0.2 * (i as f64 / 5.0).sin() * (j as f64 / 7.0).cos()
        });
        let op = build_downsampler(24, 24, 3).unwrap();
        let y_l = op.apply(&hr).unwrap();
        let cfg = MapConfig {
            nip: NipConfig::with_lambda(0.0),
            record_trace: true,
            ..MapConfig::default()
        };
        let out = map_sr(&y_l, 3, &cfg).unwrap();
        assert!(
            *out.trace.last().unwrap() < 1e-6,
            "{}",
            out.trace.last().unwrap()
        );
    }
}

//! Central finite-difference checks of every hand-written gradient.
//!
//! Test points keep all filter responses at least one grey-level step away
//! from zero, where the surrogate has its kink.

use crate::error::Result;
use crate::image::ImagePlane;
use crate::mapsr::{build_downsampler, map_gradient, map_objective};
use crate::net::SrNetwork;
use crate::prior::{nip_penalty, nip_penalty_grad, total_loss, NipConfig};
use crate::rng::{rng_normal, SeededRng};
use crate::tensor::Tensor;

pub const TOLERANCE: f64 = 1e-4;
const STEP: f64 = 1e-6;
/// Denominator floor so entries that are zero up to rounding do not divide
/// by zero.
const FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub name: &'static str,
    pub entries: usize,
    pub max_rel_error: f64,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error <= self.tolerance
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR)
}

/// Compare `analytic` against central differences of `f` around `x`.
fn compare(
    name: &'static str,
    x: &[f64],
    analytic: &[f64],
    mut f: impl FnMut(&[f64]) -> Result<f64>,
) -> Result<GradCheckReport> {
    let mut probe = x.to_vec();
    let mut worst: f64 = 0.0;
    for k in 0..x.len() {
        probe[k] = x[k] + STEP;
        let up = f(&probe)?;
        probe[k] = x[k] - STEP;
        let down = f(&probe)?;
        probe[k] = x[k];
        worst = worst.max(relative_error(analytic[k], (up - down) / (2.0 * STEP)));
    }
    Ok(GradCheckReport {
        name,
        entries: x.len(),
        max_rel_error: worst,
        tolerance: TOLERANCE,
    })
}

/// A plane whose pixels are distinct multiples of `1/(h·w+1)` in shuffled
/// order, so no two pixels are closer than that.
pub fn kink_free_plane(h: usize, w: usize, seed: u64) -> ImagePlane {
    let n = h * w;
    let mut levels: Vec<f64> = (1..=n).map(|k| k as f64 / (n + 1) as f64).collect();
    SeededRng::new(seed).shuffle(&mut levels);
    ImagePlane::new(h, w, levels).expect("sized above")
}

pub fn check_penalty_grad() -> Result<GradCheckReport> {
    let cfg = NipConfig::with_lambda(1e-3);
    let y = kink_free_plane(9, 9, 11);
    let analytic = nip_penalty_grad(&y, &cfg)?;
    compare("nip_penalty_grad", y.values(), analytic.values(), |v| {
        nip_penalty(&ImagePlane::new(9, 9, v.to_vec())?, &cfg)
    })
}

pub fn check_total_loss_grad() -> Result<GradCheckReport> {
    let cfg = NipConfig::with_lambda(0.05);
    let a = kink_free_plane(8, 8, 12).to_tensor();
    let b = kink_free_plane(8, 8, 13).to_tensor();
    let y_h = Tensor::stack(&[&a, &b])?;
    let y_g = rng_normal(&mut SeededRng::new(14), [2, 1, 8, 8], 0.5, 0.2)?;
    let analytic = total_loss(&y_h, &y_g, &cfg)?.grad;
    compare("total_loss", y_h.data(), analytic.data(), |v| {
        Ok(total_loss(&Tensor::new([2, 1, 8, 8], v.to_vec())?, &y_g, &cfg)?.loss)
    })
}

/// A depth-3, width-8 network with every layer random (the final layer of a
/// fresh network is zero, which would hide the hidden-layer gradients).
pub fn random_network(seed: u64) -> Result<SrNetwork> {
    let mut net = SrNetwork::init_with_width(3, 8, seed)?;
    let mut rng = SeededRng::new(seed ^ 0x5eed);
    for layer in net.layers_mut() {
        layer.weights = rng_normal(&mut rng, layer.weights.shape(), 0.0, 0.3)?;
        for b in &mut layer.bias {
            *b = 0.1 * rng.next_normal();
        }
    }
    Ok(net)
}

/// Gradient of `⟨G, net(x)⟩` with respect to every weight, bias and input.
pub fn check_network_grad() -> Result<GradCheckReport> {
    let net = random_network(21)?;
    let x = rng_normal(&mut SeededRng::new(22), [2, 1, 6, 6], 0.5, 0.25)?;
    let g = rng_normal(&mut SeededRng::new(23), [2, 1, 6, 6], 0.0, 1.0)?;
    let (_, cache) = net.forward(&x)?;
    let grads = net.backward(&cache, &g)?;

    let mut params: Vec<f64> = Vec::new();
    for l in net.layers() {
        params.extend_from_slice(l.weights.data());
        params.extend_from_slice(&l.bias);
    }
    let n_params = params.len();
    params.extend_from_slice(x.data());
    let mut analytic: Vec<f64> = grads.values().collect();
    analytic.extend_from_slice(grads.input.data());

    compare("network", &params, &analytic, |v| {
        let mut probe = net.clone();
        let mut at = 0;
        for l in probe.layers_mut() {
            let n = l.weights.len();
            l.weights.data_mut().copy_from_slice(&v[at..at + n]);
            at += n;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&v[at..at + nb]);
            at += nb;
        }
        debug_assert_eq!(at, n_params);
        let xin = Tensor::new(x.shape(), v[n_params..].to_vec())?;
        Ok(probe.predict(&xin)?.dot(&g))
    })
}

pub fn check_map_grad() -> Result<GradCheckReport> {
    let cfg = NipConfig::with_lambda(1e-3);
    let op = build_downsampler(9, 9, 3)?;
    let y = kink_free_plane(9, 9, 31);
    let y_l = ImagePlane::from_fn(3, 3, |i, j| 0.3 + 0.1 * (i * 3 + j) as f64 / 9.0);
    let analytic = map_gradient(&y, &y_l, &op, &cfg)?;
    compare("map_objective", y.values(), analytic.values(), |v| {
        map_objective(&ImagePlane::new(9, 9, v.to_vec())?, &y_l, &op, &cfg)
    })
}

/// Every suite, in a fixed order.
pub fn run_all() -> Result<Vec<GradCheckReport>> {
    Ok(vec![
        check_penalty_grad()?,
        check_total_loss_grad()?,
        check_network_grad()?,
        check_map_grad()?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_suites_pass() {
        for r in run_all().unwrap() {
            assert!(r.passed(), "{r:?}");
        }
    }

    #[test]
    fn map_gradient_is_tight() {
        assert!(check_map_grad().unwrap().max_rel_error < 1e-5);
    }
}

//! Mini-batch SGD with heavy-ball momentum, weight decay, adjustable gradient
//! clipping and a step learning-rate schedule.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::image::PatchSet;
use crate::net::{LayerGrads, NetGrads, SrNetwork};
use crate::prior::{total_loss, NipConfig};
use crate::rng::SeededRng;
use crate::tensor::Tensor;

/// RNG stream used for per-epoch shuffling.
const SHUFFLE_STREAM: u64 = 2;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub momentum: f64,
    pub weight_decay: f64,
    pub lr0: f64,
    /// Epochs at which the learning rate is multiplied by `decay_factor`.
    pub decay_epochs: Vec<usize>,
    pub decay_factor: f64,
    pub epochs: usize,
    /// Gradients are clamped to `±clip_theta / lr`.
    pub clip_theta: f64,
    pub seed: u64,
    pub nip: NipConfig,
    pub training_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            momentum: 0.9,
            weight_decay: 1e-4,
            lr0: 0.1,
            decay_epochs: vec![60, 140],
            decay_factor: 0.1,
            epochs: 300,
            clip_theta: 0.01,
            seed: 0,
            nip: NipConfig::default(),
            training_fraction: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            ));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!(
                "weight_decay must be >= 0, got {}",
                self.weight_decay
            ));
        }
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return bad(format!("lr0 must be positive, got {}", self.lr0));
        }
        if self.decay_epochs.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!(
                "decay_epochs must be strictly increasing, got {:?}",
                self.decay_epochs
            ));
        }
        if !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) {
            return bad(format!(
                "decay_factor must lie in (0, 1], got {}",
                self.decay_factor
            ));
        }
        if !(self.clip_theta > 0.0 && self.clip_theta.is_finite()) {
            return bad(format!(
                "clip_theta must be positive, got {}",
                self.clip_theta
            ));
        }
        if !(self.training_fraction > 0.0 && self.training_fraction <= 1.0) {
            return bad(format!(
                "training_fraction must lie in (0, 1], got {}",
                self.training_fraction
            ));
        }
        self.nip.validate()
    }
}

/// `lr0 · decay_factor^(number of decay epochs ≤ epoch)`.
pub fn lr_at_epoch(cfg: &TrainConfig, epoch: usize) -> Result<f64> {
    if epoch >= cfg.epochs {
        return Err(Error::contract(
            "lr_at_epoch",
            format!("epoch {epoch} outside 0..{}", cfg.epochs),
        ));
    }
    let decays = cfg.decay_epochs.iter().filter(|&&e| e <= epoch).count();
    Ok(cfg.lr0 * cfg.decay_factor.powi(decays as i32))
}

/// Clamp every gradient element to `±theta / lr`.
pub fn clip_gradients(grads: &mut NetGrads, theta: f64, lr: f64) -> Result<()> {
    if !(theta > 0.0 && lr > 0.0) {
        return Err(Error::contract(
            "clip_gradients",
            format!("theta and lr must be positive, got {theta} and {lr}"),
        ));
    }
    let bound = theta / lr;
    for layer in &mut grads.layers {
        clip_values(layer.weights.data_mut(), bound);
        clip_values(&mut layer.bias, bound);
    }
    Ok(())
}

pub fn clip_values(values: &mut [f64], bound: f64) {
    for v in values {
        *v = v.clamp(-bound, bound);
    }
}

/// Per-parameter velocities, zero at the start of training.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub velocity: Vec<LayerGrads>,
}

impl OptimizerState {
    pub fn new(net: &SrNetwork) -> Self {
        OptimizerState {
            velocity: net
                .layers()
                .iter()
                .map(|l| LayerGrads {
                    weights: Tensor::zeros(l.weights.shape()),
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
        }
    }
}

/// `v ← momentum·v − lr·(g + weight_decay·p); p ← p + v`, elementwise.
pub fn momentum_step(
    params: &mut [f64],
    grads: &[f64],
    velocity: &mut [f64],
    lr: f64,
    momentum: f64,
    weight_decay: f64,
) {
    for ((p, &g), v) in params.iter_mut().zip(grads).zip(velocity.iter_mut()) {
        *v = momentum * *v - lr * (g + weight_decay * *p);
        *p += *v;
    }
}

/// One optimizer step. Weight decay applies to weights, not biases.
pub fn sgd_update(
    net: &mut SrNetwork,
    grads: &NetGrads,
    state: &mut OptimizerState,
    lr: f64,
    cfg: &TrainConfig,
) -> Result<()> {
    if grads.layers.len() != net.depth() || state.velocity.len() != net.depth() {
        return Err(Error::contract(
            "sgd_update",
            "layer counts of network, gradients and state differ",
        ));
    }
    for ((layer, g), v) in net
        .layers_mut()
        .iter_mut()
        .zip(&grads.layers)
        .zip(&mut state.velocity)
    {
        if g.weights.shape() != layer.weights.shape()
            || v.weights.shape() != layer.weights.shape()
            || g.bias.len() != layer.bias.len()
            || v.bias.len() != layer.bias.len()
        {
            return Err(Error::contract("sgd_update", "parameter shapes differ"));
        }
        momentum_step(
            layer.weights.data_mut(),
            g.weights.data(),
            v.weights.data_mut(),
            lr,
            cfg.momentum,
            cfg.weight_decay,
        );
        momentum_step(&mut layer.bias, &g.bias, &mut v.bias, lr, cfg.momentum, 0.0);
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    /// Mean per-patch loss over the epoch.
    pub loss: f64,
    pub mse_term: f64,
    /// Mean per-patch `λ · penalty`.
    pub nip_term: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,lr,loss,mse_term,nip_term,seconds\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{:.3}\n",
                r.epoch, r.lr, r.loss, r.mse_term, r.nip_term, r.seconds
            ));
        }
        out
    }
}

pub fn train(net: SrNetwork, ps: &PatchSet, cfg: &TrainConfig) -> Result<(SrNetwork, TrainLog)> {
    train_with_observer(net, ps, cfg, |_| {})
}

/// [`train`], calling `observer` after every epoch.
pub fn train_with_observer(
    mut net: SrNetwork,
    ps: &PatchSet,
    cfg: &TrainConfig,
    mut observer: impl FnMut(&EpochRecord),
) -> Result<(SrNetwork, TrainLog)> {
    cfg.validate()?;
    if ps.is_empty() {
        return Err(Error::contract("train", "empty patch set"));
    }
    let m = ps.len();
    let mut rng = SeededRng::with_stream(cfg.seed, SHUFFLE_STREAM);
    let mut state = OptimizerState::new(&net);
    let mut log = TrainLog::default();

    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        let lr = lr_at_epoch(cfg, epoch)?;
        let mut order: Vec<usize> = (0..m).collect();
        rng.shuffle(&mut order);

        let (mut loss_sum, mut mse_sum, mut nip_sum) = (0.0, 0.0, 0.0);
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch = ps.select(chunk);
            let (y, cache) = net.forward(&batch.lr)?;
            let report = total_loss(&y, &batch.hr, &cfg.nip)?;
            if !report.loss.is_finite() {
                return Err(Error::NonFinite(format!(
                    "epoch {epoch}, batch {b}: loss {}",
                    report.loss
                )));
            }
            let mut grads = net.backward(&cache, &report.grad)?;
            clip_gradients(&mut grads, cfg.clip_theta, lr)?;
            sgd_update(&mut net, &grads, &mut state, lr, cfg)?;

            let n = chunk.len() as f64;
            loss_sum += report.loss * n;
            mse_sum += report.mse_term * n;
            nip_sum += report.nip_term * n;
        }
        let record = EpochRecord {
            epoch,
            lr,
            loss: loss_sum / m as f64,
            mse_term: mse_sum / m as f64,
            nip_term: nip_sum / m as f64,
            seconds: started.elapsed().as_secs_f64(),
        };
        observer(&record);
        log.records.push(record);
    }
    Ok((net, log))
}

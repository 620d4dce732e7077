//! Flat `key = value` run configuration shared by every CLI command.
//!
//! `#` starts a comment. Unknown or repeated keys are errors, and every value
//! is range-checked when the file is parsed. [`CliConfig::to_text`] writes all
//! keys in [`KEYS`] order, so parse and serialize round-trip.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::eval::{SweepConfig, Variant};
use crate::image::PatchPlan;
use crate::mapsr::MapConfig;
use crate::net::HIDDEN_WIDTH;
use crate::prior::NipConfig;
use crate::train::TrainConfig;

/// Every accepted key, in serialization order.
pub const KEYS: [&str; 32] = [
    "manifest",
    "output_dir",
    "checkpoint",
    "scale",
    "depth",
    "width",
    "patch_size",
    "patch_stride",
    "augment",
    "shave",
    "batch_size",
    "momentum",
    "weight_decay",
    "lr0",
    "decay_epochs",
    "decay_factor",
    "epochs",
    "clip_theta",
    "seed",
    "training_fraction",
    "alpha",
    "lambda",
    "sigma_n",
    "sigma_r",
    "smooth_surrogate",
    "map_lambda",
    "map_iterations",
    "map_step_size",
    "map_record_trace",
    "sweep_depths",
    "sweep_fractions",
    "sweep_variants",
];

#[derive(Clone, Debug, PartialEq)]
pub struct CliConfig {
    pub manifest: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub checkpoint: Option<PathBuf>,
    pub scale: usize,
    pub depth: usize,
    pub width: usize,
    pub patch_size: usize,
    pub patch_stride: usize,
    pub augment: bool,
    /// Border removed before PSNR; `None` means the scale factor.
    pub shave: Option<usize>,
    pub train: TrainConfig,
    pub map_lambda: f64,
    pub map_iterations: usize,
    pub map_step_size: f64,
    pub map_record_trace: bool,
    pub sweep_depths: Vec<usize>,
    pub sweep_fractions: Vec<f64>,
    pub sweep_variants: Vec<Variant>,
}

impl Default for CliConfig {
    fn default() -> Self {
        let map = MapConfig::default();
        CliConfig {
            manifest: None,
            output_dir: PathBuf::from("out"),
            checkpoint: None,
            scale: 3,
            depth: 20,
            width: HIDDEN_WIDTH,
            patch_size: 41,
            patch_stride: 41,
            augment: true,
            shave: None,
            train: TrainConfig::default(),
            map_lambda: map.nip.lambda,
            map_iterations: map.iterations,
            map_step_size: map.step_size,
            map_record_trace: map.record_trace,
            sweep_depths: vec![20, 12, 5],
            sweep_fractions: vec![0.01, 0.04, 0.2, 1.0],
            sweep_variants: vec![Variant::Baseline, Variant::Nip],
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|v| parse_value(key, v.trim()))
        .collect()
}

fn parse_option<T: FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    if value == "none" {
        Ok(None)
    } else {
        parse_value(key, value).map(Some)
    }
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn show_option<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "none".to_string(), T::to_string)
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref()
        .map_or_else(|| "none".to_string(), |p| p.display().to_string())
}

impl CliConfig {
    /// Set one key from its textual value, without range checks.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let t = &mut self.train;
        match key {
            "manifest" => self.manifest = parse_option(key, value)?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            "checkpoint" => self.checkpoint = parse_option(key, value)?,
            "scale" => self.scale = parse_value(key, value)?,
            "depth" => self.depth = parse_value(key, value)?,
            "width" => self.width = parse_value(key, value)?,
            "patch_size" => self.patch_size = parse_value(key, value)?,
            "patch_stride" => self.patch_stride = parse_value(key, value)?,
            "augment" => self.augment = parse_value(key, value)?,
            "shave" => self.shave = parse_option(key, value)?,
            "batch_size" => t.batch_size = parse_value(key, value)?,
            "momentum" => t.momentum = parse_value(key, value)?,
            "weight_decay" => t.weight_decay = parse_value(key, value)?,
            "lr0" => t.lr0 = parse_value(key, value)?,
            "decay_epochs" => t.decay_epochs = parse_list(key, value)?,
            "decay_factor" => t.decay_factor = parse_value(key, value)?,
            "epochs" => t.epochs = parse_value(key, value)?,
            "clip_theta" => t.clip_theta = parse_value(key, value)?,
            "seed" => t.seed = parse_value(key, value)?,
            "training_fraction" => t.training_fraction = parse_value(key, value)?,
            "alpha" => t.nip.alpha = parse_value(key, value)?,
            "lambda" => t.nip.lambda = parse_value(key, value)?,
            "sigma_n" => t.nip.sigma_n = parse_option(key, value)?,
            "sigma_r" => t.nip.sigma_r = parse_option(key, value)?,
            "smooth_surrogate" => t.nip.smooth_surrogate = parse_value(key, value)?,
            "map_lambda" => self.map_lambda = parse_value(key, value)?,
            "map_iterations" => self.map_iterations = parse_value(key, value)?,
            "map_step_size" => self.map_step_size = parse_value(key, value)?,
            "map_record_trace" => self.map_record_trace = parse_value(key, value)?,
            "sweep_depths" => self.sweep_depths = parse_list(key, value)?,
            "sweep_fractions" => self.sweep_fractions = parse_list(key, value)?,
            "sweep_variants" => self.sweep_variants = parse_list(key, value)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let t = &self.train;
        Some(match key {
            "manifest" => show_path(&self.manifest),
            "output_dir" => self.output_dir.display().to_string(),
            "checkpoint" => show_path(&self.checkpoint),
            "scale" => self.scale.to_string(),
            "depth" => self.depth.to_string(),
            "width" => self.width.to_string(),
            "patch_size" => self.patch_size.to_string(),
            "patch_stride" => self.patch_stride.to_string(),
            "augment" => self.augment.to_string(),
            "shave" => show_option(&self.shave),
            "batch_size" => t.batch_size.to_string(),
            "momentum" => t.momentum.to_string(),
            "weight_decay" => t.weight_decay.to_string(),
            "lr0" => t.lr0.to_string(),
            "decay_epochs" => join(&t.decay_epochs),
            "decay_factor" => t.decay_factor.to_string(),
            "epochs" => t.epochs.to_string(),
            "clip_theta" => t.clip_theta.to_string(),
            "seed" => t.seed.to_string(),
            "training_fraction" => t.training_fraction.to_string(),
            "alpha" => t.nip.alpha.to_string(),
            "lambda" => t.nip.lambda.to_string(),
            "sigma_n" => show_option(&t.nip.sigma_n),
            "sigma_r" => show_option(&t.nip.sigma_r),
            "smooth_surrogate" => t.nip.smooth_surrogate.to_string(),
            "map_lambda" => self.map_lambda.to_string(),
            "map_iterations" => self.map_iterations.to_string(),
            "map_step_size" => self.map_step_size.to_string(),
            "map_record_trace" => self.map_record_trace.to_string(),
            "sweep_depths" => join(&self.sweep_depths),
            "sweep_fractions" => join(&self.sweep_fractions),
            "sweep_variants" => join(&self.sweep_variants),
            _ => return None,
        })
    }

    /// Parse and validate. Paths are kept as written.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = CliConfig::default();
        let mut seen = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |msg: String| Error::Config(format!("line {}: {msg}", lineno + 1));
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| at("expected `key = value`".into()))?;
            let (key, value) = (key.trim(), value.trim());
            if seen.contains(&key) {
                return Err(at(format!("key `{key}` given twice")));
            }
            seen.push(key);
            cfg.set(key, value).map_err(|e| at(e.to_string()))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// [`CliConfig::parse`] a file; relative paths inside it are resolved
    /// against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = CliConfig::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.manifest = cfg.manifest.map(|p| base.join(p));
        cfg.checkpoint = cfg.checkpoint.map(|p| base.join(p));
        cfg.output_dir = base.join(&cfg.output_dir);
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        KEYS.iter()
            .map(|k| format!("{k} = {}\n", self.get(k).expect("every key has a value")))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.scale < 2 {
            return bad(format!("scale must be >= 2, got {}", self.scale));
        }
        if self.depth < 2 {
            return bad(format!("depth must be >= 2, got {}", self.depth));
        }
        if self.width == 0 {
            return bad("width must be >= 1".into());
        }
        if self.patch_size < 3 || self.patch_stride == 0 {
            return bad(format!(
                "patch_size must be >= 3 and patch_stride >= 1, got {} and {}",
                self.patch_size, self.patch_stride
            ));
        }
        self.train.validate()?;
        self.map_config().validate()?;
        if self.sweep_depths.iter().any(|&d| d < 2) {
            return bad(format!(
                "sweep_depths must all be >= 2, got {:?}",
                self.sweep_depths
            ));
        }
        if self.sweep_fractions.iter().any(|&f| !(f > 0.0 && f <= 1.0)) {
            return bad(format!(
                "sweep_fractions must lie in (0, 1], got {:?}",
                self.sweep_fractions
            ));
        }
        Ok(())
    }

    pub fn shave(&self) -> usize {
        self.shave.unwrap_or(self.scale)
    }

    pub fn patch_plan(&self) -> PatchPlan {
        PatchPlan {
            scale: self.scale,
            size: self.patch_size,
            stride: self.patch_stride,
            augment: self.augment,
        }
    }

    /// The prior used by the map solver: the training prior's shape with
    /// `map_lambda` as its weight.
    pub fn map_config(&self) -> MapConfig {
        MapConfig {
            nip: NipConfig {
                lambda: self.map_lambda,
                sigma_n: None,
                sigma_r: None,
                ..self.train.nip.clone()
            },
            iterations: self.map_iterations,
            step_size: self.map_step_size,
            record_trace: self.map_record_trace,
        }
    }

    pub fn sweep_config(&self) -> SweepConfig {
        SweepConfig {
            depths: self.sweep_depths.clone(),
            fractions: self.sweep_fractions.clone(),
            variants: self.sweep_variants.clone(),
            width: self.width,
            plan: self.patch_plan(),
            train: self.train.clone(),
            shave: self.shave(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = CliConfig::default();
        let text = cfg.to_text();
        assert_eq!(text.lines().count(), KEYS.len());
        let back = CliConfig::parse(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn edited_values_round_trip() {
        let text = "# toy run\nmanifest = data/manifest.txt\ndepth = 5  # shallow\n\
                    decay_epochs = 10, 20\nsigma_n = 0.5\nsigma_r = 0.01\nsweep_variants = nip\n";
        let cfg = CliConfig::parse(text).unwrap();
        assert_eq!(cfg.depth, 5);
        assert_eq!(cfg.train.decay_epochs, vec![10, 20]);
        assert_eq!(cfg.train.nip.sigma_n, Some(0.5));
        assert_eq!(cfg.sweep_variants, vec![Variant::Nip]);
        assert_eq!(CliConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn rejects_typos_duplicates_and_ranges() {
        let err = CliConfig::parse("lamda = 0.1").unwrap_err().to_string();
        assert!(err.contains("line 1") && err.contains("lamda"), "{err}");
        assert!(CliConfig::parse("depth = 5\ndepth = 6").is_err());
        assert!(CliConfig::parse("momentum = 1.5").is_err());
        assert!(CliConfig::parse("scale = 1").is_err());
        assert!(CliConfig::parse("alpha = 0.5").is_err());
        assert!(CliConfig::parse("epochs = many").is_err());
        assert!(CliConfig::parse("no equals sign").is_err());
    }

    #[test]
    fn every_key_is_settable() {
        let defaults = CliConfig::default();
        for k in KEYS {
            let mut cfg = defaults.clone();
            let v = defaults.get(k).unwrap();
            cfg.set(k, &v).unwrap();
            assert_eq!(cfg, defaults, "{k}");
        }
    }
}

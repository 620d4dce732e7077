//! Acceptance criteria, run without the libtest harness so every
//! `criterion N ...: PASS|FAIL` line is printed. Exits non-zero if any fail.

use std::path::Path;
use std::time::{Duration, Instant};

use nipsr::cli::{cmd_sweep, cmd_train};
use nipsr::config::CliConfig;
use nipsr::eval::{
    evaluate, evaluate_planes, psnr, run_sweep_on_planes, ssim, SweepConfig, Variant,
};
use nipsr::gradcheck::run_all;
use nipsr::image::{build_patch_set, load_netpbm, DatasetManifest, ImagePlane, PatchPlan, Role};
use nipsr::mapsr::{build_downsampler, map_sr, MapConfig, DEFAULT_MAP_LAMBDA};
use nipsr::net::SrNetwork;
use nipsr::prior::{nip_penalty, pairwise_penalty_bruteforce, phi, phi_prime, NipConfig};
use nipsr::rng::SeededRng;
use nipsr::synth::{stripes, write_corpus};
use nipsr::train::{train, TrainConfig};

fn report(n: u32, name: &str, ok: bool, started: Instant, limit: Duration, detail: String) -> bool {
    let elapsed = started.elapsed();
    let ok = ok && elapsed < limit;
    println!(
        "criterion {n} {name}: {} ({detail}; {:.2}s of {}s)",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    ok
}

fn criterion_1_surrogate_fidelity() -> bool {
    let t = Instant::now();
    let cfg = NipConfig::default();
    let at_one = phi(1.0, &cfg);
    let max_dev = (50..=1000)
        .map(|k| {
            let x = k as f64 * 1e-3;
            (phi(x, &cfg) - x.powf(0.1)).abs()
        })
        .fold(0.0, f64::max);
    let limit = 0.1 * (10f64.exp() - 1.0);
    let slope = phi_prime(f64::MIN_POSITIVE, &cfg);
    let slope_rel = (slope - limit).abs() / limit;
    report(
        1,
        "surrogate fidelity",
        at_one == 1.0 && max_dev < 0.05 && slope_rel < 1e-9,
        t,
        Duration::from_secs(1),
        format!(
            "phi(1) = {at_one}, max deviation {max_dev:.4}, slope at 0+ rel error {slope_rel:.1e}"
        ),
    )
}

fn criterion_2_oracle_equivalence() -> bool {
    let t = Instant::now();
    let cfg = NipConfig::default();
    let mut rng = SeededRng::new(2);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (h, w) = (3 + rng.below(14), 3 + rng.below(14));
        let y = ImagePlane::from_fn(h, w, |_, _| rng.next_f64());
        let fast = nip_penalty(&y, &cfg).unwrap();
        let brute = pairwise_penalty_bruteforce(&y, &cfg).unwrap();
        worst = worst.max((fast - brute).abs());
    }
    report(
        2,
        "oracle equivalence",
        worst <= 1e-12,
        t,
        Duration::from_secs(5),
        format!("max abs difference {worst:.2e} over 100 planes"),
    )
}

fn criterion_3_gradient_suite() -> bool {
    let t = Instant::now();
    let reports = run_all().unwrap();
    let detail = reports
        .iter()
        .map(|r| format!("{} {:.1e}", r.name, r.max_rel_error))
        .collect::<Vec<_>>()
        .join(", ");
    report(
        3,
        "gradient suite",
        reports.len() == 4 && reports.iter().all(|r| r.passed() && r.tolerance <= 1e-4),
        t,
        Duration::from_secs(60),
        detail,
    )
}

fn criterion_4_identity_anchor() -> bool {
    let t = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let path = write_corpus(dir.path(), 0, 5, 48, 4).unwrap();
    let manifest = DatasetManifest::load(&path, 3).unwrap();
    let net = SrNetwork::init(20, 4).unwrap();
    let res = evaluate(&net, &manifest, 3, 3).unwrap();
    let worst = res
        .records
        .iter()
        .map(|r| (r.psnr_db - r.bicubic_psnr_db).abs())
        .fold(0.0, f64::max);
    report(
        4,
        "identity anchor",
        res.records.len() == 5 && res.failures.is_empty() && worst <= 1e-9,
        t,
        Duration::from_secs(10),
        format!(
            "{} images, max |psnr - bicubic| {worst:.2e} dB",
            res.records.len()
        ),
    )
}

fn criterion_5_toy_training() -> bool {
    let t = Instant::now();
    let seed = 1;
    let planes: Vec<_> = (0..16).map(|k| stripes(96, 96, seed * 100 + k)).collect();
    let plan = PatchPlan {
        scale: 3,
        size: 24,
        stride: 24,
        augment: false,
    };
    let ps = build_patch_set(&planes, &plan).unwrap();
    let test: Vec<_> = (0..3)
        .map(|k| (format!("test{k}"), stripes(48, 48, seed * 100 + 50 + k)))
        .collect();
    let mut ok = ps.len() == 256;
    let mut detail = vec![format!("{} patches", ps.len())];
    for lambda in [0.0, 1e-3] {
        let cfg = TrainConfig {
            batch_size: 8,
            lr0: 3e-4,
            decay_epochs: vec![],
            epochs: 30,
            seed,
            nip: NipConfig::with_lambda(lambda),
            ..TrainConfig::default()
        };
        let (net, log) = train(SrNetwork::init_with_width(3, 8, seed).unwrap(), &ps, &cfg).unwrap();
        let ratio = log.records.last().unwrap().loss / log.records[0].loss;
        let r = evaluate_planes(&net, &test, 3, 3).unwrap();
        let gain = r.mean_psnr_db - r.mean_bicubic_psnr_db;
        ok &= ratio < 0.5 && gain >= -0.01;
        detail.push(format!(
            "lambda {lambda}: loss ratio {ratio:.3}, {gain:+.3} dB over bicubic"
        ));
    }
    report(
        5,
        "toy training",
        ok,
        t,
        Duration::from_secs(300),
        detail.join(", "),
    )
}

fn load_split(manifest: &DatasetManifest, role: Role) -> Vec<(String, ImagePlane)> {
    manifest
        .paths(role)
        .unwrap()
        .into_iter()
        .map(|p| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            (name, load_netpbm(p).unwrap().luminance())
        })
        .collect()
}

fn criterion_6_low_training_trend() -> bool {
    let t = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let manifest =
        DatasetManifest::load(write_corpus(dir.path(), 7, 3, 96, 6).unwrap(), 3).unwrap();
    let train_planes: Vec<_> = load_split(&manifest, Role::Train)
        .into_iter()
        .map(|(_, p)| p)
        .collect();
    let test = load_split(&manifest, Role::Test);
    let (mut base, mut nip) = (Vec::new(), Vec::new());
    for seed in 1..=3 {
        let cfg = SweepConfig {
            depths: vec![5],
            fractions: vec![0.05],
            variants: vec![Variant::Baseline, Variant::Nip],
            width: 64,
            plan: PatchPlan {
                scale: 3,
                size: 41,
                stride: 11,
                augment: false,
            },
            train: TrainConfig {
                batch_size: 1,
                lr0: 3e-5,
                decay_epochs: vec![],
                epochs: 60,
                seed,
                nip: NipConfig::with_lambda(1e-3),
                ..TrainConfig::default()
            },
            shave: 3,
        };
        let table = run_sweep_on_planes(&train_planes, &test, &cfg).unwrap();
        base.push(table.get(Variant::Baseline, 5, 0.05).unwrap().psnr);
        nip.push(table.get(Variant::Nip, 5, 0.05).unwrap().psnr);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (mb, mn) = (mean(&base), mean(&nip));
    report(
        6,
        "low-training trend",
        mn >= mb - 0.05,
        t,
        Duration::from_secs(1800),
        format!(
            "baseline {base:.4?} mean {mb:.4}, nip {nip:.4?} mean {mn:.4}, difference {:+.4} dB",
            mn - mb
        ),
    )
}

fn max_horizontal_gradient(p: &ImagePlane) -> f64 {
    let (h, w) = p.dims();
    let mut best = 0.0f64;
    for i in 0..h {
        for j in 0..w - 1 {
            best = best.max((p.get(i, j + 1) - p.get(i, j)).abs());
        }
    }
    best
}

fn criterion_7_edge_preference() -> bool {
    let t = Instant::now();
    let cfg = NipConfig::default();
    let (one, half) = (phi(1.0, &cfg), phi(0.5, &cfg));
    let hr = ImagePlane::from_fn(24, 24, |_, j| if j < 12 { 0.2 } else { 0.8 });
    let y_l = build_downsampler(24, 24, 3).unwrap().apply(&hr).unwrap();
    let run = |nip: NipConfig| {
        let cfg = MapConfig {
            nip,
            ..MapConfig::default()
        };
        max_horizontal_gradient(&map_sr(&y_l, 3, &cfg).unwrap().estimate)
    };
    let sparse = run(NipConfig::with_lambda(DEFAULT_MAP_LAMBDA));
    let gaussian = run(NipConfig::exact(2.0, DEFAULT_MAP_LAMBDA));
    report(
        7,
        "edge preference",
        one < 2.0 * half && sparse > gaussian,
        t,
        Duration::from_secs(60),
        format!("phi(1) {one:.4} vs 2 phi(0.5) {:.4}; max edge gradient alpha 0.1 {sparse:.4} vs alpha 2 {gaussian:.4}", 2.0 * half),
    )
}

fn toy_config(dir: &Path, out: &str) -> CliConfig {
    let text = format!(
        "manifest = manifest.txt\n\
         output_dir = {out}\n\
         depth = 3\n\
         width = 8\n\
         patch_size = 24\n\
         patch_stride = 12\n\
         augment = false\n\
         batch_size = 8\n\
         lr0 = 3e-4\n\
         decay_epochs = 2\n\
         epochs = 3\n\
         seed = 8\n\
         sweep_depths = 3,2\n\
         sweep_fractions = 0.5,1.0\n\
         sweep_variants = baseline,nip\n"
    );
    let path = dir.join(format!("{out}.cfg"));
    std::fs::write(&path, text).unwrap();
    let cfg = CliConfig::load(&path).unwrap();
    cfg.validate().unwrap();
    cfg
}

fn criterion_8_determinism() -> bool {
    let t = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path(), 4, 2, 48, 8).unwrap();
    let (a, b) = (toy_config(dir.path(), "a"), toy_config(dir.path(), "b"));
    cmd_train(&a, |_| {}).unwrap();
    cmd_train(&b, |_| {}).unwrap();
    cmd_sweep(&a).unwrap();
    cmd_sweep(&b).unwrap();
    let same = |file: &str| {
        let x = std::fs::read(dir.path().join("a").join(file)).unwrap();
        let y = std::fs::read(dir.path().join("b").join(file)).unwrap();
        !x.is_empty() && x == y
    };
    let files = ["model.ckpt", "train_log.csv", "sweep.csv", "sweep.svg"];
    let matches: Vec<bool> = files.iter().map(|f| same(f)).collect();
    let detail = files
        .iter()
        .zip(&matches)
        .map(|(f, m)| format!("{f} {}", if *m { "identical" } else { "differs" }))
        .collect::<Vec<_>>()
        .join(", ");
    // The training log records wall-clock seconds, so it is reported but
    // not required to match.
    let ok = matches[0] && matches[2] && matches[3];
    report(8, "determinism", ok, t, Duration::from_secs(300), detail)
}

fn criterion_9_metric_oracles() -> bool {
    let t = Instant::now();
    let a = ImagePlane::from_fn(16, 16, |i, j| 0.2 + 0.02 * ((i * 7 + j * 3) % 20) as f64);
    let tenth = psnr(&a, &a.map(|v| v + 0.1), 0).unwrap();
    let one_level = psnr(&a, &a.map(|v| v + 1.0 / 255.0), 0).unwrap();
    let expected = 20.0 * 255f64.log10();
    let self_ssim = ssim(&a, &a).unwrap();
    let ok = (tenth - 20.0).abs() <= 1e-6
        && (one_level - expected).abs() <= 1e-6
        && (self_ssim - 1.0).abs() <= 1e-12;
    report(
        9,
        "metric oracles",
        ok,
        t,
        Duration::from_secs(1),
        format!("psnr {tenth:.9} and {one_level:.9} dB (expected 20 and {expected:.9}), ssim(x, x) = {self_ssim}"),
    )
}

fn main() {
    let criteria: [fn() -> bool; 9] = [
        criterion_1_surrogate_fidelity,
        criterion_2_oracle_equivalence,
        criterion_3_gradient_suite,
        criterion_4_identity_anchor,
        criterion_5_toy_training,
        criterion_6_low_training_trend,
        criterion_7_edge_preference,
        criterion_8_determinism,
        criterion_9_metric_oracles,
    ];
    let failed = criteria
        .iter()
        .enumerate()
        .filter(|(k, f)| {
            let ok = std::panic::catch_unwind(**f).unwrap_or(false);
            if !ok {
                println!("criterion {} did not pass", k + 1);
            }
            !ok
        })
        .count();
    println!("acceptance: {} of 9 criteria passed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

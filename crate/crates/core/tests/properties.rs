use proptest::prelude::*;

use nipsr::checkpoint::{decode_checkpoint, encode_checkpoint};
use nipsr::config::CliConfig;
use nipsr::eval::psnr;
use nipsr::gradcheck::random_network;
use nipsr::image::{degrade, ImagePlane};
use nipsr::mapsr::build_downsampler;
use nipsr::prior::{nip_penalty, NipConfig};
use nipsr::tensor::{conv2d_backward, conv2d_forward, Tensor};
use nipsr::train::clip_values;

fn plane(h: usize, w: usize) -> impl Strategy<Value = ImagePlane> {
    prop::collection::vec(0.0f64..1.0, h * w).prop_map(move |v| ImagePlane::new(h, w, v).unwrap())
}

fn sized_plane(lo: usize, hi: usize) -> impl Strategy<Value = ImagePlane> {
    (lo..=hi, lo..=hi).prop_flat_map(|(h, w)| plane(h, w))
}

fn tensor(shape: [usize; 4]) -> impl Strategy<Value = Tensor> {
    let n: usize = shape.iter().product();
    prop::collection::vec(-1.0f64..1.0, n).prop_map(move |v| Tensor::new(shape, v).unwrap())
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn conv_is_adjoint_to_its_input_gradient(
        x in tensor([2, 3, 7, 6]),
        w in tensor([4, 3, 3, 3]),
        g in tensor([2, 4, 7, 6]),
    ) {
        let y = conv2d_forward(&x, &w, &[0.0; 4], 1).unwrap();
        let grads = conv2d_backward(&x, &w, 1, &g).unwrap();
        prop_assert!(close(y.dot(&g), x.dot(&grads.grad_x), 1e-12));
        prop_assert!(close(y.dot(&g), w.dot(&grads.grad_w), 1e-12));
    }

    #[test]
    fn conv_is_linear_in_its_input(
        a in tensor([1, 2, 5, 5]),
        b in tensor([1, 2, 5, 5]),
        w in tensor([3, 2, 3, 3]),
        s in -2.0f64..2.0,
    ) {
        let mix = a.zip_map(&b, |u, v| u + s * v).unwrap();
        let lhs = conv2d_forward(&mix, &w, &[0.0; 3], 1).unwrap();
        let ya = conv2d_forward(&a, &w, &[0.0; 3], 1).unwrap();
        let yb = conv2d_forward(&b, &w, &[0.0; 3], 1).unwrap();
        let rhs = ya.zip_map(&yb, |u, v| u + s * v).unwrap();
        for (l, r) in lhs.data().iter().zip(rhs.data()) {
            prop_assert!((l - r).abs() < 1e-12);
        }
    }

    #[test]
    fn penalty_ignores_offsets_flips_and_rotations(y in sized_plane(3, 12), c in -0.5f64..0.5) {
        let cfg = NipConfig::default();
        let p = nip_penalty(&y, &cfg).unwrap();
        prop_assert!(p >= 0.0);
        for other in [y.map(|v| v + c), y.flip_horizontal(), y.flip_vertical(), y.rotate90(1)] {
            prop_assert!(close(nip_penalty(&other, &cfg).unwrap(), p, 1e-9));
        }
    }

    #[test]
    fn constant_planes_cost_nothing_and_degrade_exactly(h in 3usize..20, w in 3usize..20, v in 0.0f64..1.0) {
        let y = ImagePlane::filled(h * 3, w * 3, v);
        prop_assert_eq!(nip_penalty(&y, &NipConfig::default()).unwrap(), 0.0);
        prop_assert_eq!(degrade(&y, 3).unwrap(), y);
    }

    #[test]
    fn downsampler_adjoint_identity(x in plane(12, 15), u in plane(4, 5)) {
        let op = build_downsampler(12, 15, 3).unwrap();
        let lhs: f64 = op.apply(&x).unwrap().values().iter().zip(u.values()).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.values().iter().zip(op.adjoint(&u).unwrap().values()).map(|(a, b)| a * b).sum();
        prop_assert!(close(lhs, rhs, 1e-12));
    }

    #[test]
    fn clipping_is_bounded_and_idempotent(mut v in prop::collection::vec(-1e3f64..1e3, 0..64), bound in 0.01f64..10.0) {
        clip_values(&mut v, bound);
        prop_assert!(v.iter().all(|x| x.abs() <= bound));
        let once = v.clone();
        clip_values(&mut v, bound);
        prop_assert_eq!(v, once);
    }

    #[test]
    fn psnr_is_symmetric(a in plane(9, 9), b in plane(9, 9), shave in 0usize..3) {
        prop_assert_eq!(psnr(&a, &b, shave).unwrap(), psnr(&b, &a, shave).unwrap());
    }

    #[test]
    fn gray_netpbm_round_trips(h in 1usize..9, w in 1usize..9, seed in any::<u64>()) {
        let mut bytes = format!("P5\n{w} {h}\n255\n").into_bytes();
        bytes.extend((0..h * w).map(|k| (seed.rotate_left(k as u32 % 64) as u8) ^ k as u8));
        let img = nipsr::image::netpbm::parse_netpbm(&bytes).unwrap();
        prop_assert_eq!(nipsr::image::netpbm::encode_netpbm(&img), bytes);
    }

    #[test]
    fn checkpoints_round_trip(seed in any::<u64>()) {
        let net = random_network(seed).unwrap();
        let back = decode_checkpoint(&encode_checkpoint(&net)).unwrap();
        prop_assert_eq!(back.fingerprint(), net.fingerprint());
        prop_assert_eq!(encode_checkpoint(&back), encode_checkpoint(&net));
    }

    #[test]
    fn config_text_round_trips(
        depth in 2usize..30,
        seed in any::<u64>(),
        lambda in 0.0f64..1.0,
        fractions in prop::collection::btree_set(1u32..=100, 1..5),
    ) {
        let mut cfg = CliConfig::default();
        cfg.set("depth", &depth.to_string()).unwrap();
        cfg.set("seed", &seed.to_string()).unwrap();
        cfg.set("lambda", &lambda.to_string()).unwrap();
        let list: Vec<String> = fractions.iter().map(|f| (*f as f64 / 100.0).to_string()).collect();
        cfg.set("sweep_fractions", &list.join(",")).unwrap();
        prop_assert_eq!(CliConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }
}

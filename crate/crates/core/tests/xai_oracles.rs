use std::collections::VecDeque;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use songxai::model::{build_model, train, LabeledSet, Layer, ModelConfig, Sequential, TrainConfig};
use songxai::xai::{
    deeplift, gradcam, gradcam_raw, jet, lime_explain, normalize_minmax, overlay, read_saliency, shap_explain,
    slic_segment, write_saliency, LimeConfig, Method, ProbabilityModel, SaliencyMap, SaliencySidecar, SegmentMask,
    ShapConfig, SlicConfig, NORM_EPS,
};
use songxai::{Error, Tensor};

fn rng(seed: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

fn uniform(r: &mut Xoshiro256PlusPlus, shape: &[usize], scale: f32) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| scale * (2.0 * r.random::<f32>() - 1.0)).collect()).unwrap()
}

fn conv(r: &mut Xoshiro256PlusPlus, cin: usize, cout: usize, k: usize, pad: usize) -> Layer {
    Layer::Conv2d {
        weight: uniform(r, &[cout, cin, k, k], 0.6),
        bias: uniform(r, &[cout], 0.2),
        stride: 1,
        pad,
    }
}

fn linear(r: &mut Xoshiro256PlusPlus, fin: usize, fout: usize) -> Layer {
    Layer::Linear {
        weight: uniform(r, &[fout, fin], 0.6),
        bias: uniform(r, &[fout], 0.2),
    }
}

/// Naive 3x3 same-padding cross-correlation of a `[C, H, W]` input.
fn naive_conv(x: &[f32], c: usize, h: usize, w: usize, weight: &Tensor, bias: &Tensor) -> Vec<f64> {
    let k = weight.shape()[0];
    let mut out = vec![0.0f64; k * h * w];
    for o in 0..k {
        for y in 0..h as isize {
            for xx in 0..w as isize {
                let mut s = bias.data()[o] as f64;
                for ci in 0..c {
                    for dy in -1..=1isize {
                        for dx in -1..=1isize {
                            let (yy, xs) = (y + dy, xx + dx);
                            if yy < 0 || xs < 0 || yy >= h as isize || xs >= w as isize {
                                continue;
                            }
                            let wv = weight.data()[((o * c + ci) * 3 + (dy + 1) as usize) * 3 + (dx + 1) as usize];
                            s += wv as f64 * x[(ci * h + yy as usize) * w + xs as usize] as f64;
                        }
                    }
                }
                out[(o * h + y as usize) * w + xx as usize] = s;
            }
        }
    }
    out
}

// ---------------------------------------------------------------- Grad-CAM

#[test]
fn gradcam_raw_matches_hand_computation() {
    // Two 2x3 channels; gradient means are 0.5 and -0.25.
    let a = Tensor::new(vec![2, 2, 3], vec![1.0, 2.0, 0.0, 4.0, 0.0, 1.0, 2.0, 2.0, 2.0, 0.0, 8.0, 4.0]).unwrap();
    let da = Tensor::new(vec![2, 2, 3], vec![0.5, 0.5, 0.5, 0.5, 0.5, 0.5, -0.5, 0.0, -0.25, -0.25, -0.5, 0.0]).unwrap();
    let (alpha, raw) = gradcam_raw(&a, &da).unwrap();
    assert_eq!(alpha, vec![0.5, -0.25]);
    // 0.5 * A0 - 0.25 * A1, then ReLU.
    assert_eq!(raw, vec![0.0, 0.5, 0.0, 2.0, 0.0, 0.0]);
}

/// conv(1->2) + ReLU + flatten + linear: Grad-CAM has a closed form because
/// d logit_c / dA is the weight row of class c.
#[test]
fn gradcam_on_a_conv_linear_net_matches_closed_form() {
    for seed in 0..10 {
        let mut r = rng(seed);
        let (h, w) = (5, 7);
        let c1 = conv(&mut r, 1, 2, 3, 1);
        let fc = linear(&mut r, 2 * h * w, 3);
        let net = Sequential::new(vec![c1.clone(), Layer::Relu, Layer::Flatten, fc.clone()]);
        let x = uniform(&mut r, &[1, h, w], 1.0);
        let class = (seed % 3) as usize;
        let cam = gradcam(&net, &x, class).unwrap();

        let (Layer::Conv2d { weight, bias, .. }, Layer::Linear { weight: fw, .. }) = (&c1, &fc) else { unreachable!() };
        let act: Vec<f64> = naive_conv(x.data(), 1, h, w, weight, bias).into_iter().map(|v| v.max(0.0)).collect();
        let row = &fw.data()[class * 2 * h * w..(class + 1) * 2 * h * w];
        let alpha: Vec<f64> = (0..2).map(|k| row[k * h * w..(k + 1) * h * w].iter().map(|&v| v as f64).sum::<f64>() / (h * w) as f64).collect();
        for p in 0..h * w {
            let expected = (alpha[0] * act[p] + alpha[1] * act[h * w + p]).max(0.0);
            assert!((cam.raw[p] as f64 - expected).abs() < 1e-5, "seed {seed} pixel {p}");
        }
        assert_eq!(cam.grid, (h, w));
    }
}

#[test]
fn single_positive_channel_gives_minmax_of_that_map() {
    let mut r = rng(3);
    let c1 = conv(&mut r, 1, 1, 3, 1);
    let fc = Layer::Linear {
        weight: Tensor::full(&[2, 24], 0.5),
        bias: Tensor::zeros(&[2]),
    };
    let net = Sequential::new(vec![c1.clone(), Layer::Relu, Layer::Flatten, fc]);
    let x = uniform(&mut r, &[1, 4, 6], 1.0);
    let cam = gradcam(&net, &x, 0).unwrap();
    let Layer::Conv2d { weight, bias, .. } = &c1 else { unreachable!() };
    let act: Vec<f32> = naive_conv(x.data(), 1, 4, 6, weight, bias).into_iter().map(|v| v.max(0.0) as f32).collect();
    let expected = normalize_minmax(&act, NORM_EPS).unwrap();
    for (a, b) in cam.map.values.iter().zip(&expected) {
        assert!((a - b).abs() < 1e-5);
    }
}

#[test]
fn zero_gradients_give_an_all_zero_map() {
    let mut r = rng(4);
    let net = Sequential::new(vec![
        conv(&mut r, 1, 2, 3, 1),
        Layer::Relu,
        Layer::Flatten,
        Layer::Linear {
            weight: Tensor::zeros(&[2, 2 * 16]),
            bias: Tensor::zeros(&[2]),
        },
    ]);
    let cam = gradcam(&net, &uniform(&mut r, &[1, 4, 4], 1.0), 1).unwrap();
    assert!(cam.map.values.iter().all(|&v| v == 0.0));
}

fn small_cnn(seed: u64) -> Sequential {
    let cfg = ModelConfig {
        conv_channels: vec![3, 4],
        fc_sizes: vec![6, 2],
        ..ModelConfig::for_input(8, 12)
    };
    build_model(&cfg, seed).unwrap().net
}

fn argmax_f32(v: &[f32]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[test]
fn gradcam_peak_ignores_positive_rescaling_of_the_class_row() {
    for seed in 0..10 {
        let net = small_cnn(seed);
        let mut r = rng(100 + seed);
        let x = uniform(&mut r, &[1, 8, 12], 1.0);
        let base = gradcam(&net, &x, 0).unwrap();
        let mut scaled = net.clone();
        if let Some(Layer::Linear { weight, bias }) = scaled.layers.last_mut() {
            let f = weight.shape()[1];
            weight.data_mut()[..f].iter_mut().for_each(|v| *v *= 3.0);
            bias.data_mut()[0] *= 3.0;
        }
        let other = gradcam(&scaled, &x, 0).unwrap();
        if base.raw.iter().any(|&v| v > 0.0) {
            assert_eq!(argmax_f32(&base.map.values), argmax_f32(&other.map.values), "seed {seed}");
        }
        assert!(other.map.values.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

#[test]
fn unknown_class_is_rejected() {
    let net = small_cnn(1);
    let x = Tensor::zeros(&[1, 8, 12]);
    assert!(matches!(gradcam(&net, &x, 2), Err(Error::InvalidArgument(_))));
    assert!(deeplift(&net, &x, &x, 5).is_err());
}

// ---------------------------------------------------------------- DeepLIFT

#[test]
fn deeplift_linear_example() {
    let net = Sequential::new(vec![
        Layer::Flatten,
        Layer::Linear {
            weight: Tensor::new(vec![2, 2], vec![2.0, 3.0, 0.0, 0.0]).unwrap(),
            bias: Tensor::zeros(&[2]),
        },
    ]);
    let x = Tensor::new(vec![1, 1, 2], vec![1.0, 1.0]).unwrap();
    let reference = Tensor::zeros(&[1, 1, 2]);
    let d = deeplift(&net, &x, &reference, 0).unwrap();
    assert_eq!(d.contributions.data(), &[2.0, 3.0]);
    assert_eq!(d.delta, 5.0);
    assert_eq!(d.contribution_sum(), 5.0);

    let same = deeplift(&net, &x, &x, 0).unwrap();
    assert!(same.contributions.data().iter().all(|&v| v == 0.0));
    assert!(same.map.values.iter().all(|&v| v == 0.0));
    assert!(deeplift(&net, &x, &Tensor::zeros(&[1, 2, 1]), 0).is_err());
}

/// Random pool-free conv/ReLU nets of at most three weight layers, all
/// dimensions at most 8.
fn random_pool_free_net(r: &mut Xoshiro256PlusPlus) -> (Sequential, [usize; 3]) {
    let c = r.random_range(1..=3);
    let (h, w) = (r.random_range(3..=8), r.random_range(3..=8));
    let convs = r.random_range(1..=2);
    let mut layers = vec![];
    let mut cin = c;
    for _ in 0..convs {
        let cout = r.random_range(1..=4);
        layers.push(conv(r, cin, cout, 3, 1));
        layers.push(Layer::Relu);
        cin = cout;
    }
    layers.push(Layer::Flatten);
    let mut fin = cin * h * w;
    if convs == 1 {
        let hidden = r.random_range(2..=8);
        layers.push(linear(r, fin, hidden));
        layers.push(Layer::Relu);
        fin = hidden;
    }
    layers.push(linear(r, fin, 2));
    (Sequential::new(layers), [c, h, w])
}

#[test]
fn deeplift_sums_to_delta_on_random_pool_free_nets() {
    check_deeplift_pool_free();
}

/// Worst |sum - delta| over 20 nets; panics at 1e-4.
pub fn check_deeplift_pool_free() -> f64 {
    let mut worst = 0.0f64;
    let mut r = rng(77);
    for trial in 0..20 {
        let (net, shape) = random_pool_free_net(&mut r);
        let x = uniform(&mut r, &shape, 1.0);
        let reference = uniform(&mut r, &shape, 1.0);
        let class = trial % 2;
        let d = deeplift(&net, &x, &reference, class).unwrap();
        let logits = net.forward(&Tensor::stack(&[&x, &reference]).unwrap()).unwrap();
        let delta = logits.data()[class] as f64 - logits.data()[2 + class] as f64;
        assert!((d.delta - delta).abs() < 1e-6);
        assert!((d.contribution_sum() - delta).abs() < 1e-4, "trial {trial}: {} vs {delta}", d.contribution_sum());
        worst = worst.max((d.contribution_sum() - delta).abs());
    }
    worst
}

// ---------------------------------------------------------------- SLIC

fn is_four_connected(mask: &SegmentMask) -> bool {
    let (h, w) = (mask.height, mask.width);
    let mut seen = vec![false; mask.count];
    let mut visited = vec![false; h * w];
    for start in 0..h * w {
        if visited[start] {
            continue;
        }
        let l = mask.labels[start] as usize;
        if seen[l] {
            return false;
        }
        seen[l] = true;
        let mut q = VecDeque::from([start]);
        visited[start] = true;
        while let Some(i) = q.pop_front() {
            let (y, x) = (i / w, i % w);
            let nb = [
                (y > 0).then(|| i - w),
                (y + 1 < h).then(|| i + w),
                (x > 0).then(|| i - 1),
                (x + 1 < w).then(|| i + 1),
            ];
            for j in nb.into_iter().flatten() {
                if !visited[j] && mask.labels[j] as usize == l {
                    visited[j] = true;
                    q.push_back(j);
                }
            }
        }
    }
    seen.iter().all(|&s| s)
}

#[test]
fn slic_on_a_uniform_image_is_a_near_regular_grid() {
    let (h, w) = (120, 240);
    let m = slic_segment(&vec![0.5; h * w], h, w, &SlicConfig::default()).unwrap();
    let target = (h * w) as f64 / 100.0;
    for (l, &a) in m.areas().iter().enumerate() {
        assert!((a as f64 - target).abs() <= 0.5 * target, "segment {l}: {a} vs {target}");
    }
    assert!(is_four_connected(&m));
    assert!((90..=110).contains(&m.count), "{}", m.count);
}

#[test]
fn slic_k1_and_errors() {
    let m = slic_segment(&vec![0.1; 12 * 16], 12, 16, &SlicConfig { segments: 1, ..Default::default() }).unwrap();
    assert_eq!((m.count, m.areas()), (1, vec![12 * 16]));
    assert!(slic_segment(&[0.0; 4], 2, 2, &SlicConfig { segments: 0, ..Default::default() }).is_err());
    assert!(slic_segment(&[0.0; 4], 2, 2, &SlicConfig { segments: 5, ..Default::default() }).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn slic_labels_are_connected_and_deterministic(seed in any::<u64>(), k in 1usize..40, h in 8usize..40, w in 8usize..40) {
        let mut r = rng(seed);
        // Blocky random image so intensity edges matter.
        let img: Vec<f32> = (0..h * w).map(|i| if (i / w / 5 + i % w / 7) % 2 == 0 { r.random::<f32>() * 0.2 } else { 0.8 }).collect();
        let cfg = SlicConfig { segments: k.min(h * w), ..Default::default() };
        let a = slic_segment(&img, h, w, &cfg).unwrap();
        prop_assert_eq!(&a, &slic_segment(&img, h, w, &cfg).unwrap());
        prop_assert!(a.areas().iter().all(|&n| n > 0));
        prop_assert!(a.labels.iter().all(|&l| (l as usize) < a.count));
        prop_assert!(is_four_connected(&a));
    }
}

// ---------------------------------------------------------------- LIME

fn grid_mask(h: usize, w: usize, bh: usize, bw: usize) -> SegmentMask {
    let per_row = w / bw;
    let labels = (0..h * w).map(|i| ((i / w / bh) * per_row + (i % w) / bw) as u32).collect();
    SegmentMask {
        height: h,
        width: w,
        labels,
        count: (h / bh) * per_row,
    }
}

/// Probability 1 for class 0 iff segment `target` still carries signal.
struct Planted {
    mask: SegmentMask,
    target: u32,
}

impl ProbabilityModel for Planted {
    fn probabilities(&self, batch: &Tensor) -> songxai::Result<Vec<Vec<f32>>> {
        let plane = self.mask.height * self.mask.width;
        Ok(batch
            .data()
            .chunks(plane)
            .map(|img| {
                let on = img.iter().zip(&self.mask.labels).any(|(&v, &l)| l == self.target && v > 0.5);
                if on { vec![1.0, 0.0] } else { vec![0.0, 1.0] }
            })
            .collect())
    }
}

struct Constant;

impl ProbabilityModel for Constant {
    fn probabilities(&self, batch: &Tensor) -> songxai::Result<Vec<Vec<f32>>> {
        Ok(vec![vec![0.3, 0.7]; batch.shape()[0]])
    }
}

#[test]
fn lime_finds_the_planted_superpixel() {
    check_lime_planted();
}

/// Top-3 hits out of 20 seeds and the lowest R2.
pub fn check_lime_planted() -> (usize, f64) {
    let mut min_r2 = f64::INFINITY;
    let mask = grid_mask(20, 50, 2, 5);
    assert_eq!(mask.count, 100);
    let planted = Planted { mask: mask.clone(), target: 5 };
    let x = Tensor::full(&[1, 20, 50], 1.0);
    let mut hits = 0;
    for seed in 0..20 {
        let cfg = LimeConfig { seed, ..Default::default() };
        let e = lime_explain(&planted, &x, &mask, 0, 0.0, &cfg).unwrap();
        let best = (0..100).max_by(|&a, &b| e.weights[a].total_cmp(&e.weights[b])).unwrap();
        assert_eq!(best, 5);
        assert!(e.weights.iter().enumerate().all(|(j, &v)| j == 5 || v < e.weights[5]));
        assert!(e.r2 >= 0.5, "seed {seed}: R2 {}", e.r2);
        min_r2 = min_r2.min(e.r2);
        if e.top_positive.iter().take(3).any(|&j| j == 5) {
            hits += 1;
        }
        let sorted = e.top_positive.windows(2).all(|p| e.weights[p[0]] >= e.weights[p[1]]);
        assert!(sorted && e.top_positive.iter().all(|&j| e.weights[j] > 0.0));
    }
    assert!(hits >= 19, "{hits}/20");
    (hits, min_r2)
}

#[test]
fn lime_constant_model_and_determinism() {
    let mask = grid_mask(10, 10, 5, 5);
    let x = Tensor::full(&[1, 10, 10], 1.0);
    let cfg = LimeConfig { samples: 200, ..Default::default() };
    let e = lime_explain(&Constant, &x, &mask, 0, 0.0, &cfg).unwrap();
    assert!(e.weights.iter().all(|w| w.abs() < 1e-6));
    assert!(e.map.values.iter().all(|&v| v < 1e-6));

    let planted = Planted { mask: mask.clone(), target: 2 };
    let a = lime_explain(&planted, &x, &mask, 0, 0.0, &cfg).unwrap();
    let b = lime_explain(&planted, &x, &mask, 0, 0.0, &cfg).unwrap();
    assert_eq!((a.weights, a.map), (b.weights, b.map));

    let few = LimeConfig { samples: 3, ..Default::default() };
    assert!(matches!(
        lime_explain(&planted, &x, &mask, 0, 0.0, &few),
        Err(Error::UnderDetermined { samples: 3, features: 4 })
    ));
}

// ---------------------------------------------------------------- SHAP

fn linear_net(r: &mut Xoshiro256PlusPlus, shape: &[usize]) -> (Sequential, Tensor) {
    let f: usize = shape.iter().product();
    let weight = uniform(r, &[2, f], 1.0);
    let net = Sequential::new(vec![
        Layer::Flatten,
        Layer::Linear {
            weight: weight.clone(),
            bias: uniform(r, &[2], 1.0),
        },
    ]);
    (net, weight)
}

#[test]
fn shap_is_exact_on_linear_models() {
    check_shap_linear();
}

/// Worst absolute attribution error over 10 linear models.
pub fn check_shap_linear() -> f64 {
    let mut worst = 0.0f64;
    let mut r = rng(9);
    for trial in 0..10 {
        let shape = [1 + trial % 2, 4, 5];
        let f: usize = shape.iter().product();
        let (net, weight) = linear_net(&mut r, &shape);
        let x = uniform(&mut r, &shape, 1.0);
        let nb = 1 + trial * 3;
        let backgrounds: Vec<Tensor> = (0..nb).map(|_| uniform(&mut r, &shape, 1.0)).collect();
        let class = trial % 2;
        let e = shap_explain(&net, &x, &backgrounds, class, &ShapConfig { seed: trial as u64, ..Default::default() }).unwrap();
        for i in 0..f {
            let mean_b = backgrounds.iter().map(|b| b.data()[i] as f64).sum::<f64>() / nb as f64;
            let expected = weight.data()[class * f + i] as f64 * (x.data()[i] as f64 - mean_b);
            let err = (e.attributions.data()[i] as f64 - expected).abs();
            assert!(err < 1e-3, "trial {trial} feature {i}");
            worst = worst.max(err);
        }
    }
    worst
}

#[test]
fn shap_degenerate_cases() {
    let mut r = rng(10);
    let (net, _) = linear_net(&mut r, &[1, 3, 3]);
    let x = uniform(&mut r, &[1, 3, 3], 1.0);
    let e = shap_explain(&net, &x, &[x.clone(), x.clone()], 0, &ShapConfig::default()).unwrap();
    assert!(e.attributions.data().iter().all(|&v| v == 0.0));
    assert!(e.map.values.iter().all(|&v| v == 0.0));
    assert!(shap_explain(&net, &x, &[], 0, &ShapConfig::default()).is_err());
}

/// Class 0 lights the top half, class 1 the bottom half.
fn toy_set(n: usize, seed: u64) -> LabeledSet {
    let mut r = rng(seed);
    let mut set = LabeledSet::default();
    for i in 0..n {
        let label = i % 2;
        let data = (0..32 * 64)
            .map(|p| {
                let lit = (label == 0) == (p / 64 < 16);
                0.2 * r.random::<f32>() + if lit { 0.6 } else { 0.0 }
            })
            .collect();
        set.push(Tensor::new(vec![1, 32, 64], data).unwrap(), label, format!("toy{i}"), 0);
    }
    set
}

#[test]
fn shap_is_stable_when_interpolation_samples_double() {
    let cfg = ModelConfig {
        conv_channels: vec![8, 16, 16, 32, 32],
        fc_sizes: vec![64, 64, 2],
        ..ModelConfig::for_input(32, 64)
    };
    let mut m = build_model(&cfg, 0).unwrap();
    let set = toy_set(8, 4);
    train(&mut m, &set, None, &TrainConfig { epochs: 20, batch_size: 4, ..Default::default() }).unwrap();
    let backgrounds: Vec<Tensor> = toy_set(50, 11).inputs;
    let x = &set.inputs[0];
    let base = ShapConfig { interpolation_samples: 8, seed: 1, ..Default::default() };
    let a = shap_explain(&m.net, x, &backgrounds, 0, &base).unwrap();
    let b = shap_explain(&m.net, x, &backgrounds, 0, &ShapConfig { interpolation_samples: 16, ..base }).unwrap();
    // RMS over the normalized map, whose full scale is 1.
    let rms = (a.map.values.iter().zip(&b.map.values).map(|(p, q)| ((p - q) as f64).powi(2)).sum::<f64>()
        / a.map.len() as f64)
        .sqrt();
    assert!(rms < 0.05, "map RMS change {rms}");
}

// ---------------------------------------------------------------- maps

#[test]
fn jet_midpoint_is_the_piecewise_linear_value() {
    // Halfway between the (0, 1, 1) and (1, 1, 0) control points.
    assert_eq!(jet(0.5), [0.5, 1.0, 0.5]);
    assert_eq!(jet(0.25), [0.0, 0.5, 1.0]);
    assert_eq!(jet(0.75), [1.0, 0.5, 0.0]);
}

#[test]
fn overlay_alpha_extremes() {
    let map = SaliencyMap {
        height: 1,
        width: 3,
        values: vec![0.0, 0.5, 1.0],
        method: Method::Gradcam,
        target_class: 0,
    };
    let gray = [0.2, 0.4, 0.9];
    let g = overlay(&gray, &map, 0.0).unwrap();
    assert_eq!(g, gray.iter().map(|&v| [v; 3]).collect::<Vec<_>>());
    let j = overlay(&gray, &map, 1.0).unwrap();
    assert_eq!(j, map.values.iter().map(|&v| jet(v)).collect::<Vec<_>>());
    let half = overlay(&gray, &map, 0.5).unwrap();
    assert_eq!(half[1], [0.45, 0.7, 0.45]);
}

proptest! {
    #[test]
    fn normalized_maps_span_the_unit_interval(values in prop::collection::vec(-1e3f32..1e3, 2..64)) {
        let n = normalize_minmax(&values, NORM_EPS).unwrap();
        prop_assert!(n.iter().all(|v| (0.0..=1.0).contains(v)));
        let constant = values.iter().all(|&v| v == values[0]);
        let max = n.iter().cloned().fold(0.0f32, f32::max);
        prop_assert_eq!(n.iter().cloned().fold(1.0f32, f32::min), 0.0);
        let spans = if constant { max == 0.0 } else { max > 1.0 - 1e-6 };
        prop_assert!(spans);
        let again = normalize_minmax(&n, NORM_EPS).unwrap();
        prop_assert!(n.iter().zip(&again).all(|(a, b)| (a - b).abs() < 1e-7 || constant));
    }
}

#[test]
fn saliency_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let map = SaliencyMap::from_raw(2, 3, &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0], Method::EnsembleMax, 1).unwrap();
    let sidecar = SaliencySidecar {
        sample_id: "eastern_0001_black".into(),
        method: Method::EnsembleMax,
        target_class: 1,
        height: 2,
        width: 3,
        seed: Some(7),
        parameters: serde_json::json!({"alpha": 0.5}),
    };
    write_saliency(dir.path(), "s", &[0.5; 6], &map, &sidecar, 0.5).unwrap();
    assert_eq!(read_saliency(&dir.path().join("s.bin")).unwrap(), map);
    assert!(dir.path().join("s.png").exists() && dir.path().join("s.json").exists());
}

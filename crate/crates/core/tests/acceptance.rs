//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Every reference value here comes from an implementation written inside
//! this file (naive transforms, direct filters, textbook layer loops), never
//! from the library code under test.

use std::f64::consts::PI;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use sigsal_core::micronet::{
    conv2d, dense, forward, randomize_layer, reference_model, softmax, LayerWeights, Padding, REFERENCE_TAP,
};
use sigsal_core::rng::{seeded_rng, RandomStream};
use sigsal_core::saliency::{signature_activation_map, suppress_background, ActivationStack, BilateralParams};
use sigsal_core::sanity::{run_sanity, tap_map, write_run, RandomizationMode};
use sigsal_core::spectral::{dct, idct};
use sigsal_core::theorem::{estimate_bound, sample_mixture, support_energy_ratio, SparseMixSpec};
use sigsal_core::wsol::{evaluate, iou, match_and_score, synthetic_suite, BBox, Connectivity, SuiteKind};
use sigsal_core::{Seed, Tensor};

const DCT_ORACLE_TOL: f64 = 1e-9;
const DCT_ROUND_TRIP_TOL: f64 = 1e-10;
const PARSEVAL_TOL: f64 = 1e-10;
const PIPELINE_TOL: f64 = 1e-9;
const THEOREM_MEAN_MIN: f64 = 0.5;
const THEOREM_LOWER_MIN: f64 = 0.45;
const SUPPRESSION_RATIO_MIN: f64 = 2.0;
const IOU_TOL: f64 = 1e-12;
const NOISE_ERROR_MIN: f64 = 0.8;
const SANITY_DIFF_MIN: f64 = 1e-6;
const LAYER_ORACLE_TOL: f64 = 1e-12;
const PROB_SUM_TOL: f64 = 1e-9;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn random_tensor(rng: &mut RandomStream, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::from_vec(shape.to_vec(), (0..n).map(|_| rng.uniform_range(-1.0, 1.0)).collect()).unwrap()
}

// ---- oracles -------------------------------------------------------------

fn alpha(k: usize, n: usize) -> f64 {
    if k == 0 {
        (1.0 / n as f64).sqrt()
    } else {
        (2.0 / n as f64).sqrt()
    }
}

fn basis(k: usize, i: usize, n: usize) -> f64 {
    alpha(k, n) * (PI * (2 * i + 1) as f64 * k as f64 / (2 * n) as f64).cos()
}

fn naive_dct1(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n).map(|k| (0..n).map(|i| basis(k, i, n) * x[i]).sum()).collect()
}

fn naive_dct2(x: &[f64], h: usize, w: usize) -> Vec<f64> {
    let mut out = vec![0.0; h * w];
    for u in 0..h {
        for v in 0..w {
            let mut s = 0.0;
            for i in 0..h {
                for j in 0..w {
                    s += basis(u, i, h) * basis(v, j, w) * x[i * w + j];
                }
            }
            out[u * w + v] = s;
        }
    }
    out
}

fn naive_idct2(c: &[f64], h: usize, w: usize) -> Vec<f64> {
    let mut out = vec![0.0; h * w];
    for i in 0..h {
        for j in 0..w {
            let mut s = 0.0;
            for u in 0..h {
                for v in 0..w {
                    s += basis(u, i, h) * basis(v, j, w) * c[u * w + v];
                }
            }
            out[i * w + j] = s;
        }
    }
    out
}

fn minmax(v: &[f64]) -> Vec<f64> {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        v.iter().map(|x| (x - lo) / (hi - lo)).collect()
    } else {
        vec![0.0; v.len()]
    }
}

fn bilateral_oracle(m: &[f64], h: usize, w: usize, ss: f64, sr: f64, r: i64) -> Vec<f64> {
    let mut out = vec![0.0; h * w];
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let c = m[(y as usize) * w + x as usize];
            let (mut num, mut den) = (0.0, 0.0);
            for dy in -r..=r {
                for dx in -r..=r {
                    let (qy, qx) = (y + dy, x + dx);
                    if qy < 0 || qx < 0 || qy >= h as i64 || qx >= w as i64 {
                        continue;
                    }
                    let v = m[(qy as usize) * w + qx as usize];
                    let wt = (-((dy * dy + dx * dx) as f64) / (2.0 * ss * ss)).exp()
                        * (-((v - c) * (v - c)) / (2.0 * sr * sr)).exp();
                    num += wt * v;
                    den += wt;
                }
            }
            out[(y as usize) * w + x as usize] = num / den;
        }
    }
    out
}

/// Bilinear sampling at half-pixel centers, edge samples replicated.
fn resize_oracle(m: &[f64], h: usize, w: usize, oh: usize, ow: usize) -> Vec<f64> {
    let at = |r: i64, c: i64| m[(r.clamp(0, h as i64 - 1) as usize) * w + c.clamp(0, w as i64 - 1) as usize];
    let mut out = Vec::with_capacity(oh * ow);
    for i in 0..oh {
        let sy = ((i as f64 + 0.5) * h as f64 / oh as f64 - 0.5).clamp(0.0, (h - 1) as f64);
        for j in 0..ow {
            let sx = ((j as f64 + 0.5) * w as f64 / ow as f64 - 0.5).clamp(0.0, (w - 1) as f64);
            let (y0, x0) = (sy.floor() as i64, sx.floor() as i64);
            let (fy, fx) = (sy - y0 as f64, sx - x0 as f64);
            let v = (1.0 - fy) * ((1.0 - fx) * at(y0, x0) + fx * at(y0, x0 + 1))
                + fy * ((1.0 - fx) * at(y0 + 1, x0) + fx * at(y0 + 1, x0 + 1));
            out.push(v);
        }
    }
    out
}

fn signature_map_oracle(stack: &[f64], s: usize, h: usize, w: usize, oh: usize, ow: usize) -> Vec<f64> {
    let mut acc = vec![0.0; h * w];
    for ch in 0..s {
        let plane = &stack[ch * h * w..(ch + 1) * h * w];
        let signs: Vec<f64> = naive_dct2(plane, h, w).iter().map(|&c| c.signum()).collect();
        for (a, r) in acc.iter_mut().zip(naive_idct2(&signs, h, w)) {
            *a += r * r;
        }
    }
    let mean: Vec<f64> = acc.iter().map(|v| v / s as f64).collect();
    let smoothed = bilateral_oracle(&minmax(&mean), h, w, 3.0, 0.1, 6);
    minmax(&resize_oracle(&smoothed, h, w, oh, ow))
}

/// Zero padding made explicit, then a textbook strided cross-correlation.
fn conv_oracle(x: &Tensor<f64>, k: &Tensor<f64>, b: &Tensor<f64>, stride: usize, same: bool) -> Tensor<f64> {
    let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (oc, kh, kw) = (k.shape()[0], k.shape()[2], k.shape()[3]);
    let pads = |n: usize, kk: usize| {
        if same {
            let out = n.div_ceil(stride);
            let total = ((out - 1) * stride + kk).saturating_sub(n);
            (out, total / 2, total - total / 2)
        } else {
            ((n - kk) / stride + 1, 0, 0)
        }
    };
    let (oh, pt, pb) = pads(h, kh);
    let (ow, pl, pr) = pads(w, kw);
    let (ph, pw) = (h + pt + pb, w + pl + pr);
    let mut padded = vec![0.0; c * ph * pw];
    for ch in 0..c {
        for y in 0..h {
            for xx in 0..w {
                padded[(ch * ph + y + pt) * pw + xx + pl] = x.data()[(ch * h + y) * w + xx];
            }
        }
    }
    let mut out = vec![0.0; oc * oh * ow];
    for o in 0..oc {
        for y in 0..oh {
            for xx in 0..ow {
                let mut s = b.data()[o];
                for ch in 0..c {
                    for dy in 0..kh {
                        for dx in 0..kw {
                            s += k.data()[((o * c + ch) * kh + dy) * kw + dx]
                                * padded[(ch * ph + y * stride + dy) * pw + xx * stride + dx];
                        }
                    }
                }
                out[(o * oh + y) * ow + xx] = s;
            }
        }
    }
    Tensor::from_vec([oc, oh, ow], out).unwrap()
}

// ---- criteria -------------------------------------------------------------

fn dct_correctness() -> Check {
    let mut rng = seeded_rng(Seed(101));
    let mut worst = 0.0f64;
    for case in 0..200 {
        let t = if case % 2 == 0 {
            let n = 1 + rng.below(16);
            let x = random_tensor(&mut rng, &[n]);
            let got = dct(&x).unwrap().coefficients;
            let want = naive_dct1(x.data());
            got.data().iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        } else {
            let (h, w) = (1 + rng.below(16), 1 + rng.below(16));
            let x = random_tensor(&mut rng, &[h, w]);
            let got = dct(&x).unwrap().coefficients;
            let want = naive_dct2(x.data(), h, w);
            got.data().iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        };
        worst = worst.max(t);
    }
    ensure(worst <= DCT_ORACLE_TOL, format!("oracle deviation {worst:e}"))?;

    let mut worst_rt = 0.0f64;
    let mut worst_pars = 0.0f64;
    for shape in [
        vec![1],
        vec![7],
        vec![33],
        vec![1000],
        vec![4096],
        vec![1, 1],
        vec![3, 5],
        vec![31, 64],
        vec![100, 37],
        vec![255, 256],
        vec![512, 512],
    ] {
        let x = random_tensor(&mut rng, &shape);
        let c = dct(&x).unwrap();
        let back = idct(&c).unwrap();
        worst_rt = worst_rt.max(back.max_abs_diff(&x).unwrap());
        let ex: f64 = x.data().iter().map(|v| v * v).sum();
        let ec: f64 = c.coefficients.data().iter().map(|v| v * v).sum();
        worst_pars = worst_pars.max((ex - ec).abs() / ex);
    }
    ensure(worst_rt <= DCT_ROUND_TRIP_TOL, format!("round trip deviation {worst_rt:e}"))?;
    ensure(worst_pars <= PARSEVAL_TOL, format!("relative Parseval deviation {worst_pars:e}"))?;
    Ok(format!(
        "oracle max dev {worst:.1e}, round trip {worst_rt:.1e} (to 512x512), Parseval rel {worst_pars:.1e}"
    ))
}

fn scale_invariance() -> Check {
    let mut rng = seeded_rng(Seed(202));
    let p = BilateralParams::default();
    for case in 0..100 {
        let shape = [1 + rng.below(6), 2 + rng.below(14), 2 + rng.below(14)];
        let a = random_tensor(&mut rng, &shape);
        let (oh, ow) = (1 + rng.below(40), 1 + rng.below(40));
        let base = signature_activation_map(&ActivationStack::new(a.clone()).unwrap(), oh, ow, &p).unwrap();
        for alpha in [0.5, 3.7, 1e6] {
            let scaled = ActivationStack::new(a.scale(alpha).unwrap()).unwrap();
            let m = signature_activation_map(&scaled, oh, ow, &p).unwrap();
            ensure(
                m.values().bitwise_eq(base.values()),
                format!("case {case} shape {shape:?} alpha {alpha} differs"),
            )?;
        }
    }
    Ok("100 stacks x 3 scales bitwise equal".into())
}

fn pipeline_oracle() -> Check {
    let mut rng = seeded_rng(Seed(303));
    let p = BilateralParams::default();
    let sizes = [(8, 8), (16, 16), (13, 21), (5, 3), (32, 24)];
    let mut worst = 0.0f64;
    for case in 0..50 {
        let a = random_tensor(&mut rng, &[4, 8, 8]);
        let (oh, ow) = sizes[case % sizes.len()];
        let got = signature_activation_map(&ActivationStack::new(a.clone()).unwrap(), oh, ow, &p).unwrap();
        let want = signature_map_oracle(a.data(), 4, 8, 8, oh, ow);
        let dev = got.values().data().iter().zip(&want).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        worst = worst.max(dev);
    }
    ensure(worst <= PIPELINE_TOL, format!("max deviation {worst:e}"))?;
    Ok(format!("50 stacks 4x8x8, max deviation {worst:.1e}"))
}

fn theorem_bound() -> Check {
    let spec = SparseMixSpec::new(1024, 20, 170, Seed(7));
    ensure(spec.is_in_theorem(), "spec outside the theorem regime")?;
    let est = estimate_bound(&spec, 1000).map_err(|e| e.to_string())?;
    let lower = est.mean - 3.0 * est.stderr;
    let detail = format!("mean {:.4}, stderr {:.4}, mean-3se {:.4}", est.mean, est.stderr, lower);
    ensure(est.mean >= THEOREM_MEAN_MIN && lower >= THEOREM_LOWER_MIN, detail.clone())?;
    Ok(detail)
}

fn background_suppression() -> Check {
    let mut ratios = Vec::new();
    for i in 0..50 {
        let spec = SparseMixSpec::image(64, 64, 40, 64 * 64 / 6, Seed(404).derive(i));
        let mix = sample_mixture::<f64>(&spec).map_err(|e| e.to_string())?;
        let energy = suppress_background(&mix.signal).map_err(|e| e.to_string())?;
        ratios.push(support_energy_ratio(&energy, &mix.support).map_err(|e| e.to_string())?);
    }
    let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let detail = format!("on/off support energy: min {min:.1}, mean {mean:.1} over 50 images");
    ensure(min >= SUPPRESSION_RATIO_MIN, detail.clone())?;
    Ok(detail)
}

fn wsol_harness() -> Check {
    let b = |x0, y0, x1, y1| BBox::new(x0, y0, x1, y1).unwrap();
    ensure(iou(&b(3, 4, 9, 9), &b(3, 4, 9, 9)) == 1.0, "identical boxes")?;
    ensure(iou(&b(0, 0, 4, 4), &b(5, 0, 9, 4)) == 0.0, "disjoint boxes")?;
    let v = iou(&b(0, 0, 9, 9), &b(5, 5, 14, 14));
    ensure((v - 25.0 / 175.0).abs() <= IOU_TOL, format!("25/175 case gave {v}"))?;
    ensure((v - 0.142857).abs() < 1e-6, "25/175 printed value")?;
    // two targets; prediction 1 matches exactly (IoU 1), prediction 2 is a
    // 10x10 box shifted by 5 in x: 50 / 150 = 1/3
    let gt = [b(0, 0, 9, 9), b(30, 30, 39, 39)];
    let pred = [b(0, 0, 9, 9), b(35, 30, 44, 39)];
    let m = match_and_score(&pred, &gt);
    ensure(!m.positive && m.ious[0] == 1.0 && (m.ious[1] - 1.0 / 3.0).abs() <= IOU_TOL, "4-box case")?;
    ensure(match_and_score(&gt, &gt).positive, "exact prediction must be positive")?;
    ensure(!match_and_score(&[], &gt).positive, "empty prediction must be negative")?;

    let exact = evaluate(synthetic_suite(SuiteKind::Exact, 10, 64, 64, Seed(505)).unwrap(), Connectivity::Eight)
        .map_err(|e| e.to_string())?;
    ensure(exact.error_rate == 0.0, format!("exact suite error rate {}", exact.error_rate))?;
    let noise = evaluate(synthetic_suite(SuiteKind::Noise, 10, 64, 64, Seed(505)).unwrap(), Connectivity::Eight)
        .map_err(|e| e.to_string())?;
    ensure(
        noise.error_rate >= NOISE_ERROR_MIN,
        format!("noise suite error rate {}", noise.error_rate),
    )?;
    Ok(format!(
        "IoU hand cases exact, exact suite error {}, noise suite error {}",
        exact.error_rate, noise.error_rate
    ))
}

fn sanity_harness() -> Check {
    let model = reference_model::<f64>(Seed(606)).unwrap();
    let mut rng = seeded_rng(Seed(607));
    let img = Tensor::from_fn2(32, 32, |_, _| rng.uniform()).unwrap();
    let p = BilateralParams::default();
    let original = tap_map(&model, &img, REFERENCE_TAP, &p).unwrap();

    let head = randomize_layer(&model, "fc", Seed(1)).unwrap();
    ensure(
        tap_map(&head, &img, REFERENCE_TAP, &p).unwrap().values().bitwise_eq(original.values()),
        "randomizing the dense head changed the map",
    )?;
    let tap = randomize_layer(&model, REFERENCE_TAP, Seed(1)).unwrap();
    let diff = tap_map(&tap, &img, REFERENCE_TAP, &p).unwrap().values().max_abs_diff(original.values()).unwrap();
    ensure(diff > SANITY_DIFF_MIN, format!("tap randomization max_abs_diff {diff:e}"))?;

    let mut stages = 0;
    for mode in [RandomizationMode::Cascading, RandomizationMode::Independent] {
        let a = run_sanity(&model, &img, REFERENCE_TAP, mode, Seed(9), &p).unwrap();
        let b = run_sanity(&model, &img, REFERENCE_TAP, mode, Seed(9), &p).unwrap();
        ensure(a == b, format!("{mode:?} runs differ"))?;
        for s in &a.stages {
            if !s.upstream {
                ensure(s.map.values().bitwise_eq(original.values()), format!("{mode:?} stage {} moved", s.layer))?;
            } else {
                ensure(s.max_abs_diff > SANITY_DIFF_MIN, format!("{mode:?} stage {} unchanged", s.layer))?;
            }
            stages += 1;
        }
        let (da, db) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        write_run(da.path(), &a).unwrap();
        write_run(db.path(), &b).unwrap();
        for entry in fs::read_dir(da.path()).unwrap() {
            let name = entry.unwrap().file_name();
            let (x, y) = (fs::read(da.path().join(&name)).unwrap(), fs::read(db.path().join(&name)).unwrap());
            ensure(x == y, format!("{mode:?} output {name:?} differs between runs"))?;
        }
    }
    Ok(format!("downstream bitwise, tap diff {diff:.3}, {stages} stages reproducible byte for byte"))
}

fn micronet_oracles() -> Check {
    let mut rng = seeded_rng(Seed(808));
    let mut worst = 0.0f64;
    for case in 0..40 {
        let (c, h, w) = (1 + rng.below(3), 3 + rng.below(10), 3 + rng.below(10));
        let (oc, kh, kw) = (1 + rng.below(4), 1 + rng.below(3.min(h)), 1 + rng.below(3.min(w)));
        let stride = 1 + rng.below(2);
        let same = case % 2 == 0;
        let x = random_tensor(&mut rng, &[c, h, w]);
        let wts = LayerWeights {
            kernel: random_tensor(&mut rng, &[oc, c, kh, kw]),
            bias: random_tensor(&mut rng, &[oc]),
        };
        let pad = if same { Padding::Same } else { Padding::Valid };
        let got = conv2d(&x, &wts, stride, pad).unwrap();
        let want = conv_oracle(&x, &wts.kernel, &wts.bias, stride, same);
        ensure(got.shape() == want.shape(), format!("conv shape {:?} vs {:?}", got.shape(), want.shape()))?;
        worst = worst.max(got.max_abs_diff(&want).unwrap());

        let (nin, nout) = (1 + rng.below(30), 1 + rng.below(6));
        let v = random_tensor(&mut rng, &[nin]);
        let dw = LayerWeights {
            kernel: random_tensor(&mut rng, &[nout, nin]),
            bias: random_tensor(&mut rng, &[nout]),
        };
        let got = dense(&v, &dw).unwrap();
        for o in 0..nout {
            let want: f64 = dw.bias.data()[o] + (0..nin).map(|i| dw.kernel.data()[o * nin + i] * v.data()[i]).sum::<f64>();
            worst = worst.max((got.data()[o] - want).abs());
        }

        let len = 2 + rng.below(8);
        let logits = random_tensor(&mut rng, &[len]).scale(5.0).unwrap();
        let z: f64 = logits.data().iter().map(|l| l.exp()).sum();
        let got = softmax(&logits).unwrap();
        for (g, l) in got.data().iter().zip(logits.data()) {
            worst = worst.max((g - l.exp() / z).abs());
        }
    }
    ensure(worst <= LAYER_ORACLE_TOL, format!("layer oracle deviation {worst:e}"))?;

    let model = reference_model::<f64>(Seed(809)).unwrap();
    let mut worst_sum = 0.0f64;
    for _ in 0..20 {
        let img = Tensor::from_fn2(32, 32, |_, _| rng.uniform()).unwrap();
        let probs = forward(&model, &img).unwrap().probabilities;
        worst_sum = worst_sum.max((probs.data().iter().sum::<f64>() - 1.0).abs());
    }
    ensure(worst_sum <= PROB_SUM_TOL, format!("probability sum off by {worst_sum:e}"))?;
    Ok(format!("conv/dense/softmax max dev {worst:.1e}, probability sum dev {worst_sum:.1e}"))
}

fn main() -> ExitCode {
    let criteria: [(&str, Duration, fn() -> Check); 8] = [
        ("dct_correctness", Duration::from_secs(10), dct_correctness),
        ("signature_scale_invariance", Duration::from_secs(30), scale_invariance),
        ("pipeline_oracle_equivalence", Duration::from_secs(60), pipeline_oracle),
        ("theorem_bound", Duration::from_secs(10), theorem_bound),
        ("background_suppression", Duration::from_secs(60), background_suppression),
        ("wsol_harness", Duration::from_secs(60), wsol_harness),
        ("sanity_harness", Duration::from_secs(60), sanity_harness),
        ("micronet_oracles", Duration::from_secs(60), micronet_oracles),
    ];
    let mut failures = 0;
    for (name, budget, check) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(d) if elapsed > budget => Err(format!("{d}; took {elapsed:.2?}, budget {budget:?}")),
            o => o,
        };
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail} [{elapsed:.2?}]"),
            Err(detail) => {
                failures += 1;
                println!("FAIL {name}: {detail} [{elapsed:.2?}]");
            }
        }
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

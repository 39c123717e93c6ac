//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits nonzero if a gating criterion fails.
//!
//! Criterion 9 needs the full handwritten-character dataset. Point
//! `DHCD_DIR` at it (either `Train/` and `Test/` class trees or a single
//! class tree) to run it; the result is reported, never gating.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use dcnn::layers::{
    conv_backward, conv_forward, dense_backward, dense_forward, maxpool_backward, maxpool_forward, relu_backward,
    relu_forward, softmax, softmax_backward,
};
use dcnn::model::default_class_names;
use dcnn::synthetic::{glyph_dataset, write_glyph_tree};
use dcnn::train::softmax_cross_entropy_grad;
use dcnn::{
    assemble_reference_model, conv_output_shape, conv_param_count, cross_entropy_loss, dense_param_count, evaluate,
    load_dataset, load_model, pool_output_shape, preprocess, save_model, split_dataset, split_indices, train,
    Architecture, Conv2DSpec, DenseSpec, LabeledExample, LabeledExample32, LayerParams, LayerSpec, Model32, PoolSpec,
    Shape, Tensor, Tensor64, TrainConfig,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = Result<String, String>;

/// Number, name, whether it gates the run, and the check itself.
type Criterion = (u32, &'static str, bool, fn() -> Verdict);

fn ensure(ok: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(message())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:.2?}, limit {limit:?}"))
}

/// Number of stride-aligned windows of extent `f` that fit in `n`.
fn windows(n: usize, f: usize, s: usize) -> usize {
    let mut count = 0;
    let mut start = 0;
    while start + f <= n {
        count += 1;
        start += s;
    }
    count
}

fn shape_formulas() -> Verdict {
    let t = Instant::now();
    let mut cases = 0;
    for h in 1..=12 {
        for w in 1..=12 {
            for f in 1..=5 {
                for s in 1..=3 {
                    for p in 0..=2 {
                        let got = conv_output_shape(h, w, 2, f, p, s, 4);
                        if h + 2 * p < f || w + 2 * p < f {
                            ensure(got.is_err(), || format!("conv h={h} w={w} f={f} p={p}: accepted"))?;
                        } else {
                            let want = [windows(h + 2 * p, f, s), windows(w + 2 * p, f, s), 4];
                            let got = got.map_err(|e| e.to_string())?;
                            ensure(got.dims() == want, || {
                                format!("conv {h}×{w} f={f} p={p} s={s}: {got} vs {want:?}")
                            })?;
                        }
                        cases += 1;
                    }
                    let got = pool_output_shape(w, h, 3, f, s);
                    if h < f || w < f {
                        ensure(got.is_err(), || format!("pool {w}×{h} extent {f}: accepted"))?;
                    } else {
                        let want = [windows(h, f, s), windows(w, f, s), 3];
                        let got = got.map_err(|e| e.to_string())?;
                        ensure(got.dims() == want, || {
                            format!("pool {w}×{h} se={f} sd={s}: {got} vs {want:?}")
                        })?;
                    }
                    cases += 1;
                }
            }
        }
    }
    within(t.elapsed(), Duration::from_secs(1))?;
    Ok(format!("{cases} cases equal window enumeration"))
}

fn parameter_counts() -> Verdict {
    let t = Instant::now();
    ensure(conv_param_count(&Conv2DSpec::new(6, 5, 1)) == 156, || {
        "C1 count is not 156".into()
    })?;
    let big = dense_param_count(&DenseSpec::new(3072, 4704), false);
    ensure(big == 14_450_688, || format!("3072×4704 dense has {big} weights"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for i in 0..100 {
        let (count, scalars) = if i % 2 == 0 {
            let mut spec = Conv2DSpec::new(rng.random_range(1..20), rng.random_range(1..8), rng.random_range(1..10));
            if i % 4 == 0 {
                // Every filter keeps at least one channel.
                let table = (0..spec.filters)
                    .map(|o| {
                        (0..spec.in_channels)
                            .map(|c| c == o % spec.in_channels || rng.random_bool(0.6))
                            .collect()
                    })
                    .collect();
                spec.connectivity = Some(table);
            }
            let p = spec.init_params::<f32, _>(&mut rng).map_err(|e| e.to_string())?;
            // Masked weights are stored as zeros and do not count.
            let live = (0..spec.filters)
                .flat_map(|o| (0..spec.in_channels).map(move |c| (o, c)))
                .filter(|&(o, c)| spec.connected(o, c))
                .count()
                * spec.kernel
                * spec.kernel;
            (conv_param_count(&spec), live + p.biases.len())
        } else {
            let spec = DenseSpec::new(rng.random_range(1..500), rng.random_range(1..200));
            let p = spec.init_params::<f32, _>(&mut rng).map_err(|e| e.to_string())?;
            (dense_param_count(&spec, true), p.weights.len() + p.biases.len())
        };
        ensure(count == scalars, || {
            format!("spec {i}: formula {count}, instantiated {scalars}")
        })?;
    }
    within(t.elapsed(), Duration::from_secs(1))?;
    Ok("156, 14,450,688 and 100 random specs exact".into())
}

const STEP: f64 = 1e-5;

/// Largest relative error between `analytic` and central differences of `f`.
fn worst_error(x: &[f64], analytic: &[f64], f: &dyn Fn(&[f64]) -> f64) -> f64 {
    let mut probe = x.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        probe[i] = x[i] + STEP;
        let up = f(&probe);
        probe[i] = x[i] - STEP;
        let down = f(&probe);
        probe[i] = x[i];
        let numeric = (up - down) / (2.0 * STEP);
        let scale = analytic[i].abs().max(numeric.abs());
        let err = (analytic[i] - numeric).abs() / if scale < 1e-7 { 1.0 } else { scale };
        worst = worst.max(err);
    }
    worst
}

fn random(dims: &[usize], rng: &mut ChaCha8Rng) -> Tensor64 {
    let n = dims.iter().product();
    Tensor64::from_vec(dims, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn like(t: &Tensor64, x: &[f64]) -> Tensor64 {
    Tensor64::from_vec(t.dims(), x.to_vec()).unwrap()
}

fn dot(a: &Tensor64, b: &Tensor64) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

fn with_weights(p: &LayerParams<f64>, x: &[f64]) -> LayerParams<f64> {
    LayerParams {
        weights: like(&p.weights, x),
        biases: p.biases.clone(),
    }
}

fn with_biases(p: &LayerParams<f64>, x: &[f64]) -> LayerParams<f64> {
    LayerParams {
        weights: p.weights.clone(),
        biases: like(&p.biases, x),
    }
}

fn distinct(dims: &[usize], rng: &mut ChaCha8Rng) -> Tensor64 {
    let n: usize = dims.iter().product();
    let mut v: Vec<f64> = (0..n).map(|i| 0.01 * i as f64 - 0.005 * n as f64).collect();
    v.shuffle(rng);
    Tensor64::from_vec(dims, v).unwrap()
}

fn gradients() -> Verdict {
    let t = Instant::now();
    let mut worst: Vec<(&str, f64)> = Vec::new();
    let mut record = |name: &'static str, e: f64| match worst.iter_mut().find(|(n, _)| *n == name) {
        Some(slot) => slot.1 = slot.1.max(e),
        None => worst.push((name, e)),
    };
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);

        let c = rng.random_range(1..4);
        let mut spec = Conv2DSpec::new(rng.random_range(1..4), rng.random_range(1..4), c);
        spec.stride = rng.random_range(1..3);
        spec.padding = rng.random_range(0..2);
        let p = spec.init_params::<f64, _>(&mut rng).unwrap();
        let x = random(
            &[rng.random_range(spec.kernel..8), rng.random_range(spec.kernel..8), c],
            &mut rng,
        );
        let r = random(conv_forward(&x, &spec, &p).unwrap().dims(), &mut rng);
        let g = conv_backward(&r, &x, &spec, &p).unwrap();
        let fwd = |x: &Tensor64, p: &LayerParams<f64>| dot(&conv_forward(x, &spec, p).unwrap(), &r);
        record(
            "conv",
            worst_error(x.data(), g.input.unwrap().data(), &|v| fwd(&like(&x, v), &p)),
        );
        record(
            "conv",
            worst_error(p.weights.data(), g.weights.data(), &|v| fwd(&x, &with_weights(&p, v))),
        );
        record(
            "conv",
            worst_error(p.biases.data(), g.biases.data(), &|v| fwd(&x, &with_biases(&p, v))),
        );

        let mut x = random(&[4, 4, 3], &mut rng);
        x.data_mut().iter_mut().for_each(|v| {
            if v.abs() <= 1e-3 {
                *v = 0.5
            }
        });
        let r = random(x.dims(), &mut rng);
        let g = relu_backward(&r, &x).unwrap();
        record(
            "relu",
            worst_error(x.data(), g.data(), &|v| dot(&relu_forward(&like(&x, v)), &r)),
        );

        let spec = PoolSpec {
            trainable_affine: seed % 2 == 1,
            ..PoolSpec::new(2, 2)
        };
        let ch = rng.random_range(1..4);
        let x = distinct(&[6, 6, ch], &mut rng);
        let p = spec.init_params::<f64>(ch).unwrap().map(|p| LayerParams {
            weights: p.weights.map(|_| 0.5 + 0.1 * seed as f64),
            biases: p.biases.map(|_| 0.1),
        });
        let (out, cache) = maxpool_forward(&x, &spec, p.as_ref()).unwrap();
        let r = random(out.dims(), &mut rng);
        let g = maxpool_backward(&r, &cache, &spec, p.as_ref()).unwrap();
        let fwd = |x: &Tensor64, p: Option<&LayerParams<f64>>| dot(&maxpool_forward(x, &spec, p).unwrap().0, &r);
        record(
            "maxpool",
            worst_error(x.data(), g.input.data(), &|v| fwd(&like(&x, v), p.as_ref())),
        );
        if let (Some(p), Some(gp)) = (&p, &g.params) {
            record(
                "maxpool",
                worst_error(p.weights.data(), gp.weights.data(), &|v| {
                    fwd(&x, Some(&with_weights(p, v)))
                }),
            );
            record(
                "maxpool",
                worst_error(p.biases.data(), gp.biases.data(), &|v| {
                    fwd(&x, Some(&with_biases(p, v)))
                }),
            );
        }

        let spec = DenseSpec::new(rng.random_range(1..10), rng.random_range(1..6));
        let p = spec.init_params::<f64, _>(&mut rng).unwrap();
        let x = random(&[spec.in_features], &mut rng);
        let r = random(&[spec.out_features], &mut rng);
        let g = dense_backward(&r, &x, &spec, &p).unwrap();
        let fwd = |x: &Tensor64, p: &LayerParams<f64>| dot(&dense_forward(x, &spec, p).unwrap(), &r);
        record(
            "dense",
            worst_error(x.data(), g.input.data(), &|v| fwd(&like(&x, v), &p)),
        );
        record(
            "dense",
            worst_error(p.weights.data(), g.weights.data(), &|v| fwd(&x, &with_weights(&p, v))),
        );
        record(
            "dense",
            worst_error(p.biases.data(), g.biases.data(), &|v| fwd(&x, &with_biases(&p, v))),
        );

        let z = random(&[rng.random_range(2..10)], &mut rng).map(|v| 3.0 * v);
        let r = random(z.dims(), &mut rng);
        let g = softmax_backward(&r, &softmax(&z).unwrap()).unwrap();
        record(
            "softmax",
            worst_error(z.data(), g.data(), &|v| dot(&softmax(&like(&z, v)).unwrap(), &r)),
        );
        let k = rng.random_range(0..z.len());
        let g = softmax_cross_entropy_grad(&softmax(&z).unwrap(), k).unwrap();
        record(
            "softmax+ce",
            worst_error(z.data(), g.data(), &|v| {
                cross_entropy_loss(&softmax(&like(&z, v)).unwrap(), k).unwrap()
            }),
        );
    }
    let summary = worst
        .iter()
        .map(|(n, e)| format!("{n} {e:.1e}"))
        .collect::<Vec<_>>()
        .join(", ");
    for (name, e) in &worst {
        ensure(*e <= 1e-4, || format!("{name} relative error {e:e} > 1e-4"))?;
    }
    within(t.elapsed(), Duration::from_secs(30))?;
    Ok(format!("20 instances per layer, worst relative errors: {summary}"))
}

fn sliding_window(x: &Tensor64, spec: &Conv2DSpec, p: &LayerParams<f64>) -> Vec<f64> {
    let &[h, w, c] = x.dims() else { unreachable!() };
    let (f, s, pad) = (spec.kernel, spec.stride, spec.padding as isize);
    let at = |r: isize, q: isize, ch: usize| {
        if r < 0 || q < 0 || r >= h as isize || q >= w as isize {
            0.0
        } else {
            x.get(&[r as usize, q as usize, ch]).unwrap()
        }
    };
    let mut out = Vec::new();
    for i in 0..windows(h + 2 * spec.padding, f, s) {
        for j in 0..windows(w + 2 * spec.padding, f, s) {
            for o in 0..spec.filters {
                let mut acc = p.biases.get(&[o]).unwrap();
                for a in 0..f {
                    for b in 0..f {
                        for ch in 0..c {
                            let (r, q) = ((i * s + a) as isize - pad, (j * s + b) as isize - pad);
                            acc += at(r, q, ch) * p.weights.get(&[o, a, b, ch]).unwrap();
                        }
                    }
                }
                out.push(acc);
            }
        }
    }
    out
}

fn convolution_oracle() -> Verdict {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for case in 0..200 {
        let c = rng.random_range(1..=3);
        let mut spec = Conv2DSpec::new(rng.random_range(1..6), rng.random_range(1..6), c);
        spec.stride = rng.random_range(1..4);
        spec.padding = rng.random_range(0..3);
        let lo = spec.kernel.saturating_sub(2 * spec.padding).max(1);
        let (h, w) = (rng.random_range(lo..=12), rng.random_range(lo..=12));
        let mut p = spec.init_params::<f64, _>(&mut rng).unwrap();
        p.biases = p.biases.map(|_| 0.3);
        let x = random(&[h, w, c], &mut rng);
        let want = sliding_window(&x, &spec, &p);
        let got = conv_forward(&x, &spec, &p).map_err(|e| e.to_string())?;
        let got32 = conv_forward(
            &x.cast::<f32>(),
            &spec,
            &LayerParams {
                weights: p.weights.cast(),
                biases: p.biases.cast(),
            },
        )
        .map_err(|e| e.to_string())?;
        ensure(got.len() == want.len(), || {
            format!("case {case}: {} outputs, oracle {}", got.len(), want.len())
        })?;
        for ((&a, &b), &e) in got.data().iter().zip(got32.data()).zip(&want) {
            let scale = e.abs().max(1.0);
            worst = worst.max((a - e).abs() / scale).max((b as f64 - e).abs() / scale);
        }
    }
    ensure(worst <= 1e-5, || format!("worst relative difference {worst:e}"))?;
    within(t.elapsed(), Duration::from_secs(5))?;
    Ok(format!(
        "200 cases, worst relative difference {worst:.1e} (f64 and f32)"
    ))
}

/// Flatten → dense → softmax on 32×32 images; a bright pixel at `spots[k]`
/// makes class k win.
fn dot_model(spots: &[usize]) -> Model32 {
    let specs = vec![
        LayerSpec::Flatten,
        LayerSpec::Dense(DenseSpec::new(1024, spots.len())),
        LayerSpec::Softmax,
    ];
    let mut m = Model32::new(
        Shape::new(&[32, 32, 1]).unwrap(),
        default_class_names(spots.len()),
        specs,
        0,
    )
    .unwrap();
    let p = m.params_mut().next().unwrap();
    p.weights.data_mut().fill(0.0);
    p.biases.data_mut().fill(0.0);
    for (k, &at) in spots.iter().enumerate() {
        p.weights.data_mut()[k * 1024 + at] = 10.0;
    }
    m
}

fn metrics() -> Verdict {
    let spots = [100, 500, 900];
    let example = |spot: usize, class_index: usize| {
        let mut data = vec![0.0f32; 1024];
        data[spots[spot]] = 1.0;
        LabeledExample32 {
            image: Tensor::from_vec(&[32, 32, 1], data).unwrap(),
            class_index,
        }
    };
    // True 0, 0, 1, 2 predicted as 0, 1, 1, 2.
    let set = [example(0, 0), example(1, 0), example(1, 1), example(2, 2)];
    let r = evaluate(&dot_model(&spots), &set).map_err(|e| e.to_string())?;
    ensure(r.accuracy == 0.75, || format!("accuracy {}", r.accuracy))?;
    let third = 2.5 / 3.0;
    ensure((r.macro_precision - third).abs() < 1e-15, || {
        format!("macro precision {}", r.macro_precision)
    })?;
    ensure((r.macro_recall - third).abs() < 1e-15, || {
        format!("macro recall {}", r.macro_recall)
    })?;
    ensure(r.confusion.row(0) == [1, 1, 0], || {
        format!("confusion row 0 {:?}", r.confusion.row(0))
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_sum: f64 = 0.0;
    for _ in 0..1000 {
        let z = random(&[rng.random_range(1..50)], &mut rng).map(|v| 20.0 * v);
        let p = softmax(&z).map_err(|e| e.to_string())?;
        worst_sum = worst_sum.max((p.data().iter().sum::<f64>() - 1.0).abs());
    }
    ensure(worst_sum <= 1e-9, || format!("softmax sums off by {worst_sum:e}"))?;

    let uniform = Tensor64::new(Shape::new(&[36]).unwrap(), 1.0 / 36.0).unwrap();
    let ce = cross_entropy_loss(&uniform, 7).map_err(|e| e.to_string())?;
    let mut blank = assemble_reference_model::<f64>(0);
    for p in blank.params_mut() {
        p.weights.data_mut().fill(0.0);
    }
    let image = Tensor64::zeros(&[32, 32, 1]).unwrap();
    let via_model = evaluate(&blank, &[LabeledExample { image, class_index: 3 }])
        .map_err(|e| e.to_string())?
        .loss;
    let ln36 = 36f64.ln();
    ensure((ce - ln36).abs() <= 1e-9 && (via_model - ln36).abs() <= 1e-9, || {
        format!("uniform cross-entropy {ce} / {via_model}, expected {ln36}")
    })?;
    Ok(format!(
        "accuracy 0.75, macro P/R {third:.6}, softmax sum within {worst_sum:.0e}, uniform CE = ln 36"
    ))
}

fn split() -> Verdict {
    let t = Instant::now();
    let labels: Vec<usize> = (0..36).flat_map(|c| std::iter::repeat_n(c, 1700)).collect();
    let (train_idx, test_idx) = split_indices(&labels, 36, 0.8, 0, true).map_err(|e| e.to_string())?;
    ensure(train_idx.len() == 48_960 && test_idx.len() == 12_240, || {
        format!("{} / {}", train_idx.len(), test_idx.len())
    })?;
    let examples: Vec<LabeledExample32> = labels
        .iter()
        .enumerate()
        .map(|(i, &c)| LabeledExample {
            image: Tensor::from_vec(&[1], vec![i as f32]).unwrap(),
            class_index: c,
        })
        .collect();
    let s = split_dataset(examples, default_class_names(36), 0.8, 0, true).map_err(|e| e.to_string())?;
    for class in 0..36 {
        let train = s.train.iter().filter(|e| e.class_index == class).count();
        let test = s.test.iter().filter(|e| e.class_index == class).count();
        ensure((train, test) == (1360, 340), || {
            format!("class {class}: {train} / {test}")
        })?;
    }
    let mut seen: Vec<f32> = s.train.iter().chain(&s.test).map(|e| e.image.data()[0]).collect();
    seen.sort_by(f32::total_cmp);
    ensure(seen.iter().enumerate().all(|(i, &v)| v == i as f32), || {
        "split lost or duplicated examples".into()
    })?;
    within(t.elapsed(), Duration::from_secs(5))?;
    Ok("48,960 / 12,240, every class 1360 / 340".into())
}

/// Nearest class mean in pixel space.
fn nearest_centroid(train_set: &[LabeledExample32], test_set: &[LabeledExample32], classes: usize) -> f64 {
    let dim = train_set[0].image.len();
    let mut sums = vec![vec![0.0f64; dim]; classes];
    let mut counts = vec![0usize; classes];
    for e in train_set {
        counts[e.class_index] += 1;
        for (s, &v) in sums[e.class_index].iter_mut().zip(e.image.data()) {
            *s += v as f64;
        }
    }
    let centroids: Vec<Vec<f64>> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &n)| s.iter().map(|v| v / n as f64).collect())
        .collect();
    let correct = test_set
        .iter()
        .filter(|e| {
            let distance =
                |c: &Vec<f64>| -> f64 { c.iter().zip(e.image.data()).map(|(a, &b)| (a - b as f64).powi(2)).sum() };
            let best = (0..classes).min_by(|&a, &b| distance(&centroids[a]).total_cmp(&distance(&centroids[b])));
            best == Some(e.class_index)
        })
        .count();
    correct as f64 / test_set.len() as f64
}

fn synthetic_training() -> Verdict {
    let t = Instant::now();
    let classes = 10;
    let examples: Vec<LabeledExample32> = glyph_dataset(classes, 200, 7)
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|(img, class_index)| {
            Ok(LabeledExample {
                image: preprocess(&img, false)?,
                class_index,
            })
        })
        .collect::<dcnn::Result<_>>()
        .map_err(|e| e.to_string())?;
    let s = split_dataset(examples, default_class_names(classes), 0.8, 0, true).map_err(|e| e.to_string())?;

    let baseline = nearest_centroid(&s.train, &s.test, classes);
    ensure(baseline >= 0.8, || {
        format!("nearest-centroid baseline {baseline:.3} < 0.8; dataset not separable enough")
    })?;

    let model =
        Model32::from_architecture(&Architecture::default(), s.class_names.clone(), 0).map_err(|e| e.to_string())?;
    let config = TrainConfig {
        epochs: 10,
        ..TrainConfig::default()
    };
    let (_, log) = train(model, &s.train, &s.test, &config).map_err(|e| e.to_string())?;
    let losses: Vec<f64> = log.iter().map(|r| r.train_loss).collect();
    let test_acc = log.last().unwrap().test_acc;
    let shown = losses[..5]
        .iter()
        .map(|l| format!("{l:.4}"))
        .collect::<Vec<_>>()
        .join(" > ");
    ensure(losses[..5].windows(2).all(|w| w[1] < w[0]), || {
        format!("train loss not strictly decreasing: {losses:?}")
    })?;
    ensure(test_acc >= 0.95, || format!("test accuracy {test_acc:.4} < 0.95"))?;
    within(t.elapsed(), Duration::from_secs(300))?;
    Ok(format!(
        "test accuracy {test_acc:.4}, baseline {baseline:.3}, loss {shown}, {:.1?}",
        t.elapsed()
    ))
}

fn cli(args: &[&str]) -> Result<(), String> {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = dcnn_cli::run(std::iter::once("dcnn").chain(args.iter().copied()), &mut out, &mut err);
    ensure(code == 0, || {
        format!(
            "dcnn {} exited {code}: {}",
            args.join(" "),
            String::from_utf8_lossy(&err)
        )
    })
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = dir.path().join("glyphs");
    write_glyph_tree(&data, 4, 20, 3).map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for run in ["first", "second"] {
        let model = dir.path().join(format!("{run}.dcnn"));
        let log = dir.path().join(format!("{run}.csv"));
        let p = |p: &Path| p.to_str().unwrap().to_string();
        let (d, m, l) = (p(&data), p(&model), p(&log));
        cli(&[
            "train", "--data", &d, "--out", &m, "--log", &l, "--epochs", "3", "--batch", "8", "--seed", "42",
        ])?;
        outputs.push((std::fs::read(&model).unwrap(), std::fs::read(&log).unwrap()));
    }
    ensure(outputs[0].0 == outputs[1].0, || "model files differ".into())?;
    ensure(outputs[0].1 == outputs[1].1, || "CSV logs differ".into())?;
    Ok(format!(
        "model files ({} bytes) and CSV logs byte-identical",
        outputs[0].0.len()
    ))
}

fn roundtrip() -> Verdict {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let examples: Vec<LabeledExample32> = glyph_dataset(6, 10, 11)
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|(img, c)| LabeledExample {
            image: preprocess(&img, false).unwrap(),
            class_index: c,
        })
        .collect();
    let model =
        Model32::from_architecture(&Architecture::default(), default_class_names(6), 1).map_err(|e| e.to_string())?;
    let config = TrainConfig {
        epochs: 2,
        batch_size: 8,
        ..TrainConfig::default()
    };
    let (trained, _) = train(model, &examples, &examples, &config).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let noise: Vec<LabeledExample32> = (0..30)
        .map(|i| LabeledExample {
            image: Tensor::from_vec(&[32, 32, 1], (0..1024).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap(),
            class_index: i % 6,
        })
        .collect();

    let mut checked = 0;
    for (name, m) in [
        ("trained", trained),
        (
            "fresh",
            Model32::from_architecture(&Architecture::default(), default_class_names(6), 9).unwrap(),
        ),
    ] {
        let path = dir.path().join(format!("{name}.dcnn"));
        save_model(&m, &path).map_err(|e| e.to_string())?;
        let back: Model32 = load_model(&path).map_err(|e| e.to_string())?;
        for set in [&examples, &noise] {
            let (a, b) = (evaluate(&m, set).unwrap(), evaluate(&back, set).unwrap());
            ensure(a == b && a.loss.to_bits() == b.loss.to_bits(), || {
                format!("{name} model: {a:?} vs {b:?}")
            })?;
            checked += 1;
        }
    }
    Ok(format!(
        "{checked} model/dataset pairs evaluate identically after save/load"
    ))
}

fn full_reproduction() -> Verdict {
    let Some(root) = std::env::var_os("DHCD_DIR") else {
        return Err("not run: DHCD_DIR is not set".into());
    };
    let root = Path::new(&root);
    let (train_set, test_set, names) = if root.join("Train").is_dir() && root.join("Test").is_dir() {
        let tr = load_dataset::<f32>(&root.join("Train"), true).map_err(|e| e.to_string())?;
        let te = load_dataset::<f32>(&root.join("Test"), true).map_err(|e| e.to_string())?;
        (tr.examples, te.examples, tr.class_names)
    } else {
        let ds = load_dataset::<f32>(root, true).map_err(|e| e.to_string())?;
        let s = split_dataset(ds.examples, ds.class_names, 0.8, 0, true).map_err(|e| e.to_string())?;
        (s.train, s.test, s.class_names)
    };
    let model = Model32::from_architecture(&Architecture::default(), names, 0).map_err(|e| e.to_string())?;
    let (_, log) = train(model, &train_set, &test_set, &TrainConfig::default()).map_err(|e| e.to_string())?;
    let last = log.last().unwrap();
    let summary = format!(
        "train accuracy {:.4}, test accuracy {:.4} (reference 0.9636, gap {:+.4})",
        last.train_acc,
        last.test_acc,
        last.test_acc - 0.9636
    );
    if last.test_acc >= 0.90 {
        Ok(summary)
    } else {
        Err(summary)
    }
}

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "shape formulas", true, shape_formulas),
        (2, "parameter counts", true, parameter_counts),
        (3, "gradients", true, gradients),
        (4, "convolution oracle", true, convolution_oracle),
        (5, "metrics", true, metrics),
        (6, "split", true, split),
        (7, "synthetic end-to-end training", true, synthetic_training),
        (8, "determinism", true, determinism),
        (9, "full dataset reproduction", false, full_reproduction),
        (10, "model roundtrip", true, roundtrip),
    ];
    let only: Option<u32> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (n, name, gating, check) in criteria {
        if only.is_some_and(|o| o != n) {
            continue;
        }
        let verdict = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
            Err(format!(
                "panicked: {}",
                panic.downcast_ref::<String>().map_or("?", String::as_str)
            ))
        });
        let status = match (&verdict, gating) {
            (Ok(_), _) => "PASS",
            (Err(_), true) => "FAIL",
            (Err(_), false) => "REPORT",
        };
        let detail = verdict.as_ref().unwrap_or_else(|e| e);
        println!("criterion {n:>2} {status:<6} {name}: {detail}");
        if gating && verdict.is_err() {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} gating criteria failed");
        std::process::exit(1);
    }
}

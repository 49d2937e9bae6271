use fibereq::nnequalizer::{
    adam_step, build_windows, equalize, equalize_frame, predict, train, Activation, AdamState, ArchSpec,
    Architecture, EqualizerModel, LayerSpec, Polarization, PolarizationPair, Precision, Tensor, TrainConfig,
    FEATURES,
};
use fibereq::txdsp::{prbs_generate, qam16_map, SymbolFrame};
use fibereq::{Complex64, Error};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn toy_spec(n_taps: usize) -> ArchSpec {
    ArchSpec { n_taps, filters: 2, kernel: 3, hidden: 2, mlp_units: 3, activation: Activation::LeakyRelu(0.2) }
}

fn random_batch(b: usize, m: usize, seed: u64) -> (Tensor, Tensor) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = (0..b * m * FEATURES).map(|_| rng.random_range(-1.0..1.0)).collect();
    let t = (0..b * 2).map(|_| rng.random_range(-1.0..1.0)).collect();
    (Tensor::new(vec![b, m, FEATURES], x).unwrap(), Tensor::new(vec![b, 2], t).unwrap())
}

/// Max relative error between the analytic gradient and central differences (eps = 1e-5).
fn gradient_error(model: &EqualizerModel<f64>, x: &Tensor, t: &Tensor) -> f64 {
    let g = model.backward(x, t).unwrap();
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..model.n_params() {
        let mut p = model.clone();
        p.params[i] += eps;
        let lp = p.loss(x, t).unwrap();
        p.params[i] -= 2.0 * eps;
        let lm = p.loss(x, t).unwrap();
        let fd = (lp - lm) / (2.0 * eps);
        let rel = (g[i] - fd).abs() / (g[i].abs() + fd.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    worst
}

/// Single-layer model wrapped with whatever is needed to reach a `(b, 2)` output.
fn model_around(layer: LayerSpec, n_taps: usize, seed: u64) -> EqualizerModel<f64> {
    let spec = toy_spec(n_taps);
    let m = spec.memory();
    let mut layers = vec![];
    let width = match layer {
        LayerSpec::Dense { .. } => {
            layers.push(LayerSpec::Flatten);
            layers.push(layer);
            3
        }
        LayerSpec::Conv1d { filters, .. } => {
            layers.push(layer);
            layers.push(LayerSpec::Flatten);
            m * filters
        }
        LayerSpec::Lstm { hidden, bidirectional, .. } => {
            layers.push(layer);
            layers.push(LayerSpec::Flatten);
            m * hidden * if bidirectional { 2 } else { 1 }
        }
        LayerSpec::Flatten => unreachable!(),
    };
    layers.push(LayerSpec::Dense { inputs: width, outputs: 2, activation: Activation::Linear });
    let mut model = EqualizerModel::<f64>::from_layers(Architecture::Crnn, spec, layers).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for p in model.params.iter_mut() {
        *p = rng.random_range(-0.8..0.8);
    }
    model
}

#[test]
fn dense_gradients_match_finite_differences() {
    for act in [Activation::Linear, Activation::Tanh, Activation::LeakyRelu(0.2), Activation::Relu] {
        let model = model_around(LayerSpec::Dense { inputs: 5 * FEATURES, outputs: 3, activation: act }, 2, 1);
        let (x, t) = random_batch(4, 5, 2);
        let e = gradient_error(&model, &x, &t);
        assert!(e < 1e-4, "{act}: {e}");
    }
}

#[test]
fn conv1d_gradients_match_finite_differences() {
    for kernel in [1, 3, 5] {
        let layer = LayerSpec::Conv1d { in_channels: FEATURES, filters: 2, kernel, activation: Activation::Tanh };
        let model = model_around(layer, 2, 3);
        let (x, t) = random_batch(3, 5, 4);
        let e = gradient_error(&model, &x, &t);
        assert!(e < 1e-4, "kernel {kernel}: {e}");
    }
}

#[test]
fn lstm_gradients_match_finite_differences() {
    for bidirectional in [false, true] {
        let model = model_around(LayerSpec::Lstm { inputs: FEATURES, hidden: 2, bidirectional }, 2, 5);
        let (x, t) = random_batch(3, 5, 6);
        let e = gradient_error(&model, &x, &t);
        assert!(e < 1e-4, "bidirectional {bidirectional}: {e}");
    }
}

#[test]
fn crnn_gradients_match_finite_differences() {
    let spec = ArchSpec { activation: Activation::Tanh, ..toy_spec(2) };
    let mut model = EqualizerModel::<f64>::new(Architecture::Crnn, &spec, 7).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for p in model.params.iter_mut() {
        *p += rng.random_range(-0.3..0.3);
    }
    let (x, t) = random_batch(4, 5, 9);
    let e = gradient_error(&model, &x, &t);
    assert!(e < 1e-4, "{e}");
}

#[test]
fn dense_identity_passes_input_through() {
    let spec = ArchSpec { n_taps: 0, ..toy_spec(0) };
    let layers = vec![
        LayerSpec::Flatten,
        LayerSpec::Dense { inputs: 4, outputs: 4, activation: Activation::Linear },
        LayerSpec::Dense { inputs: 4, outputs: 2, activation: Activation::Linear },
    ];
    let mut m = EqualizerModel::<f64>::from_layers(Architecture::Mlp, spec, layers).unwrap();
    let p = m.layer_params_mut(1);
    for i in 0..4 {
        p[i * 4 + i] = 1.0;
    }
    let p = m.layer_params_mut(2);
    p[0] = 1.0;
    p[4 + 1] = 1.0;
    let (x, _) = random_batch(3, 1, 1);
    let y = m.forward(&x).unwrap();
    for s in 0..3 {
        assert_eq!(y.data[2 * s], x.data[4 * s]);
        assert_eq!(y.data[2 * s + 1], x.data[4 * s + 1]);
    }
}

#[test]
fn conv_identity_kernel_copies_channel() {
    let spec = toy_spec(3);
    let m = spec.memory();
    let layers = vec![
        LayerSpec::Conv1d { in_channels: FEATURES, filters: 1, kernel: 3, activation: Activation::Linear },
        LayerSpec::Flatten,
        LayerSpec::Dense { inputs: m, outputs: 2, activation: Activation::Linear },
    ];
    let mut model = EqualizerModel::<f64>::from_layers(Architecture::Crnn, spec, layers).unwrap();
    // kernel [0, 1, 0] on feature channel 2, weights laid out (filter, tap, channel)
    model.layer_params_mut(0)[FEATURES + 2] = 1.0;
    // read out timesteps 0 and m-1 to check the zero-padded edges too
    model.layer_params_mut(2)[0] = 1.0;
    model.layer_params_mut(2)[m + m - 1] = 1.0;
    let (x, _) = random_batch(2, m, 3);
    let y = model.forward(&x).unwrap();
    for s in 0..2 {
        assert!((y.data[2 * s] - x.data[s * m * 4 + 2]).abs() < 1e-15);
        assert!((y.data[2 * s + 1] - x.data[s * m * 4 + (m - 1) * 4 + 2]).abs() < 1e-15);
    }
}

#[test]
fn lstm_zero_input_zero_bias_gives_zero_hidden() {
    let mut model = model_around(LayerSpec::Lstm { inputs: FEATURES, hidden: 2, bidirectional: true }, 2, 11);
    let n = model.layer_params(0).len();
    let per_dir = n / 2;
    let lstm = model.layer_params_mut(0);
    for d in 0..2 {
        let bias = &mut lstm[d * per_dir + per_dir - 8..(d + 1) * per_dir];
        bias.fill(0.0);
    }
    model.layer_params_mut(2).iter_mut().for_each(|b| *b = 0.0);
    let mut dense = model.layer_params_mut(2).to_vec();
    dense.fill(1.0);
    let k = dense.len();
    model.layer_params_mut(2)[..k - 2].copy_from_slice(&dense[..k - 2]);
    let x = Tensor::zeros(vec![3, 5, 4]);
    let y = model.forward(&x).unwrap();
    assert!(y.data.iter().all(|&v| v == 0.0));
}

#[test]
fn zero_model_zero_targets_has_zero_gradient() {
    let model = EqualizerModel::<f64>::from_layers(
        Architecture::Crnn,
        toy_spec(2),
        toy_spec(2).layers(Architecture::Crnn),
    )
    .unwrap();
    let (x, _) = random_batch(3, 5, 1);
    let g = model.backward(&x, &Tensor::zeros(vec![3, 2])).unwrap();
    assert!(g.iter().all(|&v| v == 0.0));
}

#[test]
fn duplicated_batch_has_same_gradient() {
    let model = EqualizerModel::<f64>::new(Architecture::Crnn, &toy_spec(2), 3).unwrap();
    let (x, t) = random_batch(3, 5, 4);
    let g1 = model.backward(&x, &t).unwrap();
    let x2 = Tensor::new(vec![6, 5, 4], [x.data.clone(), x.data.clone()].concat()).unwrap();
    let t2 = Tensor::new(vec![6, 2], [t.data.clone(), t.data.clone()].concat()).unwrap();
    let g2 = model.backward(&x2, &t2).unwrap();
    for (a, b) in g1.iter().zip(&g2) {
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-3), "{a} vs {b}");
    }
}

#[test]
fn forward_rejects_wrong_shape() {
    let model = EqualizerModel::<f64>::new(Architecture::Mlp, &toy_spec(2), 3).unwrap();
    let err = model.forward(&Tensor::zeros(vec![2, 7, 4])).unwrap_err();
    match err {
        Error::ShapeMismatch { expected, actual } => {
            assert_eq!(expected, vec![2, 5, 4]);
            assert_eq!(actual, vec![2, 7, 4]);
        }
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn non_finite_is_reported_with_layer_name() {
    let mut model = EqualizerModel::<f64>::new(Architecture::Mlp, &toy_spec(1), 3).unwrap();
    model.layer_params_mut(1)[0] = f64::MAX;
    let x = Tensor::new(vec![1, 3, 4], vec![1e300; 12]).unwrap();
    match model.forward(&x) {
        Err(Error::NonFinite { layer }) => assert!(layer.contains("dense"), "{layer}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn paper_scale_shape_contract() {
    let model = EqualizerModel::<f32>::from_layers(
        Architecture::Crnn,
        ArchSpec::paper(),
        ArchSpec::paper().layers(Architecture::Crnn),
    )
    .unwrap();
    assert_eq!(
        model.layer_shapes(8),
        vec![vec![8, 41, 244], vec![8, 41, 452], vec![8, 18532], vec![8, 2]]
    );
}

fn qam_frame(seed: u32, n: usize) -> SymbolFrame {
    qam16_map(&prbs_generate(seed, 8 * n).unwrap(), 34.4e9).unwrap()
}

#[test]
fn mlp_learns_identity_channel() {
    let tx = qam_frame(3, 1 << 15);
    let val_tx = qam_frame(4, 2000);
    let spec = ArchSpec { n_taps: 2, mlp_units: 32, ..toy_spec(2) };
    let cfg = TrainConfig { mini_batch: 16, epochs: 5, precision: Precision::F64, ..TrainConfig::default() };
    let data = build_windows(&tx, &tx, 2, Polarization::X).unwrap();
    let val = build_windows(&val_tx, &val_tx, 2, Polarization::X).unwrap();
    let model = EqualizerModel::<f64>::new(Architecture::Mlp, &spec, 1).unwrap();
    let (_, log) = train(&model, &data, &val, &cfg).unwrap();
    assert_eq!(log.records.len(), 5);
    let last = log.records.last().unwrap();
    assert!(last.val_mse < 1e-4, "{:?}", log.records);
    assert_eq!(log.best().unwrap().val_ber, 0.0);
}

#[test]
fn zero_epochs_returns_input_model() {
    let tx = qam_frame(3, 300);
    let data = build_windows(&tx, &tx, 2, Polarization::Y).unwrap();
    let model = EqualizerModel::<f64>::new(Architecture::BiLstm, &toy_spec(2), 1).unwrap();
    let cfg = TrainConfig { mini_batch: 32, epochs: 0, ..TrainConfig::default() };
    let (out, log) = train(&model, &data, &data, &cfg).unwrap();
    assert_eq!(out, model);
    assert!(log.records.is_empty());
}

#[test]
fn training_is_deterministic() {
    let tx = qam_frame(5, 400);
    let rx = SymbolFrame::new(
        tx.x.iter().map(|s| s * Complex64::from_polar(1.0, 0.1 * s.norm_sqr())).collect(),
        tx.y.clone(),
        tx.baud_rate,
    )
    .unwrap();
    let data = build_windows(&rx, &tx, 2, Polarization::X).unwrap();
    let cfg = TrainConfig { mini_batch: 50, epochs: 2, precision: Precision::F32, ..TrainConfig::default() };
    let run = || {
        let m = EqualizerModel::<f32>::new(Architecture::Crnn, &toy_spec(2), 4).unwrap();
        train(&m, &data, &data, &cfg).unwrap()
    };
    let (a, la) = run();
    let (b, lb) = run();
    assert_eq!(a.params.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.params.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    assert_eq!(la, lb);
}

#[test]
fn too_small_dataset_is_rejected() {
    let tx = qam_frame(3, 20);
    let data = build_windows(&tx, &tx, 2, Polarization::X).unwrap();
    let m = EqualizerModel::<f64>::new(Architecture::Mlp, &toy_spec(2), 1).unwrap();
    let cfg = TrainConfig { mini_batch: 64, epochs: 1, ..TrainConfig::default() };
    assert!(train(&m, &data, &data, &cfg).is_err());
}

fn identity_pair(n_taps: usize) -> PolarizationPair {
    let spec = ArchSpec { n_taps, ..toy_spec(n_taps) };
    let m = spec.memory();
    let make = |pol: usize| {
        let layers = vec![
            LayerSpec::Flatten,
            LayerSpec::Dense { inputs: 4 * m, outputs: 2, activation: Activation::Linear },
        ];
        let mut model = EqualizerModel::<f64>::from_layers(Architecture::Mlp, spec.clone(), layers).unwrap();
        let p = model.layer_params_mut(1);
        let centre = 4 * n_taps + 2 * pol;
        p[centre] = 1.0;
        p[4 * m + centre + 1] = 1.0;
        model
    };
    PolarizationPair { x: make(0), y: make(1) }
}

#[test]
fn identity_model_returns_centre_symbols() {
    let rx = qam_frame(9, 50);
    let pair = identity_pair(3);
    let out = equalize(&pair, &rx).unwrap();
    assert_eq!(out.len(), 50 - 6);
    for k in 0..out.len() {
        assert_eq!(out.x[k], rx.x[k + 3]);
        assert_eq!(out.y[k], rx.y[k + 3]);
    }
    assert!(equalize(&pair, &qam_frame(9, 6)).is_err());
}

#[test]
fn windowing_consistent_across_concatenation() {
    let a = qam_frame(1, 100);
    let b = qam_frame(2, 100);
    let ab = SymbolFrame::new([a.x.clone(), b.x.clone()].concat(), [a.y.clone(), b.y.clone()].concat(), a.baud_rate).unwrap();
    let model = EqualizerModel::<f64>::new(Architecture::Crnn, &toy_spec(2), 5).unwrap();
    let whole = equalize_frame(&model, &ab, 37).unwrap();
    let left = equalize_frame(&model, &a, 37).unwrap();
    let right = equalize_frame(&model, &b, 37).unwrap();
    // outputs whose windows lie entirely inside A or inside B agree
    assert_eq!(&whole[..left.len()], &left[..]);
    assert_eq!(&whole[100..], &right[..]);
}

#[test]
fn batch_size_does_not_change_outputs() {
    let rx = qam_frame(7, 300);
    let model = EqualizerModel::<f64>::new(Architecture::BiLstm, &toy_spec(2), 5).unwrap();
    let w = build_windows(&rx, &rx, 2, Polarization::X).unwrap();
    let one = predict(&model, &w, 1).unwrap();
    let big = predict(&model, &w, 4331).unwrap();
    for (p, q) in one.iter().zip(&big) {
        assert!((p - q).norm() < 1e-12);
    }
}

#[test]
fn adam_trajectories_are_identical() {
    let run = || {
        let mut p = vec![0.3f64, -1.0, 2.0];
        let mut s = AdamState::new(3);
        for k in 0..50 {
            let g: Vec<f64> = p.iter().map(|v| 2.0 * v + k as f64 * 1e-3).collect();
            adam_step(&mut p, &g, &mut s, 1e-2).unwrap();
        }
        p
    };
    assert_eq!(run(), run());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn window_rows_match_source(len in 1usize..40, n_taps in 0usize..6) {
        prop_assume!(len > 2 * n_taps);
        let rx = qam_frame(11, len);
        let w = build_windows(&rx, &rx, n_taps, Polarization::Y).unwrap();
        prop_assert_eq!(w.rows(), len - 2 * n_taps);
        for s in 0..w.rows() {
            let row = w.input_row(s);
            for t in 0..w.memory() {
                prop_assert_eq!(row[4 * t], rx.x[s + t].re);
                prop_assert_eq!(row[4 * t + 3], rx.y[s + t].im);
            }
            let [re, im] = w.target_row(s);
            prop_assert_eq!(Complex64::new(re, im), rx.y[s + n_taps]);
        }
    }
}

fn cubic_channel(tx: &SymbolFrame) -> SymbolFrame {
    let f = |s: &Complex64| s + 0.1 * s * s.norm_sqr();
    SymbolFrame::new(tx.x.iter().map(f).collect(), tx.y.iter().map(f).collect(), tx.baud_rate).unwrap()
}

/// Closed-form least squares from the flattened window (plus bias) to the target.
fn linear_regression_mse(train: &fibereq::nnequalizer::WindowedDataset, val: &fibereq::nnequalizer::WindowedDataset) -> f64 {
    let d = train.input_row(0).len() + 1;
    let mut ata = nalgebra::DMatrix::<f64>::zeros(d, d);
    let mut atb = nalgebra::DMatrix::<f64>::zeros(d, 2);
    for s in 0..train.rows() {
        let mut a: Vec<f64> = train.input_row(s).to_vec();
        a.push(1.0);
        let t = train.target_row(s);
        for i in 0..d {
            for j in 0..d {
                ata[(i, j)] += a[i] * a[j];
            }
            atb[(i, 0)] += a[i] * t[0];
            atb[(i, 1)] += a[i] * t[1];
        }
    }
    let w = ata.cholesky().unwrap().solve(&atb);
    let mut se = 0.0;
    for s in 0..val.rows() {
        let mut a: Vec<f64> = val.input_row(s).to_vec();
        a.push(1.0);
        let t = val.target_row(s);
        for (k, tk) in t.iter().enumerate() {
            let y: f64 = (0..d).map(|i| a[i] * w[(i, k)]).sum();
            se += (y - tk).powi(2);
        }
    }
    se / (2 * val.rows()) as f64
}

#[test]
fn crnn_beats_linear_regression_on_cubic_channel() {
    let tx = qam_frame(21, 1 << 13);
    let val_tx = qam_frame(22, 1 << 12);
    let (rx, val_rx) = (cubic_channel(&tx), cubic_channel(&val_tx));
    let spec = ArchSpec { n_taps: 2, filters: 8, kernel: 3, hidden: 8, ..toy_spec(2) };
    let data = build_windows(&rx, &tx, 2, Polarization::X).unwrap();
    let val = build_windows(&val_rx, &val_tx, 2, Polarization::X).unwrap();
    let oracle = linear_regression_mse(&data, &val);
    let cfg = TrainConfig { mini_batch: 32, epochs: 30, precision: Precision::F32, ..TrainConfig::default() };
    let model = EqualizerModel::<f32>::new(Architecture::Crnn, &spec, 2).unwrap();
    let (_, log) = train(&model, &data, &val, &cfg).unwrap();
    let best = log.records.iter().map(|r| r.val_mse).fold(f64::INFINITY, f64::min);
    assert!(best < oracle, "CRNN {best:.3e} vs least squares {oracle:.3e}");
}

#[test]
fn shuffling_does_not_matter_on_aperiodic_data() {
    let awgn = |tx: &SymbolFrame, seed: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = rand_distr::Normal::new(0.0, 0.16).unwrap();
        let mut n = || Complex64::new(rng.sample(normal), rng.sample(normal));
        let x = tx.x.iter().map(|s| s + n()).collect();
        let y = tx.y.iter().map(|s| s + n()).collect();
        SymbolFrame::new(x, y, tx.baud_rate).unwrap()
    };
    let tx = qam_frame(31, 1 << 13);
    let val_tx = qam_frame(32, 1 << 13);
    let data = build_windows(&awgn(&tx, 1), &tx, 1, Polarization::X).unwrap();
    let val = build_windows(&awgn(&val_tx, 2), &val_tx, 1, Polarization::X).unwrap();
    let spec = ArchSpec { n_taps: 1, mlp_units: 16, ..toy_spec(1) };
    let mut bers = [vec![], vec![]];
    for (k, shuffle) in [false, true].into_iter().enumerate() {
        for seed in 0..3 {
            let cfg = TrainConfig { mini_batch: 64, epochs: 4, shuffle, shuffle_seed: seed, ..TrainConfig::default() };
            let m = EqualizerModel::<f32>::new(Architecture::Mlp, &spec, seed).unwrap();
            let (_, log) = train(&m, &data, &val, &cfg).unwrap();
            bers[k].push(log.best().unwrap().val_ber);
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (a, b) = (mean(&bers[0]), mean(&bers[1]));
    let spread = bers.iter().flatten().map(|v| (v - (a + b) / 2.0).powi(2)).sum::<f64>() / 5.0;
    // seed spread plus binomial counting noise of the mean
    let bits = 4.0 * val.rows() as f64;
    let sigma = (spread + (a + b) / 2.0 / bits).sqrt();
    assert!((a - b).abs() <= 2.0 * sigma, "{bers:?}");
}

//! Finite-difference checks of every primitive, layer and the end-to-end
//! adjoint loss over 100 random seeds each.

use adjoint_core::layers::{
    concat_states, dense_forward, dense_stack, lstm_encode, lstm_stack, DropoutMode, DropoutSpec, MaskSource,
};
use adjoint_core::model::{AdjointModel, Batch, CombinerShape, ModelConfig, Variant};
use adjoint_core::nn::gradcheck::{check_inputs, check_params, GradCheck};
use adjoint_core::nn::{Graph, ParamStore, Tensor, Var};
use adjoint_core::rng::{self, Rng};
use rand::Rng as _;

const SEEDS: u64 = 100;
const TOL: f64 = 1e-4;

fn random(rng: &mut Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn assert_ok(what: &str, seed: u64, r: GradCheck) {
    assert!(r.checked > 0, "{what}: nothing checked");
    assert!(
        r.max_rel_error < TOL,
        "{what} seed {seed}: max relative error {:e}",
        r.max_rel_error
    );
}

/// Draws every bias uniformly from ±0.5. Zero biases can put a ReLU input at
/// exactly zero, where the derivative is undefined.
fn randomize_biases(store: &mut ParamStore, seed: u64) {
    let mut r = rng::stream(seed, "bias", 0);
    let names: Vec<String> = store.iter().map(|p| p.name.clone()).filter(|n| n.ends_with(".bias")).collect();
    for n in names {
        let id = store.find(&n).unwrap();
        store.get_mut(id).tensor.data_mut().iter_mut().for_each(|b| *b = r.random_range(-0.5..0.5));
    }
}

/// Reduces any output to a scalar with fixed random weights so every
/// element's gradient is exercised.
fn weighted_sum(g: &mut Graph, v: Var, seed: u64) -> Var {
    let shape = g.shape(v).to_vec();
    let mut r = rng::stream(seed, "probe", 0);
    let w = g.constant(random(&mut r, &shape));
    let p = g.mul(v, w).unwrap();
    g.sum(p)
}

#[test]
fn primitive_ops() {
    for seed in 0..SEEDS {
        let mut r = rng::stream(seed, "prim", 0);
        let a = random(&mut r, &[3, 4]);
        let b = random(&mut r, &[4, 2]);
        let c = random(&mut r, &[3, 4]);
        let row = random(&mut r, &[4]);
        let w1 = random(&mut r, &[1]);
        let mask: Vec<f64> = (0..12).map(|_| if r.random::<f64>() < 0.3 { 0.0 } else { 1.25 }).collect();

        let res = check_inputs(&[a.clone(), b.clone()], |g, x| {
            let m = g.matmul(x[0], x[1])?;
            Ok(weighted_sum(g, m, seed))
        });
        assert_ok("matmul", seed, res.unwrap());

        let res = check_inputs(&[a.clone(), c.clone()], |g, x| {
            let s = g.add(x[0], x[1])?;
            let d = g.sub(s, x[1])?;
            let d = g.sub(d, x[1])?;
            let m = g.mul(d, x[0])?;
            Ok(weighted_sum(g, m, seed))
        });
        assert_ok("add/sub/mul", seed, res.unwrap());

        let res = check_inputs(&[a.clone()], |g, x| {
            let s = g.sigmoid(x[0]);
            let t = g.tanh(s);
            let u = g.relu(x[0]);
            let v = g.add(t, u)?;
            let v = g.scale(v, -1.7);
            Ok(weighted_sum(g, v, seed))
        });
        assert_ok("sigmoid/tanh/relu/scale", seed, res.unwrap());

        let res = check_inputs(&[a.clone(), row.clone(), w1.clone()], |g, x| {
            let s = g.add_row(x[0], x[1])?;
            let s = g.mul_broadcast(s, x[1])?;
            let s = g.mul_broadcast(s, x[2])?;
            let s = g.mask(s, mask.clone())?;
            Ok(weighted_sum(g, s, seed))
        });
        assert_ok("add_row/mul_broadcast/mask", seed, res.unwrap());

        let res = check_inputs(&[a.clone(), c.clone()], |g, x| {
            let l = g.slice_cols(x[0], 1, 2)?;
            let k = g.concat_cols(&[l, x[1], l])?;
            Ok(weighted_sum(g, k, seed))
        });
        assert_ok("slice/concat", seed, res.unwrap());

        let res = check_inputs(&[a.clone(), c.clone()], |g, x| g.rmse(x[0], x[1]));
        assert_ok("rmse", seed, res.unwrap());
    }
}

#[test]
fn dense_stack_with_dropout() {
    for seed in 0..SEEDS {
        let mut r = rng::stream(seed, "dense", 0);
        let mut store = ParamStore::new();
        let net = dense_stack(&mut store, "d", 4, &[5, 3], 2, &mut r);
        randomize_biases(&mut store, seed);
        let x = random(&mut r, &[3, 4]);
        let spec = DropoutSpec::new(0.3, DropoutMode::Train).unwrap();
        let loss = |g: &mut Graph, p: &adjoint_core::nn::Bound| {
            let mut mrng = rng::stream(seed, "mask", 0);
            let mut masks = MaskSource::Shared(&mut mrng);
            let xin = g.constant(x.clone());
            let y = dense_forward(&net, g, p, xin, &spec, &mut masks)?;
            Ok(weighted_sum(g, y, seed))
        };
        assert_ok("dense params", seed, check_params(&mut store, loss).unwrap());

        let res = check_inputs(&[x.clone()], |g, v| {
            let p = store.bind(g);
            let y = dense_forward(&net, g, &p, v[0], &DropoutSpec::off(), &mut MaskSource::None)?;
            Ok(weighted_sum(g, y, seed))
        });
        assert_ok("dense input", seed, res.unwrap());
    }
}

#[test]
fn lstm_stack_over_sequence() {
    for seed in 0..SEEDS {
        let mut r = rng::stream(seed, "lstm", 0);
        let mut store = ParamStore::new();
        let stack = lstm_stack(&mut store, "l", 3, 2, 2, &mut r);
        let steps: Vec<Tensor> = (0..4).map(|_| random(&mut r, &[2, 3])).collect();
        let loss = |g: &mut Graph, p: &adjoint_core::nn::Bound| {
            let xs: Vec<Var> = steps.iter().map(|t| g.constant(t.clone())).collect();
            let states = lstm_encode(&stack, g, p, &xs)?;
            let enc = concat_states(g, &states)?;
            Ok(weighted_sum(g, enc, seed))
        };
        assert_ok("lstm params", seed, check_params(&mut store, loss).unwrap());

        let res = check_inputs(&steps, |g, xs| {
            let p = store.bind(g);
            let states = lstm_encode(&stack, g, &p, xs)?;
            let enc = concat_states(g, &states)?;
            Ok(weighted_sum(g, enc, seed))
        });
        assert_ok("lstm inputs", seed, res.unwrap());
    }
}

fn tiny_model(seed: u64, combiner: CombinerShape, anc_lstm: Option<usize>) -> AdjointModel {
    let cfg = ModelConfig {
        lookback: 3,
        horizon: 2,
        main_features: 2,
        ancillary_features: 2,
        lstm_hidden: 2,
        lstm_layers: 1,
        main_hidden: vec![3],
        ancillary_hidden: vec![3],
        ancillary_lstm_hidden: anc_lstm,
        dropout: 0.2,
        combiner,
    };
    AdjointModel::new(cfg, seed).unwrap()
}

fn tiny_batch(seed: u64, with_steps: bool) -> Batch {
    let mut r = rng::stream(seed, "batch", 0);
    let main: Vec<Vec<f64>> = (0..3).map(|_| (0..6).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
    let anc: Vec<Vec<f64>> = (0..3)
        .map(|_| (0..6).map(|_| f64::from(r.random::<bool>())).collect())
        .collect();
    let m: Vec<&[f64]> = main.iter().map(Vec::as_slice).collect();
    let a: Vec<&[f64]> = anc.iter().map(Vec::as_slice).collect();
    let mut b = Batch::from_slices(&m, &a, 3, 2, 2, with_steps).unwrap();
    // targets well above zero keep the combiner ReLU away from its kink
    let t: Vec<f64> = (0..6).map(|_| r.random_range(0.5..1.5)).collect();
    b.targets = Some(Tensor::new(vec![3, 2], t).unwrap());
    b
}

/// End-to-end adjoint RMSE loss, with the combiner weights lifted so the
/// pre-ReLU sum stays positive.
fn end_to_end(seed: u64, combiner: CombinerShape, anc_lstm: Option<usize>) -> GradCheck {
    let mut model = tiny_model(seed, combiner, anc_lstm);
    let batch = tiny_batch(seed, anc_lstm.is_some());
    randomize_biases(&mut model.store, seed);
    for name in ["combiner.w1", "combiner.w2"] {
        let id = model.store.find(name).unwrap();
        model.store.get_mut(id).tensor.data_mut().iter_mut().for_each(|w| *w = 0.6);
    }
    // output bias keeps both branches positive
    for name in ["main.dense1.bias", "ancillary.dense1.bias"] {
        let id = model.store.find(name).unwrap();
        model.store.get_mut(id).tensor.data_mut().fill(2.0);
    }
    let spec = model.dropout(DropoutMode::Train);
    let mut store = model.store.clone();
    check_params(&mut store, |g, p| {
        let mut mrng = rng::stream(seed, "mask", 1);
        let mut masks = MaskSource::Shared(&mut mrng);
        let out = model.output_graph(g, p, &batch, Variant::Adjoint, &spec, &mut masks)?;
        let target = g.constant(batch.targets.clone().unwrap());
        g.rmse(out, target)
    })
    .unwrap()
}

#[test]
fn end_to_end_adjoint_loss() {
    for seed in 0..SEEDS {
        assert_ok("adjoint scalar combiner", seed, end_to_end(seed, CombinerShape::Scalar, None));
    }
    for seed in 0..20 {
        assert_ok("adjoint per-step combiner", seed, end_to_end(seed, CombinerShape::PerStep, None));
        assert_ok("adjoint ancillary lstm", seed, end_to_end(seed, CombinerShape::Scalar, Some(2)));
    }
}


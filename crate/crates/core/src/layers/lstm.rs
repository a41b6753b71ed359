//! LSTM cell and stacked encoder.
//!
//! Gate weights are stored fused along the column axis in `i, f, g, o`
//! order: `input_weight` is `[input × 4h]`, `recurrent_weight` is `[h × 4h]`
//! and `bias` is `[4h]`.

use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Bound, Graph, ParamId, ParamStore, Tensor, Var};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmLayer {
    pub input_size: usize,
    pub hidden_size: usize,
    pub input_weight: ParamId,
    pub recurrent_weight: ParamId,
    pub bias: ParamId,
}

/// Final `(h, c)` of one layer.
#[derive(Debug, Clone, Copy)]
pub struct LstmState {
    pub h: Var,
    pub c: Var,
}

impl LstmLayer {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        input_size: usize,
        hidden_size: usize,
        rng: &mut Rng,
    ) -> Self {
        let h4 = 4 * hidden_size;
        let mut glorot = |fan_in: usize| {
            let limit = (6.0 / (fan_in + hidden_size) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit).unwrap();
            (0..fan_in * h4).map(|_| dist.sample(rng)).collect::<Vec<f64>>()
        };
        let w = glorot(input_size);
        let u = glorot(hidden_size);
        let mut b = vec![0.0; h4];
        b[hidden_size..2 * hidden_size].fill(1.0);

        Self {
            input_size,
            hidden_size,
            input_weight: store.add(
                format!("{name}.input_weight"),
                Tensor::from_parts(vec![input_size, h4], w),
            ),
            recurrent_weight: store.add(
                format!("{name}.recurrent_weight"),
                Tensor::from_parts(vec![hidden_size, h4], u),
            ),
            bias: store.add(format!("{name}.bias"), Tensor::from_parts(vec![h4], b)),
        }
    }

    /// One recurrence over a batch: `x: [B × input]`, `h, c: [B × hidden]`.
    pub fn step(&self, g: &mut Graph, p: &Bound, x: Var, prev: LstmState) -> Result<LstmState> {
        let hs = self.hidden_size;
        if g.value(x).cols() != self.input_size {
            return Err(Error::dim("lstm_step", g.shape(x), &[self.input_size]));
        }
        if g.value(prev.h).cols() != hs || g.value(prev.c).cols() != hs {
            return Err(Error::dim("lstm_step", g.shape(prev.h), &[hs]));
        }
        let zx = g.matmul(x, p.get(self.input_weight))?;
        let zh = g.matmul(prev.h, p.get(self.recurrent_weight))?;
        let z = g.add(zx, zh)?;
        let z = g.add_row(z, p.get(self.bias))?;

        let i = g.slice_cols(z, 0, hs)?;
        let i = g.sigmoid(i);
        let f = g.slice_cols(z, hs, hs)?;
        let f = g.sigmoid(f);
        let cand = g.slice_cols(z, 2 * hs, hs)?;
        let cand = g.tanh(cand);
        let o = g.slice_cols(z, 3 * hs, hs)?;
        let o = g.sigmoid(o);

        let keep = g.mul(f, prev.c)?;
        let write = g.mul(i, cand)?;
        let c = g.add(keep, write)?;
        let tc = g.tanh(c);
        let h = g.mul(o, tc)?;
        Ok(LstmState { h, c })
    }

    /// Tensor-level single step on one sample.
    pub fn step_tensors(
        &self,
        store: &ParamStore,
        x: &Tensor,
        h_prev: &Tensor,
        c_prev: &Tensor,
    ) -> Result<(Tensor, Tensor)> {
        let mut g = Graph::new();
        let p = store.bind(&mut g);
        let as_row = |t: &Tensor| Tensor::from_parts(vec![1, t.len()], t.data().to_vec());
        let x = g.constant(as_row(x));
        let h = g.constant(as_row(h_prev));
        let c = g.constant(as_row(c_prev));
        let s = self.step(&mut g, &p, x, LstmState { h, c })?;
        Ok((
            Tensor::from_parts(vec![self.hidden_size], g.value(s.h).data().to_vec()),
            Tensor::from_parts(vec![self.hidden_size], g.value(s.c).data().to_vec()),
        ))
    }
}

/// Consumes `steps` (each `[B × m]`) from zero initial state through every layer.
pub fn lstm_encode(
    stack: &[LstmLayer],
    g: &mut Graph,
    p: &Bound,
    steps: &[Var],
) -> Result<Vec<LstmState>> {
    let Some(&first) = steps.first() else {
        return Err(Error::Domain("cannot encode an empty sequence".into()));
    };
    let batch = g.value(first).rows();
    let mut states: Vec<LstmState> = stack
        .iter()
        .map(|l| {
            let h = g.constant(Tensor::zeros(&[batch, l.hidden_size]));
            let c = g.constant(Tensor::zeros(&[batch, l.hidden_size]));
            LstmState { h, c }
        })
        .collect();
    encode_from(stack, g, p, steps, &mut states)?;
    Ok(states)
}

/// Continues encoding from given per-layer states.
pub fn encode_from(
    stack: &[LstmLayer],
    g: &mut Graph,
    p: &Bound,
    steps: &[Var],
    states: &mut [LstmState],
) -> Result<()> {
    if states.len() != stack.len() {
        return Err(Error::dim("lstm_encode", &[stack.len()], &[states.len()]));
    }
    for &x in steps {
        let mut input = x;
        for (layer, state) in stack.iter().zip(states.iter_mut()) {
            *state = layer.step(g, p, input, *state)?;
            input = state.h;
        }
    }
    Ok(())
}

/// Concatenates `[h_0, c_0, h_1, c_1, ...]` along columns.
pub fn concat_states(g: &mut Graph, states: &[LstmState]) -> Result<Var> {
    let parts: Vec<Var> = states.iter().flat_map(|s| [s.h, s.c]).collect();
    g.concat_cols(&parts)
}

/// Width of [`concat_states`] output for a stack.
pub fn encoded_width(stack: &[LstmLayer]) -> usize {
    stack.iter().map(|l| 2 * l.hidden_size).sum()
}

/// Builds `layers` stacked LSTM layers.
pub fn lstm_stack(
    store: &mut ParamStore,
    prefix: &str,
    input_size: usize,
    hidden_size: usize,
    layers: usize,
    rng: &mut Rng,
) -> Vec<LstmLayer> {
    (0..layers)
        .map(|i| {
            let input = if i == 0 { input_size } else { hidden_size };
            LstmLayer::new(store, &format!("{prefix}.lstm{i}"), input, hidden_size, rng)
        })
        .collect()
}

/// Tensor-level encoding of one `[T × m]` sequence; returns concatenated final states.
pub fn encode_sequence(stack: &[LstmLayer], store: &ParamStore, sequence: &Tensor) -> Result<Tensor> {
    if sequence.shape().len() != 2 {
        return Err(Error::dim("lstm_encode", sequence.shape(), &[0, 0]));
    }
    let (t, m) = (sequence.shape()[0], sequence.shape()[1]);
    if let Some(l0) = stack.first() {
        if l0.input_size != m {
            return Err(Error::dim("lstm_encode", sequence.shape(), &[t, l0.input_size]));
        }
    }
    let mut g = Graph::new();
    let p = store.bind(&mut g);
    let steps: Vec<Var> = sequence
        .data()
        .chunks(m)
        .map(|row| g.constant(Tensor::from_parts(vec![1, m], row.to_vec())))
        .collect();
    let states = lstm_encode(stack, &mut g, &p, &steps)?;
    let out = concat_states(&mut g, &states)?;
    Ok(Tensor::from_parts(vec![encoded_width(stack)], g.value(out).data().to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::graph::sigmoid;
    use crate::rng;

    fn zeroed(store: &mut ParamStore) {
        let ids: Vec<_> = (0..store.len()).map(ParamId).collect();
        for id in ids {
            store.get_mut(id).tensor.data_mut().fill(0.0);
        }
    }

    #[test]
    fn zero_weights_give_zero_state() {
        let mut store = ParamStore::new();
        let mut r = rng::stream(0, "init", 0);
        let layer = LstmLayer::new(&mut store, "l", 3, 2, &mut r);
        zeroed(&mut store);
        let x = Tensor::vector(vec![1.0, -4.0, 2.0]).unwrap();
        let z = Tensor::zeros(&[2]);
        let (h, c) = layer.step_tensors(&store, &x, &z, &z).unwrap();
        assert_eq!(h.data(), &[0.0, 0.0]);
        assert_eq!(c.data(), &[0.0, 0.0]);
    }

    #[test]
    fn saturated_forget_gate_carries_memory() {
        let mut store = ParamStore::new();
        let mut r = rng::stream(0, "init", 0);
        let layer = LstmLayer::new(&mut store, "l", 2, 3, &mut r);
        {
            let b = store.get_mut(layer.bias).tensor.data_mut();
            b[0..3].fill(-50.0);
            b[3..6].fill(50.0);
        }
        let x = Tensor::vector(vec![0.2, -0.3]).unwrap();
        let h = Tensor::vector(vec![0.1, 0.0, -0.1]).unwrap();
        let c = Tensor::vector(vec![0.7, -1.3, 2.0]).unwrap();
        let (_, c_next) = layer.step_tensors(&store, &x, &h, &c).unwrap();
        for (a, b) in c_next.data().iter().zip(c.data()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    fn scalar_loop_step(
        store: &ParamStore,
        layer: &LstmLayer,
        x: &[f64],
        h: &[f64],
        c: &[f64],
    ) -> (Vec<f64>, Vec<f64>) {
        let hs = layer.hidden_size;
        let w = store.tensor(layer.input_weight).data();
        let u = store.tensor(layer.recurrent_weight).data();
        let b = store.tensor(layer.bias).data();
        let gate = |k: usize, j: usize| {
            let col = k * hs + j;
            let mut s = b[col];
            for (p, xv) in x.iter().enumerate() {
                s += xv * w[p * 4 * hs + col];
            }
            for (p, hv) in h.iter().enumerate() {
                s += hv * u[p * 4 * hs + col];
            }
            s
        };
        let mut h_next = vec![0.0; hs];
        let mut c_next = vec![0.0; hs];
        for j in 0..hs {
            let i = sigmoid(gate(0, j));
            let f = sigmoid(gate(1, j));
            let g = gate(2, j).tanh();
            let o = sigmoid(gate(3, j));
            c_next[j] = f * c[j] + i * g;
            h_next[j] = o * c_next[j].tanh();
        }
        (h_next, c_next)
    }

    #[test]
    fn matches_scalar_loop_oracle() {
        let mut store = ParamStore::new();
        let mut r = rng::stream(3, "init", 0);
        let layer = LstmLayer::new(&mut store, "l", 3, 2, &mut r);
        let x = [0.4, -1.1, 0.9];
        let h = [0.3, -0.2];
        let c = [-0.5, 0.8];
        let (eh, ec) = scalar_loop_step(&store, &layer, &x, &h, &c);
        let (gh, gc) = layer
            .step_tensors(
                &store,
                &Tensor::vector(x.to_vec()).unwrap(),
                &Tensor::vector(h.to_vec()).unwrap(),
                &Tensor::vector(c.to_vec()).unwrap(),
            )
            .unwrap();
        for (a, b) in gh.data().iter().zip(&eh).chain(gc.data().iter().zip(&ec)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn single_step_encode_equals_step_from_zero() {
        let mut store = ParamStore::new();
        let mut r = rng::stream(4, "init", 0);
        let stack = lstm_stack(&mut store, "s", 2, 3, 1, &mut r);
        let seq = Tensor::matrix(1, 2, vec![0.5, -0.5]).unwrap();
        let enc = encode_sequence(&stack, &store, &seq).unwrap();
        let z = Tensor::zeros(&[3]);
        let (h, c) = stack[0]
            .step_tensors(&store, &Tensor::vector(vec![0.5, -0.5]).unwrap(), &z, &z)
            .unwrap();
        assert_eq!(&enc.data()[..3], h.data());
        assert_eq!(&enc.data()[3..], c.data());
    }

    #[test]
    fn two_layer_constant_sequence_matches_manual_iteration() {
        let mut store = ParamStore::new();
        let mut r = rng::stream(5, "init", 0);
        let stack = lstm_stack(&mut store, "s", 2, 3, 2, &mut r);
        let row = [0.25, -0.75];
        let seq = Tensor::matrix(4, 2, row.repeat(4)).unwrap();
        let enc = encode_sequence(&stack, &store, &seq).unwrap();

        let (mut h0, mut c0) = (vec![0.0; 3], vec![0.0; 3]);
        let (mut h1, mut c1) = (vec![0.0; 3], vec![0.0; 3]);
        for _ in 0..4 {
            (h0, c0) = scalar_loop_step(&store, &stack[0], &row, &h0, &c0);
            (h1, c1) = scalar_loop_step(&store, &stack[1], &h0, &h1, &c1);
        }
        let expected: Vec<f64> = [h0, c0, h1, c1].concat();
        for (a, b) in enc.data().iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_stack_encodes_to_zero() {
        let mut store = ParamStore::new();
        let mut r = rng::stream(6, "init", 0);
        let stack = lstm_stack(&mut store, "s", 2, 3, 2, &mut r);
        zeroed(&mut store);
        let seq = Tensor::matrix(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let enc = encode_sequence(&stack, &store, &seq).unwrap();
        assert!(enc.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn empty_sequence_is_domain_error() {
        let mut store = ParamStore::new();
        let mut r = rng::stream(6, "init", 0);
        let stack = lstm_stack(&mut store, "s", 2, 3, 1, &mut r);
        let mut g = Graph::new();
        let p = store.bind(&mut g);
        assert!(matches!(lstm_encode(&stack, &mut g, &p, &[]), Err(Error::Domain(_))));
    }

    #[test]
    fn state_threading() {
        let mut store = ParamStore::new();
        let mut r = rng::stream(7, "init", 0);
        let stack = lstm_stack(&mut store, "s", 2, 3, 2, &mut r);
        let data: Vec<f64> = (0..10).map(|i| (i as f64 * 0.37).sin()).collect();
        let full = encode_sequence(&stack, &store, &Tensor::matrix(5, 2, data.clone()).unwrap()).unwrap();

        let mut g = Graph::new();
        let p = store.bind(&mut g);
        let steps: Vec<Var> = data
            .chunks(2)
            .map(|row| g.constant(Tensor::matrix(1, 2, row.to_vec()).unwrap()))
            .collect();
        let mut states = lstm_encode(&stack, &mut g, &p, &steps[..2]).unwrap();
        encode_from(&stack, &mut g, &p, &steps[2..], &mut states).unwrap();
        let out = concat_states(&mut g, &states).unwrap();
        assert_eq!(g.value(out).data(), full.data());
    }
}

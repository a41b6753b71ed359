use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::dropout::{DropoutSpec, MaskSource};
use crate::nn::{Bound, Graph, ParamId, ParamStore, Tensor, Var};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
}

/// Affine layer `y = act(x W + b)` with `W: [in × out]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub input_size: usize,
    pub output_size: usize,
    pub activation: Activation,
    pub weight: ParamId,
    pub bias: ParamId,
}

impl DenseLayer {
    /// Registers a Glorot-uniform initialized layer in `store`.
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        input_size: usize,
        output_size: usize,
        activation: Activation,
        rng: &mut Rng,
    ) -> Self {
        let limit = (6.0 / (input_size + output_size) as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit).unwrap();
        let w: Vec<f64> = (0..input_size * output_size).map(|_| dist.sample(rng)).collect();
        let weight = store.add(
            format!("{name}.weight"),
            Tensor::from_parts(vec![input_size, output_size], w),
        );
        let bias = store.add(format!("{name}.bias"), Tensor::zeros(&[output_size]));
        Self {
            input_size,
            output_size,
            activation,
            weight,
            bias,
        }
    }

    pub fn forward(&self, g: &mut Graph, p: &Bound, x: Var) -> Result<Var> {
        let z = g.matmul(x, p.get(self.weight))?;
        let z = g.add_row(z, p.get(self.bias))?;
        Ok(match self.activation {
            Activation::Relu => g.relu(z),
            Activation::Identity => z,
        })
    }
}

/// Builds a stack of `widths.len()` hidden ReLU layers followed by an identity output layer.
pub fn dense_stack(
    store: &mut ParamStore,
    prefix: &str,
    input_size: usize,
    hidden: &[usize],
    output_size: usize,
    rng: &mut Rng,
) -> Vec<DenseLayer> {
    let mut layers = Vec::with_capacity(hidden.len() + 1);
    let mut width = input_size;
    for (i, &h) in hidden.iter().enumerate() {
        layers.push(DenseLayer::new(
            store,
            &format!("{prefix}.dense{i}"),
            width,
            h,
            Activation::Relu,
            rng,
        ));
        width = h;
    }
    layers.push(DenseLayer::new(
        store,
        &format!("{prefix}.dense{}", hidden.len()),
        width,
        output_size,
        Activation::Identity,
        rng,
    ));
    layers
}

/// Runs a dense stack; dropout is applied after every layer except the last.
pub fn dense_forward(
    net: &[DenseLayer],
    g: &mut Graph,
    p: &Bound,
    x: Var,
    dropout: &DropoutSpec,
    masks: &mut MaskSource<'_>,
) -> Result<Var> {
    let Some((last, hidden)) = net.split_last() else {
        return Err(Error::Domain("empty dense stack".into()));
    };
    let mut h = x;
    for layer in hidden {
        if g.value(h).cols() != layer.input_size {
            return Err(Error::dim("dense_forward", g.shape(h), &[layer.input_size]));
        }
        h = layer.forward(g, p, h)?;
        if dropout.is_active() {
            let (rows, cols) = (g.value(h).rows(), g.value(h).cols());
            let mask = masks.draw(dropout.rate, rows, cols)?;
            h = g.mask(h, mask)?;
        }
    }
    if g.value(h).cols() != last.input_size {
        return Err(Error::dim("dense_forward", g.shape(h), &[last.input_size]));
    }
    last.forward(g, p, h)
}

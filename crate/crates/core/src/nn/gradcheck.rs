//! Central finite-difference checks of reverse-mode gradients.

use crate::error::{Error, Result};
use crate::nn::{Bound, Graph, ParamStore, Tensor, Var};

/// Step used for central differences.
pub const FD_STEP: f64 = 1e-5;

/// Denominator floor for [`relative_error`], so gradients that are zero up to
/// rounding compare by absolute error.
pub const REL_FLOOR: f64 = 1e-4;

/// `|a - n| / max(|a|, |n|, REL_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    /// Largest relative error over every checked coordinate.
    pub max_rel_error: f64,
    pub checked: usize,
}

impl GradCheck {
    fn new() -> Self {
        Self {
            max_rel_error: 0.0,
            checked: 0,
        }
    }

    fn push(&mut self, analytic: f64, numeric: f64) {
        self.max_rel_error = self.max_rel_error.max(relative_error(analytic, numeric));
        self.checked += 1;
    }
}

fn scalar(g: &Graph, v: Var) -> Result<f64> {
    let t = g.value(v);
    if t.len() != 1 {
        return Err(Error::Contract(format!("loss must be scalar, got shape {:?}", t.shape())));
    }
    Ok(t.data()[0])
}

/// Checks d loss / d input for every coordinate of every input.
///
/// `f` must rebuild the same computation from the given leaves each call.
pub fn check_inputs(inputs: &[Tensor], f: impl Fn(&mut Graph, &[Var]) -> Result<Var>) -> Result<GradCheck> {
    let eval = |xs: &[Tensor]| -> Result<f64> {
        let mut g = Graph::new();
        let vars: Vec<Var> = xs.iter().map(|x| g.constant(x.clone())).collect();
        let loss = f(&mut g, &vars)?;
        scalar(&g, loss)
    };
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs
        .iter()
        .map(|x| g.leaf(x.clone().with_requires_grad(true)))
        .collect();
    let loss = f(&mut g, &vars)?;
    g.backward(loss)?;

    let mut out = GradCheck::new();
    let mut xs = inputs.to_vec();
    for (k, &v) in vars.iter().enumerate() {
        let analytic = g.grad(v).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; xs[k].len()]);
        for j in 0..xs[k].len() {
            let orig = xs[k].data()[j];
            xs[k].data_mut()[j] = orig + FD_STEP;
            let up = eval(&xs)?;
            xs[k].data_mut()[j] = orig - FD_STEP;
            let down = eval(&xs)?;
            xs[k].data_mut()[j] = orig;
            out.push(analytic[j], (up - down) / (2.0 * FD_STEP));
        }
    }
    Ok(out)
}

/// Checks d loss / d parameter for every trainable parameter in `store`.
pub fn check_params(store: &mut ParamStore, f: impl Fn(&mut Graph, &Bound) -> Result<Var>) -> Result<GradCheck> {
    let mut g = Graph::new();
    let bound = store.bind(&mut g);
    let loss = f(&mut g, &bound)?;
    g.backward(loss)?;
    store.zero_grad();
    store.collect_grads(&g, &bound)?;
    let analytic: Vec<Option<Vec<f64>>> = store
        .iter()
        .map(|p| p.tensor.grad().map(<[f64]>::to_vec))
        .collect();
    store.zero_grad();

    let eval = |store: &ParamStore| -> Result<f64> {
        let mut g = Graph::new();
        let bound = store.bind(&mut g);
        let loss = f(&mut g, &bound)?;
        scalar(&g, loss)
    };
    let mut out = GradCheck::new();
    let names: Vec<String> = store.iter().map(|p| p.name.clone()).collect();
    for (name, grad) in names.iter().zip(analytic) {
        let Some(grad) = grad else { continue };
        let id = store.find(name).expect("name from the same store");
        for (j, &a) in grad.iter().enumerate() {
            let orig = store.tensor(id).data()[j];
            store.get_mut(id).tensor.data_mut()[j] = orig + FD_STEP;
            let up = eval(store)?;
            store.get_mut(id).tensor.data_mut()[j] = orig - FD_STEP;
            let down = eval(store)?;
            store.get_mut(id).tensor.data_mut()[j] = orig;
            out.push(a, (up - down) / (2.0 * FD_STEP));
        }
    }
    Ok(out)
}

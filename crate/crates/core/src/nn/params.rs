use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::graph::{Graph, Var};
use crate::nn::tensor::{Parameter, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamId(pub(crate) usize);

/// Ordered collection of named trainable tensors.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamStore {
    params: Vec<Parameter>,
}

/// Graph handles for every parameter of a store, indexed by [`ParamId`].
#[derive(Debug, Clone)]
pub struct Bound(Vec<Var>);

impl Bound {
    pub fn get(&self, id: ParamId) -> Var {
        self.0[id.0]
    }
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor) -> ParamId {
        self.params.push(Parameter::new(name, tensor));
        ParamId(self.params.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn tensor(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].tensor
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.iter()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn count(&self) -> usize {
        crate::nn::tensor::count_parameters(self.params.iter().map(|p| &p.tensor))
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    /// Marks parameters whose name starts with `prefix` as trainable or frozen.
    pub fn set_trainable(&mut self, prefix: &str, flag: bool) {
        for p in self.params.iter_mut().filter(|p| p.name.starts_with(prefix)) {
            p.tensor.set_requires_grad(flag);
        }
    }

    pub fn set_all_trainable(&mut self, flag: bool) {
        self.set_trainable("", flag);
    }

    pub fn trainable(&mut self) -> Vec<&mut Parameter> {
        self.params
            .iter_mut()
            .filter(|p| p.tensor.requires_grad())
            .collect()
    }

    pub fn trainable_ref(&self) -> Vec<&Parameter> {
        self.params
            .iter()
            .filter(|p| p.tensor.requires_grad())
            .collect()
    }

    pub fn zero_grad(&mut self) {
        self.params.iter_mut().for_each(|p| p.tensor.zero_grad());
    }

    /// Records every parameter as a leaf; frozen parameters become constants.
    pub fn bind(&self, g: &mut Graph) -> Bound {
        Bound(self.params.iter().map(|p| g.leaf(p.tensor.clone())).collect())
    }

    /// Copies leaf gradients from `g` into the trainable parameters.
    pub fn collect_grads(&mut self, g: &Graph, bound: &Bound) -> Result<()> {
        for (p, &v) in self.params.iter_mut().zip(&bound.0) {
            if !p.tensor.requires_grad() {
                continue;
            }
            match g.grad(v) {
                Some(d) => p.tensor.accumulate_grad(d)?,
                None => {
                    let zeros = vec![0.0; p.tensor.len()];
                    p.tensor.accumulate_grad(&zeros)?
                }
            }
        }
        Ok(())
    }

    /// Copies parameter values (not gradients) from another store of the same layout.
    pub fn load_values(&mut self, other: &ParamStore) -> Result<()> {
        if self.params.len() != other.params.len() {
            return Err(Error::Contract(format!(
                "parameter count mismatch: {} vs {}",
                self.params.len(),
                other.params.len()
            )));
        }
        for (dst, src) in self.params.iter_mut().zip(&other.params) {
            if dst.name != src.name || dst.tensor.shape() != src.tensor.shape() {
                return Err(Error::Contract(format!(
                    "parameter layout mismatch at `{}` / `{}`",
                    dst.name, src.name
                )));
            }
            dst.tensor.data_mut().copy_from_slice(src.tensor.data());
        }
        Ok(())
    }

    /// Snapshot of values for every parameter whose name starts with `prefix`.
    pub fn snapshot(&self, prefix: &str) -> Vec<(String, Vec<f64>)> {
        self.params
            .iter()
            .filter(|p| p.name.starts_with(prefix))
            .map(|p| (p.name.clone(), p.tensor.data().to_vec()))
            .collect()
    }

    pub fn restore(&mut self, snapshot: &[(String, Vec<f64>)]) {
        for (name, data) in snapshot {
            if let Some(id) = self.find(name) {
                self.params[id.0].tensor.data_mut().copy_from_slice(data);
            }
        }
    }
}

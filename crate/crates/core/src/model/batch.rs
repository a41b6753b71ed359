use crate::data::{Normalizer, WindowedDataset};
use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Model-space inputs for a group of windows.
#[derive(Debug, Clone)]
pub struct Batch {
    pub size: usize,
    /// One `[B × m]` matrix per lookback step.
    pub main_steps: Vec<Tensor>,
    /// `[B × L·k]`, each row a flattened indicator window.
    pub ancillary_flat: Tensor,
    /// One `[B × k]` matrix per step, only filled for an LSTM ancillary front-end.
    pub ancillary_steps: Vec<Tensor>,
    /// `[B × H]` scaled targets, when known.
    pub targets: Option<Tensor>,
}

impl Batch {
    /// Builds from already-normalized `[L × m]` inputs and `[L × k]` indicators.
    pub fn from_slices(
        main: &[&[f64]],
        ancillary: &[&[f64]],
        lookback: usize,
        main_features: usize,
        ancillary_features: usize,
        with_ancillary_steps: bool,
    ) -> Result<Self> {
        let b = main.len();
        if b == 0 || ancillary.len() != b {
            return Err(Error::dim("batch", &[main.len()], &[ancillary.len()]));
        }
        let (l, m, k) = (lookback, main_features, ancillary_features);
        for w in main {
            if w.len() != l * m {
                return Err(Error::dim("batch main window", &[l, m], &[w.len()]));
            }
        }
        for w in ancillary {
            if w.len() != l * k {
                return Err(Error::dim("batch ancillary window", &[l, k], &[w.len()]));
            }
        }
        let main_steps = (0..l)
            .map(|t| {
                let mut data = Vec::with_capacity(b * m);
                for w in main {
                    data.extend_from_slice(&w[t * m..(t + 1) * m]);
                }
                Tensor::from_parts(vec![b, m], data)
            })
            .collect();
        let ancillary_flat = Tensor::from_parts(vec![b, l * k], ancillary.concat());
        let ancillary_steps = if with_ancillary_steps {
            (0..l)
                .map(|t| {
                    let mut data = Vec::with_capacity(b * k);
                    for w in ancillary {
                        data.extend_from_slice(&w[t * k..(t + 1) * k]);
                    }
                    Tensor::from_parts(vec![b, k], data)
                })
                .collect()
        } else {
            Vec::new()
        };
        Ok(Self {
            size: b,
            main_steps,
            ancillary_flat,
            ancillary_steps,
            targets: None,
        })
    }

    /// Normalizes and gathers raw dataset windows `idx`, with scaled targets attached.
    pub fn from_dataset(
        ds: &WindowedDataset,
        idx: &[usize],
        norm: &Normalizer,
        with_ancillary_steps: bool,
    ) -> Result<Self> {
        let m = ds.n_features();
        if m != norm.mean.len() {
            return Err(Error::dim("batch features", &[norm.mean.len()], &[m]));
        }
        let normalized: Vec<Vec<f64>> = idx
            .iter()
            .map(|&i| {
                let mut w = ds.input(i).to_vec();
                w.chunks_mut(m).for_each(|row| norm.transform_row(row));
                w
            })
            .collect();
        let main: Vec<&[f64]> = normalized.iter().map(Vec::as_slice).collect();
        let anc: Vec<&[f64]> = idx.iter().map(|&i| ds.ancillary_window(i)).collect();
        let mut batch = Self::from_slices(
            &main,
            &anc,
            ds.lookback,
            m,
            ds.n_ancillary(),
            with_ancillary_steps,
        )?;
        let mut targets = Vec::with_capacity(idx.len() * ds.horizon);
        for &i in idx {
            targets.extend(ds.target(i).iter().map(|&y| norm.target.scale(y)));
        }
        batch.targets = Some(Tensor::from_parts(vec![idx.len(), ds.horizon], targets));
        Ok(batch)
    }
}

//! The three-part forecaster: main network, ancillary network, and the
//! combiner `ReLU(w1 · y_main + w2 · y_anc)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::{
    concat_states, dense_forward, dense_stack, encoded_width, lstm_encode, lstm_stack, DenseLayer,
    DropoutMode, DropoutSpec, LstmLayer, MaskSource,
};
use crate::model::batch::Batch;
use crate::model::config::ModelConfig;
use crate::nn::{Bound, Graph, ParamId, ParamStore, Tensor, Var};
use crate::rng::{self, Rng};

pub const MAIN_PREFIX: &str = "main.";
pub const ANCILLARY_PREFIX: &str = "ancillary.";
pub const COMBINER_PREFIX: &str = "combiner.";

/// Which output a forecast is read from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Combined output of both subnetworks.
    #[default]
    Adjoint,
    /// Main network alone, the baseline without the ancillary network.
    MainOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdjointModel {
    pub config: ModelConfig,
    pub store: ParamStore,
    main_lstm: Vec<LstmLayer>,
    main_ffn: Vec<DenseLayer>,
    ancillary_lstm: Vec<LstmLayer>,
    ancillary_ffn: Vec<DenseLayer>,
    w1: ParamId,
    w2: ParamId,
}

impl AdjointModel {
    /// Initializes every parameter from the `init` stream of `seed`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = rng::stream(seed, "init", 0);
        let mut store = ParamStore::new();
        let c = &config;

        let main_lstm = lstm_stack(&mut store, "main", c.main_features, c.lstm_hidden, c.lstm_layers, &mut rng);
        let main_ffn = dense_stack(
            &mut store,
            "main",
            encoded_width(&main_lstm),
            &c.main_hidden,
            c.horizon,
            &mut rng,
        );

        let (ancillary_lstm, anc_in) = match c.ancillary_lstm_hidden {
            Some(h) => {
                let stack = lstm_stack(&mut store, "ancillary", c.ancillary_features, h, 1, &mut rng);
                let w = encoded_width(&stack);
                (stack, w)
            }
            None => (Vec::new(), c.lookback * c.ancillary_features),
        };
        let ancillary_ffn = dense_stack(
            &mut store,
            "ancillary",
            anc_in,
            &c.ancillary_hidden,
            c.horizon,
            &mut rng,
        );

        let n = c.combiner_len();
        let w1 = store.add("combiner.w1", Tensor::filled(&[n], 0.5));
        let w2 = store.add("combiner.w2", Tensor::filled(&[n], 0.5));

        Ok(Self {
            config,
            store,
            main_lstm,
            main_ffn,
            ancillary_lstm,
            ancillary_ffn,
            w1,
            w2,
        })
    }

    pub fn parameter_count(&self) -> usize {
        self.store.count()
    }

    pub fn combiner_weights(&self) -> (&[f64], &[f64]) {
        (self.store.tensor(self.w1).data(), self.store.tensor(self.w2).data())
    }

    pub fn set_combiner_weights(&mut self, w1: f64, w2: f64) {
        self.store.get_mut(self.w1).tensor.data_mut().fill(w1);
        self.store.get_mut(self.w2).tensor.data_mut().fill(w2);
    }

    pub fn dropout(&self, mode: DropoutMode) -> DropoutSpec {
        DropoutSpec {
            rate: self.config.dropout,
            mode,
        }
    }

    pub fn uses_ancillary_lstm(&self) -> bool {
        !self.ancillary_lstm.is_empty()
    }

    /// `[B × H]` main-network output.
    pub fn main_graph(
        &self,
        g: &mut Graph,
        p: &Bound,
        batch: &Batch,
        dropout: &DropoutSpec,
        masks: &mut MaskSource<'_>,
    ) -> Result<Var> {
        let encoded = self.encode_main(g, p, batch)?;
        dense_forward(&self.main_ffn, g, p, encoded, dropout, masks)
    }

    fn encode_main(&self, g: &mut Graph, p: &Bound, batch: &Batch) -> Result<Var> {
        let steps: Vec<Var> = batch.main_steps.iter().map(|t| g.constant(t.clone())).collect();
        let states = lstm_encode(&self.main_lstm, g, p, &steps)?;
        concat_states(g, &states)
    }

    fn ancillary_input(&self, g: &mut Graph, p: &Bound, batch: &Batch) -> Result<Var> {
        if self.ancillary_lstm.is_empty() {
            return Ok(g.constant(batch.ancillary_flat.clone()));
        }
        if batch.ancillary_steps.is_empty() {
            return Err(Error::Contract(
                "ancillary LSTM front-end needs per-step indicator inputs".into(),
            ));
        }
        let steps: Vec<Var> = batch.ancillary_steps.iter().map(|t| g.constant(t.clone())).collect();
        let states = lstm_encode(&self.ancillary_lstm, g, p, &steps)?;
        concat_states(g, &states)
    }

    /// `[B × H]` ancillary-network output.
    pub fn ancillary_graph(
        &self,
        g: &mut Graph,
        p: &Bound,
        batch: &Batch,
        dropout: &DropoutSpec,
        masks: &mut MaskSource<'_>,
    ) -> Result<Var> {
        let x = self.ancillary_input(g, p, batch)?;
        dense_forward(&self.ancillary_ffn, g, p, x, dropout, masks)
    }

    /// `ReLU(w1 · y_main + w2 · y_anc)`.
    pub fn combine_graph(&self, g: &mut Graph, p: &Bound, y_main: Var, y_anc: Var) -> Result<Var> {
        if g.shape(y_main) != g.shape(y_anc) {
            return Err(Error::dim("combine", g.shape(y_main), g.shape(y_anc)));
        }
        let a = g.mul_broadcast(y_main, p.get(self.w1))?;
        let b = g.mul_broadcast(y_anc, p.get(self.w2))?;
        let s = g.add(a, b)?;
        Ok(g.relu(s))
    }

    /// Full forward pass for a variant.
    pub fn output_graph(
        &self,
        g: &mut Graph,
        p: &Bound,
        batch: &Batch,
        variant: Variant,
        dropout: &DropoutSpec,
        masks: &mut MaskSource<'_>,
    ) -> Result<Var> {
        let y_main = self.main_graph(g, p, batch, dropout, masks)?;
        match variant {
            Variant::MainOnly => Ok(y_main),
            Variant::Adjoint => {
                let y_anc = self.ancillary_graph(g, p, batch, dropout, masks)?;
                self.combine_graph(g, p, y_main, y_anc)
            }
        }
    }

    /// Deterministic `[B × H]` forecast with dropout off.
    pub fn predict_batch(&self, batch: &Batch, variant: Variant) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let p = self.store.bind(&mut g);
        let out = self.output_graph(&mut g, &p, batch, variant, &DropoutSpec::off(), &mut MaskSource::None)?;
        Ok(g.value(out).data().to_vec())
    }

    /// Main and ancillary outputs with dropout off, each `[B × H]`.
    pub fn subnetwork_outputs(&self, batch: &Batch) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut g = Graph::new();
        let p = self.store.bind(&mut g);
        let off = DropoutSpec::off();
        let m = self.main_graph(&mut g, &p, batch, &off, &mut MaskSource::None)?;
        let a = self.ancillary_graph(&mut g, &p, batch, &off, &mut MaskSource::None)?;
        Ok((g.value(m).data().to_vec(), g.value(a).data().to_vec()))
    }

    /// MC-dropout forecasts for one window, one row per entry of `rngs`.
    ///
    /// The LSTM encodings carry no dropout, so they are computed once and
    /// shared by every sample. Each sample draws its masks from its own stream:
    /// main layers first, then ancillary layers.
    pub fn sample_window(&self, window: &Batch, variant: Variant, rngs: &mut [Rng]) -> Result<Vec<f64>> {
        if window.size != 1 {
            return Err(Error::Contract("sample_window takes a single-window batch".into()));
        }
        let n = rngs.len();
        let spec = self.dropout(DropoutMode::McInference);
        let mut g = Graph::new();
        let p = self.store.bind(&mut g);

        let enc = self.encode_main(&mut g, &p, window)?;
        let enc = replicate(&mut g, enc, n);
        let mut masks = MaskSource::PerRow(rngs);
        let y_main = dense_forward(&self.main_ffn, &mut g, &p, enc, &spec, &mut masks)?;
        let out = match variant {
            Variant::MainOnly => y_main,
            Variant::Adjoint => {
                let x = self.ancillary_input(&mut g, &p, window)?;
                let x = replicate(&mut g, x, n);
                let y_anc = dense_forward(&self.ancillary_ffn, &mut g, &p, x, &spec, &mut masks)?;
                self.combine_graph(&mut g, &p, y_main, y_anc)?
            }
        };
        Ok(g.value(out).data().to_vec())
    }

    fn check_window(&self, t: &Tensor, cols: usize, what: &'static str) -> Result<()> {
        let expected = [self.config.lookback, cols];
        if t.shape() != expected {
            return Err(Error::dim(what, &expected, t.shape()));
        }
        Ok(())
    }

    fn single(&self, window: &Tensor, anc: &Tensor) -> Result<Batch> {
        let c = &self.config;
        Batch::from_slices(
            &[window.data()],
            &[anc.data()],
            c.lookback,
            c.main_features,
            c.ancillary_features,
            self.uses_ancillary_lstm(),
        )
    }

    /// `ŷ_main` for one normalized `[L × m]` window.
    pub fn forward_main(&self, window: &Tensor) -> Result<Tensor> {
        self.check_window(window, self.config.main_features, "forward_main")?;
        let anc = Tensor::zeros(&[self.config.lookback, self.config.ancillary_features]);
        let batch = self.single(window, &anc)?;
        let mut g = Graph::new();
        let p = self.store.bind(&mut g);
        let y = self.main_graph(&mut g, &p, &batch, &DropoutSpec::off(), &mut MaskSource::None)?;
        Ok(Tensor::from_parts(vec![self.config.horizon], g.value(y).data().to_vec()))
    }

    /// `ŷ_anc` for one `[L × k]` indicator window; entries must be 0 or 1.
    pub fn forward_ancillary(&self, anc: &Tensor) -> Result<Tensor> {
        self.check_window(anc, self.config.ancillary_features, "forward_ancillary")?;
        validate_indicators(anc.data())?;
        let window = Tensor::zeros(&[self.config.lookback, self.config.main_features]);
        let batch = self.single(&window, anc)?;
        let mut g = Graph::new();
        let p = self.store.bind(&mut g);
        let y = self.ancillary_graph(&mut g, &p, &batch, &DropoutSpec::off(), &mut MaskSource::None)?;
        Ok(Tensor::from_parts(vec![self.config.horizon], g.value(y).data().to_vec()))
    }

    pub fn combine(&self, y_main: &Tensor, y_anc: &Tensor) -> Result<Tensor> {
        if y_main.shape() != y_anc.shape() {
            return Err(Error::dim("combine", y_main.shape(), y_anc.shape()));
        }
        let h = y_main.len();
        if self.config.combiner_len() != 1 && self.config.combiner_len() != h {
            return Err(Error::dim("combine", &[self.config.combiner_len()], &[h]));
        }
        let mut g = Graph::new();
        let p = self.store.bind(&mut g);
        let a = g.constant(Tensor::from_parts(vec![1, h], y_main.data().to_vec()));
        let b = g.constant(Tensor::from_parts(vec![1, h], y_anc.data().to_vec()));
        let y = self.combine_graph(&mut g, &p, a, b)?;
        Ok(Tensor::from_parts(vec![h], g.value(y).data().to_vec()))
    }

    /// Point forecast with dropout off.
    pub fn predict(&self, window: &Tensor, anc: &Tensor) -> Result<Tensor> {
        let y_main = self.forward_main(window)?;
        let y_anc = self.forward_ancillary(anc)?;
        self.combine(&y_main, &y_anc)
    }
}

fn replicate(g: &mut Graph, v: Var, n: usize) -> Var {
    let row = g.value(v).data().to_vec();
    let cols = row.len();
    g.constant(Tensor::from_parts(vec![n, cols], row.repeat(n)))
}

pub fn validate_indicators(values: &[f64]) -> Result<()> {
    match values.iter().position(|&v| v != 0.0 && v != 1.0) {
        Some(i) => Err(Error::Validation(format!(
            "ancillary indicator {} at flat index {i} is not 0 or 1",
            values[i]
        ))),
        None => Ok(()),
    }
}

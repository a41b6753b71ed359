use std::f64::consts::PI;
use std::sync::Arc;

use chrono::{Datelike, NaiveDateTime, Timelike};

use crate::data::series::RawSeries;
use crate::error::{Error, Result};

/// Model input columns derived from a raw series: the lagged target, the raw
/// main features, a sin/cos time-of-day pair and a day-of-week one-hot.
pub fn feature_names(series: &RawSeries) -> Vec<String> {
    let mut names = vec![format!("{}_lag", series.schema.target)];
    names.extend(series.schema.main.iter().cloned());
    names.push("tod_sin".into());
    names.push("tod_cos".into());
    names.extend(
        ["mon", "tue", "wed", "thu", "fri", "sat", "sun"]
            .iter()
            .map(|d| format!("dow_{d}")),
    );
    names
}

fn time_encoding(ts: &NaiveDateTime) -> [f64; 9] {
    let minutes = f64::from(ts.hour() * 60 + ts.minute());
    let angle = 2.0 * PI * minutes / 1440.0;
    let mut out = [0.0; 9];
    out[0] = angle.sin();
    out[1] = angle.cos();
    out[2 + ts.weekday().num_days_from_monday() as usize] = 1.0;
    out
}

/// Raw `[T × m]` model input matrix in [`feature_names`] order.
pub fn feature_rows(series: &RawSeries) -> Vec<f64> {
    let m = 1 + series.schema.main.len() + 9;
    let mut features = Vec::with_capacity(series.len() * m);
    for i in 0..series.len() {
        features.push(series.target[i]);
        features.extend_from_slice(series.main_row(i));
        features.extend_from_slice(&time_encoding(&series.timestamps[i]));
    }
    features
}

/// Sliding windows over one series, stored as start offsets into shared matrices.
///
/// Window `i` with start `s` reads inputs from rows `s..s+L`, targets from
/// `s+L..s+L+H`, and calendar indicators from `s+H..s+H+L`, i.e. the
/// `L` rows ending on the final forecast step.
#[derive(Debug, Clone)]
pub struct WindowedDataset {
    pub lookback: usize,
    pub horizon: usize,
    pub feature_names: Arc<Vec<String>>,
    pub ancillary_names: Arc<Vec<String>>,
    timestamps: Arc<Vec<NaiveDateTime>>,
    features: Arc<Vec<f64>>,
    ancillary: Arc<Vec<f64>>,
    targets: Arc<Vec<f64>>,
    starts: Vec<usize>,
}

/// Builds all `T - L - H + 1` stride-1 windows.
pub fn window(series: &RawSeries, lookback: usize, horizon: usize) -> Result<WindowedDataset> {
    if lookback == 0 || horizon == 0 {
        return Err(Error::Domain("lookback and horizon must be positive".into()));
    }
    let t = series.len();
    if t < lookback + horizon {
        return Err(Error::Domain(format!(
            "series of length {t} too short: need at least {} (lookback {lookback} + horizon {horizon})",
            lookback + horizon
        )));
    }
    Ok(WindowedDataset {
        lookback,
        horizon,
        feature_names: Arc::new(feature_names(series)),
        ancillary_names: Arc::new(series.schema.ancillary.clone()),
        timestamps: Arc::new(series.timestamps.clone()),
        features: Arc::new(feature_rows(series)),
        ancillary: Arc::new(series.ancillary.clone()),
        targets: Arc::new(series.target.clone()),
        starts: (0..=t - lookback - horizon).collect(),
    })
}

impl WindowedDataset {
    pub fn len(&self) -> usize {
        self.starts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_ancillary(&self) -> usize {
        self.ancillary_names.len()
    }

    /// Length of the underlying series.
    pub fn series_len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn starts(&self) -> &[usize] {
        &self.starts
    }

    pub fn start(&self, i: usize) -> usize {
        self.starts[i]
    }

    /// `[L × m]` input block, row-major.
    pub fn input(&self, i: usize) -> &[f64] {
        let (s, m) = (self.starts[i], self.n_features());
        &self.features[s * m..(s + self.lookback) * m]
    }

    /// `[L × k]` calendar indicator block.
    pub fn ancillary_window(&self, i: usize) -> &[f64] {
        let (s, k) = (self.starts[i] + self.horizon, self.n_ancillary());
        &self.ancillary[s * k..(s + self.lookback) * k]
    }

    /// `[H]` ground truth in °F.
    pub fn target(&self, i: usize) -> &[f64] {
        let s = self.starts[i] + self.lookback;
        &self.targets[s..s + self.horizon]
    }

    /// Series row of the first target step.
    pub fn target_row(&self, i: usize) -> usize {
        self.starts[i] + self.lookback
    }

    pub fn timestamp(&self, row: usize) -> NaiveDateTime {
        self.timestamps[row]
    }

    pub fn input_timestamps(&self, i: usize) -> &[NaiveDateTime] {
        let s = self.starts[i];
        &self.timestamps[s..s + self.lookback]
    }

    pub fn target_timestamps(&self, i: usize) -> &[NaiveDateTime] {
        let s = self.target_row(i);
        &self.timestamps[s..s + self.horizon]
    }

    /// Rows touched by window `i`: inputs, targets and indicators.
    pub fn span(&self, i: usize) -> std::ops::Range<usize> {
        self.starts[i]..self.starts[i] + self.lookback + self.horizon
    }

    /// Raw `[T × m]` feature matrix.
    pub fn feature_matrix(&self) -> &[f64] {
        &self.features
    }

    pub fn series_targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn timestamps(&self) -> &[NaiveDateTime] {
        &self.timestamps
    }

    /// Same windows restricted to `starts`.
    pub fn subset(&self, starts: Vec<usize>) -> Self {
        Self {
            starts,
            ..self.clone()
        }
    }

    /// Same windows over a replaced feature matrix of identical layout.
    pub fn with_features(&self, features: Vec<f64>) -> Result<Self> {
        if features.len() != self.features.len() {
            return Err(Error::dim("with_features", &[self.features.len()], &[features.len()]));
        }
        Ok(Self {
            features: Arc::new(features),
            ..self.clone()
        })
    }

    /// Stable digest of window boundaries and ground truth, used to match reports.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update((self.lookback as u64).to_le_bytes());
        h.update((self.horizon as u64).to_le_bytes());
        for &s in &self.starts {
            h.update((s as u64).to_le_bytes());
            h.update(self.timestamps[s].and_utc().timestamp().to_le_bytes());
        }
        if let (Some(&first), Some(&last)) = (self.starts.first(), self.starts.last()) {
            for v in &self.targets[first + self.lookback..last + self.lookback + self.horizon] {
                h.update(v.to_le_bytes());
            }
        }
        let bytes = h.finalize();
        bytes.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth::{generate_synthetic, SynthConfig};

    fn series(days: usize) -> RawSeries {
        generate_synthetic(&SynthConfig {
            days,
            seed: 1,
            ..SynthConfig::default()
        })
        .unwrap()
    }

    fn truncated(s: &RawSeries, n: usize) -> RawSeries {
        let (m, k) = (s.schema.main.len(), s.schema.ancillary.len());
        RawSeries {
            schema: s.schema.clone(),
            timestamps: s.timestamps[..n].to_vec(),
            main: s.main[..n * m].to_vec(),
            ancillary: s.ancillary[..n * k].to_vec(),
            target: s.target[..n].to_vec(),
            imputed: vec![],
        }
    }

    #[test]
    fn window_count_formula() {
        let s = truncated(&series(3), 200);
        assert_eq!(window(&s, 96, 96).unwrap().len(), 9);
    }

    #[test]
    fn degenerate_single_step() {
        let s = truncated(&series(2), 3);
        let ds = window(&s, 1, 1).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.target(0), &[s.target[1]]);
        assert_eq!(ds.target(1), &[s.target[2]]);
    }

    #[test]
    fn too_short_names_minimum() {
        let s = truncated(&series(2), 100);
        let err = window(&s, 96, 96).unwrap_err().to_string();
        assert!(err.contains("192"), "{err}");
    }

    #[test]
    fn no_leakage_exhaustive() {
        let ds = window(&series(4), 48, 24).unwrap();
        for i in 0..ds.len() {
            let last_in = *ds.input_timestamps(i).last().unwrap();
            let first_target = ds.target_timestamps(i)[0];
            assert!(last_in < first_target);
            // lagged target column only ever holds past values
            let m = ds.n_features();
            let lag_last = ds.input(i)[(ds.lookback - 1) * m];
            assert_eq!(lag_last, ds.series_targets()[ds.target_row(i) - 1]);
        }
    }

    #[test]
    fn windowing_is_pure() {
        let s = series(3);
        let a = window(&s, 24, 12).unwrap();
        let b = window(&s, 24, 12).unwrap();
        assert_eq!(a.feature_matrix(), b.feature_matrix());
        assert_eq!(a.starts(), b.starts());
        assert_eq!(a.digest(), b.digest());
    }

    #[test]
    fn ancillary_window_ends_on_last_target() {
        let s = series(3);
        let ds = window(&s, 8, 4).unwrap();
        let k = ds.n_ancillary();
        let anc = ds.ancillary_window(5);
        assert_eq!(anc.len(), 8 * k);
        let last_target_row = ds.target_row(5) + 3;
        assert_eq!(&anc[7 * k..], s.ancillary_row(last_target_row));
    }
}

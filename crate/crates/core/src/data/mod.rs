//! Series schema, CSV ingestion, synthetic generation, windowing and splits.

pub mod csv_io;
pub mod normalize;
pub mod series;
pub mod split;
pub mod synth;
pub mod window;

pub use csv_io::{export_csv, ingest_csv, parse_csv, to_csv_string};
pub use normalize::{Normalizer, TargetScaler};
pub use series::{GapPolicy, RawSeries, Schema, STEPS_PER_DAY};
pub use split::{split, split_counts, SplitCounts, SplitSpec, Splits};
pub use synth::{calendar_indicators, generate_synthetic, parse_holidays, read_holidays, us_federal_holidays, Holiday, HolidayKind, SynthConfig};
pub use window::{feature_names, feature_rows, window, WindowedDataset};

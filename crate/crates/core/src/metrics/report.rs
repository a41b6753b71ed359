use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::evaluate::{EvalMode, EvaluationReport, PeriodMetrics, REPORT_FORMAT, REPORT_VERSION};

/// One metric of an adjoint-vs-plain comparison; lower is better for all.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub metric: String,
    pub adjoint: f64,
    pub plain: f64,
    /// `adjoint - plain`.
    pub delta: f64,
    pub adjoint_better: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub mode: EvalMode,
    pub split_digest: String,
    pub adjoint_tag: String,
    pub plain_tag: String,
    pub rows: Vec<ComparisonRow>,
}

impl Comparison {
    pub fn row(&self, metric: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.metric == metric)
    }
}

/// `(name, value)` for every compared metric of a period.
pub fn metric_values(m: &PeriodMetrics) -> Vec<(&'static str, f64)> {
    let mut v = vec![
        ("rmse", m.all.rmse),
        ("mae", m.all.mae),
        ("mape", m.all.mape),
    ];
    if let Some(e) = &m.extremum {
        v.extend([
            ("extremum_rmse", e.rmse),
            ("extremum_mae", e.mae),
            ("extremum_mape", e.mape),
        ]);
    }
    v.extend([
        ("non_coverage_68", m.non_coverage_68),
        ("non_coverage_95", m.non_coverage_95),
    ]);
    v
}

/// Side-by-side overall metrics of two reports on the same test windows.
pub fn compare(adjoint: &EvaluationReport, plain: &EvaluationReport) -> Result<Comparison> {
    if adjoint.split_digest != plain.split_digest {
        return Err(Error::Contract(format!(
            "reports come from different test splits ({} vs {})",
            adjoint.split_digest, plain.split_digest
        )));
    }
    if adjoint.mode != plain.mode {
        return Err(Error::Contract(format!(
            "cannot compare a {} report with a {} report",
            adjoint.mode.name(),
            plain.mode.name()
        )));
    }
    let a = metric_values(&adjoint.overall);
    let p = metric_values(&plain.overall);
    let rows = a
        .iter()
        .filter_map(|&(name, av)| {
            p.iter().find(|(n, _)| *n == name).map(|&(_, pv)| ComparisonRow {
                metric: name.into(),
                adjoint: av,
                plain: pv,
                delta: av - pv,
                adjoint_better: av < pv,
            })
        })
        .collect();
    Ok(Comparison {
        mode: adjoint.mode,
        split_digest: adjoint.split_digest.clone(),
        adjoint_tag: adjoint.model_tag.clone(),
        plain_tag: plain.model_tag.clone(),
        rows,
    })
}

fn pretty<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

impl EvaluationReport {
    pub fn to_json(&self) -> Result<String> {
        pretty(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(text)?;
        if r.format != REPORT_FORMAT || r.version != REPORT_VERSION {
            return Err(Error::Validation(format!(
                "unsupported report {} v{}",
                r.format, r.version
            )));
        }
        Ok(r)
    }
}

impl Comparison {
    pub fn to_json(&self) -> Result<String> {
        pretty(self)
    }
}

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| Error::Format {
        row: 0,
        message: e.to_string(),
    };
    w.write_record(header).map_err(fail)?;
    for r in rows {
        w.write_record(&r).map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format {
        row: 0,
        message: e.to_string(),
    })?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Monthly and overall metrics, one row per period.
pub fn monthly_csv(reports: &[&EvaluationReport]) -> Result<String> {
    let header = [
        "model", "mode", "period", "count", "rmse", "mae", "mape", "extremum_rmse", "extremum_mae",
        "extremum_mape", "non_coverage_68", "non_coverage_95",
    ];
    let rows = reports.iter().flat_map(|r| {
        r.months.iter().chain(std::iter::once(&r.overall)).map(|m| {
            vec![
                r.model_tag.clone(),
                r.mode.name().to_string(),
                m.period.clone(),
                m.all.count.to_string(),
                m.all.rmse.to_string(),
                m.all.mae.to_string(),
                m.all.mape.to_string(),
                opt(m.extremum.map(|e| e.rmse)),
                opt(m.extremum.map(|e| e.mae)),
                opt(m.extremum.map(|e| e.mape)),
                m.non_coverage_68.to_string(),
                m.non_coverage_95.to_string(),
            ]
        })
    });
    csv_string(&header, rows)
}

/// Per-horizon-step errors and non-coverage of multi-step reports.
pub fn coverage_csv(reports: &[&EvaluationReport]) -> Result<String> {
    let header = ["model", "step", "rmse", "mae", "non_coverage_68", "non_coverage_95"];
    let rows = reports.iter().flat_map(|r| {
        r.steps.iter().map(|s| {
            vec![
                r.model_tag.clone(),
                s.step.to_string(),
                s.rmse.to_string(),
                s.mae.to_string(),
                s.non_coverage_68.to_string(),
                s.non_coverage_95.to_string(),
            ]
        })
    });
    csv_string(&header, rows)
}

/// Comparison tables, one row per (mode, metric).
pub fn comparison_csv(tables: &[&Comparison]) -> Result<String> {
    let header = ["mode", "metric", "adjoint", "plain", "delta", "adjoint_better"];
    let rows = tables.iter().flat_map(|c| {
        c.rows.iter().map(|r| {
            vec![
                c.mode.name().to_string(),
                r.metric.clone(),
                r.adjoint.to_string(),
                r.plain.to_string(),
                r.delta.to_string(),
                r.adjoint_better.to_string(),
            ]
        })
    });
    csv_string(&header, rows)
}

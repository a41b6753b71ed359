use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::data::STEPS_PER_DAY;
use crate::error::{Error, Result};
use crate::metrics::errors::{ErrorAccum, ErrorStats};

/// Steps on each side of a daily extremum.
pub const EXTREMUM_RADIUS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtremumKind {
    Max,
    Min,
}

/// Timestamps within two steps of a day's ground-truth maximum or minimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremumWindow {
    pub date: NaiveDate,
    pub kind: ExtremumKind,
    pub center: NaiveDateTime,
    /// Indices into the series the window was found in, clipped to the day.
    pub members: Vec<usize>,
    /// The day has fewer than a full day of steps in the series.
    pub partial: bool,
}

/// One max and one min window per calendar day of `truth`.
///
/// Ties go to the earliest timestamp.
pub fn extremum_windows(timestamps: &[NaiveDateTime], truth: &[f64]) -> Result<Vec<ExtremumWindow>> {
    if timestamps.len() != truth.len() {
        return Err(Error::dim("extremum_windows", &[timestamps.len()], &[truth.len()]));
    }
    let mut out = Vec::new();
    let mut start = 0;
    while start < timestamps.len() {
        let date = timestamps[start].date();
        let end = start
            + timestamps[start..]
                .iter()
                .take_while(|t| t.date() == date)
                .count();
        let day = &truth[start..end];
        let mut imax = 0;
        let mut imin = 0;
        for (i, &v) in day.iter().enumerate() {
            if v > day[imax] {
                imax = i;
            }
            if v < day[imin] {
                imin = i;
            }
        }
        for (kind, idx) in [(ExtremumKind::Max, imax), (ExtremumKind::Min, imin)] {
            let c = start + idx;
            let lo = c.saturating_sub(EXTREMUM_RADIUS).max(start);
            let hi = (c + EXTREMUM_RADIUS).min(end - 1);
            out.push(ExtremumWindow {
                date,
                kind,
                center: timestamps[c],
                members: (lo..=hi).collect(),
                partial: end - start < STEPS_PER_DAY,
            });
        }
        start = end;
    }
    Ok(out)
}

/// Sorted, de-duplicated member indices of all windows.
pub fn window_members(windows: &[ExtremumWindow]) -> Vec<usize> {
    let mut idx: Vec<usize> = windows.iter().flat_map(|w| w.members.iter().copied()).collect();
    idx.sort_unstable();
    idx.dedup();
    idx
}

/// Errors restricted to the union of window members.
pub fn error_extremum(pred: &[f64], truth: &[f64], windows: &[ExtremumWindow]) -> Result<ErrorStats> {
    if pred.len() != truth.len() {
        return Err(Error::dim("error_extremum", &[truth.len()], &[pred.len()]));
    }
    let members = window_members(windows);
    if members.is_empty() {
        return Err(Error::Domain("no extremum window members".into()));
    }
    let mut acc = ErrorAccum::default();
    for &i in &members {
        if i >= truth.len() {
            return Err(Error::dim("error_extremum", &[truth.len()], &[i + 1]));
        }
        acc.add(pred[i], truth[i]);
    }
    acc.finish()
}

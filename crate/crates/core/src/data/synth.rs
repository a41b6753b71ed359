//! Synthetic office-building climate generator.
//!
//! Indoor temperature follows an HVAC schedule: warm overnight while the
//! plant is off, cooler through the occupied day. Weekends and holidays add
//! a constant offset to every step of the day. Every stochastic term is
//! proportional to `noise_sigma`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use chrono::{Datelike, NaiveDate, NaiveDateTime, TimeDelta, Weekday};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::series::{step, RawSeries, Schema, STEPS_PER_DAY};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HolidayKind {
    Major,
    Minor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Holiday {
    pub date: NaiveDate,
    pub kind: HolidayKind,
}

/// Parses `YYYY-MM-DD,major|minor` lines; blank lines and `#` comments are skipped.
pub fn parse_holidays(text: &str) -> Result<Vec<Holiday>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |msg: String| Error::Format { row: i + 1, message: msg };
        let (date, kind) = line
            .split_once(',')
            .ok_or_else(|| bad(format!("expected `date,kind`, got `{line}`")))?;
        let date = NaiveDate::parse_from_str(date.trim(), "%Y-%m-%d")
            .map_err(|e| bad(format!("bad date `{date}`: {e}")))?;
        let kind = match kind.trim() {
            "major" => HolidayKind::Major,
            "minor" => HolidayKind::Minor,
            other => return Err(bad(format!("unknown holiday kind `{other}`"))),
        };
        out.push(Holiday { date, kind });
    }
    Ok(out)
}

pub fn read_holidays(path: &Path) -> Result<Vec<Holiday>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_holidays(&text)
}

pub fn format_holidays(holidays: &[Holiday]) -> String {
    holidays
        .iter()
        .map(|h| {
            let kind = match h.kind {
                HolidayKind::Major => "major",
                HolidayKind::Minor => "minor",
            };
            format!("{},{kind}\n", h.date.format("%Y-%m-%d"))
        })
        .collect()
}

fn nth_weekday(year: i32, month: u32, wd: Weekday, n: u8) -> NaiveDate {
    NaiveDate::from_weekday_of_month_opt(year, month, wd, n).expect("valid weekday of month")
}

fn last_weekday(year: i32, month: u32, wd: Weekday) -> NaiveDate {
    let mut d = nth_weekday(year, month, wd, 4);
    while let Some(next) = d.checked_add_signed(TimeDelta::days(7)) {
        if next.month() != month {
            break;
        }
        d = next;
    }
    d
}

/// US federal holidays for every year touched by `[start, start + days)`.
pub fn us_federal_holidays(start: NaiveDate, days: usize) -> Vec<Holiday> {
    let end = start + TimeDelta::days(days as i64);
    let mut out = Vec::new();
    for y in start.year()..=end.year() {
        let d = |m, day| NaiveDate::from_ymd_opt(y, m, day).unwrap();
        let list = [
            (d(1, 1), HolidayKind::Major),
            (nth_weekday(y, 1, Weekday::Mon, 3), HolidayKind::Minor),
            (nth_weekday(y, 2, Weekday::Mon, 3), HolidayKind::Minor),
            (last_weekday(y, 5, Weekday::Mon), HolidayKind::Major),
            (d(7, 4), HolidayKind::Major),
            (nth_weekday(y, 9, Weekday::Mon, 1), HolidayKind::Major),
            (nth_weekday(y, 10, Weekday::Mon, 2), HolidayKind::Minor),
            (d(11, 11), HolidayKind::Minor),
            (nth_weekday(y, 11, Weekday::Thu, 4), HolidayKind::Major),
            (d(12, 25), HolidayKind::Major),
        ];
        out.extend(
            list.into_iter()
                .filter(|(date, _)| *date >= start && *date < end)
                .map(|(date, kind)| Holiday { date, kind }),
        );
    }
    out.sort_by_key(|h| h.date);
    out
}

/// `is_weekend, is_major_holiday, is_minor_holiday` for each timestamp.
pub fn calendar_indicators(timestamps: &[NaiveDateTime], holidays: &[Holiday]) -> Vec<f64> {
    let kinds: BTreeMap<NaiveDate, HolidayKind> = holidays.iter().map(|h| (h.date, h.kind)).collect();
    timestamps
        .iter()
        .flat_map(|ts| {
            let date = ts.date();
            let holiday = kinds.get(&date).copied();
            [
                f64::from(matches!(date.weekday(), Weekday::Sat | Weekday::Sun)),
                f64::from(holiday == Some(HolidayKind::Major)),
                f64::from(holiday == Some(HolidayKind::Minor)),
            ]
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub start: NaiveDate,
    pub days: usize,
    pub seed: u64,
    pub holidays: Vec<Holiday>,
    /// Scale of every random term (indoor noise std in °F).
    pub noise_sigma: f64,
    /// Weather anomaly innovation std as a multiple of `noise_sigma`.
    pub weather_noise_ratio: f64,
    pub base_temp: f64,
    /// Overnight rise above the cooled daytime level.
    pub night_rise: f64,
    /// Constant offsets added to every step of a non-working day.
    pub weekend_offset: f64,
    pub major_holiday_offset: f64,
    pub minor_holiday_offset: f64,
    /// °F indoor per °F of outdoor deviation from 65.
    pub weather_coupling: f64,
    pub outdoor_mean: f64,
    pub outdoor_daily_amplitude: f64,
    pub peak_occupancy: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            start: NaiveDate::from_ymd_opt(2012, 6, 9).unwrap(),
            days: 160,
            seed: 0,
            holidays: Vec::new(),
            noise_sigma: 0.3,
            weather_noise_ratio: 1.0,
            base_temp: 71.0,
            night_rise: 6.0,
            weekend_offset: 2.5,
            major_holiday_offset: 3.0,
            minor_holiday_offset: 1.5,
            weather_coupling: 0.1,
            outdoor_mean: 72.0,
            outdoor_daily_amplitude: 8.0,
            peak_occupancy: 500.0,
        }
    }
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

/// Cooling intensity in `[0, 1]` at `hour` of a working day.
pub fn hvac_schedule(hour: f64) -> f64 {
    smoothstep((hour - 6.0) / 2.0) * (1.0 - smoothstep((hour - 18.0) / 3.0))
}

fn occupancy_profile(hour: f64) -> f64 {
    smoothstep((hour - 7.5) / 1.5) * (1.0 - smoothstep((hour - 17.0) / 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DayKind {
    Working,
    Weekend,
    Major,
    Minor,
}

/// Generates `96 · days` samples starting at midnight of `cfg.start`.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<RawSeries> {
    if cfg.days < 2 {
        return Err(Error::Domain(format!("need at least 2 days, got {}", cfg.days)));
    }
    if cfg.noise_sigma < 0.0 || !cfg.noise_sigma.is_finite() {
        return Err(Error::Domain(format!("noise sigma {} must be >= 0", cfg.noise_sigma)));
    }
    let holidays: BTreeMap<NaiveDate, HolidayKind> =
        cfg.holidays.iter().map(|h| (h.date, h.kind)).collect();
    let schema = Schema::default();
    let total = cfg.days * STEPS_PER_DAY;

    let schedule: Vec<f64> = (0..STEPS_PER_DAY)
        .map(|s| hvac_schedule(s as f64 * 24.0 / STEPS_PER_DAY as f64))
        .collect();

    let mut noise_rng = rng::stream(cfg.seed, "synth-noise", 0);
    let mut weather_rng = rng::stream(cfg.seed, "synth-weather", 0);
    let normal = |r: &mut rng::Rng| -> f64 { StandardNormal.sample(r) };

    let innov = cfg.noise_sigma * cfg.weather_noise_ratio;
    let (mut temp_anom, mut hum_anom, mut wind_anom, mut press_anom) = (0.0, 0.0, 0.0, 0.0);
    let mut wind_dir: f64 = 200.0;

    let mut series = RawSeries {
        schema: schema.clone(),
        timestamps: Vec::with_capacity(total),
        main: Vec::with_capacity(total * schema.main.len()),
        ancillary: Vec::with_capacity(total * schema.ancillary.len()),
        target: Vec::with_capacity(total),
        imputed: Vec::new(),
    };

    let mut ts: NaiveDateTime = cfg.start.and_hms_opt(0, 0, 0).unwrap();
    for i in 0..total {
        let slot = i % STEPS_PER_DAY;
        let hour = slot as f64 * 24.0 / STEPS_PER_DAY as f64;
        let date = ts.date();
        let weekend = matches!(date.weekday(), Weekday::Sat | Weekday::Sun);
        let holiday = holidays.get(&date).copied();
        let kind = match holiday {
            Some(HolidayKind::Major) => DayKind::Major,
            Some(HolidayKind::Minor) if !weekend => DayKind::Minor,
            _ if weekend => DayKind::Weekend,
            _ => DayKind::Working,
        };
        let offset = match kind {
            DayKind::Working => 0.0,
            DayKind::Weekend => cfg.weekend_offset,
            DayKind::Major => cfg.major_holiday_offset,
            DayKind::Minor => cfg.minor_holiday_offset,
        };
        let occupancy_scale = match kind {
            DayKind::Working => 1.0,
            DayKind::Minor => 0.5,
            DayKind::Weekend | DayKind::Major => 0.05,
        };

        temp_anom = 0.995 * temp_anom + innov * normal(&mut weather_rng);
        hum_anom = 0.99 * hum_anom + 2.0 * innov * normal(&mut weather_rng);
        wind_anom = 0.97 * wind_anom + innov * normal(&mut weather_rng);
        press_anom = 0.998 * press_anom + 0.2 * innov * normal(&mut weather_rng);
        wind_dir = (wind_dir + 5.0 * innov * normal(&mut weather_rng)).rem_euclid(360.0);

        let diurnal = (2.0 * PI * (hour - 9.0) / 24.0).sin();
        let outdoor = cfg.outdoor_mean + cfg.outdoor_daily_amplitude * diurnal + temp_anom;
        let humidity = (65.0 - 15.0 * diurnal + hum_anom).clamp(5.0, 100.0);
        let dew_point = outdoor - (100.0 - humidity) * 9.0 / 25.0;
        let wind_speed = (6.0 + 2.0 * diurnal + wind_anom).max(0.0);
        let pressure = 1013.0 + press_anom;
        let rain = f64::from(humidity > 85.0);
        let fog = f64::from(humidity > 92.0 && hour < 9.0);
        let snow = f64::from(rain == 1.0 && outdoor < 32.0);
        let thunder = f64::from(rain == 1.0 && outdoor > 85.0);
        let hail = f64::from(thunder == 1.0 && wind_speed > 20.0);
        let tornado = 0.0;
        let occupancy = (cfg.peak_occupancy
            * occupancy_scale
            * occupancy_profile(hour)
            * (1.0 + 0.1 * cfg.noise_sigma * normal(&mut noise_rng)))
        .max(0.0);

        let indoor = cfg.base_temp
            + cfg.night_rise * (1.0 - schedule[slot])
            + offset
            + cfg.weather_coupling * (outdoor - 65.0)
            + cfg.noise_sigma * normal(&mut noise_rng);

        series.timestamps.push(ts);
        series.target.push(indoor);
        series.main.extend_from_slice(&[
            outdoor, humidity, dew_point, wind_speed, wind_dir, pressure, fog, rain, snow, hail,
            thunder, tornado, occupancy,
        ]);
        series.ancillary.extend_from_slice(&[
            f64::from(weekend),
            f64::from(holiday == Some(HolidayKind::Major)),
            f64::from(holiday == Some(HolidayKind::Minor)),
        ]);
        ts += step();
    }
    series.validate()?;
    Ok(series)
}

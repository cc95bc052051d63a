//! Session and price files to per-day scenarios.
//!
//! Sessions: header `session_id,arrival,departure,energy_kwh`, ISO-8601
//! timestamps. Prices: header `date,hour,price`. Columns are looked up by
//! name, so extra columns and any column order are accepted.
//!
//! Step `t` (1-based) covers wall-clock hours `[(t-1) dt, t dt)` of the
//! arrival date. A session occupies steps `floor(arrival / dt) + 1` through
//! `ceil(departure / dt)`, with both times measured in hours from midnight
//! of the arrival date.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    ModelError, Scenario, DEFAULT_CAPACITY_KW, DEFAULT_HORIZON, DEFAULT_SOCKET_KW, DEFAULT_WASTE,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("duplicate price for {date} hour {hour}")]
    DuplicateEntry { date: NaiveDate, hour: u32 },
    #[error("no complete price data for {0}")]
    MissingPrices(NaiveDate),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("scenario for {date}: {source}")]
    Scenario { date: NaiveDate, source: ModelError },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: String,
    pub arrival: NaiveDateTime,
    pub departure: NaiveDateTime,
    pub energy_kwh: f64,
}

/// Hourly prices in currency per kWh.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    prices: BTreeMap<(NaiveDate, u32), f64>,
}

impl PriceSeries {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, date: NaiveDate, hour: u32, price: f64) -> Result<(), IngestError> {
        if hour > 23 {
            return Err(IngestError::Config(format!("hour {hour} outside 0..=23")));
        }
        if self.prices.insert((date, hour), price).is_some() {
            return Err(IngestError::DuplicateEntry { date, hour });
        }
        Ok(())
    }

    pub fn get(&self, date: NaiveDate, hour: u32) -> Option<f64> {
        self.prices.get(&(date, hour)).copied()
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    pub fn dates(&self) -> BTreeSet<NaiveDate> {
        self.prices.keys().map(|(d, _)| *d).collect()
    }

    /// Price at an absolute hour offset from midnight of `date`; offsets of
    /// 24 and above roll into the following days.
    fn at_offset(&self, date: NaiveDate, hour_offset: u64) -> Option<f64> {
        let day = date.checked_add_days(chrono::Days::new(hour_offset / 24))?;
        self.get(day, (hour_offset % 24) as u32)
    }

    /// Time-weighted mean price over `[start, end)` hours from midnight of
    /// `date`. `None` if any hour touched is missing.
    pub fn mean_over(&self, date: NaiveDate, start: f64, end: f64) -> Option<f64> {
        let mut weighted = 0.0;
        let mut h = start.floor();
        while h < end {
            let overlap = (h + 1.0).min(end) - h.max(start);
            if overlap > 0.0 {
                weighted += overlap * self.at_offset(date, h as u64)?;
            }
            h += 1.0;
        }
        Some(weighted / (end - start))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriceUnit {
    PerKwh,
    #[default]
    PerMwh,
}

impl PriceUnit {
    pub fn to_per_kwh(self, price: f64) -> f64 {
        match self {
            PriceUnit::PerKwh => price,
            PriceUnit::PerMwh => price / 1000.0,
        }
    }
}

/// What to do with sessions that leave after the last step of the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MidnightPolicy {
    /// Truncate the window at the last step.
    #[default]
    Clamp,
    /// Exclude the session.
    Drop,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IngestConfig {
    pub horizon_steps: usize,
    pub step_hours: f64,
    pub capacity_kw: f64,
    pub socket_kw: f64,
    pub waste: f64,
    pub price_unit: PriceUnit,
    pub midnight_policy: MidnightPolicy,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            horizon_steps: DEFAULT_HORIZON,
            step_hours: 1.0,
            capacity_kw: DEFAULT_CAPACITY_KW,
            socket_kw: DEFAULT_SOCKET_KW,
            waste: DEFAULT_WASTE,
            price_unit: PriceUnit::PerMwh,
            midnight_policy: MidnightPolicy::Clamp,
        }
    }
}

impl IngestConfig {
    pub fn validate(&self) -> Result<(), IngestError> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(IngestError::Config(format!(
                    "{name} must be positive, got {v}"
                )))
            }
        };
        if self.horizon_steps == 0 {
            return Err(IngestError::Config("horizon_steps must be positive".into()));
        }
        positive("step_hours", self.step_hours)?;
        positive("capacity_kw", self.capacity_kw)?;
        positive("socket_kw", self.socket_kw)?;
        if !(self.waste.is_finite() && self.waste >= 0.0) {
            return Err(IngestError::Config(format!(
                "waste must be nonnegative, got {}",
                self.waste
            )));
        }
        Ok(())
    }
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize, IngestError> {
    headers
        .iter()
        .position(|h| {
            h.trim()
                .trim_start_matches('\u{feff}')
                .eq_ignore_ascii_case(name)
        })
        .ok_or_else(|| IngestError::MissingColumn(name.to_owned()))
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(input)
}

fn field<'r>(
    record: &'r csv::StringRecord,
    idx: usize,
    name: &str,
    line: u64,
) -> Result<&'r str, IngestError> {
    record.get(idx).ok_or_else(|| IngestError::MalformedRow {
        line,
        reason: format!("missing value for `{name}`"),
    })
}

fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

/// Accepts `YYYY-MM-DDTHH:MM[:SS[.f]]`, the same with a space separator, and
/// RFC 3339 timestamps with an offset (the local wall-clock time is kept).
pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    const FORMATS: [&str; 4] = [
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%d %H:%M:%S%.f",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ];
    FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .or_else(|| {
            DateTime::parse_from_rfc3339(s)
                .ok()
                .map(|d| d.naive_local())
        })
}

pub fn parse_sessions<R: Read>(input: R) -> Result<Vec<SessionRecord>, IngestError> {
    let mut rdr = reader(input);
    let headers = rdr
        .headers()
        .map_err(|e| IngestError::MalformedRow {
            line: 1,
            reason: e.to_string(),
        })?
        .clone();
    let id_col = column(&headers, "session_id")?;
    let arr_col = column(&headers, "arrival")?;
    let dep_col = column(&headers, "departure")?;
    let energy_col = column(&headers, "energy_kwh")?;

    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| IngestError::MalformedRow {
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        let line = record_line(&record);
        let bad = |reason: String| IngestError::MalformedRow { line, reason };

        let session_id = field(&record, id_col, "session_id", line)?.to_owned();
        let ts = |idx, name| -> Result<NaiveDateTime, IngestError> {
            let raw = field(&record, idx, name, line)?;
            parse_timestamp(raw).ok_or_else(|| bad(format!("`{name}` is not a timestamp: {raw:?}")))
        };
        let arrival = ts(arr_col, "arrival")?;
        let departure = ts(dep_col, "departure")?;
        let raw_energy = field(&record, energy_col, "energy_kwh", line)?;
        let energy_kwh: f64 = raw_energy
            .parse()
            .map_err(|_| bad(format!("`energy_kwh` is not a number: {raw_energy:?}")))?;

        if departure <= arrival {
            return Err(bad(format!(
                "departure {departure} is not after arrival {arrival}"
            )));
        }
        if !(energy_kwh.is_finite() && energy_kwh >= 0.0) {
            return Err(bad(format!("energy_kwh {energy_kwh} must be nonnegative")));
        }
        out.push(SessionRecord {
            session_id,
            arrival,
            departure,
            energy_kwh,
        });
    }
    Ok(out)
}

pub fn parse_prices<R: Read>(input: R, unit: PriceUnit) -> Result<PriceSeries, IngestError> {
    let mut rdr = reader(input);
    let headers = rdr
        .headers()
        .map_err(|e| IngestError::MalformedRow {
            line: 1,
            reason: e.to_string(),
        })?
        .clone();
    let date_col = column(&headers, "date")?;
    let hour_col = column(&headers, "hour")?;
    let price_col = column(&headers, "price")?;

    let mut series = PriceSeries::new();
    for record in rdr.records() {
        let record = record.map_err(|e| IngestError::MalformedRow {
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        let line = record_line(&record);
        let bad = |reason: String| IngestError::MalformedRow { line, reason };

        let raw_date = field(&record, date_col, "date", line)?;
        let date = NaiveDate::parse_from_str(raw_date, "%Y-%m-%d")
            .map_err(|_| bad(format!("`date` is not YYYY-MM-DD: {raw_date:?}")))?;
        let raw_hour = field(&record, hour_col, "hour", line)?;
        let hour: u32 = raw_hour
            .parse()
            .ok()
            .filter(|h| *h <= 23)
            .ok_or_else(|| bad(format!("`hour` must be an integer in 0..=23: {raw_hour:?}")))?;
        let raw_price = field(&record, price_col, "price", line)?;
        let price: f64 = raw_price
            .parse()
            .ok()
            .filter(|p: &f64| p.is_finite())
            .ok_or_else(|| bad(format!("`price` is not a number: {raw_price:?}")))?;
        series.insert(date, hour, unit.to_per_kwh(price))?;
    }
    Ok(series)
}

/// Hours from midnight of `date` to `ts`.
fn hours_since(date: NaiveDate, ts: NaiveDateTime) -> f64 {
    let midnight = date.and_hms_opt(0, 0, 0).expect("midnight exists");
    (ts - midnight).num_microseconds().unwrap_or(i64::MAX) as f64 / 3.6e9
}

/// 0-based inclusive step window of a session, or `None` when the session
/// does not fit the horizon under `policy`.
pub fn session_window(record: &SessionRecord, cfg: &IngestConfig) -> Option<(usize, usize)> {
    let date = record.arrival.date();
    let a = hours_since(date, record.arrival);
    let d = hours_since(date, record.departure);
    let first = (a / cfg.step_hours).floor() as usize;
    if first >= cfg.horizon_steps {
        return None;
    }
    // last step (1-based) is ceil(d / dt); exact boundaries are not rounded up
    let last_one_based = (d / cfg.step_hours - 1e-9).ceil().max(1.0) as usize;
    let last = if last_one_based > cfg.horizon_steps {
        match cfg.midnight_policy {
            MidnightPolicy::Clamp => cfg.horizon_steps - 1,
            MidnightPolicy::Drop => return None,
        }
    } else {
        last_one_based - 1
    };
    Some((first, last.max(first)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedDay {
    pub date: NaiveDate,
    pub sessions: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestOutcome {
    /// One scenario per day with at least one usable session, by date.
    pub scenarios: Vec<Scenario>,
    pub skipped_days: Vec<SkippedDay>,
    /// Sessions excluded under [`MidnightPolicy::Drop`].
    pub dropped_sessions: usize,
    /// Sessions arriving after the last step of the horizon.
    pub outside_horizon: usize,
    /// Session ids of each scenario's vehicles, in column order.
    pub session_ids: Vec<Vec<String>>,
}

type WindowedSession<'a> = (&'a SessionRecord, (usize, usize));

pub fn build_scenarios(
    sessions: &[SessionRecord],
    prices: &PriceSeries,
    cfg: &IngestConfig,
) -> Result<IngestOutcome, IngestError> {
    cfg.validate()?;
    let mut by_day: BTreeMap<NaiveDate, Vec<WindowedSession>> = BTreeMap::new();
    let mut outcome = IngestOutcome::default();
    for s in sessions {
        match session_window(s, cfg) {
            Some(w) => by_day.entry(s.arrival.date()).or_default().push((s, w)),
            None => {
                let a = hours_since(s.arrival.date(), s.arrival);
                if (a / cfg.step_hours).floor() as usize >= cfg.horizon_steps {
                    outcome.outside_horizon += 1;
                } else {
                    outcome.dropped_sessions += 1;
                }
            }
        }
    }

    let t_max = cfg.horizon_steps;
    for (date, mut day) in by_day {
        day.sort_by(|(x, _), (y, _)| {
            x.arrival
                .cmp(&y.arrival)
                .then_with(|| x.session_id.cmp(&y.session_id))
        });

        let step_prices: Option<Vec<f64>> = (0..t_max)
            .map(|t| {
                let start = t as f64 * cfg.step_hours;
                prices.mean_over(date, start, start + cfg.step_hours)
            })
            .collect();
        let Some(step_prices) = step_prices else {
            outcome.skipped_days.push(SkippedDay {
                date,
                sessions: day.len(),
                reason: IngestError::MissingPrices(date).to_string(),
            });
            continue;
        };

        let n = day.len();
        let mut occupancy = vec![vec![false; n]; t_max];
        for (i, (_, (first, last))) in day.iter().enumerate() {
            for row in &mut occupancy[*first..=*last] {
                row[i] = true;
            }
        }
        let load = day
            .iter()
            .map(|(s, _)| s.energy_kwh / cfg.step_hours)
            .collect();
        let scenario = Scenario::new(
            date.format("%Y-%m-%d").to_string(),
            cfg.step_hours,
            occupancy,
            load,
            vec![cfg.capacity_kw; t_max],
            vec![cfg.socket_kw; t_max],
            vec![cfg.waste; t_max],
            step_prices,
        )
        .map_err(|source| IngestError::Scenario { date, source })?;
        outcome
            .session_ids
            .push(day.iter().map(|(s, _)| s.session_id.clone()).collect());
        outcome.scenarios.push(scenario);
    }
    if outcome.dropped_sessions > 0 {
        log::warn!(
            "{} sessions dropped past the horizon",
            outcome.dropped_sessions
        );
    }
    if outcome.outside_horizon > 0 {
        log::warn!(
            "{} sessions arrive after the horizon",
            outcome.outside_horizon
        );
    }
    for s in &outcome.skipped_days {
        log::warn!("skipping {}: {}", s.date, s.reason);
    }
    Ok(outcome)
}

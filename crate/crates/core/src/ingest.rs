//! Parsing, validation and gap filling for the weather, loading and
//! composition datasets, plus the workday/holiday calendar.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use chrono::{Datelike, NaiveDate, NaiveDateTime, Timelike, Weekday};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::load_shape::LoadComposition;
use crate::HOURS;

/// Lowest plausible ambient temperature, °C.
pub const MIN_TEMP_C: f64 = -60.0;
/// Highest plausible ambient temperature, °C.
pub const MAX_TEMP_C: f64 = 60.0;
/// Allowed deviation of R + C + I from one before renormalization.
pub const COMPOSITION_SUM_TOL: f64 = 1e-6;
/// Default longest run of missing hours that is interpolated.
pub const DEFAULT_MAX_GAP_HOURS: usize = 3;

/// One calendar day of hourly ambient temperature, °C.
#[derive(Debug, Clone, PartialEq)]
pub struct HourlyTemperatureDay {
    pub date: NaiveDate,
    pub temps: [f64; HOURS],
}

impl HourlyTemperatureDay {
    pub fn new(date: NaiveDate, temps: [f64; HOURS]) -> Result<Self> {
        for (hour, t) in temps.iter().enumerate() {
            check_temp(*t).map_err(|msg| {
                Error::InvalidInput(format!("{date} hour {hour}: {msg}"))
            })?;
        }
        Ok(Self { date, temps })
    }

    pub fn mean(&self) -> f64 {
        self.temps.iter().sum::<f64>() / HOURS as f64
    }
}

/// A day of weather readings that may still have missing hours.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialDay {
    pub date: NaiveDate,
    pub temps: [Option<f64>; HOURS],
}

impl PartialDay {
    pub fn is_complete(&self) -> bool {
        self.temps.iter().all(Option::is_some)
    }
}

impl From<&HourlyTemperatureDay> for PartialDay {
    fn from(day: &HourlyTemperatureDay) -> Self {
        PartialDay {
            date: day.date,
            temps: day.temps.map(Some),
        }
    }
}

/// One transformer's loading on one day.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformerDayObservation {
    pub transformer_id: String,
    pub date: NaiveDate,
    pub loads: [f64; HOURS],
    pub composition: LoadComposition,
}

impl TransformerDayObservation {
    pub fn new(
        transformer_id: impl Into<String>,
        date: NaiveDate,
        loads: [f64; HOURS],
        composition: LoadComposition,
    ) -> Result<Self> {
        let transformer_id = transformer_id.into();
        if let Some(bad) = loads.iter().find(|l| !l.is_finite() || **l < 0.0) {
            return Err(Error::InvalidInput(format!(
                "transformer {transformer_id} on {date}: load {bad} is not a finite non-negative MVA"
            )));
        }
        if !loads.iter().any(|l| *l > 0.0) {
            return Err(Error::InvalidInput(format!(
                "transformer {transformer_id} on {date}: all 24 loads are zero"
            )));
        }
        Ok(Self {
            transformer_id,
            date,
            loads,
            composition,
        })
    }

    pub fn peak(&self) -> f64 {
        self.loads.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DayType {
    Workday,
    Holiday,
}

/// Designated holidays. Weekends are holidays by rule and need not be listed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HolidayCalendar {
    pub dates: BTreeSet<NaiveDate>,
}

impl HolidayCalendar {
    pub fn new(dates: impl IntoIterator<Item = NaiveDate>) -> Self {
        Self {
            dates: dates.into_iter().collect(),
        }
    }

    /// Reads one `YYYY-MM-DD` per line. Blank lines and `#` comments are skipped.
    pub fn parse<R: Read>(mut reader: R, source_name: &str) -> Result<Self> {
        let mut text = String::new();
        reader.read_to_string(&mut text)?;
        let mut dates = BTreeSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let date = NaiveDate::parse_from_str(line, "%Y-%m-%d").map_err(|e| {
                Error::parse(source_name, idx as u64 + 1, format!("bad date {line:?}: {e}"))
            })?;
            dates.insert(date);
        }
        Ok(Self { dates })
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.dates.contains(&date)
    }
}

pub fn classify_day(date: NaiveDate, cal: &HolidayCalendar) -> DayType {
    match date.weekday() {
        Weekday::Sat | Weekday::Sun => DayType::Holiday,
        _ if cal.contains(date) => DayType::Holiday,
        _ => DayType::Workday,
    }
}

pub fn is_leap_day(date: NaiveDate) -> bool {
    date.month() == 2 && date.day() == 29
}

/// Position of `date` in a 365-day year (Jan 1 = 1, Dec 31 = 365), or `None`
/// for Feb 29.
pub fn day_of_year(date: NaiveDate) -> Option<usize> {
    if is_leap_day(date) {
        return None;
    }
    NaiveDate::from_ymd_opt(2001, date.month(), date.day()).map(|d| d.ordinal() as usize)
}

/// Calendar date of day index `d` (1..=365) in `year`, skipping Feb 29.
pub fn date_for_day_index(year: i32, d: usize) -> Option<NaiveDate> {
    if !(1..=crate::DAYS_PER_YEAR).contains(&d) {
        return None;
    }
    let template = NaiveDate::from_yo_opt(2001, d as u32)?;
    NaiveDate::from_ymd_opt(year, template.month(), template.day())
}

fn check_temp(t: f64) -> std::result::Result<(), String> {
    if !t.is_finite() {
        return Err(format!("temperature {t} is not finite"));
    }
    if !(MIN_TEMP_C..=MAX_TEMP_C).contains(&t) {
        return Err(format!(
            "temperature {t} °C outside [{MIN_TEMP_C}, {MAX_TEMP_C}]"
        ));
    }
    Ok(())
}

fn parse_timestamp(raw: &str) -> std::result::Result<NaiveDateTime, String> {
    let ts = NaiveDateTime::parse_from_str(raw.trim(), "%Y-%m-%dT%H:%M")
        .map_err(|e| format!("bad timestamp {raw:?}: {e}"))?;
    if ts.minute() != 0 {
        return Err(format!("timestamp {raw:?} is not on the hour"));
    }
    Ok(ts)
}

fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

fn check_header(reader: &mut csv::Reader<impl Read>, expected: &[&str], source: &str) -> Result<()> {
    let header = reader.headers()?;
    let got: Vec<&str> = header.iter().map(str::trim).collect();
    if got != expected {
        return Err(Error::parse(
            source,
            1,
            format!("expected header {:?}, found {:?}", expected.join(","), got.join(",")),
        ));
    }
    Ok(())
}

fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader)
}

/// Parses a `timestamp,temp_c` weather file into per-date hour slots.
///
/// An empty `temp_c` field marks a missing hour. Feb 29 rows are dropped.
pub fn parse_weather_records<R: Read>(reader: R, source_name: &str) -> Result<Vec<PartialDay>> {
    let mut rdr = csv_reader(reader);
    check_header(&mut rdr, &["timestamp", "temp_c"], source_name)?;

    let mut days: BTreeMap<NaiveDate, [Option<f64>; HOURS]> = BTreeMap::new();
    let mut seen: BTreeSet<NaiveDateTime> = BTreeSet::new();
    for record in rdr.records() {
        let record = record?;
        let line = record_line(&record);
        if record.len() != 2 {
            return Err(Error::parse(
                source_name,
                line,
                format!("expected 2 fields, found {}", record.len()),
            ));
        }
        let ts = parse_timestamp(&record[0]).map_err(|m| Error::parse(source_name, line, m))?;
        if !seen.insert(ts) {
            return Err(Error::parse(
                source_name,
                line,
                format!("duplicate reading for {}", ts.format("%Y-%m-%dT%H:00")),
            ));
        }
        let date = ts.date();
        if is_leap_day(date) {
            continue;
        }
        let raw = record[1].trim();
        let value = if raw.is_empty() {
            None
        } else {
            let t: f64 = raw
                .parse()
                .map_err(|_| Error::parse(source_name, line, format!("non-numeric temperature {raw:?}")))?;
            check_temp(t).map_err(|m| Error::parse(source_name, line, m))?;
            Some(t)
        };
        days.entry(date).or_insert([None; HOURS])[ts.hour() as usize] = value;
    }

    Ok(days
        .into_iter()
        .map(|(date, temps)| PartialDay { date, temps })
        .collect())
}

/// Parses a weather file, keeping only dates with all 24 hours present.
pub fn parse_weather_csv<R: Read>(reader: R, source_name: &str) -> Result<Vec<HourlyTemperatureDay>> {
    let partial = parse_weather_records(reader, source_name)?;
    let mut out = Vec::with_capacity(partial.len());
    for day in partial {
        if day.is_complete() {
            out.push(HourlyTemperatureDay {
                date: day.date,
                temps: day.temps.map(|t| t.unwrap_or_default()),
            });
        } else {
            log::warn!("{source_name}: {} has missing hours, skipped", day.date);
        }
    }
    Ok(out)
}

pub fn write_weather_csv<W: Write>(writer: W, days: &[HourlyTemperatureDay]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["timestamp", "temp_c"])?;
    for day in days {
        for (hour, t) in day.temps.iter().enumerate() {
            wtr.write_record([
                format!("{}T{hour:02}:00", day.date.format("%Y-%m-%d")),
                t.to_string(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Result of [`fill_gaps`]: the usable days and the dates that were dropped.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GapFillReport {
    pub days: Vec<HourlyTemperatureDay>,
    pub removed: Vec<NaiveDate>,
}

/// Linearly interpolates runs of at most `max_gap_hours` missing hours.
///
/// The series is treated as continuous across consecutive dates, so a gap
/// spanning midnight is bridged from the neighbouring days. Days touched by a
/// longer run, or by a run without a reading on both sides, are removed.
pub fn fill_gaps(days: &[PartialDay], max_gap_hours: usize) -> GapFillReport {
    let mut sorted: Vec<&PartialDay> = days.iter().collect();
    sorted.sort_by_key(|d| d.date);

    // Flatten into one hourly timeline; absent dates inside the range become
    // 24-hour holes so interpolation never bridges a missing day.
    let mut timeline: Vec<Option<f64>> = Vec::new();
    let mut owner: Vec<Option<usize>> = Vec::new();
    let mut prev: Option<NaiveDate> = None;
    for (idx, day) in sorted.iter().enumerate() {
        if let Some(p) = prev {
            let mut next = p.succ_opt();
            while let Some(d) = next {
                if d >= day.date {
                    break;
                }
                if !is_leap_day(d) {
                    timeline.extend([None; HOURS]);
                    owner.extend([None; HOURS]);
                }
                next = d.succ_opt();
            }
        }
        timeline.extend(day.temps);
        owner.extend([Some(idx); HOURS]);
        prev = Some(day.date);
    }

    let mut invalid = vec![false; sorted.len()];
    let mut i = 0;
    while i < timeline.len() {
        if timeline[i].is_some() {
            i += 1;
            continue;
        }
        let start = i;
        while i < timeline.len() && timeline[i].is_none() {
            i += 1;
        }
        let len = i - start;
        let left = start.checked_sub(1).and_then(|j| timeline[j]);
        let right = timeline.get(i).copied().flatten();
        match (left, right) {
            (Some(a), Some(b)) if len <= max_gap_hours => {
                for (step, slot) in timeline[start..i].iter_mut().enumerate() {
                    let frac = (step + 1) as f64 / (len + 1) as f64;
                    *slot = Some(a + (b - a) * frac);
                }
            }
            _ => {
                for o in owner[start..i].iter().flatten() {
                    invalid[*o] = true;
                }
            }
        }
    }

    let mut report = GapFillReport::default();
    let mut cursor = 0;
    for (idx, day) in sorted.iter().enumerate() {
        while owner[cursor] != Some(idx) {
            cursor += 1;
        }
        if invalid[idx] {
            report.removed.push(day.date);
        } else {
            let mut temps = [0.0; HOURS];
            for (h, t) in temps.iter_mut().enumerate() {
                *t = timeline[cursor + h].expect("gap filled");
            }
            report.days.push(HourlyTemperatureDay {
                date: day.date,
                temps,
            });
        }
        cursor += HOURS;
    }
    report
}

#[derive(Debug, Deserialize)]
struct LoadRow {
    transformer_id: String,
    timestamp: String,
    load_mva: f64,
}

#[derive(Debug, Deserialize)]
struct CompositionRow {
    transformer_id: String,
    date: String,
    r_frac: f64,
    c_frac: f64,
    i_frac: f64,
}

/// Validates a raw (R, C, I) triple and renormalizes it to sum to one.
pub fn validate_composition(r: f64, c: f64, i: f64) -> std::result::Result<LoadComposition, String> {
    for (name, v) in [("r", r), ("c", c), ("i", i)] {
        if !v.is_finite() || !(0.0..=1.0).contains(&v) {
            return Err(format!("{name} fraction {v} outside [0, 1]"));
        }
    }
    let sum = r + c + i;
    if (sum - 1.0).abs() > COMPOSITION_SUM_TOL {
        return Err(format!("fractions sum to {sum:.6}, not 1"));
    }
    LoadComposition::new(r / sum, c / sum).map_err(|e| e.to_string())
}

/// Reads the loads and compositions files and joins them on
/// `(transformer_id, date)`.
///
/// Days without all 24 hourly loads, and days whose loads are all zero, are
/// skipped with a warning. Feb 29 is dropped.
pub fn parse_transformer_csv<L: Read, C: Read>(
    loads: L,
    loads_name: &str,
    compositions: C,
    compositions_name: &str,
) -> Result<Vec<TransformerDayObservation>> {
    let mut comp_rdr = csv_reader(compositions);
    check_header(
        &mut comp_rdr,
        &["transformer_id", "date", "r_frac", "c_frac", "i_frac"],
        compositions_name,
    )?;
    let mut comps: BTreeMap<(String, NaiveDate), LoadComposition> = BTreeMap::new();
    for record in comp_rdr.records() {
        let record = record?;
        let line = record_line(&record);
        let row: CompositionRow = record
            .deserialize(None)
            .map_err(|e| Error::parse(compositions_name, line, e.to_string()))?;
        let date = NaiveDate::parse_from_str(&row.date, "%Y-%m-%d")
            .map_err(|e| Error::parse(compositions_name, line, format!("bad date {:?}: {e}", row.date)))?;
        let comp = validate_composition(row.r_frac, row.c_frac, row.i_frac)
            .map_err(|m| Error::InvalidComposition(format!("{compositions_name}:{line}: {m}")))?;
        if comps.insert((row.transformer_id.clone(), date), comp).is_some() {
            return Err(Error::parse(
                compositions_name,
                line,
                format!("duplicate composition for {} on {date}", row.transformer_id),
            ));
        }
    }

    let mut load_rdr = csv_reader(loads);
    check_header(&mut load_rdr, &["transformer_id", "timestamp", "load_mva"], loads_name)?;
    let mut days: BTreeMap<(String, NaiveDate), [Option<f64>; HOURS]> = BTreeMap::new();
    for record in load_rdr.records() {
        let record = record?;
        let line = record_line(&record);
        let row: LoadRow = record
            .deserialize(None)
            .map_err(|e| Error::parse(loads_name, line, e.to_string()))?;
        let ts = parse_timestamp(&row.timestamp).map_err(|m| Error::parse(loads_name, line, m))?;
        if !row.load_mva.is_finite() || row.load_mva < 0.0 {
            return Err(Error::parse(
                loads_name,
                line,
                format!("load {} is not a finite non-negative MVA", row.load_mva),
            ));
        }
        if is_leap_day(ts.date()) {
            continue;
        }
        let slot = &mut days.entry((row.transformer_id.clone(), ts.date())).or_insert([None; HOURS])
            [ts.hour() as usize];
        if slot.replace(row.load_mva).is_some() {
            return Err(Error::parse(
                loads_name,
                line,
                format!("duplicate reading for {} at {}", row.transformer_id, row.timestamp),
            ));
        }
    }

    let mut out = Vec::with_capacity(days.len());
    for ((id, date), hours) in days {
        if hours.iter().any(Option::is_none) {
            log::warn!("{loads_name}: transformer {id} on {date} has missing hours, skipped");
            continue;
        }
        let loads = hours.map(|h| h.unwrap_or_default());
        if loads.iter().all(|l| *l == 0.0) {
            log::warn!("{loads_name}: transformer {id} on {date} carries no load, skipped");
            continue;
        }
        let composition = *comps.get(&(id.clone(), date)).ok_or_else(|| Error::MissingComposition {
            transformer_id: id.clone(),
            date,
        })?;
        out.push(TransformerDayObservation::new(id, date, loads, composition)?);
    }
    out.sort_by(|a, b| (a.date, &a.transformer_id).cmp(&(b.date, &b.transformer_id)));
    Ok(out)
}

pub fn write_loads_csv<W: Write>(writer: W, obs: &[TransformerDayObservation]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["transformer_id", "timestamp", "load_mva"])?;
    for o in obs {
        for (hour, l) in o.loads.iter().enumerate() {
            wtr.write_record([
                o.transformer_id.clone(),
                format!("{}T{hour:02}:00", o.date.format("%Y-%m-%d")),
                l.to_string(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_compositions_csv<W: Write>(writer: W, obs: &[TransformerDayObservation]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["transformer_id", "date", "r_frac", "c_frac", "i_frac"])?;
    for o in obs {
        let c = o.composition;
        wtr.write_record([
            o.transformer_id.clone(),
            o.date.format("%Y-%m-%d").to_string(),
            c.r.to_string(),
            c.c.to_string(),
            c.i.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    fn weather_text(days: &[(NaiveDate, f64)]) -> String {
        let mut s = String::from("timestamp,temp_c\n");
        for (date, t) in days {
            for h in 0..24 {
                s.push_str(&format!("{}T{h:02}:00,{t}\n", date.format("%Y-%m-%d")));
            }
        }
        s
    }

    #[test]
    fn constant_day_parses() {
        let text = weather_text(&[(d(2016, 1, 1), 5.0)]);
        let days = parse_weather_csv(text.as_bytes(), "w.csv").unwrap();
        assert_eq!(days.len(), 1);
        assert_eq!(days[0].date, d(2016, 1, 1));
        assert!(days[0].temps.iter().all(|t| *t == 5.0));
    }

    #[test]
    fn leap_day_dropped() {
        let text = weather_text(&[(d(2016, 2, 28), 1.0), (d(2016, 2, 29), 2.0), (d(2016, 3, 1), 3.0)]);
        let days = parse_weather_csv(text.as_bytes(), "w.csv").unwrap();
        let dates: Vec<_> = days.iter().map(|x| x.date).collect();
        assert_eq!(dates, vec![d(2016, 2, 28), d(2016, 3, 1)]);
    }

    #[test]
    fn two_years_give_730_ascending_days() {
        let mut rows = Vec::new();
        // written in descending order on purpose
        for year in [2018, 2017] {
            for doy in (1..=365).rev() {
                rows.push((date_for_day_index(year, doy).unwrap(), doy as f64 / 10.0));
            }
        }
        let days = parse_weather_csv(weather_text(&rows).as_bytes(), "w.csv").unwrap();
        assert_eq!(days.len(), 730);
        assert!(days.windows(2).all(|w| w[0].date < w[1].date));
    }

    #[test]
    fn weather_errors_carry_line_numbers() {
        let dup = "timestamp,temp_c\n2016-01-01T00:00,1\n2016-01-01T00:00,2\n";
        match parse_weather_csv(dup.as_bytes(), "w.csv") {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("duplicate"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let bad = "timestamp,temp_c\n2016-01-01T00:00,warm\n";
        assert!(matches!(
            parse_weather_csv(bad.as_bytes(), "w.csv"),
            Err(Error::Parse { line: 2, .. })
        ));
        let hot = "timestamp,temp_c\n2016-01-01T00:00,75\n";
        assert!(parse_weather_csv(hot.as_bytes(), "w.csv").is_err());
        let malformed = "timestamp,temp_c\n2016-01-01 00:00,1\n";
        assert!(parse_weather_csv(malformed.as_bytes(), "w.csv").is_err());
        let header = "time,temp\n";
        assert!(parse_weather_csv(header.as_bytes(), "w.csv").is_err());
    }

    fn partial(date: NaiveDate, temps: [Option<f64>; HOURS]) -> PartialDay {
        PartialDay { date, temps }
    }

    #[test]
    fn single_missing_hour_is_midpoint() {
        let mut temps = [Some(4.0); HOURS];
        temps[10] = None;
        temps[11] = Some(6.0);
        let report = fill_gaps(&[partial(d(2017, 5, 1), temps)], 3);
        assert!(report.removed.is_empty());
        assert_eq!(report.days[0].temps[10], 5.0);
    }

    #[test]
    fn long_gap_removes_day() {
        let mut temps = [Some(4.0); HOURS];
        for t in &mut temps[5..10] {
            *t = None;
        }
        let report = fill_gaps(
            &[partial(d(2017, 5, 1), temps), partial(d(2017, 5, 2), [Some(1.0); HOURS])],
            3,
        );
        assert_eq!(report.removed, vec![d(2017, 5, 1)]);
        assert_eq!(report.days.len(), 1);
        assert_eq!(report.days[0].date, d(2017, 5, 2));
    }

    #[test]
    fn no_gaps_is_identity() {
        let days: Vec<_> = (1..=3)
            .map(|i| {
                let mut temps = [0.0; HOURS];
                for (h, t) in temps.iter_mut().enumerate() {
                    *t = (i * 100 + h) as f64 / 7.0;
                }
                HourlyTemperatureDay { date: d(2017, 1, i as u32), temps }
            })
            .collect();
        let partials: Vec<PartialDay> = days.iter().map(PartialDay::from).collect();
        let report = fill_gaps(&partials, 3);
        assert_eq!(report.days, days);
        assert!(report.removed.is_empty());
    }

    #[test]
    fn gap_across_midnight_bridged() {
        let mut a = [Some(2.0); HOURS];
        a[23] = None;
        let mut b = [Some(4.0); HOURS];
        b[0] = None;
        a[22] = Some(1.0);
        b[1] = Some(4.0);
        let report = fill_gaps(&[partial(d(2017, 1, 1), a), partial(d(2017, 1, 2), b)], 3);
        assert!(report.removed.is_empty());
        assert!((report.days[0].temps[23] - 2.0).abs() < 1e-12);
        assert!((report.days[1].temps[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn leading_gap_without_left_neighbour_removes_day() {
        let mut temps = [Some(4.0); HOURS];
        temps[0] = None;
        let report = fill_gaps(&[partial(d(2017, 1, 1), temps)], 3);
        assert_eq!(report.removed, vec![d(2017, 1, 1)]);
    }

    #[test]
    fn missing_day_is_not_bridged() {
        let mut a = [Some(2.0); HOURS];
        a[23] = None;
        let report = fill_gaps(
            &[partial(d(2017, 1, 1), a), partial(d(2017, 1, 3), [Some(2.0); HOURS])],
            3,
        );
        assert_eq!(report.removed, vec![d(2017, 1, 1)]);
    }

    #[test]
    fn empty_field_is_missing_hour() {
        let mut text = weather_text(&[(d(2017, 1, 1), 4.0)]);
        text = text.replace("2017-01-01T05:00,4", "2017-01-01T05:00,");
        let partial = parse_weather_records(text.as_bytes(), "w.csv").unwrap();
        assert_eq!(partial[0].temps[5], None);
        assert!(parse_weather_csv(text.as_bytes(), "w.csv").unwrap().is_empty());
        let report = fill_gaps(&partial, 3);
        assert_eq!(report.days[0].temps[5], 4.0);
    }

    #[test]
    fn classify_weekends_and_listed_days() {
        let cal = HolidayCalendar::default();
        // 2017-01-07 is a Saturday, 2017-01-04 a Wednesday
        assert_eq!(classify_day(d(2017, 1, 7), &cal), DayType::Holiday);
        assert_eq!(classify_day(d(2017, 1, 8), &cal), DayType::Holiday);
        assert_eq!(classify_day(d(2017, 1, 4), &cal), DayType::Workday);
        let cal = HolidayCalendar::new([d(2017, 1, 4)]);
        assert_eq!(classify_day(d(2017, 1, 4), &cal), DayType::Holiday);
    }

    #[test]
    fn holiday_file_parses() {
        let text = "# statutory\n2017-01-02\n\n2017-12-25\n";
        let cal = HolidayCalendar::parse(text.as_bytes(), "h.txt").unwrap();
        assert_eq!(cal.dates.len(), 2);
        assert!(HolidayCalendar::parse("2017-13-01\n".as_bytes(), "h.txt").is_err());
    }

    #[test]
    fn day_index_mapping() {
        assert_eq!(day_of_year(d(2016, 1, 1)), Some(1));
        assert_eq!(day_of_year(d(2016, 2, 29)), None);
        assert_eq!(day_of_year(d(2016, 3, 1)), Some(60));
        assert_eq!(day_of_year(d(2017, 3, 1)), Some(60));
        assert_eq!(day_of_year(d(2016, 12, 31)), Some(365));
        for doy in 1..=365 {
            assert_eq!(day_of_year(date_for_day_index(2020, doy).unwrap()), Some(doy));
        }
        assert_eq!(date_for_day_index(2020, 0), None);
        assert_eq!(date_for_day_index(2020, 366), None);
    }

    const LOADS_HEADER: &str = "transformer_id,timestamp,load_mva\n";
    const COMP_HEADER: &str = "transformer_id,date,r_frac,c_frac,i_frac\n";

    fn flat_loads(id: &str, date: &str, mva: f64) -> String {
        let mut s = String::from(LOADS_HEADER);
        for h in 0..24 {
            s.push_str(&format!("{id},{date}T{h:02}:00,{mva}\n"));
        }
        s
    }

    #[test]
    fn transformer_join() {
        let loads = flat_loads("T1", "2017-03-01", 10.0);
        let comps = format!("{COMP_HEADER}T1,2017-03-01,0.5,0.3,0.2\n");
        let obs = parse_transformer_csv(loads.as_bytes(), "l", comps.as_bytes(), "c").unwrap();
        assert_eq!(obs.len(), 1);
        assert_eq!(obs[0].loads, [10.0; HOURS]);
        assert!((obs[0].composition.r - 0.5).abs() < 1e-12);
        assert!((obs[0].composition.c - 0.3).abs() < 1e-12);
    }

    #[test]
    fn composition_must_sum_to_one() {
        let loads = flat_loads("T1", "2017-03-01", 10.0);
        let comps = format!("{COMP_HEADER}T1,2017-03-01,0.3,0.3,0.3\n");
        let err = parse_transformer_csv(loads.as_bytes(), "l", comps.as_bytes(), "c").unwrap_err();
        assert!(matches!(err, Error::InvalidComposition(ref m) if m.contains("0.9")), "{err}");
        let comps = format!("{COMP_HEADER}T1,2017-03-01,1.2,-0.2,0.0\n");
        assert!(parse_transformer_csv(loads.as_bytes(), "l", comps.as_bytes(), "c").is_err());
    }

    #[test]
    fn table_one_style_composition_accepted() {
        let c = validate_composition(0.03, 0.88, 0.09).unwrap();
        assert!((c.r - 0.03).abs() < 1e-12 && (c.c - 0.88).abs() < 1e-12);
        // within tolerance, renormalized exactly
        let c = validate_composition(0.5, 0.3, 0.2 + 5e-7).unwrap();
        assert!((c.r + c.c + c.i - 1.0).abs() < 1e-15);
    }

    #[test]
    fn missing_composition_is_error() {
        let loads = flat_loads("T1", "2017-03-01", 10.0);
        let comps = format!("{COMP_HEADER}T1,2017-03-02,0.5,0.3,0.2\n");
        assert!(matches!(
            parse_transformer_csv(loads.as_bytes(), "l", comps.as_bytes(), "c"),
            Err(Error::MissingComposition { .. })
        ));
    }

    #[test]
    fn observation_invariants_enforced() {
        let comp = LoadComposition::new(1.0, 0.0).unwrap();
        assert!(TransformerDayObservation::new("T", d(2017, 1, 1), [0.0; HOURS], comp).is_err());
        let mut loads = [1.0; HOURS];
        loads[3] = -1.0;
        assert!(TransformerDayObservation::new("T", d(2017, 1, 1), loads, comp).is_err());
        loads[3] = f64::NAN;
        assert!(TransformerDayObservation::new("T", d(2017, 1, 1), loads, comp).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn weather_round_trip(temps in proptest::collection::vec(-60.0f64..60.0, 48)) {
                let mut days = Vec::new();
                for (i, chunk) in temps.chunks(24).enumerate() {
                    let mut t = [0.0; HOURS];
                    t.copy_from_slice(chunk);
                    days.push(HourlyTemperatureDay { date: d(2016, 2, 28) + chrono::Days::new(2 * i as u64), temps: t });
                }
                let mut buf = Vec::new();
                write_weather_csv(&mut buf, &days).unwrap();
                let back = parse_weather_csv(buf.as_slice(), "w").unwrap();
                prop_assert_eq!(back, days);
            }
        }
    }
}

//! Annual temperature scenarios and similar-day retrieval.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{day_of_year, DayType, HourlyTemperatureDay};
use crate::{DAYS_PER_YEAR, HOURS};

/// Number of similar historical days retrieved per profile day.
pub const DEFAULT_SIMILAR_DAYS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DayFeatures {
    pub t_avg: f64,
    pub t_max: f64,
    pub t_min: f64,
    /// Position in the annual cycle, `sin(2π·d/365)`.
    pub y: f64,
    pub day_type: DayType,
}

impl DayFeatures {
    fn vector(&self) -> [f64; 4] {
        [self.t_avg, self.t_max, self.t_min, self.y]
    }
}

pub fn day_of_year_feature(d: usize) -> f64 {
    (2.0 * PI * d as f64 / DAYS_PER_YEAR as f64).sin()
}

pub fn compute_day_features(day: &HourlyTemperatureDay, d: usize, day_type: DayType) -> Result<DayFeatures> {
    if !(1..=DAYS_PER_YEAR).contains(&d) {
        return Err(Error::InvalidInput(format!("day of year {d} outside 1..=365")));
    }
    let t_avg = day.temps.iter().sum::<f64>() / HOURS as f64;
    let t_max = day.temps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let t_min = day.temps.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(DayFeatures {
        // the mean can land a rounding step outside [min, max] on flat days
        t_avg: t_avg.clamp(t_min, t_max),
        t_max,
        t_min,
        y: day_of_year_feature(d),
        day_type,
    })
}

/// Per-feature min-max scaling for (T_avg, T_max, T_min, Y).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureNormalizer {
    pub min: [f64; 4],
    pub max: [f64; 4],
}

impl FeatureNormalizer {
    pub fn fit<'a>(features: impl IntoIterator<Item = &'a DayFeatures>) -> Result<Self> {
        let mut min = [f64::INFINITY; 4];
        let mut max = [f64::NEG_INFINITY; 4];
        let mut count = 0;
        for f in features {
            for (i, v) in f.vector().into_iter().enumerate() {
                min[i] = min[i].min(v);
                max[i] = max[i].max(v);
            }
            count += 1;
        }
        if count < 2 {
            return Err(Error::InvalidInput(format!(
                "normalizer needs at least 2 feature records, got {count}"
            )));
        }
        Ok(Self { min, max })
    }

    /// Scaled features, clamped to [0, 1]. A feature with no spread maps to 0.
    pub fn normalize(&self, f: &DayFeatures) -> [f64; 4] {
        let raw = f.vector();
        let mut out = [0.0; 4];
        for i in 0..4 {
            let span = self.max[i] - self.min[i];
            out[i] = if span > 0.0 {
                ((raw[i] - self.min[i]) / span).clamp(0.0, 1.0)
            } else {
                0.0
            };
        }
        out
    }
}

/// Euclidean distance between two normalized feature vectors.
pub fn feature_distance(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarDays {
    /// Dates with their distances, nearest first.
    pub matches: Vec<(NaiveDate, f64)>,
    /// Fewer than the requested count survived day-type filtering.
    pub short: bool,
}

impl SimilarDays {
    pub fn dates(&self) -> Vec<NaiveDate> {
        self.matches.iter().map(|(d, _)| *d).collect()
    }
}

/// The `count` historical days of the target's day type nearest in
/// normalized feature space. Equal distances rank the more recent date first.
pub fn find_similar_days(
    target: &DayFeatures,
    history: &[(NaiveDate, DayFeatures)],
    normalizer: &FeatureNormalizer,
    count: usize,
) -> Result<SimilarDays> {
    let t = normalizer.normalize(target);
    let mut scored: Vec<(NaiveDate, f64)> = history
        .iter()
        .filter(|(_, f)| f.day_type == target.day_type)
        .map(|(date, f)| (*date, feature_distance(&t, &normalizer.normalize(f))))
        .collect();
    if scored.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no {:?} days in history to compare against",
            target.day_type
        )));
    }
    scored.sort_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
    let short = scored.len() < count;
    if short {
        log::warn!("only {} candidate days of type {:?}", scored.len(), target.day_type);
    }
    scored.truncate(count);
    Ok(SimilarDays {
        matches: scored,
        short,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    High,
    Medium,
    Low,
    /// Recorded weather of a single year, used for backtests.
    Observed,
}

impl ScenarioKind {
    pub const PLANNING: [ScenarioKind; 3] = [ScenarioKind::High, ScenarioKind::Medium, ScenarioKind::Low];

    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioKind::High => "high",
            ScenarioKind::Medium => "medium",
            ScenarioKind::Low => "low",
            ScenarioKind::Observed => "observed",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "high" => Ok(ScenarioKind::High),
            "medium" => Ok(ScenarioKind::Medium),
            "low" => Ok(ScenarioKind::Low),
            "observed" => Ok(ScenarioKind::Observed),
            other => Err(Error::InvalidInput(format!("unknown scenario {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioDay {
    pub day_index: usize,
    pub source_date: NaiveDate,
    /// Source day's temperatures with the scenario offset applied.
    pub temps: [f64; HOURS],
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnualTemperatureScenario {
    pub scenario: ScenarioKind,
    pub offset_c: f64,
    pub days: Vec<ScenarioDay>,
}

impl AnnualTemperatureScenario {
    /// A scenario built from one year of recorded weather, without offset.
    /// Day indices missing from `year_days` are absent from the result.
    pub fn observed(year_days: &[HourlyTemperatureDay]) -> Self {
        let mut days: Vec<ScenarioDay> = year_days
            .iter()
            .filter_map(|d| {
                Some(ScenarioDay {
                    day_index: day_of_year(d.date)?,
                    source_date: d.date,
                    temps: d.temps,
                })
            })
            .collect();
        days.sort_by_key(|d| d.day_index);
        Self {
            scenario: ScenarioKind::Observed,
            offset_c: 0.0,
            days,
        }
    }
}

/// Assembles a 365-day scenario by picking, for each day of the year, the
/// history year whose same day has the highest, median or lowest daily mean.
///
/// The median of an even number of candidates is the lower one. Equal means
/// are ordered by date, so ties resolve to the earlier year.
pub fn build_scenario_profile(
    history: &[HourlyTemperatureDay],
    scenario: ScenarioKind,
    offset_c: f64,
) -> Result<AnnualTemperatureScenario> {
    if scenario == ScenarioKind::Observed {
        return Err(Error::InvalidInput(
            "observed scenarios come from a single year, not a ranking".into(),
        ));
    }
    let mut by_day: BTreeMap<usize, Vec<&HourlyTemperatureDay>> = BTreeMap::new();
    let mut years = std::collections::BTreeSet::new();
    for day in history {
        if let Some(d) = day_of_year(day.date) {
            by_day.entry(d).or_default().push(day);
            years.insert(day.date.year());
        }
    }
    if years.len() != 5 {
        log::warn!(
            "temperature history spans {} year(s); five are expected",
            years.len()
        );
    }

    let mut days = Vec::with_capacity(DAYS_PER_YEAR);
    for d in 1..=DAYS_PER_YEAR {
        let mut candidates = by_day.remove(&d).ok_or(Error::MissingDayOfYear(d))?;
        candidates.sort_by(|a, b| a.mean().total_cmp(&b.mean()).then(a.date.cmp(&b.date)));
        let pick = match scenario {
            ScenarioKind::High => candidates.len() - 1,
            ScenarioKind::Medium => (candidates.len() - 1) / 2,
            _ => 0,
        };
        let src = candidates[pick];
        days.push(ScenarioDay {
            day_index: d,
            source_date: src.date,
            temps: src.temps.map(|t| t + offset_c),
        });
    }
    Ok(AnnualTemperatureScenario {
        scenario,
        offset_c,
        days,
    })
}

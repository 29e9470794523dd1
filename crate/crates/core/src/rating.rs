//! Daily dynamic rating solver and rating-error metrics.
//!
//! A day's rating is the peak of the load shape scaled so that the day
//! consumes exactly one day of insulation life (equivalent aging factor of
//! one). Equivalent aging rises strictly with the scale, so the root is found
//! by bracketing and bisection.

use std::collections::BTreeMap;
use std::fmt;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{date_for_day_index, day_of_year, HourlyTemperatureDay, TransformerDayObservation};
use crate::load_shape::normalize_profile;
use crate::temperature::ScenarioKind;
use crate::thermal::{simulate_day, SimulationOptions, ThermalParameters};
use crate::HOURS;

/// Default tolerance on |F_EQA − 1| at the solution.
pub const DEFAULT_TOLERANCE: f64 = 1e-3;
/// Largest shape multiplier tried before giving up.
pub const MAX_SCALE: f64 = 16.0;
const MAX_BISECTIONS: usize = 200;

/// Root of F_EQA(scale · shape) = 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatingSolution {
    pub scale: f64,
    /// Peak of the scaled shape, per-unit of nameplate.
    pub peak_pu: f64,
    pub rating_mva: f64,
    pub f_eqa: f64,
}

impl RatingSolution {
    fn new(scale: f64, shape_peak: f64, rated_mva: f64, f_eqa: f64) -> Self {
        let peak_pu = scale * shape_peak;
        Self {
            scale,
            peak_pu,
            rating_mva: peak_pu * rated_mva,
            f_eqa,
        }
    }
}

pub fn daily_rating(
    shape: &[f64; HOURS],
    ambient: &[f64; HOURS],
    p: &ThermalParameters,
    tol: f64,
    sim: &SimulationOptions,
) -> Result<RatingSolution> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance {tol} must be positive")));
    }
    let shape_peak = shape.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(shape_peak > 0.0) || !shape_peak.is_finite() {
        return Err(Error::InvalidInput("load shape has no positive hour".into()));
    }
    let f_eqa = |s: f64| -> Result<f64> {
        Ok(simulate_day(&shape.map(|v| v * s), ambient, p, sim)?.f_eqa)
    };
    let done = |s: f64, f: f64| RatingSolution::new(s, shape_peak, p.rated_mva, f);

    let mut lo = 0.0;
    let mut hi = 1.0;
    loop {
        let f = f_eqa(hi)?;
        if (f - 1.0).abs() <= tol {
            return Ok(done(hi, f));
        }
        if f > 1.0 {
            break;
        }
        if hi >= MAX_SCALE {
            return Err(Error::RatingUnbounded { scale: hi, f_eqa: f });
        }
        lo = hi;
        hi = (hi * 2.0).min(MAX_SCALE);
    }

    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let f = f_eqa(mid)?;
        if (f - 1.0).abs() <= tol {
            return Ok(done(mid, f));
        }
        if f > 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mid = 0.5 * (lo + hi);
    Ok(done(mid, f_eqa(mid)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyRating {
    pub day_index: usize,
    pub date_source: NaiveDate,
    pub rating_mva: f64,
    pub peak_pu: f64,
    pub f_eqa_at_solution: f64,
}

impl DailyRating {
    pub fn from_solution(day_index: usize, date_source: NaiveDate, s: &RatingSolution) -> Self {
        Self {
            day_index,
            date_source,
            rating_mva: s.rating_mva,
            peak_pu: s.peak_pu,
            f_eqa_at_solution: s.f_eqa,
        }
    }
}

/// Per-day provenance of a synthesized shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayDiagnostics {
    pub similar_days: Vec<NaiveDate>,
    pub k_star: usize,
    pub q_avg: Option<f64>,
    pub memberships: Vec<f64>,
    pub top_membership: f64,
    pub pool_size: usize,
    /// Synthesized per-unit shape before scaling.
    pub shape: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DayRecord {
    pub day_index: usize,
    pub source_date: NaiveDate,
    pub rating: Option<DailyRating>,
    pub diagnostics: Option<DayDiagnostics>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnualRatingProfile {
    pub scenario: ScenarioKind,
    /// One record per scenario day, in day-index order.
    pub days: Vec<DayRecord>,
}

impl AnnualRatingProfile {
    pub fn rated(&self) -> impl Iterator<Item = &DailyRating> {
        self.days.iter().filter_map(|d| d.rating.as_ref())
    }

    pub fn failures(&self) -> impl Iterator<Item = &DayRecord> {
        self.days.iter().filter(|d| d.rating.is_none())
    }

    /// Mean rating over rated days whose day index falls in `season`.
    pub fn season_mean(&self, season: Season) -> Option<f64> {
        let v: Vec<f64> = self
            .rated()
            .filter(|r| Season::of_day_index(r.day_index) == Some(season))
            .map(|r| r.rating_mva)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Season {
    /// October through April.
    Winter,
    /// May through September.
    Summer,
}

impl Season {
    pub fn of_date(date: NaiveDate) -> Self {
        if (5..=9).contains(&date.month()) {
            Season::Summer
        } else {
            Season::Winter
        }
    }

    pub fn of_day_index(d: usize) -> Option<Self> {
        date_for_day_index(2001, d).map(Self::of_date)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Season::Winter => "winter",
            Season::Summer => "summer",
        }
    }
}

impl fmt::Display for Season {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn check_pair(actual: &[f64], estimated: &[f64]) -> Result<()> {
    if actual.is_empty() || actual.len() != estimated.len() {
        return Err(Error::InvalidInput(format!(
            "rating sequences must be non-empty and equal length ({} vs {})",
            actual.len(),
            estimated.len()
        )));
    }
    if let Some(bad) = actual.iter().find(|a| !(**a > 0.0)) {
        return Err(Error::InvalidInput(format!("actual rating {bad} must be positive")));
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn min(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Mean absolute percentage error, %.
pub fn metric_me(actual: &[f64], estimated: &[f64]) -> Result<f64> {
    check_pair(actual, estimated)?;
    let sum: f64 = actual
        .iter()
        .zip(estimated)
        .map(|(a, e)| ((a - e) / a).abs())
        .sum();
    Ok(sum / actual.len() as f64 * 100.0)
}

/// Percentage error of the period-average rating, %.
pub fn metric_ae(actual: &[f64], estimated: &[f64]) -> Result<f64> {
    check_pair(actual, estimated)?;
    let ma = mean(actual);
    Ok((ma - mean(estimated)).abs() / ma * 100.0)
}

/// Percentage error of the period-minimum (valley) rating, %.
pub fn metric_ve(actual: &[f64], estimated: &[f64]) -> Result<f64> {
    check_pair(actual, estimated)?;
    let ma = min(actual);
    Ok((ma - min(estimated)).abs() / ma * 100.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub season: Season,
    pub me_pct: f64,
    pub ae_pct: f64,
    pub ve_pct: f64,
    pub days: usize,
}

/// Metrics for each season over paired (day index, actual, estimated)
/// ratings. Winter comes first.
pub fn seasonal_reports(pairs: &[(usize, f64, f64)]) -> Result<Vec<BacktestReport>> {
    let mut out = Vec::new();
    for season in [Season::Winter, Season::Summer] {
        let (a, e): (Vec<f64>, Vec<f64>) = pairs
            .iter()
            .filter(|(d, _, _)| Season::of_day_index(*d) == Some(season))
            .map(|(_, a, e)| (*a, *e))
            .unzip();
        if a.is_empty() {
            return Err(Error::InvalidInput(format!("no {season} days to compare")));
        }
        out.push(BacktestReport {
            season,
            me_pct: metric_me(&a, &e)?,
            ae_pct: metric_ae(&a, &e)?,
            ve_pct: metric_ve(&a, &e)?,
            days: a.len(),
        });
    }
    Ok(out)
}

/// Rates each actual day from its own normalized shape and that day's
/// weather, then compares with the estimated profile season by season.
///
/// Days without weather, or unrated in the estimate, are left out of both
/// sides.
pub fn backtest(
    actual: &[TransformerDayObservation],
    weather: &BTreeMap<NaiveDate, HourlyTemperatureDay>,
    estimated: &AnnualRatingProfile,
    p: &ThermalParameters,
    tol: f64,
    sim: &SimulationOptions,
) -> Result<Vec<BacktestReport>> {
    let est: BTreeMap<usize, f64> = estimated
        .rated()
        .map(|r| (r.day_index, r.rating_mva))
        .collect();
    let mut pairs = Vec::new();
    let mut skipped = 0;
    for obs in actual {
        let Some(d) = day_of_year(obs.date) else { continue };
        let (Some(e), Some(w)) = (est.get(&d), weather.get(&obs.date)) else {
            skipped += 1;
            continue;
        };
        let shape = normalize_profile(&obs.loads)?;
        let sol = daily_rating(&shape.values, &w.temps, p, tol, sim)?;
        pairs.push((d, sol.rating_mva, *e));
    }
    if skipped > 0 {
        log::warn!("backtest skipped {skipped} day(s) lacking weather or an estimate");
    }
    seasonal_reports(&pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const P: ThermalParameters = ThermalParameters::ONAF_50MVA;

    fn sim() -> SimulationOptions {
        SimulationOptions::default()
    }

    /// Scales the shape up in 0.001 p.u. peak steps until F_EQA reaches 1.
    fn stepping_peak(shape: &[f64; HOURS], ambient: &[f64; HOURS]) -> f64 {
        let peak = shape.iter().copied().fold(0.0, f64::max);
        let mut step = 1;
        loop {
            let target = step as f64 * 0.001;
            let f = simulate_day(&shape.map(|v| v * target / peak), ambient, &P, &sim()).unwrap().f_eqa;
            if f >= 1.0 {
                return target;
            }
            step += 1;
        }
    }

    #[test]
    fn flat_rated_day_is_nameplate() {
        let s = daily_rating(&[1.0; HOURS], &[30.0; HOURS], &P, DEFAULT_TOLERANCE, &sim()).unwrap();
        assert_eq!(s.scale, 1.0);
        assert_eq!(s.rating_mva, 50.0);
    }

    #[test]
    fn rating_is_peak_times_nameplate() {
        let s = RatingSolution::new(1.55, 1.0, 50.0, 1.0);
        assert_eq!(s.rating_mva, 77.5);
    }

    #[test]
    fn bisection_matches_stepping() {
        let mut shape = [0.0; HOURS];
        for (h, v) in shape.iter_mut().enumerate() {
            *v = 0.6 + 0.4 * (std::f64::consts::PI * (h as f64 - 6.0) / 12.0).sin().max(0.0);
        }
        let mut ambient = [0.0; HOURS];
        for (h, t) in ambient.iter_mut().enumerate() {
            *t = 12.0 + 6.0 * (std::f64::consts::PI * (h as f64 - 9.0) / 12.0).sin();
        }
        let s = daily_rating(&shape, &ambient, &P, DEFAULT_TOLERANCE, &sim()).unwrap();
        assert!((s.f_eqa - 1.0).abs() <= DEFAULT_TOLERANCE);
        let stepped = stepping_peak(&shape, &ambient);
        assert!((s.peak_pu - stepped).abs() <= 0.001 + 1e-9, "{} vs {stepped}", s.peak_pu);
    }

    #[test]
    fn cold_shape_with_tiny_scale_is_unbounded() {
        let mut shape = [1e-6; HOURS];
        shape[0] = 1e-3;
        // 16 x 1e-3 p.u. cannot age a transformer at -40 °C
        assert!(matches!(
            daily_rating(&shape, &[-40.0; HOURS], &P, DEFAULT_TOLERANCE, &sim()),
            Err(Error::RatingUnbounded { .. })
        ));
        assert!(daily_rating(&[0.0; HOURS], &[0.0; HOURS], &P, DEFAULT_TOLERANCE, &sim()).is_err());
        assert!(daily_rating(&[1.0; HOURS], &[0.0; HOURS], &P, 0.0, &sim()).is_err());
    }

    #[test]
    fn metric_examples() {
        let a = [100.0, 100.0];
        let e = [90.0, 110.0];
        assert_eq!(metric_me(&a, &a).unwrap(), 0.0);
        assert_relative_eq!(metric_me(&a, &e).unwrap(), 10.0, epsilon = 1e-12);
        assert_relative_eq!(metric_me(&a, &a.map(|x| x * 1.1)).unwrap(), 10.0, epsilon = 1e-12);

        assert_eq!(metric_ae(&a, &e).unwrap(), 0.0);
        assert_relative_eq!(metric_ae(&[90.0, 110.0], &[100.0, 120.0]).unwrap(), 10.0, epsilon = 1e-12);
        assert_eq!(metric_ae(&e, &e).unwrap(), 0.0);

        assert_eq!(metric_ve(&e, &e).unwrap(), 0.0);
        assert_relative_eq!(metric_ve(&[100.0, 130.0], &[90.0, 140.0]).unwrap(), 10.0, epsilon = 1e-12);
        assert_eq!(metric_ve(&[100.0, 120.0, 140.0], &[140.0, 100.0, 120.0]).unwrap(), 0.0);
    }

    #[test]
    fn metric_errors() {
        assert!(metric_me(&[1.0], &[1.0, 2.0]).is_err());
        assert!(metric_ae(&[], &[]).is_err());
        assert!(metric_ve(&[0.0, 1.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn seasons() {
        let d = |m, day| NaiveDate::from_ymd_opt(2018, m, day).unwrap();
        assert_eq!(Season::of_date(d(4, 30)), Season::Winter);
        assert_eq!(Season::of_date(d(5, 1)), Season::Summer);
        assert_eq!(Season::of_date(d(9, 30)), Season::Summer);
        assert_eq!(Season::of_date(d(10, 1)), Season::Winter);
        assert_eq!(Season::of_day_index(1), Some(Season::Winter));
        assert_eq!(Season::of_day_index(200), Some(Season::Summer));
    }

    #[test]
    fn seasonal_reports_layout() {
        let pairs: Vec<_> = (1..=365).map(|d| (d, 100.0, if d > 200 { 110.0 } else { 100.0 })).collect();
        let r = seasonal_reports(&pairs).unwrap();
        assert_eq!(r[0].season, Season::Winter);
        assert_eq!(r[1].season, Season::Summer);
        assert!(r.iter().all(|x| x.me_pct >= 0.0 && x.ae_pct >= 0.0 && x.ve_pct >= 0.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn solution_within_tolerance(
            shape in proptest::array::uniform24(0.05f64..1.0),
            amb in proptest::array::uniform24(-25.0f64..35.0),
        ) {
            let s = daily_rating(&shape, &amb, &P, DEFAULT_TOLERANCE, &sim()).unwrap();
            prop_assert!((s.f_eqa - 1.0).abs() <= DEFAULT_TOLERANCE);
            let peak = shape.iter().copied().fold(0.0, f64::max);
            prop_assert!((s.rating_mva - s.scale * peak * 50.0).abs() < 1e-9);
        }

        #[test]
        fn warmer_days_rate_lower(
            shape in proptest::array::uniform24(0.05f64..1.0),
            amb in proptest::array::uniform24(-25.0f64..30.0),
        ) {
            let cool = daily_rating(&shape, &amb, &P, DEFAULT_TOLERANCE, &sim()).unwrap();
            let warm = daily_rating(&shape, &amb.map(|t| t + 5.0), &P, DEFAULT_TOLERANCE, &sim()).unwrap();
            prop_assert!(warm.rating_mva < cool.rating_mva);
        }
    }
}

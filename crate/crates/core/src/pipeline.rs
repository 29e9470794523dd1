//! End-to-end annual rating: for every scenario day, retrieve similar
//! historical days, cluster the fleet's compositions on those days, blend the
//! cluster shapes by the forecast composition's memberships and solve for
//! the rating.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::sync::Arc;

use chrono::{Datelike, NaiveDate};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gmm::{
    fit_gmm, membership, select_k, CompositionScaler, GmmModel, GmmOptions, Membership, Point2,
};
use crate::ingest::{
    classify_day, date_for_day_index, day_of_year, validate_composition, HolidayCalendar,
    HourlyTemperatureDay, TransformerDayObservation,
};
use crate::load_shape::{
    centroid_profiles, construct_load_shape, normalize_profile, ClusterCentroidProfile,
    LoadComposition,
};
use crate::rating::{
    backtest, daily_rating, AnnualRatingProfile, BacktestReport, DailyRating, DayDiagnostics,
    DayRecord, DEFAULT_TOLERANCE,
};
use crate::temperature::{
    compute_day_features, find_similar_days, AnnualTemperatureScenario, DayFeatures,
    FeatureNormalizer, DEFAULT_SIMILAR_DAYS,
};
use crate::thermal::{SimulationOptions, ThermalParameters};
use crate::{DAYS_PER_YEAR, HOURS};

/// Share of unrated days above which a run fails.
pub const MAX_FAILURE_FRACTION: f64 = 0.05;

/// Weather and fleet loading history, indexed for per-day retrieval.
#[derive(Debug, Clone)]
pub struct FleetHistory {
    pub weather: BTreeMap<NaiveDate, HourlyTemperatureDay>,
    pub observations: BTreeMap<NaiveDate, Vec<TransformerDayObservation>>,
    pub calendar: HolidayCalendar,
    /// Features of every date with both weather and fleet data.
    features: Vec<(NaiveDate, DayFeatures)>,
}

impl FleetHistory {
    pub fn new(
        weather: impl IntoIterator<Item = HourlyTemperatureDay>,
        observations: impl IntoIterator<Item = TransformerDayObservation>,
        calendar: HolidayCalendar,
    ) -> Result<Self> {
        let weather: BTreeMap<NaiveDate, HourlyTemperatureDay> =
            weather.into_iter().map(|d| (d.date, d)).collect();
        let mut by_date: BTreeMap<NaiveDate, Vec<TransformerDayObservation>> = BTreeMap::new();
        for o in observations {
            by_date.entry(o.date).or_default().push(o);
        }
        for v in by_date.values_mut() {
            v.sort_by(|a, b| a.transformer_id.cmp(&b.transformer_id));
        }
        let mut features = Vec::new();
        for (date, day) in &weather {
            if !by_date.contains_key(date) {
                continue;
            }
            let Some(d) = day_of_year(*date) else { continue };
            features.push((*date, compute_day_features(day, d, classify_day(*date, &calendar))?));
        }
        if features.is_empty() {
            return Err(Error::InvalidInput(
                "no date has both weather and transformer loading".into(),
            ));
        }
        Ok(Self {
            weather,
            observations: by_date,
            calendar,
            features,
        })
    }

    pub fn features(&self) -> &[(NaiveDate, DayFeatures)] {
        &self.features
    }

    /// The same history restricted to dates before `year`.
    pub fn before_year(&self, year: i32) -> Result<Self> {
        Self::new(
            self.weather.values().filter(|d| d.date.year() < year).cloned(),
            self.observations
                .iter()
                .filter(|(d, _)| d.year() < year)
                .flat_map(|(_, v)| v.iter().cloned()),
            self.calendar.clone(),
        )
    }

    pub fn transformer_ids(&self) -> BTreeSet<String> {
        self.observations
            .values()
            .flatten()
            .map(|o| o.transformer_id.clone())
            .collect()
    }
}

/// Forecast composition for each of the 365 profile days.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositionForecast {
    by_day: Vec<LoadComposition>,
}

impl CompositionForecast {
    pub fn constant(c: LoadComposition) -> Self {
        Self {
            by_day: vec![c; DAYS_PER_YEAR],
        }
    }

    pub fn from_days(by_day: Vec<LoadComposition>) -> Result<Self> {
        if by_day.len() != DAYS_PER_YEAR {
            return Err(Error::InvalidInput(format!(
                "forecast covers {} days, expected {DAYS_PER_YEAR}",
                by_day.len()
            )));
        }
        Ok(Self { by_day })
    }

    pub fn for_day(&self, day_index: usize) -> LoadComposition {
        self.by_day[day_index - 1]
    }

    /// Reads `date_range,r_frac,c_frac,i_frac` rows. A range is `*` for the
    /// whole year or `MM-DD:MM-DD` (inclusive, may wrap past Dec 31). Later
    /// rows override earlier ones and every day must end up covered.
    pub fn parse<R: Read>(reader: R, source_name: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header != ["date_range", "r_frac", "c_frac", "i_frac"] {
            return Err(Error::Parse {
                source_name: source_name.into(),
                line: 1,
                message: format!("unexpected header {:?}", header.join(",")),
            });
        }
        let mut days: Vec<Option<LoadComposition>> = vec![None; DAYS_PER_YEAR];
        for record in rdr.records() {
            let record = record?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            let err = |m: String| Error::Parse {
                source_name: source_name.into(),
                line,
                message: m,
            };
            if record.len() != 4 {
                return Err(err(format!("expected 4 fields, found {}", record.len())));
            }
            let frac = |i: usize| -> Result<f64> {
                record[i]
                    .parse::<f64>()
                    .map_err(|_| err(format!("non-numeric fraction {:?}", &record[i])))
            };
            let comp = validate_composition(frac(1)?, frac(2)?, frac(3)?)
                .map_err(|m| Error::InvalidComposition(format!("{source_name}:{line}: {m}")))?;
            for d in parse_day_range(&record[0]).map_err(err)? {
                days[d - 1] = Some(comp);
            }
        }
        let by_day = days
            .into_iter()
            .enumerate()
            .map(|(i, c)| {
                c.ok_or_else(|| {
                    Error::InvalidInput(format!("{source_name}: day {} has no forecast composition", i + 1))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { by_day })
    }
}

fn parse_day_range(raw: &str) -> std::result::Result<Vec<usize>, String> {
    if raw == "*" {
        return Ok((1..=DAYS_PER_YEAR).collect());
    }
    let (a, b) = raw
        .split_once(':')
        .ok_or_else(|| format!("date range {raw:?} is not MM-DD:MM-DD or *"))?;
    let parse = |s: &str| -> std::result::Result<usize, String> {
        NaiveDate::parse_from_str(&format!("2001-{s}"), "%Y-%m-%d")
            .ok()
            .and_then(day_of_year)
            .ok_or_else(|| format!("bad month-day {s:?}"))
    };
    let (start, end) = (parse(a)?, parse(b)?);
    Ok(if start <= end {
        (start..=end).collect()
    } else {
        (start..=DAYS_PER_YEAR).chain(1..=end).collect()
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub k_min: usize,
    pub k_max: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub similar_days: usize,
    /// Calendar year the profile days are classified in (workday/holiday).
    pub target_year: i32,
    pub gmm: GmmOptions,
    pub simulation: SimulationOptions,
}

impl PipelineConfig {
    pub fn new(target_year: i32, seed: u64) -> Self {
        Self {
            k_min: 2,
            k_max: 10,
            seed,
            tolerance: DEFAULT_TOLERANCE,
            similar_days: DEFAULT_SIMILAR_DAYS,
            target_year,
            gmm: GmmOptions::default(),
            simulation: SimulationOptions::default(),
        }
    }
}

/// Clustering of one pool of transformer days, shared by every profile day
/// that retrieves the same similar dates.
#[derive(Debug, Clone)]
pub struct PoolClustering {
    pub scaler: CompositionScaler,
    pub model: GmmModel,
    pub k_star: usize,
    pub q_avg: Option<f64>,
    pub centroids: Vec<ClusterCentroidProfile>,
    pub pool_size: usize,
}

impl PoolClustering {
    pub fn fit(pool: &[&TransformerDayObservation], cfg: &PipelineConfig) -> Result<Self> {
        if pool.is_empty() {
            return Err(Error::InvalidInput("no transformer days on the similar dates".into()));
        }
        let raw: Vec<Point2> = pool.iter().map(|o| [o.composition.r, o.composition.c]).collect();
        let scaler = CompositionScaler::fit(&raw)?;
        let points: Vec<Point2> = raw.iter().map(|p| scaler.scale(*p)).collect();

        let mut distinct = points.clone();
        distinct.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
        distinct.dedup();
        let k_max = cfg.k_max.min(points.len().saturating_sub(1)).min(distinct.len());

        let selected = if k_max >= cfg.k_min {
            match select_k(&points, cfg.k_min, k_max, cfg.seed, &cfg.gmm) {
                Ok(sel) => Some((sel.k_star, sel.model, Some(sel.q_avg))),
                Err(Error::DegenerateFit(m)) => {
                    log::debug!("falling back to one cluster: {m}");
                    None
                }
                Err(e) => return Err(e),
            }
        } else {
            None
        };
        let (k_star, model, q_avg) = match selected {
            Some(s) => s,
            None => (1, fit_gmm(&points, 1, cfg.seed, &cfg.gmm)?, None),
        };

        let members = pool
            .iter()
            .zip(&points)
            .map(|(o, p)| Ok((normalize_profile(&o.loads)?, membership(&model, *p))))
            .collect::<Result<Vec<_>>>()?;
        let set = centroid_profiles(&members, k_star)?;
        Ok(Self {
            scaler,
            model,
            k_star,
            q_avg,
            centroids: set.centroids,
            pool_size: pool.len(),
        })
    }

    /// Memberships and blended shape for a raw forecast composition.
    pub fn shape_for(&self, c: LoadComposition) -> Result<(Membership, [f64; HOURS])> {
        let m = membership(&self.model, self.scaler.scale([c.r, c.c]));
        let shape = construct_load_shape(&m, &self.centroids)?;
        Ok((m, shape))
    }
}

/// Similar-day retrieval for one profile day. The target is the scenario
/// day's source weather without offset, typed by its date in the target year.
fn similar_dates(
    day_index: usize,
    source: &HourlyTemperatureDay,
    history: &FleetHistory,
    cfg: &PipelineConfig,
) -> Result<Vec<NaiveDate>> {
    let target_date = date_for_day_index(cfg.target_year, day_index)
        .ok_or_else(|| Error::InvalidInput(format!("day index {day_index}")))?;
    let target = compute_day_features(source, day_index, classify_day(target_date, &history.calendar))?;
    let normalizer = FeatureNormalizer::fit(
        history.features().iter().map(|(_, f)| f).chain(std::iter::once(&target)),
    )?;
    let mut dates = find_similar_days(&target, history.features(), &normalizer, cfg.similar_days)?.dates();
    dates.sort();
    Ok(dates)
}

type ClusterCache = BTreeMap<Vec<NaiveDate>, std::result::Result<Arc<PoolClustering>, String>>;

fn cluster_pools(
    keys: impl IntoIterator<Item = Vec<NaiveDate>>,
    history: &FleetHistory,
    cfg: &PipelineConfig,
) -> ClusterCache {
    let unique: BTreeSet<Vec<NaiveDate>> = keys.into_iter().collect();
    let unique: Vec<Vec<NaiveDate>> = unique.into_iter().collect();
    unique
        .into_par_iter()
        .map(|dates| {
            let pool: Vec<&TransformerDayObservation> = dates
                .iter()
                .filter_map(|d| history.observations.get(d))
                .flatten()
                .collect();
            let fit = PoolClustering::fit(&pool, cfg)
                .map(Arc::new)
                .map_err(|e| e.to_string());
            (dates, fit)
        })
        .collect()
}

/// Rates every day of `scenario` for a transformer with the given forecast
/// composition. Runs on the current rayon pool; results are in day order.
///
/// Days whose pipeline fails are kept as unrated records. The run itself
/// fails when more than [`MAX_FAILURE_FRACTION`] of the days are unrated.
pub fn annual_rating_profile(
    forecast: &CompositionForecast,
    scenario: &AnnualTemperatureScenario,
    history: &FleetHistory,
    p: &ThermalParameters,
    cfg: &PipelineConfig,
) -> Result<AnnualRatingProfile> {
    let profile = rate_scenario(forecast, scenario, history, p, cfg)?;
    check_failures(&profile)?;
    Ok(profile)
}

/// Same as [`annual_rating_profile`] without the failure-rate gate.
pub fn rate_scenario(
    forecast: &CompositionForecast,
    scenario: &AnnualTemperatureScenario,
    history: &FleetHistory,
    p: &ThermalParameters,
    cfg: &PipelineConfig,
) -> Result<AnnualRatingProfile> {
    p.validate()?;
    let retrieval: Vec<std::result::Result<Vec<NaiveDate>, String>> = scenario
        .days
        .par_iter()
        .map(|sd| {
            let source = HourlyTemperatureDay {
                date: sd.source_date,
                temps: sd.temps.map(|t| t - scenario.offset_c),
            };
            let source = history.weather.get(&sd.source_date).unwrap_or(&source);
            similar_dates(sd.day_index, source, history, cfg).map_err(|e| e.to_string())
        })
        .collect();
    let cache = cluster_pools(
        retrieval.iter().filter_map(|r| r.as_ref().ok().cloned()),
        history,
        cfg,
    );

    let days: Vec<DayRecord> = scenario
        .days
        .par_iter()
        .zip(retrieval.par_iter())
        .map(|(sd, dates)| {
            let outcome = dates.clone().and_then(|dates| {
                let clustering = cache[&dates].clone()?;
                let (m, shape) = clustering
                    .shape_for(forecast.for_day(sd.day_index))
                    .map_err(|e| e.to_string())?;
                let sol = daily_rating(&shape, &sd.temps, p, cfg.tolerance, &cfg.simulation)
                    .map_err(|e| e.to_string())?;
                let diagnostics = DayDiagnostics {
                    similar_days: dates,
                    k_star: clustering.k_star,
                    q_avg: clustering.q_avg,
                    top_membership: m.max(),
                    memberships: m.probabilities,
                    pool_size: clustering.pool_size,
                    shape: shape.to_vec(),
                };
                Ok((DailyRating::from_solution(sd.day_index, sd.source_date, &sol), diagnostics))
            });
            match outcome {
                Ok((rating, diagnostics)) => DayRecord {
                    day_index: sd.day_index,
                    source_date: sd.source_date,
                    rating: Some(rating),
                    diagnostics: Some(diagnostics),
                    error: None,
                },
                Err(e) => DayRecord {
                    day_index: sd.day_index,
                    source_date: sd.source_date,
                    rating: None,
                    diagnostics: None,
                    error: Some(e),
                },
            }
        })
        .collect();
    Ok(AnnualRatingProfile {
        scenario: scenario.scenario,
        days,
    })
}

/// Estimate for one held-out transformer and its seasonal comparison.
#[derive(Debug, Clone)]
pub struct TransformerBacktest {
    pub transformer_id: String,
    pub forecast: LoadComposition,
    pub estimated: AnnualRatingProfile,
    pub reports: Vec<BacktestReport>,
}

/// Estimates `transformer_id`'s ratings for `target_year` from history before
/// that year, driven by the year's recorded weather and the transformer's
/// mean composition over the year, then compares with the ratings of its
/// actual daily loads.
pub fn backtest_transformer(
    history: &FleetHistory,
    transformer_id: &str,
    p: &ThermalParameters,
    cfg: &PipelineConfig,
) -> Result<TransformerBacktest> {
    let year = cfg.target_year;
    let actual: Vec<&TransformerDayObservation> = history
        .observations
        .iter()
        .filter(|(d, _)| d.year() == year)
        .flat_map(|(_, v)| v.iter().filter(|o| o.transformer_id == transformer_id))
        .collect();
    if actual.is_empty() {
        return Err(Error::InvalidInput(format!(
            "transformer {transformer_id} has no observations in {year}"
        )));
    }
    let forecast = mean_composition(&actual)?;
    let year_weather: Vec<HourlyTemperatureDay> = history
        .weather
        .values()
        .filter(|d| d.date.year() == year)
        .cloned()
        .collect();
    let scenario = AnnualTemperatureScenario::observed(&year_weather);
    let train = history.before_year(year)?;
    let estimated = annual_rating_profile(
        &CompositionForecast::constant(forecast),
        &scenario,
        &train,
        p,
        cfg,
    )?;
    let actual: Vec<TransformerDayObservation> = actual.into_iter().cloned().collect();
    let reports = backtest(&actual, &history.weather, &estimated, p, cfg.tolerance, &cfg.simulation)?;
    Ok(TransformerBacktest {
        transformer_id: transformer_id.to_string(),
        forecast,
        estimated,
        reports,
    })
}

pub fn check_failures(profile: &AnnualRatingProfile) -> Result<()> {
    let failed = profile.failures().count();
    let total = DAYS_PER_YEAR.max(profile.days.len());
    if failed as f64 > MAX_FAILURE_FRACTION * total as f64 {
        return Err(Error::TooManyFailures {
            failed,
            total,
            limit_pct: MAX_FAILURE_FRACTION * 100.0,
        });
    }
    Ok(())
}

/// Mean composition of one transformer's days in `year`.
pub fn mean_composition(obs: &[&TransformerDayObservation]) -> Result<LoadComposition> {
    if obs.is_empty() {
        return Err(Error::InvalidInput("no observations to average".into()));
    }
    let n = obs.len() as f64;
    let r = obs.iter().map(|o| o.composition.r).sum::<f64>() / n;
    let c = obs.iter().map(|o| o.composition.c).sum::<f64>() / n;
    LoadComposition::new(r, c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn day_ranges() {
        assert_eq!(parse_day_range("*").unwrap().len(), 365);
        assert_eq!(parse_day_range("01-01:01-31").unwrap(), (1..=31).collect::<Vec<_>>());
        let wrap = parse_day_range("12-30:01-02").unwrap();
        assert_eq!(wrap, vec![364, 365, 1, 2]);
        assert!(parse_day_range("02-29:03-01").is_err());
        assert!(parse_day_range("jan").is_err());
    }

    #[test]
    fn forecast_file() {
        let text = "date_range,r_frac,c_frac,i_frac\n*,0.2,0.5,0.3\n05-01:09-30,0.6,0.3,0.1\n";
        let f = CompositionForecast::parse(text.as_bytes(), "f.csv").unwrap();
        assert!((f.for_day(1).r - 0.2).abs() < 1e-12);
        assert!((f.for_day(200).r - 0.6).abs() < 1e-12);
        let partial = "date_range,r_frac,c_frac,i_frac\n01-01:06-30,0.2,0.5,0.3\n";
        assert!(CompositionForecast::parse(partial.as_bytes(), "f.csv").is_err());
        let bad = "date_range,r_frac,c_frac,i_frac\n*,0.3,0.3,0.3\n";
        assert!(matches!(
            CompositionForecast::parse(bad.as_bytes(), "f.csv"),
            Err(Error::InvalidComposition(_))
        ));
    }
}

//! Seeded synthetic fleet: hourly weather with seasonal and daily cycles, and
//! transformers whose loads mix residential, commercial and industrial
//! category shapes.
//!
//! Residential load is peaky (low overnight, evening peak), commercial load
//! follows business hours, industrial load is flat and high. Compositions are
//! measured at each transformer's daily peak hour, the way they would be from
//! interval metering.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::ingest::{
    classify_day, date_for_day_index, write_compositions_csv, write_loads_csv, write_weather_csv,
    DayType, HolidayCalendar, HourlyTemperatureDay, TransformerDayObservation,
};
use crate::load_shape::LoadComposition;
use crate::{DAYS_PER_YEAR, HOURS};

#[derive(Debug, Clone, PartialEq)]
pub struct FleetSpec {
    pub first_year: i32,
    pub years: usize,
    pub transformers: usize,
    pub seed: u64,
    /// Compositions every transformer cycles through, by index.
    pub archetypes: Vec<LoadComposition>,
    /// Day-to-day jitter on compositions (standard deviation of R and C).
    pub composition_jitter: f64,
    /// Relative hourly load noise.
    pub load_noise: f64,
}

impl FleetSpec {
    pub fn new(first_year: i32, years: usize, transformers: usize, seed: u64) -> Self {
        let c = |r, c| LoadComposition::new(r, c).expect("archetype");
        Self {
            first_year,
            years,
            transformers,
            seed,
            archetypes: vec![
                c(0.80, 0.15),
                c(0.05, 0.85),
                c(0.35, 0.35),
                c(0.10, 0.10),
                c(0.55, 0.40),
            ],
            composition_jitter: 0.02,
            load_noise: 0.02,
        }
    }

    /// Every transformer carries the same composition and shape, noise-free.
    pub fn uniform(first_year: i32, years: usize, transformers: usize, seed: u64, c: LoadComposition) -> Self {
        Self {
            archetypes: vec![c],
            composition_jitter: 0.0,
            load_noise: 0.0,
            ..Self::new(first_year, years, transformers, seed)
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticFleet {
    pub weather: Vec<HourlyTemperatureDay>,
    pub observations: Vec<TransformerDayObservation>,
    pub calendar: HolidayCalendar,
}

/// Fixed statutory holidays for a year (weekends are implicit).
fn holidays(year: i32) -> Vec<NaiveDate> {
    [(1, 1), (7, 1), (9, 5), (12, 25), (12, 26)]
        .iter()
        .filter_map(|(m, d)| NaiveDate::from_ymd_opt(year, *m, *d))
        .collect()
}

/// Daily-mean temperature climatology, °C: coldest mid-January, warmest
/// mid-July.
pub fn seasonal_mean(day_index: usize) -> f64 {
    4.0 - 16.0 * (2.0 * PI * (day_index as f64 - 15.0) / DAYS_PER_YEAR as f64).cos()
}

fn diurnal(hour: usize) -> f64 {
    // warmest mid-afternoon
    (2.0 * PI * (hour as f64 - 9.0) / 24.0).sin()
}

/// Per-unit category demand at `hour` for a day of `day_type` with daily
/// mean temperature `t_mean`.
pub fn category_loads(hour: usize, day_type: DayType, t_mean: f64) -> [f64; 3] {
    let h = hour as f64;
    let bump = |center: f64, width: f64| (-((h - center) / width).powi(2)).exp();
    let cooling = ((t_mean - 16.0) / 10.0).max(0.0);
    let heating = ((5.0 - t_mean) / 20.0).max(0.0);

    let mut res = 0.25 + 0.25 * bump(7.5, 1.5) + 0.75 * bump(19.0, 2.2);
    res *= 1.0 + 0.6 * cooling * bump(17.0, 4.0) + 0.3 * heating;
    let mut com = 0.2 + 0.8 * (1.0 / (1.0 + (-(h - 8.0) * 1.5).exp())) * (1.0 / (1.0 + ((h - 18.0) * 1.5).exp()));
    com *= 1.0 + 0.4 * cooling * bump(15.0, 3.0);
    let mut ind = 0.88 + 0.06 * bump(12.0, 5.0);

    if day_type == DayType::Holiday {
        res *= 1.1;
        com *= 0.55;
        ind *= 0.9;
    }
    [res, com, ind]
}

pub fn generate(spec: &FleetSpec) -> SyntheticFleet {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");

    let years: Vec<i32> = (0..spec.years as i32).map(|y| spec.first_year + y).collect();
    let calendar = HolidayCalendar::new(years.iter().flat_map(|y| holidays(*y)));

    let mut weather = Vec::new();
    for year in &years {
        let year_shift = 1.5 * unit.sample(&mut rng);
        let mut anomaly = 0.0;
        for d in 1..=DAYS_PER_YEAR {
            anomaly = 0.7 * anomaly + 2.5 * unit.sample(&mut rng);
            let swing = 4.0 + 1.5 * rng.gen::<f64>();
            let mean = seasonal_mean(d) + year_shift + anomaly;
            let mut temps = [0.0; HOURS];
            for (h, t) in temps.iter_mut().enumerate() {
                let v = mean + swing * diurnal(h) + 0.3 * unit.sample(&mut rng);
                *t = (v * 100.0).round() / 100.0;
            }
            weather.push(HourlyTemperatureDay {
                date: date_for_day_index(*year, d).expect("valid index"),
                temps,
            });
        }
    }

    let fleet: Vec<(String, LoadComposition, f64)> = (0..spec.transformers)
        .map(|i| {
            let base = spec.archetypes[i % spec.archetypes.len()];
            let size = if spec.load_noise > 0.0 { 30.0 + 15.0 * rng.gen::<f64>() } else { 40.0 };
            (format!("T{:02}", i + 1), base, size)
        })
        .collect();

    let mut observations = Vec::new();
    for day in &weather {
        let day_type = classify_day(day.date, &calendar);
        let t_mean = day.mean();
        let hourly: Vec<[f64; 3]> = (0..HOURS).map(|h| category_loads(h, day_type, t_mean)).collect();
        for (id, base, size) in &fleet {
            let jitter = |v: f64, rng: &mut ChaCha8Rng| -> f64 {
                (v + spec.composition_jitter * unit.sample(rng)).clamp(0.0, 1.0)
            };
            let mut w = [jitter(base.r, &mut rng), jitter(base.c, &mut rng), 0.0];
            let total_rc = w[0] + w[1];
            if total_rc > 1.0 {
                w[0] /= total_rc;
                w[1] /= total_rc;
            }
            w[2] = (1.0 - w[0] - w[1]).max(0.0);

            let mut loads = [0.0; HOURS];
            let mut parts = [[0.0; 3]; HOURS];
            for h in 0..HOURS {
                let noise = 1.0 + spec.load_noise * unit.sample(&mut rng);
                for k in 0..3 {
                    parts[h][k] = size * w[k] * hourly[h][k] * noise;
                }
                loads[h] = parts[h].iter().sum::<f64>();
            }
            let peak_hour = (0..HOURS)
                .max_by(|a, b| loads[*a].total_cmp(&loads[*b]))
                .expect("24 hours");
            let p = parts[peak_hour];
            let total = p.iter().sum::<f64>();
            let composition = LoadComposition::new(p[0] / total, p[1] / total).expect("valid composition");
            let loads = loads.map(|l| (l * 1000.0).round() / 1000.0);
            observations.push(
                TransformerDayObservation::new(id.clone(), day.date, loads, composition)
                    .expect("positive synthetic loads"),
            );
        }
    }

    SyntheticFleet {
        weather,
        observations,
        calendar,
    }
}

/// Writes `weather.csv`, `loads.csv`, `compositions.csv` and `holidays.txt`
/// into `dir`.
pub fn write_fixture(fleet: &SyntheticFleet, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_weather_csv(BufWriter::new(File::create(dir.join("weather.csv"))?), &fleet.weather)?;
    write_loads_csv(BufWriter::new(File::create(dir.join("loads.csv"))?), &fleet.observations)?;
    write_compositions_csv(
        BufWriter::new(File::create(dir.join("compositions.csv"))?),
        &fleet.observations,
    )?;
    let mut hol = BufWriter::new(File::create(dir.join("holidays.txt"))?);
    for d in &fleet.calendar.dates {
        writeln!(hol, "{}", d.format("%Y-%m-%d"))?;
    }
    hol.flush()?;
    Ok(())
}

/// Last calendar year covered by the fleet's weather.
pub fn last_year(fleet: &SyntheticFleet) -> Option<i32> {
    fleet.weather.iter().map(|d| d.date.year()).max()
}

use chrono::Datelike;
use txrate_core::gmm::GmmOptions;
use txrate_core::ingest::TransformerDayObservation;
use txrate_core::load_shape::LoadComposition;
use txrate_core::pipeline::{
    annual_rating_profile, backtest_transformer, CompositionForecast, FleetHistory, PipelineConfig,
};
use txrate_core::rating::{AnnualRatingProfile, Season};
use txrate_core::synthetic::{generate, FleetSpec, SyntheticFleet};
use txrate_core::temperature::{build_scenario_profile, ScenarioKind};
use txrate_core::thermal::ThermalParameters;
use txrate_core::HOURS;

const P: ThermalParameters = ThermalParameters::ONAF_50MVA;

fn history(fleet: &SyntheticFleet) -> FleetHistory {
    FleetHistory::new(
        fleet.weather.clone(),
        fleet.observations.clone(),
        fleet.calendar.clone(),
    )
    .unwrap()
}

/// Lighter clustering settings to keep full-year runs quick.
fn quick_config(target_year: i32) -> PipelineConfig {
    PipelineConfig {
        k_max: 5,
        gmm: GmmOptions { n_init: 2, ..GmmOptions::default() },
        ..PipelineConfig::new(target_year, 11)
    }
}

fn rate(fleet: &SyntheticFleet, h: &FleetHistory, c: LoadComposition, kind: ScenarioKind, offset: f64) -> AnnualRatingProfile {
    let scenario = build_scenario_profile(&fleet.weather, kind, offset).unwrap();
    annual_rating_profile(&CompositionForecast::constant(c), &scenario, h, &P, &quick_config(2018)).unwrap()
}

fn ratings(p: &AnnualRatingProfile) -> Vec<f64> {
    p.days.iter().map(|d| d.rating.as_ref().expect("rated").rating_mva).collect()
}

#[test]
fn summer_ratings_are_lower_than_winter() {
    let fleet = generate(&FleetSpec::new(2016, 2, 10, 42));
    let h = history(&fleet);
    let c = LoadComposition::new(0.35, 0.35).unwrap();
    for kind in [ScenarioKind::High, ScenarioKind::Low] {
        let p = rate(&fleet, &h, c, kind, 0.0);
        assert_eq!(p.failures().count(), 0);
        let (w, s) = (p.season_mean(Season::Winter).unwrap(), p.season_mean(Season::Summer).unwrap());
        assert!(s < w, "{kind}: summer {s} winter {w}");
    }
}

#[test]
fn warmer_offset_lowers_every_day() {
    let fleet = generate(&FleetSpec::new(2016, 2, 6, 3));
    let h = history(&fleet);
    let c = LoadComposition::new(0.6, 0.3).unwrap();
    let base = ratings(&rate(&fleet, &h, c, ScenarioKind::Medium, 0.0));
    let warm = ratings(&rate(&fleet, &h, c, ScenarioKind::Medium, 5.0));
    for (d, (b, w)) in base.iter().zip(&warm).enumerate() {
        assert!(w < b, "day {}: {w} >= {b}", d + 1);
    }
}

#[test]
fn residential_heavy_forecast_rates_higher_than_industrial_heavy() {
    let fleet = generate(&FleetSpec::new(2016, 2, 10, 42));
    let h = history(&fleet);
    let res = LoadComposition::new(0.80, 0.15).unwrap();
    let ind = LoadComposition::new(0.10, 0.10).unwrap();
    let mean = |p: &AnnualRatingProfile| ratings(p).iter().sum::<f64>() / 365.0;
    let r = mean(&rate(&fleet, &h, res, ScenarioKind::Medium, 0.0));
    let i = mean(&rate(&fleet, &h, ind, ScenarioKind::Medium, 0.0));
    assert!(r > i, "residential {r} industrial {i}");
}

#[test]
fn identical_fleet_falls_back_to_one_cluster() {
    let c = LoadComposition::new(0.5, 0.3).unwrap();
    let mut fleet = generate(&FleetSpec::uniform(2016, 2, 4, 1, c));
    for o in &mut fleet.observations {
        o.composition = c;
    }
    let h = history(&fleet);
    let p = rate(&fleet, &h, c, ScenarioKind::High, 0.0);
    assert_eq!(p.failures().count(), 0);
    assert!(p.days.iter().all(|d| d.diagnostics.as_ref().unwrap().k_star == 1));
}

#[test]
fn runs_are_deterministic() {
    let fleet = generate(&FleetSpec::new(2016, 2, 5, 9));
    let h = history(&fleet);
    let c = LoadComposition::new(0.3, 0.5).unwrap();
    let a = rate(&fleet, &h, c, ScenarioKind::Low, 1.0);
    let b = rate(&fleet, &h, c, ScenarioKind::Low, 1.0);
    assert_eq!(ratings(&a), ratings(&b));
}

#[test]
fn self_consistent_backtest_has_zero_error() {
    // every transformer-day carries the same normalized shape, so the
    // estimated shape equals each actual day's shape
    let base = generate(&FleetSpec::new(2016, 2, 1, 5));
    let shape: [f64; HOURS] =
        std::array::from_fn(|h| 0.6 + 0.4 * (-((h as f64 - 18.0) / 3.0).powi(2)).exp());
    let mut observations = Vec::new();
    for day in &base.weather {
        for (i, (r, c)) in [(0.7, 0.2), (0.2, 0.6), (0.1, 0.1), (0.4, 0.4)].iter().enumerate() {
            let comp = LoadComposition::new(*r, *c).unwrap();
            let size = 20.0 + 5.0 * i as f64;
            observations.push(
                TransformerDayObservation::new(format!("T{i}"), day.date, shape.map(|v| v * size), comp).unwrap(),
            );
        }
    }
    let h = FleetHistory::new(base.weather.clone(), observations, base.calendar.clone()).unwrap();
    let year = base.weather.iter().map(|d| d.date.year()).max().unwrap();
    let bt = backtest_transformer(&h, "T2", &P, &quick_config(year)).unwrap();
    assert_eq!(bt.reports.len(), 2);
    assert_eq!(bt.reports[0].season, Season::Winter);
    for r in &bt.reports {
        assert!(r.me_pct.abs() < 1e-9 && r.ae_pct.abs() < 1e-9 && r.ve_pct.abs() < 1e-9, "{r:?}");
    }
    assert!(backtest_transformer(&h, "T9", &P, &quick_config(year)).is_err());
}

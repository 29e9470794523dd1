use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use anyhow::{bail, Context, Result};
use chrono::Datelike;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use txrate_core::export;
use txrate_core::ingest::{
    fill_gaps, parse_transformer_csv, parse_weather_records, HolidayCalendar, HourlyTemperatureDay,
    DEFAULT_MAX_GAP_HOURS,
};
use txrate_core::pipeline::{
    backtest_transformer, check_failures, rate_scenario, CompositionForecast, FleetHistory, PipelineConfig,
};
use txrate_core::rating::{daily_rating, seasonal_reports, AnnualRatingProfile, Season, DEFAULT_TOLERANCE};
use txrate_core::synthetic::{generate, write_fixture, FleetSpec};
use txrate_core::temperature::{build_scenario_profile, ScenarioKind};
use txrate_core::thermal::{simulate_day as simulate, SimulationOptions};
use txrate_core::HOURS;

use crate::config::RunConfig;
use crate::report::{RunReport, ScenarioSummary};

fn create(dir: &Path, name: &str, report: &mut RunReport) -> Result<BufWriter<File>> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    report.outputs.push(name.to_string());
    Ok(BufWriter::new(
        File::create(&path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    ))
}

fn file_name(path: &Path) -> String {
    path.display().to_string()
}

fn scenarios(cfg: &RunConfig) -> Result<Vec<ScenarioKind>> {
    match cfg.scenario.as_deref().unwrap_or("all") {
        "all" => Ok(ScenarioKind::PLANNING.to_vec()),
        name => match name.parse::<ScenarioKind>()? {
            ScenarioKind::Observed => bail!("the observed scenario is only used by backtests"),
            kind => Ok(vec![kind]),
        },
    }
}

fn thread_pool(cfg: &RunConfig) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallelism()?)
        .build()
        .context("starting worker threads")
}

fn load_weather(cfg: &RunConfig, report: &mut RunReport) -> Result<Vec<HourlyTemperatureDay>> {
    let path = RunConfig::require_path(&cfg.weather, "weather")?;
    let records = parse_weather_records(open(path)?, &file_name(path))?;
    let filled = fill_gaps(&records, cfg.max_gap_hours.unwrap_or(DEFAULT_MAX_GAP_HOURS));
    if !filled.removed.is_empty() {
        report.warnings.push(format!(
            "{} weather day(s) dropped for unfillable gaps, first {}",
            filled.removed.len(),
            filled.removed[0]
        ));
    }
    if filled.days.is_empty() {
        bail!("{} holds no complete weather day", path.display());
    }
    Ok(filled.days)
}

fn load_history(cfg: &RunConfig, report: &mut RunReport) -> Result<FleetHistory> {
    let weather = load_weather(cfg, report)?;
    let loads = RunConfig::require_path(&cfg.loads, "loads")?;
    let comps = RunConfig::require_path(&cfg.compositions, "compositions")?;
    let observations = parse_transformer_csv(open(loads)?, &file_name(loads), open(comps)?, &file_name(comps))?;
    let calendar = match &cfg.holidays {
        Some(_) => {
            let path = RunConfig::require_path(&cfg.holidays, "holidays")?;
            HolidayCalendar::parse(open(path)?, &file_name(path))?
        }
        None => {
            report.warnings.push("no holiday file; only weekends count as holidays".into());
            HolidayCalendar::default()
        }
    };
    Ok(FleetHistory::new(weather, observations, calendar)?)
}

fn pipeline_config(cfg: &RunConfig, target_year: i32) -> Result<PipelineConfig> {
    let mut pc = PipelineConfig::new(target_year, cfg.seed()?);
    pc.tolerance = cfg.tolerance.unwrap_or(DEFAULT_TOLERANCE);
    if !(pc.tolerance > 0.0) {
        bail!("tolerance must be positive");
    }
    pc.k_min = cfg.k_min.unwrap_or(pc.k_min);
    pc.k_max = cfg.k_max.unwrap_or(pc.k_max);
    pc.similar_days = cfg.similar_days.unwrap_or(pc.similar_days);
    pc.simulation = simulation_options(cfg);
    Ok(pc)
}

fn simulation_options(cfg: &RunConfig) -> SimulationOptions {
    SimulationOptions {
        exponent: cfg.response_exponent.unwrap_or_default(),
        ..SimulationOptions::default()
    }
}

fn history_years(days: &[HourlyTemperatureDay]) -> (usize, i32) {
    let years: std::collections::BTreeSet<i32> = days.iter().map(|d| d.date.year()).collect();
    (years.len(), *years.last().expect("non-empty weather"))
}

pub fn build_temps(cfg: &RunConfig, report: &mut RunReport) -> Result<()> {
    let weather = load_weather(cfg, report)?;
    let (years, _) = history_years(&weather);
    if years != 5 {
        report
            .warnings
            .push(format!("weather history spans {years} year(s); five are expected"));
    }
    let offset = cfg.offset_c.unwrap_or(0.0);
    let out = cfg.out_dir();
    let mut built = Vec::new();
    for kind in scenarios(cfg)? {
        let scenario = build_scenario_profile(&weather, kind, offset)?;
        export::write_scenario_csv(create(&out, &format!("scenario_{kind}.csv"), report)?, &scenario)?;
        built.push(scenario);
    }
    export::write_scenario_sources_csv(create(&out, "scenario_sources.csv", report)?, &built)?;
    Ok(())
}

fn forecast(cfg: &RunConfig) -> Result<CompositionForecast> {
    if cfg.forecast.is_some() {
        let path = RunConfig::require_path(&cfg.forecast, "forecast")?;
        return Ok(CompositionForecast::parse(open(path)?, &file_name(path))?);
    }
    match cfg.constant_composition()? {
        Some(c) => Ok(CompositionForecast::constant(c)),
        None => bail!("no forecast given (set `forecast` or `composition`, or pass --forecast / --composition)"),
    }
}

fn summarize(profile: &AnnualRatingProfile, offset_c: f64, report: &mut RunReport) {
    for day in profile.failures() {
        report.warnings.push(format!(
            "{} day {}: {}",
            profile.scenario,
            day.day_index,
            day.error.as_deref().unwrap_or("unrated")
        ));
    }
    report.scenarios.push(ScenarioSummary {
        name: profile.scenario.to_string(),
        offset_c,
        rated_days: profile.rated().count(),
        failed_days: profile.failures().count(),
        winter_mean_mva: profile.season_mean(Season::Winter),
        summer_mean_mva: profile.season_mean(Season::Summer),
    });
}

pub fn rate_year(cfg: &RunConfig, report: &mut RunReport) -> Result<()> {
    let history = load_history(cfg, report)?;
    let p = cfg.thermal_parameters()?;
    let forecast = forecast(cfg)?;
    let weather: Vec<HourlyTemperatureDay> = history.weather.values().cloned().collect();
    let (years, last) = history_years(&weather);
    if years != 5 {
        report
            .warnings
            .push(format!("weather history spans {years} year(s); five are expected"));
    }
    let pc = pipeline_config(cfg, cfg.target_year.unwrap_or(last + 1))?;
    let offset = cfg.offset_c.unwrap_or(0.0);
    let out = cfg.out_dir();
    let pool = thread_pool(cfg)?;

    let mut profiles = Vec::new();
    for kind in scenarios(cfg)? {
        let scenario = build_scenario_profile(&weather, kind, offset)?;
        let profile = pool.install(|| rate_scenario(&forecast, &scenario, &history, &p, &pc))?;
        summarize(&profile, offset, report);
        if let Err(e) = check_failures(&profile) {
            report.errors.push(format!("{kind}: {e}"));
        }
        export::write_rating_csv(create(&out, &format!("ratings_{kind}.csv"), report)?, &profile)?;
        export::write_shape_csv(create(&out, &format!("shapes_{kind}.csv"), report)?, &profile)?;
        profiles.push(profile);
    }

    if cfg.plots.unwrap_or(true) {
        let title = |what: &str| format!("Annual dynamic rating, {what} ({:.0} MVA nameplate)", p.rated_mva);
        for profile in &profiles {
            let name = profile.scenario.to_string();
            let svg = export::rating_svg(&title(&format!("{name} temperature")), &[(&name, profile)]);
            write_text(&out, &format!("ratings_{name}.svg"), &svg, report)?;
        }
        if profiles.len() > 1 {
            let series: Vec<(String, &AnnualRatingProfile)> =
                profiles.iter().map(|p| (p.scenario.to_string(), p)).collect();
            let series: Vec<(&str, &AnnualRatingProfile)> = series.iter().map(|(n, p)| (n.as_str(), *p)).collect();
            write_text(&out, "ratings_all.svg", &export::rating_svg(&title("all scenarios"), &series), report)?;
        }
    }
    Ok(())
}

fn write_text(dir: &Path, name: &str, text: &str, report: &mut RunReport) -> Result<()> {
    use std::io::Write;
    let mut w = create(dir, name, report)?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

fn safe_name(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

pub fn backtest(
    cfg: &RunConfig,
    held_out: &[String],
    test_fraction: Option<f64>,
    report: &mut RunReport,
) -> Result<()> {
    let history = load_history(cfg, report)?;
    let p = cfg.thermal_parameters()?;
    let ids: Vec<String> = history.transformer_ids().into_iter().collect();
    let selected: Vec<String> = match test_fraction {
        Some(f) => {
            if !(f > 0.0 && f <= 1.0) {
                bail!("test fraction must be in (0, 1], got {f}");
            }
            let count = ((f * ids.len() as f64).ceil() as usize).max(1);
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed()?);
            let mut chosen: Vec<String> = ids.choose_multiple(&mut rng, count).cloned().collect();
            chosen.sort();
            chosen
        }
        None if held_out.is_empty() => bail!("name a transformer with --held-out or use --test-fraction"),
        None => {
            for id in held_out {
                if !ids.contains(id) {
                    bail!("held-out transformer {id} is not in the loads file");
                }
            }
            held_out.to_vec()
        }
    };
    let last_obs_year = history
        .observations
        .keys()
        .next_back()
        .map(|d| d.year())
        .context("no observations")?;
    let pc = pipeline_config(cfg, cfg.target_year.unwrap_or(last_obs_year))?;
    let out = cfg.out_dir();
    let pool = thread_pool(cfg)?;

    let mut results = Vec::new();
    for id in &selected {
        match pool.install(|| backtest_transformer(&history, id, &p, &pc)) {
            Ok(bt) => {
                summarize(&bt.estimated, 0.0, report);
                if let Some(s) = report.scenarios.last_mut() {
                    s.name = format!("{id} observed {}", pc.target_year);
                }
                let stem = safe_name(id);
                export::write_backtest_csv(create(&out, &format!("backtest_{stem}.csv"), report)?, &bt.reports)?;
                export::write_rating_csv(create(&out, &format!("estimated_{stem}.csv"), report)?, &bt.estimated)?;
                results.push((id.clone(), bt.reports));
            }
            Err(e) => report.errors.push(format!("{id}: {e}")),
        }
    }
    export::write_backtest_summary_csv(create(&out, "backtest_summary.csv", report)?, &results)?;
    for (id, reports) in &results {
        for r in reports {
            println!(
                "{id} {}: ME {:.3}% AE {:.3}% VE {:.3}% ({} days)",
                r.season, r.me_pct, r.ae_pct, r.ve_pct, r.days
            );
        }
    }
    Ok(())
}

fn parse_hourly(text: &str, what: &str) -> Result<[f64; HOURS]> {
    let values: Vec<f64> = text
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("{what}: expected comma-separated numbers"))?;
    match values.len() {
        1 => Ok([values[0]; HOURS]),
        HOURS => Ok(std::array::from_fn(|h| values[h])),
        n => bail!("{what}: expected 1 or {HOURS} values, got {n}"),
    }
}

pub fn simulate_day(
    cfg: &RunConfig,
    load_pu: &str,
    ambient_c: &str,
    rate: bool,
    report: &mut RunReport,
) -> Result<()> {
    let loads = parse_hourly(load_pu, "load-pu")?;
    let ambient = parse_hourly(ambient_c, "ambient-c")?;
    let ambient = ambient.map(|t| t + cfg.offset_c.unwrap_or(0.0));
    let p = cfg.thermal_parameters()?;
    let sim = simulation_options(cfg);
    let result = simulate(&loads, &ambient, &p, &sim)?;
    export::write_trace_csv(create(&cfg.out_dir(), "trace.csv", report)?, &loads, &ambient, &result)?;
    let peak = result.theta_h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    println!("F_EQA {:.6}", result.f_eqa);
    println!("peak hot-spot {:.3} °C", peak);
    println!("passes {}", result.iterations);
    if rate {
        let tol = cfg.tolerance.unwrap_or(DEFAULT_TOLERANCE);
        let sol = daily_rating(&loads, &ambient, &p, tol, &sim)?;
        println!("rating {:.4} MVA (peak {:.4} p.u., F_EQA {:.6})", sol.rating_mva, sol.peak_pu, sol.f_eqa);
    }
    Ok(())
}

pub fn metrics(cfg: &RunConfig, actual: &Path, estimated: &Path, report: &mut RunReport) -> Result<()> {
    let a = export::read_rating_csv(open(actual)?, &file_name(actual))?;
    let e: std::collections::BTreeMap<usize, f64> =
        export::read_rating_csv(open(estimated)?, &file_name(estimated))?.into_iter().collect();
    let pairs: Vec<(usize, f64, f64)> = a
        .iter()
        .filter_map(|(d, av)| e.get(d).map(|ev| (*d, *av, *ev)))
        .collect();
    let unmatched = a.len() - pairs.len();
    if unmatched > 0 {
        report
            .warnings
            .push(format!("{unmatched} actual day(s) have no estimate and are left out"));
    }
    let reports = seasonal_reports(&pairs)?;
    export::write_backtest_csv(create(&cfg.out_dir(), "metrics.csv", report)?, &reports)?;
    for r in &reports {
        println!("{}: ME {:.3}% AE {:.3}% VE {:.3}% ({} days)", r.season, r.me_pct, r.ae_pct, r.ve_pct, r.days);
    }
    Ok(())
}

pub fn generate_fixture(
    cfg: &RunConfig,
    transformers: usize,
    years: usize,
    first_year: i32,
    report: &mut RunReport,
) -> Result<()> {
    if transformers == 0 || years == 0 {
        bail!("a fixture needs at least one transformer and one year");
    }
    let seed = cfg.seed()?;
    let fleet = generate(&FleetSpec::new(first_year, years, transformers, seed));
    let out = cfg.out_dir();
    write_fixture(&fleet, &out)?;
    report
        .outputs
        .extend(["weather.csv", "loads.csv", "compositions.csv", "holidays.txt"].map(String::from));
    let config = format!(
        "# Run configuration for the synthetic fixture in this directory.\n\
         weather = \"weather.csv\"\n\
         loads = \"loads.csv\"\n\
         compositions = \"compositions.csv\"\n\
         holidays = \"holidays.txt\"\n\
         composition = [0.35, 0.35, 0.30]\n\
         preset = \"onaf-50mva\"\n\
         seed = {seed}\n\
         scenario = \"all\"\n\
         offset_c = 0.0\n\
         out_dir = \"results\"\n"
    );
    write_text(&out, "txrate.toml", &config, report)?;
    Ok(())
}

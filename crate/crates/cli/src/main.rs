mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{parse_composition, RunConfig};
use crate::report::RunReport;

#[derive(Parser, Debug)]
#[command(name = "txrate", version, about = "Annual dynamic rating of distribution transformers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build high/medium/low annual temperature scenarios from weather history.
    BuildTemps(Common),
    /// Estimate the 365-day rating profile of a forecast composition.
    RateYear(Common),
    /// Compare estimated against actual ratings for held-out transformers.
    Backtest {
        #[command(flatten)]
        common: Common,
        /// Transformer to hold out (repeatable).
        #[arg(long = "held-out", value_name = "ID")]
        held_out: Vec<String>,
        /// Hold out a seeded random share of the fleet instead.
        #[arg(long, value_name = "FRACTION", conflicts_with = "held_out")]
        test_fraction: Option<f64>,
    },
    /// Thermal trace of one day for given hourly loads and ambient.
    SimulateDay {
        #[command(flatten)]
        common: Common,
        /// Per-unit loads: 24 comma-separated values, or one for a flat day.
        #[arg(long, value_name = "LIST")]
        load_pu: String,
        /// Ambient °C: 24 comma-separated values, or one for a flat day.
        #[arg(long, value_name = "LIST")]
        ambient_c: String,
        /// Also solve for the rating of this load shape.
        #[arg(long)]
        rate: bool,
    },
    /// Seasonal ME/AE/VE between two rating CSVs.
    Metrics {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "CSV")]
        actual: PathBuf,
        #[arg(long, value_name = "CSV")]
        estimated: PathBuf,
    },
    /// Write a seeded synthetic fleet and a matching config file.
    GenerateFixture {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10)]
        transformers: usize,
        #[arg(long, default_value_t = 2)]
        years: usize,
        #[arg(long, default_value_t = 2016)]
        first_year: i32,
    },
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// TOML run configuration; flags override its values.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Uniform temperature offset added to every scenario hour, °C.
    #[arg(long, allow_hyphen_values = true)]
    offset_c: Option<f64>,
    /// high, medium, low or all.
    #[arg(long)]
    scenario: Option<String>,
    /// Allowed |F_EQA − 1| at the rating solution.
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    /// Worker threads for the per-day computations.
    #[arg(long)]
    parallelism: Option<usize>,

    #[arg(long, value_name = "CSV")]
    weather: Option<PathBuf>,
    #[arg(long, value_name = "CSV")]
    loads: Option<PathBuf>,
    #[arg(long, value_name = "CSV")]
    compositions: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    holidays: Option<PathBuf>,
    /// Forecast composition file (`date_range,r_frac,c_frac,i_frac`).
    #[arg(long, value_name = "CSV")]
    forecast: Option<PathBuf>,
    /// Constant forecast composition `r,c,i` (or `r,c`).
    #[arg(long, value_name = "R,C[,I]")]
    composition: Option<String>,
    /// Thermal parameter file (TOML).
    #[arg(long, value_name = "FILE")]
    thermal: Option<PathBuf>,
    /// Thermal preset name.
    #[arg(long)]
    preset: Option<String>,
    /// Year whose calendar classifies the profile days.
    #[arg(long)]
    target_year: Option<i32>,
}

impl Common {
    fn resolve(&self) -> anyhow::Result<RunConfig> {
        let file = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let composition = self.composition.as_deref().map(parse_composition).transpose()?;
        let flags = RunConfig {
            weather: self.weather.clone(),
            loads: self.loads.clone(),
            compositions: self.compositions.clone(),
            holidays: self.holidays.clone(),
            forecast: self.forecast.clone(),
            composition,
            thermal: self.thermal.clone(),
            preset: self.preset.clone(),
            seed: self.seed,
            offset_c: self.offset_c,
            scenario: self.scenario.clone(),
            tolerance: self.tolerance,
            out_dir: self.out_dir.clone(),
            parallelism: self.parallelism,
            target_year: self.target_year,
            ..RunConfig::default()
        };
        Ok(file.overlay(flags))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (name, common) = match &cli.command {
        Command::BuildTemps(c) => ("build-temps", c),
        Command::RateYear(c) => ("rate-year", c),
        Command::Backtest { common, .. } => ("backtest", common),
        Command::SimulateDay { common, .. } => ("simulate-day", common),
        Command::Metrics { common, .. } => ("metrics", common),
        Command::GenerateFixture { common, .. } => ("generate-fixture", common),
    };
    let mut report = RunReport::new(name);
    let cfg = match common.resolve() {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::FAILURE;
        }
    };
    report.seed = cfg.seed;

    let outcome = match &cli.command {
        Command::BuildTemps(_) => commands::build_temps(&cfg, &mut report),
        Command::RateYear(_) => commands::rate_year(&cfg, &mut report),
        Command::Backtest { held_out, test_fraction, .. } => {
            commands::backtest(&cfg, held_out, *test_fraction, &mut report)
        }
        Command::SimulateDay { load_pu, ambient_c, rate, .. } => {
            commands::simulate_day(&cfg, load_pu, ambient_c, *rate, &mut report)
        }
        Command::Metrics { actual, estimated, .. } => commands::metrics(&cfg, actual, estimated, &mut report),
        Command::GenerateFixture { transformers, years, first_year, .. } => {
            commands::generate_fixture(&cfg, *transformers, *years, *first_year, &mut report)
        }
    };
    if let Err(e) = outcome {
        report.errors.push(format!("{e:#}"));
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    for e in &report.errors {
        eprintln!("error: {e}");
    }
    if let Err(e) = report.write(&cfg.out_dir()) {
        eprintln!("error: writing run report: {e:#}");
        return ExitCode::FAILURE;
    }
    if report.errors.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

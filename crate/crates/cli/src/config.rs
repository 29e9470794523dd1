//! Run configuration: an optional TOML file overlaid by command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use txrate_core::load_shape::LoadComposition;
use txrate_core::thermal::{ResponseExponent, ThermalParameterFile, ThermalParameters};

/// Default worker count. Fixed rather than machine-derived; results do not
/// depend on it.
pub const DEFAULT_PARALLELISM: usize = 4;

/// Every key of the config file. All optional; flags win over file values.
#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub weather: Option<PathBuf>,
    pub loads: Option<PathBuf>,
    pub compositions: Option<PathBuf>,
    pub holidays: Option<PathBuf>,
    /// `date_range,r_frac,c_frac,i_frac` forecast file.
    pub forecast: Option<PathBuf>,
    /// Constant forecast composition `[r, c, i]`.
    pub composition: Option<[f64; 3]>,
    /// Thermal parameter file (TOML).
    pub thermal: Option<PathBuf>,
    /// Thermal preset name, used when no thermal file is given.
    pub preset: Option<String>,
    pub seed: Option<u64>,
    pub offset_c: Option<f64>,
    /// `high`, `medium`, `low` or `all`.
    pub scenario: Option<String>,
    pub tolerance: Option<f64>,
    pub out_dir: Option<PathBuf>,
    pub parallelism: Option<usize>,
    pub target_year: Option<i32>,
    pub k_min: Option<usize>,
    pub k_max: Option<usize>,
    pub similar_days: Option<usize>,
    pub max_gap_hours: Option<usize>,
    pub response_exponent: Option<ResponseExponent>,
    /// Write SVG plots next to the CSVs (default true).
    pub plots: Option<bool>,
}

impl RunConfig {
    /// Reads a config file; relative paths in it are taken relative to the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.weather,
            &mut cfg.loads,
            &mut cfg.compositions,
            &mut cfg.holidays,
            &mut cfg.forecast,
            &mut cfg.thermal,
            &mut cfg.out_dir,
        ] {
            if let Some(rel) = p.as_ref().filter(|p| p.is_relative()) {
                *p = Some(base.join(rel));
            }
        }
        Ok(cfg)
    }

    /// Values set in `over` replace those in `self`.
    pub fn overlay(self, over: RunConfig) -> RunConfig {
        macro_rules! pick {
            ($($f:ident),*) => { RunConfig { $($f: over.$f.or(self.$f)),* } };
        }
        pick!(
            weather, loads, compositions, holidays, forecast, composition, thermal, preset, seed,
            offset_c, scenario, tolerance, out_dir, parallelism, target_year, k_min, k_max,
            similar_days, max_gap_hours, response_exponent, plots
        )
    }

    pub fn require_path<'a>(field: &'a Option<PathBuf>, name: &str) -> Result<&'a Path> {
        match field {
            Some(p) if p.exists() => Ok(p),
            Some(p) => bail!("{name} file {} does not exist", p.display()),
            None => bail!("no {name} file given (set `{name}` in the config or pass --{name})"),
        }
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed
            .context("no seed given (set `seed` in the config or pass --seed)")
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn parallelism(&self) -> Result<usize> {
        match self.parallelism.unwrap_or(DEFAULT_PARALLELISM) {
            0 => bail!("parallelism must be at least 1"),
            n => Ok(n),
        }
    }

    pub fn thermal_parameters(&self) -> Result<ThermalParameters> {
        if let Some(path) = &self.thermal {
            return ThermalParameterFile::load(path).with_context(|| format!("thermal file {}", path.display()));
        }
        let name = self.preset.as_deref().unwrap_or("onaf-50mva");
        ThermalParameters::preset(name).with_context(|| format!("unknown thermal preset {name:?}"))
    }

    pub fn constant_composition(&self) -> Result<Option<LoadComposition>> {
        let Some([r, c, i]) = self.composition else { return Ok(None) };
        txrate_core::ingest::validate_composition(r, c, i)
            .map(Some)
            .map_err(|m| anyhow::anyhow!("composition: {m}"))
    }
}

/// Parses `r,c,i` (or `r,c` with the industrial share implied).
pub fn parse_composition(text: &str) -> Result<[f64; 3]> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("composition {text:?} is not a comma-separated list of numbers"))?;
    match parts[..] {
        [r, c, i] => Ok([r, c, i]),
        [r, c] => Ok([r, c, 1.0 - r - c]),
        _ => bail!("composition {text:?} needs two or three fractions"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_file_values() {
        let file = RunConfig {
            seed: Some(1),
            offset_c: Some(2.0),
            ..RunConfig::default()
        };
        let flags = RunConfig {
            seed: Some(7),
            ..RunConfig::default()
        };
        let merged = file.overlay(flags);
        assert_eq!(merged.seed, Some(7));
        assert_eq!(merged.offset_c, Some(2.0));
    }

    #[test]
    fn compositions() {
        assert_eq!(parse_composition("0.5, 0.3,0.2").unwrap(), [0.5, 0.3, 0.2]);
        let [r, c, i] = parse_composition("0.5,0.25").unwrap();
        assert_eq!((r, c), (0.5, 0.25));
        assert!((i - 0.25).abs() < 1e-12);
        assert!(parse_composition("0.5").is_err());
        assert!(parse_composition("a,b").is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("sed = 3").is_err());
        let cfg: RunConfig = toml::from_str("seed = 3\nresponse_exponent = \"literal-twenty-four\"").unwrap();
        assert_eq!(cfg.response_exponent, Some(ResponseExponent::LiteralTwentyFour));
    }
}

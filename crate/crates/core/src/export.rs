//! CSV and SVG outputs.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::rating::{AnnualRatingProfile, BacktestReport};
use crate::temperature::AnnualTemperatureScenario;
use crate::thermal::DayThermalResult;
use crate::HOURS;

pub fn write_scenario_csv<W: Write>(writer: W, scenario: &AnnualTemperatureScenario) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["day_index", "source_date", "hour", "temp_c"])?;
    for day in &scenario.days {
        let date = day.source_date.format("%Y-%m-%d").to_string();
        for (h, t) in day.temps.iter().enumerate() {
            wtr.write_record([day.day_index.to_string(), date.clone(), h.to_string(), t.to_string()])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_rating_csv<W: Write>(writer: W, profile: &AnnualRatingProfile) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record([
        "day_index",
        "source_date",
        "rating_mva",
        "peak_pu",
        "f_eqa",
        "k_star",
        "top_membership",
    ])?;
    for day in &profile.days {
        let mut row = vec![
            day.day_index.to_string(),
            day.source_date.format("%Y-%m-%d").to_string(),
        ];
        match (&day.rating, &day.diagnostics) {
            (Some(r), Some(d)) => row.extend([
                r.rating_mva.to_string(),
                r.peak_pu.to_string(),
                r.f_eqa_at_solution.to_string(),
                d.k_star.to_string(),
                d.top_membership.to_string(),
            ]),
            _ => row.extend(std::iter::repeat_n(String::new(), 5)),
        }
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_shape_csv<W: Write>(writer: W, profile: &AnnualRatingProfile) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["day_index", "hour", "load_pu"])?;
    for day in &profile.days {
        if let Some(d) = &day.diagnostics {
            for (h, v) in d.shape.iter().enumerate() {
                wtr.write_record([day.day_index.to_string(), h.to_string(), v.to_string()])?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_trace_csv<W: Write>(
    writer: W,
    loads_pu: &[f64; HOURS],
    ambient: &[f64; HOURS],
    result: &DayThermalResult,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record([
        "hour",
        "load_pu",
        "ambient_c",
        "dtheta_to_c",
        "dtheta_h_c",
        "theta_h_c",
        "f_aa",
    ])?;
    for h in 0..HOURS {
        wtr.write_record([
            (h + 1).to_string(),
            loads_pu[h].to_string(),
            ambient[h].to_string(),
            result.dtheta_to[h].to_string(),
            result.dtheta_h[h].to_string(),
            result.theta_h[h].to_string(),
            result.f_aa[h].to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// `season,me_pct,ae_pct,ve_pct`, winter first.
pub fn write_backtest_csv<W: Write>(writer: W, reports: &[BacktestReport]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["season", "me_pct", "ae_pct", "ve_pct"])?;
    for r in reports {
        wtr.write_record([
            r.season.to_string(),
            r.me_pct.to_string(),
            r.ae_pct.to_string(),
            r.ve_pct.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Backtest results of several transformers:
/// `transformer_id,season,me_pct,ae_pct,ve_pct`.
pub fn write_backtest_summary_csv<W: Write>(
    writer: W,
    results: &[(String, Vec<BacktestReport>)],
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["transformer_id", "season", "me_pct", "ae_pct", "ve_pct"])?;
    for (id, reports) in results {
        for r in reports {
            wtr.write_record([
                id.clone(),
                r.season.to_string(),
                r.me_pct.to_string(),
                r.ae_pct.to_string(),
                r.ve_pct.to_string(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Per-day source dates of several scenarios: `day_index,<scenario>...`.
pub fn write_scenario_sources_csv<W: Write>(writer: W, scenarios: &[AnnualTemperatureScenario]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["day_index".to_string()];
    header.extend(scenarios.iter().map(|s| s.scenario.to_string()));
    wtr.write_record(&header)?;
    let days = scenarios.iter().map(|s| s.days.len()).max().unwrap_or(0);
    for i in 0..days {
        let mut row = vec![scenarios
            .iter()
            .find_map(|s| s.days.get(i))
            .map(|d| d.day_index.to_string())
            .unwrap_or_default()];
        row.extend(scenarios.iter().map(|s| {
            s.days
                .get(i)
                .map(|d| d.source_date.format("%Y-%m-%d").to_string())
                .unwrap_or_default()
        }));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads `(day_index, rating_mva)` pairs from a rating CSV, skipping unrated
/// rows.
pub fn read_rating_csv<R: Read>(reader: R, source_name: &str) -> Result<Vec<(usize, f64)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            source_name: source_name.into(),
            line: 1,
            message: format!("missing column {name}"),
        })
    };
    let (di, ri) = (col("day_index")?, col("rating_mva")?);
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let bad = |m: String| Error::Parse {
            source_name: source_name.into(),
            line,
            message: m,
        };
        let raw = record.get(ri).unwrap_or("");
        if raw.is_empty() {
            continue;
        }
        let day: usize = record
            .get(di)
            .unwrap_or("")
            .parse()
            .map_err(|_| bad("bad day_index".into()))?;
        let rating: f64 = raw.parse().map_err(|_| bad(format!("bad rating {raw:?}")))?;
        out.push((day, rating));
    }
    Ok(out)
}

/// Static line chart of one or more 365-day rating curves.
pub fn rating_svg(title: &str, series: &[(&str, &AnnualRatingProfile)]) -> String {
    const W: f64 = 900.0;
    const H: f64 = 420.0;
    const LEFT: f64 = 60.0;
    const RIGHT: f64 = 20.0;
    const TOP: f64 = 40.0;
    const BOTTOM: f64 = 50.0;
    const COLORS: [&str; 4] = ["#d62728", "#ff7f0e", "#1f77b4", "#2ca02c"];

    let values: Vec<f64> = series
        .iter()
        .flat_map(|(_, p)| p.rated().map(|r| r.rating_mva))
        .collect();
    let (mut lo, mut hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    if !lo.is_finite() {
        lo = 0.0;
        hi = 1.0;
    }
    if hi - lo < 1e-9 {
        hi = lo + 1.0;
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let x = |d: usize| LEFT + (d as f64 - 1.0) / 364.0 * (W - LEFT - RIGHT);
    let y = |v: f64| TOP + (hi - v) / (hi - lo) * (H - TOP - BOTTOM);

    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    ));
    s.push_str(&format!("<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        W / 2.0,
        escape(title)
    ));
    s.push_str(&format!(
        "<line x1=\"{LEFT}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        H - BOTTOM,
        W - RIGHT,
        H - BOTTOM
    ));
    s.push_str(&format!(
        "<line x1=\"{LEFT}\" y1=\"{TOP}\" x2=\"{LEFT}\" y2=\"{}\" stroke=\"black\"/>\n",
        H - BOTTOM
    ));
    for i in 0..=5 {
        let v = lo + (hi - lo) * i as f64 / 5.0;
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">{v:.1}</text>\n",
            LEFT - 6.0,
            y(v) + 4.0
        ));
    }
    for (d, label) in [(1, "Jan"), (91, "Apr"), (182, "Jul"), (274, "Oct"), (365, "Dec 31")] {
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{}\" text-anchor=\"middle\">{label}</text>\n",
            x(d),
            H - BOTTOM + 18.0
        ));
    }
    s.push_str(&format!(
        "<text x=\"16\" y=\"{}\" transform=\"rotate(-90 16 {})\" text-anchor=\"middle\">Rating (MVA)</text>\n",
        H / 2.0,
        H / 2.0
    ));
    for (i, (name, profile)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        // break the line at unrated days
        let mut segments: Vec<Vec<String>> = vec![Vec::new()];
        for day in &profile.days {
            match &day.rating {
                Some(r) => segments
                    .last_mut()
                    .expect("non-empty")
                    .push(format!("{:.2},{:.2}", x(day.day_index), y(r.rating_mva))),
                None => segments.push(Vec::new()),
            }
        }
        for seg in segments.iter().filter(|s| !s.is_empty()) {
            s.push_str(&format!(
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.2\" points=\"{}\"/>\n",
                seg.join(" ")
            ));
        }
        let ly = TOP + 14.0 + 16.0 * i as f64;
        s.push_str(&format!(
            "<line x1=\"{}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            W - RIGHT - 120.0,
            W - RIGHT - 100.0
        ));
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\">{}</text>\n",
            W - RIGHT - 95.0,
            ly + 4.0,
            escape(name)
        ));
    }
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rating::{DailyRating, DayDiagnostics, DayRecord};
    use crate::temperature::ScenarioKind;
    use chrono::NaiveDate;

    fn profile() -> AnnualRatingProfile {
        let date = NaiveDate::from_ymd_opt(2017, 1, 1).unwrap();
        let days = (1..=3)
            .map(|d| DayRecord {
                day_index: d,
                source_date: date,
                rating: (d != 2).then(|| DailyRating {
                    day_index: d,
                    date_source: date,
                    rating_mva: 60.0 + d as f64,
                    peak_pu: (60.0 + d as f64) / 50.0,
                    f_eqa_at_solution: 1.0,
                }),
                diagnostics: (d != 2).then(|| DayDiagnostics {
                    similar_days: vec![date],
                    k_star: 2,
                    q_avg: Some(0.7),
                    memberships: vec![0.9, 0.1],
                    top_membership: 0.9,
                    pool_size: 10,
                    shape: vec![0.5; HOURS],
                }),
                error: (d == 2).then(|| "boom".to_string()),
            })
            .collect();
        AnnualRatingProfile { scenario: ScenarioKind::High, days }
    }

    #[test]
    fn rating_csv_round_trip() {
        let mut buf = Vec::new();
        write_rating_csv(&mut buf, &profile()).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("day_index,source_date,rating_mva,peak_pu,f_eqa,k_star,top_membership\n"));
        assert!(text.contains("2,2017-01-01,,,,,\n"));
        assert_eq!(read_rating_csv(buf.as_slice(), "r").unwrap(), vec![(1, 61.0), (3, 63.0)]);
    }

    #[test]
    fn svg_has_one_polyline_per_segment() {
        let p = profile();
        let svg = rating_svg("t", &[("high", &p)]);
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 2);
    }
}

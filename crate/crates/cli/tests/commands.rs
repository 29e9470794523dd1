use std::path::Path;
use std::process::{Command, Output};

fn txrate(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_txrate"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "error")
        .output()
        .expect("run txrate")
}

fn fixture(dir: &Path, years: &str) {
    let out = txrate(
        dir,
        &["generate-fixture", "--seed", "3", "--years", years, "--transformers", "2", "--out-dir", "fx"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn build_temps_writes_three_full_profiles_and_applies_offset() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fixture(dir, "5");
    let base = txrate(dir, &["build-temps", "--config", "fx/txrate.toml", "--out-dir", "t0"]);
    assert!(base.status.success());
    assert!(!String::from_utf8_lossy(&base.stderr).contains("five are expected"));
    for kind in ["high", "medium", "low"] {
        let text = read(dir.join(format!("t0/scenario_{kind}.csv")));
        assert_eq!(text.lines().count(), 1 + 365 * 24, "{kind}");
    }
    assert_eq!(read(dir.join("t0/scenario_sources.csv")).lines().count(), 366);

    let shifted = txrate(dir, &["build-temps", "--config", "fx/txrate.toml", "--offset-c", "1.0", "--out-dir", "t1"]);
    assert!(shifted.status.success());
    let temps = |p: &str| -> Vec<f64> {
        read(dir.join(p))
            .lines()
            .skip(1)
            .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
            .collect()
    };
    let (a, b) = (temps("t0/scenario_high.csv"), temps("t1/scenario_high.csv"));
    assert!(a.iter().zip(&b).all(|(x, y)| *y == x + 1.0));
}

#[test]
fn single_year_history_warns_and_builds_identical_profiles() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fixture(dir, "1");
    let out = txrate(dir, &["build-temps", "--config", "fx/txrate.toml", "--out-dir", "t"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("spans 1 year(s)"));
    assert!(read(dir.join("t/run_report.toml")).contains("five are expected"));
    let high = read(dir.join("t/scenario_high.csv"));
    assert_eq!(high, read(dir.join("t/scenario_low.csv")));
    assert_eq!(high, read(dir.join("t/scenario_medium.csv")));
}

#[test]
fn malformed_weather_fails_with_line_context() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("w.csv"), "timestamp,temp_c\n2017-01-01T00:00,abc\n").unwrap();
    let out = txrate(dir, &["build-temps", "--weather", "w.csv", "--out-dir", "t"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("w.csv") && err.contains('2'), "{err}");
    assert!(read(dir.join("t/run_report.toml")).contains("non-numeric"));
}

#[test]
fn rate_year_requires_seed_and_forecast() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fixture(dir, "1");
    let no_seed = txrate(
        dir,
        &[
            "rate-year", "--weather", "fx/weather.csv", "--loads", "fx/loads.csv",
            "--compositions", "fx/compositions.csv", "--composition", "0.5,0.3", "--out-dir", "r",
        ],
    );
    assert!(!no_seed.status.success());
    assert!(String::from_utf8_lossy(&no_seed.stderr).contains("no seed"));
}

#[test]
fn simulate_day_reports_rated_conditions() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = txrate(dir, &["simulate-day", "--load-pu", "1", "--ambient-c", "30", "--rate", "--out-dir", "s"]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("F_EQA 1.000000"), "{stdout}");
    assert!(stdout.contains("rating 50.0"), "{stdout}");
    let trace = read(dir.join("s/trace.csv"));
    assert!(trace.starts_with("hour,load_pu,ambient_c,dtheta_to_c,dtheta_h_c,theta_h_c,f_aa\n"));
    assert_eq!(trace.lines().count(), 25);

    let bad = txrate(dir, &["simulate-day", "--load-pu", "1,2", "--ambient-c", "30", "--out-dir", "s2"]);
    assert!(!bad.status.success());
}

#[test]
fn metrics_on_hand_made_rating_files() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let header = "day_index,source_date,rating_mva,peak_pu,f_eqa,k_star,top_membership\n";
    // day 10 is winter, day 200 summer
    let actual = format!("{header}10,2017-01-10,100,2,1,2,0.9\n11,2017-01-11,100,2,1,2,0.9\n200,2017-07-19,80,1.6,1,2,0.9\n");
    let est = format!("{header}10,2017-01-10,90,1.8,1,2,0.9\n11,2017-01-11,110,2.2,1,2,0.9\n200,2017-07-19,80,1.6,1,2,0.9\n");
    std::fs::write(dir.join("a.csv"), actual).unwrap();
    std::fs::write(dir.join("e.csv"), est).unwrap();
    let out = txrate(dir, &["metrics", "--actual", "a.csv", "--estimated", "e.csv", "--out-dir", "m"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read(dir.join("m/metrics.csv")), "season,me_pct,ae_pct,ve_pct\nwinter,10,0,10\nsummer,0,0,0\n");
}

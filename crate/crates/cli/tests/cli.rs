use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use entlink_core::physics::expected_accidentals;
use entlink_core::qtag;
use entlink_core::TagStream;

fn entlink(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_entlink"))
        .args(args)
        .output()
        .expect("failed to run entlink")
}

fn ok(args: &[&str]) -> String {
    let out = entlink(args);
    assert!(
        out.status.success(),
        "entlink {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

fn parse(stdout: &str) -> toml::Table {
    toml::from_str(stdout).unwrap_or_else(|e| panic!("unparsable output ({e}):\n{stdout}"))
}

fn float(t: &toml::Table, section: &str, key: &str) -> f64 {
    let v = &t[section][key];
    v.as_float()
        .or_else(|| v.as_integer().map(|i| i as f64))
        .unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn simulate_is_deterministic_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let runs = [
        ("one", vec!["--threads", "1"]),
        ("again", vec!["--threads", "1"]),
        ("many", vec!["--threads", "3"]),
    ];
    for (name, threads) in &runs {
        let out = dir.path().join(name);
        let mut args = threads.clone();
        args.extend([
            "simulate",
            "--preset",
            "local-8k",
            "--duration",
            "2",
            "--seed",
            "7",
            "--output",
            p(&out),
        ]);
        let text = ok(&args);
        let rec = parse(&text);
        assert_eq!(rec["provenance"]["seed"].as_integer(), Some(7));
        assert_eq!(rec["provenance"]["config_hash"].as_str().unwrap().len(), 64);
        assert_eq!(rec["config"]["name"].as_str(), Some("local-8k"));
        assert_eq!(
            fs::read_to_string(out.join("provenance.toml")).unwrap(),
            text
        );
    }
    for arm in ["signal.qtag", "idler.qtag"] {
        let base = fs::read(dir.path().join("one").join(arm)).unwrap();
        assert!(base.len() > 24 + 16 * 1000);
        assert_eq!(base, fs::read(dir.path().join("again").join(arm)).unwrap());
        assert_eq!(base, fs::read(dir.path().join("many").join(arm)).unwrap());
    }
}

#[test]
fn zero_duration_is_invalid_input() {
    let dir = tempfile::tempdir().unwrap();
    let out = entlink(&[
        "simulate",
        "--preset",
        "ideal",
        "--duration",
        "0",
        "--output",
        p(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("duration"));
}

#[test]
fn unknown_preset_is_invalid_input() {
    let out = entlink(&["budget", "--preset", "nowhere"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn empty_streams_give_a_lower_bound_car() {
    let dir = tempfile::tempdir().unwrap();
    let e = dir.path().join("empty.qtag");
    qtag::write_file(&e, &TagStream::empty(1)).unwrap();
    let rec = parse(&ok(&[
        "analyze",
        p(&e),
        p(&e),
        "--delay",
        "0",
        "--window",
        "60",
    ]));
    assert_eq!(rec["result"]["coincidences"].as_integer(), Some(0));
    assert_eq!(rec["result"]["car_lower_bound"].as_bool(), Some(true));
    assert_eq!(float(&rec, "result", "car"), 0.0);
}

#[test]
fn fixture_matches_brute_force() {
    let (a, b) = (data("six_a.qtag"), data("six_b.qtag"));
    let ta = qtag::read_file(&a).unwrap();
    let tb = qtag::read_file(&b).unwrap();
    for window in [20u64, 60, 180, 400] {
        for delay in [0i64, 30, 90, 500] {
            let expected = ta
                .timestamps()
                .iter()
                .filter(|&&x| {
                    tb.timestamps()
                        .iter()
                        .any(|&y| 2 * (y as i64 - x as i64 - delay).unsigned_abs() <= window)
                })
                .count() as i64;
            let rec = parse(&ok(&[
                "analyze",
                p(&a),
                p(&b),
                "--delay",
                &delay.to_string(),
                "--window",
                &window.to_string(),
                "--offset",
                "100000",
            ]));
            assert_eq!(
                rec["result"]["coincidences"].as_integer(),
                Some(expected),
                "delay {delay} window {window}"
            );
            assert_eq!(rec["result"]["delay_ps"].as_integer(), Some(delay));
            assert_eq!(rec["result"]["window_ps"].as_integer(), Some(window as i64));
        }
    }
}

#[test]
fn analyze_reports_every_result_field_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (rec_path, hist) = (dir.path().join("r.toml"), dir.path().join("h.csv"));
    let text = ok(&[
        "analyze",
        p(&data("six_a.qtag")),
        p(&data("six_b.qtag")),
        "--delay",
        "30",
        "--window",
        "10",
        "--output",
        p(&rec_path),
        "--histogram",
        p(&hist),
        "--histogram-bin",
        "100",
        "--histogram-half-range",
        "1000",
    ]);
    let rec = parse(&text);
    for key in [
        "coincidences",
        "accidentals",
        "window_ps",
        "delay_ps",
        "integration_s",
        "car",
    ] {
        assert!(rec["result"].get(key).is_some(), "missing {key}");
    }
    assert_eq!(rec["result"]["coincidences"].as_integer(), Some(1));
    assert_eq!(rec["provenance"]["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(fs::read_to_string(&rec_path).unwrap(), text);
    let csv = fs::read_to_string(&hist).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("delay_ps,counts"));
    assert_eq!(lines.count(), 20);
}

#[test]
fn auto_delay_without_a_peak_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let e = dir.path().join("empty.qtag");
    qtag::write_file(&e, &TagStream::empty(1)).unwrap();
    let out = entlink(&["analyze", p(&e), p(&e), "--delay", "auto"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no significant peak"));
}

#[test]
fn corrupt_file_reports_the_byte_offset() {
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = fs::read(data("six_a.qtag")).unwrap();
    // Second record timestamp goes backwards.
    bytes[40..48].copy_from_slice(&5u64.to_le_bytes());
    let bad = dir.path().join("bad.qtag");
    fs::write(&bad, &bytes).unwrap();
    let out = entlink(&["analyze", p(&bad), p(&data("six_b.qtag")), "--delay", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("at byte 40"));

    let short = dir.path().join("short.qtag");
    fs::write(&short, &fs::read(data("six_a.qtag")).unwrap()[..50]).unwrap();
    let out = entlink(&["analyze", p(&short), p(&data("six_b.qtag")), "--delay", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("at byte 50"));
}

#[test]
fn budget_totals_for_the_long_links() {
    let rec = parse(&ok(&["budget", "--preset", "93km"]));
    assert!((float(&rec, "budget", "link_loss_db") - 39.7).abs() < 1e-9);
    assert_eq!(rec["provenance"]["seed"].as_integer(), Some(1));
    let rec = parse(&ok(&["budget", "--preset", "155km"]));
    assert!((float(&rec, "budget", "link_loss_db") - 66.0).abs() < 1e-9);
    assert!((float(&rec, "budget", "coincidence_cps") - 0.70).abs() <= 0.01);
}

#[test]
fn budget_accidentals_follow_the_singles_product() {
    let rec = parse(&ok(&["budget", "--preset", "local-8k"]));
    let t = &rec["budget"];
    let (s, i) = (
        t["signal"]["singles_cps"].as_float().unwrap(),
        t["idler"]["singles_cps"].as_float().unwrap(),
    );
    let cfg = entlink_core::ExperimentConfig::preset("local-8k").unwrap();
    let acc = t["accidental_cps"].as_float().unwrap();
    assert!((acc - expected_accidentals(s, i, cfg.window_ps as f64)).abs() <= 1e-9 * acc.max(1.0));
}

#[test]
fn scan_peaks_near_ten_nm() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("scan.csv");
    let rec = parse(&ok(&["scan-wavelength", "--output", p(&csv)]));
    let best = float(&rec, "scan", "car_argmax_detuning_nm");
    assert!((5.0..=15.0).contains(&best), "argmax {best}");
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("detuning_nm,rate,noise_singles,singles,car\n"));
    assert_eq!(
        text.lines().count() - 1,
        rec["scan"]["rows"].as_integer().unwrap() as usize
    );

    let single = ok(&[
        "scan-wavelength",
        "--start",
        "10",
        "--stop",
        "10",
        "--step",
        "1",
    ]);
    assert_eq!(single.lines().count(), 2);
    assert!(single.lines().nth(1).unwrap().starts_with("10,"));
}

#[test]
fn scan_rejects_detuning_outside_the_band() {
    let out = entlink(&["scan-wavelength", "--start", "0.5", "--stop", "10"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn ideal_source_has_unit_visibility_in_all_bases() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("curves.csv");
    let rec = parse(&ok(&[
        "visibility",
        "--preset",
        "ideal",
        "--output",
        p(&csv),
    ]));
    let fits = rec["fits"].as_array().unwrap();
    assert_eq!(fits.len(), 4);
    for f in fits {
        let v = f["visibility"].as_float().unwrap();
        let se = f["visibility_se"].as_float().unwrap();
        assert!((v - 1.0).abs() <= 4.0 * se, "{f:?}");
    }
    let f = float(&rec, "report", "fidelity_visibility");
    assert!(
        (f - 1.0).abs() <= 4.0 * float(&rec, "report", "fidelity_visibility_se"),
        "F {f}"
    );
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("angle_deg,H,V,D,A\n"));
    assert_eq!(text.lines().count(), 1 + 9);
    // Crossed analyzers only see the rare multi-pair accidental.
    for col in 1..=4 {
        let counts: Vec<u64> = text
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(col).unwrap().parse().unwrap())
            .collect();
        let (lo, hi) = (*counts.iter().min().unwrap(), *counts.iter().max().unwrap());
        assert!(hi > 10_000 && (lo as f64) < 1e-4 * hi as f64, "{counts:?}");
    }
}

#[test]
fn visibility_subset_omits_the_report() {
    let rec = parse(&ok(&["visibility", "--preset", "ideal", "--bases", "V"]));
    assert_eq!(rec["fits"].as_array().unwrap().len(), 1);
    assert!(rec.get("report").is_none());
    let out = entlink(&["visibility", "--preset", "ideal", "--bases", "HX"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn local_preset_coincidence_rate() {
    let dir = tempfile::tempdir().unwrap();
    let sim = parse(&ok(&[
        "simulate",
        "--preset",
        "local-460k",
        "--duration",
        "0.05",
        "--output",
        p(dir.path()),
    ]));
    let expected_delay = sim["streams"]["expected_delay_ps"].as_integer().unwrap();
    let rec = parse(&ok(&[
        "analyze",
        p(&dir.path().join("signal.qtag")),
        p(&dir.path().join("idler.qtag")),
        "--window",
        "200",
    ]));
    // About 11.5k coincidences with an 80 ps relative jitter: the centroid
    // standard error is about 0.75 ps.
    let found = rec["result"]["delay_ps"].as_integer().unwrap();
    assert!((found - expected_delay).abs() <= 3, "{found} vs {expected_delay}");
    let rate = rec["result"]["coincidences"].as_integer().unwrap() as f64 / 0.05;
    assert!((rate - 230e3).abs() < 0.1 * 230e3, "rate {rate}");
    assert!(float(&rec, "result", "car") > 50.0);
}

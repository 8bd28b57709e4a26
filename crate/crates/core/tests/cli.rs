use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use streaklab::budget::{compute_budget, BudgetReport};
use streaklab::config::ExperimentConfig;
use streaklab::detector::pgm::read_pgm;
use streaklab::kv::KvDoc;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_streaklab"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

/// Three default shots, simulated once for the whole file.
fn default_run() -> &'static (TempDir, Output) {
    static RUN: OnceLock<(TempDir, Output)> = OnceLock::new();
    RUN.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let out = run(&["simulate", "--shots", "3", "--seed", "21", "--out", p(&dir.path().join("run"))]);
        (dir, out)
    })
}

#[test]
fn simulate_writes_events_images_and_truth() {
    let (dir, out) = default_run();
    assert!(out.status.success(), "{}", stderr(out));
    let run = dir.path().join("run");
    let mut dnu = Vec::new();
    for i in 0..3 {
        let stem = run.join(format!("shot_{i:04}"));
        let truth = KvDoc::parse(&fs::read_to_string(stem.with_extension("truth")).unwrap()).unwrap();
        let n: usize = truth.require("n_events").unwrap();
        assert!((300_000..3_000_000).contains(&n), "{n}");
        dnu.push(truth.require::<f64>("delta_nu_mhz").unwrap());
        let (w, h, maxval, _) = read_pgm(fs::File::open(stem.with_extension("pgm")).unwrap()).unwrap();
        assert_eq!((w, h, maxval), (1392, 1024, 4095));
        // Ground truth stays out of the event file.
        let events = fs::read_to_string(stem.with_extension("events")).unwrap();
        assert!(!events.contains("delta_nu"));
    }
    assert!(dnu.iter().all(|d| d.abs() <= 60.0));
    assert!(dnu[0] != dnu[1] && dnu[1] != dnu[2]);
    let materialised = fs::read_to_string(run.join("config.toml")).unwrap();
    let parsed = ExperimentConfig::parse(&materialised, true).unwrap().config;
    assert_eq!(parsed.seed, 21);
    assert_eq!(parsed.shots, 3);
}

#[test]
fn score_is_deterministic_and_scores_the_batch() {
    let (dir, sim) = default_run();
    assert!(sim.status.success());
    let run = dir.path().join("run");
    let a = run_ok(&["score", p(&run)]);
    let b = run_ok(&["score", p(&run)]);
    assert_eq!(a, b);
    let lines: Vec<&str> = a.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("shot\ttrue_delta_nu_mhz"));
    for row in &lines[1..] {
        let cols: Vec<&str> = row.split('\t').collect();
        let err: f64 = cols[3].parse().unwrap();
        assert!(err.abs() < 0.83, "{row}");
        assert_ne!(cols[12], "false", "{row}");
    }
    assert!(a.contains("# shots: 3"));
}

fn run_ok(args: &[&str]) -> String {
    let o = run(args);
    assert!(o.status.success(), "{args:?}: {}", stderr(&o));
    stdout(&o)
}

#[test]
fn analyze_names_oxeb_for_positive_detuning() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        "seed = 5\n[detuning]\nnominal_offset_mhz = 54.9\n[cheb.noise]\ndrift_rate_hz_per_s = 0.0\n[oxeb.noise]\ndrift_rate_hz_per_s = 0.0\n",
    );
    let out = dir.path().join("o");
    run_ok(&["simulate", "--config", p(&cfg), "--out", p(&out)]);
    let overlay = dir.path().join("overlay.pgm");
    let report = run_ok(&["analyze", p(&out.join("shot_0000.events")), "--overlay", p(&overlay), "--subsets"]);
    assert!(report.contains("verdict: oxeb higher energy, path BP"), "{report}");
    let doc = KvDoc::parse(&report).unwrap();
    let dnu: f64 = doc.require("delta_nu_mhz").unwrap();
    assert!((dnu - 54.9).abs() < 0.83);
    assert!(doc.get("subset_exponent").is_some());
    let (w, h, _, px) = read_pgm(fs::File::open(&overlay).unwrap()).unwrap();
    assert_eq!((w, h), (1392, 1024));
    assert!(px.iter().filter(|&&v| v == 4095).count() > 1000);

    // Same shot with the y axis relabelled: identical verdict.
    let flipped = fs::read_to_string(out.join("shot_0000.events"))
        .unwrap()
        .lines()
        .map(|l| {
            if l.starts_with("#orientation=") {
                "#orientation=cheb-positive".to_string()
            } else if l.starts_with('#') {
                l.to_string()
            } else {
                let (t, y) = l.split_once('\t').unwrap();
                format!("{t}\t{:.4}", 15.0 - y.parse::<f64>().unwrap())
            }
        })
        .collect::<Vec<_>>()
        .join("\n");
    let fpath = dir.path().join("flipped.events");
    fs::write(&fpath, flipped + "\n").unwrap();
    let report = run_ok(&["analyze", p(&fpath)]);
    assert!(report.contains("higher_energy_source: oxeb"), "{report}");
}

#[test]
fn single_source_has_no_fringes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", "[cheb]\nphoton_flux_per_ns = 0.0\n");
    let out = dir.path().join("o");
    run_ok(&["simulate", "--config", p(&cfg), "--out", p(&out)]);
    let o = run(&["analyze", p(&out.join("shot_0000.events"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no fringes detected"));
}

fn small_event_file(dir: &Path) -> PathBuf {
    let cfg = write_config(dir, "small.toml", "[cheb]\nphoton_flux_per_ns = 2e5\n[oxeb]\nphoton_flux_per_ns = 2e5\n");
    let out = dir.join("small");
    run_ok(&["simulate", "--config", p(&cfg), "--out", p(&out)]);
    out.join("shot_0000.events")
}

#[test]
fn malformed_event_files_exit_4_with_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let good = small_event_file(dir.path());
    let text = fs::read_to_string(&good).unwrap();

    let truncated = dir.path().join("trunc.events");
    let keep: Vec<&str> = text.lines().take(100).collect();
    fs::write(&truncated, keep.join("\n")).unwrap();
    let o = run(&["analyze", p(&truncated)]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("line"), "{}", stderr(&o));

    let garbled = dir.path().join("garbled.events");
    fs::write(&garbled, text.replacen("\n", "\nnot-a-number\tx\n", 12).lines().take(30).collect::<Vec<_>>().join("\n"))
        .unwrap();
    let o = run(&["analyze", p(&garbled)]);
    assert_eq!(o.status.code(), Some(4));

    let future = dir.path().join("v2.events");
    fs::write(&future, text.replacen("#streaklab-events 1", "#streaklab-events 2", 1)).unwrap();
    let o = run(&["analyze", p(&future)]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("version"), "{}", stderr(&o));

    let o = run(&["analyze", p(&dir.path().join("absent.events"))]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn config_errors_exit_3_with_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "bad.toml", "seed = 3\n\n[detector]\nqe = -0.5\n");
    let o = run(&["budget", "--config", p(&bad)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));

    let typo = write_config(dir.path(), "typo.toml", "seed = 3\n[geometry]\ntheta_mrad = 0.14\n");
    let o = run(&["budget", "--strict", "--config", p(&typo)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("line 3") && stderr(&o).contains("theta_mrad"));
    let o = run(&["budget", "--config", p(&typo)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("theta_mrad"));

    let syntax = write_config(dir.path(), "syntax.toml", "seed = 3\nshots = [\n");
    assert_eq!(run(&["simulate", "--config", p(&syntax)]).status.code(), Some(3));
}

#[test]
fn unwritable_output_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("file");
    fs::write(&file, "x").unwrap();
    let o = run(&["simulate", "--out", p(&file.join("sub"))]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn budget_report_round_trips_and_scales_with_power() {
    let base = run_ok(&["budget"]);
    assert!(base.contains("sql_phase_rad_quoted: 0.00965"), "{base}");
    let report = BudgetReport::from_kv(&KvDoc::parse(&base).unwrap()).unwrap();
    assert_eq!(report, compute_budget(&Default::default()).unwrap());

    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "p.toml", "[budget]\npower_w = 0.1\n");
    let doubled = KvDoc::parse(&run_ok(&["budget", "--config", p(&cfg)])).unwrap();
    let d1: f64 = report.detected_per_ns;
    let d2: f64 = doubled.require("detected_per_ns").unwrap();
    assert!((d2 / d1 - 2.0).abs() < 1e-12);
}

#[test]
fn score_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let o = run(&["score", p(&empty)]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1);
    assert!(text.contains("# shots: 0"));

    let events = small_event_file(dir.path());
    fs::remove_file(events.with_extension("truth")).unwrap();
    let o = run(&["score", p(events.parent().unwrap())]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("missing ground truth"));
}

//! Command-line front end. `run` returns the process exit code.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use log::{info, warn};
use rayon::prelude::*;

use crate::analysis::{
    estimate_fringes, subset_uncertainty, visibility, which_path_with_threshold, FringeEstimate, HigherEnergy,
    CONFIDENCE_THRESHOLD,
};
use crate::budget::{compute_budget, estimate_vs_sql};
use crate::config::ExperimentConfig;
use crate::detector::events_io::{read_events, write_events};
use crate::detector::pgm::write_pgm;
use crate::detector::{ccd_frame, simulate_shot, DetectorConfig, Interferogram, Truth};
use crate::error::{Error, Result};
use crate::kv::KvDoc;
use crate::physics::BeamGeometry;

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_NO_FRINGES: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// Shots with a smaller true |Δν| are not expected to get a definite verdict
/// and are left out of the verdict accuracy.
pub const MIN_SCORED_DETUNING_MHZ: f64 = 5.0;

#[derive(Debug, Parser)]
#[command(name = "streaklab", version, about = "Two-laser streak camera interferogram simulator and analyzer")]
pub struct Cli {
    /// TOML experiment configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(..=i64::MAX as u64))]
    pub seed: Option<u64>,
    /// Number of shots to simulate.
    #[arg(long, global = true)]
    pub shots: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Reject unknown config keys instead of warning.
    #[arg(long, global = true)]
    pub strict: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate shots and write events, CCD frames and ground truth.
    Simulate,
    /// Fit fringes in event files and print a report per file.
    Analyze {
        /// Event files written by `simulate` or in the same format.
        #[arg(required = true)]
        events: Vec<PathBuf>,
        /// Write the CCD frame with the fitted fringe maxima drawn in.
        #[arg(long)]
        overlay: Option<PathBuf>,
        /// Confidence needed before a source is named.
        #[arg(long, default_value_t = CONFIDENCE_THRESHOLD)]
        threshold: f64,
        /// Also report the slope error on nested event subsets.
        #[arg(long)]
        subsets: bool,
    },
    /// Print the photon and uncertainty budget.
    Budget,
    /// Analyze every simulated shot in a directory and compare with truth.
    Score {
        /// Directory holding `shot_NNNN.events` and `shot_NNNN.truth` files.
        dir: PathBuf,
    },
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NoFringes { .. } | Error::InsufficientEvents { .. } => EXIT_NO_FRINGES,
        Error::Config { .. } => EXIT_CONFIG,
        Error::Io { .. } | Error::Parse { .. } | Error::MissingTruth(_) => EXIT_IO,
        _ => EXIT_OTHER,
    }
}

pub fn run(cli: Cli) -> i32 {
    match dispatch(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    let config = load_config(cli)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Config { line: None, message: format!("thread pool: {e}") })?;
    pool.install(|| match &cli.command {
        Command::Simulate => simulate(&config),
        Command::Analyze { events, overlay, threshold, subsets } => {
            analyze(&config, events, overlay.as_deref(), *threshold, *subsets, cli.out.as_deref())
        }
        Command::Budget => budget(&config, cli.out.as_deref()),
        Command::Score { dir } => score(dir, cli.out.as_deref()),
    })
}

pub fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut config = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let loaded = ExperimentConfig::parse(&text, cli.strict)?;
            for (key, line) in &loaded.unknown {
                match line {
                    Some(l) => warn!("{}:{l}: ignoring unknown key `{key}`", path.display()),
                    None => warn!("{}: ignoring unknown key `{key}`", path.display()),
                }
            }
            loaded.config
        }
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    if let Some(n) = cli.shots {
        config.shots = n;
    }
    if let Some(o) = &cli.out {
        config.out = o.clone();
    }
    if let Some(w) = cli.workers {
        config.workers = w;
    }
    Ok(config)
}

pub fn shot_stem(index: u64) -> String {
    format!("shot_{index:04}")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn simulate(config: &ExperimentConfig) -> Result<()> {
    let out = &config.out;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_text(&out.join("config.toml"), &config.to_toml()?)?;
    let geo = config.geometry;
    let det = &config.detector;
    let lines: Vec<String> = (0..config.shots)
        .into_par_iter()
        .map(|i| {
            let sources = config.shot_sources(i);
            let mut ig = simulate_shot(&sources, &geo, det, config.shot_seed(i))?;
            ig.shot_index = i;
            let stem = out.join(shot_stem(i));
            let truth = ig.truth.expect("simulated shots carry truth");

            let path = stem.with_extension("events");
            let mut w = create(&path)?;
            write_events(&mut w, &ig).and_then(|_| w.flush()).map_err(|e| Error::io(&path, e))?;

            let path = stem.with_extension("pgm");
            let mut w = create(&path)?;
            write_pgm(&mut w, det.ccd_cols, det.ccd_rows, det.adc_max(), &ccd_frame(&ig.image, det))
                .and_then(|_| w.flush())
                .map_err(|e| Error::io(&path, e))?;

            let mut doc = truth.to_kv();
            doc.push("shot_index", i).push("seed", ig.seed).push("n_events", ig.events.len());
            doc.push("omega1_rad_per_s", sources.omega1).push("omega2_rad_per_s", sources.omega2);
            write_text(&stem.with_extension("truth"), &doc.emit())?;
            info!("{}: {} events, Δν = {:.3} MHz", shot_stem(i), ig.events.len(), truth.delta_nu_mhz);
            Ok(format!("{}\t{}\t{}", shot_stem(i), ig.events.len(), truth.delta_nu_mhz))
        })
        .collect::<Result<_>>()?;
    println!("shot\tn_events\tdelta_nu_mhz");
    for l in lines {
        println!("{l}");
    }
    Ok(())
}

pub fn load_interferogram(path: &Path) -> Result<Interferogram> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let parsed = read_events(BufReader::new(file)).map_err(|e| match e {
        Error::Parse { line, message } => Error::Parse { line, message: format!("{}: {message}", path.display()) },
        other => other,
    })?;
    Ok(parsed.into_interferogram())
}

/// Full analysis report of one interferogram.
pub fn report(ig: &Interferogram, est: &FringeEstimate, threshold: f64) -> KvDoc {
    let geo = BeamGeometry::default().with_orientation(ig.orientation);
    let verdict = which_path_with_threshold(est, &geo, threshold);
    let vis = visibility(ig, est);
    let mut doc = KvDoc::new();
    doc.push("shot_index", ig.shot_index)
        .push("events_total", ig.events.len())
        .push("n_events", est.n_events)
        .push("overlap_ns", est.overlap_ns)
        .push("fit_window_start_ns", est.fit_window_ns.0)
        .push("fit_window_end_ns", est.fit_window_ns.1)
        .push("spatial_freq_cyc_per_mm", est.spatial_freq_cyc_per_mm)
        .push("spatial_freq_stderr", est.spatial_freq_stderr)
        .push("fringe_spacing_mm", est.spacing_mm())
        .push("fringe_spacing_stderr_mm", est.spacing_stderr_mm())
        .push("slope_mm_per_ns", est.slope_mm_per_ns)
        .push("slope_stderr", est.slope_stderr)
        .push("slope_uncertainty", est.slope_uncertainty)
        .push("beat_freq_mhz", est.beat_freq_mhz)
        .push("beat_freq_stderr_mhz", est.beat_freq_stderr_mhz)
        .push("beat_freq_uncertainty_mhz", est.beat_freq_uncertainty_mhz())
        .push("delta_nu_mhz", est.delta_nu_mhz)
        .push("fourier_limit_mhz", est.fourier_limit_mhz)
        .push("visibility", est.visibility)
        .push("visibility_stderr", est.visibility_stderr)
        .push("visibility_folded", vis.folded)
        .push("visibility_folded_unreliable", vis.unreliable)
        .push("phase0_rad", est.phase0_rad)
        .push("residual_rms", est.residual_rms)
        .push("peak_ratio", est.peak_ratio)
        .push("iterations", est.iterations)
        .push("orientation", est.orientation.as_str());
    if let Ok(r) = estimate_vs_sql(est) {
        doc.push("slope_stderr_over_sql", r);
    }
    doc.push("higher_energy_source", verdict.higher_energy_source)
        .push("confidence", verdict.confidence)
        .push("confidence_threshold", verdict.threshold)
        .push("path_assignment", "cheb=AP oxeb=BP")
        .push("verdict", verdict.note);
    doc
}

fn analyze(
    config: &ExperimentConfig,
    paths: &[PathBuf],
    overlay: Option<&Path>,
    threshold: f64,
    subsets: bool,
    out: Option<&Path>,
) -> Result<()> {
    if overlay.is_some() && paths.len() != 1 {
        return Err(Error::Config { line: None, message: "--overlay needs exactly one events file".into() });
    }
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut first_err = None;
    for path in paths {
        let result = (|| -> Result<()> {
            let ig = load_interferogram(path)?;
            let est = estimate_fringes(&ig)?;
            let mut doc = report(&ig, &est, threshold);
            if subsets {
                let table = subset_uncertainty(&ig, &[0.125, 0.25, 0.5, 1.0], config.seed)?;
                for row in &table.rows {
                    doc.push(&format!("subset_{}_slope_stderr", row.fraction), row.slope_stderr);
                }
                if let Some(x) = table.exponent {
                    doc.push("subset_exponent", x);
                }
                for n in &table.notes {
                    warn!("{}: {n}", path.display());
                }
            }
            println!("# {}", path.display());
            print!("{}", doc.emit());
            if let Some(dir) = out {
                let name =
                    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "events".into());
                write_text(&dir.join(format!("{name}.report")), &doc.emit())?;
            }
            if let Some(p) = overlay {
                write_overlay(p, &ig, &est, &config.detector)?;
            }
            Ok(())
        })();
        if let Err(e) = result {
            eprintln!("{}: {e}", path.display());
            first_err.get_or_insert(e);
        }
    }
    first_err.map_or(Ok(()), Err)
}

/// CCD frame with the fitted fringe maxima inside the fit window set to full scale.
pub fn overlay_frame(ig: &Interferogram, est: &FringeEstimate, det: &DetectorConfig) -> Vec<u16> {
    let mut frame = ccd_frame(&ig.image, det);
    let g = ig.grid();
    let (cols, rows) = (det.ccd_cols, det.ccd_rows);
    let (a, b) = (est.spatial_freq_cyc_per_mm, est.beat_freq_mhz * 1e-3);
    let top = det.adc_max();
    for c in 0..cols {
        let t = (c as f64 + 0.5) * g.window_ns / cols as f64;
        if t < est.fit_window_ns.0 || t > est.fit_window_ns.1 {
            continue;
        }
        // Maxima where a·y − b·t + φ₀/2π is an integer.
        let offset = b * t - est.phase0_rad / (2.0 * std::f64::consts::PI);
        let k0 = (offset).ceil() as i64;
        let k1 = (a * g.y_range_mm + offset).floor() as i64;
        for k in k0..=k1 {
            let y = (k as f64 - offset) / a;
            let r = ((1.0 - y / g.y_range_mm) * rows as f64) as usize;
            if r < rows {
                frame[r * cols + c] = top;
            }
        }
    }
    frame
}

fn write_overlay(path: &Path, ig: &Interferogram, est: &FringeEstimate, det: &DetectorConfig) -> Result<()> {
    let frame = overlay_frame(ig, est, det);
    let mut w = create(path)?;
    write_pgm(&mut w, det.ccd_cols, det.ccd_rows, det.adc_max(), &frame)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

fn budget(config: &ExperimentConfig, out: Option<&Path>) -> Result<()> {
    let doc = compute_budget(&config.budget)?.to_kv();
    print!("{}", doc.emit());
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_text(&dir.join("budget.txt"), &doc.emit())?;
    }
    Ok(())
}

/// One row of a score table.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub shot: String,
    pub truth: Truth,
    /// `Err` holds the reason the analysis failed.
    pub estimate: std::result::Result<(f64, f64, f64, f64, HigherEnergy, f64), String>,
}

pub const SCORE_HEADER: &str = "shot\ttrue_delta_nu_mhz\test_delta_nu_mhz\terror_mhz\tfourier_limit_mhz\twithin_fourier\ttrue_slope_mm_per_ns\test_slope_mm_per_ns\tslope_uncertainty\texpected\tverdict\tconfidence\tcorrect";

/// Verdict a perfect analysis should give, or `None` if either answer is acceptable.
pub fn expected_verdict(delta_nu_mhz: f64, fourier_limit_mhz: f64) -> Option<HigherEnergy> {
    if delta_nu_mhz.abs() >= MIN_SCORED_DETUNING_MHZ {
        Some(HigherEnergy::from_delta_nu(delta_nu_mhz))
    } else if delta_nu_mhz.abs() < fourier_limit_mhz {
        Some(HigherEnergy::Undetermined)
    } else {
        None
    }
}

impl ScoreRow {
    pub fn tsv(&self) -> String {
        let t = &self.truth;
        match &self.estimate {
            Ok((dnu, fourier, slope, unc, verdict, conf)) => {
                let expected = expected_verdict(t.delta_nu_mhz, *fourier);
                let correct = match expected {
                    Some(e) => (e == *verdict).to_string(),
                    None => "-".into(),
                };
                format!(
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    self.shot,
                    t.delta_nu_mhz,
                    dnu,
                    dnu - t.delta_nu_mhz,
                    fourier,
                    (dnu - t.delta_nu_mhz).abs() <= *fourier,
                    t.slope_mm_per_ns,
                    slope,
                    unc,
                    expected.map_or("any", |e| e.as_str()),
                    verdict,
                    conf,
                    correct
                )
            }
            Err(reason) => format!(
                "{}\t{}\t-\t-\t-\tfalse\t{}\t-\t-\t-\tfailed\t-\t-\t# {reason}",
                self.shot, t.delta_nu_mhz, t.slope_mm_per_ns
            ),
        }
    }
}

/// Summary statistics over a score table.
pub fn score_summary(rows: &[ScoreRow]) -> KvDoc {
    let ok: Vec<_> = rows.iter().filter_map(|r| r.estimate.as_ref().ok().map(|e| (r, e))).collect();
    let within = ok.iter().filter(|(r, e)| (e.0 - r.truth.delta_nu_mhz).abs() <= e.1).count();
    let scored: Vec<_> =
        ok.iter().filter_map(|(r, e)| expected_verdict(r.truth.delta_nu_mhz, e.1).map(|x| (x, e.4))).collect();
    let correct = scored.iter().filter(|(x, v)| x == v).count();
    let frac = |n: usize, d: usize| if d > 0 { n as f64 / d as f64 } else { f64::NAN };
    let mut doc = KvDoc::new();
    doc.push("shots", rows.len())
        .push("analyzed", ok.len())
        .push("failed", rows.len() - ok.len())
        .push("within_fourier", within)
        .push("within_fourier_fraction", frac(within, ok.len()))
        .push("verdicts_scored", scored.len())
        .push("verdicts_correct", correct)
        .push("verdict_accuracy", frac(correct, scored.len()));
    doc
}

fn score_shot(events: &Path) -> Result<ScoreRow> {
    let truth_path = events.with_extension("truth");
    if !truth_path.exists() {
        return Err(Error::MissingTruth(truth_path));
    }
    let text = fs::read_to_string(&truth_path).map_err(|e| Error::io(&truth_path, e))?;
    let truth = Truth::from_kv(&KvDoc::parse(&text)?)?;
    let ig = load_interferogram(events)?;
    let shot = events.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let estimate = match estimate_fringes(&ig) {
        Ok(est) => {
            let geo = BeamGeometry::default().with_orientation(ig.orientation);
            let v = which_path_with_threshold(&est, &geo, CONFIDENCE_THRESHOLD);
            Ok((
                est.delta_nu_mhz,
                est.fourier_limit_mhz,
                est.slope_mm_per_ns,
                est.slope_uncertainty,
                v.higher_energy_source,
                v.confidence,
            ))
        }
        Err(e @ (Error::NoFringes { .. } | Error::InsufficientEvents { .. } | Error::NonConvergence { .. })) => {
            Err(e.to_string())
        }
        Err(e) => return Err(e),
    };
    Ok(ScoreRow { shot, truth, estimate })
}

pub fn score_dir(dir: &Path) -> Result<Vec<ScoreRow>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut events = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        if name.starts_with("shot_") && name.ends_with(".events") {
            events.push(path);
        }
    }
    events.sort();
    events.par_iter().map(|p| score_shot(p)).collect()
}

fn score(dir: &Path, out: Option<&Path>) -> Result<()> {
    let rows = score_dir(dir)?;
    let mut table = String::from(SCORE_HEADER);
    table.push('\n');
    for r in &rows {
        table.push_str(&r.tsv());
        table.push('\n');
    }
    let summary = score_summary(&rows);
    print!("{table}");
    for (k, v) in summary.entries() {
        println!("# {k}: {v}");
    }
    if let Some(o) = out {
        fs::create_dir_all(o).map_err(|e| Error::io(o, e))?;
        write_text(&o.join("score.tsv"), &table)?;
        write_text(&o.join("score_summary.txt"), &summary.emit())?;
    }
    Ok(())
}

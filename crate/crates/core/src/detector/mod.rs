//! Photon-counting streak camera: converts the gated two-beam intensity into
//! photoelectron events by Poisson thinning and bins them into images.

pub mod events_io;
pub mod pgm;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_non_negative, check_positive, check_unit_interval, Error, Result};
use crate::kv::KvDoc;
use crate::physics::{fringe_spacing, BeamGeometry, Orientation, PhaseMap};
use crate::rng::{derive_seed, rng_from_seed, Stream};
use crate::sources::{flat_top_overlap_ns, sample_phase_path, PhasePath, SourceState};
use crate::units::angular_to_mhz;

/// Refuse shots whose expected photoelectron count exceeds this.
pub const MAX_EXPECTED_EVENTS: f64 = 1e9;

/// Thinning strips per instrument time bin.
const STRIPS_PER_BIN: usize = 4;
/// Sampling step of the laser phase paths, ns.
const PHASE_DT_NS: f64 = 0.25;
/// Midpoint sub-samples per bin used by [`expected_image`].
const SUB_T: usize = 8;
const SUB_Y: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    pub qe: f64,
    /// Power transmission of the entrance slit.
    pub slit_factor: f64,
    pub sweep_ns_per_mm: f64,
    /// Length of the sweep on the phosphor screen, mm.
    pub sweep_length_mm: f64,
    pub y_range_mm: f64,
    pub y_res_mm: f64,
    /// Temporal resolution as a fraction of the full sweep time.
    pub t_res_fraction: f64,
    pub ccd_cols: usize,
    pub ccd_rows: usize,
    pub adc_bits: u32,
    /// Photocathode dark counts, e⁻/(cm²·s).
    pub dark_rate_per_cm2_s: f64,
    /// Photocathode width × height, mm.
    pub photocathode_mm: [f64; 2],
    /// Events per bin that drive the ADC to full scale.
    pub saturation_events_per_bin: u32,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            qe: 0.1037,
            slit_factor: 1e-3,
            sweep_ns_per_mm: 50.0,
            sweep_length_mm: 20.0,
            y_range_mm: 15.0,
            y_res_mm: 0.070,
            t_res_fraction: 0.0034,
            ccd_cols: 1392,
            ccd_rows: 1024,
            adc_bits: 12,
            dark_rate_per_cm2_s: 100.0,
            photocathode_mm: [8.0, 2.0],
            saturation_events_per_bin: 50,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        check_unit_interval("qe", self.qe, false)?;
        check_unit_interval("slit_factor", self.slit_factor, false)?;
        check_positive("sweep_ns_per_mm", self.sweep_ns_per_mm)?;
        check_positive("sweep_length_mm", self.sweep_length_mm)?;
        check_positive("y_range_mm", self.y_range_mm)?;
        check_positive("y_res_mm", self.y_res_mm)?;
        check_unit_interval("t_res_fraction", self.t_res_fraction, false)?;
        check_non_negative("dark_rate_per_cm2_s", self.dark_rate_per_cm2_s)?;
        check_non_negative("photocathode_mm[0]", self.photocathode_mm[0])?;
        check_non_negative("photocathode_mm[1]", self.photocathode_mm[1])?;
        if self.y_res_mm > self.y_range_mm {
            return Err(Error::invalid("y_res_mm", "must not exceed y_range_mm"));
        }
        if self.ccd_cols == 0 || self.ccd_rows == 0 {
            return Err(Error::invalid("ccd_cols", "CCD dimensions must be non-zero"));
        }
        if !(1..=16).contains(&self.adc_bits) {
            return Err(Error::invalid("adc_bits", format!("must lie in 1..=16, got {}", self.adc_bits)));
        }
        if self.saturation_events_per_bin == 0 {
            return Err(Error::invalid("saturation_events_per_bin", "must be > 0"));
        }
        Ok(())
    }

    /// Full sweep duration, ns.
    pub fn window_ns(&self) -> f64 {
        self.sweep_ns_per_mm * self.sweep_length_mm
    }

    /// Nominal temporal resolution, ns.
    pub fn t_res_ns(&self) -> f64 {
        self.t_res_fraction * self.window_ns()
    }

    pub fn adc_max(&self) -> u16 {
        ((1u32 << self.adc_bits) - 1) as u16
    }

    /// Dark photoelectrons per ns per mm of y.
    pub fn dark_density(&self) -> f64 {
        let area_cm2 = self.photocathode_mm[0] * self.photocathode_mm[1] / 100.0;
        self.dark_rate_per_cm2_s * area_cm2 * 1e-9 / self.y_range_mm
    }

    /// Detected events per ns per mm of y for a source delivering
    /// `photon_flux_per_ns` to the slit plane.
    pub fn rate_density(&self, photon_flux_per_ns: f64) -> f64 {
        photon_flux_per_ns * self.slit_factor * self.qe / self.y_range_mm
    }

    pub fn grid(&self) -> Grid {
        Grid::new(
            self.window_ns(),
            self.y_range_mm,
            (1.0 / self.t_res_fraction).floor() as usize,
            (self.y_range_mm / self.y_res_mm).floor() as usize,
        )
    }
}

/// Instrument binning of the (t, y) window. Bin widths are stretched so the
/// bins tile the window exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub window_ns: f64,
    pub y_range_mm: f64,
    pub t_bins: usize,
    pub y_bins: usize,
}

impl Grid {
    pub fn new(window_ns: f64, y_range_mm: f64, t_bins: usize, y_bins: usize) -> Self {
        Self { window_ns, y_range_mm, t_bins: t_bins.max(1), y_bins: y_bins.max(1) }
    }

    pub fn t_bin_ns(&self) -> f64 {
        self.window_ns / self.t_bins as f64
    }

    pub fn y_bin_mm(&self) -> f64 {
        self.y_range_mm / self.y_bins as f64
    }

    pub fn len(&self) -> usize {
        self.t_bins * self.y_bins
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, t_ns: f64, y_mm: f64) -> bool {
        (0.0..=self.window_ns).contains(&t_ns) && (0.0..=self.y_range_mm).contains(&y_mm)
    }

    /// Row-major (y rows, t columns) index of the bin holding `(t, y)`.
    pub fn index(&self, t_ns: f64, y_mm: f64) -> Option<usize> {
        if !self.contains(t_ns, y_mm) {
            return None;
        }
        let it = ((t_ns / self.t_bin_ns()) as usize).min(self.t_bins - 1);
        let iy = ((y_mm / self.y_bin_mm()) as usize).min(self.y_bins - 1);
        Some(iy * self.t_bins + it)
    }

    pub fn t_center(&self, it: usize) -> f64 {
        (it as f64 + 0.5) * self.t_bin_ns()
    }

    pub fn y_center(&self, iy: usize) -> f64 {
        (iy as f64 + 0.5) * self.y_bin_mm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub t_ns: f64,
    pub y_mm: f64,
}

/// Raw photoelectron counts on the instrument grid, rows indexed by y.
#[derive(Debug, Clone, PartialEq)]
pub struct CountImage {
    pub grid: Grid,
    pub counts: Vec<u32>,
}

impl CountImage {
    pub fn zeros(grid: Grid) -> Self {
        Self { grid, counts: vec![0; grid.len()] }
    }

    pub fn get(&self, it: usize, iy: usize) -> u32 {
        self.counts[iy * self.grid.t_bins + it]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| u64::from(c)).sum()
    }
}

/// Accumulates events into instrument bins; events outside the window are dropped.
pub fn bin_events(events: &[Event], grid: Grid) -> CountImage {
    let mut image = CountImage::zeros(grid);
    for e in events {
        if let Some(i) = grid.index(e.t_ns, e.y_mm) {
            image.counts[i] += 1;
        }
    }
    image
}

/// Maps counts onto the CCD pixel grid: nearest instrument bin, linear gray
/// scale clipped at the saturation count. Row 0 is the top of the image (max y).
pub fn ccd_frame(image: &CountImage, det: &DetectorConfig) -> Vec<u16> {
    let g = image.grid;
    let (cols, rows) = (det.ccd_cols, det.ccd_rows);
    let sat = det.saturation_events_per_bin;
    let scale = f64::from(det.adc_max()) / f64::from(sat);
    let col_bin: Vec<usize> = (0..cols).map(|c| ((c * g.t_bins) / cols).min(g.t_bins - 1)).collect();
    let mut frame = Vec::with_capacity(cols * rows);
    for r in 0..rows {
        let iy = (((rows - 1 - r) * g.y_bins) / rows).min(g.y_bins - 1);
        for &it in &col_bin {
            let c = image.get(it, iy).min(sat);
            frame.push((f64::from(c) * scale).round() as u16);
        }
    }
    frame
}

/// Physical configuration of one exposure: the two sources with the
/// frequencies drawn for this shot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShotSources {
    /// Source A.
    pub cheb: SourceState,
    /// Source B.
    pub oxeb: SourceState,
    /// Angular frequency of source A, rad/s.
    pub omega1: f64,
    /// Angular frequency of source B, rad/s.
    pub omega2: f64,
    pub mutual_visibility: f64,
}

impl ShotSources {
    pub fn validate(&self) -> Result<()> {
        self.cheb.validate()?;
        self.oxeb.validate()?;
        crate::error::check_finite("omega1", self.omega1)?;
        crate::error::check_finite("omega2", self.omega2)?;
        check_unit_interval("mutual_visibility", self.mutual_visibility, true)?;
        Ok(())
    }

    pub fn delta_nu_mhz(&self) -> f64 {
        angular_to_mhz(self.omega2 - self.omega1)
    }
}

/// Ground-truth parameters of a synthetic shot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truth {
    pub delta_nu_mhz: f64,
    pub slope_mm_per_ns: f64,
    pub spatial_freq_cyc_per_mm: f64,
    pub visibility: f64,
    pub overlap_ns: f64,
    pub orientation: Orientation,
}

impl Truth {
    pub fn new(sources: &ShotSources, geo: &BeamGeometry, det: &DetectorConfig) -> Result<Self> {
        let map = PhaseMap::new(geo, sources.omega2 - sources.omega1);
        let r1 = det.rate_density(sources.cheb.photon_flux_per_ns);
        let r2 = det.rate_density(sources.oxeb.photon_flux_per_ns);
        let visibility =
            if r1 + r2 > 0.0 { 2.0 * sources.mutual_visibility * (r1 * r2).sqrt() / (r1 + r2) } else { 0.0 };
        Ok(Self {
            delta_nu_mhz: sources.delta_nu_mhz(),
            slope_mm_per_ns: map.slope(),
            spatial_freq_cyc_per_mm: 1.0 / (fringe_spacing(geo)? * 1e3),
            visibility,
            overlap_ns: flat_top_overlap_ns(&sources.cheb.gate, &sources.oxeb.gate, 0.5 * det.y_range_mm),
            orientation: geo.orientation,
        })
    }
}

impl Truth {
    pub fn to_kv(&self) -> KvDoc {
        let mut doc = KvDoc::new();
        doc.push("delta_nu_mhz", self.delta_nu_mhz)
            .push("slope_mm_per_ns", self.slope_mm_per_ns)
            .push("spatial_freq_cyc_per_mm", self.spatial_freq_cyc_per_mm)
            .push("visibility", self.visibility)
            .push("overlap_ns", self.overlap_ns)
            .push("orientation", self.orientation.as_str());
        doc
    }

    pub fn from_kv(doc: &KvDoc) -> Result<Self> {
        let raw: String = doc.require("orientation")?;
        let orientation = Orientation::parse(&raw)
            .ok_or_else(|| Error::Parse { line: 0, message: format!("unknown orientation `{raw}`") })?;
        Ok(Self {
            delta_nu_mhz: doc.require("delta_nu_mhz")?,
            slope_mm_per_ns: doc.require("slope_mm_per_ns")?,
            spatial_freq_cyc_per_mm: doc.require("spatial_freq_cyc_per_mm")?,
            visibility: doc.require("visibility")?,
            overlap_ns: doc.require("overlap_ns")?,
            orientation,
        })
    }
}

/// Photoelectron intensity λ(t, y) of one exposure, events/(ns·mm), with its
/// sampled laser phase paths.
#[derive(Debug, Clone)]
pub struct IntensityModel {
    pub sources: ShotSources,
    pub map: PhaseMap,
    pub grid: Grid,
    r1: f64,
    r2: f64,
    dark: f64,
    phase_a: PhasePath,
    phase_b: PhasePath,
}

impl IntensityModel {
    pub fn new(sources: &ShotSources, geo: &BeamGeometry, det: &DetectorConfig, seed: u64) -> Result<Self> {
        sources.validate()?;
        geo.validate()?;
        det.validate()?;
        let grid = det.grid();
        let duration = grid.window_ns.max(PHASE_DT_NS);
        let phase_a =
            sample_phase_path(&sources.cheb.noise, duration, PHASE_DT_NS, derive_seed(seed, Stream::PhaseA, 0))?;
        let phase_b =
            sample_phase_path(&sources.oxeb.noise, duration, PHASE_DT_NS, derive_seed(seed, Stream::PhaseB, 0))?;
        let model = Self {
            sources: *sources,
            map: PhaseMap::new(geo, sources.omega2 - sources.omega1),
            grid,
            r1: det.rate_density(sources.cheb.photon_flux_per_ns),
            r2: det.rate_density(sources.oxeb.photon_flux_per_ns),
            dark: det.dark_density(),
            phase_a,
            phase_b,
        };
        let expected = model.expected_total_bound();
        if !(expected <= MAX_EXPECTED_EVENTS) {
            return Err(Error::ResourceLimit { expected, limit: MAX_EXPECTED_EVENTS });
        }
        Ok(model)
    }

    /// Upper estimate of the event count, ignoring the interference term.
    pub fn expected_total_bound(&self) -> f64 {
        let y = self.grid.y_range_mm;
        self.r1 * y * self.sources.cheb.gate.integral_ns()
            + self.r2 * y * self.sources.oxeb.gate.integral_ns()
            + self.dark * y * self.grid.window_ns
    }

    #[inline]
    pub fn intensity(&self, t_ns: f64, y_mm: f64) -> f64 {
        let ga = crate::sources::gate(&self.sources.cheb.gate, t_ns, y_mm);
        let gb = crate::sources::gate(&self.sources.oxeb.gate, t_ns, y_mm);
        let a = self.r1 * ga;
        let b = self.r2 * gb;
        let mut lambda = a + b + self.dark;
        if a > 0.0 && b > 0.0 && self.sources.mutual_visibility > 0.0 {
            let dphi = self.phase_b.at(t_ns) - self.phase_a.at(t_ns);
            let phi = self.map.phase(y_mm, t_ns, dphi);
            lambda += 2.0 * self.sources.mutual_visibility * (a * b).sqrt() * phi.cos();
        }
        lambda.max(0.0)
    }

    /// Bound on λ over the strip `[t0, t1] × [0, Y]`.
    fn strip_bound(&self, t0: f64, t1: f64) -> f64 {
        let y = self.grid.y_range_mm;
        let ga = self.sources.cheb.gate.max_over(t0, t1, 0.0, y);
        let gb = self.sources.oxeb.gate.max_over(t0, t1, 0.0, y);
        let s = (self.r1 * ga).sqrt() + (self.r2 * gb).sqrt();
        s * s + self.dark
    }
}

/// Photoelectron events and their binned image for one exposure.
#[derive(Debug, Clone)]
pub struct Interferogram {
    pub events: Vec<Event>,
    pub image: CountImage,
    pub orientation: Orientation,
    pub shot_index: u64,
    pub seed: u64,
    /// Present only for synthetic shots; never written next to the events.
    pub truth: Option<Truth>,
}

impl Interferogram {
    pub fn from_events(events: Vec<Event>, grid: Grid, orientation: Orientation) -> Self {
        let image = bin_events(&events, grid);
        Self { events, image, orientation, shot_index: 0, seed: 0, truth: None }
    }

    pub fn grid(&self) -> Grid {
        self.image.grid
    }
}

/// Samples the inhomogeneous Poisson process λ(t, y) by thinning, strip by
/// strip along t. Each strip has its own RNG stream, so the output does not
/// depend on the thread count.
pub fn sample_events(model: &IntensityModel, seed: u64) -> Vec<Event> {
    let grid = model.grid;
    let strips = grid.t_bins * STRIPS_PER_BIN;
    let dt = grid.window_ns / strips as f64;
    let y_range = grid.y_range_mm;
    let per_strip: Vec<Vec<Event>> = (0..strips)
        .into_par_iter()
        .map(|s| {
            let t0 = s as f64 * dt;
            let t1 = t0 + dt;
            let bound = model.strip_bound(t0, t1);
            let mean = bound * dt * y_range;
            if !(mean > 0.0) {
                return Vec::new();
            }
            let mut rng = rng_from_seed(derive_seed(seed, Stream::Thinning, s as u64));
            let n = Poisson::new(mean).map(|p| p.sample(&mut rng) as usize).unwrap_or(0);
            let mut out = Vec::with_capacity((n as f64 * 0.7) as usize);
            for _ in 0..n {
                let t = t0 + rng.random::<f64>() * dt;
                let y = rng.random::<f64>() * y_range;
                if rng.random::<f64>() * bound < model.intensity(t, y) {
                    out.push(Event { t_ns: t, y_mm: y });
                }
            }
            out.sort_by(|a, b| a.t_ns.total_cmp(&b.t_ns));
            out
        })
        .collect();
    per_strip.concat()
}

/// Simulates one single-exposure interferogram.
pub fn simulate_shot(
    sources: &ShotSources,
    geo: &BeamGeometry,
    det: &DetectorConfig,
    seed: u64,
) -> Result<Interferogram> {
    let model = IntensityModel::new(sources, geo, det, seed)?;
    let events = sample_events(&model, derive_seed(seed, Stream::Shot, 0));
    let mut ig = Interferogram::from_events(events, model.grid, geo.orientation);
    ig.seed = seed;
    ig.truth = Some(Truth::new(sources, geo, det)?);
    Ok(ig)
}

/// Expected counts per instrument bin for the exposure simulated with `seed`,
/// by midpoint integration of λ on a sub-grid.
pub fn expected_image(sources: &ShotSources, geo: &BeamGeometry, det: &DetectorConfig, seed: u64) -> Result<Vec<f64>> {
    let model = IntensityModel::new(sources, geo, det, seed)?;
    Ok(expected_image_of(&model))
}

pub fn expected_image_of(model: &IntensityModel) -> Vec<f64> {
    let g = model.grid;
    let (dt, dy) = (g.t_bin_ns(), g.y_bin_mm());
    let (ht, hy) = (dt / SUB_T as f64, dy / SUB_Y as f64);
    let mut out = vec![0.0; g.len()];
    out.par_chunks_mut(g.t_bins).enumerate().for_each(|(iy, row)| {
        for (it, cell) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for sy in 0..SUB_Y {
                let y = iy as f64 * dy + (sy as f64 + 0.5) * hy;
                for st in 0..SUB_T {
                    let t = it as f64 * dt + (st as f64 + 0.5) * ht;
                    acc += model.intensity(t, y);
                }
            }
            *cell = acc * ht * hy;
        }
    });
    out
}

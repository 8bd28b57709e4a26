//! TOML experiment configuration.
//!
//! Missing keys take their defaults, including per-source defaults inside
//! partially written sections. Unknown keys are warnings, or errors in strict
//! mode.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::budget::BudgetInput;
use crate::detector::{DetectorConfig, ShotSources};
use crate::error::{check_finite, check_non_negative, check_positive, check_unit_interval, Error, Result};
use crate::physics::BeamGeometry;
use crate::rng::{derive_seed, Stream};
use crate::sources::{shot_frequencies, DetuningPlan, GateEnvelope, SourceState};
use crate::units::{hz_to_angular, SPEED_OF_LIGHT};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetuningConfig {
    /// Added to the oxeb nominal frequency, MHz.
    pub nominal_offset_mhz: f64,
    /// Largest |ν₂ − ν₁| that is still simulated, MHz.
    pub ceiling_mhz: f64,
    pub shot_interval_s: f64,
}

impl Default for DetuningConfig {
    fn default() -> Self {
        Self { nominal_offset_mhz: 0.0, ceiling_mhz: 1000.0, shot_interval_s: 1.0 }
    }
}

impl DetuningConfig {
    pub fn validate(&self) -> Result<()> {
        check_finite("nominal_offset_mhz", self.nominal_offset_mhz)?;
        check_positive("ceiling_mhz", self.ceiling_mhz)?;
        check_non_negative("shot_interval_s", self.shot_interval_s)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Master seed. Every shot and stream derives its own seed from it.
    pub seed: u64,
    pub shots: u64,
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
    pub out: PathBuf,
    /// Mutual coherence factor of the two fields, 0–1.
    pub mutual_visibility: f64,
    pub geometry: BeamGeometry,
    pub detuning: DetuningConfig,
    /// Source A.
    pub cheb: SourceState,
    /// Source B.
    pub oxeb: SourceState,
    pub detector: DetectorConfig,
    pub budget: BudgetInput,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            shots: 1,
            workers: 0,
            out: PathBuf::from("out"),
            mutual_visibility: 1.0,
            geometry: BeamGeometry::default(),
            detuning: DetuningConfig::default(),
            cheb: SourceState {
                gate: GateEnvelope {
                    delay_ns: 198.25,
                    tilt_ns_per_mm: 0.5,
                    diffraction_shift_hz: 420e6,
                    ..GateEnvelope::default()
                },
                ..SourceState::default()
            },
            oxeb: SourceState::default(),
            detector: DetectorConfig::default(),
            budget: BudgetInput::default(),
        }
    }
}

/// A parsed config plus the unknown keys it contained.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: ExperimentConfig,
    /// `(dotted key, line)` for each key that was ignored.
    pub unknown: Vec<(String, Option<usize>)>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seed > i64::MAX as u64 {
            return Err(Error::invalid("seed", "must fit in a signed 64-bit integer"));
        }
        check_unit_interval("mutual_visibility", self.mutual_visibility, true)?;
        self.geometry.validate()?;
        self.detuning.validate()?;
        self.cheb.validate()?;
        self.oxeb.validate()?;
        self.detector.validate()?;
        self.budget.validate()
    }

    /// Parses TOML text. With `strict`, unknown keys are an error.
    pub fn parse(text: &str, strict: bool) -> Result<Loaded> {
        let user: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config {
            line: e.span().map(|s| line_of(text, s.start)),
            message: e.message().to_string(),
        })?;
        // Type errors carry spans only when decoding the original text.
        if let Err(e) = toml::from_str::<ExperimentConfig>(text) {
            let message = e.message().to_string();
            let line = e.span().map(|s| line_of(text, s.start)).or_else(|| guess_line(text, &message));
            return Err(Error::Config { line, message });
        }
        let mut merged = toml::Table::try_from(ExperimentConfig::default())
            .map_err(|e| Error::Config { line: None, message: e.to_string() })?;
        merge(&mut merged, user);

        let mut unknown = Vec::new();
        let config: ExperimentConfig = serde_ignored::deserialize(toml::Value::Table(merged), |path| {
            let key = path.to_string();
            let line = find_key_line(text, &key);
            unknown.push((key, line));
        })
        .map_err(|e: toml::de::Error| {
            let message = e.message().to_string();
            let line = e.span().map(|s| line_of(text, s.start)).or_else(|| guess_line(text, &message));
            Error::Config { line, message }
        })?;

        if strict {
            if let Some((key, line)) = unknown.first() {
                return Err(Error::Config { line: *line, message: format!("unknown key `{key}`") });
            }
        }
        config.validate().map_err(|e| match e {
            Error::InvalidParameter { name, reason } => {
                Error::Config { line: find_leaf_line(text, name), message: format!("invalid `{name}`: {reason}") }
            }
            other => Error::Config { line: None, message: other.to_string() },
        })?;
        Ok(Loaded { config, unknown })
    }

    /// TOML with every value written out.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config { line: None, message: e.to_string() })
    }

    pub fn plan(&self) -> DetuningPlan {
        let nu = |nm: f64| SPEED_OF_LIGHT / (nm * 1e-9);
        DetuningPlan {
            nu1_hz: nu(self.geometry.lambda1_nm),
            nu2_hz: nu(self.geometry.lambda2_nm) + self.detuning.nominal_offset_mhz * 1e6,
            ceiling_hz: self.detuning.ceiling_mhz * 1e6,
            shot_interval_s: self.detuning.shot_interval_s,
        }
    }

    pub fn shot_seed(&self, shot_index: u64) -> u64 {
        derive_seed(self.seed, Stream::Shot, shot_index)
    }

    /// Sources with the frequencies drawn for `shot_index`.
    pub fn shot_sources(&self, shot_index: u64) -> ShotSources {
        let (omega1, omega2) =
            shot_frequencies(&self.plan(), &self.cheb.noise, &self.oxeb.noise, shot_index, self.seed);
        ShotSources { cheb: self.cheb, oxeb: self.oxeb, omega1, omega2, mutual_visibility: self.mutual_visibility }
    }

    /// Sources at the nominal frequencies with no drift.
    pub fn nominal_sources(&self) -> ShotSources {
        let plan = self.plan();
        ShotSources {
            cheb: self.cheb,
            oxeb: self.oxeb,
            omega1: hz_to_angular(plan.nu1_hz),
            omega2: hz_to_angular(plan.nu2_hz),
            mutual_visibility: self.mutual_visibility,
        }
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

/// Line of `a.b.c`: the `c = ` assignment inside `[a.b]`, or a dotted or
/// inline spelling of it.
fn find_key_line(text: &str, dotted: &str) -> Option<usize> {
    let (table, leaf) = match dotted.rsplit_once('.') {
        Some((t, l)) => (t, l),
        None => ("", dotted),
    };
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(h) = line.strip_prefix('[').and_then(|s| s.split(']').next()) {
            current = h.trim().to_string();
            continue;
        }
        let Some((key, _)) = line.split_once('=') else { continue };
        let key = key.trim();
        let full = if current.is_empty() { key.to_string() } else { format!("{current}.{key}") };
        if full == dotted || (current == table && key == leaf) {
            return Some(i + 1);
        }
    }
    None
}

fn find_leaf_line(text: &str, leaf: &str) -> Option<usize> {
    text.lines().position(|l| l.trim().split_once('=').is_some_and(|(k, _)| k.trim() == leaf)).map(|i| i + 1)
}

/// Type errors after the merge carry no span; recover the line from a key
/// named in the message.
fn guess_line(text: &str, message: &str) -> Option<usize> {
    message.split('`').skip(1).step_by(2).find_map(|k| find_leaf_line(text, k))
}

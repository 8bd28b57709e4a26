//! Which-path assignment from the sign of the equiphase slope.
//!
//! The fringes drift toward the transverse momentum of the higher-frequency
//! photons. With the orientation convention fixing which source carries +y
//! momentum, the slope sign names the higher-energy source.

use std::fmt;

use super::FringeEstimate;
use crate::physics::BeamGeometry;

/// Default z-score needed before a source is named.
pub const CONFIDENCE_THRESHOLD: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    /// Source A.
    Cheb,
    /// Source B.
    Oxeb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Path {
    Ap,
    Bp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HigherEnergy {
    Cheb,
    Oxeb,
    Undetermined,
}

impl HigherEnergy {
    pub fn as_str(self) -> &'static str {
        match self {
            HigherEnergy::Cheb => "cheb",
            HigherEnergy::Oxeb => "oxeb",
            HigherEnergy::Undetermined => "undetermined",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "cheb" => Some(HigherEnergy::Cheb),
            "oxeb" => Some(HigherEnergy::Oxeb),
            "undetermined" => Some(HigherEnergy::Undetermined),
            _ => None,
        }
    }

    /// Expected label for a known `ν₂ − ν₁`.
    pub fn from_delta_nu(delta_nu_mhz: f64) -> Self {
        if delta_nu_mhz > 0.0 {
            HigherEnergy::Oxeb
        } else if delta_nu_mhz < 0.0 {
            HigherEnergy::Cheb
        } else {
            HigherEnergy::Undetermined
        }
    }
}

impl fmt::Display for HigherEnergy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Path {
    pub fn as_str(self) -> &'static str {
        match self {
            Path::Ap => "AP",
            Path::Bp => "BP",
        }
    }
}

/// Fixed by the geometry: each laser illuminates its own path.
pub const PATH_ASSIGNMENT: [(Source, Path); 2] = [(Source::Cheb, Path::Ap), (Source::Oxeb, Path::Bp)];

#[derive(Debug, Clone, PartialEq)]
pub struct WhichPathVerdict {
    pub higher_energy_source: HigherEnergy,
    pub path_assignment: [(Source, Path); 2],
    /// `|slope| / slope_uncertainty`.
    pub confidence: f64,
    pub threshold: f64,
    pub note: String,
}

pub fn which_path(est: &FringeEstimate, geo: &BeamGeometry) -> WhichPathVerdict {
    which_path_with_threshold(est, geo, CONFIDENCE_THRESHOLD)
}

pub fn which_path_with_threshold(est: &FringeEstimate, geo: &BeamGeometry, threshold: f64) -> WhichPathVerdict {
    let confidence = if est.slope_uncertainty > 0.0 { est.slope_mm_per_ns.abs() / est.slope_uncertainty } else { 0.0 };
    let toward_positive = est.slope_mm_per_ns * geo.orientation.sign();
    let higher = if !(confidence >= threshold) {
        HigherEnergy::Undetermined
    } else if toward_positive > 0.0 {
        HigherEnergy::Oxeb
    } else {
        HigherEnergy::Cheb
    };
    let note = match higher {
        HigherEnergy::Oxeb => "oxeb higher energy, path BP; cheb lower energy, path AP".to_string(),
        HigherEnergy::Cheb => "cheb higher energy, path AP; oxeb lower energy, path BP".to_string(),
        HigherEnergy::Undetermined => {
            format!(
                "slope consistent with zero at z = {confidence:.2} < {threshold}; photons not frequency distinguished"
            )
        }
    };
    WhichPathVerdict { higher_energy_source: higher, path_assignment: PATH_ASSIGNMENT, confidence, threshold, note }
}

//! Exponentially clustered pole offsets and log-spaced sample abscissae.
//!
//! Poles are stored as offsets relative to the singularity they cluster
//! towards. A family of `n_levels` levels produces either `2 * n_levels`
//! poles in conjugate pairs on the imaginary axis, or `n_levels` real poles
//! on one side of the singularity.

use faer::c64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default pole spacing parameter.
pub const DEFAULT_SIGMA: f64 = 2.0 * std::f64::consts::PI;

/// Default number of decades spanned by clustered samples.
pub const DEFAULT_DECADES: f64 = 16.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Taper {
    /// `exp(-sigma (sqrt(n) - sqrt(j)))`, `j = 1..=n`.
    Tapered,
    /// `exp(-sigma j / sqrt(n))`, `j = 0..n`.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Poles at `+i e_j` and `-i e_j`.
    ImaginaryPair,
    /// Real poles at `-e_j`, outside a domain lying to the right of the singularity.
    RealOneside,
}

fn default_taper() -> Taper {
    Taper::Tapered
}

fn default_orientation() -> Orientation {
    Orientation::ImaginaryPair
}

fn default_sigma() -> f64 {
    DEFAULT_SIGMA
}

fn default_side_scale() -> f64 {
    1.0
}

/// One family of poles clustering towards a singularity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSpec {
    pub location: f64,
    pub n_levels: usize,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_taper")]
    pub taper: Taper,
    #[serde(default = "default_orientation")]
    pub orientation: Orientation,
    #[serde(default = "default_side_scale")]
    pub side_scale: f64,
}

impl ClusterSpec {
    /// Tapered imaginary-pair family with unit scale, the default configuration.
    pub fn new(location: f64, n_levels: usize, sigma: f64) -> Self {
        Self {
            location,
            n_levels,
            sigma,
            taper: Taper::Tapered,
            orientation: Orientation::ImaginaryPair,
            side_scale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_levels(self.n_levels, self.sigma)?;
        if !(self.side_scale > 0.0 && self.side_scale.is_finite()) {
            return Err(Error::param(format!(
                "side_scale must be positive, got {}",
                self.side_scale
            )));
        }
        if !self.location.is_finite() {
            return Err(Error::param("cluster location must be finite"));
        }
        Ok(())
    }

    /// Number of poles this spec materializes to.
    pub fn pole_count(&self) -> usize {
        match self.orientation {
            Orientation::ImaginaryPair => 2 * self.n_levels,
            Orientation::RealOneside => self.n_levels,
        }
    }
}

/// Materialized pole offsets together with the spec that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoleSet {
    #[serde(with = "crate::io::complex_vec")]
    pub offsets: Vec<c64>,
    pub spec: ClusterSpec,
}

impl PoleSet {
    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    /// Reflects every offset through the singularity. Used for one-sided real
    /// poles sitting at the upper end of an interval.
    pub fn mirrored(&self) -> Self {
        Self {
            offsets: self.offsets.iter().map(|q| -q).collect(),
            spec: self.spec,
        }
    }
}

fn check_levels(n_levels: usize, sigma: f64) -> Result<()> {
    if n_levels == 0 {
        return Err(Error::param("n_levels must be at least 1"));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::param(format!("sigma must be positive, got {sigma}")));
    }
    Ok(())
}

/// `exp(-sigma (sqrt(n) - sqrt(j)))` for `j = 1..=n`; ascending, last entry exactly 1.
pub fn tapered_offsets(n_levels: usize, sigma: f64) -> Result<Vec<f64>> {
    check_levels(n_levels, sigma)?;
    let root_n = (n_levels as f64).sqrt();
    Ok((1..=n_levels)
        .map(|j| (-sigma * (root_n - (j as f64).sqrt())).exp())
        .collect())
}

/// `exp(-sigma j / sqrt(n))` for `j = 0..n`; descending, first entry exactly 1.
pub fn uniform_offsets(n_levels: usize, sigma: f64) -> Result<Vec<f64>> {
    check_levels(n_levels, sigma)?;
    let root_n = (n_levels as f64).sqrt();
    Ok((0..n_levels)
        .map(|j| (-sigma * j as f64 / root_n).exp())
        .collect())
}

pub fn materialize_poles(spec: &ClusterSpec) -> Result<PoleSet> {
    spec.validate()?;
    let levels = match spec.taper {
        Taper::Tapered => tapered_offsets(spec.n_levels, spec.sigma)?,
        Taper::Uniform => uniform_offsets(spec.n_levels, spec.sigma)?,
    };
    let s = spec.side_scale;
    let offsets = match spec.orientation {
        Orientation::ImaginaryPair => levels
            .iter()
            .flat_map(|&e| [c64::new(0.0, s * e), c64::new(0.0, -s * e)])
            .collect(),
        Orientation::RealOneside => levels.iter().map(|&e| c64::new(-s * e, 0.0)).collect(),
    };
    Ok(PoleSet {
        offsets,
        spec: *spec,
    })
}

/// Log-spaced abscissae `10^(-decades + decades (i-1)/(m-1))`, `i = 1..=m`.
pub fn clustered_samples(m_points: usize, decades: f64) -> Result<Vec<f64>> {
    if m_points < 2 {
        return Err(Error::param(format!(
            "clustered sampling needs at least 2 points, got {m_points}"
        )));
    }
    if !(decades > 0.0 && decades.is_finite()) {
        return Err(Error::param(format!("decades must be positive, got {decades}")));
    }
    let last = (m_points - 1) as f64;
    Ok((0..m_points)
        .map(|i| 10f64.powf(-decades + decades * i as f64 / last))
        .collect())
}

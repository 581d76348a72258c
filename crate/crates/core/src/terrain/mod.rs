//! One-dimensional heightfield tracks with procedural obstacles, and the
//! crawler environment that runs on them.

mod env;
mod generate;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{GrlError, Result};

pub use env::{EnvConfig, EnvState, Observation, StepOutcome, TerrainEnv, ACTION_DIM, OBS_DIM};
pub use generate::{generate_combined, generate_heightfield, generate_on, Feature, Profile};

/// Spacing of the height samples in meters.
pub const GRID_STEP: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ObstacleKind {
    Step,
    Bumpy,
    Hill,
    Rubble,
    Channel,
    Incline,
    Dune,
    Square,
}

impl ObstacleKind {
    pub const ALL: [ObstacleKind; 8] = [
        ObstacleKind::Step,
        ObstacleKind::Bumpy,
        ObstacleKind::Hill,
        ObstacleKind::Rubble,
        ObstacleKind::Channel,
        ObstacleKind::Incline,
        ObstacleKind::Dune,
        ObstacleKind::Square,
    ];
    /// Obstacles agents evolve on.
    pub const TRAINING: [ObstacleKind; 4] = [
        ObstacleKind::Step,
        ObstacleKind::Bumpy,
        ObstacleKind::Hill,
        ObstacleKind::Rubble,
    ];
    /// Held-out obstacles never seen during evolution.
    pub const NEW: [ObstacleKind; 4] = [
        ObstacleKind::Channel,
        ObstacleKind::Incline,
        ObstacleKind::Dune,
        ObstacleKind::Square,
    ];

    pub fn is_training(self) -> bool {
        Self::TRAINING.contains(&self)
    }

    pub fn name(self) -> &'static str {
        match self {
            ObstacleKind::Step => "Step",
            ObstacleKind::Bumpy => "Bumpy",
            ObstacleKind::Hill => "Hill",
            ObstacleKind::Rubble => "Rubble",
            ObstacleKind::Channel => "Channel",
            ObstacleKind::Incline => "Incline",
            ObstacleKind::Dune => "Dune",
            ObstacleKind::Square => "Square",
        }
    }
}

impl fmt::Display for ObstacleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ObstacleKind {
    type Err = GrlError;

    fn from_str(s: &str) -> Result<Self> {
        ObstacleKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| GrlError::InvalidArgument(format!("unknown obstacle kind `{s}`")))
    }
}

/// Track geometry: total length and the stretch that carries obstacles.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackLayout {
    pub length: f64,
    pub span_start: f64,
    pub span_end: f64,
}

impl Default for TrackLayout {
    fn default() -> Self {
        TrackLayout {
            length: 60.0,
            span_start: 10.0,
            span_end: 45.0,
        }
    }
}

/// Heights sampled every [`GRID_STEP`] meters along a track.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Heightfield {
    /// `None` for tracks mixing several obstacle kinds.
    pub kind: Option<ObstacleKind>,
    pub seed: u64,
    pub scale: f64,
    pub length: f64,
    pub obstacle_span: (f64, f64),
    pub samples: Vec<f64>,
    pub features: Vec<Feature>,
}

impl Heightfield {
    pub fn flat(length: f64) -> Self {
        Heightfield {
            kind: None,
            seed: 0,
            scale: 1.0,
            length,
            obstacle_span: (0.0, 0.0),
            samples: vec![0.0; sample_count(length)],
            features: Vec::new(),
        }
    }

    /// Builds a track from an explicit height profile.
    pub fn from_fn(length: f64, profile: impl Fn(f64) -> f64) -> Self {
        let mut hf = Heightfield::flat(length);
        for (k, h) in hf.samples.iter_mut().enumerate() {
            *h = profile(k as f64 * GRID_STEP);
        }
        hf
    }

    /// Height by linear interpolation between grid samples.
    pub fn height(&self, x: f64) -> Result<f64> {
        if !(0.0..=self.length).contains(&x) {
            return Err(GrlError::OutsideTrack { x, length: self.length });
        }
        Ok(self.height_clamped(x))
    }

    fn height_clamped(&self, x: f64) -> f64 {
        let pos = (x.clamp(0.0, self.length)) / GRID_STEP;
        let nearest = pos.round();
        let last = self.samples.len() - 1;
        if (pos - nearest).abs() < 1e-9 {
            return self.samples[(nearest as usize).min(last)];
        }
        let i = (pos.floor() as usize).min(last);
        let j = (i + 1).min(last);
        let frac = pos - i as f64;
        self.samples[i] * (1.0 - frac) + self.samples[j] * frac
    }

    /// Height and central-difference slope at `x`; the difference stencil is
    /// cut off at the track ends.
    pub fn height_and_slope(&self, x: f64) -> Result<(f64, f64)> {
        let h = self.height(x)?;
        Ok((h, self.slope_clamped(x, GRID_STEP)))
    }

    pub(crate) fn slope_clamped(&self, x: f64, eps: f64) -> f64 {
        let hi = (x + eps).min(self.length);
        let lo = (x - eps).max(0.0);
        if hi <= lo {
            return 0.0;
        }
        (self.height_clamped(hi) - self.height_clamped(lo)) / (hi - lo)
    }

    pub fn max_abs_height(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, h| m.max(h.abs()))
    }

    /// Writes `x,h` rows for plotting.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["x", "h"])?;
        for (k, h) in self.samples.iter().enumerate() {
            w.write_record([format!("{:.2}", k as f64 * GRID_STEP), h.to_string()])?;
        }
        w.flush().map_err(|e| GrlError::io(path, e))?;
        Ok(())
    }
}

pub(crate) fn sample_count(length: f64) -> usize {
    (length / GRID_STEP).round() as usize + 1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_disjoint_and_exhaustive() {
        let mut all: Vec<_> = ObstacleKind::TRAINING
            .iter()
            .chain(ObstacleKind::NEW.iter())
            .copied()
            .collect();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 8);
        assert!(ObstacleKind::TRAINING.iter().all(|k| !ObstacleKind::NEW.contains(k)));
        assert_eq!("dune".parse::<ObstacleKind>().unwrap(), ObstacleKind::Dune);
    }

    #[test]
    fn flat_track_has_zero_height_and_slope() {
        let hf = Heightfield::flat(60.0);
        assert_eq!(hf.samples.len(), 1201);
        for x in [0.0, 3.3, 59.99, 60.0] {
            assert_eq!(hf.height_and_slope(x).unwrap(), (0.0, 0.0));
        }
        assert!(hf.height(-0.1).is_err());
        assert!(hf.height(60.01).is_err());
    }

    #[test]
    fn linear_ramp_slope_is_exact() {
        let hf = Heightfield::from_fn(20.0, |x| 0.1 * x);
        for x in [0.5, 1.234, 7.0, 19.9] {
            let (h, s) = hf.height_and_slope(x).unwrap();
            assert!((h - 0.1 * x).abs() < 1e-12);
            assert!((s - 0.1).abs() < 1e-9, "slope {s} at {x}");
        }
    }

    #[test]
    fn grid_queries_return_stored_samples() {
        let hf = Heightfield::from_fn(10.0, |x| (3.0 * x).sin());
        for k in [0usize, 1, 7, 33, 150, 200] {
            let x = k as f64 * GRID_STEP;
            assert_eq!(hf.height(x).unwrap(), hf.samples[k]);
        }
    }
}

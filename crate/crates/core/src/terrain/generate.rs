use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{sample_count, Heightfield, ObstacleKind, TrackLayout, GRID_STEP};
use crate::error::{GrlError, Result};
use crate::rng::{seeded, StreamRng};

/// Cross-section of a single obstacle element, as a fraction of its height
/// over the relative coordinate `u` in `[0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Plateau,
    Trapezoid,
    SineHump,
    Pyramid,
    /// Asymmetric hump with its crest at relative position `crest`.
    Dune {
        crest: f64,
    },
}

impl Profile {
    fn eval(self, u: f64) -> f64 {
        use std::f64::consts::PI;
        match self {
            Profile::Plateau => 1.0,
            Profile::Trapezoid => {
                let ramp = 0.25;
                if u < ramp {
                    u / ramp
                } else if u > 1.0 - ramp {
                    (1.0 - u) / ramp
                } else {
                    1.0
                }
            }
            Profile::SineHump => (PI * u).sin(),
            Profile::Pyramid => 1.0 - (2.0 * u - 1.0).abs(),
            Profile::Dune { crest } => {
                if u < crest {
                    0.5 * (1.0 - (PI * u / crest).cos())
                } else {
                    0.5 * (1.0 + (PI * (u - crest) / (1.0 - crest)).cos())
                }
            }
        }
    }
}

/// One placed obstacle element; logged with every generated track.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    pub start: f64,
    pub width: f64,
    pub height: f64,
    pub profile: Profile,
}

impl Feature {
    fn end(&self) -> f64 {
        self.start + self.width
    }
}

/// Generates an obstacle track of `kind` on the standard 60 m layout.
pub fn generate_heightfield(kind: ObstacleKind, seed: u64, scale: f64) -> Result<Heightfield> {
    generate_on(kind, seed, scale, TrackLayout::default())
}

pub fn generate_on(kind: ObstacleKind, seed: u64, scale: f64, layout: TrackLayout) -> Result<Heightfield> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(GrlError::InvalidArgument(format!(
            "scale must be positive, got {scale}"
        )));
    }
    if !(0.0 <= layout.span_start && layout.span_start < layout.span_end && layout.span_end <= layout.length) {
        return Err(GrlError::InvalidArgument(format!("bad track layout {layout:?}")));
    }
    let mut rng = seeded(seed);
    let features = place_features(kind, layout.span_start, layout.span_end, &mut rng);
    let mut hf = Heightfield {
        kind: Some(kind),
        seed,
        scale,
        length: layout.length,
        obstacle_span: (layout.span_start, layout.span_end),
        samples: vec![0.0; sample_count(layout.length)],
        features: Vec::new(),
    };
    stamp(&mut hf, &features, scale);
    hf.features = features;
    Ok(hf)
}

/// One instance of each training obstacle, laid end to end on an extended
/// track. Used to pretrain the transfer-learning baseline.
pub fn generate_combined(seed: u64, scale: f64) -> Result<Heightfield> {
    const LEAD: f64 = 10.0;
    const SEGMENT: f64 = 17.5;
    const TAIL: f64 = 15.0;
    let kinds = ObstacleKind::TRAINING;
    let length = LEAD + SEGMENT * kinds.len() as f64 + TAIL;
    let mut hf = Heightfield::flat(length);
    hf.seed = seed;
    hf.scale = scale;
    hf.obstacle_span = (LEAD, LEAD + SEGMENT * kinds.len() as f64);
    let mut rng = seeded(seed);
    let mut all = Vec::new();
    for (i, kind) in kinds.into_iter().enumerate() {
        let start = LEAD + SEGMENT * i as f64;
        all.extend(place_features(kind, start, start + SEGMENT, &mut rng));
    }
    stamp(&mut hf, &all, scale);
    hf.features = all;
    Ok(hf)
}

fn stamp(hf: &mut Heightfield, features: &[Feature], scale: f64) {
    for f in features {
        let first = (f.start / GRID_STEP).ceil() as usize;
        let last = ((f.end() / GRID_STEP).ceil() as usize).min(hf.samples.len());
        for k in first..last {
            let x = k as f64 * GRID_STEP;
            if x >= f.start && x < f.end() {
                hf.samples[k] = scale * f.height * f.profile.eval((x - f.start) / f.width);
            }
        }
    }
}

fn uniform(rng: &mut StreamRng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..=hi)
}

/// Lays out obstacle elements left to right inside `[start, end]`, stopping at
/// the first element that would not fit.
fn place_features(kind: ObstacleKind, start: f64, end: f64, rng: &mut StreamRng) -> Vec<Feature> {
    let mut out = Vec::new();
    let mut x = start;
    let push = |out: &mut Vec<Feature>, x: &mut f64, width: f64, height: f64, profile| {
        if *x + width > end {
            return false;
        }
        out.push(Feature {
            start: *x,
            width,
            height,
            profile,
        });
        *x += width;
        true
    };
    match kind {
        ObstacleKind::Step => 'outer: loop {
            // tau risers up then tau risers down, each tread 2-3 m long
            let tau = rng.random_range(3..=6usize);
            let risers: Vec<f64> = (0..tau).map(|_| uniform(rng, 0.10, 0.13)).collect();
            let mut levels: Vec<f64> = risers
                .iter()
                .scan(0.0, |acc, r| {
                    *acc += r;
                    Some(*acc)
                })
                .collect();
            let down: Vec<f64> = levels[..tau - 1].iter().rev().copied().collect();
            levels.extend(down);
            let widths: Vec<f64> = levels.iter().map(|_| uniform(rng, 2.0, 3.0)).collect();
            if x + widths.iter().sum::<f64>() > end {
                break;
            }
            for (level, width) in levels.into_iter().zip(widths) {
                if !push(&mut out, &mut x, width, level, Profile::Plateau) {
                    break 'outer;
                }
            }
            x += uniform(rng, 2.0, 3.0);
        },
        ObstacleKind::Bumpy => loop {
            let h = uniform(rng, -0.20, 0.24);
            if !push(&mut out, &mut x, 2.0, h, Profile::Trapezoid) {
                break;
            }
        },
        ObstacleKind::Hill => loop {
            let h = uniform(rng, 0.15, 0.60);
            let w = uniform(rng, 4.0, 10.0);
            if !push(&mut out, &mut x, w, h, Profile::SineHump) {
                break;
            }
        },
        ObstacleKind::Rubble => loop {
            let h = uniform(rng, 0.25, 0.50);
            let w = uniform(rng, 2.0, 4.0);
            if !push(&mut out, &mut x, w, h, Profile::Pyramid) {
                break;
            }
        },
        ObstacleKind::Channel => loop {
            let depth = uniform(rng, 0.15, 0.30);
            let w = uniform(rng, 1.0, 2.0);
            if !push(&mut out, &mut x, w, -depth, Profile::Plateau) {
                break;
            }
            x += uniform(rng, 1.0, 3.0);
        },
        ObstacleKind::Incline => {
            // a single ridge across the whole span
            let slope = uniform(rng, 0.05, 0.15);
            let width = end - start;
            push(&mut out, &mut x, width, slope * width / 2.0, Profile::Pyramid);
        }
        ObstacleKind::Dune => loop {
            let h = uniform(rng, 0.20, 0.50);
            let windward = uniform(rng, 3.0, 6.0);
            let leeward = uniform(rng, 1.0, 2.0);
            let w = windward + leeward;
            if !push(&mut out, &mut x, w, h, Profile::Dune { crest: windward / w }) {
                break;
            }
        },
        ObstacleKind::Square => loop {
            let h = uniform(rng, 0.15, 0.30);
            let w = uniform(rng, 1.0, 3.0);
            if !push(&mut out, &mut x, w, h, Profile::Plateau) {
                break;
            }
            x += uniform(rng, 1.0, 3.0);
        },
    }
    out
}

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::Heightfield;
use crate::error::{GrlError, Result};
use crate::ppo::step_reward;

pub const OBS_DIM: usize = 6;
pub const ACTION_DIM: usize = 2;

/// `[v, slope(x), h(x+0.5)-h(x), h(x+1)-h(x), h(x+2)-h(x), h(x+4)-h(x)]`
pub type Observation = [f64; OBS_DIM];

const LOOKAHEAD: [f64; 4] = [0.5, 1.0, 2.0, 4.0];

/// Crawler dynamics and reward weights.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub dt: f64,
    /// Thrust gain on the first action component.
    pub thrust: f64,
    /// Gravity coefficient applied to the local slope.
    pub gravity: f64,
    /// Linear drag coefficient.
    pub drag: f64,
    pub v_max: f64,
    pub slope_eps: f64,
    /// Episode step cap.
    pub t_end: u32,
    /// Weight on forward velocity in the step reward.
    pub velocity_weight: f64,
    /// Weight on the squared action norm in the step reward.
    pub control_weight: f64,
    /// Multiplier on every obstacle height.
    pub terrain_scale: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            dt: 0.05,
            thrust: 2.0,
            gravity: 5.0,
            drag: 0.5,
            v_max: 2.0,
            slope_eps: 0.05,
            t_end: 500,
            velocity_weight: 1.0,
            control_weight: 0.05,
            terrain_scale: 1.0,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dt", self.dt),
            ("v_max", self.v_max),
            ("slope_eps", self.slope_eps),
            ("terrain_scale", self.terrain_scale),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(GrlError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.t_end == 0 {
            return Err(GrlError::Config("t_end must be at least 1".into()));
        }
        if self.control_weight < 0.0 || self.drag < 0.0 {
            return Err(GrlError::Config("control_weight and drag must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub x: f64,
    pub v: f64,
    pub t: u32,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub obs: Observation,
    pub reward: f64,
    pub done: bool,
    /// Reached the finish line, as opposed to running out of steps.
    pub finished: bool,
    pub control_cost: f64,
    pub state: EnvState,
}

/// A crawler on one heightfield. Heightfields are shared read-only.
#[derive(Clone, Debug)]
pub struct TerrainEnv {
    track: Arc<Heightfield>,
    config: EnvConfig,
    state: EnvState,
}

impl TerrainEnv {
    pub fn new(track: Arc<Heightfield>, config: EnvConfig) -> Self {
        TerrainEnv {
            track,
            config,
            state: EnvState::default(),
        }
    }

    pub fn track(&self) -> &Heightfield {
        &self.track
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn state(&self) -> EnvState {
        self.state
    }

    /// Places the crawler on the starting line at rest.
    pub fn reset(&mut self) -> Observation {
        self.state = EnvState::default();
        self.observe()
    }

    pub fn observe(&self) -> Observation {
        let hf = &*self.track;
        let x = self.state.x;
        let h = hf.height_clamped(x);
        let mut obs = [0.0; OBS_DIM];
        obs[0] = self.state.v;
        obs[1] = hf.slope_clamped(x, self.config.slope_eps);
        for (slot, ahead) in obs[2..].iter_mut().zip(LOOKAHEAD) {
            *slot = hf.height_clamped((x + ahead).min(hf.length)) - h;
        }
        obs
    }

    /// Advances one control interval. The action is clamped to `[-1, 1]^2`
    /// and that clamped action is what the control penalty sees.
    pub fn step(&mut self, action: &[f64]) -> Result<StepOutcome> {
        if action.len() != ACTION_DIM {
            return Err(GrlError::Shape(format!(
                "action has {} entries, expected {ACTION_DIM}",
                action.len()
            )));
        }
        if action.iter().any(|a| a.is_nan()) {
            return Err(GrlError::NonFinite("NaN action".into()));
        }
        let c = &self.config;
        let a = [action[0].clamp(-1.0, 1.0), action[1].clamp(-1.0, 1.0)];
        let s = self.track.slope_clamped(self.state.x, c.slope_eps);
        let grip = 1.0 - (a[1] - (4.0 * s).tanh()).abs().min(1.0);
        let acc = c.thrust * a[0] * (0.5 + 0.5 * grip) - c.gravity * s - c.drag * self.state.v;
        let v = (self.state.v + c.dt * acc).clamp(-c.v_max, c.v_max);
        let x = (self.state.x + c.dt * v).clamp(0.0, self.track.length);
        let t = self.state.t + 1;
        self.state = EnvState { x, v, t };
        let reward = step_reward(v, &a, c.velocity_weight, c.control_weight);
        let control_cost = c.control_weight * (a[0] * a[0] + a[1] * a[1]);
        let finished = x >= self.track.length;
        Ok(StepOutcome {
            obs: self.observe(),
            reward,
            done: finished || t >= c.t_end,
            finished,
            control_cost,
            state: self.state,
        })
    }
}

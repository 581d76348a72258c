//! Shared fixtures for the benchmarks.

use std::sync::Arc;

use grl_core::policy::{AgentGenome, InitMethod, NetworkArchitecture};
use grl_core::rng::seeded;
use grl_core::terrain::{generate_heightfield, EnvConfig, ObstacleKind, TerrainEnv, ACTION_DIM, OBS_DIM};

pub fn genome(hidden_width: usize) -> AgentGenome {
    let actor = NetworkArchitecture::new(OBS_DIM, hidden_width, ACTION_DIM).expect("valid architecture");
    let critic = NetworkArchitecture::new(OBS_DIM, hidden_width, 1).expect("valid architecture");
    AgentGenome::random(&actor, &critic, InitMethod::Orthogonal, &mut seeded(0))
}

pub fn env(kind: ObstacleKind) -> TerrainEnv {
    let track = generate_heightfield(kind, 0, 1.0).expect("valid terrain");
    TerrainEnv::new(Arc::new(track), EnvConfig::default())
}

//! Scenario files: one TOML document drives a full run. Every section has
//! table defaults, so a minimal scenario only names the agents, the targets
//! and the horizon.

use crate::controller::ControllerConfig;
use crate::metrics::OspaConfig;
use crate::models::{
    AgentMotionConfig, AgentState, Arena, ClutterConfig, ClutterSupport, MeasurementNoiseConfig,
    MotionConfig, ScheduleEntry, SensingConfig,
};
use crate::objectives::TrackerParams;
use crate::rfs::{BirthConfig, FilterConfig};
use serde::{Deserialize, Serialize};

/// Target motion model parameters; expands to the nearly-constant-velocity
/// transition and process noise.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionParams {
    /// sampling interval T [s]
    pub sampling_interval: f64,
    /// per-step survival probability
    pub survival_prob: f64,
}

impl Default for MotionParams {
    fn default() -> Self {
        Self { sampling_interval: 1.0, survival_prob: 0.99 }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClutterParams {
    /// expected false alarms per scan
    pub rate: f64,
    /// defaults to full bearing times [0, arena diagonal]
    pub support: Option<ClutterSupport>,
}

impl Default for ClutterParams {
    fn default() -> Self {
        Self { rate: 10.0, support: None }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MemoryParams {
    pub enabled: bool,
    /// window length in steps
    pub kappa: usize,
}

impl Default for MemoryParams {
    fn default() -> Self {
        Self { enabled: false, kappa: 30 }
    }
}

/// How the agents enter the arena.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum AgentSpawn {
    /// explicit positions
    Fixed { positions: Vec<[f64; 2]> },
    /// uniform over the arena, rejection-sampled to satisfy the separation
    Uniform { count: usize },
    /// evenly spaced on a ring around the arena center
    CenterRing { count: usize, radius: f64 },
}

impl Default for AgentSpawn {
    fn default() -> Self {
        AgentSpawn::Uniform { count: 3 }
    }
}

impl AgentSpawn {
    pub fn count(&self) -> usize {
        match self {
            AgentSpawn::Fixed { positions } => positions.len(),
            AgentSpawn::Uniform { count } | AgentSpawn::CenterRing { count, .. } => *count,
        }
    }
}

/// Randomized target generation per trial, in addition to the scripted
/// schedule.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomTargetParams {
    pub count: usize,
    pub placement: TargetPlacement,
    /// spawn radius around each agent for the in-range placement [m]
    pub in_range_radius: f64,
    /// per-axis velocity standard deviation [m/s]
    pub velocity_std: f64,
    pub birth: usize,
    /// defaults to beyond the horizon (alive for the whole run)
    pub death: Option<usize>,
}

impl Default for RandomTargetParams {
    fn default() -> Self {
        Self {
            count: 0,
            placement: TargetPlacement::Uniform,
            in_range_radius: 25.0,
            velocity_std: 1.0,
            birth: 0,
            death: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetPlacement {
    /// uniform over the arena
    Uniform,
    /// one target near each agent, cycling when count exceeds the team size
    PerAgentInRange,
}

/// A complete experiment description.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub seed: u64,
    /// number of simulated steps K
    pub horizon: usize,
    pub arena: Arena,
    pub motion: MotionParams,
    pub sensing: SensingConfig,
    pub measurement_noise: MeasurementNoiseConfig,
    pub clutter: ClutterParams,
    pub agent_motion: AgentMotionConfig,
    pub filter: FilterConfig,
    pub birth: BirthConfig,
    pub tracker: TrackerParams,
    pub controller: ControllerConfig,
    /// search-grid cell size [m]
    pub grid_resolution: f64,
    pub search_memory: MemoryParams,
    pub ospa: OspaConfig,
    pub spawn: AgentSpawn,
    pub targets: Vec<ScheduleEntry>,
    pub random_targets: Option<RandomTargetParams>,
    /// apply the survival draw to ground-truth targets
    pub stochastic_survival: bool,
    /// targets farther than this outside the arena are removed [m]
    pub arena_margin: f64,
    /// steps at which to export the coverage field
    pub grid_export: Vec<usize>,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            seed: 0,
            horizon: 50,
            arena: Arena::default(),
            motion: MotionParams::default(),
            sensing: SensingConfig::default(),
            measurement_noise: MeasurementNoiseConfig::default(),
            clutter: ClutterParams::default(),
            agent_motion: AgentMotionConfig::default(),
            filter: FilterConfig::default(),
            birth: BirthConfig::default(),
            tracker: TrackerParams::default(),
            controller: ControllerConfig::default(),
            grid_resolution: 10.0,
            search_memory: MemoryParams::default(),
            ospa: OspaConfig::default(),
            spawn: AgentSpawn::default(),
            targets: Vec::new(),
            random_targets: None,
            stochastic_survival: false,
            arena_margin: 50.0,
            grid_export: Vec::new(),
        }
    }
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), String> {
        self.arena.validate().map_err(|e| e.to_string())?;
        self.sensing.validate().map_err(|e| e.to_string())?;
        self.measurement_noise.validate().map_err(|e| e.to_string())?;
        self.agent_motion.validate().map_err(|e| e.to_string())?;
        self.controller.validate().map_err(|e| e.to_string())?;
        if self.spawn.count() == 0 {
            return Err("at least one agent is required".into());
        }
        if self.grid_resolution <= 0.0 {
            return Err("grid_resolution must be > 0".into());
        }
        if self.clutter.rate < 0.0 {
            return Err("clutter rate must be >= 0".into());
        }
        if self.motion.sampling_interval <= 0.0 {
            return Err("sampling_interval must be > 0".into());
        }
        if !(0.0..=1.0).contains(&self.motion.survival_prob) {
            return Err("survival_prob must be in [0,1]".into());
        }
        for (i, t) in self.targets.iter().enumerate() {
            if t.birth > self.horizon {
                return Err(format!("target {i}: birth {} beyond horizon {}", t.birth, self.horizon));
            }
            if t.birth >= t.death {
                return Err(format!("target {i}: birth {} not before death {}", t.birth, t.death));
            }
        }
        if let AgentSpawn::Fixed { positions } = &self.spawn {
            for p in positions {
                if !self.arena.contains(p[0], p[1]) {
                    return Err(format!("agent position ({}, {}) outside arena", p[0], p[1]));
                }
            }
        }
        Ok(())
    }

    pub fn motion_config(&self) -> MotionConfig {
        MotionConfig::nearly_constant_velocity(
            self.motion.sampling_interval,
            self.motion.survival_prob,
        )
    }

    pub fn clutter_config(&self) -> ClutterConfig {
        let support = self
            .clutter
            .support
            .unwrap_or_else(|| ClutterSupport::full_bearing(self.arena.diagonal()));
        ClutterConfig::new(self.clutter.rate, support).expect("validated clutter")
    }

    pub fn fixed_agents(&self) -> Option<Vec<AgentState>> {
        match &self.spawn {
            AgentSpawn::Fixed { positions } => {
                Some(positions.iter().map(|p| AgentState::new(p[0], p[1])).collect())
            }
            _ => None,
        }
    }
}

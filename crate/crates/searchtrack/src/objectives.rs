//! Objective functions scored on candidate decisions: the tracking cost via
//! ideal-measurement pseudo-updates of the predicted belief, and the search
//! cost as the normalized integral of the joint missed-detection probability
//! over the arena, optionally averaged over a sliding window of past
//! coverage fields.

use crate::models::{
    ideal_measurement, AgentState, Arena, ClutterConfig, MeasurementNoiseConfig, MeasurementSet,
    SensingConfig, TargetState,
};
use crate::rfs::{self, MultiBernoulli};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::fmt::Write as _;

/// One admissible control: the position the agent would occupy after the
/// move, tagged with its ordinal in the admissible-control list.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlAction {
    pub target: AgentState,
    pub index: usize,
}

/// Builds the control list for one agent from its admissible positions.
pub fn control_actions(positions: Vec<AgentState>) -> Vec<ControlAction> {
    positions
        .into_iter()
        .enumerate()
        .map(|(index, target)| ControlAction { target, index })
        .collect()
}

/// Per-agent, per-control tracking costs in [0,1], computed once per step
/// before the optimizer runs.
#[derive(Clone, Debug)]
pub struct TrackCostTable {
    costs: Vec<Vec<f64>>,
}

impl TrackCostTable {
    pub fn new(costs: Vec<Vec<f64>>) -> Self {
        debug_assert!(costs
            .iter()
            .all(|row| row.iter().all(|c| (0.0..=1.0).contains(c))));
        Self { costs }
    }

    pub fn agents(&self) -> usize {
        self.costs.len()
    }

    pub fn controls(&self) -> usize {
        self.costs.first().map_or(0, Vec::len)
    }

    pub fn cost(&self, agent: usize, control: usize) -> f64 {
        self.costs[agent][control]
    }

    pub fn row(&self, agent: usize) -> &[f64] {
        &self.costs[agent]
    }
}

/// Tracking capacity: the number of targets one agent is designed to track.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerParams {
    pub capacity: usize,
}

impl Default for TrackerParams {
    fn default() -> Self {
        Self { capacity: 5 }
    }
}

/// The ideal measurement set under a hypothesized control: one noise-free,
/// clutter-free return per predicted state.
pub fn generate_pims(predicted: &[TargetState], u: &ControlAction) -> MeasurementSet {
    MeasurementSet::new(predicted.iter().map(|x| ideal_measurement(x, &u.target)).collect())
}

/// Tracking cost from the cardinality statistics of a pseudo-posterior:
/// `(sigma_tilde - 1) * sqrt(n_hat / capacity) + 1`, clamped into [0,1].
/// Zero when the agent tracks a full load with no variance, one when nothing
/// is tracked or the variance is maximal.
pub fn track_cost_from_stats(n_hat: f64, sigma_tilde: f64, capacity: usize) -> f64 {
    ((sigma_tilde - 1.0) * (n_hat / capacity as f64).sqrt() + 1.0).clamp(0.0, 1.0)
}

/// Tracking cost of applying control `u` given the predicted belief: runs a
/// pseudo-update against the ideal measurement set and evaluates the
/// cardinality-variance cost. Uses the unrounded expected count.
pub fn track_cost(
    belief: &MultiBernoulli,
    u: &ControlAction,
    pims: &MeasurementSet,
    sensing: &SensingConfig,
    noise: &MeasurementNoiseConfig,
    clutter: &ClutterConfig,
    params: &TrackerParams,
) -> f64 {
    let post = rfs::update(belief, pims, &u.target, sensing, noise, clutter);
    let (n_hat, _, sigma_tilde) = post.cardinality_moments();
    track_cost_from_stats(n_hat, sigma_tilde, params.capacity)
}

/// Fills the full cost table: entry (j, i) is the tracking cost for agent j
/// under its i-th control, with the ideal measurement set generated from the
/// states of that agent's confident predicted components.
pub fn build_track_cost_table(
    beliefs: &[MultiBernoulli],
    control_sets: &[Vec<ControlAction>],
    sensing: &SensingConfig,
    noise: &MeasurementNoiseConfig,
    clutter: &ClutterConfig,
    params: &TrackerParams,
) -> TrackCostTable {
    let costs = beliefs
        .par_iter()
        .zip(control_sets.par_iter())
        .map(|(belief, controls)| {
            let predicted = rfs::predict_estimate(belief);
            controls
                .iter()
                .map(|u| {
                    let pims = generate_pims(&predicted, u);
                    track_cost(belief, u, &pims, sensing, noise, clutter, params)
                })
                .collect()
        })
        .collect();
    TrackCostTable::new(costs)
}

/// Discretized coverage-complement field over the arena. Cell (ix, iy) holds
/// the product over searchers of one minus the detection probability at the
/// cell center.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchGrid {
    pub resolution: f64,
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<f64>,
}

impl SearchGrid {
    pub fn value(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.nx + ix]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// CSV matrix, one row per y index, columns in x order.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                if ix > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{}", self.value(ix, iy));
            }
            out.push('\n');
        }
        out
    }
}

/// Grid dimensions for an arena at a given resolution.
pub fn grid_shape(arena: &Arena, resolution: f64) -> (usize, usize) {
    let nx = (arena.width / resolution).ceil() as usize;
    let ny = (arena.height / resolution).ceil() as usize;
    (nx.max(1), ny.max(1))
}

/// The search-value field for a set of searching agents: at each cell center
/// the probability that no searcher detects a target there. An empty searcher
/// set yields the all-ones field.
pub fn search_value_field(
    searchers: &[AgentState],
    sensing: &SensingConfig,
    arena: &Arena,
    resolution: f64,
) -> SearchGrid {
    let (nx, ny) = grid_shape(arena, resolution);
    let mut values = vec![1.0; nx * ny];
    for iy in 0..ny {
        let cy = (iy as f64 + 0.5) * resolution;
        for ix in 0..nx {
            let cx = (ix as f64 + 0.5) * resolution;
            let mut v = 1.0;
            for s in searchers {
                let d = (cx - s.x).hypot(cy - s.y);
                v *= 1.0 - sensing.pd_at_distance(d);
            }
            values[iy * nx + ix] = v;
        }
    }
    SearchGrid { resolution, nx, ny, values }
}

/// Normalized total search cost: the area-weighted mean of the field, i.e.
/// the fraction of the arena left uncovered.
pub fn total_search_cost(grid: &SearchGrid) -> f64 {
    grid.mean()
}

/// Sliding window of the last `kappa` realized coverage fields. Candidate
/// fields are compared against where coverage has recently been, which pushes
/// agents to revisit stale regions.
#[derive(Clone, Debug)]
pub struct SearchMemory {
    kappa: usize,
    history: VecDeque<Vec<f64>>,
}

impl SearchMemory {
    pub fn new(kappa: usize) -> Self {
        Self { kappa, history: VecDeque::new() }
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    pub fn len(&self) -> usize {
        self.history.len()
    }

    pub fn is_empty(&self) -> bool {
        self.history.is_empty()
    }

    pub fn push(&mut self, grid: &SearchGrid) {
        if self.kappa == 0 {
            return;
        }
        if self.history.len() == self.kappa {
            self.history.pop_front();
        }
        self.history.push_back(grid.values.clone());
    }

    /// Sum over stored fields of their cell means.
    pub fn sum_of_means(&self) -> f64 {
        self.history
            .iter()
            .map(|v| v.iter().sum::<f64>() / v.len() as f64)
            .sum()
    }
}

/// Memory-based search cost: the cell-wise uniform average of the candidate
/// field with every stored field, integrated like `total_search_cost`. With
/// an empty history this reduces to the instantaneous cost.
pub fn memory_search_cost(candidate: &SearchGrid, memory: &SearchMemory) -> f64 {
    if memory.is_empty() {
        return total_search_cost(candidate);
    }
    let n = candidate.values.len();
    let mut avg = candidate.values.clone();
    for h in &memory.history {
        debug_assert_eq!(h.len(), n, "memory grids must share the candidate's shape");
        for (a, v) in avg.iter_mut().zip(h) {
            *a += v;
        }
    }
    let terms = (memory.len() + 1) as f64;
    avg.iter().map(|v| v / terms).sum::<f64>() / n as f64
}

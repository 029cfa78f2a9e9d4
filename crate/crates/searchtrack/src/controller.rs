//! Joint mode-assignment and control optimizer. Every agent gets exactly one
//! (mode, control) pair per step, encoded as a single integer gene in
//! `[0, 2|U|)`: the quotient by |U| selects the mode, the remainder the
//! control. The combined cost is `(1 - w) * search + w * track`, so `w = 0`
//! drives the team into pure coverage and `w = 1` into pure tracking. A
//! genetic algorithm approximates the minimizer; an exhaustive solver serves
//! as the exact oracle on small instances.

use crate::models::{AgentState, Arena, ClutterConfig, MeasurementNoiseConfig, SensingConfig};
use crate::objectives::{
    build_track_cost_table, grid_shape, ControlAction, SearchMemory, TrackCostTable,
    TrackerParams,
};
use crate::rfs::MultiBernoulli;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const EXHAUSTIVE_LIMIT: u128 = 1_000_000;

#[derive(Debug, Error)]
pub enum ControllerError {
    #[error("no feasible decision: pairwise agent separation > {min_separation} m is unsatisfiable")]
    NoFeasibleDecision { min_separation: f64 },
    #[error("instance too large for exhaustive enumeration: {size} candidates exceed {limit}")]
    InstanceTooLarge { size: u128, limit: u128 },
    #[error("invalid controller configuration: {0}")]
    InvalidConfig(String),
}

/// Operating mode of one agent for one step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Search,
    Track,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::Search => write!(f, "search"),
            Mode::Track => write!(f, "track"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AgentAssignment {
    pub mode: Mode,
    pub control_index: usize,
}

/// One (mode, control) pair per agent; a feasible point of the joint program
/// by construction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JointDecision {
    pub assignments: Vec<AgentAssignment>,
}

impl JointDecision {
    pub fn from_genes(genes: &[usize], n_controls: usize) -> Self {
        let assignments = genes
            .iter()
            .map(|&g| AgentAssignment {
                mode: if g / n_controls == 0 { Mode::Search } else { Mode::Track },
                control_index: g % n_controls,
            })
            .collect();
        Self { assignments }
    }

    pub fn genes(&self, n_controls: usize) -> Vec<usize> {
        self.assignments
            .iter()
            .map(|a| match a.mode {
                Mode::Search => a.control_index,
                Mode::Track => n_controls + a.control_index,
            })
            .collect()
    }

    pub fn positions(&self, controls: &[Vec<ControlAction>]) -> Vec<AgentState> {
        self.assignments
            .iter()
            .enumerate()
            .map(|(j, a)| controls[j][a.control_index].target)
            .collect()
    }
}

/// Optimizer parameters. `w` weights the tracking objective against the
/// search objective. `max_generations = 0` selects the default budget of
/// `150 * |U| * |S|`; `mutation_rate = None` selects one expected mutation
/// per chromosome (rate 1/|S|).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    pub w: f64,
    /// minimum pairwise agent separation d_min [m]
    pub min_separation: f64,
    pub population_size: usize,
    pub max_generations: usize,
    /// stop after this many consecutive generations with improvement below
    /// the function tolerance
    pub stall_generations: usize,
    pub function_tolerance: f64,
    /// slack subtracted from d_min in the separation check
    pub constraint_tolerance: f64,
    pub elite_fraction: f64,
    pub crossover_rate: f64,
    pub mutation_rate: Option<f64>,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            w: 0.5,
            min_separation: 60.0,
            population_size: 400,
            max_generations: 0,
            stall_generations: 25,
            function_tolerance: 1e-4,
            constraint_tolerance: 1e-6,
            elite_fraction: 0.05,
            crossover_rate: 0.8,
            mutation_rate: None,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<(), ControllerError> {
        if !(0.0..=1.0).contains(&self.w) {
            return Err(ControllerError::InvalidConfig("w must be in [0,1]".into()));
        }
        if self.min_separation < 0.0 {
            return Err(ControllerError::InvalidConfig("min_separation must be >= 0".into()));
        }
        if self.population_size < 2 {
            return Err(ControllerError::InvalidConfig("population_size must be >= 2".into()));
        }
        Ok(())
    }
}

/// Search cost, track cost, and their weighted combination
/// `(1 - w) * search + w * track` for one candidate decision.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValues {
    pub search_cost: f64,
    pub track_cost: f64,
    pub combined: f64,
}

/// Everything a solver needs to score decisions for one step.
pub struct DecisionContext<'a> {
    pub predicted: &'a [MultiBernoulli],
    pub controls: &'a [Vec<ControlAction>],
    pub sensing: &'a SensingConfig,
    pub noise: &'a MeasurementNoiseConfig,
    pub clutter: &'a ClutterConfig,
    pub arena: &'a Arena,
    pub tracker: &'a TrackerParams,
    pub grid_resolution: f64,
    pub memory: Option<&'a SearchMemory>,
}

impl DecisionContext<'_> {
    fn n_agents(&self) -> usize {
        self.predicted.len()
    }

    fn n_controls(&self) -> usize {
        self.controls.first().map_or(0, Vec::len)
    }
}

/// Deterministic decision scorer. Coverage factors per (agent, control) are
/// precomputed over the grid once, so scoring a candidate costs one pass
/// over the cells per searcher plus a table lookup per tracker.
pub struct Evaluator<'a> {
    controls: &'a [Vec<ControlAction>],
    table: &'a TrackCostTable,
    w: f64,
    n_controls: usize,
    n_cells: usize,
    /// index (j * |U| + i) -> per-cell factor (1 - pd)
    coverage: Vec<Vec<f64>>,
    memory_sum: f64,
    memory_terms: f64,
}

impl<'a> Evaluator<'a> {
    pub fn new(ctx: &DecisionContext<'a>, table: &'a TrackCostTable, w: f64) -> Self {
        let (nx, ny) = grid_shape(ctx.arena, ctx.grid_resolution);
        let n_cells = nx * ny;
        let res = ctx.grid_resolution;
        let sensing = *ctx.sensing;
        let coverage: Vec<Vec<f64>> = ctx
            .controls
            .par_iter()
            .flat_map_iter(|controls| controls.iter().map(move |u| (u.target, sensing)))
            .map(|(target, sensing)| {
                let mut cells = Vec::with_capacity(n_cells);
                for iy in 0..ny {
                    let cy = (iy as f64 + 0.5) * res;
                    for ix in 0..nx {
                        let cx = (ix as f64 + 0.5) * res;
                        let d = (cx - target.x).hypot(cy - target.y);
                        cells.push(1.0 - sensing.pd_at_distance(d));
                    }
                }
                cells
            })
            .collect();
        let (memory_sum, memory_terms) = match ctx.memory {
            Some(m) if !m.is_empty() => (m.sum_of_means(), (m.len() + 1) as f64),
            _ => (0.0, 1.0),
        };
        Self {
            controls: ctx.controls,
            table,
            w,
            n_controls: ctx.n_controls(),
            n_cells,
            coverage,
            memory_sum,
            memory_terms,
        }
    }

    /// Scores a decision. Deterministic: identical inputs give bit-identical
    /// outputs.
    pub fn evaluate(&self, decision: &JointDecision) -> ObjectiveValues {
        let mut searcher_factors: Vec<&[f64]> = Vec::with_capacity(decision.assignments.len());
        let mut track_sum = 0.0;
        let mut trackers = 0usize;
        for (j, a) in decision.assignments.iter().enumerate() {
            match a.mode {
                Mode::Search => {
                    searcher_factors.push(&self.coverage[j * self.n_controls + a.control_index])
                }
                Mode::Track => {
                    track_sum += self.table.cost(j, a.control_index);
                    trackers += 1;
                }
            }
        }
        let instantaneous = if searcher_factors.is_empty() {
            1.0
        } else {
            let mut total = 0.0;
            for cell in 0..self.n_cells {
                let mut v = 1.0;
                for f in &searcher_factors {
                    v *= f[cell];
                }
                total += v;
            }
            total / self.n_cells as f64
        };
        let search_cost = (instantaneous + self.memory_sum) / self.memory_terms;
        let track_cost = if trackers == 0 { 1.0 } else { track_sum / trackers as f64 };
        let combined = (1.0 - self.w) * search_cost + self.w * track_cost;
        ObjectiveValues { search_cost, track_cost, combined }
    }

    fn positions_of(&self, genes: &[usize]) -> Vec<AgentState> {
        genes
            .iter()
            .enumerate()
            .map(|(j, &g)| self.controls[j][g % self.n_controls].target)
            .collect()
    }
}

/// True iff every pair of post-control agent positions is strictly farther
/// apart than `min_separation`.
pub fn feasible(
    decision: &JointDecision,
    controls: &[Vec<ControlAction>],
    min_separation: f64,
) -> bool {
    pairwise_separated(&decision.positions(controls), min_separation)
}

fn pairwise_separated(positions: &[AgentState], min_separation: f64) -> bool {
    for i in 0..positions.len() {
        for j in (i + 1)..positions.len() {
            if positions[i].distance_to(&positions[j]) <= min_separation {
                return false;
            }
        }
    }
    true
}

/// Result of one GA solve.
#[derive(Clone, Debug)]
pub struct GaOutcome {
    pub decision: JointDecision,
    pub values: ObjectiveValues,
    pub generations: usize,
    /// combined cost of the best feasible individual in the initial
    /// population, when one existed
    pub initial_best: Option<f64>,
}

fn decision_space(n_agents: usize, n_controls: usize) -> u128 {
    let base = 2u128 * n_controls as u128;
    let mut size = 1u128;
    for _ in 0..n_agents {
        size = size.saturating_mul(base);
    }
    size
}

fn validate_context(ctx: &DecisionContext) -> Result<(), ControllerError> {
    if ctx.n_agents() == 0 {
        return Err(ControllerError::InvalidConfig("no agents".into()));
    }
    if ctx.controls.len() != ctx.n_agents() {
        return Err(ControllerError::InvalidConfig("one control set per agent required".into()));
    }
    let u = ctx.n_controls();
    if u == 0 || ctx.controls.iter().any(|c| c.len() != u) {
        return Err(ControllerError::InvalidConfig(
            "control sets must be nonempty and equally sized".into(),
        ));
    }
    Ok(())
}

/// Repairs separation violations by resampling the later-indexed conflicting
/// agent's control among its feasible options, keeping its mode. Returns
/// whether the chromosome ends up feasible.
fn repair(
    genes: &mut [usize],
    controls: &[Vec<ControlAction>],
    n_controls: usize,
    threshold: f64,
    rng: &mut impl Rng,
) -> bool {
    let n = genes.len();
    let pos = |g: usize, j: usize| controls[j][g % n_controls].target;
    for b in 1..n {
        let pb = pos(genes[b], b);
        let conflict = (0..b).any(|a| pos(genes[a], a).distance_to(&pb) <= threshold);
        if !conflict {
            continue;
        }
        let mode_base = (genes[b] / n_controls) * n_controls;
        let options: Vec<usize> = (0..n_controls)
            .filter(|&i| {
                let cand = controls[b][i].target;
                (0..n).filter(|&j| j != b).all(|j| pos(genes[j], j).distance_to(&cand) > threshold)
            })
            .collect();
        if options.is_empty() {
            return false;
        }
        genes[b] = mode_base + options[rng.random_range(0..options.len())];
    }
    let positions: Vec<AgentState> = (0..n).map(|j| pos(genes[j], j)).collect();
    pairwise_separated(&positions, threshold)
}

/// Genetic-algorithm solver: builds the track-cost table once, evolves a
/// population of integer chromosomes under tournament selection, uniform
/// crossover, per-gene mutation and elitism, and returns the best feasible
/// decision ever seen. Terminates at the generation budget or when the best
/// cost stops improving by the function tolerance.
pub fn solve_ga(
    ctx: &DecisionContext,
    cfg: &ControllerConfig,
    rng: &mut impl Rng,
) -> Result<GaOutcome, ControllerError> {
    cfg.validate()?;
    validate_context(ctx)?;
    let n_agents = ctx.n_agents();
    let n_controls = ctx.n_controls();
    let gene_space = 2 * n_controls;
    let threshold = cfg.min_separation - cfg.constraint_tolerance;

    let table = build_track_cost_table(
        ctx.predicted,
        ctx.controls,
        ctx.sensing,
        ctx.noise,
        ctx.clutter,
        ctx.tracker,
    );
    let eval = Evaluator::new(ctx, &table, cfg.w);

    let max_generations = if cfg.max_generations == 0 {
        150 * n_controls * n_agents
    } else {
        cfg.max_generations
    };
    let mutation_rate = cfg.mutation_rate.unwrap_or(1.0 / n_agents as f64);
    let pop_size = cfg.population_size;
    let elites = ((cfg.elite_fraction * pop_size as f64).round() as usize).clamp(1, pop_size);

    let mut population: Vec<Vec<usize>> = Vec::with_capacity(pop_size);
    // warm start: everyone searching in place is feasible whenever the
    // current positions are
    population.push(vec![0usize; n_agents]);
    while population.len() < pop_size {
        let mut genes: Vec<usize> =
            (0..n_agents).map(|_| rng.random_range(0..gene_space)).collect();
        repair(&mut genes, ctx.controls, n_controls, threshold, rng);
        population.push(genes);
    }

    let mut best_genes: Option<Vec<usize>> = None;
    let mut best_values: Option<ObjectiveValues> = None;
    let mut initial_best: Option<f64> = None;
    let mut prev_best = f64::INFINITY;
    let mut stall = 0usize;
    let mut generations = 0usize;

    loop {
        let scored: Vec<(f64, ObjectiveValues, bool)> = population
            .par_iter()
            .map(|genes| {
                let decision = JointDecision::from_genes(genes, n_controls);
                let values = eval.evaluate(&decision);
                let feasible = pairwise_separated(&eval.positions_of(genes), threshold);
                let fitness = values.combined + if feasible { 0.0 } else { 10.0 };
                (fitness, values, feasible)
            })
            .collect();

        for (genes, (_, values, feasible)) in population.iter().zip(&scored) {
            if *feasible
                && best_values.map_or(true, |b: ObjectiveValues| values.combined < b.combined)
            {
                best_genes = Some(genes.clone());
                best_values = Some(*values);
            }
        }
        if generations == 0 {
            initial_best = best_values.map(|v| v.combined);
        }
        generations += 1;

        let current = best_values.map_or(f64::INFINITY, |v| v.combined);
        if generations > 1 {
            if prev_best - current < cfg.function_tolerance {
                stall += 1;
            } else {
                stall = 0;
            }
        }
        prev_best = current;
        if generations >= max_generations || stall >= cfg.stall_generations {
            break;
        }

        // breed the next generation
        let mut order: Vec<usize> = (0..pop_size).collect();
        order.sort_by(|&a, &b| scored[a].0.partial_cmp(&scored[b].0).unwrap());
        let mut next: Vec<Vec<usize>> =
            order.iter().take(elites).map(|&i| population[i].clone()).collect();
        let tournament = |rng: &mut dyn rand::RngCore| {
            let mut best = rng.random_range(0..pop_size);
            for _ in 0..2 {
                let c = rng.random_range(0..pop_size);
                if scored[c].0 < scored[best].0 {
                    best = c;
                }
            }
            best
        };
        while next.len() < pop_size {
            let p1 = tournament(rng);
            let p2 = tournament(rng);
            let mut c1 = population[p1].clone();
            let mut c2 = population[p2].clone();
            if rng.random::<f64>() < cfg.crossover_rate {
                for k in 0..n_agents {
                    if rng.random::<f64>() < 0.5 {
                        std::mem::swap(&mut c1[k], &mut c2[k]);
                    }
                }
            }
            for child in [&mut c1, &mut c2] {
                for g in child.iter_mut() {
                    if rng.random::<f64>() < mutation_rate {
                        *g = rng.random_range(0..gene_space);
                    }
                }
                repair(child, ctx.controls, n_controls, threshold, rng);
            }
            next.push(c1);
            if next.len() < pop_size {
                next.push(c2);
            }
        }
        population = next;
    }

    match (best_genes, best_values) {
        (Some(genes), Some(values)) => {
            let decision = JointDecision::from_genes(&genes, n_controls);
            debug_assert!(feasible(&decision, ctx.controls, threshold));
            Ok(GaOutcome { decision, values, generations, initial_best })
        }
        _ => Err(ControllerError::NoFeasibleDecision { min_separation: cfg.min_separation }),
    }
}

/// Exact oracle: enumerates every decision in lexicographic gene order and
/// returns the feasible minimizer. Ties keep the lexicographically smallest
/// gene vector. Refuses instances beyond one million candidates.
pub fn solve_exhaustive(
    ctx: &DecisionContext,
    cfg: &ControllerConfig,
) -> Result<(JointDecision, ObjectiveValues), ControllerError> {
    cfg.validate()?;
    validate_context(ctx)?;
    let n_agents = ctx.n_agents();
    let n_controls = ctx.n_controls();
    let size = decision_space(n_agents, n_controls);
    if size > EXHAUSTIVE_LIMIT {
        return Err(ControllerError::InstanceTooLarge { size, limit: EXHAUSTIVE_LIMIT });
    }
    let gene_space = 2 * n_controls;
    let threshold = cfg.min_separation - cfg.constraint_tolerance;

    let table = build_track_cost_table(
        ctx.predicted,
        ctx.controls,
        ctx.sensing,
        ctx.noise,
        ctx.clutter,
        ctx.tracker,
    );
    let eval = Evaluator::new(ctx, &table, cfg.w);

    let mut genes = vec![0usize; n_agents];
    let mut best: Option<(Vec<usize>, ObjectiveValues)> = None;
    loop {
        if pairwise_separated(&eval.positions_of(&genes), threshold) {
            let decision = JointDecision::from_genes(&genes, n_controls);
            let values = eval.evaluate(&decision);
            if best.as_ref().map_or(true, |(_, b)| values.combined < b.combined) {
                best = Some((genes.clone(), values));
            }
        }
        // lexicographic increment, last gene fastest
        let mut pos = n_agents;
        loop {
            if pos == 0 {
                break;
            }
            pos -= 1;
            genes[pos] += 1;
            if genes[pos] < gene_space {
                break;
            }
            genes[pos] = 0;
        }
        if genes.iter().all(|&g| g == 0) {
            break;
        }
    }

    best.map(|(genes, values)| (JointDecision::from_genes(&genes, n_controls), values))
        .ok_or(ControllerError::NoFeasibleDecision { min_separation: cfg.min_separation })
}

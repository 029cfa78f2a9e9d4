//! Scenario execution: the per-step decision/filter loop, Monte-Carlo
//! batches, the weight sweep, and the optimizer-versus-oracle harness.

pub mod persist;
pub mod scenario;

pub use scenario::{
    AgentSpawn, ClutterParams, MemoryParams, MotionParams, RandomTargetParams, Scenario,
    TargetPlacement,
};

use crate::controller::{
    solve_exhaustive, solve_ga, ControllerError, DecisionContext, Mode, ObjectiveValues,
};
use crate::metrics::{mc_aggregate, ospa, MetricsError, SeriesStats};
use crate::models::{
    admissible_controls, generate_measurements, AgentState, GroundTruth, ScheduleEntry,
    TargetState,
};
use crate::objectives::{control_actions, search_value_field, ControlAction, SearchGrid, SearchMemory};
use crate::rfs::{self, MultiBernoulli};
use crate::rng::{stream, Stream};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("infeasible scenario: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl RunnerError {
    /// CLI exit code: 2 for configuration problems, 3 for infeasibility.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunnerError::InvalidScenario(_) => 2,
            RunnerError::Controller(ControllerError::InvalidConfig(_)) => 2,
            RunnerError::Controller(ControllerError::InstanceTooLarge { .. }) => 2,
            RunnerError::Infeasible(_) => 3,
            RunnerError::Controller(ControllerError::NoFeasibleDecision { .. }) => 3,
            _ => 1,
        }
    }
}

/// Per-agent slice of a step record.
#[derive(Clone, Debug, Serialize)]
pub struct AgentRecord {
    pub position: AgentState,
    pub mode: Mode,
    pub control_index: usize,
    pub n_hat: usize,
}

/// Everything recorded about one simulated step.
#[derive(Clone, Debug, Serialize)]
pub struct StepRecord {
    pub k: usize,
    pub agents: Vec<AgentRecord>,
    /// summed per-agent cardinality estimates
    pub n_hat_total: usize,
    /// union of the per-agent extracted positions
    pub estimates: Vec<[f64; 2]>,
    pub truth: Vec<[f64; 2]>,
    pub search_cost: f64,
    pub track_cost: f64,
    pub combined: f64,
    pub ospa: f64,
    pub ga_generations: usize,
}

/// Output of a single run.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub records: Vec<StepRecord>,
    /// coverage fields exported at the scenario's requested steps
    pub grids: Vec<(usize, SearchGrid)>,
}

/// Per-timestep aggregates over Monte-Carlo trials.
#[derive(Clone, Debug, Serialize)]
pub struct McOutput {
    pub trials: usize,
    pub search: SeriesStats,
    pub track: SeriesStats,
    pub ospa: SeriesStats,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepEntry {
    pub w: f64,
    pub modes: Vec<Mode>,
    pub values: ObjectiveValues,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepOutput {
    pub entries: Vec<SweepEntry>,
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleCase {
    pub seed: u64,
    pub ga_combined: f64,
    pub exhaustive_combined: f64,
    pub gap: f64,
    pub exact_match: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleReport {
    pub cases: Vec<OracleCase>,
    pub max_gap: f64,
    pub exact_fraction: f64,
}

fn spawn_agents(sc: &Scenario, rng: &mut Stream) -> Result<Vec<AgentState>, RunnerError> {
    let d_min = sc.controller.min_separation;
    match &sc.spawn {
        AgentSpawn::Fixed { .. } => {
            let agents = sc.fixed_agents().expect("fixed spawn");
            for i in 0..agents.len() {
                for j in (i + 1)..agents.len() {
                    let d = agents[i].distance_to(&agents[j]);
                    if d <= d_min {
                        return Err(RunnerError::Infeasible(format!(
                            "initial agents {i} and {j} are {d:.1} m apart; required > {d_min} m"
                        )));
                    }
                }
            }
            Ok(agents)
        }
        AgentSpawn::Uniform { count } => {
            let mut agents: Vec<AgentState> = Vec::with_capacity(*count);
            let mut attempts = 0usize;
            while agents.len() < *count {
                let cand = AgentState::new(
                    rng.random_range(0.0..sc.arena.width),
                    rng.random_range(0.0..sc.arena.height),
                );
                if agents.iter().all(|a| a.distance_to(&cand) > d_min) {
                    agents.push(cand);
                } else {
                    attempts += 1;
                    if attempts > 10_000 {
                        return Err(RunnerError::Infeasible(format!(
                            "cannot place {count} agents more than {d_min} m apart"
                        )));
                    }
                }
            }
            Ok(agents)
        }
        AgentSpawn::CenterRing { count, radius } => {
            let cx = sc.arena.width / 2.0;
            let cy = sc.arena.height / 2.0;
            let agents: Vec<AgentState> = (0..*count)
                .map(|i| {
                    let a = std::f64::consts::TAU * i as f64 / *count as f64;
                    sc.arena.clamp(AgentState::new(cx + radius * a.cos(), cy + radius * a.sin()))
                })
                .collect();
            for i in 0..agents.len() {
                for j in (i + 1)..agents.len() {
                    if agents[i].distance_to(&agents[j]) <= d_min {
                        return Err(RunnerError::Infeasible(format!(
                            "ring radius {radius} m packs {count} agents closer than {d_min} m"
                        )));
                    }
                }
            }
            Ok(agents)
        }
    }
}

fn random_schedule(
    sc: &Scenario,
    agents: &[AgentState],
    rng: &mut Stream,
) -> Vec<ScheduleEntry> {
    let Some(params) = sc.random_targets else { return Vec::new() };
    let death = params.death.unwrap_or(sc.horizon + 1);
    (0..params.count)
        .map(|i| {
            let (px, py) = match params.placement {
                TargetPlacement::Uniform => (
                    rng.random_range(0.0..sc.arena.width),
                    rng.random_range(0.0..sc.arena.height),
                ),
                TargetPlacement::PerAgentInRange => {
                    let anchor = agents[i % agents.len()];
                    let angle = rng.random_range(0.0..std::f64::consts::TAU);
                    let radius = params.in_range_radius * rng.random::<f64>().sqrt();
                    let p = sc.arena.clamp(AgentState::new(
                        anchor.x + radius * angle.cos(),
                        anchor.y + radius * angle.sin(),
                    ));
                    (p.x, p.y)
                }
            };
            let nvx: f64 = StandardNormal.sample(rng);
            let nvy: f64 = StandardNormal.sample(rng);
            let vx = params.velocity_std * nvx;
            let vy = params.velocity_std * nvy;
            ScheduleEntry {
                birth: params.birth,
                death,
                state: TargetState::new(px, vx, py, vy),
                waypoints: Vec::new(),
            }
        })
        .collect()
}

/// Runs one scenario end to end. Deterministic: the whole trajectory is a
/// function of the scenario (including its seed).
pub fn run_scenario(sc: &Scenario) -> Result<RunOutput, RunnerError> {
    sc.validate().map_err(RunnerError::InvalidScenario)?;
    let motion = sc.motion_config();
    let clutter = sc.clutter_config();
    let arena = sc.arena;

    let mut spawn_rng = stream(sc.seed, "spawn");
    let mut agents = spawn_agents(sc, &mut spawn_rng)?;
    let n_agents = agents.len();

    let mut schedule = sc.targets.clone();
    let mut target_rng = stream(sc.seed, "targets");
    schedule.extend(random_schedule(sc, &agents, &mut target_rng));

    let mut world = GroundTruth::new(schedule, sc.stochastic_survival, sc.arena_margin);
    let mut world_rng = stream(sc.seed, "world");
    let mut sensor_rngs: Vec<Stream> =
        (0..n_agents).map(|j| stream(sc.seed, &format!("sensor/{j}"))).collect();
    let mut filter_rngs: Vec<Stream> =
        (0..n_agents).map(|j| stream(sc.seed, &format!("filter/{j}"))).collect();
    let mut ga_rng = stream(sc.seed, "ga");

    world.advance(0, &motion, &arena, &mut world_rng);
    let mut beliefs = vec![MultiBernoulli::empty(); n_agents];
    let mut memory = sc.search_memory.enabled.then(|| SearchMemory::new(sc.search_memory.kappa));

    let mut records = Vec::with_capacity(sc.horizon);
    let mut grids = Vec::new();

    for k in 1..=sc.horizon {
        world.advance(k, &motion, &arena, &mut world_rng);

        let predicted: Vec<MultiBernoulli> = beliefs
            .iter()
            .zip(filter_rngs.iter_mut())
            .map(|(b, rng)| rfs::predict(b, &motion, &sc.birth, &arena, rng))
            .collect();
        let control_sets: Vec<Vec<ControlAction>> = agents
            .iter()
            .map(|s| control_actions(admissible_controls(s, &sc.agent_motion, &arena)))
            .collect();

        let ctx = DecisionContext {
            predicted: &predicted,
            controls: &control_sets,
            sensing: &sc.sensing,
            noise: &sc.measurement_noise,
            clutter: &clutter,
            arena: &arena,
            tracker: &sc.tracker,
            grid_resolution: sc.grid_resolution,
            memory: memory.as_ref(),
        };
        let outcome = solve_ga(&ctx, &sc.controller, &mut ga_rng)?;

        for (j, a) in outcome.decision.assignments.iter().enumerate() {
            agents[j] = control_sets[j][a.control_index].target;
        }

        let truth_states = world.states();
        let mut agent_records = Vec::with_capacity(n_agents);
        let mut n_hat_total = 0usize;
        let mut estimates: Vec<[f64; 2]> = Vec::new();
        for j in 0..n_agents {
            let z = generate_measurements(
                &truth_states,
                &agents[j],
                &sc.sensing,
                &sc.measurement_noise,
                &clutter,
                &mut sensor_rngs[j],
            );
            let post = rfs::update(
                &predicted[j],
                &z,
                &agents[j],
                &sc.sensing,
                &sc.measurement_noise,
                &clutter,
            );
            beliefs[j] = rfs::prune_and_cap(&post, &sc.filter, &mut filter_rngs[j]);
            let (card, states) = rfs::estimate(&beliefs[j]);
            n_hat_total += card.count;
            estimates.extend(states.iter().map(TargetState::position));
            agent_records.push(AgentRecord {
                position: agents[j],
                mode: outcome.decision.assignments[j].mode,
                control_index: outcome.decision.assignments[j].control_index,
                n_hat: card.count,
            });
        }

        let truth = world.positions();
        if n_hat_total > truth.len() {
            log::debug!("k={k}: global estimate {n_hat_total} exceeds true count {}", truth.len());
        }
        let ospa_val = ospa(&truth, &estimates, &sc.ospa);

        let searcher_positions: Vec<AgentState> = outcome
            .decision
            .assignments
            .iter()
            .enumerate()
            .filter(|(_, a)| a.mode == Mode::Search)
            .map(|(j, _)| agents[j])
            .collect();
        if let Some(mem) = memory.as_mut() {
            mem.push(&search_value_field(
                &searcher_positions,
                &sc.sensing,
                &arena,
                sc.grid_resolution,
            ));
        }
        if sc.grid_export.contains(&k) {
            grids.push((
                k,
                search_value_field(&searcher_positions, &sc.sensing, &arena, sc.grid_resolution),
            ));
        }

        records.push(StepRecord {
            k,
            agents: agent_records,
            n_hat_total,
            estimates,
            truth,
            search_cost: outcome.values.search_cost,
            track_cost: outcome.values.track_cost,
            combined: outcome.values.combined,
            ospa: ospa_val,
            ga_generations: outcome.generations,
        });
    }

    Ok(RunOutput { records, grids })
}

/// Runs `trials` independent trials with seeds `seed_base + index` and
/// aggregates the per-timestep cost and OSPA series. Trials execute in
/// parallel; each owns its full random-stream tree.
pub fn run_monte_carlo(
    sc: &Scenario,
    trials: usize,
    seed_base: u64,
) -> Result<McOutput, RunnerError> {
    if trials == 0 {
        return Err(RunnerError::InvalidScenario("trials must be >= 1".into()));
    }
    let outputs: Vec<RunOutput> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut trial = sc.clone();
            trial.seed = seed_base + t as u64;
            run_scenario(&trial)
        })
        .collect::<Result<_, _>>()?;
    let series = |f: fn(&StepRecord) -> f64| -> Vec<Vec<f64>> {
        outputs.iter().map(|o| o.records.iter().map(f).collect()).collect()
    };
    Ok(McOutput {
        trials,
        search: mc_aggregate(&series(|r| r.search_cost))?,
        track: mc_aggregate(&series(|r| r.track_cost))?,
        ospa: mc_aggregate(&series(|r| r.ospa))?,
    })
}

/// Sweeps the objective weight at fixed geometry: the agents stay at their
/// spawn positions while their filters run for the scenario horizon, then
/// one decision is solved per weight on the shared predicted belief. Small
/// instances use the exact solver so the reported modes are free of
/// optimizer noise.
pub fn sweep_w(sc: &Scenario, w_values: &[f64]) -> Result<SweepOutput, RunnerError> {
    sc.validate().map_err(RunnerError::InvalidScenario)?;
    if w_values.iter().any(|w| !(0.0..=1.0).contains(w)) {
        return Err(RunnerError::InvalidScenario("w values must lie in [0,1]".into()));
    }
    let motion = sc.motion_config();
    let clutter = sc.clutter_config();
    let arena = sc.arena;

    let mut spawn_rng = stream(sc.seed, "spawn");
    let agents = spawn_agents(sc, &mut spawn_rng)?;
    let n_agents = agents.len();

    let mut schedule = sc.targets.clone();
    let mut target_rng = stream(sc.seed, "targets");
    schedule.extend(random_schedule(sc, &agents, &mut target_rng));

    let mut world = GroundTruth::new(schedule, sc.stochastic_survival, sc.arena_margin);
    let mut world_rng = stream(sc.seed, "world");
    let mut sensor_rngs: Vec<Stream> =
        (0..n_agents).map(|j| stream(sc.seed, &format!("sensor/{j}"))).collect();
    let mut filter_rngs: Vec<Stream> =
        (0..n_agents).map(|j| stream(sc.seed, &format!("filter/{j}"))).collect();

    world.advance(0, &motion, &arena, &mut world_rng);
    let mut beliefs = vec![MultiBernoulli::empty(); n_agents];
    for k in 1..=sc.horizon {
        world.advance(k, &motion, &arena, &mut world_rng);
        let truth_states = world.states();
        for j in 0..n_agents {
            let pred = rfs::predict(&beliefs[j], &motion, &sc.birth, &arena, &mut filter_rngs[j]);
            let z = generate_measurements(
                &truth_states,
                &agents[j],
                &sc.sensing,
                &sc.measurement_noise,
                &clutter,
                &mut sensor_rngs[j],
            );
            let post =
                rfs::update(&pred, &z, &agents[j], &sc.sensing, &sc.measurement_noise, &clutter);
            beliefs[j] = rfs::prune_and_cap(&post, &sc.filter, &mut filter_rngs[j]);
        }
    }

    // one shared predicted belief for every weight
    let predicted: Vec<MultiBernoulli> = beliefs
        .iter()
        .zip(filter_rngs.iter_mut())
        .map(|(b, rng)| rfs::predict(b, &motion, &sc.birth, &arena, rng))
        .collect();
    let control_sets: Vec<Vec<ControlAction>> = agents
        .iter()
        .map(|s| control_actions(admissible_controls(s, &sc.agent_motion, &arena)))
        .collect();
    let space = (2u128 * control_sets[0].len() as u128).pow(n_agents as u32);

    let mut entries = Vec::with_capacity(w_values.len());
    for (wi, &w) in w_values.iter().enumerate() {
        let ctx = DecisionContext {
            predicted: &predicted,
            controls: &control_sets,
            sensing: &sc.sensing,
            noise: &sc.measurement_noise,
            clutter: &clutter,
            arena: &arena,
            tracker: &sc.tracker,
            grid_resolution: sc.grid_resolution,
            memory: None,
        };
        let mut cfg = sc.controller;
        cfg.w = w;
        let (decision, values) = if space <= 1_000_000 {
            solve_exhaustive(&ctx, &cfg)?
        } else {
            let mut rng = stream(sc.seed, &format!("ga/sweep/{wi}"));
            let out = solve_ga(&ctx, &cfg, &mut rng)?;
            (out.decision, out.values)
        };
        entries.push(SweepEntry {
            w,
            modes: decision.assignments.iter().map(|a| a.mode).collect(),
            values,
        });
    }
    Ok(SweepOutput { entries })
}

fn oracle_instance(
    n_agents: usize,
    seed: u64,
) -> (Vec<AgentState>, Vec<MultiBernoulli>, f64) {
    use crate::rfs::{BernoulliComponent, ParticleDensity};
    let arena = crate::models::Arena::default();
    let mut rng = stream(seed, "oracle/instance");
    let mut agents: Vec<AgentState> = Vec::with_capacity(n_agents);
    while agents.len() < n_agents {
        let cand =
            AgentState::new(rng.random_range(0.0..arena.width), rng.random_range(0.0..arena.height));
        if agents.iter().all(|a| a.distance_to(&cand) > 65.0) {
            agents.push(cand);
        }
    }
    let beliefs = agents
        .iter()
        .map(|a| {
            let n_comp = rng.random_range(0..3usize);
            let components = (0..n_comp)
                .map(|_| {
                    let cx = a.x + rng.random_range(-120.0..120.0);
                    let cy = a.y + rng.random_range(-120.0..120.0);
                    let spread = rng.random_range(1.0..8.0);
                    let existence = rng.random_range(0.3..0.97);
                    let n = 150;
                    let particles = (0..n)
                        .map(|_| {
                            let dx: f64 = StandardNormal.sample(&mut rng);
                            let dy: f64 = StandardNormal.sample(&mut rng);
                            (
                                TargetState::new(cx + spread * dx, 0.0, cy + spread * dy, 0.0),
                                1.0 / n as f64,
                            )
                        })
                        .collect();
                    BernoulliComponent { existence, density: ParticleDensity { particles } }
                })
                .collect();
            MultiBernoulli { components }
        })
        .collect();
    let w = rng.random_range(0.15..0.85);
    (agents, beliefs, w)
}

/// Solves randomized small instances with both the genetic algorithm and the
/// exhaustive oracle and reports the cost gaps and exact-match rate.
pub fn oracle_check(n_agents: usize, seeds: u64, base_seed: u64) -> Result<OracleReport, RunnerError> {
    let arena = crate::models::Arena::default();
    let motion_cfg = crate::models::AgentMotionConfig::default();
    let sensing = crate::models::SensingConfig::default();
    let noise = crate::models::MeasurementNoiseConfig::default();
    let clutter = crate::models::ClutterConfig::new(
        10.0,
        crate::models::ClutterSupport::full_bearing(arena.diagonal()),
    )
    .expect("valid clutter");
    let tracker = crate::objectives::TrackerParams::default();

    let mut cases = Vec::with_capacity(seeds as usize);
    for s in 0..seeds {
        let seed = base_seed + s;
        let (agents, beliefs, w) = oracle_instance(n_agents, seed);
        let control_sets: Vec<Vec<ControlAction>> = agents
            .iter()
            .map(|a| control_actions(admissible_controls(a, &motion_cfg, &arena)))
            .collect();
        let ctx = DecisionContext {
            predicted: &beliefs,
            controls: &control_sets,
            sensing: &sensing,
            noise: &noise,
            clutter: &clutter,
            arena: &arena,
            tracker: &tracker,
            grid_resolution: 10.0,
            memory: None,
        };
        let cfg = crate::controller::ControllerConfig {
            w,
            max_generations: 150,
            stall_generations: 20,
            ..crate::controller::ControllerConfig::default()
        };
        let (xd, xv) = solve_exhaustive(&ctx, &cfg)?;
        let mut ga_rng = stream(seed, "oracle/ga");
        let out = solve_ga(&ctx, &cfg, &mut ga_rng)?;
        let gap = out.values.combined - xv.combined;
        cases.push(OracleCase {
            seed,
            ga_combined: out.values.combined,
            exhaustive_combined: xv.combined,
            gap,
            exact_match: out.decision == xd,
        });
    }
    let max_gap = cases.iter().map(|c| c.gap).fold(0.0, f64::max);
    let exact_fraction =
        cases.iter().filter(|c| c.exact_match).count() as f64 / cases.len().max(1) as f64;
    Ok(OracleReport { cases, max_gap, exact_fraction })
}

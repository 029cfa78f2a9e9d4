//! World models shared by the simulator and the filter: target dynamics,
//! agent kinematics, the distance-dependent sensing model, range-bearing
//! measurement generation with clutter, and the scripted ground truth.

use nalgebra::{Matrix4, Vector4};
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("target and agent are co-located; bearing is undefined")]
    CoLocated,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Wraps an angle into the interval (-pi, pi].
pub fn wrap_angle(angle: f64) -> f64 {
    let mut a = angle.rem_euclid(TAU);
    if a > PI {
        a -= TAU;
    }
    a
}

/// Kinematic state of a single target: planar position and velocity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetState {
    /// x position [m]
    pub px: f64,
    /// x velocity [m/s]
    pub vx: f64,
    /// y position [m]
    pub py: f64,
    /// y velocity [m/s]
    pub vy: f64,
}

impl TargetState {
    pub fn new(px: f64, vx: f64, py: f64, vy: f64) -> Self {
        Self { px, vx, py, vy }
    }

    pub fn position(&self) -> [f64; 2] {
        [self.px, self.py]
    }

    fn to_vector(self) -> Vector4<f64> {
        Vector4::new(self.px, self.vx, self.py, self.vy)
    }

    fn from_vector(v: Vector4<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }
}

/// Planar position of an agent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub x: f64,
    pub y: f64,
}

impl AgentState {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance_to(&self, other: &AgentState) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Distance to a target's position.
    pub fn distance_to_target(&self, target: &TargetState) -> f64 {
        (target.px - self.x).hypot(target.py - self.y)
    }
}

/// A single range-bearing return. Bearing lies in (-pi, pi], range is >= 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    /// bearing from the agent to the source [rad], in (-pi, pi]
    pub bearing: f64,
    /// distance from the agent to the source [m]
    pub range: f64,
}

/// One scan: an unordered, finite collection of measurements. Consumers must
/// not attach meaning to element order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MeasurementSet {
    pub items: Vec<Measurement>,
}

impl MeasurementSet {
    pub fn new(items: Vec<Measurement>) -> Self {
        Self { items }
    }

    pub fn empty() -> Self {
        Self { items: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Measurement> {
        self.items.iter()
    }
}

/// Linear-Gaussian target motion: `x' = F x + v`, `v ~ N(0, Q)`, plus the
/// per-step survival probability used by the filter prediction.
#[derive(Clone, Debug)]
pub struct MotionConfig {
    /// sampling interval T [s]
    pub dt: f64,
    /// 4x4 state transition matrix F
    pub transition: Matrix4<f64>,
    /// 4x4 process noise covariance Q
    pub process_noise: Matrix4<f64>,
    /// per-step survival probability p_S
    pub survival_prob: f64,
    noise_chol: Option<Matrix4<f64>>,
}

impl MotionConfig {
    pub fn new(
        dt: f64,
        transition: Matrix4<f64>,
        process_noise: Matrix4<f64>,
        survival_prob: f64,
    ) -> Result<Self, ModelError> {
        if dt <= 0.0 {
            return Err(ModelError::InvalidConfig("sampling interval must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&survival_prob) {
            return Err(ModelError::InvalidConfig("survival probability must be in [0,1]".into()));
        }
        let sym_err = (process_noise - process_noise.transpose()).abs().max();
        if sym_err > 1e-9 {
            return Err(ModelError::InvalidConfig("process noise must be symmetric".into()));
        }
        let noise_chol = if process_noise.abs().max() == 0.0 {
            None
        } else {
            Some(
                process_noise
                    .cholesky()
                    .ok_or_else(|| {
                        ModelError::InvalidConfig("process noise must be positive semi-definite".into())
                    })?
                    .l(),
            )
        };
        Ok(Self { dt, transition, process_noise, survival_prob, noise_chol })
    }

    /// Nearly-constant-velocity model for state [px, vx, py, vy].
    pub fn nearly_constant_velocity(dt: f64, survival_prob: f64) -> Self {
        let t = dt;
        #[rustfmt::skip]
        let f = Matrix4::new(
            1.0, t,   0.0, 0.0,
            0.0, 1.0, 0.0, 0.0,
            0.0, 0.0, 1.0, t,
            0.0, 0.0, 0.0, 1.0,
        );
        #[rustfmt::skip]
        let q = Matrix4::new(
            t / 3.0, t / 2.0, 0.0,     0.0,
            t / 2.0, t,       0.0,     0.0,
            0.0,     0.0,     t / 3.0, t / 2.0,
            0.0,     0.0,     t / 2.0, t,
        );
        Self::new(dt, f, q, survival_prob).expect("constant velocity model is valid")
    }

    /// Same transition but zero process noise; useful for deterministic checks.
    pub fn noiseless(dt: f64, survival_prob: f64) -> Self {
        let cv = Self::nearly_constant_velocity(dt, survival_prob);
        Self::new(dt, cv.transition, Matrix4::zeros(), survival_prob).expect("valid")
    }
}

/// Distance-dependent detection model: full strength inside the primary
/// radius, then a linear falloff clipped at zero.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensingConfig {
    /// maximum detection probability
    pub pd_max: f64,
    /// falloff slope [1/m]
    pub eta: f64,
    /// primary radius R0 [m]
    pub primary_radius: f64,
}

impl Default for SensingConfig {
    fn default() -> Self {
        Self { pd_max: 0.99, eta: 23e-4, primary_radius: 30.0 }
    }
}

impl SensingConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.pd_max > 0.0 && self.pd_max <= 1.0) {
            return Err(ModelError::InvalidConfig("pd_max must be in (0,1]".into()));
        }
        if self.eta <= 0.0 || self.primary_radius <= 0.0 {
            return Err(ModelError::InvalidConfig("eta and primary_radius must be > 0".into()));
        }
        Ok(())
    }

    /// Detection probability at distance `d` from the agent.
    pub fn pd_at_distance(&self, d: f64) -> f64 {
        if d < self.primary_radius {
            self.pd_max
        } else {
            (self.pd_max - self.eta * (d - self.primary_radius)).max(0.0)
        }
    }
}

/// Probability that the agent at `s` detects a target with state `x`.
pub fn detection_probability(x: &TargetState, s: &AgentState, cfg: &SensingConfig) -> f64 {
    cfg.pd_at_distance(s.distance_to_target(x))
}

/// Range-dependent measurement noise: bearing std grows linearly with range,
/// range std grows with range squared.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasurementNoiseConfig {
    /// bearing std at zero range [rad]
    pub bearing_std_base: f64,
    /// bearing std growth per meter of range [rad/m]
    pub bearing_std_slope: f64,
    /// range std at zero range [m]
    pub range_std_base: f64,
    /// range std growth per squared meter of range [1/m]
    pub range_std_quad: f64,
}

impl Default for MeasurementNoiseConfig {
    fn default() -> Self {
        Self {
            bearing_std_base: 2.0 * PI / 180.0,
            bearing_std_slope: 1e-5,
            range_std_base: 1.0,
            range_std_quad: 5e-5,
        }
    }
}

impl MeasurementNoiseConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.bearing_std_base <= 0.0
            || self.bearing_std_slope <= 0.0
            || self.range_std_base <= 0.0
            || self.range_std_quad <= 0.0
        {
            return Err(ModelError::InvalidConfig("noise parameters must be > 0".into()));
        }
        Ok(())
    }

    pub fn bearing_std(&self, range: f64) -> f64 {
        self.bearing_std_base + self.bearing_std_slope * range
    }

    pub fn range_std(&self, range: f64) -> f64 {
        self.range_std_base + self.range_std_quad * range * range
    }
}

/// Support of the clutter distribution in measurement space.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ClutterSupport {
    pub bearing_min: f64,
    pub bearing_max: f64,
    pub range_min: f64,
    pub range_max: f64,
}

impl ClutterSupport {
    /// Bearing over (-pi, pi], range over [0, max_range].
    pub fn full_bearing(max_range: f64) -> Self {
        Self { bearing_min: -PI, bearing_max: PI, range_min: 0.0, range_max: max_range }
    }

    pub fn area(&self) -> f64 {
        (self.bearing_max - self.bearing_min) * (self.range_max - self.range_min)
    }
}

/// Poisson false-alarm model, uniform over `support`.
#[derive(Clone, Copy, Debug)]
pub struct ClutterConfig {
    /// expected number of clutter returns per scan
    pub rate: f64,
    pub support: ClutterSupport,
}

impl ClutterConfig {
    pub fn new(rate: f64, support: ClutterSupport) -> Result<Self, ModelError> {
        if rate < 0.0 {
            return Err(ModelError::InvalidConfig("clutter rate must be >= 0".into()));
        }
        if support.area() <= 0.0 {
            return Err(ModelError::InvalidConfig("clutter support must have positive area".into()));
        }
        Ok(Self { rate, support })
    }

    /// Uniform spatial density of a single clutter return.
    pub fn density(&self) -> f64 {
        1.0 / self.support.area()
    }

    /// Clutter intensity: rate times the uniform density. Constant over the
    /// support; applied to every measurement for continuity.
    pub fn intensity(&self) -> f64 {
        self.rate * self.density()
    }
}

/// Radial control lattice parameters.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentMotionConfig {
    /// radial step size [m]
    pub radial_step: f64,
    /// number of rings
    pub n_radial: usize,
    /// number of distinct headings per ring
    pub n_angular: usize,
}

impl Default for AgentMotionConfig {
    fn default() -> Self {
        Self { radial_step: 5.0, n_radial: 2, n_angular: 8 }
    }
}

impl AgentMotionConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.n_angular < 1 {
            return Err(ModelError::InvalidConfig("n_angular must be >= 1".into()));
        }
        if self.radial_step <= 0.0 && self.n_radial > 0 {
            return Err(ModelError::InvalidConfig("radial_step must be > 0".into()));
        }
        Ok(())
    }

    /// Number of admissible controls, including the stay action.
    pub fn control_count(&self) -> usize {
        self.n_radial * self.n_angular + 1
    }
}

/// Rectangular surveillance area `[0, width] x [0, height]`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Arena {
    pub width: f64,
    pub height: f64,
}

impl Default for Arena {
    fn default() -> Self {
        Self { width: 500.0, height: 500.0 }
    }
}

impl Arena {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.width <= 0.0 || self.height <= 0.0 {
            return Err(ModelError::InvalidConfig("arena dimensions must be > 0".into()));
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn diagonal(&self) -> f64 {
        self.width.hypot(self.height)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        (0.0..=self.width).contains(&x) && (0.0..=self.height).contains(&y)
    }

    pub fn clamp(&self, s: AgentState) -> AgentState {
        AgentState::new(s.x.clamp(0.0, self.width), s.y.clamp(0.0, self.height))
    }
}

fn standard_normal(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Advances a target state one step: `F x` plus a zero-mean Gaussian draw
/// with covariance Q.
pub fn step_target(x: &TargetState, cfg: &MotionConfig, rng: &mut impl Rng) -> TargetState {
    let mut v = cfg.transition * x.to_vector();
    if let Some(chol) = &cfg.noise_chol {
        let n = Vector4::from_fn(|_, _| standard_normal(rng));
        v += chol * n;
    }
    TargetState::from_vector(v)
}

/// Noise-free projection of a target state into measurement space for an
/// agent at `s`. Co-located inputs map to bearing 0, range 0.
pub fn ideal_measurement(x: &TargetState, s: &AgentState) -> Measurement {
    let dx = x.px - s.x;
    let dy = x.py - s.y;
    Measurement { bearing: wrap_angle(dy.atan2(dx)), range: dx.hypot(dy) }
}

/// Draws a noisy range-bearing measurement of `x` from an agent at `s`.
pub fn measure(
    x: &TargetState,
    s: &AgentState,
    noise: &MeasurementNoiseConfig,
    rng: &mut impl Rng,
) -> Result<Measurement, ModelError> {
    let ideal = ideal_measurement(x, s);
    if ideal.range == 0.0 {
        return Err(ModelError::CoLocated);
    }
    let bearing = wrap_angle(
        ideal.bearing + noise.bearing_std(ideal.range) * standard_normal(rng),
    );
    let range = (ideal.range + noise.range_std(ideal.range) * standard_normal(rng)).max(0.0);
    Ok(Measurement { bearing, range })
}

/// Log of the bivariate Gaussian measurement density of `z` about the
/// noise-free projection of `x`, with range-dependent diagonal covariance.
/// The bearing residual is wrapped into (-pi, pi].
pub fn measurement_loglikelihood(
    z: &Measurement,
    x: &TargetState,
    s: &AgentState,
    noise: &MeasurementNoiseConfig,
) -> f64 {
    let ideal = ideal_measurement(x, s);
    let sb = noise.bearing_std(ideal.range);
    let sr = noise.range_std(ideal.range);
    let db = wrap_angle(z.bearing - ideal.bearing);
    let dr = z.range - ideal.range;
    -(TAU * sb * sr).ln() - 0.5 * ((db / sb).powi(2) + (dr / sr).powi(2))
}

/// One scan from the agent at `s`: each target is detected independently with
/// its detection probability and contributes one noisy measurement; Poisson
/// clutter drawn uniformly over the support is appended.
pub fn generate_measurements(
    targets: &[TargetState],
    s: &AgentState,
    sensing: &SensingConfig,
    noise: &MeasurementNoiseConfig,
    clutter: &ClutterConfig,
    rng: &mut impl Rng,
) -> MeasurementSet {
    let mut items = Vec::new();
    for x in targets {
        let pd = detection_probability(x, s, sensing);
        if rng.random::<f64>() < pd {
            if let Ok(z) = measure(x, s, noise, rng) {
                items.push(z);
            }
        }
    }
    if clutter.rate > 0.0 {
        let n = Poisson::new(clutter.rate).expect("positive rate").sample(rng) as usize;
        let sup = clutter.support;
        for _ in 0..n {
            items.push(Measurement {
                bearing: rng.random_range(sup.bearing_min..sup.bearing_max),
                range: rng.random_range(sup.range_min..sup.range_max),
            });
        }
    }
    MeasurementSet::new(items)
}

/// Admissible next positions for an agent at `s`: the stay action followed by
/// the radial lattice, ring by ring, headings in ascending order. Points
/// falling outside the arena are clamped to the boundary, so the list length
/// is always `n_radial * n_angular + 1`.
pub fn admissible_controls(
    s: &AgentState,
    cfg: &AgentMotionConfig,
    arena: &Arena,
) -> Vec<AgentState> {
    let mut out = Vec::with_capacity(cfg.control_count());
    out.push(arena.clamp(*s));
    let dtheta = TAU / cfg.n_angular as f64;
    for ring in 1..=cfg.n_radial {
        let radius = ring as f64 * cfg.radial_step;
        for step in 0..cfg.n_angular {
            let angle = step as f64 * dtheta;
            let p = AgentState::new(s.x + radius * angle.cos(), s.y + radius * angle.sin());
            out.push(arena.clamp(p));
        }
    }
    out
}

/// Scripted timeline of one target: present for steps `birth <= k < death`.
/// When `waypoints` is non-empty the target follows the piecewise-linear
/// path through them instead of the stochastic motion model.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub birth: usize,
    pub death: usize,
    pub state: TargetState,
    #[serde(default)]
    pub waypoints: Vec<Waypoint>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Waypoint {
    pub k: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Debug)]
struct LiveTarget {
    entry: usize,
    state: TargetState,
}

/// Ground-truth world state: live targets driven by a birth/death schedule.
/// Targets die at their scripted death step, when they fail the optional
/// survival draw, or when they leave the arena by more than `margin`.
#[derive(Clone, Debug)]
pub struct GroundTruth {
    schedule: Vec<ScheduleEntry>,
    live: Vec<LiveTarget>,
    pub stochastic_survival: bool,
    pub margin: f64,
}

impl GroundTruth {
    pub fn new(schedule: Vec<ScheduleEntry>, stochastic_survival: bool, margin: f64) -> Self {
        Self { schedule, live: Vec::new(), stochastic_survival, margin }
    }

    pub fn states(&self) -> Vec<TargetState> {
        self.live.iter().map(|t| t.state).collect()
    }

    pub fn positions(&self) -> Vec<[f64; 2]> {
        self.live.iter().map(|t| t.state.position()).collect()
    }

    pub fn len(&self) -> usize {
        self.live.len()
    }

    pub fn is_empty(&self) -> bool {
        self.live.is_empty()
    }

    /// Advances the world to step `k`: removes scheduled deaths and survival
    /// failures, steps survivors, kills targets outside the arena margin and
    /// adds the births scheduled for `k` at their scripted state.
    pub fn advance(
        &mut self,
        k: usize,
        motion: &MotionConfig,
        arena: &Arena,
        rng: &mut impl Rng,
    ) {
        self.live.retain(|t| k < self.schedule[t.entry].death);
        if self.stochastic_survival {
            let ps = motion.survival_prob;
            // retain draws in list order, keeping the stream deterministic
            self.live.retain(|_| rng.random::<f64>() < ps);
        }
        for t in self.live.iter_mut() {
            let entry = &self.schedule[t.entry];
            t.state = if entry.waypoints.is_empty() {
                step_target(&t.state, motion, rng)
            } else {
                waypoint_state(&entry.waypoints, k)
            };
        }
        let m = self.margin;
        self.live.retain(|t| {
            t.state.px >= -m
                && t.state.px <= arena.width + m
                && t.state.py >= -m
                && t.state.py <= arena.height + m
        });
        for (i, entry) in self.schedule.iter().enumerate() {
            if entry.birth == k && entry.birth < entry.death {
                self.live.push(LiveTarget { entry: i, state: entry.state });
            }
        }
    }
}

fn waypoint_state(waypoints: &[Waypoint], k: usize) -> TargetState {
    let first = waypoints[0];
    if k <= first.k || waypoints.len() == 1 {
        return TargetState::new(first.x, 0.0, first.y, 0.0);
    }
    for pair in waypoints.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if k <= b.k {
            let span = (b.k - a.k) as f64;
            let frac = (k - a.k) as f64 / span;
            let vx = (b.x - a.x) / span;
            let vy = (b.y - a.y) / span;
            return TargetState::new(a.x + (b.x - a.x) * frac, vx, a.y + (b.y - a.y) * frac, vy);
        }
    }
    let last = waypoints[waypoints.len() - 1];
    TargetState::new(last.x, 0.0, last.y, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn table_noise() -> MeasurementNoiseConfig {
        MeasurementNoiseConfig::default()
    }

    #[test]
    fn step_target_zero_state_zero_noise_is_fixed_point() {
        let cfg = MotionConfig::noiseless(1.0, 0.99);
        let mut rng = stream(1, "t");
        let x = step_target(&TargetState::new(0.0, 0.0, 0.0, 0.0), &cfg, &mut rng);
        assert_eq!(x, TargetState::new(0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn step_target_noiseless_matches_transition() {
        let cfg = MotionConfig::noiseless(1.0, 0.99);
        let mut rng = stream(1, "t");
        let x = step_target(&TargetState::new(10.0, 1.0, 20.0, -2.0), &cfg, &mut rng);
        assert_relative_eq!(x.px, 11.0);
        assert_relative_eq!(x.vx, 1.0);
        assert_relative_eq!(x.py, 18.0);
        assert_relative_eq!(x.vy, -2.0);
    }

    #[test]
    fn step_target_noise_moments() {
        let cfg = MotionConfig::nearly_constant_velocity(1.0, 0.99);
        let mut rng = stream(7, "moments");
        let x0 = TargetState::new(10.0, 1.0, 20.0, -2.0);
        let n = 10_000;
        let mut sum = [0.0f64; 4];
        for _ in 0..n {
            let x = step_target(&x0, &cfg, &mut rng);
            sum[0] += x.px;
            sum[1] += x.vx;
            sum[2] += x.py;
            sum[3] += x.vy;
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        let expected = [11.0, 1.0, 18.0, -2.0];
        // sample mean within 3 sigma / sqrt(n) of the true mean
        let stds = [(1.0f64 / 3.0).sqrt(), 1.0, (1.0f64 / 3.0).sqrt(), 1.0];
        for i in 0..4 {
            assert!(
                (mean[i] - expected[i]).abs() < 3.0 * stds[i] / (n as f64).sqrt(),
                "component {i}: mean {} vs expected {}",
                mean[i],
                expected[i]
            );
        }
    }

    #[test]
    fn detection_probability_table_values() {
        let cfg = SensingConfig::default();
        let s = AgentState::new(0.0, 0.0);
        let at = |d: f64| detection_probability(&TargetState::new(d, 0.0, 0.0, 0.0), &s, &cfg);
        assert_relative_eq!(at(10.0), 0.99);
        assert_relative_eq!(at(30.0), 0.99); // boundary: d = R0 gives pd_max - 0
        assert_eq!(at(460.44), 0.0); // past the zero crossing R0 + pd_max/eta
        assert_eq!(at(1000.0), 0.0);
    }

    #[test]
    fn detection_probability_continuous_at_primary_radius() {
        let cfg = SensingConfig::default();
        let just_out = cfg.pd_at_distance(cfg.primary_radius + 1e-9);
        assert!((just_out - cfg.pd_max).abs() < 1e-10);
    }

    proptest! {
        #[test]
        fn detection_probability_monotone(d1 in 0.0..800.0f64, d2 in 0.0..800.0f64) {
            let cfg = SensingConfig::default();
            let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            prop_assert!(cfg.pd_at_distance(lo) >= cfg.pd_at_distance(hi));
            prop_assert!((0.0..=1.0).contains(&cfg.pd_at_distance(d1)));
        }
    }

    #[test]
    fn measure_noise_free_axes() {
        let mut noise = table_noise();
        // shrink the noise to effectively zero to expose the projection
        noise.bearing_std_base = 1e-300;
        noise.bearing_std_slope = 1e-300;
        noise.range_std_base = 1e-300;
        noise.range_std_quad = 1e-300;
        let s = AgentState::new(0.0, 0.0);
        let mut rng = stream(3, "m");
        let z = measure(&TargetState::new(100.0, 0.0, 0.0, 0.0), &s, &noise, &mut rng).unwrap();
        assert_relative_eq!(z.bearing, 0.0, epsilon = 1e-9);
        assert_relative_eq!(z.range, 100.0, epsilon = 1e-9);
        let z = measure(&TargetState::new(0.0, 0.0, 100.0, 0.0), &s, &noise, &mut rng).unwrap();
        assert_relative_eq!(z.bearing, PI / 2.0, epsilon = 1e-9);
        assert_relative_eq!(z.range, 100.0, epsilon = 1e-9);
    }

    #[test]
    fn measure_co_located_errors() {
        let s = AgentState::new(5.0, 5.0);
        let mut rng = stream(3, "m");
        let r = measure(&TargetState::new(5.0, 0.0, 5.0, 0.0), &s, &table_noise(), &mut rng);
        assert!(matches!(r, Err(ModelError::CoLocated)));
    }

    #[test]
    fn noise_stds_at_100m_match_model() {
        let noise = table_noise();
        assert_relative_eq!(noise.bearing_std(100.0), 2.0 * PI / 180.0 + 1e-3, epsilon = 1e-12);
        assert_relative_eq!(noise.range_std(100.0), 1.5, epsilon = 1e-12);
    }

    #[test]
    fn loglikelihood_peak_value() {
        let noise = table_noise();
        let s = AgentState::new(0.0, 0.0);
        let x = TargetState::new(100.0, 0.0, 50.0, 0.0);
        let z = ideal_measurement(&x, &s);
        let d = z.range;
        let expected = (1.0 / (TAU * noise.bearing_std(d) * noise.range_std(d))).ln();
        assert_relative_eq!(measurement_loglikelihood(&z, &x, &s, &noise), expected, epsilon = 1e-12);
    }

    #[test]
    fn loglikelihood_bearing_wrap_invariance() {
        let noise = table_noise();
        let s = AgentState::new(0.0, 0.0);
        let x = TargetState::new(100.0, 0.0, 50.0, 0.0);
        let base = ideal_measurement(&x, &s);
        let z0 = Measurement { bearing: base.bearing + 0.01, range: base.range + 1.0 };
        let z1 = Measurement { bearing: wrap_angle(z0.bearing + TAU), range: z0.range };
        assert_relative_eq!(
            measurement_loglikelihood(&z0, &x, &s, &noise),
            measurement_loglikelihood(&z1, &x, &s, &noise),
            epsilon = 1e-12
        );
    }

    #[test]
    fn loglikelihood_locally_integrates_to_one() {
        let noise = table_noise();
        let s = AgentState::new(0.0, 0.0);
        let x = TargetState::new(80.0, 0.0, 60.0, 0.0);
        let ideal = ideal_measurement(&x, &s);
        let sb = noise.bearing_std(ideal.range);
        let sr = noise.range_std(ideal.range);
        let nb = 400;
        let nr = 400;
        let db = 12.0 * sb / nb as f64;
        let dr = 12.0 * sr / nr as f64;
        let mut total = 0.0;
        for i in 0..nb {
            let b = ideal.bearing - 6.0 * sb + (i as f64 + 0.5) * db;
            for j in 0..nr {
                let r = ideal.range - 6.0 * sr + (j as f64 + 0.5) * dr;
                let z = Measurement { bearing: b, range: r };
                total += measurement_loglikelihood(&z, &x, &s, &noise).exp() * db * dr;
            }
        }
        assert!((total - 1.0).abs() < 0.01, "integral = {total}");
    }

    #[test]
    fn generate_measurements_empty_when_no_targets_no_clutter() {
        let clutter =
            ClutterConfig::new(0.0, ClutterSupport::full_bearing(700.0)).unwrap();
        let mut rng = stream(5, "g");
        let z = generate_measurements(
            &[],
            &AgentState::new(0.0, 0.0),
            &SensingConfig::default(),
            &table_noise(),
            &clutter,
            &mut rng,
        );
        assert!(z.is_empty());
    }

    #[test]
    fn generate_measurements_detection_frequency() {
        let clutter = ClutterConfig::new(0.0, ClutterSupport::full_bearing(700.0)).unwrap();
        let sensing = SensingConfig::default();
        let noise = table_noise();
        let s = AgentState::new(0.0, 0.0);
        let targets = [TargetState::new(10.0, 0.0, 0.0, 0.0)];
        let mut rng = stream(5, "freq");
        let trials = 10_000;
        let mut hits = 0usize;
        for _ in 0..trials {
            hits += generate_measurements(&targets, &s, &sensing, &noise, &clutter, &mut rng).len();
        }
        let freq = hits as f64 / trials as f64;
        assert!((freq - 0.99).abs() < 0.01, "freq = {freq}");
    }

    #[test]
    fn generate_measurements_clutter_mean() {
        let clutter = ClutterConfig::new(10.0, ClutterSupport::full_bearing(700.0)).unwrap();
        let mut rng = stream(5, "clutter");
        let trials = 10_000;
        let mut count = 0usize;
        for _ in 0..trials {
            count += generate_measurements(
                &[],
                &AgentState::new(0.0, 0.0),
                &SensingConfig::default(),
                &table_noise(),
                &clutter,
                &mut rng,
            )
            .len();
        }
        let mean = count as f64 / trials as f64;
        assert!((mean - 10.0).abs() < 0.3, "mean = {mean}");
    }

    #[test]
    fn generate_measurements_certain_detection_inside_primary_radius() {
        let clutter = ClutterConfig::new(0.0, ClutterSupport::full_bearing(700.0)).unwrap();
        let sensing = SensingConfig { pd_max: 1.0, ..SensingConfig::default() };
        let targets = [
            TargetState::new(10.0, 0.0, 5.0, 0.0),
            TargetState::new(-8.0, 0.0, 12.0, 0.0),
        ];
        let mut rng = stream(9, "sure");
        for _ in 0..100 {
            let z = generate_measurements(
                &targets,
                &AgentState::new(0.0, 0.0),
                &sensing,
                &table_noise(),
                &clutter,
                &mut rng,
            );
            assert_eq!(z.len(), targets.len());
        }
    }

    #[test]
    fn admissible_controls_interior_count_and_order() {
        let cfg = AgentMotionConfig::default();
        let arena = Arena::default();
        let s = AgentState::new(250.0, 250.0);
        let controls = admissible_controls(&s, &cfg, &arena);
        assert_eq!(controls.len(), 17);
        assert_eq!(controls[0], s);
        // all points distinct for an interior agent
        for i in 0..controls.len() {
            for j in (i + 1)..controls.len() {
                assert!(controls[i].distance_to(&controls[j]) > 1e-9);
            }
        }
        // first ring entry lies radial_step east of the agent
        assert_relative_eq!(controls[1].x, 255.0, epsilon = 1e-9);
        assert_relative_eq!(controls[1].y, 250.0, epsilon = 1e-9);
        // second ring starts at index 1 + n_angular
        assert_relative_eq!(controls[9].x, 260.0, epsilon = 1e-9);
    }

    #[test]
    fn admissible_controls_no_rings() {
        let cfg = AgentMotionConfig { n_radial: 0, ..AgentMotionConfig::default() };
        let s = AgentState::new(10.0, 10.0);
        let controls = admissible_controls(&s, &cfg, &Arena::default());
        assert_eq!(controls.len(), 1);
        assert_eq!(controls[0], s);
    }

    #[test]
    fn admissible_controls_clamped_at_corner() {
        let cfg = AgentMotionConfig::default();
        let arena = Arena::default();
        let controls = admissible_controls(&AgentState::new(0.0, 0.0), &cfg, &arena);
        assert_eq!(controls.len(), 17);
        for c in &controls {
            assert!(arena.contains(c.x, c.y), "control {c:?} outside arena");
        }
    }

    proptest! {
        #[test]
        fn admissible_controls_contain_self_and_stay_inside(
            x in 0.0..500.0f64, y in 0.0..500.0f64
        ) {
            let cfg = AgentMotionConfig::default();
            let arena = Arena::default();
            let s = AgentState::new(x, y);
            let controls = admissible_controls(&s, &cfg, &arena);
            prop_assert_eq!(controls.len(), cfg.control_count());
            prop_assert_eq!(controls[0], s);
            for c in &controls {
                prop_assert!(arena.contains(c.x, c.y));
            }
        }
    }

    #[test]
    fn ground_truth_scripted_birth_timing() {
        let schedule = vec![ScheduleEntry {
            birth: 27,
            death: 86,
            state: TargetState::new(35.0, 7.5, 31.0, 5.0),
            waypoints: Vec::new(),
        }];
        let motion = MotionConfig::noiseless(1.0, 0.99);
        let arena = Arena::default();
        let mut world = GroundTruth::new(schedule, false, 50.0);
        let mut rng = stream(11, "world");
        for k in 0..=26 {
            world.advance(k, &motion, &arena, &mut rng);
            assert!(world.is_empty(), "target present too early at k={k}");
        }
        world.advance(27, &motion, &arena, &mut rng);
        assert_eq!(world.len(), 1);
        assert_eq!(world.states()[0], TargetState::new(35.0, 7.5, 31.0, 5.0));
        for k in 28..86 {
            world.advance(k, &motion, &arena, &mut rng);
            assert_eq!(world.len(), 1);
        }
        world.advance(86, &motion, &arena, &mut rng);
        assert!(world.is_empty(), "target must be gone at its death step");
    }

    #[test]
    fn ground_truth_empty_schedule_stays_empty() {
        let motion = MotionConfig::nearly_constant_velocity(1.0, 0.99);
        let arena = Arena::default();
        let mut world = GroundTruth::new(Vec::new(), true, 50.0);
        let mut rng = stream(11, "world");
        for k in 0..100 {
            world.advance(k, &motion, &arena, &mut rng);
            assert!(world.is_empty());
        }
    }

    #[test]
    fn ground_truth_waypoints_interpolate() {
        let schedule = vec![ScheduleEntry {
            birth: 0,
            death: 100,
            state: TargetState::new(0.0, 0.0, 0.0, 0.0),
            waypoints: vec![
                Waypoint { k: 0, x: 0.0, y: 0.0 },
                Waypoint { k: 10, x: 100.0, y: 50.0 },
            ],
        }];
        let motion = MotionConfig::noiseless(1.0, 1.0);
        let arena = Arena::default();
        let mut world = GroundTruth::new(schedule, false, 50.0);
        let mut rng = stream(13, "wp");
        for k in 0..=5 {
            world.advance(k, &motion, &arena, &mut rng);
        }
        let s = world.states()[0];
        assert_relative_eq!(s.px, 50.0, epsilon = 1e-9);
        assert_relative_eq!(s.py, 25.0, epsilon = 1e-9);
        assert_relative_eq!(s.vx, 10.0, epsilon = 1e-9);
    }

    #[test]
    fn wrap_angle_interval() {
        assert_relative_eq!(wrap_angle(PI), PI);
        assert_relative_eq!(wrap_angle(-PI), PI);
        assert_relative_eq!(wrap_angle(3.0 * PI), PI);
        assert_relative_eq!(wrap_angle(0.1 + TAU), 0.1, epsilon = 1e-12);
        assert!(wrap_angle(1e6) <= PI && wrap_angle(1e6) > -PI);
    }
}

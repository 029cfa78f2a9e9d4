//! Sequential-Monte-Carlo multi-Bernoulli filter: each hypothesized target is
//! a Bernoulli component carrying an existence probability and a weighted
//! particle cloud. Prediction propagates survivors and injects birth
//! components; the update splits the belief into legacy components (missed
//! detection hypotheses) and one joint component per received measurement.

use crate::models::{
    step_target, AgentState, Arena, ClutterConfig, MeasurementNoiseConfig, MeasurementSet,
    MotionConfig, SensingConfig, TargetState,
};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

const EXISTENCE_EPS: f64 = 1e-12;

fn clamp_existence(r: f64) -> f64 {
    debug_assert!(r > -1e-9 && r < 1.0 + 1e-9, "existence probability drifted to {r}");
    r.clamp(0.0, 1.0)
}

/// Weighted particle approximation of a single-target spatial density.
/// Weights are kept normalized to 1.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleDensity {
    pub particles: Vec<(TargetState, f64)>,
}

impl ParticleDensity {
    pub fn new(particles: Vec<(TargetState, f64)>) -> Self {
        assert!(!particles.is_empty(), "particle density needs at least one particle");
        let mut d = Self { particles };
        d.normalize();
        d
    }

    pub fn uniform(states: Vec<TargetState>) -> Self {
        let w = 1.0 / states.len() as f64;
        Self { particles: states.into_iter().map(|s| (s, w)).collect() }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Renormalizes weights to sum to one. Returns false when the total mass
    /// is not positive, in which case weights are reset to uniform.
    pub fn normalize(&mut self) -> bool {
        let total: f64 = self.particles.iter().map(|(_, w)| w).sum();
        if total > 0.0 && total.is_finite() {
            for (_, w) in self.particles.iter_mut() {
                *w /= total;
            }
            true
        } else {
            let w = 1.0 / self.particles.len() as f64;
            for (_, pw) in self.particles.iter_mut() {
                *pw = w;
            }
            false
        }
    }

    /// Effective sample size of the (normalized) weights.
    pub fn ess(&self) -> f64 {
        let ssq: f64 = self.particles.iter().map(|(_, w)| w * w).sum();
        if ssq > 0.0 {
            1.0 / ssq
        } else {
            0.0
        }
    }

    /// Particle-weighted expectation of `f`.
    pub fn expectation(&self, mut f: impl FnMut(&TargetState) -> f64) -> f64 {
        self.particles.iter().map(|(x, w)| w * f(x)).sum()
    }

    /// Weighted mean of the particle cloud.
    pub fn weighted_mean(&self) -> TargetState {
        let mut m = [0.0f64; 4];
        for (x, w) in &self.particles {
            m[0] += w * x.px;
            m[1] += w * x.vx;
            m[2] += w * x.py;
            m[3] += w * x.vy;
        }
        TargetState::new(m[0], m[1], m[2], m[3])
    }

    /// Systematic resampling down (or up) to `n` equally weighted particles.
    pub fn resample_systematic(&self, n: usize, rng: &mut impl Rng) -> ParticleDensity {
        let offset: f64 = rng.random::<f64>() / n as f64;
        let mut out = Vec::with_capacity(n);
        let mut cum = 0.0;
        let mut idx = 0usize;
        let last = self.particles.len() - 1;
        for j in 0..n {
            let u = offset + j as f64 / n as f64;
            while idx < last && cum + self.particles[idx].1 < u {
                cum += self.particles[idx].1;
                idx += 1;
            }
            out.push((self.particles[idx].0, 1.0 / n as f64));
        }
        ParticleDensity { particles: out }
    }
}

/// One hypothesized target: existence probability plus spatial density.
#[derive(Clone, Debug, PartialEq)]
pub struct BernoulliComponent {
    pub existence: f64,
    pub density: ParticleDensity,
}

/// The filter belief: a union of independent Bernoulli components.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MultiBernoulli {
    pub components: Vec<BernoulliComponent>,
}

impl MultiBernoulli {
    pub fn empty() -> Self {
        Self { components: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Sum of existence probabilities, the unrounded expected target count.
    pub fn expected_count(&self) -> f64 {
        self.components.iter().map(|c| c.existence).sum()
    }

    /// (sum of r, cardinality variance, normalized variance). The normalized
    /// variance is defined as 1 for an empty belief.
    pub fn cardinality_moments(&self) -> (f64, f64, f64) {
        let sum_r = self.expected_count();
        let sigma: f64 = self.components.iter().map(|c| c.existence * (1.0 - c.existence)).sum();
        let tilde = if self.components.is_empty() {
            1.0
        } else {
            4.0 * sigma / self.components.len() as f64
        };
        (sum_r, sigma, tilde)
    }

    /// Human-readable snapshot for debugging and golden tests. One line per
    /// component: `index existence particle_count mean_px mean_vx mean_py
    /// mean_vy ess`, all floats with six decimals.
    pub fn snapshot(&self) -> String {
        let mut out = format!("components: {}\n", self.components.len());
        for (i, c) in self.components.iter().enumerate() {
            let m = c.density.weighted_mean();
            let _ = writeln!(
                out,
                "{} {:.6} {} {:.6} {:.6} {:.6} {:.6} {:.6}",
                i,
                c.existence,
                c.density.len(),
                m.px,
                m.vx,
                m.py,
                m.vy,
                c.density.ess()
            );
        }
        out
    }
}

/// Birth process parameters: per prediction step, `components_per_step`
/// fresh components with existence `existence`, positions uniform over the
/// arena and Gaussian velocities.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BirthConfig {
    pub components_per_step: usize,
    pub existence: f64,
    pub particles: usize,
    pub velocity_std: f64,
}

impl Default for BirthConfig {
    fn default() -> Self {
        Self { components_per_step: 1, existence: 0.03, particles: 1000, velocity_std: 3.0 }
    }
}

/// Cardinality summary of a belief.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CardinalityEstimate {
    /// rounded expected target count
    pub count: usize,
    /// variance of the count estimate
    pub variance: f64,
    /// variance normalized to [0,1]; 1 for an empty belief
    pub normalized_variance: f64,
}

/// Component management parameters.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    /// components with existence below this are dropped
    pub prune_threshold: f64,
    /// hard cap on the number of components, keeping the highest existence
    pub max_components: usize,
    /// resample when ESS falls below this fraction of the particle count
    pub resample_threshold: f64,
    /// particle budget per component after resampling
    pub particles_per_component: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            prune_threshold: 1e-3,
            max_components: 100,
            resample_threshold: 0.5,
            particles_per_component: 500,
        }
    }
}

fn birth_component(birth: &BirthConfig, arena: &Arena, rng: &mut impl Rng) -> BernoulliComponent {
    let w = 1.0 / birth.particles as f64;
    let particles = (0..birth.particles)
        .map(|_| {
            let px = rng.random_range(0.0..arena.width);
            let py = rng.random_range(0.0..arena.height);
            let nvx: f64 = StandardNormal.sample(rng);
            let nvy: f64 = StandardNormal.sample(rng);
            let vx = birth.velocity_std * nvx;
            let vy = birth.velocity_std * nvy;
            (TargetState::new(px, vx, py, vy), w)
        })
        .collect();
    BernoulliComponent { existence: birth.existence, density: ParticleDensity { particles } }
}

/// Prediction step: survivors keep their weights and are propagated through
/// the motion model with existence scaled by the survival probability; birth
/// components are appended.
pub fn predict(
    prior: &MultiBernoulli,
    motion: &MotionConfig,
    birth: &BirthConfig,
    arena: &Arena,
    rng: &mut impl Rng,
) -> MultiBernoulli {
    let mut components = Vec::with_capacity(prior.len() + birth.components_per_step);
    for c in &prior.components {
        let particles = c
            .density
            .particles
            .iter()
            .map(|(x, w)| (step_target(x, motion, rng), *w))
            .collect();
        components.push(BernoulliComponent {
            existence: clamp_existence(c.existence * motion.survival_prob),
            density: ParticleDensity { particles },
        });
    }
    for _ in 0..birth.components_per_step {
        components.push(birth_component(birth, arena, rng));
    }
    MultiBernoulli { components }
}

struct ParticleCache {
    /// detection probability per particle
    pd: Vec<f64>,
    /// noise-free bearing per particle
    bearing: Vec<f64>,
    /// noise-free range per particle
    range: Vec<f64>,
    /// bearing std per particle
    sb: Vec<f64>,
    /// range std per particle
    sr: Vec<f64>,
    /// <p, pD> for the component
    pd_inner: f64,
}

fn build_cache(
    c: &BernoulliComponent,
    s: &AgentState,
    sensing: &SensingConfig,
    noise: &MeasurementNoiseConfig,
) -> ParticleCache {
    let n = c.density.len();
    let mut cache = ParticleCache {
        pd: Vec::with_capacity(n),
        bearing: Vec::with_capacity(n),
        range: Vec::with_capacity(n),
        sb: Vec::with_capacity(n),
        sr: Vec::with_capacity(n),
        pd_inner: 0.0,
    };
    for (x, w) in &c.density.particles {
        let dx = x.px - s.x;
        let dy = x.py - s.y;
        let d = dx.hypot(dy);
        let pd = sensing.pd_at_distance(d);
        cache.pd.push(pd);
        cache.bearing.push(dy.atan2(dx));
        cache.range.push(d);
        cache.sb.push(noise.bearing_std(d));
        cache.sr.push(noise.range_std(d));
        cache.pd_inner += w * pd;
    }
    cache
}

fn likelihood(cache: &ParticleCache, n: usize, z: &crate::models::Measurement) -> f64 {
    let db = crate::models::wrap_angle(z.bearing - cache.bearing[n]);
    let dr = z.range - cache.range[n];
    let sb = cache.sb[n];
    let sr = cache.sr[n];
    (-(std::f64::consts::TAU * sb * sr).ln() - 0.5 * ((db / sb).powi(2) + (dr / sr).powi(2)))
        .exp()
}

/// Measurement update. The output is the union of one legacy component per
/// predicted component (missed-detection hypothesis) and one joint component
/// per measurement. A component whose weights all underflow is returned with
/// existence zero instead of failing.
pub fn update(
    pred: &MultiBernoulli,
    z_set: &MeasurementSet,
    s: &AgentState,
    sensing: &SensingConfig,
    noise: &MeasurementNoiseConfig,
    clutter: &ClutterConfig,
) -> MultiBernoulli {
    let caches: Vec<ParticleCache> =
        pred.components.iter().map(|c| build_cache(c, s, sensing, noise)).collect();

    let mut components = Vec::with_capacity(pred.len() + z_set.len());

    // legacy components: no measurement associated
    for (c, cache) in pred.components.iter().zip(&caches) {
        let denom = 1.0 - c.existence * cache.pd_inner;
        let existence = if denom > 0.0 {
            clamp_existence(c.existence * (1.0 - cache.pd_inner) / denom)
        } else {
            log::warn!("legacy update degenerate (r={}, <p,pD>={})", c.existence, cache.pd_inner);
            0.0
        };
        let mut density = ParticleDensity {
            particles: c
                .density
                .particles
                .iter()
                .zip(&cache.pd)
                .map(|((x, w), pd)| (*x, w * (1.0 - pd)))
                .collect(),
        };
        if !density.normalize() {
            log::warn!("legacy component weights underflowed; flagging with r=0");
            components.push(BernoulliComponent { existence: 0.0, density });
            continue;
        }
        components.push(BernoulliComponent { existence, density });
    }

    // one joint component per measurement
    let kappa = clutter.intensity();
    for z in z_set.iter() {
        let mut numerator = 0.0;
        let mut denominator = kappa;
        let mut particles: Vec<(TargetState, f64)> = Vec::new();
        for (c, cache) in pred.components.iter().zip(&caches) {
            let r = c.existence;
            let miss = 1.0 - r * cache.pd_inner;
            let ratio = r / (1.0 - r).max(EXISTENCE_EPS);
            let mut lz = 0.0;
            for (n, (x, w)) in c.density.particles.iter().enumerate() {
                let l = likelihood(cache, n, z) * cache.pd[n];
                lz += w * l;
                particles.push((*x, ratio * w * l));
            }
            if miss > 0.0 {
                numerator += r * (1.0 - r) * lz / (miss * miss);
                denominator += r * lz / miss;
            }
        }
        if particles.is_empty() {
            continue;
        }
        let mut density = ParticleDensity { particles };
        let ok = density.normalize();
        let existence = if ok && denominator > 0.0 {
            clamp_existence(numerator / denominator)
        } else {
            log::warn!("measurement component degenerate for z=({:.3},{:.3})", z.bearing, z.range);
            0.0
        };
        components.push(BernoulliComponent { existence, density });
    }

    MultiBernoulli { components }
}

/// Posterior estimate: rounded expected count, cardinality variance, and the
/// states of the highest-existence components (weighted particle means).
/// Ties on existence keep the lower component index first.
pub fn estimate(mb: &MultiBernoulli) -> (CardinalityEstimate, Vec<TargetState>) {
    let (sum_r, sigma, tilde) = mb.cardinality_moments();
    let count = sum_r.round() as usize;
    let mut order: Vec<usize> = (0..mb.len()).collect();
    // stable sort keeps lower indices first on ties
    order.sort_by(|&a, &b| {
        mb.components[b]
            .existence
            .partial_cmp(&mb.components[a].existence)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let states = order
        .iter()
        .take(count.min(mb.len()))
        .map(|&i| mb.components[i].density.weighted_mean())
        .collect();
    (CardinalityEstimate { count, variance: sigma, normalized_variance: tilde }, states)
}

/// Pre-estimation on a predicted belief: the states of exactly those
/// components with existence strictly above one half.
pub fn predict_estimate(pred: &MultiBernoulli) -> Vec<TargetState> {
    pred.components
        .iter()
        .filter(|c| c.existence > 0.5)
        .map(|c| c.density.weighted_mean())
        .collect()
}

/// Component management: drops components below the prune threshold, caps the
/// count to the highest-existence `max_components`, and systematically
/// resamples any component whose ESS falls below the threshold or whose
/// particle count exceeds the per-component budget.
pub fn prune_and_cap(
    mb: &MultiBernoulli,
    cfg: &FilterConfig,
    rng: &mut impl Rng,
) -> MultiBernoulli {
    let mut kept: Vec<BernoulliComponent> = mb
        .components
        .iter()
        .filter(|c| c.existence >= cfg.prune_threshold)
        .cloned()
        .collect();

    if kept.len() > cfg.max_components {
        let mut order: Vec<usize> = (0..kept.len()).collect();
        order.sort_by(|&a, &b| {
            kept[b].existence.partial_cmp(&kept[a].existence).unwrap_or(std::cmp::Ordering::Equal)
        });
        let mut keep_mask = vec![false; kept.len()];
        for &i in order.iter().take(cfg.max_components) {
            keep_mask[i] = true;
        }
        let mut it = keep_mask.iter();
        kept.retain(|_| *it.next().unwrap());
    }

    for c in kept.iter_mut() {
        let n = c.density.len();
        let low_ess = c.density.ess() < cfg.resample_threshold * n as f64;
        if low_ess || n > cfg.particles_per_component {
            c.density = c.density.resample_systematic(cfg.particles_per_component, rng);
        }
    }

    MultiBernoulli { components: kept }
}

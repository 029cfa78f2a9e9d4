//! OSPA multi-object miss distance and Monte-Carlo summary statistics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("series length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("no series provided")]
    Empty,
}

/// OSPA parameters: cutoff distance and order.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OspaConfig {
    /// cutoff c [m]
    pub cutoff: f64,
    /// order p >= 1
    pub order: f64,
}

impl Default for OspaConfig {
    fn default() -> Self {
        Self { cutoff: 100.0, order: 2.0 }
    }
}

/// A finite collection of planar points.
pub type PointSet = Vec<[f64; 2]>;

/// Exact minimum-cost solution of a square assignment problem
/// (potentials-based O(n^3) algorithm). Returns the minimal total cost.
fn assignment_min_cost(cost: &[Vec<f64>]) -> f64 {
    let n = cost.len();
    if n == 0 {
        return 0.0;
    }
    let inf = f64::INFINITY;
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut total = 0.0;
    for j in 1..=n {
        if p[j] > 0 {
            total += cost[p[j] - 1][j - 1];
        }
    }
    total
}

/// OSPA distance between two point sets: cutoff-truncated localization cost
/// under the optimal assignment plus the cardinality penalty, all of order
/// `p`. Symmetric, bounded by the cutoff, zero for equal sets.
pub fn ospa(truth: &[[f64; 2]], estimate: &[[f64; 2]], cfg: &OspaConfig) -> f64 {
    let (small, large) = if truth.len() <= estimate.len() {
        (truth, estimate)
    } else {
        (estimate, truth)
    };
    let m = small.len();
    let n = large.len();
    if n == 0 {
        return 0.0;
    }
    let c = cfg.cutoff;
    let p = cfg.order;
    if m == 0 {
        return c;
    }
    // square matrix: real rows hold truncated distances^p, dummy rows c^p
    let cp = c.powf(p);
    let mut cost = vec![vec![cp; n]; n];
    for (i, a) in small.iter().enumerate() {
        for (j, b) in large.iter().enumerate() {
            let d = (a[0] - b[0]).hypot(a[1] - b[1]).min(c);
            cost[i][j] = d.powf(p);
        }
    }
    let total = assignment_min_cost(&cost);
    (total / n as f64).powf(1.0 / p)
}

/// Per-timestep mean and standard deviation across Monte-Carlo runs.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SeriesStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Element-wise mean and population standard deviation of equal-length runs.
pub fn mc_aggregate(runs: &[Vec<f64>]) -> Result<SeriesStats, MetricsError> {
    let first = runs.first().ok_or(MetricsError::Empty)?;
    let len = first.len();
    for run in runs {
        if run.len() != len {
            return Err(MetricsError::LengthMismatch { expected: len, got: run.len() });
        }
    }
    let n = runs.len() as f64;
    let mut mean = vec![0.0; len];
    for run in runs {
        for (m, x) in mean.iter_mut().zip(run) {
            *m += x / n;
        }
    }
    let mut std = vec![0.0; len];
    for run in runs {
        for ((s, m), x) in std.iter_mut().zip(&mean).zip(run) {
            *s += (x - m) * (x - m) / n;
        }
    }
    for s in std.iter_mut() {
        *s = s.sqrt();
    }
    Ok(SeriesStats { mean, std })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use itertools::Itertools;
    use proptest::prelude::*;

    /// Brute-force OSPA over all injections of the smaller set into the larger.
    fn ospa_brute(truth: &[[f64; 2]], estimate: &[[f64; 2]], cfg: &OspaConfig) -> f64 {
        let (small, large) = if truth.len() <= estimate.len() {
            (truth, estimate)
        } else {
            (estimate, truth)
        };
        let m = small.len();
        let n = large.len();
        if n == 0 {
            return 0.0;
        }
        if m == 0 {
            return cfg.cutoff;
        }
        let cp = cfg.cutoff.powf(cfg.order);
        let best = (0..n)
            .permutations(m)
            .map(|perm| {
                perm.iter()
                    .enumerate()
                    .map(|(i, &j)| {
                        let d = (small[i][0] - large[j][0])
                            .hypot(small[i][1] - large[j][1])
                            .min(cfg.cutoff);
                        d.powf(cfg.order)
                    })
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min);
        ((best + cp * (n - m) as f64) / n as f64).powf(1.0 / cfg.order)
    }

    #[test]
    fn identical_sets_have_zero_distance() {
        let cfg = OspaConfig::default();
        let pts = vec![[0.0, 0.0], [30.0, 40.0], [100.0, 250.0]];
        assert_relative_eq!(ospa(&pts, &pts, &cfg), 0.0);
        assert_relative_eq!(ospa(&[], &[], &cfg), 0.0);
    }

    #[test]
    fn empty_versus_nonempty_pays_full_cutoff() {
        let cfg = OspaConfig::default();
        assert_relative_eq!(ospa(&[[0.0, 0.0]], &[], &cfg), 100.0);
        assert_relative_eq!(ospa(&[], &[[0.0, 0.0], [5.0, 5.0]], &cfg), 100.0);
    }

    #[test]
    fn cardinality_mismatch_hand_value() {
        let cfg = OspaConfig::default();
        let truth = vec![[0.0, 0.0], [10.0, 0.0]];
        let est = vec![[0.0, 0.0]];
        let expected = ((0.0f64.powi(2) + 100.0f64.powi(2)) / 2.0).sqrt();
        assert_relative_eq!(ospa(&truth, &est, &cfg), expected, epsilon = 1e-12);
        assert_relative_eq!(expected, 70.71067811865476, epsilon = 1e-9);
    }

    #[test]
    fn symmetric_in_arguments() {
        let cfg = OspaConfig::default();
        let a = vec![[0.0, 0.0], [50.0, 20.0], [300.0, 300.0]];
        let b = vec![[1.0, 2.0], [48.0, 22.0]];
        assert_relative_eq!(ospa(&a, &b, &cfg), ospa(&b, &a, &cfg), epsilon = 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn matches_brute_force_up_to_six_points(
            a in proptest::collection::vec(
                (0.0..500.0f64, 0.0..500.0f64).prop_map(|(x, y)| [x, y]), 0..=6),
            b in proptest::collection::vec(
                (0.0..500.0f64, 0.0..500.0f64).prop_map(|(x, y)| [x, y]), 0..=6),
        ) {
            let cfg = OspaConfig::default();
            let got = ospa(&a, &b, &cfg);
            let want = ospa_brute(&a, &b, &cfg);
            prop_assert!((got - want).abs() < 1e-9, "got {got}, brute {want}");
            prop_assert!(got <= cfg.cutoff + 1e-12);
        }
    }

    #[test]
    fn aggregate_single_run() {
        let stats = mc_aggregate(&[vec![1.0, 2.0, 3.0]]).unwrap();
        assert_eq!(stats.mean, vec![1.0, 2.0, 3.0]);
        assert_eq!(stats.std, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn aggregate_two_constant_runs() {
        let stats = mc_aggregate(&[vec![2.0, 2.0], vec![4.0, 4.0]]).unwrap();
        assert_eq!(stats.mean, vec![3.0, 3.0]);
        assert_relative_eq!(stats.std[0], 1.0);
    }

    #[test]
    fn aggregate_rejects_mismatched_lengths() {
        let err = mc_aggregate(&[vec![1.0], vec![1.0, 2.0]]);
        assert!(matches!(err, Err(MetricsError::LengthMismatch { .. })));
    }

    #[test]
    fn aggregate_std_tracks_population_spread() {
        use crate::rng::stream;
        use rand::Rng;
        let mut rng = stream(3, "agg");
        let runs: Vec<Vec<f64>> = (0..30)
            .map(|_| (0..50).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let stats = mc_aggregate(&runs).unwrap();
        // uniform on [-1,1): std = 1/sqrt(3) ~ 0.577
        let avg_std: f64 = stats.std.iter().sum::<f64>() / stats.std.len() as f64;
        assert!((avg_std - 0.577).abs() < 0.3 * 0.577, "avg std {avg_std}");
    }
}

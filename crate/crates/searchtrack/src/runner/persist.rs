//! File outputs. `trace.csv` carries one row per step with the header
//! `k,agent<j>_x,agent<j>_y,agent<j>_mode,agent<j>_control,agent<j>_nhat,...,
//! n_hat,search_cost,track_cost,combined,ospa,ga_generations,estimates,truth`;
//! the `estimates` and `truth` columns hold `x y` pairs joined by `;`.
//! Floats print in shortest round-trip form, so identical runs produce
//! byte-identical files.

use crate::metrics::SeriesStats;
use crate::objectives::SearchGrid;
use crate::runner::{McOutput, Scenario, StepRecord, SweepOutput};
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

fn points_field(points: &[[f64; 2]]) -> String {
    let mut out = String::new();
    for (i, p) in points.iter().enumerate() {
        if i > 0 {
            out.push(';');
        }
        let _ = write!(out, "{} {}", p[0], p[1]);
    }
    out
}

pub fn trace_csv_string(records: &[StepRecord]) -> String {
    let n_agents = records.first().map_or(0, |r| r.agents.len());
    let mut out = String::from("k");
    for j in 0..n_agents {
        let _ = write!(
            out,
            ",agent{j}_x,agent{j}_y,agent{j}_mode,agent{j}_control,agent{j}_nhat"
        );
    }
    out.push_str(",n_hat,search_cost,track_cost,combined,ospa,ga_generations,estimates,truth\n");
    for r in records {
        let _ = write!(out, "{}", r.k);
        for a in &r.agents {
            let _ = write!(
                out,
                ",{},{},{},{},{}",
                a.position.x, a.position.y, a.mode, a.control_index, a.n_hat
            );
        }
        let _ = writeln!(
            out,
            ",{},{},{},{},{},{},\"{}\",\"{}\"",
            r.n_hat_total,
            r.search_cost,
            r.track_cost,
            r.combined,
            r.ospa,
            r.ga_generations,
            points_field(&r.estimates),
            points_field(&r.truth)
        );
    }
    out
}

pub fn write_trace_csv(path: &Path, records: &[StepRecord]) -> io::Result<()> {
    fs::write(path, trace_csv_string(records))
}

pub fn write_ospa_csv(path: &Path, stats: &SeriesStats) -> io::Result<()> {
    let mut out = String::from("k,ospa_mean,ospa_std\n");
    for (i, (m, s)) in stats.mean.iter().zip(&stats.std).enumerate() {
        let _ = writeln!(out, "{},{},{}", i + 1, m, s);
    }
    fs::write(path, out)
}

pub fn write_mc_csv(path: &Path, mc: &McOutput) -> io::Result<()> {
    let mut out = String::from(
        "k,search_mean,search_std,track_mean,track_std,ospa_mean,ospa_std\n",
    );
    for i in 0..mc.search.mean.len() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            i + 1,
            mc.search.mean[i],
            mc.search.std[i],
            mc.track.mean[i],
            mc.track.std[i],
            mc.ospa.mean[i],
            mc.ospa.std[i]
        );
    }
    fs::write(path, out)
}

pub fn write_grid_csv(path: &Path, grid: &SearchGrid) -> io::Result<()> {
    fs::write(path, grid.to_csv_string())
}

pub fn write_sweep_csv(path: &Path, sweep: &SweepOutput) -> io::Result<()> {
    let n_agents = sweep.entries.first().map_or(0, |e| e.modes.len());
    let mut out = String::from("w");
    for j in 0..n_agents {
        let _ = write!(out, ",agent{j}_mode");
    }
    out.push_str(",search_cost,track_cost,combined\n");
    for e in &sweep.entries {
        let _ = write!(out, "{}", e.w);
        for m in &e.modes {
            let _ = write!(out, ",{m}");
        }
        let _ = writeln!(
            out,
            ",{},{},{}",
            e.values.search_cost, e.values.track_cost, e.values.combined
        );
    }
    fs::write(path, out)
}

/// Run metadata: crate version, effective seed, and the full scenario echo.
pub fn write_summary_json(
    path: &Path,
    scenario: &Scenario,
    extra: serde_json::Value,
) -> io::Result<()> {
    let mut summary = serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "seed": scenario.seed,
        "scenario": scenario,
    });
    if let (Some(obj), serde_json::Value::Object(extra)) = (summary.as_object_mut(), extra) {
        for (k, v) in extra {
            obj.insert(k, v);
        }
    }
    fs::write(path, serde_json::to_string_pretty(&summary)?)
}

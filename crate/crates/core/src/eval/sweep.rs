//! Launch-power sweeps with per-point persistence so an interrupted run can resume.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::pipeline::{QPoint, ScenarioRunner};
use super::{Equalizer, ScenarioKind};
use crate::error::Result;

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    /// Where per-point files (`points/`), `results.csv` and `timings.csv` go. Without it the
    /// sweep runs in memory only.
    pub out_dir: Option<PathBuf>,
    /// Also write trained checkpoints and training logs under `models/`.
    pub save_models: bool,
}

fn unit_stem(kind: ScenarioKind, power: f64, seed: u64) -> String {
    format!("{kind}_p{power:+.2}_s{seed}")
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("partial");
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(tmp, path)?;
    Ok(())
}

fn to_csv(points: &[QPoint]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for p in points {
        w.serialize(p)?;
    }
    if points.is_empty() {
        w.write_record(HEADER)?;
    }
    Ok(w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?)
}

const HEADER: [&str; 12] = [
    "scenario", "equalizer", "launch_power_dbm", "ber", "q_db", "seed", "train_symbols", "epochs",
    "bit_errors", "bits_counted", "q_lower_bound", "status",
];

fn timings_csv(points: &[QPoint]) -> Vec<u8> {
    let mut s = String::from("scenario,equalizer,launch_power_dbm,seed,wall_time_s\n");
    for p in points {
        s.push_str(&format!("{},{},{},{},{:.3}\n", p.scenario, p.equalizer, p.launch_power_dbm, p.seed, p.wall_time_s));
    }
    s.into_bytes()
}

fn read_timings(path: &Path) -> Vec<f64> {
    let Ok(text) = std::fs::read_to_string(path) else { return vec![] };
    text.lines().skip(1).filter_map(|l| l.rsplit(',').next()?.parse().ok()).collect()
}

/// Deterministic order: scenario, equalizer, power, seed.
pub fn sort_points(points: &mut [QPoint]) {
    points.sort_by(|a, b| {
        (a.scenario, a.equalizer)
            .cmp(&(b.scenario, b.equalizer))
            .then(a.launch_power_dbm.total_cmp(&b.launch_power_dbm))
            .then(a.seed.cmp(&b.seed))
    });
}

/// Writes the results table; wall times go to the `timings.csv` sibling so the table
/// itself is byte-identical across identical runs.
pub fn write_results(path: &Path, points: &[QPoint]) -> Result<()> {
    let mut sorted = points.to_vec();
    sort_points(&mut sorted);
    write_atomic(path, &to_csv(&sorted)?)?;
    write_atomic(&path.with_file_name("timings.csv"), &timings_csv(&sorted))
}

pub fn read_results(path: &Path) -> Result<Vec<QPoint>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in r.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

/// Points already on disk for one (power, seed) unit.
fn load_unit(dir: &Path, stem: &str) -> Vec<QPoint> {
    let path = dir.join(format!("{stem}.csv"));
    let Ok(mut pts) = read_results(&path) else { return vec![] };
    let times = read_timings(&dir.join(format!("{stem}_timings.csv")));
    for (p, t) in pts.iter_mut().zip(times) {
        p.wall_time_s = t;
    }
    pts
}

/// Every (power, seed) pair is an independent unit: its three datasets are simulated once
/// and shared by all equalizers. Units run in parallel on the current rayon pool; each
/// finished unit is written atomically to `points/` and skipped by later runs.
pub fn sweep_launch_power(
    runner: &ScenarioRunner,
    powers: &[f64],
    equalizers: &[Equalizer],
    seeds: &[u64],
    opts: &SweepOptions,
) -> Result<Vec<QPoint>> {
    if powers.is_empty() || equalizers.is_empty() || seeds.is_empty() {
        return Ok(vec![]);
    }
    let kind = runner.scenario.kind;
    let points_dir = opts.out_dir.as_ref().map(|d| d.join("points"));
    let models_dir = opts.out_dir.as_ref().filter(|_| opts.save_models).map(|d| d.join("models"));
    if let Some(d) = &points_dir {
        std::fs::create_dir_all(d)?;
    }
    let units: Vec<(f64, u64)> = powers.iter().flat_map(|&p| seeds.iter().map(move |&s| (p, s))).collect();
    let results: Vec<Result<Vec<QPoint>>> = units
        .par_iter()
        .map(|&(power, seed)| {
            let stem = unit_stem(kind, power, seed);
            let done = points_dir.as_deref().map(|d| load_unit(d, &stem)).unwrap_or_default();
            let missing: Vec<Equalizer> =
                equalizers.iter().copied().filter(|e| !done.iter().any(|p| p.equalizer == *e)).collect();
            let mut pts: Vec<QPoint> = done.into_iter().filter(|p| equalizers.contains(&p.equalizer)).collect();
            if missing.is_empty() {
                log::info!("{stem}: up-to-date, skipped");
                return Ok(pts);
            }
            pts.extend(runner.run_point(power, seed, &missing, None, models_dir.as_deref()));
            sort_points(&mut pts);
            if let Some(d) = &points_dir {
                write_atomic(&d.join(format!("{stem}_timings.csv")), &timings_csv(&pts))?;
                write_atomic(&d.join(format!("{stem}.csv")), &to_csv(&pts)?)?;
            }
            Ok(pts)
        })
        .collect();
    let mut all = Vec::new();
    for r in results {
        all.extend(r?);
    }
    sort_points(&mut all);
    if let Some(d) = &opts.out_dir {
        write_results(&d.join("results.csv"), &all)?;
    }
    Ok(all)
}

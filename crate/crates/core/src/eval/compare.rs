//! Simulated curves next to the published experimental ones.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::pipeline::QPoint;
use super::{Equalizer, ReferenceCurves, ScenarioKind};
use crate::error::Result;

pub const REFERENCE_LABEL: &str = "experimental reference — not a target";

/// Seed-averaged simulated curve of one equalizer and its published counterpart.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSummary {
    pub scenario: ScenarioKind,
    pub equalizer: Equalizer,
    /// `(power, mean Q, seeds)` in ascending power.
    pub simulated: Vec<(f64, f64, usize)>,
    pub sim_peak: Option<(f64, f64)>,
    pub ref_peak: Option<(f64, f64)>,
    /// Peak-Q gain over the linear DSP curve of the same source.
    pub sim_gain_over_dsp_db: Option<f64>,
    pub ref_gain_over_dsp_db: Option<f64>,
}

impl CurveSummary {
    /// Simulated minus reference peak Q.
    pub fn peak_q_delta_db(&self) -> Option<f64> {
        Some(self.sim_peak?.1 - self.ref_peak?.1)
    }

    /// Simulated minus reference optimal launch power.
    pub fn optimal_power_delta_db(&self) -> Option<f64> {
        Some(self.sim_peak?.0 - self.ref_peak?.0)
    }

    /// Mean simulated Q at `power`, if that power was swept.
    pub fn q_at(&self, power: f64) -> Option<f64> {
        self.simulated.iter().find(|p| (p.0 - power).abs() < 1e-9).map(|p| p.1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub curves: Vec<CurveSummary>,
}

/// Mean Q per power over the seeds whose point succeeded.
fn simulated_curve(points: &[QPoint], scenario: ScenarioKind, eq: Equalizer) -> Vec<(f64, f64, usize)> {
    let mut acc: BTreeMap<i64, (f64, f64, usize)> = BTreeMap::new();
    for p in points.iter().filter(|p| p.scenario == scenario && p.equalizer == eq && p.is_ok()) {
        let key = (p.launch_power_dbm * 1e6).round() as i64;
        let e = acc.entry(key).or_insert((p.launch_power_dbm, 0.0, 0));
        e.1 += p.q_db;
        e.2 += 1;
    }
    acc.into_values().map(|(p, s, n)| (p, s / n as f64, n)).collect()
}

fn peak(curve: &[(f64, f64)]) -> Option<(f64, f64)> {
    curve.iter().copied().max_by(|a, b| a.1.total_cmp(&b.1))
}

pub fn compare_to_reference(results: &[QPoint], curves: &ReferenceCurves) -> Result<ComparisonReport> {
    let mut keys: Vec<(ScenarioKind, Equalizer)> = results.iter().map(|p| (p.scenario, p.equalizer)).collect();
    keys.sort();
    keys.dedup();
    let mut out = Vec::new();
    for (scenario, eq) in keys {
        let simulated = simulated_curve(results, scenario, eq);
        let sim_peak = peak(&simulated.iter().map(|p| (p.0, p.1)).collect::<Vec<_>>());
        let ref_peak = curves.peak(scenario, eq);
        let dsp_sim = peak(&simulated_curve(results, scenario, Equalizer::Dsp).iter().map(|p| (p.0, p.1)).collect::<Vec<_>>());
        let dsp_ref = curves.peak(scenario, Equalizer::Dsp);
        out.push(CurveSummary {
            scenario,
            equalizer: eq,
            simulated,
            sim_peak,
            ref_peak,
            sim_gain_over_dsp_db: sim_peak.zip(dsp_sim).map(|(a, b)| a.1 - b.1),
            ref_gain_over_dsp_db: ref_peak.zip(dsp_ref).map(|(a, b)| a.1 - b.1),
        });
    }
    Ok(ComparisonReport { curves: out })
}

fn fmt_opt(v: Option<f64>, prec: usize) -> String {
    v.map_or("-".into(), |v| format!("{v:.prec$}"))
}

impl ComparisonReport {
    pub fn curve(&self, scenario: ScenarioKind, eq: Equalizer) -> Option<&CurveSummary> {
        self.curves.iter().find(|c| c.scenario == scenario && c.equalizer == eq)
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# Simulated vs published Q-factor\n");
        let _ = writeln!(s, "Published curves: {REFERENCE_LABEL}. They come from a laboratory link whose amplifier noise and transceiver impairments are not modelled here.\n");
        let _ = writeln!(
            s,
            "| scenario | equalizer | sim peak Q [dB] | sim opt. power [dBm] | ref peak Q [dB] | ref opt. power [dBm] | dQ peak [dB] | dP opt. [dB] | sim gain vs DSP [dB] | ref gain vs DSP [dB] |"
        );
        let _ = writeln!(s, "|---|---|---|---|---|---|---|---|---|---|");
        for c in &self.curves {
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | {} | {} | {} | {} | {} | {} |",
                c.scenario,
                c.equalizer,
                fmt_opt(c.sim_peak.map(|p| p.1), 2),
                fmt_opt(c.sim_peak.map(|p| p.0), 1),
                fmt_opt(c.ref_peak.map(|p| p.1), 2),
                fmt_opt(c.ref_peak.map(|p| p.0), 1),
                fmt_opt(c.peak_q_delta_db(), 2),
                fmt_opt(c.optimal_power_delta_db(), 1),
                fmt_opt(c.sim_gain_over_dsp_db, 2),
                fmt_opt(c.ref_gain_over_dsp_db, 2),
            );
        }
        s
    }
}

const PLOT_SCRIPT: &str = r#"#!/usr/bin/env python3
"""Q-factor vs launch power: simulated (solid) and published experimental reference (dashed)."""
import csv
import os
from collections import defaultdict

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))
STYLE = {"crnn": ("CRNN", "tab:red"), "bilstm": ("biLSTM", "tab:blue"), "mlp": ("MLP", "tab:green"),
         "dbp": ("DBP", "tab:purple"), "dsp": ("Regular DSP", "black")}

curves = defaultdict(list)
with open(os.path.join(HERE, "plot_data.csv")) as f:
    for row in csv.DictReader(f):
        curves[(row["scenario"], row["equalizer"], row["source"])].append(
            (float(row["launch_power_dbm"]), float(row["q_db"])))

scenarios = [s for s in ("SC", "WDM") if any(k[0] == s for k in curves)]
fig, axes = plt.subplots(1, len(scenarios), figsize=(6 * len(scenarios), 4.5), squeeze=False)
for ax, sc in zip(axes[0], scenarios):
    for (s, eq, src), pts in sorted(curves.items()):
        if s != sc:
            continue
        pts.sort()
        name, color = STYLE.get(eq, (eq, None))
        dashed = src == "reference"
        ax.plot([p for p, _ in pts], [q for _, q in pts], "--" if dashed else "-o", color=color,
                alpha=0.6 if dashed else 1.0, markersize=4,
                label=f"{name} (experimental reference, not a target)" if dashed else f"{name} (simulated)")
    ax.set_title(sc)
    ax.set_xlabel("Launch power [dBm]")
    ax.set_ylabel("Q-Factor [dB]")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=7)
fig.tight_layout()
fig.savefig(os.path.join(HERE, "q_vs_power.png"), dpi=150)
print("wrote", os.path.join(HERE, "q_vs_power.png"))
"#;

/// Writes `plot_data.csv`, `plot_q_vs_power.py` and `comparison.md` into `dir`.
pub fn write_plot_bundle(dir: &Path, report: &ComparisonReport, curves: &ReferenceCurves) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut data = String::from("scenario,equalizer,source,launch_power_dbm,q_db\n");
    for c in &report.curves {
        for (p, q, _) in &c.simulated {
            let _ = writeln!(data, "{},{},simulated,{p},{q}", c.scenario, c.equalizer);
        }
        for (p, q) in curves.curve(c.scenario, c.equalizer) {
            let _ = writeln!(data, "{},{},reference,{p},{q}", c.scenario, c.equalizer);
        }
    }
    let paths = [dir.join("plot_data.csv"), dir.join("plot_q_vs_power.py"), dir.join("comparison.md")];
    std::fs::write(&paths[0], data)?;
    std::fs::write(&paths[1], PLOT_SCRIPT)?;
    std::fs::write(&paths[2], report.to_markdown())?;
    Ok(paths.to_vec())
}

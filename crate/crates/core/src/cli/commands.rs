use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::error::{invalid, Error, Result};
use crate::eval::{
    compare_to_reference, model_stem, read_results, save_models, sweep_launch_power,
    write_plot_bundle, ComparisonReport, DatasetRole, Equalizer, LinkDataset, QPoint, ReferenceCurves,
    ScenarioRunner, SweepOptions,
};
use crate::hyperopt::{bo_search, write_history, BoOutcome};
use crate::nnequalizer::{train_polarization, Polarization, TrainConfig, TrainingLog};
use crate::seed;

const RUN_FILE: &str = "run.json";
const MANIFEST: &str = "manifest.json";

/// Marker at the root of an output directory tying it to one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStamp {
    pub config_hash: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub role: DatasetRole,
    pub prbs_seed: u32,
    pub noise_seed: u64,
    pub symbols: usize,
    pub tx_file: String,
    pub rx_file: String,
}

/// `manifest.json` of one simulated (power, seed) unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub config_hash: String,
    pub scenario: String,
    pub launch_power_dbm: f64,
    pub seed: u64,
    pub datasets: Vec<DatasetEntry>,
}

/// Checkpoints and logs written by `train` for one (power, seed).
#[derive(Debug, Clone)]
pub struct TrainedUnit {
    pub launch_power_dbm: f64,
    pub seed: u64,
    pub checkpoints: [PathBuf; 2],
    pub logs: [TrainingLog; 2],
}

#[derive(Debug, Clone)]
pub struct HyperoptResult {
    pub outcome: BoOutcome,
    pub history_path: PathBuf,
    pub best_config_path: PathBuf,
}

/// A validated configuration bound to its output directory.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: RunConfig,
    pub out: PathBuf,
    pub hash: String,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let tmp = path.with_extension("partial");
    std::fs::write(&tmp, serde_json::to_vec_pretty(value).map_err(|e| invalid(e.to_string()))?)?;
    std::fs::rename(tmp, path)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read(path)?;
    serde_json::from_slice(&text).map_err(|e| Error::Format { path: path.into(), msg: e.to_string() })
}

impl Context {
    /// Applies the `--seed` and `--out` overrides, then revalidates.
    pub fn new(mut config: RunConfig, out: Option<PathBuf>, seed: Option<u64>) -> Result<Self> {
        if let Some(s) = seed {
            config.seeds = vec![s];
            config.hyperopt.bo.seed = s;
        }
        if let Some(o) = out {
            config.output_dir = o;
        }
        config.validate()?;
        let hash = config.hash();
        let out = config.output_dir.clone();
        Ok(Self { config, out, hash })
    }

    pub fn from_file(path: &Path, out: Option<PathBuf>, seed: Option<u64>) -> Result<Self> {
        Self::new(RunConfig::load(path)?, out, seed)
    }

    /// Creates the output directory or checks that it belongs to this configuration.
    pub fn claim_output_dir(&self) -> Result<()> {
        std::fs::create_dir_all(&self.out)?;
        let stamp_path = self.out.join(RUN_FILE);
        if stamp_path.exists() {
            let stamp: RunStamp = read_json(&stamp_path)?;
            if stamp.config_hash != self.hash {
                return Err(Error::ConfigHashMismatch {
                    path: self.out.clone(),
                    expected: self.hash.clone(),
                    found: stamp.config_hash,
                });
            }
            return Ok(());
        }
        write_json(&stamp_path, &RunStamp { config_hash: self.hash.clone(), version: env!("CARGO_PKG_VERSION").into() })?;
        std::fs::write(self.out.join("config.toml"), self.config.to_toml_string()?)?;
        Ok(())
    }

    pub fn dataset_dir(&self, power_dbm: f64, seed: u64) -> PathBuf {
        self.out.join("datasets").join(format!("{}_p{power_dbm:+.2}_s{seed}", self.config.scenario))
    }

    pub fn models_dir(&self) -> PathBuf {
        self.out.join("models")
    }

    fn runner(&self) -> Result<ScenarioRunner> {
        ScenarioRunner::new(self.config.scenario())
    }

    /// Reads a dataset written by `simulate`, checking it belongs to this configuration.
    pub fn load_dataset(&self, role: DatasetRole, power_dbm: f64, seed: u64) -> Result<LinkDataset> {
        let dir = self.dataset_dir(power_dbm, seed);
        let manifest_path = dir.join(MANIFEST);
        if !manifest_path.exists() {
            return Err(Error::MissingArtifact {
                what: format!("{} dataset for {power_dbm:+.2} dBm, seed {seed}", role.label()),
                path: dir,
                hint: "run `fibereq simulate` with this configuration first".into(),
            });
        }
        let m: DatasetManifest = read_json(&manifest_path)?;
        if m.config_hash != self.hash {
            return Err(Error::ConfigHashMismatch { path: manifest_path, expected: self.hash.clone(), found: m.config_hash });
        }
        let e = m
            .datasets
            .iter()
            .find(|e| e.role == role)
            .ok_or_else(|| Error::Format { path: manifest_path.clone(), msg: format!("no {} entry", role.label()) })?;
        LinkDataset::read(&dir, role, power_dbm, (e.prbs_seed, e.noise_seed), self.config.transceiver.baud_rate())
    }

    fn unit_up_to_date(&self, dir: &Path) -> bool {
        let Ok(m) = read_json::<DatasetManifest>(&dir.join(MANIFEST)) else { return false };
        m.config_hash == self.hash
            && m.datasets.len() == DatasetRole::ALL.len()
            && m.datasets.iter().all(|e| dir.join(&e.tx_file).exists() && dir.join(&e.rx_file).exists())
    }
}

/// Simulates train/validation/test datasets for every (power, seed).
pub fn cmd_simulate(ctx: &Context) -> Result<Vec<DatasetManifest>> {
    ctx.claim_output_dir()?;
    let runner = ctx.runner()?;
    let units: Vec<(f64, u64)> =
        ctx.config.powers.iter().flat_map(|&p| ctx.config.seeds.iter().map(move |&s| (p, s))).collect();
    units
        .par_iter()
        .map(|&(power, seed)| {
            let dir = ctx.dataset_dir(power, seed);
            if ctx.unit_up_to_date(&dir) {
                log::info!("{}: up-to-date, skipped", dir.display());
                return read_json(&dir.join(MANIFEST));
            }
            let mut entries = Vec::new();
            for role in DatasetRole::ALL {
                let ds = runner.simulate(role, power, seed)?;
                ds.write(&dir)?;
                entries.push(DatasetEntry {
                    role,
                    prbs_seed: ds.prbs_seed,
                    noise_seed: ds.noise_seed,
                    symbols: ds.tx.len(),
                    tx_file: format!("{}_tx.fsy", role.label()),
                    rx_file: format!("{}_rx.fwv", role.label()),
                });
            }
            let m = DatasetManifest {
                config_hash: ctx.hash.clone(),
                scenario: ctx.config.scenario.to_string(),
                launch_power_dbm: power,
                seed,
                datasets: entries,
            };
            write_json(&dir.join(MANIFEST), &m)?;
            log::info!("{}: simulated", dir.display());
            Ok(m)
        })
        .collect()
}

/// Trains one neural equalizer for every (power, seed) on the simulated datasets.
pub fn cmd_train(ctx: &Context, label: &str) -> Result<Vec<TrainedUnit>> {
    let eq = Equalizer::parse_neural(label)?;
    ctx.claim_output_dir()?;
    let runner = ctx.runner()?;
    let dir = ctx.models_dir();
    let mut out = Vec::new();
    for &power in &ctx.config.powers {
        for &seed in &ctx.config.seeds {
            let train = ctx.load_dataset(DatasetRole::Train, power, seed)?;
            let val = ctx.load_dataset(DatasetRole::Validation, power, seed)?;
            let (pair, logs) = runner.train_neural(eq, &train, &val, seed)?;
            let stem = model_stem(ctx.config.scenario, eq, power, seed);
            save_models(&dir, &stem, &pair, &logs)?;
            for (pol, log) in ["x", "y"].iter().zip(&logs) {
                if let Some(b) = log.best() {
                    log::info!("{stem} {pol}: best epoch {} val MSE {:.4e} val BER {:.3e}", b.epoch, b.val_mse, b.val_ber);
                }
            }
            out.push(TrainedUnit {
                launch_power_dbm: power,
                seed,
                checkpoints: [dir.join(format!("{stem}_x.fnn")), dir.join(format!("{stem}_y.fnn"))],
                logs,
            });
        }
    }
    Ok(out)
}

/// Runs the launch-power sweep, then writes the comparison report and plot bundle.
pub fn cmd_sweep(ctx: &Context, save_models: bool) -> Result<Vec<QPoint>> {
    ctx.claim_output_dir()?;
    let runner = ctx.runner()?;
    let opts = SweepOptions { out_dir: Some(ctx.out.clone()), save_models };
    let points = sweep_launch_power(&runner, &ctx.config.powers, &ctx.config.equalizers, &ctx.config.seeds, &opts)?;
    let failed = points.iter().filter(|p| !p.is_ok()).count();
    if failed > 0 {
        log::warn!("{failed} of {} points failed; see the status column of results.csv", points.len());
    }
    cmd_report(ctx)?;
    Ok(points)
}

/// Bayesian search over the hyperparameters of `hyperopt.equalizer`. Each trial trains the
/// x-polarisation model for `hyperopt.epochs` epochs on the datasets of the highest power
/// and first seed; the objective is its best validation BER.
pub fn cmd_hyperopt(ctx: &Context) -> Result<HyperoptResult> {
    ctx.claim_output_dir()?;
    let cfg = &ctx.config;
    let h = &cfg.hyperopt;
    let arch = h.equalizer.architecture().ok_or_else(|| invalid("hyperopt.equalizer must be neural"))?;
    let power = cfg.powers.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let seed = cfg.seeds[0];
    let runner = ctx.runner()?;
    let train = ctx.load_dataset(DatasetRole::Train, power, seed)?;
    let val = ctx.load_dataset(DatasetRole::Validation, power, seed)?;
    let tr = runner.dsp_symbols(&train)?;
    let va = runner.dsp_symbols(&val)?;
    let init = seed::derive(seed, &[seed::label("hyperopt")]);
    let result = bo_search(&h.space, &h.bo, |p| {
        let spec = p.apply(&cfg.arch);
        let tc = TrainConfig {
            epochs: h.epochs,
            mini_batch: p.batch,
            shuffle_seed: seed::derive(init, &[seed::label("shuffle")]),
            ..cfg.train.clone()
        };
        let (_, log) = train_polarization(arch, &spec, (&tr, &train.tx), (&va, &val.tx), &tc, Polarization::X, init)?;
        log.best().map(|r| r.val_ber).ok_or(Error::Diverged { epoch: 0 })
    });
    let dir = ctx.out.join("hyperopt");
    std::fs::create_dir_all(&dir)?;
    let history_path = dir.join("history.csv");
    let outcome = match result {
        Ok(o) => o,
        Err(f) => {
            write_history(&history_path, &f.history)?;
            return Err(f.into());
        }
    };
    write_history(&history_path, &outcome.history)?;
    let mut best = cfg.clone();
    best.arch = outcome.best.point.apply(&cfg.arch);
    best.train.mini_batch = outcome.best.point.batch;
    best.validate()?;
    let best_config_path = dir.join("best_config.toml");
    std::fs::write(&best_config_path, best.to_toml_string()?)?;
    log::info!(
        "best of {} trials: {} (validation BER {:.3e}); written to {}",
        outcome.history.len(),
        outcome.best.point,
        outcome.best.objective.unwrap_or(f64::NAN),
        best_config_path.display()
    );
    Ok(HyperoptResult { outcome, history_path, best_config_path })
}

/// Compares `results.csv` with the embedded reference curves and writes the plot bundle.
pub fn cmd_report(ctx: &Context) -> Result<ComparisonReport> {
    ctx.claim_output_dir()?;
    let path = ctx.out.join("results.csv");
    if !path.exists() {
        return Err(Error::MissingArtifact {
            what: "results table".into(),
            path,
            hint: "run `fibereq sweep` with this configuration first".into(),
        });
    }
    let points = read_results(&path)?;
    let curves = ReferenceCurves::embedded();
    let report = compare_to_reference(&points, &curves)?;
    let files = write_plot_bundle(&ctx.out.join("plots"), &report, &curves)?;
    println!("{}", report.to_markdown());
    for f in files {
        log::info!("wrote {}", f.display());
    }
    Ok(report)
}

//! One operating point end to end: PRBS -> 16-QAM -> RRC -> link -> receiver chains -> BER.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{frame_ber, BerResult, Equalizer, ScenarioKind};
use crate::channel::{link_transmit, required_wdm_sample_rate, LinkConfig, SsfmConfig, WdmConfig};
use crate::error::{invalid, Error, Result};
use crate::io;
use crate::nnequalizer::{equalize, save_checkpoint, train_pair, ArchSpec, PolarizationPair, TrainConfig, TrainingLog};
use crate::rxdsp::{
    cdc_compensate, dbp_compensate, dbp_grid_search, matched_filter_downsample, phase_amplitude_align,
    select_channel, DbpConfig,
};
use crate::seed;
use crate::txdsp::{
    prbs_generate, qam16_map, rrc_design, shape_and_upsample, RrcFilter, SampledWaveform, SymbolFrame,
    DEFAULT_BAUD_RATE, DEFAULT_ROLL_OFF, DEFAULT_RRC_SPAN,
};

/// Sample rate at which the receiver chains operate, in samples per symbol.
pub const RX_SPS: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransceiverConfig {
    pub baud_gbd: f64,
    pub roll_off: f64,
    /// RRC length in symbols; also the transient window dropped at each frame edge.
    pub rrc_span: usize,
    /// Propagation samples per symbol. `None`: 4 for a single channel, the smallest
    /// integer covering the comb for WDM.
    pub sim_sps: Option<usize>,
}

impl Default for TransceiverConfig {
    fn default() -> Self {
        Self { baud_gbd: DEFAULT_BAUD_RATE / 1e9, roll_off: DEFAULT_ROLL_OFF, rrc_span: DEFAULT_RRC_SPAN, sim_sps: None }
    }
}

impl TransceiverConfig {
    pub fn baud_rate(&self) -> f64 {
        self.baud_gbd * 1e9
    }
}

/// Everything that defines the physics and the receivers of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub transceiver: TransceiverConfig,
    pub link: LinkConfig,
    pub wdm: Option<WdmConfig>,
    pub ssfm: SsfmConfig,
    pub dbp: DbpConfig,
    pub train: TrainConfig,
    pub arch: ArchSpec,
}

impl Scenario {
    pub fn new(kind: ScenarioKind) -> Self {
        Self {
            kind,
            transceiver: TransceiverConfig::default(),
            link: LinkConfig::default(),
            wdm: (kind == ScenarioKind::Wdm).then(WdmConfig::default),
            ssfm: SsfmConfig::default(),
            dbp: DbpConfig::default(),
            train: TrainConfig::default(),
            arch: ArchSpec::paper(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |field: &str, msg: String| Error::Config { field: field.into(), msg };
        let t = &self.transceiver;
        if !(t.baud_gbd > 0.0 && t.baud_gbd.is_finite()) {
            return Err(cfg("transceiver.baud_gbd", "must be positive".into()));
        }
        if !(0.0..=1.0).contains(&t.roll_off) {
            return Err(cfg("transceiver.roll_off", format!("must be in [0, 1], got {}", t.roll_off)));
        }
        if t.rrc_span == 0 {
            return Err(cfg("transceiver.rrc_span", "must be positive".into()));
        }
        if matches!(t.sim_sps, Some(s) if s < RX_SPS) {
            return Err(cfg("transceiver.sim_sps", format!("must be at least {RX_SPS}")));
        }
        self.link.span.validate().map_err(|e| match e {
            Error::Config { field, msg } => Error::Config { field: format!("link.span.{field}"), msg },
            e => e,
        })?;
        if self.link.n_spans == 0 {
            return Err(cfg("link.n_spans", "must be at least 1".into()));
        }
        if !(self.ssfm.step_km > 0.0) {
            return Err(cfg("ssfm.step_km", "must be positive".into()));
        }
        match (self.kind, &self.wdm) {
            (ScenarioKind::Sc, Some(_)) => {
                return Err(cfg("wdm", "a [wdm] section is only valid with scenario = \"WDM\"".into()))
            }
            (ScenarioKind::Wdm, Some(w)) if w.n_neighbors % 2 != 0 => {
                return Err(cfg("wdm.n_neighbors", format!("must be even, got {}", w.n_neighbors)))
            }
            (ScenarioKind::Wdm, Some(w)) if (w.neighbor_baud_gbd - t.baud_gbd).abs() > 1e-9 => {
                return Err(cfg("wdm.neighbor_baud_gbd", "must equal transceiver.baud_gbd".into()))
            }
            _ => {}
        }
        self.dbp.validate()?;
        self.train.validate().map_err(|e| match e {
            Error::Config { field, msg } => Error::Config { field: format!("train.{field}"), msg },
            e => e,
        })?;
        self.arch.validate().map_err(|e| match e {
            Error::Config { field, msg } => Error::Config { field: format!("arch.{field}"), msg },
            e => e,
        })?;
        let min = 2 * self.arch.n_taps + 1;
        if self.train.test_symbols <= 2 * self.arch.n_taps || self.train.validation_symbols < min {
            return Err(cfg("train.test_symbols", format!("validation and test frames need more than {} symbols", 2 * self.arch.n_taps)));
        }
        self.sim_sps()?;
        Ok(())
    }

    pub fn wdm_config(&self) -> Option<WdmConfig> {
        match self.kind {
            ScenarioKind::Sc => None,
            ScenarioKind::Wdm => Some(self.wdm.clone().unwrap_or_default()),
        }
    }

    pub fn sim_sps(&self) -> Result<usize> {
        let baud = self.transceiver.baud_rate();
        let auto = match self.wdm_config() {
            Some(w) if w.n_neighbors > 0 => (required_wdm_sample_rate(&w) / baud).ceil() as usize,
            _ => 4,
        };
        match self.transceiver.sim_sps {
            None => Ok(auto),
            Some(s) if s >= auto || self.kind == ScenarioKind::Sc => Ok(s),
            Some(s) => Err(Error::InsufficientSampleRate { required_hz: auto as f64 * baud, actual_hz: s as f64 * baud }),
        }
    }

    pub fn symbols_for(&self, role: DatasetRole) -> usize {
        match role {
            DatasetRole::Train => self.train.train_symbols,
            DatasetRole::Validation => self.train.validation_symbols,
            DatasetRole::Test => self.train.test_symbols,
        }
    }

    pub fn rx_filter(&self) -> Result<RrcFilter> {
        rrc_design(self.transceiver.roll_off, self.transceiver.rrc_span, RX_SPS)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetRole {
    Train,
    Validation,
    Test,
}

impl DatasetRole {
    pub const ALL: [DatasetRole; 3] = [DatasetRole::Train, DatasetRole::Validation, DatasetRole::Test];

    pub fn label(self) -> &'static str {
        match self {
            DatasetRole::Train => "train",
            DatasetRole::Validation => "validation",
            DatasetRole::Test => "test",
        }
    }
}

/// `(PRBS seed, noise seed)` of a dataset. Bits depend on the run seed and the role only,
/// so every launch power of a sweep carries the same data; the noise also depends on the power.
pub fn dataset_seeds(run_seed: u64, role: DatasetRole, power_dbm: f64) -> (u32, u64) {
    let r = seed::label(role.label());
    (
        seed::derive_prbs_seed(run_seed, &[r]),
        seed::derive(run_seed, &[r, power_dbm.to_bits()]),
    )
}

/// Received waveform of one dataset (at `RX_SPS`, after channel selection) with the
/// transmitted symbols it carries.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkDataset {
    pub role: DatasetRole,
    pub launch_power_dbm: f64,
    pub prbs_seed: u32,
    pub noise_seed: u64,
    /// Transmitted symbols, transient windows removed.
    pub tx: SymbolFrame,
    pub rx: SampledWaveform,
}

impl LinkDataset {
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        io::write_symbols(&dir.join(format!("{}_tx.fsy", self.role.label())), &self.tx)?;
        io::write_waveform(&dir.join(format!("{}_rx.fwv", self.role.label())), &self.rx)
    }

    pub fn read(dir: &Path, role: DatasetRole, power: f64, seeds: (u32, u64), baud_rate: f64) -> Result<Self> {
        Ok(Self {
            role,
            launch_power_dbm: power,
            prbs_seed: seeds.0,
            noise_seed: seeds.1,
            tx: io::read_symbols(&dir.join(format!("{}_tx.fsy", role.label())), baud_rate)?,
            rx: io::read_waveform(&dir.join(format!("{}_rx.fwv", role.label())))?,
        })
    }
}

/// Smallest length `>= n` whose only prime factors are 2, 3 and 5 (fast FFT sizes).
fn smooth_length(n: usize) -> usize {
    (n..)
        .find(|&m| {
            let mut k = m;
            for p in [2, 3, 5] {
                while k % p == 0 {
                    k /= p;
                }
            }
            k == 1
        })
        .unwrap()
}

/// Transmits one dataset through the scenario's link.
pub fn simulate_dataset(sc: &Scenario, role: DatasetRole, power_dbm: f64, run_seed: u64) -> Result<LinkDataset> {
    let (prbs, noise) = dataset_seeds(run_seed, role, power_dbm);
    let t = &sc.transceiver;
    let baud = t.baud_rate();
    let wanted = sc.symbols_for(role);
    let total = smooth_length(wanted + 2 * t.rrc_span);
    let bits = prbs_generate(prbs, 8 * total)?;
    let frame = qam16_map(&bits, baud)?;
    let sps = sc.sim_sps()?;
    let rrc = rrc_design(t.roll_off, t.rrc_span, sps)?;
    let wave = shape_and_upsample(&frame, &rrc, sps, power_dbm)?;
    let wdm = sc.wdm_config();
    let out = link_transmit(&wave, &sc.link, &sc.ssfm, wdm.as_ref(), power_dbm, noise)?;
    let rx = select_channel(&out, baud, RX_SPS, t.roll_off)?;
    let tx = frame.trimmed(t.rrc_span, total - t.rrc_span - wanted)?;
    Ok(LinkDataset { role, launch_power_dbm: power_dbm, prbs_seed: prbs, noise_seed: noise, tx, rx })
}

/// One simulated Q point (a row of the results table).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QPoint {
    pub scenario: ScenarioKind,
    pub equalizer: Equalizer,
    pub launch_power_dbm: f64,
    pub ber: f64,
    pub q_db: f64,
    pub seed: u64,
    pub train_symbols: usize,
    pub epochs: usize,
    pub bit_errors: u64,
    pub bits_counted: u64,
    /// Zero errors were counted; `q_db` is the bound at BER = 1/bits.
    pub q_lower_bound: bool,
    /// `ok`, or the failure message of this point.
    pub status: String,
    #[serde(skip)]
    pub wall_time_s: f64,
}

impl QPoint {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// What a processed point produced besides its Q value.
pub struct PointOutcome {
    pub point: QPoint,
    pub models: Option<(PolarizationPair, [TrainingLog; 2])>,
    pub dbp: Option<DbpConfig>,
}

/// Runs the receiver chains of a scenario on simulated datasets.
pub struct ScenarioRunner {
    pub scenario: Scenario,
    filter: RrcFilter,
}

impl ScenarioRunner {
    pub fn new(scenario: Scenario) -> Result<Self> {
        scenario.validate()?;
        let filter = scenario.rx_filter()?;
        Ok(Self { scenario, filter })
    }

    pub fn simulate(&self, role: DatasetRole, power_dbm: f64, run_seed: u64) -> Result<LinkDataset> {
        simulate_dataset(&self.scenario, role, power_dbm, run_seed)
    }

    /// Same-length frames: the first `tx.len()` symbols after the transient window.
    fn downsample(&self, wave: &SampledWaveform, tx: &SymbolFrame) -> Result<SymbolFrame> {
        let rx = matched_filter_downsample(wave, &self.filter, tx.baud_rate)?;
        if rx.len() < tx.len() {
            return Err(invalid(format!("received {} symbols, expected at least {}", rx.len(), tx.len())));
        }
        let extra = rx.len() - tx.len();
        let rx = rx.trimmed(0, extra)?;
        Ok(phase_amplitude_align(&rx, tx)?.0)
    }

    /// Linear chain: CD compensation, matched filter, data-aided phase/amplitude alignment.
    pub fn dsp_symbols(&self, ds: &LinkDataset) -> Result<SymbolFrame> {
        let cd = cdc_compensate(&ds.rx, self.scenario.link.total_dispersion_ps_nm(), self.scenario.link.span.reference_wavelength_nm);
        self.downsample(&cd, &ds.tx)
    }

    pub fn dbp_symbols(&self, ds: &LinkDataset, dbp: &DbpConfig) -> Result<SymbolFrame> {
        let out = dbp_compensate(&ds.rx, &self.scenario.link, dbp)?;
        self.downsample(&out, &ds.tx)
    }

    /// Picks DBP scales on validation data when the config asks for it.
    pub fn tune_dbp(&self, validation: &LinkDataset) -> Result<DbpConfig> {
        let dbp = &self.scenario.dbp;
        if !dbp.optimize {
            return Ok(dbp.clone());
        }
        let best = dbp_grid_search(&validation.rx, &validation.tx, &self.scenario.link, dbp, &self.filter)?;
        log::debug!("DBP grid: gamma x{:.3}, power x{:.3}, {} errors", best.gamma_scale, best.power_scale, best.bit_errors);
        Ok(DbpConfig { gamma_scale: best.gamma_scale, power_scale: best.power_scale, optimize: false, ..dbp.clone() })
    }

    /// Trains the x/y models of one neural equalizer on the linear-chain outputs.
    pub fn train_neural(
        &self,
        eq: Equalizer,
        train: &LinkDataset,
        validation: &LinkDataset,
        run_seed: u64,
    ) -> Result<(PolarizationPair, [TrainingLog; 2])> {
        let arch = eq.architecture().ok_or_else(|| invalid(format!("{eq} is not a neural equalizer")))?;
        let tr = self.dsp_symbols(train)?;
        let va = self.dsp_symbols(validation)?;
        let init = seed::derive(run_seed, &[train.launch_power_dbm.to_bits()]);
        let cfg = TrainConfig { shuffle_seed: seed::derive(init, &[seed::label("shuffle")]), ..self.scenario.train.clone() };
        train_pair(arch, &self.scenario.arch, &tr, &train.tx, &va, &validation.tx, &cfg, init)
    }

    /// BER over the interior symbols shared by every method (`N` dropped at each edge).
    fn interior_ber(&self, rx: &SymbolFrame, tx: &SymbolFrame, already_trimmed: bool) -> Result<BerResult> {
        let n = self.scenario.arch.n_taps;
        let tx = tx.trimmed(n, n)?;
        let rx = if already_trimmed { rx.clone() } else { rx.trimmed(n, n)? };
        frame_ber(&rx, &tx)
    }

    /// Runs one equalizer at one point. Datasets are `[train, validation, test]`.
    pub fn run_method(&self, eq: Equalizer, data: &[LinkDataset; 3], run_seed: u64) -> Result<PointOutcome> {
        let [train, val, test] = data;
        let t0 = Instant::now();
        let mut models = None;
        let mut dbp_cfg = None;
        let ber = match eq {
            Equalizer::Dsp => self.interior_ber(&self.dsp_symbols(test)?, &test.tx, false)?,
            Equalizer::Dbp => {
                let cfg = self.tune_dbp(val)?;
                let r = self.interior_ber(&self.dbp_symbols(test, &cfg)?, &test.tx, false)?;
                dbp_cfg = Some(cfg);
                r
            }
            _ => {
                let (pair, logs) = self.train_neural(eq, train, val, run_seed)?;
                let out = equalize(&pair, &self.dsp_symbols(test)?)?;
                let r = self.interior_ber(&out, &test.tx, true)?;
                models = Some((pair, logs));
                r
            }
        };
        let (q_db, lower) = ber.q_db()?;
        let neural = eq.is_neural();
        let point = QPoint {
            scenario: self.scenario.kind,
            equalizer: eq,
            launch_power_dbm: test.launch_power_dbm,
            ber: ber.ber,
            q_db,
            seed: run_seed,
            train_symbols: if neural { self.scenario.train.train_symbols } else { 0 },
            epochs: if neural { self.scenario.train.epochs } else { 0 },
            bit_errors: ber.bit_errors,
            bits_counted: ber.bits_counted,
            q_lower_bound: lower,
            status: "ok".into(),
            wall_time_s: t0.elapsed().as_secs_f64(),
        };
        Ok(PointOutcome { point, models, dbp: dbp_cfg })
    }

    /// Simulates the three datasets of a point (or uses the given ones) and runs every
    /// requested equalizer. Failures become rows with a non-`ok` status.
    pub fn run_point(
        &self,
        power_dbm: f64,
        run_seed: u64,
        equalizers: &[Equalizer],
        datasets: Option<[LinkDataset; 3]>,
        artifacts: Option<&Path>,
    ) -> Vec<QPoint> {
        let failed = |eq: Equalizer, msg: String| QPoint {
            scenario: self.scenario.kind,
            equalizer: eq,
            launch_power_dbm: power_dbm,
            ber: f64::NAN,
            q_db: f64::NAN,
            seed: run_seed,
            train_symbols: 0,
            epochs: 0,
            bit_errors: 0,
            bits_counted: 0,
            q_lower_bound: false,
            status: format!("failed: {msg}"),
            wall_time_s: 0.0,
        };
        let data = match datasets {
            Some(d) => d,
            None => {
                // the linear chain only needs the test set
                let test_only = equalizers.iter().all(|&e| e == Equalizer::Dsp);
                let sim = || -> Result<[LinkDataset; 3]> {
                    let test = self.simulate(DatasetRole::Test, power_dbm, run_seed)?;
                    if test_only {
                        return Ok([test.clone(), test.clone(), test]);
                    }
                    Ok([
                        self.simulate(DatasetRole::Train, power_dbm, run_seed)?,
                        self.simulate(DatasetRole::Validation, power_dbm, run_seed)?,
                        test,
                    ])
                };
                match sim() {
                    Ok(d) => d,
                    Err(e) => return equalizers.iter().map(|&eq| failed(eq, e.to_string())).collect(),
                }
            }
        };
        equalizers
            .iter()
            .map(|&eq| match self.run_method(eq, &data, run_seed) {
                Ok(out) => {
                    if let (Some(dir), Some((pair, logs))) = (artifacts, &out.models) {
                        let stem = model_stem(out.point.scenario, eq, power_dbm, run_seed);
                        if let Err(e) = save_models(dir, &stem, pair, logs) {
                            log::warn!("could not save {eq} models: {e}");
                        }
                    }
                    log::info!(
                        "{} {eq} {:+.1} dBm seed {run_seed}: Q {:.3} dB (BER {:.3e})",
                        self.scenario.kind, power_dbm, out.point.q_db, out.point.ber
                    );
                    out.point
                }
                Err(e) => {
                    log::warn!("{} {eq} {power_dbm:+.1} dBm seed {run_seed} failed: {e}", self.scenario.kind);
                    failed(eq, e.to_string())
                }
            })
            .collect()
    }
}

/// File stem of the models trained for one (scenario, equalizer, power, seed).
pub fn model_stem(kind: ScenarioKind, eq: Equalizer, power_dbm: f64, seed: u64) -> String {
    format!("{kind}_{eq}_p{power_dbm:+.2}_s{seed}")
}

/// Writes `<stem>_{x,y}.fnn` checkpoints and `<stem>_{x,y}_log.csv` training logs.
pub fn save_models(dir: &Path, stem: &str, pair: &PolarizationPair, logs: &[TrainingLog; 2]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    save_checkpoint(&dir.join(format!("{stem}_x.fnn")), &pair.x)?;
    save_checkpoint(&dir.join(format!("{stem}_y.fnn")), &pair.y)?;
    logs[0].write_csv(&dir.join(format!("{stem}_x_log.csv")))?;
    logs[1].write_csv(&dir.join(format!("{stem}_y_log.csv")))?;
    Ok(())
}

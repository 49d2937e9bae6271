//! Bayesian optimisation of equalizer hyperparameters: a GP surrogate on log10(BER)
//! and expected improvement maximised over a seeded random candidate pool.

mod gp;
mod space;

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub use gp::{expected_improvement, gp_fit, log_objective, GaussianProcess, BER_FLOOR};
pub use space::{HyperPoint, IntRange, SearchSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialStatus {
    Ok,
    Diverged,
}

impl fmt::Display for TrialStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrialStatus::Ok => "ok",
            TrialStatus::Diverged => "diverged",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub index: usize,
    pub point: HyperPoint,
    /// Validation BER in `[0, 0.5]`; `None` when the trial diverged.
    pub objective: Option<f64>,
    pub status: TrialStatus,
    /// Proposed by the acquisition function rather than drawn at random.
    pub guided: bool,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoConfig {
    /// Total number of trials, random ones included.
    pub budget: usize,
    pub init_random: usize,
    /// Random candidates scored by EI per guided trial.
    pub candidates: usize,
    pub seed: u64,
}

impl Default for BoConfig {
    fn default() -> Self {
        Self { budget: 20, init_random: 5, candidates: 1024, seed: 0 }
    }
}

impl BoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.budget <= self.init_random {
            return Err(Error::Config {
                field: "hyperopt.budget".into(),
                msg: format!("budget ({}) must exceed init_random ({})", self.budget, self.init_random),
            });
        }
        if self.init_random < 2 {
            return Err(Error::Config { field: "hyperopt.init_random".into(), msg: "at least 2 random trials are needed to fit the surrogate".into() });
        }
        if self.candidates < 1024 {
            return Err(Error::Config { field: "hyperopt.candidates".into(), msg: "the candidate pool must hold at least 1024 points".into() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct BoOutcome {
    pub best: Trial,
    pub history: Vec<Trial>,
}

impl BoOutcome {
    /// Lowest objective seen up to and including each trial (diverged trials repeat the previous value).
    pub fn running_best(&self) -> Vec<Option<f64>> {
        running_best(&self.history)
    }
}

fn running_best(history: &[Trial]) -> Vec<Option<f64>> {
    let mut best: Option<f64> = None;
    history
        .iter()
        .map(|t| {
            if let Some(v) = t.objective {
                best = Some(best.map_or(v, |b| b.min(v)));
            }
            best
        })
        .collect()
}

/// A search that could not produce a best trial; the trials run so far are kept.
#[derive(Debug)]
pub struct SearchFailure {
    pub history: Vec<Trial>,
    pub source: Error,
}

impl fmt::Display for SearchFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "hyperparameter search failed after {} trials: {}", self.history.len(), self.source)
    }
}

impl std::error::Error for SearchFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

impl From<SearchFailure> for Error {
    fn from(f: SearchFailure) -> Self {
        f.source
    }
}

fn run_trial<F>(index: usize, point: HyperPoint, guided: bool, objective: &mut F) -> Result<Trial>
where
    F: FnMut(&HyperPoint) -> Result<f64>,
{
    let t0 = Instant::now();
    let (objective, status) = match objective(&point) {
        Ok(v) if v.is_finite() => (Some(v.clamp(0.0, 0.5)), TrialStatus::Ok),
        Ok(_) | Err(Error::Diverged { .. }) | Err(Error::NonFinite { .. }) => (None, TrialStatus::Diverged),
        Err(e) => return Err(e),
    };
    log::info!("trial {index}{} {point}: {}", if guided { " (EI)" } else { "" }, match objective {
        Some(v) => format!("BER {v:.4e}"),
        None => "diverged".into(),
    });
    Ok(Trial { index, point, objective, status, guided, wall_time_s: t0.elapsed().as_secs_f64() })
}

/// Random initial trials followed by EI-guided ones. `objective` returns the validation
/// BER of a point; `Diverged`/`NonFinite` errors mark the trial diverged, other errors
/// abort the search.
pub fn bo_search<F>(space: &SearchSpace, cfg: &BoConfig, mut objective: F) -> std::result::Result<BoOutcome, SearchFailure>
where
    F: FnMut(&HyperPoint) -> Result<f64>,
{
    let mut history: Vec<Trial> = Vec::with_capacity(cfg.budget);
    macro_rules! fail {
        ($e:expr) => {
            return Err(SearchFailure { history, source: $e })
        };
    }
    if let Err(e) = space.validate().and_then(|_| cfg.validate()) {
        fail!(e);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(cfg.seed, &[seed::label("init")]));
    let mut seen: Vec<HyperPoint> = Vec::new();
    while history.len() < cfg.init_random {
        let mut p = space.sample(&mut rng);
        for _ in 0..1000 {
            if !seen.contains(&p) || seen.len() as f64 >= space.cardinality() {
                break;
            }
            p = space.sample(&mut rng);
        }
        seen.push(p);
        match run_trial(history.len(), p, false, &mut objective) {
            Ok(t) => history.push(t),
            Err(e) => fail!(e),
        }
    }
    while history.len() < cfg.budget {
        if history.iter().filter(|t| t.objective.is_some()).count() < 2 {
            // not enough data for a surrogate; keep exploring at random
            let p = space.sample(&mut rng);
            seen.push(p);
            match run_trial(history.len(), p, false, &mut objective) {
                Ok(t) => history.push(t),
                Err(e) => fail!(e),
            }
            continue;
        }
        let gp = match gp_fit(space, &history) {
            Ok(g) => g,
            Err(e) => fail!(e),
        };
        let best = history.iter().filter_map(|t| t.objective).map(log_objective).fold(f64::INFINITY, f64::min);
        let mut pool_rng = ChaCha8Rng::seed_from_u64(seed::derive(cfg.seed, &[seed::label("pool"), history.len() as u64]));
        let mut pick: Option<(f64, HyperPoint)> = None;
        let mut pool: Vec<HyperPoint> = Vec::with_capacity(cfg.candidates);
        for _ in 0..cfg.candidates {
            let p = space.sample(&mut pool_rng);
            if seen.contains(&p) || pool.contains(&p) {
                continue;
            }
            pool.push(p);
            let (mu, var) = gp.predict(&space.encode(&p));
            let ei = expected_improvement(mu, var.sqrt(), best);
            if pick.as_ref().is_none_or(|(b, _)| ei > *b) {
                pick = Some((ei, p));
            }
        }
        let Some((_, p)) = pick else {
            log::warn!("search space exhausted after {} trials", history.len());
            break;
        };
        seen.push(p);
        match run_trial(history.len(), p, true, &mut objective) {
            Ok(t) => history.push(t),
            Err(e) => fail!(e),
        }
    }
    let best = history
        .iter()
        .filter(|t| t.objective.is_some())
        .min_by(|a, b| a.objective.unwrap().total_cmp(&b.objective.unwrap()))
        .cloned();
    match best {
        Some(best) => Ok(BoOutcome { best, history }),
        None => {
            let n = history.len();
            Err(SearchFailure { history, source: Error::AllTrialsDiverged { trials: n } })
        }
    }
}

/// Writes the trial history (deterministic columns) and a `<stem>_timings.csv` sidecar
/// with per-trial wall time.
pub fn write_history(path: &Path, history: &[Trial]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "trial,guided,n_taps,filters,hidden,kernel,batch,activation,objective,status,running_best")?;
    for (t, best) in history.iter().zip(running_best(history)) {
        let p = &t.point;
        let fmt_opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:e}"));
        writeln!(
            f,
            "{},{},{},{},{},{},{},{},{},{},{}",
            t.index, t.guided, p.n_taps, p.filters, p.hidden, p.kernel, p.batch, p.activation,
            fmt_opt(t.objective), t.status, fmt_opt(best)
        )?;
    }
    f.flush()?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("history");
    let mut g = std::io::BufWriter::new(std::fs::File::create(path.with_file_name(format!("{stem}_timings.csv")))?);
    writeln!(g, "trial,wall_time_s")?;
    for t in history {
        writeln!(g, "{},{:.3}", t.index, t.wall_time_s)?;
    }
    g.flush()?;
    Ok(())
}

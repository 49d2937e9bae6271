use super::{Equalizer, ScenarioKind};

const REFERENCE_CSV: &str = include_str!("../../data/reference_curves.csv");

/// Experimental Q-factor curves (single channel and WDM) shipped with the crate.
/// They are an experimental reference for plots, not a simulation target.
#[derive(Debug, Clone)]
pub struct ReferenceCurves {
    points: Vec<(ScenarioKind, Equalizer, f64, f64)>,
}

impl ReferenceCurves {
    pub fn embedded() -> Self {
        let mut rdr = csv::Reader::from_reader(REFERENCE_CSV.as_bytes());
        let points = rdr
            .records()
            .map(|r| {
                let r = r.expect("embedded reference table is valid CSV");
                (
                    r[0].parse().expect("scenario"),
                    r[1].parse().expect("equalizer"),
                    r[2].parse().expect("power"),
                    r[3].parse().expect("q"),
                )
            })
            .collect();
        Self { points }
    }

    pub fn raw_csv() -> &'static str {
        REFERENCE_CSV
    }

    pub fn lookup(&self, scenario: ScenarioKind, eq: Equalizer, power_dbm: f64) -> Option<f64> {
        self.points
            .iter()
            .find(|(s, e, p, _)| *s == scenario && *e == eq && (p - power_dbm).abs() < 1e-9)
            .map(|t| t.3)
    }

    /// `(power, q)` pairs in ascending power.
    pub fn curve(&self, scenario: ScenarioKind, eq: Equalizer) -> Vec<(f64, f64)> {
        let mut c: Vec<(f64, f64)> = self
            .points
            .iter()
            .filter(|(s, e, _, _)| *s == scenario && *e == eq)
            .map(|t| (t.2, t.3))
            .collect();
        c.sort_by(|a, b| a.0.total_cmp(&b.0));
        c
    }

    /// Optimal launch power and peak Q of one curve.
    pub fn peak(&self, scenario: ScenarioKind, eq: Equalizer) -> Option<(f64, f64)> {
        self.curve(scenario, eq).into_iter().max_by(|a, b| a.1.total_cmp(&b.1))
    }
}

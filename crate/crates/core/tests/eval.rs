use fibereq::eval::{
    ber_from_q_db, compare_to_reference, erfc, q_factor_from_ber, read_results, sweep_launch_power, write_results,
    Equalizer, ReferenceCurves, Scenario, ScenarioKind, ScenarioRunner, SweepOptions,
};
use fibereq::Error;
use proptest::prelude::*;

/// Bisection of `erfc(q / sqrt 2) / 2 = ber` for the linear Q, returned in dB.
fn q_by_bisection(ber: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if 0.5 * erfc(mid / 2f64.sqrt()) > ber {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    20.0 * (0.5 * (lo + hi)).log10()
}

#[test]
fn q_of_one_in_a_thousand() {
    let q = q_factor_from_ber(1e-3).unwrap();
    assert!((q - q_by_bisection(1e-3)).abs() < 1e-6);
    assert!((q - 9.79).abs() < 0.01, "{q}");
}

#[test]
fn q_is_zero_db_at_one_sigma() {
    let q = q_factor_from_ber(0.158655).unwrap();
    assert!(q.abs() < 1e-4, "{q}");
}

#[test]
fn q_rejects_out_of_domain() {
    for ber in [0.0, 0.5, 0.7, -1e-3, f64::NAN] {
        assert!(matches!(q_factor_from_ber(ber), Err(Error::OutOfDomain { .. })), "{ber}");
    }
}

proptest! {
    #[test]
    fn q_round_trips_through_ber(q in 0.5f64..16.0) {
        let back = q_factor_from_ber(ber_from_q_db(q)).unwrap();
        prop_assert!((back - q).abs() < 1e-6, "{} vs {}", back, q);
    }

    #[test]
    fn q_is_decreasing_in_ber(a in 1e-9f64..0.49, b in 1e-9f64..0.49) {
        prop_assume!(a < b);
        prop_assert!(q_factor_from_ber(a).unwrap() > q_factor_from_ber(b).unwrap());
    }
}

#[test]
fn reference_lookups() {
    let r = ReferenceCurves::embedded();
    assert_eq!(r.lookup(ScenarioKind::Sc, Equalizer::Crnn, 1.0), Some(9.19));
    assert_eq!(r.lookup(ScenarioKind::Sc, Equalizer::Dsp, -3.0), Some(8.2));
    assert_eq!(r.lookup(ScenarioKind::Wdm, Equalizer::Crnn, -2.0), Some(8.37));
    assert_eq!(r.lookup(ScenarioKind::Wdm, Equalizer::Dsp, -4.0), Some(7.33));
    assert_eq!(r.peak(ScenarioKind::Sc, Equalizer::Crnn).map(|p| p.0), Some(1.0));
    assert_eq!(r.lookup(ScenarioKind::Sc, Equalizer::Crnn, 0.5), None);
}

#[test]
fn unknown_equalizer_label_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let runner = ScenarioRunner::new(tiny_scenario()).unwrap();
    let pts = sweep_launch_power(&runner, &[0.0], &[Equalizer::Dsp], &[1], &SweepOptions::default()).unwrap();
    let path = dir.path().join("results.csv");
    write_results(&path, &pts).unwrap();
    assert_eq!(read_results(&path).unwrap().len(), 1);
    let text = std::fs::read_to_string(&path).unwrap().replace(",dsp,", ",volterra,");
    std::fs::write(&path, text).unwrap();
    assert!(read_results(&path).is_err());
}

fn tiny_scenario() -> Scenario {
    let mut sc = Scenario::new(ScenarioKind::Sc);
    sc.link.n_spans = 2;
    sc.link.amp_noise_figure_db = 13.0;
    sc.ssfm.step_km = 5.0;
    sc.train.test_symbols = 1 << 12;
    sc.dbp.grid_points = 3;
    sc
}

#[test]
fn empty_power_list_gives_empty_sweep() {
    let runner = ScenarioRunner::new(tiny_scenario()).unwrap();
    let pts = sweep_launch_power(&runner, &[], &[Equalizer::Dsp], &[0], &SweepOptions::default()).unwrap();
    assert!(pts.is_empty());
}

#[test]
fn sweep_is_deterministic_and_ordered() {
    let runner = ScenarioRunner::new(tiny_scenario()).unwrap();
    let eqs = [Equalizer::Dsp, Equalizer::Dbp];
    let run = || {
        let mut pts = sweep_launch_power(&runner, &[2.0, -2.0], &eqs, &[3, 4], &SweepOptions::default()).unwrap();
        for p in &mut pts {
            p.wall_time_s = 0.0;
        }
        pts
    };
    let a = run();
    assert_eq!(a.len(), 8);
    assert_eq!(a, run());
    let keys: Vec<(Equalizer, f64, u64)> = a.iter().map(|p| (p.equalizer, p.launch_power_dbm, p.seed)).collect();
    let mut sorted = keys.clone();
    sorted.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)).then(x.2.cmp(&y.2)));
    assert_eq!(keys, sorted);
    assert!(a.iter().all(|p| p.is_ok()));
}

#[test]
fn comparison_reports_both_curves() {
    let runner = ScenarioRunner::new(tiny_scenario()).unwrap();
    let pts = sweep_launch_power(&runner, &[-3.0, 1.0], &[Equalizer::Dsp], &[0], &SweepOptions::default()).unwrap();
    let rep = compare_to_reference(&pts, &ReferenceCurves::embedded()).unwrap();
    let c = rep.curve(ScenarioKind::Sc, Equalizer::Dsp).unwrap();
    assert_eq!(c.simulated.len(), 2);
    assert_eq!(c.ref_peak.map(|p| p.0), Some(-3.0));
    assert!(rep.to_markdown().contains(fibereq::eval::REFERENCE_LABEL));
}

/// Mean Q of the linear chain over `seeds` at each power of the desk link.
fn dsp_curve(powers: &[f64], seeds: &[u64]) -> Vec<f64> {
    let mut sc = Scenario::new(ScenarioKind::Sc);
    sc.link.amp_noise_figure_db = 13.0;
    sc.ssfm.step_km = 1.0;
    sc.train.test_symbols = 1 << 14;
    let runner = ScenarioRunner::new(sc).unwrap();
    let pts = sweep_launch_power(&runner, powers, &[Equalizer::Dsp], seeds, &SweepOptions::default()).unwrap();
    powers
        .iter()
        .map(|&p| {
            let qs: Vec<f64> = pts.iter().filter(|q| q.launch_power_dbm == p).map(|q| q.q_db).collect();
            qs.iter().sum::<f64>() / qs.len() as f64
        })
        .collect()
}

#[test]
fn linear_chain_curve_is_unimodal() {
    let powers: Vec<f64> = (-6..=5).map(f64::from).collect();
    let q = dsp_curve(&powers, &[0, 1, 2]);
    let peak = (0..q.len()).max_by(|&a, &b| q[a].total_cmp(&q[b])).unwrap();
    let slack = 0.2;
    for i in 0..q.len() - 1 {
        if i < peak {
            assert!(q[i + 1] >= q[i] - slack, "rising side broken at {} dBm: {q:?}", powers[i + 1]);
        } else {
            assert!(q[i + 1] <= q[i] + slack, "falling side broken at {} dBm: {q:?}", powers[i + 1]);
        }
    }
    assert!(peak > 0 && peak < q.len() - 1, "optimum at the sweep edge: {q:?}");
}

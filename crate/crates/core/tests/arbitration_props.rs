use argus_core::arbitration::{
    arguing_machines_error, detector_metrics, ensemble_error, evaluate, random_arbitrator_error,
    random_arbitrator_monte_carlo, topk_error, ArbitrationOptions, EnsembleFusion,
};
use argus_core::synthgen::{gen_class_log, ClassLogSpec};
use argus_core::{ArbitrationError, ClassLog, ClassRecord, Execution, Method, System};
use proptest::prelude::*;

fn record(id: &str, truth: Option<u32>, p: [u32; 5], s: [u32; 5]) -> ClassRecord {
    ClassRecord {
        item_id: id.into(),
        truth,
        primary_topk: p.to_vec(),
        secondary_topk: s.to_vec(),
        primary_probs: None,
        secondary_probs: None,
    }
}

/// Builds a feasible spec from the six (agreement, primary outcome) cells.
fn spec_from_cells(c: [usize; 6], num_classes: u32, seed: u64) -> ClassLogSpec {
    ClassLogSpec {
        n: c.iter().sum(),
        num_classes,
        fail1: c[1] + c[2] + c[4] + c[5],
        fail5: c[2] + c[5],
        disagree: c[3] + c[4] + c[5],
        tp1: c[4] + c[5],
        tp5: c[5],
        seed,
        secondary_fail1: None,
        secondary_fail5: None,
        ensemble_fail1: None,
        ensemble_fail5: None,
        with_probs: false,
    }
}

struct Oracle {
    primary: [usize; 2],
    secondary: [usize; 2],
    residual: [usize; 2],
    tp: [usize; 2],
    disagreements: usize,
}

fn oracle(log: &ClassLog) -> Oracle {
    let mut o = Oracle {
        primary: [0; 2],
        secondary: [0; 2],
        residual: [0; 2],
        tp: [0; 2],
        disagreements: 0,
    };
    for r in log.records() {
        let t = r.truth.unwrap();
        let d = r.primary_topk[0] != r.secondary_topk[0];
        o.disagreements += d as usize;
        for (j, k) in [1usize, 5].into_iter().enumerate() {
            let pf = !r.primary_topk[..k].contains(&t);
            let sf = !r.secondary_topk[..k].contains(&t);
            o.primary[j] += pf as usize;
            o.secondary[j] += sf as usize;
            o.residual[j] += (pf && !d) as usize;
            o.tp[j] += (pf && d) as usize;
        }
    }
    o
}

fn pct(c: usize, n: usize) -> f64 {
    100.0 * c as f64 / n as f64
}

fn check_log(log: &ClassLog) -> Result<(), TestCaseError> {
    let n = log.len();
    let o = oracle(log);
    for (j, k) in [1usize, 5].into_iter().enumerate() {
        let primary = topk_error(log, System::Primary, k).unwrap();
        prop_assert_eq!(primary, pct(o.primary[j], n));
        prop_assert_eq!(topk_error(log, System::Secondary, k).unwrap(), pct(o.secondary[j], n));
        let (am, review) = arguing_machines_error(log, k).unwrap();
        prop_assert_eq!(am, pct(o.residual[j], n));
        prop_assert_eq!(review, o.disagreements as f64 / n as f64);
        prop_assert!(am <= primary);

        let m = detector_metrics(log, k).unwrap();
        prop_assert_eq!(m.true_positives, o.tp[j]);
        prop_assert_eq!(m.disagreements, o.disagreements);
        prop_assert_eq!(m.failures, o.primary[j]);
        match m.recall_pct {
            Some(recall) => prop_assert!((am - primary * (1.0 - recall / 100.0)).abs() <= 1e-9),
            None => prop_assert_eq!(am, 0.0),
        }
        if let (Some(p), Some(r)) = (m.precision_pct, m.recall_pct) {
            let lhs = p * m.disagreements as f64;
            let rhs = r * m.failures as f64;
            prop_assert!((lhs - rhs).abs() <= 1e-9 * lhs.max(1.0));
            prop_assert!((lhs - 100.0 * m.true_positives as f64).abs() <= 1e-9 * lhs.max(1.0));
        }
    }
    Ok(())
}

#[test]
fn reference_log_identities() {
    let log = gen_class_log(&ClassLogSpec::reference(2024)).unwrap();
    check_log(&log).unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn identities_on_random_feasible_specs(
        cells in prop::array::uniform6(0usize..120),
        num_classes in 11u32..60,
        seed in any::<u64>(),
    ) {
        prop_assume!(cells.iter().sum::<usize>() > 0);
        let spec = spec_from_cells(cells, num_classes, seed);
        let log = gen_class_log(&spec).unwrap();
        let o = oracle(&log);
        prop_assert_eq!(o.primary, [spec.fail1, spec.fail5]);
        prop_assert_eq!(o.tp, [spec.tp1, spec.tp5]);
        prop_assert_eq!(o.disagreements, spec.disagree);
        check_log(&log)?;
    }
}

#[test]
fn degenerate_specs() {
    // no disagreements: arbitration reduces to the primary system
    let log = gen_class_log(&spec_from_cells([50, 20, 10, 0, 0, 0], 20, 1)).unwrap();
    for k in [1, 5] {
        let (am, review) = arguing_machines_error(&log, k).unwrap();
        assert_eq!(am, topk_error(&log, System::Primary, k).unwrap());
        assert_eq!(review, 0.0);
    }
    // every failure disagrees and every disagreement fails
    let log = gen_class_log(&spec_from_cells([70, 0, 0, 0, 20, 10], 20, 1)).unwrap();
    assert_eq!(arguing_machines_error(&log, 1).unwrap().0, 0.0);
    let m = detector_metrics(&log, 1).unwrap();
    assert_eq!((m.precision_pct, m.recall_pct), (Some(100.0), Some(100.0)));
}

#[test]
fn undefined_detector_rates() {
    let log = ClassLog::new(10, vec![record("a", Some(0), [0, 1, 2, 3, 4], [0, 2, 1, 3, 4])]).unwrap();
    let m = detector_metrics(&log, 1).unwrap();
    assert_eq!((m.precision_pct, m.recall_pct), (None, None));
}

#[test]
fn precondition_errors() {
    let empty = ClassLog::new(10, vec![]).unwrap();
    assert!(matches!(topk_error(&empty, System::Primary, 1), Err(ArbitrationError::EmptyLog)));
    let no_truth = ClassLog::new(10, vec![record("x", None, [0, 1, 2, 3, 4], [0, 1, 2, 3, 4])]).unwrap();
    assert!(matches!(
        arguing_machines_error(&no_truth, 1),
        Err(ArbitrationError::MissingTruth(id)) if id == "x"
    ));
    let log = ClassLog::new(10, vec![record("x", Some(1), [0, 1, 2, 3, 4], [0, 1, 2, 3, 4])]).unwrap();
    assert!(topk_error(&log, System::Primary, 6).is_err());
    assert!(topk_error(&log, System::Primary, 0).is_err());
    assert!(matches!(
        ensemble_error(&log, 1),
        Err(ArbitrationError::MissingProbs { item_id, .. }) if item_id == "x"
    ));
    assert!(random_arbitrator_error(&log, 1.5, 1, 0).is_err());
    assert!(random_arbitrator_error(&log, -0.1, 1, 0).is_err());
}

#[test]
fn ensemble_hand_case() {
    let mut p = vec![0.0; 10];
    p[2] = 0.6;
    p[1] = 0.4;
    let mut s = vec![0.0; 10];
    s[1] = 0.9;
    s[2] = 0.1;
    let r = ClassRecord {
        item_id: "a".into(),
        truth: Some(1),
        primary_topk: vec![2, 1, 0, 3, 4],
        secondary_topk: vec![1, 2, 0, 3, 4],
        primary_probs: Some(p.clone()),
        secondary_probs: Some(s),
    };
    let log = ClassLog::new(10, vec![r.clone()]).unwrap();
    assert_eq!(topk_error(&log, System::Primary, 1).unwrap(), 100.0);
    assert_eq!(ensemble_error(&log, 1).unwrap(), 0.0);

    // identical vectors: the ensemble is the primary system
    let same = ClassRecord {
        secondary_topk: r.primary_topk.clone(),
        secondary_probs: Some(p),
        ..r
    };
    let log = ClassLog::new(10, vec![same]).unwrap();
    assert_eq!(ensemble_error(&log, 1).unwrap(), topk_error(&log, System::Primary, 1).unwrap());
}

#[test]
fn random_arbitrator_extremes_and_expectation() {
    let log = gen_class_log(&spec_from_cells([300, 150, 60, 120, 90, 80], 30, 9)).unwrap();
    for k in [1, 5] {
        let primary = topk_error(&log, System::Primary, k).unwrap();
        assert_eq!(random_arbitrator_error(&log, 0.0, k, 3).unwrap(), primary);
        assert_eq!(random_arbitrator_error(&log, 1.0, k, 3).unwrap(), 0.0);
    }
    let stats = random_arbitrator_monte_carlo(&log, 0.3, &[1, 5], 100, 2000, Execution::default()).unwrap();
    for s in &stats {
        let primary = topk_error(&log, System::Primary, s.k).unwrap();
        let n = log.len() as f64;
        assert_eq!(s.reviewed, (0.3 * n).floor() as usize);
        let expected = primary * (1.0 - s.reviewed as f64 / n);
        assert!((s.expected_pct - expected).abs() < 1e-9);
        assert!((s.mean_pct - expected).abs() <= 3.0 * s.stderr_pct, "{s:?}");
        assert!(s.q005_pct <= s.mean_pct && s.mean_pct <= s.q995_pct);
        assert_eq!(s.single_draw_pct, random_arbitrator_error(&log, 0.3, s.k, 100).unwrap());
        // the empirical spread tracks the closed-form one
        let empirical_sd = s.stderr_pct * (s.draws as f64).sqrt();
        assert!((empirical_sd / s.draw_sd_pct - 1.0).abs() < 0.1, "{s:?}");
    }
}

#[test]
fn evaluate_is_deterministic_and_parallel_agnostic() {
    let spec = ClassLogSpec {
        with_probs: true,
        ..spec_from_cells([200, 60, 30, 50, 40, 20], 16, 4)
    };
    let log = gen_class_log(&spec).unwrap();
    let run = |exec| {
        let opts = ArbitrationOptions {
            seed: 77,
            draws: 200,
            ensemble: Some(EnsembleFusion::default()),
            exec,
            ..ArbitrationOptions::default()
        };
        evaluate(&log, &opts).unwrap()
    };
    let a = run(Execution::Sequential);
    for exec in Execution::available() {
        let b = run(*exec);
        assert_eq!(a.methods, b.methods);
        assert_eq!(a.detectors, b.detectors);
        assert_eq!(a.random, b.random);
    }
    let order: Vec<Method> = a.methods.iter().map(|m| m.method).collect();
    assert_eq!(
        order,
        [
            Method::PrimaryOnly,
            Method::SecondaryOnly,
            Method::Ensemble,
            Method::RandomArbitrator,
            Method::ArguingMachines
        ]
    );
    for m in &a.methods {
        if matches!(m.method, Method::PrimaryOnly | Method::SecondaryOnly | Method::Ensemble) {
            assert_eq!(m.review_fraction, 0.0);
        }
        assert!(m.error_pct.values().all(|e| (0.0..=100.0).contains(e)));
    }
}

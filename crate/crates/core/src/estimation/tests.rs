use super::*;
use crate::error::Error;
use crate::numerics::gradcheck::{finite_difference_gradient, relative_error, FD_STEP};
use crate::numerics::{sigmoid, Matrix, Tape};
use crate::soft::argmax;
use crate::tournament::AgentRegistry;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dataset(n: usize, recs: &[(usize, usize, u8)]) -> ComparisonDataset {
    ComparisonDataset::from_records(
        AgentRegistry::numbered(n),
        recs.iter().map(|&(a, b, y)| Comparison { a, b, y }).collect(),
    )
    .unwrap()
}

/// `m` outcomes per pair drawn from BTL strengths `lam`.
fn btl_data(rng: &mut ChaCha8Rng, lam: &[f64], m: usize) -> ComparisonDataset {
    let n = lam.len();
    let mut recs = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            let p = sigmoid(lam[a] - lam[b]);
            for _ in 0..m {
                recs.push((a, b, rng.random_bool(p) as u8));
            }
        }
    }
    dataset(n, &recs)
}

fn per_record_loss(lam: &[f64], data: &ComparisonDataset) -> f64 {
    let mut total = 0.0;
    for r in data.records() {
        let p = sigmoid(lam[r.a] - lam[r.b]).clamp(P_FLOOR, 1.0 - P_FLOOR);
        let y = r.y as f64;
        total -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
    }
    total / data.len() as f64
}

#[test]
fn empirical_frequencies() {
    let mut recs = vec![(0, 1, 1); 7];
    recs.extend(vec![(1, 0, 1); 3]);
    let p = empirical_tournament(&dataset(3, &recs));
    assert_eq!(p.get(0, 1), 0.7);
    assert_eq!(p.get(1, 0) + p.get(0, 1), 1.0);
    assert_eq!(p.get(0, 2), 0.5);
    assert_eq!(p.get(2, 1), 0.5);
    let empty = empirical_tournament(&ComparisonDataset::new(AgentRegistry::numbered(4)));
    assert_eq!(empty, crate::tournament::ProbTournament::uniform(4));
}

#[test]
fn dataset_rejects_bad_records() {
    let mut d = ComparisonDataset::new(AgentRegistry::numbered(3));
    assert!(d.push(Comparison { a: 1, b: 1, y: 1 }).is_err());
    assert!(d.push(Comparison { a: 0, b: 3, y: 1 }).is_err());
    assert!(d.push(Comparison { a: 0, b: 1, y: 2 }).is_err());
    assert!(d.is_empty());
    d.push(Comparison { a: 0, b: 1, y: 0 }).unwrap();
    assert_eq!(d.wins(1, 0), 1);
    assert_eq!(d.total(0, 1), 1);
    let r = d.resample(&[0, 0, 0]);
    assert_eq!(r.wins(1, 0), 3);
}

#[test]
fn btl_probability_values() {
    let p = BtlParams::new(vec![1.0, 1.0, -1.0]).unwrap();
    assert_eq!(btl_probability(&p, 0, 1), 0.5);
    assert!((btl_probability(&p, 0, 2) - 0.8807970779778823).abs() < 1e-15);
    assert!((btl_probability(&p, 0, 2) + btl_probability(&p, 2, 0) - 1.0).abs() < 1e-15);
    assert!(p.lambda().iter().sum::<f64>().abs() < 1e-15);
    assert!(BtlParams::new(vec![f64::NAN]).is_err());
}

#[test]
fn ce_loss_values() {
    let data = dataset(2, &[(0, 1, 1), (1, 0, 0), (0, 1, 1)]);
    let sure = BtlParams::new(vec![40.0, -40.0]).unwrap();
    assert!(ce_loss(&sure, &data) < 1e-11);
    let flat = BtlParams::zeros(2);
    assert!((ce_loss(&flat, &data) - std::f64::consts::LN_2).abs() < 1e-15);
}

#[test]
fn ce_matches_per_record_formula_and_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10 {
        let lam: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
        let m = rng.random_range(1..6);
        let data = btl_data(&mut rng, &lam, m);
        let probe: Vec<f64> = (0..5).map(|_| rng.random_range(-1.5..1.5)).collect();
        let params = BtlParams::new(probe.clone()).unwrap();
        assert!((ce_loss(&params, &data) - per_record_loss(params.lambda(), &data)).abs() < 1e-12);
        let (_, g) = ce_loss_and_grad(&params, &data);
        let num = finite_difference_gradient(
            |m| per_record_loss(m.as_slice(), &data),
            &Matrix::column(params.lambda().to_vec()),
            FD_STEP,
        );
        assert!(relative_error(&Matrix::column(g), &num) < 1e-6);
    }
}

#[test]
fn ce_is_gauge_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let lam = [0.3, -1.0, 0.9, 0.1];
    let data = btl_data(&mut rng, &lam, 4);
    let base = per_record_loss(&lam, &data);
    for shift in [-3.0, 0.5, 10.0] {
        let moved: Vec<f64> = lam.iter().map(|v| v + shift).collect();
        assert!((per_record_loss(&moved, &data) - base).abs() < 1e-12);
    }
}

#[test]
fn fit_recovers_strengths() {
    let truth = [1.0, 0.5, 0.0, -0.5, -1.0];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let data = btl_data(&mut rng, &truth, 500);
    let fit = fit_btl(&data, &TrainConfig::default()).unwrap();
    for (a, b) in fit.lambda().iter().zip(truth) {
        assert!((a - b).abs() < 0.1, "{a} vs {b}");
    }
}

#[test]
fn symmetric_data_gives_zero_strengths() {
    let mut recs = Vec::new();
    for a in 0..4 {
        for b in a + 1..4 {
            for _ in 0..5 {
                recs.push((a, b, 1));
                recs.push((a, b, 0));
            }
        }
    }
    let fit = fit_btl(&dataset(4, &recs), &TrainConfig::default()).unwrap();
    assert!(fit.lambda().iter().all(|v| v.abs() < 1e-12));
}

#[test]
fn separable_data_plateaus_and_stops() {
    let data = dataset(2, &[(0, 1, 1); 100]);
    let slow = TrainConfig {
        learning_rate: 0.1,
        epochs: 2000,
        ..TrainConfig::default()
    };
    let fit = fit_btl_traced(&data, &slow).unwrap();
    assert!(fit.loss_trace.windows(2).all(|w| w[1] <= w[0]));
    let tail = &fit.loss_trace[fit.loss_trace.len() - 100..];
    assert!(tail[0] - tail[99] < 1e-3);
    assert!(fit.params.lambda()[0] > fit.params.lambda()[1]);

    let fast = TrainConfig {
        learning_rate: 100.0,
        ..TrainConfig::default()
    };
    let fit = fit_btl_traced(&data, &fast).unwrap();
    assert!(fit.stopped_early);
    assert!(fit.loss_trace.last().unwrap() < &1e-11);
}

#[test]
fn loss_non_increasing_at_small_rates() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for lr in [0.1, 0.05, 0.01] {
        let n = rng.random_range(3..8);
        let lam: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let data = btl_data(&mut rng, &lam, 3);
        let cfg = TrainConfig {
            learning_rate: lr,
            epochs: 200,
            ..TrainConfig::default()
        };
        let fit = fit_btl_traced(&data, &cfg).unwrap();
        assert!(fit.loss_trace.windows(2).all(|w| w[1] <= w[0]));
    }
}

#[test]
fn disconnected_graph_is_rejected() {
    let data = dataset(4, &[(0, 1, 1), (2, 3, 0)]);
    match fit_btl(&data, &TrainConfig::default()) {
        Err(Error::Disconnected(c)) => assert_eq!(c, vec![vec![0, 1], vec![2, 3]]),
        other => panic!("expected disconnected error, got {other:?}"),
    }
}

#[test]
fn sharpness_values_and_gradient() {
    assert!(sharpness_reg(&[0.0, 1.0, 1.0], SharpnessForm::Entropy).unwrap().abs() < 1e-8);
    let h = sharpness_reg(&[0.5; 4], SharpnessForm::Entropy).unwrap();
    assert!((h - std::f64::consts::LN_2).abs() < 1e-8);
    assert_eq!(sharpness_reg(&[0.0, 1.0], SharpnessForm::AbsDeviation).unwrap(), -0.5);
    assert!(sharpness_reg(&[1.2], SharpnessForm::Entropy).is_err());

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let s = Matrix::from_fn(6, 1, |_, _| rng.random_range(0.05..0.95));
    let mut tape = Tape::new();
    let v = tape.input(s.clone());
    let r = sharpness_on(&mut tape, v, SharpnessForm::Entropy);
    let g = tape.grad(r).unwrap();
    let num = finite_difference_gradient(
        |m| sharpness_reg(m.as_slice(), SharpnessForm::Entropy).unwrap(),
        &s,
        FD_STEP,
    );
    assert!(relative_error(g.wrt(v), &num) < 1e-6);
}

#[test]
fn ece_examples() {
    assert_eq!(calibration_reg(&[1.0, 0.0, 1.0], &[true, false, true], 10).unwrap(), 0.0);
    assert_eq!(calibration_reg(&[0.5; 4], &[true, false, true, false], 10).unwrap(), 0.0);
    let e = calibration_reg(&[0.9; 5], &[false; 5], 10).unwrap();
    assert!((e - 0.9).abs() < 1e-15);
    // two bins: {0.2, 0.3} with one hit, {0.8} with none
    let e = calibration_reg(&[0.2, 0.3, 0.8], &[true, false, false], 2).unwrap();
    assert!((e - (2.0 / 3.0 * 0.25 + 1.0 / 3.0 * 0.8)).abs() < 1e-15);
    assert!(matches!(
        calibration_reg(&[0.5], &[true, false], 10),
        Err(Error::LengthMismatch { .. })
    ));
    assert!(calibration_reg(&[0.5], &[true], 0).is_err());
}

#[test]
fn ground_truth_requires_nesting() {
    assert!(GroundTruthMembership::new(vec![true, false], vec![false, true]).is_err());
    let g = GroundTruthMembership::from_prob(&crate::tournament::fixtures::example2()).unwrap();
    assert_eq!(g.top_cycle(), &[true, false, false, false]);
    assert_eq!(g.uncovered(), &[true, false, false, false]);
}

fn condorcet_data(rng: &mut ChaCha8Rng, n: usize, winner: usize, m: usize) -> ComparisonDataset {
    let lam: Vec<f64> = (0..n)
        .map(|a| if a == winner { 2.0 } else { rng.random_range(-1.0..1.0) })
        .collect();
    btl_data(rng, &lam, m)
}

#[test]
fn zero_weights_match_fit_btl() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let data = condorcet_data(&mut rng, 6, 2, 20);
    let cfg = TrainConfig {
        lambda_s: 0.0,
        epochs: 150,
        ..TrainConfig::default()
    };
    let fit = fit_btl_traced(&data, &cfg).unwrap();
    let trained = train_ste(&data, &cfg, None).unwrap();
    assert_eq!(fit.params, trained.params);
    assert_eq!(fit.loss_trace, trained.loss_trace);
}

#[test]
fn training_finds_planted_winner() {
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let n = rng.random_range(4..8);
        let winner = rng.random_range(0..n);
        let data = condorcet_data(&mut rng, n, winner, 30);
        let cfg = TrainConfig {
            epochs: 200,
            anneal: crate::soft::AnnealSchedule::new(1.0, 0.01, 200).unwrap(),
            ..TrainConfig::default()
        };
        let out = train_ste(&data, &cfg, None).unwrap();
        assert!(out.loss_trace.iter().all(|v| v.is_finite()));
        assert_eq!(argmax(&out.scores.t), winner);
        assert_eq!(out.scores.top_cycle_core(), [winner].into_iter().collect());
    }
}

#[test]
fn training_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let data = condorcet_data(&mut rng, 5, 0, 10);
    let cfg = TrainConfig {
        epochs: 60,
        lambda_c: 0.5,
        reg_every: 3,
        ..TrainConfig::default()
    };
    let truth = GroundTruthMembership::new(vec![true, false, false, false, false], vec![true, false, false, false, false]).unwrap();
    let a = train_ste(&data, &cfg, Some(&truth)).unwrap();
    let b = train_ste(&data, &cfg, Some(&truth)).unwrap();
    assert_eq!(a.loss_trace, b.loss_trace);
    assert_eq!(a.params, b.params);
    assert!(matches!(train_ste(&data, &cfg, None), Err(Error::MissingTruth)));
}

#[test]
fn runtime_gradient_check_passes() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let data = condorcet_data(&mut rng, 5, 1, 10);
    for target in [RegTarget::Uncovered, RegTarget::TopCycle] {
        for form in [SharpnessForm::Entropy, SharpnessForm::AbsDeviation] {
            let cfg = TrainConfig {
                epochs: 15,
                gradcheck: true,
                reg_target: target,
                sharpness: form,
                anneal: crate::soft::AnnealSchedule::new(1.0, 0.1, 15).unwrap(),
                ..TrainConfig::default()
            };
            train_ste(&data, &cfg, None).unwrap();
        }
    }
}

#[test]
fn config_validation() {
    assert!(TrainConfig::default().validate().is_ok());
    for bad in [
        TrainConfig { epochs: 0, ..TrainConfig::default() },
        TrainConfig { learning_rate: 0.0, ..TrainConfig::default() },
        TrainConfig { lambda_s: -1.0, ..TrainConfig::default() },
        TrainConfig { reg_every: 0, ..TrainConfig::default() },
    ] {
        assert!(bad.validate().is_err());
    }
    let cfg = TrainConfig { epochs: 11, anneal: crate::soft::AnnealSchedule::new(1.0, 0.01, 10).unwrap(), ..TrainConfig::default() };
    assert_eq!(cfg.tau_at(0).unwrap(), 1.0);
    assert_eq!(cfg.tau_at(10).unwrap(), 0.01);
}

proptest! {
    #[test]
    fn ece_in_unit_interval(pairs in prop::collection::vec((0.0f64..=1.0, any::<bool>()), 1..40), bins in 1usize..20) {
        let (s, t): (Vec<f64>, Vec<bool>) = pairs.into_iter().unzip();
        let e = calibration_reg(&s, &t, bins).unwrap();
        prop_assert!((0.0..=1.0).contains(&e));
    }

    #[test]
    fn empirical_is_complementary(recs in prop::collection::vec((0usize..5, 0usize..5, 0u8..2), 0..60)) {
        let recs: Vec<_> = recs.into_iter().filter(|r| r.0 != r.1).collect();
        let p = empirical_tournament(&dataset(5, &recs));
        for a in 0..5 {
            for b in 0..5 {
                prop_assert_eq!(p.get(a, b) + p.get(b, a), 1.0);
            }
        }
    }
}

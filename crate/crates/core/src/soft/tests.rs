use super::*;
use crate::numerics::gradcheck::{directional_derivative, finite_difference_gradient, relative_error, FD_STEP};
use crate::tournament::fixtures::{example1, example2};
use crate::tournament::{threshold, top_cycle, uncovered_set, HardTournament};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn walkthrough() -> ProbTournament {
    ProbTournament::new(
        Matrix::from_rows(&[
            [0.5, 0.7, 0.6, 0.9],
            [0.3, 0.5, 0.8, 0.7],
            [0.4, 0.2, 0.5, 0.6],
            [0.1, 0.3, 0.4, 0.5],
        ])
        .unwrap(),
    )
    .unwrap()
}

pub(crate) fn random_prob(rng: &mut ChaCha8Rng, n: usize, margin: f64) -> ProbTournament {
    ProbTournament::from_upper(n, |_, _| {
        let m = rng.random_range(margin..0.45);
        if rng.random_bool(0.5) {
            0.5 + m
        } else {
            0.5 - m
        }
    })
    .unwrap()
}

fn hard_prob(t: &HardTournament) -> ProbTournament {
    ProbTournament::from_upper(t.n(), |a, b| if t.beats(a, b) { 1.0 } else { 0.0 }).unwrap()
}

#[test]
fn edge_values() {
    let d = soft_edges(&walkthrough(), 0.1).unwrap();
    assert!((d[(0, 1)] - 0.881).abs() < 5e-4);
    let printed = [
        [0.5, 0.881, 0.731, 0.982],
        [0.119, 0.5, 0.953, 0.881],
        [0.269, 0.047, 0.5, 0.731],
        [0.018, 0.119, 0.269, 0.5],
    ];
    for a in 0..4 {
        for b in 0..4 {
            assert!((d[(a, b)] - printed[a][b]).abs() < 5e-4, "({a},{b})");
            assert!((d[(a, b)] + d[(b, a)] - 1.0).abs() < 1e-12);
        }
    }
    let u = soft_edges(&ProbTournament::uniform(3), 0.37).unwrap();
    assert!(u.as_slice().iter().all(|&v| v == 0.5));
    assert!(soft_edges(&walkthrough(), 0.0).is_err());
    assert!(soft_edges(&walkthrough(), -1.0).is_err());
}

#[test]
fn reach_examples() {
    let cyc = Matrix::from_rows(&[[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]).unwrap();
    let r = soft_reach(&cyc, 2, 1.0).unwrap();
    for a in 0..3 {
        for b in 0..3 {
            if a != b {
                assert!(r[(a, b)] >= 1.0);
            }
        }
    }
    let z = soft_reach(&Matrix::zeros(4, 4), 3, 0.5).unwrap();
    assert_eq!(z, Matrix::zeros(4, 4));
    assert!(soft_reach(&Matrix::filled(2, 2, 1.5), 2, 1.0).is_err());
    assert!(soft_reach(&cyc, 0, 1.0).is_err());
}

#[test]
fn walkthrough_reach_and_scores() {
    // frozen from an independent float64 matmul
    let expected_r = [
        [2.0115006545153475, 3.2912299821390665, 5.498551206968874, 7.2297841053921355],
        [1.1400715482644648, 1.8648442421902889, 4.090347602759958, 5.184574412915108],
        [0.9486252038599265, 1.0143029135933006, 2.3756696767127092, 3.3994656937094967],
        [0.30903490805424716, 0.5195901335204359, 1.232705536334755, 1.8759651133272128],
    ];
    let d = soft_edges(&walkthrough(), 0.1).unwrap();
    let r = soft_reach(&d, 3, 1.0).unwrap();
    for a in 0..4 {
        for b in 0..4 {
            assert!((r[(a, b)] - expected_r[a][b]).abs() < 1e-12);
        }
    }
    let s = ste_scores(&walkthrough(), &SoftConfig::with_tau(0.1).k(3)).unwrap();
    let t_exp = [3.2912299821131406, 1.1400715482644495, 0.9068516005035504, 0.29753469739825167];
    let u_exp = [0.9501957110182782, 0.30277479311250877, 0.201258644177161, 0.05599236217986092];
    for i in 0..4 {
        assert!((s.t[i] - t_exp[i]).abs() < 1e-10, "t[{i}]");
        assert!((s.u[i] - u_exp[i]).abs() < 1e-10, "u[{i}]");
    }
    assert!(s.t[0] > s.t[1] && s.t[1] > s.t[2] && s.t[2] > s.t[3]);
}

#[test]
fn top_cycle_zero_row() {
    let mut r = Matrix::filled(5, 5, 3.0);
    for b in 0..5 {
        r[(2, b)] = 0.0;
    }
    let tau = 0.05;
    let t = top_cycle_scores(&r, tau).unwrap();
    assert!(t[2] <= 0.0 + 1e-12 && t[2] >= -tau * (4f64).ln() - 1e-12);
    assert_eq!(top_cycle_scores(&Matrix::scalar(7.0), 0.1).unwrap(), vec![0.0]);
    assert!(top_cycle_scores(&Matrix::zeros(0, 0), 0.1).is_err());
}

#[test]
fn cover_examples() {
    let cov2 = cover_scores(&soft_edges(&example2(), 0.01).unwrap(), 0.01).unwrap();
    assert!((cov2[(0, 1)] - 1.0).abs() < 0.05);
    let cov1 = cover_scores(&soft_edges(&example1(), 0.01).unwrap(), 0.01).unwrap();
    assert!(cov1[(0, 1)].abs() < 0.05);
    let half = cover_scores(&Matrix::filled(4, 4, 0.5), 0.1).unwrap();
    for c in 0..4 {
        for a in 0..4 {
            let want = if a == c { 0.0 } else { 0.5 };
            assert!((half[(c, a)] - want).abs() < 1e-15);
        }
    }
}

#[test]
fn uncovered_examples() {
    let cfg = SoftConfig::default();
    assert_eq!(uncovered_scores(&Matrix::zeros(4, 4), &cfg).unwrap(), vec![1.0; 4]);
    assert_eq!(uncovered_scores(&Matrix::zeros(1, 1), &cfg).unwrap(), vec![1.0]);
    let mut cov = Matrix::zeros(3, 3);
    cov[(2, 0)] = 1.0;
    let u = uncovered_scores(&cov, &SoftConfig::with_tau(0.001)).unwrap();
    assert!(u[0] < 1e-6);
    let sq = SoftConfig {
        uc_variant: UcVariant::SquashedSmax,
        ..SoftConfig::with_tau(0.01)
    };
    let us = uncovered_scores(&cov, &sq).unwrap();
    assert!(us.iter().all(|v| (0.0..=1.0).contains(v)));
    assert!(us[0] < us[1]);

    let s = ste_scores(&example2(), &SoftConfig::with_tau(0.01).k(3)).unwrap();
    assert_eq!(s.argmax_u(), 0);
    assert!(s.u.iter().skip(1).all(|&v| v < s.u[0]));
}

#[test]
fn symmetric_cycle_scores_equal() {
    for tau in [0.5, 0.1, 0.01] {
        let s = ste_scores(&example1(), &SoftConfig::with_tau(tau)).unwrap();
        for i in 1..3 {
            assert!((s.t[i] - s.t[0]).abs() < 1e-12);
            assert!((s.u[i] - s.u[0]).abs() < 1e-12);
        }
    }
}

#[test]
fn condorcet_example_argmax() {
    let s = ste_scores(&example2(), &SoftConfig::with_tau(0.01).k(3)).unwrap();
    assert_eq!(s.argmax_t(), 0);
    assert!(s.t.iter().skip(1).all(|&v| v < s.t[0]));
    assert_eq!(s.top_cycle_core(), [0].into_iter().collect());
    assert_eq!(s.uncovered_core(), [0].into_iter().collect());
}

#[test]
fn single_agent_convention() {
    let s = ste_scores(&ProbTournament::uniform(1), &SoftConfig::default()).unwrap();
    assert_eq!(s.t, vec![0.0]);
    assert_eq!(s.u, vec![1.0]);
}

#[test]
fn recovers_exact_solutions_when_sharp() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..60 {
        let p = random_prob(&mut rng, 6, 0.05);
        let h = threshold(&p);
        let s = ste_scores(&p, &SoftConfig::with_tau(0.005).k(5)).unwrap();
        assert_eq!(s.top_cycle_core(), top_cycle(&h).unwrap());
        assert_eq!(s.uncovered_core(), uncovered_set(&h).unwrap());
    }
}

#[test]
fn consistency_as_tau_descends() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..40 {
        let n = rng.random_range(4..=8);
        let p = random_prob(&mut rng, n, 0.05);
        let h = threshold(&p);
        let s = ste_scores(&p, &SoftConfig::with_tau(0.01)).unwrap();
        assert_eq!(s.top_cycle_core(), top_cycle(&h).unwrap());
        assert_eq!(s.uncovered_core(), uncovered_set(&h).unwrap());
    }
}

#[test]
fn error_count_decays_with_tau() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..20 {
        let n = rng.random_range(4..=7);
        let delta = 0.1;
        let p = random_prob(&mut rng, n, delta);
        let h = threshold(&p);
        let (tc, uc) = (top_cycle(&h).unwrap(), uncovered_set(&h).unwrap());
        let mut prev = usize::MAX;
        let mut tau = 0.4;
        let mut last = 0;
        while tau >= delta / 10.0 - 1e-12 {
            let s = ste_scores(&p, &SoftConfig::with_tau(tau)).unwrap();
            let errs = s.top_cycle_core().symmetric_difference(&tc).count()
                + s.uncovered_core().symmetric_difference(&uc).count();
            assert!(errs <= prev, "errors rose at tau {tau}");
            prev = errs;
            last = errs;
            tau /= 2.0;
        }
        assert_eq!(last, 0);
    }
}

#[test]
fn hard_inclusion_uc_in_tc() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..100 {
        let n = rng.random_range(3..=8);
        let p = random_prob(&mut rng, n, 0.05);
        let s = ste_scores(&p, &SoftConfig::with_tau(0.01)).unwrap();
        assert!(s.uncovered_core().is_subset(&s.top_cycle_core()));
    }
}

#[test]
fn hard_input_matches_exact_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..30 {
        let n = rng.random_range(2..=7);
        let mut edges = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                edges.push(if rng.random_bool(0.5) { (a, b) } else { (b, a) });
            }
        }
        let h = HardTournament::from_edges(n, &edges).unwrap();
        let s = ste_scores(&hard_prob(&h), &SoftConfig::with_tau(0.05)).unwrap();
        assert_eq!(s.top_cycle_core(), top_cycle(&h).unwrap());
        assert_eq!(s.uncovered_core(), uncovered_set(&h).unwrap());
    }
}

fn mean_scores(p: &Matrix, cfg: &SoftConfig) -> (f64, f64) {
    let mut tape = Tape::new();
    let pv = tape.input(p.clone());
    let v = graph::ste(&mut tape, pv, cfg).unwrap();
    let mt = tape.mean(v.top_cycle);
    let mu = tape.mean(v.uncovered);
    (tape.value(mt)[(0, 0)], tape.value(mu)[(0, 0)])
}

#[test]
fn end_to_end_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..10 {
        let n = rng.random_range(2..=6);
        let p = random_prob(&mut rng, n, 0.02).into_matrix();
        let cfg = SoftConfig::with_tau(rng.random_range(0.1..0.5));
        for which in 0..2 {
            let mut tape = Tape::new();
            let pv = tape.input(p.clone());
            let v = graph::ste(&mut tape, pv, &cfg).unwrap();
            let out = tape.mean(if which == 0 { v.top_cycle } else { v.uncovered });
            let g = tape.grad(out).unwrap();
            let num = finite_difference_gradient(
                |m| {
                    let (t, u) = mean_scores(m, &cfg);
                    if which == 0 {
                        t
                    } else {
                        u
                    }
                },
                &p,
                FD_STEP,
            );
            let err = relative_error(g.wrt(pv), &num);
            assert!(err < 1e-4, "which {which} n {n} err {err}");
        }
    }
}

#[test]
fn row_isotonic_in_own_wins() {
    // raising P[a][b] alone (no complement change) cannot lower t(a)
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..30 {
        let n = rng.random_range(3..=6);
        let p = random_prob(&mut rng, n, 0.02).into_matrix();
        let cfg = SoftConfig::with_tau(0.2);
        let mut tape = Tape::new();
        let pv = tape.input(p.clone());
        let v = graph::ste(&mut tape, pv, &cfg).unwrap();
        for a in 0..n {
            let mut sel = Matrix::zeros(n, 1);
            sel[(a, 0)] = 1.0;
            let s = tape.input(sel);
            let ta = tape.transpose(v.top_cycle);
            let pick = tape.matmul(ta, s).unwrap();
            let g = tape.grad(pick).unwrap();
            for b in 0..n {
                if b != a {
                    assert!(g.wrt(pv)[(a, b)] >= -1e-9);
                }
            }
        }
    }
}

#[test]
fn complement_adjusted_monotone_for_short_paths() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..30 {
        let n = rng.random_range(3..=6);
        let p = random_prob(&mut rng, n, 0.02).into_matrix();
        let cfg = SoftConfig::with_tau(0.2).k(2);
        for a in 0..n {
            for b in 0..n {
                if a == b {
                    continue;
                }
                let mut dir = Matrix::zeros(n, n);
                dir[(a, b)] = 1.0;
                dir[(b, a)] = -1.0;
                let dd = directional_derivative(
                    |m| {
                        let mut tape = Tape::new();
                        let pv = tape.input(m.clone());
                        let v = graph::ste(&mut tape, pv, &cfg).unwrap();
                        tape.value(v.top_cycle)[(a, 0)]
                    },
                    &p,
                    &dir,
                    FD_STEP,
                );
                assert!(dd >= -1e-7, "a {a} b {b} dd {dd}");
            }
        }
    }
}

#[test]
fn anneal_examples() {
    let s = AnnealSchedule::new(1.0, 0.01, 2).unwrap();
    assert_eq!(anneal(&s, 0).unwrap(), 1.0);
    assert_eq!(anneal(&s, 2).unwrap(), 0.01);
    assert!((anneal(&s, 1).unwrap() - 0.1).abs() < 1e-15);
    assert!(anneal(&s, 3).is_err());
    assert!(AnnealSchedule::new(0.1, 1.0, 5).is_err());
    assert!(AnnealSchedule::new(1.0, 0.0, 5).is_err());
    let long = AnnealSchedule::new(2.0, 0.003, 50).unwrap();
    let mut prev = f64::INFINITY;
    for t in 0..=50 {
        let v = anneal(&long, t).unwrap();
        assert!(v <= prev);
        prev = v;
    }
}

#[test]
fn config_validation_and_resolution() {
    assert!(SoftConfig::default().validate().is_ok());
    assert!(SoftConfig::with_tau(0.0).validate().is_err());
    assert!(SoftConfig::default().k(0).validate().is_err());
    let bad_alpha = SoftConfig {
        alpha: 1.5,
        ..SoftConfig::default()
    };
    assert!(bad_alpha.validate().is_err());
    let r = SoftConfig::default().resolved(7);
    assert_eq!(r.k, Some(6));
    assert_eq!(r.tau_softmin, Some(0.1));
    assert_eq!(SoftConfig::default().path_len(1), 1);
}

#[test]
fn threshold_rules() {
    let s = [0.2, 3.0, 1.0, 0.6];
    assert_eq!(ThresholdRule::Absolute(0.5).core(&s), [1, 2, 3].into_iter().collect());
    assert_eq!(ThresholdRule::RelativeToMax(0.5).core(&s), [1].into_iter().collect());
}

#[test]
fn perturbation_is_lipschitz() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cfg = SoftConfig::with_tau(0.1);
    let mut ratios = Vec::new();
    for _ in 0..20 {
        let n = rng.random_range(3..=6);
        let p = random_prob(&mut rng, n, 0.0);
        let base = ste_scores(&p, &cfg).unwrap();
        let eps = 1e-4;
        let q = ProbTournament::from_upper(n, |a, b| {
            (p.get(a, b) + rng.random_range(-eps..eps)).clamp(0.0, 1.0)
        })
        .unwrap();
        let moved = ste_scores(&q, &cfg).unwrap();
        let shift = base
            .t
            .iter()
            .zip(&moved.t)
            .chain(base.u.iter().zip(&moved.u))
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        ratios.push(shift / eps);
    }
    // sup |dσ/dx| / τ bounds the edge map; path sums multiply it by at most n^K-ish
    let c = ratios.iter().copied().fold(0.0, f64::max);
    assert!(c.is_finite() && c < 1e4, "fitted constant {c}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn relabeling_permutes_scores(seed in any::<u64>(), n in 2usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_prob(&mut rng, n, 0.01);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let cfg = SoftConfig::with_tau(0.15);
        let s = ste_scores(&p, &cfg).unwrap();
        let sp = ste_scores(&p.permuted(&perm), &cfg).unwrap();
        for (i, &p) in perm.iter().enumerate() {
            prop_assert!((sp.t[i] - s.t[p]).abs() < 1e-9);
            prop_assert!((sp.u[i] - s.u[p]).abs() < 1e-9);
        }
    }

    #[test]
    fn scores_respect_bounds(seed in any::<u64>(), n in 1usize..8, tau in 0.005f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_prob(&mut rng, n, 0.0);
        let s = ste_scores(&p, &SoftConfig::with_tau(tau)).unwrap();
        prop_assert_eq!(s.t.len(), n);
        prop_assert!(s.t.iter().all(|v| v.is_finite()));
        prop_assert!(s.u.iter().all(|v| (0.0..=1.0).contains(v)));
        let d = soft_edges(&p, tau).unwrap();
        let c = cover_scores(&d, tau).unwrap();
        prop_assert!(c.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

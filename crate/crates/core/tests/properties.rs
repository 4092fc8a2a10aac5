use proptest::prelude::*;

use speller_core::analysis::{bit_rate, halves_comparison, paired_t_test, spearman};
use speller_core::blda::BldaModel;
use speller_core::decoder::{predict_character, StopStatus, StoppingState};
use speller_core::dsp::{acquisition_filters, analysis_filter, apply_filter};
use speller_core::paradigm::{build_flash_code, visual_angle, ParadigmId};
use speller_core::session::{BlockResult, SessionResult};

fn scores() -> impl Strategy<Value = [f64; 12]> {
    prop::array::uniform12(-5.0f64..5.0)
}

fn session(outcomes: &[(bool, usize)], seed: u64) -> SessionResult {
    let blocks = outcomes
        .iter()
        .enumerate()
        .map(|(i, &(ok, trials))| BlockResult {
            block_index: i,
            target: i % 42,
            predicted: if ok { i % 42 } else { (i + 1) % 42 },
            trials_used: trials,
            start_time_s: 0.0,
        })
        .collect();
    SessionResult::from_blocks(ParadigmId::MsP, seed, blocks, 2.4)
}

proptest! {
    #[test]
    fn bit_rate_rises_with_accuracy(p in 1.0f64 / 42.0..1.0, dp in 0.001f64..0.5, trials in 84.0f64..672.0) {
        let q = (p + dp).min(1.0);
        prop_assert!(bit_rate(q, 42, trials, 2.4) >= bit_rate(p, 42, trials, 2.4));
    }

    #[test]
    fn bit_rate_falls_with_trials(p in 0.0f64..=1.0, trials in 84.0f64..600.0, extra in 1.0f64..72.0) {
        prop_assert!(bit_rate(p, 42, trials + extra, 2.4) <= bit_rate(p, 42, trials, 2.4));
    }

    #[test]
    fn prediction_maximizes_pair_sum(s in scores()) {
        let code = build_flash_code();
        let item = predict_character(&s, &code);
        let sum = |i: usize| { let [a, b] = code.pair(i); s[a] + s[b] };
        for other in 0..code.n_items() {
            prop_assert!(sum(item) >= sum(other));
            if other < item {
                prop_assert!(sum(other) < sum(item));
            }
        }
    }

    #[test]
    fn prediction_ignores_a_common_offset(s in scores(), c in -100.0f64..100.0) {
        let code = build_flash_code();
        let shifted = s.map(|v| v + c);
        prop_assert_eq!(predict_character(&shifted, &code), predict_character(&s, &code));
    }

    #[test]
    fn repeated_trials_stop_at_two(s in scores()) {
        let code = build_flash_code();
        let mut state = StoppingState::new(2, 16).unwrap();
        state.accumulate_trial(&s, &code).unwrap();
        prop_assert_eq!(state.stopping_step().status, StopStatus::Continue);
        state.accumulate_trial(&s, &code).unwrap();
        let d = state.stopping_step();
        prop_assert_eq!(d.status, StopStatus::Stop);
        prop_assert_eq!(d.trials_used, 2);
        prop_assert_eq!(d.predicted_item, Some(predict_character(&s, &code)));
    }

    #[test]
    fn trials_used_stay_within_limits(trials in prop::collection::vec(scores(), 16)) {
        let code = build_flash_code();
        let mut state = StoppingState::new(2, 16).unwrap();
        for t in &trials {
            state.accumulate_trial(t, &code).unwrap();
            if state.stopping_step().status == StopStatus::Stop {
                break;
            }
        }
        let d = state.stopping_step();
        prop_assert_eq!(d.status, StopStatus::Stop);
        prop_assert!((2..=16).contains(&d.trials_used));
    }

    #[test]
    fn filters_are_linear(
        x in prop::collection::vec(-50.0f64..50.0, 64..256),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| (i as f64 * 0.37).sin() * 20.0 - v).collect();
        let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let mut filters = acquisition_filters(256.0).unwrap();
        filters.push(analysis_filter(256.0).unwrap());
        for f in &filters {
            let fx = apply_filter(f, &x).unwrap();
            let fy = apply_filter(f, &y).unwrap();
            let fm = apply_filter(f, &mix).unwrap();
            let scale = fx.iter().chain(&fy).fold(1.0f64, |m, v| m.max(v.abs())) * (1.0 + a.abs() + b.abs());
            for i in 0..x.len() {
                let want = a * fx[i] + b * fy[i];
                prop_assert!((fm[i] - want).abs() <= 1e-10 * scale, "{} vs {}", fm[i], want);
            }
        }
    }

    #[test]
    fn halves_recombine(outcomes in prop::collection::vec((any::<bool>(), 2usize..=16), 42), seed in any::<u64>()) {
        let r = session(&outcomes, seed);
        let h = halves_comparison(&[&r]).unwrap();
        prop_assert_eq!(h.first.correct + h.last.correct, r.totals.correct);
        prop_assert_eq!(h.first.trials_total + h.last.trials_total, r.totals.trials_total);
        prop_assert_eq!(h.first.blocks + h.last.blocks, 42);
        let k = outcomes.iter().filter(|o| o.0).count();
        prop_assert!((r.totals.accuracy_pct - 100.0 * k as f64 / 42.0).abs() < 1e-12);
    }

    #[test]
    fn spearman_ignores_monotone_transforms(
        pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 5..40),
    ) {
        let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let ex: Vec<f64> = x.iter().map(|v| v.exp() + 3.0 * v).collect();
        if let (Ok(a), Ok(b)) = (spearman(&x, &y), spearman(&ex, &y)) {
            prop_assert!((a.statistic - b.statistic).abs() < 1e-12);
        }
    }

    #[test]
    fn paired_t_is_antisymmetric(pairs in prop::collection::vec((0.0f64..100.0, 0.0f64..100.0), 3..30)) {
        let a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let ab = paired_t_test(&a, &b).unwrap();
        let ba = paired_t_test(&b, &a).unwrap();
        prop_assert!((ab.statistic + ba.statistic).abs() <= 1e-9 * (1.0 + ab.statistic.abs()));
        prop_assert!((ab.p_value - ba.p_value).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&ab.p_value));
    }

    #[test]
    fn summed_scores_match_averaged_features(
        w in prop::collection::vec(-1.0f64..1.0, 9),
        xs in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 8), 1..6),
    ) {
        let model = BldaModel {
            weights: w,
            alpha: 1.0,
            beta: 1.0,
            n_iterations: 0,
            evidence_trace: vec![],
            converged: true,
        };
        let k = xs.len() as f64;
        let summed: f64 = xs.iter().map(|x| model.score_features(x).unwrap()).sum();
        let mean: Vec<f64> = (0..8).map(|j| xs.iter().map(|x| x[j]).sum::<f64>() / k).collect();
        let averaged = model.score_features(&mean).unwrap();
        prop_assert!((summed / k - averaged).abs() < 1e-9);
    }

    #[test]
    fn visual_angle_grows_with_eccentricity(r in 0.0f64..30.0, dr in 0.01f64..10.0, phi in 0.0f64..6.28, d in 30.0f64..100.0) {
        let at = |r: f64| visual_angle([r * phi.cos(), r * phi.sin()], d);
        prop_assert!(at(r + dr) > at(r));
        prop_assert!(at(r) < 90.0);
    }
}

use aftstab::solvers::{lambda_grid, PenaltySpec, SolverOptions};
use aftstab::stability::{
    selection_probabilities, stable_from_maxima, subsample_indices, SelectionRule, StabilityParams,
};
use aftstab::survival::{km_weights, order_by_time, SurvivalRecord};
use aftstab::swls::transform;
use aftstab::OrderedSurvivalData;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// First covariate drives log-time strongly, the rest are noise.
fn data(seed: u64, n: usize, p: usize, censor: f64) -> OrderedSurvivalData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let records: Vec<SurvivalRecord> = (0..n)
        .map(|i| {
            let x: Vec<f64> = (0..p).map(|_| rng.random_range(0.0..1.0)).collect();
            let t = (4.0 * x[0] + rng.random_range(-0.2..0.2)).exp();
            // Force at least one event so the full-data weights are not all zero.
            SurvivalRecord::new(t, i + 1 == n || !rng.random_bool(censor), x)
        })
        .collect();
    order_by_time(&records).unwrap()
}

fn params(data: &OrderedSurvivalData, subsamples: usize, seed: u64) -> StabilityParams {
    let design = transform(data, &km_weights(data)).unwrap();
    StabilityParams {
        penalty: PenaltySpec::lasso(0.0).unwrap(),
        grid: lambda_grid(&design, 10, 0.05).unwrap(),
        subsamples,
        seed,
        rule: SelectionRule::Nonzero,
        solver: SolverOptions::default(),
    }
}

#[test]
fn one_subsample_gives_zero_one_probabilities() {
    let d = data(1, 30, 5, 0.3);
    let res = selection_probabilities(&d, &params(&d, 1, 3)).unwrap();
    assert!(res.probabilities().iter().flatten().all(|&v| v == 0.0 || v == 1.0));
}

#[test]
fn dominant_signal_is_always_selected() {
    let d = data(2, 40, 6, 0.2);
    let res = selection_probabilities(&d, &params(&d, 50, 4)).unwrap();
    assert_eq!(res.max_per_variable()[0], 1.0);
}

#[test]
fn result_does_not_depend_on_thread_count() {
    let d = data(3, 40, 8, 0.3);
    let p = params(&d, 40, 9);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| selection_probabilities(&d, &p).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, selection_probabilities(&d, &p).unwrap());
}

#[test]
fn half_samples_without_events_are_redrawn() {
    // A single event among twelve: about half of all half-samples miss it.
    let mut records: Vec<SurvivalRecord> = (1..=11)
        .map(|i| SurvivalRecord::new(i as f64, false, vec![i as f64, 1.0 / i as f64]))
        .collect();
    records.push(SurvivalRecord::new(0.5, true, vec![0.0, 3.0]));
    let d = order_by_time(&records).unwrap();
    let p = StabilityParams {
        penalty: PenaltySpec::lasso(0.0).unwrap(),
        grid: vec![0.1, 0.01],
        subsamples: 30,
        seed: 1,
        rule: SelectionRule::Nonzero,
        solver: SolverOptions::default(),
    };
    let res = selection_probabilities(&d, &p).unwrap();
    assert!(res.redraws > 0);
    assert_eq!(res.subsample_count, 30);
}

#[test]
fn all_censored_data_exceeds_the_redraw_cap() {
    let records: Vec<SurvivalRecord> = (1..=10)
        .map(|i| SurvivalRecord::new(i as f64, false, vec![i as f64]))
        .collect();
    let d = order_by_time(&records).unwrap();
    let p = StabilityParams {
        penalty: PenaltySpec::lasso(0.0).unwrap(),
        grid: vec![1.0],
        subsamples: 5,
        seed: 1,
        rule: SelectionRule::Nonzero,
        solver: SolverOptions::default(),
    };
    let err = selection_probabilities(&d, &p).unwrap_err();
    assert!(err.is_data_degeneracy(), "{err}");
}

#[test]
fn subsample_sizes_use_the_floor() {
    for (n, size) in [(4, 2), (5, 2), (9, 4)] {
        for s in subsample_indices(n, 25, 7).unwrap() {
            assert_eq!(s.len(), size);
            assert!(s.windows(2).all(|w| w[0] < w[1]));
            assert!(s.iter().all(|&i| i < n));
        }
    }
    assert_eq!(subsample_indices(10, 5, 1).unwrap(), subsample_indices(10, 5, 1).unwrap());
}

#[test]
fn stable_set_example() {
    assert_eq!(stable_from_maxima(&[0.955, 0.845, 0.3], 0.6), vec![0, 1]);
    assert!(stable_from_maxima(&[0.1, 0.5], 0.6).is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn probabilities_are_multiples_of_one_over_b(seed in any::<u64>(), b in 1usize..12) {
        let d = data(seed, 16, 4, 0.4);
        let res = selection_probabilities(&d, &params(&d, b, seed)).unwrap();
        for v in res.probabilities().into_iter().flatten() {
            let scaled = v * b as f64;
            prop_assert!((scaled - scaled.round()).abs() < 1e-9);
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn higher_thresholds_give_subsets(maxima in prop::collection::vec(0.0f64..=1.0, 0..30), a in 0.01f64..0.99, b in 0.01f64..0.99) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let strict = stable_from_maxima(&maxima, hi);
        let loose = stable_from_maxima(&maxima, lo);
        prop_assert!(strict.iter().all(|k| loose.contains(k)));
    }
}

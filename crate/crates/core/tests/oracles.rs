mod common;

use aoce_core::evaluation::{average_cost_exact, exact_cost, simulate, stationary_distribution, truncation_gap_bound};
use aoce_core::solvers::{
    brute_force_switching_search, grid_search_baseline, policy_evaluation, structured_policy_iteration, SpiOptions,
};
use aoce_core::{
    make_baseline, Action, AgeFunction, BaselineSpec, EvaluablePolicy, Policy, SignificanceProfile, SourceModel,
    SwitchingPolicy, Threshold, TruncatedMdp,
};

fn spi(mdp: &TruncatedMdp) -> aoce_core::SolveResult {
    structured_policy_iteration(mdp, mdp.default_reference(), SpiOptions::default()).unwrap()
}

#[test]
fn spi_matches_exhaustive_search() {
    let mut cases = Vec::new();
    for n in 4..=8 {
        for seed in 0..3 {
            cases.push((2, n, 100 + 10 * u64::from(n) + seed));
        }
    }
    for n in 4..=6 {
        for seed in 0..3 {
            cases.push((3, n, 500 + 10 * u64::from(n) + seed));
        }
    }
    assert!(cases.len() >= 20);
    for (m, n, seed) in cases {
        let mdp = common::random_instance(seed, m, n).mdp;
        let (best, cost) = brute_force_switching_search(&mdp, n).unwrap();
        let r = spi(&mdp);
        assert!(
            (r.gain - cost).abs() <= 1e-9,
            "seed {seed}: spi {} brute {cost}\n{best}",
            r.gain
        );
    }
}

#[test]
fn stationary_law_matches_policy_evaluation() {
    for seed in 0..15 {
        let mdp = common::random_instance(seed, 3, 6).mdp;
        let policy = spi(&mdp).policy;
        let d = stationary_distribution(mdp.kernel(), &policy).unwrap();
        assert!(d.fixed_point_error(mdp.kernel(), &policy) < 1e-12);
        assert!((d.mu.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let value = policy_evaluation(mdp.kernel(), &policy, 0).unwrap();
        assert!((d.expected_cost(mdp.kernel(), &policy) - value.gain).abs() < 1e-10);
    }
}

#[test]
fn never_transmitting_costs_the_mismatch_probability() {
    // The estimate stays at its first value, so with unit costs the average
    // cost is the stationary probability that the source differs from it.
    for (m, p) in [(2, 0.3), (4, 0.1), (5, 0.05)] {
        let mdp = TruncatedMdp::build(
            SourceModel::symmetric(m, p).unwrap(),
            SignificanceProfile::uniform(m, 1.0, AgeFunction::constant(1.0)).unwrap(),
            0.9,
            2.0,
            10,
        )
        .unwrap();
        let cost = exact_cost(&mdp, &EvaluablePolicy::Stationary(Policy::never(&mdp)))
            .unwrap()
            .unwrap();
        let expected = 1.0 - 1.0 / m as f64;
        assert!((cost - expected).abs() < 1e-12, "m={m}: {cost} vs {expected}");
    }
}

#[test]
fn zero_age_costs_and_free_transmissions_cost_nothing() {
    let mdp = TruncatedMdp::build(
        common::asymmetric_source(),
        SignificanceProfile::uniform(4, 1.0, AgeFunction::constant(0.0)).unwrap(),
        0.7,
        0.0,
        6,
    )
    .unwrap();
    for policy in [Policy::never(&mdp), Policy::error_triggered(&mdp), spi(&mdp).policy] {
        let cost = exact_cost(&mdp, &EvaluablePolicy::Stationary(policy)).unwrap().unwrap();
        assert_eq!(cost, 0.0);
    }
}

#[test]
fn error_triggered_over_a_perfect_channel() {
    // Every error is fixed after one slot, so each source change costs one
    // slot of error plus one transmission.
    let mdp = TruncatedMdp::build(
        common::symmetric_source(),
        SignificanceProfile::uniform(4, 1.0, AgeFunction::constant(1.0)).unwrap(),
        1.0,
        2.5,
        8,
    )
    .unwrap();
    let policy = EvaluablePolicy::Stationary(Policy::error_triggered(&mdp));
    let cost = exact_cost(&mdp, &policy).unwrap().unwrap();
    let change = 0.3;
    assert!((cost - change * (1.0 + 2.5)).abs() < 1e-12, "{cost}");

    let reactive = exact_cost(&mdp, &EvaluablePolicy::Reactive).unwrap().unwrap();
    assert!((reactive - cost).abs() < 1e-12, "{reactive}");
}

#[test]
fn spi_policy_simulates_to_its_exact_cost() {
    for lambda in [0.0, 2.0, 5.0] {
        let mdp = common::comparison(lambda);
        let r = spi(&mdp);
        let exact = average_cost_exact(mdp.kernel(), &r.policy).unwrap();
        assert!((exact - r.gain).abs() < 1e-10);
        let sim = simulate(&mdp, &EvaluablePolicy::Stationary(r.policy), 400_000, 11).unwrap();
        assert!(
            sim.agrees_with(exact, 3.0),
            "lambda={lambda}: {} ± {} vs {exact}",
            sim.mean_cost,
            sim.half_width_95
        );
    }
}

#[test]
fn gap_bound_is_small_and_bounds_the_truncation_error() {
    let short = common::behavioral(0.9, 3.0, 20);
    let sw = SwitchingPolicy::extract(&spi(&short).policy, &short).unwrap();
    let total: f64 = truncation_gap_bound(&short, &sw).unwrap().iter().map(|b| b.bound).sum();
    assert!(total < 1e-6, "{total}");

    // A fixed policy evaluated on a much larger truncation stands in for the
    // untruncated chain.
    let long = common::behavioral(0.9, 3.0, 80);
    let cost = |mdp: &TruncatedMdp| average_cost_exact(mdp.kernel(), &sw.expand(mdp).unwrap()).unwrap();
    for n in [4, 6, 8, 20] {
        let short = common::behavioral(0.9, 3.0, n);
        let total: f64 = truncation_gap_bound(&short, &sw).unwrap().iter().map(|b| b.bound).sum();
        let gap = (cost(&long) - cost(&short)).abs();
        assert!(gap <= total * (1.0 + 1e-6) + 1e-12, "N={n}: gap {gap} bound {total}");
        if n <= 6 {
            assert!(gap > 1e-9 && gap >= 0.5 * total, "N={n}: gap {gap} bound {total}");
        }
    }
}

#[test]
fn constant_costs_have_no_truncation_gap() {
    let mdp = TruncatedMdp::build(
        common::symmetric_source(),
        SignificanceProfile::uniform(4, 1.0, AgeFunction::constant(2.0)).unwrap(),
        0.6,
        3.0,
        5,
    )
    .unwrap();
    let sw = SwitchingPolicy::extract(&spi(&mdp).policy, &mdp).unwrap();
    for b in truncation_gap_bound(&mdp, &sw).unwrap() {
        assert_eq!(b.bound, 0.0);
    }
}

#[test]
fn threshold_one_is_error_triggered() {
    let mdp = common::comparison(2.0);
    let a = make_baseline(&BaselineSpec::ErrorTriggered, &mdp).unwrap();
    let b = make_baseline(
        &BaselineSpec::Threshold {
            delta: Threshold::At(1),
        },
        &mdp,
    )
    .unwrap();
    assert_eq!(a, b);
    let c = make_baseline(
        &BaselineSpec::Threshold {
            delta: Threshold::Never,
        },
        &mdp,
    )
    .unwrap();
    assert_eq!(c, EvaluablePolicy::Stationary(Policy::never(&mdp)));
}

#[test]
fn distortion_proxy_ignores_the_age() {
    for lambda in 0..=5 {
        let mdp = common::comparison(f64::from(lambda));
        let proxy = make_baseline(&BaselineSpec::DistortionProxy, &mdp).unwrap();
        let sw = SwitchingPolicy::extract(proxy.as_stationary().unwrap(), &mdp).unwrap();
        for b in mdp.blocks() {
            let t = sw.get(b.source, b.estimate);
            assert!(matches!(t, Threshold::At(1) | Threshold::Never), "lambda={lambda}: {t}");
        }
    }
}

#[test]
fn free_transmissions_favour_transmitting_always() {
    let mdp = common::comparison(0.0);
    let grid: Vec<BaselineSpec> = (0..=4)
        .map(|k| BaselineSpec::Randomized {
            probability: f64::from(k) / 4.0,
        })
        .collect();
    let out = grid_search_baseline(&grid, &mdp, 50_000, 3).unwrap();
    assert_eq!(out.best.spec, BaselineSpec::Randomized { probability: 1.0 });
    assert!(out.candidates.iter().all(|c| c.simulated()));

    let periodic = make_baseline(&BaselineSpec::Periodic { period: Some(1) }, &mdp).unwrap();
    let a = simulate(&mdp, &periodic, 50_000, 3).unwrap();
    let b = simulate(&mdp, &make_baseline(&grid[4], &mdp).unwrap(), 50_000, 3).unwrap();
    assert_eq!(a.mean_cost, b.mean_cost);
}

#[test]
fn exact_grid_candidates_are_not_simulated() {
    let mdp = common::comparison(3.0);
    let grid: Vec<BaselineSpec> = (1..=20)
        .map(|d| BaselineSpec::Threshold {
            delta: Threshold::At(d),
        })
        .chain([BaselineSpec::Threshold {
            delta: Threshold::Never,
        }])
        .collect();
    let out = grid_search_baseline(&grid, &mdp, 1_000, 0).unwrap();
    assert!(out.candidates.iter().all(|c| !c.simulated()));
    let min = out.candidates.iter().map(|c| c.cost).fold(f64::INFINITY, f64::min);
    assert_eq!(out.best.cost, min);
}

#[test]
fn aoi_reference_transmits_at_once_when_free() {
    let mdp = common::behavioral(0.9, 0.0, 20);
    match make_baseline(&BaselineSpec::AoiReference, &mdp).unwrap() {
        EvaluablePolicy::Aoi { threshold } => assert_eq!(threshold, Threshold::At(1)),
        other => panic!("{other:?}"),
    }
    match make_baseline(&BaselineSpec::AoiiReference, &mdp).unwrap() {
        EvaluablePolicy::Aoii { thresholds } => {
            for b in mdp.blocks() {
                assert_eq!(thresholds.get(b.source, b.estimate), Threshold::At(1));
            }
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn synced_states_never_transmit_in_baselines() {
    let mdp = common::comparison(1.0);
    for spec in [BaselineSpec::ErrorTriggered, BaselineSpec::DistortionProxy] {
        let p = make_baseline(&spec, &mdp).unwrap();
        let p = p.as_stationary().unwrap();
        for i in 0..mdp.num_sources() {
            assert_eq!(p.action(i), Action::Idle);
        }
    }
}

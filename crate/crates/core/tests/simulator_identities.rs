use engage::bellman::SolverOptions;
use engage::fixtures::base_case;
use engage::simulator::*;
use proptest::prelude::*;

fn short(reps: u32) -> SimConfig {
    let mut c = SimConfig::new(base_case());
    c.horizon_years = 3;
    c.warmup_years = 1;
    c.measure_years = 2;
    c.replications = reps;
    c
}

fn fixed_sum(set: &[usize]) -> f64 {
    let p = base_case();
    let mut s = 0.0;
    for (l, a) in p.activities.iter().enumerate() {
        if set.contains(&l) {
            s += a.fixed_cost;
        }
    }
    s
}

fn conserves(m: &SimMetrics) -> bool {
    m.arrivals == m.served + m.abandoned + m.final_queue
}

#[test]
fn flow_is_conserved() {
    let cfg = short(3);
    let dynamic = solve_policy(&cfg.params, None, &SolverOptions::default()).unwrap().policy;
    for pol in [Policy::Static(vec![0, 1, 2]), Policy::Static(vec![]), dynamic] {
        for r in 0..cfg.replications {
            let m = run_replication(&cfg, &pol, r).unwrap();
            assert!(conserves(&m), "{pol} rep {r}: {m:?}");
        }
    }
}

#[test]
fn static_activity_cost_is_sum_of_fixed_costs() {
    let cfg = short(2);
    for set in [vec![0, 1, 2], vec![0], vec![3], vec![0, 1, 2, 3], vec![]] {
        let m = run_replication(&cfg, &Policy::Static(set.clone()), 0).unwrap();
        assert_eq!(m.activity_cost, fixed_sum(&set), "{set:?}");
        let usage: Vec<f64> = (0..4).map(|l| if set.contains(&l) { 100.0 } else { 0.0 }).collect();
        assert_eq!(m.activity_usage_pct, usage);
    }
    assert_eq!(fixed_sum(&[0, 1, 2]), 3476.0);
}

#[test]
fn identical_seeds_give_identical_metrics() {
    let cfg = short(2);
    let pol = Policy::Static(vec![0, 1]);
    assert_eq!(run_replication(&cfg, &pol, 1).unwrap(), run_replication(&cfg, &pol, 1).unwrap());
    assert_ne!(run_replication(&cfg, &pol, 0).unwrap(), run_replication(&cfg, &pol, 1).unwrap());
    let a = run_experiment(&cfg, &[pol.clone()]).unwrap();
    let b = run_experiment(&cfg, &[pol]).unwrap();
    assert_eq!(a, b);
}

#[test]
fn unreachable_thresholds_match_always_on() {
    let cfg = short(3);
    let rep = run_experiment(&cfg, &[Policy::Static(vec![0, 1, 2, 3]), Policy::Dynamic(vec![f64::INFINITY; 4])]).unwrap();
    assert_eq!(rep.policies[0].replications, rep.policies[1].replications);
    assert_eq!(rep.improvement_pct, Some(0.0));
}

#[test]
fn zero_thresholds_match_never_on() {
    let cfg = short(2);
    let a = run_replication(&cfg, &Policy::Static(vec![]), 0).unwrap();
    let b = run_replication(&cfg, &Policy::Dynamic(vec![0.0; 4]), 0).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.activity_cost, 0.0);
}

#[test]
fn switch_policy_follows_each_half() {
    let cfg = short(1);
    let day = 364;
    let sw = Policy::Switch { first: Box::new(Policy::Static(vec![])), second: Box::new(Policy::Static(vec![0, 1, 2, 3])), switch_day: day };
    let m = run_replication(&cfg, &sw, 0).unwrap();
    // warmup is the first year, so only the always-on half is measured
    assert_eq!(m.activity_cost, fixed_sum(&[0, 1, 2, 3]));
    assert_eq!(m.quarters[0].activity_cost, 0.0);
    assert!(m.quarters[4].activity_cost > 0.0);
}

#[test]
fn invalid_policies_are_rejected() {
    let cfg = short(1);
    assert!(run_replication(&cfg, &Policy::Static(vec![4]), 0).is_err());
    assert!(run_replication(&cfg, &Policy::Dynamic(vec![1.0; 3]), 0).is_err());
    assert!(run_replication(&cfg, &Policy::Dynamic(vec![-1.0; 4]), 0).is_err());
    let mut bad = short(1);
    bad.measure_years = 5;
    assert!(run_replication(&bad, &Policy::Static(vec![]), 0).is_err());
}

#[test]
fn half_width_uses_student_t() {
    let e = Estimate::from_samples(&[1.0, 2.0, 3.0, 4.0]);
    assert_eq!(e.mean, 2.5);
    // t_{0.975,3} = 3.182446305284263
    let sd = (5.0f64 / 3.0).sqrt();
    assert!((e.half_width - 3.182_446_305_284_263 * sd / 2.0).abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn random_runs_conserve_flow(
        set in prop::collection::btree_set(0usize..4, 0..=4),
        rep in 0u32..1000,
        gamma in 0.0f64..0.05,
        gamma_clock in any::<bool>(),
        discrete in any::<bool>(),
    ) {
        let mut cfg = short(1);
        cfg.horizon_years = 2;
        cfg.measure_years = 1;
        cfg.params = cfg.params.with_gamma(gamma);
        if gamma_clock {
            cfg.abandon = AbandonModel::Gamma { shape: 2.0 };
        }
        if discrete {
            cfg.slots = SlotsModel::Discrete3(230, 250, 270);
        }
        let set: Vec<usize> = set.into_iter().collect();
        let m = run_replication(&cfg, &Policy::Static(set.clone()), rep).unwrap();
        prop_assert!(conserves(&m));
        prop_assert_eq!(m.activity_cost, fixed_sum(&set));
        prop_assert!((0.0..=100.0).contains(&m.idle_pct));
        prop_assert!((0.0..=100.0).contains(&m.abandon_pct));
        if gamma == 0.0 {
            prop_assert_eq!(m.abandoned, 0);
        }
    }
}

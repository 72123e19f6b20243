use proptest::prelude::*;

use whiplash_core::continuous::{simulate, DampingLaw, OdeParams};
use whiplash_core::discrete::{run_naive, WhiplashParams};
use whiplash_core::envelope::{
    classify_with_threshold, scan_trace, Converger, Family, ScanSchedule, Series, Verdict,
};
use whiplash_core::explorer::{run_explore, update_direction, ExploreParams};
use whiplash_core::{Benchmark, Execution, Point};

fn point(dim: usize) -> impl Strategy<Value = Point> {
    prop::collection::vec(-3.0..3.0f64, dim).prop_map(|v| Point::new(v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn discrete_runs_are_deterministic(x0 in point(2), kappa in 1.0..50.0f64) {
        let e = Benchmark::elliptic(kappa).unwrap();
        let params = WhiplashParams::new(0.5 / kappa.max(1.0), 500);
        let a = run_naive(&e, &x0, &params).unwrap();
        let b = run_naive(&e, &x0, &params).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn trace_momentum_matches_iterate_difference(x0 in point(3)) {
        let q = Benchmark::scaled_quadratic(1.0, 3).unwrap();
        let out = run_naive(&q, &x0, &WhiplashParams::new(0.05, 300)).unwrap();
        let recs = &out.trace.records;
        for w in recs.windows(2) {
            let dz = Point::new(w[1].x.clone()).unwrap().distance(&Point::new(w[0].x.clone()).unwrap());
            prop_assert!((dz - w[1].z_norm).abs() <= 1e-12 * (1.0 + dz));
        }
    }

    #[test]
    fn direction_update_is_unit(u in point(4), d in 0usize..40) {
        prop_assume!(u.norm() > 0.0);
        let v = update_direction(&u, d);
        prop_assert!((v.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn convergers_are_increasing(eta in 0.01..5.0f64, t in 0.01..40.0f64, dt in 1e-3..5.0f64) {
        for fam in [Family::Polynomial, Family::Exponential] {
            let c = Converger::new(fam, eta).unwrap();
            prop_assert!(c.p(t + dt) > c.p(t));
        }
        prop_assert_eq!(Converger::new(Family::Exponential, eta).unwrap().p(0.0), 1.0);
    }

    #[test]
    fn classification_is_scale_invariant(ys in prop::collection::vec(0.0..10.0f64, 2..60), k in 1e-3..1e3f64) {
        let t: Vec<f64> = (0..ys.len()).map(|i| i as f64).collect();
        let base = classify_with_threshold(&Series { t: t.clone(), y: ys.clone() }, 1e12);
        let scaled = classify_with_threshold(&Series { t, y: ys.iter().map(|v| v * k).collect() }, 1e12);
        prop_assert_eq!(base, scaled);
    }

    #[test]
    fn whiplash_damping_never_below_one(x0 in point(2), v0 in point(2)) {
        let q = Benchmark::scaled_quadratic(1.0, 2).unwrap();
        let tr = simulate(&q, &DampingLaw::Whiplash, &OdeParams::new(x0, 5.0).with_velocity(v0)).unwrap();
        prop_assert!(tr.samples.iter().all(|s| s.gamma >= 1.0));
    }
}

#[test]
fn scan_is_independent_of_execution_mode() {
    let q = Benchmark::scaled_quadratic(1.0, 1).unwrap();
    let tr = simulate(
        &q,
        &DampingLaw::Whiplash,
        &OdeParams::new(Point::new(vec![1.0]).unwrap(), 50.0),
    )
    .unwrap();
    let x_star = Point::zeros(1);
    for schedule in [ScanSchedule::exponential(), ScanSchedule::polynomial()] {
        let a = scan_trace(&tr, &x_star, &schedule, Execution::Sequential).unwrap();
        let b = scan_trace(&tr, &x_star, &schedule, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn scan_transition_is_sharp_on_the_coarse_grid() {
    let q = Benchmark::scaled_quadratic(1.0, 1).unwrap();
    let tr = simulate(
        &q,
        &DampingLaw::Whiplash,
        &OdeParams::new(Point::new(vec![1.0]).unwrap(), 50.0),
    )
    .unwrap();
    let rep = scan_trace(
        &tr,
        &Point::zeros(1),
        &ScanSchedule::exponential(),
        Execution::Parallel,
    )
    .unwrap();
    let n = rep.coarse.len();
    assert!(rep.coarse[..n - 1]
        .iter()
        .all(|v| v.verdict == Verdict::Stable));
    assert_ne!(rep.coarse[n - 1].verdict, Verdict::Stable);
    let star = rep.eta_star.unwrap();
    assert!(star >= rep.coarse[n - 2].eta_tested && star < rep.coarse[n - 1].eta_tested);
}

#[test]
fn explorer_is_deterministic() {
    let e = Benchmark::elliptic(100.0).unwrap();
    let params = ExploreParams::with_defaults(Point::new(vec![1.0, -1.0]).unwrap());
    assert_eq!(
        run_explore(&e, &params).unwrap(),
        run_explore(&e, &params).unwrap()
    );
}

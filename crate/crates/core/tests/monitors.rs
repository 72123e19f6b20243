use whiplash_core::discrete::{
    relaxation_xi, run, DistanceMonitor, MomentumBoundsMonitor, PlBoundMonitor, StepObserver,
    StopRule, Transition, WhiplashParams,
};
use whiplash_core::{Benchmark, CostOracle, Point};

fn p(v: &[f64]) -> Point {
    Point::new(v.to_vec()).unwrap()
}

#[test]
fn momentum_bounds_on_unit_quadratic() {
    for (x0, s) in [
        (p(&[1.0]), 0.01),
        (p(&[0.6, -0.8]), 0.01),
        (p(&[-2.0]), 0.25),
    ] {
        let q = Benchmark::scaled_quadratic(1.0, x0.dim()).unwrap();
        let mut mon = MomentumBoundsMonitor::new(1.0);
        run(
            &q,
            &x0,
            &WhiplashParams::new(s, 100_000),
            StopRule::Naive,
            &mut mon,
        )
        .unwrap();
        assert_eq!(mon.checked, 100_000);
        assert_eq!(mon.violations, 0, "first at {:?}", mon.first_violation);
    }
}

#[test]
fn distance_relaxation_holds() {
    for (b, x0, s) in [
        (
            Benchmark::scaled_quadratic(1.0, 1).unwrap(),
            p(&[1.0]),
            0.01,
        ),
        (Benchmark::elliptic(4.0).unwrap(), p(&[1.0, -1.0]), 0.1),
    ] {
        let mut mon = DistanceMonitor::new(&b.optimum().unwrap());
        run(
            &b,
            &x0,
            &WhiplashParams::new(s, 100_000),
            StopRule::Naive,
            &mut mon,
        )
        .unwrap();
        assert_eq!(mon.violations, 0, "first at {:?}", mon.first_violation);
        assert!(mon.abs_delta_sum.is_finite());
    }
}

/// Direct O(k^2) evaluation of the telescoped PL bound, checked against the
/// recurrence kept by the monitor on a short run.
#[test]
fn pl_monitor_agrees_with_direct_sum() {
    let e = Benchmark::elliptic(4.0).unwrap();
    let (l, mu) = (e.lipschitz().unwrap(), e.pl_constant().unwrap());
    let x0 = p(&[1.0, -1.0]);
    let params = WhiplashParams::new(1.0 / l, 600);

    let mut z_sq = vec![0.0];
    let mut gaps = vec![];
    let mut mon = PlBoundMonitor::new(&e, &x0).unwrap();
    let mut record = |t: &Transition<'_>| {
        z_sq.push(t.z_k.iter().map(|v| v * v).sum());
        gaps.push(e.value(t.x_next));
        mon.observe(t);
    };
    run(&e, &x0, &params, StopRule::Naive, &mut record).unwrap();

    let q = 1.0 - mu / l;
    let f0 = e.value(&x0);
    let mut direct_violations = 0;
    for k in 1..=gaps.len() {
        let sum: f64 = (1..=k)
            .map(|i| relaxation_xi(l, mu, i, k, z_sq[k - i]))
            .sum();
        let bound = q.powi(k as i32) * f0 + 0.5 * l * sum;
        if gaps[k - 1] > bound * (1.0 + 1e-12) + 1e-300 {
            direct_violations += 1;
        }
    }
    assert_eq!(mon.checked, gaps.len());
    assert_eq!(mon.violations, direct_violations);
    assert_eq!(direct_violations, 0);
}

#[test]
fn pl_bound_over_long_run() {
    let e = Benchmark::elliptic(4.0).unwrap();
    let x0 = p(&[1.0, -1.0]);
    let mut mon = PlBoundMonitor::new(&e, &x0).unwrap();
    run(
        &e,
        &x0,
        &WhiplashParams::new(0.25, 100_000),
        StopRule::Naive,
        &mut mon,
    )
    .unwrap();
    assert_eq!(mon.violations, 0, "first at {:?}", mon.first_violation);
}

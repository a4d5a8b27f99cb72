use ladder_inversion::*;

fn rb_grid() -> SweepGrid {
    SweepGrid::default_for(&LadderSystem::rubidium(), Shape::Square)
}

#[test]
fn default_grid_has_fifty_points() {
    let grid = rb_grid();
    assert_eq!(grid.total_times.len(), 10);
    assert_eq!(grid.ratio_sets.len(), 5);
    assert_eq!(grid.len(), 50);
}

#[test]
fn sweep_is_independent_of_pool_size() {
    let sys = LadderSystem::rubidium();
    let grid = SweepGrid::new(
        vec![10.0, 25.0, 40.0],
        vec![vec![1.0, 1.0, 1.0], vec![1.0, 2.0, 5.0]],
        Shape::RaisedCosine,
    )
    .unwrap();
    let step = StepPolicy::ShortestPulse(400.0);
    let results: Vec<SweepResult> = [1, 3, 8]
        .into_iter()
        .map(|n| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .unwrap()
                .install(|| run_sweep(&sys, &grid, step).unwrap())
        })
        .collect();
    for r in &results[1..] {
        assert_eq!(r.config_hash, results[0].config_hash);
        for (a, b) in r.rows.iter().zip(&results[0].rows) {
            assert_eq!(
                a.final_yield().unwrap().to_bits(),
                b.final_yield().unwrap().to_bits()
            );
        }
    }
}

#[test]
fn rows_follow_grid_order() {
    let sys = LadderSystem::rubidium();
    let grid = rb_grid();
    let grid = SweepGrid::new(vec![5.0, 20.0], grid.ratio_sets, Shape::Square).unwrap();
    let result = run_sweep(&sys, &grid, StepPolicy::ShortestPulse(200.0)).unwrap();
    let order: Vec<(f64, Vec<f64>)> = grid.points().map(|(t, r)| (t, r.to_vec())).collect();
    for (row, (t, r)) in result.rows.iter().zip(order) {
        assert_eq!(row.total_time, t);
        assert_eq!(row.ratios, sweep::canonical_ratios(&r));
    }
}

#[test]
fn ideal_sweep_is_flat() {
    let sys = LadderSystem::rubidium().without_decay();
    let result = run_sweep(&sys, &rb_grid(), StepPolicy::ShortestPulse(400.0)).unwrap();
    for row in &result.rows {
        assert!((row.final_yield().unwrap() - 1.0).abs() < 1e-6);
    }
}

#[test]
fn fig2_export_round_trips() {
    let sys = LadderSystem::rubidium();
    let grid = SweepGrid::new(vec![10.0, 30.0], vec![vec![1.0, 1.0, 3.0]], Shape::Square).unwrap();
    let result = run_sweep(&sys, &grid, StepPolicy::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fig2.csv");
    export_fig2(&result, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# ladder-inversion"));
    assert_eq!(lines.next().unwrap(), "Tf_ns,ratio_label,yield");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    for (row, t) in rows.iter().zip([10.0, 30.0]) {
        assert_eq!(row[0].parse::<f64>().unwrap(), t);
        assert_eq!(row[1], "1:1:3");
        let y: f64 = row[2].parse().unwrap();
        assert!((y - result.yield_at(t, &[1.0, 1.0, 3.0]).unwrap()).abs() < 1e-10);
    }
}

/// Exhaustive search over the ratio simplex at 5% resolution using the
/// exact propagator.
fn grid_search(sys: &LadderSystem, total: f64) -> (Vec<f64>, f64) {
    let mut best = (vec![], f64::NEG_INFINITY);
    for i in 1..20 {
        for j in 1..(20 - i) {
            let r = vec![i as f64 / 20.0, j as f64 / 20.0, (20 - i - j) as f64 / 20.0];
            let d = ratios_to_durations(total, &r).unwrap();
            let sched = build_inversion_schedule(sys, &d, Shape::Square).unwrap();
            let tr = propagate_expm(&ground_state(4).unwrap(), &sched, sys).unwrap();
            let y = yield_metric(tr.final_state());
            if y > best.1 {
                best = (r, y);
            }
        }
    }
    best
}

#[test]
fn optimizer_beats_equal_split_and_agrees_with_grid_search() {
    let sys = LadderSystem::rubidium();
    let total = 30.0;
    let (grid_best, grid_yield) = grid_search(&sys, total);
    let argmax = |r: &[f64]| {
        r.iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0
    };
    assert_eq!(argmax(&grid_best), 2);

    let out = optimize_ratios(&sys, total, Shape::Square, &OptimizeOptions::default()).unwrap();
    let equal = sweep::evaluate_point(&sys, total, &[1.0; 3], Shape::Square, StepPolicy::default())
        .unwrap()
        .final_yield;
    assert!(out.best_yield >= equal);
    assert!(
        out.best_yield >= grid_yield - 1e-3,
        "{} vs {grid_yield}",
        out.best_yield
    );
    assert_eq!(argmax(&out.ratios), 2);
    assert!((out.ratios.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn optimizer_without_decay_keeps_full_transfer() {
    let sys = LadderSystem::rubidium().without_decay();
    let opts = OptimizeOptions {
        max_iterations: 20,
        ..OptimizeOptions::default()
    };
    let out = optimize_ratios(&sys, 20.0, Shape::RaisedCosine, &opts).unwrap();
    assert!((out.best_yield - 1.0).abs() < 1e-6);
}

#[test]
fn ratio_heuristic_needs_long_late_pulses() {
    assert!(check_ratio_heuristic(&[1.0, 1.0, 6.0]).unwrap());
    assert!(!check_ratio_heuristic(&[1.0, 1.0, 3.0]).unwrap());
    assert!(!check_ratio_heuristic(&[3.0, 1.0, 1.0]).unwrap());
    assert!(check_ratio_heuristic(&[1.0, 1.0]).is_err());
}

#[test]
fn dissipative_ordering_over_time_and_ratios() {
    let sys = LadderSystem::rubidium();
    let tau = sys.finite_lifetimes().unwrap();
    let times = vec![10.0, 20.0, 30.0, 40.0, 50.0];
    let grid = SweepGrid::new(
        times.clone(),
        vec![vec![1.0, 1.0, 1.0], tau.clone(), vec![1.0, 1.0, 3.0]],
        Shape::Square,
    )
    .unwrap();
    let result = run_sweep(&sys, &grid, StepPolicy::default()).unwrap();
    let series = |r: &[f64]| -> Vec<f64> {
        times
            .iter()
            .map(|t| result.yield_at(*t, r).unwrap())
            .collect()
    };
    let long_last = series(&[1.0, 1.0, 3.0]);
    assert!(long_last.windows(2).all(|w| w[1] < w[0]));
    for ((a, b), c) in series(&[1.0, 1.0, 1.0])
        .iter()
        .zip(series(&tau))
        .zip(long_last)
    {
        assert!(*a <= b && b <= c, "{a} {b} {c}");
    }
}

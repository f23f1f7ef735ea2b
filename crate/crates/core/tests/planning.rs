mod common;

use metrocrew::heuristics::{lgh, sph};
use metrocrew::planner::plan;
use metrocrew::validate::{validate_roster, Mode};

#[test]
fn planner_produces_valid_roster() {
    let inst = common::small_two_line_instance(2, 6, 7);
    let result = plan(&inst).expect("plan succeeds");
    let report = validate_roster(&inst, &result.roster, Mode::Plan);
    assert!(report.is_feasible(), "violations: {:?}", report.violations);
    assert!(result.metrics.coverage > 0.5, "coverage {}", result.metrics.coverage);
    // The stored breakdown must agree with a from-scratch recomputation.
    let recomputed = metrocrew::roster::total_objective(&inst, &result.roster);
    assert!((recomputed.obj - result.metrics.obj).abs() < 1e-6);
}

#[test]
fn heuristics_produce_valid_rosters() {
    let inst = common::small_two_line_instance(2, 6, 7);
    let s = sph(&inst).expect("sph succeeds");
    let report = validate_roster(&inst, &s.roster, Mode::Plan);
    assert!(report.is_feasible(), "sph violations: {:?}", report.violations);

    let l = lgh(&inst);
    let report = validate_roster(&inst, &l.roster, Mode::Plan);
    assert!(report.is_feasible(), "lgh violations: {:?}", report.violations);
}

#[test]
fn planner_not_worse_than_heuristics_here() {
    let inst = common::small_two_line_instance(2, 6, 7);
    let p = plan(&inst).expect("plan succeeds").metrics.obj;
    let s = sph(&inst).expect("sph succeeds").metrics.obj;
    let l = lgh(&inst).metrics.obj;
    assert!(p <= s + 1e-6, "tscg {p} vs sph {s}");
    assert!(p <= l + 1e-6, "tscg {p} vs lgh {l}");
}

#[test]
fn rlmp_objective_is_monotone_and_dual_feasible() {
    let inst = common::small_two_line_instance(2, 6, 7);
    let result = plan(&inst).expect("plan succeeds");
    assert!(!result.trace.is_empty());
    for w in result.trace.windows(2) {
        assert!(
            w[1].lp_objective <= w[0].lp_objective + 1e-6,
            "master objective increased: {} -> {}",
            w[0].lp_objective,
            w[1].lp_objective
        );
    }
    for t in &result.trace {
        assert!(
            (t.lp_objective - t.dual_objective).abs() < 1e-6,
            "duality gap: {} vs {}",
            t.lp_objective,
            t.dual_objective
        );
    }
    let last = result.trace.last().unwrap();
    assert!(last.min_sigma >= -1e-9, "exit with sigma {}", last.min_sigma);
}

mod common;

use sav_bottleneck::fares::{paradox_lhs, solve_ac, solve_monopoly};
use sav_bottleneck::first_best::{
    first_best_social_cost, pareto_check, solve_first_best, solve_first_best_lp, FirstBestCase, LpMethod, TimeGrid,
};
use sav_bottleneck::verify::run_suite;
use sav_bottleneck::welfare::{recommend_strategy, regime_social_costs, thresholds};
use sav_bottleneck::{scenarios, validate};

#[test]
fn fig2_first_best_and_profit() {
    let vp = validate(scenarios::fig2()).unwrap();
    let fb = solve_first_best(&vp);
    assert_eq!(fb.case, FirstBestCase::Mixed);
    assert!((fb.cost - 187.0).abs() < 1e-9);
    assert!((pareto_check(&vp).slack - 220.8).abs() < 1e-9);
    assert!((solve_monopoly(&vp).profit - 423_360.0).abs() < 1e-6);
}

#[test]
fn fig3_capacity_paradox() {
    let vp = validate(scenarios::fig3()).unwrap();
    let lhs = paradox_lhs(&vp).unwrap();
    assert!((lhs + 70.6).abs() < 0.1, "{lhs}");
}

#[test]
fn fig4_first_best_split() {
    let vp = validate(scenarios::fig4()).unwrap();
    let fb = solve_first_best(&vp);
    assert!((fb.split.n_a - 6811.94).abs() < 0.01);
    assert!((fb.cost - 11_544.48).abs() < 0.01);
}

#[test]
fn fig6_keeps_monopoly_under_social_objective() {
    let vp = validate(scenarios::fig6()).unwrap();
    let th = thresholds(&vp);
    assert!(th.n_c_ac_m.value().unwrap() < vp.n_total);
    let t = regime_social_costs(&vp).unwrap();
    assert!(t.chain_holds);
    let r = recommend_strategy(&vp, solve_monopoly(&vp).n_a()).unwrap();
    assert!(!r.social_activate);
}

#[test]
fn simplex_agrees_with_greedy() {
    let vp = validate(scenarios::fig2()).unwrap();
    let fb = solve_first_best(&vp);
    let grid = TimeGrid::covering(&fb, 120, 0.05);
    let g = solve_first_best_lp(&vp, grid, LpMethod::Greedy).unwrap();
    let s = solve_first_best_lp(&vp, grid, LpMethod::Simplex).unwrap();
    assert!((g.objective - s.objective).abs() <= 1e-9 * g.objective);
    assert!((g.objective - first_best_social_cost(&vp, &fb)).abs() <= 1e-2 * g.objective);
}

#[test]
fn coarse_grid_is_infeasible() {
    let vp = validate(scenarios::fig2()).unwrap();
    assert!(solve_first_best_lp(&vp, TimeGrid::new(-1.0, 1.0, 4), LpMethod::Greedy).is_err());
}

#[test]
fn verify_suite_on_random_draws() {
    let mut rng = common::rng(21);
    for _ in 0..10 {
        let vp = common::strict(&mut rng);
        let rep = run_suite(&vp, None);
        let failed: Vec<_> = rep.checks.iter().filter(|c| !c.passed).collect();
        assert!(rep.passed, "{:?} {failed:?}", vp.params());
    }
}

#[test]
fn tangent_ac_has_one_rider_root() {
    let vp = validate(common::place(scenarios::fig2(), 0.4, 1.0)).unwrap();
    let ac = solve_ac(&vp);
    assert!(ac.coincident);
}

//! Oracle suite: every closed form is checked against an independent
//! numerical computation on one parameter set.

use serde::Serialize;

use crate::departure::{build_profile, equilibrium_costs, verify_profile, ModeSplit};
use crate::fares::{ac_fare, capacity_sensitivity, demand, ordering_check, solve_ac, solve_mc, solve_monopoly, Regime};
use crate::first_best::{
    first_best_social_cost, pareto_check, self_financing_check, solve_first_best, solve_first_best_lp, FirstBestCase,
    LpMethod, TimeGrid,
};
use crate::oracle;
use crate::params::ValidatedParams;
use crate::stability::{classify, rest_points, velocity, FareRule, IntegrateOptions, Protocol, Stability};
use crate::welfare::{regime_social_costs, sc_derivative, sc_of_split, solve_second_best};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    /// Scaled discrepancy; counts of failed sub-checks for yes/no checks.
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

struct Suite {
    checks: Vec<CheckResult>,
    tol: Option<f64>,
}

impl Suite {
    fn push(&mut self, name: &'static str, residual: f64, default_tol: f64) {
        let tolerance = self.tol.unwrap_or(default_tol);
        self.checks.push(CheckResult {
            name,
            residual,
            tolerance,
            passed: residual.is_finite() && residual <= tolerance,
        });
    }

    fn flag(&mut self, name: &'static str, failures: usize) {
        self.checks.push(CheckResult {
            name,
            residual: failures as f64,
            tolerance: 0.0,
            passed: failures == 0,
        });
    }
}

/// Runs every applicable oracle. `tol` replaces each check's default
/// tolerance when given.
pub fn run_suite(vp: &ValidatedParams, tol: Option<f64>) -> VerifyReport {
    let mut s = Suite {
        checks: Vec::new(),
        tol,
    };
    let n = vp.n_total;
    let interior = vp.validity().interior;

    // mode-choice equilibria against cost-gap roots
    let mc = solve_mc(vp);
    if interior {
        let root = oracle::bisect(
            |x| equilibrium_costs(vp, ModeSplit { n_n: n - x, n_a: x }, vp.m).gap(),
            0.0,
            n,
            1e-13 * n,
        );
        s.push(
            "mc_vs_bisection",
            root.map_or(f64::INFINITY, |r| (r - mc.n_a()).abs() / n),
            1e-8,
        );
    }
    let ac = solve_ac(vp);
    if interior && !ac.coincident && ac.ac1().is_some() {
        let roots = oracle::sign_change_roots(
            |x| equilibrium_costs(vp, ModeSplit { n_n: n - x, n_a: x }, ac_fare(vp, x)).gap(),
            1e-9 * n,
            n,
            20_000,
            1e-13 * n,
        );
        let closed: Vec<f64> = ac
            .equilibria
            .iter()
            .skip(1)
            .map(|e| e.n_a())
            .filter(|&x| x > 0.0)
            .collect();
        let residual = if roots.len() == closed.len() {
            roots
                .iter()
                .zip(&closed)
                .map(|(r, c)| (r - c).abs() / n)
                .fold(0.0, f64::max)
        } else {
            f64::INFINITY
        };
        s.push("ac_vs_sign_scan", residual, 1e-8);
        let zero_profit = ac
            .equilibria
            .iter()
            .skip(1)
            .map(|e| (e.fare * e.n_a() - vp.m * e.n_a() - vp.f_a).abs() / vp.f_a.max(1.0))
            .fold(0.0, f64::max);
        s.push("ac_zero_profit", zero_profit, 1e-9);
    }
    let mono = solve_monopoly(vp);
    if interior && mono.n_a() > 0.0 {
        let (lo, hi) = (vp.m, vp.m + vp.a() * n);
        let (_, neg_best) = oracle::grid_argmin(|p| -((p - vp.m) * demand(vp, p).n_a - vp.f_a), lo, hi, 10_000);
        let scale = mono.profit.abs().max(vp.f_a).max(1.0);
        s.push(
            "monopoly_vs_fare_grid",
            ((-neg_best) - mono.profit).max(0.0) / scale,
            1e-9,
        );
    }
    s.flag(
        "regime_ordering",
        ordering_check(vp).checks.iter().filter(|c| !c.passed).count(),
    );

    // rush-hour profile at the MC split
    let rep = verify_profile(vp, &build_profile(vp, mc.split), vp.m, None);
    let prof_res = (rep
        .nv_in_window
        .max(rep.sav_in_window)
        .max(-rep.nv_outside_slack.min(0.0))
        .max(-rep.sav_outside_slack.min(0.0)))
        / rep.cost_scale;
    s.push("profile_costs", prof_res, 1e-6);
    s.push("profile_capacity", rep.capacity_violation.max(rep.mass_error), 1e-6);

    // capacity sensitivity
    let mut worst = 0.0f64;
    for r in [Regime::Mc, Regime::Monopoly, Regime::Ac2] {
        if let Ok(x) = capacity_sensitivity(vp, r) {
            worst = worst.max((x.finite_diff - x.dc_dmu).abs() / x.dc_dmu.abs().max(f64::MIN_POSITIVE));
        }
    }
    s.push("capacity_sensitivity_fd", worst, 1e-3);

    // dynamics
    let mut ns = 0.0f64;
    for p in rest_points(vp, FareRule::AverageCost) {
        for proto in Protocol::all() {
            let v = velocity(vp, FareRule::AverageCost, p.n_a, proto);
            ns = ns.max(v.abs() / (n * mc.cost.abs().max(1.0)));
        }
    }
    s.push("nash_stationarity", ns, 1e-12);
    if interior && !ac.coincident && ac.ac2().is_some() && ac.ac1().is_some_and(|e| e.n_a() > 0.0) {
        let rep = classify(vp, FareRule::AverageCost, Protocol::Smith, &IntegrateOptions::default());
        let expect = [
            (Regime::Ac0, Stability::Stable),
            (Regime::Ac1, Stability::Unstable),
            (Regime::Ac2, Stability::Stable),
        ];
        let bad = expect
            .iter()
            .filter(|(r, st)| rep.get(*r).map(|p| p.stability) != Some(*st))
            .count();
        s.flag("ac_stability", bad);
    }

    // first best
    let fb = solve_first_best(vp);
    if let Ok(d) = solve_first_best_lp(vp, TimeGrid::covering(&fb, 2000, 0.05), LpMethod::Greedy) {
        let sc = first_best_social_cost(vp, &fb);
        s.push("first_best_lp_objective", (d.objective - sc).abs() / sc.abs(), 1e-3);
        let cell_mass = vp.mu * d.grid.step() / vp.kappa;
        s.push(
            "first_best_lp_riders",
            (d.n_a() - fb.split.n_a).abs() / (2.0 * cell_mass),
            1.0,
        );
    } else {
        s.flag("first_best_lp_objective", 1);
    }
    if fb.case == FirstBestCase::Mixed {
        let p = pareto_check(vp);
        let scale = p.c_mc.abs().max(1.0);
        s.push(
            "pareto_identity",
            ((p.slack - p.expected_slack).abs()).max((p.slack - p.rider_identity).abs()) / scale,
            1e-9,
        );
    }
    s.push("self_financing", self_financing_check(vp).relative_gap, 1e-6);

    // second best and welfare
    let sb = solve_second_best(vp);
    let golden = oracle::golden_min(|x| sc_of_split(vp, x).unwrap_or(f64::INFINITY), 0.0, n, 1e-10 * n);
    s.push("second_best_vs_golden", (golden - sb.n_a_sb).abs() / n, 1e-6);
    if sb.n_a_sb == sb.n_a_raw {
        s.push(
            "second_best_stationarity",
            sc_derivative(vp, sb.n_a_sb).abs() / (vp.derived().congestion * n).max(1.0),
            1e-9,
        );
    }
    if let Ok(t) = regime_social_costs(vp) {
        let mut worst = (t.sc_mc - mc.social_cost(n)).abs() / t.sc_mc.abs();
        worst = worst.max((t.sc_ac0 - ac.ac0().social_cost(n)).abs() / t.sc_ac0.abs());
        worst = worst.max((t.sc_monopoly - mono.social_cost(n)).abs() / t.sc_monopoly.abs());
        if let (Some(x), Some(e)) = (t.sc_ac2, ac.get(Regime::Ac2)) {
            worst = worst.max((x - e.social_cost(n)).abs() / x.abs());
        }
        s.push("social_cost_identity", worst, 1e-9);
        s.flag("social_cost_chain", usize::from(!t.chain_holds));
    }

    let passed = s.checks.iter().all(|c| c.passed);
    VerifyReport {
        checks: s.checks,
        passed,
    }
}

//! One function per subcommand. Each writes its tables and summary sections
//! into the run's [`Output`] and returns whether its self-checks passed.

use rayon::prelude::*;
use sav_bottleneck::departure::{build_profile, sample_profile, verify_profile, ModeSplit};
use sav_bottleneck::fares::{
    capacity_sensitivity, inverse_fare, ordering_check, solve_ac, solve_mc, solve_monopoly, Equilibrium, Regime,
};
use sav_bottleneck::first_best::{
    first_best_social_cost, pareto_check, sample_tolls, self_financing_check, solve_first_best, solve_first_best_lp,
    toll, LpMethod, TimeGrid,
};
use sav_bottleneck::stability::{
    basin_threshold, classify, integrate, sample_trajectory, FareRule, IntegrateOptions, Protocol,
};
use sav_bottleneck::verify::run_suite;
use sav_bottleneck::welfare::{
    recommend_strategy, regime_social_costs, sc_derivative, sc_of_split, sc_surface, solve_second_best, Threshold,
};
use sav_bottleneck::{validate_with_tol, ValidatedParams};
use serde::Serialize;
use toml::Value;

use crate::config::{LpChoice, RuleChoice, ScenarioConfig, Sweep};
use crate::error::CliError;
use crate::output::Output;

pub struct Ctx<'a> {
    pub cfg: &'a ScenarioConfig,
    pub vp: &'a ValidatedParams,
    /// `--tol`: validation tolerance, or the oracle tolerance for `verify`.
    pub tol: Option<f64>,
}

fn f(x: f64) -> Value {
    Value::Float(x)
}

fn s(x: &str) -> Value {
    Value::String(x.to_string())
}

fn put(t: &mut toml::Table, key: &str, v: Value) {
    t.insert(key.to_string(), v);
}

fn threshold_value(t: Threshold) -> Value {
    match t {
        Threshold::Value(x) => f(x),
        Threshold::Absent(why) => s(&format!("absent ({why})")),
    }
}

#[derive(Serialize)]
struct EquilibriumRow {
    regime: &'static str,
    n_a: f64,
    n_n: f64,
    fare: f64,
    cost: f64,
    c_n: f64,
    c_a: f64,
    profit: f64,
    social_cost: f64,
    boundary: &'static str,
}

fn eq_row(e: &Equilibrium, n: f64) -> EquilibriumRow {
    EquilibriumRow {
        regime: e.regime.label(),
        n_a: e.n_a(),
        n_n: e.split.n_n,
        fare: e.fare,
        cost: e.cost,
        c_n: e.costs.c_n,
        c_a: e.costs.c_a,
        profit: e.profit,
        social_cost: e.social_cost(n),
        boundary: e.boundary.label(),
    }
}

pub fn equilibrium(ctx: &Ctx, out: &mut Output) -> Result<bool, CliError> {
    let vp = ctx.vp;
    let n = vp.n_total;
    let mut rows = Vec::new();
    for r in &ctx.cfg.regimes {
        match r.as_str() {
            "mc" => rows.push(eq_row(&solve_mc(vp), n)),
            "ac" => rows.extend(solve_ac(vp).equilibria.iter().map(|e| eq_row(e, n))),
            _ => rows.push(eq_row(&solve_monopoly(vp), n)),
        }
    }
    out.write_csv("equilibrium.csv", &rows)?;
    let rep = ordering_check(vp);
    let d = vp.derived();
    let t = out.section("derived");
    put(t, "a", f(d.a_coef));
    put(t, "b", f(d.b_coef));
    put(t, "eta", f(d.eta));
    put(t, "n_min", f(d.n_min));
    put(t, "discriminant", f(d.discriminant));
    let t = out.section("ordering");
    put(t, "case", s(&format!("{:?}", rep.case).to_lowercase()));
    put(t, "passed", Value::Boolean(rep.passed));
    for c in rep.checks.iter().filter(|c| !c.passed) {
        put(t, &c.label, f(c.slack));
    }
    Ok(rep.passed)
}

pub fn profile(ctx: &Ctx, out: &mut Output) -> Result<bool, CliError> {
    let vp = ctx.vp;
    let (split, fare) = match ctx.cfg.n_a {
        Some(n_a) => {
            let split = ModeSplit::with_sav(vp.n_total, n_a).map_err(|e| CliError::Config(e.to_string()))?;
            (split, ctx.cfg.fare.unwrap_or_else(|| inverse_fare(vp, n_a)))
        }
        None => (solve_mc(vp).split, ctx.cfg.fare.unwrap_or(vp.m)),
    };
    let prof = build_profile(vp, split);
    out.write_csv("profile.csv", &sample_profile(vp, &prof, fare, ctx.cfg.profile_points))?;
    let rep = verify_profile(vp, &prof, fare, None);
    let t = out.section("profile");
    put(t, "n_n", f(split.n_n));
    put(t, "n_a", f(split.n_a));
    put(t, "fare", f(fare));
    put(t, "t_n_minus", f(prof.t_n_minus));
    put(t, "t_n_plus", f(prof.t_n_plus));
    put(t, "t_a_minus", f(prof.t_a_minus));
    put(t, "t_a_plus", f(prof.t_a_plus));
    put(t, "peak_queue", f(prof.queue_delay.eval(0.0)));
    let t = out.section("check");
    put(t, "nv_in_window", f(rep.nv_in_window));
    put(t, "sav_in_window", f(rep.sav_in_window));
    put(t, "nv_outside_slack", f(rep.nv_outside_slack));
    put(t, "sav_outside_slack", f(rep.sav_outside_slack));
    put(t, "capacity_violation", f(rep.capacity_violation));
    put(t, "mass_error", f(rep.mass_error));
    put(t, "passed", Value::Boolean(rep.passed));
    Ok(rep.passed)
}

#[derive(Serialize)]
struct TrajectoryRow {
    protocol: &'static str,
    start: f64,
    u: f64,
    n_a: f64,
    c_n: f64,
    c_a: f64,
    fare: f64,
    velocity: f64,
}

#[derive(Serialize)]
struct ClassRow {
    protocol: &'static str,
    regime: &'static str,
    n_a: f64,
    delta: f64,
    stability: &'static str,
    degenerate: bool,
    below_limit: f64,
    above_limit: f64,
}

pub fn stability(ctx: &Ctx, out: &mut Output) -> Result<bool, CliError> {
    let vp = ctx.vp;
    let n = vp.n_total;
    let rule = match ctx.cfg.fare_rule {
        RuleChoice::AverageCost => FareRule::AverageCost,
        RuleChoice::Fixed => FareRule::Fixed(ctx.cfg.fare.unwrap_or(vp.m)),
    };
    let starts = match &ctx.cfg.initial_n_a {
        Some(v) => {
            if let Some(bad) = v.iter().find(|x| !(**x >= 0.0 && **x <= n)) {
                return Err(CliError::Config(format!("initial_n_a {bad} outside [0, {n}]")));
            }
            v.clone()
        }
        None => [0.05, 0.25, 0.5, 0.75, 0.95].iter().map(|x| x * n).collect(),
    };
    let opts = IntegrateOptions::default();
    let per_protocol: Vec<_> = ctx
        .cfg
        .protocols
        .par_iter()
        .map(|&proto| {
            let mut traj_rows = Vec::new();
            let mut limits = Vec::new();
            for &x0 in &starts {
                let traj = integrate(vp, rule, x0, proto, &opts);
                limits.push(traj.last());
                traj_rows.extend(
                    sample_trajectory(vp, rule, &traj, ctx.cfg.trajectory_rows)
                        .into_iter()
                        .map(|r| TrajectoryRow {
                            protocol: proto.label(),
                            start: x0,
                            u: r.u,
                            n_a: r.n_a,
                            c_n: r.c_n,
                            c_a: r.c_a,
                            fare: r.fare,
                            velocity: r.velocity,
                        }),
                );
            }
            let rep = classify(vp, rule, proto, &opts);
            let class_rows: Vec<ClassRow> = rep
                .points
                .iter()
                .map(|p| ClassRow {
                    protocol: proto.label(),
                    regime: p.point.regime.map_or("rest", |r| r.label()),
                    n_a: p.point.n_a,
                    delta: p.delta,
                    stability: p.stability.label(),
                    degenerate: p.degenerate,
                    below_limit: p.below_limit,
                    above_limit: p.above_limit,
                })
                .collect();
            let basin = match rule {
                FareRule::AverageCost => basin_threshold(vp, proto, 1e-6, &opts),
                FareRule::Fixed(_) => None,
            };
            (proto, traj_rows, class_rows, basin)
        })
        .collect();

    let mut traj_rows = Vec::new();
    let mut class_rows = Vec::new();
    for (proto, t, c, basin) in per_protocol {
        traj_rows.extend(t);
        class_rows.extend(c);
        let sec = out.section(proto.label());
        if let Protocol::BestResponse { temperature } = proto {
            put(sec, "temperature", f(temperature));
        }
        if let Some(b) = basin {
            put(sec, "basin_threshold", f(b));
        }
    }
    out.write_csv("trajectories.csv", &traj_rows)?;
    out.write_csv("classification.csv", &class_rows)?;
    let ac = solve_ac(vp);
    let t = out.section("rest_points");
    put(
        t,
        "fare_rule",
        s(if matches!(rule, FareRule::AverageCost) {
            "ac"
        } else {
            "fixed"
        }),
    );
    if let Some(e) = ac.ac1() {
        put(t, "ac1_n_a", f(e.n_a()));
    }
    if let Some(e) = ac.ac2() {
        put(t, "ac2_n_a", f(e.n_a()));
    }
    Ok(true)
}

#[derive(Serialize)]
struct TollRow {
    t: f64,
    tau_nv: f64,
    tau_sav: f64,
    mode: &'static str,
}

#[derive(Serialize)]
struct CellRow {
    cell: usize,
    t_mid: f64,
    nv_mass: f64,
    sav_mass: f64,
    dual: f64,
    tau_closed_form: f64,
}

pub fn firstbest(ctx: &Ctx, out: &mut Output) -> Result<bool, CliError> {
    let vp = ctx.vp;
    let fb = solve_first_best(vp);
    let tolls: Vec<TollRow> = sample_tolls(vp, &fb, ctx.cfg.toll_points)
        .into_iter()
        .map(|r| TollRow {
            t: r.t,
            tau_nv: r.tau_nv,
            tau_sav: r.tau_sav,
            mode: r.mode.label(),
        })
        .collect();
    out.write_csv("tolls.csv", &tolls)?;

    let method = match ctx.cfg.lp_method {
        LpChoice::Greedy => LpMethod::Greedy,
        LpChoice::Simplex => LpMethod::Simplex,
    };
    let grid = TimeGrid::covering(&fb, ctx.cfg.grid_cells, ctx.cfg.grid_margin);
    let lp = solve_first_best_lp(vp, grid, method)?;
    let cells: Vec<CellRow> = (0..grid.cells)
        .map(|i| {
            let t = grid.midpoint(i);
            CellRow {
                cell: i,
                t_mid: t,
                nv_mass: lp.nv_mass[i],
                sav_mass: lp.sav_mass[i],
                dual: lp.duals[i],
                tau_closed_form: toll(vp, &fb, t),
            }
        })
        .collect();
    out.write_csv("lp_cells.csv", &cells)?;

    let sc = first_best_social_cost(vp, &fb);
    let obj_gap = (lp.objective - sc).abs() / sc.abs();
    let cell_mass = vp.mu * grid.step() / vp.kappa;
    let rider_gap = (lp.n_a() - fb.split.n_a).abs() / cell_mass;
    let pareto = pareto_check(vp);
    let fin = self_financing_check(vp);

    let t = out.section("first_best");
    put(t, "case", s(fb.case.label()));
    put(t, "n_n", f(fb.split.n_n));
    put(t, "n_a", f(fb.split.n_a));
    put(t, "cost", f(fb.cost));
    put(t, "t_n_minus", f(fb.t_n_minus));
    put(t, "t_n_plus", f(fb.t_n_plus));
    put(t, "t_a_minus", f(fb.t_a_minus));
    put(t, "t_a_plus", f(fb.t_a_plus));
    put(t, "toll_peak", f(toll(vp, &fb, 0.0)));
    put(t, "social_cost", f(sc));
    let t = out.section("lp");
    put(
        t,
        "method",
        s(if method == LpMethod::Greedy {
            "greedy"
        } else {
            "simplex"
        }),
    );
    put(t, "cells", Value::Integer(grid.cells as i64));
    put(t, "objective", f(lp.objective));
    put(t, "objective_gap", f(obj_gap));
    put(t, "n_a", f(lp.n_a()));
    put(t, "n_a_gap_cells", f(rider_gap));
    put(t, "lambda", f(lp.lambda));
    let t = out.section("pareto");
    put(t, "eta", f(pareto.eta));
    put(t, "c_mc", f(pareto.c_mc));
    put(t, "c_fb", f(pareto.c_fb));
    put(t, "slack", f(pareto.slack));
    put(t, "expected_slack", f(pareto.expected_slack));
    put(t, "pareto_improvement", Value::Boolean(pareto.pareto_improvement));
    let t = out.section("self_financing");
    put(t, "toll_revenue", f(fin.lhs));
    put(t, "trapezoid", f(fin.rhs));
    put(t, "relative_gap", f(fin.relative_gap));
    Ok(obj_gap <= 1e-3 && rider_gap <= 2.0 && pareto.consistent && fin.relative_gap <= 1e-6)
}

#[derive(Serialize)]
struct CurveRow {
    n_a: f64,
    fare: f64,
    social_cost: f64,
    dsc_dn_a: f64,
}

pub fn secondbest(ctx: &Ctx, out: &mut Output) -> Result<bool, CliError> {
    let vp = ctx.vp;
    let n = vp.n_total;
    let k = ctx.cfg.curve_points;
    let rows = (0..k)
        .map(|i| {
            let n_a = n * i as f64 / (k - 1) as f64;
            Ok(CurveRow {
                n_a,
                fare: inverse_fare(vp, n_a),
                social_cost: sc_of_split(vp, n_a)?,
                dsc_dn_a: sc_derivative(vp, n_a),
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    out.write_csv("sc_curve.csv", &rows)?;
    let sb = solve_second_best(vp);
    let t = out.section("second_best");
    put(t, "n_a", f(sb.n_a_sb));
    put(t, "n_a_unclamped", f(sb.n_a_raw));
    put(t, "fare", f(sb.fare_sb));
    put(t, "clamped", s(sb.clamped.label()));
    put(t, "social_cost", f(sb.sc_sb));
    Ok(true)
}

#[derive(Serialize)]
struct WelfareRow {
    rank: usize,
    regime: &'static str,
    social_cost: f64,
}

#[derive(Serialize)]
struct ContourRow {
    eta: f64,
    kappa: f64,
    n_a: f64,
    social_cost: f64,
}

pub fn welfare(ctx: &Ctx, out: &mut Output) -> Result<bool, CliError> {
    let vp = ctx.vp;
    let table = regime_social_costs(vp)?;
    let rows: Vec<WelfareRow> = table
        .ranking
        .iter()
        .enumerate()
        .map(|(i, r)| WelfareRow {
            rank: i + 1,
            regime: r.label(),
            social_cost: table.sc(*r).expect("ranked regimes have a cost"),
        })
        .collect();
    out.write_csv("welfare.csv", &rows)?;

    let c = ctx.cfg;
    let etas: Vec<f64> = (0..c.eta_steps)
        .map(|i| c.eta_min + (c.eta_max - c.eta_min) * i as f64 / (c.eta_steps - 1) as f64)
        .collect();
    let mut contour: Vec<ContourRow> = etas
        .par_chunks(1)
        .flat_map_iter(|e| sc_surface(vp, e, c.contour_points))
        .map(|p| ContourRow {
            eta: p.eta,
            kappa: 1.0 - p.eta * (1.0 - vp.theta),
            n_a: p.n_a,
            social_cost: p.sc,
        })
        .collect();
    contour.sort_by(|a, b| a.eta.total_cmp(&b.eta).then(a.n_a.total_cmp(&b.n_a)));
    out.write_csv("contour.csv", &contour)?;

    let th = table.thresholds;
    let t = out.section("thresholds");
    put(t, "n_min", f(th.n_min));
    put(t, "n_c_mc_ac", threshold_value(th.n_c_mc_ac));
    put(t, "n_c_mc_m", threshold_value(th.n_c_mc_m));
    put(t, "n_c_ac_m", threshold_value(th.n_c_ac_m));
    put(t, "f_a_c", threshold_value(th.f_a_c));
    let chain: Vec<String> = table
        .expected_chain
        .iter()
        .map(|l| {
            format!(
                "{} {} {}",
                l.left.label(),
                if l.strict { "<" } else { "<=" },
                l.right.label()
            )
        })
        .collect();
    let t = out.section("ranking");
    put(t, "eta_regime", s(table.eta_regime.label()));
    put(
        t,
        "expected_chain",
        Value::Array(chain.into_iter().map(Value::String).collect()),
    );
    put(t, "chain_holds", Value::Boolean(table.chain_holds));
    Ok(table.chain_holds)
}

#[derive(Serialize)]
struct ParadoxRow {
    value: f64,
    c_mc: f64,
    dc_dmu_mc: f64,
    c_monopoly: f64,
    dc_dmu_monopoly: f64,
    n_a_ac2: Option<f64>,
    c_ac2: Option<f64>,
    dc_dmu_ac2: Option<f64>,
    finite_diff_ac2: Option<f64>,
    paradox_lhs: Option<f64>,
    paradox: Option<bool>,
}

fn default_sweep(vp: &ValidatedParams) -> Sweep {
    Sweep {
        axis: "mu".into(),
        min: 0.5 * vp.mu,
        max: 1.5 * vp.mu,
        steps: 50,
    }
}

pub fn paradox(ctx: &Ctx, out: &mut Output) -> Result<bool, CliError> {
    let sweep = ctx.cfg.sweep.clone().unwrap_or_else(|| default_sweep(ctx.vp));
    let tol = ctx.vp.tol();
    let points = sweep
        .values()
        .into_iter()
        .map(|x| {
            let mut p = *ctx.vp.params();
            p.set(&sweep.axis, x);
            validate_with_tol(p, tol)
                .map(|v| (x, v))
                .map_err(|e| CliError::Config(format!("sweep point {} = {x} is invalid: {e}", sweep.axis)))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows = points
        .par_iter()
        .map(|(x, v)| {
            let mc = capacity_sensitivity(v, Regime::Mc)?;
            let mono = capacity_sensitivity(v, Regime::Monopoly)?;
            let ac2 = capacity_sensitivity(v, Regime::Ac2).ok();
            let ac = solve_ac(v);
            Ok(ParadoxRow {
                value: *x,
                c_mc: solve_mc(v).cost,
                dc_dmu_mc: mc.dc_dmu,
                c_monopoly: solve_monopoly(v).cost,
                dc_dmu_monopoly: mono.dc_dmu,
                n_a_ac2: ac.ac2().map(|e| e.n_a()),
                c_ac2: ac.ac2().map(|e| e.cost),
                dc_dmu_ac2: ac2.map(|s| s.dc_dmu),
                finite_diff_ac2: ac2.map(|s| s.finite_diff),
                paradox_lhs: ac2.and_then(|s| s.paradox_lhs),
                paradox: ac2.map(|s| s.paradox),
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    rows.sort_by(|a, b| a.value.total_cmp(&b.value));
    out.write_csv("paradox.csv", &rows)?;

    // the sign flag and the finite-difference slope must agree wherever the
    // slope is clearly away from zero
    let disagree = rows
        .iter()
        .filter(|r| match (r.paradox, r.finite_diff_ac2, r.dc_dmu_ac2) {
            (Some(p), Some(fd), Some(d)) => fd.abs() > 1e-6 * d.abs().max(1e-300) && p != (fd > 0.0),
            _ => false,
        })
        .count();
    let t = out.section("sweep");
    put(t, "axis", s(&sweep.axis));
    put(t, "min", f(sweep.min));
    put(t, "max", f(sweep.max));
    put(t, "steps", Value::Integer(sweep.steps as i64));
    put(
        t,
        "paradox_points",
        Value::Integer(rows.iter().filter(|r| r.paradox == Some(true)).count() as i64),
    );
    put(t, "sign_disagreements", Value::Integer(disagree as i64));
    Ok(disagree == 0)
}

pub fn strategy(ctx: &Ctx, out: &mut Output) -> Result<bool, CliError> {
    let vp = ctx.vp;
    let current = ctx.cfg.current_n_a.unwrap_or_else(|| solve_monopoly(vp).n_a());
    if !(current >= 0.0 && current <= vp.n_total) {
        return Err(CliError::Config(format!(
            "current_n_a {current} outside [0, {}]",
            vp.n_total
        )));
    }
    let rep = recommend_strategy(vp, current)?;
    let t = out.section("strategy");
    for (k, v) in rep.key_values() {
        let value = match v.parse::<f64>() {
            Ok(x) => f(x),
            Err(_) => match v.as_str() {
                "true" => Value::Boolean(true),
                "false" => Value::Boolean(false),
                _ => s(&v),
            },
        };
        put(t, k, value);
    }
    println!("commuter objective: {}", rep.commuter_advice);
    println!("social objective: {}", rep.social_advice);
    Ok(true)
}

#[derive(Serialize)]
struct VerifyRow {
    check: &'static str,
    residual: f64,
    tolerance: f64,
    passed: bool,
}

pub fn verify(ctx: &Ctx, out: &mut Output) -> Result<bool, CliError> {
    let rep = run_suite(ctx.vp, ctx.tol);
    let rows: Vec<VerifyRow> = rep
        .checks
        .iter()
        .map(|c| VerifyRow {
            check: c.name,
            residual: c.residual,
            tolerance: c.tolerance,
            passed: c.passed,
        })
        .collect();
    out.write_csv("verify.csv", &rows)?;
    let failed: Vec<Value> = rep.checks.iter().filter(|c| !c.passed).map(|c| s(c.name)).collect();
    let t = out.section("verify");
    put(t, "checks", Value::Integer(rep.checks.len() as i64));
    put(t, "failed", Value::Array(failed));
    for c in rep.checks.iter().filter(|c| !c.passed) {
        eprintln!(
            "check {} failed: residual {:e} > tolerance {:e}",
            c.name, c.residual, c.tolerance
        );
    }
    Ok(rep.passed)
}

//! Time-discretised system-optimum linear program.
//!
//! Each cell carries NV mass `x_n` and SAV mass `x_a` with
//! `x_n + kappa x_a <= mu h`; total mass is `N`. A cell's cost as a function
//! of the mass it carries is convex and piecewise linear (NVs first, then
//! NV-to-SAV conversion), so filling the cheapest segments first is exact.

use minilp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};
use serde::Serialize;

use super::FirstBestSolution;
use crate::error::{ModelError, Result};
use crate::params::ValidatedParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeGrid {
    pub start: f64,
    pub end: f64,
    pub cells: usize,
}

impl TimeGrid {
    pub fn new(start: f64, end: f64, cells: usize) -> Self {
        TimeGrid { start, end, cells }
    }

    /// `cells` cells over the closed-form rush hour widened by `margin`
    /// times its width on each side.
    pub fn covering(sol: &FirstBestSolution, cells: usize, margin: f64) -> Self {
        let w = sol.t_n_plus - sol.t_n_minus;
        TimeGrid {
            start: sol.t_n_minus - margin * w,
            end: sol.t_n_plus + margin * w,
            cells,
        }
    }

    pub fn step(&self) -> f64 {
        (self.end - self.start) / self.cells as f64
    }

    pub fn cell_bounds(&self, i: usize) -> (f64, f64) {
        let h = self.step();
        (self.start + h * i as f64, self.start + h * (i + 1) as f64)
    }

    pub fn midpoint(&self, i: usize) -> f64 {
        let (a, b) = self.cell_bounds(i);
        0.5 * (a + b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LpMethod {
    /// Sorted fill of per-cell cost segments.
    Greedy,
    /// General simplex solver; duals recovered by complementary slackness.
    Simplex,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteSolution {
    pub grid: TimeGrid,
    pub method: LpMethod,
    /// NV mass per cell.
    pub nv_mass: Vec<f64>,
    /// SAV mass per cell.
    pub sav_mass: Vec<f64>,
    /// Resource cost plus `F_a`.
    pub objective: f64,
    /// Multiplier of the total-mass row: the uniform commuting cost.
    pub lambda: f64,
    /// Multipliers of the capacity rows: the discrete NV toll.
    pub duals: Vec<f64>,
}

impl DiscreteSolution {
    pub fn n_a(&self) -> f64 {
        self.sav_mass.iter().sum()
    }

    pub fn n_n(&self) -> f64 {
        self.nv_mass.iter().sum()
    }

    /// Cells carrying both modes above `eps` mass.
    pub fn mixed_cells(&self, eps: f64) -> Vec<usize> {
        (0..self.grid.cells)
            .filter(|&i| self.nv_mass[i] > eps && self.sav_mass[i] > eps)
            .collect()
    }
}

/// Exact average of the schedule cost over `[a, b]`.
fn mean_schedule_cost(vp: &ValidatedParams, a: f64, b: f64) -> f64 {
    let prim = |t: f64| {
        if t < 0.0 {
            -0.5 * vp.beta * t * t
        } else {
            0.5 * vp.gamma * t * t
        }
    };
    // both pieces of the primitive vanish at 0, so it is continuous there
    (prim(b) - prim(a)) / (b - a)
}

struct CellCosts {
    nv: Vec<f64>,
    sav: Vec<f64>,
}

fn cell_costs(vp: &ValidatedParams, grid: &TimeGrid) -> CellCosts {
    let (nv, sav) = (0..grid.cells)
        .map(|i| {
            let (a, b) = grid.cell_bounds(i);
            let s = mean_schedule_cost(vp, a, b);
            (vp.t_f + s + vp.f_n, vp.theta * vp.t_f + s + vp.m)
        })
        .unzip();
    CellCosts { nv, sav }
}

fn duals_for(vp: &ValidatedParams, costs: &CellCosts, lambda: f64) -> Vec<f64> {
    costs
        .nv
        .iter()
        .zip(&costs.sav)
        .map(|(&c_n, &c_a)| 0.0f64.max(lambda - c_n).max((lambda - c_a) / vp.kappa))
        .collect()
}

/// Solves the discretised system-optimum problem on `grid`.
pub fn solve_first_best_lp(vp: &ValidatedParams, grid: TimeGrid, method: LpMethod) -> Result<DiscreteSolution> {
    let h = grid.step();
    let cap = vp.mu * h;
    if grid.cells == 0 || h.is_nan() || h <= 0.0 || grid.cells as f64 * cap / vp.kappa < vp.n_total {
        return Err(ModelError::InfeasibleGrid {
            start: grid.start,
            end: grid.end,
            cells: grid.cells,
            n_total: vp.n_total,
        });
    }
    let costs = cell_costs(vp, &grid);
    match method {
        LpMethod::Greedy => Ok(greedy(vp, grid, costs)),
        LpMethod::Simplex => simplex(vp, grid, costs),
    }
}

fn greedy(vp: &ValidatedParams, grid: TimeGrid, costs: CellCosts) -> DiscreteSolution {
    let cap = vp.mu * grid.step();
    let kappa = vp.kappa;
    let b = vp.b();
    // (marginal cost per unit mass, cell, is_sav_segment, amount)
    let mut segs: Vec<(f64, usize, bool, f64)> = Vec::with_capacity(2 * grid.cells);
    for i in 0..grid.cells {
        if b > 0.0 {
            segs.push((costs.nv[i], i, false, cap));
            segs.push((costs.nv[i] + b / (1.0 - kappa), i, true, cap * (1.0 / kappa - 1.0)));
        } else {
            segs.push((costs.sav[i], i, true, cap / kappa));
        }
    }
    segs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));

    let mut nv = vec![0.0; grid.cells];
    let mut sav = vec![0.0; grid.cells];
    let mut remaining = vp.n_total;
    let mut lambda = 0.0;
    for (cost, i, is_sav, amount) in segs {
        if remaining <= 0.0 {
            break;
        }
        let take = amount.min(remaining);
        remaining -= take;
        lambda = cost;
        if !is_sav {
            nv[i] += take;
        } else if b > 0.0 {
            // converting: each unit of extra mass swaps NV capacity for SAVs
            let extra_sav = take / (1.0 - kappa);
            sav[i] += extra_sav;
            nv[i] -= kappa * extra_sav;
        } else {
            sav[i] += take;
        }
    }
    for x in nv.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let objective = objective(vp, &costs, &nv, &sav);
    let duals = duals_for(vp, &costs, lambda);
    DiscreteSolution {
        grid,
        method: LpMethod::Greedy,
        nv_mass: nv,
        sav_mass: sav,
        objective,
        lambda,
        duals,
    }
}

fn objective(vp: &ValidatedParams, costs: &CellCosts, nv: &[f64], sav: &[f64]) -> f64 {
    let resource: f64 = nv
        .iter()
        .zip(sav)
        .zip(costs.nv.iter().zip(&costs.sav))
        .map(|((x_n, x_a), (c_n, c_a))| x_n * c_n + x_a * c_a)
        .sum();
    resource + vp.f_a
}

fn simplex(vp: &ValidatedParams, grid: TimeGrid, costs: CellCosts) -> Result<DiscreteSolution> {
    let cap = vp.mu * grid.step();
    let mut problem = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = (0..grid.cells)
        .map(|i| {
            (
                problem.add_var(costs.nv[i], (0.0, f64::INFINITY)),
                problem.add_var(costs.sav[i], (0.0, f64::INFINITY)),
            )
        })
        .collect();
    let mut total = LinearExpr::empty();
    for &(xn, xa) in &vars {
        problem.add_constraint([(xn, 1.0), (xa, vp.kappa)], ComparisonOp::Le, cap);
        total.add(xn, 1.0);
        total.add(xa, 1.0);
    }
    problem.add_constraint(total, ComparisonOp::Eq, vp.n_total);
    let sol = problem.solve().map_err(|e| ModelError::Lp(e.to_string()))?;
    let nv: Vec<f64> = vars.iter().map(|&(xn, _)| sol[xn].max(0.0)).collect();
    let sav: Vec<f64> = vars.iter().map(|&(_, xa)| sol[xa].max(0.0)).collect();

    // The mass multiplier is the largest marginal cost among segments in use.
    let eps = 1e-9 * cap;
    let conversion = vp.b() / (1.0 - vp.kappa);
    let mut lambda = f64::NEG_INFINITY;
    for i in 0..grid.cells {
        if vp.b() > 0.0 {
            if nv[i] > eps || sav[i] > eps {
                lambda = lambda.max(costs.nv[i]);
            }
            if sav[i] > eps {
                lambda = lambda.max(costs.nv[i] + conversion);
            }
        } else if sav[i] > eps {
            lambda = lambda.max(costs.sav[i]);
        }
    }
    let duals = duals_for(vp, &costs, lambda);
    Ok(DiscreteSolution {
        grid,
        method: LpMethod::Simplex,
        objective: objective(vp, &costs, &nv, &sav),
        nv_mass: nv,
        sav_mass: sav,
        lambda,
        duals,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{first_best_social_cost, solve_first_best, toll};
    use super::*;
    use crate::params::{validate, ModelParams};
    use crate::scenarios;

    #[test]
    fn mean_schedule_cost_straddles_zero() {
        let vp = validate(scenarios::fig2()).unwrap();
        let m = mean_schedule_cost(&vp, -1.0, 3.0);
        let exact = (0.5 * 0.4 * 1.0 + 0.5 * 0.4 * 9.0) / 4.0;
        assert!((m - exact).abs() < 1e-15);
    }

    #[test]
    fn fig2_greedy_matches_closed_form() {
        let vp = validate(scenarios::fig2()).unwrap();
        let fb = solve_first_best(&vp);
        let grid = TimeGrid::covering(&fb, 2000, 0.05);
        let d = solve_first_best_lp(&vp, grid, LpMethod::Greedy).unwrap();
        let sc = first_best_social_cost(&vp, &fb);
        assert!((d.objective - sc).abs() <= 1e-3 * sc, "{} vs {sc}", d.objective);
        let cell_mass = vp.mu * grid.step() / vp.kappa;
        assert!((d.n_a() - fb.split.n_a).abs() <= 2.0 * cell_mass);
        assert!((d.n_a() + d.n_n() - vp.n_total).abs() < 1e-9 * vp.n_total);
        assert!(d.mixed_cells(1e-12).len() <= 2);
        assert!((d.lambda - fb.cost).abs() < 1e-2 * fb.cost);
        let i0 = (0..grid.cells)
            .find(|&i| grid.cell_bounds(i).0 <= 0.0 && grid.cell_bounds(i).1 > 0.0)
            .unwrap();
        let t = grid.midpoint(i0 + 5);
        assert!((d.duals[i0 + 5] - toll(&vp, &fb, t)).abs() < 1e-2 * toll(&vp, &fb, t));
    }

    #[test]
    fn simplex_agrees_with_greedy() {
        let vp = validate(ModelParams {
            n_total: 200.0,
            ..scenarios::fig2()
        })
        .unwrap();
        let fb = solve_first_best(&vp);
        let grid = TimeGrid::covering(&fb, 120, 0.05);
        let g = solve_first_best_lp(&vp, grid, LpMethod::Greedy).unwrap();
        let s = solve_first_best_lp(&vp, grid, LpMethod::Simplex).unwrap();
        assert!((g.objective - s.objective).abs() < 1e-6 * g.objective);
        assert!((g.lambda - s.lambda).abs() < 1e-6 * g.lambda);
    }

    #[test]
    fn narrow_grid_is_infeasible() {
        let vp = validate(scenarios::fig2()).unwrap();
        let err = solve_first_best_lp(&vp, TimeGrid::new(-1.0, 1.0, 10), LpMethod::Greedy).unwrap_err();
        assert!(matches!(err, ModelError::InfeasibleGrid { .. }));
    }

    #[test]
    fn tiny_population_sits_at_desired_time() {
        let vp = validate(ModelParams {
            n_total: 1e-6,
            ..scenarios::fig2()
        })
        .unwrap();
        let grid = TimeGrid::new(-10.0, 10.0, 21);
        let d = solve_first_best_lp(&vp, grid, LpMethod::Greedy).unwrap();
        let centre = (0..21)
            .max_by(|&a, &b| (d.nv_mass[a] + d.sav_mass[a]).total_cmp(&(d.nv_mass[b] + d.sav_mass[b])))
            .unwrap();
        assert_eq!(centre, 10);
        let expected = vp.n_total * (vp.t_f + vp.f_n) + vp.f_a;
        assert!((d.objective - expected).abs() < 1e-6);
    }
}

//! System-optimal departure pattern with time-varying tolls: closed form,
//! toll schedule, Pareto comparison with marginal-cost pricing and the
//! toll-revenue identity.

mod lp;

pub use lp::{solve_first_best_lp, DiscreteSolution, LpMethod, TimeGrid};

use serde::Serialize;

use crate::departure::{ModeSplit, PiecewiseLinear};
use crate::fares::solve_mc;
use crate::oracle;
use crate::params::ValidatedParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FirstBestCase {
    /// SAVs in an inner window, NVs on the shoulders.
    Mixed,
    /// Too few commuters for SAVs to pay off.
    NvOnly,
    /// `B <= 0`: SAV is cheaper in every time slot.
    SavOnly,
}

impl FirstBestCase {
    pub fn label(self) -> &'static str {
        match self {
            FirstBestCase::Mixed => "mixed",
            FirstBestCase::NvOnly => "nv_only",
            FirstBestCase::SavOnly => "sav_only",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FirstBestSolution {
    pub case: FirstBestCase,
    pub split: ModeSplit,
    /// Uniform commuting cost including the toll.
    pub cost: f64,
    pub t_n_minus: f64,
    pub t_n_plus: f64,
    /// Empty (both zero) in the NV-only case.
    pub t_a_minus: f64,
    pub t_a_plus: f64,
}

impl FirstBestSolution {
    pub fn flowing(&self, t: f64) -> Mode {
        if self.case != FirstBestCase::NvOnly && t > self.t_a_minus && t < self.t_a_plus {
            Mode::Sav
        } else if self.case != FirstBestCase::SavOnly && t >= self.t_n_minus && t <= self.t_n_plus {
            Mode::Nv
        } else if self.case == FirstBestCase::SavOnly && t >= self.t_a_minus && t <= self.t_a_plus {
            Mode::Sav
        } else {
            Mode::None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Mode {
    Nv,
    Sav,
    None,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::Nv => "nv",
            Mode::Sav => "sav",
            Mode::None => "none",
        }
    }
}

/// Population above which the optimum mixes both modes.
pub fn mixed_threshold(vp: &ValidatedParams) -> f64 {
    vp.b() / (vp.eta() * vp.a())
}

pub fn solve_first_best(vp: &ValidatedParams) -> FirstBestSolution {
    let (a, b, n, theta, kappa) = (vp.a(), vp.b(), vp.n_total, vp.theta, vp.kappa);
    let (beta, gamma) = (vp.beta, vp.gamma);
    let a1 = vp.derived().congestion;
    let early = gamma / (beta + gamma);
    let late = beta / (beta + gamma);
    if b <= 0.0 {
        let w = kappa * n / vp.mu;
        return FirstBestSolution {
            case: FirstBestCase::SavOnly,
            split: ModeSplit { n_n: 0.0, n_a: n },
            cost: kappa * a1 * n + theta * vp.t_f + vp.m,
            t_n_minus: -early * w,
            t_n_plus: late * w,
            t_a_minus: -early * w,
            t_a_plus: late * w,
        };
    }
    if n <= mixed_threshold(vp) {
        let w = n / vp.mu;
        return FirstBestSolution {
            case: FirstBestCase::NvOnly,
            split: ModeSplit { n_n: n, n_a: 0.0 },
            cost: a * n / (1.0 - theta) + vp.t_f + vp.f_n,
            t_n_minus: -early * w,
            t_n_plus: late * w,
            t_a_minus: 0.0,
            t_a_plus: 0.0,
        };
    }
    let n_n = (1.0 - theta) * b / ((1.0 - kappa) * a);
    let reach = kappa * a * n + (1.0 - theta) * b;
    let t_n_minus = -reach / (beta * (1.0 - theta));
    let t_n_plus = reach / (gamma * (1.0 - theta));
    FirstBestSolution {
        case: FirstBestCase::Mixed,
        split: ModeSplit { n_n, n_a: n - n_n },
        cost: kappa * a * n / (1.0 - theta) + b + vp.t_f + vp.f_n,
        t_n_minus,
        t_n_plus,
        t_a_minus: t_n_minus + b / (beta * (1.0 - kappa)),
        t_a_plus: t_n_plus - b / (gamma * (1.0 - kappa)),
    }
}

/// NV toll at time `t`; SAVs pay `kappa` times this.
pub fn toll(vp: &ValidatedParams, sol: &FirstBestSolution, t: f64) -> f64 {
    let s = vp.schedule_cost(t);
    let value = match sol.flowing(t) {
        Mode::Nv => sol.cost - s - vp.t_f - vp.f_n,
        Mode::Sav => (sol.cost - s - vp.theta * vp.t_f - vp.m) / vp.kappa,
        Mode::None => 0.0,
    };
    value.max(0.0)
}

/// Knots of the toll schedule. Every branch is linear between the window
/// edges and the desired arrival time, so the interpolant is exact.
pub fn toll_schedule(vp: &ValidatedParams, sol: &FirstBestSolution) -> PiecewiseLinear {
    let mut ts = vec![sol.t_n_minus, sol.t_a_minus, 0.0, sol.t_a_plus, sol.t_n_plus];
    ts.sort_by(f64::total_cmp);
    let knots = ts
        .into_iter()
        .map(|t| {
            let y = if t == sol.t_n_minus || t == sol.t_n_plus {
                0.0
            } else {
                toll(vp, sol, t)
            };
            (t, y)
        })
        .collect();
    PiecewiseLinear::new(knots)
}

/// Social cost of the first-best pattern: resource cost including `F_a`.
pub fn first_best_social_cost(vp: &ValidatedParams, sol: &FirstBestSolution) -> f64 {
    vp.n_total * sol.cost - vp.mu * toll_schedule(vp, sol).integral() + vp.f_a
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParetoReport {
    pub eta: f64,
    pub case: FirstBestCase,
    pub c_fb: f64,
    pub c_mc: f64,
    /// `c_mc - c_fb`.
    pub slack: f64,
    /// `(eta - 1) B`; equals `slack` in the mixed case.
    pub expected_slack: f64,
    /// `eta A (N_a^FB - N_a^MC)`; equals `slack` in the mixed case.
    pub rider_identity: f64,
    pub pareto_improvement: bool,
    /// The sign of `slack` agrees with `eta - 1` (mixed case) or is
    /// negative (NV-only case with `eta < 1`).
    pub consistent: bool,
}

pub fn pareto_check(vp: &ValidatedParams) -> ParetoReport {
    let fb = solve_first_best(vp);
    let mc = solve_mc(vp);
    let eta = vp.eta();
    let slack = mc.cost - fb.cost;
    let expected_slack = (eta - 1.0) * vp.b();
    let rider_identity = eta * vp.a() * (fb.split.n_a - mc.n_a());
    let tol = 1e-9 * mc.cost.abs().max(1.0);
    let consistent = match fb.case {
        FirstBestCase::Mixed => (slack - expected_slack).abs() <= tol && (slack - rider_identity).abs() <= tol,
        FirstBestCase::NvOnly => eta >= 1.0 || slack < 0.0,
        FirstBestCase::SavOnly => true,
    };
    ParetoReport {
        eta,
        case: fb.case,
        c_fb: fb.cost,
        c_mc: mc.cost,
        slack,
        expected_slack,
        rider_identity,
        pareto_improvement: slack >= -tol,
        consistent,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SelfFinancing {
    /// `mu * integral of tau` from the exact piecewise-linear schedule.
    pub lhs: f64,
    /// Same quantity from the trapezoid rule on the toll evaluator.
    pub rhs: f64,
    pub relative_gap: f64,
}

pub const SELF_FINANCING_POINTS: usize = 10_000;

/// Toll revenue, which equals the break-even capacity investment when
/// capacity cost is homogeneous of degree one.
pub fn self_financing_check(vp: &ValidatedParams) -> SelfFinancing {
    let sol = solve_first_best(vp);
    let lhs = vp.mu * toll_schedule(vp, &sol).integral();
    let rhs = vp.mu
        * oracle::trapezoid(
            |t| toll(vp, &sol, t),
            sol.t_n_minus,
            sol.t_n_plus,
            SELF_FINANCING_POINTS,
        );
    SelfFinancing {
        lhs,
        rhs,
        relative_gap: (lhs - rhs).abs() / lhs.abs().max(f64::MIN_POSITIVE),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TollSample {
    pub t: f64,
    pub tau_nv: f64,
    pub tau_sav: f64,
    pub mode: Mode,
}

pub fn sample_tolls(vp: &ValidatedParams, sol: &FirstBestSolution, points: usize) -> Vec<TollSample> {
    let points = points.max(2);
    let w = sol.t_n_plus - sol.t_n_minus;
    let lo = sol.t_n_minus - 0.1 * w;
    let h = 1.2 * w / (points - 1) as f64;
    (0..points)
        .map(|i| {
            let t = lo + h * i as f64;
            let tau = toll(vp, sol, t);
            TollSample {
                t,
                tau_nv: tau,
                tau_sav: vp.kappa * tau,
                mode: sol.flowing(t),
            }
        })
        .collect()
}

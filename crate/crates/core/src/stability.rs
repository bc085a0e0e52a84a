//! Day-to-day mode-choice dynamics `dN_a/du = V(N_a)`, trajectory
//! integration and perturbation-based stability classification.

use serde::Serialize;

use crate::departure::{equilibrium_costs, ModeCosts, ModeSplit};
use crate::fares::{demand, solve_ac, Regime};
use crate::oracle;
use crate::params::ValidatedParams;

/// Revision protocol. All three satisfy positive correlation and Nash
/// stationarity in this two-mode setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Protocol {
    /// Pairwise comparison: switchers move at a rate proportional to the gap.
    Smith,
    /// Smoothed best response; the switching rate saturates as
    /// `tanh(gap / temperature)`.
    BestResponse { temperature: f64 },
    /// Brown-von Neumann-Nash excess-payoff dynamic.
    Bnn,
}

impl Protocol {
    pub const DEFAULT_TEMPERATURE: f64 = 1.0;

    pub fn best_response() -> Self {
        Protocol::BestResponse {
            temperature: Self::DEFAULT_TEMPERATURE,
        }
    }

    pub fn all() -> [Protocol; 3] {
        [Protocol::Smith, Protocol::best_response(), Protocol::Bnn]
    }

    pub fn label(&self) -> &'static str {
        match self {
            Protocol::Smith => "smith",
            Protocol::BestResponse { .. } => "best_response",
            Protocol::Bnn => "bnn",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum FareRule {
    Fixed(f64),
    /// `p = m + F_a / N_a`.
    AverageCost,
}

/// Smallest rider count used in the AC fare; keeps the SAV cost finite while
/// preserving the sign of the cost gap.
fn n_floor(vp: &ValidatedParams) -> f64 {
    1e-12 * vp.n_total
}

pub fn fare_at(vp: &ValidatedParams, rule: FareRule, n_a: f64) -> f64 {
    match rule {
        FareRule::Fixed(p) => p,
        FareRule::AverageCost => vp.m + vp.f_a / n_a.max(n_floor(vp)),
    }
}

/// Mode costs at `n_a` SAV riders under a fare rule.
pub fn costs_at(vp: &ValidatedParams, rule: FareRule, n_a: f64) -> ModeCosts {
    let n_a = n_a.clamp(0.0, vp.n_total);
    let split = ModeSplit {
        n_n: vp.n_total - n_a,
        n_a,
    };
    equilibrium_costs(vp, split, fare_at(vp, rule, n_a))
}

/// `V(N_a)`.
pub fn velocity(vp: &ValidatedParams, rule: FareRule, n_a: f64, protocol: Protocol) -> f64 {
    let n = vp.n_total;
    let n_a = n_a.clamp(0.0, n);
    let n_n = n - n_a;
    let g = costs_at(vp, rule, n_a).gap();
    let up = g.max(0.0);
    let down = (-g).max(0.0);
    match protocol {
        Protocol::Smith => n_n * up - n_a * down,
        Protocol::BestResponse { temperature } => n_n * (up / temperature).tanh() - n_a * (down / temperature).tanh(),
        Protocol::Bnn => (n_n * n_n * up - n_a * n_a * down) / n,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RestPoint {
    pub n_a: f64,
    pub regime: Option<Regime>,
}

/// Rest points of the dynamics, in increasing order of `n_a`.
pub fn rest_points(vp: &ValidatedParams, rule: FareRule) -> Vec<RestPoint> {
    let mut pts = match rule {
        FareRule::Fixed(p) => {
            let regime = (p == vp.m).then_some(Regime::Mc);
            vec![RestPoint {
                n_a: demand(vp, p).n_a,
                regime,
            }]
        }
        FareRule::AverageCost => solve_ac(vp)
            .equilibria
            .iter()
            .map(|e| RestPoint {
                n_a: e.n_a(),
                regime: Some(e.regime),
            })
            .collect(),
    };
    pts.sort_by(|a, b| a.n_a.total_cmp(&b.n_a));
    pts.dedup_by(|a, b| a.n_a == b.n_a);
    pts
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegrateOptions {
    pub horizon: f64,
    pub max_steps: usize,
    /// Largest accepted change of `n_a` per step, as a fraction of `N`.
    pub max_jump: f64,
    /// Convergence when `|V| < dwell_eps * N` ...
    pub dwell_eps: f64,
    /// ... for this many consecutive accepted steps.
    pub dwell_steps: usize,
    /// Distance (fraction of `N`) within which a limit is labelled.
    pub label_tol: f64,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions {
            horizon: 1e9,
            max_steps: 1_000_000,
            max_jump: 1e-3,
            dwell_eps: 1e-9,
            dwell_steps: 100,
            label_tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<f64>,
    pub converged_to: Option<RestPoint>,
    pub protocol: Protocol,
}

impl Trajectory {
    pub fn last(&self) -> f64 {
        *self.states.last().expect("trajectory has its initial state")
    }
}

/// Adaptive explicit Euler. A step is retried at half size when it moves
/// `n_a` by more than `max_jump * N` or flips the sign of `V`.
pub fn integrate(
    vp: &ValidatedParams,
    rule: FareRule,
    n_a0: f64,
    protocol: Protocol,
    opts: &IntegrateOptions,
) -> Trajectory {
    let n = vp.n_total;
    let mut x = n_a0.clamp(0.0, n);
    let mut u = 0.0;
    let mut times = vec![u];
    let mut states = vec![x];
    let jump = opts.max_jump * n;
    let v0 = velocity(vp, rule, x, protocol);
    let mut dt = if v0 != 0.0 {
        0.1 * jump / v0.abs()
    } else {
        1e-6 * opts.horizon
    };
    let mut dwell = 0usize;
    let mut converged = false;
    let mut steps = 0usize;
    while u < opts.horizon && steps < opts.max_steps {
        steps += 1;
        let v = velocity(vp, rule, x, protocol);
        if v == 0.0 {
            converged = true;
            break;
        }
        if v.abs() < opts.dwell_eps * n {
            dwell += 1;
            if dwell >= opts.dwell_steps {
                converged = true;
                break;
            }
        } else {
            dwell = 0;
        }
        dt = dt.min(1e-3 * opts.horizon).min(opts.horizon - u);
        let next = loop {
            let dx = v * dt;
            if dx.abs() > jump {
                dt *= 0.5;
                continue;
            }
            let cand = (x + dx).clamp(0.0, n);
            let v_next = velocity(vp, rule, cand, protocol);
            if v_next != 0.0 && v != 0.0 && v_next.signum() != v.signum() && cand != x {
                let half = 0.5 * dt;
                if x + v * half != x {
                    dt = half;
                    continue;
                }
            }
            break cand;
        };
        x = next;
        u += dt;
        times.push(u);
        states.push(x);
        dt *= 1.5;
    }
    let converged_to = if converged {
        rest_points(vp, rule)
            .into_iter()
            .filter(|p| (p.n_a - x).abs() <= opts.label_tol * n)
            .min_by(|a, b| (a.n_a - x).abs().total_cmp(&(b.n_a - x).abs()))
    } else {
        None
    };
    Trajectory {
        times,
        states,
        converged_to,
        protocol,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Stability {
    Stable,
    Unstable,
}

impl Stability {
    pub fn label(self) -> &'static str {
        match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointStability {
    pub point: RestPoint,
    pub delta: f64,
    pub stability: Stability,
    /// Coincident AC roots.
    pub degenerate: bool,
    /// Where the `-delta` and `+delta` perturbations ended up.
    pub below_limit: f64,
    pub above_limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub protocol: Protocol,
    pub points: Vec<PointStability>,
}

impl StabilityReport {
    pub fn get(&self, regime: Regime) -> Option<&PointStability> {
        self.points.iter().find(|p| p.point.regime == Some(regime))
    }
}

/// Perturbs every rest point by `+-delta` and integrates; a point is stable
/// when every perturbation that stays in `[0, N]` returns to it.
pub fn classify(vp: &ValidatedParams, rule: FareRule, protocol: Protocol, opts: &IntegrateOptions) -> StabilityReport {
    let n = vp.n_total;
    let pts = rest_points(vp, rule);
    let coincident = matches!(rule, FareRule::AverageCost) && solve_ac(vp).coincident;
    let base_delta = (1e-3 * n).max(10.0 * opts.dwell_eps * n);
    let mut out = Vec::with_capacity(pts.len());
    for (i, p) in pts.iter().enumerate() {
        let mut gap = f64::INFINITY;
        if i > 0 {
            gap = gap.min(p.n_a - pts[i - 1].n_a);
        }
        if i + 1 < pts.len() {
            gap = gap.min(pts[i + 1].n_a - p.n_a);
        }
        let delta = base_delta.min(0.25 * gap);
        let returns = |start: f64| -> (bool, f64) {
            let traj = integrate(vp, rule, start, protocol, opts);
            let end = traj.last();
            let back = match traj.converged_to {
                Some(c) => c.n_a == p.n_a,
                None => (end - p.n_a).abs() < 0.5 * delta,
            };
            (back, end)
        };
        let (below_ok, below_limit) = if p.n_a - delta >= 0.0 {
            returns(p.n_a - delta)
        } else {
            (true, p.n_a)
        };
        let (above_ok, above_limit) = if p.n_a + delta <= n {
            returns(p.n_a + delta)
        } else {
            (true, p.n_a)
        };
        let degenerate = coincident && p.regime == Some(Regime::Ac1);
        out.push(PointStability {
            point: *p,
            delta,
            stability: if below_ok && above_ok {
                Stability::Stable
            } else {
                Stability::Unstable
            },
            degenerate,
            below_limit,
            above_limit,
        });
    }
    StabilityReport { protocol, points: out }
}

/// Locates the boundary between the basins of the rider-less and the
/// high-adoption AC equilibria by bisection on the initial state.
/// Returns `None` unless both stable AC equilibria exist.
pub fn basin_threshold(vp: &ValidatedParams, protocol: Protocol, rel_tol: f64, opts: &IntegrateOptions) -> Option<f64> {
    let ac = solve_ac(vp);
    if ac.coincident {
        return None;
    }
    let hi_eq = ac.get(Regime::Ac2)?.n_a();
    let lo_eq = 0.0;
    let limit_is_high = |start: f64| -> Option<bool> {
        let traj = integrate(vp, FareRule::AverageCost, start, protocol, opts);
        let end = traj.last();
        let tol = opts.label_tol * vp.n_total;
        if (end - hi_eq).abs() <= tol {
            Some(true)
        } else if (end - lo_eq).abs() <= tol {
            Some(false)
        } else {
            None
        }
    };
    let (mut lo, mut hi) = (lo_eq, hi_eq);
    let tol = rel_tol * ac.ac1()?.n_a();
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        match limit_is_high(mid)? {
            true => hi = mid,
            false => lo = mid,
        }
    }
    Some(0.5 * (lo + hi))
}

/// Sign-scan oracle for the AC rest points: roots of the cost gap on `(0, N]`.
pub fn gap_roots(vp: &ValidatedParams, rule: FareRule, steps: usize) -> Vec<f64> {
    let n = vp.n_total;
    oracle::sign_change_roots(|x| costs_at(vp, rule, x).gap(), 1e-9 * n, n, steps, 1e-12 * n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectorySample {
    pub u: f64,
    pub n_a: f64,
    pub c_n: f64,
    pub c_a: f64,
    pub fare: f64,
    pub velocity: f64,
}

/// Rows for the trajectory table, thinned to at most `max_rows` (the last
/// state is always kept).
pub fn sample_trajectory(
    vp: &ValidatedParams,
    rule: FareRule,
    traj: &Trajectory,
    max_rows: usize,
) -> Vec<TrajectorySample> {
    let len = traj.states.len();
    let stride = len.div_ceil(max_rows.max(2) - 1).max(1);
    let mut idx: Vec<usize> = (0..len).step_by(stride).collect();
    if idx.last() != Some(&(len - 1)) {
        idx.push(len - 1);
    }
    idx.into_iter()
        .map(|i| {
            let n_a = traj.states[i];
            let c = costs_at(vp, rule, n_a);
            TrajectorySample {
                u: traj.times[i],
                n_a,
                c_n: c.c_n,
                c_a: c.c_a,
                fare: c.fare,
                velocity: velocity(vp, rule, n_a, traj.protocol),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{validate, ModelParams};
    use crate::scenarios;

    fn fig2() -> ValidatedParams {
        validate(scenarios::fig2()).unwrap()
    }

    #[test]
    fn velocity_signs_fig2() {
        let vp = fig2();
        for proto in Protocol::all() {
            assert!(velocity(&vp, FareRule::AverageCost, 30.0, proto) < 0.0);
            assert!(velocity(&vp, FareRule::AverageCost, 500.0, proto) > 0.0);
            assert!(velocity(&vp, FareRule::AverageCost, 950.0, proto) < 0.0);
            assert_eq!(velocity(&vp, FareRule::AverageCost, 0.0, proto), 0.0);
            for p in rest_points(&vp, FareRule::AverageCost) {
                let v = velocity(&vp, FareRule::AverageCost, p.n_a, proto);
                assert!(v.abs() < 1e-12 * vp.n_total * 1e3, "{proto:?} {p:?} {v}");
            }
        }
    }

    #[test]
    fn basins_fig2() {
        let vp = fig2();
        let opts = IntegrateOptions::default();
        for proto in Protocol::all() {
            let t = integrate(&vp, FareRule::AverageCost, 59.0, proto, &opts);
            assert_eq!(t.converged_to.unwrap().regime, Some(Regime::Ac0), "{proto:?}");
            let t = integrate(&vp, FareRule::AverageCost, 61.0, proto, &opts);
            assert_eq!(t.converged_to.unwrap().regime, Some(Regime::Ac2), "{proto:?}");
            assert!(t.states.iter().all(|s| (0.0..=vp.n_total).contains(s)));
        }
    }

    #[test]
    fn rest_point_stays_put() {
        let vp = fig2();
        let opts = IntegrateOptions::default();
        let t = integrate(&vp, FareRule::AverageCost, 60.0, Protocol::Smith, &opts);
        assert!(t.states.iter().all(|s| (s - 60.0).abs() <= 1e-9 * vp.n_total));
        assert_eq!(t.converged_to.unwrap().regime, Some(Regime::Ac1));
    }

    #[test]
    fn classify_fig2() {
        let vp = fig2();
        let opts = IntegrateOptions::default();
        for proto in Protocol::all() {
            let rep = classify(&vp, FareRule::AverageCost, proto, &opts);
            assert_eq!(rep.get(Regime::Ac0).unwrap().stability, Stability::Stable);
            assert_eq!(rep.get(Regime::Ac1).unwrap().stability, Stability::Unstable);
            assert_eq!(rep.get(Regime::Ac2).unwrap().stability, Stability::Stable);
        }
    }

    #[test]
    fn classify_tangent() {
        let f_a = 2304.0f64.powi(2) / 9.6;
        let vp = validate(ModelParams {
            f_a,
            ..scenarios::fig2()
        })
        .unwrap();
        let rep = classify(
            &vp,
            FareRule::AverageCost,
            Protocol::Smith,
            &IntegrateOptions::default(),
        );
        assert_eq!(rep.points.len(), 2);
        assert_eq!(rep.get(Regime::Ac0).unwrap().stability, Stability::Stable);
        let c = rep.get(Regime::Ac1).unwrap();
        assert!(c.degenerate);
        assert_eq!(c.stability, Stability::Unstable);
    }

    #[test]
    fn fixed_fare_unique_stable_point() {
        let vp = fig2();
        let rep = classify(
            &vp,
            FareRule::Fixed(vp.m),
            Protocol::Smith,
            &IntegrateOptions::default(),
        );
        assert_eq!(rep.points.len(), 1);
        assert!((rep.points[0].point.n_a - 960.0).abs() < 1e-9);
        assert_eq!(rep.points[0].stability, Stability::Stable);
    }

    #[test]
    fn basin_threshold_fig2() {
        let vp = fig2();
        let t = basin_threshold(&vp, Protocol::Smith, 1e-3, &IntegrateOptions::default()).unwrap();
        assert!((t - 60.0).abs() <= 0.002 * 60.0);
    }

    #[test]
    fn gap_roots_match_solver() {
        let vp = fig2();
        let r = gap_roots(&vp, FareRule::AverageCost, 4000);
        assert_eq!(r.len(), 2);
        assert!((r[0] - 60.0).abs() < 1e-8);
        assert!((r[1] - 900.0).abs() < 1e-8);
    }
}

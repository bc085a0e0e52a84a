//! Mode-choice equilibria under marginal-cost, average-cost and monopoly
//! fares, the demand curve, the cross-regime ordering and capacity
//! sensitivity.

use std::fmt;

use serde::Serialize;

use crate::departure::{equilibrium_costs, ModeCosts, ModeSplit};
use crate::error::{ModelError, Result};
use crate::params::ValidatedParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Regime {
    /// Marginal-cost fare `p = m`.
    Mc,
    /// Average-cost pricing with no SAV riders.
    Ac0,
    /// Average-cost pricing, low-adoption root.
    Ac1,
    /// Average-cost pricing, high-adoption root.
    Ac2,
    /// Unregulated profit-maximising fare.
    Monopoly,
}

impl Regime {
    pub fn label(self) -> &'static str {
        match self {
            Regime::Mc => "MC",
            Regime::Ac0 => "AC0",
            Regime::Ac1 => "AC1",
            Regime::Ac2 => "AC2",
            Regime::Monopoly => "monopoly",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Boundary {
    Interior,
    AllNv,
    AllSav,
}

impl Boundary {
    pub fn label(self) -> &'static str {
        match self {
            Boundary::Interior => "interior",
            Boundary::AllNv => "all_nv",
            Boundary::AllSav => "all_sav",
        }
    }
}

/// Which side, if any, a quantity was clamped to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Clamp {
    None,
    AtZero,
    AtN,
}

impl Clamp {
    pub fn label(self) -> &'static str {
        match self {
            Clamp::None => "none",
            Clamp::AtZero => "at_zero",
            Clamp::AtN => "at_N",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Equilibrium {
    pub regime: Regime,
    pub split: ModeSplit,
    /// `+inf` for AC pricing without riders and for an exited monopolist.
    pub fare: f64,
    /// Equilibrium commuting cost of the mode(s) in use.
    pub cost: f64,
    pub costs: ModeCosts,
    /// `(fare - m) N_a - F_a`, taken as `-F_a` when nobody rides.
    pub profit: f64,
    pub boundary: Boundary,
}

impl Equilibrium {
    pub fn n_a(&self) -> f64 {
        self.split.n_a
    }

    /// Commuter cost minus operator profit.
    pub fn social_cost(&self, n_total: f64) -> f64 {
        n_total * self.cost - self.profit
    }
}

fn profit(vp: &ValidatedParams, fare: f64, n_a: f64) -> f64 {
    if n_a == 0.0 {
        -vp.f_a
    } else {
        (fare - vp.m) * n_a - vp.f_a
    }
}

fn build(
    vp: &ValidatedParams,
    regime: Regime,
    n_a: f64,
    fare: f64,
    boundary: Boundary,
    cost: Option<f64>,
) -> Equilibrium {
    let split = ModeSplit {
        n_n: (vp.n_total - n_a).max(0.0),
        n_a,
    };
    let costs = equilibrium_costs(vp, split, fare);
    let cost = cost.unwrap_or(match boundary {
        Boundary::AllSav => costs.c_a,
        _ => costs.c_n,
    });
    Equilibrium {
        regime,
        split,
        fare,
        cost,
        costs,
        profit: profit(vp, fare, n_a),
        boundary,
    }
}

fn scale(vp: &ValidatedParams) -> f64 {
    (vp.a() * vp.n_total).abs().max(vp.b().abs()).max(1.0)
}

fn base_cost(vp: &ValidatedParams) -> f64 {
    vp.t_f + vp.f_n
}

/// Marginal-cost pricing equilibrium.
pub fn solve_mc(vp: &ValidatedParams) -> Equilibrium {
    let (a, b, n) = (vp.a(), vp.b(), vp.n_total);
    let eps = vp.tol() * scale(vp);
    if b <= eps {
        return build(vp, Regime::Mc, n, vp.m, Boundary::AllSav, None);
    }
    if a * n - b <= eps {
        return build(vp, Regime::Mc, 0.0, vp.m, Boundary::AllNv, None);
    }
    let cost = (vp.kappa * a * n + (1.0 - vp.kappa) * b) / (1.0 - vp.theta) + base_cost(vp);
    build(vp, Regime::Mc, (a * n - b) / a, vp.m, Boundary::Interior, Some(cost))
}

/// The AC-pricing equilibria: always the rider-less `AC0`, plus the roots
/// of `A n^2 - (AN - B) n + F_a = 0` that lie in `[0, N]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AcEquilibria {
    pub equilibria: Vec<Equilibrium>,
    /// The two roots coincide; the single root is labelled `Ac1`.
    pub coincident: bool,
}

impl AcEquilibria {
    pub fn get(&self, regime: Regime) -> Option<&Equilibrium> {
        self.equilibria.iter().find(|e| e.regime == regime)
    }

    pub fn ac0(&self) -> &Equilibrium {
        &self.equilibria[0]
    }

    pub fn ac1(&self) -> Option<&Equilibrium> {
        self.get(Regime::Ac1)
    }

    /// High-adoption root; the coincident root when the two merge.
    pub fn ac2(&self) -> Option<&Equilibrium> {
        self.get(Regime::Ac2)
            .or(if self.coincident { self.ac1() } else { None })
    }
}

pub fn ac_fare(vp: &ValidatedParams, n_a: f64) -> f64 {
    if n_a > 0.0 {
        vp.m + vp.f_a / n_a
    } else if vp.f_a == 0.0 {
        vp.m
    } else {
        f64::INFINITY
    }
}

/// Average-cost pricing equilibria.
pub fn solve_ac(vp: &ValidatedParams) -> AcEquilibria {
    let (a, b, n) = (vp.a(), vp.b(), vp.n_total);
    let ac0_cost = a * n / (1.0 - vp.theta) + base_cost(vp);
    let mut out = vec![build(
        vp,
        Regime::Ac0,
        0.0,
        f64::INFINITY,
        Boundary::AllNv,
        Some(ac0_cost),
    )];
    let surplus = vp.surplus();
    let Some(k) = vp.derived().k_root else {
        return AcEquilibria {
            equilibria: out,
            coincident: false,
        };
    };
    if surplus <= 0.0 {
        return AcEquilibria {
            equilibria: out,
            coincident: false,
        };
    }
    let coincident = k == 0.0;
    let kappa_bar = 1.0 - vp.kappa;
    let mut push = |regime: Regime, root: f64, sign: f64| {
        if root < 0.0 || (root == 0.0 && vp.f_a > 0.0) {
            return;
        }
        if root > n {
            // Only reachable with B < 0; everyone rides if SAV is still cheaper at N.
            let fare = ac_fare(vp, n);
            let e = build(vp, regime, n, fare, Boundary::AllSav, None);
            if e.costs.c_a <= e.costs.c_n {
                out.push(e);
            }
            return;
        }
        let cost = ((1.0 + vp.kappa) * a * n + kappa_bar * b + sign * kappa_bar * k) / (2.0 * (1.0 - vp.theta))
            + base_cost(vp);
        let boundary = if root == 0.0 {
            Boundary::AllNv
        } else {
            Boundary::Interior
        };
        out.push(build(vp, regime, root, ac_fare(vp, root), boundary, Some(cost)));
    };
    if coincident {
        push(Regime::Ac1, surplus / (2.0 * a), 0.0);
    } else {
        push(Regime::Ac1, (surplus - k) / (2.0 * a), 1.0);
        push(Regime::Ac2, (surplus + k) / (2.0 * a), -1.0);
    }
    AcEquilibria {
        equilibria: out,
        coincident,
    }
}

/// SAV demand at a fare, clamped to `[0, N]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Demand {
    pub n_a: f64,
    pub clamp: Clamp,
}

pub fn demand(vp: &ValidatedParams, fare: f64) -> Demand {
    let raw = vp.n_total - (vp.b() + fare - vp.m) / vp.a();
    if raw < 0.0 {
        Demand {
            n_a: 0.0,
            clamp: Clamp::AtZero,
        }
    } else if raw > vp.n_total {
        Demand {
            n_a: vp.n_total,
            clamp: Clamp::AtN,
        }
    } else {
        Demand {
            n_a: raw,
            clamp: Clamp::None,
        }
    }
}

/// Fare at which exactly `n_a` commuters choose SAV.
pub fn inverse_fare(vp: &ValidatedParams, n_a: f64) -> f64 {
    vp.m + vp.surplus() - vp.a() * n_a
}

/// Profit-maximising fare. The operator exits (no riders, infinite fare)
/// when no fare covers the fixed cost.
pub fn solve_monopoly(vp: &ValidatedParams) -> Equilibrium {
    let (a, b, n) = (vp.a(), vp.b(), vp.n_total);
    let surplus = vp.surplus();
    if vp.derived().k_root.is_none() || surplus <= 0.0 {
        let cost = a * n / (1.0 - vp.theta) + base_cost(vp);
        return build(vp, Regime::Monopoly, 0.0, f64::INFINITY, Boundary::AllNv, Some(cost));
    }
    let n_a = surplus / (2.0 * a);
    if n_a > n {
        return build(vp, Regime::Monopoly, n, vp.m - b, Boundary::AllSav, None);
    }
    let cost = ((1.0 + vp.kappa) * a * n + (1.0 - vp.kappa) * b) / (2.0 * (1.0 - vp.theta)) + base_cost(vp);
    build(
        vp,
        Regime::Monopoly,
        n_a,
        vp.m + surplus / 2.0,
        Boundary::Interior,
        Some(cost),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    Greater,
    Equal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderingCheck {
    pub label: String,
    pub lhs: f64,
    pub rhs: f64,
    pub relation: Relation,
    /// `lhs - rhs` for `Greater`, `|lhs - rhs|` for `Equal`.
    pub slack: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OrderingCase {
    /// Two distinct AC roots.
    Strict,
    /// The AC roots coincide.
    Tangent,
    /// No AC equilibrium with riders.
    NoAc,
    /// `B <= 0` or `B >= AN`; the chain is not defined.
    NotInterior,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderingReport {
    pub case: OrderingCase,
    pub checks: Vec<OrderingCheck>,
    pub passed: bool,
}

/// Checks the rider and cost chains across regimes.
pub fn ordering_check(vp: &ValidatedParams) -> OrderingReport {
    if !vp.validity().interior {
        return OrderingReport {
            case: OrderingCase::NotInterior,
            checks: Vec::new(),
            passed: true,
        };
    }
    let mc = solve_mc(vp);
    let ac = solve_ac(vp);
    let mono = solve_monopoly(vp);
    let n_tol = 1e-9 * vp.n_total;
    let c_tol = 1e-9 * mc.cost.abs().max(1.0);
    let mut checks = Vec::new();
    let mut gt = |label: &str, lhs: f64, rhs: f64| {
        checks.push(OrderingCheck {
            label: label.to_string(),
            lhs,
            rhs,
            relation: Relation::Greater,
            slack: lhs - rhs,
            passed: lhs > rhs,
        });
    };
    let case;
    let mut eqs: Vec<(String, f64, f64, f64)> = Vec::new();
    match (ac.ac1(), ac.ac2()) {
        (Some(a1), Some(a2)) if !ac.coincident => {
            case = OrderingCase::Strict;
            gt("N_a(MC) > N_a(AC2)", mc.n_a(), a2.n_a());
            gt("N_a(AC2) > N_a(m)", a2.n_a(), mono.n_a());
            gt("N_a(m) > N_a(AC1)", mono.n_a(), a1.n_a());
            gt("N_a(AC1) > 0", a1.n_a(), 0.0);
            gt("c(AC2) > c(MC)", a2.cost, mc.cost);
            gt("c(m) > c(AC2)", mono.cost, a2.cost);
            gt("c(AC1) > c(m)", a1.cost, mono.cost);
            gt("c(AC0) > c(AC1)", ac.ac0().cost, a1.cost);
        }
        (Some(a1), _) => {
            case = OrderingCase::Tangent;
            gt("N_a(MC) > N_a(AC)", mc.n_a(), a1.n_a());
            eqs.push(("N_a(AC) = N_a(m)".into(), a1.n_a(), mono.n_a(), n_tol));
            gt("N_a(AC) > 0", a1.n_a(), 0.0);
            gt("c(AC) > c(MC)", a1.cost, mc.cost);
            eqs.push(("c(AC) = c(m)".into(), a1.cost, mono.cost, c_tol));
            gt("c(AC0) > c(AC)", ac.ac0().cost, a1.cost);
        }
        _ => {
            case = OrderingCase::NoAc;
            gt("N_a(MC) > N_a(m)", mc.n_a(), mono.n_a());
            eqs.push(("N_a(m) = 0".into(), mono.n_a(), 0.0, n_tol));
            gt("c(m) > c(MC)", mono.cost, mc.cost);
            eqs.push(("c(m) = c(AC0)".into(), mono.cost, ac.ac0().cost, c_tol));
        }
    }
    for (label, lhs, rhs, tol) in eqs {
        let slack = (lhs - rhs).abs();
        checks.push(OrderingCheck {
            label,
            lhs,
            rhs,
            relation: Relation::Equal,
            slack,
            passed: slack <= tol,
        });
    }
    let passed = checks.iter().all(|c| c.passed);
    OrderingReport { case, checks, passed }
}

/// Equilibrium cost of a regime as a function of the parameters; used for
/// finite differences.
pub fn regime_cost(vp: &ValidatedParams, regime: Regime) -> Result<f64> {
    match regime {
        Regime::Mc => Ok(solve_mc(vp).cost),
        Regime::Monopoly => Ok(solve_monopoly(vp).cost),
        Regime::Ac0 => Ok(solve_ac(vp).ac0().cost),
        Regime::Ac1 | Regime::Ac2 => {
            let ac = solve_ac(vp);
            let found = if regime == Regime::Ac1 { ac.ac1() } else { ac.ac2() };
            found.map(|e| e.cost).ok_or(ModelError::NoAcEquilibrium {
                discriminant: vp.derived().discriminant,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sensitivity {
    pub regime: Regime,
    /// Closed-form `dc/dmu`.
    pub dc_dmu: f64,
    /// Central difference with step `1e-5 mu`.
    pub finite_diff: f64,
    /// Left side of the paradox condition (AC2 only).
    pub paradox_lhs: Option<f64>,
    pub paradox: bool,
}

/// Left side of the capacity-paradox condition for the AC2 equilibrium;
/// negative means extra capacity raises the equilibrium cost.
pub fn paradox_lhs(vp: &ValidatedParams) -> Result<f64> {
    let (a, n) = (vp.a(), vp.n_total);
    let surplus = vp.surplus();
    match vp.derived().k_root {
        Some(k) if k > 0.0 && surplus > 0.0 => {
            let inner = n / 2.0 + (surplus * a * n - 2.0 * a * vp.f_a) / (2.0 * a * k);
            Ok(n - (1.0 - vp.kappa) * inner)
        }
        _ => Err(ModelError::NoAcEquilibrium {
            discriminant: vp.derived().discriminant,
        }),
    }
}

/// Capacity sensitivity of the equilibrium cost for MC, monopoly or AC2.
pub fn capacity_sensitivity(vp: &ValidatedParams, regime: Regime) -> Result<Sensitivity> {
    let a1 = vp.derived().congestion;
    let (mu, n) = (vp.mu, vp.n_total);
    let (dc_dmu, paradox_lhs) = match regime {
        Regime::Mc => (-vp.kappa * a1 * n / mu, None),
        Regime::Monopoly => (-(1.0 + vp.kappa) * a1 * n / (2.0 * mu), None),
        Regime::Ac2 => {
            let lhs = paradox_lhs(vp)?;
            (-a1 / mu * lhs, Some(lhs))
        }
        Regime::Ac0 | Regime::Ac1 => {
            return Err(ModelError::OutOfRange {
                name: "regime",
                value: f64::NAN,
                expected: "MC, monopoly or AC2",
            })
        }
    };
    let h = 1e-5 * mu;
    let up = regime_cost(&vp.with(|p| p.mu = mu + h)?, regime)?;
    let down = regime_cost(&vp.with(|p| p.mu = mu - h)?, regime)?;
    Ok(Sensitivity {
        regime,
        dc_dmu,
        finite_diff: (up - down) / (2.0 * h),
        paradox_lhs,
        paradox: paradox_lhs.is_some_and(|l| l < 0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use crate::params::{validate, ModelParams};
    use crate::scenarios;
    use proptest::prelude::*;

    fn fig2() -> ValidatedParams {
        validate(scenarios::fig2()).unwrap()
    }

    #[test]
    fn fig2_mc() {
        let vp = fig2();
        let e = solve_mc(&vp);
        assert_eq!(e.boundary, Boundary::Interior);
        assert!((e.n_a() - 960.0).abs() < 1e-9);
        assert!((e.cost - 407.8).abs() < 1e-9);
        assert_eq!(e.profit, -vp.f_a);
        let root = oracle::bisect(
            |n_a| {
                equilibrium_costs(
                    &vp,
                    ModeSplit {
                        n_n: vp.n_total - n_a,
                        n_a,
                    },
                    vp.m,
                )
                .gap()
            },
            0.0,
            vp.n_total,
            1e-12,
        )
        .unwrap();
        assert!((root - 960.0).abs() < 1e-8);
    }

    #[test]
    fn mc_corners() {
        let vp = validate(ModelParams {
            m: 0.0,
            ..scenarios::fig2()
        })
        .unwrap();
        assert!(vp.b() < 0.0);
        let e = solve_mc(&vp);
        assert_eq!(e.boundary, Boundary::AllSav);
        assert_eq!(e.n_a(), vp.n_total);

        // AN = B exactly: m chosen so that B = 2400
        let vp = validate(ModelParams {
            m: 2404.0,
            ..scenarios::fig2()
        })
        .unwrap();
        assert!((vp.surplus()).abs() < 1e-9);
        let e = solve_mc(&vp);
        assert_eq!(e.boundary, Boundary::AllNv);
        assert_eq!(e.n_a(), 0.0);
    }

    #[test]
    fn fig2_ac() {
        let vp = fig2();
        let ac = solve_ac(&vp);
        assert!(!ac.coincident);
        assert_eq!(ac.equilibria.len(), 3);
        assert!((ac.ac1().unwrap().n_a() - 60.0).abs() < 1e-9);
        assert!((ac.ac2().unwrap().n_a() - 900.0).abs() < 1e-9);
        assert!(ac.ac0().fare.is_infinite());
        assert!(ac.ac0().costs.c_a.is_infinite());
        for e in &ac.equilibria[1..] {
            assert!((e.fare * e.n_a() - vp.m * e.n_a() - vp.f_a).abs() < 1e-9 * vp.f_a);
            assert!(e.profit.abs() < 1e-9 * vp.f_a);
            assert!((e.costs.c_n - e.costs.c_a).abs() < 1e-9 * e.cost);
            assert!((e.cost - e.costs.c_n).abs() < 1e-9 * e.cost);
        }
        let roots = oracle::sign_change_roots(
            |n_a| {
                let s = ModeSplit {
                    n_n: vp.n_total - n_a,
                    n_a,
                };
                equilibrium_costs(&vp, s, ac_fare(&vp, n_a)).gap()
            },
            1e-6,
            vp.n_total,
            2000,
            1e-12,
        );
        assert_eq!(roots.len(), 2);
        assert!((roots[0] - 60.0).abs() < 1e-8);
        assert!((roots[1] - 900.0).abs() < 1e-8);
    }

    #[test]
    fn ac_zero_fixed_cost_collapses_to_mc() {
        let vp = validate(ModelParams {
            f_a: 0.0,
            ..scenarios::fig2()
        })
        .unwrap();
        let ac = solve_ac(&vp);
        assert_eq!(ac.ac1().unwrap().n_a(), 0.0);
        assert!((ac.ac2().unwrap().n_a() - solve_mc(&vp).n_a()).abs() < 1e-9);
    }

    #[test]
    fn ac_tangent() {
        let base = scenarios::fig2();
        let f_a = 2304.0f64.powi(2) / (4.0 * 2.4);
        let vp = validate(ModelParams { f_a, ..base }).unwrap();
        let ac = solve_ac(&vp);
        assert!(ac.coincident);
        assert_eq!(ac.equilibria.len(), 2);
        assert!((ac.ac1().unwrap().n_a() - 480.0).abs() < 1e-9);
        assert_eq!(ac.ac1(), ac.ac2());
        let mono = solve_monopoly(&vp);
        assert!(mono.profit.abs() < 1e-6);
        let rep = ordering_check(&vp);
        assert_eq!(rep.case, OrderingCase::Tangent);
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn fig2_monopoly_and_demand() {
        let vp = fig2();
        let e = solve_monopoly(&vp);
        assert!((e.fare - 1252.0).abs() < 1e-9);
        assert!((e.n_a() - 480.0).abs() < 1e-9);
        assert!((e.profit - 423_360.0).abs() < 1e-6);
        assert!((demand(&vp, 100.0).n_a - 960.0).abs() < 1e-9);
        assert!((demand(&vp, 1252.0).n_a - 480.0).abs() < 1e-9);
        assert_eq!(demand(&vp, 1e6).clamp, Clamp::AtZero);
        assert_eq!(demand(&vp, -1e6).clamp, Clamp::AtN);
        // grid over fares confirms the maximiser
        let profit_at = |p: f64| (p - vp.m) * demand(&vp, p).n_a - vp.f_a;
        let (p_best, _) = oracle::grid_argmin(|p| -profit_at(p), vp.m, vp.m + vp.a() * vp.n_total, 10_001);
        assert!((p_best - 1252.0).abs() <= vp.a() * vp.n_total / 10_000.0);
    }

    #[test]
    fn monopoly_exit() {
        let vp = validate(ModelParams {
            f_a: 1e7,
            ..scenarios::fig2()
        })
        .unwrap();
        let e = solve_monopoly(&vp);
        assert_eq!(e.n_a(), 0.0);
        assert!(e.fare.is_infinite());
        let rep = ordering_check(&vp);
        assert_eq!(rep.case, OrderingCase::NoAc);
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn fig2_ordering() {
        let rep = ordering_check(&fig2());
        assert_eq!(rep.case, OrderingCase::Strict);
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn fig3_paradox() {
        let vp = validate(scenarios::fig3()).unwrap();
        assert!((vp.a() - 3.0).abs() < 1e-12);
        assert!((vp.derived().k_root.unwrap() - 67_716f64.sqrt()).abs() < 1e-9);
        let s = capacity_sensitivity(&vp, Regime::Ac2).unwrap();
        assert!((s.paradox_lhs.unwrap() + 70.6).abs() < 0.1);
        assert!(s.paradox);
        assert!(s.finite_diff > 0.0);
        assert!((s.finite_diff - s.dc_dmu).abs() < 1e-3 * s.dc_dmu.abs());
        for r in [Regime::Mc, Regime::Monopoly] {
            let s = capacity_sensitivity(&vp, r).unwrap();
            assert!(!s.paradox);
            assert!(s.dc_dmu < 0.0 && s.finite_diff < 0.0);
            assert!((s.finite_diff - s.dc_dmu).abs() < 1e-3 * s.dc_dmu.abs());
        }
    }

    #[test]
    fn ac2_sensitivity_needs_viable_roots() {
        let vp = validate(ModelParams {
            f_a: 1e7,
            ..scenarios::fig2()
        })
        .unwrap();
        assert!(capacity_sensitivity(&vp, Regime::Ac2).is_err());
    }

    #[test]
    fn no_paradox_when_kappa_near_one() {
        let vp = validate(ModelParams {
            kappa: 1.0 - 1e-9,
            theta: 0.7,
            ..scenarios::fig3()
        })
        .unwrap();
        if let Ok(lhs) = paradox_lhs(&vp) {
            assert!((lhs - vp.n_total).abs() < 1e-3 * vp.n_total);
        }
    }

    fn draw() -> impl Strategy<Value = ModelParams> {
        (
            10.0f64..5000.0,
            0.01f64..2.0,
            0.01f64..0.99,
            0.1f64..0.95,
            0.05f64..0.95,
            0.05f64..3.0,
            0.05f64..0.8,
            0.05f64..0.95,
        )
            .prop_map(|(n, mu, kappa, theta, bfrac, gamma, b_share, u)| {
                let beta = bfrac * theta;
                let a = beta * gamma * (1.0 - theta) / ((beta + gamma) * mu);
                let an = a * n;
                let b = b_share * an;
                let (t_f, f_n) = (3.0, 1.0);
                let m = b - theta * t_f + t_f + f_n;
                let f_a = u * (an - b).powi(2) / (4.0 * a);
                ModelParams {
                    n_total: n,
                    mu,
                    kappa,
                    theta,
                    beta,
                    gamma,
                    t_f,
                    f_n,
                    f_a,
                    m: m.max(0.0),
                }
            })
            .prop_filter("valid", |p| {
                validate(*p)
                    .map(|v| v.validity().interior && v.validity().ac_viable)
                    .unwrap_or(false)
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn ac_roots_and_zero_profit(p in draw()) {
            let vp = validate(p).unwrap();
            let ac = solve_ac(&vp);
            for e in ac.equilibria.iter().skip(1) {
                let n_a = e.n_a();
                let quad = vp.a() * n_a * n_a - vp.surplus() * n_a + vp.f_a;
                let scale = vp.a() * n_a * n_a + vp.surplus() * n_a + vp.f_a;
                prop_assert!(quad.abs() <= 1e-6 * scale);
                prop_assert!((e.fare * n_a - vp.m * n_a - vp.f_a).abs() <= 1e-9 * (vp.f_a + vp.m * n_a).max(1.0));
            }
        }

        #[test]
        fn ordering_holds(p in draw()) {
            let vp = validate(p).unwrap();
            let rep = ordering_check(&vp);
            prop_assert!(rep.passed, "{:?}", rep);
        }

        #[test]
        fn monopoly_beats_fare_grid(p in draw()) {
            let vp = validate(p).unwrap();
            let e = solve_monopoly(&vp);
            let lo = vp.m;
            let hi = vp.m + vp.a() * vp.n_total;
            let h = (hi - lo) / 9999.0;
            for i in 0..10_000 {
                let fare = lo + h * i as f64;
                let pi = (fare - vp.m) * demand(&vp, fare).n_a - vp.f_a;
                prop_assert!(e.profit >= pi - 1e-9 * e.profit.abs().max(vp.f_a).max(1.0));
            }
        }

        #[test]
        fn sensitivities_match_finite_differences(p in draw()) {
            let vp = validate(p).unwrap();
            for r in [Regime::Mc, Regime::Monopoly, Regime::Ac2] {
                let Ok(s) = capacity_sensitivity(&vp, r) else { continue };
                let floor = 1e-6 * vp.derived().congestion * vp.n_total / vp.mu;
                prop_assert!((s.finite_diff - s.dc_dmu).abs() <= 1e-3 * s.dc_dmu.abs().max(floor), "{:?}", s);
                if r != Regime::Ac2 {
                    prop_assert!(s.dc_dmu < 0.0);
                }
            }
        }
    }
}

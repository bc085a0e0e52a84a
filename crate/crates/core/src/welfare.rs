//! Social cost over mode splits, the fare-only (second-best) optimum,
//! regime social costs with their critical thresholds, and the regulatory
//! recommendation built on them.
//!
//! Social cost is commuter cost minus operator profit throughout, with
//! profit `(p - m) N_a - F_a`. The rider-less AC and exited-monopoly states
//! therefore carry `+F_a`.

use serde::Serialize;

use crate::departure::{equilibrium_costs, ModeSplit};
use crate::error::{ModelError, Result};
use crate::fares::{inverse_fare, solve_ac, Clamp, Regime};
use crate::params::ValidatedParams;

fn check_n_a(vp: &ValidatedParams, n_a: f64) -> Result<()> {
    if !(n_a >= 0.0 && n_a <= vp.n_total) {
        return Err(ModelError::SavCountOutOfRange {
            n_a,
            n_total: vp.n_total,
        });
    }
    Ok(())
}

/// Social cost when the fare is set so that exactly `n_a` commuters ride.
pub fn sc_of_split(vp: &ValidatedParams, n_a: f64) -> Result<f64> {
    check_n_a(vp, n_a)?;
    let split = ModeSplit {
        n_n: vp.n_total - n_a,
        n_a,
    };
    let fare = inverse_fare(vp, n_a);
    let c_n = equilibrium_costs(vp, split, fare).c_n;
    Ok(vp.n_total * c_n - (fare - vp.m) * n_a + vp.f_a)
}

/// Closed-form `dSC/dN_a`.
pub fn sc_derivative(vp: &ValidatedParams, n_a: f64) -> f64 {
    let a1 = vp.derived().congestion;
    -a1 * ((1.0 - vp.kappa) + (1.0 - vp.theta)) * vp.n_total + 2.0 * vp.a() * n_a + vp.b()
}

/// `dSC/dN_a` split into its economic parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivativeParts {
    /// NV cost change times NV count.
    pub nv_term: f64,
    /// SAV congestion change times SAV count.
    pub sav_congestion: f64,
    /// Fare change borne by SAV riders.
    pub sav_fare: f64,
    /// Fare margin `-(p - m)`.
    pub margin: f64,
    /// Revenue change from the fare slope, `-p' N_a`.
    pub revenue_slope: f64,
}

impl DerivativeParts {
    pub fn sav_term(&self) -> f64 {
        self.sav_congestion + self.sav_fare
    }

    /// `-dpi/dN_a`.
    pub fn profit_term(&self) -> f64 {
        self.margin + self.revenue_slope
    }

    pub fn total(&self) -> f64 {
        self.nv_term + self.sav_term() + self.profit_term()
    }

    /// The two fare-transfer terms; cancels exactly.
    pub fn transfer(&self) -> f64 {
        self.sav_fare + self.revenue_slope
    }
}

pub fn sc_derivative_parts(vp: &ValidatedParams, n_a: f64) -> DerivativeParts {
    let a1 = vp.derived().congestion;
    let slope = -vp.a();
    DerivativeParts {
        nv_term: -(1.0 - vp.kappa) * a1 * (vp.n_total - n_a),
        sav_congestion: (vp.kappa - vp.theta) * a1 * n_a,
        sav_fare: slope * n_a,
        margin: -(inverse_fare(vp, n_a) - vp.m),
        revenue_slope: -(slope * n_a),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SecondBestSolution {
    pub n_a_sb: f64,
    /// Unclamped stationary point.
    pub n_a_raw: f64,
    /// From the stationary-point formula even when clamped.
    pub fare_sb: f64,
    pub clamped: Clamp,
    pub sc_sb: f64,
}

pub fn solve_second_best(vp: &ValidatedParams) -> SecondBestSolution {
    let (a, b, n, eta) = (vp.a(), vp.b(), vp.n_total, vp.eta());
    let raw = (a * n * (1.0 + eta) - b) / (2.0 * a);
    let (n_a_sb, clamped) = if raw < 0.0 {
        (0.0, Clamp::AtZero)
    } else if raw > n {
        (n, Clamp::AtN)
    } else {
        (raw, Clamp::None)
    };
    SecondBestSolution {
        n_a_sb,
        n_a_raw: raw,
        fare_sb: vp.m + ((1.0 - eta) * a * n - b) / 2.0,
        clamped,
        sc_sb: sc_of_split(vp, n_a_sb).expect("clamped into range"),
    }
}

/// A critical value, or the reason it does not exist.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Threshold {
    Value(f64),
    Absent(&'static str),
}

impl Threshold {
    pub fn value(&self) -> Option<f64> {
        match self {
            Threshold::Value(v) => Some(*v),
            Threshold::Absent(_) => None,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Threshold::Value(v) => format!("{v}"),
            Threshold::Absent(why) => format!("absent ({why})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    pub n_min: f64,
    pub n_c_mc_ac: Threshold,
    pub n_c_mc_m: Threshold,
    pub n_c_ac_m: Threshold,
    pub f_a_c: Threshold,
}

fn near(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

pub fn thresholds(vp: &ValidatedParams) -> Thresholds {
    let (a, b, eta, f) = (vp.a(), vp.b(), vp.eta(), vp.f_a);
    let tol = vp.tol().max(1e-12);
    let f_c = eta * eta * b * b / ((1.0 - 2.0 * eta).powi(2) * a);
    let n_c_mc_ac = if eta >= 1.0 {
        Threshold::Absent("eta >= 1")
    } else if eta < 0.5 && f >= f_c {
        // the squared tie condition has a root here, but MC stays costlier
        Threshold::Absent("F_a >= F_a,c")
    } else {
        let disc = eta * eta * b * b + 4.0 * eta * (1.0 - eta) * a * f;
        Threshold::Value((eta * b + disc.sqrt()) / (2.0 * eta * (1.0 - eta) * a))
    };
    let half = eta < 0.5 && !near(eta, 0.5, tol);
    let n_c_mc_m = if near(eta, 0.5, tol) {
        Threshold::Absent("singular at eta = 1/2")
    } else if half {
        Threshold::Value(b / ((1.0 - 2.0 * eta) * a))
    } else {
        Threshold::Absent("eta > 1/2")
    };
    let n_c_ac_m = if near(eta, 0.5, tol) {
        Threshold::Absent("singular at eta = 1/2")
    } else if half {
        let q = 1.0 - 4.0 * eta * eta;
        Threshold::Value((b + (4.0 * eta * eta * b * b + 4.0 * q * a * f).sqrt()) / (q * a))
    } else {
        Threshold::Absent("eta > 1/2")
    };
    let f_a_c = if near(eta, 0.5, tol) {
        Threshold::Absent("singular at eta = 1/2")
    } else if half {
        Threshold::Value(f_c)
    } else {
        Threshold::Absent("eta > 1/2")
    };
    Thresholds {
        n_min: vp.derived().n_min,
        n_c_mc_ac,
        n_c_mc_m,
        n_c_ac_m,
        f_a_c,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EtaRegime {
    AtLeastOne,
    HalfToOne,
    BelowHalf,
}

impl EtaRegime {
    pub fn of(eta: f64) -> Self {
        if eta >= 1.0 {
            EtaRegime::AtLeastOne
        } else if eta >= 0.5 {
            EtaRegime::HalfToOne
        } else {
            EtaRegime::BelowHalf
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            EtaRegime::AtLeastOne => "eta>=1",
            EtaRegime::HalfToOne => "1>eta>=1/2",
            EtaRegime::BelowHalf => "1/2>eta>0",
        }
    }
}

/// `left < right` (strict) or `left <= right`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ChainLink {
    pub left: Regime,
    pub right: Regime,
    pub strict: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WelfareTable {
    pub sc_mc: f64,
    pub sc_ac0: f64,
    /// Absent unless `N > N_min`.
    pub sc_ac2: Option<f64>,
    pub sc_monopoly: f64,
    /// Regimes ordered by increasing social cost.
    pub ranking: Vec<Regime>,
    pub thresholds: Thresholds,
    pub eta_regime: EtaRegime,
    /// Ordering predicted from `eta`, `F_a` and the thresholds.
    pub expected_chain: Vec<ChainLink>,
    pub chain_holds: bool,
}

impl WelfareTable {
    pub fn sc(&self, regime: Regime) -> Option<f64> {
        match regime {
            Regime::Mc => Some(self.sc_mc),
            Regime::Ac0 => Some(self.sc_ac0),
            Regime::Ac2 => self.sc_ac2,
            Regime::Monopoly => Some(self.sc_monopoly),
            Regime::Ac1 => None,
        }
    }
}

fn chain(links: &[(Regime, bool)], last: Regime) -> Vec<ChainLink> {
    let mut out = Vec::new();
    for (i, &(left, strict)) in links.iter().enumerate() {
        let right = links.get(i + 1).map_or(last, |l| l.0);
        out.push(ChainLink { left, right, strict });
    }
    out
}

fn expected_chain(vp: &ValidatedParams, th: &Thresholds) -> Vec<ChainLink> {
    use Regime::{Ac0, Ac2, Mc, Monopoly as M};
    let n = vp.n_total;
    let below = |t: Threshold| t.value().is_none_or(|v| n < v);
    let equal = |t: Threshold| t.value().is_some_and(|v| n == v);
    match EtaRegime::of(vp.eta()) {
        EtaRegime::AtLeastOne => chain(&[(Mc, true), (Ac2, true), (M, true)], Ac0),
        EtaRegime::HalfToOne => {
            if equal(th.n_c_mc_ac) {
                chain(&[(Mc, false), (Ac2, true), (M, true)], Ac0)
            } else if below(th.n_c_mc_ac) {
                chain(&[(Mc, true), (Ac2, true), (M, true)], Ac0)
            } else {
                chain(&[(Ac2, true), (Mc, true), (M, true)], Ac0)
            }
        }
        EtaRegime::BelowHalf => {
            let high_fixed = th.f_a_c.value().is_some_and(|fc| vp.f_a >= fc);
            if high_fixed {
                if below(th.n_c_ac_m) {
                    chain(&[(Ac2, true), (M, true), (Mc, true)], Ac0)
                } else {
                    chain(&[(M, false), (Ac2, true), (Mc, true)], Ac0)
                }
            } else if below(th.n_c_mc_ac) {
                chain(&[(Mc, true), (Ac2, true), (M, true)], Ac0)
            } else if below(th.n_c_mc_m) {
                chain(&[(Ac2, false), (Mc, true), (M, true)], Ac0)
            } else if below(th.n_c_ac_m) {
                chain(&[(Ac2, true), (M, false), (Mc, true)], Ac0)
            } else {
                chain(&[(M, false), (Ac2, true), (Mc, true)], Ac0)
            }
        }
    }
}

/// Social costs of every regime from their closed forms, the critical
/// thresholds, and the predicted ordering. Requires `0 < B < AN`.
pub fn regime_social_costs(vp: &ValidatedParams) -> Result<WelfareTable> {
    if !vp.validity().interior {
        return Err(ModelError::NotInterior {
            b: vp.b(),
            an: vp.a() * vp.n_total,
        });
    }
    let (a, b, n, kappa, theta, f) = (vp.a(), vp.b(), vp.n_total, vp.kappa, vp.theta, vp.f_a);
    let base = vp.t_f + vp.f_n;
    let s = vp.surplus();
    let sc_mc = ((kappa * a * n + (1.0 - kappa) * b) / (1.0 - theta) + base) * n + f;
    let sc_ac0 = (a * n / (1.0 - theta) + base) * n + f;
    let th = thresholds(vp);
    let strict = matches!(vp.derived().k_root, Some(k) if k > 0.0);
    let sc_ac2 =
        vp.derived().k_root.filter(|_| strict).map(|k| {
            (((1.0 + kappa) * a * n + (1.0 - kappa) * b - (1.0 - kappa) * k) / (2.0 * (1.0 - theta)) + base) * n
        });
    let sc_monopoly = if vp.derived().k_root.is_some() {
        (((1.0 + kappa) * a * n + (1.0 - kappa) * b) / (2.0 * (1.0 - theta)) + base) * n - (s * s / (4.0 * a) - f)
    } else {
        sc_ac0
    };
    let mut ranked: Vec<(Regime, f64)> = vec![
        (Regime::Mc, sc_mc),
        (Regime::Ac0, sc_ac0),
        (Regime::Monopoly, sc_monopoly),
    ];
    if let Some(v) = sc_ac2 {
        ranked.push((Regime::Ac2, v));
    }
    ranked.sort_by(|x, y| x.1.total_cmp(&y.1));
    let mut table = WelfareTable {
        sc_mc,
        sc_ac0,
        sc_ac2,
        sc_monopoly,
        ranking: ranked.iter().map(|r| r.0).collect(),
        thresholds: th,
        eta_regime: EtaRegime::of(vp.eta()),
        expected_chain: Vec::new(),
        chain_holds: true,
    };
    if sc_ac2.is_some() {
        table.expected_chain = expected_chain(vp, &th);
        let tol = 1e-9 * sc_ac0.abs().max(1.0);
        table.chain_holds = table.expected_chain.iter().all(|l| {
            let (x, y) = (table.sc(l.left).unwrap(), table.sc(l.right).unwrap());
            if l.strict {
                x < y
            } else {
                x <= y + tol
            }
        });
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyReport {
    pub eta: f64,
    pub current_n_a: f64,
    /// Absent when AC pricing admits no riders.
    pub n_a1: Option<f64>,
    pub n_a2: Option<f64>,
    pub n_c_ac_m: Threshold,
    pub commuter_activate: bool,
    pub social_activate: bool,
    pub commuter_advice: String,
    pub social_advice: String,
}

impl StrategyReport {
    pub fn key_values(&self) -> Vec<(&'static str, String)> {
        let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), |x| x.to_string());
        vec![
            ("eta", self.eta.to_string()),
            ("current_n_a", self.current_n_a.to_string()),
            ("n_a1_ac", opt(self.n_a1)),
            ("n_a2_ac", opt(self.n_a2)),
            ("n_c_ac_m", self.n_c_ac_m.describe()),
            ("commuter_activate_ac", self.commuter_activate.to_string()),
            ("social_activate_ac", self.social_activate.to_string()),
            ("commuter_advice", self.commuter_advice.clone()),
            ("social_advice", self.social_advice.clone()),
        ]
    }
}

/// Whether switching to AC pricing from the current ridership is advisable
/// for commuters and for society.
pub fn recommend_strategy(vp: &ValidatedParams, current_n_a: f64) -> Result<StrategyReport> {
    check_n_a(vp, current_n_a)?;
    let ac = solve_ac(vp);
    let eta = vp.eta();
    let th = thresholds(vp);
    let n_a1 = ac.ac1().map(|e| e.n_a());
    let n_a2 = ac.ac2().map(|e| e.n_a());
    let viable = n_a1.is_some() && !ac.coincident && vp.validity().interior;
    if !viable {
        return Ok(StrategyReport {
            eta,
            current_n_a,
            n_a1,
            n_a2,
            n_c_ac_m: th.n_c_ac_m,
            commuter_activate: false,
            social_activate: false,
            commuter_advice: "no viable AC regime".into(),
            social_advice: "no viable AC regime".into(),
        });
    }
    let threshold = n_a1.unwrap();
    let commuter_activate = current_n_a > threshold;
    let ac_beats_monopoly = eta >= 1.0 || th.n_c_ac_m.value().is_none_or(|v| vp.n_total < v);
    let social_activate = commuter_activate && ac_beats_monopoly;
    let commuter_advice = if commuter_activate {
        "activate AC pricing".to_string()
    } else {
        "keep fares unregulated until ridership exceeds the low AC equilibrium".to_string()
    };
    let social_advice = if social_activate {
        "activate AC pricing".to_string()
    } else if !commuter_activate {
        "keep fares unregulated until ridership exceeds the low AC equilibrium".to_string()
    } else {
        "keep the monopoly until the SAV capacity factor has fallen enough".to_string()
    };
    Ok(StrategyReport {
        eta,
        current_n_a,
        n_a1,
        n_a2,
        n_c_ac_m: th.n_c_ac_m,
        commuter_activate,
        social_activate,
        commuter_advice,
        social_advice,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScPoint {
    pub eta: f64,
    pub n_a: f64,
    pub sc: f64,
}

/// Social cost over `n_a` for each `eta`, holding `theta` fixed and moving
/// `kappa`. Values of `eta` that would push `kappa` outside `(0, 1)` are
/// skipped.
pub fn sc_surface(vp: &ValidatedParams, etas: &[f64], n_points: usize) -> Vec<ScPoint> {
    let n_points = n_points.max(2);
    let mut out = Vec::with_capacity(etas.len() * n_points);
    for &eta in etas {
        let kappa = 1.0 - eta * (1.0 - vp.theta);
        let Ok(v) = vp.with(|p| p.kappa = kappa) else { continue };
        for j in 0..n_points {
            let n_a = vp.n_total * j as f64 / (n_points - 1) as f64;
            if let Ok(sc) = sc_of_split(&v, n_a) {
                out.push(ScPoint { eta, n_a, sc });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fares::{solve_mc, solve_monopoly};
    use crate::oracle;
    use crate::params::{validate, ModelParams};
    use crate::scenarios;

    fn kappa08() -> ValidatedParams {
        validate(ModelParams {
            kappa: 0.8,
            ..scenarios::fig2()
        })
        .unwrap()
    }

    #[test]
    fn interior_second_best() {
        let vp = kappa08();
        assert!((vp.eta() - 2.0 / 3.0).abs() < 1e-12);
        let sb = solve_second_best(&vp);
        assert_eq!(sb.clamped, Clamp::None);
        assert!((sb.n_a_sb - 813.333_333_333).abs() < 1e-6);
        assert!((sb.fare_sb - 452.0).abs() < 1e-9);
        assert!(sc_derivative(&vp, sb.n_a_sb).abs() < 1e-9);
        let g = oracle::golden_min(|x| sc_of_split(&vp, x).unwrap(), 0.0, vp.n_total, 1e-9);
        assert!((g - sb.n_a_sb).abs() < 1e-6 * vp.n_total);
    }

    #[test]
    fn fig2_second_best_clamps_at_n() {
        let vp = validate(scenarios::fig2()).unwrap();
        let sb = solve_second_best(&vp);
        assert!((sb.n_a_raw - 2130.0).abs() < 1e-9);
        assert_eq!(sb.clamped, Clamp::AtN);
        assert_eq!(sb.n_a_sb, 1000.0);
        let (x, _) = oracle::grid_argmin(|x| sc_of_split(&vp, x).unwrap(), 0.0, vp.n_total, 10_001);
        assert_eq!(x, vp.n_total);
    }

    #[test]
    fn sc_at_zero_is_single_class() {
        let vp = validate(scenarios::fig2()).unwrap();
        let a1 = vp.derived().congestion;
        let expected = vp.n_total * (a1 * vp.n_total + vp.t_f + vp.f_n) + vp.f_a;
        assert!((sc_of_split(&vp, 0.0).unwrap() - expected).abs() < 1e-9 * expected);
        assert!(sc_of_split(&vp, -1.0).is_err());
    }

    #[test]
    fn derivative_parts() {
        let vp = kappa08();
        for x in [0.0, 100.0, 500.0, 999.0] {
            let d = sc_derivative_parts(&vp, x);
            assert_eq!(d.transfer(), 0.0);
            let total = sc_derivative(&vp, x);
            assert!((d.total() - total).abs() <= 1e-9 * total.abs().max(d.nv_term.abs()));
            let fd = oracle::central_diff(|y| sc_of_split(&vp, y).unwrap(), x.max(1.0), 1e-3);
            let exact = sc_derivative(&vp, x.max(1.0));
            assert!((fd - exact).abs() <= 1e-4 * exact.abs().max(1.0));
        }
    }

    #[test]
    fn sc_matches_equilibrium_records() {
        let vp = validate(scenarios::fig2()).unwrap();
        let t = regime_social_costs(&vp).unwrap();
        let n = vp.n_total;
        let ac = solve_ac(&vp);
        let rel = |x: f64, y: f64| (x - y).abs() / y.abs();
        assert!(rel(t.sc_mc, solve_mc(&vp).social_cost(n)) < 1e-9);
        assert!(rel(t.sc_ac0, ac.ac0().social_cost(n)) < 1e-9);
        assert!(rel(t.sc_ac2.unwrap(), ac.ac2().unwrap().social_cost(n)) < 1e-9);
        assert!(rel(t.sc_monopoly, solve_monopoly(&vp).social_cost(n)) < 1e-9);
        assert_eq!(t.eta_regime, EtaRegime::AtLeastOne);
        assert_eq!(t.ranking, vec![Regime::Mc, Regime::Ac2, Regime::Monopoly, Regime::Ac0]);
        assert!(t.chain_holds);
    }

    #[test]
    fn kappa08_thresholds() {
        let vp = kappa08();
        let t = regime_social_costs(&vp).unwrap();
        let nc = t.thresholds.n_c_mc_ac.value().unwrap();
        assert!((nc - 556.6).abs() < 0.1);
        assert!(t.sc_ac2.unwrap() < t.sc_mc);
        assert!(t.chain_holds);
        assert!(t.thresholds.f_a_c.value().is_none());
    }

    #[test]
    fn singular_eta_half() {
        // theta = 0.7, eta = 1/2 -> kappa = 0.85
        let vp = validate(ModelParams {
            kappa: 0.85,
            ..scenarios::fig2()
        })
        .unwrap();
        let th = thresholds(&vp);
        assert!(matches!(th.n_c_mc_m, Threshold::Absent(_)));
        assert!(matches!(th.f_a_c, Threshold::Absent(_)));
    }

    #[test]
    fn no_mc_ac_crossing_above_critical_fixed_cost() {
        let vp = validate(scenarios::fig6()).unwrap();
        let fc = thresholds(&vp).f_a_c.value().unwrap();
        let high = vp.with(|p| p.f_a = 2.0 * fc).unwrap();
        assert!(matches!(thresholds(&high).n_c_mc_ac, Threshold::Absent(_)));
        let low = vp.with(|p| p.f_a = 0.5 * fc).unwrap();
        assert!(thresholds(&low).n_c_mc_ac.value().is_some());
    }

    #[test]
    fn strategy_fig2() {
        let vp = validate(scenarios::fig2()).unwrap();
        let r = recommend_strategy(&vp, 480.0).unwrap();
        assert!(r.commuter_activate && r.social_activate);
        let r = recommend_strategy(&vp, 30.0).unwrap();
        assert!(!r.commuter_activate && !r.social_activate);
        let vp = validate(ModelParams {
            f_a: 1e7,
            ..scenarios::fig2()
        })
        .unwrap();
        let r = recommend_strategy(&vp, 480.0).unwrap();
        assert_eq!(r.commuter_advice, "no viable AC regime");
    }

    #[test]
    fn strategy_fig6() {
        let vp = validate(scenarios::fig6()).unwrap();
        let mono = solve_monopoly(&vp).n_a();
        let r = recommend_strategy(&vp, mono).unwrap();
        assert!(r.commuter_activate);
        assert!(!r.social_activate);
        let t = regime_social_costs(&vp).unwrap();
        assert!(t.chain_holds, "{t:?}");
    }

    #[test]
    fn surface_skips_invalid_eta() {
        let vp = validate(scenarios::fig6()).unwrap();
        let pts = sc_surface(&vp, &[0.1, 0.5, 5.0], 11);
        assert_eq!(pts.len(), 22);
    }
}

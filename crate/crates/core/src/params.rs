//! Exogenous model parameters, validation, and the derived constants shared
//! by every solver.
//!
//! The NV value of time is normalised to one and the common desired arrival
//! time to zero, so neither appears as a field.

use std::fmt::Write as _;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};

/// Default absolute tolerance for knife-edge comparisons. It is applied after
/// scaling by the magnitude of the compared quantity.
pub const DEFAULT_TOL: f64 = 1e-9;

/// All exogenous scalars of the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Commuter population `N` (continuum mass).
    pub n_total: f64,
    /// Bottleneck capacity `mu` (commuters per unit time).
    pub mu: f64,
    /// Capacity consumed by one SAV relative to one NV, `0 < kappa < 1`.
    pub kappa: f64,
    /// SAV value-of-time factor, `beta < theta < 1`.
    pub theta: f64,
    /// Early-arrival penalty per unit time.
    pub beta: f64,
    /// Late-arrival penalty per unit time.
    pub gamma: f64,
    /// Free-flow travel time.
    pub t_f: f64,
    /// Fixed cost of using an NV.
    pub f_n: f64,
    /// Fixed cost of the SAV operator.
    pub f_a: f64,
    /// Marginal operating cost per SAV commuter.
    pub m: f64,
}

/// Field names in declaration order; used by the header codec and config
/// loaders.
pub const PARAM_KEYS: [&str; 10] = [
    "n_total", "mu", "kappa", "theta", "beta", "gamma", "t_f", "f_n", "f_a", "m",
];

impl ModelParams {
    /// `beta * gamma / (mu * (beta + gamma))`, the slope of the single-class
    /// bottleneck cost in the number of commuters.
    pub fn congestion_coef(&self) -> f64 {
        self.beta * self.gamma / (self.mu * (self.beta + self.gamma))
    }

    /// Piecewise-linear schedule-delay cost for arrival time `t`.
    pub fn schedule_cost(&self, t: f64) -> f64 {
        if t < 0.0 {
            -self.beta * t
        } else {
            self.gamma * t
        }
    }

    fn values(&self) -> [f64; 10] {
        [
            self.n_total,
            self.mu,
            self.kappa,
            self.theta,
            self.beta,
            self.gamma,
            self.t_f,
            self.f_n,
            self.f_a,
            self.m,
        ]
    }

    /// Sets the field named `key`; returns false for an unknown key.
    pub fn set(&mut self, key: &str, value: f64) -> bool {
        let slot = match key {
            "n_total" => &mut self.n_total,
            "mu" => &mut self.mu,
            "kappa" => &mut self.kappa,
            "theta" => &mut self.theta,
            "beta" => &mut self.beta,
            "gamma" => &mut self.gamma,
            "t_f" => &mut self.t_f,
            "f_n" => &mut self.f_n,
            "f_a" => &mut self.f_a,
            "m" => &mut self.m,
            _ => return false,
        };
        *slot = value;
        true
    }

    /// Comment block echoed at the top of every CSV output. Values use the
    /// shortest representation that parses back to the same `f64`.
    pub fn header_block(&self) -> String {
        let mut out = String::new();
        for (key, value) in PARAM_KEYS.iter().zip(self.values()) {
            let _ = writeln!(out, "# {key} = {value}");
        }
        out
    }

    /// Parses the parameter lines of a header block written by
    /// [`ModelParams::header_block`]. Other comment lines are ignored; parsing
    /// stops at the first non-comment line.
    pub fn from_header(text: &str) -> Result<Self> {
        let mut params = ModelParams {
            n_total: f64::NAN,
            mu: f64::NAN,
            kappa: f64::NAN,
            theta: f64::NAN,
            beta: f64::NAN,
            gamma: f64::NAN,
            t_f: f64::NAN,
            f_n: f64::NAN,
            f_a: f64::NAN,
            m: f64::NAN,
        };
        let mut seen = [false; 10];
        for line in text.lines() {
            let Some(body) = line.strip_prefix('#') else {
                break;
            };
            let Some((key, value)) = body.split_once('=') else {
                continue;
            };
            let key = key.trim();
            let Some(idx) = PARAM_KEYS.iter().position(|k| *k == key) else {
                continue;
            };
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| ModelError::Header(format!("bad value for `{key}`: {}", value.trim())))?;
            params.set(key, value);
            seen[idx] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(ModelError::Header(format!("missing `{}`", PARAM_KEYS[missing])));
        }
        Ok(params)
    }
}

/// Soft validity flags. None of these is an error; corner regimes remain
/// computable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Validity {
    /// `0 < B < AN`: both modes are used under MC pricing.
    pub interior: bool,
    /// `(AN - B)^2 - 4 A F_a >= 0`: AC pricing admits SAV riders and the
    /// monopolist breaks even.
    pub ac_viable: bool,
    /// `beta < theta`; always true once validation succeeds.
    pub beta_theta_ok: bool,
}

/// Constants derived from the parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    /// `A = beta gamma (1 - theta) / ((beta + gamma) mu)`.
    pub a_coef: f64,
    /// `B = theta t_f + m - (t_f + F_n)`.
    pub b_coef: f64,
    /// Capacity-VOT index `(1 - kappa) / (1 - theta)`.
    pub eta: f64,
    /// `(AN - B)^2 - 4 A F_a`.
    pub discriminant: f64,
    /// Square root of the discriminant when it is non-negative (within
    /// tolerance; a knife-edge discriminant yields exactly zero).
    pub k_root: Option<f64>,
    /// Minimum population for which AC pricing admits SAV riders.
    pub n_min: f64,
    /// `A / (1 - theta)`, the congestion slope shared by both modes.
    pub congestion: f64,
}

/// Parameters that passed the hard checks, with their soft flags and derived
/// constants attached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidatedParams {
    params: ModelParams,
    validity: Validity,
    derived: DerivedConstants,
    tol: f64,
}

impl Deref for ValidatedParams {
    type Target = ModelParams;

    fn deref(&self) -> &ModelParams {
        &self.params
    }
}

impl ValidatedParams {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn validity(&self) -> Validity {
        self.validity
    }

    pub fn derived(&self) -> &DerivedConstants {
        &self.derived
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// `A`.
    pub fn a(&self) -> f64 {
        self.derived.a_coef
    }

    /// `B`.
    pub fn b(&self) -> f64 {
        self.derived.b_coef
    }

    pub fn eta(&self) -> f64 {
        self.derived.eta
    }

    /// `AN - B`.
    pub fn surplus(&self) -> f64 {
        self.derived.a_coef * self.params.n_total - self.derived.b_coef
    }

    /// True when the AC discriminant is zero within tolerance.
    pub fn ac_tangent(&self) -> bool {
        self.derived.k_root == Some(0.0)
    }

    /// Re-validates a modified copy with the same tolerance.
    pub fn with(&self, f: impl FnOnce(&mut ModelParams)) -> Result<ValidatedParams> {
        let mut p = self.params;
        f(&mut p);
        validate_with_tol(p, self.tol)
    }
}

/// Validates parameters with the default tolerance.
pub fn validate(params: ModelParams) -> Result<ValidatedParams> {
    validate_with_tol(params, DEFAULT_TOL)
}

/// Validates parameters. Impossible values are errors; corner regimes are
/// reported through [`Validity`].
pub fn validate_with_tol(params: ModelParams, tol: f64) -> Result<ValidatedParams> {
    for (name, value) in PARAM_KEYS.iter().zip(params.values()) {
        if !value.is_finite() {
            return Err(ModelError::NonFinite { name, value });
        }
    }
    let positive = [
        ("n_total", params.n_total),
        ("mu", params.mu),
        ("beta", params.beta),
        ("gamma", params.gamma),
    ];
    for (name, value) in positive {
        if value <= 0.0 {
            return Err(ModelError::OutOfRange {
                name,
                value,
                expected: "> 0",
            });
        }
    }
    let non_negative = [
        ("t_f", params.t_f),
        ("f_n", params.f_n),
        ("f_a", params.f_a),
        ("m", params.m),
    ];
    for (name, value) in non_negative {
        if value < 0.0 {
            return Err(ModelError::OutOfRange {
                name,
                value,
                expected: ">= 0",
            });
        }
    }
    for (name, value) in [("kappa", params.kappa), ("theta", params.theta)] {
        if !(value > 0.0 && value < 1.0) {
            return Err(ModelError::OutOfRange {
                name,
                value,
                expected: "in (0, 1)",
            });
        }
    }
    if params.beta >= params.theta {
        return Err(ModelError::BetaNotBelowTheta {
            beta: params.beta,
            theta: params.theta,
        });
    }
    if !(tol >= 0.0 && tol.is_finite()) {
        return Err(ModelError::OutOfRange {
            name: "tol",
            value: tol,
            expected: "finite and >= 0",
        });
    }

    let derived = derive_constants(&params, tol);
    let an = derived.a_coef * params.n_total;
    let b = derived.b_coef;
    let scale = an.abs().max(b.abs()).max(1.0);
    let validity = Validity {
        interior: b > tol * scale && an - b > tol * scale,
        ac_viable: derived.k_root.is_some(),
        beta_theta_ok: true,
    };
    Ok(ValidatedParams {
        params,
        validity,
        derived,
        tol,
    })
}

/// Returns the derived constants of validated parameters.
pub fn derive(params: &ValidatedParams) -> DerivedConstants {
    params.derived
}

fn derive_constants(p: &ModelParams, tol: f64) -> DerivedConstants {
    let congestion = p.congestion_coef();
    let a = congestion * (1.0 - p.theta);
    let b = p.theta * p.t_f + p.m - (p.t_f + p.f_n);
    let surplus = a * p.n_total - b;
    let discriminant = surplus * surplus - 4.0 * a * p.f_a;
    let disc_scale = (surplus * surplus).max(4.0 * a * p.f_a).max(1.0);
    let k_root = if discriminant.abs() <= tol * disc_scale {
        Some(0.0)
    } else if discriminant > 0.0 {
        Some(discriminant.sqrt())
    } else {
        None
    };
    DerivedConstants {
        a_coef: a,
        b_coef: b,
        eta: (1.0 - p.kappa) / (1.0 - p.theta),
        discriminant,
        k_root,
        n_min: (b + (4.0 * a * p.f_a).sqrt()) / a,
        congestion,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios;

    #[test]
    fn fig2_is_interior() {
        let vp = validate(scenarios::fig2()).unwrap();
        let d = vp.derived();
        assert!((d.a_coef - 2.4).abs() < 1e-12);
        assert!((d.b_coef - 96.0).abs() < 1e-12);
        assert!((vp.a() * vp.n_total - 2400.0).abs() < 1e-9);
        assert!(vp.validity().interior);
        assert!(vp.validity().beta_theta_ok);
    }

    #[test]
    fn beta_at_or_above_theta_is_rejected() {
        let p = ModelParams {
            beta: 0.8,
            ..scenarios::fig2()
        };
        assert!(matches!(validate(p), Err(ModelError::BetaNotBelowTheta { .. })));
        let p = ModelParams {
            beta: 0.7,
            ..scenarios::fig2()
        };
        assert!(validate(p).is_err());
    }

    #[test]
    fn hard_errors() {
        let base = scenarios::fig2();
        assert!(validate(ModelParams { mu: 0.0, ..base }).is_err());
        assert!(validate(ModelParams { kappa: 1.0, ..base }).is_err());
        assert!(validate(ModelParams { theta: 0.0, ..base }).is_err());
        assert!(validate(ModelParams { f_a: -1.0, ..base }).is_err());
        assert!(validate(ModelParams {
            n_total: f64::NAN,
            ..base
        })
        .is_err());
        assert!(validate(ModelParams {
            t_f: f64::INFINITY,
            ..base
        })
        .is_err());
    }

    #[test]
    fn zero_fixed_cost_discriminant_is_surplus_squared() {
        let vp = validate(ModelParams {
            f_a: 0.0,
            ..scenarios::fig2()
        })
        .unwrap();
        assert!(vp.validity().ac_viable);
        assert_eq!(vp.derived().discriminant, vp.surplus() * vp.surplus());
    }

    #[test]
    fn fig2_constants() {
        let vp = validate(scenarios::fig2()).unwrap();
        let d = vp.derived();
        // independent recomputation from raw inputs
        let (beta, gamma, theta, mu, kappa) = (0.4, 0.4, 0.7, 0.025, 0.01);
        let a = beta * gamma * (1.0 - theta) / ((beta + gamma) * mu);
        assert!((d.a_coef - a).abs() < 1e-12);
        assert!((d.eta - 0.99 / 0.3).abs() < 1e-12);
        assert!((d.eta - (1.0 - kappa) / (1.0 - theta)).abs() < 1e-15);
        assert!((d.discriminant - 4_064_256.0).abs() < 1e-6);
        let k = d.k_root.unwrap();
        assert!((k - 2016.0).abs() < 1e-9);
        assert!((k * k - d.discriminant).abs() < 1e-6);
    }

    #[test]
    fn eta_is_one_when_kappa_equals_theta() {
        let vp = validate(ModelParams {
            kappa: 0.7,
            ..scenarios::fig2()
        })
        .unwrap();
        assert_eq!(vp.eta(), 1.0);
    }

    #[test]
    fn negative_discriminant_has_no_root() {
        let vp = validate(ModelParams {
            f_a: 1e7,
            ..scenarios::fig2()
        })
        .unwrap();
        assert!(vp.derived().k_root.is_none());
        assert!(!vp.validity().ac_viable);
    }

    #[test]
    fn header_round_trip() {
        let p = ModelParams {
            mu: 0.1 + 0.2,
            ..scenarios::fig4()
        };
        let text = format!("{}# note = ignored\nt,q\n1,2\n", p.header_block());
        assert_eq!(ModelParams::from_header(&text).unwrap(), p);
        assert!(ModelParams::from_header("# mu = 1\n").is_err());
    }
}

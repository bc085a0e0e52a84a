//! Departure-time equilibrium for a fixed mode split: closed-form costs,
//! the rush-hour queue profile, and a grid verifier for that profile.

use serde::Serialize;

use crate::error::{ModelError, Result};
use crate::params::ModelParams;

/// Numbers of NV and SAV commuters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeSplit {
    pub n_n: f64,
    pub n_a: f64,
}

impl ModeSplit {
    /// Split with `n_a` SAV commuters out of `n_total`.
    pub fn with_sav(n_total: f64, n_a: f64) -> Result<Self> {
        let slack = 1e-12 * n_total.max(1.0);
        if !n_a.is_finite() || n_a < -slack || n_a > n_total + slack {
            return Err(ModelError::SavCountOutOfRange { n_a, n_total });
        }
        let n_a = n_a.clamp(0.0, n_total);
        Ok(ModeSplit {
            n_n: n_total - n_a,
            n_a,
        })
    }

    /// Checks non-negativity and conservation against `n_total`.
    pub fn checked(n_n: f64, n_a: f64, n_total: f64) -> Result<Self> {
        let ok = n_n.is_finite()
            && n_a.is_finite()
            && n_n >= 0.0
            && n_a >= 0.0
            && (n_n + n_a - n_total).abs() <= 1e-9 * n_total.max(1.0);
        if !ok {
            return Err(ModelError::InvalidSplit { n_n, n_a, n_total });
        }
        Ok(ModeSplit { n_n, n_a })
    }

    pub fn total(&self) -> f64 {
        self.n_n + self.n_a
    }
}

/// Equilibrium commuting costs of both modes at a given fare.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeCosts {
    pub c_n: f64,
    /// `+inf` when the fare is infinite (AC pricing with no riders).
    pub c_a: f64,
    pub fare: f64,
}

impl ModeCosts {
    /// `c_n - c_a`; positive means SAV is cheaper.
    pub fn gap(&self) -> f64 {
        if self.c_a.is_infinite() {
            f64::NEG_INFINITY
        } else {
            self.c_n - self.c_a
        }
    }
}

/// Closed-form departure-time equilibrium costs for a split and fare.
pub fn equilibrium_costs(params: &ModelParams, split: ModeSplit, fare: f64) -> ModeCosts {
    let a1 = params.congestion_coef();
    let c_n = a1 * (split.n_n + params.kappa * split.n_a) + params.t_f + params.f_n;
    let c_a = if fare.is_infinite() {
        f64::INFINITY
    } else {
        a1 * (params.theta * split.n_n + params.kappa * split.n_a) + params.theta * params.t_f + fare
    };
    ModeCosts { c_n, c_a, fare }
}

/// Continuous piecewise-linear function, zero outside its knots.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PiecewiseLinear {
    knots: Vec<(f64, f64)>,
}

impl PiecewiseLinear {
    /// Knots must be sorted by abscissa. Duplicate abscissae are collapsed.
    pub fn new(knots: Vec<(f64, f64)>) -> Self {
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(knots.len());
        for k in knots {
            match out.last() {
                Some(last) if k.0 <= last.0 => {}
                _ => out.push(k),
            }
        }
        PiecewiseLinear { knots: out }
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn eval(&self, t: f64) -> f64 {
        let k = &self.knots;
        if k.is_empty() || t < k[0].0 || t > k[k.len() - 1].0 {
            return 0.0;
        }
        let i = k.partition_point(|p| p.0 <= t);
        if i == 0 {
            return k[0].1;
        }
        if i == k.len() {
            return k[k.len() - 1].1;
        }
        let (t0, y0) = k[i - 1];
        let (t1, y1) = k[i];
        y0 + (y1 - y0) * (t - t0) / (t1 - t0)
    }

    /// Exact integral over the support.
    pub fn integral(&self) -> f64 {
        self.knots
            .windows(2)
            .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
            .sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        PiecewiseLinear {
            knots: self.knots.iter().map(|&(t, y)| (t, y * factor)).collect(),
        }
    }
}

/// Constant arrival rates over `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowSegment {
    pub start: f64,
    pub end: f64,
    pub nv_rate: f64,
    pub sav_rate: f64,
}

/// Arrival windows, queue delay and flows of a no-toll equilibrium.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RushHourProfile {
    pub split: ModeSplit,
    pub t_n_minus: f64,
    pub t_n_plus: f64,
    pub t_a_minus: f64,
    pub t_a_plus: f64,
    /// Queueing time `q(t)` in time units.
    pub queue_delay: PiecewiseLinear,
    pub flows: Vec<FlowSegment>,
}

impl RushHourProfile {
    fn segment(&self, t: f64) -> Option<&FlowSegment> {
        let last = self.flows.len().checked_sub(1)?;
        self.flows
            .iter()
            .enumerate()
            .find(|(i, s)| t >= s.start && (t < s.end || (*i == last && t <= s.end)))
            .map(|(_, s)| s)
    }

    pub fn nv_flow(&self, t: f64) -> f64 {
        self.segment(t).map_or(0.0, |s| s.nv_rate)
    }

    pub fn sav_flow(&self, t: f64) -> f64 {
        self.segment(t).map_or(0.0, |s| s.sav_rate)
    }

    pub fn nv_mass(&self) -> f64 {
        self.flows.iter().map(|s| s.nv_rate * (s.end - s.start)).sum()
    }

    pub fn sav_mass(&self) -> f64 {
        self.flows.iter().map(|s| s.sav_rate * (s.end - s.start)).sum()
    }

    pub fn width(&self) -> f64 {
        self.t_n_plus - self.t_n_minus
    }

    /// Copy with the queue delay multiplied by `factor`.
    pub fn with_queue_scaled(&self, factor: f64) -> Self {
        RushHourProfile {
            queue_delay: self.queue_delay.scaled(factor),
            ..self.clone()
        }
    }

    pub fn nv_cost_at(&self, params: &ModelParams, t: f64) -> f64 {
        params.t_f + self.queue_delay.eval(t) + params.schedule_cost(t) + params.f_n
    }

    pub fn sav_cost_at(&self, params: &ModelParams, t: f64, fare: f64) -> f64 {
        params.theta * (params.t_f + self.queue_delay.eval(t)) + params.schedule_cost(t) + fare
    }
}

/// Builds the no-toll rush hour: SAVs arrive in an inner window around the
/// desired time, NVs on the two shoulders, both windows split early:late in
/// the ratio `gamma : beta`.
pub fn build_profile(params: &ModelParams, split: ModeSplit) -> RushHourProfile {
    let (beta, gamma, mu, kappa, theta) = (params.beta, params.gamma, params.mu, params.kappa, params.theta);
    let width = (split.n_n + kappa * split.n_a) / mu;
    let inner = kappa * split.n_a / mu;
    let early = gamma / (beta + gamma);
    let late = beta / (beta + gamma);
    let t_n_minus = -early * width;
    let t_n_plus = late * width;
    let t_a_minus = -early * inner;
    let t_a_plus = late * inner;

    let q_junction = beta * (t_a_minus - t_n_minus);
    let q_peak = q_junction - beta / theta * t_a_minus;
    let queue_delay = PiecewiseLinear::new(vec![
        (t_n_minus, 0.0),
        (t_a_minus, q_junction),
        (0.0, q_peak),
        (t_a_plus, gamma * (t_n_plus - t_a_plus)),
        (t_n_plus, 0.0),
    ]);

    let mut flows = Vec::with_capacity(3);
    let mut push = |start: f64, end: f64, nv_rate: f64, sav_rate: f64| {
        if end > start {
            flows.push(FlowSegment {
                start,
                end,
                nv_rate,
                sav_rate,
            });
        }
    };
    push(t_n_minus, t_a_minus, mu, 0.0);
    push(t_a_minus, t_a_plus, 0.0, mu / kappa);
    push(t_a_plus, t_n_plus, mu, 0.0);

    RushHourProfile {
        split,
        t_n_minus,
        t_n_plus,
        t_a_minus,
        t_a_plus,
        queue_delay,
        flows,
    }
}

/// Residuals of a profile checked on a time grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerificationReport {
    pub grid_points: usize,
    pub cost_scale: f64,
    /// Max |c_n(t) - c_n*| over the NV arrival support.
    pub nv_in_window: f64,
    /// Max |c_a(t) - c_a*| over the SAV arrival support.
    pub sav_in_window: f64,
    /// Min (c_n(t) - c_n*) where no NV arrives.
    pub nv_outside_slack: f64,
    /// Min (c_a(t) - c_a*) where no SAV arrives.
    pub sav_outside_slack: f64,
    /// Max |n_n + kappa n_a - mu| where the queue is positive.
    pub capacity_violation: f64,
    /// Relative error of the integrated flows against the split.
    pub mass_error: f64,
    pub tol: f64,
    pub passed: bool,
}

/// Relative tolerance used by [`verify_profile`].
pub const PROFILE_TOL: f64 = 1e-6;

/// Evaluates both modes' costs on a uniform grid over 1.2 times the rush
/// hour. `grid_step` defaults to the spacing of 4001 points.
pub fn verify_profile(
    params: &ModelParams,
    profile: &RushHourProfile,
    fare: f64,
    grid_step: Option<f64>,
) -> VerificationReport {
    let target = equilibrium_costs(params, profile.split, fare);
    let width = profile.width().max(f64::MIN_POSITIVE);
    let centre = 0.5 * (profile.t_n_minus + profile.t_n_plus);
    let lo = centre - 0.6 * width;
    let span = 1.2 * width;
    let points = match grid_step {
        Some(h) if h > 0.0 && h.is_finite() => ((span / h).ceil() as usize + 1).max(2),
        _ => 4001,
    };
    let step = span / (points - 1) as f64;

    let sav_active = profile.split.n_a > 0.0 && target.c_a.is_finite();
    let nv_active = profile.split.n_n > 0.0;
    let cost_scale = if target.c_a.is_finite() {
        target.c_n.abs().max(target.c_a.abs()).max(1.0)
    } else {
        target.c_n.abs().max(1.0)
    };
    let edge = 1e-12 * width;

    let mut nv_in = 0.0f64;
    let mut sav_in = 0.0f64;
    let mut nv_out = f64::INFINITY;
    let mut sav_out = f64::INFINITY;
    let mut cap = 0.0f64;
    let in_sav =
        |t: f64| t >= profile.t_a_minus - edge && t <= profile.t_a_plus + edge && profile.t_a_plus > profile.t_a_minus;
    let in_nv = |t: f64| {
        let shoulder = t >= profile.t_n_minus - edge && t <= profile.t_n_plus + edge;
        let strictly_inner = t > profile.t_a_minus + edge && t < profile.t_a_plus - edge;
        shoulder && !strictly_inner
    };
    for i in 0..points {
        let t = lo + step * i as f64;
        let c_n = profile.nv_cost_at(params, t);
        if nv_active && in_nv(t) {
            nv_in = nv_in.max((c_n - target.c_n).abs());
        } else if nv_active {
            nv_out = nv_out.min(c_n - target.c_n);
        }
        if target.c_a.is_finite() {
            let c_a = profile.sav_cost_at(params, t, fare);
            if sav_active && in_sav(t) {
                sav_in = sav_in.max((c_a - target.c_a).abs());
            } else if sav_active {
                sav_out = sav_out.min(c_a - target.c_a);
            }
        }
        if profile.queue_delay.eval(t) > 0.0 {
            let load = profile.nv_flow(t) + params.kappa * profile.sav_flow(t);
            cap = cap.max((load - params.mu).abs() / params.mu);
        }
    }
    let mass_error = ((profile.nv_mass() - profile.split.n_n).abs() + (profile.sav_mass() - profile.split.n_a).abs())
        / profile.split.total().max(f64::MIN_POSITIVE);
    let tol = PROFILE_TOL * cost_scale;
    let passed = nv_in <= tol
        && sav_in <= tol
        && nv_out >= -tol
        && sav_out >= -tol
        && cap <= PROFILE_TOL
        && mass_error <= PROFILE_TOL;
    VerificationReport {
        grid_points: points,
        cost_scale,
        nv_in_window: nv_in,
        sav_in_window: sav_in,
        nv_outside_slack: nv_out,
        sav_outside_slack: sav_out,
        capacity_violation: cap,
        mass_error,
        tol,
        passed,
    }
}

/// One row of the profile table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileSample {
    pub t: f64,
    pub q: f64,
    pub n_n: f64,
    pub n_a: f64,
    pub c_n: f64,
    pub c_a: f64,
}

/// Samples the profile on `points` uniform times over 1.2 times the rush hour.
pub fn sample_profile(params: &ModelParams, profile: &RushHourProfile, fare: f64, points: usize) -> Vec<ProfileSample> {
    let points = points.max(2);
    let width = profile.width();
    let lo = 0.5 * (profile.t_n_minus + profile.t_n_plus) - 0.6 * width;
    let step = 1.2 * width / (points - 1) as f64;
    (0..points)
        .map(|i| {
            let t = lo + step * i as f64;
            ProfileSample {
                t,
                q: profile.queue_delay.eval(t),
                n_n: profile.nv_flow(t),
                n_a: profile.sav_flow(t),
                c_n: profile.nv_cost_at(params, t),
                c_a: profile.sav_cost_at(params, t, fare),
            }
        })
        .collect()
}

//! Seeded parameter draws shared by the integration tests.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sav_bottleneck::{validate, ModelParams, ValidatedParams};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Everything but the two costs `m` and `F_a`, which callers set from the
/// derived constants.
fn base(rng: &mut ChaCha8Rng, kappa: f64, theta: f64) -> ModelParams {
    let beta = rng.gen_range(0.05..0.95) * theta;
    ModelParams {
        n_total: rng.gen_range(10.0..5000.0),
        mu: rng.gen_range(0.01..2.0),
        kappa,
        theta,
        beta,
        gamma: rng.gen_range(0.05..3.0),
        t_f: rng.gen_range(0.5..20.0),
        f_n: rng.gen_range(0.0..5.0),
        f_a: 0.0,
        m: 0.0,
    }
}

fn congestion(p: &ModelParams) -> f64 {
    p.beta * p.gamma / (p.mu * (p.beta + p.gamma))
}

/// Sets `m` so that `B = b_share * A N` and `F_a = u * (AN - B)^2 / (4A)`.
/// `u < 1` gives two distinct AC roots, `u = 1` a tangency.
pub fn place(mut p: ModelParams, b_share: f64, u: f64) -> ModelParams {
    let a = congestion(&p) * (1.0 - p.theta);
    let an = a * p.n_total;
    let b = b_share * an;
    p.m = b - p.theta * p.t_f + p.t_f + p.f_n;
    p.f_a = u * (an - b).powi(2) / (4.0 * a);
    p
}

/// Interior draw with strict two-root AC regime (`N > N_min`).
pub fn strict(rng: &mut ChaCha8Rng) -> ValidatedParams {
    loop {
        let theta = rng.gen_range(0.1..0.95);
        let kappa = rng.gen_range(0.01..0.99);
        let p = place(
            base(rng, kappa, theta),
            rng.gen_range(0.05..0.8),
            rng.gen_range(0.05..0.95),
        );
        if let Ok(vp) = validate(p) {
            if vp.m >= 0.0 && vp.validity().interior && matches!(vp.derived().k_root, Some(k) if k > 0.0) {
                return vp;
            }
        }
    }
}

/// Strict draw with a prescribed capacity-VOT index.
pub fn with_eta(rng: &mut ChaCha8Rng, eta: f64) -> ValidatedParams {
    loop {
        let theta = rng.gen_range(0.1..0.95);
        let kappa = 1.0 - eta * (1.0 - theta);
        if !(kappa > 0.01 && kappa < 0.99) {
            continue;
        }
        let p = place(
            base(rng, kappa, theta),
            rng.gen_range(0.05..0.8),
            rng.gen_range(0.05..0.95),
        );
        if let Ok(vp) = validate(p) {
            if vp.m >= 0.0 && vp.validity().interior && matches!(vp.derived().k_root, Some(k) if k > 0.0) {
                return vp;
            }
        }
    }
}

/// Any valid draw, including ones without AC equilibria.
pub fn any(rng: &mut ChaCha8Rng) -> ValidatedParams {
    loop {
        let theta = rng.gen_range(0.1..0.95);
        let kappa = rng.gen_range(0.01..0.99);
        let p = place(
            base(rng, kappa, theta),
            rng.gen_range(0.05..0.95),
            rng.gen_range(0.05..1.5),
        );
        if let Ok(vp) = validate(p) {
            if vp.m >= 0.0 {
                return vp;
            }
        }
    }
}

//! Brute-force numerical routines used to cross-check the closed forms.
//! Nothing here knows about the model.

/// Bisection on a bracketing interval. Returns `None` when `f(lo)` and `f(hi)`
/// share a sign and neither is zero.
pub fn bisect(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64, x_tol: f64) -> Option<f64> {
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Some(lo);
    }
    if f_hi == 0.0 {
        return Some(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return None;
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= x_tol || mid == lo || mid == hi {
            return Some(mid);
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Some(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Golden-section minimisation of a unimodal function on `[lo, hi]`.
pub fn golden_min(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64, x_tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > x_tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
        if x2 <= x1 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Scans `steps` equal sub-intervals of `[lo, hi]` and refines every sign
/// change by bisection.
pub fn sign_change_roots(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, steps: usize, x_tol: f64) -> Vec<f64> {
    let steps = steps.max(1);
    let h = (hi - lo) / steps as f64;
    let mut roots = Vec::new();
    let mut x_prev = lo;
    let mut f_prev = f(lo);
    for i in 1..=steps {
        let x = if i == steps { hi } else { lo + h * i as f64 };
        let fx = f(x);
        if f_prev == 0.0 {
            if roots.last().is_none_or(|r: &f64| (*r - x_prev).abs() > x_tol) {
                roots.push(x_prev);
            }
        } else if fx != 0.0 && f_prev.signum() != fx.signum() {
            if let Some(r) = bisect(&mut f, x_prev, x, x_tol) {
                roots.push(r);
            }
        }
        x_prev = x;
        f_prev = fx;
    }
    if f_prev == 0.0 && roots.last().is_none_or(|r| (*r - x_prev).abs() > x_tol) {
        roots.push(x_prev);
    }
    roots
}

/// Composite trapezoid rule with `points` samples (at least two).
pub fn trapezoid(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, points: usize) -> f64 {
    let points = points.max(2);
    let h = (hi - lo) / (points - 1) as f64;
    let mut sum = 0.5 * (f(lo) + f(hi));
    for i in 1..points - 1 {
        sum += f(lo + h * i as f64);
    }
    sum * h
}

/// Index and value of the smallest sample of `f` on a uniform grid.
pub fn grid_argmin(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, points: usize) -> (f64, f64) {
    let points = points.max(2);
    let h = (hi - lo) / (points - 1) as f64;
    let mut best = (lo, f(lo));
    for i in 1..points {
        let x = lo + h * i as f64;
        let v = f(x);
        if v < best.1 {
            best = (x, v);
        }
    }
    best
}

/// Central finite difference.
pub fn central_diff(mut f: impl FnMut(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_sqrt2() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
        assert!(bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-12).is_none());
    }

    #[test]
    fn golden_parabola() {
        let x = golden_min(|x| (x - 0.3).powi(2), -4.0, 5.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-8);
    }

    #[test]
    fn scan_finds_cubic_roots() {
        let r = sign_change_roots(|x| (x - 1.0) * (x - 2.5) * (x + 3.0), -5.0, 5.0, 97, 1e-12);
        assert_eq!(r.len(), 3);
        assert!((r[0] + 3.0).abs() < 1e-10);
        assert!((r[2] - 2.5).abs() < 1e-10);
    }

    #[test]
    fn trapezoid_is_exact_on_lines() {
        let v = trapezoid(|x| 3.0 * x + 1.0, 0.0, 2.0, 3);
        assert!((v - 8.0).abs() < 1e-14);
    }
}

//! Bracketed root finding, bracket expansion and golden-section search.

use crate::error::{Error, Result};

/// Brent's method on a sign-changing bracket `[a, b]`.
pub fn brent<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, xtol: f64) -> Result<f64> {
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.is_nan() || fb.is_nan() || fa.signum() == fb.signum() {
        return Err(Error::RootFinding(format!(
            "no sign change on [{a}, {b}] (f = {fa}, {fb})"
        )));
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..500 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
        if fb.is_nan() {
            return Err(Error::RootFinding(format!("NaN at x = {b}")));
        }
    }
    Ok(b)
}

/// Expands `[lo, hi]` geometrically around its midpoint until the
/// nondecreasing function `g` satisfies `g(lo) < 0 <= g(hi)`, staying inside
/// `[min, max]`.
pub fn expand_bracket<F: Fn(f64) -> f64>(
    g: F,
    mut lo: f64,
    mut hi: f64,
    min: f64,
    max: f64,
) -> Result<(f64, f64)> {
    let mut step = (hi - lo).abs().max(1.0);
    for _ in 0..2100 {
        if g(lo) < 0.0 {
            break;
        }
        hi = lo;
        lo = (lo - step).max(min);
        step *= 2.0;
        if lo == min && g(lo) >= 0.0 {
            return Ok((lo, lo));
        }
    }
    let mut step = (hi - lo).abs().max(1.0);
    for _ in 0..2100 {
        if g(hi) >= 0.0 {
            return Ok((lo, hi));
        }
        lo = hi;
        hi = (hi + step).min(max);
        step *= 2.0;
        if hi == max && g(hi) < 0.0 {
            return Err(Error::RootFinding(format!(
                "function stays below target up to the upper limit {max}"
            )));
        }
    }
    Err(Error::RootFinding("bracket expansion did not terminate".into()))
}

/// Bisection for the generalized inverse of a nondecreasing `h`:
/// returns (approximately) `inf { x : h(x) >= target }` as the right end of
/// the final bracket, so `h(result) >= target` always holds.
pub fn bisect_generalized_inverse<F: Fn(f64) -> f64>(
    h: F,
    target: f64,
    mut lo: f64,
    mut hi: f64,
) -> f64 {
    // invariant: h(lo) < target <= h(hi)
    for _ in 0..2200 {
        let mid = if lo.is_finite() && hi.is_finite() {
            lo + 0.5 * (hi - lo)
        } else {
            0.5 * lo + 0.5 * hi
        };
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Golden-section maximization of `f` on `[a, b]`.
///
/// Returns `(argmax, max)`. Ties between the interior probes move the bracket
/// to the left so that flat maxima resolve to the smallest abscissa.
pub fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, xtol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > xtol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
        if b - a <= f64::EPSILON * (a.abs() + b.abs()) {
            break;
        }
    }
    let x = 0.5 * (a + b);
    let fx = f(x);
    let mut best = (x, fx);
    for (xx, ff) in [(c, fc), (d, fd)] {
        if ff > best.1 {
            best = (xx, ff);
        }
    }
    best
}

//! Regularized incomplete gamma and beta functions evaluated in log space.
//!
//! Both routines return the pair `(ln P, ln Q)` where `P + Q = 1`, with the
//! smaller of the two computed directly from its series or continued
//! fraction so that far tails never pass through a subtraction from one.

use statrs::function::gamma::ln_gamma;

const EPS: f64 = 1e-16;
const FPMIN: f64 = 1e-300;
const MAX_ITER: usize = 100_000;

/// `ln(1 - exp(l))` for `l <= 0`.
pub fn ln_one_minus_exp(l: f64) -> f64 {
    if l >= 0.0 {
        f64::NEG_INFINITY
    } else if l > -std::f64::consts::LN_2 {
        (-l.exp_m1()).ln()
    } else {
        (-l.exp()).ln_1p()
    }
}

pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// `(ln P(a, x), ln Q(a, x))` for the regularized incomplete gamma function.
pub fn ln_gamma_reg_pair(a: f64, x: f64) -> (f64, f64) {
    if x <= 0.0 {
        return (f64::NEG_INFINITY, 0.0);
    }
    if x.is_infinite() {
        return (0.0, f64::NEG_INFINITY);
    }
    let ln_front = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        let mut ap = a;
        let mut del = 1.0 / a;
        let mut sum = del;
        for _ in 0..MAX_ITER {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if del.abs() < sum.abs() * EPS {
                break;
            }
        }
        let ln_p = ln_front + sum.ln();
        (ln_p, ln_one_minus_exp(ln_p))
    } else {
        // modified Lentz on the Legendre continued fraction
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / FPMIN;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < FPMIN {
                d = FPMIN;
            }
            c = b + an / c;
            if c.abs() < FPMIN {
                c = FPMIN;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < EPS {
                break;
            }
        }
        let ln_q = ln_front + h.ln();
        (ln_one_minus_exp(ln_q), ln_q)
    }
}

fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// `(ln I_x(a, b), ln (1 - I_x(a, b)))`.
///
/// `y` must equal `1 - x` but is passed separately so callers can supply it
/// without cancellation (e.g. `t^2 / (nu + t^2)` for the Student-t tail).
pub fn ln_beta_reg_pair(a: f64, b: f64, x: f64, y: f64) -> (f64, f64) {
    ln_beta_reg_pair_with_logs(a, b, x, y, x.ln(), y.ln())
}

/// As [`ln_beta_reg_pair`] with `ln x` and `ln y` supplied, for arguments
/// whose logarithms are finite even though `x` itself underflows.
pub fn ln_beta_reg_pair_with_logs(
    a: f64,
    b: f64,
    x: f64,
    y: f64,
    ln_x: f64,
    ln_y: f64,
) -> (f64, f64) {
    if ln_x == f64::NEG_INFINITY {
        return (f64::NEG_INFINITY, 0.0);
    }
    if ln_y == f64::NEG_INFINITY {
        return (0.0, f64::NEG_INFINITY);
    }
    let ln_front = a * ln_x + b * ln_y - ln_beta(a, b);
    if x < (a + 1.0) / (a + b + 2.0) {
        let ln_i = ln_front + beta_cf(a, b, x).ln() - a.ln();
        (ln_i, ln_one_minus_exp(ln_i))
    } else {
        let ln_c = ln_front + beta_cf(b, a, y).ln() - b.ln();
        (ln_one_minus_exp(ln_c), ln_c)
    }
}

#![allow(dead_code)]
//! Reference computations that share no code with the library.

use std::f64::consts::PI;

/// Composite Simpson rule with `2k` panels, Kahan-compensated.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, k: usize) -> f64 {
    let m = 2 * k;
    let h = (b - a) / m as f64;
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for i in 0..=m {
        let w = if i == 0 || i == m {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let y = w * f(a + i as f64 * h) - c;
        let t = s + y;
        c = (t - s) - y;
        s = t;
    }
    s * h / 3.0
}

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Standard normal cdf by quadrature from -14 (mass below is ~1e-44).
pub fn normal_cdf(z: f64) -> f64 {
    if z <= 0.0 {
        simpson(normal_pdf, -14.0, z, 40_000)
    } else {
        1.0 - simpson(normal_pdf, -14.0, -z, 40_000)
    }
}

fn ln_gamma_half_integer(x2: u64) -> f64 {
    // ln Gamma(x2 / 2) by the recurrence from Gamma(1/2) or Gamma(1)
    let mut acc = if x2 % 2 == 0 { 0.0 } else { 0.5 * PI.ln() };
    let mut k = if x2 % 2 == 0 { 2 } else { 1 };
    while k < x2 {
        acc += (k as f64 / 2.0).ln();
        k += 2;
    }
    acc
}

fn t_ln_norm(df: u64) -> f64 {
    ln_gamma_half_integer(df + 1) - ln_gamma_half_integer(df) - 0.5 * (df as f64 * PI).ln()
}

/// Log density of Student t with integer df.
pub fn t_ln_pdf(df: u64, t: f64) -> f64 {
    let v = df as f64;
    t_ln_norm(df) - 0.5 * (v + 1.0) * (1.0 + t * t / v).ln()
}

/// `P(T <= x)` for `x <= 0` by quadrature after `t = x - u / (1 - u)`.
pub fn t_cdf_lower(df: u64, x: f64) -> f64 {
    let c = t_ln_norm(df);
    let v = df as f64;
    let f = |u: f64| {
        let w = (1.0 - u).max(1e-12);
        let t = x - u / w;
        (c - 0.5 * (v + 1.0) * (1.0 + t * t / v).ln()).exp() / (w * w)
    };
    simpson(f, 0.0, 1.0, 50_000)
}

pub fn t_cdf(df: u64, x: f64) -> f64 {
    if x <= 0.0 {
        t_cdf_lower(df, x)
    } else {
        1.0 - t_cdf_lower(df, -x)
    }
}

/// `ln P(T <= x)` for `x < 0` by log-space quadrature: `t = x e^u`.
pub fn t_ln_lower_tail(df: u64, x: f64) -> f64 {
    assert!(x < 0.0);
    let c = t_ln_norm(df);
    let v = df as f64;
    let g = |u: f64| {
        let t = x * u.exp();
        c - 0.5 * (v + 1.0) * (1.0 + t * t / v).ln() + u + (-x).ln()
    };
    let peak = g(0.0);
    let upper = 60.0;
    peak + simpson(|u| (g(u) - peak).exp(), 0.0, upper, 400_000).ln()
}

/// Bisection for an increasing function.
pub fn bisect<F: Fn(f64) -> f64>(f: F, target: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `P(chi2_{2k} > x) = exp(-x/2) sum_{j<k} (x/2)^j / j!`.
pub fn chi2_even_sf(df: u64, x: f64) -> f64 {
    assert!(df % 2 == 0);
    let k = df / 2;
    let h = 0.5 * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for j in 1..k {
        term *= h / j as f64;
        sum += term;
    }
    (-h).exp() * sum
}

/// Normal lower tail log-probability from the Mills-ratio expansion,
/// valid for large `z`.
pub fn mills_ln_lower(z: f64) -> f64 {
    let z2 = z * z;
    -0.5 * z2 - (z * (2.0 * PI).sqrt()).ln()
        + (1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2)).ln()
}

/// Piecewise-linear cdf from cumulative Simpson integration of `pdf`
/// on `n` cells over `[a, b]`; accurate to ~1e-10 for smooth densities.
pub fn tabulated_cdf<F: Fn(f64) -> f64>(pdf: F, a: f64, b: f64, n: usize) -> impl Fn(f64) -> f64 {
    let h = (b - a) / n as f64;
    let mut table = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    table.push(0.0);
    for i in 0..n {
        let x0 = a + i as f64 * h;
        acc += h / 6.0 * (pdf(x0) + 4.0 * pdf(x0 + 0.5 * h) + pdf(x0 + h));
        table.push(acc);
    }
    move |x: f64| {
        if x <= a {
            return 0.0;
        }
        if x >= b {
            return table[n];
        }
        let r = (x - a) / h;
        let i = (r as usize).min(n - 1);
        let f = r - i as f64;
        table[i] + f * (table[i + 1] - table[i])
    }
}

/// Max deviation of the ECDF of `xs` from `cdf`.
pub fn ks_distance<F: Fn(f64) -> f64>(xs: &[f64], cdf: F) -> f64 {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            ((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn sd(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)).sqrt()
}

/// Kolmogorov limit law survival `2 sum (-1)^(k-1) exp(-2 k^2 l^2)`.
pub fn kolmogorov_q(l: f64) -> f64 {
    if l < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..200 {
        let k = k as f64;
        let sign = if k as u64 % 2 == 1 { 1.0 } else { -1.0 };
        s += sign * (-2.0 * k * k * l * l).exp();
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// One-sample KS p-value of `u` against U(0,1), Stephens' small-sample
/// correction.
pub fn ks_uniform_p(u: &[f64]) -> f64 {
    let d = ks_distance(u, |x| x.clamp(0.0, 1.0));
    let r = (u.len() as f64).sqrt();
    kolmogorov_q((r + 0.12 + 0.11 / r) * d)
}

/// Sup distance of two CDFs over a uniform grid.
pub fn sup_on_grid<F: Fn(f64) -> f64, G: Fn(f64) -> f64>(f: F, g: G, a: f64, b: f64, k: usize) -> f64 {
    (0..=k)
        .map(|i| a + (b - a) * i as f64 / k as f64)
        .map(|x| (f(x) - g(x)).abs())
        .fold(0.0, f64::max)
}

pub fn third_central_moment(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(3)).sum::<f64>() / xs.len() as f64
}
